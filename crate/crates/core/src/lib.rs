//! Periodic and solitary traveling waves of nonlocal dispersive equations
//!
//! ```text
//! u_t + [f(u)]_x + L u_x = 0
//! ```
//!
//! where `L` is a Fourier multiplier with an even real symbol `alpha(k)`.
//! Even wave profiles are discretized by cosine collocation on a half period,
//! solved with Newton's method on a system extended by the speed, the
//! integration constant and a side condition, and followed from the trivial
//! solution through the speed-waveheight plane.
//!
//! ```
//! use std::f64::consts::PI;
//! use travwave::continuation::{run, start_branch, NavigationOptions};
//! use travwave::diagnostics::{BranchReport, FitPoints};
//! use travwave::equations::{Equation, Model};
//! use travwave::solver::BoundaryCondition;
//! use travwave::spectral::Discretization;
//!
//! let eq = Equation::new(Model::Whitham, 2.0 * PI)?;
//! let disc = Discretization::new(eq, 64)?;
//! let opts = NavigationOptions::default();
//! let mut branch = start_branch(&disc, BoundaryCondition::HomogeneousB, &opts)?;
//! run(&disc, &mut branch, 10, &opts);
//!
//! let report = BranchReport::build(&branch, FitPoints::None)?;
//! // Whitham waves slow down as they grow.
//! assert!(report.points[10].c < report.points[0].c);
//! # Ok::<(), travwave::error::Error>(())
//! ```
//!
//! The modules, bottom up:
//!
//! * [`equations`]: the model catalog.
//! * [`spectral`]: grids, the cosine transform pair and the dispersion operator.
//! * [`solver`]: the extended system and Newton's method.
//! * [`stokes`]: small-amplitude expansions for initial guesses.
//! * [`continuation`]: branch following and grid refinement.
//! * [`diagnostics`]: functionals, stability signs, shape and decay fits, reports.
//! * [`evolution`]: full-period time stepping to test computed waves.

pub mod continuation;
pub mod diagnostics;
pub mod equations;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod solver;
pub mod spectral;
pub mod stokes;
