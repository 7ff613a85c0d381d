//! The extended collocation system and its Newton solver.
//!
//! Unknowns are `(phi(x_1), ..., phi(x_N), B, theta)`. Speed and waveheight
//! move along a line in the `(c, a)` plane,
//! `c = c3 + theta dc_perp`, `a = a3 + theta da_perp`, so the solver can pass
//! turning points where `c` alone is not a valid parameter. The `N + 2`
//! equations are the collocation residual at every node, a boundary condition
//! and the waveheight pin `phi(x_1) - phi(x_N) = a`.

use serde::{Deserialize, Serialize};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::spectral::{max_abs, Discretization, Wave};

/// The scalar side condition closing the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Zero mean: sum of the node values.
    MeanZero,
    /// Integration constant pinned to zero.
    HomogeneousB,
    /// Trough at zero, `phi(x_N) = 0`: long waves that mimic solitary waves.
    Solitary,
    /// Integration constant pinned to `level`.
    ConstLevel { level: f64 },
}

impl BoundaryCondition {
    pub fn from_name(name: &str, level: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mean_zero" | "mean" => Ok(Self::MeanZero),
            "homogeneous" | "homogeneous_b" | "const" => Ok(Self::HomogeneousB),
            "solitary" => Ok(Self::Solitary),
            "const_level" => Ok(Self::ConstLevel {
                level: level.unwrap_or(0.0),
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary condition `{other}`"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MeanZero => "mean_zero",
            Self::HomogeneousB => "homogeneous_b",
            Self::Solitary => "solitary",
            Self::ConstLevel { .. } => "const_level",
        }
    }

    /// `Omega(phi, c, a, B)`.
    pub fn residual(&self, phi: &[f64], b: f64) -> f64 {
        match *self {
            Self::MeanZero => phi.iter().sum(),
            Self::HomogeneousB => b,
            Self::Solitary => phi[phi.len() - 1],
            Self::ConstLevel { level } => b - level,
        }
    }

    /// Writes `dOmega/d(phi, B, theta)` into `row` (length `N + 2`).
    fn jacobian_row(&self, row: &mut [f64]) {
        let n = row.len() - 2;
        row.fill(0.0);
        match self {
            Self::MeanZero => row[..n].fill(1.0),
            Self::HomogeneousB | Self::ConstLevel { .. } => row[n] = 1.0,
            Self::Solitary => row[n - 1] = 1.0,
        }
    }
}

/// Anchor `P3 = (c3, a3)` and the direction `d_perp` the solution may move along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationFrame {
    pub anchor: (f64, f64),
    pub normal: (f64, f64),
}

impl ContinuationFrame {
    pub fn new(anchor: (f64, f64), normal: (f64, f64)) -> Result<Self> {
        let norm = normal.0.hypot(normal.1);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("frame direction must be nonzero".into()));
        }
        Ok(Self { anchor, normal })
    }

    /// Waveheight held at `a`, speed free.
    pub fn fixed_waveheight(c: f64, a: f64) -> Self {
        Self {
            anchor: (c, a),
            normal: (1.0, 0.0),
        }
    }

    pub fn speed(&self, theta: f64) -> f64 {
        self.anchor.0 + theta * self.normal.0
    }

    pub fn waveheight(&self, theta: f64) -> f64 {
        self.anchor.1 + theta * self.normal.1
    }
}

/// A converged point of the extended system.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub wave: Wave,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
}

impl SolutionPoint {
    /// The trivial solution `phi = 0` at speed `c`.
    pub fn trivial(wave: Wave, c: f64) -> Self {
        Self {
            wave: Wave::zeros(wave.grid().clone()),
            c,
            a: 0.0,
            b: 0.0,
            theta: 0.0,
            residual_norm: 0.0,
            newton_iters: 0,
        }
    }

    /// Discrete L2 norm of the full-period profile, `sqrt(int phi^2)`.
    pub fn l2_norm(&self) -> f64 {
        let g = self.wave.grid();
        let dx = g.length() / (2 * g.n()) as f64;
        (2.0 * dx * self.wave.samples().iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 50,
        }
    }
}

fn unpack(state: &[f64]) -> (&[f64], f64, f64) {
    let n = state.len() - 2;
    (&state[..n], state[n], state[n + 1])
}

/// Residual of the extended system, length `N + 2`.
pub fn extended_residual(
    disc: &Discretization,
    bc: &BoundaryCondition,
    frame: &ContinuationFrame,
    phi: &[f64],
    b: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    let n = disc.n();
    if phi.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: phi.len(),
        });
    }
    let c = frame.speed(theta);
    let a = frame.waveheight(theta);
    let mut r = disc.steady_residual(phi, c, b)?;
    r.push(bc.residual(phi, b));
    r.push(phi[0] - phi[n - 1] - a);
    Ok(r)
}

/// Analytic Jacobian of [`extended_residual`].
pub fn jacobian(
    disc: &Discretization,
    bc: &BoundaryCondition,
    frame: &ContinuationFrame,
    phi: &[f64],
    _b: f64,
    theta: f64,
) -> Mat<f64> {
    let n = disc.n();
    let c = frame.speed(theta);
    let op = disc.operator_matrix();
    let eq = disc.equation();
    let mut jac = Mat::<f64>::zeros(n + 2, n + 2);
    for j in 0..n {
        for i in 0..n {
            jac[(i, j)] = op[(i, j)];
        }
    }
    for i in 0..n {
        jac[(i, i)] += -c + eq.flux_prime(phi[i]);
        jac[(i, n)] = -1.0;
        jac[(i, n + 1)] = -frame.normal.0 * phi[i];
    }
    let mut row = vec![0.0; n + 2];
    bc.jacobian_row(&mut row);
    for (j, v) in row.iter().enumerate() {
        jac[(n, j)] = *v;
    }
    jac[(n + 1, 0)] = 1.0;
    jac[(n + 1, n - 1)] += -1.0;
    jac[(n + 1, n + 1)] = -frame.normal.1;
    jac
}

/// Newton's method on the extended system.
pub fn newton_solve(
    disc: &Discretization,
    bc: &BoundaryCondition,
    frame: &ContinuationFrame,
    initial: &Wave,
    b0: f64,
    theta0: f64,
    opts: &NewtonOptions,
) -> Result<SolutionPoint> {
    newton_solve_traced(disc, bc, frame, initial, b0, theta0, opts).map(|(p, _)| p)
}

/// As [`newton_solve`], also returning the residual norm before every step.
pub fn newton_solve_traced(
    disc: &Discretization,
    bc: &BoundaryCondition,
    frame: &ContinuationFrame,
    initial: &Wave,
    b0: f64,
    theta0: f64,
    opts: &NewtonOptions,
) -> Result<(SolutionPoint, Vec<f64>)> {
    let n = disc.n();
    if initial.grid().n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: initial.grid().n(),
        });
    }
    let mut state: Vec<f64> = initial.samples().to_vec();
    state.push(b0);
    state.push(theta0);
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial guess is not finite".into()));
    }
    let mut history = Vec::new();
    let mut iters = 0;
    loop {
        let (phi, b, theta) = unpack(&state);
        let r = extended_residual(disc, bc, frame, phi, b, theta)?;
        let norm = max_abs(&r);
        history.push(norm);
        if norm <= opts.tol {
            let wave = Wave::new(disc.grid().clone(), phi.to_vec())?;
            let point = SolutionPoint {
                wave,
                c: frame.speed(theta),
                a: frame.waveheight(theta),
                b,
                theta,
                residual_norm: norm,
                newton_iters: iters,
            };
            return Ok((point, history));
        }
        if iters >= opts.max_iters || !norm.is_finite() || norm > 1e8 {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: norm,
                last_iterate: state,
            });
        }
        let jac = jacobian(disc, bc, frame, phi, b, theta);
        let delta = solve_dense(&jac, &r)?;
        for (s, d) in state.iter_mut().zip(&delta) {
            *s -= d;
        }
        iters += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{Equation, Model};
    use std::f64::consts::PI;

    fn disc(model: Model, length: f64, n: usize) -> Discretization {
        Discretization::new(Equation::new(model, length).unwrap(), n).unwrap()
    }

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed ^ 0x9E37_79B9_7F4A_7C15;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn trivial_point_has_zero_residual() {
        let d = disc(Model::Kdv, 2.0 * PI, 16);
        let frame = ContinuationFrame::new((5.0 / 6.0, 0.0), (0.0, 1.0)).unwrap();
        let r = extended_residual(&d, &BoundaryCondition::MeanZero, &frame, &[0.0; 16], 0.0, 0.0)
            .unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn homogeneous_row_reports_b() {
        let d = disc(Model::Kdv, 2.0 * PI, 8);
        let frame = ContinuationFrame::fixed_waveheight(0.8, 0.0);
        let r = extended_residual(&d, &BoundaryCondition::HomogeneousB, &frame, &[0.0; 8], 0.5, 0.0)
            .unwrap();
        assert_eq!(r[8], 0.5);
    }

    #[test]
    fn boundary_rows() {
        let phi = [1.0, 2.0, 3.0];
        assert_eq!(BoundaryCondition::MeanZero.residual(&phi, 9.0), 6.0);
        assert_eq!(BoundaryCondition::Solitary.residual(&phi, 9.0), 3.0);
        assert_eq!(BoundaryCondition::ConstLevel { level: 1.0 }.residual(&phi, 9.0), 8.0);
        let mut row = vec![7.0; 5];
        BoundaryCondition::MeanZero.jacobian_row(&mut row);
        assert_eq!(row, vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn stokes_residual_is_quadratic_in_amplitude() {
        let d = disc(Model::Kdv, 2.0 * PI, 32);
        let c0 = 5.0 / 6.0;
        let norms: Vec<f64> = [1e-3, 2e-3, 4e-3]
            .iter()
            .map(|&a| {
                let w = Wave::from_fn(d.grid().clone(), |x| 0.5 * a * x.cos());
                let frame = ContinuationFrame::fixed_waveheight(c0, a);
                let r = extended_residual(&d, &BoundaryCondition::MeanZero, &frame, w.samples(), 0.0, 0.0)
                    .unwrap();
                max_abs(&r[..32])
            })
            .collect();
        for w in norms.windows(2) {
            let slope = (w[1] / w[0]).log2();
            assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let bcs = [
            BoundaryCondition::MeanZero,
            BoundaryCondition::HomogeneousB,
            BoundaryCondition::Solitary,
            BoundaryCondition::ConstLevel { level: 0.2 },
        ];
        for (k, model) in [Model::Whitham, Model::ModifiedBenjaminOno, Model::Kdv].into_iter().enumerate() {
            let d = disc(model, 2.0 * PI, 12);
            let frame = ContinuationFrame::new((0.9, 0.3), (-0.6, 0.8)).unwrap();
            for (m, bc) in bcs.iter().enumerate() {
                let mut state = lcg(14, (k * 10 + m) as u64);
                state[13] = 0.37;
                let (phi, b, theta) = unpack(&state);
                let jac = jacobian(&d, bc, &frame, phi, b, theta);
                let h = 1e-6;
                for j in 0..14 {
                    let mut plus = state.clone();
                    let mut minus = state.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let (pp, pb, pt) = unpack(&plus);
                    let (mp, mb, mt) = unpack(&minus);
                    let rp = extended_residual(&d, bc, &frame, pp, pb, pt).unwrap();
                    let rm = extended_residual(&d, bc, &frame, mp, mb, mt).unwrap();
                    for i in 0..14 {
                        let fd = (rp[i] - rm[i]) / (2.0 * h);
                        let an = jac[(i, j)];
                        assert!(
                            (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                            "{model} {bc:?} ({i},{j}): fd {fd} vs {an}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn identity_block_for_trivial_operator() {
        let d = disc(Model::Kdv, 1e12, 6);
        let frame = ContinuationFrame::fixed_waveheight(0.0, 0.0);
        // KdV flux' vanishes at phi = 0, so the block is L^N - 0 I = I.
        let jac = jacobian(&d, &BoundaryCondition::MeanZero, &frame, &[0.0; 6], 0.0, 0.0);
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((jac[(i, j)] - e).abs() < 1e-12);
            }
        }
        let row: Vec<f64> = (0..8).map(|j| jac[(6, j)]).collect();
        assert_eq!(row, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn newton_from_stokes_guess_kdv() {
        let d = disc(Model::Kdv, 2.0 * PI, 32);
        let a = 0.01;
        let guess = Wave::from_fn(d.grid().clone(), |x| 0.5 * a * x.cos());
        let frame = ContinuationFrame::fixed_waveheight(5.0 / 6.0, a);
        let bc = BoundaryCondition::MeanZero;
        let (p, hist) =
            newton_solve_traced(&d, &bc, &frame, &guess, 0.0, 0.0, &NewtonOptions::default()).unwrap();
        assert!(p.newton_iters <= 8, "{hist:?}");
        assert!((p.wave.waveheight() - a).abs() <= 1e-11);
        assert!(p.wave.samples().iter().sum::<f64>().abs() <= 1e-11);
        let r = d.steady_residual(p.wave.samples(), p.c, p.b).unwrap();
        assert!(max_abs(&r) <= 1e-11);

        // restarting from the converged point is a fixed point
        let again = newton_solve(&d, &bc, &frame, &p.wave, p.b, p.theta, &NewtonOptions::default()).unwrap();
        assert!(again.newton_iters <= 1);
        for (u, v) in again.wave.samples().iter().zip(p.wave.samples()) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let d = disc(Model::Kdv, 2.0 * PI, 64);
        let a = 0.3;
        let guess = Wave::from_fn(d.grid().clone(), |x| 0.5 * a * x.cos());
        let frame = ContinuationFrame::fixed_waveheight(5.0 / 6.0, a);
        let (_, hist) = newton_solve_traced(
            &d,
            &BoundaryCondition::MeanZero,
            &frame,
            &guess,
            0.0,
            0.0,
            &NewtonOptions::default(),
        )
        .unwrap();
        let slopes: Vec<f64> = hist
            .windows(3)
            .filter(|w| w[1] < 1e-3 && w[2] > 1e-13)
            .map(|w| (w[2] / w[1]).ln() / (w[1] / w[0]).ln())
            .collect();
        assert!(!slopes.is_empty(), "{hist:?}");
        assert!(slopes.iter().all(|s| *s >= 1.8), "{hist:?} {slopes:?}");
    }

    #[test]
    fn whitham_homogeneous_wave_is_monotone() {
        let d = disc(Model::Whitham, 2.0 * PI, 64);
        let a = 0.1;
        let c0 = Model::Whitham.symbol(1.0);
        let guess = Wave::from_fn(d.grid().clone(), |x| 0.5 * a * x.cos());
        let frame = ContinuationFrame::fixed_waveheight(c0, a);
        let p = newton_solve(
            &d,
            &BoundaryCondition::HomogeneousB,
            &frame,
            &guess,
            0.0,
            0.0,
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(p.b.abs() <= 1e-11);
        let s = p.wave.samples();
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert!(p.c < c0);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // With the speed free and the waveheight pinned at zero, the trivial
        // solution at the bifurcation speed has a two-dimensional kernel.
        let d = disc(Model::Kdv, 2.0 * PI, 16);
        let frame = ContinuationFrame::new((5.0 / 6.0, 0.0), (1.0, 0.0)).unwrap();
        let zero = Wave::zeros(d.grid().clone());
        let tight = NewtonOptions { tol: 0.0, max_iters: 3 };
        let err = newton_solve(&d, &BoundaryCondition::HomogeneousB, &frame, &zero, 1e-3, 0.0, &tight)
            .unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }), "{err:?}");
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let d = disc(Model::Kdv, 2.0 * PI, 16);
        let frame = ContinuationFrame::fixed_waveheight(5.0 / 6.0, 0.2);
        let guess = Wave::from_fn(d.grid().clone(), |x| 0.1 * x.cos());
        let opts = NewtonOptions { tol: 1e-12, max_iters: 1 };
        match newton_solve(&d, &BoundaryCondition::MeanZero, &frame, &guess, 0.0, 0.0, &opts) {
            Err(Error::NoConvergence { iterations, last_iterate, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last_iterate.len(), 18);
            }
            other => panic!("{other:?}"),
        }
    }
}
