//! Branch following in the speed-waveheight plane.
//!
//! From the last two points `P1`, `P2` of a branch, the secant direction `d`
//! (normalized) gives the predicted anchor `P3 = P2 + s d`. The corrector
//! then looks for a solution on the line through `P3` orthogonal to `d`,
//! which is exactly the [`ContinuationFrame`] handed to Newton's method.
//! Branches start at the bifurcation point `(alpha(2 pi / L), 0)` of the
//! trivial solution.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::crest_count;
use crate::equations::Equation;
use crate::error::{Error, Result};
use crate::solver::{newton_solve, BoundaryCondition, ContinuationFrame, NewtonOptions, SolutionPoint};
use crate::spectral::{fmt_f64, refine, Discretization, Wave};
use crate::stokes::{initial_guess, GuessKind};

/// A point of the `(c, a)` plane.
pub type Point2 = (f64, f64);

/// Unit secant direction from `p1` to `p2`.
pub fn direction(p1: Point2, p2: Point2) -> Result<Point2> {
    let (dc, da) = (p2.0 - p1.0, p2.1 - p1.1);
    let norm = dc.hypot(da);
    if !(norm > 0.0) {
        return Err(Error::Degenerate(format!(
            "direction needs distinct points, got {p1:?} twice"
        )));
    }
    Ok((dc / norm, da / norm))
}

/// `P3 = P2 + s d`.
pub fn predict(p2: Point2, d: Point2, s: f64) -> Point2 {
    (p2.0 + s * d.0, p2.1 + s * d.1)
}

/// Quarter turn counter-clockwise: `(dc, da) -> (-da, dc)`.
pub fn orthogonal(d: Point2) -> Point2 {
    (-d.1, d.0)
}

/// Why a branch run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    NoConvergence,
    SingularJacobian,
    /// The profile developed a second crest.
    CrestSplit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::MaxSteps => "max-steps",
            Termination::NoConvergence => "no-convergence",
            Termination::SingularJacobian => "singular-jacobian",
            Termination::CrestSplit => "crest-split",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationOptions {
    /// Step length `s` in the `(c, a)` plane; also the cap when growing back.
    pub step: f64,
    pub max_halvings: usize,
    /// A Newton solve taking at most this many iterations counts as easy.
    pub easy_iters: usize,
    /// Consecutive easy solves before the step doubles back.
    pub easy_streak: usize,
    /// Waveheight of the bootstrap point `P2`.
    pub bootstrap_amplitude: f64,
    pub guess: GuessKind,
    /// Stop once the profile develops a second crest.
    pub stop_on_crest_split: bool,
    pub newton: NewtonOptions,
}

impl Default for NavigationOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_halvings: 6,
            easy_iters: 4,
            easy_streak: 3,
            bootstrap_amplitude: 1e-3,
            guess: GuessKind::FirstOrder,
            stop_on_crest_split: false,
            newton: NewtonOptions::default(),
        }
    }
}

/// Frame and step length used to reach a branch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: f64,
    pub frame: ContinuationFrame,
}

/// An ordered list of solutions on one bifurcation curve.
#[derive(Debug, Clone)]
pub struct Branch {
    pub equation: Equation,
    pub bc: BoundaryCondition,
    pub n: usize,
    pub points: Vec<SolutionPoint>,
    /// `records[i]` produced `points[i]`; the trivial point has none.
    pub records: Vec<Option<StepRecord>>,
    pub termination: Option<Termination>,
    /// First point whose mirrored profile has more than one crest.
    pub first_multi_crest: Option<usize>,
    step: f64,
    streak: usize,
}

impl Branch {
    pub fn new(equation: Equation, bc: BoundaryCondition, n: usize, step: f64) -> Self {
        Self {
            equation,
            bc,
            n,
            points: Vec::new(),
            records: Vec::new(),
            termination: None,
            first_multi_crest: None,
            step,
            streak: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&SolutionPoint> {
        self.points.last()
    }

    /// Current step length.
    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn push(&mut self, point: SolutionPoint, record: Option<StepRecord>) {
        if self.first_multi_crest.is_none() && point.a > 0.0 && crest_count(&point.wave) > 1 {
            self.first_multi_crest = Some(self.points.len());
        }
        self.points.push(point);
        self.records.push(record);
    }

    /// `index,c,a,B,theta,l2_norm,residual_norm,newton_iters,grid_N`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,c,a,B,theta,l2_norm,residual_norm,newton_iters,grid_N")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{}",
                fmt_f64(p.c),
                fmt_f64(p.a),
                fmt_f64(p.b),
                fmt_f64(p.theta),
                fmt_f64(p.l2_norm()),
                fmt_f64(p.residual_norm),
                p.newton_iters,
                p.wave.grid().n()
            )?;
        }
        Ok(())
    }
}

/// The trivial point `P1 = (c0, 0)` and a first nontrivial point `P2` at
/// waveheight `a0`, found with the waveheight held and the speed free.
pub fn bootstrap(
    disc: &Discretization,
    bc: &BoundaryCondition,
    a0: f64,
    guess: GuessKind,
    newton: &NewtonOptions,
) -> Result<(SolutionPoint, SolutionPoint)> {
    if !(a0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bootstrap waveheight must be positive, got {a0}"
        )));
    }
    let eq = disc.equation();
    let c0 = eq.symbol(eq.k0());
    let zero = Wave::zeros(disc.grid().clone());
    let p1 = SolutionPoint::trivial(zero, c0);
    let (mut wave, c_guess) = initial_guess(disc, a0, guess)?;
    if matches!(bc, BoundaryCondition::Solitary) {
        let trough = wave.samples()[wave.samples().len() - 1];
        wave = Wave::new(
            wave.grid().clone(),
            wave.samples().iter().map(|v| v - trough).collect(),
        )?;
    }
    let frame = ContinuationFrame::fixed_waveheight(c_guess, a0);
    let p2 = newton_solve(disc, bc, &frame, &wave, 0.0, 0.0, newton)?;
    Ok((p1, p2))
}

/// Starts a branch with [`bootstrap`].
pub fn start_branch(
    disc: &Discretization,
    bc: BoundaryCondition,
    opts: &NavigationOptions,
) -> Result<Branch> {
    let (p1, p2) = bootstrap(disc, &bc, opts.bootstrap_amplitude, opts.guess, &opts.newton)?;
    let mut branch = Branch::new(*disc.equation(), bc, disc.n(), opts.step);
    let frame = ContinuationFrame::fixed_waveheight(p2.c - p2.theta, p2.a);
    branch.push(p1, None);
    branch.push(
        p2,
        Some(StepRecord {
            step: opts.bootstrap_amplitude,
            frame,
        }),
    );
    Ok(branch)
}

fn classify(err: &Error) -> Termination {
    match err {
        Error::SingularJacobian { .. } => Termination::SingularJacobian,
        _ => Termination::NoConvergence,
    }
}

/// One predictor-corrector step. On failure the step is halved and retried
/// up to `opts.max_halvings` times before the branch is declared terminated.
pub fn step<'a>(
    disc: &Discretization,
    branch: &'a mut Branch,
    opts: &NavigationOptions,
) -> Result<&'a SolutionPoint> {
    let len = branch.points.len();
    if len < 2 {
        return Err(Error::InvalidArgument(
            "a step needs two points on the branch; bootstrap first".into(),
        ));
    }
    let prev = &branch.points[len - 2];
    let last = &branch.points[len - 1];
    let p1 = (prev.c, prev.a);
    let p2 = (last.c, last.a);
    let d = direction(p1, p2)?;
    let normal = orthogonal(d);
    let mut s = branch.step;
    let mut last_err = None;
    for _ in 0..=opts.max_halvings {
        let p3 = predict(p2, d, s);
        let frame = ContinuationFrame::new(p3, normal)?;
        let guess = if last.a != 0.0 {
            last.wave.scaled(p3.1 / last.a)
        } else {
            last.wave.clone()
        };
        match newton_solve(disc, &branch.bc, &frame, &guess, last.b, 0.0, &opts.newton) {
            Ok(point) if point.c != p2.0 || point.a != p2.1 => {
                if point.newton_iters <= opts.easy_iters {
                    branch.streak += 1;
                } else {
                    branch.streak = 0;
                }
                branch.step = s;
                if branch.streak >= opts.easy_streak && s < opts.step {
                    branch.step = (2.0 * s).min(opts.step);
                    branch.streak = 0;
                }
                branch.push(point, Some(StepRecord { step: s, frame }));
                return Ok(branch.points.last().expect("just pushed"));
            }
            Ok(_) => last_err = Some(Error::Degenerate("corrector returned the previous point".into())),
            Err(e) => last_err = Some(e),
        }
        s *= 0.5;
        branch.streak = 0;
    }
    let reason = last_err.as_ref().map(classify).unwrap_or(Termination::NoConvergence);
    branch.termination = Some(reason);
    Err(Error::BranchTerminated(format!(
        "{reason}: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Takes up to `n_steps` continuation steps and records why the run ended.
pub fn run(disc: &Discretization, branch: &mut Branch, n_steps: usize, opts: &NavigationOptions) -> Termination {
    for _ in 0..n_steps {
        match step(disc, branch, opts) {
            Ok(_) => {
                if opts.stop_on_crest_split && branch.first_multi_crest.is_some() {
                    branch.termination = Some(Termination::CrestSplit);
                    return Termination::CrestSplit;
                }
            }
            Err(_) => return branch.termination.unwrap_or(Termination::NoConvergence),
        }
    }
    branch.termination = Some(Termination::MaxSteps);
    Termination::MaxSteps
}

/// Continues from the bifurcation point until the waveheight passes
/// `target`, then solves at exactly `target` with the speed free.
///
/// Returns the branch walked and the pinned solution.
pub fn continue_to_waveheight(
    disc: &Discretization,
    bc: BoundaryCondition,
    target: f64,
    max_steps: usize,
    opts: &NavigationOptions,
) -> Result<(Branch, SolutionPoint)> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target waveheight must be positive, got {target}")));
    }
    let mut branch = start_branch(disc, bc, opts)?;
    let mut steps = 0;
    while branch.last().expect("bootstrapped").a < target {
        if steps == max_steps {
            return Err(Error::BranchTerminated(format!(
                "waveheight {target} not reached in {max_steps} steps"
            )));
        }
        step(disc, &mut branch, opts)?;
        steps += 1;
    }
    let near = branch
        .points
        .iter()
        .filter(|p| p.a > 0.0)
        .min_by(|p, q| (p.a - target).abs().total_cmp(&(q.a - target).abs()))
        .expect("bootstrapped");
    let frame = ContinuationFrame::fixed_waveheight(near.c, target);
    let guess = near.wave.scaled(target / near.a);
    let point = newton_solve(disc, &branch.bc, &frame, &guess, near.b, 0.0, &opts.newton)?;
    Ok((branch, point))
}

/// One wave of fixed waveheight on a sequence of grids.
///
/// The first grid is reached by [`continue_to_waveheight`]; every later grid
/// starts from the spectral interpolant of the previous solution. Each grid
/// size must be an integer multiple of the one before it.
pub fn solve_on_grids(
    equation: Equation,
    bc: BoundaryCondition,
    target: f64,
    grids: &[usize],
    max_steps: usize,
    opts: &NavigationOptions,
) -> Result<Vec<SolutionPoint>> {
    let Some((&first, rest)) = grids.split_first() else {
        return Err(Error::InvalidArgument("at least one grid size is required".into()));
    };
    let disc = Discretization::new(equation, first)?;
    let (_, mut point) = continue_to_waveheight(&disc, bc, target, max_steps, opts)?;
    let mut out = Vec::with_capacity(grids.len());
    let mut n = first;
    for &next in rest {
        if next <= n || next % n != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid sizes must grow by integer factors, got {n} then {next}"
            )));
        }
        let disc = Discretization::new(equation, next)?;
        let guess = refine(&point.wave, next / n)?;
        let frame = ContinuationFrame::fixed_waveheight(point.c, target);
        let fine = newton_solve(&disc, &bc, &frame, &guess, point.b, 0.0, &opts.newton)?;
        out.push(std::mem::replace(&mut point, fine));
        n = next;
    }
    out.push(point);
    Ok(out)
}

/// A point that could not be re-solved on a finer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineFailure {
    pub grid_n: usize,
    pub index: usize,
    pub reason: String,
}

/// All refinement levels of a branch; `levels[0]` is the input grid.
#[derive(Debug, Clone)]
pub struct RefinedBranch {
    pub levels: Vec<Vec<Option<SolutionPoint>>>,
    pub grid_sizes: Vec<usize>,
    pub failures: Vec<RefineFailure>,
}

impl RefinedBranch {
    /// The finest level as a branch of the points that survived every stage.
    pub fn finest(&self, template: &Branch) -> Branch {
        let n = *self.grid_sizes.last().expect("at least the input level");
        let mut out = Branch::new(template.equation, template.bc, n, template.step);
        for (p, rec) in self
            .levels
            .last()
            .expect("at least the input level")
            .iter()
            .zip(&template.records)
        {
            if let Some(p) = p {
                out.push(p.clone(), *rec);
            }
        }
        out.termination = template.termination;
        out
    }
}

/// Doubles the grid `doublings` times. Each point is spectrally refined and
/// re-solved with its waveheight held and its speed free.
pub fn refine_branch(branch: &Branch, doublings: usize, newton: &NewtonOptions) -> Result<RefinedBranch> {
    if doublings < 1 {
        return Err(Error::InvalidArgument("doubling parameter must be >= 1".into()));
    }
    let mut levels = vec![branch.points.iter().cloned().map(Some).collect::<Vec<_>>()];
    let mut grid_sizes = vec![branch.n];
    let mut failures = Vec::new();
    let mut n = branch.n;
    for _ in 0..doublings {
        n *= 2;
        let disc = Discretization::new(branch.equation, n)?;
        let prev = levels.last().expect("nonempty");
        let mut next = Vec::with_capacity(prev.len());
        for (index, p) in prev.iter().enumerate() {
            let Some(p) = p else {
                next.push(None);
                continue;
            };
            let fine = refine(&p.wave, 2)?;
            if p.a == 0.0 && p.wave.samples().iter().all(|v| *v == 0.0) {
                next.push(Some(SolutionPoint {
                    wave: fine,
                    ..p.clone()
                }));
                continue;
            }
            let frame = ContinuationFrame::fixed_waveheight(p.c, p.a);
            match newton_solve(&disc, &branch.bc, &frame, &fine, p.b, 0.0, newton) {
                Ok(q) => next.push(Some(q)),
                Err(e) => {
                    failures.push(RefineFailure {
                        grid_n: n,
                        index,
                        reason: e.to_string(),
                    });
                    next.push(None);
                }
            }
        }
        levels.push(next);
        grid_sizes.push(n);
    }
    Ok(RefinedBranch {
        levels,
        grid_sizes,
        failures,
    })
}
