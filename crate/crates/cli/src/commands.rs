use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use travwave::continuation::{self, refine_branch, Branch, NavigationOptions, StepRecord, Termination};
use travwave::diagnostics::{BranchReport, FitPoints};
use travwave::equations::ExactSolitary;
use travwave::error::Error;
use travwave::evolution::{conserved, default_dt, evolve, fit_shift, mirror_to_full_sized, write_trajectory};
use travwave::solver::SolutionPoint;
use travwave::spectral::{fmt_f64, max_abs, Discretization, Wave};

use crate::config::RunConfig;
use crate::plot::Plot;

/// How a command that produced its artifacts ended.
#[derive(Debug)]
pub enum Outcome {
    Done,
    /// A numerical event cut the run short; artifacts are still on disk.
    Early(String),
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    f(&mut out).with_context(|| format!("writing {}", path.display()))?;
    out.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn fits(cfg: Option<&RunConfig>) -> FitPoints {
    match cfg.and_then(|c| c.analyze.fits.as_deref()) {
        Some("all") => FitPoints::All,
        Some("none") => FitPoints::None,
        _ => FitPoints::Key,
    }
}

/// Walks a branch, honouring the optional waveheight target.
///
/// Returns the branch and, when the walk ended early, the reason.
fn walk(cfg: &RunConfig, disc: &Discretization, nav: &NavigationOptions) -> Result<(Branch, Option<String>)> {
    let mut branch = continuation::start_branch(disc, cfg.boundary()?, nav)?;
    let target = cfg.branch.stop_at_waveheight;
    for _ in 0..cfg.branch.n_iter {
        if target.is_some_and(|t| branch.last().expect("bootstrapped").a >= t) {
            return Ok((branch, None));
        }
        if let Err(e) = continuation::step(disc, &mut branch, nav) {
            return Ok((branch, Some(e.to_string())));
        }
        if nav.stop_on_crest_split && branch.first_multi_crest.is_some() {
            branch.termination = Some(Termination::CrestSplit);
            return Ok((branch, None));
        }
    }
    if target.is_some_and(|t| branch.last().expect("bootstrapped").a >= t) {
        return Ok((branch, None));
    }
    branch.termination = Some(Termination::MaxSteps);
    Ok((branch, None))
}

fn termination_label(branch: &Branch) -> String {
    branch
        .termination
        .map_or_else(|| "target-reached".to_string(), |t| t.to_string())
}

/// `branch.csv`, `report.csv`, `report.json`, profiles and plots.
fn write_branch(dir: &Path, branch: &Branch, cfg: &RunConfig, fit: FitPoints) -> Result<BranchReport> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_with(&dir.join("branch.csv"), |o| branch.write_csv(o))?;
    let mut report = BranchReport::build(branch, fit)?;
    report.termination = Some(termination_label(branch));
    write_report(dir, &report)?;
    if cfg.output.profiles {
        write_profiles(dir, branch)?;
    }
    if cfg.output.plots {
        let ca: Vec<(f64, f64)> = report.points.iter().map(|p| (p.c, p.a)).collect();
        let cl: Vec<(f64, f64)> = report.points.iter().map(|p| (p.c, p.l2)).collect();
        let name = report.equation.model.name();
        let title = format!("{name}, N = {}", report.grid_n);
        fs::write(
            dir.join("bifurcation.svg"),
            Plot { title: &title, x_label: "speed c", y_label: "waveheight a", points: &ca }.render(),
        )?;
        fs::write(
            dir.join("norm.svg"),
            Plot { title: &title, x_label: "speed c", y_label: "L2 norm", points: &cl }.render(),
        )?;
    }
    Ok(report)
}

fn write_report(dir: &Path, report: &BranchReport) -> Result<()> {
    write_with(&dir.join("report.csv"), |o| report.write_csv(o))?;
    write_json(&dir.join("report.json"), report)
}

fn write_profiles(dir: &Path, branch: &Branch) -> Result<()> {
    let pdir = dir.join("profiles");
    fs::create_dir_all(&pdir)?;
    for (i, p) in branch.points.iter().enumerate() {
        write_with(&pdir.join(format!("point_{i:05}.csv")), |o| p.wave.write_csv(o))?;
    }
    Ok(())
}

fn early(reason: Option<String>) -> Outcome {
    reason.map_or(Outcome::Done, Outcome::Early)
}

pub fn branch(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let disc = Discretization::new(cfg.equation()?, cfg.grid.n)?;
    let (branch, reason) = walk(cfg, &disc, &cfg.navigation()?)?;
    write_branch(out, &branch, cfg, fits(Some(cfg)))?;
    Ok(early(reason))
}

pub fn refine(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let disc = Discretization::new(cfg.equation()?, cfg.grid.n)?;
    let (coarse, reason) = walk(cfg, &disc, &cfg.navigation()?)?;
    let fit = fits(Some(cfg));
    write_branch(&out.join("coarse"), &coarse, cfg, fit)?;
    let refined = refine_branch(&coarse, cfg.grid.doublings, &cfg.newton())?;
    let finest = refined.finest(&coarse);
    write_branch(out, &finest, cfg, fit)?;

    write_with(&out.join("refinement.csv"), |o| {
        writeln!(o, "index,grid_N,c,a,delta_c,residual_norm,status")?;
        for i in 0..coarse.points.len() {
            let mut prev_c: Option<f64> = None;
            for (level, &n) in refined.levels.iter().zip(&refined.grid_sizes) {
                match &level[i] {
                    Some(p) => {
                        let dc = prev_c.map_or(String::new(), |c| fmt_f64(p.c - c));
                        writeln!(
                            o,
                            "{i},{n},{},{},{dc},{},ok",
                            fmt_f64(p.c),
                            fmt_f64(p.a),
                            fmt_f64(p.residual_norm)
                        )?;
                        prev_c = Some(p.c);
                    }
                    None => {
                        writeln!(o, "{i},{n},,,,,failed")?;
                        prev_c = None;
                    }
                }
            }
        }
        Ok(())
    })?;

    if reason.is_some() {
        return Ok(early(reason));
    }
    if let Some(f) = refined.failures.first() {
        return Ok(Outcome::Early(format!(
            "{} point(s) failed to refine; first: point {} at N = {}: {}",
            refined.failures.len(),
            f.index,
            f.grid_n,
            f.reason
        )));
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct EvolutionSummary {
    equation: String,
    length: f64,
    grid_m: usize,
    dt: f64,
    t_end: f64,
    snapshots: usize,
    mass: f64,
    momentum: f64,
    max_mass_drift: f64,
    max_momentum_drift: f64,
    final_shift: Option<f64>,
    final_residual_energy: Option<f64>,
    /// Largest `sqrt(residual_energy / momentum)` over the snapshots.
    max_relative_deviation: Option<f64>,
    shape_preserved: Option<bool>,
    blowup_time: Option<f64>,
}

pub fn evolve_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let eq = cfg.equation()?;
    let path = cfg
        .evolution
        .profile
        .as_ref()
        .ok_or_else(|| anyhow!("evolution.profile is required for evolve"))?;
    let file = File::open(path).with_context(|| format!("opening profile {}", path.display()))?;
    let wave = Wave::read_csv(BufReader::new(file), eq.length())
        .with_context(|| format!("reading profile {}", path.display()))?;
    let m = cfg.evolution.grid.unwrap_or(2 * wave.grid().n());
    let u0 = mirror_to_full_sized(&wave, m)?;
    let ecfg = cfg.evolution_config();
    let requested = ecfg.dt.unwrap_or_else(|| default_dt(&eq, &u0, ecfg.t_end));
    let dt = ecfg.t_end / (ecfg.t_end / requested).ceil().max(1.0);
    let (mass, momentum) = conserved(&u0);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut summary = EvolutionSummary {
        equation: eq.model.name().to_string(),
        length: eq.length(),
        grid_m: m,
        dt,
        t_end: ecfg.t_end,
        snapshots: 0,
        mass,
        momentum,
        max_mass_drift: 0.0,
        max_momentum_drift: 0.0,
        final_shift: None,
        final_residual_energy: None,
        max_relative_deviation: None,
        shape_preserved: None,
        blowup_time: None,
    };
    let trajectory = match evolve(&eq, &u0, &ecfg) {
        Ok(t) => t,
        Err(Error::BlowUp { time, max_abs }) => {
            summary.blowup_time = Some(time);
            write_json(&out.join("summary.json"), &summary)?;
            return Ok(Outcome::Early(format!("blow-up at t = {time} (max |u| = {max_abs:.3e})")));
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&out.join("trajectory"), &trajectory).context("writing trajectory")?;

    let mut rows = Vec::with_capacity(trajectory.len());
    let mut deviation = 0.0f64;
    for s in &trajectory {
        let (ms, mo) = conserved(&s.field);
        let (shift, energy) = fit_shift(&s.field, &u0)?;
        if momentum > 0.0 {
            deviation = deviation.max((energy / momentum).sqrt());
        }
        summary.max_mass_drift = summary.max_mass_drift.max((ms - mass).abs());
        summary.max_momentum_drift = summary.max_momentum_drift.max((mo - momentum).abs());
        rows.push((s.t, shift, energy, ms - mass, mo - momentum));
    }
    write_with(&out.join("deviation.csv"), |o| {
        writeln!(o, "t,shift,residual_energy,mass_drift,momentum_drift")?;
        for r in &rows {
            writeln!(o, "{},{},{},{},{}", fmt_f64(r.0), fmt_f64(r.1), fmt_f64(r.2), fmt_f64(r.3), fmt_f64(r.4))?;
        }
        Ok(())
    })?;
    let last = rows.last().expect("initial snapshot");
    summary.snapshots = trajectory.len();
    summary.final_shift = Some(last.1);
    summary.final_residual_energy = Some(last.2);
    summary.max_relative_deviation = Some(deviation);
    summary.shape_preserved = Some(deviation <= cfg.evolution.deviation_tol);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome::Done)
}

pub fn converge(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let eq = cfg.equation()?;
    let target = cfg.converge.waveheight;
    if eq.exact_solitary(target).is_none() {
        return Err(Error::NoExactSolution(format!("{} at waveheight {target}", eq.model.name())).into());
    }
    let points = continuation::solve_on_grids(
        eq,
        cfg.boundary()?,
        target,
        &cfg.converge.grids,
        cfg.converge.max_steps,
        &cfg.navigation()?,
    )?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::new();
    for p in &points {
        let x = p.wave.grid().nodes();
        let exact = ExactSolitary::matching_node_waveheight(target, x[0], x[x.len() - 1])
            .ok_or_else(|| Error::NoExactSolution(format!("node-matched wave at waveheight {target}")))?;
        let e: Vec<f64> = p.wave.samples().iter().zip(x).map(|(u, x)| u - exact.eval(*x)).collect();
        let dx = eq.length() / (2 * x.len()) as f64;
        let l2 = (2.0 * dx * e.iter().map(|v| v * v).sum::<f64>()).sqrt();
        rows.push((x.len(), p.c, exact.speed(), max_abs(&e), l2));
    }
    write_with(&out.join("convergence.csv"), |o| {
        writeln!(o, "N,c,c_exact,log10_linf,log10_l2,l2_ratio")?;
        for (i, r) in rows.iter().enumerate() {
            let ratio = if i == 0 { String::new() } else { fmt_f64(rows[i - 1].4 / r.4) };
            writeln!(
                o,
                "{},{},{},{},{},{ratio}",
                r.0,
                fmt_f64(r.1),
                fmt_f64(r.2),
                fmt_f64(r.3.log10()),
                fmt_f64(r.4.log10())
            )?;
        }
        Ok(())
    })?;
    Ok(Outcome::Done)
}

/// Columns of `branch.csv` needed to rebuild a point.
struct Row {
    c: f64,
    a: f64,
    b: f64,
    theta: f64,
    residual_norm: f64,
    newton_iters: usize,
    grid_n: usize,
}

fn read_branch_csv(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "index,c,a,B,theta,l2_norm,residual_norm,newton_iters,grid_N" {
                bail!("{}: unexpected header `{line}`", path.display());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            bail!("{} line {}: expected 9 fields, got {}", path.display(), i + 1, f.len());
        }
        let num = |k: usize| -> Result<f64> {
            f[k].trim()
                .parse()
                .with_context(|| format!("{} line {}: bad number `{}`", path.display(), i + 1, f[k]))
        };
        let int = |k: usize| -> Result<usize> {
            f[k].trim()
                .parse()
                .with_context(|| format!("{} line {}: bad integer `{}`", path.display(), i + 1, f[k]))
        };
        if int(0)? != rows.len() {
            bail!("{} line {}: indices must count up from 0", path.display(), i + 1);
        }
        rows.push(Row {
            c: num(1)?,
            a: num(2)?,
            b: num(3)?,
            theta: num(4)?,
            residual_norm: num(6)?,
            newton_iters: int(7)?,
            grid_n: int(8)?,
        });
    }
    Ok(rows)
}

/// Rebuilds the reports of an earlier `branch` or `refine` run from its
/// `branch.csv`, profiles and `report.json`.
pub fn analyze(input: &Path, cfg: Option<&RunConfig>, out: &Path) -> Result<Outcome> {
    let old: BranchReport = {
        let path = input.join("report.json");
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    let rows = read_branch_csv(&input.join("branch.csv"))?;
    let bc = match cfg {
        Some(c) => c.boundary()?,
        None => travwave::solver::BoundaryCondition::MeanZero,
    };
    let mut branch = Branch::new(old.equation, bc, old.grid_n, 0.0);
    for (i, r) in rows.iter().enumerate() {
        if r.grid_n != old.grid_n {
            return Err(Error::LengthMismatch { expected: old.grid_n, got: r.grid_n })
                .with_context(|| format!("grid size of point {i}"));
        }
        let path = input.join("profiles").join(format!("point_{i:05}.csv"));
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let wave = Wave::read_csv(BufReader::new(file), old.equation.length())
            .with_context(|| format!("reading {}", path.display()))?;
        if wave.grid().n() != old.grid_n {
            return Err(Error::LengthMismatch { expected: old.grid_n, got: wave.grid().n() })
                .with_context(|| format!("profile {}", path.display()));
        }
        let point = SolutionPoint {
            wave,
            c: r.c,
            a: r.a,
            b: r.b,
            theta: r.theta,
            residual_norm: r.residual_norm,
            newton_iters: r.newton_iters,
        };
        branch.push(point, None::<StepRecord>);
    }
    let mut report = BranchReport::build(&branch, fits(cfg))?;
    report.termination = old.termination;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_report(out, &report)?;
    Ok(Outcome::Done)
}

/// `dir` itself, or the directory an `analyze` run reads by default.
pub fn analyze_input(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    flag.or_else(|| cfg.and_then(|c| c.analyze.input.clone()))
        .ok_or_else(|| anyhow!("analyze needs --input or analyze.input"))
}
