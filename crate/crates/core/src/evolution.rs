//! Time integration of `u_t + [f(u)]_x + L u_x = 0` on a full period.
//!
//! The spectral ODE `u_t = -ik alpha(k) u - ik F[f(u)]` is advanced with a
//! fourth-order integrating-factor Runge-Kutta scheme: the linear part is
//! propagated exactly by `exp(-ik alpha(k) t)` and classical RK4 handles the
//! nonlinear term.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::equations::Equation;
use crate::error::{Error, Result};
use crate::spectral::{fmt_f64, Wave};

/// Sup-norm beyond which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Real samples on `x_m = L m / M`, `m = 0..M-1`, with `M` even.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    length: f64,
    samples: Vec<f64>,
}

impl PeriodicField {
    pub fn new(length: f64, samples: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {length}")));
        }
        if samples.len() < 2 || samples.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be even and at least 2, got {}",
                samples.len()
            )));
        }
        Ok(PeriodicField { length, samples })
    }

    pub fn from_fn(length: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / m as f64;
        PeriodicField::new(length, (0..m).map(|i| f(h * i as f64)).collect())
    }

    pub fn zeros(length: f64, m: usize) -> Result<Self> {
        PeriodicField::new(length, vec![0.0; m])
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.length / self.m() as f64;
        (0..self.m()).map(|i| h * i as f64).collect()
    }

    /// Wavenumbers in FFT order: `2 pi j / L` for `j = 0..M/2-1, -M/2..-1`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        wavenumbers(self.length, self.m())
    }

    /// Unnormalized discrete Fourier transform, FFT order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&u| Complex64::new(u, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(self.m()).process(&mut buf);
        buf
    }

    /// Inverse of [`spectrum`](Self::spectrum); imaginary parts are dropped.
    pub fn from_spectrum(length: f64, mut spec: Vec<Complex64>) -> Result<Self> {
        let m = spec.len();
        FftPlanner::new().plan_fft_inverse(m).process(&mut spec);
        PeriodicField::new(length, spec.iter().map(|z| z.re / m as f64).collect())
    }

    pub fn max_abs(&self) -> f64 {
        crate::spectral::max_abs(&self.samples)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The field translated by `s`: `u(x - s)`, exact for band-limited data.
    pub fn shifted(&self, s: f64) -> PeriodicField {
        let k = self.wavenumbers();
        let m = self.m();
        let spec: Vec<Complex64> = self
            .spectrum()
            .into_iter()
            .zip(&k)
            .enumerate()
            .map(|(j, (z, &k))| {
                // the Nyquist mode of a real field carries no phase information
                if j == m / 2 {
                    z * (k * s).cos()
                } else {
                    z * Complex64::from_polar(1.0, -k * s)
                }
            })
            .collect();
        PeriodicField::from_spectrum(self.length, spec).expect("same size")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,u")?;
        for (x, u) in self.nodes().iter().zip(&self.samples) {
            writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*u))?;
        }
        Ok(())
    }
}

fn wavenumbers(length: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let j = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
            2.0 * PI * j / length
        })
        .collect()
}

/// Even extension of a half-period cosine profile onto `M = 2N` nodes.
pub fn mirror_to_full(w: &Wave) -> PeriodicField {
    mirror_to_full_sized(w, 2 * w.grid().n()).expect("2N is even")
}

/// Even extension onto `m` full-period nodes, evaluated from the cosine
/// series directly.
pub fn mirror_to_full_sized(w: &Wave, m: usize) -> Result<PeriodicField> {
    let coeffs = w.coefficients();
    let grid = w.grid();
    let l = grid.length();
    PeriodicField::from_fn(l, m, |x| {
        let x = if x > 0.5 * l { l - x } else { x };
        grid.eval_series(&coeffs, x)
    })
}

/// Places even profiles (trough level 0) centered at the given positions on a
/// period `length` and sums them.
///
/// Each profile is evaluated from its cosine series out to half of its own
/// period and taken as zero beyond.
pub fn superpose(length: f64, m: usize, waves: &[(&Wave, f64)]) -> Result<PeriodicField> {
    let coeffs: Vec<Vec<f64>> = waves.iter().map(|(w, _)| w.coefficients()).collect();
    PeriodicField::from_fn(length, m, |x| {
        waves
            .iter()
            .zip(&coeffs)
            .map(|((w, center), c)| {
                let d = (x - center).rem_euclid(length);
                let d = d.min(length - d);
                if d <= 0.5 * w.grid().length() {
                    w.grid().eval_series(c, d)
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// `(int u, 1/2 int u^2)` over one period.
pub fn conserved(u: &PeriodicField) -> (f64, f64) {
    let h = u.length / u.m() as f64;
    let mass = h * u.samples.iter().sum::<f64>();
    let momentum = 0.5 * h * u.samples.iter().map(|v| v * v).sum::<f64>();
    (mass, momentum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Time step; see [`default_dt`] when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub dealias: bool,
    /// Steps between snapshots.
    pub snapshot_stride: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: None,
            t_end: 1.0,
            dealias: true,
            snapshot_stride: 100,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidArgument("snapshot_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default step: `0.5 / (k_max max |f'(u0)|)`, at most `t_end / 100`.
///
/// The linear part is integrated exactly, so only the advective nonlinear
/// term limits the step.
pub fn default_dt(eq: &Equation, u0: &PeriodicField, t_end: f64) -> f64 {
    let k_max = PI * u0.m() as f64 / u0.length;
    let speed = u0
        .samples
        .iter()
        .map(|&u| eq.flux_prime(u).abs())
        .fold(0.0, f64::max);
    let cap = t_end / 100.0;
    if speed > 0.0 {
        (0.5 / (k_max * speed)).min(cap)
    } else {
        cap
    }
}

struct Stepper {
    eq: Equation,
    m: usize,
    ik: Vec<Complex64>,
    half: Vec<Complex64>,
    keep: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl Stepper {
    fn new(eq: &Equation, length: f64, m: usize, dt: f64, dealias: bool) -> Stepper {
        let k = wavenumbers(length, m);
        let mut planner = FftPlanner::new();
        let cutoff = m as f64 / 3.0;
        Stepper {
            eq: *eq,
            m,
            ik: k
                .iter()
                .enumerate()
                // the Nyquist derivative of a real field is zero
                .map(|(j, &k)| if j == m / 2 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k) })
                .collect(),
            half: k
                .iter()
                .map(|&k| Complex64::from_polar(1.0, -k * eq.symbol(k) * 0.5 * dt))
                .collect(),
            keep: (0..m)
                .map(|j| {
                    let j = if j < m / 2 { j as f64 } else { m as f64 - j as f64 };
                    !dealias || j <= cutoff
                })
                .collect(),
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            buf: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    fn to_physical(&mut self, spec: &[Complex64]) -> Vec<f64> {
        self.buf.copy_from_slice(spec);
        self.inv.process(&mut self.buf);
        let s = 1.0 / self.m as f64;
        self.buf.iter().map(|z| z.re * s).collect()
    }

    /// `-ik F[f(u)]` for `u` given by its spectrum.
    fn nonlinear(&mut self, spec: &[Complex64]) -> Vec<Complex64> {
        let u = self.to_physical(spec);
        for (b, u) in self.buf.iter_mut().zip(&u) {
            *b = Complex64::new(self.eq.flux(*u), 0.0);
        }
        self.fwd.process(&mut self.buf);
        self.buf
            .iter()
            .zip(&self.ik)
            .zip(&self.keep)
            .map(|((f, ik), &keep)| if keep { -ik * f } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    fn step(&mut self, u: &mut [Complex64], dt: f64) {
        let e = self.half.clone();
        let a = self.nonlinear(u);
        let arg: Vec<Complex64> = (0..self.m).map(|j| e[j] * (u[j] + 0.5 * dt * a[j])).collect();
        let b = self.nonlinear(&arg);
        let arg: Vec<Complex64> = (0..self.m).map(|j| e[j] * u[j] + 0.5 * dt * b[j]).collect();
        let c = self.nonlinear(&arg);
        let arg: Vec<Complex64> = (0..self.m).map(|j| e[j] * (e[j] * u[j] + dt * c[j])).collect();
        let d = self.nonlinear(&arg);
        for j in 0..self.m {
            let e2 = e[j] * e[j];
            u[j] = e2 * u[j] + dt / 6.0 * (e2 * a[j] + 2.0 * e[j] * (b[j] + c[j]) + d[j]);
        }
    }
}

/// A time-stamped snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: PeriodicField,
}

/// Integrates from `u0` to `cfg.t_end`.
///
/// The step is shrunk so that an integer number of steps lands on `t_end`
/// exactly. Snapshots include the initial and final states.
pub fn evolve(eq: &Equation, u0: &PeriodicField, cfg: &EvolutionConfig) -> Result<Vec<Snapshot>> {
    cfg.validate()?;
    let requested = cfg.dt.unwrap_or_else(|| default_dt(eq, u0, cfg.t_end));
    let steps = (cfg.t_end / requested).ceil().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let mut stepper = Stepper::new(eq, u0.length, u0.m(), dt, cfg.dealias);
    let mut spec = u0.spectrum();
    let mut out = vec![Snapshot {
        t: 0.0,
        field: u0.clone(),
    }];
    for n in 1..=steps {
        stepper.step(&mut spec, dt);
        let t = if n == steps { cfg.t_end } else { dt * n as f64 };
        let snap = n % cfg.snapshot_stride == 0 || n == steps;
        let check = snap || n % 16 == 0;
        if check {
            let u = stepper.to_physical(&spec);
            let max_abs = u.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
            if !(max_abs <= BLOWUP_THRESHOLD) {
                return Err(Error::BlowUp { time: t, max_abs });
            }
            if snap {
                out.push(Snapshot {
                    t,
                    field: PeriodicField::new(u0.length, u)?,
                });
            }
        }
    }
    Ok(out)
}

/// Writes `snap_NNNNN.csv` files plus `index.csv` (`t,file,mass,momentum,max_u`).
pub fn write_trajectory(dir: &Path, trajectory: &[Snapshot]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut index = BufWriter::new(File::create(dir.join("index.csv"))?);
    writeln!(index, "t,file,mass,momentum,max_u")?;
    for (i, s) in trajectory.iter().enumerate() {
        let name = format!("snap_{i:05}.csv");
        s.field.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
        let (mass, momentum) = conserved(&s.field);
        writeln!(
            index,
            "{},{},{},{},{}",
            fmt_f64(s.t),
            name,
            fmt_f64(mass),
            fmt_f64(momentum),
            fmt_f64(s.field.max())
        )?;
    }
    index.flush()
}

/// Best translates of two reference profiles matching a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftFit {
    pub shifts: (f64, f64),
    /// `1/2 int (u - A(x - s1) - B(x - s2))^2`, in the units of momentum.
    pub residual_energy: f64,
}

/// Circular cross-correlation `sum_i u[i] v[i - j]` for every `j`.
fn cross_correlation(u: &PeriodicField, v: &PeriodicField) -> Vec<f64> {
    let spec: Vec<Complex64> = u
        .spectrum()
        .iter()
        .zip(v.spectrum())
        .map(|(a, b)| a * b.conj())
        .collect();
    PeriodicField::from_spectrum(u.length, spec)
        .expect("same even grid")
        .samples
}

fn residual_energy(u: &PeriodicField, a: &PeriodicField, b: &PeriodicField, s: (f64, f64)) -> f64 {
    let (a, b) = (a.shifted(s.0), b.shifted(s.1));
    let h = u.length / u.m() as f64;
    0.5 * h
        * u.samples
            .iter()
            .zip(&a.samples)
            .zip(&b.samples)
            .map(|((u, a), b)| (u - a - b).powi(2))
            .sum::<f64>()
}

/// Fits `u ~ A(x - s1) + B(x - s2)` over both shifts.
///
/// Every pair of whole-node shifts is scored from three correlations, then
/// the best pair is polished by alternating golden-section searches within
/// one node.
pub fn fit_two_shifts(u: &PeriodicField, first: &PeriodicField, second: &PeriodicField) -> Result<ShiftFit> {
    if first.m() != u.m() || second.m() != u.m() || first.length != u.length || second.length != u.length {
        return Err(Error::InvalidArgument("profiles must share the field's grid".into()));
    }
    let m = u.m();
    let h = u.length / m as f64;
    let ua = cross_correlation(u, first);
    let ub = cross_correlation(u, second);
    let ba = cross_correlation(second, first);
    // the shift-independent norms are dropped; only the ordering matters here
    let mut best = (f64::INFINITY, 0, 0);
    for j1 in 0..m {
        for j2 in 0..m {
            let score = ba[(j1 + m - j2) % m] - ua[j1] - ub[j2];
            if score < best.0 {
                best = (score, j1, j2);
            }
        }
    }
    let mut s = (best.1 as f64 * h, best.2 as f64 * h);
    for _ in 0..4 {
        s.0 = golden_min(|x| residual_energy(u, first, second, (x, s.1)), s.0 - h, s.0 + h);
        s.1 = golden_min(|x| residual_energy(u, first, second, (s.0, x)), s.1 - h, s.1 + h);
    }
    Ok(ShiftFit {
        shifts: (s.0.rem_euclid(u.length), s.1.rem_euclid(u.length)),
        residual_energy: residual_energy(u, first, second, s),
    })
}

/// Best translate `s` of `profile` matching `u`, and `1/2 int (u - profile(x - s))^2`.
pub fn fit_shift(u: &PeriodicField, profile: &PeriodicField) -> Result<(f64, f64)> {
    if profile.m() != u.m() || profile.length != u.length {
        return Err(Error::InvalidArgument("profile must share the field's grid".into()));
    }
    let h = u.length / u.m() as f64;
    let corr = cross_correlation(u, profile);
    let best = (0..u.m()).max_by(|&i, &j| corr[i].total_cmp(&corr[j])).expect("nonempty");
    let energy = |s: f64| {
        let p = profile.shifted(s);
        0.5 * h * u.samples.iter().zip(&p.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    };
    let s = golden_min(energy, (best as f64 - 1.0) * h, (best as f64 + 1.0) * h);
    Ok((s.rem_euclid(u.length), energy(s)))
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..48 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::Model;
    use crate::spectral::Grid;
    use proptest::prelude::*;

    fn kdv(l: f64) -> Equation {
        Equation::new(Model::Kdv, l).unwrap()
    }

    #[test]
    fn field_validation() {
        assert!(PeriodicField::new(1.0, vec![0.0; 3]).is_err());
        assert!(PeriodicField::new(0.0, vec![0.0; 4]).is_err());
        assert!(PeriodicField::new(1.0, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn mirror_examples() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let c = mirror_to_full(&Wave::new(g.clone(), vec![0.7; 16]).unwrap());
        assert!(c.samples().iter().all(|v| (v - 0.7).abs() < 1e-14));
        let f = mirror_to_full(&Wave::from_fn(g.clone(), f64::cos));
        assert_eq!(f.m(), 32);
        for (x, u) in f.nodes().iter().zip(f.samples()) {
            assert!((u - x.cos()).abs() < 1e-13);
        }
        let w = Wave::from_fn(g, |x| (x.cos() + 0.3).exp());
        let f = mirror_to_full(&w);
        for m in 1..32 {
            assert!((f.samples()[m] - f.samples()[32 - m]).abs() < 1e-12);
        }
    }

    #[test]
    fn conserved_examples() {
        let z = PeriodicField::zeros(3.0, 16).unwrap();
        assert_eq!(conserved(&z), (0.0, 0.0));
        let l = 3.0;
        let c = PeriodicField::from_fn(l, 16, |x| (2.0 * PI * x / l).cos()).unwrap();
        let (mass, mom) = conserved(&c);
        assert!(mass.abs() < 1e-14);
        assert!((mom - l / 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_stays_zero() {
        let eq = kdv(2.0 * PI);
        let z = PeriodicField::zeros(2.0 * PI, 64).unwrap();
        let cfg = EvolutionConfig {
            dt: Some(0.01),
            t_end: 1.0,
            dealias: true,
            snapshot_stride: 10,
        };
        let traj = evolve(&eq, &z, &cfg).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|s| s.field.samples().iter().all(|&v| v == 0.0)));
        assert_eq!(traj.last().unwrap().t, 1.0);
    }

    #[test]
    fn linear_mode_is_propagated_exactly() {
        // small amplitude, linear dispersion only matters: u = eps cos(k(x - alpha(k) t))
        let l = 2.0 * PI;
        let eq = Equation::new(Model::Whitham, l).unwrap();
        let eps = 1e-9;
        let u0 = PeriodicField::from_fn(l, 32, |x| eps * (3.0 * x).cos()).unwrap();
        let t = 2.3;
        let cfg = EvolutionConfig {
            dt: Some(0.1),
            t_end: t,
            dealias: true,
            snapshot_stride: 1000,
        };
        let out = evolve(&eq, &u0, &cfg).unwrap();
        let speed = Model::Whitham.symbol(3.0);
        let exact = u0.shifted(speed * t);
        let end = &out.last().unwrap().field;
        let err = end.samples().iter().zip(exact.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8 * eps, "{err}");
    }

    #[test]
    fn shift_is_exact_for_band_limited_fields() {
        let f = PeriodicField::from_fn(2.0, 16, |x| (PI * x).sin() + 0.5 * (3.0 * PI * x).cos()).unwrap();
        let g = f.shifted(0.3);
        for (x, u) in g.nodes().iter().zip(g.samples()) {
            let y = x - 0.3;
            assert!((u - ((PI * y).sin() + 0.5 * (3.0 * PI * y).cos())).abs() < 1e-13);
        }
    }

    #[test]
    fn blowup_is_reported() {
        // gKdV with a high power and large data collapses
        let l = 2.0 * PI;
        let eq = Equation::new(Model::GeneralizedKdv { exponent: 5 }, l).unwrap();
        let u0 = PeriodicField::from_fn(l, 64, |x| 20.0 * x.cos()).unwrap();
        let cfg = EvolutionConfig {
            dt: Some(1e-3),
            t_end: 1.0,
            dealias: false,
            snapshot_stride: 10,
        };
        assert!(matches!(evolve(&eq, &u0, &cfg), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn bad_config_is_rejected() {
        let eq = kdv(1.0);
        let z = PeriodicField::zeros(1.0, 8).unwrap();
        for cfg in [
            EvolutionConfig { t_end: 0.0, ..Default::default() },
            EvolutionConfig { dt: Some(-1.0), ..Default::default() },
            EvolutionConfig { snapshot_stride: 0, ..Default::default() },
        ] {
            assert!(matches!(evolve(&eq, &z, &cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn default_dt_respects_cap_and_speed() {
        let eq = kdv(2.0 * PI);
        let z = PeriodicField::zeros(2.0 * PI, 64).unwrap();
        assert_eq!(default_dt(&eq, &z, 5.0), 0.05);
        let u = PeriodicField::from_fn(2.0 * PI, 64, |x| x.cos()).unwrap();
        assert!((default_dt(&eq, &u, 1e3) - 0.5 / (32.0 * eq.flux_prime(1.0))).abs() < 1e-15);
    }

    #[test]
    fn superposition_places_profiles() {
        let g = Grid::new(20.0, 64).unwrap();
        let w = Wave::from_fn(g, |x| (-(x * x)).exp());
        let f = superpose(100.0, 400, &[(&w, 25.0), (&w, 75.0)]).unwrap();
        let at = |x: f64| f.samples()[(x / 0.25).round() as usize];
        assert!((at(25.0) - 1.0).abs() < 1e-10);
        assert!((at(75.0) - 1.0).abs() < 1e-10);
        assert!(at(50.0).abs() < 1e-10);
        assert!((at(26.0) - (-1.0f64).exp()).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn spectrum_round_trip(vals in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let f = PeriodicField::new(1.7, vals.clone()).unwrap();
            let g = PeriodicField::from_spectrum(1.7, f.spectrum()).unwrap();
            for (a, b) in vals.iter().zip(g.samples()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn mass_and_momentum_are_conserved(a1 in 0.02f64..0.1, a2 in 0.0f64..0.05, ph in 0.0f64..6.0) {
            let l = 2.0 * PI;
            let eq = Equation::new(Model::Whitham, l).unwrap();
            let u0 = PeriodicField::from_fn(l, 128, |x| a1 * x.cos() + a2 * (2.0 * x + ph).sin()).unwrap();
            // 1000 steps
            let cfg = EvolutionConfig { dt: Some(0.0025), t_end: 2.5, dealias: true, snapshot_stride: 100 };
            let traj = evolve(&eq, &u0, &cfg).unwrap();
            let (m0, p0) = conserved(&u0);
            for s in &traj {
                let (m, p) = conserved(&s.field);
                prop_assert!((m - m0).abs() <= 1e-10 * p0.max(m0.abs()));
                prop_assert!((p - p0).abs() <= 1e-10 * p0);
            }
        }
    }
    #[test]
    fn two_shift_fit_recovers_exact_translates() {
        let l = 40.0;
        let a = PeriodicField::from_fn(l, 256, |x| (-(x - 20.0).powi(2)).exp()).unwrap();
        let b = PeriodicField::from_fn(l, 256, |x| 0.4 * (-(x - 20.0).powi(2) / 4.0).exp()).unwrap();
        let u = PeriodicField::new(
            l,
            a.shifted(3.3)
                .samples()
                .iter()
                .zip(b.shifted(-11.7).samples())
                .map(|(p, q)| p + q)
                .collect(),
        )
        .unwrap();
        let fit = fit_two_shifts(&u, &a, &b).unwrap();
        assert!((fit.shifts.0 - 3.3).abs() < 1e-6, "{:?}", fit);
        assert!((fit.shifts.1 - (l - 11.7)).abs() < 1e-6, "{:?}", fit);
        assert!(fit.residual_energy < 1e-12, "{:?}", fit);
    }

    #[test]
    fn two_shift_fit_rejects_mismatched_grids() {
        let a = PeriodicField::zeros(10.0, 16).unwrap();
        let b = PeriodicField::zeros(10.0, 32).unwrap();
        assert!(fit_two_shifts(&a, &a, &b).is_err());
    }

    #[test]
    fn single_shift_fit() {
        let l = 30.0;
        let a = PeriodicField::from_fn(l, 128, |x| (-(x - 15.0).powi(2)).exp()).unwrap();
        let (s, e) = fit_shift(&a.shifted(7.25), &a).unwrap();
        assert!((s - 7.25).abs() < 1e-6 && e < 1e-14, "{s} {e}");
        let (s, _) = fit_shift(&a.shifted(-2.5), &a).unwrap();
        assert!((s - (l - 2.5)).abs() < 1e-6, "{s}");
    }

}

