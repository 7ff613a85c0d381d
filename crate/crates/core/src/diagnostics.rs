//! Branch diagnostics: invariant functionals, the `d'(c) = -V` identity,
//! stability classification, cusp ratio, crest counting and spectral decay
//! fits.
//!
//! The functionals are
//!
//! ```text
//! V(phi) = 1/2 int phi^2
//! E(phi) = int F(phi) + 1/2 phi L phi        (F' = f, F(0) = 0)
//! d(c)   = E(phi_c) - c V(phi_c)
//! ```
//!
//! so that `E'(phi) - c V'(phi) = f(phi) + L phi - c phi`, the left side of
//! the integrated traveling-wave equation with `B = 0`. Since `phi_c` is a
//! critical point of `E - c V`, differentiating `d` along a branch leaves
//! only the explicit `c`: `d'(c) = -V(phi_c)`. Integrals run over
//! one full period of the mirrored profile. The half-shifted nodes and their
//! mirror images are `2N` equispaced points, so the rectangle rule is exact
//! for `phi^2` and `phi L phi`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::continuation::Branch;
use crate::equations::Equation;
use crate::error::{Error, Result};
use crate::solver::SolutionPoint;
use crate::evolution::{mirror_to_full, PeriodicField};
use crate::spectral::{fmt_f64, Discretization, Wave};

/// Coefficients at or below this magnitude are excluded from decay fits.
pub const COEFF_FLOOR: f64 = 1e-14;
/// Minimum number of usable coefficients for a decay fit.
pub const MIN_FIT_POINTS: usize = 16;
/// `|Delta c|` below which finite differences in `c` are skipped.
pub const MIN_DC: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub v: f64,
    pub e: f64,
    pub d: f64,
}


/// `V`, `E` and `d = E - cV` at a solution point.
pub fn functionals(eq: &Equation, point: &SolutionPoint) -> Functionals {
    let w = &point.wave;
    let disc = Discretization::on_grid(*eq, w.grid().clone());
    functionals_of(&disc, w.samples(), point.c)
}

/// As [`functionals`], on raw samples with a prepared discretization.
pub fn functionals_of(disc: &Discretization, phi: &[f64], c: f64) -> Functionals {
    let eq = disc.equation();
    let dx = disc.grid().length() / (2 * disc.n()) as f64;
    let lphi = disc.apply_operator(phi).expect("samples on the grid");
    let v = dx * phi.iter().map(|u| u * u).sum::<f64>();
    let e = 2.0
        * dx
        * phi
            .iter()
            .zip(&lphi)
            .map(|(&u, lu)| eq.flux_antideriv(u) + 0.5 * u * lu)
            .sum::<f64>();
    Functionals { v, e, d: e - c * v }
}

/// `d'(c)` by finite differences against `-V` at one branch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DPrimeEntry {
    pub index: usize,
    pub c: f64,
    pub v: f64,
    /// `None` where the stencil is degenerate (`|Delta c|` too small).
    pub dprime: Option<f64>,
    /// `|d' + V| / |V|`.
    pub rel_mismatch: Option<f64>,
    /// Smaller of the two stencil spacings in `c`.
    pub min_dc: f64,
}

/// Three-point finite differences of `d` in `c` on a nonuniform stencil,
/// compared with `-V`. Endpoints are not reported.
pub fn dprime_from_series(c: &[f64], d: &[f64], v: &[f64]) -> Result<Vec<DPrimeEntry>> {
    if c.len() != d.len() || c.len() != v.len() {
        return Err(Error::InvalidArgument("series lengths differ".into()));
    }
    if c.len() < 3 {
        return Err(Error::InsufficientData {
            usable: c.len(),
            required: 3,
        });
    }
    let mut out = Vec::with_capacity(c.len() - 2);
    for i in 1..c.len() - 1 {
        let hm = c[i] - c[i - 1];
        let hp = c[i + 1] - c[i];
        let min_dc = hm.abs().min(hp.abs());
        let degenerate = min_dc < MIN_DC || (hm + hp).abs() < MIN_DC;
        let (dprime, rel) = if degenerate {
            (None, None)
        } else {
            let dp = (hm * hm * d[i + 1] - hp * hp * d[i - 1] + (hp * hp - hm * hm) * d[i])
                / (hm * hp * (hm + hp));
            (Some(dp), Some((dp + v[i]).abs() / v[i].abs().max(f64::MIN_POSITIVE)))
        };
        out.push(DPrimeEntry {
            index: i,
            c: c[i],
            v: v[i],
            dprime,
            rel_mismatch: rel,
            min_dc,
        });
    }
    Ok(out)
}

/// `dprime_check` over a computed branch (skipping the trivial point).
pub fn dprime_check(branch: &Branch) -> Result<Vec<DPrimeEntry>> {
    let pts: Vec<&SolutionPoint> = branch.points.iter().filter(|p| p.a != 0.0).collect();
    let funcs: Vec<Functionals> = pts.iter().map(|p| functionals(&branch.equation, p)).collect();
    let c: Vec<f64> = pts.iter().map(|p| p.c).collect();
    let d: Vec<f64> = funcs.iter().map(|f| f.d).collect();
    let v: Vec<f64> = funcs.iter().map(|f| f.v).collect();
    let offset = branch.points.len() - pts.len();
    let mut out = dprime_from_series(&c, &d, &v)?;
    for e in &mut out {
        e.index += offset;
    }
    Ok(out)
}

/// Per-point stability data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub index: usize,
    /// `d''(c) = -dV/dc`; infinite at a turning point.
    pub d2: f64,
    /// `dV/ds` with `s` the arclength along the branch in the `(c, a)` plane.
    pub dv_ds: f64,
    /// `+1` where `V` still grows along the branch, `-1` past its maximum.
    pub sign: i8,
}

fn arclength(c: &[f64], a: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; c.len()];
    for i in 1..c.len() {
        s[i] = s[i - 1] + (c[i] - c[i - 1]).hypot(a[i] - a[i - 1]);
    }
    s
}

fn diff3(s: &[f64], y: &[f64], i: usize) -> f64 {
    let n = s.len();
    let (l, m, r) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    // derivative at s[i] of the quadratic through the three points
    let x = s[i];
    let (s0, s1, s2) = (s[l], s[m], s[r]);
    y[l] * ((x - s1) + (x - s2)) / ((s0 - s1) * (s0 - s2))
        + y[m] * ((x - s0) + (x - s2)) / ((s1 - s0) * (s1 - s2))
        + y[r] * ((x - s0) + (x - s1)) / ((s2 - s0) * (s2 - s1))
}

/// Stability signs from `V` along an arclength parametrization.
///
/// `dV/dc = (dV/ds) / (dc/ds)` blows up and flips at a turning point of `c`
/// while the stability does not change there; the classification follows
/// `dV/ds`, whose sign changes at the maximum of `V`.
pub fn classify_series(c: &[f64], a: &[f64], v: &[f64]) -> Result<Vec<StabilityEntry>> {
    if c.len() < 5 {
        return Err(Error::InsufficientData {
            usable: c.len(),
            required: 5,
        });
    }
    let s = arclength(c, a);
    Ok((0..c.len())
        .map(|i| {
            let dv = diff3(&s, v, i);
            let dc = diff3(&s, c, i);
            StabilityEntry {
                index: i,
                d2: -dv / dc,
                dv_ds: dv,
                sign: if dv >= 0.0 { 1 } else { -1 },
            }
        })
        .collect())
}

pub fn classify_stability(branch: &Branch) -> Result<Vec<StabilityEntry>> {
    let c: Vec<f64> = branch.points.iter().map(|p| p.c).collect();
    let a: Vec<f64> = branch.points.iter().map(|p| p.a).collect();
    let v: Vec<f64> = branch
        .points
        .iter()
        .map(|p| functionals(&branch.equation, p).v)
        .collect();
    classify_series(&c, &a, &v)
}

/// `c / max phi`.
pub fn cusp_ratio(point: &SolutionPoint) -> Result<f64> {
    let m = point.wave.max();
    if !(m > 0.0) {
        return Err(Error::Degenerate(format!("profile maximum {m} is not positive")));
    }
    Ok(point.c / m)
}

/// Number of crests of the mirrored full-period profile.
///
/// The profile is the even extension evaluated from the cosine series on
/// `2N` equispaced nodes, which include the symmetry points `x = 0` and
/// `x = L/2` where a split crest shows its dip. Oscillations smaller than
/// `1e-6` of the profile's range are ignored, so plateaus and rounding noise
/// never count.
pub fn crest_count(wave: &Wave) -> usize {
    count_peaks_cyclic(mirror_to_full(wave).samples())
}

/// Number of crests of a periodic field, with the same hysteresis as
/// [`crest_count`].
pub fn field_crest_count(u: &PeriodicField) -> usize {
    count_peaks_cyclic(u.samples())
}

fn count_peaks_cyclic(v: &[f64]) -> usize {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let tol = 1e-6 * (hi - lo);
    if !(hi - lo > 0.0) {
        return 0;
    }
    let start = v.iter().position(|&x| x == lo).expect("minimum exists");
    let m = v.len();
    let mut peaks = 0;
    let mut rising = true;
    let mut cand = lo;
    for step in 1..=m {
        let x = v[(start + step) % m];
        if rising {
            if x > cand {
                cand = x;
            } else if cand - x > tol {
                peaks += 1;
                rising = false;
                cand = x;
            }
        } else if x < cand {
            cand = x;
        } else if x - cand > tol {
            rising = true;
            cand = x;
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    Exponential,
    Polynomial,
}

/// Fits of `|Phi(k)|` to `nu1 exp(-nu2 k^n)` and `mu1 / (mu2 + mu3 k^m)`.
///
/// Both models are fit to `ln |Phi|`, which makes the comparison invariant
/// under rescaling of the coefficients; `mu2` is normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exp_params: (f64, f64, f64),
    pub poly_params: (f64, f64, f64, f64),
    pub residual_l2_exp: f64,
    pub residual_l2_poly: f64,
    pub aic_exp: f64,
    pub aic_poly: f64,
    pub n_obs: usize,
    pub winner: DecayModel,
}

/// Exponent grid shared by both models.
fn exponent_grid() -> impl Iterator<Item = f64> {
    (0..=75).map(|i| 0.25 + 0.05 * i as f64)
}

/// Free parameters per model (the polynomial scale `mu2` is fixed).
const MODEL_PARAMS: f64 = 3.0;

fn aic(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * MODEL_PARAMS
}

/// Best exponential fit: `(nu1, nu2, n, rss)`.
fn fit_exponential(k: &[f64], logy: &[f64]) -> (f64, f64, f64, f64) {
    let mut best = (f64::NAN, f64::NAN, f64::NAN, f64::INFINITY);
    let n_obs = k.len() as f64;
    for n in exponent_grid() {
        let x: Vec<f64> = k.iter().map(|k| k.powf(n)).collect();
        let mx = x.iter().sum::<f64>() / n_obs;
        let my = logy.iter().sum::<f64>() / n_obs;
        let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let sxy: f64 = x.iter().zip(logy).map(|(a, b)| (a - mx) * (b - my)).sum();
        if !(sxx > 0.0) {
            continue;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = x
            .iter()
            .zip(logy)
            .map(|(a, b)| {
                let r = b - (intercept + slope * a);
                r * r
            })
            .sum();
        if rss < best.3 {
            best = (intercept.exp(), -slope, n, rss);
        }
    }
    best
}

/// Profile RSS of the polynomial model at fixed `m` and `ln mu3`, with
/// `ln mu1` eliminated in closed form.
fn poly_rss(km: &[f64], logy: &[f64], log_mu3: f64) -> (f64, f64) {
    let mu3 = log_mu3.exp();
    let n = km.len() as f64;
    let shifted: Vec<f64> = km.iter().zip(logy).map(|(x, y)| y + (1.0 + mu3 * x).ln()).collect();
    let log_mu1 = shifted.iter().sum::<f64>() / n;
    let rss = shifted.iter().map(|s| (s - log_mu1) * (s - log_mu1)).sum();
    (rss, log_mu1)
}

/// Best polynomial fit: `(mu1, mu3, m, rss)`.
fn fit_polynomial(k: &[f64], logy: &[f64]) -> (f64, f64, f64, f64) {
    let mut best = (f64::NAN, f64::NAN, f64::NAN, f64::INFINITY);
    for m in exponent_grid() {
        let km: Vec<f64> = k.iter().map(|k| k.powf(m)).collect();
        let (lo, hi, steps) = (-40.0, 40.0, 160);
        let h = (hi - lo) / steps as f64;
        let mut best_t = lo;
        let mut best_r = f64::INFINITY;
        for i in 0..=steps {
            let t = lo + h * i as f64;
            let r = poly_rss(&km, logy, t).0;
            if r < best_r {
                best_r = r;
                best_t = t;
            }
        }
        // golden section inside the bracketing cells
        let (mut a, mut b) = (best_t - h, best_t + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = poly_rss(&km, logy, x1).0;
        let mut f2 = poly_rss(&km, logy, x2).0;
        for _ in 0..80 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = poly_rss(&km, logy, x1).0;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = poly_rss(&km, logy, x2).0;
            }
        }
        let t = 0.5 * (a + b);
        let (r, log_mu1) = poly_rss(&km, logy, t);
        let (r, t, log_mu1) = if r <= best_r {
            (r, t, log_mu1)
        } else {
            let (r0, l0) = poly_rss(&km, logy, best_t);
            (r0, best_t, l0)
        };
        if r < best.3 {
            best = (log_mu1.exp(), t.exp(), m, r);
        }
    }
    best
}

/// Fits both decay models to `(k, |Phi|)` samples with `|Phi| > 1e-14`.
pub fn fit_decay_data(k: &[f64], coeffs: &[f64]) -> Result<FitReport> {
    let (kk, logy): (Vec<f64>, Vec<f64>) = k
        .iter()
        .zip(coeffs)
        .filter(|(k, c)| **k > 0.0 && c.abs() > COEFF_FLOOR)
        .map(|(k, c)| (*k, c.abs().ln()))
        .unzip();
    if kk.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: kk.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let (nu1, nu2, n, rss_e) = fit_exponential(&kk, &logy);
    let (mu1, mu3, m, rss_p) = fit_polynomial(&kk, &logy);
    let n_obs = kk.len();
    let aic_e = aic(rss_e, n_obs);
    let aic_p = aic(rss_p, n_obs);
    Ok(FitReport {
        exp_params: (nu1, nu2, n),
        poly_params: (mu1, 1.0, mu3, m),
        residual_l2_exp: rss_e.sqrt(),
        residual_l2_poly: rss_p.sqrt(),
        aic_exp: aic_e,
        aic_poly: aic_p,
        n_obs,
        winner: if aic_e <= aic_p {
            DecayModel::Exponential
        } else {
            DecayModel::Polynomial
        },
    })
}

/// Decay fit of a solution's cosine coefficients for `1 <= l <= 2N/3`.
///
/// The top third of the spectrum is left out: there the coefficients of an
/// under-resolved profile roll off because of truncation, not because of the
/// profile's smoothness.
pub fn fit_decay(point: &SolutionPoint) -> Result<FitReport> {
    let coeffs = point.wave.coefficients();
    let k = point.wave.grid().wavenumbers();
    let top = (2 * coeffs.len() / 3).max(1);
    fit_decay_data(&k[1..top], &coeffs[1..top])
}

/// The point where the speed stalls past index `after`.
///
/// Along the upper branch `dc/ds` drops towards zero where the discrete
/// branch passes the highest resolvable wave; the first local minimum of
/// `dc/ds` (central differences in arclength) is located by a parabola
/// through its neighbours and the nearest branch point is returned.
pub fn locate_terminal(c: &[f64], a: &[f64], after: usize) -> Option<usize> {
    let n = c.len();
    if n < 4 || after + 3 > n {
        return None;
    }
    let s = arclength(c, a);
    let g = |i: usize| (c[i + 1] - c[i - 1]) / (s[i + 1] - s[i - 1]);
    let start = after.max(1) + 1;
    for i in start..n.saturating_sub(2) {
        let (gm, g0, gp) = (g(i - 1), g(i), g(i + 1));
        if g0 <= gm && g0 < gp {
            let curv = gm - 2.0 * g0 + gp;
            let shift = if curv > 0.0 { 0.5 * (gm - gp) / curv } else { 0.0 };
            return Some(if shift > 0.5 {
                i + 1
            } else if shift < -0.5 {
                i - 1
            } else {
                i
            });
        }
    }
    None
}

/// Whole-branch summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub equation: Equation,
    pub grid_n: usize,
    pub termination: Option<String>,
    /// Point of minimum speed, when it lies strictly inside the branch.
    pub turning_point: Option<usize>,
    pub max_l2: usize,
    /// Speed-stall point past the maximum of `V` (see [`locate_terminal`]).
    pub terminal: Option<usize>,
    pub first_multi_crest: Option<usize>,
    pub points: Vec<PointReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: usize,
    pub c: f64,
    pub a: f64,
    pub l2: f64,
    pub functionals: Functionals,
    pub stability_sign: i8,
    pub crests: usize,
    pub cusp_ratio: Option<f64>,
    pub fit: Option<FitReport>,
}

/// Which points of a branch receive decay fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitPoints {
    All,
    /// Turning point, maximum of `V` and terminal point.
    #[default]
    Key,
    None,
}

impl BranchReport {
    pub fn build(branch: &Branch, fits: FitPoints) -> Result<BranchReport> {
        let pts = &branch.points;
        if pts.is_empty() {
            return Err(Error::InsufficientData {
                usable: 0,
                required: 1,
            });
        }
        let disc_cache: Vec<Functionals> = pts
            .iter()
            .map(|p| functionals(&branch.equation, p))
            .collect();
        let stability = if pts.len() >= 5 {
            let c: Vec<f64> = pts.iter().map(|p| p.c).collect();
            let a: Vec<f64> = pts.iter().map(|p| p.a).collect();
            let v: Vec<f64> = disc_cache.iter().map(|f| f.v).collect();
            Some(classify_series(&c, &a, &v)?)
        } else {
            None
        };
        let argmin_c = (0..pts.len())
            .min_by(|&i, &j| pts[i].c.total_cmp(&pts[j].c))
            .expect("nonempty");
        let turning_point = (argmin_c > 0 && argmin_c + 1 < pts.len()).then_some(argmin_c);
        let max_l2 = (0..pts.len())
            .max_by(|&i, &j| disc_cache[i].v.total_cmp(&disc_cache[j].v))
            .expect("nonempty");
        let crests: Vec<usize> = pts.iter().map(|p| crest_count(&p.wave)).collect();
        let ratios: Vec<Option<f64>> = pts.iter().map(|p| cusp_ratio(p).ok()).collect();
        let terminal = {
            let c: Vec<f64> = pts.iter().map(|p| p.c).collect();
            let a: Vec<f64> = pts.iter().map(|p| p.a).collect();
            locate_terminal(&c, &a, max_l2)
        };
        let points = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let do_fit = match fits {
                    FitPoints::All => true,
                    FitPoints::Key => turning_point == Some(i) || max_l2 == i || terminal == Some(i),
                    FitPoints::None => false,
                };
                PointReport {
                    index: i,
                    c: p.c,
                    a: p.a,
                    l2: p.l2_norm(),
                    functionals: disc_cache[i],
                    stability_sign: stability.as_ref().map_or(0, |s| s[i].sign),
                    crests: crests[i],
                    cusp_ratio: ratios[i],
                    fit: if do_fit { fit_decay(p).ok() } else { None },
                }
            })
            .collect();
        Ok(BranchReport {
            equation: branch.equation,
            grid_n: branch.n,
            termination: branch.termination.map(|t| t.to_string()),
            turning_point,
            max_l2,
            terminal,
            first_multi_crest: branch.first_multi_crest,
            points,
        })
    }

    /// `index,c,a,l2,V,E,d,stability_sign,crests,cusp_ratio,decay_winner`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,c,a,l2,V,E,d,stability_sign,crests,cusp_ratio,decay_winner")?;
        for p in &self.points {
            let winner = match p.fit.map(|f| f.winner) {
                Some(DecayModel::Exponential) => "exponential",
                Some(DecayModel::Polynomial) => "polynomial",
                None => "none",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.index,
                fmt_f64(p.c),
                fmt_f64(p.a),
                fmt_f64(p.l2),
                fmt_f64(p.functionals.v),
                fmt_f64(p.functionals.e),
                fmt_f64(p.functionals.d),
                p.stability_sign,
                p.crests,
                p.cusp_ratio.map(fmt_f64).unwrap_or_else(|| "nan".into()),
                winner
            )?;
        }
        Ok(())
    }
}
