//! Small-amplitude expansion about the bifurcation point.
//!
//! With `phi = eps xi_1 + eps^p xi_p + ...` and `c = c0 + eps^(p-1) c_(p-1) + ...`,
//! the first order gives `c0 = alpha(k0)` and `xi_1 = cos(k0 x)`. At order
//! `eps^p` the operator `A = -c0 + L` must be inverted on the complement of
//! its kernel:
//!
//! ```text
//! c_(p-1) = f_p <xi_1^p, xi_1>,          with |xi_1| = 1
//! A xi_p  = c_(p-1) xi_1 - f_p xi_1^p,   <xi_p, xi_1> = 0
//! ```
//!
//! `A` is diagonal in the cosine basis, so `xi_p` is obtained mode by mode.
//! Inner products are `L^2` over one full period, evaluated by the
//! rectangle rule on the mirrored nodes (exact for the products involved).

use serde::{Deserialize, Serialize};

use crate::equations::Equation;
use crate::error::{Error, Result};
use crate::spectral::{Discretization, Wave};

/// Modes closer than this to the bifurcation speed count as resonant.
pub const RESONANCE_GAP: f64 = 1e-10;

/// Initial-guess flavour for the bootstrap solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessKind {
    /// `(a/2) cos(k0 x)` at speed `c0`.
    #[default]
    FirstOrder,
    /// Adds `eps^p xi_p` and the speed correction when the expansion is valid.
    Corrected,
}

impl GuessKind {
    /// Parses `stokes:first` / `stokes:corrected`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stokes:first" | "first" => Ok(Self::FirstOrder),
            "stokes:corrected" | "corrected" => Ok(Self::Corrected),
            other => Err(Error::InvalidArgument(format!(
                "unknown guess `{other}`; expected stokes:first or stokes:corrected"
            ))),
        }
    }
}

/// `alpha(2 pi / L)`.
pub fn bifurcation_speed(eq: &Equation) -> f64 {
    eq.symbol(eq.k0())
}

#[derive(Debug, Clone)]
pub struct StokesExpansion {
    pub k0: f64,
    pub c0: f64,
    /// `cos(k0 x)`, scaled to unit `L^2` norm over one period.
    pub xi1: Wave,
    pub order: u32,
    /// `c_(p-1)`.
    pub c_correction: f64,
    pub xi_p: Wave,
    /// Even `p >= 4` with `c_(p-1)` numerically zero: the corrected guess
    /// carries no speed information.
    pub vanishing_correction: bool,
}

impl StokesExpansion {
    /// `(eps xi_1 + eps^p xi_p, c0 + eps^(p-1) c_(p-1))`.
    pub fn guess(&self, eps: f64) -> (Wave, f64) {
        let p = self.order as i32;
        let ep = eps.powi(p);
        let samples = self
            .xi1
            .samples()
            .iter()
            .zip(self.xi_p.samples())
            .map(|(a, b)| eps * a + ep * b)
            .collect();
        let wave = Wave::new(self.xi1.grid().clone(), samples).expect("same grid");
        (wave, self.c0 + eps.powi(p - 1) * self.c_correction)
    }

    /// The `eps` for which `eps xi_1` has waveheight `a`.
    pub fn epsilon_for_waveheight(&self, a: f64) -> f64 {
        a / self.xi1.waveheight()
    }
}

/// Computes `c_(p-1)` and `xi_p` on the discretization's grid.
pub fn correction(disc: &Discretization) -> Result<StokesExpansion> {
    let eq = disc.equation();
    let grid = disc.grid();
    let n = grid.n();
    let k0 = eq.k0();
    let c0 = bifurcation_speed(eq);
    let p = eq.zero_degree();
    let fp = eq.flux_p_coeff();

    let raw = grid.sample(|x| (k0 * x).cos());
    let w = grid.length() / n as f64;
    let norm = (w * raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let xi1: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    let xi1_pow: Vec<f64> = xi1.iter().map(|v| v.powi(p as i32)).collect();
    let c_corr = fp * w * xi1_pow.iter().zip(&xi1).map(|(a, b)| a * b).sum::<f64>();

    let rhs: Vec<f64> = xi1
        .iter()
        .zip(&xi1_pow)
        .map(|(x, xp)| c_corr * x - fp * xp)
        .collect();
    let rhs_hat = grid.forward(&rhs)?;
    let mut coeffs = vec![0.0; n];
    for (l, (&r, &alpha)) in rhs_hat.iter().zip(disc.multiplier()).enumerate() {
        if l == 1 {
            continue;
        }
        let gap = alpha - c0;
        if gap.abs() < RESONANCE_GAP {
            return Err(Error::ResonantMode {
                mode: l,
                gap: gap.abs(),
            });
        }
        coeffs[l] = r / gap;
    }
    let xi_p = Wave::from_coefficients(grid.clone(), &coeffs)?;
    let vanishing = p >= 4 && p % 2 == 0 && c_corr.abs() < 1e-12;
    Ok(StokesExpansion {
        k0,
        c0,
        xi1: Wave::new(grid.clone(), xi1)?,
        order: p,
        c_correction: c_corr,
        xi_p,
        vanishing_correction: vanishing,
    })
}

/// Initial wave and speed at waveheight `a`.
///
/// The corrected guess falls back to first order when the expansion is
/// invalid on this grid (resonance) or carries no speed correction.
pub fn initial_guess(disc: &Discretization, a: f64, kind: GuessKind) -> Result<(Wave, f64)> {
    let eq = disc.equation();
    let k0 = eq.k0();
    let first = || {
        (
            Wave::from_fn(disc.grid().clone(), |x| 0.5 * a * (k0 * x).cos()),
            bifurcation_speed(eq),
        )
    };
    match kind {
        GuessKind::FirstOrder => Ok(first()),
        GuessKind::Corrected => match correction(disc) {
            Ok(exp) if !exp.vanishing_correction => {
                let eps = exp.epsilon_for_waveheight(a);
                Ok(exp.guess(eps))
            }
            Ok(_) | Err(Error::ResonantMode { .. }) => Ok(first()),
            Err(e) => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::Model;
    use crate::spectral::max_abs;
    use std::f64::consts::PI;

    fn disc(model: Model, length: f64, n: usize) -> Discretization {
        Discretization::new(Equation::new(model, length).unwrap(), n).unwrap()
    }

    #[test]
    fn bifurcation_speeds() {
        let ben = |l: f64| Equation::new(Model::Benjamin { tau: 0.1 }, l).unwrap();
        assert!((bifurcation_speed(&ben(PI / 5.0)) - 1.0).abs() < 1e-12);
        assert!((bifurcation_speed(&ben(4.0 * PI / 19.0)) - 0.525).abs() < 1e-12);
        assert!((bifurcation_speed(&ben(4.0 * PI)) - 0.525).abs() < 1e-12);
        let kdv = Equation::new(Model::Kdv, 2.0 * PI).unwrap();
        assert!((bifurcation_speed(&kdv) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn kdv_second_order_modes() {
        let exp = correction(&disc(Model::Kdv, 2.0 * PI, 32)).unwrap();
        assert_eq!(exp.order, 2);
        assert!(exp.c_correction.abs() < 1e-14);
        let c = exp.xi_p.coefficients();
        for (l, v) in c.iter().enumerate() {
            if l == 0 || l == 2 {
                assert!(v.abs() > 1e-3, "mode {l}");
            } else {
                assert!(v.abs() < 1e-14, "mode {l}: {v}");
            }
        }
    }

    #[test]
    fn mbo_speed_correction_matches_quadrature() {
        let n = 64;
        let exp = correction(&disc(Model::ModifiedBenjaminOno, 2.0 * PI, n)).unwrap();
        // xi1 = sqrt(2/L) cos, so <xi1^3, xi1> = (4/L^2) int cos^4 = (4/L) mean(cos^4).
        let quad: f64 = (0..100_000)
            .map(|i| ((i as f64 + 0.5) * 2.0 * PI / 100_000.0).cos().powi(4))
            .sum::<f64>()
            / 100_000.0;
        let expected = (1.0 / 3.0) * 4.0 / (2.0 * PI) * quad;
        assert!((expected - 1.0 / (4.0 * PI)).abs() < 1e-12);
        assert!(exp.c_correction > 0.0);
        assert!((exp.c_correction - expected).abs() < 1e-12, "{} vs {expected}", exp.c_correction);
    }

    #[test]
    fn whitham_mean_mode_is_finite() {
        let d = disc(Model::Whitham, 2.0 * PI, 32);
        let exp = correction(&d).unwrap();
        let c0 = exp.c0;
        let xi1 = exp.xi1.samples();
        let rhs: Vec<f64> = xi1.iter().map(|x| -0.75 * x * x).collect();
        let rhs0 = d.grid().forward(&rhs).unwrap()[0];
        let expected = rhs0 / (1.0 - c0);
        assert!((exp.xi_p.coefficients()[0] - expected).abs() < 1e-14);
        assert!(expected.is_finite() && expected < 0.0);
    }

    #[test]
    fn xi_p_is_orthogonal_to_xi1() {
        for model in [Model::Kdv, Model::Whitham, Model::ModifiedBenjaminOno, Model::GeneralizedKdv { exponent: 3 }] {
            let exp = correction(&disc(model, 2.0 * PI, 64)).unwrap();
            let dot: f64 = exp.xi1.samples().iter().zip(exp.xi_p.samples()).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-10, "{model}: {dot}");
        }
    }

    #[test]
    fn resonance_is_detected() {
        // Benjamin at L = pi/5: alpha(0) = alpha(10) = 1.
        let err = correction(&disc(Model::Benjamin { tau: 0.1 }, PI / 5.0, 16)).unwrap_err();
        assert!(matches!(err, Error::ResonantMode { mode: 0, .. }), "{err:?}");
        // Benjamin at L = 4 pi: alpha(0.5) = alpha(9.5) = 0.525, mode 19.
        let err = correction(&disc(Model::Benjamin { tau: 0.1 }, 4.0 * PI, 32)).unwrap_err();
        assert!(matches!(err, Error::ResonantMode { mode: 19, .. }), "{err:?}");
        // the corrected guess then falls back to first order
        let d = disc(Model::Benjamin { tau: 0.1 }, PI / 5.0, 16);
        let (w, c) = initial_guess(&d, 0.01, GuessKind::Corrected).unwrap();
        assert_eq!(c, 1.0 - 10.0 + 0.1 * 100.0);
        assert!((w.samples()[0] - 0.005 * (10.0 * d.grid().nodes()[0]).cos()).abs() < 1e-16);
    }

    #[test]
    fn even_order_vanishing_correction_is_flagged() {
        // gKdV with u^3 u_x: p = 4, <xi1^4, xi1> = 0 on the grid.
        let exp = correction(&disc(Model::GeneralizedKdv { exponent: 3 }, 2.0 * PI, 32)).unwrap();
        assert_eq!(exp.order, 4);
        assert!(exp.vanishing_correction);
        let exp = correction(&disc(Model::ModifiedBenjaminOno, 2.0 * PI, 32)).unwrap();
        assert!(!exp.vanishing_correction);
    }

    #[test]
    fn solvability_pairing_vanishes_at_second_order_for_higher_p() {
        // For p > 2 the eps^2 equation A xi_2 = c_1 xi_1 forces c_1 = <A xi_2, xi_1> = 0
        // for any xi_2, since A is symmetric with xi_1 in its kernel.
        for model in [Model::ModifiedBenjaminOno, Model::GeneralizedKdv { exponent: 2 }] {
            let d = disc(model, 2.0 * PI, 32);
            let exp = correction(&d).unwrap();
            let probe: Vec<f64> = d.grid().sample(|x| (2.0 * x).cos() + 0.3 * x.cos() + 0.1);
            let lp = d.apply_operator(&probe).unwrap();
            let a_probe: Vec<f64> = lp.iter().zip(&probe).map(|(l, v)| l - exp.c0 * v).collect();
            let c1: f64 = a_probe.iter().zip(exp.xi1.samples()).map(|(a, b)| a * b).sum();
            assert!(c1.abs() < 1e-13, "{model}: {c1}");
        }
    }

    #[test]
    fn expansion_residual_order() {
        for (model, length) in [
            (Model::Kdv, 2.0 * PI),
            (Model::Whitham, 2.0 * PI),
            (Model::ModifiedBenjaminOno, 2.0 * PI),
            (Model::Benjamin { tau: 0.1 }, 4.0 * PI / 19.0),
        ] {
            let d = disc(model, length, 32);
            let exp = correction(&d).unwrap();
            let p = exp.order as f64;
            let res = |eps: f64| {
                let (w, c) = exp.guess(eps);
                max_abs(&d.steady_residual(w.samples(), c, 0.0).unwrap())
            };
            let (e1, e2) = (1e-3, 1e-2);
            let slope = (res(e2) / res(e1)).log10() / (e2 / e1).log10();
            assert!(slope >= p + 0.8, "{model}: slope {slope}");
        }
    }

    #[test]
    fn guess_parsing() {
        assert_eq!(GuessKind::parse("stokes:first").unwrap(), GuessKind::FirstOrder);
        assert_eq!(GuessKind::parse("stokes:corrected").unwrap(), GuessKind::Corrected);
        assert!(GuessKind::parse("petviashvili").is_err());
    }
}
