//! Equation catalog.
//!
//! Every model has the form `u_t + [f(u)]_x + L u_x = 0` where `L` is a real,
//! even Fourier multiplier with symbol `alpha(k)`. A model is described by its
//! flux `f` (with `f'` and the antiderivative `F`, `F(0) = 0`) and its symbol.
//! An [`Equation`] pairs a model with the fundamental wavelength `L` of the
//! periodic waves being sought.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this wavenumber the Whitham symbol switches to its Taylor series.
const WHITHAM_TAYLOR_CUTOFF: f64 = 1e-4;

/// The finite catalog of supported models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Model {
    /// `f = 3/4 u^2`, `alpha(k) = 1 - k^2/6`.
    Kdv,
    /// `u_t + u^p u_x + u_x + u_xxx = 0`: `f = u^(p+1)/(p+1)`, `alpha(k) = 1 - k^2`.
    GeneralizedKdv { exponent: u32 },
    /// `f = 3/4 u^2`, `alpha(k) = sqrt(tanh(k)/k)`.
    Whitham,
    /// `f = u^2/2`, `alpha(k) = 1 - |k|`.
    BenjaminOno,
    /// `f = u^3/3`, `alpha(k) = 1 - |k|`.
    ModifiedBenjaminOno,
    /// `f = u^2/2`, `alpha(k) = 1 - |k| + tau k^2`.
    Benjamin { tau: f64 },
}

impl Model {
    /// Looks a model up by name. `param` is the exponent for `gkdv` and
    /// `tau` for `benjamin`; other models ignore it.
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        let model = match name.to_ascii_lowercase().as_str() {
            "kdv" => Model::Kdv,
            "gkdv" | "generalized_kdv" => {
                let p = param.unwrap_or(1.0);
                if p < 1.0 || p.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "gkdv exponent must be a positive integer, got {p}"
                    )));
                }
                Model::GeneralizedKdv { exponent: p as u32 }
            }
            "whitham" => Model::Whitham,
            "bo" | "benjamin_ono" => Model::BenjaminOno,
            "mbo" | "modified_benjamin_ono" => Model::ModifiedBenjaminOno,
            "benjamin" => {
                let tau = param.unwrap_or(0.1);
                if !tau.is_finite() {
                    return Err(Error::InvalidArgument("benjamin tau must be finite".into()));
                }
                Model::Benjamin { tau }
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown equation `{other}`")));
            }
        };
        Ok(model)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Kdv => "kdv",
            Model::GeneralizedKdv { .. } => "gkdv",
            Model::Whitham => "whitham",
            Model::BenjaminOno => "benjamin_ono",
            Model::ModifiedBenjaminOno => "modified_benjamin_ono",
            Model::Benjamin { .. } => "benjamin",
        }
    }

    /// Fourier-multiplier symbol `alpha(k)`.
    ///
    /// Every symbol is evaluated on `|k|`, so evenness holds bit for bit.
    pub fn symbol(&self, k: f64) -> f64 {
        let k = k.abs();
        match *self {
            Model::Kdv => 1.0 - k * k / 6.0,
            Model::GeneralizedKdv { .. } => 1.0 - k * k,
            Model::Whitham => whitham_symbol(k),
            Model::BenjaminOno | Model::ModifiedBenjaminOno => 1.0 - k,
            Model::Benjamin { tau } => 1.0 - k + tau * k * k,
        }
    }

    pub fn flux(&self, u: f64) -> f64 {
        match *self {
            Model::Kdv | Model::Whitham => 0.75 * u * u,
            Model::GeneralizedKdv { exponent } => {
                let q = exponent as i32 + 1;
                u.powi(q) / q as f64
            }
            Model::BenjaminOno | Model::Benjamin { .. } => 0.5 * u * u,
            Model::ModifiedBenjaminOno => u * u * u / 3.0,
        }
    }

    pub fn flux_prime(&self, u: f64) -> f64 {
        match *self {
            Model::Kdv | Model::Whitham => 1.5 * u,
            Model::GeneralizedKdv { exponent } => u.powi(exponent as i32),
            Model::BenjaminOno | Model::Benjamin { .. } => u,
            Model::ModifiedBenjaminOno => u * u,
        }
    }

    /// Antiderivative `F` of the flux with `F(0) = 0`.
    pub fn flux_antideriv(&self, u: f64) -> f64 {
        match *self {
            Model::Kdv | Model::Whitham => 0.25 * u * u * u,
            Model::GeneralizedKdv { exponent } => {
                let q = exponent as i32 + 1;
                u.powi(q + 1) / (q as f64 * (q + 1) as f64)
            }
            Model::BenjaminOno | Model::Benjamin { .. } => u * u * u / 6.0,
            Model::ModifiedBenjaminOno => u.powi(4) / 12.0,
        }
    }

    /// Order `p` of the zero of `f` at the origin.
    pub fn zero_degree(&self) -> u32 {
        match *self {
            Model::Kdv | Model::Whitham | Model::BenjaminOno | Model::Benjamin { .. } => 2,
            Model::GeneralizedKdv { exponent } => exponent + 1,
            Model::ModifiedBenjaminOno => 3,
        }
    }

    /// Leading Taylor coefficient `f_p = f^(p)(0) / p!`.
    pub fn flux_p_coeff(&self) -> f64 {
        match *self {
            Model::Kdv | Model::Whitham => 0.75,
            Model::GeneralizedKdv { exponent } => 1.0 / (exponent as f64 + 1.0),
            Model::BenjaminOno | Model::Benjamin { .. } => 0.5,
            Model::ModifiedBenjaminOno => 1.0 / 3.0,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::GeneralizedKdv { exponent } => write!(f, "gkdv(p={exponent})"),
            Model::Benjamin { tau } => write!(f, "benjamin(tau={tau})"),
            m => f.write_str(m.name()),
        }
    }
}

/// `sqrt(tanh(k)/k)` for `k >= 0`, with the removable singularity at zero
/// replaced by `sqrt(1 - k^2/3 + 2k^4/15)`.
fn whitham_symbol(k: f64) -> f64 {
    if k < WHITHAM_TAYLOR_CUTOFF {
        let k2 = k * k;
        (1.0 - k2 / 3.0 + 2.0 * k2 * k2 / 15.0).sqrt()
    } else {
        (k.tanh() / k).sqrt()
    }
}

/// A model together with the fundamental wavelength of the sought waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub model: Model,
    length: f64,
}

impl Equation {
    pub fn new(model: Model, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {length}"
            )));
        }
        Ok(Self { model, length })
    }

    /// Fundamental wavelength `L` (one full period).
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Fundamental wavenumber `2 pi / L`.
    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn symbol(&self, k: f64) -> f64 {
        self.model.symbol(k)
    }

    pub fn flux(&self, u: f64) -> f64 {
        self.model.flux(u)
    }

    pub fn flux_prime(&self, u: f64) -> f64 {
        self.model.flux_prime(u)
    }

    pub fn flux_antideriv(&self, u: f64) -> f64 {
        self.model.flux_antideriv(u)
    }

    pub fn zero_degree(&self) -> u32 {
        self.model.zero_degree()
    }

    pub fn flux_p_coeff(&self) -> f64 {
        self.model.flux_p_coeff()
    }

    /// Pointwise flux of a sample vector.
    pub fn eval_flux(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&v| self.flux(v)).collect()
    }

    /// Closed-form solitary wave, when the model has one registered.
    pub fn exact_solitary(&self, waveheight: f64) -> Option<ExactSolitary> {
        match self.model {
            Model::Kdv if waveheight > 0.0 => Some(ExactSolitary { waveheight }),
            _ => None,
        }
    }
}

/// `a sech^2(sqrt(3a/4) x)` travelling at `c = 1 + a/2`: the KdV solitary
/// wave for `f = 3/4 u^2`, `alpha(k) = 1 - k^2/6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolitary {
    pub waveheight: f64,
}

impl ExactSolitary {
    pub fn speed(&self) -> f64 {
        1.0 + self.waveheight / 2.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = self.waveheight;
        let s = 1.0 / ((0.75 * a).sqrt() * x).cosh();
        a * s * s
    }

    /// The member of the family with `u(x1) - u(xn) = target`.
    ///
    /// Discrete solutions pin the waveheight between the first and last
    /// collocation nodes, which miss the crest at `x = 0`; this is the exact
    /// wave with the same discrete waveheight. Found by bisection.
    pub fn matching_node_waveheight(target: f64, x1: f64, xn: f64) -> Option<ExactSolitary> {
        if !(target > 0.0) || !(x1 < xn) {
            return None;
        }
        let h = |a: f64| {
            let e = ExactSolitary { waveheight: a };
            e.eval(x1) - e.eval(xn) - target
        };
        let (mut lo, mut hi) = (target, 2.0 * target);
        let mut grow = 0;
        while h(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(ExactSolitary {
            waveheight: 0.5 * (lo + hi),
        })
    }
}
