//! Run configuration: a TOML file with fixed sections and no unknown keys.
//!
//! ```toml
//! [equation]
//! name = "whitham"
//! length = "2pi"
//!
//! [grid]
//! n = 1024
//!
//! [branch]
//! boundary = "homogeneous_b"
//! n_iter = 100
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use travwave::continuation::NavigationOptions;
use travwave::equations::{Equation, Model};
use travwave::evolution::EvolutionConfig;
use travwave::solver::{BoundaryCondition, NewtonOptions};
use travwave::stokes::GuessKind;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub branch: BranchSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    pub name: String,
    /// Wavelength: a number or a multiple of pi such as `"2pi"`, `"pi/5"`, `"4pi/19"`.
    pub length: Length,
    /// Surface tension of the Benjamin equation.
    pub tau: Option<f64>,
    /// Nonlinearity `u^p u_x` of generalized KdV.
    pub exponent: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    /// Grid doublings applied by `refine`.
    pub doublings: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 256, doublings: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchSection {
    pub boundary: String,
    /// Integration constant for `boundary = "const_level"`.
    pub level: Option<f64>,
    pub step: f64,
    /// Continuation steps after the bootstrap.
    pub n_iter: usize,
    pub max_halvings: usize,
    pub easy_iters: usize,
    pub easy_streak: usize,
    pub bootstrap_amplitude: f64,
    pub guess: String,
    pub stop_on_crest_split: bool,
    /// Stop once the waveheight reaches this value.
    pub stop_at_waveheight: Option<f64>,
}

impl Default for BranchSection {
    fn default() -> Self {
        let nav = NavigationOptions::default();
        BranchSection {
            boundary: "mean_zero".into(),
            level: None,
            step: nav.step,
            n_iter: 100,
            max_halvings: nav.max_halvings,
            easy_iters: nav.easy_iters,
            easy_streak: nav.easy_streak,
            bootstrap_amplitude: nav.bootstrap_amplitude,
            guess: "stokes:first".into(),
            stop_on_crest_split: false,
            stop_at_waveheight: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let n = NewtonOptions::default();
        SolverSection {
            newton_tol: n.tol,
            newton_max_iters: n.max_iters,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    /// Half-period `x,phi` profile as written by `branch`.
    pub profile: Option<PathBuf>,
    /// Full-period grid size; `2N` of the profile when absent.
    pub grid: Option<usize>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub snapshot_stride: usize,
    pub dealias: bool,
    /// Largest shift-compensated relative L2 deviation still counted as
    /// shape-preserving.
    pub deviation_tol: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        EvolutionSection {
            profile: None,
            grid: None,
            t_end: e.t_end,
            dt: e.dt,
            snapshot_stride: e.snapshot_stride,
            dealias: e.dealias,
            deviation_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    pub waveheight: f64,
    pub grids: Vec<usize>,
    /// Continuation steps allowed to reach the waveheight on the first grid.
    pub max_steps: usize,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            waveheight: 1.2651,
            grids: vec![32, 64, 128, 256, 512],
            max_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    /// Output directory of an earlier `branch` or `refine` run.
    pub input: Option<PathBuf>,
    /// `key` (turning, max-V and terminal points), `all` or `none`.
    pub fits: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub profiles: bool,
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            profiles: true,
            plots: true,
        }
    }
}

/// A positive wavelength, possibly written as a multiple of pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length(pub f64);

impl Length {
    pub fn parse(s: &str) -> Option<f64> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(at) = s.find("pi") else {
            return s.parse().ok();
        };
        let head = s[..at].trim_end_matches('*');
        let tail = &s[at + 2..];
        let coef: f64 = if head.is_empty() { 1.0 } else { head.parse().ok()? };
        let div: f64 = match tail.strip_prefix('/') {
            Some(d) => d.parse().ok()?,
            None if tail.is_empty() => 1.0,
            None => return None,
        };
        Some(coef * PI / div)
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Length;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a multiple of pi such as \"2pi\" or \"4pi/19\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Length, E> {
                Ok(Length(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Length, E> {
                Ok(Length(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Length, E> {
                Length::parse(v)
                    .map(Length)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_any(V)
    }
}

/// Reads, overrides and validates a configuration file.
///
/// Relative paths inside the file are resolved against its directory.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = parse(&text, overrides).with_context(|| format!("in config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(p) = &mut cfg.evolution.profile {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(p) = &mut cfg.analyze.input {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Parses configuration text, then applies `section.key=value` overrides.
pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig> {
    // the untouched text is checked first so errors point at its lines
    let cfg: RunConfig = toml::from_str(text)?;
    let cfg = if overrides.is_empty() {
        cfg
    } else {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        RunConfig::deserialize(table).context("after --set overrides")?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override `{spec}` must look like section.key=value");
    };
    let Some((section, field)) = key.trim().split_once('.') else {
        bail!("override key `{key}` must look like section.key");
    };
    let raw = raw.trim();
    // TOML literals first (numbers, booleans, arrays, quoted strings), bare text otherwise
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let Some(sec) = entry.as_table_mut() else {
        bail!("`{section}` is not a section");
    };
    sec.insert(field.to_string(), value);
    Ok(())
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let e = &self.equation;
        if !(e.length.0 > 0.0 && e.length.0.is_finite()) {
            bail!("equation.length must be positive, got {}", e.length.0);
        }
        let name = e.name.to_ascii_lowercase();
        if e.tau.is_some() && name != "benjamin" {
            bail!("equation.tau applies only to the benjamin equation");
        }
        if e.exponent.is_some() && !matches!(name.as_str(), "gkdv" | "generalized_kdv") {
            bail!("equation.exponent applies only to gkdv");
        }
        self.model()?;
        self.boundary()?;
        self.guess()?;
        let b = &self.branch;
        let positive = [
            ("branch.step", b.step),
            ("branch.bootstrap_amplitude", b.bootstrap_amplitude),
            ("solver.newton_tol", self.solver.newton_tol),
            ("evolution.deviation_tol", self.evolution.deviation_tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{key} must be positive, got {v}");
            }
        }
        if self.grid.n < 2 {
            bail!("grid.n must be at least 2, got {}", self.grid.n);
        }
        if self.solver.newton_max_iters == 0 {
            bail!("solver.newton_max_iters must be at least 1");
        }
        self.evolution_config().validate()?;
        if let Some(m) = self.evolution.grid {
            if m < 2 || m % 2 != 0 {
                bail!("evolution.grid must be even and at least 2, got {m}");
            }
        }
        if let Some(f) = &self.analyze.fits {
            if !matches!(f.as_str(), "key" | "all" | "none") {
                bail!("analyze.fits must be key, all or none, got `{f}`");
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        let e = &self.equation;
        let param = e.tau.or(e.exponent.map(f64::from));
        Ok(Model::from_name(&e.name, param)?)
    }

    pub fn equation(&self) -> Result<Equation> {
        Ok(Equation::new(self.model()?, self.equation.length.0)?)
    }

    pub fn boundary(&self) -> Result<BoundaryCondition> {
        Ok(BoundaryCondition::from_name(&self.branch.boundary, self.branch.level)?)
    }

    pub fn guess(&self) -> Result<GuessKind> {
        Ok(GuessKind::parse(&self.branch.guess)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.solver.newton_tol,
            max_iters: self.solver.newton_max_iters,
        }
    }

    pub fn navigation(&self) -> Result<NavigationOptions> {
        let b = &self.branch;
        Ok(NavigationOptions {
            step: b.step,
            max_halvings: b.max_halvings,
            easy_iters: b.easy_iters,
            easy_streak: b.easy_streak,
            bootstrap_amplitude: b.bootstrap_amplitude,
            guess: self.guess()?,
            stop_on_crest_split: b.stop_on_crest_split,
            newton: self.newton(),
        })
    }

    pub fn evolution_config(&self) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            dt: e.dt,
            t_end: e.t_end,
            dealias: e.dealias,
            snapshot_stride: e.snapshot_stride,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[equation]\nname = \"kdv\"\nlength = \"2pi\"\n";

    #[test]
    fn lengths() {
        assert_eq!(Length::parse("2pi"), Some(2.0 * PI));
        assert_eq!(Length::parse("pi/5"), Some(PI / 5.0));
        assert_eq!(Length::parse("4 pi / 19"), Some(4.0 * PI / 19.0));
        assert_eq!(Length::parse("4*pi"), Some(4.0 * PI));
        assert_eq!(Length::parse("60"), Some(60.0));
        assert_eq!(Length::parse("2pi5"), None);
        assert_eq!(Length::parse("tau"), None);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.boundary().unwrap(), BoundaryCondition::MeanZero);
        assert_eq!(cfg.navigation().unwrap().step, 0.01);
        assert_eq!(cfg.equation().unwrap().length(), 2.0 * PI);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let text = format!("{MINIMAL}\n[solver]\nnewton_tollerance = 1e-10\n");
        let err = format!("{:#}", parse(&text, &[]).unwrap_err());
        assert!(err.contains("newton_tollerance"), "{err}");
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn overrides_apply_and_are_checked() {
        let cfg = parse(MINIMAL, &["grid.n=64".into(), "branch.boundary=homogeneous_b".into()]).unwrap();
        assert_eq!(cfg.grid.n, 64);
        assert_eq!(cfg.boundary().unwrap(), BoundaryCondition::HomogeneousB);
        let err = format!("{:#}", parse(MINIMAL, &["grid.size=64".into()]).unwrap_err());
        assert!(err.contains("size"), "{err}");
        assert!(parse(MINIMAL, &["gridn=64".into()]).is_err());
    }

    #[test]
    fn parameters_must_match_the_model() {
        let text = "[equation]\nname = \"kdv\"\nlength = 6.0\ntau = 0.1\n";
        assert!(parse(text, &[]).is_err());
        let text = "[equation]\nname = \"benjamin\"\nlength = \"pi/5\"\ntau = 0.1\n";
        assert_eq!(parse(text, &[]).unwrap().model().unwrap(), Model::Benjamin { tau: 0.1 });
    }

    #[test]
    fn bad_values_are_rejected() {
        for o in ["branch.step=-1", "equation.length=0", "grid.n=1", "evolution.grid=7", "branch.boundary=periodic"] {
            assert!(parse(MINIMAL, &[o.into()]).is_err(), "{o}");
        }
    }
}
