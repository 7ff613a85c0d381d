//! Half-period cosine collocation.
//!
//! An even `L`-periodic profile is represented by its values at the `N`
//! half-shifted nodes `x_n = (L/2)(2n-1)/(2N)`, `n = 1..N`, which all lie in
//! `(0, L/2)`. Its discrete cosine coefficients on the scaled wavenumbers
//! `kappa_l = 2 pi l / L` form an orthonormal pair with the samples:
//!
//! ```text
//! Phi(kappa_l) = w_l sum_n phi(x_n) cos(kappa_l x_n)
//! phi(x)       = sum_l w_l Phi(kappa_l) cos(kappa_l x)
//! w_0 = sqrt(1/N),  w_l = sqrt(2/N) for l > 0
//! ```
//!
//! This is the orthonormal DCT-II / DCT-III pair. The fast path goes through
//! `rustdct`, which leaves outputs unnormalized; the weights are applied here.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use faer::Mat;
use rustdct::{DctPlanner, TransformType2And3};

use crate::equations::Equation;
use crate::error::{Error, Result};

struct GridInner {
    n: usize,
    length: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    weights: Vec<f64>,
    dct: Arc<dyn TransformType2And3<f64>>,
}

/// Collocation grid on a half period. Cheap to clone.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.0.n)
            .field("length", &self.0.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.n == other.0.n && self.0.length == other.0.length)
    }
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs N >= 2, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {length}"
            )));
        }
        let nf = n as f64;
        let nodes = (1..=n)
            .map(|i| 0.5 * length * (2 * i - 1) as f64 / (2.0 * nf))
            .collect();
        let wavenumbers = (0..n).map(|l| 2.0 * PI / length * l as f64).collect();
        let mut weights = vec![(2.0 / nf).sqrt(); n];
        weights[0] = (1.0 / nf).sqrt();
        let dct = DctPlanner::new().plan_dct2(n);
        Ok(Grid(Arc::new(GridInner {
            n,
            length,
            nodes,
            wavenumbers,
            weights,
            dct,
        })))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    /// Fundamental wavelength (full period).
    pub fn length(&self) -> f64 {
        self.0.length
    }

    pub fn nodes(&self) -> &[f64] {
        &self.0.nodes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.0.wavenumbers
    }

    pub fn weights(&self) -> &[f64] {
        &self.0.weights
    }

    /// Orthonormal forward transform: samples to cosine coefficients.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<f64>> {
        self.check_len(samples.len())?;
        let mut buf = samples.to_vec();
        self.0.dct.process_dct2(&mut buf);
        for (b, w) in buf.iter_mut().zip(&self.0.weights) {
            *b *= w;
        }
        Ok(buf)
    }

    /// Orthonormal inverse transform: cosine coefficients to samples.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut buf: Vec<f64> = coeffs
            .iter()
            .zip(&self.0.weights)
            .map(|(c, w)| c * w)
            .collect();
        // rustdct's DCT-III halves the l = 0 term.
        buf[0] *= 2.0;
        self.0.dct.process_dct3(&mut buf);
        Ok(buf)
    }

    /// Evaluates the cosine series with coefficients `coeffs` at an arbitrary `x`.
    pub fn eval_series(&self, coeffs: &[f64], x: f64) -> f64 {
        coeffs
            .iter()
            .zip(&self.0.weights)
            .zip(&self.0.wavenumbers)
            .map(|((c, w), k)| c * w * (k * x).cos())
            .sum()
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.0.nodes.iter().map(|&x| f(x)).collect()
    }

    /// The orthonormal cosine matrix `C[l][i] = w_l cos(kappa_l x_i)`.
    ///
    /// The angle is reduced exactly as the integer `l (2i+1) mod 4N` before
    /// the cosine is taken.
    pub fn cosine_matrix(&self) -> Mat<f64> {
        let n = self.0.n;
        let period = 4 * n;
        let table: Vec<f64> = (0..period)
            .map(|m| (PI * m as f64 / (2 * n) as f64).cos())
            .collect();
        Mat::from_fn(n, n, |l, i| {
            self.0.weights[l] * table[(l * (2 * i + 1)) % period]
        })
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.0.n {
            return Err(Error::LengthMismatch {
                expected: self.0.n,
                got,
            });
        }
        Ok(())
    }
}

/// `make_grid(L, N)`.
pub fn make_grid(length: f64, n: usize) -> Result<Grid> {
    Grid::new(length, n)
}

/// Half-period samples of an even profile on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    grid: Grid,
    samples: Vec<f64>,
}

impl Wave {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        grid.check_len(samples.len())?;
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n();
        Self {
            grid,
            samples: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.sample(f);
        Self { grid, samples }
    }

    pub fn from_coefficients(grid: Grid, coeffs: &[f64]) -> Result<Self> {
        let samples = grid.inverse(coeffs)?;
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.grid
            .forward(&self.samples)
            .expect("wave samples always match their grid")
    }

    /// Crest-to-trough height on the half grid, `phi(x_1) - phi(x_N)`.
    pub fn waveheight(&self) -> f64 {
        self.samples[0] - self.samples[self.samples.len() - 1]
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cosine-series value at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.eval_series(&self.coefficients(), x)
    }

    pub fn scaled(&self, factor: f64) -> Wave {
        Wave {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|v| v * factor).collect(),
        }
    }

    /// Writes the profile as `x,phi` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,phi")?;
        for (x, v) in self.grid.nodes().iter().zip(&self.samples) {
            writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*v))?;
        }
        Ok(())
    }

    /// Reads an `x,phi` profile written by [`Wave::write_csv`]. The node
    /// column must match the half-shifted grid for wavelength `length`.
    pub fn read_csv<R: BufRead>(input: R, length: f64) -> Result<Wave> {
        let mut xs = Vec::new();
        let mut vals = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let line = line.trim();
            if lineno == 0 {
                if line != "x,phi" {
                    return Err(Error::InvalidArgument(format!(
                        "profile header must be `x,phi`, got `{line}`"
                    )));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                    Error::InvalidArgument(format!("bad profile row {}: `{line}`", lineno + 1))
                })
            };
            xs.push(parse(parts.next())?);
            vals.push(parse(parts.next())?);
        }
        let grid = Grid::new(length, vals.len())?;
        for (a, b) in xs.iter().zip(grid.nodes()) {
            if (a - b).abs() > 1e-9 * length {
                return Err(Error::InvalidArgument(format!(
                    "profile node {a} does not match grid node {b} for L={length}"
                )));
            }
        }
        Wave::new(grid, vals)
    }
}

/// Shortest-exact rendering is not fixed-width; scientific with 16 fractional
/// digits always carries 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Forward transform of raw samples.
pub fn cosine_forward(grid: &Grid, samples: &[f64]) -> Result<Vec<f64>> {
    grid.forward(samples)
}

/// Inverse transform of raw coefficients.
pub fn cosine_inverse(grid: &Grid, coeffs: &[f64]) -> Result<Vec<f64>> {
    grid.inverse(coeffs)
}

/// An equation discretized on a grid: the multiplier values `alpha(kappa_l)`
/// and, on demand, the dense operator matrix used by Newton's method.
pub struct Discretization {
    equation: Equation,
    grid: Grid,
    multiplier: Vec<f64>,
    matrix: OnceLock<Arc<Mat<f64>>>,
}

impl fmt::Debug for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Discretization")
            .field("equation", &self.equation)
            .field("grid", &self.grid)
            .finish()
    }
}

impl Discretization {
    pub fn new(equation: Equation, n: usize) -> Result<Self> {
        let grid = Grid::new(equation.length(), n)?;
        Ok(Self::on_grid(equation, grid))
    }

    pub fn on_grid(equation: Equation, grid: Grid) -> Self {
        let multiplier = grid
            .wavenumbers()
            .iter()
            .map(|&k| equation.symbol(k))
            .collect();
        Self {
            equation,
            grid,
            multiplier,
            matrix: OnceLock::new(),
        }
    }

    pub fn equation(&self) -> &Equation {
        &self.equation
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// `alpha(kappa_l)` for `l = 0..N`.
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// `L^N phi` by transform, multiplier and inverse transform.
    pub fn apply_operator(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let mut coeffs = self.grid.forward(samples)?;
        for (c, a) in coeffs.iter_mut().zip(&self.multiplier) {
            *c *= a;
        }
        self.grid.inverse(&coeffs)
    }

    /// Dense symmetric matrix `L^N(i,j) = sum_l w_l^2 alpha(kappa_l) cos(kappa_l x_i) cos(kappa_l x_j)`.
    ///
    /// Built once per discretization and shared afterwards.
    pub fn operator_matrix(&self) -> Arc<Mat<f64>> {
        self.matrix
            .get_or_init(|| Arc::new(build_operator_matrix(&self.grid, &self.multiplier)))
            .clone()
    }

    /// `-c phi + f(phi) + L^N phi - B` at every node.
    pub fn steady_residual(&self, samples: &[f64], c: f64, b: f64) -> Result<Vec<f64>> {
        let lphi = self.apply_operator(samples)?;
        Ok(samples
            .iter()
            .zip(lphi)
            .map(|(&u, lu)| -c * u + self.equation.flux(u) + lu - b)
            .collect())
    }
}

fn build_operator_matrix(grid: &Grid, multiplier: &[f64]) -> Mat<f64> {
    let c = grid.cosine_matrix();
    let n = grid.n();
    let scaled = Mat::from_fn(n, n, |l, i| multiplier[l] * c[(l, i)]);
    let m = c.transpose() * &scaled;
    // Exact symmetry, independent of the summation order inside the product.
    Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// `apply_operator(eq, w)`.
pub fn apply_operator(eq: &Equation, w: &Wave) -> Wave {
    let disc = Discretization::on_grid(*eq, w.grid().clone());
    let samples = disc
        .apply_operator(w.samples())
        .expect("wave samples always match their grid");
    Wave {
        grid: w.grid().clone(),
        samples,
    }
}

/// `operator_matrix(eq, g)`.
pub fn operator_matrix(eq: &Equation, grid: &Grid) -> Mat<f64> {
    let multiplier: Vec<f64> = grid.wavenumbers().iter().map(|&k| eq.symbol(k)).collect();
    build_operator_matrix(grid, &multiplier)
}

/// `steady_residual(eq, w, c, B)`.
pub fn steady_residual(eq: &Equation, w: &Wave, c: f64, b: f64) -> Vec<f64> {
    Discretization::on_grid(*eq, w.grid().clone())
        .steady_residual(w.samples(), c, b)
        .expect("wave samples always match their grid")
}

/// Spectral refinement: zero-pads the cosine coefficients to `factor * N`
/// and samples the same series on the finer grid.
pub fn refine(w: &Wave, factor: usize) -> Result<Wave> {
    if factor < 2 || !factor.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "refinement factor must be a power of two >= 2, got {factor}"
        )));
    }
    let n = w.grid().n();
    let fine = Grid::new(w.grid().length(), factor * n)?;
    let coeffs = w.coefficients();
    let mut padded = vec![0.0; factor * n];
    for (l, c) in coeffs.iter().enumerate() {
        padded[l] = c * w.grid().weights()[l] / fine.weights()[l];
    }
    Wave::from_coefficients(fine, &padded)
}

/// Infinity norm.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
