//! Fourier-series deconvolution for the Berkson model `U = h(Z + delta) + eps`.
//!
//! The Fourier coefficients of the calibrated regression `G = h * f(-delta)`
//! are integrals of `u * phi_j(z)` regressions over the support box, so they
//! are estimated by the box-integral estimator with complex responses. All
//! modes share one set of Monte Carlo points, neighbor sets and weights.
//! Dividing by the error density's Fourier coefficients then gives `h`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::data::{BoxSupport, Sample};
use crate::error::{Error, Result};
use crate::estimators::{plan_for, LocalFit, MonteCarlo};
use crate::plan::{FitPlan, Queries};

/// Default guard for spectral division.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-8;

/// All `j` in `{-J, ..., J}^d`, lexicographic with the first axis slowest.
///
/// In this order `-j` sits at position `len - 1 - pos(j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierIndexGrid {
    cutoff: usize,
    dim: usize,
    indices: Vec<Vec<i64>>,
}

impl FourierIndexGrid {
    pub fn new(cutoff: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let side = 2 * cutoff + 1;
        let count = side
            .checked_pow(dim as u32)
            .filter(|&c| c <= 50_000_000)
            .ok_or_else(|| Error::InvalidParameter(format!("grid ({side})^{dim} is too large")))?;
        let j = cutoff as i64;
        let indices = (0..count)
            .map(|mut pos| {
                let mut idx = vec![0i64; dim];
                for slot in idx.iter_mut().rev() {
                    *slot = (pos % side) as i64 - j;
                    pos /= side;
                }
                idx
            })
            .collect();
        Ok(Self {
            cutoff,
            dim,
            indices,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<i64>] {
        &self.indices
    }

    /// Position of `j` in the grid order.
    pub fn position(&self, j: &[i64]) -> Option<usize> {
        if j.len() != self.dim {
            return None;
        }
        let side = 2 * self.cutoff as i64 + 1;
        let mut pos = 0i64;
        for &v in j {
            if v.abs() > self.cutoff as i64 {
                return None;
            }
            pos = pos * side + v + self.cutoff as i64;
        }
        Some(pos as usize)
    }

    /// Position of `-j` given the position of `j`.
    #[inline]
    pub fn mirror(&self, pos: usize) -> usize {
        self.indices.len() - 1 - pos
    }
}

/// `phi_j(z) = exp(i <j, z>)`.
///
/// The phase is reduced through its absolute value so that
/// `phi_{-j}(z) == conj(phi_j(z))` holds bit for bit.
#[inline]
pub fn fourier_basis(j: &[i64], z: &[f64]) -> Complex64 {
    let mut theta = 0.0;
    for (&jk, &zk) in j.iter().zip(z) {
        theta += jk as f64 * zk;
    }
    let (s, c) = theta.abs().sin_cos();
    Complex64::new(c, if theta < 0.0 { -s } else { s })
}

/// Known distribution of the Berkson error `delta`.
pub trait ErrorDensity: Send + Sync {
    /// `f^ft(j) = integral of f_delta(x) exp(i <j, x>) dx`.
    fn coefficient(&self, j: &[i64]) -> Complex64;

    /// Polynomial decay exponent `gamma` of the coefficients.
    fn decay_exponent(&self) -> f64;

    /// Constants `(c, C)` with `c (1+|j|)^-gamma <= |f^ft(j)| <= C (1+|j|)^-gamma`,
    /// when known.
    fn bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// No Berkson error: `f^ft == 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityError;

impl ErrorDensity for IdentityError {
    fn coefficient(&self, _j: &[i64]) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn decay_exponent(&self) -> f64 {
        0.0
    }

    fn bounds(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }
}

/// Independent Laplace errors with scale `b` on every axis:
/// `f^ft(j) = prod_k 1 / (1 + b^2 j_k^2)`.
///
/// The Laplace density is not compactly supported; with small `b` its mass
/// outside `(-pi, pi)^d` is negligible.
#[derive(Debug, Clone, Copy)]
pub struct ProductLaplace {
    pub scale: f64,
}

impl ErrorDensity for ProductLaplace {
    fn coefficient(&self, j: &[i64]) -> Complex64 {
        let b2 = self.scale * self.scale;
        let v: f64 = j
            .iter()
            .map(|&jk| 1.0 / (1.0 + b2 * (jk * jk) as f64))
            .product();
        Complex64::new(v, 0.0)
    }

    fn decay_exponent(&self) -> f64 {
        2.0
    }
}

/// Estimated integrals `Psi_j` of `G(z) phi_j(z)` over the support box.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    pub grid: FourierIndexGrid,
    pub values: Vec<Complex64>,
    pub k: usize,
    pub fallback_count: usize,
}

impl PsiTable {
    pub fn get(&self, j: &[i64]) -> Option<Complex64> {
        self.grid.position(j).map(|p| self.values[p])
    }
}

fn modal_responses(sample: &Sample, j: &[i64]) -> Vec<Complex64> {
    sample
        .covariates
        .iter()
        .zip(&sample.responses)
        .map(|(z, &u)| fourier_basis(j, z) * u)
        .collect()
}

/// `volume * mean_k G_j(x_k)`, summed in point order.
fn psi_from_plan(plan: &FitPlan, sample: &Sample, j: &[i64], volume: f64) -> Complex64 {
    let responses = modal_responses(sample, j);
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..plan.len() {
        sum += plan.fitted(i, &responses);
    }
    sum * (volume / plan.len() as f64)
}

fn berkson_plan(
    sample: &Sample,
    support: &BoxSupport,
    fit: &LocalFit,
    mc: &MonteCarlo,
) -> Result<FitPlan> {
    if support.dim() != sample.dim() {
        return Err(Error::InvalidInput(format!(
            "sample has dimension {}, support has dimension {}",
            sample.dim(),
            support.dim()
        )));
    }
    if mc.points == 0 {
        return Err(Error::InvalidParameter("at least one Monte Carlo point is required".into()));
    }
    let queries = Queries::UniformBox {
        support,
        count: mc.points,
        seed: mc.seed,
    };
    Ok(plan_for(&sample.covariates, fit, queries)?.0)
}

/// `Psi_j` for every `j` in the grid from one pass of neighbor searches.
pub fn estimate_fourier_coefficients(
    sample: &Sample,
    support: &BoxSupport,
    grid: &FourierIndexGrid,
    fit: &LocalFit,
    mc: &MonteCarlo,
) -> Result<PsiTable> {
    if grid.dim() != sample.dim() {
        return Err(Error::InvalidInput(format!(
            "grid has dimension {}, sample has dimension {}",
            grid.dim(),
            sample.dim()
        )));
    }
    let plan = berkson_plan(sample, support, fit, mc)?;
    let volume = support.volume();
    let values = grid
        .indices()
        .par_iter()
        .map(|j| psi_from_plan(&plan, sample, j, volume))
        .collect();
    Ok(PsiTable {
        grid: grid.clone(),
        values,
        k: plan.k(),
        fallback_count: plan.fallback_count(),
    })
}

/// A single `Psi_j`; identical to the corresponding entry of
/// [`estimate_fourier_coefficients`] under the same seed.
pub fn estimate_fourier_coefficient(
    sample: &Sample,
    support: &BoxSupport,
    j: &[i64],
    fit: &LocalFit,
    mc: &MonteCarlo,
) -> Result<Complex64> {
    if j.len() != sample.dim() {
        return Err(Error::InvalidInput("index dimension differs from sample".into()));
    }
    let plan = berkson_plan(sample, support, fit, mc)?;
    Ok(psi_from_plan(&plan, sample, j, support.volume()))
}

/// Coefficients `c_j` of `h_hat(x) = sum_j c_j exp(i <j, x>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEstimate {
    pub grid: FourierIndexGrid,
    pub coefficients: Vec<Complex64>,
}

/// `c_{-j} = (2 pi)^-d Psi_j / f^ft(-j)`. With `real_data`, the table is
/// made conjugate symmetric by averaging `c_j` with `conj(c_{-j})`.
pub fn deconvolve(
    psi: &PsiTable,
    error: &dyn ErrorDensity,
    tol: f64,
    real_data: bool,
) -> Result<FourierEstimate> {
    let grid = &psi.grid;
    let norm = (2.0 * PI).powi(grid.dim() as i32).recip();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (pos, j) in grid.indices().iter().enumerate() {
        let minus_j: Vec<i64> = j.iter().map(|v| -v).collect();
        let f = error.coefficient(&minus_j);
        if !(f.norm() >= tol) {
            return Err(Error::SpectralDivision {
                index: minus_j,
                magnitude: f.norm(),
                tol,
            });
        }
        coefficients[grid.mirror(pos)] = psi.values[pos] * norm / f;
    }
    if real_data {
        let raw = coefficients.clone();
        for (pos, c) in coefficients.iter_mut().enumerate() {
            *c = (raw[pos] + raw[grid.mirror(pos)].conj()) * 0.5;
        }
    }
    Ok(FourierEstimate {
        grid: grid.clone(),
        coefficients,
    })
}

impl FourierEstimate {
    /// `sum_j c_j exp(i <j, x>)`.
    pub fn evaluate_complex(&self, x: &[f64]) -> Complex64 {
        self.grid
            .indices()
            .iter()
            .zip(&self.coefficients)
            .map(|(j, c)| c * fourier_basis(j, x))
            .sum()
    }

    /// Whether `c_{-j} = conj(c_j)` within `rel_tol * (1 + max |c|)`.
    pub fn asymmetry(&self, rel_tol: f64) -> Option<Vec<i64>> {
        let cmax = self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let bound = rel_tol * (1.0 + cmax);
        (0..self.coefficients.len())
            .find(|&p| {
                (self.coefficients[self.grid.mirror(p)] - self.coefficients[p].conj()).norm() > bound
            })
            .map(|p| self.grid.indices()[p].clone())
    }

    /// `sum_j |c_j|^2 (2 pi)^d`, the squared L2 norm over `[-pi, pi]^d`.
    pub fn l2_norm_squared(&self) -> f64 {
        (2.0 * PI).powi(self.grid.dim() as i32)
            * self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Real value of `h_hat` at `x`; the coefficient table must be conjugate
/// symmetric.
pub fn evaluate_h(est: &FourierEstimate, x: &[f64]) -> Result<f64> {
    if x.len() != est.grid.dim() {
        return Err(Error::InvalidInput(format!(
            "point has dimension {}, estimate has dimension {}",
            x.len(),
            est.grid.dim()
        )));
    }
    if let Some(j) = est.asymmetry(1e-12) {
        return Err(Error::Asymmetric(j));
    }
    Ok(est.evaluate_complex(x).re)
}

/// `J_n = max(1, round(c n^{1 / (2 alpha + 2 gamma + d)}))`.
pub fn default_cutoff(n: usize, alpha: f64, gamma: f64, dim: usize, scale: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("smoothness alpha = {alpha} must be positive")));
    }
    if !(gamma > dim as f64 / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "decay exponent gamma = {gamma} must exceed d/2 = {}",
            dim as f64 / 2.0
        )));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff scale {scale} must be positive")));
    }
    let exponent = 1.0 / (2.0 * alpha + 2.0 * gamma + dim as f64);
    let j = (scale * (n.max(1) as f64).powf(exponent)).round();
    Ok((j as usize).max(1))
}

/// Polynomial degree matched to Sobolev smoothness: `ceil(alpha) - 1`.
pub fn degree_for_smoothness(alpha: f64) -> u32 {
    (alpha.ceil() - 1.0).max(0.0) as u32
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `j_1..j_d,re,im`.
pub fn write_coefficients_csv<W: Write>(
    out: W,
    grid: &FourierIndexGrid,
    values: &[Complex64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=grid.dim()).map(|k| format!("j_{k}")).collect();
    header.extend(["re".to_string(), "im".to_string()]);
    w.write_record(&header)?;
    for (j, c) in grid.indices().iter().zip(values) {
        let mut rec: Vec<String> = j.iter().map(|v| v.to_string()).collect();
        rec.push(num(c.re));
        rec.push(num(c.im));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates `h_hat` on a `points^d` grid over `[-pi, pi]^d` and writes
/// `x_1..x_d,h`.
pub fn write_h_grid_csv<W: Write>(out: W, est: &FourierEstimate, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::InvalidParameter("evaluation grid needs at least 2 points per axis".into()));
    }
    let dim = est.grid.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x_{k}")).collect();
    header.push("h".into());
    w.write_record(&header)?;
    let total = points.pow(dim as u32);
    let step = 2.0 * PI / (points - 1) as f64;
    let mut x = vec![0.0; dim];
    for mut pos in 0..total {
        for slot in x.iter_mut().rev() {
            *slot = -PI + step * (pos % points) as f64;
            pos /= points;
        }
        let h = evaluate_h(est, &x)?;
        let mut rec: Vec<String> = x.iter().map(|&v| num(v)).collect();
        rec.push(num(h));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
