//! Local least-squares polynomial fits on K nearest neighbors.
//!
//! For a query point `z` with neighbors `Z_1..Z_K`, the fitted value is
//! `sum_j y_j * w_j` with `w_j = e0^T M(z)^{-1} xi(z, Z_j)`, where `xi` is the
//! vector of monomials centered at `z` and `M(z) = sum_j xi xi^T`. The
//! weights do not depend on the responses, so one set of weights serves any
//! number of response vectors.

use std::ops::{Add, Div, Mul};

use num_complex::Complex64;
use num_traits::Zero;

use crate::data::PointSet;
use crate::error::{Error, Result};
use crate::qr::PivotedQr;

/// Relative pivot threshold below which `M(z)` is treated as singular.
pub const PIVOT_REL_TOL: f64 = 1e-10;

/// Monomials of total degree `<= degree` in `dim` variables, graded
/// lexicographic with the constant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexBasis {
    dim: usize,
    degree: u32,
    kappas: Vec<Vec<u32>>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn push_exact(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        push_exact(dim, total - first, prefix, out);
        prefix.pop();
    }
}

impl MultiIndexBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut kappas = Vec::new();
        for total in 0..=degree {
            push_exact(dim, total, &mut Vec::with_capacity(dim), &mut kappas);
        }
        Ok(Self {
            dim,
            degree,
            kappas,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn kappas(&self) -> &[Vec<u32>] {
        &self.kappas
    }

    /// Number of free parameters, `C(d + L, L)`.
    pub fn k_star(&self) -> usize {
        self.kappas.len()
    }

    /// Degree-weighted count `sum |kappa|`, equal to `d * C(d + L, L - 1)`.
    pub fn weighted_count(&self) -> usize {
        self.kappas
            .iter()
            .map(|k| k.iter().sum::<u32>() as usize)
            .sum()
    }

    /// Evaluates all monomials at `u` into `out`.
    fn monomials(&self, u: &[f64], out: &mut [f64]) {
        for (o, kappa) in out.iter_mut().zip(&self.kappas) {
            let mut v = 1.0;
            for (x, &p) in u.iter().zip(kappa) {
                for _ in 0..p {
                    v *= x;
                }
            }
            *o = v;
        }
    }
}

/// The basis for `(d, L)`.
pub fn multi_index_set(dim: usize, degree: u32) -> Result<MultiIndexBasis> {
    MultiIndexBasis::new(dim, degree)
}

/// Smallest `K` covered by the parametric-rate guarantee:
/// 1 for `L = 0`, otherwise `2 + (2D + 1) K*`.
pub fn recommended_k(dim: usize, degree: u32) -> usize {
    if degree == 0 {
        return 1;
    }
    let k_star = binomial(dim + degree as usize, degree as usize);
    let d_count = dim * binomial(dim + degree as usize, degree as usize - 1);
    2 + (2 * d_count + 1) * k_star
}

/// Weights of the local fit at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights {
    pub center: Vec<f64>,
    pub neighbor_indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// Largest neighbor distance, used to rescale coordinates (1 if all
    /// neighbors coincide with the center).
    pub scale: f64,
    /// The moment matrix was numerically singular and the plain average
    /// was used instead.
    pub fallback: bool,
    degree: u32,
}

impl LocalWeights {
    /// Uniform weights: degree 0 or fallback. Evaluated as a plain mean.
    pub fn is_uniform(&self) -> bool {
        self.degree == 0 || self.fallback
    }
}

/// Scratch space for repeated weight computations of one basis.
#[derive(Debug, Clone)]
pub struct WeightSolver<'a> {
    basis: &'a MultiIndexBasis,
    xi: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> WeightSolver<'a> {
    pub fn new(basis: &'a MultiIndexBasis) -> Self {
        Self {
            basis,
            xi: Vec::new(),
            u: vec![0.0; basis.dim()],
        }
    }

    /// Checks that `k` neighbors suffice for the basis.
    pub fn check_k(&self, k: usize) -> Result<()> {
        let k_star = self.basis.k_star();
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if self.basis.degree() > 0 && k < k_star {
            return Err(Error::InvalidParameter(format!(
                "insufficient neighbors for degree {}: K = {k} < K* = {k_star}",
                self.basis.degree()
            )));
        }
        Ok(())
    }

    /// Writes the weights for neighbors `rows` of `z` into `weights` and
    /// returns `(scale, fallback)`. `rows` must yield exactly
    /// `weights.len()` points.
    pub fn solve<'p>(
        &mut self,
        z: &[f64],
        rows: impl Iterator<Item = &'p [f64]> + Clone,
        weights: &mut [f64],
    ) -> (f64, bool) {
        let k = weights.len();
        let mut scale2 = 0.0f64;
        for p in rows.clone() {
            let d2: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            scale2 = scale2.max(d2);
        }
        let scale = if scale2 > 0.0 { scale2.sqrt() } else { 1.0 };
        if self.basis.degree() == 0 {
            weights.fill(1.0 / k as f64);
            return (scale, false);
        }
        let ks = self.basis.k_star();
        self.xi.resize(k * ks, 0.0);
        for (j, p) in rows.enumerate() {
            for (u, (a, b)) in self.u.iter_mut().zip(p.iter().zip(z)) {
                *u = (a - b) / scale;
            }
            self.basis
                .monomials(&self.u, &mut self.xi[j * ks..(j + 1) * ks]);
        }
        match PivotedQr::factor(&self.xi, k, ks, PIVOT_REL_TOL) {
            Ok(f) => f.coefficient_weights(0, weights),
            Err(_) => {
                weights.fill(1.0 / k as f64);
                return (scale, true);
            }
        }
        (scale, false)
    }
}

/// Weights of the degree-`L` least-squares fit at `z` through `neighbors`.
pub fn local_fit_weights(
    basis: &MultiIndexBasis,
    z: &[f64],
    neighbors: &PointSet,
) -> Result<LocalWeights> {
    if z.len() != basis.dim() || neighbors.dim() != basis.dim() {
        return Err(Error::InvalidInput(format!(
            "basis dimension {}, center dimension {}, neighbor dimension {}",
            basis.dim(),
            z.len(),
            neighbors.dim()
        )));
    }
    let mut solver = WeightSolver::new(basis);
    let k = neighbors.len();
    solver.check_k(k)?;
    let mut weights = vec![0.0; k];
    let (scale, fallback) = solver.solve(z, neighbors.iter(), &mut weights);
    Ok(LocalWeights {
        center: z.to_vec(),
        neighbor_indices: (0..k).collect(),
        weights,
        scale,
        fallback,
        degree: basis.degree(),
    })
}

/// A response value the local fit can average: real or complex.
pub trait Response:
    Copy
    + Zero
    + Add<Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn is_finite_value(&self) -> bool;
}

impl Response for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Response for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// `sum_j y_j w_j` for responses aligned with the neighbor order. Uniform
/// weights are evaluated as `(sum_j y_j) / K`.
#[inline]
pub fn weighted_response<T: Response>(uniform: bool, weights: &[f64], responses: impl Iterator<Item = T>) -> T {
    if uniform {
        let mut s = T::zero();
        for y in responses {
            s = s + y;
        }
        s / weights.len() as f64
    } else {
        let mut s = T::zero();
        for (y, &w) in responses.zip(weights) {
            s = s + y * w;
        }
        s
    }
}

/// Value of the local fit for the given neighbor responses.
pub fn evaluate_local_fit<T: Response>(weights: &LocalWeights, responses: &[T]) -> Result<T> {
    if responses.len() != weights.weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} responses for {} neighbors",
            responses.len(),
            weights.weights.len()
        )));
    }
    if let Some(i) = responses.iter().position(|y| !y.is_finite_value()) {
        return Err(Error::InvalidInput(format!("non-finite response at neighbor {i}")));
    }
    Ok(weighted_response(
        weights.is_uniform(),
        &weights.weights,
        responses.iter().copied(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_enumeration() {
        let b = multi_index_set(2, 1).unwrap();
        assert_eq!(b.kappas(), &[vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!((b.k_star(), b.weighted_count()), (3, 2));
        let b = multi_index_set(1, 2).unwrap();
        assert_eq!(b.kappas(), &[vec![0], vec![1], vec![2]]);
        // 0 + 1 + 2 = 1 * C(3, 1)
        assert_eq!((b.k_star(), b.weighted_count()), (3, 3));
        let b = multi_index_set(3, 1).unwrap();
        assert_eq!((b.k_star(), b.weighted_count()), (4, 3));
        let b = multi_index_set(2, 2).unwrap();
        assert_eq!(
            b.kappas(),
            &[
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert!(multi_index_set(0, 1).is_err());
    }

    #[test]
    fn closed_forms_match_enumeration() {
        for d in 1..=5 {
            for l in 0..=4u32 {
                let b = multi_index_set(d, l).unwrap();
                let ls = l as usize;
                assert_eq!(b.k_star(), binomial(d + ls, ls));
                let closed = if l == 0 { 0 } else { d * binomial(d + ls, ls - 1) };
                assert_eq!(b.weighted_count(), closed);
                assert_eq!(b.kappas()[0], vec![0; d]);
                let mut sorted = b.kappas().to_vec();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), b.k_star());
            }
        }
    }

    #[test]
    fn recommended_neighbor_counts() {
        assert_eq!(recommended_k(2, 1), 17);
        assert_eq!(recommended_k(3, 1), 30);
        assert_eq!(recommended_k(5, 0), 1);
    }

    #[test]
    fn degree_zero_is_the_plain_average() {
        let b = multi_index_set(2, 0).unwrap();
        let nb = PointSet::from_rows(&[[0.0, 1.0], [2.0, 3.0], [5.0, 5.0]]).unwrap();
        let w = local_fit_weights(&b, &[0.0, 0.0], &nb).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0 / 3.0));
        assert!(!w.fallback);
    }

    #[test]
    fn symmetric_pair_on_a_line() {
        let b = multi_index_set(1, 1).unwrap();
        let nb = PointSet::new(vec![-1.0, 1.0], 1).unwrap();
        let w = local_fit_weights(&b, &[0.0], &nb).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-15 && (w.weights[1] - 0.5).abs() < 1e-15);
        let (a, c) = (3.0, 1.25);
        assert!((evaluate_local_fit(&w, &[a, 7.0]).unwrap() - (a + 7.0) / 2.0).abs() < 1e-14);
        assert!(evaluate_local_fit(&w, &[-c, c]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn too_few_neighbors_for_the_degree() {
        let b = multi_index_set(2, 1).unwrap();
        let nb = PointSet::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let err = local_fit_weights(&b, &[0.0, 0.0], &nb).unwrap_err();
        assert!(err.to_string().contains("insufficient neighbors"));
    }

    #[test]
    fn collinear_neighbors_fall_back_to_the_average() {
        let b = multi_index_set(2, 1).unwrap();
        let nb = PointSet::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]]).unwrap();
        let w = local_fit_weights(&b, &[0.0, 0.0], &nb).unwrap();
        assert!(w.fallback);
        assert!(w.weights.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn coincident_neighbors_use_unit_scale() {
        let b = multi_index_set(2, 1).unwrap();
        let nb = PointSet::from_rows(&[[1.0, 1.0]; 5]).unwrap();
        let w = local_fit_weights(&b, &[1.0, 1.0], &nb).unwrap();
        assert_eq!(w.scale, 1.0);
        assert!(w.fallback);
    }

    #[test]
    fn constant_and_complex_responses() {
        let b = multi_index_set(2, 1).unwrap();
        let nb = PointSet::from_rows(&[[0.1, 0.0], [0.0, 0.3], [-0.2, 0.1], [0.3, -0.4], [0.05, 0.2]]).unwrap();
        let w = local_fit_weights(&b, &[0.02, 0.01], &nb).unwrap();
        let c = evaluate_local_fit(&w, &[2.5; 5]).unwrap();
        assert!((c - 2.5).abs() < 1e-13);
        let ys: Vec<Complex64> = (0..5).map(|j| Complex64::new(j as f64, -(j as f64))).collect();
        let z = evaluate_local_fit(&w, &ys).unwrap();
        assert!((z.re + z.im).abs() < 1e-13);
        assert!(evaluate_local_fit(&w, &[1.0; 4]).is_err());
        assert!(evaluate_local_fit(&w, &[1.0, 1.0, f64::NAN, 1.0, 1.0]).is_err());
    }
}
