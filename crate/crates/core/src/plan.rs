//! Neighbor sets and local-fit weights for a batch of query points.
//!
//! Building a plan is the expensive part of every estimator: one exact kNN
//! query and one small factorization per query point. Evaluating a plan
//! against a response vector is a dot product per point, so several
//! response vectors (e.g. Fourier modes) can share one plan.

use rayon::prelude::*;

use crate::data::{BoxSupport, PointSet};
use crate::error::{Error, Result};
use crate::knn::{Candidate, NeighborIndex};
use crate::local_poly::{weighted_response, MultiIndexBasis, Response, WeightSolver};
use crate::rng;

/// Where the query points of a plan come from.
#[derive(Debug, Clone, Copy)]
pub enum Queries<'a> {
    /// Explicit points, e.g. an auxiliary sample.
    Points(&'a PointSet),
    /// `count` i.i.d. uniform points on a box, point `i` drawn from stream
    /// `(seed, i)`.
    UniformBox {
        support: &'a BoxSupport,
        count: usize,
        seed: u64,
    },
}

impl Queries<'_> {
    pub fn len(&self) -> usize {
        match self {
            Queries::Points(p) => p.len(),
            Queries::UniformBox { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Queries::Points(p) => p.dim(),
            Queries::UniformBox { support, .. } => support.dim(),
        }
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        match self {
            Queries::Points(p) => out.copy_from_slice(p.point(i)),
            Queries::UniformBox { support, seed, .. } => {
                rng::uniform_in_box(support, *seed, i as u64, out)
            }
        }
    }
}

/// Neighbor indices and weights for every query point, in query order.
#[derive(Debug, Clone)]
pub struct FitPlan {
    k: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
    uniform: Vec<bool>,
    fallback_count: usize,
}

impl FitPlan {
    /// Runs the kNN queries and weight solves. Parallel over query points;
    /// the result does not depend on the number of workers.
    pub fn build(
        sample: &PointSet,
        index: &NeighborIndex,
        basis: &MultiIndexBasis,
        k: usize,
        queries: Queries<'_>,
    ) -> Result<Self> {
        let dim = sample.dim();
        if basis.dim() != dim || queries.dim() != dim || index.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: sample {dim}, basis {}, queries {}",
                basis.dim(),
                queries.dim()
            )));
        }
        if k > sample.len() {
            return Err(Error::InvalidParameter(format!(
                "K = {k} exceeds the sample size {}",
                sample.len()
            )));
        }
        WeightSolver::new(basis).check_k(k)?;
        let m = queries.len();
        let per_point: Vec<(Vec<usize>, Vec<f64>, bool, bool)> = (0..m)
            .into_par_iter()
            .map_init(
                || (WeightSolver::new(basis), Vec::<Candidate>::with_capacity(k), vec![0.0; dim]),
                |(solver, found, z), i| {
                    queries.fill(i, z);
                    index
                        .k_nearest_into(z, k, found)
                        .expect("query validated against index");
                    let idx: Vec<usize> = found.iter().map(|c| c.index).collect();
                    let mut w = vec![0.0; k];
                    let (_, fallback) =
                        solver.solve(z, idx.iter().map(|&j| sample.point(j)), &mut w);
                    let uniform = fallback || basis.degree() == 0;
                    (idx, w, uniform, fallback)
                },
            )
            .collect();
        let mut plan = FitPlan {
            k,
            indices: Vec::with_capacity(m * k),
            weights: Vec::with_capacity(m * k),
            uniform: Vec::with_capacity(m),
            fallback_count: 0,
        };
        for (idx, w, uniform, fallback) in per_point {
            plan.indices.extend(idx);
            plan.weights.extend(w);
            plan.uniform.push(uniform);
            plan.fallback_count += fallback as usize;
        }
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.uniform.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uniform.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fallback_count(&self) -> usize {
        self.fallback_count
    }

    /// Neighbor indices of query point `i`, closest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i * self.k..(i + 1) * self.k]
    }

    /// Fitted value at query point `i` for sample responses `responses`.
    #[inline]
    pub fn fitted<T: Response>(&self, i: usize, responses: &[T]) -> T {
        weighted_response(
            self.uniform[i],
            self.weights(i),
            self.neighbors(i).iter().map(|&j| responses[j]),
        )
    }

    /// Fitted values at every query point, in query order.
    pub fn fitted_all<T: Response>(&self, responses: &[T]) -> Vec<T> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.fitted(i, responses))
            .collect()
    }
}

/// Mean and sample standard deviation (`N - 1` divisor, 0 for one value),
/// accumulated in index order.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (m - 1.0)).sqrt())
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}
