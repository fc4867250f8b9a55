//! Tensor-product Gauss-Legendre quadrature over boxes with panel doubling.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::BoxSupport;
use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_order`, started from the Chebyshev
    /// approximation of each root.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integral value with the evidence that refinement has settled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureCertificate {
    pub value: f64,
    /// Value at half the panel count.
    pub previous: f64,
    /// `|value - previous|`, below the requested tolerance.
    pub change: f64,
    pub panels_per_axis: usize,
    pub order: usize,
    pub evaluations: usize,
}

/// Tensor rule with `panels` equal panels per axis.
fn tensor_rule(f: &(dyn Fn(&[f64]) -> f64 + Sync), support: &BoxSupport, rule: &GaussLegendre, panels: usize) -> f64 {
    let dim = support.dim();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .map(|a| {
            let (lo, hi) = (support.lower()[a], support.upper()[a]);
            let width = (hi - lo) / panels as f64;
            let mut xs = Vec::with_capacity(panels * rule.nodes.len());
            let mut ws = Vec::with_capacity(panels * rule.nodes.len());
            for p in 0..panels {
                let a0 = lo + width * p as f64;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    xs.push(a0 + 0.5 * width * (x + 1.0));
                    ws.push(0.5 * width * w);
                }
            }
            (xs, ws)
        })
        .collect();
    let per_axis = axes[0].0.len();
    let rest = per_axis.pow(dim as u32 - 1);
    let partials: Vec<f64> = (0..per_axis)
        .into_par_iter()
        .map(|i0| {
            let mut z = vec![0.0; dim];
            z[0] = axes[0].0[i0];
            let mut acc = 0.0;
            for mut pos in 0..rest {
                let mut w = axes[0].1[i0];
                for a in (1..dim).rev() {
                    let i = pos % per_axis;
                    pos /= per_axis;
                    z[a] = axes[a].0[i];
                    w *= axes[a].1[i];
                }
                acc += w * f(&z);
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

/// Integrates `f` over `support`, doubling the panel count until two
/// successive values differ by less than `abs_tol`.
pub fn integrate_box(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    support: &BoxSupport,
    abs_tol: f64,
    order: usize,
    max_evaluations: usize,
) -> Result<QuadratureCertificate> {
    let rule = GaussLegendre::new(order);
    let dim = support.dim() as u32;
    let mut panels = 1;
    let mut previous = tensor_rule(f, support, &rule, panels);
    // infinite until a refinement has been compared
    let mut last_change = f64::INFINITY;
    loop {
        let next = panels * 2;
        let evaluations = (next * order).pow(dim);
        if evaluations > max_evaluations {
            return Err(Error::OracleNonConvergence {
                change: last_change,
                tol: abs_tol,
                panels,
            });
        }
        let value = tensor_rule(f, support, &rule, next);
        let change = (value - previous).abs();
        if change < abs_tol {
            return Ok(QuadratureCertificate {
                value,
                previous,
                change,
                panels_per_axis: next,
                order,
                evaluations,
            });
        }
        previous = value;
        panels = next;
        last_change = change;
    }
}
