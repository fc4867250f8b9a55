//! Simulation scenarios, replication runner and summary tables.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{BoxSupport, PointSet, Sample, TreatmentDataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate_psi, LocalFit, MonteCarlo};
use crate::quadrature::{integrate_box, QuadratureCertificate};
use crate::rng::{derive_seed, stream};

/// Built-in scenario identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    F1Box,
    F1Full,
    F2Box,
    AttConst,
    Custom,
}

impl ScenarioId {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioId::F1Box => "f1_box",
            ScenarioId::F1Full => "f1_full",
            ScenarioId::F2Box => "f2_box",
            ScenarioId::AttConst => "att_const",
            ScenarioId::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "f1_box" => ScenarioId::F1Box,
            "f1_full" => ScenarioId::F1Full,
            "f2_box" => ScenarioId::F2Box,
            "att_const" => ScenarioId::AttConst,
            "custom" => ScenarioId::Custom,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown scenario '{other}' (expected f1_box, f1_full, f2_box or att_const)"
                )))
            }
        })
    }
}

/// Distribution of the covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateLaw {
    /// Independent Beta(a, b) coordinates.
    BetaProduct { a: f64, b: f64 },
    /// With probability 1/2 uniform on the unit cube, otherwise independent
    /// Beta(a, b) coordinates.
    UniformBetaMixture { a: f64, b: f64 },
    /// Uniform on a box.
    Uniform(BoxSupport),
    /// Treatment with probability 1/2; controls uniform on the unit cube,
    /// treated `0.1 + 0.8 * Beta(2, 2)` per coordinate.
    TreatmentDesign,
}

/// `exp(2 cos(7 z1) sin(7 z2)) (4 - 8 (z3 - 0.5)^2)`.
pub fn f1(z: &[f64]) -> f64 {
    (2.0 * (7.0 * z[0]).cos() * (7.0 * z[1]).sin()).exp() * (4.0 - 8.0 * (z[2] - 0.5).powi(2))
}

/// `z1 z2^2 - 1 + cos(z1 / z2)`.
pub fn f2(z: &[f64]) -> f64 {
    z[0] * z[1] * z[1] - 1.0 + (z[0] / z[1]).cos()
}

/// Control regression of the treatment design: `sin(3 z1) + z2^2`.
pub fn att_control_mean(z: &[f64]) -> f64 {
    (3.0 * z[0]).sin() + z[1] * z[1]
}

/// Regression function of a scenario.
#[derive(Clone)]
pub enum Regression {
    F1,
    F2,
    AttControl,
    Constant(f64),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Regression {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Regression::F1 => f1(z),
            Regression::F2 => f2(z),
            Regression::AttControl => att_control_mean(z),
            Regression::Constant(c) => *c,
            Regression::Custom(g) => g(z),
        }
    }
}

impl fmt::Debug for Regression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regression::F1 => write!(f, "F1"),
            Regression::F2 => write!(f, "F2"),
            Regression::AttControl => write!(f, "AttControl"),
            Regression::Constant(c) => write!(f, "Constant({c})"),
            Regression::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A data-generating process together with its integration box.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub dim: usize,
    pub support: BoxSupport,
    pub noise_sd: f64,
    pub covariates: CovariateLaw,
    pub regression: Regression,
    /// Additive effect of treatment (treatment design only).
    pub treatment_effect: f64,
    /// Settings assumed where the original design is not explicit.
    pub assumptions: Vec<String>,
}

impl Scenario {
    /// d = 3, Beta(3,3) covariates, `f1` plus 0.4 N(0,1) noise, `S* = [0.2,0.8]^3`.
    pub fn f1_box() -> Self {
        Self {
            id: ScenarioId::F1Box,
            dim: 3,
            support: BoxSupport::cube(0.2, 0.8, 3).expect("valid box"),
            noise_sd: 0.4,
            covariates: CovariateLaw::BetaProduct { a: 3.0, b: 3.0 },
            regression: Regression::F1,
            treatment_effect: 0.0,
            assumptions: Vec::new(),
        }
    }

    /// As [`f1_box`](Self::f1_box) with mixture covariates and `S* = [0,1]^3`.
    pub fn f1_full() -> Self {
        Self {
            id: ScenarioId::F1Full,
            support: BoxSupport::cube(0.0, 1.0, 3).expect("valid box"),
            covariates: CovariateLaw::UniformBetaMixture { a: 3.0, b: 3.0 },
            assumptions: vec!["noise_sd = 0.4 carried over from f1_box".into()],
            ..Self::f1_box()
        }
    }

    /// d = 2, Beta(3,3) covariates, `f2` plus 0.2 N(0,1) noise, `S* = [0.2,0.8]^2`.
    pub fn f2_box() -> Self {
        Self {
            id: ScenarioId::F2Box,
            dim: 2,
            support: BoxSupport::cube(0.2, 0.8, 2).expect("valid box"),
            noise_sd: 0.2,
            covariates: CovariateLaw::BetaProduct { a: 3.0, b: 3.0 },
            regression: Regression::F2,
            treatment_effect: 0.0,
            assumptions: Vec::new(),
        }
    }

    /// d = 2 treatment design with constant effect 1 and noise sd 0.5.
    pub fn att_const() -> Self {
        Self {
            id: ScenarioId::AttConst,
            dim: 2,
            support: BoxSupport::cube(0.1, 0.9, 2).expect("valid box"),
            noise_sd: 0.5,
            covariates: CovariateLaw::TreatmentDesign,
            regression: Regression::AttControl,
            treatment_effect: 1.0,
            assumptions: Vec::new(),
        }
    }

    pub fn by_id(id: ScenarioId) -> Result<Self> {
        match id {
            ScenarioId::F1Box => Ok(Self::f1_box()),
            ScenarioId::F1Full => Ok(Self::f1_full()),
            ScenarioId::F2Box => Ok(Self::f2_box()),
            ScenarioId::AttConst => Ok(Self::att_const()),
            ScenarioId::Custom => Err(Error::InvalidInput(
                "custom scenarios are built in code, not by name".into(),
            )),
        }
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn name(&self) -> &'static str {
        self.id.name()
    }
}

fn beta(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let x = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
    let y = Gamma::new(b, 1.0).expect("positive shape").sample(rng);
    x / (x + y)
}

/// Draws one unit: covariates into `z`, returns the treatment indicator.
fn draw_covariates(law: &CovariateLaw, rng: &mut ChaCha8Rng, z: &mut [f64]) -> bool {
    match law {
        CovariateLaw::BetaProduct { a, b } => {
            z.iter_mut().for_each(|v| *v = beta(rng, *a, *b));
            false
        }
        CovariateLaw::UniformBetaMixture { a, b } => {
            if rng.random::<f64>() < 0.5 {
                z.iter_mut().for_each(|v| *v = rng.random());
            } else {
                z.iter_mut().for_each(|v| *v = beta(rng, *a, *b));
            }
            false
        }
        CovariateLaw::Uniform(support) => {
            let u: Vec<f64> = (0..z.len()).map(|_| rng.random()).collect();
            support.from_unit(&u, z);
            false
        }
        CovariateLaw::TreatmentDesign => {
            let treated = rng.random::<f64>() < 0.5;
            if treated {
                z.iter_mut().for_each(|v| *v = 0.1 + 0.8 * beta(rng, 2.0, 2.0));
            } else {
                z.iter_mut().for_each(|v| *v = rng.random());
            }
            treated
        }
    }
}

fn generate_units(scenario: &Scenario, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let dim = scenario.dim;
    let rows: Vec<(Vec<f64>, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut z = vec![0.0; dim];
            let treated = draw_covariates(&scenario.covariates, &mut rng, &mut z);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let mut y = scenario.regression.eval(&z) + scenario.noise_sd * eps;
            if treated {
                y += scenario.treatment_effect;
            }
            (z, y, treated)
        })
        .collect();
    let mut coords = Vec::with_capacity(n * dim);
    let mut ys = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    for (z, y, d) in rows {
        coords.extend(z);
        ys.push(y);
        ds.push(d);
    }
    (coords, ys, ds)
}

/// `n` observations `(Z_i, Y_i)`; row `i` is drawn from stream `(seed, i)`.
pub fn generate_scenario(scenario: &Scenario, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let (coords, ys, _) = generate_units(scenario, n, seed);
    Sample::new(PointSet::new(coords, scenario.dim)?, ys)
}

/// Same draws as [`generate_scenario`], keeping the treatment indicators.
pub fn generate_treatment_data(scenario: &Scenario, n: usize, seed: u64) -> Result<TreatmentDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let (coords, ys, ds) = generate_units(scenario, n, seed);
    TreatmentDataset::new(ys, PointSet::new(coords, scenario.dim)?, ds)
}

/// Quadrature order and evaluation budget used by [`true_value_oracle`].
pub const ORACLE_ORDER: usize = 10;
pub const ORACLE_MAX_EVALUATIONS: usize = 200_000_000;

/// Integral of the scenario's regression function over its support box.
pub fn true_value_oracle(scenario: &Scenario, abs_tol: f64) -> Result<QuadratureCertificate> {
    let g = |z: &[f64]| scenario.regression.eval(z);
    integrate_box(&g, &scenario.support, abs_tol, ORACLE_ORDER, ORACLE_MAX_EVALUATIONS)
}

/// One simulation cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationPlan {
    pub n: usize,
    pub replicates: usize,
    pub fit: LocalFit,
    pub mc_points: usize,
    pub master_seed: u64,
}

/// `sqrt(n)`-scaled error summary of one cell.
///
/// `sqrtn_stdv` uses the `N - 1` divisor and `sqrtn_rmse` the `N` divisor,
/// so `rmse^2 = bias^2 + stdv^2 (N - 1) / N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub replicates: usize,
    #[serde(rename = "L")]
    pub degree: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub true_value: f64,
    pub sqrtn_bias: f64,
    pub sqrtn_stdv: f64,
    pub sqrtn_rmse: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub seed: u64,
}

/// Summary plus the per-replicate errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub row: SummaryRow,
    /// `Psi_hat_r - Psi` in replicate order.
    pub errors: Vec<f64>,
    /// Errors centered and divided by their sample standard deviation.
    pub standardized_errors: Vec<f64>,
    pub fallback_count: usize,
}

/// Seeds of replicate `r`: `(sample, monte carlo)`.
pub fn replicate_seeds(master_seed: u64, r: usize) -> (u64, u64) {
    (
        derive_seed(master_seed, 2 * r as u64),
        derive_seed(master_seed, 2 * r as u64 + 1),
    )
}

struct Moments {
    bias: f64,
    stdv: f64,
    rmse: f64,
    skewness: f64,
    excess_kurtosis: f64,
    /// Spread at rounding level relative to the true value.
    degenerate: bool,
}

/// `sqrt(n)`-scaled moments of the errors. Shape statistics are 0 for a
/// degenerate spread.
fn summarize(errors: &[f64], n: usize, scale: f64) -> Moments {
    let big_n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / big_n;
    let central = |p: i32| errors.iter().map(|e| (e - mean).powi(p)).sum::<f64>() / big_n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let stdv = if errors.len() > 1 {
        (m2 * big_n / (big_n - 1.0)).sqrt()
    } else {
        0.0
    };
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / big_n).sqrt();
    let degenerate = m2.sqrt() <= 1e-12 * (1.0 + scale.abs());
    let (skewness, excess_kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    let s = (n as f64).sqrt();
    Moments {
        bias: s * mean,
        stdv: s * stdv,
        rmse: s * rmse,
        skewness,
        excess_kurtosis,
        degenerate,
    }
}

/// Runs one cell against a known true value.
pub fn run_replications_with_truth(
    scenario: &Scenario,
    plan: &ReplicationPlan,
    true_value: f64,
) -> Result<ReplicationResult> {
    if plan.replicates == 0 || plan.n == 0 || plan.mc_points == 0 {
        return Err(Error::InvalidParameter(
            "n, N and m must all be positive".into(),
        ));
    }
    let outcomes: Vec<(f64, usize)> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            let (sample_seed, mc_seed) = replicate_seeds(plan.master_seed, r);
            let wrap = |e: Error| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            };
            let sample = generate_scenario(scenario, plan.n, sample_seed).map_err(wrap)?;
            let report = estimate_psi(
                &sample,
                &scenario.support,
                &plan.fit,
                &MonteCarlo::new(plan.mc_points, mc_seed),
            )
            .map_err(wrap)?;
            Ok((report.estimate - true_value, report.fallback_count))
        })
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let fallback_count = outcomes.iter().map(|o| o.1).sum();
    let moments = summarize(&errors, plan.n, true_value);
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let sd = moments.stdv / (plan.n as f64).sqrt();
    let standardized_errors = errors
        .iter()
        .map(|e| if moments.degenerate { 0.0 } else { (e - mean) / sd })
        .collect();
    let k = plan
        .fit
        .neighbors
        .unwrap_or_else(|| crate::local_poly::recommended_k(scenario.dim, plan.fit.degree));
    Ok(ReplicationResult {
        row: SummaryRow {
            scenario: scenario.name().to_string(),
            n: plan.n,
            replicates: plan.replicates,
            degree: plan.fit.degree,
            k,
            m: plan.mc_points,
            true_value,
            sqrtn_bias: moments.bias,
            sqrtn_stdv: moments.stdv,
            sqrtn_rmse: moments.rmse,
            skewness: moments.skewness,
            excess_kurtosis: moments.excess_kurtosis,
            seed: plan.master_seed,
        },
        errors,
        standardized_errors,
        fallback_count,
    })
}

/// Default oracle tolerance for [`run_replications`].
pub const ORACLE_TOL: f64 = 1e-9;

/// Runs one cell, computing the true value by quadrature.
pub fn run_replications(scenario: &Scenario, plan: &ReplicationPlan) -> Result<ReplicationResult> {
    let truth = true_value_oracle(scenario, ORACLE_TOL)?;
    run_replications_with_truth(scenario, plan, truth.value)
}

/// Output layout of [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// All summary columns, one line per row.
    Csv,
    /// Markdown, one line per `(n, L, K)`.
    Markdown,
    /// Markdown blocks per `(n, L)` with `K` across the columns and
    /// BIAS / STDV / RMSE down the rows.
    Wide,
}

/// Column names of the CSV summary.
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "scenario",
    "n",
    "N",
    "L",
    "K",
    "m",
    "true_value",
    "sqrtn_bias",
    "sqrtn_stdv",
    "sqrtn_rmse",
    "skewness",
    "excess_kurtosis",
    "seed",
];

fn full(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_table(rows: &[SummaryRow], format: TableFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no summary rows to tabulate".into()));
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(SUMMARY_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.scenario.clone(),
                    r.n.to_string(),
                    r.replicates.to_string(),
                    r.degree.to_string(),
                    r.k.to_string(),
                    r.m.to_string(),
                    full(r.true_value),
                    full(r.sqrtn_bias),
                    full(r.sqrtn_stdv),
                    full(r.sqrtn_rmse),
                    full(r.skewness),
                    full(r.excess_kurtosis),
                    r.seed.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Markdown => {
            let mut out = String::from(
                "| scenario | n | L | K | sqrt(n)·BIAS | sqrt(n)·STDV | sqrt(n)·RMSE |\n|---|---|---|---|---|---|---|\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} |\n",
                    r.scenario, r.n, r.degree, r.k, r.sqrtn_bias, r.sqrtn_stdv, r.sqrtn_rmse
                ));
            }
            Ok(out)
        }
        TableFormat::Wide => {
            let mut groups: Vec<(usize, u32, Vec<&SummaryRow>)> = Vec::new();
            for r in rows {
                match groups.iter_mut().find(|g| g.0 == r.n && g.1 == r.degree) {
                    Some(g) => g.2.push(r),
                    None => groups.push((r.n, r.degree, vec![r])),
                }
            }
            let mut out = String::new();
            for (i, (n, degree, members)) in groups.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("| n={n}, L={degree} |"));
                for r in members {
                    out.push_str(&format!(" K={} |", r.k));
                }
                out.push_str("\n|---|");
                out.push_str(&"---|".repeat(members.len()));
                out.push('\n');
                let lines: [(&str, fn(&SummaryRow) -> f64); 3] = [
                    ("sqrt(n)·BIAS", |r| r.sqrtn_bias),
                    ("sqrt(n)·STDV", |r| r.sqrtn_stdv),
                    ("sqrt(n)·RMSE", |r| r.sqrtn_rmse),
                ];
                for (label, get) in lines {
                    out.push_str(&format!("| {label} |"));
                    for r in members {
                        out.push_str(&format!(" {:.4} |", get(r)));
                    }
                    out.push('\n');
                }
            }
            Ok(out)
        }
    }
}
