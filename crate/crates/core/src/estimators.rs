//! Estimators of integrals of regression functions and of matching
//! functionals, plus the treatment-effect and covariate-shift estimators
//! built on them.

use serde::Serialize;

use crate::data::{BoxSupport, PointSet, Sample, TreatmentDataset};
use crate::error::{Error, Result};
use crate::knn::NeighborIndex;
use crate::local_poly::{multi_index_set, recommended_k};
use crate::plan::{mean_and_sd, FitPlan, Queries};

/// Default number of uniform Monte Carlo points on the support box.
pub const DEFAULT_MC_POINTS: usize = 10_000;

/// Degree and neighbor count of the local polynomial fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalFit {
    pub degree: u32,
    /// `None` selects the theoretical minimum [`recommended_k`].
    pub neighbors: Option<usize>,
}

impl LocalFit {
    pub fn new(degree: u32, neighbors: usize) -> Self {
        Self {
            degree,
            neighbors: Some(neighbors),
        }
    }

    pub fn with_default_k(degree: u32) -> Self {
        Self {
            degree,
            neighbors: None,
        }
    }
}

/// Monte Carlo settings for integrals over a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub points: usize,
    pub seed: u64,
}

impl MonteCarlo {
    pub fn new(points: usize, seed: u64) -> Self {
        Self { points, seed }
    }
}

/// Point estimate with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub mc_std_error: f64,
    /// Number of Monte Carlo / target points.
    pub m: usize,
    /// Size of the regression sample.
    pub n: usize,
    #[serde(rename = "L")]
    pub degree: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub k_defaulted: bool,
    #[serde(rename = "recommended_K")]
    pub recommended_k: usize,
    #[serde(rename = "below_theoretical_K")]
    pub below_theoretical_k: bool,
    pub fallback_count: usize,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

/// `K` actually used, plus bookkeeping about how it relates to the
/// theoretical minimum.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedK {
    pub k: usize,
    pub defaulted: bool,
    pub recommended: usize,
    pub below: bool,
    pub notes: Vec<String>,
}

pub(crate) fn resolve_k(dim: usize, fit: &LocalFit) -> ResolvedK {
    let recommended = recommended_k(dim, fit.degree);
    match fit.neighbors {
        Some(k) => {
            let below = k < recommended;
            let notes = if below {
                vec![format!(
                    "K = {k} is below the theoretical minimum {recommended} for d = {dim}, L = {}",
                    fit.degree
                )]
            } else {
                Vec::new()
            };
            ResolvedK {
                k,
                defaulted: false,
                recommended,
                below,
                notes,
            }
        }
        None => ResolvedK {
            k: recommended,
            defaulted: true,
            recommended,
            below: false,
            notes: vec![format!(
                "K not given; using the theoretical minimum K = {recommended} for d = {dim}, L = {}",
                fit.degree
            )],
        },
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "K = {k} exceeds the sample size {n}"
        )));
    }
    Ok(())
}

/// Builds the fit plan for `sample` evaluated at `queries`.
pub(crate) fn plan_for(
    sample: &PointSet,
    fit: &LocalFit,
    queries: Queries<'_>,
) -> Result<(FitPlan, ResolvedK)> {
    let resolved = resolve_k(sample.dim(), fit);
    check_k(resolved.k, sample.len())?;
    if queries.dim() != sample.dim() {
        return Err(Error::InvalidInput(format!(
            "sample has dimension {}, query points have dimension {}",
            sample.dim(),
            queries.dim()
        )));
    }
    let basis = multi_index_set(sample.dim(), fit.degree)?;
    let index = NeighborIndex::new(sample);
    let plan = FitPlan::build(sample, &index, &basis, resolved.k, queries)?;
    Ok((plan, resolved))
}

/// Integral of the regression function over a box.
///
/// Draws `mc.points` uniform points on `support`, fits a degree-`L`
/// polynomial to the K nearest sample points of each and averages the
/// fitted values, scaled by the box volume. Boundary effects are not
/// checked: the box should sit well inside the covariate support.
pub fn estimate_psi(
    sample: &Sample,
    support: &BoxSupport,
    fit: &LocalFit,
    mc: &MonteCarlo,
) -> Result<EstimateReport> {
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
    let (plan, resolved) = plan_for(&sample.covariates, fit, queries)?;
    let fitted = plan.fitted_all(&sample.responses);
    let (mean, sd) = mean_and_sd(&fitted);
    let volume = support.volume();
    Ok(EstimateReport {
        estimate: volume * mean,
        mc_std_error: volume * sd / (mc.points as f64).sqrt(),
        m: mc.points,
        n: sample.len(),
        degree: fit.degree,
        k: resolved.k,
        k_defaulted: resolved.defaulted,
        recommended_k: resolved.recommended,
        below_theoretical_k: resolved.below,
        fallback_count: plan.fallback_count(),
        seed: Some(mc.seed),
        notes: resolved.notes,
    })
}

/// Matching functional: the regression function fitted on `reg_sample`,
/// averaged over the auxiliary points `targets`.
pub fn estimate_phi(reg_sample: &Sample, targets: &PointSet, fit: &LocalFit) -> Result<EstimateReport> {
    let (plan, resolved) = plan_for(&reg_sample.covariates, fit, Queries::Points(targets))?;
    let fitted = plan.fitted_all(&reg_sample.responses);
    let (mean, sd) = mean_and_sd(&fitted);
    Ok(EstimateReport {
        estimate: mean,
        mc_std_error: sd / (targets.len() as f64).sqrt(),
        m: targets.len(),
        n: reg_sample.len(),
        degree: fit.degree,
        k: resolved.k,
        k_defaulted: resolved.defaulted,
        recommended_k: resolved.recommended,
        below_theoretical_k: resolved.below,
        fallback_count: plan.fallback_count(),
        seed: None,
        notes: resolved.notes,
    })
}

/// Average treatment effect on the treated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttReport {
    pub tau_hat: f64,
    /// Mean outcome of the treated.
    pub tau1_hat: f64,
    /// Control regression averaged over the treated covariates.
    pub tau0_hat: f64,
    pub n1: usize,
    pub n0: usize,
    pub phi_report: EstimateReport,
}

/// ATT without a propensity model: the treated mean minus the control
/// regression (local polynomial, K-NN) averaged over treated covariates.
pub fn estimate_att(data: &TreatmentDataset, fit: &LocalFit) -> Result<AttReport> {
    let treated = data
        .arm(true)
        .ok_or_else(|| Error::InsufficientData("no treated units".into()))?;
    let control = data
        .arm(false)
        .ok_or_else(|| Error::InsufficientData("no control units".into()))?;
    let k = resolve_k(data.covariates.dim(), fit).k;
    if control.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} control units, fewer than K = {k}",
            control.len()
        )));
    }
    let tau1_hat = treated.responses.iter().sum::<f64>() / treated.len() as f64;
    let phi_report = estimate_phi(&control, &treated.covariates, fit)?;
    let tau0_hat = phi_report.estimate;
    Ok(AttReport {
        tau_hat: tau1_hat - tau0_hat,
        tau1_hat,
        tau0_hat,
        n1: treated.len(),
        n0: control.len(),
        phi_report,
    })
}

/// Average treatment effect restricted to a covariate box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteRegionReport {
    /// Estimate of `E[Y(1) 1(Z in S*)]`.
    pub ey1_region: f64,
    /// Estimate of `E[Y(0) 1(Z in S*)]`.
    pub ey0_region: f64,
    pub tau_region: f64,
    pub pi_hat: f64,
    pub n1: usize,
    pub n0: usize,
    /// Control units inside the box (queries for the treated fit).
    pub control_in_region: usize,
    /// Treated units inside the box (queries for the control fit).
    pub treated_in_region: usize,
    pub treated_fit: Option<EstimateReport>,
    pub control_fit: Option<EstimateReport>,
    pub notes: Vec<String>,
}

/// One potential-outcome mean over the region: observed outcomes of the arm
/// inside the box plus the arm's fitted regression at the other arm's
/// covariates inside the box, both divided by `n`.
fn region_mean(
    own: &Sample,
    other: &Sample,
    support: &BoxSupport,
    n: usize,
    fit: &LocalFit,
    label: &str,
    notes: &mut Vec<String>,
) -> Result<(f64, usize, Option<EstimateReport>)> {
    let observed: f64 = own
        .covariates
        .iter()
        .zip(&own.responses)
        .filter(|(z, _)| support.contains(z))
        .map(|(_, y)| *y)
        .sum();
    let queries = other.covariates.select(|i| support.contains(other.covariates.point(i)));
    let (imputed, count, report) = match queries {
        None => {
            notes.push(format!(
                "no {label} query covariates inside the region; imputed term is 0"
            ));
            (0.0, 0, None)
        }
        Some(q) => {
            let r = estimate_phi(own, &q, fit)?;
            // phi averages over the in-region queries; the functional
            // averages over all units of the other arm
            (r.estimate * q.len() as f64, q.len(), Some(r))
        }
    };
    Ok(((observed + imputed) / n as f64, count, report))
}

/// `E[Y(1) 1(Z in S*)] - E[Y(0) 1(Z in S*)]`, with `pi_hat = n1 / n`.
pub fn estimate_ate_region(
    data: &TreatmentDataset,
    support: &BoxSupport,
    fit: &LocalFit,
) -> Result<AteRegionReport> {
    if support.dim() != data.covariates.dim() {
        return Err(Error::InvalidInput(format!(
            "data has dimension {}, support has dimension {}",
            data.covariates.dim(),
            support.dim()
        )));
    }
    let k = resolve_k(data.covariates.dim(), fit).k;
    let treated = data
        .arm(true)
        .ok_or_else(|| Error::InsufficientData("no treated units".into()))?;
    let control = data
        .arm(false)
        .ok_or_else(|| Error::InsufficientData("no control units".into()))?;
    for (arm, label) in [(&treated, "treated"), (&control, "control")] {
        if arm.len() < k {
            return Err(Error::InsufficientData(format!(
                "{} {label} units, fewer than K = {k}",
                arm.len()
            )));
        }
    }
    let n = data.len();
    let mut notes = Vec::new();
    let (ey1, control_in, treated_fit) =
        region_mean(&treated, &control, support, n, fit, "control", &mut notes)?;
    let (ey0, treated_in, control_fit) =
        region_mean(&control, &treated, support, n, fit, "treated", &mut notes)?;
    Ok(AteRegionReport {
        ey1_region: ey1,
        ey0_region: ey0,
        tau_region: ey1 - ey0,
        pi_hat: treated.len() as f64 / n as f64,
        n1: treated.len(),
        n0: control.len(),
        control_in_region: control_in,
        treated_in_region: treated_in,
        treated_fit,
        control_fit,
        notes,
    })
}

/// Target-domain risk under covariate shift: source losses regressed on
/// source covariates, averaged over unlabeled target covariates.
pub fn estimate_weighted_loss(
    source_losses: &Sample,
    target_covariates: &PointSet,
    fit: &LocalFit,
) -> Result<EstimateReport> {
    estimate_phi(source_losses, target_covariates, fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn uniform_sample(n: usize, dim: usize, seed: u64, g: impl Fn(&[f64]) -> f64) -> Sample {
        let mut r = rng::stream(seed, 0);
        let coords: Vec<f64> = (0..n * dim).map(|_| r.random::<f64>()).collect();
        let z = PointSet::new(coords, dim).unwrap();
        let y = z.iter().map(&g).collect();
        Sample::new(z, y).unwrap()
    }

    #[test]
    fn constant_responses_integrate_exactly() {
        let s = uniform_sample(200, 3, 1, |_| 2.5);
        let b = BoxSupport::cube(0.2, 0.8, 3).unwrap();
        for fit in [LocalFit::new(0, 3), LocalFit::new(1, 8)] {
            let r = estimate_psi(&s, &b, &fit, &MonteCarlo::new(500, 9)).unwrap();
            assert!((r.estimate - 2.5 * 0.216).abs() < 1e-12);
            assert!(r.mc_std_error < 1e-12);
        }
    }

    #[test]
    fn default_k_is_recorded() {
        let s = uniform_sample(100, 2, 2, |z| z[0]);
        let b = BoxSupport::cube(0.2, 0.8, 2).unwrap();
        let r = estimate_psi(&s, &b, &LocalFit::with_default_k(1), &MonteCarlo::new(50, 1)).unwrap();
        assert_eq!(r.k, 17);
        assert!(r.k_defaulted && !r.below_theoretical_k);
        let r = estimate_psi(&s, &b, &LocalFit::new(1, 6), &MonteCarlo::new(50, 1)).unwrap();
        assert!(r.below_theoretical_k && !r.k_defaulted);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn parameter_errors() {
        let s = uniform_sample(5, 2, 3, |_| 0.0);
        let b = BoxSupport::cube(0.0, 1.0, 2).unwrap();
        assert!(estimate_psi(&s, &b, &LocalFit::new(0, 6), &MonteCarlo::new(10, 0)).is_err());
        assert!(estimate_psi(&s, &b, &LocalFit::new(0, 2), &MonteCarlo::new(0, 0)).is_err());
        let b3 = BoxSupport::cube(0.0, 1.0, 3).unwrap();
        assert!(estimate_psi(&s, &b3, &LocalFit::new(0, 2), &MonteCarlo::new(10, 0)).is_err());
        let t = PointSet::from_rows(&[[0.5, 0.5, 0.5]]).unwrap();
        assert!(estimate_phi(&s, &t, &LocalFit::new(0, 1)).is_err());
    }

    #[test]
    fn att_rejects_degenerate_arms() {
        let z = PointSet::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let all = TreatmentDataset::new(vec![1.0; 3], z.clone(), vec![true; 3]).unwrap();
        let err = estimate_att(&all, &LocalFit::new(0, 1)).unwrap_err();
        assert!(err.to_string().contains("no control units"));
        let none = TreatmentDataset::new(vec![1.0; 3], z.clone(), vec![false; 3]).unwrap();
        assert!(estimate_att(&none, &LocalFit::new(0, 1)).is_err());
        let few = TreatmentDataset::new(vec![1.0; 3], z, vec![true, true, false]).unwrap();
        assert!(matches!(
            estimate_att(&few, &LocalFit::new(0, 2)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_outcomes_give_zero_effects() {
        let s = uniform_sample(300, 2, 5, |_| 4.0);
        let treated: Vec<bool> = (0..300).map(|i| i % 3 == 0).collect();
        let data = TreatmentDataset::new(s.responses.clone(), s.covariates.clone(), treated).unwrap();
        let att = estimate_att(&data, &LocalFit::new(1, 6)).unwrap();
        assert!(att.tau_hat.abs() < 1e-12);
        assert_eq!(att.tau_hat, att.tau1_hat - att.tau0_hat);
        let b = BoxSupport::cube(0.25, 0.75, 2).unwrap();
        let ate = estimate_ate_region(&data, &b, &LocalFit::new(1, 6)).unwrap();
        assert!(ate.tau_region.abs() < 1e-12);
        assert!((ate.pi_hat - 100.0 / 300.0).abs() < 1e-15);
        // 4 * P(Z in box) is estimated by counting, both arms
        let inside = s.covariates.iter().filter(|z| b.contains(z)).count();
        assert!((ate.ey1_region - 4.0 * inside as f64 / 300.0).abs() < 1e-12);
    }

    #[test]
    fn empty_region_contributes_nothing() {
        let s = uniform_sample(60, 2, 6, |_| 1.0);
        let treated: Vec<bool> = (0..60).map(|i| i % 2 == 0).collect();
        let data = TreatmentDataset::new(s.responses.clone(), s.covariates.clone(), treated).unwrap();
        let far = BoxSupport::cube(5.0, 6.0, 2).unwrap();
        let ate = estimate_ate_region(&data, &far, &LocalFit::new(0, 2)).unwrap();
        assert_eq!(ate.ey1_region, 0.0);
        assert_eq!(ate.tau_region, 0.0);
        assert_eq!(ate.notes.len(), 2);
        assert!(ate.treated_fit.is_none());
    }

    #[test]
    fn weighted_loss_constants() {
        let s = uniform_sample(50, 2, 7, |_| 0.0);
        let t = uniform_sample(20, 2, 8, |_| 0.0).covariates;
        let fit = LocalFit::new(0, 3);
        assert_eq!(estimate_weighted_loss(&s, &t, &fit).unwrap().estimate, 0.0);
        let c = s.with_responses(vec![0.7; 50]).unwrap();
        assert!((estimate_weighted_loss(&c, &t, &fit).unwrap().estimate - 0.7).abs() < 1e-15);
    }
}
