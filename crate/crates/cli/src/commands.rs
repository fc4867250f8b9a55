use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nnmatch::berkson::{
    default_cutoff, degree_for_smoothness, deconvolve, estimate_fourier_coefficients,
    write_coefficients_csv, write_h_grid_csv, ErrorDensity, FourierIndexGrid, IdentityError,
    ProductLaplace,
};
use nnmatch::quadrature::QuadratureCertificate;
use nnmatch::io::{load_csv_dataset, load_points, parse_support, Dataset};
use nnmatch::sim::{
    emit_table, run_replications_with_truth, true_value_oracle, ReplicationPlan, Scenario, ScenarioId, SummaryRow, TableFormat,
};
use nnmatch::{
    estimate_ate_region, estimate_att, estimate_phi, estimate_psi, estimate_weighted_loss,
    recommended_k, BoxSupport, LocalFit, MonteCarlo, Sample, TreatmentDataset,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::args::{
    AteRegionArgs, AttArgs, BerksonArgs, DataArgs, FitArgs, Format, PhiArgs, PsiArgs, SimulateArgs,
};
use crate::output::{json, open, write_record, write_text, Envelope};
use crate::CliError;

/// Every setting a run depended on. Fields a subcommand does not use are
/// omitted from its output.
#[derive(Debug, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment_col: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportConfig>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_defaulted: Option<bool>,
    #[serde(rename = "recommended_K", skip_serializing_if = "Option::is_none")]
    pub recommended_k: Option<usize>,
    #[serde(rename = "below_theoretical_K", skip_serializing_if = "Option::is_none")]
    pub below_theoretical_k: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "Jn", skip_serializing_if = "Option::is_none")]
    pub jn: Option<usize>,
    #[serde(rename = "Jn_from_alpha", skip_serializing_if = "Option::is_none")]
    pub jn_from_alpha: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_density: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fits: Option<Vec<FitCell>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<Vec<String>>,
    pub format: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportConfig {
    pub spec: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub volume: f64,
}

impl SupportConfig {
    fn new(spec: String, b: &BoxSupport) -> Self {
        Self {
            spec,
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
            volume: b.volume(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitCell {
    #[serde(rename = "L")]
    pub degree: u32,
    #[serde(rename = "K")]
    pub k: usize,
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Markdown => "markdown",
        Format::Wide => "wide",
    }
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

impl RunConfig {
    fn base(subcommand: &'static str, data: &DataArgs, format: Format) -> Self {
        Self {
            subcommand,
            data: Some(path_text(&data.data)),
            response_col: Some(data.response_col.clone()),
            format: format_name(format),
            ..Self::default()
        }
    }

    /// Records `L`, the `K` used and how it compares with the minimum.
    fn with_fit(mut self, dim: usize, degree: u32, k: Option<usize>) -> Self {
        let recommended = recommended_k(dim, degree);
        self.degree = Some(degree);
        self.k = Some(k.unwrap_or(recommended));
        self.k_defaulted = Some(k.is_none());
        self.recommended_k = Some(recommended);
        self.below_theoretical_k = Some(k.is_some_and(|k| k < recommended));
        self
    }
}

fn local_fit(degree: u32, k: Option<usize>) -> LocalFit {
    match k {
        Some(k) => LocalFit::new(degree, k),
        None => LocalFit::with_default_k(degree),
    }
}

fn regression_data(args: &DataArgs) -> Result<Sample, CliError> {
    match load_csv_dataset(&args.data, &args.response_col, None)? {
        Dataset::Regression(s) => Ok(s),
        Dataset::Treatment(_) => unreachable!("no treatment column requested"),
    }
}

fn treatment_data(args: &DataArgs, treatment_col: &str) -> Result<TreatmentDataset, CliError> {
    match load_csv_dataset(&args.data, &args.response_col, Some(treatment_col))? {
        Dataset::Treatment(d) => Ok(d),
        Dataset::Regression(_) => unreachable!("treatment column requested"),
    }
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<(), CliError> {
    if got != want {
        return Err(CliError::Input(format!(
            "{what} has dimension {got}, data have dimension {want}"
        )));
    }
    Ok(())
}

pub fn psi(args: &PsiArgs) -> Result<(), CliError> {
    let sample = regression_data(&args.data)?;
    let support = parse_support(&args.support)?;
    check_dim("support", support.dim(), sample.dim())?;
    let fit = local_fit(args.fit.degree, args.fit.k);
    let mc = MonteCarlo::new(args.mc_points, args.seed);
    let report = estimate_psi(&sample, &support, &fit, &mc)?;
    let mut config = RunConfig::base("psi", &args.data, args.output.format)
        .with_fit(sample.dim(), args.fit.degree, args.fit.k);
    config.support = Some(SupportConfig::new(args.support.clone(), &support));
    config.mc_points = Some(args.mc_points);
    config.seed = Some(args.seed);
    write_record(&args.output, &Envelope { config, result: report })
}

fn phi_like(args: &PhiArgs, name: &'static str, losses: bool) -> Result<(), CliError> {
    let sample = regression_data(&args.data)?;
    let targets = load_points(&args.targets, &[args.data.response_col.as_str()])?;
    check_dim("targets", targets.dim(), sample.dim())?;
    let fit = local_fit(args.fit.degree, args.fit.k);
    let report = if losses {
        estimate_weighted_loss(&sample, &targets, &fit)?
    } else {
        estimate_phi(&sample, &targets, &fit)?
    };
    let mut config =
        RunConfig::base(name, &args.data, args.output.format).with_fit(sample.dim(), args.fit.degree, args.fit.k);
    config.targets = Some(path_text(&args.targets));
    write_record(&args.output, &Envelope { config, result: report })
}

pub fn phi(args: &PhiArgs) -> Result<(), CliError> {
    phi_like(args, "phi", false)
}

pub fn covshift_loss(args: &PhiArgs) -> Result<(), CliError> {
    phi_like(args, "covshift-loss", true)
}

fn treatment_config(
    name: &'static str,
    data: &DataArgs,
    treatment_col: &str,
    fit: &FitArgs,
    format: Format,
    dim: usize,
) -> RunConfig {
    let mut config = RunConfig::base(name, data, format).with_fit(dim, fit.degree, fit.k);
    config.treatment_col = Some(treatment_col.to_string());
    config
}

pub fn att(args: &AttArgs) -> Result<(), CliError> {
    let data = treatment_data(&args.data, &args.treatment_col)?;
    let report = estimate_att(&data, &local_fit(args.fit.degree, args.fit.k))?;
    let config = treatment_config(
        "att",
        &args.data,
        &args.treatment_col,
        &args.fit,
        args.output.format,
        data.covariates.dim(),
    );
    write_record(&args.output, &Envelope { config, result: report })
}

pub fn ate_region(args: &AteRegionArgs) -> Result<(), CliError> {
    let data = treatment_data(&args.data, &args.treatment_col)?;
    let support = parse_support(&args.support)?;
    check_dim("support", support.dim(), data.covariates.dim())?;
    let report = estimate_ate_region(&data, &support, &local_fit(args.fit.degree, args.fit.k))?;
    let mut config = treatment_config(
        "ate-region",
        &args.data,
        &args.treatment_col,
        &args.fit,
        args.output.format,
        data.covariates.dim(),
    );
    config.support = Some(SupportConfig::new(args.support.clone(), &support));
    write_record(&args.output, &Envelope { config, result: report })
}

fn parse_error_density(spec: &str) -> Result<Box<dyn ErrorDensity>, CliError> {
    if spec == "identity" {
        return Ok(Box::new(IdentityError));
    }
    if let Some(b) = spec.strip_prefix("laplace:") {
        let scale: f64 = b
            .parse()
            .map_err(|_| CliError::Input(format!("Laplace scale '{b}' is not a number")))?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CliError::Input(format!("Laplace scale {scale} must be positive")));
        }
        return Ok(Box::new(ProductLaplace { scale }));
    }
    Err(CliError::Input(format!(
        "unknown error density '{spec}' (expected identity or laplace:<scale>)"
    )))
}

#[derive(Debug, Serialize)]
struct Coefficient {
    j: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct BerksonResult {
    #[serde(rename = "K")]
    k: usize,
    fallback_count: usize,
    grid_size: usize,
    l2_norm_squared: f64,
    coefficients: Vec<Coefficient>,
    psi: Vec<Coefficient>,
}

fn coefficient_list(grid: &FourierIndexGrid, values: &[Complex64]) -> Vec<Coefficient> {
    grid.indices()
        .iter()
        .zip(values)
        .map(|(j, c)| Coefficient {
            j: j.clone(),
            re: c.re,
            im: c.im,
        })
        .collect()
}

pub fn berkson(args: &BerksonArgs) -> Result<(), CliError> {
    let sample = regression_data(&args.data)?;
    let dim = sample.dim();
    let (support, support_spec) = match &args.support {
        Some(s) => (parse_support(s)?, s.clone()),
        None => (
            BoxSupport::cube(-PI, PI, dim)?,
            vec![format!("{:e}:{:e}", -PI, PI); dim].join(","),
        ),
    };
    check_dim("support", support.dim(), dim)?;
    let error = parse_error_density(&args.error_density)?;
    let (jn, gamma) = match (args.jn, args.alpha) {
        (Some(j), None) => {
            if j == 0 {
                return Err(CliError::Input("--Jn must be at least 1".into()));
            }
            (j, None)
        }
        (None, Some(alpha)) => {
            let gamma = args.gamma.unwrap_or_else(|| error.decay_exponent());
            (default_cutoff(sample.len(), alpha, gamma, dim, args.cutoff_scale)?, Some(gamma))
        }
        _ => unreachable!("clap enforces exactly one of --Jn and --alpha"),
    };
    let degree = args
        .degree
        .unwrap_or_else(|| args.alpha.map_or(1, degree_for_smoothness));
    let grid = FourierIndexGrid::new(jn, dim)?;
    let fit = local_fit(degree, args.k);
    let mc = MonteCarlo::new(args.mc_points, args.seed);
    let table = estimate_fourier_coefficients(&sample, &support, &grid, &fit, &mc)?;
    let est = deconvolve(&table, error.as_ref(), args.tol, true)?;

    if let Some(path) = &args.grid_out {
        write_h_grid_csv(open(Some(path))?, &est, args.grid_points)?;
    }

    let mut config = RunConfig::base("berkson", &args.data, args.output.format).with_fit(dim, degree, args.k);
    config.support = Some(SupportConfig::new(support_spec, &support));
    config.mc_points = Some(args.mc_points);
    config.seed = Some(args.seed);
    config.jn = Some(jn);
    config.jn_from_alpha = Some(args.alpha.is_some());
    config.alpha = args.alpha;
    config.gamma = gamma;
    config.cutoff_scale = args.alpha.map(|_| args.cutoff_scale);
    config.error_density = Some(args.error_density.clone());
    config.spectral_tol = Some(args.tol);
    config.grid_points = args.grid_out.as_ref().map(|_| args.grid_points);

    match args.output.format {
        Format::Csv => {
            let mut w = open(args.output.out.as_deref())?;
            write_coefficients_csv(&mut w, &grid, &est.coefficients)?;
            w.flush()?;
            Ok(())
        }
        _ => {
            let result = BerksonResult {
                k: table.k,
                fallback_count: table.fallback_count,
                grid_size: grid.len(),
                l2_norm_squared: est.l2_norm_squared(),
                coefficients: coefficient_list(&grid, &est.coefficients),
                psi: coefficient_list(&grid, &table.values),
            };
            write_record(&args.output, &Envelope { config, result })
        }
    }
}

fn parse_fit_cell(s: &str) -> Result<FitCell, CliError> {
    let bad = || CliError::Input(format!("fit cell '{s}' is not of the form L:K"));
    let (l, k) = s.trim().split_once(':').ok_or_else(bad)?;
    Ok(FitCell {
        degree: l.trim().parse().map_err(|_| bad())?,
        k: k.trim().parse().map_err(|_| bad())?,
    })
}

#[derive(Debug, Serialize)]
struct SimulateResult {
    oracle: QuadratureCertificate,
    rows: Vec<SummaryRow>,
    fallback_counts: Vec<usize>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let id: ScenarioId = args.scenario.parse()?;
    if !matches!(id, ScenarioId::F1Box | ScenarioId::F1Full | ScenarioId::F2Box) {
        return Err(CliError::Input(format!(
            "simulate supports f1_box, f1_full and f2_box, not {}",
            args.scenario
        )));
    }
    let mut scenario = Scenario::by_id(id)?;
    if let Some(sd) = args.noise_sd {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(CliError::Input(format!("noise sd {sd} must be non-negative")));
        }
        scenario = scenario.with_noise_sd(sd);
    }
    let cells = args
        .fit
        .iter()
        .map(|s| parse_fit_cell(s))
        .collect::<Result<Vec<_>, _>>()?;
    let oracle = true_value_oracle(&scenario, args.oracle_tol)?;

    let mut rows = Vec::new();
    let mut fallback_counts = Vec::new();
    let mut error_lines = Vec::new();
    for &n in &args.n {
        for cell in &cells {
            let plan = ReplicationPlan {
                n,
                replicates: args.replicates,
                fit: LocalFit::new(cell.degree, cell.k),
                mc_points: args.mc_points,
                master_seed: args.seed,
            };
            let result = run_replications_with_truth(&scenario, &plan, oracle.value)?;
            for (r, (e, s)) in result.errors.iter().zip(&result.standardized_errors).enumerate() {
                error_lines.push(format!(
                    "{n},{},{},{r},{e:.16e},{s:.16e}",
                    cell.degree, cell.k
                ));
            }
            rows.push(result.row);
            fallback_counts.push(result.fallback_count);
        }
    }

    if let Some(path) = &args.errors_out {
        let mut text = String::from("n,L,K,replicate,error,standardized_error\n");
        for line in &error_lines {
            text.push_str(line);
            text.push('\n');
        }
        let mut w = open(Some(path))?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }

    let config = RunConfig {
        subcommand: "simulate",
        support: Some(SupportConfig::new(
            scenario
                .support
                .lower()
                .iter()
                .zip(scenario.support.upper())
                .map(|(a, b)| format!("{a}:{b}"))
                .collect::<Vec<_>>()
                .join(","),
            &scenario.support,
        )),
        mc_points: Some(args.mc_points),
        seed: Some(args.seed),
        scenario: Some(scenario.name().to_string()),
        n: Some(args.n.clone()),
        replicates: Some(args.replicates),
        fits: Some(cells),
        noise_sd: Some(scenario.noise_sd),
        oracle_tol: Some(args.oracle_tol),
        assumptions: Some(scenario.assumptions.clone()),
        format: format_name(args.output.format),
        ..RunConfig::default()
    };
    match args.output.format {
        Format::Json => {
            let result = SimulateResult {
                oracle,
                rows,
                fallback_counts,
            };
            write_text(&args.output, &json(&Envelope { config, result })?)
        }
        Format::Csv => write_text(&args.output, &emit_table(&rows, TableFormat::Csv)?),
        Format::Markdown => write_text(&args.output, &emit_table(&rows, TableFormat::Markdown)?),
        Format::Wide => write_text(&args.output, &emit_table(&rows, TableFormat::Wide)?),
    }
}
