//! Subcommands of the `quilt` binary. Every command writes its artifacts and
//! a `manifest.json` into `--out-dir`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use quilt_core::estimators::{bootstrap_band, bootstrap_complement_sd, compare_graphs, threshold_edges, GraphMetrics};
use quilt_core::gqlasso::{fit_path, GqlassoOptions, SolverReport};
use quilt_core::reco::{reco_known_diag, reco_unknown_diag, RecoOptions, RecoResult};
use quilt_core::scheme::{observed_covariance, observed_covariance_with_scheme};
use quilt_core::simlab::{AucPlan, RatesPlan, SimConfig};
use quilt_core::{EdgeSet, PartialCovariance, QuiltError};
use serde::Serialize;

use crate::error::input_error;
use crate::io;
use crate::manifest::ManifestBuilder;
use crate::runner::run_with_threads;
use crate::tables;

#[derive(Debug, Parser)]
#[command(
    name = "quilt",
    version,
    about = "Graph quilting: graphical-model recovery from partially co-observed variables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise-complete covariance of a data CSV: cov.csv (empty cells off
    /// the observed set) and counts.json (subsets and joint sample sizes).
    Cov(CovArgs),
    /// Penalised precision estimate with zeros forced on unobserved pairs.
    Fit(FitArgs),
    /// Candidate edges among never co-observed pairs, from a precision estimate.
    Reco(RecoArgs),
    /// Edges of a precision matrix with magnitude above a threshold.
    Threshold(ThresholdArgs),
    /// Confusion metrics of an estimated edge list against a reference.
    Evaluate(EvaluateArgs),
    /// Simulation studies driven by a JSON config.
    Simulate {
        #[command(subcommand)]
        study: SimulateCommand,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct DataInput {
    /// Data CSV: one row per sample, one column per variable, empty cell = unobserved.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The data CSV starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Scheme JSON {"p": int, "subsets": [[int, ...], ...]} with 1-based indices.
    /// Inferred from the missingness pattern when omitted.
    #[arg(long)]
    pub scheme: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CovArgs {
    #[command(flatten)]
    pub input: DataInput,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataInput,
    /// Covariance CSV exported by `cov`, instead of --data.
    #[arg(long, conflicts_with = "data")]
    pub cov: Option<PathBuf>,
    /// Counts JSON for --cov; defaults to counts.json next to it.
    #[arg(long, requires = "cov")]
    pub counts: Option<PathBuf>,
    /// Off-diagonal penalty.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// Comma-separated penalties, fitted largest first with warm starts.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// KKT residual target, relative to the largest observed covariance entry.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    /// Recorded in the manifest; the fit itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RecoArgs {
    /// Precision estimate CSV (symmetric positive definite).
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    /// One value per row: the diagonal of the true precision matrix. Selects
    /// the known-diagonal algorithm.
    #[arg(long)]
    pub true_diag: Option<PathBuf>,
    /// Diagonal-distortion threshold for the known-diagonal algorithm.
    #[arg(long, default_value_t = 0.0, requires = "true_diag")]
    pub xi: f64,
    /// Lower band edge for the unknown-diagonal algorithm.
    #[arg(long, conflicts_with = "true_diag")]
    pub xi1: Option<f64>,
    /// Upper band edge for the unknown-diagonal algorithm.
    #[arg(long, conflicts_with = "true_diag")]
    pub xi2: Option<f64>,
    /// Minimum edge magnitude; without --xi1/--xi2 the band is (0, ν).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Apply the band to partial correlations of the complements.
    #[arg(long, conflicts_with = "true_diag")]
    pub pcor: bool,
    /// Bootstrap resamples for the band (2·sd, ν − 2·sd); needs --data, --lambda and --nu.
    #[arg(long, value_name = "B", requires_all = ["data", "lambda", "nu"])]
    pub bootstrap: Option<usize>,
    /// Data CSV for --bootstrap.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    /// Penalty refitted on each bootstrap resample.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Absolute margin on strict comparisons, absorbing solver noise.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    /// Precision matrix CSV.
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub tau: f64,
    /// Keep only pairs observed under this scheme.
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Estimated edge list JSON [[i, j], ...].
    pub estimated: PathBuf,
    /// Reference edge list JSON.
    pub truth: PathBuf,
    /// Also report metrics restricted to observed and unobserved pairs.
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    /// Number of nodes; taken from --scheme, else the largest index seen.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Loss quantiles of the oracle-penalty fit against n̄ / log p, with power-law fits.
    Rates(SimulateArgs),
    /// ROC areas of the graph estimators on observed and unobserved pairs.
    Auc(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cov(a) => cmd_cov(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Reco(a) => cmd_reco(&a),
        Command::Threshold(a) => cmd_threshold(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Simulate { study: SimulateCommand::Rates(a) } => cmd_simulate(&a, Study::Rates),
        Command::Simulate { study: SimulateCommand::Auc(a) } => cmd_simulate(&a, Study::Auc),
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn load_covariance(input: &DataInput, m: &mut ManifestBuilder) -> Result<PartialCovariance> {
    let path = input.data.as_ref().ok_or_else(|| input_error("--data is required"))?;
    m.input(path)?;
    let data = io::read_data(path, input.header)?;
    let cov = match &input.scheme {
        Some(s) => {
            m.input(s)?;
            let scheme = io::read_scheme(s)?;
            observed_covariance_with_scheme(&data, &scheme)
        }
        None => observed_covariance(&data),
    };
    cov.with_context(|| format!("cannot form the covariance of {}", path.display()))
}

pub fn cmd_cov(a: &CovArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("cov", a, None)?;
    let cov = load_covariance(&a.input, &mut m)?;
    m.phase("covariance");
    out_dir(&a.out_dir)?;
    let (c, n) = (a.out_dir.join("cov.csv"), a.out_dir.join("counts.json"));
    io::write_partial_covariance(&c, &n, &cov)?;
    m.output(&c)?;
    m.output(&n)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitReport {
    lambda: f64,
    status: &'static str,
    iterations: usize,
    final_gap: f64,
    tolerance: f64,
    objective: Option<f64>,
    converged: bool,
    weak_regime: bool,
    edges: Option<usize>,
    theta_file: Option<String>,
    edges_file: Option<String>,
}

impl FitReport {
    fn from_report(lambda: f64, r: &SolverReport) -> Self {
        Self {
            lambda,
            status: if r.converged { "converged" } else { "not_converged" },
            iterations: r.iterations,
            final_gap: r.final_gap,
            tolerance: r.tolerance,
            objective: r.objective.is_finite().then_some(r.objective),
            converged: r.converged,
            weak_regime: r.weak_regime,
            edges: None,
            theta_file: None,
            edges_file: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    p: usize,
    n_bar: Option<u64>,
    missingness_ratio: f64,
    fits: Vec<FitReport>,
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("fit", a, Some(a.seed))?;
    let cov = match &a.cov {
        Some(c) => {
            let counts = a.counts.clone().unwrap_or_else(|| c.with_file_name("counts.json"));
            m.input(c)?;
            m.input(&counts)?;
            let cov = io::read_partial_covariance(c, &counts)?;
            if let Some(s) = &a.input.scheme {
                m.input(s)?;
                if io::read_scheme(s)?.mask() != cov.scheme().mask() {
                    return Err(input_error("--scheme does not match the observed set of --cov"));
                }
            }
            cov
        }
        None => load_covariance(&a.input, &mut m)?,
    };
    let lambdas = match (&a.lambda, &a.lambda_grid) {
        (Some(l), None) => vec![*l],
        (None, Some(g)) if !g.is_empty() => g.clone(),
        _ => return Err(input_error("give exactly one of --lambda or a nonempty --lambda-grid")),
    };
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return Err(input_error("--tol must be positive and --max-iter at least 1"));
    }
    m.phase("load");
    let opts = GqlassoOptions { tol: a.tol, max_iter: a.max_iter, warm_start: None };
    let fits = fit_path(&cov, &lambdas, &opts);
    m.phase("solve");

    out_dir(&a.out_dir)?;
    let single = lambdas.len() == 1;
    let mut reports = Vec::new();
    let mut failure: Option<anyhow::Error> = None;
    for (t, (lambda, fit)) in lambdas.iter().zip(fits).enumerate() {
        match fit {
            Ok((est, rep)) => {
                let (tn, en) = if single {
                    ("theta.csv".into(), "edges.json".into())
                } else {
                    (format!("theta_{:03}.csv", t + 1), format!("edges_{:03}.json", t + 1))
                };
                let (tp, ep) = (a.out_dir.join(&tn), a.out_dir.join(&en));
                io::write_matrix(&tp, est.theta())?;
                io::write_edges(&ep, est.support())?;
                m.output(&tp)?;
                m.output(&ep)?;
                let mut r = FitReport::from_report(*lambda, &rep);
                r.edges = Some(est.support().len());
                r.theta_file = Some(tn);
                r.edges_file = Some(en);
                reports.push(r);
            }
            Err(QuiltError::NotConverged { report }) => {
                reports.push(FitReport::from_report(*lambda, &report));
                failure.get_or_insert_with(|| QuiltError::NotConverged { report }.into());
            }
            Err(e) => {
                let mut r = FitReport::from_report(
                    *lambda,
                    &SolverReport {
                        iterations: 0,
                        final_gap: f64::NAN,
                        tolerance: f64::NAN,
                        objective: f64::NAN,
                        converged: false,
                        weak_regime: false,
                    },
                );
                r.status = "failed";
                reports.push(r);
                failure.get_or_insert_with(|| anyhow::Error::from(e).context(format!("fit at λ = {lambda} failed")));
            }
        }
    }
    let summary = FitSummary {
        p: cov.p(),
        n_bar: cov.scheme().min_joint_sample_size().ok(),
        missingness_ratio: cov.scheme().missingness_ratio(),
        fits: reports,
    };
    let rp = a.out_dir.join("report.json");
    io::write_json(&rp, &summary)?;
    m.output(&rp)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct RecoReport {
    mode: &'static str,
    flagged_nodes: Vec<usize>,
    candidate_edges: Vec<[usize; 2]>,
    lower_bound: usize,
    xi: Option<f64>,
    xi1: Option<f64>,
    xi2: Option<f64>,
    bootstrap_sd: Option<f64>,
    saturated: bool,
    min_side: Option<usize>,
    theta_bar: Option<Vec<f64>>,
}

pub fn cmd_reco(a: &RecoArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("reco", a, Some(a.seed))?;
    m.input(&a.theta)?;
    m.input(&a.scheme)?;
    let theta = io::read_precision(&a.theta)?;
    let scheme = io::read_scheme(&a.scheme)?;
    if !(a.slack >= 0.0 && a.slack.is_finite()) {
        return Err(input_error("--slack must be finite and nonnegative"));
    }
    let opts = RecoOptions { slack: a.slack };
    let mut bootstrap_sd = None;
    let (res, xi, band): (RecoResult, Option<f64>, Option<(f64, f64)>) = match &a.true_diag {
        Some(d) => {
            m.input(d)?;
            let diag = io::read_vector(d)?;
            (reco_known_diag(&theta, &scheme, &diag, a.xi, opts)?, Some(a.xi), None)
        }
        None => {
            let (xi1, xi2) = match (a.xi1, a.xi2, a.nu, a.bootstrap) {
                (_, _, Some(nu), Some(b)) => {
                    if a.xi1.is_some() || a.xi2.is_some() {
                        return Err(input_error("--bootstrap sets the band; drop --xi1/--xi2"));
                    }
                    let path = a.data.as_ref().expect("clap enforces --data");
                    m.input(path)?;
                    let data = io::read_data(path, a.header)?;
                    let sd =
                        bootstrap_complement_sd(&data, &scheme, a.lambda.expect("clap enforces --lambda"), b, a.seed)?;
                    bootstrap_sd = Some(sd);
                    bootstrap_band(sd, nu)?
                }
                (xi1, Some(xi2), _, None) => (xi1.unwrap_or(0.0), xi2),
                (None, None, Some(nu), None) => (0.0, nu),
                _ => return Err(input_error("the unknown-diagonal band needs --xi2, --nu, or --nu with --bootstrap")),
            };
            (reco_unknown_diag(&theta, &scheme, xi1, xi2, a.pcor, opts)?, None, Some((xi1, xi2)))
        }
    };
    m.phase("reco");
    out_dir(&a.out_dir)?;
    let report = RecoReport {
        mode: res.mode.as_str(),
        flagged_nodes: res.flagged_nodes.iter().map(|i| i + 1).collect(),
        candidate_edges: io::edges_to_json(&res.candidate_edges),
        lower_bound: res.lower_bound,
        xi,
        xi1: band.map(|b| b.0),
        xi2: band.map(|b| b.1),
        bootstrap_sd,
        saturated: res.saturated,
        min_side: res.min_side,
        theta_bar: res.theta_bar.clone(),
    };
    let rp = a.out_dir.join("reco.json");
    io::write_json(&rp, &report)?;
    m.output(&rp)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

pub fn cmd_threshold(a: &ThresholdArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("threshold", a, None)?;
    m.input(&a.theta)?;
    let theta = io::read_matrix(&a.theta)?;
    let restrict = match &a.scheme {
        Some(s) => {
            m.input(s)?;
            let scheme = io::read_scheme(s)?;
            if scheme.p() != theta.nrows() {
                return Err(QuiltError::DimensionMismatch { expected: theta.nrows(), found: scheme.p() }.into());
            }
            Some(scheme.mask().observed_pairs())
        }
        None => None,
    };
    let edges = threshold_edges(&theta, a.tau, restrict.as_ref())?;
    out_dir(&a.out_dir)?;
    let ep = a.out_dir.join("edges.json");
    io::write_edges(&ep, &edges)?;
    m.output(&ep)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct MetricsJson {
    pairs: usize,
    tp: usize,
    fp: usize,
    tn: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    sens: Option<f64>,
    spec: Option<f64>,
    fpp: Option<f64>,
    fnp: Option<f64>,
}

impl From<GraphMetrics> for MetricsJson {
    fn from(g: GraphMetrics) -> Self {
        Self {
            pairs: g.tp + g.fp + g.tn + g.fn_,
            tp: g.tp,
            fp: g.fp,
            tn: g.tn,
            fn_: g.fn_,
            sens: g.sens,
            spec: g.spec,
            fpp: g.fpp,
            fnp: g.fnp,
        }
    }
}

#[derive(Debug, Serialize)]
struct EvaluateReport {
    p: usize,
    all: MetricsJson,
    observed: Option<MetricsJson>,
    unobserved: Option<MetricsJson>,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("evaluate", a, None)?;
    m.input(&a.estimated)?;
    m.input(&a.truth)?;
    let est = io::read_edge_pairs(&a.estimated)?;
    let truth = io::read_edge_pairs(&a.truth)?;
    let scheme = match &a.scheme {
        Some(s) => {
            m.input(s)?;
            Some(io::read_scheme(s)?)
        }
        None => None,
    };
    let seen = est.iter().chain(&truth).flat_map(|e| e.iter().copied()).max().unwrap_or(0);
    let p = match (a.p, &scheme) {
        (Some(p), Some(s)) if p != s.p() => {
            return Err(input_error(format!("--p {p} disagrees with the scheme's p = {}", s.p())))
        }
        (Some(p), _) => p,
        (None, Some(s)) => s.p(),
        (None, None) => seen,
    };
    let (est, truth) = (io::edges_from_pairs(p, &est)?, io::edges_from_pairs(p, &truth)?);
    let restricted = |r: &EdgeSet| compare_graphs(&est, &truth, Some(r)).map(MetricsJson::from);
    let report = EvaluateReport {
        p,
        all: compare_graphs(&est, &truth, None)?.into(),
        observed: scheme.as_ref().map(|s| restricted(&s.mask().observed_pairs())).transpose()?,
        unobserved: scheme.as_ref().map(|s| restricted(&s.mask().unobserved_pairs())).transpose()?,
    };
    out_dir(&a.out_dir)?;
    let rp = a.out_dir.join("metrics.json");
    io::write_json(&rp, &report)?;
    m.output(&rp)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Study {
    Rates,
    Auc,
}

/// The config after applying `--seed`, as used by the run.
pub fn effective_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg: SimConfig = io::read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(a: &SimulateArgs, study: Study) -> Result<()> {
    let cfg = effective_config(a)?;
    let name = match study {
        Study::Rates => "simulate rates",
        Study::Auc => "simulate auc",
    };
    let mut m = ManifestBuilder::new(name, &cfg, Some(cfg.seed))?;
    m.input(&a.config)?;
    out_dir(&a.out_dir)?;
    match study {
        Study::Rates => {
            let plan = RatesPlan::new(&cfg)?;
            m.phase("prepare");
            let table = run_with_threads(&plan, a.threads)?;
            m.phase("run");
            let (r, f) = (a.out_dir.join("rates.csv"), a.out_dir.join("fits.csv"));
            tables::write_rates(&r, &table)?;
            tables::write_fits(&f, &cfg.graph.name(), &table)?;
            m.output(&r)?;
            m.output(&f)?;
        }
        Study::Auc => {
            let plan = AucPlan::new(&cfg)?;
            m.phase("prepare");
            let rows = run_with_threads(&plan, a.threads)?;
            m.phase("run");
            let path = a.out_dir.join("auc.csv");
            tables::write_auc(&path, &rows)?;
            m.output(&path)?;
        }
    }
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flag_conflicts() {
        let parse = |args: &[&str]| Cli::try_parse_from(std::iter::once("quilt").chain(args.iter().copied()));
        assert!(parse(&["fit", "--data", "x.csv", "--lambda", "0.1", "--out-dir", "o"]).is_ok());
        assert!(
            parse(&["fit", "--data", "x.csv", "--lambda", "0.1", "--lambda-grid", "1,2", "--out-dir", "o"]).is_err()
        );
        assert!(parse(&["fit", "--data", "x.csv", "--cov", "c.csv", "--lambda", "0.1", "--out-dir", "o"]).is_err());
        assert!(parse(&["reco", "--theta", "t", "--scheme", "s", "--bootstrap", "10", "--out-dir", "o"]).is_err());
        assert!(parse(&["reco", "--theta", "t", "--scheme", "s", "--true-diag", "d", "--xi2", "1", "--out-dir", "o"])
            .is_err());
        let cli = parse(&["fit", "--data", "x", "--lambda-grid", "0.3,0.1", "--out-dir", "o"]).unwrap();
        let Command::Fit(f) = cli.command else { panic!() };
        assert_eq!(f.lambda_grid, Some(vec![0.3, 0.1]));
    }
}
