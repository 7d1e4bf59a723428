//! Synthetic instances and the two simulation studies: convergence rates of
//! the penalised estimator, and ROC areas of the graph estimators.
//!
//! A study is split into a plan (instances prepared once per `(p, η)`), a
//! list of independent jobs (one per grid cell and replicate, each with its
//! own derived seed), and a summary over the job outcomes in job order. Any
//! scheduler that preserves that order reproduces the sequential result.

mod auc;
mod graphs;
mod instance;
mod rates;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::madgq::madgq_complete;
use crate::rng::derive_seed;
use crate::scheme::{covariance_from_moments, observed_covariance_with_scheme, ObservationScheme, PartialCovariance};

pub use auc::{roc_points, sim_auc, AucOutcome, AucPlan, AucRow};
pub use graphs::{generate_graph, uniform_positions, GraphFamily, GraphModelSpec};
pub use instance::{
    chained_scheme, precision_from_graph, q0_for_eta, sample_gaussian, sample_moments, SimInstance, PD_RETRY_CAP,
    POSITIVE_SHARE,
};
pub use rates::{fit_power_law, sim_rates, PowerLawFit, RatesOutcome, RatesPlan, RatesRow, RatesTable};

/// Penalty grid for a cell. `Scaled` multiplies `√(log p / n̄)` by
/// `points` log-spaced factors between `lo` and `hi`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LambdaGrid {
    Fixed { values: Vec<f64> },
    Scaled { lo: f64, hi: f64, points: usize },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Scaled { lo: 0.05, hi: 5.0, points: 30 }
    }
}

impl LambdaGrid {
    fn validate(&self) -> Result<()> {
        match self {
            LambdaGrid::Fixed { values } => {
                if values.is_empty() || values.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(invalid("λ grid must be nonempty with finite nonnegative values"));
                }
            }
            LambdaGrid::Scaled { lo, hi, points } => {
                if !(*lo > 0.0 && hi >= lo && hi.is_finite()) || *points == 0 {
                    return Err(invalid("scaled λ grid needs 0 < lo ≤ hi and at least one point"));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self, p: usize, n_bar: u64) -> Vec<f64> {
        match self {
            LambdaGrid::Fixed { values } => values.clone(),
            LambdaGrid::Scaled { lo, hi, points } => {
                let base = libm::sqrt(libm::log(p as f64) / n_bar as f64);
                log_space(*lo, *hi, *points).into_iter().map(|m| m * base).collect()
            }
        }
    }
}

pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..points).map(|t| libm::exp(a + (b - a) * t as f64 / (points - 1) as f64)).collect()
}

/// How a replicate's partial covariance is produced. `Rows` materialises
/// the `n × p` sample; `Moments` draws the per-subset sufficient statistics
/// directly (same distribution, cost independent of `n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sampler {
    #[default]
    Rows,
    Moments,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SimConfig {
    pub graph: GraphFamily,
    pub p_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    /// Target missingness ratios; each is met by the closest chained `q0`.
    pub eta_grid: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default = "default_k"))]
    pub k: usize,
    pub replicates: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub lambda_grid: LambdaGrid,
    /// Loss quantile reported by the rate study.
    #[cfg_attr(feature = "serde", serde(default = "default_quantile"))]
    pub quantile: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sampler: Sampler,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_k() -> usize {
    3
}

#[cfg(feature = "serde")]
fn default_quantile() -> f64 {
    0.9
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("need at least one replicate"));
        }
        if self.p_grid.is_empty() || self.n_grid.is_empty() || self.eta_grid.is_empty() {
            return Err(invalid("p, n and η grids must be nonempty"));
        }
        if self.k < 2 {
            return Err(invalid(format!("need K ≥ 2, got {}", self.k)));
        }
        if let Some(p) = self.p_grid.iter().find(|&&p| p <= self.k) {
            return Err(invalid(format!("p = {p} leaves no room for {} chained subsets", self.k)));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 2 * self.k) {
            return Err(invalid(format!("n = {n} gives some subset fewer than two samples")));
        }
        if let Some(e) = self.eta_grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(invalid(format!("η must lie in [0, 1), got {e}")));
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(invalid(format!("quantile level must lie in (0, 1], got {}", self.quantile)));
        }
        self.lambda_grid.validate()
    }
}

/// One `(p, η)` model: the permuted precision matrix, its scheme, and, for
/// the rate study, the population `Θ̃`.
#[derive(Debug, Clone)]
pub struct SimModel {
    pub p: usize,
    pub eta_target: f64,
    pub q0: usize,
    pub scheme: ObservationScheme,
    pub instance: SimInstance,
    pub theta_tilde: Option<DMatrix<f64>>,
}

impl SimModel {
    /// Share of true edges that fall in `O^c`.
    pub fn unobserved_edge_share(&self) -> f64 {
        let e = &self.instance.edges;
        if e.is_empty() {
            return 0.0;
        }
        e.iter().filter(|&(i, j)| !self.scheme.is_observed(i, j)).count() as f64 / e.len() as f64
    }
}

/// Index of a replicate within the study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub model: usize,
    pub n_index: usize,
    pub replicate: usize,
    pub seed: u64,
}

/// A simulation split into independent jobs. `summarize` expects the
/// outcomes in the order of `jobs()`.
pub trait Study {
    type Outcome: Send;
    type Table;
    fn jobs(&self) -> &[Job];
    fn run_job(&self, job: &Job) -> Self::Outcome;
    fn summarize(&self, outcomes: Vec<Self::Outcome>) -> Result<Self::Table>;
}

/// Runs every job in order on the calling thread.
pub fn run_sequential<S: Study>(study: &S) -> Result<S::Table> {
    let outcomes = study.jobs().iter().map(|j| study.run_job(j)).collect();
    study.summarize(outcomes)
}

/// The graph and precision matrix depend on `(seed, p)` only, so every η
/// of a given size sees the same `Θ`.
fn prepare_models(config: &SimConfig, with_tilde: bool) -> Result<Vec<SimModel>> {
    config.validate()?;
    let mut models = Vec::new();
    for (pi, &p) in config.p_grid.iter().enumerate() {
        let graph_seed = derive_seed(config.seed, &[0, pi as u64]);
        let edges = generate_graph(&GraphModelSpec { family: config.graph.clone(), p, seed: graph_seed })?;
        let instance = precision_from_graph(&edges, derive_seed(graph_seed, &[1]))?;
        for &eta in &config.eta_grid {
            let q0 = q0_for_eta(p, config.k, eta)?;
            let scheme = chained_scheme(p, config.k, q0)?;
            let theta_tilde = if with_tilde {
                let sigma = PartialCovariance::from_full(&instance.theta.covariance(), scheme.clone())?;
                Some(madgq_complete(&sigma)?.into_theta())
            } else {
                None
            };
            models.push(SimModel { p, eta_target: eta, q0, scheme, instance: instance.clone(), theta_tilde });
        }
    }
    Ok(models)
}

fn make_jobs(config: &SimConfig, models: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for model in 0..models {
        for n_index in 0..config.n_grid.len() {
            for replicate in 0..config.replicates {
                let seed = derive_seed(config.seed, &[1, model as u64, n_index as u64, replicate as u64]);
                jobs.push(Job { model, n_index, replicate, seed });
            }
        }
    }
    jobs
}

/// `n̄` implied by round-robin allocation of `n` samples to the subsets.
pub fn round_robin_min_joint(scheme: &ObservationScheme, n: usize) -> u64 {
    let k = scheme.k();
    let n_t: Vec<u64> = (0..k).map(|t| (n / k + usize::from(t < n % k)) as u64).collect();
    let p = scheme.p();
    let mut best = u64::MAX;
    for i in 0..p {
        for j in i..p {
            let c: u64 = scheme
                .subsets()
                .iter()
                .zip(&n_t)
                .filter(|(v, _)| v.binary_search(&i).is_ok() && v.binary_search(&j).is_ok())
                .map(|(_, n)| *n)
                .sum();
            if c > 0 {
                best = best.min(c);
            }
        }
    }
    best
}

fn draw_covariance(config: &SimConfig, m: &SimModel, n: usize, seed: u64) -> Result<PartialCovariance> {
    match config.sampler {
        Sampler::Rows => {
            let data = sample_gaussian(&m.instance.theta, &m.scheme, n, seed)?;
            observed_covariance_with_scheme(&data, &m.scheme)
        }
        Sampler::Moments => {
            let moments = sample_moments(&m.instance.theta, &m.scheme, n as u64, seed)?;
            covariance_from_moments(&m.scheme, &moments)
        }
    }
}

fn family_name(config: &SimConfig) -> String {
    config.graph.name()
}
