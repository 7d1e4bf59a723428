//! Convergence-rate study: oracle-penalty loss quantiles against `n̄ / log p`
//! and a least-squares power-law fit.

use alloc::string::String;
use alloc::vec::Vec;

use super::{
    draw_covariance, family_name, make_jobs, prepare_models, round_robin_min_joint, Job, SimConfig, SimModel, Study,
};
use crate::error::{invalid, QuiltError, Result};
use crate::gqlasso::{oracle_lambda, GqlassoOptions};
use crate::linalg::quantile;

/// `(λ*, ‖Θ̂(λ*) − Θ̃‖_∞)` for one replicate.
pub type RatesOutcome = Result<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RatesRow {
    pub family: String,
    pub eta_target: f64,
    pub eta: f64,
    pub q0: usize,
    pub p: usize,
    pub n: usize,
    pub n_bar: u64,
    pub replicates_ok: usize,
    pub failures: usize,
    /// Loss quantile at the configured level over successful replicates.
    pub loss_q: Option<f64>,
    pub lambda_median: Option<f64>,
}

/// `Loss ≈ C t^{−β}` with `t = n̄ / log p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub c: f64,
    pub beta: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatesTable {
    pub rows: Vec<RatesRow>,
    /// One fit per η target, pooling every `p`; `None` with fewer than two distinct `t`.
    pub fits: Vec<(f64, Option<PowerLawFit>)>,
}

pub struct RatesPlan {
    config: SimConfig,
    models: Vec<SimModel>,
    jobs: Vec<Job>,
    opts: GqlassoOptions,
}

impl RatesPlan {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let models = prepare_models(config, true)?;
        let jobs = make_jobs(config, models.len());
        Ok(Self { config: config.clone(), models, jobs, opts: GqlassoOptions::default() })
    }

    pub fn models(&self) -> &[SimModel] {
        &self.models
    }
}

impl Study for RatesPlan {
    type Outcome = RatesOutcome;
    type Table = RatesTable;

    fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    fn run_job(&self, job: &Job) -> RatesOutcome {
        let m = &self.models[job.model];
        let n = self.config.n_grid[job.n_index];
        let cov = draw_covariance(&self.config, m, n, job.seed)?;
        let lambdas = self.config.lambda_grid.values(m.p, cov.scheme().min_joint_sample_size()?);
        let tilde = m.theta_tilde.as_ref().expect("rate models carry Θ̃");
        oracle_lambda(&lambdas, &cov, tilde, &self.opts)
    }

    fn summarize(&self, outcomes: Vec<RatesOutcome>) -> Result<RatesTable> {
        if outcomes.len() != self.jobs.len() {
            return Err(invalid("outcome count does not match the job list"));
        }
        let mut rows = Vec::new();
        let mut it = outcomes.into_iter();
        for m in &self.models {
            for &n in &self.config.n_grid {
                let cell: Vec<RatesOutcome> = it.by_ref().take(self.config.replicates).collect();
                let ok: Vec<(f64, f64)> = cell.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
                let losses: Vec<f64> = ok.iter().map(|x| x.1).collect();
                let lambdas: Vec<f64> = ok.iter().map(|x| x.0).collect();
                rows.push(RatesRow {
                    family: family_name(&self.config),
                    eta_target: m.eta_target,
                    eta: m.scheme.missingness_ratio(),
                    q0: m.q0,
                    p: m.p,
                    n,
                    n_bar: round_robin_min_joint(&m.scheme, n),
                    replicates_ok: ok.len(),
                    failures: cell.len() - ok.len(),
                    loss_q: quantile(&losses, self.config.quantile),
                    lambda_median: quantile(&lambdas, 0.5),
                });
            }
        }
        let fits = self
            .config
            .eta_grid
            .iter()
            .map(|&eta| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.eta_target == eta)
                    .filter_map(|r| r.loss_q.map(|l| (r.n_bar as f64 / libm::log(r.p as f64), l)))
                    .collect();
                (eta, fit_power_law(&pts).ok())
            })
            .collect();
        Ok(RatesTable { rows, fits })
    }
}

/// Ordinary least squares of `log y` on `log t`; points with a nonpositive
/// coordinate are dropped.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(t, y)| *t > 0.0 && *y > 0.0).map(|&(t, y)| (libm::log(t), libm::log(y))).collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return Err(invalid("need at least two positive points to fit a power law"));
    }
    let mx = logs.iter().map(|x| x.0).sum::<f64>() / n;
    let my = logs.iter().map(|x| x.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|x| (x.0 - mx) * (x.0 - mx)).sum();
    if !(sxx > 0.0) {
        return Err(QuiltError::Numerical("all abscissae coincide".into()));
    }
    let sxy: f64 = logs.iter().map(|x| (x.0 - mx) * (x.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(PowerLawFit { c: libm::exp(my - slope * mx), beta: -slope, points: logs.len() })
}

/// Runs the rate study on the calling thread.
pub fn sim_rates(config: &SimConfig) -> Result<RatesTable> {
    super::run_sequential(&RatesPlan::new(config)?)
}
