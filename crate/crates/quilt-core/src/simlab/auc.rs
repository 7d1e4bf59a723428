//! ROC-area study. Each replicate fits a penalty path and collects ROC
//! points from every fit and every threshold; the area is taken under the
//! upper envelope of all points.
//!
//! * In `O`, pairs are ranked by `|Θ̂_ij|` (every threshold τ).
//! * In `O^c` with known diagonal, `(i, j) ∈ Ŝ_ξ` iff
//!   `max(Θ̄_ii − Θ_ii, Θ̄_jj − Θ_jj) < ξ`, so sweeping ξ ranks pairs by that maximum.
//! * In `O^c` with unknown diagonal, bands `(ξ1, ξ2)` range over pairs of
//!   magnitude quantiles of the fitted complements.

use alloc::string::String;
use alloc::vec::Vec;

use super::{
    draw_covariance, family_name, make_jobs, prepare_models, round_robin_min_joint, Job, SimConfig, SimModel, Study,
};
use crate::error::{invalid, QuiltError, Result};
use crate::estimators::roc_auc;
use crate::gqlasso::{fit_path, GqlassoOptions};
use crate::linalg::quantile;
use crate::madgq::PrecisionEstimate;
use crate::reco::{subset_complements, theta_bar};

/// Quantile levels of complement magnitudes used as band edges.
const BAND_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucOutcome {
    pub auc_o: Option<f64>,
    pub auc_oc_s: Option<f64>,
    pub auc_oc_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucRow {
    pub family: String,
    pub eta_target: f64,
    pub eta: f64,
    /// Share of true edges in `O^c`.
    pub unobserved_edge_share: f64,
    pub p: usize,
    pub n: usize,
    pub n_bar: u64,
    pub replicates_ok: usize,
    pub failures: usize,
    /// Means over successful replicates with a defined area.
    pub auc_o: Option<f64>,
    pub auc_oc_s: Option<f64>,
    pub auc_oc_u: Option<f64>,
}

pub struct AucPlan {
    config: SimConfig,
    models: Vec<SimModel>,
    jobs: Vec<Job>,
    opts: GqlassoOptions,
}

impl AucPlan {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let models = prepare_models(config, false)?;
        let jobs = make_jobs(config, models.len());
        Ok(Self { config: config.clone(), models, jobs, opts: GqlassoOptions::default() })
    }

    pub fn models(&self) -> &[SimModel] {
        &self.models
    }
}

/// ROC points `(1 − spec, sens)` for every threshold of `score`, a pair being
/// called an edge when its score exceeds the threshold. `None` when either
/// class is empty.
pub fn roc_points(scored: &[(f64, bool)]) -> Option<Vec<(f64, f64)>> {
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut pts = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < sorted.len() {
        let s = sorted[idx].0;
        while idx < sorted.len() && sorted[idx].0 == s {
            if sorted[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Some(pts)
}

struct Collector {
    points: Vec<(f64, f64)>,
    defined: bool,
}

impl Collector {
    fn new() -> Self {
        Self { points: Vec::new(), defined: false }
    }

    fn add(&mut self, pts: Option<Vec<(f64, f64)>>) {
        if let Some(p) = pts {
            self.defined = true;
            self.points.extend(p);
        }
    }

    fn area(&self) -> Result<Option<f64>> {
        if !self.defined {
            return Ok(None);
        }
        roc_auc(&self.points).map(Some)
    }
}

impl AucPlan {
    fn sweep(
        &self,
        m: &SimModel,
        est: &PrecisionEstimate,
        o: &mut Collector,
        s: &mut Collector,
        u: &mut Collector,
    ) -> Result<()> {
        let p = m.p;
        let th = est.theta();
        let truth = &m.instance.edges;
        let mut observed = Vec::new();
        let mut unobserved = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if m.scheme.is_observed(i, j) {
                    observed.push((th[(i, j)].abs(), truth.contains(i, j)));
                } else {
                    unobserved.push((i, j));
                }
            }
        }
        o.add(roc_points(&observed));
        if unobserved.is_empty() {
            return Ok(());
        }

        let complements = subset_complements(est, &m.scheme)?;
        let bar = theta_bar(&m.scheme, &complements);
        let diag = m.instance.theta.diag();
        let drop: Vec<f64> = (0..p).map(|i| bar[i] - diag[i]).collect();
        let scored: Vec<(f64, bool)> =
            unobserved.iter().map(|&(i, j)| (-drop[i].max(drop[j]), truth.contains(i, j))).collect();
        s.add(roc_points(&scored));

        // Sorted off-diagonal magnitudes of each node's row in each complement.
        let mut rows: Vec<Vec<Vec<f64>>> = alloc::vec![Vec::new(); p];
        let mut pooled = Vec::new();
        for (v, c) in m.scheme.subsets().iter().zip(&complements) {
            for (a, &i) in v.iter().enumerate() {
                let mut r: Vec<f64> = (0..v.len()).filter(|&b| b != a).map(|b| c[(a, b)].abs()).collect();
                r.sort_by(f64::total_cmp);
                pooled.extend_from_slice(&r);
                rows[i].push(r);
            }
        }
        let mut edges_lo = alloc::vec![0.0];
        for t in 0..BAND_LEVELS {
            if let Some(q) = quantile(&pooled, t as f64 / (BAND_LEVELS - 1) as f64) {
                edges_lo.push(q);
            }
        }
        edges_lo.sort_by(f64::total_cmp);
        edges_lo.dedup();
        let pos = unobserved.iter().filter(|&&(i, j)| truth.contains(i, j)).count();
        let neg = unobserved.len() - pos;
        if pos == 0 || neg == 0 {
            return Ok(());
        }
        let mut pts = Vec::new();
        for (a, &x1) in edges_lo.iter().enumerate() {
            for &x2 in &edges_lo[a + 1..] {
                let in_h: Vec<bool> = (0..p)
                    .map(|i| {
                        rows[i].iter().all(|r| {
                            let k = r.partition_point(|&x| x <= x1);
                            k < r.len() && r[k] < x2
                        })
                    })
                    .collect();
                let (mut tp, mut fp) = (0usize, 0usize);
                for &(i, j) in &unobserved {
                    if in_h[i] || in_h[j] {
                        if truth.contains(i, j) {
                            tp += 1;
                        } else {
                            fp += 1;
                        }
                    }
                }
                pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
            }
        }
        u.add(Some(pts));
        Ok(())
    }
}

impl Study for AucPlan {
    type Outcome = Result<AucOutcome>;
    type Table = Vec<AucRow>;

    fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    fn run_job(&self, job: &Job) -> Result<AucOutcome> {
        let m = &self.models[job.model];
        let n = self.config.n_grid[job.n_index];
        let cov = draw_covariance(&self.config, m, n, job.seed)?;
        let lambdas = self.config.lambda_grid.values(m.p, cov.scheme().min_joint_sample_size()?);
        let (mut o, mut s, mut u) = (Collector::new(), Collector::new(), Collector::new());
        let mut first_err: Option<QuiltError> = None;
        let mut fitted = 0;
        for r in fit_path(&cov, &lambdas, &self.opts) {
            match r {
                Ok((est, _)) => {
                    self.sweep(m, &est, &mut o, &mut s, &mut u)?;
                    fitted += 1;
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        if fitted == 0 {
            return Err(first_err.expect("nonempty grid"));
        }
        Ok(AucOutcome { auc_o: o.area()?, auc_oc_s: s.area()?, auc_oc_u: u.area()? })
    }

    fn summarize(&self, outcomes: Vec<Result<AucOutcome>>) -> Result<Vec<AucRow>> {
        if outcomes.len() != self.jobs.len() {
            return Err(invalid("outcome count does not match the job list"));
        }
        let mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
        let mut rows = Vec::new();
        let mut it = outcomes.into_iter();
        for m in &self.models {
            for &n in &self.config.n_grid {
                let cell: Vec<Result<AucOutcome>> = it.by_ref().take(self.config.replicates).collect();
                let ok: Vec<AucOutcome> = cell.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
                rows.push(AucRow {
                    family: family_name(&self.config),
                    eta_target: m.eta_target,
                    eta: m.scheme.missingness_ratio(),
                    unobserved_edge_share: m.unobserved_edge_share(),
                    p: m.p,
                    n,
                    n_bar: round_robin_min_joint(&m.scheme, n),
                    replicates_ok: ok.len(),
                    failures: cell.len() - ok.len(),
                    auc_o: mean(ok.iter().filter_map(|x| x.auc_o).collect()),
                    auc_oc_s: mean(ok.iter().filter_map(|x| x.auc_oc_s).collect()),
                    auc_oc_u: mean(ok.iter().filter_map(|x| x.auc_oc_u).collect()),
                });
            }
        }
        Ok(rows)
    }
}

/// Runs the ROC study on the calling thread.
pub fn sim_auc(config: &SimConfig) -> Result<Vec<AucRow>> {
    super::run_sequential(&AucPlan::new(config)?)
}
