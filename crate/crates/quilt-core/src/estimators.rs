//! Thresholded graph estimators, distortion diagnostics, sample-size
//! formulas, and graph-comparison metrics.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::edges::EdgeSet;
use crate::error::{invalid, QuiltError, Result};
use crate::gqlasso::{gqlasso_fit_with, GqlassoOptions, PenaltySpec};
use crate::madgq::PrecisionEstimate;
use crate::reco::{self, pcor_transform, RecoOptions, RecoResult};
use crate::rng;
use crate::scheme::{observed_covariance_with_scheme, IndicatorData, ObservationScheme};

/// `{(i, j) : i < j, |m_ij| > τ}`, optionally intersected with `restrict`.
pub fn threshold_edges(m: &DMatrix<f64>, tau: f64, restrict: Option<&EdgeSet>) -> Result<EdgeSet> {
    if !(tau >= 0.0) {
        return Err(invalid(format!("threshold must be nonnegative, got {tau}")));
    }
    let p = m.nrows();
    let mut out = EdgeSet::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if m[(i, j)].abs() > tau && restrict.is_none_or(|r| r.contains(i, j)) {
                out.insert(i, j)?;
            }
        }
    }
    Ok(out)
}

/// `Ê_S`: thresholded observed part plus the known-diagonal RECO candidates.
pub fn estimate_graph_s(
    theta_hat: &PrecisionEstimate,
    scheme: &ObservationScheme,
    true_diag: &[f64],
    tau: f64,
    xi: f64,
    opts: RecoOptions,
) -> Result<(EdgeSet, RecoResult)> {
    let observed = threshold_edges(theta_hat.theta(), tau, Some(&scheme.mask().observed_pairs()))?;
    let r = reco::reco_known_diag(theta_hat, scheme, true_diag, xi, opts)?;
    Ok((observed.union(&r.candidate_edges), r))
}

/// `Ê_U`: thresholded observed part plus the unknown-diagonal RECO candidates. With
/// `pcor`, both the threshold and the band apply to partial correlations.
pub fn estimate_graph_u(
    theta_hat: &PrecisionEstimate,
    scheme: &ObservationScheme,
    tau: f64,
    xi1: f64,
    xi2: f64,
    pcor: bool,
    opts: RecoOptions,
) -> Result<(EdgeSet, RecoResult)> {
    let source = if pcor { pcor_transform(theta_hat.theta())? } else { theta_hat.theta().clone() };
    let observed = threshold_edges(&source, tau, Some(&scheme.mask().observed_pairs()))?;
    let r = reco::reco_unknown_diag(theta_hat, scheme, xi1, xi2, pcor, opts)?;
    Ok((observed.union(&r.candidate_edges), r))
}

/// Graph among the observed block `A` when the rest is latent:
/// `{(i, j) : |[Σ_AA⁻¹]_ij| > ν/2}`.
pub fn latent_subgraph(sigma_aa: &DMatrix<f64>, nu: f64) -> Result<EdgeSet> {
    if !(nu > 0.0) {
        return Err(invalid("ν must be positive"));
    }
    let inv = crate::linalg::spd_inverse(sigma_aa)?;
    threshold_edges(&inv, nu / 2.0, None)
}

/// Smallest `τ` with `|{(i,j) ∈ O, i<j : |θ_ij| > τ}| ≤ ⌊π |O|⌋`, where
/// `|O|` counts unordered off-diagonal observed pairs.
pub fn tau_from_sparsity(theta_hat: &DMatrix<f64>, scheme: &ObservationScheme, pi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(invalid(format!("target proportion must lie in [0, 1], got {pi}")));
    }
    let pairs = scheme.mask().observed_pairs();
    let mut mags: Vec<f64> = pairs.iter().map(|(i, j)| theta_hat[(i, j)].abs()).filter(|v| *v > 0.0).collect();
    let budget = libm::floor(pi * pairs.len() as f64) as usize;
    if mags.len() <= budget {
        return Ok(0.0);
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[budget])
}

/// Distortion statistics of `Θ̃` against the true `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionStats {
    /// `max_{(i,j) ∈ O, i≠j} |Θ_ij − Θ̃_ij|`.
    pub delta: f64,
    /// Smallest nonzero off-diagonal `|Θ_ij|` over `O`.
    pub nu: f64,
    pub delta_pcor: f64,
    pub nu_pcor: f64,
    /// Smallest diagonal drop `Θ_ii − Θ̄_ii` among distorted nodes.
    pub omega: Option<f64>,
    /// Half the smallest in-band complement magnitude.
    pub psi1: Option<f64>,
    /// Half the gap between `ν` and the largest in-band complement magnitude.
    pub psi2: Option<f64>,
}

/// Statistics are taken literally from their definitions. `zero_tol` decides
/// which entries count as nonzero and which diagonals count as distorted.
pub fn distortion_stats(
    theta: &PrecisionEstimate,
    theta_tilde: &PrecisionEstimate,
    scheme: &ObservationScheme,
    zero_tol: f64,
) -> Result<DistortionStats> {
    let p = scheme.p();
    if theta.p() != p || theta_tilde.p() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: theta.p().max(theta_tilde.p()) });
    }
    let t = theta.theta();
    let tt = theta_tilde.theta();
    let r = pcor_transform(t)?;
    let rt = pcor_transform(tt)?;
    let (mut delta, mut delta_pcor) = (0.0_f64, 0.0_f64);
    let (mut nu, mut nu_pcor) = (f64::INFINITY, f64::INFINITY);
    for (i, j) in scheme.mask().observed_pairs().iter() {
        delta = delta.max((t[(i, j)] - tt[(i, j)]).abs());
        delta_pcor = delta_pcor.max((r[(i, j)] - rt[(i, j)]).abs());
        if t[(i, j)].abs() > zero_tol {
            nu = nu.min(t[(i, j)].abs());
            nu_pcor = nu_pcor.min(r[(i, j)].abs());
        }
    }
    if !nu.is_finite() {
        return Err(invalid("no edge among observed pairs; ν is undefined"));
    }

    let complements = reco::subset_complements(theta_tilde, scheme)?;
    let bar = reco::theta_bar(scheme, &complements);
    let omega = (0..p)
        .filter(|&i| bar[i] < t[(i, i)] - zero_tol)
        .map(|i| (t[(i, i)] - bar[i]).abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &complements {
        let n = c.nrows();
        for a in 0..n {
            for b in 0..n {
                let x = c[(a, b)].abs();
                if a != b && x > zero_tol && x < nu - zero_tol {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
    }
    let (psi1, psi2) = if lo.is_finite() { (Some(lo / 2.0), Some((nu - hi) / 2.0)) } else { (None, None) };
    Ok(DistortionStats { delta, nu, delta_pcor, nu_pcor, omega, psi1, psi2 })
}

/// User-supplied constants for the sample-size formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeConstants {
    pub c_o: f64,
    pub c_s: f64,
    pub c_u: f64,
}

impl Default for SampleSizeConstants {
    fn default() -> Self {
        Self { c_o: 1.0, c_s: 1.0, c_u: 1.0 }
    }
}

/// `None` marks an unbounded requirement (a vanishing margin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinSampleSizes {
    pub observed: Option<f64>,
    pub superset: Option<f64>,
    pub candidates: Option<f64>,
}

/// Gaussian-case sample sizes: `C_O log p / (ν/2 − δ)²`,
/// `C_S d p log p / ω²`, `C_U d p log p / min(ψ1, ψ2)²`.
pub fn min_sample_sizes(stats: &DistortionStats, p: usize, d: usize, k: SampleSizeConstants) -> Result<MinSampleSizes> {
    let margin = stats.nu / 2.0 - stats.delta;
    if !(margin > 0.0) {
        return Err(invalid(format!("δ = {} is not below ν/2 = {}", stats.delta, stats.nu / 2.0)));
    }
    let log_p = libm::log(p as f64);
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let dpl = d as f64 * p as f64 * log_p;
    let over = |c: f64, m: Option<f64>| m.filter(|m| *m > 0.0).and_then(|m| finite(c * dpl / (m * m)));
    Ok(MinSampleSizes {
        observed: finite(k.c_o * log_p / (margin * margin)),
        superset: over(k.c_s, stats.omega),
        candidates: over(
            k.c_u,
            match (stats.psi1, stats.psi2) {
                (Some(a), Some(b)) => Some(a.min(b)),
                _ => None,
            },
        ),
    })
}

/// Confusion-based rates over unordered off-diagonal pairs. Rates with an
/// empty denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub fpp: Option<f64>,
    pub fnp: Option<f64>,
    pub sens: Option<f64>,
    pub spec: Option<f64>,
}

pub fn compare_graphs(estimated: &EdgeSet, truth: &EdgeSet, restrict: Option<&EdgeSet>) -> Result<GraphMetrics> {
    if estimated.p() != truth.p() {
        return Err(QuiltError::DimensionMismatch { expected: truth.p(), found: estimated.p() });
    }
    let p = truth.p();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut visit = |i: usize, j: usize| match (estimated.contains(i, j), truth.contains(i, j)) {
        (true, true) => tp += 1,
        (true, false) => fp += 1,
        (false, false) => tn += 1,
        (false, true) => fn_ += 1,
    };
    match restrict {
        Some(r) => r.iter().for_each(|(i, j)| visit(i, j)),
        None => (0..p).for_each(|i| ((i + 1)..p).for_each(|j| visit(i, j))),
    }
    let ratio = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    Ok(GraphMetrics {
        tp,
        fp,
        tn,
        fn_,
        fpp: ratio(fp, fp + tn),
        spec: ratio(tn, fp + tn),
        fnp: ratio(fn_, tp + fn_),
        sens: ratio(tp, tp + fn_),
    })
}

/// Area under the ROC curve through `(1 − spec, sens)` points, anchored at
/// `(0,0)` and `(1,1)`, using the running-maximum envelope and trapezoids.
pub fn roc_auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("no ROC points"));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    for &(x, y) in points {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(invalid(format!("ROC point ({x}, {y}) outside the unit square")));
        }
        pts.push((x, y));
    }
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Points sharing an x stay separate so that vertical steps are kept;
    // the zero-width trapezoids between them add nothing.
    let mut best = 0.0_f64;
    for pt in pts.iter_mut() {
        best = best.max(pt.1);
        pt.1 = best;
    }
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

/// Largest bootstrap standard deviation of the off-diagonal complement
/// entries `Θ̂^(k)_{ij}`, resampling rows within each missingness pattern.
pub fn bootstrap_complement_sd(
    data: &IndicatorData,
    scheme: &ObservationScheme,
    lambda: f64,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if resamples < 2 {
        return Err(invalid("need at least two bootstrap resamples"));
    }
    let groups = data.patterns();
    let mut rng = rng::rng(seed);
    let sizes: Vec<usize> = scheme.subsets().iter().map(|v| v.len()).collect();
    let mut mean: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    let mut m2 = mean.clone();
    let mut count = 0usize;
    let opts = GqlassoOptions::default();
    for _ in 0..resamples {
        let mut rows = Vec::with_capacity(data.n());
        for (_, members) in &groups {
            for _ in 0..members.len() {
                rows.push(members[rng.random_range(0..members.len())]);
            }
        }
        let (x, ind) = subsample(data, &rows);
        let boot = IndicatorData::new(x, ind)?;
        let Ok(sigma) = observed_covariance_with_scheme(&boot, scheme) else { continue };
        let Ok((fit, _)) = gqlasso_fit_with(&sigma, &PenaltySpec::Scalar(lambda), &opts) else { continue };
        let comps = reco::subset_complements(&fit, scheme)?;
        count += 1;
        for (k, c) in comps.iter().enumerate() {
            for (idx, v) in c.iter().enumerate() {
                let d = v - mean[k][idx];
                mean[k][idx] += d / count as f64;
                m2[k][idx] += d * (v - mean[k][idx]);
            }
        }
    }
    if count < 2 {
        return Err(QuiltError::Numerical("fewer than two bootstrap fits succeeded".into()));
    }
    let mut worst = 0.0_f64;
    for (k, m) in m2.iter().enumerate() {
        let n = sizes[k];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    worst = worst.max(libm::sqrt(m[(a, b)] / (count - 1) as f64));
                }
            }
        }
    }
    Ok(worst)
}

fn subsample(data: &IndicatorData, rows: &[usize]) -> (DMatrix<f64>, Vec<bool>) {
    let p = data.p();
    let x = DMatrix::from_fn(rows.len(), p, |r, c| data.samples()[(rows[r], c)]);
    let mut ind = Vec::with_capacity(rows.len() * p);
    for &r in rows {
        for c in 0..p {
            ind.push(data.is_observed(r, c));
        }
    }
    (x, ind)
}

/// Band `(2 s, ν − 2 s)` from a bootstrap standard deviation `s`.
pub fn bootstrap_band(max_sd: f64, nu: f64) -> Result<(f64, f64)> {
    let (a, b) = (2.0 * max_sd, nu - 2.0 * max_sd);
    if !(a < b) {
        return Err(invalid(format!("bootstrap band is empty: 2·sd = {a} ≥ ν − 2·sd = {b}")));
    }
    Ok((a, b))
}
