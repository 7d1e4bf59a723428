//! Precision matrices on generated graphs, chained observation schemes, and
//! Gaussian sampling under a scheme.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::edges::EdgeSet;
use crate::error::{invalid, QuiltError, Result};
use crate::linalg::{cholesky, submatrix};
use crate::madgq::PrecisionEstimate;
use crate::rng::{derive_seed, rng};
use crate::scheme::{IndicatorData, ObservationScheme, SubsetMoments};

/// Probability that an edge receives a positive precision entry.
pub const POSITIVE_SHARE: f64 = 0.25;
pub const PD_RETRY_CAP: usize = 20;

#[derive(Debug, Clone)]
pub struct SimInstance {
    pub theta: PrecisionEstimate,
    /// The edge set after relabelling.
    pub edges: EdgeSet,
    /// Original node `i` became node `permutation[i]`.
    pub permutation: Vec<usize>,
    pub positive: usize,
    pub negative: usize,
    /// Sign draws needed to reach a positive definite matrix.
    pub attempts: usize,
}

/// Unit diagonal, `±1/p` on edges (positive with probability 1/4), rows and
/// columns randomly permuted. Sign draws are repeated up to the retry cap if
/// the matrix is not positive definite; magnitudes are never changed.
pub fn precision_from_graph(edges: &EdgeSet, seed: u64) -> Result<SimInstance> {
    let p = edges.p();
    if p < 2 {
        return Err(invalid(format!("need p ≥ 2, got {p}")));
    }
    let mag = 1.0 / p as f64;
    for attempt in 0..PD_RETRY_CAP {
        let mut r = rng(derive_seed(seed, &[attempt as u64]));
        let mut theta = DMatrix::identity(p, p);
        let mut positive = 0;
        for (i, j) in edges.iter() {
            let v = if r.random::<f64>() < POSITIVE_SHARE {
                positive += 1;
                mag
            } else {
                -mag
            };
            theta[(i, j)] = v;
            theta[(j, i)] = v;
        }
        if cholesky(&theta).is_none() {
            continue;
        }
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut r);
        let mut permuted = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                permuted[(perm[i], perm[j])] = theta[(i, j)];
            }
        }
        return Ok(SimInstance {
            theta: PrecisionEstimate::new(permuted)?,
            edges: edges.relabel(&perm),
            permutation: perm,
            positive,
            negative: edges.len() - positive,
            attempts: attempt + 1,
        });
    }
    Err(QuiltError::NotPositiveDefinite)
}

/// Windows `V_k = {⌊(k−1)(p−q0)/(K−1)⌋, …, q0 − 1 + ⌈(k−1)(p−q0)/(K−1)⌉}`
/// (0-based), requiring `p/K < q0 < p`.
pub fn chained_scheme(p: usize, k: usize, q0: usize) -> Result<ObservationScheme> {
    if k < 2 {
        return Err(invalid(format!("need K ≥ 2, got {k}")));
    }
    if !(q0 * k > p && q0 < p) {
        return Err(invalid(format!("need p/K < q0 < p, got p = {p}, K = {k}, q0 = {q0}")));
    }
    let span = p - q0;
    let subsets: Vec<Vec<usize>> = (0..k)
        .map(|t| {
            let num = t * span;
            let lo = num / (k - 1);
            let hi = q0 - 1 + num.div_ceil(k - 1);
            (lo..=hi).collect()
        })
        .collect();
    ObservationScheme::build(p, &subsets)
}

/// The legal `q0` whose chained scheme has missingness ratio closest to
/// `eta`; ties go to the larger `q0`.
pub fn q0_for_eta(p: usize, k: usize, eta: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&eta) {
        return Err(invalid(format!("η must lie in [0, 1), got {eta}")));
    }
    let mut best: Option<(usize, f64)> = None;
    for q0 in (p / k + 1)..p {
        let Ok(s) = chained_scheme(p, k, q0) else { continue };
        let gap = (s.missingness_ratio() - eta).abs();
        if best.is_none_or(|(_, g)| gap <= g) {
            best = Some((q0, gap));
        }
    }
    best.map(|(q, _)| q).ok_or_else(|| invalid(format!("no chained scheme exists for p = {p}, K = {k}")))
}

/// `n` draws from `N(0, Θ⁻¹)`; sample `r` is observed on subset `r mod K` only.
/// Only the observed coordinates are drawn, from the marginal of that subset.
pub fn sample_gaussian(
    theta: &PrecisionEstimate,
    scheme: &ObservationScheme,
    n: usize,
    seed: u64,
) -> Result<IndicatorData> {
    let p = scheme.p();
    if theta.p() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: theta.p() });
    }
    let k = scheme.k();
    let mut counts = alloc::vec![0usize; p];
    for (t, v) in scheme.subsets().iter().enumerate() {
        let n_t = n / k + usize::from(t < n % k);
        for &i in v {
            counts[i] += n_t;
        }
    }
    if let Some(i) = counts.iter().position(|&c| c < 2) {
        return Err(QuiltError::UnobservedVariable { index: i, count: counts[i] as u64 });
    }
    let sigma = theta.covariance();
    let factors: Vec<DMatrix<f64>> = scheme
        .subsets()
        .iter()
        .map(|v| cholesky(&submatrix(&sigma, v, v)).map(|c| c.l()).ok_or(QuiltError::NotPositiveDefinite))
        .collect::<Result<_>>()?;
    let mut r = rng(seed);
    let mut samples = DMatrix::zeros(n, p);
    let mut observed = alloc::vec![false; n * p];
    let mut z = Vec::with_capacity(p);
    for row in 0..n {
        let t = row % k;
        let v = &scheme.subsets()[t];
        let l = &factors[t];
        z.clear();
        z.extend((0..v.len()).map(|_| r.sample::<f64, _>(StandardNormal)));
        for (a, &i) in v.iter().enumerate() {
            let mut x = 0.0;
            for b in 0..=a {
                x += l[(a, b)] * z[b];
            }
            samples[(row, i)] = x;
            observed[row * p + i] = true;
        }
    }
    IndicatorData::new(samples, observed)
}

/// Per-subset sufficient statistics with the same distribution as those of
/// [`sample_gaussian`] (round-robin counts `n_k`), drawn in `O(|V_k|³)`
/// regardless of `n`: the sum is `N(0, n_k Σ_k)` and, independently, the
/// scatter about the subset mean is Wishart(`n_k − 1`, `Σ_k`) by the
/// Bartlett decomposition. Subsets with `n_k ≤ |V_k|` are drawn row by row.
pub fn sample_moments(
    theta: &PrecisionEstimate,
    scheme: &ObservationScheme,
    n: u64,
    seed: u64,
) -> Result<Vec<SubsetMoments>> {
    let p = scheme.p();
    if theta.p() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: theta.p() });
    }
    let k = scheme.k() as u64;
    let sigma = theta.covariance();
    let mut out = Vec::with_capacity(scheme.k());
    for (t, v) in scheme.subsets().iter().enumerate() {
        let n_t = n / k + u64::from((t as u64) < n % k);
        let q = v.len();
        let l = cholesky(&submatrix(&sigma, v, v)).ok_or(QuiltError::NotPositiveDefinite)?.l();
        let mut r = rng(derive_seed(seed, &[t as u64]));
        let mut normal = || r.sample::<f64, _>(StandardNormal);
        if n_t <= q as u64 {
            let mut sum = alloc::vec![0.0; q];
            let mut cross = DMatrix::zeros(q, q);
            for _ in 0..n_t {
                let z = DVector::from_fn(q, |_, _| normal());
                let x = &l * z;
                for a in 0..q {
                    sum[a] += x[a];
                }
                cross += &x * x.transpose();
            }
            out.push(SubsetMoments { n: n_t, sum, cross });
            continue;
        }
        let z = DVector::from_fn(q, |_, _| normal());
        let mut a = DMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..i {
                a[(i, j)] = normal();
            }
        }
        let mut r = rng(derive_seed(seed, &[t as u64, 1]));
        for i in 0..q {
            let df = (n_t - 1 - i as u64) as f64;
            let chi: f64 = ChiSquared::new(df).map_err(|e| QuiltError::Numerical(format!("{e}")))?.sample(&mut r);
            a[(i, i)] = libm::sqrt(chi);
        }
        let la = &l * a;
        let scatter = &la * la.transpose();
        let s = (&l * z) * libm::sqrt(n_t as f64);
        let cross = scatter + &s * s.transpose() / n_t as f64;
        out.push(SubsetMoments { n: n_t, sum: s.iter().copied().collect(), cross });
    }
    Ok(out)
}
