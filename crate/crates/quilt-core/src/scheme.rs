//! Block-missing observation designs and the pairwise-complete covariance.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::edges::EdgeSet;
use crate::error::{invalid, QuiltError, Result};

/// Symmetric boolean mask over `p × p` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMask {
    p: usize,
    bits: Vec<bool>,
}

impl PairMask {
    pub fn empty(p: usize) -> Self {
        Self { p, bits: alloc::vec![false; p * p] }
    }

    pub fn full(p: usize) -> Self {
        Self { p, bits: alloc::vec![true; p * p] }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.p + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.p + j] = value;
        self.bits[j * self.p + i] = value;
    }

    /// Number of ordered pairs in the mask.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Unordered off-diagonal pairs inside the mask.
    pub fn observed_pairs(&self) -> EdgeSet {
        self.pairs_where(true)
    }

    /// Unordered off-diagonal pairs outside the mask (the strict upper part of O^c).
    pub fn unobserved_pairs(&self) -> EdgeSet {
        self.pairs_where(false)
    }

    fn pairs_where(&self, value: bool) -> EdgeSet {
        let mut e = EdgeSet::new(self.p);
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.get(i, j) == value {
                    let _ = e.insert(i, j);
                }
            }
        }
        e
    }
}

/// The node subsets `V_1..V_K` (0-based, each sorted), the observed pair
/// set they induce, and optionally the realised joint sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationScheme {
    p: usize,
    subsets: Vec<Vec<usize>>,
    observed: PairMask,
    joint_n: Option<Vec<u64>>,
}

impl ObservationScheme {
    /// Builds `O = ∪ V_k × V_k` from 0-based subsets.
    pub fn build(p: usize, subsets: &[Vec<usize>]) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("need at least two variables, got p = {p}")));
        }
        if subsets.is_empty() {
            return Err(invalid("no subsets given"));
        }
        let mut covered = alloc::vec![false; p];
        let mut clean = Vec::with_capacity(subsets.len());
        for (k, s) in subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(invalid(format!("subset {} is empty", k + 1)));
            }
            let mut v = s.clone();
            v.sort_unstable();
            v.dedup();
            for &i in &v {
                if i >= p {
                    return Err(QuiltError::IndexOutOfRange { index: i, p });
                }
                covered[i] = true;
            }
            clean.push(v);
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(invalid(format!("variable {} is not covered by any subset", i + 1)));
        }
        let mut observed = PairMask::empty(p);
        for v in &clean {
            for &i in v {
                for &j in v {
                    observed.bits[i * p + j] = true;
                }
            }
        }
        Ok(Self { p, subsets: clean, observed, joint_n: None })
    }

    /// Every pair observed through a single subset.
    pub fn full(p: usize) -> Result<Self> {
        Self::build(p, &[(0..p).collect()])
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn mask(&self) -> &PairMask {
        &self.observed
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed.get(i, j)
    }

    pub fn joint_n(&self) -> Option<&[u64]> {
        self.joint_n.as_deref()
    }

    pub fn n_ij(&self, i: usize, j: usize) -> Option<u64> {
        self.joint_n.as_ref().map(|n| n[i * self.p + j])
    }

    /// Attaches joint sample sizes. They must agree with the mask: a pair is
    /// observed exactly when it was co-observed more than once.
    pub fn with_joint_n(mut self, joint_n: Vec<u64>) -> Result<Self> {
        let p = self.p;
        if joint_n.len() != p * p {
            return Err(QuiltError::DimensionMismatch { expected: p * p, found: joint_n.len() });
        }
        for i in 0..p {
            for j in 0..p {
                let n = joint_n[i * p + j];
                if n != joint_n[j * p + i] {
                    return Err(invalid("joint sample sizes are not symmetric"));
                }
                if (n > 1) != self.observed.get(i, j) {
                    return Err(invalid(format!(
                        "pair ({}, {}) has joint sample size {n}, inconsistent with the subsets",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        self.joint_n = Some(joint_n);
        Ok(self)
    }

    /// `|O^c| / p²`, counting ordered pairs.
    pub fn missingness_ratio(&self) -> f64 {
        let total = self.p * self.p;
        (total - self.observed.count()) as f64 / total as f64
    }

    /// `n̄ = min_{(i,j) ∈ O} n_ij`.
    pub fn min_joint_sample_size(&self) -> Result<u64> {
        let n = self.joint_n.as_ref().ok_or_else(|| invalid("joint sample sizes are not populated"))?;
        n.iter()
            .zip(self.observed.bits.iter())
            .filter(|(_, &o)| o)
            .map(|(&v, _)| v)
            .min()
            .ok_or_else(|| invalid("observed set is empty"))
    }

    /// Indices of the subsets that contain node `i`.
    pub fn subsets_containing(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.subsets.iter().enumerate().filter(move |(_, s)| s.binary_search(&i).is_ok()).map(|(k, _)| k)
    }
}

/// Samples with an observation indicator per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorData {
    samples: DMatrix<f64>,
    observed: Vec<bool>,
    known_means: Option<Vec<f64>>,
}

impl IndicatorData {
    /// `observed` is row-major `n × p`. Values at unobserved entries are ignored.
    pub fn new(samples: DMatrix<f64>, observed: Vec<bool>) -> Result<Self> {
        let (n, p) = samples.shape();
        if observed.len() != n * p {
            return Err(QuiltError::DimensionMismatch { expected: n * p, found: observed.len() });
        }
        for r in 0..n {
            for c in 0..p {
                if observed[r * p + c] && !samples[(r, c)].is_finite() {
                    return Err(QuiltError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self { samples, observed, known_means: None })
    }

    /// Fully observed data.
    pub fn complete(samples: DMatrix<f64>) -> Result<Self> {
        let len = samples.len();
        Self::new(samples, alloc::vec![true; len])
    }

    pub fn with_known_means(mut self, means: Vec<f64>) -> Result<Self> {
        if means.len() != self.p() {
            return Err(QuiltError::DimensionMismatch { expected: self.p(), found: means.len() });
        }
        self.known_means = Some(means);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn p(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    #[inline]
    pub fn is_observed(&self, r: usize, i: usize) -> bool {
        self.observed[r * self.p() + i]
    }

    pub fn known_means(&self) -> Option<&[f64]> {
        self.known_means.as_deref()
    }

    /// Row indices grouped by their indicator pattern, in order of first
    /// appearance. All-missing rows are dropped.
    pub fn patterns(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let p = self.p();
        let mut index: BTreeMap<&[bool], usize> = BTreeMap::new();
        let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for r in 0..self.n() {
            let row = &self.observed[r * p..(r + 1) * p];
            if !row.iter().any(|&b| b) {
                continue;
            }
            let g = *index.entry(row).or_insert_with(|| {
                groups.push(((0..p).filter(|&c| row[c]).collect(), Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(r);
        }
        groups
    }

    /// Subsets inferred from the missingness: one subset per indicator
    /// pattern seen in at least two rows. A variable not covered that way
    /// becomes a singleton subset.
    pub fn infer_subsets(&self) -> Vec<Vec<usize>> {
        let p = self.p();
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        let mut covered = alloc::vec![false; p];
        for (vars, rows) in self.patterns() {
            if rows.len() >= 2 {
                for &i in &vars {
                    covered[i] = true;
                }
                subsets.push(vars);
            }
        }
        for (i, c) in covered.iter().enumerate() {
            if !c {
                subsets.push(alloc::vec![i]);
            }
        }
        subsets
    }
}

/// Covariance entries known only on the observed set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCovariance {
    values: Vec<Option<f64>>,
    scheme: ObservationScheme,
}

impl PartialCovariance {
    /// Restricts a full symmetric matrix to the scheme's observed set.
    pub fn from_full(sigma: &DMatrix<f64>, scheme: ObservationScheme) -> Result<Self> {
        let p = scheme.p();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(QuiltError::DimensionMismatch { expected: p, found: sigma.nrows() });
        }
        let mut values = alloc::vec![None; p * p];
        for i in 0..p {
            for j in 0..p {
                if scheme.is_observed(i, j) {
                    let v = sigma[(i, j)];
                    if !v.is_finite() {
                        return Err(QuiltError::NonFinite { row: i, col: j });
                    }
                    values[i * p + j] = Some(v);
                }
            }
        }
        Ok(Self { values, scheme })
    }

    /// Builds from row-major optional entries, which must be present exactly on `O`.
    pub fn from_entries(values: Vec<Option<f64>>, scheme: ObservationScheme) -> Result<Self> {
        let p = scheme.p();
        if values.len() != p * p {
            return Err(QuiltError::DimensionMismatch { expected: p * p, found: values.len() });
        }
        for i in 0..p {
            for j in 0..p {
                let v = values[i * p + j];
                if v.is_some() != scheme.is_observed(i, j) {
                    return Err(invalid(format!(
                        "entry ({}, {}) presence does not match the observed set",
                        i + 1,
                        j + 1
                    )));
                }
                if let Some(x) = v {
                    if !x.is_finite() {
                        return Err(QuiltError::NonFinite { row: i, col: j });
                    }
                    if values[j * p + i] != Some(x) {
                        return Err(invalid("covariance entries are not symmetric"));
                    }
                }
            }
        }
        Ok(Self { values, scheme })
    }

    pub fn p(&self) -> usize {
        self.scheme.p()
    }

    pub fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.p() + j]
    }

    /// Dense copy with absent entries set to zero, for solvers that only read `O`.
    pub fn to_dense_zeroed(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| self.get(i, j).unwrap_or(0.0))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p()).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    /// `max_{(i,j) ∈ O} |Σ_ij|`.
    pub fn max_abs_observed(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Pairwise-complete sample covariance `m̂_ij − m̂_i m̂_j` on pairs co-observed
/// more than once. Marginal means use every observation of the variable.
///
/// The subsets of the returned scheme are inferred from the missingness
/// patterns (see [`IndicatorData::infer_subsets`]); use
/// [`observed_covariance_with_scheme`] to supply them instead.
pub fn observed_covariance(data: &IndicatorData) -> Result<PartialCovariance> {
    let acc = accumulate(data)?;
    let subsets = data.infer_subsets();
    let scheme = scheme_from_counts(data.p(), &subsets, &acc.counts)?;
    Ok(finish(data.p(), data.known_means(), acc, scheme))
}

/// As [`observed_covariance`], but checks the data against a given scheme:
/// the co-observed pairs must be exactly the scheme's observed set.
pub fn observed_covariance_with_scheme(data: &IndicatorData, scheme: &ObservationScheme) -> Result<PartialCovariance> {
    if scheme.p() != data.p() {
        return Err(QuiltError::DimensionMismatch { expected: scheme.p(), found: data.p() });
    }
    let acc = accumulate(data)?;
    let scheme = scheme.clone().with_joint_n(acc.counts.clone()).map_err(|e| match e {
        QuiltError::InvalidInput(m) => invalid(format!("data does not match the scheme: {m}")),
        other => other,
    })?;
    Ok(finish(data.p(), data.known_means(), acc, scheme))
}

/// Sufficient statistics of the samples drawn on one subset `V_k`: the
/// count, the coordinate sums, and the raw cross-product matrix, all indexed
/// in the subset's own (sorted) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMoments {
    pub n: u64,
    pub sum: Vec<f64>,
    pub cross: DMatrix<f64>,
}

/// The estimator of [`observed_covariance_with_scheme`] computed from
/// per-subset sufficient statistics instead of raw rows. `moments[k]`
/// belongs to `scheme.subsets()[k]`.
pub fn covariance_from_moments(scheme: &ObservationScheme, moments: &[SubsetMoments]) -> Result<PartialCovariance> {
    if moments.len() != scheme.k() {
        return Err(QuiltError::DimensionMismatch { expected: scheme.k(), found: moments.len() });
    }
    let p = scheme.p();
    let mut acc = Sums { cross: DMatrix::zeros(p, p), counts: alloc::vec![0; p * p], col_sum: alloc::vec![0.0; p] };
    for (v, m) in scheme.subsets().iter().zip(moments) {
        let q = v.len();
        if m.sum.len() != q || m.cross.shape() != (q, q) {
            return Err(QuiltError::DimensionMismatch { expected: q, found: m.sum.len() });
        }
        if m.sum.iter().chain(m.cross.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("subset moments must be finite"));
        }
        for (a, &i) in v.iter().enumerate() {
            acc.col_sum[i] += m.sum[a];
            for (b, &j) in v.iter().enumerate() {
                acc.cross[(i, j)] += m.cross[(a, b)];
                acc.counts[i * p + j] += m.n;
            }
        }
    }
    check_counts(p, &acc.counts)?;
    let scheme = scheme.clone().with_joint_n(acc.counts.clone())?;
    Ok(finish(p, None, acc, scheme))
}

struct Sums {
    cross: DMatrix<f64>,
    counts: Vec<u64>,
    col_sum: Vec<f64>,
}

fn accumulate(data: &IndicatorData) -> Result<Sums> {
    let p = data.p();
    let mut cross = DMatrix::<f64>::zeros(p, p);
    let mut counts = alloc::vec![0u64; p * p];
    let mut col_sum = alloc::vec![0.0; p];
    let x = data.samples();
    for (vars, rows) in data.patterns() {
        let block = DMatrix::from_fn(rows.len(), vars.len(), |r, c| x[(rows[r], vars[c])]);
        let gram = block.transpose() * &block;
        for (a, &i) in vars.iter().enumerate() {
            col_sum[i] += block.column(a).sum();
            for (b, &j) in vars.iter().enumerate() {
                cross[(i, j)] += gram[(a, b)];
                counts[i * p + j] += rows.len() as u64;
            }
        }
    }
    check_counts(p, &counts)?;
    Ok(Sums { cross, counts, col_sum })
}

fn check_counts(p: usize, counts: &[u64]) -> Result<()> {
    for i in 0..p {
        let n = counts[i * p + i];
        if n <= 1 {
            return Err(QuiltError::UnobservedVariable { index: i, count: n });
        }
    }
    Ok(())
}

fn scheme_from_counts(p: usize, subsets: &[Vec<usize>], counts: &[u64]) -> Result<ObservationScheme> {
    // Inferred subsets cover every pattern seen twice; pairs co-observed
    // more than once only across distinct single-row patterns are added as
    // two-node subsets so that O = ∪ V_k × V_k still holds.
    let mut base = ObservationScheme::build(p, subsets)?;
    let mut extra: Vec<Vec<usize>> = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if counts[i * p + j] > 1 && !base.is_observed(i, j) {
                extra.push(alloc::vec![i, j]);
            }
        }
    }
    if !extra.is_empty() {
        let mut all = subsets.to_vec();
        all.extend(extra);
        base = ObservationScheme::build(p, &all)?;
    }
    // Pairs inside an inferred block are co-observed at least twice by construction.
    base.with_joint_n(counts.to_vec())
}

fn finish(p: usize, known_means: Option<&[f64]>, acc: Sums, scheme: ObservationScheme) -> PartialCovariance {
    let means: Vec<f64> = match known_means {
        Some(mu) => mu.to_vec(),
        None => (0..p).map(|i| acc.col_sum[i] / acc.counts[i * p + i] as f64).collect(),
    };
    let mut values = alloc::vec![None; p * p];
    for i in 0..p {
        for j in i..p {
            let n = acc.counts[i * p + j];
            if n > 1 {
                let m_ij = acc.cross[(i, j)] / n as f64;
                let v = m_ij - means[i] * means[j];
                values[i * p + j] = Some(v);
                values[j * p + i] = Some(v);
            }
        }
    }
    PartialCovariance { values, scheme }
}
