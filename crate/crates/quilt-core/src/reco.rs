//! Recursive-complement (RECO) recovery of edges among never co-observed
//! pairs, from distortions in the subset-wise Schur complements of `Θ̃`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::edges::EdgeSet;
use crate::error::{invalid, QuiltError, Result};
use crate::linalg::{complement, schur_complement};
use crate::madgq::{PartitionABC, PrecisionEstimate};
use crate::scheme::ObservationScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoMode {
    /// Diagonal of `Θ` known.
    KnownDiag,
    /// Diagonal unknown, band test on precision entries.
    UnknownDiag,
    /// Diagonal unknown, band test on standardised (partial-correlation) complements.
    UnknownDiagPcor,
    K2Known,
    K2Unknown,
}

impl RecoMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoMode::KnownDiag => "known_diag",
            RecoMode::UnknownDiag => "unknown_diag",
            RecoMode::UnknownDiagPcor => "unknown_diag_pcor",
            RecoMode::K2Known => "k2_known",
            RecoMode::K2Unknown => "k2_unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoResult {
    pub mode: RecoMode,
    /// `𝒟_ξ`, `ℋ_{ξ1,ξ2}`, or `A* ∪ C*` / `A_ν ∪ C_ν` in the two-block case.
    pub flagged_nodes: Vec<usize>,
    /// `𝒮` or `𝒰`, always inside the strict upper part of `O^c`.
    pub candidate_edges: EdgeSet,
    /// `M` or `N`: candidate edges guaranteed to be true.
    pub lower_bound: usize,
    /// `Θ̃^(k)` for every subset, in scheme order.
    pub complements: Vec<DMatrix<f64>>,
    /// `Θ̄_ii`, when the diagonal comparison was made.
    pub theta_bar: Option<Vec<f64>>,
    /// Two-block runs report `m = min(|A*|, |C*|)`.
    pub min_side: Option<usize>,
    /// Every node was flagged (e.g. `ξ > 0` with the diagonal known), so the candidate set is all of `O^c`.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoOptions {
    /// Absolute margin applied to every strict comparison, absorbing solver noise.
    pub slack: f64,
}

impl RecoOptions {
    pub const EXACT: RecoOptions = RecoOptions { slack: 0.0 };
    /// Sized for completions from the default MAD_GQ tolerance (entrywise noise ~1e-9).
    pub const POPULATION: RecoOptions = RecoOptions { slack: 1e-7 };
}

impl Default for RecoOptions {
    fn default() -> Self {
        Self::EXACT
    }
}

/// `Θ̃^(k)` for each subset; `Θ̃` itself when a subset is all of `V`.
pub fn subset_complements(theta_tilde: &PrecisionEstimate, scheme: &ObservationScheme) -> Result<Vec<DMatrix<f64>>> {
    check_dims(theta_tilde, scheme)?;
    let p = scheme.p();
    scheme.subsets().iter().map(|v| schur_complement(theta_tilde.theta(), v, &complement(p, v))).collect()
}

fn check_dims(theta: &PrecisionEstimate, scheme: &ObservationScheme) -> Result<()> {
    if theta.p() != scheme.p() {
        return Err(QuiltError::DimensionMismatch { expected: scheme.p(), found: theta.p() });
    }
    Ok(())
}

/// `Ŏ^c ∩ (rows × V ∪ V × cols)`-style selections are built from this list.
fn upper_unobserved(scheme: &ObservationScheme) -> EdgeSet {
    scheme.mask().unobserved_pairs()
}

/// Nodes `i` with some subset `V_k ∋ i` whose complement is entirely unobserved from `i`.
fn fully_cut(scheme: &ObservationScheme, i: usize) -> bool {
    let p = scheme.p();
    scheme.subsets_containing(i).any(|k| {
        let v = &scheme.subsets()[k];
        (0..p).filter(|j| v.binary_search(j).is_err()).all(|j| !scheme.is_observed(i, j))
    })
}

/// Guaranteed number of true `O^c` edges incident to `W = {i ∈ base : fully_cut(i)}`.
///
/// Every node of `W` carries at least one true edge into `O^c`, and one edge
/// can serve two nodes of `W` only if it lies in `Ω = Ŏ^c ∩ (W × W)`. So at
/// least `|W| − ν(Ω)` edges are needed, `ν` being the maximum matching. We
/// bound `ν` above by the smaller of the two index projections of `Ω` (each
/// is a vertex cover) and by half the nodes `Ω` touches. When the
/// projections are disjoint this is at least `max_t |proj_t(Ω)|`.
fn projection_bound(scheme: &ObservationScheme, base: &[usize]) -> usize {
    let bar: BTreeSet<usize> = base.iter().copied().filter(|&i| fully_cut(scheme, i)).collect();
    let mut rows = BTreeSet::new();
    let mut cols = BTreeSet::new();
    for (i, j) in upper_unobserved(scheme).iter() {
        if bar.contains(&i) && bar.contains(&j) {
            rows.insert(i);
            cols.insert(j);
        }
    }
    let touched = rows.union(&cols).count();
    let matching_cap = rows.len().min(cols.len()).min(touched / 2);
    bar.len() - matching_cap
}

/// RECO with the diagonal known: flags nodes whose `Θ̄_ii` falls below `Θ_ii + ξ`. `true_diag` is `diag(Θ)`.
pub fn reco_known_diag(
    theta_tilde: &PrecisionEstimate,
    scheme: &ObservationScheme,
    true_diag: &[f64],
    xi: f64,
    opts: RecoOptions,
) -> Result<RecoResult> {
    let p = scheme.p();
    if true_diag.len() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: true_diag.len() });
    }
    if let Some(i) = true_diag.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(invalid(format!("true diagonal entry {} must be positive", i + 1)));
    }
    if !xi.is_finite() {
        return Err(invalid("ξ must be finite"));
    }
    let complements = subset_complements(theta_tilde, scheme)?;
    let theta_bar = theta_bar(scheme, &complements);
    let flagged_at =
        |shift: f64| -> Vec<usize> { (0..p).filter(|&i| theta_bar[i] < true_diag[i] + shift - opts.slack).collect() };
    let flagged = flagged_at(xi);
    let d0 = if xi == 0.0 { flagged.clone() } else { flagged_at(0.0) };
    let in_d: BTreeSet<usize> = flagged.iter().copied().collect();
    let candidate_edges = filter_pairs(scheme, |i, j| in_d.contains(&i) && in_d.contains(&j));
    let lower_bound = projection_bound(scheme, &d0).min(candidate_edges.len());
    Ok(RecoResult {
        mode: RecoMode::KnownDiag,
        saturated: flagged.len() == p,
        flagged_nodes: flagged,
        candidate_edges,
        lower_bound,
        complements,
        theta_bar: Some(theta_bar),
        min_side: None,
    })
}

/// `Θ̄_ii = max_{k ∋ i} Θ̃^(k)_{i_k i_k}`.
pub fn theta_bar(scheme: &ObservationScheme, complements: &[DMatrix<f64>]) -> Vec<f64> {
    let p = scheme.p();
    let mut bar = alloc::vec![f64::NEG_INFINITY; p];
    for (v, c) in scheme.subsets().iter().zip(complements) {
        for (a, &i) in v.iter().enumerate() {
            bar[i] = bar[i].max(c[(a, a)]);
        }
    }
    bar
}

fn filter_pairs(scheme: &ObservationScheme, keep: impl Fn(usize, usize) -> bool) -> EdgeSet {
    let mut out = EdgeSet::new(scheme.p());
    for (i, j) in upper_unobserved(scheme).iter() {
        if keep(i, j) {
            let _ = out.insert(i, j);
        }
    }
    out
}

/// RECO without the diagonal: flags nodes whose every complement row holds an entry with
/// magnitude strictly inside `(ξ1, ξ2)`. With `pcor`, complements are first
/// standardised to partial correlations.
///
/// The lower bound is evaluated on the run's own flagged set; with
/// `ξ1 = 0, ξ2 = ν` this is the bound `N`.
pub fn reco_unknown_diag(
    theta_tilde: &PrecisionEstimate,
    scheme: &ObservationScheme,
    xi1: f64,
    xi2: f64,
    pcor: bool,
    opts: RecoOptions,
) -> Result<RecoResult> {
    if !(xi1.is_finite() && xi2.is_finite()) || xi1 < 0.0 {
        return Err(invalid("band limits must be finite with ξ1 ≥ 0"));
    }
    if xi1 >= xi2 {
        return Err(invalid(format!("need ξ1 < ξ2, got ξ1 = {xi1}, ξ2 = {xi2}")));
    }
    let p = scheme.p();
    let complements = subset_complements(theta_tilde, scheme)?;
    let views: Vec<DMatrix<f64>> =
        if pcor { complements.iter().map(pcor_transform).collect::<Result<_>>()? } else { complements.clone() };
    let mut flagged = Vec::new();
    for i in 0..p {
        let ok = scheme.subsets_containing(i).all(|k| {
            let v = &scheme.subsets()[k];
            let a = v.binary_search(&i).expect("member");
            let m = &views[k];
            (0..v.len()).any(|b| {
                let x = m[(a, b)].abs();
                b != a && x > xi1 + opts.slack && x < xi2 - opts.slack
            })
        });
        if ok {
            flagged.push(i);
        }
    }
    let in_h: BTreeSet<usize> = flagged.iter().copied().collect();
    let candidate_edges = filter_pairs(scheme, |i, j| in_h.contains(&i) || in_h.contains(&j));
    let lower_bound = projection_bound(scheme, &flagged).min(candidate_edges.len());
    Ok(RecoResult {
        mode: if pcor { RecoMode::UnknownDiagPcor } else { RecoMode::UnknownDiag },
        saturated: flagged.len() == p,
        flagged_nodes: flagged,
        candidate_edges,
        lower_bound,
        complements,
        theta_bar: None,
        min_side: None,
    })
}

fn k2_complements(theta_tilde: &PrecisionEstimate, part: &PartitionABC) -> Result<Vec<DMatrix<f64>>> {
    if theta_tilde.p() != part.p() {
        return Err(QuiltError::DimensionMismatch { expected: part.p(), found: theta_tilde.p() });
    }
    subset_complements(theta_tilde, &part.scheme()?)
}

fn cross(rows: &[usize], cols: &[usize], p: usize) -> EdgeSet {
    let mut e = EdgeSet::new(p);
    for &i in rows {
        for &j in cols {
            let _ = e.insert(i, j);
        }
    }
    e
}

/// Two-block superset `A* × C*` from diagonal drops of `Θ̃` against `diag(Θ)`.
pub fn reco_k2_known(
    theta_tilde: &PrecisionEstimate,
    true_diag: &[f64],
    part: &PartitionABC,
    opts: RecoOptions,
) -> Result<RecoResult> {
    let p = part.p();
    if true_diag.len() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: true_diag.len() });
    }
    let complements = k2_complements(theta_tilde, part)?;
    let t = theta_tilde.theta();
    let dropped = |i: &&usize| t[(**i, **i)] < true_diag[**i] - opts.slack;
    let a_star: Vec<usize> = part.a.iter().filter(dropped).copied().collect();
    let c_star: Vec<usize> = part.c.iter().filter(dropped).copied().collect();
    let candidate_edges = cross(&a_star, &c_star, p);
    let (m, big_m) = if candidate_edges.is_empty() {
        (0, 0)
    } else {
        (a_star.len().min(c_star.len()), a_star.len().max(c_star.len()))
    };
    let mut flagged: Vec<usize> = a_star.iter().chain(&c_star).copied().collect();
    flagged.sort_unstable();
    Ok(RecoResult {
        mode: RecoMode::K2Known,
        saturated: flagged.len() == p,
        flagged_nodes: flagged,
        candidate_edges,
        lower_bound: big_m,
        complements,
        theta_bar: Some(theta_tilde.diag()),
        min_side: Some(m),
    })
}

/// Two-block candidates `(A_ν × C) ∪ (A × C_ν)`.
pub fn reco_k2_unknown(
    theta_tilde: &PrecisionEstimate,
    nu: f64,
    part: &PartitionABC,
    opts: RecoOptions,
) -> Result<RecoResult> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(invalid(format!("ν must be positive, got {nu}")));
    }
    let p = part.p();
    let complements = k2_complements(theta_tilde, part)?;
    let t = theta_tilde.theta();
    let in_band = |i: &&usize| {
        (0..p).any(|j| {
            let x = t[(**i, j)].abs();
            j != **i && x > opts.slack && x < nu - opts.slack
        })
    };
    let a_nu: Vec<usize> = part.a.iter().filter(in_band).copied().collect();
    let c_nu: Vec<usize> = part.c.iter().filter(in_band).copied().collect();
    let candidate_edges = cross(&a_nu, &part.c, p).union(&cross(&part.a, &c_nu, p));
    let mut flagged: Vec<usize> = a_nu.iter().chain(&c_nu).copied().collect();
    flagged.sort_unstable();
    Ok(RecoResult {
        mode: RecoMode::K2Unknown,
        saturated: flagged.len() == p,
        lower_bound: a_nu.len().max(c_nu.len()),
        flagged_nodes: flagged,
        candidate_edges,
        complements,
        theta_bar: None,
        min_side: None,
    })
}

/// `R_ij = −M_ij / √(M_ii M_jj)` off the diagonal; the diagonal is zero.
pub fn pcor_transform(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: m.ncols() });
    }
    if let Some(i) = (0..p).find(|&i| !(m[(i, i)] > 0.0)) {
        return Err(invalid(format!("diagonal entry {} must be positive", i + 1)));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { -m[(i, j)] / libm::sqrt(m[(i, i)] * m[(j, j)]) }))
}

/// Row and column projections `(Ū1, Ū2)` of `Ŏ^c` when they are disjoint,
/// which lets a general scheme be treated as `A = Ū1`, `C = Ū2`. The
/// induced superset `Ū1* × Ū2*` contains the known-diagonal superset.
pub fn reduce_to_k2(scheme: &ObservationScheme) -> Option<(Vec<usize>, Vec<usize>)> {
    let oc = upper_unobserved(scheme);
    if oc.is_empty() {
        return None;
    }
    let rows: BTreeSet<usize> = oc.iter().map(|(i, _)| i).collect();
    let cols: BTreeSet<usize> = oc.iter().map(|(_, j)| j).collect();
    if rows.intersection(&cols).next().is_some() {
        return None;
    }
    Some((rows.into_iter().collect(), cols.into_iter().collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCount {
    /// Edge placements of size κ inside the grid touching every row and column.
    pub xi: u128,
    /// `C(|A||C|, κ)`.
    pub phi: u128,
    /// `1 − ξ/φ`.
    pub chi: f64,
}

/// Largest grid (`|A*| · |C*|`) enumerated exactly.
pub const MAX_GRID_CELLS: usize = 24;

/// Counts κ-edge structures inside an `rows × cols` candidate grid that
/// cover every row and column, against all κ-edge structures on `|A| × |C|`.
pub fn structure_count(rows: usize, cols: usize, a_size: usize, c_size: usize, kappa: usize) -> Result<StructureCount> {
    if rows == 0 || cols == 0 {
        return Err(invalid("candidate grid is empty"));
    }
    if rows > a_size || cols > c_size {
        return Err(invalid("candidate grid exceeds |A| × |C|"));
    }
    let (m, big_m) = (rows.min(cols), rows.max(cols));
    if kappa < big_m || kappa > m * big_m {
        return Err(invalid(format!("κ = {kappa} outside [{big_m}, {}]", m * big_m)));
    }
    let cells = rows * cols;
    if cells > MAX_GRID_CELLS {
        return Err(invalid(format!("grid of {cells} cells exceeds the enumeration limit {MAX_GRID_CELLS}")));
    }
    let xi = count_covers(rows, cols, kappa);
    let phi = binomial((a_size * c_size) as u128, kappa as u128);
    Ok(StructureCount { xi, phi, chi: 1.0 - xi as f64 / phi as f64 })
}

fn count_covers(rows: usize, cols: usize, kappa: usize) -> u128 {
    fn go(cell: usize, left: usize, rows: usize, cols: usize, rmask: u32, cmask: u32, full: (u32, u32)) -> u128 {
        let cells = rows * cols;
        if left == 0 {
            return u128::from(rmask == full.0 && cmask == full.1);
        }
        if cells - cell < left {
            return 0;
        }
        let (r, c) = (cell / cols, cell % cols);
        go(cell + 1, left - 1, rows, cols, rmask | 1 << r, cmask | 1 << c, full)
            + go(cell + 1, left, rows, cols, rmask, cmask, full)
    }
    go(0, kappa, rows, cols, 0, 0, ((1u32 << rows) - 1, (1u32 << cols) - 1))
}

pub fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::madgq::{madgq_complete, madgq_k2_closed_form};
    use crate::scheme::PartialCovariance;

    fn three_node_tilde() -> (PrecisionEstimate, ObservationScheme) {
        let t = DMatrix::from_row_slice(3, 3, &[0.96, 0.24, 0.0, 0.24, 0.97, 0.24, 0.0, 0.24, 0.96]);
        let s = ObservationScheme::build(3, &[alloc::vec![0, 1], alloc::vec![1, 2]]).unwrap();
        (PrecisionEstimate::new(t).unwrap(), s)
    }

    #[test]
    fn algorithm1_on_three_node_instance() {
        let (tt, s) = three_node_tilde();
        let r = reco_known_diag(&tt, &s, &[1.0, 1.0, 1.0], 0.0, RecoOptions::POPULATION).unwrap();
        let c1 = &r.complements[0];
        assert!((c1[(0, 0)] - 0.96).abs() < 1e-12 && (c1[(1, 1)] - 0.91).abs() < 1e-12);
        // Node 2 also drops (0.91 < 1) even though it has no unobserved partner.
        assert_eq!(r.flagged_nodes, alloc::vec![0, 1, 2]);
        assert_eq!(r.candidate_edges.iter().collect::<Vec<_>>(), alloc::vec![(0, 2)]);
        assert_eq!(r.lower_bound, 1);
    }

    #[test]
    fn positive_xi_saturates() {
        let (tt, s) = three_node_tilde();
        let r = reco_known_diag(&tt, &s, &[0.5, 0.5, 0.5], 1.0, RecoOptions::EXACT).unwrap();
        assert!(r.saturated);
        assert_eq!(r.candidate_edges, s.mask().unobserved_pairs());
    }

    #[test]
    fn no_unobserved_edges_no_candidates() {
        let theta = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 1.0, 0.3, 0.0, 0.3, 1.0]);
        let s = ObservationScheme::build(3, &[alloc::vec![0, 1], alloc::vec![1, 2]]).unwrap();
        let est = PrecisionEstimate::new(theta.clone()).unwrap();
        let sig = PartialCovariance::from_full(&est.covariance(), s.clone()).unwrap();
        let tt = madgq_complete(&sig).unwrap();
        let r = reco_known_diag(&tt, &s, &[1.0; 3], 0.0, RecoOptions::POPULATION).unwrap();
        assert!(r.candidate_edges.is_empty());
        let u = reco_unknown_diag(&tt, &s, 0.0, 0.3, false, RecoOptions::POPULATION).unwrap();
        assert!(u.candidate_edges.is_empty());
    }

    #[test]
    fn lower_bound_when_projections_overlap() {
        // Four leaves each seen only with a hub; true unobserved edges 0–1 and 2–3.
        // Every leaf pair is unobserved, so the index projections of Ω have
        // three nodes each, yet two edges explain all four drops.
        let mut theta = DMatrix::<f64>::identity(5, 5);
        for (i, j) in [(0, 1), (2, 3)] {
            theta[(i, j)] = 0.3;
            theta[(j, i)] = 0.3;
        }
        let subsets: Vec<Vec<usize>> = (0..4).map(|i| alloc::vec![i, 4]).collect();
        let s = ObservationScheme::build(5, &subsets).unwrap();
        let est = PrecisionEstimate::new(theta).unwrap();
        let sig = PartialCovariance::from_full(&est.covariance(), s.clone()).unwrap();
        let tt = madgq_complete(&sig).unwrap();
        let r = reco_known_diag(&tt, &s, &[1.0; 5], 0.0, RecoOptions::POPULATION).unwrap();
        assert_eq!(r.flagged_nodes, alloc::vec![0, 1, 2, 3]);
        assert_eq!(r.candidate_edges.len(), 6);
        assert_eq!(r.lower_bound, 2);
    }

    #[test]
    fn algorithm2_on_three_node_instance() {
        let (tt, s) = three_node_tilde();
        let r = reco_unknown_diag(&tt, &s, 0.0, 0.3, false, RecoOptions::POPULATION).unwrap();
        assert_eq!(r.flagged_nodes, alloc::vec![0, 1, 2]);
        assert_eq!(r.candidate_edges.iter().collect::<Vec<_>>(), alloc::vec![(0, 2)]);
        assert_eq!(r.lower_bound, 1);
        assert!(reco_unknown_diag(&tt, &s, 0.3, 0.3, false, RecoOptions::EXACT).is_err());
    }

    #[test]
    fn k2_variants_on_three_node_instance() {
        let (tt, _) = three_node_tilde();
        let part = PartitionABC::new(3, alloc::vec![0], alloc::vec![1], alloc::vec![2]).unwrap();
        let r = reco_k2_known(&tt, &[1.0; 3], &part, RecoOptions::EXACT).unwrap();
        assert_eq!(r.candidate_edges.iter().collect::<Vec<_>>(), alloc::vec![(0, 2)]);
        assert_eq!((r.min_side, r.lower_bound), (Some(1), 1));
        let u = reco_k2_unknown(&tt, 0.3, &part, RecoOptions::EXACT).unwrap();
        assert_eq!(u.candidate_edges.iter().collect::<Vec<_>>(), alloc::vec![(0, 2)]);
        let none = reco_k2_unknown(&tt, 0.2, &part, RecoOptions::EXACT).unwrap();
        assert!(none.candidate_edges.is_empty());
    }

    #[test]
    fn k2_unknown_worked_scenario() {
        // p = 15, A = {1..5}, C = {11..15}; only nodes 5 and 11 carry in-band entries.
        let p = 15;
        let mut t = DMatrix::identity(p, p);
        for &(i, j) in &[(4usize, 6usize), (10, 7)] {
            t[(i, j)] = 0.05;
            t[(j, i)] = 0.05;
        }
        let tt = PrecisionEstimate::new(t).unwrap();
        let part = PartitionABC::new(p, (0..5).collect(), (5..10).collect(), (10..15).collect()).unwrap();
        let u = reco_k2_unknown(&tt, 0.1, &part, RecoOptions::EXACT).unwrap();
        let mut want = EdgeSet::new(p);
        for j in 10..15 {
            want.insert(4, j).unwrap();
        }
        for i in 0..5 {
            want.insert(i, 10).unwrap();
        }
        assert_eq!(u.candidate_edges, want);
        assert_eq!(u.lower_bound, 1);
        // The rejected alternative A_ν × C_ν would be {(5, 11)} only.
        assert!(u.candidate_edges.contains(4, 10));
    }

    #[test]
    fn general_and_k2_superset_agree() {
        let theta = DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0, 0.2, 0.0, 0.15, 0.0, 0.2, 1.0, 0.1, 0.0, 0.0, 0.0, 0.1, 1.0, 0.2, 0.1, 0.15, 0.0, 0.2, 1.0, 0.0,
                0.0, 0.0, 0.1, 0.0, 1.0,
            ],
        );
        let est = PrecisionEstimate::new(theta).unwrap();
        let part = PartitionABC::new(5, alloc::vec![0, 1], alloc::vec![2], alloc::vec![3, 4]).unwrap();
        let tt = madgq_k2_closed_form(&est, &part).unwrap();
        let a = reco_known_diag(&tt, &part.scheme().unwrap(), &est.diag(), 0.0, RecoOptions::POPULATION).unwrap();
        let b = reco_k2_known(&tt, &est.diag(), &part, RecoOptions::POPULATION).unwrap();
        assert_eq!(a.candidate_edges, b.candidate_edges);
        assert!(a.candidate_edges.contains(0, 3));
    }

    #[test]
    fn pcor_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let r = pcor_transform(&m).unwrap();
        assert!((r[(0, 1)] + 0.3).abs() < 1e-15);
        let scaled = pcor_transform(&(m.clone() * 7.0)).unwrap();
        assert!((scaled[(0, 1)] - r[(0, 1)]).abs() < 1e-15);
        assert_eq!(pcor_transform(&DMatrix::from_diagonal_element(3, 3, 2.0)).unwrap(), DMatrix::zeros(3, 3));
        assert!(pcor_transform(&DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 1.0])).is_err());
    }

    #[test]
    fn reduce_to_k2_cases() {
        assert_eq!(reduce_to_k2(&ObservationScheme::full(4).unwrap()), None);
        let s = ObservationScheme::build(5, &[alloc::vec![0, 1, 2], alloc::vec![2, 3, 4]]).unwrap();
        assert_eq!(reduce_to_k2(&s), Some((alloc::vec![0, 1], alloc::vec![3, 4])));
        // Chain of three windows: node 2 is a row of (2,4) and a column of (0,2).
        let s = ObservationScheme::build(5, &[alloc::vec![0, 1], alloc::vec![1, 2, 3], alloc::vec![3, 4]]).unwrap();
        assert_eq!(reduce_to_k2(&s), None);
    }

    fn covers_by_inclusion_exclusion(r: usize, c: usize, k: usize) -> u128 {
        let mut total: i128 = 0;
        for i in 0..=r {
            for j in 0..=c {
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                let term = binomial(r as u128, i as u128)
                    * binomial(c as u128, j as u128)
                    * binomial(((r - i) * (c - j)) as u128, k as u128);
                total += sign * term as i128;
            }
        }
        total as u128
    }

    #[test]
    fn structure_count_examples() {
        let a = structure_count(2, 2, 3, 4, 2).unwrap();
        assert_eq!((a.xi, a.phi), (2, 66));
        let b = structure_count(4, 5, 7, 7, 5).unwrap();
        assert_eq!((b.xi, b.phi), (240, 1_906_884));
        let c = structure_count(1, 1, 1, 1, 1).unwrap();
        assert_eq!((c.xi, c.phi, c.chi), (1, 1, 0.0));
        assert!(structure_count(2, 2, 3, 4, 1).is_err());
        assert!(structure_count(2, 2, 3, 4, 5).is_err());
        assert!(structure_count(5, 5, 7, 7, 5).is_err());
        for (r, cc, k) in [(3, 4, 5), (2, 6, 7), (4, 4, 9), (3, 3, 3)] {
            assert_eq!(count_covers(r, cc, k), covers_by_inclusion_exclusion(r, cc, k));
        }
    }
}
