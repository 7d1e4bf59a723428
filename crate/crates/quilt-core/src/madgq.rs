//! Max-determinant reconstruction `Θ̃` from the observed covariance, its
//! two-block closed form, and the Schur-complement view used by RECO.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::edges::EdgeSet;
use crate::error::{invalid, QuiltError, Result};
use crate::linalg::{self, cholesky, log_det, max_abs, schur_complement, spd_inverse, submatrix};
use crate::scheme::{ObservationScheme, PairMask, PartialCovariance};

/// A symmetric positive definite precision matrix and its off-diagonal support.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    theta: DMatrix<f64>,
    support: EdgeSet,
}

/// Entries below this fraction of `‖Θ‖_∞` are not counted as edges.
pub const SUPPORT_RTOL: f64 = 1e-10;

impl PrecisionEstimate {
    /// Validates squareness, symmetry (relative 1e-10) and positive definiteness.
    /// The stored matrix is exactly symmetric.
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() != theta.ncols() {
            return Err(QuiltError::DimensionMismatch { expected: theta.nrows(), found: theta.ncols() });
        }
        if let Some(pos) = theta.iter().position(|v| !v.is_finite()) {
            let p = theta.nrows();
            return Err(QuiltError::NonFinite { row: pos % p, col: pos / p });
        }
        if !linalg::is_symmetric(&theta, 1e-10) {
            return Err(invalid("precision matrix is not symmetric"));
        }
        let theta = linalg::symmetrize(theta);
        if cholesky(&theta).is_none() {
            return Err(QuiltError::NotPositiveDefinite);
        }
        let support = support_of(&theta);
        Ok(Self { theta, support })
    }

    pub fn p(&self) -> usize {
        self.theta.nrows()
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn into_theta(self) -> DMatrix<f64> {
        self.theta
    }

    pub fn support(&self) -> &EdgeSet {
        &self.support
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p()).map(|i| self.theta[(i, i)]).collect()
    }

    /// `Σ = Θ⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        spd_inverse(&self.theta).expect("validated positive definite")
    }
}

fn support_of(theta: &DMatrix<f64>) -> EdgeSet {
    let p = theta.nrows();
    let tol = SUPPORT_RTOL * max_abs(theta);
    let mut e = EdgeSet::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if theta[(i, j)].abs() > tol {
                let _ = e.insert(i, j);
            }
        }
    }
    e
}

/// Disjoint node sets with `O^c = (A × C) ∪ (C × A)`; `B` may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionABC {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

impl PartitionABC {
    pub fn new(p: usize, a: Vec<usize>, b: Vec<usize>, c: Vec<usize>) -> Result<Self> {
        if a.is_empty() || c.is_empty() {
            return Err(invalid("A and C must be nonempty"));
        }
        let mut seen = alloc::vec![false; p];
        for &i in a.iter().chain(&b).chain(&c) {
            if i >= p {
                return Err(QuiltError::IndexOutOfRange { index: i, p });
            }
            if seen[i] {
                return Err(invalid(format!("node {} appears twice in the partition", i + 1)));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("partition does not cover every node"));
        }
        let sorted = |mut v: Vec<usize>| {
            v.sort_unstable();
            v
        };
        Ok(Self { a: sorted(a), b: sorted(b), c: sorted(c) })
    }

    pub fn p(&self) -> usize {
        self.a.len() + self.b.len() + self.c.len()
    }

    /// The two-subset scheme `V_1 = A ∪ B`, `V_2 = B ∪ C`.
    pub fn scheme(&self) -> Result<ObservationScheme> {
        let mut v1 = self.a.clone();
        v1.extend(&self.b);
        let mut v2 = self.b.clone();
        v2.extend(&self.c);
        ObservationScheme::build(self.p(), &[v1, v2])
    }

    /// Recovers `(A, B, C)` from a scheme whose unobserved set is `A × C ∪ C × A`.
    pub fn from_scheme(scheme: &ObservationScheme) -> Result<Self> {
        let p = scheme.p();
        let oc = scheme.mask().unobserved_pairs();
        let mut in_a = alloc::vec![false; p];
        let mut in_c = alloc::vec![false; p];
        for (i, j) in oc.iter() {
            in_a[i] = true;
            in_c[j] = true;
        }
        let a: Vec<usize> = (0..p).filter(|&i| in_a[i]).collect();
        let c: Vec<usize> = (0..p).filter(|&i| in_c[i]).collect();
        if a.iter().any(|&i| in_c[i]) || oc.len() != a.len() * c.len() {
            return Err(invalid("unobserved pairs do not form a single A × C block"));
        }
        let b: Vec<usize> = (0..p).filter(|&i| !in_a[i] && !in_c[i]).collect();
        Self::new(p, a, b, c)
    }
}

/// Solver controls for [`madgq_complete_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadgqOptions {
    /// Target for `max_{O} |[Θ⁻¹]_ij − Σ_ij|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MadgqOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000 }
    }
}

/// `argmax log det Θ − Σ_{(i,j) ∈ O} Θ_ij Σ_ij` subject to `Θ_{O^c} = 0`.
pub fn madgq_complete(sigma: &PartialCovariance) -> Result<PrecisionEstimate> {
    madgq_complete_with(sigma, MadgqOptions::default())
}

pub fn madgq_complete_with(sigma: &PartialCovariance, opts: MadgqOptions) -> Result<PrecisionEstimate> {
    let p = sigma.p();
    let scheme = sigma.scheme();
    for i in 0..p {
        match sigma.get(i, i) {
            Some(v) if v > 0.0 => {}
            Some(_) => {
                return Err(QuiltError::NotCompletable(format!("variance of variable {} is not positive", i + 1)))
            }
            None => return Err(invalid(format!("observed set is missing the diagonal entry {}", i + 1))),
        }
    }
    for (k, v) in scheme.subsets().iter().enumerate() {
        let block = DMatrix::from_fn(v.len(), v.len(), |a, b| sigma.get(v[a], v[b]).unwrap_or(0.0));
        if cholesky(&block).is_none() {
            return Err(QuiltError::NotCompletable(format!(
                "observed block of subset {} is not positive definite",
                k + 1
            )));
        }
    }

    // Work on the correlation scale; the stopping rule is checked on the original one.
    let d: Vec<f64> = (0..p).map(|i| libm::sqrt(sigma.get(i, i).unwrap())).collect();
    let mask = scheme.mask();
    let sc = DMatrix::from_fn(p, p, |i, j| sigma.get(i, j).map_or(0.0, |v| v / (d[i] * d[j])));
    let theta0 = DMatrix::identity(p, p);
    let theta_c = newton_cg(&sc, mask, theta0, &d, opts)?;
    let theta = DMatrix::from_fn(p, p, |i, j| theta_c[(i, j)] / (d[i] * d[j]));
    PrecisionEstimate::new(theta)
}

fn masked_objective(theta: &DMatrix<f64>, sigma_z: &DMatrix<f64>) -> Option<f64> {
    let chol = cholesky(theta)?;
    Some(log_det(&chol) - theta.component_mul(sigma_z).sum())
}

fn apply_mask(m: &mut DMatrix<f64>, mask: &PairMask) {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..p {
            if !mask.get(i, j) {
                m[(i, j)] = 0.0;
            }
        }
    }
}

fn newton_cg(
    sigma_z: &DMatrix<f64>,
    mask: &PairMask,
    mut theta: DMatrix<f64>,
    scale: &[f64],
    opts: MadgqOptions,
) -> Result<DMatrix<f64>> {
    let p = theta.nrows();
    let mut f = masked_objective(&theta, sigma_z).ok_or(QuiltError::NotPositiveDefinite)?;
    for _ in 0..opts.max_iter {
        let w = spd_inverse(&theta)?;
        let mut g = &w - sigma_z;
        apply_mask(&mut g, mask);
        let mut gap = 0.0_f64;
        for j in 0..p {
            for i in 0..p {
                gap = gap.max(g[(i, j)].abs() * scale[i] * scale[j]);
            }
        }
        if gap <= opts.tol {
            return Ok(theta);
        }
        if max_abs(&theta) > 1e12 {
            return Err(QuiltError::NotCompletable("solution diverges; no positive definite completion".into()));
        }
        let dir = newton_direction(&w, &g, mask);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &dir * t;
            if let Some(fc) = masked_objective(&cand, sigma_z) {
                if fc >= f - 1e-12 * (1.0 + f.abs()) && fc.is_finite() {
                    theta = cand;
                    f = fc.max(f);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(QuiltError::NotCompletable("line search stalled before convergence".into()));
        }
    }
    Err(QuiltError::NotCompletable(format!("no convergence within {} iterations", opts.max_iter)))
}

/// Preconditioned conjugate gradients for `P_O(W D W) = G` over symmetric `D` supported on `O`.
fn newton_direction(w: &DMatrix<f64>, g: &DMatrix<f64>, mask: &PairMask) -> DMatrix<f64> {
    let p = w.nrows();
    let precond = DMatrix::from_fn(p, p, |i, j| {
        if mask.get(i, j) {
            1.0 / (w[(i, i)] * w[(j, j)] + w[(i, j)] * w[(i, j)])
        } else {
            0.0
        }
    });
    let op = |d: &DMatrix<f64>| {
        let mut r = linalg::symmetrize(w * d * w);
        apply_mask(&mut r, mask);
        r
    };
    let gnorm = g.norm();
    let rtol = (0.1_f64).min(libm::sqrt(gnorm)) * gnorm;
    let mut x = DMatrix::<f64>::zeros(p, p);
    let mut r = g.clone();
    let mut z = r.component_mul(&precond);
    let mut s = z.clone();
    let mut rz = r.dot(&z);
    let max_cg = (4 * p * p).clamp(50, 2000);
    for _ in 0..max_cg {
        if r.norm() <= rtol.max(1e-300) {
            break;
        }
        let as_ = op(&s);
        let denom = s.dot(&as_);
        if denom <= 0.0 || !denom.is_finite() {
            break;
        }
        let alpha = rz / denom;
        x += &s * alpha;
        r -= &as_ * alpha;
        z = r.component_mul(&precond);
        let rz_new = r.dot(&z);
        s = &z + &s * (rz_new / rz);
        rz = rz_new;
    }
    if x.iter().all(|v| *v == 0.0) {
        // Fall back to a preconditioned gradient step.
        return g.component_mul(&precond);
    }
    x
}

/// Two-block closed form of `Θ̃` when `O^c = A × C ∪ C × A`.
pub fn madgq_k2_closed_form(theta: &PrecisionEstimate, part: &PartitionABC) -> Result<PrecisionEstimate> {
    let t = theta.theta();
    let p = theta.p();
    if part.p() != p {
        return Err(QuiltError::DimensionMismatch { expected: p, found: part.p() });
    }
    let (a, b, c) = (&part.a, &part.b, &part.c);
    let blk = |r: &[usize], s: &[usize]| submatrix(t, r, s);
    let inv = |m: DMatrix<f64>| spd_inverse(&m).map_err(|_| QuiltError::Numerical("singular diagonal block".into()));
    let caa_inv = inv(blk(a, a))?;
    let ccc_inv = inv(blk(c, c))?;
    let t_ac = blk(a, c);
    let t_ca = t_ac.transpose();
    let t_ab = blk(a, b);
    let t_cb = blk(c, b);

    let aa = blk(a, a) - &t_ac * &ccc_inv * &t_ca;
    let ab = &t_ab - &t_ac * &ccc_inv * &t_cb;
    let bc = t_cb.transpose() - t_ab.transpose() * &caa_inv * &t_ac;
    let cc = blk(c, c) - &t_ca * &caa_inv * &t_ac;
    let (bb, _) = k2_separator_blocks(t, part, &aa, &ab, &bc, &cc)?;

    let mut out = DMatrix::<f64>::zeros(p, p);
    let mut put = |rows: &[usize], cols: &[usize], m: &DMatrix<f64>| {
        for (r, &i) in rows.iter().enumerate() {
            for (s, &j) in cols.iter().enumerate() {
                out[(i, j)] = m[(r, s)];
                out[(j, i)] = m[(r, s)];
            }
        }
    };
    put(a, a, &aa);
    put(a, b, &ab);
    put(b, c, &bc);
    put(c, c, &cc);
    put(b, b, &bb);
    PrecisionEstimate::new(out)
}

/// Both expressions for the separator block `Θ̃_BB`:
/// `Θ_BB − Θ_BC Θ_CC⁻¹ Θ_CB + Θ̃_BC Θ̃_CC⁻¹ Θ̃_CB` and
/// `Θ_BB − Θ_BA Θ_AA⁻¹ Θ_AB + Θ̃_BA Θ̃_AA⁻¹ Θ̃_AB`.
pub fn k2_separator_block(theta: &PrecisionEstimate, part: &PartitionABC) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let tt = madgq_k2_closed_form(theta, part)?;
    let t = theta.theta();
    let tl = tt.theta();
    let (a, b, c) = (&part.a, &part.b, &part.c);
    k2_separator_blocks(t, part, &submatrix(tl, a, a), &submatrix(tl, a, b), &submatrix(tl, b, c), &submatrix(tl, c, c))
}

fn k2_separator_blocks(
    t: &DMatrix<f64>,
    part: &PartitionABC,
    aa: &DMatrix<f64>,
    ab: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    cc: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (a, b, c) = (&part.a, &part.b, &part.c);
    if b.is_empty() {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let inv = |m: &DMatrix<f64>| spd_inverse(m).map_err(|_| QuiltError::Numerical("singular diagonal block".into()));
    let t_bb = submatrix(t, b, b);
    let t_bc = submatrix(t, b, c);
    let t_ba = submatrix(t, b, a);
    let via_c = &t_bb - &t_bc * inv(&submatrix(t, c, c))? * t_bc.transpose() + bc * inv(cc)? * bc.transpose();
    let via_a = &t_bb - &t_ba * inv(&submatrix(t, a, a))? * t_ba.transpose() + ab.transpose() * inv(aa)? * ab;
    Ok((linalg::symmetrize(via_c), linalg::symmetrize(via_a)))
}

/// `Θ_UU − Θ_{U U^c} Θ_{U^c U^c}⁻¹ Θ_{U^c U}`, which equals `(Σ_UU)⁻¹`.
pub fn schur_entangle(theta: &PrecisionEstimate, u: &[usize]) -> Result<DMatrix<f64>> {
    let p = theta.p();
    let mut u = u.to_vec();
    u.sort_unstable();
    u.dedup();
    if u.is_empty() {
        return Err(invalid("node set U is empty"));
    }
    if let Some(&i) = u.iter().find(|&&i| i >= p) {
        return Err(QuiltError::IndexOutOfRange { index: i, p });
    }
    if u.len() == p {
        return Err(invalid("U = V leaves no complement to eliminate"));
    }
    schur_complement(theta.theta(), &u, &linalg::complement(p, &u))
}

/// True iff every edge of `Θ` lies in the observed set.
pub fn check_identifiability(theta: &PrecisionEstimate, scheme: &ObservationScheme) -> bool {
    theta.support().iter().all(|(i, j)| scheme.is_observed(i, j))
}

/// Outcome of the mutual incoherence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incoherence {
    /// The largest `α` with `max_e ‖Γ_{eẼ} Γ_{ẼẼ}⁻¹‖_1 ≤ 1 − α`.
    Satisfied { alpha: f64 },
    /// The maximum reached or exceeded one.
    Violated { max_norm: f64 },
}

/// Mutual incoherence of `Γ = Σ̃ ⊗ Σ̃`, with `Ẽ` the ordered support pairs
/// plus the diagonal. Dense in `|Ẽ|`; meant for small `p`.
pub fn check_mutual_incoherence(theta_tilde: &PrecisionEstimate) -> Result<Incoherence> {
    let p = theta_tilde.p();
    let sigma = theta_tilde.covariance();
    let support = theta_tilde.support();
    if support.is_empty() {
        return Ok(Incoherence::Satisfied { alpha: 1.0 });
    }
    let mut in_e: Vec<(usize, usize)> = (0..p).map(|i| (i, i)).collect();
    let mut out_e: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        for j in 0..p {
            if i != j {
                if support.contains(i, j) {
                    in_e.push((i, j));
                } else {
                    out_e.push((i, j));
                }
            }
        }
    }
    let gamma = |e: (usize, usize), f: (usize, usize)| sigma[(e.0, f.0)] * sigma[(e.1, f.1)];
    let g_ee = DMatrix::from_fn(in_e.len(), in_e.len(), |r, s| gamma(in_e[r], in_e[s]));
    let chol = cholesky(&g_ee).ok_or_else(|| QuiltError::Numerical("Γ_ẼẼ is singular".into()))?;
    let g_oe = DMatrix::from_fn(in_e.len(), out_e.len(), |r, s| gamma(in_e[r], out_e[s]));
    // Rows of Γ_{eẼ} Γ_{ẼẼ}⁻¹ are the columns of Γ_{ẼẼ}⁻¹ Γ_{Ẽe} (Γ_{ẼẼ} is symmetric).
    let solved = chol.solve(&g_oe);
    let mut worst = 0.0_f64;
    for s in 0..out_e.len() {
        worst = worst.max(solved.column(s).iter().map(|v| v.abs()).sum());
    }
    Ok(if worst < 1.0 {
        Incoherence::Satisfied { alpha: 1.0 - worst }
    } else {
        Incoherence::Violated { max_norm: worst }
    })
}
