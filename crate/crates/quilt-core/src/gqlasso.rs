//! ℓ1-penalised log-det estimation constrained to the observed pairs
//! (MAD_GQlasso), with the full-data graphical lasso as a special case.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, QuiltError, Result};
use crate::linalg::{self, cholesky, log_det, max_abs_diff, spd_inverse};
use crate::madgq::PrecisionEstimate;
use crate::scheme::{ObservationScheme, PairMask, PartialCovariance};

/// Off-diagonal penalty weights. Diagonal entries are never penalised.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    Scalar(f64),
    /// Symmetric, nonnegative, zero diagonal.
    Matrix(DMatrix<f64>),
}

impl PenaltySpec {
    fn dense(&self, p: usize, mask: &PairMask) -> Result<DMatrix<f64>> {
        let lam = match self {
            PenaltySpec::Scalar(l) => {
                if !(l.is_finite() && *l >= 0.0) {
                    return Err(invalid(format!("penalty must be finite and nonnegative, got {l}")));
                }
                DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { *l })
            }
            PenaltySpec::Matrix(m) => {
                if m.nrows() != p || m.ncols() != p {
                    return Err(QuiltError::DimensionMismatch { expected: p, found: m.nrows() });
                }
                for i in 0..p {
                    if m[(i, i)] != 0.0 {
                        return Err(invalid("diagonal penalties must be zero"));
                    }
                    for j in 0..p {
                        let v = m[(i, j)];
                        if !(v.is_finite() && v >= 0.0) || v != m[(j, i)] {
                            return Err(invalid("penalty matrix must be symmetric, finite and nonnegative"));
                        }
                    }
                }
                m.clone()
            }
        };
        Ok(DMatrix::from_fn(p, p, |i, j| if mask.get(i, j) { lam[(i, j)] } else { 0.0 }))
    }
}

/// Summary of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Max-norm KKT residual at the returned point.
    pub final_gap: f64,
    /// Absolute residual target the run was held to.
    pub tolerance: f64,
    /// Penalised objective at the returned point.
    pub objective: f64,
    pub converged: bool,
    /// Some observed off-diagonal penalty is zero, so uniqueness rests on
    /// completability of the observed covariance.
    pub weak_regime: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GqlassoOptions {
    /// KKT residual target, relative to `max_O |Σ̂_ij|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; entries outside the observed set are ignored.
    pub warm_start: Option<DMatrix<f64>>,
}

impl Default for GqlassoOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 20_000, warm_start: None }
    }
}

pub fn gqlasso_fit(sigma: &PartialCovariance, penalty: &PenaltySpec) -> Result<(PrecisionEstimate, SolverReport)> {
    gqlasso_fit_with(sigma, penalty, &GqlassoOptions::default())
}

/// Proximal-gradient ascent with Barzilai–Borwein steps and backtracking.
pub fn gqlasso_fit_with(
    sigma: &PartialCovariance,
    penalty: &PenaltySpec,
    opts: &GqlassoOptions,
) -> Result<(PrecisionEstimate, SolverReport)> {
    let p = sigma.p();
    let mask = sigma.scheme().mask();
    for i in 0..p {
        match sigma.get(i, i) {
            Some(v) if v > 0.0 => {}
            _ => return Err(invalid(format!("observed variance of variable {} must be positive", i + 1))),
        }
    }
    let lam = penalty.dense(p, mask)?;
    let s = sigma.to_dense_zeroed();
    let weak_regime = (0..p).any(|i| (0..p).any(|j| i != j && mask.get(i, j) && lam[(i, j)] == 0.0));
    let tolerance = opts.tol * sigma.max_abs_observed().max(f64::MIN_POSITIVE);

    let mut theta = match &opts.warm_start {
        Some(w) if w.shape() == (p, p) => {
            let mut w = linalg::symmetrize(w.clone());
            zero_outside(&mut w, mask);
            if cholesky(&w).is_some() {
                w
            } else {
                initial_point(&s, &lam, mask)
            }
        }
        Some(w) => return Err(QuiltError::DimensionMismatch { expected: p, found: w.nrows() }),
        None => initial_point(&s, &lam, mask),
    };

    let smooth = |t: &DMatrix<f64>| cholesky(t).map(|c| log_det(&c) - t.component_mul(&s).sum());
    let mut f = smooth(&theta).ok_or(QuiltError::NotPositiveDefinite)?;
    let w = spd_inverse(&theta)?;
    let mut grad = masked(&w - &s, mask);
    let wmax = (0..p).fold(0.0_f64, |a, i| a.max(w[(i, i)]));
    let mut step = 1.0 / (wmax * wmax);

    let mut iterations = 0;
    loop {
        let gap = kkt_gap(&theta, &grad, &lam, mask);
        let report = |converged: bool, iterations: usize| SolverReport {
            iterations,
            final_gap: gap,
            tolerance,
            objective: f - penalty_value(&theta, &lam),
            converged,
            weak_regime,
        };
        if gap <= tolerance {
            let r = report(true, iterations);
            return Ok((PrecisionEstimate::new(theta)?, r));
        }
        if iterations >= opts.max_iter {
            return Err(QuiltError::NotConverged { report: report(false, iterations) });
        }
        iterations += 1;

        let mut accepted = None;
        for _ in 0..80 {
            let cand = prox_step(&theta, &grad, &lam, mask, step);
            if let Some(fc) = smooth(&cand) {
                let d = &cand - &theta;
                let model = f + d.component_mul(&grad).sum() - d.norm_squared() / (2.0 * step);
                if fc.is_finite() && fc >= model - 1e-13 * (1.0 + f.abs()) {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return Err(QuiltError::NotConverged { report: report(false, iterations) });
        };
        let w_new = spd_inverse(&cand)?;
        let grad_new = masked(&w_new - &s, mask);
        let ds = &cand - &theta;
        let dy = &grad_new - &grad;
        let curv = -ds.dot(&dy);
        let ss = ds.norm_squared();
        step = if curv > 0.0 && ss > 0.0 { (ss / curv).clamp(1e-12, 1e12) } else { step * 2.0 };
        theta = cand;
        f = fc;
        grad = grad_new;
    }
}

fn initial_point(s: &DMatrix<f64>, lam: &DMatrix<f64>, mask: &PairMask) -> DMatrix<f64> {
    let p = s.nrows();
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..p {
        for j in 0..p {
            if i != j && mask.get(i, j) {
                total += lam[(i, j)];
                count += 1;
            }
        }
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / (s[(i, i)] + mean) } else { 0.0 })
}

fn zero_outside(m: &mut DMatrix<f64>, mask: &PairMask) {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..p {
            if !mask.get(i, j) {
                m[(i, j)] = 0.0;
            }
        }
    }
}

fn masked(mut m: DMatrix<f64>, mask: &PairMask) -> DMatrix<f64> {
    zero_outside(&mut m, mask);
    m
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn prox_step(
    theta: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    lam: &DMatrix<f64>,
    mask: &PairMask,
    step: f64,
) -> DMatrix<f64> {
    let p = theta.nrows();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in j..p {
            if !mask.get(i, j) {
                continue;
            }
            let z = theta[(i, j)] + step * 0.5 * (grad[(i, j)] + grad[(j, i)]);
            let v = if i == j { z } else { soft(z, step * lam[(i, j)]) };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn penalty_value(theta: &DMatrix<f64>, lam: &DMatrix<f64>) -> f64 {
    theta.iter().zip(lam.iter()).map(|(t, l)| (t * l).abs()).sum()
}

/// Max-norm violation of `W − S = λ z`, `z ∈ ∂|Θ|`, over observed pairs.
fn kkt_gap(theta: &DMatrix<f64>, grad: &DMatrix<f64>, lam: &DMatrix<f64>, mask: &PairMask) -> f64 {
    let p = theta.nrows();
    let mut gap = 0.0_f64;
    for j in 0..p {
        for i in 0..p {
            if !mask.get(i, j) {
                continue;
            }
            let g = grad[(i, j)];
            let r = if i == j {
                g.abs()
            } else if theta[(i, j)] > 0.0 {
                (g - lam[(i, j)]).abs()
            } else if theta[(i, j)] < 0.0 {
                (g + lam[(i, j)]).abs()
            } else {
                (g.abs() - lam[(i, j)]).max(0.0)
            };
            gap = gap.max(r);
        }
    }
    gap
}

/// Graphical lasso on a fully observed covariance.
pub fn glasso_fit(sigma: &DMatrix<f64>, lambda: f64) -> Result<(PrecisionEstimate, SolverReport)> {
    let p = sigma.nrows();
    let full = PartialCovariance::from_full(sigma, ObservationScheme::full(p)?)?;
    gqlasso_fit(&full, &PenaltySpec::Scalar(lambda))
}

/// Fits a grid of scalar penalties, largest first, warm-starting each fit
/// from the previous solution. Results are returned in the input order.
pub fn fit_path(
    sigma: &PartialCovariance,
    lambdas: &[f64],
    opts: &GqlassoOptions,
) -> Vec<Result<(PrecisionEstimate, SolverReport)>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<Result<(PrecisionEstimate, SolverReport)>>> = (0..lambdas.len()).map(|_| None).collect();
    let mut warm: Option<DMatrix<f64>> = opts.warm_start.clone();
    for idx in order {
        let o = GqlassoOptions { warm_start: warm.clone(), ..opts.clone() };
        let r = gqlasso_fit_with(sigma, &PenaltySpec::Scalar(lambdas[idx]), &o);
        if let Ok((est, _)) = &r {
            warm = Some(est.theta().clone());
        }
        out[idx] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every grid point visited")).collect()
}

/// `λ = (8/α) · c · √(γ log p / n̄)`, the Gaussian-tail penalty level.
pub fn theory_penalty(n_bar: u64, p: usize, gamma: f64, alpha: f64, c: f64) -> Result<f64> {
    if !(gamma > 2.0) {
        return Err(invalid(format!("γ must exceed 2, got {gamma}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("α must lie in (0, 1], got {alpha}")));
    }
    if n_bar < 2 {
        return Err(invalid("n̄ must be at least 2"));
    }
    if p == 0 {
        return Err(invalid("p must be positive"));
    }
    let log_p = libm::log(p as f64);
    Ok(8.0 / alpha * c * libm::sqrt(gamma * log_p / n_bar as f64))
}

/// Grid penalty minimising `‖Θ̂(λ) − Θ̃‖_∞`, ties going to the larger λ.
/// Returns the chosen value and its loss. Grid points whose fit fails are skipped.
pub fn oracle_lambda(
    lambdas: &[f64],
    sigma: &PartialCovariance,
    theta_tilde: &DMatrix<f64>,
    opts: &GqlassoOptions,
) -> Result<(f64, f64)> {
    if lambdas.is_empty() {
        return Err(invalid("empty λ grid"));
    }
    let fits = fit_path(sigma, lambdas, opts);
    let mut best: Option<(f64, f64)> = None;
    let mut first_err = None;
    for (l, r) in lambdas.iter().zip(fits) {
        match r {
            Ok((est, _)) => {
                let loss = max_abs_diff(est.theta(), theta_tilde);
                best = match best {
                    Some((bl, bloss)) if bloss < loss || (bloss == loss && bl >= *l) => Some((bl, bloss)),
                    _ => Some((*l, loss)),
                };
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("nonempty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn two_by_two(rho: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    }

    #[test]
    fn identity_at_zero_penalty() {
        let (est, rep) = glasso_fit(&DMatrix::identity(3, 3), 0.0).unwrap();
        assert!(max_abs_diff(est.theta(), &DMatrix::identity(3, 3)) < 1e-9);
        assert!(rep.converged && rep.weak_regime);
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        // At the optimum W_12 = ρ − λ (for ρ > λ) and W_ii = 1, so
        // Θ = [[1, −(ρ−λ)], [−(ρ−λ), 1]] / (1 − (ρ−λ)²).
        let (rho, lam) = (0.6, 0.1);
        let (est, _) = glasso_fit(&two_by_two(rho), lam).unwrap();
        let r = rho - lam;
        let det = 1.0 - r * r;
        let want = DMatrix::from_row_slice(2, 2, &[1.0 / det, -r / det, -r / det, 1.0 / det]);
        let d = max_abs_diff(est.theta(), &want);
        assert!(d < 1e-7, "{d} {}", est.theta());
        let (mle, _) = glasso_fit(&two_by_two(rho), 0.0).unwrap();
        assert!(est.theta()[(0, 1)] < 0.0);
        assert!(est.theta()[(0, 1)].abs() < mle.theta()[(0, 1)].abs());
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.3, 0.5, 1.0, 0.2, 0.3, 0.2, 0.5]);
        let (est, _) = glasso_fit(&s, 0.6).unwrap();
        for i in 0..3 {
            assert!((est.theta()[(i, i)] - 1.0 / s[(i, i)]).abs() < 1e-8);
            for j in 0..3 {
                if i != j {
                    assert_eq!(est.theta()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn constraint_is_exact() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.0, 0.4, 1.0, 0.4, 0.0, 0.4, 1.0]);
        let scheme = ObservationScheme::build(3, &[alloc::vec![0, 1], alloc::vec![1, 2]]).unwrap();
        let sig = PartialCovariance::from_full(&s, scheme).unwrap();
        let (est, rep) = gqlasso_fit(&sig, &PenaltySpec::Scalar(0.05)).unwrap();
        assert_eq!(est.theta()[(0, 2)].to_bits(), 0.0f64.to_bits());
        assert!(rep.converged && !rep.weak_regime);
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(glasso_fit(&s, 0.1).is_err());
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let s = two_by_two(0.7);
        let sig = PartialCovariance::from_full(&s, ObservationScheme::full(2).unwrap()).unwrap();
        let opts = GqlassoOptions { max_iter: 0, ..Default::default() };
        match gqlasso_fit_with(&sig, &PenaltySpec::Scalar(0.01), &opts) {
            Err(QuiltError::NotConverged { report }) => assert!(!report.converged),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn penalty_matrix_validation() {
        let sig = PartialCovariance::from_full(&two_by_two(0.3), ObservationScheme::full(2).unwrap()).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[0.1, 0.1, 0.1, 0.0]);
        assert!(gqlasso_fit(&sig, &PenaltySpec::Matrix(bad)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.0]);
        assert!(gqlasso_fit(&sig, &PenaltySpec::Matrix(asym)).is_err());
        assert!(gqlasso_fit(&sig, &PenaltySpec::Scalar(-1.0)).is_err());
    }

    #[test]
    fn theory_penalty_formula() {
        let l = theory_penalty(1000, 100, 3.0, 1.0, 1.0).unwrap();
        assert!((l - 8.0 * libm::sqrt(3.0 * libm::log(100.0) / 1000.0)).abs() < 1e-15);
        assert_eq!(theory_penalty(1000, 1, 3.0, 1.0, 1.0).unwrap(), 0.0);
        let a = theory_penalty(500, 50, 3.0, 0.5, 1.0).unwrap();
        let b = theory_penalty(1000, 50, 3.0, 0.5, 1.0).unwrap();
        assert!((a / b - libm::sqrt(2.0)).abs() < 1e-12);
        assert!(theory_penalty(1000, 100, 2.0, 1.0, 1.0).is_err());
        assert!(theory_penalty(1000, 100, 3.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn oracle_lambda_single_and_ties() {
        let s = two_by_two(0.5);
        let sig = PartialCovariance::from_full(&s, ObservationScheme::full(2).unwrap()).unwrap();
        let tt = spd_inverse(&s).unwrap();
        let (l, _) = oracle_lambda(&[0.2], &sig, &tt, &GqlassoOptions::default()).unwrap();
        assert_eq!(l, 0.2);
        // Both penalties exceed |ρ|, so both fits are the same diagonal matrix.
        let (l, _) = oracle_lambda(&[0.6, 0.9], &sig, &tt, &GqlassoOptions::default()).unwrap();
        assert_eq!(l, 0.9);
        let (l, loss) = oracle_lambda(&[0.0, 0.1, 0.3], &sig, &tt, &GqlassoOptions::default()).unwrap();
        assert_eq!(l, 0.0);
        assert!(loss < 1e-6);
        assert!(oracle_lambda(&[], &sig, &tt, &GqlassoOptions::default()).is_err());
    }

    #[test]
    fn support_shrinks_along_path() {
        let p = 6;
        let s = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5_f64.powi((i as i32 - j as i32).abs()) });
        let sig = PartialCovariance::from_full(&s, ObservationScheme::full(p).unwrap()).unwrap();
        let grid: Vec<f64> = (0..12).map(|k| 0.6 * libm::pow(0.6, k as f64)).collect();
        let fits = fit_path(&sig, &grid, &GqlassoOptions::default());
        let sizes: Vec<usize> = fits.iter().map(|r| r.as_ref().unwrap().0.support().len()).collect();
        assert_eq!(sizes[0], 0);
        assert!(sizes.last().unwrap() >= &sizes[0]);
        let (top, _) = fits[0].as_ref().unwrap();
        assert!(max_abs(&(top.theta() - DMatrix::from_diagonal(&top.theta().diagonal()))) == 0.0);
    }
}
