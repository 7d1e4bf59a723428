#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use quilt_core::rng::Rng;
use quilt_core::simlab::chained_scheme;
use quilt_core::{DMatrix, ObservationScheme};
use rand::seq::SliceRandom;
use rand::Rng as _;

pub fn quilt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quilt")).args(args).output().expect("binary runs")
}

pub fn quilt_ok(args: &[&str]) -> Output {
    let out = quilt(args);
    assert!(out.status.success(), "quilt {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Symmetric matrix with entries of magnitude in `mag` (random sign) on the
/// allowed pairs, each present with probability `density`, shifted along
/// the diagonal to be comfortably positive definite.
pub fn random_precision<F>(r: &mut Rng, p: usize, density: f64, mag: (f64, f64), allowed: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> bool,
{
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if allowed(i, j) && r.random_bool(density) {
                let v = r.random_range(mag.0..mag.1) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    let shift = (-min_eigenvalue(&a)).max(0.0) + 0.25;
    for i in 0..p {
        a[(i, i)] = shift + r.random_range(0.0..0.5);
    }
    a
}

/// `K` random subsets covering every node; sizes between 2 and `p − 1`.
pub fn random_subsets(r: &mut Rng, p: usize, k: usize) -> ObservationScheme {
    let mut subsets: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let size = r.random_range(2..p);
            let mut nodes: Vec<usize> = (0..p).collect();
            nodes.shuffle(r);
            nodes.truncate(size);
            nodes
        })
        .collect();
    for i in 0..p {
        if !subsets.iter().any(|s| s.contains(&i)) {
            let t = r.random_range(0..k);
            subsets[t].push(i);
        }
    }
    ObservationScheme::build(p, &subsets).unwrap()
}

/// A legal chained scheme with random overlap.
pub fn random_chained(r: &mut Rng, p: usize, k: usize) -> ObservationScheme {
    let q0 = r.random_range((p / k + 1)..p);
    chained_scheme(p, k, q0).unwrap()
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Graphical lasso by block coordinate descent (one lasso per column,
/// solved by cyclic coordinate descent), diagonal unpenalised.
pub fn glasso_cd(s: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let p = s.nrows();
    let mut w = s.clone();
    let mut beta = DMatrix::<f64>::zeros(p, p);
    for _sweep in 0..10_000 {
        let mut change = 0.0_f64;
        for j in 0..p {
            let idx: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            for _ in 0..100_000 {
                let mut step = 0.0_f64;
                for &k in &idx {
                    let mut rk = s[(k, j)];
                    for &l in &idx {
                        if l != k {
                            rk -= w[(k, l)] * beta[(l, j)];
                        }
                    }
                    let nb = soft(rk, lambda) / w[(k, k)];
                    step = step.max((nb - beta[(k, j)]).abs());
                    beta[(k, j)] = nb;
                }
                if step < 1e-15 {
                    break;
                }
            }
            for &k in &idx {
                let v: f64 = idx.iter().map(|&l| w[(k, l)] * beta[(l, j)]).sum();
                change = change.max((v - w[(k, j)]).abs());
                w[(k, j)] = v;
                w[(j, k)] = v;
            }
        }
        if change < 1e-14 {
            break;
        }
    }
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let idx: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let wb: f64 = idx.iter().map(|&k| w[(k, j)] * beta[(k, j)]).sum();
        let tjj = 1.0 / (w[(j, j)] - wb);
        theta[(j, j)] = tjj;
        for &k in &idx {
            theta[(k, j)] = -beta[(k, j)] * tjj;
        }
    }
    (&theta + theta.transpose()) * 0.5
}
