//! Tidy CSV tables for the simulation studies. Missing values are empty cells.

use std::path::Path;

use anyhow::{Context, Result};
use quilt_core::simlab::{AucRow, RatesTable};

use crate::io::fmt_f64;

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_rates(path: &Path, table: &RatesTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "family",
        "eta_target",
        "eta",
        "q0",
        "p",
        "n",
        "n_bar",
        "replicates_ok",
        "failures",
        "loss_q",
        "lambda_median",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.family.clone(),
            fmt_f64(r.eta_target),
            fmt_f64(r.eta),
            r.q0.to_string(),
            r.p.to_string(),
            r.n.to_string(),
            r.n_bar.to_string(),
            r.replicates_ok.to_string(),
            r.failures.to_string(),
            opt(r.loss_q),
            opt(r.lambda_median),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per η target: `loss ≈ c · (n̄ / log p)^(−beta)`.
pub fn write_fits(path: &Path, family: &str, table: &RatesTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["family", "eta_target", "points", "c", "beta"])?;
    for (eta, fit) in &table.fits {
        w.write_record([
            family.to_string(),
            fmt_f64(*eta),
            fit.as_ref().map_or(String::new(), |f| f.points.to_string()),
            opt(fit.as_ref().map(|f| f.c)),
            opt(fit.as_ref().map(|f| f.beta)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_auc(path: &Path, rows: &[AucRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "family",
        "eta_target",
        "eta",
        "unobserved_edge_share",
        "p",
        "n",
        "n_bar",
        "replicates_ok",
        "failures",
        "auc_o",
        "auc_oc_s",
        "auc_oc_u",
    ])?;
    for r in rows {
        w.write_record([
            r.family.clone(),
            fmt_f64(r.eta_target),
            fmt_f64(r.eta),
            fmt_f64(r.unobserved_edge_share),
            r.p.to_string(),
            r.n.to_string(),
            r.n_bar.to_string(),
            r.replicates_ok.to_string(),
            r.failures.to_string(),
            opt(r.auc_o),
            opt(r.auc_oc_s),
            opt(r.auc_oc_u),
        ])?;
    }
    w.flush()?;
    Ok(())
}
