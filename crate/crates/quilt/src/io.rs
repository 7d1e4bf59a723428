//! On-disk formats. Node indices are 1-based in every file and 0-based in
//! memory; floats are written in Rust's shortest round-trip form so that
//! identical values always produce identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use quilt_core::{DMatrix, EdgeSet, IndicatorData, ObservationScheme, PartialCovariance, PrecisionEstimate};
use serde::{Deserialize, Serialize};

use crate::error::input_error;

/// `{"p": int, "subsets": [[int, ...], ...]}`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub p: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl SchemeFile {
    pub fn from_scheme(s: &ObservationScheme) -> Self {
        Self { p: s.p(), subsets: s.subsets().iter().map(|v| v.iter().map(|i| i + 1).collect()).collect() }
    }

    pub fn to_scheme(&self) -> Result<ObservationScheme> {
        let subsets = self
            .subsets
            .iter()
            .map(|v| v.iter().map(|&i| to_zero_based(i, self.p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(ObservationScheme::build(self.p, &subsets)?)
    }
}

/// Sibling of an exported covariance: the subsets it was computed under and
/// the joint sample sizes `n_ij` as a dense `p × p` array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub p: usize,
    pub subsets: Vec<Vec<usize>>,
    pub n_ij: Vec<Vec<u64>>,
}

fn to_zero_based(i: usize, p: usize) -> Result<usize> {
    if i == 0 || i > p {
        return Err(input_error(format!("node index {i} outside 1..={p}")));
    }
    Ok(i - 1)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("malformed JSON in {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_scheme(path: &Path) -> Result<ObservationScheme> {
    read_json::<SchemeFile>(path)?.to_scheme().with_context(|| format!("invalid scheme in {}", path.display()))
}

pub fn write_scheme(path: &Path, s: &ObservationScheme) -> Result<()> {
    write_json(path, &SchemeFile::from_scheme(s))
}

/// Rows of optional cells; empty (after trimming) means absent. All rows
/// must have the same width.
fn read_cells(path: &Path, header: bool) -> Result<Vec<Vec<Option<f64>>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).from_reader(open(path)?);
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("malformed CSV in {}", path.display()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                let v: f64 = cell.parse().with_context(|| {
                    format!("{}: row {}, column {}: not a number: {cell:?}", path.display(), r + 1, c + 1)
                })?;
                if !v.is_finite() {
                    return Err(input_error(format!(
                        "{}: row {}, column {}: non-finite value",
                        path.display(),
                        r + 1,
                        c + 1
                    )));
                }
                Ok(Some(v))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Data CSV: one row per sample, one column per variable, empty cell = unobserved.
pub fn read_data(path: &Path, header: bool) -> Result<IndicatorData> {
    let rows = read_cells(path, header)?;
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if n == 0 || p == 0 {
        return Err(input_error(format!("{} contains no samples", path.display())));
    }
    let mut observed = Vec::with_capacity(n * p);
    let samples = DMatrix::from_fn(n, p, |r, c| rows[r][c].unwrap_or(0.0));
    for row in &rows {
        observed.extend(row.iter().map(Option::is_some));
    }
    Ok(IndicatorData::new(samples, observed)?)
}

fn write_rows<I, R>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w =
        csv::WriterBuilder::new().from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Dense square matrix, no header.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, (0..m.nrows()).map(|i| (0..m.ncols()).map(move |j| fmt_f64(m[(i, j)]))))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_cells(path, false)?;
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(input_error(format!("{} is not a square matrix", path.display())));
    }
    let mut m = DMatrix::zeros(p, p);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] =
                v.ok_or_else(|| input_error(format!("{}: empty cell at ({}, {})", path.display(), i + 1, j + 1)))?;
        }
    }
    Ok(m)
}

/// A precision matrix must be symmetric and positive definite.
pub fn read_precision(path: &Path) -> Result<PrecisionEstimate> {
    let m = read_matrix(path)?;
    PrecisionEstimate::new(m).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// Covariance CSV with empty cells on `O^c`, plus the counts JSON.
pub fn write_partial_covariance(cov_path: &Path, counts_path: &Path, cov: &PartialCovariance) -> Result<()> {
    let p = cov.p();
    write_rows(cov_path, (0..p).map(|i| (0..p).map(move |j| cov.get(i, j).map(fmt_f64).unwrap_or_default())))?;
    let s = cov.scheme();
    let n_ij = (0..p).map(|i| (0..p).map(|j| s.n_ij(i, j).unwrap_or(0)).collect()).collect();
    let file = CountsFile { p, subsets: SchemeFile::from_scheme(s).subsets, n_ij };
    write_json(counts_path, &file)
}

pub fn read_partial_covariance(cov_path: &Path, counts_path: &Path) -> Result<PartialCovariance> {
    let counts: CountsFile = read_json(counts_path)?;
    let p = counts.p;
    let scheme = SchemeFile { p, subsets: counts.subsets }.to_scheme()?;
    if counts.n_ij.len() != p || counts.n_ij.iter().any(|r| r.len() != p) {
        return Err(input_error(format!("{}: n_ij must be {p} × {p}", counts_path.display())));
    }
    let scheme = scheme.with_joint_n(counts.n_ij.concat())?;
    let rows = read_cells(cov_path, false)?;
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(input_error(format!("{} must be {p} × {p}", cov_path.display())));
    }
    Ok(PartialCovariance::from_entries(rows.concat(), scheme)?)
}

/// Single column of values (a header-free CSV with one value per row).
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let rows = read_cells(path, false)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| match row.as_slice() {
            [Some(v)] => Ok(*v),
            _ => Err(input_error(format!("{}: row {} must hold exactly one value", path.display(), r + 1))),
        })
        .collect()
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_rows(path, v.iter().map(|x| [fmt_f64(*x)]))
}

/// `[[i, j], ...]`, 1-based with `i < j`, in lexicographic order.
pub fn edges_to_json(e: &EdgeSet) -> Vec<[usize; 2]> {
    e.iter().map(|(i, j)| [i + 1, j + 1]).collect()
}

pub fn write_edges(path: &Path, e: &EdgeSet) -> Result<()> {
    let mut s = serde_json::to_string(&edges_to_json(e))?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("cannot write {}", path.display()))
}

/// Raw 1-based pairs; the caller decides `p`.
pub fn read_edge_pairs(path: &Path) -> Result<Vec<[usize; 2]>> {
    read_json(path)
}

pub fn edges_from_pairs(p: usize, pairs: &[[usize; 2]]) -> Result<EdgeSet> {
    let zero =
        pairs.iter().map(|&[i, j]| Ok((to_zero_based(i, p)?, to_zero_based(j, p)?))).collect::<Result<Vec<_>>>()?;
    Ok(EdgeSet::from_pairs(p, zero)?)
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(bytes_digest(&bytes))
}

pub fn bytes_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Writes plain text, creating the file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
