mod common;

use std::fs;

use common::{glasso_cd, path_str, quilt, quilt_ok, read_json};
use quilt::io;
use quilt_core::DMatrix;

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn version_is_machine_readable() {
    let out = quilt_ok(&["--version"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), format!("quilt {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn cov_of_complete_toy_is_dense() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "x,y,z\n1,2,0\n2,1,1\n3,5,0\n6,0,3\n");
    let out = dir.path().join("out");
    quilt_ok(&["cov", "--data", path_str(&data), "--header", "--out-dir", path_str(&out)]);
    let cov = io::read_matrix(&out.join("cov.csv")).unwrap();
    // Maximum-likelihood covariance (divisor n) computed by hand.
    let x = [[1.0, 2.0, 0.0], [2.0, 1.0, 1.0], [3.0, 5.0, 0.0], [6.0, 0.0, 3.0]];
    let mean: Vec<f64> = (0..3).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / 4.0).collect();
    for i in 0..3 {
        for j in 0..3 {
            let want = x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / 4.0;
            assert!((cov[(i, j)] - want).abs() < 1e-12, "({i},{j}) {} vs {want}", cov[(i, j)]);
        }
    }
    let counts = read_json(&out.join("counts.json"));
    assert_eq!(counts["n_ij"][0][2], 4);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "cov");
    assert_eq!(manifest["inputs"][path_str(&data)], io::file_digest(&data).unwrap());
    assert_eq!(manifest["outputs"]["cov.csv"], io::file_digest(&out.join("cov.csv")).unwrap());
}

#[test]
fn cov_with_block_missingness() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "1,2,\n2,0,\n0,1,\n,1,2\n,3,1\n");
    let out = dir.path().join("out");
    quilt_ok(&["cov", "--data", path_str(&data), "--out-dir", path_str(&out)]);
    let text = fs::read_to_string(out.join("cov.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert!(rows[0][2].is_empty() && rows[2][0].is_empty());
    assert!(!rows[1][1].is_empty());
    let counts = read_json(&out.join("counts.json"));
    assert_eq!(counts["n_ij"], serde_json::json!([[3, 3, 0], [3, 5, 2], [0, 2, 2]]));
    assert_eq!(counts["subsets"], serde_json::json!([[1, 2], [2, 3]]));
    // Variable 2 has mean 7/5 over all five rows; the (1,2) entry uses the
    // first three rows with the marginal means.
    let cov = io::read_partial_covariance(&out.join("cov.csv"), &out.join("counts.json")).unwrap();
    let m1 = 1.0;
    let m2 = 7.0 / 5.0;
    let want = (1.0 * 2.0 + 2.0 * 0.0 + 0.0 * 1.0) / 3.0 - m1 * m2;
    assert!((cov.get(0, 1).unwrap() - want).abs() < 1e-12);
}

#[test]
fn empty_column_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "1,,2\n2,,1\n3,,0\n");
    let out = quilt(&["cov", "--data", path_str(&data), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("variable") && err.contains("at least 2"), "{err}");
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "1,2\n3,abc\n");
    let out = quilt(&["cov", "--data", path_str(&data), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = quilt(&["cov", "--data", path_str(&dir.path().join("missing.csv")), "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

fn toy_data(n: usize, p: usize) -> (String, DMatrix<f64>) {
    // Deterministic, well-spread rows.
    let x = DMatrix::from_fn(n, p, |r, c| {
        ((r * 7 + c * 13) % 11) as f64 / 3.0 + ((r * c) % 5) as f64 * 0.25 + (r as f64 * 0.37).sin()
    });
    let text: String =
        (0..n).map(|r| (0..p).map(|c| format!("{}", x[(r, c)])).collect::<Vec<_>>().join(",") + "\n").collect();
    (text, x)
}

#[test]
fn fit_on_full_data_matches_coordinate_descent_glasso() {
    let dir = tempfile::tempdir().unwrap();
    let (text, x) = toy_data(30, 5);
    let data = write(dir.path(), "x.csv", &text);
    let out = dir.path().join("fit");
    quilt_ok(&["fit", "--data", path_str(&data), "--lambda", "0.1", "--tol", "1e-11", "--out-dir", path_str(&out)]);
    let theta = io::read_matrix(&out.join("theta.csv")).unwrap();

    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - mean[c]);
    let s = centred.transpose() * &centred / n;
    let oracle = glasso_cd(&s, 0.1);
    let diff = (&theta - &oracle).abs().max();
    assert!(diff < 1e-6, "max difference {diff}");

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["fits"][0]["status"], "converged");
    assert_eq!(report["missingness_ratio"], 0.0);
    let edges = read_json(&out.join("edges.json"));
    let nonzero = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).filter(|&(i, j)| theta[(i, j)] != 0.0).count();
    assert_eq!(edges.as_array().unwrap().len(), nonzero);
}

#[test]
fn fit_from_exported_covariance_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (text, _) = toy_data(40, 4);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Rows 0..20 miss variable 4, rows 20..40 miss variable 1.
    for (r, l) in lines.iter_mut().enumerate() {
        let mut cells: Vec<String> = l.split(',').map(String::from).collect();
        cells[if r < 20 { 3 } else { 0 }].clear();
        *l = cells.join(",");
    }
    let data = write(dir.path(), "x.csv", &(lines.join("\n") + "\n"));
    let cov_dir = dir.path().join("cov");
    quilt_ok(&["cov", "--data", path_str(&data), "--out-dir", path_str(&cov_dir)]);
    let out = dir.path().join("fit");
    quilt_ok(&[
        "fit",
        "--cov",
        path_str(&cov_dir.join("cov.csv")),
        "--lambda-grid",
        "0.5,0.05",
        "--out-dir",
        path_str(&out),
    ]);
    let t1 = io::read_matrix(&out.join("theta_001.csv")).unwrap();
    let t2 = io::read_matrix(&out.join("theta_002.csv")).unwrap();
    assert_eq!((t1[(0, 3)], t2[(0, 3)]), (0.0, 0.0));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["fits"].as_array().unwrap().len(), 2);
    assert_eq!(report["n_bar"], 20);

    // A cold start straight from the data reaches the same point as the warm-started path.
    let direct = dir.path().join("direct");
    quilt_ok(&["fit", "--data", path_str(&data), "--lambda", "0.05", "--out-dir", path_str(&direct)]);
    let cold = io::read_matrix(&direct.join("theta.csv")).unwrap();
    assert!((&cold - &t2).abs().max() < 1e-6);
}

#[test]
fn fit_nonconvergence_exits_three_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let (text, _) = toy_data(30, 5);
    let data = write(dir.path(), "x.csv", &text);
    let out = dir.path().join("fit");
    let res =
        quilt(&["fit", "--data", path_str(&data), "--lambda", "0.01", "--max-iter", "1", "--out-dir", path_str(&out)]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["fits"][0]["converged"], false);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn fit_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (text, _) = toy_data(10, 3);
    let data = write(dir.path(), "x.csv", &text);
    let o = dir.path().join("o");
    let res = quilt(&["fit", "--data", path_str(&data), "--out-dir", path_str(&o)]);
    assert_eq!(res.status.code(), Some(2));
    let res = quilt(&["fit", "--data", path_str(&data), "--lambda", "-1", "--out-dir", path_str(&o)]);
    assert_eq!(res.status.code(), Some(2));
}

const THREE_NODE_TILDE: &str = "0.96,0.24,0\n0.24,0.97,0.24\n0,0.24,0.96\n";
const THREE_NODE_SCHEME: &str = r#"{"p": 3, "subsets": [[1, 2], [2, 3]]}"#;

#[test]
fn reco_golden_three_node_instance() {
    let dir = tempfile::tempdir().unwrap();
    let theta = write(dir.path(), "theta.csv", THREE_NODE_TILDE);
    let scheme = write(dir.path(), "scheme.json", THREE_NODE_SCHEME);
    let out = dir.path().join("u");
    quilt_ok(&[
        "reco",
        "--theta",
        path_str(&theta),
        "--scheme",
        path_str(&scheme),
        "--xi1",
        "0",
        "--xi2",
        "0.3",
        "--out-dir",
        path_str(&out),
    ]);
    let r = read_json(&out.join("reco.json"));
    assert_eq!(r["candidate_edges"], serde_json::json!([[1, 3]]));
    assert_eq!(r["mode"], "unknown_diag");
    assert_eq!(r["lower_bound"], 1);

    let diag = write(dir.path(), "diag.csv", "1\n1\n1\n");
    let out = dir.path().join("s");
    quilt_ok(&[
        "reco",
        "--theta",
        path_str(&theta),
        "--scheme",
        path_str(&scheme),
        "--true-diag",
        path_str(&diag),
        "--slack",
        "1e-9",
        "--out-dir",
        path_str(&out),
    ]);
    let r = read_json(&out.join("reco.json"));
    assert_eq!(r["candidate_edges"], serde_json::json!([[1, 3]]));
    assert_eq!(r["mode"], "known_diag");
    assert_eq!(r["flagged_nodes"], serde_json::json!([1, 2, 3]));

    // --nu alone gives the band (0, ν).
    let out = dir.path().join("nu");
    quilt_ok(&[
        "reco",
        "--theta",
        path_str(&theta),
        "--scheme",
        path_str(&scheme),
        "--nu",
        "0.3",
        "--out-dir",
        path_str(&out),
    ]);
    assert_eq!(read_json(&out.join("reco.json"))["xi2"], 0.3);
}

#[test]
fn reco_bootstrap_band() {
    let dir = tempfile::tempdir().unwrap();
    let (text, _) = toy_data(60, 3);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    for (r, l) in lines.iter_mut().enumerate() {
        let mut cells: Vec<String> = l.split(',').map(String::from).collect();
        cells[if r % 2 == 0 { 2 } else { 0 }].clear();
        *l = cells.join(",");
    }
    let data = write(dir.path(), "x.csv", &(lines.join("\n") + "\n"));
    let theta = write(dir.path(), "theta.csv", THREE_NODE_TILDE);
    let scheme = write(dir.path(), "scheme.json", THREE_NODE_SCHEME);
    let args = |out: &str| {
        vec![
            "reco".to_string(),
            "--theta".into(),
            path_str(&theta).into(),
            "--scheme".into(),
            path_str(&scheme).into(),
            "--nu".into(),
            "100".into(),
            "--bootstrap".into(),
            "20".into(),
            "--data".into(),
            path_str(&data).into(),
            "--lambda".into(),
            "0.05".into(),
            "--seed".into(),
            "3".into(),
            "--out-dir".into(),
            path_str(&dir.path().join(out)).into(),
        ]
    };
    let a = args("a");
    quilt_ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let b = args("b");
    quilt_ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    let ra = read_json(&dir.path().join("a/reco.json"));
    let sd = ra["bootstrap_sd"].as_f64().unwrap();
    assert!(sd > 0.0);
    assert!((ra["xi1"].as_f64().unwrap() - 2.0 * sd).abs() < 1e-12);
    assert!((ra["xi2"].as_f64().unwrap() - (100.0 - 2.0 * sd)).abs() < 1e-12);
    assert_eq!(fs::read(dir.path().join("a/reco.json")).unwrap(), fs::read(dir.path().join("b/reco.json")).unwrap());
}

#[test]
fn threshold_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let theta = write(dir.path(), "theta.csv", "1,0.3,0.05,0\n0.3,1,-0.2,0\n0.05,-0.2,1,0.4\n0,0,0.4,1\n");
    let out = dir.path().join("t");
    quilt_ok(&["threshold", "--theta", path_str(&theta), "--tau", "0.1", "--out-dir", path_str(&out)]);
    assert_eq!(read_json(&out.join("edges.json")), serde_json::json!([[1, 2], [2, 3], [3, 4]]));

    let scheme = write(dir.path(), "s.json", r#"{"p": 4, "subsets": [[1, 2, 3], [3, 4]]}"#);
    let out2 = dir.path().join("t2");
    quilt_ok(&[
        "threshold",
        "--theta",
        path_str(&theta),
        "--tau",
        "0.01",
        "--scheme",
        path_str(&scheme),
        "--out-dir",
        path_str(&out2),
    ]);
    assert_eq!(read_json(&out2.join("edges.json")), serde_json::json!([[1, 2], [1, 3], [2, 3], [3, 4]]));

    let e = out.join("edges.json");
    let m = dir.path().join("m");
    quilt_ok(&["evaluate", path_str(&e), path_str(&e), "--out-dir", path_str(&m)]);
    let metrics = read_json(&m.join("metrics.json"));
    assert_eq!(metrics["all"]["sens"], 1.0);
    assert_eq!(metrics["all"]["spec"], 1.0);

    let truth = write(dir.path(), "truth.json", "[[1,2],[1,4],[3,4]]");
    quilt_ok(&["evaluate", path_str(&e), path_str(&truth), "--scheme", path_str(&scheme), "--out-dir", path_str(&m)]);
    let metrics = read_json(&m.join("metrics.json"));
    assert_eq!(metrics["p"], 4);
    assert_eq!(metrics["all"]["tp"], 2);
    assert_eq!(metrics["all"]["fp"], 1);
    assert_eq!(metrics["all"]["fn"], 1);
    // O^c = {(1,4), (2,4)}: the missed edge (1,4) lives there.
    assert_eq!(metrics["unobserved"]["pairs"], 2);
    assert_eq!(metrics["unobserved"]["sens"], 0.0);
    assert_eq!(metrics["observed"]["sens"], 1.0);

    let bad = write(dir.path(), "bad.json", "[[0,1]]");
    let res = quilt(&["evaluate", path_str(&bad), path_str(&truth), "--p", "4", "--out-dir", path_str(&m)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn simulate_rejects_unknown_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"graph": {"family": "chain"}, "p_grid": [10], "n_grid": [60], "eta_grid": [0.1], "replicates": 1, "bogus": 1}"#,
    );
    let res = quilt(&["simulate", "rates", "--config", path_str(&cfg), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn simulate_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"graph": {"family": "erdos_renyi", "pi": 0.2}, "p_grid": [12], "n_grid": [200, 2000],
            "eta_grid": [0.1, 0.2], "replicates": 2, "lambda_grid": {"kind": "scaled", "lo": 0.1, "hi": 3, "points": 5}}"#,
    );
    let rates = dir.path().join("rates");
    quilt_ok(&["simulate", "rates", "--config", path_str(&cfg), "--seed", "7", "--out-dir", path_str(&rates)]);
    let table = fs::read_to_string(rates.join("rates.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("family,eta_target,eta,q0,p,n,n_bar,"));
    assert_eq!(fs::read_to_string(rates.join("fits.csv")).unwrap().lines().count(), 3);
    let manifest = read_json(&rates.join("manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["seed"], 7);

    let auc = dir.path().join("auc");
    quilt_ok(&[
        "simulate",
        "auc",
        "--config",
        path_str(&cfg),
        "--seed",
        "7",
        "--threads",
        "2",
        "--out-dir",
        path_str(&auc),
    ]);
    let table = fs::read_to_string(auc.join("auc.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().next().unwrap().ends_with("auc_o,auc_oc_s,auc_oc_u"));
}
