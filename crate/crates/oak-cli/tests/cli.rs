//! End-to-end tests running the compiled `oak` binary against small
//! on-disk fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oak::{synthetic_dataset, write_dataset};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oak"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

/// One triangle with a uniform vertex label, in the four-file text
/// layout read by the parser. The directory name doubles as the
/// dataset name.
fn triangle_fixture(parent: &Path) -> PathBuf {
    let dir = parent.join("TRI");
    fs::create_dir(&dir).unwrap();
    for (suffix, body) in [
        ("A", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n"),
        ("graph_indicator", "1\n1\n1\n"),
        ("graph_labels", "1\n"),
        ("node_labels", "7\n7\n7\n"),
    ] {
        fs::write(dir.join(format!("TRI_{suffix}.txt")), body).unwrap();
    }
    dir
}

/// A seeded 12-graph dataset round-tripped through the text format.
fn synthetic_fixture(parent: &Path) -> PathBuf {
    let dir = parent.join("synthetic");
    fs::create_dir(&dir).unwrap();
    let dataset = synthetic_dataset(41, 12, 8, 0.4, 3, 2);
    write_dataset(&dir, &dataset).unwrap();
    dir
}

#[test]
fn gram_vertex_kernel_on_triangle() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&["gram", "--dataset", dir.to_str().unwrap(), "--kernel", "V"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), "1 V\n9\n");
}

#[test]
fn unknown_kernel_exits_two() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&[
        "gram",
        "--dataset",
        dir.to_str().unwrap(),
        "--kernel",
        "bogus",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn missing_dataset_exits_three() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("NOPE");
    let out = run(&["gram", "--dataset", dir.to_str().unwrap(), "--kernel", "V"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NOPE"));
}

#[test]
fn malformed_indicator_exits_one() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    fs::write(dir.join("TRI_graph_indicator.txt"), "1\nbanana\n1\n").unwrap();
    let out = run(&["gram", "--dataset", dir.to_str().unwrap(), "--kernel", "V"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn indefinite_matrix_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("indef.txt");
    fs::write(&path, "1 2\n2 1\n").unwrap();
    let out = run(&["validate", "--matrix", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("psd: false"));
}

#[test]
fn validate_gram_with_oracle_passes() {
    let tmp = TempDir::new().unwrap();
    let dir = synthetic_fixture(tmp.path());
    for kernel in ["V-OA", "E-OA", "WL-OA"] {
        let out = run(&[
            "validate",
            "--dataset",
            dir.to_str().unwrap(),
            "--kernel",
            kernel,
            "--h",
            "3",
            "--oracle",
            "--seed",
            "11",
        ]);
        assert!(out.status.success(), "{kernel} stderr: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("psd: true"), "{kernel}: {text}");
        assert!(text.contains("oracle:"), "{kernel}: {text}");
    }
}

#[test]
fn oracle_rejects_non_assignment_kernels() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&[
        "validate",
        "--dataset",
        dir.to_str().unwrap(),
        "--kernel",
        "WL",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("oracle"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let dir = synthetic_fixture(tmp.path());
    let args = |path: &Path| {
        vec![
            "gram".to_string(),
            "--dataset".to_string(),
            dir.to_str().unwrap().to_string(),
            "--kernel".to_string(),
            "WL-OA".to_string(),
            "--h".to_string(),
            "4".to_string(),
            "--normalize".to_string(),
            "--format".to_string(),
            "libsvm".to_string(),
            "--output".to_string(),
            path.to_str().unwrap().to_string(),
        ]
    };
    let (a, b) = (tmp.path().join("a.txt"), tmp.path().join("b.txt"));
    for (path, threads) in [(&a, "1"), (&b, "4")] {
        let mut argv = args(path);
        argv.extend(["--threads".to_string(), threads.to_string()]);
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = run(&refs);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn dense_and_libsvm_agree() {
    let tmp = TempDir::new().unwrap();
    let dir = synthetic_fixture(tmp.path());
    let base = ["gram", "--dataset", dir.to_str().unwrap(), "--kernel", "SP"];
    let dense = run(&base);
    let mut libsvm_args = base.to_vec();
    libsvm_args.extend(["--format", "libsvm"]);
    let libsvm = run(&libsvm_args);
    assert!(dense.status.success() && libsvm.status.success());

    let dense_text = stdout(&dense);
    let mut dense_lines = dense_text.lines();
    let header = dense_lines.next().unwrap();
    assert_eq!(header, "12 SP");
    let dense_rows: Vec<Vec<f64>> = dense_lines
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect();

    for (i, line) in stdout(&libsvm).lines().enumerate() {
        let mut tokens = line.split_whitespace();
        tokens.next().expect("class label");
        assert_eq!(tokens.next().unwrap(), format!("0:{}", i + 1));
        for (j, token) in tokens.enumerate() {
            let (idx, value) = token.split_once(':').unwrap();
            assert_eq!(idx, (j + 1).to_string());
            assert_eq!(value.parse::<f64>().unwrap(), dense_rows[i][j]);
        }
    }
}

#[test]
fn normalized_diagonal_is_unit() {
    let tmp = TempDir::new().unwrap();
    let dir = synthetic_fixture(tmp.path());
    let out = run(&[
        "gram",
        "--dataset",
        dir.to_str().unwrap(),
        "--kernel",
        "WL-OA",
        "--h",
        "2",
        "--normalize",
        "--format",
        "libsvm",
    ]);
    assert!(out.status.success());
    for (i, line) in stdout(&out).lines().enumerate() {
        let needle = format!(" {}:1 ", i + 1);
        let padded = format!("{line} ");
        assert!(
            padded.contains(&needle),
            "row {i} lacks a unit diagonal: {line}"
        );
    }
}

#[test]
fn normalized_header_is_tagged() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&[
        "gram",
        "--dataset",
        dir.to_str().unwrap(),
        "--kernel",
        "WL-OA",
        "--h",
        "1",
        "--normalize",
    ]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out).lines().next().unwrap(),
        "1 WL-OA h=1 normalized"
    );
}

#[test]
fn validate_round_trip_via_matrix_file() {
    let tmp = TempDir::new().unwrap();
    let dir = synthetic_fixture(tmp.path());
    let path = tmp.path().join("gram.txt");
    let out = run(&[
        "gram",
        "--dataset",
        dir.to_str().unwrap(),
        "--kernel",
        "V-OA",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let check = run(&["validate", "--matrix", path.to_str().unwrap()]);
    assert!(check.status.success(), "stderr: {}", stderr(&check));
    assert!(stdout(&check).contains("psd: true"));
}

#[test]
fn bench_empty_dataset_exits_one() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("EMPTY");
    fs::create_dir(&dir).unwrap();
    for suffix in ["A", "graph_indicator", "graph_labels", "node_labels"] {
        fs::write(dir.join(format!("EMPTY_{suffix}.txt")), "").unwrap();
    }
    let out = run(&["bench", "--dataset", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_every_kernel() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&["bench", "--dataset", dir.to_str().unwrap(), "--h", "1"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("kernel,h,graphs,gram_ms\n"));
    for kernel in [
        "V,", "E,", "V-OA,", "E-OA,", "WL,1,", "WL-OA,1,", "GL,", "SP,",
    ] {
        assert!(
            text.contains(&format!("\n{kernel}")),
            "missing row for {kernel}"
        );
    }
}

#[test]
fn inspect_reports_counts() {
    let tmp = TempDir::new().unwrap();
    let dir = triangle_fixture(tmp.path());
    let out = run(&["inspect", "--dataset", dir.to_str().unwrap(), "--wl-h", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for needle in [
        "dataset: TRI",
        "graphs: 1",
        "vertices: 3",
        "edges: 3",
        "label alphabet: 1",
        "classes: 1:1",
        "wl colours: 0:1 1:1 2:1",
    ] {
        assert!(text.contains(needle), "missing '{needle}' in: {text}");
    }
}
