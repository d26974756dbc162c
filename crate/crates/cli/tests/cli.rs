//! End-to-end runs of the msvm binary.

use std::path::Path;
use std::process::{Command, Output};

fn msvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msvm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_toy_csv(path: &Path) {
    // Three separated classes, two variables, four points each.
    let mut text = String::from("x1,x2,label\n");
    let centers = [(2.0, 0.0), (-2.0, 0.0), (0.0, 2.0)];
    let jitter = [(0.1, 0.1), (-0.1, 0.0), (0.0, -0.1), (0.12, -0.05)];
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for &(jx, jy) in &jitter {
            text.push_str(&format!("{},{},{}\n", cx + jx, cy + jy, c + 1));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn train_and_predict_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_toy_csv(&data);
    let model = dir.path().join("model.txt");
    let errors = dir.path().join("lambda.csv");

    let out = msvm(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--penalty",
        "supnorm",
        "--loocv",
        "--grid",
        "-8:2",
        "--out",
        model.to_str().unwrap(),
        "--errors-out",
        errors.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());
    let table = std::fs::read_to_string(&errors).unwrap();
    assert!(table.starts_with("log2_lambda,lambda,error,status"));
    assert_eq!(table.lines().count(), 12); // header + 11 grid points

    // Predicting the training data back: separable, near-zero lambda fits
    // drive the error to zero; the tuned model should also be perfect.
    let preds = dir.path().join("preds.csv");
    let out = msvm(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("misclassification: 0/12"),
        "unexpected: {stdout}"
    );
    let preds_text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(preds_text.lines().count(), 13); // header + 12 rows
}

#[test]
fn huge_lambda_empties_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_toy_csv(&data);
    let model = dir.path().join("model.txt");
    let out = msvm(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--penalty",
        "supnorm",
        "--lambda",
        "1e6",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&model).unwrap();
    for line in text.lines().filter(|l| l.starts_with("w ")) {
        for tok in line[2..].split_whitespace() {
            assert_eq!(tok.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn missing_tuning_choice_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_toy_csv(&data);
    let out = msvm(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--penalty",
        "l1",
        "--out",
        dir.path().join("m.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_design_exits_2() {
    let out = msvm(&["simulate", "--design", "six-class", "--out-dir", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_dimension_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_toy_csv(&data);
    let model = dir.path().join("model.txt");
    let out = msvm(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--penalty",
        "l1",
        "--lambda",
        "0.01",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "x1,x2,x3,label\n1,2,3,1\n").unwrap();
    let out = msvm(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        wide.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_csv_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,label\n0.5,1\noops,2\n").unwrap();
    let out = msvm(&[
        "train",
        "--data",
        bad.to_str().unwrap(),
        "--penalty",
        "l1",
        "--lambda",
        "0.1",
        "--out",
        dir.path().join("m.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "stderr should name the line: {err}");
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path, threads: &str| {
        let out_flag = out.to_str().unwrap();
        let o = msvm(&[
            "simulate",
            "--design",
            "four-class",
            "--reps",
            "2",
            "--n",
            "24",
            "--n-test",
            "60",
            "--methods",
            "l1,supnorm,bayes",
            "--grid",
            "-4:2",
            "--seed",
            "11",
            "--bayes-mc",
            "2000",
            "--threads",
            threads,
            "--out-dir",
            out_flag,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run(&a, "1");
    run(&b, "1");
    run(&c, "4");
    for file in ["summary.csv", "frequency.csv"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        let fb = std::fs::read(b.join(file)).unwrap();
        let fc = std::fs::read(c.join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs across identical runs");
        assert_eq!(fa, fc, "{file} differs across thread counts");
    }
    // Both tables parse back with the library's own readers.
    let rows =
        msvm_core::metrics::read_summary_csv(a.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].method, "bayes");
    let freq = msvm_core::metrics::read_frequency_csv(a.join("frequency.csv")).unwrap();
    assert_eq!(freq.len(), 2);
    assert_eq!(freq[0].1.len(), 10);
    assert!(freq.iter().all(|(_, counts)| counts.iter().all(|&c| c <= 2)));
}

#[test]
fn simulate_materializes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let o = msvm(&[
        "simulate",
        "--design",
        "five-class",
        "--reps",
        "1",
        "--n",
        "25",
        "--n-tune",
        "25",
        "--n-test",
        "25",
        "--methods",
        "bayes",
        "--seed",
        "5",
        "--bayes-mc",
        "2000",
        "--materialize",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["train_r0.csv", "tune_r0.csv", "test_r0.csv"] {
        let d = msvm_core::Dataset::read_csv(out_dir.join(name)).unwrap();
        assert_eq!(d.n(), 25);
        assert_eq!(d.d(), 10);
    }
}

fn write_gene_fixture(dir: &Path) -> (String, String, String, String) {
    // 12 informative + 12 noise genes, 4 classes, 8 train / 4 test samples
    // per class. Informative gene g is high in class g % 4.
    let n_train = 32;
    let n_test = 16;
    let genes_info = 12;
    let genes_noise = 12;
    let mut state = 42u64;
    let mut rand = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
    };
    let label_of = |s: usize, n_per: usize| s / n_per + 1;

    let mut build = |n: usize, n_per: usize| {
        let mut text = String::from("gene");
        for s in 0..n {
            text.push_str(&format!(",s{s}"));
        }
        text.push('\n');
        for g in 0..genes_info {
            text.push_str(&format!("info{g}"));
            for s in 0..n {
                let boost = if label_of(s, n_per) == g % 4 + 1 { 3.0 } else { 0.0 };
                text.push_str(&format!(",{}", boost + 0.4 * rand()));
            }
            text.push('\n');
        }
        for g in 0..genes_noise {
            text.push_str(&format!("noise{g}"));
            for _ in 0..n {
                text.push_str(&format!(",{}", rand()));
            }
            text.push('\n');
        }
        text
    };
    let train_expr = build(n_train, 8);
    let test_expr = build(n_test, 4);
    let labels = |n: usize, n_per: usize| {
        let mut t = String::from("label\n");
        for s in 0..n {
            t.push_str(&format!("{}\n", label_of(s, n_per)));
        }
        t
    };
    let paths = (
        dir.join("train_expr.csv"),
        dir.join("train_labels.csv"),
        dir.join("test_expr.csv"),
        dir.join("test_labels.csv"),
    );
    std::fs::write(&paths.0, train_expr).unwrap();
    std::fs::write(&paths.1, labels(n_train, 8)).unwrap();
    std::fs::write(&paths.2, test_expr).unwrap();
    std::fs::write(&paths.3, labels(n_test, 4)).unwrap();
    (
        paths.0.to_str().unwrap().into(),
        paths.1.to_str().unwrap().into(),
        paths.2.to_str().unwrap().into(),
        paths.3.to_str().unwrap().into(),
    )
}

#[test]
fn genes_pipeline_runs_and_reports_groups() {
    let dir = tempfile::tempdir().unwrap();
    let (tr_e, tr_l, te_e, te_l) = write_gene_fixture(dir.path());
    let out_dir = dir.path().join("genes");
    let o = msvm(&[
        "genes",
        "--train-expr",
        &tr_e,
        "--train-labels",
        &tr_l,
        "--test-expr",
        &te_e,
        "--test-labels",
        &te_l,
        "--top",
        "10",
        "--bottom",
        "10",
        "--penalty",
        "supnorm",
        "--grid",
        "-8:4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let ranked = std::fs::read_to_string(out_dir.join("ranked.csv")).unwrap();
    assert!(ranked.starts_with("gene_id,relevance,group"));
    // All informative genes outrank all noise genes.
    let order: Vec<&str> = ranked
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(order[..12].iter().all(|g| g.starts_with("info")));

    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("selected_bottom 0"), "{summary}");

    let selected = std::fs::read_to_string(out_dir.join("selected.csv")).unwrap();
    assert!(selected.lines().count() >= 2);
    assert!(!selected.contains("noise"));
}

#[test]
fn genes_empty_screen_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (tr_e, tr_l, te_e, te_l) = write_gene_fixture(dir.path());
    let o = msvm(&[
        "genes",
        "--train-expr",
        &tr_e,
        "--train-labels",
        &tr_l,
        "--test-expr",
        &te_e,
        "--test-labels",
        &te_l,
        "--top",
        "0",
        "--bottom",
        "0",
        "--penalty",
        "supnorm",
        "--out-dir",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
