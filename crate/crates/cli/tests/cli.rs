use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use specline::angle::circular_distance;
use specline::linalg::{c64, CMatrix};
use specline::signal::{MeasurementVector, SinusoidModel};
use specline::toeplitz::CovarianceSequence;
use specline::vandermonde::{reconstruct, Atom, LineSpectrum};
use specline_cli::artifact::strip_timestamps;
use specline_cli::montecarlo::{quantiles, CSV_HEADER};

fn specline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specline"))
        .args(args)
        .env_remove("SPECLINE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = specline(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_sequence(path: &Path, s: &CovarianceSequence) {
    std::fs::write(path, serde_json::to_string(s).unwrap()).unwrap();
}

#[test]
fn generate_constant_signal_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let report = ok(&["generate", "--n", "8", "--freqs", "0", "--seed", "1", "--out", p(&out)]);
    assert!(report.contains("separation"));
    let v = read(&out);
    let x: MeasurementVector = serde_json::from_value(v.clone()).unwrap();
    assert_eq!((x.n(), x.len()), (8, 18));
    for t in 1..=8 {
        assert_eq!(x.sample(t), x.sample(0));
    }
    assert_eq!(v["channels"], 2);
    assert_eq!(v["provenance"]["master_seed"], 1);
    assert!(v["provenance"]["generator"].as_str().unwrap().contains("ChaCha20"));
    let model: SinusoidModel = serde_json::from_value(read(&dir.path().join("x.model.json"))).unwrap();
    assert_eq!(model.frequencies, vec![0.0]);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        ok(&["generate", "--n", "32", "--random-freqs", "3", "--snr-db", "5", "--seed", "11", "--out", p(out)]);
    }
    assert_eq!(strip_timestamps(&read(&a)), strip_timestamps(&read(&b)));
    assert_eq!(
        strip_timestamps(&read(&dir.path().join("a.model.json"))),
        strip_timestamps(&read(&dir.path().join("b.model.json")))
    );
    let c = dir.path().join("c.json");
    ok(&["generate", "--n", "32", "--random-freqs", "3", "--snr-db", "5", "--seed", "12", "--out", p(&c)]);
    assert_ne!(read(&a)["samples"], read(&c)["samples"]);
}

#[test]
fn malformed_flags_are_usage_errors() {
    for args in [
        vec!["generate", "--n", "8", "--out", "x.json"],
        vec!["generate", "--n", "eight", "--freqs", "0", "--out", "x.json"],
        vec!["generate", "--n", "8", "--freqs", "0", "--random-freqs", "2", "--out", "x.json"],
        vec!["estimate", "--in", "x.json", "--mode", "fast"],
        vec!["montecarlo", "--L", "4", "--out-dir", "d"],
        vec!["bogus"],
    ] {
        let out = specline(&args);
        assert_eq!(out.status.code(), Some(64), "{args:?}");
    }
}

#[test]
fn noiseless_four_tone_instance() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    let est = dir.path().join("est.json");
    let report = ok(&["generate", "--n", "64", "--freqs", "-0.3419,-0.0643,0.9193,1.3155", "--seed", "7", "--out", p(&x)]);
    assert!(report.contains("NOT satisfied"));
    ok(&["estimate", "--in", p(&x), "--mode", "noiseless", "--out", p(&est)]);
    let v = read(&est);
    let spec: LineSpectrum = serde_json::from_value(v.clone()).unwrap();
    let truth = [-0.3419, -0.0643, 0.9193, 1.3155];
    assert_eq!(spec.len(), 4);
    for (got, want) in spec.frequencies().iter().zip(truth) {
        assert!((got - want).abs() <= 1e-3);
    }
    assert_eq!(v["diagnostics"]["rank"], 4);
    assert_eq!(v["diagnostics"]["rank_ok"], true);
    assert_eq!(v["provenance"]["config"]["mode"], "noiseless");
}

#[test]
fn zero_input_gives_empty_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("zero.json");
    let est = dir.path().join("est.json");
    std::fs::write(&x, serde_json::to_string(&MeasurementVector::zeros(10)).unwrap()).unwrap();
    ok(&["estimate", "--in", p(&x), "--mode", "noiseless", "--out", p(&est)]);
    let v = read(&est);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 0);
    assert_eq!(v["diagnostics"]["objective"], 0.0);
}

#[test]
fn denoise_recovers_separated_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("y.json");
    let est = dir.path().join("est.json");
    ok(&[
        "generate", "--n", "64", "--random-freqs", "4", "--min-separation", "0.4", "--snr-db", "10", "--seed", "3", "--out", p(&x),
    ]);
    let report = ok(&["estimate", "--in", p(&x), "--mode", "denoise", "--out", p(&est), "--truth", p(&dir.path().join("y.model.json"))]);
    assert!(report.contains("frequency error"));
    let spec: LineSpectrum = serde_json::from_value(read(&est)).unwrap();
    let model: SinusoidModel = serde_json::from_value(read(&dir.path().join("y.model.json"))).unwrap();
    assert_eq!(spec.len(), 4);
    for want in &model.frequencies {
        let best = spec.frequencies().iter().map(|g| circular_distance(*g, *want)).fold(f64::INFINITY, f64::min);
        assert!(best <= 5e-2, "{want}: {best}");
    }
    assert!(read(&est)["diagnostics"]["tau"].as_f64().unwrap() > 0.0);
}

#[test]
fn solver_failure_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    ok(&["generate", "--n", "16", "--freqs", "0.3,2.0", "--seed", "2", "--out", p(&x)]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_iter": 3}"#).unwrap();
    let out = specline(&["estimate", "--in", p(&x), "--mode", "noiseless", "--solver-config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));

    // a rank threshold far below solver accuracy makes T(Sigma) numerically full rank
    let strict = dir.path().join("strict.json");
    std::fs::write(&strict, r#"{"epsilon_rank": 1e-14}"#).unwrap();
    let out = specline(&["estimate", "--in", p(&x), "--mode", "noiseless", "--solver-config", p(&strict)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("full rank"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"rho": -1}"#).unwrap();
    let out = specline(&["estimate", "--in", p(&x), "--mode", "noiseless", "--solver-config", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}

fn rank_one(u: [c64; 2]) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| u[i] * u[j].conj())
}

#[test]
fn decompose_files() {
    let dir = tempfile::tempdir().unwrap();
    let single = LineSpectrum::new(2, vec![Atom { theta: 0.8, q: rank_one([c64::new(1.0, 0.0), c64::new(0.2, 0.5)]) }]).unwrap();
    let one = dir.path().join("one.json");
    write_sequence(&one, &reconstruct(&single, 4));
    let out = dir.path().join("one.out.json");
    ok(&["decompose", "--in", p(&one), "--out", p(&out)]);
    let spec: LineSpectrum = serde_json::from_value(read(&out)).unwrap();
    assert_eq!(spec.len(), 1);
    assert!((spec.atoms()[0].theta - 0.8).abs() < 1e-10);

    let three = LineSpectrum::new(
        2,
        [(-2.0, [0.4, 0.9]), (0.4, [1.0, -0.3]), (2.2, [0.6, 0.6])]
            .iter()
            .map(|&(theta, [a, b])| Atom { theta, q: rank_one([c64::new(a, 0.1), c64::new(b, -0.2)]) })
            .collect(),
    )
    .unwrap();
    let path = dir.path().join("three.json");
    write_sequence(&path, &reconstruct(&three, 5));
    let out = dir.path().join("three.out.json");
    ok(&["decompose", "--in", p(&path), "--out", p(&out)]);
    let v = read(&out);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 3);
    assert!(v["report"]["reconstruction_residual"].as_f64().unwrap() <= 1e-8);

    // adding 5e-5 I lifts every null eigenvalue to 5e-5 without moving eigenvectors
    let base = reconstruct(&single, 3);
    let mut blocks = base.blocks().to_vec();
    blocks[0] = blocks[0].add(&CMatrix::identity(2).scale(c64::new(5e-5, 0.0)));
    let near = dir.path().join("near.json");
    write_sequence(&near, &CovarianceSequence::new(2, blocks).unwrap());
    let report = ok(&["decompose", "--in", p(&near), "--epsilon", "1e-4"]);
    assert!(report.contains("marginal rank"), "{report}");
    assert!(report.contains("atoms: 1"));

    let mut blocks = base.blocks().to_vec();
    blocks[0] = blocks[0].add(&CMatrix::identity(2).scale(c64::new(1.0, 0.0)));
    let full = dir.path().join("full.json");
    write_sequence(&full, &CovarianceSequence::new(2, blocks).unwrap());
    let out = specline(&["decompose", "--in", p(&full)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("interior point"));
}

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn montecarlo_outputs_are_consistent_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path, jobs: &str| {
        vec![
            "montecarlo".to_string(),
            "--n".into(),
            "12".into(),
            "--L".into(),
            "1,2".into(),
            "--snr-db".into(),
            "10,inf".into(),
            "--target-successes".into(),
            "3".into(),
            "--max-trials".into(),
            "8".into(),
            "--min-separation".into(),
            "1.0".into(),
            "--seed".into(),
            "5".into(),
            "--jobs".into(),
            jobs.into(),
            "--out-dir".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let a_args = args(&a, "1");
    ok(&a_args.iter().map(String::as_str).collect::<Vec<_>>());
    let out = Command::new(env!("CARGO_BIN_EXE_specline"))
        .args(args(&b, "1"))
        .env("SPECLINE_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());

    let sa = read(&a.join("summary.json"));
    let sb = read(&b.join("summary.json"));
    assert_eq!(sb["provenance"]["config"]["jobs"], 3);
    let strip = |v: &Value| {
        let mut v = strip_timestamps(v);
        v["config"]["jobs"] = Value::Null;
        v["provenance"]["config"]["jobs"] = Value::Null;
        v
    };
    assert_eq!(strip(&sa), strip(&sb));

    let (header, rows) = parse_csv(&a.join("trials.csv"));
    assert_eq!(header, CSV_HEADER);
    let (_, rows_b) = parse_csv(&b.join("trials.csv"));
    let no_time = |rows: &[Vec<String>]| rows.iter().map(|r| r[..7].to_vec()).collect::<Vec<_>>();
    assert_eq!(no_time(&rows), no_time(&rows_b));

    let cells = sa["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    let mut offset = 0;
    for cell in cells {
        let total = cell["total_trials"].as_u64().unwrap() as usize;
        let mine = &rows[offset..offset + total];
        offset += total;
        let wins = mine.iter().filter(|r| r[4] == "true").count();
        assert_eq!(cell["successes"].as_u64().unwrap() as usize, wins);
        let prob = cell["success_probability"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&prob));
        assert_eq!(prob, wins as f64 / total as f64);
        assert_eq!(cell["censored"].as_bool().unwrap(), wins < 3);
        for r in mine {
            assert_eq!(r[4] == "true", !r[5].is_empty(), "freq_error present iff rank recovered");
            assert_eq!(r[2], cell["L"].to_string());
        }
        let errs: Vec<f64> = mine.iter().filter(|r| !r[5].is_empty()).map(|r| r[5].parse().unwrap()).collect();
        match quantiles(&errs) {
            None => assert!(cell["error_quantiles"].is_null()),
            Some(q) => {
                let got = &cell["error_quantiles"];
                for (k, want) in [("min", q.min), ("q25", q.q25), ("median", q.median), ("q75", q.q75), ("max", q.max)] {
                    let g = got[k].as_f64().unwrap();
                    // the CSV carries shortest round-trip text, so parsing is exact
                    assert_eq!(g, want, "{k}");
                }
            }
        }
    }
    assert_eq!(offset, rows.len());
    assert!(cells.iter().any(|c| c["snr_db"] == "inf"));
}
