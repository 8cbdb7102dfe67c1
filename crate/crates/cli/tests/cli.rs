use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rng-workbench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/beacon_pulses.json")
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn battery_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let lfsr = dir.path().join("lfsr.bin");
    let uni = dir.path().join("u.bin");
    ok(&[
        "gen",
        "lfsr",
        "--seed",
        "DEADBEEF",
        "--bits",
        "1000000",
        "--out",
        path_str(&lfsr),
    ]);
    ok(&[
        "gen",
        "uniform",
        "--bits",
        "1000000",
        "--seed",
        "3",
        "--out",
        path_str(&uni),
    ]);

    let out = run(&["test", "--input", path_str(&lfsr)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("linear-complexity-500"));

    let report = dir.path().join("r.json");
    ok(&[
        "test",
        "--input",
        path_str(&uni),
        "--profile",
        "light",
        "--json",
        path_str(&report),
    ]);
    assert_eq!(json(&report)["config"], "light");

    let missing = run(&["test", "--input", path_str(&dir.path().join("nope"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn formats_and_generators() {
    let dir = tempfile::tempdir().unwrap();
    let hex = dir.path().join("iid.hex");
    ok(&[
        "--format",
        "hex",
        "gen",
        "iid",
        "--p0",
        "0.75",
        "--bits",
        "1001",
        "--out",
        path_str(&hex),
    ]);
    let meta = json(&dir.path().join("iid.hex.meta.json"));
    assert_eq!(meta["bits"], 1001);
    let vn = dir.path().join("vn.txt");
    ok(&[
        "extract",
        "vn",
        "--input",
        path_str(&hex),
        "--out",
        path_str(&vn),
        "--format",
        "hex",
    ]);
    let m = json(&dir.path().join("vn.txt.manifest.json"));
    assert_eq!(m["eps"], 0.0);
    assert!(m["m_out"].as_u64().unwrap() > 100);
    assert_eq!(
        run(&["gen", "lfsr", "--seed", "zz", "--bits", "8", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn seeded_and_two_source_extract() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.bin");
    let y = dir.path().join("y.bin");
    ok(&[
        "gen",
        "uniform",
        "--bits",
        "30000",
        "--seed",
        "1",
        "--out",
        path_str(&x),
    ]);
    ok(&[
        "beacon",
        "--bits",
        "10007",
        "--fixture",
        path_str(&fixture()),
        "--out",
        path_str(&y),
    ]);
    let out = dir.path().join("s.bin");
    ok(&[
        "extract",
        "seeded",
        "--input",
        path_str(&x),
        "--seed",
        path_str(&y),
        "--alpha1",
        "0.698",
        "--eps-round",
        "2^-64",
        "--out",
        path_str(&out),
    ]);
    let m = json(&dir.path().join("s.bin.manifest.json"));
    assert_eq!(m["rounds"], 2);
    assert_eq!(m["m_out"], 2 * 6856);
    assert_eq!(m["job"]["m_out"], 6856);

    ok(&[
        "extract",
        "two-source",
        "--input",
        path_str(&x),
        "--seed",
        path_str(&y),
        "--alpha1",
        "0.51",
        "--alpha2",
        "0.51",
        "--out",
        path_str(&out),
    ]);
    // ⌊0.51·10006 + 0.51·10007 − 10007 − 128⌋
    assert_eq!(json(&dir.path().join("s.bin.manifest.json"))["m_out"], 71);

    let bad = run(&[
        "extract",
        "seeded",
        "--input",
        path_str(&x),
        "--seed",
        path_str(&x),
        "--alpha1",
        "0.7",
        "--out",
        "o",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("not prime"));
    let bad_eps = run(&[
        "extract",
        "vn",
        "--input",
        path_str(&x),
        "--eps-round",
        "2^3",
        "--out",
        "o",
    ]);
    assert_eq!(bad_eps.status.code(), Some(2));
}

#[test]
fn estimate_then_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples");
    std::fs::create_dir(&samples).unwrap();
    for seed in 0..4 {
        let f = samples.join(format!("s{seed}.bin"));
        ok(&[
            "gen",
            "iid",
            "--p0",
            "0.6",
            "--bits",
            "400000",
            "--seed",
            &seed.to_string(),
            "--out",
            path_str(&f),
        ]);
    }
    let est = dir.path().join("est.json");
    ok(&[
        "estimate",
        "--samples",
        path_str(&samples),
        "--symbol-bits",
        "8",
        "--out",
        path_str(&est),
    ]);
    let a = json(&est);
    let alpha = a["alpha"].as_f64().unwrap();
    // per-bit min-entropy of p0 = 0.6 is 0.737; the 7σ bound sits below it
    assert!(alpha > 0.6 && alpha < 0.737, "{alpha}");

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, format!(r#"{{"beacon_fixture": {:?}}}"#, path_str(&fixture()))).unwrap();
    let out = dir.path().join("l2.bin");
    ok(&[
        "--config",
        path_str(&cfg),
        "pipeline",
        "--level",
        "2",
        "--input",
        path_str(&samples.join("s0.bin")),
        "--assessment",
        path_str(&est),
        "--out",
        path_str(&out),
    ]);
    let m = json(&dir.path().join("l2.bin.manifest.json"));
    assert_eq!(m["level"], 2);
    assert_eq!(m["produced_bits"], json(&dir.path().join("l2.bin.meta.json"))["bits"]);
    assert!(m["budget"]["satisfied"].as_bool().unwrap());
    assert!(m["seeds"][0]["origin"].as_str().unwrap().contains("beacon"));

    // ~72 seed bits per two-source round, so 141 blocks go to the seed
    let big = dir.path().join("big.bin");
    ok(&[
        "gen",
        "iid",
        "--p0",
        "0.6",
        "--bits",
        "1600000",
        "--seed",
        "7",
        "--out",
        path_str(&big),
    ]);
    let l3 = dir.path().join("l3.bin");
    ok(&[
        "pipeline",
        "--level",
        "3",
        "--input",
        path_str(&big),
        "--second",
        "self",
        "--alpha-rng",
        "0.7",
        "--out",
        path_str(&l3),
    ]);
    assert_eq!(
        json(&dir.path().join("l3.bin.manifest.json"))["alpha_second"]
            .as_f64()
            .unwrap(),
        1.02 - 0.7
    );

    let l1 = dir.path().join("l1.bin");
    ok(&[
        "pipeline",
        "--level",
        "1",
        "--input",
        path_str(&samples.join("s2.bin")),
        "--out",
        path_str(&l1),
    ]);
    let bad = run(&["pipeline", "--level", "5", "--input", "x", "--out", "y"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn mermin_and_level4() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    ok(&[
        "mermin",
        "simulate",
        "--visibility",
        "0.9575",
        "--rounds",
        "60000",
        "--seed",
        "4",
        "--out",
        path_str(&rec),
    ]);
    let text = ok(&["mermin", "analyze", "--records", path_str(&rec), "--eps", "2^-39"]);
    let a: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(a["rounds"], 60000);
    assert!((a["m_obs"].as_f64().unwrap() - 3.83).abs() < 0.05);

    let input = dir.path().join("in.bin");
    ok(&[
        "gen",
        "iid",
        "--p0",
        "0.6",
        "--bits",
        "300000",
        "--seed",
        "9",
        "--out",
        path_str(&input),
    ]);
    let second = format!("mermin:{}", path_str(&rec));
    let refused = run(&[
        "pipeline",
        "--level",
        "4",
        "--input",
        path_str(&input),
        "--second",
        &second,
        "--alpha-rng",
        "0.453",
        "--out",
        path_str(&dir.path().join("o.bin")),
    ]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("refused"));
    ok(&[
        "pipeline",
        "--level",
        "4",
        "--input",
        path_str(&input),
        "--second",
        &second,
        "--alpha-rng",
        "0.698",
        "--out",
        path_str(&dir.path().join("o.bin")),
    ]);
}

#[test]
fn report_table_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.bin");
    let seed = dir.path().join("seed.bin");
    let l2 = dir.path().join("l2.bin");
    ok(&[
        "gen",
        "lfsr",
        "--seed",
        "1",
        "--bits",
        "1100000",
        "--out",
        path_str(&raw),
    ]);
    ok(&[
        "gen",
        "uniform",
        "--bits",
        "10007",
        "--seed",
        "2",
        "--out",
        path_str(&seed),
    ]);
    ok(&[
        "pipeline",
        "--level",
        "2",
        "--input",
        path_str(&raw),
        "--second",
        &format!("file:{}", path_str(&seed)),
        "--alpha-rng",
        "0.453",
        "--out",
        path_str(&l2),
    ]);
    let csv = dir.path().join("plot.csv");
    let out = run(&[
        "report",
        "--run",
        &format!("lfsr:0={}", path_str(&raw)),
        "--run",
        &format!("lfsr:2={}", path_str(&l2)),
        "--missing",
        "lfsr:4",
        "--profile",
        "light",
        "--csv",
        path_str(&csv),
    ]);
    // the raw stream fails, so the requested batteries conclude failure
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("level 4"), "{table}");
    let plot = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(plot.lines().count(), 3);
    assert!(plot.lines().nth(2).unwrap().starts_with("lfsr,2,0,"));
}
