use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lacuna(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacuna"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("LACUNA_THREADS")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("lacuna-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"n_list":[2,4],"grid":{"dim":2,"side":32},"iters":30,"restarts":2,"seed":3}"#;

#[test]
fn verify_default_config_passes() {
    let d = scratch("verify");
    let out = lacuna(&d, &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn gen_carbery_respects_count_bound() {
    let d = scratch("gen");
    let out = lacuna(&d, &["gen", "--kind", "carbery", "--n", "3", "--range", "0..2"]);
    assert_eq!(out.status.code(), Some(0));
    let set: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("directions.json")).unwrap()).unwrap();
    let members = set["members"].as_array().unwrap();
    assert!(!members.is_empty() && members.len() <= 27);
}

#[test]
fn growth_writes_one_row_per_n() {
    let d = scratch("growth");
    let cfg = write_config(&d, SMALL);
    let out = lacuna(&d, &["--config", &cfg, "growth"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("growth.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(fs::read_to_string(d.join("growth.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn same_config_gives_identical_csv() {
    let d = scratch("determinism");
    let cfg = write_config(&d, SMALL);
    let a = lacuna(&d, &["--config", &cfg, "growth"]);
    assert!(a.status.success());
    let first = fs::read(d.join("growth.csv")).unwrap();
    let b = lacuna(&d, &["--config", &cfg, "growth"]);
    assert!(b.status.success());
    assert_eq!(first, fs::read(d.join("growth.csv")).unwrap());
}

#[test]
fn dry_run_computes_nothing() {
    let d = scratch("dry");
    for sub in ["gen", "dissect", "verify", "norm", "growth", "cex", "weights"] {
        let out = lacuna(&d, &["--dry-run", sub]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(plan["command"], sub);
    }
    let out = lacuna(&d, &["--dry-run", "apply", "--op", "strong", "--input", "missing.bin", "--output", "x.bin"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_dir(&d).unwrap().count(), 0);
}

#[test]
fn bad_config_exits_two() {
    let d = scratch("bad");
    let cfg = write_config(&d, r#"{"bogus": 1}"#);
    assert_eq!(lacuna(&d, &["--config", &cfg, "verify"]).status.code(), Some(2));
    let cfg = write_config(&d, r#"{"n_list": [4, 2]}"#);
    assert_eq!(lacuna(&d, &["--config", &cfg, "growth"]).status.code(), Some(2));
    assert_eq!(lacuna(&d, &["--grid", "2x0", "verify"]).status.code(), Some(2));
}

#[test]
fn oversized_counterexample_exits_three() {
    let d = scratch("budget");
    let cfg = write_config(&d, r#"{"cex":{"d":4,"n_list":[32],"side":16}}"#);
    assert_eq!(lacuna(&d, &["--config", &cfg, "cex"]).status.code(), Some(3));
}

#[test]
fn apply_roundtrips_between_formats() {
    let d = scratch("apply");
    let cfg = write_config(&d, r#"{"generator":{"kind":"slopes","count":3},"grid":{"dim":2,"side":8}}"#);
    let field = lacuna::grid::Field::from_fn(lacuna::grid::Grid::unit(2, 8).unwrap(), |x| {
        num_complex::Complex64::new((6.0 * x[0]).sin() + x[1], 0.0)
    })
    .unwrap();
    lacuna::io::write_field(&field, fs::File::create(d.join("f.bin")).unwrap()).unwrap();
    let input = d.join("f.bin").to_string_lossy().into_owned();
    for op in ["hilbert", "maximal-hilbert", "maximal", "strong"] {
        let out = lacuna(&d, &["--config", &cfg, "apply", "--op", op, "--input", &input, "--output", &format!("{op}.csv")]);
        assert_eq!(out.status.code(), Some(0), "{op}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let direct = lacuna::operators::strong_maximal(&field);
    let read = lacuna::io::read_field_csv(fs::File::open(d.join("strong.csv")).unwrap()).unwrap();
    assert!(direct.max_diff(&read).unwrap() < 1e-15);
}

#[test]
fn weights_reports_each_weight() {
    let d = scratch("weights");
    let cfg = write_config(
        &d,
        r#"{"generator":{"kind":"nsw","lambda":0.5,"alphas":[1,2],"count":4},"grid":{"dim":2,"side":16},
            "iters":20,"restarts":2,"weights":{"kind":"step","heights":[1.0,4.0]}}"#,
    );
    let out = lacuna(&d, &["--config", &cfg, "weights"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(d.join("weights.csv")).unwrap().lines().count(), 3);
    let rdf: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("rdf.json")).unwrap()).unwrap();
    assert!(rdf["a1"].as_f64().unwrap() >= 1.0 - 1e-12);
}
