use std::path::{Path, PathBuf};
use std::process::Command;

use congest_bench::run::{FitRecord, Row};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_congest-bench"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn rows(dir: &Path) -> Vec<Row> {
    csv::Reader::from_path(dir.join("results.csv")).unwrap().deserialize().map(Result::unwrap).collect()
}

#[test]
fn path_apsp_config_writes_one_row() {
    let out = tempfile::tempdir().unwrap();
    let status = bin().arg("--config").arg(configs().join("path-apsp.json")).arg("--out-dir").arg(out.path()).status();
    assert!(status.unwrap().success());
    let rows = rows(out.path());
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ok);
    assert_eq!((rows[0].n, rows[0].m), (8, 7));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("distances/n8-eps0.5-s1.json")).unwrap()).unwrap();
    assert_eq!(summary["max_finite"], 7);
}

#[test]
fn broken_constant_surfaces_the_budget_error() {
    let out = tempfile::tempdir().unwrap();
    let o = bin().arg("--config").arg(configs().join("broken-c1.json")).arg("--out-dir").arg(out.path()).output();
    let o = o.unwrap();
    assert_eq!(o.status.code(), Some(1));
    let rows = rows(out.path());
    assert!(!rows[0].ok);
    assert!(rows[0].error.as_deref().unwrap().contains("budget"), "{:?}", rows[0].error);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn sweep_emits_fits_per_epsilon_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    let mut text = std::fs::read_to_string(configs().join("tradeoff-sweep.json")).unwrap();
    text = text.replace("[0, 1, 2, 3, 4]", "[0]").replace("../constants/v1.json", "c.json");
    std::fs::write(&cfg, text).unwrap();
    std::fs::copy(Path::new(env!("CARGO_MANIFEST_DIR")).join("constants/v1.json"), dir.path().join("c.json")).unwrap();

    let run = |out: &str, jobs: &str| {
        let status =
            bin().arg("--config").arg(&cfg).args(["--jobs", jobs, "--out-dir"]).arg(dir.path().join(out)).status();
        assert!(status.unwrap().success());
    };
    run("a", "1");
    run("b", "2");
    let fits: Vec<FitRecord> = serde_json::from_slice(&std::fs::read(dir.path().join("a/fits.json")).unwrap()).unwrap();
    assert_eq!(fits.len(), 4);
    for eps in [0.5, 1.0] {
        for metric in ["rounds", "messages"] {
            let f = fits.iter().find(|f| f.epsilon == Some(eps) && f.metric == metric).unwrap();
            assert_eq!(f.fit.as_ref().unwrap().points, 3);
        }
    }
    for file in ["metrics.json", "fits.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn seed_offset_shifts_every_seed() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("--config")
        .arg(configs().join("path-apsp.json"))
        .args(["--seed-offset", "10", "--out-dir"])
        .arg(out.path())
        .status();
    assert!(status.unwrap().success());
    assert_eq!(rows(out.path())[0].seed, 11);
}

#[test]
fn unknown_suite_is_an_error() {
    let o = bin().args(["--suite", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown suite"));
}

#[test]
fn written_constants_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    assert!(bin().arg("--write-constants").arg(&p).status().unwrap().success());
    let f = congest_bench::ConstantsFile::load(&p).unwrap();
    assert_eq!(f, congest_bench::ConstantsFile::default());
}
