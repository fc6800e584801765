use std::fs;
use std::path::Path;
use std::process::Command;

use landscape_lab::config::RunConfig;
use landscape_lab::render::read_meta;
use landscape_lab::run::{run, seed_dir};

fn files_with_ext(dir: &Path, ext: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(ext))
        .collect();
    v.sort();
    v
}

fn smoke(out: &Path) -> RunConfig {
    let mut c = RunConfig::from_preset("smoke").unwrap();
    c.out = out.to_path_buf();
    c
}

#[test]
fn minimal_lattice_config_passes_vacuously() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "env.kind = \"exponential\"\nenv.n_levels = 1\nenv.n_cols = 1\nenv.rate = 1.0\nrun.out = \"{}\"\n",
        tmp.path().display()
    );
    let cfg = RunConfig::from_text(&text).unwrap();
    let reports = run(&cfg).unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert!(!r.checks.is_empty());
    assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    assert_eq!(
        files_with_ext(&seed_dir(&cfg, 1), ".csv"),
        vec!["points.csv"]
    );
}

#[test]
fn every_enabled_check_appears_once() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&smoke(tmp.path())).unwrap().remove(0);
    let mut names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
    for want in [
        "composition",
        "cocycle",
        "monotonicity",
        "island_structure",
        "duality",
        "taxonomy_one_class",
    ] {
        assert!(names.contains(&want), "{want} missing");
    }
    assert!(r.hard_failures().is_empty(), "{:?}", r.hard_failures());
}

#[test]
fn same_config_and_seed_give_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&smoke(a.path())).unwrap();
    run(&smoke(b.path())).unwrap();
    let (da, db) = (a.path().join("seed-1"), b.path().join("seed-1"));
    let mut compared = 0;
    for ext in [".csv", ".json", ".bin"] {
        for name in files_with_ext(&da, ext) {
            assert_eq!(
                fs::read(da.join(&name)).unwrap(),
                fs::read(db.join(&name)).unwrap(),
                "{name} differs"
            );
            compared += 1;
        }
    }
    assert!(compared >= 7);
    // SVGs agree once the metadata block (it carries a timestamp) is removed
    let strip = |p: &Path| {
        let s = fs::read_to_string(p.join("graph.svg")).unwrap();
        let a = s.find("<metadata>").unwrap();
        let b = s.find("</metadata>").unwrap();
        format!("{}{}", &s[..a], &s[b..])
    };
    assert_eq!(strip(&da), strip(&db));
}

#[test]
fn json_outputs_match_their_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke(tmp.path());
    run(&cfg).unwrap();
    let dir = seed_dir(&cfg, 1);
    let schemas = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    for (file, schema) in [
        ("env.json", "environment_header.v1"),
        ("graph.json", "instability_graph.v1"),
        ("reconstructions.json", "island_reconstructions.v1"),
        ("report.json", "run_report.v1"),
    ] {
        let s: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(schemas.join(format!("{schema}.schema.json"))).unwrap(),
        )
        .unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap();
        let validator = jsonschema::validator_for(&s).unwrap();
        let errors: Vec<String> = validator
            .iter_errors(&v)
            .take(5)
            .map(|e| e.to_string())
            .collect();
        assert!(errors.is_empty(), "{file}: {errors:?}");
    }
}

#[test]
fn svg_metadata_counts_every_island() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke(tmp.path());
    let r = run(&cfg).unwrap().remove(0);
    let svg = fs::read_to_string(seed_dir(&cfg, 1).join("graph.svg")).unwrap();
    let meta = read_meta(&svg).unwrap();
    assert_eq!(meta.islands, r.island_census.islands);
    assert_eq!(svg.matches("<polygon").count(), meta.islands_drawn);
}

#[test]
fn unwritable_output_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut cfg = smoke(&blocker);
    cfg.render.enabled = false;
    assert!(run(&cfg).is_err());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landscape-lab"))
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let status = |args: &[&str], threads: Option<&str>| {
        let mut c = bin();
        c.args(args);
        match threads {
            Some(t) => c.env("LANDSCAPE_LAB_THREADS", t),
            None => c.env_remove("LANDSCAPE_LAB_THREADS"),
        };
        c.output().unwrap().status.code()
    };
    assert_eq!(status(&["frobnicate"], None), Some(2));
    assert_eq!(
        status(&["check", "--preset", "smoke", "--out", out], None),
        Some(2),
        "no environment yet"
    );
    assert_eq!(
        status(
            &["simulate", "--preset", "smoke", "--out", out],
            Some("abc")
        ),
        Some(2)
    );
    for stage in ["simulate", "analyze", "classify", "render", "check"] {
        assert_eq!(
            status(
                &[stage, "--preset", "smoke", "--out", out, "--seed", "3"],
                Some("2")
            ),
            Some(0),
            "{stage}"
        );
    }
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "env.n_levles = 4\n").unwrap();
    let o = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("env.n_levles"));
}
