use std::path::PathBuf;

use virtual_cooling::experiment::{config_hash, run_experiment, ExperimentConfig, ExperimentError, ExperimentKind};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    ExperimentConfig::from_toml(&text).unwrap()
}

fn csv_body(bytes: &[u8]) -> Vec<String> {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        kinds.push(cfg.kind);
    }
    for k in [
        ExperimentKind::IdentityChecks,
        ExperimentKind::VirtualDensity,
        ExperimentKind::CorrelatorStudy,
        ExperimentKind::Ancilla,
        ExperimentKind::Distill,
        ExperimentKind::Buffered,
        ExperimentKind::Scaling,
        ExperimentKind::Fig2,
        ExperimentKind::Appendix2,
    ] {
        assert!(kinds.contains(&k), "no config for {}", k.name());
    }
}

#[test]
fn identity_checks_small_sector() {
    let out = run_experiment(&load("identity_checks.toml"), 1).unwrap();
    let max = out.manifest["summary"]["max_deviation"].as_f64().unwrap();
    assert!(max < 1e-9, "{max}");
    let rows = csv_body(&out.file("identity_checks.csv").unwrap().contents);
    assert_eq!(rows[0], "check,copies,sites,particles,deviation");
    assert_eq!(rows.len(), 4);
}

#[test]
fn every_file_carries_the_config_hash() {
    let cfg = load("distill.toml");
    let out = run_experiment(&cfg, 1).unwrap();
    let hash = config_hash(&cfg);
    assert_eq!(hash.len(), 64);
    assert_eq!(out.manifest["config_sha256"], hash.as_str());
    for f in &out.files {
        let first = std::str::from_utf8(&f.contents)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string();
        assert_eq!(first, format!("# config_sha256: {hash}"), "{}", f.name);
    }
}

#[test]
fn hash_ignores_workers_but_not_seed() {
    let mut a = load("ancilla.toml");
    let h = config_hash(&a);
    a.workers = Some(4);
    assert_eq!(config_hash(&a), h);
    a.seed = Some(4);
    assert_ne!(config_hash(&a), h);
}

#[test]
fn csv_numbers_use_seventeen_significant_digits() {
    let out = run_experiment(&load("distill.toml"), 1).unwrap();
    let rows = csv_body(&out.file("distill.csv").unwrap().contents);
    let cell = rows[1].split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn manifest_records_run_metadata() {
    let out = run_experiment(&load("ancilla.toml"), 2).unwrap();
    let m = &out.manifest;
    assert_eq!(m["kind"], "ancilla");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["workers"], 2);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["virtual_cooling"].is_string());
    assert_eq!(m["config"]["ancilla"]["shots"], 200000);
}

#[test]
fn repeated_sampled_runs_are_byte_identical() {
    let cfg = load("scaling.toml");
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 3).unwrap();
    assert_eq!(a.files, b.files);
}

#[test]
fn write_to_emits_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&load("buffered.toml"), 1).unwrap();
    let paths = out.write_to(&dir.path().join("run")).unwrap();
    assert_eq!(paths.len(), 2);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"][0], "buffered.csv");
}

#[test]
fn unknown_kind_is_a_parse_error() {
    let e = ExperimentConfig::from_toml("kind = \"teleport\"\n").unwrap_err();
    assert!(matches!(e, ExperimentError::Parse(_)), "{e}");
    let e = ExperimentConfig::from_toml("kind = \"distill\"\n[distill]\nbeta = 1.0\nbogus = 2\n").unwrap_err();
    assert!(matches!(e, ExperimentError::Parse(_)), "{e}");
}

#[test]
fn sampled_runs_require_a_seed() {
    let mut cfg = load("virtual_density.toml");
    cfg.seed = None;
    assert!(matches!(cfg.validate(), Err(ExperimentError::Invalid(_))));
    // exact kinds do not
    let cfg = load("distill.toml");
    assert!(cfg.seed.is_none());
    cfg.validate().unwrap();
}

#[test]
fn missing_or_foreign_sections_are_rejected() {
    let e = ExperimentConfig::from_toml("kind = \"distill\"\n")
        .unwrap()
        .validate()
        .unwrap_err();
    assert!(matches!(e, ExperimentError::Invalid(_)), "{e}");
    let text = "kind = \"identity_checks\"\n[identity_checks]\nsites = 2\nparticles = 1\n\
                [distill]\nmodel = { sites = 2 }\nparticles = 1\nbeta = 1.0\niterations = 2\n";
    let e = ExperimentConfig::from_toml(text).unwrap().validate().unwrap_err();
    assert!(matches!(e, ExperimentError::Invalid(_)), "{e}");
}

#[test]
fn oversized_systems_report_dimension_and_limit() {
    let text =
        "kind = \"distill\"\n[distill]\nmodel = { sites = 12, U = 1.0 }\nparticles = 12\nbeta = 1.0\niterations = 2\n";
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    match run_experiment(&cfg, 1).unwrap_err() {
        ExperimentError::Infeasible { dim, limit, .. } => {
            assert_eq!(dim, 1_352_078);
            assert_eq!(limit, 2000);
        }
        e => panic!("{e}"),
    }
    let text = "kind = \"fig2\"\nseed = 1\n[fig2]\npreset = \"C\"\nsampled = true\n";
    let e = ExperimentConfig::from_toml(text).unwrap().validate().unwrap_err();
    assert!(matches!(e, ExperimentError::Infeasible { .. }), "{e}");
}

#[test]
fn correlator_study_rows_cover_the_grid() {
    let out = run_experiment(&load("correlator_study.toml"), 1).unwrap();
    let rows = csv_body(&out.file("correlator_study.csv").unwrap().contents);
    assert_eq!(rows.len(), 1 + 4 * 3);
    let dev = out.manifest["summary"]["max_imaginary_time_deviation"]
        .as_f64()
        .unwrap();
    assert!(dev < 1e-9, "{dev}");
}

#[test]
fn appendix2_table_has_one_row_per_temperature_and_distance() {
    let text = "kind = \"appendix2\"\n[appendix2]\nmodel = { sites = 8, J = 1.0, U = 3.0, boundary = \"periodic\" }\n\
                particles = 2\ndistances = [1, 2, 3, 4]\n";
    let out = run_experiment(&ExperimentConfig::from_toml(text).unwrap(), 1).unwrap();
    let rows = csv_body(&out.file("appendix2.csv").unwrap().contents);
    assert_eq!(rows[0], "T_over_J,d,first_term,second_term,total");
    assert_eq!(rows.len() - 1, 5 * 4);
}

#[test]
fn appendix2_default_grid_is_five_by_eight() {
    let cfg = load("appendix2.toml");
    let p = cfg.appendix2.clone().unwrap_or_default();
    assert_eq!(p.temperatures.len() * p.distances.len(), 40);
}
