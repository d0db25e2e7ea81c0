use std::path::Path;
use std::process::Command;

use gclr_cli::{read_records, run_experiment, write_outputs, Algorithm, ExperimentConfig, InstanceSpec};
use gclr_core::DatasetOptions;

fn gclr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gclr"))
}

fn generate(dir: &Path, entities: usize, k: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("inst_{entities}_{k}_{seed}.csv"));
    let status = gclr()
        .args(["gen", "--type", "2", "--entities", &entities.to_string(), "--k", &k.to_string()])
        .args(["--seed", &seed.to_string(), "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    path
}

#[test]
fn gen_then_solve_writes_a_partition() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 8, 2, 1);
    assert!(inst.with_extension("json").exists());
    let out = dir.path().join("res.json");
    let status = gclr()
        .args(["solve", "--algo", "spaeth", "--k", "2", "--n", "2", "--seed", "3", "--in"])
        .arg(&inst)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["partition"].as_object().unwrap().len(), 8);
    assert!(doc["sse"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["converged"], true);
}

#[test]
fn exact_solvers_agree_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 7, 2, 4);
    let sse = |algo: &str| {
        let out = gclr()
            .args(["solve", "--algo", algo, "--k", "2", "--n", "2", "--in"])
            .arg(&inst)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        doc["sse"].as_f64().unwrap()
    };
    let (cg, brute) = (sse("cg"), sse("brute"));
    assert!((cg - brute).abs() <= 1e-6 * brute);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = gclr()
        .args(["solve", "--algo", "cg", "--k", "2", "--n", "2", "--in"])
        .arg(dir.path().join("nope.csv"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let inst = generate(dir.path(), 6, 2, 0);
    let infeasible = gclr()
        .args(["solve", "--algo", "spaeth", "--k", "4", "--n", "2", "--in"])
        .arg(&inst)
        .output()
        .unwrap();
    assert_eq!(infeasible.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "entity_id,week,y,x1\na,1,oops,2\n").unwrap();
    let parse = gclr().args(["solve", "--algo", "cg", "--k", "1", "--n", "1", "--in"]).arg(&bad).output().unwrap();
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn expired_time_limit_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), 14, 3, 2);
    let out = gclr()
        .args(["solve", "--algo", "cg", "--k", "3", "--n", "2", "--time-limit", "0.000001", "--in"])
        .arg(&inst)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["converged"], false);
    assert_eq!(doc["partition"].as_object().unwrap().len(), 14);
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        instances: vec![InstanceSpec::Generate { kind: 2, entities: 9, seed: 5, k: None, noise_scale: 5.0 }],
        algorithms: vec![
            Algorithm::Cg,
            Algorithm::GaLloyd { pop_size: 10, mutation_prob: 0.01, max_stall: 10, literal_replacement: false },
            Algorithm::Spaeth,
        ],
        k_values: vec![2],
        n: 2,
        repetitions: 2,
        base_seed: 0,
        time_limit_secs: 60.0,
        allow_degenerate: false,
    }
}

#[test]
fn experiment_records_are_reproducible_and_recomputable() {
    let cfg = small_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.records.len(), 6);
    let sse = |o: &gclr_cli::experiment::ExperimentOutput| o.records.iter().map(|r| r.sse.unwrap().to_bits()).collect::<Vec<_>>();
    assert_eq!(sse(&a), sse(&b));
    for r in &a.records {
        assert!(r.error.is_empty());
        let again = r.recompute_sse(DatasetOptions::default()).unwrap();
        assert!((again - r.sse.unwrap()).abs() <= 1e-9 * again);
    }
    for run in a.traces.chunk_by(|x, y| (&x.algorithm, x.seed) == (&y.algorithm, y.seed)) {
        assert!(run.windows(2).all(|w| w[1].sse <= w[0].sse));
    }
}

#[test]
fn single_cell_gives_one_record() {
    let mut cfg = small_config();
    cfg.algorithms.truncate(1);
    cfg.repetitions = 1;
    assert_eq!(run_experiment(&cfg).unwrap().records.len(), 1);
}

#[test]
fn failing_cells_are_recorded_in_row() {
    let mut cfg = small_config();
    cfg.instances.push(InstanceSpec::File { path: "/does/not/exist.csv".into() });
    cfg.algorithms.truncate(1);
    cfg.repetitions = 1;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 2);
    assert!(out.records[0].error.is_empty());
    assert!(!out.records[1].error.is_empty());
    assert!(out.records[1].sse.is_none());
}

#[test]
fn bench_and_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&small_config()).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let status = gclr().arg("bench").arg("--config").arg(&cfg_path).arg("--out").arg(&out_dir).status().unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], small_config().hash());
    assert_eq!(manifest["records"], 6);
    assert_eq!(read_records(&out_dir.join("records.csv")).unwrap().len(), 6);
    assert!(out_dir.join("traces.csv").exists());

    let metrics = gclr().arg("metrics").arg("--verify").arg("--records").arg(out_dir.join("records.csv")).output().unwrap();
    assert!(metrics.status.success(), "{}", String::from_utf8_lossy(&metrics.stderr));
    let text = String::from_utf8(metrics.stdout).unwrap();
    assert!(text.starts_with("instance_id,k,algorithm,seed,sse,opt_gap,gap_from_best"));
    assert_eq!(text.lines().count(), 7);
    for line in text.lines().skip(1).filter(|l| l.contains(",cg,")) {
        assert!(line.ends_with(",0.0,0.0"), "{line}");
    }

    let ri = gclr()
        .arg("metrics")
        .arg("--records")
        .arg(out_dir.join("records.csv"))
        .args(["--ri", "spaeth,ga-lloyd"])
        .output()
        .unwrap();
    assert!(ri.status.success());
    assert_eq!(String::from_utf8(ri.stdout).unwrap().lines().count(), 2);

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"instances": [], "algorithms": [], "k_values": [], "n": 2, "time_limit_secs": 1}"#).unwrap();
    let status = gclr().arg("bench").arg("--config").arg(&bad_cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn written_outputs_match_the_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let out = run_experiment(&cfg).unwrap();
    write_outputs(dir.path(), &cfg, &out).unwrap();
    let back = read_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(back, out.records);
}
