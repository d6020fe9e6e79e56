use std::path::Path;
use std::process::{Command, Output};

use trace_styles::gpam::FitOptions;
use trace_styles::ingest::{build_vocabulary, filter_min_sessions, parse_traces};
use trace_styles::pipeline::fit_cell;
use trace_styles::synth::opposed_cycles_gpam;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trace-styles"))
        .args(args)
        .env_remove("TRACE_STYLES_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a model file and a 30-trace corpus synthesised from it.
fn corpus(dir: &Path) -> std::path::PathBuf {
    let model = dir.join("truth.json");
    std::fs::write(&model, opposed_cycles_gpam(3).unwrap().to_json(None)).unwrap();
    let out = dir.join("synth");
    let o = cli(&["synth", "--model", s(&model), "--traces", "30", "--sessions", "6..12", "--seed", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("traces.txt")
}

#[test]
fn synth_then_ingest_keeps_every_trace() {
    let dir = tempfile::tempdir().unwrap();
    let traces = corpus(dir.path());
    let out = dir.path().join("ingest");
    let o = cli(&["ingest", "--input", s(&traces), "--out", s(&out)]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["traces_read"], 30);
    assert_eq!(report["traces_kept"], 30);
    assert_eq!(report["total_repairs"], 0);
    assert_eq!(
        std::fs::read_to_string(out.join("traces.txt")).unwrap(),
        std::fs::read_to_string(&traces).unwrap()
    );
}

#[test]
fn fit_output_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let traces = corpus(dir.path());
    let out = dir.path().join("fit");
    let o = cli(&["fit", "--input", s(&traces), "--k", "2", "--restarts", "3", "--max-iters", "30", "--seed", "8", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let parsed = parse_traces(&std::fs::read(&traces).unwrap()).unwrap();
    let kept = filter_min_sessions(parsed.traces, 5);
    let vocab = build_vocabulary(&kept);
    let options = FitOptions {
        restarts: 3,
        max_iters: 30,
        seed: 8,
        parallel: true,
    };
    let cell = fit_cell(&kept, &vocab, None, 2, &options).unwrap();
    assert_eq!(std::fs::read_to_string(out.join("all/K2/model.json")).unwrap(), cell.model_json());
    assert_eq!(std::fs::read_to_string(out.join("all/K2/fitreport.json")).unwrap(), cell.report_json());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let traces = corpus(dir.path());
    let config = dir.path().join("config.json");
    let from_file = dir.path().join("from_file");
    std::fs::write(
        &config,
        serde_json::json!({
            "input": traces,
            "k": [1],
            "restarts": 2,
            "max-iters": 10,
            "seed": 3,
            "out": from_file,
        })
        .to_string(),
    )
    .unwrap();
    assert!(cli(&["--config", s(&config), "fit"]).status.success());
    assert!(from_file.join("all/K1/model.json").exists());

    let flagged = dir.path().join("flagged");
    assert!(cli(&["--config", s(&config), "fit", "--k", "2", "--out", s(&flagged)]).status.success());
    assert!(flagged.join("all/K2/model.json").exists());
    assert!(!flagged.join("all/K1").exists());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let traces = corpus(dir.path());
    let run = |out: &Path, seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_trace-styles"))
            .args(["fit", "--input", s(&traces), "--k", "2", "--restarts", "2", "--max-iters", "10", "--out", s(out)])
            .env("TRACE_STYLES_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("all/K2/model.json")).unwrap()
    };
    let a = run(&dir.path().join("a"), "5");
    let b = run(&dir.path().join("b"), "5");
    assert_eq!(a, b);
    let flag = dir.path().join("flag");
    let o = cli(&["fit", "--input", s(&traces), "--k", "2", "--restarts", "2", "--max-iters", "10", "--seed", "5", "--out", s(&flag)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(flag.join("all/K2/model.json")).unwrap(), a);
}

#[test]
fn check_writes_sentinels_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(&model, opposed_cycles_gpam(3).unwrap().to_json(None)).unwrap();
    let props = dir.path().join("props.txt");
    std::fs::write(&props, "P=?[ F<=5 y=s0 ]\nfilter(state, P=?[ F y=s1 ], false)\n").unwrap();
    let o = cli(&["check", "--model", s(&model), "--props", s(&props)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("property,state,AP1,AP2,product"), "{csv}");
    assert!(csv.contains("---"), "{csv}");

    let out = dir.path().join("out");
    assert!(cli(&["check", "--model", s(&model), "--props", s(&props), "--out", s(&out)]).status.success());
    assert_eq!(std::fs::read_to_string(out.join("check.csv")).unwrap(), csv);
    assert!(out.join("check.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let traces = corpus(dir.path());
    let out = dir.path().join("out");

    let missing = dir.path().join("missing.txt");
    assert_eq!(cli(&["fit", "--input", s(&missing), "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(cli(&["fit", "--input", s(&traces), "--k", "0", "--seed", "1", "--out", s(&out)]).status.code(), Some(3));

    let model = dir.path().join("model.json");
    std::fs::write(&model, opposed_cycles_gpam(3).unwrap().to_json(None)).unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "P=?[ F<= y=s0\n").unwrap();
    assert_eq!(cli(&["check", "--model", s(&model), "--props", s(&bad)]).status.code(), Some(4));

    // the second interval holds no sessions
    let o = cli(&[
        "suite", "--input", s(&traces), "--intervals", "0:1,500:600", "--k", "1",
        "--restarts", "2", "--max-iters", "10", "--seed", "1", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("0-1/K1/suite.csv").exists());
    assert!(out.join("summary.json").exists());
}
