//! Library-level round trip: generate a small campaign, validate it, run a
//! scenario chain, and confirm the artifacts on disk reproduce the reported
//! numbers when everything is reloaded from files.

use std::fs;
use std::path::Path;

use wearcast_core::dataset::load_processed;
use wearcast_core::eval::{EvaluationReport, ScenarioKind, ScenarioSpec};
use wearcast_core::experiment::{
    cmd_generate, cmd_report, cmd_run, cmd_validate, load_config, ExperimentConfig,
    RUN_MANIFEST_NAME,
};
use wearcast_core::net::{build_input, forward, load_checkpoint};
use wearcast_core::signal::Normalizer;
use wearcast_core::synth::SynthConfig;
use wearcast_core::train::LABEL_SCALE_UM;
use wearcast_core::wear::VB_E_INDEX;

/// A campaign small enough for the whole chain to finish in seconds: 1 kHz
/// sampling, short cuts, two scenarios sharing a warm-start chain.
fn tiny_config(root: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.seed = 11;
    config.dataset.path = root.join("data");
    config.output.dir = root.join("out");
    config.synth = SynthConfig::tiny();
    // Feed 0.060 keeps two tools so scenario B can move one into train.
    config.synth.tools_per_fpt = vec![1, 1, 0, 0, 2];
    config.preprocess.window_steps = 64;
    config.preprocess.cutoff_hz = 200.0;
    config.train.epochs = 2;
    config.scenarios = vec![
        ScenarioSpec::new(ScenarioKind::A, vec![0.060]).unwrap(),
        ScenarioSpec::new(ScenarioKind::B, vec![0.060]).unwrap(),
    ];
    config
}

#[test]
fn config_toml_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let path = dir.path().join("exp.toml");
    fs::write(&path, toml::to_string_pretty(&config).unwrap()).unwrap();
    let reloaded = load_config(&path).unwrap();
    assert_eq!(reloaded, config);
}

#[test]
fn run_artifacts_reproduce_reported_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());

    let generated = cmd_generate(&config).unwrap();
    assert!(generated.cuts > 0);
    let validation = cmd_validate(&config).unwrap();
    assert!(validation.is_clean(), "{}", validation.render_text());

    let summary = cmd_run(&config, 1).unwrap();
    let labels: Vec<&str> = summary
        .manifest
        .scenarios
        .iter()
        .map(|e| e.label.as_str())
        .collect();
    assert_eq!(labels, ["01_A", "02_B"]);

    // Every file the manifest names must exist.
    let out = &config.output.dir;
    for entry in &summary.manifest.scenarios {
        let mut files = vec![
            &entry.report,
            &entry.test_checkpoint,
            &entry.normalizer,
            &entry.test_loss_csv,
        ];
        files.extend(entry.cuts_csv.iter());
        files.extend(entry.reference_checkpoint.iter());
        files.extend(entry.reference_loss_csv.iter());
        for name in files {
            assert!(out.join(name).exists(), "missing artifact {name}");
        }
    }
    assert!(out.join(RUN_MANIFEST_NAME).exists());

    // Reload scenario A purely from disk and replay its predictions: the
    // dataset binaries, the normalizer JSON, and the checkpoint must chain
    // back together to the exact numbers in the report.
    let entry = &summary.manifest.scenarios[0];
    let report: EvaluationReport =
        serde_json::from_str(&fs::read_to_string(out.join(&entry.report)).unwrap()).unwrap();
    assert_eq!(&report, &summary.reports[0]);

    let normalizer: Normalizer =
        serde_json::from_str(&fs::read_to_string(out.join(&entry.normalizer)).unwrap()).unwrap();
    let checkpoint = load_checkpoint(&out.join(&entry.test_checkpoint)).unwrap();
    let samples = load_processed(&config.dataset.path, &config.preprocess).unwrap();

    assert!(!report.per_cut.is_empty());
    for cut in &report.per_cut {
        let sample = samples
            .iter()
            .find(|s| s.tool_id == cut.tool_id && s.cut_index == cut.cut_index)
            .expect("reported cut exists in the dataset");
        assert_eq!(sample.label.vb_e(), cut.actual_vb_e_um);
        let input = build_input(
            &normalizer.apply(sample),
            &config.network.condition_keys,
        )
        .unwrap();
        let predicted = forward(&checkpoint.config, &checkpoint.params, &input)
            .unwrap()
            .output()[VB_E_INDEX]
            * LABEL_SCALE_UM;
        assert_eq!(
            predicted, cut.predicted_test_um,
            "replayed prediction diverges for tool {} cut {}",
            cut.tool_id, cut.cut_index
        );
    }

    // The summary metrics must be the metrics of the per-cut table. The
    // table is sorted by tool and cut, which reorders the sums, so allow
    // rounding differences in the last places.
    let actual: Vec<f64> = report.per_cut.iter().map(|c| c.actual_vb_e_um).collect();
    let predicted: Vec<f64> = report.per_cut.iter().map(|c| c.predicted_test_um).collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let rmse = wearcast_core::rmse(&predicted, &actual).unwrap();
    assert!(close(rmse, report.test_model.rmse_um), "{rmse} vs report");
    let r2 = wearcast_core::r_squared(&predicted, &actual).unwrap();
    assert!(close(r2, report.test_model.r2), "{r2} vs report");

    // Scenario B moved the lowest test tool into train and kept the other.
    let b = &summary.reports[1];
    assert_eq!(b.partial_tools.len(), 1);
    assert!(b.train_tools.contains(&b.partial_tools[0]));
    assert!(!b.test_tools.contains(&b.partial_tools[0]));
    assert!(b.test_tools.iter().all(|t| t > &b.partial_tools[0]));
}

#[test]
fn report_reloads_what_run_wrote() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    cmd_generate(&config).unwrap();
    let ran = cmd_run(&config, 1).unwrap();
    let reloaded = cmd_report(&config).unwrap();
    assert_eq!(reloaded.manifest, ran.manifest);
    assert_eq!(reloaded.reports, ran.reports);
    assert_eq!(reloaded.render_text(), ran.render_text());
}
