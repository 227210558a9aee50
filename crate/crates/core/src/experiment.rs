//! Experiment orchestration: one TOML config describing dataset, pipeline,
//! training, and scenarios, plus the commands that turn it into on-disk
//! artifacts.
//!
//! Every command is a pure function of (config, dataset): no timestamps, no
//! environment lookups, stable serialization — so rerunning a command with
//! the same inputs reproduces its outputs byte for byte. A `run_manifest.json`
//! capturing the config hash and seed is written next to the reports to make
//! that property checkable.
//!
//! Scenario ordering matters for partial learning: a scenario of kind B (or
//! D) fine-tunes the parameters of the most recent completed kind-A (or -C)
//! scenario with the same held-out feeds. If the config lists no such
//! scenario, the prerequisite is run implicitly to provide the warm start,
//! but only explicitly configured scenarios produce report files.

use crate::dataset::{validate_dataset, DatasetWriter, ValidationReport};
use crate::error::{Error, Result};
use crate::eval::{
    distinct_fpts, run_scenario, run_scenario_warm, EvaluationReport, ScenarioKind, ScenarioOptions,
    ScenarioOutcome, ScenarioSpec, TrainLog, FPT_EPS,
};
use crate::net::{default_reference_config, default_test_config, save_checkpoint};
use crate::signal::{ConditionKey, PreprocessOptions, ProcessedSample};
use crate::synth::{SynthConfig, ToolGenerator};
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Where the campaign lives on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    /// Dataset directory (manifest plus channel binaries).
    pub path: PathBuf,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("dataset"),
        }
    }
}

/// Model-structure choices; the architecture itself is fixed, only the
/// condition channels vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    /// Cutting conditions appended as constant input channels of the test
    /// model. The reference model always runs without condition channels.
    pub condition_keys: Vec<ConditionKey>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            condition_keys: vec![ConditionKey::Fz],
        }
    }
}

/// Where run artifacts go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    /// Output directory for reports, CSVs, and checkpoints.
    pub dir: PathBuf,
    /// Also write one per-cut prediction CSV per scenario.
    pub per_cut_csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            per_cut_csv: true,
        }
    }
}

fn default_scenarios() -> Vec<ScenarioSpec> {
    use ScenarioKind::*;
    [
        (A, vec![0.045]),
        (B, vec![0.045]),
        (C, vec![0.015, 0.060]),
        (D, vec![0.015, 0.060]),
    ]
    .into_iter()
    .map(|(kind, test_fpts)| ScenarioSpec {
        kind,
        test_fpts,
        partial_tool_rule: Default::default(),
    })
    .collect()
}

/// Complete description of an experiment. Deserializes from TOML with every
/// field optional; the default runs the four standard transfer scenarios on
/// the default synthetic campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed. [`ExperimentConfig::resolved`] copies it over the
    /// `[synth]` and `[train]` seeds, so one value governs the whole run.
    pub seed: u64,
    pub dataset: DatasetSection,
    /// Campaign generator settings, used by the generate command.
    pub synth: SynthConfig,
    pub preprocess: PreprocessOptions,
    pub network: NetworkSection,
    pub train: TrainConfig,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset: DatasetSection::default(),
            synth: SynthConfig::default(),
            preprocess: PreprocessOptions::default(),
            network: NetworkSection::default(),
            train: TrainConfig::default(),
            scenarios: default_scenarios(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// The config with the master seed pushed into the generator and
    /// trainer sections.
    pub fn resolved(&self) -> Self {
        let mut resolved = self.clone();
        resolved.synth.seed = self.seed;
        resolved.train.seed = self.seed;
        resolved
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        if self.preprocess.window_steps == 0 {
            return Err(Error::InvalidConfig("window needs at least one step".into()));
        }
        if self.preprocess.entry_margin_s < 0.0 || self.preprocess.exit_margin_s < 0.0 {
            return Err(Error::InvalidConfig("margins cannot be negative".into()));
        }
        if self.preprocess.cutoff_hz <= 0.0 {
            return Err(Error::InvalidConfig("cutoff must be positive".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("no scenarios configured".into()));
        }
        for spec in &self.scenarios {
            spec.validate()?;
        }
        if self.output.dir.as_os_str().is_empty() || self.dataset.path.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("paths cannot be empty".into()));
        }
        Ok(())
    }
}

/// Parses a TOML experiment config.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Hex SHA-256 of the resolved config's canonical JSON form.
pub fn config_sha256(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(&config.resolved()).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// What the generate command produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub tools: usize,
    pub cuts: usize,
    /// Cut count per feed value, grid order.
    pub per_fpt: Vec<(f64, usize)>,
}

impl GenerateSummary {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "generated {} cuts over {} tools at {}\n",
            self.cuts,
            self.tools,
            self.path.display()
        );
        for (f_z, cuts) in &self.per_fpt {
            let _ = writeln!(out, "  f_z {f_z}: {cuts} cuts");
        }
        out
    }
}

/// Generates the synthetic campaign onto disk, one cut at a time.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<GenerateSummary> {
    let config = config.resolved();
    config.validate()?;
    let cfg = &config.synth;
    let mut writer = DatasetWriter::create(&config.dataset.path)?;
    let mut per_fpt: Vec<(f64, usize)> = cfg.fpt_grid.iter().map(|&f| (f, 0)).collect();
    let plans = cfg.tool_plans();
    let tools = plans.len();
    let mut cuts = 0;
    for tool in plans {
        let mut generator = ToolGenerator::new(cfg, tool)?;
        while let Some((record, plan)) = generator.next_cut() {
            writer.add_cut(&record, &plan.label, plan.worn)?;
            per_fpt[tool.fpt_index].1 += 1;
            cuts += 1;
        }
    }
    writer.finish()?;
    Ok(GenerateSummary {
        path: config.dataset.path.clone(),
        tools,
        cuts,
        per_fpt,
    })
}

/// Validates the configured dataset, returning structured diagnostics.
pub fn cmd_validate(config: &ExperimentConfig) -> Result<ValidationReport> {
    validate_dataset(&config.dataset.path)
}

/// Names of one scenario's output files and its identifying metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifestEntry {
    /// 1-based position in the config's scenario list.
    pub index: usize,
    /// Stable label used in file names and summary rows, e.g. `01_A`.
    pub label: String,
    pub kind: ScenarioKind,
    pub test_fpts: Vec<f64>,
    pub report: String,
    pub cuts_csv: Option<String>,
    pub test_checkpoint: String,
    pub reference_checkpoint: Option<String>,
    pub normalizer: String,
    /// Per-epoch training loss trace of the test model. Stage checkpoints
    /// (one per learning-rate decay boundary) sit next to it with
    /// `_epoch{NNN}.ckpt` suffixes.
    pub test_loss_csv: String,
    pub reference_loss_csv: Option<String>,
}

/// Reproducibility record written next to the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the resolved config (see [`config_sha256`]).
    pub config_sha256: String,
    pub seed: u64,
    pub dataset_cuts: usize,
    pub window_steps: usize,
    pub scenarios: Vec<RunManifestEntry>,
}

/// Name of the run manifest file inside the output directory.
pub const RUN_MANIFEST_NAME: &str = "run_manifest.json";

/// In-memory view of a completed (or reloaded) run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub reports: Vec<EvaluationReport>,
}

fn fmt_fpts(fpts: &[f64]) -> String {
    fpts.iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

impl RunSummary {
    /// Renders the run as a small text table, one block per scenario.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "run over {} cuts, seed {}, config {}\n",
            self.manifest.dataset_cuts,
            self.manifest.seed,
            &self.manifest.config_sha256[..12.min(self.manifest.config_sha256.len())]
        );
        for (entry, report) in self.manifest.scenarios.iter().zip(&self.reports) {
            let _ = write!(
                out,
                "scenario {} (FPT {}): test RMSE {:.2} um, R2 {:.3}",
                entry.label,
                fmt_fpts(&entry.test_fpts),
                report.test_model.rmse_um,
                report.test_model.r2
            );
            if let Some(reference) = &report.reference_model {
                let _ = write!(
                    out,
                    "; reference RMSE {:.2} um, R2 {:.3}",
                    reference.rmse_um, reference.r2
                );
            }
            match (report.advantage_rmse_pct, report.advantage_r2_pct) {
                (Some(rmse), Some(r2)) => {
                    let _ = write!(out, "; advantage RMSE {rmse:.1}%, R2 {r2:.1}%");
                }
                (Some(rmse), None) => {
                    let _ = write!(out, "; advantage RMSE {rmse:.1}%");
                }
                _ => {}
            }
            out.push('\n');
            for fpt in &report.per_fpt {
                let _ = write!(
                    out,
                    "  FPT {}: test {:.2} um over {} cuts",
                    fpt.f_z, fpt.test_rmse_um, fpt.cuts
                );
                if let Some(reference) = fpt.ref_rmse_um {
                    let _ = write!(out, " (reference {reference:.2} um)");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Groups scenario indices into dependency chains: each B/D joins the chain
/// of the most recent earlier A/C with the same held-out feeds, everything
/// else starts its own chain. Chains are independent of each other.
fn plan_chains(scenarios: &[ScenarioSpec]) -> Vec<Vec<usize>> {
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for (index, spec) in scenarios.iter().enumerate() {
        let mut attached = false;
        if let Some(source) = spec.kind.warm_source() {
            // Search chains from the most recently started backwards.
            'outer: for chain in chains.iter_mut().rev() {
                for &prior in chain.iter().rev() {
                    let candidate = &scenarios[prior];
                    if candidate.kind == source && same_fpts(&candidate.test_fpts, &spec.test_fpts)
                    {
                        chain.push(index);
                        attached = true;
                        break 'outer;
                    }
                }
            }
        }
        if !attached {
            chains.push(vec![index]);
        }
    }
    chains
}

fn same_fpts(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < FPT_EPS)
}

struct ScenarioArtifacts {
    entry: RunManifestEntry,
    report: EvaluationReport,
}

/// Runs one configured scenario inside its chain, warm-starting from
/// `chain_outcomes` when the kind asks for it, and writes the scenario's
/// files.
fn run_one_scenario(
    config: &ExperimentConfig,
    samples: &[ProcessedSample],
    index: usize,
    chain_outcomes: &mut Vec<(ScenarioSpec, ScenarioOutcome)>,
) -> Result<ScenarioArtifacts> {
    let spec = &config.scenarios[index];
    let window = config.preprocess.window_steps;
    let keys = &config.network.condition_keys;
    let test_config = default_test_config(window, keys.len())?;
    let reference_config = default_reference_config(window)?;
    let label = format!("{:02}_{}", index + 1, spec.kind);
    let stem = format!("scenario_{label}");
    let options = ScenarioOptions {
        condition_keys: keys.clone(),
        train_log: Some(TrainLog {
            dir: config.output.dir.clone(),
            stem: stem.clone(),
        }),
        ..ScenarioOptions::default()
    };

    let outcome = if let Some(source) = spec.kind.warm_source() {
        let warm = chain_outcomes
            .iter()
            .rev()
            .find(|(prior, _)| prior.kind == source && same_fpts(&prior.test_fpts, &spec.test_fpts));
        let (warm_test, warm_reference) = match warm {
            Some((_, outcome)) => (outcome.test_params.clone(), outcome.reference_params.clone()),
            None => {
                // No prerequisite configured: run it implicitly, cache it,
                // and warm-start from it without emitting report files.
                let prereq = ScenarioSpec {
                    kind: source,
                    test_fpts: spec.test_fpts.clone(),
                    partial_tool_rule: spec.partial_tool_rule.clone(),
                };
                // The implicit run leaves no files; only configured
                // scenarios own artifacts.
                let prereq_options = ScenarioOptions {
                    train_log: None,
                    ..options.clone()
                };
                let outcome = run_scenario(
                    samples,
                    &prereq,
                    &test_config,
                    &reference_config,
                    &config.train,
                    &prereq_options,
                )?;
                let params = (outcome.test_params.clone(), outcome.reference_params.clone());
                chain_outcomes.push((prereq, outcome));
                params
            }
        };
        run_scenario_warm(
            samples,
            spec,
            &test_config,
            &reference_config,
            &config.train,
            &options,
            &warm_test,
            warm_reference.as_ref(),
        )?
    } else {
        run_scenario(
            samples,
            spec,
            &test_config,
            &reference_config,
            &config.train,
            &options,
        )?
    };

    let out_dir = &config.output.dir;
    let report_name = format!("{stem}.json");
    let cuts_name = config
        .output
        .per_cut_csv
        .then(|| format!("{stem}_cuts.csv"));
    let test_ckpt_name = format!("{stem}_test.ckpt");
    let reference_ckpt_name = outcome
        .reference_params
        .as_ref()
        .map(|_| format!("{stem}_reference.ckpt"));
    let normalizer_name = format!("{stem}_normalizer.json");

    let mut json = serde_json::to_vec_pretty(&outcome.report)?;
    json.push(b'\n');
    fs::write(out_dir.join(&report_name), json)?;
    if let Some(name) = &cuts_name {
        write_cuts_csv(&out_dir.join(name), &outcome.report)?;
    }
    save_checkpoint(
        &out_dir.join(&test_ckpt_name),
        &test_config,
        config.train.seed,
        config.train.epochs,
        &outcome.test_params,
    )?;
    if let (Some(name), Some(params)) = (&reference_ckpt_name, &outcome.reference_params) {
        save_checkpoint(
            &out_dir.join(name),
            &reference_config,
            config.train.seed,
            config.train.epochs,
            params,
        )?;
    }
    let mut json = serde_json::to_vec_pretty(&outcome.normalizer)?;
    json.push(b'\n');
    fs::write(out_dir.join(&normalizer_name), json)?;

    let artifacts = ScenarioArtifacts {
        entry: RunManifestEntry {
            index: index + 1,
            label,
            kind: spec.kind,
            test_fpts: spec.test_fpts.clone(),
            report: report_name,
            cuts_csv: cuts_name,
            test_checkpoint: test_ckpt_name,
            reference_checkpoint: reference_ckpt_name,
            normalizer: normalizer_name,
            test_loss_csv: format!("{stem}_test_loss.csv"),
            reference_loss_csv: outcome
                .reference_params
                .as_ref()
                .map(|_| format!("{stem}_reference_loss.csv")),
        },
        report: outcome.report.clone(),
    };
    chain_outcomes.push((spec.clone(), outcome));
    Ok(artifacts)
}

fn write_cuts_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut out =
        String::from("tool_id,cut_index,f_z,actual_vb_e_um,predicted_test_um,predicted_ref_um\n");
    for cut in &report.per_cut {
        let reference = cut
            .predicted_ref_um
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{reference}",
            cut.tool_id, cut.cut_index, cut.f_z, cut.actual_vb_e_um, cut.predicted_test_um
        );
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_summary_csv(path: &Path, entries: &[(String, &EvaluationReport)]) -> Result<()> {
    let mut out = String::from("scenario,model,metric,value\n");
    for (label, report) in entries {
        let _ = writeln!(out, "{label},test,rmse_um,{}", report.test_model.rmse_um);
        let _ = writeln!(out, "{label},test,r2,{}", report.test_model.r2);
        if let Some(reference) = &report.reference_model {
            let _ = writeln!(out, "{label},reference,rmse_um,{}", reference.rmse_um);
            let _ = writeln!(out, "{label},reference,r2,{}", reference.r2);
        }
        if let Some(v) = report.advantage_rmse_pct {
            let _ = writeln!(out, "{label},advantage,rmse_pct,{v}");
        }
        if let Some(v) = report.advantage_r2_pct {
            let _ = writeln!(out, "{label},advantage,r2_pct,{v}");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_per_fpt_csv(path: &Path, entries: &[(String, &EvaluationReport)]) -> Result<()> {
    let mut out = String::from("scenario,f_z,cuts,model,rmse_um\n");
    for (label, report) in entries {
        for fpt in &report.per_fpt {
            let _ = writeln!(
                out,
                "{label},{},{},test,{}",
                fpt.f_z, fpt.cuts, fpt.test_rmse_um
            );
            if let Some(reference) = fpt.ref_rmse_um {
                let _ = writeln!(out, "{label},{},{},reference,{reference}", fpt.f_z, fpt.cuts);
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Preprocesses the configured dataset and runs every scenario, writing one
/// report (JSON), per-cut CSV, normalizer, and checkpoint set per scenario,
/// plus run-level summary CSVs and the run manifest.
///
/// `jobs` caps how many independent scenario chains run concurrently;
/// results are identical for any value.
pub fn cmd_run(config: &ExperimentConfig, jobs: usize) -> Result<RunSummary> {
    let config = config.resolved();
    config.validate()?;
    fs::create_dir_all(&config.output.dir)?;

    let samples = crate::dataset::load_processed(&config.dataset.path, &config.preprocess)?;
    let available = distinct_fpts(&samples);
    for spec in &config.scenarios {
        for &fpt in &spec.test_fpts {
            if !available.iter().any(|&have| (have - fpt).abs() < FPT_EPS) {
                return Err(Error::UnknownFpt(fpt));
            }
        }
    }

    let chains = plan_chains(&config.scenarios);
    let queue = Mutex::new(chains.into_iter().collect::<VecDeque<_>>());
    let results: Mutex<Vec<ScenarioArtifacts>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = jobs.max(1).min(queue.lock().expect("fresh lock").len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let chain = queue.lock().expect("queue lock").pop_front();
                let Some(chain) = chain else { break };
                let mut chain_outcomes = Vec::new();
                for index in chain {
                    match run_one_scenario(&config, &samples, index, &mut chain_outcomes) {
                        Ok(artifacts) => results.lock().expect("results lock").push(artifacts),
                        Err(e) => {
                            failure.lock().expect("failure lock").get_or_insert(e);
                            return;
                        }
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    let mut artifacts = results.into_inner().expect("results lock");
    artifacts.sort_by_key(|a| a.entry.index);

    let labeled: Vec<(String, &EvaluationReport)> = artifacts
        .iter()
        .map(|a| (a.entry.label.clone(), &a.report))
        .collect();
    write_summary_csv(&config.output.dir.join("summary.csv"), &labeled)?;
    write_per_fpt_csv(&config.output.dir.join("per_fpt.csv"), &labeled)?;

    let manifest = RunManifest {
        config_sha256: config_sha256(&config),
        seed: config.seed,
        dataset_cuts: samples.len(),
        window_steps: config.preprocess.window_steps,
        scenarios: artifacts.iter().map(|a| a.entry.clone()).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(config.output.dir.join(RUN_MANIFEST_NAME), json)?;

    Ok(RunSummary {
        output_dir: config.output.dir.clone(),
        manifest,
        reports: artifacts.into_iter().map(|a| a.report).collect(),
    })
}

/// Reloads a completed run from its output directory.
pub fn cmd_report(config: &ExperimentConfig) -> Result<RunSummary> {
    let dir = &config.output.dir;
    let manifest_path = dir.join(RUN_MANIFEST_NAME);
    let bytes = fs::read(&manifest_path)?;
    let manifest: RunManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Manifest(format!("{}: {e}", manifest_path.display())))?;
    let mut reports = Vec::new();
    for entry in &manifest.scenarios {
        let path = dir.join(&entry.report);
        let bytes = fs::read(&path)?;
        let report: EvaluationReport = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    Ok(RunSummary {
        output_dir: dir.clone(),
        manifest,
        reports,
    })
}
