//! Transfer evaluation: condition-based train/test splits, the four
//! scenario kinds, regression metrics, and scenario execution.
//!
//! Scenarios A and C hold out every tool at one or two feed-per-tooth (FPT)
//! values; B and D additionally move one designated tool per held-out FPT
//! into training (partial learning) and warm-start from the matching A/C
//! model. Both the condition-aware test model and the condition-blind
//! reference model are trained with identical seeds and schedules, and
//! evaluated on the edge-average wear value VB_E.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{build_input, forward, save_checkpoint, NetworkConfig, Parameters};
use crate::signal::{ConditionKey, Normalizer, ProcessedSample};
use crate::train::{
    decay_stage_end, train_with_observer, write_loss_trace_csv, TrainConfig, TrainOutcome,
    LABEL_SCALE_UM,
};
use crate::wear::VB_E_INDEX;

/// Two feed values closer than this are considered the same grid point.
pub const FPT_EPS: f64 = 1e-9;

/// Which transfer scenario a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// One unseen FPT, no partial learning.
    A,
    /// One unseen FPT, one tool moved to training.
    B,
    /// Two unseen FPTs, no partial learning.
    C,
    /// Two unseen FPTs, one tool per FPT moved to training.
    D,
}

impl ScenarioKind {
    /// Number of held-out feed values the kind requires.
    pub fn fpt_count(self) -> usize {
        match self {
            ScenarioKind::A | ScenarioKind::B => 1,
            ScenarioKind::C | ScenarioKind::D => 2,
        }
    }

    /// Whether one tool per held-out FPT joins the training set.
    pub fn partial_learning(self) -> bool {
        matches!(self, ScenarioKind::B | ScenarioKind::D)
    }

    /// The scenario the warm start of a partial-learning kind comes from:
    /// B fine-tunes the matching A model, D the matching C model.
    pub fn warm_source(self) -> Option<ScenarioKind> {
        match self {
            ScenarioKind::B => Some(ScenarioKind::A),
            ScenarioKind::D => Some(ScenarioKind::C),
            ScenarioKind::A | ScenarioKind::C => None,
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ScenarioKind::A => "A",
            ScenarioKind::B => "B",
            ScenarioKind::C => "C",
            ScenarioKind::D => "D",
        };
        f.write_str(name)
    }
}

/// How to pick the tool that joins training in partial-learning scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartialToolRule {
    /// Lowest tool id at each held-out FPT.
    #[default]
    Lowest,
    /// Highest tool id at each held-out FPT.
    Highest,
    /// An explicit tool id per held-out FPT.
    Explicit(Vec<u32>),
}

/// One transfer scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// The held-out feed-per-tooth values, mm.
    pub test_fpts: Vec<f64>,
    #[serde(default)]
    pub partial_tool_rule: PartialToolRule,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, test_fpts: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind,
            test_fpts,
            partial_tool_rule: PartialToolRule::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.test_fpts.len() != self.kind.fpt_count() {
            return Err(Error::InvalidConfig(format!(
                "scenario {:?} needs {} test FPT(s), got {}",
                self.kind,
                self.kind.fpt_count(),
                self.test_fpts.len()
            )));
        }
        for pair in self.test_fpts.windows(2) {
            if (pair[0] - pair[1]).abs() < FPT_EPS {
                return Err(Error::InvalidConfig(format!(
                    "duplicate test FPT {}",
                    pair[0]
                )));
            }
        }
        Ok(())
    }

    pub fn partial_learning(&self) -> bool {
        self.kind.partial_learning()
    }
}

/// Index-based train/test partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Tools moved into training by the partial rule, one per test FPT;
    /// empty for scenarios A and C.
    pub partial_tools: Vec<u32>,
}

/// The distinct feed values present in a dataset, ascending.
pub fn distinct_fpts(samples: &[ProcessedSample]) -> Vec<f64> {
    let mut fpts: Vec<f64> = Vec::new();
    for s in samples {
        if !fpts.iter().any(|f| (f - s.conditions.f_z).abs() < FPT_EPS) {
            fpts.push(s.conditions.f_z);
        }
    }
    fpts.sort_by(f64::total_cmp);
    fpts
}

/// Partitions a dataset for a scenario.
///
/// All cuts at the held-out FPT(s) go to test; everything else trains. For
/// partial-learning kinds, every cut of one designated tool per held-out
/// FPT moves to the training side.
pub fn split(dataset: &[ProcessedSample], spec: &ScenarioSpec) -> Result<Split> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if distinct_fpts(dataset).len() < 2 {
        return Err(Error::SingleFptDataset);
    }
    for &fpt in &spec.test_fpts {
        if !dataset
            .iter()
            .any(|s| (s.conditions.f_z - fpt).abs() < FPT_EPS)
        {
            return Err(Error::UnknownFpt(fpt));
        }
    }

    let mut partial_tools = Vec::new();
    if spec.partial_learning() {
        for &fpt in &spec.test_fpts {
            let mut tools: Vec<u32> = dataset
                .iter()
                .filter(|s| (s.conditions.f_z - fpt).abs() < FPT_EPS)
                .map(|s| s.tool_id)
                .collect();
            tools.sort_unstable();
            tools.dedup();
            if tools.len() < 2 {
                // Moving the only tool into train would leave nothing to
                // score at this feed.
                return Err(Error::InvalidConfig(format!(
                    "partial learning at FPT {fpt} needs at least two tools, found {}",
                    tools.len()
                )));
            }
            let chosen = match &spec.partial_tool_rule {
                PartialToolRule::Lowest => tools[0],
                PartialToolRule::Highest => *tools.last().expect("non-empty by UnknownFpt check"),
                PartialToolRule::Explicit(ids) => {
                    let matching: Vec<u32> =
                        ids.iter().copied().filter(|id| tools.contains(id)).collect();
                    match matching[..] {
                        [one] => one,
                        _ => {
                            return Err(Error::InvalidConfig(format!(
                                "explicit partial rule must name exactly one tool at FPT {fpt}, matched {matching:?}"
                            )))
                        }
                    }
                }
            };
            partial_tools.push(chosen);
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        let at_test_fpt = spec
            .test_fpts
            .iter()
            .any(|f| (s.conditions.f_z - f).abs() < FPT_EPS);
        if at_test_fpt && !partial_tools.contains(&s.tool_id) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok(Split {
        train,
        test,
        partial_tools,
    })
}

/// Root-mean-square error in label units (µm).
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let n = pred.len() as f64;
    Ok((pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / n)
        .sqrt())
}

/// Coefficient of determination, `1 − SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::EmptyMetricInput);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if actual.iter().all(|a| *a == actual[0]) || ss_tot == 0.0 {
        return Err(Error::DegenerateActuals);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Relative improvement of the test model over the reference model, percent.
///
/// For lower-is-better metrics (RMSE): `100·(ref − test)/ref`; for
/// higher-is-better (R²): `100·(test − ref)/|ref|`.
pub fn advantage_pct(metric_ref: f64, metric_test: f64, lower_is_better: bool) -> Result<f64> {
    if metric_ref == 0.0 {
        return Err(Error::DivisionByZeroReference);
    }
    Ok(if lower_is_better {
        100.0 * (metric_ref - metric_test) / metric_ref
    } else {
        100.0 * (metric_test - metric_ref) / metric_ref.abs()
    })
}

/// Pooled metrics of one model over the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub rmse_um: f64,
    pub r2: f64,
}

/// RMSE breakdown for one held-out feed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptMetrics {
    pub f_z: f64,
    pub cuts: usize,
    pub test_rmse_um: f64,
    pub ref_rmse_um: Option<f64>,
}

/// RMSE breakdown for one test tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolMetrics {
    pub tool_id: u32,
    pub cuts: usize,
    pub test_rmse_um: f64,
    pub ref_rmse_um: Option<f64>,
}

/// One test cut's actual and predicted VB_E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPrediction {
    pub tool_id: u32,
    pub cut_index: u32,
    pub f_z: f64,
    pub actual_vb_e_um: f64,
    pub predicted_test_um: f64,
    pub predicted_ref_um: Option<f64>,
}

/// Everything a scenario run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: ScenarioSpec,
    pub train_tools: Vec<u32>,
    pub test_tools: Vec<u32>,
    pub partial_tools: Vec<u32>,
    pub test_model: ModelMetrics,
    /// Absent when the reference model was skipped for this run.
    pub reference_model: Option<ModelMetrics>,
    pub advantage_rmse_pct: Option<f64>,
    pub advantage_r2_pct: Option<f64>,
    pub per_fpt: Vec<FptMetrics>,
    pub per_tool: Vec<ToolMetrics>,
    pub per_cut: Vec<CutPrediction>,
}

/// Where a scenario writes its training byproducts: a checkpoint at every
/// learning-rate decay boundary and a per-epoch loss trace CSV, named
/// `{stem}_{model}_epoch{NNN}.ckpt` and `{stem}_{model}_loss.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub dir: PathBuf,
    pub stem: String,
}

/// Knobs for scenario execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOptions {
    /// Condition rows fed to the test model.
    pub condition_keys: Vec<ConditionKey>,
    /// Train and evaluate the reference model alongside the test model.
    pub train_reference: bool,
    /// In B/D, retrain from scratch on the enlarged set instead of
    /// warm-starting from the A/C parameters.
    pub partial_from_scratch: bool,
    /// When set, training emits stage checkpoints and loss traces here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_log: Option<TrainLog>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            condition_keys: vec![ConditionKey::Fz],
            train_reference: true,
            partial_from_scratch: false,
            train_log: None,
        }
    }
}

/// A finished scenario: the report plus the trained parameters, which B/D
/// runs take as their warm start.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: EvaluationReport,
    pub normalizer: Normalizer,
    pub test_params: Parameters,
    pub reference_params: Option<Parameters>,
}

/// Runs a scenario from scratch (kinds A and C, or B/D with
/// `partial_from_scratch`).
pub fn run_scenario(
    dataset: &[ProcessedSample],
    spec: &ScenarioSpec,
    test_config: &NetworkConfig,
    reference_config: &NetworkConfig,
    train_cfg: &TrainConfig,
    options: &ScenarioOptions,
) -> Result<ScenarioOutcome> {
    run_scenario_impl(dataset, spec, test_config, reference_config, train_cfg, options, None)
}

/// Runs a partial-learning scenario warm-started from the matching A/C
/// outcome's parameters.
pub fn run_scenario_warm(
    dataset: &[ProcessedSample],
    spec: &ScenarioSpec,
    test_config: &NetworkConfig,
    reference_config: &NetworkConfig,
    train_cfg: &TrainConfig,
    options: &ScenarioOptions,
    warm_test: &Parameters,
    warm_reference: Option<&Parameters>,
) -> Result<ScenarioOutcome> {
    run_scenario_impl(
        dataset,
        spec,
        test_config,
        reference_config,
        train_cfg,
        options,
        Some((warm_test, warm_reference)),
    )
}

fn gather(dataset: &[ProcessedSample], indices: &[usize]) -> Vec<ProcessedSample> {
    indices.iter().map(|&i| dataset[i].clone()).collect()
}

fn sorted_tools(samples: &[ProcessedSample]) -> Vec<u32> {
    let mut tools: Vec<u32> = samples.iter().map(|s| s.tool_id).collect();
    tools.sort_unstable();
    tools.dedup();
    tools
}

fn run_scenario_impl(
    dataset: &[ProcessedSample],
    spec: &ScenarioSpec,
    test_config: &NetworkConfig,
    reference_config: &NetworkConfig,
    train_cfg: &TrainConfig,
    options: &ScenarioOptions,
    warm: Option<(&Parameters, Option<&Parameters>)>,
) -> Result<ScenarioOutcome> {
    let partition = split(dataset, spec)?;
    let train_raw = gather(dataset, &partition.train);
    let test_raw = gather(dataset, &partition.test);

    let normalizer = Normalizer::fit(&train_raw)?;
    let train_set: Vec<ProcessedSample> = train_raw.iter().map(|s| normalizer.apply(s)).collect();
    let test_set: Vec<ProcessedSample> = test_raw.iter().map(|s| normalizer.apply(s)).collect();

    let warm_start = spec.partial_learning() && !options.partial_from_scratch;
    let keys = &options.condition_keys;
    // One training path for both models: optional warm start, and optional
    // stage checkpoints plus a loss trace when a log target is configured.
    let fit = |net: &NetworkConfig,
               init: Option<&Parameters>,
               keys: &[ConditionKey],
               model: &str|
     -> Result<TrainOutcome> {
        let init = match init {
            Some(params) => params.clone(),
            None => Parameters::init(net, train_cfg.seed),
        };
        let mut stages: Vec<(usize, Parameters)> = Vec::new();
        let outcome = train_with_observer(net, init, &train_set, keys, train_cfg, |event| {
            if options.train_log.is_some() && decay_stage_end(event.epoch, train_cfg) {
                stages.push((event.epoch, event.params.clone()));
            }
        })?;
        if let Some(log) = &options.train_log {
            std::fs::create_dir_all(&log.dir)?;
            for (epoch, params) in &stages {
                let name = format!("{}_{model}_epoch{epoch:03}.ckpt", log.stem);
                save_checkpoint(&log.dir.join(name), net, train_cfg.seed, epoch + 1, params)?;
            }
            let name = format!("{}_{model}_loss.csv", log.stem);
            write_loss_trace_csv(log.dir.join(name), train_cfg, &outcome.loss_trace)?;
        }
        Ok(outcome)
    };
    let test_outcome = match warm {
        Some((init, _)) if warm_start => fit(test_config, Some(init), keys, "test")?,
        _ => fit(test_config, None, keys, "test")?,
    };
    let reference_outcome = if options.train_reference {
        Some(match warm {
            Some((_, Some(init))) if warm_start => {
                fit(reference_config, Some(init), &[], "reference")?
            }
            _ => fit(reference_config, None, &[], "reference")?,
        })
    } else {
        None
    };

    let predict = |config: &NetworkConfig,
                   params: &Parameters,
                   keys: &[ConditionKey]|
     -> Result<Vec<f64>> {
        test_set
            .iter()
            .map(|s| {
                let input = build_input(s, keys)?;
                Ok(forward(config, params, &input)?.output()[VB_E_INDEX] * LABEL_SCALE_UM)
            })
            .collect()
    };
    let test_pred = predict(test_config, &test_outcome.params, keys)?;
    let ref_pred = reference_outcome
        .as_ref()
        .map(|o| predict(reference_config, &o.params, &[]))
        .transpose()?;
    let actual: Vec<f64> = test_raw.iter().map(|s| s.label.vb_e()).collect();

    let test_model = ModelMetrics {
        rmse_um: rmse(&test_pred, &actual)?,
        r2: r_squared(&test_pred, &actual)?,
    };
    let reference_model = ref_pred
        .as_ref()
        .map(|p| -> Result<ModelMetrics> {
            Ok(ModelMetrics {
                rmse_um: rmse(p, &actual)?,
                r2: r_squared(p, &actual)?,
            })
        })
        .transpose()?;

    let (advantage_rmse_pct, advantage_r2_pct) = match &reference_model {
        Some(r) if r.rmse_um != 0.0 && r.r2 != 0.0 => (
            Some(advantage_pct(r.rmse_um, test_model.rmse_um, true)?),
            Some(advantage_pct(r.r2, test_model.r2, false)?),
        ),
        _ => (None, None),
    };

    // per-FPT and per-tool RMSE breakdowns over the test cuts
    let subset_rmse = |keep: &dyn Fn(&ProcessedSample) -> bool| -> Result<(usize, f64, Option<f64>)> {
        let idx: Vec<usize> = (0..test_raw.len()).filter(|&i| keep(&test_raw[i])).collect();
        let a: Vec<f64> = idx.iter().map(|&i| actual[i]).collect();
        let p: Vec<f64> = idx.iter().map(|&i| test_pred[i]).collect();
        let r = ref_pred
            .as_ref()
            .map(|rp| rmse(&idx.iter().map(|&i| rp[i]).collect::<Vec<_>>(), &a))
            .transpose()?;
        Ok((idx.len(), rmse(&p, &a)?, r))
    };
    let mut per_fpt = Vec::new();
    for &f_z in &spec.test_fpts {
        let (cuts, test_rmse_um, ref_rmse_um) =
            subset_rmse(&|s: &ProcessedSample| (s.conditions.f_z - f_z).abs() < FPT_EPS)?;
        per_fpt.push(FptMetrics {
            f_z,
            cuts,
            test_rmse_um,
            ref_rmse_um,
        });
    }
    let mut per_tool = Vec::new();
    for tool_id in sorted_tools(&test_raw) {
        let (cuts, test_rmse_um, ref_rmse_um) =
            subset_rmse(&|s: &ProcessedSample| s.tool_id == tool_id)?;
        per_tool.push(ToolMetrics {
            tool_id,
            cuts,
            test_rmse_um,
            ref_rmse_um,
        });
    }

    let mut per_cut: Vec<CutPrediction> = test_raw
        .iter()
        .enumerate()
        .map(|(i, s)| CutPrediction {
            tool_id: s.tool_id,
            cut_index: s.cut_index,
            f_z: s.conditions.f_z,
            actual_vb_e_um: actual[i],
            predicted_test_um: test_pred[i],
            predicted_ref_um: ref_pred.as_ref().map(|p| p[i]),
        })
        .collect();
    per_cut.sort_by_key(|c| (c.tool_id, c.cut_index));

    let report = EvaluationReport {
        scenario: spec.clone(),
        train_tools: sorted_tools(&train_raw),
        test_tools: sorted_tools(&test_raw),
        partial_tools: partition.partial_tools,
        test_model,
        reference_model,
        advantage_rmse_pct,
        advantage_r2_pct,
        per_fpt,
        per_tool,
        per_cut,
    };
    Ok(ScenarioOutcome {
        report,
        normalizer,
        test_params: test_outcome.params,
        reference_params: reference_outcome.map(|o| o.params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{default_reference_config, default_test_config};
    use crate::signal::{CuttingConditions, SAMPLE_CHANNELS};
    use crate::tensor::Tensor;
    use crate::train::train;
    use crate::wear::WearLabel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Table-style layout: (tool ids, f_z) groups.
    const LAYOUT: [(std::ops::RangeInclusive<u32>, f64); 5] = [
        (1..=3, 0.015),
        (4..=6, 0.030),
        (7..=9, 0.045),
        (10..=11, 0.0525),
        (12..=13, 0.060),
    ];

    fn meta_sample(tool_id: u32, cut_index: u32, f_z: f64, t: usize, seed: u64) -> ProcessedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (tool_id as u64) << 16 ^ cut_index as u64);
        let base = 40.0 + 120.0 * (cut_index as f64 / 6.0) + rng.random_range(-5.0..5.0);
        let data: Vec<f64> = (0..SAMPLE_CHANNELS * t)
            .map(|_| rng.random_range(-1.0..1.0) + base / 100.0)
            .collect();
        let mut label = [base.max(1.0); 10];
        label[9] = base.max(1.0) + 20.0;
        ProcessedSample {
            signals: Tensor::from_vec(&[SAMPLE_CHANNELS, t], data).unwrap(),
            conditions: CuttingConditions {
                v_c: 25.0,
                a_p: 0.2,
                a_e: 3.0,
                f_z,
            },
            label: WearLabel::from_values(label).unwrap(),
            tool_id,
            cut_index,
        }
    }

    fn table_dataset(cuts_per_tool: u32, t: usize) -> Vec<ProcessedSample> {
        let mut out = Vec::new();
        for (tools, f_z) in LAYOUT {
            for tool in tools {
                for cut in 0..cuts_per_tool {
                    out.push(meta_sample(tool, cut, f_z, t, 7));
                }
            }
        }
        out
    }

    #[test]
    fn rmse_hand_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        let actual = [10.0, 20.0, 30.0];
        let shifted: Vec<f64> = actual.iter().map(|v| v + 2.5).collect();
        assert!((rmse(&shifted, &actual).unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyMetricInput)));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn r_squared_hand_cases() {
        let actual = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&actual, &actual).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &actual).unwrap(), 0.0);
        assert_eq!(r_squared(&[1.0, 2.0, 4.0], &actual).unwrap(), 0.5);
        assert!(matches!(
            r_squared(&[1.0, 2.0], &[5.0, 5.0]),
            Err(Error::DegenerateActuals)
        ));
    }

    #[test]
    fn advantage_hand_cases() {
        assert_eq!(advantage_pct(10.0, 10.0, true).unwrap(), 0.0);
        assert!((advantage_pct(10.0, 7.71, true).unwrap() - 22.9).abs() < 1e-9);
        assert_eq!(advantage_pct(8.0, 6.0, true).unwrap(), 25.0);
        assert!((advantage_pct(0.5, 0.683, false).unwrap() - 36.6).abs() < 1e-9);
        assert!(matches!(
            advantage_pct(0.0, 1.0, true),
            Err(Error::DivisionByZeroReference)
        ));
    }

    #[test]
    fn scenario_kinds_fix_fpt_counts() {
        assert!(ScenarioSpec::new(ScenarioKind::A, vec![0.015]).is_ok());
        assert!(ScenarioSpec::new(ScenarioKind::A, vec![0.015, 0.060]).is_err());
        assert!(ScenarioSpec::new(ScenarioKind::C, vec![0.015, 0.060]).is_ok());
        assert!(ScenarioSpec::new(ScenarioKind::D, vec![0.015]).is_err());
        assert!(ScenarioSpec::new(ScenarioKind::C, vec![0.015, 0.015]).is_err());
        assert!(ScenarioSpec::new(ScenarioKind::B, vec![0.015]).unwrap().partial_learning());
        assert!(!ScenarioSpec::new(ScenarioKind::A, vec![0.015]).unwrap().partial_learning());
    }

    #[test]
    fn split_scenario_a_holds_out_all_tools_at_the_fpt() {
        let data = table_dataset(3, 4);
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.015]).unwrap();
        let s = split(&data, &spec).unwrap();
        let test_tools = sorted_tools(&gather(&data, &s.test));
        let train_tools = sorted_tools(&gather(&data, &s.train));
        assert_eq!(test_tools, vec![1, 2, 3]);
        assert_eq!(train_tools, (4..=13).collect::<Vec<u32>>());
        assert!(s.partial_tools.is_empty());
    }

    #[test]
    fn split_scenario_b_moves_the_lowest_tool() {
        let data = table_dataset(3, 4);
        let spec = ScenarioSpec::new(ScenarioKind::B, vec![0.015]).unwrap();
        let s = split(&data, &spec).unwrap();
        assert_eq!(s.partial_tools, vec![1]);
        let test_tools = sorted_tools(&gather(&data, &s.test));
        let train_tools = sorted_tools(&gather(&data, &s.train));
        assert_eq!(test_tools, vec![2, 3]);
        assert!(train_tools.contains(&1));
    }

    #[test]
    fn split_scenario_c_holds_out_both_extremes() {
        let data = table_dataset(3, 4);
        let spec = ScenarioSpec::new(ScenarioKind::C, vec![0.015, 0.060]).unwrap();
        let s = split(&data, &spec).unwrap();
        let test_tools = sorted_tools(&gather(&data, &s.test));
        assert_eq!(test_tools, vec![1, 2, 3, 12, 13]);
    }

    #[test]
    fn split_scenario_d_moves_one_tool_per_fpt() {
        let data = table_dataset(3, 4);
        let spec = ScenarioSpec::new(ScenarioKind::D, vec![0.015, 0.060]).unwrap();
        let s = split(&data, &spec).unwrap();
        assert_eq!(s.partial_tools, vec![1, 12]);
        let test_tools = sorted_tools(&gather(&data, &s.test));
        assert_eq!(test_tools, vec![2, 3, 13]);
    }

    #[test]
    fn split_supports_alternative_partial_rules() {
        let data = table_dataset(2, 4);
        let mut spec = ScenarioSpec::new(ScenarioKind::B, vec![0.015]).unwrap();
        spec.partial_tool_rule = PartialToolRule::Highest;
        assert_eq!(split(&data, &spec).unwrap().partial_tools, vec![3]);
        spec.partial_tool_rule = PartialToolRule::Explicit(vec![2]);
        assert_eq!(split(&data, &spec).unwrap().partial_tools, vec![2]);
        spec.partial_tool_rule = PartialToolRule::Explicit(vec![1, 2]);
        assert!(split(&data, &spec).is_err());
    }

    #[test]
    fn split_rejects_unknown_and_single_fpt() {
        let data = table_dataset(2, 4);
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.099]).unwrap();
        assert!(matches!(split(&data, &spec), Err(Error::UnknownFpt(_))));

        let single: Vec<ProcessedSample> = (0..4).map(|c| meta_sample(1, c, 0.03, 4, 1)).collect();
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.03]).unwrap();
        assert!(matches!(split(&single, &spec), Err(Error::SingleFptDataset)));
    }

    proptest! {
        #[test]
        fn split_never_leaks(
            tools_per_fpt in prop::collection::vec(1u32..4, 2..5),
            cuts in 1u32..4,
            kind_pick in 0usize..4,
            seed in 0u64..100,
        ) {
            let grid = [0.015, 0.030, 0.045, 0.0525, 0.060];
            let mut data = Vec::new();
            let mut tool_id = 1u32;
            for (gi, count) in tools_per_fpt.iter().enumerate() {
                for _ in 0..*count {
                    for cut in 0..cuts {
                        data.push(meta_sample(tool_id, cut, grid[gi], 2, seed));
                    }
                    tool_id += 1;
                }
            }
            let mut kind = [ScenarioKind::A, ScenarioKind::B, ScenarioKind::C, ScenarioKind::D][kind_pick];
            let fpts: Vec<f64> = match kind.fpt_count() {
                1 => vec![grid[0]],
                _ => vec![grid[0], grid[1]],
            };
            // Partial learning needs a second tool to stay in test at every
            // held-out feed; fall back to the plain variant otherwise.
            if kind.partial_learning() && tools_per_fpt[..fpts.len()].iter().any(|&t| t < 2) {
                kind = if kind == ScenarioKind::B { ScenarioKind::A } else { ScenarioKind::C };
            }
            let spec = ScenarioSpec::new(kind, fpts.clone()).unwrap();
            let s = split(&data, &spec).unwrap();

            // disjoint and exhaustive
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());

            // held-out FPT cuts never train, except for designated partial tools
            for &i in &s.train {
                let at_test_fpt = fpts.iter().any(|f| (data[i].conditions.f_z - f).abs() < FPT_EPS);
                if at_test_fpt {
                    prop_assert!(kind.partial_learning());
                    prop_assert!(s.partial_tools.contains(&data[i].tool_id));
                }
            }
            // nothing in test is at a training FPT or a partial tool
            for &i in &s.test {
                prop_assert!(fpts.iter().any(|f| (data[i].conditions.f_z - f).abs() < FPT_EPS));
                prop_assert!(!s.partial_tools.contains(&data[i].tool_id));
            }
        }
    }

    #[test]
    fn scenario_run_produces_consistent_report() {
        let data = table_dataset(3, 64);
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.030]).unwrap();
        let test_cfg = default_test_config(64, 1).unwrap();
        let ref_cfg = default_reference_config(64).unwrap();
        let train_cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let out = run_scenario(
            &data,
            &spec,
            &test_cfg,
            &ref_cfg,
            &train_cfg,
            &ScenarioOptions::default(),
        )
        .unwrap();
        let r = &out.report;
        assert_eq!(r.test_tools, vec![4, 5, 6]);
        let mut both: Vec<u32> = r.train_tools.iter().chain(&r.test_tools).copied().collect();
        both.sort_unstable();
        assert_eq!(both, (1..=13).collect::<Vec<u32>>());
        assert!(r.test_model.rmse_um >= 0.0);
        assert!(r.test_model.r2 <= 1.0);
        assert!(r.reference_model.is_some());
        assert!(r.advantage_rmse_pct.is_some());
        assert_eq!(r.per_fpt.len(), 1);
        assert_eq!(r.per_fpt[0].cuts, 9);
        assert_eq!(r.per_tool.len(), 3);
        assert_eq!(r.per_cut.len(), 9);

        // deterministic: a second identical run serializes identically
        let again = run_scenario(
            &data,
            &spec,
            &test_cfg,
            &ref_cfg,
            &train_cfg,
            &ScenarioOptions::default(),
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&out.report).unwrap(),
            serde_json::to_string(&again.report).unwrap()
        );
    }

    #[test]
    fn train_log_writes_stage_checkpoints_and_loss_traces() {
        let dir = tempfile::tempdir().unwrap();
        let data = table_dataset(2, 64);
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.030]).unwrap();
        let test_cfg = default_test_config(64, 1).unwrap();
        let ref_cfg = default_reference_config(64).unwrap();
        let train_cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let options = ScenarioOptions {
            train_log: Some(TrainLog {
                dir: dir.path().to_path_buf(),
                stem: "s".into(),
            }),
            ..ScenarioOptions::default()
        };
        let out = run_scenario(&data, &spec, &test_cfg, &ref_cfg, &train_cfg, &options).unwrap();

        // Two epochs under a 20-epoch decay period: one stage, ending at
        // the final epoch, for each of the two models.
        for name in [
            "s_test_epoch001.ckpt",
            "s_reference_epoch001.ckpt",
            "s_test_loss.csv",
            "s_reference_loss.csv",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let stage = crate::net::load_checkpoint(&dir.path().join("s_test_epoch001.ckpt")).unwrap();
        assert_eq!(stage.params.flat(), out.test_params.flat());
        assert_eq!(stage.epoch, train_cfg.epochs);

        let text = std::fs::read_to_string(dir.path().join("s_test_loss.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + train_cfg.epochs);
        assert!(text.starts_with("epoch,lr,train_mse\n"));
    }

    #[test]
    fn reference_predictions_ignore_conditions() {
        let data = table_dataset(2, 64);
        let spec = ScenarioSpec::new(ScenarioKind::A, vec![0.030]).unwrap();
        let ref_cfg = default_reference_config(64).unwrap();
        let train_cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let partition = split(&data, &spec).unwrap();
        let train_raw = gather(&data, &partition.train);
        let normalizer = Normalizer::fit(&train_raw).unwrap();
        let train_set: Vec<_> = train_raw.iter().map(|s| normalizer.apply(s)).collect();
        let outcome = train(&ref_cfg, &train_set, &[], &train_cfg).unwrap();

        let probe = normalizer.apply(&data[partition.test[0]]);
        let mut scrambled = probe.clone();
        scrambled.conditions.f_z = 99.0;
        scrambled.conditions.v_c = -3.0;
        let a = forward(&ref_cfg, &outcome.params, &build_input(&probe, &[]).unwrap()).unwrap();
        let b = forward(&ref_cfg, &outcome.params, &build_input(&scrambled, &[]).unwrap()).unwrap();
        assert_eq!(a.output(), b.output());
    }
}
