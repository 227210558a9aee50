//! On-disk campaign datasets.
//!
//! A dataset is a directory with one `manifest.json` describing every cut
//! and, per cut, one flat little-endian `f64` file per raw channel plus the
//! drive position. The manifest carries everything needed to rebuild a
//! [`CutRecord`] and its wear label without touching the signal files, so
//! metadata passes (validation, splitting) stay cheap even for campaigns
//! recorded at full rate.
//!
//! Validation never panics and does not stop at the first problem: it
//! returns a list of structured diagnostics so a whole campaign can be
//! triaged in one pass.

use crate::error::{Error, Result};
use crate::signal::{
    preprocess_record, ChannelId, CutRecord, CuttingConditions, PreprocessOptions, ProcessedSample,
};
use crate::wear::WearLabel;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Name of the manifest file inside a dataset directory.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Manifest format understood by this version of the crate.
pub const FORMAT_VERSION: u32 = 1;

/// Feeds per tooth above this are taken to be a decimal slip — a value
/// recorded one place too large — and divided by ten on load. No
/// finish-milling feed approaches 0.1 mm per tooth.
pub const FPT_TYPO_THRESHOLD: f64 = 0.1;

/// Collapses decimal-slip feed values (for example `0.525`) back onto the
/// plausible range (`0.0525`). Values at or below the threshold pass through
/// unchanged.
pub fn normalize_fpt(f_z: f64) -> f64 {
    if f_z > FPT_TYPO_THRESHOLD {
        f_z / 10.0
    } else {
        f_z
    }
}

/// Top-level description of a stored campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub cuts: Vec<CutEntry>,
}

/// Everything known about one stored cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutEntry {
    pub tool_id: u32,
    pub cut_index: u32,
    pub conditions: CuttingConditions,
    /// Sampling period of the stored channels, seconds.
    pub sampling_period: f64,
    /// Samples per channel; every referenced file must hold exactly this
    /// many `f64` values.
    pub samples: usize,
    pub tool_diameter_mm: f64,
    pub edge_count: u32,
    /// Post-cut wear label.
    pub label: WearLabel,
    /// True when this cut pushed the tool past the wear limit.
    pub worn: bool,
    /// Relative path of each raw channel file.
    pub channels: BTreeMap<ChannelId, String>,
    /// Relative path of the drive-position file.
    pub drive_position: String,
}

/// How serious a validation finding is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// The dataset cannot be trusted or loaded as-is.
    Error,
    /// Suspicious but loadable; loaders may repair it (see [`normalize_fpt`]).
    Warning,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// One validation finding, tied to the cut or file it concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Where the problem sits, e.g. `manifest` or `tool 3 cut 7`.
    pub location: String,
    pub message: String,
}

/// Outcome of a validation pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub cuts_checked: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn error_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count()
    }

    pub fn warning_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Warning)
            .count()
    }

    /// True when no findings of any severity were recorded.
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// Renders the report as one line per finding plus a closing tally.
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for d in &self.diagnostics {
            let _ = writeln!(out, "{}: {}: {}", d.severity, d.location, d.message);
        }
        let _ = writeln!(
            out,
            "checked {} cuts: {} errors, {} warnings",
            self.cuts_checked,
            self.error_count(),
            self.warning_count()
        );
        out
    }

    fn push(&mut self, severity: Severity, location: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity,
            location: location.into(),
            message: message.into(),
        });
    }
}

fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 8 {
        return Err(Error::Manifest(format!(
            "{} holds {} bytes, expected {} ({} f64 values)",
            path.display(),
            bytes.len(),
            expected * 8,
            expected
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8 bytes")))
        .collect())
}

fn cut_dir(tool_id: u32, cut_index: u32) -> String {
    format!("tool{tool_id:02}/cut{cut_index:03}")
}

/// Incremental dataset writer; lets a campaign be stored cut by cut without
/// ever holding more than one raw record in memory.
pub struct DatasetWriter {
    root: PathBuf,
    cuts: Vec<CutEntry>,
}

impl DatasetWriter {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            cuts: Vec::new(),
        })
    }

    /// Writes one cut's channel files and queues its manifest entry.
    pub fn add_cut(&mut self, record: &CutRecord, label: &WearLabel, worn: bool) -> Result<()> {
        record.validate()?;
        let dir = cut_dir(record.tool_id, record.cut_index);
        let mut channels = BTreeMap::new();
        for id in ChannelId::RAW {
            let rel = format!("{dir}/{id}.f64");
            write_f64s(&self.root.join(&rel), record.channel(id)?)?;
            channels.insert(id, rel);
        }
        let drive_rel = format!("{dir}/drive_position.f64");
        write_f64s(&self.root.join(&drive_rel), &record.drive_position)?;
        self.cuts.push(CutEntry {
            tool_id: record.tool_id,
            cut_index: record.cut_index,
            conditions: record.conditions,
            sampling_period: record.sampling_period,
            samples: record.len(),
            tool_diameter_mm: record.tool_diameter_mm,
            edge_count: record.edge_count,
            label: label.clone(),
            worn,
            channels,
            drive_position: drive_rel,
        });
        Ok(())
    }

    /// Writes the manifest and returns it.
    pub fn finish(self) -> Result<DatasetManifest> {
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            cuts: self.cuts,
        };
        let mut out = BufWriter::new(fs::File::create(self.root.join(MANIFEST_NAME))?);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(manifest)
    }
}

/// Stores a whole in-memory campaign at once.
pub fn save_dataset(
    root: impl Into<PathBuf>,
    cuts: &[(CutRecord, WearLabel, bool)],
) -> Result<DatasetManifest> {
    let mut writer = DatasetWriter::create(root)?;
    for (record, label, worn) in cuts {
        writer.add_cut(record, label, *worn)?;
    }
    writer.finish()
}

/// Reads and structurally checks a dataset's manifest.
pub fn load_manifest(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = root.as_ref().join(MANIFEST_NAME);
    let bytes = fs::read(&path)?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Manifest(format!(
            "manifest format {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads one cut's raw record. Decimal-slip feed values are normalized via
/// [`normalize_fpt`]; everything else is read back verbatim.
pub fn load_cut(root: impl AsRef<Path>, entry: &CutEntry) -> Result<CutRecord> {
    let root = root.as_ref();
    let mut channels = BTreeMap::new();
    for id in ChannelId::RAW {
        let rel = entry.channels.get(&id).ok_or_else(|| {
            Error::Manifest(format!(
                "tool {} cut {} lists no file for channel {id}",
                entry.tool_id, entry.cut_index
            ))
        })?;
        channels.insert(id, read_f64s(&root.join(rel), entry.samples)?);
    }
    let drive_position = read_f64s(&root.join(&entry.drive_position), entry.samples)?;
    let mut conditions = entry.conditions;
    conditions.f_z = normalize_fpt(conditions.f_z);
    let record = CutRecord {
        tool_id: entry.tool_id,
        cut_index: entry.cut_index,
        conditions,
        sampling_period: entry.sampling_period,
        channels,
        drive_position,
        tool_diameter_mm: entry.tool_diameter_mm,
        edge_count: entry.edge_count,
    };
    record.validate()?;
    Ok(record)
}

/// Loads the whole campaign as raw records plus labels.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<(CutRecord, WearLabel)>> {
    let root = root.as_ref();
    let manifest = load_manifest(root)?;
    manifest
        .cuts
        .iter()
        .map(|entry| Ok((load_cut(root, entry)?, entry.label.clone())))
        .collect()
}

/// Loads the campaign and runs each cut straight through the signal
/// pipeline, holding only one raw record at a time.
pub fn load_processed(
    root: impl AsRef<Path>,
    options: &PreprocessOptions,
) -> Result<Vec<ProcessedSample>> {
    let root = root.as_ref();
    let manifest = load_manifest(root)?;
    manifest
        .cuts
        .iter()
        .map(|entry| {
            let record = load_cut(root, entry)?;
            preprocess_record(&record, &entry.label, options)
        })
        .collect()
}

/// Checks a stored dataset without loading signal data into memory:
/// manifest consistency, file presence and sizes, label invariants, and
/// feed-per-tooth plausibility.
pub fn validate_dataset(root: impl AsRef<Path>) -> Result<ValidationReport> {
    let root = root.as_ref();
    let manifest = load_manifest(root)?;
    let mut report = ValidationReport {
        cuts_checked: manifest.cuts.len(),
        ..ValidationReport::default()
    };

    let mut seen = BTreeSet::new();
    let mut last_vb_e: BTreeMap<u32, f64> = BTreeMap::new();
    let mut worn_seen: BTreeSet<u32> = BTreeSet::new();

    for entry in &manifest.cuts {
        let loc = format!("tool {} cut {}", entry.tool_id, entry.cut_index);
        if !seen.insert((entry.tool_id, entry.cut_index)) {
            report.push(Severity::Error, &loc, "duplicate tool/cut pair");
        }
        if entry.sampling_period <= 0.0 {
            report.push(
                Severity::Error,
                &loc,
                format!("sampling period {} must be positive", entry.sampling_period),
            );
        }
        if entry.samples == 0 {
            report.push(Severity::Error, &loc, "cut holds no samples");
        }

        let mut conditions = entry.conditions;
        if conditions.f_z > FPT_TYPO_THRESHOLD {
            report.push(
                Severity::Warning,
                &loc,
                format!(
                    "feed per tooth {} exceeds {FPT_TYPO_THRESHOLD} mm; loaders will read it as {}",
                    conditions.f_z,
                    normalize_fpt(conditions.f_z)
                ),
            );
            conditions.f_z = normalize_fpt(conditions.f_z);
        }
        if let Err(e) = conditions.validate() {
            report.push(Severity::Error, &loc, format!("bad cutting conditions: {e}"));
        }

        if let Err(e) = WearLabel::from_values(*entry.label.values()) {
            report.push(Severity::Error, &loc, format!("bad wear label: {e}"));
        } else {
            let vb_e = entry.label.vb_e();
            if let Some(&prev) = last_vb_e.get(&entry.tool_id) {
                if vb_e < prev {
                    report.push(
                        Severity::Warning,
                        &loc,
                        format!("mean wear shrank from {prev} to {vb_e} um"),
                    );
                }
            }
            last_vb_e.insert(entry.tool_id, vb_e);
        }

        if worn_seen.contains(&entry.tool_id) {
            report.push(
                Severity::Warning,
                &loc,
                "tool already passed the wear limit on an earlier cut",
            );
        }
        if entry.worn {
            worn_seen.insert(entry.tool_id);
        }

        let mut files: Vec<&String> = Vec::new();
        for id in ChannelId::RAW {
            match entry.channels.get(&id) {
                Some(rel) => files.push(rel),
                None => report.push(
                    Severity::Error,
                    &loc,
                    format!("channel {id} has no file"),
                ),
            }
        }
        files.push(&entry.drive_position);
        for rel in files {
            let path = root.join(rel);
            match fs::metadata(&path) {
                Ok(meta) => {
                    let expected = entry.samples as u64 * 8;
                    if meta.len() != expected {
                        report.push(
                            Severity::Error,
                            &loc,
                            format!(
                                "{rel} holds {} bytes, expected {expected}",
                                meta.len()
                            ),
                        );
                    }
                }
                Err(_) => report.push(Severity::Error, &loc, format!("missing file {rel}")),
            }
        }
    }

    for (tool_id, _) in last_vb_e {
        if !worn_seen.contains(&tool_id) {
            report.push(
                Severity::Warning,
                format!("tool {tool_id}"),
                "tool was retired before reaching the wear limit",
            );
        }
    }

    Ok(report)
}

/// Metadata needed to rebuild a record from a bare signal CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvCutMeta {
    pub tool_id: u32,
    pub cut_index: u32,
    pub conditions: CuttingConditions,
    pub sampling_period: f64,
    pub tool_diameter_mm: f64,
    pub edge_count: u32,
}

/// Column order of cut CSV files: the five raw channels, then the drive
/// position.
const CSV_HEADER: &str = "m_spindle,f_rcd_x,f_rcd_y,f_sd_x,f_sd_y,drive_position";

/// Writes one cut as CSV, one row per time step. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn export_cut_csv(path: impl AsRef<Path>, record: &CutRecord) -> Result<()> {
    record.validate()?;
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    let columns: Vec<&[f64]> = ChannelId::RAW
        .iter()
        .map(|&id| record.channel(id))
        .collect::<Result<_>>()?;
    for t in 0..record.len() {
        for column in &columns {
            write!(out, "{},", column[t])?;
        }
        writeln!(out, "{}", record.drive_position[t])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a cut CSV written by [`export_cut_csv`] (or by hand, with the same
/// header) back into a record.
pub fn import_cut_csv(path: impl AsRef<Path>, meta: &CsvCutMeta) -> Result<CutRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Manifest(format!("{}: empty file", path.display())))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Manifest(format!(
            "{}: header {header:?} does not match {CSV_HEADER:?}",
            path.display()
        )));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); 6];
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = 0;
        for (i, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Manifest(format!(
                    "{}: row {}: {field:?} is not a number",
                    path.display(),
                    row + 2
                ))
            })?;
            if i >= 6 {
                return Err(Error::Manifest(format!(
                    "{}: row {} has more than 6 fields",
                    path.display(),
                    row + 2
                )));
            }
            columns[i].push(value);
            fields = i + 1;
        }
        if fields != 6 {
            return Err(Error::Manifest(format!(
                "{}: row {} has {fields} fields, expected 6",
                path.display(),
                row + 2
            )));
        }
    }
    let drive_position = columns.pop().expect("six columns were allocated");
    let mut channels = BTreeMap::new();
    for (id, column) in ChannelId::RAW.into_iter().zip(columns) {
        channels.insert(id, column);
    }
    let mut conditions = meta.conditions;
    conditions.f_z = normalize_fpt(conditions.f_z);
    let record = CutRecord {
        tool_id: meta.tool_id,
        cut_index: meta.cut_index,
        conditions,
        sampling_period: meta.sampling_period,
        channels,
        drive_position,
        tool_diameter_mm: meta.tool_diameter_mm,
        edge_count: meta.edge_count,
    };
    record.validate()?;
    Ok(record)
}

/// File name of the per-cut CSV written by [`export_dataset_csv`].
pub const CUT_CSV_NAME: &str = "cut.csv";

/// Writes one human-readable CSV per stored cut, next to the cut's channel
/// binaries. Returns the number of files written.
pub fn export_dataset_csv(root: impl AsRef<Path>) -> Result<usize> {
    let root = root.as_ref();
    let manifest = load_manifest(root)?;
    for entry in &manifest.cuts {
        let rel = entry.channels.values().next().ok_or_else(|| {
            Error::Manifest(format!(
                "tool {} cut {} lists no channel files",
                entry.tool_id, entry.cut_index
            ))
        })?;
        let dir = match Path::new(rel).parent() {
            Some(parent) => root.join(parent),
            None => root.to_path_buf(),
        };
        let record = load_cut(root, entry)?;
        export_cut_csv(dir.join(CUT_CSV_NAME), &record)?;
    }
    Ok(manifest.cuts.len())
}
