//! Flank-wear labels.
//!
//! A cutting edge is measured along four 300 um sections plus whole-edge
//! statistics, giving ten wear values per edge. Averaging those ten values
//! across the tool's edges yields the ten-component label the model is
//! trained on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when validating ordering invariants that are
/// produced by floating-point means (a mean can land a few ulps above the
/// maximum it was taken over).
const ORDER_EPS: f64 = 1e-9;

fn leq(a: f64, b: f64) -> bool {
    a <= b + ORDER_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Index of the edge-average wear value `VB_E` inside a [`WearLabel`].
pub const VB_E_INDEX: usize = 8;
/// Index of the edge-maximum wear value `VB_max_E` inside a [`WearLabel`].
pub const VB_MAX_E_INDEX: usize = 9;

/// Ten flank-wear values for one cutting edge, in micrometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWearMeasurement {
    /// 1-based edge number on the tool.
    pub edge_index: u32,
    /// Per-section average wear width, `VB_1..VB_4`.
    pub section_avg: [f64; 4],
    /// Per-section maximum wear width, `VB_max_1..VB_max_4`.
    pub section_max: [f64; 4],
    /// Whole-edge average wear width, `VB_E`.
    pub edge_avg: f64,
    /// Whole-edge maximum wear width, `VB_max_E`.
    pub edge_max: f64,
}

impl EdgeWearMeasurement {
    pub fn new(
        edge_index: u32,
        section_avg: [f64; 4],
        section_max: [f64; 4],
        edge_avg: f64,
        edge_max: f64,
    ) -> Result<Self> {
        let m = Self {
            edge_index,
            section_avg,
            section_max,
            edge_avg,
            edge_max,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            if !self.section_avg[i].is_finite() || self.section_avg[i] < 0.0 {
                return Err(Error::InvalidMeasurement(format!(
                    "section_avg[{i}] = {} must be finite and non-negative",
                    self.section_avg[i]
                )));
            }
            if !leq(self.section_avg[i], self.section_max[i]) {
                return Err(Error::InvalidMeasurement(format!(
                    "section_max[{i}] = {} is below section_avg[{i}] = {}",
                    self.section_max[i], self.section_avg[i]
                )));
            }
        }
        if self.edge_avg < 0.0 || !leq(self.edge_avg, self.edge_max) {
            return Err(Error::InvalidMeasurement(format!(
                "edge_max = {} must dominate edge_avg = {} >= 0",
                self.edge_max, self.edge_avg
            )));
        }
        for (i, &m) in self.section_max.iter().enumerate() {
            if !leq(m, self.edge_max) {
                return Err(Error::InvalidMeasurement(format!(
                    "edge_max = {} is below section_max[{i}] = {m}",
                    self.edge_max
                )));
            }
        }
        Ok(())
    }

    /// The ten values in canonical label order.
    pub fn ten_values(&self) -> [f64; 10] {
        let mut v = [0.0; 10];
        v[..4].copy_from_slice(&self.section_avg);
        v[4..8].copy_from_slice(&self.section_max);
        v[VB_E_INDEX] = self.edge_avg;
        v[VB_MAX_E_INDEX] = self.edge_max;
        v
    }
}

/// The ten-value wear label in canonical order
/// `[VB_1..VB_4, VB_max_1..VB_max_4, VB_E, VB_max_E]`, micrometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WearLabel {
    values: [f64; 10],
}

impl WearLabel {
    pub fn from_values(values: [f64; 10]) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidLabel(format!(
                    "label value [{i}] = {v} must be finite and non-negative"
                )));
            }
        }
        if !leq(values[VB_E_INDEX], values[VB_MAX_E_INDEX]) {
            return Err(Error::InvalidLabel(format!(
                "VB_E = {} exceeds VB_max_E = {}",
                values[VB_E_INDEX], values[VB_MAX_E_INDEX]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64; 10] {
        &self.values
    }

    /// Edge-average wear `VB_E`, the value used for model evaluation.
    pub fn vb_e(&self) -> f64 {
        self.values[VB_E_INDEX]
    }

    pub fn vb_max_e(&self) -> f64 {
        self.values[VB_MAX_E_INDEX]
    }
}

/// The four measurement sections along the cutting edge, expressed as
/// `(start, end)` distances from the edge end in micrometers, ordered as the
/// label orders them (`VB_1` first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionLayout {
    sections: [(f64, f64); 4],
}

impl Default for SectionLayout {
    fn default() -> Self {
        Self {
            sections: [(1000.0, 1300.0), (700.0, 1000.0), (400.0, 700.0), (100.0, 400.0)],
        }
    }
}

impl SectionLayout {
    /// Builds a custom layout. Sections must be listed from the farthest to
    /// the nearest interval and tile a contiguous span.
    pub fn new(sections: [(f64, f64); 4]) -> Result<Self> {
        for (i, (lo, hi)) in sections.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "section {i} interval [{lo}, {hi}] is not a proper interval"
                )));
            }
        }
        for i in 0..3 {
            if sections[i].0 != sections[i + 1].1 {
                return Err(Error::InvalidConfig(format!(
                    "sections {i} and {} are not contiguous: [{}, {}] then [{}, {}]",
                    i + 1,
                    sections[i].0,
                    sections[i].1,
                    sections[i + 1].0,
                    sections[i + 1].1
                )));
            }
        }
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[(f64, f64); 4] {
        &self.sections
    }

    /// Full measured span `(min, max)` covered by the four sections.
    pub fn span(&self) -> (f64, f64) {
        (self.sections[3].0, self.sections[0].1)
    }
}

/// A wear-width profile sampled along the cutting edge.
#[derive(Debug, Clone)]
pub struct WearProfile {
    /// Coordinate of the first sample, um from the edge end.
    pub start_um: f64,
    /// Sampling step in um.
    pub step_um: f64,
    /// Wear width at each sample position, um.
    pub samples: Vec<f64>,
}

impl WearProfile {
    /// Samples a wear-width function over `[start, end]` at `step` um.
    pub fn sample(start_um: f64, end_um: f64, step_um: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = ((end_um - start_um) / step_um).round() as usize + 1;
        let samples = (0..n).map(|i| f(start_um + i as f64 * step_um)).collect();
        Self {
            start_um,
            step_um,
            samples,
        }
    }

    fn end_um(&self) -> f64 {
        self.start_um + (self.samples.len().saturating_sub(1)) as f64 * self.step_um
    }
}

/// Measures one edge: per-section average/maximum plus whole-edge
/// average/maximum over the layout's span.
pub fn measure_profile(
    profile: &WearProfile,
    layout: &SectionLayout,
    edge_index: u32,
) -> Result<EdgeWearMeasurement> {
    if profile.samples.is_empty() || profile.step_um <= 0.0 {
        return Err(Error::InvalidProfile(
            "profile needs at least one sample and a positive step".into(),
        ));
    }
    if let Some(bad) = profile.samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidProfile(format!(
            "profile values must be finite and non-negative, got {bad}"
        )));
    }
    let (span_lo, span_hi) = layout.span();
    // Half-step slack so a profile sampled exactly on the span edges passes.
    let slack = 0.5 * profile.step_um;
    if profile.start_um > span_lo + slack || profile.end_um() < span_hi - slack {
        return Err(Error::ProfileCoverage {
            span_lo,
            span_hi,
            profile_lo: profile.start_um,
            profile_hi: profile.end_um(),
        });
    }

    let stats = |lo: f64, hi: f64| -> (f64, f64) {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut max = f64::NEG_INFINITY;
        for (i, &v) in profile.samples.iter().enumerate() {
            let x = profile.start_um + i as f64 * profile.step_um;
            if x >= lo - slack * 1e-9 && x <= hi + slack * 1e-9 {
                sum += v;
                count += 1;
                max = max.max(v);
            }
        }
        (sum / count as f64, max)
    };

    let mut section_avg = [0.0; 4];
    let mut section_max = [0.0; 4];
    for (i, &(lo, hi)) in layout.sections().iter().enumerate() {
        let (avg, max) = stats(lo, hi);
        section_avg[i] = avg;
        section_max[i] = max;
    }
    let (edge_avg, edge_max) = stats(span_lo, span_hi);
    EdgeWearMeasurement::new(edge_index, section_avg, section_max, edge_avg, edge_max)
}

/// Averages the ten wear values across edges, position by position.
pub fn aggregate_edges(measurements: &[EdgeWearMeasurement]) -> Result<WearLabel> {
    if measurements.is_empty() {
        return Err(Error::EmptyMeasurementList);
    }
    for m in measurements {
        m.validate()?;
    }
    let mut acc = [0.0; 10];
    for m in measurements {
        for (a, v) in acc.iter_mut().zip(m.ten_values()) {
            *a += v;
        }
    }
    let n = measurements.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    WearLabel::from_values(acc)
}

/// The tool-worn stopping rule: a tool is worn out once any edge's maximum
/// wear reaches `limit_um`.
pub fn is_worn(measurements: &[EdgeWearMeasurement], limit_um: f64) -> bool {
    measurements.iter().any(|m| m.edge_max >= limit_um)
}
