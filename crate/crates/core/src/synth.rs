//! Synthetic milling campaign generator.
//!
//! Produces raw cut records plus per-edge wear measurements for a multi-tool
//! wear test campaign, so the whole pipeline — segmentation, filtering,
//! training, transfer evaluation — can be exercised end to end without a
//! machine tool. The generator is a deliberately simple physics sketch, not a
//! process model: flank wear follows a three-phase growth law whose clock
//! runs faster at higher feed per tooth, and force amplitudes couple to both
//! the current wear width and the feed so that feed acts as a confounder for
//! wear exactly the way it does on real force signals.
//!
//! Everything is deterministic: one master seed, one PRNG stream per tool for
//! campaign-level draws (cut durations, edge factors) and one stream per cut
//! for signal phases and sensor noise, so any cut can be regenerated in
//! isolation.

use crate::error::{Error, Result};
use crate::signal::{
    preprocess_record, ChannelId, CutRecord, CuttingConditions, PreprocessOptions, ProcessedSample,
};
use crate::wear::{
    aggregate_edges, is_worn, measure_profile, EdgeWearMeasurement, SectionLayout, WearLabel,
    WearProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Hard ceiling on cuts per tool, so a configuration whose wear law grows too
/// slowly cannot loop forever. Sane configurations stay far below it.
const MAX_CUTS_PER_TOOL: u32 = 10_000;

/// Step, in um of flank position, at which synthetic wear profiles are
/// sampled before measurement.
const PROFILE_STEP_UM: f64 = 10.0;

/// Wear-growth law: three additive phases with a feed-dependent clock.
///
/// With `u = (f_z / fz_ref)^fz_exponent * t`, the shared wear width is
/// `VB(u) = sqrt_um * sqrt(u) + linear_um_per_s * u + exp_um * (e^(rate*u) - 1)`:
/// fast initial break-in, a steady linear phase, and accelerating failure.
/// Raising the feed compresses time, so harder cuts wear the tool out in
/// proportionally fewer seconds of engagement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WearLawCoeffs {
    /// Break-in amplitude, um per sqrt-second of compressed time.
    pub sqrt_um: f64,
    /// Steady-wear rate, um per compressed second.
    pub linear_um_per_s: f64,
    /// Amplitude of the accelerating failure term, um.
    pub exp_um: f64,
    /// Growth rate of the failure term, per compressed second.
    pub exp_rate_per_s: f64,
    /// Feed per tooth that leaves the clock uncompressed, mm.
    pub fz_ref: f64,
    /// Exponent of the feed ratio in the clock compression.
    pub fz_exponent: f64,
}

impl Default for WearLawCoeffs {
    fn default() -> Self {
        // Tuned so a tool at the reference feed survives roughly 190 s of
        // engagement before the shared wear width crosses 200 um, split about
        // 90/50/60 um between the three phases at that point.
        Self {
            sqrt_um: 6.5291,
            linear_um_per_s: 0.26316,
            exp_um: 3.1437,
            exp_rate_per_s: 0.015789,
            fz_ref: 0.030,
            fz_exponent: 0.766,
        }
    }
}

/// Shared wear width, um, after `t_s` seconds of engagement at feed `f_z`.
pub fn wear_curve(t_s: f64, f_z: f64, coeffs: &WearLawCoeffs) -> f64 {
    let clock = (f_z / coeffs.fz_ref).powf(coeffs.fz_exponent);
    let u = clock * t_s;
    coeffs.sqrt_um * u.sqrt()
        + coeffs.linear_um_per_s * u
        + coeffs.exp_um * ((coeffs.exp_rate_per_s * u).exp() - 1.0)
}

/// Amplitude model tying the synthesized force channels to feed and wear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceModel {
    /// Mean feed-direction force at the reference feed with a fresh tool, N.
    pub base_force_n: f64,
    /// Exponent of the force's feed dependence. Below one: the specific
    /// cutting force falls as the chip thickens, so force grows sublinearly
    /// with feed per tooth.
    pub feed_exponent: f64,
    /// Relative force increase once wear reaches the wear limit.
    pub wear_gain: f64,
    /// Wear width beyond which the force stops growing, um.
    pub wear_sat_um: f64,
    /// Normal-direction force as a fraction of the feed-direction force.
    pub normal_ratio: f64,
    /// Rotating-dynamometer force amplitude as a fraction of the feed force.
    pub rcd_amp_ratio: f64,
    /// Tangential force (driving the spindle torque) as a fraction.
    pub tangential_ratio: f64,
    /// Effective torque lever arm, m, converting tangential force to N*m.
    pub torque_arm_m: f64,
    /// Relative ripple at the tooth-passing frequency.
    pub ripple_tooth: f64,
    /// Relative ripple at twice the tooth-passing frequency.
    pub ripple_second: f64,
    /// Relative ripple at the spindle-revolution frequency (runout).
    pub ripple_rev: f64,
    /// Radius of the circular workpiece path, mm; sets the drive rate.
    pub workpiece_radius_mm: f64,
}

impl Default for ForceModel {
    fn default() -> Self {
        Self {
            base_force_n: 120.0,
            feed_exponent: 0.75,
            wear_gain: 0.9,
            wear_sat_um: 260.0,
            normal_ratio: 0.62,
            rcd_amp_ratio: 0.85,
            tangential_ratio: 0.75,
            torque_arm_m: 0.003,
            ripple_tooth: 0.35,
            ripple_second: 0.12,
            ripple_rev: 0.08,
            workpiece_radius_mm: 95.0,
        }
    }
}

/// Full description of a synthetic campaign.
///
/// The default value is the canonical campaign: 13 tools over five feeds at
/// 20 kHz sampling, run until each tool passes the wear limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Feed-per-tooth grid, mm, ascending.
    pub fpt_grid: Vec<f64>,
    /// Number of tools run at each feed of the grid.
    pub tools_per_fpt: Vec<usize>,
    /// Per-feed range of milling seconds per cut; each cut draws uniformly.
    pub cut_duration_ranges: Vec<(f64, f64)>,
    /// Sampling period of all channels, seconds.
    pub sampling_period: f64,
    /// Length of the cut-entry and cut-exit ramp phases, seconds.
    pub ramp_s: f64,
    /// Cutting speed, m/min.
    pub v_c: f64,
    /// Cutting depth, mm.
    pub a_p: f64,
    /// Cutting width, mm.
    pub a_e: f64,
    /// Tool diameter, mm.
    pub tool_diameter_mm: f64,
    /// Number of cutting edges per tool.
    pub edge_count: u32,
    /// A tool is retired once any edge's maximum wear reaches this, um.
    pub wear_limit_um: f64,
    /// Half-width of the per-edge wear spread: factors are uniform in
    /// `[1 - spread, 1 + spread]` and fixed per tool.
    pub edge_spread: f64,
    /// Sensor noise as a fraction of each channel's fresh-tool amplitude.
    pub noise_level: f64,
    /// Master seed; all per-tool and per-cut streams derive from it.
    pub seed: u64,
    /// Wear-growth law.
    pub wear: WearLawCoeffs,
    /// Force amplitude model.
    pub force: ForceModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            fpt_grid: vec![0.015, 0.030, 0.045, 0.0525, 0.060],
            tools_per_fpt: vec![3, 3, 3, 2, 2],
            cut_duration_ranges: vec![
                (15.0, 25.0),
                (12.0, 22.0),
                (14.0, 17.0),
                (13.0, 13.0),
                (12.0, 12.0),
            ],
            sampling_period: 50e-6,
            ramp_s: 0.5,
            v_c: 25.0,
            a_p: 2.5,
            a_e: 1.5,
            tool_diameter_mm: 6.0,
            edge_count: 4,
            wear_limit_um: 200.0,
            edge_spread: 0.10,
            noise_level: 0.03,
            seed: 7,
            wear: WearLawCoeffs::default(),
            force: ForceModel::default(),
        }
    }
}

impl SynthConfig {
    /// The canonical campaign at 1 kHz instead of 20 kHz: same tools, cuts
    /// and wear trajectories, twenty times fewer samples. Useful wherever
    /// the full sampling rate adds cost but no information.
    pub fn desk() -> Self {
        Self {
            sampling_period: 1e-3,
            ..Self::default()
        }
    }

    /// A miniature campaign for tests: 1 kHz sampling, 2-3 s cuts, and a
    /// tenfold-accelerated wear law, so all 13 tools wear out within a few
    /// cuts each.
    pub fn tiny() -> Self {
        let base = WearLawCoeffs::default();
        Self {
            cut_duration_ranges: vec![(2.0, 3.0); 5],
            sampling_period: 1e-3,
            ramp_s: 0.25,
            wear: WearLawCoeffs {
                sqrt_um: 10.0 * base.sqrt_um,
                linear_um_per_s: 10.0 * base.linear_um_per_s,
                exp_um: 10.0 * base.exp_um,
                ..base
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fpt_grid.len();
        if n == 0 {
            return Err(Error::InvalidConfig("feed grid is empty".into()));
        }
        if self.tools_per_fpt.len() != n || self.cut_duration_ranges.len() != n {
            return Err(Error::InvalidConfig(format!(
                "feed grid has {n} entries but {} tool counts and {} duration ranges",
                self.tools_per_fpt.len(),
                self.cut_duration_ranges.len()
            )));
        }
        for pair in self.fpt_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidConfig(
                    "feed grid must be strictly ascending".into(),
                ));
            }
        }
        if self.fpt_grid[0] <= 0.0 {
            return Err(Error::InvalidConfig("feeds must be positive".into()));
        }
        for &(lo, hi) in &self.cut_duration_ranges {
            if lo <= 0.0 || hi < lo {
                return Err(Error::InvalidConfig(format!(
                    "bad cut duration range ({lo}, {hi})"
                )));
            }
        }
        if self.sampling_period <= 0.0 {
            return Err(Error::InvalidConfig("sampling period must be positive".into()));
        }
        if self.ramp_s < 0.0 {
            return Err(Error::InvalidConfig("ramp length cannot be negative".into()));
        }
        if self.v_c <= 0.0 || self.a_p <= 0.0 || self.a_e <= 0.0 || self.tool_diameter_mm <= 0.0 {
            return Err(Error::InvalidConfig(
                "cutting parameters must be positive".into(),
            ));
        }
        if self.edge_count == 0 {
            return Err(Error::InvalidConfig("tools need at least one edge".into()));
        }
        if self.wear_limit_um <= 0.0 {
            return Err(Error::InvalidConfig("wear limit must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.edge_spread) {
            return Err(Error::InvalidConfig(
                "edge spread must lie in [0, 1)".into(),
            ));
        }
        if self.noise_level < 0.0 {
            return Err(Error::InvalidConfig("noise level cannot be negative".into()));
        }
        let w = &self.wear;
        if w.sqrt_um < 0.0 || w.linear_um_per_s < 0.0 || w.exp_um < 0.0 || w.exp_rate_per_s < 0.0 {
            return Err(Error::InvalidConfig(
                "wear coefficients cannot be negative".into(),
            ));
        }
        if w.sqrt_um + w.linear_um_per_s + w.exp_um * w.exp_rate_per_s <= 0.0 {
            return Err(Error::InvalidConfig(
                "wear law never grows; tools would cut forever".into(),
            ));
        }
        if w.fz_ref <= 0.0 {
            return Err(Error::InvalidConfig("reference feed must be positive".into()));
        }
        if self.force.feed_exponent <= 0.0 {
            return Err(Error::InvalidConfig(
                "force must grow with feed; the exponent has to be positive".into(),
            ));
        }
        Ok(())
    }

    /// Spindle revolutions per second.
    pub fn spindle_speed_hz(&self) -> f64 {
        self.v_c * 1000.0 / (PI * self.tool_diameter_mm * 60.0)
    }

    /// Tooth-passing frequency, Hz.
    pub fn tooth_passing_hz(&self) -> f64 {
        self.edge_count as f64 * self.spindle_speed_hz()
    }

    /// Angular rate of the auxiliary drive for a circular path at the
    /// workpiece radius, rad/s, at feed `f_z`.
    pub fn drive_rate_rad_s(&self, f_z: f64) -> f64 {
        let feed_mm_s = f_z * self.edge_count as f64 * self.spindle_speed_hz();
        feed_mm_s / self.force.workpiece_radius_mm
    }

    /// Cutting conditions of a cut at feed `f_z`.
    pub fn conditions(&self, f_z: f64) -> CuttingConditions {
        CuttingConditions {
            v_c: self.v_c,
            a_p: self.a_p,
            a_e: self.a_e,
            f_z,
        }
    }

    /// The tools of the campaign, ids assigned 1.. in grid order.
    pub fn tool_plans(&self) -> Vec<ToolPlan> {
        let mut plans = Vec::new();
        let mut tool_id = 1;
        for (fpt_index, (&f_z, &count)) in
            self.fpt_grid.iter().zip(&self.tools_per_fpt).enumerate()
        {
            for _ in 0..count {
                plans.push(ToolPlan {
                    tool_id,
                    f_z,
                    fpt_index,
                });
                tool_id += 1;
            }
        }
        plans
    }
}

/// One tool of the campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolPlan {
    pub tool_id: u32,
    /// Feed per tooth this tool runs at, mm.
    pub f_z: f64,
    /// Index into the config's feed grid.
    pub fpt_index: usize,
}

/// Wear state of one tool: engagement time plus the fixed per-edge spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearState {
    /// Total milling seconds accumulated so far.
    pub cumulative_s: f64,
    /// Fixed multiplicative wear factor of each edge.
    pub edge_factors: Vec<f64>,
}

/// Wear along the flank: widest around a third of the way up the engaged
/// length, shallower towards both ends.
fn flank_shape(x_um: f64) -> f64 {
    let z = (x_um - 350.0) / 380.0;
    0.65 + 0.35 * (-z * z).exp()
}

impl WearState {
    pub fn new(edge_factors: Vec<f64>) -> Self {
        Self {
            cumulative_s: 0.0,
            edge_factors,
        }
    }

    /// Shared wear width before edge factors, um.
    pub fn shared_vb_um(&self, f_z: f64, coeffs: &WearLawCoeffs) -> f64 {
        wear_curve(self.cumulative_s, f_z, coeffs)
    }

    /// Wear profile of one edge over the layout's span.
    pub fn edge_profile(
        &self,
        edge: usize,
        f_z: f64,
        coeffs: &WearLawCoeffs,
        layout: &SectionLayout,
    ) -> WearProfile {
        let vb = self.shared_vb_um(f_z, coeffs) * self.edge_factors[edge];
        let (lo, hi) = layout.span();
        WearProfile::sample(lo, hi, PROFILE_STEP_UM, |x| vb * flank_shape(x))
    }

    /// Measures every edge at the current state.
    pub fn measure(
        &self,
        f_z: f64,
        coeffs: &WearLawCoeffs,
        layout: &SectionLayout,
    ) -> Result<Vec<EdgeWearMeasurement>> {
        (0..self.edge_factors.len())
            .map(|e| {
                let profile = self.edge_profile(e, f_z, coeffs, layout);
                measure_profile(&profile, layout, e as u32)
            })
            .collect()
    }
}

/// One planned cut: timing plus the post-cut wear measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct CutPlan {
    pub cut_index: u32,
    /// Milling seconds of this cut (excluding entry/exit ramps).
    pub milling_s: f64,
    /// Total milling seconds accumulated before this cut.
    pub start_s: f64,
    /// Per-edge wear measured after the cut.
    pub measurements: Vec<EdgeWearMeasurement>,
    /// Aggregated wear label for training.
    pub label: WearLabel,
    /// True on the cut that pushed the tool past the wear limit.
    pub worn: bool,
}

/// Cut-by-cut generator for one tool.
///
/// `plan_next` advances only the (cheap) wear bookkeeping; `next_cut` also
/// synthesizes the raw signal record. Both draw campaign-level randomness
/// from the same per-tool stream, so counting cuts via `plan_next` sees
/// exactly the cuts that full generation would produce.
pub struct ToolGenerator<'a> {
    cfg: &'a SynthConfig,
    tool: ToolPlan,
    state: WearState,
    layout: SectionLayout,
    rng: ChaCha8Rng,
    next_index: u32,
    done: bool,
}

impl<'a> ToolGenerator<'a> {
    pub fn new(cfg: &'a SynthConfig, tool: ToolPlan) -> Result<Self> {
        cfg.validate()?;
        if tool.fpt_index >= cfg.fpt_grid.len() {
            return Err(Error::InvalidConfig(format!(
                "tool {} references feed index {} outside the grid",
                tool.tool_id, tool.fpt_index
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(tool.tool_id as u64);
        let spread = cfg.edge_spread;
        let edge_factors = (0..cfg.edge_count)
            .map(|_| rng.random_range(1.0 - spread..=1.0 + spread))
            .collect();
        Ok(Self {
            cfg,
            tool,
            state: WearState::new(edge_factors),
            layout: SectionLayout::default(),
            rng,
            next_index: 0,
            done: false,
        })
    }

    pub fn state(&self) -> &WearState {
        &self.state
    }

    /// Plans the next cut, or `None` once the tool is retired.
    pub fn plan_next(&mut self) -> Option<CutPlan> {
        if self.done {
            return None;
        }
        let (lo, hi) = self.cfg.cut_duration_ranges[self.tool.fpt_index];
        let milling_s = self.rng.random_range(lo..=hi);
        let start_s = self.state.cumulative_s;
        self.state.cumulative_s += milling_s;
        let measurements = self
            .state
            .measure(self.tool.f_z, &self.cfg.wear, &self.layout)
            .expect("profiles sampled over the layout span always measure");
        let label = aggregate_edges(&measurements).expect("validated configs have edges");
        let worn = is_worn(&measurements, self.cfg.wear_limit_um);
        let cut_index = self.next_index;
        self.next_index += 1;
        if worn || self.next_index >= MAX_CUTS_PER_TOOL {
            self.done = true;
        }
        Some(CutPlan {
            cut_index,
            milling_s,
            start_s,
            measurements,
            label,
            worn,
        })
    }

    /// Generates the next cut's raw record, or `None` once the tool is
    /// retired.
    pub fn next_cut(&mut self) -> Option<(CutRecord, CutPlan)> {
        let plan = self.plan_next()?;
        let record = synth_signals(self.cfg, &self.tool, &plan);
        Some((record, plan))
    }
}

/// A constant-frequency cosine/sine pair advanced by complex rotation,
/// avoiding two trig calls per sample.
struct Osc {
    c: f64,
    s: f64,
    dc: f64,
    ds: f64,
}

impl Osc {
    fn new(freq_hz: f64, phase: f64, sampling_period: f64) -> Self {
        let w = 2.0 * PI * freq_hz * sampling_period;
        Self {
            c: phase.cos(),
            s: phase.sin(),
            dc: w.cos(),
            ds: w.sin(),
        }
    }

    /// Returns the current (cos, sin), then advances one sample.
    fn step(&mut self) -> (f64, f64) {
        let out = (self.c, self.s);
        let c = self.c * self.dc - self.s * self.ds;
        let s = self.s * self.dc + self.c * self.ds;
        self.c = c;
        self.s = s;
        out
    }
}

/// Ripple mix of one channel family: tooth-passing fundamental, its second
/// harmonic, and a once-per-revolution runout term, with a family-specific
/// phase offset.
struct Ripple {
    tooth: f64,
    second: f64,
    rev: f64,
    cos_d: f64,
    sin_d: f64,
}

impl Ripple {
    fn new(force: &ForceModel, delta: f64) -> Self {
        Self {
            tooth: force.ripple_tooth,
            second: force.ripple_second,
            rev: force.ripple_rev,
            cos_d: delta.cos(),
            sin_d: delta.sin(),
        }
    }

    fn eval(&self, tooth: (f64, f64), second: (f64, f64), rev: (f64, f64)) -> f64 {
        let shift = |(c, s): (f64, f64)| self.cos_d * c - self.sin_d * s;
        1.0 + self.tooth * shift(tooth) + self.second * shift(second) + self.rev * shift(rev)
    }
}

/// Trapezoid envelope: linear entry ramp, flat milling phase, linear exit.
fn envelope(tau: f64, total_s: f64, ramp_s: f64) -> f64 {
    if ramp_s <= 0.0 {
        return 1.0;
    }
    let up = (tau / ramp_s).min(1.0);
    let down = ((total_s - tau) / ramp_s).clamp(0.0, 1.0);
    up.min(down)
}

/// Synthesizes the raw five-channel record (plus drive position) of one cut.
///
/// Wear advances along the growth law during the milling phase and holds
/// still during the entry and exit ramps, so the trailing window of the
/// milling phase reflects the post-cut measurement almost exactly.
pub fn synth_signals(cfg: &SynthConfig, tool: &ToolPlan, cut: &CutPlan) -> CutRecord {
    let ts = cfg.sampling_period;
    let total_s = cut.milling_s + 2.0 * cfg.ramp_s;
    let n = ((total_s / ts).round() as usize).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((tool.tool_id as u64) << 32) | cut.cut_index as u64);
    let theta0 = rng.random_range(0.0..2.0 * PI);
    let carrier_phase = rng.random_range(0.0..2.0 * PI);
    let rip_feed = Ripple::new(&cfg.force, rng.random_range(0.0..2.0 * PI));
    let rip_normal = Ripple::new(&cfg.force, rng.random_range(0.0..2.0 * PI));
    let rip_rcd = Ripple::new(&cfg.force, rng.random_range(0.0..2.0 * PI));
    let rip_torque = Ripple::new(&cfg.force, rng.random_range(0.0..2.0 * PI));

    let f_rev = cfg.spindle_speed_hz();
    let f_tooth = cfg.tooth_passing_hz();
    let omega_drive = cfg.drive_rate_rad_s(tool.f_z);
    let mut tooth = Osc::new(f_tooth, 0.0, ts);
    let mut second = Osc::new(2.0 * f_tooth, 0.0, ts);
    let mut rev = Osc::new(f_rev, 0.0, ts);
    let mut carrier = Osc::new(f_rev, carrier_phase, ts);

    let force = &cfg.force;
    let amp0 = force.base_force_n * (tool.f_z / cfg.wear.fz_ref).powf(force.feed_exponent);
    let sigma_sd = cfg.noise_level * amp0;
    let sigma_rcd = cfg.noise_level * amp0 * force.rcd_amp_ratio;
    let sigma_torque = cfg.noise_level * amp0 * force.tangential_ratio * force.torque_arm_m;

    let mut spindle = Vec::with_capacity(n);
    let mut rcd_x = Vec::with_capacity(n);
    let mut rcd_y = Vec::with_capacity(n);
    let mut sd_x = Vec::with_capacity(n);
    let mut sd_y = Vec::with_capacity(n);
    let mut drive = Vec::with_capacity(n);

    for i in 0..n {
        let tau = i as f64 * ts;
        let milled = (tau - cfg.ramp_s).clamp(0.0, cut.milling_s);
        let vb = wear_curve(cut.start_s + milled, tool.f_z, &cfg.wear);
        let wear_term = 1.0 + force.wear_gain * vb.min(force.wear_sat_um) / cfg.wear_limit_um;
        let amp = amp0 * wear_term * envelope(tau, total_s, cfg.ramp_s);

        let osc_t = tooth.step();
        let osc_2 = second.step();
        let osc_r = rev.step();
        let (carrier_c, carrier_s) = carrier.step();

        let feed = amp * rip_feed.eval(osc_t, osc_2, osc_r);
        let normal = force.normal_ratio * amp * rip_normal.eval(osc_t, osc_2, osc_r);
        let theta = theta0 + omega_drive * tau;
        let (sin_th, cos_th) = theta.sin_cos();
        let noise = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        sd_x.push(feed * cos_th - normal * sin_th + sigma_sd * noise(&mut rng));
        sd_y.push(feed * sin_th + normal * cos_th + sigma_sd * noise(&mut rng));

        let rcd_amp = force.rcd_amp_ratio * amp * rip_rcd.eval(osc_t, osc_2, osc_r);
        rcd_x.push(rcd_amp * carrier_c + sigma_rcd * noise(&mut rng));
        rcd_y.push(rcd_amp * carrier_s + sigma_rcd * noise(&mut rng));

        let torque = force.tangential_ratio * amp * force.torque_arm_m;
        spindle.push(torque * rip_torque.eval(osc_t, osc_2, osc_r) + sigma_torque * noise(&mut rng));
        drive.push(theta);
    }

    let mut channels = BTreeMap::new();
    channels.insert(ChannelId::Spindle, spindle);
    channels.insert(ChannelId::RcdX, rcd_x);
    channels.insert(ChannelId::RcdY, rcd_y);
    channels.insert(ChannelId::SdX, sd_x);
    channels.insert(ChannelId::SdY, sd_y);

    CutRecord {
        tool_id: tool.tool_id,
        cut_index: cut.cut_index,
        conditions: cfg.conditions(tool.f_z),
        sampling_period: ts,
        channels,
        drive_position: drive,
        tool_diameter_mm: cfg.tool_diameter_mm,
        edge_count: cfg.edge_count,
    }
}

/// Generates the whole campaign as raw records. Memory scales with the total
/// record length; prefer [`generate_processed`] for high sampling rates.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<(CutRecord, CutPlan)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for tool in cfg.tool_plans() {
        let mut generator = ToolGenerator::new(cfg, tool)?;
        while let Some(pair) = generator.next_cut() {
            out.push(pair);
        }
    }
    Ok(out)
}

/// Generates the campaign and runs each cut straight through the signal
/// pipeline, keeping only the model-ready samples. Raw records are dropped
/// one by one, so peak memory stays at a single cut regardless of the
/// sampling rate.
pub fn generate_processed(
    cfg: &SynthConfig,
    options: &PreprocessOptions,
) -> Result<Vec<ProcessedSample>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for tool in cfg.tool_plans() {
        let mut generator = ToolGenerator::new(cfg, tool)?;
        while let Some((record, plan)) = generator.next_cut() {
            out.push(preprocess_record(&record, &plan.label, options)?);
        }
    }
    Ok(out)
}
