//! Configuration schema and validation.
//!
//! External I/O is in Hz and seconds; loaders convert to rad/s on the spot.
//! Validation reports the offending field by name so a broken config is
//! diagnosable from the error message alone.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::noise::{Spectrum, Spur};

/// Top-level configuration. A file may carry several sections; each command
/// requires its own.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; all per-realization seeds derive from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpss: Option<DpssSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<FiltersSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpssSection {
    pub n: usize,
    /// Half-bandwidth as the time-bandwidth product `N W`.
    pub nw: f64,
    pub k_max: usize,
    /// Segment duration for the frequency-domain output.
    pub dt_s: f64,
    /// Points of the DPSWF grid (0 to Nyquist).
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    2048
}

/// A Slepian control-waveform recipe shared by several sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlepianFamily {
    /// Waveform flavor: "dpss", "cos", "fd_dpss" or "embedded_dd".
    pub kind: String,
    pub n: usize,
    pub nw: f64,
    pub k: usize,
    pub dt_s: f64,
    /// "direct", "energy", "theta_energy" or "max_theta".
    pub normalization: String,
    /// Reference scale: rad/s for the first three modes, rad for max_theta.
    pub scale: f64,
    /// Amplitude cap in rad/s; omitted means uncapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max_rad_s: Option<f64>,
}

impl SlepianFamily {
    pub fn validate(&self, path: &str) -> Result<(), String> {
        match self.kind.as_str() {
            "dpss" | "cos" | "fd_dpss" | "embedded_dd" => {}
            other => {
                return Err(format!(
                    "{path}.kind: unknown waveform kind {other:?} (expected dpss, cos, fd_dpss \
                     or embedded_dd)"
                ))
            }
        }
        match self.normalization.as_str() {
            "direct" | "energy" | "theta_energy" | "max_theta" => {}
            other => {
                return Err(format!(
                    "{path}.normalization: unknown mode {other:?} (expected direct, energy, \
                     theta_energy or max_theta)"
                ))
            }
        }
        let w = self.nw / self.n as f64;
        if !(w > 0.0 && w < 0.5) {
            return Err(format!(
                "{path}.nw: half-bandwidth w = nw/n = {w} outside the open interval (0, 0.5)"
            ));
        }
        if self.k >= self.n {
            return Err(format!("{path}.k: order {} must be below n = {}", self.k, self.n));
        }
        if !(self.dt_s > 0.0) {
            return Err(format!("{path}.dt_s: must be positive"));
        }
        Ok(())
    }

    pub fn w(&self) -> f64 {
        self.nw / self.n as f64
    }

    pub fn tau(&self) -> f64 {
        self.n as f64 * self.dt_s
    }
}

/// Spectrum description with Hz-domain fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", deny_unknown_fields)]
pub enum SpectrumConfig {
    #[serde(rename = "one_over_f")]
    OneOverF {
        amplitude: f64,
        exponent: f64,
        ref_hz: f64,
        low_cutoff_hz: f64,
        cutoff_hz: f64,
        #[serde(default)]
        spurs: Vec<SpurConfig>,
    },
    #[serde(rename = "gaussian_bump")]
    GaussianBump { center_hz: f64, width_hz: f64, height: f64 },
    #[serde(rename = "white")]
    White { level: f64, cutoff_hz: f64 },
    #[serde(rename = "delta_tone")]
    DeltaTone { frequency_hz: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpurConfig {
    pub center_hz: f64,
    pub width_hz: f64,
    pub height: f64,
}

const TWO_PI: f64 = 2.0 * PI;

impl SpectrumConfig {
    /// Convert to the internal rad/s representation.
    pub fn to_spectrum(&self) -> Spectrum {
        match self {
            SpectrumConfig::OneOverF {
                amplitude,
                exponent,
                ref_hz,
                low_cutoff_hz,
                cutoff_hz,
                spurs,
            } => Spectrum::one_over_f_with_spurs(
                *amplitude,
                *exponent,
                TWO_PI * ref_hz,
                TWO_PI * low_cutoff_hz,
                TWO_PI * cutoff_hz,
                spurs
                    .iter()
                    .map(|s| Spur {
                        center: TWO_PI * s.center_hz,
                        width: TWO_PI * s.width_hz,
                        height: s.height,
                    })
                    .collect(),
            ),
            SpectrumConfig::GaussianBump { center_hz, width_hz, height } => {
                Spectrum::gaussian_bump(TWO_PI * center_hz, TWO_PI * width_hz, *height)
            }
            SpectrumConfig::White { level, cutoff_hz } => {
                Spectrum::white(*level, TWO_PI * cutoff_hz)
            }
            SpectrumConfig::DeltaTone { frequency_hz, amplitude } => {
                Spectrum::DeltaTone { omega: TWO_PI * frequency_hz, amplitude: *amplitude }
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), String> {
        let nonneg = |v: f64, field: &str| {
            if v < 0.0 {
                Err(format!("{path}.{field}: must be nonnegative, got {v}"))
            } else {
                Ok(())
            }
        };
        match self {
            SpectrumConfig::OneOverF { amplitude, cutoff_hz, low_cutoff_hz, .. } => {
                nonneg(*amplitude, "amplitude")?;
                if !(cutoff_hz > low_cutoff_hz) {
                    return Err(format!("{path}.cutoff_hz: must exceed low_cutoff_hz"));
                }
                Ok(())
            }
            SpectrumConfig::GaussianBump { width_hz, height, .. } => {
                nonneg(*height, "height")?;
                if !(*width_hz > 0.0) {
                    return Err(format!("{path}.width_hz: must be positive"));
                }
                Ok(())
            }
            SpectrumConfig::White { level, cutoff_hz } => {
                nonneg(*level, "level")?;
                if !(*cutoff_hz > 0.0) {
                    return Err(format!("{path}.cutoff_hz: must be positive"));
                }
                Ok(())
            }
            SpectrumConfig::DeltaTone { amplitude, frequency_hz } => {
                nonneg(*amplitude, "amplitude")?;
                if !(*frequency_hz > 0.0) {
                    return Err(format!("{path}.frequency_hz: must be positive"));
                }
                Ok(())
            }
        }
    }
}

/// Ensemble and measurement controls shared by simulation-backed sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub realizations: usize,
    /// "exact" (default) or "first_order".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// 0 means infinite shots.
    #[serde(default)]
    pub shots: u64,
    #[serde(default = "default_fidelity")]
    pub readout_fidelity: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_mode() -> String {
    "exact".to_string()
}

fn default_fidelity() -> f64 {
    1.0
}

fn default_substeps() -> usize {
    8
}

impl EnsembleSection {
    pub fn validate(&self, path: &str) -> Result<(), String> {
        if self.realizations == 0 {
            return Err(format!("{path}.realizations: must be positive"));
        }
        match self.mode.as_str() {
            "exact" | "first_order" => {}
            other => {
                return Err(format!(
                    "{path}.mode: unknown mode {other:?} (expected exact or first_order)"
                ))
            }
        }
        if !(self.readout_fidelity > 0.5 && self.readout_fidelity <= 1.0) {
            return Err(format!(
                "{path}.readout_fidelity: {} outside (0.5, 1]",
                self.readout_fidelity
            ));
        }
        if self.substeps == 0 {
            return Err(format!("{path}.substeps: must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    pub family: SlepianFamily,
    pub shifts_hz: Vec<f64>,
    #[serde(default = "default_ff_grid_points")]
    pub grid_points: usize,
    /// Grid top in Hz; defaults to the waveform Nyquist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_max_hz: Option<f64>,
}

fn default_ff_grid_points() -> usize {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub family: SlepianFamily,
    pub shift_hz: f64,
    pub ensemble: EnsembleSection,
    /// Frequency-selective system identification: sweep a probe tone across
    /// this range and average each point over stepped phases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sysid: Option<SysIdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_noise: Option<SpectrumConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SysIdSection {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    pub phases: usize,
    /// Probe-tone amplitude (rad/s on the dephasing quadrature).
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub family: SlepianFamily,
    pub shifts_hz: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    /// "two_stage" (coarse + fine + Bayesian) or "multi_axis".
    pub method: String,
    pub coarse: StageSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<StageSection>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Explicit segment boundaries; defaults to midpoints around the filter
    /// centers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_boundaries_hz: Option<Vec<f64>>,
    pub dephasing: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_noise: Option<SpectrumConfig>,
    pub ensemble: EnsembleSection,
    /// Dump the Bayesian matrices alongside the estimates.
    #[serde(default)]
    pub dump_matrices: bool,
}

fn default_lambda() -> f64 {
    0.35
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub tau_s: f64,
    pub tau_pi_s: f64,
    /// Dead time between adjacent pulse edges.
    pub buffer_s: f64,
    pub dpss: SlepianFamily,
    pub shifts_start_hz: f64,
    pub shifts_step_hz: f64,
    pub shifts_count: usize,
    pub cpmg_n_max: usize,
    /// Comb-protocol base duration; base m runs `tau_b / m` repeated
    /// `reps_per_m * m` times.
    pub as_tau_b_s: f64,
    pub as_m_max: usize,
    pub as_reps_per_m: usize,
    pub truth: SpectrumConfig,
    pub ensemble: EnsembleSection,
    /// Idle-time fractions for the scan-range markers.
    #[serde(default)]
    pub r_idle_markers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awg_min_dt_s: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(d) = &self.dpss {
            let w = d.nw / d.n as f64;
            if !(w > 0.0 && w < 0.5) {
                return Err(format!("dpss.nw: half-bandwidth w = {w} outside (0, 0.5)"));
            }
            if d.k_max >= d.n {
                return Err(format!("dpss.k_max: {} must be below n = {}", d.k_max, d.n));
            }
            if !(d.dt_s > 0.0) {
                return Err("dpss.dt_s: must be positive".to_string());
            }
            if d.grid_points < 2 {
                return Err("dpss.grid_points: need at least 2".to_string());
            }
        }
        if let Some(fsec) = &self.filters {
            fsec.family.validate("filters.family")?;
            if fsec.shifts_hz.is_empty() {
                return Err("filters.shifts_hz: at least one shift required".to_string());
            }
            if fsec.grid_points < 64 {
                return Err("filters.grid_points: need at least 64".to_string());
            }
        }
        if let Some(sim) = &self.simulate {
            sim.family.validate("simulate.family")?;
            sim.ensemble.validate("simulate.ensemble")?;
            if let Some(sysid) = &sim.sysid {
                if sysid.points < 2 || sysid.phases < 2 {
                    return Err(
                        "simulate.sysid: points and phases must both be at least 2".to_string()
                    );
                }
                if !(sysid.stop_hz > sysid.start_hz) {
                    return Err("simulate.sysid.stop_hz: must exceed start_hz".to_string());
                }
            }
            if let Some(s) = &sim.dephasing {
                s.validate("simulate.dephasing")?;
            }
            if let Some(s) = &sim.amplitude_noise {
                s.validate("simulate.amplitude_noise")?;
            }
            if sim.sysid.is_none() && sim.dephasing.is_none() && sim.amplitude_noise.is_none() {
                return Err(
                    "simulate: one of sysid, dephasing or amplitude_noise required".to_string()
                );
            }
        }
        if let Some(rec) = &self.reconstruct {
            match rec.method.as_str() {
                "two_stage" => {
                    if rec.fine.is_none() {
                        return Err(
                            "reconstruct.fine: required for the two_stage method".to_string()
                        );
                    }
                }
                "multi_axis" => {
                    if rec.amplitude_noise.is_none() {
                        return Err(
                            "reconstruct.amplitude_noise: required for multi_axis".to_string()
                        );
                    }
                }
                other => {
                    return Err(format!(
                        "reconstruct.method: unknown method {other:?} (expected two_stage or \
                         multi_axis)"
                    ))
                }
            }
            rec.coarse.family.validate("reconstruct.coarse.family")?;
            if rec.coarse.shifts_hz.is_empty() {
                return Err("reconstruct.coarse.shifts_hz: empty".to_string());
            }
            if let Some(fine) = &rec.fine {
                fine.family.validate("reconstruct.fine.family")?;
                if fine.shifts_hz.is_empty() {
                    return Err("reconstruct.fine.shifts_hz: empty".to_string());
                }
            }
            if rec.dephasing.is_none() {
                return Err("reconstruct.dephasing: truth spectrum required".to_string());
            }
            if let Some(s) = &rec.dephasing {
                s.validate("reconstruct.dephasing")?;
            }
            if let Some(s) = &rec.amplitude_noise {
                s.validate("reconstruct.amplitude_noise")?;
            }
            if !(rec.lambda >= 0.0) {
                return Err("reconstruct.lambda: must be nonnegative".to_string());
            }
            if let Some(bounds) = &rec.segment_boundaries_hz {
                if bounds.len() < 2 || bounds.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(
                        "reconstruct.segment_boundaries_hz: need an ascending list".to_string()
                    );
                }
            }
            rec.ensemble.validate("reconstruct.ensemble")?;
        }
        if let Some(cmp) = &self.compare {
            cmp.dpss.validate("compare.dpss")?;
            cmp.ensemble.validate("compare.ensemble")?;
            cmp.truth.validate("compare.truth")?;
            if !(cmp.tau_s > 0.0) {
                return Err("compare.tau_s: must be positive".to_string());
            }
            if !(cmp.tau_pi_s > 0.0) {
                return Err("compare.tau_pi_s: must be positive".to_string());
            }
            if cmp.buffer_s < 0.0 {
                return Err("compare.buffer_s: must be nonnegative".to_string());
            }
            if cmp.cpmg_n_max == 0 || cmp.shifts_count == 0 || cmp.as_m_max == 0 {
                return Err(
                    "compare: cpmg_n_max, shifts_count and as_m_max must be positive".to_string()
                );
            }
            if cmp.as_reps_per_m == 0 {
                return Err("compare.as_reps_per_m: must be positive".to_string());
            }
            if !(cmp.as_tau_b_s > 0.0 && cmp.as_tau_b_s <= cmp.tau_s) {
                return Err("compare.as_tau_b_s: must lie in (0, tau_s]".to_string());
            }
        }
        Ok(())
    }
}

/// FNV-1a over the canonical TOML form: stable across runs of one build.
pub fn config_hash(cfg: &ExperimentConfig) -> u64 {
    let text = cfg.to_toml();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
