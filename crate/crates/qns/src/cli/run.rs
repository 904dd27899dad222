//! Command implementations: each takes a validated configuration, runs the
//! pipeline, and writes columnar outputs plus a manifest into the output
//! directory. Everything downstream of the seed is deterministic, so a rerun
//! with the same configuration reproduces every file byte for byte.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::dpss::{compute_dpss, evaluate_dpswf, DpssParams, DpssSet};
use crate::filters::{
    fd_amplitude_ff, fd_dephasing_ff, fundamental_ffs, passband, uniform_grid, FilterFunction,
};
use crate::noise::{
    default_comb_spacing, derive_seed, ensemble as noise_ensemble, phase_sweep_tone,
    NoiseComponent, NoiseRealization, Spectrum, TimeGrid,
};
use crate::reconstruction::{
    as_inversion, build_prior, cpmg_npulse_estimate, filter_matrix, multi_axis, posterior_update,
    single_taper, state_to_result, AxisRecord, BayesianModel, CombSequence, NPulseMeasurement,
    PointEstimate, ReconstructionResult, SegmentGrid,
};
use crate::simulator::{
    signal_projections, tomography, Mode, NoisePair, Projections, ShotConfig, SimOptions,
    TomographyRecord,
};
use crate::waveforms::{
    cosine_shift, cpmg, dpss_waveform, embedded_dd_waveform, fd_dpss_waveform, scan_range, Limits,
    ScaleMode, ScanRangeInputs, Waveform,
};

use super::config::{
    CompareSection, EnsembleSection, ExperimentConfig, ReconstructSection, SimulateSection,
    SlepianFamily, StageSection,
};
use super::output::{write_table, Manifest, Table};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Dpss,
    Filters,
    Simulate,
    Reconstruct,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dpss => "dpss",
            Command::Filters => "filters",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration; exit code 2.
    Validation(String),
    /// Numerical failure during the run; exit code 3.
    Numerical(String),
    /// Filesystem problem; exit code 1.
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

macro_rules! numerical_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for RunError {
            fn from(e: $ty) -> Self {
                RunError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical_from!(
    crate::dpss::DpssError,
    crate::waveforms::WaveformError,
    crate::filters::FilterError,
    crate::noise::NoiseError,
    crate::simulator::SimError,
    crate::reconstruction::ReconstructionError
);

/// Run one command against a validated configuration.
pub fn run_command(
    command: Command,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    cfg.validate().map_err(RunError::Validation)?;
    let mut manifest = Manifest::new(command.name(), cfg);
    let files = match command {
        Command::Dpss => run_dpss(cfg, out_dir, &mut manifest)?,
        Command::Filters => run_filters(cfg, out_dir, &mut manifest)?,
        Command::Simulate => run_simulate(cfg, out_dir, &mut manifest)?,
        Command::Reconstruct => run_reconstruct(cfg, out_dir, &mut manifest)?,
        Command::Compare => run_compare(cfg, out_dir, &mut manifest)?,
    };
    let manifest_path = manifest.write(out_dir)?;
    let mut all = files;
    all.push(manifest_path);
    Ok(all)
}

// ---- shared helpers ---------------------------------------------------------

/// A Slepian family with its computed sequence set.
struct FamilyContext {
    family: SlepianFamily,
    set: DpssSet,
}

impl FamilyContext {
    fn new(family: &SlepianFamily) -> Result<Self, RunError> {
        let params = DpssParams::new(family.n, family.w(), family.k)
            .map_err(|e| RunError::Validation(e.to_string()))?;
        let set = compute_dpss(params)?;
        Ok(FamilyContext { family: family.clone(), set })
    }

    fn scale_mode(&self) -> Result<ScaleMode, RunError> {
        Ok(match self.family.normalization.as_str() {
            "direct" => ScaleMode::Direct(self.family.scale),
            "energy" => ScaleMode::Energy(self.family.scale),
            "theta_energy" => ScaleMode::ThetaEnergy(self.family.scale),
            "max_theta" => ScaleMode::MaxTheta(self.family.scale),
            other => return Err(RunError::Validation(format!("normalization {other:?}"))),
        })
    }

    fn waveform(&self, shift_hz: f64) -> Result<Waveform, RunError> {
        let omega_s = TWO_PI * shift_hz;
        let dt = self.family.dt_s;
        let limits = Limits { omega_max: self.family.omega_max_rad_s };
        let mode = self.scale_mode()?;
        let wf = match self.family.kind.as_str() {
            "dpss" => {
                let scale = match mode {
                    ScaleMode::Direct(s) => s,
                    _ => {
                        return Err(RunError::Validation(
                            "family.kind dpss supports only the direct normalization".into(),
                        ))
                    }
                };
                dpss_waveform(&self.set, self.family.k, scale, dt)?
            }
            "cos" => cosine_shift(&self.set, self.family.k, omega_s, dt, mode)?,
            "fd_dpss" => fd_dpss_waveform(&self.set, self.family.k, omega_s, dt, mode, &limits)?,
            "embedded_dd" => {
                embedded_dd_waveform(&self.set, self.family.k, omega_s, dt, mode, &limits)?
            }
            other => return Err(RunError::Validation(format!("family.kind {other:?}"))),
        };
        Ok(wf)
    }

    /// Concentration band of the shifted filter.
    fn band(&self, shift_hz: f64) -> (f64, f64) {
        passband(TWO_PI * shift_hz, self.family.w(), self.family.dt_s)
    }
}

/// Noise sampling grid dense enough that linear interpolation at the highest
/// spectral frequency stays below ~0.3% error.
fn noise_grid(tau: f64, cutoff: f64) -> Result<TimeGrid, RunError> {
    let step = (0.15 / cutoff.max(1.0 / tau)).min(tau / 1024.0);
    let len = (tau / step).ceil() as usize + 1;
    Ok(TimeGrid::new(step / 2.0, step, len)?)
}

fn parse_mode(ens: &EnsembleSection) -> Mode {
    if ens.mode == "first_order" {
        Mode::FirstOrder
    } else {
        Mode::Exact
    }
}

fn shot_config(ens: &EnsembleSection, seed: u64) -> ShotConfig {
    ShotConfig {
        shots: (ens.shots > 0).then_some(ens.shots),
        readout_fidelity: ens.readout_fidelity,
        seed,
    }
}

/// Simulate one ensemble measurement of a drive under the configured noise.
fn measure(
    profile: &crate::waveforms::DriveProfile,
    spec_z: Option<&Spectrum>,
    spec_o: Option<&Spectrum>,
    ens: &EnsembleSection,
    base_seed: u64,
) -> Result<(TomographyRecord, Projections), RunError> {
    let tau = profile.duration();
    let d_omega = default_comb_spacing(tau);
    let cutoff = spec_z
        .map(Spectrum::cutoff)
        .unwrap_or(0.0)
        .max(spec_o.map(Spectrum::cutoff).unwrap_or(0.0));
    let grid = noise_grid(tau, cutoff)?;
    let z: Option<Vec<NoiseRealization>> = match spec_z {
        Some(s) => Some(noise_ensemble(
            s,
            &grid,
            d_omega,
            derive_seed(base_seed, 1),
            ens.realizations,
            NoiseComponent::Dephasing,
        )?),
        None => None,
    };
    let o: Option<Vec<NoiseRealization>> = match spec_o {
        Some(s) => Some(noise_ensemble(
            s,
            &grid,
            d_omega,
            derive_seed(base_seed, 2),
            ens.realizations,
            NoiseComponent::Amplitude,
        )?),
        None => None,
    };
    let pairs: Vec<NoisePair> = (0..ens.realizations)
        .map(|i| NoisePair {
            dephasing: z.as_ref().map(|v| &v[i]),
            amplitude: o.as_ref().map(|v| &v[i]),
        })
        .collect();
    let opts = SimOptions { substeps: ens.substeps };
    let rec = tomography(
        profile,
        &pairs,
        parse_mode(ens),
        &shot_config(ens, derive_seed(base_seed, 3)),
        &opts,
    )?;
    let proj = signal_projections(&rec);
    Ok((rec, proj))
}

fn spectrum_table(spec: &Spectrum, f_max_hz: f64, points: usize) -> Table {
    let mut table = Table::new(&["f_hz", "s_value"])
        .comment("target spectral density; frequencies in Hz, density in noise-units^2 * s");
    for i in 0..points {
        let f = f_max_hz * i as f64 / (points - 1) as f64;
        table.push(vec![f, spec.value(TWO_PI * f)]);
    }
    table
}

fn result_table(result: &ReconstructionResult, truth: Option<&Spectrum>) -> Table {
    let mut table = Table::new(&[
        "f_hz",
        "estimate",
        "stderr",
        "band_lo_hz",
        "band_hi_hz",
        "truth",
    ])
    .comment(format!("method: {}", result.method))
    .comment("negative estimates are statistical and reported unclamped");
    for p in &result.points {
        let truth_value = truth.map(|s| s.value(p.omega)).unwrap_or(f64::NAN);
        table.push(vec![
            p.omega / TWO_PI,
            p.value,
            p.stderr,
            p.band.0 / TWO_PI,
            p.band.1 / TWO_PI,
            truth_value,
        ]);
    }
    table
}

// ---- dpss -------------------------------------------------------------------

fn run_dpss(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let section = cfg
        .dpss
        .as_ref()
        .ok_or_else(|| RunError::Validation("dpss: section missing from config".into()))?;
    let params = DpssParams::new(section.n, section.nw / section.n as f64, section.k_max)
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let set = compute_dpss(params)?;

    let mut files = Vec::new();
    let mut seq_cols: Vec<String> = vec!["n".to_string()];
    for k in 0..=section.k_max {
        seq_cols.push(format!("v{k}"));
    }
    let mut seq = Table {
        comments: vec![format!(
            "slepian sequences, N = {}, NW = {}, unit norm, first nonzero element positive",
            section.n, section.nw
        )],
        columns: seq_cols,
        rows: Vec::new(),
    };
    for i in 0..section.n {
        let mut row = vec![i as f64];
        for k in 0..=section.k_max {
            row.push(set.sequence(k).unwrap()[i]);
        }
        seq.push(row);
    }
    files.push(write_table(out, "dpss_sequences.tsv", &seq)?);

    let mut eig = Table::new(&["k", "lambda"])
        .comment("concentration eigenvalues via Rayleigh quotient against the sinc kernel");
    for k in 0..=section.k_max {
        eig.push(vec![k as f64, set.eigenvalue(k).unwrap()]);
    }
    files.push(write_table(out, "dpss_eigenvalues.tsv", &eig)?);

    let grid = uniform_grid(0.0, PI / section.dt_s, section.grid_points);
    let mut cols: Vec<String> = vec!["f_hz".to_string()];
    for k in 0..=section.k_max {
        cols.push(format!("u{k}"));
    }
    let mut wf_table = Table {
        comments: vec![format!(
            "frequency-domain waveforms on 0..Nyquist for dt = {} s; frequencies in Hz",
            section.dt_s
        )],
        columns: cols,
        rows: Vec::new(),
    };
    let waveforms: Vec<_> = (0..=section.k_max)
        .map(|k| evaluate_dpswf(&set, k, section.dt_s, &grid))
        .collect::<Result<_, _>>()?;
    for (i, &omega) in grid.iter().enumerate() {
        let mut row = vec![omega / TWO_PI];
        for wf in &waveforms {
            row.push(wf.values[i]);
        }
        wf_table.push(row);
    }
    files.push(write_table(out, "dpswf.tsv", &wf_table)?);

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}

// ---- filters ----------------------------------------------------------------

fn run_filters(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let section = cfg
        .filters
        .as_ref()
        .ok_or_else(|| RunError::Validation("filters: section missing from config".into()))?;
    let ctx = FamilyContext::new(&section.family)?;
    let dt = section.family.dt_s;
    let top = section.grid_max_hz.map(|f| TWO_PI * f).unwrap_or(PI / dt);
    let grid = uniform_grid(0.0, top, section.grid_points);

    let mut files = Vec::new();
    for (idx, &shift_hz) in section.shifts_hz.iter().enumerate() {
        let wf = ctx.waveform(shift_hz)?;
        let profile = wf.profile();

        let mut wf_table = Table::new(&["t_start_s", "omega_rad_s"]).comment(format!(
            "piecewise-constant drive, shift {shift_hz} Hz; value holds from t_start to the \
             next row"
        ));
        for (i, &v) in profile.values.iter().enumerate() {
            wf_table.push(vec![profile.times[i], v]);
        }
        let name = format!("waveform_{idx:02}.tsv");
        files.push(write_table(out, &name, &wf_table)?);

        let f = fundamental_ffs(&profile, &grid)?;
        let fz = f.dephasing_ff();
        let fo = f.amplitude_ff();
        let fzz = f.fzz_power();
        let mut closed: Option<(FilterFunction, FilterFunction)> = None;
        if section.family.kind == "fd_dpss" {
            let omega_scale = wf.meta.energy_equivalent_scale.unwrap_or(wf.meta.scale);
            closed = Some((
                fd_dephasing_ff(
                    &ctx.set,
                    section.family.k,
                    TWO_PI * shift_hz,
                    omega_scale,
                    dt,
                    &grid,
                )?,
                fd_amplitude_ff(
                    &ctx.set,
                    section.family.k,
                    TWO_PI * shift_hz,
                    omega_scale,
                    dt,
                    &grid,
                )?,
            ));
        }
        let band = ctx.band(shift_hz);
        let mut ff_table = Table::new(&[
            "f_hz",
            "f_z",
            "f_omega",
            "fzz_sq",
            "f_z_closed",
            "f_omega_closed",
        ])
        .comment(format!(
            "filter functions, shift {shift_hz} Hz, passband {} .. {} Hz; closed-form \
             columns are NaN for kinds without one",
            band.0 / TWO_PI,
            band.1 / TWO_PI
        ));
        for i in 0..grid.len() {
            let (cz, co) = match &closed {
                Some((z, o)) => (z.real_values().unwrap()[i], o.real_values().unwrap()[i]),
                None => (f64::NAN, f64::NAN),
            };
            ff_table.push(vec![
                grid[i] / TWO_PI,
                fz.real_values().unwrap()[i],
                fo.real_values().unwrap()[i],
                fzz.real_values().unwrap()[i],
                cz,
                co,
            ]);
        }
        let name = format!("filters_{idx:02}.tsv");
        files.push(write_table(out, &name, &ff_table)?);
    }

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}

// ---- simulate ---------------------------------------------------------------

fn run_simulate(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let section: &SimulateSection = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| RunError::Validation("simulate: section missing from config".into()))?;
    let ctx = FamilyContext::new(&section.family)?;
    let wf = ctx.waveform(section.shift_hz)?;
    let profile = wf.profile();
    let tau = profile.duration();
    let opts = SimOptions { substeps: section.ensemble.substeps };

    let mut files = Vec::new();
    if let Some(sysid) = &section.sysid {
        // Tomography versus probe frequency, each point averaged over the
        // stepped probe phases.
        let mut tom = Table::new(&["f_sid_hz", "p_x", "p_y", "p_z", "se_x", "se_y", "se_z"])
            .comment("three-axis survival probabilities vs probe frequency");
        let mut proj_table =
            Table::new(&["f_sid_hz", "s_x", "s_y", "s_z", "stderr", "tone_variance"]).comment(
                "signal projections vs probe frequency; dividing by tone_variance maps the \
                 filter value",
            );
        let grid = noise_grid(tau, TWO_PI * sysid.stop_hz)?;
        for i in 0..sysid.points {
            let f_sid = sysid.start_hz
                + (sysid.stop_hz - sysid.start_hz) * i as f64 / (sysid.points - 1) as f64;
            let tones = phase_sweep_tone(
                TWO_PI * f_sid,
                sysid.amplitude,
                sysid.phases,
                &grid,
                NoiseComponent::Dephasing,
            )?;
            let pairs: Vec<NoisePair> = tones.iter().map(NoisePair::dephasing_only).collect();
            let rec = tomography(
                &profile,
                &pairs,
                parse_mode(&section.ensemble),
                &shot_config(&section.ensemble, derive_seed(cfg.seed, 7 + i as u64)),
                &opts,
            )?;
            let proj = signal_projections(&rec);
            tom.push(vec![
                f_sid,
                rec.p[0],
                rec.p[1],
                rec.p[2],
                rec.stderr[0],
                rec.stderr[1],
                rec.stderr[2],
            ]);
            let tone_var = sysid.amplitude * sysid.amplitude / 2.0;
            proj_table.push(vec![f_sid, proj.s[0], proj.s[1], proj.s[2], proj.stderr[0], tone_var]);
        }
        files.push(write_table(out, "tomography.tsv", &tom)?);
        files.push(write_table(out, "projections.tsv", &proj_table)?);

        // Reference filter curves over the sweep range for comparison.
        let ff_grid = uniform_grid(
            TWO_PI * sysid.start_hz.max(1.0),
            TWO_PI * sysid.stop_hz,
            1024,
        );
        let f = fundamental_ffs(&profile, &ff_grid)?;
        let fz = f.dephasing_ff();
        let fo = f.amplitude_ff();
        let mut ref_table = Table::new(&["f_hz", "f_z", "f_omega"])
            .comment("numeric filter curves over the probe range");
        for i in 0..ff_grid.len() {
            ref_table.push(vec![
                ff_grid[i] / TWO_PI,
                fz.real_values().unwrap()[i],
                fo.real_values().unwrap()[i],
            ]);
        }
        files.push(write_table(out, "filters_reference.tsv", &ref_table)?);
    } else {
        let spec_z = section.dephasing.as_ref().map(|s| s.to_spectrum());
        let spec_o = section.amplitude_noise.as_ref().map(|s| s.to_spectrum());
        let (rec, proj) =
            measure(&profile, spec_z.as_ref(), spec_o.as_ref(), &section.ensemble, cfg.seed)?;
        let mut tom = Table::new(&["axis", "shots", "counts", "p", "stderr"]).comment(
            "axes: 0 = x, 1 = y, 2 = z; counts are NaN with infinite shots (shots = 0)",
        );
        for axis in 0..3 {
            tom.push(vec![
                axis as f64,
                rec.shots.map(|s| s as f64).unwrap_or(0.0),
                rec.counts.map(|c| c[axis] as f64).unwrap_or(f64::NAN),
                rec.p[axis],
                rec.stderr[axis],
            ]);
        }
        files.push(write_table(out, "tomography.tsv", &tom)?);
        let mut proj_table = Table::new(&["s_x", "s_y", "s_z", "stderr"])
            .comment("signal projections of the ensemble measurement");
        proj_table.push(vec![proj.s[0], proj.s[1], proj.s[2], proj.stderr[0]]);
        files.push(write_table(out, "projections.tsv", &proj_table)?);
    }

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}

// ---- reconstruct ------------------------------------------------------------

struct StageData {
    measurements: Vec<(f64, f64)>,
    ffs: Vec<FilterFunction>,
    eigenestimates: Vec<PointEstimate>,
}

/// Simulate one scan stage and return measurements, numeric dephasing
/// filters and per-shift eigenestimates.
fn run_stage(
    stage: &StageSection,
    spec_z: &Spectrum,
    ens: &EnsembleSection,
    ff_grid: &[f64],
    seed: u64,
) -> Result<StageData, RunError> {
    let ctx = FamilyContext::new(&stage.family)?;
    let mut measurements = Vec::new();
    let mut ffs = Vec::new();
    let mut eigenestimates = Vec::new();
    for (i, &shift_hz) in stage.shifts_hz.iter().enumerate() {
        let wf = ctx.waveform(shift_hz)?;
        let profile = wf.profile();
        let (_, proj) =
            measure(&profile, Some(spec_z), None, ens, derive_seed(seed, 101 + i as u64))?;
        let sy = (proj.s[1], proj.stderr[1]);
        let mut fz = fundamental_ffs(&profile, ff_grid)?.dephasing_ff();
        fz.passband = Some(ctx.band(shift_hz));
        let est = single_taper(sy, &fz, ctx.band(shift_hz))?;
        measurements.push(sy);
        ffs.push(fz);
        eigenestimates.push(est);
    }
    Ok(StageData { measurements, ffs, eigenestimates })
}

fn eigenestimate_table(data: &StageData, truth: &Spectrum) -> Table {
    let mut table = Table::new(&["f_hz", "estimate", "stderr", "truth"])
        .comment("per-shift eigenestimates (single-taper inversion)");
    for est in &data.eigenestimates {
        table.push(vec![est.omega / TWO_PI, est.value, est.stderr, truth.value(est.omega)]);
    }
    table
}

fn segment_average(spec: &Spectrum, band: (f64, f64)) -> f64 {
    let n = 400;
    let h = (band.1 - band.0) / n as f64;
    let mut acc = 0.5 * (spec.value(band.0) + spec.value(band.1));
    for i in 1..n {
        acc += spec.value(band.0 + h * i as f64);
    }
    acc * h / (band.1 - band.0)
}

fn matrix_table(m: &nalgebra::DMatrix<f64>, what: &str) -> Table {
    let cols: Vec<String> = (0..m.ncols()).map(|l| format!("seg{l}")).collect();
    let mut table = Table {
        comments: vec![what.to_string()],
        columns: cols,
        rows: Vec::new(),
    };
    for r in 0..m.nrows() {
        table.push((0..m.ncols()).map(|c| m[(r, c)]).collect());
    }
    table
}

fn run_reconstruct(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let section: &ReconstructSection = cfg
        .reconstruct
        .as_ref()
        .ok_or_else(|| RunError::Validation("reconstruct: section missing from config".into()))?;
    match section.method.as_str() {
        "two_stage" => run_two_stage(cfg, section, out, manifest),
        "multi_axis" => run_multi_axis(cfg, section, out, manifest),
        other => Err(RunError::Validation(format!("reconstruct.method {other:?}"))),
    }
}

fn run_two_stage(
    cfg: &ExperimentConfig,
    section: &ReconstructSection,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let truth = section.dephasing.as_ref().expect("validated").to_spectrum();
    let fine = section.fine.as_ref().expect("validated");

    // Shared filter grid covering every segment.
    let coarse_db = TWO_PI * section.coarse.family.nw / section.coarse.family.tau();
    let top_hz = section
        .coarse
        .shifts_hz
        .iter()
        .chain(fine.shifts_hz.iter())
        .fold(0.0f64, |m, &f| m.max(f))
        + 2.0 * coarse_db / TWO_PI;
    let ff_grid = uniform_grid(0.0, TWO_PI * top_hz, 4096);

    let coarse_data =
        run_stage(&section.coarse, &truth, &section.ensemble, &ff_grid, derive_seed(cfg.seed, 1))?;
    let fine_data =
        run_stage(fine, &truth, &section.ensemble, &ff_grid, derive_seed(cfg.seed, 2))?;

    // Segment layout: explicit boundaries, or midpoints around the fine
    // centers plus the coarse centers outside the fine window.
    let segments = match &section.segment_boundaries_hz {
        Some(bounds) => SegmentGrid::new(bounds.iter().map(|f| TWO_PI * f).collect())?,
        None => {
            let fine_lo = fine.shifts_hz.iter().cloned().fold(f64::INFINITY, f64::min);
            let fine_hi = fine.shifts_hz.iter().cloned().fold(0.0f64, f64::max);
            let mut centers: Vec<f64> = section
                .coarse
                .shifts_hz
                .iter()
                .filter(|f| **f < fine_lo || **f > fine_hi)
                .cloned()
                .collect();
            centers.extend(fine.shifts_hz.iter().cloned());
            let centers_rad: Vec<f64> = centers.iter().map(|f| TWO_PI * f).collect();
            SegmentGrid::around_centers(&centers_rad, 0.0, TWO_PI * top_hz)?
        }
    };

    let coarse_matrix = filter_matrix(&segments, &coarse_data.ffs)?;
    let fine_matrix = filter_matrix(&segments, &fine_data.ffs)?;
    let eig_mean = coarse_data.eigenestimates.iter().map(|e| e.value).sum::<f64>()
        / coarse_data.eigenestimates.len() as f64;
    if !(eig_mean > 0.0) {
        return Err(RunError::Numerical(
            "coarse eigenestimates average to a non-positive value".into(),
        ));
    }
    let model = BayesianModel::with_uniform_selector(
        segments.clone(),
        coarse_matrix.clone(),
        nalgebra::DVector::from_vec(coarse_data.measurements.iter().map(|m| m.0).collect()),
        nalgebra::DVector::from_vec(
            coarse_data.measurements.iter().map(|m| (m.1 * m.1).max(1e-300)).collect(),
        ),
        section.lambda,
        eig_mean,
    );
    let prior = build_prior(&model)?;
    let posterior = posterior_update(
        &prior,
        &fine_matrix,
        &nalgebra::DVector::from_vec(fine_data.measurements.iter().map(|m| m.0).collect()),
        &nalgebra::DVector::from_vec(
            fine_data.measurements.iter().map(|m| (m.1 * m.1).max(1e-300)).collect(),
        ),
    )?;

    let mut files = Vec::new();
    files.push(write_table(out, "coarse_eigenestimates.tsv", &eigenestimate_table(&coarse_data, &truth))?);
    files.push(write_table(out, "fine_eigenestimates.tsv", &eigenestimate_table(&fine_data, &truth))?);

    let prior_result = state_to_result(&prior, &segments, "bayes-prior");
    files.push(write_table(out, "prior.tsv", &result_table(&prior_result, Some(&truth)))?);
    let posterior_result = state_to_result(&posterior, &segments, "bayes-posterior");
    let mut post_table = result_table(&posterior_result, Some(&truth));
    // Replace the per-point truth column with segment averages, which is
    // what the segment estimates target.
    for (l, row) in post_table.rows.iter_mut().enumerate() {
        row[5] = segment_average(&truth, segments.segment(l));
    }
    files.push(write_table(out, "posterior.tsv", &post_table)?);

    let mut seg_table = Table::new(&["segment", "lo_hz", "hi_hz", "truth_avg"])
        .comment("segment layout and segment-averaged truth");
    for l in 0..segments.len() {
        let band = segments.segment(l);
        seg_table.push(vec![
            l as f64,
            band.0 / TWO_PI,
            band.1 / TWO_PI,
            segment_average(&truth, band),
        ]);
    }
    files.push(write_table(out, "segments.tsv", &seg_table)?);
    files.push(write_table(out, "truth.tsv", &spectrum_table(&truth, top_hz, 2000))?);

    if section.dump_matrices {
        files.push(write_table(
            out,
            "bayes_coarse_matrix.tsv",
            &matrix_table(&coarse_matrix, "coarse filter matrix: (1/pi) int_segment F_z"),
        )?);
        files.push(write_table(
            out,
            "bayes_fine_matrix.tsv",
            &matrix_table(&fine_matrix, "fine filter matrix: (1/pi) int_segment F_z"),
        )?);
        files.push(write_table(
            out,
            "bayes_prior_covariance.tsv",
            &matrix_table(&prior.covariance, "prior covariance"),
        )?);
        files.push(write_table(
            out,
            "bayes_posterior_covariance.tsv",
            &matrix_table(&posterior.covariance, "posterior covariance"),
        )?);
    }

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}

fn run_multi_axis(
    cfg: &ExperimentConfig,
    section: &ReconstructSection,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let truth_z = section.dephasing.as_ref().expect("validated").to_spectrum();
    let truth_o = section.amplitude_noise.as_ref().expect("validated").to_spectrum();
    let ctx = FamilyContext::new(&section.coarse.family)?;

    let mut records = Vec::new();
    let mut rows = Table::new(&["f_s_hz", "s_x", "s_y", "s_z", "stderr"])
        .comment("signal projections per band center");
    for (i, &shift_hz) in section.coarse.shifts_hz.iter().enumerate() {
        let wf = ctx.waveform(shift_hz)?;
        let profile = wf.profile();
        let (_, proj) = measure(
            &profile,
            Some(&truth_z),
            Some(&truth_o),
            &section.ensemble,
            derive_seed(cfg.seed, 301 + i as u64),
        )?;
        let band = ctx.band(shift_hz);
        let ff_grid = uniform_grid(band.0.max(0.0), band.1, 600);
        let f = fundamental_ffs(&profile, &ff_grid)?;
        let mut fz = f.dephasing_ff();
        fz.passband = Some(band);
        let mut fo = f.amplitude_ff();
        fo.passband = Some(band);
        rows.push(vec![shift_hz, proj.s[0], proj.s[1], proj.s[2], proj.stderr[0]]);
        records.push(AxisRecord {
            omega_s: TWO_PI * shift_hz,
            sy: (proj.s[1], proj.stderr[1]),
            sx: (proj.s[0], proj.stderr[0]),
            fz,
            f_omega: fo,
            band,
        });
    }
    let (dephasing, amplitude) = multi_axis(&records)?;

    let top_hz = section.coarse.shifts_hz.iter().cloned().fold(0.0f64, f64::max) * 1.4;
    let mut files = Vec::new();
    files.push(write_table(out, "projections.tsv", &rows)?);
    files.push(write_table(
        out,
        "reconstruction_dephasing.tsv",
        &result_table(&dephasing, Some(&truth_z)),
    )?);
    files.push(write_table(
        out,
        "reconstruction_amplitude.tsv",
        &result_table(&amplitude, Some(&truth_o)),
    )?);
    files.push(write_table(out, "truth_dephasing.tsv", &spectrum_table(&truth_z, top_hz, 1500))?);
    files.push(write_table(out, "truth_amplitude.tsv", &spectrum_table(&truth_o, top_hz, 1500))?);

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}

// ---- compare ----------------------------------------------------------------

/// The three per-method reconstructions plus bookkeeping, kept so the
/// acceptance suite can assert on them without re-reading files.
pub struct CompareOutcome {
    pub dpss: ReconstructionResult,
    pub cpmg: ReconstructionResult,
    pub comb: ReconstructionResult,
    pub truth: Spectrum,
    /// Shared scan-range top (rad/s): the pulsed protocols' limit.
    pub omega_shared_max: f64,
}

/// Mean |estimate/truth - 1| over points inside `[lo, hi]` with positive
/// truth.
pub fn mean_abs_rel_err(
    result: &ReconstructionResult,
    truth: &Spectrum,
    lo: f64,
    hi: f64,
) -> (usize, f64) {
    let mut acc = 0.0;
    let mut n = 0usize;
    for p in &result.points {
        if p.omega < lo || p.omega > hi {
            continue;
        }
        let t = truth.value(p.omega);
        if t <= 0.0 {
            continue;
        }
        acc += (p.value / t - 1.0).abs();
        n += 1;
    }
    (n, if n > 0 { acc / n as f64 } else { f64::NAN })
}

/// Run the three-method comparison and return the outcome for inspection.
pub fn compare_outcome(cfg: &ExperimentConfig) -> Result<CompareOutcome, RunError> {
    let section: &CompareSection = cfg
        .compare
        .as_ref()
        .ok_or_else(|| RunError::Validation("compare: section missing from config".into()))?;
    let truth = section.truth.to_spectrum();
    let tau = section.tau_s;
    let ens = &section.ensemble;

    // Slepian arm.
    let ctx = FamilyContext::new(&section.dpss)?;
    let mut dpss_points = Vec::new();
    for w in 0..section.shifts_count {
        let shift_hz = section.shifts_start_hz + section.shifts_step_hz * w as f64;
        let wf = ctx.waveform(shift_hz)?;
        let profile = wf.profile();
        let (_, proj) =
            measure(&profile, Some(&truth), None, ens, derive_seed(cfg.seed, 1000 + w as u64))?;
        let band = ctx.band(shift_hz);
        let grid = uniform_grid(band.0.max(0.0), band.1, 600);
        let mut fz = fundamental_ffs(&profile, &grid)?.dephasing_ff();
        fz.passband = Some(band);
        dpss_points.push(single_taper((proj.s[1], proj.stderr[1]), &fz, band)?);
    }
    let dpss_result = ReconstructionResult::new("dpss-fd", dpss_points);

    // Pulse-train arm: shared grid covering every main peak.
    let f_top = 1.2 * section.cpmg_n_max as f64 / (2.0 * tau);
    let cpmg_grid = uniform_grid(TWO_PI * 10.0, TWO_PI * f_top, 8192);
    let mut cpmg_measurements = Vec::new();
    for n in 1..=section.cpmg_n_max {
        let seq = cpmg(n, tau, section.tau_pi_s, 0.0)?;
        let profile = seq.render()?;
        let (_, proj) =
            measure(&profile, Some(&truth), None, ens, derive_seed(cfg.seed, 2000 + n as u64))?;
        let fzz_sq = fundamental_ffs(&profile, &cpmg_grid)?.fzz_power();
        cpmg_measurements.push(NPulseMeasurement {
            n,
            measurement: (proj.s[2], proj.stderr[2]),
            fzz_sq,
        });
    }
    let cpmg_result = cpmg_npulse_estimate(&cpmg_measurements, tau)?;

    // Repeated-base comb arm.
    let omega_0 = TWO_PI / section.as_tau_b_s;
    let comb_grid = uniform_grid(
        omega_0 * 0.25,
        omega_0 * (section.as_m_max as f64 + 1.0),
        4096,
    );
    let mut comb_sequences = Vec::new();
    for m in 1..=section.as_m_max {
        let base = cpmg(2, section.as_tau_b_s / m as f64, section.tau_pi_s, 0.0)?;
        let base_profile = base.render()?;
        let reps = section.as_reps_per_m * m;
        let full = base_profile.repeated(reps)?;
        let (_, proj) =
            measure(&full, Some(&truth), None, ens, derive_seed(cfg.seed, 3000 + m as u64))?;
        let fzz_sq = fundamental_ffs(&base_profile, &comb_grid)?.fzz_power();
        comb_sequences.push(CombSequence {
            m,
            repetitions: reps,
            measurement: (proj.s[2], proj.stderr[2]),
            fzz_sq,
        });
    }
    let (comb_result, _condition) = as_inversion(&comb_sequences, section.as_tau_b_s, section.as_m_max)?;

    let delta_tau_min = section.tau_pi_s + section.buffer_s;
    Ok(CompareOutcome {
        dpss: dpss_result,
        cpmg: cpmg_result,
        comb: comb_result,
        truth,
        omega_shared_max: PI / delta_tau_min,
    })
}

fn run_compare(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<PathBuf>, RunError> {
    let section = cfg
        .compare
        .as_ref()
        .ok_or_else(|| RunError::Validation("compare: section missing from config".into()))?;
    let outcome = compare_outcome(cfg)?;

    let mut files = Vec::new();
    let f_top =
        (outcome.omega_shared_max / TWO_PI).max(section.shifts_count as f64 * section.shifts_step_hz);
    files.push(write_table(out, "truth.tsv", &spectrum_table(&outcome.truth, f_top, 2000))?);
    for (name, result) in [
        ("dpss_reconstruction.tsv", &outcome.dpss),
        ("cpmg_reconstruction.tsv", &outcome.cpmg),
        ("comb_reconstruction.tsv", &outcome.comb),
    ] {
        files.push(write_table(out, name, &result_table(result, Some(&outcome.truth)))?);
    }

    // Error summary over the shared scan range.
    let mut report = Table::new(&["method", "points", "mean_abs_rel_err"])
        .comment("methods: 0 = dpss, 1 = cpmg n-pulse, 2 = comb inversion")
        .comment("errors averaged over the shared scan range");
    for (id, result) in
        [(0usize, &outcome.dpss), (1, &outcome.cpmg), (2, &outcome.comb)]
    {
        let (n, err) =
            mean_abs_rel_err(result, &outcome.truth, 0.0, outcome.omega_shared_max);
        report.push(vec![id as f64, n as f64, err]);
    }
    files.push(write_table(out, "report.tsv", &report)?);

    // Scan-range markers for the configured idle fractions.
    let mut markers = Table::new(&[
        "r_idle",
        "cpmg_f_max_hz",
        "comb_f_max_hz",
        "dpss_f_max_hz",
        "cpmg_f_res_hz",
        "comb_f_res_hz",
        "dpss_f_res_hz",
    ])
    .comment("scan-range and resolution bounds per idle fraction");
    for &r_idle in &section.r_idle_markers {
        let rep = scan_range(&ScanRangeInputs {
            tau_pi: section.tau_pi_s,
            buffer: section.buffer_s,
            r_idle,
            dt: Some(section.dpss.dt_s),
            awg_min_dt: section.awg_min_dt_s,
            tau: Some(section.tau_s),
            tau_b: Some(section.as_tau_b_s),
            shift_spacing: Some(TWO_PI * section.shifts_step_hz),
        });
        let dpss = rep.dpss.expect("dt provided");
        markers.push(vec![
            r_idle,
            rep.cpmg.omega_max / TWO_PI,
            rep.comb.omega_max / TWO_PI,
            dpss.omega_max / TWO_PI,
            rep.cpmg.omega_res.unwrap_or(f64::NAN) / TWO_PI,
            rep.comb.omega_res.unwrap_or(f64::NAN) / TWO_PI,
            dpss.omega_res.unwrap_or(f64::NAN) / TWO_PI,
        ]);
    }
    files.push(write_table(out, "scan_ranges.tsv", &markers)?);

    for f in &files {
        manifest.record(f);
    }
    Ok(files)
}
