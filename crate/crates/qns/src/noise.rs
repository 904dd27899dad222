//! Target spectra and stationary Gaussian-model noise synthesis.
//!
//! A realization is a fixed-amplitude random-phase cosine comb,
//!
//! `beta(t) = sum_i A_i cos(omega_i t + phi_i)`,
//!
//! with `omega_i = i * delta_omega` up to the spectrum cutoff and phases drawn
//! uniformly from a seeded generator. Amplitudes follow the frozen convention
//!
//! `A_i = 2 sqrt(S(omega_i) delta_omega / (2 pi))`,
//!
//! chosen so the ensemble obeys the one-sided overlap law
//! `<a^2> = (1/pi) int_0^inf F(omega) S(omega) domega` exactly on the comb;
//! equivalently the lag-0 autocovariance is `(1/pi) int_0^inf S domega`.
//! Every estimator in this crate relies on that convention.
//!
//! Amplitudes are deterministic; only phases are random. Identical
//! `(spectrum, grid, delta_omega, seed)` inputs reproduce a realization
//! bit for bit.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseError {
    /// No comb line falls inside the spectrum's support.
    EmptyComb { delta_omega: f64, cutoff: f64 },
    /// Invalid parameter, with the offending field named.
    InvalidArgument(String),
}

impl fmt::Display for NoiseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseError::EmptyComb { delta_omega, cutoff } => write!(
                f,
                "no comb lines: spacing {delta_omega:.6e} rad/s exceeds the cutoff {cutoff:.6e}"
            ),
            NoiseError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for NoiseError {}

/// A narrowband Gaussian feature riding on a broadband background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spur {
    /// Center (rad/time).
    pub center: f64,
    /// Gaussian sigma (rad/time).
    pub width: f64,
    /// Peak height (noise-units^2 * time).
    pub height: f64,
}

/// A one-sided power spectral density `S(omega) >= 0`, `omega >= 0`, with the
/// symmetric extension `S(-omega) = S(omega)` understood.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// Samples on an ascending grid, linearly interpolated, zero outside.
    Gridded { omega: Vec<f64>, values: Vec<f64> },
    /// `amplitude / (omega / omega_ref)^exponent`, flattened below
    /// `low_cutoff`, zero above `cutoff`, plus narrowband spurs.
    OneOverF {
        amplitude: f64,
        exponent: f64,
        omega_ref: f64,
        low_cutoff: f64,
        cutoff: f64,
        spurs: Vec<Spur>,
    },
    /// Gaussian bump `height * exp(-(omega - center)^2 / (2 width^2))`.
    GaussianBump { center: f64, width: f64, height: f64 },
    /// Flat `level` up to `cutoff`.
    White { level: f64, cutoff: f64 },
    /// A single spectral line: `beta(t) = amplitude * cos(omega t + phi)`.
    /// The density is a delta function; `value()` reports zero and the line
    /// is handled explicitly during synthesis.
    DeltaTone { omega: f64, amplitude: f64 },
    /// Pointwise sum of components.
    Sum(Vec<Spectrum>),
}

impl Spectrum {
    pub fn one_over_f_with_spurs(
        amplitude: f64,
        exponent: f64,
        omega_ref: f64,
        low_cutoff: f64,
        cutoff: f64,
        spurs: Vec<Spur>,
    ) -> Spectrum {
        Spectrum::OneOverF { amplitude, exponent, omega_ref, low_cutoff, cutoff, spurs }
    }

    pub fn gaussian_bump(center: f64, width: f64, height: f64) -> Spectrum {
        Spectrum::GaussianBump { center, width, height }
    }

    pub fn white(level: f64, cutoff: f64) -> Spectrum {
        Spectrum::White { level, cutoff }
    }

    /// Density at `omega >= 0` (delta lines report zero here).
    pub fn value(&self, omega: f64) -> f64 {
        let omega = omega.abs();
        match self {
            Spectrum::Gridded { omega: grid, values } => {
                if grid.is_empty() || omega < grid[0] || omega > *grid.last().unwrap() {
                    return 0.0;
                }
                match grid.binary_search_by(|p| p.partial_cmp(&omega).unwrap()) {
                    Ok(i) => values[i],
                    Err(i) => {
                        let t = (omega - grid[i - 1]) / (grid[i] - grid[i - 1]);
                        values[i - 1] * (1.0 - t) + values[i] * t
                    }
                }
            }
            Spectrum::OneOverF { amplitude, exponent, omega_ref, low_cutoff, cutoff, spurs } => {
                if omega > *cutoff {
                    return 0.0;
                }
                let base = amplitude / (omega.max(*low_cutoff) / omega_ref).powf(*exponent);
                let spur_sum: f64 = spurs
                    .iter()
                    .map(|s| {
                        let d = (omega - s.center) / s.width;
                        s.height * (-0.5 * d * d).exp()
                    })
                    .sum();
                base + spur_sum
            }
            Spectrum::GaussianBump { center, width, height } => {
                let d = (omega - center) / width;
                height * (-0.5 * d * d).exp()
            }
            Spectrum::White { level, cutoff } => {
                if omega <= *cutoff {
                    *level
                } else {
                    0.0
                }
            }
            Spectrum::DeltaTone { .. } => 0.0,
            Spectrum::Sum(parts) => parts.iter().map(|p| p.value(omega)).sum(),
        }
    }

    /// Frequency above which the density is treated as zero.
    pub fn cutoff(&self) -> f64 {
        match self {
            Spectrum::Gridded { omega, .. } => omega.last().copied().unwrap_or(0.0),
            Spectrum::OneOverF { cutoff, .. } => *cutoff,
            Spectrum::GaussianBump { center, width, .. } => center + 6.0 * width,
            Spectrum::White { cutoff, .. } => *cutoff,
            Spectrum::DeltaTone { omega, .. } => *omega,
            Spectrum::Sum(parts) => parts.iter().map(|p| p.cutoff()).fold(0.0, f64::max),
        }
    }

    /// `(1/pi) int_0^inf S domega` by fine trapezoid: the lag-0 autocovariance
    /// the synthesized ensembles converge to. Delta lines add `A^2/2`.
    pub fn variance(&self) -> f64 {
        if let Spectrum::DeltaTone { amplitude, .. } = self {
            return amplitude * amplitude / 2.0;
        }
        if let Spectrum::Sum(parts) = self {
            return parts.iter().map(|p| p.variance()).sum();
        }
        let cutoff = self.cutoff();
        if cutoff <= 0.0 {
            return 0.0;
        }
        let n = 200_000;
        let h = cutoff / n as f64;
        let mut acc = 0.5 * (self.value(0.0) + self.value(cutoff));
        for i in 1..n {
            acc += self.value(h * i as f64);
        }
        acc * h / PI
    }
}

/// Which Hamiltonian term a realization feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseComponent {
    /// Additive dephasing `beta_z(t) sigma_z` (rad/time).
    Dephasing,
    /// Multiplicative drive noise `beta_Omega(t)` (dimensionless).
    Amplitude,
}

/// Uniform sampling grid `t_j = t0 + j * step`, `j = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, step: f64, len: usize) -> Result<Self, NoiseError> {
        if !(step > 0.0) || len == 0 {
            return Err(NoiseError::InvalidArgument(
                "grid: step must be positive and len nonzero".into(),
            ));
        }
        Ok(TimeGrid { t0, step, len })
    }

    /// Grid covering `[0, tau]` with `points_per_segment` samples per
    /// waveform segment, placed at substep midpoints.
    pub fn covering(tau: f64, segments: usize, points_per_segment: usize) -> TimeGrid {
        let len = segments * points_per_segment;
        let step = tau / len as f64;
        TimeGrid { t0: step / 2.0, step, len }
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + self.step * j as f64
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.len - 1)
    }

    /// Whether the grid spans `[0, tau]` densely enough to interpolate.
    pub fn covers(&self, tau: f64) -> bool {
        self.t0 <= self.step && self.last_time() >= tau - self.step
    }
}

/// One cosine term of a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// A sampled noise trajectory plus the comb that generated it.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub component: NoiseComponent,
    pub seed: u64,
    pub grid: TimeGrid,
    pub samples: Vec<f64>,
    /// Random phases, one per comb line.
    pub phases: Vec<f64>,
    pub tones: Vec<Tone>,
}

impl NoiseRealization {
    /// Linear interpolation between grid samples (clamped at the ends).
    pub fn at(&self, t: f64) -> f64 {
        let g = &self.grid;
        let x = (t - g.t0) / g.step;
        if x <= 0.0 {
            return self.samples[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= g.len {
            return self.samples[g.len - 1];
        }
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }
}

/// Synthesize one realization of `spec` on `grid`.
///
/// The comb runs over `omega_i = i * delta_omega <= cutoff`; a delta tone
/// contributes its single line exactly. Phases come from a ChaCha stream
/// seeded with `seed`, independent of the grid.
pub fn realize(
    spec: &Spectrum,
    grid: &TimeGrid,
    delta_omega: f64,
    seed: u64,
    component: NoiseComponent,
) -> Result<NoiseRealization, NoiseError> {
    if !(delta_omega > 0.0) {
        return Err(NoiseError::InvalidArgument("delta_omega: must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let tones = build_tones(spec, delta_omega, &mut rng)?;
    let phases = tones.iter().map(|t| t.phase).collect();
    let samples = sample_tones(&tones, grid);
    Ok(NoiseRealization { component, seed, grid: *grid, samples, phases, tones })
}

fn build_tones(
    spec: &Spectrum,
    delta_omega: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Tone>, NoiseError> {
    match spec {
        Spectrum::DeltaTone { omega, amplitude } => {
            let phase = rng.random::<f64>() * 2.0 * PI;
            Ok(vec![Tone { omega: *omega, amplitude: *amplitude, phase }])
        }
        Spectrum::Sum(parts) => {
            // Phases drawn per part, in order; parts stay independent.
            let mut tones = Vec::new();
            for p in parts {
                tones.extend(build_tones(p, delta_omega, rng)?);
            }
            Ok(tones)
        }
        _ => {
            let cutoff = spec.cutoff();
            let count = (cutoff / delta_omega).floor() as usize;
            if count == 0 {
                return Err(NoiseError::EmptyComb { delta_omega, cutoff });
            }
            let mut tones = Vec::with_capacity(count);
            for i in 1..=count {
                let omega = i as f64 * delta_omega;
                let amplitude = 2.0 * (spec.value(omega) * delta_omega / (2.0 * PI)).sqrt();
                let phase = rng.random::<f64>() * 2.0 * PI;
                tones.push(Tone { omega, amplitude, phase });
            }
            Ok(tones)
        }
    }
}

fn sample_tones(tones: &[Tone], grid: &TimeGrid) -> Vec<f64> {
    // Incremental rotation per tone: one complex multiply per sample instead
    // of a trig call. The rounding drift over a grid is O(len * eps),
    // orders below the Monte Carlo scales involved, and fully deterministic.
    let mut samples = vec![0.0f64; grid.len];
    for tone in tones {
        let mut z =
            num_complex::Complex64::from_polar(tone.amplitude, tone.omega * grid.t0 + tone.phase);
        let rot = num_complex::Complex64::from_polar(1.0, tone.omega * grid.step);
        for s in samples.iter_mut() {
            *s += z.re;
            z *= rot;
        }
    }
    samples
}

/// Single-frequency probe tones with phases stepped linearly over `[0, 2 pi)`:
/// `phi_j = 2 pi j / n_phases`. Averaging the ensemble response over the
/// phases isolates the filter value at `omega_sid`.
pub fn phase_sweep_tone(
    omega_sid: f64,
    amplitude: f64,
    n_phases: usize,
    grid: &TimeGrid,
    component: NoiseComponent,
) -> Result<Vec<NoiseRealization>, NoiseError> {
    if n_phases < 2 {
        return Err(NoiseError::InvalidArgument("n_phases: need at least 2".into()));
    }
    Ok((0..n_phases)
        .map(|j| {
            let phase = 2.0 * PI * j as f64 / n_phases as f64;
            let tones = vec![Tone { omega: omega_sid, amplitude, phase }];
            let samples = sample_tones(&tones, grid);
            NoiseRealization {
                component,
                seed: j as u64,
                grid: *grid,
                samples,
                phases: vec![phase],
                tones,
            }
        })
        .collect())
}

/// Generate `count` independent realizations with per-index seeds derived
/// from `base_seed`. Deterministic regardless of thread scheduling.
pub fn ensemble(
    spec: &Spectrum,
    grid: &TimeGrid,
    delta_omega: f64,
    base_seed: u64,
    count: usize,
    component: NoiseComponent,
) -> Result<Vec<NoiseRealization>, NoiseError> {
    (0..count)
        .into_par_iter()
        .map(|i| realize(spec, grid, delta_omega, derive_seed(base_seed, i as u64), component))
        .collect()
}

/// SplitMix64 step: decorrelates per-realization seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Default comb spacing `2 pi / (4 tau)`: realizations stay non-periodic over
/// the waveform duration.
pub fn default_comb_spacing(tau: f64) -> f64 {
    2.0 * PI / (4.0 * tau)
}

/// Per-bin comparison of an ensemble periodogram against a target spectrum.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    /// `(omega, target, estimate, relative error)` per evaluated bin.
    pub bins: Vec<(f64, f64, f64, f64)>,
    /// Mean |relative error| over bins with non-negligible target.
    pub mean_abs_rel_err: f64,
    /// `sum ((mean - target) / se)^2` over those bins.
    pub chi_sq: f64,
    pub dof: usize,
    /// Fewer than 20 realizations: per-bin scatter dominates.
    pub wide_confidence: bool,
}

/// Ensemble periodogram check: estimates `S` at the window's natural
/// frequencies `2 pi j / T` via `|int beta e^(-i omega t) dt|^2 / T` averaged
/// over realizations, and compares with the target density.
pub fn verify_realizations(
    realizations: &[NoiseRealization],
    spec: &Spectrum,
) -> Result<VerifyReport, NoiseError> {
    if realizations.is_empty() {
        return Err(NoiseError::InvalidArgument("realizations: empty ensemble".into()));
    }
    let grid = realizations[0].grid;
    for r in realizations {
        if r.grid != grid {
            return Err(NoiseError::InvalidArgument("realizations: grids differ".into()));
        }
    }
    let span = grid.step * grid.len as f64;
    let cutoff = spec.cutoff();
    let max_bin = ((cutoff * span / (2.0 * PI)) as usize).min(grid.len / 4);
    if max_bin < 1 {
        return Err(NoiseError::EmptyComb { delta_omega: 2.0 * PI / span, cutoff });
    }

    // Per-realization periodograms at the window frequencies.
    let per_bin: Vec<Vec<f64>> = realizations
        .par_iter()
        .map(|r| {
            (1..=max_bin)
                .map(|j| {
                    let omega = 2.0 * PI * j as f64 / span;
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (idx, &beta) in r.samples.iter().enumerate() {
                        let t = grid.time(idx);
                        re += beta * (omega * t).cos();
                        im -= beta * (omega * t).sin();
                    }
                    let scale = grid.step;
                    ((re * scale).powi(2) + (im * scale).powi(2)) / span
                })
                .collect()
        })
        .collect();

    let count = realizations.len() as f64;
    let mut bins = Vec::with_capacity(max_bin);
    let mut err_acc = 0.0;
    let mut err_n = 0usize;
    let mut chi_sq = 0.0;
    let mut dof = 0usize;
    let peak =
        (1..=max_bin).map(|j| spec.value(2.0 * PI * j as f64 / span)).fold(0.0f64, f64::max);
    for j in 1..=max_bin {
        let omega = 2.0 * PI * j as f64 / span;
        let target = spec.value(omega);
        let mean: f64 = per_bin.iter().map(|p| p[j - 1]).sum::<f64>() / count;
        let var: f64 =
            per_bin.iter().map(|p| (p[j - 1] - mean).powi(2)).sum::<f64>() / count.max(2.0);
        let se = (var / count).sqrt();
        let rel = if target > 0.0 { (mean - target) / target } else { 0.0 };
        bins.push((omega, target, mean, rel));
        if target > 0.05 * peak {
            err_acc += rel.abs();
            err_n += 1;
            if se > 0.0 {
                chi_sq += ((mean - target) / se).powi(2);
                dof += 1;
            }
        }
    }
    Ok(VerifyReport {
        bins,
        mean_abs_rel_err: if err_n > 0 { err_acc / err_n as f64 } else { 0.0 },
        chi_sq,
        dof,
        wide_confidence: realizations.len() < 20,
    })
}
