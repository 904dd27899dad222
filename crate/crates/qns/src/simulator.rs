//! Stochastic qubit evolution in the toggling frame.
//!
//! With the frame co-rotating with the ideal control, residual evolution is
//! driven by noise alone:
//!
//! `H(t) = [cos Theta(t) sigma_z + sin Theta(t) sigma_y] beta_z(t)
//!         + Omega(t) beta_Omega(t) sigma_x / 2`.
//!
//! [`propagate_exact`] multiplies per-substep SU(2) exponentials of this
//! generator (midpoint-sampled), the ground truth for everything else.
//! [`first_order_error_vector`] computes the leading perturbative error
//! vector
//!
//! `a_x = (1/2) int Omega beta_Omega`, `a_y = int sin Theta beta_z`,
//! `a_z = int cos Theta beta_z`,
//!
//! whose ensemble second moments are what spectrum estimators invert.
//! [`tomography`] turns either mode into three-axis survival probabilities,
//! optionally with binomial shot sampling and a symmetric readout-error
//! channel `p -> f p + (1 - f)(1 - p)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::noise::NoiseRealization;
use crate::waveforms::{rotation_angle, DriveProfile};

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// Noise grid does not cover the waveform duration.
    GridMismatch { tau: f64, covered: f64 },
    /// First-order truncation drove a probability outside [0, 1]: the noise
    /// is too strong for the perturbative mode.
    ProbabilityRange { axis: char, value: f64 },
    /// Invalid argument, with the offending field named.
    InvalidArgument(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::GridMismatch { tau, covered } => write!(
                f,
                "noise grid covers up to {covered:.6e} s but the waveform runs to {tau:.6e} s"
            ),
            SimError::ProbabilityRange { axis, value } => write!(
                f,
                "first-order P(up_{axis}) = {value:.6} outside [0, 1]; noise too strong for \
                 the perturbative mode"
            ),
            SimError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for SimError {}

/// An SU(2) matrix `[[a, b], [-conj(b), conj(a)]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2 {
    pub a: Complex64,
    pub b: Complex64,
}

impl Su2 {
    pub const IDENTITY: Su2 =
        Su2 { a: Complex64 { re: 1.0, im: 0.0 }, b: Complex64 { re: 0.0, im: 0.0 } };

    /// `exp(-i (h . sigma) dt)` for a real coefficient vector `h`.
    pub fn from_generator(h: [f64; 3], dt: f64) -> Su2 {
        let norm = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        let angle = norm * dt;
        if norm == 0.0 {
            return Su2::IDENTITY;
        }
        let (s, c) = (angle.sin(), angle.cos());
        let (nx, ny, nz) = (h[0] / norm, h[1] / norm, h[2] / norm);
        Su2 {
            a: Complex64::new(c, -s * nz),
            b: Complex64::new(-s * ny, -s * nx),
        }
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul(self, rhs: Su2) -> Su2 {
        Su2 {
            a: self.a * rhs.a - self.b * rhs.b.conj(),
            b: self.a * rhs.b + self.b * rhs.a.conj(),
        }
    }

    /// |det| deviation from 1; zero for exact unitaries.
    pub fn unitarity_defect(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() - 1.0).abs()
    }

    /// Survival probabilities along x, y, z for eigenstate preparation.
    pub fn survival_probabilities(&self) -> [f64; 3] {
        let px = self.a.re * self.a.re + self.b.im * self.b.im;
        let py = self.a.re * self.a.re + self.b.re * self.b.re;
        let pz = self.a.norm_sqr();
        [px, py, pz]
    }

    /// Pauli coefficients of `-i log U`, i.e. the exact error vector `a` with
    /// `U = exp(-i a . sigma)`, `|a| <= pi`.
    pub fn error_vector(&self) -> [f64; 3] {
        let c = self.a.re;
        let sx = -self.b.im;
        let sy = -self.b.re;
        let sz = -self.a.im;
        let s_norm = (sx * sx + sy * sy + sz * sz).sqrt();
        if s_norm == 0.0 {
            return [0.0, 0.0, 0.0];
        }
        let angle = s_norm.atan2(c);
        let scale = angle / s_norm;
        [sx * scale, sy * scale, sz * scale]
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Substeps per drive segment; segments with large rotation swings are
    /// refined further so no substep turns more than pi/8.
    pub substeps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { substeps: 8 }
    }
}

/// Paired noise inputs for one realization; either component may be absent.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoisePair<'a> {
    pub dephasing: Option<&'a NoiseRealization>,
    pub amplitude: Option<&'a NoiseRealization>,
}

impl<'a> NoisePair<'a> {
    pub fn dephasing_only(r: &'a NoiseRealization) -> Self {
        NoisePair { dephasing: Some(r), amplitude: None }
    }

    pub fn amplitude_only(r: &'a NoiseRealization) -> Self {
        NoisePair { dephasing: None, amplitude: Some(r) }
    }

    pub fn both(z: &'a NoiseRealization, omega: &'a NoiseRealization) -> Self {
        NoisePair { dephasing: Some(z), amplitude: Some(omega) }
    }

    fn check_coverage(&self, tau: f64) -> Result<(), SimError> {
        for r in [self.dephasing, self.amplitude].into_iter().flatten() {
            if !r.grid.covers(tau) {
                return Err(SimError::GridMismatch { tau, covered: r.grid.last_time() });
            }
        }
        Ok(())
    }
}

/// Midpoint sampling times for each substep of each segment.
fn substep_plan(profile: &DriveProfile, opts: &SimOptions) -> Vec<(f64, f64, usize)> {
    // (t_start, duration, substeps) per segment; substeps refined so a
    // single substep never turns the frame by more than pi/8.
    (0..profile.segment_count())
        .map(|i| {
            let d = profile.times[i + 1] - profile.times[i];
            let swing = (profile.values[i] * d).abs();
            let extra = (swing / (PI / 8.0)).ceil() as usize;
            (profile.times[i], d, opts.substeps.max(extra).max(1))
        })
        .collect()
}

/// Exact toggling-frame propagator: the time-ordered product of per-substep
/// exponentials with noise and `Theta` sampled at substep midpoints.
pub fn propagate_exact(
    profile: &DriveProfile,
    noise: &NoisePair,
    opts: &SimOptions,
) -> Result<Su2, SimError> {
    noise.check_coverage(profile.duration())?;
    let theta = rotation_angle(profile);
    let mut u = Su2::IDENTITY;
    for (seg, &(t0, d, m)) in substep_plan(profile, opts).iter().enumerate() {
        let amp = profile.values[seg];
        let h = d / m as f64;
        for j in 0..m {
            let t_mid = t0 + (j as f64 + 0.5) * h;
            let th = theta.theta[seg] + amp * (t_mid - t0);
            let bz = noise.dephasing.map_or(0.0, |r| r.at(t_mid));
            let bo = noise.amplitude.map_or(0.0, |r| r.at(t_mid));
            let gen = [0.5 * amp * bo, th.sin() * bz, th.cos() * bz];
            u = Su2::from_generator(gen, h).mul(u);
        }
    }
    Ok(u)
}

/// First-order error vector by midpoint quadrature on the simulation grid.
pub fn first_order_error_vector(
    profile: &DriveProfile,
    noise: &NoisePair,
    opts: &SimOptions,
) -> Result<[f64; 3], SimError> {
    noise.check_coverage(profile.duration())?;
    let theta = rotation_angle(profile);
    let mut a = [0.0f64; 3];
    for (seg, &(t0, d, m)) in substep_plan(profile, opts).iter().enumerate() {
        let amp = profile.values[seg];
        let h = d / m as f64;
        for j in 0..m {
            let t_mid = t0 + (j as f64 + 0.5) * h;
            let th = theta.theta[seg] + amp * (t_mid - t0);
            let bz = noise.dephasing.map_or(0.0, |r| r.at(t_mid));
            let bo = noise.amplitude.map_or(0.0, |r| r.at(t_mid));
            a[0] += 0.5 * amp * bo * h;
            a[1] += th.sin() * bz * h;
            a[2] += th.cos() * bz * h;
        }
    }
    Ok(a)
}

/// Ensemble second moments of the error vector with standard errors.
#[derive(Debug, Clone, Copy)]
pub struct ErrorVectorMoments {
    /// `<a_x^2>, <a_y^2>, <a_z^2>`.
    pub mean_sq: [f64; 3],
    pub stderr: [f64; 3],
    pub count: usize,
}

/// First-order error-vector moments over an ensemble of noise pairs.
pub fn ensemble_moments(
    profile: &DriveProfile,
    pairs: &[NoisePair],
    opts: &SimOptions,
) -> Result<ErrorVectorMoments, SimError> {
    if pairs.is_empty() {
        return Err(SimError::InvalidArgument("pairs: empty ensemble".into()));
    }
    let squares: Vec<[f64; 3]> = pairs
        .par_iter()
        .map(|pair| {
            first_order_error_vector(profile, pair, opts)
                .map(|a| [a[0] * a[0], a[1] * a[1], a[2] * a[2]])
        })
        .collect::<Result<_, _>>()?;
    Ok(moments_from_samples(&squares))
}

/// Mean and standard error per component, Kahan-compensated and evaluated in
/// index order so results do not depend on thread scheduling.
fn moments_from_samples(samples: &[[f64; 3]]) -> ErrorVectorMoments {
    let n = samples.len() as f64;
    let mut mean = [0.0f64; 3];
    for axis in 0..3 {
        let mut acc = 0.0;
        let mut comp = 0.0;
        for s in samples {
            let term = s[axis] - comp;
            let next = acc + term;
            comp = (next - acc) - term;
            acc = next;
        }
        mean[axis] = acc / n;
    }
    let mut stderr = [0.0f64; 3];
    if samples.len() > 1 {
        for axis in 0..3 {
            let var: f64 =
                samples.iter().map(|s| (s[axis] - mean[axis]).powi(2)).sum::<f64>() / (n - 1.0);
            stderr[axis] = (var / n).sqrt();
        }
    }
    ErrorVectorMoments { mean_sq: mean, stderr, count: samples.len() }
}

/// Which evolution backend produces the probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Leading-order perturbative moments (the estimator under test).
    FirstOrder,
    /// Exact propagator per realization (ground truth).
    Exact,
}

/// Shot sampling and readout configuration.
#[derive(Debug, Clone, Copy)]
pub struct ShotConfig {
    /// `None` means infinite shots (exact probabilities pass through).
    pub shots: Option<u64>,
    /// Symmetric readout-error channel `p -> f p + (1-f)(1-p)`.
    pub readout_fidelity: f64,
    pub seed: u64,
}

impl Default for ShotConfig {
    fn default() -> Self {
        ShotConfig { shots: None, readout_fidelity: 1.0, seed: 0 }
    }
}

/// Readout fidelity reported for the ion testbed.
pub const DEFAULT_READOUT_FIDELITY: f64 = 0.997;

/// Three-axis tomography outcome.
#[derive(Debug, Clone)]
pub struct TomographyRecord {
    /// `P(up_x), P(up_y), P(up_z)` after the readout channel.
    pub p: [f64; 3],
    /// Standard error of each probability (ensemble scatter plus binomial
    /// sampling when shots are finite).
    pub stderr: [f64; 3],
    /// Standard errors of the signal projections `S_x, S_y, S_z`, taken from
    /// the per-realization scatter of the three-axis combinations. The axes
    /// share each realization's noise, so correlated contributions (notably
    /// `a_z^2` in `S_y`) cancel realization by realization; combining
    /// per-axis errors as if independent would overstate these hugely.
    pub projection_stderr: [f64; 3],
    pub mode: Mode,
    pub realizations: usize,
    pub shots: Option<u64>,
    /// Up-counts per axis when shot sampling is on.
    pub counts: Option<[u64; 3]>,
    pub readout_fidelity: f64,
}

/// Simulate state preparation, evolution and measurement along all three axes.
pub fn tomography(
    profile: &DriveProfile,
    pairs: &[NoisePair],
    mode: Mode,
    shot: &ShotConfig,
    opts: &SimOptions,
) -> Result<TomographyRecord, SimError> {
    if pairs.is_empty() {
        return Err(SimError::InvalidArgument("pairs: empty ensemble".into()));
    }
    let per_real: Vec<[f64; 3]> = match mode {
        Mode::Exact => pairs
            .par_iter()
            .map(|pair| propagate_exact(profile, pair, opts).map(|u| u.survival_probabilities()))
            .collect::<Result<_, _>>()?,
        Mode::FirstOrder => {
            let per: Vec<[f64; 3]> = pairs
                .par_iter()
                .map(|pair| {
                    first_order_error_vector(profile, pair, opts).map(|a| {
                        let sq = [a[0] * a[0], a[1] * a[1], a[2] * a[2]];
                        [1.0 - sq[1] - sq[2], 1.0 - sq[0] - sq[2], 1.0 - sq[0] - sq[1]]
                    })
                })
                .collect::<Result<_, _>>()?;
            per
        }
    };
    let stats = moments_from_samples(&per_real);
    let mut p = stats.mean_sq;
    let mut stderr = stats.stderr;
    if mode == Mode::FirstOrder {
        for (axis, &value) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::ProbabilityRange { axis: ['x', 'y', 'z'][axis], value });
            }
        }
    }

    // Projection scatter from the per-realization three-axis combinations.
    let per_proj: Vec<[f64; 3]> = per_real
        .iter()
        .map(|pr| {
            let [px, py, pz] = *pr;
            [
                (1.0 + px - py - pz) / 2.0,
                (1.0 + py - px - pz) / 2.0,
                (1.0 + pz - px - py) / 2.0,
            ]
        })
        .collect();
    let mut projection_stderr = moments_from_samples(&per_proj).stderr;

    // Readout channel, then binomial sampling of the corrupted probability.
    let f = shot.readout_fidelity;
    for v in p.iter_mut() {
        *v = f * *v + (1.0 - f) * (1.0 - *v);
    }
    for e in stderr.iter_mut().chain(projection_stderr.iter_mut()) {
        *e *= (2.0 * f - 1.0).abs();
    }
    let mut counts = None;
    if let Some(shots) = shot.shots {
        if shots == 0 {
            return Err(SimError::InvalidArgument("shots: must be positive".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(shot.seed);
        let mut c = [0u64; 3];
        let mut binom_var = [0.0f64; 3];
        for axis in 0..3 {
            let mut ups = 0u64;
            for _ in 0..shots {
                if rng.random::<f64>() < p[axis] {
                    ups += 1;
                }
            }
            c[axis] = ups;
            let sampled = ups as f64 / shots as f64;
            binom_var[axis] = sampled * (1.0 - sampled) / shots as f64;
            stderr[axis] = (stderr[axis] * stderr[axis] + binom_var[axis]).sqrt();
            p[axis] = sampled;
        }
        // Shot draws are independent across axes, so they do add in
        // quadrature for the projections.
        let shot_proj = 0.5 * (binom_var.iter().sum::<f64>()).sqrt();
        for e in projection_stderr.iter_mut() {
            *e = (*e * *e + shot_proj * shot_proj).sqrt();
        }
        counts = Some(c);
    }

    Ok(TomographyRecord {
        p,
        stderr,
        projection_stderr,
        mode,
        realizations: pairs.len(),
        shots: shot.shots,
        counts,
        readout_fidelity: f,
    })
}

/// Signal projections isolating the error-vector second moments.
#[derive(Debug, Clone, Copy)]
pub struct Projections {
    /// `S_x, S_y, S_z`: estimates of `<a_x^2>, <a_y^2>, <a_z^2>`.
    pub s: [f64; 3],
    pub stderr: [f64; 3],
}

/// `S_y = (1 + P_y - P_x - P_z)/2` and cyclic: linear combinations of the
/// survival probabilities. Shot noise can push values slightly negative;
/// they pass through unclamped with their uncertainty, which comes from the
/// per-realization scatter of the combination itself.
pub fn signal_projections(rec: &TomographyRecord) -> Projections {
    let [px, py, pz] = rec.p;
    let s = [
        (1.0 + px - py - pz) / 2.0,
        (1.0 + py - px - pz) / 2.0,
        (1.0 + pz - px - py) / 2.0,
    ];
    Projections { s, stderr: rec.projection_stderr }
}

/// Exact-vs-first-order comparison of the `S_y` signal on a shared ensemble.
#[derive(Debug, Clone)]
pub struct HigherOrderDiagnostic {
    /// Mean `S_y` from exact per-realization probabilities.
    pub exact_sy: f64,
    /// Mean first-order `a_y^2`.
    pub first_order_sy: f64,
    /// `(exact - first order) / first order`; zero for a zero signal.
    pub bias_fraction: f64,
    /// Per-realization `(exact S_y, first-order a_y^2)` for paired tests.
    pub per_realization: Vec<(f64, f64)>,
}

/// Quantifies the higher-order contamination of the `S_y` projection: the
/// gap between exact-propagator tomography and the first-order moment on the
/// same noise. Embedded-decoupling waveforms shrink it at matched noise.
pub fn higher_order_diagnostic(
    profile: &DriveProfile,
    pairs: &[NoisePair],
    opts: &SimOptions,
) -> Result<HigherOrderDiagnostic, SimError> {
    if pairs.is_empty() {
        return Err(SimError::InvalidArgument("pairs: empty ensemble".into()));
    }
    let per_realization: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|pair| {
            let u = propagate_exact(profile, pair, opts)?;
            let [px, py, pz] = u.survival_probabilities();
            let exact_sy = (1.0 + py - px - pz) / 2.0;
            let a = first_order_error_vector(profile, pair, opts)?;
            Ok((exact_sy, a[1] * a[1]))
        })
        .collect::<Result<_, SimError>>()?;
    let n = per_realization.len() as f64;
    let exact_sy = per_realization.iter().map(|p| p.0).sum::<f64>() / n;
    let first_order_sy = per_realization.iter().map(|p| p.1).sum::<f64>() / n;
    let bias_fraction =
        if first_order_sy > 0.0 { (exact_sy - first_order_sy) / first_order_sy } else { 0.0 };
    Ok(HigherOrderDiagnostic { exact_sy, first_order_sy, bias_fraction, per_realization })
}
