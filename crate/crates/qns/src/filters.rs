//! Filter functions: the sensor's frequency response to each noise quadrature.
//!
//! Three fundamental transforms of a drive profile determine everything:
//!
//! * `F_xx(omega) = int Omega(s) e^(i omega s) ds` — amplitude quadrature;
//! * `F_zy(omega) = int sin Theta(s) e^(i omega s) ds` — dephasing via sigma_y;
//! * `F_zz(omega) = int cos Theta(s) e^(i omega s) ds` — dephasing via sigma_z.
//!
//! The measurable overlap filters are `F_Omega = |F_xx|^2 / 4` and
//! `F_z = |F_zy|^2`; pulsed dephasing spectroscopy uses `|F_zz|^2`. All three
//! integrate exactly per segment: with `Theta` linear on a segment, the
//! integrands `exp(i(omega t +/- Theta))` advance at the constant rates
//! `omega +/- Omega`, so every segment contributes an elementary integral
//! with explicit limit branches at the removable singularities.
//!
//! Closed forms for finite-difference Slepian drives are provided alongside:
//! within the small-angle linearization the dephasing filter is
//! `8 Omega_s^2 sin^4(omega dt / 2) / omega^4 [U^2(omega - omega_s) +
//! U^2(omega + omega_s)]` and the amplitude filter differs from it by a
//! factor of `omega^2 / 4`. `Omega_s` is the energy-equivalent scale recorded
//! in the waveform metadata.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dpss::{dpswf_at, DpssError, DpssSet};
use crate::waveforms::{rotation_angle, DriveProfile, PulseSequence, WaveformError};

#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    /// Empty or invalid frequency grid.
    GridEmpty,
    /// Band integral over fewer than 8 grid steps.
    DegenerateBand { band: (f64, f64), steps: usize },
    /// Band extends beyond the grid coverage.
    BandOutsideGrid { band: (f64, f64), grid: (f64, f64) },
    /// CPMG pulses overlap at the requested spacing.
    PulseOverlap { spacing: f64, tau_pi: f64 },
    /// Operation needs a real-valued filter.
    NotRealValued,
    /// Multitaper inputs disagree (grid or band).
    Mismatched(String),
    Dpss(DpssError),
    Waveform(String),
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::GridEmpty => write!(f, "frequency grid is empty"),
            FilterError::DegenerateBand { band, steps } => write!(
                f,
                "band ({:.6e}, {:.6e}) covers only {steps} grid steps; at least 8 required",
                band.0, band.1
            ),
            FilterError::BandOutsideGrid { band, grid } => write!(
                f,
                "band ({:.6e}, {:.6e}) outside grid coverage ({:.6e}, {:.6e})",
                band.0, band.1, grid.0, grid.1
            ),
            FilterError::PulseOverlap { spacing, tau_pi } => write!(
                f,
                "interpulse spacing {spacing:.6e} does not exceed the pulse width {tau_pi:.6e}"
            ),
            FilterError::NotRealValued => write!(f, "operation requires a real-valued filter"),
            FilterError::Mismatched(msg) => write!(f, "mismatched filters: {msg}"),
            FilterError::Dpss(e) => write!(f, "{e}"),
            FilterError::Waveform(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for FilterError {}

impl From<DpssError> for FilterError {
    fn from(e: DpssError) -> Self {
        FilterError::Dpss(e)
    }
}

impl From<WaveformError> for FilterError {
    fn from(e: WaveformError) -> Self {
        FilterError::Waveform(e.to_string())
    }
}

/// Which response a filter describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfKind {
    Fxx,
    Fzy,
    Fzz,
    /// Amplitude filter `|F_xx|^2 / 4`.
    FOmega,
    /// Dephasing filter `|F_zy|^2`.
    Fz,
    /// Pulsed dephasing filter `|F_zz|^2`.
    FzzSq,
    /// Weighted sum over Slepian orders.
    Multitaper,
}

#[derive(Debug, Clone)]
enum FfValues {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

/// A filter function on an ascending frequency grid (rad/time).
#[derive(Debug, Clone)]
pub struct FilterFunction {
    pub kind: FfKind,
    pub omega: Vec<f64>,
    values: FfValues,
    /// Concentration band `B_s` when the construction defines one.
    pub passband: Option<(f64, f64)>,
    /// Source description (waveform recipe or closed form).
    pub label: String,
    pub warnings: Vec<String>,
}

impl FilterFunction {
    pub fn real(
        kind: FfKind,
        omega: Vec<f64>,
        values: Vec<f64>,
        label: impl Into<String>,
    ) -> Self {
        FilterFunction {
            kind,
            omega,
            values: FfValues::Real(values),
            passband: None,
            label: label.into(),
            warnings: Vec::new(),
        }
    }

    pub fn complex(
        kind: FfKind,
        omega: Vec<f64>,
        values: Vec<Complex64>,
        label: impl Into<String>,
    ) -> Self {
        FilterFunction {
            kind,
            omega,
            values: FfValues::Complex(values),
            passband: None,
            label: label.into(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn real_values(&self) -> Option<&[f64]> {
        match &self.values {
            FfValues::Real(v) => Some(v),
            FfValues::Complex(_) => None,
        }
    }

    pub fn complex_values(&self) -> Option<&[Complex64]> {
        match &self.values {
            FfValues::Complex(v) => Some(v),
            FfValues::Real(_) => None,
        }
    }

    /// `scale * |F|^2` as a real filter of the given kind.
    pub fn magnitude_squared(&self, kind: FfKind, scale: f64) -> FilterFunction {
        let values = match &self.values {
            FfValues::Complex(v) => v.iter().map(|z| scale * z.norm_sqr()).collect(),
            FfValues::Real(v) => v.iter().map(|x| scale * x * x).collect(),
        };
        FilterFunction {
            kind,
            omega: self.omega.clone(),
            values: FfValues::Real(values),
            passband: self.passband,
            label: self.label.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Linear interpolation of a real-valued filter at `omega`.
    pub fn value_at(&self, omega: f64) -> Result<f64, FilterError> {
        let v = self.real_values().ok_or(FilterError::NotRealValued)?;
        let grid = &self.omega;
        if omega < grid[0] || omega > *grid.last().unwrap() {
            return Err(FilterError::BandOutsideGrid {
                band: (omega, omega),
                grid: (grid[0], *grid.last().unwrap()),
            });
        }
        let idx = match grid.binary_search_by(|p| p.partial_cmp(&omega).unwrap()) {
            Ok(i) => return Ok(v[i]),
            Err(i) => i - 1,
        };
        let t = (omega - grid[idx]) / (grid[idx + 1] - grid[idx]);
        Ok(v[idx] * (1.0 - t) + v[idx + 1] * t)
    }

    /// Grid frequency with the largest real value inside `band` (whole grid
    /// when `band` is `None`).
    pub fn argmax(&self, band: Option<(f64, f64)>) -> Result<f64, FilterError> {
        let v = self.real_values().ok_or(FilterError::NotRealValued)?;
        let mut best = None::<(f64, f64)>;
        for (i, &omega) in self.omega.iter().enumerate() {
            if let Some((lo, hi)) = band {
                if omega < lo || omega > hi {
                    continue;
                }
            }
            if best.map_or(true, |(_, val)| v[i] > val) {
                best = Some((omega, v[i]));
            }
        }
        best.map(|(omega, _)| omega).ok_or(FilterError::GridEmpty)
    }
}

/// Uniform grid of `len` points over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, len: usize) -> Vec<f64> {
    assert!(len >= 2 && hi > lo);
    (0..len).map(|i| lo + (hi - lo) * i as f64 / (len - 1) as f64).collect()
}

/// Default grid: 4096 points from 0 to the waveform Nyquist `pi / dt`.
pub fn default_grid(dt: f64) -> Vec<f64> {
    uniform_grid(0.0, PI / dt, 4096)
}

/// Concentration band `B_s = (max(0, omega_s - db), omega_s + db)` with
/// `db = 2 pi W / dt`.
pub fn passband(omega_s: f64, w: f64, dt: f64) -> (f64, f64) {
    let db = 2.0 * PI * w / dt;
    ((omega_s - db).max(0.0), omega_s + db)
}

/// The three fundamental transforms of one drive profile.
#[derive(Debug, Clone)]
pub struct Fundamentals {
    pub fxx: FilterFunction,
    pub fzy: FilterFunction,
    pub fzz: FilterFunction,
}

impl Fundamentals {
    /// Amplitude filter `F_Omega = |F_xx|^2 / 4`.
    pub fn amplitude_ff(&self) -> FilterFunction {
        self.fxx.magnitude_squared(FfKind::FOmega, 0.25)
    }

    /// Dephasing filter `F_z = |F_zy|^2`.
    pub fn dephasing_ff(&self) -> FilterFunction {
        self.fzy.magnitude_squared(FfKind::Fz, 1.0)
    }

    /// Pulsed dephasing filter `|F_zz|^2`.
    pub fn fzz_power(&self) -> FilterFunction {
        self.fzz.magnitude_squared(FfKind::FzzSq, 1.0)
    }
}

/// Evaluate the three fundamental filter functions of `profile` on `grid`.
pub fn fundamental_ffs(profile: &DriveProfile, grid: &[f64]) -> Result<Fundamentals, FilterError> {
    if grid.is_empty() {
        return Err(FilterError::GridEmpty);
    }
    let theta = rotation_angle(profile);
    let nseg = profile.segment_count();

    let results: Vec<(Complex64, Complex64, Complex64)> = grid
        .par_iter()
        .map(|&omega| {
            let mut fxx = Complex64::new(0.0, 0.0);
            let mut fzy = Complex64::new(0.0, 0.0);
            let mut fzz = Complex64::new(0.0, 0.0);
            for i in 0..nseg {
                let t0 = profile.times[i];
                let d = profile.times[i + 1] - t0;
                let amp = profile.values[i];
                let theta0 = theta.theta[i];

                fxx += amp * Complex64::from_polar(1.0, omega * t0) * expm1_over_i_omega(omega, d);

                // With z = exp(i(omega t + Theta)) and w = exp(i(omega t -
                // Theta)) advancing at constant rates omega +/- amp:
                // cos Theta e^(i omega t) = (z + w)/2, sin = (z - w)/(2i).
                let z0 = Complex64::from_polar(1.0, omega * t0 + theta0);
                let w0 = Complex64::from_polar(1.0, omega * t0 - theta0);
                let iz = z0 * expm1_over_i_omega(omega + amp, d);
                let iw = w0 * expm1_over_i_omega(omega - amp, d);
                fzz += 0.5 * (iz + iw);
                fzy += Complex64::new(0.0, -0.5) * (iz - iw);
            }
            (fxx, fzy, fzz)
        })
        .collect();

    let fxx: Vec<Complex64> = results.iter().map(|r| r.0).collect();
    let fzy: Vec<Complex64> = results.iter().map(|r| r.1).collect();
    let fzz: Vec<Complex64> = results.iter().map(|r| r.2).collect();
    Ok(Fundamentals {
        fxx: FilterFunction::complex(FfKind::Fxx, grid.to_vec(), fxx, "numeric"),
        fzy: FilterFunction::complex(FfKind::Fzy, grid.to_vec(), fzy, "numeric"),
        fzz: FilterFunction::complex(FfKind::Fzz, grid.to_vec(), fzz, "numeric"),
    })
}

/// `(exp(i omega d) - 1) / (i omega)` with the `omega -> 0` limit `d`.
fn expm1_over_i_omega(omega: f64, d: f64) -> Complex64 {
    let x = omega * d;
    if x.abs() < 1.0e-6 {
        // d * (1 + i x/2 - x^2/6 - i x^3/24)
        Complex64::new(d * (1.0 - x * x / 6.0), d * (x / 2.0 - x * x * x / 24.0))
    } else {
        (Complex64::from_polar(1.0, x) - 1.0) / Complex64::new(0.0, omega)
    }
}

/// `sin^4(omega dt / 2) / omega^4`, limit `dt^4 / 16` at `omega -> 0`.
fn sin4_over_omega4(omega: f64, dt: f64) -> f64 {
    let x = omega * dt / 2.0;
    if x.abs() < 1.0e-4 {
        let s = dt / 2.0 * (1.0 - x * x / 6.0);
        s * s * s * s
    } else {
        let s = x.sin() / omega;
        s * s * s * s
    }
}

/// `sin^2(omega dt / 2) / omega^2`, limit `dt^2 / 4` at `omega -> 0`.
fn sin2_over_omega2(omega: f64, dt: f64) -> f64 {
    let x = omega * dt / 2.0;
    if x.abs() < 1.0e-6 {
        let s = dt / 2.0 * (1.0 - x * x / 6.0);
        s * s
    } else {
        let s = x.sin() / omega;
        s * s
    }
}

fn shifted_dpswf_sq(
    set: &DpssSet,
    k: usize,
    dt: f64,
    omega: f64,
    omega_s: f64,
) -> Result<f64, DpssError> {
    let um = dpswf_at(set, k, dt, omega - omega_s)?;
    let up = dpswf_at(set, k, dt, omega + omega_s)?;
    Ok(um * um + up * up)
}

/// Closed-form dephasing filter of a finite-difference Slepian drive:
/// `8 Omega_s^2 sin^4(omega dt/2) / omega^4 [U^2(- shift) + U^2(+ shift)]`.
pub fn fd_dephasing_ff(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    omega_scale: f64,
    dt: f64,
    grid: &[f64],
) -> Result<FilterFunction, FilterError> {
    if grid.is_empty() {
        return Err(FilterError::GridEmpty);
    }
    let mut values = Vec::with_capacity(grid.len());
    for &omega in grid {
        let u2 = shifted_dpswf_sq(set, k, dt, omega, omega_s)?;
        values.push(8.0 * omega_scale * omega_scale * sin4_over_omega4(omega, dt) * u2);
    }
    let mut ff = FilterFunction::real(FfKind::Fz, grid.to_vec(), values, "fd closed form");
    ff.passband = Some(passband(omega_s, set.params().w, dt));
    Ok(ff)
}

/// Closed-form amplitude filter of a finite-difference Slepian drive; differs
/// from the dephasing filter by a factor of `omega^2 / 4`.
pub fn fd_amplitude_ff(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    omega_scale: f64,
    dt: f64,
    grid: &[f64],
) -> Result<FilterFunction, FilterError> {
    if grid.is_empty() {
        return Err(FilterError::GridEmpty);
    }
    let mut values = Vec::with_capacity(grid.len());
    for &omega in grid {
        let u2 = shifted_dpswf_sq(set, k, dt, omega, omega_s)?;
        values.push(
            2.0 * omega_scale * omega_scale * sin4_over_omega4(omega, dt) * omega * omega * u2,
        );
    }
    let mut ff = FilterFunction::real(FfKind::FOmega, grid.to_vec(), values, "fd closed form");
    ff.passband = Some(passband(omega_s, set.params().w, dt));
    Ok(ff)
}

/// Closed-form amplitude filter of a cosine-shifted Slepian drive:
/// `Omega_s^2 sin^2(omega dt/2) / (2 omega^2) [U^2(- shift) + U^2(+ shift)]`.
/// At `omega_s = 0` this reduces to `Omega_s^2 sin^2(omega dt/2)/omega^2 U^2`.
pub fn cos_shifted_amplitude_ff(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    omega_scale: f64,
    dt: f64,
    grid: &[f64],
) -> Result<FilterFunction, FilterError> {
    if grid.is_empty() {
        return Err(FilterError::GridEmpty);
    }
    let mut values = Vec::with_capacity(grid.len());
    for &omega in grid {
        let u2 = shifted_dpswf_sq(set, k, dt, omega, omega_s)?;
        values.push(0.5 * omega_scale * omega_scale * sin2_over_omega2(omega, dt) * u2);
    }
    let mut ff =
        FilterFunction::real(FfKind::FOmega, grid.to_vec(), values, "cos-shifted closed form");
    ff.passband = Some(passband(omega_s, set.params().w, dt));
    let band_edge = 2.0 * PI * set.params().w / dt;
    if omega_s > 0.0 && omega_s <= band_edge {
        ff.warnings.push(format!(
            "omega_s = {omega_s:.6e} inside the base band; the closed form omits a cross term"
        ));
    }
    Ok(ff)
}

/// Fourier model of the finite-width CPMG switching function `Y(t)`:
/// coefficients `a_nu = (n/tau) int_0^(2 tau/n) Y(s) cos(pi n nu s / tau) ds`
/// and peak centers `omega_nu = pi n nu / tau`.
#[derive(Debug, Clone)]
pub struct CpmgFourierModel {
    pub n: usize,
    pub tau: f64,
    pub tau_pi: f64,
    /// `a_nu` for `nu = 1..=nu_max` (index 0 is `a_1`).
    pub coefficients: Vec<f64>,
}

impl CpmgFourierModel {
    /// Peak center `omega_nu = pi n nu / tau`.
    pub fn peak_frequency(&self, nu: usize) -> f64 {
        PI * self.n as f64 * nu as f64 / self.tau
    }
}

/// Fit the periodic switching function of an `n`-pulse CPMG train with square
/// pulses of width `tau_pi`.
pub fn cpmg_ff_model(
    n: usize,
    tau: f64,
    tau_pi: f64,
    nu_max: usize,
) -> Result<CpmgFourierModel, FilterError> {
    let spacing = tau / n as f64;
    if spacing <= tau_pi {
        return Err(FilterError::PulseOverlap { spacing, tau_pi });
    }
    // One period [0, 2 tau / n) holds two pulses, centered at spacing/2 and
    // 3 spacing/2; Y ramps through a cosine during each pulse.
    let period = 2.0 * spacing;
    let p1 = (spacing / 2.0 - tau_pi / 2.0, spacing / 2.0 + tau_pi / 2.0);
    let p2 = (1.5 * spacing - tau_pi / 2.0, 1.5 * spacing + tau_pi / 2.0);
    let omega_pi = if tau_pi > 0.0 { PI / tau_pi } else { 0.0 };
    let y = |t: f64| -> f64 {
        if t < p1.0 {
            1.0
        } else if t < p1.1 {
            (omega_pi * (t - p1.0)).cos()
        } else if t < p2.0 {
            -1.0
        } else if t < p2.1 {
            -(omega_pi * (t - p2.0)).cos()
        } else {
            1.0
        }
    };
    // Piecewise Simpson: each smooth interval integrated separately.
    let edges = [0.0, p1.0, p1.1, p2.0, p2.1, period];
    let mut coefficients = Vec::with_capacity(nu_max);
    for nu in 1..=nu_max {
        let osc = PI * n as f64 * nu as f64 / tau;
        let mut acc = 0.0;
        for win in edges.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            let cycles = (hi - lo) * osc / (2.0 * PI) + 1.0;
            let m = ((cycles * 32.0).ceil() as usize).clamp(32, 8192) & !1usize;
            let h = (hi - lo) / m as f64;
            let mut s = 0.0;
            for j in 0..=m {
                let t = lo + h * j as f64;
                let weight = if j == 0 || j == m {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += weight * y(t) * (osc * t).cos();
            }
            acc += s * h / 3.0;
        }
        coefficients.push(acc * n as f64 / tau);
    }
    Ok(CpmgFourierModel { n, tau, tau_pi, coefficients })
}

/// Weighted sum of per-order filters on a shared grid.
pub fn multitaper_ff(
    ffs: &[FilterFunction],
    weights: &[f64],
) -> Result<FilterFunction, FilterError> {
    if ffs.is_empty() || ffs.len() != weights.len() {
        return Err(FilterError::Mismatched(format!(
            "{} filters vs {} weights",
            ffs.len(),
            weights.len()
        )));
    }
    let grid = &ffs[0].omega;
    for ff in ffs.iter().skip(1) {
        if ff.omega != *grid {
            return Err(FilterError::Mismatched("filters use different grids".into()));
        }
        if ff.passband != ffs[0].passband {
            return Err(FilterError::Mismatched("filters target different bands".into()));
        }
    }
    let mut values = vec![0.0f64; grid.len()];
    for (ff, &c) in ffs.iter().zip(weights) {
        let v = ff.real_values().ok_or(FilterError::NotRealValued)?;
        for (acc, &x) in values.iter_mut().zip(v) {
            *acc += c * x;
        }
    }
    let mut out = FilterFunction::real(FfKind::Multitaper, grid.clone(), values, "multitaper");
    out.passband = ffs[0].passband;
    Ok(out)
}

/// `(1/pi) int_band F domega` by trapezoid, with partial end cells
/// interpolated. Bands narrower than 8 grid steps are refused.
pub fn band_integral(ff: &FilterFunction, band: (f64, f64)) -> Result<f64, FilterError> {
    let v = ff.real_values().ok_or(FilterError::NotRealValued)?;
    let grid = &ff.omega;
    if grid.len() < 2 {
        return Err(FilterError::GridEmpty);
    }
    let (lo, hi) = band;
    let coverage = (grid[0], *grid.last().unwrap());
    if lo < coverage.0 - 1e-12 * coverage.1.abs().max(1.0)
        || hi > coverage.1 * (1.0 + 1e-12)
        || lo >= hi
    {
        return Err(FilterError::BandOutsideGrid { band, grid: coverage });
    }
    let step = (coverage.1 - coverage.0) / (grid.len() - 1) as f64;
    let steps = ((hi - lo) / step).floor() as usize;
    if steps < 8 {
        return Err(FilterError::DegenerateBand { band, steps });
    }
    let f_lo = ff.value_at(lo)?;
    let f_hi = ff.value_at(hi.min(coverage.1))?;
    let mut acc = 0.0;
    let mut prev = (lo, f_lo);
    for (i, &omega) in grid.iter().enumerate() {
        if omega <= lo || omega >= hi {
            continue;
        }
        acc += 0.5 * (v[i] + prev.1) * (omega - prev.0);
        prev = (omega, v[i]);
    }
    acc += 0.5 * (f_hi + prev.1) * (hi - prev.0);
    Ok(acc / PI)
}

/// Exact transform of the ideal switching function that starts at `+1` and
/// flips sign at each time in `flips`: the pulsed-control `F_zz` in the
/// instantaneous-pulse limit.
pub fn ideal_switching_fzz(
    flips: &[f64],
    tau: f64,
    grid: &[f64],
) -> Result<FilterFunction, FilterError> {
    if grid.is_empty() {
        return Err(FilterError::GridEmpty);
    }
    let mut edges = Vec::with_capacity(flips.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(flips);
    edges.push(tau);
    let values: Vec<Complex64> = grid
        .par_iter()
        .map(|&omega| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut sign = 1.0;
            for win in edges.windows(2) {
                let d = win[1] - win[0];
                if d > 0.0 {
                    acc += sign
                        * Complex64::from_polar(1.0, omega * win[0])
                        * expm1_over_i_omega(omega, d);
                }
                sign = -sign;
            }
            acc
        })
        .collect();
    Ok(FilterFunction::complex(FfKind::Fzz, grid.to_vec(), values, "ideal switching"))
}

/// Ideal-switching `|F_zz|^2` of a pulse sequence (instantaneous pulses).
pub fn pulse_sequence_fzz_sq(
    seq: &PulseSequence,
    grid: &[f64],
) -> Result<FilterFunction, FilterError> {
    let fzz = ideal_switching_fzz(&seq.flip_times(), seq.tau, grid)?;
    Ok(fzz.magnitude_squared(FfKind::FzzSq, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpss::{compute_dpss, DpssParams};
    use crate::waveforms::{cpmg, fd_dpss_waveform, rotary_spin_echo, Limits, ScaleMode, Waveform};
    use approx::assert_abs_diff_eq;

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn free_evolution_filters() {
        let wf = Waveform::new(vec![0.0; 16], 1.0e-4).unwrap();
        let tau = wf.duration();
        let grid = uniform_grid(0.0, PI / wf.dt, 1024);
        let f = fundamental_ffs(&wf.profile(), &grid).unwrap();
        let fzz_sq = f.fzz_power();
        for (i, &omega) in grid.iter().enumerate() {
            assert!(f.fxx.complex_values().unwrap()[i].norm() <= 1e-12);
            assert!(f.fzy.complex_values().unwrap()[i].norm() <= 1e-12);
            let expect = if omega == 0.0 {
                tau * tau
            } else {
                4.0 * (omega * tau / 2.0).sin().powi(2) / (omega * omega)
            };
            assert_abs_diff_eq!(
                fzz_sq.real_values().unwrap()[i],
                expect,
                epsilon = 1e-9 * tau * tau
            );
        }
    }

    #[test]
    fn switching_transform_matches_quadrature_for_narrow_pulses() {
        // Narrow finite pulses approach the ideal switching transform: two
        // independent routes to the same filter.
        let n = 4;
        let tau = 1.0e-3;
        let seq = cpmg(n, tau, tau / 1.0e6, 0.0).unwrap();
        let grid = uniform_grid(0.0, 2.0 * PI * 40.0e3, 1500);
        let numeric = fundamental_ffs(&seq.render().unwrap(), &grid)
            .unwrap()
            .fzz_power();
        let ideal = pulse_sequence_fzz_sq(&seq, &grid).unwrap();
        let err = rel_l2(numeric.real_values().unwrap(), ideal.real_values().unwrap());
        assert!(err <= 1e-3, "rel L2 {err}");
    }

    #[test]
    fn fd_closed_form_matches_numeric_dephasing() {
        let n = 600;
        let set = compute_dpss(DpssParams::new(n, 2.0 / n as f64, 1).unwrap()).unwrap();
        let dt = 5.0e-6;
        let omega_s = 2.0 * PI * 10.0e3;
        let fd =
            fd_dpss_waveform(&set, 0, omega_s, dt, ScaleMode::MaxTheta(0.05), &Limits::default())
                .unwrap();
        let band = passband(omega_s, set.params().w, dt);
        let grid = uniform_grid(band.0, band.1, 600);
        let numeric = fundamental_ffs(&fd.profile(), &grid)
            .unwrap()
            .dephasing_ff();
        let omega_scale = fd.meta.energy_equivalent_scale.unwrap();
        let closed = fd_dephasing_ff(&set, 0, omega_s, omega_scale, dt, &grid).unwrap();
        let err = rel_l2(numeric.real_values().unwrap(), closed.real_values().unwrap());
        assert!(err <= 0.05, "rel L2 {err}");
    }

    #[test]
    fn fd_amplitude_to_dephasing_ratio() {
        let set = compute_dpss(DpssParams::new(256, 3.0 / 256.0, 1).unwrap()).unwrap();
        let dt = 5.0e-6;
        let omega_s = 2.0 * PI * 12.0e3;
        let grid = uniform_grid(2.0 * PI * 1.0e3, 2.0 * PI * 40.0e3, 512);
        let fz = fd_dephasing_ff(&set, 0, omega_s, 100.0, dt, &grid).unwrap();
        let fo = fd_amplitude_ff(&set, 0, omega_s, 100.0, dt, &grid).unwrap();
        for (i, &omega) in grid.iter().enumerate() {
            let z = fz.real_values().unwrap()[i];
            let o = fo.real_values().unwrap()[i];
            if z > 1e-12 && o > 1e-12 {
                assert_abs_diff_eq!(o / z, omega * omega / 4.0, epsilon = 1e-6 * omega * omega);
            }
        }
        // omega = 0 kills the amplitude filter.
        let fo0 = fd_amplitude_ff(&set, 0, omega_s, 100.0, dt, &[0.0]).unwrap();
        assert_eq!(fo0.real_values().unwrap()[0], 0.0);
    }

    #[test]
    fn fd_dephasing_examples() {
        let set = compute_dpss(DpssParams::new(600, 2.0 / 600.0, 2).unwrap()).unwrap();
        let dt = 5.0e-6;
        // Odd order at zero shift vanishes at omega = 0.
        let fz = fd_dephasing_ff(&set, 1, 0.0, 50.0, dt, &[0.0]).unwrap();
        assert_abs_diff_eq!(fz.real_values().unwrap()[0], 0.0, epsilon = 1e-18);

        // Peak lands within one grid step of the shift frequency.
        let omega_s = 2.0 * PI * 10.0e3;
        let grid = default_grid(dt);
        let step = grid[1] - grid[0];
        let fz = fd_dephasing_ff(&set, 0, omega_s, 50.0, dt, &grid).unwrap();
        let peak = fz.argmax(None).unwrap();
        assert!((peak - omega_s).abs() <= step, "peak {peak} vs shift {omega_s}");

        // In-band fraction at least lambda_0 - 0.01.
        let band = fz.passband.unwrap();
        let in_band = band_integral(&fz, band).unwrap();
        let total = band_integral(&fz, (0.0, *grid.last().unwrap())).unwrap();
        assert!(in_band / total >= set.eigenvalue(0).unwrap() - 0.01);
    }

    #[test]
    fn cos_shifted_reduces_at_zero_shift() {
        let set = compute_dpss(DpssParams::new(128, 4.0 / 128.0, 0).unwrap()).unwrap();
        let dt = 5.0e-6;
        let grid = uniform_grid(0.0, 2.0 * PI * 20.0e3, 400);
        let scale = 75.0;
        let ff = cos_shifted_amplitude_ff(&set, 0, 0.0, scale, dt, &grid).unwrap();
        for (i, &omega) in grid.iter().enumerate() {
            let u = dpswf_at(&set, 0, dt, omega).unwrap();
            let expect = scale * scale * sin2_over_omega2(omega, dt) * u * u;
            assert_abs_diff_eq!(
                ff.real_values().unwrap()[i],
                expect,
                epsilon = 1e-10 * expect.abs().max(1.0)
            );
        }
        // Even in omega.
        let sym = cos_shifted_amplitude_ff(&set, 0, 2.0 * PI * 8.0e3, scale, dt, &[-1.0e4, 1.0e4])
            .unwrap();
        let v = sym.real_values().unwrap();
        assert_abs_diff_eq!(v[0], v[1], epsilon = 1e-12 * v[1].abs());
    }

    #[test]
    fn cos_shifted_matches_numeric_amplitude_ff() {
        let set = compute_dpss(DpssParams::new(256, 3.0 / 256.0, 1).unwrap()).unwrap();
        let dt = 5.0e-6;
        let omega_s = 2.0 * PI * 15.0e3;
        let wf =
            crate::waveforms::cosine_shift(&set, 0, omega_s, dt, ScaleMode::Energy(120.0)).unwrap();
        let band = passband(omega_s, set.params().w, dt);
        let grid = uniform_grid(band.0, band.1, 400);
        let numeric = fundamental_ffs(&wf.profile(), &grid)
            .unwrap()
            .amplitude_ff();
        let closed = cos_shifted_amplitude_ff(&set, 0, omega_s, 120.0, dt, &grid).unwrap();
        let err = rel_l2(numeric.real_values().unwrap(), closed.real_values().unwrap());
        assert!(err <= 0.05, "rel L2 {err}");
    }

    #[test]
    fn cpmg_fourier_model() {
        // Instantaneous limit: square-wave coefficients 4/(pi nu), odd nu.
        let model = cpmg_ff_model(8, 3.0e-3, 1.0e-12, 8).unwrap();
        for (i, &a) in model.coefficients.iter().enumerate() {
            let nu = i + 1;
            let expect = if nu % 2 == 1 { 4.0 / (PI * nu as f64) } else { 0.0 };
            assert_abs_diff_eq!(a.abs(), expect, epsilon = 2e-4);
        }

        // Finite pulses: a_1 dominant at the ion parameters.
        let model = cpmg_ff_model(8, 3.0e-3, 35.0e-6, 8).unwrap();
        let a1 = model.coefficients[0].abs();
        for &a in &model.coefficients[1..] {
            assert!(a.abs() < a1);
        }

        // Main numeric peak agrees with omega_1 to within one sampling-
        // resolution step pi/tau (the finite-duration envelope shifts it
        // ~1% off the infinite-train harmonic even for narrow pulses).
        let tau = 3.0e-3;
        let grid = uniform_grid(2.0 * PI * 0.4e3, 2.0 * PI * 5.0e3, 2000);
        let resolution = PI / tau;
        for tau_pi in [3.0e-9, 35.0e-6] {
            let seq = cpmg(8, tau, tau_pi, 0.0).unwrap();
            let fzz = fundamental_ffs(&seq.render().unwrap(), &grid).unwrap().fzz_power();
            let peak = fzz.argmax(None).unwrap();
            assert!(
                (peak - model.peak_frequency(1)).abs() <= resolution,
                "tau_pi {tau_pi}: peak {peak} vs {}",
                model.peak_frequency(1)
            );
        }

        // Overlapping pulses are rejected.
        assert!(matches!(
            cpmg_ff_model(100, 3.0e-3, 35.0e-6, 4),
            Err(FilterError::PulseOverlap { .. })
        ));
    }

    #[test]
    fn multitaper_identity_and_flatness() {
        let set = compute_dpss(DpssParams::new(128, 4.0 / 128.0, 5).unwrap()).unwrap();
        let dt = 5.0e-6;
        let grid = default_grid(dt);
        let f0 = fd_dephasing_ff(&set, 0, 0.0, 50.0, dt, &grid).unwrap();
        // Single order with unit weight: identity.
        let mt = multitaper_ff(std::slice::from_ref(&f0), &[1.0]).unwrap();
        for (a, b) in mt.real_values().unwrap().iter().zip(f0.real_values().unwrap()) {
            assert_eq!(a, b);
        }

        // K = 5 flat sum: ripple within 3 dB over the central 80% of B_0.
        // The bare DPSWF composite probes the taper sum itself rather than
        // the sin^4/omega^4 envelope.
        let band = passband(0.0, set.params().w, dt);
        let ffs: Vec<FilterFunction> = (0..=5)
            .map(|k| {
                let vals: Vec<f64> = grid
                    .iter()
                    .map(|&omega| {
                        let u = dpswf_at(&set, k, dt, omega).unwrap();
                        u * u
                    })
                    .collect();
                let mut ff = FilterFunction::real(FfKind::Fz, grid.clone(), vals, "u^2");
                ff.passband = Some(band);
                ff
            })
            .collect();
        let mt = multitaper_ff(&ffs, &[1.0; 6]).unwrap();
        let hi = 0.8 * band.1;
        let vals: Vec<f64> = grid
            .iter()
            .zip(mt.real_values().unwrap())
            .filter(|(&omega, _)| omega <= hi)
            .map(|(_, &v)| v)
            .collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        let ripple_db = 10.0 * (max / min).log10();
        assert!(ripple_db <= 3.0, "ripple {ripple_db} dB");

        // The multitaper captures at least the in-band content of k = 0 alone
        // (every term is nonnegative).
        let in_band = |ff: &FilterFunction| band_integral(ff, (0.0, band.1)).unwrap();
        assert!(in_band(&mt) >= in_band(&ffs[0]));
    }

    #[test]
    fn band_integral_cases() {
        let dt = 1.0e-4;
        let grid = uniform_grid(0.0, PI / dt, 4096);
        let zero = FilterFunction::real(FfKind::Fz, grid.clone(), vec![0.0; grid.len()], "zero");
        assert_eq!(band_integral(&zero, (0.0, 1.0e4)).unwrap(), 0.0);

        // Free evolution: (1/pi) int |F_zz|^2 over a wide grid approaches tau.
        let wf = Waveform::new(vec![0.0; 8], dt).unwrap();
        let tau = wf.duration();
        let wide = uniform_grid(0.0, 400.0 * 2.0 * PI / tau, 60000);
        let fzz = fundamental_ffs(&wf.profile(), &wide)
            .unwrap()
            .fzz_power();
        let integral = band_integral(&fzz, (0.0, *wide.last().unwrap())).unwrap();
        assert!((integral - tau).abs() / tau <= 2.0e-3, "got {integral} vs {tau}");

        // Narrow bands are refused.
        let step = grid[1] - grid[0];
        assert!(matches!(
            band_integral(&zero, (0.0, 3.0 * step)),
            Err(FilterError::DegenerateBand { .. })
        ));
        assert!(band_integral(&zero, (0.0, 10.0 * PI / dt)).is_err());
    }


    #[test]
    fn linearization_degrades_with_rotation_angle() {
        // The closed form rests on sin Theta ~ Theta: the gap to the numeric
        // filter grows monotonically with the peak rotation angle.
        let set = compute_dpss(DpssParams::new(256, 3.0 / 256.0, 0).unwrap()).unwrap();
        let dt = 5.0e-6;
        let omega_s = 2.0 * PI * 12.0e3;
        let band = passband(omega_s, set.params().w, dt);
        let grid = uniform_grid(band.0, band.1, 400);
        let mut errors = Vec::new();
        for max_theta in [0.05, 0.15, 0.3] {
            let fd = fd_dpss_waveform(
                &set,
                0,
                omega_s,
                dt,
                ScaleMode::MaxTheta(max_theta),
                &Limits::default(),
            )
            .unwrap();
            let numeric = fundamental_ffs(&fd.profile(), &grid).unwrap().dephasing_ff();
            let omega_scale = fd.meta.energy_equivalent_scale.unwrap();
            let closed = fd_dephasing_ff(&set, 0, omega_s, omega_scale, dt, &grid).unwrap();
            errors.push(rel_l2(numeric.real_values().unwrap(), closed.real_values().unwrap()));
        }
        assert!(errors[0] <= 0.05, "max Theta 0.05: rel-L2 {}", errors[0]);
        assert!(
            errors[0] < errors[1] && errors[1] < errors[2],
            "degradation not monotone: {errors:?}"
        );
    }

    #[test]
    fn parseval_identity() {
        let set = compute_dpss(DpssParams::new(600, 2.0 / 600.0, 1).unwrap()).unwrap();
        let dt = 5.0e-6;
        let grid = default_grid(dt);
        let check = |wf: &Waveform, tol: f64| {
            let f = fundamental_ffs(&wf.profile(), &grid).unwrap();
            let fxx_sq = f.fxx.magnitude_squared(FfKind::FOmega, 1.0);
            let lhs = band_integral(&fxx_sq, (0.0, *grid.last().unwrap())).unwrap();
            let rhs = wf.energy();
            assert!((lhs - rhs).abs() / rhs <= tol, "Parseval {lhs} vs {rhs} (tol {tol})");
        };
        // Unshifted drive: the staircase alias tail scales as (omega_s dt)^2,
        // negligible at omega_s = 0.
        let plain = crate::waveforms::dpss_waveform(&set, 0, 100.0, dt).unwrap();
        check(&plain, 5.0e-3);
        // Shifted to 10 kHz the tail beyond the default grid costs ~0.8%.
        let omega_s = 2.0 * PI * 10.0e3;
        let cos =
            crate::waveforms::cosine_shift(&set, 0, omega_s, dt, ScaleMode::Energy(100.0)).unwrap();
        check(&cos, 1.0e-2);
        let fd =
            fd_dpss_waveform(&set, 0, omega_s, dt, ScaleMode::MaxTheta(0.05), &Limits::default())
                .unwrap();
        check(&fd, 1.0e-2);
    }

    #[test]
    fn grid_refinement_converges() {
        let set = compute_dpss(DpssParams::new(128, 4.0 / 128.0, 0).unwrap()).unwrap();
        let dt = 5.0e-6;
        let omega_s = 2.0 * PI * 10.0e3;
        let fd =
            fd_dpss_waveform(&set, 0, omega_s, dt, ScaleMode::MaxTheta(0.05), &Limits::default())
                .unwrap();
        let band = passband(omega_s, set.params().w, dt);
        let mut values = Vec::new();
        for len in [4096usize, 8192] {
            let grid = uniform_grid(0.0, PI / dt, len);
            let ff = fundamental_ffs(&fd.profile(), &grid)
                .unwrap()
                .dephasing_ff();
            values.push(band_integral(&ff, band).unwrap());
        }
        assert!((values[0] - values[1]).abs() / values[1] <= 1.0e-3);
    }

    #[test]
    fn rotary_spin_echo_peak_at_flip_rate() {
        // Sign flips every half period put the fundamental response at
        // 2 pi / period, i.e. pi / half-period.
        let period = 0.2e-3;
        let wf = rotary_spin_echo(2.0e3, period, 2.0e-3).unwrap();
        let grid = uniform_grid(2.0 * PI * 0.5e3, 2.0 * PI * 30.0e3, 3000);
        let fo = fundamental_ffs(&wf.profile(), &grid)
            .unwrap()
            .amplitude_ff();
        let peak = fo.argmax(None).unwrap();
        let expect = 2.0 * PI / period;
        let step = grid[1] - grid[0];
        assert!((peak - expect).abs() <= 2.0 * step, "peak {peak} vs {expect}");
    }

    #[test]
    fn empty_grid_is_an_error() {
        let wf = Waveform::new(vec![1.0], 1.0).unwrap();
        assert!(matches!(
            fundamental_ffs(&wf.profile(), &[]),
            Err(FilterError::GridEmpty)
        ));
    }
}
