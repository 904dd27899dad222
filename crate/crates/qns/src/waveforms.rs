//! Control-waveform synthesis and rotation-angle bookkeeping.
//!
//! All drives are piecewise-constant amplitudes `Omega(t)` in rad/time. The
//! repertoire:
//!
//! * [`dpss_waveform`] — the amplitude follows a Slepian sequence directly;
//! * [`cosine_shift`] — cosine modulation moves the response band to a shift
//!   frequency `omega_s`;
//! * [`finite_difference`] — drives with the first difference of a base
//!   waveform, so the *rotation angle* rather than the amplitude carries the
//!   shape; this linearizes the dephasing response;
//! * [`embedded_dd_waveform`] — finite difference with two pi rotations at
//!   N/4 and 3N/4 whose cos(Theta) switching pattern echoes away the
//!   cos-coupled noise accumulation behind higher-order errors;
//! * [`cpmg`] — classic pi-pulse trains, plus [`rotary_spin_echo`] and the
//!   pulsed Slepian sequences of [`pulsed_dpss`] for hardware without
//!   arbitrary waveform control.
//!
//! Uniform-grid drives are [`Waveform`]; pulse trains render to a
//! [`DriveProfile`] whose breakpoints need not be grid-aligned (pulse edges
//! are kept exact, never resampled).

use std::f64::consts::PI;
use std::fmt;

use crate::dpss::{DpssError, DpssSet};

#[derive(Debug, Clone, PartialEq)]
pub enum WaveformError {
    Dpss(DpssError),
    /// A synthesized value exceeded the configured amplitude cap.
    AmplitudeCap { index: usize, value: f64, omega_max: f64 },
    /// Embedded decoupling needs `N` divisible by 4.
    InvalidN { n: usize, requirement: &'static str },
    /// Pulses (including buffers) collide.
    Overlap { detail: String },
    /// Pulsed-Slepian time scaling too large: `c_tau * max|v| >= dt`.
    ScalingTooLarge { c_tau: f64, limit: f64 },
    /// Generic invalid argument, with the offending field named.
    InvalidArgument(String),
}

impl fmt::Display for WaveformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveformError::Dpss(e) => write!(f, "{e}"),
            WaveformError::AmplitudeCap { index, value, omega_max } => write!(
                f,
                "amplitude {value:.6e} at segment {index} exceeds the cap {omega_max:.6e}"
            ),
            WaveformError::InvalidN { n, requirement } => {
                write!(f, "invalid segment count n = {n}: {requirement}")
            }
            WaveformError::Overlap { detail } => write!(f, "pulse overlap: {detail}"),
            WaveformError::ScalingTooLarge { c_tau, limit } => write!(
                f,
                "pulsed-DPSS scaling c_tau = {c_tau:.6e} too large; must stay below {limit:.6e}"
            ),
            WaveformError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for WaveformError {}

impl From<DpssError> for WaveformError {
    fn from(e: DpssError) -> Self {
        WaveformError::Dpss(e)
    }
}

/// How the overall drive strength of a shifted/finite-difference waveform is
/// fixed. Two normalizations appear in practice: constant waveform energy
/// (`int Omega^2 dt`) and constant rotation-angle energy (`int Theta^2 dt`),
/// which keeps dephasing-filter peaks at constant height across shifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// Multiply the modulated shape by this factor directly (rad/time).
    Direct(f64),
    /// `int Omega^2 dt` equals that of the unshifted waveform at this
    /// reference scale (rad/time).
    Energy(f64),
    /// `int Theta_FD^2 dt` equals that of the unshifted finite-difference
    /// waveform at this reference scale (rad/time).
    ThetaEnergy(f64),
    /// Peak |Theta| of the finite-difference rotation angle equals this
    /// target (rad).
    MaxTheta(f64),
}

/// Optional synthesis limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Limits {
    /// Maximum admissible |Omega|; exceeding it is an error, never a clip.
    pub omega_max: Option<f64>,
}

/// Construction recipe recorded with every waveform.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveformKind {
    Dpss { k: usize },
    CosineShifted { k: usize, omega_s: f64 },
    FiniteDifference { k: usize, omega_s: f64 },
    EmbeddedDd { k: usize, omega_s: f64 },
    RotarySpinEcho { period: f64 },
    Custom,
}

/// Metadata carried by a synthesized waveform.
#[derive(Debug, Clone)]
pub struct WaveformMeta {
    pub kind: WaveformKind,
    pub n: usize,
    pub w: Option<f64>,
    /// Scale factor actually applied to the modulated shape (rad/time).
    pub scale: f64,
    /// Equivalent energy-reference scale `Omega_s`: the amplitude an
    /// unshifted waveform of equal energy would carry. Closed-form filter
    /// expressions are parameterized by this value.
    pub energy_equivalent_scale: Option<f64>,
    /// Base (pre-difference) samples `V_n` for finite-difference kinds.
    pub base_values: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl WaveformMeta {
    fn custom(n: usize) -> Self {
        WaveformMeta {
            kind: WaveformKind::Custom,
            n,
            w: None,
            scale: 1.0,
            energy_equivalent_scale: None,
            base_values: None,
            warnings: Vec::new(),
        }
    }
}

/// Piecewise-constant drive on a uniform grid: value `values[n]` holds on
/// `[n*dt, (n+1)*dt)`; total duration `tau = values.len() * dt`.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub values: Vec<f64>,
    pub dt: f64,
    pub meta: WaveformMeta,
}

impl Waveform {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self, WaveformError> {
        if values.is_empty() {
            return Err(WaveformError::InvalidArgument("values: empty waveform".into()));
        }
        if !(dt > 0.0) {
            return Err(WaveformError::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let meta = WaveformMeta::custom(values.len());
        Ok(Waveform { values, dt, meta })
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    /// `int Omega^2 dt` over the full duration.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v * self.dt).sum()
    }

    pub fn profile(&self) -> DriveProfile {
        let n = self.values.len();
        let times = (0..=n).map(|i| i as f64 * self.dt).collect();
        DriveProfile { times, values: self.values.clone() }
    }
}

/// Piecewise-constant drive with arbitrary breakpoints: `values[i]` holds on
/// `[times[i], times[i+1])`. This is the common denominator every filter and
/// simulator routine consumes; pulse edges that fall off the uniform grid
/// stay exact here.
#[derive(Debug, Clone)]
pub struct DriveProfile {
    /// Strictly increasing, `len = values.len() + 1`, `times[0] = 0`.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DriveProfile {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, WaveformError> {
        if times.len() != values.len() + 1 {
            return Err(WaveformError::InvalidArgument(
                "times: must have exactly one more entry than values".into(),
            ));
        }
        if values.is_empty() {
            return Err(WaveformError::InvalidArgument("values: empty profile".into()));
        }
        if times[0] != 0.0 {
            return Err(WaveformError::InvalidArgument("times: must start at 0".into()));
        }
        if times.windows(2).any(|p| p[1] <= p[0]) {
            return Err(WaveformError::InvalidArgument("times: not strictly increasing".into()));
        }
        Ok(DriveProfile { times, values })
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.values.len()
    }

    pub fn energy(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * v * (self.times[i + 1] - self.times[i]))
            .sum()
    }

    pub fn min_segment_duration(&self) -> f64 {
        self.times.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min)
    }

    /// Concatenate `reps` back-to-back copies of this profile.
    pub fn repeated(&self, reps: usize) -> Result<DriveProfile, WaveformError> {
        if reps == 0 {
            return Err(WaveformError::InvalidArgument("reps: must be at least 1".into()));
        }
        let tau = self.duration();
        let mut times = vec![0.0];
        let mut values = Vec::with_capacity(self.values.len() * reps);
        for r in 0..reps {
            let off = r as f64 * tau;
            for (i, &v) in self.values.iter().enumerate() {
                values.push(v);
                times.push(off + self.times[i + 1]);
            }
        }
        DriveProfile::new(times, values)
    }
}

impl From<&Waveform> for DriveProfile {
    fn from(w: &Waveform) -> Self {
        w.profile()
    }
}

/// Integrated rotation angle `Theta(t) = int_0^t Omega(s) ds`: exact
/// piecewise-linear integral of a piecewise-constant drive.
#[derive(Debug, Clone)]
pub struct RotationAngle {
    /// Breakpoint times (the profile's breakpoints).
    pub times: Vec<f64>,
    /// `Theta` at each breakpoint; `theta[0] = 0`.
    pub theta: Vec<f64>,
    /// Slope on each segment (= the drive amplitude there).
    pub slopes: Vec<f64>,
}

impl RotationAngle {
    /// Exact value at any `t` within `[0, tau]` (clamped outside).
    pub fn at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, *self.times.last().unwrap());
        let idx = match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.slopes.len()),
            Err(i) => i - 1,
        };
        if idx >= self.slopes.len() {
            return *self.theta.last().unwrap();
        }
        self.theta[idx] + self.slopes[idx] * (t - self.times[idx])
    }

    pub fn final_value(&self) -> f64 {
        *self.theta.last().unwrap()
    }

    /// Maximum |Theta| over the whole duration (attained at a breakpoint).
    pub fn max_abs(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }
}

/// Rotation angle of any piecewise-constant drive.
pub fn rotation_angle(profile: &DriveProfile) -> RotationAngle {
    let mut theta = Vec::with_capacity(profile.times.len());
    theta.push(0.0);
    let mut acc = 0.0;
    let mut comp = 0.0f64;
    for (i, &v) in profile.values.iter().enumerate() {
        let term = v * (profile.times[i + 1] - profile.times[i]) - comp;
        let next = acc + term;
        comp = (next - acc) - term;
        acc = next;
        theta.push(acc);
    }
    RotationAngle { times: profile.times.clone(), theta, slopes: profile.values.clone() }
}

/// Closed-form rotation angle of the finite-difference waveform built from
/// base samples `V_n` with segment duration `dt`:
///
/// `Theta_FD(t) = V_m (t - m dt) + V_(m-1) ((m+1) dt - t)` on segment `m`
/// (the second term absent for `m = 0`). At breakpoints `t = m dt` this
/// reduces to `V_(m-1) dt`.
pub fn theta_fd_closed_form(base_values: &[f64], dt: f64, t: f64) -> f64 {
    let n = base_values.len();
    let tau = n as f64 * dt;
    let t = t.clamp(0.0, tau);
    let m = ((t / dt).floor() as usize).min(n - 1);
    let mut theta = base_values[m] * (t - m as f64 * dt);
    if m >= 1 {
        theta += base_values[m - 1] * ((m as f64 + 1.0) * dt - t);
    }
    theta
}

const SMALL_ANGLE_GUARD: f64 = PI / 8.0;

/// Plain Slepian-shaped drive: `Omega_n = scale * v_n^(k)`.
pub fn dpss_waveform(
    set: &DpssSet,
    k: usize,
    scale: f64,
    dt: f64,
) -> Result<Waveform, WaveformError> {
    let v = set.sequence(k)?;
    let values: Vec<f64> = v.iter().map(|x| scale * x).collect();
    let mut wf = Waveform::new(values, dt)?;
    wf.meta = WaveformMeta {
        kind: WaveformKind::Dpss { k },
        n: set.params().n,
        w: Some(set.params().w),
        scale,
        energy_equivalent_scale: Some(scale),
        base_values: None,
        warnings: Vec::new(),
    };
    Ok(wf)
}

/// Cosine-shifted Slepian drive: `Omega_n = s * cos(n omega_s dt) * v_n^(k)`.
///
/// `s` is fixed by `mode`. A shift inside the base band
/// (`omega_s <= 2 PI W / dt`) leaves a cross term in the filter; that case is
/// allowed but recorded as a warning.
pub fn cosine_shift(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    dt: f64,
    mode: ScaleMode,
) -> Result<Waveform, WaveformError> {
    if omega_s < 0.0 {
        return Err(WaveformError::InvalidArgument(format!(
            "omega_s = {omega_s} must be nonnegative"
        )));
    }
    let v = set.sequence(k)?;
    let n = set.params().n;
    let w = set.params().w;

    let shape: Vec<f64> =
        v.iter().enumerate().map(|(i, &x)| (i as f64 * omega_s * dt).cos() * x).collect();
    let scale = resolve_scale(&shape, dt, &mode)?;
    let values: Vec<f64> = shape.iter().map(|x| scale * x).collect();

    let mut warnings = Vec::new();
    let band_edge = 2.0 * PI * w / dt;
    if omega_s > 0.0 && omega_s <= band_edge {
        warnings.push(format!(
            "omega_s = {omega_s:.6e} rad/s lies inside the base band (edge {band_edge:.6e}); \
             the shifted filter keeps a cross term"
        ));
    }

    let mut wf = Waveform::new(values, dt)?;
    wf.meta = WaveformMeta {
        kind: WaveformKind::CosineShifted { k, omega_s },
        n,
        w: Some(w),
        scale,
        energy_equivalent_scale: Some(energy_equivalent(&shape, scale)),
        base_values: None,
        warnings,
    };
    Ok(wf)
}

/// Resolve the scale factor for a cosine-modulated unit-norm shape.
fn resolve_scale(shape: &[f64], dt: f64, mode: &ScaleMode) -> Result<f64, WaveformError> {
    match *mode {
        ScaleMode::Direct(s) => Ok(s),
        ScaleMode::Energy(reference) => {
            // Target energy: the unshifted unit-norm sequence at `reference`
            // scale has energy reference^2 * dt.
            let shape_sq: f64 = shape.iter().map(|x| x * x).sum();
            if shape_sq <= 0.0 {
                return Err(WaveformError::InvalidArgument(
                    "normalization: shape has zero energy".into(),
                ));
            }
            Ok(reference / shape_sq.sqrt())
        }
        ScaleMode::ThetaEnergy(_) => Err(WaveformError::InvalidArgument(
            "normalization: theta-energy applies to finite-difference synthesis; \
             use fd_dpss_waveform"
                .into(),
        )),
        ScaleMode::MaxTheta(target) => {
            let peak = shape.iter().fold(0.0f64, |m, x| m.max(x.abs())) * dt;
            if peak <= 0.0 {
                return Err(WaveformError::InvalidArgument(
                    "normalization: shape peak is zero".into(),
                ));
            }
            Ok(target / peak)
        }
    }
}

/// `int Theta_FD(t)^2 dt` for the finite-difference waveform whose base
/// samples are `base` (exact piecewise-linear quadrature).
fn theta_energy_of_base(base: &[f64], dt: f64) -> f64 {
    let n = base.len();
    let mut acc = 0.0;
    for m in 0..n {
        let a = if m == 0 { 0.0 } else { base[m - 1] * dt };
        let b = base[m] * dt;
        acc += dt / 3.0 * (a * a + a * b + b * b);
    }
    acc
}

fn energy_equivalent(shape: &[f64], scale: f64) -> f64 {
    // Energy of the scaled shape equals that of an unshifted unit-norm
    // sequence at Omega_s = scale * sqrt(sum shape^2).
    let shape_sq: f64 = shape.iter().map(|x| x * x).sum();
    scale * shape_sq.sqrt()
}

/// First-difference drive: `V'_0 = V_0`, `V'_n = V_n - V_(n-1)`.
///
/// The rotation angle at `t = m dt` is exactly `dt * V_(m-1)`.
pub fn finite_difference(base: &Waveform, limits: &Limits) -> Result<Waveform, WaveformError> {
    if base.values.len() < 2 {
        return Err(WaveformError::InvalidN {
            n: base.values.len(),
            requirement: "finite difference needs at least 2 segments",
        });
    }
    let mut values = Vec::with_capacity(base.values.len());
    values.push(base.values[0]);
    for i in 1..base.values.len() {
        values.push(base.values[i] - base.values[i - 1]);
    }
    check_cap(&values, limits)?;

    let kind = match base.meta.kind {
        WaveformKind::CosineShifted { k, omega_s } => WaveformKind::FiniteDifference { k, omega_s },
        WaveformKind::Dpss { k } => WaveformKind::FiniteDifference { k, omega_s: 0.0 },
        _ => WaveformKind::Custom,
    };

    let mut warnings = base.meta.warnings.clone();
    let max_theta = base.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * base.dt;
    if max_theta > SMALL_ANGLE_GUARD {
        warnings.push(format!(
            "max |Theta| = {max_theta:.4} rad exceeds pi/8; the linearized dephasing \
             response degrades"
        ));
    }

    let mut wf = Waveform::new(values, base.dt)?;
    wf.meta = WaveformMeta {
        kind,
        n: base.meta.n,
        w: base.meta.w,
        scale: base.meta.scale,
        energy_equivalent_scale: base.meta.energy_equivalent_scale,
        base_values: Some(base.values.clone()),
        warnings,
    };
    Ok(wf)
}

/// Cosine-shifted finite-difference drive in one step. `ThetaEnergy`
/// normalization fixes `int Theta_FD^2 dt` to the unshifted value at the
/// reference scale, which keeps dephasing-filter peaks at constant height
/// across shift frequencies.
pub fn fd_dpss_waveform(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    dt: f64,
    mode: ScaleMode,
    limits: &Limits,
) -> Result<Waveform, WaveformError> {
    let base = match mode {
        ScaleMode::ThetaEnergy(reference) => {
            let v = set.sequence(k)?;
            let unshifted: Vec<f64> = v.iter().map(|x| reference * x).collect();
            let target = theta_energy_of_base(&unshifted, dt);
            let shape: Vec<f64> =
                v.iter().enumerate().map(|(i, &x)| (i as f64 * omega_s * dt).cos() * x).collect();
            let t_shape = theta_energy_of_base(&shape, dt);
            if t_shape <= 0.0 {
                return Err(WaveformError::InvalidArgument(
                    "normalization: rotation-angle energy of shape is zero".into(),
                ));
            }
            let scale = (target / t_shape).sqrt();
            let mut wf = cosine_shift(set, k, omega_s, dt, ScaleMode::Direct(scale))?;
            wf.meta.energy_equivalent_scale = Some(energy_equivalent(&shape, scale));
            wf
        }
        other => cosine_shift(set, k, omega_s, dt, other)?,
    };
    finite_difference(&base, limits)
}

/// Finite-difference drive with embedded two-pulse decoupling.
///
/// Breakpoint targets, with `a_m = V_m dt`:
/// `Theta(m dt) = a_(m-1)` for `m < N/4`, `pi - a_(m-1)` for
/// `N/4 <= m < 3N/4`, and `2 pi + a_(m-1)` for `m >= 3N/4`. Then
/// `sin Theta(m dt) = sin(a_(m-1))` exactly at every breakpoint while
/// `cos Theta(m dt)` follows the two-pulse CPMG switching pattern (+, -, +).
pub fn embedded_dd_waveform(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    dt: f64,
    mode: ScaleMode,
    limits: &Limits,
) -> Result<Waveform, WaveformError> {
    let n = set.params().n;
    if n % 4 != 0 {
        return Err(WaveformError::InvalidN { n, requirement: "embedded decoupling needs 4 | n" });
    }
    let fd = fd_dpss_waveform(set, k, omega_s, dt, mode, &Limits::default())?;
    let base = fd.meta.base_values.clone().expect("finite-difference carries base");
    let values = embed_pi_rotations(&base, dt);
    check_cap(&values, limits)?;

    let mut wf = Waveform::new(values, dt)?;
    wf.meta = WaveformMeta {
        kind: WaveformKind::EmbeddedDd { k, omega_s },
        n,
        w: Some(set.params().w),
        scale: fd.meta.scale,
        energy_equivalent_scale: fd.meta.energy_equivalent_scale,
        base_values: Some(base),
        warnings: fd.meta.warnings.clone(),
    };
    Ok(wf)
}

/// Segment amplitudes realizing the embedded-decoupling breakpoint targets.
fn embed_pi_rotations(base: &[f64], dt: f64) -> Vec<f64> {
    let n = base.len();
    let q1 = n / 4;
    let q3 = 3 * n / 4;
    let target = |m: usize| -> f64 {
        let small = if m == 0 { 0.0 } else { base[m - 1] * dt };
        if m < q1 {
            small
        } else if m < q3 {
            PI - small
        } else {
            2.0 * PI + small
        }
    };
    (0..n).map(|m| (target(m + 1) - target(m)) / dt).collect()
}

fn check_cap(values: &[f64], limits: &Limits) -> Result<(), WaveformError> {
    if let Some(omega_max) = limits.omega_max {
        for (i, &v) in values.iter().enumerate() {
            if v.abs() > omega_max {
                return Err(WaveformError::AmplitudeCap { index: i, value: v, omega_max });
            }
        }
    }
    Ok(())
}

/// A train of square pi pulses.
#[derive(Debug, Clone)]
pub struct PulseSequence {
    /// Pulse centers, strictly increasing.
    pub centers: Vec<f64>,
    /// Pulse width; zero means instantaneous (switching-function semantics).
    pub tau_pi: f64,
    /// Dead time required between the edges of adjacent pulses. For a
    /// platform that keeps a guard interval on each side of every pulse this
    /// is twice the per-side value.
    pub buffer: f64,
    /// Total sequence duration.
    pub tau: f64,
}

impl PulseSequence {
    pub fn new(
        centers: Vec<f64>,
        tau_pi: f64,
        buffer: f64,
        tau: f64,
    ) -> Result<Self, WaveformError> {
        if centers.is_empty() {
            return Err(WaveformError::InvalidArgument("centers: no pulses".into()));
        }
        if tau_pi < 0.0 || buffer < 0.0 || tau <= 0.0 {
            return Err(WaveformError::InvalidArgument(
                "tau_pi and buffer must be nonnegative, tau positive".into(),
            ));
        }
        for (i, pair) in centers.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            if gap < tau_pi + buffer - 1e-12 * tau {
                return Err(WaveformError::Overlap {
                    detail: format!(
                        "centers {i} and {} are {gap:.6e} apart; need at least \
                         tau_pi + buffer = {:.6e}",
                        i + 1,
                        tau_pi + buffer
                    ),
                });
            }
        }
        let first = centers.first().unwrap() - tau_pi / 2.0;
        let last = centers.last().unwrap() + tau_pi / 2.0;
        if first < -1e-12 * tau || last > tau * (1.0 + 1e-12) {
            return Err(WaveformError::Overlap {
                detail: format!(
                    "pulse edges [{first:.6e}, {last:.6e}] fall outside [0, {tau:.6e}]"
                ),
            });
        }
        Ok(PulseSequence { centers, tau_pi, buffer, tau })
    }

    /// Square-pulse amplitude `pi / tau_pi`; `None` for instantaneous pulses.
    pub fn amplitude(&self) -> Option<f64> {
        (self.tau_pi > 0.0).then(|| PI / self.tau_pi)
    }

    /// Minimum admissible center-to-center spacing `tau_pi + buffer`.
    pub fn delta_tau_min(&self) -> f64 {
        self.tau_pi + self.buffer
    }

    /// Idle fraction `1 - n * delta_tau_min / tau` for this pulse count.
    pub fn r_idle(&self) -> f64 {
        1.0 - self.centers.len() as f64 * self.delta_tau_min() / self.tau
    }

    /// Render to a drive profile with exact sub-grid pulse edges.
    /// Requires a finite pulse width.
    pub fn render(&self) -> Result<DriveProfile, WaveformError> {
        let amp = self.amplitude().ok_or_else(|| {
            WaveformError::InvalidArgument(
                "tau_pi: instantaneous pulses cannot render to finite amplitudes".into(),
            )
        })?;
        let mut times = vec![0.0];
        let mut values = Vec::new();
        let mut cursor = 0.0;
        for &c in &self.centers {
            let start = c - self.tau_pi / 2.0;
            let stop = c + self.tau_pi / 2.0;
            if start > cursor + 1e-15 * self.tau {
                times.push(start);
                values.push(0.0);
            }
            times.push(stop);
            values.push(amp);
            cursor = stop;
        }
        if cursor < self.tau * (1.0 - 1e-15) {
            times.push(self.tau);
            values.push(0.0);
        } else {
            *times.last_mut().unwrap() = self.tau;
        }
        DriveProfile::new(times, values)
    }

    /// Sign-flip times of the ideal (instantaneous-pulse) switching function.
    pub fn flip_times(&self) -> Vec<f64> {
        self.centers.clone()
    }
}

/// Standard CPMG: `n` pi pulses at `t_j = (2j - 1) tau / (2n)`.
///
/// `buffer` is the dead time required between the edges of adjacent pulses;
/// the minimum interpulse spacing is `tau_pi + buffer` and the largest pulse
/// count that fits is `floor(tau / (tau_pi + buffer))`.
pub fn cpmg(n: usize, tau: f64, tau_pi: f64, buffer: f64) -> Result<PulseSequence, WaveformError> {
    if n == 0 {
        return Err(WaveformError::InvalidArgument("n: need at least one pulse".into()));
    }
    let centers: Vec<f64> = (1..=n).map(|j| (2 * j - 1) as f64 * tau / (2.0 * n as f64)).collect();
    PulseSequence::new(centers, tau_pi, buffer, tau)
}

/// Largest CPMG pulse count that fits `tau` at spacing `tau_pi + buffer`.
pub fn cpmg_max_pulses(tau: f64, tau_pi: f64, buffer: f64) -> usize {
    (tau / (tau_pi + buffer)).floor() as usize
}

/// Rotary spin echo: the drive alternates `+Omega` and `-Omega` every half
/// `period`; `tau` must be a whole number of periods so the net rotation per
/// period vanishes.
pub fn rotary_spin_echo(omega: f64, period: f64, tau: f64) -> Result<Waveform, WaveformError> {
    if !(period > 0.0) || !(tau > 0.0) {
        return Err(WaveformError::InvalidArgument("period and tau must be positive".into()));
    }
    let cycles = tau / period;
    if (cycles - cycles.round()).abs() > 1e-9 * cycles.max(1.0) {
        return Err(WaveformError::InvalidArgument(format!(
            "tau = {tau:.6e} is not a whole number of periods ({period:.6e})"
        )));
    }
    let half = period / 2.0;
    let n = (2.0 * cycles.round()) as usize;
    let values: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { omega } else { -omega }).collect();
    let mut wf = Waveform::new(values, half)?;
    wf.meta = WaveformMeta {
        kind: WaveformKind::RotarySpinEcho { period },
        n,
        w: None,
        scale: omega,
        energy_equivalent_scale: None,
        base_values: None,
        warnings: Vec::new(),
    };
    Ok(wf)
}

/// Pulsed Slepian sequence: `2N - 1` pi pulses whose odd-indexed times are
/// displaced by a cosine-modulated Slepian,
///
/// `t_n = n dt / 2` (even n),
/// `t_n = [c_tau cos((n-1)/2 omega_s dt) v_((n-1)/2) + n dt] / 2` (odd n).
///
/// `c_tau` must satisfy `c_tau * max|v_n| < dt` so the times stay ordered.
pub fn pulsed_dpss(
    set: &DpssSet,
    k: usize,
    omega_s: f64,
    c_tau: f64,
    dt: f64,
) -> Result<PulseSequence, WaveformError> {
    let v = set.sequence(k)?;
    let n = set.params().n;
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let limit = dt / peak;
    if c_tau.abs() * peak >= dt {
        return Err(WaveformError::ScalingTooLarge { c_tau, limit });
    }
    let mut centers = Vec::with_capacity(2 * n - 1);
    for idx in 1..2 * n {
        let t = if idx % 2 == 0 {
            idx as f64 * dt / 2.0
        } else {
            let m = (idx - 1) / 2;
            (c_tau * (m as f64 * omega_s * dt).cos() * v[m] + idx as f64 * dt) / 2.0
        };
        centers.push(t);
    }
    let tau = n as f64 * dt;
    PulseSequence::new(centers, 0.0, 0.0, tau)
}

/// Inputs for scan-range and resolution bounds. Fields not relevant to a
/// given protocol may be left `None`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScanRangeInputs {
    /// Pi-pulse duration (time).
    pub tau_pi: f64,
    /// Dead time between adjacent pulse edges (time).
    pub buffer: f64,
    /// Fraction of the sequence reserved for free evolution, in `[0, 1]`.
    pub r_idle: f64,
    /// Waveform time increment for Slepian drives.
    pub dt: Option<f64>,
    /// Smallest increment the waveform generator supports.
    pub awg_min_dt: Option<f64>,
    /// Total sequence duration (sets the n-pulse sampling resolution).
    pub tau: Option<f64>,
    /// Comb base-sequence duration (sets the comb sampling resolution).
    pub tau_b: Option<f64>,
    /// Spacing between adjacent Slepian shift frequencies (rad/time).
    pub shift_spacing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodRange {
    /// Largest reconstructable angular frequency (rad/time).
    pub omega_max: f64,
    /// Spacing between reconstruction points (rad/time), when determined.
    pub omega_res: Option<f64>,
}

/// Scan-range report for the three protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRangeReport {
    /// Minimum interpulse spacing `tau_pi + buffer`.
    pub delta_tau_min: f64,
    pub cpmg: MethodRange,
    /// Frequency-comb (repeated base sequence) protocol.
    pub comb: MethodRange,
    pub dpss: Option<MethodRange>,
}

/// Scan-range and sampling-resolution bounds.
///
/// Pulsed protocols are capped at `omega_max = pi (1 - r_idle) / delta_tau_min`;
/// Slepian drives reach the waveform Nyquist `pi / dt`, itself capped at half
/// the generator's sampling rate.
pub fn scan_range(inputs: &ScanRangeInputs) -> ScanRangeReport {
    let delta_tau_min = inputs.tau_pi + inputs.buffer;
    let pulsed_max = if delta_tau_min > 0.0 {
        PI * (1.0 - inputs.r_idle).max(0.0) / delta_tau_min
    } else {
        f64::INFINITY
    };
    let cpmg = MethodRange { omega_max: pulsed_max, omega_res: inputs.tau.map(|t| PI / t) };
    let comb = MethodRange { omega_max: pulsed_max, omega_res: inputs.tau_b.map(|t| 2.0 * PI / t) };
    let dpss = inputs.dt.map(|dt| {
        let nyquist = PI / dt;
        let cap = inputs.awg_min_dt.map(|d| PI / d).unwrap_or(f64::INFINITY);
        MethodRange { omega_max: nyquist.min(cap), omega_res: inputs.shift_spacing }
    });
    ScanRangeReport { delta_tau_min, cpmg, comb, dpss }
}
