//! Spectrum estimators: from measured signal projections to noise densities.
//!
//! The workhorse is the single-taper (eigenestimate) inversion of the overlap
//! law: with a filter concentrated in a band `B` and a locally flat spectrum,
//!
//! `S(omega_s) ~ pi * S_meas / int_B F domega = S_meas / A_B`,
//!
//! where `A_B = (1/pi) int_B F domega` is the band-integral convention used
//! throughout. On top of it sit the multitaper combination, the simultaneous
//! dephasing/amplitude estimator, a two-stage Bayesian refinement (coarse
//! prior from wide-band filters, posterior update from narrowband ones), the
//! repeated-base-sequence comb inversion, and the n-pulse train estimator.
//!
//! Closed forms for the regularized prior and the posterior:
//!
//! `S_0 = (Fc' Sc^-1 Fc + 2 lambda^2 D^2)^-1 (Fc' Sc^-1 y_c + 2 lambda^2 D^2 s_bar)`
//! `Sig_0 = (Fc' Sc^-1 Fc + 2 lambda^2 D^2)^-1`
//! `S_hat = (Ff' Sf^-1 Ff + Sig_0^-1)^-1 (Ff' Sf^-1 y_f + Sig_0^-1 S_0)`
//!
//! The selector `D` is dimensionless: the regularizer acts on spectra
//! non-dimensionalized by a scale (default: the mean of the coarse
//! eigenestimates), so `lambda` carries meaning independent of units.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::filters::{band_integral, FilterError, FilterFunction};

#[derive(Debug, Clone, PartialEq)]
pub enum ReconstructionError {
    /// Band integral too small to invert.
    DegenerateBand { band: (f64, f64), integral: f64 },
    /// Regularized system numerically singular (condition above 1e12).
    SingularSystem { condition: f64 },
    /// Comb-inversion system condition above 1e8.
    IllConditioned { condition: f64 },
    /// Invalid input, with the offending field named.
    InvalidArgument(String),
    Filter(FilterError),
}

impl fmt::Display for ReconstructionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReconstructionError::DegenerateBand { band, integral } => write!(
                f,
                "band ({:.6e}, {:.6e}) integral {integral:.6e} too small to invert",
                band.0, band.1
            ),
            ReconstructionError::SingularSystem { condition } => {
                write!(f, "regularized system is numerically singular (condition {condition:.3e})")
            }
            ReconstructionError::IllConditioned { condition } => {
                write!(f, "comb inversion ill-conditioned (condition {condition:.3e})")
            }
            ReconstructionError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            ReconstructionError::Filter(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ReconstructionError {}

impl From<FilterError> for ReconstructionError {
    fn from(e: FilterError) -> Self {
        ReconstructionError::Filter(e)
    }
}

const SINGULAR_CONDITION: f64 = 1.0e12;
const ILL_CONDITION: f64 = 1.0e8;
const MIN_BAND_INTEGRAL: f64 = 1.0e-300;

/// A measured value with its standard error.
pub type Measurement = (f64, f64);

/// One point of a reconstructed spectrum.
#[derive(Debug, Clone, Copy)]
pub struct PointEstimate {
    /// Band-center frequency (rad/time).
    pub omega: f64,
    pub value: f64,
    pub stderr: f64,
    /// Band the estimate averages over.
    pub band: (f64, f64),
}

/// Reconstruction output rows plus method metadata.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub method: String,
    pub points: Vec<PointEstimate>,
}

impl ReconstructionResult {
    pub fn new(method: impl Into<String>, mut points: Vec<PointEstimate>) -> Self {
        points.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
        ReconstructionResult { method: method.into(), points }
    }
}

/// Single-taper (eigenestimate) inversion: `S(omega_s) = S_meas / A_B` with
/// `A_B = (1/pi) int_B F domega`; the standard error scales the same way.
pub fn single_taper(
    signal: Measurement,
    ff: &FilterFunction,
    band: (f64, f64),
) -> Result<PointEstimate, ReconstructionError> {
    let a = band_integral(ff, band)?;
    if !(a > MIN_BAND_INTEGRAL) {
        return Err(ReconstructionError::DegenerateBand { band, integral: a });
    }
    let omega = ff.passband.map_or(0.5 * (band.0 + band.1), |b| 0.5 * (b.0 + b.1));
    Ok(PointEstimate { omega, value: signal.0 / a, stderr: signal.1 / a, band })
}

/// Amplitude-spectrum analogue of [`single_taper`] using the amplitude
/// filter; the algebra is identical.
pub fn amplitude_estimate(
    signal: Measurement,
    ff_omega: &FilterFunction,
    band: (f64, f64),
) -> Result<PointEstimate, ReconstructionError> {
    single_taper(signal, ff_omega, band)
}

/// Inputs for one band center of a simultaneous two-axis reconstruction.
#[derive(Debug, Clone)]
pub struct AxisRecord {
    /// Band-center frequency (rad/time).
    pub omega_s: f64,
    /// Measured `S_y` (dephasing projection).
    pub sy: Measurement,
    /// Measured `S_x` (amplitude projection).
    pub sx: Measurement,
    pub fz: FilterFunction,
    pub f_omega: FilterFunction,
    pub band: (f64, f64),
}

/// Simultaneous dephasing and amplitude reconstruction from shared three-axis
/// records: `S_y` inverts through the dephasing filter, `S_x` through the
/// amplitude filter.
pub fn multi_axis(
    records: &[AxisRecord],
) -> Result<(ReconstructionResult, ReconstructionResult), ReconstructionError> {
    if records.is_empty() {
        return Err(ReconstructionError::InvalidArgument("records: empty".into()));
    }
    let mut dephasing = Vec::with_capacity(records.len());
    let mut amplitude = Vec::with_capacity(records.len());
    for r in records {
        dephasing.push(single_taper(r.sy, &r.fz, r.band)?);
        amplitude.push(amplitude_estimate(r.sx, &r.f_omega, r.band)?);
    }
    Ok((
        ReconstructionResult::new("dpss-dephasing", dephasing),
        ReconstructionResult::new("dpss-amplitude", amplitude),
    ))
}

/// Multitaper point estimate: weighted per-order measurements divided by the
/// band integral of the composite filter.
pub fn multitaper_estimate(
    measurements: &[Measurement],
    weights: &[f64],
    composite: &FilterFunction,
    band: (f64, f64),
) -> Result<PointEstimate, ReconstructionError> {
    if measurements.len() != weights.len() || measurements.is_empty() {
        return Err(ReconstructionError::InvalidArgument(
            "measurements/weights: lengths differ or empty".into(),
        ));
    }
    let combined: f64 = measurements.iter().zip(weights).map(|(m, c)| c * m.0).sum();
    let var: f64 = measurements.iter().zip(weights).map(|(m, c)| (c * m.1).powi(2)).sum();
    single_taper((combined, var.sqrt()), composite, band)
}

/// Contiguous frequency segments covering a scan range.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGrid {
    /// `boundaries[l] .. boundaries[l+1]` is segment `l`; strictly ascending.
    pub boundaries: Vec<f64>,
}

impl SegmentGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, ReconstructionError> {
        if boundaries.len() < 2 {
            return Err(ReconstructionError::InvalidArgument(
                "boundaries: need at least two entries".into(),
            ));
        }
        if boundaries.windows(2).any(|p| p[1] <= p[0]) {
            return Err(ReconstructionError::InvalidArgument(
                "boundaries: not strictly ascending".into(),
            ));
        }
        Ok(SegmentGrid { boundaries })
    }

    /// Segments from band-center frequencies: boundaries at midpoints of
    /// adjacent centers, extended to `lo` and `hi` at the edges.
    pub fn around_centers(centers: &[f64], lo: f64, hi: f64) -> Result<Self, ReconstructionError> {
        if centers.is_empty() {
            return Err(ReconstructionError::InvalidArgument("centers: empty".into()));
        }
        let mut sorted = centers.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut boundaries = Vec::with_capacity(sorted.len() + 1);
        boundaries.push(lo);
        for pair in sorted.windows(2) {
            boundaries.push(0.5 * (pair[0] + pair[1]));
        }
        boundaries.push(hi);
        SegmentGrid::new(boundaries)
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segment(&self, l: usize) -> (f64, f64) {
        (self.boundaries[l], self.boundaries[l + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|l| 0.5 * (self.boundaries[l] + self.boundaries[l + 1])).collect()
    }

    /// Index of the segment containing `omega`.
    pub fn locate(&self, omega: f64) -> Option<usize> {
        if omega < self.boundaries[0] || omega >= *self.boundaries.last().unwrap() {
            return None;
        }
        let idx = match self.boundaries.binary_search_by(|p| p.partial_cmp(&omega).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Some(idx.min(self.len() - 1))
    }
}

/// Filter matrix `M[s, l] = (1/pi) int_(segment l) F_s domega`.
pub fn filter_matrix(
    segments: &SegmentGrid,
    ffs: &[FilterFunction],
) -> Result<DMatrix<f64>, ReconstructionError> {
    let rows = ffs.len();
    let cols = segments.len();
    let mut m = DMatrix::zeros(rows, cols);
    for (s, ff) in ffs.iter().enumerate() {
        let grid_hi = *ff.omega.last().unwrap();
        let grid_lo = ff.omega[0];
        for l in 0..cols {
            let (lo, hi) = segments.segment(l);
            // Clip to grid coverage; filters vanish beyond it.
            let lo = lo.max(grid_lo);
            let hi = hi.min(grid_hi);
            if hi <= lo {
                continue;
            }
            m[(s, l)] = match band_integral(ff, (lo, hi)) {
                Ok(v) => v,
                Err(FilterError::DegenerateBand { .. }) => 0.0,
                Err(e) => return Err(e.into()),
            };
        }
    }
    Ok(m)
}

/// The two-stage Bayesian model: coarse-stage data plus regularization.
#[derive(Debug, Clone)]
pub struct BayesianModel {
    pub segments: SegmentGrid,
    /// Coarse filter matrix, `M_c x L`.
    pub coarse_matrix: DMatrix<f64>,
    /// Coarse measurements, length `M_c`.
    pub coarse_data: DVector<f64>,
    /// Coarse measurement variances (diagonal covariance), length `M_c`.
    pub coarse_variance: DVector<f64>,
    /// Regularizer strength.
    pub lambda: f64,
    /// Diagonal selector `D` (0/1 per segment).
    pub selector: DVector<f64>,
    /// Reference vector the regularizer pulls toward, length `L`.
    pub reference: DVector<f64>,
    /// Non-dimensionalization scale for the regularizer.
    pub scale: f64,
}

impl BayesianModel {
    /// Model with the regularizer active on every segment and the reference
    /// (and scale) set to the mean of the coarse eigenestimates.
    pub fn with_uniform_selector(
        segments: SegmentGrid,
        coarse_matrix: DMatrix<f64>,
        coarse_data: DVector<f64>,
        coarse_variance: DVector<f64>,
        lambda: f64,
        eigenestimate_mean: f64,
    ) -> Self {
        let l = segments.len();
        BayesianModel {
            segments,
            coarse_matrix,
            coarse_data,
            coarse_variance,
            lambda,
            selector: DVector::from_element(l, 1.0),
            reference: DVector::from_element(l, eigenestimate_mean),
            scale: eigenestimate_mean,
        }
    }

    fn validate(&self) -> Result<(), ReconstructionError> {
        let l = self.segments.len();
        if self.coarse_matrix.ncols() != l || self.selector.len() != l || self.reference.len() != l
        {
            return Err(ReconstructionError::InvalidArgument(
                "segments: dimension mismatch with matrix/selector/reference".into(),
            ));
        }
        if self.coarse_matrix.nrows() != self.coarse_data.len()
            || self.coarse_data.len() != self.coarse_variance.len()
        {
            return Err(ReconstructionError::InvalidArgument(
                "coarse_data: dimension mismatch".into(),
            ));
        }
        if self.coarse_variance.iter().any(|&v| !(v > 0.0)) {
            return Err(ReconstructionError::InvalidArgument(
                "coarse_variance: entries must be positive".into(),
            ));
        }
        if !(self.scale > 0.0) {
            return Err(ReconstructionError::InvalidArgument("scale: must be positive".into()));
        }
        Ok(())
    }

    /// The objective whose minimizer is the prior mean:
    /// `1/2 (y - F S)' Sc^-1 (y - F S) + lambda^2 |D (S - s_bar) / scale|^2`.
    pub fn objective(&self, s: &DVector<f64>) -> f64 {
        let resid = &self.coarse_data - &self.coarse_matrix * s;
        let chi2: f64 = resid.iter().zip(self.coarse_variance.iter()).map(|(r, v)| r * r / v).sum();
        let reg: f64 = (0..s.len())
            .map(|l| {
                let d = self.selector[l] * (s[l] - self.reference[l]) / self.scale;
                d * d
            })
            .sum();
        0.5 * chi2 + self.lambda * self.lambda * reg
    }
}

/// A Gaussian state over segment averages: mean, covariance, and the
/// precision kept alongside so the posterior update avoids a second
/// inversion.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub condition: f64,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn solve_spd(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, f64), ReconstructionError> {
    let condition = condition_number(m);
    if !(condition < SINGULAR_CONDITION) {
        return Err(ReconstructionError::SingularSystem { condition });
    }
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or(ReconstructionError::SingularSystem { condition })?;
    let solution = chol.solve(rhs);
    let inverse = chol.inverse();
    Ok((solution, inverse, condition))
}

/// Regularized maximum-likelihood prior from the coarse stage.
pub fn build_prior(model: &BayesianModel) -> Result<GaussianState, ReconstructionError> {
    model.validate()?;
    let sc_inv = DMatrix::from_diagonal(&model.coarse_variance.map(|v| 1.0 / v));
    let ft_sc = model.coarse_matrix.transpose() * &sc_inv;
    let mut precision = &ft_sc * &model.coarse_matrix;
    let lam2 = 2.0 * model.lambda * model.lambda / (model.scale * model.scale);
    for l in 0..model.segments.len() {
        precision[(l, l)] += lam2 * model.selector[l] * model.selector[l];
    }
    let mut rhs = &ft_sc * &model.coarse_data;
    for l in 0..model.segments.len() {
        rhs[l] += lam2 * model.selector[l] * model.selector[l] * model.reference[l];
    }
    let (mean, covariance, condition) = solve_spd(&precision, &rhs)?;
    Ok(GaussianState { mean, covariance, precision, condition })
}

/// Posterior update from the fine stage:
/// `S_hat = (Ff' Sf^-1 Ff + Sig_0^-1)^-1 (Ff' Sf^-1 y_f + Sig_0^-1 S_0)`.
pub fn posterior_update(
    prior: &GaussianState,
    fine_matrix: &DMatrix<f64>,
    fine_data: &DVector<f64>,
    fine_variance: &DVector<f64>,
) -> Result<GaussianState, ReconstructionError> {
    let l = prior.mean.len();
    if fine_matrix.ncols() != l
        || fine_matrix.nrows() != fine_data.len()
        || fine_data.len() != fine_variance.len()
    {
        return Err(ReconstructionError::InvalidArgument("fine_matrix: dimension mismatch".into()));
    }
    if fine_variance.iter().any(|&v| !(v > 0.0)) {
        return Err(ReconstructionError::InvalidArgument(
            "fine_variance: entries must be positive".into(),
        ));
    }
    let sf_inv = DMatrix::from_diagonal(&fine_variance.map(|v| 1.0 / v));
    let ft_sf = fine_matrix.transpose() * &sf_inv;
    let precision = &ft_sf * fine_matrix + &prior.precision;
    let rhs = &ft_sf * fine_data + &prior.precision * &prior.mean;
    let (mean, covariance, condition) = solve_spd(&precision, &rhs)?;
    Ok(GaussianState { mean, covariance, precision, condition })
}

/// Segment-level result rows from a Gaussian state.
pub fn state_to_result(
    state: &GaussianState,
    segments: &SegmentGrid,
    method: &str,
) -> ReconstructionResult {
    let points = (0..segments.len())
        .map(|l| {
            let band = segments.segment(l);
            PointEstimate {
                omega: 0.5 * (band.0 + band.1),
                value: state.mean[l],
                stderr: state.covariance[(l, l)].max(0.0).sqrt(),
                band,
            }
        })
        .collect();
    ReconstructionResult::new(method, points)
}

/// One repeated-base-sequence measurement: a base of duration
/// `tau_base / m` repeated `repetitions` times, with the `|F_zz|^2` of a
/// single repetition evaluated on a grid covering all needed harmonics.
#[derive(Debug, Clone)]
pub struct CombSequence {
    /// Base-duration divisor (the base lasts `tau_base / m`).
    pub m: usize,
    pub repetitions: usize,
    /// Measured `S_z` projection of the full repeated sequence.
    pub measurement: Measurement,
    /// `|F_zz|^2` of one repetition.
    pub fzz_sq: FilterFunction,
}

/// Harmonic-comb linear inversion over base sequences with durations
/// `tau_base / m`. Builds
///
/// `S_meas_j = (2 M_j / tau_j) sum_k |F_j(k omega_0_j)|^2 S(k omega_0_j)`
///
/// with `omega_0_j = 2 pi m_j / tau_base`, truncated at `m_max` base
/// harmonics, and solves the stacked system by least squares. Returns the
/// estimates and the system condition number.
pub fn as_inversion(
    sequences: &[CombSequence],
    tau_base: f64,
    m_max: usize,
) -> Result<(ReconstructionResult, f64), ReconstructionError> {
    if sequences.len() < m_max {
        return Err(ReconstructionError::InvalidArgument(format!(
            "sequences: need at least m_max = {m_max} rows, got {}",
            sequences.len()
        )));
    }
    let omega_0 = 2.0 * std::f64::consts::PI / tau_base;
    let rows = sequences.len();
    let mut a = DMatrix::zeros(rows, m_max);
    let mut b = DVector::zeros(rows);
    let mut weights = DVector::zeros(rows);
    for (j, seq) in sequences.iter().enumerate() {
        if seq.m == 0 {
            return Err(ReconstructionError::InvalidArgument("m: must be positive".into()));
        }
        let tau_j = tau_base / seq.m as f64;
        let gain = 2.0 * seq.repetitions as f64 / tau_j;
        // Sequence j probes the harmonics of its own base: multiples of m_j.
        for i in 1..=m_max {
            if i % seq.m != 0 {
                continue;
            }
            let omega = i as f64 * omega_0;
            let f = seq.fzz_sq.value_at(omega)?;
            a[(j, i - 1)] = gain * f;
        }
        b[j] = seq.measurement.0;
        weights[j] = seq.measurement.1.max(1e-300);
    }

    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let condition = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    if !(condition < ILL_CONDITION) {
        return Err(ReconstructionError::IllConditioned { condition });
    }
    let solution =
        svd.solve(&b, max_sv * 1e-14).map_err(|_| ReconstructionError::IllConditioned { condition })?;

    // First-order uncertainty: per-row standard errors through the
    // pseudo-inverse.
    let pinv = a
        .pseudo_inverse(max_sv * 1e-14)
        .map_err(|_| ReconstructionError::IllConditioned { condition })?;
    let points = (0..m_max)
        .map(|i| {
            let omega = (i + 1) as f64 * omega_0;
            let var: f64 = (0..rows).map(|j| (pinv[(i, j)] * weights[j]).powi(2)).sum();
            PointEstimate {
                omega,
                value: solution[i],
                stderr: var.sqrt(),
                band: (omega - omega_0 / 2.0, omega + omega_0 / 2.0),
            }
        })
        .collect();
    Ok((ReconstructionResult::new("comb-inversion", points), condition))
}

/// One n-pulse train measurement with the numeric `|F_zz|^2` of the train.
#[derive(Debug, Clone)]
pub struct NPulseMeasurement {
    pub n: usize,
    pub measurement: Measurement,
    pub fzz_sq: FilterFunction,
}

/// n-pulse train estimator at `omega = n pi / tau`: a single-taper-style
/// inversion of `|F_zz|^2` over the passband `B_n` around the main peak,
/// located numerically as the interval between adjacent filter minima.
pub fn cpmg_npulse_estimate(
    measurements: &[NPulseMeasurement],
    tau: f64,
) -> Result<ReconstructionResult, ReconstructionError> {
    if measurements.is_empty() {
        return Err(ReconstructionError::InvalidArgument("measurements: empty".into()));
    }
    let mut points = Vec::with_capacity(measurements.len());
    for m in measurements {
        let omega_p = m.n as f64 * std::f64::consts::PI / tau;
        let band = passband_between_minima(&m.fzz_sq, omega_p)?;
        let a = band_integral(&m.fzz_sq, band)?;
        if !(a > MIN_BAND_INTEGRAL) {
            return Err(ReconstructionError::DegenerateBand { band, integral: a });
        }
        points.push(PointEstimate {
            omega: omega_p,
            value: m.measurement.0 / a,
            stderr: m.measurement.1 / a,
            band,
        });
    }
    Ok(ReconstructionResult::new("cpmg-n-pulse", points))
}

/// Passband around the main peak near `omega_p`: climb to the local peak,
/// then walk outward to the nearest local minima on both sides.
pub fn passband_between_minima(
    ff: &FilterFunction,
    omega_p: f64,
) -> Result<(f64, f64), ReconstructionError> {
    let v = ff
        .real_values()
        .ok_or_else(|| ReconstructionError::InvalidArgument("ff: real filter required".into()))?;
    let grid = &ff.omega;
    if grid.len() < 8 {
        return Err(ReconstructionError::InvalidArgument("ff: grid too short".into()));
    }
    let mut idx = match grid.binary_search_by(|p| p.partial_cmp(&omega_p).unwrap()) {
        Ok(i) => i,
        Err(i) => i.min(grid.len() - 1),
    };
    // The peak may sit slightly off n pi / tau for finite pulses: search a
    // small neighborhood for the tallest sample first.
    let w = (grid.len() / 50).max(3);
    let lo = idx.saturating_sub(w);
    let hi = (idx + w).min(grid.len() - 1);
    idx = (lo..=hi).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).unwrap();
    while idx + 1 < v.len() && v[idx + 1] > v[idx] {
        idx += 1;
    }
    while idx > 0 && v[idx - 1] > v[idx] {
        idx -= 1;
    }
    let mut left = idx;
    while left > 0 && v[left - 1] < v[left] {
        left -= 1;
    }
    let mut right = idx;
    while right + 1 < v.len() && v[right + 1] < v[right] {
        right += 1;
    }
    if left == idx || right == idx {
        return Err(ReconstructionError::InvalidArgument(
            "ff: no local minima bracket the requested peak".into(),
        ));
    }
    Ok((grid[left], grid[right]))
}
