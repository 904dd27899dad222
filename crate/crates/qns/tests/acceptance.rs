//! Acceptance suite: one test per shipped capability, each printing a
//! `[PASS]` line with its runtime. Run serially to get faithful timings:
//!
//! ```text
//! cargo test --test acceptance -- --test-threads=1 --nocapture
//! ```
//!
//! The tests also serialize themselves through a mutex, so parallel harness
//! settings cannot skew the per-test budgets.

use std::f64::consts::PI;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use qns::cli::output::read_table;
use qns::cli::presets::preset;
use qns::cli::run::{compare_outcome, mean_abs_rel_err, run_command, Command};
use qns::dpss::{compute_dpss, concentration_ratio, dpswf_at, DpssParams};
use qns::filters::{
    fd_dephasing_ff, fundamental_ffs, passband, pulse_sequence_fzz_sq,
    uniform_grid,
};
use qns::noise::{
    default_comb_spacing, ensemble, NoiseComponent, Spectrum, TimeGrid,
};
use qns::reconstruction::{build_prior, posterior_update, BayesianModel, SegmentGrid};
use qns::simulator::{
    ensemble_moments, higher_order_diagnostic, tomography, Mode, NoisePair,
    ShotConfig, SimOptions,
};
use qns::waveforms::{
    embedded_dd_waveform, fd_dpss_waveform, pulsed_dpss, Limits, ScaleMode,
};

fn lock() -> MutexGuard<'static, ()> {
    static GATE: OnceLock<Mutex<()>> = OnceLock::new();
    GATE.get_or_init(|| Mutex::new(())).lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: &str, started: Instant, budget_s: f64, detail: String) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("[PASS] {criterion}: {detail} ({elapsed:.1} s, budget {budget_s:.0} s)");
    assert!(elapsed <= budget_s, "{criterion} exceeded its runtime budget: {elapsed:.1} s");
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn fresh_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("qns-acceptance-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Criterion 1: DPSWF in-band energy fraction equals the concentration
/// eigenvalue within 1e-6 for N = 128, W = 4/N, k = 0..5; lambda_0 at least
/// 0.99999.
#[test]
fn c01_dpss_concentration() {
    let _gate = lock();
    let start = Instant::now();
    let set = compute_dpss(DpssParams::new(128, 4.0 / 128.0, 5).unwrap()).unwrap();
    let dt = 5.0e-6;
    let mut worst = 0.0f64;
    for k in 0..=5 {
        let ratio = concentration_ratio(&set, k, dt).unwrap();
        let lambda = set.eigenvalue(k).unwrap();
        let gap = (ratio - lambda).abs();
        worst = worst.max(gap);
        assert!(gap <= 1.0e-6, "order {k}: concentration {ratio} vs lambda {lambda}");
    }
    let lambda0 = set.eigenvalue(0).unwrap();
    assert!(lambda0 >= 0.99999, "lambda_0 = {lambda0}");
    report(
        "criterion 1 (DPSS concentration)",
        start,
        5.0,
        format!("max |ratio - lambda| = {worst:.2e}, lambda_0 = {lambda0:.8}"),
    );
}

/// Criterion 2: closed-form vs numeric filters for the finite-difference
/// drive (N = 600, W = 2/N, k = 0, shift 10 kHz, max Theta = 0.05 rad):
/// dephasing filter within 5% rel-L2 over the passband, and the numeric
/// amplitude/dephasing ratio equal to omega^2/4 within 5% pointwise.
#[test]
fn c02_closed_form_filter_agreement() {
    let _gate = lock();
    let start = Instant::now();
    let n = 600;
    let set = compute_dpss(DpssParams::new(n, 2.0 / n as f64, 0).unwrap()).unwrap();
    let dt = 5.0e-6;
    let omega_s = 2.0 * PI * 10.0e3;
    let fd = fd_dpss_waveform(&set, 0, omega_s, dt, ScaleMode::MaxTheta(0.05), &Limits::default())
        .unwrap();
    let band = passband(omega_s, set.params().w, dt);
    let grid = uniform_grid(band.0, band.1, 800);
    let f = fundamental_ffs(&fd.profile(), &grid).unwrap();
    let numeric_fz = f.dephasing_ff();
    let numeric_fo = f.amplitude_ff();

    let omega_scale = fd.meta.energy_equivalent_scale.unwrap();
    let closed = fd_dephasing_ff(&set, 0, omega_s, omega_scale, dt, &grid).unwrap();
    let err = rel_l2(numeric_fz.real_values().unwrap(), closed.real_values().unwrap());
    assert!(err <= 0.05, "closed-form dephasing filter rel-L2 = {err}");

    let mut worst_ratio = 0.0f64;
    for (i, &omega) in grid.iter().enumerate() {
        let fz = numeric_fz.real_values().unwrap()[i];
        let fo = numeric_fo.real_values().unwrap()[i];
        if fz <= 1e-12 || fo <= 1e-12 {
            continue;
        }
        let dev = (fo / fz / (omega * omega / 4.0) - 1.0).abs();
        worst_ratio = worst_ratio.max(dev);
        assert!(dev <= 0.05, "F_Omega/F_z deviates from omega^2/4 by {dev} at {omega}");
    }
    report(
        "criterion 2 (closed-form filter agreement)",
        start,
        30.0,
        format!("rel-L2 = {:.3}%, worst ratio deviation = {:.3}%", 100.0 * err, 100.0 * worst_ratio),
    );
}

/// Criterion 3: Monte Carlo error-vector moments obey the overlap law
/// `<a^2> = (1/pi) int F S domega` within 3 standard errors at 500
/// realizations, for a white and a Gaussian-bump spectrum on both axes.
#[test]
fn c03_overlap_integral_law() {
    let _gate = lock();
    let start = Instant::now();
    let n = 600;
    let dt = 5.0e-6;
    let tau = n as f64 * dt;
    let set = compute_dpss(DpssParams::new(n, 2.0 / n as f64, 0).unwrap()).unwrap();
    let omega_s = 2.0 * PI * 10.0e3;
    let fd = fd_dpss_waveform(&set, 0, omega_s, dt, ScaleMode::MaxTheta(0.05), &Limits::default())
        .unwrap();
    let profile = fd.profile();

    let grid_f = uniform_grid(0.0, 2.0 * PI * 35.0e3, 6000);
    let f = fundamental_ffs(&profile, &grid_f).unwrap();
    let fz = f.dephasing_ff();
    let fo = f.amplitude_ff();

    let overlap = |ff: &qns::filters::FilterFunction, spec: &Spectrum| -> f64 {
        let v = ff.real_values().unwrap();
        let mut acc = 0.0;
        for i in 1..grid_f.len() {
            let a = v[i - 1] * spec.value(grid_f[i - 1]);
            let b = v[i] * spec.value(grid_f[i]);
            acc += 0.5 * (a + b) * (grid_f[i] - grid_f[i - 1]);
        }
        acc / PI
    };

    let grid_t = TimeGrid::covering(tau, n, 8);
    let d_omega = default_comb_spacing(tau);
    let mut summary = Vec::new();
    for (name, spec_z, spec_o) in [
        (
            "white",
            Spectrum::white(1.0e-2, 2.0 * PI * 30.0e3),
            Spectrum::white(1.0e-9, 2.0 * PI * 30.0e3),
        ),
        (
            "bump",
            Spectrum::gaussian_bump(omega_s, 2.0 * PI * 2.0e3, 3.0e-2),
            Spectrum::gaussian_bump(omega_s, 2.0 * PI * 2.0e3, 3.0e-9),
        ),
    ] {
        let reals_z =
            ensemble(&spec_z, &grid_t, d_omega, 311, 500, NoiseComponent::Dephasing).unwrap();
        let pairs: Vec<NoisePair> = reals_z.iter().map(NoisePair::dephasing_only).collect();
        let m = ensemble_moments(&profile, &pairs, &SimOptions::default()).unwrap();
        let predicted = overlap(&fz, &spec_z);
        let sigmas = (m.mean_sq[1] - predicted).abs() / m.stderr[1];
        assert!(
            sigmas <= 3.0,
            "{name} dephasing: <a_y^2> = {} vs {} ({sigmas:.1} se)",
            m.mean_sq[1],
            predicted
        );

        let reals_o =
            ensemble(&spec_o, &grid_t, d_omega, 317, 500, NoiseComponent::Amplitude).unwrap();
        let pairs_o: Vec<NoisePair> = reals_o.iter().map(NoisePair::amplitude_only).collect();
        let mo = ensemble_moments(&profile, &pairs_o, &SimOptions::default()).unwrap();
        let predicted_o = overlap(&fo, &spec_o);
        let sigmas_o = (mo.mean_sq[0] - predicted_o).abs() / mo.stderr[0];
        assert!(
            sigmas_o <= 3.0,
            "{name} amplitude: <a_x^2> = {} vs {} ({sigmas_o:.1} se)",
            mo.mean_sq[0],
            predicted_o
        );
        summary.push(format!("{name}: a_y {sigmas:.1} se, a_x {sigmas_o:.1} se"));
    }
    report("criterion 3 (overlap-integral law)", start, 120.0, summary.join("; "));
}

/// Criterion 4: exact-propagator tomography matches first-order
/// probabilities within 0.5% absolute in the weak-noise regime, and the
/// embedded-decoupling waveform carries less higher-order bias than the
/// plain finite difference under strong quasistatic noise (paired one-sided
/// test at 95%).
#[test]
fn c04_magnus_validity_and_embedded_dd() {
    let _gate = lock();
    let start = Instant::now();
    let n = 600;
    let dt = 5.0e-6;
    let tau = n as f64 * dt;
    let set = compute_dpss(DpssParams::new(n, 2.0 / n as f64, 0).unwrap()).unwrap();
    let omega_s = 2.0 * PI * 10.0e3;
    let mode = ScaleMode::MaxTheta(0.05);
    let fd = fd_dpss_waveform(&set, 0, omega_s, dt, mode, &Limits::default()).unwrap();
    let dd = embedded_dd_waveform(&set, 0, omega_s, dt, mode, &Limits::default()).unwrap();
    let grid_t = TimeGrid::covering(tau, n, 8);
    let d_omega = default_comb_spacing(tau);
    let opts = SimOptions::default();

    // Weak noise: probabilities agree within 0.5% absolute while max |a|
    // stays at or below ~0.05.
    let weak = Spectrum::gaussian_bump(2.0 * PI * 2.0e3, 2.0 * PI * 1.0e3, 0.35);
    let reals = ensemble(&weak, &grid_t, d_omega, 41, 300, NoiseComponent::Dephasing).unwrap();
    let pairs: Vec<NoisePair> = reals.iter().map(NoisePair::dephasing_only).collect();
    let m = ensemble_moments(&fd.profile(), &pairs, &opts).unwrap();
    let max_a = m.mean_sq.iter().map(|v| v.sqrt()).fold(0.0f64, f64::max);
    assert!(max_a <= 0.06, "rms |a| component {max_a} too large for the weak-noise check");
    let exact =
        tomography(&fd.profile(), &pairs, Mode::Exact, &ShotConfig::default(), &opts).unwrap();
    let first =
        tomography(&fd.profile(), &pairs, Mode::FirstOrder, &ShotConfig::default(), &opts)
            .unwrap();
    let mut worst_gap = 0.0f64;
    for axis in 0..3 {
        let gap = (exact.p[axis] - first.p[axis]).abs();
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 5.0e-3, "axis {axis}: exact {} vs first order {}", exact.p[axis], first.p[axis]);
    }

    // Strong noise with a quasistatic component: the embedded pi rotations
    // echo away the cos-weighted accumulation that feeds the higher-order
    // terms. Paired per-batch one-sided t test on |bias|.
    let strong = Spectrum::Sum(vec![
        Spectrum::gaussian_bump(2.0 * PI * 60.0, 2.0 * PI * 40.0, 8.0e3),
        Spectrum::gaussian_bump(omega_s, 2.0 * PI * 1.5e3, 10.0),
    ]);
    let d_omega_fine = 2.0 * PI / (8.0 * tau);
    let reals =
        ensemble(&strong, &grid_t, d_omega_fine, 43, 300, NoiseComponent::Dephasing).unwrap();
    let pairs: Vec<NoisePair> = reals.iter().map(NoisePair::dephasing_only).collect();
    let fd_diag = higher_order_diagnostic(&fd.profile(), &pairs, &opts).unwrap();
    let dd_diag = higher_order_diagnostic(&dd.profile(), &pairs, &opts).unwrap();
    assert!(
        dd_diag.bias_fraction.abs() < fd_diag.bias_fraction.abs(),
        "embedded bias {} not below plain bias {}",
        dd_diag.bias_fraction,
        fd_diag.bias_fraction
    );
    let batches = 20;
    let per = pairs.len() / batches;
    let mut diffs = Vec::with_capacity(batches);
    for b in 0..batches {
        let slice = b * per..(b + 1) * per;
        let bias = |diag: &qns::simulator::HigherOrderDiagnostic| -> f64 {
            let rows = &diag.per_realization[slice.clone()];
            let exact: f64 = rows.iter().map(|r| r.0).sum::<f64>() / per as f64;
            let first: f64 = rows.iter().map(|r| r.1).sum::<f64>() / per as f64;
            (exact - first).abs() / first
        };
        diffs.push(bias(&fd_diag) - bias(&dd_diag));
    }
    let mean = diffs.iter().sum::<f64>() / batches as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let t = mean / (var / batches as f64).sqrt();
    // One-sided 95% critical value for 19 degrees of freedom.
    assert!(t > 1.729, "paired t statistic {t:.2} fails the 95% one-sided test");
    report(
        "criterion 4 (Magnus validity and embedded decoupling)",
        start,
        240.0,
        format!(
            "weak-noise probability gap {worst_gap:.2e}; bias {:.1}% (plain) vs {:.1}% \
             (embedded), paired t = {t:.1}",
            100.0 * fd_diag.bias_fraction,
            100.0 * dd_diag.bias_fraction
        ),
    );
}

/// Criterion 5: two-stage reconstruction of the mixed 1/f-plus-spurs
/// spectrum recovers every segment whose average truth exceeds 10% of the
/// peak within 25%, and both spurs appear as local maxima of the posterior.
#[test]
fn c05_two_stage_mixed_spectrum() {
    let _gate = lock();
    let start = Instant::now();
    let cfg = preset("mixed-dephasing").unwrap();
    let out = fresh_dir("mixed");
    run_command(Command::Reconstruct, &cfg, &out).unwrap();

    let posterior = read_table(&out.join("posterior.tsv")).unwrap();
    let segments = read_table(&out.join("segments.tsv")).unwrap();
    assert_eq!(posterior.len(), 19, "19 segments expected");
    let peak = segments.iter().map(|s| s[3]).fold(0.0f64, f64::max);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (p, s) in posterior.iter().zip(&segments) {
        let truth_avg = s[3];
        if truth_avg > 0.1 * peak {
            let rel = (p[1] / truth_avg - 1.0).abs();
            worst = worst.max(rel);
            checked += 1;
            assert!(
                rel <= 0.25,
                "segment at {} Hz: estimate {} vs truth {truth_avg} ({:.0}%)",
                p[0],
                p[1],
                100.0 * rel
            );
        }
    }
    assert!(checked >= 4, "too few segments above the 10% threshold: {checked}");

    // Spur segments (preset spurs at 9.2 and 10.9 kHz) are local maxima.
    let values: Vec<f64> = posterior.iter().map(|p| p[1]).collect();
    for spur_hz in [9.2e3, 10.9e3] {
        let idx = segments
            .iter()
            .position(|s| s[1] <= spur_hz && spur_hz <= s[2])
            .expect("spur inside a segment");
        let left = if idx > 0 { values[idx - 1] } else { f64::MIN };
        let right = if idx + 1 < values.len() { values[idx + 1] } else { f64::MIN };
        assert!(
            values[idx] > left && values[idx] > right,
            "spur at {spur_hz} Hz is not a local maximum"
        );
    }
    report(
        "criterion 5 (two-stage mixed-spectrum recovery)",
        start,
        300.0,
        format!("{checked} segments checked, worst error {:.1}%, both spurs resolved", 100.0 * worst),
    );
}

/// Criterion 6: simultaneous reconstruction of overlapping dephasing and
/// amplitude Gaussians from shared three-axis records recovers both within
/// 25% at band centers where the truth exceeds 20% of its peak, including
/// the overlap band.
#[test]
fn c06_multi_axis_overlapping_spectra() {
    let _gate = lock();
    let start = Instant::now();
    let cfg = preset("dual-axis").unwrap();
    let out = fresh_dir("dual");
    run_command(Command::Reconstruct, &cfg, &out).unwrap();

    let mut summary = Vec::new();
    // Peak heights from the preset truth definitions.
    for (file, peak) in
        [("reconstruction_dephasing.tsv", 40.0), ("reconstruction_amplitude.tsv", 1.2e-7)]
    {
        let rows = read_table(&out.join(file)).unwrap();
        let mut checked = 0;
        let mut overlap_checked = 0;
        let mut worst = 0.0f64;
        for r in rows {
            let (f_hz, est, truth) = (r[0], r[1], r[5]);
            if truth > 0.2 * peak {
                let rel = (est / truth - 1.0).abs();
                worst = worst.max(rel);
                checked += 1;
                if (6.0e3..=12.0e3).contains(&f_hz) {
                    overlap_checked += 1;
                }
                assert!(
                    rel <= 0.25,
                    "{file} at {f_hz} Hz: {est} vs {truth} ({:.0}%)",
                    100.0 * rel
                );
            }
        }
        assert!(checked >= 5, "{file}: too few checked band centers");
        assert!(overlap_checked >= 3, "{file}: overlap band under-covered");
        summary.push(format!("{file}: {checked} centers, worst {:.1}%", 100.0 * worst));
    }
    report("criterion 6 (simultaneous two-axis recovery)", start, 300.0, summary.join("; "));
}

/// Criterion 7: on the trapped-ion comparison, the Slepian reconstruction
/// beats the n-pulse train in mean absolute relative error over the shared
/// scan range; the n-pulse estimates overestimate at low frequency; and the
/// comb inversion develops truncation bias only when the truth has weight
/// above its harmonic cutoff.
#[test]
fn c07_method_comparison_ion() {
    let _gate = lock();
    let start = Instant::now();
    let cfg = preset("ion-comparison").unwrap();
    let outcome = compare_outcome(&cfg).unwrap();

    let (n_dpss, err_dpss) =
        mean_abs_rel_err(&outcome.dpss, &outcome.truth, 0.0, outcome.omega_shared_max);
    let (n_cpmg, err_cpmg) =
        mean_abs_rel_err(&outcome.cpmg, &outcome.truth, 0.0, outcome.omega_shared_max);
    assert!(n_dpss >= 50 && n_cpmg >= 50, "sparse comparison: {n_dpss}/{n_cpmg} points");
    assert!(
        err_dpss < err_cpmg,
        "slepian mean error {err_dpss:.3} not below n-pulse {err_cpmg:.3}"
    );

    // Positive low-frequency bias of the n-pulse estimates (below 1.5 kHz
    // the harmonics pick up the spectral bumps).
    let mut low_bias = Vec::new();
    for p in &outcome.cpmg.points {
        if p.omega < 2.0 * PI * 1.5e3 {
            low_bias.push(p.value / outcome.truth.value(p.omega) - 1.0);
        }
    }
    assert!(low_bias.len() >= 5);
    let mean_low = low_bias.iter().sum::<f64>() / low_bias.len() as f64;
    assert!(mean_low > 0.3, "n-pulse low-frequency bias {mean_low:.2} not clearly positive");

    // Comb truncation bias: rerun the comb arm with extra truth weight above
    // m_max * omega_0 (13.3 kHz), wide enough to load the out-of-range comb
    // teeth at 14.7 and 17.3 kHz. The in-range harmonic estimates inflate.
    let signed_bias = |oc: &qns::cli::run::CompareOutcome| -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for p in &oc.comb.points {
            let t = oc.truth.value(p.omega);
            if t > 0.0 {
                acc += p.value / t - 1.0;
                count += 1;
            }
        }
        acc / count as f64
    };
    let (_, err_comb_base) =
        mean_abs_rel_err(&outcome.comb, &outcome.truth, 0.0, outcome.omega_shared_max);
    let bias_base = signed_bias(&outcome);
    let mut biased_cfg = cfg.clone();
    {
        let cmp = biased_cfg.compare.as_mut().unwrap();
        cmp.shifts_count = 2;
        cmp.cpmg_n_max = 2;
        if let qns::cli::config::SpectrumConfig::OneOverF { spurs, cutoff_hz, .. } =
            &mut cmp.truth
        {
            *cutoff_hz = 25.0e3;
            spurs.push(qns::cli::config::SpurConfig {
                center_hz: 16.0e3,
                width_hz: 2.5e3,
                height: 150.0,
            });
        }
    }
    let biased = compare_outcome(&biased_cfg).unwrap();
    let (_, err_comb_biased) =
        mean_abs_rel_err(&biased.comb, &biased.truth, 0.0, biased.omega_shared_max);
    let bias_biased = signed_bias(&biased);
    assert!(err_comb_base <= 0.25, "comb baseline error {err_comb_base:.3} already biased");
    assert!(
        err_comb_biased >= 2.0 * err_comb_base,
        "comb error {err_comb_biased:.3} did not inflate over baseline {err_comb_base:.3} \
         with out-of-range weight"
    );
    assert!(
        bias_biased > bias_base + 0.15,
        "comb signed bias {bias_biased:+.3} not clearly above baseline {bias_base:+.3}"
    );
    report(
        "criterion 7 (ion-scale method comparison)",
        start,
        600.0,
        format!(
            "slepian {:.1}% < n-pulse {:.1}%; low-f bias +{:.0}%; comb {:.1}% -> {:.1}% with \
             out-of-range weight",
            100.0 * err_dpss,
            100.0 * err_cpmg,
            100.0 * mean_low,
            100.0 * err_comb_base,
            100.0 * err_comb_biased
        ),
    );
}

/// Criterion 8: the closed-form prior and posterior match brute-force
/// minimization of their objectives to 1e-6 relative on 20 random
/// well-conditioned instances.
#[test]
fn c08_bayesian_closed_forms() {
    let _gate = lock();
    let start = Instant::now();
    use nalgebra::{DMatrix, DVector};
    use rand::Rng as _;
    use rand::SeedableRng as _;

    // Finite-difference Newton step: exact for quadratics, no reuse of the
    // closed forms under test.
    fn brute_force<F: Fn(&DVector<f64>) -> f64>(objective: F, dim: usize, h: f64) -> DVector<f64> {
        let x0 = DVector::from_element(dim, 0.0);
        let f0 = objective(&x0);
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut xp = x0.clone();
            xp[i] += h;
            let mut xm = x0.clone();
            xm[i] -= h;
            grad[i] = (objective(&xp) - objective(&xm)) / (2.0 * h);
            hess[(i, i)] = (objective(&xp) - 2.0 * f0 + objective(&xm)) / (h * h);
            for j in i + 1..dim {
                let mut xpp = x0.clone();
                xpp[i] += h;
                xpp[j] += h;
                let mut xpm = x0.clone();
                xpm[i] += h;
                xpm[j] -= h;
                let mut xmp = x0.clone();
                xmp[i] -= h;
                xmp[j] += h;
                let mut xmm = x0.clone();
                xmm[i] -= h;
                xmm[j] -= h;
                let v = (objective(&xpp) - objective(&xpm) - objective(&xmp) + objective(&xmm))
                    / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let chol = nalgebra::Cholesky::new(hess).expect("oracle Hessian");
        &x0 - chol.solve(&grad)
    }

    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(900 + seed);
        let l = 5 + (seed % 5) as usize;
        let m_c = l + 2;
        let boundaries: Vec<f64> = (0..=l).map(|i| i as f64 * 50.0).collect();
        let segments = SegmentGrid::new(boundaries).unwrap();
        let matrix = DMatrix::from_fn(m_c, l, |_, _| 0.3 + rng.random::<f64>());
        let data = DVector::from_fn(m_c, |_, _| 1.0 + 3.0 * rng.random::<f64>());
        let variance = DVector::from_fn(m_c, |_, _| 0.05 + 0.3 * rng.random::<f64>());
        let mean = data.iter().sum::<f64>() / m_c as f64;
        let model = BayesianModel::with_uniform_selector(
            segments, matrix, data, variance, 0.35, mean,
        );
        let prior = build_prior(&model).unwrap();
        let oracle = brute_force(|s| model.objective(s), l, 0.5 * mean);
        for i in 0..l {
            let rel = (prior.mean[i] - oracle[i]).abs() / oracle[i].abs().max(1e-12);
            worst = worst.max(rel);
            assert!(rel <= 1.0e-6, "seed {seed} prior[{i}]: {} vs {}", prior.mean[i], oracle[i]);
        }

        // Posterior objective: fine likelihood plus prior quadratic form.
        let m_f = l + 1;
        let fine_matrix = DMatrix::from_fn(m_f, l, |_, _| 0.2 + rng.random::<f64>());
        let truth = DVector::from_fn(l, |i, _| 1.0 + 0.5 * i as f64);
        let fine_data = &fine_matrix * &truth;
        let fine_var = DVector::from_element(m_f, 0.2);
        let posterior = posterior_update(&prior, &fine_matrix, &fine_data, &fine_var).unwrap();
        let objective = |s: &DVector<f64>| -> f64 {
            let resid = &fine_data - &fine_matrix * s;
            let chi2: f64 = resid.iter().map(|r| r * r / 0.2).sum();
            let d = s - &prior.mean;
            let quad = (d.transpose() * &prior.precision * &d)[(0, 0)];
            0.5 * chi2 + 0.5 * quad
        };
        let oracle_post = brute_force(objective, l, 0.5 * mean);
        for i in 0..l {
            let rel =
                (posterior.mean[i] - oracle_post[i]).abs() / oracle_post[i].abs().max(1e-12);
            worst = worst.max(rel);
            assert!(
                rel <= 1.0e-6,
                "seed {seed} posterior[{i}]: {} vs {}",
                posterior.mean[i],
                oracle_post[i]
            );
        }
    }
    report(
        "criterion 8 (Bayesian closed forms vs brute force)",
        start,
        60.0,
        format!("20 instances, worst relative gap {worst:.2e}"),
    );
}

/// Criterion 9: the instantaneous-pulse filter of a pulsed Slepian sequence
/// matches the shifted-DPSWF composite within 10% rel-L2 in its passband
/// (in the omega_c dt <= 0.1 regime), and the periodic-segment harmonic
/// shows up at 2 pi / dt.
#[test]
fn c09_pulsed_dpss_filter() {
    let _gate = lock();
    let start = Instant::now();
    let n = 256;
    let w = 0.006;
    let dt = 1.0;
    let set = compute_dpss(DpssParams::new(n, w, 0).unwrap()).unwrap();
    let v_max = set.sequence(0).unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let c_tau = 0.3 * dt / v_max;

    // Shifted case: passband tops out at 0.088/dt, inside the omega dt <= 0.1
    // regime. The derived composite carries the cosine-splitting quarter.
    let omega_s = 0.05;
    let seq = pulsed_dpss(&set, 0, omega_s, c_tau, dt).unwrap();
    let band = passband(omega_s, w, dt);
    let grid = uniform_grid(band.0.max(1e-4), band.1, 600);
    let ff = pulse_sequence_fzz_sq(&seq, &grid).unwrap();
    let composite: Vec<f64> = grid
        .iter()
        .map(|&om| {
            let um = dpswf_at(&set, 0, dt, om - omega_s).unwrap();
            let up = dpswf_at(&set, 0, dt, om + omega_s).unwrap();
            c_tau * c_tau / 4.0 * (um * um + up * up)
        })
        .collect();
    let err_shifted = rel_l2(ff.real_values().unwrap(), &composite);
    assert!(err_shifted <= 0.10, "shifted composite rel-L2 = {err_shifted}");

    // Unshifted case: the cross term is coherent and the filter equals
    // c_tau^2 U^2 without the quarter.
    let seq0 = pulsed_dpss(&set, 0, 0.0, c_tau, dt).unwrap();
    let band0 = passband(0.0, w, dt);
    let grid0 = uniform_grid(1e-4, band0.1, 400);
    let ff0 = pulse_sequence_fzz_sq(&seq0, &grid0).unwrap();
    let composite0: Vec<f64> = grid0
        .iter()
        .map(|&om| {
            let u = dpswf_at(&set, 0, dt, om).unwrap();
            c_tau * c_tau * u * u
        })
        .collect();
    let err0 = rel_l2(ff0.real_values().unwrap(), &composite0);
    assert!(err0 <= 0.10, "unshifted composite rel-L2 = {err0}");

    // Harmonic of the periodic segment boundaries at 2 pi / dt.
    let hgrid = uniform_grid(2.0 * PI / dt - 0.5, 2.0 * PI / dt + 0.5, 2000);
    let hff = pulse_sequence_fzz_sq(&seq, &hgrid).unwrap();
    let peak = hff.argmax(None).unwrap();
    let step = hgrid[1] - hgrid[0];
    assert!(
        (peak - 2.0 * PI / dt).abs() <= 4.0 * step,
        "segment harmonic at {peak} vs {}",
        2.0 * PI / dt
    );
    report(
        "criterion 9 (pulsed Slepian filter)",
        start,
        60.0,
        format!(
            "rel-L2 shifted {:.1}%, unshifted {:.1}%, harmonic at 2 pi/dt",
            100.0 * err_shifted,
            100.0 * err0
        ),
    );
}

/// Criterion 10: rerunning a preset with the same seed reproduces every
/// output file byte for byte, through the library runner and the installed
/// binary alike.
#[test]
fn c10_deterministic_reruns() {
    let _gate = lock();
    let start = Instant::now();
    let cfg = preset("sysid-probe").unwrap();
    let out_a = fresh_dir("det-a");
    let out_b = fresh_dir("det-b");
    run_command(Command::Simulate, &cfg, &out_a).unwrap();
    run_command(Command::Simulate, &cfg, &out_b).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }

    // End to end through the binary.
    let exe = env!("CARGO_BIN_EXE_qns");
    let out_c = fresh_dir("det-c");
    let out_d = fresh_dir("det-d");
    for out in [&out_c, &out_d] {
        let status = std::process::Command::new(exe)
            .args(["dpss", "--preset", "sysid-probe", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["dpss_sequences.tsv", "dpss_eigenvalues.tsv", "dpswf.tsv", "manifest.json"] {
        let a = std::fs::read(out_c.join(name)).unwrap();
        let b = std::fs::read(out_d.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between binary reruns");
    }
    report(
        "criterion 10 (deterministic reruns)",
        start,
        120.0,
        format!("{} library files and 4 binary files byte-identical", names.len()),
    );
}
