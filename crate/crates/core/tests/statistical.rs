//! Monte Carlo validations of the statistical laws at reduced scale, with
//! fixed seeds. The heavier full-scale versions live in the acceptance suite.

use num_complex::Complex64;

use wigner_core::ensembles::{sample_wigner, EnsembleConfig, EntryDistribution, SymmetryClass};
use wigner_core::flows;
use wigner_core::numeric::{ks_two_sample, mean_se};
use wigner_core::oracles;
use wigner_core::pool::parallel_samples;
use wigner_core::rng::StreamRng;
use wigner_core::spectral::{
    classical_locations, count_in_window, eigen_decompose, empirical_stieltjes, minor_analysis,
    semicircle_density, semicircle_stieltjes,
};
use wigner_core::statistics::{
    self, bulk_indices, gap_observable, kpoint_correlation, normalized_bulk_gaps, regular_bins,
    TestFunction,
};

fn goe(n: usize, seed: u64) -> EnsembleConfig {
    EnsembleConfig::goe(n, seed)
}

/// Stieltjes transform concentrates on m_sc, and the self-consistency
/// residual |m + 1/(m + z)| stays small for most samples.
#[test]
fn stieltjes_concentration_and_self_consistency() {
    let n = 1000;
    let cfg = goe(n, 41);
    let samples = 100;
    let spectra: Vec<Vec<f64>> = parallel_samples(samples, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        eigen_decompose(&h, false).unwrap().eigenvalues
    });

    // |m_N(0.1 i) - m_sc| < 0.05 on average (law of large numbers regime)
    let z = Complex64::new(0.0, 0.1);
    let msc = semicircle_stieltjes(z).unwrap();
    let mut dev_sum = 0.0;
    for vals in &spectra {
        let spec = wigner_core::spectral::Spectrum {
            eigenvalues: vals.clone(),
            eigenvectors: None,
        };
        dev_sum += (empirical_stieltjes(&spec, z).unwrap() - msc).norm();
    }
    let mean_dev = dev_sum / samples as f64;
    assert!(mean_dev < 0.05, "mean |m - m_sc| = {mean_dev}");

    // residual of the self-consistent equation at eta = K N^(-0.8)
    let eta = 10.0 * (n as f64).powf(-0.8);
    let mut ok = 0usize;
    let mut total = 0usize;
    for vals in &spectra {
        for e in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let z = Complex64::new(e, eta);
            let spec = wigner_core::spectral::Spectrum {
                eigenvalues: vals.clone(),
                eigenvectors: None,
            };
            let m = empirical_stieltjes(&spec, z).unwrap();
            let resid = (m + 1.0 / (m + z)).norm();
            total += 1;
            if resid < 0.1 {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    assert!(frac >= 0.95, "self-consistency residual < 0.1 in only {frac:.3} of samples");
}

/// The spectrum concentrates on [-2, 2]: at least 99% of samples within 2.2.
#[test]
fn spectrum_support_concentrates() {
    let cfg = goe(500, 42);
    let samples = 100;
    let maxes: Vec<f64> = parallel_samples(samples, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        let vals = eigen_decompose(&h, false).unwrap().eigenvalues;
        vals[0].abs().max(vals[vals.len() - 1].abs())
    });
    let within = maxes.iter().filter(|&&m| m <= 2.2).count();
    assert!(within >= 99, "support: {within}/{samples} within 2.2");
}

/// Minor overlaps xi have expectation one.
#[test]
fn xi_overlaps_have_unit_mean() {
    let n = 200;
    let cfg = goe(n, 43);
    let samples = 100;
    let stats: Vec<(f64, f64, usize)> = parallel_samples(samples, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        let ma = minor_analysis(&h, (s % n) as usize, Complex64::new(0.1, 0.2)).unwrap();
        let sum: f64 = ma.xi.iter().sum();
        let sq: f64 = ma.xi.iter().map(|x| x * x).sum();
        (sum, sq, ma.xi.len())
    });
    let total: f64 = stats.iter().map(|s| s.0).sum();
    let count: usize = stats.iter().map(|s| s.2).sum();
    let sq: f64 = stats.iter().map(|s| s.1).sum();
    let mean = total / count as f64;
    let var = sq / count as f64 - mean * mean;
    let se = (var / count as f64).sqrt();
    assert!(
        (mean - 1.0).abs() < 3.0 * se,
        "E xi = {mean:.5} +- {se:.5} should be 1"
    );
}

/// Windowed eigenvalue counts reproduce N eta rho_sc(0) = 50/pi.
#[test]
fn window_counts_match_semicircle() {
    let n = 1000;
    let eta = 0.05;
    let cfg = goe(n, 44);
    let counts: Vec<f64> = parallel_samples(100, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        let vals = eigen_decompose(&h, false).unwrap().eigenvalues;
        count_in_window(&vals, -eta / 2.0, eta / 2.0) as f64
    });
    let (mean, _) = mean_se(&counts);
    let want = n as f64 * eta * semicircle_density(0.0); // 50/pi
    assert!(
        (mean - want).abs() < 0.05 * want,
        "mean count {mean:.2} vs {want:.2}"
    );
}

/// Unfolded one-point density is 1 in the bulk; the two-point estimate
/// vanishes at small separation (repulsion).
#[test]
fn correlation_one_point_flat_and_two_point_repulsive() {
    let cfg = EnsembleConfig::gue(500, 45);
    let edges = regular_bins(3.0, 0.1);
    let one = kpoint_correlation(&cfg, 1, 0.0, 0.1, &edges, 200).unwrap();
    for (i, &v) in one.values.iter().enumerate() {
        assert!(
            (v - 1.0).abs() < 0.05,
            "one-point bin {i}: {v:.4} should be 1 within 5%"
        );
    }
    let two = kpoint_correlation(&cfg, 2, 0.0, 0.1, &edges, 60).unwrap();
    assert!(
        two.values[0] < 0.05,
        "repulsion: first bin {:.4} should be < 0.05",
        two.values[0]
    );
}

/// Macroscopic windows reproduce the semicircle tightly (the classical
/// regime of the counting law).
#[test]
fn local_law_macroscopic_window() {
    let cfg = goe(1000, 58);
    let rep = statistics::local_law_scan(&cfg, 0.0, &[0.5], 50, 2.0).unwrap();
    assert!(
        rep.mean_dev[0] < 0.02,
        "macroscopic mean deviation {:.4}",
        rep.mean_dev[0]
    );
}

/// Wegner-type first-order count: P(N_I >= 1) scales linearly in the window
/// width (fitted slope 1 within 0.15).
#[test]
fn repulsion_first_order_slope() {
    let cfg = goe(200, 59);
    let rep = statistics::level_repulsion_probe(
        &cfg,
        0.0,
        &[0.2, 0.3, 0.45, 0.7],
        1,
        2_000,
        32,
    )
    .unwrap();
    assert!(
        (rep.slope - 1.0).abs() < 0.15,
        "order-1 slope {:.3} +- {:.3}",
        rep.slope,
        rep.slope_se
    );
}

/// Internal consistency of the drift diagnostics: the measured N sum b_j^2
/// stays below the bound implied by the per-term rigidity estimate
/// |b_j| <= eta^-2 (1/N) sum |x_k - gamma_k|.
#[test]
fn lambda_consistent_with_rigidity_bound() {
    let n = 200;
    let eta = 0.1;
    let cfg = goe(n, 60);
    let pot = flows::relaxation_potential(n, eta).unwrap();
    let spectra: Vec<Vec<f64>> = parallel_samples(30, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        eigen_decompose(&h, false).unwrap().eigenvalues
    });
    let diag = flows::lambda_estimate(&spectra, &pot).unwrap();
    let per_term = diag.mean_rigidity / (eta * eta);
    let bound = (n as f64).powi(2) * per_term * per_term;
    assert!(
        diag.lambda_hat <= bound,
        "Lambda_hat {:.3} exceeds rigidity bound {:.3}",
        diag.lambda_hat,
        bound
    );
}

/// Small gaps are suppressed: P(s < 0.05) stays below the surmise integral
/// scale for beta = 1.
#[test]
fn small_gaps_are_rare() {
    let cfg = goe(500, 46);
    let (gaps, _) = statistics::gap_distribution(&cfg, 0.6, 34).unwrap();
    assert!(gaps.gaps.len() >= 10_000);
    let frac = gaps.fraction_below(0.05);
    assert!(frac < 0.01, "P(s < 0.05) = {frac}");
    assert!((gaps.mean() - 1.0).abs() < 0.02);
}

/// GOE and GUE gap observables genuinely differ (beta distinction).
#[test]
fn gap_observables_distinguish_beta() {
    let battery = [(TestFunction::Triangle { center: 1.0 }, 1usize)];
    let a = flows::battery_values(&goe(200, 47), None, &battery, 150, 0.6, 0).unwrap();
    let b = flows::battery_values(&EnsembleConfig::gue(200, 48), None, &battery, 150, 0.6, 0).unwrap();
    let (ma, sa) = mean_se(&a.iter().map(|r| r[0]).collect::<Vec<_>>());
    let (mb, sb) = mean_se(&b.iter().map(|r| r[0]).collect::<Vec<_>>());
    let z = (ma - mb).abs() / (sa * sa + sb * sb).sqrt();
    assert!(z > 3.0, "GOE vs GUE battery z = {z:.2}, expected a clear separation");
}

/// Universality experiment with the flow run to infinity compares the
/// Gaussian ensemble with itself.
#[test]
fn universality_at_infinite_flow_time() {
    let cfg = EnsembleConfig {
        symmetry: SymmetryClass::Symmetric,
        n: 200,
        dist: EntryDistribution::rademacher(),
        seed: 49,
    };
    let rep = flows::universality_experiment(
        &cfg,
        f64::INFINITY,
        &statistics::observable_battery(),
        100,
        0.6,
    )
    .unwrap();
    for row in &rep.rows {
        assert!(
            row.z.abs() < 2.0,
            "t=inf row {} n={}: z = {:.2}",
            row.g_name,
            row.n_step,
            row.z
        );
    }
}

/// Metropolis mu sampling at N = 32 matches direct GOE spectra in the bulk.
#[test]
fn metropolis_matches_matrix_law() {
    let n = 32;
    let spec = oracles::GibbsSpec::mu(1.0, n).unwrap();
    let run = oracles::metropolis_sample(&spec, 4_000, 3_000, 10, 51).unwrap();
    let mc_gaps: Vec<f64> = run
        .samples
        .iter()
        .flat_map(|x| normalized_bulk_gaps(x, 0.6))
        .collect();

    let cfg = goe(n, 52);
    let matrix_gaps: Vec<f64> = parallel_samples(4_000, |s| {
        let h = sample_wigner(&cfg, s as u64).unwrap();
        normalized_bulk_gaps(&eigen_decompose(&h, false).unwrap().eigenvalues, 0.6)
    })
    .into_iter()
    .flatten()
    .collect();

    let ks = ks_two_sample(&mc_gaps, &matrix_gaps);
    assert!(ks < 0.03, "metropolis vs matrix bulk gaps: KS = {ks:.4}");
}

/// The local relaxation flow initialized from omega-Metropolis samples keeps
/// gap observables flat in time (stationarity).
#[test]
fn relaxation_flow_is_stationary_on_omega() {
    let n = 32;
    let eta = 0.2;
    let beta = 1.0;
    let spec = oracles::GibbsSpec::omega(beta, n, eta).unwrap();
    let run = oracles::metropolis_sample(&spec, 120, 3_000, 40, 53).unwrap();
    let pot = spec.potential().unwrap().clone();
    let g = TestFunction::Triangle { center: 1.0 };
    let window = bulk_indices(n, 0.6);
    let j_set = window.start..window.end.min(n - 1);

    let observe = |x: &[f64]| gap_observable(x, &g, 1, j_set.clone()).unwrap();
    let t_checks = [0.0, 0.6, 1.2];
    let rows: Vec<Vec<f64>> = parallel_samples(run.samples.len(), |i| {
        let rng = StreamRng::new(54, i as u64, 0);
        let mut state = flows::FlowState::new(run.samples[i].clone(), beta, rng).unwrap();
        t_checks
            .iter()
            .map(|&t| {
                flows::evolve_relaxation(&mut state, &pot, t, 1e-3).unwrap();
                observe(&state.positions)
            })
            .collect()
    });
    let first: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (m0, s0) = mean_se(&first);
    for k in 1..t_checks.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let (m, s) = mean_se(&col);
        let z = (m - m0) / (s * s + s0 * s0).sqrt();
        assert!(
            z.abs() < 3.0,
            "observable drifted under the relaxation flow: t={} z={z:.2}",
            t_checks[k]
        );
    }
}

/// Relaxation flow from the rigid start equilibrates no slower than DBM from
/// a wrong-density start, and within the eta^(1/3) time scale band.
#[test]
fn relaxation_is_faster_than_dbm() {
    let n = 48;
    let eta = 0.05;
    let cfg = goe(n, 55);
    let t_grid = [0.2, 0.5, 1.0, 1.8, 3.0, 5.0];
    let rep = wigner_core::harness::relaxation_experiment(&cfg, eta, &t_grid, 20).unwrap();
    assert!(
        rep.relax_equil_time <= rep.dbm_equil_time,
        "relaxation equil at t={} but dbm at t={}",
        rep.relax_equil_time,
        rep.dbm_equil_time
    );
    let bound = 10.0 * eta.powf(1.0 / 3.0);
    assert!(
        rep.relax_equil_time <= bound,
        "relaxation equilibrated at t={} > 10 eta^(1/3) = {bound:.2}",
        rep.relax_equil_time
    );
}

/// Drift-sign sanity of the SDE: the pair interaction pushes particles apart
/// along actual trajectories, visible in first-passage statistics.
#[test]
fn dbm_gap_law_invariance_small() {
    // tiny version of the invariance check: start from exact GOE spectra,
    // evolve, compare bulk gap law against static samples
    let n = 100;
    let cfg = goe(n, 56);
    let evolved = flows::dbm_evolved_gaps(&cfg, 40, 0.4, 1e-3, 0.6, 0).unwrap();
    let fresh = flows::static_gaps(&cfg, 40, 0.6, 40).unwrap();
    let ks = ks_two_sample(&evolved, &fresh);
    assert!(ks < 0.07, "evolved vs static gap KS = {ks:.4}");
}

/// Classical-location rigidity shrinks with N.
#[test]
fn rigidity_shrinks_with_dimension() {
    let mut values = Vec::new();
    for (i, n) in [100usize, 400].into_iter().enumerate() {
        let cfg = goe(n, 57 + i as u64);
        let gamma = classical_locations(n);
        let r: Vec<f64> = parallel_samples(30, |s| {
            let h = sample_wigner(&cfg, s as u64).unwrap();
            let vals = eigen_decompose(&h, false).unwrap().eigenvalues;
            vals.iter()
                .zip(&gamma)
                .map(|(x, g)| (x - g).abs())
                .sum::<f64>()
                / n as f64
        });
        values.push(mean_se(&r).0);
    }
    assert!(values[1] < values[0], "rigidity did not shrink: {values:?}");
}
