//! Estimators for the bulk spectral laws: local semicircle deviations,
//! eigenvector delocalization, level repulsion exponents, gap distributions,
//! and rescaled k-point correlations against the sine kernel.

use crate::ensembles::{sample_wigner, EnsembleConfig, EntryKind, SymmetryClass};
use crate::error::{Error, Result};
use crate::numeric::{mean_se, weighted_line_fit, Histogram};
use crate::pool::parallel_samples;
use crate::spectral::{
    count_in_window, eigen_decompose, semicircle_density, Spectrum,
};

/// Bulk guard: estimators stay inside |E| <= 2 - KAPPA.
pub const KAPPA: f64 = 0.05;

/// Central `fraction` of indices, the default window for bulk statistics.
pub fn bulk_indices(n: usize, fraction: f64) -> std::ops::Range<usize> {
    let skip = ((n as f64) * (1.0 - fraction) / 2.0).round() as usize;
    skip..n - skip
}

// ---------------------------------------------------------------------------
// local semicircle law
// ---------------------------------------------------------------------------

/// Deviation of the windowed eigenvalue density from the semicircle.
#[derive(Debug, Clone)]
pub struct LocalLawReport {
    pub e: f64,
    pub eta_grid: Vec<f64>,
    pub mean_dev: Vec<f64>,
    pub se_dev: Vec<f64>,
    pub max_dev: Vec<f64>,
    pub sample_count: usize,
}

/// Monte Carlo scan of |N_I/(N eta) - rho_sc(E)| over a grid of window
/// widths. `k_bound` pins the admissible range K/N <= eta <= 1/K.
pub fn local_law_scan(
    config: &EnsembleConfig,
    e: f64,
    eta_grid: &[f64],
    n_samples: usize,
    k_bound: f64,
) -> Result<LocalLawReport> {
    config.validate()?;
    if e.abs() > 2.0 - KAPPA {
        return Err(Error::Domain(format!("energy {e} outside the bulk guard")));
    }
    let n = config.n as f64;
    if eta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("eta grid must be strictly increasing".into()));
    }
    for &eta in eta_grid {
        if eta < k_bound / n || eta > 1.0 / k_bound {
            return Err(Error::Domain(format!(
                "eta {eta} outside [K/N, 1/K] = [{:.3e}, {:.3e}]",
                k_bound / n,
                1.0 / k_bound
            )));
        }
    }
    let rho = semicircle_density(e);
    let devs: Vec<Vec<f64>> = parallel_samples(n_samples, |s| {
        let h = sample_wigner(config, s as u64).expect("sampling");
        let spec = eigen_decompose(&h, false).expect("eigensolve");
        eta_grid
            .iter()
            .map(|&eta| {
                let c = count_in_window(&spec.eigenvalues, e - eta / 2.0, e + eta / 2.0);
                (c as f64 / (n * eta) - rho).abs()
            })
            .collect()
    });
    let mut mean_dev = Vec::new();
    let mut se_dev = Vec::new();
    let mut max_dev = Vec::new();
    for j in 0..eta_grid.len() {
        let col: Vec<f64> = devs.iter().map(|row| row[j]).collect();
        let (m, se) = mean_se(&col);
        mean_dev.push(m);
        se_dev.push(se);
        max_dev.push(col.iter().cloned().fold(0.0, f64::max));
    }
    Ok(LocalLawReport {
        e,
        eta_grid: eta_grid.to_vec(),
        mean_dev,
        se_dev,
        max_dev,
        sample_count: n_samples,
    })
}

// ---------------------------------------------------------------------------
// delocalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DelocalizationEntry {
    pub index: usize,
    pub eigenvalue: f64,
    /// N^(1/2 - 1/p) * |v|_p; order one for flat vectors, large when localized.
    pub scaled_p_norm: f64,
    /// N * |v|_inf^2.
    pub sup_sq_scaled: f64,
}

#[derive(Debug, Clone)]
pub struct DelocalizationReport {
    pub e: f64,
    pub p: f64,
    pub entries: Vec<DelocalizationEntry>,
}

/// Norm report for eigenvectors whose eigenvalue lies within K/N of E.
/// An empty window gives an empty report, not an error.
pub fn delocalization_stats(
    spec: &Spectrum,
    e: f64,
    k_window: f64,
    p: f64,
) -> Result<DelocalizationReport> {
    if e.abs() >= 2.0 {
        return Err(Error::Domain(format!("energy {e} outside (-2, 2)")));
    }
    if spec.eigenvectors.is_none() {
        return Err(Error::Domain("eigenvectors required".into()));
    }
    let n = spec.n();
    let nf = n as f64;
    let half = k_window / nf;
    let lo = spec.eigenvalues.partition_point(|&x| x < e - half);
    let hi = spec.eigenvalues.partition_point(|&x| x <= e + half);
    let scale = nf.powf(0.5 - 1.0 / p);
    let entries = (lo..hi)
        .map(|a| DelocalizationEntry {
            index: a,
            eigenvalue: spec.eigenvalues[a],
            scaled_p_norm: scale * spec.vector_p_norm(a, p),
            sup_sq_scaled: nf * spec.vector_sup_norm(a).powi(2),
        })
        .collect();
    Ok(DelocalizationReport { e, p, entries })
}

#[derive(Debug, Clone)]
pub struct DelocalizationScan {
    /// Mean of N |v|_4^4 over bulk eigenvectors (flat-vector oracle: 3).
    pub mean_l4: f64,
    pub se_l4: f64,
    /// Largest N |v|_inf^2 seen.
    pub max_sup_sq: f64,
    pub vectors: usize,
}

/// Bulk eigenvector statistics over an ensemble.
pub fn delocalization_scan(
    config: &EnsembleConfig,
    n_samples: usize,
    bulk_fraction: f64,
) -> Result<DelocalizationScan> {
    config.validate()?;
    let per_sample: Vec<(Vec<f64>, f64)> = parallel_samples(n_samples, |s| {
        let h = sample_wigner(config, s as u64).expect("sampling");
        let spec = eigen_decompose(&h, true).expect("eigensolve");
        let n = spec.n();
        let nf = n as f64;
        let mut l4 = Vec::new();
        let mut sup: f64 = 0.0;
        for a in bulk_indices(n, bulk_fraction) {
            l4.push(nf * spec.vector_p_norm(a, 4.0).powi(4));
            sup = sup.max(nf * spec.vector_sup_norm(a).powi(2));
        }
        (l4, sup)
    });
    let mut all = Vec::new();
    let mut max_sup: f64 = 0.0;
    for (l4, sup) in per_sample {
        all.extend(l4);
        max_sup = max_sup.max(sup);
    }
    let (mean_l4, se_l4) = mean_se(&all);
    Ok(DelocalizationScan {
        mean_l4,
        se_l4,
        max_sup_sq: max_sup,
        vectors: all.len(),
    })
}

// ---------------------------------------------------------------------------
// level repulsion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RepulsionReport {
    pub order: usize,
    pub eps_grid: Vec<f64>,
    pub probs: Vec<f64>,
    pub hits: Vec<u64>,
    /// Per-epsilon flag: fewer than 25 hits, widened uncertainty.
    pub sparse: Vec<bool>,
    pub slope: f64,
    pub slope_se: f64,
    pub expected_slope: f64,
    pub windows: usize,
    pub sample_count: usize,
}

/// Exponent of Wigner-type level repulsion: n^2 (hermitian), n(n+1)/2
/// (symmetric).
pub fn repulsion_exponent(symmetry: SymmetryClass, order: usize) -> f64 {
    match symmetry {
        SymmetryClass::Hermitian => (order * order) as f64,
        SymmetryClass::Symmetric => (order * (order + 1)) as f64 / 2.0,
    }
}

/// Estimate P(N_I >= n) for shrinking windows of width eps/N and fit the
/// log-log slope.
///
/// `windows` disjoint windows per sample (spaced three mean gaps apart around
/// E) boost the hit statistics; the epsilon scaling, and therefore the fitted
/// exponent, is unaffected by the window average.
pub fn level_repulsion_probe(
    config: &EnsembleConfig,
    e: f64,
    eps_grid: &[f64],
    order: usize,
    n_samples: usize,
    windows: usize,
) -> Result<RepulsionReport> {
    config.validate()?;
    if !matches!(config.dist.kind, EntryKind::Gaussian | EntryKind::Laplace) {
        return Err(Error::Config(
            "level repulsion needs a smooth entry law (gaussian or laplace)".into(),
        ));
    }
    if e.abs() > 2.0 - KAPPA {
        return Err(Error::Domain(format!("energy {e} outside the bulk guard")));
    }
    for &eps in eps_grid {
        if eps <= 0.0 || eps > 1.0 {
            return Err(Error::Domain(format!("epsilon {eps} outside (0, 1]")));
        }
    }
    let windows = windows.max(1);
    let n = config.n as f64;
    let spacing = 1.0 / (n * semicircle_density(e));
    let centers: Vec<f64> = (0..windows)
        .map(|w| e + (w as f64 - (windows as f64 - 1.0) / 2.0) * 3.0 * spacing)
        .collect();

    let hit_rows: Vec<Vec<u64>> = parallel_samples(n_samples, |s| {
        let h = sample_wigner(config, s as u64).expect("sampling");
        let spec = eigen_decompose(&h, false).expect("eigensolve");
        eps_grid
            .iter()
            .map(|&eps| {
                let half = eps / (2.0 * n);
                centers
                    .iter()
                    .filter(|&&c| count_in_window(&spec.eigenvalues, c - half, c + half) >= order)
                    .count() as u64
            })
            .collect()
    });

    let mut hits = vec![0u64; eps_grid.len()];
    for row in &hit_rows {
        for (h, &r) in hits.iter_mut().zip(row.iter()) {
            *h += r;
        }
    }
    let trials = (n_samples * windows) as f64;
    let probs: Vec<f64> = hits.iter().map(|&h| h as f64 / trials).collect();
    let sparse: Vec<bool> = hits.iter().map(|&h| h < 25).collect();

    // weighted fit over the epsilons that actually collected hits
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in 0..eps_grid.len() {
        if hits[i] > 0 {
            xs.push(eps_grid[i].ln());
            ys.push(probs[i].ln());
            ws.push(hits[i] as f64); // var(ln P) ~ 1/hits
        }
    }
    let (slope, slope_se) = if xs.len() >= 2 {
        let (m, _, se) = weighted_line_fit(&xs, &ys, &ws);
        (m, se)
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(RepulsionReport {
        order,
        eps_grid: eps_grid.to_vec(),
        probs,
        hits,
        sparse,
        slope,
        slope_se,
        expected_slope: repulsion_exponent(config.symmetry, order),
        windows,
        sample_count: n_samples,
    })
}

// ---------------------------------------------------------------------------
// gap distribution
// ---------------------------------------------------------------------------

/// Unfolded nearest-neighbor gaps from a bulk index window.
#[derive(Debug, Clone)]
pub struct GapSample {
    pub gaps: Vec<f64>,
    pub beta: u8,
    pub n: usize,
    pub source: String,
}

impl GapSample {
    pub fn mean(&self) -> f64 {
        self.gaps.iter().sum::<f64>() / self.gaps.len().max(1) as f64
    }

    pub fn fraction_below(&self, s: f64) -> f64 {
        self.gaps.iter().filter(|&&g| g < s).count() as f64 / self.gaps.len().max(1) as f64
    }
}

/// Extract normalized gaps s_i = N rho_sc(lambda_i)(lambda_{i+1} - lambda_i)
/// from the central `bulk_fraction` of one spectrum.
pub fn normalized_bulk_gaps(eigenvalues: &[f64], bulk_fraction: f64) -> Vec<f64> {
    let n = eigenvalues.len();
    let nf = n as f64;
    let window = bulk_indices(n, bulk_fraction);
    let mut gaps = Vec::with_capacity(window.len());
    for i in window.start..window.end.saturating_sub(1) {
        let s = nf * semicircle_density(eigenvalues[i]) * (eigenvalues[i + 1] - eigenvalues[i]);
        gaps.push(s);
    }
    gaps
}

/// Monte Carlo gap distribution for one ensemble.
pub fn gap_distribution(
    config: &EnsembleConfig,
    bulk_fraction: f64,
    n_samples: usize,
) -> Result<(GapSample, Histogram)> {
    config.validate()?;
    if !(bulk_fraction > 0.0 && bulk_fraction < 1.0) {
        return Err(Error::Domain(format!("bulk fraction {bulk_fraction} outside (0,1)")));
    }
    let rows: Vec<Vec<f64>> = parallel_samples(n_samples, |s| {
        let h = sample_wigner(config, s as u64).expect("sampling");
        let spec = eigen_decompose(&h, false).expect("eigensolve");
        normalized_bulk_gaps(&spec.eigenvalues, bulk_fraction)
    });
    let mut gaps = Vec::new();
    for row in rows {
        gaps.extend(row);
    }
    let mut hist = Histogram::new(0.0, 4.0, 80);
    for &g in &gaps {
        hist.add(g);
    }
    let sample = GapSample {
        gaps,
        beta: config.beta(),
        n: config.n,
        source: format!("{:?} {} N={}", config.symmetry, config.dist.kind.name(), config.n),
    };
    Ok((sample, hist))
}

// ---------------------------------------------------------------------------
// sine kernel
// ---------------------------------------------------------------------------

/// K(x) = sin(pi x)/(pi x), K(0) = 1.
pub fn sine_kernel(x: f64) -> f64 {
    let t = std::f64::consts::PI * x;
    if t.abs() < 1e-6 {
        1.0 - t * t / 6.0 + t.powi(4) / 120.0
    } else {
        t.sin() / t
    }
}

/// det[K(x_i - x_j)] for an arbitrary point set.
pub fn sine_kernel_determinant(points: &[f64]) -> f64 {
    let k = points.len();
    if k == 0 {
        return 1.0;
    }
    let mut m = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            m[i * k + j] = sine_kernel(points[i] - points[j]);
        }
    }
    // partial-pivot Gaussian elimination
    let mut det = 1.0;
    for c in 0..k {
        let mut piv = c;
        for r in c + 1..k {
            if m[r * k + c].abs() > m[piv * k + c].abs() {
                piv = r;
            }
        }
        if m[piv * k + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..k {
                m.swap(c * k + j, piv * k + j);
            }
            det = -det;
        }
        det *= m[c * k + c];
        for r in c + 1..k {
            let f = m[r * k + c] / m[c * k + c];
            for j in c..k {
                m[r * k + j] -= f * m[c * k + j];
            }
        }
    }
    det
}

/// GUE two-point sine-kernel prediction 1 - K(x)^2.
pub fn sine_kernel_two_point(x: f64) -> f64 {
    1.0 - sine_kernel(x) * sine_kernel(x)
}

// ---------------------------------------------------------------------------
// k-point correlations
// ---------------------------------------------------------------------------

/// Binned, energy-averaged, rescaled k-point correlation estimate.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub k: usize,
    pub e: f64,
    pub delta: f64,
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_count: usize,
    /// Reference points actually used (origins for k >= 2, grid points for k = 1).
    pub references: u64,
    /// Bins that stayed empty at the requested resolution.
    pub flagged_empty: bool,
}

impl CorrelationEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Rescaled k-point correlation by tuple counting around reference
/// eigenvalues, energy-averaged over [E - delta, E + delta].
///
/// The energy average follows the estimator convention: a dense grid of v
/// values in the window picks the nearest eigenvalue as tuple origin
/// (de-duplicated, so each bulk eigenvalue serves as origin once); rescaled
/// coordinates use rho_sc at the window center. k = 1 returns the unfolded
/// one-point density (= 1 in the bulk), k = 2 the pair correlation versus
/// rescaled distance, k = 3 the equal-spacing triple correlation
/// rho_3(0, x, 2x).
pub fn kpoint_correlation(
    config: &EnsembleConfig,
    k: usize,
    e: f64,
    delta: f64,
    bin_edges: &[f64],
    n_samples: usize,
) -> Result<CorrelationEstimate> {
    config.validate()?;
    if !(1..=3).contains(&k) {
        return Err(Error::Domain(format!("correlation order {k} outside 1..=3")));
    }
    if e.abs() > 2.0 - KAPPA {
        return Err(Error::Domain(format!("energy {e} outside the bulk guard")));
    }
    let n = config.n as f64;
    let rho = semicircle_density(e);
    if n * delta * rho < 3.0 {
        return Err(Error::Domain(format!(
            "window too narrow: N delta rho = {:.2} but the energy average needs >> 1",
            n * delta * rho
        )));
    }
    if bin_edges.len() < 2 {
        return Err(Error::Domain("need at least one bin".into()));
    }
    let nbins = bin_edges.len() - 1;
    let lo_edge = bin_edges[0];
    let hi_edge = *bin_edges.last().unwrap();

    // grid fine enough that every window eigenvalue is someone's nearest
    let n_grid = ((4.0 * 2.0 * delta * n * rho).ceil() as usize).max(20);

    let per_sample: Vec<(Vec<u64>, u64)> = parallel_samples(n_samples, |s| {
        let h = sample_wigner(config, s as u64).expect("sampling");
        let spec = eigen_decompose(&h, false).expect("eigensolve");
        let vals = &spec.eigenvalues;
        let mut counts = vec![0u64; nbins];
        let scale = n * rho;

        let bin_of = |u: f64| -> Option<usize> {
            if u < lo_edge || u >= hi_edge {
                return None;
            }
            // edges may be irregular; binary search
            let idx = bin_edges.partition_point(|&edge| edge <= u) - 1;
            Some(idx.min(nbins - 1))
        };

        if k == 1 {
            let mut refs = 0u64;
            for g in 0..n_grid {
                let v = e - delta + 2.0 * delta * (g as f64 + 0.5) / n_grid as f64;
                refs += 1;
                let lo = vals.partition_point(|&x| (x - v) * scale < lo_edge);
                for &x in &vals[lo..] {
                    let u = (x - v) * scale;
                    if u >= hi_edge {
                        break;
                    }
                    if let Some(b) = bin_of(u) {
                        counts[b] += 1;
                    }
                }
            }
            return (counts, refs);
        }

        // origins: nearest eigenvalue to each grid point, de-duplicated
        let mut origins: Vec<usize> = (0..n_grid)
            .map(|g| {
                let v = e - delta + 2.0 * delta * (g as f64 + 0.5) / n_grid as f64;
                nearest_index(vals, v)
            })
            .collect();
        origins.sort_unstable();
        origins.dedup();

        let refs = origins.len() as u64;
        match k {
            2 => {
                for &a in &origins {
                    // both directions; the pair correlation is even
                    for b in a + 1..vals.len() {
                        let u = (vals[b] - vals[a]) * scale;
                        if u >= hi_edge {
                            break;
                        }
                        if let Some(bin) = bin_of(u) {
                            counts[bin] += 1;
                        }
                    }
                    for b in (0..a).rev() {
                        let u = (vals[a] - vals[b]) * scale;
                        if u >= hi_edge {
                            break;
                        }
                        if let Some(bin) = bin_of(u) {
                            counts[bin] += 1;
                        }
                    }
                }
            }
            3 => {
                for &a in &origins {
                    for b in a + 1..vals.len() {
                        let u1 = (vals[b] - vals[a]) * scale;
                        if u1 >= hi_edge {
                            break;
                        }
                        let Some(bin1) = bin_of(u1) else { continue };
                        for c in b + 1..vals.len() {
                            let u2 = (vals[c] - vals[b]) * scale;
                            if u2 >= hi_edge {
                                break;
                            }
                            if bin_of(u2) == Some(bin1) {
                                counts[bin1] += 1;
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        (counts, refs)
    });

    // totals and batch-means errors
    let mut counts = vec![0u64; nbins];
    let mut refs_total = 0u64;
    for (c, r) in &per_sample {
        for (t, &x) in counts.iter_mut().zip(c.iter()) {
            *t += x;
        }
        refs_total += r;
    }
    let widths: Vec<f64> = bin_edges.windows(2).map(|w| w[1] - w[0]).collect();
    let normalize = |cnt: f64, refs: f64, width: f64| -> f64 {
        match k {
            1 => cnt / (refs * width),
            2 => cnt / (refs * width * 2.0),
            _ => cnt / (refs * width * width),
        }
    };
    let values: Vec<f64> = (0..nbins)
        .map(|b| normalize(counts[b] as f64, refs_total as f64, widths[b]))
        .collect();

    let n_batches = 20.min(n_samples.max(1));
    let per_batch = (n_samples as f64 / n_batches as f64).ceil() as usize;
    let mut errors = vec![0.0; nbins];
    if n_batches >= 2 {
        for b in 0..nbins {
            let mut batch_vals = Vec::new();
            for batch in per_sample.chunks(per_batch) {
                let c: u64 = batch.iter().map(|(cc, _)| cc[b]).sum();
                let r: u64 = batch.iter().map(|(_, rr)| *rr).sum();
                if r > 0 {
                    batch_vals.push(normalize(c as f64, r as f64, widths[b]));
                }
            }
            let (_, se) = mean_se(&batch_vals);
            errors[b] = se;
        }
    }

    let flagged_empty = counts.iter().any(|&c| c == 0);
    Ok(CorrelationEstimate {
        k,
        e,
        delta,
        bin_edges: bin_edges.to_vec(),
        values,
        errors,
        counts,
        sample_count: n_samples,
        references: refs_total,
        flagged_empty,
    })
}

fn nearest_index(sorted: &[f64], v: f64) -> usize {
    let i = sorted.partition_point(|&x| x < v);
    if i == 0 {
        0
    } else if i >= sorted.len() {
        sorted.len() - 1
    } else if (sorted[i] - v).abs() < (v - sorted[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}

/// Regular bin edges from 0 to `hi` with the given width.
pub fn regular_bins(hi: f64, width: f64) -> Vec<f64> {
    let n = (hi / width).round() as usize;
    (0..=n).map(|i| i as f64 * width).collect()
}

// ---------------------------------------------------------------------------
// gap observables
// ---------------------------------------------------------------------------

/// Smooth compactly supported test functions for gap observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// max(0, 1 - |t - center|)
    Triangle { center: f64 },
    /// C-infinity bump supported on (lo, hi), peak value 1.
    SmoothBump { lo: f64, hi: f64 },
    /// Constant 1 (support formally everywhere; for sanity checks).
    One,
}

impl TestFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TestFunction::Triangle { center } => (1.0 - (t - center).abs()).max(0.0),
            TestFunction::SmoothBump { lo, hi } => {
                let u = (2.0 * t - lo - hi) / (hi - lo);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
            TestFunction::One => 1.0,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TestFunction::Triangle { center } => format!("triangle@{center}"),
            TestFunction::SmoothBump { lo, hi } => format!("bump[{lo},{hi}]"),
            TestFunction::One => "one".into(),
        }
    }
}

/// The standard observable battery: {triangle at 1, bump on [0.5, 1.5]} x
/// gap orders {1, 2}.
pub fn observable_battery() -> Vec<(TestFunction, usize)> {
    vec![
        (TestFunction::Triangle { center: 1.0 }, 1),
        (TestFunction::Triangle { center: 1.0 }, 2),
        (TestFunction::SmoothBump { lo: 0.5, hi: 1.5 }, 1),
        (TestFunction::SmoothBump { lo: 0.5, hi: 1.5 }, 2),
    ]
}

/// (1/N) sum_{i in J} G(N (x_{i+n} - x_i)) over ordered positions.
pub fn gap_observable(
    positions: &[f64],
    g: &TestFunction,
    n_step: usize,
    j_set: std::ops::Range<usize>,
) -> Result<f64> {
    let n = positions.len();
    if n_step == 0 || j_set.end.saturating_add(n_step) > n {
        return Err(Error::Domain(format!(
            "index set 0..{} with step {n_step} overflows N={n}",
            j_set.end
        )));
    }
    let nf = n as f64;
    let mut sum = 0.0;
    for i in j_set {
        sum += g.eval(nf * (positions[i + n_step] - positions[i]));
    }
    Ok(sum / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EntryDistribution;
    use proptest::prelude::*;

    #[test]
    fn sine_kernel_point_values() {
        assert_eq!(sine_kernel_determinant(&[0.3]), 1.0);
        // repulsion: coincident points collapse the determinant
        let d = sine_kernel_determinant(&[0.0, 1e-9]);
        assert!(d.abs() < 1e-12);
        // k=2 closed form at x = 1/2
        let d = sine_kernel_determinant(&[0.0, 0.5]);
        let want = 1.0 - (2.0 / std::f64::consts::PI).powi(2);
        assert!((d - want).abs() < 1e-12);
        // series cross-check of K at 1/2
        let series: f64 = {
            // sin(pi/2) / (pi/2) evaluated by Taylor series of sin around 0
            let t = std::f64::consts::FRAC_PI_2;
            let mut term = t;
            let mut sum = 0.0;
            for k in 0..20 {
                sum += term;
                term *= -t * t / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
            }
            sum / t
        };
        assert!((sine_kernel(0.5) - series).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn sine_det_permutation_invariant(xs in proptest::collection::vec(-5.0f64..5.0, 2..5), swap_a in 0usize..4, swap_b in 0usize..4) {
            let d1 = sine_kernel_determinant(&xs);
            let mut ys = xs.clone();
            let a = swap_a % ys.len();
            let b = swap_b % ys.len();
            ys.swap(a, b);
            let d2 = sine_kernel_determinant(&ys);
            prop_assert!((d1 - d2).abs() < 1e-10 * d1.abs().max(1.0));
        }

        #[test]
        fn sine_det_shift_invariant(xs in proptest::collection::vec(-5.0f64..5.0, 1..5), c in -3.0f64..3.0) {
            let d1 = sine_kernel_determinant(&xs);
            let ys: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let d2 = sine_kernel_determinant(&ys);
            prop_assert!((d1 - d2).abs() < 1e-12 * d1.abs().max(1.0));
        }
    }

    #[test]
    fn gap_observable_trivial_cases() {
        let n = 50;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        // G = 1 everywhere: value = |J|/N
        let v = gap_observable(&xs, &TestFunction::One, 1, 0..n - 1).unwrap();
        assert!((v - (n as f64 - 1.0) / n as f64).abs() < 1e-14);
        // equally spaced with gap 1/N: argument is exactly 1
        let g = TestFunction::Triangle { center: 1.0 };
        let v = gap_observable(&xs, &g, 1, 0..n - 1).unwrap();
        assert!((v - (n as f64 - 1.0) / n as f64).abs() < 1e-12);
        // index overflow
        assert!(gap_observable(&xs, &g, 1, 0..n).is_err());
    }

    #[test]
    fn gap_observable_reflection_invariant() {
        let xs = vec![-1.3, -0.4, 0.1, 0.7, 2.0];
        let mut neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        neg.reverse();
        let g = TestFunction::SmoothBump { lo: 0.5, hi: 1.5 };
        for n_step in 1..=2 {
            let a = gap_observable(&xs, &g, n_step, 0..xs.len() - n_step).unwrap();
            let b = gap_observable(&neg, &g, n_step, 0..neg.len() - n_step).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn delocalization_closed_forms() {
        // localized basis vector: N^{1/4} |v|_4 = N^{1/4}
        let n = 100usize;
        let mut z = vec![0.0; n * n];
        for a in 0..n {
            z[a * n + a] = 1.0;
        }
        let spec = Spectrum {
            eigenvalues: (0..n).map(|i| -1.0 + 0.001 * i as f64).collect(),
            eigenvectors: Some(crate::spectral::EigenVectors::Real(z)),
        };
        let rep = delocalization_stats(&spec, -1.0, 60.0, 4.0).unwrap();
        assert!(!rep.entries.is_empty());
        let want = (n as f64).powf(0.25);
        for entry in &rep.entries {
            assert!((entry.scaled_p_norm - want).abs() < 1e-12);
            assert!((entry.sup_sq_scaled - n as f64).abs() < 1e-12);
        }

        // perfectly flat vector: scaled norm is exactly 1 for every p
        let mut z = vec![0.0; n * n];
        let flat = 1.0 / (n as f64).sqrt();
        for a in 0..n {
            for i in 0..n {
                z[a * n + i] = flat;
            }
        }
        let spec = Spectrum {
            eigenvalues: vec![0.0; n],
            eigenvectors: Some(crate::spectral::EigenVectors::Real(z)),
        };
        for p in [3.0, 4.0, 6.0] {
            let rep = delocalization_stats(&spec, 0.0, 3.0, p).unwrap();
            for entry in &rep.entries {
                assert!((entry.scaled_p_norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delocalization_empty_window_is_not_an_error() {
        let n = 10;
        let spec = Spectrum {
            eigenvalues: (0..n).map(|i| 1.0 + 0.01 * i as f64).collect(),
            eigenvectors: Some(crate::spectral::EigenVectors::Real(vec![0.0; n * n])),
        };
        // no eigenvalue within 2/N of E = -1
        let rep = delocalization_stats(&spec, -1.0, 2.0, 4.0).unwrap();
        assert!(rep.entries.is_empty());
    }

    #[test]
    fn repulsion_rejects_rough_laws() {
        let cfg = EnsembleConfig::new(
            SymmetryClass::Symmetric,
            50,
            EntryDistribution::rademacher(),
            1,
        )
        .unwrap();
        assert!(level_repulsion_probe(&cfg, 0.0, &[0.5], 1, 10, 1).is_err());
    }

    #[test]
    fn bulk_window_sizes() {
        assert_eq!(bulk_indices(10, 0.6), 2..8);
        assert_eq!(bulk_indices(1000, 0.6), 200..800);
    }

    #[test]
    fn exponents() {
        assert_eq!(repulsion_exponent(SymmetryClass::Hermitian, 2), 4.0);
        assert_eq!(repulsion_exponent(SymmetryClass::Symmetric, 2), 3.0);
        assert_eq!(repulsion_exponent(SymmetryClass::Symmetric, 1), 1.0);
    }
}
