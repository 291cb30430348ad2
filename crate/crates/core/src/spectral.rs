//! Spectra, semicircle reference quantities, and the minor decomposition used
//! by the local-law machinery.

use num_complex::Complex64;

use crate::ensembles::{MatrixData, WignerMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Orthonormal eigenvectors, column-major; column `a` belongs to the `a`-th
/// ascending eigenvalue.
#[derive(Debug, Clone)]
pub enum EigenVectors {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Ordered spectrum of one matrix sample.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<EigenVectors>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// |component i of eigenvector a|.
    pub fn vector_component_abs(&self, a: usize, i: usize) -> f64 {
        let n = self.n();
        match self.eigenvectors.as_ref().expect("eigenvectors not computed") {
            EigenVectors::Real(z) => z[a * n + i].abs(),
            EigenVectors::Complex(z) => z[a * n + i].norm(),
        }
    }

    /// l^p norm of eigenvector `a`.
    pub fn vector_p_norm(&self, a: usize, p: f64) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| self.vector_component_abs(a, i).powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn vector_sup_norm(&self, a: usize) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| self.vector_component_abs(a, i))
            .fold(0.0, f64::max)
    }

    /// Residual, Gram and trace checks against the source matrix.
    pub fn validate(&self, h: &WignerMatrix) -> Result<()> {
        let n = self.n();
        for w in self.eigenvalues.windows(2) {
            if w[0] > w[1] {
                return Err(Error::Numerical {
                    message: "eigenvalues not sorted".into(),
                    fingerprint: h.fingerprint(),
                });
            }
        }
        let trace = h.trace();
        let sum: f64 = self.eigenvalues.iter().sum();
        if (sum - trace).abs() > 1e-9 * n as f64 {
            return Err(Error::Numerical {
                message: format!("trace mismatch: {sum} vs {trace}"),
                fingerprint: h.fingerprint(),
            });
        }
        if let Some(vectors) = &self.eigenvectors {
            let (gram_dev, max_resid) = match vectors {
                EigenVectors::Real(z) => {
                    let mut gram_dev: f64 = 0.0;
                    for a in 0..n {
                        for b in a..n {
                            let dot: f64 = (0..n).map(|i| z[a * n + i] * z[b * n + i]).sum();
                            let want = if a == b { 1.0 } else { 0.0 };
                            gram_dev = gram_dev.max((dot - want).abs());
                        }
                    }
                    let ar = match &h.data {
                        MatrixData::Real(a) => a,
                        _ => unreachable!(),
                    };
                    let mut max_resid: f64 = 0.0;
                    for a in 0..n {
                        let col = &z[a * n..a * n + n];
                        let mut r2 = 0.0;
                        for i in 0..n {
                            let mut hv = 0.0;
                            for j in 0..n {
                                hv += ar[i * n + j] * col[j];
                            }
                            r2 += (hv - self.eigenvalues[a] * col[i]).powi(2);
                        }
                        max_resid = max_resid.max(r2.sqrt());
                    }
                    (gram_dev, max_resid)
                }
                EigenVectors::Complex(z) => {
                    let mut gram_dev: f64 = 0.0;
                    for a in 0..n {
                        for b in a..n {
                            let mut dot = Complex64::new(0.0, 0.0);
                            for i in 0..n {
                                dot += z[a * n + i].conj() * z[b * n + i];
                            }
                            let want = if a == b { 1.0 } else { 0.0 };
                            gram_dev = gram_dev.max((dot - want).norm());
                        }
                    }
                    let ac = match &h.data {
                        MatrixData::Complex(a) => a,
                        _ => unreachable!(),
                    };
                    let mut max_resid: f64 = 0.0;
                    for a in 0..n {
                        let col = &z[a * n..a * n + n];
                        let mut r2 = 0.0;
                        for i in 0..n {
                            let mut hv = Complex64::new(0.0, 0.0);
                            for j in 0..n {
                                hv += ac[i * n + j] * col[j];
                            }
                            r2 += (hv - self.eigenvalues[a] * col[i]).norm_sqr();
                        }
                        max_resid = max_resid.max(r2.sqrt());
                    }
                    (gram_dev, max_resid)
                }
            };
            if gram_dev > 1e-10 {
                return Err(Error::Numerical {
                    message: format!("Gram deviation {gram_dev:.3e}"),
                    fingerprint: h.fingerprint(),
                });
            }
            if max_resid > 1e-9 {
                return Err(Error::Numerical {
                    message: format!("eigen residual {max_resid:.3e}"),
                    fingerprint: h.fingerprint(),
                });
            }
        }
        Ok(())
    }
}

/// Full eigendecomposition, vectors on request.
pub fn eigen_decompose(h: &WignerMatrix, want_vectors: bool) -> Result<Spectrum> {
    let res = match &h.data {
        MatrixData::Real(a) => linalg::sym_eigen(a, h.n, want_vectors).map(|(vals, vecs)| Spectrum {
            eigenvalues: vals,
            eigenvectors: vecs.map(EigenVectors::Real),
        }),
        MatrixData::Complex(a) => linalg::herm_eigen(a, h.n, want_vectors).map(|(vals, vecs)| Spectrum {
            eigenvalues: vals,
            eigenvectors: vecs.map(EigenVectors::Complex),
        }),
    };
    res.map_err(|e| match e {
        Error::Numerical { message, .. } => Error::Numerical {
            message,
            fingerprint: h.fingerprint(),
        },
        other => other,
    })
}

/// (1/N) sum 1/(lambda_a - z), no domain validation.
pub(crate) fn stieltjes_sum(eigenvalues: &[f64], z: Complex64) -> Complex64 {
    let n = eigenvalues.len() as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for &l in eigenvalues {
        s += 1.0 / (Complex64::new(l, 0.0) - z);
    }
    s / n
}

/// Stieltjes transform of the empirical eigenvalue density at `z`, Im z > 0.
pub fn empirical_stieltjes(spec: &Spectrum, z: Complex64) -> Result<Complex64> {
    if z.im <= 0.0 {
        return Err(Error::Domain(format!("Im z must be positive, got {}", z.im)));
    }
    Ok(stieltjes_sum(&spec.eigenvalues, z))
}

/// Semicircle density (1/2pi) sqrt((4 - E^2)_+).
pub fn semicircle_density(e: f64) -> f64 {
    let r = 4.0 - e * e;
    if r <= 0.0 {
        0.0
    } else {
        r.sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Semicircle CDF in closed form.
pub fn semicircle_cdf(e: f64) -> f64 {
    use std::f64::consts::PI;
    if e <= -2.0 {
        0.0
    } else if e >= 2.0 {
        1.0
    } else {
        0.5 + e * (4.0 - e * e).sqrt() / (4.0 * PI) + (e / 2.0).asin() / PI
    }
}

/// Stieltjes transform of the semicircle law: the root of m^2 + z m + 1 = 0
/// with positive imaginary part.
pub fn semicircle_stieltjes(z: Complex64) -> Result<Complex64> {
    if z.im <= 0.0 {
        return Err(Error::Domain(format!("Im z must be positive, got {}", z.im)));
    }
    let disc = (z * z - 4.0).sqrt();
    // pick the branch of the square root that avoids cancellation: the two
    // roots are (-z +/- disc)/2 and their product is 1
    let denom = if (z + disc).norm_sqr() >= (z - disc).norm_sqr() {
        z + disc
    } else {
        z - disc
    };
    let m_small = -2.0 / denom; // the root of smaller magnitude
    let m = if m_small.im > 0.0 { m_small } else { 1.0 / m_small };
    Ok(m)
}

/// Semicircle reference bundle with cached classical locations for one N.
#[derive(Debug, Clone)]
pub struct SemicircleModel {
    pub n: usize,
    locations: Vec<f64>,
}

impl SemicircleModel {
    pub fn new(n: usize) -> Self {
        SemicircleModel {
            n,
            locations: classical_locations(n),
        }
    }

    pub fn density(&self, e: f64) -> f64 {
        semicircle_density(e)
    }

    pub fn cdf(&self, e: f64) -> f64 {
        semicircle_cdf(e)
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        semicircle_stieltjes(z)
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }
}

/// gamma_j with n_sc(gamma_j) = j/N, j = 1..N; gamma_N = 2 by convention.
pub fn classical_locations(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (1..=n)
        .map(|j| {
            if j == n {
                2.0
            } else {
                invert_semicircle_cdf(j as f64 / n as f64)
            }
        })
        .collect()
}

/// Bracketing bisection on the closed-form CDF; quadrature stays a test oracle.
fn invert_semicircle_cdf(target: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Number of eigenvalues in the closed interval [E - eta/2, E + eta/2].
pub fn count_in_interval(eigenvalues: &[f64], e: f64, eta: f64) -> Result<usize> {
    if eta <= 0.0 {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    Ok(count_in_window(eigenvalues, e - eta / 2.0, e + eta / 2.0))
}

/// Count of sorted values in the closed window [lo, hi].
pub fn count_in_window(sorted: &[f64], lo: f64, hi: f64) -> usize {
    let a = sorted.partition_point(|&x| x < lo);
    let b = sorted.partition_point(|&x| x <= hi);
    b - a
}

/// Minor decomposition of one matrix at a probe point z.
#[derive(Debug, Clone)]
pub struct MinorAnalysis {
    /// Removed row/column (0-based).
    pub k: usize,
    pub minor_eigenvalues: Vec<f64>,
    /// xi_a = N |<u_a, a_k>|^2 for the minor eigenvectors u_a.
    pub xi: Vec<f64>,
    /// (1/N) sum (xi_a - 1)/(lambda_a - z).
    pub x_k: Complex64,
    /// (k,k) resolvent entry computed from the minor expansion.
    pub resolvent_minor: Complex64,
    /// (k,k) resolvent entry from a direct linear solve.
    pub resolvent_direct: Complex64,
    /// Relative disagreement between the two resolvent routes.
    pub identity_rel_error: f64,
}

/// Remove row/column k and analyze the minor: spectrum, xi overlaps, X_k,
/// and the resolvent identity check against a direct solve.
pub fn minor_analysis(h: &WignerMatrix, k: usize, z: Complex64) -> Result<MinorAnalysis> {
    let n = h.n;
    if k >= n {
        return Err(Error::Domain(format!("minor index {k} out of range for N={n}")));
    }
    if z.im <= 0.0 {
        return Err(Error::Domain("minor analysis needs Im z > 0".into()));
    }
    let m = n - 1;
    let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();

    // complex copies keep one code path for both symmetry classes
    let full: Vec<Complex64> = match &h.data {
        MatrixData::Real(a) => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        MatrixData::Complex(a) => a.clone(),
    };
    let mut minor = vec![Complex64::new(0.0, 0.0); m * m];
    for (i2, &i) in keep.iter().enumerate() {
        for (j2, &j) in keep.iter().enumerate() {
            minor[i2 * m + j2] = full[i * n + j];
        }
    }
    let a_col: Vec<Complex64> = keep.iter().map(|&i| full[i * n + k]).collect();

    let (minor_eigenvalues, vecs) = linalg::herm_eigen(&minor, m, true)?;
    let z_cols = vecs.unwrap();

    let nf = n as f64;
    let mut xi = vec![0.0; m];
    for a in 0..m {
        let mut dot = Complex64::new(0.0, 0.0);
        for i in 0..m {
            dot += z_cols[a * m + i].conj() * a_col[i];
        }
        xi[a] = nf * dot.norm_sqr();
    }

    let mut x_k = Complex64::new(0.0, 0.0);
    let mut schur = Complex64::new(0.0, 0.0);
    for a in 0..m {
        let denom = Complex64::new(minor_eigenvalues[a], 0.0) - z;
        x_k += (xi[a] - 1.0) / denom;
        schur += xi[a] / denom;
    }
    x_k /= nf;
    let h_kk = full[k * n + k];
    let resolvent_minor = 1.0 / (h_kk - z - schur / nf);

    let mut e_k = vec![Complex64::new(0.0, 0.0); n];
    e_k[k] = Complex64::new(1.0, 0.0);
    let x = linalg::shifted_solve(&full, n, z, &e_k)?;
    let resolvent_direct = x[k];

    let identity_rel_error = (resolvent_minor - resolvent_direct).norm() / resolvent_direct.norm();
    if identity_rel_error > 1e-8 {
        return Err(Error::Numerical {
            message: format!("resolvent identity violated: rel error {identity_rel_error:.3e}"),
            fingerprint: h.fingerprint(),
        });
    }

    Ok(MinorAnalysis {
        k,
        minor_eigenvalues,
        xi,
        x_k,
        resolvent_minor,
        resolvent_direct,
        identity_rel_error,
    })
}

/// Cauchy interlacing check: lambda_a <= mu_a <= lambda_{a+1}.
pub fn interlaces(full: &[f64], minor: &[f64], tol: f64) -> bool {
    if minor.len() + 1 != full.len() {
        return false;
    }
    minor
        .iter()
        .enumerate()
        .all(|(a, &m)| full[a] - tol <= m && m <= full[a + 1] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_wigner, EnsembleConfig, SymmetryClass, WignerMatrix};
    use crate::numeric::simpson;

    #[test]
    fn zero_matrix_spectrum() {
        let h = WignerMatrix::zero(SymmetryClass::Symmetric, 3);
        let s = eigen_decompose(&h, false).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn embedded_diagonal() {
        let h = WignerMatrix::from_real(&[-1.0, 0.0, 0.0, 2.0], 2);
        let s = eigen_decompose(&h, false).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn point_mass_stieltjes() {
        let spec = Spectrum {
            eigenvalues: vec![0.0, 0.0],
            eigenvectors: None,
        };
        let m = empirical_stieltjes(&spec, Complex64::new(0.0, 1.0)).unwrap();
        assert!((m - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_large_z_asymptotics() {
        let spec = Spectrum {
            eigenvalues: vec![-1.5, 0.2, 1.9],
            eigenvectors: None,
        };
        let z = Complex64::new(3e5, 1e6);
        let m = empirical_stieltjes(&spec, z).unwrap();
        assert!((m + 1.0 / z).norm() / (1.0 / z).norm() < 1e-5);
        let msc = semicircle_stieltjes(z).unwrap();
        assert!((msc + 1.0 / z).norm() / (1.0 / z).norm() < 1e-5);
    }

    #[test]
    fn stieltjes_rejects_lower_half_plane() {
        let spec = Spectrum {
            eigenvalues: vec![0.0],
            eigenvectors: None,
        };
        assert!(empirical_stieltjes(&spec, Complex64::new(0.0, -1.0)).is_err());
        assert!(semicircle_stieltjes(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn conjugate_symmetry_of_the_formula() {
        let vals = vec![-1.2, -0.3, 0.4, 1.7];
        let z = Complex64::new(0.3, 0.8);
        let m_up = stieltjes_sum(&vals, z);
        let m_down = stieltjes_sum(&vals, z.conj());
        assert!((m_down - m_up.conj()).norm() < 1e-15);
    }

    #[test]
    fn msc_satisfies_quadratic() {
        for z in [
            Complex64::new(0.0, 1.0),
            Complex64::new(1.3, 0.01),
            Complex64::new(-1.9, 0.5),
            Complex64::new(0.5, 3.0),
        ] {
            let m = semicircle_stieltjes(z).unwrap();
            assert!(m.im > 0.0);
            assert!((m * m + z * m + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn msc_at_i_closed_form() {
        let m = semicircle_stieltjes(Complex64::new(0.0, 1.0)).unwrap();
        let want = Complex64::new(0.0, (5.0f64.sqrt() - 1.0) / 2.0);
        assert!((m - want).norm() < 1e-12);
    }

    #[test]
    fn msc_edge_limit() {
        let m = semicircle_stieltjes(Complex64::new(2.0, 1e-8)).unwrap();
        assert!((m - Complex64::new(-1.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn msc_boundary_limit_is_density() {
        // Im m_sc(E + i0) -> pi rho_sc(E) inside (-2, 2)
        for e in [-1.5, -0.5, 0.0, 0.7, 1.8] {
            let m = semicircle_stieltjes(Complex64::new(e, 1e-9)).unwrap();
            let want = std::f64::consts::PI * semicircle_density(e);
            assert!((m.im - want).abs() < 1e-4, "E={e}");
        }
    }

    /// Quadrature of the semicircle mass up to E with the edge singularity
    /// removed by x = 2 sin(theta); the independent oracle for n_sc.
    fn semicircle_mass_quadrature(e: f64) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        let theta = (e / 2.0).asin();
        simpson(|t| (2.0 / PI) * t.cos() * t.cos(), -FRAC_PI_2, theta, 20_000)
    }

    #[test]
    fn cdf_matches_quadrature() {
        for e in [-1.9, -1.0, -0.3, 0.0, 0.4, 1.2, 1.95] {
            let q = semicircle_mass_quadrature(e);
            assert!((semicircle_cdf(e) - q).abs() < 1e-10, "E={e}");
        }
        assert!((semicircle_mass_quadrature(2.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classical_locations_basics() {
        let g2 = classical_locations(2);
        assert!(g2[0].abs() < 1e-10);
        assert_eq!(g2[1], 2.0);

        let g4 = classical_locations(4);
        assert!(g4[1].abs() < 1e-10);
        assert!((semicircle_cdf(g4[0]) - 0.25).abs() < 1e-10);
        // independent quadrature route to the same quantile
        let q = semicircle_mass_quadrature(g4[0]);
        assert!((q - 0.25).abs() < 1e-10);

        for n in [2usize, 5, 16, 101] {
            let g = classical_locations(n);
            for w in g.windows(2) {
                assert!(w[0] < w[1]);
            }
            for (j, &x) in g.iter().enumerate().take(n - 1) {
                assert!((semicircle_cdf(x) - (j + 1) as f64 / n as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn classical_locations_symmetry() {
        let n = 64;
        let g = classical_locations(n);
        for j in 1..n {
            // gamma_j = -gamma_{N-j} in 1-based labels
            assert!((g[j - 1] + g[n - j - 1]).abs() < 1e-9, "j={j}");
        }
    }

    #[test]
    fn counting_examples() {
        let vals = [-1.0, 0.0, 1.0];
        assert_eq!(count_in_interval(&vals, 0.0, 1.0).unwrap(), 1);
        assert_eq!(count_in_interval(&vals, 0.0, 2.5).unwrap(), 3);
        assert_eq!(count_in_interval(&vals, 0.0, 2.0).unwrap(), 3); // closed interval
        assert!(count_in_interval(&vals, 0.0, 0.0).is_err());
    }

    #[test]
    fn minor_identity_and_interlacing() {
        for cfg in [EnsembleConfig::goe(10, 21), EnsembleConfig::gue(10, 22)] {
            let h = sample_wigner(&cfg, 0).unwrap();
            let spec = eigen_decompose(&h, false).unwrap();
            let z = Complex64::new(0.3, 0.05);
            for k in [0usize, 4, 9] {
                let ma = minor_analysis(&h, k, z).unwrap();
                assert!(ma.identity_rel_error < 1e-8);
                assert!(interlaces(&spec.eigenvalues, &ma.minor_eigenvalues, 1e-9));
                // Parseval: sum xi = N |a|^2
                let norm_sq: f64 = (0..h.n)
                    .filter(|&i| i != k)
                    .map(|i| h.entry(i, k).norm_sqr())
                    .sum();
                let sum_xi: f64 = ma.xi.iter().sum();
                assert!((sum_xi - h.n as f64 * norm_sq).abs() < 1e-9 * sum_xi.max(1.0));
            }
        }
    }

    #[test]
    fn spectrum_validation_on_samples() {
        for cfg in [EnsembleConfig::goe(24, 3), EnsembleConfig::gue(24, 4)] {
            let h = sample_wigner(&cfg, 1).unwrap();
            let spec = eigen_decompose(&h, true).unwrap();
            spec.validate(&h).unwrap();
        }
    }
}
