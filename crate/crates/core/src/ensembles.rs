//! Wigner matrix ensembles.
//!
//! Matrices are sampled entry-by-entry from counter-based RNG streams keyed by
//! `(seed, sample_index, entry)`, so a given `(config, sample_index)` always
//! produces the same matrix regardless of scheduling. Off-diagonal entries of
//! the symmetric class have variance 1/N; hermitian entries have variance
//! 1/(2N) per real part. Diagonals are the same base law rescaled to variance
//! 2/N (symmetric) or 1/N (hermitian).

use num_complex::Complex64;

use crate::error::{fingerprint_f64, Error, Result};
use crate::rng::StreamRng;

/// Base entry law; every kind is normalized to mean 0, variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Gaussian,
    Rademacher,
    Uniform,
    Laplace,
}

impl EntryKind {
    pub fn name(self) -> &'static str {
        match self {
            EntryKind::Gaussian => "gaussian",
            EntryKind::Rademacher => "rademacher",
            EntryKind::Uniform => "uniform",
            EntryKind::Laplace => "laplace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EntryKind::Gaussian),
            "rademacher" => Ok(EntryKind::Rademacher),
            "uniform" => Ok(EntryKind::Uniform),
            "laplace" => Ok(EntryKind::Laplace),
            other => Err(Error::Config(format!("unknown entry distribution `{other}`"))),
        }
    }
}

/// Tail class of the entry law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayClass {
    GaussianDecay,
    Subexponential,
}

/// An admissible single-entry distribution: centered, unit variance, with a
/// declared tail class and decay exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryDistribution {
    pub kind: EntryKind,
    pub decay_class: DecayClass,
    /// Exponent gamma in the integrability bound exp(delta |x|^gamma).
    pub decay_exponent: f64,
    pub mean: f64,
    pub variance: f64,
}

impl EntryDistribution {
    pub fn new(kind: EntryKind) -> Self {
        let (decay_class, decay_exponent) = match kind {
            EntryKind::Laplace => (DecayClass::Subexponential, 1.0),
            _ => (DecayClass::GaussianDecay, 2.0),
        };
        EntryDistribution {
            kind,
            decay_class,
            decay_exponent,
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(EntryKind::Gaussian)
    }
    pub fn rademacher() -> Self {
        Self::new(EntryKind::Rademacher)
    }
    pub fn uniform() -> Self {
        Self::new(EntryKind::Uniform)
    }
    pub fn laplace() -> Self {
        Self::new(EntryKind::Laplace)
    }

    /// One unit-variance draw.
    #[inline]
    pub fn sample_unit(&self, rng: &mut StreamRng) -> f64 {
        match self.kind {
            EntryKind::Gaussian => rng.next_normal(),
            EntryKind::Rademacher => {
                if rng.next_u64() >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            // symmetric uniform on [-sqrt(3), sqrt(3)]
            EntryKind::Uniform => (2.0 * rng.next_uniform() - 1.0) * 3.0f64.sqrt(),
            // Laplace with scale 1/sqrt(2)
            EntryKind::Laplace => {
                let u = rng.next_uniform();
                let b = std::f64::consts::FRAC_1_SQRT_2;
                if u < 0.5 {
                    b * (2.0 * u).ln()
                } else {
                    -b * (2.0 * (1.0 - u)).ln()
                }
            }
        }
    }

    /// Exact fourth moment of the unit-variance law.
    pub fn fourth_moment(&self) -> f64 {
        match self.kind {
            EntryKind::Gaussian => 3.0,
            EntryKind::Rademacher => 1.0,
            EntryKind::Uniform => 1.8,
            EntryKind::Laplace => 6.0,
        }
    }

    /// Density of the unit-variance law (used by quadrature cross-checks).
    /// Rademacher is discrete and returns None.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self.kind {
            EntryKind::Gaussian => {
                Some((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
            }
            EntryKind::Uniform => {
                let s = 3.0f64.sqrt();
                Some(if x.abs() <= s { 0.5 / s } else { 0.0 })
            }
            EntryKind::Laplace => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                Some((-x.abs() / b).exp() / (2.0 * b))
            }
            EntryKind::Rademacher => None,
        }
    }
}

/// beta = 1 (real symmetric) or beta = 2 (complex hermitian).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    Symmetric,
    Hermitian,
}

impl SymmetryClass {
    pub fn beta(self) -> u8 {
        match self {
            SymmetryClass::Symmetric => 1,
            SymmetryClass::Hermitian => 2,
        }
    }

    pub fn from_beta(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(SymmetryClass::Symmetric),
            2 => Ok(SymmetryClass::Hermitian),
            b => Err(Error::Config(format!("beta must be 1 or 2, got {b}"))),
        }
    }
}

/// Full description of one Wigner law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub symmetry: SymmetryClass,
    pub n: usize,
    pub dist: EntryDistribution,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(symmetry: SymmetryClass, n: usize, dist: EntryDistribution, seed: u64) -> Result<Self> {
        let cfg = EnsembleConfig { symmetry, n, dist, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn goe(n: usize, seed: u64) -> Self {
        EnsembleConfig {
            symmetry: SymmetryClass::Symmetric,
            n,
            dist: EntryDistribution::gaussian(),
            seed,
        }
    }

    pub fn gue(n: usize, seed: u64) -> Self {
        EnsembleConfig {
            symmetry: SymmetryClass::Hermitian,
            n,
            dist: EntryDistribution::gaussian(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("matrix dimension must be >= 2, got {}", self.n)));
        }
        Ok(())
    }

    pub fn beta(&self) -> u8 {
        self.symmetry.beta()
    }

    /// Same law with gaussian entries; the comparison reference in
    /// universality experiments.
    pub fn gaussian_reference(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            symmetry: self.symmetry,
            n: self.n,
            dist: EntryDistribution::gaussian(),
            seed,
        }
    }
}

/// Dense storage for one sampled matrix.
#[derive(Debug, Clone)]
pub enum MatrixData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// One self-adjoint sample, exactly symmetric/hermitian by construction.
#[derive(Debug, Clone)]
pub struct WignerMatrix {
    pub n: usize,
    pub symmetry: SymmetryClass,
    pub data: MatrixData,
}

impl WignerMatrix {
    pub fn beta(&self) -> u8 {
        self.symmetry.beta()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.data {
            MatrixData::Real(a) => Complex64::new(a[i * self.n + j], 0.0),
            MatrixData::Complex(a) => a[i * self.n + j],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.entry(i, i).re).sum()
    }

    /// Exact (bitwise) self-adjointness check.
    pub fn is_self_adjoint(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                let a = self.entry(i, j);
                let b = self.entry(j, i).conj();
                if a.re != b.re || a.im != b.im {
                    return false;
                }
            }
        }
        true
    }

    pub fn fingerprint(&self) -> u64 {
        match &self.data {
            MatrixData::Real(a) => fingerprint_f64(a),
            MatrixData::Complex(a) => {
                let flat: Vec<f64> = a.iter().flat_map(|c| [c.re, c.im]).collect();
                fingerprint_f64(&flat)
            }
        }
    }

    /// Zero matrix of the given class, mostly for tests.
    pub fn zero(symmetry: SymmetryClass, n: usize) -> Self {
        let data = match symmetry {
            SymmetryClass::Symmetric => MatrixData::Real(vec![0.0; n * n]),
            SymmetryClass::Hermitian => MatrixData::Complex(vec![Complex64::new(0.0, 0.0); n * n]),
        };
        WignerMatrix { n, symmetry, data }
    }

    /// Wrap an existing real symmetric matrix (symmetrized from the upper
    /// triangle) so test fixtures can go through the same spectral path.
    pub fn from_real(upper: &[f64], n: usize) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                a[i * n + j] = upper[i * n + j];
                a[j * n + i] = upper[i * n + j];
            }
        }
        WignerMatrix {
            n,
            symmetry: SymmetryClass::Symmetric,
            data: MatrixData::Real(a),
        }
    }
}

/// Draw the `sample_index`-th matrix of the ensemble.
///
/// Entry `(i, j)` with `i <= j` owns the RNG stream `i*n + j`; the lower
/// triangle mirrors the upper bit-for-bit.
pub fn sample_wigner(config: &EnsembleConfig, sample_index: u64) -> Result<WignerMatrix> {
    config.validate()?;
    let n = config.n;
    let scale = 1.0 / (n as f64).sqrt();
    let dist = &config.dist;

    let data = match config.symmetry {
        SymmetryClass::Symmetric => {
            let mut a = vec![0.0; n * n];
            let diag_scale = scale * 2.0f64.sqrt();
            for i in 0..n {
                for j in i..n {
                    let mut rng = StreamRng::new(config.seed, sample_index, (i * n + j) as u64);
                    let x = dist.sample_unit(&mut rng);
                    let h = if i == j { diag_scale * x } else { scale * x };
                    a[i * n + j] = h;
                    a[j * n + i] = h;
                }
            }
            MatrixData::Real(a)
        }
        SymmetryClass::Hermitian => {
            let mut a = vec![Complex64::new(0.0, 0.0); n * n];
            let off_scale = scale * std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i..n {
                    let mut rng = StreamRng::new(config.seed, sample_index, (i * n + j) as u64);
                    if i == j {
                        let x = dist.sample_unit(&mut rng);
                        a[i * n + i] = Complex64::new(scale * x, 0.0);
                    } else {
                        let x = dist.sample_unit(&mut rng);
                        let y = dist.sample_unit(&mut rng);
                        let h = Complex64::new(off_scale * x, off_scale * y);
                        a[i * n + j] = h;
                        a[j * n + i] = h.conj();
                    }
                }
            }
            MatrixData::Complex(a)
        }
    };

    Ok(WignerMatrix {
        n,
        symmetry: config.symmetry,
        data,
    })
}

/// Sample-moment report for one entry law.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub n_draws: usize,
    pub mean: f64,
    pub variance: f64,
    pub fourth: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_fourth: f64,
    pub expected_fourth: f64,
    pub pass: bool,
}

/// Empirical check of the declared normalization, 4 standard errors wide.
pub fn check_moments(dist: &EntryDistribution, n_draws: usize) -> Result<MomentReport> {
    check_moments_seeded(dist, n_draws, 0x0051_d0c5)
}

pub fn check_moments_seeded(dist: &EntryDistribution, n_draws: usize, seed: u64) -> Result<MomentReport> {
    if n_draws < 10_000 {
        return Err(Error::Config(format!("need at least 1e4 draws, got {n_draws}")));
    }
    let (mut s1, mut s2, mut s4, mut s8) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n_draws {
        let mut rng = StreamRng::new(seed, 0, i as u64);
        let x = dist.sample_unit(&mut rng);
        let x2 = x * x;
        s1 += x;
        s2 += x2;
        s4 += x2 * x2;
        s8 += x2 * x2 * x2 * x2;
    }
    let nf = n_draws as f64;
    let mean = s1 / nf;
    let m2 = s2 / nf;
    let m4 = s4 / nf;
    let m8 = s8 / nf;
    let variance = m2 - mean * mean;

    let se_mean = (variance / nf).sqrt() + 1e-12;
    let se_variance = ((m4 - m2 * m2).max(0.0) / nf).sqrt() + 1e-12;
    let se_fourth = ((m8 - m4 * m4).max(0.0) / nf).sqrt() + 1e-12;

    let expected_fourth = dist.fourth_moment();
    // gate the variance on the raw second moment so exact laws (rademacher)
    // are not failed by the O(mean^2) bias of the central estimate
    let pass = mean.abs() < 4.0 * se_mean
        && (m2 - 1.0).abs() < 4.0 * se_variance
        && (m4 - expected_fourth).abs() < 4.0 * se_fourth;

    Ok(MomentReport {
        n_draws,
        mean,
        variance,
        fourth: m4,
        se_mean,
        se_variance,
        se_fourth,
        expected_fourth,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::simpson;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn self_adjoint_for_any_seed(seed in any::<u64>(), idx in 0u64..64, beta in 1u8..=2, kind in 0usize..4) {
            let kinds = [
                EntryKind::Gaussian,
                EntryKind::Rademacher,
                EntryKind::Uniform,
                EntryKind::Laplace,
            ];
            let cfg = EnsembleConfig::new(
                SymmetryClass::from_beta(beta).unwrap(),
                6,
                EntryDistribution::new(kinds[kind]),
                seed,
            )
            .unwrap();
            let h = sample_wigner(&cfg, idx).unwrap();
            prop_assert!(h.is_self_adjoint());
            // reproducibility is exact
            prop_assert_eq!(h.fingerprint(), sample_wigner(&cfg, idx).unwrap().fingerprint());
        }
    }

    #[test]
    fn rademacher_two_by_two_entries() {
        let cfg = EnsembleConfig::new(
            SymmetryClass::Symmetric,
            2,
            EntryDistribution::rademacher(),
            7,
        )
        .unwrap();
        let h = sample_wigner(&cfg, 0).unwrap();
        let off = h.entry(0, 1).re;
        let want = std::f64::consts::FRAC_1_SQRT_2;
        assert!((off.abs() - want).abs() < 1e-15);
    }

    #[test]
    fn reproducible_and_independent() {
        let cfg = EnsembleConfig::goe(16, 99);
        let a = sample_wigner(&cfg, 3).unwrap();
        let b = sample_wigner(&cfg, 3).unwrap();
        let c = sample_wigner(&cfg, 4).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn samples_are_self_adjoint() {
        for cfg in [EnsembleConfig::goe(10, 1), EnsembleConfig::gue(10, 1)] {
            for s in 0..5 {
                assert!(sample_wigner(&cfg, s).unwrap().is_self_adjoint());
            }
        }
    }

    #[test]
    fn hermitian_real_part_variance() {
        // Var(Re h_ij) should be 1/(2N) for the hermitian class.
        let n = 8;
        let cfg = EnsembleConfig::gue(n, 5);
        let draws = 100_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for s in 0..draws {
            let h = sample_wigner(&cfg, s as u64).unwrap();
            let x = h.entry(0, 1).re;
            sum += x;
            sumsq += x * x;
        }
        let nf = draws as f64;
        let var = sumsq / nf - (sum / nf).powi(2);
        let want = 1.0 / (2.0 * n as f64);
        let se = want * (2.0f64 / nf).sqrt();
        assert!((var - want).abs() < 3.0 * se, "var {var} want {want}");
    }

    #[test]
    fn symmetric_diagonal_variance() {
        // Diagonal variance 2/N for the symmetric class.
        let n = 16;
        let cfg = EnsembleConfig::goe(n, 11);
        let draws = 20_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for s in 0..draws / n {
            let h = sample_wigner(&cfg, s as u64).unwrap();
            for i in 0..n {
                let x = h.entry(i, i).re;
                sum += x;
                sumsq += x * x;
                count += 1;
            }
        }
        let nf = count as f64;
        let mean = sum / nf;
        let var = sumsq / nf - mean * mean;
        let want = 2.0 / n as f64;
        let se_mean = (want / nf).sqrt();
        let se_var = want * (2.0f64 / nf).sqrt();
        assert!(mean.abs() < 3.0 * se_mean);
        assert!((var - want).abs() < 3.0 * se_var);
    }

    #[test]
    fn moment_reports_pass() {
        for dist in [
            EntryDistribution::gaussian(),
            EntryDistribution::rademacher(),
            EntryDistribution::uniform(),
            EntryDistribution::laplace(),
        ] {
            let rep = check_moments(&dist, 100_000).unwrap();
            assert!(rep.pass, "{:?}: {rep:?}", dist.kind);
        }
    }

    #[test]
    fn rademacher_moments_exact() {
        let rep = check_moments(&EntryDistribution::rademacher(), 10_000).unwrap();
        assert!((rep.variance - (1.0 - rep.mean * rep.mean)).abs() < 1e-12);
        assert!((rep.fourth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourth_moments_match_quadrature() {
        for dist in [
            EntryDistribution::gaussian(),
            EntryDistribution::uniform(),
            EntryDistribution::laplace(),
        ] {
            let f = |x: f64| x.powi(4) * dist.density(x).unwrap();
            // integrate over the exact support; the uniform density has jumps
            let cut = if dist.kind == EntryKind::Uniform { 3.0f64.sqrt() } else { 40.0 };
            let m4 = simpson(f, -cut, cut, 400_000);
            assert!(
                (m4 - dist.fourth_moment()).abs() < 1e-6,
                "{:?}: quadrature {m4} vs {}",
                dist.kind,
                dist.fourth_moment()
            );
        }
    }

    #[test]
    fn laplace_is_subexponential() {
        let d = EntryDistribution::laplace();
        assert_eq!(d.decay_class, DecayClass::Subexponential);
        assert_eq!(d.decay_exponent, 1.0);
        for d in [EntryDistribution::gaussian(), EntryDistribution::rademacher(), EntryDistribution::uniform()] {
            assert_eq!(d.decay_class, DecayClass::GaussianDecay);
        }
    }
}
