//! Python bindings: Wigner ensembles, semicircle reference quantities, the
//! Wigner surmise, sine-kernel determinants, gap observables, and the flow
//! simulators, plus a bridge to the text-spec experiment runner.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use wigner_core::ensembles::{
    check_moments, sample_wigner, EnsembleConfig, EntryDistribution, EntryKind, SymmetryClass,
};
use wigner_core::error::Error;
use wigner_core::flows;
use wigner_core::harness::{run_experiment, ExperimentSpec};
use wigner_core::oracles;
use wigner_core::rng::StreamRng;
use wigner_core::spectral;
use wigner_core::statistics;

fn pyerr(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Schema(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_config(beta: u8, n: usize, dist: &str, seed: u64) -> PyResult<EnsembleConfig> {
    let symmetry = SymmetryClass::from_beta(beta).map_err(pyerr)?;
    let dist = EntryDistribution::new(EntryKind::parse(dist).map_err(pyerr)?);
    EnsembleConfig::new(symmetry, n, dist, seed).map_err(pyerr)
}

/// One Wigner law: symmetry class, dimension, entry distribution, seed.
#[pyclass]
struct WignerEnsemble {
    config: EnsembleConfig,
}

#[pymethods]
impl WignerEnsemble {
    #[new]
    #[pyo3(signature = (beta, n, dist = "gaussian", seed = 0))]
    fn new(beta: u8, n: usize, dist: &str, seed: u64) -> PyResult<Self> {
        Ok(WignerEnsemble {
            config: parse_config(beta, n, dist, seed)?,
        })
    }

    #[getter]
    fn beta(&self) -> u8 {
        self.config.beta()
    }

    #[getter]
    fn n(&self) -> usize {
        self.config.n
    }

    /// Ascending eigenvalues of the `sample_index`-th matrix.
    fn eigenvalues(&self, sample_index: u64) -> PyResult<Vec<f64>> {
        let h = sample_wigner(&self.config, sample_index).map_err(pyerr)?;
        Ok(spectral::eigen_decompose(&h, false).map_err(pyerr)?.eigenvalues)
    }

    /// Eigenvalues after running the matrix OU flow for matrix time t.
    fn evolved_eigenvalues(&self, sample_index: u64, t: f64, flow_seed: u64) -> PyResult<Vec<f64>> {
        let h = sample_wigner(&self.config, sample_index).map_err(pyerr)?;
        let ht = flows::matrix_ou_flow(&h, t, flow_seed).map_err(pyerr)?;
        Ok(spectral::eigen_decompose(&ht, false).map_err(pyerr)?.eigenvalues)
    }

    /// Normalized bulk gaps of one sample.
    #[pyo3(signature = (sample_index, bulk_fraction = 0.6))]
    fn bulk_gaps(&self, sample_index: u64, bulk_fraction: f64) -> PyResult<Vec<f64>> {
        let vals = self.eigenvalues(sample_index)?;
        Ok(statistics::normalized_bulk_gaps(&vals, bulk_fraction))
    }

    /// Empirical Stieltjes transform at z = re + i im, Im z > 0.
    fn stieltjes(&self, sample_index: u64, re: f64, im: f64) -> PyResult<(f64, f64)> {
        let vals = self.eigenvalues(sample_index)?;
        let spec = spectral::Spectrum {
            eigenvalues: vals,
            eigenvectors: None,
        };
        let m = spectral::empirical_stieltjes(&spec, Complex64::new(re, im)).map_err(pyerr)?;
        Ok((m.re, m.im))
    }

    /// Sample-moment report of the entry law: (mean, variance, fourth, pass).
    fn check_moments(&self, n_draws: usize) -> PyResult<(f64, f64, f64, bool)> {
        let rep = check_moments(&self.config.dist, n_draws).map_err(pyerr)?;
        Ok((rep.mean, rep.variance, rep.fourth, rep.pass))
    }

    fn __repr__(&self) -> String {
        format!(
            "WignerEnsemble(beta={}, n={}, dist='{}', seed={})",
            self.config.beta(),
            self.config.n,
            self.config.dist.kind.name(),
            self.config.seed
        )
    }
}

/// Semicircle density rho_sc(e) = sqrt((4 - e^2)_+) / (2 pi).
#[pyfunction]
fn semicircle_density(e: f64) -> f64 {
    spectral::semicircle_density(e)
}

/// Semicircle CDF n_sc(e), closed form.
#[pyfunction]
fn semicircle_cdf(e: f64) -> f64 {
    spectral::semicircle_cdf(e)
}

/// Stieltjes transform of the semicircle law at z = re + i im (Im z > 0).
#[pyfunction]
fn semicircle_stieltjes(re: f64, im: f64) -> PyResult<(f64, f64)> {
    let m = spectral::semicircle_stieltjes(Complex64::new(re, im)).map_err(pyerr)?;
    Ok((m.re, m.im))
}

/// Classical locations gamma_1..gamma_N (n_sc(gamma_j) = j/N).
#[pyfunction]
fn classical_locations(n: usize) -> Vec<f64> {
    spectral::classical_locations(n)
}

/// Wigner surmise density at normalized spacing s.
#[pyfunction]
fn wigner_surmise(beta: u8, s: f64) -> PyResult<f64> {
    oracles::wigner_surmise(beta, s).map_err(pyerr)
}

/// Closed-form surmise CDF.
#[pyfunction]
fn surmise_cdf(beta: u8, s: f64) -> PyResult<f64> {
    oracles::surmise_cdf(beta, s).map_err(pyerr)
}

/// det[K(x_i - x_j)] with K the sine kernel.
#[pyfunction]
fn sine_kernel_determinant(points: Vec<f64>) -> f64 {
    statistics::sine_kernel_determinant(&points)
}

/// (1/N) sum_{i in J} G(N(x_{i+n} - x_i)) with G a triangle bump at `center`
/// (width 1) over the central `bulk_fraction` of indices.
#[pyfunction]
#[pyo3(signature = (positions, n_step = 1, center = 1.0, bulk_fraction = 0.6))]
fn gap_observable(positions: Vec<f64>, n_step: usize, center: f64, bulk_fraction: f64) -> PyResult<f64> {
    let n = positions.len();
    let g = statistics::TestFunction::Triangle { center };
    let window = statistics::bulk_indices(n, bulk_fraction);
    let j = window.start..window.end.min(n.saturating_sub(n_step));
    statistics::gap_observable(&positions, &g, n_step, j).map_err(pyerr)
}

/// Evolve an ordered configuration by the eigenvalue SDE to time t.
#[pyfunction]
#[pyo3(signature = (positions, beta, t, dt_max = 1e-3, seed = 0))]
fn dbm_evolve(positions: Vec<f64>, beta: f64, t: f64, dt_max: f64, seed: u64) -> PyResult<Vec<f64>> {
    let rng = StreamRng::new(seed, 0, 0);
    let mut state = flows::FlowState::new(positions, beta, rng).map_err(pyerr)?;
    flows::evolve_dbm(&mut state, t, dt_max).map_err(pyerr)?;
    Ok(state.positions)
}

/// Run a text experiment spec; returns [(metric, value, stderr, count)].
#[pyfunction]
fn run_experiment_text(spec_text: &str) -> PyResult<Vec<(String, f64, f64, u64)>> {
    let spec = ExperimentSpec::parse(spec_text).map_err(pyerr)?;
    let record = run_experiment(&spec).map_err(pyerr)?;
    Ok(record
        .metrics
        .into_iter()
        .map(|m| (m.name, m.value, m.stderr, m.count))
        .collect())
}

#[pymodule]
fn wigner_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<WignerEnsemble>()?;
    m.add_function(wrap_pyfunction!(semicircle_density, m)?)?;
    m.add_function(wrap_pyfunction!(semicircle_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(semicircle_stieltjes, m)?)?;
    m.add_function(wrap_pyfunction!(classical_locations, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_surmise, m)?)?;
    m.add_function(wrap_pyfunction!(surmise_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(sine_kernel_determinant, m)?)?;
    m.add_function(wrap_pyfunction!(gap_observable, m)?)?;
    m.add_function(wrap_pyfunction!(dbm_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_text, m)?)?;
    Ok(())
}
