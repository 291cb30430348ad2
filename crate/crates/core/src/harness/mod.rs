//! Experiment configuration, deterministic execution, and result records.
//!
//! Experiment specs are plain-text `key = value` files with a schema version.
//! The ensemble is described by the fields `beta` (1 symmetric, 2 hermitian),
//! `n` (dimension), `dist` (gaussian | rademacher | uniform | laplace), and
//! `seed`; these four keys are the serialized form of an ensemble
//! configuration everywhere in the toolkit. Work is partitioned by sample
//! index (see `pool`), so metric values are bit-identical for any worker
//! count; re-running an identical spec reproduces identical numbers.

pub mod acceptance;
pub mod io;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::ensembles::{EnsembleConfig, EntryDistribution, EntryKind, SymmetryClass};
use crate::error::{fnv1a, Error, Result};
use crate::flows;
use crate::numeric::mean_se;
use crate::oracles;
use crate::pool;
use crate::rng::StreamRng;
use crate::spectral::classical_locations;
use crate::statistics::{self, observable_battery, TestFunction};

pub const SCHEMA_VERSION: u32 = 1;

/// Experiment families the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    LocalLaw,
    Delocalization,
    Repulsion,
    Gaps,
    Correlation,
    DbmInvariance,
    OuOracle,
    Relaxation,
    Universality,
    EntropyDecay,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LocalLaw => "local-law",
            ExperimentKind::Delocalization => "delocalization",
            ExperimentKind::Repulsion => "repulsion",
            ExperimentKind::Gaps => "gaps",
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::DbmInvariance => "dbm-invariance",
            ExperimentKind::OuOracle => "ou-oracle",
            ExperimentKind::Relaxation => "relaxation",
            ExperimentKind::Universality => "universality",
            ExperimentKind::EntropyDecay => "entropy-decay",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "local-law" => ExperimentKind::LocalLaw,
            "delocalization" => ExperimentKind::Delocalization,
            "repulsion" => ExperimentKind::Repulsion,
            "gaps" => ExperimentKind::Gaps,
            "correlation" => ExperimentKind::Correlation,
            "dbm-invariance" => ExperimentKind::DbmInvariance,
            "ou-oracle" => ExperimentKind::OuOracle,
            "relaxation" => ExperimentKind::Relaxation,
            "universality" => ExperimentKind::Universality,
            "entropy-decay" => ExperimentKind::EntropyDecay,
            other => return Err(Error::Schema(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// A fully serializable experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub ensemble: EnsembleConfig,
    pub n_samples: usize,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    /// Kind-specific numeric parameters; lists are comma-separated in files.
    pub params: BTreeMap<String, Vec<f64>>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, ensemble: EnsembleConfig, n_samples: usize) -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            kind,
            ensemble,
            n_samples,
            workers: None,
            output: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, values: &[f64]) -> Self {
        self.params.insert(key.to_string(), values.to_vec());
        self
    }

    pub fn scalar(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(Error::Schema(format!("parameter `{key}` must be a scalar"))),
            None => Err(Error::Schema(format!("missing parameter `{key}`"))),
        }
    }

    pub fn scalar_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(Error::Schema(format!("parameter `{key}` must be a scalar"))),
            None => Ok(default),
        }
    }

    pub fn list(&self, key: &str) -> Result<&[f64]> {
        self.params
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Schema(format!("missing parameter `{key}`")))
    }

    /// Canonical text form; the spec hash is FNV-1a over these bytes.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema_version = {}", self.schema_version);
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "beta = {}", self.ensemble.beta());
        let _ = writeln!(s, "n = {}", self.ensemble.n);
        let _ = writeln!(s, "dist = {}", self.ensemble.dist.kind.name());
        let _ = writeln!(s, "seed = {}", self.ensemble.seed);
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        if let Some(w) = self.workers {
            let _ = writeln!(s, "workers = {w}");
        }
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        for (k, v) in &self.params {
            let vals: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(s, "{k} = {}", vals.join(", "));
        }
        s
    }

    pub fn hash(&self) -> u64 {
        // exclude output/workers: they affect execution, not the numbers
        let mut spec = self.clone();
        spec.output = None;
        spec.workers = None;
        fnv1a(spec.to_config_string().as_bytes())
    }

    /// Parse the `key = value` format (comments start with #).
    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected key = value", lineno + 1)))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take = |fields: &mut BTreeMap<String, String>, key: &str| -> Result<String> {
            fields
                .remove(key)
                .ok_or_else(|| Error::Schema(format!("missing required key `{key}`")))
        };
        let schema_version: u32 = take(&mut fields, "schema_version")?
            .parse()
            .map_err(|e| Error::Schema(format!("schema_version: {e}")))?;
        if schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {schema_version} (this build reads {SCHEMA_VERSION})"
            )));
        }
        let kind = ExperimentKind::parse(&take(&mut fields, "kind")?)?;
        let beta: u8 = take(&mut fields, "beta")?
            .parse()
            .map_err(|e| Error::Schema(format!("beta: {e}")))?;
        let n: usize = take(&mut fields, "n")?
            .parse()
            .map_err(|e| Error::Schema(format!("n: {e}")))?;
        let dist = EntryDistribution::new(EntryKind::parse(&take(&mut fields, "dist")?)?);
        let seed: u64 = take(&mut fields, "seed")?
            .parse()
            .map_err(|e| Error::Schema(format!("seed: {e}")))?;
        let n_samples: usize = take(&mut fields, "n_samples")?
            .parse()
            .map_err(|e| Error::Schema(format!("n_samples: {e}")))?;
        let ensemble = EnsembleConfig::new(SymmetryClass::from_beta(beta)?, n, dist, seed)
            .map_err(|e| Error::Schema(e.to_string()))?;

        let mut spec = ExperimentSpec::new(kind, ensemble, n_samples);
        spec.schema_version = schema_version;
        if let Some(w) = fields.remove("workers") {
            spec.workers = Some(w.parse().map_err(|e| Error::Schema(format!("workers: {e}")))?);
        }
        if let Some(out) = fields.remove("output") {
            spec.output = Some(PathBuf::from(out));
        }
        for (k, v) in fields {
            let vals: Result<Vec<f64>> = v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Schema(format!("{k}: {e}")))
                })
                .collect();
            spec.params.insert(k, vals?);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentSpec> {
        ExperimentSpec::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate().map_err(|e| Error::Schema(e.to_string()))?;
        if self.n_samples == 0 {
            return Err(Error::Schema("n_samples must be positive".into()));
        }
        let need: &[&str] = match self.kind {
            ExperimentKind::LocalLaw => &["energy", "eta_grid"],
            ExperimentKind::Delocalization => &[],
            ExperimentKind::Repulsion => &["energy", "eps_grid", "order"],
            ExperimentKind::Gaps => &[],
            ExperimentKind::Correlation => &["k", "energy", "delta"],
            ExperimentKind::DbmInvariance => &["t_end"],
            ExperimentKind::OuOracle => &["t_matrix"],
            ExperimentKind::Relaxation => &["eta", "t_grid"],
            ExperimentKind::Universality => &["t_flow"],
            ExperimentKind::EntropyDecay => &["eta_grid"],
        };
        for key in need {
            if !self.params.contains_key(*key) {
                return Err(Error::Schema(format!(
                    "experiment `{}` requires parameter `{key}`",
                    self.kind.name()
                )));
            }
        }
        Ok(())
    }
}

/// One measured quantity with its uncertainty.
#[derive(Debug, Clone)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
}

/// Result envelope of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub spec_hash: u64,
    pub version: String,
    pub kind: ExperimentKind,
    pub wall_seconds: f64,
    pub metrics: Vec<Metric>,
}

impl ExperimentRecord {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# wigner-lab record v1");
        let _ = writeln!(s, "# kind: {}", self.kind.name());
        let _ = writeln!(s, "# spec_hash: {:#018x}", self.spec_hash);
        let _ = writeln!(s, "# version: {}", self.version);
        let _ = writeln!(s, "# wall_seconds: {:.3}", self.wall_seconds);
        let _ = writeln!(s, "# columns: metric value stderr count");
        for m in &self.metrics {
            let _ = writeln!(s, "{} {:.17e} {:.17e} {}", m.name, m.value, m.stderr, m.count);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn push_metric(metrics: &mut Vec<Metric>, name: impl Into<String>, value: f64, stderr: f64, count: u64) {
    metrics.push(Metric {
        name: name.into(),
        value,
        stderr,
        count,
    });
}

/// Dispatch an experiment spec to its owning module, write outputs, and
/// return the record. Deterministic given the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    spec.validate()?;
    let _guard = spec.workers.map(pool::WorkerOverride::new);
    let start = Instant::now();
    let mut metrics = Vec::new();
    let mut tables: Vec<(String, Vec<(String, String)>, Vec<&str>, Vec<Vec<f64>>)> = Vec::new();
    let cfg = &spec.ensemble;
    let hash_meta = |spec: &ExperimentSpec| -> Vec<(String, String)> {
        vec![
            ("kind".into(), spec.kind.name().to_string()),
            ("spec_hash".into(), format!("{:#018x}", spec.hash())),
            ("n_samples".into(), spec.n_samples.to_string()),
            ("beta".into(), spec.ensemble.beta().to_string()),
            ("n".into(), spec.ensemble.n.to_string()),
        ]
    };

    match spec.kind {
        ExperimentKind::LocalLaw => {
            let e = spec.scalar("energy")?;
            let eta_grid = spec.list("eta_grid")?.to_vec();
            let k_bound = spec.scalar_or("k_bound", 2.0)?;
            let rep = statistics::local_law_scan(cfg, e, &eta_grid, spec.n_samples, k_bound)?;
            let mut rows = Vec::new();
            for (i, &eta) in rep.eta_grid.iter().enumerate() {
                push_metric(
                    &mut metrics,
                    format!("mean_dev_eta_{eta}"),
                    rep.mean_dev[i],
                    rep.se_dev[i],
                    rep.sample_count as u64,
                );
                rows.push(vec![eta, rep.mean_dev[i], rep.se_dev[i], rep.max_dev[i]]);
            }
            let mut meta = hash_meta(spec);
            meta.push(("units".into(), "eta on the spectral scale; deviations in density units".into()));
            tables.push((
                "local_law".into(),
                meta,
                vec!["eta", "mean_abs_dev", "stderr", "max_dev"],
                rows,
            ));
        }
        ExperimentKind::Delocalization => {
            let bulk = spec.scalar_or("bulk_fraction", 0.6)?;
            let scan = statistics::delocalization_scan(cfg, spec.n_samples, bulk)?;
            push_metric(&mut metrics, "mean_n_l4_4", scan.mean_l4, scan.se_l4, scan.vectors as u64);
            push_metric(&mut metrics, "max_n_linf_2", scan.max_sup_sq, 0.0, scan.vectors as u64);
        }
        ExperimentKind::Repulsion => {
            let e = spec.scalar("energy")?;
            let eps_grid = spec.list("eps_grid")?.to_vec();
            let order = spec.scalar("order")? as usize;
            let windows = spec.scalar_or("windows", 1.0)? as usize;
            let rep =
                statistics::level_repulsion_probe(cfg, e, &eps_grid, order, spec.n_samples, windows)?;
            push_metric(
                &mut metrics,
                "fitted_slope",
                rep.slope,
                rep.slope_se,
                rep.hits.iter().sum(),
            );
            push_metric(&mut metrics, "expected_slope", rep.expected_slope, 0.0, 0);
            let mut rows = Vec::new();
            for i in 0..rep.eps_grid.len() {
                rows.push(vec![
                    rep.eps_grid[i],
                    rep.probs[i],
                    rep.hits[i] as f64,
                    if rep.sparse[i] { 1.0 } else { 0.0 },
                ]);
            }
            let mut meta = hash_meta(spec);
            meta.push(("units".into(), "epsilon in mean spacings (window width epsilon/N); prob dimensionless".into()));
            tables.push((
                "repulsion".into(),
                meta,
                vec!["epsilon", "prob", "hits", "sparse_flag"],
                rows,
            ));
        }
        ExperimentKind::Gaps => {
            let bulk = spec.scalar_or("bulk_fraction", 0.6)?;
            let (sample, hist) = statistics::gap_distribution(cfg, bulk, spec.n_samples)?;
            let ks = crate::numeric::ks_distance(&sample.gaps, |s| {
                oracles::surmise_cdf(cfg.beta(), s).unwrap()
            });
            push_metric(&mut metrics, "mean_gap", sample.mean(), 0.0, sample.gaps.len() as u64);
            push_metric(&mut metrics, "ks_vs_surmise", ks, 0.0, sample.gaps.len() as u64);
            let dens = hist.density();
            let rows: Vec<Vec<f64>> = (0..dens.len())
                .map(|i| vec![0.5 * (hist.edges[i] + hist.edges[i + 1]), dens[i], hist.counts[i] as f64])
                .collect();
            let mut meta = hash_meta(spec);
            meta.push(("units".into(), "s in units of the mean spacing; density integrates to 1".into()));
            tables.push((
                "gap_hist".into(),
                meta,
                vec!["s", "density", "count"],
                rows,
            ));
        }
        ExperimentKind::Correlation => {
            let k = spec.scalar("k")? as usize;
            let e = spec.scalar("energy")?;
            let delta = spec.scalar("delta")?;
            let width = spec.scalar_or("bin_width", 0.1)?;
            let x_max = spec.scalar_or("x_max", 3.0)?;
            let edges = statistics::regular_bins(x_max, width);
            let est = statistics::kpoint_correlation(cfg, k, e, delta, &edges, spec.n_samples)?;
            let centers = est.bin_centers();
            let mut max_dev: f64 = 0.0;
            let mut rows = Vec::new();
            for i in 0..centers.len() {
                let reference = match (k, cfg.beta()) {
                    (1, _) => 1.0,
                    (2, 2) => statistics::sine_kernel_two_point(centers[i]),
                    (3, 2) => statistics::sine_kernel_determinant(&[0.0, centers[i], 2.0 * centers[i]]),
                    _ => f64::NAN,
                };
                if centers[i] >= 0.2 && reference.is_finite() {
                    max_dev = max_dev.max((est.values[i] - reference).abs());
                }
                rows.push(vec![
                    centers[i],
                    est.values[i],
                    est.errors[i],
                    est.counts[i] as f64,
                    reference,
                ]);
            }
            push_metric(&mut metrics, "max_abs_dev_vs_reference", max_dev, 0.0, est.references);
            let mut meta = hash_meta(spec);
            meta.push(("units".into(), "x in units of the mean spacing; values are unfolded correlations".into()));
            tables.push((
                "correlation".into(),
                meta,
                vec!["x", "value", "stderr", "count", "reference"],
                rows,
            ));
        }
        ExperimentKind::DbmInvariance => {
            let t_end = spec.scalar("t_end")?;
            let dt_max = spec.scalar_or("dt_max", 1e-3)?;
            let bulk = spec.scalar_or("bulk_fraction", 0.6)?;
            let evolved = flows::dbm_evolved_gaps(cfg, spec.n_samples, t_end, dt_max, bulk, 0)?;
            let fresh = flows::static_gaps(cfg, spec.n_samples, bulk, spec.n_samples as u64)?;
            let ks = crate::numeric::ks_two_sample(&evolved, &fresh);
            push_metric(&mut metrics, "ks_evolved_vs_static", ks, 0.0, evolved.len() as u64);
        }
        ExperimentKind::OuOracle => {
            let t_matrix = spec.scalar("t_matrix")?;
            let dt_max = spec.scalar_or("dt_max", 1e-3)?;
            let bulk = spec.scalar_or("bulk_fraction", 0.6)?;
            let tau = flows::sde_time_of_matrix_time(cfg.beta() as f64, t_matrix);
            let sde = flows::dbm_evolved_gaps(cfg, spec.n_samples, tau, dt_max, bulk, 0)?;
            let ou = flows::ou_evolved_gaps(cfg, spec.n_samples, t_matrix, bulk, spec.n_samples as u64)?;
            let ks = crate::numeric::ks_two_sample(&sde, &ou);
            push_metric(&mut metrics, "ks_sde_vs_matrix_ou", ks, 0.0, sde.len() as u64);
        }
        ExperimentKind::Relaxation => {
            let eta = spec.scalar("eta")?;
            let t_grid = spec.list("t_grid")?.to_vec();
            let rep = relaxation_experiment(cfg, eta, &t_grid, spec.n_samples)?;
            push_metric(&mut metrics, "reference_value", rep.reference, rep.reference_se, 0);
            push_metric(&mut metrics, "relax_equil_time", rep.relax_equil_time, 0.0, 0);
            push_metric(&mut metrics, "dbm_equil_time", rep.dbm_equil_time, 0.0, 0);
            let rows: Vec<Vec<f64>> = (0..rep.times.len())
                .map(|i| {
                    vec![
                        rep.times[i],
                        rep.relax_mean[i],
                        rep.relax_se[i],
                        rep.dbm_mean[i],
                        rep.dbm_se[i],
                    ]
                })
                .collect();
            let mut meta = hash_meta(spec);
            meta.push(("units".into(), "t in flow time; observables dimensionless".into()));
            tables.push((
                "relaxation".into(),
                meta,
                vec!["t", "relax_obs", "relax_se", "dbm_obs", "dbm_se"],
                rows,
            ));
        }
        ExperimentKind::Universality => {
            let t_flow = spec.scalar("t_flow")?;
            let bulk = spec.scalar_or("bulk_fraction", 0.6)?;
            let rep = flows::universality_experiment(cfg, t_flow, &observable_battery(), spec.n_samples, bulk)?;
            for row in &rep.rows {
                push_metric(
                    &mut metrics,
                    format!("z_{}_n{}", row.g_name, row.n_step),
                    row.z,
                    1.0,
                    spec.n_samples as u64,
                );
                push_metric(
                    &mut metrics,
                    format!("diff_{}_n{}", row.g_name, row.n_step),
                    row.diff,
                    row.combined_se,
                    spec.n_samples as u64,
                );
            }
        }
        ExperimentKind::EntropyDecay => {
            let etas = spec.list("eta_grid")?.to_vec();
            let beta = cfg.beta() as f64;
            let coarse = spec.scalar_or("coarse", 0.0)? != 0.0;
            let grid = if coarse {
                oracles::gap_grid_coarse()
            } else {
                oracles::gap_grid()
            };
            let mut rates = Vec::new();
            for &eta in &etas {
                let gibbs = oracles::GibbsSpec::omega(beta, 2, eta)?;
                let model = oracles::GapModel::new(&gibbs, grid.clone())?;
                let q0 = oracles::DensityGrid::mu_relative(&model, &gibbs)?;
                let rep = oracles::fokker_planck_decay(&model, &q0, 60.0, 600, None)?;
                push_metric(&mut metrics, format!("rate_eta_{eta}"), rep.rate, 0.0, rep.steps);
                push_metric(
                    &mut metrics,
                    format!("mass_error_eta_{eta}"),
                    rep.mass_error,
                    0.0,
                    rep.steps,
                );
                let monotone = rep.entropy.windows(2).all(|w| w[1] <= w[0] + 1e-12);
                push_metric(
                    &mut metrics,
                    format!("entropy_monotone_eta_{eta}"),
                    if monotone { 1.0 } else { 0.0 },
                    0.0,
                    rep.entropy.len() as u64,
                );
                rates.push(rep.rate);
                let rows: Vec<Vec<f64>> = (0..rep.times.len())
                    .map(|i| vec![rep.times[i], rep.entropy[i], rep.dirichlet[i]])
                    .collect();
                let mut meta = hash_meta(spec);
                meta.push(("units".into(), "t in flow time; entropy in nats; dirichlet in 1/time".into()));
                tables.push((
                    format!("entropy_decay_eta_{eta}"),
                    meta,
                    vec!["t", "entropy", "dirichlet"],
                    rows,
                ));
            }
            if rates.len() == 2 {
                push_metric(&mut metrics, "rate_ratio", rates[0] / rates[1], 0.0, 0);
            }
        }
    }

    let record = ExperimentRecord {
        spec_hash: spec.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: spec.kind,
        wall_seconds: start.elapsed().as_secs_f64(),
        metrics,
    };

    if let Some(prefix) = &spec.output {
        let record_path = prefix.with_extension("record.txt");
        record.write(&record_path)?;
        for (name, meta, cols, rows) in &tables {
            let table_path = prefix.with_extension(format!("{name}.txt"));
            io::write_table(&table_path, meta, cols, rows)?;
        }
    }
    Ok(record)
}

/// Relaxation-speed comparison: local relaxation flow from the rigid
/// classical-location start versus plain DBM from a uniform (wrong-density)
/// lattice, tracked through a bulk gap observable.
pub struct RelaxationReport {
    pub times: Vec<f64>,
    pub relax_mean: Vec<f64>,
    pub relax_se: Vec<f64>,
    pub dbm_mean: Vec<f64>,
    pub dbm_se: Vec<f64>,
    /// Late-time relaxation-flow value, standing in for the omega average.
    pub reference: f64,
    pub reference_se: f64,
    pub relax_equil_time: f64,
    pub dbm_equil_time: f64,
}

pub fn relaxation_experiment(
    cfg: &EnsembleConfig,
    eta: f64,
    t_grid: &[f64],
    n_traj: usize,
) -> Result<RelaxationReport> {
    let n = cfg.n;
    let beta = cfg.beta() as f64;
    let pot = flows::relaxation_potential(n, eta)?;
    let gamma = pot.gamma.clone();
    let g = TestFunction::Triangle { center: 1.0 };
    let window = statistics::bulk_indices(n, 0.6);
    let j_set = window.start..window.end.min(n - 1);
    let dt_max = 1e-3;

    let observe = |x: &[f64]| statistics::gap_observable(x, &g, 1, j_set.clone()).expect("observable");

    // relaxation flow from the rigid gamma start
    let relax_rows: Vec<Vec<f64>> = pool::parallel_samples(n_traj, |s| {
        let rng = StreamRng::new(cfg.seed ^ 0x0e1a, s as u64, 0);
        let mut state = flows::FlowState::new(gamma.clone(), beta, rng).expect("ordered");
        let mut out = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            flows::evolve_relaxation(&mut state, &pot, t, dt_max).expect("relaxation flow");
            out.push(observe(&state.positions));
        }
        out
    });

    // DBM from a uniform lattice (wrong density, far from equilibrium)
    let lattice: Vec<f64> = (0..n)
        .map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / n as f64)
        .collect();
    let dbm_rows: Vec<Vec<f64>> = pool::parallel_samples(n_traj, |s| {
        let rng = StreamRng::new(cfg.seed ^ 0xdb0, s as u64, 0);
        let mut state = flows::FlowState::new(lattice.clone(), beta, rng).expect("ordered");
        let mut out = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            flows::evolve_dbm(&mut state, t, dt_max).expect("dbm");
            out.push(observe(&state.positions));
        }
        out
    });

    let mut relax_mean = Vec::new();
    let mut relax_se = Vec::new();
    let mut dbm_mean = Vec::new();
    let mut dbm_se = Vec::new();
    for i in 0..t_grid.len() {
        let col: Vec<f64> = relax_rows.iter().map(|r| r[i]).collect();
        let (m, se) = mean_se(&col);
        relax_mean.push(m);
        relax_se.push(se);
        let col: Vec<f64> = dbm_rows.iter().map(|r| r[i]).collect();
        let (m, se) = mean_se(&col);
        dbm_mean.push(m);
        dbm_se.push(se);
    }
    let reference = *relax_mean.last().unwrap();
    let reference_se = *relax_se.last().unwrap();
    let equil_time = |means: &[f64], ses: &[f64]| -> f64 {
        for i in 0..means.len() {
            let band = 2.0 * (ses[i].powi(2) + reference_se.powi(2)).sqrt();
            if (means[i] - reference).abs() < band {
                return t_grid[i];
            }
        }
        f64::INFINITY
    };
    Ok(RelaxationReport {
        times: t_grid.to_vec(),
        relax_equil_time: equil_time(&relax_mean, &relax_se),
        dbm_equil_time: equil_time(&dbm_mean, &dbm_se),
        relax_mean,
        relax_se,
        dbm_mean,
        dbm_se,
        reference,
        reference_se,
    })
}

/// Classical locations as a persisted table (used by the CLI).
pub fn locations_table(n: usize) -> Vec<Vec<f64>> {
    classical_locations(n)
        .iter()
        .enumerate()
        .map(|(i, &g)| vec![(i + 1) as f64, g])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec::new(ExperimentKind::Gaps, EnsembleConfig::goe(40, 5), 4)
    }

    #[test]
    fn spec_roundtrip_through_text() {
        let mut spec = small_spec();
        spec.params.insert("bulk_fraction".into(), vec![0.6]);
        let text = spec.to_config_string();
        let back = ExperimentSpec::parse(&text).unwrap();
        assert_eq!(back.hash(), spec.hash());
        assert_eq!(back.kind, spec.kind);
        assert_eq!(back.ensemble.n, 40);
    }

    #[test]
    fn schema_violations_are_reported() {
        assert!(ExperimentSpec::parse("kind = gaps\n").is_err());
        let bad = "schema_version = 1\nkind = nope\nbeta = 1\nn = 10\ndist = gaussian\nseed = 1\nn_samples = 1\n";
        assert!(ExperimentSpec::parse(bad).is_err());
        let bad_version = "schema_version = 9\nkind = gaps\nbeta = 1\nn = 10\ndist = gaussian\nseed = 1\nn_samples = 1\n";
        assert!(ExperimentSpec::parse(bad_version).is_err());
        let zero_samples = "schema_version = 1\nkind = gaps\nbeta = 1\nn = 10\ndist = gaussian\nseed = 1\nn_samples = 0\n";
        assert!(ExperimentSpec::parse(zero_samples).is_err());
    }

    #[test]
    fn identical_specs_reproduce_identical_numbers() {
        let spec = small_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.metrics.len(), b.metrics.len());
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(x.value.to_bits(), y.value.to_bits(), "{}", x.name);
        }
        assert_eq!(a.spec_hash, b.spec_hash);
    }

    #[test]
    fn worker_count_invariance_of_metrics() {
        let base = small_spec();
        let mut values = Vec::new();
        for workers in [1usize, 4, 8] {
            let mut spec = base.clone();
            spec.workers = Some(workers);
            let rec = run_experiment(&spec).unwrap();
            values.push(rec.metrics.iter().map(|m| m.value.to_bits()).collect::<Vec<_>>());
            assert_eq!(rec.spec_hash, base.hash());
        }
        assert_eq!(values[0], values[1]);
        assert_eq!(values[0], values[2]);
    }
}
