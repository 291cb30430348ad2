//! Command-line front end.
//!
//! Verbs:
//!   sample      --beta B --n N [--dist D] [--seed S] [--index I] [--out FILE]
//!   spectrum    --beta B --n N [--dist D] [--seed S] [--index I] [--vectors] --out FILE
//!   experiment  run <spec-file>
//!   accept      <quick|full>
//!
//! Exit codes: 0 pass, 1 criterion failure, 2 usage error, 3 numerical error.
//! WIGNER_LAB_WORKERS overrides the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use wigner_core::ensembles::{
    sample_wigner, EnsembleConfig, EntryDistribution, EntryKind, MatrixData, SymmetryClass,
};
use wigner_core::error::Error;
use wigner_core::harness::acceptance::{acceptance_suite, Tier};
use wigner_core::harness::{io, run_experiment, ExperimentSpec};
use wigner_core::spectral::eigen_decompose;

const USAGE: &str = "wigner-lab <verb>

verbs:
  sample      --beta <1|2> --n <N> [--dist gaussian|rademacher|uniform|laplace]
              [--seed S] [--index I] [--out FILE]
              draw one Wigner matrix; write its entries (or a summary to stdout)
  spectrum    same flags plus [--vectors]; eigendecompose one sample and write
              the (index, eigenvalue) table with an optional eigenvector block
  experiment  run <spec-file>   execute an experiment spec (key = value text)
  accept      <quick|full>      run the acceptance criteria battery

exit codes: 0 pass, 1 criterion failure, 2 usage, 3 numerical error
environment: WIGNER_LAB_WORKERS overrides the worker count";

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n\n{USAGE}");
    ExitCode::from(2)
}

fn error_code(err: &Error) -> ExitCode {
    let code = match err {
        Error::Config(_) | Error::Domain(_) | Error::Schema(_) => 2,
        _ => 3,
    };
    eprintln!("error: {err}");
    ExitCode::from(code)
}

struct MatrixArgs {
    config: EnsembleConfig,
    index: u64,
    out: Option<PathBuf>,
    vectors: bool,
}

fn parse_matrix_args(args: &[String]) -> Result<MatrixArgs, String> {
    let mut beta: Option<u8> = None;
    let mut n: Option<usize> = None;
    let mut dist = EntryDistribution::gaussian();
    let mut seed = 0u64;
    let mut index = 0u64;
    let mut out = None;
    let mut vectors = false;
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("flag {name} needs a value"))
        };
        match flag.as_str() {
            "--beta" => beta = Some(value("--beta")?.parse().map_err(|e| format!("--beta: {e}"))?),
            "--n" => n = Some(value("--n")?.parse().map_err(|e| format!("--n: {e}"))?),
            "--dist" => {
                dist = EntryDistribution::new(
                    EntryKind::parse(&value("--dist")?).map_err(|e| e.to_string())?,
                )
            }
            "--seed" => seed = value("--seed")?.parse().map_err(|e| format!("--seed: {e}"))?,
            "--index" => index = value("--index")?.parse().map_err(|e| format!("--index: {e}"))?,
            "--out" => out = Some(PathBuf::from(value("--out")?)),
            "--vectors" => vectors = true,
            other => return Err(format!("unknown flag {other}")),
        }
    }
    let beta = beta.ok_or("missing --beta")?;
    let n = n.ok_or("missing --n")?;
    let symmetry = SymmetryClass::from_beta(beta).map_err(|e| e.to_string())?;
    let config = EnsembleConfig::new(symmetry, n, dist, seed).map_err(|e| e.to_string())?;
    Ok(MatrixArgs {
        config,
        index,
        out,
        vectors,
    })
}

fn cmd_sample(args: &[String]) -> ExitCode {
    let parsed = match parse_matrix_args(args) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let h = match sample_wigner(&parsed.config, parsed.index) {
        Ok(h) => h,
        Err(e) => return error_code(&e),
    };
    match &parsed.out {
        Some(path) => {
            let meta = vec![
                ("beta".to_string(), parsed.config.beta().to_string()),
                ("n".to_string(), parsed.config.n.to_string()),
                ("dist".to_string(), parsed.config.dist.kind.name().to_string()),
                ("seed".to_string(), parsed.config.seed.to_string()),
                ("sample_index".to_string(), parsed.index.to_string()),
            ];
            let rows: Vec<Vec<f64>> = match &h.data {
                MatrixData::Real(a) => (0..h.n)
                    .flat_map(|i| (i..h.n).map(move |j| (i, j)).collect::<Vec<_>>())
                    .map(|(i, j)| vec![i as f64, j as f64, a[i * h.n + j], 0.0])
                    .collect(),
                MatrixData::Complex(a) => (0..h.n)
                    .flat_map(|i| (i..h.n).map(move |j| (i, j)).collect::<Vec<_>>())
                    .map(|(i, j)| vec![i as f64, j as f64, a[i * h.n + j].re, a[i * h.n + j].im])
                    .collect(),
            };
            if let Err(e) = io::write_table(path, &meta, &["i", "j", "re", "im"], &rows) {
                return error_code(&e);
            }
            println!("wrote upper triangle of {}x{} sample to {}", h.n, h.n, path.display());
        }
        None => {
            println!(
                "sample: beta={} N={} dist={} seed={} index={} trace={:.6} fingerprint={:#018x}",
                parsed.config.beta(),
                parsed.config.n,
                parsed.config.dist.kind.name(),
                parsed.config.seed,
                parsed.index,
                h.trace(),
                h.fingerprint()
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_spectrum(args: &[String]) -> ExitCode {
    let parsed = match parse_matrix_args(args) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let h = match sample_wigner(&parsed.config, parsed.index) {
        Ok(h) => h,
        Err(e) => return error_code(&e),
    };
    let spec = match eigen_decompose(&h, parsed.vectors) {
        Ok(s) => s,
        Err(e) => return error_code(&e),
    };
    match &parsed.out {
        Some(path) => {
            let meta = vec![
                ("beta".to_string(), parsed.config.beta().to_string()),
                ("dist".to_string(), parsed.config.dist.kind.name().to_string()),
                ("seed".to_string(), parsed.config.seed.to_string()),
                ("sample_index".to_string(), parsed.index.to_string()),
            ];
            if let Err(e) = io::write_spectrum(path, &spec, &meta) {
                return error_code(&e);
            }
            println!("wrote spectrum (N={}) to {}", spec.n(), path.display());
        }
        None => {
            let n = spec.n();
            println!(
                "spectrum: N={n} lambda_min={:.6} lambda_max={:.6}",
                spec.eigenvalues[0],
                spec.eigenvalues[n - 1]
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_experiment(args: &[String]) -> ExitCode {
    if args.len() != 2 || args[0] != "run" {
        return usage_error("expected: experiment run <spec-file>");
    }
    let spec = match ExperimentSpec::from_file(std::path::Path::new(&args[1])) {
        Ok(s) => s,
        Err(e) => return error_code(&e),
    };
    match run_experiment(&spec) {
        Ok(record) => {
            print!("{}", record.render());
            ExitCode::SUCCESS
        }
        Err(e) => error_code(&e),
    }
}

fn cmd_accept(args: &[String]) -> ExitCode {
    if args.len() != 1 {
        return usage_error("expected: accept <quick|full>");
    }
    let tier = match Tier::parse(&args[0]) {
        Ok(t) => t,
        Err(_) => return usage_error(&format!("unknown tier `{}`", args[0])),
    };
    match acceptance_suite(tier) {
        Ok(results) => {
            if results.iter().all(|r| r.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => error_code(&e),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(verb) = args.first() else {
        return usage_error("missing verb");
    };
    match verb.as_str() {
        "sample" => cmd_sample(&args[1..]),
        "spectrum" => cmd_spectrum(&args[1..]),
        "experiment" => cmd_experiment(&args[1..]),
        "accept" => cmd_accept(&args[1..]),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            ExitCode::SUCCESS
        }
        other => usage_error(&format!("unknown verb `{other}`")),
    }
}
