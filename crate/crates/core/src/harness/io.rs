//! File formats: plain-text columnar tables with self-describing headers,
//! spectra with an optional raw eigenvector block, and trajectory checkpoints.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{EigenVectors, Spectrum};

/// Write a metrics/result table. `meta` lines become `# key: value` headers;
/// every file names its units and sample counts through them.
pub fn write_table(
    path: &Path,
    meta: &[(String, String)],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    for (k, v) in meta {
        writeln!(f, "# {k}: {v}")?;
    }
    writeln!(f, "# columns: {}", columns.join(" "))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Spectrum persistence: `index eigenvalue` text columns; when vectors are
/// present, a marker line announces a raw little-endian f64 block
/// (column-major, n x n; complex stored as interleaved re,im pairs) that runs
/// to end of file.
pub fn write_spectrum(path: &Path, spec: &Spectrum, meta: &[(String, String)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# wigner-lab spectrum v1")?;
    for (k, v) in meta {
        writeln!(f, "# {k}: {v}")?;
    }
    writeln!(f, "# n: {}", spec.n())?;
    writeln!(f, "# units: eigenvalues on the normalized spectral scale (support ~ [-2, 2])")?;
    writeln!(f, "# columns: index eigenvalue")?;
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        writeln!(f, "{i} {l:.17e}")?;
    }
    match &spec.eigenvectors {
        None => {}
        Some(EigenVectors::Real(z)) => {
            writeln!(f, "# eigenvectors: real f64 little-endian column-major follows")?;
            let mut buf = Vec::with_capacity(z.len() * 8);
            for &x in z {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            f.write_all(&buf)?;
        }
        Some(EigenVectors::Complex(z)) => {
            writeln!(
                f,
                "# eigenvectors: complex f64 little-endian column-major interleaved re,im follows"
            )?;
            let mut buf = Vec::with_capacity(z.len() * 16);
            for &x in z {
                buf.extend_from_slice(&x.re.to_le_bytes());
                buf.extend_from_slice(&x.im.to_le_bytes());
            }
            f.write_all(&buf)?;
        }
    }
    Ok(())
}

/// Read back a spectrum file written by `write_spectrum`.
pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut eigenvalues = Vec::new();
    let mut vector_kind: Option<bool> = None; // Some(true) = complex
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let t = line.trim();
        if t.starts_with("# eigenvectors: real") {
            vector_kind = Some(false);
            break;
        }
        if t.starts_with("# eigenvectors: complex") {
            vector_kind = Some(true);
            break;
        }
        if t.starts_with('#') || t.is_empty() {
            continue;
        }
        let mut it = t.split_whitespace();
        let _idx = it.next();
        let val: f64 = it
            .next()
            .ok_or_else(|| Error::Schema("bad spectrum row".into()))?
            .parse()
            .map_err(|e| Error::Schema(format!("bad eigenvalue: {e}")))?;
        eigenvalues.push(val);
    }
    let n = eigenvalues.len();
    let eigenvectors = match vector_kind {
        None => None,
        Some(false) => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            if buf.len() != 8 * n * n {
                return Err(Error::Schema(format!(
                    "eigenvector block has {} bytes, expected {}",
                    buf.len(),
                    8 * n * n
                )));
            }
            let z: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Some(EigenVectors::Real(z))
        }
        Some(true) => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            if buf.len() != 16 * n * n {
                return Err(Error::Schema(format!(
                    "eigenvector block has {} bytes, expected {}",
                    buf.len(),
                    16 * n * n
                )));
            }
            let z: Vec<Complex64> = buf
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[0..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..16].try_into().unwrap()),
                    )
                })
                .collect();
            Some(EigenVectors::Complex(z))
        }
    };
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Trajectory checkpoints: one `time x_0 ... x_{N-1}` row per record.
pub fn write_trajectory(path: &Path, meta: &[(String, String)], rows: &[(f64, Vec<f64>)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# wigner-lab trajectory v1")?;
    for (k, v) in meta {
        writeln!(f, "# {k}: {v}")?;
    }
    writeln!(f, "# units: dimensionless flow time; positions on the spectral scale")?;
    writeln!(f, "# columns: time positions...")?;
    for (t, x) in rows {
        let mut line = format!("{t:.17e}");
        for v in x {
            line.push(' ');
            line.push_str(&format!("{v:.17e}"));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}
