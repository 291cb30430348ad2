//! Dense self-adjoint eigensolvers and supporting linear algebra.
//!
//! Real symmetric matrices are reduced to tridiagonal form by Householder
//! reflections and diagonalized by the implicit-shift QL iteration; hermitian
//! matrices go through a complex Householder reduction whose subdiagonal is
//! made real by a diagonal phase similarity, after which the same real QL
//! runs. Eigenvectors are accumulated only on request. Everything is O(n^3)
//! dense, which is the right trade at desk scale (n <= 4000).
//!
//! Matrix storage: row-major `n x n` slices. Eigenvector output: column-major,
//! column `a` is the unit eigenvector of the `a`-th (ascending) eigenvalue.

use num_complex::Complex64;

use crate::error::{fingerprint_f64, Error, Result};

const MAX_QL_ITER: usize = 50;

/// Householder reduction of a real symmetric matrix to tridiagonal form.
/// On return `a` holds the reflector vectors in its strict lower columns.
fn sym_tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut tau = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x0 = a[(k + 1) * n + k];
        if m == 1 {
            e[k] = x0;
            continue;
        }
        let mut belowsq = 0.0;
        for i in 1..m {
            let xi = a[(k + 1 + i) * n + k];
            belowsq += xi * xi;
        }
        if belowsq == 0.0 {
            // column already tridiagonal
            e[k] = x0;
            continue;
        }
        let xnorm = (x0 * x0 + belowsq).sqrt();
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        e[k] = alpha;
        v[0] = x0 - alpha;
        for i in 1..m {
            v[i] = a[(k + 1 + i) * n + k];
        }
        let vsq = v[..m].iter().map(|x| x * x).sum::<f64>();
        let t = 2.0 / vsq;
        tau[k] = t;

        // p = t * B * v on the trailing block
        for i in 0..m {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 1 + m];
            let mut s = 0.0;
            for j in 0..m {
                s += row[j] * v[j];
            }
            p[i] = t * s;
        }
        let vp: f64 = (0..m).map(|i| v[i] * p[i]).sum();
        let half = 0.5 * t * vp;
        for i in 0..m {
            p[i] -= half * v[i]; // now w = p - (t v.p/2) v
        }
        // B <- B - v w^T - w v^T
        for i in 0..m {
            let vi = v[i];
            let wi = p[i];
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 1 + m];
            for j in 0..m {
                row[j] -= vi * p[j] + wi * v[j];
            }
        }
        // stash the reflector in the processed column
        for i in 0..m {
            a[(k + 1 + i) * n + k] = v[i];
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    (d, e, tau)
}

/// Back-accumulate the orthogonal factor of `sym_tridiagonalize`.
/// Returns Q column-major.
fn sym_accumulate_q(a: &[f64], tau: &[f64], n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for c in 0..n {
        q[c * n + c] = 1.0;
    }
    for k in (0..n.saturating_sub(1)).rev() {
        if tau[k] == 0.0 {
            continue;
        }
        let m = n - k - 1;
        for c in k + 1..n {
            let col = &mut q[c * n..c * n + n];
            let mut s = 0.0;
            for i in 0..m {
                s += a[(k + 1 + i) * n + k] * col[k + 1 + i];
            }
            s *= tau[k];
            for i in 0..m {
                col[k + 1 + i] -= s * a[(k + 1 + i) * n + k];
            }
        }
    }
    q
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[k]` the (k, k+1) entry with `e[n-1]` ignored.
/// When `z` is given (column-major, n x n) the rotations are accumulated into
/// its columns. Eigenvalues come back unsorted.
fn tql(d: &mut [f64], e: &mut [f64], n: usize, mut z: Option<&mut [f64]>) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = 2.0f64.powi(-52);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(Error::Numerical {
                        message: format!("QL iteration failed to converge at index {l}"),
                        fingerprint: fingerprint_f64(d),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in l + 2..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g2 = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g2;
                    d[i + 1] = h + s * (c * g2 + s * d[i]);

                    if let Some(z) = z.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..i * n + n];
                        let zi1 = &mut hi[..n];
                        for k in 0..n {
                            let t = zi1[k];
                            zi1[k] = s * zi[k] + c * t;
                            zi[k] = c * zi[k] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn sort_ascending(d: Vec<f64>, n: usize) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let sorted = idx.iter().map(|&i| d[i]).collect();
    (sorted, idx)
}

fn permute_columns_f64(z: &[f64], idx: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for (c, &src) in idx.iter().enumerate() {
        out[c * n..c * n + n].copy_from_slice(&z[src * n..src * n + n]);
    }
    out
}

/// Fix eigenvector gauge: the largest-magnitude component is made positive
/// (real case) so repeated runs produce identical vectors.
fn fix_signs_real(z: &mut [f64], n: usize) {
    for c in 0..n {
        let col = &mut z[c * n..c * n + n];
        let mut best = 0usize;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Eigendecomposition of a real symmetric matrix (row-major).
///
/// Returns ascending eigenvalues and, when requested, the column-major
/// orthonormal eigenvector matrix.
pub fn sym_eigen(matrix: &[f64], n: usize, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    assert_eq!(matrix.len(), n * n);
    if n == 0 {
        return Ok((Vec::new(), if want_vectors { Some(Vec::new()) } else { None }));
    }
    let mut a = matrix.to_vec();
    let (mut d, mut e, tau) = sym_tridiagonalize(&mut a, n);
    if want_vectors {
        let mut z = sym_accumulate_q(&a, &tau, n);
        tql(&mut d, &mut e, n, Some(&mut z))?;
        let (sorted, idx) = sort_ascending(d, n);
        let mut z = permute_columns_f64(&z, &idx, n);
        fix_signs_real(&mut z, n);
        Ok((sorted, Some(z)))
    } else {
        tql(&mut d, &mut e, n, None)?;
        let (sorted, _) = sort_ascending(d, n);
        Ok((sorted, None))
    }
}

/// Householder reduction of a hermitian matrix to tridiagonal form with a
/// complex subdiagonal; reflectors are stashed in the strict lower columns.
fn herm_tridiagonalize(a: &mut [Complex64], n: usize) -> (Vec<f64>, Vec<Complex64>, Vec<f64>) {
    let zero = Complex64::new(0.0, 0.0);
    let mut d = vec![0.0; n];
    let mut e = vec![zero; n];
    let mut tau = vec![0.0; n];
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x0 = a[(k + 1) * n + k];
        if m == 1 {
            e[k] = x0;
            continue;
        }
        let mut belowsq = 0.0;
        for i in 1..m {
            belowsq += a[(k + 1 + i) * n + k].norm_sqr();
        }
        if belowsq == 0.0 {
            e[k] = x0;
            continue;
        }
        let xnorm = (x0.norm_sqr() + belowsq).sqrt();
        let phase = if x0 == zero { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        e[k] = alpha;
        v[0] = x0 - alpha;
        for i in 1..m {
            v[i] = a[(k + 1 + i) * n + k];
        }
        let vsq: f64 = v[..m].iter().map(|x| x.norm_sqr()).sum();
        let t = 2.0 / vsq;
        tau[k] = t;

        for i in 0..m {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 1 + m];
            let mut s = zero;
            for j in 0..m {
                s += row[j] * v[j];
            }
            p[i] = t * s;
        }
        // v^H p is real up to roundoff because B is hermitian
        let vp: f64 = (0..m).map(|i| (v[i].conj() * p[i]).re).sum();
        let half = 0.5 * t * vp;
        for i in 0..m {
            p[i] -= half * v[i];
        }
        for i in 0..m {
            let vi = v[i];
            let wi = p[i];
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 1 + m];
            for j in 0..m {
                row[j] -= vi * p[j].conj() + wi * v[j].conj();
            }
        }
        for i in 0..m {
            a[(k + 1 + i) * n + k] = v[i];
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i].re;
    }
    (d, e, tau)
}

/// Unit phases that rotate the complex subdiagonal onto the real axis.
fn subdiagonal_phases(e: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut phi = vec![Complex64::new(1.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let ek = e[k];
        phi[k + 1] = if ek.norm() == 0.0 {
            phi[k]
        } else {
            phi[k] * ek / ek.norm()
        };
    }
    phi
}

fn fix_phases_complex(z: &mut [Complex64], n: usize) {
    for c in 0..n {
        let col = &mut z[c * n..c * n + n];
        let mut best = 0usize;
        for i in 1..n {
            if col[i].norm_sqr() > col[best].norm_sqr() {
                best = i;
            }
        }
        let nb = col[best].norm();
        if nb > 0.0 {
            let rot = col[best].conj() / nb;
            for x in col.iter_mut() {
                *x *= rot;
            }
        }
    }
}

/// Eigendecomposition of a hermitian matrix (row-major).
pub fn herm_eigen(
    matrix: &[Complex64],
    n: usize,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Vec<Complex64>>)> {
    assert_eq!(matrix.len(), n * n);
    if n == 0 {
        return Ok((Vec::new(), if want_vectors { Some(Vec::new()) } else { None }));
    }
    let mut a = matrix.to_vec();
    let (mut d, ec, tau) = herm_tridiagonalize(&mut a, n);
    let mut e: Vec<f64> = ec.iter().map(|x| x.norm()).collect();

    if !want_vectors {
        tql(&mut d, &mut e, n, None)?;
        let (sorted, _) = sort_ascending(d, n);
        return Ok((sorted, None));
    }

    let mut zr = vec![0.0; n * n];
    for c in 0..n {
        zr[c * n + c] = 1.0;
    }
    tql(&mut d, &mut e, n, Some(&mut zr))?;
    let (sorted, idx) = sort_ascending(d, n);
    let zr = permute_columns_f64(&zr, &idx, n);

    // u = P_0 ... P_{n-2} (Phi z): phase the rows, then back-apply reflectors
    let phi = subdiagonal_phases(&ec, n);
    let mut z = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..n {
        for r in 0..n {
            z[c * n + r] = phi[r] * zr[c * n + r];
        }
    }
    for k in (0..n.saturating_sub(1)).rev() {
        if tau[k] == 0.0 {
            continue;
        }
        let m = n - k - 1;
        for c in 0..n {
            let col = &mut z[c * n..c * n + n];
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..m {
                s += a[(k + 1 + i) * n + k].conj() * col[k + 1 + i];
            }
            s *= tau[k];
            for i in 0..m {
                col[k + 1 + i] -= s * a[(k + 1 + i) * n + k];
            }
        }
    }
    fix_phases_complex(&mut z, n);
    Ok((sorted, Some(z)))
}

/// Solve (A - z I) x = b for complex A via partial-pivot LU. Used as the
/// direct-resolvent oracle against the minor expansion.
pub fn shifted_solve(a: &[Complex64], n: usize, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut lu = a.to_vec();
    for i in 0..n {
        lu[i * n + i] -= z;
    }
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best = k;
        let mut bestval = lu[piv[k] * n + k].norm_sqr();
        for r in k + 1..n {
            let v = lu[piv[r] * n + k].norm_sqr();
            if v > bestval {
                best = r;
                bestval = v;
            }
        }
        if bestval == 0.0 {
            return Err(Error::Numerical {
                message: "singular shifted system".into(),
                fingerprint: fingerprint_f64(&[z.re, z.im, n as f64]),
            });
        }
        piv.swap(k, best);
        let pk = piv[k];
        let diag = lu[pk * n + k];
        for r in k + 1..n {
            let pr = piv[r];
            let factor = lu[pr * n + k] / diag;
            lu[pr * n + k] = factor;
            for c in k + 1..n {
                let t = lu[pk * n + c];
                lu[pr * n + c] -= factor * t;
            }
            let t = x[pk];
            x[pr] -= factor * t;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let pk = piv[k];
        let mut s = x[pk];
        for c in k + 1..n {
            s -= lu[pk * n + c] * out[c];
        }
        out[k] = s / lu[pk * n + k];
    }
    Ok(out)
}
