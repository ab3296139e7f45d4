//! Dense symmetric eigendecomposition, graph Fourier transform and related
//! spectrum utilities.
//!
//! The eigensolver is the classic two-phase method: Householder reduction to
//! tridiagonal form followed by implicit-shift QL iterations, with the
//! orthogonal transforms accumulated into the eigenvector matrix. Internally
//! the transform is stored transposed so that the hot loops walk contiguous
//! memory.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseMatrix;

/// Largest matrix the dense eigensolver accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// Tolerance on `|m_ij - m_ji|` accepted by [`eigendecompose`].
pub const SYMMETRY_TOL: f64 = 1e-10;

const POWER_MAX_ITERS: usize = 10_000;
const POWER_SEED: u64 = 0x5eed_1a7b;

/// Orthonormal eigenbasis (columns of `basis`) with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub basis: Array2<f64>,
    pub eigenvalues: Vec<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The `l`-th eigenvector.
    pub fn vector(&self, l: usize) -> ArrayView1<'_, f64> {
        self.basis.column(l)
    }

    /// `U diag(values) U^T`.
    pub fn synthesize(&self, values: &[f64]) -> Array2<f64> {
        let mut scaled = self.basis.clone();
        for (mut col, &v) in scaled.columns_mut().into_iter().zip(values) {
            col.mapv_inplace(|x| x * v);
        }
        scaled.dot(&self.basis.t())
    }
}

/// Eigendecomposition of a symmetric matrix using the default size cap.
pub fn eigendecompose(m: &SparseMatrix) -> Result<EigenSystem> {
    eigendecompose_with_cap(m, DEFAULT_DENSE_CAP)
}

pub fn eigendecompose_with_cap(m: &SparseMatrix, cap: usize) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigendecomposition (square input)",
            expected: m.n_rows(),
            found: m.n_cols(),
        });
    }
    if m.n_rows() > cap {
        return Err(Error::TooLarge { n: m.n_rows(), cap });
    }
    let defect = m.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::Asymmetric { defect });
    }
    symmetric_eigen(&m.to_dense())
}

/// Eigendecomposition of a dense symmetric matrix (only the lower triangle is
/// read).
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<EigenSystem> {
    let n = a.nrows();
    check_dim("dense eigendecomposition (square input)", n, a.ncols())?;
    if n == 0 {
        return Ok(EigenSystem {
            basis: Array2::zeros((0, 0)),
            eigenvalues: Vec::new(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to the eigensolver".into()));
    }
    // w[b * n + a] holds V[a][b]; initially V = A.
    let mut w: Vec<f64> = a.t().iter().copied().collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut w, &mut d, &mut e);
    ql_implicit(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut basis = Array2::zeros((n, n));
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        let v = &w[src * n..(src + 1) * n];
        let pivot = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (row, &x) in v.iter().enumerate() {
            basis[[row, col]] = sign * x;
        }
        eigenvalues.push(d[src]);
    }
    Ok(EigenSystem { basis, eigenvalues })
}

/// Householder reduction to tridiagonal form (EISPACK tred2 ordering).
fn tridiagonalize(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| c * n + r;

    for j in 0..n {
        d[j] = w[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[at(i - 1, j)];
                w[at(i, j)] = 0.0;
                w[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                w[at(j, i)] = f;
                let col = &w[j * n..j * n + i];
                g = e[j] + col[j] * f;
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                let col = &mut w[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = w[at(i - 1, j)];
                w[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        w[at(n - 1, i)] = w[at(i, i)];
        w[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = w[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (left, right) = w.split_at_mut((i + 1) * n);
                let next = &right[..=i];
                let col = &mut left[j * n..j * n + i + 1];
                let g: f64 = next.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            w[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[at(n - 1, j)];
        w[at(n - 1, j)] = 0.0;
    }
    w[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, rotating the rows of `w`.
fn ql_implicit(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence {
                        what: "tridiagonal QL",
                        iterations: MAX_SWEEPS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for k in 0..n {
                        let t = vi1[k];
                        vi1[k] = s * vi[k] + c * t;
                        vi[k] = c * vi[k] - s * t;
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

/// Graph Fourier transform `U^T f`.
pub fn gft(f: &[f64], e: &EigenSystem) -> Result<Vec<f64>> {
    check_dim("graph Fourier transform", e.n(), f.len())?;
    Ok(e.basis.t().dot(&ArrayView1::from(f)).to_vec())
}

/// Inverse graph Fourier transform `U fhat`.
pub fn igft(fhat: &[f64], e: &EigenSystem) -> Result<Vec<f64>> {
    check_dim("inverse graph Fourier transform", e.n(), fhat.len())?;
    Ok(e.basis.dot(&ArrayView1::from(fhat)).to_vec())
}

/// Quadratic form `f^T L f`; for a Laplacian this is the smoothness
/// `sum_{i~j} w_ij (f_i - f_j)^2`.
pub fn smoothness(f: &[f64], l: &SparseMatrix) -> Result<f64> {
    check_dim("smoothness (rows)", l.n_rows(), f.len())?;
    let lf = l.matvec(f)?;
    Ok(f.iter().zip(&lf).map(|(a, b)| a * b).sum())
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from a fixed start vector (ones plus a seeded perturbation).
pub fn max_eigenvalue(m: &SparseMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "power iteration (square input)",
            expected: m.n_rows(),
            found: m.n_cols(),
        });
    }
    let n = m.n_rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut x: Array1<f64> = (0..n).map(|_| 1.0 + 0.1 * rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let mut rho = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let y = Array1::from(m.matvec(x.as_slice().expect("contiguous"))?);
        let next = x.dot(&y);
        let norm = y.dot(&y).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if (next - rho).abs() <= 1e-13 * next.abs() {
            return Ok(next);
        }
        rho = next;
        x = y / norm;
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: POWER_MAX_ITERS,
    })
}

fn normalize(x: &mut Array1<f64>) {
    let norm = x.dot(x).sqrt();
    if norm > 0.0 {
        x.mapv_inplace(|v| v / norm);
    }
}

/// Relative Frobenius error `||U diag(lambda) U^T - m||_F / ||m||_F`.
pub fn reconstruction_error(m: &SparseMatrix, e: &EigenSystem) -> f64 {
    let dense = m.to_dense();
    let diff = e.synthesize(&e.eigenvalues) - &dense;
    let denom = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    let num = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}

/// Frobenius distance of `U^T U` from the identity.
pub fn orthonormality_defect(e: &EigenSystem) -> f64 {
    let gram = e.basis.t().dot(&e.basis);
    let n = e.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (gram[[i, j]] - target).powi(2);
        }
    }
    acc.sqrt()
}
