//! Filter matrices built from a [`FilterSpec`].
//!
//! [`exact_filter`] evaluates `U g(Lambda) U^T` from a full eigensystem and is
//! the reference every approximate construction is compared against. The
//! approximations avoid the eigendecomposition: truncated Taylor series
//! (diffusion, GraphHeat, cosine), Chebyshev recurrences on the rescaled
//! Laplacian (ChebyNet, random walk), repeated sparse products (random walk,
//! IGCN) and conjugate-gradient solves (regularized Laplacian).

use ndarray::{Array2, ArrayView2};

use crate::error::{check_dim, Error, Result};
use crate::response::{frequency_response, regularization_fn, FilterSpec};
use crate::sparse::SparseMatrix;
use crate::spectral::{eigendecompose, max_eigenvalue, symmetric_eigen, EigenSystem};

/// Residual target for the conjugate-gradient solves.
pub const CG_TOL: f64 = 1e-12;

/// Eigenvalue floor for the PSD verdict of [`kernel_check`].
pub const PSD_TOL: f64 = 1e-8;

/// How a filter matrix was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Exact,
    Taylor(usize),
    Chebyshev(usize),
    /// Repeated sparse multiplication of a degree-`k` polynomial.
    Product(usize),
    LinearSolve,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Dense(Array2<f64>),
    Sparse(SparseMatrix),
}

/// An `n x n` filter together with the spec it realizes.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterMatrix {
    pub matrix: Storage,
    pub spec: FilterSpec,
    pub construction: Construction,
}

impl FilterMatrix {
    pub fn n(&self) -> usize {
        match &self.matrix {
            Storage::Dense(m) => m.nrows(),
            Storage::Sparse(m) => m.n_rows(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match &self.matrix {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseMatrix> {
        match &self.matrix {
            Storage::Sparse(m) => Some(m),
            Storage::Dense(_) => None,
        }
    }

    /// `||F - F^T||_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.to_dense();
        frobenius(&(&d - &d.t()))
    }
}

/// `F = sum_i g(lambda_i) u_i u_i^T`.
pub fn exact_filter(spec: &FilterSpec, e: &EigenSystem) -> Result<FilterMatrix> {
    spec.validate()?;
    let mut gains = Vec::with_capacity(e.n());
    for &lambda in &e.eigenvalues {
        let g = frequency_response(spec, lambda);
        if !g.is_finite() {
            return Err(Error::Pole { lambda });
        }
        gains.push(g);
    }
    Ok(FilterMatrix {
        matrix: Storage::Dense(e.synthesize(&gains)),
        spec: spec.clone(),
        construction: Construction::Exact,
    })
}

/// `(I + s L)^{-1}`, one conjugate-gradient solve per column.
pub fn regularized_laplacian_filter(laplacian: &SparseMatrix, s: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::regularized_laplacian(s);
    spec.validate()?;
    let n = laplacian.n_rows();
    check_dim("regularized Laplacian (square input)", n, laplacian.n_cols())?;
    let system = laplacian.shift_scaled(s, 1.0)?;
    let mut f = Array2::zeros((n, n));
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = conjugate_gradient(&system, &e, CG_TOL)?;
        f.column_mut(j).assign(&ndarray::ArrayView1::from(&col));
        e[j] = 0.0;
    }
    Ok(FilterMatrix {
        matrix: Storage::Dense(f),
        spec,
        construction: Construction::LinearSolve,
    })
}

/// Solves `a x = b` for symmetric positive definite `a`, stopping once the
/// residual norm drops to `tol * ||b||`.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    check_dim("conjugate gradient", a.n_rows(), n)?;
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let target = tol * dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        let ap = a.matvec(&p)?;
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            return Ok(x);
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    Err(Error::NoConvergence {
        what: "conjugate gradient",
        iterations: max_iter,
    })
}

/// `theta * sum_{k=0..K} (-s)^k / k! L^k`, a truncated `exp(-s L)`.
pub fn diffusion_filter_taylor(laplacian: &SparseMatrix, s: f64, k: usize, theta: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::diffusion(s).with_order(k).with_theta(vec![theta]);
    spec.validate()?;
    let matrix = taylor_exp(laplacian, s, k)?.scale(theta);
    Ok(FilterMatrix {
        matrix: Storage::Sparse(matrix),
        spec,
        construction: Construction::Taylor(k),
    })
}

fn taylor_exp(laplacian: &SparseMatrix, s: f64, k: usize) -> Result<SparseMatrix> {
    check_dim("Taylor series (square input)", laplacian.n_rows(), laplacian.n_cols())?;
    let n = laplacian.n_rows();
    let mut term = SparseMatrix::identity(n);
    let mut sum = term.clone();
    for order in 1..=k {
        term = term.matmul(laplacian)?.scale(-s / order as f64);
        sum = sum.add_scaled(1.0, &term, 1.0)?;
    }
    Ok(sum)
}

/// How to evaluate `(a I - L)^p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomWalkPath {
    Direct,
    Chebyshev,
}

/// `(a I - L)^p`, either by repeated sparse products or by the Chebyshev
/// expansion of `(a - lambda)^p` on the rescaled Laplacian.
pub fn p_step_rw_filter(laplacian: &SparseMatrix, a: f64, p: u32, path: RandomWalkPath) -> Result<FilterMatrix> {
    let spec = FilterSpec::random_walk(a, p);
    spec.validate()?;
    check_dim("random walk filter (square input)", laplacian.n_rows(), laplacian.n_cols())?;
    let (matrix, construction) = match path {
        RandomWalkPath::Direct => {
            let step = laplacian.shift_scaled(-1.0, a)?;
            let mut acc = SparseMatrix::identity(laplacian.n_rows());
            for _ in 0..p {
                acc = acc.matmul(&step)?;
            }
            (acc, Construction::Product(p as usize))
        }
        RandomWalkPath::Chebyshev => {
            let lambda_max = usable_lambda_max(max_eigenvalue(laplacian)?);
            let half = lambda_max / 2.0;
            // a - lambda = (a - half) - half * x with x the rescaled variable.
            let monomial = binomial_power(a - half, -half, p);
            let coeffs = monomial_to_chebyshev(&monomial);
            let rescaled = cheb_rescale(laplacian, lambda_max)?;
            (chebyshev_series(&rescaled, &coeffs)?, Construction::Chebyshev(p as usize))
        }
    };
    Ok(FilterMatrix {
        matrix: Storage::Sparse(matrix),
        spec,
        construction,
    })
}

/// `theta * sum_{k=0..K} (-1)^k / (2k)! (L pi / 4)^{2k}`, a truncated
/// `cos(L pi / 4)`.
pub fn cosine_filter(laplacian: &SparseMatrix, k: usize, theta: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::cosine().with_order(k).with_theta(vec![theta]);
    check_dim("cosine filter (square input)", laplacian.n_rows(), laplacian.n_cols())?;
    let n = laplacian.n_rows();
    let quarter = laplacian.scale(std::f64::consts::FRAC_PI_4);
    let squared = quarter.matmul(&quarter)?;
    let mut term = SparseMatrix::identity(n);
    let mut sum = term.clone();
    for order in 1..=k {
        let denom = ((2 * order - 1) * (2 * order)) as f64;
        term = term.matmul(&squared)?.scale(-1.0 / denom);
        sum = sum.add_scaled(1.0, &term, 1.0)?;
    }
    Ok(FilterMatrix {
        matrix: Storage::Sparse(sum.scale(theta)),
        spec,
        construction: Construction::Taylor(k),
    })
}

/// `sum_k theta_k T_k(L_s)` with `L_s` the Laplacian rescaled to `[-1, 1]`.
pub fn chebynet_filter(laplacian: &SparseMatrix, theta: &[f64], lambda_max: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::chebynet(theta.to_vec());
    spec.validate()?;
    let rescaled = cheb_rescale(laplacian, lambda_max)?;
    Ok(FilterMatrix {
        matrix: Storage::Sparse(chebyshev_series(&rescaled, theta)?),
        spec,
        construction: Construction::Chebyshev(theta.len()),
    })
}

/// `theta0 I + theta1 exp(-s L)` with the exponential truncated at order `k`.
pub fn graphheat_filter(laplacian: &SparseMatrix, s: f64, k: usize, theta0: f64, theta1: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::graphheat(s, theta0, theta1).with_order(k);
    spec.validate()?;
    let heat = diffusion_filter_taylor(laplacian, s, k, 1.0)?;
    let heat = heat.as_sparse().expect("Taylor filters are sparse");
    let matrix = SparseMatrix::identity(laplacian.n_rows()).add_scaled(theta0, heat, theta1)?;
    Ok(FilterMatrix {
        matrix: Storage::Sparse(matrix),
        spec,
        construction: Construction::Taylor(k),
    })
}

/// `theta (I - L)^k`; with `k = 1` this is the GCN propagation matrix.
pub fn igcn_filter(laplacian: &SparseMatrix, k: usize, theta: f64) -> Result<FilterMatrix> {
    let spec = FilterSpec::igcn(k, theta);
    spec.validate()?;
    let step = laplacian.shift_scaled(-1.0, 1.0)?;
    let mut acc = step.clone();
    for _ in 1..k {
        acc = acc.matmul(&step)?;
    }
    Ok(FilterMatrix {
        matrix: Storage::Sparse(acc.scale(theta)),
        spec,
        construction: Construction::Product(k),
    })
}

/// `theta (I - L)`.
pub fn gcn_filter(laplacian: &SparseMatrix, theta: f64) -> Result<FilterMatrix> {
    let mut f = igcn_filter(laplacian, 1, theta)?;
    f.spec = FilterSpec::gcn(theta);
    Ok(f)
}

/// `L_s = (2 / lambda_max) L - I`.
pub fn cheb_rescale(laplacian: &SparseMatrix, lambda_max: f64) -> Result<SparseMatrix> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda_max must be positive, got {lambda_max}")));
    }
    laplacian.shift_scaled(2.0 / lambda_max, -1.0)
}

/// Guards the Chebyshev rescale against an all-zero Laplacian.
fn usable_lambda_max(estimate: f64) -> f64 {
    if estimate > 1e-12 {
        estimate
    } else {
        1.0
    }
}

/// `sum_k coeffs[k] T_k(x)` evaluated at a matrix by the three-term recurrence.
pub fn chebyshev_series(x: &SparseMatrix, coeffs: &[f64]) -> Result<SparseMatrix> {
    check_dim("Chebyshev series (square input)", x.n_rows(), x.n_cols())?;
    let n = x.n_rows();
    let mut sum = SparseMatrix::zeros(n, n);
    let mut prev = SparseMatrix::identity(n);
    let mut curr = x.clone();
    for (k, &c) in coeffs.iter().enumerate() {
        let t_k = match k {
            0 => prev.clone(),
            1 => curr.clone(),
            _ => {
                let next = x.matmul(&curr)?.add_scaled(2.0, &prev, -1.0)?;
                prev = std::mem::replace(&mut curr, next);
                curr.clone()
            }
        };
        if c != 0.0 {
            sum = sum.add_scaled(1.0, &t_k, c)?;
        }
    }
    Ok(sum)
}

/// Scalar Chebyshev recurrence `T_k(x)`.
pub fn chebyshev_t(k: usize, x: f64) -> f64 {
    let (mut prev, mut curr) = (1.0, x);
    match k {
        0 => 1.0,
        _ => {
            for _ in 1..k {
                let next = 2.0 * x * curr - prev;
                prev = curr;
                curr = next;
            }
            curr
        }
    }
}

/// Re-expresses `sum_j m[j] x^j` in the Chebyshev basis.
pub fn monomial_to_chebyshev(monomial: &[f64]) -> Vec<f64> {
    let degree = monomial.len().saturating_sub(1);
    let mut out = vec![0.0; degree + 1];
    // Chebyshev coefficients of x^j, updated with x T_0 = T_1 and
    // x T_i = (T_{i+1} + T_{i-1}) / 2.
    let mut power = vec![0.0; degree + 2];
    power[0] = 1.0;
    for (j, &m) in monomial.iter().enumerate() {
        if j > 0 {
            let mut next = vec![0.0; degree + 2];
            for (i, &c) in power.iter().enumerate().take(j) {
                if c == 0.0 {
                    continue;
                }
                if i == 0 {
                    next[1] += c;
                } else {
                    next[i + 1] += 0.5 * c;
                    next[i - 1] += 0.5 * c;
                }
            }
            power = next;
        }
        for i in 0..=j {
            out[i] += m * power[i];
        }
    }
    out
}

/// Monomial coefficients of `(alpha + beta x)^p`.
pub(crate) fn binomial_power(alpha: f64, beta: f64, p: u32) -> Vec<f64> {
    let p = p as usize;
    let mut coeffs = vec![0.0; p + 1];
    let mut binom = 1.0;
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c = binom * alpha.powi((p - j) as i32) * beta.powi(j as i32);
        binom = binom * (p - j) as f64 / (j + 1) as f64;
    }
    coeffs
}

/// `F X`.
pub fn apply_filter(f: &FilterMatrix, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    match &f.matrix {
        Storage::Sparse(m) => m.mul_dense(x),
        Storage::Dense(m) => {
            check_dim("filter application", m.ncols(), x.nrows())?;
            Ok(m.dot(&x))
        }
    }
}

/// Kernel validity diagnostics for a filter.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    /// `||F - F^T||_F`.
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `||F r(L) - Pi||_F` with `Pi` projecting onto eigenspaces where `r` is finite.
    pub pseudo_inverse_residual: f64,
    /// Eigenvalues of `L` dropped because `r` has a pole there.
    pub excluded_eigenvalues: usize,
    pub psd: bool,
}

impl KernelReport {
    /// `(key, value)` rows for CSV output.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("symmetry_defect", format!("{:e}", self.symmetry_defect)),
            ("min_eigenvalue", format!("{}", self.min_eigenvalue)),
            ("max_eigenvalue", format!("{}", self.max_eigenvalue)),
            ("pseudo_inverse_residual", format!("{:e}", self.pseudo_inverse_residual)),
            ("excluded_eigenvalues", self.excluded_eigenvalues.to_string()),
            ("psd", self.psd.to_string()),
        ]
    }
}

/// Checks that `F` is a symmetric PSD kernel and that it inverts `r(L)` on
/// the eigenspaces where `r` is finite.
pub fn kernel_check(f: &FilterMatrix, spec: &FilterSpec, laplacian: &SparseMatrix) -> Result<KernelReport> {
    let dense = f.to_dense();
    check_dim("kernel check", laplacian.n_rows(), dense.nrows())?;
    let symmetry_defect = frobenius(&(&dense - &dense.t()));
    let sym = (&dense + &dense.t()) * 0.5;
    let spectrum = symmetric_eigen(&sym)?;
    let min_eigenvalue = spectrum.eigenvalues.first().copied().unwrap_or(0.0);
    let max_eigenvalue = spectrum.eigenvalues.last().copied().unwrap_or(0.0);

    let e = eigendecompose(laplacian)?;
    let mut r_values = Vec::with_capacity(e.n());
    let mut keep = Vec::with_capacity(e.n());
    for &lambda in &e.eigenvalues {
        let r = regularization_fn(spec, lambda);
        if r.is_finite() {
            r_values.push(r);
            keep.push(1.0);
        } else {
            r_values.push(0.0);
            keep.push(0.0);
        }
    }
    let excluded_eigenvalues = keep.iter().filter(|&&k| k == 0.0).count();
    let r_matrix = e.synthesize(&r_values);
    let projector = e.synthesize(&keep);
    let pseudo_inverse_residual = frobenius(&(dense.dot(&r_matrix) - projector));

    Ok(KernelReport {
        symmetry_defect,
        min_eigenvalue,
        max_eigenvalue,
        pseudo_inverse_residual,
        excluded_eigenvalues,
        psd: min_eigenvalue >= -PSD_TOL,
    })
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
