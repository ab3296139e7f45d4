//! Propagation operators used inside the network.
//!
//! A layer propagates with `sum_j c_j B_j`, where the `B_j` are fixed
//! symmetric operators and the `c_j` are the filter parameters. Operators are
//! applied to dense blocks without materializing the filter matrix.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::filters::{binomial_power, cheb_rescale, conjugate_gradient, CG_TOL};
use crate::graph::{normalized_laplacian, renormalize, Graph};
use crate::response::{Family, FilterSpec};
use crate::sparse::SparseMatrix;
use crate::spectral::max_eigenvalue;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyBasis {
    Monomial,
    Chebyshev,
}

/// A fixed symmetric operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Identity,
    Sparse(SparseMatrix),
    Dense(Array2<f64>),
    /// `sum_k coeffs[k] P_k(op)` with `P_k` monomials or Chebyshev polynomials.
    Polynomial {
        op: SparseMatrix,
        coeffs: Vec<f64>,
        basis: PolyBasis,
    },
    /// `system^{-1}`, applied column by column with conjugate gradients.
    Resolvent(SparseMatrix),
}

impl Operator {
    pub fn n(&self) -> Option<usize> {
        match self {
            Operator::Identity => None,
            Operator::Sparse(m) | Operator::Resolvent(m) => Some(m.n_rows()),
            Operator::Polynomial { op, .. } => Some(op.n_rows()),
            Operator::Dense(m) => Some(m.nrows()),
        }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if let Some(n) = self.n() {
            check_dim("propagation operator", n, x.nrows())?;
        }
        match self {
            Operator::Identity => Ok(x.to_owned()),
            Operator::Sparse(m) => m.mul_dense(x),
            Operator::Dense(m) => Ok(m.dot(&x)),
            Operator::Polynomial { op, coeffs, basis: PolyBasis::Monomial } => {
                let mut acc = Array2::zeros(x.raw_dim());
                for &c in coeffs.iter().rev() {
                    acc = op.mul_dense(acc.view())?;
                    acc.scaled_add(c, &x);
                }
                Ok(acc)
            }
            Operator::Polynomial { op, coeffs, basis: PolyBasis::Chebyshev } => {
                let mut acc = Array2::zeros(x.raw_dim());
                let mut prev = x.to_owned();
                let mut curr = op.mul_dense(x)?;
                for (k, &c) in coeffs.iter().enumerate() {
                    if k >= 2 {
                        let mut next = op.mul_dense(curr.view())?;
                        next.mapv_inplace(|v| 2.0 * v);
                        next -= &prev;
                        prev = std::mem::replace(&mut curr, next);
                    }
                    let t_k = if k == 0 { &prev } else { &curr };
                    acc.scaled_add(c, t_k);
                }
                Ok(acc)
            }
            Operator::Resolvent(system) => {
                let mut out = Array2::zeros(x.raw_dim());
                for (j, col) in x.columns().into_iter().enumerate() {
                    let b: Vec<f64> = col.to_vec();
                    let sol = conjugate_gradient(system, &b, CG_TOL)?;
                    out.column_mut(j).assign(&ndarray::ArrayView1::from(&sol));
                }
                Ok(out)
            }
        }
    }

    /// Dense `n x n` matrix of the operator.
    pub fn to_dense(&self, n: usize) -> Result<Array2<f64>> {
        self.apply(Array2::<f64>::eye(n).view())
    }
}

/// Operators `B_j` shared by every layer, with the initial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub terms: Vec<Operator>,
    pub init: Vec<f64>,
    /// Whether the coefficients are trained.
    pub learnable: bool,
}

impl Propagation {
    /// No graph structure; turns the network into an MLP.
    pub fn identity() -> Self {
        Self {
            terms: vec![Operator::Identity],
            init: vec![1.0],
            learnable: false,
        }
    }

    /// `sum_j init_j B_j` applied to `x`.
    pub fn apply_fixed(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.combine(&self.init, x)
    }

    /// `sum_j coeffs_j B_j x`.
    pub fn combine(&self, coeffs: &[f64], x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim("filter coefficients", self.terms.len(), coeffs.len())?;
        let mut acc = Array2::zeros(x.raw_dim());
        for (term, &c) in self.terms.iter().zip(coeffs) {
            if c != 0.0 {
                acc.scaled_add(c, &term.apply(x)?);
            }
        }
        Ok(acc)
    }

    /// Every `B_j x`, in term order.
    pub fn apply_terms(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        self.terms.iter().map(|t| t.apply(x)).collect()
    }

    /// Dense realization `sum_j coeffs_j B_j`.
    pub fn to_dense(&self, coeffs: &[f64], n: usize) -> Result<Array2<f64>> {
        self.combine(coeffs, Array2::<f64>::eye(n).view())
    }
}

/// Which Laplacian a family propagates with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianChoice {
    /// Renormalized for GCN and IGCN, normalized otherwise.
    #[default]
    PerFamily,
    Normalized,
    Renormalized,
}

impl LaplacianChoice {
    pub fn laplacian_for(self, family: Family, g: &Graph) -> SparseMatrix {
        let renorm = match self {
            LaplacianChoice::PerFamily => matches!(family, Family::Gcn | Family::Igcn),
            LaplacianChoice::Normalized => false,
            LaplacianChoice::Renormalized => true,
        };
        if renorm {
            renormalize(g)
        } else {
            normalized_laplacian(g)
        }
    }
}

fn taylor_exp_coeffs(s: f64, k: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(k + 1);
    let mut term = 1.0;
    c.push(term);
    for order in 1..=k {
        term *= -s / order as f64;
        c.push(term);
    }
    c
}

fn taylor_cos_coeffs(k: usize) -> Vec<f64> {
    let q = std::f64::consts::FRAC_PI_4.powi(2);
    let mut c = vec![0.0; 2 * k + 1];
    let mut term = 1.0;
    c[0] = term;
    for order in 1..=k {
        term *= -q / ((2 * order - 1) * (2 * order)) as f64;
        c[2 * order] = term;
    }
    c
}

fn monomial(op: &SparseMatrix, coeffs: Vec<f64>) -> Operator {
    Operator::Polynomial {
        op: op.clone(),
        coeffs,
        basis: PolyBasis::Monomial,
    }
}

fn reject_analysis(spec: &FilterSpec) -> Result<()> {
    spec.validate()?;
    if spec.analysis {
        return Err(Error::InvalidSpec(format!(
            "{} analysis form is a curve, not a trainable filter",
            spec.family
        )));
    }
    Ok(())
}

/// The published filter with the spec's own coefficients, as one operator
/// with coefficient 1. ChebyNet is taken in its monomial form
/// `sum_k theta_k L^k`.
pub fn fixed_propagation(spec: &FilterSpec, g: &Graph, choice: LaplacianChoice) -> Result<Propagation> {
    reject_analysis(spec)?;
    let l = choice.laplacian_for(spec.family, g);
    let theta0 = spec.theta.first().copied().unwrap_or(1.0);
    let term = match spec.family {
        Family::ChebyNet => monomial(&l, spec.theta.clone()),
        Family::GraphHeat => {
            let theta1 = spec.theta.get(1).copied().unwrap_or(1.0);
            let mut c: Vec<f64> = taylor_exp_coeffs(spec.s, spec.k).into_iter().map(|v| theta1 * v).collect();
            c[0] += theta0;
            monomial(&l, c)
        }
        _ => {
            let (op, _) = single_term(spec, &l)?;
            return Ok(Propagation {
                terms: vec![op],
                init: vec![theta0],
                learnable: false,
            });
        }
    };
    Ok(Propagation {
        terms: vec![term],
        init: vec![1.0],
        learnable: false,
    })
}

/// Operator and coefficient normalization for the single-parameter families.
/// The scale makes the initial response at `lambda = 0` equal to `theta`.
fn single_term(spec: &FilterSpec, l: &SparseMatrix) -> Result<(Operator, f64)> {
    Ok(match spec.family {
        Family::RegularizedLaplacian => (Operator::Resolvent(l.shift_scaled(spec.s, 1.0)?), 1.0),
        Family::Diffusion => (monomial(l, taylor_exp_coeffs(spec.s, spec.k)), 1.0),
        Family::Cosine => (monomial(l, taylor_cos_coeffs(spec.k)), 1.0),
        Family::PStepRandomWalk => {
            let op = monomial(l, binomial_power(spec.a, -1.0, spec.p));
            (op, spec.a.powi(spec.p as i32).recip())
        }
        Family::Gcn => (monomial(l, vec![1.0, -1.0]), 1.0),
        Family::Igcn => (monomial(l, binomial_power(1.0, -1.0, spec.k as u32)), 1.0),
        Family::ChebyNet | Family::GraphHeat => unreachable!("multi-parameter families"),
    })
}

/// Operators and initial coefficients for training with `spec`.
///
/// Single-parameter families learn one scalar per layer. ChebyNet learns one
/// coefficient per Chebyshev polynomial of the rescaled Laplacian, and
/// GraphHeat learns `(theta0, theta1)`.
pub fn learned_propagation(spec: &FilterSpec, g: &Graph, choice: LaplacianChoice) -> Result<Propagation> {
    reject_analysis(spec)?;
    let l = choice.laplacian_for(spec.family, g);
    match spec.family {
        Family::ChebyNet => {
            let lambda_max = max_eigenvalue(&l)?;
            let lambda_max = if lambda_max > 1e-12 { lambda_max } else { 1.0 };
            let rescaled = cheb_rescale(&l, lambda_max)?;
            let k = spec.theta.len();
            let terms = (0..k)
                .map(|j| {
                    let mut coeffs = vec![0.0; j + 1];
                    coeffs[j] = 1.0;
                    Operator::Polynomial {
                        op: rescaled.clone(),
                        coeffs,
                        basis: PolyBasis::Chebyshev,
                    }
                })
                .collect();
            Ok(Propagation {
                terms,
                init: spec.theta.clone(),
                learnable: true,
            })
        }
        Family::GraphHeat => Ok(Propagation {
            terms: vec![Operator::Identity, monomial(&l, taylor_exp_coeffs(spec.s, spec.k))],
            init: vec![spec.theta[0], spec.theta.get(1).copied().unwrap_or(1.0)],
            learnable: true,
        }),
        _ => {
            let (op, scale) = single_term(spec, &l)?;
            Ok(Propagation {
                terms: vec![op],
                init: vec![spec.theta[0] * scale],
                learnable: true,
            })
        }
    }
}

/// `<a, b>` summed over all entries.
pub fn frobenius_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| acc += x * y);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{
        chebynet_filter, cosine_filter, diffusion_filter_taylor, graphheat_filter, igcn_filter, p_step_rw_filter,
        regularized_laplacian_filter, RandomWalkPath,
    };
    use crate::spectral::max_eigenvalue;

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).chain([(0, 2, 0.5)])).unwrap()
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fixed_propagation_matches_filter_bank() {
        let g = cycle(7);
        let l = normalized_laplacian(&g);
        let n = g.n();
        let choice = LaplacianChoice::Normalized;
        let cases = [
            (FilterSpec::diffusion(0.7).with_order(4), diffusion_filter_taylor(&l, 0.7, 4, 1.0).unwrap()),
            (FilterSpec::cosine().with_order(3), cosine_filter(&l, 3, 1.0).unwrap()),
            (FilterSpec::random_walk(3.0, 2), p_step_rw_filter(&l, 3.0, 2, RandomWalkPath::Direct).unwrap()),
            (FilterSpec::igcn(3, 1.0), igcn_filter(&l, 3, 1.0).unwrap()),
            (FilterSpec::graphheat(1.2, 0.3, 0.8).with_order(3), graphheat_filter(&l, 1.2, 3, 0.3, 0.8).unwrap()),
            (FilterSpec::regularized_laplacian(0.9), regularized_laplacian_filter(&l, 0.9).unwrap()),
        ];
        for (spec, expected) in cases {
            let prop = fixed_propagation(&spec, &g, choice).unwrap();
            let got = prop.to_dense(&prop.init, n).unwrap();
            assert!(max_abs_diff(&got, &expected.to_dense()) < 1e-10, "{}", spec.name());
        }
    }

    #[test]
    fn learned_chebynet_matches_filter_bank() {
        let g = cycle(6);
        let l = normalized_laplacian(&g);
        let theta = [0.4, -0.2, 0.7];
        let prop = learned_propagation(&FilterSpec::chebynet(theta.to_vec()), &g, LaplacianChoice::Normalized).unwrap();
        let got = prop.to_dense(&theta, 6).unwrap();
        let lmax = max_eigenvalue(&l).unwrap();
        let expected = chebynet_filter(&l, &theta, lmax).unwrap().to_dense();
        assert!(max_abs_diff(&got, &expected) < 1e-10);
    }

    #[test]
    fn random_walk_init_is_normalized() {
        let g = cycle(5);
        let prop = learned_propagation(&FilterSpec::random_walk(2.0, 2), &g, LaplacianChoice::Normalized).unwrap();
        assert_eq!(prop.init, vec![0.25]);
        let ones = Array2::ones((5, 1));
        let out = prop.apply_fixed(ones.view()).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gcn_uses_renormalized_laplacian_by_default() {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let prop = fixed_propagation(&FilterSpec::gcn(1.0), &g, LaplacianChoice::PerFamily).unwrap();
        let f = prop.to_dense(&prop.init, 2).unwrap();
        assert!(max_abs_diff(&f, &(Array2::ones((2, 2)) * 0.5)) < 1e-15);
    }

    #[test]
    fn analysis_specs_are_rejected() {
        let g = cycle(4);
        let spec = FilterSpec::gcn(1.0).analysis_form();
        assert!(learned_propagation(&spec, &g, LaplacianChoice::PerFamily).is_err());
    }
}
