//! Scalar regularization functions `r(lambda)` and frequency responses
//! `g(lambda) = 1 / r(lambda)` for the regularized filter families and for
//! the published responses of ChebyNet, GCN, GraphHeat and IGCN.
//!
//! A filter is a valid low-pass design exactly when `r` is monotonically
//! increasing on `[0, lambda_max]`; [`check_monotone_increasing`] tests that
//! on a uniform grid.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude a denominator is treated as an exact zero (pole).
const POLE_EPS: f64 = 1e-12;

/// Absolute/relative slack allowed between consecutive grid values.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Default grid size for monotonicity checks.
pub const DEFAULT_GRID: usize = 1001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RegularizedLaplacian,
    Diffusion,
    PStepRandomWalk,
    Cosine,
    ChebyNet,
    Gcn,
    GraphHeat,
    Igcn,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::RegularizedLaplacian,
        Family::Diffusion,
        Family::PStepRandomWalk,
        Family::Cosine,
        Family::ChebyNet,
        Family::Gcn,
        Family::GraphHeat,
        Family::Igcn,
    ];

    /// The four families defined through a regularization function.
    pub fn is_regularized(self) -> bool {
        matches!(
            self,
            Family::RegularizedLaplacian | Family::Diffusion | Family::PStepRandomWalk | Family::Cosine
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::RegularizedLaplacian => "regularized-laplacian",
            Family::Diffusion => "diffusion",
            Family::PStepRandomWalk => "random-walk",
            Family::Cosine => "cosine",
            Family::ChebyNet => "chebynet",
            Family::Gcn => "gcn",
            Family::GraphHeat => "graphheat",
            Family::Igcn => "igcn",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        let family = match key.as_str() {
            "regularized-laplacian" | "reglap" | "regularized" => Family::RegularizedLaplacian,
            "diffusion" | "heat" => Family::Diffusion,
            "random-walk" | "rw" | "p-step-random-walk" | "pstep" => Family::PStepRandomWalk,
            "cosine" | "cos" => Family::Cosine,
            "chebynet" | "cheb" => Family::ChebyNet,
            "gcn" => Family::Gcn,
            "graphheat" => Family::GraphHeat,
            "igcn" => Family::Igcn,
            _ => return Err(Error::InvalidSpec(format!("unknown filter family {s:?}"))),
        };
        Ok(family)
    }
}

/// A filter family together with its hyperparameters.
///
/// Fields that a family does not use are ignored:
///
/// | family | uses |
/// |---|---|
/// | regularized Laplacian | `s` |
/// | diffusion | `s`, `k` (Taylor order) |
/// | p-step random walk | `a`, `p` |
/// | cosine | `k` (Taylor order) |
/// | ChebyNet | `theta` (one coefficient per order) |
/// | GCN | `theta[0]` |
/// | GraphHeat | `s`, `k`, `theta[0]`, `theta[1]` |
/// | IGCN | `k` (power), `theta[0]` |
///
/// `scale` multiplies `r` (the constant `c` of the analysis curves) and
/// `analysis` switches ChebyNet, GCN and IGCN to their exponential
/// approximations `c e^{-lambda}`, `c e^{lambda}` and `c e^{k lambda}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub family: Family,
    pub s: f64,
    pub a: f64,
    pub p: u32,
    pub k: usize,
    pub theta: Vec<f64>,
    pub scale: f64,
    pub analysis: bool,
}

impl FilterSpec {
    fn base(family: Family) -> Self {
        Self {
            family,
            s: 1.0,
            a: 2.0,
            p: 1,
            k: 3,
            theta: vec![1.0],
            scale: 1.0,
            analysis: false,
        }
    }

    /// Default hyperparameters for a family.
    pub fn new(family: Family) -> Self {
        match family {
            Family::ChebyNet => Self::chebynet(vec![1.0, 1.0, 1.0]),
            Family::GraphHeat => Self::graphheat(1.0, 1.0, 1.0),
            Family::Igcn => Self::igcn(2, 1.0),
            Family::Cosine => Self::cosine().with_order(2),
            other => Self::base(other),
        }
    }

    pub fn regularized_laplacian(s: f64) -> Self {
        Self { s, ..Self::base(Family::RegularizedLaplacian) }
    }

    pub fn diffusion(s: f64) -> Self {
        Self { s, ..Self::base(Family::Diffusion) }
    }

    pub fn random_walk(a: f64, p: u32) -> Self {
        Self { a, p, ..Self::base(Family::PStepRandomWalk) }
    }

    pub fn cosine() -> Self {
        Self::base(Family::Cosine)
    }

    pub fn chebynet(theta: Vec<f64>) -> Self {
        Self { k: theta.len(), theta, ..Self::base(Family::ChebyNet) }
    }

    pub fn gcn(theta: f64) -> Self {
        Self { theta: vec![theta], ..Self::base(Family::Gcn) }
    }

    pub fn graphheat(s: f64, theta0: f64, theta1: f64) -> Self {
        Self { s, theta: vec![theta0, theta1], ..Self::base(Family::GraphHeat) }
    }

    pub fn igcn(k: usize, theta: f64) -> Self {
        Self { k, theta: vec![theta], ..Self::base(Family::Igcn) }
    }

    pub fn with_order(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_scale(mut self, c: f64) -> Self {
        self.scale = c;
        self
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Self {
        if self.family == Family::ChebyNet {
            self.k = theta.len();
        }
        self.theta = theta;
        self
    }

    pub fn analysis_form(mut self) -> Self {
        self.analysis = true;
        self
    }

    fn theta_at(&self, i: usize) -> f64 {
        self.theta.get(i).copied().unwrap_or(1.0)
    }

    /// Checks the per-family hyperparameter constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return bad("theta must be finite".into());
        }
        match self.family {
            Family::RegularizedLaplacian | Family::Diffusion if !(self.s > 0.0 && self.s.is_finite()) => {
                bad(format!("{} needs s > 0, got {}", self.family, self.s))
            }
            Family::GraphHeat if !(self.s >= 0.0 && self.s.is_finite()) => {
                bad(format!("graphheat needs s >= 0, got {}", self.s))
            }
            Family::PStepRandomWalk if self.p == 0 => bad("random walk needs p >= 1".into()),
            Family::PStepRandomWalk if !self.a.is_finite() => bad("random walk offset a must be finite".into()),
            Family::ChebyNet if self.theta.is_empty() => bad("chebynet needs at least one coefficient".into()),
            Family::Igcn if self.k == 0 => bad("igcn needs k >= 1".into()),
            Family::GraphHeat if self.theta.len() < 2 => bad("graphheat needs theta0 and theta1".into()),
            _ => Ok(()),
        }
    }

    /// Random-walk filters with `a < 2` fall outside the range where the
    /// regularization function is guaranteed increasing on `[0, 2]`.
    pub fn outside_monotone_guarantee(&self) -> bool {
        self.family == Family::PStepRandomWalk && self.a < 2.0
    }

    /// Short identifier used as a CSV column name.
    pub fn name(&self) -> String {
        let mut name = match self.family {
            Family::RegularizedLaplacian => format!("reglap_s{}", self.s),
            Family::Diffusion => format!("diffusion_s{}", self.s),
            Family::PStepRandomWalk => format!("rw_a{}_p{}", self.a, self.p),
            Family::Cosine => "cosine".to_string(),
            Family::ChebyNet if self.analysis => "chebynet".to_string(),
            Family::ChebyNet => format!("chebynet_k{}", self.theta.len()),
            Family::Gcn => "gcn".to_string(),
            Family::GraphHeat => format!("graphheat_s{}", self.s),
            Family::Igcn => format!("igcn_k{}", self.k),
        };
        if self.scale != 1.0 {
            name.push_str(&format!("_c{}", self.scale));
        }
        name
    }
}

/// Regularization function `r(lambda)`. Poles come back as `+inf`.
pub fn regularization_fn(spec: &FilterSpec, lambda: f64) -> f64 {
    let c = spec.scale;
    let reciprocal = |g: f64| if g.abs() < POLE_EPS { f64::INFINITY } else { c / g };
    match spec.family {
        Family::RegularizedLaplacian => c * (1.0 + spec.s * lambda),
        Family::Diffusion => c * (spec.s * lambda).exp(),
        Family::PStepRandomWalk => reciprocal((spec.a - lambda).powi(spec.p as i32)),
        Family::Cosine => reciprocal((lambda * FRAC_PI_4).cos()),
        Family::ChebyNet if spec.analysis => c * (-lambda).exp(),
        Family::Gcn if spec.analysis => c * lambda.exp(),
        Family::Igcn if spec.analysis => c * (spec.k as f64 * lambda).exp(),
        Family::GraphHeat if spec.analysis => c / (1.0 + (-spec.s * lambda).exp()),
        Family::ChebyNet | Family::Gcn | Family::GraphHeat | Family::Igcn => {
            reciprocal(published_response(spec, lambda))
        }
    }
}

/// Frequency response `g(lambda)`.
///
/// Regularized families return `1 / r(lambda)` in closed form (zero at a pole
/// of `r`); the published GCNN families return their response directly.
pub fn frequency_response(spec: &FilterSpec, lambda: f64) -> f64 {
    let c = spec.scale;
    match spec.family {
        Family::RegularizedLaplacian => 1.0 / (c * (1.0 + spec.s * lambda)),
        Family::Diffusion => (-spec.s * lambda).exp() / c,
        Family::PStepRandomWalk => (spec.a - lambda).powi(spec.p as i32) / c,
        Family::Cosine => {
            let v = (lambda * FRAC_PI_4).cos();
            if v.abs() < POLE_EPS {
                0.0
            } else {
                v / c
            }
        }
        Family::ChebyNet | Family::Gcn | Family::Igcn | Family::GraphHeat if spec.analysis => {
            1.0 / regularization_fn(spec, lambda)
        }
        Family::ChebyNet | Family::Gcn | Family::GraphHeat | Family::Igcn => {
            published_response(spec, lambda) / c
        }
    }
}

fn published_response(spec: &FilterSpec, lambda: f64) -> f64 {
    match spec.family {
        Family::ChebyNet => spec.theta.iter().rev().fold(0.0, |acc, &t| acc * lambda + t),
        Family::Gcn => spec.theta_at(0) * (1.0 - lambda),
        Family::GraphHeat => spec.theta_at(0) + spec.theta_at(1) * (-spec.s * lambda).exp(),
        Family::Igcn => (spec.theta_at(0) * (1.0 - lambda)).powi(spec.k as i32),
        _ => 1.0 / regularization_fn(spec, lambda),
    }
}

/// First pair of grid points where `r` decreased (or became NaN).
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub lambda_prev: f64,
    pub lambda_next: f64,
    pub r_prev: f64,
    pub r_next: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    pub monotone: bool,
    pub violation: Option<Violation>,
    /// Grid points where `r` is infinite.
    pub poles: Vec<f64>,
    /// Set for random-walk filters with `a < 2`.
    pub outside_guarantee: bool,
}

/// Uniform grid of `points` values on `[0, lambda_max]`.
pub fn lambda_grid(lambda_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    let step = lambda_max / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { lambda_max } else { i as f64 * step })
        .collect()
}

/// Evaluates `r` on a uniform grid over `[0, lambda_max]` and reports whether
/// it is non-decreasing.
///
/// Infinite values are poles: they are listed in the report and split the grid
/// into pieces that are checked independently. A NaN is a violation.
pub fn check_monotone_increasing(spec: &FilterSpec, lambda_max: f64, grid_points: usize) -> Result<MonotoneReport> {
    if grid_points < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {grid_points}")));
    }
    spec.validate()?;
    let mut poles = Vec::new();
    let mut violation = None;
    let mut prev: Option<(f64, f64)> = None;
    for lambda in lambda_grid(lambda_max, grid_points) {
        let r = regularization_fn(spec, lambda);
        if r.is_nan() {
            let (lp, rp) = prev.unwrap_or((lambda, r));
            violation.get_or_insert(Violation { lambda_prev: lp, lambda_next: lambda, r_prev: rp, r_next: r });
            prev = None;
            continue;
        }
        if r.is_infinite() {
            poles.push(lambda);
            prev = None;
            continue;
        }
        if let Some((lp, rp)) = prev {
            if r < rp - MONOTONE_TOL * rp.abs().max(1.0) && violation.is_none() {
                violation = Some(Violation { lambda_prev: lp, lambda_next: lambda, r_prev: rp, r_next: r });
            }
        }
        prev = Some((lambda, r));
    }
    Ok(MonotoneReport {
        monotone: violation.is_none(),
        violation,
        poles,
        outside_guarantee: spec.outside_monotone_guarantee(),
    })
}

/// `r(lambda)` curves sampled on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub names: Vec<String>,
    pub lambdas: Vec<f64>,
    /// `values[i][j]` is spec `j` at `lambdas[i]`.
    pub values: Vec<Vec<f64>>,
}

impl CurveTable {
    /// CSV text: `lambda,<name>...` header, 9 significant digits, empty cells
    /// for non-finite values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda");
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (lambda, row) in self.lambdas.iter().zip(&self.values) {
            out.push_str(&format_sig9(*lambda));
            for v in row {
                out.push(',');
                if v.is_finite() {
                    out.push_str(&format_sig9(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

/// Samples `r(lambda)` for every spec on a shared grid over `[0, lambda_max]`.
pub fn emit_curves(specs: &[FilterSpec], lambda_max: f64, grid_points: usize) -> Result<CurveTable> {
    if grid_points < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {grid_points}")));
    }
    for spec in specs {
        spec.validate()?;
    }
    let lambdas = lambda_grid(lambda_max, grid_points);
    let values = lambdas
        .iter()
        .map(|&l| specs.iter().map(|s| regularization_fn(s, l)).collect())
        .collect();
    Ok(CurveTable {
        names: specs.iter().map(FilterSpec::name).collect(),
        lambdas,
        values,
    })
}

/// One panel of a figure preset.
#[derive(Clone, Debug)]
pub struct CurvePanel {
    pub name: &'static str,
    pub specs: Vec<FilterSpec>,
    pub lambda_max: f64,
}

/// Regularization functions of the four proposed filter families.
pub fn figure1_panels() -> Vec<CurvePanel> {
    let scales = [0.5, 1.0, 1.5, 2.0];
    let offsets = [2.0, 3.0, 4.0, 5.0];
    vec![
        CurvePanel {
            name: "a_regularized_laplacian",
            specs: scales.iter().map(|&s| FilterSpec::regularized_laplacian(s)).collect(),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "b_diffusion",
            specs: scales.iter().map(|&s| FilterSpec::diffusion(s)).collect(),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "c_one_step_random_walk",
            specs: offsets.iter().map(|&a| FilterSpec::random_walk(a, 1)).collect(),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "d_two_step_random_walk",
            specs: offsets.iter().map(|&a| FilterSpec::random_walk(a, 2)).collect(),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "e_inverse_cosine",
            specs: vec![FilterSpec::cosine()],
            lambda_max: 2.0,
        },
    ]
}

/// Regularization behaviour of ChebyNet, GCN, GraphHeat and IGCN (k = 2, 3).
pub fn figure2_panels() -> Vec<CurvePanel> {
    let cs = [0.2, 0.5, 1.0, 1.5];
    let family = |make: &dyn Fn() -> FilterSpec| -> Vec<FilterSpec> {
        cs.iter().map(|&c| make().analysis_form().with_scale(c)).collect()
    };
    vec![
        CurvePanel {
            name: "a_chebynet",
            specs: family(&|| FilterSpec::chebynet(vec![1.0])),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "b_gcn",
            specs: family(&|| FilterSpec::gcn(1.0)),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "c_graphheat",
            specs: family(&|| FilterSpec::graphheat(1.0, 1.0, 1.0)),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "d_igcn_k2",
            specs: family(&|| FilterSpec::igcn(2, 1.0)),
            lambda_max: 2.0,
        },
        CurvePanel {
            name: "e_igcn_k3",
            specs: family(&|| FilterSpec::igcn(3, 1.0)),
            lambda_max: 2.0,
        },
    ]
}

/// Formats like C's `%.9g`.
pub fn format_sig9(v: f64) -> String {
    const DIGITS: usize = 9;
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularization_examples() {
        assert_eq!(regularization_fn(&FilterSpec::regularized_laplacian(1.0), 0.0), 1.0);
        assert!((regularization_fn(&FilterSpec::diffusion(1.0), 2.0) - 7.389056).abs() < 1e-6);
        assert_eq!(regularization_fn(&FilterSpec::random_walk(2.0, 1), 1.0), 1.0);
    }

    #[test]
    fn response_examples() {
        assert_eq!(frequency_response(&FilterSpec::diffusion(1.0), 0.0), 1.0);
        assert_eq!(frequency_response(&FilterSpec::gcn(1.0), 2.0), -1.0);
        assert!((frequency_response(&FilterSpec::cosine(), 1.0) - 0.7071068).abs() < 1e-7);
    }

    #[test]
    fn poles_are_infinite() {
        assert!(regularization_fn(&FilterSpec::random_walk(2.0, 2), 2.0).is_infinite());
        assert!(regularization_fn(&FilterSpec::cosine(), 2.0).is_infinite());
        assert!(regularization_fn(&FilterSpec::gcn(1.0), 1.0).is_infinite());
        assert!(regularization_fn(&FilterSpec::igcn(3, 1.0), 1.0).is_infinite());
        assert_eq!(frequency_response(&FilterSpec::cosine(), 2.0), 0.0);
    }

    #[test]
    fn monotone_examples() {
        let rep = check_monotone_increasing(&FilterSpec::regularized_laplacian(1.0), 2.0, 101).unwrap();
        assert!(rep.monotone && rep.poles.is_empty());

        let cheb = FilterSpec::chebynet(vec![1.0]).analysis_form();
        let rep = check_monotone_increasing(&cheb, 2.0, 101).unwrap();
        assert!(!rep.monotone);
        let v = rep.violation.unwrap();
        assert_eq!(v.lambda_prev, 0.0);
        assert!((v.lambda_next - 0.02).abs() < 1e-15);

        let rep = check_monotone_increasing(&FilterSpec::random_walk(2.0, 2), 2.0, 101).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.poles, vec![2.0]);

        let rep = check_monotone_increasing(&FilterSpec::cosine(), 2.0, DEFAULT_GRID).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.poles, vec![2.0]);
    }

    #[test]
    fn gcn_pole_and_even_igcn() {
        let rep = check_monotone_increasing(&FilterSpec::gcn(1.0), 2.0, 201).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.poles, vec![1.0]);
        // (1 - lambda)^{-2} decreases past the pole.
        let rep = check_monotone_increasing(&FilterSpec::igcn(2, 1.0), 2.0, 201).unwrap();
        assert!(!rep.monotone);
        for k in [1, 3, 5] {
            assert!(check_monotone_increasing(&FilterSpec::igcn(k, 1.0), 2.0, 201).unwrap().monotone);
        }
    }

    #[test]
    fn random_walk_below_two_is_flagged() {
        let rep = check_monotone_increasing(&FilterSpec::random_walk(1.0, 1), 2.0, 11).unwrap();
        assert!(rep.outside_guarantee);
    }

    #[test]
    fn grid_validation() {
        assert!(check_monotone_increasing(&FilterSpec::diffusion(1.0), 2.0, 1).is_err());
        assert!(check_monotone_increasing(&FilterSpec::diffusion(0.0), 2.0, 11).is_err());
    }

    #[test]
    fn curves_minimal_grid_and_csv() {
        let table = emit_curves(&[FilterSpec::diffusion(1.0)], 2.0, 2).unwrap();
        assert_eq!(table.lambdas, vec![0.0, 2.0]);
        let csv = table.to_csv();
        assert_eq!(csv, "lambda,diffusion_s1\n0,1\n2,7.3890561\n");

        let table = emit_curves(&[FilterSpec::random_walk(2.0, 1)], 2.0, 3).unwrap();
        assert!(table.to_csv().ends_with("2,\n"));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-0.5), "-0.5");
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig9(123456789012.0), "1.23456789e+11");
        assert_eq!(format_sig9(0.000012345), "1.2345e-05");
        assert_eq!(format_sig9(9.9999999999), "10");
        assert_eq!(format_sig9(0.0001), "0.0001");
    }

    #[test]
    fn family_names_parse() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("nope".parse::<Family>().is_err());
    }
}
