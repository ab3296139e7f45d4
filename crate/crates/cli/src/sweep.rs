//! Hyperparameter sweeps over seeds with validation-based selection.

use std::fmt::Write as _;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use regfilter::gcn::{config_hash, decoupled_experiment, decoupled_with, train, train_with, GcnModel, Propagation, TrainConfig, TrainReport};
use regfilter::{Dataset, Family, FilterSpec};

use crate::config::Grid;
use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Filter inside every layer, coefficients learned.
    Train,
    /// Features filtered once, then an MLP.
    Decouple,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Decouple => "decouple",
        }
    }
}

/// What sits between the features and the dense layers.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Spectral(FilterSpec),
    /// No graph at all.
    Mlp,
    /// Filter `F = I`.
    Identity,
}

impl Model {
    pub fn parse(name: &str) -> Result<Self, UsageError> {
        match name.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Model::Mlp),
            "identity" | "none" => Ok(Model::Identity),
            _ => name
                .parse::<Family>()
                .map(|f| Model::Spectral(FilterSpec::new(f)))
                .map_err(|e| UsageError(e.to_string())),
        }
    }

    fn label(&self) -> String {
        match self {
            Model::Spectral(spec) => {
                let mut name = spec.name();
                if matches!(spec.family, Family::Diffusion | Family::Cosine | Family::GraphHeat) {
                    let _ = write!(name, "_K{}", spec.k);
                }
                name
            }
            Model::Mlp => "mlp".into(),
            Model::Identity => "identity".into(),
        }
    }

    fn spec(&self) -> Option<&FilterSpec> {
        match self {
            Model::Spectral(spec) => Some(spec),
            _ => None,
        }
    }
}

/// One grid point.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub model: Model,
    pub train: TrainConfig,
}

impl Candidate {
    pub fn label(&self) -> String {
        format!("{}_h{}_drop{}", self.model.label(), self.train.hidden, self.train.dropout)
    }

    /// Human-readable hyperparameters for the summary.
    pub fn describe(&self) -> String {
        let mut out = match &self.model {
            Model::Spectral(spec) => {
                let theta: Vec<String> = spec.theta.iter().map(f64::to_string).collect();
                match spec.family {
                    Family::RegularizedLaplacian => format!("s={}", spec.s),
                    Family::Diffusion | Family::GraphHeat => format!("s={} K={}", spec.s, spec.k),
                    Family::PStepRandomWalk => format!("a={} p={}", spec.a, spec.p),
                    Family::Cosine | Family::Igcn => format!("K={}", spec.k),
                    Family::ChebyNet => format!("theta={}", theta.join("/")),
                    Family::Gcn => format!("theta={}", theta.join("/")),
                }
            }
            _ => String::new(),
        };
        if !out.is_empty() {
            out.push(' ');
        }
        let _ = write!(out, "hidden={} dropout={}", self.train.hidden, self.train.dropout);
        out
    }
}

/// Expands the grid for one model; the spec loop is outermost, dropout innermost.
pub fn candidates(model: &Model, grid: &Grid, base: &TrainConfig) -> Result<Vec<Candidate>, UsageError> {
    let models = match model {
        Model::Spectral(spec) => grid.specs(spec.family)?.into_iter().map(Model::Spectral).collect(),
        other => {
            grid.validate()?;
            vec![other.clone()]
        }
    };
    let hidden = grid.hidden.clone().unwrap_or_else(|| vec![base.hidden]);
    let dropout = grid.dropout.clone().unwrap_or_else(|| vec![base.dropout]);
    let mut out = Vec::new();
    for m in models {
        for &h in &hidden {
            for &d in &dropout {
                let train = TrainConfig { hidden: h, dropout: d, ..base.clone() };
                train.validate().map_err(|e| UsageError(e.to_string()))?;
                out.push(Candidate { model: m.clone(), train });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub report: TrainReport,
    pub model: Option<GcnModel>,
    pub config_hash: String,
}

#[derive(Clone, Debug)]
pub struct CandidateResult {
    pub candidate: Candidate,
    pub runs: Vec<SeedRun>,
}

impl CandidateResult {
    pub fn val_mean(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.report.val_accuracy))
    }

    pub fn test_mean(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.report.test_accuracy))
    }

    pub fn test_std(&self) -> f64 {
        std(self.runs.iter().map(|r| r.report.test_accuracy))
    }
}

/// All grid points of one model, with the selected one.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub name: String,
    pub mode: Mode,
    pub results: Vec<CandidateResult>,
    pub chosen: usize,
}

impl SweepResult {
    pub fn best(&self) -> &CandidateResult {
        &self.results[self.chosen]
    }
}

pub fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Population standard deviation.
pub fn std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = mean(values.clone());
    mean(values.map(|v| (v - m) * (v - m))).sqrt()
}

fn run_one(ds: &Dataset, c: &Candidate, mode: Mode, seed: u64) -> regfilter::Result<(TrainReport, Option<GcnModel>)> {
    let cfg = TrainConfig { seed, ..c.train.clone() };
    match (mode, &c.model) {
        (Mode::Train, Model::Spectral(spec)) => train(ds, spec, &cfg).map(|(r, m)| (r, Some(m))),
        (Mode::Train, _) => train_with(ds, &Propagation::identity(), &cfg).map(|(r, m)| (r, Some(m))),
        (Mode::Decouple, Model::Spectral(spec)) => decoupled_experiment(ds, spec, &cfg).map(|r| (r, None)),
        (Mode::Decouple, _) => decoupled_with(ds, &Propagation::identity(), &cfg).map(|r| (r, None)),
    }
}

/// Runs every candidate on seeds `root_seed + i`, `i < seeds`, in parallel.
///
/// Results keep grid order, so the output does not depend on scheduling.
/// The chosen candidate has the best mean validation accuracy, ties going
/// to the earliest grid point.
pub fn run_sweep(
    ds: &Dataset,
    name: &str,
    candidates: Vec<Candidate>,
    mode: Mode,
    seeds: usize,
    root_seed: u64,
) -> anyhow::Result<SweepResult> {
    if seeds == 0 {
        return Err(UsageError("seeds must be at least 1".into()).into());
    }
    if candidates.is_empty() {
        return Err(UsageError("empty hyperparameter grid".into()).into());
    }
    let jobs: Vec<(usize, u64)> = (0..candidates.len())
        .flat_map(|c| (0..seeds as u64).map(move |i| (c, root_seed + i)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, seed)| run_one(ds, &candidates[c], mode, seed))
        .collect();

    let mut results: Vec<CandidateResult> = candidates
        .into_iter()
        .map(|candidate| CandidateResult { candidate, runs: Vec::with_capacity(seeds) })
        .collect();
    for (&(c, seed), outcome) in jobs.iter().zip(outcomes) {
        let entry = &mut results[c];
        let (report, model) = outcome
            .map_err(anyhow::Error::from)
            .with_context(|| format!("{} failed for seed {seed}", entry.candidate.label()))?;
        let hash = config_hash(&TrainConfig { seed, ..entry.candidate.train.clone() }, entry.candidate.model.spec());
        entry.runs.push(SeedRun { seed, report, model, config_hash: hash });
    }

    let mut chosen = 0;
    for (i, r) in results.iter().enumerate() {
        if r.val_mean() > results[chosen].val_mean() {
            chosen = i;
        }
    }
    if results[chosen].val_mean().is_nan() {
        return Err(anyhow!("validation accuracy is undefined (empty validation split?)"));
    }
    Ok(SweepResult { name: name.to_string(), mode, results, chosen })
}

fn pct(v: f64) -> String {
    format!("{:.4}", 100.0 * v)
}

pub const SUMMARY_HEADER: &str =
    "filter,mode,seeds,test_acc_mean,test_acc_std,val_acc_mean,train_acc_mean,epochs_mean,chosen";

/// Deterministic summary rows, one per sweep; accuracies in percent.
pub fn summary_csv(sweeps: &[SweepResult]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in sweeps {
        let b = s.best();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.2},{}",
            s.name,
            s.mode.as_str(),
            b.runs.len(),
            pct(b.test_mean()),
            pct(b.test_std()),
            pct(b.val_mean()),
            pct(mean(b.runs.iter().map(|r| r.report.train_accuracy))),
            mean(b.runs.iter().map(|r| r.report.epochs_run as f64)),
            b.candidate.describe(),
        );
    }
    out
}

/// One row per seed of each chosen candidate.
pub fn per_seed_csv(sweeps: &[SweepResult]) -> String {
    let mut out = String::from("filter,candidate,seed,test_acc,val_acc,train_acc,epochs\n");
    for s in sweeps {
        let b = s.best();
        for r in &b.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.name,
                b.candidate.label(),
                r.seed,
                pct(r.report.test_accuracy),
                pct(r.report.val_accuracy),
                pct(r.report.train_accuracy),
                r.report.epochs_run
            );
        }
    }
    out
}

/// Every grid point with its mean scores.
pub fn sweep_csv(sweeps: &[SweepResult]) -> String {
    let mut out = String::from("filter,candidate,val_acc_mean,test_acc_mean,test_acc_std,chosen\n");
    for s in sweeps {
        for (i, r) in s.results.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.name,
                r.candidate.label(),
                pct(r.val_mean()),
                pct(r.test_mean()),
                pct(r.test_std()),
                i == s.chosen
            );
        }
    }
    out
}

/// Wall-clock timings; these differ between runs.
pub fn timing_csv(sweeps: &[SweepResult]) -> String {
    let mut out = String::from("filter,candidate,seed,epochs,mean_epoch_seconds\n");
    for s in sweeps {
        for r in &s.results {
            for run in &r.runs {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6}",
                    s.name,
                    r.candidate.label(),
                    run.seed,
                    run.report.epochs_run,
                    run.report.mean_epoch_seconds()
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use regfilter::{contextual_sbm, SbmParams};

    fn tiny() -> Dataset {
        let p = SbmParams { nodes: 60, features: 12, train_per_class: 3, val: 15, test: 30, ..SbmParams::default() };
        contextual_sbm(&p, 2).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig { max_epochs: 15, hidden: 8, ..TrainConfig::default() }
    }

    #[test]
    fn stats() {
        assert_eq!(mean([1.0, 2.0, 3.0].into_iter()), 2.0);
        assert!((std([1.0, 3.0].into_iter()) - 1.0).abs() < 1e-15);
        assert!(mean(std::iter::empty()).is_nan());
    }

    #[test]
    fn model_names() {
        assert_eq!(Model::parse("MLP").unwrap(), Model::Mlp);
        assert_eq!(Model::parse("heat").unwrap(), Model::Spectral(FilterSpec::new(Family::Diffusion)));
        assert!(Model::parse("nope").is_err());
    }

    #[test]
    fn grid_order_and_size() {
        let grid = Grid { s: Some(vec![0.5, 1.0]), dropout: Some(vec![0.2, 0.5]), ..Grid::default() };
        let cs = candidates(&Model::parse("diffusion").unwrap(), &grid, &quick()).unwrap();
        let labels: Vec<String> = cs.iter().map(Candidate::label).collect();
        assert_eq!(
            labels,
            ["diffusion_s0.5_K3_h8_drop0.2", "diffusion_s0.5_K3_h8_drop0.5", "diffusion_s1_K3_h8_drop0.2", "diffusion_s1_K3_h8_drop0.5"]
        );
    }

    #[test]
    fn bad_dropout_is_usage_error() {
        let grid = Grid { dropout: Some(vec![1.0]), ..Grid::default() };
        assert!(candidates(&Model::Mlp, &grid, &quick()).is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let ds = tiny();
        let grid = Grid { s: Some(vec![0.5, 1.5]), ..Grid::default() };
        let cs = candidates(&Model::parse("diffusion").unwrap(), &grid, &quick()).unwrap();
        let a = run_sweep(&ds, "diffusion", cs.clone(), Mode::Train, 2, 7).unwrap();
        let b = run_sweep(&ds, "diffusion", cs, Mode::Train, 2, 7).unwrap();
        assert_eq!(summary_csv(&[a.clone()]), summary_csv(&[b]));
        assert_eq!(a.results[0].runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![7, 8]);
        let best = a.best().val_mean();
        assert!(a.results.iter().all(|r| r.val_mean() <= best));
        assert!(a.results[..a.chosen].iter().all(|r| r.val_mean() < best));
    }

    #[test]
    fn identity_decouple_matches_mlp_train() {
        let ds = tiny();
        let cs = candidates(&Model::Identity, &Grid::default(), &quick()).unwrap();
        let d = run_sweep(&ds, "identity", cs, Mode::Decouple, 2, 0).unwrap();
        let cs = candidates(&Model::Mlp, &Grid::default(), &quick()).unwrap();
        let m = run_sweep(&ds, "mlp", cs, Mode::Train, 2, 0).unwrap();
        assert_eq!(d.best().test_mean(), m.best().test_mean());
    }

    #[test]
    fn zero_seeds_rejected() {
        let ds = tiny();
        let cs = candidates(&Model::Mlp, &Grid::default(), &quick()).unwrap();
        let err = run_sweep(&ds, "mlp", cs, Mode::Train, 0, 0).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
