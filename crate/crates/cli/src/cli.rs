//! Argument parsing and subcommand dispatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use regfilter::filters::{
    cosine_filter, diffusion_filter_taylor, gcn_filter, graphheat_filter, igcn_filter, kernel_check,
    p_step_rw_filter, regularized_laplacian_filter, Construction, RandomWalkPath, Storage,
};
use regfilter::gcn::{fixed_propagation, LaplacianChoice};
use regfilter::response::{emit_curves, figure1_panels, figure2_panels, format_sig9, CurvePanel, DEFAULT_GRID};
use regfilter::spectral::{eigendecompose_with_cap, max_eigenvalue, DEFAULT_DENSE_CAP};
use regfilter::{
    check_monotone_increasing, contextual_sbm, exact_filter, load_dataset, normalized_laplacian, renormalize, Dataset,
    Family, FilterMatrix, FilterSpec, SbmParams, SparseMatrix,
};

use crate::config::{ExperimentConfig, Grid};
use crate::convert::{convert_files, SplitSizes};
use crate::sweep::{candidates, per_seed_csv, run_sweep, summary_csv, sweep_csv, timing_csv, Mode, Model, SweepResult};
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "regfilter", version, about = "Regularized spectral graph filters and GCN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplacian eigenvalues as `index,eigenvalue` CSV.
    Spectrum(SpectrumArgs),
    /// Regularization function curves.
    Curves(CurvesArgs),
    /// Train spectral GCNs over seeds and a hyperparameter grid.
    Train(RunArgs),
    /// Filter features once, then train an MLP.
    Decouple(RunArgs),
    /// Kernel and PSD diagnostics of a filter on a dataset.
    KernelCheck(KernelArgs),
    /// Check that r(lambda) is non-decreasing; exit 1 otherwise.
    Monotone(MonotoneArgs),
    /// Convert LINQS `.content` / `.cites` files into a dataset directory.
    Convert(ConvertArgs),
    /// Write a seeded contextual stochastic block model dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Filter family (comma separated for several).
    #[arg(long = "filter", value_delimiter = ',')]
    pub filter: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<u32>>,
    /// Truncation order, Chebyshev order or IGCN power.
    #[arg(long = "K", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Filter coefficients.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,
}

impl FilterArgs {
    fn grid(&self) -> Grid {
        Grid {
            s: self.s.clone(),
            a: self.a.clone(),
            p: self.p.clone(),
            k: self.k.clone(),
            theta: self.theta.clone(),
            ..Grid::default()
        }
    }

    /// Every spec named by the flags; only spectral families are allowed.
    fn specs(&self) -> anyhow::Result<Vec<FilterSpec>> {
        let grid = self.grid();
        let mut out = Vec::new();
        for name in &self.filter {
            match Model::parse(name)? {
                Model::Spectral(spec) => out.extend(grid.specs(spec.family)?),
                _ => return Err(UsageError(format!("{name} is not a filter family")).into()),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Use the self-loop renormalized Laplacian.
    #[arg(long)]
    pub renormalize: bool,
    /// Only the largest eigenvalue, by power iteration.
    #[arg(long)]
    pub power: bool,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub cap: usize,
    /// Directory for `spectrum.csv`; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Exponential analysis forms for ChebyNet, GCN and IGCN.
    #[arg(long)]
    pub analysis: bool,
    /// Multipliers `c` on r (one curve each).
    #[arg(long, value_delimiter = ',')]
    pub scale: Option<Vec<f64>>,
    #[arg(long = "lambda-max")]
    pub lambda_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Output directory; custom curves go to stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonotoneArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub analysis: bool,
    #[arg(long, value_delimiter = ',')]
    pub scale: Option<Vec<f64>>,
    #[arg(long = "lambda-max", default_value_t = 2.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelConstruction {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long, value_enum, default_value = "exact")]
    pub construction: KernelConstruction,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub cap: usize,
    /// Directory for `kernel_check.csv`; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML experiment file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Filter families, or `mlp` / `identity`.
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Drop probabilities.
    #[arg(long, value_delimiter = ',')]
    pub dropout: Option<Vec<f64>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long = "weight-decay")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Keep filter coefficients at their initial values.
    #[arg(long = "fixed-filter")]
    pub fixed_filter: bool,
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Config file merged with flags.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if !self.filter.filter.is_empty() {
            cfg.filters = self.filter.filter.clone();
        }
        let mut flags = self.filter.grid();
        flags.hidden = self.hidden.clone();
        flags.dropout = self.dropout.clone();
        cfg.grid.overlay(flags);
        cfg.seeds = self.seeds.or(cfg.seeds);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.out = self.out.clone().or(cfg.out);
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.patience {
            t.patience = v;
        }
        if let Some(v) = self.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = self.layers {
            t.layers = v;
        }
        if self.fixed_filter {
            t.learn_filter = false;
        }
        if self.renormalize {
            cfg.renormalize = Some(true);
        }
        if cfg.renormalize == Some(true) {
            cfg.train.laplacian = LaplacianChoice::Renormalized;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long)]
    pub cites: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the split shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "train-per-class", default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 500)]
    pub val: usize,
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long = "degree-in")]
    pub degree_in: Option<f64>,
    #[arg(long = "degree-out")]
    pub degree_out: Option<f64>,
    #[arg(long = "train-per-class")]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
}

/// Runs one subcommand; `Ok(1)` signals a property violation.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Spectrum(a) => spectrum(&a),
        Command::Curves(a) => curves(&a),
        Command::Train(a) => experiment(&a, Mode::Train),
        Command::Decouple(a) => experiment(&a, Mode::Decouple),
        Command::KernelCheck(a) => kernel(&a),
        Command::Monotone(a) => monotone(&a),
        Command::Convert(a) => convert(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => write_file(&dir.join(file), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn open_dataset(path: Option<&Path>) -> anyhow::Result<Dataset> {
    let path = path.ok_or_else(|| UsageError("--dataset is required".into()))?;
    if !path.is_dir() {
        return Err(UsageError(format!("dataset directory {} not found", path.display())).into());
    }
    Ok(load_dataset(path)?)
}

fn spectrum(args: &SpectrumArgs) -> anyhow::Result<u8> {
    let ds = open_dataset(args.dataset.as_deref())?;
    let l = if args.renormalize { renormalize(&ds.graph) } else { normalized_laplacian(&ds.graph) };
    let mut out = String::from("index,eigenvalue\n");
    if args.power {
        let _ = writeln!(out, "{},{}", ds.n() - 1, format_sig9(max_eigenvalue(&l)?));
    } else {
        let e = eigendecompose_with_cap(&l, args.cap)?;
        for (i, v) in e.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", format_sig9(*v));
        }
    }
    emit(args.out.as_deref(), "spectrum.csv", &out)?;
    Ok(0)
}

/// Applies `--analysis` and `--scale` to each spec.
fn shaped(specs: Vec<FilterSpec>, analysis: bool, scale: &Option<Vec<f64>>) -> anyhow::Result<Vec<FilterSpec>> {
    let scales = scale.clone().unwrap_or_else(|| vec![1.0]);
    if scales.is_empty() {
        return Err(UsageError("--scale list is empty".into()).into());
    }
    let mut out = Vec::new();
    for spec in specs {
        let spec = if analysis { spec.analysis_form() } else { spec };
        for &c in &scales {
            out.push(spec.clone().with_scale(c));
        }
    }
    Ok(out)
}

fn curves(args: &CurvesArgs) -> anyhow::Result<u8> {
    if let Some(preset) = args.preset {
        if !args.filter.filter.is_empty() {
            return Err(UsageError("--preset and --filter are exclusive".into()).into());
        }
        let panels: Vec<CurvePanel> = match preset {
            Preset::Fig1 => figure1_panels(),
            Preset::Fig2 => figure2_panels(),
        };
        let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("curves"));
        for panel in panels {
            let lambda_max = args.lambda_max.unwrap_or(panel.lambda_max);
            let table = emit_curves(&panel.specs, lambda_max, args.grid)?;
            write_file(&dir.join(format!("{}.csv", panel.name)), &table.to_csv())?;
            println!("{}", dir.join(format!("{}.csv", panel.name)).display());
        }
        return Ok(0);
    }
    let specs = shaped(args.filter.specs()?, args.analysis, &args.scale)?;
    if specs.is_empty() {
        return Err(UsageError("no curves requested: give --preset or --filter".into()).into());
    }
    let table = emit_curves(&specs, args.lambda_max.unwrap_or(2.0), args.grid)?;
    emit(args.out.as_deref(), "curves.csv", &table.to_csv())?;
    Ok(0)
}

fn monotone(args: &MonotoneArgs) -> anyhow::Result<u8> {
    let specs = shaped(args.filter.specs()?, args.analysis, &args.scale)?;
    if specs.is_empty() {
        return Err(UsageError("--filter is required".into()).into());
    }
    let mut code = 0;
    for spec in &specs {
        let report = check_monotone_increasing(spec, args.lambda_max, args.grid)?;
        let name = spec.name();
        match &report.violation {
            None => println!("monotone: {name} on [0, {}] ({} points)", args.lambda_max, args.grid),
            Some(v) => {
                code = 1;
                println!(
                    "violation: {name} r({}) = {} > r({}) = {}",
                    format_sig9(v.lambda_prev),
                    format_sig9(v.r_prev),
                    format_sig9(v.lambda_next),
                    format_sig9(v.r_next)
                );
            }
        }
        if !report.poles.is_empty() {
            let poles: Vec<String> = report.poles.iter().map(|&p| format_sig9(p)).collect();
            println!("warning: {name} has a pole at lambda = {}", poles.join(", "));
        }
        if report.outside_guarantee {
            println!("warning: {name} has a < 2, outside the guaranteed monotone range");
        }
    }
    Ok(code)
}

fn approximate(spec: &FilterSpec, ds: &Dataset, l: &SparseMatrix, choice: LaplacianChoice) -> anyhow::Result<FilterMatrix> {
    let theta = spec.theta.first().copied().unwrap_or(1.0);
    let f = match spec.family {
        Family::RegularizedLaplacian => regularized_laplacian_filter(l, spec.s)?,
        Family::Diffusion => diffusion_filter_taylor(l, spec.s, spec.k, theta)?,
        Family::PStepRandomWalk => p_step_rw_filter(l, spec.a, spec.p, RandomWalkPath::Direct)?,
        Family::Cosine => cosine_filter(l, spec.k, theta)?,
        Family::Gcn => gcn_filter(l, theta)?,
        Family::GraphHeat => graphheat_filter(l, spec.s, spec.k, theta, spec.theta.get(1).copied().unwrap_or(1.0))?,
        Family::Igcn => igcn_filter(l, spec.k, theta)?,
        Family::ChebyNet => {
            let prop = fixed_propagation(spec, &ds.graph, choice)?;
            FilterMatrix {
                matrix: Storage::Dense(prop.to_dense(&prop.init, ds.n())?),
                spec: spec.clone(),
                construction: Construction::Product(spec.theta.len().saturating_sub(1)),
            }
        }
    };
    Ok(f)
}

fn kernel(args: &KernelArgs) -> anyhow::Result<u8> {
    let ds = open_dataset(args.dataset.as_deref())?;
    let specs = args.filter.specs()?;
    let spec = match specs.as_slice() {
        [spec] => spec,
        [] => return Err(UsageError("--filter is required".into()).into()),
        _ => return Err(UsageError("kernel-check takes a single filter".into()).into()),
    };
    let choice = if args.renormalize { LaplacianChoice::Renormalized } else { LaplacianChoice::Normalized };
    let l = choice.laplacian_for(spec.family, &ds.graph);
    let e = eigendecompose_with_cap(&l, args.cap)?;
    let f = match args.construction {
        KernelConstruction::Exact => exact_filter(spec, &e)?,
        KernelConstruction::Approx => approximate(spec, &ds, &l, choice)?,
    };
    let report = kernel_check(&f, spec, &l)?;
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "filter,{}", spec.name());
    let _ = writeln!(out, "construction,{:?}", f.construction);
    for (k, v) in report.rows() {
        let _ = writeln!(out, "{k},{v}");
    }
    emit(args.out.as_deref(), "kernel_check.csv", &out)?;
    Ok(0)
}

fn experiment(args: &RunArgs, mode: Mode) -> anyhow::Result<u8> {
    let cfg = args.resolve()?;
    let ds = open_dataset(cfg.dataset.as_deref())?;
    if cfg.filters.is_empty() {
        return Err(UsageError("--filter is required".into()).into());
    }
    let mut sweeps: Vec<SweepResult> = Vec::new();
    for name in &cfg.filters {
        let model = Model::parse(name)?;
        let cs = candidates(&model, &cfg.grid, &cfg.train)?;
        let label = match &model {
            Model::Spectral(spec) => spec.family.as_str().to_string(),
            _ => name.to_ascii_lowercase(),
        };
        sweeps.push(run_sweep(&ds, &label, cs, mode, cfg.seeds(), cfg.root_seed())?);
    }

    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let summary = summary_csv(&sweeps);
    write_file(&dir.join("summary.csv"), &summary)?;
    write_file(&dir.join("per_seed.csv"), &per_seed_csv(&sweeps))?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(&sweeps))?;
    write_file(&dir.join("timing.csv"), &timing_csv(&sweeps))?;
    for s in &sweeps {
        let best = s.best();
        let label = best.candidate.label();
        for run in &best.runs {
            let stem = format!("{label}_seed{}", run.seed);
            write_file(&dir.join("reports").join(format!("{stem}.csv")), &run.report.to_csv())?;
            if let Some(model) = &run.model {
                write_file(&dir.join("models").join(format!("{stem}.txt")), &model.to_text(run.seed, &run.config_hash))?;
            }
        }
    }
    print!("{summary}");
    Ok(0)
}

fn convert(args: &ConvertArgs) -> anyhow::Result<u8> {
    let sizes = SplitSizes { train_per_class: args.train_per_class, val: args.val, test: args.test };
    let stats = convert_files(&args.content, &args.cites, &args.out, sizes, args.seed)?;
    println!(
        "nodes={} edges={} dropped_dangling={} dropped_self={}",
        stats.nodes, stats.edges, stats.dangling_citations, stats.self_citations
    );
    Ok(0)
}

fn synth(args: &SynthArgs) -> anyhow::Result<u8> {
    let d = SbmParams::default();
    let params = SbmParams {
        nodes: args.nodes.unwrap_or(d.nodes),
        classes: args.classes.unwrap_or(d.classes),
        features: args.features.unwrap_or(d.features),
        degree_in: args.degree_in.unwrap_or(d.degree_in),
        degree_out: args.degree_out.unwrap_or(d.degree_out),
        train_per_class: args.train_per_class.unwrap_or(d.train_per_class),
        val: args.val.unwrap_or(d.val),
        test: args.test.unwrap_or(d.test),
        ..d
    };
    let ds = contextual_sbm(&params, args.seed).map_err(|e| UsageError(e.to_string()))?;
    ds.save(&args.out)?;
    println!("nodes={} edges={} classes={}", ds.n(), ds.graph.edge_count(), ds.num_classes());
    Ok(0)
}
