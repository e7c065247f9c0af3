//! Command-line pipeline: dataset generation, training, evaluation,
//! prediction and the end-to-end report.
//!
//! Every file lives in the configured output directory:
//!
//! | file | written by |
//! |---|---|
//! | `dataset.csv`, `normalized.csv`, `normalization.txt`, `stats.txt` | `gen-data` |
//! | `{mlp,rbf}_{normalized,real}.model`, `..._curve.csv` | `train-mlp`, `train-rbf` |
//! | `eval_<label>.txt`, `hist_<label>.csv`, `report.txt` | `eval` |
//!
//! Exit codes: 0 success, 1 goal not met, 2 configuration or usage error,
//! 3 numerical failure, 4 I/O or file-format error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, Space};
use crate::dataset::{self, Dataset, NormalizationMap};
use crate::error::{Error, Result};
use crate::evaluation::{self, LabeledResult, Surrogate};
use crate::kinematics::{self, Pose};
use crate::mlp::{self, Batch, MlpModel};
use crate::rbf::{self, RbfModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GOAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const DATASET_FILE: &str = "dataset.csv";
pub const NORMALIZED_FILE: &str = "normalized.csv";
pub const MAP_FILE: &str = "normalization.txt";
pub const STATS_FILE: &str = "stats.txt";
pub const REPORT_FILE: &str = "report.txt";

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Split(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        Error::Shape(_)
        | Error::Singular(_)
        | Error::Convergence { .. }
        | Error::Numerical(_)
        | Error::AlgebraMismatch { .. }
        | Error::Generation { .. }
        | Error::Normalization(_)
        | Error::TrainingStalled(_)
        | Error::NotTrained => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "tricept", version, about = "Tricept inverse kinematics and neural surrogates")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the sampling, split and initialization seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample poses, compute leg lengths, write raw and normalized datasets.
    GenData,
    /// Train the Levenberg-Marquardt perceptron.
    TrainMlp(TrainArgs),
    /// Grow the Gaussian RBF network.
    TrainRbf(TrainArgs),
    /// Evaluate models and write the comparison report.
    Eval(EvalArgs),
    /// Predict leg lengths for one pose.
    Predict(PredictArgs),
    /// Run gen-data, all four trainings and eval.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Normalized,
    Real,
}

impl From<SpaceArg> for Space {
    fn from(s: SpaceArg) -> Space {
        match s {
            SpaceArg::Normalized => Space::Normalized,
            SpaceArg::Real => Space::Real,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "normalized")]
    pub space: SpaceArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model files; defaults to the four trained models in the output
    /// directory.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PredictArgs {
    /// Model file written by train-mlp or train-rbf.
    #[arg(long)]
    pub model: PathBuf,
    /// Also print the exact leg lengths and the per-leg deviation.
    #[arg(long)]
    pub analytic: bool,
    /// Tilt about y, radians.
    pub theta: f64,
    /// Tilt about x, radians.
    pub psi: f64,
    /// Platform height, mm.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Rbf,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Rbf => "rbf",
        }
    }
}

pub fn model_file(kind: ModelKind, space: Space) -> String {
    format!("{}_{}.model", kind.name(), space.name())
}

pub fn curve_file(kind: ModelKind, space: Space) -> String {
    format!("{}_{}_curve.csv", kind.name(), space.name())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(MlpModel),
    Rbf(RbfModel),
}

/// A trained network plus, for normalized-space models, the map that takes
/// real inputs into its space and its outputs back to millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub network: Network,
    pub map: Option<NormalizationMap>,
}

impl ModelBundle {
    pub fn surrogate(&self) -> Surrogate<'_> {
        match &self.network {
            Network::Mlp(m) => Surrogate::Mlp(m),
            Network::Rbf(m) => Surrogate::Rbf(m),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.network {
            Network::Mlp(_) => ModelKind::Mlp,
            Network::Rbf(_) => ModelKind::Rbf,
        }
    }

    pub fn space(&self) -> Space {
        if self.map.is_some() {
            Space::Normalized
        } else {
            Space::Real
        }
    }

    /// Leg lengths in millimetres for a pose given in real units.
    pub fn predict_real(&self, pose: &Pose) -> Result<[f64; 3]> {
        let x = pose.to_array();
        match &self.map {
            Some(map) => {
                let y = self.surrogate().predict(&map.normalize_input(&x))?;
                Ok(map.denormalize_target(&y))
            }
            None => self.surrogate().predict(&x),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = match &self.network {
            Network::Mlp(m) => m.to_text(),
            Network::Rbf(m) => m.to_text(),
        };
        if let Some(map) = &self.map {
            s.push_str(&map.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        let network = match lines.peek() {
            Some((_, l)) if l.starts_with("tricept-mlp") => Network::Mlp(MlpModel::from_lines(&mut lines)?),
            Some((_, l)) if l.starts_with("tricept-rbf") => Network::Rbf(RbfModel::from_lines(&mut lines)?),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "not a model file".into(),
                })
            }
        };
        let mut rest = lines.filter(|(_, l)| !l.trim().is_empty()).peekable();
        let map = match rest.peek() {
            None => None,
            Some(_) => Some(NormalizationMap::from_lines(&mut rest).map_err(|e| match e {
                Error::Shape(message) => Error::Parse { line: 0, message },
                other => other,
            })?),
        };
        Ok(ModelBundle { network, map })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelBundle::from_text(&text).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the raw and normalized datasets, the map and the column stats.
pub fn gen_data(cfg: &RunConfig) -> Result<Dataset> {
    let geom = cfg.geometry()?;
    let domain = cfg.domain()?;
    let scheme = cfg.scheme()?;
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let ds = dataset::generate(&geom, &domain, scheme, cfg.sampling.n, cfg.sampling.seed)?;
    let (norm, map) = dataset::normalize(&ds)?;
    dataset::save_csv(&ds, dir.join(DATASET_FILE))?;
    dataset::save_csv(&norm, dir.join(NORMALIZED_FILE))?;
    write(&dir.join(MAP_FILE), &map.to_text())?;
    write(&dir.join(STATS_FILE), &dataset::format_stats(&dataset::stats(&ds)?))?;
    Ok(ds)
}

/// The corpus in the requested space, with the map for normalized data.
pub fn load_corpus(cfg: &RunConfig, space: Space) -> Result<(Dataset, Option<NormalizationMap>)> {
    let dir = &cfg.output.dir;
    match space {
        Space::Real => Ok((dataset::load_csv(dir.join(DATASET_FILE))?, None)),
        Space::Normalized => {
            let ds = dataset::load_csv(dir.join(NORMALIZED_FILE))?;
            let path = dir.join(MAP_FILE);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok((ds, Some(NormalizationMap::from_text(&text)?)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub bundle: ModelBundle,
    pub final_mse: f64,
    pub steps: usize,
    /// Why the trainer stopped, for display.
    pub stop: String,
    pub seconds: f64,
}

/// Trains one model on the training split and writes it with its curve.
pub fn train(cfg: &RunConfig, kind: ModelKind, space: Space) -> Result<TrainSummary> {
    let (ds, map) = load_corpus(cfg, space)?;
    let parts = dataset::split(ds.len(), cfg.split_ratios(), cfg.split.seed)?;
    let train = ds.subset(&parts.train);
    let dir = &cfg.output.dir;
    let start = Instant::now();
    let (network, final_mse, steps, stop) = match kind {
        ModelKind::Mlp => {
            let val = ds.subset(&parts.validation);
            let model = MlpModel::init(&cfg.layer_sizes(), cfg.activation()?, cfg.mlp.seed)?;
            let train_batch = Batch::new(train.inputs(), train.targets())?;
            let val_batch = Batch::new(val.inputs(), val.targets())?;
            let val_ref = (!val.is_empty()).then_some(&val_batch);
            let out = mlp::train_lm(&model, &train_batch, val_ref, &cfg.lm_options())?;
            evaluation::export_training_curve(&out.history, dir.join(curve_file(kind, space)))?;
            let mse = mlp::batch_mse(&out.model, &train_batch)?;
            let stop = format!("{:?}", out.stop);
            (Network::Mlp(out.model), mse, out.history.len(), stop)
        }
        ModelKind::Rbf => {
            let out = rbf::train_incremental(train.inputs(), train.targets(), &cfg.rbf_options(space))?;
            evaluation::export_training_curve(&out.history, dir.join(curve_file(kind, space)))?;
            let mse = out.history.last().map_or(f64::NAN, |r| r.mse_train);
            let stop = format!("{} neurons", out.model.num_neurons());
            (Network::Rbf(out.model), mse, out.history.len(), stop)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let bundle = ModelBundle { network, map };
    bundle.save(&dir.join(model_file(kind, space)))?;
    Ok(TrainSummary {
        bundle,
        final_mse,
        steps,
        stop,
        seconds,
    })
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

/// Evaluates each model on the full corpus of its own space and writes the
/// per-model metrics, histograms and the comparison report. Returns whether
/// every model met the goal.
pub fn eval(cfg: &RunConfig, models: &[PathBuf]) -> Result<(Vec<LabeledResult>, bool)> {
    let dir = &cfg.output.dir;
    let paths: Vec<PathBuf> = if models.is_empty() {
        [ModelKind::Mlp, ModelKind::Rbf]
            .iter()
            .flat_map(|&k| [Space::Normalized, Space::Real].map(|s| dir.join(model_file(k, s))))
            .collect()
    } else {
        models.to_vec()
    };
    let bundles = paths
        .iter()
        .map(|p| ModelBundle::load(p).map(|b| (label_of(p), b)))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(dir)?;
    let mut results = Vec::new();
    for (label, bundle) in bundles {
        let (ds, map) = load_corpus(cfg, bundle.space())?;
        let result = evaluation::evaluate(bundle.surrogate(), &ds, None)?;
        let mut text = result.to_text();
        text.insert_str(0, &format!("model = {}\nspace = {}\n", bundle.kind().name(), bundle.space().name()));
        text.push_str(&format!(
            "fraction_below_1e-4 = {:.6}\n",
            evaluation::fraction_below(&result.errors, 1e-4)
        ));
        if let Some(map) = map.as_ref() {
            let real = evaluation::evaluate(bundle.surrogate(), &ds, Some(map))?;
            text.push_str(&format!(
                "real_mse = {:.6e}\nreal_max_abs_error = {:.6e}\n",
                real.mse, real.max_abs_error
            ));
        }
        write(&dir.join(format!("eval_{label}.txt")), &text)?;
        let hist = evaluation::histogram(&result.errors, cfg.report.histogram_bins)?;
        write(&dir.join(format!("hist_{label}.csv")), &hist.to_csv())?;
        results.push(LabeledResult {
            model: bundle.kind().name().to_uppercase(),
            space: bundle.space().name().into(),
            result,
        });
    }
    let pass = evaluation::compare_report(&results, cfg.report.goal_mse, dir.join(REPORT_FILE))?;
    Ok((results, pass))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub surrogate: [f64; 3],
    pub analytic: Option<[f64; 3]>,
    pub in_domain: bool,
}

pub fn predict(cfg: &RunConfig, model: &Path, pose: Pose, analytic: bool) -> Result<Prediction> {
    pose.validate()?;
    let bundle = ModelBundle::load(model)?;
    let surrogate = bundle.predict_real(&pose)?;
    let analytic = if analytic {
        Some(kinematics::inverse_kinematics(&cfg.geometry()?, &pose)?.0)
    } else {
        None
    };
    Ok(Prediction {
        surrogate,
        analytic,
        in_domain: cfg.domain()?.contains(&pose),
    })
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn print_train(kind: ModelKind, space: Space, s: &TrainSummary) {
    let unit = match kind {
        ModelKind::Mlp => "epochs",
        ModelKind::Rbf => "records",
    };
    println!(
        "{} {}: final training mse {:.6e} after {} {unit}, stop: {} ({:.1} s)",
        kind.name(),
        space.name(),
        s.final_mse,
        s.steps,
        s.stop,
        s.seconds
    );
}

fn print_eval(results: &[LabeledResult], cfg: &RunConfig) -> Result<()> {
    let text = evaluation::compare_report_text(results, cfg.report.goal_mse)?;
    print!("{text}");
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenData => {
            let ds = gen_data(&cfg)?;
            println!("wrote {} samples to {}", ds.len(), cfg.output.dir.display());
            Ok(EXIT_OK)
        }
        Command::TrainMlp(args) => {
            let s = train(&cfg, ModelKind::Mlp, args.space.into())?;
            print_train(ModelKind::Mlp, args.space.into(), &s);
            Ok(EXIT_OK)
        }
        Command::TrainRbf(args) => {
            let s = train(&cfg, ModelKind::Rbf, args.space.into())?;
            print_train(ModelKind::Rbf, args.space.into(), &s);
            Ok(EXIT_OK)
        }
        Command::Eval(args) => {
            let (results, pass) = eval(&cfg, &args.models)?;
            print_eval(&results, &cfg)?;
            Ok(if pass { EXIT_OK } else { EXIT_GOAL })
        }
        Command::Predict(args) => {
            let pose = Pose {
                theta: args.theta,
                psi: args.psi,
                c: args.c,
            };
            let p = predict(&cfg, &args.model, pose, args.analytic)?;
            if !p.in_domain {
                eprintln!("warning: pose is outside the configured training domain");
            }
            let [q1, q2, q3] = p.surrogate;
            println!("q1 {q1:.10} q2 {q2:.10} q3 {q3:.10}");
            if let Some(a) = p.analytic {
                println!("analytic q1 {:.10} q2 {:.10} q3 {:.10}", a[0], a[1], a[2]);
                println!(
                    "deviation q1 {:.3e} q2 {:.3e} q3 {:.3e}",
                    q1 - a[0],
                    q2 - a[1],
                    q3 - a[2]
                );
            }
            Ok(EXIT_OK)
        }
        Command::Report => {
            let ds = gen_data(&cfg)?;
            println!("wrote {} samples to {}", ds.len(), cfg.output.dir.display());
            for kind in [ModelKind::Mlp, ModelKind::Rbf] {
                for space in [Space::Normalized, Space::Real] {
                    let s = train(&cfg, kind, space)?;
                    print_train(kind, space, &s);
                }
            }
            let (results, pass) = eval(&cfg, &[])?;
            print_eval(&results, &cfg)?;
            Ok(if pass { EXIT_OK } else { EXIT_GOAL })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
