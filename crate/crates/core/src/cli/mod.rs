//! The `mlearn` command line: `mlearn <fit|transform|score-pairs|predict|calibrate|cv> [flags]`.
//!
//! Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.

pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::model::MahalanobisModel;
use crate::modelsel::{cross_validate, format_params, grid_search, CvResult, GridSpec, Learner, Metric, Task};
use crate::supervised::{fit_rca, fit_supervised, SupervisedAlgorithm, SupervisedConfig};
use crate::tuples::{ChunkletAssignment, TupleSet};
use crate::weak::calibrate::CalibrationMetric;
use crate::weak::{calibrate_threshold, fit_weak, WeakAlgorithm, WeakConfig};

pub use io::{load_features, load_tuples, Features};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Fit,
    Transform,
    ScorePairs,
    Predict,
    Calibrate,
    Cv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Nca,
    Lmnn,
    Mlkr,
    Lfda,
    Rca,
    Mmc,
    Itml,
    Lsml,
}

enum AlgoKind {
    Supervised(SupervisedAlgorithm),
    Weak(WeakAlgorithm),
}

impl Algo {
    fn kind(self) -> AlgoKind {
        match self {
            Algo::Nca => AlgoKind::Supervised(SupervisedAlgorithm::Nca),
            Algo::Lmnn => AlgoKind::Supervised(SupervisedAlgorithm::Lmnn),
            Algo::Mlkr => AlgoKind::Supervised(SupervisedAlgorithm::Mlkr),
            Algo::Lfda => AlgoKind::Supervised(SupervisedAlgorithm::Lfda),
            Algo::Rca => AlgoKind::Supervised(SupervisedAlgorithm::Rca),
            Algo::Mmc => AlgoKind::Weak(WeakAlgorithm::Mmc),
            Algo::Itml => AlgoKind::Weak(WeakAlgorithm::Itml),
            Algo::Lsml => AlgoKind::Weak(WeakAlgorithm::Lsml),
        }
    }
}

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(name = "mlearn", version, about = "Mahalanobis metric learning on CSV data")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Feature CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Integer chunklet column for RCA (-1 = unassigned).
    #[arg(long)]
    pub chunk_col: Option<String>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    #[arg(long)]
    pub quadruplets: Option<PathBuf>,
    #[arg(long)]
    pub n_components: Option<usize>,
    /// Algorithm option, `key=value`; repeatable.
    #[arg(long = "opt", value_name = "KEY=VALUE")]
    pub opts: Vec<String>,
    /// Calibrate the pair threshold at fit time (accuracy or f1).
    #[arg(long)]
    pub calibrate: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// Grid search over a JSON object of value lists.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    match run(&cfg, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {msg}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, command: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("{command} requires --{flag}")))
}

fn parse_opt(raw: &str) -> Result<(&str, &str)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Validation(format!("--opt expects key=value, got {raw:?}")))
}

fn supervised_config(alg: SupervisedAlgorithm, cfg: &RunConfig) -> Result<SupervisedConfig> {
    let mut c = SupervisedConfig::new(alg);
    c.seed = cfg.seed;
    if let Some(v) = cfg.n_components {
        c.n_components = Some(v);
    }
    if let Some(v) = cfg.max_iter {
        c.max_iter = v;
    }
    if let Some(v) = cfg.tol {
        c.tol = v;
    }
    for raw in &cfg.opts {
        let (k, v) = parse_opt(raw)?;
        c.set_option(k, v)?;
    }
    Ok(c)
}

fn weak_config(alg: WeakAlgorithm, cfg: &RunConfig) -> Result<WeakConfig> {
    if cfg.n_components.is_some() {
        return Err(Error::Validation(format!("{alg} does not take --n-components")));
    }
    let mut c = WeakConfig::new(alg);
    c.seed = cfg.seed;
    if let Some(v) = cfg.max_iter {
        c.max_iter = v;
    }
    if let Some(v) = cfg.tol {
        c.tol = v;
    }
    for raw in &cfg.opts {
        let (k, v) = parse_opt(raw)?;
        c.set_option(k, v)?;
    }
    Ok(c)
}

fn read_model(path: &Path) -> Result<MahalanobisModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    MahalanobisModel::from_json(&text)
}

fn write_model(path: &Path, model: &MahalanobisModel) -> Result<()> {
    let mut text = model.to_json();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes to `--out` when given, otherwise to stdout.
fn emit(cfg: &RunConfig, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn features(cfg: &RunConfig, command: &str) -> Result<io::FeatureFile> {
    let data = required(&cfg.data, "data", command)?;
    io::read_feature_file(data, cfg.label_col.as_deref(), cfg.chunk_col.as_deref())
}

/// The single tuple file given, with its arity.
fn tuple_file(cfg: &RunConfig) -> Result<Option<(&Path, usize)>> {
    let given: Vec<(&Path, usize)> = [(&cfg.pairs, 2), (&cfg.triplets, 3), (&cfg.quadruplets, 4)]
        .into_iter()
        .filter_map(|(p, a)| p.as_deref().map(|p| (p, a)))
        .collect();
    match given.len() {
        0 => Ok(None),
        1 => Ok(Some(given[0])),
        _ => Err(Error::Validation(
            "give only one of --pairs, --triplets, --quadruplets".into(),
        )),
    }
}

fn weak_tuples(alg: WeakAlgorithm, cfg: &RunConfig, base: &crate::linalg::Matrix) -> Result<TupleSet> {
    let (path, arity) = tuple_file(cfg)?.ok_or_else(|| {
        Error::Validation(format!(
            "{alg} needs --{}",
            if alg.arity() == 2 { "pairs" } else { "quadruplets" }
        ))
    })?;
    if arity != alg.arity() {
        return Err(Error::Validation(format!(
            "{alg} learns from {}-tuples, got a {arity}-tuple file",
            alg.arity()
        )));
    }
    load_tuples(path, base, arity)
}

fn warn_convergence(stderr: &mut dyn Write, model: &MahalanobisModel) {
    let r = model.fit_report();
    if !r.converged {
        let _ = writeln!(
            stderr,
            "warning: {} did not converge after {} iterations",
            model.algorithm(),
            r.n_iter
        );
    }
}

pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cfg.command {
        Command::Fit => run_fit(cfg, stdout, stderr),
        Command::Transform => run_transform(cfg, stdout),
        Command::ScorePairs => run_score_pairs(cfg, stdout),
        Command::Predict => run_predict(cfg, stdout),
        Command::Calibrate => run_calibrate(cfg, stdout),
        Command::Cv => run_cv(cfg, stdout),
    }
}

fn run_fit(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let algo = *required(&cfg.algo, "algo", "fit")?;
    let out = required(&cfg.out, "out", "fit")?;
    let file = features(cfg, "fit")?;
    let model = match algo.kind() {
        AlgoKind::Supervised(alg) => {
            if cfg.calibrate.is_some() {
                return Err(Error::Validation("--calibrate applies to pair learners only".into()));
            }
            let c = supervised_config(alg, cfg)?;
            if alg == SupervisedAlgorithm::Rca && file.targets.is_none() {
                let chunks: ChunkletAssignment = file
                    .chunks
                    .clone()
                    .ok_or_else(|| Error::Validation("rca needs --chunk-col or --label-col".into()))?;
                fit_rca(&file.x, &chunks, &c)?
            } else {
                let y = file
                    .targets
                    .clone()
                    .ok_or_else(|| Error::Validation(format!("{alg} needs --label-col")))?;
                fit_supervised(&crate::tuples::LabeledDataset::new(file.x.clone(), y)?, &c)?
            }
        }
        AlgoKind::Weak(alg) => {
            let c = weak_config(alg, cfg)?;
            let tuples = weak_tuples(alg, cfg, &file.x)?;
            let model = fit_weak(&tuples, &c)?;
            match &cfg.calibrate {
                None => model,
                Some(metric) => {
                    if alg.arity() != 2 {
                        return Err(Error::Validation("--calibrate applies to pair learners only".into()));
                    }
                    let metric: CalibrationMetric = metric.parse()?;
                    let cal = calibrate_threshold(&model, &tuples, metric)?;
                    writeln!(stdout, "threshold {:?} {} {:?}", cal.threshold, metric, cal.achieved_score)?;
                    model.with_threshold(Some(cal.threshold))?
                }
            }
        }
    };
    warn_convergence(stderr, &model);
    write_model(out, &model)
}

fn run_transform(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let model = read_model(required(&cfg.model, "model", "transform")?)?;
    let file = features(cfg, "transform")?;
    let z = model.transform(&file.x)?;
    let mut buf = Vec::new();
    io::write_matrix(&mut buf, &z)?;
    emit(cfg, stdout, &String::from_utf8(buf).expect("ascii output"))
}

fn run_score_pairs(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let model = read_model(required(&cfg.model, "model", "score-pairs")?)?;
    let file = features(cfg, "score-pairs")?;
    let path = required(&cfg.pairs, "pairs", "score-pairs")?;
    let pairs = load_tuples(path, &file.x, 2)?;
    let mut text = String::new();
    for d in model.score_pairs(&pairs)? {
        writeln!(text, "{d:.16e}").expect("string write");
    }
    emit(cfg, stdout, &text)
}

fn run_predict(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let model = read_model(required(&cfg.model, "model", "predict")?)?;
    let file = features(cfg, "predict")?;
    let (path, arity) = tuple_file(cfg)?
        .ok_or_else(|| Error::Validation("predict requires --pairs, --triplets or --quadruplets".into()))?;
    let tuples = load_tuples(path, &file.x, arity)?;
    let labels = match arity {
        2 => model.predict_pairs(&tuples)?,
        3 => model.predict_triplets(&tuples)?,
        _ => model.predict_quadruplets(&tuples)?,
    };
    let mut text = String::new();
    for l in labels {
        writeln!(text, "{l}").expect("string write");
    }
    emit(cfg, stdout, &text)
}

fn run_calibrate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let model_path = required(&cfg.model, "model", "calibrate")?;
    let model = read_model(model_path)?;
    let file = features(cfg, "calibrate")?;
    let pairs = load_tuples(required(&cfg.pairs, "pairs", "calibrate")?, &file.x, 2)?;
    let metric: CalibrationMetric = cfg.metric.as_deref().unwrap_or("accuracy").parse()?;
    let cal = calibrate_threshold(&model, &pairs, metric)?;
    let updated = model.with_threshold(Some(cal.threshold))?;
    write_model(cfg.out.as_deref().unwrap_or(model_path), &updated)?;
    writeln!(stdout, "threshold {:?} {} {:?}", cal.threshold, metric, cal.achieved_score)?;
    Ok(())
}

fn run_cv(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let algo = *required(&cfg.algo, "algo", "cv")?;
    let metric: Metric = cfg.metric.as_deref().unwrap_or("accuracy").parse()?;
    let file = features(cfg, "cv")?;
    let task = match algo.kind() {
        AlgoKind::Supervised(alg) => {
            let y = file
                .targets
                .clone()
                .ok_or_else(|| Error::Validation("supervised cv needs --label-col".into()))?;
            let knn_k = *required(&cfg.knn_k, "knn-k", "supervised cv")?;
            Task::Supervised {
                dataset: crate::tuples::LabeledDataset::new(file.x.clone(), y)?,
                learner: Learner::Supervised(supervised_config(alg, cfg)?),
                knn_k,
            }
        }
        AlgoKind::Weak(alg) => {
            let learner = Learner::Weak(weak_config(alg, cfg)?);
            let tuples = weak_tuples(alg, cfg, &file.x)?;
            if alg.arity() == 2 {
                Task::Pairs { pairs: tuples, learner }
            } else {
                Task::Quadruplets { quads: tuples, learner }
            }
        }
    };
    let mut text = String::new();
    match &cfg.grid {
        None => {
            let res = cross_validate(&task, cfg.folds, cfg.seed, metric)?;
            write_cv_table(&mut text, &res, metric);
        }
        Some(path) => {
            let raw = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let grid = GridSpec::from_json(&raw)?;
            let res = grid_search(&task, &grid, cfg.folds, cfg.seed, metric)?;
            let folds = res.table[0].result.test_scores.len();
            let mut header = format!("{:<4} {:<32} {:>10} {:>10}", "cand", "params", "mean", "std");
            for f in 0..folds {
                write!(header, " {:>10}", format!("fold{f}")).expect("string write");
            }
            writeln!(text, "{header}").expect("string write");
            for (i, row) in res.table.iter().enumerate() {
                write!(
                    text,
                    "{:<4} {:<32} {:>10.6} {:>10.6}",
                    i,
                    format_params(&row.params),
                    row.result.mean,
                    row.result.std
                )
                .expect("string write");
                for s in &row.result.test_scores {
                    write!(text, " {s:>10.6}").expect("string write");
                }
                text.push('\n');
            }
            let best = res.best();
            writeln!(
                text,
                "best {} {} {} = {:.6} ± {:.6}",
                res.best,
                format_params(&best.params),
                metric,
                best.result.mean,
                best.result.std
            )
            .expect("string write");
        }
    }
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn write_cv_table(text: &mut String, res: &CvResult, metric: Metric) {
    writeln!(text, "{:<8} {:>10} {:>10}", "fold", format!("test_{metric}"), "train").expect("string write");
    for (f, (te, tr)) in res.test_scores.iter().zip(&res.train_scores).enumerate() {
        writeln!(text, "{f:<8} {te:>10.6} {tr:>10.6}").expect("string write");
    }
    writeln!(text, "mean±std {:.6} ± {:.6}", res.mean, res.std).expect("string write");
}
