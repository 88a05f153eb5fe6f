//! Cross-validation, grid search and the metric-learner + k-NN pipeline.

pub mod knn;
pub mod scoring;
pub mod split;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MahalanobisModel;
use crate::par::par_map;
use crate::supervised::{fit_supervised, SupervisedConfig};
use crate::tuples::{LabeledDataset, TupleSet};
use crate::weak::calibrate::CalibrationMetric;
use crate::weak::{calibrate_threshold, fit_weak, WeakConfig};

pub use knn::knn_predict;
pub use scoring::{roc_auc, score, Confusion, Metric};
pub use split::{kfold_split, Fold};

/// What gets fitted on each training fold.
#[derive(Clone, Debug)]
pub enum Learner {
    Supervised(SupervisedConfig),
    Weak(WeakConfig),
    /// A fixed model returned as is, whatever the training data (a baseline).
    Fixed(MahalanobisModel),
}

impl Learner {
    pub fn name(&self) -> String {
        match self {
            Learner::Supervised(c) => c.algorithm.to_string(),
            Learner::Weak(c) => c.algorithm.to_string(),
            Learner::Fixed(m) => m.algorithm().to_string(),
        }
    }

    pub fn set_option(&mut self, key: &str, value: &str) -> Result<()> {
        match self {
            Learner::Supervised(c) => c.set_option(key, value),
            Learner::Weak(c) => c.set_option(key, value),
            Learner::Fixed(_) => Err(Error::Validation(format!(
                "a fixed model has no option {key:?}"
            ))),
        }
    }

    fn fit_labeled(&self, ds: &LabeledDataset) -> Result<MahalanobisModel> {
        match self {
            Learner::Supervised(c) => fit_supervised(ds, c),
            Learner::Fixed(m) => Ok(m.clone()),
            Learner::Weak(c) => Err(Error::Validation(format!(
                "{} learns from tuples, not class labels",
                c.algorithm
            ))),
        }
    }

    fn fit_tuples(&self, tuples: &TupleSet) -> Result<MahalanobisModel> {
        match self {
            Learner::Weak(c) => fit_weak(tuples, c),
            Learner::Fixed(m) => Ok(m.clone()),
            Learner::Supervised(c) => Err(Error::Validation(format!(
                "{} learns from class labels, not tuples",
                c.algorithm
            ))),
        }
    }
}

/// An evaluation task for [`cross_validate`] and [`grid_search`].
#[derive(Clone, Debug)]
pub enum Task {
    /// Metric learner followed by k-NN classification.
    Supervised {
        dataset: LabeledDataset,
        learner: Learner,
        knn_k: usize,
    },
    /// Labeled pairs; the threshold is calibrated on each training fold.
    Pairs { pairs: TupleSet, learner: Learner },
    /// Quadruplets, scored by the fraction ordered correctly.
    Quadruplets { quads: TupleSet, learner: Learner },
}

impl Task {
    fn n_items(&self) -> usize {
        match self {
            Task::Supervised { dataset, .. } => dataset.n_samples(),
            Task::Pairs { pairs, .. } => pairs.len(),
            Task::Quadruplets { quads, .. } => quads.len(),
        }
    }

    fn strata(&self) -> Result<Option<Vec<i64>>> {
        Ok(match self {
            Task::Supervised { dataset, .. } => Some(dataset.classes()?.to_vec()),
            Task::Pairs { pairs, .. } => pairs.labels().map(|l| l.iter().map(|&v| v as i64).collect()),
            Task::Quadruplets { .. } => None,
        })
    }

    /// Copy of the task with grid parameters applied. `knn_k` targets the
    /// k-NN stage; every other key goes to the learner.
    fn with_params(&self, params: &[(String, String)]) -> Result<Task> {
        let mut task = self.clone();
        for (key, value) in params {
            match &mut task {
                Task::Supervised { knn_k, .. } if key == "knn_k" => {
                    *knn_k = crate::supervised::parse(key, value)?;
                }
                Task::Supervised { learner, .. } | Task::Pairs { learner, .. } | Task::Quadruplets { learner, .. } => {
                    learner.set_option(key, value)?
                }
            }
        }
        Ok(task)
    }

    fn check_metric(&self, metric: Metric) -> Result<()> {
        match (self, metric) {
            (Task::Supervised { .. }, Metric::RocAuc) => Err(Error::Validation(
                "roc_auc needs decision values; the k-NN pipeline predicts labels".into(),
            )),
            (Task::Supervised { dataset, .. }, Metric::F1) => {
                if dataset.classes()?.iter().all(|&c| c == 1 || c == -1) {
                    Ok(())
                } else {
                    Err(Error::Validation("f1 needs class labels in {+1, -1}".into()))
                }
            }
            (Task::Quadruplets { .. }, m) if m != Metric::Accuracy => Err(Error::Validation(
                "quadruplet tasks are scored by ordering accuracy only".into(),
            )),
            (Task::Supervised { dataset, .. }, _) => dataset.classes().map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Test and train score of one fold.
    fn evaluate(&self, fold_index: usize, fold: &Fold, metric: Metric) -> Result<(f64, f64)> {
        let degenerate = |reason: String| Error::FoldDegenerate {
            fold: fold_index,
            reason,
        };
        match self {
            Task::Supervised { dataset, learner, knn_k } => {
                let train = dataset.subset(&fold.train);
                let test = dataset.subset(&fold.test);
                if train.class_members()?.len() < 2 {
                    return Err(degenerate("training portion has a single class".into()));
                }
                let model = learner.fit_labeled(&train)?;
                let ty = train.classes()?;
                let mut out = [0.0; 2];
                for (slot, part) in out.iter_mut().zip([&test, &train]) {
                    let pred = knn_predict(&train.x, ty, &part.x, *knn_k, &model)?;
                    *slot = label_score(metric, part.classes()?, &pred)?;
                }
                Ok((out[0], out[1]))
            }
            Task::Pairs { pairs, learner } => {
                let train = pairs.subset(&fold.train);
                let test = pairs.subset(&fold.test);
                let labels_of = |t: &TupleSet| {
                    t.labels()
                        .map(|l| l.to_vec())
                        .ok_or_else(|| Error::BadLabel("pair tasks need +1/-1 pair labels".into()))
                };
                let (train_y, test_y) = (labels_of(&train)?, labels_of(&test)?);
                let mut model = learner.fit_tuples(&train)?;
                let cal = match metric {
                    Metric::Accuracy => Some(CalibrationMetric::Accuracy),
                    Metric::F1 => Some(CalibrationMetric::F1),
                    Metric::RocAuc => None,
                };
                if let Some(cal) = cal {
                    if !(train_y.contains(&1) && train_y.contains(&-1)) {
                        return Err(degenerate("training pairs have a single label".into()));
                    }
                    let t = calibrate_threshold(&model, &train, cal)?.threshold;
                    model = model.with_threshold(Some(t))?;
                } else if !(test_y.contains(&1) && test_y.contains(&-1)) {
                    return Err(degenerate("test pairs have a single label; roc_auc is undefined".into()));
                }
                let mut out = [0.0; 2];
                for (slot, (part, y)) in out.iter_mut().zip([(&test, &test_y), (&train, &train_y)]) {
                    let values: Vec<f64> = if cal.is_some() {
                        model.predict_pairs(part)?.into_iter().map(f64::from).collect()
                    } else {
                        model.decision_function_pairs(part)?
                    };
                    *slot = match score(metric, y, &values) {
                        Err(Error::UndefinedMetric { reason, .. }) => return Err(degenerate(reason)),
                        other => other?,
                    };
                }
                Ok((out[0], out[1]))
            }
            Task::Quadruplets { quads, learner } => {
                let train = quads.subset(&fold.train);
                let test = quads.subset(&fold.test);
                let model = learner.fit_tuples(&train)?;
                let mut out = [0.0; 2];
                for (slot, part) in out.iter_mut().zip([&test, &train]) {
                    let pred = model.predict_quadruplets(part)?;
                    *slot = pred.iter().filter(|&&p| p == 1).count() as f64 / pred.len() as f64;
                }
                Ok((out[0], out[1]))
            }
        }
    }
}

fn label_score(metric: Metric, truth: &[i64], pred: &[i64]) -> Result<f64> {
    match metric {
        Metric::Accuracy => Ok(truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64),
        Metric::F1 => {
            let to_pm = |v: &[i64]| v.iter().map(|&x| if x == 1 { 1i8 } else { -1 }).collect::<Vec<_>>();
            Ok(Confusion::from_predictions(&to_pm(truth), &to_pm(pred)).f1())
        }
        Metric::RocAuc => unreachable!("rejected by check_metric"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub test_scores: Vec<f64>,
    pub train_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub folds: Vec<Fold>,
}

impl CvResult {
    fn new(scores: Vec<(f64, f64)>, folds: Vec<Fold>) -> Self {
        let (test_scores, train_scores): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
        let (mean, std) = mean_std(&test_scores);
        CvResult {
            test_scores,
            train_scores,
            mean,
            std,
            folds,
        }
    }

    pub fn train_mean(&self) -> f64 {
        mean_std(&self.train_scores).0
    }
}

/// Mean and population standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn folds_for(task: &Task, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let strata = task.strata()?;
    kfold_split(task.n_items(), k, seed, strata.as_deref())
}

pub fn cross_validate(task: &Task, k: usize, seed: u64, metric: Metric) -> Result<CvResult> {
    task.check_metric(metric)?;
    let folds = folds_for(task, k, seed)?;
    let idx: Vec<usize> = (0..folds.len()).collect();
    let scores = par_map(&idx, |&f| task.evaluate(f, &folds[f], metric))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::new(scores, folds))
}

/// Named hyperparameter lists; candidates are their Cartesian product with
/// the first field varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    params: Vec<(String, Vec<String>)>,
}

impl GridSpec {
    pub fn new(params: Vec<(String, Vec<String>)>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Validation("grid has no parameters".into()));
        }
        if let Some((name, _)) = params.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::Validation(format!("grid parameter {name:?} has no values")));
        }
        for (i, (name, _)) in params.iter().enumerate() {
            if params[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Validation(format!("grid parameter {name:?} appears twice")));
            }
        }
        Ok(GridSpec { params })
    }

    /// Parses a `{"field": [values...]}` object, keeping field order.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("grid file: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Format("grid file must be a JSON object of lists".into()))?;
        let mut params = Vec::new();
        for (name, list) in obj {
            let items = list
                .as_array()
                .ok_or_else(|| Error::Format(format!("grid parameter {name:?} must be a list")))?;
            let values = items
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => Ok(s.clone()),
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    serde_json::Value::Bool(b) => Ok(b.to_string()),
                    other => Err(Error::Format(format!("unsupported grid value {other} for {name:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            params.push((name.clone(), values));
        }
        GridSpec::new(params)
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn candidates(&self) -> Vec<Vec<(String, String)>> {
        let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for (name, values) in &self.params {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((name.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateResult {
    pub params: Vec<(String, String)>,
    pub result: CvResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridResult {
    pub table: Vec<CandidateResult>,
    /// Index into `table` of the highest mean test score (earliest on ties).
    pub best: usize,
}

impl GridResult {
    pub fn best(&self) -> &CandidateResult {
        &self.table[self.best]
    }
}

pub fn format_params(params: &[(String, String)]) -> String {
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Cross-validates every grid candidate on the same folds.
pub fn grid_search(task: &Task, grid: &GridSpec, k: usize, seed: u64, metric: Metric) -> Result<GridResult> {
    task.check_metric(metric)?;
    let candidates = grid.candidates();
    let tasks = candidates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            task.with_params(p).map_err(|e| Error::Candidate {
                index: i,
                params: format_params(p),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = folds_for(task, k, seed)?;
    let jobs: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let scores = par_map(&jobs, |&(c, f)| tasks[c].evaluate(f, &folds[f], metric));

    let mut table = Vec::with_capacity(tasks.len());
    let mut it = scores.into_iter();
    for (c, params) in candidates.into_iter().enumerate() {
        let per_fold = it
            .by_ref()
            .take(folds.len())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Candidate {
                index: c,
                params: format_params(&params),
                source: Box::new(e),
            })?;
        table.push(CandidateResult {
            params,
            result: CvResult::new(per_fold, folds.clone()),
        });
    }
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.result.mean > table[best].result.mean {
            best = i;
        }
    }
    Ok(GridResult { table, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::rng::SplitMix64;
    use crate::supervised::SupervisedAlgorithm;
    use crate::weak::calibrate::calibrate_distances;

    fn blobs(seed: u64, n: usize) -> LabeledDataset {
        let mut rng = SplitMix64::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = (i % 2) as i64;
            rows.push(vec![3.0 * c as f64 + 0.5 * rng.normal(), rng.normal()]);
            y.push(c);
        }
        LabeledDataset::classification(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    fn identity_learner(d: usize) -> Learner {
        Learner::Fixed(MahalanobisModel::from_components(Matrix::identity(d)).unwrap())
    }

    #[test]
    fn grid_candidates_in_product_order() {
        let g = GridSpec::from_json(r#"{"a": [1, 2], "b": ["x"]}"#).unwrap();
        assert_eq!(
            g.candidates(),
            vec![
                vec![("a".to_string(), "1".to_string()), ("b".to_string(), "x".to_string())],
                vec![("a".to_string(), "2".to_string()), ("b".to_string(), "x".to_string())],
            ]
        );
        assert!(GridSpec::from_json(r#"{"a": []}"#).is_err());
        assert!(GridSpec::from_json("[1]").is_err());
    }

    #[test]
    fn cv_shape_and_determinism() {
        let ds = blobs(1, 9);
        let task = Task::Supervised {
            dataset: ds,
            learner: identity_learner(2),
            knn_k: 1,
        };
        let a = cross_validate(&task, 3, 4, Metric::Accuracy).unwrap();
        assert_eq!(a.test_scores.len(), 3);
        assert_eq!(a.mean, a.test_scores.iter().sum::<f64>() / 3.0);
        assert_eq!(a, cross_validate(&task, 3, 4, Metric::Accuracy).unwrap());
    }

    #[test]
    fn pairs_fold_matches_sweep_oracle() {
        let mut rng = SplitMix64::new(2);
        let mut tuples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let sim = i % 2 == 0;
            let len = if sim { 0.5 + rng.next_f64() } else { 3.0 + rng.next_f64() };
            tuples.push(vec![vec![0.0, 0.0], vec![len, 0.0]]);
            labels.push(if sim { 1 } else { -1 });
        }
        let pairs = TupleSet::from_points(&tuples, Some(labels.clone())).unwrap();
        let task = Task::Pairs {
            pairs: pairs.clone(),
            learner: identity_learner(2),
        };
        let res = cross_validate(&task, 3, 0, Metric::Accuracy).unwrap();
        for (f, fold) in res.folds.iter().enumerate() {
            let dist = |idx: &[usize]| idx.iter().map(|&i| pairs.diff(i, 0, 1)[0].abs()).collect::<Vec<_>>();
            let lab = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
            let t = calibrate_distances(&dist(&fold.train), &lab(&fold.train), CalibrationMetric::Accuracy)
                .unwrap()
                .threshold;
            let correct = fold
                .test
                .iter()
                .filter(|&&i| (pairs.diff(i, 0, 1)[0].abs() <= t) == (labels[i] == 1))
                .count();
            assert_eq!(res.test_scores[f], correct as f64 / fold.test.len() as f64);
        }
    }

    #[test]
    fn degenerate_fold_is_reported() {
        let pairs = TupleSet::from_points(
            &[
                vec![vec![0.0], vec![1.0]],
                vec![vec![0.0], vec![1.0]],
                vec![vec![0.0], vec![5.0]],
            ],
            Some(vec![1, 1, -1]),
        )
        .unwrap();
        let task = Task::Pairs {
            pairs,
            learner: identity_learner(1),
        };
        // the -1 stratum is smaller than k, so folds are unstratified and one
        // training portion must lack the -1 pair
        let err = cross_validate(&task, 3, 0, Metric::Accuracy).unwrap_err();
        assert!(matches!(err, Error::FoldDegenerate { .. }));
    }

    #[test]
    fn grid_best_is_table_max() {
        let task = Task::Supervised {
            dataset: blobs(3, 24),
            learner: Learner::Supervised(SupervisedConfig::new(SupervisedAlgorithm::Lmnn)),
            knn_k: 1,
        };
        let grid = GridSpec::from_json(r#"{"lmnn_k": [1, 2], "knn_k": [1, 2]}"#).unwrap();
        let res = grid_search(&task, &grid, 3, 7, Metric::Accuracy).unwrap();
        assert_eq!(res.table.len(), 4);
        let max = res.table.iter().map(|r| r.result.mean).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.best().result.mean, max);
        let first = res.table.iter().position(|r| r.result.mean == max).unwrap();
        assert_eq!(res.best, first);

        let bad = GridSpec::from_json(r#"{"nope": [1]}"#).unwrap();
        assert!(matches!(
            grid_search(&task, &bad, 3, 7, Metric::Accuracy),
            Err(Error::Candidate { index: 0, .. })
        ));
    }

    #[test]
    fn test_labels_do_not_leak() {
        let ds = blobs(5, 30);
        let cfg = SupervisedConfig::new(SupervisedAlgorithm::Nca);
        let folds = kfold_split(30, 3, 1, Some(ds.classes().unwrap())).unwrap();
        let fold = &folds[0];
        let mut flipped = ds.classes().unwrap().to_vec();
        for &i in &fold.test {
            flipped[i] = 1 - flipped[i];
        }
        let ds2 = LabeledDataset::classification(ds.x.clone(), flipped).unwrap();
        let a = fit_supervised(&ds.subset(&fold.train), &cfg).unwrap();
        let b = fit_supervised(&ds2.subset(&fold.train), &cfg).unwrap();
        assert_eq!(a.components(), b.components());
    }
}
