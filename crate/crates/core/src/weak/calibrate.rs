//! Pair-threshold calibration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::MahalanobisModel;
use crate::modelsel::scoring::Confusion;
use crate::tuples::{validate_tuples, TupleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationMetric {
    Accuracy,
    F1,
}

impl CalibrationMetric {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMetric::Accuracy => "accuracy",
            CalibrationMetric::F1 => "f1",
        }
    }

    fn score(self, c: &Confusion) -> f64 {
        match self {
            CalibrationMetric::Accuracy => c.accuracy(),
            CalibrationMetric::F1 => c.f1(),
        }
    }
}

impl fmt::Display for CalibrationMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibrationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(CalibrationMetric::Accuracy),
            "f1" => Ok(CalibrationMetric::F1),
            _ => Err(Error::Validation(format!("calibration metric must be accuracy or f1, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub achieved_score: f64,
    pub metric_name: CalibrationMetric,
}

/// Best threshold for the rule `distance <= t -> +1` over the candidate grid.
///
/// Candidates are `min - 1`, the midpoints of consecutive distinct sorted
/// distances, and `max + 1`. Ties go to the smallest threshold.
pub fn calibrate_distances(distances: &[f64], labels: &[i8], metric: CalibrationMetric) -> Result<CalibrationResult> {
    if distances.is_empty() {
        return Err(Error::Validation("calibration needs at least one pair".into()));
    }
    if distances.len() != labels.len() {
        return Err(Error::dim("calibration labels", distances.len(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::BadLabel(format!("pair label must be +1 or -1, got {bad}")));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("calibration distances".into()));
    }
    if metric == CalibrationMetric::F1 && !labels.contains(&1) {
        return Err(Error::UndefinedMetric {
            metric: "f1".into(),
            reason: "no positive (+1) pairs".into(),
        });
    }

    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| distances[i]).collect();
    // positives among the first k sorted pairs
    let mut pos_prefix = vec![0usize; sorted.len() + 1];
    for (k, &i) in order.iter().enumerate() {
        pos_prefix[k + 1] = pos_prefix[k] + usize::from(labels[i] == 1);
    }
    let total_pos = pos_prefix[sorted.len()];
    let n = sorted.len();

    let mut candidates = vec![sorted[0] - 1.0];
    for w in sorted.windows(2) {
        if w[1] > w[0] {
            candidates.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    }
    candidates.push(sorted[n - 1] + 1.0);

    let mut best: Option<(f64, f64)> = None;
    for t in candidates {
        let k = sorted.partition_point(|&d| d <= t);
        let tp = pos_prefix[k];
        let c = Confusion {
            tp,
            fp: k - tp,
            fn_: total_pos - tp,
            tn: (n - k) - (total_pos - tp),
        };
        let s = metric.score(&c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((t, s));
        }
    }
    let (threshold, achieved_score) = best.expect("candidate list is never empty");
    Ok(CalibrationResult {
        threshold,
        achieved_score,
        metric_name: metric,
    })
}

/// Calibrates on labeled pairs; the model is not modified.
pub fn calibrate_threshold(
    model: &MahalanobisModel,
    pairs: &TupleSet,
    metric: CalibrationMetric,
) -> Result<CalibrationResult> {
    validate_tuples(pairs, 2, model.n_features())?;
    let labels = pairs
        .labels()
        .ok_or_else(|| Error::BadLabel("calibration needs +1/-1 pair labels".into()))?;
    calibrate_distances(&model.score_pairs(pairs)?, labels, metric)
}
