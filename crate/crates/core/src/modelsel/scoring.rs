//! Scorers over `+1/-1` ground truth.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    F1,
    RocAuc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::RocAuc => "roc_auc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "f1" => Ok(Metric::F1),
            "roc_auc" => Ok(Metric::RocAuc),
            _ => Err(Error::Validation(format!(
                "metric must be accuracy, f1 or roc_auc, got {s:?}"
            ))),
        }
    }
}

/// Binary confusion counts with `+1` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(y_true: &[i8], y_pred: &[i8]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2 P R / (P + R)`, computed as `2 tp / (2 tp + fp + fn)`; 0 when `tp = 0`.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        (2 * self.tp) as f64 / (2 * self.tp + self.fp + self.fn_) as f64
    }
}

fn check_truth(y_true: &[i8]) -> Result<()> {
    match y_true.iter().find(|&&v| v != 1 && v != -1) {
        Some(v) => Err(Error::BadLabel(format!("ground truth must be +1 or -1, got {v}"))),
        None => Ok(()),
    }
}

/// Scores `y_out` (hard `+1/-1` labels, or decision values for `roc_auc`).
pub fn score(metric: Metric, y_true: &[i8], y_out: &[f64]) -> Result<f64> {
    if y_true.len() != y_out.len() {
        return Err(Error::dim("scored outputs", y_true.len(), y_out.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Validation("cannot score an empty set".into()));
    }
    check_truth(y_true)?;
    match metric {
        Metric::RocAuc => roc_auc(y_true, y_out),
        Metric::Accuracy | Metric::F1 => {
            let pred = y_out
                .iter()
                .map(|&v| match v {
                    1.0 => Ok(1),
                    -1.0 => Ok(-1),
                    v => Err(Error::Validation(format!("{metric} needs +1/-1 predictions, got {v}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            let c = Confusion::from_predictions(y_true, &pred);
            Ok(if metric == Metric::Accuracy { c.accuracy() } else { c.f1() })
        }
    }
}

/// Area under the ROC curve from midranks: `(concordant + tied / 2) / (n+ n-)`.
pub fn roc_auc(y_true: &[i8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::dim("roc_auc scores", y_true.len(), scores.len()));
    }
    check_truth(y_true)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("roc_auc scores".into()));
    }
    let n_pos = y_true.iter().filter(|&&v| v == 1).count() as u64;
    let n_neg = y_true.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric {
            metric: "roc_auc".into(),
            reason: "needs both classes".into(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives, with 1-based midranks for ties
    let mut doubled = 0u64;
    let mut s = 0;
    while s < order.len() {
        let mut e = s;
        while e + 1 < order.len() && scores[order[e + 1]] == scores[order[s]] {
            e += 1;
        }
        let g = (e - s + 1) as u64;
        let pos = order[s..=e].iter().filter(|&&i| y_true[i] == 1).count() as u64;
        doubled += pos * (2 * s as u64 + g + 1);
        s = e + 1;
    }
    let twice_u = doubled - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn concordance(y: &[i8], s: &[f64]) -> f64 {
        let (mut num, mut den) = (0u64, 0u64);
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == -1 {
                    den += 2;
                    num += if s[i] > s[j] { 2 } else if s[i] == s[j] { 1 } else { 0 };
                }
            }
        }
        num as f64 / den as f64
    }

    #[test]
    fn worked_examples() {
        let y = [1, -1, 1, -1];
        let p = [1.0, -1.0, -1.0, -1.0];
        assert_eq!(score(Metric::Accuracy, &y, &p).unwrap(), 0.75);
        assert_eq!(score(Metric::F1, &y, &p).unwrap(), 2.0 / 3.0);
        let auc = score(Metric::RocAuc, &[-1, -1, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert_eq!(auc, 0.75);
        for m in [Metric::Accuracy, Metric::F1, Metric::RocAuc] {
            assert_eq!(score(m, &y, &[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        }
        assert_eq!(score(Metric::F1, &[1, -1], &[-1.0, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(roc_auc(&[1, 1], &[0.0, 1.0]), Err(Error::UndefinedMetric { .. })));
        assert!(score(Metric::Accuracy, &[1], &[0.5]).is_err());
        assert!(score(Metric::Accuracy, &[2], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_concordance(raw in prop::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let mut y: Vec<i8> = raw.iter().map(|r| if r.1 { 1 } else { -1 }).collect();
            y[0] = 1;
            y[1] = -1;
            let s: Vec<f64> = raw.iter().map(|r| r.0 as f64 * 0.25).collect();
            prop_assert_eq!(roc_auc(&y, &s).unwrap(), concordance(&y, &s));
            let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
            let affine: Vec<f64> = s.iter().map(|v| 3.0 * v - 7.0).collect();
            prop_assert_eq!(roc_auc(&y, &cubed).unwrap(), roc_auc(&y, &s).unwrap());
            prop_assert_eq!(roc_auc(&y, &affine).unwrap(), roc_auc(&y, &s).unwrap());
        }
    }
}
