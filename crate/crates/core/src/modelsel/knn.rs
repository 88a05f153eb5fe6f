use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, FeatureMatrix};
use crate::model::MahalanobisModel;
use crate::par::par_map;

/// Majority vote among the `k` nearest training points under the model's metric.
///
/// Distance ties go to the lower training index, vote ties to the smallest label.
pub fn knn_predict(
    train_x: &FeatureMatrix,
    train_y: &[i64],
    test_x: &FeatureMatrix,
    k: usize,
    model: &MahalanobisModel,
) -> Result<Vec<i64>> {
    if train_x.rows() == 0 {
        return Err(Error::Validation("k-NN needs a non-empty training set".into()));
    }
    if train_y.len() != train_x.rows() {
        return Err(Error::dim("k-NN training labels", train_x.rows(), train_y.len()));
    }
    if k == 0 || k > train_x.rows() {
        return Err(Error::Validation(format!(
            "knn_k must be in 1..={}, got {k}",
            train_x.rows()
        )));
    }
    let zt = model.transform(train_x)?;
    let zq = model.transform(test_x)?;
    let rows: Vec<usize> = (0..zq.rows()).collect();
    Ok(par_map(&rows, |&q| {
        let query = zq.row(q);
        let mut cand: Vec<(f64, usize)> = (0..zt.rows()).map(|i| (sq_dist(query, zt.row(i)), i)).collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
        for &(_, i) in &cand[..k] {
            *votes.entry(train_y[i]).or_default() += 1;
        }
        let mut best = (0, i64::MIN);
        for (&label, &count) in &votes {
            if count > best.0 {
                best = (count, label);
            }
        }
        best.1
    }))
}
