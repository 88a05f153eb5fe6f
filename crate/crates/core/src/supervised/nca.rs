//! Neighborhood Components Analysis.
//!
//! Maximizes the expected number of correctly classified points under
//! stochastic nearest-neighbor assignment: `f(L) = sum_i sum_{j in C_i} p_ij`
//! where `p_ij` is a softmax over `j != i` of `-||L x_i - L x_j||^2`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::MahalanobisModel;
use crate::optim::descend;
use crate::tuples::LabeledDataset;

use super::{distance_gradient, pairwise_sq_dists, SupervisedConfig};

/// Objective and gradient with respect to `L`.
pub fn objective(x: &Matrix, labels: &[i64], l: &Matrix) -> (f64, Matrix) {
    let n = x.rows();
    let z = x.matmul_t(l).expect("L matches feature count");
    let d = pairwise_sq_dists(&z);
    let mut w = Matrix::zeros(n, n);
    let mut total = 0.0;
    let mut p = vec![0.0; n];
    for i in 0..n {
        // log-sum-exp over j != i of -d_ij
        let max = (0..n)
            .filter(|&j| j != i)
            .map(|j| -d[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + (0..n)
                .filter(|&j| j != i)
                .map(|j| (-d[(i, j)] - max).exp())
                .sum::<f64>()
                .ln();
        let mut p_same = 0.0;
        for j in 0..n {
            p[j] = if j == i { 0.0 } else { (-d[(i, j)] - lse).exp() };
            if j != i && labels[j] == labels[i] {
                p_same += p[j];
            }
        }
        total += p_same;
        for j in 0..n {
            if j == i {
                continue;
            }
            let same = if labels[j] == labels[i] { p[j] } else { 0.0 };
            // d f / d d_ij = p_ij (p_i - [y_j = y_i])
            w[(i, j)] = p_same * p[j] - same;
        }
    }
    (total, distance_gradient(x, l, &w))
}

pub fn fit_nca(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    cfg.validate(ds.n_features())?;
    ds.require_classes()?;
    if ds.n_samples() < 2 {
        return Err(Error::Validation("NCA needs at least 2 samples".into()));
    }
    let labels = ds.classes()?.to_vec();
    let init = cfg.initial_components(ds.n_features())?;
    let (l, report) = descend(
        init,
        cfg.schedule(),
        |l| {
            let (f, g) = objective(&ds.x, &labels, l);
            if !f.is_finite() || !g.is_finite() {
                return Err(Error::Numerical("NCA objective is not finite".into()));
            }
            Ok((f, g))
        },
        Ok,
    )?;
    MahalanobisModel::fitted(l, "nca", report)
}
