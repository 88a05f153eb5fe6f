//! Metric Learning for Kernel Regression.
//!
//! Minimizes the leave-one-out squared error of a Gaussian-kernel
//! (Nadaraya-Watson) regressor in the learned space.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{FitReport, MahalanobisModel};
use crate::optim::descend;
use crate::tuples::LabeledDataset;

use super::{distance_gradient, pairwise_sq_dists, SupervisedConfig};

const KERNEL_FLOOR: f64 = 1e-300;

/// Objective and gradient with respect to `L`.
pub fn objective(x: &Matrix, y: &[f64], l: &Matrix) -> (f64, Matrix) {
    let n = x.rows();
    let d = pairwise_sq_dists(&x.matmul_t(l).expect("L matches feature count"));
    let mut w = Matrix::zeros(n, n);
    let mut loss = 0.0;
    let mut k = vec![0.0; n];
    for i in 0..n {
        let mut denom = KERNEL_FLOOR;
        let mut num = 0.0;
        for j in 0..n {
            k[j] = if j == i { 0.0 } else { (-d[(i, j)]).exp() };
            denom += k[j];
            num += k[j] * y[j];
        }
        let yhat = num / denom;
        let r = yhat - y[i];
        loss += r * r;
        for j in 0..n {
            if j != i {
                // d yhat_i / d d_ij = -k_ij (y_j - yhat_i) / denom
                w[(i, j)] = -2.0 * r * k[j] * (y[j] - yhat) / denom;
            }
        }
    }
    (loss, distance_gradient(x, l, &w))
}

pub fn fit_mlkr(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    cfg.validate(ds.n_features())?;
    if ds.n_samples() < 3 {
        return Err(Error::Validation("MLKR needs at least 3 samples".into()));
    }
    let y = ds.y.as_reals();
    let init = cfg.initial_components(ds.n_features())?;
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("MLKR targets are constant; returning the initial transformation");
        let (f, _) = objective(&ds.x, &y, &init);
        return MahalanobisModel::fitted(init, "mlkr", FitReport::closed_form(f));
    }
    let (l, report) = descend(
        init,
        cfg.schedule(),
        |l| {
            let (f, g) = objective(&ds.x, &y, l);
            if !f.is_finite() || !g.is_finite() {
                return Err(Error::Numerical("MLKR objective is not finite".into()));
            }
            Ok((f, g))
        },
        Ok,
    )?;
    MahalanobisModel::fitted(l, "mlkr", report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::supervised::SupervisedAlgorithm;
    use crate::tuples::Targets;

    #[test]
    fn equal_targets_give_zero_loss() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [3.0, -2.0]]).unwrap();
        for l in [Matrix::identity(2), Matrix::from_diag(&[0.3, 2.0])] {
            let (f, g) = objective(&x, &[1.5, 1.5], &l);
            assert!(f.abs() < 1e-24);
            assert!(g.max_abs() < 1e-12);
        }
    }

    #[test]
    fn constant_targets_return_init() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let ds = LabeledDataset::new(x, Targets::Continuous(vec![2.0; 3])).unwrap();
        let model = fit_mlkr(&ds, &SupervisedConfig::new(SupervisedAlgorithm::Mlkr)).unwrap();
        assert_eq!(model.components(), &Matrix::identity(1));
        assert!(model.fit_report().converged);
    }

    #[test]
    fn learning_reduces_the_loss() {
        // y depends on feature 0 only; feature 1 is noise
        let mut rng = SplitMix64::new(4);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..30 {
            let a = rng.normal();
            rows.push(vec![a, 2.0 * rng.normal()]);
            y.push(2.0 * a);
        }
        let ds = LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), Targets::Continuous(y.clone())).unwrap();
        let (f0, _) = objective(&ds.x, &y, &Matrix::identity(2));
        let model = fit_mlkr(&ds, &SupervisedConfig::new(SupervisedAlgorithm::Mlkr)).unwrap();
        let f1 = model.fit_report().final_objective;
        assert!(f1 <= 0.75 * f0, "{f1} vs {f0}");
        let t = &model.fit_report().objective_trace;
        assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
