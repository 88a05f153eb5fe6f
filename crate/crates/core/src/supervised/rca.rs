//! Relative Components Analysis: whitening of the pooled within-chunklet covariance.

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, Matrix};
use crate::model::{FitReport, MahalanobisModel};
use crate::tuples::ChunkletAssignment;

use super::SupervisedConfig;

/// Pooled within-chunklet covariance `(1/p) sum (x - mu_c)(x - mu_c)^T`.
pub fn chunklet_covariance(x: &Matrix, chunks: &ChunkletAssignment) -> Result<Matrix> {
    if chunks.len() != x.rows() {
        return Err(Error::dim("chunklet assignment", x.rows(), chunks.len()));
    }
    let groups = chunks.chunklets();
    if groups.is_empty() {
        return Err(Error::NoConstraints);
    }
    let d = x.cols();
    let mut cov = Matrix::zeros(d, d);
    let mut total = 0usize;
    for members in &groups {
        let mut mean = vec![0.0; d];
        for &i in members {
            mean.iter_mut().zip(x.row(i)).for_each(|(m, v)| *m += v);
        }
        let len = members.len() as f64;
        mean.iter_mut().for_each(|m| *m /= len);
        for &i in members {
            let c: Vec<f64> = x.row(i).iter().zip(&mean).map(|(v, m)| v - m).collect();
            for p in 0..d {
                for q in 0..d {
                    cov[(p, q)] += c[p] * c[q];
                }
            }
        }
        total += members.len();
    }
    Ok(cov.scale(1.0 / total as f64).symmetrized())
}

pub fn fit_rca(x: &Matrix, chunks: &ChunkletAssignment, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    let m = cfg.validate(x.cols())?;
    if m < x.cols() {
        return Err(Error::UnsupportedReduction {
            n_components: m,
            n_features: x.cols(),
        });
    }
    let cov = chunklet_covariance(x, chunks)?;
    let l = psd_sqrt(&cov.add_identity(cfg.rca_reg), true)?;
    MahalanobisModel::fitted(l, "rca", FitReport::closed_form(cov.trace()))
}
