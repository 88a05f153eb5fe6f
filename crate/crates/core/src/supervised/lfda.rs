//! Local Fisher Discriminant Analysis.
//!
//! Fisher discriminant analysis with pairwise weights from a local-scaling
//! affinity, so that multimodal classes are not forced into one cluster.

use crate::error::{Error, Result};
use crate::linalg::{gen_sym_eig, sq_dist, weighted_scatter, Matrix, SymEigResult};
use crate::model::{FitReport, MahalanobisModel};
use crate::tuples::LabeledDataset;

use super::{LfdaEmbedding, SupervisedConfig};

/// Local between-class and within-class scatter matrices `(S_b, S_w)`.
pub fn local_scatters(ds: &LabeledDataset, knn: usize) -> Result<(Matrix, Matrix)> {
    let groups = ds.require_classes()?;
    if let Some((&class, _)) = groups.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::DegenerateClass { class });
    }
    let labels = ds.classes()?;
    let x = &ds.x;
    let n = x.rows();

    // local scale: distance to the knn-th nearest neighbor within the class
    let mut sigma = vec![0.0; n];
    for members in groups.values() {
        let kk = knn.min(members.len() - 1);
        for &i in members {
            let mut d: Vec<f64> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| sq_dist(x.row(i), x.row(j)).sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            sigma[i] = d[kk - 1];
        }
    }

    let nf = n as f64;
    let mut wb = Matrix::zeros(n, n);
    let mut ww = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                let nc = groups[&labels[i]].len() as f64;
                let d2 = sq_dist(x.row(i), x.row(j));
                let scale = sigma[i] * sigma[j];
                let a = if d2 == 0.0 {
                    1.0
                } else if scale > 0.0 {
                    (-d2 / scale).exp()
                } else {
                    0.0
                };
                ww[(i, j)] = a / nc;
                wb[(i, j)] = a * (1.0 / nf - 1.0 / nc);
            } else {
                wb[(i, j)] = 1.0 / nf;
            }
        }
    }
    // S = 1/2 sum_ij W_ij (x_i - x_j)(x_i - x_j)^T
    Ok((
        weighted_scatter(x, &wb).scale(0.5),
        weighted_scatter(x, &ww).scale(0.5),
    ))
}

/// `S_w + eps I` with `eps = 1e-9 tr(S_w) / d`.
pub fn regularized_within(sw: &Matrix) -> Matrix {
    let d = sw.rows() as f64;
    let tr = sw.trace();
    let eps = if tr > 0.0 { 1e-9 * tr / d } else { 1e-9 };
    sw.add_identity(eps)
}

/// Eigenpairs behind an LFDA fit, for inspection.
pub fn lfda_eigenpairs(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<SymEigResult> {
    let m = cfg.validate(ds.n_features())?;
    let (sb, sw) = local_scatters(ds, cfg.lfda_knn)?;
    gen_sym_eig(&sb, &regularized_within(&sw), m)
}

pub fn fit_lfda(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    let eig = lfda_eigenpairs(ds, cfg)?;
    let k = eig.eigenvalues.len();
    let d = ds.n_features();
    let mut l = Matrix::zeros(k, d);
    for r in 0..k {
        let scale = match cfg.lfda_embedding {
            LfdaEmbedding::Weighted => eig.eigenvalues[r].max(0.0).sqrt(),
            LfdaEmbedding::Plain => 1.0,
        };
        for c in 0..d {
            l[(r, c)] = scale * eig.eigenvectors[(c, r)];
        }
    }
    let objective = eig.eigenvalues.iter().sum();
    MahalanobisModel::fitted(l, "lfda", FitReport::closed_form(objective))
}
