//! Large Margin Nearest Neighbors.
//!
//! Loss: `(1 - mu) sum_{i, j in N_i} d_ij + mu sum_{i, j in N_i, l: y_l != y_i}
//! [margin + d_ij - d_il]_+` with squared learned distances `d`. Target
//! neighbors `N_i` are the `k` nearest same-class points in the input space,
//! fixed once; the impostor set is re-derived on every evaluation.

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::model::MahalanobisModel;
use crate::optim::descend;
use crate::tuples::LabeledDataset;

use super::{distance_gradient, pairwise_sq_dists, SupervisedConfig};

/// An active hinge: target neighbor `j` of `i` with impostor `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Impostor {
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

pub struct LmnnObjective<'a> {
    x: &'a Matrix,
    labels: &'a [i64],
    targets: Vec<Vec<usize>>,
    push_weight: f64,
    margin: f64,
}

impl<'a> LmnnObjective<'a> {
    pub fn new(ds: &'a LabeledDataset, cfg: &SupervisedConfig) -> Result<Self> {
        let groups = ds.require_classes()?;
        let k = cfg.lmnn_k;
        if let Some((&class, members)) = groups.iter().find(|(_, m)| m.len() < k + 1) {
            return Err(Error::InfeasibleNeighbors {
                class,
                size: members.len(),
                k,
            });
        }
        let labels = ds.classes()?;
        Ok(LmnnObjective {
            x: &ds.x,
            labels,
            targets: target_neighbors(&ds.x, labels, k),
            push_weight: cfg.lmnn_push_weight,
            margin: cfg.lmnn_margin,
        })
    }

    pub fn target_neighbors(&self) -> &[Vec<usize>] {
        &self.targets
    }

    /// Hinges that are strictly positive under `l`.
    pub fn active_set(&self, l: &Matrix) -> Vec<Impostor> {
        let d = self.distances(l);
        let mut active = Vec::new();
        for (i, targets) in self.targets.iter().enumerate() {
            for &j in targets {
                for m in 0..self.x.rows() {
                    if self.labels[m] != self.labels[i] && self.margin + d[(i, j)] - d[(i, m)] > 0.0 {
                        active.push(Impostor { i, j, l: m });
                    }
                }
            }
        }
        active
    }

    fn distances(&self, l: &Matrix) -> Matrix {
        pairwise_sq_dists(&self.x.matmul_t(l).expect("L matches feature count"))
    }

    /// Objective and gradient with the impostor set recomputed at `l`.
    pub fn evaluate(&self, l: &Matrix) -> (f64, Matrix) {
        let active = self.active_set(l);
        self.evaluate_with(l, &active)
    }

    /// Objective and gradient with the hinge terms in `active` treated as
    /// linear (and every other hinge as zero).
    pub fn evaluate_with(&self, l: &Matrix, active: &[Impostor]) -> (f64, Matrix) {
        let n = self.x.rows();
        let d = self.distances(l);
        let pull = 1.0 - self.push_weight;
        let mut w = Matrix::zeros(n, n);
        let mut f = 0.0;
        for (i, targets) in self.targets.iter().enumerate() {
            for &j in targets {
                f += pull * d[(i, j)];
                w[(i, j)] += pull;
            }
        }
        for imp in active {
            f += self.push_weight * (self.margin + d[(imp.i, imp.j)] - d[(imp.i, imp.l)]);
            w[(imp.i, imp.j)] += self.push_weight;
            w[(imp.i, imp.l)] -= self.push_weight;
        }
        (f, distance_gradient(self.x, l, &w))
    }

    /// The hinge part of the loss alone.
    pub fn push_loss(&self, l: &Matrix) -> f64 {
        let d = self.distances(l);
        self.active_set(l)
            .iter()
            .map(|imp| self.push_weight * (self.margin + d[(imp.i, imp.j)] - d[(imp.i, imp.l)]))
            .sum()
    }
}

/// `k` nearest same-class neighbors of every sample (ties to the lower index).
fn target_neighbors(x: &Matrix, labels: &[i64], k: usize) -> Vec<Vec<usize>> {
    (0..x.rows())
        .map(|i| {
            let mut cands: Vec<(f64, usize)> = (0..x.rows())
                .filter(|&j| j != i && labels[j] == labels[i])
                .map(|j| (sq_dist(x.row(i), x.row(j)), j))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

pub fn fit_lmnn(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    cfg.validate(ds.n_features())?;
    let problem = LmnnObjective::new(ds, cfg)?;
    let init = cfg.initial_components(ds.n_features())?;
    let (l, report) = descend(
        init,
        cfg.schedule(),
        |l| {
            let (f, g) = problem.evaluate(l);
            if !f.is_finite() || !g.is_finite() {
                return Err(Error::Numerical("LMNN objective is not finite".into()));
            }
            Ok((f, g))
        },
        Ok,
    )?;
    MahalanobisModel::fitted(l, "lmnn", report)
}
