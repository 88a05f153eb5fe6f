//! Least Squared-residual Metric Learning on quadruplets.
//!
//! Minimizes `lambda * D_ld(M, M0) + sum_q [D(a, b) - D(c, d)]_+^2` where `D`
//! is the (non-squared) Mahalanobis distance.

use crate::error::{Error, Result};
use crate::linalg::{logdet_divergence, psd_floor, psd_sqrt, spd_inverse, spd_logdet, Matrix};
use crate::model::{FitReport, MahalanobisModel};
use crate::optim::{descend, Schedule, Sense};
use crate::tuples::{validate_tuples, TupleSet};

use super::WeakConfig;

const EIGEN_FLOOR: f64 = 1e-10;

pub struct LsmlObjective {
    near: Vec<Vec<f64>>,
    far: Vec<Vec<f64>>,
    prior: Matrix,
    prior_inv: Matrix,
    prior_logdet: f64,
    reg: f64,
}

impl LsmlObjective {
    pub fn new(quads: &TupleSet, cfg: &WeakConfig) -> Result<Self> {
        cfg.validate()?;
        validate_tuples(quads, 4, quads.n_features())?;
        if quads.is_empty() {
            return Err(Error::DegenerateConstraints("no quadruplets given".into()));
        }
        let prior = cfg.prior_matrix(quads)?;
        let prior_logdet = spd_logdet(&prior)?
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidPrior("log det of the prior is not finite".into()))?;
        let prior_inv = spd_inverse(&prior).map_err(|e| Error::InvalidPrior(e.to_string()))?;
        Ok(LsmlObjective {
            near: (0..quads.len()).map(|i| quads.diff(i, 0, 1)).collect(),
            far: (0..quads.len()).map(|i| quads.diff(i, 2, 3)).collect(),
            prior,
            prior_inv,
            prior_logdet,
            reg: cfg.lsml_reg,
        })
    }

    pub fn prior(&self) -> &Matrix {
        &self.prior
    }

    /// Quadruplets whose residual `D(a, b) - D(c, d)` is positive under `m`.
    pub fn active_set(&self, m: &Matrix) -> Vec<bool> {
        self.near
            .iter()
            .zip(&self.far)
            .map(|(a, b)| dist(m, a) - dist(m, b) > 0.0)
            .collect()
    }

    /// Objective and gradient; `None` when `m` is not positive definite.
    pub fn evaluate(&self, m: &Matrix) -> Result<Option<(f64, Matrix)>> {
        let active = self.active_set(m);
        self.evaluate_with(m, &active)
    }

    /// Objective and gradient with the hinge replaced by a fixed active set.
    pub fn evaluate_with(&self, m: &Matrix, active: &[bool]) -> Result<Option<(f64, Matrix)>> {
        let Some(div) = logdet_divergence(m, &self.prior_inv, self.prior_logdet)? else {
            return Ok(None);
        };
        let m_inv = spd_inverse(m)?;
        let mut grad = self.prior_inv.sub(&m_inv)?.scale(self.reg);
        let mut f = self.reg * div;
        let n = m.rows();
        for ((a, b), &on) in self.near.iter().zip(&self.far).zip(active) {
            if !on {
                continue;
            }
            let (da, db) = (dist(m, a), dist(m, b));
            let r = da - db;
            f += r * r;
            // d D / d M = delta delta^T / (2 D)
            for (v, dv, sign) in [(a, da, 1.0), (b, db, -1.0)] {
                if dv <= 0.0 {
                    continue;
                }
                let s = sign * 2.0 * r / (2.0 * dv);
                for p in 0..n {
                    for q in 0..n {
                        grad[(p, q)] += s * v[p] * v[q];
                    }
                }
            }
        }
        Ok(Some((f, grad)))
    }
}

fn dist(m: &Matrix, v: &[f64]) -> f64 {
    m.quad_form(v).max(0.0).sqrt()
}

pub fn fit_lsml(quads: &TupleSet, cfg: &WeakConfig) -> Result<MahalanobisModel> {
    let obj = LsmlObjective::new(quads, cfg)?;
    let m0 = obj.prior().clone();
    if obj.active_set(&m0).iter().all(|a| !a) {
        return MahalanobisModel::fitted(psd_sqrt(&m0, false)?, "lsml", FitReport::closed_form(0.0));
    }
    let schedule = Schedule {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        sense: Sense::Minimize,
    };
    let (m, report) = descend(
        m0,
        schedule,
        |m| {
            obj.evaluate(m)?
                .ok_or_else(|| Error::Numerical("LSML iterate is not positive definite".into()))
        },
        |m: Matrix| psd_floor(&m.symmetrized(), EIGEN_FLOOR),
    )?;
    MahalanobisModel::fitted(psd_sqrt(&m, false)?, "lsml", report)
}
