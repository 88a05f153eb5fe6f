//! Information Theoretic Metric Learning.
//!
//! Cyclic Bregman projections under the LogDet divergence. Similar pairs get
//! the constraint `d_M^2 <= u`, dissimilar pairs `d_M^2 >= l`; slack variables
//! (the per-constraint targets `bhat`) are relaxed with weight `gamma`.

use crate::error::{Error, Result};
use crate::linalg::{logdet_divergence, psd_sqrt, spd_inverse, spd_logdet, Matrix};
use crate::model::{FitReport, MahalanobisModel};
use crate::tuples::{validate_tuples, TupleSet};

use super::WeakConfig;

/// Result of an ITML fit with the bounds it worked against.
#[derive(Clone, Debug)]
pub struct ItmlFit {
    pub model: MahalanobisModel,
    /// Similar-pair bound `u`.
    pub upper: f64,
    /// Dissimilar-pair bound `l`.
    pub lower: f64,
    /// Final slack-adjusted target per constraint, in input order.
    pub slack_bounds: Vec<f64>,
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn fit_itml(pairs: &TupleSet, cfg: &WeakConfig) -> Result<MahalanobisModel> {
    Ok(fit_itml_detailed(pairs, cfg, |_| {})?.model)
}

/// Full fit, calling `observe` with `M` after every rank-one update.
pub fn fit_itml_detailed(pairs: &TupleSet, cfg: &WeakConfig, mut observe: impl FnMut(&Matrix)) -> Result<ItmlFit> {
    cfg.validate()?;
    validate_tuples(pairs, 2, pairs.n_features())?;
    let labels = pairs
        .labels()
        .ok_or_else(|| Error::BadLabel("ITML needs +1/-1 pair labels".into()))?;
    if pairs.is_empty() {
        return Err(Error::DegenerateConstraints("no pairs given".into()));
    }
    let diffs: Vec<Vec<f64>> = (0..pairs.len()).map(|i| pairs.diff(i, 0, 1)).collect();
    let sq: Vec<f64> = diffs.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
    let upper = percentile(&sq, cfg.itml_percentiles.0);
    let lower = percentile(&sq, cfg.itml_percentiles.1);
    if upper >= lower {
        return Err(Error::InfeasibleBounds { upper, lower });
    }

    let m0 = cfg.prior_matrix(pairs)?;
    let prior_inv = spd_inverse(&m0).map_err(|e| Error::InvalidPrior(e.to_string()))?;
    let prior_logdet = spd_logdet(&m0)?.ok_or_else(|| Error::InvalidPrior("prior is not positive definite".into()))?;

    let gamma = cfg.itml_gamma;
    let gamma_proj = if gamma.is_infinite() { 1.0 } else { gamma / (gamma + 1.0) };
    let slack = |a: f64| if gamma.is_infinite() { 0.0 } else { a / gamma };

    let d = pairs.n_features();
    let mut m = m0;
    let mut lambda = vec![0.0f64; pairs.len()];
    let mut bhat: Vec<f64> = labels.iter().map(|&y| if y == 1 { upper } else { lower }).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut mv = vec![0.0; d];

    for _ in 0..cfg.max_iter {
        let mut max_change: f64 = 0.0;
        for (i, v) in diffs.iter().enumerate() {
            for (r, out) in mv.iter_mut().enumerate() {
                *out = m.row(r).iter().zip(v).map(|(a, b)| a * b).sum();
            }
            let p: f64 = mv.iter().zip(v).map(|(a, b)| a * b).sum();
            if !(p > 0.0) {
                // zero-length difference under M: the constraint cannot move M
                continue;
            }
            let similar = labels[i] == 1;
            let (alpha, beta) = if similar {
                let a = lambda[i].min(gamma_proj * (1.0 / p - 1.0 / bhat[i]));
                (a, a / (1.0 - a * p))
            } else {
                let a = lambda[i].min(gamma_proj * (1.0 / bhat[i] - 1.0 / p));
                (a, -a / (1.0 + a * p))
            };
            if alpha == 0.0 {
                continue;
            }
            lambda[i] -= alpha;
            max_change = max_change.max(alpha.abs());
            bhat[i] = if similar {
                1.0 / (1.0 / bhat[i] + slack(alpha))
            } else {
                1.0 / (1.0 / bhat[i] - slack(alpha))
            };
            for r in 0..d {
                for c in r..d {
                    let val = m[(r, c)] + beta * mv[r] * mv[c];
                    m.row_mut(r)[c] = val;
                    m.row_mut(c)[r] = val;
                }
            }
            if !m.is_finite() {
                return Err(Error::Numerical("ITML update produced a non-finite matrix".into()));
            }
            observe(&m);
        }
        let div = logdet_divergence(&m, &prior_inv, prior_logdet)?
            .ok_or_else(|| Error::Numerical("ITML lost positive definiteness".into()))?;
        trace.push(div);
        if max_change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let model = MahalanobisModel::fitted(psd_sqrt(&m, false)?, "itml", FitReport::from_trace(trace, converged))?;
    Ok(ItmlFit {
        model,
        upper,
        lower,
        slack_bounds: bhat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::rng::SplitMix64;
    use crate::weak::WeakAlgorithm;

    fn cfg() -> WeakConfig {
        WeakConfig::new(WeakAlgorithm::Itml)
    }

    fn seeded_pairs(seed: u64, n: usize, d: usize) -> TupleSet {
        let mut rng = SplitMix64::new(seed);
        let mut tuples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let a: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let scale = if i % 2 == 0 { 0.5 } else { 2.0 };
            let b: Vec<f64> = a.iter().map(|x| x + scale * rng.normal()).collect();
            tuples.push(vec![a, b]);
            labels.push(if i % 2 == 0 { 1 } else { -1 });
        }
        TupleSet::from_points(&tuples, Some(labels)).unwrap()
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 50.0), 2.5);
        assert_eq!(percentile(&[1.0, 2.0], 0.0), 1.0);
        assert_eq!(percentile(&[1.0, 2.0], 100.0), 2.0);
    }

    #[test]
    fn satisfied_constraints_leave_prior() {
        // the similar pair sits below u and the dissimilar one above l
        let ts = TupleSet::from_points(
            &[vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 0.0], vec![0.0, 3.0]]],
            Some(vec![1, -1]),
        )
        .unwrap();
        let fit = fit_itml_detailed(&ts, &cfg(), |_| panic!("no update expected")).unwrap();
        assert_eq!(fit.model.get_mahalanobis_matrix(), Matrix::identity(2));
        assert!(fit.model.fit_report().converged);
        assert_eq!(fit.model.fit_report().n_iter, 1);
    }

    #[test]
    fn updates_stay_symmetric_and_psd() {
        let ts = seeded_pairs(1, 20, 4);
        let mut worst_asym: f64 = 0.0;
        let mut worst_eig = f64::INFINITY;
        fit_itml_detailed(&ts, &cfg(), |m| {
            worst_asym = worst_asym.max(m.asymmetry());
            worst_eig = worst_eig.min(sym_eig(m).unwrap().min_eigenvalue());
        })
        .unwrap();
        assert!(worst_asym <= 1e-10);
        assert!(worst_eig >= -1e-9);
    }

    #[test]
    fn most_constraints_satisfied() {
        let ts = seeded_pairs(2, 20, 4);
        let fit = fit_itml_detailed(&ts, &cfg(), |_| {}).unwrap();
        let m = fit.model.get_mahalanobis_matrix();
        let labels = ts.labels().unwrap();
        let ok = (0..ts.len())
            .filter(|&i| {
                let q = m.quad_form(&ts.diff(i, 0, 1));
                let b = fit.slack_bounds[i];
                let tol = 1e-6 * (1.0 + b);
                if labels[i] == 1 {
                    q <= b + tol
                } else {
                    q >= b - tol
                }
            })
            .count();
        assert!(ok as f64 >= 0.9 * ts.len() as f64, "{ok}");
    }

    #[test]
    fn slack_weight_controls_drift() {
        let mut t = seeded_pairs(4, 10, 3);
        let mut tuples: Vec<Vec<Vec<f64>>> = (0..t.len())
            .map(|i| vec![t.point(i, 0).to_vec(), t.point(i, 1).to_vec()])
            .collect();
        let mut labels = t.labels().unwrap().to_vec();
        // a similar pair far beyond every bound
        tuples.push(vec![vec![0.0; 3], vec![6.0, 0.0, 0.0]]);
        labels.push(1);
        t = TupleSet::from_points(&tuples, Some(labels)).unwrap();
        let drift = |gamma: f64| {
            let mut c = cfg();
            c.itml_gamma = gamma;
            let m = fit_itml(&t, &c).unwrap().get_mahalanobis_matrix();
            m.sub(&Matrix::identity(3)).unwrap().frobenius()
        };
        let (soft, hard, inf) = (drift(1.0), drift(1e12), drift(f64::INFINITY));
        // hard constraints are enforced, soft ones mostly absorbed by slack
        assert!(soft < hard, "{soft} vs {hard}");
        assert!((hard - inf).abs() <= 1e-6 * inf);
    }

    #[test]
    fn degenerate_percentiles() {
        let ts = TupleSet::from_points(
            &[vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![1.0]]],
            Some(vec![1, -1]),
        )
        .unwrap();
        assert!(matches!(fit_itml(&ts, &cfg()), Err(Error::InfeasibleBounds { .. })));
    }
}
