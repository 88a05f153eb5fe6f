//! Mahalanobis Metric for Clustering.
//!
//! Full variant: maximize `sum_D sqrt(d_M)` subject to `sum_S d_M <= 1` and
//! `M >= 0` by projected gradient ascent. Because the budget is linear and the
//! objective is positively homogeneous, the budget projection is a rescaling
//! of `M`, which leaves the PSD cone invariant.
//!
//! Diagonal variant: minimize `g(w) = sum_S d_w - log(sum_D sqrt(d_w))` over
//! `w >= 0`.

use crate::error::{Error, Result};
use crate::linalg::{dot, psd_project, psd_sqrt, Matrix};
use crate::model::{FitReport, MahalanobisModel};
use crate::optim::{descend, Schedule, Sense};
use crate::tuples::TupleSet;

use super::{split_pairs, WeakConfig};

const MAX_HALVINGS: usize = 60;

pub fn fit_mmc(pairs: &TupleSet, cfg: &WeakConfig) -> Result<MahalanobisModel> {
    fit_mmc_observed(pairs, cfg, |_| {})
}

/// [`fit_mmc`], calling `observe` with `M` after every outer iteration.
pub fn fit_mmc_observed(pairs: &TupleSet, cfg: &WeakConfig, mut observe: impl FnMut(&Matrix)) -> Result<MahalanobisModel> {
    cfg.validate()?;
    let (similar, dissimilar) = split_pairs(pairs)?;
    if dissimilar.iter().all(|d| d.iter().all(|&v| v == 0.0)) {
        return Err(Error::Numerical(
            "every dissimilar pair joins identical points (log of zero)".into(),
        ));
    }
    let prior = cfg.prior_matrix(pairs)?;
    if cfg.diagonal {
        let (w, report) = fit_diagonal(&similar, &dissimilar, &prior.diag(), cfg)?;
        observe(&Matrix::from_diag(&w));
        let l = Matrix::from_diag(&w.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        return MahalanobisModel::fitted(l, "mmc", report);
    }
    let (m, report) = fit_full(&similar, &dissimilar, prior, cfg, &mut observe)?;
    MahalanobisModel::fitted(psd_sqrt(&m, false)?, "mmc", report)
}

fn budget(m: &Matrix, similar: &[Vec<f64>]) -> f64 {
    similar.iter().map(|d| m.quad_form(d)).sum()
}

fn spread(m: &Matrix, dissimilar: &[Vec<f64>]) -> f64 {
    dissimilar.iter().map(|d| m.quad_form(d).max(0.0).sqrt()).sum()
}

fn spread_gradient(m: &Matrix, dissimilar: &[Vec<f64>]) -> Matrix {
    let n = m.rows();
    let mut g = Matrix::zeros(n, n);
    for d in dissimilar {
        let q = m.quad_form(d);
        if q <= 0.0 {
            continue;
        }
        let s = 0.5 / q.sqrt();
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += s * d[i] * d[j];
            }
        }
    }
    g
}

/// Scales `m` onto the budget boundary `sum_S d_M = 1`.
fn to_budget(m: Matrix, similar: &[Vec<f64>]) -> Option<Matrix> {
    let b = budget(&m, similar);
    (b > 0.0 && b.is_finite()).then(|| m.scale(1.0 / b))
}

fn fit_full(
    similar: &[Vec<f64>],
    dissimilar: &[Vec<f64>],
    prior: Matrix,
    cfg: &WeakConfig,
    observe: &mut impl FnMut(&Matrix),
) -> Result<(Matrix, FitReport)> {
    let mut m = to_budget(psd_project(&prior)?, similar).ok_or_else(|| {
        Error::DegenerateConstraints("similar pairs have zero total distance under the prior".into())
    })?;
    let mut f = spread(&m, dissimilar);
    let mut step = {
        let g = spread_gradient(&m, dissimilar);
        m.frobenius() / g.frobenius().max(f64::MIN_POSITIVE)
    };
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let g = spread_gradient(&m, dissimilar);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = psd_project(&m.add_scaled(step, &g)?)?;
            if let Some(cand) = to_budget(trial, similar) {
                let fc = spread(&cand, dissimilar);
                if fc.is_finite() && fc > f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            trace.push(f);
            observe(&m);
            converged = true;
            break;
        };
        let change = fc - f;
        m = cand;
        f = fc;
        step *= 2.0;
        trace.push(f);
        observe(&m);
        if change <= cfg.tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }
    Ok((m, FitReport::from_trace(trace, converged)))
}

/// `g(w)` and its gradient for the diagonal variant.
pub fn diagonal_objective(similar: &[Vec<f64>], dissimilar: &[Vec<f64>], w: &[f64]) -> (f64, Vec<f64>) {
    let d = w.len();
    let mut grad = vec![0.0; d];
    let mut pull = 0.0;
    for s in similar {
        for k in 0..d {
            pull += w[k] * s[k] * s[k];
            grad[k] += s[k] * s[k];
        }
    }
    let mut total = 0.0;
    let mut push_grad = vec![0.0; d];
    for v in dissimilar {
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let q = dot(w, &sq);
        if q <= 0.0 {
            continue;
        }
        let r = q.sqrt();
        total += r;
        for k in 0..d {
            push_grad[k] += sq[k] / (2.0 * r);
        }
    }
    if total <= 0.0 {
        return (f64::INFINITY, vec![0.0; d]);
    }
    for k in 0..d {
        grad[k] -= push_grad[k] / total;
    }
    (pull - total.ln(), grad)
}

fn fit_diagonal(
    similar: &[Vec<f64>],
    dissimilar: &[Vec<f64>],
    init: &[f64],
    cfg: &WeakConfig,
) -> Result<(Vec<f64>, FitReport)> {
    let d = init.len();
    let w0 = Matrix::new(1, d, init.iter().map(|v| v.max(0.0)).collect())?;
    let schedule = Schedule {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        sense: Sense::Minimize,
    };
    let (w, report) = descend(
        w0,
        schedule,
        |w| {
            let (f, g) = diagonal_objective(similar, dissimilar, w.as_slice());
            Ok((f, Matrix::new(1, d, g)?))
        },
        |w: Matrix| Matrix::new(1, d, w.as_slice().iter().map(|v| v.max(0.0)).collect()),
    )?;
    Ok((w.into_vec(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::rng::SplitMix64;
    use crate::weak::WeakAlgorithm;

    fn labeled(points: &[([f64; 2], [f64; 2], i8)]) -> TupleSet {
        let tuples: Vec<Vec<Vec<f64>>> = points.iter().map(|(a, b, _)| vec![a.to_vec(), b.to_vec()]).collect();
        TupleSet::from_points(&tuples, Some(points.iter().map(|p| p.2).collect())).unwrap()
    }

    fn random_pairs(seed: u64, n: usize) -> TupleSet {
        let mut rng = SplitMix64::new(seed);
        let mut pts = Vec::new();
        for i in 0..n {
            let a = [rng.normal(), rng.normal()];
            let label = if i % 2 == 0 { 1 } else { -1 };
            let spread = if label == 1 { [0.3, 2.0] } else { [2.0, 0.3] };
            let b = [a[0] + spread[0] * rng.normal(), a[1] + spread[1] * rng.normal()];
            pts.push((a, b, label));
        }
        labeled(&pts)
    }

    #[test]
    fn diagonal_toy_matches_grid_search() {
        let pairs = labeled(&[([0.0, 0.0], [1.0, 0.0], 1), ([0.0, 0.0], [0.0, 1.0], -1)]);
        let mut cfg = WeakConfig::new(WeakAlgorithm::Mmc);
        cfg.diagonal = true;
        let model = fit_mmc(&pairs, &cfg).unwrap();
        let m = model.get_mahalanobis_matrix();
        let (w1, w2) = (m[(0, 0)], m[(1, 1)]);
        assert!(w1 / w2 < 1.0);

        // grid oracle over [0, 5]^2: g = w1 - ln(sqrt(w2)); the best grid point has w1 = 0
        let (similar, dissimilar) = split_pairs(&pairs).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for a in 0..=50 {
            for b in 1..=50 {
                let w = [a as f64 * 0.1, b as f64 * 0.1];
                let (g, _) = diagonal_objective(&similar, &dissimilar, &w);
                if g < best.0 {
                    best = (g, w[0], w[1]);
                }
            }
        }
        assert!(best.1 / best.2 < 1.0);
        let (g_fit, _) = diagonal_objective(&similar, &dissimilar, &[w1, w2]);
        let (g_init, _) = diagonal_objective(&similar, &dissimilar, &[1.0, 1.0]);
        assert!(g_fit < g_init);
    }

    #[test]
    fn full_variant_respects_constraints() {
        let pairs = random_pairs(3, 30);
        let cfg = WeakConfig::new(WeakAlgorithm::Mmc);
        let mut min_eig = f64::INFINITY;
        let model = fit_mmc_observed(&pairs, &cfg, |m| {
            min_eig = min_eig.min(sym_eig(m).unwrap().min_eigenvalue());
        })
        .unwrap();
        assert!(min_eig >= -1e-9);
        let m = model.get_mahalanobis_matrix();
        let (similar, _) = split_pairs(&pairs).unwrap();
        assert!(budget(&m, &similar) <= 1.0 + 1e-6);
        let t = &model.fit_report().objective_trace;
        assert!(t.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn diagonal_trace_is_monotone() {
        let pairs = random_pairs(8, 40);
        let mut cfg = WeakConfig::new(WeakAlgorithm::Mmc);
        cfg.diagonal = true;
        let model = fit_mmc(&pairs, &cfg).unwrap();
        let t = &model.fit_report().objective_trace;
        assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn degenerate_inputs() {
        let only_similar = labeled(&[([0.0, 0.0], [1.0, 0.0], 1)]);
        let cfg = WeakConfig::new(WeakAlgorithm::Mmc);
        assert!(matches!(fit_mmc(&only_similar, &cfg), Err(Error::DegenerateConstraints(_))));
        let zero = labeled(&[([0.0, 0.0], [1.0, 0.0], 1), ([2.0, 2.0], [2.0, 2.0], -1)]);
        assert!(matches!(fit_mmc(&zero, &cfg), Err(Error::Numerical(_))));
    }
}
