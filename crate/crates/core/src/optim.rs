//! Full-batch steepest descent with Armijo backtracking.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::FitReport;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Schedule {
    pub max_iter: usize,
    pub tol: f64,
    pub sense: Sense,
}

/// Runs projected steepest descent (or ascent) from `init`.
///
/// `eval` returns the objective and its gradient. `project` maps a trial
/// point back onto the feasible set; it must be a projection onto a convex
/// set (or the identity) for the sufficient-decrease test to be meaningful.
/// A step is accepted only if it improves the objective, so the recorded
/// trace is monotone. The first trial step is 1.0; later iterations start
/// from twice the last accepted step.
pub(crate) fn descend<E, P>(init: Matrix, schedule: Schedule, mut eval: E, project: P) -> Result<(Matrix, FitReport)>
where
    E: FnMut(&Matrix) -> Result<(f64, Matrix)>,
    P: Fn(Matrix) -> Result<Matrix>,
{
    let sign = match schedule.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut x = init;
    let (f0, g0) = eval(&x)?;
    check_finite(f0)?;
    // internally always minimize sign * f
    let mut f = sign * f0;
    let mut g = g0.scale(sign);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut step = 1.0;
    for _ in 0..schedule.max_iter {
        if g.frobenius() == 0.0 {
            trace.push(sign * f);
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = project(x.add_scaled(-t, &g)?)?;
            let moved = x.sub(&cand)?;
            let predicted = ARMIJO_C * g.inner(&moved);
            let (fc, gc) = eval(&cand)?;
            let fc = sign * fc;
            if fc.is_finite() && fc <= f - predicted && fc <= f {
                accepted = Some((cand, fc, gc.scale(sign)));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            // no improving step left at working precision
            trace.push(sign * f);
            break;
        };
        let change = (f - fc).abs();
        x = cand;
        f = fc;
        g = gc;
        step = 2.0 * t;
        trace.push(sign * f);
        if change <= schedule.tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }
    if trace.is_empty() {
        trace.push(sign * f);
    }
    Ok((x, FitReport::from_trace(trace, converged)))
}

fn check_finite(f: f64) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("objective is {f} at the initial point")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &Matrix) -> Result<(f64, Matrix)> {
        // f = sum (x_ij - 3)^2
        let shifted = x.sub(&Matrix::new(1, 2, vec![3.0, 3.0]).unwrap())?;
        Ok((shifted.inner(&shifted), shifted.scale(2.0)))
    }

    #[test]
    fn minimizes_a_quadratic() {
        let s = Schedule {
            max_iter: 100,
            tol: 1e-12,
            sense: Sense::Minimize,
        };
        let (x, rep) = descend(Matrix::zeros(1, 2), s, quadratic, Ok).unwrap();
        assert!((x[(0, 0)] - 3.0).abs() < 1e-5);
        assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rep.n_iter, rep.objective_trace.len());
    }

    #[test]
    fn maximizes_and_projects() {
        let s = Schedule {
            max_iter: 200,
            tol: 1e-14,
            sense: Sense::Maximize,
        };
        // maximize -(x - 3)^2 subject to x <= 1
        let neg = |x: &Matrix| quadratic(x).map(|(f, g)| (-f, g.scale(-1.0)));
        let clip = |m: Matrix| {
            let v = m.as_slice().iter().map(|v| v.min(1.0)).collect();
            Matrix::new(1, 2, v)
        };
        let (x, rep) = descend(Matrix::zeros(1, 2), s, neg, clip).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(rep.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let s = Schedule {
            max_iter: 10,
            tol: 1e-6,
            sense: Sense::Minimize,
        };
        let start = Matrix::new(1, 2, vec![3.0, 3.0]).unwrap();
        let (x, rep) = descend(start.clone(), s, quadratic, Ok).unwrap();
        assert_eq!(x, start);
        assert_eq!(rep.n_iter, 1);
        assert!(rep.converged);
    }
}
