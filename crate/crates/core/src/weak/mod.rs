//! Learners trained from tuples: MMC and ITML on labeled pairs, LSML on
//! quadruplets, plus threshold calibration for pair prediction.

pub mod calibrate;
pub mod itml;
pub mod lsml;
pub mod mmc;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, Matrix};
use crate::model::MahalanobisModel;
use crate::supervised::parse;
use crate::tuples::TupleSet;

pub use calibrate::{calibrate_distances, calibrate_threshold, CalibrationResult};
pub use itml::fit_itml;
pub use lsml::fit_lsml;
pub use mmc::fit_mmc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakAlgorithm {
    Mmc,
    Itml,
    Lsml,
}

impl WeakAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            WeakAlgorithm::Mmc => "mmc",
            WeakAlgorithm::Itml => "itml",
            WeakAlgorithm::Lsml => "lsml",
        }
    }

    /// Tuple arity the learner consumes.
    pub fn arity(self) -> usize {
        match self {
            WeakAlgorithm::Mmc | WeakAlgorithm::Itml => 2,
            WeakAlgorithm::Lsml => 4,
        }
    }
}

impl fmt::Display for WeakAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prior {
    Identity,
    /// Inverse of the (regularized) covariance of the points in the tuples.
    CovarianceInverse,
}

impl FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Prior::Identity),
            "covariance-inverse" | "covariance" => Ok(Prior::CovarianceInverse),
            _ => Err(Error::Validation(format!(
                "prior must be identity or covariance-inverse, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakConfig {
    pub algorithm: WeakAlgorithm,
    pub max_iter: usize,
    pub tol: f64,
    /// MMC only: learn a diagonal metric.
    pub diagonal: bool,
    pub itml_gamma: f64,
    /// Percentiles (in percent) of training pair distances giving the
    /// similar / dissimilar bounds.
    pub itml_percentiles: (f64, f64),
    pub lsml_reg: f64,
    pub prior: Prior,
    pub seed: u64,
}

impl WeakConfig {
    pub fn new(algorithm: WeakAlgorithm) -> Self {
        WeakConfig {
            algorithm,
            max_iter: 100,
            tol: 1e-6,
            diagonal: false,
            itml_gamma: 1.0,
            itml_percentiles: (5.0, 95.0),
            lsml_reg: 1.0,
            prior: Prior::Identity,
            seed: 0,
        }
    }

    pub fn algorithm_keys(&self) -> &'static [&'static str] {
        match self.algorithm {
            WeakAlgorithm::Mmc => &["diagonal", "prior"],
            WeakAlgorithm::Itml => &["itml_gamma", "itml_percentiles", "prior"],
            WeakAlgorithm::Lsml => &["lsml_reg", "prior"],
        }
    }

    pub fn set_option(&mut self, key: &str, value: &str) -> Result<()> {
        let shared = ["max_iter", "tol", "seed"];
        if !shared.contains(&key) && !self.algorithm_keys().contains(&key) {
            return Err(Error::Validation(format!(
                "unknown option {key:?} for {}; accepted: {}",
                self.algorithm,
                shared.iter().chain(self.algorithm_keys()).copied().collect::<Vec<_>>().join(", ")
            )));
        }
        match key {
            "max_iter" => self.max_iter = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "diagonal" => self.diagonal = parse(key, value)?,
            "itml_gamma" => {
                self.itml_gamma = match value.trim() {
                    "inf" | "infinity" => f64::INFINITY,
                    v => parse(key, v)?,
                }
            }
            "itml_percentiles" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| Error::Validation(format!("itml_percentiles expects low,high, got {value:?}")))?;
                self.itml_percentiles = (parse(key, lo)?, parse(key, hi)?);
            }
            "lsml_reg" => self.lsml_reg = parse(key, value)?,
            "prior" => self.prior = value.trim().parse()?,
            _ => unreachable!("key list checked above"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Validation(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.itml_gamma > 0.0) {
            return Err(Error::Validation("itml_gamma must be > 0".into()));
        }
        let (lo, hi) = self.itml_percentiles;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::Validation(format!(
                "itml_percentiles must satisfy 0 <= low < high <= 100, got ({lo}, {hi})"
            )));
        }
        if !(self.lsml_reg >= 0.0 && self.lsml_reg.is_finite()) {
            return Err(Error::Validation("lsml_reg must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// The prior metric `M0` for the points of `tuples`.
    pub fn prior_matrix(&self, tuples: &TupleSet) -> Result<Matrix> {
        let d = tuples.n_features();
        match self.prior {
            Prior::Identity => Ok(Matrix::identity(d)),
            Prior::CovarianceInverse => {
                let pts = tuples.points();
                let n = pts.rows() as f64;
                let mut mean = vec![0.0; d];
                for r in pts.row_iter() {
                    mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
                }
                let mut cov = Matrix::zeros(d, d);
                for r in pts.row_iter() {
                    let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
                    for p in 0..d {
                        for q in 0..d {
                            cov[(p, q)] += c[p] * c[q] / n;
                        }
                    }
                }
                let tr = cov.trace();
                if !(tr > 0.0) {
                    return Err(Error::InvalidPrior("tuple points have zero covariance".into()));
                }
                spd_inverse(&cov.symmetrized().add_identity(1e-8 * tr / d as f64))
                    .map_err(|e| Error::InvalidPrior(e.to_string()))
            }
        }
    }
}

/// Fits the pair or quadruplet learner named by `cfg`.
pub fn fit_weak(tuples: &TupleSet, cfg: &WeakConfig) -> Result<MahalanobisModel> {
    match cfg.algorithm {
        WeakAlgorithm::Mmc => fit_mmc(tuples, cfg),
        WeakAlgorithm::Itml => fit_itml(tuples, cfg),
        WeakAlgorithm::Lsml => fit_lsml(tuples, cfg),
    }
}

type Diffs = Vec<Vec<f64>>;

/// Similar and dissimilar difference vectors of a labeled pair set.
pub(crate) fn split_pairs(pairs: &TupleSet) -> Result<(Diffs, Diffs)> {
    crate::tuples::validate_tuples(pairs, 2, pairs.n_features())?;
    let labels = pairs
        .labels()
        .ok_or_else(|| Error::BadLabel("pair learners need +1/-1 pair labels".into()))?;
    let mut similar = Vec::new();
    let mut dissimilar = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        let d = pairs.diff(i, 0, 1);
        if l == 1 {
            similar.push(d);
        } else {
            dissimilar.push(d);
        }
    }
    if similar.is_empty() || dissimilar.is_empty() {
        return Err(Error::DegenerateConstraints(format!(
            "need both similar and dissimilar pairs, got {} and {}",
            similar.len(),
            dissimilar.len()
        )));
    }
    Ok((similar, dissimilar))
}
