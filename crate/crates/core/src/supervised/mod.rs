//! Learners trained from one label per sample.
//!
//! NCA, LMNN and MLKR are gradient methods on `L`; LFDA solves a
//! generalized eigenproblem; RCA whitens within-chunklet scatter. None of
//! them centers or scales features.

pub mod lfda;
pub mod lmnn;
pub mod mlkr;
pub mod nca;
pub mod rca;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::MahalanobisModel;
use crate::optim::Sense;
use crate::rng::SplitMix64;
use crate::tuples::{ChunkletAssignment, LabeledDataset};

pub use lfda::fit_lfda;
pub use lmnn::fit_lmnn;
pub use mlkr::fit_mlkr;
pub use nca::fit_nca;
pub use rca::fit_rca;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupervisedAlgorithm {
    Nca,
    Lmnn,
    Mlkr,
    Lfda,
    Rca,
}

impl SupervisedAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            SupervisedAlgorithm::Nca => "nca",
            SupervisedAlgorithm::Lmnn => "lmnn",
            SupervisedAlgorithm::Mlkr => "mlkr",
            SupervisedAlgorithm::Lfda => "lfda",
            SupervisedAlgorithm::Rca => "rca",
        }
    }

    pub(crate) fn sense(self) -> Sense {
        match self {
            SupervisedAlgorithm::Nca => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }
}

impl fmt::Display for SupervisedAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// First `n_components` rows of the identity.
    Identity,
    /// Seeded standard normal entries scaled by `1/sqrt(d)`.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LfdaEmbedding {
    Weighted,
    Plain,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Init::Identity),
            "random" => Ok(Init::Random),
            _ => Err(Error::Validation(format!("init must be identity or random, got {s:?}"))),
        }
    }
}

impl FromStr for LfdaEmbedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(LfdaEmbedding::Weighted),
            "plain" => Ok(LfdaEmbedding::Plain),
            _ => Err(Error::Validation(format!(
                "lfda_embedding must be weighted or plain, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedConfig {
    pub algorithm: SupervisedAlgorithm,
    /// `None` keeps every feature.
    pub n_components: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Number of target neighbors.
    pub lmnn_k: usize,
    /// Weight of the impostor (push) term, in (0, 1).
    pub lmnn_push_weight: f64,
    pub lmnn_margin: f64,
    pub lfda_knn: usize,
    pub lfda_embedding: LfdaEmbedding,
    pub rca_reg: f64,
    pub init: Init,
}

impl SupervisedConfig {
    pub fn new(algorithm: SupervisedAlgorithm) -> Self {
        SupervisedConfig {
            algorithm,
            n_components: None,
            max_iter: 100,
            tol: 1e-6,
            seed: 0,
            lmnn_k: 3,
            lmnn_push_weight: 0.5,
            lmnn_margin: 1.0,
            lfda_knn: 7,
            lfda_embedding: LfdaEmbedding::Weighted,
            rca_reg: 1e-8,
            init: Init::Identity,
        }
    }

    /// Option keys accepted for this algorithm (beyond the shared ones).
    pub fn algorithm_keys(&self) -> &'static [&'static str] {
        match self.algorithm {
            SupervisedAlgorithm::Nca | SupervisedAlgorithm::Mlkr => &["init"],
            SupervisedAlgorithm::Lmnn => &["init", "lmnn_k", "lmnn_push_weight", "lmnn_margin"],
            SupervisedAlgorithm::Lfda => &["lfda_knn", "lfda_embedding"],
            SupervisedAlgorithm::Rca => &["rca_reg"],
        }
    }

    /// Sets a field from its textual value; unknown or foreign keys are errors.
    pub fn set_option(&mut self, key: &str, value: &str) -> Result<()> {
        let shared = ["n_components", "max_iter", "tol", "seed"];
        if !shared.contains(&key) && !self.algorithm_keys().contains(&key) {
            return Err(Error::Validation(format!(
                "unknown option {key:?} for {}; accepted: {}",
                self.algorithm,
                shared.iter().chain(self.algorithm_keys()).copied().collect::<Vec<_>>().join(", ")
            )));
        }
        match key {
            "n_components" => self.n_components = Some(parse(key, value)?),
            "max_iter" => self.max_iter = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lmnn_k" => self.lmnn_k = parse(key, value)?,
            "lmnn_push_weight" => self.lmnn_push_weight = parse(key, value)?,
            "lmnn_margin" => self.lmnn_margin = parse(key, value)?,
            "lfda_knn" => self.lfda_knn = parse(key, value)?,
            "lfda_embedding" => self.lfda_embedding = value.parse()?,
            "rca_reg" => self.rca_reg = parse(key, value)?,
            "init" => self.init = value.parse()?,
            _ => unreachable!("key list checked above"),
        }
        Ok(())
    }

    /// Resolved number of output dimensions for `n_features` inputs.
    pub fn components_for(&self, n_features: usize) -> Result<usize> {
        let m = self.n_components.unwrap_or(n_features);
        if m == 0 || m > n_features {
            return Err(Error::Validation(format!(
                "n_components must be in 1..={n_features}, got {m}"
            )));
        }
        Ok(m)
    }

    pub fn validate(&self, n_features: usize) -> Result<usize> {
        let m = self.components_for(n_features)?;
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Validation(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.lmnn_k == 0 {
            return Err(Error::Validation("lmnn_k must be at least 1".into()));
        }
        if !(self.lmnn_push_weight > 0.0 && self.lmnn_push_weight < 1.0) {
            return Err(Error::Validation(format!(
                "lmnn_push_weight must be in (0, 1), got {}",
                self.lmnn_push_weight
            )));
        }
        if !(self.lmnn_margin.is_finite() && self.lmnn_margin >= 0.0) {
            return Err(Error::Validation("lmnn_margin must be finite and >= 0".into()));
        }
        if self.lfda_knn == 0 {
            return Err(Error::Validation("lfda_knn must be at least 1".into()));
        }
        if !(self.rca_reg > 0.0 && self.rca_reg.is_finite()) {
            return Err(Error::Validation("rca_reg must be finite and > 0".into()));
        }
        Ok(m)
    }

    pub(crate) fn initial_components(&self, n_features: usize) -> Result<Matrix> {
        let m = self.components_for(n_features)?;
        Ok(match self.init {
            Init::Identity => Matrix::eye_rect(m, n_features),
            Init::Random => {
                let mut rng = SplitMix64::new(self.seed);
                let scale = 1.0 / (n_features as f64).sqrt();
                let data = (0..m * n_features).map(|_| rng.normal() * scale).collect();
                Matrix::new(m, n_features, data)?
            }
        })
    }

    pub(crate) fn schedule(&self) -> crate::optim::Schedule {
        crate::optim::Schedule {
            max_iter: self.max_iter,
            tol: self.tol,
            sense: self.algorithm.sense(),
        }
    }
}

pub(crate) fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Validation(format!("cannot parse {key}={value:?}")))
}

/// Fits whichever learner `cfg` names. RCA uses one chunklet per class.
pub fn fit_supervised(ds: &LabeledDataset, cfg: &SupervisedConfig) -> Result<MahalanobisModel> {
    match cfg.algorithm {
        SupervisedAlgorithm::Nca => fit_nca(ds, cfg),
        SupervisedAlgorithm::Lmnn => fit_lmnn(ds, cfg),
        SupervisedAlgorithm::Mlkr => fit_mlkr(ds, cfg),
        SupervisedAlgorithm::Lfda => fit_lfda(ds, cfg),
        SupervisedAlgorithm::Rca => {
            let chunks = ChunkletAssignment::from_classes(ds.classes()?);
            fit_rca(&ds.x, &chunks, cfg)
        }
    }
}

/// `2 L S` where `S = sum_ij w_ij (x_i - x_j)(x_i - x_j)^T`: the gradient of
/// `sum_ij w_ij ||L x_i - L x_j||^2` with respect to `L`.
pub(crate) fn distance_gradient(x: &Matrix, l: &Matrix, w: &Matrix) -> Matrix {
    let scatter = crate::linalg::weighted_scatter(x, w);
    l.matmul(&scatter).expect("shapes agree").scale(2.0)
}

/// Squared distances between all rows of `z`.
pub(crate) fn pairwise_sq_dists(z: &Matrix) -> Matrix {
    let n = z.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = crate::linalg::sq_dist(z.row(i), z.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}
