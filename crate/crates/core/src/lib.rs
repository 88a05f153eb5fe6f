//! Mahalanobis metric learning.
//!
//! Every learner produces a [`MahalanobisModel`], the linear map `L` whose
//! distance is `||L x - L x'||`. Supervised learners (NCA, LMNN, MLKR, LFDA,
//! RCA) train from class labels or chunklets; weakly-supervised ones train
//! from labeled pairs (MMC, ITML) or quadruplets (LSML). [`modelsel`] has
//! k-fold cross-validation and grid search, and [`cli`] drives everything
//! from CSV files.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod modelsel;
mod optim;
mod par;
pub mod rng;
pub mod supervised;
pub mod tuples;
pub mod weak;

pub use error::{Error, Result};
pub use linalg::{FeatureMatrix, Matrix};
pub use model::{FitReport, MahalanobisModel, ModelFile};
pub use supervised::{fit_supervised, SupervisedAlgorithm, SupervisedConfig};
pub use tuples::{ChunkletAssignment, LabeledDataset, Targets, TupleSet};
pub use weak::{fit_weak, WeakAlgorithm, WeakConfig};
