//! Learned Mahalanobis metrics.
//!
//! A model is the linear map `L` (`n_components x n_features`). Distances are
//! `D_L(x, x') = ||L x - L x'||`, i.e. Euclidean distance after the map, or
//! equivalently `sqrt((x - x')^T M (x - x'))` with `M = L^T L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, FeatureMatrix, Matrix};
use crate::tuples::{validate_tuples, TupleSet};

/// Outcome of an iterative (or closed-form) fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub n_iter: usize,
    pub final_objective: f64,
    /// One objective value per outer iteration.
    #[serde(default)]
    pub objective_trace: Vec<f64>,
}

impl FitReport {
    pub fn closed_form(objective: f64) -> Self {
        FitReport {
            converged: true,
            n_iter: 1,
            final_objective: objective,
            objective_trace: vec![objective],
        }
    }

    pub(crate) fn from_trace(trace: Vec<f64>, converged: bool) -> Self {
        FitReport {
            converged,
            n_iter: trace.len(),
            final_objective: trace.last().copied().unwrap_or(0.0),
            objective_trace: trace,
        }
    }
}

impl Default for FitReport {
    fn default() -> Self {
        FitReport {
            converged: true,
            n_iter: 0,
            final_objective: 0.0,
            objective_trace: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MahalanobisModel {
    components: Matrix,
    threshold: Option<f64>,
    algorithm: String,
    fit_report: FitReport,
}

/// Label for a pair/triplet/quadruplet prediction.
pub const SIMILAR: i8 = 1;
pub const DISSIMILAR: i8 = -1;

impl MahalanobisModel {
    /// Wraps a hand-specified transformation; tagged `"manual"`.
    pub fn from_components(components: Matrix) -> Result<Self> {
        MahalanobisModel::fitted(components, "manual", FitReport::default())
    }

    pub(crate) fn fitted(components: Matrix, algorithm: &str, fit_report: FitReport) -> Result<Self> {
        let (rows, cols) = components.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Validation("components matrix is empty".into()));
        }
        if !components.is_finite() {
            return Err(Error::NonFinite("components".into()));
        }
        if rows > cols {
            return Err(Error::dim("n_components (must not exceed n_features)", cols, rows));
        }
        Ok(MahalanobisModel {
            components,
            threshold: None,
            algorithm: algorithm.to_string(),
            fit_report,
        })
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn n_features(&self) -> usize {
        self.components.cols()
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn algorithm(&self) -> &str {
        &self.algorithm
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.fit_report
    }

    /// Copy of the model carrying a pair threshold (or none).
    pub fn with_threshold(mut self, threshold: Option<f64>) -> Result<Self> {
        if let Some(t) = threshold {
            // calibration may pick the below-minimum sentinel, which can be negative
            if !t.is_finite() {
                return Err(Error::Validation(format!("threshold must be finite, got {t}")));
            }
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// `X L^T`: every row mapped into the learned space.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.n_features() {
            return Err(Error::dim("transform input columns", self.n_features(), x.cols()));
        }
        let mut data = Vec::with_capacity(x.rows() * self.n_components());
        for r in x.row_iter() {
            data.extend(project(&self.components, r));
        }
        Ok(Matrix::from_vec_unchecked(x.rows(), self.n_components(), data))
    }

    /// Non-squared learned distance for every pair.
    pub fn score_pairs(&self, pairs: &TupleSet) -> Result<Vec<f64>> {
        validate_tuples(pairs, 2, self.n_features())?;
        Ok((0..pairs.len())
            .map(|i| distance(&self.components, pairs.point(i, 0), pairs.point(i, 1)))
            .collect())
    }

    /// Detached distance function holding its own copy of `L`.
    pub fn get_metric(&self) -> impl Fn(&[f64], &[f64]) -> Result<f64> + Clone + Send + Sync + 'static {
        let l = self.components.clone();
        move |a: &[f64], b: &[f64]| {
            for v in [a, b] {
                if v.len() != l.cols() {
                    return Err(Error::dim("metric argument", l.cols(), v.len()));
                }
            }
            Ok(distance(&l, a, b))
        }
    }

    /// `M = L^T L`.
    pub fn get_mahalanobis_matrix(&self) -> Matrix {
        self.components.gram()
    }

    /// `-D_L` per pair: larger means more similar. Needs no threshold.
    pub fn decision_function_pairs(&self, pairs: &TupleSet) -> Result<Vec<f64>> {
        Ok(self.score_pairs(pairs)?.into_iter().map(|d| -d).collect())
    }

    /// `+1` where the distance is at most the threshold, `-1` otherwise.
    pub fn predict_pairs(&self, pairs: &TupleSet) -> Result<Vec<i8>> {
        let t = self.threshold.ok_or(Error::UnsetThreshold)?;
        Ok(self
            .score_pairs(pairs)?
            .into_iter()
            .map(|d| if d <= t { SIMILAR } else { DISSIMILAR })
            .collect())
    }

    /// `+1` where the anchor is strictly closer to the second point than to the third.
    pub fn predict_triplets(&self, triplets: &TupleSet) -> Result<Vec<i8>> {
        validate_tuples(triplets, 3, self.n_features())?;
        let l = &self.components;
        Ok((0..triplets.len())
            .map(|i| {
                let a = triplets.point(i, 0);
                order_label(distance(l, a, triplets.point(i, 1)), distance(l, a, triplets.point(i, 2)))
            })
            .collect())
    }

    /// `+1` where the first two points are strictly closer than the last two.
    pub fn predict_quadruplets(&self, quads: &TupleSet) -> Result<Vec<i8>> {
        validate_tuples(quads, 4, self.n_features())?;
        let l = &self.components;
        Ok((0..quads.len())
            .map(|i| {
                order_label(
                    distance(l, quads.point(i, 0), quads.point(i, 1)),
                    distance(l, quads.point(i, 2), quads.point(i, 3)),
                )
            })
            .collect())
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            algorithm: self.algorithm.clone(),
            n_features: self.n_features(),
            n_components: self.n_components(),
            components: self.components.to_rows(),
            threshold: self.threshold,
            fit_report: self.fit_report.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        let components = Matrix::from_rows(&file.components)?;
        if components.shape() != (file.n_components, file.n_features) {
            return Err(Error::Format(format!(
                "components are {}x{} but header says {}x{}",
                components.rows(),
                components.cols(),
                file.n_components,
                file.n_features
            )));
        }
        MahalanobisModel::fitted(components, &file.algorithm, file.fit_report)?.with_threshold(file.threshold)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        MahalanobisModel::from_file(file)
    }
}

fn order_label(close: f64, far: f64) -> i8 {
    if close < far {
        SIMILAR
    } else {
        DISSIMILAR
    }
}

/// `L x`.
pub(crate) fn project(l: &Matrix, x: &[f64]) -> Vec<f64> {
    l.row_iter().map(|r| dot(r, x)).collect()
}

/// `||L a - L b||`; shared by every distance path so they agree bit for bit.
pub(crate) fn distance(l: &Matrix, a: &[f64], b: &[f64]) -> f64 {
    l.row_iter()
        .map(|r| {
            let d = dot(r, a) - dot(r, b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// On-disk model. Floats are written in shortest round-trip form, so a
/// reloaded model reproduces every prediction exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub algorithm: String,
    pub n_features: usize,
    pub n_components: usize,
    pub components: Vec<Vec<f64>>,
    pub threshold: Option<f64>,
    pub fit_report: FitReport,
}
