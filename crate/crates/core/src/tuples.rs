//! Supervision data: labeled datasets, chunklets and tuple sets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;
use crate::rng::SplitMix64;

/// Per-sample targets: class labels or real-valued regression targets.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<i64>),
    Continuous(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(v) => v.len(),
            Targets::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real-valued view (class ids are converted).
    pub fn as_reals(&self) -> Vec<f64> {
        match self {
            Targets::Classes(v) => v.iter().map(|&c| c as f64).collect(),
            Targets::Continuous(v) => v.clone(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
            Targets::Continuous(v) => Targets::Continuous(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub x: FeatureMatrix,
    pub y: Targets,
}

impl LabeledDataset {
    pub fn new(x: FeatureMatrix, y: Targets) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::dim("label vector", x.rows(), y.len()));
        }
        if let Targets::Continuous(v) = &y {
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFinite("targets".into()));
            }
        }
        Ok(LabeledDataset { x, y })
    }

    pub fn classification(x: FeatureMatrix, y: Vec<i64>) -> Result<Self> {
        LabeledDataset::new(x, Targets::Classes(y))
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Class labels, or an error for regression targets.
    pub fn classes(&self) -> Result<&[i64]> {
        match &self.y {
            Targets::Classes(v) => Ok(v),
            Targets::Continuous(_) => Err(Error::Validation(
                "class labels required, got real-valued targets".into(),
            )),
        }
    }

    /// Sample indices grouped by class, classes in ascending order.
    pub fn class_members(&self) -> Result<BTreeMap<i64, Vec<usize>>> {
        Ok(group_by_label(self.classes()?))
    }

    /// Checks classification use: at least two distinct labels.
    pub fn require_classes(&self) -> Result<BTreeMap<i64, Vec<usize>>> {
        let groups = self.class_members()?;
        if groups.len() < 2 {
            return Err(Error::DegenerateLabels(format!(
                "need at least 2 classes, found {}",
                groups.len()
            )));
        }
        Ok(groups)
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_rows(idx),
            y: self.y.select(idx),
        }
    }
}

pub(crate) fn group_by_label(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    groups
}

/// Chunklet id per sample; `-1` marks unassigned points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkletAssignment(Vec<i64>);

impl ChunkletAssignment {
    /// Singleton chunklets carry no constraint and are reassigned to `-1`.
    pub fn new(assignment: Vec<i64>) -> Result<Self> {
        if let Some(bad) = assignment.iter().find(|&&c| c < -1) {
            return Err(Error::Validation(format!("chunklet id {bad} (use -1 for unassigned)")));
        }
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for &c in assignment.iter().filter(|&&c| c >= 0) {
            *counts.entry(c).or_default() += 1;
        }
        let assignment = assignment
            .into_iter()
            .map(|c| if c >= 0 && counts[&c] < 2 { -1 } else { c })
            .collect();
        Ok(ChunkletAssignment(assignment))
    }

    /// One chunklet per class.
    pub fn from_classes(labels: &[i64]) -> Self {
        let ids: BTreeMap<i64, i64> = group_by_label(labels)
            .keys()
            .enumerate()
            .map(|(i, &c)| (c, i as i64))
            .collect();
        ChunkletAssignment::new(labels.iter().map(|c| ids[c]).collect())
            .expect("ids are non-negative")
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Member indices of every chunklet, ids ascending.
    pub fn chunklets(&self) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &c) in self.0.iter().enumerate() {
            if c >= 0 {
                groups.entry(c).or_default().push(i);
            }
        }
        groups.into_values().collect()
    }
}

/// Tuples of feature rows: pairs (2), triplets (3) or quadruplets (4).
///
/// Stored as one contiguous `n_tuples x arity x n_features` block. Triplets
/// read as (anchor, positive, negative); quadruplets as (close, close, far,
/// far). Only pairs may carry `+1` (similar) / `-1` (dissimilar) labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TupleSet {
    arity: usize,
    n_features: usize,
    data: Vec<f64>,
    labels: Option<Vec<i8>>,
}

impl TupleSet {
    pub fn new(arity: usize, n_features: usize, data: Vec<f64>, labels: Option<Vec<i8>>) -> Result<Self> {
        let ts = TupleSet {
            arity,
            n_features,
            data,
            labels,
        };
        ts.check_intrinsic()?;
        Ok(ts)
    }

    /// Builds a tuple set from explicit points: `tuples[i][j]` is point `j` of tuple `i`.
    pub fn from_points(tuples: &[Vec<Vec<f64>>], labels: Option<Vec<i8>>) -> Result<Self> {
        let arity = tuples.first().map_or(2, Vec::len);
        let width = tuples.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(tuples.len() * arity * width);
        for t in tuples {
            if t.len() != arity {
                return Err(Error::Arity {
                    expected: arity,
                    actual: t.len(),
                });
            }
            for p in t {
                if p.len() != width {
                    return Err(Error::Width {
                        expected: width,
                        actual: p.len(),
                    });
                }
                data.extend_from_slice(p);
            }
        }
        TupleSet::new(arity, width, data, labels)
    }

    /// Copies the rows named by `indices` (one `arity`-slice per tuple) out of `base`.
    pub fn from_indices(base: &FeatureMatrix, arity: usize, indices: &[usize], labels: Option<Vec<i8>>) -> Result<Self> {
        if !indices.len().is_multiple_of(arity.max(1)) {
            return Err(Error::Validation("index list is not a whole number of tuples".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * base.cols());
        for &i in indices {
            if i >= base.rows() {
                return Err(Error::Validation(format!(
                    "row index {i} out of range for {} samples",
                    base.rows()
                )));
            }
            data.extend_from_slice(base.row(i));
        }
        TupleSet::new(arity, base.cols(), data, labels)
    }

    fn check_intrinsic(&self) -> Result<()> {
        if !(2..=4).contains(&self.arity) {
            return Err(Error::Arity {
                expected: 2,
                actual: self.arity,
            });
        }
        let stride = self.arity * self.n_features;
        if self.n_features == 0 || !self.data.len().is_multiple_of(stride) {
            return Err(Error::Width {
                expected: self.n_features,
                actual: if self.n_features == 0 { 0 } else { self.data.len() % stride },
            });
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tuple data".into()));
        }
        if let Some(labels) = &self.labels {
            if self.arity != 2 {
                return Err(Error::BadLabel(format!(
                    "labels are only allowed on pairs, not {}-tuples",
                    self.arity
                )));
            }
            let n = self.data.len() / stride;
            if labels.len() != n {
                return Err(Error::BadLabel(format!("{} labels for {n} pairs", labels.len())));
            }
            if let Some(l) = labels.iter().find(|&&l| l != 1 && l != -1) {
                return Err(Error::BadLabel(format!("pair label {l} is not +1 or -1")));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.arity * self.n_features)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    /// Point `j` of tuple `i`.
    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.arity + j) * self.n_features;
        &self.data[start..start + self.n_features]
    }

    /// Difference vector `point(i, a) - point(i, b)`.
    pub fn diff(&self, i: usize, a: usize, b: usize) -> Vec<f64> {
        self.point(i, a).iter().zip(self.point(i, b)).map(|(x, y)| x - y).collect()
    }

    pub fn with_labels(mut self, labels: Option<Vec<i8>>) -> Result<Self> {
        self.labels = labels;
        self.check_intrinsic()?;
        Ok(self)
    }

    /// Tuples at `idx`, in that order (labels follow).
    pub fn subset(&self, idx: &[usize]) -> TupleSet {
        let stride = self.arity * self.n_features;
        let mut data = Vec::with_capacity(idx.len() * stride);
        for &i in idx {
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        TupleSet {
            arity: self.arity,
            n_features: self.n_features,
            data,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Every distinct point appearing in the tuples, as rows of a matrix.
    pub fn points(&self) -> FeatureMatrix {
        FeatureMatrix::from_vec_unchecked(self.len() * self.arity, self.n_features, self.data.clone())
    }
}

/// Checks a tuple set against the arity and width a learner expects.
pub fn validate_tuples(ts: &TupleSet, expected_arity: usize, n_features: usize) -> Result<()> {
    ts.check_intrinsic()?;
    if ts.arity() != expected_arity {
        return Err(Error::Arity {
            expected: expected_arity,
            actual: ts.arity(),
        });
    }
    if ts.n_features() != n_features {
        return Err(Error::Width {
            expected: n_features,
            actual: ts.n_features(),
        });
    }
    Ok(())
}

struct ClassIndex {
    labels: Vec<i64>,
    groups: BTreeMap<i64, Vec<usize>>,
}

impl ClassIndex {
    fn build(ds: &LabeledDataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Validation("tuples per sample must be at least 1".into()));
        }
        let groups = ds.require_classes()?;
        if let Some((&class, _)) = groups.iter().find(|(_, m)| m.len() < 2) {
            return Err(Error::InfeasiblePairs { class });
        }
        Ok(ClassIndex {
            labels: ds.classes()?.to_vec(),
            groups,
        })
    }

    fn same_class(&self, i: usize) -> Vec<usize> {
        self.groups[&self.labels[i]].iter().copied().filter(|&j| j != i).collect()
    }

    fn other_class(&self, label: i64) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.labels[j] != label).collect()
    }
}

/// `k` similar (`+1`) and `k` dissimilar (`-1`) pairs per sample.
pub fn pairs_from_labels(ds: &LabeledDataset, k: usize, seed: u64) -> Result<TupleSet> {
    let index = ClassIndex::build(ds, k)?;
    let mut rng = SplitMix64::new(seed);
    let n = ds.n_samples();
    let mut idx = Vec::with_capacity(4 * k * n);
    let mut labels = Vec::with_capacity(2 * k * n);
    for i in 0..n {
        for j in rng.sample(&index.same_class(i), k) {
            idx.extend([i, j]);
            labels.push(1);
        }
        for j in rng.sample(&index.other_class(index.labels[i]), k) {
            idx.extend([i, j]);
            labels.push(-1);
        }
    }
    TupleSet::from_indices(&ds.x, 2, &idx, Some(labels))
}

/// `k` (anchor, same-class, other-class) triplets per sample.
pub fn triplets_from_labels(ds: &LabeledDataset, k: usize, seed: u64) -> Result<TupleSet> {
    let index = ClassIndex::build(ds, k)?;
    let mut rng = SplitMix64::new(seed);
    let n = ds.n_samples();
    let mut idx = Vec::with_capacity(3 * k * n);
    for i in 0..n {
        let pos = rng.sample(&index.same_class(i), k);
        let neg = rng.sample(&index.other_class(index.labels[i]), k);
        for (p, q) in pos.into_iter().zip(neg) {
            idx.extend([i, p, q]);
        }
    }
    TupleSet::from_indices(&ds.x, 3, &idx, None)
}

/// `k` quadruplets per sample: (sample, same-class partner, random point,
/// partner of a different class than the random point).
pub fn quadruplets_from_labels(ds: &LabeledDataset, k: usize, seed: u64) -> Result<TupleSet> {
    let index = ClassIndex::build(ds, k)?;
    let mut rng = SplitMix64::new(seed);
    let n = ds.n_samples();
    let mut idx = Vec::with_capacity(4 * k * n);
    for i in 0..n {
        let close = rng.sample(&index.same_class(i), k);
        for c in close {
            let r = rng.below(n);
            let others = index.other_class(index.labels[r]);
            let s = others[rng.below(others.len())];
            idx.extend([i, c, r, s]);
        }
    }
    TupleSet::from_indices(&ds.x, 4, &idx, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn toy() -> LabeledDataset {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]]).unwrap();
        LabeledDataset::classification(x, vec![0, 0, 1, 1]).unwrap()
    }

    fn random_dataset(seed: u64) -> LabeledDataset {
        let mut rng = SplitMix64::new(seed);
        let n = 8 + rng.below(10);
        let classes = 2 + rng.below(3) as i64;
        let mut y: Vec<i64> = (0..n as i64).map(|i| i % classes).collect();
        rng.shuffle(&mut y);
        let x = Matrix::new(n, 3, (0..3 * n).map(|_| rng.normal()).collect()).unwrap();
        LabeledDataset::classification(x, y).unwrap()
    }

    fn row_class(ds: &LabeledDataset, p: &[f64]) -> i64 {
        let i = (0..ds.n_samples()).find(|&i| ds.x.row(i) == p).expect("row copied verbatim");
        ds.classes().unwrap()[i]
    }

    #[test]
    fn validate_accepts_and_rejects() {
        let ts = TupleSet::new(2, 4, vec![0.5; 24], Some(vec![1, -1, 1])).unwrap();
        validate_tuples(&ts, 2, 4).unwrap();
        assert!(matches!(validate_tuples(&ts, 3, 4), Err(Error::Arity { .. })));
        assert!(matches!(validate_tuples(&ts, 2, 3), Err(Error::Width { .. })));
        assert!(matches!(
            TupleSet::new(2, 4, vec![0.5; 24], Some(vec![1, 0, 1])),
            Err(Error::BadLabel(_))
        ));
        assert!(matches!(
            TupleSet::new(3, 2, vec![0.0; 6], Some(vec![1])),
            Err(Error::BadLabel(_))
        ));
        assert!(matches!(
            TupleSet::new(2, 1, vec![0.0, f64::INFINITY], None),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(TupleSet::new(5, 1, vec![0.0; 5], None), Err(Error::Arity { .. })));
    }

    #[test]
    fn pair_counts_and_determinism() {
        let ds = toy();
        let p = pairs_from_labels(&ds, 1, 3).unwrap();
        assert_eq!(p.len(), 8);
        let labels = p.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 4);
        assert_eq!(labels.iter().filter(|&&l| l == -1).count(), 4);
        assert_eq!(p, pairs_from_labels(&ds, 1, 3).unwrap());
    }

    #[test]
    fn pair_labels_match_classes() {
        for seed in 0..20 {
            let ds = random_dataset(seed);
            let p = pairs_from_labels(&ds, 2, seed).unwrap();
            assert_eq!(p.len(), 4 * ds.n_samples());
            for (i, &l) in p.labels().unwrap().iter().enumerate() {
                let same = row_class(&ds, p.point(i, 0)) == row_class(&ds, p.point(i, 1));
                assert_eq!(same, l == 1);
            }
        }
    }

    #[test]
    fn triplets_and_quadruplets() {
        let ds = toy();
        let t = triplets_from_labels(&ds, 2, 0).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t, triplets_from_labels(&ds, 2, 0).unwrap());
        let q = quadruplets_from_labels(&ds, 1, 0).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q, quadruplets_from_labels(&ds, 1, 0).unwrap());

        for seed in 0..20 {
            let ds = random_dataset(seed);
            let t = triplets_from_labels(&ds, 2, seed).unwrap();
            for i in 0..t.len() {
                let a = row_class(&ds, t.point(i, 0));
                assert_eq!(a, row_class(&ds, t.point(i, 1)));
                assert_ne!(a, row_class(&ds, t.point(i, 2)));
            }
            let q = quadruplets_from_labels(&ds, 2, seed).unwrap();
            for i in 0..q.len() {
                assert_eq!(row_class(&ds, q.point(i, 0)), row_class(&ds, q.point(i, 1)));
                assert_ne!(row_class(&ds, q.point(i, 2)), row_class(&ds, q.point(i, 3)));
            }
        }
    }

    #[test]
    fn singleton_class_is_infeasible() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let ds = LabeledDataset::classification(x, vec![0, 0, 7]).unwrap();
        assert_eq!(pairs_from_labels(&ds, 1, 0), Err(Error::InfeasiblePairs { class: 7 }));
    }

    #[test]
    fn chunklet_singletons_are_dropped() {
        let c = ChunkletAssignment::new(vec![0, 0, 1, -1, 2, 2]).unwrap();
        assert_eq!(c.as_slice(), &[0, 0, -1, -1, 2, 2]);
        assert_eq!(c.chunklets(), vec![vec![0, 1], vec![4, 5]]);
        assert!(ChunkletAssignment::new(vec![-2]).is_err());
    }
}
