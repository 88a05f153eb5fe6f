use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `k` shuffled folds over `0..n`; test sets are disjoint and cover every index.
///
/// With `stratify`, each stratum is shuffled and dealt round-robin so every
/// fold holds its share of each class to within one sample. A stratum with
/// fewer than `k` members falls back to plain shuffling with a warning.
pub fn kfold_split<L: Ord + Clone>(n: usize, k: usize, seed: u64, stratify: Option<&[L]>) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Validation(format!("cannot split {n} items into {k} folds")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];

    let strata = match stratify {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::dim("stratification labels", n, labels.len()));
            }
            let mut groups: BTreeMap<L, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                groups.entry(l.clone()).or_default().push(i);
            }
            if groups.values().any(|g| g.len() < k) {
                log::warn!("a stratum has fewer than {k} members; folds are not stratified");
                None
            } else {
                Some(groups)
            }
        }
        None => None,
    };

    match strata {
        Some(groups) => {
            let mut pos = 0;
            for mut members in groups.into_values() {
                rng.shuffle(&mut members);
                for i in members {
                    tests[pos % k].push(i);
                    pos += 1;
                }
            }
        }
        None => {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            for (f, test) in tests.iter_mut().enumerate() {
                let len = base + usize::from(f < extra);
                test.extend_from_slice(&perm[start..start + len]);
                start += len;
            }
        }
    }

    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}
