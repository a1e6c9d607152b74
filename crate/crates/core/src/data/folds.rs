use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

/// Row indices of one cross-validation split, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold partition.
///
/// Each class's rows (in row order) are shuffled with a stream derived from
/// `(seed, class)` and dealt round-robin into folds, starting where the
/// previous class stopped so fold sizes also balance overall. The result
/// depends only on the labels, `k` and `seed`.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k-fold needs k >= 2, got {k}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut tests = vec![Vec::new(); k];
    let mut cursor = 0;
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: rows.len(),
                needed: k,
            });
        }
        rows.shuffle(&mut seeded_rng(derive_seed(seed, class as u64)));
        for row in rows {
            tests[cursor % k].push(row);
            cursor += 1;
        }
    }
    let mut in_test = vec![usize::MAX; labels.len()];
    for (f, test) in tests.iter_mut().enumerate() {
        test.sort_unstable();
        for &r in test.iter() {
            in_test[r] = f;
        }
    }
    Ok(tests
        .into_iter()
        .enumerate()
        .map(|(f, test)| Fold {
            train: (0..labels.len()).filter(|&r| in_test[r] != f).collect(),
            test,
        })
        .collect())
}
