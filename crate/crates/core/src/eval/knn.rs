use crate::error::{Error, Result};
use crate::numerics::{sq_dist, Matrix};

pub const DEFAULT_KNN_K: usize = 5;

/// Majority vote of the `k` nearest reference rows (Euclidean).
///
/// Equidistant neighbours are ranked by ascending reference index and vote
/// ties go to the smallest class id.
pub fn knn_classify(train: &Matrix, train_labels: &[usize], test: &Matrix, k: usize) -> Result<Vec<usize>> {
    check(train, train_labels, k, train.rows())?;
    if test.cols() != train.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} columns", train.cols()),
            got: format!("{}", test.cols()),
        });
    }
    Ok(test
        .iter_rows()
        .map(|q| vote(train, train_labels, q, k, None))
        .collect())
}

/// Leave-one-out k-NN: each row is classified by the other rows.
pub fn knn_classify_loo(emb: &Matrix, labels: &[usize], k: usize) -> Result<Vec<usize>> {
    check(emb, labels, k, emb.rows().saturating_sub(1))?;
    Ok((0..emb.rows())
        .map(|i| vote(emb, labels, emb.row(i), k, Some(i)))
        .collect())
}

fn check(train: &Matrix, labels: &[usize], k: usize, available: usize) -> Result<()> {
    if train.rows() == 0 || available == 0 {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if labels.len() != train.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", train.rows()),
            got: format!("{}", labels.len()),
        });
    }
    if k == 0 || k > available {
        return Err(Error::InvalidParameter(format!("k={k} must be in 1..={available}")));
    }
    Ok(())
}

fn vote(train: &Matrix, labels: &[usize], query: &[f64], k: usize, skip: Option<usize>) -> usize {
    let mut ranked: Vec<(f64, usize)> = (0..train.rows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (sq_dist(train.row(i), query), i))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, by_dist);
        ranked.truncate(k);
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_classes];
    for &(_, i) in &ranked {
        counts[labels[i]] += 1;
    }
    // max_by picks the last maximum; iterate in reverse so the smallest id wins
    counts
        .iter()
        .enumerate()
        .rev()
        .max_by(|a, b| a.1.cmp(b.1))
        .map(|(c, _)| c)
        .expect("at least one neighbour")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let train = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]).unwrap();
        let test = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(knn_classify(&train, &[0, 1, 2], &test, 1).unwrap(), vec![1]);
    }

    #[test]
    fn global_vote_returns_majority() {
        let train = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let test = Matrix::from_rows(&[[3.0], [-10.0], [100.0]]).unwrap();
        assert_eq!(knn_classify(&train, &[1, 1, 1, 0], &test, 4).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn ties_prefer_smaller_class_and_index() {
        // equidistant neighbours at indices 0 (class 1) and 1 (class 0); k=1 takes index 0
        let train = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let test = Matrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(knn_classify(&train, &[1, 0], &test, 1).unwrap(), vec![1]);
        // k=2 splits the vote 1-1; the smaller class wins
        assert_eq!(knn_classify(&train, &[1, 0], &test, 2).unwrap(), vec![0]);
    }

    #[test]
    fn errors() {
        let empty = Matrix::zeros(0, 2);
        let q = Matrix::zeros(1, 2);
        assert!(knn_classify(&empty, &[], &q, 1).is_err());
        let train = Matrix::zeros(2, 2);
        assert!(knn_classify(&train, &[0, 1], &q, 3).is_err());
        assert!(knn_classify(&train, &[0, 1], &q, 0).is_err());
    }

    #[test]
    fn leave_one_out_excludes_self() {
        let emb = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1]]).unwrap();
        assert_eq!(knn_classify_loo(&emb, &[0, 0, 1, 1], 1).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(knn_classify_loo(&emb, &[0, 1, 1, 0], 1).unwrap(), vec![1, 0, 0, 1]);
    }
}
