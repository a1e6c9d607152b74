//! Smart batch construction.
//!
//! Class-balanced sampling, online triplet mining over the batch distance
//! matrix, N-pair two-array batches, and constellation K-plet batches. Every
//! builder is a pure function of its inputs and the [`SeededRng`] state.
//!
//! Index conventions: [`sample_balanced_batch`] and [`build_npair_batch`]
//! return positions into the label slice they were given (dataset or split
//! rows). [`mine_triplets`], [`build_constellation_batch`] and
//! [`build_contrastive_pairs`] work on a batch already laid out as embedding
//! rows, and their indices point at those rows.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ContrastivePair, PairKind};
use crate::numerics::{pairwise_sq_dists, Matrix};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    pub fn new(anchor: usize, positive: usize, negative: usize) -> Self {
        Self {
            anchor,
            positive,
            negative,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletIndexSet {
    pub entries: Vec<Triplet>,
}

impl From<Vec<Triplet>> for TripletIndexSet {
    fn from(entries: Vec<Triplet>) -> Self {
        Self { entries }
    }
}

impl TripletIndexSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.entries.iter()
    }

    /// Checks the label invariants against per-row labels.
    pub fn validate(&self, labels: &[usize]) -> Result<()> {
        for t in &self.entries {
            for i in [t.anchor, t.positive, t.negative] {
                crate::losses::check_index(i, labels.len())?;
            }
            if t.anchor == t.positive
                || labels[t.anchor] != labels[t.positive]
                || labels[t.anchor] == labels[t.negative]
            {
                return Err(Error::InvalidParameter(format!("invalid triplet {t:?}")));
            }
        }
        Ok(())
    }
}

/// One anchor and one positive per class, aligned by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NPairBatch {
    pub anchor_rows: Vec<usize>,
    pub positive_rows: Vec<usize>,
}

impl NPairBatch {
    pub fn len(&self) -> usize {
        self.anchor_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_rows.is_empty()
    }

    /// Anchor rows followed by positive rows, the layout `npair_loss` grads use.
    pub fn stacked_rows(&self) -> Vec<usize> {
        self.anchor_rows.iter().chain(&self.positive_rows).copied().collect()
    }

    pub fn validate(&self, labels: &[usize]) -> Result<()> {
        if self.anchor_rows.len() != self.positive_rows.len() {
            return Err(Error::InvalidParameter(
                "anchor/positive arrays differ in length".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (&a, &p) in self.anchor_rows.iter().zip(&self.positive_rows) {
            crate::losses::check_index(a, labels.len())?;
            crate::losses::check_index(p, labels.len())?;
            if a == p || labels[a] != labels[p] || !seen.insert(labels[a]) {
                return Err(Error::InvalidParameter(format!("invalid n-pair entry ({a}, {p})")));
            }
        }
        Ok(())
    }
}

/// Anchor, positive and `K` negatives from `K` distinct other classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KPlet {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

impl KPlet {
    pub fn new(anchor: usize, positive: usize, negatives: Vec<usize>) -> Self {
        Self {
            anchor,
            positive,
            negatives,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstellationBatch {
    pub entries: Vec<KPlet>,
}

impl From<Vec<KPlet>> for ConstellationBatch {
    fn from(entries: Vec<KPlet>) -> Self {
        Self { entries }
    }
}

impl ConstellationBatch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, KPlet> {
        self.entries.iter()
    }

    pub fn validate(&self, labels: &[usize], k: usize) -> Result<()> {
        for (idx, e) in self.entries.iter().enumerate() {
            if e.negatives.len() != k {
                return Err(Error::MalformedKplet {
                    entry: idx,
                    expected: k,
                    got: e.negatives.len(),
                });
            }
            crate::losses::check_index(e.anchor, labels.len())?;
            crate::losses::check_index(e.positive, labels.len())?;
            let anchor_class = labels[e.anchor];
            if e.anchor == e.positive || labels[e.positive] != anchor_class {
                return Err(Error::InvalidParameter(format!(
                    "entry {idx}: bad anchor-positive pair"
                )));
            }
            let mut classes = std::collections::BTreeSet::new();
            for &n in &e.negatives {
                crate::losses::check_index(n, labels.len())?;
                if labels[n] == anchor_class || !classes.insert(labels[n]) {
                    return Err(Error::InvalidParameter(format!("entry {idx}: bad negative {n}")));
                }
            }
        }
        Ok(())
    }
}

/// Row positions grouped by class id, ascending, each group in row order.
fn group_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    groups
}

/// Draws `classes` distinct classes uniformly, then `per_class` distinct rows
/// of each. Output is grouped by drawn class, in draw order.
pub fn sample_balanced_batch(
    labels: &[usize],
    classes: usize,
    per_class: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    if classes == 0 || per_class == 0 {
        return Err(Error::InvalidParameter("batch needs P >= 1 and Q >= 1".into()));
    }
    let eligible: Vec<Vec<usize>> = group_by_class(labels)
        .into_values()
        .filter(|rows| rows.len() >= per_class)
        .collect();
    if eligible.len() < classes {
        return Err(Error::InsufficientData(format!(
            "{classes} classes with at least {per_class} samples requested, {} available",
            eligible.len()
        )));
    }
    let mut out = Vec::with_capacity(classes * per_class);
    for c in index::sample(rng, eligible.len(), classes) {
        let rows = &eligible[c];
        out.extend(index::sample(rng, rows.len(), per_class).into_iter().map(|i| rows[i]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningMode {
    /// `d(a,n) < d(a,p)`
    Hard,
    /// `d(a,p) <= d(a,n) < d(a,p) + alpha`
    #[default]
    SemiHard,
    /// `d(a,p) - d(a,n) + alpha > 0`
    AllValid,
}

impl MiningMode {
    pub fn accepts(self, d_ap: f64, d_an: f64, alpha: f64) -> bool {
        match self {
            MiningMode::Hard => d_an < d_ap,
            MiningMode::SemiHard => d_ap <= d_an && d_an < d_ap + alpha,
            MiningMode::AllValid => d_ap - d_an + alpha > 0.0,
        }
    }
}

/// Every `(a, p, n)` in the batch satisfying the mode's squared-distance
/// predicate, ordered by anchor, then positive, then negative.
pub fn mine_triplets(x: &Matrix, labels: &[usize], alpha: f64, mode: MiningMode) -> Result<TripletIndexSet> {
    if labels.len() != x.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", x.rows()),
            got: format!("{} labels", labels.len()),
        });
    }
    let d = pairwise_sq_dists(x);
    let n = x.rows();
    let mut entries = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            let d_ap = d.get(a, p);
            for neg in 0..n {
                if labels[neg] != labels[a] && mode.accepts(d_ap, d.get(a, neg), alpha) {
                    entries.push(Triplet::new(a, p, neg));
                }
            }
        }
    }
    Ok(TripletIndexSet { entries })
}

/// Semi-hard mining, falling back to hard and then to all-valid triplets when
/// the preceding mode finds nothing. Returns the mode that produced the set.
pub fn mine_with_fallback(x: &Matrix, labels: &[usize], alpha: f64) -> Result<(TripletIndexSet, MiningMode)> {
    let mut last = TripletIndexSet::default();
    for mode in [MiningMode::SemiHard, MiningMode::Hard, MiningMode::AllValid] {
        last = mine_triplets(x, labels, alpha, mode)?;
        if !last.is_empty() {
            return Ok((last, mode));
        }
    }
    Ok((last, MiningMode::AllValid))
}

/// One distinct anchor/positive pair per class, classes in ascending order.
pub fn build_npair_batch(labels: &[usize], rng: &mut SeededRng) -> Result<NPairBatch> {
    let groups = group_by_class(labels);
    let mut anchor_rows = Vec::with_capacity(groups.len());
    let mut positive_rows = Vec::with_capacity(groups.len());
    for (&class, rows) in &groups {
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: rows.len(),
                needed: 2,
            });
        }
        let picked = index::sample(rng, rows.len(), 2);
        anchor_rows.push(rows[picked.index(0)]);
        positive_rows.push(rows[picked.index(1)]);
    }
    if anchor_rows.len() < 2 {
        return Err(Error::NeedTwoClasses(anchor_rows.len()));
    }
    Ok(NPairBatch {
        anchor_rows,
        positive_rows,
    })
}

/// K-plets for every ordered anchor-positive pair within each class of the
/// batch. Each entry draws `k` distinct non-anchor classes uniformly without
/// replacement, then one row uniformly from each.
pub fn build_constellation_batch(labels: &[usize], k: usize, rng: &mut SeededRng) -> Result<ConstellationBatch> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be >= 1".into()));
    }
    let groups = group_by_class(labels);
    if groups.len() <= k {
        return Err(Error::KExceedsClasses {
            k,
            classes: groups.len(),
        });
    }
    let classes: Vec<usize> = groups.keys().copied().collect();
    let mut entries = Vec::new();
    let mut others = Vec::with_capacity(classes.len() - 1);
    for (&class, rows) in &groups {
        others.clear();
        others.extend(classes.iter().copied().filter(|&c| c != class));
        for &anchor in rows {
            for &positive in rows {
                if anchor == positive {
                    continue;
                }
                let negatives = index::sample(rng, others.len(), k)
                    .into_iter()
                    .map(|ci| {
                        let pool = &groups[&others[ci]];
                        pool[rng.random_range(0..pool.len())]
                    })
                    .collect();
                entries.push(KPlet {
                    anchor,
                    positive,
                    negatives,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::InsufficientData("no class in the batch has two samples".into()));
    }
    Ok(ConstellationBatch { entries })
}

/// Every within-class pair `(i, j)`, `i < j`, each matched by one dissimilar
/// pair `(i, n)` with `n` drawn uniformly from the other classes' rows.
pub fn build_contrastive_pairs(labels: &[usize], rng: &mut SeededRng) -> Result<Vec<ContrastivePair>> {
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        let foreign: Vec<usize> = (0..labels.len()).filter(|&n| labels[n] != labels[i]).collect();
        for j in (i + 1)..labels.len() {
            if labels[j] != labels[i] {
                continue;
            }
            pairs.push(ContrastivePair::new(i, j, PairKind::Similar));
            if !foreign.is_empty() {
                let n = foreign[rng.random_range(0..foreign.len())];
                pairs.push(ContrastivePair::new(i, n, PairKind::Dissimilar));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(pairs)
}
