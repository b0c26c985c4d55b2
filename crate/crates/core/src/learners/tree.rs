//! Axis-aligned decision trees grown level by level with exact split search.
//!
//! Features are read column-wise from [`Columns`], which keeps only nonzero
//! entries sorted by value; the zero-valued rows of a node are handled as
//! one implicit group, so sparse TF-IDF input costs O(nnz) per level.
//! The same builder serves the regression trees of gradient boosting and
//! the classification stumps of AdaBoost through the [`Target`] trait.

use serde::{Deserialize, Serialize};

use crate::vectorize::{FeatureMatrix, Row};

/// Column-major nonzero entries of a feature matrix, each column sorted by
/// value (ties by row).
#[derive(Debug, Clone)]
pub struct Columns {
    columns: Vec<Vec<(u32, f64)>>,
    rows: usize,
}

impl Columns {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut columns: Vec<Vec<(u32, f64)>> = vec![Vec::new(); x.dim()];
        for (i, row) in x.iter_rows().enumerate() {
            row.for_each(|j, v| {
                if v != 0.0 {
                    columns[j].push((i as u32, v));
                }
            });
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Columns {
            columns,
            rows: x.rows(),
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<L> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: L },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    nodes: Vec<Node<L>>,
}

/// Regression tree with real-valued leaves.
pub type RegressionTree = Tree<f64>;

/// Classification tree whose leaves hold a class index.
pub type ClassTree = Tree<usize>;

impl<L> Tree<L> {
    pub fn leaf(value: L) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: Row<'_>) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node<L>] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = &L> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(value),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// What a tree is fitted to: how rows aggregate into node statistics, how
/// good a node is, and what a leaf predicts.
pub trait Target {
    type Stats: Clone;
    type Leaf;

    fn empty(&self) -> Self::Stats;
    fn add_row(&self, stats: &mut Self::Stats, row: usize);
    fn merge(&self, into: &mut Self::Stats, other: &Self::Stats);
    /// `total - part`
    fn minus(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn count(&self, stats: &Self::Stats) -> usize;
    /// Node quality; a split's gain is `score(left) + score(right) - score(parent)`.
    fn score(&self, stats: &Self::Stats) -> f64;
    /// Score of the complement `total - left`, without materializing it.
    fn score_rest(&self, total: &Self::Stats, left: &Self::Stats) -> f64 {
        self.score(&self.minus(total, left))
    }
    fn leaf(&self, stats: &Self::Stats) -> Self::Leaf;
}

/// Least-squares fit to per-row targets; leaves predict the mean.
pub struct SquaredError<'a> {
    pub targets: &'a [f64],
}

impl Target for SquaredError<'_> {
    type Stats = (f64, usize);
    type Leaf = f64;

    fn empty(&self) -> (f64, usize) {
        (0.0, 0)
    }
    fn add_row(&self, s: &mut (f64, usize), row: usize) {
        s.0 += self.targets[row];
        s.1 += 1;
    }
    fn merge(&self, into: &mut (f64, usize), other: &(f64, usize)) {
        into.0 += other.0;
        into.1 += other.1;
    }
    fn minus(&self, total: &(f64, usize), part: &(f64, usize)) -> (f64, usize) {
        (total.0 - part.0, total.1 - part.1)
    }
    fn count(&self, s: &(f64, usize)) -> usize {
        s.1
    }
    fn score(&self, s: &(f64, usize)) -> f64 {
        if s.1 == 0 {
            0.0
        } else {
            s.0 * s.0 / s.1 as f64
        }
    }
    fn leaf(&self, s: &(f64, usize)) -> f64 {
        if s.1 == 0 {
            0.0
        } else {
            s.0 / s.1 as f64
        }
    }
}

/// Weighted misclassification; leaves predict the heaviest class (ties to
/// the lowest index) and a node's score is the weight it classifies right.
pub struct WeightedClasses<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub classes: usize,
}

impl Target for WeightedClasses<'_> {
    type Stats = (Vec<f64>, usize);
    type Leaf = usize;

    fn empty(&self) -> Self::Stats {
        (vec![0.0; self.classes], 0)
    }
    fn add_row(&self, s: &mut Self::Stats, row: usize) {
        s.0[self.labels[row]] += self.weights[row];
        s.1 += 1;
    }
    fn merge(&self, into: &mut Self::Stats, other: &Self::Stats) {
        into.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a += b);
        into.1 += other.1;
    }
    fn minus(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats {
        (
            total.0.iter().zip(&part.0).map(|(a, b)| a - b).collect(),
            total.1 - part.1,
        )
    }
    fn count(&self, s: &Self::Stats) -> usize {
        s.1
    }
    fn score(&self, s: &Self::Stats) -> f64 {
        s.0.iter().copied().fold(0.0, f64::max)
    }
    fn score_rest(&self, total: &Self::Stats, left: &Self::Stats) -> f64 {
        total
            .0
            .iter()
            .zip(&left.0)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
    }
    fn leaf(&self, s: &Self::Stats) -> usize {
        super::argmax(&s.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

const NO_SLOT: u32 = u32::MAX;
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Pending<S> {
    node: usize,
    rows: Vec<usize>,
    stats: S,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Grow a tree over all rows of `x` (whose column view is `columns`).
pub fn grow<T: Target>(
    x: &FeatureMatrix,
    columns: &Columns,
    target: &T,
    params: GrowParams,
) -> Tree<T::Leaf> {
    let n = columns.rows();
    let mut root = target.empty();
    for r in 0..n {
        target.add_row(&mut root, r);
    }
    let mut nodes: Vec<Node<T::Leaf>> = Vec::new();
    // placeholder, overwritten once the root is resolved
    nodes.push(Node::Split {
        feature: 0,
        threshold: 0.0,
        left: 0,
        right: 0,
    });
    let mut pending = vec![Pending {
        node: 0,
        rows: (0..n).collect(),
        stats: root,
    }];
    let mut slot_of = vec![NO_SLOT; n];
    let min_leaf = params.min_leaf.max(1);

    for _depth in 0..params.max_depth {
        if pending.is_empty() {
            break;
        }
        let (splittable, done): (Vec<_>, Vec<_>) = pending
            .into_iter()
            .partition(|p| target.count(&p.stats) >= 2 * min_leaf);
        for p in done {
            nodes[p.node] = Node::Leaf {
                value: target.leaf(&p.stats),
            };
        }
        pending = splittable;
        if pending.is_empty() {
            break;
        }
        for (s, p) in pending.iter().enumerate() {
            for &r in &p.rows {
                slot_of[r] = s as u32;
            }
        }
        let best = best_splits(columns, target, &pending, &slot_of, min_leaf);
        for p in &pending {
            for &r in &p.rows {
                slot_of[r] = NO_SLOT;
            }
        }

        let mut next = Vec::new();
        for (p, cand) in pending.into_iter().zip(best) {
            let Some(c) = cand.filter(|c| c.gain > MIN_GAIN) else {
                nodes[p.node] = Node::Leaf {
                    value: target.leaf(&p.stats),
                };
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = p
                .rows
                .iter()
                .partition(|&&r| x.row(r).get(c.feature) <= c.threshold);
            let mut left_stats = target.empty();
            for &r in &left_rows {
                target.add_row(&mut left_stats, r);
            }
            let mut right_stats = target.empty();
            for &r in &right_rows {
                target.add_row(&mut right_stats, r);
            }
            let (left, right) = (nodes.len(), nodes.len() + 1);
            for _ in 0..2 {
                nodes.push(Node::Leaf {
                    value: target.leaf(&target.empty()),
                });
            }
            nodes[p.node] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right,
            };
            next.push(Pending {
                node: left,
                rows: left_rows,
                stats: left_stats,
            });
            next.push(Pending {
                node: right,
                rows: right_rows,
                stats: right_stats,
            });
        }
        pending = next;
    }
    for p in pending {
        nodes[p.node] = Node::Leaf {
            value: target.leaf(&p.stats),
        };
    }
    Tree { nodes }
}

fn best_splits<T: Target>(
    columns: &Columns,
    target: &T,
    pending: &[Pending<T::Stats>],
    slot_of: &[u32],
    min_leaf: usize,
) -> Vec<Option<Candidate>> {
    let slots = pending.len();
    let parent_score: Vec<f64> = pending.iter().map(|p| target.score(&p.stats)).collect();
    let mut best: Vec<Option<Candidate>> = vec![None; slots];

    for (feature, entries) in columns.columns.iter().enumerate() {
        // rows whose value is zero form one implicit group per node
        let mut explicit: Vec<T::Stats> = vec![target.empty(); slots];
        for &(r, _) in entries {
            let s = slot_of[r as usize];
            if s != NO_SLOT {
                target.add_row(&mut explicit[s as usize], r as usize);
            }
        }
        let zeros: Vec<T::Stats> = pending
            .iter()
            .zip(&explicit)
            .map(|(p, e)| target.minus(&p.stats, e))
            .collect();
        drop(explicit);

        let mut left: Vec<T::Stats> = vec![target.empty(); slots];
        let mut last: Vec<Option<f64>> = vec![None; slots];
        let mut consider = |s: usize, value: f64, left: &T::Stats, last: &Option<f64>| {
            let Some(prev) = *last else { return };
            if value <= prev {
                return;
            }
            let n_left = target.count(left);
            let n_total = target.count(&pending[s].stats);
            if n_left < min_leaf || n_total - n_left < min_leaf {
                return;
            }
            let gain = target.score(left) + target.score_rest(&pending[s].stats, left)
                - parent_score[s];
            if best[s].is_none_or(|b| gain > b.gain) {
                best[s] = Some(Candidate {
                    gain,
                    feature,
                    threshold: midpoint(prev, value),
                });
            }
        };

        let mut zeros_done = false;
        let visit_zeros = |left: &mut Vec<T::Stats>,
                               last: &mut Vec<Option<f64>>,
                               consider: &mut dyn FnMut(usize, f64, &T::Stats, &Option<f64>)| {
            for s in 0..slots {
                if target.count(&zeros[s]) > 0 {
                    consider(s, 0.0, &left[s], &last[s]);
                    target.merge(&mut left[s], &zeros[s]);
                    last[s] = Some(0.0);
                }
            }
        };
        for &(r, v) in entries {
            if !zeros_done && v > 0.0 {
                visit_zeros(&mut left, &mut last, &mut consider);
                zeros_done = true;
            }
            let s = slot_of[r as usize];
            if s == NO_SLOT {
                continue;
            }
            let s = s as usize;
            consider(s, v, &left[s], &last[s]);
            target.add_row(&mut left[s], r as usize);
            last[s] = Some(v);
        }
        if !zeros_done {
            visit_zeros(&mut left, &mut last, &mut consider);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::SparseRow;

    fn sse(targets: &[f64]) -> f64 {
        let m = targets.iter().sum::<f64>() / targets.len() as f64;
        targets.iter().map(|t| (t - m).powi(2)).sum()
    }

    /// Exhaustive best single split by direct enumeration of thresholds.
    fn brute_force_stump(rows: &[Vec<f64>], targets: &[f64], min_leaf: usize) -> f64 {
        let total = sse(targets);
        let mut best = 0.0f64;
        for j in 0..rows[0].len() {
            let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let l: Vec<f64> = (0..rows.len()).filter(|&i| rows[i][j] <= t).map(|i| targets[i]).collect();
                let r: Vec<f64> = (0..rows.len()).filter(|&i| rows[i][j] > t).map(|i| targets[i]).collect();
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                best = best.max(total - sse(&l) - sse(&r));
            }
        }
        best
    }

    fn stump_reduction(x: &FeatureMatrix, targets: &[f64], min_leaf: usize) -> f64 {
        let cols = Columns::new(x);
        let tree = grow(
            x,
            &cols,
            &SquaredError { targets },
            GrowParams {
                max_depth: 1,
                min_leaf,
            },
        );
        let preds: Vec<f64> = x.iter_rows().map(|r| *tree.predict(r)).collect();
        let resid: f64 = targets.iter().zip(&preds).map(|(t, p)| (t - p).powi(2)).sum();
        sse(targets) - resid
    }

    #[test]
    fn stump_matches_brute_force_on_mixed_sign_sparse_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(4..25);
            let d = rng.random_range(1..5);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            if rng.random_bool(0.4) {
                                0.0
                            } else {
                                rng.random_range(-3i32..4) as f64
                            }
                        })
                        .collect()
                })
                .collect();
            let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dense = FeatureMatrix::from_rows(rows.clone()).unwrap();
            let sparse = FeatureMatrix::sparse(
                dense.ids().to_vec(),
                d,
                rows.iter()
                    .map(|r| {
                        SparseRow::from_pairs(
                            r.iter().enumerate().map(|(j, &v)| (j as u32, v)).collect(),
                        )
                    })
                    .collect(),
            )
            .unwrap();
            for min_leaf in [1, 2] {
                let oracle = brute_force_stump(&rows, &targets, min_leaf);
                let got_dense = stump_reduction(&dense, &targets, min_leaf);
                let got_sparse = stump_reduction(&sparse, &targets, min_leaf);
                assert!((oracle - got_dense).abs() < 1e-9, "{oracle} vs {got_dense}");
                assert!((oracle - got_sparse).abs() < 1e-9, "{oracle} vs {got_sparse}");
            }
        }
    }

    #[test]
    fn depth_and_min_leaf_are_respected() {
        let rows: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let x = FeatureMatrix::from_rows(rows).unwrap();
        let cols = Columns::new(&x);
        let t = grow(
            &x,
            &cols,
            &SquaredError { targets: &targets },
            GrowParams {
                max_depth: 3,
                min_leaf: 3,
            },
        );
        assert!(t.depth() <= 3);
        assert!(t.leaves().count() <= 8);
        for leaf_rows in {
            let mut counts = std::collections::HashMap::new();
            for r in x.iter_rows() {
                *counts.entry(t.predict(r).to_bits()).or_insert(0) += 1;
            }
            counts.into_values()
        } {
            assert!(leaf_rows >= 3);
        }
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let x = FeatureMatrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let cols = Columns::new(&x);
        let t = grow(
            &x,
            &cols,
            &SquaredError {
                targets: &[0.5; 4],
            },
            GrowParams {
                max_depth: 3,
                min_leaf: 1,
            },
        );
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(*t.predict(x.row(0)), 0.5);
    }

    #[test]
    fn weighted_stump_separates_classes() {
        let x = FeatureMatrix::from_rows(vec![vec![-1.0], vec![-0.5], vec![0.5], vec![2.0]]).unwrap();
        let labels = [0, 0, 1, 1];
        let w = [0.25; 4];
        let t = grow(
            &x,
            &Columns::new(&x),
            &WeightedClasses {
                labels: &labels,
                weights: &w,
                classes: 2,
            },
            GrowParams {
                max_depth: 1,
                min_leaf: 1,
            },
        );
        let preds: Vec<usize> = x.iter_rows().map(|r| *t.predict(r)).collect();
        assert_eq!(preds, labels);
    }
}
