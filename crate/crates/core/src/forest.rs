//! Random forest regression: bagged CART trees with variance-reduction
//! splits over a random feature subset at every node.
//!
//! Each tree draws from its own substream of `(seed, tree index)`, so a
//! forest is the same whether its trees are fitted in sequence or in
//! parallel.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Dataset;
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Bootstrap sample size as a fraction of the rows, drawn with replacement.
    pub row_fraction: f64,
    /// Fraction of features considered at each split (at least one).
    pub feature_fraction: f64,
    pub min_leaf: usize,
    /// `None` grows trees until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            row_fraction: 0.66,
            feature_fraction: 0.33,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("forest.{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("row_fraction", self.row_fraction)?;
        unit("feature_fraction", self.feature_fraction)?;
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("forest.n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("forest.min_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("forest.max_depth must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(feature_fraction * p)`, clamped to `1..=p`.
    pub fn features_per_split(&self, p: usize) -> usize {
        (libm::ceil(self.feature_fraction * p as f64) as usize).clamp(1, p.max(1))
    }

    /// `ceil(row_fraction * n)`.
    pub fn sample_size(&self, n: usize) -> usize {
        (libm::ceil(self.row_fraction * n as f64) as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `value <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64, count: usize },
}

/// Binary regression tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Checks that the arena is a binary tree rooted at node 0.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("tree without nodes"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for node in &nodes {
            match *node {
                Node::Split { left, right, threshold, .. } => {
                    if left >= nodes.len() || right >= nodes.len() || left == 0 || right == 0 || left == right {
                        return Err(Error::Malformed("split node has invalid children".into()));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Malformed("non-finite split threshold".into()));
                    }
                    parents[left] += 1;
                    parents[right] += 1;
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::Malformed("non-finite leaf value".into()));
                    }
                }
            }
        }
        if parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::Malformed("every non-root node needs exactly one parent".into()));
        }
        // Single parents and no edge into the root leave no room for a cycle
        // unreachable from the root, except a detached loop; rule that out.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if core::mem::replace(&mut seen[i], true) {
                return Err(Error::Malformed("tree contains a cycle".into()));
            }
            if let Node::Split { left, right, .. } = nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Malformed("tree has unreachable nodes".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
                Node::Leaf { value, .. } => return value,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { value, count } => Some((value, count)),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Sorted `(value, local row)` entry of one feature.
#[derive(Clone, Copy)]
struct Entry {
    value: f64,
    row: u32,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a, R> {
    y: Vec<f64>,
    w: Vec<f64>,
    sorted: Vec<Vec<Entry>>,
    goes_left: Vec<bool>,
    scratch: Vec<Entry>,
    nodes: Vec<Node>,
    params: &'a ForestParams,
    per_split: usize,
    rng: &'a mut R,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn leaf(&mut self, id: usize, value: f64, weight: f64) {
        self.nodes[id] = Node::Leaf { value, count: libm::round(weight) as usize };
    }

    fn choose_features(&mut self) -> Vec<usize> {
        let p = self.sorted.len();
        if self.per_split >= p {
            return (0..p).collect();
        }
        let mut chosen = rand::seq::index::sample(self.rng, p, self.per_split).into_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&self, feature: usize, start: usize, end: usize, mean: f64, total: f64, weight: f64) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf as f64;
        let entries = &self.sorted[feature][start..end];
        let base = total * total / weight;
        let mut best: Option<Candidate> = None;
        let mut w_left = 0.0;
        let mut s_left = 0.0;
        for pair in entries.windows(2) {
            let (cur, next) = (pair[0], pair[1]);
            let r = cur.row as usize;
            w_left += self.w[r];
            s_left += self.w[r] * (self.y[r] - mean);
            if !(cur.value < next.value) {
                continue;
            }
            let w_right = weight - w_left;
            if w_left < min_leaf || w_right < min_leaf {
                continue;
            }
            let s_right = total - s_left;
            let gain = s_left * s_left / w_left + s_right * s_right / w_right - base;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = cur.value + (next.value - cur.value) / 2.0;
                if threshold >= next.value {
                    threshold = cur.value;
                }
                best = Some(Candidate { gain, feature, threshold });
            }
        }
        best
    }

    /// Stable partition of every feature's slice into left rows then right rows.
    fn partition(&mut self, start: usize, end: usize) -> usize {
        let mut n_left = 0;
        let scratch = &mut self.scratch[..end - start];
        for list in &mut self.sorted {
            let mut write = start;
            let mut spill = 0;
            for i in start..end {
                let e = list[i];
                let left = self.goes_left[e.row as usize];
                list[write] = e;
                scratch[spill] = e;
                write += usize::from(left);
                spill += usize::from(!left);
            }
            list[write..end].copy_from_slice(&scratch[..spill]);
            n_left = write - start;
        }
        n_left
    }

    fn build(&mut self) {
        let n = self.y.len();
        self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
        let mut stack = vec![(0usize, 0usize, n, 0usize)];
        while let Some((id, start, end, depth)) = stack.pop() {
            let rows = &self.sorted[0][start..end];
            let mut weight = 0.0;
            let mut sum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for e in rows {
                let r = e.row as usize;
                weight += self.w[r];
                sum += self.w[r] * self.y[r];
                lo = lo.min(self.y[r]);
                hi = hi.max(self.y[r]);
            }
            let mean = sum / weight;
            let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
            if lo == hi || depth_reached || weight < 2.0 * self.params.min_leaf as f64 {
                let value = if lo == hi { lo } else { mean };
                self.leaf(id, value, weight);
                continue;
            }
            let (total, sse) = rows.iter().fold((0.0, 0.0), |(t, s), e| {
                let r = e.row as usize;
                let d = self.y[r] - mean;
                (t + self.w[r] * d, s + self.w[r] * d * d)
            });

            let mut best: Option<Candidate> = None;
            for feature in self.choose_features() {
                if let Some(c) = self.best_split(feature, start, end, mean, total, weight) {
                    let margin = 1e-12 * best.as_ref().map_or(0.0, |b| b.gain.abs());
                    if best.as_ref().is_none_or(|b| c.gain > b.gain + margin) {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best.filter(|b| b.gain > 1e-12 * sse) else {
                self.leaf(id, mean, weight);
                continue;
            };

            for e in &self.sorted[best.feature][start..end] {
                self.goes_left[e.row as usize] = e.value <= best.threshold;
            }
            let mid = start + self.partition(start, end);
            let left = self.nodes.len();
            let right = left + 1;
            self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
            self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
            self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
            stack.push((right, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
    }
}

/// Per-feature row order of a dataset, sorted once and shared by every tree.
#[derive(Debug, Clone)]
pub struct FeatureOrder {
    order: Vec<Vec<u32>>,
    rows: usize,
}

impl FeatureOrder {
    pub fn new(ds: &Dataset) -> Self {
        let x = ds.features();
        let order = (0..ds.n_features())
            .map(|f| {
                let mut idx: Vec<u32> = (0..ds.len() as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order, rows: ds.len() }
    }
}

/// Fits one tree on `rows` of `ds`; repeated indices act as weights.
///
/// At every node a random subset of `ceil(feature_fraction * p)` features is
/// searched for the midpoint threshold minimising the children's summed
/// squared deviation. Ties go to the lowest feature index, then the smallest
/// threshold.
pub fn fit_tree<R: Rng>(ds: &Dataset, rows: &[usize], params: &ForestParams, rng: &mut R) -> Result<RegressionTree> {
    fit_tree_ordered(ds, &FeatureOrder::new(ds), rows, params, rng)
}

/// [`fit_tree`] with a precomputed [`FeatureOrder`] of `ds`.
pub fn fit_tree_ordered<R: Rng>(
    ds: &Dataset,
    order: &FeatureOrder,
    rows: &[usize],
    params: &ForestParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    params.validate()?;
    if rows.is_empty() || ds.is_empty() {
        return Err(Error::Empty("rows to fit a tree on"));
    }
    if order.rows != ds.len() || order.order.len() != ds.n_features() {
        return Err(Error::Malformed("feature order does not match dataset".into()));
    }
    let mut counts = vec![0u32; ds.len()];
    for &r in rows {
        *counts.get_mut(r).ok_or(Error::Malformed(format!("row {r} out of range")))? += 1;
    }
    let p = ds.n_features();
    if p == 0 {
        let sample: Vec<f64> = rows.iter().map(|&r| ds.target()[r]).collect();
        let value = sample.iter().sum::<f64>() / sample.len() as f64;
        return Ok(RegressionTree { nodes: vec![Node::Leaf { value, count: rows.len() }] });
    }
    let mut local_of = vec![u32::MAX; ds.len()];
    let mut local = Vec::new();
    for (r, &c) in counts.iter().enumerate() {
        if c > 0 {
            local_of[r] = local.len() as u32;
            local.push(r);
        }
    }
    let x = ds.features();
    let sorted = order
        .order
        .iter()
        .enumerate()
        .map(|(f, idx)| {
            idx.iter()
                .filter(|&&r| local_of[r as usize] != u32::MAX)
                .map(|&r| Entry { value: x.get(r as usize, f), row: local_of[r as usize] })
                .collect()
        })
        .collect();
    let mut builder = TreeBuilder {
        y: local.iter().map(|&r| ds.target()[r]).collect(),
        w: local.iter().map(|&r| f64::from(counts[r])).collect(),
        sorted,
        goes_left: vec![false; local.len()],
        scratch: vec![Entry { value: 0.0, row: 0 }; local.len()],
        nodes: Vec::new(),
        params,
        per_split: params.features_per_split(p),
        rng,
    };
    builder.build();
    Ok(RegressionTree { nodes: builder.nodes })
}

/// Fits tree `index` of the forest described by `params`: a bootstrap sample
/// of `ceil(row_fraction * n)` rows drawn with replacement, then [`fit_tree`].
pub fn fit_forest_tree(ds: &Dataset, order: &FeatureOrder, params: &ForestParams, index: usize) -> Result<RegressionTree> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset to fit"));
    }
    let mut rng = substream(params.seed, Stream::Tree, index as u64);
    let n = ds.len();
    let rows: Vec<usize> = (0..params.sample_size(n)).map(|_| rng.random_range(0..n)).collect();
    fit_tree_ordered(ds, order, &rows, params, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    params: ForestParams,
    column_names: Vec<String>,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<RegressionTree>, params: ForestParams, column_names: Vec<String>) -> Result<Self> {
        params.validate()?;
        if trees.len() != params.n_trees {
            return Err(Error::Malformed(format!("expected {} trees, got {}", params.n_trees, trees.len())));
        }
        if let Some(f) = trees.iter().filter_map(RegressionTree::max_feature).max() {
            if f >= column_names.len() {
                return Err(Error::ColumnMismatch { expected: column_names.len(), got: f + 1 });
            }
        }
        Ok(Self { trees, params, column_names })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Mean of the trees' leaf values for every row.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.cols() != self.column_names.len() && features.rows() > 0 {
            return Err(Error::ColumnMismatch { expected: self.column_names.len(), got: features.cols() });
        }
        let n = self.trees.len() as f64;
        Ok(features
            .iter_rows()
            .map(|row| self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / n)
            .collect())
    }
}

pub fn fit_rf(ds: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    let order = FeatureOrder::new(ds);
    let trees = (0..params.n_trees)
        .map(|i| fit_forest_tree(ds, &order, params, i))
        .collect::<Result<Vec<_>>>()?;
    ForestModel::from_trees(trees, params.clone(), ds.column_names().to_vec())
}
