use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::quantile_sorted;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum rows in each child of a split.
    pub min_rows: usize,
    pub n_bins: usize,
    /// Minimum SSE reduction of a split, relative to the parent node's SSE.
    pub min_split_improvement: f64,
    pub row_sample_rate: f64,
    /// Share of candidate columns examined at each split.
    pub col_sample_rate: f64,
    /// Share of columns available to each tree.
    pub col_sample_rate_per_tree: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 7,
            min_rows: 8,
            n_bins: 64,
            min_split_improvement: 1e-8,
            row_sample_rate: 1.0,
            col_sample_rate: 1.0,
            col_sample_rate_per_tree: 1.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        if self.min_rows == 0 {
            return Err(Error::InvalidArgument("min_rows must be at least 1".into()));
        }
        if !(2..=u16::MAX as usize).contains(&self.n_bins) {
            return Err(Error::InvalidArgument(format!("n_bins out of range: {}", self.n_bins)));
        }
        if !(self.min_split_improvement >= 0.0) {
            return Err(Error::InvalidArgument(
                "min_split_improvement must be non-negative".into(),
            ));
        }
        rate("row_sample_rate", self.row_sample_rate)?;
        rate("col_sample_rate", self.col_sample_rate)?;
        rate("col_sample_rate_per_tree", self.col_sample_rate_per_tree)
    }
}

/// Global quantile histogram: per column, increasing split thresholds.
/// A value falls in bin `b` when exactly `b` thresholds lie below it.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    edges: Vec<Vec<f64>>,
}

impl Binning {
    pub fn fit(x: &DMatrix<f64>, n_bins: usize) -> Self {
        let edges = x
            .column_iter()
            .map(|col| {
                let mut sorted: Vec<f64> = col.iter().copied().collect();
                sorted.sort_by(f64::total_cmp);
                let mut distinct = sorted.clone();
                distinct.dedup();
                let Some(&max) = distinct.last() else {
                    return Vec::new();
                };
                let mut e: Vec<f64> = if distinct.len() <= n_bins {
                    distinct
                } else {
                    (1..n_bins)
                        .map(|b| quantile_sorted(&sorted, b as f64 / n_bins as f64))
                        .collect()
                };
                e.dedup();
                e.retain(|&v| v < max);
                e
            })
            .collect();
        Self { edges }
    }

    pub fn edges(&self, col: usize) -> &[f64] {
        &self.edges[col]
    }

    pub fn n_bins(&self, col: usize) -> usize {
        self.edges[col].len() + 1
    }

    pub fn bin(&self, col: usize, v: f64) -> u16 {
        self.edges[col].partition_point(|&e| e < v) as u16
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> BinnedMatrix {
        let cols = (0..x.ncols())
            .map(|j| x.column(j).iter().map(|&v| self.bin(j, v)).collect())
            .collect();
        BinnedMatrix {
            n_rows: x.nrows(),
            cols,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    cols: Vec<Vec<u16>>,
}

impl BinnedMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.cols[col][row]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` (equivalently bin ≤ `bin`) go left.
    Split {
        feature: usize,
        bin: u16,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    fn leaf_index(&self, mut go_left: impl FnMut(usize, u16, f64) -> bool) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    bin,
                    threshold,
                    left,
                    right,
                } => i = if go_left(feature, bin, threshold) { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_index(|f, _, t| row[f] <= t)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| self.leaf_index(|f, _, t| x[(r, f)] <= t))
            .collect()
    }

    pub fn predict_binned(&self, x: &BinnedMatrix, row: usize) -> f64 {
        self.leaf_index(|f, b, _| x.get(row, f) <= b)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// (feature, threshold) of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        }
    }
}

/// Inputs shared by every node of one tree.
pub(crate) struct GrowContext<'a> {
    pub data: &'a BinnedMatrix,
    pub binning: &'a Binning,
    pub y: &'a [f64],
    pub params: &'a TreeParams,
    /// Columns this tree may split on, ascending.
    pub columns: &'a [usize],
}

struct Candidate {
    feature: usize,
    bin: u16,
    gain: f64,
}

impl GrowContext<'_> {
    pub fn grow(&self, rows: Vec<u32>, rng: &mut Rng) -> RegressionTree {
        let mut nodes = Vec::new();
        self.grow_node(&mut nodes, rows, 0, rng);
        RegressionTree { nodes }
    }

    fn grow_node(&self, nodes: &mut Vec<Node>, rows: Vec<u32>, depth: usize, rng: &mut Rng) -> usize {
        let id = nodes.len();
        let (sum, sum_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
            let v = self.y[r as usize];
            (s + v, q + v * v)
        });
        let n = rows.len() as f64;
        let mean = sum / n;
        nodes.push(Node::Leaf(mean));

        let p = self.params;
        if depth >= p.max_depth || rows.len() < 2 * p.min_rows {
            return id;
        }
        let sse = (sum_sq - sum * sum / n).max(0.0);
        if sse <= 0.0 {
            return id;
        }
        let Some(best) = self.best_split(&rows, sum, rng) else {
            return id;
        };
        if best.gain <= 1e-12 * sse || best.gain < p.min_split_improvement * sse {
            return id;
        }

        let col = &self.data.cols[best.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.into_iter().partition(|&r| col[r as usize] <= best.bin);
        let left = self.grow_node(nodes, left_rows, depth + 1, rng);
        let right = self.grow_node(nodes, right_rows, depth + 1, rng);
        nodes[id] = Node::Split {
            feature: best.feature,
            bin: best.bin,
            threshold: self.binning.edges(best.feature)[best.bin as usize],
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[u32], total: f64, rng: &mut Rng) -> Option<Candidate> {
        let k = self.columns.len();
        let mtry = ((self.params.col_sample_rate * k as f64).round() as usize).clamp(1, k);
        let mut chosen: Vec<usize> = if mtry < k {
            sample(rng, k, mtry).into_iter().map(|i| self.columns[i]).collect()
        } else {
            self.columns.to_vec()
        };
        chosen.sort_unstable();

        let n = rows.len();
        let min_rows = self.params.min_rows;
        let parent = total * total / n as f64;
        let mut best: Option<Candidate> = None;
        let mut sums = Vec::new();
        let mut counts = Vec::new();
        for feature in chosen {
            let nb = self.binning.n_bins(feature);
            if nb < 2 {
                continue;
            }
            sums.clear();
            sums.resize(nb, 0.0);
            counts.clear();
            counts.resize(nb, 0usize);
            let col = &self.data.cols[feature];
            for &r in rows {
                let b = col[r as usize] as usize;
                sums[b] += self.y[r as usize];
                counts[b] += 1;
            }
            let (mut sl, mut nl) = (0.0, 0usize);
            for b in 0..nb - 1 {
                sl += sums[b];
                nl += counts[b];
                let nr = n - nl;
                if nl < min_rows {
                    continue;
                }
                if nr < min_rows {
                    break;
                }
                if counts[b] == 0 && b > 0 {
                    // same partition as the previous boundary
                    continue;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                if best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate {
                        feature,
                        bin: b as u16,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Single regression tree on all rows of `x`.
pub fn fit_regression_tree(x: &DMatrix<f64>, y: &[f64], params: &TreeParams, rng: &mut Rng) -> Result<RegressionTree> {
    params.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let binning = Binning::fit(x, params.n_bins);
    let data = binning.apply(x);
    let columns: Vec<usize> = (0..x.ncols()).collect();
    let ctx = GrowContext {
        data: &data,
        binning: &binning,
        y,
        params,
        columns: &columns,
    };
    Ok(ctx.grow((0..x.nrows() as u32).collect(), rng))
}
