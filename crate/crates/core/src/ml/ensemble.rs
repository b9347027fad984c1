use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{Binning, GrowContext, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    Rf,
    Gbm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfParams {
    pub tree: TreeParams,
    pub n_trees: usize,
    /// Draw rows with replacement; otherwise subsample without.
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            tree: TreeParams {
                max_depth: 11,
                min_rows: 4,
                col_sample_rate: 0.5,
                ..TreeParams::default()
            },
            n_trees: 50,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub tree: TreeParams,
    pub learn_rate: f64,
    pub learn_rate_annealing: f64,
    pub max_trees: usize,
    /// Validation scoring cadence, in trees.
    pub score_every: usize,
    /// Consecutive non-improving scores before stopping; 0 disables.
    pub stopping_rounds: usize,
    /// Required relative improvement of the validation MSE.
    pub stopping_tolerance: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            tree: TreeParams {
                max_depth: 3,
                min_rows: 8,
                ..TreeParams::default()
            },
            learn_rate: 0.1,
            learn_rate_annealing: 1.0,
            max_trees: 500,
            score_every: 10,
            stopping_rounds: 5,
            stopping_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFit {
    pub kind: EnsembleKind,
    pub trees: Vec<RegressionTree>,
    /// Starting value F₀ (GBM) added to every prediction.
    pub base: f64,
    /// Per-tree multipliers: 1/k for RF, the annealed learning rate for GBM.
    pub tree_weights: Vec<f64>,
    pub learn_rate: f64,
    pub learn_rate_annealing: f64,
    pub n_trees_used: usize,
    pub rng_seed: u64,
    /// (trees, validation MSE) at each GBM scoring round.
    pub score_history: Vec<(usize, f64)>,
}

impl EnsembleFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base
            + self
                .trees
                .iter()
                .zip(&self.tree_weights)
                .map(|(t, w)| w * t.predict_row(row))
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![self.base; x.nrows()];
        for (t, w) in self.trees.iter().zip(&self.tree_weights) {
            for (o, p) in out.iter_mut().zip(t.predict(x)) {
                *o += w * p;
            }
        }
        out
    }
}

fn check_training(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite training value".into()));
    }
    Ok(())
}

fn sample_size(rate: f64, n: usize) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n)
}

/// Tree-level column subset, ascending.
fn tree_columns(rate: f64, k: usize, rng: &mut Rng) -> Vec<usize> {
    let m = sample_size(rate, k);
    if m == k {
        return (0..k).collect();
    }
    let mut cols = sample(rng, k, m).into_vec();
    cols.sort_unstable();
    cols
}

/// Random forest; tree `i` draws from the stream keyed by `(seed, i)`.
pub fn fit_rf(x: &DMatrix<f64>, y: &[f64], params: &RfParams, seed: u64) -> Result<EnsembleFit> {
    params.tree.validate()?;
    check_training(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    let binning = Binning::fit(x, params.tree.n_bins);
    let data = binning.apply(x);
    let n = x.nrows();
    let m = sample_size(params.tree.row_sample_rate, n);

    let trees: Vec<RegressionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[i as u64]);
            let rows: Vec<u32> = if params.bootstrap {
                (0..m).map(|_| rng.random_range(0..n as u32)).collect()
            } else if m == n {
                (0..n as u32).collect()
            } else {
                let mut r: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|v| v as u32).collect();
                r.sort_unstable();
                r
            };
            let columns = tree_columns(params.tree.col_sample_rate_per_tree, x.ncols(), &mut rng);
            let ctx = GrowContext {
                data: &data,
                binning: &binning,
                y,
                params: &params.tree,
                columns: &columns,
            };
            ctx.grow(rows, &mut rng)
        })
        .collect();

    let k = trees.len();
    Ok(EnsembleFit {
        kind: EnsembleKind::Rf,
        tree_weights: vec![1.0 / k as f64; k],
        trees,
        base: 0.0,
        learn_rate: 1.0,
        learn_rate_annealing: 1.0,
        n_trees_used: k,
        rng_seed: seed,
        score_history: Vec::new(),
    })
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum::<f64>() / y.len() as f64
}

/// Gradient boosting under squared loss with optional early stopping on
/// the validation set. The returned ensemble is cut at the best-scoring
/// round.
pub fn fit_gbm(
    x: &DMatrix<f64>,
    y: &[f64],
    params: &GbmParams,
    validation: Option<(&DMatrix<f64>, &[f64])>,
    seed: u64,
) -> Result<EnsembleFit> {
    params.tree.validate()?;
    check_training(x, y)?;
    if !(params.learn_rate > 0.0 && params.learn_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "learn_rate must lie in (0, 1], got {}",
            params.learn_rate
        )));
    }
    if !(params.learn_rate_annealing > 0.0 && params.learn_rate_annealing <= 1.0) {
        return Err(Error::InvalidArgument("learn_rate_annealing must lie in (0, 1]".into()));
    }
    if params.max_trees == 0 || params.score_every == 0 {
        return Err(Error::InvalidArgument(
            "max_trees and score_every must be positive".into(),
        ));
    }
    let early_stopping = params.stopping_rounds > 0;
    let validation = match validation {
        Some((xv, yv)) => {
            if yv.is_empty() || xv.nrows() != yv.len() || xv.ncols() != x.ncols() {
                return Err(Error::InvalidArgument("malformed validation set".into()));
            }
            Some((xv, yv))
        }
        None if early_stopping => {
            return Err(Error::InvalidArgument("early stopping needs a validation set".into()));
        }
        None => None,
    };

    let binning = Binning::fit(x, params.tree.n_bins);
    let data = binning.apply(x);
    let val_data = validation.map(|(xv, _)| binning.apply(xv));
    let n = x.nrows();
    let m = sample_size(params.tree.row_sample_rate, n);
    let base = y.iter().sum::<f64>() / n as f64;

    let mut f = vec![base; n];
    let mut f_val = validation.map(|(_, yv)| vec![base; yv.len()]);
    let mut residual = vec![0.0; n];
    let mut trees = Vec::new();
    let mut weights = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut stall = 0;

    for stage in 0..params.max_trees {
        let mut rng = stream(seed, &[stage as u64]);
        for i in 0..n {
            residual[i] = y[i] - f[i];
        }
        let rows: Vec<u32> = if m == n {
            (0..n as u32).collect()
        } else {
            let mut r: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|v| v as u32).collect();
            r.sort_unstable();
            r
        };
        let columns = tree_columns(params.tree.col_sample_rate_per_tree, x.ncols(), &mut rng);
        let ctx = GrowContext {
            data: &data,
            binning: &binning,
            y: &residual,
            params: &params.tree,
            columns: &columns,
        };
        let tree = ctx.grow(rows, &mut rng);
        let rate = params.learn_rate * params.learn_rate_annealing.powi(stage as i32);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += rate * tree.predict_binned(&data, i);
        }
        if let (Some(fv), Some(vd)) = (f_val.as_mut(), val_data.as_ref()) {
            for (i, fi) in fv.iter_mut().enumerate() {
                *fi += rate * tree.predict_binned(vd, i);
            }
        }
        trees.push(tree);
        weights.push(rate);

        let used = trees.len();
        if let (Some(fv), Some((_, yv))) = (f_val.as_ref(), validation) {
            if used % params.score_every == 0 || used == params.max_trees {
                let s = mse(fv, yv);
                history.push((used, s));
                match best {
                    Some((_, b)) if !(s < b * (1.0 - params.stopping_tolerance)) => stall += 1,
                    _ => {
                        best = Some((used, s));
                        stall = 0;
                    }
                }
                if early_stopping && stall >= params.stopping_rounds {
                    break;
                }
            }
        }
    }

    if early_stopping {
        if let Some((keep, _)) = best {
            trees.truncate(keep);
            weights.truncate(keep);
        }
    }
    Ok(EnsembleFit {
        kind: EnsembleKind::Gbm,
        n_trees_used: trees.len(),
        trees,
        base,
        tree_weights: weights,
        learn_rate: params.learn_rate,
        learn_rate_annealing: params.learn_rate_annealing,
        rng_seed: seed,
        score_history: history,
    })
}
