use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::grid::mean_squared_error;
use crate::error::{Error, Result};
use crate::rng::stream;

pub const PERMUTATIONS: usize = 5;
pub const MIN_VALIDATION_ROWS: usize = 30;

pub trait Predictor {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64>;
}

/// Adapts a closure to [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&DMatrix<f64>) -> Vec<f64>> Predictor for FnPredictor<F> {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (self.0)(x)
    }
}

/// Importance of each column in one window and the resulting ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowImportance {
    pub variables: Vec<String>,
    /// Mean validation-MSE increase over the permutations.
    pub importance: Vec<f64>,
    /// 1 = most important; ties keep column order.
    pub ranks: Vec<usize>,
}

/// Ranks in descending order of `importance`, ties by position.
pub fn rank_descending(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]));
    let mut ranks = vec![0; importance.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    ranks
}

/// Permutation importance on a validation window. Constant columns get
/// importance 0 without being permuted.
pub fn permutation_importance<P: Predictor + ?Sized>(
    model: &P,
    x: &DMatrix<f64>,
    y: &[f64],
    variables: &[String],
    seed: u64,
) -> Result<WindowImportance> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if variables.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: variables.len(),
        });
    }
    if y.len() < MIN_VALIDATION_ROWS {
        return Err(Error::InvalidArgument(format!(
            "permutation importance needs at least {MIN_VALIDATION_ROWS} validation rows, got {}",
            y.len()
        )));
    }
    let base = mean_squared_error(&model.predict(x), y);
    let mut importance = vec![0.0; x.ncols()];
    for (j, imp) in importance.iter_mut().enumerate() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        if col.iter().all(|&v| v == col[0]) {
            continue;
        }
        let mut rng = stream(seed, &[j as u64]);
        let mut xp = x.clone();
        let mut total = 0.0;
        for _ in 0..PERMUTATIONS {
            let mut perm = col.clone();
            perm.shuffle(&mut rng);
            xp.column_mut(j).copy_from_slice(&perm);
            total += mean_squared_error(&model.predict(&xp), y) - base;
        }
        *imp = total / PERMUTATIONS as f64;
    }
    Ok(WindowImportance {
        variables: variables.to_vec(),
        ranks: rank_descending(&importance),
        importance,
    })
}

/// Ranks of each variable averaged over windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub variables: Vec<String>,
    pub mean_rank: Vec<f64>,
    /// `ranks_by_window[w][j]`
    pub ranks_by_window: Vec<Vec<usize>>,
}

impl ImportanceReport {
    /// Variable indices ordered by mean rank, ties by column order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.variables.len()).collect();
        idx.sort_by(|&a, &b| self.mean_rank[a].total_cmp(&self.mean_rank[b]));
        idx
    }
}

pub fn aggregate_importance(windows: &[WindowImportance]) -> Result<ImportanceReport> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidArgument("no importance windows".into()))?;
    if windows.iter().any(|w| w.variables != first.variables) {
        return Err(Error::InvalidArgument(
            "importance windows use different variables".into(),
        ));
    }
    let k = first.variables.len();
    let mut mean_rank = vec![0.0; k];
    for w in windows {
        for (m, &r) in mean_rank.iter_mut().zip(&w.ranks) {
            *m += r as f64;
        }
    }
    mean_rank.iter_mut().for_each(|m| *m /= windows.len() as f64);
    Ok(ImportanceReport {
        variables: first.variables.clone(),
        mean_rank,
        ranks_by_window: windows.iter().map(|w| w.ranks.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_a_permutation_with_stable_ties() {
        assert_eq!(rank_descending(&[0.5, 2.0, 0.5, -1.0]), vec![2, 1, 3, 4]);
    }

    #[test]
    fn unused_and_constant_columns_score_zero() {
        let x = DMatrix::from_fn(40, 3, |i, j| match j {
            0 => i as f64,
            1 => ((i * 7) % 11) as f64,
            _ => 4.0,
        });
        let y: Vec<f64> = (0..40).map(|i| 2.0 * i as f64).collect();
        let model = FnPredictor(|x: &DMatrix<f64>| x.column(0).iter().map(|v| 2.0 * v).collect());
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let imp = permutation_importance(&model, &x, &y, &names, 3).unwrap();
        assert!(imp.importance[0] > 0.0);
        assert_eq!(imp.importance[1], 0.0);
        assert_eq!(imp.importance[2], 0.0);
        assert_eq!(imp.ranks, vec![1, 2, 3]);
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(10, 1, 1.0);
        let model = FnPredictor(|x: &DMatrix<f64>| vec![0.0; x.nrows()]);
        assert!(permutation_importance(&model, &x, &[0.0; 10], &["a".into()], 0).is_err());
    }
}
