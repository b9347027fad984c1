use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ensemble::{fit_gbm, fit_rf, GbmParams, RfParams};
use super::mlp::{fit_mlp, MlpParams};
use super::{MlKind, MlModel};
use crate::error::{Error, Result};
use crate::rng::derive_key;

const TREE_KEYS: [&str; 7] = [
    "max_depth",
    "min_rows",
    "n_bins",
    "min_split_improvement",
    "row_sample_rate",
    "col_sample_rate",
    "col_sample_rate_per_tree",
];
const RF_KEYS: [&str; 1] = ["n_trees"];
const GBM_KEYS: [&str; 3] = ["learn_rate", "learn_rate_annealing", "max_trees"];
const MLP_KEYS: [&str; 5] = ["hidden_neurons", "hidden_layers", "epochs", "lr_decay", "batch_size"];

fn known_keys(kind: MlKind) -> Vec<&'static str> {
    match kind {
        MlKind::Rf => TREE_KEYS.iter().chain(&RF_KEYS).copied().collect(),
        MlKind::Gbm => TREE_KEYS.iter().chain(&GBM_KEYS).copied().collect(),
        MlKind::Mlp => MLP_KEYS.to_vec(),
    }
}

fn is_integer_key(key: &str) -> bool {
    matches!(
        key,
        "max_depth"
            | "min_rows"
            | "n_bins"
            | "n_trees"
            | "max_trees"
            | "hidden_neurons"
            | "hidden_layers"
            | "epochs"
            | "batch_size"
    )
}

/// Hyper-parameters of one fit.
#[derive(Debug, Clone, PartialEq)]
pub enum MlParams {
    Rf(RfParams),
    Gbm(GbmParams),
    Mlp(MlpParams),
}

impl MlParams {
    pub fn kind(&self) -> MlKind {
        match self {
            MlParams::Rf(_) => MlKind::Rf,
            MlParams::Gbm(_) => MlKind::Gbm,
            MlParams::Mlp(_) => MlKind::Mlp,
        }
    }

    /// Fits on `train`; GBM scores early stopping on `validation`.
    pub fn fit(
        &self,
        train: (&DMatrix<f64>, &[f64]),
        validation: (&DMatrix<f64>, &[f64]),
        seed: u64,
    ) -> Result<MlModel> {
        Ok(match self {
            MlParams::Rf(p) => MlModel::Ensemble(fit_rf(train.0, train.1, p, seed)?),
            MlParams::Gbm(p) => MlModel::Ensemble(fit_gbm(train.0, train.1, p, Some(validation), seed)?),
            MlParams::Mlp(p) => MlModel::Mlp(fit_mlp(train.0, train.1, p, seed)?),
        })
    }
}

/// Cartesian lattice of hyper-parameter values. Cells are numbered with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub kind: MlKind,
    axes: Vec<(String, Vec<f64>)>,
}

impl ParamGrid {
    pub fn new(kind: MlKind, axes: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let keys = known_keys(kind);
        for (i, (key, values)) in axes.iter().enumerate() {
            if !keys.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown {kind} grid key `{key}`")));
            }
            if axes[..i].iter().any(|(k, _)| k == key) {
                return Err(Error::Config(format!("duplicate {kind} grid key `{key}`")));
            }
            if values.is_empty() {
                return Err(Error::Config(format!("{kind} grid key `{key}` has no values")));
            }
            if is_integer_key(key) && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                return Err(Error::Config(format!(
                    "{kind} grid key `{key}` needs positive integers"
                )));
            }
        }
        let grid = Self { kind, axes };
        for i in 0..grid.len() {
            grid.params(i)?;
        }
        Ok(grid)
    }

    /// Reduced lattice that runs on a single core in minutes.
    pub fn desk_default(kind: MlKind) -> Self {
        let axes: Vec<(&str, Vec<f64>)> = match kind {
            MlKind::Gbm => vec![
                ("learn_rate", vec![0.05, 0.1]),
                ("max_depth", vec![3.0, 7.0, 13.0]),
                ("min_rows", vec![8.0, 64.0]),
            ],
            MlKind::Rf => vec![("max_depth", vec![7.0, 11.0]), ("min_rows", vec![4.0, 16.0])],
            MlKind::Mlp => vec![("hidden_neurons", vec![64.0]), ("epochs", vec![10.0, 20.0])],
        };
        Self {
            kind,
            axes: axes.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    /// Reads `key = [values]` (or a single value) pairs.
    pub fn from_toml(kind: MlKind, table: &toml::Table) -> Result<Self> {
        let number = |key: &str, v: &toml::Value| -> Result<f64> {
            match v {
                toml::Value::Integer(i) => Ok(*i as f64),
                toml::Value::Float(f) => Ok(*f),
                other => Err(Error::Config(format!(
                    "{kind} grid key `{key}`: expected a number, got {other}"
                ))),
            }
        };
        let mut axes = Vec::new();
        for (key, value) in table {
            let values = match value {
                toml::Value::Array(items) => items.iter().map(|v| number(key, v)).collect::<Result<Vec<_>>>()?,
                v => vec![number(key, v)?],
            };
            axes.push((key.clone(), values));
        }
        Self::new(kind, axes)
    }

    pub fn axes(&self) -> &[(String, Vec<f64>)] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (key, value) pairs of cell `index`.
    pub fn cell(&self, mut index: usize) -> Vec<(String, f64)> {
        let mut out = vec![(String::new(), 0.0); self.axes.len()];
        for (slot, (key, values)) in out.iter_mut().zip(&self.axes).rev() {
            *slot = (key.clone(), values[index % values.len()]);
            index /= values.len();
        }
        out
    }

    pub fn params(&self, index: usize) -> Result<MlParams> {
        let cell = self.cell(index);
        let get = |key: &str| cell.iter().find(|(k, _)| k == key).map(|&(_, v)| v);
        let int = |key: &str, default: usize| get(key).map_or(default, |v| v as usize);
        let tree = |mut t: super::TreeParams| {
            t.max_depth = int("max_depth", t.max_depth);
            t.min_rows = int("min_rows", t.min_rows);
            t.n_bins = int("n_bins", t.n_bins);
            t.min_split_improvement = get("min_split_improvement").unwrap_or(t.min_split_improvement);
            t.row_sample_rate = get("row_sample_rate").unwrap_or(t.row_sample_rate);
            t.col_sample_rate = get("col_sample_rate").unwrap_or(t.col_sample_rate);
            t.col_sample_rate_per_tree = get("col_sample_rate_per_tree").unwrap_or(t.col_sample_rate_per_tree);
            t.validate().map(|_| t)
        };
        let params = match self.kind {
            MlKind::Rf => {
                let d = RfParams::default();
                MlParams::Rf(RfParams {
                    tree: tree(d.tree)?,
                    n_trees: int("n_trees", d.n_trees),
                    ..d
                })
            }
            MlKind::Gbm => {
                let d = GbmParams::default();
                MlParams::Gbm(GbmParams {
                    tree: tree(d.tree)?,
                    learn_rate: get("learn_rate").unwrap_or(d.learn_rate),
                    learn_rate_annealing: get("learn_rate_annealing").unwrap_or(d.learn_rate_annealing),
                    max_trees: int("max_trees", d.max_trees),
                    ..d
                })
            }
            MlKind::Mlp => {
                let d = MlpParams::default();
                let neurons = int("hidden_neurons", d.hidden[0]);
                let layers = int("hidden_layers", d.hidden.len());
                MlParams::Mlp(MlpParams {
                    hidden: vec![neurons; layers],
                    epochs: int("epochs", d.epochs),
                    lr_decay: get("lr_decay").unwrap_or(d.lr_decay),
                    batch_size: int("batch_size", d.batch_size),
                    ..d
                })
            }
        };
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub values: Vec<(String, f64)>,
    /// +∞ when the fit failed.
    pub validation_mse: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best_index: usize,
    pub best_params: MlParams,
    pub best_mse: f64,
    pub best_model: MlModel,
    pub cells: Vec<GridCell>,
}

pub fn mean_squared_error(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum::<f64>() / y.len() as f64
}

/// Fits every cell on `train`, scores it on `validation` and keeps the
/// lowest-MSE cell; ties go to the earliest cell. Cell `i` is seeded from
/// `(seed, i)`.
pub fn grid_search(
    grid: &ParamGrid,
    train: (&DMatrix<f64>, &[f64]),
    validation: (&DMatrix<f64>, &[f64]),
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyper-parameter grid".into()));
    }
    if validation.1.is_empty() || validation.0.nrows() != validation.1.len() {
        return Err(Error::InvalidArgument("empty or malformed validation set".into()));
    }
    let outcomes: Vec<Result<(MlModel, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let model = grid.params(i)?.fit(train, validation, derive_key(seed, &[i as u64]))?;
            let mse = mean_squared_error(&model.predict(validation.0), validation.1);
            Ok((model, mse))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, MlModel)> = None;
    let mut first_error = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let mse = match outcome {
            Ok((model, mse)) => {
                let mse = if mse.is_nan() { f64::INFINITY } else { mse };
                if best.as_ref().is_none_or(|(_, b, _)| mse < *b) {
                    best = Some((i, mse, model));
                }
                mse
            }
            Err(e) => {
                first_error.get_or_insert(e);
                f64::INFINITY
            }
        };
        cells.push(GridCell {
            index: i,
            values: grid.cell(i),
            validation_mse: mse,
        });
    }
    let Some((best_index, best_mse, best_model)) = best else {
        return Err(first_error.unwrap_or_else(|| Error::Numerical("no grid cell could be fitted".into())));
    };
    Ok(GridResult {
        best_index,
        best_params: grid.params(best_index)?,
        best_mse,
        best_model,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_order_last_axis_fastest() {
        let grid = ParamGrid::new(
            MlKind::Gbm,
            vec![
                ("learn_rate".into(), vec![0.05, 0.1]),
                ("max_depth".into(), vec![3.0, 7.0, 13.0]),
            ],
        )
        .unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(
            grid.cell(0),
            vec![("learn_rate".into(), 0.05), ("max_depth".into(), 3.0)]
        );
        assert_eq!(
            grid.cell(1),
            vec![("learn_rate".into(), 0.05), ("max_depth".into(), 7.0)]
        );
        assert_eq!(
            grid.cell(5),
            vec![("learn_rate".into(), 0.1), ("max_depth".into(), 13.0)]
        );
    }

    #[test]
    fn toml_grid() {
        let table: toml::Table = "max_depth = [3, 5]\nlearn_rate = 0.2\n".parse().unwrap();
        let grid = ParamGrid::from_toml(MlKind::Gbm, &table).unwrap();
        assert_eq!(grid.len(), 2);
        match grid.params(1).unwrap() {
            MlParams::Gbm(p) => {
                assert_eq!(p.tree.max_depth, 5);
                assert_eq!(p.learn_rate, 0.2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_grids_are_rejected() {
        let unknown: toml::Table = "learn_rate = [0.1]".parse().unwrap();
        assert!(ParamGrid::from_toml(MlKind::Rf, &unknown).is_err());
        let fractional: toml::Table = "max_depth = [2.5]".parse().unwrap();
        assert!(ParamGrid::from_toml(MlKind::Rf, &fractional).is_err());
        let rate: toml::Table = "row_sample_rate = [1.5]".parse().unwrap();
        assert!(ParamGrid::from_toml(MlKind::Rf, &rate).is_err());
    }

    #[test]
    fn desk_defaults_are_valid() {
        for kind in MlKind::ALL {
            let g = ParamGrid::desk_default(kind);
            assert!(ParamGrid::new(kind, g.axes().to_vec()).is_ok());
        }
        assert_eq!(ParamGrid::desk_default(MlKind::Gbm).len(), 12);
    }
}
