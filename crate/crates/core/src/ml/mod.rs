//! Histogram regression trees, random forests, gradient boosting, a small
//! feed-forward network, grid search and permutation importance.

mod ensemble;
mod grid;
mod importance;
mod mlp;
mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use ensemble::{fit_gbm, fit_rf, EnsembleFit, EnsembleKind, GbmParams, RfParams};
pub use grid::{grid_search, mean_squared_error, GridCell, GridResult, MlParams, ParamGrid};
pub use importance::{
    aggregate_importance, permutation_importance, rank_descending, FnPredictor, ImportanceReport, Predictor,
    WindowImportance, MIN_VALIDATION_ROWS, PERMUTATIONS,
};
pub use mlp::{fit_mlp, MlpFit, MlpParams};
pub use tree::{fit_regression_tree, BinnedMatrix, Binning, RegressionTree, TreeParams};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MlKind {
    Rf,
    Gbm,
    Mlp,
}

impl MlKind {
    pub const ALL: [MlKind; 3] = [MlKind::Rf, MlKind::Gbm, MlKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            MlKind::Rf => "rf",
            MlKind::Gbm => "gbm",
            MlKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for MlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MlKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MlKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ML kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MlModel {
    Ensemble(EnsembleFit),
    Mlp(MlpFit),
}

impl MlModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            MlModel::Ensemble(e) => e.predict(x),
            MlModel::Mlp(m) => m.predict(x),
        }
    }
}

impl Predictor for MlModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        MlModel::predict(self, x)
    }
}

impl Predictor for EnsembleFit {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        EnsembleFit::predict(self, x)
    }
}

impl Predictor for MlpFit {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        MlpFit::predict(self, x)
    }
}
