//! Pooled, spatial-lag, spatial-error and Poisson regression models with
//! their one-step-ahead predictors.

mod brent;
mod fit;
mod gaussian;
mod poisson;
mod predict;

pub use brent::brent_minimize;
pub use fit::{CoefficientRow, FitDiagnostics, ModelFit, ModelKind, ResidualState, SpatialParameter};
pub use gaussian::{fit_car, fit_car_fixed, fit_lr, fit_sar, CarFitState, SarConcentratedState};
pub use poisson::{fit_glm, fit_glmm, fit_glmm_with, poisson_deviance, poisson_loglik, GlmmOptions};
pub use predict::{predict_one_step, Forecast};

use nalgebra::DVector;

use crate::error::Result;
use crate::features::DesignMatrix;
use crate::spatial::SpatialStructure;

/// Fits `kind`; the spatial structure is ignored by LR and GLM.
pub fn fit_model(
    kind: ModelKind,
    x: &DesignMatrix,
    y: &DVector<f64>,
    structure: &SpatialStructure,
) -> Result<ModelFit> {
    match kind {
        ModelKind::Lr => fit_lr(x, y),
        ModelKind::Sar => fit_sar(x, y, structure),
        ModelKind::Car => fit_car(x, y, structure),
        ModelKind::Glm => fit_glm(x, y),
        ModelKind::Glmm => fit_glmm(x, y, structure),
    }
}
