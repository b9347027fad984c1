use nalgebra::{DMatrix, DVector};

use super::fit::{ModelFit, ModelKind, ResidualState};
use crate::error::{Error, Result};
use crate::spatial::SpatialStructure;

/// One-step-ahead forecasts for the N units. For Gaussian kinds `values`
/// is clamped at zero and `unclamped` keeps the raw predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub unclamped: Vec<f64>,
}

fn state_mismatch(fit: &ModelFit) -> Error {
    Error::InvalidArgument(format!("{} fit lacks the state its predictor needs", fit.kind))
}

/// Applies the kind's one-step predictor to the week t+1 regressors.
pub fn predict_one_step(
    fit: &ModelFit,
    x_next: &DMatrix<f64>,
    structure: Option<&SpatialStructure>,
) -> Result<Forecast> {
    if x_next.ncols() != fit.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.beta.len(),
            got: x_next.ncols(),
        });
    }
    let n = fit.n_units;
    if x_next.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_next.nrows(),
        });
    }
    let xb = x_next * &fit.beta;
    let need_structure = || -> Result<&SpatialStructure> {
        let s = structure.ok_or_else(|| state_mismatch(fit))?;
        if s.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.n(),
            });
        }
        Ok(s)
    };

    let raw: DVector<f64> = match (fit.kind, &fit.residual_state) {
        (ModelKind::Lr, _) => xb,
        (ModelKind::Sar, ResidualState::SarStructuralMean(eps)) => {
            let rho = fit.rho().ok_or_else(|| state_mismatch(fit))?;
            need_structure()?.solve_shifted(rho, &(xb + eps))?
        }
        (ModelKind::Car, ResidualState::CarUnitMean(r)) => {
            let delta = fit.delta().ok_or_else(|| state_mismatch(fit))?;
            let wr = need_structure()?.weights().lag(r.as_slice());
            xb + delta * DVector::from_vec(wr)
        }
        (ModelKind::Glm, _) => xb.map(f64::exp),
        (ModelKind::Glmm, _) => {
            let eta = fit.eta.as_ref().ok_or_else(|| state_mismatch(fit))?;
            (xb + eta).map(f64::exp)
        }
        _ => return Err(state_mismatch(fit)),
    };

    let unclamped: Vec<f64> = raw.iter().copied().collect();
    let values = if fit.kind.is_gaussian() {
        unclamped.iter().map(|v| v.max(0.0)).collect()
    } else {
        unclamped.clone()
    };
    Ok(Forecast { values, unclamped })
}
