use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Lr,
    Sar,
    Car,
    Glm,
    Glmm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::Sar,
        ModelKind::Car,
        ModelKind::Glm,
        ModelKind::Glmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Sar => "sar",
            ModelKind::Car => "car",
            ModelKind::Glm => "glm",
            ModelKind::Glmm => "glmm",
        }
    }

    /// Poisson kinds report coefficients on the log scale.
    pub fn is_log_scale(self) -> bool {
        matches!(self, ModelKind::Glm | ModelKind::Glmm)
    }

    pub fn is_gaussian(self) -> bool {
        !self.is_log_scale()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialParameter {
    Rho { value: f64, std_error: f64 },
    Delta { value: f64, std_error: f64 },
}

impl SpatialParameter {
    pub fn value(&self) -> f64 {
        match *self {
            SpatialParameter::Rho { value, .. } | SpatialParameter::Delta { value, .. } => value,
        }
    }

    pub fn std_error(&self) -> f64 {
        match *self {
            SpatialParameter::Rho { std_error, .. } | SpatialParameter::Delta { std_error, .. } => std_error,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpatialParameter::Rho { .. } => "rho",
            SpatialParameter::Delta { .. } => "delta",
        }
    }
}

/// Residual summaries the one-step predictors need.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualState {
    None,
    /// SAR: time average of y_t − ρWy_t − X_tβ, per unit.
    SarStructuralMean(DVector<f64>),
    /// CAR: time average of y_t − X_tβ, per unit.
    CarUnitMean(DVector<f64>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Spatial parameter ended within 1e-6 of the search interval edge.
    pub boundary: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub column_names: Vec<String>,
    pub beta: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub sigma2: Option<f64>,
    pub spatial: Option<SpatialParameter>,
    pub eta: Option<DVector<f64>>,
    pub loglik: f64,
    pub deviance: Option<f64>,
    pub n_units: usize,
    pub residual_state: ResidualState,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub variable: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

impl ModelFit {
    pub fn rho(&self) -> Option<f64> {
        match self.spatial {
            Some(SpatialParameter::Rho { value, .. }) => Some(value),
            _ => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self.spatial {
            Some(SpatialParameter::Delta { value, .. }) => Some(value),
            _ => None,
        }
    }

    /// Coefficients with Wald p-values, followed by the spatial parameter
    /// and the variance parameter when present.
    pub fn coefficient_table(&self) -> Vec<CoefficientRow> {
        let mut rows: Vec<CoefficientRow> = self
            .column_names
            .iter()
            .zip(self.beta.iter().zip(self.std_errors.iter()))
            .map(|(name, (&b, &se))| CoefficientRow {
                variable: name.clone(),
                estimate: b,
                std_error: se,
                p_value: two_sided_p(b / se),
            })
            .collect();
        if let Some(sp) = self.spatial {
            rows.push(CoefficientRow {
                variable: sp.name().to_string(),
                estimate: sp.value(),
                std_error: sp.std_error(),
                p_value: two_sided_p(sp.value() / sp.std_error()),
            });
        }
        if let Some(s2) = self.sigma2 {
            rows.push(CoefficientRow {
                variable: "sigma2".to_string(),
                estimate: s2,
                std_error: f64::NAN,
                p_value: f64::NAN,
            });
        }
        rows
    }
}
