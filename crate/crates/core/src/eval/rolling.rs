use std::collections::BTreeMap;

use rayon::prelude::*;

use super::plan::{EvaluationPlan, Method, Window, VALIDATION_WEEKS};
use crate::econ::{fit_model, predict_one_step};
use crate::error::{Error, Result};
use crate::features::{assemble_design, forecast_rows, CrimeType, FeatureModes, PanelData, Setting};
use crate::ml::{grid_search, permutation_importance, GridCell, MlKind, ParamGrid, WindowImportance};
use crate::rng::derive_key;
use crate::spatial::SpatialStructure;

/// Settings shared by every window of a run.
#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub modes: FeatureModes,
    pub seed: u64,
    /// Grid per ML kind; missing kinds use [`ParamGrid::desk_default`].
    pub grids: BTreeMap<MlKind, ParamGrid>,
    /// Compute permutation importance for ML windows.
    pub importance: bool,
}

impl EvalConfig {
    pub fn grid(&self, kind: MlKind) -> ParamGrid {
        self.grids
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| ParamGrid::desk_default(kind))
    }
}

/// What a window's model reports besides the forecasts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowMeta {
    pub seed: Option<u64>,
    /// Fitted ρ (SAR) or δ (CAR).
    pub spatial_parameter: Option<f64>,
    pub chosen_cell: Option<usize>,
    pub hyperparameters: Vec<(String, f64)>,
    pub grid_cells: Vec<GridCell>,
    pub importance: Option<WindowImportance>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecast {
    pub forecast: Vec<f64>,
    pub unclamped: Vec<f64>,
    pub meta: WindowMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub window: Window,
    pub actual: Vec<f64>,
    pub forecast: Vec<f64>,
    pub unclamped: Vec<f64>,
    /// actual − forecast
    pub errors: Vec<f64>,
    pub meta: WindowMeta,
}

impl WindowResult {
    pub fn sse(&self) -> f64 {
        self.errors.iter().map(|e| e * e).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub crime_type: CrimeType,
    pub setting: Setting,
    pub method: Method,
    pub modes: FeatureModes,
    pub plan: EvaluationPlan,
    pub n_units: usize,
    pub windows: Vec<WindowResult>,
    /// Σ e² / (N · windows)
    pub mse: f64,
}

impl EvaluationReport {
    pub fn recompute_mse(&self) -> f64 {
        let sse: f64 = self.windows.iter().map(WindowResult::sse).sum();
        sse / (self.n_units * self.windows.len()) as f64
    }
}

/// Forecast for one window from a model that sees only `history`, the panel
/// cut at the window's last week.
pub fn forecast_window(
    history: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    method: Method,
    structure: &SpatialStructure,
    config: &EvalConfig,
) -> Result<WindowForecast> {
    let t = history.n_weeks();
    let modes = config.modes;
    let x_next = forecast_rows(history, crime_type, setting, modes, t + 1)?;
    match method {
        Method::Econ(kind) => {
            let (x, y) = assemble_design(history, crime_type, setting, modes, 2..=t)?;
            let fit = fit_model(kind, &x, &y, structure)?;
            let f = predict_one_step(&fit, &x_next.x, Some(structure))?;
            Ok(WindowForecast {
                forecast: f.values,
                unclamped: f.unclamped,
                meta: WindowMeta {
                    spatial_parameter: fit.spatial.map(|s| s.value()),
                    warnings: fit.diagnostics.warnings,
                    ..WindowMeta::default()
                },
            })
        }
        Method::Ml(kind) => {
            let train_end = t.checked_sub(VALIDATION_WEEKS).filter(|&e| e >= 2).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{kind} needs at least {} weeks of history, got {t}",
                    VALIDATION_WEEKS + 2
                ))
            })?;
            let (train, y_train) = assemble_design(history, crime_type, setting, modes, 2..=train_end)?;
            let (val, y_val) = assemble_design(history, crime_type, setting, modes, train_end + 1..=t)?;
            let (train, val, next) = (
                train.without_intercept(),
                val.without_intercept(),
                x_next.without_intercept(),
            );
            let seed = derive_key(config.seed, &[u64::from(t + 1)]);
            let result = grid_search(
                &config.grid(kind),
                (&train.x, y_train.as_slice()),
                (&val.x, y_val.as_slice()),
                seed,
            )?;
            let importance = if config.importance {
                Some(permutation_importance(
                    &result.best_model,
                    &val.x,
                    y_val.as_slice(),
                    &val.column_names,
                    seed,
                )?)
            } else {
                None
            };
            let forecast = result.best_model.predict(&next.x);
            let hyperparameters = result.cells[result.best_index].values.clone();
            Ok(WindowForecast {
                unclamped: forecast.clone(),
                forecast,
                meta: WindowMeta {
                    seed: Some(seed),
                    chosen_cell: Some(result.best_index),
                    hyperparameters,
                    grid_cells: result.cells,
                    importance,
                    ..WindowMeta::default()
                },
            })
        }
    }
}

/// Rolling evaluation with an arbitrary forecaster, which receives the
/// panel cut at each window's last week.
pub fn run_rolling_with<F>(
    panel: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    method: Method,
    modes: FeatureModes,
    plan: &EvaluationPlan,
    forecaster: F,
) -> Result<EvaluationReport>
where
    F: Fn(&PanelData) -> Result<WindowForecast> + Sync,
{
    if plan.n_weeks != panel.n_weeks() {
        return Err(Error::InvalidArgument(format!(
            "plan covers {} weeks but the panel has {}",
            plan.n_weeks,
            panel.n_weeks()
        )));
    }
    let n = panel.n_units();
    let outcomes: Vec<Result<WindowResult>> = plan
        .windows()
        .into_par_iter()
        .map(|window| {
            let wrap = |e: Error| Error::Window {
                week: window.target_week,
                source: Box::new(e),
            };
            let history = panel.truncated(window.last_week);
            let wf = forecaster(&history).map_err(wrap)?;
            if wf.forecast.len() != n {
                return Err(wrap(Error::DimensionMismatch {
                    expected: n,
                    got: wf.forecast.len(),
                }));
            }
            let actual = panel.crime_week(crime_type, window.target_week);
            let errors = actual.iter().zip(&wf.forecast).map(|(a, f)| a - f).collect();
            Ok(WindowResult {
                window,
                actual,
                forecast: wf.forecast,
                unclamped: wf.unclamped,
                errors,
                meta: wf.meta,
            })
        })
        .collect();
    let windows = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = EvaluationReport {
        crime_type,
        setting,
        method,
        modes,
        plan: *plan,
        n_units: n,
        windows,
        mse: 0.0,
    };
    report.mse = report.recompute_mse();
    Ok(report)
}

/// Rolling one-step-ahead evaluation of `method` on `setting`.
pub fn run_rolling(
    panel: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    method: Method,
    plan: &EvaluationPlan,
    structure: &SpatialStructure,
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    run_rolling_with(panel, crime_type, setting, method, config.modes, plan, |history| {
        forecast_window(history, crime_type, setting, method, structure, config)
    })
}
