use super::plan::{EvaluationPlan, Method};
use super::rolling::{run_rolling, EvalConfig, EvaluationReport};
use crate::econ::ModelKind;
use crate::error::{Error, Result};
use crate::features::{
    CrimeType, FeatureModes, PanelData, PoiFeatureMode, Setting, TaxiFeatureMode, TwitterFeatureMode,
};
use crate::linalg::quantile_sorted;
use crate::spatial::SpatialStructure;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEntry {
    pub modes: FeatureModes,
    pub mse: f64,
}

/// CAR rolling MSE for every feature-definition combination.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSelectionResult {
    pub crime_type: CrimeType,
    /// POI mode outermost, then Twitter rows, then taxi columns.
    pub entries: Vec<SelectionEntry>,
    pub winner: FeatureModes,
    pub winner_mse: f64,
}

impl FeatureSelectionResult {
    /// 4 × 3 table (Twitter rows × taxi columns) for one POI mode.
    pub fn table(&self, poi: PoiFeatureMode) -> Vec<Vec<f64>> {
        TwitterFeatureMode::ALL
            .iter()
            .map(|&tw| {
                TaxiFeatureMode::ALL
                    .iter()
                    .map(|&tx| {
                        self.entries
                            .iter()
                            .find(|e| {
                                e.modes
                                    == FeatureModes {
                                        twitter: tw,
                                        taxi: tx,
                                        poi,
                                    }
                            })
                            .map_or(f64::NAN, |e| e.mse)
                    })
                    .collect()
            })
            .collect()
    }
}

/// All 4 × 3 × 2 definition combinations in reporting order.
pub fn mode_combinations() -> Vec<FeatureModes> {
    let mut out = Vec::with_capacity(24);
    for poi in PoiFeatureMode::ALL {
        for twitter in TwitterFeatureMode::ALL {
            for taxi in TaxiFeatureMode::ALL {
                out.push(FeatureModes { twitter, taxi, poi });
            }
        }
    }
    out
}

/// Picks the feature definitions by rolling CAR MSE on setting 8. Ties go
/// to the earliest combination.
pub fn select_feature_definitions(
    panel: &PanelData,
    crime_type: CrimeType,
    plan: &EvaluationPlan,
    structure: &SpatialStructure,
    config: &EvalConfig,
) -> Result<FeatureSelectionResult> {
    let setting = Setting::new(8)?;
    let mut entries = Vec::with_capacity(24);
    for modes in mode_combinations() {
        let cfg = EvalConfig {
            modes,
            ..config.clone()
        };
        let report = run_rolling(
            panel,
            crime_type,
            setting,
            Method::Econ(ModelKind::Car),
            plan,
            structure,
            &cfg,
        )?;
        entries.push(SelectionEntry { modes, mse: report.mse });
    }
    let best = entries
        .iter()
        .enumerate()
        .fold(0, |b, (i, e)| if e.mse < entries[b].mse { i } else { b });
    Ok(FeatureSelectionResult {
        crime_type,
        winner: entries[best].modes,
        winner_mse: entries[best].mse,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub setting: Setting,
    pub mse: f64,
    /// 100 · (mse − mse of setting 1) / mse of setting 1, same method.
    pub pct_vs_setting1: f64,
}

#[derive(Debug, Clone)]
pub struct SettingsComparison {
    pub crime_type: CrimeType,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<EvaluationReport>,
}

impl SettingsComparison {
    pub fn mse(&self, method: Method, setting: u8) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.setting.id() == setting)
            .map(|r| r.mse)
    }

    /// Mean over methods of the percentage change against setting 1.
    pub fn average_pct(&self, setting: u8) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.setting.id() == setting)
            .map(|r| r.pct_vs_setting1)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn pct_change(mse: f64, baseline: f64) -> f64 {
    100.0 * (mse - baseline) / baseline
}

/// Rolling MSE for every method on `settings`. Setting 1, the baseline
/// for the percentage column, is always run first.
pub fn compare_settings(
    panel: &PanelData,
    crime_type: CrimeType,
    methods: &[Method],
    settings: &[Setting],
    plan: &EvaluationPlan,
    structure: &SpatialStructure,
    config: &EvalConfig,
) -> Result<SettingsComparison> {
    let baseline_setting = Setting::new(1)?;
    let mut order = vec![baseline_setting];
    for &s in settings {
        if !order.contains(&s) {
            order.push(s);
        }
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &method in methods {
        let mut baseline = None;
        for &setting in &order {
            let report = run_rolling(panel, crime_type, setting, method, plan, structure, config)?;
            let base = *baseline.get_or_insert(report.mse);
            rows.push(ComparisonRow {
                method,
                setting,
                mse: report.mse,
                pct_vs_setting1: pct_change(report.mse, base),
            });
            reports.push(report);
        }
    }
    Ok(SettingsComparison {
        crime_type,
        rows,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDistribution {
    pub target_week: u32,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Validation MSE of the globally best cell in this window.
    pub global_best: f64,
}

/// Spread of grid-cell validation MSEs per window.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessSummary {
    pub method: Method,
    pub setting: Setting,
    pub windows: Vec<WindowDistribution>,
    /// Cell with the lowest validation MSE averaged over windows.
    pub global_best_cell: usize,
    pub global_best_mean: f64,
}

pub fn hyperparameter_robustness(report: &EvaluationReport) -> Result<RobustnessSummary> {
    let tables: Vec<Vec<f64>> = report
        .windows
        .iter()
        .map(|w| w.meta.grid_cells.iter().map(|c| c.validation_mse).collect())
        .collect();
    let n_cells = tables.first().map_or(0, Vec::len);
    if n_cells == 0 || tables.iter().any(|t| t.len() != n_cells) {
        return Err(Error::InvalidArgument(format!(
            "{} report carries no consistent grid tables",
            report.method
        )));
    }
    let means: Vec<f64> = (0..n_cells)
        .map(|c| tables.iter().map(|t| t[c]).sum::<f64>() / tables.len() as f64)
        .collect();
    let best = (0..n_cells).fold(0, |b, c| if means[c] < means[b] { c } else { b });
    let windows = report
        .windows
        .iter()
        .zip(&tables)
        .map(|(w, t)| {
            let mut sorted = t.clone();
            sorted.sort_by(f64::total_cmp);
            WindowDistribution {
                target_week: w.window.target_week,
                min: sorted[0],
                q1: quantile_sorted(&sorted, 0.25),
                median: quantile_sorted(&sorted, 0.5),
                q3: quantile_sorted(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
                global_best: t[best],
            }
        })
        .collect();
    Ok(RobustnessSummary {
        method: report.method,
        setting: report.setting,
        windows,
        global_best_cell: best,
        global_best_mean: means[best],
    })
}
