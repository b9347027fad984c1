//! Rolling-window evaluation, feature-definition selection and the
//! setting comparison.

mod compare;
mod plan;
mod rolling;

pub use compare::{
    compare_settings, hyperparameter_robustness, mode_combinations, pct_change, select_feature_definitions,
    ComparisonRow, FeatureSelectionResult, RobustnessSummary, SelectionEntry, SettingsComparison, WindowDistribution,
};
pub use plan::{EvaluationPlan, Method, Window, VALIDATION_WEEKS};
pub use rolling::{
    forecast_window, run_rolling, run_rolling_with, EvalConfig, EvaluationReport, WindowForecast, WindowMeta,
    WindowResult,
};
