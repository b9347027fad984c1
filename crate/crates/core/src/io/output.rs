use std::fs;
use std::path::Path;

use crate::econ::ModelFit;
use crate::error::{Error, Result};
use crate::eval::{EvaluationReport, FeatureSelectionResult, RobustnessSummary, SettingsComparison};
use crate::features::{CrimeType, DesignMatrix, Setting};
use crate::ml::ImportanceReport;
use crate::spatial::MoranResult;

/// An in-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Numerical(format!("csv encoding: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, table.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip text for `v`, in exponent form at extreme magnitudes.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn num(v: f64) -> String {
    format_float(v)
}

pub const FORECASTS_HEADER: [&str; 9] = [
    "crime_type",
    "model",
    "setting",
    "window",
    "unit_id",
    "week",
    "actual",
    "forecast",
    "error",
];
pub const MSE_HEADER: [&str; 5] = ["crime_type", "model", "setting", "mse", "pct_vs_setting1"];
pub const SELECTION_HEADER: [&str; 7] = ["crime_type", "poi", "twitter", "taxi", "mse", "winner", "chosen_taxi"];
pub const COEFFICIENTS_HEADER: [&str; 5] = ["variable", "model", "estimate", "std_error", "p_value"];
pub const IMPORTANCE_HEADER: [&str; 5] = ["crime_type", "setting", "variable", "mean_rank", "ranks_by_window"];
pub const MORAN_HEADER: [&str; 6] = ["week", "i_stat", "expected", "variance", "z", "p"];
pub const ROBUSTNESS_HEADER: [&str; 9] = [
    "model",
    "setting",
    "target_week",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "global_best",
];
pub const WINDOWS_HEADER: [&str; 8] = [
    "crime_type",
    "model",
    "setting",
    "window",
    "target_week",
    "seed",
    "spatial_parameter",
    "hyperparameters",
];

/// Per-unit forecasts of every window, windows numbered from 1.
pub fn forecasts_table(reports: &[EvaluationReport], units: &[String]) -> CsvTable {
    let mut t = CsvTable::new(&FORECASTS_HEADER);
    for r in reports {
        for w in &r.windows {
            for (i, unit) in units.iter().enumerate() {
                t.push(vec![
                    r.crime_type.to_string(),
                    r.method.to_string(),
                    r.setting.id().to_string(),
                    (w.window.index + 1).to_string(),
                    unit.clone(),
                    w.window.target_week.to_string(),
                    num(w.actual[i]),
                    num(w.forecast[i]),
                    num(w.errors[i]),
                ]);
            }
        }
    }
    t
}

pub fn mse_table(comparison: &SettingsComparison) -> CsvTable {
    let mut t = CsvTable::new(&MSE_HEADER);
    for row in &comparison.rows {
        t.push(vec![
            comparison.crime_type.to_string(),
            row.method.to_string(),
            row.setting.id().to_string(),
            num(row.mse),
            num(row.pct_vs_setting1),
        ]);
    }
    t
}

/// Window-level metadata: seeds, fitted spatial parameters and the chosen
/// grid cell's hyperparameters as `key=value;...`.
pub fn windows_table(reports: &[EvaluationReport]) -> CsvTable {
    let mut t = CsvTable::new(&WINDOWS_HEADER);
    for r in reports {
        for w in &r.windows {
            let hp: Vec<String> = w.meta.hyperparameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
            t.push(vec![
                r.crime_type.to_string(),
                r.method.to_string(),
                r.setting.id().to_string(),
                (w.window.index + 1).to_string(),
                w.window.target_week.to_string(),
                w.meta.seed.map_or_else(String::new, |s| s.to_string()),
                w.meta.spatial_parameter.map_or_else(String::new, num),
                hp.join(";"),
            ]);
        }
    }
    t
}

/// The 4 × 3 × 2 sweep with the winner flagged.
pub fn selection_table(result: &FeatureSelectionResult) -> CsvTable {
    let mut t = CsvTable::new(&SELECTION_HEADER);
    for e in &result.entries {
        t.push(vec![
            result.crime_type.to_string(),
            e.modes.poi.to_string(),
            e.modes.twitter.to_string(),
            e.modes.taxi.to_string(),
            num(e.mse),
            u8::from(e.modes == result.winner).to_string(),
            result.winner.taxi.to_string(),
        ]);
    }
    t
}

/// Estimates table; log-link models are labelled as such.
pub fn coefficients_table(fit: &ModelFit) -> CsvTable {
    let label = if fit.kind.is_log_scale() {
        format!("{} (log scale)", fit.kind)
    } else {
        fit.kind.to_string()
    };
    let mut t = CsvTable::new(&COEFFICIENTS_HEADER);
    for row in fit.coefficient_table() {
        t.push(vec![
            row.variable,
            label.clone(),
            num(row.estimate),
            num(row.std_error),
            num(row.p_value),
        ]);
    }
    t
}

/// Variables ordered by mean rank; per-window ranks joined with `;`.
pub fn importance_table(crime_type: CrimeType, setting: Setting, report: &ImportanceReport) -> CsvTable {
    let mut t = CsvTable::new(&IMPORTANCE_HEADER);
    for j in report.order() {
        let ranks: Vec<String> = report.ranks_by_window.iter().map(|r| r[j].to_string()).collect();
        t.push(vec![
            crime_type.to_string(),
            setting.id().to_string(),
            report.variables[j].clone(),
            format!("{:.2}", report.mean_rank[j]),
            ranks.join(";"),
        ]);
    }
    t
}

pub fn moran_table(rows: &[(u32, MoranResult)]) -> CsvTable {
    let mut t = CsvTable::new(&MORAN_HEADER);
    for (week, m) in rows {
        t.push(vec![
            week.to_string(),
            num(m.i_stat),
            num(m.expected),
            num(m.variance),
            num(m.z),
            num(m.p),
        ]);
    }
    t
}

pub fn robustness_table(summary: &RobustnessSummary) -> CsvTable {
    let mut t = CsvTable::new(&ROBUSTNESS_HEADER);
    for w in &summary.windows {
        t.push(vec![
            summary.method.to_string(),
            summary.setting.id().to_string(),
            w.target_week.to_string(),
            num(w.min),
            num(w.q1),
            num(w.median),
            num(w.q3),
            num(w.max),
            num(w.global_best),
        ]);
    }
    t
}

/// Design rows as `unit_id,week,<columns...>,y`.
pub fn design_table(design: &DesignMatrix, y: &[f64], units: &[String]) -> CsvTable {
    let mut header = vec!["unit_id".to_string(), "week".to_string()];
    header.extend(design.column_names.iter().cloned());
    header.push("y".into());
    let mut t = CsvTable::new(&header);
    for (r, &(unit, week)) in design.rows.iter().enumerate() {
        let mut row = vec![units[unit].clone(), week.to_string()];
        row.extend(design.x.row(r).iter().map(|&v| num(v)));
        row.push(num(y[r]));
        t.push(row);
    }
    t
}
