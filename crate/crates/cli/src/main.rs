use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crimecast::econ::{fit_model, ModelKind};
use crimecast::eval::{
    compare_settings, forecast_window, hyperparameter_robustness, run_rolling, select_feature_definitions,
    EvaluationPlan, EvaluationReport, Method,
};
use crimecast::features::{assemble_design, CrimeType, PanelData, Setting};
use crimecast::io::{
    coefficients_table, design_table, forecasts_table, format_float, importance_table, ingest, moran_table, mse_table,
    robustness_table, selection_table, windows_table, write_csv, write_synthetic, CsvTable, Ingested, RunConfig,
    SyntheticKind, SyntheticSpec,
};
use crimecast::ml::{aggregate_importance, MlKind};
use crimecast::spatial::{morans_i, SpatialStructure};
use crimecast::{Error, Result};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Areal crime-count forecasting with spatial panel models and tree
/// ensembles.
#[derive(Debug, Parser)]
#[command(name = "crimecast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` and the CRIMECAST_OUTPUT_DIR variable.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every input file and print a panel summary.
    Validate(Common),
    /// Write a synthetic input set.
    Synth {
        /// Synthetic spec (TOML); defaults apply to missing keys.
        #[arg(short, long)]
        spec: Option<PathBuf>,
        /// Destination directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<SyntheticKind>,
        #[arg(long)]
        grid_side: Option<usize>,
        #[arg(long)]
        weeks: Option<u32>,
    },
    /// Write the assembled design matrix of one setting.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        setting: u8,
    },
    /// Fit one econometric model and write its coefficient table.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 8)]
        setting: u8,
        /// Last observed week; defaults to the end of the panel.
        #[arg(long)]
        last_week: Option<u32>,
    },
    /// One-step-ahead forecast from the weeks up to `last_week`.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Method,
        #[arg(long, default_value_t = 8)]
        setting: u8,
        #[arg(long)]
        last_week: u32,
    },
    /// Rolling evaluation of every configured model and setting.
    Evaluate(Common),
    /// Sweep the feature definitions with the CAR model on setting 8.
    SelectFeatures(Common),
    /// Mean permutation-importance ranks of the configured ML models.
    Importance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        setting: u8,
    },
    /// Weekly Moran's I of the crime counts.
    Diagnose(Common),
}

fn parse_kind(s: &str) -> std::result::Result<SyntheticKind, String> {
    match s {
        "sar" | "sar_gaussian" => Ok(SyntheticKind::SarGaussian),
        "car" | "car_gaussian" => Ok(SyntheticKind::CarGaussian),
        "glmm" | "poisson_glmm" => Ok(SyntheticKind::PoissonGlmm),
        other => Err(format!("unknown synthetic kind `{other}` (sar, car, glmm)")),
    }
}

struct Run {
    config: RunConfig,
    data: Ingested,
    structure: SpatialStructure,
}

impl Run {
    fn load(common: &Common) -> Result<Self> {
        let mut config = RunConfig::load(&common.config)?;
        if let Some(dir) = &common.output_dir {
            config.output_dir = dir.clone();
        }
        config.check_paths()?;
        let data = ingest(&config.inputs)?;
        let structure = SpatialStructure::new(data.weights.clone())?;
        Ok(Self {
            config,
            data,
            structure,
        })
    }

    fn panel(&self) -> &PanelData {
        &self.data.panel
    }

    fn plan(&self) -> Result<EvaluationPlan> {
        EvaluationPlan::new(self.panel().n_weeks(), self.config.h)
    }

    fn write(&self, name: &str, table: &CsvTable) -> Result<()> {
        let path = self.config.output_dir.join(name);
        write_csv(&path, table)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn validate(common: &Common) -> Result<()> {
    let run = Run::load(common)?;
    let p = run.panel();
    println!(
        "ok: {} units, {} weeks, {} adjacency pairs, {} self-trips dropped",
        p.n_units(),
        p.n_weeks(),
        run.data.weights.n_edges(),
        run.data.dropped_self_trips
    );
    if let Some(i) = (0..p.n_units()).find(|&i| run.data.weights.degree(i) == 0) {
        println!("warning: unit `{}` has no neighbours", p.units[i]);
    }
    Ok(())
}

fn synth(
    spec: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    kind: Option<SyntheticKind>,
    grid_side: Option<usize>,
    weeks: Option<u32>,
) -> Result<()> {
    let mut s: SyntheticSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec::default(),
    };
    s.seed = seed.unwrap_or(s.seed);
    s.kind = kind.unwrap_or(s.kind);
    s.grid_side = grid_side.unwrap_or(s.grid_side);
    s.n_weeks = weeks.unwrap_or(s.n_weeks);
    let generated = write_synthetic(&s, out)?;
    println!(
        "wrote {} units × {} weeks to {}",
        generated.panel.n_units(),
        generated.panel.n_weeks(),
        out.display()
    );
    Ok(())
}

fn features(common: &Common, setting: u8) -> Result<()> {
    let run = Run::load(common)?;
    let setting = Setting::new(setting)?;
    let t = run.panel().n_weeks();
    let (x, y) = assemble_design(run.panel(), run.config.crime_type, setting, run.config.modes, 2..=t)?;
    let table = design_table(&x, y.as_slice(), &run.panel().units);
    run.write(&format!("design_s{}.csv", setting.id()), &table)
}

fn fit(common: &Common, kind: ModelKind, setting: u8, last_week: Option<u32>) -> Result<()> {
    let run = Run::load(common)?;
    let setting = Setting::new(setting)?;
    let t = last_week.unwrap_or(run.panel().n_weeks());
    let history = run.panel().truncated(t);
    if history.n_weeks() != t {
        return Err(Error::WeekOutOfRange {
            week: t,
            n_weeks: run.panel().n_weeks(),
        });
    }
    let (x, y) = assemble_design(&history, run.config.crime_type, setting, run.config.modes, 2..=t)?;
    let fit = fit_model(kind, &x, &y, &run.structure)?;
    for w in &fit.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(sp) = &fit.spatial {
        println!("{} = {:.6} (s.e. {:.6})", sp.name(), sp.value(), sp.std_error());
    }
    run.write(
        &format!("coefficients_{}_s{}.csv", kind, setting.id()),
        &coefficients_table(&fit),
    )
}

fn forecast(common: &Common, method: Method, setting: u8, last_week: u32) -> Result<()> {
    let run = Run::load(common)?;
    let setting = Setting::new(setting)?;
    let n_weeks = run.panel().n_weeks();
    if last_week < 2 || last_week > n_weeks {
        return Err(Error::WeekOutOfRange {
            week: last_week,
            n_weeks,
        });
    }
    let cfg = run.config.eval_config()?;
    let history = run.panel().truncated(last_week);
    let wf = forecast_window(&history, run.config.crime_type, setting, method, &run.structure, &cfg)?;
    let target = last_week + 1;
    let actual = (target <= n_weeks).then(|| run.panel().crime_week(run.config.crime_type, target));
    let mut table = CsvTable::new(&["unit_id", "week", "forecast", "actual"]);
    for (i, unit) in run.panel().units.iter().enumerate() {
        table.push(vec![
            unit.clone(),
            target.to_string(),
            format_float(wf.forecast[i]),
            actual.as_ref().map_or_else(String::new, |a| format_float(a[i])),
        ]);
    }
    run.write(
        &format!("forecast_{}_s{}_w{}.csv", method, setting.id(), target),
        &table,
    )
}

fn evaluate(common: &Common) -> Result<()> {
    let run = Run::load(common)?;
    let cfg = run.config.eval_config()?;
    let plan = run.plan()?;
    let ct = run.config.crime_type;
    let comparison = compare_settings(
        run.panel(),
        ct,
        &run.config.methods,
        &run.config.settings,
        &plan,
        &run.structure,
        &cfg,
    )?;
    run.write("mse_summary.csv", &mse_table(&comparison))?;
    run.write(
        "forecasts.csv",
        &forecasts_table(&comparison.reports, &run.panel().units),
    )?;
    run.write("windows.csv", &windows_table(&comparison.reports))?;
    for report in comparison.reports.iter().filter(|r| r.method.is_ml()) {
        let summary = hyperparameter_robustness(report)?;
        run.write(
            &format!("robustness_{}_s{}.csv", report.method, report.setting.id()),
            &robustness_table(&summary),
        )?;
    }
    if cfg.importance {
        write_importance(&run, &comparison.reports)?;
    }
    for row in &comparison.rows {
        println!(
            "{ct} {:<5} setting {} mse {:.4} ({:+.1}% vs setting 1)",
            row.method.to_string(),
            row.setting.id(),
            row.mse,
            row.pct_vs_setting1
        );
    }
    Ok(())
}

fn write_importance(run: &Run, reports: &[EvaluationReport]) -> Result<()> {
    for r in reports.iter().filter(|r| r.method.is_ml()) {
        let windows: Vec<_> = r.windows.iter().filter_map(|w| w.meta.importance.clone()).collect();
        if windows.is_empty() {
            continue;
        }
        let report = aggregate_importance(&windows)?;
        run.write(
            &format!("importance_{}_s{}.csv", r.method, r.setting.id()),
            &importance_table(r.crime_type, r.setting, &report),
        )?;
    }
    Ok(())
}

fn select_features(common: &Common) -> Result<()> {
    let run = Run::load(common)?;
    let cfg = run.config.eval_config()?;
    let plan = run.plan()?;
    let result = select_feature_definitions(run.panel(), run.config.crime_type, &plan, &run.structure, &cfg)?;
    run.write("selection.csv", &selection_table(&result))?;
    println!(
        "selected twitter = {}, taxi = {}, poi = {} (mse {:.4})",
        result.winner.twitter, result.winner.taxi, result.winner.poi, result.winner_mse
    );
    Ok(())
}

fn importance(common: &Common, setting: u8) -> Result<()> {
    let run = Run::load(common)?;
    let mut cfg = run.config.eval_config()?;
    cfg.importance = true;
    let plan = run.plan()?;
    let setting = Setting::new(setting)?;
    let mut methods: Vec<Method> = run.config.methods.iter().copied().filter(|m| m.is_ml()).collect();
    if methods.is_empty() {
        methods = MlKind::ALL.iter().map(|&k| Method::Ml(k)).collect();
    }
    let reports = methods
        .into_iter()
        .map(|m| {
            run_rolling(
                run.panel(),
                run.config.crime_type,
                setting,
                m,
                &plan,
                &run.structure,
                &cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    write_importance(&run, &reports)
}

fn diagnose(common: &Common) -> Result<()> {
    let run = Run::load(common)?;
    let ct: CrimeType = run.config.crime_type;
    let mut rows = Vec::new();
    for week in 1..=run.panel().n_weeks() {
        let y = run.panel().crime_week(ct, week);
        match morans_i(&y, &run.data.weights) {
            Ok(m) => rows.push((week, m)),
            Err(Error::ZeroVariance) => eprintln!("warning: week {week} has constant counts; skipped"),
            Err(e) => return Err(e),
        }
    }
    if !rows.is_empty() {
        let mean = rows.iter().map(|(_, m)| m.i_stat).sum::<f64>() / rows.len() as f64;
        println!("average Moran's I over {} weeks: {mean:.4}", rows.len());
    }
    run.write(&format!("moran_{ct}.csv"), &moran_table(&rows))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Synth {
            spec,
            out,
            seed,
            kind,
            grid_side,
            weeks,
        } => synth(spec.as_deref(), &out, seed, kind, grid_side, weeks),
        Command::Features { common, setting } => features(&common, setting),
        Command::Fit {
            common,
            model,
            setting,
            last_week,
        } => fit(&common, model, setting, last_week),
        Command::Forecast {
            common,
            model,
            setting,
            last_week,
        } => forecast(&common, model, setting, last_week),
        Command::Evaluate(c) => evaluate(&c),
        Command::SelectFeatures(c) => select_features(&c),
        Command::Importance { common, setting } => importance(&common, setting),
        Command::Diagnose(c) => diagnose(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_VALIDATION
            })
        }
    }
}
