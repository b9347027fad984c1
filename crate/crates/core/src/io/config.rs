use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ingest::InputPaths;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, Method};
use crate::features::{CrimeType, FeatureModes, Setting};
use crate::ml::{MlKind, ParamGrid};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "CRIMECAST_OUTPUT_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    crime_type: String,
    #[serde(default)]
    settings: Option<Vec<u8>>,
    #[serde(default)]
    models: Option<Vec<String>>,
    #[serde(default)]
    h: Option<u32>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    grid_spec: Option<PathBuf>,
    #[serde(default)]
    importance: bool,
    #[serde(default)]
    features: RawFeatures,
    inputs: RawInputs,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatures {
    twitter: Option<String>,
    taxi: Option<String>,
    poi: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInputs {
    dir: Option<PathBuf>,
    census: Option<PathBuf>,
    crime: Option<PathBuf>,
    tweets: Option<PathBuf>,
    poi: Option<PathBuf>,
    flows: Option<PathBuf>,
    edges: Option<PathBuf>,
    polygons: Option<PathBuf>,
}

/// A validated run configuration. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub crime_type: CrimeType,
    pub settings: Vec<Setting>,
    pub methods: Vec<Method>,
    pub h: Option<u32>,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub grid_spec: Option<PathBuf>,
    pub importance: bool,
    pub modes: FeatureModes,
    pub inputs: InputPaths,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(value: Option<String>, default: T) -> Result<T> {
    value.map_or(Ok(default), |s| {
        s.parse().map_err(|e: Error| Error::Config(e.to_string()))
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses TOML text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let crime_type = raw
            .crime_type
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let settings = match raw.settings {
            Some(ids) if ids.is_empty() => return Err(Error::Config("`settings` is empty".into())),
            Some(ids) => ids
                .into_iter()
                .map(|id| Setting::new(id).map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => Setting::all(),
        };
        let methods = match raw.models {
            Some(m) if m.is_empty() => return Err(Error::Config("`models` is empty".into())),
            Some(m) => m
                .iter()
                .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
                .collect::<Result<Vec<Method>>>()?,
            None => Method::ALL.to_vec(),
        };
        if raw.seed.is_none() && methods.iter().any(|m| m.is_ml()) {
            return Err(Error::Config("`seed` is required when an ML model is requested".into()));
        }
        let defaults = FeatureModes::default();
        let modes = FeatureModes {
            twitter: parse_with(raw.features.twitter, defaults.twitter)?,
            taxi: parse_with(raw.features.taxi, defaults.taxi)?,
            poi: parse_with(raw.features.poi, defaults.poi)?,
        };
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let inputs_dir = resolve(raw.inputs.dir.unwrap_or_default());
        let pick = |p: Option<PathBuf>, name: &str| p.map_or_else(|| inputs_dir.join(name), &resolve);
        let polygons = match raw.inputs.polygons {
            Some(p) => Some(resolve(p)),
            None => Some(inputs_dir.join("polygons.csv")).filter(|p| p.exists()),
        };
        let inputs = InputPaths {
            census: pick(raw.inputs.census, "census.csv"),
            crime: pick(raw.inputs.crime, "crime.csv"),
            tweets: pick(raw.inputs.tweets, "tweets.csv"),
            poi: pick(raw.inputs.poi, "poi.csv"),
            flows: pick(raw.inputs.flows, "flows.csv"),
            edges: pick(raw.inputs.edges, "edges.csv"),
            polygons,
        };
        let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => resolve(raw.output_dir.unwrap_or_else(|| PathBuf::from("output"))),
        };
        Ok(Self {
            crime_type,
            settings,
            methods,
            h: raw.h,
            seed: raw.seed,
            output_dir,
            grid_spec: raw.grid_spec.map(resolve),
            importance: raw.importance,
            modes,
            inputs,
        })
    }

    /// Fails on the first referenced file that does not exist.
    pub fn check_paths(&self) -> Result<()> {
        let mut paths = self.inputs.all();
        paths.extend(self.grid_spec.as_deref());
        for p in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        let grids = match &self.grid_spec {
            Some(p) => load_grids(p)?,
            None => BTreeMap::new(),
        };
        Ok(EvalConfig {
            modes: self.modes,
            seed: self.seed.unwrap_or(0),
            grids,
            importance: self.importance,
        })
    }
}

/// Reads a grid file with one table per model kind, e.g.
/// `[gbm]` followed by `max_depth = [3, 7]`.
pub fn load_grids(path: &Path) -> Result<BTreeMap<MlKind, ParamGrid>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grids(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_grids(text: &str) -> Result<BTreeMap<MlKind, ParamGrid>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut grids = BTreeMap::new();
    for (name, value) in &table {
        let kind: MlKind = name.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        let toml::Value::Table(axes) = value else {
            return Err(Error::Config(format!("`{name}` must be a table of grid axes")));
        };
        grids.insert(kind, ParamGrid::from_toml(kind, axes)?);
    }
    Ok(grids)
}
