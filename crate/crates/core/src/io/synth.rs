use std::fs;
use std::path::Path;

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::output::{format_float, write_csv, CsvTable};
use crate::error::{Error, Result};
use crate::features::{
    column_names, feature_block, CrimeType, FeatureModes, FlowMatrix, PanelData, PoiFeatureMode, Setting,
    TaxiFeatureMode, TwitterFeatureMode, CENSUS_COLUMNS, POI_CATEGORIES,
};
use crate::io::ingest::{
    CENSUS_HEADER, CRIME_HEADER, EDGES_HEADER, FLOWS_HEADER, POI_HEADER, POLYGONS_HEADER, TWEETS_HEADER,
};
use crate::linalg;
use crate::rng::{stream, Rng};
use crate::spatial::{build_precision, spectral_bounds, ArealPartition, Ring, SpatialWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    SarGaussian,
    CarGaussian,
    PoissonGlmm,
}

impl SyntheticKind {
    pub fn is_gaussian(self) -> bool {
        self != SyntheticKind::PoissonGlmm
    }
}

/// Parameters of a synthetic lattice panel. Crime in week `t` is driven by
/// the setting-8 features of week `t − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Lattice side; N = side².
    pub grid_side: usize,
    pub n_weeks: u32,
    pub kind: SyntheticKind,
    pub rho: f64,
    pub delta: f64,
    /// Noise standard deviation (Gaussian kinds) or random-effect scale.
    pub sigma: f64,
    /// Property-crime coefficients in setting-8 column order. The taxi
    /// entry is replaced by `taxi_effect`.
    pub beta: Option<Vec<f64>>,
    pub taxi_effect: Option<f64>,
    /// Taxi coefficient of the violent series.
    pub violent_taxi_effect: f64,
    pub twitter_mode: String,
    pub taxi_mode: String,
    pub poi_mode: String,
    /// Distance scale κ of the gravity kernel, in lattice cells.
    pub gravity_kappa: f64,
    /// Expected trips between two units of 1000 residents at distance 0.
    pub trip_scale: f64,
    /// Log-scale standard deviation of the weekly multiplicative trip noise.
    pub flow_noise_sd: f64,
    /// Expected weekly tweets per 1000 residents.
    pub tweet_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            grid_side: 10,
            n_weeks: 26,
            kind: SyntheticKind::SarGaussian,
            rho: 0.0629,
            delta: 0.1357,
            sigma: 1.0,
            beta: None,
            taxi_effect: None,
            violent_taxi_effect: 0.0,
            twitter_mode: "log_night".into(),
            taxi_mode: "destination".into(),
            poi_mode: "counts".into(),
            gravity_kappa: 1.0,
            trip_scale: 40.0,
            flow_noise_sd: 0.8,
            tweet_rate: 20.0,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn modes(&self) -> Result<FeatureModes> {
        let cfg = |e: Error| Error::Config(e.to_string());
        Ok(FeatureModes {
            twitter: self.twitter_mode.parse::<TwitterFeatureMode>().map_err(cfg)?,
            taxi: self.taxi_mode.parse::<TaxiFeatureMode>().map_err(cfg)?,
            poi: self.poi_mode.parse::<PoiFeatureMode>().map_err(cfg)?,
        })
    }

    pub fn n_units(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn taxi_effect(&self) -> f64 {
        self.taxi_effect.unwrap_or(match self.kind {
            SyntheticKind::PoissonGlmm => 0.02,
            _ => 0.5,
        })
    }

    /// Property-crime coefficients for the setting-8 design.
    pub fn beta(&self) -> Result<Vec<f64>> {
        let modes = self.modes()?;
        let names = column_names(Setting::new(8)?, modes);
        let mut beta = match &self.beta {
            Some(b) if b.len() != names.len() => {
                return Err(Error::Config(format!(
                    "beta has {} entries, the generating design has {} ({})",
                    b.len(),
                    names.len(),
                    names.join(", ")
                )))
            }
            Some(b) => b.clone(),
            None => default_beta(self.kind, modes.poi),
        };
        *beta.last_mut().expect("design has a taxi column") = self.taxi_effect();
        Ok(beta)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::Config("grid_side must be at least 2".into()));
        }
        if self.n_weeks < 3 {
            return Err(Error::Config("n_weeks must be at least 3".into()));
        }
        let positive = [
            ("sigma", self.sigma),
            ("gravity_kappa", self.gravity_kappa),
            ("trip_scale", self.trip_scale),
            ("tweet_rate", self.tweet_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.flow_noise_sd >= 0.0) {
            return Err(Error::Config("flow_noise_sd must be non-negative".into()));
        }
        Ok(())
    }
}

fn default_beta(kind: SyntheticKind, poi: PoiFeatureMode) -> Vec<f64> {
    // intercept, census, tweets, venues, taxi
    let (intercept, census, tweets, venue) = match kind {
        SyntheticKind::PoissonGlmm => (
            -0.5,
            [2e-4, 0.01, 0.4, 0.6, 0.4, 0.4, 0.8, 0.6],
            0.1,
            if poi == PoiFeatureMode::Counts { 0.01 } else { 0.3 },
        ),
        _ => (
            1.0,
            [1e-3, 0.05, 3.0, 6.0, 4.0, 4.0, 8.0, 6.0],
            1.0,
            if poi == PoiFeatureMode::Counts { 0.05 } else { 2.0 },
        ),
    };
    let n_poi = if poi == PoiFeatureMode::Counts {
        POI_CATEGORIES.len()
    } else {
        POI_CATEGORIES.len() - 1
    };
    let mut beta = vec![intercept];
    beta.extend(census);
    beta.push(tweets);
    beta.extend(std::iter::repeat_n(venue, n_poi));
    beta.push(0.0);
    beta
}

/// Generating parameters written next to the synthetic inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kind: SyntheticKind,
    pub column_names: Vec<String>,
    pub beta: Vec<f64>,
    pub violent_beta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub sigma: f64,
    pub twitter_mode: String,
    pub taxi_mode: String,
    pub poi_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub spec: SyntheticSpec,
    pub partition: ArealPartition,
    pub weights: SpatialWeights,
    /// Counts as written to disk.
    pub panel: PanelData,
    /// Pre-rounding responses (Gaussian kinds) or Poisson means, `[week - 1][unit]`.
    pub continuous_property: Vec<Vec<f64>>,
    pub continuous_violent: Vec<Vec<f64>>,
    pub truth: Truth,
}

pub fn unit_id(i: usize) -> String {
    format!("u{i:04}")
}

/// Unit squares on the lattice, unit `r · side + c` at column `c`, row `r`.
pub fn lattice_partition(side: usize) -> Result<ArealPartition> {
    let units = (0..side * side).map(unit_id).collect();
    let polygons = (0..side * side)
        .map(|i| {
            let (x, y) = ((i % side) as f64, (i / side) as f64);
            Ring::new(vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]])
                .map(|r| vec![r])
                .map_err(Error::Numerical)
        })
        .collect::<Result<Vec<_>>>()?;
    ArealPartition::new(units)?.with_polygons(polygons)
}

fn normals(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn static_covariates(n: usize, rng: &mut Rng) -> (Vec<[f64; 8]>, Vec<[u32; 9]>, Vec<f64>) {
    // (low, high) per census column after population
    const RANGES: [(f64, f64); 7] = [
        (25.0, 50.0),
        (0.42, 0.58),
        (0.0, 0.6),
        (0.0, 0.3),
        (0.0, 0.5),
        (0.0, 0.2),
        (0.0, 0.35),
    ];
    let census: Vec<[f64; 8]> = (0..n)
        .map(|_| {
            let mut row = [0.0; 8];
            row[0] = rng.random_range(500.0_f64..5000.0).round();
            for (k, (lo, hi)) in RANGES.iter().enumerate() {
                row[k + 1] = rng.random_range(*lo..*hi);
            }
            row
        })
        .collect();
    let poi = (0..n)
        .map(|_| {
            let mut row = [0u32; 9];
            for c in &mut row {
                let rate = rng.random_range(1.0..15.0);
                *c = Poisson::new(rate).expect("positive rate").sample(rng) as u32;
            }
            row
        })
        .collect();
    let night_share = (0..n).map(|_| rng.random_range(0.1..0.4)).collect();
    (census, poi, night_share)
}

fn tweets(
    spec: &SyntheticSpec,
    census: &[[f64; 8]],
    night_share: &[f64],
    rng: &mut Rng,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let weekly = LogNormal::new(0.0, 0.3).expect("valid lognormal");
    let mut all = Vec::with_capacity(spec.n_weeks as usize);
    let mut night = Vec::with_capacity(spec.n_weeks as usize);
    for _ in 0..spec.n_weeks {
        let g: f64 = weekly.sample(rng);
        let mut a = Vec::with_capacity(census.len());
        let mut b = Vec::with_capacity(census.len());
        for (row, &p) in census.iter().zip(night_share) {
            let rate = spec.tweet_rate * row[0] / 1000.0 * g * weekly.sample(rng);
            let count = Poisson::new(rate).expect("positive rate").sample(rng) as u64;
            a.push(count as u32);
            b.push(Binomial::new(count, p).expect("valid binomial").sample(rng) as u32);
        }
        all.push(a);
        night.push(b);
    }
    (all, night)
}

fn flows(spec: &SyntheticSpec, census: &[[f64; 8]], rng: &mut Rng) -> Result<Vec<FlowMatrix>> {
    let side = spec.grid_side;
    let n = spec.n_units();
    let noise = LogNormal::new(-spec.flow_noise_sd * spec.flow_noise_sd / 2.0, spec.flow_noise_sd)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = (i % side) as f64 - (j % side) as f64;
            let dy = (i / side) as f64 - (j / side) as f64;
            let d = (dx * dx + dy * dy).sqrt();
            kernel[i * n + j] =
                spec.trip_scale * census[i][0] / 1000.0 * census[j][0] / 1000.0 * (-d / spec.gravity_kappa).exp();
        }
    }
    (1..=spec.n_weeks)
        .map(|week| {
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let k = kernel[i * n + j];
                    if k == 0.0 {
                        continue;
                    }
                    let trips = (k * noise.sample(rng)).round();
                    if trips > 0.0 {
                        entries.push((i, j, trips));
                    }
                }
            }
            FlowMatrix::from_triplets(week, n, entries)
        })
        .collect()
}

/// Intrinsic-prior draw: σ · Σ_k z_k v_k / √λ_k over the non-null
/// eigenpairs of Q, so the effects sum to zero on every component.
fn intrinsic_effects(weights: &SpatialWeights, sigma: f64, rng: &mut Rng) -> Vec<f64> {
    let q = build_precision(weights).to_dense();
    let eig = SymmetricEigen::new(q);
    let n = weights.n();
    let mut eta = DVector::zeros(n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        let z: f64 = rng.sample(StandardNormal);
        if lambda > 1e-9 {
            eta += eig.eigenvectors.column(k) * (sigma * z / lambda.sqrt());
        }
    }
    eta.iter().copied().collect()
}

fn to_count(v: f64) -> Result<u32> {
    let c = v.max(0.0).round();
    if !(c < 1e8) {
        return Err(Error::Numerical(format!(
            "synthetic process diverged (value {v}); lower the taxi effect"
        )));
    }
    Ok(c as u32)
}

/// Builds a synthetic panel in memory.
pub fn generate_panel(spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let modes = spec.modes()?;
    let setting = Setting::new(8)?;
    let names = column_names(setting, modes);
    let beta = DVector::from_vec(spec.beta()?);
    let mut violent_beta = beta.clone();
    let k = names.len();
    violent_beta[k - 1] = spec.violent_taxi_effect;

    let n = spec.n_units();
    let partition = lattice_partition(spec.grid_side)?;
    let weights = SpatialWeights::lattice(spec.grid_side);
    let bounds = spectral_bounds(&weights)?;
    let (rho, delta) = match spec.kind {
        SyntheticKind::SarGaussian => (Some(spec.rho), None),
        SyntheticKind::CarGaussian => (None, Some(spec.delta)),
        SyntheticKind::PoissonGlmm => (None, None),
    };
    if let Some(p) = rho.or(delta) {
        if !bounds.contains(p) {
            return Err(Error::Config(format!(
                "spatial parameter {p} outside the admissible interval ({:.6}, {:.6})",
                bounds.lower, bounds.upper
            )));
        }
    }

    let (census, poi, night_share) = static_covariates(n, &mut stream(spec.seed, &[1]));
    let (tweets_all, tweets_night) = tweets(spec, &census, &night_share, &mut stream(spec.seed, &[2]));
    let flows = flows(spec, &census, &mut stream(spec.seed, &[3]))?;
    let mut panel = PanelData {
        units: partition.units().to_vec(),
        property: Vec::new(),
        violent: Vec::new(),
        census,
        tweets_all,
        tweets_night,
        poi,
        flows,
    };

    let noise_chol = match spec.kind {
        SyntheticKind::CarGaussian => Some(linalg::cholesky(weights.shifted_identity(spec.delta), "I - δW")?),
        _ => None,
    };
    let sar_chol = match spec.kind {
        SyntheticKind::SarGaussian => Some(linalg::cholesky(weights.shifted_identity(spec.rho), "I - ρW")?),
        _ => None,
    };
    let eta: Option<[Vec<f64>; 2]> = (spec.kind == SyntheticKind::PoissonGlmm).then(|| {
        let mut rng = stream(spec.seed, &[4]);
        [
            intrinsic_effects(&weights, spec.sigma, &mut rng),
            intrinsic_effects(&weights, spec.sigma, &mut rng),
        ]
    });

    let mut continuous = [Vec::new(), Vec::new()];
    let mut rngs = [stream(spec.seed, &[5]), stream(spec.seed, &[6])];
    for week in 1..=spec.n_weeks {
        for (c, crime_type) in CrimeType::ALL.into_iter().enumerate() {
            let b = if c == 0 { &beta } else { &violent_beta };
            let x = if week == 1 {
                feature_block(&panel_with_week_zero(&panel, n), crime_type, setting, modes, 1)?
            } else {
                feature_block(&panel, crime_type, setting, modes, week - 1)?
            };
            let mean = &x * b;
            let rng = &mut rngs[c];
            let y: Vec<f64> = match spec.kind {
                SyntheticKind::SarGaussian => {
                    let rhs = mean + normals(rng, n) * spec.sigma;
                    sar_chol
                        .as_ref()
                        .expect("SAR factor")
                        .solve(&rhs)
                        .iter()
                        .copied()
                        .collect()
                }
                SyntheticKind::CarGaussian => {
                    // ε = σ L⁻ᵀ z has covariance σ² (I − δW)⁻¹
                    let l = noise_chol.as_ref().expect("CAR factor").l();
                    let eps = l
                        .transpose()
                        .solve_upper_triangular(&normals(rng, n))
                        .ok_or_else(|| Error::Numerical("singular CAR factor".into()))?;
                    (mean + eps * spec.sigma).iter().copied().collect()
                }
                SyntheticKind::PoissonGlmm => {
                    let eta = &eta.as_ref().expect("random effects")[c];
                    mean.iter().zip(eta).map(|(m, e)| (m + e).min(20.0).exp()).collect()
                }
            };
            let counts = match spec.kind {
                SyntheticKind::PoissonGlmm => y
                    .iter()
                    .map(|&mu| to_count(Poisson::new(mu).map_or(0.0, |p| p.sample(rng))))
                    .collect::<Result<Vec<_>>>()?,
                _ => y.iter().map(|&v| to_count(v)).collect::<Result<Vec<_>>>()?,
            };
            continuous[c].push(y);
            if c == 0 {
                panel.property.push(counts);
            } else {
                panel.violent.push(counts);
            }
        }
    }
    panel.validate()?;
    let [continuous_property, continuous_violent] = continuous;
    let truth = Truth {
        kind: spec.kind,
        column_names: names,
        beta: beta.iter().copied().collect(),
        violent_beta: violent_beta.iter().copied().collect(),
        rho,
        delta,
        sigma: spec.sigma,
        twitter_mode: modes.twitter.to_string(),
        taxi_mode: modes.taxi.to_string(),
        poi_mode: modes.poi.to_string(),
        eta: eta.map(|[p, _]| p),
    };
    Ok(SyntheticPanel {
        spec: spec.clone(),
        partition,
        weights,
        panel,
        continuous_property,
        continuous_violent,
        truth,
    })
}

/// One-week panel of zero crime, tweets and flows carrying the static
/// covariates; its feature block is the first week's design.
fn panel_with_week_zero(panel: &PanelData, n: usize) -> PanelData {
    PanelData {
        units: panel.units.clone(),
        property: vec![vec![0; n]],
        violent: vec![vec![0; n]],
        census: panel.census.clone(),
        tweets_all: vec![vec![0; n]],
        tweets_night: vec![vec![0; n]],
        poi: panel.poi.clone(),
        flows: vec![FlowMatrix::zeros(0, n)],
    }
}

fn fmt(v: f64) -> String {
    format_float(v)
}

/// Generates a panel and writes the full input file set, `continuous.csv`,
/// `truth.toml` and a ready-to-run `run.toml` into `dir`.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticPanel> {
    let s = generate_panel(spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = &s.panel;
    let n = p.n_units();
    let side = spec.grid_side;

    let mut census = CsvTable::new(&CENSUS_HEADER);
    for (u, row) in p.units.iter().zip(&p.census) {
        let mut r = vec![u.clone()];
        r.extend(row.iter().map(|&v| fmt(v)));
        census.push(r);
    }
    debug_assert_eq!(CENSUS_COLUMNS.len() + 1, CENSUS_HEADER.len());
    write_csv(&dir.join("census.csv"), &census)?;

    let mut crime = CsvTable::new(&CRIME_HEADER);
    let mut tweets = CsvTable::new(&TWEETS_HEADER);
    let mut cont = CsvTable::new(&CRIME_HEADER);
    for w in 0..p.n_weeks() as usize {
        for i in 0..n {
            let (u, week) = (p.units[i].clone(), (w + 1).to_string());
            crime.push(vec![
                u.clone(),
                week.clone(),
                p.property[w][i].to_string(),
                p.violent[w][i].to_string(),
            ]);
            cont.push(vec![
                u.clone(),
                week.clone(),
                fmt(s.continuous_property[w][i]),
                fmt(s.continuous_violent[w][i]),
            ]);
            if p.tweets_all[w][i] > 0 {
                tweets.push(vec![
                    u,
                    week,
                    p.tweets_all[w][i].to_string(),
                    p.tweets_night[w][i].to_string(),
                ]);
            }
        }
    }
    write_csv(&dir.join("crime.csv"), &crime)?;
    write_csv(&dir.join("tweets.csv"), &tweets)?;
    write_csv(&dir.join("continuous.csv"), &cont)?;

    let mut poi = CsvTable::new(&POI_HEADER);
    for (u, row) in p.units.iter().zip(&p.poi) {
        for (cat, &c) in POI_CATEGORIES.iter().zip(row) {
            if c > 0 {
                poi.push(vec![u.clone(), cat.to_string(), c.to_string()]);
            }
        }
    }
    write_csv(&dir.join("poi.csv"), &poi)?;

    let mut flows = CsvTable::new(&FLOWS_HEADER);
    for f in &p.flows {
        for (i, j, trips) in f.triplets() {
            flows.push(vec![
                f.week().to_string(),
                p.units[i].clone(),
                p.units[j].clone(),
                fmt(trips),
            ]);
        }
    }
    write_csv(&dir.join("flows.csv"), &flows)?;

    let mut edges = CsvTable::new(&EDGES_HEADER);
    for i in 0..n {
        for &j in s.weights.neighbours(i) {
            if i < j {
                edges.push(vec![p.units[i].clone(), p.units[j].clone()]);
            }
        }
    }
    write_csv(&dir.join("edges.csv"), &edges)?;

    let mut polygons = CsvTable::new(&POLYGONS_HEADER);
    for i in 0..n {
        let (x, y) = ((i % side) as f64, (i / side) as f64);
        for (v, (vx, vy)) in [(x, y), (x + 1.0, y), (x + 1.0, y + 1.0), (x, y + 1.0)]
            .into_iter()
            .enumerate()
        {
            polygons.push(vec![p.units[i].clone(), "0".into(), v.to_string(), fmt(vx), fmt(vy)]);
        }
    }
    write_csv(&dir.join("polygons.csv"), &polygons)?;

    let truth = toml::to_string(&s.truth).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("truth.toml"), truth).map_err(|e| Error::io(dir.join("truth.toml"), e))?;
    let run = format!(
        "crime_type = \"property\"\nseed = {}\nh = {}\noutput_dir = \"output\"\n\n[features]\ntwitter = \"{}\"\ntaxi = \"{}\"\npoi = \"{}\"\n\n[inputs]\ndir = \".\"\n",
        spec.seed,
        spec.n_weeks / 2,
        s.truth.twitter_mode,
        s.truth.taxi_mode,
        s.truth.poi_mode
    );
    fs::write(dir.join("run.toml"), run).map_err(|e| Error::io(dir.join("run.toml"), e))?;
    Ok(s)
}

/// `[week - 1][unit]` values for property and violent crime.
pub type ContinuousPanel = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Reads `continuous.csv` back as `[week - 1][unit]` arrays for both types.
pub fn read_continuous(path: &Path, units: &[String], n_weeks: u32) -> Result<ContinuousPanel> {
    let n = units.len();
    let index: std::collections::HashMap<&str, usize> =
        units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let mut property = vec![vec![f64::NAN; n]; n_weeks as usize];
    let mut violent = property.clone();
    super::table::Table::open(path, &CRIME_HEADER)?.for_each(|row| {
        let id = row.str("unit_id")?;
        let i = *index
            .get(id)
            .ok_or_else(|| row.error("unit_id", format!("unknown unit id `{id}`")))?;
        let w = row.week("week")?;
        if w > n_weeks {
            return Err(row.error("week", format!("week {w} beyond {n_weeks}")));
        }
        property[w as usize - 1][i] = row.real("property")?;
        violent[w as usize - 1][i] = row.real("violent")?;
        Ok(())
    })?;
    Ok((property, violent))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flows_have_empty_diagonal() {
        let s = generate_panel(&SyntheticSpec {
            grid_side: 4,
            n_weeks: 4,
            ..SyntheticSpec::default()
        })
        .unwrap();
        for f in &s.panel.flows {
            assert!((0..16).all(|i| f.get(i, i) == 0.0));
        }
        assert_eq!(s.panel.n_weeks(), 4);
    }

    #[test]
    fn rejects_inadmissible_rho() {
        let spec = SyntheticSpec {
            grid_side: 4,
            rho: 0.5,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_panel(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn beta_length_checked() {
        let spec = SyntheticSpec {
            beta: Some(vec![1.0; 3]),
            ..SyntheticSpec::default()
        };
        assert!(spec.beta().is_err());
    }

    #[test]
    fn glmm_effects_sum_to_zero() {
        let s = generate_panel(&SyntheticSpec {
            grid_side: 5,
            n_weeks: 4,
            kind: SyntheticKind::PoissonGlmm,
            sigma: 0.5,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let eta = s.truth.eta.unwrap();
        assert!(eta.iter().sum::<f64>().abs() < 1e-9);
    }
}
