use std::fmt;
use std::str::FromStr;

use super::panel::FlowMatrix;
use crate::error::{Error, Result};

/// How lagged crime elsewhere is weighted by taxi flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaxiFeatureMode {
    /// c_i = Σ_j f_ij y_j
    Raw,
    /// c_i = Σ_j (f_ji / Σ_k f_jk) y_j
    SourceNormalised,
    /// c_i = Σ_j (f_ji / Σ_k f_ki) y_j
    DestinationNormalised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TwitterFeatureMode {
    All,
    /// Tweets sent in [22:00, 06:00).
    Night,
    LogAll,
    LogNight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PoiFeatureMode {
    Counts,
    Shares,
}

impl TaxiFeatureMode {
    pub const ALL: [TaxiFeatureMode; 3] = [
        TaxiFeatureMode::Raw,
        TaxiFeatureMode::DestinationNormalised,
        TaxiFeatureMode::SourceNormalised,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaxiFeatureMode::Raw => "raw",
            TaxiFeatureMode::SourceNormalised => "source",
            TaxiFeatureMode::DestinationNormalised => "destination",
        }
    }
}

impl TwitterFeatureMode {
    pub const ALL: [TwitterFeatureMode; 4] = [
        TwitterFeatureMode::All,
        TwitterFeatureMode::Night,
        TwitterFeatureMode::LogAll,
        TwitterFeatureMode::LogNight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TwitterFeatureMode::All => "all",
            TwitterFeatureMode::Night => "night",
            TwitterFeatureMode::LogAll => "log_all",
            TwitterFeatureMode::LogNight => "log_night",
        }
    }
}

impl PoiFeatureMode {
    pub const ALL: [PoiFeatureMode; 2] = [PoiFeatureMode::Counts, PoiFeatureMode::Shares];

    pub fn as_str(self) -> &'static str {
        match self {
            PoiFeatureMode::Counts => "counts",
            PoiFeatureMode::Shares => "shares",
        }
    }
}

macro_rules! str_enum {
    ($t:ty) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                <$t>::ALL
                    .into_iter()
                    .find(|m| m.as_str() == s)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown {} `{s}`", stringify!($t))))
            }
        }
    };
}

str_enum!(TaxiFeatureMode);
str_enum!(TwitterFeatureMode);
str_enum!(PoiFeatureMode);

/// The chosen definition for each of the three novel feature groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureModes {
    pub twitter: TwitterFeatureMode,
    pub taxi: TaxiFeatureMode,
    pub poi: PoiFeatureMode,
}

impl Default for FeatureModes {
    fn default() -> Self {
        Self {
            twitter: TwitterFeatureMode::LogNight,
            taxi: TaxiFeatureMode::DestinationNormalised,
            poi: PoiFeatureMode::Counts,
        }
    }
}

/// Taxi feature for one week. `y_prev` holds the crime counts the flows
/// are applied to.
pub fn taxi_feature(f: &FlowMatrix, y_prev: &[f64], mode: TaxiFeatureMode) -> Result<Vec<f64>> {
    let n = f.n();
    if y_prev.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_prev.len(),
        });
    }
    if y_prev.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::NegativeValue("lagged crime counts"));
    }
    let mut c = vec![0.0; n];
    match mode {
        TaxiFeatureMode::Raw => {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = f.row(i).iter().map(|&(j, fij)| fij * y_prev[j]).sum();
            }
        }
        TaxiFeatureMode::SourceNormalised => {
            let out = f.outflows();
            for j in 0..n {
                if out[j] == 0.0 {
                    continue;
                }
                for &(i, fji) in f.row(j) {
                    c[i] += fji / out[j] * y_prev[j];
                }
            }
        }
        TaxiFeatureMode::DestinationNormalised => {
            for j in 0..n {
                for &(i, fji) in f.row(j) {
                    c[i] += fji * y_prev[j];
                }
            }
            for (ci, inflow) in c.iter_mut().zip(f.inflows()) {
                *ci = if inflow > 0.0 { *ci / inflow } else { 0.0 };
            }
        }
    }
    Ok(c)
}

pub fn twitter_feature(all: &[f64], night: &[f64], mode: TwitterFeatureMode) -> Result<Vec<f64>> {
    if all.len() != night.len() {
        return Err(Error::DimensionMismatch {
            expected: all.len(),
            got: night.len(),
        });
    }
    if all.iter().chain(night).any(|&v| !(v >= 0.0)) {
        return Err(Error::NegativeValue("tweet counts"));
    }
    if let Some(i) = (0..all.len()).find(|&i| night[i] > all[i]) {
        return Err(Error::NightExceedsAll(i));
    }
    Ok(match mode {
        TwitterFeatureMode::All => all.to_vec(),
        TwitterFeatureMode::Night => night.to_vec(),
        TwitterFeatureMode::LogAll => all.iter().map(|v| v.ln_1p()).collect(),
        TwitterFeatureMode::LogNight => night.iter().map(|v| v.ln_1p()).collect(),
    })
}

pub fn poi_feature(counts: &[[f64; 9]], mode: PoiFeatureMode) -> Result<Vec<[f64; 9]>> {
    if counts.iter().flatten().any(|&v| !(v >= 0.0)) {
        return Err(Error::NegativeValue("venue counts"));
    }
    Ok(match mode {
        PoiFeatureMode::Counts => counts.to_vec(),
        PoiFeatureMode::Shares => counts
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.map(|v| v / total)
                } else {
                    [0.0; 9]
                }
            })
            .collect(),
    })
}
