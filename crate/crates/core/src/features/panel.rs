use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Census covariates in column order.
pub const CENSUS_COLUMNS: [&str; 8] = [
    "population",
    "median_age",
    "male",
    "black",
    "asian",
    "hispanic",
    "vacancy",
    "female_hh",
];

/// Venue categories in column order.
pub const POI_CATEGORIES: [&str; 9] = [
    "nightlife",
    "food",
    "arts_entertainment",
    "residence",
    "shops",
    "travel",
    "outdoors_recreation",
    "college_education",
    "professional",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrimeType {
    Property,
    Violent,
}

impl CrimeType {
    pub const ALL: [CrimeType; 2] = [CrimeType::Property, CrimeType::Violent];

    pub fn as_str(self) -> &'static str {
        match self {
            CrimeType::Property => "property",
            CrimeType::Violent => "violent",
        }
    }
}

impl fmt::Display for CrimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrimeType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "property" => Ok(CrimeType::Property),
            "violent" => Ok(CrimeType::Violent),
            other => Err(Error::InvalidArgument(format!("unknown crime type `{other}`"))),
        }
    }
}

/// Weekly origin→destination trip counts with an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    week: u32,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FlowMatrix {
    /// Sums duplicate (origin, dest) entries; drops explicit zeros.
    pub fn from_triplets(week: u32, n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, f) in entries {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(j) + 1,
                });
            }
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::NegativeValue("flow matrix"));
            }
            if f == 0.0 {
                continue;
            }
            if i == j {
                return Err(Error::InvalidArgument(format!(
                    "flow matrix for week {week} has a non-zero diagonal entry at {i}"
                )));
            }
            rows[i].push((j, f));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(Self { week, rows })
    }

    pub fn from_dense(week: u32, f: &DMatrix<f64>) -> Result<Self> {
        if f.nrows() != f.ncols() {
            return Err(Error::DimensionMismatch {
                expected: f.nrows(),
                got: f.ncols(),
            });
        }
        let n = f.nrows();
        let entries = (0..n).flat_map(|i| (0..n).map(move |j| (i, j, f[(i, j)])));
        Self::from_triplets(week, n, entries)
    }

    pub fn zeros(week: u32, n: usize) -> Self {
        Self {
            week,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn week(&self) -> u32 {
        self.week
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Non-zero (dest, trips) pairs leaving `origin`, sorted by dest.
    pub fn row(&self, origin: usize) -> &[(usize, f64)] {
        &self.rows[origin]
    }

    pub fn get(&self, origin: usize, dest: usize) -> f64 {
        self.rows[origin]
            .binary_search_by_key(&dest, |&(j, _)| j)
            .map(|k| self.rows[origin][k].1)
            .unwrap_or(0.0)
    }

    pub fn outflows(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, f)| f).sum()).collect()
    }

    pub fn inflows(&self) -> Vec<f64> {
        let mut inflow = vec![0.0; self.n()];
        for row in &self.rows {
            for &(j, f) in row {
                inflow[j] += f;
            }
        }
        inflow
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, f)| (i, j, f)))
    }

    pub fn scaled(&self, kappa: f64) -> Self {
        Self {
            week: self.week,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, f)| (j, f * kappa)).collect())
                .collect(),
        }
    }
}

/// Weekly crime counts (one panel per crime type) with static census and
/// venue covariates and weekly tweet and taxi-flow data.
///
/// Temporal arrays are indexed `[week - 1][unit]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub units: Vec<String>,
    pub property: Vec<Vec<u32>>,
    pub violent: Vec<Vec<u32>>,
    pub census: Vec<[f64; 8]>,
    pub tweets_all: Vec<Vec<u32>>,
    pub tweets_night: Vec<Vec<u32>>,
    pub poi: Vec<[u32; 9]>,
    pub flows: Vec<FlowMatrix>,
}

impl PanelData {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_weeks(&self) -> u32 {
        self.property.len() as u32
    }

    pub fn crime(&self, crime_type: CrimeType) -> &[Vec<u32>] {
        match crime_type {
            CrimeType::Property => &self.property,
            CrimeType::Violent => &self.violent,
        }
    }

    /// Counts for `week` (1-based) as reals.
    pub fn crime_week(&self, crime_type: CrimeType, week: u32) -> Vec<f64> {
        self.crime(crime_type)[week as usize - 1]
            .iter()
            .map(|&c| c as f64)
            .collect()
    }

    pub fn flows_week(&self, week: u32) -> &FlowMatrix {
        &self.flows[week as usize - 1]
    }

    /// The same panel restricted to weeks `1..=last_week`.
    pub fn truncated(&self, last_week: u32) -> Self {
        let t = (last_week as usize).min(self.property.len());
        Self {
            units: self.units.clone(),
            property: self.property[..t].to_vec(),
            violent: self.violent[..t].to_vec(),
            census: self.census.clone(),
            tweets_all: self.tweets_all[..t].to_vec(),
            tweets_night: self.tweets_night[..t].to_vec(),
            poi: self.poi.clone(),
            flows: self.flows[..t].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_units();
        let t = self.property.len();
        if n < 2 {
            return Err(Error::InvalidArgument("panel needs at least 2 units".into()));
        }
        if t == 0 {
            return Err(Error::InvalidArgument("panel has no weeks".into()));
        }
        for (what, len) in [
            ("violent", self.violent.len()),
            ("tweets_all", self.tweets_all.len()),
            ("tweets_night", self.tweets_night.len()),
            ("flows", self.flows.len()),
        ] {
            if len != t {
                return Err(Error::InvalidArgument(format!(
                    "{what} covers {len} weeks, crime covers {t}"
                )));
            }
        }
        for (what, len) in [("census", self.census.len()), ("poi", self.poi.len())] {
            if len != n {
                return Err(Error::InvalidArgument(format!("{what} has {len} rows for {n} units")));
            }
        }
        for week in self
            .property
            .iter()
            .chain(&self.violent)
            .chain(&self.tweets_all)
            .chain(&self.tweets_night)
        {
            if week.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: week.len(),
                });
            }
        }
        for (week, (all, night)) in self.tweets_all.iter().zip(&self.tweets_night).enumerate() {
            if let Some(i) = (0..n).find(|&i| night[i] > all[i]) {
                return Err(Error::InvalidArgument(format!(
                    "week {}: night tweets exceed all tweets for unit `{}`",
                    week + 1,
                    self.units[i]
                )));
            }
        }
        for (i, row) in self.census.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) || row[0] < 0.0 || row[1] < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "census row for unit `{}` is invalid",
                    self.units[i]
                )));
            }
            if let Some(k) = (2..8).find(|&k| !(0.0..=1.0).contains(&row[k])) {
                return Err(Error::InvalidArgument(format!(
                    "census share `{}` for unit `{}` outside [0, 1]",
                    CENSUS_COLUMNS[k], self.units[i]
                )));
            }
        }
        for (k, f) in self.flows.iter().enumerate() {
            if f.n() != n || f.week() != k as u32 + 1 {
                return Err(Error::InvalidArgument(format!(
                    "flow matrix at position {k} has week {} and size {}",
                    f.week(),
                    f.n()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_reject_diagonal() {
        let f = FlowMatrix::from_triplets(1, 3, [(0, 1, 2.0), (0, 1, 3.0), (2, 0, 1.0), (1, 1, 0.0)]).unwrap();
        assert_eq!(f.get(0, 1), 5.0);
        assert_eq!(f.outflows(), vec![5.0, 0.0, 1.0]);
        assert_eq!(f.inflows(), vec![1.0, 5.0, 0.0]);
        assert!(FlowMatrix::from_triplets(1, 2, [(1, 1, 4.0)]).is_err());
        assert!(matches!(
            FlowMatrix::from_triplets(1, 2, [(0, 1, -1.0)]),
            Err(Error::NegativeValue(_))
        ));
    }

    #[test]
    fn crime_type_round_trip() {
        for ct in CrimeType::ALL {
            assert_eq!(ct.as_str().parse::<CrimeType>().unwrap(), ct);
        }
        assert!("arson".parse::<CrimeType>().is_err());
    }
}
