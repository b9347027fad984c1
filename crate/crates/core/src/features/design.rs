use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};

use super::panel::{CrimeType, PanelData, CENSUS_COLUMNS, POI_CATEGORIES};
use super::transforms::{poi_feature, taxi_feature, twitter_feature, FeatureModes, PoiFeatureMode};
use crate::error::{Error, Result};

/// One of the eight covariate-group combinations. Census is always in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Setting {
    id: u8,
    pub include_poi: bool,
    pub include_taxi: bool,
    pub include_twitter: bool,
}

// (poi, taxi, twitter) per setting id
const SETTINGS: [(bool, bool, bool); 8] = [
    (false, false, false),
    (true, false, false),
    (true, true, false),
    (true, false, true),
    (false, true, true),
    (false, true, false),
    (false, false, true),
    (true, true, true),
];

impl Setting {
    pub fn new(id: u8) -> Result<Self> {
        let (include_poi, include_taxi, include_twitter) = *SETTINGS
            .get((id as usize).wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("setting must be 1..=8, got {id}")))?;
        Ok(Self {
            id,
            include_poi,
            include_taxi,
            include_twitter,
        })
    }

    pub fn all() -> Vec<Setting> {
        (1..=8).map(|id| Setting::new(id).unwrap()).collect()
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    /// Number of design columns including the intercept, with venue counts.
    pub fn n_columns(&self) -> usize {
        1 + CENSUS_COLUMNS.len()
            + usize::from(self.include_twitter)
            + if self.include_poi { POI_CATEGORIES.len() } else { 0 }
            + usize::from(self.include_taxi)
    }
}

/// Stacked regressors, one row per (unit, target week), week-major so that
/// each consecutive block of `n_units` rows is one cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<(usize, u32)>,
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub n_units: usize,
}

impl DesignMatrix {
    /// Wraps a week-major matrix whose row count is a multiple of `n_units`;
    /// weeks are numbered from `first_week`.
    pub fn from_blocks(x: DMatrix<f64>, n_units: usize, first_week: u32, column_names: Vec<String>) -> Result<Self> {
        if n_units == 0 || !x.nrows().is_multiple_of(n_units) {
            return Err(Error::DimensionMismatch {
                expected: n_units,
                got: x.nrows(),
            });
        }
        if column_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: column_names.len(),
            });
        }
        let rows = (0..x.nrows())
            .map(|r| (r % n_units, first_week + (r / n_units) as u32))
            .collect();
        Ok(Self {
            rows,
            x,
            column_names,
            n_units,
        })
    }

    pub fn n_weeks(&self) -> usize {
        self.x.nrows() / self.n_units
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    /// Rows belonging to target weeks in `weeks`.
    pub fn select_weeks(&self, weeks: RangeInclusive<u32>) -> DesignMatrix {
        let idx: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (_, w))| weeks.contains(w))
            .map(|(r, _)| r)
            .collect();
        DesignMatrix {
            rows: idx.iter().map(|&r| self.rows[r]).collect(),
            x: self.x.select_rows(idx.iter()),
            column_names: self.column_names.clone(),
            n_units: self.n_units,
        }
    }

    /// The same rows without the intercept column.
    pub fn without_intercept(&self) -> DesignMatrix {
        match self.column_names.iter().position(|c| c == INTERCEPT) {
            Some(k) => DesignMatrix {
                rows: self.rows.clone(),
                x: self.x.clone().remove_column(k),
                column_names: self.column_names.iter().filter(|c| *c != INTERCEPT).cloned().collect(),
                n_units: self.n_units,
            },
            None => self.clone(),
        }
    }
}

pub const INTERCEPT: &str = "intercept";

/// Venue categories entering the design. Shares sum to one, so the last
/// category is left out as the reference.
fn poi_columns(mode: PoiFeatureMode) -> &'static [&'static str] {
    match mode {
        PoiFeatureMode::Counts => &POI_CATEGORIES,
        PoiFeatureMode::Shares => &POI_CATEGORIES[..POI_CATEGORIES.len() - 1],
    }
}

pub fn column_names(setting: Setting, modes: FeatureModes) -> Vec<String> {
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(CENSUS_COLUMNS.iter().map(|s| s.to_string()));
    if setting.include_twitter {
        names.push(format!("tweets_{}", modes.twitter));
    }
    if setting.include_poi {
        names.extend(poi_columns(modes.poi).iter().map(|c| format!("poi_{c}")));
    }
    if setting.include_taxi {
        names.push(format!("taxi_{}", modes.taxi));
    }
    names
}

/// N×K regressors used to predict crime in week `source_week + 1`; only
/// data from `source_week` and the static covariates enter.
pub fn feature_block(
    panel: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    modes: FeatureModes,
    source_week: u32,
) -> Result<DMatrix<f64>> {
    let n = panel.n_units();
    if source_week == 0 || source_week > panel.n_weeks() {
        return Err(Error::WeekOutOfRange {
            week: source_week,
            n_weeks: panel.n_weeks(),
        });
    }
    let k = column_names(setting, modes).len();
    let mut block = DMatrix::zeros(n, k);
    for i in 0..n {
        block[(i, 0)] = 1.0;
        for (c, v) in panel.census[i].iter().enumerate() {
            block[(i, 1 + c)] = *v;
        }
    }
    let mut col = 1 + CENSUS_COLUMNS.len();
    let w = source_week as usize - 1;
    if setting.include_twitter {
        let all: Vec<f64> = panel.tweets_all[w].iter().map(|&v| v as f64).collect();
        let night: Vec<f64> = panel.tweets_night[w].iter().map(|&v| v as f64).collect();
        let tw = twitter_feature(&all, &night, modes.twitter)?;
        block.column_mut(col).copy_from_slice(&tw);
        col += 1;
    }
    if setting.include_poi {
        let counts: Vec<[f64; 9]> = panel.poi.iter().map(|r| r.map(|v| v as f64)).collect();
        let poi = poi_feature(&counts, modes.poi)?;
        let width = poi_columns(modes.poi).len();
        for (i, row) in poi.iter().enumerate() {
            for (c, v) in row[..width].iter().enumerate() {
                block[(i, col + c)] = *v;
            }
        }
        col += width;
    }
    if setting.include_taxi {
        let y = panel.crime_week(crime_type, source_week);
        let taxi = taxi_feature(panel.flows_week(source_week), &y, modes.taxi)?;
        block.column_mut(col).copy_from_slice(&taxi);
    }
    Ok(block)
}

/// Design rows and responses for every target week in `target_weeks`.
/// Each row holds week `t` features for the week `t + 1` response.
pub fn assemble_design(
    panel: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    modes: FeatureModes,
    target_weeks: RangeInclusive<u32>,
) -> Result<(DesignMatrix, DVector<f64>)> {
    let (first, last) = (*target_weeks.start(), *target_weeks.end());
    if first < 2 {
        return Err(Error::LagUnavailable(first));
    }
    if last > panel.n_weeks() {
        return Err(Error::WeekOutOfRange {
            week: last,
            n_weeks: panel.n_weeks(),
        });
    }
    if last < first {
        return Err(Error::InvalidArgument(format!(
            "empty target week range {first}..={last}"
        )));
    }
    let n = panel.n_units();
    let n_weeks = (last - first + 1) as usize;
    let k = column_names(setting, modes).len();
    let mut x = DMatrix::zeros(n * n_weeks, k);
    let mut y = DVector::zeros(n * n_weeks);
    for (b, target) in (first..=last).enumerate() {
        let block = feature_block(panel, crime_type, setting, modes, target - 1)?;
        x.rows_mut(b * n, n).copy_from(&block);
        for (i, &c) in panel.crime(crime_type)[target as usize - 1].iter().enumerate() {
            y[b * n + i] = c as f64;
        }
    }
    let design = DesignMatrix::from_blocks(x, n, first, column_names(setting, modes))?;
    Ok((design, y))
}

/// Regressors for forecasting `target_week`, which may lie one week past
/// the end of the panel.
pub fn forecast_rows(
    panel: &PanelData,
    crime_type: CrimeType,
    setting: Setting,
    modes: FeatureModes,
    target_week: u32,
) -> Result<DesignMatrix> {
    if target_week < 2 {
        return Err(Error::LagUnavailable(target_week));
    }
    let block = feature_block(panel, crime_type, setting, modes, target_week - 1)?;
    DesignMatrix::from_blocks(block, panel.n_units(), target_week, column_names(setting, modes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_table() {
        let expect = [
            (false, false, false),
            (true, false, false),
            (true, true, false),
            (true, false, true),
            (false, true, true),
            (false, true, false),
            (false, false, true),
            (true, true, true),
        ];
        for (id, e) in (1..=8).zip(expect) {
            let s = Setting::new(id).unwrap();
            assert_eq!((s.include_poi, s.include_taxi, s.include_twitter), e);
        }
        assert!(Setting::new(0).is_err());
        assert!(Setting::new(9).is_err());
        assert_eq!(Setting::new(1).unwrap().n_columns(), 9);
        assert_eq!(Setting::new(8).unwrap().n_columns(), 20);
    }

    #[test]
    fn column_order() {
        let names = column_names(Setting::new(8).unwrap(), FeatureModes::default());
        assert_eq!(names.len(), 20);
        assert_eq!(names[0], "intercept");
        assert_eq!(names[8], "female_hh");
        assert_eq!(names[9], "tweets_log_night");
        assert_eq!(names[10], "poi_nightlife");
        assert_eq!(names[18], "poi_professional");
        assert_eq!(names[19], "taxi_destination");
        let shares = FeatureModes {
            poi: PoiFeatureMode::Shares,
            ..FeatureModes::default()
        };
        let names = column_names(Setting::new(8).unwrap(), shares);
        assert_eq!(names.len(), 19);
        assert_eq!(names[17], "poi_college_education");
    }
}
