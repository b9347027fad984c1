use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use super::table::{Row, Table};
use crate::error::{Error, Result};
use crate::features::{FlowMatrix, PanelData, CENSUS_COLUMNS, POI_CATEGORIES};
use crate::spatial::{ArealPartition, Ring, SpatialWeights};

pub const CENSUS_HEADER: [&str; 9] = [
    "unit_id",
    "population",
    "median_age",
    "male",
    "black",
    "asian",
    "hispanic",
    "vacancy",
    "female_hh",
];
pub const CRIME_HEADER: [&str; 4] = ["unit_id", "week", "property", "violent"];
pub const TWEETS_HEADER: [&str; 4] = ["unit_id", "week", "tweets_all", "tweets_night"];
pub const POI_HEADER: [&str; 3] = ["unit_id", "category", "count"];
pub const FLOWS_HEADER: [&str; 4] = ["week", "origin", "dest", "trips"];
pub const EDGES_HEADER: [&str; 2] = ["src", "dst"];
pub const POLYGONS_HEADER: [&str; 5] = ["unit_id", "ring_index", "vertex_index", "x", "y"];

/// Locations of the input files. The census file fixes the unit order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub census: PathBuf,
    pub crime: PathBuf,
    pub tweets: PathBuf,
    pub poi: PathBuf,
    pub flows: PathBuf,
    pub edges: PathBuf,
    pub polygons: Option<PathBuf>,
}

impl InputPaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            census: dir.join("census.csv"),
            crime: dir.join("crime.csv"),
            tweets: dir.join("tweets.csv"),
            poi: dir.join("poi.csv"),
            flows: dir.join("flows.csv"),
            edges: dir.join("edges.csv"),
            polygons: Some(dir.join("polygons.csv")).filter(|p| p.exists()),
        }
    }

    pub fn all(&self) -> Vec<&Path> {
        let mut v = vec![
            self.census.as_path(),
            self.crime.as_path(),
            self.tweets.as_path(),
            self.poi.as_path(),
            self.flows.as_path(),
            self.edges.as_path(),
        ];
        v.extend(self.polygons.as_deref());
        v
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub partition: ArealPartition,
    pub weights: SpatialWeights,
    pub panel: PanelData,
    /// Trips from a unit to itself, which are dropped.
    pub dropped_self_trips: usize,
}

fn unit_index(partition: &ArealPartition, row: &Row<'_>, column: &str) -> Result<usize> {
    let id = row.str(column)?;
    partition
        .index_of(id)
        .ok_or_else(|| row.error(column, format!("unknown unit id `{id}`")))
}

fn read_census(path: &Path) -> Result<(ArealPartition, Vec<[f64; 8]>)> {
    let mut units = Vec::new();
    let mut seen = HashSet::new();
    let mut census = Vec::new();
    Table::open(path, &CENSUS_HEADER)?.for_each(|row| {
        let id = row.str("unit_id")?;
        if id.is_empty() {
            return Err(row.error("unit_id", "empty unit id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(row.error("unit_id", format!("duplicate unit id `{id}`")));
        }
        let mut values = [0.0; 8];
        for (k, col) in CENSUS_COLUMNS.iter().enumerate() {
            let v = row.real(col)?;
            let ok = if k < 2 { v >= 0.0 } else { (0.0..=1.0).contains(&v) };
            if !ok {
                let range = if k < 2 { "non-negative" } else { "within [0, 1]" };
                return Err(row.error(col, format!("value {v} must be {range}")));
            }
            values[k] = v;
        }
        units.push(id.to_string());
        census.push(values);
        Ok(())
    })?;
    let partition = ArealPartition::new(units).map_err(|e| Error::Schema {
        file: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((partition, census))
}

type CrimeCells = (Vec<Vec<u32>>, Vec<Vec<u32>>);

fn read_crime(path: &Path, partition: &ArealPartition) -> Result<CrimeCells> {
    let n = partition.len();
    let mut cells: BTreeMap<u32, Vec<Option<(u32, u32)>>> = BTreeMap::new();
    Table::open(path, &CRIME_HEADER)?.for_each(|row| {
        let i = unit_index(partition, row, "unit_id")?;
        let week = row.week("week")?;
        let property = row.count("property")?;
        let violent = row.count("violent")?;
        let slot = &mut cells.entry(week).or_insert_with(|| vec![None; n])[i];
        if slot.is_some() {
            return Err(row.error(
                "week",
                format!("duplicate cell for unit `{}` week {week}", partition.unit_id(i)),
            ));
        }
        *slot = Some((property, violent));
        Ok(())
    })?;
    let t = cells.keys().next_back().copied().unwrap_or(0);
    if t == 0 {
        return Err(Error::Schema {
            file: path.to_path_buf(),
            message: "no crime records".into(),
        });
    }
    let mut property = Vec::with_capacity(t as usize);
    let mut violent = Vec::with_capacity(t as usize);
    for week in 1..=t {
        let Some(row) = cells.get(&week) else {
            return Err(Error::Schema {
                file: path.to_path_buf(),
                message: format!("week {week} missing; weeks must run contiguously from 1 to {t}"),
            });
        };
        if let Some(i) = row.iter().position(Option::is_none) {
            return Err(Error::Schema {
                file: path.to_path_buf(),
                message: format!("missing cell for unit `{}` week {week}", partition.unit_id(i)),
            });
        }
        property.push(row.iter().map(|c| c.unwrap().0).collect());
        violent.push(row.iter().map(|c| c.unwrap().1).collect());
    }
    Ok((property, violent))
}

fn check_week(row: &Row<'_>, column: &str, n_weeks: u32) -> Result<u32> {
    let week = row.week(column)?;
    if week > n_weeks {
        return Err(row.error(column, format!("week {week} beyond the crime panel's {n_weeks} weeks")));
    }
    Ok(week)
}

fn read_tweets(path: &Path, partition: &ArealPartition, n_weeks: u32) -> Result<CrimeCells> {
    let n = partition.len();
    let mut all = vec![vec![0u32; n]; n_weeks as usize];
    let mut night = all.clone();
    let mut seen = HashSet::new();
    Table::open(path, &TWEETS_HEADER)?.for_each(|row| {
        let i = unit_index(partition, row, "unit_id")?;
        let week = check_week(row, "week", n_weeks)?;
        if !seen.insert((i, week)) {
            return Err(row.error(
                "week",
                format!("duplicate cell for unit `{}` week {week}", partition.unit_id(i)),
            ));
        }
        let a = row.count("tweets_all")?;
        let b = row.count("tweets_night")?;
        if b > a {
            return Err(row.error("tweets_night", format!("night count {b} exceeds all-day count {a}")));
        }
        all[week as usize - 1][i] = a;
        night[week as usize - 1][i] = b;
        Ok(())
    })?;
    Ok((all, night))
}

fn read_poi(path: &Path, partition: &ArealPartition) -> Result<Vec<[u32; 9]>> {
    let mut poi = vec![[0u32; 9]; partition.len()];
    let mut seen = HashSet::new();
    Table::open(path, &POI_HEADER)?.for_each(|row| {
        let i = unit_index(partition, row, "unit_id")?;
        let cat = row.str("category")?;
        let c = POI_CATEGORIES
            .iter()
            .position(|&p| p == cat)
            .ok_or_else(|| row.error("category", format!("unknown category `{cat}`")))?;
        if !seen.insert((i, c)) {
            return Err(row.error(
                "category",
                format!("duplicate cell for unit `{}` category `{cat}`", partition.unit_id(i)),
            ));
        }
        poi[i][c] = row.count("count")?;
        Ok(())
    })?;
    Ok(poi)
}

fn read_flows(path: &Path, partition: &ArealPartition, n_weeks: u32) -> Result<(Vec<FlowMatrix>, usize)> {
    let n = partition.len();
    let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n_weeks as usize];
    let mut seen = HashSet::new();
    let mut dropped = 0;
    Table::open(path, &FLOWS_HEADER)?.for_each(|row| {
        let week = check_week(row, "week", n_weeks)?;
        let i = unit_index(partition, row, "origin")?;
        let j = unit_index(partition, row, "dest")?;
        let trips = row.real("trips")?;
        if trips < 0.0 {
            return Err(row.error("trips", format!("negative trip count {trips}")));
        }
        if !seen.insert((week, i, j)) {
            return Err(row.error("dest", format!("duplicate cell for week {week}")));
        }
        if i == j {
            dropped += 1;
        } else {
            entries[week as usize - 1].push((i, j, trips));
        }
        Ok(())
    })?;
    let flows = entries
        .into_iter()
        .enumerate()
        .map(|(w, e)| FlowMatrix::from_triplets(w as u32 + 1, n, e))
        .collect::<Result<Vec<_>>>()?;
    Ok((flows, dropped))
}

fn read_edges(path: &Path, partition: &ArealPartition) -> Result<SpatialWeights> {
    let mut pairs = Vec::new();
    Table::open(path, &EDGES_HEADER)?.for_each(|row| {
        let i = unit_index(partition, row, "src")?;
        let j = unit_index(partition, row, "dst")?;
        if i == j {
            return Err(row.error("dst", format!("self-edge on unit `{}`", partition.unit_id(i))));
        }
        pairs.push((i, j));
        Ok(())
    })?;
    SpatialWeights::from_index_pairs(partition.len(), pairs)
}

type RawRings = BTreeMap<u32, Vec<(u32, [f64; 2], u64)>>;

fn read_polygons(path: &Path, partition: &ArealPartition) -> Result<Vec<Vec<Ring>>> {
    // unit → ring → (vertex index, point, line)
    let mut raw: Vec<RawRings> = vec![BTreeMap::new(); partition.len()];
    Table::open(path, &POLYGONS_HEADER)?.for_each(|row| {
        let i = unit_index(partition, row, "unit_id")?;
        let ring: u32 = row.parse("ring_index", "a ring index")?;
        let vertex: u32 = row.parse("vertex_index", "a vertex index")?;
        let p = [row.real("x")?, row.real("y")?];
        raw[i].entry(ring).or_default().push((vertex, p, row.line()));
        Ok(())
    })?;
    let schema = |message: String| Error::Schema {
        file: path.to_path_buf(),
        message,
    };
    let mut polygons = Vec::with_capacity(raw.len());
    for (i, rings) in raw.into_iter().enumerate() {
        let unit = partition.unit_id(i);
        if rings.is_empty() {
            return Err(schema(format!("no polygon for unit `{unit}`")));
        }
        let mut out = Vec::with_capacity(rings.len());
        for (ring_index, mut vertices) in rings {
            vertices.sort_by_key(|v| v.0);
            for (k, v) in vertices.iter().enumerate() {
                if v.0 as usize != k {
                    return Err(schema(format!(
                        "line {}: unit `{unit}` ring {ring_index}: vertex indices must run 0, 1, 2, ... without gaps or repeats",
                        v.2
                    )));
                }
            }
            let ring = Ring::new(vertices.iter().map(|v| v.1).collect()).map_err(|message| Error::InvalidPolygon {
                unit: unit.to_string(),
                message: format!("ring {ring_index}: {message}"),
            })?;
            out.push(ring);
        }
        polygons.push(out);
    }
    Ok(polygons)
}

/// Reads and cross-validates every input file.
pub fn ingest(paths: &InputPaths) -> Result<Ingested> {
    let (mut partition, census) = read_census(&paths.census)?;
    let (property, violent) = read_crime(&paths.crime, &partition)?;
    let n_weeks = property.len() as u32;
    let (tweets_all, tweets_night) = read_tweets(&paths.tweets, &partition, n_weeks)?;
    let poi = read_poi(&paths.poi, &partition)?;
    let (flows, dropped_self_trips) = read_flows(&paths.flows, &partition, n_weeks)?;
    let weights = read_edges(&paths.edges, &partition)?;
    if let Some(p) = &paths.polygons {
        let polygons = read_polygons(p, &partition)?;
        partition = partition.with_polygons(polygons)?;
    }
    let panel = PanelData {
        units: partition.units().to_vec(),
        property,
        violent,
        census,
        tweets_all,
        tweets_night,
        poi,
        flows,
    };
    panel.validate()?;
    Ok(Ingested {
        partition,
        weights,
        panel,
        dropped_self_trips,
    })
}
