use crate::error::{Error, Result};
use crate::features::CrimeType;
use crate::spatial::{ArealPartition, Point};

/// A single geocoded offence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrimeEvent {
    pub location: Point,
    pub week: u32,
    pub crime_type: CrimeType,
}

/// Per-(week, unit) tallies for both crime types.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCounts {
    /// `[week - 1][unit]`
    pub property: Vec<Vec<u32>>,
    pub violent: Vec<Vec<u32>>,
    /// Events that fell in no unit.
    pub unassigned: usize,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.property
            .iter()
            .chain(&self.violent)
            .flatten()
            .map(|&c| u64::from(c))
            .sum()
    }
}

/// Counts events per unit and week `1..=n_weeks`.
pub fn aggregate_events(events: &[CrimeEvent], partition: &ArealPartition, n_weeks: u32) -> Result<EventCounts> {
    if let Some(e) = events.iter().find(|e| e.week == 0 || e.week > n_weeks) {
        return Err(Error::WeekOutOfRange { week: e.week, n_weeks });
    }
    let points: Vec<Point> = events.iter().map(|e| e.location).collect();
    let units = partition.assign_points(&points)?;
    let n = partition.len();
    let mut counts = EventCounts {
        property: vec![vec![0; n]; n_weeks as usize],
        violent: vec![vec![0; n]; n_weeks as usize],
        unassigned: 0,
    };
    for (e, unit) in events.iter().zip(units) {
        let Some(i) = unit else {
            counts.unassigned += 1;
            continue;
        };
        let table = match e.crime_type {
            CrimeType::Property => &mut counts.property,
            CrimeType::Violent => &mut counts.violent,
        };
        table[e.week as usize - 1][i] += 1;
    }
    Ok(counts)
}
