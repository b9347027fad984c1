//! File ingestion, run configuration, synthetic panels and CSV outputs.

mod config;
mod events;
mod ingest;
mod output;
mod synth;
mod table;

pub use config::{load_grids, parse_grids, RunConfig, OUTPUT_DIR_ENV};
pub use events::{aggregate_events, CrimeEvent, EventCounts};
pub use ingest::{
    ingest, Ingested, InputPaths, CENSUS_HEADER, CRIME_HEADER, EDGES_HEADER, FLOWS_HEADER, POI_HEADER, POLYGONS_HEADER,
    TWEETS_HEADER,
};
pub use output::{
    coefficients_table, design_table, forecasts_table, format_float, importance_table, moran_table, mse_table,
    robustness_table, selection_table, windows_table, write_csv, CsvTable, COEFFICIENTS_HEADER, FORECASTS_HEADER,
    IMPORTANCE_HEADER, MORAN_HEADER, MSE_HEADER, ROBUSTNESS_HEADER, SELECTION_HEADER, WINDOWS_HEADER,
};
pub use synth::{
    generate_panel, lattice_partition, read_continuous, unit_id, write_synthetic, SyntheticKind, SyntheticPanel,
    SyntheticSpec, Truth,
};
pub use table::{Row, Table};
