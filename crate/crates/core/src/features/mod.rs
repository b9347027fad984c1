//! Feature construction: taxi, tweet, venue and census covariates, and the
//! lagged design matrices for each experimental setting.

mod design;
mod panel;
mod transforms;

pub use design::{assemble_design, column_names, feature_block, forecast_rows, DesignMatrix, Setting, INTERCEPT};
pub use panel::{CrimeType, FlowMatrix, PanelData, CENSUS_COLUMNS, POI_CATEGORIES};
pub use transforms::{
    poi_feature, taxi_feature, twitter_feature, FeatureModes, PoiFeatureMode, TaxiFeatureMode, TwitterFeatureMode,
};
