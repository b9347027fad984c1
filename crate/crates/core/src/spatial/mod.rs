//! Areal partitions, contiguity and precision structures, spectral bounds
//! for the spatial parameters, and Moran's I.

mod moran;
mod partition;
mod weights;

pub use moran::{morans_i, MoranResult};
pub use partition::{on_segment, ArealPartition, Point, Ring};
pub use weights::{
    build_precision, build_weights, eigenvalues, extreme_eigenvalues_power, spectral_bounds, PrecisionStructure,
    SpatialStructure, SpatialWeights, SpectralBounds, DENSE_EIGEN_LIMIT,
};
