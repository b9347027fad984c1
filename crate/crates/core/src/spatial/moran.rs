use super::weights::SpatialWeights;
use crate::error::{Error, Result};
use crate::linalg::two_sided_p;

/// Global Moran's I with moments under the normality assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoranResult {
    pub i_stat: f64,
    pub expected: f64,
    pub variance: f64,
    pub z: f64,
    pub p: f64,
}

/// Cross-sectional Moran's I of one week's field `y` over `W`.
pub fn morans_i(y: &[f64], w: &SpatialWeights) -> Result<MoranResult> {
    let n = w.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if w.n_edges() == 0 {
        return Err(Error::EdgelessGraph);
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let z: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ss: f64 = z.iter().map(|v| v * v).sum();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if ss <= (1e-14 * scale).powi(2) * nf {
        return Err(Error::ZeroVariance);
    }
    let lag = w.lag(&z);
    let cross: f64 = z.iter().zip(&lag).map(|(a, b)| a * b).sum();

    let s0 = w.total_weight();
    // symmetric binary W: S1 = ½Σ(w_ij + w_ji)² = 2·S0, S2 = Σ_i (2·d_i)²
    let s1 = 2.0 * s0;
    let s2: f64 = (0..n).map(|i| (2.0 * w.degree(i) as f64).powi(2)).sum();

    let i_stat = nf / s0 * cross / ss;
    let expected = -1.0 / (nf - 1.0);
    let variance = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0) - expected * expected;
    let z = (i_stat - expected) / variance.sqrt();
    Ok(MoranResult {
        i_stat,
        expected,
        variance,
        z,
        p: two_sided_p(z),
    })
}
