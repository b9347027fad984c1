//! Brute-force oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use crimecast::features::DesignMatrix;
use crimecast::rng::Rng;
use crimecast::spatial::SpatialWeights;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Intercept plus `k - 1` standard-normal columns over `t` weeks of `n` units.
pub fn random_design(rng: &mut Rng, n: usize, t: usize, k: usize) -> DesignMatrix {
    let x = DMatrix::from_fn(n * t, k, |_, j| if j == 0 { 1.0 } else { normal(rng) });
    let names = (0..k)
        .map(|j| if j == 0 { "intercept".into() } else { format!("x{j}") })
        .collect();
    DesignMatrix::from_blocks(x, n, 2, names).unwrap()
}

/// Erdős–Rényi graph with at least one edge.
pub fn random_graph(rng: &mut Rng, n: usize, p: f64) -> SpatialWeights {
    let mut pairs = vec![(0, 1)];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    SpatialWeights::from_index_pairs(n, pairs).unwrap()
}

pub fn kron_identity(t: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n * t, n * t);
    for b in 0..t {
        out.view_mut((b * n, b * n), (n, n)).copy_from(a);
    }
    out
}

/// SAR negative profile log-likelihood from the dense NT × NT system.
pub fn dense_sar_nll(x: &DMatrix<f64>, y: &DVector<f64>, w: &DMatrix<f64>, rho: f64) -> f64 {
    let n = w.nrows();
    let t = y.len() / n;
    let a = DMatrix::identity(n, n) - rho * w;
    let ay = kron_identity(t, &a) * y;
    let beta = (x.transpose() * x).lu().solve(&(x.transpose() * &ay)).unwrap();
    let r = &ay - x * beta;
    let nt = y.len() as f64;
    let ss = r.dot(&r);
    -(t as f64) * a.determinant().abs().ln() + 0.5 * nt * ((2.0 * PI).ln() + 1.0) + 0.5 * nt * (ss / nt).ln()
}

/// Σ_t log N(y_t; X_t β, σ² (I − δW)⁻¹), evaluated densely.
pub fn dense_car_loglik(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    delta: f64,
    beta: &DVector<f64>,
    sigma2: f64,
) -> f64 {
    let n = w.nrows();
    let t = y.len() / n;
    let prec = (DMatrix::identity(n, n) - delta * w) / sigma2;
    let cov = prec.clone().try_inverse().unwrap();
    let logdet_cov = cov.determinant().ln();
    let r = y - x * beta;
    let mut ll = 0.0;
    for b in 0..t {
        let rb = r.rows(b * n, n).into_owned();
        ll += -0.5 * (n as f64) * (2.0 * PI).ln() - 0.5 * logdet_cov - 0.5 * rb.dot(&(&prec * &rb));
    }
    ll
}

/// Plain Newton–Raphson for the Poisson log-link GLM with step halving.
pub fn newton_glm(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = x.ncols();
    let mut beta = DVector::zeros(k);
    beta[0] = (y.mean()).ln();
    let ll = |b: &DVector<f64>| -> f64 {
        let eta = x * b;
        eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - e.exp()).sum()
    };
    for _ in 0..200 {
        let mu = (x * &beta).map(f64::exp);
        let score = x.transpose() * (y - &mu);
        let mut info = DMatrix::zeros(k, k);
        for i in 0..x.nrows() {
            let xi = x.row(i).transpose();
            info += mu[i] * &xi * xi.transpose();
        }
        let step = info.lu().solve(&score).unwrap();
        let mut scale = 1.0;
        let base = ll(&beta);
        while ll(&(&beta + scale * &step)) < base - 1e-12 && scale > 1e-8 {
            scale *= 0.5;
        }
        beta += scale * &step;
        if step.amax() * scale < 1e-13 {
            break;
        }
    }
    beta
}

/// Least-squares coefficients via the normal equations.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x).lu().solve(&(x.transpose() * y)).unwrap()
}
