use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::brent::brent_minimize;
use super::fit::{FitDiagnostics, ModelFit, ModelKind, ResidualState, SpatialParameter};
use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::linalg::{blockwise, cholesky, LeastSquares};
use crate::spatial::{SpatialStructure, SpatialWeights};

const BRENT_TOL: f64 = 1e-8;
const BRENT_MAX_ITER: usize = 500;
/// Distance the search interval is kept away from the spectral bounds.
const BOUND_SHRINK: f64 = 1e-6;
const BOUNDARY_WARNING: &str = "boundary solution";

fn check_inputs(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.x.nrows(),
            got: y.len(),
        });
    }
    if x.x.nrows() <= x.n_columns() {
        return Err(Error::InvalidArgument(format!(
            "{} observations for {} coefficients",
            x.x.nrows(),
            x.n_columns()
        )));
    }
    if y.iter().chain(x.x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in design or response".into()));
    }
    Ok(())
}

fn check_structure(x: &DesignMatrix, structure: &SpatialStructure) -> Result<()> {
    if structure.n() != x.n_units {
        return Err(Error::DimensionMismatch {
            expected: x.n_units,
            got: structure.n(),
        });
    }
    Ok(())
}

/// (I_T ⊗ W) v
fn spatial_lag(w: &SpatialWeights, v: &DVector<f64>) -> DVector<f64> {
    blockwise(v, w.n(), |src, dst| w.lag_into(src, dst))
}

/// Per-unit average over the week blocks of a stacked vector.
fn unit_time_average(v: &DVector<f64>, n: usize) -> DVector<f64> {
    let t = v.len() / n;
    let mut avg = DVector::zeros(n);
    for block in v.as_slice().chunks(n) {
        for (a, b) in avg.iter_mut().zip(block) {
            *a += b;
        }
    }
    avg / t as f64
}

/// Gaussian log-likelihood of `nt` observations at the ML variance.
fn gaussian_loglik(nt: usize, sigma2: f64, log_det: f64) -> f64 {
    let nt = nt as f64;
    -0.5 * nt * ((2.0 * PI).ln() + sigma2.ln() + 1.0) + log_det
}

fn search_interval(structure: &SpatialStructure) -> (f64, f64) {
    let b = structure.bounds();
    (b.lower + BOUND_SHRINK, b.upper - BOUND_SHRINK)
}

fn near_boundary(value: f64, (lo, hi): (f64, f64)) -> bool {
    value - lo < BOUND_SHRINK || hi - value < BOUND_SHRINK
}

pub fn fit_lr(x: &DesignMatrix, y: &DVector<f64>) -> Result<ModelFit> {
    check_inputs(x, y)?;
    let ls = LeastSquares::new(&x.x, &x.column_names)?;
    let beta = ls.coefficients(&x.x, y);
    let resid = y - &x.x * &beta;
    let nt = y.len();
    let sigma2 = resid.norm_squared() / nt as f64;
    let std_errors = ls.inverse().diagonal().map(|v| (sigma2 * v).sqrt());
    Ok(ModelFit {
        kind: ModelKind::Lr,
        column_names: x.column_names.clone(),
        beta,
        std_errors,
        sigma2: Some(sigma2),
        spatial: None,
        eta: None,
        loglik: gaussian_loglik(nt, sigma2, 0.0),
        deviance: None,
        n_units: x.n_units,
        residual_state: ResidualState::None,
        diagnostics: FitDiagnostics {
            iterations: 1,
            converged: true,
            ..FitDiagnostics::default()
        },
    })
}

/// OLS residuals of `y` and of its spatial lag on `X`, from which the SAR
/// likelihood profiled over β and σ² depends on ρ only.
#[derive(Debug, Clone)]
pub struct SarConcentratedState {
    pub e0: DVector<f64>,
    pub el: DVector<f64>,
    n_weeks: usize,
    e0e0: f64,
    e0el: f64,
    elel: f64,
}

impl SarConcentratedState {
    pub fn new(x: &DesignMatrix, y: &DVector<f64>, w: &SpatialWeights) -> Result<Self> {
        let ls = LeastSquares::new(&x.x, &x.column_names)?;
        Ok(Self::from_projector(&ls, x, y, w))
    }

    fn from_projector(ls: &LeastSquares, x: &DesignMatrix, y: &DVector<f64>, w: &SpatialWeights) -> Self {
        let wy = spatial_lag(w, y);
        let e0 = ls.residuals(&x.x, y);
        let el = ls.residuals(&x.x, &wy);
        Self {
            e0e0: e0.dot(&e0),
            e0el: e0.dot(&el),
            elel: el.dot(&el),
            n_weeks: x.n_weeks(),
            e0,
            el,
        }
    }

    /// (e₀ − ρe_L)ᵀ(e₀ − ρe_L)
    pub fn residual_ss(&self, rho: f64) -> f64 {
        (self.e0e0 - 2.0 * rho * self.e0el + rho * rho * self.elel).max(0.0)
    }

    /// Negative log-likelihood with β and σ² replaced by their optima at ρ.
    pub fn nll(&self, rho: f64, structure: &SpatialStructure) -> f64 {
        let nt = self.e0.len() as f64;
        let t = self.n_weeks as f64;
        -t * structure.log_det(rho) + 0.5 * nt * ((2.0 * PI).ln() + 1.0) + 0.5 * nt * (self.residual_ss(rho) / nt).ln()
    }
}

pub fn fit_sar(x: &DesignMatrix, y: &DVector<f64>, structure: &SpatialStructure) -> Result<ModelFit> {
    check_inputs(x, y)?;
    check_structure(x, structure)?;
    let w = structure.weights();
    let ls = LeastSquares::new(&x.x, &x.column_names)?;
    let state = SarConcentratedState::from_projector(&ls, x, y, w);

    let interval = search_interval(structure);
    let (rho, nll, iterations) = brent_minimize(
        |r| state.nll(r, structure),
        interval.0,
        interval.1,
        BRENT_TOL,
        BRENT_MAX_ITER,
    );
    if !nll.is_finite() {
        return Err(Error::Numerical("SAR profile likelihood is not finite".into()));
    }

    let nt = y.len();
    let n = x.n_units;
    let t = x.n_weeks() as f64;
    let wy = spatial_lag(w, y);
    let beta = ls.coefficients(&x.x, &(y - rho * &wy));
    let structural = y - rho * &wy - &x.x * &beta;
    let sigma2 = structural.norm_squared() / nt as f64;

    // information matrix for (β, ρ, σ²)
    let k = beta.len();
    let xb = &x.x * &beta;
    let g_xb = spatial_lag(w, &structure.solve_shifted(rho, &xb)?);
    let (mut tr_g, mut tr_g2) = (0.0, 0.0);
    for &om in structure.eigenvalues() {
        let g = om / (1.0 - rho * om);
        tr_g += g;
        tr_g2 += g * g;
    }
    let mut info = DMatrix::zeros(k + 2, k + 2);
    info.view_mut((0, 0), (k, k)).copy_from(&(x.x.tr_mul(&x.x) / sigma2));
    let xgxb = x.x.tr_mul(&g_xb) / sigma2;
    info.view_mut((0, k), (k, 1)).copy_from(&xgxb);
    info.view_mut((k, 0), (1, k)).copy_from(&xgxb.transpose());
    info[(k, k)] = 2.0 * t * tr_g2 + g_xb.norm_squared() / sigma2;
    info[(k, k + 1)] = t * tr_g / sigma2;
    info[(k + 1, k)] = info[(k, k + 1)];
    info[(k + 1, k + 1)] = nt as f64 / (2.0 * sigma2 * sigma2);
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular SAR information matrix".into()))?;
    let se = cov.diagonal().map(|v| v.max(0.0).sqrt());

    let mut diagnostics = FitDiagnostics {
        iterations,
        converged: iterations < BRENT_MAX_ITER,
        ..FitDiagnostics::default()
    };
    if near_boundary(rho, interval) {
        diagnostics.boundary = true;
        diagnostics.warnings.push(BOUNDARY_WARNING.to_string());
    }

    Ok(ModelFit {
        kind: ModelKind::Sar,
        column_names: x.column_names.clone(),
        std_errors: se.rows(0, k).into_owned(),
        beta,
        sigma2: Some(sigma2),
        spatial: Some(SpatialParameter::Rho {
            value: rho,
            std_error: se[k],
        }),
        eta: None,
        loglik: -nll,
        deviance: None,
        n_units: n,
        residual_state: ResidualState::SarStructuralMean(unit_time_average(&structural, n)),
        diagnostics,
    })
}

/// The CAR error precision up to σ²: B = I_T ⊗ (I_N − δW).
#[derive(Debug, Clone, Copy)]
pub struct CarFitState<'a> {
    pub delta: f64,
    weights: &'a SpatialWeights,
}

impl<'a> CarFitState<'a> {
    pub fn new(delta: f64, weights: &'a SpatialWeights) -> Self {
        Self { delta, weights }
    }

    /// B v
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.delta * spatial_lag(self.weights, v)
    }
}

/// Cross-products from which β̂(δ) and ε̂ᵀBε̂ follow for any δ.
struct CarCrossProducts {
    xtx: DMatrix<f64>,
    xtwx: DMatrix<f64>,
    xty: DVector<f64>,
    xtwy: DVector<f64>,
    yty: f64,
    ytwy: f64,
    nt: usize,
    n_weeks: usize,
}

impl CarCrossProducts {
    fn new(x: &DesignMatrix, y: &DVector<f64>, w: &SpatialWeights) -> Self {
        let wy = spatial_lag(w, y);
        let mut wx = DMatrix::zeros(x.x.nrows(), x.x.ncols());
        for j in 0..x.x.ncols() {
            let col = spatial_lag(w, &x.x.column(j).into_owned());
            wx.set_column(j, &col);
        }
        Self {
            xtx: x.x.tr_mul(&x.x),
            xtwx: x.x.tr_mul(&wx),
            xty: x.x.tr_mul(y),
            xtwy: x.x.tr_mul(&wy),
            yty: y.dot(y),
            ytwy: y.dot(&wy),
            nt: y.len(),
            n_weeks: x.n_weeks(),
        }
    }

    /// (β̂, ε̂ᵀBε̂, XᵀBX) at δ.
    fn solve(&self, delta: f64) -> Result<(DVector<f64>, f64, DMatrix<f64>)> {
        let xbx = &self.xtx - delta * &self.xtwx;
        let xby = &self.xty - delta * &self.xtwy;
        let chol = cholesky(xbx.clone(), "X'BX")?;
        let beta = chol.solve(&xby);
        let yby = self.yty - delta * self.ytwy;
        let ss = (yby - beta.dot(&xby)).max(0.0);
        Ok((beta, ss, xbx))
    }

    fn nll(&self, delta: f64, structure: &SpatialStructure) -> f64 {
        match self.solve(delta) {
            Ok((_, ss, _)) => {
                let nt = self.nt as f64;
                -0.5 * self.n_weeks as f64 * structure.log_det(delta)
                    + 0.5 * nt * ((2.0 * PI).ln() + 1.0)
                    + 0.5 * nt * (ss / nt).ln()
            }
            Err(_) => f64::INFINITY,
        }
    }
}

pub fn fit_car(x: &DesignMatrix, y: &DVector<f64>, structure: &SpatialStructure) -> Result<ModelFit> {
    check_inputs(x, y)?;
    check_structure(x, structure)?;
    crate::linalg::require_full_rank(&x.x, &x.column_names)?;
    let cp = CarCrossProducts::new(x, y, structure.weights());
    let interval = search_interval(structure);
    let (delta, nll, iterations) = brent_minimize(
        |d| cp.nll(d, structure),
        interval.0,
        interval.1,
        BRENT_TOL,
        BRENT_MAX_ITER,
    );
    if !nll.is_finite() {
        return Err(Error::Numerical("CAR profile likelihood is not finite".into()));
    }

    // curvature of the profile likelihood for the δ standard error
    let h = 1e-4 * (interval.1 - interval.0);
    let (lo, hi) = ((delta - h).max(interval.0), (delta + h).min(interval.1));
    let mid = 0.5 * (lo + hi);
    let step = 0.5 * (hi - lo);
    let curvature = (cp.nll(hi, structure) - 2.0 * cp.nll(mid, structure) + cp.nll(lo, structure)) / (step * step);
    let delta_se = if curvature > 0.0 {
        curvature.recip().sqrt()
    } else {
        f64::NAN
    };

    let mut fit = car_at(x, y, structure, &cp, delta, delta_se)?;
    fit.loglik = -nll;
    fit.diagnostics.iterations = iterations;
    fit.diagnostics.converged = iterations < BRENT_MAX_ITER;
    if near_boundary(delta, interval) {
        fit.diagnostics.boundary = true;
        fit.diagnostics.warnings.push(BOUNDARY_WARNING.to_string());
    }
    Ok(fit)
}

/// CAR estimates with δ held at `delta`.
pub fn fit_car_fixed(x: &DesignMatrix, y: &DVector<f64>, structure: &SpatialStructure, delta: f64) -> Result<ModelFit> {
    check_inputs(x, y)?;
    check_structure(x, structure)?;
    if !structure.bounds().contains(delta) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} outside the spectral bounds"
        )));
    }
    crate::linalg::require_full_rank(&x.x, &x.column_names)?;
    let cp = CarCrossProducts::new(x, y, structure.weights());
    let mut fit = car_at(x, y, structure, &cp, delta, f64::NAN)?;
    fit.loglik = -cp.nll(delta, structure);
    Ok(fit)
}

fn car_at(
    x: &DesignMatrix,
    y: &DVector<f64>,
    structure: &SpatialStructure,
    cp: &CarCrossProducts,
    delta: f64,
    delta_se: f64,
) -> Result<ModelFit> {
    let (beta, ss, xbx) = cp.solve(delta)?;
    let sigma2 = ss / y.len() as f64;
    let cov = cholesky(xbx, "X'BX")?.inverse();
    let std_errors = cov.diagonal().map(|v| (sigma2 * v).sqrt());
    let resid = y - &x.x * &beta;
    Ok(ModelFit {
        kind: ModelKind::Car,
        column_names: x.column_names.clone(),
        beta,
        std_errors,
        sigma2: Some(sigma2),
        spatial: Some(SpatialParameter::Delta {
            value: delta,
            std_error: delta_se,
        }),
        eta: None,
        loglik: f64::NAN,
        deviance: None,
        n_units: structure.n(),
        residual_state: ResidualState::CarUnitMean(unit_time_average(&resid, structure.n())),
        diagnostics: FitDiagnostics {
            iterations: 1,
            converged: true,
            ..FitDiagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[&[f64]], n_units: usize) -> DesignMatrix {
        let rows = cols[0].len();
        let x = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
        let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
        DesignMatrix::from_blocks(x, n_units, 2, names).unwrap()
    }

    #[test]
    fn lr_exact_fit() {
        let x1 = [0.0, 1.0, 2.0, 5.0, -1.0, 3.0];
        let y = DVector::from_iterator(6, x1.iter().map(|v| 2.0 * v + 3.0));
        let fit = fit_lr(&design(&[&[1.0; 6], &x1], 3), &y).unwrap();
        assert!((fit.beta[0] - 3.0).abs() < 1e-12);
        assert!((fit.beta[1] - 2.0).abs() < 1e-12);
        assert!(fit.sigma2.unwrap() < 1e-20);
    }

    #[test]
    fn lr_intercept_only_is_mean() {
        let y = DVector::from_vec(vec![1.0, 4.0, 2.0, 7.0]);
        let fit = fit_lr(&design(&[&[1.0; 4]], 2), &y).unwrap();
        assert!((fit.beta[0] - 3.5).abs() < 1e-14);
    }

    #[test]
    fn lr_duplicate_column_names_it() {
        let x1 = [0.0, 1.0, 2.0, 5.0];
        let y = DVector::from_vec(vec![1.0, 4.0, 2.0, 7.0]);
        let err = fit_lr(&design(&[&[1.0; 4], &x1, &x1], 2), &y).unwrap_err();
        match err {
            Error::RankDeficient(cols) => assert_eq!(cols, vec!["x2".to_string()]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn car_apply_matches_dense() {
        let w = SpatialWeights::lattice(2);
        let state = CarFitState::new(0.3, &w);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0, 2.0, -1.0]);
        let b = w.shifted_identity(0.3);
        let got = state.apply(&v);
        for blk in 0..2 {
            let expect = &b * v.rows(4 * blk, 4);
            for i in 0..4 {
                assert!((got[4 * blk + i] - expect[i]).abs() < 1e-15);
            }
        }
    }
}
