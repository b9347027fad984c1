use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::fit::{FitDiagnostics, ModelFit, ModelKind, ResidualState};
use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::linalg::{cholesky, require_full_rank};
use crate::spatial::{build_precision, PrecisionStructure, SpatialStructure};

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
/// Linear predictors above this overflow exp() in practice.
const ETA_LIMIT: f64 = 700.0;

fn check_counts(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.x.nrows(),
            got: y.len(),
        });
    }
    if let Some(i) = y
        .iter()
        .position(|&v| !(v >= 0.0) || v.fract() != 0.0 || !v.is_finite())
    {
        return Err(Error::InvalidCounts(i));
    }
    if x.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in design".into()));
    }
    Ok(())
}

/// Σ (y log μ − μ − log y!)
pub fn poisson_loglik(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    y.iter()
        .zip(mu.iter())
        .map(|(&y, &m)| {
            let ylogm = if y > 0.0 { y * m.ln() } else { 0.0 };
            ylogm - m - ln_gamma(y + 1.0)
        })
        .sum()
}

/// 2 Σ (y log(y/μ) − (y − μ))
pub fn poisson_deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&y, &m)| {
            let t = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
            t - (y - m)
        })
        .sum::<f64>()
}

fn exp_link(eta: &DVector<f64>) -> Result<DVector<f64>> {
    if eta.iter().any(|&e| !(e < ETA_LIMIT)) {
        return Err(Error::Numerical("linear predictor overflow".into()));
    }
    Ok(eta.map(f64::exp))
}

/// Weighted least squares step: solves (XᵀMX) b = XᵀMz.
fn wls(x: &DMatrix<f64>, mu: &DVector<f64>, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mut xw = x.clone();
    for (mut row, &m) in xw.row_iter_mut().zip(mu.iter()) {
        row *= m;
    }
    let xtwx = x.tr_mul(&xw);
    let rhs = xw.tr_mul(z);
    let chol = cholesky(xtwx.clone(), "X'WX")?;
    Ok((chol.solve(&rhs), xtwx))
}

pub fn fit_glm(x: &DesignMatrix, y: &DVector<f64>) -> Result<ModelFit> {
    check_counts(x, y)?;
    require_full_rank(&x.x, &x.column_names)?;
    let xm = &x.x;

    // first step from μ₀ = y + 0.1
    let mu0 = y.map(|v| v + 0.1);
    let z0 = DVector::from_iterator(y.len(), mu0.iter().zip(y.iter()).map(|(&m, &y)| m.ln() + (y - m) / m));
    let (mut beta, _) = wls(xm, &mu0, &z0)?;
    let mut mu = exp_link(&(xm * &beta))?;
    let mut dev = poisson_deviance(y, &mu);

    let mut converged = false;
    let mut iterations = 1;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let eta = xm * &beta;
        let z = DVector::from_iterator(y.len(), (0..y.len()).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]));
        let (target, _) = wls(xm, &mu, &z)?;
        let mut step = &target - &beta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &beta + &step;
            if let Ok(m) = exp_link(&(xm * &cand)) {
                let d = poisson_deviance(y, &m);
                if d.is_finite() && d <= dev * (1.0 + 1e-12) + 1e-12 {
                    accepted = Some((cand, m, d));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, m, d)) = accepted else {
            return Err(Error::Divergence {
                model: "glm",
                iterations,
            });
        };
        let change = (&cand - &beta).amax();
        beta = cand;
        mu = m;
        dev = d;
        if change < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Divergence {
            model: "glm",
            iterations,
        });
    }

    let (_, info) = wls(xm, &mu, &DVector::zeros(y.len()))?;
    let std_errors = cholesky(info, "Fisher information")?
        .inverse()
        .diagonal()
        .map(f64::sqrt);
    Ok(ModelFit {
        kind: ModelKind::Glm,
        column_names: x.column_names.clone(),
        beta,
        std_errors,
        sigma2: None,
        spatial: None,
        eta: None,
        loglik: poisson_loglik(y, &mu),
        deviance: Some(dev),
        n_units: x.n_units,
        residual_state: ResidualState::None,
        diagnostics: FitDiagnostics {
            iterations,
            converged,
            ..FitDiagnostics::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmmOptions {
    /// Hold σ² fixed instead of estimating it.
    pub fixed_sigma2: Option<f64>,
    pub initial_sigma2: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for GlmmOptions {
    fn default() -> Self {
        Self {
            fixed_sigma2: None,
            initial_sigma2: 0.1,
            outer_tol: 1e-6,
            max_outer: 200,
            inner_tol: 1e-8,
            max_inner: 50,
        }
    }
}

const MIN_SIGMA2: f64 = 1e-8;

/// Penalized Poisson problem in θ = (β, η) with η summing to zero on each
/// connected component of W.
struct GlmmProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    unit: Vec<usize>,
    q: PrecisionStructure,
    components: Vec<Vec<usize>>,
    k: usize,
    n: usize,
}

impl GlmmProblem<'_> {
    fn linear_predictor(&self, beta: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let mut lin = self.x * beta;
        for (r, l) in lin.iter_mut().enumerate() {
            *l += eta[self.unit[r]];
        }
        lin
    }

    fn objective(&self, mu: &DVector<f64>, eta: &DVector<f64>, sigma2: f64) -> f64 {
        poisson_loglik(self.y, mu) - self.q.quadratic_form(eta.as_slice()) / (2.0 * sigma2)
    }

    /// KKT matrix [H Cᵀ; C 0] for the negative Hessian H at μ.
    fn kkt(&self, mu: &DVector<f64>, sigma2: f64) -> DMatrix<f64> {
        let (k, n) = (self.k, self.n);
        let p = k + n;
        let m = p + self.components.len();
        let mut a = DMatrix::zeros(m, m);
        for r in 0..self.x.nrows() {
            let u = k + self.unit[r];
            let w = mu[r];
            let xr = self.x.row(r);
            for i in 0..k {
                let wi = w * xr[i];
                for j in 0..=i {
                    a[(i, j)] += wi * xr[j];
                }
                a[(u, i)] += wi;
            }
            a[(u, u)] += w;
        }
        for i in 0..k {
            for j in 0..i {
                a[(j, i)] = a[(i, j)];
            }
            for u in k..p {
                a[(i, u)] = a[(u, i)];
            }
        }
        for i in 0..n {
            for (j, v) in std::iter::once((i, self.q.weights().degree(i) as f64))
                .chain(self.q.weights().neighbours(i).iter().map(|&j| (j, -1.0)))
            {
                a[(k + i, k + j)] += v / sigma2;
            }
        }
        for (c, comp) in self.components.iter().enumerate() {
            for &i in comp {
                a[(p + c, k + i)] = 1.0;
                a[(k + i, p + c)] = 1.0;
            }
        }
        a
    }

    fn gradient(&self, mu: &DVector<f64>, eta: &DVector<f64>, sigma2: f64) -> DVector<f64> {
        let (k, n) = (self.k, self.n);
        let resid = self.y - mu;
        let mut g = DVector::zeros(k + n + self.components.len());
        g.rows_mut(0, k).copy_from(&self.x.tr_mul(&resid));
        for (r, &e) in resid.iter().enumerate() {
            g[k + self.unit[r]] += e;
        }
        let qe = self.q.apply(eta.as_slice());
        for i in 0..n {
            g[k + i] -= qe[i] / sigma2;
        }
        g
    }

    /// Penalized IRLS at fixed σ². Returns the number of Newton steps.
    fn inner(
        &self,
        beta: &mut DVector<f64>,
        eta: &mut DVector<f64>,
        sigma2: f64,
        opts: &GlmmOptions,
    ) -> Result<(usize, bool)> {
        let k = self.k;
        let mut mu = exp_link(&self.linear_predictor(beta, eta))?;
        let mut obj = self.objective(&mu, eta, sigma2);
        for it in 1..=opts.max_inner {
            let kkt = self.kkt(&mu, sigma2);
            let g = self.gradient(&mu, eta, sigma2);
            let sol = kkt
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::Numerical("singular GLMM system".into()))?;
            let mut db = sol.rows(0, k).into_owned();
            let mut de = sol.rows(k, self.n).into_owned();
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let nb = &*beta + &db;
                let ne = &*eta + &de;
                if let Ok(m) = exp_link(&self.linear_predictor(&nb, &ne)) {
                    let o = self.objective(&m, &ne, sigma2);
                    if o.is_finite() && o >= obj - 1e-10 * obj.abs().max(1.0) {
                        *beta = nb;
                        *eta = ne;
                        mu = m;
                        obj = o;
                        accepted = true;
                        break;
                    }
                }
                db *= 0.5;
                de *= 0.5;
            }
            if !accepted {
                return Ok((it, false));
            }
            if db.amax().max(de.amax()) < opts.inner_tol {
                return Ok((it, true));
            }
        }
        Ok((opts.max_inner, false))
    }

    /// Top-left (β, η) block of the inverse KKT matrix.
    fn constrained_inverse(&self, mu: &DVector<f64>, sigma2: f64) -> Result<DMatrix<f64>> {
        let p = self.k + self.n;
        let inv = self
            .kkt(mu, sigma2)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular GLMM system".into()))?;
        Ok(inv.view((0, 0), (p, p)).into_owned())
    }
}

/// Poisson GLMM with a spatially structured random intercept per unit.
pub fn fit_glmm(x: &DesignMatrix, y: &DVector<f64>, structure: &SpatialStructure) -> Result<ModelFit> {
    fit_glmm_with(x, y, structure, &GlmmOptions::default())
}

pub fn fit_glmm_with(
    x: &DesignMatrix,
    y: &DVector<f64>,
    structure: &SpatialStructure,
    opts: &GlmmOptions,
) -> Result<ModelFit> {
    check_counts(x, y)?;
    if structure.n() != x.n_units {
        return Err(Error::DimensionMismatch {
            expected: x.n_units,
            got: structure.n(),
        });
    }
    let glm = fit_glm(x, y)?;
    let q = build_precision(structure.weights());
    let rank_q = q.rank() as f64;
    let problem = GlmmProblem {
        x: &x.x,
        y,
        unit: x.rows.iter().map(|&(u, _)| u).collect(),
        components: structure.weights().components(),
        q,
        k: x.n_columns(),
        n: x.n_units,
    };

    let mut beta = glm.beta.clone();
    let mut eta = DVector::zeros(problem.n);
    let mut sigma2 = opts.fixed_sigma2.unwrap_or(opts.initial_sigma2).max(MIN_SIGMA2);
    let mut diagnostics = FitDiagnostics::default();
    let mut total_inner = 0;

    for outer in 1..=opts.max_outer {
        let (prev_beta, prev_eta, prev_sigma2) = (beta.clone(), eta.clone(), sigma2);
        let (steps, inner_ok) = problem.inner(&mut beta, &mut eta, sigma2, opts)?;
        total_inner += steps;
        if !inner_ok && outer == opts.max_outer {
            diagnostics.warnings.push("penalized IRLS did not converge".into());
        }
        if let Some(fixed) = opts.fixed_sigma2 {
            sigma2 = fixed;
        } else {
            let mu = exp_link(&problem.linear_predictor(&beta, &eta))?;
            let c = problem.constrained_inverse(&mu, sigma2)?;
            let c_eta = c.view((problem.k, problem.k), (problem.n, problem.n));
            let k = problem.k;
            let mut tr = 0.0;
            for i in 0..problem.n {
                tr += problem.q.weights().degree(i) as f64 * c_eta[(i, i)];
                for &j in problem.q.weights().neighbours(i) {
                    tr -= c[(k + j, k + i)];
                }
            }
            let quad = problem.q.quadratic_form(eta.as_slice());
            let edf = rank_q - tr / sigma2;
            sigma2 = if edf > 0.0 { quad / edf } else { (quad + tr) / rank_q }.max(MIN_SIGMA2);
        }

        let scale = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax() / b.amax().max(1e-8);
        let change = scale(&beta, &prev_beta)
            .max(scale(&eta, &prev_eta))
            .max((sigma2 - prev_sigma2).abs() / prev_sigma2);
        diagnostics.iterations = outer;
        if change < opts.outer_tol && inner_ok {
            diagnostics.converged = true;
            break;
        }
    }
    if !diagnostics.converged {
        diagnostics.warnings.push(format!(
            "GLMM did not converge in {} outer iterations; last iterate returned",
            opts.max_outer
        ));
    }
    diagnostics.warnings.push(format!("{total_inner} penalized IRLS steps"));

    let mu = exp_link(&problem.linear_predictor(&beta, &eta))?;
    let c = problem.constrained_inverse(&mu, sigma2)?;
    let std_errors = DVector::from_iterator(problem.k, (0..problem.k).map(|i| c[(i, i)].max(0.0).sqrt()));
    Ok(ModelFit {
        kind: ModelKind::Glmm,
        column_names: x.column_names.clone(),
        beta,
        std_errors,
        sigma2: Some(sigma2),
        spatial: None,
        eta: Some(eta),
        loglik: poisson_loglik(y, &mu),
        deviance: Some(poisson_deviance(y, &mu)),
        n_units: x.n_units,
        residual_state: ResidualState::None,
        diagnostics,
    })
}
