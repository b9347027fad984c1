mod common;

use common::{dense_car_loglik, dense_sar_nll, kron_identity, newton_glm, normal, ols, random_design, random_graph};
use crimecast::econ::{
    fit_car, fit_car_fixed, fit_glm, fit_glmm_with, fit_lr, fit_sar, predict_one_step, FitDiagnostics, GlmmOptions,
    ModelFit, ModelKind, ResidualState, SarConcentratedState, SpatialParameter,
};
use crimecast::features::DesignMatrix;
use crimecast::rng::{stream, Rng};
use crimecast::spatial::{SpatialStructure, SpatialWeights};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

fn sar_data(rng: &mut Rng, w: &SpatialWeights, t: usize, rho: f64) -> (DesignMatrix, DVector<f64>) {
    let n = w.n();
    let x = random_design(rng, n, t, 3);
    let beta = DVector::from_vec(vec![2.0, 1.0, -0.5]);
    let a = w.shifted_identity(rho);
    let mean = &x.x * beta;
    let e = DVector::from_fn(n * t, |_, _| normal(rng));
    let rhs = mean + e;
    let ainv = kron_identity(t, &a.try_inverse().unwrap());
    (x, ainv * rhs)
}

fn poisson_data(rng: &mut Rng, w: &SpatialWeights, t: usize, effect_sd: f64) -> (DesignMatrix, DVector<f64>) {
    let n = w.n();
    let x = random_design(rng, n, t, 3);
    let beta = DVector::from_vec(vec![1.0, 0.3, -0.2]);
    let eta: Vec<f64> = (0..n).map(|_| effect_sd * normal(rng)).collect();
    let lin = &x.x * beta;
    let y = DVector::from_fn(n * t, |r, _| {
        let mu = (lin[r] + eta[r % n]).exp();
        Poisson::new(mu).unwrap().sample(rng)
    });
    (x, y)
}

#[test]
fn sar_profile_matches_dense_oracle() {
    for case in 0..50u64 {
        let mut rng = stream(100, &[case]);
        let n = rng.random_range(4..14);
        let t = rng.random_range(2..5);
        let w = random_graph(&mut rng, n, 0.3);
        let s = SpatialStructure::new(w.clone()).unwrap();
        let (x, y) = sar_data(&mut rng, &w, t, 0.1);
        let state = SarConcentratedState::new(&x, &y, &w).unwrap();
        let b = s.bounds();
        let rho = b.lower + (b.upper - b.lower) * rng.random_range(0.05..0.95);
        let dense = dense_sar_nll(&x.x, &y, &w.to_dense(), rho);
        let fast = state.nll(rho, &s);
        assert!(
            (fast - dense).abs() < 1e-8 * dense.abs().max(1.0),
            "case {case}: {fast} vs {dense}"
        );
    }
}

#[test]
fn sar_estimate_matches_grid_on_path() {
    let w = SpatialWeights::from_index_pairs(3, [(0, 1), (1, 2)]).unwrap();
    let s = SpatialStructure::new(w.clone()).unwrap();
    let mut rng = stream(7, &[]);
    let (x, y) = sar_data(&mut rng, &w, 40, 0.3);
    let fit = fit_sar(&x, &y, &s).unwrap();
    let b = s.bounds();
    let dense = w.to_dense();
    let steps = 20_000;
    let (best, _) = (1..steps)
        .map(|k| {
            let rho = b.lower + (b.upper - b.lower) * k as f64 / steps as f64;
            (rho, dense_sar_nll(&x.x, &y, &dense, rho))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let spacing = (b.upper - b.lower) / steps as f64;
    assert!(
        (fit.rho().unwrap() - best).abs() <= 2.0 * spacing,
        "{} vs {best}",
        fit.rho().unwrap()
    );
}

#[test]
fn car_loglik_matches_dense_normal() {
    for case in 0..20u64 {
        let mut rng = stream(200, &[case]);
        let n = rng.random_range(4..12);
        let t = rng.random_range(2..5);
        let w = random_graph(&mut rng, n, 0.35);
        let s = SpatialStructure::new(w.clone()).unwrap();
        let (x, y) = sar_data(&mut rng, &w, t, 0.0);
        let b = s.bounds();
        let delta = b.lower + (b.upper - b.lower) * rng.random_range(0.05..0.95);
        let fit = fit_car_fixed(&x, &y, &s, delta).unwrap();
        let dense = dense_car_loglik(&x.x, &y, &w.to_dense(), delta, &fit.beta, fit.sigma2.unwrap());
        assert!(
            (fit.loglik - dense).abs() < 1e-6 * dense.abs().max(1.0),
            "case {case}: {} vs {dense}",
            fit.loglik
        );
    }
}

#[test]
fn car_at_zero_is_pooled_regression() {
    let mut rng = stream(3, &[]);
    let w = SpatialWeights::lattice(4);
    let s = SpatialStructure::new(w.clone()).unwrap();
    let (x, y) = sar_data(&mut rng, &w, 5, 0.2);
    let car = fit_car_fixed(&x, &y, &s, 0.0).unwrap();
    let lr = fit_lr(&x, &y).unwrap();
    assert!((car.beta - &lr.beta).amax() < 1e-10);
    assert!((car.sigma2.unwrap() - lr.sigma2.unwrap()).abs() < 1e-10);
}

#[test]
fn residual_orthogonality() {
    let mut rng = stream(4, &[]);
    let w = SpatialWeights::lattice(5);
    let s = SpatialStructure::new(w.clone()).unwrap();
    let (x, y) = sar_data(&mut rng, &w, 6, 0.15);
    let t = y.len() / w.n();

    let lr = fit_lr(&x, &y).unwrap();
    let r = &y - &x.x * &lr.beta;
    assert!((x.x.transpose() * r).amax() < 1e-8);
    assert!((lr.beta - ols(&x.x, &y)).amax() < 1e-10);

    let sar = fit_sar(&x, &y, &s).unwrap();
    let a = kron_identity(t, &w.shifted_identity(sar.rho().unwrap()));
    let r = &a * &y - &x.x * &sar.beta;
    assert!((x.x.transpose() * &r).amax() < 1e-8);
    if let ResidualState::SarStructuralMean(eps) = &sar.residual_state {
        for i in 0..w.n() {
            let avg = (0..t).map(|b| r[b * w.n() + i]).sum::<f64>() / t as f64;
            assert!((eps[i] - avg).abs() < 1e-10);
        }
    } else {
        panic!("missing SAR residual state");
    }

    let car = fit_car(&x, &y, &s).unwrap();
    let bmat = kron_identity(t, &w.shifted_identity(car.delta().unwrap()));
    let r = &y - &x.x * &car.beta;
    assert!((x.x.transpose() * bmat * r).amax() < 1e-8);
}

#[test]
fn glm_matches_newton() {
    for case in 0..10u64 {
        let mut rng = stream(300, &[case]);
        let w = SpatialWeights::lattice(4);
        let (x, y) = poisson_data(&mut rng, &w, 8, 0.0);
        let fit = fit_glm(&x, &y).unwrap();
        let newton = newton_glm(&x.x, &y);
        assert!((fit.beta.clone() - newton).amax() < 1e-6, "case {case}");
    }
}

#[test]
fn glmm_score_balances_counts() {
    let mut rng = stream(5, &[]);
    let w = SpatialWeights::lattice(5);
    let s = SpatialStructure::new(w.clone()).unwrap();
    let (x, y) = poisson_data(&mut rng, &w, 10, 0.4);
    let fit = fit_glmm_with(&x, &y, &s, &GlmmOptions::default()).unwrap();
    let eta = fit.eta.as_ref().unwrap();
    let n = w.n();
    let lin = &x.x * &fit.beta;
    let total_mu: f64 = (0..y.len()).map(|r| (lin[r] + eta[r % n]).exp()).sum();
    assert!((total_mu - y.sum()).abs() < 0.01 * y.sum());
    assert!(eta.sum().abs() < 1e-8);
}

#[test]
fn glmm_collapses_to_glm_as_variance_vanishes() {
    let mut rng = stream(6, &[]);
    let w = SpatialWeights::lattice(4);
    let s = SpatialStructure::new(w.clone()).unwrap();
    let (x, y) = poisson_data(&mut rng, &w, 8, 0.3);
    let opts = GlmmOptions {
        fixed_sigma2: Some(1e-8),
        ..GlmmOptions::default()
    };
    let glmm = fit_glmm_with(&x, &y, &s, &opts).unwrap();
    let glm = fit_glm(&x, &y).unwrap();
    assert!((glmm.beta - glm.beta).amax() < 1e-3);
}

fn toy_fit(kind: ModelKind, beta: Vec<f64>, n: usize) -> ModelFit {
    ModelFit {
        kind,
        column_names: (0..beta.len()).map(|j| format!("x{j}")).collect(),
        std_errors: DVector::zeros(beta.len()),
        beta: DVector::from_vec(beta),
        sigma2: None,
        spatial: None,
        eta: None,
        loglik: 0.0,
        deviance: None,
        n_units: n,
        residual_state: ResidualState::None,
        diagnostics: FitDiagnostics::default(),
    }
}

#[test]
fn one_step_predictor_toy_cases() {
    let pair = SpatialStructure::new(SpatialWeights::from_index_pairs(2, [(0, 1)]).unwrap()).unwrap();
    let ones = DMatrix::from_element(2, 1, 1.0);

    let mut car = toy_fit(ModelKind::Car, vec![1.0], 2);
    car.spatial = Some(SpatialParameter::Delta {
        value: 0.2,
        std_error: 0.0,
    });
    car.residual_state = ResidualState::CarUnitMean(DVector::from_vec(vec![1.0, 1.0]));
    let f = predict_one_step(&car, &ones, Some(&pair)).unwrap();
    assert!(f.values.iter().all(|v| (v - 1.2).abs() < 1e-12));

    let mut sar = toy_fit(ModelKind::Sar, vec![1.0], 2);
    sar.spatial = Some(SpatialParameter::Rho {
        value: 0.0,
        std_error: 0.0,
    });
    sar.residual_state = ResidualState::SarStructuralMean(DVector::from_vec(vec![0.5, -0.25]));
    let f = predict_one_step(&sar, &ones, Some(&pair)).unwrap();
    assert!((f.values[0] - 1.5).abs() < 1e-12 && (f.values[1] - 0.75).abs() < 1e-12);

    let mut sar_neg = sar.clone();
    sar_neg.beta = DVector::from_vec(vec![-3.0]);
    let f = predict_one_step(&sar_neg, &ones, Some(&pair)).unwrap();
    assert_eq!(f.values, vec![0.0, 0.0]);
    assert!(f.unclamped[0] < 0.0);

    let mut glmm = toy_fit(ModelKind::Glmm, vec![0.7], 2);
    glmm.eta = Some(DVector::zeros(2));
    let glm = toy_fit(ModelKind::Glm, vec![0.7], 2);
    let a = predict_one_step(&glmm, &ones, Some(&pair)).unwrap();
    let b = predict_one_step(&glm, &ones, None).unwrap();
    assert_eq!(a.values, b.values);
    assert!((a.values[0] - 0.7f64.exp()).abs() < 1e-12);
}
