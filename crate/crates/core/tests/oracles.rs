use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use gdrisk_core::linalg::{mat_t_vec, mat_vec};
use gdrisk_core::risk::{noise_monte_carlo, noise_monte_carlo_fixed_design};
use gdrisk_core::seed::rng_from;
use gdrisk_core::*;
use rand::Rng;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn random_problem(seed: u64, d: usize) -> ProblemInstance {
    let mut rng = rng_from(seed, &[99]);
    let a = rng.random_range(1.2..3.0);
    let r = rng.random_range(0.0..1.5);
    let sigma2 = rng.random_range(0.1..1.0);
    make_power_law_problem(a, r, d, sigma2, 0.1).unwrap()
}

/// `Xᵀ(XXᵀ)⁻¹y` for `n < d`, `(XᵀX)⁻¹Xᵀy` otherwise, by Cholesky.
fn min_norm_ols(ds: &Dataset) -> Vec<f64> {
    let x = ds.x();
    let y = Mat::from_fn(ds.n(), 1, |i, _| ds.y()[i]);
    if ds.n() <= ds.d() {
        let a = x * x.transpose();
        let alpha = a.llt(Side::Lower).unwrap().solve(&y);
        let alpha: Vec<f64> = (0..ds.n()).map(|i| alpha[(i, 0)]).collect();
        mat_t_vec(x, &alpha)
    } else {
        let g = x.transpose() * x;
        let rhs = x.transpose() * &y;
        let w = g.llt(Side::Lower).unwrap().solve(&rhs);
        (0..ds.d()).map(|i| w[(i, 0)]).collect()
    }
}

#[test]
fn gd_analytic_agrees_with_iteration() {
    for seed in 0..50 {
        let p = random_problem(seed, 50);
        let ds = sample_dataset(&p, 20, seed).unwrap();
        let eta = 0.9 * max_stable_stepsize(&ds).unwrap();
        let path = gd_path(&ds, eta, &[1, 10, 100]).unwrap();
        for (w, t) in path.iter().zip([1u64, 10, 100]) {
            let a = gd_analytic(&ds, eta, t).unwrap();
            assert!(rel(&a, w) <= 1e-8, "seed {seed} t {t}: {}", rel(&a, w));
        }
        assert!(gd_analytic(&ds, eta, 0).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn ridge_limit_is_min_norm_ols() {
    for (seed, (n, d)) in [(20, 50), (50, 20), (5, 8), (30, 31)].into_iter().enumerate() {
        let p = random_problem(seed as u64, d);
        let ds = sample_dataset(&p, n, seed as u64).unwrap();
        let reference = min_norm_ols(&ds);
        let zero = ridge_fit(&ds, 0.0).unwrap();
        assert!(rel(&zero, &reference) <= 1e-8, "({n}, {d}): {}", rel(&zero, &reference));
        assert!(rel(&ridge_fit(&ds, 1e-12).unwrap(), &zero) <= 1e-6);
    }
}

#[test]
fn long_gd_converges_to_min_norm() {
    let p = random_problem(3, 8);
    let ds = sample_dataset(&p, 5, 3).unwrap();
    let eta = 0.5 * max_stable_stepsize(&ds).unwrap();
    let w = gd_analytic(&ds, eta, 100_000).unwrap();
    assert!(rel(&w, &ridge_fit(&ds, 0.0).unwrap()) <= 1e-6);
}

#[test]
fn noiseless_long_gd_projects_wstar_on_row_space() {
    let p = random_problem(4, 30).with_sigma2(0.0).unwrap();
    let ds = sample_dataset(&p, 10, 4).unwrap();
    let eta = 0.5 * max_stable_stepsize(&ds).unwrap();
    let w = gd_analytic(&ds, eta, T_INFINITY).unwrap();
    let v = ds.svd().unwrap().v();
    let proj = mat_vec(v, &mat_t_vec(v, &p.wstar));
    assert!(rel(&w, &proj) <= 1e-8);
}

#[test]
fn conditional_oracles_match_noise_monte_carlo() {
    for seed in 0..20u64 {
        let (n, d) = if seed % 2 == 0 { (50, 200) } else { (50, 20) };
        let p = random_problem(100 + seed, d);
        let ds = sample_dataset(&p, n, seed).unwrap();
        let limit = max_stable_stepsize(&ds).unwrap();
        let lambda = 10f64.powf(-3.0 + (seed % 4) as f64);
        let exact = ridge_conditional_risk(&ds, &p, lambda).unwrap();
        let mc = noise_monte_carlo(&ds, &p, EstimatorConfig::Ridge { lambda }, 2000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr, "ridge seed {seed}: {exact:?} vs {mc:?}");

        let (eta, t) = (0.5 * limit, 1 + 7 * seed);
        let exact = gd_conditional_risk(&ds, &p, eta, t).unwrap();
        let mc = noise_monte_carlo(&ds, &p, EstimatorConfig::Gd { eta, t }, 2000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr, "gd seed {seed}: {exact:?} vs {mc:?}");
    }
}

#[test]
fn sgd_recursion_matches_path_monte_carlo() {
    for seed in 0..4u64 {
        let p = make_power_law_problem(2.0, 1.0, 100 + 50 * seed as usize, 0.5, 0.1).unwrap();
        let n = 100 + 30 * seed as usize;
        let eta0 = 1.0 / (4.0 * p.trace());
        let exact = sgd_exact_risk_gaussian(&p, n, eta0).unwrap();
        let mc = monte_carlo_risk(&p, EstimatorConfig::Sgd { eta0 }, n, 2000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr, "seed {seed}: {exact:?} vs {mc:?}");
    }
}

#[test]
fn sgd_recursion_hand_values() {
    let p = make_custom_problem(vec![1.0], vec![1.0], 0.0, Design::Gaussian).unwrap();
    assert!((sgd_exact_risk_gaussian(&p, 0, 0.1).unwrap().mean - 1.0).abs() < 1e-15);
    let rademacher = make_custom_problem(vec![1.0], vec![1.0], 0.0, Design::Rademacher).unwrap();
    assert!(sgd_exact_risk_gaussian(&rademacher, 10, 0.1).is_err());
}

#[test]
fn fixed_design_closed_forms_match_monte_carlo() {
    for seed in 0..10u64 {
        let p = random_problem(200 + seed, 15);
        let ds = sample_dataset(&p, 40, seed).unwrap();
        let lambda = 0.05 * (seed + 1) as f64;
        let exact = fixed_design_ridge_risk(&ds, &p, lambda).unwrap();
        let mc = noise_monte_carlo_fixed_design(&ds, &p, EstimatorConfig::Ridge { lambda }, 2000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr, "ridge seed {seed}");

        let emp_top = ds.gram_norm().unwrap() / ds.n() as f64;
        let (eta, t) = (0.7 / emp_top, 3 + seed);
        let exact = fixed_design_gd_risk(&ds, &p, eta, t).unwrap();
        let mc = noise_monte_carlo_fixed_design(&ds, &p, EstimatorConfig::Gd { eta, t }, 2000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr, "gd seed {seed}");
    }
}

#[test]
fn fixed_design_hand_cases() {
    let x = Mat::from_fn(4, 1, |_, _| 1.0);
    let p = make_custom_problem(vec![1.0], vec![1.0], 1.0, Design::Gaussian).unwrap();
    let ds = Dataset::with_truth(x, vec![1.0], vec![0.0; 4]).unwrap();
    assert_eq!(fixed_design_ridge_risk(&ds, &p, 1.0).unwrap().mean, 0.3125);
    for t in [1, 2, 50] {
        assert_eq!(fixed_design_gd_risk(&ds, &p, 1.0, t).unwrap().mean, 0.25);
    }
    assert_eq!(fixed_design_gd_risk(&ds, &p, 1.0, 0).unwrap().mean, 1.0);
}

#[test]
fn fixed_design_limits() {
    let p = random_problem(7, 6);
    let ds = sample_dataset(&p, 30, 7).unwrap();
    let ridge0 = fixed_design_ridge_risk(&ds, &p, 0.0).unwrap();
    let expected = p.sigma2 * 6.0 / 30.0;
    assert!(ridge0.bias.unwrap().abs() < 1e-12);
    assert!((ridge0.mean - expected).abs() < 1e-10);
    let eta = 0.5 * ds.n() as f64 / ds.gram_norm().unwrap();
    let gd = fixed_design_gd_risk(&ds, &p, eta, T_INFINITY).unwrap();
    assert!((gd.mean - expected).abs() < 1e-10);
}

#[test]
fn monte_carlo_degenerate_and_scaling() {
    let p = random_problem(9, 5).with_sigma2(0.0).unwrap();
    let est = monte_carlo_risk(&p, EstimatorConfig::Ridge { lambda: 0.0 }, 20, 4, 1).unwrap();
    assert!(est.mean < 1e-20 && est.stderr < 1e-20);

    let p = make_power_law_problem(2.0, 0.5, 60, 1.0, 0.1).unwrap();
    let cfg = EstimatorConfig::Sgd { eta0: 1.0 / (4.0 * p.trace()) };
    let a = monte_carlo_risk(&p, cfg, 50, 2000, 11).unwrap();
    let b = monte_carlo_risk(&p, cfg, 50, 4000, 12).unwrap();
    let ratio = (b.stderr.powi(2) * 4000.0) / (a.stderr.powi(2) * 2000.0);
    assert!((0.8..1.25).contains(&ratio), "ratio {ratio}");
}

#[test]
fn conditional_risk_without_noise_is_realized_risk() {
    let p = random_problem(13, 40).with_sigma2(0.0).unwrap();
    let ds = sample_dataset(&p, 15, 13).unwrap();
    let eta = 0.8 * max_stable_stepsize(&ds).unwrap();
    for t in [0, 1, 5, 40] {
        let oracle = gd_conditional_risk(&ds, &p, eta, t).unwrap();
        let direct = excess_risk(&gd_analytic(&ds, eta, t).unwrap(), &p).unwrap();
        assert!((oracle.mean - direct).abs() <= 1e-8 * direct.max(1e-12), "t {t}");
        assert_eq!(oracle.variance, Some(0.0));
    }
    let t0 = gd_conditional_risk(&ds, &p, eta, 0).unwrap();
    assert_eq!(t0.mean, p.signal());
}
