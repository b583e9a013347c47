use gdrisk_core::experiments::{default_gd_stepsize, max_sgd_stepsize};
use gdrisk_core::seed::rng_from;
use gdrisk_core::*;
use rand::Rng;

#[test]
fn rate_fit_recovers_noisy_exponent() {
    let mut rng = rng_from(2024, &[1]);
    let pts: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0]
        .iter()
        .map(|&n: &f64| (n, n.powf(-0.5) * rng.random_range(0.95..1.05)))
        .collect();
    let fit = rate_fit(&pts).unwrap();
    assert!((fit.slope + 0.5).abs() <= 3.0 * fit.slope_stderr, "{fit:?}");
    assert!(fit.slope_stderr > 0.0);
}

#[test]
fn ridge_optimum_is_interior_on_power_law() {
    let p = make_power_law_problem(2.0, 1.0, 2000, 1.0, 0.1).unwrap();
    let center = 200f64.powf(-0.4);
    let grid: Vec<f64> = (0..15).map(|i| center * 10f64.powf(-1.0 + i as f64 / 7.0)).collect();
    let sweep = tune_and_measure(&p, TuneTarget::Ridge, 200, &grid, 8, 5).unwrap();
    assert!(!sweep.at_edge(), "best index {}", sweep.best_index);
    let wide: Vec<f64> = (0..29).map(|i| center * 10f64.powf(-2.0 + i as f64 / 7.0)).collect();
    let wide_sweep = tune_and_measure(&p, TuneTarget::Ridge, 200, &wide, 8, 5).unwrap();
    assert!(!wide_sweep.at_edge());
    assert!((wide_sweep.best().0 / sweep.best().0 - 1.0).abs() < 1e-12);
}

#[test]
fn gd_dominates_ridge_with_bounded_ratio() {
    let c = BoundConstants::default();
    let lams: Vec<f64> = (0..8).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    let p = make_power_law_problem(2.0, 1.0, 1000, 1.0, 0.1).unwrap();
    let eta = default_gd_stepsize(&p);
    let rows = dominance_gd_vs_ridge(&p, 100, &lams, eta, 6, 3, &c).unwrap();
    assert_eq!(rows.len(), lams.len());
    for r in &rows {
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
        assert!(r.mean_ratio <= r.max_ratio * (1.0 + 1e-12));
    }
    let again = dominance_gd_vs_ridge(&p, 100, &lams, eta, 6, 3, &c).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn gd_against_sgd_on_power_law_and_zero_signal() {
    let p = make_power_law_problem(2.0, 1.0, 1000, 1.0, 0.1).unwrap();
    let cap = max_sgd_stepsize(&p);
    let rows = dominance_gd_vs_sgd(&p, 200, &[cap / 8.0, cap / 2.0, cap], 6, 9).unwrap();
    for r in &rows {
        assert!(r.eta_admissible);
        assert!(r.ratio < 3.0, "{r:?}");
    }
    let zero = make_custom_problem(p.eigenvalues().to_vec(), vec![0.0; 1000], 1.0, Design::Gaussian).unwrap();
    let rows = dominance_gd_vs_sgd(&zero, 200, &[cap / 2.0], 4, 9).unwrap();
    assert!(rows[0].gd_risk > 0.0 && rows[0].sgd_risk > 0.0 && rows[0].ratio.is_finite());
}

#[test]
fn separation_small_grid() {
    let rows = hard_instance_separation(&[16, 32], 0.0, 2, 1, &SeparationOptions::default()).unwrap();
    for r in &rows {
        assert_eq!(r.d, r.n * r.n);
        assert_eq!(r.ell_star, 1);
        assert!(r.gd_best_risk > 0.0);
    }
    let tight = SeparationOptions { memory_budget: 1000, ..Default::default() };
    assert!(matches!(hard_instance_separation(&[16], 0.25, 1, 1, &tight), Err(Error::MemoryBudget { .. })));
    assert!(hard_instance_separation(&[8], 0.25, 1, 1, &SeparationOptions::default()).is_err());
}

#[test]
fn small_rate_table_reports_theory() {
    let opts = RateOptions { d: Some(400), grid_points: 7, ..Default::default() };
    let rows = rate_table(2.0, &[1.0], &[Algorithm::Gd, Algorithm::Sgd], &[32, 64, 128], 3, 1, &opts).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].theory + 0.8).abs() < 1e-15);
    for row in &rows {
        assert_eq!(row.cells.len(), 3);
        assert!(row.fit.slope < 0.0);
        assert_eq!(row.valid, row.cells.iter().all(|c| !c.at_edge || c.at_cap));
    }
    let again = rate_table(2.0, &[1.0], &[Algorithm::Gd, Algorithm::Sgd], &[32, 64, 128], 3, 1, &opts).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn gaussian_design_second_moment() {
    let p = make_custom_problem(vec![1.0], vec![0.0], 1.0, Design::Gaussian).unwrap();
    let n = 10_000;
    let ds = sample_dataset(&p, n, 17).unwrap();
    let m: f64 = (0..n).map(|i| ds.x()[(i, 0)].powi(2)).sum::<f64>() / n as f64;
    assert!((m - 1.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(), "{m}");
}

#[test]
fn power_law_source_condition_normalized() {
    for (a, r) in [(1.5, 0.25), (2.0, 1.0), (4.0, 0.1)] {
        let p = make_power_law_problem(a, r, 5000, 1.0, 0.1).unwrap();
        let s: f64 = p.eigenvalues().iter().zip(&p.wstar).map(|(l, w)| l.powf(1.0 - 2.0 * r) * w * w).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
}
