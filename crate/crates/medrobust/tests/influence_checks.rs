//! The influence rows must be the functional derivatives of the plug-in
//! estimators: perturbing the empirical law toward a single observation and
//! differentiating the enumeration functional numerically has to reproduce
//! the influence value at that observation. This pins the analytic influence
//! expressions to an oracle that knows nothing about them.

mod common;

use common::{
    random_discrete_instance, saturated_specs, weighted_enumeration_delta,
    weighted_enumeration_theta,
};
use medrobust::estimators::EstimatorOptions;
use medrobust::inference::eif_basis;
use medrobust::nuisance::fit_nuisances;
use medrobust::regression::FitOptions;
use medrobust::rng::replicate_rng;

fn tight_fit() -> FitOptions {
    FitOptions {
        tolerance: 1e-12,
        ..FitOptions::default()
    }
}

/// Central difference of a weighted functional along the direction that
/// tilts the empirical law toward row `i`.
fn gateaux<F>(n: usize, i: usize, eps: f64, functional: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let tilt = |sign: f64| {
        let e = sign * eps;
        let mut w = vec![1.0 - e; n];
        w[i] += n as f64 * e;
        functional(&w)
    };
    (tilt(1.0) - tilt(-1.0)) / (2.0 * eps)
}

#[test]
fn influence_rows_are_gateaux_derivatives_of_the_plugins() {
    let mut rng = replicate_rng(0xD1FF, 0);
    let eps = 1e-4;
    for _ in 0..4 {
        let data = random_discrete_instance(&mut rng, 36);
        let fit = fit_nuisances(&data, &saturated_specs(), &tight_fit()).unwrap();
        let basis = eif_basis(&data, &fit, &EstimatorOptions::default()).unwrap();
        let n = data.n();
        for i in 0..n {
            let dt = gateaux(n, i, eps, |w| weighted_enumeration_theta(&data, w));
            assert!(
                (dt - basis.rows[(i, 0)]).abs() < 1e-5,
                "theta row {i}: derivative {dt} vs influence {}",
                basis.rows[(i, 0)]
            );
            let d0 = gateaux(n, i, eps, |w| weighted_enumeration_delta(&data, 0, w));
            assert!(
                (d0 - basis.rows[(i, 1)]).abs() < 1e-5,
                "delta0 row {i}: derivative {d0} vs influence {}",
                basis.rows[(i, 1)]
            );
            let d1 = gateaux(n, i, eps, |w| weighted_enumeration_delta(&data, 1, w));
            assert!(
                (d1 - basis.rows[(i, 2)]).abs() < 1e-5,
                "delta1 row {i}: derivative {d1} vs influence {}",
                basis.rows[(i, 2)]
            );
        }
    }
}

#[test]
fn influence_rows_shrink_with_the_tilt_step() {
    // Convergence of the difference quotient: the gap to the influence value
    // must drop by roughly the square of the step ratio.
    let mut rng = replicate_rng(0xD1FF, 1);
    let data = random_discrete_instance(&mut rng, 30);
    let fit = fit_nuisances(&data, &saturated_specs(), &tight_fit()).unwrap();
    let basis = eif_basis(&data, &fit, &EstimatorOptions::default()).unwrap();
    let i = data.n() / 2;
    let gaps: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&eps| {
            let d = gateaux(data.n(), i, eps, |w| weighted_enumeration_theta(&data, w));
            (d - basis.rows[(i, 0)]).abs()
        })
        .collect();
    assert!(
        gaps[1] < gaps[0] * 0.05 + 1e-12,
        "no quadratic shrinkage: {gaps:?}"
    );
}
