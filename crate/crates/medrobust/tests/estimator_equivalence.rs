//! On discrete data with saturated working models, every representation of
//! `theta0` is the same nonparametric plug-in functional, so all four
//! estimators must agree with direct enumeration over empirical cell
//! frequencies to solver precision.

mod common;

use common::{enumeration_delta, enumeration_theta, random_discrete_instance, saturated_specs};
use medrobust::estimators::{delta_doubly, theta, EstimatorOptions, ThetaKind};
use medrobust::nuisance::fit_nuisances;
use medrobust::regression::FitOptions;
use medrobust::rng::replicate_rng;

fn tight_options() -> FitOptions {
    FitOptions {
        tolerance: 1e-12,
        ..FitOptions::default()
    }
}

#[test]
fn all_four_representations_match_enumeration_on_saturated_fits() {
    let specs = saturated_specs();
    let opts = EstimatorOptions::default();
    for instance in 0..25 {
        let mut rng = replicate_rng(0x5eed_0001, instance);
        let data = random_discrete_instance(&mut rng, 200);
        let fit = fit_nuisances(&data, &specs, &tight_options()).unwrap();
        let oracle = enumeration_theta(&data);
        for kind in [ThetaKind::Ym, ThetaKind::Ye, ThetaKind::Em, ThetaKind::Triply] {
            let est = theta(&data, &fit, kind, &opts).unwrap();
            assert!(
                (est.value - oracle).abs() <= 1e-10,
                "instance {instance}, {kind:?}: {} vs oracle {oracle}",
                est.value
            );
        }
    }
}

#[test]
fn doubly_robust_delta_matches_enumeration_on_saturated_fits() {
    let specs = saturated_specs();
    let opts = EstimatorOptions::default();
    for instance in 0..25 {
        let mut rng = replicate_rng(0x5eed_0002, instance);
        let data = random_discrete_instance(&mut rng, 150);
        let fit = fit_nuisances(&data, &specs, &tight_options()).unwrap();
        for e in [0u8, 1u8] {
            let est = delta_doubly(&data, &fit, e, &opts).unwrap();
            let oracle = enumeration_delta(&data, e);
            assert!(
                (est.value - oracle).abs() <= 1e-10,
                "instance {instance}, delta_{e}: {} vs oracle {oracle}",
                est.value
            );
        }
    }
}
