//! Shared test support: discrete instance generation and enumeration
//! oracles computed directly from empirical cell frequencies, with no model
//! fitting involved.

#![allow(dead_code)]

use medrobust::data::{MediationDataset, OutcomeKind};
use medrobust::design::{DesignSpec, ModelTarget, Term};
use medrobust::nuisance::NuisanceSpecs;
use medrobust::regression::Link;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random dataset with one binary covariate, binary mediator, binary
/// outcome, and every `(y, m, e, x)` cell occupied, so saturated fits exist
/// and every conditional frequency is interior.
pub fn random_discrete_instance(rng: &mut ChaCha8Rng, max_n: usize) -> MediationDataset {
    let mut y = Vec::new();
    let mut e = Vec::new();
    let mut m = Vec::new();
    let mut xs = Vec::new();
    // One row per cell guarantees occupancy.
    for yi in 0..2u8 {
        for ei in 0..2u8 {
            for mi in 0..2usize {
                for xi in 0..2u8 {
                    y.push(f64::from(yi));
                    e.push(ei);
                    m.push(mi);
                    xs.push(f64::from(xi));
                }
            }
        }
    }
    let extra = rng.random_range(0..=max_n.saturating_sub(y.len()));
    for _ in 0..extra {
        y.push(f64::from(rng.random_range(0..2u8)));
        e.push(rng.random_range(0..2u8));
        m.push(rng.random_range(0..2usize));
        xs.push(f64::from(rng.random_range(0..2u8)));
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, 1), xs).unwrap();
    MediationDataset::new(y, e, m, x, OutcomeKind::Binary, 2).unwrap()
}

/// Saturated specs over one binary covariate: the outcome design spans all
/// eight `(x, e, m)` cells, the mediator design all four `(x, e)` cells, the
/// propensity design both `x` cells.
pub fn saturated_specs() -> NuisanceSpecs {
    NuisanceSpecs {
        outcome: DesignSpec::new(
            ModelTarget::Outcome,
            Link::Identity,
            vec![
                Term::Intercept,
                Term::X(0),
                Term::E,
                Term::M,
                Term::Xe(0),
                Term::Xm(0),
                Term::Em,
                Term::Xem(0),
            ],
        )
        .unwrap(),
        mediator: DesignSpec::new(
            ModelTarget::Mediator,
            Link::Logit,
            vec![Term::Intercept, Term::X(0), Term::E, Term::Xe(0)],
        )
        .unwrap(),
        propensity: DesignSpec::new(
            ModelTarget::Propensity,
            Link::Logit,
            vec![Term::Intercept, Term::X(0)],
        )
        .unwrap(),
    }
}

fn cell_rows<'a>(
    data: &'a MediationDataset,
    x: f64,
    e: Option<u8>,
    m: Option<usize>,
) -> Vec<usize> {
    (0..data.n())
        .filter(move |&i| {
            data.covariates()[(i, 0)] == x
                && e.is_none_or(|ev| data.exposure()[i] == ev)
                && m.is_none_or(|mv| data.mediator()[i] == mv)
        })
        .collect()
}

/// Empirical `E(Y | x, m, e)`.
pub fn empirical_outcome_mean(data: &MediationDataset, x: f64, m: usize, e: u8) -> f64 {
    let rows = cell_rows(data, x, Some(e), Some(m));
    rows.iter().map(|&i| data.y()[i]).sum::<f64>() / rows.len() as f64
}

/// Empirical `f(m | e, x)`.
pub fn empirical_mediator_density(data: &MediationDataset, m: usize, e: u8, x: f64) -> f64 {
    let arm = cell_rows(data, x, Some(e), None);
    let hit = arm.iter().filter(|&&i| data.mediator()[i] == m).count();
    hit as f64 / arm.len() as f64
}

/// Plug-in functional `theta0(F-hat)` over empirical frequencies:
/// `(1/n) sum_i sum_m ybar(1, m, x_i) fhat(m | 0, x_i)`.
pub fn enumeration_theta(data: &MediationDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n() {
        let x = data.covariates()[(i, 0)];
        for m in 0..data.support_size() {
            total += empirical_outcome_mean(data, x, m, 1)
                * empirical_mediator_density(data, m, 0, x);
        }
    }
    total / data.n() as f64
}

/// Plug-in functional `delta_e(F-hat)`: `(1/n) sum_i ybar(e, x_i)`.
pub fn enumeration_delta(data: &MediationDataset, e: u8) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n() {
        let x = data.covariates()[(i, 0)];
        let arm = cell_rows(data, x, Some(e), None);
        total += arm.iter().map(|&i| data.y()[i]).sum::<f64>() / arm.len() as f64;
    }
    total / data.n() as f64
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (w, v) in values {
        num += w * v;
        den += w;
    }
    num / den
}

/// `theta0` plug-in over a weighted empirical law (weights need not be
/// normalized): weighted cell means and mediator frequencies, weighted
/// average over the covariate margin.
pub fn weighted_enumeration_theta(data: &MediationDataset, w: &[f64]) -> f64 {
    let ybar = |x: f64, m: usize| {
        weighted_mean(
            (0..data.n())
                .filter(|&i| {
                    data.covariates()[(i, 0)] == x
                        && data.exposure()[i] == 1
                        && data.mediator()[i] == m
                })
                .map(|i| (w[i], data.y()[i])),
        )
    };
    let fm = |m: usize, x: f64| {
        weighted_mean(
            (0..data.n())
                .filter(|&i| data.covariates()[(i, 0)] == x && data.exposure()[i] == 0)
                .map(|i| (w[i], f64::from(data.mediator()[i] == m))),
        )
    };
    weighted_mean((0..data.n()).map(|i| {
        let x = data.covariates()[(i, 0)];
        let inner = (0..data.support_size())
            .map(|m| ybar(x, m) * fm(m, x))
            .sum::<f64>();
        (w[i], inner)
    }))
}

/// `delta_e` plug-in over a weighted empirical law.
pub fn weighted_enumeration_delta(data: &MediationDataset, e: u8, w: &[f64]) -> f64 {
    let ybar = |x: f64| {
        weighted_mean(
            (0..data.n())
                .filter(|&i| data.covariates()[(i, 0)] == x && data.exposure()[i] == e)
                .map(|i| (w[i], data.y()[i])),
        )
    };
    weighted_mean(
        (0..data.n()).map(|i| (w[i], ybar(data.covariates()[(i, 0)]))),
    )
}
