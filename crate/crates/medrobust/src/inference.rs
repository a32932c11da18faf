//! Large-sample inference: influence-function sandwich variances and a
//! deterministic nonparametric bootstrap.
//!
//! The sandwich path applies to the triply robust estimator only. Each
//! target functional has an influence-function representation whose rows are
//! computed at the fitted working models; a correction term accounts for the
//! variability of the fitted coefficients by treating the whole procedure as
//! one stacked M-estimator:
//!
//! ```text
//! U_i = S_i - D J^{-1} s_i
//! ```
//!
//! where `S_i` is the influence row at fixed coefficients, `s_i` the stacked
//! working-model score, `J` the mean score Jacobian and
//! `D = d P_n{S(beta)} / d beta'` measured by central differences. The
//! variance estimate is `P_n{U^2}/n`. Remarkably, the correction is exactly
//! zero when every working model is correct, so the uncorrected rows are
//! kept available for diagnostics.
//!
//! The bootstrap resamples rows with replacement. Resampling happens in the
//! dataset's canonical row order with one dedicated RNG stream per
//! replicate, so results are invariant to the order rows arrived in and to
//! the number of threads.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::estimators::{
    delta_terms, scale_contrast, triply_terms, Diagnostics, DivGuard, EffectKind, EffectScale,
    EstimatorOptions,
};
use crate::linalg;
use crate::nuisance::NuisanceFit;
use crate::rng::replicate_rng;
use rand::Rng;

/// Influence rows for the three component functionals.
#[derive(Debug, Clone)]
pub struct InfluenceBasis {
    pub theta0: f64,
    pub delta0: f64,
    pub delta1: f64,
    /// `n x 3` influence rows, columns ordered `(theta0, delta0, delta1)`.
    /// Each column is empirically mean-zero at the point estimates.
    pub rows: Array2<f64>,
    pub diagnostics: Diagnostics,
}

/// Influence rows at fixed working-model coefficients (no correction for
/// having estimated them).
pub fn eif_basis(
    data: &MediationDataset,
    fit: &NuisanceFit,
    options: &EstimatorOptions,
) -> Result<InfluenceBasis> {
    data.require_both_arms()?;
    let nuisance_rows = fit.row_nuisances(data);
    let mut guard = DivGuard::new(options.weight_floor);
    let t = triply_terms(data, &nuisance_rows, &mut guard);
    let d0 = delta_terms(data, &nuisance_rows, 0, &mut guard);
    let d1 = delta_terms(data, &nuisance_rows, 1, &mut guard);
    let n = data.n();
    let nf = n as f64;
    let theta0 = t.iter().sum::<f64>() / nf;
    let delta0 = d0.iter().sum::<f64>() / nf;
    let delta1 = d1.iter().sum::<f64>() / nf;
    let mut rows = Array2::zeros((n, 3));
    for i in 0..n {
        rows[(i, 0)] = t[i] - theta0;
        rows[(i, 1)] = d0[i] - delta0;
        rows[(i, 2)] = d1[i] - delta1;
    }
    Ok(InfluenceBasis {
        theta0,
        delta0,
        delta1,
        rows,
        diagnostics: guard.diagnostics,
    })
}

/// Sandwich variance controls.
#[derive(Debug, Clone)]
pub struct SandwichOptions {
    /// Relative step for the central-difference derivative of the mean
    /// influence with respect to each coefficient.
    pub step: f64,
    /// Include the coefficient-estimation correction. Disabling it reduces
    /// the variance to the plain `P_n{S^2}/n` plug-in, which is useful for
    /// measuring how much the correction matters.
    pub correct_for_estimation: bool,
    pub ci_level: f64,
    pub estimator: EstimatorOptions,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            correct_for_estimation: true,
            ci_level: 0.95,
            estimator: EstimatorOptions::default(),
        }
    }
}

/// Influence rows corrected for coefficient estimation.
pub fn union_basis(
    data: &MediationDataset,
    fit: &NuisanceFit,
    options: &SandwichOptions,
) -> Result<InfluenceBasis> {
    let mut basis = eif_basis(data, fit, &options.estimator)?;
    if !options.correct_for_estimation {
        return Ok(basis);
    }
    let beta = fit.stacked_beta();
    let q = beta.len();
    let nf = data.n() as f64;

    // D: derivative of the mean influence terms with respect to each
    // coefficient, by central differences with a relative step.
    let mut d = Array2::zeros((3, q));
    for k in 0..q {
        let h = options.step * (1.0 + beta[k].abs());
        let mut means = [[0.0; 3]; 2];
        for (side, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let mut b = beta.clone();
            b[k] += sign * h;
            let shifted = fit.with_stacked_beta(&b);
            let rows = shifted.row_nuisances(data);
            let mut guard = DivGuard::new(options.estimator.weight_floor);
            means[side][0] = triply_terms(data, &rows, &mut guard).iter().sum::<f64>() / nf;
            means[side][1] = delta_terms(data, &rows, 0, &mut guard).iter().sum::<f64>() / nf;
            means[side][2] = delta_terms(data, &rows, 1, &mut guard).iter().sum::<f64>() / nf;
            basis.diagnostics = basis.diagnostics.merge(guard.diagnostics);
        }
        for f in 0..3 {
            d[(f, k)] = (means[0][f] - means[1][f]) / (2.0 * h);
        }
    }

    // A = D J^{-1}, via J' a_f = d_f for each functional.
    let jac = fit.score_jacobian(data);
    let jac_t = jac.t().to_owned();
    let mut a = Array2::zeros((3, q));
    for f in 0..3 {
        let rhs = d.row(f).to_owned();
        let sol = linalg::lstsq(&jac_t, &rhs, linalg::DEFAULT_RANK_TOL).map_err(|_| {
            Error::SingularDesign(
                "stacked working-model score Jacobian is singular; \
                 sandwich variance unavailable, use bootstrap inference"
                    .into(),
            )
        })?;
        a.row_mut(f).assign(&sol);
    }

    let scores = fit.stacked_scores(data);
    for i in 0..data.n() {
        let s = scores.row(i);
        for f in 0..3 {
            let corr: f64 = a.row(f).iter().zip(s.iter()).map(|(u, v)| u * v).sum();
            basis.rows[(i, f)] -= corr;
        }
    }
    Ok(basis)
}

/// How an interval was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    Sandwich,
    Bootstrap,
}

impl InferenceMethod {
    pub fn label(self) -> &'static str {
        match self {
            InferenceMethod::Sandwich => "sandwich",
            InferenceMethod::Bootstrap => "bootstrap",
        }
    }
}

/// An effect estimate with a standard error and confidence interval.
#[derive(Debug, Clone)]
pub struct EffectInference {
    pub effect: EffectKind,
    pub scale: EffectScale,
    pub estimate: f64,
    pub theta0: Option<f64>,
    pub delta0: Option<f64>,
    pub delta1: Option<f64>,
    pub se: f64,
    pub ci_level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: InferenceMethod,
    /// Bootstrap only: successful replicates behind `se` and the interval.
    pub replicates_used: Option<usize>,
    /// Bootstrap only: replicates dropped because the statistic failed.
    pub failures: Option<usize>,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
}

/// Effect value and its gradient in `(theta0, delta0, delta1)`.
fn scale_value_gradient(
    effect: EffectKind,
    scale: EffectScale,
    theta0: f64,
    delta0: f64,
    delta1: f64,
) -> Result<(f64, [f64; 3])> {
    let (num, den) = match effect {
        EffectKind::Nde => (theta0, delta0),
        EffectKind::Nie => (delta1, theta0),
        EffectKind::Total => (delta1, delta0),
    };
    let value = scale_contrast(effect, scale, num, den)?;
    let grad = match (effect, scale) {
        (EffectKind::Nde, EffectScale::Difference) => [1.0, -1.0, 0.0],
        (EffectKind::Nie, EffectScale::Difference) => [-1.0, 0.0, 1.0],
        (EffectKind::Total, EffectScale::Difference) => [0.0, -1.0, 1.0],
        (EffectKind::Nde, EffectScale::RiskRatio) => [1.0 / delta0, -theta0 / (delta0 * delta0), 0.0],
        (EffectKind::Nie, EffectScale::RiskRatio) => {
            [-delta1 / (theta0 * theta0), 0.0, 1.0 / theta0]
        }
        (EffectKind::Nde, EffectScale::OddsRatio) => [
            (1.0 - delta0) / (delta0 * (1.0 - theta0) * (1.0 - theta0)),
            -theta0 / ((1.0 - theta0) * delta0 * delta0),
            0.0,
        ],
        (EffectKind::Nie, EffectScale::OddsRatio) => [
            -delta1 / (theta0 * theta0 * (1.0 - delta1)),
            0.0,
            (1.0 - theta0) / (theta0 * (1.0 - delta1) * (1.0 - delta1)),
        ],
        (EffectKind::Total, _) => unreachable!("non-difference totals error above"),
    };
    Ok((value, grad))
}

/// Sandwich inference for an effect, with the `theta0` component from the
/// triply robust representation (the only one whose influence rows this
/// module knows).
pub fn sandwich_effect(
    data: &MediationDataset,
    fit: &NuisanceFit,
    effect: EffectKind,
    scale: EffectScale,
    options: &SandwichOptions,
) -> Result<EffectInference> {
    check_level(options.ci_level)?;
    let basis = union_basis(data, fit, options)?;
    let (value, grad) =
        scale_value_gradient(effect, scale, basis.theta0, basis.delta0, basis.delta1)?;
    let n = data.n() as f64;
    let mut sum_sq = 0.0;
    for i in 0..data.n() {
        let u = grad[0] * basis.rows[(i, 0)]
            + grad[1] * basis.rows[(i, 1)]
            + grad[2] * basis.rows[(i, 2)];
        sum_sq += u * u;
    }
    let se = (sum_sq / n).sqrt() / n.sqrt();
    let z = standard_normal_quantile(0.5 + options.ci_level / 2.0);
    let uses = |g: f64| g != 0.0;
    Ok(EffectInference {
        effect,
        scale,
        estimate: value,
        theta0: uses(grad[0]).then_some(basis.theta0),
        delta0: uses(grad[1]).then_some(basis.delta0),
        delta1: uses(grad[2]).then_some(basis.delta1),
        se,
        ci_level: options.ci_level,
        ci_low: value - z * se,
        ci_high: value + z * se,
        method: InferenceMethod::Sandwich,
        replicates_used: None,
        failures: None,
        warnings: Vec::new(),
        diagnostics: basis.diagnostics,
    })
}

/// Bootstrap controls.
#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 500,
            seed: 0,
            level: 0.95,
        }
    }
}

/// Bootstrap distribution summary for one statistic.
#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    /// Full-sample value of the statistic.
    pub point: f64,
    /// Sample standard deviation of the successful draws.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub failures: usize,
    pub warnings: Vec<String>,
    /// The successful draws, in replicate order.
    pub draws: Vec<f64>,
}

/// Nonparametric bootstrap of a scalar statistic.
///
/// Rows are resampled with replacement in the dataset's canonical order, one
/// RNG stream per replicate, so the draws are a pure function of `(data as a
/// multiset, seed)`. Replicates on which the statistic fails are dropped and
/// counted; more than 10% failures adds a warning.
pub fn bootstrap<F>(
    data: &MediationDataset,
    statistic: F,
    options: &BootstrapOptions,
) -> Result<BootstrapSummary>
where
    F: Fn(&MediationDataset) -> Result<f64> + Sync,
{
    let multi =
        bootstrap_multi(data, |sample| statistic(sample).map(|v| vec![v]), options)?;
    Ok(multi.into_iter().next().expect("one component"))
}

/// Nonparametric bootstrap of a vector statistic; every component is drawn
/// from the same resamples, so component-wise contrasts are coherent within
/// each replicate.
pub fn bootstrap_multi<F>(
    data: &MediationDataset,
    statistic: F,
    options: &BootstrapOptions,
) -> Result<Vec<BootstrapSummary>>
where
    F: Fn(&MediationDataset) -> Result<Vec<f64>> + Sync,
{
    if options.replicates < 50 {
        return Err(Error::Config(format!(
            "{} bootstrap replicates requested; at least 50 are required",
            options.replicates
        )));
    }
    check_level(options.level)?;
    let points = statistic(data)?;
    if points.is_empty() {
        return Err(Error::InvalidInput("statistic returned no components".into()));
    }
    let order = data.canonical_order();
    let n = data.n();

    let results: Vec<Result<Vec<f64>>> = (0..options.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(options.seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| order[rng.random_range(0..n)]).collect();
            let sample = data.select_rows(&idx)?;
            let draw = statistic(&sample)?;
            if draw.len() != points.len() {
                return Err(Error::InvalidInput(format!(
                    "statistic returned {} components on a resample but {} on the data",
                    draw.len(),
                    points.len()
                )));
            }
            Ok(draw)
        })
        .collect();

    let mut draws: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
    let mut failures = 0usize;
    let mut first_error: Option<Error> = None;
    for r in results {
        match r {
            Ok(values) => {
                for (c, v) in values.into_iter().enumerate() {
                    draws[c].push(v);
                }
            }
            Err(e) => {
                if matches!(e, Error::InvalidInput(_)) {
                    return Err(e);
                }
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    let used = options.replicates - failures;
    if used < 2 {
        let detail = first_error
            .map(|e| format!(" (first failure: {e})"))
            .unwrap_or_default();
        return Err(Error::DegenerateInput(format!(
            "bootstrap failed on {failures} of {} replicates{detail}",
            options.replicates
        )));
    }
    let mut warnings = Vec::new();
    if failures * 10 > options.replicates {
        warnings.push(format!(
            "{failures} of {} bootstrap replicates failed; \
             intervals use the remaining {used}",
            options.replicates
        ));
    }

    let alpha = 1.0 - options.level;
    Ok(points
        .into_iter()
        .zip(draws)
        .map(|(point, component)| {
            let mean = component.iter().sum::<f64>() / used as f64;
            let var = component
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (used - 1) as f64;
            let mut sorted = component.clone();
            sorted.sort_by(f64::total_cmp);
            BootstrapSummary {
                point,
                se: var.sqrt(),
                ci_low: percentile(&sorted, alpha / 2.0),
                ci_high: percentile(&sorted, 1.0 - alpha / 2.0),
                level: options.level,
                replicates_requested: options.replicates,
                replicates_used: used,
                failures,
                warnings: warnings.clone(),
                draws: component,
            }
        })
        .collect())
}

/// Linear-interpolation empirical quantile of pre-sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level {level} is outside (0, 1)"
        )));
    }
    Ok(())
}

/// Standard normal quantile (Acklam's rational approximation, relative error
/// below 1.2e-9 across the domain).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -standard_normal_quantile(1.0 - p)
    }
}
