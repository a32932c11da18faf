//! Stabilized, bounded variants of the triply robust estimator.
//!
//! Inverse-probability terms explode under practical positivity violations.
//! The remedy implemented here reparameterizes the working models so the
//! estimator is an average of fitted regression values, never a raw inverse
//! weight:
//!
//! 1. shift the fitted propensity on the log-odds scale by
//!    `C1 = -log(1 - P_n(E)) + log(P_n{E f(0|X)/f(1|X)})`, which makes the
//!    shifted odds-weighted exposure mean match the unexposed share exactly:
//!    `P_n{E f'(0|X)/f'(1|X)} = 1 - P_n(E)`;
//! 2. refit the mediator model on the unexposed rows with weights `1/f(0|X)`;
//! 3. refit the outcome model on the exposed rows as a weighted linear
//!    regression of `Y` on `(1, X', M)` with density-ratio weights
//!    `f'(M|0,X) / {f(1|X) f'(M|1,X)}`.
//!
//! The estimate is then `P_n eta'(1,0,X)`: because both weighted refits solve
//! estimating equations containing an intercept, the two augmentation terms
//! of the triply robust representation average to zero identically, so
//! nothing unbounded is ever summed. Variant 1 uses the unshifted propensity
//! in the refit weights; variant 2 uses the shifted one everywhere.

use ndarray::{Array1, Array2};

use crate::data::MediationDataset;
use crate::design::{DesignSpec, Term};
use crate::error::{Error, Result};
use crate::estimators::{Diagnostics, DivGuard, Estimate, EstimatorOptions};
use crate::nuisance::{GlmComponent, MediatorComponent, NuisanceFit};
use crate::regression::{self, FitOptions, Link};

/// Which propensity enters the refit weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DagVariant {
    /// Weighted refits with the unshifted propensity.
    Dag1,
    /// Weighted refits with the shifted propensity.
    Dag2,
}

impl DagVariant {
    pub fn label(self) -> &'static str {
        match self {
            DagVariant::Dag1 => "dag1",
            DagVariant::Dag2 => "dag2",
        }
    }
}

/// Log-odds shift `C1` that calibrates the fitted propensity to the sample
/// exposure share.
///
/// Requires both arms non-empty and a positive, finite odds-weighted mean.
pub fn shift_constant(data: &MediationDataset, fit: &NuisanceFit) -> Result<f64> {
    data.require_both_arms()?;
    let n = data.n() as f64;
    let pbar = data.n_exposed() as f64 / n;
    let mut odds_sum = 0.0;
    for i in 0..data.n() {
        if data.exposure()[i] == 1 {
            let p1 = fit.propensity(1, data.x_row(i));
            odds_sum += (1.0 - p1) / p1;
        }
    }
    let odds_mean = odds_sum / n;
    if !odds_mean.is_finite() || odds_mean <= 0.0 {
        return Err(Error::Domain(format!(
            "odds-weighted exposure mean {odds_mean} is not positive and finite"
        )));
    }
    Ok(-(1.0 - pbar).ln() + odds_mean.ln())
}

/// Propensity `f'(1|x)` shifted by `c1` on the log-odds scale.
pub fn shifted_propensity1(fit: &NuisanceFit, c1: f64, x: ndarray::ArrayView1<'_, f64>) -> f64 {
    let p1 = fit.propensity(1, x);
    if c1 == 0.0 {
        return p1;
    }
    Link::Logit.mean((p1 / (1.0 - p1)).ln() + c1)
}

/// The reparameterized fits behind the stabilized estimator.
#[derive(Debug, Clone)]
pub struct StabilizedFit {
    pub variant: DagVariant,
    /// Log-odds shift applied to the propensity (0 for variant 1 weights).
    pub shift: f64,
    /// `C1` as computed from the base fit (recorded for both variants).
    pub c1: f64,
    base: NuisanceFit,
    mediator_dag: MediatorComponent,
    outcome_terms: Vec<Term>,
    outcome_coef: Array1<f64>,
    /// Weight-guard counters accumulated while building the refit weights.
    pub diagnostics: Diagnostics,
}

/// Build the stabilized fit from a base fit: compute the shift, refit the
/// mediator on unexposed rows with inverse-probability weights, refit the
/// outcome on exposed rows with density-ratio weights.
///
/// The outcome spec must restrict, in the exposed arm, to a linear model
/// with an intercept and a single additive mediator slope: identity link,
/// an intercept term, mediator dependence through `M` or `Em` only (no
/// mediator-covariate products), with exposure terms absorbed (`E` into the
/// intercept, `Xe(j)` into `X(j)`). Anything else is refused.
pub fn fit_dag(
    data: &MediationDataset,
    fit: &NuisanceFit,
    variant: DagVariant,
    fit_options: &FitOptions,
    options: &EstimatorOptions,
) -> Result<StabilizedFit> {
    data.require_both_arms()?;
    let outcome_terms = dag_outcome_terms(&fit.outcome.spec)?;
    let c1 = shift_constant(data, fit)?;
    let shift = match variant {
        DagVariant::Dag1 => 0.0,
        DagVariant::Dag2 => c1,
    };
    let mut guard = DivGuard::new(options.weight_floor);

    // Mediator refit: unexposed rows, weights 1/f(0|X). Exposure-dependent
    // columns vanish on those rows, so the reduced design drops them and the
    // assembled coefficients inherit their values from the base fit.
    let med_spec = fit.mediator.spec().clone();
    let kept: Vec<usize> = (0..med_spec.terms.len())
        .filter(|&j| !med_spec.terms[j].uses_exposure())
        .collect();
    if !kept
        .iter()
        .any(|&j| med_spec.terms[j] == Term::Intercept)
    {
        return Err(Error::Config(
            "stabilized refit requires an intercept in the mediator spec".into(),
        ));
    }
    let n = data.n();
    let mut med_weights = vec![0.0; n];
    for i in 0..n {
        if data.exposure()[i] == 0 {
            let p0 = 1.0 - shifted_propensity1(fit, shift, data.x_row(i));
            med_weights[i] = guard.div(1.0, p0);
        }
    }
    let mut med_design = Array2::zeros((n, kept.len()));
    for i in 0..n {
        let x = data.x_row(i);
        for (col, &j) in kept.iter().enumerate() {
            med_design[(i, col)] = med_spec.terms[j].value(x, 0.0, 0.0);
        }
    }
    let mediator_dag = match &fit.mediator {
        MediatorComponent::Binary(c) => {
            let response: Vec<f64> = data.mediator().iter().map(|&m| m as f64).collect();
            let refit = regression::fit(
                &med_design,
                &response,
                med_spec.link,
                Some(&med_weights),
                fit_options,
            )?;
            let mut coef = c.coef.clone();
            for (col, &j) in kept.iter().enumerate() {
                coef[j] = refit.coef[col];
            }
            MediatorComponent::Binary(GlmComponent {
                spec: med_spec.clone(),
                coef,
                iterations: refit.iterations,
                max_abs_score: refit.max_abs_score,
            })
        }
        MediatorComponent::Multinomial { coef, .. } => {
            let refit = regression::fit_multinomial(
                &med_design,
                data.mediator(),
                data.support_size(),
                Some(&med_weights),
                fit_options,
            )?;
            let mut full = coef.clone();
            for a in 0..full.nrows() {
                for (col, &j) in kept.iter().enumerate() {
                    full[(a, j)] = refit.coef[(a, col)];
                }
            }
            MediatorComponent::Multinomial {
                spec: med_spec.clone(),
                coef: full,
                iterations: refit.iterations,
                max_abs_score: refit.max_abs_score,
            }
        }
    };

    // Outcome refit: exposed rows, identity link, design (1, X', M),
    // weights f'(M|0,X) / {f(1|X) f'(M|1,X)}.
    let mut out_weights = vec![0.0; n];
    for i in 0..n {
        if data.exposure()[i] == 1 {
            let x = data.x_row(i);
            let m = data.mediator()[i];
            let p1 = shifted_propensity1(fit, shift, x);
            let med0 = mediator_dag.density(m, 0.0, x);
            let med1 = mediator_dag.density(m, 1.0, x);
            out_weights[i] = guard.div(med0, p1 * med1);
        }
    }
    let mut out_design = Array2::zeros((n, outcome_terms.len()));
    for i in 0..n {
        let x = data.x_row(i);
        let m = data.mediator()[i] as f64;
        for (col, t) in outcome_terms.iter().enumerate() {
            out_design[(i, col)] = t.value(x, 1.0, m);
        }
    }
    let refit = regression::fit(
        &out_design,
        data.y(),
        Link::Identity,
        Some(&out_weights),
        fit_options,
    )?;

    Ok(StabilizedFit {
        variant,
        shift,
        c1,
        base: fit.clone(),
        mediator_dag,
        outcome_terms,
        outcome_coef: refit.coef,
        diagnostics: guard.diagnostics,
    })
}

/// Exposed-arm outcome design `(1, X', M)` derived from the outcome spec.
fn dag_outcome_terms(spec: &DesignSpec) -> Result<Vec<Term>> {
    if spec.link != Link::Identity {
        return Err(Error::Config(
            "the stabilized estimator requires an identity-link outcome spec".into(),
        ));
    }
    if !spec.has_intercept() {
        return Err(Error::Config(
            "the stabilized estimator requires an intercept in the outcome spec".into(),
        ));
    }
    let mut mediator_linear = false;
    let mut covs: Vec<Term> = Vec::new();
    for &t in &spec.terms {
        match t {
            Term::Intercept | Term::E => {}
            Term::M | Term::Em => mediator_linear = true,
            Term::Xm(_) | Term::Xem(_) => {
                return Err(Error::Config(format!(
                    "outcome term {t:?} makes the mediator slope covariate-dependent; \
                     the stabilized estimator requires a single additive mediator term"
                )));
            }
            Term::Xe(j) => {
                if !covs.contains(&Term::X(j)) {
                    covs.push(Term::X(j));
                }
            }
            other => {
                if !covs.contains(&other) {
                    covs.push(other);
                }
            }
        }
    }
    if !mediator_linear {
        return Err(Error::Config(
            "the stabilized estimator requires the outcome spec to depend on the mediator".into(),
        ));
    }
    let mut terms = vec![Term::Intercept];
    terms.extend(covs);
    terms.push(Term::M);
    Ok(terms)
}

impl StabilizedFit {
    /// Propensity used in this variant's weights.
    pub fn propensity1(&self, x: ndarray::ArrayView1<'_, f64>) -> f64 {
        shifted_propensity1(&self.base, self.shift, x)
    }

    /// Refit mediator density `f'(m | e, x)`.
    pub fn mediator_density(&self, m: usize, e: u8, x: ndarray::ArrayView1<'_, f64>) -> f64 {
        self.mediator_dag.density(m, f64::from(e), x)
    }

    /// Refit outcome mean `b'(x, m)` (exposed-arm linear model).
    pub fn outcome_mean(&self, x: ndarray::ArrayView1<'_, f64>, m: usize) -> f64 {
        self.outcome_terms
            .iter()
            .zip(self.outcome_coef.iter())
            .map(|(t, b)| t.value(x, 1.0, m as f64) * b)
            .sum()
    }

    /// `eta'(1, 0, x) = sum_m b'(x, m) f'(m | 0, x)`.
    pub fn eta_dag(&self, x: ndarray::ArrayView1<'_, f64>) -> f64 {
        (0..self.base.support_size)
            .map(|m| self.outcome_mean(x, m) * self.mediator_density(m, 0, x))
            .sum()
    }
}

/// Stabilized estimate `P_n eta'(1, 0, X)`: an average of fitted values,
/// bounded by construction.
pub fn theta_dag(data: &MediationDataset, sfit: &StabilizedFit) -> Estimate {
    let value = (0..data.n())
        .map(|i| sfit.eta_dag(data.x_row(i)))
        .sum::<f64>()
        / data.n() as f64;
    Estimate {
        value,
        diagnostics: sfit.diagnostics,
    }
}

/// The triply robust representation evaluated at the stabilized fits.
#[derive(Debug, Clone)]
pub struct DagRepresentation {
    /// `P_n eta'(1,0,X)`.
    pub theta_direct: f64,
    /// The full augmented representation at the same fits.
    pub theta_augmented: f64,
    /// Mean of the exposed-arm augmentation term (zero by construction).
    pub t1_mean: f64,
    /// Mean of the unexposed-arm augmentation term (zero by construction).
    pub t2_mean: f64,
    pub diagnostics: Diagnostics,
}

/// Evaluate both representations of the stabilized estimator; the weighted
/// refits force both augmentation means to vanish, so the two agree up to
/// solver tolerance.
pub fn dag_representation(
    data: &MediationDataset,
    sfit: &StabilizedFit,
    options: &EstimatorOptions,
) -> DagRepresentation {
    let n = data.n() as f64;
    let mut guard = DivGuard::new(options.weight_floor);
    let mut t1_sum = 0.0;
    let mut t2_sum = 0.0;
    let mut eta_sum = 0.0;
    for i in 0..data.n() {
        let x = data.x_row(i);
        let m = data.mediator()[i];
        let eta = sfit.eta_dag(x);
        eta_sum += eta;
        if data.exposure()[i] == 1 {
            let p1 = sfit.propensity1(x);
            let w = guard.div(
                sfit.mediator_density(m, 0, x),
                p1 * sfit.mediator_density(m, 1, x),
            );
            t1_sum += w * (data.y()[i] - sfit.outcome_mean(x, m));
        } else {
            let p0 = 1.0 - sfit.propensity1(x);
            let w = guard.div(1.0, p0);
            t2_sum += w * (sfit.outcome_mean(x, m) - eta);
        }
    }
    DagRepresentation {
        theta_direct: eta_sum / n,
        theta_augmented: (t1_sum + t2_sum + eta_sum) / n,
        t1_mean: t1_sum / n,
        t2_mean: t2_sum / n,
        diagnostics: guard.diagnostics,
    }
}

/// `theta0` by any estimator choice, running the weighted refits when a
/// stabilized variant is asked for.
pub fn theta_estimate(
    data: &MediationDataset,
    fit: &NuisanceFit,
    choice: crate::estimators::EstimatorChoice,
    fit_options: &FitOptions,
    options: &EstimatorOptions,
) -> Result<Estimate> {
    use crate::estimators::EstimatorChoice;
    match choice {
        EstimatorChoice::Dag1 => {
            let sfit = fit_dag(data, fit, DagVariant::Dag1, fit_options, options)?;
            Ok(theta_dag(data, &sfit))
        }
        EstimatorChoice::Dag2 => {
            let sfit = fit_dag(data, fit, DagVariant::Dag2, fit_options, options)?;
            Ok(theta_dag(data, &sfit))
        }
        other => crate::estimators::theta(
            data,
            fit,
            other.theta_kind().expect("plain representation"),
            options,
        ),
    }
}

/// Effect contrast with the `theta0` component from any estimator choice;
/// `delta` components always use the doubly robust representation.
pub fn effect_with(
    data: &MediationDataset,
    fit: &NuisanceFit,
    choice: crate::estimators::EstimatorChoice,
    effect: crate::estimators::EffectKind,
    scale: crate::estimators::EffectScale,
    fit_options: &FitOptions,
    options: &EstimatorOptions,
) -> Result<crate::estimators::EffectEstimate> {
    use crate::estimators::{delta_doubly, scale_contrast, EffectEstimate, EffectKind};
    data.require_both_arms()?;
    let mut diagnostics = Diagnostics::new();
    let mut theta0 = None;
    let mut delta0 = None;
    let mut delta1 = None;
    if matches!(effect, EffectKind::Nde | EffectKind::Nie) {
        let est = theta_estimate(data, fit, choice, fit_options, options)?;
        diagnostics = diagnostics.merge(est.diagnostics);
        theta0 = Some(est.value);
    }
    if matches!(effect, EffectKind::Nde | EffectKind::Total) {
        let est = delta_doubly(data, fit, 0, options)?;
        diagnostics = diagnostics.merge(est.diagnostics);
        delta0 = Some(est.value);
    }
    if matches!(effect, EffectKind::Nie | EffectKind::Total) {
        let est = delta_doubly(data, fit, 1, options)?;
        diagnostics = diagnostics.merge(est.diagnostics);
        delta1 = Some(est.value);
    }
    let (num, den) = match effect {
        EffectKind::Nde => (theta0.unwrap(), delta0.unwrap()),
        EffectKind::Nie => (delta1.unwrap(), theta0.unwrap()),
        EffectKind::Total => (delta1.unwrap(), delta0.unwrap()),
    };
    let value = scale_contrast(effect, scale, num, den)?;
    Ok(EffectEstimate {
        value,
        theta0,
        delta0,
        delta1,
        diagnostics,
    })
}

/// Bounded inverse-probability mean `P_n{E R / f'(1|X)}` under the shifted
/// propensity, computed through the stabilizing decomposition
///
/// ```text
/// P_n{E R} + (1 - P_n E) * sum_i E_i w_i R_i / sum_i E_i w_i,
/// w_i = f'(0|X_i)/f'(1|X_i),
/// ```
///
/// whose second factor is a convex combination of exposed `R` values; the
/// result is therefore bounded by `2 max |R|` no matter how degenerate the
/// fitted propensities are.
pub fn bounded_ipw_mean(
    data: &MediationDataset,
    fit: &NuisanceFit,
    r: &[f64],
    options: &EstimatorOptions,
) -> Result<Estimate> {
    if r.len() != data.n() {
        return Err(Error::InvalidInput(format!(
            "r has {} values for {} rows",
            r.len(),
            data.n()
        )));
    }
    let c1 = shift_constant(data, fit)?;
    let n = data.n() as f64;
    let pbar = data.n_exposed() as f64 / n;
    let mut guard = DivGuard::new(options.weight_floor);
    let mut plain_sum = 0.0;
    let mut w_sum = 0.0;
    let mut wr_sum = 0.0;
    for i in 0..data.n() {
        if data.exposure()[i] == 1 {
            plain_sum += r[i];
            let p1 = shifted_propensity1(fit, c1, data.x_row(i));
            let w = guard.div(1.0 - p1, p1);
            w_sum += w;
            wr_sum += w * r[i];
        }
    }
    if w_sum <= 0.0 {
        return Err(Error::Domain(
            "no exposed row carries positive odds weight".into(),
        ));
    }
    let value = plain_sum / n + (1.0 - pbar) * (wr_sum / w_sum);
    let bound = 2.0 * r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    debug_assert!(
        value.abs() <= bound + 1e-12,
        "bounded mean {value} exceeded {bound}"
    );
    Ok(Estimate {
        value,
        diagnostics: guard.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::OutcomeKind;
    use crate::design::ModelTarget;
    use crate::nuisance::{fit_nuisances, NuisanceSpecs};
    use crate::rng::replicate_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;

    fn specs() -> NuisanceSpecs {
        NuisanceSpecs {
            outcome: DesignSpec::new(
                ModelTarget::Outcome,
                Link::Identity,
                vec![Term::Intercept, Term::X(0), Term::E, Term::M, Term::Em],
            )
            .unwrap(),
            mediator: DesignSpec::new(
                ModelTarget::Mediator,
                Link::Logit,
                vec![Term::Intercept, Term::X(0), Term::E],
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

    /// Continuous-covariate instance with both arms and both mediator values.
    fn random_instance(seed: u64, n: usize) -> MediationDataset {
        let mut rng = replicate_rng(seed, 0);
        loop {
            let mut y = Vec::with_capacity(n);
            let mut e = Vec::with_capacity(n);
            let mut m = Vec::with_capacity(n);
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = rng.random_range(-1.5..1.5);
                let pe = Link::Logit.mean(0.3 + 0.8 * x);
                let ei = u8::from(rng.random::<f64>() < pe);
                let pm = Link::Logit.mean(-0.2 + 0.6 * x + 0.9 * f64::from(ei));
                let mi = usize::from(rng.random::<f64>() < pm);
                let noise: f64 = rng.random_range(-1.0..1.0);
                y.push(1.0 + 0.5 * x - 1.2 * f64::from(ei) + 2.0 * mi as f64
                    + 0.7 * f64::from(ei) * mi as f64
                    + noise);
                e.push(ei);
                m.push(mi);
                xs.push(x);
            }
            let x = Array2::from_shape_vec((n, 1), xs).unwrap();
            let data =
                MediationDataset::new(y, e, m, x, OutcomeKind::Continuous, 2).unwrap();
            let exposed = data.n_exposed();
            if exposed > 5 && data.n() - exposed > 5 {
                return data;
            }
        }
    }

    #[test]
    fn intercept_only_propensity_needs_no_shift() {
        let data = random_instance(11, 80);
        let mut sp = specs();
        sp.propensity =
            DesignSpec::new(ModelTarget::Propensity, Link::Logit, vec![Term::Intercept]).unwrap();
        let fit = fit_nuisances(&data, &sp, &FitOptions::default()).unwrap();
        let c1 = shift_constant(&data, &fit).unwrap();
        assert_abs_diff_eq!(c1, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn shifted_odds_mean_matches_unexposed_share_exactly() {
        for seed in [3, 17, 29] {
            let data = random_instance(seed, 120);
            let fit = fit_nuisances(&data, &specs(), &FitOptions::default()).unwrap();
            let c1 = shift_constant(&data, &fit).unwrap();
            let n = data.n() as f64;
            let mut mean = 0.0;
            for i in 0..data.n() {
                if data.exposure()[i] == 1 {
                    let p1 = shifted_propensity1(&fit, c1, data.x_row(i));
                    mean += (1.0 - p1) / p1;
                }
            }
            mean /= n;
            let target = 1.0 - data.n_exposed() as f64 / n;
            assert_abs_diff_eq!(mean, target, epsilon = 1e-10);
        }
    }

    #[test]
    fn augmentation_terms_vanish_at_the_stabilized_fits() {
        for seed in [5, 19, 41] {
            let data = random_instance(seed, 150);
            let fit = fit_nuisances(&data, &specs(), &FitOptions::default()).unwrap();
            for variant in [DagVariant::Dag1, DagVariant::Dag2] {
                let sfit = fit_dag(
                    &data,
                    &fit,
                    variant,
                    &FitOptions::default(),
                    &EstimatorOptions::default(),
                )
                .unwrap();
                let rep = dag_representation(&data, &sfit, &EstimatorOptions::default());
                assert!(rep.t1_mean.abs() < 1e-8, "{variant:?} t1 {}", rep.t1_mean);
                assert!(rep.t2_mean.abs() < 1e-8, "{variant:?} t2 {}", rep.t2_mean);
                assert_abs_diff_eq!(rep.theta_direct, rep.theta_augmented, epsilon = 1e-8);
                let direct = theta_dag(&data, &sfit);
                assert_abs_diff_eq!(direct.value, rep.theta_direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_outcome_is_recovered_exactly() {
        let base = random_instance(7, 100);
        let data = MediationDataset::new(
            vec![4.25; base.n()],
            base.exposure().to_vec(),
            base.mediator().to_vec(),
            base.covariates().clone(),
            OutcomeKind::Continuous,
            2,
        )
        .unwrap();
        let fit = fit_nuisances(&data, &specs(), &FitOptions::default()).unwrap();
        let sfit = fit_dag(
            &data,
            &fit,
            DagVariant::Dag2,
            &FitOptions::default(),
            &EstimatorOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(theta_dag(&data, &sfit).value, 4.25, epsilon = 1e-8);
    }

    #[test]
    fn incompatible_outcome_specs_are_refused() {
        let data = random_instance(13, 80);
        let bad_specs = [
            NuisanceSpecs {
                outcome: DesignSpec::new(
                    ModelTarget::Outcome,
                    Link::Identity,
                    vec![Term::Intercept, Term::X(0), Term::E, Term::M, Term::Xm(0)],
                )
                .unwrap(),
                ..specs()
            },
            NuisanceSpecs {
                outcome: DesignSpec::new(
                    ModelTarget::Outcome,
                    Link::Identity,
                    vec![Term::Intercept, Term::X(0), Term::E],
                )
                .unwrap(),
                ..specs()
            },
        ];
        for sp in bad_specs {
            let fit = fit_nuisances(&data, &sp, &FitOptions::default()).unwrap();
            let err = fit_dag(
                &data,
                &fit,
                DagVariant::Dag2,
                &FitOptions::default(),
                &EstimatorOptions::default(),
            )
            .unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err:?}");
        }
    }

    #[test]
    fn exposure_terms_absorb_into_the_exposed_arm_design() {
        let spec = DesignSpec::new(
            ModelTarget::Outcome,
            Link::Identity,
            vec![
                Term::Intercept,
                Term::X(0),
                Term::Xe(0),
                Term::E,
                Term::Em,
            ],
        )
        .unwrap();
        let terms = dag_outcome_terms(&spec).unwrap();
        assert_eq!(terms, vec![Term::Intercept, Term::X(0), Term::M]);
    }

    #[test]
    fn bounded_mean_agrees_with_direct_evaluation_and_stays_bounded() {
        for seed in [23, 31] {
            let data = random_instance(seed, 120);
            let fit = fit_nuisances(&data, &specs(), &FitOptions::default()).unwrap();
            let c1 = shift_constant(&data, &fit).unwrap();
            let r: Vec<f64> = (0..data.n()).map(|i| (i as f64 * 0.37).sin()).collect();
            let est =
                bounded_ipw_mean(&data, &fit, &r, &EstimatorOptions::default()).unwrap();
            // Direct evaluation of P_n{E R / f'(1|X)}.
            let mut direct = 0.0;
            for i in 0..data.n() {
                if data.exposure()[i] == 1 {
                    direct += r[i] / shifted_propensity1(&fit, c1, data.x_row(i));
                }
            }
            direct /= data.n() as f64;
            assert_abs_diff_eq!(est.value, direct, epsilon = 1e-12);
            let rmax = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(est.value.abs() <= 2.0 * rmax);

            // With R = 1 the decomposition gives P_n(E) + (1 - P_n(E)) = 1.
            let ones = vec![1.0; data.n()];
            let unit =
                bounded_ipw_mean(&data, &fit, &ones, &EstimatorOptions::default()).unwrap();
            assert_abs_diff_eq!(unit.value, 1.0, epsilon = 1e-12);
        }
    }
}
