//! Data generators, ground-truth oracles and the Monte Carlo harness.
//!
//! Two synthetic designs are implemented. The first (`S3`) is a three-
//! covariate design where each working model can be broken individually:
//! the propensity by dropping an interaction, the mediator by an incorrect
//! link, the outcome by omitting the exposure-mediator product. The second
//! (`S6`) adapts the Kang-Schafer construction: covariates are smooth
//! invertible transforms of latent normals, and fitting the working models
//! on the transformed scale makes them nearly correct yet produces inverse
//! probability weights that explode, a practical positivity violation.
//!
//! Ground truth is never hard-coded: a counterfactual oracle simulates the
//! structural equations directly and reports its own Monte Carlo error.
//! Replicates draw from counter-based RNG streams keyed by (seed, replicate
//! index), so parallel and serial runs produce bit-identical reports.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{MediationDataset, OutcomeKind};
use crate::design::{DesignSpec, ModelTarget, Term};
use crate::error::{Error, Result};
use crate::estimators::{delta_doubly, EstimatorChoice, EstimatorOptions};
use crate::nuisance::{fit_nuisances, NuisanceSpecs};
use crate::regression::{FitOptions, Link};
use crate::rng::replicate_rng;
use crate::stabilized::theta_estimate;

/// Which synthetic design to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    S3,
    S6,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::S3 => "s3",
            Scenario::S6 => "s6",
        }
    }
}

/// Which working models to break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Misspec {
    E,
    M,
    Y,
}

/// Outcome coefficient convention for the Kang-Schafer design, whose source
/// prints a duplicated `13.7 Z3` term. `AsPrinted` implements the text
/// literally; `KangSchafer` uses the canonical `27.4 Z1 + 13.7 (Z2+Z3+Z4)`.
/// The two agree on every target functional (the latent terms are mean
/// zero); they differ in how well a working outcome model can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YzMode {
    #[default]
    AsPrinted,
    KangSchafer,
}

/// One Monte Carlo run: a scenario row of a results table.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub misspecify: Vec<Misspec>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorChoice>,
    #[serde(default)]
    pub yz_coefficient_mode: YzMode,
    /// Link used for the deliberately wrong mediator model in the S3 design.
    /// "Log-log" does not fix a direction, so both are accepted; the default
    /// is the direction under which the broken fit stays numerically tame
    /// (the other one drives predicted mediator probabilities to the floor
    /// and the density-ratio weights off to the thousands).
    #[serde(default = "default_wrong_mediator_link")]
    pub wrong_mediator_link: Link,
    /// Link used for the deliberately wrong propensity model in the S3
    /// design, same ambiguity as `wrong_mediator_link`.
    #[serde(default = "default_wrong_propensity_link")]
    pub wrong_propensity_link: Link,
    #[serde(default = "default_oracle_replicates")]
    pub oracle_replicates: usize,
}

fn default_estimators() -> Vec<EstimatorChoice> {
    vec![
        EstimatorChoice::Ym,
        EstimatorChoice::Ye,
        EstimatorChoice::Em,
        EstimatorChoice::Triply,
    ]
}

fn default_wrong_mediator_link() -> Link {
    Link::CLogLog
}

fn default_wrong_propensity_link() -> Link {
    Link::LogLog
}

fn default_oracle_replicates() -> usize {
    4_000_000
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        for (i, a) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(a) {
                return Err(Error::Config(format!("duplicate estimator {}", a.label())));
            }
        }
        for (i, a) in self.misspecify.iter().enumerate() {
            if self.misspecify[..i].contains(a) {
                return Err(Error::Config("duplicate misspecification flag".into()));
            }
        }
        if !matches!(self.wrong_mediator_link, Link::LogLog | Link::CLogLog) {
            return Err(Error::Config(
                "wrong_mediator_link must be log_log or c_log_log".into(),
            ));
        }
        if !matches!(self.wrong_propensity_link, Link::LogLog | Link::CLogLog) {
            return Err(Error::Config(
                "wrong_propensity_link must be log_log or c_log_log".into(),
            ));
        }
        if self.oracle_replicates < 10_000 {
            return Err(Error::Config(
                "oracle_replicates below 10000 gives a truth too noisy to report biases against"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Several misspecification rows sharing generated data: each replicate's
/// dataset is drawn once and analyzed under every row's specs, which is how
/// a whole results table is produced coherently.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub rows: Vec<Vec<Misspec>>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorChoice>,
    #[serde(default)]
    pub yz_coefficient_mode: YzMode,
    #[serde(default = "default_wrong_mediator_link")]
    pub wrong_mediator_link: Link,
    #[serde(default = "default_wrong_propensity_link")]
    pub wrong_propensity_link: Link,
    #[serde(default = "default_oracle_replicates")]
    pub oracle_replicates: usize,
}

impl TableConfig {
    fn row_config(&self, row: &[Misspec]) -> ScenarioConfig {
        ScenarioConfig {
            scenario: self.scenario,
            n: self.n,
            replicates: self.replicates,
            seed: self.seed,
            misspecify: row.to_vec(),
            estimators: self.estimators.clone(),
            yz_coefficient_mode: self.yz_coefficient_mode,
            wrong_mediator_link: self.wrong_mediator_link,
            wrong_propensity_link: self.wrong_propensity_link,
            oracle_replicates: self.oracle_replicates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Config("table has no rows".into()));
        }
        for row in &self.rows {
            self.row_config(row).validate()?;
        }
        Ok(())
    }
}

/// Ground truth of the target functionals with the oracle's own error.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TrueEffects {
    pub theta0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub nde: f64,
    pub nie: f64,
    pub oracle_replicates: usize,
    /// Largest Monte Carlo standard error across the five functionals.
    pub oracle_se: f64,
}

/// One estimator's aggregate over the replicates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MCRow {
    pub estimator: EstimatorChoice,
    pub bias: f64,
    /// Standard deviation of the estimates divided by the square root of the
    /// number used.
    pub mc_se: f64,
    pub median_abs_error: f64,
    /// Total guarded-division events across replicates.
    pub flooring_events: usize,
    pub replicates_used: usize,
    pub failures: usize,
}

/// A completed Monte Carlo run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MCReport {
    pub scenario: Scenario,
    pub estimand: String,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub misspecify: Vec<Misspec>,
    pub truth: f64,
    pub truth_source: String,
    pub oracle_se: f64,
    pub rows: Vec<MCRow>,
    pub warnings: Vec<String>,
}

fn expit(x: f64) -> f64 {
    Link::Logit.mean(x)
}

/// Mediator success probability for the three-covariate design.
///
/// The linear form `0.5 - x1 + 0.5 x2 - 0.9 x3 + e - 1.5 x1 x3` enters as
/// the probability of M = 0, so the success probability is the logistic
/// complement and exposure lowers it. This orientation is what fixes the
/// benchmark's signature behaviors: the no-interaction outcome misfit rows
/// land near -0.5, and a reflected log-log mediator misfit stays stable.
fn s3_mediator_prob(x1: f64, x2: f64, x3: f64, e: f64) -> f64 {
    expit(-(0.5 - x1 + 0.5 * x2 - 0.9 * x3 + e - 1.5 * x1 * x3))
}

/// Draw one dataset from the three-covariate design.
///
/// Per row the draw order is: `X1`, `X2`, the `X3` noise, the exposure
/// uniform, the mediator uniform, the outcome noise. Changing this order
/// changes every seeded result, so it is part of the contract.
pub fn generate_s3<R: Rng>(n: usize, rng: &mut R) -> MediationDataset {
    let mut y = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut x = Array2::zeros((n, 3));
    for i in 0..n {
        let x1 = f64::from(rng.random::<f64>() < 0.4);
        let x2 = f64::from(rng.random::<f64>() < 0.3 + 0.4 * x1);
        let x3 = -0.024 - 0.4 * x1 + 0.4 * x2 + rng.sample::<f64, _>(StandardNormal);
        let ei = u8::from(rng.random::<f64>() < expit(0.4 + x1 - x2 + 0.1 * x3 - 1.5 * x1 * x3));
        let ef = f64::from(ei);
        let mi = usize::from(rng.random::<f64>() < s3_mediator_prob(x1, x2, x3, ef));
        let yi = 1.0 + 0.2 * x1 + 0.3 * x2 + 1.4 * x3 - 2.5 * ef - 3.5 * mi as f64
            + 5.0 * ef * mi as f64
            + rng.sample::<f64, _>(StandardNormal);
        y.push(yi);
        e.push(ei);
        m.push(mi);
        x[(i, 0)] = x1;
        x[(i, 1)] = x2;
        x[(i, 2)] = x3;
    }
    MediationDataset::new(y, e, m, x, OutcomeKind::Continuous, 2)
        .expect("generated data is structurally valid")
}

/// Draw one dataset from the Kang-Schafer-style design, returning the latent
/// normals alongside (analyses see only the transformed covariates; tests
/// and oracles may use the latents).
///
/// Per row the draw order is: `Z1..Z4`, the exposure uniform, the mediator
/// uniform, the outcome noise.
pub fn generate_s6<R: Rng>(
    n: usize,
    rng: &mut R,
    yz_mode: YzMode,
) -> (MediationDataset, Array2<f64>) {
    let mut y = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut x = Array2::zeros((n, 4));
    let mut z = Array2::zeros((n, 4));
    for i in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z3: f64 = rng.sample(StandardNormal);
        let z4: f64 = rng.sample(StandardNormal);
        z[(i, 0)] = z1;
        z[(i, 1)] = z2;
        z[(i, 2)] = z3;
        z[(i, 3)] = z4;
        x[(i, 0)] = (z1 / 2.0).exp();
        x[(i, 1)] = z2 / (1.0 + z1.exp()) + 10.0;
        x[(i, 2)] = (z1 * z3 / 25.0 + 0.6).powi(3);
        x[(i, 3)] = (z2 + z4 + 20.0).powi(2);
        // The design prints the success probability as
        // [1 + exp{+(z1 - 0.5 z2 + 0.25 z3 + 0.1 z4)}]^{-1}, so the logit of
        // exposure is the NEGATIVE of that linear form. Implemented as
        // printed.
        let ei =
            u8::from(rng.random::<f64>() < expit(-(z1 - 0.5 * z2 + 0.25 * z3 + 0.1 * z4)));
        let ef = f64::from(ei);
        let mi = usize::from(
            rng.random::<f64>() < expit(0.5 - z1 + 0.5 * z2 - 0.9 * z3 + z4 - 1.5 * ef),
        );
        let z_part = match yz_mode {
            // Literal reading of the design text: 13.7 z3 appears twice.
            YzMode::AsPrinted => 27.4 * z1 + 13.7 * z3 + 13.7 * z3,
            YzMode::KangSchafer => 27.4 * z1 + 13.7 * z2 + 13.7 * z3 + 13.7 * z4,
        };
        y.push(210.0 + z_part + mi as f64 + ef + rng.sample::<f64, _>(StandardNormal));
        e.push(ei);
        m.push(mi);
    }
    let data = MediationDataset::new(y, e, m, x, OutcomeKind::Continuous, 2)
        .expect("generated data is structurally valid");
    (data, z)
}

/// Working-model specs for a scenario, with the named models deliberately
/// broken.
///
/// `S3`: the correct specs mirror the generating models (including the
/// `X1 X3` interaction in both the propensity and the mediator). Breaking a
/// binary-response model means fitting it without the `X1 X3` interaction
/// and through the wrong (log-log family) link; breaking Y drops the
/// exposure-mediator product from the outcome.
///
/// `S6`: the correct specs regress on the latent normals, recovered through
/// the invertible covariate transforms; broken models regress on the raw
/// covariates instead, which is nearly right but ruins the weights.
pub fn misspecified_specs(
    scenario: Scenario,
    misspecify: &[Misspec],
    wrong_mediator_link: Link,
    wrong_propensity_link: Link,
) -> NuisanceSpecs {
    let wrong = |flag: Misspec| misspecify.contains(&flag);
    match scenario {
        Scenario::S3 => {
            let mut prop_terms = vec![Term::Intercept, Term::X(0), Term::X(1), Term::X(2)];
            if !wrong(Misspec::E) {
                prop_terms.push(Term::Xx(0, 2));
            }
            let prop_link = if wrong(Misspec::E) {
                wrong_propensity_link
            } else {
                Link::Logit
            };
            let mut med_terms = vec![Term::Intercept, Term::X(0), Term::X(1), Term::X(2)];
            if !wrong(Misspec::M) {
                med_terms.push(Term::Xx(0, 2));
            }
            med_terms.push(Term::E);
            let med_link = if wrong(Misspec::M) {
                wrong_mediator_link
            } else {
                Link::Logit
            };
            let mut out_terms = vec![
                Term::Intercept,
                Term::X(0),
                Term::X(1),
                Term::X(2),
                Term::E,
                Term::M,
            ];
            if !wrong(Misspec::Y) {
                out_terms.push(Term::Em);
            }
            NuisanceSpecs {
                outcome: DesignSpec::new(ModelTarget::Outcome, Link::Identity, out_terms)
                    .expect("valid outcome spec"),
                mediator: DesignSpec::new(ModelTarget::Mediator, med_link, med_terms)
                    .expect("valid mediator spec"),
                propensity: DesignSpec::new(ModelTarget::Propensity, prop_link, prop_terms)
                    .expect("valid propensity spec"),
            }
        }
        Scenario::S6 => {
            let latents = [Term::KsZ(1), Term::KsZ(2), Term::KsZ(3), Term::KsZ(4)];
            let raw = [Term::X(0), Term::X(1), Term::X(2), Term::X(3)];
            let features = |broken: bool| if broken { raw } else { latents };
            let mut prop_terms = vec![Term::Intercept];
            prop_terms.extend(features(wrong(Misspec::E)));
            let mut med_terms = vec![Term::Intercept];
            med_terms.extend(features(wrong(Misspec::M)));
            med_terms.push(Term::E);
            let mut out_terms = vec![Term::Intercept];
            out_terms.extend(features(wrong(Misspec::Y)));
            out_terms.push(Term::E);
            out_terms.push(Term::M);
            NuisanceSpecs {
                outcome: DesignSpec::new(ModelTarget::Outcome, Link::Identity, out_terms)
                    .expect("valid outcome spec"),
                mediator: DesignSpec::new(ModelTarget::Mediator, Link::Logit, med_terms)
                    .expect("valid mediator spec"),
                propensity: DesignSpec::new(ModelTarget::Propensity, Link::Logit, prop_terms)
                    .expect("valid propensity spec"),
            }
        }
    }
}

/// Ground truth by direct counterfactual simulation of the structural
/// equations: draw the covariate law, draw the counterfactual mediators
/// `M0`, `M1` from one shared uniform, and evaluate the outcome mean
/// structure at each `(e, m)` configuration (the outcome noise has mean
/// zero and is omitted).
pub fn true_effects(scenario: Scenario, oracle_replicates: usize, seed: u64) -> TrueEffects {
    // A dedicated stream far outside the replicate range.
    let mut rng = replicate_rng(seed, u64::MAX - 1);
    let mut sums = [0.0_f64; 3];
    let mut sq = [0.0_f64; 3];
    for _ in 0..oracle_replicates {
        let (theta, d0, d1) = match scenario {
            Scenario::S3 => {
                let x1 = f64::from(rng.random::<f64>() < 0.4);
                let x2 = f64::from(rng.random::<f64>() < 0.3 + 0.4 * x1);
                let x3 =
                    -0.024 - 0.4 * x1 + 0.4 * x2 + rng.sample::<f64, _>(StandardNormal);
                let u: f64 = rng.random();
                let m0 = f64::from(u < s3_mediator_prob(x1, x2, x3, 0.0));
                let m1 = f64::from(u < s3_mediator_prob(x1, x2, x3, 1.0));
                let mean = |e: f64, m: f64| {
                    1.0 + 0.2 * x1 + 0.3 * x2 + 1.4 * x3 - 2.5 * e - 3.5 * m + 5.0 * e * m
                };
                (mean(1.0, m0), mean(0.0, m0), mean(1.0, m1))
            }
            Scenario::S6 => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let z3: f64 = rng.sample(StandardNormal);
                let z4: f64 = rng.sample(StandardNormal);
                let base = 0.5 - z1 + 0.5 * z2 - 0.9 * z3 + z4;
                let u: f64 = rng.random();
                let m0 = f64::from(u < expit(base));
                let m1 = f64::from(u < expit(base - 1.5));
                // The latent outcome terms have mean zero under both
                // coefficient conventions, so the truth does not depend on
                // the convention; they are included per draw so the oracle
                // error is honest.
                let z_part = 27.4 * z1 + 27.4 * z3;
                let mean = |e: f64, m: f64| 210.0 + z_part + m + e;
                (mean(1.0, m0), mean(0.0, m0), mean(1.0, m1))
            }
        };
        let values = [theta, d0, d1];
        for (k, v) in values.iter().enumerate() {
            sums[k] += v;
            sq[k] += v * v;
        }
    }
    let r = oracle_replicates as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / r).collect();
    let ses: Vec<f64> = (0..3)
        .map(|k| ((sq[k] / r - means[k] * means[k]).max(0.0) / r).sqrt())
        .collect();
    TrueEffects {
        theta0: means[0],
        delta0: means[1],
        delta1: means[2],
        nde: means[0] - means[1],
        nie: means[2] - means[0],
        oracle_replicates,
        oracle_se: ses.iter().fold(0.0_f64, |a, &b| a.max(b)),
    }
}

/// The functional each table row tracks: the three-covariate design tables
/// report the natural direct effect; the Kang-Schafer tables report
/// `theta0` itself.
fn estimand_label(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::S3 => "nde",
        Scenario::S6 => "theta0",
    }
}

fn truth_for(scenario: Scenario, truth: &TrueEffects) -> f64 {
    match scenario {
        Scenario::S3 => truth.nde,
        Scenario::S6 => truth.theta0,
    }
}

/// One replicate's estimates for every requested estimator under one spec
/// set: `Ok((value, flooring))` per estimator, or `Err` recorded per
/// estimator.
fn replicate_estimates(
    data: &MediationDataset,
    specs: &NuisanceSpecs,
    scenario: Scenario,
    estimators: &[EstimatorChoice],
    fit_options: &FitOptions,
    options: &EstimatorOptions,
) -> Vec<Result<(f64, usize)>> {
    let fit = match fit_nuisances(data, specs, fit_options) {
        Ok(f) => f,
        Err(e) => {
            let msg = e.to_string();
            return estimators
                .iter()
                .map(|_| Err(Error::Config(msg.clone())))
                .collect();
        }
    };
    let delta0 = match scenario {
        Scenario::S3 => match delta_doubly(data, &fit, 0, options) {
            Ok(est) => Some(est),
            Err(e) => {
                let msg = e.to_string();
                return estimators
                    .iter()
                    .map(|_| Err(Error::Config(msg.clone())))
                    .collect();
            }
        },
        Scenario::S6 => None,
    };
    estimators
        .iter()
        .map(|&choice| {
            let theta = theta_estimate(data, &fit, choice, fit_options, options)?;
            let mut flooring = theta.diagnostics.floor_events;
            let value = match &delta0 {
                Some(d) => {
                    flooring += d.diagnostics.floor_events;
                    theta.value - d.value
                }
                None => theta.value,
            };
            Ok((value, flooring))
        })
        .collect()
}

/// Run one scenario row.
pub fn run_mc(config: &ScenarioConfig) -> Result<MCReport> {
    let table = TableConfig {
        scenario: config.scenario,
        n: config.n,
        replicates: config.replicates,
        seed: config.seed,
        rows: vec![config.misspecify.clone()],
        estimators: config.estimators.clone(),
        yz_coefficient_mode: config.yz_coefficient_mode,
        wrong_mediator_link: config.wrong_mediator_link,
        wrong_propensity_link: config.wrong_propensity_link,
        oracle_replicates: config.oracle_replicates,
    };
    Ok(run_table(&table)?.into_iter().next().expect("one row"))
}

/// Run a whole table: every replicate's dataset is generated once and
/// analyzed under each row's specs, and replicate indices key the RNG
/// streams, so the report is bit-identical across thread counts.
pub fn run_table(config: &TableConfig) -> Result<Vec<MCReport>> {
    config.validate()?;
    let truth = true_effects(config.scenario, config.oracle_replicates, config.seed);
    let target = truth_for(config.scenario, &truth);
    let fit_options = FitOptions::default();
    let est_options = EstimatorOptions::default();
    let spec_sets: Vec<NuisanceSpecs> = config
        .rows
        .iter()
        .map(|row| {
            misspecified_specs(
                config.scenario,
                row,
                config.wrong_mediator_link,
                config.wrong_propensity_link,
            )
        })
        .collect();

    // results[replicate][row][estimator]
    let results: Vec<Vec<Vec<Result<(f64, usize)>>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r as u64);
            let data = match config.scenario {
                Scenario::S3 => generate_s3(config.n, &mut rng),
                Scenario::S6 => generate_s6(config.n, &mut rng, config.yz_coefficient_mode).0,
            };
            spec_sets
                .iter()
                .map(|specs| {
                    replicate_estimates(
                        &data,
                        specs,
                        config.scenario,
                        &config.estimators,
                        &fit_options,
                        &est_options,
                    )
                })
                .collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(config.rows.len());
    for (row_idx, row) in config.rows.iter().enumerate() {
        let mut rows = Vec::with_capacity(config.estimators.len());
        let mut warnings = Vec::new();
        for (est_idx, &estimator) in config.estimators.iter().enumerate() {
            let mut estimates = Vec::with_capacity(config.replicates);
            let mut flooring = 0usize;
            let mut failures = 0usize;
            for rep in &results {
                match &rep[row_idx][est_idx] {
                    Ok((value, fl)) => {
                        estimates.push(*value);
                        flooring += fl;
                    }
                    Err(_) => failures += 1,
                }
            }
            let used = estimates.len();
            if used == 0 {
                return Err(Error::DegenerateInput(format!(
                    "estimator {} failed on every replicate",
                    estimator.label()
                )));
            }
            let mean = estimates.iter().sum::<f64>() / used as f64;
            let var = estimates
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (used.max(2) - 1) as f64;
            let mut abs_err: Vec<f64> = estimates.iter().map(|v| (v - target).abs()).collect();
            abs_err.sort_by(f64::total_cmp);
            let median = if used % 2 == 1 {
                abs_err[used / 2]
            } else {
                (abs_err[used / 2 - 1] + abs_err[used / 2]) / 2.0
            };
            if failures * 20 > config.replicates {
                warnings.push(format!(
                    "estimator {}: {failures} of {} replicates failed",
                    estimator.label(),
                    config.replicates
                ));
            }
            rows.push(MCRow {
                estimator,
                bias: mean - target,
                mc_se: (var / used as f64).sqrt(),
                median_abs_error: median,
                flooring_events: flooring,
                replicates_used: used,
                failures,
            });
        }
        reports.push(MCReport {
            scenario: config.scenario,
            estimand: estimand_label(config.scenario).to_string(),
            n: config.n,
            replicates: config.replicates,
            seed: config.seed,
            misspecify: row.clone(),
            truth: target,
            truth_source: "counterfactual_mc_oracle".to_string(),
            oracle_se: truth.oracle_se,
            rows,
            warnings,
        });
    }
    Ok(reports)
}
