//! The three working models and their joint evaluation.
//!
//! Estimation rests on an outcome regression `E(Y | X, M, E)`, a mediator
//! density `f(m | e, x)` over the finite support, and an exposure propensity
//! `f(e | x)`. This module fits all three from declarative specs and exposes
//! the fitted objects behind evaluators that accept counterfactual `(e, m)`
//! arguments, plus the pseudo-outcome
//!
//! ```text
//! eta(e, e*, x) = sum_m E(Y | x, m, e) f(m | e*, x),
//! ```
//!
//! the mediator-integrated outcome mean that every estimator downstream is
//! built from. For inference, the module also exposes the stacked score
//! vector of all three fits and its empirical Jacobian, in the coefficient
//! order (mediator, propensity, outcome).

use ndarray::{Array1, Array2, ArrayView1};

use crate::data::MediationDataset;
use crate::design::{DesignSpec, ModelTarget};
use crate::error::{Error, Result};
use crate::regression::{
    self, fit_multinomial, FitOptions, Link, MultinomialFit,
};

/// Specs for the three working models.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NuisanceSpecs {
    pub outcome: DesignSpec,
    pub mediator: DesignSpec,
    pub propensity: DesignSpec,
}

impl NuisanceSpecs {
    pub fn validate(&self, data: &MediationDataset) -> Result<()> {
        if self.outcome.target != ModelTarget::Outcome
            || self.mediator.target != ModelTarget::Mediator
            || self.propensity.target != ModelTarget::Propensity
        {
            return Err(Error::Config(
                "specs must target outcome, mediator, and propensity respectively".into(),
            ));
        }
        self.outcome.validate(data.p())?;
        self.mediator.validate(data.p())?;
        self.propensity.validate(data.p())?;
        if data.support_size() > 2 && self.mediator.link != Link::Logit {
            return Err(Error::Config(
                "a mediator with more than two values is fit by baseline-category \
                 multinomial logistic regression and requires the logit link"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One fitted single-response model.
#[derive(Debug, Clone)]
pub struct GlmComponent {
    pub spec: DesignSpec,
    pub coef: Array1<f64>,
    pub iterations: usize,
    pub max_abs_score: f64,
}

impl GlmComponent {
    /// Mean response at `(x, e, m)`.
    pub fn mean(&self, x: ArrayView1<'_, f64>, e: f64, m: f64) -> f64 {
        let eta: f64 = self
            .spec
            .terms
            .iter()
            .zip(self.coef.iter())
            .map(|(t, b)| t.value(x, e, m) * b)
            .sum();
        self.spec.link.mean(eta)
    }
}

/// The fitted mediator density.
#[derive(Debug, Clone)]
pub enum MediatorComponent {
    /// Two-point support: a single binary regression of `I(M = 1)`.
    Binary(GlmComponent),
    /// Support of three or more values: baseline-category multinomial logit;
    /// `coef` row `a - 1` parameterizes `log{P(M=a)/P(M=0)}`.
    Multinomial {
        spec: DesignSpec,
        coef: Array2<f64>,
        iterations: usize,
        max_abs_score: f64,
    },
}

impl MediatorComponent {
    /// `f(m | e, x)` over the support.
    pub fn density(&self, m: usize, e: f64, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            MediatorComponent::Binary(c) => {
                let p1 = c.mean(x, e, 0.0);
                if m == 1 {
                    p1
                } else {
                    1.0 - p1
                }
            }
            MediatorComponent::Multinomial { spec, coef, .. } => {
                let features = spec.features(x, e, 0.0);
                regression::multinomial_probs(coef, &features)[m]
            }
        }
    }

    pub fn spec(&self) -> &DesignSpec {
        match self {
            MediatorComponent::Binary(c) => &c.spec,
            MediatorComponent::Multinomial { spec, .. } => spec,
        }
    }

    /// Flattened coefficient count.
    fn coef_len(&self) -> usize {
        match self {
            MediatorComponent::Binary(c) => c.coef.len(),
            MediatorComponent::Multinomial { coef, .. } => coef.len(),
        }
    }
}

/// Joint fit of the three working models on one dataset.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub outcome: GlmComponent,
    pub mediator: MediatorComponent,
    pub propensity: GlmComponent,
    pub support_size: usize,
}

/// Fit outcome, mediator, and propensity models on all rows of `data`.
///
/// The outcome model sees `(x, m, e)` features, the mediator model `(x, e)`
/// features with the mediator as response, and the propensity model `x`
/// features with the exposure as response. The three fits share nothing but
/// the data: perturbing one model's coefficients afterwards cannot change
/// another's.
pub fn fit_nuisances(
    data: &MediationDataset,
    specs: &NuisanceSpecs,
    options: &FitOptions,
) -> Result<NuisanceFit> {
    specs.validate(data)?;

    let y_design = specs.outcome.design_matrix(data);
    let outcome_fit = regression::fit(&y_design, data.y(), specs.outcome.link, None, options)?;
    let outcome = GlmComponent {
        spec: specs.outcome.clone(),
        coef: outcome_fit.coef,
        iterations: outcome_fit.iterations,
        max_abs_score: outcome_fit.max_abs_score,
    };

    let m_design = specs.mediator.design_matrix(data);
    let mediator = if data.support_size() == 2 {
        let response: Vec<f64> = data.mediator().iter().map(|&m| m as f64).collect();
        let fit = regression::fit(&m_design, &response, specs.mediator.link, None, options)?;
        MediatorComponent::Binary(GlmComponent {
            spec: specs.mediator.clone(),
            coef: fit.coef,
            iterations: fit.iterations,
            max_abs_score: fit.max_abs_score,
        })
    } else {
        let MultinomialFit {
            coef,
            iterations,
            max_abs_score,
        } = fit_multinomial(
            &m_design,
            data.mediator(),
            data.support_size(),
            None,
            options,
        )?;
        MediatorComponent::Multinomial {
            spec: specs.mediator.clone(),
            coef,
            iterations,
            max_abs_score,
        }
    };

    let e_design = specs.propensity.design_matrix(data);
    let response: Vec<f64> = data.exposure().iter().map(|&e| f64::from(e)).collect();
    let fit = regression::fit(&e_design, &response, specs.propensity.link, None, options)?;
    let propensity = GlmComponent {
        spec: specs.propensity.clone(),
        coef: fit.coef,
        iterations: fit.iterations,
        max_abs_score: fit.max_abs_score,
    };

    Ok(NuisanceFit {
        outcome,
        mediator,
        propensity,
        support_size: data.support_size(),
    })
}

impl NuisanceFit {
    /// Fitted outcome mean `E(Y | x, m, e)`.
    pub fn outcome_mean(&self, x: ArrayView1<'_, f64>, m: usize, e: u8) -> f64 {
        self.outcome.mean(x, f64::from(e), m as f64)
    }

    /// Fitted mediator density `f(m | e, x)`.
    pub fn mediator_density(&self, m: usize, e: u8, x: ArrayView1<'_, f64>) -> f64 {
        self.mediator.density(m, f64::from(e), x)
    }

    /// Fitted propensity `f(e | x)`.
    pub fn propensity(&self, e: u8, x: ArrayView1<'_, f64>) -> f64 {
        let p1 = self.propensity.mean(x, 0.0, 0.0);
        if e == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    /// Pseudo-outcome `eta(e, e*, x) = sum_m E(Y|x,m,e) f(m|e*,x)`, summed in
    /// ascending mediator order.
    pub fn eta(&self, e: u8, e_star: u8, x: ArrayView1<'_, f64>) -> f64 {
        let mut total = 0.0;
        for m in 0..self.support_size {
            total += self.outcome_mean(x, m, e) * self.mediator_density(m, e_star, x);
        }
        total
    }

    /// Per-row evaluation cache for the estimators; one pass over the data.
    pub fn row_nuisances(&self, data: &MediationDataset) -> Vec<RowNuisance> {
        let k = self.support_size;
        (0..data.n())
            .map(|i| {
                let x = data.x_row(i);
                let mi = data.mediator()[i];
                let prop1 = self.propensity.mean(x, 0.0, 0.0);
                let med0: Vec<f64> = (0..k).map(|m| self.mediator_density(m, 0, x)).collect();
                let med1: Vec<f64> = (0..k).map(|m| self.mediator_density(m, 1, x)).collect();
                let out1: Vec<f64> = (0..k).map(|m| self.outcome_mean(x, m, 1)).collect();
                let out0: Vec<f64> = (0..k).map(|m| self.outcome_mean(x, m, 0)).collect();
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
                RowNuisance {
                    prop1,
                    eta10: dot(&out1, &med0),
                    eta00: dot(&out0, &med0),
                    eta11: dot(&out1, &med1),
                    out1_obs: out1[mi],
                    med0_obs: med0[mi],
                    med1_obs: med1[mi],
                    med0,
                    med1,
                    out1,
                    out0,
                }
            })
            .collect()
    }

    /// Coefficient block sizes in stacked order `(mediator, propensity, outcome)`.
    pub fn beta_dims(&self) -> (usize, usize, usize) {
        (
            self.mediator.coef_len(),
            self.propensity.coef.len(),
            self.outcome.coef.len(),
        )
    }

    /// All coefficients as one vector in stacked order.
    pub fn stacked_beta(&self) -> Array1<f64> {
        let (qm, qe, qy) = self.beta_dims();
        let mut beta = Array1::zeros(qm + qe + qy);
        match &self.mediator {
            MediatorComponent::Binary(c) => {
                for (j, &b) in c.coef.iter().enumerate() {
                    beta[j] = b;
                }
            }
            MediatorComponent::Multinomial { coef, .. } => {
                for (j, &b) in coef.iter().enumerate() {
                    beta[j] = b;
                }
            }
        }
        for (j, &b) in self.propensity.coef.iter().enumerate() {
            beta[qm + j] = b;
        }
        for (j, &b) in self.outcome.coef.iter().enumerate() {
            beta[qm + qe + j] = b;
        }
        beta
    }

    /// Copy of the fit with all coefficients replaced by `beta` (stacked
    /// order); used to differentiate estimators with respect to the
    /// coefficients.
    pub fn with_stacked_beta(&self, beta: &Array1<f64>) -> NuisanceFit {
        let (qm, qe, qy) = self.beta_dims();
        assert_eq!(beta.len(), qm + qe + qy, "stacked coefficient length");
        let mut out = self.clone();
        match &mut out.mediator {
            MediatorComponent::Binary(c) => {
                for j in 0..qm {
                    c.coef[j] = beta[j];
                }
            }
            MediatorComponent::Multinomial { coef, .. } => {
                let q = coef.ncols();
                for j in 0..qm {
                    coef[(j / q, j % q)] = beta[j];
                }
            }
        }
        for j in 0..qe {
            out.propensity.coef[j] = beta[qm + j];
        }
        for j in 0..qy {
            out.outcome.coef[j] = beta[qm + qe + j];
        }
        out
    }

    /// Per-row stacked score contributions, one row per observation, columns
    /// in stacked coefficient order. Row means vanish at the fitted
    /// coefficients up to solver tolerance.
    pub fn stacked_scores(&self, data: &MediationDataset) -> Array2<f64> {
        let (qm, qe, qy) = self.beta_dims();
        let mut s = Array2::zeros((data.n(), qm + qe + qy));
        for i in 0..data.n() {
            let x = data.x_row(i);
            let e = f64::from(data.exposure()[i]);
            let m = data.mediator()[i];
            match &self.mediator {
                MediatorComponent::Binary(c) => {
                    let h = c.spec.features(x, e, 0.0);
                    let mu = c.spec.link.mean(
                        h.iter().zip(c.coef.iter()).map(|(a, b)| a * b).sum::<f64>(),
                    );
                    let resid = m as f64 - mu;
                    for (j, hj) in h.iter().enumerate() {
                        s[(i, j)] = hj * resid;
                    }
                }
                MediatorComponent::Multinomial { spec, coef, .. } => {
                    let h = spec.features(x, e, 0.0);
                    let probs = regression::multinomial_probs(coef, &h);
                    let q = h.len();
                    for a in 1..self.support_size {
                        let resid = ((m == a) as usize as f64) - probs[a];
                        for (j, hj) in h.iter().enumerate() {
                            s[(i, (a - 1) * q + j)] = hj * resid;
                        }
                    }
                }
            }
            let he = self.propensity.spec.features(x, 0.0, 0.0);
            let pi = self.propensity.mean(x, 0.0, 0.0);
            for (j, hj) in he.iter().enumerate() {
                s[(i, qm + j)] = hj * (e - pi);
            }
            let hy = self.outcome.spec.features(x, e, m as f64);
            let mu = self.outcome.mean(x, e, m as f64);
            for (j, hj) in hy.iter().enumerate() {
                s[(i, qm + qe + j)] = hj * (data.y()[i] - mu);
            }
        }
        s
    }

    /// Empirical mean Jacobian of the stacked score with respect to the
    /// stacked coefficients (block diagonal, evaluated analytically).
    pub fn score_jacobian(&self, data: &MediationDataset) -> Array2<f64> {
        let (qm, qe, qy) = self.beta_dims();
        let dim = qm + qe + qy;
        let n = data.n() as f64;
        let mut j = Array2::zeros((dim, dim));
        for i in 0..data.n() {
            let x = data.x_row(i);
            let e = f64::from(data.exposure()[i]);
            let m = data.mediator()[i];
            match &self.mediator {
                MediatorComponent::Binary(c) => {
                    let h = c.spec.features(x, e, 0.0);
                    let eta: f64 = h.iter().zip(c.coef.iter()).map(|(a, b)| a * b).sum();
                    let d = c.spec.link.mean_derivative(eta);
                    for (a, ha) in h.iter().enumerate() {
                        for (b, hb) in h.iter().enumerate() {
                            j[(a, b)] -= ha * hb * d / n;
                        }
                    }
                }
                MediatorComponent::Multinomial { spec, coef, .. } => {
                    let h = spec.features(x, e, 0.0);
                    let probs = regression::multinomial_probs(coef, &h);
                    let q = h.len();
                    for a in 1..self.support_size {
                        for b in 1..self.support_size {
                            let d = probs[a] * (((a == b) as usize as f64) - probs[b]);
                            for (ja, ha) in h.iter().enumerate() {
                                for (jb, hb) in h.iter().enumerate() {
                                    j[((a - 1) * q + ja, (b - 1) * q + jb)] -=
                                        ha * hb * d / n;
                                }
                            }
                        }
                    }
                }
            }
            let he = self.propensity.spec.features(x, 0.0, 0.0);
            let eta_e: f64 = he
                .iter()
                .zip(self.propensity.coef.iter())
                .map(|(a, b)| a * b)
                .sum();
            let de = self.propensity.spec.link.mean_derivative(eta_e);
            for (a, ha) in he.iter().enumerate() {
                for (b, hb) in he.iter().enumerate() {
                    j[(qm + a, qm + b)] -= ha * hb * de / n;
                }
            }
            let hy = self.outcome.spec.features(x, e, m as f64);
            let eta_y: f64 = hy
                .iter()
                .zip(self.outcome.coef.iter())
                .map(|(a, b)| a * b)
                .sum();
            let dy = self.outcome.spec.link.mean_derivative(eta_y);
            for (a, ha) in hy.iter().enumerate() {
                for (b, hb) in hy.iter().enumerate() {
                    j[(qm + qe + a, qm + qe + b)] -= ha * hb * dy / n;
                }
            }
        }
        j
    }
}

/// Cached per-row nuisance evaluations.
#[derive(Debug, Clone)]
pub struct RowNuisance {
    /// `f(1 | x_i)`.
    pub prop1: f64,
    /// `f(m | 0, x_i)` over the support.
    pub med0: Vec<f64>,
    /// `f(m | 1, x_i)` over the support.
    pub med1: Vec<f64>,
    /// `E(Y | x_i, m, 1)` over the support.
    pub out1: Vec<f64>,
    /// `E(Y | x_i, m, 0)` over the support.
    pub out0: Vec<f64>,
    /// `eta(1, 0, x_i)`.
    pub eta10: f64,
    /// `eta(0, 0, x_i)`.
    pub eta00: f64,
    /// `eta(1, 1, x_i)`.
    pub eta11: f64,
    /// `E(Y | x_i, M_i, 1)` at the observed mediator.
    pub out1_obs: f64,
    /// `f(M_i | 0, x_i)` at the observed mediator.
    pub med0_obs: f64,
    /// `f(M_i | 1, x_i)` at the observed mediator.
    pub med1_obs: f64,
}
