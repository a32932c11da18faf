//! Multiply robust estimation of natural direct and indirect effects.
//!
//! The estimand family is built from two counterfactual means for a binary
//! exposure `E`, a mediator `M` with finite support, covariates `X`, and an
//! outcome `Y`:
//!
//! * `theta0 = E(Y_{1, M_0})`, the mean outcome under exposure with the
//!   mediator held at its unexposed natural value, and
//! * `delta_e = E(Y_e)`, the mean outcome under exposure level `e`.
//!
//! Natural direct, indirect, and total effects are contrasts of these means
//! (`NDE = theta0 - delta0`, `NIE = delta1 - theta0`,
//! `total = delta1 - delta0`), with risk-ratio and odds-ratio scales for
//! binary outcomes.
//!
//! The crate provides four estimators of `theta0` that rely on different
//! subsets of three working models (outcome regression, mediator density,
//! exposure propensity), including a triply robust estimator that is
//! consistent whenever any two of the three models are correct, a stabilized
//! variant that stays bounded under practical positivity violations, sandwich
//! and bootstrap inference, a selection-bias sensitivity analysis, and the
//! simulation designs used to benchmark all of the above.
//!
//! Modules mirror that pipeline: [`data`] (dataset container and CSV I/O),
//! [`regression`] (estimating-equation GLM engine), [`design`] (feature
//! maps), [`nuisance`] (the three working models), [`estimators`] (point
//! estimators), [`stabilized`] (bounded variants), [`inference`] (variance
//! estimation), [`sensitivity`] (unmeasured-confounding curves), and [`sim`]
//! (benchmark scenarios and the Monte Carlo harness).

pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod nuisance;
pub mod regression;
pub mod rng;
pub mod sensitivity;
pub mod sim;
pub mod stabilized;

pub use data::{MediationDataset, OutcomeKind};
pub use error::{Error, Result};
