//! Declarative feature maps for the three working models.
//!
//! A [`DesignSpec`] names the regression target, the link, and the list of
//! terms, each term being a pure function of the covariate row `x`, the
//! exposure `e`, and the mediator value `m`. Keeping terms as data (rather
//! than closures) makes specs serializable, comparable, and auditable in
//! reports, and lets the estimators evaluate the same fit at counterfactual
//! `(e, m)` arguments.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::regression::Link;

/// Which conditional model a spec parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTarget {
    /// `E(Y | X, M, E)`; may use any term.
    Outcome,
    /// `P(M = m | E, X)`; terms must not involve `M`.
    Mediator,
    /// `P(E = 1 | X)`; terms must involve neither `E` nor `M`.
    Propensity,
}

/// One column of a design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// Constant 1.
    Intercept,
    /// Covariate main effect `x[j]`.
    X(usize),
    /// Exposure indicator.
    E,
    /// Mediator value as a number.
    M,
    /// Exposure-mediator product.
    Em,
    /// Covariate product `x[i] * x[j]`.
    Xx(usize, usize),
    /// Covariate-exposure product.
    Xe(usize),
    /// Covariate-mediator product.
    Xm(usize),
    /// Covariate-exposure-mediator product.
    Xem(usize),
    /// Natural log of a covariate.
    LogX(usize),
    /// Latent covariate `z_k` (k in 1..=4) recovered by inverting the
    /// Kang-Schafer transforms of the first four covariate columns.
    KsZ(usize),
}

impl Term {
    /// True when the column depends on the exposure argument.
    pub fn uses_exposure(self) -> bool {
        matches!(self, Term::E | Term::Em | Term::Xe(_) | Term::Xem(_))
    }

    /// True when the column depends on the mediator argument.
    pub fn uses_mediator(self) -> bool {
        matches!(self, Term::M | Term::Em | Term::Xm(_) | Term::Xem(_))
    }

    /// Largest covariate index the column reads, if any.
    fn max_x_index(self) -> Option<usize> {
        match self {
            Term::X(j) | Term::Xe(j) | Term::Xm(j) | Term::Xem(j) | Term::LogX(j) => Some(j),
            Term::Xx(i, j) => Some(i.max(j)),
            Term::KsZ(_) => Some(3),
            _ => None,
        }
    }

    /// Column value at `(x, e, m)`.
    pub fn value(self, x: ArrayView1<'_, f64>, e: f64, m: f64) -> f64 {
        match self {
            Term::Intercept => 1.0,
            Term::X(j) => x[j],
            Term::E => e,
            Term::M => m,
            Term::Em => e * m,
            Term::Xx(i, j) => x[i] * x[j],
            Term::Xe(j) => x[j] * e,
            Term::Xm(j) => x[j] * m,
            Term::Xem(j) => x[j] * e * m,
            Term::LogX(j) => x[j].ln(),
            Term::KsZ(k) => ks_z(x, k),
        }
    }
}

/// Invert the Kang-Schafer covariate transforms: given
/// `x1 = exp(z1/2)`, `x2 = z2/(1+exp(z1)) + 10`, `x3 = (z1*z3/25 + 0.6)^3`,
/// `x4 = (z2 + z4 + 20)^2`, recover `z_k` from `(x1, x2, x3, x4)`.
pub fn ks_z(x: ArrayView1<'_, f64>, k: usize) -> f64 {
    let z1 = 2.0 * x[0].ln();
    match k {
        1 => z1,
        2 => (x[1] - 10.0) * (1.0 + z1.exp()),
        3 => 25.0 * (x[2].cbrt() - 0.6) / z1,
        4 => {
            let z2 = (x[1] - 10.0) * (1.0 + z1.exp());
            x[3].sqrt() - 20.0 - z2
        }
        _ => unreachable!("validated k in 1..=4"),
    }
}

/// A regression target, link, and ordered term list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub target: ModelTarget,
    pub link: Link,
    pub terms: Vec<Term>,
}

impl DesignSpec {
    pub fn new(target: ModelTarget, link: Link, terms: Vec<Term>) -> Result<Self> {
        let spec = Self {
            target,
            link,
            terms,
        };
        spec.validate_terms()?;
        Ok(spec)
    }

    /// Main-effects spec: intercept plus all covariates, plus `E` for the
    /// mediator target, plus `E` and `M` for the outcome target.
    pub fn main_effects(target: ModelTarget, link: Link, p: usize) -> Self {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::X));
        match target {
            ModelTarget::Propensity => {}
            ModelTarget::Mediator => terms.push(Term::E),
            ModelTarget::Outcome => {
                terms.push(Term::E);
                terms.push(Term::M);
            }
        }
        Self {
            target,
            link,
            terms,
        }
    }

    /// Number of design columns.
    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.contains(&Term::Intercept)
    }

    fn validate_terms(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("design spec has no terms".into()));
        }
        for (i, term) in self.terms.iter().enumerate() {
            match self.target {
                ModelTarget::Propensity if term.uses_exposure() || term.uses_mediator() => {
                    return Err(Error::Config(format!(
                        "propensity spec term {term:?} depends on exposure or mediator"
                    )));
                }
                ModelTarget::Mediator if term.uses_mediator() => {
                    return Err(Error::Config(format!(
                        "mediator spec term {term:?} depends on the mediator"
                    )));
                }
                _ => {}
            }
            if let Term::KsZ(k) = term {
                if !(1..=4).contains(k) {
                    return Err(Error::Config(format!(
                        "ks_z index must be in 1..=4, got {k}"
                    )));
                }
            }
            if self.terms[..i].contains(term) {
                return Err(Error::Config(format!("duplicate term {term:?}")));
            }
        }
        Ok(())
    }

    /// Validate term legality and covariate indices against a dataset width.
    pub fn validate(&self, p: usize) -> Result<()> {
        self.validate_terms()?;
        for term in &self.terms {
            if let Some(j) = term.max_x_index() {
                if j >= p {
                    return Err(Error::Config(format!(
                        "term {term:?} reads covariate {j} but the dataset has {p} columns"
                    )));
                }
            }
        }
        if self.target != ModelTarget::Outcome && self.link == Link::Identity {
            return Err(Error::Config(format!(
                "{:?} target requires a probability link",
                self.target
            )));
        }
        Ok(())
    }

    /// Feature vector at an arbitrary `(x, e, m)` evaluation point.
    pub fn features(&self, x: ArrayView1<'_, f64>, e: f64, m: f64) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(x, e, m)).collect()
    }

    /// Design matrix at the observed rows of `data`.
    pub fn design_matrix(&self, data: &MediationDataset) -> Array2<f64> {
        let n = data.n();
        let q = self.width();
        let mut out = Array2::zeros((n, q));
        for i in 0..n {
            let x = data.x_row(i);
            let e = f64::from(data.exposure()[i]);
            let m = data.mediator()[i] as f64;
            for (j, t) in self.terms.iter().enumerate() {
                out[(i, j)] = t.value(x, e, m);
            }
        }
        out
    }
}
