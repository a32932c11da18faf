//! Estimating-equation GLM engine.
//!
//! Every working model in the crate (outcome regression, mediator density,
//! exposure propensity) is fit by solving the weighted estimating equation
//!
//! ```text
//! 0 = sum_i w_i h_i (y_i - g^{-1}(beta' h_i))
//! ```
//!
//! by iteratively reweighted least squares with step halving. For canonical
//! links this is the maximum likelihood score; for non-canonical links
//! (log-log, complementary log-log) it is the quasi-score with identity
//! working covariance. Solving this exact equation, rather than whatever a
//! generic optimizer happens to converge to, is what the multiple-robustness
//! identities downstream rely on: they need the empirical score to vanish at
//! the fitted coefficients to solver precision.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Mean link for a working model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// Linear mean, for continuous outcomes.
    Identity,
    /// `mean = 1 / (1 + exp(-eta))`.
    Logit,
    /// `mean = exp(-exp(-eta))` (Gumbel CDF); an intentionally asymmetric
    /// alternative to the logit, used to misspecify binary models.
    LogLog,
    /// `mean = 1 - exp(-exp(eta))`; the reflected alternative to [`Link::LogLog`].
    CLogLog,
}

impl Link {
    /// Inverse link: mean response at the linear predictor `eta`.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let t = eta.exp();
                    t / (1.0 + t)
                }
            }
            Link::LogLog => (-(-eta).exp()).exp(),
            Link::CLogLog => 1.0 - (-(eta.exp())).exp(),
        }
    }

    /// Derivative of [`Link::mean`] with respect to `eta`.
    pub fn mean_derivative(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logit => {
                let mu = self.mean(eta);
                mu * (1.0 - mu)
            }
            // Computed inside a single exp so extreme eta underflows to 0
            // instead of producing inf * 0 = NaN.
            Link::LogLog => (-eta - (-eta).exp()).exp(),
            Link::CLogLog => (eta - eta.exp()).exp(),
        }
    }

    /// Link transform: linear predictor at mean `mu` (the inverse of
    /// [`Link::mean`]); domain errors for means outside the link's range.
    pub fn linear(self, mu: f64) -> Result<f64> {
        match self {
            Link::Identity => Ok(mu),
            Link::Logit | Link::LogLog | Link::CLogLog if !(0.0..=1.0).contains(&mu) => Err(
                Error::Domain(format!("mean {mu} outside [0, 1] for a probability link")),
            ),
            Link::Logit => Ok((mu / (1.0 - mu)).ln()),
            Link::LogLog => Ok(-(-mu.ln()).ln()),
            Link::CLogLog => Ok((-(1.0 - mu).ln()).ln()),
        }
    }

    /// Whether the mean is a probability (binary response expected).
    pub fn is_probability(self) -> bool {
        !matches!(self, Link::Identity)
    }
}

/// Solver controls for [`fit`] and [`fit_multinomial`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Convergence tolerance on the infinity norm of the estimating function.
    pub tolerance: f64,
    /// Iteration cap; exceeding it is a hard error, never a silent result.
    pub max_iter: usize,
    /// Relative pivot threshold for the rank check of the weighted design.
    pub rank_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 100,
            rank_tol: linalg::DEFAULT_RANK_TOL,
        }
    }
}

/// Converged fit of a single-response working model.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coef: Array1<f64>,
    pub iterations: usize,
    /// Infinity norm of the estimating function at the returned coefficients.
    pub max_abs_score: f64,
}

/// Solve the weighted estimating equation for `beta`.
///
/// `weights` of zero drop rows from the fit entirely; negative weights are
/// rejected. The design must have full column rank on the rows with positive
/// weight. Non-convergence (including separation, where no finite root
/// exists) is an error carrying the last iterate's diagnostics.
pub fn fit(
    design: &Array2<f64>,
    response: &[f64],
    link: Link,
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult> {
    let (n, q) = design.dim();
    if response.len() != n {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows, response has {}",
            response.len()
        )));
    }
    if q == 0 {
        return Err(Error::InvalidInput("design has no columns".into()));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidInput(format!(
                "design has {n} rows, weights has {}",
                w.len()
            )));
        }
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight[{i}] = {wi} must be finite and non-negative"
                )));
            }
        }
    }
    for (i, &yi) in response.iter().enumerate() {
        if !yi.is_finite() {
            return Err(Error::InvalidInput(format!("response[{i}] is not finite")));
        }
        if link.is_probability() && !(0.0..=1.0).contains(&yi) {
            return Err(Error::InvalidInput(format!(
                "response[{i}] = {yi} outside [0, 1] for a probability link"
            )));
        }
    }

    let active: Vec<usize> = match weights {
        Some(w) => (0..n).filter(|&i| w[i] > 0.0).collect(),
        None => (0..n).collect(),
    };
    if active.len() < q {
        return Err(Error::DegenerateInput(format!(
            "{} rows with positive weight for {q} coefficients",
            active.len()
        )));
    }
    let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);

    // Rank check on the weighted design restricted to active rows.
    let mut wdesign = Array2::zeros((active.len(), q));
    for (r, &i) in active.iter().enumerate() {
        let sw = weight_of(i).sqrt();
        for j in 0..q {
            wdesign[(r, j)] = sw * design[(i, j)];
        }
    }
    if linalg::rank(&wdesign, options.rank_tol) < q {
        return Err(Error::SingularDesign(
            "design is rank deficient on the rows with positive weight".into(),
        ));
    }

    let score = |beta: &Array1<f64>| -> (Array1<f64>, f64) {
        let mut s: Array1<f64> = Array1::zeros(q);
        for &i in &active {
            let eta = design.row(i).dot(beta);
            let resid = weight_of(i) * (response[i] - link.mean(eta));
            for j in 0..q {
                s[j] += design[(i, j)] * resid;
            }
        }
        let norm = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (s, norm)
    };

    // A probability-link score can sink below tolerance under separation,
    // where the root sits at infinity: the fitted means saturate to the 0/1
    // labels and the residuals underflow. Perfect classification of a binary
    // response is exactly that situation and is reported as non-convergence.
    let all_binary = response.iter().all(|&yi| yi == 0.0 || yi == 1.0);
    let separated = |beta: &Array1<f64>| -> bool {
        link.is_probability()
            && all_binary
            && active.iter().all(|&i| {
                let mu = link.mean(design.row(i).dot(beta));
                (response[i] - mu).abs() <= 1e-8
            })
    };

    let mut beta: Array1<f64> = Array1::zeros(q);
    let (mut s, mut s_norm) = score(&beta);
    for iter in 0..options.max_iter {
        if s_norm <= options.tolerance {
            if separated(&beta) {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    max_abs_score: s_norm,
                    tolerance: options.tolerance,
                });
            }
            return Ok(FitResult {
                coef: beta,
                iterations: iter,
                max_abs_score: s_norm,
            });
        }

        // Newton step: (X' diag(w mu') X) d = score.
        let mut h = Array2::zeros((q, q));
        for &i in &active {
            let eta = design.row(i).dot(&beta);
            let wd = weight_of(i) * link.mean_derivative(eta);
            if wd == 0.0 {
                continue;
            }
            for a in 0..q {
                let xa = design[(i, a)] * wd;
                for b in 0..q {
                    h[(a, b)] += xa * design[(i, b)];
                }
            }
        }
        let step = linalg::lstsq(&h, &s, options.rank_tol).map_err(|_| Error::NoConvergence {
            iterations: iter,
            max_abs_score: s_norm,
            tolerance: options.tolerance,
        })?;

        // Step halving: insist the score norm does not increase.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = &beta + &(&step * alpha);
            let (cs, cs_norm) = score(&candidate);
            if cs_norm.is_finite() && cs_norm <= s_norm {
                accepted = Some((candidate, cs, cs_norm));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((candidate, cs, cs_norm)) => {
                beta = candidate;
                s = cs;
                s_norm = cs_norm;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    max_abs_score: s_norm,
                    tolerance: options.tolerance,
                })
            }
        }
    }
    if s_norm <= options.tolerance && !separated(&beta) {
        return Ok(FitResult {
            coef: beta,
            iterations: options.max_iter,
            max_abs_score: s_norm,
        });
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
        max_abs_score: s_norm,
        tolerance: options.tolerance,
    })
}

/// Mean response for one feature vector under `link`.
pub fn predict_mean(coef: &Array1<f64>, features: &[f64], link: Link) -> f64 {
    debug_assert_eq!(coef.len(), features.len());
    let eta: f64 = coef
        .iter()
        .zip(features)
        .map(|(b, h)| b * h)
        .sum();
    link.mean(eta)
}

/// Converged fit of a baseline-category multinomial logistic model.
///
/// Row `a - 1` of `coef` holds the coefficients of `log{P(M=a)/P(M=0)}`.
#[derive(Debug, Clone)]
pub struct MultinomialFit {
    pub coef: Array2<f64>,
    pub iterations: usize,
    pub max_abs_score: f64,
}

/// Category probabilities `[P(M=0), ..., P(M=K-1)]` for one feature vector.
pub fn multinomial_probs(coef: &Array2<f64>, features: &[f64]) -> Vec<f64> {
    let k1 = coef.nrows();
    let mut eta = Vec::with_capacity(k1 + 1);
    eta.push(0.0);
    for a in 0..k1 {
        eta.push(
            coef.row(a)
                .iter()
                .zip(features)
                .map(|(b, h)| b * h)
                .sum(),
        );
    }
    let emax = eta.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = eta.iter().map(|&v| (v - emax).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Fit `P(M=a | h) = exp(beta_a' h) / sum_b exp(beta_b' h)` (category 0 as
/// baseline) by Newton iteration on the weighted multinomial score.
///
/// Labels must lie in `0..k`. With `k = 2` this solves the same equation as
/// [`fit`] with [`Link::Logit`].
pub fn fit_multinomial(
    design: &Array2<f64>,
    labels: &[usize],
    k: usize,
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<MultinomialFit> {
    let (n, q) = design.dim();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows, labels has {}",
            labels.len()
        )));
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "multinomial fit needs at least 2 categories, got {k}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&m| m >= k) {
        return Err(Error::InvalidInput(format!(
            "label {bad} outside 0..{k}"
        )));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidInput("weights length mismatch".into()));
        }
        if let Some(&bad) = w.iter().find(|&&wi| !wi.is_finite() || wi < 0.0) {
            return Err(Error::InvalidInput(format!("invalid weight {bad}")));
        }
    }
    let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let active: Vec<usize> = (0..n).filter(|&i| weight_of(i) > 0.0).collect();
    let k1 = k - 1;
    let dim = k1 * q;
    if active.len() < q {
        return Err(Error::DegenerateInput(format!(
            "{} rows with positive weight for {q} coefficients per category",
            active.len()
        )));
    }
    let mut wdesign = Array2::zeros((active.len(), q));
    for (r, &i) in active.iter().enumerate() {
        let sw = weight_of(i).sqrt();
        for j in 0..q {
            wdesign[(r, j)] = sw * design[(i, j)];
        }
    }
    if linalg::rank(&wdesign, options.rank_tol) < q {
        return Err(Error::SingularDesign(
            "design is rank deficient on the rows with positive weight".into(),
        ));
    }

    let probs_at = |coef: &Array2<f64>, i: usize| -> Vec<f64> {
        let row = design.row(i);
        let features: Vec<f64> = row.iter().copied().collect();
        multinomial_probs(coef, &features)
    };
    let score = |coef: &Array2<f64>| -> (Array1<f64>, f64) {
        let mut s: Array1<f64> = Array1::zeros(dim);
        for &i in &active {
            let p = probs_at(coef, i);
            let w = weight_of(i);
            for a in 1..k {
                let resid = w * ((labels[i] == a) as usize as f64 - p[a]);
                for j in 0..q {
                    s[(a - 1) * q + j] += design[(i, j)] * resid;
                }
            }
        }
        let norm = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (s, norm)
    };

    // Same separation guard as the binary engine: a perfectly classified
    // label vector means the score root sits at infinity.
    let separated = |coef: &Array2<f64>| -> bool {
        active
            .iter()
            .all(|&i| 1.0 - probs_at(coef, i)[labels[i]] <= 1e-8)
    };

    let mut coef = Array2::zeros((k1, q));
    let (mut s, mut s_norm) = score(&coef);
    for iter in 0..options.max_iter {
        if s_norm <= options.tolerance {
            if separated(&coef) {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    max_abs_score: s_norm,
                    tolerance: options.tolerance,
                });
            }
            return Ok(MultinomialFit {
                coef,
                iterations: iter,
                max_abs_score: s_norm,
            });
        }
        // Fisher information: blocks H[(a,b)] = sum w x x' p_a (1(a=b) - p_b).
        let mut h = Array2::zeros((dim, dim));
        for &i in &active {
            let p = probs_at(&coef, i);
            let w = weight_of(i);
            for a in 1..k {
                for b in 1..k {
                    let pa = p[a];
                    let factor = w * pa * (((a == b) as usize as f64) - p[b]);
                    if factor == 0.0 {
                        continue;
                    }
                    for ja in 0..q {
                        let xa = design[(i, ja)] * factor;
                        for jb in 0..q {
                            h[((a - 1) * q + ja, (b - 1) * q + jb)] += xa * design[(i, jb)];
                        }
                    }
                }
            }
        }
        let step = linalg::lstsq(&h, &s, options.rank_tol).map_err(|_| Error::NoConvergence {
            iterations: iter,
            max_abs_score: s_norm,
            tolerance: options.tolerance,
        })?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut candidate = coef.clone();
            for a in 0..k1 {
                for j in 0..q {
                    candidate[(a, j)] += alpha * step[a * q + j];
                }
            }
            let (cs, cs_norm) = score(&candidate);
            if cs_norm.is_finite() && cs_norm <= s_norm {
                accepted = Some((candidate, cs, cs_norm));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((candidate, cs, cs_norm)) => {
                coef = candidate;
                s = cs;
                s_norm = cs_norm;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    max_abs_score: s_norm,
                    tolerance: options.tolerance,
                })
            }
        }
    }
    if s_norm <= options.tolerance && !separated(&coef) {
        return Ok(MultinomialFit {
            coef,
            iterations: options.max_iter,
            max_abs_score: s_norm,
        });
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
        max_abs_score: s_norm,
        tolerance: options.tolerance,
    })
}
