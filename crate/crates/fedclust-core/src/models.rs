//! Model families, losses, gradients, projection, and local training.
//!
//! Two closed-form model families are supported: linear regression under the
//! squared loss and multinomial logistic regression under the cross-entropy
//! loss. Both expose the empirical risk (mean per-sample loss), its exact
//! gradient, and projected gradient descent; everything is a pure function of
//! its inputs.

use crate::data::{DataSplit, Targets};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximum finite loss before the divergence guard aborts training.
pub const DIVERGENCE_LOSS_LIMIT: f64 = 1e12;

/// A dense parameter vector — the unit of all distance and aggregation math.
///
/// For linear regression this is the weight vector `w ∈ R^d`; for multinomial
/// logistic regression it is the row-major flattening of the `K × d` class
/// weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    /// The all-zeros vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True iff every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

/// The supported model families, with their dimension metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    /// Least-squares linear regression on `d` features.
    LinearRegression { d: usize },
    /// Multinomial (softmax) logistic regression on `d` features and
    /// `classes` classes; parameters are `classes × d`, flattened row-major.
    MultinomialLogistic { d: usize, classes: usize },
}

impl ModelKind {
    /// Feature dimension expected of every sample.
    pub fn feature_dim(&self) -> usize {
        match *self {
            ModelKind::LinearRegression { d } => d,
            ModelKind::MultinomialLogistic { d, .. } => d,
        }
    }

    /// Length of a parameter vector for this family.
    pub fn param_dim(&self) -> usize {
        match *self {
            ModelKind::LinearRegression { d } => d,
            ModelKind::MultinomialLogistic { d, classes } => d * classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::LinearRegression { d } if d >= 1 => Ok(()),
            ModelKind::MultinomialLogistic { d, classes } if d >= 1 && classes >= 2 => Ok(()),
            _ => Err(Error::invalid("model dimensions must be positive (classes >= 2)")),
        }
    }
}

/// Hyper-parameters for (projected) gradient descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of outer steps/rounds `T`.
    pub steps: usize,
    /// Step size `η > 0`.
    pub learning_rate: f64,
    /// Diameter of the feasible ball; `None` disables projection.
    #[serde(default)]
    pub projection_diameter: Option<f64>,
    /// Gradient steps a member takes locally per federated round. With 1 the
    /// server aggregates gradients; with more it aggregates local models.
    #[serde(default = "default_local_steps")]
    pub local_steps: usize,
    /// Trim level `β ∈ [0, 0.5)` for robust aggregation.
    #[serde(default)]
    pub trim: f64,
}

fn default_local_steps() -> usize {
    1
}

impl TrainConfig {
    pub fn new(steps: usize, learning_rate: f64) -> Self {
        TrainConfig {
            steps,
            learning_rate,
            projection_diameter: None,
            local_steps: 1,
            trim: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be a positive finite number"));
        }
        if let Some(d) = self.projection_diameter {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::invalid("projection_diameter must be positive"));
            }
        }
        if self.local_steps < 1 {
            return Err(Error::invalid("local_steps must be >= 1"));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(Error::invalid("trim must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

fn check_dims(kind: ModelKind, params: &ParamVector, split: &DataSplit<'_>) -> Result<()> {
    if params.len() != kind.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: kind.param_dim(),
            got: params.len(),
        });
    }
    if split.feature_dim() != kind.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: kind.feature_dim(),
            got: split.feature_dim(),
        });
    }
    if split.is_empty() {
        return Err(Error::EmptySplit);
    }
    match (kind, split.targets) {
        (ModelKind::LinearRegression { .. }, Targets::Real(_)) => Ok(()),
        (ModelKind::MultinomialLogistic { classes, .. }, Targets::Class(labels)) => {
            if let Some(&bad) = split.indices.iter().map(|&i| &labels[i]).find(|&&c| c >= classes) {
                return Err(Error::invalid(format!(
                    "class label {bad} out of range for {classes} classes"
                )));
            }
            Ok(())
        }
        _ => Err(Error::invalid("target type does not match model family")),
    }
}

/// Mean per-sample loss of `params` over the split.
///
/// Squared loss `½(⟨x, w⟩ − y)²` for linear regression; cross-entropy for
/// multinomial logistic regression.
pub fn loss(kind: ModelKind, params: &ParamVector, split: &DataSplit<'_>) -> Result<f64> {
    check_dims(kind, params, split)?;
    Ok(loss_unchecked(kind, params, split))
}

/// Gradient of the empirical risk at `params`; same dimension as `params`.
pub fn gradient(kind: ModelKind, params: &ParamVector, split: &DataSplit<'_>) -> Result<ParamVector> {
    check_dims(kind, params, split)?;
    let (g, _) = grad_loss_unchecked(kind, params, split);
    Ok(g)
}

/// Gradient and loss in one pass (both are needed every step of training and
/// share all intermediate work).
pub fn gradient_and_loss(
    kind: ModelKind,
    params: &ParamVector,
    split: &DataSplit<'_>,
) -> Result<(ParamVector, f64)> {
    check_dims(kind, params, split)?;
    Ok(grad_loss_unchecked(kind, params, split))
}

fn loss_unchecked(kind: ModelKind, params: &ParamVector, split: &DataSplit<'_>) -> f64 {
    match kind {
        ModelKind::LinearRegression { .. } => {
            let Targets::Real(ys) = split.targets else { unreachable!() };
            let mut total = 0.0;
            for &i in split.indices {
                let r = dot(split.row(i), &params.0) - ys[i];
                total += 0.5 * r * r;
            }
            total / split.indices.len() as f64
        }
        ModelKind::MultinomialLogistic { d, classes } => {
            let Targets::Class(ys) = split.targets else { unreachable!() };
            let mut total = 0.0;
            let mut scores = vec![0.0; classes];
            for &i in split.indices {
                let x = split.row(i);
                for (k, s) in scores.iter_mut().enumerate() {
                    *s = dot(x, &params.0[k * d..(k + 1) * d]);
                }
                total += log_sum_exp(&scores) - scores[ys[i]];
            }
            total / split.indices.len() as f64
        }
    }
}

fn grad_loss_unchecked(
    kind: ModelKind,
    params: &ParamVector,
    split: &DataSplit<'_>,
) -> (ParamVector, f64) {
    let n = split.indices.len() as f64;
    match kind {
        ModelKind::LinearRegression { d } => {
            let Targets::Real(ys) = split.targets else { unreachable!() };
            let mut g = vec![0.0; d];
            let mut total = 0.0;
            for &i in split.indices {
                let x = split.row(i);
                let r = dot(x, &params.0) - ys[i];
                total += 0.5 * r * r;
                axpy(&mut g, r, x);
            }
            g.iter_mut().for_each(|v| *v /= n);
            (ParamVector(g), total / n)
        }
        ModelKind::MultinomialLogistic { d, classes } => {
            let Targets::Class(ys) = split.targets else { unreachable!() };
            let mut g = vec![0.0; d * classes];
            let mut total = 0.0;
            let mut scores = vec![0.0; classes];
            for &i in split.indices {
                let x = split.row(i);
                for (k, s) in scores.iter_mut().enumerate() {
                    *s = dot(x, &params.0[k * d..(k + 1) * d]);
                }
                let lse = log_sum_exp(&scores);
                total += lse - scores[ys[i]];
                for k in 0..classes {
                    let p = (scores[k] - lse).exp();
                    let coeff = p - if ys[i] == k { 1.0 } else { 0.0 };
                    axpy(&mut g[k * d..(k + 1) * d], coeff, x);
                }
            }
            g.iter_mut().for_each(|v| *v /= n);
            (ParamVector(g), total / n)
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += c * x`
#[inline]
fn axpy(out: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o += c * v;
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// Euclidean projection onto the centered ball of diameter `diameter`
/// (radius `diameter / 2`); identity when `diameter` is `None`.
pub fn project(params: &ParamVector, diameter: Option<f64>) -> ParamVector {
    let Some(d) = diameter else {
        return params.clone();
    };
    let radius = d / 2.0;
    let norm = params.norm();
    if norm <= radius || norm == 0.0 {
        params.clone()
    } else {
        ParamVector(params.0.iter().map(|v| v * radius / norm).collect())
    }
}

/// `steps` iterations of projected gradient descent on the split's empirical
/// risk, starting from `w0`. Aborts with [`Error::Diverged`] if the loss
/// leaves the finite range (non-finite or above [`DIVERGENCE_LOSS_LIMIT`]).
pub fn local_train(
    kind: ModelKind,
    w0: &ParamVector,
    split: &DataSplit<'_>,
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    cfg.validate()?;
    check_dims(kind, w0, split)?;
    let mut w = w0.clone();
    for _ in 0..cfg.steps {
        let (g, l) = grad_loss_unchecked(kind, &w, split);
        if !l.is_finite() || l > DIVERGENCE_LOSS_LIMIT {
            return Err(Error::Diverged { loss: l });
        }
        for (wv, gv) in w.0.iter_mut().zip(&g.0) {
            *wv -= cfg.learning_rate * gv;
        }
        w = project(&w, cfg.projection_diameter);
    }
    if !w.is_finite() {
        return Err(Error::Diverged { loss: f64::INFINITY });
    }
    Ok(w)
}

/// Estimates the smoothness constant `L` of the split's empirical risk, for
/// step sizes of the form `η = 1/L`.
///
/// Linear regression: the largest eigenvalue of `XᵀX / n` by power iteration.
/// Multinomial logistic: the standard upper bound `λ_max(XᵀX / n) / 2`.
pub fn smoothness_estimate(kind: ModelKind, split: &DataSplit<'_>) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::EmptySplit);
    }
    let d = split.feature_dim();
    if d != kind.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: kind.feature_dim(),
            got: d,
        });
    }
    let n = split.indices.len() as f64;
    // Power iteration on H = XᵀX / n via v ↦ Xᵀ(Xv) / n.
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..64 {
        let mut hv = vec![0.0; d];
        for &i in split.indices {
            let x = split.row(i);
            axpy(&mut hv, dot(x, &v), x);
        }
        hv.iter_mut().for_each(|u| *u /= n);
        let norm = dot(&hv, &hv).sqrt();
        if norm == 0.0 {
            lambda = 0.0;
            break;
        }
        lambda = norm;
        hv.iter_mut().for_each(|u| *u /= norm);
        v = hv;
    }
    if lambda <= 0.0 {
        return Err(Error::invalid(
            "smoothness estimate is zero (all-zero features?)",
        ));
    }
    Ok(match kind {
        ModelKind::LinearRegression { .. } => lambda,
        ModelKind::MultinomialLogistic { .. } => lambda / 2.0,
    })
}
