//! Differentiable scalar fields over flat parameter vectors.

mod analytic;
mod data;
mod mlp;
mod train;

pub use analytic::{make_double_well, Bowl, DoubleWell, GaussianWell, GaussianWells, Linear};
pub use data::{two_cluster_dataset, xor_dataset, Dataset, Targets};
pub use mlp::{make_mlp, permute_hidden_units, Activation, LossKind, MlpLandscape, MlpSpec};
pub use train::{init_params, init_uniform, train_minimum, TrainConfig};

use std::ops::Deref;

use crate::error::{Error, Result};

/// A point in parameter space. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    /// Wraps values produced by finite arithmetic on finite inputs.
    pub(crate) fn from_finite(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParamVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        distance(&self.0, &other.0)
    }

    /// `self * (1 - alpha) + other * alpha`.
    pub fn lerp(&self, other: &ParamVector, alpha: f64) -> ParamVector {
        ParamVector::from_finite(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a * (1.0 - alpha) + b * alpha)
                .collect(),
        )
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

/// Loss and gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: ParamVector,
}

/// A differentiable scalar field `L(θ)`.
///
/// Implementors provide [`Landscape::loss_and_gradient`] on raw slices;
/// callers should go through [`Landscape::evaluate`], which validates the
/// input and output. Evaluation must be read-only so that many points can
/// be evaluated concurrently.
pub trait Landscape: Send + Sync {
    fn dim(&self) -> usize;

    /// Loss and analytic gradient. `params` has length [`Landscape::dim`].
    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>);

    fn loss_value(&self, params: &[f64]) -> f64 {
        self.loss_and_gradient(params).0
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        self.check_input(params)?;
        let (loss, gradient) = self.loss_and_gradient(params);
        if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteOutput);
        }
        Ok(Evaluation { loss, gradient: ParamVector::from_finite(gradient) })
    }

    /// Loss only, with the same validation as [`Landscape::evaluate`].
    fn loss(&self, params: &[f64]) -> Result<f64> {
        self.check_input(params)?;
        let loss = self.loss_value(params);
        if !loss.is_finite() {
            return Err(Error::NonFiniteOutput);
        }
        Ok(loss)
    }

    fn check_input(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: params.len() });
        }
        check_finite(params)
    }
}

impl<L: Landscape + ?Sized> Landscape for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        (**self).loss_and_gradient(params)
    }

    fn loss_value(&self, params: &[f64]) -> f64 {
        (**self).loss_value(params)
    }
}

impl<L: Landscape + ?Sized> Landscape for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        (**self).loss_and_gradient(params)
    }

    fn loss_value(&self, params: &[f64]) -> f64 {
        (**self).loss_value(params)
    }
}

/// Free-function form of [`Landscape::evaluate`].
pub fn evaluate<L: Landscape + ?Sized>(landscape: &L, params: &[f64]) -> Result<Evaluation> {
    landscape.evaluate(params)
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteInput { index }),
        None => Ok(()),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_vector_rejects_non_finite() {
        assert!(matches!(
            ParamVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFiniteInput { index: 1 })
        ));
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn evaluate_rejects_bad_input() {
        let well = make_double_well();
        assert!(matches!(
            well.evaluate(&[0.0, f64::NAN]),
            Err(Error::NonFiniteInput { index: 1 })
        ));
        assert!(matches!(
            well.evaluate(&[0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn evaluate_is_deterministic() {
        let well = make_double_well();
        let a = well.evaluate(&[0.3, -0.7]).unwrap();
        let b = well.evaluate(&[0.3, -0.7]).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.gradient, b.gradient);
    }

    #[test]
    fn lerp_endpoints() {
        let a = ParamVector::new(vec![0.0, 2.0]).unwrap();
        let b = ParamVector::new(vec![4.0, -2.0]).unwrap();
        assert_eq!(a.lerp(&b, 0.0), a);
        assert_eq!(a.lerp(&b, 1.0), b);
        assert_eq!(a.lerp(&b, 0.25).as_slice(), &[1.0, 1.0]);
    }
}
