//! Discretised paths between two fixed endpoints.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::landscape::{check_finite, distance, ParamVector};

/// Ordered pivots `p_0 … p_{N+1}`. The endpoints are fixed at construction
/// and no operation on a chain ever changes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pivots: Vec<ParamVector>,
}

/// One loss value per pivot, aligned with [`Chain::pivots`].
#[derive(Debug, Clone, PartialEq)]
pub struct PivotLosses(Vec<f64>);

impl PivotLosses {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(PivotLosses(values))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PivotLosses {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Chain {
    /// A chain from explicit pivots; at least the two endpoints are needed
    /// and all pivots must share one dimension.
    pub fn new(pivots: Vec<ParamVector>) -> Result<Self> {
        if pivots.len() < 2 {
            return Err(Error::InvalidConfig(format!("a chain needs two endpoints, got {} pivots", pivots.len())));
        }
        let dim = pivots[0].dim();
        if let Some(p) = pivots.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
        }
        Ok(Chain { pivots })
    }

    /// `interior` pivots equally spaced on the segment from `start` to `end`.
    pub fn straight(start: &ParamVector, end: &ParamVector, interior: usize) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(Error::DimensionMismatch { expected: start.dim(), found: end.dim() });
        }
        let mut pivots = Vec::with_capacity(interior + 2);
        pivots.push(start.clone());
        for i in 1..=interior {
            pivots.push(start.lerp(end, i as f64 / (interior + 1) as f64));
        }
        pivots.push(end.clone());
        Ok(Chain { pivots })
    }

    pub fn pivots(&self) -> &[ParamVector] {
        &self.pivots
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of movable pivots `N`.
    pub fn interior_count(&self) -> usize {
        self.pivots.len() - 2
    }

    pub fn dim(&self) -> usize {
        self.pivots[0].dim()
    }

    pub fn start(&self) -> &ParamVector {
        &self.pivots[0]
    }

    pub fn end(&self) -> &ParamVector {
        self.pivots.last().expect("at least two pivots")
    }

    pub fn interior(&self) -> &[ParamVector] {
        &self.pivots[1..self.pivots.len() - 1]
    }

    /// Same endpoints, new interior pivots.
    pub fn with_interior(&self, interior: Vec<ParamVector>) -> Result<Chain> {
        if let Some(p) = interior.iter().find(|p| p.dim() != self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: p.dim() });
        }
        let mut pivots = Vec::with_capacity(interior.len() + 2);
        pivots.push(self.start().clone());
        pivots.extend(interior);
        pivots.push(self.end().clone());
        Ok(Chain { pivots })
    }

    /// Cumulative Euclidean arc length at each pivot, starting at 0.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pivots.len());
        let mut s = 0.0;
        out.push(s);
        for w in self.pivots.windows(2) {
            s += w[0].distance(&w[1]);
            out.push(s);
        }
        out
    }

    pub fn total_length(&self) -> f64 {
        *self.arc_lengths().last().expect("non-empty")
    }

    /// Moves the interior pivots to equal arc-length spacing along the
    /// current piecewise-linear path. A chain of zero length is returned
    /// unchanged.
    pub fn redistribute(&self) -> Chain {
        let s = self.arc_lengths();
        let total = *s.last().expect("non-empty");
        if total == 0.0 {
            return self.clone();
        }
        let slots = self.interior_count() + 1;
        let last_segment = self.pivots.len() - 2;
        let mut segment = 0;
        let interior = (1..slots)
            .map(|i| {
                let target = total * i as f64 / slots as f64;
                while segment < last_segment && s[segment + 1] < target {
                    segment += 1;
                }
                let length = s[segment + 1] - s[segment];
                let alpha = if length > 0.0 { ((target - s[segment]) / length).clamp(0.0, 1.0) } else { 0.0 };
                self.pivots[segment].lerp(&self.pivots[segment + 1], alpha)
            })
            .collect();
        self.with_interior(interior).expect("same dimension")
    }

    /// Unit tangent at interior pivot `i`: towards the higher-loss neighbour,
    /// `p_{i+1} - p_i` if `L(p_{i+1}) > L(p_{i-1})` and `p_i - p_{i-1}`
    /// otherwise (ties included).
    pub fn tangent(&self, i: usize, losses: &PivotLosses) -> Result<ParamVector> {
        if i == 0 || i > self.interior_count() {
            return Err(Error::InvalidConfig(format!("pivot {i} is not interior")));
        }
        if losses.len() != self.pivots.len() {
            return Err(Error::DimensionMismatch { expected: self.pivots.len(), found: losses.len() });
        }
        let (from, to) = if losses[i + 1] > losses[i - 1] {
            (&self.pivots[i], &self.pivots[i + 1])
        } else {
            (&self.pivots[i - 1], &self.pivots[i])
        };
        let length = distance(from, to);
        if length == 0.0 {
            return Err(Error::DegenerateTangent { index: i });
        }
        Ok(ParamVector::from_finite(from.iter().zip(to.iter()).map(|(a, b)| (b - a) / length).collect()))
    }
}
