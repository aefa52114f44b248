//! Nudged forces and the string-method relaxation loop.
//!
//! Each iteration redistributes the pivots to equal arc length, evaluates
//! loss and gradient at every interior pivot, and moves each pivot along
//! the component of the negative gradient perpendicular to its tangent.
//! With a positive spring constant the classic spring force along the
//! tangent is added on top.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, PivotLosses};
use crate::error::{Error, Result};
use crate::landscape::{dot, Landscape, ParamVector};
use crate::optim::SgdMomentum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NebConfig {
    pub steps: usize,
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub spring_constant: f64,
}

pub(crate) fn default_momentum() -> f64 {
    0.9
}

pub(crate) fn default_weight_decay() -> f64 {
    1e-4
}

impl Default for NebConfig {
    fn default() -> Self {
        NebConfig { steps: 1000, learning_rate: 0.1, momentum: 0.9, weight_decay: 1e-4, spring_constant: 0.0 }
    }
}

impl NebConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!("weight decay {} must be non-negative", self.weight_decay)));
        }
        if !(self.spring_constant >= 0.0 && self.spring_constant.is_finite()) {
            return Err(Error::InvalidConfig(format!("spring constant {} must be non-negative", self.spring_constant)));
        }
        Ok(())
    }
}

/// Momentum buffers, one per interior pivot. Buffers follow the pivot
/// index; they start at zero for every relaxation call.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pivots: Vec<SgdMomentum>,
}

impl OptimizerState {
    pub fn new(chain: &Chain, cfg: &NebConfig) -> Self {
        let make = || SgdMomentum::new(chain.dim(), cfg.learning_rate, cfg.momentum, cfg.weight_decay);
        OptimizerState { pivots: (0..chain.interior_count()).map(|_| make()).collect() }
    }

    pub fn velocity(&self, interior_index: usize) -> &[f64] {
        self.pivots[interior_index].velocity()
    }
}

/// `Σ_{i=1..N} L(p_i) + Σ_{i=0..N} (k/2)‖p_{i+1} − p_i‖²`. Diagnostic only.
pub fn elastic_band_energy(chain: &Chain, losses: &PivotLosses, k: f64) -> f64 {
    let interior: f64 = losses[1..losses.len() - 1].iter().sum();
    let springs: f64 = chain
        .pivots()
        .windows(2)
        .map(|w| {
            let d = w[0].distance(&w[1]);
            0.5 * k * d * d
        })
        .sum();
    interior + springs
}

/// `−(g − (g·τ̂)τ̂)`: the loss force with its tangential part removed.
pub fn loss_force_perp(gradient: &[f64], tau: &[f64]) -> Result<ParamVector> {
    if gradient.len() != tau.len() {
        return Err(Error::DimensionMismatch { expected: tau.len(), found: gradient.len() });
    }
    let norm = dot(tau, tau).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitTangent { norm });
    }
    let along = dot(gradient, tau);
    let mut force: Vec<f64> = gradient.iter().zip(tau).map(|(g, t)| -(g - along * t)).collect();
    // second pass removes the rounding residue left along τ̂
    let residue = dot(&force, tau);
    if residue != 0.0 {
        force.iter_mut().zip(tau).for_each(|(f, t)| *f -= residue * t);
    }
    Ok(ParamVector::from_finite(force))
}

/// `−k(‖p_i − p_{i−1}‖ − ‖p_{i+1} − p_i‖) τ̂`: pushes pivot `i` towards
/// the longer of its two neighbouring gaps, along the tangent only.
pub fn spring_force_parallel(chain: &Chain, i: usize, k: f64, tau: &[f64]) -> ParamVector {
    let p = chain.pivots();
    let magnitude = -k * (p[i].distance(&p[i - 1]) - p[i + 1].distance(&p[i]));
    ParamVector::from_finite(tau.iter().map(|t| magnitude * t).collect())
}

/// Total nudged force on interior pivot `i` and the tangent it was built
/// from.
pub fn nudged_force(chain: &Chain, i: usize, losses: &PivotLosses, gradient: &[f64], k: f64) -> Result<(ParamVector, ParamVector)> {
    let tau = chain.tangent(i, losses)?;
    let mut force = loss_force_perp(gradient, &tau)?;
    if k > 0.0 {
        let spring = spring_force_parallel(chain, i, k, &tau);
        force = ParamVector::from_finite(force.iter().zip(spring.iter()).map(|(a, b)| a + b).collect());
    }
    Ok((tau, force))
}

/// Result of [`neb_relax`].
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub chain: Chain,
    /// Maximum interior pivot loss at each iteration, measured after
    /// redistribution and before the update.
    pub max_loss_trace: Vec<f64>,
}

/// Loss and gradient at every interior pivot, evaluated in parallel; the
/// result order follows the pivots regardless of worker count.
fn evaluate_interior<L: Landscape + ?Sized>(chain: &Chain, landscape: &L) -> Vec<(f64, Vec<f64>)> {
    chain.interior().par_iter().map(|p| landscape.loss_and_gradient(p)).collect()
}

/// Runs `cfg.steps` string-method iterations: redistribute, evaluate,
/// then one momentum step per interior pivot along its nudged force.
pub fn neb_relax<L: Landscape + ?Sized>(chain: &Chain, landscape: &L, cfg: &NebConfig) -> Result<Relaxation> {
    cfg.validate()?;
    if chain.dim() != landscape.dim() {
        return Err(Error::DimensionMismatch { expected: landscape.dim(), found: chain.dim() });
    }
    let start_loss = landscape.loss(chain.start())?;
    let end_loss = landscape.loss(chain.end())?;
    let mut trace = Vec::with_capacity(cfg.steps);
    if chain.interior_count() == 0 || cfg.steps == 0 {
        return Ok(Relaxation { chain: chain.clone(), max_loss_trace: trace });
    }
    if chain.total_length() == 0.0 {
        // coincident endpoints and pivots: nothing can move
        let max = evaluate_interior(chain, landscape).into_iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::RelaxationDiverged { iteration: 1 });
        }
        trace.resize(cfg.steps, max);
        return Ok(Relaxation { chain: chain.clone(), max_loss_trace: trace });
    }

    let mut state = OptimizerState::new(chain, cfg);
    let mut current = chain.clone();
    for iteration in 1..=cfg.steps {
        let spread = current.redistribute();
        let evals = evaluate_interior(&spread, landscape);
        let mut losses = Vec::with_capacity(spread.len());
        losses.push(start_loss);
        for (loss, grad) in &evals {
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::RelaxationDiverged { iteration });
            }
            losses.push(*loss);
        }
        losses.push(end_loss);
        trace.push(evals.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max));
        let losses = PivotLosses::new(losses)?;

        let updated: Vec<ParamVector> = state
            .pivots
            .par_iter_mut()
            .zip(evals.par_iter())
            .enumerate()
            .map(|(j, (opt, (_, grad)))| {
                let i = j + 1;
                let (_, force) = nudged_force(&spread, i, &losses, grad, cfg.spring_constant)?;
                let mut x = spread.pivots()[i].as_slice().to_vec();
                opt.step(&mut x, &force);
                ParamVector::new(x).map_err(|_| Error::RelaxationDiverged { iteration })
            })
            .collect::<Result<_>>()?;
        current = spread.with_interior(updated)?;
    }
    Ok(Relaxation { chain: current, max_loss_trace: trace })
}
