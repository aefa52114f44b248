use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpSpec;
use super::{Landscape, ParamVector};
use crate::error::{Error, Result};
use crate::optim::SgdMomentum;

/// Full-batch gradient descent settings for producing minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    1e-4
}

impl TrainConfig {
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
        Ok(())
    }
}

/// Seeded initialisation: every weight and bias uniform in
/// `[-1/√fan_in, 1/√fan_in]` of its layer.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.layer_sizes.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..w[0] * w[1] + w[1] {
            values.push(rng.gen_range(-bound..=bound));
        }
    }
    ParamVector::from_finite(values)
}

/// Seeded initialisation for analytic surfaces: every coordinate uniform
/// in `[low, high]`.
pub fn init_uniform(dim: usize, low: f64, high: f64, seed: u64) -> Result<ParamVector> {
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(Error::InvalidConfig(format!("init box [{low}, {high}] is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ParamVector::from_finite((0..dim).map(|_| rng.gen_range(low..=high)).collect()))
}

/// Runs `cfg.steps` of momentum descent from `init` and returns the
/// lowest-loss iterate seen (so the result never has higher loss than
/// `init`).
pub fn train_minimum<L: Landscape + ?Sized>(landscape: &L, init: &ParamVector, cfg: &TrainConfig) -> Result<ParamVector> {
    cfg.validate()?;
    let first = landscape.evaluate(init)?;
    let mut best = (first.loss, init.clone());
    let mut params = init.as_slice().to_vec();
    let mut grad = first.gradient.into_inner();
    let mut opt = SgdMomentum::new(params.len(), cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    for step in 1..=cfg.steps {
        let force: Vec<f64> = grad.iter().map(|g| -g).collect();
        opt.step(&mut params, &force);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { step });
        }
        let (loss, g) = landscape.loss_and_gradient(&params);
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { step });
        }
        if loss < best.0 {
            best = (loss, ParamVector::from_finite(params.clone()));
        }
        grad = g;
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{make_double_well, make_mlp, xor_dataset, Activation, LossKind, Linear};

    fn cfg(lr: f64, steps: usize) -> TrainConfig {
        TrainConfig { learning_rate: lr, momentum: 0.9, weight_decay: 1e-4, steps, seed: 0 }
    }

    #[test]
    fn double_well_converges() {
        let init = ParamVector::new(vec![0.9, 0.9]).unwrap();
        let min = train_minimum(&make_double_well(), &init, &cfg(0.05, 200)).unwrap();
        assert!(min.distance(&ParamVector::new(vec![1.0, 1.0]).unwrap()) < 1e-3, "{min:?}");
    }

    #[test]
    fn uniform_init_is_seeded_and_bounded() {
        let a = init_uniform(5, -1.5, 1.5, 3).unwrap();
        assert_eq!(a, init_uniform(5, -1.5, 1.5, 3).unwrap());
        assert_ne!(a, init_uniform(5, -1.5, 1.5, 4).unwrap());
        assert!(a.iter().all(|v| (-1.5..=1.5).contains(v)));
        assert!(init_uniform(2, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn zero_steps_returns_init() {
        let init = ParamVector::new(vec![0.3, -0.2]).unwrap();
        assert_eq!(train_minimum(&make_double_well(), &init, &cfg(0.05, 0)).unwrap(), init);
    }

    #[test]
    fn divergence_reports_step() {
        let init = ParamVector::new(vec![3.0, 3.0]).unwrap();
        let err = train_minimum(&make_double_well(), &init, &cfg(10.0, 100)).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { .. }), "{err}");
        // a linear surface runs off to infinity eventually
        let lin = Linear { coefficients: vec![1e300] };
        let err = train_minimum(&lin, &ParamVector::new(vec![0.0]).unwrap(), &cfg(1e10, 10)).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { step: 1 }), "{err}");
    }

    #[test]
    fn xor_minima_from_two_seeds() {
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Tanh, LossKind::SquaredError).unwrap();
        let net = make_mlp(spec.clone(), xor_dataset()).unwrap();
        let train = TrainConfig { learning_rate: 0.05, momentum: 0.9, weight_decay: 0.0, steps: 5000, seed: 0 };
        let mut found = Vec::new();
        for seed in 0..20 {
            let min = train_minimum(&net, &init_params(&spec, seed), &train).unwrap();
            if net.loss(&min).unwrap() < 0.01 {
                found.push(min);
            }
            if found.len() == 2 {
                break;
            }
        }
        assert_eq!(found.len(), 2);
        assert_ne!(found[0], found[1]);
    }

    #[test]
    fn init_within_fan_in_bounds() {
        let spec = MlpSpec::new(vec![4, 3, 2], Activation::Tanh, LossKind::CrossEntropy).unwrap();
        let p = init_params(&spec, 9);
        assert_eq!(p.dim(), spec.param_count());
        assert!(p[..15].iter().all(|v| v.abs() <= 0.5));
        assert!(p[15..].iter().all(|v| v.abs() <= 1.0 / 3f64.sqrt()));
        assert_eq!(init_params(&spec, 9), p);
    }
}
