//! SGD with momentum and decoupled weight decay.

/// One parameter block's optimizer state.
///
/// Each step first shrinks the parameters by `γλθ`, then applies the
/// heavy-ball update `v ← μv + F`, `θ ← θ + γv` along the force `F`
/// (the negative gradient for plain descent).
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<f64>,
}

impl SgdMomentum {
    pub fn new(dim: usize, learning_rate: f64, momentum: f64, weight_decay: f64) -> Self {
        SgdMomentum { learning_rate, momentum, weight_decay, velocity: vec![0.0; dim] }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn step(&mut self, params: &mut [f64], force: &[f64]) {
        debug_assert_eq!(params.len(), self.velocity.len());
        let decay = self.learning_rate * self.weight_decay;
        for ((p, v), f) in params.iter_mut().zip(self.velocity.iter_mut()).zip(force) {
            *p -= decay * *p;
            *v = self.momentum * *v + f;
            *p += self.learning_rate * *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step_without_momentum() {
        let mut opt = SgdMomentum::new(2, 0.1, 0.0, 0.0);
        let mut p = [1.0, 2.0];
        opt.step(&mut p, &[1.0, -1.0]);
        assert_eq!(p, [1.1, 1.9]);
    }

    #[test]
    fn momentum_accumulates() {
        let mut opt = SgdMomentum::new(1, 1.0, 0.5, 0.0);
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]);
        opt.step(&mut p, &[1.0]);
        assert_eq!(opt.velocity(), &[1.5]);
        assert_eq!(p, [2.5]);
    }

    #[test]
    fn decay_shrinks_towards_origin() {
        let mut opt = SgdMomentum::new(1, 0.5, 0.9, 0.1);
        let mut p = [2.0];
        opt.step(&mut p, &[0.0]);
        assert_eq!(p, [2.0 - 0.5 * 0.1 * 2.0]);
    }
}
