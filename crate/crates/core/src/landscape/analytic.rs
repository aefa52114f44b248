//! Closed-form test surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Landscape;

/// `f(x, y) = (1 - x²)² + 2 (y - x²)²`.
///
/// Minima at `(±1, 1)` with `f = 0`, saddle at the origin with `f = 1`.
/// The minimum-energy path bends down through the origin (close to, but
/// not on, `y = x²`), while the straight segment between the minima crosses
/// `f(0, 1) = 3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

pub fn make_double_well() -> DoubleWell {
    DoubleWell
}

impl Landscape for DoubleWell {
    fn dim(&self) -> usize {
        2
    }

    fn loss_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let (x, y) = (p[0], p[1]);
        let a = 1.0 - x * x;
        let b = y - x * x;
        let loss = a * a + 2.0 * b * b;
        let dx = -4.0 * x * a - 8.0 * x * b;
        let dy = 4.0 * b;
        (loss, vec![dx, dy])
    }
}

/// `f(θ) = Σ θ_i²`.
#[derive(Debug, Clone, Copy)]
pub struct Bowl {
    pub dim: usize,
}

impl Landscape for Bowl {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        (p.iter().map(|v| v * v).sum(), p.iter().map(|v| 2.0 * v).collect())
    }
}

/// `f(θ) = c · θ`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub coefficients: Vec<f64>,
}

impl Landscape for Linear {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn loss_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        (super::dot(&self.coefficients, p), self.coefficients.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWell {
    pub center: Vec<f64>,
    pub depth: f64,
    pub width: f64,
}

/// Sum of inverted Gaussians inside a weak quadratic confinement:
///
/// `f(θ) = confinement · ‖θ‖² − Σ_k depth_k · exp(−‖θ − c_k‖² / (2 width_k²))`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWells {
    pub wells: Vec<GaussianWell>,
    #[serde(default)]
    pub confinement: f64,
}

impl GaussianWells {
    pub fn new(wells: Vec<GaussianWell>, confinement: f64) -> Self {
        GaussianWells { wells, confinement }
    }

    /// A seeded 2D surface with `count` wells placed in `[-1.5, 1.5]²`,
    /// rejecting centers closer than 0.8 to each other.
    pub fn random_2d(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wells: Vec<GaussianWell> = Vec::with_capacity(count);
        while wells.len() < count {
            let center = vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            if wells.iter().any(|w| super::distance(&w.center, &center) < 0.8) {
                continue;
            }
            wells.push(GaussianWell {
                center,
                depth: rng.gen_range(1.0..2.0),
                width: rng.gen_range(0.35..0.6),
            });
        }
        GaussianWells { wells, confinement: 0.1 }
    }
}

impl Landscape for GaussianWells {
    fn dim(&self) -> usize {
        self.wells.first().map_or(2, |w| w.center.len())
    }

    fn loss_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let mut loss = self.confinement * p.iter().map(|v| v * v).sum::<f64>();
        let mut grad: Vec<f64> = p.iter().map(|v| 2.0 * self.confinement * v).collect();
        for well in &self.wells {
            let s2 = well.width * well.width;
            let r2: f64 = p.iter().zip(&well.center).map(|(a, c)| (a - c) * (a - c)).sum();
            let e = well.depth * (-r2 / (2.0 * s2)).exp();
            loss -= e;
            for (g, (a, c)) in grad.iter_mut().zip(p.iter().zip(&well.center)) {
                *g += e * (a - c) / s2;
            }
        }
        (loss, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_reference_values() {
        let f = make_double_well();
        let e = f.evaluate(&[1.0, 1.0]).unwrap();
        assert_eq!(e.loss, 0.0);
        assert_eq!(e.gradient.as_slice(), &[0.0, 0.0]);
        let e = f.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(e.loss, 1.0);
        assert_eq!(e.gradient.as_slice(), &[0.0, 0.0]);
        assert_eq!(f.loss(&[-1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(f.loss(&[0.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn double_well_restricted_to_parabola() {
        // along y = x² the loss reduces to (1 - x²)², monotone away from 0
        let f = make_double_well();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((f.loss(&[x, x * x]).unwrap() - (1.0 - x * x).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn random_wells_are_seeded() {
        assert_eq!(GaussianWells::random_2d(4, 3), GaussianWells::random_2d(4, 3));
        assert_ne!(GaussianWells::random_2d(4, 3), GaussianWells::random_2d(4, 4));
    }

    #[test]
    fn gaussian_well_minimum_near_center() {
        let f = GaussianWells::new(
            vec![GaussianWell { center: vec![0.5, -0.5], depth: 1.0, width: 0.5 }],
            0.0,
        );
        let e = f.evaluate(&[0.5, -0.5]).unwrap();
        assert!((e.loss + 1.0).abs() < 1e-15);
        assert!(e.gradient.norm() < 1e-15);
    }
}
