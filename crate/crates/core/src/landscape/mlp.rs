//! Fully connected network with hand-written backpropagation.
//!
//! Parameters are stored layer by layer: for each layer the weight matrix
//! (row-major, `fan_out × fan_in`) followed by the bias vector. Hidden
//! layers apply the activation; the output layer is affine.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Targets};
use super::{Landscape, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax cross-entropy against class indices, in nats.
    CrossEntropy,
    /// Sum of squared output errors per sample.
    SquaredError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub loss_kind: LossKind,
}

#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    weights: usize,
    biases: usize,
    fan_in: usize,
    fan_out: usize,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, loss_kind: LossKind) -> Result<Self> {
        let spec = MlpSpec { layer_sizes, activation, loss_kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig("an MLP needs at least an input and an output layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.loss_kind == LossKind::CrossEntropy && self.output_dim() < 2 {
            return Err(Error::InvalidConfig("cross-entropy needs at least two outputs".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layout(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let l = LayerLayout { weights: offset, biases: offset + w[0] * w[1], fan_in: w[0], fan_out: w[1] };
                offset += w[0] * w[1] + w[1];
                l
            })
            .collect()
    }
}

/// Mean loss of an MLP over a full dataset.
#[derive(Debug, Clone)]
pub struct MlpLandscape {
    spec: MlpSpec,
    data: Dataset,
    layout: Vec<LayerLayout>,
}

pub fn make_mlp(spec: MlpSpec, data: Dataset) -> Result<MlpLandscape> {
    MlpLandscape::new(spec, data)
}

struct ForwardPass {
    /// Per layer (including the input): activations.
    activations: Vec<Vec<f64>>,
    /// Per weight layer: pre-activations.
    preactivations: Vec<Vec<f64>>,
}

impl MlpLandscape {
    pub fn new(spec: MlpSpec, data: Dataset) -> Result<Self> {
        spec.validate()?;
        if data.input_dim() != spec.input_dim() {
            return Err(Error::DimensionMismatch { expected: spec.input_dim(), found: data.input_dim() });
        }
        match (spec.loss_kind, data.targets()) {
            (LossKind::CrossEntropy, Targets::Classes(c)) => {
                if let Some(&bad) = c.iter().find(|&&k| k >= spec.output_dim()) {
                    return Err(Error::InvalidConfig(format!(
                        "class {bad} exceeds output width {}",
                        spec.output_dim()
                    )));
                }
            }
            (LossKind::SquaredError, Targets::Values { width, .. }) => {
                if *width != spec.output_dim() {
                    return Err(Error::DimensionMismatch { expected: spec.output_dim(), found: *width });
                }
            }
            _ => return Err(Error::InvalidConfig("targets do not match the loss kind".into())),
        }
        let layout = spec.layout();
        Ok(MlpLandscape { spec, data, layout })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Landscape over the given sample indices only.
    ///
    /// This is the mini-batch hook; every other landscape evaluates the
    /// full dataset.
    pub fn with_batch(&self, indices: &[usize]) -> Result<MlpLandscape> {
        MlpLandscape::new(self.spec.clone(), self.data.subset(indices)?)
    }

    /// Seeded random batch of `size` distinct samples.
    pub fn sample_batch(&self, size: usize, seed: u64) -> Result<MlpLandscape> {
        let mut indices: Vec<usize> = (0..self.data.len()).collect();
        indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        indices.truncate(size.max(1));
        indices.sort_unstable();
        self.with_batch(&indices)
    }

    fn forward(&self, params: &[f64], input: &[f64]) -> ForwardPass {
        let depth = self.layout.len();
        let mut activations = Vec::with_capacity(depth + 1);
        let mut preactivations = Vec::with_capacity(depth);
        activations.push(input.to_vec());
        for (l, layer) in self.layout.iter().enumerate() {
            let prev = &activations[l];
            let w = &params[layer.weights..layer.biases];
            let b = &params[layer.biases..layer.biases + layer.fan_out];
            let z: Vec<f64> = (0..layer.fan_out)
                .map(|j| {
                    let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                    b[j] + super::dot(row, prev)
                })
                .collect();
            let a = if l + 1 < depth { z.iter().map(|&v| self.spec.activation.apply(v)).collect() } else { z.clone() };
            preactivations.push(z);
            activations.push(a);
        }
        ForwardPass { activations, preactivations }
    }

    /// Network outputs for one input.
    pub fn predict(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        self.forward(params, input).activations.pop().expect("non-empty")
    }

    /// Per-sample loss and its gradient with respect to the outputs.
    fn output_loss(&self, sample: usize, output: &[f64]) -> (f64, Vec<f64>) {
        match self.data.targets() {
            Targets::Classes(classes) => {
                let class = classes[sample];
                let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = output.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let loss = sum.ln() + max - output[class];
                let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
                grad[class] -= 1.0;
                (loss, grad)
            }
            Targets::Values { values, width } => {
                let target = &values[sample * width..(sample + 1) * width];
                let diff: Vec<f64> = output.iter().zip(target).map(|(y, t)| y - t).collect();
                (diff.iter().map(|d| d * d).sum(), diff.iter().map(|d| 2.0 * d).collect())
            }
        }
    }

    /// Number of samples the network gets wrong.
    ///
    /// Class targets use the arg-max output. Single-column real targets are
    /// read as 0/1 labels thresholded at 0.5; wider real targets compare
    /// arg-maxes.
    pub fn misclassified(&self, params: &[f64]) -> usize {
        (0..self.data.len())
            .filter(|&i| {
                let out = self.predict(params, self.data.input(i));
                match self.data.targets() {
                    Targets::Classes(c) => argmax(&out) != c[i],
                    Targets::Values { values, width: 1 } => (out[0] > 0.5) != (values[i] > 0.5),
                    Targets::Values { values, width } => argmax(&out) != argmax(&values[i * width..(i + 1) * width]),
                }
            })
            .count()
    }

    /// Smallest |pre-activation| of any hidden unit over the dataset; ReLU
    /// gradients are only classical away from zero.
    pub fn min_hidden_preactivation(&self, params: &[f64]) -> f64 {
        let hidden = self.layout.len() - 1;
        (0..self.data.len())
            .flat_map(|i| {
                let pass = self.forward(params, self.data.input(i));
                pass.preactivations.into_iter().take(hidden).flatten().collect::<Vec<_>>()
            })
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

impl Landscape for MlpLandscape {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.data.len();
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; params.len()];
        for i in 0..n {
            let pass = self.forward(params, self.data.input(i));
            let output = pass.activations.last().expect("non-empty");
            let (loss, dout) = self.output_loss(i, output);
            total += loss;

            let mut delta: Vec<f64> = dout.iter().map(|d| d * scale).collect();
            for l in (0..self.layout.len()).rev() {
                let layer = self.layout[l];
                let prev = &pass.activations[l];
                for j in 0..layer.fan_out {
                    let row = layer.weights + j * layer.fan_in;
                    for k in 0..layer.fan_in {
                        grad[row + k] += delta[j] * prev[k];
                    }
                    grad[layer.biases + j] += delta[j];
                }
                if l == 0 {
                    break;
                }
                let w = &params[layer.weights..layer.biases];
                let z_prev = &pass.preactivations[l - 1];
                delta = (0..layer.fan_in)
                    .map(|k| {
                        let back: f64 = (0..layer.fan_out).map(|j| w[j * layer.fan_in + k] * delta[j]).sum();
                        back * self.spec.activation.derivative(z_prev[k], prev[k])
                    })
                    .collect();
            }
        }
        (total * scale, grad)
    }
}

/// Relabels the units of hidden layer `layer` (1-based index into
/// `layer_sizes`, excluding input and output): new unit `j` is old unit
/// `perm[j]`. Incoming weights, biases and outgoing weights move together,
/// so the network function is unchanged.
pub fn permute_hidden_units(params: &ParamVector, spec: &MlpSpec, layer: usize, perm: &[usize]) -> Result<ParamVector> {
    spec.validate()?;
    if params.dim() != spec.param_count() {
        return Err(Error::DimensionMismatch { expected: spec.param_count(), found: params.dim() });
    }
    if layer == 0 || layer >= spec.layer_sizes.len() - 1 {
        return Err(Error::InvalidPermutation(format!("layer {layer} is not a hidden layer")));
    }
    let width = spec.layer_sizes[layer];
    let mut seen = vec![false; width];
    if perm.len() != width || perm.iter().any(|&p| p >= width || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidPermutation(format!("{perm:?} is not a permutation of 0..{width}")));
    }

    let layout = spec.layout();
    let incoming = layout[layer - 1];
    let outgoing = layout[layer];
    let src = params.as_slice();
    let mut out = src.to_vec();
    for (j, &from) in perm.iter().enumerate() {
        let (dst_row, src_row) = (incoming.weights + j * incoming.fan_in, incoming.weights + from * incoming.fan_in);
        out[dst_row..dst_row + incoming.fan_in].copy_from_slice(&src[src_row..src_row + incoming.fan_in]);
        out[incoming.biases + j] = src[incoming.biases + from];
        for r in 0..outgoing.fan_out {
            let row = outgoing.weights + r * outgoing.fan_in;
            out[row + j] = src[row + from];
        }
    }
    Ok(ParamVector::from_finite(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{init_params, two_cluster_dataset, xor_dataset};

    fn xor_net(hidden: usize) -> MlpLandscape {
        let spec = MlpSpec::new(vec![2, hidden, 1], Activation::Tanh, LossKind::SquaredError).unwrap();
        make_mlp(spec, xor_dataset()).unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        let spec = MlpSpec::new(vec![2, 8, 8, 2], Activation::Tanh, LossKind::CrossEntropy).unwrap();
        assert_eq!(spec.param_count(), 2 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(MlpSpec::new(vec![2], Activation::Tanh, LossKind::SquaredError).is_err());
        assert!(MlpSpec::new(vec![2, 0, 1], Activation::Tanh, LossKind::SquaredError).is_err());
        assert!(MlpSpec::new(vec![2, 3, 1], Activation::Tanh, LossKind::CrossEntropy).is_err());
        let spec = MlpSpec::new(vec![3, 2, 1], Activation::Tanh, LossKind::SquaredError).unwrap();
        assert!(make_mlp(spec, xor_dataset()).is_err());
        let spec = MlpSpec::new(vec![2, 2, 2], Activation::Tanh, LossKind::CrossEntropy).unwrap();
        assert!(make_mlp(spec, xor_dataset()).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        // zero weights, biases equal to the (constant) target
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Tanh, LossKind::SquaredError).unwrap();
        let data = Dataset::new(vec![0.0, 0.0, 1.0, 1.0], 2, Targets::Values { values: vec![0.5, 0.5], width: 1 }).unwrap();
        let net = make_mlp(spec, data).unwrap();
        let mut p = vec![0.0; net.dim()];
        *p.last_mut().unwrap() = 0.5;
        assert_eq!(net.loss(&p).unwrap(), 0.0);
    }

    #[test]
    fn untrained_cross_entropy_near_log2() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Tanh, LossKind::CrossEntropy).unwrap();
        let net = make_mlp(spec.clone(), two_cluster_dataset(100, 5)).unwrap();
        for seed in 0..5 {
            let p = init_params(&spec, seed);
            let loss = net.loss(&p).unwrap();
            assert!((loss - 2f64.ln()).abs() < 0.3, "seed {seed}: {loss}");
        }
    }

    #[test]
    fn permutation_preserves_loss() {
        let net = xor_net(3);
        let p = init_params(net.spec(), 11);
        let q = permute_hidden_units(&p, net.spec(), 1, &[2, 0, 1]).unwrap();
        assert_ne!(p, q);
        let (a, b) = (net.loss(&p).unwrap(), net.loss(&q).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn permutation_identity_and_inverse() {
        let net = xor_net(3);
        let p = init_params(net.spec(), 2);
        assert_eq!(permute_hidden_units(&p, net.spec(), 1, &[0, 1, 2]).unwrap(), p);
        let q = permute_hidden_units(&p, net.spec(), 1, &[1, 2, 0]).unwrap();
        // inverse of [1, 2, 0] is [2, 0, 1]
        assert_eq!(permute_hidden_units(&q, net.spec(), 1, &[2, 0, 1]).unwrap(), p);
    }

    #[test]
    fn permutation_errors() {
        let net = xor_net(2);
        let p = init_params(net.spec(), 0);
        assert!(permute_hidden_units(&p, net.spec(), 0, &[0, 1]).is_err());
        assert!(permute_hidden_units(&p, net.spec(), 2, &[0, 1]).is_err());
        assert!(permute_hidden_units(&p, net.spec(), 1, &[0, 0]).is_err());
        assert!(permute_hidden_units(&p, net.spec(), 1, &[0, 1, 2]).is_err());
    }

    #[test]
    fn batch_hook_is_deterministic() {
        let spec = MlpSpec::new(vec![2, 4, 2], Activation::Tanh, LossKind::CrossEntropy).unwrap();
        let net = make_mlp(spec.clone(), two_cluster_dataset(50, 1)).unwrap();
        let a = net.sample_batch(10, 3).unwrap();
        let b = net.sample_batch(10, 3).unwrap();
        let p = init_params(&spec, 4);
        assert_eq!(a.data().len(), 10);
        assert_eq!(a.loss(&p).unwrap().to_bits(), b.loss(&p).unwrap().to_bits());
        let full = net.with_batch(&(0..50).collect::<Vec<_>>()).unwrap();
        assert_eq!(full.loss(&p).unwrap().to_bits(), net.loss(&p).unwrap().to_bits());
    }
}
