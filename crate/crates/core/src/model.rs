//! Fully connected classifier with tanh hidden units and a softmax head,
//! plus the two update rules used to train it.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::softmax;
use crate::seed::{self, STREAM_INIT};

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs` rows of `inputs` columns.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: alloc::vec![0.0; inputs * outputs],
            biases: alloc::vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Network parameters. Hidden layers use tanh; the last layer emits raw scores.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Activations kept for backpropagation. `activations[0]` is the input and
/// `activations[k + 1]` is the output of layer `k`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl Trace {
    pub fn scores(&self) -> &[f64] {
        self.activations.last().expect("trace has an output layer")
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid("a network needs at least an input and an output size"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = seed::stream(seed, &[STREAM_INIT]);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = libm::sqrt(6.0 / (inputs + outputs) as f64);
                let mut layer = Layer::zeros(inputs, outputs);
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(Mlp { layers, seed })
    }

    /// All-zero parameters; every input maps to the uniform distribution.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, seed: 0 })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        sizes.push(self.classes());
        sizes
    }

    /// Checks that consecutive layers chain and buffers have their declared sizes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::shape("layer weights", layer.inputs * layer.outputs, layer.weights.len()));
            }
            if layer.biases.len() != layer.outputs {
                return Err(Error::shape("layer biases", layer.outputs, layer.biases.len()));
            }
            if let Some(next) = self.layers.get(k + 1) {
                if next.inputs != layer.outputs {
                    return Err(Error::shape("layer chaining", layer.outputs, next.inputs));
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Forward> {
        let trace = self.trace(input)?;
        let probs = trace.probs;
        let scores = trace.activations.into_iter().last().unwrap_or_default();
        Ok(Forward { scores, probs })
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_size() {
            return Err(Error::shape("model input", self.input_size(), input.len()));
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&activations[k]);
            if k != last {
                z.iter_mut().for_each(|v| *v = libm::tanh(*v));
            }
            activations.push(z);
        }
        let probs = softmax(activations.last().unwrap());
        Ok(Trace { activations, probs })
    }

    /// Accumulates parameter gradients for one trace given dL/dscores.
    pub fn backward(&self, trace: &Trace, dscores: &[f64], grads: &mut Gradients) {
        let mut delta = dscores.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.activations[k];
            let gw = &mut grads.weights[k];
            for (o, d) in delta.iter().enumerate() {
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                grads.biases[k][o] += d;
            }
            if k == 0 {
                break;
            }
            let mut prev = alloc::vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
            }
            // tanh'(z) = 1 - tanh(z)^2, and the stored activation is tanh(z)
            prev.iter_mut()
                .zip(input)
                .for_each(|(p, a)| *p *= 1.0 - a * a);
            delta = prev;
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (k, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return (k, true, index);
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return (k, false, index);
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter access, layer by layer, weights before biases.
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (k, true, i) => self.layers[k].weights[i],
            (k, false, i) => self.layers[k].biases[i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (k, true, i) => self.layers[k].weights[i] = value,
            (k, false, i) => self.layers[k].biases[i] = value,
        }
    }
}

/// Parameter-shaped accumulator, also reused for optimizer moments.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| alloc::vec![0.0; l.weights.len()]).collect(),
            biases: model.layers.iter().map(|l| alloc::vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.flat().iter().map(|g| g * g).sum())
    }

    fn matches(&self, model: &Mlp) -> bool {
        self.weights.len() == model.layers.len()
            && self.biases.len() == model.layers.len()
            && model.layers.iter().enumerate().all(|(k, l)| {
                self.weights[k].len() == l.weights.len() && self.biases[k].len() == l.biases.len()
            })
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "kind"))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    /// theta -= lr * g
    Plain,
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub rule: UpdateRule,
    pub step: u64,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
}

impl Optimizer {
    pub fn new(rule: UpdateRule, model: &Mlp) -> Self {
        Optimizer {
            rule,
            step: 0,
            first_moment: Gradients::zeros_like(model),
            second_moment: Gradients::zeros_like(model),
        }
    }

    /// Applies one update. Rejects mismatched or non-finite gradients without
    /// touching the parameters, and fails if the step overflows a parameter.
    pub fn apply(&mut self, model: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.matches(model) {
            return Err(Error::shape("gradients", model.param_count(), grads.flat().len()));
        }
        let all_finite = grads
            .weights
            .iter()
            .chain(&grads.biases)
            .all(|v| v.iter().all(|g| g.is_finite()));
        if !all_finite {
            return Err(Error::NonFinite {
                what: "gradient".into(),
            });
        }
        self.step += 1;
        match self.rule {
            UpdateRule::Plain => {
                for (k, layer) in model.layers.iter_mut().enumerate() {
                    for (w, g) in layer.weights.iter_mut().zip(&grads.weights[k]) {
                        *w -= lr * g;
                    }
                    for (b, g) in layer.biases.iter_mut().zip(&grads.biases[k]) {
                        *b -= lr * g;
                    }
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                };
                for (k, layer) in model.layers.iter_mut().enumerate() {
                    let (m, v) = (&mut self.first_moment.weights[k], &mut self.second_moment.weights[k]);
                    for (i, w) in layer.weights.iter_mut().enumerate() {
                        update(w, grads.weights[k][i], &mut m[i], &mut v[i]);
                    }
                    let (m, v) = (&mut self.first_moment.biases[k], &mut self.second_moment.biases[k]);
                    for (i, b) in layer.biases.iter_mut().enumerate() {
                        update(b, grads.biases[k][i], &mut m[i], &mut v[i]);
                    }
                }
            }
        }
        let params_finite = model
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|p| p.is_finite()));
        if !params_finite {
            return Err(Error::NonFinite {
                what: "parameters".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_uniform() {
        let model = Mlp::zeros(&[4, 3, 5]).unwrap();
        let out = model.forward(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        for p in out.probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_input_length() {
        let model = Mlp::new(&[4, 3], 1).unwrap();
        assert_eq!(
            model.forward(&[1.0, 2.0]),
            Err(Error::shape("model input", 4, 2))
        );
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Mlp::new(&[16, 32, 32, 8], 9).unwrap();
        let b = Mlp::new(&[16, 32, 32, 8], 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::new(&[16, 32, 32, 8], 10).unwrap());
        a.validate().unwrap();
        assert_eq!(a.sizes(), alloc::vec![16, 32, 32, 8]);
    }

    #[test]
    fn plain_step_arithmetic() {
        let mut model = Mlp::zeros(&[1, 1]).unwrap();
        model.layers[0].weights[0] = 1.0;
        let mut grads = Gradients::zeros_like(&model);
        grads.weights[0][0] = 0.5;
        let mut opt = Optimizer::new(UpdateRule::Plain, &model);
        opt.apply(&mut model, &grads, 0.1).unwrap();
        assert!((model.layers[0].weights[0] - 0.95).abs() < 1e-15);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        for rule in [UpdateRule::Plain, UpdateRule::default()] {
            let mut model = Mlp::new(&[3, 4, 2], 5).unwrap();
            let before = model.clone();
            let grads = Gradients::zeros_like(&model);
            let mut opt = Optimizer::new(rule, &model);
            opt.apply(&mut model, &grads, 0.01).unwrap();
            assert_eq!(model, before);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut model = Mlp::new(&[2, 2], 5).unwrap();
        let before = model.clone();
        let mut grads = Gradients::zeros_like(&model);
        grads.biases[0][1] = f64::NAN;
        let mut opt = Optimizer::new(UpdateRule::default(), &model);
        let err = opt.apply(&mut model, &grads, 0.01).unwrap_err();
        assert!(err.is_numerical());
        assert_eq!(model, before);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn flat_parameter_indexing_round_trips() {
        let mut model = Mlp::new(&[2, 3, 2], 4).unwrap();
        let n = model.param_count();
        assert_eq!(n, 2 * 3 + 3 + 3 * 2 + 2);
        model.set_param(n - 1, 7.0);
        assert_eq!(model.layers[1].biases[1], 7.0);
        model.set_param(6, -1.0);
        assert_eq!(model.layers[0].biases[0], -1.0);
        assert_eq!(model.param(6), -1.0);
    }
}
