//! Small fully connected network with tanh hidden layers and manual
//! backpropagation.

use rand::Rng;

/// Dense layer `y = W x + b`, `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { input, output, weights: vec![0.0; input * output], bias: vec![0.0; output] }
    }

    /// Uniform Glorot initialisation with the weights scaled by `gain`.
    pub fn random<R: Rng + ?Sized>(input: usize, output: usize, gain: f64, rng: &mut R) -> Self {
        let limit = gain * (6.0 / (input + output) as f64).sqrt();
        let weights = (0..input * output).map(|_| rng.random_range(-limit..=limit)).collect();
        Self { input, output, weights, bias: vec![0.0; output] }
    }

    fn forward_into(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        for o in 0..self.output {
            let row = &self.weights[o * self.input..(o + 1) * self.input];
            y.push(self.bias[o] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>());
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations saved by [`Mlp::forward_cached`]; `values[0]` is the input,
/// `values[k]` the output of layer `k` after its activation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn random<R: Rng + ?Sized>(dims: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::random(w[0], w[1], if k == last { output_gain } else { 1.0 }, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { layers: dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect() }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].input];
        d.extend(self.layers.iter().map(|l| l.output));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if k != last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut ForwardCache) {
        cache.values.resize(self.layers.len() + 1, Vec::new());
        cache.values[0].clear();
        cache.values[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.values.split_at_mut(k + 1);
            layer.forward_into(&done[k], &mut rest[0]);
            if k != last {
                rest[0].iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    /// Accumulates `∂L/∂θ` into `grad` (flattened like [`Mlp::params`]) given
    /// `∂L/∂output` for the forward pass held in `cache`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grad: &mut [f64]) {
        let mut delta = grad_out.to_vec();
        let offsets = self.offsets();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &cache.values[k];
            let base = offsets[k];
            let (gw, gb) = grad[base..base + layer.param_count()].split_at_mut(layer.weights.len());
            for o in 0..layer.output {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    let row = &mut gw[o * layer.input..(o + 1) * layer.input];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                }
            }
            if k == 0 {
                break;
            }
            // Through W, then through the tanh of the previous layer.
            let mut prev = vec![0.0; layer.input];
            for o in 0..layer.output {
                let d = delta[o];
                if d != 0.0 {
                    let row = &layer.weights[o * layer.input..(o + 1) * layer.input];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = acc;
                acc += l.param_count();
                o
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }

    /// Weights then bias for each layer in order.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}
