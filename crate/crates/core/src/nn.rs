//! Dense ReLU network: initialization, forward/backward passes, categorical
//! cross-entropy and mini-batch SGD.
//!
//! Hidden layers apply ReLU; the output layer is affine and its logits feed
//! softmax only inside the loss. Weights for layer `l` have shape
//! `layer_sizes[l + 1] x layer_sizes[l]`.

use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Architecture `[inputs, hidden.., outputs]` plus the init seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(format!(
                "need at least [inputs, hidden, outputs], got {} layer sizes",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("layer {pos} has size 0")));
        }
        Ok(Self { layer_sizes, seed })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    /// Number of weight layers (hidden layers + 1).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Architecture fingerprint; the seed is not part of it.
    pub fn fingerprint(&self) -> u64 {
        fingerprint_sizes(&self.layer_sizes)
    }
}

/// FNV-1a over the little-endian layer sizes.
pub fn fingerprint_sizes(sizes: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &s in sizes {
        for b in (s as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// 1 for strictly positive input, 0 otherwise (including 0).
#[inline]
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Per-layer values recorded by a forward pass. `pre[l]` and `post[l]` are
/// the outputs of weight layer `l`; the last entry holds the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            d_weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += scale * other`.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += scale * y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    fn shape_matches(&self, net: &Network) -> bool {
        self.d_weights.len() == net.weights.len()
            && self.d_biases.len() == net.biases.len()
            && self
                .d_weights
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.rows() == w.rows() && g.cols() == w.cols())
            && self
                .d_biases
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Hidden-layer gate used by forward and backward passes: either the live
/// ReLU or a frozen per-neuron mask.
pub(crate) enum Gate<'a> {
    Relu,
    Masks(&'a [Vec<bool>]),
}

impl Network {
    /// Kaiming-uniform weights in `±sqrt(6 / fan_in)`, zero biases, all drawn
    /// from a SplitMix64 stream seeded with `spec.seed`, layer by layer in
    /// row-major order.
    pub fn init(spec: &NetworkSpec) -> Network {
        let mut rng = SplitMix64::new(spec.seed);
        let sizes = &spec.layer_sizes;
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        for l in 0..spec.depth() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut w = Matrix::zeros(fan_out, fan_in);
            for v in w.as_mut_slice() {
                *v = rng.uniform(-limit, limit);
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Network {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    pub fn from_parts(spec: NetworkSpec, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let sizes = spec.layer_sizes();
        if weights.len() != spec.depth() || biases.len() != spec.depth() {
            return Err(Error::shape(
                format!("{} weight and bias layers", spec.depth()),
                format!("{} weight and {} bias layers", weights.len(), biases.len()),
            ));
        }
        for l in 0..spec.depth() {
            let w = &weights[l];
            if w.rows() != sizes[l + 1] || w.cols() != sizes[l] {
                return Err(Error::shape(
                    format!("weights[{l}] {}x{}", sizes[l + 1], sizes[l]),
                    format!("{}x{}", w.rows(), w.cols()),
                ));
            }
            if biases[l].len() != sizes[l + 1] {
                return Err(Error::shape(
                    format!("biases[{l}] of length {}", sizes[l + 1]),
                    biases[l].len(),
                ));
            }
            if biases[l].iter().any(|b| !b.is_finite()) {
                return Err(Error::input(format!("non-finite bias in layer {l}")));
            }
        }
        Ok(Network {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.inputs() {
            return Err(Error::shape(
                format!("input of length {}", self.spec.inputs()),
                x.len(),
            ));
        }
        Ok(())
    }

    pub(crate) fn propagate(&self, x: &[f64], gate: &Gate<'_>) -> ForwardCache {
        let depth = self.spec.depth();
        let mut pre = Vec::with_capacity(depth);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let prev = if l == 0 { x } else { &post[l - 1] };
            let z = self.weights[l].affine(prev, &self.biases[l]);
            let a = if l + 1 == depth {
                z.clone()
            } else {
                match gate {
                    Gate::Relu => z.iter().map(|&v| relu(v)).collect(),
                    Gate::Masks(masks) => z
                        .iter()
                        .zip(&masks[l])
                        .map(|(&v, &on)| if on { v } else { 0.0 })
                        .collect(),
                }
            };
            pre.push(z);
            post.push(a);
        }
        ForwardCache {
            input: x.to_vec(),
            pre,
            post,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let cache = self.propagate(x, &Gate::Relu);
        Ok((cache.logits().to_vec(), cache))
    }

    pub(crate) fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let sizes = self.spec.layer_sizes();
        let ok = cache.input.len() == sizes[0]
            && cache.pre.len() == self.spec.depth()
            && cache.post.len() == self.spec.depth()
            && (0..self.spec.depth())
                .all(|l| cache.pre[l].len() == sizes[l + 1] && cache.post[l].len() == sizes[l + 1]);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                format!("forward cache for {:?}", sizes),
                "cache of a different architecture",
            ))
        }
    }

    pub(crate) fn backprop(&self, cache: &ForwardCache, label: usize, gate: &Gate<'_>) -> Gradients {
        let depth = self.spec.depth();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = softmax(cache.logits());
        delta[label] -= 1.0;
        for l in (0..depth).rev() {
            let prev = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let dw = &mut grads.d_weights[l];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &a) in dw.row_mut(r).iter_mut().zip(prev) {
                    *g = d * a;
                }
            }
            grads.d_biases[l].copy_from_slice(&delta);
            if l == 0 {
                break;
            }
            let mut back = self.weights[l].transpose_mul(&delta);
            match gate {
                Gate::Relu => {
                    for (b, &z) in back.iter_mut().zip(&cache.pre[l - 1]) {
                        *b *= relu_derivative(z);
                    }
                }
                Gate::Masks(masks) => {
                    for (b, &on) in back.iter_mut().zip(&masks[l - 1]) {
                        if !on {
                            *b = 0.0;
                        }
                    }
                }
            }
            delta = back;
        }
        grads
    }

    /// Exact gradient of [`loss_cce`] for the sample recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, label: usize) -> Result<Gradients> {
        self.check_cache(cache)?;
        check_label(label, self.spec.outputs())?;
        Ok(self.backprop(cache, label, &Gate::Relu))
    }

    /// `p <- p - lr * g` for every parameter.
    pub fn sgd_step(&mut self, g: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if !g.shape_matches(self) {
            return Err(Error::shape("gradients shaped like the network", "mismatched gradients"));
        }
        for (w, dw) in self.weights.iter_mut().zip(&g.d_weights) {
            for (p, d) in w.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                *p -= lr * d;
            }
        }
        for (b, db) in self.biases.iter_mut().zip(&g.d_biases) {
            for (p, d) in b.iter_mut().zip(db) {
                *p -= lr * d;
            }
        }
        Ok(())
    }

    /// Mean CCE and accuracy over a dataset.
    pub fn evaluate(&self, data: &Dataset) -> Result<Metrics> {
        self.check_dataset(data)?;
        Ok(Metrics::collect(data, |i| self.propagate(data.sample(i), &Gate::Relu).post.pop().unwrap()))
    }

    pub(crate) fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.spec.inputs() {
            return Err(Error::shape(
                format!("{} features", self.spec.inputs()),
                data.n_features(),
            ));
        }
        if data.n_classes() > self.spec.outputs() {
            return Err(Error::input(format!(
                "dataset has {} classes but the network has {} outputs",
                data.n_classes(),
                self.spec.outputs()
            )));
        }
        Ok(())
    }
}

pub fn init_network(spec: &NetworkSpec) -> Network {
    Network::init(spec)
}

pub(crate) fn check_label(label: usize, outputs: usize) -> Result<()> {
    if label >= outputs {
        return Err(Error::input(format!("label {label} out of range for {outputs} outputs")));
    }
    Ok(())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` with max-subtraction.
pub fn loss_cce(logits: &[f64], label: usize) -> Result<f64> {
    check_label(label, logits.len())?;
    Ok(cce_unchecked(logits, label))
}

pub(crate) fn cce_unchecked(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    lse - (logits[label] - max)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
}

impl Metrics {
    /// Mean CCE and argmax accuracy given a per-sample logits function.
    pub(crate) fn collect(data: &Dataset, mut logits_of: impl FnMut(usize) -> Vec<f64>) -> Metrics {
        let n = data.len();
        if n == 0 {
            return Metrics {
                loss: 0.0,
                accuracy: 0.0,
            };
        }
        let (mut loss, mut correct) = (0.0, 0usize);
        for i in 0..n {
            let logits = logits_of(i);
            let label = data.label(i);
            loss += cce_unchecked(&logits, label);
            if argmax(&logits) == label {
                correct += 1;
            }
        }
        Metrics {
            loss: loss / n as f64,
            accuracy: correct as f64 / n as f64,
        }
    }
}

/// Mini-batch SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: Metrics,
    pub val: Option<Metrics>,
}

/// Shared mini-batch loop: per epoch, shuffle from `(seed, epoch)`, average
/// per-sample gradients over each batch in index order, take one step.
pub(crate) fn sgd_epochs(
    net: &mut Network,
    n: usize,
    cfg: &TrainConfig,
    mut sample_grad: impl FnMut(&Network, usize) -> Gradients,
    mut after_epoch: impl FnMut(usize, &Network) -> Result<()>,
) -> Result<()> {
    for epoch in 0..cfg.epochs {
        for batch in batch_indices(n, cfg.batch_size, cfg.seed, epoch as u64)? {
            let mut acc = Gradients::zeros_like(net);
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                acc.accumulate(&sample_grad(net, i), scale);
            }
            net.sgd_step(&acc, cfg.lr)?;
        }
        after_epoch(epoch + 1, net)?;
    }
    Ok(())
}

/// Traditional training: mini-batch SGD on CCE with live ReLU gates.
pub fn train_epochs(
    net: &Network,
    data: &Dataset,
    cfg: &TrainConfig,
    val: Option<&Dataset>,
) -> Result<(Network, Vec<EpochRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    net.check_dataset(data)?;
    if let Some(v) = val {
        net.check_dataset(v)?;
    }
    let mut net = net.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    sgd_epochs(
        &mut net,
        data.len(),
        cfg,
        |net, i| {
            let cache = net.propagate(data.sample(i), &Gate::Relu);
            net.backprop(&cache, data.label(i), &Gate::Relu)
        },
        |epoch, net| {
            history.push(EpochRecord {
                epoch,
                train: net.evaluate(data)?,
                val: val.map(|v| net.evaluate(v)).transpose()?,
            });
            Ok(())
        },
    )?;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_net() -> Network {
        let spec = NetworkSpec::new(vec![1, 1, 1], 0).unwrap();
        Network::from_parts(
            spec,
            vec![
                Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
                Matrix::from_vec(1, 1, vec![3.0]).unwrap(),
            ],
            vec![vec![1.0], vec![0.5]],
        )
        .unwrap()
    }

    fn bits(net: &Network) -> Vec<u64> {
        net.weights
            .iter()
            .flat_map(|w| w.as_slice().iter().map(|v| v.to_bits()))
            .chain(net.biases.iter().flatten().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn init_shapes() {
        let net = Network::init(&NetworkSpec::new(vec![2, 3, 2], 7).unwrap());
        let shapes: Vec<_> = net.weights.iter().map(|w| (w.rows(), w.cols())).collect();
        assert_eq!(shapes, vec![(3, 2), (2, 3)]);
        let lens: Vec<_> = net.biases.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![3, 2]);
        assert!(net.biases.iter().flatten().all(|&b| b == 0.0));
        let limit = (6.0f64 / 2.0).sqrt();
        assert!(net.weights[0].as_slice().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::new(vec![2, 3, 2], 7).unwrap();
        assert_eq!(bits(&Network::init(&spec)), bits(&Network::init(&spec)));
        let other = NetworkSpec::new(vec![2, 3, 2], 8).unwrap();
        assert_ne!(bits(&Network::init(&spec)), bits(&Network::init(&other)));
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(NetworkSpec::new(vec![2], 1), Err(Error::Config(_))));
        assert!(matches!(NetworkSpec::new(vec![2, 3], 1), Err(Error::Config(_))));
        assert!(matches!(NetworkSpec::new(vec![2, 0, 1], 1), Err(Error::Config(_))));
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(2.5), 2.5);
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu_derivative(-1.0), 0.0);
        assert_eq!(relu_derivative(0.0), 0.0);
        assert_eq!(relu_derivative(1e-300), 1.0);
    }

    #[test]
    fn forward_hand_values() {
        let net = tiny_net();
        assert_eq!(net.forward(&[1.0]).unwrap().0, vec![9.5]);
        assert_eq!(net.forward(&[-1.0]).unwrap().0, vec![0.5]);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let mut net = Network::init(&NetworkSpec::new(vec![3, 4, 2], 1).unwrap());
        for w in net.weights_mut() {
            w.as_mut_slice().fill(0.0);
        }
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn cce_values() {
        assert!((loss_cce(&[0.0, 0.0], 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((loss_cce(&[0.0; 4], 3).unwrap() - 4f64.ln()).abs() < 1e-15);
        let big = loss_cce(&[1000.0, 0.0], 0).unwrap();
        assert!(big.is_finite() && big.abs() < 1e-300);
        assert!(matches!(loss_cce(&[0.0, 0.0], 2), Err(Error::Input(_))));
    }

    #[test]
    fn output_bias_gradient_is_softmax_minus_one_hot() {
        let net = Network::init(&NetworkSpec::new(vec![3, 4, 3], 11).unwrap());
        let (logits, cache) = net.forward(&[0.3, -0.2, 0.9]).unwrap();
        let g = net.backward(&cache, 1).unwrap();
        let p = softmax(&logits);
        for j in 0..3 {
            let expect = p[j] - if j == 1 { 1.0 } else { 0.0 };
            assert_eq!(g.d_biases[1][j], expect);
        }
    }

    #[test]
    fn dead_hidden_layer_blocks_earlier_gradients() {
        let mut net = Network::init(&NetworkSpec::new(vec![2, 3, 3, 2], 5).unwrap());
        net.biases_mut()[1].fill(-100.0);
        let (_, cache) = net.forward(&[0.1, 0.2]).unwrap();
        assert!(cache.pre[1].iter().all(|&z| z < 0.0));
        let g = net.backward(&cache, 0).unwrap();
        for l in 0..2 {
            assert!(g.d_weights[l].as_slice().iter().all(|&v| v == 0.0));
            assert!(g.d_biases[l].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = Network::init(&NetworkSpec::new(vec![2, 3, 2], 1).unwrap());
        let b = Network::init(&NetworkSpec::new(vec![2, 4, 2], 1).unwrap());
        let (_, cache) = b.forward(&[0.0, 1.0]).unwrap();
        assert!(matches!(a.backward(&cache, 0), Err(Error::Shape { .. })));
    }

    #[test]
    fn sgd_update_rule() {
        let mut net = tiny_net();
        let mut g = Gradients::zeros_like(&net);
        g.d_weights[0].set(0, 0, 0.5);
        let before = net.clone();
        net.sgd_step(&Gradients::zeros_like(&net), 0.1).unwrap();
        assert_eq!(net, before);
        let mut net1 = tiny_net();
        net1.weights_mut()[0].set(0, 0, 1.0);
        net1.sgd_step(&g, 0.1).unwrap();
        assert_eq!(net1.weights()[0].get(0, 0), 0.95);
    }

    #[test]
    fn sgd_rejects_mismatched_gradients() {
        let mut a = Network::init(&NetworkSpec::new(vec![2, 3, 2], 1).unwrap());
        let b = Network::init(&NetworkSpec::new(vec![2, 4, 2], 1).unwrap());
        assert!(matches!(
            a.sgd_step(&Gradients::zeros_like(&b), 0.1),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn two_steps_differ_from_one_summed_step() {
        // Toy objective f(p) = p^2 / 2 on the output bias, so g = p.
        // From p = 1 with lr 0.1: two steps give 1 -> 0.9 -> 0.81, while one
        // step with the summed (stale) gradients g(1) + g(1) gives 0.8.
        let grad_at = |net: &Network| {
            let mut g = Gradients::zeros_like(net);
            g.d_biases[1][0] = net.biases()[1][0];
            g
        };
        let mut two = tiny_net();
        two.biases_mut()[1][0] = 1.0;
        let mut one = two.clone();
        for _ in 0..2 {
            let g = grad_at(&two);
            two.sgd_step(&g, 0.1).unwrap();
        }
        let mut summed = grad_at(&one);
        summed.accumulate(&grad_at(&one), 1.0);
        one.sgd_step(&summed, 0.1).unwrap();
        assert!((two.biases()[1][0] - 0.81).abs() < 1e-15);
        assert!((one.biases()[1][0] - 0.8).abs() < 1e-15);
        assert_ne!(two.biases()[1][0], one.biases()[1][0]);
    }
}
