//! Structural knowledge: per-sample activation patterns captured from a
//! frozen network, and the epoch-to-epoch pattern stability trace.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{fingerprint_sizes, sgd_epochs, Gate, Network, NetworkSpec, TrainConfig};

/// Which hidden neurons are active (pre-activation > 0) for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    masks: Vec<Vec<bool>>,
}

impl ActivationPattern {
    pub fn new(masks: Vec<Vec<bool>>) -> Self {
        Self { masks }
    }

    /// Every hidden neuron set to `on`.
    pub fn uniform(hidden_sizes: &[usize], on: bool) -> Self {
        Self {
            masks: hidden_sizes.iter().map(|&h| vec![on; h]).collect(),
        }
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    #[inline]
    pub fn is_active(&self, layer: usize, neuron: usize) -> bool {
        self.masks[layer][neuron]
    }

    pub fn n_bits(&self) -> usize {
        self.masks.iter().map(Vec::len).sum()
    }

    pub fn matches(&self, hidden_sizes: &[usize]) -> bool {
        self.masks.len() == hidden_sizes.len()
            && self.masks.iter().zip(hidden_sizes).all(|(m, &h)| m.len() == h)
    }

    pub(crate) fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.matches(spec.hidden_sizes()) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "activation pattern with layer widths {:?} does not fit hidden sizes {:?}",
                self.masks.iter().map(Vec::len).collect::<Vec<_>>(),
                spec.hidden_sizes()
            )))
        }
    }
}

/// Patterns for a whole dataset, index-aligned with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    layer_sizes: Vec<usize>,
    patterns: Vec<ActivationPattern>,
}

impl PatternSet {
    pub fn new(layer_sizes: Vec<usize>, patterns: Vec<ActivationPattern>) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let hidden = &layer_sizes[1..layer_sizes.len() - 1];
        if let Some(i) = patterns.iter().position(|p| !p.matches(hidden)) {
            return Err(Error::input(format!(
                "pattern {i} does not fit hidden sizes {hidden:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            patterns,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn spec_fingerprint(&self) -> u64 {
        fingerprint_sizes(&self.layer_sizes)
    }

    pub fn patterns(&self) -> &[ActivationPattern] {
        &self.patterns
    }

    pub fn get(&self, i: usize) -> &ActivationPattern {
        &self.patterns[i]
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// `self` followed by `other`; both must come from the same architecture.
    pub fn concat(&self, other: &PatternSet) -> Result<PatternSet> {
        if self.spec_fingerprint() != other.spec_fingerprint() {
            return Err(Error::input("pattern sets come from different architectures"));
        }
        let mut patterns = self.patterns.clone();
        patterns.extend_from_slice(&other.patterns);
        Ok(PatternSet {
            layer_sizes: self.layer_sizes.clone(),
            patterns,
        })
    }

    pub fn subset(&self, idx: &[usize]) -> PatternSet {
        PatternSet {
            layer_sizes: self.layer_sizes.clone(),
            patterns: idx.iter().map(|&i| self.patterns[i].clone()).collect(),
        }
    }

    /// Errors unless the set was captured for `spec` and has one pattern per
    /// sample of a dataset of length `n`.
    pub(crate) fn check_aligned(&self, spec_fingerprint: u64, n: usize) -> Result<()> {
        if self.spec_fingerprint() != spec_fingerprint {
            return Err(Error::input(format!(
                "pattern set was captured for layer sizes {:?}, which do not match the model",
                self.layer_sizes
            )));
        }
        if self.len() != n {
            return Err(Error::input(format!(
                "pattern set has {} patterns for {n} samples",
                self.len()
            )));
        }
        Ok(())
    }
}

fn pattern_from_pre(pre: &[Vec<f64>]) -> ActivationPattern {
    let hidden = &pre[..pre.len() - 1];
    ActivationPattern {
        masks: hidden
            .iter()
            .map(|z| z.iter().map(|&v| v > 0.0).collect())
            .collect(),
    }
}

pub fn capture_pattern(net: &Network, x: &[f64]) -> Result<ActivationPattern> {
    net.check_input(x)?;
    Ok(pattern_from_pre(&net.propagate(x, &Gate::Relu).pre))
}

/// Forward pass over every sample (in parallel), patterns in dataset order.
pub fn capture_patterns(net: &Network, data: &Dataset) -> Result<PatternSet> {
    if data.n_features() != net.spec().inputs() && !data.is_empty() {
        return Err(Error::shape(
            format!("{} features", net.spec().inputs()),
            data.n_features(),
        ));
    }
    let patterns = (0..data.len())
        .into_par_iter()
        .map(|i| pattern_from_pre(&net.propagate(data.sample(i), &Gate::Relu).pre))
        .collect();
    Ok(PatternSet {
        layer_sizes: net.spec().layer_sizes().to_vec(),
        patterns,
    })
}

/// Fraction of `(sample, hidden neuron)` bits that differ between two sets.
pub fn pattern_diff(a: &PatternSet, b: &PatternSet) -> Result<f64> {
    if a.spec_fingerprint() != b.spec_fingerprint() {
        return Err(Error::input("pattern sets come from different architectures"));
    }
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "pattern sets have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let per_sample: usize = a.hidden_sizes().iter().sum();
    let total = per_sample * a.len();
    if total == 0 {
        return Ok(0.0);
    }
    let differing: usize = a
        .patterns
        .iter()
        .zip(&b.patterns)
        .map(|(p, q)| {
            p.masks
                .iter()
                .flatten()
                .zip(q.masks.iter().flatten())
                .filter(|(x, y)| x != y)
                .count()
        })
        .sum();
    Ok(differing as f64 / total as f64)
}

/// A frozen network copy that hands out activation patterns. Keeps count of
/// how many samples it has pushed through a forward pass.
#[derive(Debug)]
pub struct PathSelector {
    net: Network,
    captured: AtomicUsize,
}

impl PathSelector {
    pub fn new(net: Network) -> Self {
        Self {
            net,
            captured: AtomicUsize::new(0),
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn capture(&self, data: &Dataset) -> Result<PatternSet> {
        let ps = capture_patterns(&self.net, data)?;
        self.captured.fetch_add(data.len(), Ordering::Relaxed);
        Ok(ps)
    }

    /// Patterns for `existing`'s samples followed by `new_data`; only the new
    /// samples are forwarded.
    pub fn extend(&self, existing: &PatternSet, new_data: &Dataset) -> Result<PatternSet> {
        existing.concat(&self.capture(new_data)?)
    }

    /// Total samples forwarded so far.
    pub fn samples_captured(&self) -> usize {
        self.captured.load(Ordering::Relaxed)
    }
}

/// One row of the stability trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// 1-based.
    pub epoch: usize,
    /// Validation-set pattern change relative to the previous epoch (epoch 1
    /// compares against the freshly initialized network).
    pub diff: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

/// Trains a freshly initialized network and records, after each epoch, how
/// many validation-set activation bits flipped since the previous epoch.
pub fn convergence_trace(
    spec: &NetworkSpec,
    data: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    let mut net = Network::init(spec);
    net.check_dataset(data)?;
    net.check_dataset(val)?;
    let mut previous = capture_patterns(&net, val)?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    sgd_epochs(
        &mut net,
        data.len(),
        cfg,
        |net, i| {
            let cache = net.propagate(data.sample(i), &Gate::Relu);
            net.backprop(&cache, data.label(i), &Gate::Relu)
        },
        |epoch, net| {
            let current = capture_patterns(net, val)?;
            let diff = pattern_diff(&previous, &current)?;
            previous = current;
            let (train, validation) = (net.evaluate(data)?, net.evaluate(val)?);
            trace.push(TracePoint {
                epoch,
                diff,
                train_loss: train.loss,
                val_loss: validation.loss,
                train_accuracy: train.accuracy,
                val_accuracy: validation.accuracy,
            });
            Ok(())
        },
    )?;
    Ok(trace)
}
