//! Full and bias paths of a dense architecture, path weights, and the
//! path-sum output
//!
//! ```text
//! o_j = Σ_{active full paths p to j} pw_p · x[source(p)]
//!     + Σ_{active bias paths p to j} pw_p
//! ```
//!
//! A full path runs from one input through exactly one neuron of every hidden
//! layer to one output. A bias path starts at a hidden neuron's bias, runs
//! through one neuron of every later hidden layer and ends at an output; each
//! output bias is a bias path with an empty route. A path is active when
//! every hidden neuron it touches (including a bias path's source) is active.

use crate::error::{Error, Result};
use crate::nn::{fingerprint_sizes, Network};
use crate::selector::{ActivationPattern, PatternSet};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathKind {
    Full,
    Bias,
}

/// Where a path starts. Bias sources are indexed by weight layer: hidden
/// layer `l` is layer `l`, the output layer is layer `L` (number of hidden
/// layers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathSource {
    Input(usize),
    Neuron { layer: usize, index: usize },
}

/// Ordered by `(kind, source, route, output)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId {
    pub kind: PathKind,
    pub source: PathSource,
    /// Hidden neuron per traversed hidden layer, in layer order.
    pub route: Vec<usize>,
    pub output: usize,
}

impl PathId {
    /// First hidden layer the route passes through.
    fn route_start(&self) -> usize {
        match self.source {
            PathSource::Input(_) => 0,
            PathSource::Neuron { layer, .. } => layer + 1,
        }
    }
}

/// Closed-form `(full, bias)` path counts, computed without overflow.
pub fn path_counts(layer_sizes: &[usize]) -> (u128, u128) {
    let l = layer_sizes.len();
    let hidden = &layer_sizes[1..l - 1];
    let outputs = layer_sizes[l - 1] as u128;
    let prod = |s: &[usize]| s.iter().fold(1u128, |acc, &h| acc.saturating_mul(h as u128));
    let full = (layer_sizes[0] as u128)
        .saturating_mul(prod(hidden))
        .saturating_mul(outputs);
    let mut bias = outputs;
    for k in 0..hidden.len() {
        bias = bias.saturating_add(prod(&hidden[k..]).saturating_mul(outputs));
    }
    (full, bias)
}

/// Canonically ordered enumeration of every path of an architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    layer_sizes: Vec<usize>,
    paths: Vec<PathId>,
    n_full: usize,
    /// Flattened hidden-neuron indices each path depends on.
    gates: Vec<u32>,
    gate_offsets: Vec<usize>,
}

impl PathTable {
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn spec_fingerprint(&self) -> u64 {
        fingerprint_sizes(&self.layer_sizes)
    }

    pub fn paths(&self) -> &[PathId] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn full_count(&self) -> usize {
        self.n_full
    }

    pub fn bias_count(&self) -> usize {
        self.paths.len() - self.n_full
    }

    #[inline]
    fn gates_of(&self, k: usize) -> &[u32] {
        &self.gates[self.gate_offsets[k]..self.gate_offsets[k + 1]]
    }

    pub(crate) fn check_pattern(&self, pat: &ActivationPattern) -> Result<()> {
        if pat.matches(self.hidden_sizes()) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "activation pattern does not fit hidden sizes {:?}",
                self.hidden_sizes()
            )))
        }
    }

    pub(crate) fn check_pattern_set(&self, ps: &PatternSet, n: usize) -> Result<()> {
        ps.check_aligned(self.spec_fingerprint(), n)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs() {
            return Err(Error::shape(format!("input of length {}", self.inputs()), x.len()));
        }
        Ok(())
    }

    /// Calls `f(k, value)` for every active path `k` in table order, where
    /// `value` is `∂o_{output(k)}/∂pw_k`: the source input for full paths and
    /// 1 for bias paths. Shapes are assumed checked.
    pub(crate) fn for_each_active(&self, pat: &ActivationPattern, x: &[f64], mut f: impl FnMut(usize, f64)) {
        let flat: Vec<bool> = pat.masks().iter().flatten().copied().collect();
        for (k, p) in self.paths.iter().enumerate() {
            if self.gates_of(k).iter().all(|&g| flat[g as usize]) {
                let v = match p.source {
                    PathSource::Input(i) => x[i],
                    PathSource::Neuron { .. } => 1.0,
                };
                f(k, v);
            }
        }
    }

    /// Activity of every path under `pat`, in table order.
    pub fn activity(&self, pat: &ActivationPattern) -> Result<Vec<bool>> {
        self.check_pattern(pat)?;
        let flat: Vec<bool> = pat.masks().iter().flatten().copied().collect();
        Ok((0..self.len())
            .map(|k| self.gates_of(k).iter().all(|&g| flat[g as usize]))
            .collect())
    }

    pub fn index_of(&self, p: &PathId) -> Option<usize> {
        self.paths.binary_search(p).ok()
    }
}

/// Enumerates all paths of `layer_sizes`, refusing when the closed-form count
/// exceeds `cap`.
pub fn enumerate_paths_with_cap(layer_sizes: &[usize], cap: usize) -> Result<PathTable> {
    if layer_sizes.len() < 3 || layer_sizes.contains(&0) {
        return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
    }
    let (full, bias) = path_counts(layer_sizes);
    let total = full.saturating_add(bias);
    if total > cap as u128 {
        return Err(Error::Capacity { count: total, cap });
    }
    let n_layers = layer_sizes.len();
    let hidden = &layer_sizes[1..n_layers - 1];
    let outputs = layer_sizes[n_layers - 1];
    let mut hidden_offsets = vec![0usize; hidden.len() + 1];
    for (l, &h) in hidden.iter().enumerate() {
        hidden_offsets[l + 1] = hidden_offsets[l] + h;
    }

    let mut paths = Vec::with_capacity(total as usize);
    for i in 0..layer_sizes[0] {
        for_each_route(hidden, |route| {
            for j in 0..outputs {
                paths.push(PathId {
                    kind: PathKind::Full,
                    source: PathSource::Input(i),
                    route: route.to_vec(),
                    output: j,
                });
            }
        });
    }
    let n_full = paths.len();
    for (l, &h) in hidden.iter().enumerate() {
        for n in 0..h {
            for_each_route(&hidden[l + 1..], |route| {
                for j in 0..outputs {
                    paths.push(PathId {
                        kind: PathKind::Bias,
                        source: PathSource::Neuron { layer: l, index: n },
                        route: route.to_vec(),
                        output: j,
                    });
                }
            });
        }
    }
    for j in 0..outputs {
        paths.push(PathId {
            kind: PathKind::Bias,
            source: PathSource::Neuron {
                layer: hidden.len(),
                index: j,
            },
            route: Vec::new(),
            output: j,
        });
    }

    let mut gates = Vec::new();
    let mut gate_offsets = Vec::with_capacity(paths.len() + 1);
    gate_offsets.push(0);
    for p in &paths {
        if let PathSource::Neuron { layer, index } = p.source {
            if layer < hidden.len() {
                gates.push((hidden_offsets[layer] + index) as u32);
            }
        }
        let start = p.route_start();
        for (k, &r) in p.route.iter().enumerate() {
            gates.push((hidden_offsets[start + k] + r) as u32);
        }
        gate_offsets.push(gates.len());
    }

    Ok(PathTable {
        layer_sizes: layer_sizes.to_vec(),
        paths,
        n_full,
        gates,
        gate_offsets,
    })
}

pub fn enumerate_paths(layer_sizes: &[usize]) -> Result<PathTable> {
    enumerate_paths_with_cap(layer_sizes, DEFAULT_PATH_CAP)
}

/// Odometer over one neuron per layer, last layer fastest.
fn for_each_route(layers: &[usize], mut f: impl FnMut(&[usize])) {
    let mut route = vec![0usize; layers.len()];
    loop {
        f(&route);
        let mut k = layers.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            route[k] += 1;
            if route[k] < layers[k] {
                break;
            }
            route[k] = 0;
        }
    }
}

fn check_path(sizes: &[usize], p: &PathId) -> Result<()> {
    let n_hidden = sizes.len() - 2;
    let invalid = |why: &str| Err(Error::input(format!("invalid path {p:?}: {why}")));
    match (p.kind, p.source) {
        (PathKind::Full, PathSource::Input(i)) => {
            if i >= sizes[0] {
                return invalid("input index out of range");
            }
        }
        (PathKind::Bias, PathSource::Neuron { layer, index }) => {
            if layer > n_hidden || index >= sizes[layer + 1] {
                return invalid("bias source out of range");
            }
            if layer == n_hidden && index != p.output {
                return invalid("output bias must end at its own output");
            }
        }
        _ => return invalid("kind does not match source"),
    }
    let start = p.route_start();
    if p.route.len() != n_hidden.saturating_sub(start) {
        return invalid("route length does not match the layers it must traverse");
    }
    for (k, &r) in p.route.iter().enumerate() {
        if r >= sizes[start + k + 1] {
            return invalid("route index out of range");
        }
    }
    if p.output >= sizes[sizes.len() - 1] {
        return invalid("output index out of range");
    }
    Ok(())
}

/// Product of the weights along `p`, times the source bias for bias paths.
pub fn path_weight(net: &Network, p: &PathId) -> Result<f64> {
    check_path(net.spec().layer_sizes(), p)?;
    Ok(path_weight_unchecked(net, p))
}

fn path_weight_unchecked(net: &Network, p: &PathId) -> f64 {
    let (w, b) = (net.weights(), net.biases());
    let start = p.route_start();
    let (mut value, mut prev) = match p.source {
        PathSource::Input(i) => (1.0, i),
        PathSource::Neuron { layer, index } => (b[layer][index], index),
    };
    for (k, &r) in p.route.iter().enumerate() {
        value *= w[start + k].get(r, prev);
        prev = r;
    }
    let last = w.len() - 1;
    let is_output_bias = matches!(p.source, PathSource::Neuron { layer, .. } if layer == last);
    if !is_output_bias {
        value *= w[last].get(p.output, prev);
    }
    value
}

/// Whether every hidden neuron on `p` (and a bias path's source) is active.
pub fn path_active(p: &PathId, pat: &ActivationPattern) -> Result<bool> {
    let start = p.route_start();
    let n_hidden = pat.masks().len();
    let in_range = |layer: usize, n: usize| layer < n_hidden && n < pat.masks()[layer].len();
    if let PathSource::Neuron { layer, index } = p.source {
        if layer < n_hidden {
            if !in_range(layer, index) {
                return Err(Error::input(format!("path {p:?} does not fit the pattern")));
            }
            if !pat.is_active(layer, index) {
                return Ok(false);
            }
        }
    }
    let mut active = true;
    for (k, &r) in p.route.iter().enumerate() {
        if !in_range(start + k, r) {
            return Err(Error::input(format!("path {p:?} does not fit the pattern")));
        }
        active &= pat.is_active(start + k, r);
    }
    Ok(active)
}

/// One independent weight per path: the single-layer model whose outputs
/// are sums over active paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    table: std::sync::Arc<PathTable>,
    pw: Vec<f64>,
}

impl LinearEstimator {
    pub fn new(table: std::sync::Arc<PathTable>, pw: Vec<f64>) -> Result<Self> {
        if pw.len() != table.len() {
            return Err(Error::shape(format!("{} path weights", table.len()), pw.len()));
        }
        if let Some(k) = pw.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite path weight at index {k}")));
        }
        Ok(Self { table, pw })
    }

    pub fn zeros(table: std::sync::Arc<PathTable>) -> Self {
        let pw = vec![0.0; table.len()];
        Self { table, pw }
    }

    pub fn table(&self) -> &PathTable {
        &self.table
    }

    pub fn shared_table(&self) -> std::sync::Arc<PathTable> {
        self.table.clone()
    }

    pub fn pw(&self) -> &[f64] {
        &self.pw
    }

    pub fn pw_mut(&mut self) -> &mut [f64] {
        &mut self.pw
    }

    pub fn outputs(&self) -> usize {
        self.table.outputs()
    }

    pub fn eval(&self, pat: &ActivationPattern, x: &[f64]) -> Result<Vec<f64>> {
        eval_eq1(self, pat, x)
    }

    pub(crate) fn eval_unchecked(&self, pat: &ActivationPattern, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        let paths = self.table.paths();
        self.table.for_each_active(pat, x, |k, v| {
            out[paths[k].output] += self.pw[k] * v;
        });
        out
    }
}

/// `pw[k] = path_weight(net, table[k])`.
pub fn init_estimator_from_network(net: &Network) -> Result<LinearEstimator> {
    init_estimator_with_cap(net, DEFAULT_PATH_CAP)
}

pub fn init_estimator_with_cap(net: &Network, cap: usize) -> Result<LinearEstimator> {
    let table = enumerate_paths_with_cap(net.spec().layer_sizes(), cap)?;
    let pw = table.paths().iter().map(|p| path_weight_unchecked(net, p)).collect();
    Ok(LinearEstimator {
        table: std::sync::Arc::new(table),
        pw,
    })
}

/// Path-sum outputs of `est` for input `x` gated by `pat`.
pub fn eval_eq1(est: &LinearEstimator, pat: &ActivationPattern, x: &[f64]) -> Result<Vec<f64>> {
    est.table.check_pattern(pat)?;
    est.table.check_input(x)?;
    Ok(est.eval_unchecked(pat, x))
}

/// Active full paths from input `i` to output `j`.
pub fn count_active_paths(table: &PathTable, pat: &ActivationPattern, i: usize, j: usize) -> Result<usize> {
    table.check_pattern(pat)?;
    if i >= table.inputs() || j >= table.outputs() {
        return Err(Error::input(format!(
            "input {i} / output {j} out of range for {:?}",
            table.layer_sizes()
        )));
    }
    let activity = table.activity(pat)?;
    Ok(table.paths()[..table.full_count()]
        .iter()
        .zip(&activity)
        .filter(|(p, &on)| on && p.source == PathSource::Input(i) && p.output == j)
        .count())
}

/// Fraction of `(sample, path)` pairs whose activity differs; the path-level
/// counterpart of [`crate::selector::pattern_diff`].
pub fn path_pattern_diff(table: &PathTable, a: &PatternSet, b: &PatternSet) -> Result<f64> {
    table.check_pattern_set(a, a.len())?;
    table.check_pattern_set(b, a.len())?;
    if a.is_empty() || table.is_empty() {
        return Ok(0.0);
    }
    let mut changed = 0usize;
    for (p, q) in a.patterns().iter().zip(b.patterns()) {
        let (x, y) = (table.activity(p)?, table.activity(q)?);
        changed += x.iter().zip(&y).filter(|(u, v)| u != v).count();
    }
    Ok(changed as f64 / (a.len() * table.len()) as f64)
}
