//! Test helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use glai::matrix::Matrix;
use glai::nn::Gradients;
use glai::paths::{PathSource, PathTable};
use glai::rng::SplitMix64;
use glai::{ActivationPattern, Network, NetworkSpec};

/// Kaiming-initialized network with biases drawn from [-0.5, 0.5], so bias
/// paths carry weight.
pub fn random_net(sizes: &[usize], seed: u64) -> Network {
    let spec = NetworkSpec::new(sizes.to_vec(), seed).unwrap();
    let mut net = Network::init(&spec);
    let mut rng = SplitMix64::derive(seed, 0xb1a5);
    for b in net.biases_mut() {
        for v in b.iter_mut() {
            *v = rng.uniform(-0.5, 0.5);
        }
    }
    net
}

pub fn random_vec(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

/// One or two hidden layers, each size uniform in `1..=max[l]`.
pub fn random_sizes(rng: &mut SplitMix64, max: &[usize]) -> Vec<usize> {
    let hidden = 1 + rng.below(max.len() - 2);
    let mut sizes = vec![1 + rng.below(max[0])];
    for l in 0..hidden {
        sizes.push(1 + rng.below(max[1 + l]));
    }
    sizes.push(1 + rng.below(max[max.len() - 1]));
    sizes
}

/// Weights then biases, layer by layer.
pub fn flat_params(net: &Network) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in net.weights().iter().zip(net.biases()) {
        out.extend_from_slice(w.as_slice());
        out.extend_from_slice(b);
    }
    out
}

pub fn set_flat_params(net: &mut Network, p: &[f64]) {
    let mut k = 0;
    for l in 0..net.weights().len() {
        let w = net.weights_mut()[l].as_mut_slice();
        w.copy_from_slice(&p[k..k + w.len()]);
        k += w.len();
        let b = &mut net.biases_mut()[l];
        let n = b.len();
        b.copy_from_slice(&p[k..k + n]);
        k += n;
    }
}

pub fn flat_grads(g: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in g.d_weights.iter().zip(&g.d_biases) {
        out.extend_from_slice(w.as_slice());
        out.extend_from_slice(b);
    }
    out
}

/// Central differences of `f` at `p`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂), or 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pattern read straight off the pre-activations of a plain forward pass.
pub fn pattern_from_forward(net: &Network, x: &[f64]) -> ActivationPattern {
    let (_, cache) = net.forward(x).unwrap();
    let hidden = net.spec().hidden_sizes().len();
    ActivationPattern::new(cache.pre[..hidden].iter().map(|z| z.iter().map(|&v| v > 0.0).collect()).collect())
}

/// Counts `(full, bias)` paths by walking every route.
pub fn brute_force_counts(sizes: &[usize]) -> (u128, u128) {
    fn routes(sizes: &[usize], layer: usize) -> u128 {
        // layer indexes into sizes; the last entry is the output layer
        if layer == sizes.len() - 1 {
            return (0..sizes[layer]).map(|_| 1u128).sum();
        }
        (0..sizes[layer]).map(|_| routes(sizes, layer + 1)).sum()
    }
    let full = (0..sizes[0]).map(|_| routes(sizes, 1)).sum();
    let mut bias = 0;
    for l in 1..sizes.len() - 1 {
        bias += (0..sizes[l]).map(|_| routes(sizes, l + 1)).sum::<u128>();
    }
    bias += sizes[sizes.len() - 1] as u128;
    (full, bias)
}

/// Design row for `x` under `pat`: entry `k` is the contribution factor of
/// path `k` (input value or 1) if active, else 0.
pub fn design_row(table: &PathTable, pat: &ActivationPattern, x: &[f64]) -> Vec<f64> {
    let act = table.activity(pat).unwrap();
    table
        .paths()
        .iter()
        .zip(act)
        .map(|(p, a)| match (a, p.source) {
            (false, _) => 0.0,
            (true, PathSource::Input(i)) => x[i],
            (true, PathSource::Neuron { .. }) => 1.0,
        })
        .collect()
}

/// Solves `(XᵀX + λI) w = Xᵀy` by Gauss-Jordan elimination with full pivoting.
pub fn normal_equations(x: &Matrix, y: &[f64], ridge: f64) -> Vec<f64> {
    let (g, rhs) = gram(x, y, ridge);
    let p = rhs.len();
    let mut a: Vec<Vec<f64>> = g.into_iter().zip(&rhs).map(|(mut r, &b)| {
        r.push(b);
        r
    }).collect();
    let mut col_of: Vec<usize> = (0..p).collect();
    for k in 0..p {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for (r, row) in a.iter().enumerate().skip(k) {
            for (c, v) in row.iter().enumerate().take(p).skip(k) {
                if v.abs() > best {
                    best = v.abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        assert!(best > 0.0, "singular normal equations");
        a.swap(k, pr);
        for row in a.iter_mut() {
            row.swap(k, pc);
        }
        col_of.swap(k, pc);
        let piv = a[k][k];
        for v in a[k].iter_mut() {
            *v /= piv;
        }
        let pivot_row = a[k].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != k && row[k] != 0.0 {
                let f = row[k];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let mut w = vec![0.0; p];
    for k in 0..p {
        w[col_of[k]] = a[k][p];
    }
    w
}

/// ‖(XᵀX + λI) w − Xᵀy‖∞.
pub fn normal_residual(x: &Matrix, y: &[f64], ridge: f64, w: &[f64]) -> f64 {
    let (g, rhs) = gram(x, y, ridge);
    g.iter()
        .zip(&rhs)
        .map(|(row, b)| (row.iter().zip(w).map(|(a, v)| a * v).sum::<f64>() - b).abs())
        .fold(0.0, f64::max)
}

fn gram(x: &Matrix, y: &[f64], ridge: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = x.cols();
    let mut g = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for s in 0..x.rows() {
        let r = x.row(s);
        for i in 0..p {
            rhs[i] += r[i] * y[s];
            for j in 0..p {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += ridge;
    }
    (g, rhs)
}
