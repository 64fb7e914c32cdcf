//! Training, merging and distributed re-training of [`LinearEstimator`]s.
//!
//! With the activation patterns frozen, every output is linear in the path
//! weights, so estimators trained on disjoint data can be combined by a
//! parameter-wise weighted average.

use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::linalg::ridge_least_squares;
use crate::matrix::Matrix;
use crate::nn::{fingerprint_sizes, softmax, EpochRecord, Metrics, TrainConfig};
use crate::paths::{LinearEstimator, PathTable};
use crate::selector::PatternSet;

pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Softmax cross-entropy on the outputs.
    Cce,
    /// `Σ_j (o_j − onehot_j)²` per sample.
    Mse,
}

impl Loss {
    pub fn per_sample(self, outputs: &[f64], label: usize) -> f64 {
        match self {
            Loss::Cce => crate::nn::cce_unchecked(outputs, label),
            Loss::Mse => outputs
                .iter()
                .enumerate()
                .map(|(j, &o)| {
                    let t = if j == label { 1.0 } else { 0.0 };
                    (o - t) * (o - t)
                })
                .sum(),
        }
    }

    /// `∂loss/∂o`.
    pub fn output_gradient(self, outputs: &[f64], label: usize) -> Vec<f64> {
        match self {
            Loss::Cce => {
                let mut g = softmax(outputs);
                g[label] -= 1.0;
                g
            }
            Loss::Mse => outputs
                .iter()
                .enumerate()
                .map(|(j, &o)| 2.0 * (o - if j == label { 1.0 } else { 0.0 }))
                .collect(),
        }
    }
}

/// How a node turns `(estimator, data, patterns)` into a trained estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trainer {
    Sgd { config: TrainConfig, loss: Loss },
    Direct { ridge: f64 },
}

impl Trainer {
    pub fn train(&self, start: &LinearEstimator, data: &Dataset, ps: &PatternSet) -> Result<LinearEstimator> {
        match *self {
            Trainer::Sgd { config, loss } => {
                Ok(estimator_sgd_train(start, data, ps, &config, loss, None)?.0)
            }
            Trainer::Direct { ridge } => estimator_direct_solve(start.shared_table(), data, ps, ridge),
        }
    }
}

fn check_alignment(table: &PathTable, data: &Dataset, ps: &PatternSet) -> Result<()> {
    if data.n_features() != table.inputs() && !data.is_empty() {
        return Err(Error::shape(format!("{} features", table.inputs()), data.n_features()));
    }
    if data.n_classes() > table.outputs() {
        return Err(Error::input(format!(
            "dataset has {} classes but the estimator has {} outputs",
            data.n_classes(),
            table.outputs()
        )));
    }
    table.check_pattern_set(ps, data.len())
}

/// Mean CCE and accuracy of the estimator, sample `i` gated by `ps[i]`.
pub fn evaluate_estimator(est: &LinearEstimator, data: &Dataset, ps: &PatternSet) -> Result<Metrics> {
    check_alignment(est.table(), data, ps)?;
    Ok(Metrics::collect(data, |i| est.eval_unchecked(ps.get(i), data.sample(i))))
}

/// Per-sample gradient of `loss` with respect to every path weight; only
/// active paths receive a non-zero entry.
pub fn estimator_gradient(est: &LinearEstimator, x: &[f64], pat: &crate::selector::ActivationPattern, label: usize, loss: Loss) -> Result<Vec<f64>> {
    est.table().check_pattern(pat)?;
    est.table().check_input(x)?;
    crate::nn::check_label(label, est.outputs())?;
    let mut g = vec![0.0; est.pw().len()];
    accumulate_gradient(est, x, pat, label, loss, 1.0, &mut g);
    Ok(g)
}

fn accumulate_gradient(
    est: &LinearEstimator,
    x: &[f64],
    pat: &crate::selector::ActivationPattern,
    label: usize,
    loss: Loss,
    scale: f64,
    acc: &mut [f64],
) {
    let out = est.eval_unchecked(pat, x);
    let d_out = loss.output_gradient(&out, label);
    let paths = est.table().paths();
    est.table().for_each_active(pat, x, |k, v| {
        acc[k] += scale * d_out[paths[k].output] * v;
    });
}

/// Mini-batch SGD on the path weights.
pub fn estimator_sgd_train(
    est: &LinearEstimator,
    data: &Dataset,
    ps: &PatternSet,
    cfg: &TrainConfig,
    loss: Loss,
    val: Option<(&Dataset, &PatternSet)>,
) -> Result<(LinearEstimator, Vec<EpochRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    check_alignment(est.table(), data, ps)?;
    if let Some((v, vps)) = val {
        check_alignment(est.table(), v, vps)?;
    }
    let mut est = est.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        for batch in batch_indices(data.len(), cfg.batch_size, cfg.seed, epoch as u64)? {
            let mut grad = vec![0.0; est.pw().len()];
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                accumulate_gradient(&est, data.sample(i), ps.get(i), data.label(i), loss, scale, &mut grad);
            }
            for (p, g) in est.pw_mut().iter_mut().zip(&grad) {
                *p -= cfg.lr * g;
            }
        }
        history.push(EpochRecord {
            epoch: epoch + 1,
            train: evaluate_estimator(&est, data, ps)?,
            val: val.map(|(v, vps)| evaluate_estimator(&est, v, vps)).transpose()?,
        });
    }
    Ok((est, history))
}

/// Per-output design matrices: row `s` holds, for every path ending at
/// output `j`, the path's contribution factor (input value or 1) when active
/// for sample `s`, else 0. Column `c` of output `j` is table path
/// `columns[j][c]`.
pub struct DesignMatrices {
    pub columns: Vec<Vec<usize>>,
    pub matrices: Vec<Matrix>,
}

pub fn design_matrices(table: &PathTable, data: &Dataset, ps: &PatternSet) -> Result<DesignMatrices> {
    check_alignment(table, data, ps)?;
    let outputs = table.outputs();
    let mut columns = vec![Vec::new(); outputs];
    let mut slot = vec![0usize; table.len()];
    for (k, p) in table.paths().iter().enumerate() {
        slot[k] = columns[p.output].len();
        columns[p.output].push(k);
    }
    let mut matrices: Vec<Matrix> = columns
        .iter()
        .map(|c| Matrix::zeros(data.len(), c.len()))
        .collect();
    let paths = table.paths();
    for s in 0..data.len() {
        table.for_each_active(ps.get(s), data.sample(s), |k, v| {
            matrices[paths[k].output].set(s, slot[k], v);
        });
    }
    Ok(DesignMatrices { columns, matrices })
}

/// Ridge least squares against one-hot targets, one independent system per
/// output, solved by Householder QR. Path weights whose design column is
/// identically zero (never active, or only active on zero inputs) stay 0.
pub fn estimator_direct_solve(
    table: Arc<PathTable>,
    data: &Dataset,
    ps: &PatternSet,
    ridge: f64,
) -> Result<LinearEstimator> {
    let outputs = table.outputs();
    let mut targets = Matrix::zeros(data.len(), outputs);
    for (s, &l) in data.labels().iter().enumerate() {
        if l < outputs {
            targets.set(s, l, 1.0);
        }
    }
    solve_path_regression(table, data, ps, &targets, ridge)
}

/// [`estimator_direct_solve`] with arbitrary real targets (`n × outputs`).
pub fn solve_path_regression(
    table: Arc<PathTable>,
    data: &Dataset,
    ps: &PatternSet,
    targets: &Matrix,
    ridge: f64,
) -> Result<LinearEstimator> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    if targets.rows() != data.len() || targets.cols() != table.outputs() {
        return Err(Error::shape(
            format!("{}x{} targets", data.len(), table.outputs()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    let design = design_matrices(&table, data, ps)?;
    let solved: Vec<Result<Vec<(usize, f64)>>> = design
        .matrices
        .par_iter()
        .zip(design.columns.par_iter())
        .enumerate()
        .map(|(j, (x, cols))| {
            let keep: Vec<usize> = (0..x.cols())
                .filter(|&c| (0..x.rows()).any(|r| x.get(r, c) != 0.0))
                .collect();
            let mut reduced = Matrix::zeros(x.rows(), keep.len());
            for r in 0..x.rows() {
                for (c_new, &c) in keep.iter().enumerate() {
                    reduced.set(r, c_new, x.get(r, c));
                }
            }
            let y: Vec<f64> = (0..x.rows()).map(|r| targets.get(r, j)).collect();
            let w = ridge_least_squares(&reduced, &y, ridge).map_err(|e| Error::RankDeficient {
                output: j,
                detail: format!(
                    "{} samples, {} active columns, pivot {:e} at column {}",
                    x.rows(),
                    keep.len(),
                    e.pivot,
                    e.column
                ),
            })?;
            Ok(keep.iter().zip(w).map(|(&c, v)| (cols[c], v)).collect())
        })
        .collect();
    let mut pw = vec![0.0; table.len()];
    for per_output in solved {
        for (k, v) in per_output? {
            pw[k] = v;
        }
    }
    LinearEstimator::new(table, pw)
}

fn check_same_table(a: &LinearEstimator, b: &LinearEstimator) -> Result<()> {
    if a.table().spec_fingerprint() != b.table().spec_fingerprint() || a.pw().len() != b.pw().len() {
        return Err(Error::input(format!(
            "cannot merge estimators over different path tables ({:?} vs {:?})",
            a.table().layer_sizes(),
            b.table().layer_sizes()
        )));
    }
    Ok(())
}

/// `alpha · a + (1 − alpha) · b`, parameter-wise. Equal weights are copied
/// through unchanged, so merging an estimator with itself is exact.
pub fn merge_estimators(a: &LinearEstimator, b: &LinearEstimator, alpha: f64) -> Result<LinearEstimator> {
    check_same_table(a, b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("merge weight must lie in [0, 1], got {alpha}")));
    }
    let pw = a
        .pw()
        .iter()
        .zip(b.pw())
        .map(|(&x, &y)| if x == y { x } else { alpha * x + (1.0 - alpha) * y })
        .collect();
    LinearEstimator::new(a.shared_table(), pw)
}

/// Trains a copy of `old` on the new samples only, then merges it back with
/// weight `n_old / (n_old + m_new)` on the old model.
pub fn incremental_retrain(
    old: &LinearEstimator,
    new_data: &Dataset,
    ps_new: &PatternSet,
    n_old: usize,
    trainer: &Trainer,
) -> Result<LinearEstimator> {
    let m_new = new_data.len();
    if n_old + m_new == 0 {
        return Err(Error::input("incremental re-training needs at least one old or new sample"));
    }
    if m_new == 0 {
        return Ok(old.clone());
    }
    let fresh = trainer.train(old, new_data, ps_new)?;
    let alpha = n_old as f64 / (n_old + m_new) as f64;
    merge_estimators(old, &fresh, alpha)
}

/// Order-independent identity of a shard: FNV-1a over its feature bits,
/// labels and pattern bits.
fn shard_key(data: &Dataset, ps: &PatternSet) -> (u64, usize) {
    let mut words: Vec<usize> = Vec::with_capacity(data.features().as_slice().len() + data.len());
    for v in data.features().as_slice() {
        words.push(v.to_bits() as usize);
    }
    words.extend_from_slice(data.labels());
    for p in ps.patterns() {
        words.extend(p.masks().iter().flatten().map(|&b| b as usize));
    }
    (fingerprint_sizes(&words), data.len())
}

/// One round of federated training: every shard trains a copy of `global`
/// (in parallel), and the results are averaged with weights proportional to
/// shard size. Contributions are summed in a canonical order keyed by shard
/// content, so the result does not depend on the order of `shards`.
pub fn federated_round(global: &LinearEstimator, shards: &[(Dataset, PatternSet)], trainer: &Trainer) -> Result<LinearEstimator> {
    if shards.is_empty() {
        return Err(Error::input("federated round needs at least one shard"));
    }
    let total: usize = shards.iter().map(|(d, _)| d.len()).sum();
    if total == 0 {
        return Err(Error::input("all shards are empty"));
    }
    let mut locals: Vec<((u64, usize), usize, LinearEstimator)> = shards
        .par_iter()
        .map(|(d, ps)| Ok((shard_key(d, ps), d.len(), trainer.train(global, d, ps)?)))
        .collect::<Result<_>>()?;
    locals.sort_by_key(|a| a.0);

    let mut pw = vec![0.0; global.pw().len()];
    for (_, n, local) in &locals {
        check_same_table(global, local)?;
        let w = *n as f64 / total as f64;
        for (acc, &v) in pw.iter_mut().zip(local.pw()) {
            *acc += w * v;
        }
    }
    LinearEstimator::new(global.shared_table(), pw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{enumerate_paths, init_estimator_from_network};
    use crate::selector::ActivationPattern;

    /// `[1, 1, 1]` table with the hidden neuron always active and the
    /// hidden bias path fixed at zero contribution via the data.
    fn tiny_table() -> Arc<PathTable> {
        Arc::new(enumerate_paths(&[1, 1, 1]).unwrap())
    }

    fn one_feature(xs: &[f64], labels: &[usize]) -> Dataset {
        Dataset::new(Matrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap(), labels.to_vec(), 1).unwrap()
    }

    #[test]
    fn mse_gradient_single_full_path() {
        let est = LinearEstimator::new(tiny_table(), vec![1.5, 0.0, 0.0]).unwrap();
        // Hidden neuron active: full path and hidden-bias path both active.
        let pat = ActivationPattern::uniform(&[1], true);
        let x = 2.0;
        let g = estimator_gradient(&est, &[x], &pat, 0, Loss::Mse).unwrap();
        let o = 1.5 * x;
        assert_eq!(g[0], 2.0 * (o - 1.0) * x);
        assert_eq!(g[1], 2.0 * (o - 1.0));
        assert_eq!(g[2], 2.0 * (o - 1.0));
    }

    #[test]
    fn zero_lr_keeps_estimator() {
        let est = LinearEstimator::new(tiny_table(), vec![1.0, 2.0, 3.0]).unwrap();
        let data = one_feature(&[1.0, 2.0], &[0, 0]);
        let ps = PatternSet::new(vec![1, 1, 1], vec![ActivationPattern::uniform(&[1], true); 2]).unwrap();
        let cfg = TrainConfig { epochs: 3, lr: 0.0, batch_size: 1, seed: 0 };
        let (out, hist) = estimator_sgd_train(&est, &data, &ps, &cfg, Loss::Mse, None).unwrap();
        assert_eq!(out, est);
        assert_eq!(hist.len(), 3);
    }

    #[test]
    fn design_rows_hold_contribution_factors() {
        let table = tiny_table();
        let data = one_feature(&[1.0, 2.0], &[0, 0]);
        let ps = PatternSet::new(
            vec![1, 1, 1],
            vec![ActivationPattern::uniform(&[1], true), ActivationPattern::uniform(&[1], false)],
        )
        .unwrap();
        let d = design_matrices(&table, &data, &ps).unwrap();
        assert_eq!(d.columns[0], vec![0, 1, 2]);
        assert_eq!(d.matrices[0].row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(d.matrices[0].row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn regression_targets_fit_exactly() {
        // Full path active only where the hidden neuron fires; the other
        // samples pin the output bias. y = 2x on active samples, 0 elsewhere.
        let table = tiny_table();
        let data = one_feature(&[1.0, 2.0, 5.0, 7.0], &[0, 0, 0, 0]);
        let on = ActivationPattern::uniform(&[1], true);
        let off = ActivationPattern::uniform(&[1], false);
        let ps = PatternSet::new(vec![1, 1, 1], vec![on.clone(), on, off.clone(), off]).unwrap();
        let targets = Matrix::from_vec(4, 1, vec![2.0, 4.0, 0.0, 0.0]).unwrap();
        let est = solve_path_regression(table, &data, &ps, &targets, 0.0).unwrap();
        assert!((est.pw()[0] - 2.0).abs() < 1e-12, "{:?}", est.pw());
        assert!(est.pw()[1].abs() < 1e-12 && est.pw()[2].abs() < 1e-12);
    }

    #[test]
    fn duplicate_columns_need_ridge() {
        let table = tiny_table();
        let data = one_feature(&[1.0, 2.0, 3.0], &[0, 0, 0]);
        let ps = PatternSet::new(vec![1, 1, 1], vec![ActivationPattern::uniform(&[1], true); 3]).unwrap();
        assert!(matches!(
            estimator_direct_solve(table.clone(), &data, &ps, 0.0),
            Err(Error::RankDeficient { output: 0, .. })
        ));
        let est = estimator_direct_solve(table, &data, &ps, DEFAULT_RIDGE).unwrap();
        for i in 0..3 {
            let o = est.eval(ps.get(i), data.sample(i)).unwrap()[0];
            assert!((o - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn never_active_paths_stay_zero() {
        let table = tiny_table();
        let data = one_feature(&[1.0, 2.0], &[0, 0]);
        let ps = PatternSet::new(vec![1, 1, 1], vec![ActivationPattern::uniform(&[1], false); 2]).unwrap();
        let est = estimator_direct_solve(table, &data, &ps, 0.0).unwrap();
        assert_eq!(est.pw()[0], 0.0);
        assert_eq!(est.pw()[1], 0.0);
        assert!((est.pw()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let net = crate::nn::Network::init(&crate::nn::NetworkSpec::new(vec![2, 3, 2], 1).unwrap());
        let data = crate::data::synth_clusters(1, 2, 2, 20, 0.2).unwrap();
        let ps = crate::selector::capture_patterns(&net, &data).unwrap();
        let table = init_estimator_from_network(&net).unwrap().shared_table();
        let est = estimator_direct_solve(table, &data, &ps, 1e12).unwrap();
        assert!(est.pw().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn merge_arithmetic_and_endpoints() {
        let t = Arc::new(enumerate_paths(&[1, 1, 1]).unwrap());
        let a = LinearEstimator::new(t.clone(), vec![2.0, 4.0, 1.0]).unwrap();
        let b = LinearEstimator::new(t.clone(), vec![4.0, 8.0, 3.0]).unwrap();
        assert_eq!(merge_estimators(&a, &b, 0.5).unwrap().pw(), &[3.0, 6.0, 2.0]);
        assert_eq!(merge_estimators(&a, &b, 1.0).unwrap(), a);
        assert_eq!(merge_estimators(&a, &b, 0.0).unwrap(), b);
        assert!(merge_estimators(&a, &b, 1.5).is_err());
        let other = LinearEstimator::zeros(Arc::new(enumerate_paths(&[1, 2, 1]).unwrap()));
        assert!(matches!(merge_estimators(&a, &other, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn incremental_edge_cases() {
        let t = tiny_table();
        let old = LinearEstimator::new(t.clone(), vec![0.3, -0.2, 0.1]).unwrap();
        let data = one_feature(&[1.0, 2.0, 0.5], &[0, 0, 0]);
        let ps = PatternSet::new(vec![1, 1, 1], vec![ActivationPattern::uniform(&[1], true); 3]).unwrap();
        let trainer = Trainer::Sgd {
            config: TrainConfig { epochs: 2, lr: 0.1, batch_size: 2, seed: 3 },
            loss: Loss::Mse,
        };
        let unchanged = incremental_retrain(&old, &data.head(0), &ps.subset(&[]), 10, &trainer).unwrap();
        assert_eq!(unchanged, old);
        let fresh = incremental_retrain(&old, &data, &ps, 0, &trainer).unwrap();
        assert_eq!(fresh, trainer.train(&old, &data, &ps).unwrap());
        assert!(incremental_retrain(&old, &data.head(0), &ps.subset(&[]), 0, &trainer).is_err());
    }

    #[test]
    fn federated_shapes() {
        let t = tiny_table();
        let global = LinearEstimator::zeros(t);
        let trainer = Trainer::Direct { ridge: 1e-3 };
        assert!(federated_round(&global, &[], &trainer).is_err());
        let data = one_feature(&[1.0, 2.0], &[0, 0]);
        let ps = PatternSet::new(vec![1, 1, 1], vec![ActivationPattern::uniform(&[1], true); 2]).unwrap();
        let one = federated_round(&global, &[(data.clone(), ps.clone())], &trainer).unwrap();
        assert_eq!(one, trainer.train(&global, &data, &ps).unwrap());
    }
}
