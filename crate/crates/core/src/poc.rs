//! Masked-network estimator: a copy of the network whose hidden gates come
//! from frozen activation patterns instead of the live ReLU, so only the
//! weights and biases (quantitative knowledge) are re-trained.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{check_label, sgd_epochs, EpochRecord, ForwardCache, Gate, Gradients, Metrics, Network, TrainConfig};
use crate::selector::{ActivationPattern, PatternSet};

/// Forward pass with hidden outputs `z` where the mask bit is set and 0
/// elsewhere, regardless of the sign of `z`.
pub fn masked_forward(net: &Network, x: &[f64], p: &ActivationPattern) -> Result<(Vec<f64>, ForwardCache)> {
    net.check_input(x)?;
    p.check(net.spec())?;
    let cache = net.propagate(x, &Gate::Masks(p.masks()));
    Ok((cache.logits().to_vec(), cache))
}

/// Gradient of the CCE of [`masked_forward`]: each hidden derivative is the
/// pattern's mask bit.
pub fn masked_backward(net: &Network, cache: &ForwardCache, label: usize, p: &ActivationPattern) -> Result<Gradients> {
    net.check_cache(cache)?;
    p.check(net.spec())?;
    check_label(label, net.spec().outputs())?;
    Ok(net.backprop(cache, label, &Gate::Masks(p.masks())))
}

fn check_patterns(net: &Network, data: &Dataset, ps: &PatternSet) -> Result<()> {
    net.check_dataset(data)?;
    ps.check_aligned(net.spec().fingerprint(), data.len())
}

/// Mean CCE and accuracy of the masked network, sample `i` gated by `ps[i]`.
pub fn evaluate_masked(net: &Network, data: &Dataset, ps: &PatternSet) -> Result<Metrics> {
    check_patterns(net, data, ps)?;
    Ok(Metrics::collect(data, |i| {
        net.propagate(data.sample(i), &Gate::Masks(ps.get(i).masks()))
            .post
            .pop()
            .unwrap()
    }))
}

/// Mini-batch SGD over masked forward/backward passes. Patterns are never
/// recomputed; `ps[i]` gates sample `i` for the whole run.
pub fn retrain_quantitative(
    est: &Network,
    data: &Dataset,
    ps: &PatternSet,
    cfg: &TrainConfig,
    val: Option<(&Dataset, &PatternSet)>,
) -> Result<(Network, Vec<EpochRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    check_patterns(est, data, ps)?;
    if let Some((v, vps)) = val {
        check_patterns(est, v, vps)?;
    }
    let mut net = est.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    sgd_epochs(
        &mut net,
        data.len(),
        cfg,
        |net, i| {
            let gate = Gate::Masks(ps.get(i).masks());
            let cache = net.propagate(data.sample(i), &gate);
            net.backprop(&cache, data.label(i), &gate)
        },
        |epoch, net| {
            history.push(EpochRecord {
                epoch,
                train: evaluate_masked(net, data, ps)?,
                val: val.map(|(v, vps)| evaluate_masked(net, v, vps)).transpose()?,
            });
            Ok(())
        },
    )?;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_clusters;
    use crate::matrix::Matrix;
    use crate::nn::{train_epochs, NetworkSpec};
    use crate::selector::{capture_pattern, capture_patterns, PathSelector};

    fn tiny_net() -> Network {
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

    #[test]
    fn captured_mask_reproduces_forward() {
        let net = Network::init(&NetworkSpec::new(vec![3, 6, 5, 2], 8).unwrap());
        let x = [0.5, -0.1, 0.8];
        let p = capture_pattern(&net, &x).unwrap();
        let (a, _) = net.forward(&x).unwrap();
        let (b, _) = masked_forward(&net, &x, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_zero_mask_leaves_output_bias() {
        let net = tiny_net();
        let p = ActivationPattern::uniform(&[1], false);
        assert_eq!(masked_forward(&net, &[1.0], &p).unwrap().0, vec![0.5]);
        assert_eq!(masked_forward(&net, &[7.0], &p).unwrap().0, vec![0.5]);
    }

    #[test]
    fn all_one_mask_is_affine() {
        let net = Network::init(&NetworkSpec::new(vec![2, 4, 3, 2], 2).unwrap());
        let p = ActivationPattern::uniform(&[4, 3], true);
        let f = |x: &[f64]| masked_forward(&net, x, &p).unwrap().0;
        let (x, y) = ([0.3, -1.2], [2.0, 0.7]);
        let (f0, fx, fy, fxy) = (f(&[0.0, 0.0]), f(&x), f(&y), f(&[x[0] + y[0], x[1] + y[1]]));
        for j in 0..2 {
            let lhs = fxy[j] - f0[j];
            let rhs = (fx[j] - f0[j]) + (fy[j] - f0[j]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_must_fit_spec() {
        let net = tiny_net();
        let p = ActivationPattern::uniform(&[2], true);
        assert!(matches!(masked_forward(&net, &[1.0], &p), Err(Error::Input(_))));
        let (_, cache) = net.forward(&[1.0]).unwrap();
        assert!(matches!(masked_backward(&net, &cache, 0, &p), Err(Error::Input(_))));
    }

    #[test]
    fn captured_mask_reproduces_backward() {
        let net = Network::init(&NetworkSpec::new(vec![3, 6, 5, 3], 12).unwrap());
        let x = [0.5, -0.1, 0.8];
        let p = capture_pattern(&net, &x).unwrap();
        let (_, c1) = net.forward(&x).unwrap();
        let (_, c2) = masked_forward(&net, &x, &p).unwrap();
        assert_eq!(net.backward(&c1, 2).unwrap(), masked_backward(&net, &c2, 2, &p).unwrap());
    }

    #[test]
    fn zero_mask_row_kills_incoming_weight_gradients() {
        let net = Network::init(&NetworkSpec::new(vec![2, 3, 2], 4).unwrap());
        let p = ActivationPattern::new(vec![vec![true, false, true]]);
        let (_, cache) = masked_forward(&net, &[0.4, 0.6], &p).unwrap();
        let g = masked_backward(&net, &cache, 1, &p).unwrap();
        assert!(g.d_weights[0].row(1).iter().all(|&v| v == 0.0));
        assert_eq!(g.d_biases[0][1], 0.0);
        assert!(g.d_weights[0].row(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let data = synth_clusters(2, 2, 2, 10, 0.1).unwrap();
        let net = Network::init(&NetworkSpec::new(vec![2, 5, 2], 3).unwrap());
        let ps = capture_patterns(&net, &data).unwrap();
        let cfg = TrainConfig { epochs: 0, lr: 0.1, batch_size: 4, seed: 0 };
        let (out, hist) = retrain_quantitative(&net, &data, &ps, &cfg, None).unwrap();
        assert_eq!(out, net);
        assert!(hist.is_empty());
    }

    #[test]
    fn first_batch_matches_standard_sgd() {
        // One epoch with a single full batch is one step, taken at the
        // capture point, so it must equal the traditional step exactly.
        let data = synth_clusters(5, 3, 4, 6, 0.2).unwrap();
        let net = Network::init(&NetworkSpec::new(vec![4, 7, 3], 9).unwrap());
        let ps = capture_patterns(&net, &data).unwrap();
        let cfg = TrainConfig { epochs: 1, lr: 0.05, batch_size: 64, seed: 1 };
        let (a, _) = retrain_quantitative(&net, &data, &ps, &cfg, None).unwrap();
        let (b, _) = train_epochs(&net, &data, &cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn misaligned_patterns_rejected() {
        let data = synth_clusters(2, 2, 2, 10, 0.1).unwrap();
        let net = Network::init(&NetworkSpec::new(vec![2, 5, 2], 3).unwrap());
        let ps = capture_patterns(&net, &data.head(5)).unwrap();
        let cfg = TrainConfig { epochs: 1, lr: 0.1, batch_size: 4, seed: 0 };
        assert!(matches!(
            retrain_quantitative(&net, &data, &ps, &cfg, None),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn retraining_leaves_patterns_untouched() {
        let data = synth_clusters(6, 3, 3, 20, 0.15).unwrap();
        let net = Network::init(&NetworkSpec::new(vec![3, 8, 3], 1).unwrap());
        let ps = capture_patterns(&net, &data).unwrap();
        let before = ps.clone();
        let cfg = TrainConfig { epochs: 3, lr: 0.1, batch_size: 8, seed: 2 };
        let (trained, _) = retrain_quantitative(&net, &data, &ps, &cfg, None).unwrap();
        assert_eq!(ps, before);
        assert_ne!(trained, net);
    }

    #[test]
    fn only_new_samples_are_captured() {
        let old = synth_clusters(6, 3, 3, 20, 0.15).unwrap();
        let new = synth_clusters(7, 3, 3, 5, 0.15).unwrap();
        let selector = PathSelector::new(Network::init(&NetworkSpec::new(vec![3, 8, 3], 1).unwrap()));
        let ps_old = selector.capture(&old).unwrap();
        assert_eq!(selector.samples_captured(), old.len());
        let ps_all = selector.extend(&ps_old, &new).unwrap();
        assert_eq!(selector.samples_captured(), old.len() + new.len());
        assert_eq!(ps_all, capture_patterns(selector.network(), &old.concat(&new).unwrap()).unwrap());
    }
}
