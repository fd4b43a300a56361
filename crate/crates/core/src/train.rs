//! Mini-batch SGD on softmax cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ann::{ann_backward, ann_forward, softmax_cross_entropy, AnnParams};
use crate::data::Dataset;
use crate::error::{EstError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Samples per update; `0` means full batch.
    pub batch_size: usize,
}

impl SgdConfig {
    pub fn new(epochs: usize, lr: f64, seed: u64) -> Self {
        Self {
            epochs,
            lr,
            seed,
            batch_size: 16,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Mean training loss before any update, then after every epoch.
    pub losses: Vec<f64>,
    pub accuracies: Vec<f64>,
}

/// Mean cross-entropy and accuracy of `p` over `data`.
pub fn evaluate(p: &AnnParams, data: &Dataset) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &label) in data.inputs.iter().zip(&data.labels) {
        let (logits, _) = ann_forward(p, x)?;
        if !logits.all_finite() {
            return Ok((f64::INFINITY, 0.0));
        }
        loss += softmax_cross_entropy(&logits, label)?.0;
        if crate::metrics::argmax(logits.values()) == label {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train_sgd(p: &AnnParams, data: &Dataset, cfg: &SgdConfig) -> Result<(AnnParams, TrainLog)> {
    if cfg.epochs == 0 {
        return Err(EstError::Config("epochs must be >= 1".into()));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(EstError::Config(format!(
            "learning rate must be > 0, got {}",
            cfg.lr
        )));
    }
    if data.is_empty() {
        return Err(EstError::Input("empty training set".into()));
    }
    if data.n_tokens != p.dims.n_tokens
        || data.d_model != p.dims.d_model
        || data.n_classes > p.dims.n_classes
    {
        return Err(EstError::Config(format!(
            "dataset ({} tokens x {}, {} classes) does not fit the model {:?}",
            data.n_tokens, data.d_model, data.n_classes, p.dims
        )));
    }
    p.validate()?;

    let mut params = p.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = if cfg.batch_size == 0 {
        data.len()
    } else {
        cfg.batch_size
    };
    let mut log = TrainLog::default();
    let (loss, acc) = evaluate(&params, data)?;
    log.losses.push(loss);
    log.accuracies.push(acc);

    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = AnnParams::zeros(params.dims)?;
            for &i in chunk {
                let (logits, cache) = ann_forward(&params, &data.inputs[i])?;
                if !logits.all_finite() {
                    return Err(EstError::Divergence {
                        epoch,
                        loss: f64::INFINITY,
                    });
                }
                let (_, g_logits) = softmax_cross_entropy(&logits, data.labels[i])?;
                let g = ann_backward(&params, &cache, &g_logits)?;
                for ((_, acc), (_, gi)) in grad.named_mut().into_iter().zip(g.named()) {
                    acc.add_assign(gi)?;
                }
            }
            let step = -cfg.lr / chunk.len() as f64;
            for ((_, w), (_, g)) in params.named_mut().into_iter().zip(grad.named()) {
                w.axpy(step, g)?;
            }
        }
        let (loss, acc) = evaluate(&params, data)?;
        if !loss.is_finite() || params.named().iter().any(|(_, t)| !t.all_finite()) {
            return Err(EstError::Divergence { epoch, loss });
        }
        log::debug!("epoch {epoch}: loss {loss:.6} acc {acc:.4}");
        log.losses.push(loss);
        log.accuracies.push(acc);
    }
    Ok((params, log))
}

/// Largest relative error between analytic gradients and central finite
/// differences of the cross-entropy loss, over every weight.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// entries that are zero up to rounding from dominating.
pub fn gradient_check(p: &AnnParams, x: &Tensor, label: usize, h: f64, floor: f64) -> Result<f64> {
    let (logits, cache) = ann_forward(p, x)?;
    let (_, grad_logits) = softmax_cross_entropy(&logits, label)?;
    let grads = ann_backward(p, &cache, &grad_logits)?;
    let loss_at = |q: &AnnParams| -> Result<f64> {
        let (l, _) = ann_forward(q, x)?;
        Ok(softmax_cross_entropy(&l, label)?.0)
    };
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.values().to_vec()))
        .collect();
    let mut probe = p.clone();
    let mut worst = 0.0f64;
    for (name, a) in &analytic {
        for (i, &ga) in a.iter().enumerate() {
            let original = weight_mut(&mut probe, name).values()[i];
            weight_mut(&mut probe, name).values_mut()[i] = original + h;
            let up = loss_at(&probe)?;
            weight_mut(&mut probe, name).values_mut()[i] = original - h;
            let down = loss_at(&probe)?;
            weight_mut(&mut probe, name).values_mut()[i] = original;
            let gn = (up - down) / (2.0 * h);
            let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn weight_mut<'a>(p: &'a mut AnnParams, name: &str) -> &'a mut Tensor {
    p.named_mut()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .expect("weight name taken from the same parameter set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::AnnDims;
    use crate::data::gen_synthetic;

    fn dims() -> AnnDims {
        AnnDims {
            n_tokens: 4,
            d_model: 8,
            d_head: 4,
            d_hidden: 16,
            n_classes: 3,
            blocks: 1,
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let p = AnnParams::init(dims(), 0).unwrap();
        let d = gen_synthetic(2, 3, 4, 8, 0).unwrap();
        let err = train_sgd(&p, &d, &SgdConfig::new(0, 0.05, 0)).unwrap_err();
        assert!(matches!(err, EstError::Config(_)));
        assert!(train_sgd(&p, &d, &SgdConfig::new(1, 0.0, 0)).is_err());
    }

    #[test]
    fn same_seed_same_bits() {
        let p = AnnParams::init(dims(), 1).unwrap();
        let d = gen_synthetic(10, 3, 4, 8, 2).unwrap();
        let cfg = SgdConfig::new(3, 0.05, 9);
        let (a, _) = train_sgd(&p, &d, &cfg).unwrap();
        let (b, _) = train_sgd(&p, &d, &cfg).unwrap();
        for ((_, x), (_, y)) in a.named().into_iter().zip(b.named()) {
            let xb: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn full_batch_loss_non_increasing() {
        let p = AnnParams::init(dims(), 3).unwrap();
        let d = gen_synthetic(20, 3, 4, 8, 4).unwrap();
        let cfg = SgdConfig {
            batch_size: 0,
            ..SgdConfig::new(30, 0.005, 0)
        };
        let (_, log) = train_sgd(&p, &d, &cfg).unwrap();
        for w in log.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", log.losses);
        }
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let p = AnnParams::init(dims(), 3).unwrap();
        let d = gen_synthetic(20, 3, 4, 8, 4).unwrap();
        let err = train_sgd(&p, &d, &SgdConfig::new(50, 1e200, 0)).unwrap_err();
        assert!(matches!(err, EstError::Divergence { .. }), "{err}");
    }
}
