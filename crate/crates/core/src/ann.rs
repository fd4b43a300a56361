//! The ReLU-attention transformer that gets pre-trained and then converted.
//!
//! One block computes
//!
//! ```text
//! Q = relu(x Wq)   K = relu(x Wk)   V = relu(x Wv)
//! A = relu(Q K^T / d_head)
//! C = relu((A V) Wo)          h1 = x + C
//! M1 = relu(h1 W1)  M2 = relu(M1 W2)   h2 = h1 + M2
//! ```
//!
//! followed by a mean over tokens and a bias-free linear classifier. Every
//! `relu` here is a population that becomes a layer of integrate-and-fire
//! neurons after conversion. The score divisor is the head width itself,
//! not its square root.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EstError, Result};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

pub const MAX_BLOCKS: usize = 4;

/// Spiking populations of one block, in simulation order.
pub const POPULATIONS: [&str; 7] = ["q", "k", "v", "score", "context", "mlp1", "mlp2"];

/// Prefix for names belonging to `block`: empty for the first block,
/// `b{i}.` afterwards, so single-block files keep the short names.
pub fn block_prefix(block: usize) -> String {
    if block == 0 {
        String::new()
    } else {
        format!("b{block}.")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnDims {
    pub n_tokens: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub d_hidden: usize,
    pub n_classes: usize,
    pub blocks: usize,
}

impl AnnDims {
    pub fn validate(&self) -> Result<()> {
        let AnnDims {
            n_tokens,
            d_model,
            d_head,
            d_hidden,
            n_classes,
            blocks,
        } = *self;
        if n_tokens == 0 || d_model == 0 || d_head == 0 || d_hidden == 0 || n_classes == 0 {
            return Err(EstError::Config(format!(
                "all model dimensions must be >= 1: {self:?}"
            )));
        }
        if !(1..=MAX_BLOCKS).contains(&blocks) {
            return Err(EstError::Config(format!(
                "blocks must be in 1..={MAX_BLOCKS}, got {blocks}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
    pub w_mlp1: Tensor,
    pub w_mlp2: Tensor,
}

impl BlockParams {
    const NAMES: [&'static str; 6] = ["W_q", "W_k", "W_v", "W_o", "W_mlp1", "W_mlp2"];

    fn tensors(&self) -> [&Tensor; 6] {
        [
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.w_mlp1,
            &self.w_mlp2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 6] {
        [
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.w_mlp1,
            &mut self.w_mlp2,
        ]
    }

    fn shapes(d: &AnnDims) -> [[usize; 2]; 6] {
        [
            [d.d_model, d.d_head],
            [d.d_model, d.d_head],
            [d.d_model, d.d_head],
            [d.d_head, d.d_model],
            [d.d_model, d.d_hidden],
            [d.d_hidden, d.d_model],
        ]
    }
}

/// Weights of the toy transformer. No biases anywhere, so a zero input maps
/// to zero activations (and zero firing rates after conversion).
#[derive(Clone, Debug, PartialEq)]
pub struct AnnParams {
    pub dims: AnnDims,
    pub blocks: Vec<BlockParams>,
    pub w_cls: Tensor,
}

impl AnnParams {
    /// He-normal initialisation, deterministic in `seed`.
    pub fn init(dims: AnnDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |shape: [usize; 2]| {
            let std = (2.0 / shape[0] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let values = (0..shape[0] * shape[1])
                .map(|_| normal.sample(&mut rng))
                .collect();
            Tensor::new(shape.to_vec(), values).expect("shape matches")
        };
        let shapes = BlockParams::shapes(&dims);
        let blocks = (0..dims.blocks)
            .map(|_| BlockParams {
                w_q: draw(shapes[0]),
                w_k: draw(shapes[1]),
                w_v: draw(shapes[2]),
                w_o: draw(shapes[3]),
                w_mlp1: draw(shapes[4]),
                w_mlp2: draw(shapes[5]),
            })
            .collect();
        let w_cls = draw([dims.d_model, dims.n_classes]);
        Ok(Self {
            dims,
            blocks,
            w_cls,
        })
    }

    pub fn zeros(dims: AnnDims) -> Result<Self> {
        dims.validate()?;
        let shapes = BlockParams::shapes(&dims);
        let z = |i: usize| Tensor::zeros(&shapes[i]);
        Ok(Self {
            dims,
            blocks: (0..dims.blocks)
                .map(|_| BlockParams {
                    w_q: z(0),
                    w_k: z(1),
                    w_v: z(2),
                    w_o: z(3),
                    w_mlp1: z(4),
                    w_mlp2: z(5),
                })
                .collect(),
            w_cls: Tensor::zeros(&[dims.d_model, dims.n_classes]),
        })
    }

    /// Checks every weight shape against the declared dimensions.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.blocks.len() != self.dims.blocks {
            return Err(EstError::Config(format!(
                "dims declare {} blocks but {} are present",
                self.dims.blocks,
                self.blocks.len()
            )));
        }
        let shapes = BlockParams::shapes(&self.dims);
        for block in &self.blocks {
            for (t, s) in block.tensors().iter().zip(&shapes) {
                if t.shape() != s {
                    return Err(EstError::Dimension {
                        op: "AnnParams",
                        left: t.shape().to_vec(),
                        right: s.to_vec(),
                    });
                }
            }
        }
        if self.w_cls.shape() != [self.dims.d_model, self.dims.n_classes] {
            return Err(EstError::Dimension {
                op: "AnnParams",
                left: self.w_cls.shape().to_vec(),
                right: vec![self.dims.d_model, self.dims.n_classes],
            });
        }
        Ok(())
    }

    /// Named view of every weight tensor, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let prefix = block_prefix(b);
            for (name, t) in BlockParams::NAMES.iter().zip(block.tensors()) {
                out.push((format!("{prefix}{name}"), t));
            }
        }
        out.push(("W_cls".to_string(), &self.w_cls));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (b, block) in self.blocks.iter_mut().enumerate() {
            let prefix = block_prefix(b);
            for (name, t) in BlockParams::NAMES.iter().zip(block.tensors_mut()) {
                out.push((format!("{prefix}{name}"), t));
            }
        }
        out.push(("W_cls".to_string(), &mut self.w_cls));
        out
    }

    /// Inverse of [`AnnParams::named`].
    pub fn from_named(dims: AnnDims, mut weights: BTreeMap<String, Tensor>) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        for (name, slot) in p.named_mut() {
            *slot = weights
                .remove(&name)
                .ok_or_else(|| EstError::Config(format!("missing weight {name}")))?;
        }
        if let Some(extra) = weights.keys().next() {
            return Err(EstError::Config(format!("unexpected weight {extra}")));
        }
        p.validate()?;
        Ok(p)
    }

    /// Order-sensitive hash of the weight bits; ties a cache to its params.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, t) in self.named() {
            for v in t.values() {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct BlockCache {
    pub input: Tensor,
    pub q_pre: Tensor,
    pub q: Tensor,
    pub k_pre: Tensor,
    pub k: Tensor,
    pub v_pre: Tensor,
    pub v: Tensor,
    pub score_pre: Tensor,
    pub score: Tensor,
    pub attended: Tensor,
    pub context_pre: Tensor,
    pub context: Tensor,
    pub h1: Tensor,
    pub mlp1_pre: Tensor,
    pub mlp1: Tensor,
    pub mlp2_pre: Tensor,
    pub mlp2: Tensor,
    pub output: Tensor,
}

impl BlockCache {
    /// Post-ReLU activations in [`POPULATIONS`] order.
    pub fn populations(&self) -> [&Tensor; 7] {
        [
            &self.q,
            &self.k,
            &self.v,
            &self.score,
            &self.context,
            &self.mlp1,
            &self.mlp2,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub blocks: Vec<BlockCache>,
    pub pooled: Tensor,
    pub logits: Tensor,
    fingerprint: u64,
}

fn block_forward(block: &BlockParams, d_head: usize, x: &Tensor) -> Result<BlockCache> {
    let q_pre = matmul(x, &block.w_q)?;
    let k_pre = matmul(x, &block.w_k)?;
    let v_pre = matmul(x, &block.w_v)?;
    let (q, k, v) = (q_pre.relu(), k_pre.relu(), v_pre.relu());
    let score_pre = matmul_nt(&q, &k)?.scale(1.0 / d_head as f64);
    let score = score_pre.relu();
    let attended = matmul(&score, &v)?;
    let context_pre = matmul(&attended, &block.w_o)?;
    let context = context_pre.relu();
    let h1 = x.add(&context)?;
    let mlp1_pre = matmul(&h1, &block.w_mlp1)?;
    let mlp1 = mlp1_pre.relu();
    let mlp2_pre = matmul(&mlp1, &block.w_mlp2)?;
    let mlp2 = mlp2_pre.relu();
    let output = h1.add(&mlp2)?;
    Ok(BlockCache {
        input: x.clone(),
        q_pre,
        q,
        k_pre,
        k,
        v_pre,
        v,
        score_pre,
        score,
        attended,
        context_pre,
        context,
        h1,
        mlp1_pre,
        mlp1,
        mlp2_pre,
        mlp2,
        output,
    })
}

/// Forward pass for one sample `x` of shape `n_tokens x d_model`.
pub fn ann_forward(p: &AnnParams, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let d = &p.dims;
    if x.shape() != [d.n_tokens, d.d_model] {
        return Err(EstError::Dimension {
            op: "ann_forward",
            left: x.shape().to_vec(),
            right: vec![d.n_tokens, d.d_model],
        });
    }
    let mut blocks = Vec::with_capacity(p.blocks.len());
    let mut h = x.clone();
    for block in &p.blocks {
        let cache = block_forward(block, d.d_head, &h)?;
        h = cache.output.clone();
        blocks.push(cache);
    }
    let pooled = h.mean_rows()?;
    let logits = matmul(&pooled, &p.w_cls)?;
    Ok((
        logits.clone(),
        ForwardCache {
            blocks,
            pooled,
            logits,
            fingerprint: p.fingerprint(),
        },
    ))
}

fn relu_gate(grad: &Tensor, pre: &Tensor) -> Result<Tensor> {
    grad.hadamard(&pre.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
}

/// Backpropagates `grad_out` (gradient w.r.t. the block output) through one
/// block, writing weight gradients into `g` and returning the input gradient.
fn block_backward(
    block: &BlockParams,
    c: &BlockCache,
    d_head: usize,
    grad_out: &Tensor,
    g: &mut BlockParams,
) -> Result<Tensor> {
    // h2 = h1 + relu(relu(h1 W1) W2)
    let d_mlp2_pre = relu_gate(grad_out, &c.mlp2_pre)?;
    g.w_mlp2 = matmul_tn(&c.mlp1, &d_mlp2_pre)?;
    let d_mlp1 = matmul_nt(&d_mlp2_pre, &block.w_mlp2)?;
    let d_mlp1_pre = relu_gate(&d_mlp1, &c.mlp1_pre)?;
    g.w_mlp1 = matmul_tn(&c.h1, &d_mlp1_pre)?;
    let mut d_h1 = grad_out.clone();
    d_h1.add_assign(&matmul_nt(&d_mlp1_pre, &block.w_mlp1)?)?;

    // h1 = x + relu((A V) Wo)
    let d_context_pre = relu_gate(&d_h1, &c.context_pre)?;
    g.w_o = matmul_tn(&c.attended, &d_context_pre)?;
    let d_attended = matmul_nt(&d_context_pre, &block.w_o)?;
    let d_score = matmul_nt(&d_attended, &c.v)?;
    let d_v = matmul_tn(&c.score, &d_attended)?;

    // A = relu(Q K^T / d)
    let d_score_pre = relu_gate(&d_score, &c.score_pre)?.scale(1.0 / d_head as f64);
    let d_q = matmul(&d_score_pre, &c.k)?;
    let d_k = matmul_tn(&d_score_pre, &c.q)?;

    let d_q_pre = relu_gate(&d_q, &c.q_pre)?;
    let d_k_pre = relu_gate(&d_k, &c.k_pre)?;
    let d_v_pre = relu_gate(&d_v, &c.v_pre)?;
    g.w_q = matmul_tn(&c.input, &d_q_pre)?;
    g.w_k = matmul_tn(&c.input, &d_k_pre)?;
    g.w_v = matmul_tn(&c.input, &d_v_pre)?;

    let mut d_x = d_h1;
    d_x.add_assign(&matmul_nt(&d_q_pre, &block.w_q)?)?;
    d_x.add_assign(&matmul_nt(&d_k_pre, &block.w_k)?)?;
    d_x.add_assign(&matmul_nt(&d_v_pre, &block.w_v)?)?;
    Ok(d_x)
}

/// Analytic gradients of a scalar loss given `dL/dlogits`. The result has
/// exactly the shapes of `p`.
pub fn ann_backward(
    p: &AnnParams,
    cache: &ForwardCache,
    grad_logits: &Tensor,
) -> Result<AnnParams> {
    if cache.fingerprint != p.fingerprint() || cache.blocks.len() != p.blocks.len() {
        return Err(EstError::Consistency(
            "forward cache was produced by different parameters".into(),
        ));
    }
    if grad_logits.shape() != cache.logits.shape() {
        return Err(EstError::Dimension {
            op: "ann_backward",
            left: grad_logits.shape().to_vec(),
            right: cache.logits.shape().to_vec(),
        });
    }
    let d = p.dims;
    let mut g = AnnParams::zeros(d)?;
    g.w_cls = matmul_tn(&cache.pooled, grad_logits)?;
    let d_pooled = matmul_nt(grad_logits, &p.w_cls)?;
    let scale = 1.0 / d.n_tokens as f64;
    let row: Vec<f64> = d_pooled.values().iter().map(|v| v * scale).collect();
    let mut grad = Tensor::new(vec![d.n_tokens, d.d_model], row.repeat(d.n_tokens))?;
    for b in (0..p.blocks.len()).rev() {
        grad = block_backward(
            &p.blocks[b],
            &cache.blocks[b],
            d.d_head,
            &grad,
            &mut g.blocks[b],
        )?;
    }
    Ok(g)
}

/// Softmax cross-entropy for one sample: `(loss, dL/dlogits)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let z = logits.values();
    if label >= z.len() {
        return Err(EstError::Input(format!(
            "label {label} out of range for {} classes",
            z.len()
        )));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (z[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn dims(n: usize, dm: usize, dh: usize, blocks: usize) -> AnnDims {
        AnnDims {
            n_tokens: n,
            d_model: dm,
            d_head: dh,
            d_hidden: 2 * dm,
            n_classes: 3,
            blocks,
        }
    }

    fn random_input(n: usize, dm: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        Tensor::new(
            vec![n, dm],
            (0..n * dm).map(|_| normal.sample(&mut rng)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_input_gives_zero_everything() {
        let p = AnnParams::init(dims(4, 8, 4, 2), 1).unwrap();
        let (logits, cache) = ann_forward(&p, &Tensor::zeros(&[4, 8])).unwrap();
        assert!(logits.values().iter().all(|&v| v == 0.0));
        for b in &cache.blocks {
            for t in b.populations() {
                assert!(t.values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn scalar_hand_trace() {
        let d = AnnDims {
            n_tokens: 1,
            d_model: 1,
            d_head: 1,
            d_hidden: 1,
            n_classes: 1,
            blocks: 1,
        };
        let mut p = AnnParams::zeros(d).unwrap();
        for (_, t) in p.named_mut() {
            t.values_mut()[0] = 1.0;
        }
        let x = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        let (logits, cache) = ann_forward(&p, &x).unwrap();
        let c = &cache.blocks[0];
        assert_eq!(c.q.values(), &[2.0]);
        assert_eq!(c.k.values(), &[2.0]);
        assert_eq!(c.v.values(), &[2.0]);
        assert_eq!(c.score.values(), &[4.0]);
        assert_eq!(c.context.values(), &[8.0]);
        // h1 = 10, mlp1 = 10, mlp2 = 10, h2 = 20
        assert_eq!(logits.values(), &[20.0]);
    }

    /// Independent loop-nest re-implementation of the single-block forward.
    fn straight_line_logits(p: &AnnParams, x: &Tensor) -> Vec<f64> {
        let d = p.dims;
        let (n, dm, dh, dz) = (d.n_tokens, d.d_model, d.d_head, d.d_hidden);
        let b = &p.blocks[0];
        let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
        let lin = |inp: &Vec<Vec<f64>>, w: &Tensor, cols: usize| -> Vec<Vec<f64>> {
            inp.iter()
                .map(|row| {
                    (0..cols)
                        .map(|j| row.iter().enumerate().map(|(p, v)| v * w.at(p, j)).sum())
                        .collect()
                })
                .collect()
        };
        let xr: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
        let act = |m: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.into_iter()
                .map(|r| r.into_iter().map(relu).collect())
                .collect()
        };
        let q = act(lin(&xr, &b.w_q, dh));
        let k = act(lin(&xr, &b.w_k, dh));
        let v = act(lin(&xr, &b.w_v, dh));
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..dh).map(|c| q[i][c] * k[j][c]).sum();
                a[i][j] = relu(dot / dh as f64);
            }
        }
        let mut av = vec![vec![0.0; dh]; n];
        for i in 0..n {
            for c in 0..dh {
                av[i][c] = (0..n).map(|j| a[i][j] * v[j][c]).sum();
            }
        }
        let ctx = act(lin(&av, &b.w_o, dm));
        let h1: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..dm).map(|c| xr[i][c] + ctx[i][c]).collect())
            .collect();
        let m1 = act(lin(&h1, &b.w_mlp1, dz));
        let m2 = act(lin(&m1, &b.w_mlp2, dm));
        let pooled: Vec<f64> = (0..dm)
            .map(|c| (0..n).map(|i| h1[i][c] + m2[i][c]).sum::<f64>() / n as f64)
            .collect();
        (0..d.n_classes)
            .map(|j| (0..dm).map(|c| pooled[c] * p.w_cls.at(c, j)).sum())
            .collect()
    }

    #[test]
    fn matches_straight_line_oracle() {
        let p = AnnParams::init(dims(4, 8, 4, 1), 42).unwrap();
        for s in 0..5 {
            let x = random_input(4, 8, 100 + s);
            let (logits, _) = ann_forward(&p, &x).unwrap();
            let oracle = straight_line_logits(&p, &x);
            for (a, b) in logits.values().iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let p = AnnParams::init(dims(4, 8, 4, 1), 0).unwrap();
        assert!(matches!(
            ann_forward(&p, &Tensor::zeros(&[3, 8])),
            Err(EstError::Dimension { .. })
        ));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let p = AnnParams::init(dims(4, 8, 4, 2), 3).unwrap();
        let (_, cache) = ann_forward(&p, &random_input(4, 8, 9)).unwrap();
        let g = ann_backward(&p, &cache, &Tensor::zeros(&[1, 3])).unwrap();
        for (_, t) in g.named() {
            assert!(t.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let p = AnnParams::init(dims(4, 8, 4, 1), 3).unwrap();
        let (_, cache) = ann_forward(&p, &random_input(4, 8, 9)).unwrap();
        let mut q = p.clone();
        q.w_cls.values_mut()[0] += 1.0;
        assert!(matches!(
            ann_backward(&q, &cache, &Tensor::zeros(&[1, 3])),
            Err(EstError::Consistency(_))
        ));
    }

    #[test]
    fn dead_query_unit_gets_no_gradient() {
        let mut p = AnnParams::init(dims(4, 8, 4, 1), 5).unwrap();
        // Positive inputs and a non-positive column 0 of W_q keep q unit 0 dead.
        for r in 0..8 {
            let v = &mut p.blocks[0].w_q.values_mut()[r * 4];
            *v = -v.abs() - 0.1;
        }
        let x = random_input(4, 8, 1).map(f64::abs);
        let (logits, cache) = ann_forward(&p, &x).unwrap();
        assert!(cache.blocks[0].q_pre.to_rows().iter().all(|r| r[0] < 0.0));
        let (_, grad) = softmax_cross_entropy(&logits, 1).unwrap();
        let g = ann_backward(&p, &cache, &grad).unwrap();
        for r in 0..8 {
            assert_eq!(g.blocks[0].w_q.at(r, 0), 0.0);
        }
    }

    #[test]
    fn positive_scaling_scales_pre_relu_projections() {
        let p = AnnParams::init(dims(4, 8, 4, 1), 8).unwrap();
        let x = random_input(4, 8, 2);
        let (_, c1) = ann_forward(&p, &x).unwrap();
        let (_, c2) = ann_forward(&p, &x.scale(2.5)).unwrap();
        let (a, b) = (&c1.blocks[0], &c2.blocks[0]);
        for (lo, hi) in [(&a.q, &b.q), (&a.k, &b.k), (&a.v, &b.v)] {
            for (u, w) in lo.values().iter().zip(hi.values()) {
                assert!((2.5 * u - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn softmax_gradient_sums_to_zero() {
        let logits = Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let (loss, g) = softmax_cross_entropy(&logits, 2).unwrap();
        assert!(loss > 0.0);
        assert!(g.values().iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn named_round_trip() {
        let p = AnnParams::init(dims(2, 3, 2, 2), 1).unwrap();
        let map = p
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect::<BTreeMap<_, _>>();
        assert!(map.contains_key("b1.W_q"));
        assert_eq!(AnnParams::from_named(p.dims, map).unwrap(), p);
    }
}
