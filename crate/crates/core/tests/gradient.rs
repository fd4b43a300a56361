use est_core::{gradient_check, AnnDims, AnnParams, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn input(seed: u64, n: usize, d: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![n, d],
        (0..n * d).map(|_| rng.random_range(-1.0..2.0)).collect(),
    )
    .unwrap()
}

#[test]
fn backprop_matches_finite_differences_single_block() {
    let dims = AnnDims {
        n_tokens: 4,
        d_model: 8,
        d_head: 4,
        d_hidden: 16,
        n_classes: 3,
        blocks: 1,
    };
    for seed in [1u64, 2, 3] {
        let p = AnnParams::init(dims, seed).unwrap();
        let err = gradient_check(
            &p,
            &input(seed + 100, 4, 8),
            (seed % 3) as usize,
            1e-5,
            1e-8,
        )
        .unwrap();
        assert!(err <= 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn backprop_matches_finite_differences_stacked_blocks() {
    let dims = AnnDims {
        n_tokens: 3,
        d_model: 5,
        d_head: 3,
        d_hidden: 6,
        n_classes: 2,
        blocks: 3,
    };
    let p = AnnParams::init(dims, 9).unwrap();
    let err = gradient_check(&p, &input(9, 3, 5), 1, 1e-5, 1e-8).unwrap();
    assert!(err <= 1e-4, "max relative error {err}");
}
