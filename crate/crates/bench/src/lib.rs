//! Fixtures shared by the benchmarks.

use est_core::snn::{GainMode, Mode, PsaSchedule, SnnModel};
use est_core::{calibrate_thresholds, convert, gen_synthetic, AnnDims, AnnParams, Dataset};

pub fn dims() -> AnnDims {
    AnnDims {
        n_tokens: 8,
        d_model: 16,
        d_head: 8,
        d_hidden: 32,
        n_classes: 4,
        blocks: 2,
    }
}

/// Untrained model and a small dataset matching [`dims`].
pub fn setup() -> (AnnParams, Dataset) {
    let d = dims();
    let ann = AnnParams::init(d, 1).expect("init");
    let data = gen_synthetic(8, d.n_classes, d.n_tokens, d.d_model, 2).expect("data");
    (ann, data)
}

pub fn spiking(ann: &AnnParams, data: &Dataset, t: usize, mode: Mode) -> SnnModel {
    let (th, _) = calibrate_thresholds(ann, data, 99.9).expect("calibrate");
    let rho = if mode == Mode::Sa { 1.0 } else { 0.5 };
    let schedule = PsaSchedule::new(t, rho, GainMode::Auto).expect("schedule");
    convert(ann, &th, schedule, mode).expect("convert")
}
