//! Spiking transformer engine: integrate-and-fire self-attention with
//! optional partial-information scheduling, ANN-to-SNN conversion of a toy
//! ReLU-attention transformer, and spike/operation accounting.

pub mod ann;
pub mod convert;
pub mod data;
pub mod error;
pub mod io;
pub mod metrics;
pub mod neuron;
pub mod snn;
pub mod spikes;
pub mod tensor;
pub mod train;

pub use ann::{ann_backward, ann_forward, AnnDims, AnnParams, ForwardCache};
pub use convert::{calibrate_thresholds, convert, CalibrationReport, ThresholdSet};
pub use data::{gen_synthetic, Dataset};
pub use error::{EstError, Result};
pub use metrics::{OpsReport, SpikeRecord};
pub use neuron::{encode_direct, if_init, if_step, rate_decode, IfState};
pub use snn::{run_batch, snn_forward, GainMode, Mode, PsaSchedule, SnnModel};
pub use spikes::{SpikeFrame, SpikeTrain};
pub use tensor::{matmul, Tensor};
pub use train::{gradient_check, train_sgd, SgdConfig};
