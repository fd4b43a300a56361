//! JSON model files.
//!
//! ANN: `{"dims": {...}, "weights": {"W_q": [[...], ...], ...}}`.
//! SNN: the same plus `thresholds`, `schedule` and `mode`. Weight matrices
//! are nested row arrays; floats are written in shortest round-trip form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ann::{AnnDims, AnnParams};
use crate::convert::ThresholdSet;
use crate::error::{EstError, Result};
use crate::snn::{GainMode, Mode, PsaSchedule, SnnModel};
use crate::tensor::Tensor;

type WeightMap = BTreeMap<String, Vec<Vec<f64>>>;

#[derive(Serialize, Deserialize)]
struct AnnFile {
    dims: AnnDims,
    weights: WeightMap,
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    #[serde(rename = "T")]
    timesteps: usize,
    rho: f64,
    gain: f64,
    #[serde(default)]
    gain_mode: Option<GainMode>,
}

#[derive(Serialize, Deserialize)]
struct SnnFile {
    dims: AnnDims,
    weights: WeightMap,
    thresholds: ThresholdSet,
    schedule: ScheduleFile,
    mode: Mode,
}

fn weight_map(p: &AnnParams) -> WeightMap {
    p.named()
        .into_iter()
        .map(|(name, t)| (name, t.to_rows()))
        .collect()
}

fn params_from(dims: AnnDims, weights: WeightMap) -> Result<AnnParams> {
    let tensors = weights
        .into_iter()
        .map(|(name, rows)| {
            Tensor::from_rows(&rows)
                .map(|t| (name.clone(), t))
                .map_err(|e| EstError::Config(format!("weight {name}: {e}")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    AnnParams::from_named(dims, tensors)
}

/// Serialised weight payload alone; identical for an ANN and its conversion.
pub fn weights_json(p: &AnnParams) -> Result<String> {
    Ok(serde_json::to_string(&weight_map(p))?)
}

pub fn ann_to_json(p: &AnnParams) -> Result<String> {
    Ok(serde_json::to_string_pretty(&AnnFile {
        dims: p.dims,
        weights: weight_map(p),
    })?)
}

pub fn ann_from_json(text: &str) -> Result<AnnParams> {
    let f: AnnFile = serde_json::from_str(text)?;
    params_from(f.dims, f.weights)
}

pub fn snn_to_json(m: &SnnModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SnnFile {
        dims: m.params.dims,
        weights: weight_map(&m.params),
        thresholds: m.thresholds.clone(),
        schedule: ScheduleFile {
            timesteps: m.schedule.timesteps(),
            rho: m.schedule.rho(),
            gain: m.schedule.gain(),
            gain_mode: Some(m.schedule.gain_mode()),
        },
        mode: m.mode,
    })?)
}

pub fn snn_from_json(text: &str) -> Result<SnnModel> {
    let f: SnnFile = serde_json::from_str(text)?;
    let s = f.schedule;
    let gain_mode = s.gain_mode.unwrap_or(if s.gain == 1.0 && s.rho < 1.0 {
        GainMode::Unity
    } else {
        GainMode::Auto
    });
    let schedule = PsaSchedule::new(s.timesteps, s.rho, gain_mode)?;
    if f.mode == Mode::Psa && (schedule.gain() - s.gain).abs() > 1e-12 {
        return Err(EstError::Config(format!(
            "schedule gain {} disagrees with gain mode {gain_mode:?} (expected {})",
            s.gain,
            schedule.gain()
        )));
    }
    let params = params_from(f.dims, f.weights)?;
    SnnModel::new(params, f.thresholds, schedule, f.mode)
}
