//! ANN-to-SNN conversion by threshold balancing.
//!
//! Each ReLU population becomes an integrate-and-fire population whose
//! threshold is a percentile of that population's ANN activations over a
//! calibration set. Weights are carried over untouched; the thresholds hold
//! all of the scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ann::{ann_forward, block_prefix, AnnParams, POPULATIONS};
use crate::data::Dataset;
use crate::error::{EstError, Result};
use crate::snn::{Mode, PsaSchedule, SnnModel};

pub const DEFAULT_PERCENTILE: f64 = 99.9;

/// Threshold per spiking population, keyed by population name
/// (`q`, `k`, ..., with a `b{i}.` prefix for blocks after the first).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdSet(pub BTreeMap<String, f64>);

impl ThresholdSet {
    pub fn population_names(blocks: usize) -> Vec<String> {
        (0..blocks)
            .flat_map(|b| {
                let prefix = block_prefix(b);
                POPULATIONS.iter().map(move |p| format!("{prefix}{p}"))
            })
            .collect()
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| EstError::Config(format!("missing threshold for population {name}")))
    }

    pub fn insert(&mut self, name: impl Into<String>, v: f64) {
        self.0.insert(name.into(), v);
    }

    /// Every population of a `blocks`-block model present with `v > 0`.
    pub fn validate(&self, blocks: usize) -> Result<()> {
        for name in Self::population_names(blocks) {
            let v = self.get(&name)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(EstError::Threshold(v));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationCalibration {
    pub population: String,
    pub observed_max: f64,
    pub percentile_value: f64,
    pub threshold: f64,
    /// Set when the percentile value was zero and the threshold fell back to 1.
    pub dead: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub method: String,
    pub percentile: f64,
    pub samples: usize,
    pub populations: Vec<PopulationCalibration>,
}

impl CalibrationReport {
    pub fn thresholds(&self) -> ThresholdSet {
        ThresholdSet(
            self.populations
                .iter()
                .map(|p| (p.population.clone(), p.threshold))
                .collect(),
        )
    }
}

/// Nearest-rank percentile of an ascending-sorted slice.
pub fn percentile_of_sorted(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn calibrate_thresholds(
    ann: &AnnParams,
    calib: &Dataset,
    percentile: f64,
) -> Result<(ThresholdSet, CalibrationReport)> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(EstError::Config(format!(
            "percentile must lie in (0, 100], got {percentile}"
        )));
    }
    if calib.is_empty() {
        return Err(EstError::Input("empty calibration set".into()));
    }
    let names = ThresholdSet::population_names(ann.dims.blocks);
    let mut acts: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for x in &calib.inputs {
        let (_, cache) = ann_forward(ann, x)?;
        for (b, block) in cache.blocks.iter().enumerate() {
            for (p, t) in block.populations().iter().enumerate() {
                acts[b * POPULATIONS.len() + p].extend_from_slice(t.values());
            }
        }
    }

    let mut set = ThresholdSet::default();
    let mut populations = Vec::with_capacity(names.len());
    for (name, mut values) in names.into_iter().zip(acts) {
        values.sort_by(f64::total_cmp);
        let observed_max = *values.last().expect("non-empty");
        let percentile_value = percentile_of_sorted(&values, percentile);
        let dead = percentile_value <= 0.0;
        let threshold = if dead { 1.0 } else { percentile_value };
        if dead {
            log::warn!("population {name} is silent on the calibration set; threshold set to 1");
        }
        set.insert(name.clone(), threshold);
        populations.push(PopulationCalibration {
            population: name,
            observed_max,
            percentile_value,
            threshold,
            dead,
        });
    }
    let report = CalibrationReport {
        method: "post-hoc percentile threshold balancing".into(),
        percentile,
        samples: calib.len(),
        populations,
    };
    Ok((set, report))
}

/// Binds weights and thresholds into a spiking model. Weights are cloned
/// bit-for-bit.
pub fn convert(
    ann: &AnnParams,
    th: &ThresholdSet,
    schedule: PsaSchedule,
    mode: Mode,
) -> Result<SnnModel> {
    SnnModel::new(ann.clone(), th.clone(), schedule, mode)
}
