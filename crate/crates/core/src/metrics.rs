//! Spike and operation accounting, accuracy, and CSV export.
//!
//! * mean spike count of a layer = total spikes / (T * samples)
//! * synaptic operations of a layer = total spikes * fan-out, where fan-out
//!   is the number of downstream accumulate positions one spike reaches

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ann::POPULATIONS;
use crate::error::{EstError, Result};
use crate::snn::{BlockSpikes, SnnModel};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerRecord {
    pub name: String,
    /// Neurons in the population.
    pub size: usize,
    /// Spikes per step, summed over samples.
    pub counts: Vec<u64>,
}

impl LayerRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_through(&self, steps: usize) -> u64 {
        self.counts.iter().take(steps).sum()
    }
}

/// Per-layer, per-step spike counts accumulated over one or more samples,
/// plus per-pair score spike counts for heatmaps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeRecord {
    pub timesteps: usize,
    pub samples: usize,
    pub n_tokens: usize,
    pub layers: Vec<LayerRecord>,
    /// One `n_tokens x n_tokens` count matrix per block, row-major.
    pub score_pairs: Vec<Vec<u64>>,
}

impl SpikeRecord {
    pub fn for_model(m: &SnnModel) -> Self {
        let t = m.schedule.timesteps();
        let n = m.params.dims.n_tokens;
        Self {
            timesteps: t,
            samples: 0,
            n_tokens: n,
            layers: m
                .layer_layout()
                .into_iter()
                .map(|(name, size)| LayerRecord {
                    name,
                    size,
                    counts: vec![0; t],
                })
                .collect(),
            score_pairs: vec![vec![0; n * n]; m.params.dims.blocks],
        }
    }

    /// Adds the spikes of 1-based step `t`.
    pub fn add_step(&mut self, t: usize, blocks: &[BlockSpikes]) -> Result<()> {
        if t == 0 || t > self.timesteps {
            return Err(EstError::Sequencing {
                step: t,
                timesteps: self.timesteps,
            });
        }
        if blocks.len() * POPULATIONS.len() != self.layers.len() {
            return Err(EstError::Consistency(format!(
                "{} blocks of spikes for a {}-layer record",
                blocks.len(),
                self.layers.len()
            )));
        }
        for (b, spikes) in blocks.iter().enumerate() {
            for (p, frame) in spikes.frames().iter().enumerate() {
                let layer = &mut self.layers[b * POPULATIONS.len() + p];
                let c = frame.count();
                if c as usize > layer.size {
                    return Err(EstError::Accounting(format!(
                        "{c} spikes in {}-neuron layer {}",
                        layer.size, layer.name
                    )));
                }
                layer.counts[t - 1] += c;
            }
            for (acc, &bit) in self.score_pairs[b].iter_mut().zip(spikes.score.bits()) {
                *acc += u64::from(bit);
            }
        }
        Ok(())
    }

    /// Commutative merge of another record with the same layout.
    pub fn merge(&mut self, other: &SpikeRecord) -> Result<()> {
        let same_layout = self.timesteps == other.timesteps
            && self.n_tokens == other.n_tokens
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.name == b.name && a.size == b.size);
        if !same_layout {
            return Err(EstError::Consistency(
                "cannot merge records of different models".into(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
        }
        for (a, b) in self.score_pairs.iter_mut().zip(&other.score_pairs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.samples += other.samples;
        Ok(())
    }

    pub fn total_spikes(&self) -> u64 {
        self.layers.iter().map(LayerRecord::total).sum()
    }

    pub fn layer(&self, name: &str) -> Option<&LayerRecord> {
        self.layers.iter().find(|l| l.name == name)
    }
}

/// Mean spike count per layer: spikes / (T * samples).
pub fn mean_spike_count(rec: &SpikeRecord) -> Result<Vec<(String, f64)>> {
    if rec.samples == 0 {
        return Err(EstError::Input("spike record holds no samples".into()));
    }
    let denom = (rec.timesteps * rec.samples) as f64;
    Ok(rec
        .layers
        .iter()
        .map(|l| (l.name.clone(), l.total() as f64 / denom))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerOps {
    pub layer: String,
    pub spikes: u64,
    pub fan_out: u64,
    pub ops: u64,
    pub formula: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpsReport {
    pub layers: Vec<LayerOps>,
    pub total: u64,
}

/// Population name with any `b{i}.` block prefix removed.
pub fn population_of(layer: &str) -> &str {
    match layer.split_once('.') {
        Some((b, rest)) if b.starts_with('b') => rest,
        _ => layer,
    }
}

impl OpsReport {
    /// Operations summed over every block's populations named in `names`.
    pub fn ops_of(&self, names: &[&str]) -> u64 {
        self.layers
            .iter()
            .filter(|l| names.contains(&population_of(&l.layer)))
            .map(|l| l.ops)
            .sum()
    }
}

/// Layers whose work partial information removes.
pub const QK_SCORE_LAYERS: [&str; 3] = ["q", "k", "score"];

/// Fan-out of each population of a block, with a human-readable reason.
fn fan_outs(m: &SnnModel, block: usize) -> [(u64, String); 7] {
    let d = &m.params.dims;
    let (n, dh, dm, dz) = (d.n_tokens, d.d_head, d.d_model, d.d_hidden);
    let (next, next_desc) = if block + 1 < d.blocks {
        (3 * dh, "3*d_head (next block q/k/v)")
    } else {
        (d.n_classes, "n_classes (readout)")
    };
    [
        (n as u64, "n_tokens (score neurons in the row)".into()),
        (n as u64, "n_tokens (score neurons in the column)".into()),
        (n as u64, "n_tokens (query rows of A*V)".into()),
        (dh as u64, "d_head (value positions gated in A*V)".into()),
        ((dz + next) as u64, format!("d_hidden + {next_desc}")),
        (dm as u64, "d_model (mlp2 inputs)".into()),
        (next as u64, next_desc.to_string()),
    ]
}

/// Accumulate operations per layer: spikes * fan-out.
pub fn synops(rec: &SpikeRecord, m: &SnnModel) -> Result<OpsReport> {
    let layout = m.layer_layout();
    let matches = rec.layers.len() == layout.len()
        && rec
            .layers
            .iter()
            .zip(&layout)
            .all(|(l, (name, size))| &l.name == name && l.size == *size);
    if !matches || rec.n_tokens != m.params.dims.n_tokens {
        return Err(EstError::Consistency(
            "spike record does not match the model's layers".into(),
        ));
    }
    let mut layers = Vec::with_capacity(rec.layers.len());
    for (i, l) in rec.layers.iter().enumerate() {
        let block = i / POPULATIONS.len();
        let (fan_out, why) = fan_outs(m, block)[i % POPULATIONS.len()].clone();
        let spikes = l.total();
        layers.push(LayerOps {
            layer: l.name.clone(),
            spikes,
            fan_out,
            ops: spikes * fan_out,
            formula: format!("spikes * {why}"),
        });
    }
    let total = layers.iter().map(|l| l.ops).sum();
    Ok(OpsReport { layers, total })
}

/// `(base - other) / max(base, other)`; 0 when both are 0. Lies in [-1, 1].
pub fn reduction(base: f64, other: f64) -> f64 {
    let denom = base.max(other);
    if denom <= 0.0 {
        0.0
    } else {
        (base - other) / denom
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax logit equals the label.
pub fn accuracy(logits: &[Tensor], labels: &[usize]) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(EstError::Input(format!(
            "{} predictions for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(EstError::Input("accuracy of an empty set".into()));
    }
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(l, &y)| argmax(l.values()) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Argmax agreement between two sets of logits.
pub fn agreement(a: &[Tensor], b: &[Tensor]) -> Result<f64> {
    let labels: Vec<usize> = b.iter().map(|l| argmax(l.values())).collect();
    accuracy(a, &labels)
}

/// Firing rate of each score neuron of `block`: count / (T * samples).
pub fn attention_heatmap(rec: &SpikeRecord, block: usize) -> Result<Tensor> {
    let pairs = rec
        .score_pairs
        .get(block)
        .ok_or_else(|| EstError::Input(format!("no score record for block {block}")))?;
    let denom = (rec.timesteps * rec.samples.max(1)) as f64;
    Tensor::new(
        vec![rec.n_tokens, rec.n_tokens],
        pairs.iter().map(|&c| c as f64 / denom).collect(),
    )
}

/// Fixed 9-significant-digit decimal rendering.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x == 0.0 {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding may have carried into a new leading digit (9.99... -> 10.0...).
    let carried = s
        .trim_start_matches('-')
        .split('.')
        .next()
        .map_or(0, str::len) as i32
        > exp + 1
        && exp >= 0;
    if carried && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn write_heatmap_csv<W: Write>(rates: &Tensor, mut w: W) -> Result<()> {
    let (r, c) = rates.dims2()?;
    let header: Vec<String> = (0..c).map(|j| format!("k{j}")).collect();
    writeln!(w, "query\\key,{}", header.join(","))?;
    for i in 0..r {
        let row: Vec<String> = rates.row(i).iter().map(|&v| fmt_sig9(v)).collect();
        writeln!(w, "q{i},{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub mode: String,
    pub timesteps: usize,
    pub rho: f64,
    pub gain: f64,
    pub layer: String,
    pub mean_spike_count: f64,
    pub synops: f64,
    pub accuracy: f64,
}

pub const METRICS_HEADER: &str = "run_id,mode,T,rho,gain,layer,mean_spike_count,synops,accuracy";

pub const METRICS_PREAMBLE: &str = "# mean_spike_count = spikes / (T * samples); \
synops = spikes * fan_out (accumulate events)";

/// One row per layer plus a `total` row.
pub fn metrics_rows(
    run_id: &str,
    m: &SnnModel,
    rec: &SpikeRecord,
    accuracy: f64,
) -> Result<Vec<MetricsRow>> {
    let means = mean_spike_count(rec)?;
    let ops = synops(rec, m)?;
    let row = |layer: String, msc: f64, syn: f64| MetricsRow {
        run_id: run_id.to_string(),
        mode: m.effective_mode().as_str().to_string(),
        timesteps: m.schedule.timesteps(),
        rho: m.schedule.rho(),
        gain: m.schedule.gain(),
        layer,
        mean_spike_count: msc,
        synops: syn,
        accuracy,
    };
    let mut rows: Vec<MetricsRow> = means
        .iter()
        .zip(&ops.layers)
        .map(|((name, msc), o)| row(name.clone(), *msc, o.ops as f64))
        .collect();
    let total_msc = means.iter().map(|(_, v)| v).sum();
    rows.push(row("total".into(), total_msc, ops.total as f64));
    Ok(rows)
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut w: W) -> Result<()> {
    writeln!(w, "{METRICS_PREAMBLE}")?;
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.mode,
            r.timesteps,
            fmt_sig9(r.rho),
            fmt_sig9(r.gain),
            r.layer,
            fmt_sig9(r.mean_spike_count),
            fmt_sig9(r.synops),
            fmt_sig9(r.accuracy)
        )?;
    }
    Ok(())
}
