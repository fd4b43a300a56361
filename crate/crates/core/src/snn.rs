//! Spiking forward pass of the converted transformer.
//!
//! Per step and per block:
//!
//! * `Q, K, V`: IF populations driven by `x[t] W`. Under partial-information
//!   scheduling the Q and K populations only run for the first `T_qk` steps
//!   and are skipped entirely afterwards; V runs for all `T` steps.
//! * score: IF population over token pairs, driven by
//!   `gain * (q[t] . k[t]) / d_head` while Q/K are active and by zero
//!   afterwards (it keeps integrating, so residual charge may still fire).
//! * context: driven by `(a[t] v[t]) W_o`.
//! * MLP and residuals: spikes re-enter the residual stream as currents
//!   scaled by the upstream threshold, so rates add in activation units.
//!
//! Score and context currents are formed from raw 0/1 spikes; their
//! thresholds are divided by the upstream thresholds instead. The classifier
//! is not spiking: it reads the time-averaged residual stream once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{block_prefix, AnnParams, BlockParams, POPULATIONS};
use crate::convert::ThresholdSet;
use crate::error::{EstError, Result};
use crate::metrics::SpikeRecord;
use crate::neuron::IfState;
use crate::spikes::SpikeFrame;
use crate::tensor::{matmul, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sa,
    Psa,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sa => "sa",
            Mode::Psa => "psa",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = EstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa" => Ok(Mode::Sa),
            "psa" => Ok(Mode::Psa),
            _ => Err(EstError::Config(format!("unknown mode {s:?} (sa|psa)"))),
        }
    }
}

/// How the score input is compensated during the active window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// `T / T_qk`, so the time-averaged score drive matches full information.
    #[default]
    Auto,
    /// No compensation.
    Unity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsaSchedule {
    timesteps: usize,
    rho: f64,
    active_steps: usize,
    gain: f64,
    gain_mode: GainMode,
}

impl PsaSchedule {
    pub fn new(timesteps: usize, rho: f64, gain_mode: GainMode) -> Result<Self> {
        if timesteps == 0 {
            return Err(EstError::Config("timesteps must be >= 1".into()));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(EstError::Config(format!(
                "rho must lie in (0, 1], got {rho}"
            )));
        }
        // The epsilon keeps e.g. 0.1 * 30 = 3.0000000000000004 from rounding up.
        let active_steps = ((rho * timesteps as f64 - 1e-9).ceil() as usize).clamp(1, timesteps);
        let gain = match gain_mode {
            _ if rho == 1.0 => 1.0,
            GainMode::Auto => timesteps as f64 / active_steps as f64,
            GainMode::Unity => 1.0,
        };
        Ok(Self {
            timesteps,
            rho,
            active_steps,
            gain,
            gain_mode,
        })
    }

    /// Full information: every step active, unit gain.
    pub fn full(timesteps: usize) -> Result<Self> {
        Self::new(timesteps, 1.0, GainMode::Auto)
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `T_qk = ceil(rho * T)`.
    pub fn active_steps(&self) -> usize {
        self.active_steps
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn gain_mode(&self) -> GainMode {
        self.gain_mode
    }

    pub fn with_timesteps(&self, timesteps: usize) -> Result<Self> {
        Self::new(timesteps, self.rho, self.gain_mode)
    }

    /// 1-based step `t` falls in the Q/K window.
    pub fn qk_active(&self, t: usize) -> bool {
        t <= self.active_steps
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps {
            return Err(EstError::Sequencing {
                step: t,
                timesteps: self.timesteps,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnnModel {
    pub params: AnnParams,
    pub thresholds: ThresholdSet,
    pub schedule: PsaSchedule,
    pub mode: Mode,
}

impl SnnModel {
    /// SA mode forces a full-information schedule.
    pub fn new(
        params: AnnParams,
        thresholds: ThresholdSet,
        schedule: PsaSchedule,
        mode: Mode,
    ) -> Result<Self> {
        params.validate()?;
        thresholds.validate(params.dims.blocks)?;
        let schedule = match mode {
            Mode::Sa => PsaSchedule::new(schedule.timesteps, 1.0, schedule.gain_mode)?,
            Mode::Psa => schedule,
        };
        Ok(Self {
            params,
            thresholds,
            schedule,
            mode,
        })
    }

    /// `rho = 1` collapses PSA onto SA, so both report as `sa`.
    pub fn effective_mode(&self) -> Mode {
        if self.schedule.rho == 1.0 {
            Mode::Sa
        } else {
            self.mode
        }
    }

    pub fn with_timesteps(&self, timesteps: usize) -> Result<Self> {
        let mut m = self.clone();
        m.schedule = self.schedule.with_timesteps(timesteps)?;
        Ok(m)
    }

    pub fn with_schedule(&self, schedule: PsaSchedule, mode: Mode) -> Result<Self> {
        Self::new(self.params.clone(), self.thresholds.clone(), schedule, mode)
    }

    /// `(name, neuron count)` of every spiking population, in record order.
    pub fn layer_layout(&self) -> Vec<(String, usize)> {
        let d = &self.params.dims;
        let sizes = [
            d.n_tokens * d.d_head,
            d.n_tokens * d.d_head,
            d.n_tokens * d.d_head,
            d.n_tokens * d.n_tokens,
            d.n_tokens * d.d_model,
            d.n_tokens * d.d_hidden,
            d.n_tokens * d.d_model,
        ];
        (0..d.blocks)
            .flat_map(|b| {
                let prefix = block_prefix(b);
                POPULATIONS
                    .iter()
                    .zip(sizes)
                    .map(move |(p, s)| (format!("{prefix}{p}"), s))
            })
            .collect()
    }

    pub(crate) fn block_thresholds(&self, block: usize) -> Result<BlockThresholds> {
        let prefix = block_prefix(block);
        let get = |p: &str| self.thresholds.get(&format!("{prefix}{p}"));
        Ok(BlockThresholds {
            q: get("q")?,
            k: get("k")?,
            v: get("v")?,
            score: get("score")?,
            context: get("context")?,
            mlp1: get("mlp1")?,
            mlp2: get("mlp2")?,
        })
    }
}

/// Calibrated thresholds of one block, in activation units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockThresholds {
    pub q: f64,
    pub k: f64,
    pub v: f64,
    pub score: f64,
    pub context: f64,
    pub mlp1: f64,
    pub mlp2: f64,
}

impl BlockThresholds {
    /// Firing threshold of the score neurons, whose current is built from
    /// unscaled Q/K spikes.
    pub fn score_firing(&self) -> f64 {
        self.score / (self.q * self.k)
    }

    /// Firing threshold of the context neurons, whose current is built
    /// from unscaled score and value spikes.
    pub fn context_firing(&self) -> f64 {
        self.context / (self.score * self.v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub q: IfState,
    pub k: IfState,
    pub v: IfState,
    pub score: IfState,
    pub context: IfState,
    pub mlp1: IfState,
    pub mlp2: IfState,
}

impl BlockState {
    pub fn new(p: &AnnParams, th: &BlockThresholds) -> Result<Self> {
        let d = &p.dims;
        let (n, dh) = (d.n_tokens, d.d_head);
        Ok(Self {
            q: IfState::new(n * dh, th.q)?,
            k: IfState::new(n * dh, th.k)?,
            v: IfState::new(n * dh, th.v)?,
            score: IfState::new(n * n, th.score_firing())?,
            context: IfState::new(n * d.d_model, th.context_firing())?,
            mlp1: IfState::new(n * d.d_hidden, th.mlp1)?,
            mlp2: IfState::new(n * d.d_model, th.mlp2)?,
        })
    }

    pub fn emitted(&self) -> u64 {
        [
            &self.q,
            &self.k,
            &self.v,
            &self.score,
            &self.context,
            &self.mlp1,
            &self.mlp2,
        ]
        .iter()
        .map(|s| s.emitted)
        .sum()
    }
}

fn if_frame(state: &mut IfState, current: &Tensor) -> Result<SpikeFrame> {
    let (r, c) = current.dims2()?;
    let mut frame = SpikeFrame::zeros(r, c);
    state.step_into(current.values(), frame.bits_mut())?;
    Ok(frame)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QkvSpikes {
    pub q: SpikeFrame,
    pub k: SpikeFrame,
    pub v: SpikeFrame,
    /// False when Q and K were skipped this step (their frames are empty).
    pub qk_active: bool,
}

/// Steps the Q/K/V populations at 1-based step `t` with current `x_t W`.
pub fn qkv_step(
    x_t: &Tensor,
    block: &BlockParams,
    schedule: &PsaSchedule,
    t: usize,
    state: &mut BlockState,
) -> Result<QkvSpikes> {
    schedule.check_step(t)?;
    let (n, dh) = (x_t.rows(), block.w_q.cols());
    let qk_active = schedule.qk_active(t);
    let (q, k) = if qk_active {
        (
            if_frame(&mut state.q, &matmul(x_t, &block.w_q)?)?,
            if_frame(&mut state.k, &matmul(x_t, &block.w_k)?)?,
        )
    } else {
        (SpikeFrame::zeros(n, dh), SpikeFrame::zeros(n, dh))
    };
    let v = if_frame(&mut state.v, &matmul(x_t, &block.w_v)?)?;
    Ok(QkvSpikes { q, k, v, qk_active })
}

/// `gain * popcount(q_i AND k_j) / d_head` for every token pair.
pub fn score_current(q: &SpikeFrame, k: &SpikeFrame, d_head: usize, gain: f64) -> Result<Tensor> {
    if q.cols() != k.cols() || q.rows() != k.rows() {
        return Err(EstError::Dimension {
            op: "score_current",
            left: vec![q.rows(), q.cols()],
            right: vec![k.rows(), k.cols()],
        });
    }
    let n = q.rows();
    let scale = gain / d_head as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let hits: u32 = q
                .row(i)
                .iter()
                .zip(k.row(j))
                .map(|(&a, &b)| u32::from(a & b))
                .sum();
            out.push(f64::from(hits) * scale);
        }
    }
    Tensor::new(vec![n, n], out)
}

/// Steps the score population. Outside the Q/K window it integrates zero
/// current.
pub fn score_step(
    q: &SpikeFrame,
    k: &SpikeFrame,
    d_head: usize,
    schedule: &PsaSchedule,
    t: usize,
    state: &mut IfState,
) -> Result<SpikeFrame> {
    schedule.check_step(t)?;
    let current = if schedule.qk_active(t) {
        score_current(q, k, d_head, schedule.gain())?
    } else {
        Tensor::zeros(&[q.rows(), q.rows()])
    };
    if_frame(state, &current)
}

/// `(a v) W_o` with `a` and `v` as 0/1 matrices.
pub fn context_current(a: &SpikeFrame, v: &SpikeFrame, w_o: &Tensor) -> Result<Tensor> {
    if a.cols() != v.rows() || v.cols() != w_o.rows() {
        return Err(EstError::Dimension {
            op: "context_current",
            left: vec![a.rows(), a.cols(), v.rows(), v.cols()],
            right: w_o.shape().to_vec(),
        });
    }
    let (n, dh) = (a.rows(), v.cols());
    let mut av = vec![0.0; n * dh];
    for i in 0..n {
        for j in 0..a.cols() {
            if a.get(i, j) == 1 {
                for (c, &bit) in v.row(j).iter().enumerate() {
                    av[i * dh + c] += f64::from(bit);
                }
            }
        }
    }
    matmul(&Tensor::new(vec![n, dh], av)?, w_o)
}

pub fn context_step(
    a: &SpikeFrame,
    v: &SpikeFrame,
    w_o: &Tensor,
    state: &mut IfState,
) -> Result<SpikeFrame> {
    if_frame(state, &context_current(a, v, w_o)?)
}

/// Spikes of every population of one block at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpikes {
    pub q: SpikeFrame,
    pub k: SpikeFrame,
    pub v: SpikeFrame,
    pub score: SpikeFrame,
    pub context: SpikeFrame,
    pub mlp1: SpikeFrame,
    pub mlp2: SpikeFrame,
    pub qk_active: bool,
}

impl BlockSpikes {
    /// Frames in [`POPULATIONS`] order.
    pub fn frames(&self) -> [&SpikeFrame; 7] {
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

/// One in-flight inference: membrane state for every population plus the
/// readout accumulator. Built per sample; nothing is shared between samples.
pub struct SnnRun<'m> {
    model: &'m SnnModel,
    thresholds: Vec<BlockThresholds>,
    states: Vec<BlockState>,
    t: usize,
    readout: Tensor,
}

impl<'m> SnnRun<'m> {
    pub fn new(model: &'m SnnModel) -> Result<Self> {
        model.thresholds.validate(model.params.dims.blocks)?;
        let thresholds = (0..model.params.dims.blocks)
            .map(|b| model.block_thresholds(b))
            .collect::<Result<Vec<_>>>()?;
        let states = thresholds
            .iter()
            .map(|th| BlockState::new(&model.params, th))
            .collect::<Result<Vec<_>>>()?;
        let d = &model.params.dims;
        Ok(Self {
            model,
            thresholds,
            states,
            t: 0,
            readout: Tensor::zeros(&[d.n_tokens, d.d_model]),
        })
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn states(&self) -> &[BlockState] {
        &self.states
    }

    /// Total spikes counted by the neuron populations themselves.
    pub fn emitted(&self) -> u64 {
        self.states.iter().map(BlockState::emitted).sum()
    }

    /// Advances every population by one step with input current `x_t`.
    pub fn step(&mut self, x_t: &Tensor) -> Result<Vec<BlockSpikes>> {
        let t = self.t + 1;
        let schedule = &self.model.schedule;
        schedule.check_step(t)?;
        let d_head = self.model.params.dims.d_head;
        let mut stream = x_t.clone();
        let mut out = Vec::with_capacity(self.states.len());
        for ((block, th), state) in self
            .model
            .params
            .blocks
            .iter()
            .zip(&self.thresholds)
            .zip(&mut self.states)
        {
            let qkv = qkv_step(&stream, block, schedule, t, state)?;
            let score = score_step(&qkv.q, &qkv.k, d_head, schedule, t, &mut state.score)?;
            let context = context_step(&score, &qkv.v, &block.w_o, &mut state.context)?;

            let mut h1 = stream;
            h1.axpy(th.context, &context.to_tensor(1.0))?;
            let mlp1 = if_frame(&mut state.mlp1, &matmul(&h1, &block.w_mlp1)?)?;
            let mlp2_in = matmul(&mlp1.to_tensor(th.mlp1), &block.w_mlp2)?;
            let mlp2 = if_frame(&mut state.mlp2, &mlp2_in)?;
            h1.axpy(th.mlp2, &mlp2.to_tensor(1.0))?;
            stream = h1;

            out.push(BlockSpikes {
                q: qkv.q,
                k: qkv.k,
                v: qkv.v,
                score,
                context,
                mlp1,
                mlp2,
                qk_active: qkv.qk_active,
            });
        }
        self.readout.add_assign(&stream)?;
        self.t = t;
        Ok(out)
    }

    /// Classifier applied once to the time-averaged penultimate stream.
    pub fn logits(&self) -> Result<Tensor> {
        if self.t == 0 {
            return Err(EstError::Sequencing {
                step: 0,
                timesteps: self.model.schedule.timesteps,
            });
        }
        let pooled = self.readout.scale(1.0 / self.t as f64).mean_rows()?;
        matmul(&pooled, &self.model.params.w_cls)
    }
}

/// Runs one sample for `timesteps` steps (overriding the schedule length).
pub fn snn_forward(m: &SnnModel, x: &Tensor, timesteps: usize) -> Result<(Tensor, SpikeRecord)> {
    let owned;
    let m = if timesteps == m.schedule.timesteps() {
        m
    } else {
        owned = m.with_timesteps(timesteps)?;
        &owned
    };
    let d = &m.params.dims;
    if x.shape() != [d.n_tokens, d.d_model] {
        return Err(EstError::Dimension {
            op: "snn_forward",
            left: x.shape().to_vec(),
            right: vec![d.n_tokens, d.d_model],
        });
    }
    let mut run = SnnRun::new(m)?;
    let mut record = SpikeRecord::for_model(m);
    // Constant-current encoding: the same x at every step.
    for t in 1..=timesteps {
        let spikes = run.step(x)?;
        record.add_step(t, &spikes)?;
    }
    record.samples = 1;
    if record.total_spikes() != run.emitted() {
        return Err(EstError::Accounting(format!(
            "record holds {} spikes but populations emitted {}",
            record.total_spikes(),
            run.emitted()
        )));
    }
    Ok((run.logits()?, record))
}

#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub logits: Vec<Tensor>,
    pub record: SpikeRecord,
}

/// Runs every input on a pool of `workers` threads. Results are merged in
/// sample order, so they do not depend on the worker count.
pub fn run_batch(m: &SnnModel, inputs: &[Tensor], workers: usize) -> Result<BatchOutput> {
    if inputs.is_empty() {
        return Err(EstError::Input("no samples to run".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EstError::Config(format!("thread pool: {e}")))?;
    let t = m.schedule.timesteps();
    let results: Vec<(Tensor, SpikeRecord)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|x| snn_forward(m, x, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut record = SpikeRecord::for_model(m);
    let mut logits = Vec::with_capacity(results.len());
    for (l, r) in results {
        record.merge(&r)?;
        logits.push(l);
    }
    Ok(BatchOutput { logits, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::AnnDims;

    fn bits(rows: usize, cols: usize, b: &[u8]) -> SpikeFrame {
        SpikeFrame::from_bits(rows, cols, b.to_vec())
    }

    fn unit_model(blocks: usize) -> SnnModel {
        let d = AnnDims {
            n_tokens: 3,
            d_model: 4,
            d_head: 2,
            d_hidden: 5,
            n_classes: 2,
            blocks,
        };
        let p = AnnParams::init(d, 11).unwrap();
        let mut th = ThresholdSet::default();
        for name in ThresholdSet::population_names(blocks) {
            th.insert(name, 1.0);
        }
        SnnModel::new(p, th, PsaSchedule::full(8).unwrap(), Mode::Sa).unwrap()
    }

    #[test]
    fn schedule_window() {
        let s = PsaSchedule::new(4, 0.5, GainMode::Auto).unwrap();
        assert_eq!(s.active_steps(), 2);
        assert_eq!(s.gain(), 2.0);
        assert!(s.qk_active(2) && !s.qk_active(3));
        assert_eq!(
            PsaSchedule::new(30, 0.1, GainMode::Auto)
                .unwrap()
                .active_steps(),
            3
        );
        assert_eq!(
            PsaSchedule::new(5, 0.5, GainMode::Auto)
                .unwrap()
                .active_steps(),
            3
        );
        assert_eq!(
            PsaSchedule::new(1, 0.01, GainMode::Auto)
                .unwrap()
                .active_steps(),
            1
        );
        let u = PsaSchedule::new(4, 0.5, GainMode::Unity).unwrap();
        assert_eq!(u.gain(), 1.0);
        let full = PsaSchedule::new(4, 1.0, GainMode::Auto).unwrap();
        assert_eq!((full.active_steps(), full.gain()), (4, 1.0));
        assert!(PsaSchedule::new(0, 0.5, GainMode::Auto).is_err());
        assert!(PsaSchedule::new(4, 0.0, GainMode::Auto).is_err());
        assert!(PsaSchedule::new(4, 1.5, GainMode::Auto).is_err());
    }

    #[test]
    fn score_current_is_popcount_of_and_over_d() {
        let q = bits(1, 4, &[1, 0, 1, 1]);
        let k = bits(1, 4, &[1, 1, 0, 1]);
        assert_eq!(score_current(&q, &k, 4, 1.0).unwrap().values(), &[0.5]);
        assert_eq!(score_current(&q, &k, 4, 2.0).unwrap().values(), &[1.0]);
        let z = SpikeFrame::zeros(1, 4);
        assert_eq!(score_current(&z, &k, 4, 1.0).unwrap().values(), &[0.0]);
    }

    #[test]
    fn score_current_bounded_by_gain() {
        let ones = bits(2, 3, &[1; 6]);
        let c = score_current(&ones, &ones, 3, 2.0).unwrap();
        assert!(c.values().iter().all(|&v| (0.0..=2.0).contains(&v)));
        assert_eq!(c.values(), &[2.0; 4]);
    }

    #[test]
    fn context_current_cases() {
        let w_o = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let one = bits(1, 1, &[1]);
        assert_eq!(context_current(&one, &one, &w_o).unwrap().values(), &[1.0]);

        let w = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap();
        let v = bits(2, 2, &[1, 0, 1, 1]);
        let zero = SpikeFrame::zeros(2, 2);
        assert!(context_current(&zero, &v, &w)
            .unwrap()
            .values()
            .iter()
            .all(|&x| x == 0.0));
        let eye = bits(2, 2, &[1, 0, 0, 1]);
        let want = matmul(&v.to_tensor(1.0), &w).unwrap();
        assert_eq!(context_current(&eye, &v, &w).unwrap(), want);
    }

    #[test]
    fn psa_skips_qk_after_window() {
        let m = unit_model(1);
        let m = m
            .with_schedule(PsaSchedule::new(4, 0.5, GainMode::Auto).unwrap(), Mode::Psa)
            .unwrap();
        let x = Tensor::new(vec![3, 4], vec![0.9; 12]).unwrap();
        let mut run = SnnRun::new(&m).unwrap();
        let mut q_steps = Vec::new();
        let mut v_steps = Vec::new();
        for _ in 0..4 {
            run.step(&x).unwrap();
            q_steps.push(run.states()[0].q.t);
            v_steps.push(run.states()[0].v.t);
        }
        assert_eq!(q_steps, vec![1, 2, 2, 2]);
        assert_eq!(v_steps, vec![1, 2, 3, 4]);
        assert_eq!(run.states()[0].k.t, 2);
        assert_eq!(run.states()[0].score.t, 4);
        assert!(matches!(
            run.step(&x),
            Err(EstError::Sequencing { step: 5, .. })
        ));
    }

    #[test]
    fn zero_weights_never_spike() {
        let mut m = unit_model(1);
        for (_, t) in m.params.named_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::new(vec![3, 4], vec![1.0; 12]).unwrap();
        let (logits, rec) = snn_forward(&m, &x, 8).unwrap();
        assert_eq!(rec.total_spikes(), 0);
        assert!(logits.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_single_step() {
        let m = unit_model(2);
        let (logits, rec) = snn_forward(&m, &Tensor::zeros(&[3, 4]), 1).unwrap();
        assert_eq!(rec.total_spikes(), 0);
        assert!(logits.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sa_mode_forces_full_schedule() {
        let m = unit_model(1);
        let m = m
            .with_schedule(PsaSchedule::new(8, 0.5, GainMode::Auto).unwrap(), Mode::Sa)
            .unwrap();
        assert_eq!(m.schedule.active_steps(), 8);
        assert_eq!(m.schedule.gain(), 1.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let m = unit_model(2);
        let inputs: Vec<Tensor> = (0..6)
            .map(|s| {
                Tensor::new(
                    vec![3, 4],
                    (0..12).map(|i| ((i * 7 + s) % 5) as f64 * 0.4).collect(),
                )
                .unwrap()
            })
            .collect();
        let a = run_batch(&m, &inputs, 1).unwrap();
        let b = run_batch(&m, &inputs, 4).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.record, b.record);
    }
}
