//! Integrate-and-fire neurons with soft reset and a strict threshold.
//!
//! The membrane update at step `t` subtracts the threshold for the spike
//! emitted at step `t - 1`, then fires if the new potential is strictly
//! above threshold:
//!
//! ```text
//! u[t] = u[t-1] + I[t] - v * o[t-1]
//! o[t] = 1 if u[t] > v else 0
//! ```
//!
//! There is no leak and no lower clamp, so negative currents can drive the
//! membrane below zero.

use crate::error::{EstError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct IfState {
    pub u: Vec<f64>,
    pub o_prev: Vec<u8>,
    v: f64,
    pub t: usize,
    /// Running total of spikes emitted by this population.
    pub emitted: u64,
}

pub fn if_init(n: usize, v: f64) -> Result<IfState> {
    IfState::new(n, v)
}

impl IfState {
    pub fn new(n: usize, v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(EstError::Threshold(v));
        }
        if n == 0 {
            return Err(EstError::Input(
                "population needs at least one neuron".into(),
            ));
        }
        Ok(Self {
            u: vec![0.0; n],
            o_prev: vec![0; n],
            v,
            t: 0,
            emitted: 0,
        })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Advances one step in place, writing spikes into `out`.
    pub fn step_into(&mut self, input: &[f64], out: &mut [u8]) -> Result<u64> {
        if input.len() != self.u.len() || out.len() != self.u.len() {
            return Err(EstError::Dimension {
                op: "if_step",
                left: vec![input.len()],
                right: vec![self.u.len()],
            });
        }
        let v = self.v;
        let mut fired = 0;
        for ((u, o), (&i, s)) in self
            .u
            .iter_mut()
            .zip(self.o_prev.iter_mut())
            .zip(input.iter().zip(out.iter_mut()))
        {
            *u += i - v * f64::from(*o);
            *s = u8::from(*u > v);
            *o = *s;
            fired += u64::from(*s);
        }
        self.t += 1;
        self.emitted += fired;
        Ok(fired)
    }

    pub fn step(&mut self, input: &[f64]) -> Result<Vec<u8>> {
        let mut out = vec![0; self.u.len()];
        self.step_into(input, &mut out)?;
        Ok(out)
    }
}

/// Pure form of one step: returns the spikes and the successor state.
pub fn if_step(s: &IfState, input: &[f64]) -> Result<(Vec<u8>, IfState)> {
    let mut next = s.clone();
    let spikes = next.step(input)?;
    Ok((spikes, next))
}

/// Constant-current encoding: the same analog current `x` at every step.
pub fn encode_direct(x: &Tensor, timesteps: usize) -> Result<Vec<Tensor>> {
    if timesteps == 0 {
        return Err(EstError::Config("timesteps must be >= 1".into()));
    }
    Ok(vec![x.clone(); timesteps])
}

/// Activation estimate `count * v / T` for each neuron.
pub fn rate_decode(spike_count: &[u64], timesteps: usize, v: f64) -> Result<Vec<f64>> {
    if timesteps == 0 {
        return Err(EstError::Config("timesteps must be >= 1".into()));
    }
    spike_count
        .iter()
        .map(|&c| {
            if c as usize > timesteps {
                Err(EstError::Accounting(format!(
                    "{c} spikes in {timesteps} steps"
                )))
            } else {
                Ok(c as f64 * v / timesteps as f64)
            }
        })
        .collect()
}
