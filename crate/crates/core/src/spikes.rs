//! Binary spike frames and trains.

use crate::tensor::Tensor;

/// Spikes of one population at one step, `rows x cols`, entries in {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeFrame {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl SpikeFrame {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    /// Panics if `bits` has the wrong length or a non-binary entry.
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>) -> Self {
        assert_eq!(bits.len(), rows * cols, "spike frame length");
        assert!(bits.iter().all(|&b| b <= 1), "spike frames are binary");
        Self { rows, cols, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|&b| u64::from(b)).sum()
    }

    /// The frame as a 0/1 real tensor scaled by `scale`.
    pub fn to_tensor(&self, scale: f64) -> Tensor {
        Tensor::new(
            vec![self.rows, self.cols],
            self.bits.iter().map(|&b| f64::from(b) * scale).collect(),
        )
        .expect("frame shape is valid")
    }
}

/// Time-indexed spikes of one population: `T x rows x cols`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpikeTrain {
    pub frames: Vec<SpikeFrame>,
}

impl SpikeTrain {
    pub fn timesteps(&self) -> usize {
        self.frames.len()
    }

    pub fn push(&mut self, frame: SpikeFrame) {
        self.frames.push(frame);
    }

    pub fn total(&self) -> u64 {
        self.frames.iter().map(SpikeFrame::count).sum()
    }

    /// Spike total over the first `steps` steps.
    pub fn total_through(&self, steps: usize) -> u64 {
        self.frames.iter().take(steps).map(SpikeFrame::count).sum()
    }
}
