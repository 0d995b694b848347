//! Echo profile vector, echo profile matrix and differential matrix.

use serde::Serialize;

use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Row of the largest value in column `c` (first one on ties).
    pub fn argmax_row(&self, c: usize) -> usize {
        let mut best = 0;
        for r in 1..self.rows {
            if self.get(r, c) > self.get(best, c) {
                best = r;
            }
        }
        best
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoProfileVector {
    pub values: Vec<f64>,
}

/// Rows index delay within a frame, columns index frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoProfileMatrix {
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix {
    pub matrix: Matrix,
    pub delta: usize,
}

/// Matched-filter magnitude `|sum_k trace[i + k] * pulse[k]|`.
pub fn correlate(trace: &[f64], pulse: &[f64]) -> Result<EchoProfileVector> {
    if pulse.is_empty() {
        return Err(Error::Input("pulse is empty".into()));
    }
    if trace.len() < pulse.len() {
        return Err(Error::Input(format!(
            "trace of {} samples is shorter than the {}-sample pulse",
            trace.len(),
            pulse.len()
        )));
    }
    let values = trace
        .windows(pulse.len())
        .map(|w| w.iter().zip(pulse).map(|(a, b)| a * b).sum::<f64>().abs())
        .collect();
    Ok(EchoProfileVector { values })
}

pub fn fold(vector: &EchoProfileVector, frame_len: usize) -> Result<EchoProfileMatrix> {
    if frame_len == 0 || vector.values.len() < frame_len {
        return Err(Error::Input(format!(
            "echo profile of {} values holds no full {frame_len}-sample frame",
            vector.values.len()
        )));
    }
    let cols = vector.values.len() / frame_len;
    let v = &vector.values;
    Ok(EchoProfileMatrix { matrix: Matrix::from_fn(frame_len, cols, |r, c| v[c * frame_len + r]) })
}

pub fn differentiate(profile: &EchoProfileMatrix, delta: usize) -> Result<DiffMatrix> {
    let m = &profile.matrix;
    if delta == 0 || delta >= m.cols {
        return Err(Error::Input(format!("delta {delta} must be in 1..{}", m.cols)));
    }
    let matrix = Matrix::from_fn(m.rows, m.cols - delta, |r, c| m.get(r, c) - m.get(r, c + delta));
    Ok(DiffMatrix { matrix, delta })
}

/// Offset of the strongest correlation within the first frame; dropping that
/// many samples puts the first pulse at sample 0 of a recording that started
/// mid-frame.
pub fn phase_offset(trace: &[f64], pulse: &[f64], frame_len: usize) -> Result<usize> {
    let head = &trace[..trace.len().min(frame_len + pulse.len() - 1)];
    let v = correlate(head, pulse)?;
    let mut best = 0;
    for (i, &x) in v.values.iter().enumerate() {
        if x > v.values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Correlate, fold and difference in one step.
pub fn diff_profile(trace: &[f64], pulse: &[f64], frame_len: usize, delta: usize) -> Result<DiffMatrix> {
    differentiate(&fold(&correlate(trace, pulse)?, frame_len)?, delta)
}
