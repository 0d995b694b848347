//! OFDM sonar pulse synthesis.
//!
//! A frequency-domain vector of `n_subcarriers` bins is filled with ones for
//! every subcarrier that sits fully inside the inaudible band, mirrored to
//! `2 * n_subcarriers` bins, inverse transformed, truncated to the pulse
//! length, Hann windowed and peak normalized. The pulse is then padded with
//! silence to the frame length and repeated.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub sample_rate: f64,
    pub n_subcarriers: usize,
    pub subcarrier_bw: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub pulse_len: usize,
    pub frame_len: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            sample_rate: 48_000.0,
            n_subcarriers: 64,
            subcarrier_bw: 375.0,
            band_lo: 18_000.0,
            band_hi: 20_000.0,
            pulse_len: 64,
            frame_len: 264,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.subcarrier_bw <= 0.0 || self.sample_rate <= 0.0 {
            return Err(Error::Config("frame spec sizes must be positive".into()));
        }
        let expected = 2.0 * self.n_subcarriers as f64 * self.subcarrier_bw;
        if (expected - self.sample_rate).abs() > 1e-6 * self.sample_rate {
            return Err(Error::Config(format!(
                "sample_rate {} != 2 * n_subcarriers * subcarrier_bw = {expected}",
                self.sample_rate
            )));
        }
        // An empty band (lo == hi) is allowed and yields a silent pulse.
        if !(self.band_lo >= 0.0 && self.band_lo <= self.band_hi && self.band_hi <= self.sample_rate / 2.0) {
            return Err(Error::Config(format!(
                "band [{}, {}] must satisfy 0 <= lo <= hi <= {}",
                self.band_lo,
                self.band_hi,
                self.sample_rate / 2.0
            )));
        }
        if self.pulse_len == 0 || self.pulse_len > self.frame_len {
            return Err(Error::Config(format!(
                "pulse_len {} must be in 1..={}",
                self.pulse_len, self.frame_len
            )));
        }
        if self.pulse_len > 2 * self.n_subcarriers {
            return Err(Error::Config(format!(
                "pulse_len {} exceeds the {}-point transform",
                self.pulse_len,
                2 * self.n_subcarriers
            )));
        }
        Ok(())
    }

    /// Frame period in seconds (5.5 ms for the defaults).
    pub fn frame_period(&self) -> f64 {
        self.frame_len as f64 / self.sample_rate
    }

    /// One-way distance an echo may travel before it lands in the next frame.
    pub fn unambiguous_range(&self, speed_of_sound: f64) -> f64 {
        self.frame_period() * speed_of_sound / 2.0
    }
}

/// Mirrored frequency-domain vector of `2 * n_subcarriers` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    pub bins: Vec<f64>,
}

impl SpectrumVector {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Indices of the active subcarriers in the first half.
    pub fn active(&self) -> Vec<usize> {
        let half = self.bins.len() / 2;
        (0..half).filter(|&k| self.bins[k] != 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundFrame {
    pub samples: Vec<f64>,
    pub pulse_len: usize,
}

impl SoundFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pulse(&self) -> &[f64] {
        &self.samples[..self.pulse_len]
    }
}

pub fn build_subcarrier_vector(spec: &FrameSpec) -> Result<SpectrumVector> {
    spec.validate()?;
    let n = spec.n_subcarriers;
    let half: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k as f64 * spec.subcarrier_bw;
            let hi = (k + 1) as f64 * spec.subcarrier_bw;
            if lo >= spec.band_lo && hi <= spec.band_hi {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut bins = half.clone();
    bins.extend(half.iter().rev());
    Ok(SpectrumVector { bins })
}

/// Symmetric Hann window, `w[n] = 0.5 (1 - cos(2 pi n / (L - 1)))`.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
        .collect()
}

/// Real part of the inverse transform of the spectrum, scaled by `1/N`.
pub fn inverse_transform(spectrum: &SpectrumVector) -> Vec<f64> {
    let n = spectrum.len();
    let mut buf: Vec<Complex64> = spectrum.bins.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Truncated, unwindowed, peak-normalized pulse. Used as the leakage baseline.
pub fn synthesize_unwindowed_pulse(spec: &FrameSpec) -> Result<Vec<f64>> {
    let spectrum = build_subcarrier_vector(spec)?;
    let mut pulse = inverse_transform(&spectrum);
    pulse.truncate(spec.pulse_len);
    peak_normalize(&mut pulse);
    Ok(pulse)
}

pub fn synthesize_pulse(spec: &FrameSpec) -> Result<Vec<f64>> {
    let spectrum = build_subcarrier_vector(spec)?;
    let raw = inverse_transform(&spectrum);
    let window = hann(spec.pulse_len);
    let mut pulse: Vec<f64> = raw.iter().zip(&window).map(|(x, w)| x * w).collect();
    peak_normalize(&mut pulse);
    Ok(pulse)
}

fn peak_normalize(samples: &mut [f64]) {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|x| *x /= peak);
    }
}

pub fn build_frame(spec: &FrameSpec) -> Result<SoundFrame> {
    let mut samples = synthesize_pulse(spec)?;
    samples.resize(spec.frame_len, 0.0);
    Ok(SoundFrame { samples, pulse_len: spec.pulse_len })
}

pub fn emit_stream(frame: &SoundFrame, n_frames: usize) -> Result<Vec<f64>> {
    if n_frames == 0 {
        return Err(Error::Input("stream needs at least one frame".into()));
    }
    Ok(frame.samples.repeat(n_frames))
}

/// Number of whole frames that fit in `seconds`.
pub fn frames_for_duration(spec: &FrameSpec, seconds: f64) -> usize {
    (seconds * spec.sample_rate / spec.frame_len as f64).floor() as usize
}
