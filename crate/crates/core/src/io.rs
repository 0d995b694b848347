//! File formats: PCM16 WAV, binary PGM heatmaps, CSV and JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::echo::Matrix;
use crate::features::StrokeFeature;
use crate::segment::ConnectedComponent;
use crate::{Error, Result};

/// Float sample in [-1, 1] to PCM16, rounding half away from zero. Values
/// outside the range are clipped.
pub fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn from_pcm16(v: i16) -> f64 {
    v as f64 / 32767.0
}

/// Writes equally long channels as interleaved PCM16; returns how many
/// samples were clipped.
pub fn write_wav(path: &Path, channels: &[&[f64]], sample_rate: u32) -> Result<usize> {
    let Some(first) = channels.first() else {
        return Err(Error::Input("no channels to write".into()));
    };
    if channels.len() > 2 || channels.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Input("expected one or two channels of equal length".into()));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    let mut clipped = 0;
    for i in 0..first.len() {
        for c in channels {
            clipped += usize::from(c[i].abs() > 1.0);
            w.write_sample(to_pcm16(c[i]))?;
        }
    }
    w.finalize()?;
    Ok(clipped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

/// Reads a mono or stereo PCM16 file.
pub fn read_wav(path: &Path) -> Result<WavData> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Input(format!("{}: only PCM16 is supported", path.display())));
    }
    let n = spec.channels as usize;
    if !(1..=2).contains(&n) {
        return Err(Error::Input(format!("{}: {n} channels; expected 1 or 2", path.display())));
    }
    let mut channels = vec![Vec::with_capacity(r.len() as usize / n); n];
    for (i, s) in r.samples::<i16>().enumerate() {
        channels[i % n].push(from_pcm16(s?));
    }
    Ok(WavData { sample_rate: spec.sample_rate, channels })
}

/// Binary greyscale image of a matrix, min-max scaled to 0..255.
pub fn pgm_bytes(m: &Matrix) -> Vec<u8> {
    let (lo, hi) = m.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", m.cols, m.rows).into_bytes();
    out.extend(m.data.iter().map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, pgm_bytes(m))?;
    Ok(())
}

pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows {
        let row: Vec<String> = (0..m.cols).map(|c| m.get(r, c).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn components_csv(ccs: &[ConnectedComponent]) -> String {
    let mut out = String::from("index,row_min,row_max,col_min,col_max,size\n");
    for (i, cc) in ccs.iter().enumerate() {
        let b = cc.bbox;
        let _ = writeln!(out, "{i},{},{},{},{},{}", b.row_min, b.row_max, b.col_min, b.col_max, cc.size);
    }
    out
}

pub fn features_csv(features: &[StrokeFeature]) -> String {
    let mut out = String::from("mic,index,angle,range,direction,components,col_start,col_end\n");
    for (i, f) in features.iter().enumerate() {
        let dir = f.direction.map_or('?', |d| d.symbol());
        let _ = writeln!(
            out,
            "{},{i},{:.4},{},{dir},{},{},{}",
            f.mic, f.angle, f.range, f.n_components, f.col_span.0, f.col_span.1
        );
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}
