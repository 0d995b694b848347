//! Point-reflector echo simulator.
//!
//! Every speaker plays the same frame stream. A microphone records an
//! optional direct-path copy plus, for every reflector, a delayed copy whose
//! delay is the speaker -> reflector -> microphone path length divided by the
//! speed of sound, rounded to the nearest sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ofdm::{self, FrameSpec};
use crate::patterns::{decompose, UnlockPattern};
use crate::{Error, Mic, Result};

/// Position on the device face in millimetres; x to the right, y downwards.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * s, self.y + (other.y - self.y) * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceGeometry {
    pub width: f64,
    pub height: f64,
    pub speaker_bottom: Point2,
    pub speaker_top: Point2,
    pub mic_bottom: Point2,
    pub mic_top: Point2,
    pub grid_center: Point2,
    pub grid_pitch: f64,
}

impl Default for DeviceGeometry {
    fn default() -> Self {
        Self {
            width: 70.0,
            height: 137.0,
            speaker_bottom: Point2::new(8.0, 137.0),
            speaker_top: Point2::new(8.0, 0.0),
            mic_bottom: Point2::new(0.0, 137.0),
            mic_top: Point2::new(0.0, 0.0),
            grid_center: Point2::new(35.0, 80.0),
            grid_pitch: 30.0,
        }
    }
}

impl DeviceGeometry {
    pub fn grid_point(&self, index: u8) -> Point2 {
        let (row, col) = ((index / 3) as f64, (index % 3) as f64);
        Point2::new(
            self.grid_center.x + (col - 1.0) * self.grid_pitch,
            self.grid_center.y + (row - 1.0) * self.grid_pitch,
        )
    }

    pub fn grid_points(&self) -> [Point2; 9] {
        std::array::from_fn(|i| self.grid_point(i as u8))
    }

    pub fn mic(&self, mic: Mic) -> Point2 {
        match mic {
            Mic::Bottom => self.mic_bottom,
            Mic::Top => self.mic_top,
        }
    }

    /// Speaker sharing an edge with `mic`.
    pub fn near_speaker(&self, mic: Mic) -> Point2 {
        match mic {
            Mic::Bottom => self.speaker_bottom,
            Mic::Top => self.speaker_top,
        }
    }

    pub fn far_speaker(&self, mic: Mic) -> Point2 {
        match mic {
            Mic::Bottom => self.speaker_top,
            Mic::Top => self.speaker_bottom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || self.height <= 0.0 || self.grid_pitch <= 0.0 {
            return Err(Error::Config("device dimensions and grid pitch must be positive".into()));
        }
        let inside = |p: Point2| p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height;
        let fixed = [
            ("speaker_bottom", self.speaker_bottom),
            ("speaker_top", self.speaker_top),
            ("mic_bottom", self.mic_bottom),
            ("mic_top", self.mic_top),
        ];
        for (name, p) in fixed {
            if !inside(p) {
                return Err(Error::Config(format!("{name} ({}, {}) lies outside the device face", p.x, p.y)));
            }
        }
        if let Some(i) = (0..9u8).find(|&i| !inside(self.grid_point(i))) {
            return Err(Error::Config(format!("grid point {i} lies outside the device face")));
        }
        Ok(())
    }
}

/// Piecewise-linear reflector trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorPath {
    keyframes: Vec<(f64, Point2)>,
    /// Multiplier on the configured reflection gain.
    pub gain: f64,
}

impl ReflectorPath {
    pub fn new(keyframes: Vec<(f64, Point2)>) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::Simulation("reflector path needs at least one keyframe".into()));
        }
        if keyframes.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Simulation("keyframe times must be non-decreasing".into()));
        }
        Ok(Self { keyframes, gain: 1.0 })
    }

    pub fn stationary(at: Point2, start: f64, end: f64) -> Result<Self> {
        Self::new(vec![(start, at), (end, at)])
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn start_time(&self) -> f64 {
        self.keyframes[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].0
    }

    pub fn keyframes(&self) -> &[(f64, Point2)] {
        &self.keyframes
    }

    pub fn position(&self, t: f64) -> Option<Point2> {
        const EPS: f64 = 1e-9;
        if t < self.start_time() - EPS || t > self.end_time() + EPS {
            return None;
        }
        let idx = self.keyframes.partition_point(|&(kt, _)| kt <= t);
        if idx == 0 {
            return Some(self.keyframes[0].1);
        }
        if idx == self.keyframes.len() {
            return Some(self.keyframes[idx - 1].1);
        }
        let (t0, p0) = self.keyframes[idx - 1];
        let (t1, p1) = self.keyframes[idx];
        if t1 - t0 <= 0.0 {
            return Some(p1);
        }
        Some(p0.lerp(p1, (t - t0) / (t1 - t0)))
    }

    /// Appends `next`, shifted so it starts where this path ends.
    pub fn then(mut self, next: &ReflectorPath) -> ReflectorPath {
        let shift = self.end_time() - next.start_time();
        self.keyframes
            .extend(next.keyframes.iter().map(|&(t, p)| (t + shift, p)));
        self
    }

    /// Extends the path by holding its last position for `seconds`.
    pub fn hold(mut self, seconds: f64) -> ReflectorPath {
        let (t, p) = self.keyframes[self.keyframes.len() - 1];
        self.keyframes.push((t + seconds, p));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// m/s
    pub speed_of_sound: f64,
    pub reflection_gain: f64,
    pub noise_std: f64,
    /// When set, overrides `noise_std` so that the reflected component of
    /// each trace has this signal-to-noise ratio.
    pub snr_db: Option<f64>,
    pub include_direct_path: bool,
    pub direct_gain: f64,
    /// Gain of echoes from the speaker on the opposite edge.
    pub far_speaker_gain: f64,
    /// Scale each echo by `(50 mm / r1) * (50 mm / r2)`.
    pub spreading_loss: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            speed_of_sound: 343.0,
            reflection_gain: 0.2,
            noise_std: 0.0,
            snr_db: None,
            include_direct_path: false,
            direct_gain: 1.0,
            far_speaker_gain: 0.0,
            spreading_loss: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::Config("speed_of_sound must be positive".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Delay in whole samples for a path of `path_mm` millimetres.
pub fn delay_samples(path_mm: f64, speed_of_sound: f64, sample_rate: f64) -> usize {
    (path_mm / 1000.0 / speed_of_sound * sample_rate).round() as usize
}

fn add_delayed(out: &mut [f64], stream: &[f64], gain: f64, delay: impl Fn(usize) -> Option<(usize, f64)>) {
    for (t, o) in out.iter_mut().enumerate() {
        if let Some((d, g)) = delay(t) {
            if d <= t {
                *o += gain * g * stream[t - d];
            }
        }
    }
}

/// Reflected component only (no direct path, no noise).
fn reflected(
    stream: &[f64],
    sample_rate: f64,
    geometry: &DeviceGeometry,
    paths: &[ReflectorPath],
    config: &SimConfig,
    mic: Mic,
) -> Result<Vec<f64>> {
    let duration = (stream.len().saturating_sub(1)) as f64 / sample_rate;
    for (i, p) in paths.iter().enumerate() {
        if p.position(0.0).is_none() || p.position(duration).is_none() {
            return Err(Error::Simulation(format!(
                "reflector {i} is defined on [{}, {}] s but the stream spans [0, {duration}] s",
                p.start_time(),
                p.end_time()
            )));
        }
    }
    let mic_pos = geometry.mic(mic);
    let mut speakers = vec![(geometry.near_speaker(mic), 1.0)];
    if config.far_speaker_gain != 0.0 {
        speakers.push((geometry.far_speaker(mic), config.far_speaker_gain));
    }
    let mut out = vec![0.0; stream.len()];
    for path in paths {
        for &(spk, spk_gain) in &speakers {
            add_delayed(&mut out, stream, config.reflection_gain * path.gain * spk_gain, |t| {
                let pos = path.position(t as f64 / sample_rate)?;
                let (r1, r2) = (spk.dist(pos), pos.dist(mic_pos));
                let g = if config.spreading_loss { (50.0 / r1.max(1.0)) * (50.0 / r2.max(1.0)) } else { 1.0 };
                Some((delay_samples(r1 + r2, config.speed_of_sound, sample_rate), g))
            });
        }
    }
    Ok(out)
}

pub fn noise_std_for_snr(signal_power: f64, snr_db: f64) -> f64 {
    (signal_power / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Records one microphone.
pub fn simulate_echo(
    stream: &[f64],
    sample_rate: f64,
    geometry: &DeviceGeometry,
    paths: &[ReflectorPath],
    config: &SimConfig,
    mic: Mic,
) -> Result<Vec<f64>> {
    if stream.is_empty() {
        return Err(Error::Simulation("empty stream".into()));
    }
    config.validate()?;
    let mut trace = reflected(stream, sample_rate, geometry, paths, config, mic)?;
    let noise_std = match config.snr_db {
        Some(snr) => {
            let power = trace.iter().map(|x| x * x).sum::<f64>() / trace.len() as f64;
            noise_std_for_snr(power, snr)
        }
        None => config.noise_std,
    };
    if config.include_direct_path {
        let mic_pos = geometry.mic(mic);
        let mut direct = vec![(geometry.near_speaker(mic), config.direct_gain)];
        if config.far_speaker_gain != 0.0 {
            direct.push((geometry.far_speaker(mic), config.direct_gain * config.far_speaker_gain));
        }
        for (spk, g) in direct {
            let d = delay_samples(spk.dist(mic_pos), config.speed_of_sound, sample_rate);
            add_delayed(&mut trace, stream, g, |_| Some((d, 1.0)));
        }
    }
    if noise_std > 0.0 {
        let tag = match mic {
            Mic::Bottom => 0x9e37_79b9_7f4a_7c15,
            Mic::Top => 0xc2b2_ae3d_27d4_eb4f,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ tag);
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Simulation(e.to_string()))?;
        trace.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
    }
    Ok(trace)
}

/// Constant-velocity straight line between two grid points followed by a
/// stationary pause. The path starts at time 0.
pub fn synth_stroke_path(
    from: u8,
    to: u8,
    geometry: &DeviceGeometry,
    duration: f64,
    pause_after: f64,
) -> Result<ReflectorPath> {
    if from == to {
        return Err(Error::Simulation(format!("stroke endpoints are both grid point {from}")));
    }
    if from > 8 || to > 8 {
        return Err(Error::Simulation("grid index out of range".into()));
    }
    if !(duration > 0.0) || pause_after < 0.0 {
        return Err(Error::Simulation("stroke duration must be positive and pause non-negative".into()));
    }
    let (a, b) = (geometry.grid_point(from), geometry.grid_point(to));
    ReflectorPath::new(vec![(0.0, a), (duration, b), (duration + pause_after, b)])
}

pub const DEFAULT_PAUSE: f64 = 0.5;

/// Timing of a rendered pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTiming {
    /// Hold at the first point before moving, seconds.
    pub lead_in: f64,
    /// Finger speed per stroke, mm/s.
    pub speeds: Vec<f64>,
    /// Pause after each stroke, seconds.
    pub pauses: Vec<f64>,
    /// Offset of each stroke endpoint from its grid point, mm; empty means
    /// the finger hits every grid point exactly.
    #[serde(default)]
    pub offsets: Vec<Point2>,
}

impl PatternTiming {
    pub fn uniform(n_strokes: usize, speed: f64, pause: f64) -> Self {
        Self { lead_in: pause, speeds: vec![speed; n_strokes], pauses: vec![pause; n_strokes], offsets: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct PatternTrace {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    /// Sample index where each stroke starts and stops moving.
    pub stroke_bounds: Vec<(usize, usize)>,
    pub path: ReflectorPath,
}

impl PatternTrace {
    pub fn trace(&self, mic: Mic) -> &[f64] {
        match mic {
            Mic::Bottom => &self.bottom,
            Mic::Top => &self.top,
        }
    }
}

/// Finger path for a whole pattern: hold, then each stroke and its pause.
pub fn pattern_path(
    pattern: &UnlockPattern,
    geometry: &DeviceGeometry,
    timing: &PatternTiming,
) -> Result<(ReflectorPath, Vec<(f64, f64)>)> {
    let strokes = decompose(pattern);
    if timing.speeds.len() != strokes.len() || timing.pauses.len() != strokes.len() {
        return Err(Error::Simulation(format!(
            "timing describes {} strokes but the pattern has {}",
            timing.speeds.len(),
            strokes.len()
        )));
    }
    if !timing.offsets.is_empty() && timing.offsets.len() != strokes.len() + 1 {
        return Err(Error::Simulation(format!(
            "timing has {} endpoint offsets but the pattern has {} stroke endpoints",
            timing.offsets.len(),
            strokes.len() + 1
        )));
    }
    let point = |i: usize, grid: u8| {
        let p = geometry.grid_point(grid);
        timing.offsets.get(i).map_or(p, |o| Point2::new(p.x + o.x, p.y + o.y))
    };
    let start = point(0, strokes[0].start);
    let mut path = ReflectorPath::stationary(start, 0.0, timing.lead_in)?;
    let mut bounds = Vec::with_capacity(strokes.len());
    for (i, s) in strokes.iter().enumerate() {
        let (a, b) = (point(i, s.start), point(i + 1, s.end));
        if !(timing.speeds[i] > 0.0) || timing.pauses[i] < 0.0 {
            return Err(Error::Simulation("stroke speed must be positive and pause non-negative".into()));
        }
        let duration = a.dist(b) / timing.speeds[i];
        let t0 = path.end_time();
        bounds.push((t0, t0 + duration));
        let stroke = ReflectorPath::new(vec![(0.0, a), (duration, b), (duration + timing.pauses[i], b)])?;
        path = path.then(&stroke);
    }
    Ok((path, bounds))
}

pub fn synth_pattern_trace(
    pattern: &UnlockPattern,
    geometry: &DeviceGeometry,
    spec: &FrameSpec,
    config: &SimConfig,
    timing: &PatternTiming,
) -> Result<PatternTrace> {
    let (path, bounds) = pattern_path(pattern, geometry, timing)?;
    let frame = ofdm::build_frame(spec)?;
    let n_frames = ((path.end_time() * spec.sample_rate) / spec.frame_len as f64).floor() as usize;
    let stream = ofdm::emit_stream(&frame, n_frames)?;
    let paths = std::slice::from_ref(&path);
    let bottom = simulate_echo(&stream, spec.sample_rate, geometry, paths, config, Mic::Bottom)?;
    let top = simulate_echo(&stream, spec.sample_rate, geometry, paths, config, Mic::Top)?;
    let stroke_bounds = bounds
        .iter()
        .map(|&(a, b)| ((a * spec.sample_rate).round() as usize, (b * spec.sample_rate).round() as usize))
        .collect();
    Ok(PatternTrace { bottom, top, stroke_bounds, path })
}
