//! Stroke angle and range from segmented movement regions.
//!
//! Orientation uses a bank of complex Gabor filters. The angle reported for a
//! filter is the direction of its wave vector, measured from the +column
//! (time) axis towards the +row (delay) axis. A horizontal trace therefore
//! sits at 90 degrees and a trace whose row grows with column lies above 90.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize, Serializer};

use crate::echo::Matrix;
use crate::patterns::Direction;
use crate::segment::{ConnectedComponent, StrokeGroup};
use crate::{Error, Mic, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborBankSpec {
    /// Degrees, strictly increasing inside (0, 180).
    pub orientations: Vec<f64>,
    pub wavelength: f64,
    pub aspect_ratio: f64,
    /// Half-response spatial frequency bandwidth in octaves.
    pub bandwidth: f64,
    pub kernel_radius: usize,
    /// Half width of the tie band around 90 degrees.
    pub tie_band: f64,
    /// Weight component angles by pixel count instead of bounding-box area.
    pub weight_by_pixels: bool,
}

impl Default for GaborBankSpec {
    fn default() -> Self {
        Self {
            orientations: (0..36).map(|k| 2.5 + 5.0 * k as f64).collect(),
            wavelength: 8.0,
            aspect_ratio: 0.5,
            bandwidth: 1.0,
            kernel_radius: 16,
            tie_band: 2.0,
            weight_by_pixels: false,
        }
    }
}

impl GaborBankSpec {
    pub fn validate(&self) -> Result<()> {
        if self.orientations.is_empty() {
            return Err(Error::Config("Gabor bank needs at least one orientation".into()));
        }
        let inside = self.orientations.iter().all(|&a| a > 0.0 && a < 180.0);
        let increasing = self.orientations.windows(2).all(|w| w[1] > w[0]);
        if !inside || !increasing {
            return Err(Error::Config("orientations must increase strictly inside (0, 180)".into()));
        }
        if self.wavelength < 2.0 {
            return Err(Error::Config(format!("wavelength {} is below 2 pixels", self.wavelength)));
        }
        if !(self.aspect_ratio > 0.0 && self.bandwidth > 0.0) || self.kernel_radius == 0 {
            return Err(Error::Config("Gabor aspect ratio, bandwidth and radius must be positive".into()));
        }
        if !(self.tie_band >= 0.0) {
            return Err(Error::Config("tie band must be non-negative".into()));
        }
        Ok(())
    }

    /// Gaussian envelope width along the wave vector.
    pub fn sigma(&self) -> f64 {
        let b = 2f64.powf(self.bandwidth);
        self.wavelength / std::f64::consts::PI * (std::f64::consts::LN_2 / 2.0).sqrt() * (b + 1.0) / (b - 1.0)
    }
}

/// Complex Gabor kernel, zero mean, `(2r + 1)^2` taps, row-major.
pub fn gabor_kernel(spec: &GaborBankSpec, angle_deg: f64) -> Vec<Complex64> {
    let r = spec.kernel_radius as i64;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let sigma = spec.sigma();
    let g2 = spec.aspect_ratio * spec.aspect_ratio;
    let mut env = Vec::new();
    let mut taps = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            let along = x * c + y * s;
            let across = -x * s + y * c;
            let e = (-(along * along + g2 * across * across) / (2.0 * sigma * sigma)).exp();
            env.push(e);
            taps.push(Complex64::from_polar(e, 2.0 * std::f64::consts::PI * along / spec.wavelength));
        }
    }
    let dc = taps.iter().sum::<Complex64>() / env.iter().sum::<f64>();
    taps.iter().zip(&env).map(|(t, e)| t - dc * e).collect()
}

fn fft2(buf: &mut [Complex64], n: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            buf[r * n + c] = col[r];
        }
    }
}

/// Filter bank with precomputed kernel autocorrelations.
///
/// The total energy of a filtered patch, summed over the full linear
/// convolution, equals `sum_d C(d) * Re K(d)` where `C` is the patch
/// autocorrelation and `K` the kernel autocorrelation, so each orientation
/// costs one pass over the `(4r + 1)^2` lags.
#[derive(Debug, Clone)]
pub struct GaborBank {
    pub spec: GaborBankSpec,
    lag_radius: usize,
    kernel_acf: Vec<Vec<f64>>,
}

impl GaborBank {
    pub fn new(spec: GaborBankSpec) -> Result<Self> {
        spec.validate()?;
        let r = spec.kernel_radius;
        let side = 2 * r + 1;
        let lag_radius = 2 * r;
        let lag_side = 2 * lag_radius + 1;
        let n = (2 * side).next_power_of_two();
        let mut planner = FftPlanner::new();
        let kernel_acf = spec
            .orientations
            .iter()
            .map(|&a| {
                let taps = gabor_kernel(&spec, a);
                let mut buf = vec![Complex64::default(); n * n];
                for y in 0..side {
                    for x in 0..side {
                        buf[y * n + x] = taps[y * side + x];
                    }
                }
                fft2(&mut buf, n, false, &mut planner);
                buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
                fft2(&mut buf, n, true, &mut planner);
                let scale = (n * n) as f64;
                let mut acf = vec![0.0; lag_side * lag_side];
                for dy in 0..lag_side {
                    for dx in 0..lag_side {
                        let yy = (dy + n - lag_radius) % n;
                        let xx = (dx + n - lag_radius) % n;
                        acf[dy * lag_side + dx] = buf[yy * n + xx].re / scale;
                    }
                }
                acf
            })
            .collect();
        Ok(Self { spec, lag_radius, kernel_acf })
    }

    /// Total squared response for every orientation.
    pub fn responses(&self, patch: &Matrix) -> Vec<f64> {
        let lr = self.lag_radius as i64;
        let side = 2 * self.lag_radius + 1;
        let mut acf = vec![0.0; side * side];
        let ones: Vec<(i64, i64)> = (0..patch.rows)
            .flat_map(|r| (0..patch.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| patch.get(r, c) != 0.0)
            .map(|(r, c)| (r as i64, c as i64))
            .collect();
        for &(r, c) in &ones {
            let v = patch.get(r as usize, c as usize);
            for dr in -lr..=lr {
                let rr = r + dr;
                if rr < 0 || rr >= patch.rows as i64 {
                    continue;
                }
                for dc in -lr..=lr {
                    let cc = c + dc;
                    if cc < 0 || cc >= patch.cols as i64 {
                        continue;
                    }
                    let w = patch.get(rr as usize, cc as usize);
                    if w != 0.0 {
                        acf[((dr + lr) as usize) * side + (dc + lr) as usize] += v * w;
                    }
                }
            }
        }
        self.kernel_acf
            .iter()
            .map(|k| k.iter().zip(&acf).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Angle of the strongest orientation, refined by a parabola through it
    /// and its two neighbours (the bank wraps at 180 degrees).
    pub fn orientation(&self, patch: &Matrix) -> Result<f64> {
        if patch.data.iter().all(|&v| v == 0.0) {
            return Err(Error::NoSignal("patch has no set pixels".into()));
        }
        let resp = self.responses(patch);
        let angles = &self.spec.orientations;
        let n = resp.len();
        let best = (0..n).fold(0, |b, i| if resp[i] > resp[b] { i } else { b });
        if n < 3 {
            return Ok(angles[best]);
        }
        let (prev, next) = ((best + n - 1) % n, (best + 1) % n);
        let (y0, y1, y2) = (resp[prev], resp[best], resp[next]);
        let step_lo = (angles[best] - angles[prev]).rem_euclid(180.0);
        let step_hi = (angles[next] - angles[best]).rem_euclid(180.0);
        let denom = y0 - 2.0 * y1 + y2;
        let mut angle = angles[best];
        if denom < 0.0 && (step_lo - step_hi).abs() < 1e-9 {
            let offset = 0.5 * (y0 - y2) / denom;
            angle += offset.clamp(-0.5, 0.5) * step_hi;
        }
        let angle = angle.rem_euclid(180.0);
        Ok(angle.clamp(1e-6, 180.0 - 1e-6))
    }
}

pub fn gabor_orientation(patch: &Matrix, bank: &GaborBank) -> Result<f64> {
    bank.orientation(patch)
}

/// `None` inside the tie band around 90 degrees.
pub fn direction(angle: f64, tie_band: f64) -> Option<Direction> {
    if angle > 90.0 + tie_band {
        Some(Direction::Away)
    } else if angle < 90.0 - tie_band {
        Some(Direction::Towards)
    } else {
        None
    }
}

fn component_weight(cc: &ConnectedComponent, by_pixels: bool) -> f64 {
    if by_pixels {
        cc.size as f64
    } else {
        cc.bbox.area() as f64
    }
}

/// Weighted mean of per-component angles.
pub fn weighted_angle(angles: &[(f64, f64)]) -> Result<f64> {
    let total: f64 = angles.iter().map(|(_, w)| w).sum();
    if angles.is_empty() || !(total > 0.0) {
        return Err(Error::NoSignal("no weighted angles".into()));
    }
    Ok(angles.iter().map(|(a, w)| a * w).sum::<f64>() / total)
}

pub fn stroke_angle(group: &StrokeGroup, bank: &GaborBank) -> Result<f64> {
    let angles: Vec<(f64, f64)> = group
        .components
        .iter()
        .filter_map(|cc| {
            let a = bank.orientation(&cc.patch()).ok()?;
            Some((a, component_weight(cc, bank.spec.weight_by_pixels)))
        })
        .collect();
    weighted_angle(&angles)
}

/// Sum of bounding-box heights.
pub fn stroke_range(group: &StrokeGroup) -> Result<f64> {
    if group.components.is_empty() {
        return Err(Error::NoSignal("stroke group has no components".into()));
    }
    Ok(group.components.iter().map(|cc| cc.bbox.height() as f64).sum())
}

fn ser_direction<S: Serializer>(d: &Option<Direction>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match d {
        Some(Direction::Away) => "A",
        Some(Direction::Towards) => "T",
        None => "?",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrokeFeature {
    pub mic: Mic,
    pub angle: f64,
    pub range: f64,
    #[serde(serialize_with = "ser_direction")]
    pub direction: Option<Direction>,
    pub n_components: usize,
    pub col_span: (usize, usize),
}

pub fn stroke_feature(group: &StrokeGroup, bank: &GaborBank) -> Result<StrokeFeature> {
    let angle = stroke_angle(group, bank)?;
    Ok(StrokeFeature {
        mic: group.mic,
        angle,
        range: stroke_range(group)?,
        direction: direction(angle, bank.spec.tie_band),
        n_components: group.components.len(),
        col_span: group.col_span,
    })
}
