//! Trace to stroke features.

use serde::Serialize;

use crate::echo::{self, DiffMatrix};
use crate::features::{self, GaborBank, GaborBankSpec, StrokeFeature};
use crate::ofdm::{self, FrameSpec};
use crate::patterns::Direction;
use crate::segment::{self, ConnectedComponent, SegmentSpec, StrokeGroup};
use crate::{Error, Mic, Result};

/// Reusable analysis state: the pulse and the Gabor bank are built once.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub frame: FrameSpec,
    pub segment: SegmentSpec,
    pub bank: GaborBank,
    pulse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MicAnalysis {
    pub mic: Mic,
    pub delta: usize,
    pub threshold: f64,
    pub components: Vec<ConnectedComponent>,
    pub groups: Vec<StrokeGroup>,
    pub features: Vec<StrokeFeature>,
}

impl MicAnalysis {
    pub fn directions(&self) -> Vec<Option<Direction>> {
        self.features.iter().map(|f| f.direction).collect()
    }
}

impl Analyzer {
    pub fn new(frame: FrameSpec, segment: SegmentSpec, gabor: GaborBankSpec) -> Result<Self> {
        segment.validate()?;
        let pulse = ofdm::synthesize_pulse(&frame)?;
        Ok(Self { frame, segment, bank: GaborBank::new(gabor)?, pulse })
    }

    pub fn pulse(&self) -> &[f64] {
        &self.pulse
    }

    pub fn diff(&self, trace: &[f64], mic: Mic) -> Result<DiffMatrix> {
        echo::diff_profile(trace, &self.pulse, self.frame.frame_len, self.segment.delta(mic))
    }

    /// Components of one microphone, moved to the shared time base where a
    /// column is centred between the two frames it compares.
    pub fn components(&self, trace: &[f64], mic: Mic) -> Result<(f64, Vec<ConnectedComponent>)> {
        let diff = self.diff(trace, mic)?;
        let binary = segment::binarize(&diff.matrix, self.segment.percentile)?;
        let mut ccs = segment::label_components(&binary, self.segment.min_size);
        ccs.iter_mut().for_each(|cc| cc.shift_cols(diff.delta / 2));
        Ok((binary.threshold, ccs))
    }

    fn finish(&self, mic: Mic, threshold: f64, components: Vec<ConnectedComponent>) -> MicAnalysis {
        let groups = segment::group_strokes(&components, self.segment.gap, mic);
        let features = groups
            .iter()
            .filter_map(|g| features::stroke_feature(g, &self.bank).ok())
            .collect();
        MicAnalysis { mic, delta: self.segment.delta(mic), threshold, components, groups, features }
    }

    /// Analyzes one or two microphone traces. With both present, components
    /// seen by only one microphone are discarded.
    pub fn analyze(&self, traces: &[(Mic, &[f64])]) -> Result<Vec<MicAnalysis>> {
        match traces {
            [(mic, trace)] => {
                let (th, ccs) = self.components(trace, *mic)?;
                Ok(vec![self.finish(*mic, th, segment::dedupe(&ccs))])
            }
            [(m0, t0), (m1, t1)] if m0 != m1 => {
                if t0.len() != t1.len() {
                    return Err(Error::Input(format!(
                        "trace lengths differ: {} has {} samples, {} has {}",
                        m0,
                        t0.len(),
                        m1,
                        t1.len()
                    )));
                }
                let (th0, c0) = self.components(t0, *m0)?;
                let (th1, c1) = self.components(t1, *m1)?;
                let (f0, f1) = segment::cross_mic_filter(&c0, &c1);
                Ok(vec![self.finish(*m0, th0, f0), self.finish(*m1, th1, f1)])
            }
            _ => Err(Error::Input("expected one trace or one trace per microphone".into())),
        }
    }
}
