//! Active acoustic side-channel toolkit.
//!
//! The crate covers the whole chain from emitting an inaudible OFDM sonar
//! pulse to ranking Android unlock-pattern candidates:
//!
//! * [`ofdm`] builds the 18-20 kHz pulse and the repeating 264-sample frame.
//! * [`sim`] is a point-reflector echo simulator used as ground truth.
//! * [`echo`] turns a recorded trace into echo profile and differential matrices.
//! * [`segment`] binarizes, labels connected components and groups strokes.
//! * [`features`] estimates stroke angle (Gabor bank) and range.
//! * [`patterns`] models unlock patterns, strokes, signatures and grouping tables.
//! * [`decide`] holds the stroke classifiers, the D1/D2/D3 strategies and metrics.
//! * [`pipeline`] and [`experiment`] chain everything together.

pub mod config;
pub mod decide;
pub mod echo;
pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod ofdm;
pub mod patterns;
pub mod pipeline;
pub mod segment;
pub mod sim;

pub use error::{Error, Result};

/// Microphone identifier. The device has one microphone near each short edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mic {
    Bottom,
    Top,
}

impl Mic {
    pub const BOTH: [Mic; 2] = [Mic::Bottom, Mic::Top];

    pub fn name(self) -> &'static str {
        match self {
            Mic::Bottom => "bottom",
            Mic::Top => "top",
        }
    }
}

impl std::fmt::Display for Mic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bottom" | "b" => Ok(Mic::Bottom),
            "top" | "t" => Ok(Mic::Top),
            other => Err(Error::Input(format!("unknown microphone '{other}'"))),
        }
    }
}
