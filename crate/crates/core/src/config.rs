//! Run configuration: TOML with dotted section keys plus `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::decide::{ClassifierSpec, Mode};
use crate::experiment::ExperimentSpec;
use crate::features::GaborBankSpec;
use crate::ofdm::FrameSpec;
use crate::segment::SegmentSpec;
use crate::sim::{DeviceGeometry, SimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub mode: Mode,
    pub frame: FrameSpec,
    pub geometry: DeviceGeometry,
    pub sim: SimConfig,
    pub segment: SegmentSpec,
    pub gabor: GaborBankSpec,
    pub classifier: ClassifierSpec,
    pub experiment: ExperimentSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: Mode::new(crate::decide::Strategy::D2, 1).unwrap(),
            frame: FrameSpec::default(),
            geometry: DeviceGeometry::default(),
            sim: SimConfig::default(),
            segment: SegmentSpec::default(),
            gabor: GaborBankSpec::default(),
            classifier: ClassifierSpec::default(),
            experiment: ExperimentSpec::default(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back to
/// a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `dotted.key` inside a table; the value `none` removes the key.
pub fn set_key(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("invalid key '{key}'")));
    }
    let (last, parents) = parts.split_last().unwrap();
    let mut at = table;
    for p in parents {
        let entry = at.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        at = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{p}' in '{key}' is not a section")))?;
    }
    if raw.trim() == "none" {
        at.remove(*last);
    } else {
        at.insert(last.to_string(), parse_value(raw));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<Table>().map_err(|e| Error::Config(e.to_string()))?)
    }

    /// Loads an optional file and applies `key=value` overrides on top.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)?.parse::<Table>().map_err(|e| Error::Config(e.to_string()))?,
            None => Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            set_key(&mut table, k, v)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// One `section.key = value` line per leaf.
    pub fn to_flat(&self) -> Result<String> {
        fn walk(prefix: &str, t: &Table, out: &mut String) {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match v {
                    Value::Table(inner) => walk(&key, inner, out),
                    other => out.push_str(&format!("{key} = {other}\n")),
                }
            }
        }
        let table = Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = String::new();
        walk("", &table, &mut out);
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.geometry.validate()?;
        self.sim.validate()?;
        self.segment.validate()?;
        self.gabor.validate()?;
        self.classifier.validate()?;
        self.experiment.validate()?;
        Ok(())
    }
}
