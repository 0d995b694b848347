//! Decision strategies turning observed strokes into candidate patterns.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::classify::{self, Classifier, ClassifierSpec, LabeledStrokeSample, MicFeature, StrokeSample};
use crate::features::StrokeFeature;
use crate::patterns::{self, Direction, GroupKey, GroupTable, PatternCatalog, StrokeSignature, TableMode};
use crate::pipeline::MicAnalysis;
use crate::{Error, Mic, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    D1,
    D2,
    D3,
}

/// Strategy plus microphone variant, written `D2.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub strategy: Strategy,
    pub variant: u8,
}

impl Mode {
    pub const ALL: [&'static str; 11] =
        ["D1.1", "D1.2", "D1.3", "D2.1", "D2.2", "D2.3", "D2.4", "D3.1", "D3.2", "D3.3", "D3.4"];

    pub fn new(strategy: Strategy, variant: u8) -> Result<Self> {
        let max = if strategy == Strategy::D1 { 3 } else { 4 };
        if variant == 0 || variant > max {
            return Err(Error::Config(format!("no variant {variant} for {strategy:?}")));
        }
        Ok(Self { strategy, variant })
    }

    /// Table consulted first.
    pub fn primary(self) -> TableMode {
        match (self.strategy, self.variant) {
            (Strategy::D1, 2) => TableMode::Bottom,
            (Strategy::D1, 3) => TableMode::Top,
            (Strategy::D1, _) => TableMode::Both,
            (_, 3) => TableMode::Bottom,
            (_, 4) => TableMode::Top,
            _ => TableMode::Both,
        }
    }

    /// Single-microphone table used when the both-microphone lookup fails.
    pub fn fallback(self) -> Option<TableMode> {
        match (self.strategy, self.variant) {
            (Strategy::D1, _) => None,
            (_, 1) => Some(TableMode::Bottom),
            (_, 2) => Some(TableMode::Top),
            _ => None,
        }
    }

    pub fn required_mics(self) -> Vec<Mic> {
        match self.primary() {
            TableMode::Both => Mic::BOTH.to_vec(),
            TableMode::Bottom => vec![Mic::Bottom],
            TableMode::Top => vec![Mic::Top],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}.{}", self.strategy, self.variant)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid decision mode '{s}'; expected one of {}", Mode::ALL.join(", ")));
        let (head, tail) = s.trim().split_once('.').ok_or_else(bad)?;
        let strategy = match head.to_ascii_uppercase().as_str() {
            "D1" => Strategy::D1,
            "D2" => Strategy::D2,
            "D3" => Strategy::D3,
            _ => return Err(bad()),
        };
        Mode::new(strategy, tail.parse().map_err(|_| bad())?).map_err(|_| bad())
    }
}

impl Serialize for Mode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One stroke as seen by one microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedStroke {
    pub angle: f64,
    pub range: f64,
    pub direction: Option<Direction>,
}

impl From<&StrokeFeature> for ObservedStroke {
    fn from(f: &StrokeFeature) -> Self {
        Self { angle: f.angle, range: f.range, direction: f.direction }
    }
}

impl ObservedStroke {
    pub fn feature(&self) -> MicFeature {
        MicFeature { angle: self.angle, range: self.range }
    }
}

/// Strokes of one pattern entry per microphone; `None` when the microphone
/// was not recorded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub bottom: Option<Vec<ObservedStroke>>,
    pub top: Option<Vec<ObservedStroke>>,
}

impl Observation {
    pub fn from_analyses(analyses: &[MicAnalysis]) -> Self {
        let mut obs = Observation::default();
        for a in analyses {
            let strokes = Some(a.features.iter().map(ObservedStroke::from).collect());
            match a.mic {
                Mic::Bottom => obs.bottom = strokes,
                Mic::Top => obs.top = strokes,
            }
        }
        obs
    }

    pub fn strokes(&self, mic: Mic) -> Option<&[ObservedStroke]> {
        match mic {
            Mic::Bottom => self.bottom.as_deref(),
            Mic::Top => self.top.as_deref(),
        }
    }

    /// Direction signature, `None` when the microphone saw nothing or any
    /// stroke was indeterminate.
    pub fn signature(&self, mic: Mic) -> Option<StrokeSignature> {
        let strokes = self.strokes(mic)?;
        if strokes.is_empty() {
            return None;
        }
        strokes.iter().map(|s| s.direction).collect::<Option<Vec<_>>>().map(StrokeSignature)
    }

    pub fn key(&self, mode: TableMode) -> Option<GroupKey> {
        Some(match mode {
            TableMode::Bottom => GroupKey { bottom: Some(self.signature(Mic::Bottom)?), top: None },
            TableMode::Top => GroupKey { bottom: None, top: Some(self.signature(Mic::Top)?) },
            TableMode::Both => {
                GroupKey { bottom: Some(self.signature(Mic::Bottom)?), top: Some(self.signature(Mic::Top)?) }
            }
        })
    }

    /// Number of stroke positions; the longer microphone wins in both mode.
    pub fn len(&self, mode: TableMode) -> usize {
        let n = |mic| self.strokes(mic).map_or(0, |s| s.len());
        match mode {
            TableMode::Bottom => n(Mic::Bottom),
            TableMode::Top => n(Mic::Top),
            TableMode::Both => n(Mic::Bottom).max(n(Mic::Top)),
        }
    }

    pub fn is_empty(&self, mode: TableMode) -> bool {
        self.len(mode) == 0
    }

    /// Features at a stroke position, paired across microphones by index.
    pub fn sample(&self, index: usize) -> StrokeSample {
        let at = |mic| self.strokes(mic).and_then(|s| s.get(index)).map(ObservedStroke::feature);
        StrokeSample { bottom: at(Mic::Bottom), top: at(Mic::Top) }
    }
}

/// Where a candidate set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Resolution {
    /// Exact classified stroke sequence.
    Exact { strokes: Vec<u32> },
    /// Best positional match of a partly classified sequence.
    Positional { strokes: Vec<Option<u32>>, matches: usize },
    /// Signature group of a table.
    Group { table: TableMode, key: GroupKey },
    /// Nothing usable; every catalog pattern stays in play.
    FullCatalog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub mode: Mode,
    pub resolution: Resolution,
    /// Patterns suggested by this observation, ascending id except for D3
    /// where the single selected pattern is listed.
    pub suggested: Vec<u32>,
    /// Remaining group members after a D3 selection, best score first; they
    /// only affect ordering of attack attempts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retained: Vec<u32>,
}

impl CandidateSet {
    pub fn contains(&self, id: u32) -> bool {
        self.suggested.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.suggested.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suggested.is_empty()
    }

    /// Suggested patterns followed by retained ones.
    pub fn ordered(&self) -> Vec<u32> {
        self.suggested.iter().chain(&self.retained).copied().collect()
    }
}

/// Grouping tables for the three microphone modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTables {
    pub bottom: GroupTable,
    pub top: GroupTable,
    pub both: GroupTable,
}

impl GroupTables {
    pub fn build(catalog: &PatternCatalog, geometry: &crate::sim::DeviceGeometry) -> Result<Self> {
        Ok(Self {
            bottom: patterns::build_group_table(catalog, TableMode::Bottom, geometry)?,
            top: patterns::build_group_table(catalog, TableMode::Top, geometry)?,
            both: patterns::build_group_table(catalog, TableMode::Both, geometry)?,
        })
    }

    pub fn get(&self, mode: TableMode) -> &GroupTable {
        match mode {
            TableMode::Bottom => &self.bottom,
            TableMode::Top => &self.top,
            TableMode::Both => &self.both,
        }
    }
}

/// Classifier for the unique strokes of one multi-pattern group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    pub table: TableMode,
    pub patterns: Vec<u32>,
    pub strokes: Vec<u32>,
    pub classifier: Classifier,
}

/// Everything the classifier-based strategies need, stored as one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub spec: ClassifierSpec,
    /// Full-vocabulary stroke classifiers, one per microphone mode.
    pub stroke: Vec<Classifier>,
    pub groups: Vec<GroupModel>,
    /// Groups left without a model, with the reason.
    #[serde(default)]
    pub skipped: Vec<(TableMode, Vec<u32>, String)>,
}

impl ModelBundle {
    pub fn stroke_classifier(&self, mode: TableMode) -> Option<&Classifier> {
        self.stroke.iter().find(|c| c.mode == mode)
    }

    pub fn group_model(&self, table: TableMode, patterns: &[u32]) -> Option<&GroupModel> {
        self.groups.iter().find(|g| g.table == table && g.patterns == patterns)
    }

    pub fn check_version(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Input(format!(
                "model version {} unsupported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        Ok(())
    }
}

const MODES: [TableMode; 3] = [TableMode::Both, TableMode::Bottom, TableMode::Top];

/// Trains the stroke classifiers and every group classifier. Models whose
/// training set is degenerate are listed in `skipped`; an empty pattern list
/// marks a full-vocabulary classifier.
pub fn train_models(
    samples: &[LabeledStrokeSample],
    catalog: &PatternCatalog,
    tables: &GroupTables,
    spec: &ClassifierSpec,
) -> Result<ModelBundle> {
    let mut stroke = Vec::new();
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for mode in MODES {
        match classify::train_stroke_classifier(samples, spec, mode) {
            Ok(c) => stroke.push(c),
            Err(e) => skipped.push((mode, Vec::new(), e.to_string())),
        }
    }
    for table in MODES {
        for g in &tables.get(table).groups {
            if g.patterns.len() < 2 {
                continue;
            }
            let strokes = patterns::unique_strokes(catalog, &g.patterns);
            let subset: Vec<LabeledStrokeSample> =
                samples.iter().filter(|s| strokes.contains(&s.stroke)).copied().collect();
            match classify::train_stroke_classifier(&subset, spec, table) {
                Ok(classifier) => {
                    groups.push(GroupModel { table, patterns: g.patterns.clone(), strokes, classifier })
                }
                Err(e) => skipped.push((table, g.patterns.clone(), e.to_string())),
            }
        }
    }
    Ok(ModelBundle { version: MODEL_VERSION, spec: spec.clone(), stroke, groups, skipped })
}

fn full_catalog(mode: Mode, catalog: &PatternCatalog) -> CandidateSet {
    CandidateSet { mode, resolution: Resolution::FullCatalog, suggested: catalog.ids(), retained: Vec::new() }
}

fn check_mode(mode: Mode, strategy: Strategy) -> Result<()> {
    if mode.strategy != strategy {
        return Err(Error::Config(format!("mode {mode} used with {strategy:?} inference")));
    }
    Ok(())
}

/// Classifies every stroke; an exact catalog sequence wins, otherwise the
/// patterns agreeing on the most positions are returned.
pub fn d1_infer(obs: &Observation, classifier: &Classifier, catalog: &PatternCatalog, mode: Mode) -> Result<CandidateSet> {
    check_mode(mode, Strategy::D1)?;
    let table = mode.primary();
    let n = obs.len(table);
    if n == 0 {
        return Ok(full_catalog(mode, catalog));
    }
    let classified: Vec<Option<u32>> = (0..n).map(|i| classifier.predict(&obs.sample(i))).collect();
    if let Some(seq) = classified.iter().copied().collect::<Option<Vec<u32>>>() {
        let exact: Vec<u32> = catalog.ids().into_iter().filter(|&id| catalog.stroke_ids(id) == Some(seq.clone())).collect();
        if !exact.is_empty() {
            return Ok(CandidateSet { mode, resolution: Resolution::Exact { strokes: seq }, suggested: exact, retained: Vec::new() });
        }
    }
    let score = |id: u32| {
        let seq = catalog.stroke_ids(id).unwrap_or_default();
        classified.iter().zip(&seq).filter(|(c, s)| **c == Some(**s)).count()
    };
    let best = catalog.ids().into_iter().map(score).max().unwrap_or(0);
    let suggested = catalog.ids().into_iter().filter(|&id| score(id) == best).collect();
    Ok(CandidateSet { mode, resolution: Resolution::Positional { strokes: classified, matches: best }, suggested, retained: Vec::new() })
}

fn resolve_group(obs: &Observation, tables: &GroupTables, mode: Mode) -> Option<(TableMode, GroupKey, Vec<u32>)> {
    let lookup = |table: TableMode| {
        let key = obs.key(table)?;
        let group = tables.get(table).lookup(&key)?;
        Some((table, key, group.patterns.clone()))
    };
    lookup(mode.primary()).or_else(|| mode.fallback().and_then(lookup))
}

/// Looks the direction signature up in the grouping tables.
pub fn d2_infer(obs: &Observation, tables: &GroupTables, catalog: &PatternCatalog, mode: Mode) -> Result<CandidateSet> {
    check_mode(mode, Strategy::D2)?;
    Ok(match resolve_group(obs, tables, mode) {
        Some((table, key, patterns)) => {
            CandidateSet { mode, resolution: Resolution::Group { table, key }, suggested: patterns, retained: Vec::new() }
        }
        None => full_catalog(mode, catalog),
    })
}

/// Per-member scores of a group: the classifier score of each member's own
/// stroke, summed over the positions where members differ.
pub fn group_scores(obs: &Observation, model: &GroupModel, catalog: &PatternCatalog) -> Vec<(u32, f64)> {
    let positions = patterns::distinguishing_positions(catalog, &model.patterns);
    let mut totals: BTreeMap<u32, f64> = model.patterns.iter().map(|&p| (p, 0.0)).collect();
    for (pos, members) in positions {
        let Some(scores) = model.classifier.scores(&obs.sample(pos)) else {
            continue;
        };
        for (pattern, stroke) in members {
            *totals.get_mut(&pattern).unwrap() += model.classifier.score_of(&scores, stroke);
        }
    }
    totals.into_iter().collect()
}

/// D2 grouping followed by a group-specific classifier that picks one member.
pub fn d3_infer(
    obs: &Observation,
    tables: &GroupTables,
    models: &ModelBundle,
    catalog: &PatternCatalog,
    mode: Mode,
) -> Result<CandidateSet> {
    check_mode(mode, Strategy::D3)?;
    let Some((table, key, patterns)) = resolve_group(obs, tables, mode) else {
        return Ok(full_catalog(mode, catalog));
    };
    let resolution = Resolution::Group { table, key };
    let unchanged = |patterns: Vec<u32>| CandidateSet { mode, resolution: resolution.clone(), suggested: patterns, retained: Vec::new() };
    if patterns.len() < 2 {
        return Ok(unchanged(patterns));
    }
    let Some(model) = models.group_model(table, &patterns) else {
        return Ok(unchanged(patterns));
    };
    let mut scored = group_scores(obs, model, catalog);
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let suggested = vec![scored[0].0];
    let retained = scored[1..].iter().map(|s| s.0).collect();
    Ok(CandidateSet { mode, resolution, suggested, retained })
}

/// Dispatches on the mode's strategy.
pub fn infer(
    obs: &Observation,
    tables: &GroupTables,
    models: Option<&ModelBundle>,
    catalog: &PatternCatalog,
    mode: Mode,
) -> Result<CandidateSet> {
    let need_models = || Error::Config(format!("mode {mode} needs trained models"));
    match mode.strategy {
        Strategy::D1 => {
            let m = models.ok_or_else(need_models)?;
            let c = m.stroke_classifier(mode.primary()).ok_or_else(need_models)?;
            d1_infer(obs, c, catalog, mode)
        }
        Strategy::D2 => d2_infer(obs, tables, catalog, mode),
        Strategy::D3 => d3_infer(obs, tables, models.ok_or_else(need_models)?, catalog, mode),
    }
}
