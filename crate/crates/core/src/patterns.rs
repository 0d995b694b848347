//! Unlock patterns on the 3x3 grid.
//!
//! Grid points are numbered row-major from the top-left corner:
//!
//! ```text
//! 0 1 2
//! 3 4 5
//! 6 7 8
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::{DeviceGeometry, Point2};
use crate::{Error, Mic, Result};

fn row_col(p: u8) -> (i32, i32) {
    ((p / 3) as i32, (p % 3) as i32)
}

/// Grid point exactly halfway between `a` and `b`, if there is one.
pub fn between(a: u8, b: u8) -> Option<u8> {
    let ((ra, ca), (rb, cb)) = (row_col(a), row_col(b));
    if (ra + rb) % 2 != 0 || (ca + cb) % 2 != 0 {
        return None;
    }
    Some((((ra + rb) / 2) * 3 + (ca + cb) / 2) as u8)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnlockPattern {
    pub id: u32,
    pub points: Vec<u8>,
}

impl UnlockPattern {
    pub fn new(points: Vec<u8>) -> Result<Self> {
        Self::with_id(0, points)
    }

    pub fn with_id(id: u32, points: Vec<u8>) -> Result<Self> {
        validate_points(&points)?;
        Ok(Self { id, points })
    }

    pub fn strokes(&self) -> Vec<Stroke> {
        decompose(self)
    }
}

fn validate_points(points: &[u8]) -> Result<()> {
    if !(4..=9).contains(&points.len()) {
        return Err(Error::Pattern(format!("pattern length {} is outside 4..=9", points.len())));
    }
    let mut seen = 0u16;
    for (i, &p) in points.iter().enumerate() {
        if p > 8 {
            return Err(Error::Pattern(format!("grid index {p} out of range")));
        }
        if seen & (1 << p) != 0 {
            return Err(Error::Pattern(format!("point {p} visited twice")));
        }
        if i > 0 {
            if let Some(mid) = between(points[i - 1], p) {
                if seen & (1 << mid) == 0 {
                    return Err(Error::Pattern(format!(
                        "segment {}-{p} jumps over unvisited point {mid}",
                        points[i - 1]
                    )));
                }
            }
        }
        seen |= 1 << p;
    }
    Ok(())
}

/// Maximal straight run of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stroke {
    pub start: u8,
    pub end: u8,
}

impl Stroke {
    /// Unit direction in grid units, `(d_col, d_row)`.
    pub fn direction(&self) -> (f64, f64) {
        let ((r0, c0), (r1, c1)) = (row_col(self.start), row_col(self.end));
        let (dx, dy) = ((c1 - c0) as f64, (r1 - r0) as f64);
        let n = dx.hypot(dy);
        (dx / n, dy / n)
    }
}

impl fmt::Display for Stroke {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.start, self.end)
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn step(a: u8, b: u8) -> (i32, i32) {
    let ((ra, ca), (rb, cb)) = (row_col(a), row_col(b));
    let (dr, dc) = (rb - ra, cb - ca);
    let g = gcd(dr, dc);
    (dr / g, dc / g)
}

pub fn decompose(pattern: &UnlockPattern) -> Vec<Stroke> {
    let pts = &pattern.points;
    let mut strokes = Vec::new();
    let mut start = pts[0];
    for i in 1..pts.len() {
        let last = i + 1 == pts.len();
        if last || step(pts[i - 1], pts[i]) != step(pts[i], pts[i + 1]) {
            strokes.push(Stroke { start, end: pts[i] });
            start = pts[i];
        }
    }
    strokes
}

/// Android pattern counts by length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnumerationCounts {
    /// `by_length[n]` counts patterns with exactly `n` points.
    pub by_length: [u64; 10],
}

impl EnumerationCounts {
    /// Patterns of length 4..=9.
    pub fn total(&self) -> u64 {
        self.by_length[4..].iter().sum()
    }
}

fn dfs(last: u8, visited: u16, len: usize, counts: &mut [u64; 10]) {
    counts[len] += 1;
    for next in 0..9u8 {
        if visited & (1 << next) != 0 {
            continue;
        }
        if let Some(mid) = between(last, next) {
            if visited & (1 << mid) == 0 {
                continue;
            }
        }
        dfs(next, visited | (1 << next), len + 1, counts);
    }
}

/// Counts of valid patterns starting at `start`.
pub fn enumerate_from(start: u8) -> EnumerationCounts {
    let mut by_length = [0u64; 10];
    dfs(start, 1 << start, 1, &mut by_length);
    EnumerationCounts { by_length }
}

pub fn enumerate_android_patterns() -> EnumerationCounts {
    let mut by_length = [0u64; 10];
    for start in 0..9 {
        let c = enumerate_from(start);
        by_length.iter_mut().zip(c.by_length).for_each(|(a, b)| *a += b);
    }
    EnumerationCounts { by_length }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Away,
    Towards,
}

impl Direction {
    pub fn symbol(self) -> char {
        match self {
            Direction::Away => 'A',
            Direction::Towards => 'T',
        }
    }
}

/// A/T sequence for one microphone, one symbol per stroke.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrokeSignature(pub Vec<Direction>);

impl StrokeSignature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for StrokeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|d| d.symbol().to_string()).collect();
        f.write_str(&s.join("-"))
    }
}

impl FromStr for StrokeSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| *c != '-')
            .map(|c| match c.to_ascii_uppercase() {
                'A' => Ok(Direction::Away),
                'T' => Ok(Direction::Towards),
                other => Err(Error::Pattern(format!("unknown direction symbol '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(StrokeSignature)
    }
}

impl Serialize for StrokeSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrokeSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Geometric direction of `stroke` relative to a point.
pub fn stroke_direction(stroke: Stroke, mic: Point2, geometry: &DeviceGeometry) -> Result<Direction> {
    let change = geometry.grid_point(stroke.end).dist(mic) - geometry.grid_point(stroke.start).dist(mic);
    if change.abs() < 1e-9 {
        return Err(Error::Pattern(format!("stroke {stroke} keeps a constant distance to the microphone")));
    }
    Ok(if change > 0.0 { Direction::Away } else { Direction::Towards })
}

pub fn signature(pattern: &UnlockPattern, mic: Point2, geometry: &DeviceGeometry) -> Result<StrokeSignature> {
    decompose(pattern)
        .into_iter()
        .map(|s| stroke_direction(s, mic, geometry))
        .collect::<Result<Vec<_>>>()
        .map(StrokeSignature)
}

/// Fixed set of candidate patterns and the strokes they use.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCatalog {
    patterns: Vec<UnlockPattern>,
    strokes: Vec<Stroke>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.txt");

impl Default for PatternCatalog {
    fn default() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}

impl PatternCatalog {
    pub fn new(patterns: Vec<UnlockPattern>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::Pattern("catalog is empty".into()));
        }
        let mut ids: Vec<u32> = patterns.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Pattern("duplicate pattern id in catalog".into()));
        }
        let mut strokes = Vec::new();
        for s in patterns.iter().flat_map(decompose) {
            if !strokes.contains(&s) {
                strokes.push(s);
            }
        }
        Ok(Self { patterns, strokes })
    }

    /// Parses `id: p0 p1 ...` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Pattern(format!("catalog line {}: {what}", lineno + 1));
            let (id, rest) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let id: u32 = id.trim().parse().map_err(|_| bad("bad id"))?;
            let points = rest
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| bad("bad grid index")))
                .collect::<Result<Vec<_>>>()?;
            patterns.push(UnlockPattern::with_id(id, points).map_err(|e| bad(&e.to_string()))?);
        }
        Self::new(patterns)
    }

    pub fn to_text(&self) -> String {
        self.patterns
            .iter()
            .map(|p| {
                let pts: Vec<String> = p.points.iter().map(|x| x.to_string()).collect();
                format!("{}: {}\n", p.id, pts.join(" "))
            })
            .collect()
    }

    pub fn patterns(&self) -> &[UnlockPattern] {
        &self.patterns
    }

    pub fn ids(&self) -> Vec<u32> {
        self.patterns.iter().map(|p| p.id).collect()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&UnlockPattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    /// Stroke vocabulary in order of first appearance.
    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    /// Vocabulary id (1-based) of a stroke.
    pub fn stroke_id(&self, stroke: Stroke) -> Option<u32> {
        self.strokes.iter().position(|&s| s == stroke).map(|i| i as u32 + 1)
    }

    pub fn stroke(&self, id: u32) -> Option<Stroke> {
        self.strokes.get((id as usize).checked_sub(1)?).copied()
    }

    pub fn stroke_ids(&self, pattern_id: u32) -> Option<Vec<u32>> {
        let p = self.get(pattern_id)?;
        Some(decompose(p).into_iter().map(|s| self.stroke_id(s).unwrap()).collect())
    }

    pub fn subset(&self, ids: &[u32]) -> Result<Self> {
        Self::new(self.patterns.iter().filter(|p| ids.contains(&p.id)).cloned().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableMode {
    Bottom,
    Top,
    Both,
}

impl TableMode {
    pub fn single(mic: Mic) -> Self {
        match mic {
            Mic::Bottom => TableMode::Bottom,
            Mic::Top => TableMode::Top,
        }
    }
}

/// Signature key of a group; a microphone outside the table mode is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bottom: Option<StrokeSignature>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top: Option<StrokeSignature>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.bottom, &self.top) {
            (Some(b), Some(t)) => write!(f, "bottom {b} / top {t}"),
            (Some(b), None) => write!(f, "bottom {b}"),
            (None, Some(t)) => write!(f, "top {t}"),
            (None, None) => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternGroup {
    #[serde(flatten)]
    pub key: GroupKey,
    pub patterns: Vec<u32>,
}

/// Partition of a catalog by stroke signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTable {
    pub mode: TableMode,
    pub groups: Vec<PatternGroup>,
}

impl GroupTable {
    pub fn lookup(&self, key: &GroupKey) -> Option<&PatternGroup> {
        self.groups.iter().find(|g| &g.key == key)
    }

    pub fn group_of(&self, pattern_id: u32) -> Option<&PatternGroup> {
        self.groups.iter().find(|g| g.patterns.contains(&pattern_id))
    }
}

pub fn pattern_key(
    pattern: &UnlockPattern,
    mode: TableMode,
    geometry: &DeviceGeometry,
) -> Result<GroupKey> {
    let sig = |mic: Mic| signature(pattern, geometry.mic(mic), geometry);
    Ok(match mode {
        TableMode::Bottom => GroupKey { bottom: Some(sig(Mic::Bottom)?), top: None },
        TableMode::Top => GroupKey { bottom: None, top: Some(sig(Mic::Top)?) },
        TableMode::Both => GroupKey { bottom: Some(sig(Mic::Bottom)?), top: Some(sig(Mic::Top)?) },
    })
}

/// Groups are ordered by their smallest pattern id; ids inside a group ascend.
pub fn build_group_table(
    catalog: &PatternCatalog,
    mode: TableMode,
    geometry: &DeviceGeometry,
) -> Result<GroupTable> {
    let mut map: BTreeMap<GroupKey, Vec<u32>> = BTreeMap::new();
    for p in catalog.patterns() {
        map.entry(pattern_key(p, mode, geometry)?).or_default().push(p.id);
    }
    let mut groups: Vec<PatternGroup> = map
        .into_iter()
        .map(|(key, mut patterns)| {
            patterns.sort_unstable();
            PatternGroup { key, patterns }
        })
        .collect();
    groups.sort_by_key(|g| g.patterns[0]);
    Ok(GroupTable { mode, groups })
}

/// Stroke positions at which members of a group differ, with each member's
/// stroke id at that position.
pub fn distinguishing_positions(catalog: &PatternCatalog, group: &[u32]) -> Vec<(usize, Vec<(u32, u32)>)> {
    let seqs: Vec<(u32, Vec<u32>)> = group
        .iter()
        .filter_map(|&id| catalog.stroke_ids(id).map(|s| (id, s)))
        .collect();
    let Some(n) = seqs.iter().map(|(_, s)| s.len()).min() else {
        return Vec::new();
    };
    (0..n)
        .filter_map(|pos| {
            let at: Vec<(u32, u32)> = seqs.iter().map(|(id, s)| (*id, s[pos])).collect();
            let first = at[0].1;
            at.iter().any(|&(_, s)| s != first).then_some((pos, at))
        })
        .collect()
}

/// Distinct stroke ids used at distinguishing positions of a group.
pub fn unique_strokes(catalog: &PatternCatalog, group: &[u32]) -> Vec<u32> {
    let mut ids: Vec<u32> = distinguishing_positions(catalog, group)
        .into_iter()
        .flat_map(|(_, at)| at.into_iter().map(|(_, s)| s))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}
