//! Candidate ranking and evaluation metrics M1 to M5.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::strategy::CandidateSet;
use crate::{Error, Result};

/// Orders the patterns of several observations: suggestion count descending,
/// then id ascending. Patterns only ever retained follow, ordered the same way
/// by retention count.
pub fn rank_candidates(observations: &[CandidateSet]) -> Vec<u32> {
    let mut suggested: BTreeMap<u32, usize> = BTreeMap::new();
    let mut retained: BTreeMap<u32, usize> = BTreeMap::new();
    for o in observations {
        o.suggested.iter().for_each(|&p| *suggested.entry(p).or_default() += 1);
        o.retained.iter().for_each(|&p| *retained.entry(p).or_default() += 1);
    }
    let order = |counts: BTreeMap<u32, usize>| {
        let mut v: Vec<(u32, usize)> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(p, _)| p)
    };
    let mut ranked: Vec<u32> = order(suggested.clone()).collect();
    ranked.extend(order(retained).filter(|p| !suggested.contains_key(p)));
    ranked
}

/// Union of the patterns suggested by several observations.
pub fn pool(observations: &[CandidateSet]) -> BTreeSet<u32> {
    observations.iter().flat_map(|o| o.suggested.iter().copied()).collect()
}

/// All observations of one user entering one pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub user: u32,
    pub pattern: u32,
    pub observations: Vec<CandidateSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub user: u32,
    pub pattern: u32,
    pub hit: bool,
    pub candidates: usize,
    pub rank: usize,
}

pub fn score_cell(cell: &CellResult, catalog_size: usize) -> Result<CellScore> {
    if cell.observations.is_empty() {
        return Err(Error::Input(format!("user {} pattern {} has no observations", cell.user, cell.pattern)));
    }
    let pool = pool(&cell.observations);
    let rank = rank_candidates(&cell.observations)
        .iter()
        .position(|&p| p == cell.pattern)
        .map_or(catalog_size, |i| i + 1);
    Ok(CellScore {
        user: cell.user,
        pattern: cell.pattern,
        hit: pool.contains(&cell.pattern),
        candidates: pool.len(),
        rank,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: u32,
    /// M1
    pub guess_rate: f64,
    /// M2
    pub mean_candidates: f64,
    /// M5
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub pattern: u32,
    /// M3
    pub guess_rate: f64,
    /// M4
    pub mean_candidates: f64,
    /// M5
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub cells: usize,
    pub guess_rate: f64,
    pub mean_candidates: f64,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub catalog_size: usize,
    pub per_user: Vec<UserMetrics>,
    pub per_pattern: Vec<PatternMetrics>,
    pub overall: Overall,
}

fn summarize(scores: &[&CellScore]) -> (f64, f64, f64) {
    let n = scores.len() as f64;
    (
        scores.iter().filter(|s| s.hit).count() as f64 / n,
        scores.iter().map(|s| s.candidates as f64).sum::<f64>() / n,
        scores.iter().map(|s| s.rank as f64).sum::<f64>() / n,
    )
}

pub fn compute_metrics(cells: &[CellResult], catalog_size: usize) -> Result<MetricsReport> {
    if cells.is_empty() {
        return Err(Error::Input("no results to score".into()));
    }
    let scores: Vec<CellScore> = cells.iter().map(|c| score_cell(c, catalog_size)).collect::<Result<_>>()?;
    let mut by_user: BTreeMap<u32, Vec<&CellScore>> = BTreeMap::new();
    let mut by_pattern: BTreeMap<u32, Vec<&CellScore>> = BTreeMap::new();
    for s in &scores {
        by_user.entry(s.user).or_default().push(s);
        by_pattern.entry(s.pattern).or_default().push(s);
    }
    let per_user = by_user
        .into_iter()
        .map(|(user, s)| {
            let (guess_rate, mean_candidates, mean_rank) = summarize(&s);
            UserMetrics { user, guess_rate, mean_candidates, mean_rank }
        })
        .collect();
    let per_pattern = by_pattern
        .into_iter()
        .map(|(pattern, s)| {
            let (guess_rate, mean_candidates, mean_rank) = summarize(&s);
            PatternMetrics { pattern, guess_rate, mean_candidates, mean_rank }
        })
        .collect();
    let all: Vec<&CellScore> = scores.iter().collect();
    let (guess_rate, mean_candidates, mean_rank) = summarize(&all);
    Ok(MetricsReport {
        catalog_size,
        per_user,
        per_pattern,
        overall: Overall { cells: scores.len(), guess_rate, mean_candidates, mean_rank },
    })
}

impl MetricsReport {
    /// Aligned-column text rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>6}  {:>8}  {:>10}  {:>9}", "user", "M1", "M2", "M5");
        for u in &self.per_user {
            let _ = writeln!(out, "{:>6}  {:>8.3}  {:>10.2}  {:>9.2}", u.user, u.guess_rate, u.mean_candidates, u.mean_rank);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>6}  {:>8}  {:>10}  {:>9}", "pattern", "M3", "M4", "M5");
        for p in &self.per_pattern {
            let _ = writeln!(
                out,
                "{:>7}  {:>8.3}  {:>10.2}  {:>9.2}",
                p.pattern, p.guess_rate, p.mean_candidates, p.mean_rank
            );
        }
        let o = &self.overall;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "overall: cells {}  guess rate {:.3}  candidates {:.2}  rank {:.2}",
            o.cells, o.guess_rate, o.mean_candidates, o.mean_rank
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decide::strategy::Resolution;

    fn set(suggested: &[u32]) -> CandidateSet {
        CandidateSet {
            mode: "D2.1".parse().unwrap(),
            resolution: Resolution::FullCatalog,
            suggested: suggested.to_vec(),
            retained: Vec::new(),
        }
    }

    #[test]
    fn ranking_by_count_then_id() {
        let obs = [set(&[7, 2]), set(&[7]), set(&[7])];
        assert_eq!(rank_candidates(&obs), vec![7, 2]);
        let obs = [set(&[9, 4, 1])];
        assert_eq!(rank_candidates(&obs), vec![1, 4, 9]);
    }

    #[test]
    fn retained_patterns_follow_suggested() {
        let mut s = set(&[5]);
        s.retained = vec![2, 3];
        assert_eq!(rank_candidates(&[s, set(&[3])]), vec![3, 5, 2]);
    }

    #[test]
    fn full_catalog_baseline() {
        let all: Vec<u32> = (1..=12).collect();
        let cells: Vec<CellResult> = (1..=12)
            .map(|p| CellResult { user: 1, pattern: p, observations: vec![set(&all)] })
            .collect();
        let r = compute_metrics(&cells, 12).unwrap();
        assert_eq!(r.overall.guess_rate, 1.0);
        assert_eq!(r.overall.mean_candidates, 12.0);
        assert_eq!(r.overall.mean_rank, 6.5);
    }

    #[test]
    fn singleton_truth() {
        let cells: Vec<CellResult> =
            (1..=3).map(|p| CellResult { user: p, pattern: p, observations: vec![set(&[p]); 5] }).collect();
        let r = compute_metrics(&cells, 12).unwrap();
        assert_eq!((r.overall.guess_rate, r.overall.mean_candidates, r.overall.mean_rank), (1.0, 1.0, 1.0));
        assert_eq!(r.per_user.len(), 3);
        assert!(r.to_table().contains("overall"));
    }

    #[test]
    fn missing_truth_ranks_last() {
        let cells = [CellResult { user: 1, pattern: 4, observations: vec![set(&[1, 2])] }];
        let r = compute_metrics(&cells, 12).unwrap();
        assert_eq!((r.overall.guess_rate, r.overall.mean_rank), (0.0, 12.0));
        assert!(compute_metrics(&[], 12).is_err());
    }
}
