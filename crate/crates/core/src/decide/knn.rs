//! k-nearest-neighbour voting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(x, y)`
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Equal,
    /// `1 / d^2`
    InverseSquare,
}

pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// Per-class vote weights, normalized to sum to one. `labels` are class
/// indices below `n_classes`.
pub fn vote(
    points: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    x: &[f64],
    k: usize,
    metric: Metric,
    weighting: Weighting,
) -> Vec<f64> {
    let mut d: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (distance(metric, p, x), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut scores = vec![0.0; n_classes];
    let near = &d[..k.min(d.len())];
    if weighting == Weighting::InverseSquare && near.iter().any(|(dist, _)| *dist == 0.0) {
        for &(dist, i) in near {
            if dist == 0.0 {
                scores[labels[i]] += 1.0;
            }
        }
    } else {
        for &(dist, i) in near {
            scores[labels[i]] += match weighting {
                Weighting::Equal => 1.0,
                Weighting::InverseSquare => 1.0 / (dist * dist),
            };
        }
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_ignores_length() {
        assert!(distance(Metric::Cosine, &[1.0, 1.0], &[3.0, 3.0]).abs() < 1e-12);
        assert!((distance(Metric::Cosine, &[1.0, 0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_vote_prefers_close_points() {
        let pts = vec![vec![0.0], vec![3.0], vec![3.1]];
        let s = vote(&pts, &[0, 1, 1], 2, &[0.5], 3, Metric::Euclidean, Weighting::InverseSquare);
        assert!(s[0] > s[1]);
        let s = vote(&pts, &[0, 1, 1], 2, &[0.5], 3, Metric::Euclidean, Weighting::Equal);
        assert!(s[1] > s[0]);
    }
}
