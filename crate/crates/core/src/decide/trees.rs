//! Bagged classification trees (CART, Gini impurity, best-first growth).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { probs: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn class_probs(labels: &[usize], rows: &[usize], n_classes: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_classes];
    rows.iter().for_each(|&r| p[labels[r]] += 1.0);
    let n = rows.len().max(1) as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}

fn gini(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split(points: &[Vec<f64>], labels: &[usize], rows: &[usize], n_classes: usize) -> Option<Candidate> {
    let n = rows.len() as f64;
    let mut total = vec![0.0; n_classes];
    rows.iter().for_each(|&r| total[labels[r]] += 1.0);
    let parent = gini(&total, n) * n;
    if parent <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..points[rows[0]].len() {
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| points[a][f].total_cmp(&points[b][f]).then(a.cmp(&b)));
        let mut left = vec![0.0; n_classes];
        for k in 0..sorted.len() - 1 {
            left[labels[sorted[k]]] += 1.0;
            let (lo, hi) = (points[sorted[k]][f], points[sorted[k + 1]][f]);
            if hi <= lo {
                continue;
            }
            let nl = (k + 1) as f64;
            let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let impurity = gini(&left, nl) * nl + gini(&right, n - nl) * (n - nl);
            let gain = parent - impurity;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, 0.5 * (lo + hi)));
            }
        }
    }
    let (gain, feature, threshold) = best?;
    let (left, right) = rows.iter().partition(|&&r| points[r][feature] < threshold);
    Some(Candidate { gain, feature, threshold, left, right })
}

/// Grows a tree with at most `max_splits` branch nodes, always expanding the
/// leaf with the largest impurity decrease next.
pub fn grow(points: &[Vec<f64>], labels: &[usize], rows: &[usize], n_classes: usize, max_splits: usize) -> Tree {
    let mut nodes = vec![Node::Leaf { probs: class_probs(labels, rows, n_classes) }];
    let mut frontier: Vec<(usize, Candidate)> = Vec::new();
    if let Some(c) = best_split(points, labels, rows, n_classes) {
        frontier.push((0, c));
    }
    for _ in 0..max_splits {
        let Some(pos) = (0..frontier.len()).max_by(|&a, &b| {
            frontier[a].1.gain.total_cmp(&frontier[b].1.gain).then(frontier[b].0.cmp(&frontier[a].0))
        }) else {
            break;
        };
        let (at, c) = frontier.swap_remove(pos);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { probs: class_probs(labels, &c.left, n_classes) });
        nodes.push(Node::Leaf { probs: class_probs(labels, &c.right, n_classes) });
        nodes[at] = Node::Split { feature: c.feature, threshold: c.threshold, left: l, right: r };
        for (idx, part) in [(l, c.left), (r, c.right)] {
            if let Some(s) = best_split(points, labels, &part, n_classes) {
                frontier.push((idx, s));
            }
        }
    }
    Tree { nodes }
}

pub fn bag(
    points: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    max_splits: usize,
    learners: usize,
    seed: u64,
) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..learners)
        .map(|_| {
            let rows: Vec<usize> = (0..points.len()).map(|_| rng.gen_range(0..points.len())).collect();
            grow(points, labels, &rows, n_classes, max_splits)
        })
        .collect()
}

pub fn predict(trees: &[Tree], n_classes: usize, x: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; n_classes];
    for t in trees {
        p.iter_mut().zip(t.predict(x)).for_each(|(a, b)| *a += b);
    }
    p.iter_mut().for_each(|v| *v /= trees.len().max(1) as f64);
    p
}
