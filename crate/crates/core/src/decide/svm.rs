//! Two-class C-SVC trained with SMO (maximal violating pair selection).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-|x - y|^2 / s^2)`
    Gaussian { scale: f64 },
    /// `(1 + x.y / s^2)^2`
    Quadratic { scale: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { scale } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (scale * scale)).exp()
            }
            Kernel::Quadratic { scale } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let v = 1.0 + dot / (scale * scale);
                v * v
            }
        }
    }
}

/// Decision function `sum_i coef_i K(sv_i, x) - rho`, positive for the first class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, points: &[Vec<f64>], x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&i, c)| c * kernel.eval(&points[i], x))
            .sum::<f64>()
            - self.rho
    }
}

const EPS: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Trains on `idx` (indices into `points`) with labels `y` in {+1, -1}.
pub fn train(kernel: &Kernel, points: &[Vec<f64>], idx: &[usize], y: &[f64], c: f64) -> BinarySvm {
    let n = idx.len();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * kernel.eval(&points[idx[i]], &points[idx[j]]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000_000usize.min(100 * n * n + 1000);
    for _ in 0..max_iter {
        let up = |t: usize| (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
        let low = |t: usize| (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(t) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if low(t) && -y[t] * grad[t] < gmin {
                gmin = -y[t] * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < EPS {
            break;
        }
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let qii = q[i * n + i];
        let qjj = q[j * n + j];
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q[t * n + i] * di + q[t * n + j] * dj;
        }
    }
    let rho = {
        let mut free = Vec::new();
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < c {
                free.push(yg);
            } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        if free.is_empty() {
            (ub + lb) / 2.0
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        }
    };
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support.push(idx[t]);
            coef.push(alpha[t] * y[t]);
        }
    }
    BinarySvm { support, coef, rho }
}
