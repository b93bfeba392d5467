//! Shared fixtures for integration tests.
#![allow(dead_code)]

use dimsweep::regressor::{forest_fit, forest_predict, ForestConfig};
use ndarray::Array2;
use rand::Rng as _;

/// Exhaustive CART regression tree: at every node try every feature and
/// every cut between consecutive distinct values, keep the lowest total
/// squared error (first candidate wins near-ties), recurse.
pub struct OracleTree {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

enum OracleNode {
    Leaf(f64),
    Split(usize, f64, Box<OracleNode>, Box<OracleNode>),
}

fn sse(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m).powi(2)).sum()
}

impl OracleTree {
    fn build(&self, rows: &[(Vec<f64>, f64)], depth: usize) -> OracleNode {
        let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let pure = ys.iter().all(|&y| y == ys[0]);
        if pure || rows.len() < self.min_samples_split || self.max_depth.is_some_and(|m| depth >= m)
        {
            return OracleNode::Leaf(mean);
        }
        let node_sse = sse(&ys);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].0.len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.0[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                let thr = if thr >= w[1] { w[0] } else { thr };
                let left: Vec<f64> = rows.iter().filter(|r| r.0[f] <= thr).map(|r| r.1).collect();
                let right: Vec<f64> = rows.iter().filter(|r| r.0[f] > thr).map(|r| r.1).collect();
                if left.len() < self.min_samples_leaf || right.len() < self.min_samples_leaf {
                    continue;
                }
                let total = sse(&left) + sse(&right);
                let better = match best {
                    None => true,
                    Some((b, _, _)) => total < b - 1e-9 * node_sse,
                };
                if better {
                    best = Some((total, f, thr));
                }
            }
        }
        match best {
            None => OracleNode::Leaf(mean),
            Some((_, f, thr)) => {
                let (l, r): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|r| r.0[f] <= thr);
                OracleNode::Split(
                    f,
                    thr,
                    Box::new(self.build(&l, depth + 1)),
                    Box::new(self.build(&r, depth + 1)),
                )
            }
        }
    }

    pub fn fit_predict(&self, x: &Array2<f64>, y: &[f64], probes: &Array2<f64>) -> Vec<f64> {
        let rows: Vec<(Vec<f64>, f64)> = x
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .zip(y.iter().copied())
            .collect();
        let root = self.build(&rows, 0);
        probes
            .rows()
            .into_iter()
            .map(|p| {
                let mut n = &root;
                loop {
                    match n {
                        OracleNode::Leaf(v) => return *v,
                        OracleNode::Split(f, t, l, r) => n = if p[*f] <= *t { l } else { r },
                    }
                }
            })
            .collect()
    }
}

/// Runs `instances` random comparisons between the single-tree forest and
/// the oracle; returns the number of mismatching instances.
pub fn cart_oracle_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = dimsweep::RngSeed(seed).rng();
    let mut mismatches = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=2);
        // a small value grid makes ties and repeated values common
        let grid = rng.random_bool(0.5);
        let draw = |rng: &mut dimsweep::rng::Rng| {
            if grid {
                f64::from(rng.random_range(0..4))
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let x = Array2::from_shape_simple_fn((n, d), || draw(&mut rng));
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let max_depth = [None, Some(1), Some(2), Some(3)][rng.random_range(0..4)];
        let min_samples_leaf = rng.random_range(1..=2);
        let min_samples_split = rng.random_range(2..=3);
        let cfg = ForestConfig {
            max_depth,
            min_samples_leaf,
            min_samples_split,
            ..ForestConfig::single_tree()
        };
        let mut probes = x.clone();
        let extra = Array2::from_shape_simple_fn((20, d), || rng.random_range(-1.5..4.5));
        probes.append(ndarray::Axis(0), extra.view()).unwrap();
        let model = forest_fit(x.view(), &y, &cfg).unwrap();
        let got = forest_predict(&model, probes.view()).unwrap();
        let want = OracleTree {
            max_depth,
            min_samples_split,
            min_samples_leaf,
        }
        .fit_predict(&x, &y, &probes);
        if got
            .iter()
            .zip(&want)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            mismatches += 1;
        }
    }
    mismatches
}
