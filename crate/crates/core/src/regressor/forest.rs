//! CART regression trees and bootstrap-aggregated forests.
//!
//! Trees grow on squared error. At each node every candidate threshold (the
//! midpoint between consecutive distinct sorted values of a feature) is
//! scored by impurity decrease; the largest decrease wins, ties going to the
//! lowest feature index and then the lowest threshold. A node becomes a leaf
//! when it is pure, too small to split, at `max_depth`, or has no valid
//! threshold. Leaves predict the mean of their (bootstrap-weighted) samples.
//!
//! Bootstrap resampling is represented as integer sample weights, which is
//! equivalent to materializing the duplicated rows.

use ndarray::ArrayView2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{ModelKind, Reader, Writer};
use crate::error::{Error, Result};
use crate::rng::{Rng, RngSeed};

/// Relative tolerance under which two impurity decreases count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Count(usize),
    Sqrt,
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: RngSeed,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            bootstrap: true,
            seed: RngSeed(0),
        }
    }
}

impl ForestConfig {
    /// One tree on the full training set: the plain CART builder.
    pub fn single_tree() -> Self {
        ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument(
                "min_samples_split must be >= 2 and min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        /// Training samples (with bootstrap multiplicity) in the leaf.
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Left/right decisions from the root to the leaf (`true` = left).
    pub fn decision_path(&self, x: &[f64]) -> Vec<bool> {
        let mut path = Vec::new();
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i]
        {
            let go_left = x[feature] <= threshold;
            path.push(go_left);
            i = if go_left { left } else { right };
        }
        path
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, left).max(rec(nodes, right)),
            }
        }
        rec(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    dim: usize,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<RegressionTree>, dim: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument(
                "forest needs at least one tree".into(),
            ));
        }
        Ok(ForestModel { trees, dim })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ModelKind::Forest);
        w.u32(self.dim);
        w.u32(self.trees.len());
        for t in &self.trees {
            w.u32(t.nodes.len());
            for n in &t.nodes {
                match *n {
                    Node::Leaf { value, samples } => {
                        w.u8(0);
                        w.f64(value);
                        w.u32(samples);
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.u8(1);
                        w.u32(feature);
                        w.f64(threshold);
                        w.u32(left);
                        w.u32(right);
                    }
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, ModelKind::Forest)?;
        let dim = r.u32()?;
        let n_trees = r.u32()?;
        let mut trees = Vec::new();
        for _ in 0..n_trees {
            let n_nodes = r.u32()?;
            let mut nodes = Vec::new();
            for _ in 0..n_nodes {
                nodes.push(match r.u8()? {
                    0 => Node::Leaf {
                        value: r.f64()?,
                        samples: r.u32()?,
                    },
                    1 => Node::Split {
                        feature: r.u32()?,
                        threshold: r.f64()?,
                        left: r.u32()?,
                        right: r.u32()?,
                    },
                    t => return Err(Error::Format(format!("unknown tree node tag {t}"))),
                });
            }
            validate_tree(&nodes, dim)?;
            trees.push(RegressionTree { nodes });
        }
        r.finish()?;
        Self::from_trees(trees, dim)
    }
}

fn validate_tree(nodes: &[Node], dim: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::Format("empty tree".into()));
    }
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Split {
            feature,
            left,
            right,
            ..
        } = *n
        {
            // children are always appended after their parent
            if feature >= dim
                || left <= i
                || right <= i
                || left >= nodes.len()
                || right >= nodes.len()
            {
                return Err(Error::Format(format!("malformed split node {i}")));
            }
        }
    }
    Ok(())
}

/// Grows `cfg.n_trees` trees, each on its own seeded bootstrap resample.
pub fn forest_fit(x: ArrayView2<f64>, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows vs targets",
            left: n,
            right: y.len(),
        });
    }
    if n == 0 || d == 0 {
        return Err(Error::Empty(
            "forest needs at least one sample and one feature".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "forest inputs must be finite".into(),
        ));
    }
    let data = Columns::new(x, y);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = cfg.seed.derive("forest-tree", t as u64).rng();
            let weights = if cfg.bootstrap {
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            grow_tree(&data, &weights, cfg, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, dim: d })
}

pub fn forest_predict(model: &ForestModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: x.ncols(),
        });
    }
    let mut row = vec![0.0; model.dim];
    x.rows()
        .into_iter()
        .map(|r| {
            row.iter_mut().zip(r).for_each(|(a, b)| *a = *b);
            model.predict_row(&row)
        })
        .collect()
}

/// Column-major copy of the training data with per-feature sort orders.
struct Columns {
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
    y: Vec<f64>,
}

impl Columns {
    fn new(x: ArrayView2<f64>, y: &[f64]) -> Self {
        let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Columns {
            cols,
            sorted,
            y: y.to_vec(),
        }
    }
}

struct Candidate {
    feature: usize,
    /// Position in the node's sorted segment of the last left sample.
    pos: usize,
    threshold: f64,
    decrease: f64,
}

#[derive(Clone, Copy)]
struct Entry {
    x: f64,
    /// Index into the tree's compact in-bag arrays.
    i: u32,
}

fn grow_tree(data: &Columns, weights: &[u32], cfg: &ForestConfig, rng: &mut Rng) -> RegressionTree {
    let d = data.cols.len();
    let mut local = vec![u32::MAX; weights.len()];
    let mut w_of: Vec<f64> = Vec::new();
    let mut y_of: Vec<f64> = Vec::new();
    for (g, &w) in weights.iter().enumerate() {
        if w > 0 {
            local[g] = w_of.len() as u32;
            w_of.push(f64::from(w));
            y_of.push(data.y[g]);
        }
    }
    let wy_of: Vec<f64> = w_of.iter().zip(&y_of).map(|(w, y)| w * y).collect();
    // order[f] lists in-bag samples sorted by feature f; each node owns the
    // same [start, end) range in every feature's list.
    let mut order: Vec<Vec<Entry>> = data
        .sorted
        .iter()
        .zip(&data.cols)
        .map(|(s, col)| {
            s.iter()
                .filter(|&&g| weights[g as usize] > 0)
                .map(|&g| Entry {
                    x: col[g as usize],
                    i: local[g as usize],
                })
                .collect()
        })
        .collect();
    let n_in_bag = w_of.len();
    let mut goes_left = vec![false; n_in_bag];
    let mut scratch = vec![Entry { x: 0.0, i: 0 }; n_in_bag];
    let n_features = cfg.max_features.resolve(d);

    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        samples: 0,
    }];
    let mut stack = vec![(0usize, 0usize, n_in_bag, 0usize)];
    while let Some((node, start, end, depth)) = stack.pop() {
        let seg = &order[0][start..end];
        let (mut w_sum, mut y_sum, mut y2_sum) = (0.0, 0.0, 0.0);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for e in seg {
            let i = e.i as usize;
            let yi = y_of[i];
            w_sum += w_of[i];
            y_sum += wy_of[i];
            y2_sum += wy_of[i] * yi;
            y_min = y_min.min(yi);
            y_max = y_max.max(yi);
        }
        let samples = w_sum as usize;
        let leaf = Node::Leaf {
            value: y_sum / w_sum,
            samples,
        };
        if y_min == y_max
            || samples < cfg.min_samples_split
            || cfg.max_depth.is_some_and(|m| depth >= m)
        {
            nodes[node] = leaf;
            continue;
        }
        let features: Vec<usize> = if n_features < d {
            let mut f = rand::seq::index::sample(rng, d, n_features).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };
        let node_sse = (y2_sum - y_sum * y_sum / w_sum).max(0.0);
        let parent_term = y_sum * y_sum / w_sum;
        let tie = TIE_TOLERANCE * node_sse;
        let min_leaf = cfg.min_samples_leaf as f64;
        let mut best: Option<Candidate> = None;
        let mut best_decrease = f64::NEG_INFINITY;
        for &f in &features {
            let seg = &order[f][start..end];
            if seg[0].x == seg[seg.len() - 1].x {
                continue;
            }
            let (mut wl, mut sl) = (0.0, 0.0);
            for p in 0..seg.len() - 1 {
                let i = seg[p].i as usize;
                wl += w_of[i];
                sl += wy_of[i];
                let (lo, hi) = (seg[p].x, seg[p + 1].x);
                let wr = w_sum - wl;
                if lo == hi || wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let sr = y_sum - sl;
                let decrease = sl * sl / wl + sr * sr / wr - parent_term;
                if best.is_none() || decrease > best_decrease + tie {
                    best_decrease = decrease;
                    best = Some(Candidate {
                        feature: f,
                        pos: p,
                        threshold: midpoint(lo, hi),
                        decrease,
                    });
                }
            }
        }
        let Some(best) = best else {
            nodes[node] = leaf;
            continue;
        };
        debug_assert_eq!(best.decrease, best_decrease);

        let split_seg = &order[best.feature][start..end];
        for (p, e) in split_seg.iter().enumerate() {
            goes_left[e.i as usize] = p <= best.pos;
        }
        let n_left = best.pos + 1;
        for list in order.iter_mut() {
            let seg = &mut list[start..end];
            let (mut nl, mut nr) = (0, 0);
            for k in 0..seg.len() {
                let e = seg[k];
                let l = goes_left[e.i as usize] as usize;
                seg[nl] = e;
                scratch[nr] = e;
                nl += l;
                nr += 1 - l;
            }
            debug_assert_eq!(nl, n_left);
            seg[nl..].copy_from_slice(&scratch[..nr]);
        }
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            value: 0.0,
            samples: 0,
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            samples: 0,
        });
        nodes[node] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        stack.push((right, start + n_left, end, depth + 1));
        stack.push((left, start, start + n_left, depth + 1));
    }
    RegressionTree { nodes }
}

/// Midpoint of two distinct values; falls back to `lo` when they are
/// adjacent floats and the midpoint rounds onto `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn constant_target_predicts_constant() {
        let x = Array2::from_shape_fn((20, 3), |(i, j)| (i * j) as f64 * 0.37);
        let y = vec![2.5; 20];
        let m = forest_fit(
            x.view(),
            &y,
            &ForestConfig {
                n_trees: 7,
                ..Default::default()
            },
        )
        .unwrap();
        let p = forest_predict(&m, x.view()).unwrap();
        assert!(p.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn step_function_is_exact() {
        let xs = [-3.0, -2.0, -0.5, -0.1, 0.2, 0.7, 1.5, 4.0];
        let x = Array2::from_shape_fn((8, 1), |(i, _)| xs[i]);
        let y: Vec<f64> = xs
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let m = forest_fit(x.view(), &y, &ForestConfig::single_tree()).unwrap();
        assert_eq!(forest_predict(&m, x.view()).unwrap(), y);
        let tree = &m.trees()[0];
        assert_eq!(tree.depth(), 1);
        match tree.nodes()[0] {
            Node::Split { threshold, .. } => assert!((threshold - 0.05).abs() < 1e-12),
            _ => panic!("root should split"),
        }
        // bootstrapped forest on the same data still gets the sign right
        let m = forest_fit(x.view(), &y, &ForestConfig::default()).unwrap();
        let p = forest_predict(&m, array![[-10.0], [10.0]].view()).unwrap();
        assert!(p[0] < 0.5 && p[1] > 0.5);
    }

    #[test]
    fn distinct_rows_fit_exactly() {
        let mut rng = RngSeed(4).rng();
        let x = Array2::from_shape_simple_fn((40, 3), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m = forest_fit(x.view(), &y, &ForestConfig::single_tree()).unwrap();
        let p = forest_predict(&m, x.view()).unwrap();
        let mse: f64 = p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 40.0;
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn leaves_are_means_and_thresholds_between_values() {
        let mut rng = RngSeed(5).rng();
        let x = Array2::from_shape_simple_fn((60, 2), || (rng.random_range(0..10) as f64) / 2.0);
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(0..4) as f64).collect();
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            min_samples_leaf: 3,
            ..Default::default()
        };
        let m = forest_fit(x.view(), &y, &cfg).unwrap();
        let tree = &m.trees()[0];
        // collect the training rows reaching each leaf
        let mut members: std::collections::HashMap<usize, Vec<f64>> = Default::default();
        for (i, r) in x.rows().into_iter().enumerate() {
            members
                .entry(tree.leaf_index(r.as_slice().unwrap()))
                .or_default()
                .push(y[i]);
        }
        for (leaf, ys) in members {
            let Node::Leaf { value, samples } = tree.nodes()[leaf] else {
                panic!()
            };
            assert_eq!(samples, ys.len());
            assert!(samples >= 3);
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            assert!((value - mean).abs() < 1e-12);
        }
        for n in tree.nodes() {
            if let Node::Split {
                feature, threshold, ..
            } = *n
            {
                let col = x.column(feature);
                assert!(col.iter().any(|&v| v < threshold));
                assert!(col.iter().any(|&v| v > threshold));
            }
        }
    }

    #[test]
    fn predictions_average_trees() {
        let leaf = |v| RegressionTree {
            nodes: vec![Node::Leaf {
                value: v,
                samples: 1,
            }],
        };
        let m = ForestModel::from_trees(vec![leaf(1.0), leaf(3.0)], 2).unwrap();
        assert_eq!(m.predict_row(&[0.0, 0.0]).unwrap(), 2.0);
        let m2 = ForestModel::from_trees(vec![leaf(3.0), leaf(1.0)], 2).unwrap();
        assert_eq!(m2.predict_row(&[9.0, 9.0]).unwrap(), 2.0);
        let c = ForestModel::from_trees(vec![leaf(0.75); 5], 1).unwrap();
        assert_eq!(c.predict_row(&[1.0]).unwrap(), 0.75);
        assert!(m.predict_row(&[0.0]).is_err());
    }

    #[test]
    fn small_inputs_give_single_leaves() {
        let x = array![[1.0], [2.0]];
        let cfg = ForestConfig {
            min_samples_split: 3,
            bootstrap: false,
            n_trees: 1,
            ..Default::default()
        };
        let m = forest_fit(x.view(), &[0.0, 1.0], &cfg).unwrap();
        assert_eq!(m.trees()[0].nodes().len(), 1);
        assert_eq!(m.predict_row(&[5.0]).unwrap(), 0.5);
    }

    #[test]
    fn max_depth_and_feature_subsampling() {
        let mut rng = RngSeed(6).rng();
        let x = Array2::from_shape_simple_fn((50, 6), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * 2.0 + r[3]).collect();
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: Some(3),
            max_features: MaxFeatures::Count(2),
            seed: RngSeed(1),
            ..Default::default()
        };
        let m = forest_fit(x.view(), &y, &cfg).unwrap();
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
        let again = forest_fit(x.view(), &y, &cfg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn rejects_bad_input() {
        let x = array![[1.0], [f64::NAN]];
        assert!(forest_fit(x.view(), &[0.0, 1.0], &ForestConfig::default()).is_err());
        let x = array![[1.0], [2.0]];
        assert!(forest_fit(x.view(), &[0.0], &ForestConfig::default()).is_err());
        let cfg = ForestConfig {
            n_trees: 0,
            ..Default::default()
        };
        assert!(forest_fit(x.view(), &[0.0, 1.0], &cfg).is_err());
        let m = forest_fit(x.view(), &[0.0, 1.0], &ForestConfig::default()).unwrap();
        assert!(forest_predict(&m, array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn bytes_round_trip() {
        let mut rng = RngSeed(7).rng();
        let x = Array2::from_shape_simple_fn((30, 2), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = forest_fit(
            x.view(),
            &y,
            &ForestConfig {
                n_trees: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let back = ForestModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(m, back);
        let mut bytes = m.to_bytes();
        bytes.pop();
        assert!(ForestModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn midpoint_stays_below_hi() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
    }
}
