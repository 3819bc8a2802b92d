use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::features::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree over standardised inputs; `x[feature] <= threshold`
/// goes left. The root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => dim,
            MaxFeatures::Count(k) => k.clamp(1, dim.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
            max_depth: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub dim: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestParams {
    /// Prediction of every tree, in tree order.
    pub fn votes(&self, z: &[f64]) -> Vec<u8> {
        self.trees.iter().map(|t| t.predict(z)).collect()
    }

    /// Majority vote (ties go to stable) and the slip vote fraction.
    pub fn vote(&self, z: &[f64]) -> (Label, f64) {
        let slip: usize = self.trees.iter().map(|t| t.predict(z) as usize).sum();
        let total = self.trees.len();
        (Label::from(slip * 2 > total), slip as f64 / total as f64)
    }
}

/// Scores closer than this count as tied and the earlier candidate wins.
const SCORE_EPS: f64 = 1e-10;

struct Builder<'a> {
    data: &'a [f64],
    dim: usize,
    labels: &'a [u8],
    cfg: TreeConfig,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `sample` (repeats allowed).
    pub fn fit(
        data: &[f64],
        dim: usize,
        labels: &[u8],
        sample: Vec<usize>,
        cfg: TreeConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let mut b = Builder {
            data,
            dim,
            labels,
            cfg,
            nodes: Vec::new(),
            scratch: Vec::with_capacity(sample.len()),
        };
        b.grow(sample, 0, rng);
        DecisionTree { nodes: b.nodes }
    }

    pub fn predict(&self, z: &[f64]) -> u8 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if z[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], k: usize) -> usize {
            match &nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

impl Builder<'_> {
    fn grow(&mut self, sample: Vec<usize>, depth: usize, rng: &mut impl Rng) -> usize {
        let id = self.nodes.len();
        let n1 = sample.iter().filter(|&&i| self.labels[i] == 1).count();
        let n0 = sample.len() - n1;
        let leaf = Node::Leaf {
            label: (n1 > n0) as u8,
        };
        self.nodes.push(leaf.clone());
        let depth_capped = self.cfg.max_depth.is_some_and(|m| depth >= m);
        if n0 == 0 || n1 == 0 || sample.len() < self.cfg.min_samples_split || depth_capped {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&sample, n0, n1, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = sample
            .into_iter()
            .partition(|&i| self.data[i * self.dim + feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Draws a feature permutation, scores the first `max_features` in index
    /// order and, if none of them can split, moves on through the rest one
    /// at a time.
    fn best_split(
        &mut self,
        sample: &[usize],
        n0: usize,
        n1: usize,
        rng: &mut impl Rng,
    ) -> Option<(usize, f64)> {
        let mut perm: Vec<usize> = (0..self.dim).collect();
        perm.shuffle(rng);
        let k = self.cfg.max_features.clamp(1, self.dim);
        let mut first: Vec<usize> = perm[..k].to_vec();
        first.sort_unstable();
        let mut best = self.scan(sample, &first, n0, n1);
        for &f in &perm[k..] {
            if best.is_some() {
                break;
            }
            best = self.scan(sample, &[f], n0, n1);
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn scan(&mut self, sample: &[usize], features: &[usize], n0: usize, n1: usize) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let n = sample.len();
        for &f in features {
            self.scratch.clear();
            self.scratch
                .extend(sample.iter().map(|&i| (self.data[i * self.dim + f], self.labels[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0usize, 0usize);
            for k in 0..n - 1 {
                if self.scratch[k].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                let (a, b) = (self.scratch[k].0, self.scratch[k + 1].0);
                if a >= b {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let (r0, r1) = ((n0 - l0) as f64, (n1 - l1) as f64);
                let (l0f, l1f) = (l0 as f64, l1 as f64);
                let score = nl - (l0f * l0f + l1f * l1f) / nl + nr - (r0 * r0 + r1 * r1) / nr;
                if best.is_none_or(|(_, _, s)| score < s - SCORE_EPS) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((f, t, score));
                }
            }
        }
        best
    }
}

/// Grows `cfg.trees` trees in parallel. Tree `t` draws from a generator on
/// stream `t` of the configured seed, so results do not depend on thread
/// scheduling.
pub fn fit_random_forest(data: &LabeledDataset, cfg: &ForestConfig) -> Result<(Standardizer, ForestParams)> {
    if cfg.trees == 0 {
        return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
    }
    if data.is_empty() {
        return Err(Error::Dataset("cannot grow trees on an empty dataset".into()));
    }
    let s = Standardizer::fit(data)?;
    let z = s.transform_all(data);
    let labels: Vec<u8> = data.labels().iter().map(|l| l.as_u8()).collect();
    let dim = data.dim();
    let n = data.len();
    let tree_cfg = TreeConfig {
        max_features: cfg.max_features.resolve(dim),
        min_samples_split: cfg.min_samples_split.max(2),
        max_depth: cfg.max_depth,
    };
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let sample = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(&z, dim, &labels, sample, tree_cfg, &mut rng)
        })
        .collect();
    Ok((s, ForestParams { dim, trees }))
}
