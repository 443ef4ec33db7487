//! Weighted CART regression trees, one per explained component.

use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::problem::Problem;
use crate::sampling::ExplainDataset;
use crate::surrogate::{Explainer, Layout, LossContext};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_leaf: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Goes left when `θ[feature] ≤ threshold`.
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

struct Sample<'a> {
    x: &'a [f64],
    y: f64,
    w: f64,
}

#[derive(Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn weighted_sse(samples: &[Sample], idx: &[usize]) -> (f64, f64, f64) {
    let (mut sw, mut swy, mut swyy) = (0.0, 0.0, 0.0);
    for &i in idx {
        let s = &samples[i];
        sw += s.w;
        swy += s.w * s.y;
        swyy += s.w * s.y * s.y;
    }
    (sw, swy, swyy)
}

fn sse(sw: f64, swy: f64, swyy: f64) -> f64 {
    if sw > 0.0 {
        (swyy - swy * swy / sw).max(0.0)
    } else {
        0.0
    }
}

impl RegressionTree {
    fn fit(samples: &[Sample], cfg: &TreeConfig) -> Self {
        let mut tree = RegressionTree { nodes: Vec::new() };
        let idx: Vec<usize> = (0..samples.len()).collect();
        tree.grow(samples, idx, 0, cfg);
        tree
    }

    fn grow(&mut self, samples: &[Sample], idx: Vec<usize>, depth: usize, cfg: &TreeConfig) -> usize {
        let (sw, swy, swyy) = weighted_sse(samples, &idx);
        let mean = if sw > 0.0 {
            swy / sw
        } else {
            idx.iter().map(|&i| samples[i].y).sum::<f64>() / idx.len() as f64
        };
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            samples: idx.len(),
        });
        if depth >= cfg.max_depth || idx.len() < 2 * cfg.min_samples_leaf.max(1) {
            return me;
        }
        let parent = sse(sw, swy, swyy);
        if !(parent > 0.0) {
            return me;
        }
        let Some(best) = best_split(samples, &idx, cfg.min_samples_leaf.max(1), (sw, swy, swyy))
        else {
            return me;
        };
        if !(best.gain > 1e-12 * parent) {
            return me;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| samples[i].x[best.feature] <= best.threshold);
        let left = self.grow(samples, l, depth + 1, cfg);
        let right = self.grow(samples, r, depth + 1, cfg);
        self.nodes[me] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        me
    }

    pub fn predict(&self, theta: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if theta[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { value, samples } => Some((value, samples)),
            Node::Split { .. } => None,
        })
    }
}

fn best_split(
    samples: &[Sample],
    idx: &[usize],
    min_leaf: usize,
    (sw, swy, swyy): (f64, f64, f64),
) -> Option<BestSplit> {
    let parent = sse(sw, swy, swyy);
    let q = samples[idx[0]].x.len();
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for feature in 0..q {
        order.sort_by(|&a, &b| samples[a].x[feature].total_cmp(&samples[b].x[feature]));
        let (mut lw, mut lwy, mut lwyy) = (0.0, 0.0, 0.0);
        for pos in 0..order.len() - 1 {
            let s = &samples[order[pos]];
            lw += s.w;
            lwy += s.w * s.y;
            lwyy += s.w * s.y * s.y;
            let left_count = pos + 1;
            if left_count < min_leaf || order.len() - left_count < min_leaf {
                continue;
            }
            let a = s.x[feature];
            let b = samples[order[pos + 1]].x[feature];
            if a == b {
                continue;
            }
            let gain = parent - sse(lw, lwy, lwyy) - sse(sw - lw, swy - lwy, swyy - lwyy);
            if best.is_none_or(|bs| gain > bs.gain) {
                best = Some(BestSplit {
                    feature,
                    threshold: 0.5 * (a + b),
                    gain,
                });
            }
        }
    }
    best
}

/// One regression tree per component. Binary predictions are clamped to [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtrModel {
    pub layout: Layout,
    pub trees: Vec<RegressionTree>,
}

impl Explainer for DtrModel {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        self.trees
            .iter()
            .zip(&self.layout.binary_mask)
            .map(|(t, &b)| {
                let v = t.predict(theta);
                if b {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect()
    }
}

pub fn fit_benchmark_dtr(dataset: &ExplainDataset, problem: &dyn Problem) -> Result<DtrModel> {
    fit_benchmark_dtr_with(
        dataset,
        problem,
        &Layout::from_problem(problem),
        &TreeConfig::default(),
    )
}

pub fn fit_benchmark_dtr_with(
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    layout: &Layout,
    cfg: &TreeConfig,
) -> Result<DtrModel> {
    if dataset.len() < 2 * cfg.min_samples_leaf {
        return Err(ClemoError::Data(format!(
            "{} samples are too few for leaves of {}",
            dataset.len(),
            cfg.min_samples_leaf
        )));
    }
    let ctx = LossContext::new(problem, dataset, layout)?;
    let trees = (0..layout.num_components())
        .map(|c| {
            let samples: Vec<Sample> = (0..ctx.num_samples())
                .map(|i| Sample {
                    x: &ctx.feature_row(i)[1..],
                    y: ctx.target_row(i)[c],
                    w: ctx.weights()[i],
                })
                .collect();
            RegressionTree::fit(&samples, cfg)
        })
        .collect();
    Ok(DtrModel {
        layout: layout.clone(),
        trees,
    })
}
