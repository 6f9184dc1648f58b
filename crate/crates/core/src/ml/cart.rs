//! Binary classification tree grown with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Smallest impurity decrease that counts as a split.
const MIN_GAIN: f64 = 1e-12;

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Impurity decrease of splitting `parent` into `left` and the remainder.
pub fn gini_gain(parent: [usize; 2], left: [usize; 2]) -> f64 {
    let right = [parent[0] - left[0], parent[1] - left[1]];
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = n - nl;
    gini(parent) - (nl / n) * gini(left) - (nr / n) * gini(right)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Training rows per class that reached this node.
    pub counts: [usize; 2],
    pub split: Option<SplitRule>,
}

impl TreeNode {
    /// Majority class, ties to insecure.
    pub fn label(&self) -> u8 {
        u8::from(self.counts[1] > self.counts[0])
    }

    pub fn secure_fraction(&self) -> f64 {
        let n = self.counts[0] + self.counts[1];
        if n == 0 {
            0.0
        } else {
            self.counts[1] as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 5,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exhaustive search over `features` (in the given order) and all midpoints
/// between distinct consecutive values. The first strictly best pair wins.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = idx.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mut parent = [0usize; 2];
    for &i in idx {
        parent[y[i] as usize] += 1;
    }
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = [0usize; 2];
        for k in 0..n - 1 {
            left[y[order[k]] as usize] += 1;
            let nl = k + 1;
            if nl < min_leaf {
                continue;
            }
            if n - nl < min_leaf {
                break;
            }
            let (a, b) = (x[order[k]][f], x[order[k + 1]][f]);
            if a >= b {
                continue;
            }
            let gain = gini_gain(parent, left);
            if gain > MIN_GAIN && best.is_none_or(|bs| gain > bs.gain) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on the rows `idx` of `(x, y)`. Repeated indices act as
    /// row weights. `rng` drives per-split feature sampling when
    /// `max_features < d`.
    pub fn grow<R: Rng>(x: &[Vec<f64>], y: &[u8], idx: &[usize], params: &TreeParams, rng: &mut R) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let mut tree = DecisionTree {
            n_features: d,
            nodes: Vec::new(),
        };
        tree.build(x, y, idx.to_vec(), 0, params, rng);
        tree
    }

    pub fn fit(x: &[Vec<f64>], y: &[u8], params: &TreeParams) -> Self {
        let idx: Vec<usize> = (0..y.len()).collect();
        let mut rng = crate::seed::rng(0);
        Self::grow(x, y, &idx, params, &mut rng)
    }

    fn build<R: Rng>(
        &mut self,
        x: &[Vec<f64>],
        y: &[u8],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> usize {
        let mut counts = [0usize; 2];
        for &i in &idx {
            counts[y[i] as usize] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode { counts, split: None });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let features = self.sample_features(params, rng);
        let Some(bs) = best_split(x, y, &idx, &features, params.min_leaf) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][bs.feature] <= bs.threshold);
        drop(idx);
        let left = self.build(x, y, l, depth + 1, params, rng);
        let right = self.build(x, y, r, depth + 1, params, rng);
        self.nodes[id].split = Some(SplitRule {
            feature: bs.feature,
            threshold: bs.threshold,
            left,
            right,
        });
        id
    }

    fn sample_features<R: Rng>(&self, params: &TreeParams, rng: &mut R) -> Vec<usize> {
        let d = self.n_features;
        match params.max_features {
            Some(m) if m < d => {
                let mut f = rand::seq::index::sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    pub fn leaf(&self, row: &[f64]) -> &TreeNode {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = if row[s.feature] <= s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        self.leaf(row).label()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i].split {
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
                None => 0,
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    /// The tree cut back to `max_depth`. Growth is greedy and top-down, so
    /// this equals growing with that depth limit directly.
    pub fn truncated(&self, max_depth: usize) -> DecisionTree {
        let mut out = DecisionTree {
            n_features: self.n_features,
            nodes: Vec::new(),
        };
        fn copy(src: &DecisionTree, dst: &mut DecisionTree, i: usize, depth: usize, max: usize) -> usize {
            let id = dst.nodes.len();
            dst.nodes.push(TreeNode {
                counts: src.nodes[i].counts,
                split: None,
            });
            if let Some(s) = src.nodes[i].split.filter(|_| depth < max) {
                let left = copy(src, dst, s.left, depth + 1, max);
                let right = copy(src, dst, s.right, depth + 1, max);
                dst.nodes[id].split = Some(SplitRule { left, right, ..s });
            }
            id
        }
        copy(self, &mut out, 0, 0, max_depth);
        out
    }
}
