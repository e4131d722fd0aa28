//! Axis-aligned CART regression trees (squared-error splits).

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; `None` tries all of them.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Grows a tree on `columns` (feature-major) and `target`, using the rows
    /// listed in `rows` (repeats allowed, as produced by bootstrapping).
    pub fn fit(
        columns: &[Vec<f64>],
        target: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut rng = rng;
        let mut stack = vec![(rows, 0usize, None::<(usize, bool)>)];
        while let Some((idx, depth, parent)) = stack.pop() {
            let sum: f64 = idx.iter().map(|&r| target[r]).sum();
            let value = sum / idx.len() as f64;
            let id = tree.nodes.len() as u32;
            tree.nodes.push(Node {
                feature: LEAF,
                threshold: 0.0,
                left: 0,
                right: 0,
                value,
            });
            if let Some((pid, is_left)) = parent {
                if is_left {
                    tree.nodes[pid].left = id;
                } else {
                    tree.nodes[pid].right = id;
                }
            }
            if depth >= params.max_depth || idx.len() < 2 * params.min_leaf.max(1) {
                continue;
            }
            let candidates = candidate_features(columns.len(), params.mtry, rng.as_deref_mut());
            let Some(split) = best_split(columns, target, &idx, &candidates, params.min_leaf.max(1))
            else {
                continue;
            };
            let col = &columns[split.feature];
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&r| col[r] <= split.threshold);
            let node = &mut tree.nodes[id as usize];
            node.feature = split.feature as u32;
            node.threshold = split.threshold;
            // right pushed first so the left subtree is numbered first
            stack.push((right, depth + 1, Some((id as usize, false))));
            stack.push((left, depth + 1, Some((id as usize, true))));
        }
        tree
    }

    /// Prediction for row `i` of `x`, where model feature `f` lives in column
    /// `map[f]` of `x`.
    #[inline]
    pub fn predict_row(&self, x: &DMatrix<f64>, i: usize, map: &[usize]) -> f64 {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            let v = x[(i, map[node.feature as usize])];
            node = if v <= node.threshold {
                &self.nodes[node.left as usize]
            } else {
                &self.nodes[node.right as usize]
            };
        }
        node.value
    }

    #[cfg(test)]
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    /// Features used by at least one split.
    #[cfg(test)]
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.feature != LEAF)
            .map(|n| n.feature as usize)
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

fn candidate_features(p: usize, mtry: Option<usize>, rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    match (mtry, rng) {
        (Some(m), Some(rng)) if m < p => {
            let mut f = sample(rng, p, m).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    }
}

/// Best squared-error split. Candidates are scanned in ascending feature
/// order and ascending threshold; only a strictly larger gain replaces the
/// incumbent, so ties go to the lowest feature, then the lowest threshold.
fn best_split(
    columns: &[Vec<f64>],
    target: &[f64],
    idx: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let m = idx.len();
    let total: f64 = idx.iter().map(|&r| target[r]).sum();
    let parent_score = total * total / m as f64;
    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
    for &f in candidates {
        let col = &columns[f];
        pairs.clear();
        pairs.extend(idx.iter().map(|&r| (col[r], target[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[m - 1].0 {
            continue;
        }
        let mut left_sum = 0.0;
        for k in 1..m {
            left_sum += pairs[k - 1].1;
            if k < min_leaf || m - k < min_leaf {
                continue;
            }
            let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
            if lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (m - k) as f64
                - parent_score;
            if gain > 1e-12 * (1.0 + parent_score.abs())
                && best.as_ref().is_none_or(|b| gain > b.gain)
            {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}
