use rayon::prelude::*;

use super::GbdtParams;
use crate::matrix::Matrix;

/// Splits whose gain is below this fraction of the node's weighted residual
/// sum of squares are rounding noise, not structure.
const GAIN_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `value < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        weight: f64,
    },
}

/// A regression tree stored in preorder (root at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, weight }],
        }
    }

    /// Builds a tree from preorder nodes, checking child links.
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *n {
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                    return None;
                }
            }
        }
        Some(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Split { feature, gain, .. } => Some((feature, gain)),
            Node::Leaf { .. } => None,
        })
    }

    /// Rewrites an arena (root at 0, arbitrary child order) into preorder.
    fn from_arena(arena: &[Node]) -> Self {
        fn visit(arena: &[Node], i: usize, out: &mut Vec<Node>) -> usize {
            let slot = out.len();
            out.push(arena[i]);
            if let Node::Split { left, right, .. } = arena[i] {
                let l = visit(arena, left, out);
                let r = visit(arena, right, out);
                if let Node::Split {
                    left: ref mut nl,
                    right: ref mut nr,
                    ..
                } = out[slot]
                {
                    *nl = l;
                    *nr = r;
                }
            }
            slot
        }
        let mut out = Vec::with_capacity(arena.len());
        visit(arena, 0, &mut out);
        Tree { nodes: out }
    }
}

/// Per-feature row orderings by ascending value, ties by row index.
/// Reused across boosting rounds since the features never change.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .into_par_iter()
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j)
                        .total_cmp(&x.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Debug, Clone, Copy)]
struct Open {
    arena: usize,
    depth: usize,
    sum: f64,
    weight: f64,
    sum_sq: f64,
}

fn score(sum: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        sum * sum / weight
    } else {
        0.0
    }
}

fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // Adjacent floats: the midpoint rounds onto `lo`.
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Exact greedy regression tree on `residuals` with squared-error loss.
pub fn fit_tree(x: &Matrix, residuals: &[f64], weights: &[f64], params: &GbdtParams) -> Tree {
    let sorted = SortedColumns::new(x);
    fit_tree_presorted(x, &sorted, residuals, weights, params)
}

pub(crate) fn fit_tree_presorted(
    x: &Matrix,
    sorted: &SortedColumns,
    residuals: &[f64],
    weights: &[f64],
    params: &GbdtParams,
) -> Tree {
    let n = x.rows();
    let mut arena: Vec<Node> = Vec::new();
    // Position of each row's node in `open`; usize::MAX once it reaches a leaf.
    let mut slot_of = vec![0usize; n];
    let (mut sum, mut weight, mut sum_sq) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sum += weights[i] * residuals[i];
        weight += weights[i];
        sum_sq += weights[i] * residuals[i] * residuals[i];
    }
    arena.push(Node::Leaf {
        value: 0.0,
        weight: 0.0,
    });
    let mut open = vec![Open {
        arena: 0,
        depth: 0,
        sum,
        weight,
        sum_sq,
    }];

    while !open.is_empty() {
        let splittable: Vec<bool> = open.iter().map(|o| o.depth < params.max_depth).collect();
        let best = if splittable.iter().any(|&s| s) {
            best_splits(x, sorted, residuals, weights, params, &open, &slot_of, &splittable)
        } else {
            vec![None; open.len()]
        };

        let mut next: Vec<Open> = Vec::new();
        // New slot per (open slot, side).
        let mut child_slot: Vec<Option<(usize, usize)>> = vec![None; open.len()];
        for (k, node) in open.iter().enumerate() {
            match best[k] {
                Some(c) if c.gain > GAIN_TOLERANCE * node.sum_sq && c.gain > 0.0 => {
                    let left = arena.len();
                    let right = left + 1;
                    arena.push(Node::Leaf {
                        value: 0.0,
                        weight: 0.0,
                    });
                    arena.push(Node::Leaf {
                        value: 0.0,
                        weight: 0.0,
                    });
                    arena[node.arena] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                        left,
                        right,
                    };
                    let base = next.len();
                    for arena_idx in [left, right] {
                        next.push(Open {
                            arena: arena_idx,
                            depth: node.depth + 1,
                            sum: 0.0,
                            weight: 0.0,
                            sum_sq: 0.0,
                        });
                    }
                    child_slot[k] = Some((base, base + 1));
                }
                _ => {
                    arena[node.arena] = Node::Leaf {
                        value: if node.weight > 0.0 {
                            node.sum / node.weight
                        } else {
                            0.0
                        },
                        weight: node.weight,
                    };
                }
            }
        }

        for i in 0..n {
            let k = slot_of[i];
            if k == usize::MAX {
                continue;
            }
            match (child_slot[k], arena[open[k].arena]) {
                (Some((l, r)), Node::Split {
                    feature, threshold, ..
                }) => {
                    let s = if x.get(i, feature) < threshold { l } else { r };
                    slot_of[i] = s;
                    let c = &mut next[s];
                    c.sum += weights[i] * residuals[i];
                    c.weight += weights[i];
                    c.sum_sq += weights[i] * residuals[i] * residuals[i];
                }
                _ => slot_of[i] = usize::MAX,
            }
        }
        open = next;
    }
    Tree::from_arena(&arena)
}

#[allow(clippy::too_many_arguments)]
fn best_splits(
    x: &Matrix,
    sorted: &SortedColumns,
    residuals: &[f64],
    weights: &[f64],
    params: &GbdtParams,
    open: &[Open],
    slot_of: &[usize],
    splittable: &[bool],
) -> Vec<Option<Candidate>> {
    let per_feature: Vec<Vec<Option<Candidate>>> = sorted
        .order
        .par_iter()
        .enumerate()
        .map(|(feature, order)| {
            let m = open.len();
            let mut left_sum = vec![0.0; m];
            let mut left_weight = vec![0.0; m];
            let mut last = vec![f64::NAN; m];
            let mut seen = vec![false; m];
            let mut best: Vec<Option<Candidate>> = vec![None; m];
            for &row in order {
                let row = row as usize;
                let k = slot_of[row];
                if k == usize::MAX || !splittable[k] {
                    continue;
                }
                let v = x.get(row, feature);
                if seen[k] && v > last[k] {
                    let node = &open[k];
                    let (wl, wr) = (left_weight[k], node.weight - left_weight[k]);
                    if wl >= params.min_child_weight && wr >= params.min_child_weight {
                        let sl = left_sum[k];
                        let gain = score(sl, wl) + score(node.sum - sl, wr) - score(node.sum, node.weight);
                        if best[k].is_none_or(|b| gain > b.gain) {
                            best[k] = Some(Candidate {
                                gain,
                                feature,
                                threshold: split_threshold(last[k], v),
                            });
                        }
                    }
                }
                seen[k] = true;
                last[k] = v;
                left_sum[k] += weights[row] * residuals[row];
                left_weight[k] += weights[row];
            }
            best
        })
        .collect();

    (0..open.len())
        .map(|k| {
            let mut best: Option<Candidate> = None;
            for candidates in &per_feature {
                if let Some(c) = candidates[k] {
                    if best.is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            best
        })
        .collect()
}
