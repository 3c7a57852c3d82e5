//! Regression trees grown depth-wise with exact greedy splits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        leaf: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { leaf } => return *leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub(crate) fn scale(&mut self, c: f64) {
        match self {
            Node::Leaf { leaf } => *leaf *= c,
            Node::Split { left, right, .. } => {
                left.scale(c);
                right.scale(c);
            }
        }
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

/// Column-major feature matrix with per-feature ascending row order.
pub(crate) struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
}

impl Columns {
    pub fn new(cols: Vec<Vec<f64>>) -> Self {
        let sorted = cols
            .par_iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Columns { cols, sorted }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.cols.iter().map(|c| c[i]));
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_reg: f64,
    pub learning_rate: f64,
}

const NONE: u32 = u32::MAX;

struct BuildNode {
    g: f64,
    h: f64,
    split: Option<(usize, f64, usize, usize)>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Grow one tree on weighted gradients `g` and hessians `h`. Rows with
/// `in_sample[i] == false` do not contribute.
///
/// Also returns each row's leaf value, `None` for rows outside the sample.
pub(crate) fn grow(
    data: &Columns,
    g: &[f64],
    h: &[f64],
    in_sample: Option<&[bool]>,
    p: &TreeParams,
) -> (Node, Vec<Option<f64>>) {
    let n = data.n_rows();
    let mut node_of = vec![0u32; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for i in 0..n {
        if in_sample.is_none_or(|s| s[i]) {
            g0 += g[i];
            h0 += h[i];
        } else {
            node_of[i] = NONE;
        }
    }
    let mut arena = vec![BuildNode {
        g: g0,
        h: h0,
        split: None,
    }];
    let mut active: Vec<usize> = vec![0];

    for _ in 0..p.max_depth {
        if active.is_empty() {
            break;
        }
        let mut slot_of = vec![NONE; arena.len()];
        for (s, &id) in active.iter().enumerate() {
            slot_of[id] = s as u32;
        }
        let totals: Vec<(f64, f64)> = active.iter().map(|&id| (arena[id].g, arena[id].h)).collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = (0..data.cols.len())
            .into_par_iter()
            .map(|f| scan_feature(data, f, g, h, &node_of, &slot_of, &totals, p))
            .collect();

        // fixed feature order: a later feature must be strictly better
        let mut best: Vec<Option<(usize, Candidate)>> = vec![None; active.len()];
        for (f, cands) in per_feature.iter().enumerate() {
            for (s, c) in cands.iter().enumerate() {
                if let Some(c) = c {
                    if best[s].is_none_or(|(_, b)| c.gain > b.gain) {
                        best[s] = Some((f, *c));
                    }
                }
            }
        }

        let mut next = Vec::new();
        for (s, b) in best.iter().enumerate() {
            if let Some((f, c)) = b {
                if c.gain > 0.0 {
                    let l = arena.len();
                    arena.push(BuildNode {
                        g: 0.0,
                        h: 0.0,
                        split: None,
                    });
                    arena.push(BuildNode {
                        g: 0.0,
                        h: 0.0,
                        split: None,
                    });
                    arena[active[s]].split = Some((*f, c.threshold, l, l + 1));
                    next.push(l);
                    next.push(l + 1);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for i in 0..n {
            let id = node_of[i];
            if id == NONE {
                continue;
            }
            if let Some((f, thr, l, r)) = arena[id as usize].split {
                let child = if data.cols[f][i] < thr { l } else { r };
                node_of[i] = child as u32;
                arena[child].g += g[i];
                arena[child].h += h[i];
            }
        }
        active = next;
    }
    let values: Vec<Option<f64>> = node_of
        .iter()
        .map(|&id| (id != NONE).then(|| leaf_value(&arena[id as usize], p)))
        .collect();
    (to_node(&arena, 0, p), values)
}

fn leaf_value(b: &BuildNode, p: &TreeParams) -> f64 {
    -p.learning_rate * b.g / (b.h + p.l2_reg)
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    data: &Columns,
    f: usize,
    g: &[f64],
    h: &[f64],
    node_of: &[u32],
    slot_of: &[u32],
    totals: &[(f64, f64)],
    p: &TreeParams,
) -> Vec<Option<Candidate>> {
    let col = &data.cols[f];
    let k = totals.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last = vec![f64::NAN; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    let parent: Vec<f64> = totals.iter().map(|&(gt, ht)| score(gt, ht, p.l2_reg)).collect();

    for &i in &data.sorted[f] {
        let i = i as usize;
        let id = node_of[i];
        if id == NONE {
            continue;
        }
        let s = slot_of[id as usize];
        if s == NONE {
            continue;
        }
        let s = s as usize;
        let x = col[i];
        if x > last[s] {
            let (gt, ht) = totals[s];
            let (gr, hr) = (gt - gl[s], ht - hl[s]);
            if hl[s] >= p.min_child_weight && hr >= p.min_child_weight {
                let gain = score(gl[s], hl[s], p.l2_reg) + score(gr, hr, p.l2_reg) - parent[s];
                if best[s].is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (last[s] + x);
                    if threshold <= last[s] {
                        threshold = x;
                    }
                    best[s] = Some(Candidate { gain, threshold });
                }
            }
        }
        gl[s] += g[i];
        hl[s] += h[i];
        last[s] = x;
    }
    best
}

fn to_node(arena: &[BuildNode], id: usize, p: &TreeParams) -> Node {
    let b = &arena[id];
    match b.split {
        Some((feature, threshold, l, r)) => Node::Split {
            feature,
            threshold,
            left: Box::new(to_node(arena, l, p)),
            right: Box::new(to_node(arena, r, p)),
        },
        None => Node::Leaf { leaf: leaf_value(b, p) },
    }
}
