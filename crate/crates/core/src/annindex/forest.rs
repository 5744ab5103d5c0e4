use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{squared_distance, AnnParams, Best, NearestNeighbor, Points, QueryResult};
use crate::error::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 192;

/// Points sampled per node when estimating split statistics.
const SAMPLE_SIZE: usize = 100;
/// The split dimension is drawn among this many highest-variance dims.
const TOP_DIMS: usize = 5;

#[derive(Debug, Clone)]
enum Node {
    Split {
        dim: usize,
        value: f32,
        left: u32,
        right: u32,
    },
    /// Range into the tree's `order`.
    Leaf { start: u32, end: u32 },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Forest of randomized k-d trees searched best-bin-first with one
/// priority queue shared across all trees.
///
/// Each tree splits at the node mean of a dimension drawn uniformly from
/// the node's highest-variance dimensions. Search stops after `budget`
/// leaves or when the queue runs dry; branches that provably cannot beat
/// the current best are dropped, so an unbounded budget is exact.
pub struct KdForest {
    points: Points,
    trees: Vec<Tree>,
    budget: usize,
}

impl KdForest {
    pub fn build(points: Points, params: &AnnParams) -> Result<Self> {
        if params.trees == 0 {
            return Err(Error::Invalid("forest needs at least one tree".into()));
        }
        if params.budget == 0 {
            return Err(Error::Invalid("search budget must be at least one leaf".into()));
        }
        let leaf_size = params.leaf_size.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let trees = (0..params.trees)
            .map(|_| build_tree(&points, leaf_size, &mut rng))
            .collect();
        Ok(Self {
            points,
            trees,
            budget: params.budget,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Copy of this index searching with a different leaf budget.
    pub fn with_budget(&self, budget: usize) -> Self {
        Self {
            points: self.points.clone(),
            trees: self.trees.clone(),
            budget: budget.max(1),
        }
    }

    fn visit_leaf(&self, tree: &Tree, start: u32, end: u32, query: &[f32], seen: &mut Seen, best: &mut Best) {
        for &id in &tree.order[start as usize..end as usize] {
            if seen.insert(id) {
                let id = id as usize;
                best.offer(squared_distance(query, self.points.row(id)), id);
            }
        }
    }
}

/// Per-thread set of points already checked by the current query; a
/// generation counter avoids clearing between queries.
struct Seen {
    stamps: Vec<u32>,
    generation: u32,
}

impl Seen {
    fn reset(&mut self, n: usize) {
        if self.stamps.len() != n || self.generation == u32::MAX {
            self.stamps.clear();
            self.stamps.resize(n, 0);
            self.generation = 0;
        }
        self.generation += 1;
    }

    #[inline]
    fn insert(&mut self, id: u32) -> bool {
        let slot = &mut self.stamps[id as usize];
        if *slot == self.generation {
            false
        } else {
            *slot = self.generation;
            true
        }
    }
}

thread_local! {
    static SEEN: RefCell<Seen> = const { RefCell::new(Seen { stamps: Vec::new(), generation: 0 }) };
}

fn build_tree(points: &Points, leaf_size: usize, rng: &mut ChaCha8Rng) -> Tree {
    let n = points.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut nodes = vec![Node::Leaf { start: 0, end: n as u32 }];
    // (node slot, start, end)
    let mut pending = vec![(0usize, 0usize, n)];
    while let Some((slot, start, end)) = pending.pop() {
        if end - start <= leaf_size {
            continue;
        }
        let Some((dim, value, mid)) = choose_split(points, &mut order[start..end], rng) else {
            continue; // all sampled points identical: keep as one leaf
        };
        let mid = start + mid;
        let left = nodes.len();
        nodes.push(Node::Leaf { start: start as u32, end: mid as u32 });
        nodes.push(Node::Leaf { start: mid as u32, end: end as u32 });
        nodes[slot] = Node::Split {
            dim,
            value,
            left: left as u32,
            right: left as u32 + 1,
        };
        pending.push((left + 1, mid, end));
        pending.push((left, start, mid));
    }
    Tree { nodes, order }
}

/// Pick a split and partition `ids` in place: entries before the
/// returned offset have `x[dim] <= value`, entries after have
/// `x[dim] >= value`, and both sides are non-empty.
fn choose_split(points: &Points, ids: &mut [u32], rng: &mut ChaCha8Rng) -> Option<(usize, f32, usize)> {
    let dim = points.dim();
    let sample = &ids[..ids.len().min(SAMPLE_SIZE)];
    let mut mean = vec![0f64; dim];
    for &id in sample {
        for (m, &v) in mean.iter_mut().zip(points.row(id as usize)) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= sample.len() as f64);
    let mut var = vec![0f64; dim];
    for &id in sample {
        for ((s, &m), &v) in var.iter_mut().zip(&mean).zip(points.row(id as usize)) {
            *s += (f64::from(v) - m).powi(2);
        }
    }
    let mut dims: Vec<usize> = (0..dim).collect();
    dims.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let candidates: Vec<usize> = dims
        .into_iter()
        .take(TOP_DIMS)
        .filter(|&d| var[d] > 0.0)
        .collect();
    let split_dim = if candidates.is_empty() {
        // sample is constant; look for any spread across the full node
        (0..dim).find(|&d| {
            let first = points.row(ids[0] as usize)[d];
            ids.iter().any(|&id| points.row(id as usize)[d] != first)
        })?
    } else {
        candidates[rng.random_range(0..candidates.len())]
    };
    let value = mean[split_dim] as f32;
    let key = |id: u32| points.row(id as usize)[split_dim];

    // Hoare-style partition around the mean
    let mut lo = 0;
    let mut hi = ids.len();
    while lo < hi {
        if key(ids[lo]) < value {
            lo += 1;
        } else {
            hi -= 1;
            ids.swap(lo, hi);
        }
    }
    if lo > 0 && lo < ids.len() {
        return Some((split_dim, value, lo));
    }
    // mean did not separate the points: split at the median instead
    ids.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let mid = ids.len() / 2;
    Some((split_dim, key(ids[mid]), mid))
}

#[derive(Debug)]
struct Branch {
    /// Sum of squared split offsets along the path; orders the queue.
    bound: f64,
    /// Largest single squared split offset; a true lower bound on the
    /// distance to anything below this node, used for pruning.
    floor: f64,
    seq: u64,
    tree: u32,
    node: u32,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Branch {
    // reversed: BinaryHeap pops the smallest bound, then the oldest entry
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

impl NearestNeighbor for KdForest {
    fn name(&self) -> &'static str {
        "approx"
    }

    fn points(&self) -> &Points {
        &self.points
    }

    fn search(&self, query: &[f32]) -> QueryResult {
        SEEN.with(|seen| {
            let mut seen = seen.borrow_mut();
            seen.reset(self.points.len());
            self.search_with(query, &mut seen)
        })
    }
}

impl KdForest {
    fn search_with(&self, query: &[f32], seen: &mut Seen) -> QueryResult {
        let mut best = Best::new();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        for t in 0..self.trees.len() {
            heap.push(Branch { bound: 0.0, floor: 0.0, seq, tree: t as u32, node: 0 });
            seq += 1;
        }
        let mut leaves = 0;
        while leaves < self.budget {
            let Some(branch) = heap.pop() else { break };
            if branch.floor > best.sq {
                continue;
            }
            let tree = &self.trees[branch.tree as usize];
            let mut node = branch.node as usize;
            let (bound, floor) = (branch.bound, branch.floor);
            loop {
                match tree.nodes[node] {
                    Node::Leaf { start, end } => {
                        self.visit_leaf(tree, start, end, query, seen, &mut best);
                        leaves += 1;
                        break;
                    }
                    Node::Split { dim, value, left, right } => {
                        let diff = f64::from(query[dim]) - f64::from(value);
                        let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                        let far_floor = floor.max(diff * diff);
                        if far_floor <= best.sq {
                            heap.push(Branch {
                                bound: bound + diff * diff,
                                floor: far_floor,
                                seq,
                                tree: branch.tree,
                                node: far,
                            });
                            seq += 1;
                        }
                        node = near as usize;
                    }
                }
            }
        }
        best.result()
    }
}
