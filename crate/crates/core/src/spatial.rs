//! Static 3-d tree over ego-pose positions.
//!
//! The index only accelerates queries: results are identical to a linear scan,
//! including the smallest-id rule for equidistant nearest neighbours.

use alloc::vec::Vec;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

pub fn squared_distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
struct Node {
    /// Index into `PoseIndex::entries`.
    entry: usize,
    axis: u8,
    left: Option<usize>,
    right: Option<usize>,
}

/// Positions keyed by scan id, supporting nearest and radius queries.
#[derive(Debug, Clone)]
pub struct PoseIndex {
    entries: Vec<(usize, Position)>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl PoseIndex {
    pub fn new(entries: Vec<(usize, Position)>) -> Self {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut index = PoseIndex { entries, nodes: Vec::new(), root: None };
        index.nodes.reserve(order.len());
        index.root = index.build(&mut order, 0);
        index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Position)] {
        &self.entries
    }

    fn build(&mut self, order: &mut [usize], depth: usize) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        let axis = (depth % 3) as u8;
        let mid = order.len() / 2;
        let entries = &self.entries;
        order.select_nth_unstable_by(mid, |&a, &b| {
            entries[a].1[axis as usize].total_cmp(&entries[b].1[axis as usize])
        });
        let entry = order[mid];
        let (lo, rest) = order.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build(lo, depth + 1);
        let right = self.build(hi, depth + 1);
        self.nodes.push(Node { entry, axis, left, right });
        Some(self.nodes.len() - 1)
    }

    /// Closest entry to `query` as `(scan id, distance)`; equidistant entries
    /// resolve to the smallest scan id.
    pub fn nearest(&self, query: &Position) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.nearest_in(self.root, query, &mut best);
        best.map(|(id, d2)| (id, libm::sqrt(d2)))
    }

    fn nearest_in(&self, node: Option<usize>, query: &Position, best: &mut Option<(usize, f64)>) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        let (id, pos) = self.entries[node.entry];
        let d2 = squared_distance(query, &pos);
        let better = match *best {
            None => true,
            Some((bid, bd2)) => d2 < bd2 || (d2 == bd2 && id < bid),
        };
        if better {
            *best = Some((id, d2));
        }
        let axis = node.axis as usize;
        let delta = query[axis] - pos[axis];
        let (near, far) = if delta < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.nearest_in(near, query, best);
        // `<=` keeps equidistant candidates reachable for the id tie rule
        if best.map_or(true, |(_, bd2)| delta * delta <= bd2) {
            self.nearest_in(far, query, best);
        }
    }

    /// Scan ids within `radius` (inclusive) of `query`, ascending.
    pub fn within_radius(&self, query: &Position, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_in(self.root, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_in(&self, node: Option<usize>, query: &Position, r2: f64, out: &mut Vec<usize>) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        let (id, pos) = self.entries[node.entry];
        if squared_distance(query, &pos) <= r2 {
            out.push(id);
        }
        let axis = node.axis as usize;
        let delta = query[axis] - pos[axis];
        let (near, far) = if delta < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.radius_in(near, query, r2, out);
        if delta * delta <= r2 {
            self.radius_in(far, query, r2, out);
        }
    }
}
