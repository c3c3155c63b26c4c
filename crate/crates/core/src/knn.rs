//! Exact k-nearest-neighbor queries over 3-D points.
//!
//! A median-split kd-tree. Neighbors are ordered by `(squared distance,
//! index)`, which makes results identical to a brute-force scan even when
//! distances tie.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    axis: u8,
    split: f64,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

impl NeighborIndex {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        assert!(points.len() < u32::MAX as usize, "too many points for the index");
        let mut index = Self {
            order: (0..points.len() as u32).collect(),
            points,
            nodes: Vec::new(),
        };
        if !index.points.is_empty() {
            index.build(0, index.points.len());
        }
        index
    }

    pub fn from_f32(points: &[[f32; 3]]) -> Self {
        Self::new(points.iter().map(|p| p.map(|c| c as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            axis: 0,
            split: 0.0,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }

        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            // all points coincide
            return id;
        }

        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let split = self.points[self.order[start + mid] as usize][axis];

        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        let node = &mut self.nodes[id as usize];
        node.axis = axis as u8;
        node.split = split;
        node.left = left;
        node.right = right;
        id
    }

    /// The `k` nearest points to `query`, skipping the point with index
    /// `exclude`, sorted by `(distance, index)`.
    pub fn query_point(&self, query: [f64; 3], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let exclude = exclude.map(|e| e as u32).unwrap_or(NO_CHILD);
        self.search(0, &query, k, exclude, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|c| Neighbor {
                index: c.index as usize,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }

    /// The `k` nearest neighbors of indexed point `i`, excluding itself.
    pub fn query(&self, i: usize, k: usize) -> Vec<Neighbor> {
        self.query_point(self.points[i], k, Some(i))
    }

    fn search(&self, node: u32, q: &[f64; 3], k: usize, exclude: u32, heap: &mut BinaryHeap<Candidate>) {
        let n = &self.nodes[node as usize];
        if n.left == NO_CHILD {
            for &i in &self.order[n.start as usize..n.end as usize] {
                if i == exclude {
                    continue;
                }
                let c = Candidate {
                    dist2: dist2(q, &self.points[i as usize]),
                    index: i,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let diff = q[n.axis as usize] - n.split;
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, q, k, exclude, heap);
        // `<=` keeps equal-distance candidates with lower indices reachable.
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            self.search(far, q, k, exclude, heap);
        }
    }
}
