//! Exact K-nearest-neighbor search under the Euclidean norm.
//!
//! For a query `z`, the returned index set is the `J` with `z` in the K-th
//! order Voronoi cell `C(J)`. Ties in distance go to the smaller sample
//! index, which makes the cell assignment total and deterministic.

use crate::data::PointSet;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable kd-tree over a point set.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    /// Coordinates in tree order (leaf-contiguous).
    coords: Vec<f64>,
    /// Original sample index of each tree-order row.
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

/// The K nearest sample points of a query, closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub query: Vec<f64>,
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// `(squared distance, sample index)`; ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dist2: f64,
    pub index: usize,
}

impl Candidate {
    #[inline]
    fn before(&self, other: &Candidate) -> bool {
        self.dist2 < other.dist2 || (self.dist2 == other.dist2 && self.index < other.index)
    }
}

impl NeighborIndex {
    pub fn new(points: &PointSet) -> Self {
        let n = points.len();
        let dim = points.dim();
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build(points, &mut ids, 0, n, &mut nodes);
        let mut coords = Vec::with_capacity(n * dim);
        for &i in &ids {
            coords.extend_from_slice(points.point(i));
        }
        Self {
            dim,
            coords,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, z: &[f64], k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if k > self.len() {
            return Err(Error::InvalidParameter(format!(
                "K = {k} exceeds the sample size {}",
                self.len()
            )));
        }
        if z.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "query has dimension {}, index has dimension {}",
                z.len(),
                self.dim
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite query coordinate".into()));
        }
        Ok(())
    }

    /// The `k` nearest neighbors of `z`.
    pub fn k_nearest(&self, z: &[f64], k: usize) -> Result<Neighborhood> {
        let mut found = Vec::with_capacity(k);
        self.k_nearest_into(z, k, &mut found)?;
        Ok(Neighborhood {
            query: z.to_vec(),
            indices: found.iter().map(|c| c.index).collect(),
            distances: found.iter().map(|c| c.dist2.sqrt()).collect(),
        })
    }

    /// Like [`k_nearest`](Self::k_nearest) but fills a caller-owned buffer
    /// with squared distances.
    pub fn k_nearest_into(&self, z: &[f64], k: usize, out: &mut Vec<Candidate>) -> Result<()> {
        self.check(z, k)?;
        out.clear();
        let mut offsets = vec![0.0; self.dim];
        self.search(0, z, k, 0.0, &mut offsets, out);
        Ok(())
    }

    fn search(
        &self,
        node: usize,
        z: &[f64],
        k: usize,
        rd: f64,
        offsets: &mut [f64],
        out: &mut Vec<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for row in start..end {
                    let p = &self.coords[row * self.dim..(row + 1) * self.dim];
                    let dist2 = p
                        .iter()
                        .zip(z)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    insert(
                        out,
                        k,
                        Candidate {
                            dist2,
                            index: self.ids[row],
                        },
                    );
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = z[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, z, k, rd, offsets, out);
                let old = offsets[axis];
                let far_rd = rd - old * old + diff * diff;
                // `<=` keeps equal-distance points with smaller indices reachable.
                if out.len() < k || far_rd <= out[out.len() - 1].dist2 {
                    offsets[axis] = diff;
                    self.search(far, z, k, far_rd, offsets, out);
                    offsets[axis] = old;
                }
            }
        }
    }
}

#[inline]
fn insert(out: &mut Vec<Candidate>, k: usize, c: Candidate) {
    if out.len() == k {
        if !c.before(&out[k - 1]) {
            return;
        }
        out.pop();
    }
    let mut pos = out.len();
    while pos > 0 && c.before(&out[pos - 1]) {
        pos -= 1;
    }
    out.insert(pos, c);
}

fn build(points: &PointSet, ids: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return me;
    }
    let dim = points.dim();
    let slice = &mut ids[start..end];
    let mut axis = 0;
    let mut best_spread = f64::NEG_INFINITY;
    for a in 0..dim {
        let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = points.point(i)[a];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > best_spread {
            best_spread = hi - lo;
            axis = a;
        }
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points.point(a)[axis].total_cmp(&points.point(b)[axis])
    });
    let value = points.point(slice[mid])[axis];
    nodes.push(Node::Leaf { start, end });
    let left = build(points, ids, start, start + mid, nodes);
    let right = build(points, ids, start + mid, end, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(xs.to_vec(), 1).unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        let idx = NeighborIndex::new(&line(&[0.0, 1.0, 2.0]));
        assert_eq!(idx.len(), 3);
        let nb = idx.k_nearest(&[0.6], 1).unwrap();
        assert_eq!(nb.indices, vec![1]);
        assert!((nb.distances[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_the_smaller_index() {
        // points 2 and 5 are both at distance 1 from z = 3
        let idx = NeighborIndex::new(&line(&[10.0, 11.0, 2.0, 12.0, 13.0, 4.0]));
        assert_eq!(idx.k_nearest(&[3.0], 1).unwrap().indices, vec![2]);
        let nb = idx.k_nearest(&[3.0], 2).unwrap();
        assert_eq!(nb.indices, vec![2, 5]);
    }

    #[test]
    fn many_duplicates_resolve_by_index() {
        let pts: Vec<f64> = vec![0.5; 40];
        let idx = NeighborIndex::new(&PointSet::new(pts, 2).unwrap());
        let nb = idx.k_nearest(&[0.0, 0.0], 5).unwrap();
        assert_eq!(nb.indices, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn k_is_validated() {
        let idx = NeighborIndex::new(&line(&[0.0, 1.0]));
        assert!(matches!(idx.k_nearest(&[0.0], 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(idx.k_nearest(&[0.0], 3), Err(Error::InvalidParameter(_))));
        assert!(idx.k_nearest(&[0.0, 1.0], 1).is_err());
        assert_eq!(idx.k_nearest(&[0.0], 2).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn three_points_in_the_plane() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let idx = NeighborIndex::new(&pts);
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 2);
        let nb = idx.k_nearest(&[0.9, 0.1], 3).unwrap();
        assert_eq!(nb.indices, vec![1, 0, 2]);
        assert!(nb.distances.windows(2).all(|w| w[0] <= w[1]));
    }
}
