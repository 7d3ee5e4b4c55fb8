//! Static 2D k-d tree with deterministic tie ordering.

use std::cmp::Ordering;

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    points: Vec<[f64; 2]>,
    /// Tie-break rank per point: lower wins at equal distance.
    rank: Vec<usize>,
    /// Point indices in tree order; node of `lo..hi` sits at `(lo + hi) / 2`.
    order: Vec<usize>,
}

/// `(squared distance, rank, index)`.
pub(crate) type Neighbor = (f64, usize, usize);

fn cmp(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KdTree {
    /// Ranks order ties by the first coordinate, then the second.
    pub(crate) fn new(points: Vec<[f64; 2]>) -> Self {
        let mut by_coord: Vec<usize> = (0..points.len()).collect();
        by_coord.sort_by(|&a, &b| {
            let (p, q) = (points[a], points[b]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(a.cmp(&b))
        });
        let mut rank = vec![0; points.len()];
        for (r, &i) in by_coord.iter().enumerate() {
            rank[i] = r;
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(&points, &mut order, 0);
        Self { points, rank, order }
    }

    pub(crate) fn len(&self) -> usize {
        self.points.len()
    }

    /// The `k` nearest points to `q`, nearest first.
    pub(crate) fn nearest(&self, q: [f64; 2], k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(q, k, 0, self.order.len(), 0, &mut best);
        }
        best
    }

    fn search(&self, q: [f64; 2], k: usize, lo: usize, hi: usize, depth: usize, best: &mut Vec<Neighbor>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let p = self.points[i];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let cand = (d2, self.rank[i], i);
        if best.len() < k || cmp(&cand, best.last().expect("non-empty")) == Ordering::Less {
            let pos = best.partition_point(|b| cmp(b, &cand) == Ordering::Less);
            best.insert(pos, cand);
            best.truncate(k);
        }
        let axis = depth % 2;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, k, near.0, near.1, depth + 1, best);
        if best.len() < k || diff * diff <= best.last().expect("non-empty").0 {
            self.search(q, k, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(points: &[[f64; 2]], idx: &mut [usize], depth: usize) {
    if idx.len() <= 1 {
        return;
    }
    let axis = depth % 2;
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (left, right) = idx.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, stream_rng};
    use proptest::prelude::*;
    use rand::Rng;

    fn brute(points: &[[f64; 2]], tree: &KdTree, q: [f64; 2], k: usize) -> Vec<usize> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), tree.rank[i], i))
            .collect();
        all.sort_by(cmp);
        all.into_iter().take(k).map(|n| n.2).collect()
    }

    #[test]
    fn matches_brute_force_on_gridded_points() {
        // Rows of equal depth produce many exact ties.
        let mut points = Vec::new();
        for z in [0.1, 0.25, 0.5, 0.9] {
            for h in 0..200 {
                points.push([z, h as f64 / 199.0]);
            }
        }
        let tree = KdTree::new(points.clone());
        let mut rng = stream_rng(4, stream::TEST);
        for _ in 0..300 {
            let q = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            for k in [1, 5, 20] {
                let got: Vec<usize> = tree.nearest(q, k).iter().map(|n| n.2).collect();
                assert_eq!(got, brute(&points, &tree, q, k));
            }
        }
        // Equidistant between two rows: the shallower one wins.
        let n = tree.nearest([0.375, 0.5], 1)[0].2;
        assert_eq!(points[n][0], 0.25);
    }

    proptest! {
        #[test]
        fn random_sets_match_brute_force(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..120),
            q in (0.0f64..1.0, 0.0f64..1.0),
            k in 1usize..30,
        ) {
            let points: Vec<[f64; 2]> = pts.iter().map(|p| [p.0, p.1]).collect();
            let tree = KdTree::new(points.clone());
            let got: Vec<usize> = tree.nearest([q.0, q.1], k).iter().map(|n| n.2).collect();
            prop_assert_eq!(got, brute(&points, &tree, [q.0, q.1], k));
        }
    }
}
