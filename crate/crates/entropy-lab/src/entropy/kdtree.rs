//! Median-split kd-tree for k-nearest-neighbor queries in low dimension.

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        dim: u32,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Flat row-major sample batch.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub(crate) data: Vec<f64>,
    pub m: usize,
    pub n: usize,
}

impl SampleSet {
    pub fn new(data: Vec<f64>, m: usize, n: usize) -> Self {
        assert_eq!(data.len(), m * n, "row-major data must be m×n");
        SampleSet { data, m, n }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            debug_assert_eq!(r.len(), n);
            data.extend_from_slice(r);
        }
        SampleSet { data, m, n }
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Contiguous sub-batch of rows [start, end).
    pub fn slice_rows(&self, start: usize, end: usize) -> SampleSet {
        SampleSet {
            data: self.data[start * self.n..end * self.n].to_vec(),
            m: end - start,
            n: self.n,
        }
    }
}

pub struct KdTree {
    n: usize,
    /// permuted copy of the points, row-major
    pts: Vec<f64>,
    /// original index of each permuted row
    ids: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    pub fn build(set: &SampleSet) -> KdTree {
        let m = set.m;
        let n = set.n;
        let mut order: Vec<u32> = (0..m as u32).collect();
        let mut nodes = Vec::with_capacity(2 * m / LEAF_SIZE + 2);
        let root = build_node(set, &mut order, 0, m, &mut nodes);
        let mut pts = Vec::with_capacity(m * n);
        for &id in &order {
            pts.extend_from_slice(set.point(id as usize));
        }
        KdTree {
            n,
            pts,
            ids: order,
            nodes,
            root,
        }
    }

    fn point(&self, row: usize) -> &[f64] {
        &self.pts[row * self.n..(row + 1) * self.n]
    }

    /// Squared distance to the k-th nearest neighbor of `query`, excluding
    /// the point whose original index is `skip`.
    pub fn kth_dist2(&self, query: &[f64], k: usize, skip: Option<usize>) -> f64 {
        let mut best = KBest::new(k);
        self.search(self.root, query, skip, &mut best);
        best.max()
    }

    /// Sorted squared distances of the k nearest neighbors.
    pub fn k_nearest_dist2(&self, query: &[f64], k: usize, skip: Option<usize>) -> Vec<f64> {
        let mut best = KBest::new(k);
        self.search(self.root, query, skip, &mut best);
        let mut v = best.values;
        v.sort_by(f64::total_cmp);
        v
    }

    fn search(&self, node: u32, query: &[f64], skip: Option<usize>, best: &mut KBest) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for row in *start as usize..*end as usize {
                    if skip == Some(self.ids[row] as usize) {
                        continue;
                    }
                    let p = self.point(row);
                    let mut d2 = 0.0;
                    for i in 0..self.n {
                        let d = p[i] - query[i];
                        d2 += d * d;
                        if d2 >= best.max() {
                            break;
                        }
                    }
                    best.push(d2);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let dx = query[*dim as usize] - value;
                let (near, far) = if dx < 0.0 { (*left, *right) } else { (*right, *left) };
                self.search(near, query, skip, best);
                if dx * dx < best.max() {
                    self.search(far, query, skip, best);
                }
            }
        }
    }
}

fn build_node(
    set: &SampleSet,
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    // split on the coordinate with the widest extent
    let n = set.n;
    let mut split_dim = 0;
    let mut widest = f64::NEG_INFINITY;
    for d in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &id in order[start..end].iter() {
            let v = set.point(id as usize)[d];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > widest {
            widest = hi - lo;
            split_dim = d;
        }
    }
    let mid = len / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        set.point(a as usize)[split_dim].total_cmp(&set.point(b as usize)[split_dim])
    });
    let split_value = set.point(order[start + mid] as usize)[split_dim];
    let left = build_node(set, order, start, start + mid, nodes);
    let right = build_node(set, order, start + mid, end, nodes);
    nodes.push(Node::Split {
        dim: split_dim as u32,
        value: split_value,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

/// Fixed-capacity max-tracking container for the k best (smallest) values.
struct KBest {
    k: usize,
    values: Vec<f64>,
    max: f64,
}

impl KBest {
    fn new(k: usize) -> Self {
        KBest {
            k,
            values: Vec::with_capacity(k),
            max: f64::INFINITY,
        }
    }

    #[inline]
    fn max(&self) -> f64 {
        if self.values.len() < self.k {
            f64::INFINITY
        } else {
            self.max
        }
    }

    fn push(&mut self, d2: f64) {
        if self.values.len() < self.k {
            self.values.push(d2);
            if self.values.len() == self.k {
                self.max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        } else if d2 < self.max {
            let (mi, _) = self
                .values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            self.values[mi] = d2;
            self.max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use rand::Rng;

    fn brute_kth(set: &SampleSet, q: &[f64], k: usize, skip: Option<usize>) -> f64 {
        let mut d: Vec<f64> = (0..set.m)
            .filter(|i| skip != Some(*i))
            .map(|i| {
                set.point(i)
                    .iter()
                    .zip(q.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    #[test]
    fn kdtree_matches_brute_force() {
        let mut rng = Streams::new(60).rng("kdtree");
        for &(m, n) in &[(200usize, 1usize), (500, 2), (300, 3), (400, 5)] {
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let set = SampleSet::from_rows(&rows);
            let tree = KdTree::build(&set);
            for qi in (0..m).step_by(17) {
                for k in [1usize, 3, 5] {
                    let got = tree.kth_dist2(set.point(qi), k, Some(qi));
                    let want = brute_kth(&set, set.point(qi), k, Some(qi));
                    assert!(
                        (got - want).abs() < 1e-12,
                        "m={m} n={n} k={k}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn skip_self_excludes_query_point() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let set = SampleSet::from_rows(&rows);
        let tree = KdTree::build(&set);
        assert_eq!(tree.kth_dist2(set.point(0), 1, None), 0.0);
        assert_eq!(tree.kth_dist2(set.point(0), 1, Some(0)), 1.0);
    }

    #[test]
    fn sorted_neighbors() {
        let rows = vec![vec![0.0], vec![3.0], vec![1.0], vec![10.0]];
        let set = SampleSet::from_rows(&rows);
        let tree = KdTree::build(&set);
        let d = tree.k_nearest_dist2(&[0.0], 3, Some(0));
        assert_eq!(d, vec![1.0, 9.0, 100.0]);
    }
}
