//! Brute-force k-nearest-neighbor graphs with deterministic tie-breaking.

use ndarray::ArrayView2;

/// Fixed-degree directed neighbor graph: row `i` lists the `k` nearest other rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    k: usize,
    idx: Vec<usize>,
}

impl Neighborhood {
    /// Builds the graph from explicit lists; every list must have length `k`.
    pub fn from_lists(k: usize, lists: &[Vec<usize>]) -> Self {
        let mut idx = Vec::with_capacity(k * lists.len());
        for l in lists {
            assert_eq!(l.len(), k, "neighbor list length");
            idx.extend_from_slice(l);
        }
        Self { k, idx }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.idx.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.idx[i * self.k..(i + 1) * self.k]
    }

    pub fn flat(&self) -> &[usize] {
        &self.idx
    }

    /// Relabels the graph for rows permuted so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut idx = Vec::with_capacity(self.idx.len());
        for &old in perm {
            idx.extend(self.neighbors(old).iter().map(|&j| inverse[j]));
        }
        Self { k: self.k, idx }
    }

    /// Undirected hop distance from any row in `sources` to every row.
    pub fn hop_distances(&self, sources: &[usize]) -> Vec<usize> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for &j in self.neighbors(i) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for &s in sources {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// k nearest other rows of `points` by Euclidean distance; ties go to the lower index.
///
/// Panics if `k >= n`.
pub fn knn_graph(points: ArrayView2<'_, f64>, k: usize) -> Neighborhood {
    let n = points.nrows();
    assert!(k < n, "k-NN graph needs k < n (k={k}, n={n})");
    let dim = points.ncols();
    let data = points.as_standard_layout();
    let flat = data.as_slice().expect("standard layout");
    let rows: Vec<&[f64]> = flat.chunks_exact(dim.max(1)).take(n).collect();
    let mut idx = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let a = rows[i];
        for (j, b) in rows.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut d = 0.0;
            for c in 0..dim {
                let t = a[c] - b[c];
                d += t * t;
            }
            cand.push((d, j));
        }
        let cmp = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k, cmp);
        }
        let head = &mut cand[..k];
        head.sort_unstable_by(cmp);
        idx.extend(head.iter().map(|&(_, j)| j));
    }
    Neighborhood { k, idx }
}
