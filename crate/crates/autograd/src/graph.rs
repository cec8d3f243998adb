use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};
use sphinv_core::knn::Neighborhood;
use sphinv_core::metrics::nearest_neighbors;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Affine(Var, f64),
    LeakyRelu(Var, f64),
    Tanh(Var),
    RowNorm { x: Var, inv_std: Vec<f64> },
    NeighborMean(Var, Arc<Neighborhood>),
    NeighborMax { x: Var, argmax: Vec<usize> },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    MaxRows { x: Var, argmax: Vec<usize> },
    MeanRows(Var),
    RepeatRows(Var),
    HalfMse(Var, f64),
    Chamfer { x: Var, grad: Array2<f64> },
    Sum(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    tracked: bool,
}

/// Operation tape. Values are computed eagerly as ops are recorded.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Trainable leaf: gradients flow to it.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Constant leaf: no gradient is computed for it or for nodes depending only on constants.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        self.push(v, Op::MatMul(a, b), t)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(v, Op::Add(a, b), t)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(v, Op::Sub(a, b), t)
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(v, Op::Mul(a, b), t)
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a 1 x c row");
        let v = self.value(a) + self.value(row);
        let t = self.tracked(a) || self.tracked(row);
        self.push(v, Op::AddRow(a, row), t)
    }

    /// Multiplies every row of `a` elementwise by a `1 x c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "mul_row expects a 1 x c row");
        let v = self.value(a) * self.value(row);
        let t = self.tracked(a) || self.tracked(row);
        self.push(v, Op::MulRow(a, row), t)
    }

    /// `a * scale + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(a).mapv(|x| x * scale + shift);
        let t = self.tracked(a);
        self.push(v, Op::Affine(a, scale), t)
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Var {
        self.affine(a, scale, 0.0)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        let t = self.tracked(a);
        self.push(v, Op::LeakyRelu(a, slope), t)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        let t = self.tracked(a);
        self.push(v, Op::Tanh(a), t)
    }

    /// Per-row standardization over columns: `(x - mean) / sqrt(var + eps)`.
    pub fn row_norm(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let c = x.ncols() as f64;
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in out.outer_iter_mut() {
            let mean = row.sum() / c;
            row.mapv_inplace(|v| v - mean);
            let var = row.dot(&row) / c;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| v * inv);
            inv_std.push(inv);
        }
        let t = self.tracked(a);
        self.push(out, Op::RowNorm { x: a, inv_std }, t)
    }

    /// Row `i` of the output is the mean of rows `graph.neighbors(i)` of `a`.
    pub fn neighbor_mean(&mut self, a: Var, graph: &Arc<Neighborhood>) -> Var {
        let x = self.value(a);
        assert_eq!(x.nrows(), graph.len(), "graph size must match rows");
        let k = graph.k() as f64;
        let mut out = Array2::zeros(x.raw_dim());
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            for &j in graph.neighbors(i) {
                row += &x.row(j);
            }
            row.mapv_inplace(|v| v / k);
        }
        let t = self.tracked(a);
        self.push(out, Op::NeighborMean(a, Arc::clone(graph)), t)
    }

    /// Row `i`, column `c` of the output is the max over neighbors `j` of `a[j, c]`.
    pub fn neighbor_max(&mut self, a: Var, graph: &Neighborhood) -> Var {
        let x = self.value(a);
        assert_eq!(x.nrows(), graph.len(), "graph size must match rows");
        let cols = x.ncols();
        let mut out = Array2::from_elem(x.raw_dim(), f64::NEG_INFINITY);
        let mut argmax = vec![0usize; x.len()];
        for i in 0..x.nrows() {
            for &j in graph.neighbors(i) {
                let src = x.row(j);
                for c in 0..cols {
                    if src[c] > out[[i, c]] {
                        out[[i, c]] = src[c];
                        argmax[i * cols + c] = j;
                    }
                }
            }
        }
        let t = self.tracked(a);
        self.push(out, Op::NeighborMax { x: a, argmax }, t)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts must agree");
        let t = parts.iter().any(|&p| self.tracked(p));
        self.push(v, Op::ConcatCols(parts.to_vec()), t)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        let t = self.tracked(a);
        self.push(v, Op::SliceCols(a, start), t)
    }

    /// Column-wise max over rows, `n x c -> 1 x c`. Ties go to the lowest row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Array2::from_elem((1, x.ncols()), f64::NEG_INFINITY);
        let mut argmax = vec![0usize; x.ncols()];
        for (i, row) in x.outer_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v > out[[0, c]] {
                    out[[0, c]] = v;
                    argmax[c] = i;
                }
            }
        }
        let t = self.tracked(a);
        self.push(out, Op::MaxRows { x: a, argmax }, t)
    }

    /// Column-wise mean over rows, `n x c -> 1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).mean_axis(Axis(0)).expect("nonempty").insert_axis(Axis(0));
        let t = self.tracked(a);
        self.push(v, Op::MeanRows(a), t)
    }

    /// Tiles a `1 x c` row into `n x c`.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Var {
        let row = self.value(a);
        assert_eq!(row.nrows(), 1, "repeat_rows expects a 1 x c row");
        let v = row.broadcast((n, row.ncols())).expect("broadcast").to_owned();
        let t = self.tracked(a);
        self.push(v, Op::RepeatRows(a), t)
    }

    /// `0.5 * mean((a - target)^2)` as a `1 x 1` node.
    pub fn half_mse(&mut self, a: Var, target: f64) -> Var {
        let x = self.value(a);
        let v = 0.5 * x.iter().map(|&x| (x - target) * (x - target)).sum::<f64>() / x.len() as f64;
        let t = self.tracked(a);
        self.push(Array2::from_elem((1, 1), v), Op::HalfMse(a, target), t)
    }

    /// Max-of-directed-means Chamfer discrepancy between `a` (`n x 3`) and a fixed target.
    ///
    /// The gradient follows the larger directed term (the first on ties);
    /// coincident pairs contribute a zero subgradient.
    pub fn chamfer(&mut self, a: Var, target: &Array2<f64>) -> Var {
        let x = self.value(a);
        let fwd = nearest_neighbors(x.view(), target.view());
        let bwd = nearest_neighbors(target.view(), x.view());
        let m_fwd = fwd.iter().map(|&(_, d)| d).sum::<f64>() / fwd.len() as f64;
        let m_bwd = bwd.iter().map(|&(_, d)| d).sum::<f64>() / bwd.len() as f64;
        let mut grad = Array2::zeros(x.raw_dim());
        if self.tracked(a) {
            let mut accumulate = |i: usize, j: usize, d: f64, w: f64| {
                if d > 0.0 {
                    for c in 0..3 {
                        grad[[i, c]] += w * (x[[i, c]] - target[[j, c]]) / d;
                    }
                }
            };
            if m_fwd >= m_bwd {
                let w = 1.0 / fwd.len() as f64;
                for (i, &(j, d)) in fwd.iter().enumerate() {
                    accumulate(i, j, d, w);
                }
            } else {
                let w = 1.0 / bwd.len() as f64;
                for (j, &(i, d)) in bwd.iter().enumerate() {
                    accumulate(i, j, d, w);
                }
            }
        }
        let t = self.tracked(a);
        self.push(Array2::from_elem((1, 1), m_fwd.max(m_bwd)), Op::Chamfer { x: a, grad }, t)
    }

    /// Sum of equal-shape nodes.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.value(parts[0]).clone();
        for &p in &parts[1..] {
            v += self.value(p);
        }
        let t = parts.iter().any(|&p| self.tracked(p));
        self.push(v, Op::Sum(parts.to_vec()), t)
    }

    /// Reverse sweep from a `1 x 1` node.
    pub fn backward(&self, root: Var) -> Grads {
        assert_eq!(self.value(root).dim(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Grads { grads }
    }

    fn propagate(&self, node: &Node, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let mut acc = |v: Var, delta: Array2<f64>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if self.tracked(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    acc(*a, g * self.value(*b));
                }
                if self.tracked(*b) {
                    acc(*b, g * self.value(*a));
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if self.tracked(*row) {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::MulRow(a, row) => {
                if self.tracked(*a) {
                    acc(*a, g * self.value(*row));
                }
                if self.tracked(*row) {
                    acc(*row, (g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Affine(a, scale) => acc(*a, g * *scale),
            Op::LeakyRelu(a, slope) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d *= slope;
                    }
                });
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                acc(*a, d);
            }
            Op::RowNorm { x, inv_std } => {
                // dx = inv_std * (g - mean(g) - y * mean(g * y))
                let y = &node.value;
                let c = y.ncols() as f64;
                let mut d = g.clone();
                for (i, mut row) in d.outer_iter_mut().enumerate() {
                    let yr = y.row(i);
                    let mg = row.sum() / c;
                    let mgy = row.dot(&yr) / c;
                    Zip::from(&mut row).and(&yr).for_each(|d, &yv| {
                        *d = inv_std[i] * (*d - mg - yv * mgy);
                    });
                }
                acc(*x, d);
            }
            Op::NeighborMean(a, graph) => {
                let k = graph.k() as f64;
                let mut d = Array2::zeros(g.raw_dim());
                for i in 0..g.nrows() {
                    let gi = g.row(i);
                    for &j in graph.neighbors(i) {
                        d.row_mut(j).scaled_add(1.0 / k, &gi);
                    }
                }
                acc(*a, d);
            }
            Op::NeighborMax { x, argmax } => {
                let cols = g.ncols();
                let mut d = Array2::zeros(g.raw_dim());
                for i in 0..g.nrows() {
                    for c in 0..cols {
                        d[[argmax[i * cols + c], c]] += g[[i, c]];
                    }
                }
                acc(*x, d);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    acc(p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let mut d = Array2::zeros(self.value(*a).raw_dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, d);
            }
            Op::MaxRows { x, argmax } => {
                let mut d = Array2::zeros(self.value(*x).raw_dim());
                for (c, &i) in argmax.iter().enumerate() {
                    d[[i, c]] += g[[0, c]];
                }
                acc(*x, d);
            }
            Op::MeanRows(a) => {
                let n = self.value(*a).nrows();
                let row = g / n as f64;
                acc(*a, row.broadcast((n, g.ncols())).expect("broadcast").to_owned());
            }
            Op::RepeatRows(a) => acc(*a, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
            Op::HalfMse(a, target) => {
                let x = self.value(*a);
                let w = g[[0, 0]] / x.len() as f64;
                acc(*a, x.mapv(|v| w * (v - target)));
            }
            Op::Chamfer { x, grad } => acc(*x, grad * g[[0, 0]]),
            Op::Sum(parts) => {
                for &p in parts {
                    acc(p, g.clone());
                }
            }
        }
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Array2<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of the given shape when `v` did not influence the root.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}
