//! A small reverse-mode automatic differentiation tape over dense matrices.
//!
//! Nodes are appended to a [`Graph`] in evaluation order, so the tape is
//! already topologically sorted and the backward pass is a single reverse
//! sweep. Every value is an `Array2<f64>`; scalars are `1 x 1` and vectors
//! are columns (`n x 1`) or rows (`1 x p`) depending on the op.
//!
//! Only the operations the estimator and the small networks need are
//! provided. Each has a hand-written backward rule that is checked against
//! central finite differences in the tests.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Offset inside the square root of the pairwise distance, keeping the
/// gradient finite for coincident rows.
pub const EPS_DIST: f64 = 1e-12;
/// Margin added to the largest distance when forming the diagonal mask.
pub const EPS_MASK: f64 = 1e-6;
/// Lower bound of the diagonal mask offset.
pub const LAMBDA_FLOOR: f64 = 1e10;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    MulCols(Var, Var),
    Relu(Var),
    ConcatCols(Var, Var),
    PairwiseDist(Var),
    SoftNeighbors(Var, f64),
    MatVecConst(Var, Array1<f64>),
    MinConst(Var, Array2<f64>),
    Sum(Var),
    Affine(Var, f64),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    DotConst(Var, Array2<f64>),
    BceWithLogits(Var, Array2<f64>),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// The tape. Build values with the op methods, call [`Graph::backward`] once
/// on a scalar, then read leaf gradients with [`Graph::grad`].
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Array2<f64>>>,
    backward_done: bool,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::invalid(format!(
        "{op}: incompatible shapes {}x{} and {}x{}",
        a.0, a.1, b.0, b.1
    ))
}

/// Pairwise Euclidean distances between rows, `sqrt(|a_i - a_j|^2 + EPS_DIST)`
/// off the diagonal and exactly zero on it.
pub fn pairwise_distances(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = a.dim();
    let a = a.as_standard_layout();
    let data = a.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros((n, n));
    {
        let o = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let ai = &data[i * d..(i + 1) * d];
            for j in (i + 1)..n {
                let aj = &data[j * d..(j + 1) * d];
                let mut acc = 0.0;
                for k in 0..d {
                    let diff = ai[k] - aj[k];
                    acc += diff * diff;
                }
                let v = (acc + EPS_DIST).sqrt();
                o[i * n + j] = v;
                o[j * n + i] = v;
            }
        }
    }
    out
}

/// Diagonal mask offset for a distance matrix.
pub fn mask_offset(m: ArrayView2<'_, f64>) -> f64 {
    let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    LAMBDA_FLOOR.max(max + EPS_MASK)
}

/// Row-wise softmax of `-beta * (m + lambda * I)`: each row is a probability
/// distribution over the other samples, concentrating on the nearest one as
/// `beta` grows.
pub fn soft_neighbor_weights(m: ArrayView2<'_, f64>, beta: f64) -> Result<Array2<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let (n, c) = m.dim();
    if n != c {
        return Err(Error::invalid(format!("distance matrix is {n}x{c}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in distance matrix".into()));
    }
    let lambda = mask_offset(m);
    let mut out = m.to_owned();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            row[i] += lambda;
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let mut total = 0.0;
            row.mapv_inplace(|v| {
                let e = (-beta * (v - min)).exp();
                total += e;
                e
            });
            row.mapv_inplace(|v| v / total);
        });
    Ok(out)
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

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.needs(v)
    }

    /// Accumulated gradient of a leaf; zeros when none reached it.
    pub fn grad(&self, v: Var) -> Array2<f64> {
        self.grads
            .get(v.0)
            .and_then(Option::as_ref)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(self.shape(v)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let value = self.value(a).dot(self.value(b));
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `a + bias` with a `1 x k` bias broadcast over rows.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sb.0 != 1 || sb.1 != sa.1 {
            return Err(shape_err("add_bias", sa, sb));
        }
        let value = self.value(a) + self.value(bias);
        let rg = self.needs(a) || self.needs(bias);
        Ok(self.push(value, Op::AddBias(a, bias), rg))
    }

    /// Scales column `j` of `a` by `w[0, j]`.
    pub fn mul_cols(&mut self, a: Var, w: Var) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sw.0 != 1 || sw.1 != sa.1 {
            return Err(shape_err("mul_cols", sa, sw));
        }
        let value = self.value(a) * self.value(w);
        let rg = self.needs(a) || self.needs(w);
        Ok(self.push(value, Op::MulCols(a, w), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v.max(0.0));
        let rg = self.needs(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(shape_err("concat_cols", sa, sb));
        }
        let value = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// `n x n` matrix of Euclidean distances between the rows of `a`.
    pub fn pairwise_dist(&mut self, a: Var) -> Var {
        let value = pairwise_distances(self.value(a).view());
        let rg = self.needs(a);
        self.push(value, Op::PairwiseDist(a), rg)
    }

    /// Row-stochastic soft nearest-neighbour matrix from a distance matrix.
    pub fn soft_neighbors(&mut self, m: Var, beta: f64) -> Result<Var> {
        let value = soft_neighbor_weights(self.value(m).view(), beta)?;
        let rg = self.needs(m);
        Ok(self.push(value, Op::SoftNeighbors(m, beta), rg))
    }

    /// `a * v` for a constant vector `v`; the result is a column.
    pub fn matvec_const(&mut self, a: Var, v: Array1<f64>) -> Result<Var> {
        let sa = self.shape(a);
        if sa.1 != v.len() {
            return Err(shape_err("matvec_const", sa, (v.len(), 1)));
        }
        let value = self.value(a).dot(&v).insert_axis(Axis(1));
        let rg = self.needs(a);
        Ok(self.push(value, Op::MatVecConst(a, v), rg))
    }

    /// Elementwise `min(a, c)` against a constant. At exact ties the
    /// gradient flows into `a`.
    pub fn min_const(&mut self, a: Var, c: Array2<f64>) -> Result<Var> {
        let sa = self.shape(a);
        if sa != c.dim() {
            return Err(shape_err("min_const", sa, c.dim()));
        }
        let value = Zip::from(self.value(a)).and(&c).map_collect(|&x, &y| x.min(y));
        let rg = self.needs(a);
        Ok(self.push(value, Op::MinConst(a, c), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.needs(a);
        self.push(value, Op::Sum(a), rg)
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(a).mapv(|v| scale * v + shift);
        let rg = self.needs(a);
        self.push(value, Op::Affine(a, scale), rg)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// `sum(a * w)` for a constant weight matrix of the same shape.
    pub fn dot_const(&mut self, a: Var, w: Array2<f64>) -> Result<Var> {
        let sa = self.shape(a);
        if sa != w.dim() {
            return Err(shape_err("dot_const", sa, w.dim()));
        }
        let value = Array2::from_elem((1, 1), (self.value(a) * &w).sum());
        let rg = self.needs(a);
        Ok(self.push(value, Op::DotConst(a, w), rg))
    }

    /// Per-element binary cross-entropy of logits against 0/1 targets,
    /// computed in the overflow-safe form.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Array2<f64>) -> Result<Var> {
        let sa = self.shape(logits);
        if sa != targets.dim() {
            return Err(shape_err("bce_with_logits", sa, targets.dim()));
        }
        let value = Zip::from(self.value(logits))
            .and(&targets)
            .map_collect(|&z, &t| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p());
        let rg = self.needs(logits);
        Ok(self.push(value, Op::BceWithLogits(logits, targets), rg))
    }

    /// Clears accumulated gradients so `backward` may run again.
    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Propagates `d loss / d node` to every node that requires a gradient.
    /// Gradients of interior nodes are released once consumed; leaf
    /// gradients are kept for [`Graph::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::DoubleBackward);
        }
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss(r, c));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, g, &mut grads);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        let mut acc = |v: Var, delta: Array2<f64>| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot => *slot = Some(delta),
            }
        };

        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if nodes[a.0].requires_grad {
                    acc(*a, g.dot(&val(*b).t()));
                }
                if nodes[b.0].requires_grad {
                    acc(*b, val(*a).t().dot(&g));
                }
            }
            Op::AddBias(a, bias) => {
                acc(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                acc(*a, g);
            }
            Op::MulCols(a, w) => {
                if nodes[w.0].requires_grad {
                    let gw = (&g * val(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(*w, gw);
                }
                if nodes[a.0].requires_grad {
                    acc(*a, &g * val(*w));
                }
            }
            Op::Relu(a) => {
                let ga = Zip::from(&g)
                    .and(val(*a))
                    .map_collect(|&gi, &x| if x > 0.0 { gi } else { 0.0 });
                acc(*a, ga);
            }
            Op::ConcatCols(a, b) => {
                let ka = val(*a).ncols();
                acc(*a, g.slice(ndarray::s![.., ..ka]).to_owned());
                acc(*b, g.slice(ndarray::s![.., ka..]).to_owned());
            }
            Op::PairwiseDist(a) => {
                // d M_ij / d a_i = (a_i - a_j) / M_ij and M is symmetric, so
                // each unordered pair contributes w (a_i - a_j) to row i and
                // its negative to row j, with w = (G_ij + G_ji) / M_ij.
                let m = nodes[idx].value.as_standard_layout();
                let gs = g.as_standard_layout();
                let gt = g.t().as_standard_layout().into_owned();
                let av = val(*a).as_standard_layout();
                let (n, d) = av.dim();
                let (ms, gss, gts, ad) = (
                    m.as_slice().expect("standard layout"),
                    gs.as_slice().expect("standard layout"),
                    gt.as_slice().expect("standard layout"),
                    av.as_slice().expect("standard layout"),
                );
                let mut ga = vec![0.0; n * d];
                for i in 0..n {
                    let ai = &ad[i * d..(i + 1) * d];
                    for j in (i + 1)..n {
                        let w = (gss[i * n + j] + gts[i * n + j]) / ms[i * n + j];
                        if w == 0.0 {
                            continue;
                        }
                        let aj = &ad[j * d..(j + 1) * d];
                        let (lo, hi) = ga.split_at_mut(j * d);
                        let gi = &mut lo[i * d..(i + 1) * d];
                        let gj = &mut hi[..d];
                        for k in 0..d {
                            let v = w * (ai[k] - aj[k]);
                            gi[k] += v;
                            gj[k] -= v;
                        }
                    }
                }
                acc(*a, Array2::from_shape_vec((n, d), ga).expect("shape"));
            }
            Op::SoftNeighbors(m, beta) => {
                let s = &nodes[idx].value;
                let mut gm = Array2::<f64>::zeros(s.dim());
                gm.axis_iter_mut(Axis(0))
                    .into_par_iter()
                    .zip(s.axis_iter(Axis(0)).into_par_iter())
                    .zip(g.axis_iter(Axis(0)).into_par_iter())
                    .for_each(|((mut out, srow), grow)| {
                        let inner = srow.dot(&grow);
                        Zip::from(&mut out)
                            .and(&srow)
                            .and(&grow)
                            .for_each(|o, &sv, &gv| *o = -beta * sv * (gv - inner));
                    });
                acc(*m, gm);
            }
            Op::MatVecConst(a, v) => {
                let gcol = g.column(0);
                let n = gcol.len();
                let ga = Array2::from_shape_fn((n, v.len()), |(i, j)| gcol[i] * v[j]);
                acc(*a, ga);
            }
            Op::MinConst(a, c) => {
                let ga = Zip::from(&g)
                    .and(val(*a))
                    .and(c)
                    .map_collect(|&gi, &x, &y| if x <= y { gi } else { 0.0 });
                acc(*a, ga);
            }
            Op::Sum(a) => {
                acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]]));
            }
            Op::Affine(a, scale) => {
                acc(*a, g * *scale);
            }
            Op::Add(a, b) => {
                acc(*b, g.clone());
                acc(*a, g);
            }
            Op::Sub(a, b) => {
                acc(*b, -&g);
                acc(*a, g);
            }
            Op::Mul(a, b) => {
                if nodes[a.0].requires_grad {
                    acc(*a, &g * val(*b));
                }
                if nodes[b.0].requires_grad {
                    acc(*b, &g * val(*a));
                }
            }
            Op::DotConst(a, w) => {
                acc(*a, w * g[[0, 0]]);
            }
            Op::BceWithLogits(z, t) => {
                let gz = Zip::from(&g)
                    .and(val(*z))
                    .and(t)
                    .map_collect(|&gi, &zi, &ti| gi * (sigmoid(zi) - ti));
                acc(*z, gz);
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
