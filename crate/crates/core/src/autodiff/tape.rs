use super::params::ParamStore;
use ndarray::{s, Array2, Axis};
use std::collections::BTreeMap;
use std::rc::Rc;

pub type Matrix = Array2<f64>;

/// Norms below this make a cosine undefined; such rows get cosine 0 and no gradient.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),
    #[error("backward needs a 1x1 scalar, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("variable {0} is not on this tape")]
    UnknownVar(usize),
    #[error("{op}: index {index} out of range for {len} rows")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{0}: invalid segment offsets")]
    BadSegments(&'static str),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("build function is not deterministic: {0} vs {1}")]
    NonDeterministic(f64, f64),
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// How the right operand of an elementwise op is broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    /// `1 x C` repeated down the rows.
    Row,
    /// `R x 1` repeated across the columns.
    Col,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Scale(Var, f64),
    AddScalar(Var),
    LeakyRelu(Var, f64),
    Prelu(Var, Var),
    SegmentSoftmax(Var, Rc<[usize]>),
    GatherRows(Var, Rc<[usize]>),
    ScatterAddRows(Var, Rc<[usize]>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    RowCosine(Var, Var),
    MeanOver(Var, Rc<[usize]>),
    Square(Var),
    Sum(Var),
    MaskedRowAdd(Var, Var, Rc<[bool]>),
    ZeroRows(Var, Rc<[bool]>),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
    param: Option<String>,
}

/// Append-only record of a forward computation.
///
/// Insertion order is a topological order, so [`Tape::backward`] is a single
/// reverse sweep. Values are checked for finiteness as they are recorded.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape(m: &Matrix) -> (usize, usize) {
    m.dim()
}

fn broadcast_kind(op: &'static str, a: &Matrix, b: &Matrix) -> Result<Bcast, AutodiffError> {
    let (ra, ca) = shape(a);
    match shape(b) {
        (r, c) if (r, c) == (ra, ca) => Ok(Bcast::Same),
        (1, c) if c == ca => Ok(Bcast::Row),
        (r, 1) if r == ra => Ok(Bcast::Col),
        other => Err(AutodiffError::ShapeMismatch {
            op,
            lhs: (ra, ca),
            rhs: other,
        }),
    }
}

/// Sums `g` back down to the shape of a broadcast operand.
fn reduce(g: Matrix, kind: Bcast) -> Matrix {
    match kind {
        Bcast::Same => g,
        Bcast::Row => g.sum_axis(Axis(0)).insert_axis(Axis(0)),
        Bcast::Col => g.sum_axis(Axis(1)).insert_axis(Axis(1)),
    }
}

fn zip_bcast(a: &Matrix, b: &Matrix, kind: Bcast, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let mut out = a.clone();
    match kind {
        Bcast::Same => out.zip_mut_with(b, |x, &y| *x = f(*x, y)),
        Bcast::Row | Bcast::Col => {
            let b = b.broadcast(a.raw_dim()).expect("checked by broadcast_kind");
            out.zip_mut_with(&b, |x, &y| *x = f(*x, y));
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Result<Var, AutodiffError> {
        if !value.iter().all(|x| x.is_finite()) {
            return Err(AutodiffError::NonFinite(name));
        }
        let needs_grad = self.parents(&op).iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn parents(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b, _)
            | Op::Sub(a, b, _)
            | Op::Mul(a, b, _)
            | Op::Prelu(a, b)
            | Op::RowCosine(a, b)
            | Op::MaskedRowAdd(a, b, _) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::LeakyRelu(a, _)
            | Op::SegmentSoftmax(a, _)
            | Op::GatherRows(a, _)
            | Op::ScatterAddRows(a, _)
            | Op::SliceRows(a, _)
            | Op::MeanOver(a, _)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::ZeroRows(a, _) => vec![*a],
            Op::ConcatCols(vs) => vs.clone(),
        }
    }

    fn check(&self, v: Var) -> Result<&Matrix, AutodiffError> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or(AutodiffError::UnknownVar(v.0))
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// The single entry of a 1x1 value.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var, AutodiffError> {
        self.push(value, Op::Leaf, "constant")
    }

    /// A named trainable leaf.
    pub fn param(&mut self, name: &str, value: Matrix) -> Result<Var, AutodiffError> {
        let v = self.push(value, Op::Leaf, "param")?;
        let node = &mut self.nodes[v.0];
        node.needs_grad = true;
        node.param = Some(name.to_string());
        Ok(v)
    }

    /// Records every entry of `store` as a parameter, returning name -> var.
    pub fn params_from(&mut self, store: &ParamStore) -> Result<BTreeMap<String, Var>, AutodiffError> {
        store
            .iter()
            .map(|(name, m)| Ok((name.to_string(), self.param(name, m.clone())?)))
            .collect()
    }

    /// Same value, cut off from the gradient.
    pub fn detach(&mut self, v: Var) -> Result<Var, AutodiffError> {
        let value = self.check(v)?.clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if x.ncols() != y.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: shape(x),
                rhs: shape(y),
            });
        }
        let value = x.dot(y);
        self.push(value, Op::MatMul(a, b), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        let k = broadcast_kind("add", x, y)?;
        let value = zip_bcast(x, y, k, |p, q| p + q);
        self.push(value, Op::Add(a, b, k), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        let k = broadcast_kind("sub", x, y)?;
        let value = zip_bcast(x, y, k, |p, q| p - q);
        self.push(value, Op::Sub(a, b, k), "sub")
    }

    /// Elementwise product; `b` may be a row or column vector.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        let k = broadcast_kind("mul", x, y)?;
        let value = zip_bcast(x, y, k, |p, q| p * q);
        self.push(value, Op::Mul(a, b, k), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let value = self.check(a)? * c;
        self.push(value, Op::Scale(a, c), "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let value = self.check(a)? + c;
        self.push(value, Op::AddScalar(a), "add_scalar")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, AutodiffError> {
        let value = self.check(a)?.mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a, slope), "leaky_relu")
    }

    /// PReLU with a learned `1 x 1` slope.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var, AutodiffError> {
        let s = self.check(slope)?;
        if shape(s) != (1, 1) {
            return Err(AutodiffError::ShapeMismatch {
                op: "prelu",
                lhs: shape(self.check(a)?),
                rhs: shape(s),
            });
        }
        let s = s[[0, 0]];
        let value = self.check(a)?.mapv(|x| if x > 0.0 { x } else { s * x });
        self.push(value, Op::Prelu(a, slope), "prelu")
    }

    /// Softmax of an `E x 1` column within segments `offsets[i]..offsets[i+1]`.
    /// Each segment's maximum is subtracted before exponentiating.
    pub fn segment_softmax(&mut self, logits: Var, offsets: Rc<[usize]>) -> Result<Var, AutodiffError> {
        let x = self.check(logits)?;
        if x.ncols() != 1
            || offsets.first() != Some(&0)
            || offsets.last() != Some(&x.nrows())
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(AutodiffError::BadSegments("segment_softmax"));
        }
        let mut out = Matrix::zeros(x.raw_dim());
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo == hi {
                continue;
            }
            let seg = x.slice(s![lo..hi, 0]);
            let max = seg.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut total = 0.0;
            for i in lo..hi {
                let e = (x[[i, 0]] - max).exp();
                out[[i, 0]] = e;
                total += e;
            }
            out.slice_mut(s![lo..hi, 0]).mapv_inplace(|e| e / total);
        }
        self.push(out, Op::SegmentSoftmax(logits, offsets), "segment_softmax")
    }

    /// `out[i] = a[index[i]]`.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var, AutodiffError> {
        let x = self.check(a)?;
        let mut out = Matrix::zeros((index.len(), x.ncols()));
        for (i, &src) in index.iter().enumerate() {
            if src >= x.nrows() {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "gather_rows",
                    index: src,
                    len: x.nrows(),
                });
            }
            out.row_mut(i).assign(&x.row(src));
        }
        self.push(out, Op::GatherRows(a, index), "gather_rows")
    }

    /// `out[index[i]] += a[i]` into an `n_out`-row result.
    pub fn scatter_add_rows(&mut self, a: Var, index: Rc<[usize]>, n_out: usize) -> Result<Var, AutodiffError> {
        let x = self.check(a)?;
        if index.len() != x.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "scatter_add_rows",
                lhs: shape(x),
                rhs: (index.len(), 1),
            });
        }
        let mut out = Matrix::zeros((n_out, x.ncols()));
        for (i, &dst) in index.iter().enumerate() {
            if dst >= n_out {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "scatter_add_rows",
                    index: dst,
                    len: n_out,
                });
            }
            let mut row = out.row_mut(dst);
            row += &x.row(i);
        }
        self.push(out, Op::ScatterAddRows(a, index), "scatter_add_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let mut views = Vec::with_capacity(parts.len());
        for &p in parts {
            views.push(self.check(p)?.view());
        }
        let value = ndarray::concatenate(Axis(1), &views).map_err(|_| AutodiffError::ShapeMismatch {
            op: "concat_cols",
            lhs: views.first().map_or((0, 0), |v| v.dim()),
            rhs: views.last().map_or((0, 0), |v| v.dim()),
        })?;
        self.push(value, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let x = self.check(a)?;
        if start + len > x.nrows() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "slice_rows",
                index: start + len,
                len: x.nrows(),
            });
        }
        let value = x.slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start), "slice_rows")
    }

    /// Row-wise cosine similarity as an `N x 1` column.
    pub fn row_cosine(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if x.dim() != y.dim() {
            return Err(AutodiffError::ShapeMismatch {
                op: "row_cosine",
                lhs: shape(x),
                rhs: shape(y),
            });
        }
        let mut out = Matrix::zeros((x.nrows(), 1));
        for (i, (ra, rb)) in x.rows().into_iter().zip(y.rows()).enumerate() {
            let (na, nb) = (ra.dot(&ra).sqrt(), rb.dot(&rb).sqrt());
            if na >= COSINE_EPS && nb >= COSINE_EPS {
                out[[i, 0]] = ra.dot(&rb) / (na * nb);
            }
        }
        self.push(out, Op::RowCosine(a, b), "row_cosine")
    }

    /// Mean over the listed rows of the row sums, as a `1 x 1` scalar.
    pub fn mean_over(&mut self, a: Var, rows: Rc<[usize]>) -> Result<Var, AutodiffError> {
        let x = self.check(a)?;
        if rows.is_empty() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "mean_over",
                index: 0,
                len: 0,
            });
        }
        let mut total = 0.0;
        for &r in rows.iter() {
            if r >= x.nrows() {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "mean_over",
                    index: r,
                    len: x.nrows(),
                });
            }
            total += x.row(r).sum();
        }
        let value = Matrix::from_elem((1, 1), total / rows.len() as f64);
        self.push(value, Op::MeanOver(a, rows), "mean_over")
    }

    pub fn square(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let value = self.check(a)?.mapv(|x| x * x);
        self.push(value, Op::Square(a), "square")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let value = Matrix::from_elem((1, 1), self.check(a)?.sum());
        self.push(value, Op::Sum(a), "sum")
    }

    /// Adds the `1 x F` row `w` to every row whose flag is set; other rows are
    /// copied untouched.
    pub fn masked_row_add(&mut self, x: Var, w: Var, flags: Rc<[bool]>) -> Result<Var, AutodiffError> {
        let (xv, wv) = (self.check(x)?, self.check(w)?);
        if wv.nrows() != 1 || wv.ncols() != xv.ncols() || flags.len() != xv.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "masked_row_add",
                lhs: shape(xv),
                rhs: shape(wv),
            });
        }
        let mut out = xv.clone();
        for (mut row, _) in out.rows_mut().into_iter().zip(flags.iter()).filter(|(_, f)| **f) {
            row += &wv.row(0);
        }
        self.push(out, Op::MaskedRowAdd(x, w, flags), "masked_row_add")
    }

    /// Sets flagged rows to exactly zero; no gradient reaches them.
    pub fn zero_rows(&mut self, a: Var, flags: Rc<[bool]>) -> Result<Var, AutodiffError> {
        let x = self.check(a)?;
        if flags.len() != x.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "zero_rows",
                lhs: shape(x),
                rhs: (flags.len(), 1),
            });
        }
        let mut out = x.clone();
        for (mut row, _) in out.rows_mut().into_iter().zip(flags.iter()).filter(|(_, f)| **f) {
            row.fill(0.0);
        }
        self.push(out, Op::ZeroRows(a, flags), "zero_rows")
    }

    /// Reverse sweep from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients, AutodiffError> {
        let out = self.check(output)?;
        if shape(out) != (1, 1) {
            return Err(AutodiffError::NotScalar(shape(out)));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::ones((1, 1)));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                for (parent, pg) in self.local_grads(node, &g) {
                    if !self.nodes[parent.0].needs_grad {
                        continue;
                    }
                    match &mut grads[parent.0] {
                        Some(acc) => *acc += &pg,
                        slot => *slot = Some(pg),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            by_node: grads,
            names: self
                .nodes
                .iter()
                .enumerate()
                .filter_map(|(i, n)| n.param.as_ref().map(|p| (p.clone(), Var(i))))
                .collect(),
        })
    }

    fn local_grads(&self, node: &Node, g: &Matrix) -> Vec<(Var, Matrix)> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => vec![
                (*a, g.dot(&val(*b).t())),
                (*b, val(*a).t().dot(g)),
            ],
            Op::Add(a, b, k) => vec![(*a, g.clone()), (*b, reduce(g.clone(), *k))],
            Op::Sub(a, b, k) => vec![(*a, g.clone()), (*b, reduce(-g, *k))],
            Op::Mul(a, b, k) => {
                let ga = zip_bcast(g, val(*b), *k, |p, q| p * q);
                let gb = reduce(g * val(*a), *k);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Scale(a, c) => vec![(*a, g * *c)],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::LeakyRelu(a, slope) => {
                let mut ga = g.clone();
                ga.zip_mut_with(val(*a), |d, &x| {
                    if x <= 0.0 {
                        *d *= slope
                    }
                });
                vec![(*a, ga)]
            }
            Op::Prelu(a, s) => {
                let slope = val(*s)[[0, 0]];
                let x = val(*a);
                let mut ga = g.clone();
                let mut gs = 0.0;
                ndarray::Zip::from(&mut ga).and(x).for_each(|d, &xi| {
                    if xi <= 0.0 {
                        gs += *d * xi;
                        *d *= slope;
                    }
                });
                vec![(*a, ga), (*s, Matrix::from_elem((1, 1), gs))]
            }
            Op::SegmentSoftmax(a, offsets) => {
                let y = &node.value;
                let mut ga = Matrix::zeros(y.raw_dim());
                for w in offsets.windows(2) {
                    let dot: f64 = (w[0]..w[1]).map(|i| y[[i, 0]] * g[[i, 0]]).sum();
                    for i in w[0]..w[1] {
                        ga[[i, 0]] = y[[i, 0]] * (g[[i, 0]] - dot);
                    }
                }
                vec![(*a, ga)]
            }
            Op::GatherRows(a, index) => {
                let mut ga = Matrix::zeros(val(*a).raw_dim());
                for (i, &src) in index.iter().enumerate() {
                    let mut row = ga.row_mut(src);
                    row += &g.row(i);
                }
                vec![(*a, ga)]
            }
            Op::ScatterAddRows(a, index) => {
                let mut ga = Matrix::zeros(val(*a).raw_dim());
                for (i, &dst) in index.iter().enumerate() {
                    ga.row_mut(i).assign(&g.row(dst));
                }
                vec![(*a, ga)]
            }
            Op::ConcatCols(parts) => {
                let mut col = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let w = val(p).ncols();
                        let piece = g.slice(s![.., col..col + w]).to_owned();
                        col += w;
                        (p, piece)
                    })
                    .collect()
            }
            Op::SliceRows(a, start) => {
                let mut ga = Matrix::zeros(val(*a).raw_dim());
                ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                vec![(*a, ga)]
            }
            Op::RowCosine(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let mut ga = Matrix::zeros(x.raw_dim());
                let mut gb = Matrix::zeros(y.raw_dim());
                for i in 0..x.nrows() {
                    let (ra, rb) = (x.row(i), y.row(i));
                    let (na, nb) = (ra.dot(&ra).sqrt(), rb.dot(&rb).sqrt());
                    if na < COSINE_EPS || nb < COSINE_EPS {
                        continue;
                    }
                    let c = node.value[[i, 0]];
                    let gi = g[[i, 0]];
                    let inv = 1.0 / (na * nb);
                    ga.row_mut(i)
                        .assign(&((&rb * inv - &ra * (c / (na * na))) * gi));
                    gb.row_mut(i)
                        .assign(&((&ra * inv - &rb * (c / (nb * nb))) * gi));
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::MeanOver(a, rows) => {
                let mut ga = Matrix::zeros(val(*a).raw_dim());
                let share = g[[0, 0]] / rows.len() as f64;
                for &r in rows.iter() {
                    ga.row_mut(r).mapv_inplace(|v| v + share);
                }
                vec![(*a, ga)]
            }
            Op::Square(a) => vec![(*a, g * &(val(*a) * 2.0))],
            Op::Sum(a) => vec![(*a, Matrix::from_elem(val(*a).raw_dim(), g[[0, 0]]))],
            Op::MaskedRowAdd(x, w, flags) => {
                let mut gw = Matrix::zeros((1, g.ncols()));
                for (row, _) in g.rows().into_iter().zip(flags.iter()).filter(|(_, f)| **f) {
                    let mut acc = gw.row_mut(0);
                    acc += &row;
                }
                vec![(*x, g.clone()), (*w, gw)]
            }
            Op::ZeroRows(a, flags) => {
                let mut ga = g.clone();
                for (mut row, _) in ga.rows_mut().into_iter().zip(flags.iter()).filter(|(_, f)| **f) {
                    row.fill(0.0);
                }
                vec![(*a, ga)]
            }
        }
    }
}

/// Result of a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    by_node: Vec<Option<Matrix>>,
    names: BTreeMap<String, Var>,
}

impl Gradients {
    /// Gradient of the output with respect to any recorded value, or `None`
    /// when no gradient path exists.
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.by_node.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of a named parameter. Parameters that do not influence the
    /// output have no entry.
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.get(name).and_then(|&v| self.wrt(v))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Named parameter gradients.
    pub fn params(&self) -> BTreeMap<String, Matrix> {
        self.names
            .iter()
            .filter_map(|(n, &v)| self.wrt(v).map(|g| (n.clone(), g.clone())))
            .collect()
    }
}
