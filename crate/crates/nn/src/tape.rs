//! Reverse-mode differentiation over a record of 2-D tensor operations.
//!
//! A [`Tape`] owns every intermediate value. [`Var`] is a copyable handle
//! into one tape; each operation appends a record holding its output and
//! the ids of its inputs, so records are topologically ordered by
//! construction and [`Tape::backward`] is a single reverse sweep.

use std::cell::{Ref, RefCell};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{shape, NnError, Result};
use crate::tensor::{gemm, gemm_at, gemm_bt, ParamId, ParamStore, Tensor};

/// Variance floor inside [`Var::standardize`].
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulBt(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    Ln(usize),
    Softmax(usize),
    Standardize(usize, Vec<f64>),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SelectRows(usize, Vec<usize>),
    SliceCols(usize, usize),
    Transpose(usize),
    Sum(usize),
    Pick(usize, usize),
}

struct Record {
    value: Arc<Tensor>,
    op: Op,
    /// Whether any differentiable leaf feeds this record.
    live: bool,
}

pub struct Tape {
    records: RefCell<Vec<Record>>,
    params: RefCell<HashMap<ParamId, usize>>,
    grad_enabled: bool,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

/// Gradients from one backward sweep.
#[derive(Debug, Clone, Default)]
pub struct Grads {
    nodes: Vec<Option<Vec<f64>>>,
    shapes: Vec<(usize, usize)>,
    /// Parameter gradients, ordered by id.
    pub params: BTreeMap<ParamId, Tensor>,
}

impl Grads {
    /// Gradient of the loss with respect to `v`, if it is on the path.
    pub fn of(&self, v: Var<'_>) -> Option<Tensor> {
        let (r, c) = self.shapes[v.id];
        self.nodes[v.id].as_ref().map(|g| Tensor::new(r, c, g.clone()).expect("shape"))
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { records: RefCell::new(Vec::new()), params: RefCell::new(HashMap::new()), grad_enabled: true }
    }

    /// A tape on which parameters are constants; nothing is differentiable.
    pub fn inference() -> Self {
        Tape { grad_enabled: false, ..Tape::new() }
    }

    pub fn len(&self) -> usize {
        self.records.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, live: bool) -> Var<'_> {
        self.push_shared(Arc::new(value), op, live)
    }

    fn push_shared(&self, value: Arc<Tensor>, op: Op, live: bool) -> Var<'_> {
        let mut recs = self.records.borrow_mut();
        recs.push(Record { value, op, live });
        Var { tape: self, id: recs.len() - 1 }
    }

    /// A constant input.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, false)
    }

    /// A differentiable leaf whose gradient is reported by [`Grads::of`].
    pub fn leaf(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, self.grad_enabled)
    }

    /// The parameter `id` of `store`; repeated calls share one record.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        if let Some(&node) = self.params.borrow().get(&id) {
            return Var { tape: self, id: node };
        }
        let v = self.push_shared(store.shared(id), Op::Leaf, self.grad_enabled);
        self.params.borrow_mut().insert(id, v.id);
        v
    }

    fn check<'t>(&'t self, v: Var<'_>) -> Result<()> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(NnError::Detached("variable belongs to another tape".into()))
        }
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Grads> {
        self.check(loss)?;
        let recs = self.records.borrow();
        let n = recs.len();
        if recs[loss.id].value.shape() != (1, 1) {
            let (r, c) = recs[loss.id].value.shape();
            return Err(shape(format!("loss must be 1x1, got {r}x{c}")));
        }
        if !recs[loss.id].live {
            return Err(NnError::Detached("loss does not depend on any differentiable input".into()));
        }
        let mut g: Vec<Option<Vec<f64>>> = vec![None; n];
        g[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(gy) = g[id].take() else { continue };
            let rec = &recs[id];
            if rec.live {
                backprop(&recs, id, &gy, &mut g);
            }
            g[id] = Some(gy);
        }
        let shapes = recs.iter().map(|r| r.value.shape()).collect();
        let mut params = BTreeMap::new();
        for (&pid, &node) in self.params.borrow().iter() {
            if let Some(gv) = &g[node] {
                let (r, c) = recs[node].value.shape();
                params.insert(pid, Tensor::new(r, c, gv.clone())?);
            }
        }
        Ok(Grads { nodes: g, shapes, params })
    }
}

fn acc<'a>(g: &'a mut [Option<Vec<f64>>], recs: &[Record], id: usize) -> Option<&'a mut Vec<f64>> {
    if !recs[id].live {
        return None;
    }
    let len = recs[id].value.data().len();
    Some(g[id].get_or_insert_with(|| vec![0.0; len]))
}

fn backprop(recs: &[Record], id: usize, gy: &[f64], g: &mut [Option<Vec<f64>>]) {
    let y = &recs[id].value;
    match &recs[id].op {
        Op::Leaf => {}
        &Op::MatMul(a, b) => {
            let (av, bv) = (&recs[a].value, &recs[b].value);
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            if let Some(ga) = acc(g, recs, a) {
                gemm_bt(gy, bv.data(), ga, m, n, k);
            }
            if let Some(gb) = acc(g, recs, b) {
                gemm_at(av.data(), gy, gb, m, k, n);
            }
        }
        &Op::MatMulBt(a, b) => {
            // y = a b^T, a: m x k, b: n x k
            let (av, bv) = (&recs[a].value, &recs[b].value);
            let (m, k, n) = (av.rows(), av.cols(), bv.rows());
            if let Some(ga) = acc(g, recs, a) {
                gemm(gy, bv.data(), ga, m, n, k);
            }
            if let Some(gb) = acc(g, recs, b) {
                gemm_at(gy, av.data(), gb, m, n, k);
            }
        }
        &Op::Add(a, b) => {
            for x in [a, b] {
                if let Some(gx) = acc(g, recs, x) {
                    gx.iter_mut().zip(gy).for_each(|(o, d)| *o += d);
                }
            }
        }
        &Op::AddRow(a, r) => {
            if let Some(ga) = acc(g, recs, a) {
                ga.iter_mut().zip(gy).for_each(|(o, d)| *o += d);
            }
            let cols = y.cols();
            if let Some(gr) = acc(g, recs, r) {
                for row in gy.chunks(cols) {
                    gr.iter_mut().zip(row).for_each(|(o, d)| *o += d);
                }
            }
        }
        &Op::MulRow(a, r) => {
            let (av, rv) = (&recs[a].value, &recs[r].value);
            let cols = y.cols();
            if let Some(ga) = acc(g, recs, a) {
                for (grow, dyrow) in ga.chunks_mut(cols).zip(gy.chunks(cols)) {
                    for ((o, d), s) in grow.iter_mut().zip(dyrow).zip(rv.data()) {
                        *o += d * s;
                    }
                }
            }
            if let Some(gr) = acc(g, recs, r) {
                for (xrow, dyrow) in av.data().chunks(cols).zip(gy.chunks(cols)) {
                    for ((o, d), x) in gr.iter_mut().zip(dyrow).zip(xrow) {
                        *o += d * x;
                    }
                }
            }
        }
        &Op::Mul(a, b) => {
            let (av, bv) = (recs[a].value.data(), recs[b].value.data());
            if let Some(ga) = acc(g, recs, a) {
                for ((o, d), w) in ga.iter_mut().zip(gy).zip(bv) {
                    *o += d * w;
                }
            }
            if let Some(gb) = acc(g, recs, b) {
                for ((o, d), w) in gb.iter_mut().zip(gy).zip(av) {
                    *o += d * w;
                }
            }
        }
        &Op::Scale(a, s) => {
            if let Some(ga) = acc(g, recs, a) {
                ga.iter_mut().zip(gy).for_each(|(o, d)| *o += s * d);
            }
        }
        &Op::Relu(a) => {
            if let Some(ga) = acc(g, recs, a) {
                for ((o, d), yv) in ga.iter_mut().zip(gy).zip(y.data()) {
                    if *yv > 0.0 {
                        *o += d;
                    }
                }
            }
        }
        &Op::Tanh(a) => {
            if let Some(ga) = acc(g, recs, a) {
                for ((o, d), yv) in ga.iter_mut().zip(gy).zip(y.data()) {
                    *o += d * (1.0 - yv * yv);
                }
            }
        }
        &Op::Ln(a) => {
            let xv = recs[a].value.data();
            if let Some(ga) = acc(g, recs, a) {
                for ((o, d), x) in ga.iter_mut().zip(gy).zip(xv) {
                    *o += d / x;
                }
            }
        }
        &Op::Softmax(a) => {
            let cols = y.cols();
            if let Some(ga) = acc(g, recs, a) {
                for ((grow, dyrow), yrow) in ga.chunks_mut(cols).zip(gy.chunks(cols)).zip(y.data().chunks(cols)) {
                    let dot: f64 = dyrow.iter().zip(yrow).map(|(d, p)| d * p).sum();
                    for ((o, d), p) in grow.iter_mut().zip(dyrow).zip(yrow) {
                        *o += p * (d - dot);
                    }
                }
            }
        }
        Op::Standardize(a, inv_std) => {
            let cols = y.cols();
            let nf = cols as f64;
            if let Some(ga) = acc(g, recs, *a) {
                for (((grow, dyrow), yrow), is) in
                    ga.chunks_mut(cols).zip(gy.chunks(cols)).zip(y.data().chunks(cols)).zip(inv_std)
                {
                    let mean_dy = dyrow.iter().sum::<f64>() / nf;
                    let mean_dyy = dyrow.iter().zip(yrow).map(|(d, v)| d * v).sum::<f64>() / nf;
                    for ((o, d), v) in grow.iter_mut().zip(dyrow).zip(yrow) {
                        *o += is * (d - mean_dy - v * mean_dyy);
                    }
                }
            }
        }
        Op::ConcatRows(parts) => {
            let mut off = 0;
            for &p in parts {
                let len = recs[p].value.data().len();
                if let Some(gp) = acc(g, recs, p) {
                    gp.iter_mut().zip(&gy[off..off + len]).for_each(|(o, d)| *o += d);
                }
                off += len;
            }
        }
        Op::ConcatCols(parts) => {
            let cols = y.cols();
            let mut off = 0;
            for &p in parts {
                let pc = recs[p].value.cols();
                if let Some(gp) = acc(g, recs, p) {
                    for (r, grow) in gp.chunks_mut(pc).enumerate() {
                        let src = &gy[r * cols + off..r * cols + off + pc];
                        grow.iter_mut().zip(src).for_each(|(o, d)| *o += d);
                    }
                }
                off += pc;
            }
        }
        Op::SelectRows(a, idx) => {
            let cols = y.cols();
            if let Some(ga) = acc(g, recs, *a) {
                for (k, &r) in idx.iter().enumerate() {
                    let dst = &mut ga[r * cols..(r + 1) * cols];
                    dst.iter_mut().zip(&gy[k * cols..(k + 1) * cols]).for_each(|(o, d)| *o += d);
                }
            }
        }
        &Op::SliceCols(a, start) => {
            let (cols, acols) = (y.cols(), recs[a].value.cols());
            if let Some(ga) = acc(g, recs, a) {
                for (r, dyrow) in gy.chunks(cols).enumerate() {
                    let dst = &mut ga[r * acols + start..r * acols + start + cols];
                    dst.iter_mut().zip(dyrow).for_each(|(o, d)| *o += d);
                }
            }
        }
        &Op::Transpose(a) => {
            let (r, c) = y.shape();
            if let Some(ga) = acc(g, recs, a) {
                for i in 0..r {
                    for j in 0..c {
                        ga[j * r + i] += gy[i * c + j];
                    }
                }
            }
        }
        &Op::Sum(a) => {
            if let Some(ga) = acc(g, recs, a) {
                ga.iter_mut().for_each(|o| *o += gy[0]);
            }
        }
        &Op::Pick(a, flat) => {
            if let Some(ga) = acc(g, recs, a) {
                ga[flat] += gy[0];
            }
        }
    }
}

fn same_tape(a: Var<'_>, b: Var<'_>) -> Result<()> {
    if std::ptr::eq(a.tape, b.tape) {
        Ok(())
    } else {
        Err(NnError::Detached("operands come from different tapes".into()))
    }
}

impl<'t> Var<'t> {
    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    pub fn value(self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.records.borrow(), |r| &*r[self.id].value)
    }

    pub fn shape(self) -> (usize, usize) {
        self.value().shape()
    }

    /// The single value of a 1x1 variable.
    pub fn item(self) -> f64 {
        self.value().data()[0]
    }

    fn live(self) -> bool {
        self.tape.records.borrow()[self.id].live
    }

    fn unary(self, value: Tensor, op: Op) -> Var<'t> {
        let live = self.live();
        self.tape.push(value, op, live)
    }

    fn binary(self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        let live = self.live() || other.live();
        self.tape.push(value, op, live)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        same_tape(self, other)?;
        let out = self.value().matmul(&other.value())?;
        Ok(self.binary(other, out, Op::MatMul(self.id, other.id)))
    }

    /// `self * other^T`.
    pub fn matmul_bt(self, other: Var<'t>) -> Result<Var<'t>> {
        same_tape(self, other)?;
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.cols() != b.cols() {
                return Err(shape(format!("matmul_bt {:?} by {:?}^T", a.shape(), b.shape())));
            }
            let mut out = Tensor::zeros(a.rows(), b.rows());
            gemm_bt(a.data(), b.data(), out.data_mut(), a.rows(), a.cols(), b.rows());
            out
        };
        Ok(self.binary(other, out, Op::MatMulBt(self.id, other.id)))
    }

    fn zip_with(self, other: Var<'t>, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        same_tape(self, other)?;
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape(format!("{what} {:?} and {:?}", a.shape(), b.shape())));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(a.rows(), a.cols(), data)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = self.zip_with(other, "add", |x, y| x + y)?;
        Ok(self.binary(other, out, Op::Add(self.id, other.id)))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = self.zip_with(other, "mul", |x, y| x * y)?;
        Ok(self.binary(other, out, Op::Mul(self.id, other.id)))
    }

    fn row_broadcast(self, row: Var<'t>, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        same_tape(self, row)?;
        let (a, r) = (self.value(), row.value());
        if r.rows() != 1 || r.cols() != a.cols() {
            return Err(shape(format!("{what}: row {:?} against {:?}", r.shape(), a.shape())));
        }
        let mut out = a.clone();
        for orow in out.data_mut().chunks_mut(a.cols()) {
            orow.iter_mut().zip(r.data()).for_each(|(o, v)| *o = f(*o, *v));
        }
        Ok(out)
    }

    /// Adds a 1 x cols row vector to every row.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let out = self.row_broadcast(row, "add_row", |x, y| x + y)?;
        Ok(self.binary(row, out, Op::AddRow(self.id, row.id)))
    }

    /// Multiplies every row elementwise by a 1 x cols row vector.
    pub fn mul_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let out = self.row_broadcast(row, "mul_row", |x, y| x * y)?;
        Ok(self.binary(row, out, Op::MulRow(self.id, row.id)))
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Tensor {
        let a = self.value();
        let data = a.data().iter().map(|&x| f(x)).collect();
        Tensor::new(a.rows(), a.cols(), data).expect("same shape")
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        let out = self.map(|x| x * s);
        self.unary(out, Op::Scale(self.id, s))
    }

    pub fn relu(self) -> Var<'t> {
        let out = self.map(|x| x.max(0.0));
        self.unary(out, Op::Relu(self.id))
    }

    pub fn tanh(self) -> Var<'t> {
        let out = self.map(f64::tanh);
        self.unary(out, Op::Tanh(self.id))
    }

    pub fn ln(self) -> Var<'t> {
        let out = self.map(f64::ln);
        self.unary(out, Op::Ln(self.id))
    }

    pub fn softmax_rows(self) -> Result<Var<'t>> {
        let cols = self.shape().1;
        self.masked_softmax_rows(&vec![true; cols])
    }

    /// Row softmax over the entries where `allowed` is true; the rest get
    /// probability exactly 0. `allowed` has one flag per column (shared by
    /// all rows) or one per entry.
    pub fn masked_softmax_rows(self, allowed: &[bool]) -> Result<Var<'t>> {
        let out = {
            let a = self.value();
            let (rows, cols) = a.shape();
            if allowed.len() != cols && allowed.len() != rows * cols {
                return Err(shape(format!("mask of {} for {rows}x{cols}", allowed.len())));
            }
            let mut out = Tensor::zeros(rows, cols);
            for r in 0..rows {
                let m = if allowed.len() == cols { allowed } else { &allowed[r * cols..(r + 1) * cols] };
                let x = a.row(r);
                if x.iter().zip(m).any(|(v, &ok)| ok && !v.is_finite()) {
                    return Err(NnError::NonFinite(format!("logit in row {r} of a masked softmax")));
                }
                let max = x.iter().zip(m).filter(|(_, &ok)| ok).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    return Err(NnError::Mask(format!("row {r} is fully masked")));
                }
                let o = &mut out.data_mut()[r * cols..(r + 1) * cols];
                let mut z = 0.0;
                for ((ov, xv), &ok) in o.iter_mut().zip(x).zip(m) {
                    if ok {
                        *ov = (xv - max).exp();
                        z += *ov;
                    }
                }
                o.iter_mut().for_each(|v| *v /= z);
            }
            out
        };
        Ok(self.unary(out, Op::Softmax(self.id)))
    }

    /// Per-row standardisation to zero mean and unit variance.
    pub fn standardize(self) -> Var<'t> {
        let (out, inv) = {
            let a = self.value();
            let cols = a.cols();
            let mut out = a.clone();
            let mut inv = Vec::with_capacity(a.rows());
            for row in out.data_mut().chunks_mut(cols) {
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                let is = 1.0 / (var + NORM_EPS).sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) * is);
                inv.push(is);
            }
            (out, inv)
        };
        self.unary(out, Op::Standardize(self.id, inv))
    }

    pub fn transpose(self) -> Var<'t> {
        let out = {
            let a = self.value();
            let (r, c) = a.shape();
            let mut out = Tensor::zeros(c, r);
            for i in 0..r {
                for j in 0..c {
                    out.data_mut()[j * r + i] = a.data()[i * c + j];
                }
            }
            out
        };
        self.unary(out, Op::Transpose(self.id))
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        self.unary(Tensor::scalar(s), Op::Sum(self.id))
    }

    pub fn pick(self, r: usize, c: usize) -> Result<Var<'t>> {
        let (v, flat) = {
            let a = self.value();
            if r >= a.rows() || c >= a.cols() {
                return Err(shape(format!("pick ({r},{c}) from {:?}", a.shape())));
            }
            (a.get(r, c), r * a.cols() + c)
        };
        Ok(self.unary(Tensor::scalar(v), Op::Pick(self.id, flat)))
    }

    pub fn select_rows(self, idx: &[usize]) -> Result<Var<'t>> {
        let out = {
            let a = self.value();
            let cols = a.cols();
            let mut data = Vec::with_capacity(idx.len() * cols);
            for &r in idx {
                if r >= a.rows() {
                    return Err(shape(format!("row {r} of {:?}", a.shape())));
                }
                data.extend_from_slice(a.row(r));
            }
            Tensor::new(idx.len(), cols, data)?
        };
        Ok(self.unary(out, Op::SelectRows(self.id, idx.to_vec())))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(self, start: usize, len: usize) -> Result<Var<'t>> {
        let out = {
            let a = self.value();
            if start + len > a.cols() {
                return Err(shape(format!("columns {start}..{} of {:?}", start + len, a.shape())));
            }
            let data = a.data().chunks(a.cols()).flat_map(|row| row[start..start + len].iter().copied()).collect();
            Tensor::new(a.rows(), len, data)?
        };
        Ok(self.unary(out, Op::SliceCols(self.id, start)))
    }

    /// `-ln p[0, target]` for a 1 x k probability row.
    pub fn cross_entropy(self, target: usize) -> Result<Var<'t>> {
        let p = {
            let a = self.value();
            if a.rows() != 1 || target >= a.cols() {
                return Err(shape(format!("cross_entropy target {target} on {:?}", a.shape())));
            }
            a.get(0, target)
        };
        if p <= 0.0 {
            return Err(NnError::Mask(format!("target {target} has probability 0")));
        }
        Ok(self.pick(0, target)?.ln().scale(-1.0))
    }
}

fn concat_check<'t>(parts: &[Var<'t>]) -> Result<&'t Tape> {
    let first = parts.first().ok_or_else(|| shape("concatenating nothing"))?;
    for p in parts {
        same_tape(*first, *p)?;
    }
    Ok(first.tape)
}

pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = concat_check(parts)?;
    let (out, live) = {
        let cols = parts[0].shape().1;
        let mut data = Vec::new();
        let mut rows = 0;
        let mut live = false;
        for p in parts {
            let v = p.value();
            if v.cols() != cols {
                return Err(shape(format!("concat_rows: {} columns against {cols}", v.cols())));
            }
            data.extend_from_slice(v.data());
            rows += v.rows();
            live |= p.live();
        }
        (Tensor::new(rows, cols, data)?, live)
    };
    Ok(tape.push(out, Op::ConcatRows(parts.iter().map(|p| p.id).collect()), live))
}

pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = concat_check(parts)?;
    let (out, live) = {
        let rows = parts[0].shape().0;
        let vals: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value()).collect();
        if let Some(v) = vals.iter().find(|v| v.rows() != rows) {
            return Err(shape(format!("concat_cols: {} rows against {rows}", v.rows())));
        }
        let cols: usize = vals.iter().map(|v| v.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for v in &vals {
                data.extend_from_slice(v.row(r));
            }
        }
        drop(vals);
        (Tensor::new(rows, cols, data)?, parts.iter().any(|p| p.live()))
    };
    Ok(tape.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), live))
}
