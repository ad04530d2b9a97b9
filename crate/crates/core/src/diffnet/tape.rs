//! Reverse-mode differentiation over 2-D matrices.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! value. Nodes are appended in evaluation order, so the node list is always
//! a valid topological order and [`Tape::backward`] only has to walk it once
//! in reverse. Rows index samples and columns index features throughout.

use std::collections::HashMap;

use ndarray::{s, Axis};

use super::params::{Mat, ParamCollection, ParamGrads};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ParamKey {
    collection: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamKey),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    /// n×m plus a 1×m row broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Softplus(Var),
    Min(Var, Var),
    Sum(Var),
    Mean(Var),
    /// n×m → n×1
    SumCols(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    /// 1×m → n×m
    RepeatRows(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Mat,
    /// Some parameter leaf is upstream of this node.
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_same(a: &Mat, b: &Mat, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Mat) -> Var {
        let t = |v: &Var| self.nodes[v.0].tracked;
        let tracked = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::AddRow(a, b) | Op::Min(a, b) => {
                t(a) || t(b)
            }
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::Softplus(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumCols(a)
            | Op::SliceCols(a, _, _)
            | Op::RepeatRows(a) => t(a),
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.iter().any(t),
        };
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(Op::Constant, value)
    }

    /// A leaf bound to entry `index` of `params`; gradients flow back to it.
    pub fn param(&mut self, params: &ParamCollection, index: usize) -> Var {
        let key = ParamKey {
            collection: params.id(),
            index,
        };
        self.push(Op::Param(key), params.value(index).clone())
    }

    /// Reads a parameter as a constant (stop-gradient).
    pub fn param_detached(&mut self, params: &ParamCollection, index: usize) -> Var {
        self.constant(params.value(index).clone())
    }

    /// Re-records the value of `v` as a constant leaf.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same(self.value(a), self.value(b), "add")?;
        let v = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same(self.value(a), self.value(b), "sub")?;
        let v = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same(self.value(a), self.value(b), "mul")?;
        let v = self.value(a) * self.value(b);
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, k) = self.shape(a);
        let (k2, _) = self.shape(b);
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: {:?} · {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, m) = self.shape(a);
        if self.shape(row) != (1, m) {
            return Err(Error::Shape(format!(
                "add_row: {:?} + {:?}",
                self.shape(a),
                self.shape(row)
            )));
        }
        let v = self.value(a) + self.value(row);
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(Op::Scale(a, k), v)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(Op::AddScalar(a), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.push(Op::Log(a), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(Op::Square(a), v)
    }

    /// `ln(1 + eˣ)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(softplus);
        self.push(Op::Softplus(a), v)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same(self.value(a), self.value(b), "min")?;
        let mut v = self.value(a).clone();
        v.zip_mut_with(self.value(b), |x, &y| *x = x.min(y));
        Ok(self.push(Op::Min(a, b), v))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Mat::from_elem((1, 1), self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Mat::from_elem((1, 1), x.sum() / x.len() as f64);
        self.push(Op::Mean(a), v)
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::SumCols(a), v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        if parts.iter().any(|p| self.shape(*p).0 != rows) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.shape(parts[0]).1;
        if parts.iter().any(|p| self.shape(*p).1 != cols) {
            return Err(Error::Shape("concat_rows: column counts differ".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), v))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (_, m) = self.shape(a);
        if start >= end || end > m {
            return Err(Error::Shape(format!("slice_cols {start}..{end} of {m}")));
        }
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        Ok(self.push(Op::SliceCols(a, start, end), v))
    }

    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (r, m) = self.shape(a);
        if r != 1 {
            return Err(Error::Shape(format!("repeat_rows needs a row, got {r}×{m}")));
        }
        let row = self.value(a).row(0).to_owned();
        let v = row
            .broadcast((n, m))
            .expect("row broadcast")
            .to_owned();
        Ok(self.push(Op::RepeatRows(a), v))
    }

    /// Gradients of a scalar node with respect to every parameter leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Mat::ones((1, 1)));
        let mut out: HashMap<ParamKey, Mat> = HashMap::new();

        let tracked = |v: Var| self.nodes[v.0].tracked;
        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(key) => match out.get_mut(key) {
                    Some(existing) => *existing += &g,
                    None => {
                        out.insert(*key, g);
                    }
                },
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, -&g);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    if tracked(*a) {
                        acc(&mut grads, *a, &g * self.value(*b));
                    }
                    if tracked(*b) {
                        acc(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::MatMul(a, b) => {
                    if tracked(*a) {
                        acc(&mut grads, *a, g.dot(&self.value(*b).t()));
                    }
                    if tracked(*b) {
                        acc(&mut grads, *b, self.value(*a).t().dot(&g));
                    }
                }
                Op::AddRow(a, row) => {
                    if tracked(*row) {
                        acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if tracked(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g * *k),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Tanh(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(&node.value, |d, &y| *d *= 1.0 - y * y);
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Exp(a) => acc(&mut grads, *a, g * &node.value),
                Op::Log(a) => acc(&mut grads, *a, g / self.value(*a)),
                Op::Square(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| *d *= 2.0 * x);
                    acc(&mut grads, *a, ga);
                }
                Op::Softplus(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |d, &x| *d *= sigmoid(x));
                    acc(&mut grads, *a, ga);
                }
                Op::Min(a, b) => {
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    let mut ga = g.clone();
                    let mut gb = g;
                    ndarray::Zip::from(&mut ga)
                        .and(&mut gb)
                        .and(va)
                        .and(vb)
                        .for_each(|da, db, &x, &y| {
                            if x <= y {
                                *db = 0.0;
                            } else {
                                *da = 0.0;
                            }
                        });
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Sum(a) => {
                    let ga = Mat::from_elem(self.shape(*a), g[[0, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::Mean(a) => {
                    let shape = self.shape(*a);
                    let n = (shape.0 * shape.1) as f64;
                    acc(&mut grads, *a, Mat::from_elem(shape, g[[0, 0]] / n));
                }
                Op::SumCols(a) => {
                    let shape = self.shape(*a);
                    let ga = g.broadcast(shape).expect("column broadcast").to_owned();
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        if tracked(*p) {
                            acc(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        if tracked(*p) {
                            acc(&mut grads, *p, g.slice(s![start..start + h, ..]).to_owned());
                        }
                        start += h;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Mat::zeros(self.shape(*a));
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::RepeatRows(a) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, gr);
                }
            }
        }
        Ok(Gradients { by_param: out })
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of [`Tape::backward`], keyed by parameter leaf.
#[derive(Debug, Default)]
pub struct Gradients {
    by_param: HashMap<ParamKey, Mat>,
}

impl Gradients {
    /// Gradients congruent to `params`; entries the loss does not reach are zero.
    pub fn wrt(&self, params: &ParamCollection) -> ParamGrads {
        let grads = params
            .values()
            .iter()
            .enumerate()
            .map(|(index, v)| {
                let key = ParamKey {
                    collection: params.id(),
                    index,
                };
                self.by_param
                    .get(&key)
                    .cloned()
                    .unwrap_or_else(|| Mat::zeros(v.dim()))
            })
            .collect();
        ParamGrads(grads)
    }

    /// True if any entry of `params` was reached by the loss.
    pub fn touches(&self, params: &ParamCollection) -> bool {
        self.by_param.keys().any(|k| k.collection == params.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn collection(values: &[(&str, Mat)]) -> ParamCollection {
        let mut p = ParamCollection::new();
        for (n, v) in values {
            p.insert(*n, v.clone()).unwrap();
        }
        p
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let p = collection(&[("a", array![[1.0, -2.0], [3.0, 0.5]]), ("b", array![[7.0]])]);
        let mut t = Tape::new();
        let a = t.param(&p, 0);
        let b = t.param(&p, 1);
        let sa = t.sum(a);
        let sb = t.sum(b);
        let loss = t.add(sa, sb).unwrap();
        let g = t.backward(loss).unwrap().wrt(&p);
        assert!(g.flatten().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = collection(&[("a", array![[1.0, 2.0]])]);
        let mut t = Tape::new();
        let _a = t.param(&p, 0);
        let c = t.constant(array![[3.0]]);
        let g = t.backward(c).unwrap().wrt(&p);
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let p = collection(&[("a", array![[1.0, 2.0]])]);
        let mut t = Tape::new();
        let a = t.param(&p, 0);
        assert!(matches!(t.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn detached_params_get_no_gradient() {
        let p = collection(&[("a", array![[1.5]])]);
        let mut t = Tape::new();
        let a = t.param_detached(&p, 0);
        let sq = t.square(a);
        let loss = t.sum(sq);
        let grads = t.backward(loss).unwrap();
        assert!(!grads.touches(&p));
        assert_eq!(grads.wrt(&p).flatten(), vec![0.0]);
    }

    #[test]
    fn shared_leaf_accumulates() {
        // loss = a·a + a, d/da = 2a + 1
        let p = collection(&[("a", array![[2.0]])]);
        let mut t = Tape::new();
        let a = t.param(&p, 0);
        let a2 = t.param(&p, 0);
        let m = t.mul(a, a2).unwrap();
        let s = t.add(m, a).unwrap();
        let loss = t.sum(s);
        assert_eq!(t.backward(loss).unwrap().wrt(&p).flatten(), vec![5.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut t = Tape::new();
        let a = t.constant(Mat::zeros((2, 3)));
        let b = t.constant(Mat::zeros((2, 2)));
        assert!(t.add(a, b).is_err());
        assert!(t.matmul(a, b).is_err());
        assert!(t.slice_cols(a, 2, 5).is_err());
    }

    #[test]
    fn min_routes_gradient_to_smaller() {
        let p = collection(&[("a", array![[1.0, 5.0]]), ("b", array![[2.0, 3.0]])]);
        let mut t = Tape::new();
        let a = t.param(&p, 0);
        let b = t.param(&p, 1);
        let m = t.min(a, b).unwrap();
        let loss = t.sum(m);
        let g = t.backward(loss).unwrap().wrt(&p);
        assert_eq!(g.0[0], array![[1.0, 0.0]]);
        assert_eq!(g.0[1], array![[0.0, 1.0]]);
    }
}
