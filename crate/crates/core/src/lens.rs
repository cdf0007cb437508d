//! Lenses: pairs of a forward map `X -> Y` and a backward map
//! `X x Y' -> X'` that is additive in its second argument.
//!
//! A [`Lens`] is a small tree whose leaves are primitive function values and
//! whose inner nodes are sequential and parallel composition. Keeping the
//! tree around (rather than fusing closures) is what lets one lens be run in
//! two operational regimes:
//!
//! * [`ComposeMode::Memoised`] runs every constituent forward once and keeps
//!   the input of each constituent as its residual for the backward pass.
//! * [`ComposeMode::Checkpointed`] stores only the composite input and
//!   recomputes `f.fwd` inside the backward pass, exactly as in the textbook
//!   lens composition `bwd(x, z') = f.bwd(x, g.bwd(f.fwd(x), z'))`.
//!
//! Ports are finite products of tensor objects: a value at a port is a
//! `Vec<Tensor>`, parallel composition concatenates the lists and the unit
//! port is the empty list. Tangent shapes always equal the forward shapes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fault;
use crate::rig::Rig;
use crate::tensor::{Shape, Tensor};

/// An object of the base category: a rig and a list of tensor shapes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Port {
    rig: Rig,
    shapes: Vec<Shape>,
}

impl Port {
    pub fn new(rig: Rig, shapes: impl Into<Vec<Shape>>) -> Port {
        Port {
            rig,
            shapes: shapes.into(),
        }
    }

    pub fn unit(rig: Rig) -> Port {
        Port::new(rig, Vec::new())
    }

    pub fn single(rig: Rig, shape: Shape) -> Port {
        Port::new(rig, vec![shape])
    }

    pub fn vector(rig: Rig, n: usize) -> Port {
        Port::single(rig, Shape::vector(n))
    }

    pub fn scalar(rig: Rig) -> Port {
        Port::single(rig, Shape::scalar())
    }

    pub fn rig(&self) -> Rig {
        self.rig
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    /// Number of tensor wires.
    pub fn arity(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_unit(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Total number of scalar entries across all wires.
    pub fn numel(&self) -> usize {
        self.shapes.iter().map(Shape::numel).sum()
    }

    pub fn tensor(&self, other: &Port) -> Result<Port> {
        if self.rig != other.rig {
            return Err(Error::RigMismatch {
                op: "port product",
                left: self.rig,
                right: other.rig,
            });
        }
        let mut shapes = self.shapes.clone();
        shapes.extend(other.shapes.iter().cloned());
        Ok(Port::new(self.rig, shapes))
    }

    /// `n`-fold product of this port with itself.
    pub fn power(&self, n: usize) -> Port {
        let shapes = (0..n)
            .flat_map(|_| self.shapes.iter().cloned())
            .collect::<Vec<_>>();
        Port::new(self.rig, shapes)
    }

    /// Wires `start..end` as a port.
    pub fn slice(&self, start: usize, end: usize) -> Port {
        Port::new(self.rig, self.shapes[start..end].to_vec())
    }

    pub fn zeros(&self) -> Vec<Tensor> {
        self.shapes
            .iter()
            .map(|s| Tensor::zeros(self.rig, s.clone()))
            .collect()
    }

    /// Checks that `values` inhabit this port.
    pub fn check(&self, values: &[Tensor], what: &str) -> Result<()> {
        if values.len() != self.shapes.len() {
            return Err(Error::Shape {
                op: "port",
                detail: format!(
                    "{what}: expected {} tensors for {self}, got {}",
                    self.shapes.len(),
                    values.len()
                ),
            });
        }
        for (i, (v, s)) in values.iter().zip(&self.shapes).enumerate() {
            if v.rig() != self.rig {
                return Err(Error::RigMismatch {
                    op: "port",
                    left: self.rig,
                    right: v.rig(),
                });
            }
            if v.shape() != s {
                return Err(Error::Shape {
                    op: "port",
                    detail: format!("{what}: wire {i} expected {s}, got {}", v.shape()),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<", self.rig)?;
        for (i, s) in self.shapes.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ">")
    }
}

pub type ForwardFn = Arc<dyn Fn(&[Tensor]) -> Result<Vec<Tensor>> + Send + Sync>;
pub type BackwardFn = Arc<dyn Fn(&[Tensor], &[Tensor]) -> Result<Vec<Tensor>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ComposeMode {
    Checkpointed,
    #[default]
    Memoised,
}

impl fmt::Display for ComposeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComposeMode::Checkpointed => f.write_str("checkpointed"),
            ComposeMode::Memoised => f.write_str("memoised"),
        }
    }
}

/// Per-evaluation instrumentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub fwd_calls: BTreeMap<String, usize>,
    pub bwd_calls: BTreeMap<String, usize>,
    /// Largest number of residual tensors held on the tape at once.
    pub peak_residuals: usize,
    live: usize,
}

impl EvalReport {
    pub fn fwd(&self, label: &str) -> usize {
        self.fwd_calls.get(label).copied().unwrap_or(0)
    }

    pub fn bwd(&self, label: &str) -> usize {
        self.bwd_calls.get(label).copied().unwrap_or(0)
    }

    fn hold(&mut self, n: usize) {
        self.live += n;
        self.peak_residuals = self.peak_residuals.max(self.live);
    }

    fn count(map: &mut BTreeMap<String, usize>, label: &str) {
        match map.get_mut(label) {
            Some(c) => *c += 1,
            None => {
                map.insert(label.to_string(), 1);
            }
        }
    }

    fn release(&mut self, n: usize) {
        self.live -= n;
    }
}

struct Prim {
    label: String,
    fwd: ForwardFn,
    bwd: BackwardFn,
}

enum Node {
    Prim(Prim),
    Seq {
        first: Lens,
        second: Lens,
        mode: ComposeMode,
    },
    Par {
        left: Lens,
        right: Lens,
    },
}

#[derive(Clone)]
pub struct Lens {
    dom: Port,
    cod: Port,
    additive: bool,
    node: Arc<Node>,
}

impl fmt::Debug for Lens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lens({} -> {}: {})", self.dom, self.cod, self.describe())
    }
}

/// Residuals saved by [`Lens::forward_tape`] for [`Lens::backward_tape`].
pub struct Tape(TapeNode);

enum TapeNode {
    Input(Vec<Tensor>),
    Pair(Box<TapeNode>, Box<TapeNode>),
}

/// Output of a full forward and backward evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub output: Vec<Tensor>,
    pub input_grad: Vec<Tensor>,
    pub report: EvalReport,
}

fn split_at(values: &[Tensor], at: usize) -> (&[Tensor], &[Tensor]) {
    values.split_at(at)
}

impl Lens {
    /// A primitive lens from a pair of function values. The backward map is
    /// assumed additive; see [`Lens::non_additive`].
    pub fn primitive(
        label: impl Into<String>,
        dom: Port,
        cod: Port,
        fwd: ForwardFn,
        bwd: BackwardFn,
    ) -> Lens {
        Lens {
            dom,
            cod,
            additive: true,
            node: Arc::new(Node::Prim(Prim {
                label: label.into(),
                fwd,
                bwd,
            })),
        }
    }

    /// Marks a lens whose backward map is not additive in its second
    /// argument (adaptive optimisers, learning-rate costates).
    pub fn non_additive(mut self) -> Lens {
        self.additive = false;
        self
    }

    pub fn dom(&self) -> &Port {
        &self.dom
    }

    pub fn cod(&self) -> &Port {
        &self.cod
    }

    pub fn is_additive(&self) -> bool {
        self.additive
    }

    /// Labels of the primitive leaves, left to right.
    pub fn leaves(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<String>) {
        match &*self.node {
            Node::Prim(p) => out.push(p.label.clone()),
            Node::Seq { first, second, .. } => {
                first.collect_leaves(out);
                second.collect_leaves(out);
            }
            Node::Par { left, right } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    fn describe(&self) -> String {
        match &*self.node {
            Node::Prim(p) => p.label.clone(),
            Node::Seq {
                first,
                second,
                mode,
            } => {
                format!("({} ;{mode} {})", first.describe(), second.describe())
            }
            Node::Par { left, right } => format!("({} x {})", left.describe(), right.describe()),
        }
    }

    pub fn forward(&self, x: &[Tensor]) -> Result<Vec<Tensor>> {
        self.dom.check(x, "lens input")?;
        self.forward_in(x, &mut EvalReport::default())
    }

    pub fn backward(&self, x: &[Tensor], dy: &[Tensor]) -> Result<Vec<Tensor>> {
        self.dom.check(x, "lens input")?;
        self.cod.check(dy, "lens cotangent")?;
        self.backward_in(x, dy, &mut EvalReport::default())
    }

    /// One forward pass followed by one backward pass, as a learner would
    /// run it, with call counters.
    pub fn evaluate(&self, x: &[Tensor], dy: &[Tensor]) -> Result<Evaluation> {
        let mut report = EvalReport::default();
        let (output, tape) = self.forward_tape(x, &mut report)?;
        let input_grad = self.backward_tape(tape, dy, &mut report)?;
        Ok(Evaluation {
            output,
            input_grad,
            report,
        })
    }

    /// Forward pass that records residuals according to each composite's
    /// mode.
    pub fn forward_tape(
        &self,
        x: &[Tensor],
        report: &mut EvalReport,
    ) -> Result<(Vec<Tensor>, Tape)> {
        self.dom.check(x, "lens input")?;
        let (y, t) = self.forward_tape_in(x, report)?;
        Ok((y, Tape(t)))
    }

    pub fn backward_tape(
        &self,
        tape: Tape,
        dy: &[Tensor],
        report: &mut EvalReport,
    ) -> Result<Vec<Tensor>> {
        self.cod.check(dy, "lens cotangent")?;
        self.backward_tape_in(tape.0, dy, report)
    }

    fn forward_in(&self, x: &[Tensor], report: &mut EvalReport) -> Result<Vec<Tensor>> {
        match &*self.node {
            Node::Prim(p) => {
                EvalReport::count(&mut report.fwd_calls, &p.label);
                let y = (p.fwd)(x)?;
                self.cod.check(&y, &p.label)?;
                Ok(y)
            }
            Node::Seq { first, second, .. } => {
                let y = first.forward_in(x, report)?;
                second.forward_in(&y, report)
            }
            Node::Par { left, right } => {
                let (a, b) = split_at(x, left.dom.arity());
                let mut y = left.forward_in(a, report)?;
                y.extend(right.forward_in(b, report)?);
                Ok(y)
            }
        }
    }

    fn backward_in(
        &self,
        x: &[Tensor],
        dy: &[Tensor],
        report: &mut EvalReport,
    ) -> Result<Vec<Tensor>> {
        match &*self.node {
            Node::Prim(p) => {
                EvalReport::count(&mut report.bwd_calls, &p.label);
                let mut dx = (p.bwd)(x, dy)?;
                self.dom.check(&dx, &p.label)?;
                if fault::is_flipped(&p.label) {
                    dx = dx.iter().map(Tensor::neg).collect();
                }
                Ok(dx)
            }
            Node::Seq {
                first,
                second,
                mode: ComposeMode::Checkpointed,
            } => {
                let y = first.forward_in(x, report)?;
                let dyy = second.backward_in(&y, dy, report)?;
                first.backward_in(x, &dyy, report)
            }
            Node::Seq {
                mode: ComposeMode::Memoised,
                ..
            } => {
                let (_, tape) = self.forward_tape_in(x, report)?;
                self.backward_tape_in(tape, dy, report)
            }
            Node::Par { left, right } => {
                let (xa, xb) = split_at(x, left.dom.arity());
                let (da, db) = split_at(dy, left.cod.arity());
                let mut dx = left.backward_in(xa, da, report)?;
                dx.extend(right.backward_in(xb, db, report)?);
                Ok(dx)
            }
        }
    }

    fn forward_tape_in(
        &self,
        x: &[Tensor],
        report: &mut EvalReport,
    ) -> Result<(Vec<Tensor>, TapeNode)> {
        match &*self.node {
            Node::Prim(_)
            | Node::Seq {
                mode: ComposeMode::Checkpointed,
                ..
            } => {
                let y = self.forward_in(x, report)?;
                report.hold(x.len());
                Ok((y, TapeNode::Input(x.to_vec())))
            }
            Node::Seq { first, second, .. } => {
                let (y, t1) = first.forward_tape_in(x, report)?;
                let (z, t2) = second.forward_tape_in(&y, report)?;
                Ok((z, TapeNode::Pair(Box::new(t1), Box::new(t2))))
            }
            Node::Par { left, right } => {
                let (a, b) = split_at(x, left.dom.arity());
                let (mut y, t1) = left.forward_tape_in(a, report)?;
                let (y2, t2) = right.forward_tape_in(b, report)?;
                y.extend(y2);
                Ok((y, TapeNode::Pair(Box::new(t1), Box::new(t2))))
            }
        }
    }

    fn backward_tape_in(
        &self,
        tape: TapeNode,
        dy: &[Tensor],
        report: &mut EvalReport,
    ) -> Result<Vec<Tensor>> {
        match (&*self.node, tape) {
            (_, TapeNode::Input(x)) => {
                let dx = self.backward_in(&x, dy, report)?;
                report.release(x.len());
                Ok(dx)
            }
            (Node::Seq { first, second, .. }, TapeNode::Pair(t1, t2)) => {
                let dyy = second.backward_tape_in(*t2, dy, report)?;
                first.backward_tape_in(*t1, &dyy, report)
            }
            (Node::Par { left, right }, TapeNode::Pair(t1, t2)) => {
                let (da, db) = split_at(dy, left.cod.arity());
                let mut dx = left.backward_tape_in(*t1, da, report)?;
                dx.extend(right.backward_tape_in(*t2, db, report)?);
                Ok(dx)
            }
            (Node::Prim(_), TapeNode::Pair(..)) => unreachable!("tape does not match lens"),
        }
    }
}

/// The identity lens: `fwd = id`, `bwd(x, a) = a`.
pub fn identity_lens(p: &Port) -> Lens {
    Lens::primitive(
        "id",
        p.clone(),
        p.clone(),
        Arc::new(|x| Ok(x.to_vec())),
        Arc::new(|_, dy| Ok(dy.to_vec())),
    )
}

/// Sequential composition `f ; g`.
pub fn compose_lens(f: &Lens, g: &Lens, mode: ComposeMode) -> Result<Lens> {
    if f.cod != g.dom {
        return Err(Error::Composition {
            left: f.cod.to_string(),
            right: g.dom.to_string(),
        });
    }
    Ok(Lens {
        dom: f.dom.clone(),
        cod: g.cod.clone(),
        additive: f.additive && g.additive,
        node: Arc::new(Node::Seq {
            first: f.clone(),
            second: g.clone(),
            mode,
        }),
    })
}

/// Right-nested composite `l0 ; (l1 ; (... ; ln))`.
pub fn compose_chain(lenses: &[Lens], mode: ComposeMode) -> Result<Lens> {
    let (last, init) = lenses
        .split_last()
        .ok_or_else(|| Error::Argument("cannot compose an empty chain".into()))?;
    init.iter()
        .rev()
        .try_fold(last.clone(), |acc, l| compose_lens(l, &acc, mode))
}

/// Parallel (monoidal) product.
pub fn par_lens(f: &Lens, g: &Lens) -> Result<Lens> {
    Ok(Lens {
        dom: f.dom.tensor(&g.dom)?,
        cod: f.cod.tensor(&g.cod)?,
        additive: f.additive && g.additive,
        node: Arc::new(Node::Par {
            left: f.clone(),
            right: g.clone(),
        }),
    })
}

/// Parallel product of a nonempty list of lenses.
pub fn par_all(lenses: &[Lens]) -> Result<Lens> {
    let (first, rest) = lenses
        .split_first()
        .ok_or_else(|| Error::Argument("cannot take the product of no lenses".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, l| par_lens(&acc, l))
}

/// The forward part of a lens as a plain function value.
pub fn forget_backward(f: &Lens) -> ForwardFn {
    let f = f.clone();
    Arc::new(move |x| f.forward(x))
}

fn add_all(a: &[Tensor], b: &[Tensor]) -> Result<Vec<Tensor>> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

/// `copy: X -> X x X`, backward `(x, (a, b)) -> a + b`.
pub fn copy_lens(p: &Port) -> Lens {
    copy_n_lens(p, 2)
}

/// `n`-fold copy `X -> X^n`; the backward pass sums the `n` cotangents.
pub fn copy_n_lens(p: &Port, n: usize) -> Lens {
    let k = p.arity();
    Lens::primitive(
        "copy",
        p.clone(),
        p.power(n),
        Arc::new(move |x| Ok((0..n).flat_map(|_| x.iter().cloned()).collect())),
        {
            let p = p.clone();
            Arc::new(move |_, dy| {
                dy.chunks(k.max(1))
                    .take(if k == 0 { 0 } else { n })
                    .try_fold(p.zeros(), |acc, chunk| add_all(&acc, chunk))
            })
        },
    )
}

/// `sum: X x X -> X`, backward `(x, a) -> (a, a)`.
pub fn sum_lens(p: &Port) -> Lens {
    sum_n_lens(p, 2)
}

pub fn sum_n_lens(p: &Port, n: usize) -> Lens {
    let k = p.arity();
    let zero = p.zeros();
    Lens::primitive(
        "sum",
        p.power(n),
        p.clone(),
        Arc::new(move |x| {
            x.chunks(k.max(1))
                .take(if k == 0 { 0 } else { n })
                .try_fold(zero.clone(), |acc, chunk| add_all(&acc, chunk))
        }),
        Arc::new(move |_, dy| Ok((0..n).flat_map(|_| dy.iter().cloned()).collect())),
    )
}

/// `delete: X -> 1`, backward is the zero gradient.
pub fn delete_lens(p: &Port) -> Lens {
    let zeros = p.zeros();
    Lens::primitive(
        "delete",
        p.clone(),
        Port::unit(p.rig()),
        Arc::new(|_| Ok(Vec::new())),
        Arc::new(move |_, _| Ok(zeros.clone())),
    )
}

/// A state `1 -> X` picking out `values`; its backward pass is trivially
/// zero on the unit port.
pub fn constant_lens(rig: Rig, values: Vec<Tensor>) -> Result<Lens> {
    let cod = Port::new(
        rig,
        values.iter().map(|t| t.shape().clone()).collect::<Vec<_>>(),
    );
    cod.check(&values, "constant")?;
    Ok(Lens::primitive(
        "const",
        Port::unit(rig),
        cod,
        Arc::new(move |_| Ok(values.clone())),
        Arc::new(|_, _| Ok(Vec::new())),
    ))
}

/// Pointwise multiplication `X x X -> X`, backward
/// `((x, y), a) -> (a * y, a * x)`.
pub fn mul_lens(p: &Port) -> Lens {
    let k = p.arity();
    Lens::primitive(
        "mul",
        p.power(2),
        p.clone(),
        Arc::new(move |x| {
            let (a, b) = x.split_at(k);
            a.iter().zip(b).map(|(u, v)| u.hadamard(v)).collect()
        }),
        Arc::new(move |x, dy| {
            let (a, b) = x.split_at(k);
            let mut out = dy
                .iter()
                .zip(b)
                .map(|(d, v)| d.hadamard(v))
                .collect::<Result<Vec<_>>>()?;
            for (d, u) in dy.iter().zip(a) {
                out.push(d.hadamard(u)?);
            }
            Ok(out)
        }),
    )
}

/// Wire permutation: output wire `i` is input wire `perm[i]`.
pub fn permute_lens(p: &Port, perm: &[usize]) -> Result<Lens> {
    let n = p.arity();
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Argument(format!(
            "permutation of length {} for a port of arity {n}",
            perm.len()
        )));
    }
    for &i in perm {
        if i >= n || seen[i] {
            return Err(Error::Argument(format!("{perm:?} is not a permutation")));
        }
        seen[i] = true;
    }
    let cod = Port::new(
        p.rig(),
        perm.iter()
            .map(|&i| p.shapes()[i].clone())
            .collect::<Vec<_>>(),
    );
    let fwd_perm = perm.to_vec();
    let bwd_perm = perm.to_vec();
    Ok(Lens::primitive(
        "perm",
        p.clone(),
        cod,
        Arc::new(move |x| Ok(fwd_perm.iter().map(|&i| x[i].clone()).collect())),
        Arc::new(move |x, dy| {
            let mut dx: Vec<Option<Tensor>> = vec![None; x.len()];
            for (o, &i) in bwd_perm.iter().enumerate() {
                dx[i] = Some(dy[o].clone());
            }
            Ok(dx.into_iter().map(Option::unwrap).collect())
        }),
    ))
}

/// Projection onto wire `index`; backward places the cotangent at `index`
/// and zeros elsewhere.
pub fn project_lens(p: &Port, index: usize) -> Result<Lens> {
    if index >= p.arity() {
        return Err(Error::Argument(format!(
            "projection {index} out of range for {p}"
        )));
    }
    let zeros = p.zeros();
    Ok(Lens::primitive(
        "proj",
        p.clone(),
        p.slice(index, index + 1),
        Arc::new(move |x| Ok(vec![x[index].clone()])),
        Arc::new(move |_, dy| {
            let mut dx = zeros.clone();
            dx[index] = dy[0].clone();
            Ok(dx)
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::RigValue;

    fn real1() -> Port {
        Port::single(Rig::Real, Shape::scalar())
    }

    fn s(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    fn double(label: &str) -> Lens {
        Lens::primitive(
            label,
            real1(),
            real1(),
            Arc::new(|x| Ok(vec![x[0].scale(RigValue::Real(2.0))?])),
            Arc::new(|_, dy| Ok(vec![dy[0].scale(RigValue::Real(2.0))?])),
        )
    }

    fn square(label: &str) -> Lens {
        Lens::primitive(
            label,
            real1(),
            real1(),
            Arc::new(|x| Ok(vec![x[0].hadamard(&x[0])?])),
            Arc::new(|x, dy| Ok(vec![x[0].hadamard(&dy[0])?.scale(RigValue::Real(2.0))?])),
        )
    }

    fn val(t: &[Tensor]) -> f64 {
        t[0].reals().unwrap()[0]
    }

    #[test]
    fn identity_examples() {
        let p = Port::vector(Rig::Real, 2);
        let id = identity_lens(&p);
        let x = vec![Tensor::vector(vec![1.0, 2.0])];
        assert_eq!(id.forward(&x).unwrap(), x);
        let a = vec![Tensor::vector(vec![5.0, 7.0])];
        assert_eq!(id.backward(&x, &a).unwrap(), a);
        assert_eq!(id.backward(&x, &p.zeros()).unwrap(), p.zeros());
    }

    #[test]
    fn double_then_square_matches_finite_differences() {
        let f = |x: f64| (2.0 * x) * (2.0 * x);
        let h = 1e-5;
        let fd = (f(3.0 + h) - f(3.0 - h)) / (2.0 * h);
        assert!((fd - 24.0).abs() < 1e-6);
        for mode in [ComposeMode::Checkpointed, ComposeMode::Memoised] {
            let c = compose_lens(&double("d"), &square("s"), mode).unwrap();
            assert_eq!(val(&c.forward(&[s(3.0)]).unwrap()), 36.0);
            assert_eq!(val(&c.backward(&[s(3.0)], &[s(1.0)]).unwrap()), 24.0);
        }
    }

    #[test]
    fn unit_law() {
        let f = square("s");
        for mode in [ComposeMode::Checkpointed, ComposeMode::Memoised] {
            let c = compose_lens(&identity_lens(&real1()), &f, mode).unwrap();
            for x in [-2.0, 0.5, 3.0] {
                assert_eq!(c.forward(&[s(x)]).unwrap(), f.forward(&[s(x)]).unwrap());
                assert_eq!(
                    c.backward(&[s(x)], &[s(1.5)]).unwrap(),
                    f.backward(&[s(x)], &[s(1.5)]).unwrap()
                );
            }
        }
    }

    #[test]
    fn counters_for_three_chain() {
        let chain = [double("a"), square("b"), double("c")];
        let ck = compose_chain(&chain, ComposeMode::Checkpointed).unwrap();
        let r = ck.evaluate(&[s(1.0)], &[s(1.0)]).unwrap().report;
        assert_eq!((r.fwd("a"), r.fwd("b"), r.fwd("c")), (2, 2, 1));
        let mm = compose_chain(&chain, ComposeMode::Memoised).unwrap();
        let r2 = mm.evaluate(&[s(1.0)], &[s(1.0)]).unwrap();
        assert_eq!(
            (r2.report.fwd("a"), r2.report.fwd("b"), r2.report.fwd("c")),
            (1, 1, 1)
        );
        assert_eq!(r2.report.peak_residuals, 3);
        let e = ck.evaluate(&[s(1.0)], &[s(1.0)]).unwrap();
        assert_eq!(e.output, r2.output);
        assert_eq!(e.input_grad, r2.input_grad);
        assert_eq!(e.report.peak_residuals, 1);
    }

    #[test]
    fn composition_port_mismatch() {
        let v2 = identity_lens(&Port::vector(Rig::Real, 2));
        let err = compose_lens(&double("d"), &v2, ComposeMode::Memoised).unwrap_err();
        match err {
            Error::Composition { left, right } => {
                assert!(left.contains("[]"));
                assert!(right.contains("[2]"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn par_examples() {
        let p = real1();
        let idid = par_lens(&identity_lens(&p), &identity_lens(&p)).unwrap();
        let x = vec![s(1.0), s(2.0)];
        assert_eq!(idid.forward(&x).unwrap(), x);
        assert_eq!(
            idid.backward(&x, &[s(3.0), s(4.0)]).unwrap(),
            vec![s(3.0), s(4.0)]
        );

        let ds = par_lens(&double("d"), &square("s")).unwrap();
        assert_eq!(ds.forward(&x).unwrap(), vec![s(2.0), s(4.0)]);
        // d/dx 2x = 2, d/dy y^2 at 2 = 4
        assert_eq!(
            ds.backward(&x, &[s(1.0), s(1.0)]).unwrap(),
            vec![s(2.0), s(4.0)]
        );

        let z2 = identity_lens(&Port::scalar(Rig::Z2));
        assert!(matches!(par_lens(&ds, &z2), Err(Error::RigMismatch { .. })));
    }

    #[test]
    fn forget_is_functorial() {
        let (f, g) = (double("d"), square("s"));
        let c = compose_lens(&f, &g, ComposeMode::Memoised).unwrap();
        let (ff, fg, fc) = (
            forget_backward(&f),
            forget_backward(&g),
            forget_backward(&c),
        );
        let fi = forget_backward(&identity_lens(&real1()));
        for x in [-1.0, 0.0, 2.5] {
            assert_eq!(fc(&[s(x)]).unwrap(), fg(&ff(&[s(x)]).unwrap()).unwrap());
            assert_eq!(fi(&[s(x)]).unwrap(), vec![s(x)]);
        }
        let p = par_lens(&f, &g).unwrap();
        let fp = forget_backward(&p);
        let out = fp(&[s(1.0), s(3.0)]).unwrap();
        assert_eq!(
            out,
            vec![
                ff(&[s(1.0)]).unwrap()[0].clone(),
                fg(&[s(3.0)]).unwrap()[0].clone()
            ]
        );
    }

    #[test]
    fn structural_examples() {
        let p = Port::vector(Rig::Real, 2);
        let x = vec![Tensor::vector(vec![0.0, 0.0])];
        let dx = copy_lens(&p)
            .backward(
                &x,
                &[
                    Tensor::vector(vec![1.0, 2.0]),
                    Tensor::vector(vec![3.0, 4.0]),
                ],
            )
            .unwrap();
        assert_eq!(dx, vec![Tensor::vector(vec![4.0, 6.0])]);

        let sc = real1();
        let m = mul_lens(&sc);
        assert_eq!(m.forward(&[s(2.0), s(5.0)]).unwrap(), vec![s(10.0)]);
        assert_eq!(
            m.backward(&[s(2.0), s(5.0)], &[s(1.0)]).unwrap(),
            vec![s(5.0), s(2.0)]
        );

        let x = vec![Tensor::vector(vec![3.0, -1.0])];
        assert_eq!(delete_lens(&p).backward(&x, &[]).unwrap(), p.zeros());

        let sum = sum_lens(&p);
        let a = Tensor::vector(vec![1.0, 2.0]);
        assert_eq!(
            sum.forward(&[a.clone(), Tensor::vector(vec![3.0, 4.0])])
                .unwrap(),
            vec![Tensor::vector(vec![4.0, 6.0])]
        );
        assert_eq!(
            sum.backward(&[a.clone(), a.clone()], std::slice::from_ref(&a))
                .unwrap(),
            vec![a.clone(), a]
        );

        let c = constant_lens(Rig::Real, vec![s(7.0)]).unwrap();
        assert_eq!(c.forward(&[]).unwrap(), vec![s(7.0)]);
        assert!(c.backward(&[], &[s(1.0)]).unwrap().is_empty());
    }

    #[test]
    fn permutation_and_projection() {
        let p = Port::new(Rig::Real, vec![Shape::scalar(), Shape::vector(2)]);
        let sw = permute_lens(&p, &[1, 0]).unwrap();
        let x = vec![s(1.0), Tensor::vector(vec![2.0, 3.0])];
        let y = sw.forward(&x).unwrap();
        assert_eq!(y, vec![x[1].clone(), x[0].clone()]);
        assert_eq!(sw.backward(&x, &y).unwrap(), x);
        assert!(permute_lens(&p, &[0, 0]).is_err());

        let pr = project_lens(&p, 0).unwrap();
        assert_eq!(pr.forward(&x).unwrap(), vec![s(1.0)]);
        assert_eq!(
            pr.backward(&x, &[s(5.0)]).unwrap(),
            vec![s(5.0), Tensor::vector(vec![0.0, 0.0])]
        );
    }

    #[test]
    fn non_additive_marker_propagates() {
        let f = double("d").non_additive();
        let c = compose_lens(&f, &square("s"), ComposeMode::Memoised).unwrap();
        assert!(!c.is_additive());
        assert!(par_lens(&square("s"), &square("t")).unwrap().is_additive());
    }
}
