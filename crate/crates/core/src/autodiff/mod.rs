//! Morphism expressions and the reverse-derivative functor.
//!
//! An [`Expr`] is a typed combinator tree over the primitive catalogue in
//! [`prims`]. [`differentiate`] maps it to a [`Lens`] by structural
//! recursion: sequential composition goes to lens composition, products to
//! lens products and each primitive to its hand-written reverse derivative.
//! The chain rule is nothing more than the `Seq` case of that recursion.
//! [`evaluate`] is the plain forward semantics and never touches a lens.

pub mod prims;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lens::{self, ComposeMode, Lens, Port};
use crate::rig::Rig;
use crate::tensor::Tensor;

/// A named primitive together with its reverse derivative.
pub struct PrimSpec {
    name: String,
    attrs: Vec<String>,
    rigs: &'static [Rig],
    lens: Lens,
}

impl PrimSpec {
    /// `lens` carries the forward map and the reverse derivative; its label
    /// must be `name`.
    pub fn new(
        name: impl Into<String>,
        attrs: Vec<String>,
        rigs: &'static [Rig],
        lens: Lens,
    ) -> Result<PrimSpec> {
        let name = name.into();
        if !rigs.contains(&lens.dom().rig()) {
            return Err(Error::RigSupport {
                prim: name,
                rig: lens.dom().rig(),
            });
        }
        Ok(PrimSpec {
            name,
            attrs,
            rigs,
            lens,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rigs(&self) -> &'static [Rig] {
        self.rigs
    }

    pub fn dom(&self) -> &Port {
        self.lens.dom()
    }

    pub fn cod(&self) -> &Port {
        self.lens.cod()
    }

    pub fn lens(&self) -> &Lens {
        &self.lens
    }
}

pub enum Node {
    Prim(Arc<PrimSpec>),
    Seq(Expr, Expr),
    Par(Expr, Expr),
    /// `n`-fold copy of a port.
    Copy(usize),
    /// `n`-fold sum into a port.
    Sum(usize),
    Delete,
    Const(Vec<Tensor>),
    Id,
    /// Projection onto one wire.
    Proj(usize),
    /// Output wire `i` is input wire `perm[i]`.
    Perm(Vec<usize>),
}

/// A well-typed morphism of the base category.
#[derive(Clone)]
pub struct Expr {
    dom: Port,
    cod: Port,
    node: Arc<Node>,
}

impl Expr {
    fn new(dom: Port, cod: Port, node: Node) -> Expr {
        Expr {
            dom,
            cod,
            node: Arc::new(node),
        }
    }

    pub fn prim(spec: PrimSpec) -> Expr {
        let (dom, cod) = (spec.dom().clone(), spec.cod().clone());
        Expr::new(dom, cod, Node::Prim(Arc::new(spec)))
    }

    pub fn seq(first: &Expr, second: &Expr) -> Result<Expr> {
        if first.cod != second.dom {
            return Err(Error::Type {
                path: format!("(seq {first} {second})"),
                detail: format!(
                    "codomain {} of the left operand does not match domain {} of the right",
                    first.cod, second.dom
                ),
            });
        }
        Ok(Expr::new(
            first.dom.clone(),
            second.cod.clone(),
            Node::Seq(first.clone(), second.clone()),
        ))
    }

    /// Right-nested sequential composite of a nonempty list.
    pub fn chain(exprs: &[Expr]) -> Result<Expr> {
        let (last, init) = exprs
            .split_last()
            .ok_or_else(|| Error::Argument("empty chain".into()))?;
        init.iter()
            .rev()
            .try_fold(last.clone(), |acc, e| Expr::seq(e, &acc))
    }

    pub fn par(left: &Expr, right: &Expr) -> Result<Expr> {
        let wrap = |e: Error| Error::Type {
            path: format!("(par {left} {right})"),
            detail: e.to_string(),
        };
        Ok(Expr::new(
            left.dom.tensor(&right.dom).map_err(wrap)?,
            left.cod.tensor(&right.cod).map_err(wrap)?,
            Node::Par(left.clone(), right.clone()),
        ))
    }

    /// Product of a nonempty list.
    pub fn par_all(exprs: &[Expr]) -> Result<Expr> {
        let (first, rest) = exprs
            .split_first()
            .ok_or_else(|| Error::Argument("empty product".into()))?;
        rest.iter()
            .try_fold(first.clone(), |acc, e| Expr::par(&acc, e))
    }

    pub fn id(p: &Port) -> Expr {
        Expr::new(p.clone(), p.clone(), Node::Id)
    }

    pub fn copy(p: &Port) -> Expr {
        Expr::copy_n(p, 2)
    }

    pub fn copy_n(p: &Port, n: usize) -> Expr {
        Expr::new(p.clone(), p.power(n), Node::Copy(n))
    }

    pub fn sum(p: &Port) -> Expr {
        Expr::sum_n(p, 2)
    }

    pub fn sum_n(p: &Port, n: usize) -> Expr {
        Expr::new(p.power(n), p.clone(), Node::Sum(n))
    }

    pub fn delete(p: &Port) -> Expr {
        Expr::new(p.clone(), Port::unit(p.rig()), Node::Delete)
    }

    pub fn constant(rig: Rig, values: Vec<Tensor>) -> Result<Expr> {
        let cod = Port::new(
            rig,
            values.iter().map(|t| t.shape().clone()).collect::<Vec<_>>(),
        );
        cod.check(&values, "const").map_err(|e| Error::Type {
            path: "(const)".into(),
            detail: e.to_string(),
        })?;
        Ok(Expr::new(Port::unit(rig), cod, Node::Const(values)))
    }

    pub fn proj(p: &Port, index: usize) -> Result<Expr> {
        if index >= p.arity() {
            return Err(Error::Type {
                path: format!("(proj {index})"),
                detail: format!("index out of range for {p}"),
            });
        }
        Ok(Expr::new(
            p.clone(),
            p.slice(index, index + 1),
            Node::Proj(index),
        ))
    }

    pub fn perm(p: &Port, perm: &[usize]) -> Result<Expr> {
        // Reuse the lens-level validation.
        let l = lens::permute_lens(p, perm).map_err(|e| Error::Type {
            path: format!("(perm {perm:?})"),
            detail: e.to_string(),
        })?;
        Ok(Expr::new(
            p.clone(),
            l.cod().clone(),
            Node::Perm(perm.to_vec()),
        ))
    }

    pub fn dom(&self) -> &Port {
        &self.dom
    }

    pub fn cod(&self) -> &Port {
        &self.cod
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match &*self.node {
            Node::Seq(a, b) | Node::Par(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }

    /// Nesting depth of `Seq`/`Par` nodes.
    pub fn depth(&self) -> usize {
        match &*self.node {
            Node::Seq(a, b) | Node::Par(a, b) => 1 + a.depth().max(b.depth()),
            _ => 0,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Prim(p) => {
                write!(f, "({}", p.name)?;
                for a in &p.attrs {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Node::Seq(a, b) => write!(f, "(seq {a} {b})"),
            Node::Par(a, b) => write!(f, "(par {a} {b})"),
            Node::Copy(n) => write!(f, "(copy {} {n})", self.dom),
            Node::Sum(n) => write!(f, "(sum {} {n})", self.cod),
            Node::Delete => write!(f, "(delete {})", self.dom),
            Node::Const(_) => write!(f, "(const {})", self.cod),
            Node::Id => write!(f, "(id {})", self.dom),
            Node::Proj(i) => write!(f, "(proj {i})"),
            Node::Perm(p) => write!(f, "(perm {p:?})"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}: {} -> {}", self.dom, self.cod)
    }
}

fn add_blocks(acc: Vec<Tensor>, block: &[Tensor]) -> Result<Vec<Tensor>> {
    acc.iter().zip(block).map(|(a, b)| a.add(b)).collect()
}

/// Plain forward evaluation.
pub fn evaluate(e: &Expr, x: &[Tensor]) -> Result<Vec<Tensor>> {
    e.dom.check(x, "evaluate")?;
    eval_in(e, x)
}

fn eval_in(e: &Expr, x: &[Tensor]) -> Result<Vec<Tensor>> {
    match &*e.node {
        Node::Prim(p) => p.lens.forward(x),
        Node::Seq(a, b) => eval_in(b, &eval_in(a, x)?),
        Node::Par(a, b) => {
            let (xa, xb) = x.split_at(a.dom.arity());
            let mut y = eval_in(a, xa)?;
            y.extend(eval_in(b, xb)?);
            Ok(y)
        }
        Node::Copy(n) => Ok((0..*n).flat_map(|_| x.iter().cloned()).collect()),
        Node::Sum(n) => {
            let k = e.cod.arity();
            let mut acc = e.cod.zeros();
            for i in 0..*n {
                acc = add_blocks(acc, &x[i * k..(i + 1) * k])?;
            }
            Ok(acc)
        }
        Node::Delete => Ok(Vec::new()),
        Node::Const(v) => Ok(v.clone()),
        Node::Id => Ok(x.to_vec()),
        Node::Proj(i) => Ok(vec![x[*i].clone()]),
        Node::Perm(p) => Ok(p.iter().map(|&i| x[i].clone()).collect()),
    }
}

/// The reverse-derivative functor with memoised composition.
pub fn differentiate(e: &Expr) -> Lens {
    differentiate_with(e, ComposeMode::Memoised)
}

/// The reverse-derivative functor; every `Seq` becomes a lens composite in
/// `mode`.
pub fn differentiate_with(e: &Expr, mode: ComposeMode) -> Lens {
    // Expressions are typed on construction, so none of the lens
    // constructors below can fail.
    let ok = |r: Result<Lens>| r.expect("well-typed expression");
    match &*e.node {
        Node::Prim(p) => p.lens.clone(),
        Node::Seq(a, b) => ok(lens::compose_lens(
            &differentiate_with(a, mode),
            &differentiate_with(b, mode),
            mode,
        )),
        Node::Par(a, b) => ok(lens::par_lens(
            &differentiate_with(a, mode),
            &differentiate_with(b, mode),
        )),
        Node::Copy(n) => lens::copy_n_lens(&e.dom, *n),
        Node::Sum(n) => lens::sum_n_lens(&e.cod, *n),
        Node::Delete => lens::delete_lens(&e.dom),
        Node::Const(v) => ok(lens::constant_lens(e.cod.rig(), v.clone())),
        Node::Id => lens::identity_lens(&e.dom),
        Node::Proj(i) => ok(lens::project_lens(&e.dom, *i)),
        Node::Perm(p) => ok(lens::permute_lens(&e.dom, p)),
    }
}
