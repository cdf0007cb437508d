//! Losses as parametric morphisms `Y x Y -> L` (the label is the parameter)
//! and learning rates as costates on the scalar payoff.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::autodiff::prims::{self, build, BOTH, REAL};
use crate::autodiff::{evaluate, Expr};
use crate::error::{Error, Result};
use crate::lens::{Lens, Port};
use crate::para::{Init, ParaMorph};
use crate::rig::{Rig, RigValue};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Mse,
    SoftargmaxCrossEntropy,
    Dot,
    Xor,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::SoftargmaxCrossEntropy => "sce",
            LossKind::Dot => "dot",
            LossKind::Xor => "xor",
        }
    }

    pub fn build(self, output: &Port) -> Result<LossFn> {
        match self {
            LossKind::Mse => mse(output),
            LossKind::SoftargmaxCrossEntropy => softargmax_cross_entropy(output),
            LossKind::Dot => dot_loss(output),
            LossKind::Xor => xor_loss(output),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mse" => LossKind::Mse,
            "sce" => LossKind::SoftargmaxCrossEntropy,
            "dot" => LossKind::Dot,
            "xor" => LossKind::Xor,
            other => {
                return Err(Error::Catalogue {
                    kind: "loss",
                    name: other.to_string(),
                })
            }
        })
    }
}

/// A loss on the prediction port: input `y_p`, parameter `y_t`, scalar
/// payoff. Multi-wire ports are reduced wire by wire and summed.
#[derive(Clone, Debug)]
pub struct LossFn {
    kind: LossKind,
    output: Port,
    para: ParaMorph,
}

impl LossFn {
    fn new(kind: LossKind, output: &Port, body: Expr) -> Result<LossFn> {
        let inits = vec![Init::Zeros; output.arity()];
        let para = ParaMorph::new(output.clone(), output.clone(), body, inits)?;
        Ok(LossFn {
            kind,
            output: output.clone(),
            para,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// The prediction port; also the label port.
    pub fn output(&self) -> &Port {
        &self.output
    }

    pub fn payoff(&self) -> Port {
        Port::scalar(self.output.rig())
    }

    pub fn para(&self) -> &ParaMorph {
        &self.para
    }

    pub fn body(&self) -> &Expr {
        self.para.body()
    }

    pub fn value(&self, prediction: &[Tensor], label: &[Tensor]) -> Result<RigValue> {
        let out = evaluate(self.body(), &[prediction, label].concat())?;
        Ok(out[0].get(0))
    }
}

fn scalar_of(rig: Rig, v: RigValue) -> Tensor {
    Tensor::from_values(rig, Shape::scalar(), &[v]).expect("scalar")
}

fn doubled(output: &Port) -> Result<Port> {
    if output.is_unit() {
        return Err(Error::shape("loss", "prediction port is empty"));
    }
    output.tensor(output)
}

/// `1/2 sum (y_p - y_t)^2`; reverse derivative
/// `(a (y_p - y_t), a (y_t - y_p))`.
pub fn mse(output: &Port) -> Result<LossFn> {
    let k = output.arity();
    let body = build(
        "mse",
        vec![output.to_string()],
        REAL,
        doubled(output)?,
        Port::scalar(output.rig()),
        move |x| {
            let mut acc = 0.0;
            for (p, t) in x[..k].iter().zip(&x[k..]) {
                let d = p.sub(t)?;
                acc += d.real_data("mse")?.iter().map(|v| v * v).sum::<f64>();
            }
            Ok(vec![Tensor::scalar(0.5 * acc)])
        },
        move |x, dy| {
            let a = dy[0].get(0);
            let mut grads = Vec::with_capacity(2 * k);
            for (p, t) in x[..k].iter().zip(&x[k..]) {
                grads.push(p.sub(t)?.scale(a)?);
            }
            for (p, t) in x[..k].iter().zip(&x[k..]) {
                grads.push(t.sub(p)?.scale(a)?);
            }
            Ok(grads)
        },
    )?;
    LossFn::new(LossKind::Mse, output, body)
}

/// `y_p . y_t`; reverse derivative `(a y_t, a y_p)`.
pub fn dot_loss(output: &Port) -> Result<LossFn> {
    let k = output.arity();
    let rig = output.rig();
    let body = build(
        "dot",
        vec![output.to_string()],
        REAL,
        doubled(output)?,
        Port::scalar(rig),
        move |x| {
            let mut acc = rig.zero();
            for (p, t) in x[..k].iter().zip(&x[k..]) {
                acc = rig.add(acc, p.dot(t)?)?;
            }
            Ok(vec![scalar_of(rig, acc)])
        },
        move |x, dy| {
            let a = dy[0].get(0);
            let mut grads = Vec::with_capacity(2 * k);
            for t in &x[k..] {
                grads.push(t.scale(a)?);
            }
            for p in &x[..k] {
                grads.push(p.scale(a)?);
            }
            Ok(grads)
        },
    )?;
    LossFn::new(LossKind::Dot, output, body)
}

/// Bitwise XOR of prediction and label, summed (XOR-folded) to one payoff
/// bit. Reverse derivative `(a, a)` broadcast to every bit.
pub fn xor_loss(output: &Port) -> Result<LossFn> {
    if output.rig() != Rig::Z2 {
        return Err(Error::RigSupport {
            prim: "xor_loss".into(),
            rig: output.rig(),
        });
    }
    let k = output.arity();
    let shapes: Vec<Shape> = output.shapes().to_vec();
    let body = build(
        "xor_loss",
        vec![output.to_string()],
        BOTH,
        doubled(output)?,
        Port::scalar(Rig::Z2),
        move |x| {
            let mut acc = false;
            for (p, t) in x[..k].iter().zip(&x[k..]) {
                acc ^= p.add(t)?.sum_all().as_bit().expect("Z2");
            }
            Ok(vec![Tensor::bit(acc)])
        },
        move |_, dy| {
            let a = dy[0].get(0);
            let per: Vec<Tensor> = shapes
                .iter()
                .map(|s| Tensor::ones(Rig::Z2, s.clone()).scale(a))
                .collect::<Result<_>>()?;
            Ok([per.clone(), per].concat())
        },
    )?;
    LossFn::new(LossKind::Xor, output, body)
}

/// One vector wire: `[y_p, y_t] -> 1/2 sum_i s(y_t)_i (y_p_i - log s(y_p)_i)`
/// with `s` the softargmax.
fn sce_wire(rig: Rig, n: usize) -> Result<Expr> {
    let v = Port::vector(rig, n);
    let logits = Expr::chain(&[
        Expr::copy(&v),
        Expr::par(
            &Expr::id(&v),
            &Expr::chain(&[
                prims::softargmax(rig, n)?,
                prims::log(Shape::vector(n))?,
                prims::neg(rig, Shape::vector(n))?,
            ])?,
        )?,
        Expr::sum(&v),
    ])?;
    Expr::chain(&[
        Expr::par(&logits, &prims::softargmax(rig, n)?)?,
        prims::mul(rig, Shape::vector(n))?,
        prims::reduce_sum(rig, Shape::vector(n))?,
        prims::scale(RigValue::Real(0.5), Shape::scalar())?,
    ])
}

/// Softargmax cross-entropy, built from primitives so that its reverse
/// derivative comes out of the differentiation functor. Every wire of the
/// prediction port must be a vector.
pub fn softargmax_cross_entropy(output: &Port) -> Result<LossFn> {
    let rig = output.rig();
    if rig != Rig::Real {
        return Err(Error::RigSupport {
            prim: "softargmax".into(),
            rig,
        });
    }
    let k = output.arity();
    let mut wires = Vec::with_capacity(k);
    for s in output.shapes() {
        if s.rank() != 1 {
            return Err(Error::shape(
                "sce",
                format!("expected vector wires, got {s}"),
            ));
        }
        wires.push(sce_wire(rig, s.dims()[0])?);
    }
    let body = if k == 1 {
        wires.pop().expect("one wire")
    } else {
        // [p_1..p_k, t_1..t_k] -> [p_1, t_1, p_2, t_2, ...]
        let perm: Vec<usize> = (0..k).flat_map(|i| [i, k + i]).collect();
        Expr::chain(&[
            Expr::perm(&doubled(output)?, &perm)?,
            Expr::par_all(&wires)?,
            Expr::sum_n(&Port::scalar(rig), k),
        ])?
    };
    LossFn::new(LossKind::SoftargmaxCrossEntropy, output, body)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateKind {
    Constant(f64),
    Identity,
    Proportional(f64),
}

/// A costate `<L, L'> -> <1, 1>`: on the way back it turns the payoff
/// value into the cotangent that seeds backpropagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    kind: RateKind,
    rig: Rig,
}

pub fn constant_rate(c: f64) -> LearningRate {
    LearningRate {
        kind: RateKind::Constant(c),
        rig: Rig::Real,
    }
}

pub fn identity_rate(rig: Rig) -> LearningRate {
    LearningRate {
        kind: RateKind::Identity,
        rig,
    }
}

pub fn proportional_rate(eps: f64) -> LearningRate {
    LearningRate {
        kind: RateKind::Proportional(eps),
        rig: Rig::Real,
    }
}

impl LearningRate {
    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn rig(&self) -> Rig {
        self.rig
    }

    pub fn payoff(&self) -> Port {
        Port::scalar(self.rig)
    }

    pub fn apply(&self, loss: RigValue) -> Result<RigValue> {
        if loss.rig() != self.rig {
            return Err(Error::RigMismatch {
                op: "learning rate",
                left: self.rig,
                right: loss.rig(),
            });
        }
        match self.kind {
            RateKind::Constant(c) => Ok(RigValue::Real(c)),
            RateKind::Identity => Ok(loss),
            RateKind::Proportional(e) => Rig::Real.mul(RigValue::Real(e), loss),
        }
    }

    /// Multiplies the produced cotangent by `f`. Over Z2 this is only
    /// defined for `f = 1`.
    pub fn scaled(&self, f: f64) -> Result<LearningRate> {
        let kind = match (self.rig, self.kind) {
            (Rig::Z2, k) if f == 1.0 => k,
            (Rig::Z2, _) => {
                return Err(Error::Argument(format!(
                    "cannot scale a Z2 learning rate by {f}"
                )))
            }
            (_, RateKind::Constant(c)) => RateKind::Constant(c * f),
            (_, RateKind::Identity) => RateKind::Proportional(f),
            (_, RateKind::Proportional(e)) => RateKind::Proportional(e * f),
        };
        Ok(LearningRate {
            kind,
            rig: self.rig,
        })
    }

    pub fn costate(&self) -> Lens {
        let rate = *self;
        Lens::primitive(
            "rate",
            self.payoff(),
            Port::unit(self.rig),
            Arc::new(|_| Ok(Vec::new())),
            Arc::new(move |l, _| Ok(vec![scalar_of(rate.rig, rate.apply(l[0].get(0))?)])),
        )
        .non_additive()
    }
}
