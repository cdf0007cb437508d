//! The primitive catalogue. Every entry is a forward map with its reverse
//! derivative written out by hand.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{Expr, PrimSpec};
use crate::error::{Error, Result};
use crate::lens::{self, Lens, Port};
use crate::rig::{Rig, RigValue};
use crate::tensor::{Shape, Tensor};

pub const BOTH: &[Rig] = &[Rig::Real, Rig::Z2];
pub const REAL: &[Rig] = &[Rig::Real];

type Fwd = dyn Fn(&[Tensor]) -> Result<Vec<Tensor>> + Send + Sync;
type Bwd = dyn Fn(&[Tensor], &[Tensor]) -> Result<Vec<Tensor>> + Send + Sync;

pub(crate) fn build(
    name: &str,
    attrs: Vec<String>,
    rigs: &'static [Rig],
    dom: Port,
    cod: Port,
    fwd: impl Fn(&[Tensor]) -> Result<Vec<Tensor>> + Send + Sync + 'static,
    bwd: impl Fn(&[Tensor], &[Tensor]) -> Result<Vec<Tensor>> + Send + Sync + 'static,
) -> Result<Expr> {
    if !rigs.contains(&dom.rig()) {
        return Err(Error::RigSupport {
            prim: name.to_string(),
            rig: dom.rig(),
        });
    }
    let fwd: Arc<Fwd> = Arc::new(fwd);
    let bwd: Arc<Bwd> = Arc::new(bwd);
    let lens = Lens::primitive(name, dom, cod, fwd, bwd);
    Ok(Expr::prim(PrimSpec::new(name, attrs, rigs, lens)?))
}

pub(crate) fn attrs(v: &[usize]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn positive(name: &str, dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Argument(format!(
            "{name}: dimensions must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

/// `eval(X, W) = W^T X` for a vector input `X: [in]` and weights
/// `W: [in x out]`. Reverse derivative: input gradient `W Y'`, weight
/// gradient `X (x) Y'` (same shape as `W`).
pub fn linear(rig: Rig, input: usize, output: usize) -> Result<Expr> {
    positive("linear", &[input, output])?;
    build(
        "linear",
        attrs(&[input, output]),
        BOTH,
        Port::new(
            rig,
            vec![Shape::vector(input), Shape::matrix(input, output)],
        ),
        Port::vector(rig, output),
        move |x| {
            let col = x[0].reshape(Shape::matrix(input, 1))?;
            let y = x[1].transpose()?.matmul(&col)?;
            Ok(vec![y.reshape(Shape::vector(output))?])
        },
        move |x, dy| {
            let dcol = dy[0].reshape(Shape::matrix(output, 1))?;
            let dx = x[1].matmul(&dcol)?.reshape(Shape::vector(input))?;
            let dw = x[0].outer(&dy[0])?;
            Ok(vec![dx, dw])
        },
    )
}

/// Column-batched `eval`: `X: [in x n]`, `W: [in x out]`, output `W^T X`.
pub fn linear_cols(rig: Rig, input: usize, output: usize, n: usize) -> Result<Expr> {
    positive("linear_cols", &[input, output, n])?;
    build(
        "linear",
        attrs(&[input, output, n]),
        BOTH,
        Port::new(
            rig,
            vec![Shape::matrix(input, n), Shape::matrix(input, output)],
        ),
        Port::single(rig, Shape::matrix(output, n)),
        |x| Ok(vec![x[1].transpose()?.matmul(&x[0])?]),
        |x, dy| {
            let dx = x[1].matmul(&dy[0])?;
            let dw = x[0].matmul(&dy[0].transpose()?)?;
            Ok(vec![dx, dw])
        },
    )
}

/// Pointwise `x + b`; reverse derivative is copy.
pub fn bias(rig: Rig, shape: Shape) -> Result<Expr> {
    build(
        "bias",
        attrs(shape.dims()),
        BOTH,
        Port::new(rig, vec![shape.clone(), shape.clone()]),
        Port::single(rig, shape),
        |x| Ok(vec![x[0].add(&x[1])?]),
        |_, dy| Ok(vec![dy[0].clone(), dy[0].clone()]),
    )
}

/// `Z + B` with `Z: [out x n]` and one bias per row broadcast over the `n`
/// columns.
pub fn bias_cols(rig: Rig, out: usize, n: usize) -> Result<Expr> {
    positive("bias_cols", &[out, n])?;
    let ones = Tensor::ones(rig, Shape::matrix(1, n));
    let ones_col = Tensor::ones(rig, Shape::matrix(n, 1));
    build(
        "bias",
        attrs(&[out, n]),
        BOTH,
        Port::new(rig, vec![Shape::matrix(out, n), Shape::vector(out)]),
        Port::single(rig, Shape::matrix(out, n)),
        move |x| {
            let b = x[1].reshape(Shape::matrix(out, 1))?.matmul(&ones)?;
            Ok(vec![x[0].add(&b)?])
        },
        move |_, dy| {
            let db = dy[0].matmul(&ones_col)?.reshape(Shape::vector(out))?;
            Ok(vec![dy[0].clone(), db])
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Gelu,
}

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Gelu => "gelu",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Gelu => x * sigmoid(GELU_K * x),
        }
    }

    /// Pointwise derivative. The kinks of ReLU and leaky ReLU take the left
    /// value at exactly zero.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Gelu => {
                let s = sigmoid(GELU_K * x);
                s + GELU_K * x * s * (1.0 - s)
            }
        }
    }
}

const GELU_K: f64 = 1.702;

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" | "id" => Activation::Identity,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "leaky_relu" => Activation::LeakyRelu(LEAKY_RELU_SLOPE),
            "gelu" => Activation::Gelu,
            _ => {
                return Err(Error::Catalogue {
                    kind: "activation",
                    name: s.to_string(),
                })
            }
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A pointwise activation on any real tensor shape. `Identity` is also
/// available over Z2.
pub fn activation(act: Activation, shape: Shape) -> Result<Expr> {
    activation_over(Rig::Real, act, shape)
}

pub fn activation_over(rig: Rig, act: Activation, shape: Shape) -> Result<Expr> {
    let rigs = if act == Activation::Identity {
        BOTH
    } else {
        REAL
    };
    let name = act.name();
    build(
        name,
        attrs(shape.dims()),
        rigs,
        Port::single(rig, shape.clone()),
        Port::single(rig, shape),
        move |x| {
            if act == Activation::Identity {
                return Ok(x.to_vec());
            }
            Ok(vec![x[0].map_real(name, |v| act.apply(v))?])
        },
        move |x, dy| {
            if act == Activation::Identity {
                return Ok(dy.to_vec());
            }
            let d = x[0].map_real(name, |v| act.derivative(v))?;
            Ok(vec![d.hadamard(&dy[0])?])
        },
    )
}

fn softargmax_slice(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `s ⊙ (v - <s, v> 1)` with `s = softargmax(x)`.
fn softargmax_vjp(x: &[f64], v: &[f64]) -> Vec<f64> {
    let s = softargmax_slice(x);
    let sv: f64 = s.iter().zip(v).map(|(a, b)| a * b).sum();
    s.iter().zip(v).map(|(si, vi)| si * (vi - sv)).collect()
}

/// Row-wise application of a slice transform to a `[rows x cols]` tensor.
fn rowwise(t: &Tensor, cols: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Tensor> {
    let data = t.real_data("softargmax")?;
    let out: Vec<f64> = data.chunks(cols).flat_map(f).collect();
    Tensor::from_reals(t.shape().clone(), out)
}

fn rowwise2(
    t: &Tensor,
    u: &Tensor,
    cols: usize,
    f: impl Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Result<Tensor> {
    let a = t.real_data("softargmax")?;
    let b = u.real_data("softargmax")?;
    let out: Vec<f64> = a
        .chunks(cols)
        .zip(b.chunks(cols))
        .flat_map(|(x, y)| f(x, y))
        .collect();
    Tensor::from_reals(t.shape().clone(), out)
}

/// `softargmax(x)_i = exp(x_i) / sum_j exp(x_j)` on `R^n`.
pub fn softargmax(rig: Rig, n: usize) -> Result<Expr> {
    positive("softargmax", &[n])?;
    build(
        "softargmax",
        attrs(&[n]),
        REAL,
        Port::vector(rig, n),
        Port::vector(rig, n),
        move |x| Ok(vec![rowwise(&x[0], n, softargmax_slice)?]),
        move |x, dy| Ok(vec![rowwise2(&x[0], &dy[0], n, softargmax_vjp)?]),
    )
}

/// Softargmax applied to each row of a `[rows x cols]` matrix.
pub fn softargmax_rows(rig: Rig, rows: usize, cols: usize) -> Result<Expr> {
    positive("softargmax_rows", &[rows, cols])?;
    build(
        "softargmax",
        attrs(&[rows, cols]),
        REAL,
        Port::single(rig, Shape::matrix(rows, cols)),
        Port::single(rig, Shape::matrix(rows, cols)),
        move |x| Ok(vec![rowwise(&x[0], cols, softargmax_slice)?]),
        move |x, dy| Ok(vec![rowwise2(&x[0], &dy[0], cols, softargmax_vjp)?]),
    )
}

/// Matrix product of two inputs `A: [m x k]`, `B: [k x n]`; reverse
/// derivative `(G B^T, A^T G)`.
pub fn matmul(rig: Rig, m: usize, k: usize, n: usize) -> Result<Expr> {
    positive("matmul", &[m, k, n])?;
    build(
        "matmul",
        attrs(&[m, k, n]),
        BOTH,
        Port::new(rig, vec![Shape::matrix(m, k), Shape::matrix(k, n)]),
        Port::single(rig, Shape::matrix(m, n)),
        |x| Ok(vec![x[0].matmul(&x[1])?]),
        |x, dy| {
            Ok(vec![
                dy[0].matmul(&x[1].transpose()?)?,
                x[0].transpose()?.matmul(&dy[0])?,
            ])
        },
    )
}

pub fn transpose(rig: Rig, m: usize, n: usize) -> Result<Expr> {
    build(
        "transpose",
        attrs(&[m, n]),
        BOTH,
        Port::single(rig, Shape::matrix(m, n)),
        Port::single(rig, Shape::matrix(n, m)),
        |x| Ok(vec![x[0].transpose()?]),
        |_, dy| Ok(vec![dy[0].transpose()?]),
    )
}

/// Multiplication by a fixed scalar.
pub fn scale(c: RigValue, shape: Shape) -> Result<Expr> {
    let rig = c.rig();
    build(
        "scale",
        vec![c.to_string()],
        BOTH,
        Port::single(rig, shape.clone()),
        Port::single(rig, shape),
        move |x| Ok(vec![x[0].scale(c)?]),
        move |_, dy| Ok(vec![dy[0].scale(c)?]),
    )
}

/// Additive inverse; the identity over Z2.
pub fn neg(rig: Rig, shape: Shape) -> Result<Expr> {
    build(
        "neg",
        attrs(shape.dims()),
        BOTH,
        Port::single(rig, shape.clone()),
        Port::single(rig, shape),
        |x| Ok(vec![x[0].neg()]),
        |_, dy| Ok(vec![dy[0].neg()]),
    )
}

/// Natural logarithm, pointwise.
pub fn log(shape: Shape) -> Result<Expr> {
    build(
        "log",
        attrs(shape.dims()),
        REAL,
        Port::single(Rig::Real, shape.clone()),
        Port::single(Rig::Real, shape),
        |x| Ok(vec![x[0].map_real("log", f64::ln)?]),
        |x, dy| Ok(vec![dy[0].zip_real(&x[0], "log", |d, v| d / v)?]),
    )
}

/// Sum of all entries into a scalar; reverse derivative broadcasts.
pub fn reduce_sum(rig: Rig, shape: Shape) -> Result<Expr> {
    let ones = Tensor::ones(rig, shape.clone());
    build(
        "reduce_sum",
        attrs(shape.dims()),
        BOTH,
        Port::single(rig, shape.clone()),
        Port::scalar(rig),
        |x| {
            Ok(vec![Tensor::from_values(
                x[0].rig(),
                Shape::scalar(),
                &[x[0].sum_all()],
            )?])
        },
        move |_, dy| Ok(vec![ones.scale(dy[0].get(0))?]),
    )
}

/// Pointwise product of two same-shape tensors (AND over Z2).
pub fn mul(rig: Rig, shape: Shape) -> Result<Expr> {
    let lens = lens::mul_lens(&Port::single(rig, shape.clone()));
    Ok(Expr::prim(PrimSpec::new(
        "mul",
        attrs(shape.dims()),
        BOTH,
        lens,
    )?))
}

/// XOR gate: the rig sum over Z2.
pub fn xor(shape: Shape) -> Expr {
    Expr::sum(&Port::single(Rig::Z2, shape))
}

/// AND gate: the rig product over Z2.
pub fn and(shape: Shape) -> Expr {
    mul(Rig::Z2, shape).expect("mul is defined over Z2")
}

/// NOT gate: XOR with a constant one.
pub fn not(shape: Shape) -> Expr {
    let p = Port::single(Rig::Z2, shape.clone());
    let one = Expr::constant(Rig::Z2, vec![Tensor::ones(Rig::Z2, shape)]).expect("typed");
    Expr::seq(
        &Expr::par(&Expr::id(&p), &one).expect("typed"),
        &Expr::sum(&p),
    )
    .expect("typed")
}
