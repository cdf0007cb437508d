//! Forward-mode evaluation over Z2[e] with e^2 = 0.
//!
//! Pushing `x + e u` through a circuit yields `f(x) + e J(x) u`, which gives
//! the Jacobian column by column using forward maps only. The reverse
//! derivative is then checked against it row by row.

use crate::autodiff::{Expr, Node};
use crate::error::{Error, Result};
use crate::lens::Port;
use crate::rig::Rig;
use crate::tensor::Tensor;

/// Primitives that are linear in all their wires jointly.
const LINEAR: &[&str] = &[
    "bias",
    "neg",
    "scale",
    "identity",
    "transpose",
    "reduce_sum",
    "xor_loss",
];
/// Primitives that are bilinear in their two wires.
const BILINEAR: &[&str] = &["linear", "mul", "matmul"];

fn add_all(a: &[Tensor], b: &[Tensor]) -> Result<Vec<Tensor>> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

/// `(f(x), J(x) u)`.
pub fn jvp(e: &Expr, x: &[Tensor], u: &[Tensor]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    match e.node() {
        Node::Prim(p) => {
            let f = |v: &[Tensor]| p.lens().forward(v);
            let y = f(x)?;
            let name = p.name();
            let dy = if LINEAR.contains(&name) {
                f(u)?
            } else if BILINEAR.contains(&name) {
                let left = f(&[u[0].clone(), x[1].clone()])?;
                let right = f(&[x[0].clone(), u[1].clone()])?;
                add_all(&left, &right)?
            } else {
                return Err(Error::Argument(format!(
                    "no Z2[e] rule for primitive {name}"
                )));
            };
            Ok((y, dy))
        }
        Node::Seq(a, b) => {
            let (y, dy) = jvp(a, x, u)?;
            jvp(b, &y, &dy)
        }
        Node::Par(a, b) => {
            let k = a.dom().arity();
            let (mut y, mut dy) = jvp(a, &x[..k], &u[..k])?;
            let (y2, dy2) = jvp(b, &x[k..], &u[k..])?;
            y.extend(y2);
            dy.extend(dy2);
            Ok((y, dy))
        }
        Node::Copy(n) => Ok((
            x.iter().cycle().take(n * x.len()).cloned().collect(),
            u.iter().cycle().take(n * u.len()).cloned().collect(),
        )),
        Node::Sum(n) => {
            let k = e.cod().arity();
            let (mut y, mut dy) = (e.cod().zeros(), e.cod().zeros());
            for i in 0..*n {
                y = add_all(&y, &x[i * k..(i + 1) * k])?;
                dy = add_all(&dy, &u[i * k..(i + 1) * k])?;
            }
            Ok((y, dy))
        }
        Node::Delete => Ok((Vec::new(), Vec::new())),
        Node::Const(c) => Ok((c.clone(), e.cod().zeros())),
        Node::Id => Ok((x.to_vec(), u.to_vec())),
        Node::Proj(i) => Ok((vec![x[*i].clone()], vec![u[*i].clone()])),
        Node::Perm(p) => Ok((
            p.iter().map(|&i| x[i].clone()).collect(),
            p.iter().map(|&i| u[i].clone()).collect(),
        )),
    }
}

/// Number of bits in a port.
pub fn bits(port: &Port) -> usize {
    port.numel()
}

/// The value of `port` whose bits, read wire by wire, spell `mask`.
pub fn from_mask(port: &Port, mask: u64) -> Vec<Tensor> {
    let mut at = 0;
    port.shapes()
        .iter()
        .map(|s| {
            let v = (0..s.numel()).map(|i| mask >> (at + i) & 1 == 1).collect();
            at += s.numel();
            Tensor::from_bits(s.clone(), v).expect("sized")
        })
        .collect()
}

pub fn flatten(values: &[Tensor]) -> Vec<bool> {
    values
        .iter()
        .flat_map(|t| t.bits().expect("Z2").to_vec())
        .collect()
}

/// Compares the reverse derivative of `e` with the Jacobian from [`jvp`] at
/// every input. Returns the number of inputs checked, or a description of
/// the first disagreement.
pub fn check_exhaustive(e: &Expr) -> Result<std::result::Result<usize, String>> {
    let (dom, cod) = (e.dom(), e.cod());
    if dom.rig() != Rig::Z2 {
        return Err(Error::Argument(
            "exhaustive check needs a Z2 circuit".into(),
        ));
    }
    let n = bits(dom);
    let m = bits(cod);
    if n > 16 {
        return Err(Error::Argument(format!(
            "{n} input bits is too many to enumerate"
        )));
    }
    let lens = crate::autodiff::differentiate(e);
    for mask in 0..(1u64 << n) {
        let x = from_mask(dom, mask);
        let cols = (0..n)
            .map(|i| Ok(flatten(&jvp(e, &x, &from_mask(dom, 1 << i))?.1)))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..m {
            let row: Vec<bool> = cols.iter().map(|c| c[j]).collect();
            let got = flatten(&lens.backward(&x, &from_mask(cod, 1 << j))?);
            if got != row {
                return Ok(Err(format!(
                    "{e}: input mask {mask:#b}, output bit {j}: R gives {got:?}, J row is {row:?}"
                )));
            }
        }
    }
    Ok(Ok(1usize << n))
}
