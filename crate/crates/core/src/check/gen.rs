//! Random inputs and random well-typed composites.

use rand::Rng;

use crate::autodiff::prims::{self, Activation, LEAKY_RELU_SLOPE};
use crate::autodiff::Expr;
use crate::lens::Port;
use crate::rig::{Rig, RigValue};
use crate::tensor::{Shape, Tensor};

pub const MAX_DEPTH: usize = 5;
pub const MAX_WIDTH: usize = 8;

pub fn real_tensor(rng: &mut impl Rng, shape: &Shape, lo: f64, hi: f64) -> Tensor {
    let v = (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::from_reals(shape.clone(), v).expect("sized")
}

pub fn bit_tensor(rng: &mut impl Rng, shape: &Shape) -> Tensor {
    Tensor::from_bits(
        shape.clone(),
        (0..shape.numel()).map(|_| rng.gen::<bool>()).collect(),
    )
    .expect("sized")
}

/// One random value per wire: uniform in `[-1, 1)` over the reals, fair
/// bits over Z2.
pub fn random_values(rng: &mut impl Rng, port: &Port) -> Vec<Tensor> {
    port.shapes()
        .iter()
        .map(|s| match port.rig() {
            Rig::Real => real_tensor(rng, s, -1.0, 1.0),
            Rig::Z2 => bit_tensor(rng, s),
        })
        .collect()
}

fn width(rng: &mut impl Rng) -> usize {
    rng.gen_range(1..=MAX_WIDTH)
}

fn with_const(e: Expr, input: &Port, c: Tensor) -> Expr {
    let k = Expr::constant(input.rig(), vec![c]).expect("typed");
    Expr::seq(&Expr::par(&Expr::id(input), &k).expect("typed"), &e).expect("typed")
}

fn real_leaf(rng: &mut impl Rng, n_in: usize, n_out: usize) -> Expr {
    let v = Port::vector(Rig::Real, n_in);
    if n_in != n_out || rng.gen_bool(0.25) {
        let b = 1.0 / (n_in as f64).sqrt();
        let w = real_tensor(rng, &Shape::matrix(n_in, n_out), -b, b);
        return with_const(prims::linear(Rig::Real, n_in, n_out).expect("dims"), &v, w);
    }
    let shape = Shape::vector(n_in);
    match rng.gen_range(0..9) {
        0 => prims::activation(Activation::Sigmoid, shape),
        1 => prims::activation(Activation::Tanh, shape),
        2 => prims::activation(Activation::Gelu, shape),
        3 => prims::activation(Activation::LeakyRelu(LEAKY_RELU_SLOPE), shape),
        4 => prims::activation(Activation::Relu, shape),
        5 => prims::softargmax(Rig::Real, n_in),
        6 => prims::scale(RigValue::Real(rng.gen_range(-2.0..2.0)), shape),
        7 => prims::neg(Rig::Real, shape),
        _ => {
            let b = real_tensor(rng, &shape, -1.0, 1.0);
            Ok(with_const(
                prims::bias(Rig::Real, shape).expect("shape"),
                &v,
                b,
            ))
        }
    }
    .expect("valid leaf")
}

fn z2_leaf(rng: &mut impl Rng, n_in: usize, n_out: usize) -> Expr {
    let v = Port::vector(Rig::Z2, n_in);
    if n_in != n_out || rng.gen_bool(0.25) {
        let w = bit_tensor(rng, &Shape::matrix(n_in, n_out));
        return with_const(prims::linear(Rig::Z2, n_in, n_out).expect("dims"), &v, w);
    }
    let shape = Shape::vector(n_in);
    match rng.gen_range(0..4) {
        0 => with_const(prims::xor(shape.clone()), &v, bit_tensor(rng, &shape)),
        1 => with_const(prims::and(shape.clone()), &v, bit_tensor(rng, &shape)),
        2 => prims::not(shape),
        _ => with_const(
            prims::bias(Rig::Z2, shape.clone()).expect("shape"),
            &v,
            bit_tensor(rng, &shape),
        ),
    }
}

/// A random composite `R^n_in -> R^n_out` (or over Z2) of nesting depth at
/// most `depth`, with every intermediate width at most [`MAX_WIDTH`].
pub fn composite(rng: &mut impl Rng, rig: Rig, n_in: usize, n_out: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rig {
            Rig::Real => real_leaf(rng, n_in, n_out),
            Rig::Z2 => z2_leaf(rng, n_in, n_out),
        };
    }
    let out = Port::vector(rig, n_out);
    match rng.gen_range(0..3) {
        0 => {
            let k = width(rng);
            let f = composite(rng, rig, n_in, k, depth - 1);
            let g = composite(rng, rig, k, n_out, depth - 1);
            Expr::seq(&f, &g).expect("typed")
        }
        pick => {
            // <f, g> followed by + or pointwise product
            let f = composite(rng, rig, n_in, n_out, depth - 1);
            let g = composite(rng, rig, n_in, n_out, depth - 1);
            let join = if pick == 1 {
                Expr::sum(&out)
            } else {
                prims::mul(rig, Shape::vector(n_out)).expect("shape")
            };
            Expr::chain(&[pairing(&f, &g), join]).expect("typed")
        }
    }
}

/// A random composite with random input and output widths.
pub fn random_composite(rng: &mut impl Rng, rig: Rig) -> Expr {
    let (a, b) = (width(rng), width(rng));
    composite(rng, rig, a, b, MAX_DEPTH)
}

/// `<f, g> = copy ; (f x g)`.
pub fn pairing(f: &Expr, g: &Expr) -> Expr {
    Expr::seq(&Expr::copy(f.dom()), &Expr::par(f, g).expect("typed")).expect("same domain")
}

/// `f + g = <f, g> ; sum`.
pub fn sum_of(f: &Expr, g: &Expr) -> Expr {
    Expr::seq(&pairing(f, g), &Expr::sum(f.cod())).expect("same codomain")
}
