//! Architecture builders: dense layers, weight-tied recurrences, graph
//! convolutions and attention.

use crate::autodiff::prims::{self, attrs, build, Activation, REAL};
use crate::autodiff::Expr;
use crate::error::{Error, Result};
use crate::lens::Port;
use crate::para::{para_chain, para_seq, reparam, Init, ParaMorph};
use crate::rig::{Rig, RigValue};
use crate::tensor::Shape;

/// `W^T x` with `W: [in x out]`.
pub fn linear(rig: Rig, input: usize, output: usize) -> Result<ParaMorph> {
    ParaMorph::new(
        Port::vector(rig, input),
        Port::single(rig, Shape::matrix(input, output)),
        prims::linear(rig, input, output)?,
        vec![Init::default_for(rig, input)],
    )
}

pub fn bias(rig: Rig, n: usize) -> Result<ParaMorph> {
    if n == 0 {
        return Err(Error::Argument("bias: dimension must be positive".into()));
    }
    ParaMorph::new(
        Port::vector(rig, n),
        Port::vector(rig, n),
        prims::bias(rig, Shape::vector(n))?,
        vec![match rig {
            Rig::Real => Init::Zeros,
            Rig::Z2 => Init::Bits,
        }],
    )
}

pub fn activation(rig: Rig, act: Activation, n: usize) -> Result<ParaMorph> {
    Ok(ParaMorph::lift(&prims::activation_over(
        rig,
        act,
        Shape::vector(n),
    )?))
}

/// `linear ; bias ; activation`.
pub fn dense(rig: Rig, input: usize, output: usize, act: Activation) -> Result<ParaMorph> {
    para_chain(&[
        linear(rig, input, output)?,
        bias(rig, output)?,
        activation(rig, act, output)?,
    ])
}

/// Unrolls `cell : X x H -> H` over `n` time steps into `X^n x H -> H`,
/// with one parameter shared by every step. Inputs arrive as
/// `[x_1, ..., x_n, h_0]`.
pub fn unroll_tied(cell: &ParaMorph, n: usize) -> Result<ParaMorph> {
    if n == 0 {
        return Err(Error::Argument("unroll_tied: at least one step".into()));
    }
    if n == 1 {
        return Ok(cell.clone());
    }
    let (input, hidden, param) = (cell.input(), cell.output(), cell.param());
    let (h, k) = (hidden.arity(), param.arity());
    let a = input
        .arity()
        .checked_sub(h)
        .filter(|&a| input.slice(a, input.arity()) == *hidden)
        .ok_or_else(|| Error::Shape {
            op: "unroll_tied",
            detail: format!("cell input {input} does not end with its output {hidden}"),
        })?;
    let x = input.slice(0, a);
    let mut stages = Vec::with_capacity(2 * n);
    for i in 0..n {
        // wires: [x_i..x_n (r+1 blocks of a), h, p_i..p_n (r+1 blocks of k)]
        let r = n - 1 - i;
        let wires = x.power(r + 1).tensor(hidden)?.tensor(&param.power(r + 1))?;
        let xs_rest = a..a * (r + 1);
        let h_at = a * (r + 1);
        let p_at = h_at + h;
        let perm: Vec<usize> = (0..a)
            .chain(h_at..h_at + h)
            .chain(p_at..p_at + k)
            .chain(xs_rest)
            .chain(p_at + k..p_at + k * (r + 1))
            .collect();
        stages.push(Expr::perm(&wires, &perm)?);
        let rest = x.power(r).tensor(&param.power(r))?;
        stages.push(Expr::par(cell.body(), &Expr::id(&rest))?);
        if r > 0 {
            // [h, x_{i+1}.., p_{i+1}..] -> [x_{i+1}.., h, p_{i+1}..]
            let now = hidden.tensor(&rest)?;
            let perm: Vec<usize> = (h..h + a * r)
                .chain(0..h)
                .chain(h + a * r..h + a * r + k * r)
                .collect();
            stages.push(Expr::perm(&now, &perm)?);
        }
    }
    let body = Expr::chain(&stages)?;
    let untied_input = x.power(n).tensor(hidden)?;
    let untied = ParaMorph::new(
        untied_input,
        param.power(n),
        body,
        cell.inits().iter().copied().cycle().take(k * n).collect(),
    )?;
    reparam(&untied, &Expr::copy_n(param, n), cell.inits().to_vec())
}

/// `act(W^T X A + B)` on node features `X: [in x nodes]` with adjacency
/// `A: [nodes x nodes]`. Inputs `[X, A]`, parameters `[W: in x out, B: out]`
/// where `B` is broadcast over the nodes.
pub fn gcnn_layer(
    rig: Rig,
    nodes: usize,
    in_feat: usize,
    out_feat: usize,
    act: Activation,
) -> Result<ParaMorph> {
    let xs = Shape::matrix(in_feat, nodes);
    let adj = Shape::matrix(nodes, nodes);
    let w = Shape::matrix(in_feat, out_feat);
    let input = Port::new(rig, vec![xs.clone(), adj.clone()]);
    let param = Port::new(rig, vec![w, Shape::vector(out_feat)]);
    let a = Port::single(rig, adj);
    let b = Port::vector(rig, out_feat);
    let body = Expr::chain(&[
        Expr::perm(&input.tensor(&param)?, &[0, 2, 1, 3])?,
        Expr::par_all(&[
            prims::linear_cols(rig, in_feat, out_feat, nodes)?,
            Expr::id(&a),
            Expr::id(&b),
        ])?,
        Expr::par(&prims::matmul(rig, out_feat, nodes, nodes)?, &Expr::id(&b))?,
        prims::bias_cols(rig, out_feat, nodes)?,
        prims::activation_over(rig, act, Shape::matrix(out_feat, nodes))?,
    ])?;
    let bias_init = match rig {
        Rig::Real => Init::Zeros,
        Rig::Z2 => Init::Bits,
    };
    ParaMorph::new(
        input,
        param,
        body,
        vec![Init::default_for(rig, in_feat), bias_init],
    )
}

/// The same layer, passing the adjacency matrix through: `[X, A] -> [Y, A]`.
fn gcnn_context_layer(layer: &ParaMorph) -> Result<ParaMorph> {
    let input = layer.input();
    let x = input.slice(0, 1);
    let a = input.slice(1, 2);
    let param = layer.param();
    let body = Expr::chain(&[
        Expr::par_all(&[Expr::id(&x), Expr::copy(&a), Expr::id(param)])?,
        // [X, A, A, W, B] -> [X, A, W, B, A]
        Expr::perm(&x.tensor(&a.power(2))?.tensor(param)?, &[0, 1, 3, 4, 2])?,
        Expr::par(layer.body(), &Expr::id(&a))?,
    ])?;
    ParaMorph::new(input.clone(), param.clone(), body, layer.inits().to_vec())
}

/// Stacks GCNN layers; the adjacency input is copied into every layer, so
/// the stack still takes a single `[X, A]`.
pub fn gcnn_seq(layers: &[ParaMorph]) -> Result<ParaMorph> {
    let (last, init) = layers
        .split_last()
        .ok_or_else(|| Error::Argument("gcnn_seq: empty layer list".into()))?;
    let mut parts = init
        .iter()
        .map(gcnn_context_layer)
        .collect::<Result<Vec<_>>>()?;
    parts.push(last.clone());
    para_chain(&parts)
}

/// `softargmax(Q K^T / sqrt(key)) V` on `Q, K: [seq x key]`, `V: [seq x val]`.
pub fn attend(rig: Rig, seq: usize, key: usize, val: usize) -> Result<Expr> {
    if rig != Rig::Real {
        return Err(Error::RigSupport {
            prim: "softargmax".into(),
            rig,
        });
    }
    let q = Port::single(rig, Shape::matrix(seq, key));
    let v = Port::single(rig, Shape::matrix(seq, val));
    let scores = Shape::matrix(seq, seq);
    Expr::chain(&[
        Expr::par_all(&[Expr::id(&q), prims::transpose(rig, seq, key)?, Expr::id(&v)])?,
        Expr::par(&prims::matmul(rig, seq, key, seq)?, &Expr::id(&v))?,
        Expr::par(
            &prims::scale(RigValue::Real(1.0 / (key as f64).sqrt()), scores)?,
            &Expr::id(&v),
        )?,
        Expr::par(&prims::softargmax_rows(rig, seq, seq)?, &Expr::id(&v))?,
        prims::matmul(rig, seq, seq, val)?,
    ])
}

/// A right-nested chain of `depth` layers `x -> tanh(w * x)` (pointwise,
/// `w: [width]`), each primitive labelled `layer1`, `layer2`, ... so that
/// evaluation counters can tell them apart.
pub fn probe_chain(depth: usize, width: usize) -> Result<ParaMorph> {
    if depth == 0 || width == 0 {
        return Err(Error::Argument(
            "probe_chain: depth and width must be positive".into(),
        ));
    }
    let v = Port::vector(Rig::Real, width);
    let layers = (1..=depth)
        .map(|i| {
            let body = build(
                &format!("layer{i}"),
                attrs(&[width]),
                REAL,
                v.tensor(&v)?,
                v.clone(),
                |x| Ok(vec![x[0].hadamard(&x[1])?.map_real("tanh", f64::tanh)?]),
                |x, dy| {
                    let y = x[0].hadamard(&x[1])?.map_real("tanh", f64::tanh)?;
                    let d = y.map_real("tanh", |t| 1.0 - t * t)?.hadamard(&dy[0])?;
                    Ok(vec![d.hadamard(&x[1])?, d.hadamard(&x[0])?])
                },
            )?;
            ParaMorph::new(
                v.clone(),
                v.clone(),
                body,
                vec![Init::Uniform { lo: 0.5, hi: 1.5 }],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    para_chain(&layers)
}

/// One entry of a layer list.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear {
        input: usize,
        output: usize,
    },
    Bias {
        n: usize,
    },
    Activation {
        act: Activation,
        n: usize,
    },
    Dense {
        input: usize,
        output: usize,
        act: Activation,
    },
    Gcnn {
        nodes: usize,
        input: usize,
        output: usize,
        act: Activation,
    },
    Attention {
        seq: usize,
        key: usize,
        val: usize,
    },
}

impl LayerSpec {
    pub fn build(&self, rig: Rig) -> Result<ParaMorph> {
        match *self {
            LayerSpec::Linear { input, output } => linear(rig, input, output),
            LayerSpec::Bias { n } => bias(rig, n),
            LayerSpec::Activation { act, n } => activation(rig, act, n),
            LayerSpec::Dense { input, output, act } => dense(rig, input, output, act),
            LayerSpec::Gcnn {
                nodes,
                input,
                output,
                act,
            } => gcnn_layer(rig, nodes, input, output, act),
            LayerSpec::Attention { seq, key, val } => {
                Ok(ParaMorph::lift(&attend(rig, seq, key, val)?))
            }
        }
    }
}

/// Builds and chains a layer list. Consecutive GCNN layers share the
/// adjacency input.
pub fn build_stack(specs: &[LayerSpec], rig: Rig) -> Result<ParaMorph> {
    let mut out: Vec<ParaMorph> = Vec::new();
    let mut gcnn: Vec<ParaMorph> = Vec::new();
    for s in specs {
        let m = s.build(rig)?;
        if matches!(s, LayerSpec::Gcnn { .. }) {
            gcnn.push(m);
            continue;
        }
        if !gcnn.is_empty() {
            out.push(gcnn_seq(&std::mem::take(&mut gcnn))?);
        }
        out.push(m);
    }
    if !gcnn.is_empty() {
        out.push(gcnn_seq(&gcnn)?);
    }
    para_chain(&out)
}

/// Chains with [`para_seq`] nested to the left: `((f ; g) ; h) ; ...`.
pub fn left_nested(layers: &[ParaMorph]) -> Result<ParaMorph> {
    let (first, rest) = layers
        .split_first()
        .ok_or_else(|| Error::Argument("empty layer list".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, l| para_seq(&acc, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{differentiate, evaluate};
    use crate::para::para_differentiate;
    use crate::tensor::Tensor;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, v.to_vec()).unwrap()
    }

    /// Central-difference check of `<dy, J dx>` against `<J^T dy, dx>` for
    /// every input coordinate, independently of the reverse pass.
    fn fd_check(e: &Expr, x: &[Tensor], dy: &[Tensor]) {
        let h = 1e-5;
        let grads = differentiate(e).backward(x, dy).unwrap();
        for (w, g) in grads.iter().enumerate() {
            let gr = g.reals().unwrap();
            for i in 0..x[w].len() {
                let bump = |d: f64| {
                    let mut xs = x.to_vec();
                    let mut data = xs[w].reals().unwrap().to_vec();
                    data[i] += d;
                    xs[w] = Tensor::from_reals(xs[w].shape().clone(), data).unwrap();
                    evaluate(e, &xs)
                        .unwrap()
                        .iter()
                        .zip(dy)
                        .map(|(y, c)| y.dot(c).unwrap().as_real().unwrap())
                        .sum::<f64>()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let err = (fd - gr[i]).abs() / 1f64.max(fd.abs()).max(gr[i].abs());
                assert!(err <= 1e-4, "wire {w} coord {i}: {fd} vs {}", gr[i]);
            }
        }
    }

    fn ramp(shape: Shape, start: f64, step: f64) -> Tensor {
        let n = shape.numel();
        Tensor::from_reals(shape, (0..n).map(|i| start + step * i as f64).collect()).unwrap()
    }

    #[test]
    fn identity_square_linear_is_identity() {
        let l = linear(Rig::Real, 3, 3).unwrap();
        assert_eq!(l.param_size(), 9);
        let x = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let y = l
            .forward(std::slice::from_ref(&x), &[Tensor::identity(Rig::Real, 3)])
            .unwrap();
        assert_eq!(y, vec![x]);
        assert_eq!(linear(Rig::Real, 4, 2).unwrap().param_size(), 8);
    }

    #[test]
    fn dense_bookkeeping_and_relu() {
        let d = dense(Rig::Real, 2, 3, Activation::Tanh).unwrap();
        assert_eq!(d.param_size(), 9);
        let r = activation(Rig::Real, Activation::Relu, 2).unwrap();
        assert_eq!(
            r.forward(&[Tensor::vector(vec![-1.0, 2.0])], &[]).unwrap(),
            vec![Tensor::vector(vec![0.0, 2.0])]
        );
        assert!("swish".parse::<Activation>().is_err());
        let b = bias(Rig::Real, 2).unwrap();
        let g = para_differentiate(&b)
            .backward(
                &[Tensor::vector(vec![1.0, 1.0])],
                &[Tensor::vector(vec![0.0, 0.0])],
                &[Tensor::vector(vec![0.3, -0.7])],
            )
            .unwrap();
        assert_eq!(g.0, g.1);
    }

    #[test]
    fn dense_gradient_matches_fd_and_nesting_is_irrelevant() {
        let d = dense(Rig::Real, 3, 2, Activation::Sigmoid).unwrap();
        let p = d.init_params(7).unwrap();
        let x = Tensor::vector(vec![0.3, -0.1, 0.8]);
        let input = [vec![x.clone()], p.clone()].concat();
        fd_check(d.body(), &input, &[Tensor::vector(vec![1.0, -0.5])]);
        let parts = [
            linear(Rig::Real, 3, 2).unwrap(),
            bias(Rig::Real, 2).unwrap(),
            activation(Rig::Real, Activation::Sigmoid, 2).unwrap(),
        ];
        let left = left_nested(&parts).unwrap();
        assert_eq!(
            left.forward(std::slice::from_ref(&x), &p).unwrap(),
            d.forward(std::slice::from_ref(&x), &p).unwrap()
        );
        let dy = [Tensor::vector(vec![0.2, 0.9])];
        let a = differentiate(left.body()).backward(&input, &dy).unwrap();
        let b = differentiate(d.body()).backward(&input, &dy).unwrap();
        for (u, w) in a.iter().zip(&b) {
            assert!(u.max_abs_diff(w) <= 1e-12);
        }
    }

    fn rnn_cell() -> ParaMorph {
        // h' = tanh(W^T [x; h]) with x: [1], h: [2] handled as separate wires.
        let x = Port::vector(Rig::Real, 1);
        let h = Port::vector(Rig::Real, 2);
        let input = x.tensor(&h).unwrap();
        let param = Port::new(Rig::Real, vec![Shape::matrix(1, 2), Shape::matrix(2, 2)]);
        let body = Expr::chain(&[
            Expr::perm(&input.tensor(&param).unwrap(), &[0, 2, 1, 3]).unwrap(),
            Expr::par(
                &prims::linear(Rig::Real, 1, 2).unwrap(),
                &prims::linear(Rig::Real, 2, 2).unwrap(),
            )
            .unwrap(),
            Expr::sum(&h),
            prims::activation(Activation::Tanh, Shape::vector(2)).unwrap(),
        ])
        .unwrap();
        ParaMorph::new(input, param, body, vec![Init::fan_in(1), Init::fan_in(2)]).unwrap()
    }

    #[test]
    fn unrolled_forward_iterates_the_cell() {
        let cell = rnn_cell();
        assert!(unroll_tied(&cell, 0).is_err());
        assert_eq!(
            unroll_tied(&cell, 1).unwrap().body().to_string(),
            cell.body().to_string()
        );
        let n = 4;
        let u = unroll_tied(&cell, n).unwrap();
        assert_eq!(u.param(), cell.param());
        let p = cell.init_params(3).unwrap();
        let xs: Vec<Tensor> = (0..n)
            .map(|i| Tensor::vector(vec![0.5 - 0.3 * i as f64]))
            .collect();
        let h0 = Tensor::vector(vec![0.1, -0.2]);
        let mut h = h0.clone();
        for x in &xs {
            h = cell.forward(&[x.clone(), h], &p).unwrap().remove(0);
        }
        let mut input = xs.clone();
        input.push(h0);
        assert_eq!(u.forward(&input, &p).unwrap(), vec![h]);
    }

    #[test]
    fn unrolled_gradient_is_sum_over_steps() {
        let cell = rnn_cell();
        let n = 3;
        let u = unroll_tied(&cell, n).unwrap();
        let p = cell.init_params(5).unwrap();
        let xs: Vec<Tensor> = (0..n)
            .map(|i| Tensor::vector(vec![0.2 * i as f64 - 0.1]))
            .collect();
        let h0 = Tensor::vector(vec![0.3, 0.4]);
        let dy = Tensor::vector(vec![1.0, -2.0]);
        let mut input = xs.clone();
        input.push(h0.clone());
        let (_, tied) = para_differentiate(&u)
            .backward(&input, &p, std::slice::from_ref(&dy))
            .unwrap();

        // untie: run forward storing hidden states, then backpropagate step
        // by step through the cell's own reverse derivative and add up.
        let cell_lens = para_differentiate(&cell);
        let mut hs = vec![h0];
        for x in &xs {
            let next = cell
                .forward(&[x.clone(), hs.last().unwrap().clone()], &p)
                .unwrap()
                .remove(0);
            hs.push(next);
        }
        let mut dh = dy;
        let mut total: Vec<Tensor> = cell.param().zeros();
        for t in (0..n).rev() {
            let (dxh, dp) = cell_lens
                .backward(&[xs[t].clone(), hs[t].clone()], &p, &[dh])
                .unwrap();
            total = total
                .iter()
                .zip(&dp)
                .map(|(a, b)| a.add(b).unwrap())
                .collect();
            dh = dxh[1].clone();
        }
        for (a, b) in tied.iter().zip(&total) {
            assert!(a.max_abs_diff(b) <= 1e-10);
        }
    }

    #[test]
    fn gcnn_identity_adjacency_is_columnwise_dense() {
        let (n, fin, fout) = (3, 2, 2);
        let g = gcnn_layer(Rig::Real, n, fin, fout, Activation::Tanh).unwrap();
        assert_eq!(g.param_size(), fin * fout + fout);
        let p = g.init_params(2).unwrap();
        let p = vec![p[0].clone(), Tensor::vector(vec![0.1, -0.2])];
        let x = ramp(Shape::matrix(fin, n), -0.5, 0.3);
        let y = g
            .forward(&[x.clone(), Tensor::identity(Rig::Real, n)], &p)
            .unwrap()
            .remove(0);
        let d = dense(Rig::Real, fin, fout, Activation::Tanh).unwrap();
        let xt = x.transpose().unwrap();
        let yt = y.transpose().unwrap();
        for node in 0..n {
            let col = Tensor::vector(xt.reals().unwrap()[node * fin..(node + 1) * fin].to_vec());
            let expect = d.forward(&[col], &p).unwrap().remove(0);
            let got = Tensor::vector(yt.reals().unwrap()[node * fout..(node + 1) * fout].to_vec());
            assert!(expect.max_abs_diff(&got) <= 1e-12);
        }
    }

    #[test]
    fn gcnn_gradients_match_fd() {
        let g = gcnn_layer(Rig::Real, 3, 2, 2, Activation::Sigmoid).unwrap();
        let p = g.init_params(8).unwrap();
        let x = ramp(Shape::matrix(2, 3), 0.4, -0.2);
        let a = m(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0]);
        let input = [vec![x, a], p].concat();
        fd_check(g.body(), &input, &[ramp(Shape::matrix(2, 3), 1.0, -0.4)]);
    }

    #[test]
    fn gcnn_stack_keeps_one_adjacency_input() {
        let l1 = gcnn_layer(Rig::Real, 4, 3, 2, Activation::Relu).unwrap();
        let l2 = gcnn_layer(Rig::Real, 4, 2, 2, Activation::Tanh).unwrap();
        let s = gcnn_seq(&[l1.clone(), l2.clone()]).unwrap();
        assert_eq!(s.input(), l1.input());
        assert_eq!(s.param_size(), l1.param_size() + l2.param_size());
        let (p1, p2) = (l1.init_params(1).unwrap(), l2.init_params(2).unwrap());
        let x = ramp(Shape::matrix(3, 4), -1.0, 0.15);
        let a = ramp(Shape::matrix(4, 4), 0.0, 0.1);
        let h = l1.forward(&[x.clone(), a.clone()], &p1).unwrap().remove(0);
        let y = l2.forward(&[h, a.clone()], &p2).unwrap();
        assert_eq!(s.forward(&[x, a], &[p1, p2].concat()).unwrap(), y);
    }

    #[test]
    fn attention_examples() {
        let e = attend(Rig::Real, 1, 2, 3).unwrap();
        let v = m(1, 3, &[4.0, 5.0, 6.0]);
        let out = evaluate(
            &e,
            &[m(1, 2, &[9.0, -3.0]), m(1, 2, &[0.1, 7.0]), v.clone()],
        )
        .unwrap();
        assert!(out[0].max_abs_diff(&v) <= 1e-15);

        let e = attend(Rig::Real, 3, 2, 2).unwrap();
        let vals = m(3, 2, &[1.0, 2.0, 3.0, 5.0, -1.0, 0.5]);
        let out = evaluate(
            &e,
            &[
                m(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
                m(3, 2, &[2.0; 6]),
                vals,
            ],
        )
        .unwrap();
        let mean = [1.0, 2.5];
        for row in out[0].reals().unwrap().chunks(2) {
            assert!((row[0] - mean[0]).abs() < 1e-12 && (row[1] - mean[1]).abs() < 1e-12);
        }

        let q = ramp(Shape::matrix(3, 2), -0.4, 0.3);
        let k = ramp(Shape::matrix(3, 2), 0.5, -0.25);
        let v = ramp(Shape::matrix(3, 2), 1.0, 0.7);
        fd_check(&e, &[q, k, v], &[ramp(Shape::matrix(3, 2), 0.3, 0.2)]);
        assert!(matches!(
            attend(Rig::Z2, 2, 2, 2),
            Err(Error::RigSupport { .. })
        ));
    }

    #[test]
    fn probe_chain_labels_layers() {
        let c = probe_chain(3, 2).unwrap();
        let leaves = differentiate(c.body()).leaves();
        for i in 1..=3 {
            assert!(leaves.contains(&format!("layer{i}")));
        }
        let p = c.init_params(0).unwrap();
        let input = [vec![Tensor::vector(vec![0.3, -0.6])], p].concat();
        fd_check(c.body(), &input, &[Tensor::vector(vec![1.0, 1.0])]);
    }

    #[test]
    fn build_stack_chains_specs() {
        let specs = [
            LayerSpec::Dense {
                input: 2,
                output: 3,
                act: Activation::Tanh,
            },
            LayerSpec::Linear {
                input: 3,
                output: 1,
            },
            LayerSpec::Bias { n: 1 },
        ];
        let s = build_stack(&specs, Rig::Real).unwrap();
        assert_eq!(s.param_size(), 9 + 3 + 1);
        assert!(build_stack(
            &[
                LayerSpec::Linear {
                    input: 2,
                    output: 3
                },
                LayerSpec::Bias { n: 2 }
            ],
            Rig::Real
        )
        .is_err());
        let z = build_stack(
            &[
                LayerSpec::Linear {
                    input: 2,
                    output: 1,
                },
                LayerSpec::Bias { n: 1 },
            ],
            Rig::Z2,
        )
        .unwrap();
        assert_eq!(z.rig(), Rig::Z2);
        assert!(LayerSpec::Activation {
            act: Activation::Tanh,
            n: 2
        }
        .build(Rig::Z2)
        .is_err());
    }
}
