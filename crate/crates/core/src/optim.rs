//! Optimisers as lenses `<S x P, S x P> -> <P, P'>`.
//!
//! The forward part hands the model the parameter it should use (only
//! Nesterov does something non-trivial there); the backward part consumes
//! the parameter gradient and returns the new state and parameter. None of
//! these lenses is additive in the gradient: the returned parameter is
//! `p + (something)`, so they live among plain lenses rather than additive
//! ones.
//!
//! The update formulas are written exactly in their ascent form
//! (`p + ...`). [`Optimiser::descending`] composes any of them with a lens
//! that negates the incoming gradient.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lens::{self, ComposeMode, Lens, Port};
use crate::rig::Rig;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug)]
pub struct Optimiser {
    name: String,
    state: Port,
    param: Port,
    lens: Lens,
    init_state: Vec<Tensor>,
    linear_in_gradient: bool,
}

impl Optimiser {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state(&self) -> &Port {
        &self.state
    }

    pub fn param(&self) -> &Port {
        &self.param
    }

    pub fn lens(&self) -> &Lens {
        &self.lens
    }

    pub fn init_state(&self) -> Vec<Tensor> {
        self.init_state.clone()
    }

    /// Whether `bwd(s, p, g) - bwd(s, p, 0)` is linear in `g`.
    pub fn linear_in_gradient(&self) -> bool {
        self.linear_in_gradient
    }

    /// The parameter handed to the model.
    pub fn lookahead(&self, state: &[Tensor], p: &[Tensor]) -> Result<Vec<Tensor>> {
        self.lens.forward(&[state, p].concat())
    }

    /// One update: returns `(new state, new parameter)`.
    pub fn update(
        &self,
        state: &[Tensor],
        p: &[Tensor],
        grad: &[Tensor],
    ) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let mut out = self.lens.backward(&[state, p].concat(), grad)?;
        let p_new = out.split_off(self.state.arity());
        Ok((out, p_new))
    }

    /// This optimiser fed with the negated gradient: `O ; <id, -id>`.
    pub fn descending(&self) -> Optimiser {
        let negate = Lens::primitive(
            "negate_gradient",
            self.param.clone(),
            self.param.clone(),
            Arc::new(|x| Ok(x.to_vec())),
            Arc::new(|_, dy| Ok(dy.iter().map(Tensor::neg).collect())),
        );
        let lens = lens::compose_lens(&self.lens, &negate, ComposeMode::Memoised)
            .expect("ports agree")
            .non_additive();
        Optimiser {
            name: format!("{}-descending", self.name),
            lens,
            ..self.clone()
        }
    }

    /// Parallel product of two optimisers, acting on `P x Q` with state
    /// `S x T`.
    pub fn par(&self, other: &Optimiser) -> Result<Optimiser> {
        let (s, p) = (self.state.arity(), self.param.arity());
        let (t, q) = (other.state.arity(), other.param.arity());
        let state = self.state.tensor(&other.state)?;
        let param = self.param.tensor(&other.param)?;
        let dom = state.tensor(&param)?;
        // [S, T, P, Q] -> [S, P, T, Q]
        let perm: Vec<usize> = (0..s)
            .chain(s + t..s + t + p)
            .chain(s..s + t)
            .chain(s + t + p..s + t + p + q)
            .collect();
        let route = lens::permute_lens(&dom, &perm)?;
        let lens = lens::compose_lens(
            &route,
            &lens::par_lens(&self.lens, &other.lens)?,
            ComposeMode::Memoised,
        )?
        .non_additive();
        let mut init_state = self.init_state.clone();
        init_state.extend(other.init_state.iter().cloned());
        Ok(Optimiser {
            name: format!("{}x{}", self.name, other.name),
            state,
            param,
            lens,
            init_state,
            linear_in_gradient: self.linear_in_gradient && other.linear_in_gradient,
        })
    }
}

fn zipped(
    a: &[Tensor],
    b: &[Tensor],
    f: impl Fn(&Tensor, &Tensor) -> Result<Tensor>,
) -> Result<Vec<Tensor>> {
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

fn require_real(name: &str, p: &Port) -> Result<()> {
    if p.rig() != Rig::Real {
        return Err(Error::RigSupport {
            prim: name.to_string(),
            rig: p.rig(),
        });
    }
    Ok(())
}

fn stateless(name: &str, param: &Port, sign_add: bool) -> Optimiser {
    let lens = Lens::primitive(
        name,
        param.clone(),
        param.clone(),
        Arc::new(|x| Ok(x.to_vec())),
        Arc::new(move |p, g| {
            if sign_add {
                zipped(p, g, Tensor::add)
            } else {
                zipped(p, g, Tensor::sub)
            }
        }),
    )
    .non_additive();
    Optimiser {
        name: name.to_string(),
        state: Port::unit(param.rig()),
        param: param.clone(),
        lens,
        init_state: Vec::new(),
        linear_in_gradient: true,
    }
}

/// `bwd(p, p') = p + p'`; XOR over Z2.
pub fn gradient_ascent(param: &Port) -> Optimiser {
    stateless("gradient_ascent", param, true)
}

/// `bwd(p, p') = p - p'`; coincides with ascent over Z2.
pub fn gradient_descent(param: &Port) -> Optimiser {
    stateless("gradient_descent", param, false)
}

/// Descends on `P` and ascends on `Q`.
pub fn gda(p: &Port, q: &Port) -> Result<Optimiser> {
    let mut o = gradient_descent(p).par(&gradient_ascent(q))?;
    o.name = "gda".into();
    Ok(o)
}

fn momentum_like(name: &str, param: &Port, gamma: f64, lookahead: bool) -> Result<Optimiser> {
    require_real(name, param)?;
    let k = param.arity();
    let lens = Lens::primitive(
        name,
        param.power(2),
        param.clone(),
        Arc::new(move |x| {
            let (s, p) = x.split_at(k);
            if lookahead {
                zipped(p, s, |p, s| p.add(&s.map_real("nesterov", |v| gamma * v)?))
            } else {
                Ok(p.to_vec())
            }
        }),
        Arc::new(move |x, g| {
            let (s, p) = x.split_at(k);
            // s' = -gamma s + p'
            let s_new = zipped(s, g, |s, g| {
                s.zip_real(g, "momentum", |s, g| -gamma * s + g)
            })?;
            let mut out = s_new.clone();
            out.extend(zipped(p, &s_new, Tensor::add)?);
            Ok(out)
        }),
    )
    .non_additive();
    Ok(Optimiser {
        name: name.to_string(),
        state: param.clone(),
        param: param.clone(),
        lens,
        init_state: param.zeros(),
        linear_in_gradient: true,
    })
}

/// State `S = P`; `fwd(s, p) = p`, `bwd(s, p, p') = (s', p + s')` with
/// `s' = -gamma s + p'`.
pub fn momentum(param: &Port, gamma: f64) -> Result<Optimiser> {
    momentum_like("momentum", param, gamma, false)
}

/// Momentum with the lookahead forward pass `fwd(s, p) = p + gamma s`.
pub fn nesterov(param: &Port, gamma: f64) -> Result<Optimiser> {
    momentum_like("nesterov", param, gamma, true)
}

pub const ADAGRAD_DELTA: f64 = 1e-7;
pub const ADAM_DELTA: f64 = 1e-8;

/// Accumulates squared gradients `g' = g + p'^2` and steps
/// `p + eps / (delta + sqrt(g')) * p'`.
pub fn adagrad(param: &Port, eps: f64, delta: f64) -> Result<Optimiser> {
    require_real("adagrad", param)?;
    let k = param.arity();
    let lens = Lens::primitive(
        "adagrad",
        param.power(2),
        param.clone(),
        Arc::new(move |x| Ok(x[k..].to_vec())),
        Arc::new(move |x, g| {
            let (acc, p) = x.split_at(k);
            let acc_new = zipped(acc, g, |a, g| a.zip_real(g, "adagrad", |a, g| a + g * g))?;
            let step = zipped(&acc_new, g, |a, g| {
                a.zip_real(g, "adagrad", |a, g| eps / (delta + a.sqrt()) * g)
            })?;
            let mut out = acc_new;
            out.extend(zipped(p, &step, Tensor::add)?);
            Ok(out)
        }),
    )
    .non_additive();
    Ok(Optimiser {
        name: "adagrad".into(),
        state: param.clone(),
        param: param.clone(),
        lens,
        init_state: param.zeros(),
        linear_in_gradient: false,
    })
}

/// State `(m, v, t)`: first and second moment estimates per parameter wire
/// plus a scalar step counter needed for bias correction.
pub fn adam(param: &Port, beta1: f64, beta2: f64, eps: f64, delta: f64) -> Result<Optimiser> {
    require_real("adam", param)?;
    let k = param.arity();
    let mut state_shapes: Vec<Shape> = param.power(2).shapes().to_vec();
    state_shapes.push(Shape::scalar());
    let state = Port::new(Rig::Real, state_shapes);
    let lens = Lens::primitive(
        "adam",
        state.tensor(param)?,
        param.clone(),
        Arc::new(move |x| Ok(x[2 * k + 1..].to_vec())),
        Arc::new(move |x, g| {
            let (m, rest) = x.split_at(k);
            let (v, rest) = rest.split_at(k);
            let (t, p) = rest.split_at(1);
            let t_new = t[0].real_data("adam")?[0] + 1.0;
            let c1 = 1.0 - beta1.powf(t_new);
            let c2 = 1.0 - beta2.powf(t_new);
            let m_new = zipped(m, g, |m, g| {
                m.zip_real(g, "adam", |m, g| beta1 * m + (1.0 - beta1) * g)
            })?;
            let v_new = zipped(v, g, |v, g| {
                v.zip_real(g, "adam", |v, g| beta2 * v + (1.0 - beta2) * g * g)
            })?;
            let step = zipped(&m_new, &v_new, |m, v| {
                m.zip_real(v, "adam", |m, v| eps / (delta + (v / c2).sqrt()) * (m / c1))
            })?;
            let p_new = zipped(p, &step, Tensor::add)?;
            let mut out = m_new;
            out.extend(v_new);
            out.push(Tensor::scalar(t_new));
            out.extend(p_new);
            Ok(out)
        }),
    )
    .non_additive();
    let mut init_state = param.power(2).zeros();
    init_state.push(Tensor::scalar(0.0));
    Ok(Optimiser {
        name: "adam".into(),
        state,
        param: param.clone(),
        lens,
        init_state,
        linear_in_gradient: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor {
        Tensor::vector(x.to_vec())
    }

    fn port(n: usize) -> Port {
        Port::vector(Rig::Real, n)
    }

    fn assert_close(a: &[Tensor], b: &[Tensor], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!(x.max_abs_diff(y) <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn ascent_and_descent() {
        let up = gradient_ascent(&port(2));
        let (_, p) = up
            .update(&[], &[v(&[1.0, 2.0])], &[v(&[0.1, 0.2])])
            .unwrap();
        assert_close(&p, &[v(&[1.1, 2.2])], 1e-15);
        let down = gradient_descent(&port(2));
        let (_, p) = down
            .update(&[], &[v(&[1.0, 2.0])], &[v(&[0.1, 0.2])])
            .unwrap();
        assert_close(&p, &[v(&[0.9, 1.8])], 1e-15);
        for o in [&up, &down] {
            let (_, p) = o.update(&[], &[v(&[1.0, 2.0])], &port(2).zeros()).unwrap();
            assert_eq!(p, vec![v(&[1.0, 2.0])]);
            assert_eq!(
                o.lookahead(&[], &[v(&[3.0, 4.0])]).unwrap(),
                vec![v(&[3.0, 4.0])]
            );
        }
    }

    #[test]
    fn z2_ascent_is_xor_and_equals_descent() {
        let p = Port::vector(Rig::Z2, 2);
        let up = gradient_ascent(&p);
        let (_, out) = up
            .update(
                &[],
                &[Tensor::bit_vector(vec![true, false])],
                &[Tensor::bit_vector(vec![true, true])],
            )
            .unwrap();
        assert_eq!(out, vec![Tensor::bit_vector(vec![false, true])]);
        let down = gradient_descent(&Port::scalar(Rig::Z2));
        let up1 = gradient_ascent(&Port::scalar(Rig::Z2));
        for a in [false, true] {
            for b in [false, true] {
                assert_eq!(
                    up1.update(&[], &[Tensor::bit(a)], &[Tensor::bit(b)])
                        .unwrap(),
                    down.update(&[], &[Tensor::bit(a)], &[Tensor::bit(b)])
                        .unwrap()
                );
            }
        }
    }

    #[test]
    fn momentum_examples() {
        let m = momentum(&port(1), 0.5).unwrap();
        let (s, p) = m.update(&[v(&[1.0])], &[v(&[0.0])], &[v(&[1.0])]).unwrap();
        assert_eq!((s, p), (vec![v(&[0.5])], vec![v(&[0.5])]));
        let m0 = momentum(&port(2), 0.0).unwrap();
        let (s, p) = m0
            .update(&[v(&[3.0, 3.0])], &[v(&[1.0, 2.0])], &[v(&[0.1, 0.2])])
            .unwrap();
        assert_eq!(s, vec![v(&[0.1, 0.2])]);
        assert_close(&p, &[v(&[1.1, 2.2])], 1e-15);
        assert_eq!(
            m.lookahead(&[v(&[9.0])], &[v(&[1.0])]).unwrap(),
            vec![v(&[1.0])]
        );
    }

    #[test]
    fn nesterov_examples() {
        let n = nesterov(&port(1), 0.5).unwrap();
        assert_eq!(
            n.lookahead(&[v(&[2.0])], &[v(&[1.0])]).unwrap(),
            vec![v(&[2.0])]
        );
        let n0 = nesterov(&port(1), 0.0).unwrap();
        let m0 = momentum(&port(1), 0.0).unwrap();
        let (s, p, g) = (vec![v(&[0.7])], vec![v(&[1.3])], vec![v(&[-0.4])]);
        assert_eq!(n0.lookahead(&s, &p).unwrap(), m0.lookahead(&s, &p).unwrap());
        assert_eq!(
            n0.update(&s, &p, &g).unwrap(),
            m0.update(&s, &p, &g).unwrap()
        );
        assert!(matches!(
            nesterov(&Port::scalar(Rig::Z2), 0.5),
            Err(Error::RigSupport { .. })
        ));
    }

    #[test]
    fn adagrad_examples() {
        let eps = 0.1;
        let a = adagrad(&port(1), eps, ADAGRAD_DELTA).unwrap();
        let (g, p) = a.update(&[v(&[0.0])], &[v(&[0.0])], &[v(&[1.0])]).unwrap();
        assert_eq!(g, vec![v(&[1.0])]);
        assert!((p[0].reals().unwrap()[0] - eps / (ADAGRAD_DELTA + 1.0)).abs() < 1e-15);
        let (g2, p2) = a.update(&g, &p, &port(1).zeros()).unwrap();
        assert_eq!((g2, p2), (g.clone(), p.clone()));
        // accumulator never decreases
        let mut acc = vec![v(&[0.0])];
        let mut par = vec![v(&[0.0])];
        for grad in [0.5, -2.0, 0.0, 1e-3] {
            let (acc2, par2) = a.update(&acc, &par, &[v(&[grad])]).unwrap();
            assert!(acc2[0].reals().unwrap()[0] >= acc[0].reals().unwrap()[0]);
            acc = acc2;
            par = par2;
        }
    }

    /// Straight-line scalar ADAM, independent of the lens plumbing.
    fn adam_reference(steps: &[f64], b1: f64, b2: f64, eps: f64, delta: f64) -> f64 {
        let (mut m, mut v, mut p) = (0.0, 0.0, 0.0);
        for (t, g) in steps.iter().enumerate() {
            let t = (t + 1) as f64;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powf(t));
            let vh = v / (1.0 - b2.powf(t));
            p += eps / (delta + vh.sqrt()) * mh;
        }
        p
    }

    #[test]
    fn adam_examples() {
        let (b1, b2, eps) = (0.9, 0.999, 0.01);
        let a = adam(&port(1), b1, b2, eps, ADAM_DELTA).unwrap();
        assert_eq!(
            a.state().shapes(),
            &[Shape::vector(1), Shape::vector(1), Shape::scalar()]
        );
        let g = 0.3;
        let (s, p) = a.update(&a.init_state(), &[v(&[0.0])], &[v(&[g])]).unwrap();
        assert!((s[0].reals().unwrap()[0] - (1.0 - b1) * g).abs() < 1e-15);
        let expect = eps * g / (ADAM_DELTA + g.abs());
        assert!((p[0].reals().unwrap()[0] - expect).abs() < 1e-15);

        let grads = [0.3, -1.0, 0.25, 2.0, -0.1];
        let (mut st, mut par) = (a.init_state(), vec![v(&[0.0])]);
        for g in grads {
            let (s2, p2) = a.update(&st, &par, &[v(&[g])]).unwrap();
            st = s2;
            par = p2;
        }
        let reference = adam_reference(&grads, b1, b2, eps, ADAM_DELTA);
        assert!((par[0].reals().unwrap()[0] - reference).abs() < 1e-15);

        let (_, p0) = a
            .update(&a.init_state(), &[v(&[1.5])], &port(1).zeros())
            .unwrap();
        assert_eq!(p0, vec![v(&[1.5])]);
    }

    #[test]
    fn gda_examples() {
        let o = gda(&port(1), &port(1)).unwrap();
        let (_, out) = o
            .update(&[], &[v(&[1.0]), v(&[1.0])], &[v(&[0.5]), v(&[0.5])])
            .unwrap();
        assert_eq!(out, vec![v(&[0.5]), v(&[1.5])]);
        let z = Port::scalar(Rig::Z2);
        let oz = gda(&z, &z).unwrap();
        for a in [false, true] {
            for b in [false, true] {
                let (_, out) = oz
                    .update(
                        &[],
                        &[Tensor::bit(a), Tensor::bit(a)],
                        &[Tensor::bit(b), Tensor::bit(b)],
                    )
                    .unwrap();
                assert_eq!(out[0], out[1]);
            }
        }
    }

    #[test]
    fn par_of_stateful_optimisers_routes_state() {
        let a = momentum(&port(1), 0.5).unwrap();
        let b = adagrad(&port(2), 0.1, ADAGRAD_DELTA).unwrap();
        let ab = a.par(&b).unwrap();
        let (sa, pa, ga) = (vec![v(&[1.0])], vec![v(&[0.0])], vec![v(&[1.0])]);
        let (sb, pb, gb) = (
            vec![v(&[0.5, 1.0])],
            vec![v(&[1.0, -1.0])],
            vec![v(&[0.2, 3.0])],
        );
        let (s, p) = ab
            .update(
                &[sa.clone(), sb.clone()].concat(),
                &[pa.clone(), pb.clone()].concat(),
                &[ga.clone(), gb.clone()].concat(),
            )
            .unwrap();
        let (sa2, pa2) = a.update(&sa, &pa, &ga).unwrap();
        let (sb2, pb2) = b.update(&sb, &pb, &gb).unwrap();
        assert_eq!(s, [sa2, sb2].concat());
        assert_eq!(p, [pa2, pb2].concat());
        assert!(!ab.linear_in_gradient());
    }

    #[test]
    fn descending_negates_gradient() {
        let m = momentum(&port(1), 0.5).unwrap();
        let d = m.descending();
        let (s, p, g) = (vec![v(&[1.0])], vec![v(&[0.0])], vec![v(&[1.0])]);
        assert_eq!(
            d.update(&s, &p, &g).unwrap(),
            m.update(&s, &p, &[v(&[-1.0])]).unwrap()
        );
        let up = gradient_ascent(&port(1)).descending();
        let down = gradient_descent(&port(1));
        assert_eq!(
            up.update(&[], &p, &g).unwrap(),
            down.update(&[], &p, &g).unwrap()
        );
    }

    #[test]
    fn additivity_flags() {
        for o in [
            gradient_ascent(&port(2)),
            gradient_descent(&port(2)),
            momentum(&port(2), 0.9).unwrap(),
            nesterov(&port(2), 0.9).unwrap(),
            adagrad(&port(2), 0.1, ADAGRAD_DELTA).unwrap(),
            adam(&port(2), 0.9, 0.999, 0.01, ADAM_DELTA).unwrap(),
        ] {
            assert!(!o.lens().is_additive(), "{}", o.name());
        }
        assert!(!adagrad(&port(1), 0.1, ADAGRAD_DELTA)
            .unwrap()
            .linear_in_gradient());
        assert!(!adam(&port(1), 0.9, 0.999, 0.01, ADAM_DELTA)
            .unwrap()
            .linear_in_gradient());
    }

    #[test]
    fn increments_are_linear_exactly_when_flagged() {
        let s = vec![v(&[0.3, -0.2])];
        let p = vec![v(&[1.0, 2.0])];
        let (a, b) = (vec![v(&[0.5, -1.5])], vec![v(&[2.0, 0.25])]);
        let ab = vec![a[0].add(&b[0]).unwrap()];
        let inc = |o: &Optimiser, st: &[Tensor], g: &[Tensor]| {
            let (s1, p1) = o.update(st, &p, g).unwrap();
            let (s0, p0) = o.update(st, &p, &port(2).zeros()).unwrap();
            let mut d: Vec<Tensor> = s1.iter().zip(&s0).map(|(x, y)| x.sub(y).unwrap()).collect();
            d.extend(p1.iter().zip(&p0).map(|(x, y)| x.sub(y).unwrap()));
            d
        };
        let linear_ones = [
            (gradient_ascent(&port(2)), vec![]),
            (gradient_descent(&port(2)), vec![]),
            (momentum(&port(2), 0.9).unwrap(), s.clone()),
            (nesterov(&port(2), 0.9).unwrap(), s.clone()),
        ];
        for (o, st) in &linear_ones {
            assert!(o.linear_in_gradient());
            let lhs = inc(o, st, &ab);
            let rhs: Vec<Tensor> = inc(o, st, &a)
                .iter()
                .zip(inc(o, st, &b))
                .map(|(x, y)| x.add(&y).unwrap())
                .collect();
            assert_close(&lhs, &rhs, 1e-12);
        }
        let ag = adagrad(&port(2), 0.1, ADAGRAD_DELTA).unwrap();
        let st = vec![v(&[0.0, 0.0])];
        let lhs = inc(&ag, &st, &ab);
        let rhs: Vec<Tensor> = inc(&ag, &st, &a)
            .iter()
            .zip(inc(&ag, &st, &b))
            .map(|(x, y)| x.add(&y).unwrap())
            .collect();
        assert!(lhs.iter().zip(&rhs).any(|(x, y)| x.max_abs_diff(y) > 1e-6));
    }
}
