//! Parametric morphisms `f : X x P -> Y` and their differentiated form,
//! parametric lenses.
//!
//! Conventions fixed across the crate: the input wires come first and the
//! parameter wires second, and a composite's parameters list the left
//! factor's block before the right factor's.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{differentiate_with, evaluate, Expr};
use crate::error::{Error, Result};
use crate::lens::{self, ComposeMode, Lens, Port};
use crate::rig::Rig;
use crate::tensor::{Shape, Tensor};

/// How to draw the initial value of one parameter wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Zeros,
    /// Independent fair bits (Z2 only).
    Bits,
}

impl Init {
    /// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn fan_in(fan_in: usize) -> Init {
        let b = 1.0 / (fan_in.max(1) as f64).sqrt();
        Init::Uniform { lo: -b, hi: b }
    }

    pub fn default_for(rig: Rig, fan_in: usize) -> Init {
        match rig {
            Rig::Real => Init::fan_in(fan_in),
            Rig::Z2 => Init::Bits,
        }
    }

    pub fn sample(self, rig: Rig, shape: &Shape, rng: &mut impl Rng) -> Result<Tensor> {
        let n = shape.numel();
        match (self, rig) {
            (Init::Zeros, _) => Ok(Tensor::zeros(rig, shape.clone())),
            (Init::Uniform { lo, hi }, Rig::Real) => {
                let v = (0..n)
                    .map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                    .collect();
                Tensor::from_reals(shape.clone(), v)
            }
            (Init::Bits, Rig::Z2) => {
                Tensor::from_bits(shape.clone(), (0..n).map(|_| rng.gen::<bool>()).collect())
            }
            (init, rig) => Err(Error::Argument(format!(
                "initialiser {init:?} is not defined over {rig}"
            ))),
        }
    }
}

/// A parametric morphism `(P, f)` with `f : X x P -> Y`.
#[derive(Clone, Debug)]
pub struct ParaMorph {
    input: Port,
    param: Port,
    body: Expr,
    inits: Vec<Init>,
}

impl ParaMorph {
    pub fn new(input: Port, param: Port, body: Expr, inits: Vec<Init>) -> Result<ParaMorph> {
        let expected = input.tensor(&param)?;
        if body.dom() != &expected {
            return Err(Error::Type {
                path: format!("{body}"),
                detail: format!(
                    "body domain {} does not split as input {input} then parameter {param}",
                    body.dom()
                ),
            });
        }
        if inits.len() != param.arity() {
            return Err(Error::Argument(format!(
                "{} initialisers for {} parameter wires",
                inits.len(),
                param.arity()
            )));
        }
        Ok(ParaMorph {
            input,
            param,
            body,
            inits,
        })
    }

    /// A trivially parametric morphism, with the unit as parameter.
    pub fn lift(e: &Expr) -> ParaMorph {
        let rig = e.dom().rig();
        ParaMorph {
            input: e.dom().clone(),
            param: Port::unit(rig),
            body: e.clone(),
            inits: Vec::new(),
        }
    }

    pub fn identity(p: &Port) -> ParaMorph {
        ParaMorph::lift(&Expr::id(p))
    }

    pub fn input(&self) -> &Port {
        &self.input
    }

    pub fn param(&self) -> &Port {
        &self.param
    }

    pub fn output(&self) -> &Port {
        self.body.cod()
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn rig(&self) -> Rig {
        self.input.rig()
    }

    pub fn inits(&self) -> &[Init] {
        &self.inits
    }

    pub fn with_inits(mut self, inits: Vec<Init>) -> Result<ParaMorph> {
        if inits.len() != self.param.arity() {
            return Err(Error::Argument("initialiser count mismatch".into()));
        }
        self.inits = inits;
        Ok(self)
    }

    /// Number of scalar parameters.
    pub fn param_size(&self) -> usize {
        self.param.numel()
    }

    /// Draws initial parameters from a seeded generator.
    pub fn init_params(&self, seed: u64) -> Result<Vec<Tensor>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.param
            .shapes()
            .iter()
            .zip(&self.inits)
            .map(|(s, init)| init.sample(self.rig(), s, &mut rng))
            .collect()
    }

    pub fn forward(&self, x: &[Tensor], p: &[Tensor]) -> Result<Vec<Tensor>> {
        let mut v = x.to_vec();
        v.extend_from_slice(p);
        evaluate(&self.body, &v)
    }
}

/// `(P, f) ; (Q, g) = (P x Q, (f x Q) ; g)`.
pub fn para_seq(f: &ParaMorph, g: &ParaMorph) -> Result<ParaMorph> {
    if f.output() != g.input() {
        return Err(Error::Composition {
            left: f.output().to_string(),
            right: g.input().to_string(),
        });
    }
    let body = Expr::seq(&Expr::par(&f.body, &Expr::id(&g.param))?, &g.body)?;
    let mut inits = f.inits.clone();
    inits.extend_from_slice(&g.inits);
    ParaMorph::new(f.input.clone(), f.param.tensor(&g.param)?, body, inits)
}

/// Chains a nonempty list with [`para_seq`], nested to the right:
/// `f ; (g ; (h ; ...))`.
pub fn para_chain(layers: &[ParaMorph]) -> Result<ParaMorph> {
    let (last, rest) = layers
        .split_last()
        .ok_or_else(|| Error::Argument("empty layer list".into()))?;
    rest.iter()
        .rev()
        .try_fold(last.clone(), |acc, l| para_seq(l, &acc))
}

/// Monoidal product: inputs, outputs and parameters all concatenate.
pub fn para_par(f: &ParaMorph, g: &ParaMorph) -> Result<ParaMorph> {
    if f.rig() != g.rig() {
        return Err(Error::RigMismatch {
            op: "para_par",
            left: f.rig(),
            right: g.rig(),
        });
    }
    let (a, c) = (f.input.arity(), g.input.arity());
    let (p, q) = (f.param.arity(), g.param.arity());
    // wires arrive as [A, C, P, Q]; f.body wants [A, P] and g.body [C, Q].
    let perm: Vec<usize> = (0..a)
        .chain(a + c..a + c + p)
        .chain(a..a + c)
        .chain(a + c + p..a + c + p + q)
        .collect();
    let input = f.input.tensor(&g.input)?;
    let param = f.param.tensor(&g.param)?;
    let route = Expr::perm(&input.tensor(&param)?, &perm)?;
    let body = Expr::seq(&route, &Expr::par(&f.body, &g.body)?)?;
    let mut inits = f.inits.clone();
    inits.extend_from_slice(&g.inits);
    ParaMorph::new(input, param, body, inits)
}

/// The monoidal product of a nonempty list, routed by a single
/// permutation: wires arrive as `[X_1..X_n, P_1..P_n]`.
pub fn para_par_all(fs: &[ParaMorph]) -> Result<ParaMorph> {
    let first = fs
        .first()
        .ok_or_else(|| Error::Argument("empty list".into()))?;
    if let Some(g) = fs.iter().find(|g| g.rig() != first.rig()) {
        return Err(Error::RigMismatch {
            op: "para_par",
            left: first.rig(),
            right: g.rig(),
        });
    }
    let rig = first.rig();
    let input = Port::new(
        rig,
        fs.iter()
            .flat_map(|f| f.input.shapes().to_vec())
            .collect::<Vec<_>>(),
    );
    let param = Port::new(
        rig,
        fs.iter()
            .flat_map(|f| f.param.shapes().to_vec())
            .collect::<Vec<_>>(),
    );
    let mut perm = Vec::with_capacity(input.arity() + param.arity());
    let (mut xi, mut pi) = (0, input.arity());
    for f in fs {
        perm.extend(xi..xi + f.input.arity());
        perm.extend(pi..pi + f.param.arity());
        xi += f.input.arity();
        pi += f.param.arity();
    }
    let route = Expr::perm(&input.tensor(&param)?, &perm)?;
    let bodies: Vec<Expr> = fs.iter().map(|f| f.body.clone()).collect();
    let body = Expr::seq(&route, &Expr::par_all(&bodies)?)?;
    let inits = fs.iter().flat_map(|f| f.inits.iter().copied()).collect();
    ParaMorph::new(input, param, body, inits)
}

/// Precomposes the parameter port with `r : Q -> P`.
pub fn reparam(f: &ParaMorph, r: &Expr, inits: Vec<Init>) -> Result<ParaMorph> {
    if r.cod() != &f.param {
        return Err(Error::Composition {
            left: r.cod().to_string(),
            right: f.param.to_string(),
        });
    }
    let body = Expr::seq(&Expr::par(&Expr::id(&f.input), r)?, &f.body)?;
    ParaMorph::new(f.input.clone(), r.dom().clone(), body, inits)
}

/// Ties the two equal halves of the parameter port by reparameterising
/// with the copy map.
pub fn weight_tying(f: &ParaMorph) -> Result<ParaMorph> {
    let n = f.param.arity();
    let half = f.param.slice(0, n / 2);
    if !n.is_multiple_of(2) || half != f.param.slice(n / 2, n) {
        return Err(Error::Shape {
            op: "weight_tying",
            detail: format!(
                "parameter port {} does not split into two equal halves",
                f.param
            ),
        });
    }
    let inits = f.inits[..n / 2].to_vec();
    reparam(f, &Expr::copy(&half), inits)
}

/// `n` parallel copies of `f` sharing one parameter through the `n`-fold
/// copy map.
pub fn batching(f: &ParaMorph, n: usize) -> Result<ParaMorph> {
    if n == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    if n == 1 {
        return Ok(f.clone());
    }
    let untied = para_par_all(&vec![f.clone(); n])?;
    reparam(&untied, &Expr::copy_n(&f.param, n), f.inits.clone())
}

/// A lens `X x P -> Y` with its domain split into input and parameter.
#[derive(Clone, Debug)]
pub struct ParaLens {
    input: Port,
    param: Port,
    lens: Lens,
}

impl ParaLens {
    pub fn new(input: Port, param: Port, lens: Lens) -> Result<ParaLens> {
        if lens.dom() != &input.tensor(&param)? {
            return Err(Error::Composition {
                left: input.tensor(&param)?.to_string(),
                right: lens.dom().to_string(),
            });
        }
        Ok(ParaLens { input, param, lens })
    }

    pub fn input(&self) -> &Port {
        &self.input
    }

    pub fn param(&self) -> &Port {
        &self.param
    }

    pub fn output(&self) -> &Port {
        self.lens.cod()
    }

    pub fn lens(&self) -> &Lens {
        &self.lens
    }

    pub fn forward(&self, x: &[Tensor], p: &[Tensor]) -> Result<Vec<Tensor>> {
        self.lens.forward(&[x, p].concat())
    }

    /// Reverse derivative split into `(input gradient, parameter gradient)`.
    pub fn backward(
        &self,
        x: &[Tensor],
        p: &[Tensor],
        dy: &[Tensor],
    ) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let mut g = self.lens.backward(&[x, p].concat(), dy)?;
        let dp = g.split_off(self.input.arity());
        Ok((g, dp))
    }

    /// Composition in `Para(Lens)`: `(f x id_Q) ; g`.
    pub fn seq(&self, g: &ParaLens, mode: ComposeMode) -> Result<ParaLens> {
        let left = lens::par_lens(&self.lens, &lens::identity_lens(&g.param))?;
        ParaLens::new(
            self.input.clone(),
            self.param.tensor(&g.param)?,
            lens::compose_lens(&left, &g.lens, mode)?,
        )
    }
}

pub fn para_differentiate(f: &ParaMorph) -> ParaLens {
    para_differentiate_with(f, ComposeMode::Memoised)
}

pub fn para_differentiate_with(f: &ParaMorph, mode: ComposeMode) -> ParaLens {
    ParaLens {
        input: f.input.clone(),
        param: f.param.clone(),
        lens: differentiate_with(&f.body, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::prims::{self, Activation};

    fn linear(i: usize, o: usize) -> ParaMorph {
        ParaMorph::new(
            Port::vector(Rig::Real, i),
            Port::single(Rig::Real, Shape::matrix(i, o)),
            prims::linear(Rig::Real, i, o).unwrap(),
            vec![Init::fan_in(i)],
        )
        .unwrap()
    }

    fn bias(n: usize) -> ParaMorph {
        ParaMorph::new(
            Port::vector(Rig::Real, n),
            Port::vector(Rig::Real, n),
            prims::bias(Rig::Real, Shape::vector(n)).unwrap(),
            vec![Init::Zeros],
        )
        .unwrap()
    }

    fn close(a: &[Tensor], b: &[Tensor], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.max_abs_diff(y) <= tol)
    }

    #[test]
    fn seq_param_bookkeeping_and_forward() {
        let (f, g) = (linear(2, 3), linear(3, 1));
        let h = para_seq(&f, &g).unwrap();
        assert_eq!(h.param_size(), 9);
        let p = f.init_params(1).unwrap();
        let q = g.init_params(2).unwrap();
        let x = vec![Tensor::vector(vec![0.3, -1.2])];
        let direct = g.forward(&f.forward(&x, &p).unwrap(), &q).unwrap();
        assert_eq!(h.forward(&x, &[p, q].concat()).unwrap(), direct);

        let with_id = para_seq(&f, &ParaMorph::identity(f.output())).unwrap();
        assert_eq!(with_id.param(), f.param());
        assert!(matches!(para_seq(&g, &f), Err(Error::Composition { .. })));
    }

    #[test]
    fn par_semantics() {
        let (f, g) = (linear(2, 3), bias(2));
        let h = para_par(&f, &g).unwrap();
        let (p, q) = (
            f.init_params(3).unwrap(),
            vec![Tensor::vector(vec![1.0, -1.0])],
        );
        let (a, c) = (
            Tensor::vector(vec![1.0, 2.0]),
            Tensor::vector(vec![0.5, 0.5]),
        );
        let out = h
            .forward(&[a.clone(), c.clone()], &[p.clone(), q.clone()].concat())
            .unwrap();
        let mut expect = f.forward(&[a], &p).unwrap();
        expect.extend(g.forward(&[c], &q).unwrap());
        assert_eq!(out, expect);
        assert_eq!(para_par(&bias(2), &bias(2)).unwrap().param_size(), 4);

        let idp = Port::vector(Rig::Real, 2);
        let ii = para_par(&ParaMorph::identity(&idp), &ParaMorph::identity(&idp)).unwrap();
        assert!(ii.param().is_unit());
        let x = vec![
            Tensor::vector(vec![1.0, 2.0]),
            Tensor::vector(vec![3.0, 4.0]),
        ];
        assert_eq!(ii.forward(&x, &[]).unwrap(), x);
    }

    #[test]
    fn reparam_identity_and_vertical_composition() {
        let f = linear(2, 2);
        let pp = f.param().clone();
        let r = reparam(&f, &Expr::id(&pp), f.inits().to_vec()).unwrap();
        let p = f.init_params(4).unwrap();
        let x = vec![Tensor::vector(vec![0.1, 0.9])];
        assert_eq!(r.forward(&x, &p).unwrap(), f.forward(&x, &p).unwrap());

        let neg = prims::neg(Rig::Real, Shape::matrix(2, 2)).unwrap();
        let sc = prims::scale(crate::RigValue::Real(3.0), Shape::matrix(2, 2)).unwrap();
        let twice = reparam(
            &reparam(&f, &neg, vec![Init::Zeros]).unwrap(),
            &sc,
            vec![Init::Zeros],
        )
        .unwrap();
        let once = reparam(&f, &Expr::seq(&sc, &neg).unwrap(), vec![Init::Zeros]).unwrap();
        assert_eq!(
            twice.forward(&x, &p).unwrap(),
            once.forward(&x, &p).unwrap()
        );
    }

    #[test]
    fn tied_gradient_is_sum_of_untied() {
        let f = linear(2, 2);
        let untied = para_par(&f, &f).unwrap();
        let tied = weight_tying(&untied).unwrap();
        assert_eq!(tied.param(), f.param());
        let w = f.init_params(5).unwrap();
        let x = vec![
            Tensor::vector(vec![0.5, -1.0]),
            Tensor::vector(vec![2.0, 0.25]),
        ];
        let dy = vec![
            Tensor::vector(vec![1.0, 0.0]),
            Tensor::vector(vec![-0.5, 2.0]),
        ];
        let (_, g_untied) = para_differentiate(&untied)
            .backward(&x, &[w.clone(), w.clone()].concat(), &dy)
            .unwrap();
        let (_, g_tied) = para_differentiate(&tied).backward(&x, &w, &dy).unwrap();
        let sum = g_untied[0].add(&g_untied[1]).unwrap();
        assert!(g_tied[0].max_abs_diff(&sum) <= 1e-12);

        let lopsided = para_par(&linear(2, 2), &bias(2)).unwrap();
        assert!(matches!(weight_tying(&lopsided), Err(Error::Shape { .. })));
    }

    #[test]
    fn batching_forward_and_gradient() {
        let f = para_seq(
            &linear(2, 2),
            &ParaMorph::lift(&prims::activation(Activation::Tanh, Shape::vector(2)).unwrap()),
        )
        .unwrap();
        assert!(matches!(batching(&f, 0), Err(Error::Argument(_))));
        let one = batching(&f, 1).unwrap();
        assert_eq!(one.param(), f.param());

        let n = 3;
        let b = batching(&f, n).unwrap();
        let p = f.init_params(9).unwrap();
        let xs: Vec<Tensor> = (0..n)
            .map(|i| Tensor::vector(vec![i as f64, 1.0 - i as f64]))
            .collect();
        let dys: Vec<Tensor> = (0..n)
            .map(|i| Tensor::vector(vec![1.0, i as f64]))
            .collect();
        let out = b.forward(&xs, &p).unwrap();
        for i in 0..n {
            assert_eq!(out[i], f.forward(&xs[i..i + 1], &p).unwrap()[0]);
        }
        let (_, g) = para_differentiate(&b).backward(&xs, &p, &dys).unwrap();
        let fl = para_differentiate(&f);
        let mut acc = Tensor::zeros(Rig::Real, p[0].shape().clone());
        for i in 0..n {
            let (_, gi) = fl.backward(&xs[i..i + 1], &p, &dys[i..i + 1]).unwrap();
            acc = acc.add(&gi[0]).unwrap();
        }
        assert!(g[0].max_abs_diff(&acc) <= 1e-12);
    }

    #[test]
    fn par_all_matches_folded_par() {
        let fs = [linear(2, 3), bias(2), linear(3, 1)];
        let all = para_par_all(&fs).unwrap();
        let folded = para_par(&para_par(&fs[0], &fs[1]).unwrap(), &fs[2]).unwrap();
        assert_eq!(all.input(), folded.input());
        assert_eq!(all.param(), folded.param());
        let p: Vec<Tensor> = fs
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.init_params(i as u64 + 1).unwrap())
            .collect();
        let x = vec![
            Tensor::vector(vec![0.5, -1.0]),
            Tensor::vector(vec![2.0, 0.0]),
            Tensor::vector(vec![1.0, 1.0, -3.0]),
        ];
        assert_eq!(
            all.forward(&x, &p).unwrap(),
            folded.forward(&x, &p).unwrap()
        );
        let dy = vec![
            Tensor::vector(vec![1.0, -2.0, 0.5]),
            Tensor::vector(vec![0.3, 0.7]),
            Tensor::vector(vec![-1.0]),
        ];
        let (a1, b1) = para_differentiate(&all).backward(&x, &p, &dy).unwrap();
        let (a2, b2) = para_differentiate(&folded).backward(&x, &p, &dy).unwrap();
        assert!(close(&a1, &a2, 1e-12) && close(&b1, &b2, 1e-12));
        assert!(matches!(para_par_all(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn parametric_functoriality() {
        let (f, g) = (
            linear(3, 2),
            para_seq(
                &bias(2),
                &ParaMorph::lift(
                    &prims::activation(Activation::Sigmoid, Shape::vector(2)).unwrap(),
                ),
            )
            .unwrap(),
        );
        let p = [
            f.init_params(1).unwrap(),
            vec![Tensor::vector(vec![0.2, -0.3])],
        ]
        .concat();
        let x = vec![Tensor::vector(vec![1.0, -2.0, 0.5])];
        let dy = vec![Tensor::vector(vec![0.7, -1.1])];
        for mode in [ComposeMode::Memoised, ComposeMode::Checkpointed] {
            let composed = para_differentiate_with(&para_seq(&f, &g).unwrap(), mode);
            let separate = para_differentiate_with(&f, mode)
                .seq(&para_differentiate_with(&g, mode), mode)
                .unwrap();
            let (a1, b1) = composed.backward(&x, &p, &dy).unwrap();
            let (a2, b2) = separate.backward(&x, &p, &dy).unwrap();
            assert!(close(&a1, &a2, 1e-12) && close(&b1, &b2, 1e-12));
        }
        let lifted = para_differentiate(&ParaMorph::lift(
            &prims::activation(Activation::Tanh, Shape::vector(3)).unwrap(),
        ));
        let (_, dp) = lifted
            .backward(&x, &[], &[Tensor::vector(vec![1.0; 3])])
            .unwrap();
        assert!(dp.is_empty());
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let f = linear(4, 3);
        assert_eq!(f.init_params(11).unwrap(), f.init_params(11).unwrap());
        let w = &f.init_params(11).unwrap()[0];
        assert!(w.reals().unwrap().iter().all(|v| v.abs() <= 0.5));
    }
}
