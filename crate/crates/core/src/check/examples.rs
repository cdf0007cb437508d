//! Hand-written update equations for the worked examples, checked against
//! updates assembled by lens composition.
//!
//! The references below use plain `f64` slices and their own reverse
//! derivatives so that they share no code with the lens machinery.

use std::collections::VecDeque;

use rand::Rng;

use crate::arch;
use crate::autodiff::prims::{self, Activation};
use crate::error::Result;
use crate::learner::{gan_learner, LearnMode, Learner, TrainState};
use crate::lens::{ComposeMode, Port};
use crate::loss::{
    constant_rate, dot_loss, identity_rate, mse, softargmax_cross_entropy, xor_loss,
};
use crate::optim::{gradient_ascent, gradient_descent, nesterov};
use crate::para::{Init, ParaMorph};
use crate::rig::Rig;
use crate::tensor::{Shape, Tensor};

use super::dual::from_mask;

/// `y = act(W^T x + b)` with `W` stored row-major as `[in x out]`.
#[derive(Clone)]
struct Dense {
    input: usize,
    output: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    tanh: bool,
}

struct DenseGrad {
    dx: Vec<f64>,
    dw: Vec<f64>,
    db: Vec<f64>,
}

impl Dense {
    fn random(rng: &mut impl Rng, input: usize, output: usize, tanh: bool) -> Dense {
        Dense {
            input,
            output,
            w: uniform(rng, input * output),
            b: uniform(rng, output),
            tanh,
        }
    }

    fn pre(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|j| {
                (0..self.input)
                    .map(|i| self.w[i * self.output + j] * x[i])
                    .sum::<f64>()
                    + self.b[j]
            })
            .collect()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let z = self.pre(x);
        if self.tanh {
            z.into_iter().map(f64::tanh).collect()
        } else {
            z
        }
    }

    fn reverse(&self, x: &[f64], v: &[f64]) -> DenseGrad {
        let dz: Vec<f64> = if self.tanh {
            self.eval(x)
                .iter()
                .zip(v)
                .map(|(y, v)| (1.0 - y * y) * v)
                .collect()
        } else {
            v.to_vec()
        };
        let dx = (0..self.input)
            .map(|i| {
                (0..self.output)
                    .map(|j| self.w[i * self.output + j] * dz[j])
                    .sum()
            })
            .collect();
        let mut dw = vec![0.0; self.input * self.output];
        for i in 0..self.input {
            for j in 0..self.output {
                dw[i * self.output + j] = x[i] * dz[j];
            }
        }
        DenseGrad { dx, dw, db: dz }
    }

    fn params(&self) -> Vec<Tensor> {
        vec![
            Tensor::from_reals(Shape::matrix(self.input, self.output), self.w.clone()).unwrap(),
            Tensor::vector(self.b.clone()),
        ]
    }

    fn model(&self) -> Result<ParaMorph> {
        let act = if self.tanh {
            Activation::Tanh
        } else {
            Activation::Identity
        };
        arch::dense(Rig::Real, self.input, self.output, act)
    }
}

fn uniform(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

fn softargmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

fn diff(got: &[Tensor], want: &[Vec<f64>]) -> f64 {
    got.iter()
        .zip(want)
        .flat_map(|(g, w)| g.reals().unwrap().iter().zip(w).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn fresh(params: Vec<Tensor>, opt_state: Vec<Tensor>) -> TrainState {
    TrainState {
        params,
        opt_state,
        step: 0,
        history: VecDeque::new(),
    }
}

fn mode(i: usize) -> ComposeMode {
    if i.is_multiple_of(2) {
        ComposeMode::Memoised
    } else {
        ComposeMode::Checkpointed
    }
}

/// Result of comparing one worked example on a batch of instances.
#[derive(Debug, Clone)]
pub struct Agreement {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Agreement {
    pub fn holds(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

pub const REAL_TOL: f64 = 1e-12;

const IN: usize = 3;
const OUT: usize = 2;

/// Mean squared error with gradient descent:
/// `p - alpha (R[f](x, p, f(x, p) - y_t) ; pi_1)`.
pub fn quadratic_gd(rng: &mut impl Rng, n: usize) -> Result<Agreement> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let f = Dense::random(rng, IN, OUT, true);
        let (x, yt, alpha) = (
            uniform(rng, IN),
            uniform(rng, OUT),
            rng.gen_range(0.01..1.0),
        );
        let model = f.model()?;
        let learner = Learner::new(
            model.clone(),
            mse(model.output())?,
            constant_rate(alpha),
            gradient_descent(model.param()),
            LearnMode::ParamLearning,
            mode(i),
        )?;
        let next = learner.update_step(
            &fresh(f.params(), vec![]),
            &[Tensor::vector(x.clone())],
            &[Tensor::vector(yt.clone())],
        )?;
        let err: Vec<f64> = f.eval(&x).iter().zip(&yt).map(|(a, b)| a - b).collect();
        let g = f.reverse(&x, &err);
        let want = [axpy(-alpha, &g.dw, &f.w), axpy(-alpha, &g.db, &f.b)];
        worst = worst.max(diff(&next.params, &want));
    }
    Ok(Agreement {
        name: "quadratic + gradient descent",
        instances: n,
        max_error: worst,
        tolerance: REAL_TOL,
    })
}

/// Softargmax cross-entropy with gradient descent. Returns the agreement
/// with the general update `p - p'`, `(x', p') = R[f](x, p, alpha dloss)`,
/// where the loss gradient in the prediction is `1/2 softargmax(y_p)`,
/// and separately the largest deviation from the shortcut
/// `R[f](x, p, alpha softargmax(f(x, p) - y_t))`.
pub fn softargmax_gd(rng: &mut impl Rng, n: usize) -> Result<(Agreement, f64)> {
    let (mut worst, mut shortcut) = (0.0f64, 0.0f64);
    for i in 0..n {
        let f = Dense::random(rng, IN, OUT, true);
        let (x, yt, alpha) = (
            uniform(rng, IN),
            uniform(rng, OUT),
            rng.gen_range(0.01..1.0),
        );
        let model = f.model()?;
        let learner = Learner::new(
            model.clone(),
            softargmax_cross_entropy(model.output())?,
            constant_rate(alpha),
            gradient_descent(model.param()),
            LearnMode::ParamLearning,
            mode(i),
        )?;
        let next = learner.update_step(
            &fresh(f.params(), vec![]),
            &[Tensor::vector(x.clone())],
            &[Tensor::vector(yt.clone())],
        )?;
        let yp = f.eval(&x);
        let dloss: Vec<f64> = softargmax(&yp).iter().map(|s| alpha * 0.5 * s).collect();
        let g = f.reverse(&x, &dloss);
        worst = worst.max(diff(
            &next.params,
            &[axpy(-1.0, &g.dw, &f.w), axpy(-1.0, &g.db, &f.b)],
        ));
        let shifted: Vec<f64> = yp.iter().zip(&yt).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = softargmax(&shifted).iter().map(|s| alpha * s).collect();
        let h = f.reverse(&x, &v);
        shortcut = shortcut.max(diff(
            &next.params,
            &[axpy(-1.0, &h.dw, &f.w), axpy(-1.0, &h.db, &f.b)],
        ));
    }
    Ok((
        Agreement {
            name: "softargmax cross-entropy + gradient descent",
            instances: n,
            max_error: worst,
            tolerance: REAL_TOL,
        },
        shortcut,
    ))
}

/// Mean squared error with Nesterov momentum:
/// `pbar = p + gamma s`, `(x', pbar') = R[f](x, pbar, alpha (f(x, pbar) - y_t))`,
/// `s' = -gamma s + pbar'`, result `(s', p + s')`.
pub fn mse_nesterov(rng: &mut impl Rng, n: usize) -> Result<Agreement> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let f = Dense::random(rng, IN, OUT, true);
        let s = Dense::random(rng, IN, OUT, true);
        let (x, yt) = (uniform(rng, IN), uniform(rng, OUT));
        let (alpha, gamma) = (rng.gen_range(0.01..1.0), rng.gen_range(0.0..1.0));
        let model = f.model()?;
        let learner = Learner::new(
            model.clone(),
            mse(model.output())?,
            constant_rate(alpha),
            nesterov(model.param(), gamma)?,
            LearnMode::ParamLearning,
            mode(i),
        )?;
        let next = learner.update_step(
            &fresh(f.params(), s.params()),
            &[Tensor::vector(x.clone())],
            &[Tensor::vector(yt.clone())],
        )?;
        let look = Dense {
            w: axpy(gamma, &s.w, &f.w),
            b: axpy(gamma, &s.b, &f.b),
            ..f.clone()
        };
        let err: Vec<f64> = look
            .eval(&x)
            .iter()
            .zip(&yt)
            .map(|(a, b)| alpha * (a - b))
            .collect();
        let g = look.reverse(&x, &err);
        let sw = axpy(-gamma, &s.w, &g.dw);
        let sb = axpy(-gamma, &s.b, &g.db);
        let want_p = [axpy(1.0, &sw, &f.w), axpy(1.0, &sb, &f.b)];
        worst = worst
            .max(diff(&next.opt_state, &[sw, sb]))
            .max(diff(&next.params, &want_p));
    }
    Ok(Agreement {
        name: "mean squared error + Nesterov momentum",
        instances: n,
        max_error: worst,
        tolerance: REAL_TOL,
    })
}

/// Dot-product loss with gradient ascent on the input:
/// `x + alpha (R[f](x, p, y_i) ; pi_1)`.
pub fn deep_dreaming(rng: &mut impl Rng, n: usize) -> Result<Agreement> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let f = Dense::random(rng, IN, OUT, true);
        let (x, yi, alpha) = (
            uniform(rng, IN),
            uniform(rng, OUT),
            rng.gen_range(0.01..1.0),
        );
        let model = f.model()?;
        let learner = Learner::new(
            model.clone(),
            dot_loss(model.output())?,
            constant_rate(alpha),
            gradient_ascent(model.input()),
            LearnMode::DeepDreaming,
            mode(i),
        )?;
        let st = learner.dream_state(vec![Tensor::vector(x.clone())])?;
        let next = learner.dream_step(&st, &f.params(), &[Tensor::vector(yi.clone())])?;
        let g = f.reverse(&x, &yi);
        worst = worst.max(diff(&next.params, &[axpy(alpha, &g.dx, &x)]));
    }
    Ok(Agreement {
        name: "deep dreaming, dot product + gradient ascent",
        instances: n,
        max_error: worst,
        tolerance: REAL_TOL,
    })
}

const Z: usize = 2;
const X: usize = 3;

/// GAN with dot-product loss and descent-ascent, in the form with `alpha`
/// and the labels pulled out:
/// `(x_g', q_g') = R[d](g(z, p), q, 1)`, `(z', p') = R[g](z, p, x_g')`,
/// `(x_r', q_r') = R[d](x_r, q, 1)`, result
/// `(p - alpha y_g p', q + alpha (y_g q_g' + y_r q_r'))`.
pub fn gan_gda(rng: &mut impl Rng, n: usize) -> Result<Agreement> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let g = Dense::random(rng, Z, X, false);
        let d = Dense::random(rng, X, 1, false);
        let (z, xr, alpha) = (uniform(rng, Z), uniform(rng, X), rng.gen_range(0.01..1.0));
        // the canonical labels on even instances, arbitrary ones otherwise
        let (yg, yr) = if i % 2 == 0 {
            (1.0, -1.0)
        } else {
            (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        };
        let learner = gan_learner(&g.model()?, &d.model()?, alpha, mode(i))?;
        let labels = vec![Tensor::vector(vec![yg]), Tensor::vector(vec![yr])];
        let params = [g.params(), d.params()].concat();
        let next = learner.update_step(
            &fresh(params, vec![]),
            &[Tensor::vector(z.clone()), Tensor::vector(xr.clone())],
            &labels,
        )?;

        let dg = d.reverse(&g.eval(&z), &[1.0]);
        let gp = g.reverse(&z, &dg.dx);
        let dr = d.reverse(&xr, &[1.0]);
        let q_step = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(a, b)| alpha * (yg * a + yr * b))
                .collect()
        };
        let want = [
            axpy(-alpha * yg, &gp.dw, &g.w),
            axpy(-alpha * yg, &gp.db, &g.b),
            axpy(1.0, &q_step(&dg.dw, &dr.dw), &d.w),
            axpy(1.0, &q_step(&dg.db, &dr.db), &d.b),
        ];
        worst = worst.max(diff(&next.params, &want));
    }
    Ok(Agreement {
        name: "GAN, dot product + descent-ascent",
        instances: n,
        max_error: worst,
        tolerance: REAL_TOL,
    })
}

/// Z2 update with XOR loss, identity rate and gradient ascent:
/// `p + p'` with `(x', p') = R[f](x, p, f(x, p) + y_t)`, checked on every
/// assignment of `f(x, p) = x + p` (one bit) and of the affine circuit
/// `f(x, (w, b)) = w . x + b` on three input bits. The error is the number
/// of mismatching instances.
pub fn boolean_update() -> Result<Agreement> {
    let mut mismatches = 0usize;
    let mut instances = 0usize;

    let bit = Port::vector(Rig::Z2, 1);
    let xor_model = ParaMorph::new(
        bit.clone(),
        bit.clone(),
        prims::xor(Shape::vector(1)),
        vec![Init::Bits],
    )?;
    let affine = arch::dense(Rig::Z2, X, 1, Activation::Identity)?;
    for model in [xor_model, affine] {
        let learner = Learner::new(
            model.clone(),
            xor_loss(model.output())?,
            identity_rate(Rig::Z2),
            gradient_ascent(model.param()),
            LearnMode::ParamLearning,
            ComposeMode::Memoised,
        )?;
        let all = model
            .input()
            .tensor(model.param())?
            .tensor(model.output())?;
        let (nx, np) = (model.input().arity(), model.param().arity());
        for mask in 0..(1u64 << all.numel()) {
            let v = from_mask(&all, mask);
            let (x, rest) = v.split_at(nx);
            let (p, yt) = rest.split_at(np);
            let next = learner.update_step(&fresh(p.to_vec(), vec![]), x, yt)?;

            // reference: the reverse derivative of each model written out
            let bits = |t: &Tensor| t.bits().unwrap().to_vec();
            let (xb, yb) = (bits(&x[0]), bits(&yt[0])[0]);
            let want: Vec<Vec<bool>> = if np == 1 {
                let pb = bits(&p[0])[0];
                let err = (xb[0] ^ pb) ^ yb;
                vec![vec![pb ^ err]]
            } else {
                let (w, b) = (bits(&p[0]), bits(&p[1])[0]);
                let out = xb.iter().zip(&w).fold(b, |acc, (x, w)| acc ^ (x & w));
                let err = out ^ yb;
                vec![
                    w.iter().zip(&xb).map(|(w, x)| w ^ (x & err)).collect(),
                    vec![b ^ err],
                ]
            };
            let got: Vec<Vec<bool>> = next.params.iter().map(bits).collect();
            if got != want {
                mismatches += 1;
            }
            instances += 1;
        }
    }
    Ok(Agreement {
        name: "boolean basic update",
        instances,
        max_error: mismatches as f64,
        tolerance: 0.0,
    })
}

/// Every worked example on `n` random instances each (the boolean one is
/// exhaustive).
pub fn all(rng: &mut impl Rng, n: usize) -> Result<(Vec<Agreement>, f64)> {
    let (sce, shortcut) = softargmax_gd(rng, n)?;
    Ok((
        vec![
            quadratic_gd(rng, n)?,
            sce,
            mse_nesterov(rng, n)?,
            boolean_update()?,
            deep_dreaming(rng, n)?,
            gan_gda(rng, n)?,
        ],
        shortcut,
    ))
}
