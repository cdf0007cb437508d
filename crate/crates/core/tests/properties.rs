//! Randomised laws over generated composites. Each case draws a seed and
//! builds its composite from that seed, so shrinking narrows the seed.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paralens::arch::{dense, probe_chain};
use paralens::autodiff::prims::{self, Activation};
use paralens::autodiff::{differentiate_with, evaluate, Expr};
use paralens::check::gen::{composite, random_composite, random_values};
use paralens::learner::{LearnMode, Learner};
use paralens::lens::{compose_lens, forget_backward, Lens};
use paralens::loss::{constant_rate, mse};
use paralens::optim::{gda, gradient_ascent, gradient_descent, momentum, nesterov, Optimiser};
use paralens::para::{batching, para_differentiate, reparam};
use paralens::{ComposeMode, Port, Rig, RigValue, Shape, Tensor};

const MODES: [ComposeMode; 2] = [ComposeMode::Memoised, ComposeMode::Checkpointed];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_diff(a: &[Tensor], b: &[Tensor]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

fn add_all(a: &[Tensor], b: &[Tensor]) -> Vec<Tensor> {
    a.iter().zip(b).map(|(x, y)| x.add(y).unwrap()).collect()
}

fn rig_of(z2: bool) -> Rig {
    if z2 {
        Rig::Z2
    } else {
        Rig::Real
    }
}

/// A composable triple `A -> B -> C -> D` of random composites.
fn triple(r: &mut ChaCha8Rng, rig: Rig) -> [Lens; 3] {
    let w: Vec<usize> = (0..4).map(|_| r.gen_range(1..=5)).collect();
    [0, 1, 2]
        .map(|i| differentiate_with(&composite(r, rig, w[i], w[i + 1], 2), ComposeMode::Memoised))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backward_is_additive_in_the_cotangent(seed in any::<u64>(), z2 in any::<bool>()) {
        let mut r = rng(seed);
        let e = random_composite(&mut r, rig_of(z2));
        let x = random_values(&mut r, e.dom());
        let (a, b) = (random_values(&mut r, e.cod()), random_values(&mut r, e.cod()));
        for mode in MODES {
            let l = differentiate_with(&e, mode);
            let whole = l.backward(&x, &add_all(&a, &b)).unwrap();
            let parts = add_all(&l.backward(&x, &a).unwrap(), &l.backward(&x, &b).unwrap());
            let err = max_diff(&whole, &parts);
            if z2 {
                prop_assert_eq!(err, 0.0);
            } else {
                prop_assert!(err <= 1e-10, "additivity error {err}");
            }
        }
    }

    #[test]
    fn compose_modes_agree(seed in any::<u64>(), depth in 1usize..=6) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let e = composite(&mut r, Rig::Real, n, m, depth);
        let x = random_values(&mut r, e.dom());
        let dy = random_values(&mut r, e.cod());
        let memo = differentiate_with(&e, ComposeMode::Memoised).evaluate(&x, &dy).unwrap();
        let ckpt = differentiate_with(&e, ComposeMode::Checkpointed).evaluate(&x, &dy).unwrap();
        prop_assert!(max_diff(&memo.output, &ckpt.output) <= 1e-12);
        prop_assert!(max_diff(&memo.input_grad, &ckpt.input_grad) <= 1e-12);
    }

    #[test]
    fn composition_is_associative(seed in any::<u64>(), z2 in any::<bool>()) {
        let mut r = rng(seed);
        let [f, g, h] = triple(&mut r, rig_of(z2));
        let x = random_values(&mut r, f.dom());
        let dy = random_values(&mut r, h.cod());
        for mode in MODES {
            let left = compose_lens(&compose_lens(&f, &g, mode).unwrap(), &h, mode).unwrap();
            let right = compose_lens(&f, &compose_lens(&g, &h, mode).unwrap(), mode).unwrap();
            prop_assert!(max_diff(&left.forward(&x).unwrap(), &right.forward(&x).unwrap()) <= 1e-12);
            prop_assert!(max_diff(&left.backward(&x, &dy).unwrap(), &right.backward(&x, &dy).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn forgetting_backward_preserves_composition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let [f, g, _] = triple(&mut r, Rig::Real);
        let x = random_values(&mut r, f.dom());
        let fg = compose_lens(&f, &g, ComposeMode::Checkpointed).unwrap();
        let composed = forget_backward(&fg)(&x).unwrap();
        let separate = forget_backward(&g)(&forget_backward(&f)(&x).unwrap()).unwrap();
        prop_assert_eq!(composed, separate);
    }

    #[test]
    fn reparam_gradient_is_pulled_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let f = dense(Rig::Real, n, m, Activation::Tanh).unwrap();
        // r(q) = tanh(q) * c q on every parameter wire
        let wires: Vec<Expr> = f.param().shapes().iter()
            .map(|s| {
                let v = Port::single(Rig::Real, s.clone());
                let c = prims::scale(RigValue::Real(r.gen_range(-2.0..2.0)), s.clone()).unwrap();
                let both = Expr::par(&prims::activation(Activation::Tanh, s.clone()).unwrap(), &c).unwrap();
                Expr::chain(&[Expr::copy(&v), both, prims::mul(Rig::Real, s.clone()).unwrap()]).unwrap()
            })
            .collect();
        let re = Expr::par_all(&wires).unwrap();
        let g = reparam(&f, &re, f.inits().to_vec()).unwrap();
        let wide = f.param().clone();
        let q = random_values(&mut r, &wide);
        let x = random_values(&mut r, f.input());
        let dy = random_values(&mut r, f.output());
        let (_, dq) = para_differentiate(&g).backward(&x, &q, &dy).unwrap();
        let p = evaluate(&re, &q).unwrap();
        let (_, dp) = para_differentiate(&f).backward(&x, &p, &dy).unwrap();
        let pulled = differentiate_with(&re, ComposeMode::Memoised).backward(&q, &dp).unwrap();
        prop_assert!(max_diff(&dq, &pulled) <= 1e-10);
    }

    #[test]
    fn batch_gradient_is_sum_of_singletons(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let f = dense(Rig::Real, 3, 2, Activation::Sigmoid).unwrap();
        let loss = |k: usize| {
            let model = batching(&f, k).unwrap();
            Learner::new(model.clone(), mse(model.output()).unwrap(), constant_rate(1.0),
                gradient_ascent(model.param()), LearnMode::ParamLearning, ComposeMode::Memoised).unwrap()
        };
        let p = f.init_params(r.gen()).unwrap();
        let xs: Vec<Tensor> = (0..n).flat_map(|_| random_values(&mut r, f.input())).collect();
        let ys: Vec<Tensor> = (0..n).flat_map(|_| random_values(&mut r, f.output())).collect();
        let whole = loss(n).update_traced(&state(&p), &xs, &ys).unwrap().1.param_grad;
        let single = loss(1);
        let mut acc: Option<Vec<Tensor>> = None;
        for i in 0..n {
            let g = single.update_traced(&state(&p), &xs[i..i + 1], &ys[i..i + 1]).unwrap().1.param_grad;
            acc = Some(match acc { None => g, Some(a) => add_all(&a, &g) });
        }
        prop_assert!(max_diff(&whole, &acc.unwrap()) <= 1e-10);
    }

    #[test]
    fn learner_updates_agree_across_compose_modes(seed in any::<u64>(), depth in 2usize..=6) {
        let mut r = rng(seed);
        let model = probe_chain(depth, 3).unwrap();
        let build = |mode| Learner::new(model.clone(), mse(model.output()).unwrap(), constant_rate(0.1),
            gradient_descent(model.param()), LearnMode::ParamLearning, mode).unwrap();
        let p = model.init_params(r.gen()).unwrap();
        let x = random_values(&mut r, model.input());
        let y = random_values(&mut r, model.output());
        let (a, ta) = build(ComposeMode::Memoised).update_traced(&state(&p), &x, &y).unwrap();
        let (b, tb) = build(ComposeMode::Checkpointed).update_traced(&state(&p), &x, &y).unwrap();
        prop_assert!(max_diff(&a.params, &b.params) <= 1e-12);
        prop_assert!(ta.report.fwd("layer1") < tb.report.fwd("layer1"));
    }

    #[test]
    fn stateless_optimisers_forward_parameters(seed in any::<u64>(), z2 in any::<bool>()) {
        let mut r = rng(seed);
        let rig = rig_of(z2);
        let port = Port::new(rig, vec![Shape::vector(r.gen_range(1..=4)), Shape::matrix(2, 3)]);
        let p = random_values(&mut r, &port);
        for opt in [gradient_ascent(&port), gradient_descent(&port), gda(&port, &Port::unit(rig)).unwrap()] {
            prop_assert_eq!(opt.lens().forward(&p).unwrap(), p.clone());
        }
    }

    #[test]
    fn optimiser_increments_are_linear_in_the_gradient(seed in any::<u64>()) {
        let mut r = rng(seed);
        let port = Port::vector(Rig::Real, r.gen_range(1..=5));
        let opts: Vec<Optimiser> = vec![
            gradient_ascent(&port),
            gradient_descent(&port),
            momentum(&port, 0.9).unwrap(),
            nesterov(&port, 0.5).unwrap(),
        ];
        for opt in opts {
            let s: Vec<Tensor> = opt.state().shapes().iter().map(|sh| paralens::check::gen::real_tensor(&mut r, sh, -1.0, 1.0)).collect();
            let p = random_values(&mut r, &port);
            let (a, b) = (random_values(&mut r, &port), random_values(&mut r, &port));
            let zero = port.zeros();
            let inc = |g: &[Tensor]| -> Vec<Tensor> {
                let (_, full) = opt.update(&s, &p, g).unwrap();
                let (_, base) = opt.update(&s, &p, &zero).unwrap();
                full.iter().zip(&base).map(|(x, y)| x.sub(y).unwrap()).collect()
            };
            let err = max_diff(&inc(&add_all(&a, &b)), &add_all(&inc(&a), &inc(&b)));
            prop_assert!(err <= 1e-10, "{}: {err}", opt.name());
        }
    }
}

fn state(p: &[Tensor]) -> paralens::learner::TrainState {
    paralens::learner::TrainState {
        params: p.to_vec(),
        opt_state: vec![],
        step: 0,
        history: Default::default(),
    }
}
