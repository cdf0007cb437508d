//! Verification suites: finite differences, functoriality, the reverse
//! derivative axioms, worked examples, exhaustive Z2 checks and evaluation
//! counters. Each suite returns a [`SuiteReport`] instead of panicking so
//! that the CLI and the test harness can both print them.

pub mod dual;
pub mod examples;
pub mod gen;

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch;
use crate::autodiff::prims::{self, Activation, LEAKY_RELU_SLOPE};
use crate::autodiff::{differentiate, differentiate_with, evaluate, Expr};
use crate::error::Result;
use crate::learner::{LearnMode, Learner, TrainState};
use crate::lens::{compose_lens, ComposeMode, Port};
use crate::loss::{self, constant_rate};
use crate::optim::gradient_descent;
use crate::para::ParaMorph;
use crate::rig::{Rig, RigValue};
use crate::tensor::{Shape, Tensor};

use gen::{composite, pairing, random_composite, random_values, real_tensor, sum_of};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Absolute tolerance for the additivity and pairing axioms.
pub const AXIOM_TOL: f64 = 1e-10;
pub const CHAIN_TOL: f64 = 1e-12;

const KEEP_FAILURES: usize = 8;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failed: usize,
    pub max_error: f64,
    pub elapsed: Duration,
    /// The first few failures, described.
    pub failures: Vec<String>,
    /// Extra lines that do not affect the verdict.
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> SuiteReport {
        SuiteReport {
            name: name.to_string(),
            cases: 0,
            failed: 0,
            max_error: 0.0,
            elapsed: Duration::ZERO,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.cases > 0
    }

    /// Records one case with error `err` against tolerance `tol`.
    fn record(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        if err.is_nan() || err > tol {
            self.fail(what());
        }
        if !err.is_nan() {
            self.max_error = self.max_error.max(err);
        } else {
            self.max_error = f64::NAN;
        }
    }

    fn fail(&mut self, what: String) {
        self.failed += 1;
        if self.failures.len() < KEEP_FAILURES {
            self.failures.push(what);
        }
    }

    fn error(&mut self, what: &str, e: crate::error::Error) {
        self.cases += 1;
        self.fail(format!("{what}: {e}"));
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, {} failed, max error {:.3e}, {:.3}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failed,
            self.max_error,
            self.elapsed.as_secs_f64()
        )?;
        for m in &self.failures {
            write!(f, "\n  - {m}")?;
        }
        for m in &self.notes {
            write!(f, "\n  note: {m}")?;
        }
        Ok(())
    }
}

fn timed(name: &str, body: impl FnOnce(&mut SuiteReport)) -> SuiteReport {
    let mut report = SuiteReport::new(name);
    let start = Instant::now();
    body(&mut report);
    report.elapsed = start.elapsed();
    report
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn pair(a: &[Tensor], b: &[Tensor]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| real(a.dot(b).expect("same shape")))
        .sum()
}

fn real(v: RigValue) -> f64 {
    match v {
        RigValue::Real(x) => x,
        RigValue::Bit(b) => f64::from(u8::from(b)),
    }
}

fn shifted(x: &[Tensor], u: &[Tensor], h: f64) -> Vec<Tensor> {
    x.iter()
        .zip(u)
        .map(|(x, u)| {
            x.add(&u.scale(RigValue::Real(h)).expect("real"))
                .expect("same shape")
        })
        .collect()
}

/// Largest elementwise difference across matching wire lists.
pub fn max_diff(a: &[Tensor], b: &[Tensor]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max)
}

fn add_all(a: &[Tensor], b: &[Tensor]) -> Vec<Tensor> {
    a.iter()
        .zip(b)
        .map(|(a, b)| a.add(b).expect("same shape"))
        .collect()
}

/// Compares `<R[e](x, v), u>` with the central difference of
/// `<v, e(x + h u)>` for `dirs` random directions `u`. Returns the largest
/// relative error.
pub fn fd_pairing(e: &Expr, x: &[Tensor], rng: &mut impl Rng, dirs: usize) -> Result<f64> {
    let v = random_values(rng, e.cod());
    let grad = differentiate(e).backward(x, &v)?;
    let mut worst = 0.0f64;
    for _ in 0..dirs {
        let u = random_values(rng, e.dom());
        let analytic = pair(&grad, &u);
        let up = pair(&v, &evaluate(e, &shifted(x, &u, FD_STEP))?);
        let down = pair(&v, &evaluate(e, &shifted(x, &u, -FD_STEP))?);
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic, numeric));
    }
    Ok(worst)
}

/// A named real expression with the interval its inputs are drawn from.
pub struct Probe {
    pub name: String,
    pub expr: Expr,
    pub lo: f64,
    pub hi: f64,
}

fn probe(name: &str, expr: Result<Expr>) -> Probe {
    probe_in(name, expr, -1.0, 1.0)
}

fn probe_in(name: &str, expr: Result<Expr>, lo: f64, hi: f64) -> Probe {
    Probe {
        name: name.to_string(),
        expr: expr.expect("catalogue entry builds"),
        lo,
        hi,
    }
}

/// Every real primitive, plus the losses and layer bodies built on them.
pub fn real_catalogue() -> Vec<Probe> {
    let r = Rig::Real;
    let v = |n| Shape::vector(n);
    let mut out = vec![
        probe("linear", prims::linear(r, 3, 2)),
        probe("linear_cols", prims::linear_cols(r, 3, 2, 4)),
        probe("bias", prims::bias(r, v(3))),
        probe("bias_cols", prims::bias_cols(r, 2, 3)),
        probe("softargmax", prims::softargmax(r, 4)),
        probe("softargmax_rows", prims::softargmax_rows(r, 2, 3)),
        probe("matmul", prims::matmul(r, 2, 3, 2)),
        probe("transpose", prims::transpose(r, 2, 3)),
        probe("scale", prims::scale(RigValue::Real(0.7), v(3))),
        probe("neg", prims::neg(r, v(3))),
        probe_in("log", prims::log(v(3)), 0.5, 2.0),
        probe("reduce_sum", prims::reduce_sum(r, Shape::matrix(2, 2))),
        probe("mul", prims::mul(r, v(3))),
    ];
    for act in [
        Activation::Identity,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Relu,
        Activation::LeakyRelu(LEAKY_RELU_SLOPE),
        Activation::Gelu,
    ] {
        out.push(probe(&act.to_string(), prims::activation(act, v(4))));
    }
    let y = Port::vector(r, 3);
    out.push(probe("mse", loss::mse(&y).map(|l| l.body().clone())));
    out.push(probe("dot", loss::dot_loss(&y).map(|l| l.body().clone())));
    out.push(probe(
        "sce",
        loss::softargmax_cross_entropy(&y).map(|l| l.body().clone()),
    ));
    out.push(probe("attention", arch::attend(r, 3, 2, 2)));
    out.push(probe(
        "gcnn",
        arch::gcnn_layer(r, 3, 2, 2, Activation::Tanh).map(|m| m.body().clone()),
    ));
    out.push(probe(
        "dense",
        arch::dense(r, 3, 2, Activation::Sigmoid).map(|m| m.body().clone()),
    ));
    out
}

pub const FD_COMPOSITES: usize = 50;
pub const FD_POINTS: usize = 10;

/// Finite-difference check of every real catalogue entry at
/// [`FD_POINTS`] points and of [`FD_COMPOSITES`] random composites, ten
/// directions each.
pub fn fd_suite(seed: u64) -> SuiteReport {
    timed("finite differences", |rep| {
        let mut rng = rng(seed);
        for p in real_catalogue() {
            for _ in 0..FD_POINTS {
                let x: Vec<Tensor> = p
                    .expr
                    .dom()
                    .shapes()
                    .iter()
                    .map(|s| real_tensor(&mut rng, s, p.lo, p.hi))
                    .collect();
                match fd_pairing(&p.expr, &x, &mut rng, 10) {
                    Ok(err) => rep.record(err, FD_TOL, || {
                        format!("{}: relative error {err:.3e}", p.name)
                    }),
                    Err(e) => rep.error(&p.name, e),
                }
            }
        }
        for i in 0..FD_COMPOSITES {
            let e = random_composite(&mut rng, Rig::Real);
            let x = random_values(&mut rng, e.dom());
            match fd_pairing(&e, &x, &mut rng, 10) {
                Ok(err) => rep.record(err, FD_TOL, || {
                    format!("composite {i} {e}: relative error {err:.3e}")
                }),
                Err(err) => rep.error(&format!("composite {i}"), err),
            }
        }
    })
}

fn tol(rig: Rig, real: f64) -> f64 {
    match rig {
        Rig::Real => real,
        Rig::Z2 => 0.0,
    }
}

fn composable(rng: &mut impl Rng, rig: Rig) -> (Expr, Expr) {
    let (a, k, b) = (
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
    );
    (composite(rng, rig, a, k, 3), composite(rng, rig, k, b, 3))
}

pub const FUNCTORIALITY_INSTANCES: usize = 100;

/// `R[f ; g]` against `R[f] ; R[g]` in both composition modes, and the
/// forward part of `R[e]` against direct evaluation.
pub fn functoriality_suite(seed: u64) -> SuiteReport {
    timed("functoriality", |rep| {
        let mut rng = rng(seed);
        for rig in [Rig::Real, Rig::Z2] {
            for i in 0..FUNCTORIALITY_INSTANCES {
                let (f, g) = composable(&mut rng, rig);
                let fg = Expr::seq(&f, &g).expect("composable");
                let x = random_values(&mut rng, f.dom());
                let v = random_values(&mut rng, g.cod());
                let direct = match evaluate(&fg, &x) {
                    Ok(y) => y,
                    Err(e) => return rep.error("evaluate", e),
                };
                let mut worst = 0.0f64;
                let mut run = || -> Result<()> {
                    for mode in [ComposeMode::Memoised, ComposeMode::Checkpointed] {
                        let whole = differentiate_with(&fg, mode);
                        let parts = compose_lens(
                            &differentiate_with(&f, mode),
                            &differentiate_with(&g, mode),
                            mode,
                        )?;
                        worst = worst.max(max_diff(&whole.forward(&x)?, &parts.forward(&x)?));
                        worst =
                            worst.max(max_diff(&whole.backward(&x, &v)?, &parts.backward(&x, &v)?));
                        // the forward part of R[e] is e itself
                        worst = worst.max(max_diff(&whole.forward(&x)?, &direct));
                    }
                    Ok(())
                };
                match run() {
                    Ok(()) => rep.record(worst, tol(rig, CHAIN_TOL), || {
                        format!("{rig} instance {i}: {fg}: error {worst:.3e}")
                    }),
                    Err(e) => rep.error(&format!("{rig} instance {i}"), e),
                }
            }
        }
    })
}

pub const RDC_INSTANCES: usize = 100;

/// Axioms 1 to 5 of a reverse derivative combinator, on random composites
/// over both rigs.
pub fn rdc_suite(seed: u64) -> SuiteReport {
    timed("reverse derivative axioms", |rep| {
        let mut rng = rng(seed);
        for rig in [Rig::Real, Rig::Z2] {
            for i in 0..RDC_INSTANCES {
                if let Err(e) = rdc_instance(&mut rng, rig, i, rep) {
                    rep.error(&format!("{rig} instance {i}"), e);
                }
            }
        }
    })
}

fn rdc_instance(rng: &mut impl Rng, rig: Rig, i: usize, rep: &mut SuiteReport) -> Result<()> {
    let (a, b, c) = (
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
    );
    let f = composite(rng, rig, a, b, 3);
    let g = composite(rng, rig, a, b, 3);
    let h = composite(rng, rig, a, c, 3);
    let x = random_values(rng, f.dom());
    let (va, vb) = (random_values(rng, f.cod()), random_values(rng, f.cod()));
    let rf = differentiate(&f);
    let rg = differentiate(&g);

    // 1. R[f + g] = R[f] + R[g]
    let lhs = differentiate(&sum_of(&f, &g)).backward(&x, &va)?;
    let rhs = add_all(&rf.backward(&x, &va)?, &rg.backward(&x, &va)?);
    let err = max_diff(&lhs, &rhs);
    rep.record(err, tol(rig, AXIOM_TOL), || {
        format!("axiom 1, {rig} instance {i}: {err:.3e}")
    });

    // 2. additive in the cotangent, zero to zero
    let lhs = rf.backward(&x, &add_all(&va, &vb))?;
    let rhs = add_all(&rf.backward(&x, &va)?, &rf.backward(&x, &vb)?);
    let err = max_diff(&lhs, &rhs);
    rep.record(err, tol(rig, AXIOM_TOL), || {
        format!("axiom 2 (sum), {rig} instance {i}: {err:.3e}")
    });
    let zero = rf.backward(&x, &f.cod().zeros())?;
    let err = max_diff(&zero, &f.dom().zeros());
    rep.record(err, tol(rig, AXIOM_TOL), || {
        format!("axiom 2 (zero), {rig} instance {i}: {err:.3e}")
    });

    // 3. identities and projections
    let id = differentiate(&Expr::id(f.dom())).backward(&x, &x)?;
    let err = max_diff(&id, &x);
    rep.record(err, 0.0, || {
        format!("axiom 3 (identity), {rig} instance {i}")
    });
    let both = f.dom().tensor(f.cod())?;
    let ab = [x.clone(), va.clone()].concat();
    for k in 0..both.arity() {
        let proj = Expr::proj(&both, k)?;
        let cot = random_values(rng, proj.cod());
        let got = differentiate(&proj).backward(&ab, &cot)?;
        let mut want = both.zeros();
        want[k] = cot[0].clone();
        let err = max_diff(&got, &want);
        rep.record(err, 0.0, || {
            format!("axiom 3 (projection {k}), {rig} instance {i}")
        });
    }

    // 4. pairings
    let vc = random_values(rng, h.cod());
    let lhs = differentiate(&pairing(&f, &h)).backward(&x, &[va.clone(), vc.clone()].concat())?;
    let rhs = add_all(
        &rf.backward(&x, &va)?,
        &differentiate(&h).backward(&x, &vc)?,
    );
    let err = max_diff(&lhs, &rhs);
    rep.record(err, tol(rig, AXIOM_TOL), || {
        format!("axiom 4, {rig} instance {i}: {err:.3e}")
    });

    // 5. chain rule: R[f ; k](x, v) = R[f](x, R[k](f(x), v)), exactly
    let k = composite(rng, rig, b, c, 3);
    let fk = Expr::seq(&f, &k)?;
    let vk = random_values(rng, k.cod());
    let lhs = differentiate(&fk).backward(&x, &vk)?;
    let inner = differentiate(&k).backward(&evaluate(&f, &x)?, &vk)?;
    let rhs = rf.backward(&x, &inner)?;
    let err = max_diff(&lhs, &rhs);
    rep.record(err, 0.0, || {
        format!("axiom 5, {rig} instance {i}: {err:.3e}")
    });
    Ok(())
}

pub const EXAMPLE_INSTANCES: usize = 100;

/// The worked examples against their hand-written update equations.
pub fn examples_suite(seed: u64) -> SuiteReport {
    timed("worked examples", |rep| {
        let mut rng = rng(seed);
        match examples::all(&mut rng, EXAMPLE_INSTANCES) {
            Ok((all, shortcut)) => {
                for a in all {
                    rep.cases += a.instances;
                    rep.max_error = rep.max_error.max(a.max_error);
                    if !a.holds() {
                        rep.fail(format!(
                            "{}: error {:.3e} over {} instances",
                            a.name, a.max_error, a.instances
                        ));
                    }
                    rep.notes.push(format!(
                        "{}: {} instances, max error {:.3e}",
                        a.name, a.instances, a.max_error
                    ));
                }
                rep.notes.push(format!(
                    "softargmax shortcut R[f](x, p, alpha softargmax(f(x, p) - y_t)) deviates by up to {shortcut:.3e} (not gating)"
                ));
            }
            Err(e) => rep.error("worked examples", e),
        }
    })
}

/// Z2 circuits small enough to enumerate: each primitive, the gates, layer
/// bodies, and random composites.
pub fn z2_catalogue(seed: u64) -> Vec<(String, Expr)> {
    let z = Rig::Z2;
    let v = |n| Shape::vector(n);
    let named =
        |name: &str, e: Result<Expr>| (name.to_string(), e.expect("catalogue entry builds"));
    let mut out = vec![
        named("linear", prims::linear(z, 2, 2)),
        named("linear 3x1", prims::linear(z, 3, 1)),
        named("linear_cols", prims::linear_cols(z, 2, 2, 2)),
        named("bias", prims::bias(z, v(3))),
        named("bias_cols", prims::bias_cols(z, 2, 2)),
        named("matmul", prims::matmul(z, 2, 2, 2)),
        named("transpose", prims::transpose(z, 2, 3)),
        named("scale", prims::scale(RigValue::Bit(true), v(3))),
        named("neg", prims::neg(z, v(3))),
        named("reduce_sum", prims::reduce_sum(z, v(4))),
        named("mul", prims::mul(z, v(3))),
        named(
            "identity",
            prims::activation_over(z, Activation::Identity, v(3)),
        ),
        named("xor", Ok(prims::xor(v(2)))),
        named("and", Ok(prims::and(v(2)))),
        named("not", Ok(prims::not(v(3)))),
        named(
            "xor_loss",
            loss::xor_loss(&Port::vector(z, 3)).map(|l| l.body().clone()),
        ),
        named(
            "xor_loss two wires",
            loss::xor_loss(&Port::new(z, vec![v(1), v(2)])).map(|l| l.body().clone()),
        ),
        named(
            "two-gate circuit",
            two_gate_circuit().map(|m| m.body().clone()),
        ),
        named(
            "dense",
            arch::dense(z, 2, 2, Activation::Identity).map(|m| m.body().clone()),
        ),
        named(
            "gcnn",
            arch::gcnn_layer(z, 2, 1, 1, Activation::Identity).map(|m| m.body().clone()),
        ),
    ];
    let mut rng = rng(seed);
    for i in 0..40 {
        let (a, b) = (rng.gen_range(1..=8), rng.gen_range(1..=4));
        out.push((format!("composite {i}"), composite(&mut rng, z, a, b, 4)));
    }
    out
}

/// `f(x, p) = (p_1 and x_1) xor (p_2 and x_2)` on two input bits.
pub fn two_gate_circuit() -> Result<ParaMorph> {
    let bits = Port::vector(Rig::Z2, 2);
    // the XOR of the two gates, as a product with the all-ones column
    let ones = Expr::constant(Rig::Z2, vec![Tensor::ones(Rig::Z2, Shape::matrix(2, 1))])?;
    let body = Expr::chain(&[
        prims::and(Shape::vector(2)),
        Expr::par(&Expr::id(&bits), &ones)?,
        prims::linear(Rig::Z2, 2, 1)?,
    ])?;
    ParaMorph::new(bits.clone(), bits, body, vec![crate::para::Init::Bits])
}

/// Every Z2 catalogue entry: the reverse derivative against the Jacobian
/// computed by dual numbers, at every input. One case per input.
pub fn z2_suite(seed: u64) -> SuiteReport {
    timed("exhaustive Z2", |rep| {
        for (name, e) in z2_catalogue(seed) {
            match dual::check_exhaustive(&e) {
                Ok(Ok(n)) => rep.cases += n,
                Ok(Err(msg)) => {
                    rep.cases += 1;
                    rep.max_error = 1.0;
                    rep.fail(format!("{name}: {msg}"));
                }
                Err(err) => rep.error(&name, err),
            }
        }
        gate_tables(rep);
    })
}

/// The gate reverse derivatives as literal truth tables.
fn gate_tables(rep: &mut SuiteReport) {
    let b = |v: bool| Tensor::bit_vector(vec![v]);
    let gates = [
        ("xor", prims::xor(Shape::vector(1))),
        ("and", prims::and(Shape::vector(1))),
    ];
    for (name, e) in gates {
        let lens = differentiate(&e);
        for m in 0..8u8 {
            let (x, y, a) = (m & 1 == 1, m & 2 == 2, m & 4 == 4);
            let got = lens.backward(&[b(x), b(y)], &[b(a)]).expect("typed");
            let want = if name == "xor" {
                [a, a]
            } else {
                [a & y, a & x]
            };
            let ok = got == [b(want[0]), b(want[1])];
            rep.record(if ok { 0.0 } else { 1.0 }, 0.0, || {
                format!("{name} table at x={x} y={y} a={a}")
            });
        }
    }
    let not = differentiate(&prims::not(Shape::vector(1)));
    for m in 0..4u8 {
        let (x, a) = (m & 1 == 1, m & 2 == 2);
        let ok = not.backward(&[b(x)], &[b(a)]).expect("typed") == [b(a)];
        rep.record(if ok { 0.0 } else { 1.0 }, 0.0, || {
            format!("not table at x={x} a={a}")
        });
    }
}

/// One traced update of a right-nested chain of `depth` probe layers.
#[derive(Debug, Clone)]
pub struct CounterRun {
    /// Forward calls of `layer1..layerN`.
    pub fwd: Vec<usize>,
    pub peak_residuals: usize,
    pub state: TrainState,
}

pub fn counter_run(depth: usize, mode: ComposeMode, seed: u64) -> Result<CounterRun> {
    let model = arch::probe_chain(depth, 3)?;
    let learner = Learner::new(
        model.clone(),
        loss::mse(model.output())?,
        constant_rate(0.1),
        gradient_descent(model.param()),
        LearnMode::ParamLearning,
        mode,
    )?;
    let mut rng = rng(seed);
    let st = learner.init_state(seed)?;
    let x = random_values(&mut rng, model.input());
    let y = random_values(&mut rng, model.output());
    let (state, trace) = learner.update_traced(&st, &x, &y)?;
    Ok(CounterRun {
        fwd: (1..=depth)
            .map(|i| trace.report.fwd(&format!("layer{i}")))
            .collect(),
        peak_residuals: trace.report.peak_residuals,
        state,
    })
}

/// Forward counts per layer for one update, with the updated state.
pub fn layer_counts(
    depth: usize,
    mode: ComposeMode,
    seed: u64,
) -> Result<(Vec<usize>, TrainState)> {
    let r = counter_run(depth, mode, seed)?;
    Ok((r.fwd, r.state))
}

pub const COUNTER_DEPTHS: std::ops::RangeInclusive<usize> = 2..=8;

/// Memoised updates run every layer forward once; checkpointed ones run
/// layers `1..n-1` twice and the last once. Both give the same update.
pub fn counter_suite(seed: u64) -> SuiteReport {
    timed("evaluation counters", |rep| {
        for n in COUNTER_DEPTHS {
            let run = || -> Result<(Vec<usize>, Vec<usize>, f64)> {
                let (memo, a) = layer_counts(n, ComposeMode::Memoised, seed)?;
                let (ckpt, b) = layer_counts(n, ComposeMode::Checkpointed, seed)?;
                Ok((memo, ckpt, max_diff(&a.params, &b.params)))
            };
            match run() {
                Ok((memo, ckpt, err)) => {
                    let want: Vec<usize> = (1..=n).map(|i| if i < n { 2 } else { 1 }).collect();
                    rep.record(
                        if memo.iter().all(|&c| c == 1) {
                            0.0
                        } else {
                            1.0
                        },
                        0.0,
                        || format!("depth {n}: memoised counts {memo:?}"),
                    );
                    rep.record(if ckpt == want { 0.0 } else { 1.0 }, 0.0, || {
                        format!("depth {n}: checkpointed counts {ckpt:?}, expected {want:?}")
                    });
                    rep.record(err, CHAIN_TOL, || {
                        format!("depth {n}: modes differ by {err:.3e}")
                    });
                }
                Err(e) => rep.error(&format!("depth {n}"), e),
            }
        }
    })
}

/// All suites with seeds derived from `seed`.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        fd_suite(seed),
        functoriality_suite(seed.wrapping_add(1)),
        rdc_suite(seed.wrapping_add(2)),
        examples_suite(seed.wrapping_add(3)),
        z2_suite(seed.wrapping_add(4)),
        counter_suite(seed.wrapping_add(5)),
    ]
}
