//! Closing a model, a loss, a learning rate and an optimiser into one lens
//! whose backward pass is the update step.
//!
//! The closed system for parameter learning is
//!
//! ```text
//! [X, S, P, Yt] --(id x U x id)--> [X, P, Yt] --(R[f] x id)--> [Y, Yt] --R[loss]--> [L] --rate--> 1
//! ```
//!
//! and running it forward then backward yields `(x', s', p_new, y_t')`.
//! Deep dreaming moves the optimiser onto the input wires instead. The seams
//! between these stages are composed memoised; the model's own composition
//! follows the learner's [`ComposeMode`].

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{differentiate, Expr};
use crate::error::{Error, Result};
use crate::lens::{self, ComposeMode, EvalReport, Lens, Port};
use crate::loss::{dot_loss, LearningRate, LossFn};
use crate::optim::{gda, Optimiser};
use crate::para::{batching, para_differentiate_with, para_par, para_seq, weight_tying, ParaMorph};
use crate::rig::{Rig, RigValue};
use crate::tensor::Tensor;

/// Losses kept in [`TrainState::history`].
pub const HISTORY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LearnMode {
    #[default]
    ParamLearning,
    DeepDreaming,
}

#[derive(Clone, Debug)]
pub struct Learner {
    model: ParaMorph,
    loss: LossFn,
    rate: LearningRate,
    optimiser: Optimiser,
    mode: LearnMode,
    compose: ComposeMode,
    prefix: Lens,
    costate: Lens,
}

/// What one update computed besides the new state.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub loss: RigValue,
    /// Gradient that reached the input wires; discarded by parameter
    /// learning.
    pub input_grad: Vec<Tensor>,
    /// Gradient that reached the label wires; always discarded.
    pub label_grad: Vec<Tensor>,
    /// Gradient that reached the parameter wires; discarded by deep
    /// dreaming.
    pub param_grad: Vec<Tensor>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// The learned tensors: model parameters, or the dreamed input.
    pub params: Vec<Tensor>,
    pub opt_state: Vec<Tensor>,
    pub step: u64,
    pub history: VecDeque<f64>,
}

impl TrainState {
    fn advanced(&self, params: Vec<Tensor>, opt_state: Vec<Tensor>, loss: f64) -> TrainState {
        let mut history = self.history.clone();
        if history.len() == HISTORY {
            history.pop_front();
        }
        history.push_back(loss);
        TrainState {
            params,
            opt_state,
            step: self.step + 1,
            history,
        }
    }
}

/// Payoff as a float: the real value, or 0/1 for a bit.
pub fn payoff_value(v: RigValue) -> f64 {
    match v {
        RigValue::Real(x) => x,
        RigValue::Bit(b) => f64::from(u8::from(b)),
    }
}

impl Learner {
    pub fn new(
        model: ParaMorph,
        loss: LossFn,
        rate: LearningRate,
        optimiser: Optimiser,
        mode: LearnMode,
        compose: ComposeMode,
    ) -> Result<Learner> {
        if model.output() != loss.output() {
            return Err(Error::Composition {
                left: model.output().to_string(),
                right: loss.output().to_string(),
            });
        }
        let learned = match mode {
            LearnMode::ParamLearning => model.param(),
            LearnMode::DeepDreaming => model.input(),
        };
        if optimiser.param() != learned {
            return Err(Error::Composition {
                left: optimiser.param().to_string(),
                right: learned.to_string(),
            });
        }
        if rate.rig() != model.rig() {
            return Err(Error::RigMismatch {
                op: "learner",
                left: model.rig(),
                right: rate.rig(),
            });
        }
        let label = loss.output();
        let id_x = lens::identity_lens(model.input());
        let id_p = lens::identity_lens(model.param());
        let id_y = lens::identity_lens(label);
        let route = match mode {
            LearnMode::ParamLearning => {
                lens::par_all(&[id_x, optimiser.lens().clone(), id_y.clone()])?
            }
            LearnMode::DeepDreaming => {
                lens::par_all(&[optimiser.lens().clone(), id_p, id_y.clone()])?
            }
        };
        let model_lens = para_differentiate_with(&model, compose);
        let predict = lens::par_lens(model_lens.lens(), &id_y)?;
        let loss_lens = differentiate(loss.body());
        let prefix = lens::compose_chain(&[route, predict, loss_lens], ComposeMode::Memoised)?;
        Ok(Learner {
            costate: rate.costate(),
            model,
            loss,
            rate,
            optimiser,
            mode,
            compose,
            prefix,
        })
    }

    pub fn model(&self) -> &ParaMorph {
        &self.model
    }

    pub fn loss(&self) -> &LossFn {
        &self.loss
    }

    pub fn rate(&self) -> &LearningRate {
        &self.rate
    }

    pub fn optimiser(&self) -> &Optimiser {
        &self.optimiser
    }

    pub fn mode(&self) -> LearnMode {
        self.mode
    }

    pub fn compose_mode(&self) -> ComposeMode {
        self.compose
    }

    /// The closed system up to the payoff, before the learning rate.
    pub fn prefix(&self) -> &Lens {
        &self.prefix
    }

    /// The whole closed system `prefix ; rate`, a lens into the unit.
    pub fn closed(&self) -> Result<Lens> {
        lens::compose_lens(&self.prefix, &self.costate, ComposeMode::Memoised)
    }

    pub fn with_compose_mode(&self, compose: ComposeMode) -> Result<Learner> {
        Learner::new(
            self.model.clone(),
            self.loss.clone(),
            self.rate,
            self.optimiser.clone(),
            self.mode,
            compose,
        )
    }

    /// Parameters drawn from the model's initialisers and a fresh optimiser
    /// state.
    pub fn init_state(&self, seed: u64) -> Result<TrainState> {
        if self.mode != LearnMode::ParamLearning {
            return Err(Error::Argument(
                "init_state is for parameter learning; use dream_state".into(),
            ));
        }
        Ok(TrainState {
            params: self.model.init_params(seed)?,
            opt_state: self.optimiser.init_state(),
            step: 0,
            history: VecDeque::new(),
        })
    }

    /// Starting point for deep dreaming on input `x`.
    pub fn dream_state(&self, x: Vec<Tensor>) -> Result<TrainState> {
        if self.mode != LearnMode::DeepDreaming {
            return Err(Error::Argument(
                "dream_state needs a deep dreaming learner".into(),
            ));
        }
        self.model.input().check(&x, "dream input")?;
        Ok(TrainState {
            params: x,
            opt_state: self.optimiser.init_state(),
            step: 0,
            history: VecDeque::new(),
        })
    }

    /// Runs the closed lens forward to the payoff, seeds the backward pass
    /// with the learning rate, and returns every wire's backward value.
    fn run(&self, input: &[Tensor]) -> Result<(RigValue, Vec<Tensor>, EvalReport)> {
        let mut report = EvalReport::default();
        let (payoff, tape) = self.prefix.forward_tape(input, &mut report)?;
        let seed = self.costate.backward(&payoff, &[])?;
        let back = self.prefix.backward_tape(tape, &seed, &mut report)?;
        Ok((payoff[0].get(0), back, report))
    }

    pub fn update_step(&self, st: &TrainState, x: &[Tensor], y_t: &[Tensor]) -> Result<TrainState> {
        Ok(self.update_traced(st, x, y_t)?.0)
    }

    /// One step of parameter learning together with the discarded wires.
    pub fn update_traced(
        &self,
        st: &TrainState,
        x: &[Tensor],
        y_t: &[Tensor],
    ) -> Result<(TrainState, StepTrace)> {
        if self.mode != LearnMode::ParamLearning {
            return Err(Error::Argument(
                "update_step needs a parameter learning learner".into(),
            ));
        }
        let input = [x, &st.opt_state, &st.params, y_t].concat();
        let (loss, mut back, report) = self.run(&input)?;
        let label_grad = back.split_off(back.len() - y_t.len());
        let mut rest = back.split_off(x.len());
        let params = rest.split_off(st.opt_state.len());
        let next = st.advanced(params, rest, payoff_value(loss));
        Ok((
            next,
            StepTrace {
                loss,
                input_grad: back,
                label_grad,
                param_grad: Vec::new(),
                report,
            },
        ))
    }

    /// One step of deep dreaming: `st.params` holds the input being learned,
    /// `p` the fixed model parameters.
    pub fn dream_step(&self, st: &TrainState, p: &[Tensor], y_i: &[Tensor]) -> Result<TrainState> {
        Ok(self.dream_traced(st, p, y_i)?.0)
    }

    pub fn dream_traced(
        &self,
        st: &TrainState,
        p: &[Tensor],
        y_i: &[Tensor],
    ) -> Result<(TrainState, StepTrace)> {
        if self.mode != LearnMode::DeepDreaming {
            return Err(Error::Argument(
                "dream_step needs a deep dreaming learner".into(),
            ));
        }
        let input = [&st.opt_state, &st.params, p, y_i].concat();
        let (loss, mut back, report) = self.run(&input)?;
        let label_grad = back.split_off(back.len() - y_i.len());
        let param_grad = back.split_off(back.len() - p.len());
        let x_new = back.split_off(st.opt_state.len());
        let next = st.advanced(x_new, back, payoff_value(loss));
        Ok((
            next,
            StepTrace {
                loss,
                input_grad: Vec::new(),
                label_grad,
                param_grad,
                report,
            },
        ))
    }

    /// The same learner on `n` examples at once: the model is batched with
    /// tied parameters, the loss sums over the batch and a Real learning
    /// rate is divided by `n`, so one step follows the mean gradient.
    pub fn batched(&self, n: usize) -> Result<Learner> {
        if self.mode != LearnMode::ParamLearning {
            return Err(Error::Argument(
                "only parameter learning can be batched".into(),
            ));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let model = batching(&self.model, n)?;
        let loss = self.loss.kind().build(model.output())?;
        let rate = match self.rate.rig() {
            Rig::Real => self.rate.scaled(1.0 / n as f64)?,
            Rig::Z2 => self.rate,
        };
        Learner::new(
            model,
            loss,
            rate,
            self.optimiser.clone(),
            self.mode,
            self.compose,
        )
    }
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<Tensor>,
    pub label: Vec<Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    /// Reorders examples each epoch with a generator seeded from `seed`.
    pub shuffle: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            batch_size: Some(1),
            shuffle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub epoch: usize,
    /// Payoff divided by the number of examples in the step.
    pub mean_loss: f64,
    pub fwd_calls: usize,
    pub bwd_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub state: TrainState,
    pub steps: Vec<StepMetrics>,
    pub epochs: Vec<EpochMetrics>,
}

fn concat_examples(batch: &[&Example]) -> (Vec<Tensor>, Vec<Tensor>) {
    let input = batch.iter().flat_map(|e| e.input.iter().cloned()).collect();
    let label = batch.iter().flat_map(|e| e.label.iter().cloned()).collect();
    (input, label)
}

/// Folds [`Learner::update_step`] over the dataset, starting from
/// parameters drawn with `seed`.
pub fn train(
    learner: &Learner,
    data: &[Example],
    opts: TrainOptions,
    seed: u64,
) -> Result<TrainRun> {
    let state = learner.init_state(seed)?;
    train_from(learner, state, data, opts, seed)
}

pub fn train_from(
    learner: &Learner,
    mut state: TrainState,
    data: &[Example],
    opts: TrainOptions,
    seed: u64,
) -> Result<TrainRun> {
    if data.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    let batch = opts.batch_size.unwrap_or(data.len()).min(data.len());
    if batch == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    let mut learners: HashMap<usize, Learner> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut steps = Vec::new();
    let mut epochs = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        if opts.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let l = match learners.get(&chunk.len()) {
                Some(l) => l,
                None => {
                    let b = learner.batched(chunk.len())?;
                    learners.entry(chunk.len()).or_insert(b)
                }
            };
            let examples: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let (x, y) = concat_examples(&examples);
            let (next, trace) = l.update_traced(&state, &x, &y)?;
            let loss = payoff_value(trace.loss);
            total += loss;
            steps.push(StepMetrics {
                step: next.step,
                epoch,
                mean_loss: loss / chunk.len() as f64,
                fwd_calls: trace.report.fwd_calls.values().sum(),
                bwd_calls: trace.report.bwd_calls.values().sum(),
            });
            state = next;
        }
        epochs.push(EpochMetrics {
            epoch,
            mean_loss: total / data.len() as f64,
        });
    }
    Ok(TrainRun {
        state,
        steps,
        epochs,
    })
}

/// `GAN(g, d) = (g x id_X) ; (d x d)` with the two discriminators tied:
/// inputs `[Z, X]`, parameters `[P, Q]`, outputs `[d(g(z)), d(x)]`.
pub fn gan_assemble(g: &ParaMorph, d: &ParaMorph) -> Result<ParaMorph> {
    if g.output() != d.input() {
        return Err(Error::Composition {
            left: g.output().to_string(),
            right: d.input().to_string(),
        });
    }
    let generate = para_par(g, &ParaMorph::identity(d.input()))?;
    let judge = weight_tying(&para_par(d, d)?)?;
    para_seq(&generate, &judge)
}

/// The GAN learner: dot-product loss, constant rate `alpha`, descent on the
/// generator parameters and ascent on the discriminator's.
pub fn gan_learner(
    g: &ParaMorph,
    d: &ParaMorph,
    alpha: f64,
    compose: ComposeMode,
) -> Result<Learner> {
    let gan = gan_assemble(g, d)?;
    let loss = dot_loss(gan.output())?;
    let opt = gda(g.param(), d.param())?;
    Learner::new(
        gan,
        loss,
        crate::loss::constant_rate(alpha),
        opt,
        LearnMode::ParamLearning,
        compose,
    )
}

/// Labels `(generated, real)` filling the discriminator's output port.
pub fn gan_labels(d: &ParaMorph, generated: f64, real: f64) -> Result<Vec<Tensor>> {
    let fill = |c: f64| -> Result<Vec<Tensor>> {
        d.output()
            .shapes()
            .iter()
            .map(|s| Tensor::from_reals(s.clone(), vec![c; s.numel()]))
            .collect()
    };
    Ok([fill(generated)?, fill(real)?].concat())
}

/// The state lens that feeds a runtime input to a parametric map; it is the
/// identity on the input port.
pub fn corner(input: &Port) -> Expr {
    Expr::id(input)
}
