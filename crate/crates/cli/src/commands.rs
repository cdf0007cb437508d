//! The five commands. Each writes its files under an output directory and
//! returns a summary that is also written as `summary.json`.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use paralens::check::{self, SuiteReport};
use paralens::fault::with_flipped_backward;
use paralens::learner::{
    self, gan_labels, gan_learner, payoff_value, LearnMode, Learner, TrainOptions, TrainState,
};
use paralens::loss::{constant_rate, dot_loss};
use paralens::optim::gradient_ascent;
use paralens::{ComposeMode, ParaMorph, Port, Rig, Tensor};

use crate::config::{Loaded, RunConfig};
use crate::io::{self, Jsonl, TensorJson};

#[derive(Debug, Serialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: usize,
    pub mean_loss: f64,
    pub fwd_calls: usize,
    pub bwd_calls: usize,
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub command: &'static str,
    pub rig: String,
    pub compose_mode: String,
    pub seed: u64,
    pub examples: usize,
    pub epochs: usize,
    pub steps: u64,
    pub param_count: usize,
    pub first_epoch_loss: f64,
    pub last_epoch_loss: f64,
    /// Mean loss of the final parameters over the whole dataset.
    pub final_loss: f64,
    /// Examples the final parameters get wrong (Z2 only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatches: Option<usize>,
}

fn logged(step: u64, last: u64, every: usize) -> bool {
    step.is_multiple_of(every.max(1) as u64) || step == last
}

fn single_vector(port: &Port, what: &str) -> Result<usize> {
    match port.shapes() {
        [s] if s.rank() == 1 => Ok(s.numel()),
        _ => bail!("{what} must be a single vector wire, found {port}"),
    }
}

pub fn train(loaded: &Loaded, out: &Path) -> Result<TrainSummary> {
    let cfg = &loaded.config;
    let model = cfg.model()?;
    let learner = cfg.learner(&model)?;
    let rig: Rig = cfg.rig.into();
    let path = loaded.resolve(RunConfig::require("dataset", &cfg.dataset)?);
    let data = io::read_dataset(&path, rig)?;
    let (nx, ny) = (data[0].input[0].len(), data[0].label[0].len());
    ensure!(
        single_vector(model.input(), "model input")? == nx,
        "dataset has {nx} x_ columns, the model input is {}",
        model.input()
    );
    ensure!(
        single_vector(model.output(), "model output")? == ny,
        "dataset has {ny} y_ columns, the model output is {}",
        model.output()
    );
    ensure!(cfg.epochs > 0, "config.epochs: must be positive");
    ensure!(
        cfg.batch_size != Some(0),
        "config.batch_size: must be positive"
    );
    let opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        shuffle: cfg.shuffle,
    };
    let run = learner::train(&learner, &data, opts, cfg.seed)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut metrics = Jsonl::create(&out.join("metrics.jsonl"))?;
    let last = run.state.step;
    for s in run
        .steps
        .iter()
        .filter(|s| logged(s.step, last, cfg.log_every))
    {
        metrics.write(&MetricsRecord {
            step: s.step,
            epoch: s.epoch,
            mean_loss: s.mean_loss,
            fwd_calls: s.fwd_calls,
            bwd_calls: s.bwd_calls,
        })?;
    }
    metrics.finish()?;
    io::write_params(&out.join("params.json"), cfg.rig, &run.state.params)?;

    let p = &run.state.params;
    let mut total = 0.0;
    let mut wrong = 0;
    for e in &data {
        let l = payoff_value(
            learner
                .loss()
                .value(&model.forward(&e.input, p)?, &e.label)?,
        );
        total += l;
        if l != 0.0 {
            wrong += 1;
        }
    }
    let summary = TrainSummary {
        command: "train",
        rig: rig.to_string(),
        compose_mode: ComposeMode::from(cfg.compose_mode).to_string(),
        seed: cfg.seed,
        examples: data.len(),
        epochs: cfg.epochs,
        steps: last,
        param_count: model.param_size(),
        first_epoch_loss: run.epochs[0].mean_loss,
        last_epoch_loss: run.epochs[run.epochs.len() - 1].mean_loss,
        final_loss: total / data.len() as f64,
        mismatches: (rig == Rig::Z2).then_some(wrong),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct DreamRecord {
    pub step: usize,
    /// The chosen output unit before this step's update.
    pub activation: f64,
}

#[derive(Debug, Serialize)]
pub struct DreamSummary {
    pub command: &'static str,
    pub target: usize,
    pub steps: usize,
    pub initial_activation: f64,
    pub final_activation: f64,
    pub input: Vec<f64>,
}

pub fn dream(loaded: &Loaded, out: &Path) -> Result<DreamSummary> {
    let cfg = &loaded.config;
    let d = RunConfig::require("dream", &cfg.dream)?;
    ensure!(
        cfg.rig == crate::config::RigName::Real,
        "config.rig: dreaming needs the real rig"
    );
    let model = cfg.model()?;
    let n_in = single_vector(model.input(), "model input")?;
    let n_out = single_vector(model.output(), "model output")?;
    ensure!(
        d.input.len() == n_in,
        "config.dream.input: {} values for a model input of {n_in}",
        d.input.len()
    );
    ensure!(
        d.target < n_out,
        "config.dream.target: {} is out of range for {n_out} outputs",
        d.target
    );
    let p = io::read_params(&loaded.resolve(&d.params), model.param())?;
    let learner = Learner::new(
        model.clone(),
        dot_loss(model.output())?,
        constant_rate(d.rate),
        gradient_ascent(model.input()),
        LearnMode::DeepDreaming,
        cfg.compose_mode.into(),
    )?;
    let mut onehot = vec![0.0; n_out];
    onehot[d.target] = 1.0;
    let mask = [Tensor::vector(onehot)];
    let chosen = |x: &[Tensor]| -> Result<f64> {
        let y = model.forward(x, &p)?;
        Ok(y[0].reals().expect("real output")[d.target])
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut log = Jsonl::create(&out.join("dream_metrics.jsonl"))?;
    let mut st: TrainState = learner.dream_state(vec![Tensor::vector(d.input.clone())])?;
    let initial = chosen(&st.params)?;
    for step in 0..d.steps {
        if logged(step as u64, 0, cfg.log_every) {
            log.write(&DreamRecord {
                step,
                activation: chosen(&st.params)?,
            })?;
        }
        st = learner.dream_step(&st, &p, &mask)?;
    }
    let last = chosen(&st.params)?;
    log.write(&DreamRecord {
        step: d.steps,
        activation: last,
    })?;
    log.finish()?;
    let summary = DreamSummary {
        command: "dream",
        target: d.target,
        steps: d.steps,
        initial_activation: initial,
        final_activation: last,
        input: st.params[0].reals().expect("real input").to_vec(),
    };
    io::write_json(&out.join("dream.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct GanRecord {
    pub step: usize,
    pub d_real: f64,
    pub d_fake: f64,
    pub gap: f64,
}

#[derive(Debug, Serialize)]
pub struct GanSummary {
    pub command: &'static str,
    pub steps: usize,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub generator: Vec<TensorJson>,
    pub discriminator: Vec<TensorJson>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, [lo, hi]: [f64; 2]) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

fn score(d: &ParaMorph, x: &Tensor, q: &[Tensor]) -> Result<f64> {
    let y = d.forward(std::slice::from_ref(x), q)?;
    Ok(y.iter().map(|t| payoff_value(t.sum_all())).sum())
}

pub fn gan(loaded: &Loaded, out: &Path) -> Result<GanSummary> {
    let cfg = &loaded.config;
    let gc = RunConfig::require("gan", &cfg.gan)?;
    ensure!(
        cfg.rig == crate::config::RigName::Real,
        "config.rig: the GAN needs the real rig"
    );
    ensure!(
        gc.noise[0] < gc.noise[1],
        "config.gan.noise: empty interval"
    );
    ensure!(gc.real[0] < gc.real[1], "config.gan.real: empty interval");
    ensure!(
        gc.eval_samples > 0,
        "config.gan.eval_samples: must be positive"
    );
    let g = gc
        .generator
        .build(Rig::Real)
        .context("config.gan.generator")?;
    let d = gc
        .discriminator
        .build(Rig::Real)
        .context("config.gan.discriminator")?;
    let nz = single_vector(g.input(), "generator input")?;
    let nx = single_vector(d.input(), "discriminator input")?;
    let learner = gan_learner(&g, &d, gc.alpha, cfg.compose_mode.into())?;
    let labels = gan_labels(&d, gc.labels[0], gc.labels[1])?;
    let p = match &gc.generator_init {
        Some(ts) => io::tensors_from_json(ts, g.param(), "config.gan.generator_init")?,
        None => g.init_params(cfg.seed)?,
    };
    let q = match &gc.discriminator_init {
        Some(ts) => io::tensors_from_json(ts, d.param(), "config.gan.discriminator_init")?,
        None => d.init_params(cfg.seed.wrapping_add(1))?,
    };
    let k = p.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zs: Vec<Tensor> = (0..gc.eval_samples)
        .map(|_| uniform(&mut rng, nz, gc.noise))
        .collect();
    let xs: Vec<Tensor> = (0..gc.eval_samples)
        .map(|_| uniform(&mut rng, nx, gc.real))
        .collect();
    let measure = |params: &[Tensor], step: usize| -> Result<GanRecord> {
        let (p, q) = params.split_at(k);
        let (mut real, mut fake) = (0.0, 0.0);
        for (z, x) in zs.iter().zip(&xs) {
            fake += score(&d, &g.forward(std::slice::from_ref(z), p)?[0], q)?;
            real += score(&d, x, q)?;
        }
        let n = gc.eval_samples as f64;
        let (d_real, d_fake) = (real / n, fake / n);
        Ok(GanRecord {
            step,
            d_real,
            d_fake,
            gap: (d_real - d_fake).abs(),
        })
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut log = Jsonl::create(&out.join("gan_metrics.jsonl"))?;
    let mut st = TrainState {
        params: [p, q].concat(),
        opt_state: learner.optimiser().init_state(),
        step: 0,
        history: Default::default(),
    };
    let first = measure(&st.params, 0)?;
    let initial_gap = first.gap;
    log.write(&first)?;
    for step in 1..=gc.steps {
        let z = uniform(&mut rng, nz, gc.noise);
        let x = uniform(&mut rng, nx, gc.real);
        st = learner.update_step(&st, &[z, x], &labels)?;
        if logged(step as u64, gc.steps as u64, cfg.log_every) {
            log.write(&measure(&st.params, step)?)?;
        }
    }
    log.finish()?;
    let final_gap = measure(&st.params, gc.steps)?.gap;
    let (p, q) = st.params.split_at(k);
    let summary = GanSummary {
        command: "gan",
        steps: gc.steps,
        initial_gap,
        final_gap,
        generator: p.iter().map(TensorJson::from_tensor).collect(),
        discriminator: q.iter().map(TensorJson::from_tensor).collect(),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct BenchRow {
    pub depth: usize,
    pub mode: String,
    /// Forward calls of `layer1..layerN` during one update.
    pub fwd_calls: Vec<usize>,
    pub residuals: usize,
}

#[derive(Debug, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// Whether both modes produced the same parameters at every depth
    /// (`None` when only one mode ran).
    pub updates_agree: Option<bool>,
}

pub fn bench(depths: &[usize], modes: &[ComposeMode], seed: u64) -> Result<BenchTable> {
    let mut rows = Vec::new();
    let mut agree = true;
    for &depth in depths {
        ensure!(depth >= 2, "bench depths must be at least 2, got {depth}");
        let mut states = Vec::new();
        for &mode in modes {
            let run = check::counter_run(depth, mode, seed)?;
            rows.push(BenchRow {
                depth,
                mode: mode.to_string(),
                fwd_calls: run.fwd,
                residuals: run.peak_residuals,
            });
            states.push(run.state);
        }
        agree &= states.windows(2).all(|w| w[0].params == w[1].params);
    }
    Ok(BenchTable {
        rows,
        updates_agree: (modes.len() > 1).then_some(agree),
    })
}

pub fn render_bench(t: &BenchTable) -> String {
    let mut s = String::from("depth  mode          residuals  fwd calls per layer\n");
    for r in &t.rows {
        let calls: Vec<String> = r.fwd_calls.iter().map(usize::to_string).collect();
        s += &format!(
            "{:<6} {:<13} {:<10} {}\n",
            r.depth,
            r.mode,
            r.residuals,
            calls.join(" ")
        );
    }
    if let Some(a) = t.updates_agree {
        s += &format!(
            "updates agree across modes: {}\n",
            if a { "yes" } else { "NO" }
        );
    }
    s
}

/// Runs every suite, optionally with one primitive's backward pass negated.
pub fn check(seed: u64, flip: Option<&str>) -> Vec<SuiteReport> {
    match flip {
        Some(label) => with_flipped_backward(label, || check::run_all(seed)),
        None => check::run_all(seed),
    }
}
