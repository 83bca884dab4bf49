use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::{
    load_dataset, run_callbacks, ActionConfig, Callback, CallbackContext, Checkpoint, DataStream,
    Event, Optimizer, RuntimeError, TensorDump,
};
use crate::backend::{backward, BackendError, Batch, ParamStore, Plan, RunOptions};
use crate::graph::{parameter_hash, Graph};
use crate::typesys::NeuralType;

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean loss of each step, before its update.
    pub losses: Vec<f32>,
    pub events: Vec<Event>,
    pub start_step: u64,
    pub final_step: u64,
    pub param_hash: u64,
    /// Full state after the last step, ready to resume from.
    pub checkpoint: Checkpoint,
}

fn sink_type<'g>(g: &'g Graph, sink: &crate::graph::PortRef) -> &'g NeuralType {
    &g.instance(&sink.instance)
        .and_then(|i| i.output(&sink.port))
        .expect("sinks name existing ports")
        .ty
}

/// The single sink holding a scalar tagged `Loss` (or a subtag of it).
pub fn find_loss_sink(g: &Graph) -> Result<String, RuntimeError> {
    let h = g.hierarchy();
    let loss = h
        .tag("Loss")
        .map_err(|e| RuntimeError::InvalidConfig(e.to_string()))?;
    let found: Vec<String> = g
        .sinks()
        .iter()
        .filter(|s| matches!(sink_type(g, s), NeuralType::NonTensor(t) if h.is_subtag(t, &loss).unwrap_or(false)))
        .map(|s| s.to_string())
        .collect();
    match found.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(RuntimeError::NoScalarLoss(found.len())),
    }
}

fn metric_sinks(g: &Graph) -> Vec<String> {
    g.sinks()
        .iter()
        .filter(|s| matches!(sink_type(g, s), NeuralType::NonTensor(_)))
        .map(|s| s.to_string())
        .collect()
}

/// One stream per data layer with the batch size it serves.
struct Feeder {
    streams: Vec<(DataStream, usize)>,
}

impl Feeder {
    fn new(
        g: &Graph,
        plan: &Plan,
        cfg: &ActionConfig,
        ordered: bool,
    ) -> Result<Feeder, RuntimeError> {
        let mut streams = Vec::new();
        for src in plan.sources() {
            let inst = g
                .instance(&src.path)
                .expect("plan sources are graph instances");
            let data = Arc::new(load_dataset(src.source, &inst.params, g.base_dir())?);
            let own = inst.params.usize("batch_size").unwrap_or(0);
            let b = if own > 0 { own } else { cfg.batch_size };
            let shuffle = !ordered && inst.params.bool("shuffle").unwrap_or(true);
            let repeats = !ordered && inst.params.bool("repeats").unwrap_or(true);
            streams.push((
                DataStream::new(data, &src.path, cfg.seed, shuffle, repeats),
                b,
            ));
        }
        Ok(Feeder { streams })
    }

    /// The `m`-th batch of every stream, merged.
    fn micro_batch(&mut self, m: u64) -> Result<Batch, RuntimeError> {
        let mut batch = Batch::new();
        for (s, b) in &mut self.streams {
            batch.extend(s.batch(m * *b as u64, *b)?);
        }
        Ok(batch)
    }

    /// File-order batches of `b` rows, the last one possibly short.
    fn sequential(&self, b: usize) -> Result<Vec<(usize, Batch)>, RuntimeError> {
        let n = self
            .streams
            .iter()
            .map(|(s, _)| s.dataset().len())
            .min()
            .unwrap_or(0);
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let count = b.min(n - start);
            let idx: Vec<usize> = (start..start + count).collect();
            let mut batch = Batch::new();
            for (s, _) in &self.streams {
                batch.extend(s.prefixed(&idx));
            }
            out.push((count, batch));
            start += count;
        }
        Ok(out)
    }
}

type EventHook<'a> = Box<dyn FnMut(&Event) + 'a>;
type StepHook<'a> = Box<dyn FnMut(u64, f32, &ParamStore) + 'a>;

/// Configurable training run.
pub struct Trainer<'a> {
    config: ActionConfig,
    callbacks: Vec<Callback>,
    resume: Option<Checkpoint>,
    on_event: Option<EventHook<'a>>,
    on_step: Option<StepHook<'a>>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: ActionConfig) -> Self {
        Trainer {
            config,
            callbacks: Vec::new(),
            resume: None,
            on_event: None,
            on_step: None,
        }
    }

    pub fn callbacks(mut self, callbacks: Vec<Callback>) -> Self {
        self.callbacks = callbacks;
        self
    }

    /// Continue from a checkpoint; `max_steps` still counts from step 0.
    pub fn resume(mut self, checkpoint: Checkpoint) -> Self {
        self.resume = Some(checkpoint);
        self
    }

    pub fn on_event(mut self, f: impl FnMut(&Event) + 'a) -> Self {
        self.on_event = Some(Box::new(f));
        self
    }

    /// Called after each update with the step, its loss and the new parameters.
    pub fn on_step(mut self, f: impl FnMut(u64, f32, &ParamStore) + 'a) -> Self {
        self.on_step = Some(Box::new(f));
        self
    }

    pub fn run(mut self, g: &mut Graph) -> Result<TrainReport, RuntimeError> {
        let cfg = self.config.clone();
        cfg.validate()?;
        let plan = Plan::new(g)?;
        let loss_sink = find_loss_sink(g)?;
        let mut feeder = Feeder::new(g, &plan, &cfg, false)?;

        let mut params = g.parameters();
        let mut optimizer = Optimizer::new(cfg.optimizer);
        let mut start = 0;
        if let Some(ck) = &self.resume {
            g.set_parameters(&ck.params)?;
            params = ck.params.clone();
            optimizer.load_state(&ck.optimizer)?;
            start = ck.step;
        }

        let k = cfg.accumulation_steps;
        let opts = RunOptions {
            record: true,
            check_finite: true,
        };
        let mut losses = Vec::new();
        let mut events = Vec::new();
        for step in start + 1..=cfg.max_steps.max(start) {
            let mut grads: Option<ParamStore> = None;
            let mut loss_sum = 0.0f64;
            for j in 0..k as u64 {
                let batch = feeder.micro_batch((step - 1) * k as u64 + j)?;
                let run = plan.run(&params, &batch, opts)?;
                let tape = run.tape.expect("recorded");
                loss_sum += run.sinks[&loss_sink].data()[0] as f64;
                let g_micro = backward(&tape, &loss_sink)?;
                match &mut grads {
                    None => grads = Some(g_micro),
                    Some(acc) => {
                        for (key, t) in acc.iter_mut() {
                            t.add_assign(&g_micro[key]);
                        }
                    }
                }
            }
            let mut grads = grads.unwrap_or_default();
            if k > 1 {
                for t in grads.values_mut() {
                    t.scale(1.0 / k as f32);
                }
            }
            optimizer.step(&mut params, &grads);
            let loss = (loss_sum / k as f64) as f32;
            losses.push(loss);
            if let Some(f) = &mut self.on_step {
                f(step, loss, &params);
            }
            let ctx = CallbackContext {
                step,
                loss,
                seed: g.seed(),
                params: &params,
                optimizer: &optimizer,
                batch_size: cfg.batch_size,
            };
            for e in run_callbacks(&mut self.callbacks, &ctx) {
                if let Some(f) = &mut self.on_event {
                    f(&e);
                }
                events.push(e);
            }
        }
        g.set_parameters(&params)?;
        let final_step = start.max(cfg.max_steps);
        Ok(TrainReport {
            losses,
            events,
            start_step: start,
            final_step,
            param_hash: parameter_hash(&params),
            checkpoint: Checkpoint {
                seed: g.seed(),
                params,
                optimizer: optimizer.state(),
                step: final_step,
            },
        })
    }
}

/// Train with the given callbacks, no hooks.
pub fn train(
    g: &mut Graph,
    cfg: &ActionConfig,
    callbacks: Vec<Callback>,
) -> Result<TrainReport, RuntimeError> {
    Trainer::new(cfg.clone()).callbacks(callbacks).run(g)
}

/// One pass over the data in file order. Returns the sample-weighted mean
/// of every scalar sink, keyed `<instance>.<port>`. Never changes state.
pub fn evaluate(g: &Graph, cfg: &ActionConfig) -> Result<BTreeMap<String, f64>, RuntimeError> {
    if cfg.batch_size == 0 {
        return Err(RuntimeError::InvalidConfig("batch_size must be ≥ 1".into()));
    }
    let plan = Plan::new(g)?;
    let metrics = metric_sinks(g);
    if metrics.is_empty() {
        return Err(RuntimeError::NoMetrics);
    }
    let feeder = Feeder::new(g, &plan, cfg, true)?;
    let batches = feeder.sequential(cfg.batch_size)?;
    if batches.is_empty() {
        let name = plan
            .sources()
            .next()
            .map_or("<none>".to_string(), |s| s.path.clone());
        return Err(RuntimeError::DataExhausted(name));
    }
    let params = g.parameters();
    let mut sums: BTreeMap<String, f64> = metrics.iter().map(|m| (m.clone(), 0.0)).collect();
    let mut total = 0usize;
    for (count, batch) in &batches {
        let run = plan.run(&params, batch, RunOptions::default())?;
        for (name, sum) in sums.iter_mut() {
            *sum += run.sinks[name].data()[0] as f64 * *count as f64;
        }
        total += count;
    }
    Ok(sums
        .into_iter()
        .map(|(k, v)| (k, v / total as f64))
        .collect())
}

/// Evaluate every sink on each file-order batch and write the tensors to
/// `out` as entries `<instance>.<port>[<batch>]`.
pub fn infer(g: &Graph, cfg: &ActionConfig, out: &Path) -> Result<TensorDump, RuntimeError> {
    if cfg.batch_size == 0 {
        return Err(RuntimeError::InvalidConfig("batch_size must be ≥ 1".into()));
    }
    let plan = Plan::new(g)?;
    let feeder = Feeder::new(g, &plan, cfg, true)?;
    let params = g.parameters();
    let mut dump = TensorDump::default();
    for (i, (_, batch)) in feeder.sequential(cfg.batch_size)?.iter().enumerate() {
        let run = plan.run(&params, batch, RunOptions::default())?;
        for name in plan.sink_names() {
            let t = run
                .sinks
                .get(name)
                .ok_or_else(|| BackendError::UnknownSink(name.to_string()))?;
            dump.entries.push((format!("{name}[{i}]"), t.clone()));
        }
    }
    dump.save(out)?;
    Ok(dump)
}
