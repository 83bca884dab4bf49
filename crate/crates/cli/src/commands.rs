use std::io::Write;

use axon_core::backend::kernel_invocations;
use axon_core::graph::Graph;
use axon_core::runtime::{
    evaluate, ActionConfig, Callback, Checkpoint, Event, EventKind, RuntimeError, Trainer,
};
use axon_core::typesys::render_type_expr;
use serde_json::json;

use crate::session::{open, SchemaError, Session};
use crate::{Common, Outcome};

/// `println!` that tolerates a closed stdout (say, piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, $($arg)*).and_then(|_| out.flush());
    }};
}

fn schema_failure(args: &Common, e: &SchemaError) -> Outcome {
    if args.json {
        say!(
            "{}",
            json!({"clean": false, "schema_error": e.to_json(), "findings": []})
        );
    } else {
        eprintln!("{}", e.line());
    }
    Outcome::Usage
}

fn print_findings(s: &Session) {
    for f in &s.findings {
        say!("{}", f.line);
    }
}

fn cast_note(g: &Graph) -> Option<String> {
    match g.cast_count() {
        0 => None,
        1 => Some("NOTE inserted 1 implicit transpose cast".into()),
        n => Some(format!("NOTE inserted {n} implicit transpose casts")),
    }
}

/// Open the graph, or report why it cannot be used.
fn open_or_report(args: &Common) -> Result<Session, Outcome> {
    open(args).map_err(|e| schema_failure(args, &e))
}

pub fn check(args: &Common) -> Outcome {
    let s = match open_or_report(args) {
        Ok(s) => s,
        Err(o) => return o,
    };
    if args.json {
        let findings: Vec<_> = s.findings.iter().map(|f| f.to_json()).collect();
        say!(
            "{}",
            json!({
                "clean": s.is_clean(), "casts": s.graph.cast_count(), "findings": findings,
                "kernel_invocations": kernel_invocations(),
            })
        );
    } else {
        print_findings(&s);
        if let Some(note) = cast_note(&s.graph) {
            say!("{note}");
        }
    }
    if s.is_clean() {
        Outcome::Clean
    } else {
        Outcome::Findings
    }
}

pub fn describe(args: &Common) -> Outcome {
    let s = match open_or_report(args) {
        Ok(s) => s,
        Err(o) => return o,
    };
    if !s.is_clean() {
        if args.json {
            let findings: Vec<_> = s.findings.iter().map(|f| f.to_json()).collect();
            say!("{}", json!({"clean": false, "findings": findings}));
        } else {
            print_findings(&s);
        }
        return Outcome::Findings;
    }
    let g = &s.graph;
    let order = g.topo_order().expect("clean graphs are validated");
    if args.json {
        let instances: Vec<_> = order
            .iter()
            .map(|id| {
                let i = g.instance(id).expect("topo order lists instances");
                let ports = |ps: &[axon_core::modulesys::PortSpec]| {
                    ps.iter()
                        .map(|p| json!({"name": p.name, "type": render_type_expr(&p.ty)}))
                        .collect::<Vec<_>>()
                };
                json!({
                    "id": id, "class": i.class(), "parameters": i.parameter_count(),
                    "inputs": ports(&i.inputs), "outputs": ports(&i.outputs),
                })
            })
            .collect();
        let bindings: Vec<_> = g
            .bindings()
            .iter()
            .map(|b| json!({"from": b.from.producer.to_string(), "to": b.to.to_string(), "comparison": b.comparison.as_str()}))
            .collect();
        let sinks: Vec<_> = g.sinks().iter().map(|r| r.to_string()).collect();
        say!(
            "{}",
            json!({
                "clean": true, "seed": g.seed(), "casts": g.cast_count(), "instances": instances,
                "bindings": bindings, "sinks": sinks, "parameters": g.parameter_count(), "findings": [],
            })
        );
        return Outcome::Clean;
    }

    say!("graph {} (seed {})", args.graph.display(), g.seed());
    say!("instances in topological order:");
    for id in &order {
        let i = g.instance(id).expect("topo order lists instances");
        say!("  {id}: {} ({} parameters)", i.class(), i.parameter_count());
        for p in &i.inputs {
            say!("    in  {}: {}", p.name, render_type_expr(&p.ty));
        }
        for p in &i.outputs {
            say!("    out {}: {}", p.name, render_type_expr(&p.ty));
        }
    }
    say!("bindings:");
    for b in g.bindings() {
        say!(
            "  {} -> {}: {}",
            b.from.producer,
            b.to,
            b.comparison.as_str()
        );
    }
    let sinks: Vec<String> = g.sinks().iter().map(|r| r.to_string()).collect();
    say!("sinks: {}", sinks.join(", "));
    say!("parameters: {}", g.parameter_count());
    if let Some(note) = cast_note(g) {
        say!("{note}");
    }
    Outcome::Clean
}

fn runtime_failure(e: &RuntimeError) -> Outcome {
    eprintln!("error: {}: {e}", e.name());
    Outcome::Findings
}

/// Open a graph for an action: any finding stops the run.
fn open_clean(args: &Common) -> Result<Session, Outcome> {
    let s = open_or_report(args)?;
    if !s.is_clean() {
        for f in &s.findings {
            eprintln!("{}", f.line);
        }
        return Err(Outcome::Findings);
    }
    Ok(s)
}

fn action(g: &Graph, args: &Common, fallback: impl FnOnce() -> ActionConfig) -> ActionConfig {
    let mut cfg = g.action.clone().unwrap_or_else(fallback);
    if let Some(n) = args.max_steps {
        cfg.max_steps = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg
}

fn emit(e: &Event) {
    match e.kind {
        EventKind::Error => eprintln!("{e}"),
        _ => say!("{e}"),
    }
}

pub fn train(args: &Common) -> Outcome {
    let mut s = match open_clean(args) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let g = &mut s.graph;
    if g.action.is_none() {
        eprintln!("error: InvalidConfig: the graph file has no action");
        return Outcome::Findings;
    }
    let cfg = action(g, args, || unreachable!("checked above"));
    let mut run = || -> Result<_, RuntimeError> {
        let mut callbacks = Callback::from_graph(g)?;
        if !callbacks
            .iter()
            .any(|c| matches!(c, Callback::LossLog { .. }))
        {
            callbacks.insert(
                0,
                Callback::LossLog {
                    interval: 1,
                    path: None,
                },
            );
        }
        let mut trainer = Trainer::new(cfg.clone())
            .callbacks(callbacks)
            .on_event(emit);
        if let Some(path) = &cfg.checkpoint {
            let path = g.base_dir().map_or_else(|| path.into(), |d| d.join(path));
            trainer = trainer.resume(Checkpoint::load(&path)?);
        }
        let report = trainer.run(g)?;
        if let Some(out) = &args.out {
            report.checkpoint.save(out)?;
        }
        Ok(report)
    };
    match run() {
        Ok(r) => {
            say!(
                "done step={} param_hash={:016x}",
                r.final_step,
                r.param_hash
            );
            Outcome::Clean
        }
        Err(e) => runtime_failure(&e),
    }
}

/// Short names for sinks: the port alone unless two sinks share it.
fn display_names(g: &Graph) -> Vec<(String, String)> {
    let sinks = g.sinks();
    sinks
        .iter()
        .map(|r| {
            let shared = sinks.iter().filter(|o| o.port == r.port).count() > 1;
            let short = if shared {
                r.to_string()
            } else {
                r.port.clone()
            };
            (r.to_string(), short)
        })
        .collect()
}

pub fn eval(args: &Common) -> Outcome {
    let s = match open_clean(args) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let g = &s.graph;
    let cfg = action(g, args, || ActionConfig::eval(32));
    match evaluate(g, &cfg) {
        Ok(metrics) => {
            for (full, short) in display_names(g) {
                if let Some(v) = metrics.get(&full) {
                    say!("{short}={v:.6}");
                }
            }
            Outcome::Clean
        }
        Err(e) => runtime_failure(&e),
    }
}

pub fn infer(args: &Common) -> Outcome {
    let Some(out) = &args.out else {
        eprintln!("error: infer requires --out <PATH>");
        return Outcome::Usage;
    };
    let s = match open_clean(args) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let g = &s.graph;
    let cfg = action(g, args, || ActionConfig::eval(32));
    match axon_core::runtime::infer(g, &cfg, out) {
        Ok(dump) => {
            say!("wrote {} tensors to {}", dump.entries.len(), out.display());
            Outcome::Clean
        }
        Err(e) => runtime_failure(&e),
    }
}
