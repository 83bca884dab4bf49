//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use axon_core::backend::{
    grad_check, kernel_invocations, Batch, ParamStore, Plan, RunOptions, Tensor,
};
use axon_core::graph::{load_graph_file, Graph, GraphError, LoadError, LoadOptions};
use axon_core::runtime::{evaluate, ActionConfig, Callback, Checkpoint, OptimizerConfig, Trainer};
use axon_core::stdcollection::{
    build_encoder_decoder_template, shipped_hierarchy, TemplateParams, Variant,
};
use axon_core::typesys::{compare_types, parse_type_expr, Comparison, NeuralType};
use common::{fixtures_dir, random_graph, random_hierarchy, random_tensor, related, std_reg};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)*));
        }
    };
}

fn load(name: &str, auto_cast: bool) -> Result<(Graph, Vec<GraphError>), LoadError> {
    load_graph_file(
        &fixtures_dir().join(name),
        &std_reg(),
        LoadOptions {
            auto_cast,
            lenient: true,
        },
    )
}

fn clean_fixture(name: &str) -> Graph {
    let (mut g, findings) = load(name, false).expect("fixture loads");
    assert!(
        findings.is_empty() && g.validate().is_clean(),
        "{name} is clean"
    );
    g
}

const GRAPH_FIXTURES: [&str; 9] = [
    "blobs_mlp.json",
    "k4_untrained.json",
    "linreg.json",
    "ctc_style.json",
    "seq_style.json",
    "transpose.json",
    "seq_style_no_connector.json",
    "cycle.json",
    "unbound.json",
];

fn table_rows() -> Check {
    let h = shipped_hierarchy();
    let t = |s: &str| parse_type_expr(&h, s).unwrap();
    let rows = [
        (
            t("[Batch, Channel]"),
            t("[Batch, Spectrogram]"),
            Comparison::Greater,
        ),
        (
            t("[Batch, Spectrogram]"),
            t("[Batch, Channel]"),
            Comparison::Less,
        ),
        (
            t("[Batch, Spectrogram]"),
            t("[Batch, Encoded]"),
            Comparison::Incompatible,
        ),
        (
            t("[Batch, Spectrogram]"),
            t("[Spectrogram, Batch]"),
            Comparison::TransposeSame,
        ),
        (
            t("[Batch, Spectrogram:64]"),
            t("[Batch, Channel:40]"),
            Comparison::DimIncompatible,
        ),
        (
            t("[Batch, Spectrogram:64]"),
            NeuralType::Root,
            Comparison::Same,
        ),
    ];
    let got: Vec<&str> = rows
        .iter()
        .map(|(a, b, _)| compare_types(&h, a, b).unwrap().as_str())
        .collect();
    let want: Vec<&str> = rows.iter().map(|r| r.2.as_str()).collect();
    ensure!(got == want, "got {got:?}");
    Ok(got.join(", "))
}

fn transpose_scenario() -> Check {
    match load("transpose.json", false) {
        Ok((_, f))
            if matches!(
                f.as_slice(),
                [GraphError::Type {
                    result: Comparison::TransposeSame,
                    ..
                }]
            ) => {}
        other => {
            return Err(format!(
                "expected one TRANSPOSE_SAME finding, got {other:?}"
            ))
        }
    }
    let (mut g, findings) = load("transpose.json", true).map_err(|e| e.to_string())?;
    ensure!(
        findings.is_empty() && g.validate().is_clean(),
        "auto-cast graph does not validate"
    );
    ensure!(g.cast_count() == 1, "{} casts", g.cast_count());
    g.add_sink(&g.handle("time_major", "y").unwrap()).unwrap();
    g.add_sink(&g.handle("dec_x_cast", "y").unwrap()).unwrap();
    ensure!(g.validate().is_clean(), "sinks invalidated the graph");

    let mut batch = Batch::new();
    let (rows, t) = (3, 8);
    let tokens: Vec<f32> = (0..rows * t).map(|i| (i % 6) as f32).collect();
    batch.insert(
        "data.tokens".into(),
        Tensor::new(vec![rows, t], tokens).unwrap(),
    );
    batch.insert(
        "data.mask".into(),
        Tensor::new(vec![rows, t], vec![1.0; rows * t]).unwrap(),
    );
    batch.insert(
        "data.labels".into(),
        Tensor::new(vec![rows, t, 1], vec![1.0; rows * t]).unwrap(),
    );
    let run = Plan::new(&g)
        .and_then(|p| p.run(&g.parameters(), &batch, RunOptions::default()))
        .map_err(|e| e.to_string())?;
    let manual = run.sinks["time_major.y"].transpose(&[1, 0, 2]).unwrap();
    let cast = &run.sinks["dec_x_cast.y"];
    ensure!(
        cast.shape() == manual.shape(),
        "cast shape {:?}",
        cast.shape()
    );
    let bitwise = cast
        .data()
        .iter()
        .zip(manual.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(bitwise, "cast output differs from manual transpose");
    ensure!(
        run.sinks["loss.loss"].data()[0].is_finite(),
        "loss not finite"
    );
    Ok("TypeError TRANSPOSE_SAME without cast; cast output bitwise equal".into())
}

fn lattice_properties() -> Check {
    let mut violations = Vec::new();
    let pairs = 10_000u64;
    for seed in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hierarchy(&mut rng);
        let dims = seed % 2 == 0;
        let a = random_tensor(&mut rng, &h, dims);
        let b = related(&mut rng, &h, &a, dims);
        let cmp = |x, y| compare_types(&h, x, y).unwrap();
        let ab = cmp(&a, &b);
        if cmp(&a, &a) != Comparison::Same {
            violations.push(format!("reflexivity seed {seed}"));
        }
        if ab == Comparison::TransposeSame && cmp(&b, &a) != Comparison::TransposeSame {
            violations.push(format!("transpose symmetry seed {seed}"));
        }
        if !dims && a != b && ab == Comparison::Less && cmp(&b, &a) != Comparison::Greater {
            violations.push(format!("asymmetry seed {seed}"));
        }
        if a.rank() != b.rank() && ab != Comparison::Incompatible {
            violations.push(format!("rank mismatch seed {seed}"));
        }
    }
    ensure!(
        violations.is_empty(),
        "{} violations, first {}",
        violations.len(),
        violations[0]
    );
    Ok(format!("{pairs} pairs, 0 violations"))
}

fn laziness() -> Check {
    // Kernel counts are per thread; start from a fresh one.
    std::thread::spawn(|| {
        ensure!(
            kernel_invocations() == 0,
            "counter starts at {}",
            kernel_invocations()
        );
        for name in GRAPH_FIXTURES {
            for auto_cast in [false, true] {
                let (mut g, _) = load(name, auto_cast).map_err(|e| format!("{name}: {e}"))?;
                g.validate();
            }
        }
        ensure!(
            kernel_invocations() == 0,
            "{} kernels ran during validation",
            kernel_invocations()
        );
        let g = clean_fixture("k4_untrained.json");
        evaluate(&g, g.action.as_ref().unwrap()).map_err(|e| e.to_string())?;
        ensure!(kernel_invocations() > 0, "counter stayed 0 after eval");
        Ok(format!(
            "0 after {} fixtures, {} after eval",
            GRAPH_FIXTURES.len(),
            kernel_invocations()
        ))
    })
    .join()
    .map_err(|_| "laziness check panicked".to_string())?
}

fn gradients() -> Check {
    let reg = std_reg();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let (g, batch) = random_graph(&mut rng, &reg);
        ensure!(g.parameter_count() <= 10_000, "graph {i} too large");
        let report = grad_check(&g, &batch, 1e-3, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_error());
        ensure!(
            report.passed(),
            "graph {i}: max relative error {:e}",
            report.max_rel_error()
        );
    }
    Ok(format!("50 graphs, max relative error {worst:.2e}"))
}

fn trajectory(mut g: Graph, cfg: ActionConfig) -> Result<Vec<ParamStore>, String> {
    let mut out = Vec::new();
    Trainer::new(cfg)
        .on_step(|_, _, p| out.push(p.clone()))
        .run(&mut g)
        .map_err(|e| e.to_string())?;
    Ok(out)
}

fn max_abs_diff(a: &ParamStore, b: &ParamStore) -> f32 {
    a.iter()
        .flat_map(|(k, t)| t.data().iter().zip(b[k].data()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f32::max)
}

fn accumulation() -> Check {
    let mut report = Vec::new();
    for (name, opt) in [
        (
            "sgd",
            OptimizerConfig::Sgd {
                lr: 0.1,
                momentum: 0.9,
            },
        ),
        (
            "adam",
            OptimizerConfig::Adam {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
        ),
    ] {
        let g = clean_fixture("blobs_mlp.json");
        let mut micro = ActionConfig::train(100, 8, opt);
        micro.accumulation_steps = 4;
        let a = trajectory(g.clone(), micro)?;
        let b = trajectory(g, ActionConfig::train(100, 32, opt))?;
        ensure!(
            a.len() == 100 && b.len() == 100,
            "trajectory lengths {} and {}",
            a.len(),
            b.len()
        );
        let gap = a
            .iter()
            .zip(&b)
            .map(|(x, y)| max_abs_diff(x, y))
            .fold(0.0, f32::max);
        ensure!(gap <= 1e-6, "{name}: max gap {gap:e}");
        report.push(format!("{name} gap {gap:.1e}"));
    }
    Ok(report.join(", "))
}

fn reuse() -> Check {
    let reg = std_reg();
    let p = TemplateParams::default();
    let ctc =
        build_encoder_decoder_template(&reg, Variant::CtcStyle, &p).map_err(|e| e.to_string())?;
    let mut seq =
        build_encoder_decoder_template(&reg, Variant::SeqStyle, &p).map_err(|e| e.to_string())?;
    let (a, b) = (
        ctc.instance("encoder").unwrap(),
        seq.instance("encoder").unwrap(),
    );
    ensure!(
        a.class() == b.class() && a.params == b.params,
        "encoders differ"
    );
    let (pa, pb) = (ctc.parameters(), seq.parameters());
    let shared = pa
        .keys()
        .filter(|k| k.starts_with("encoder/"))
        .all(|k| pa[k] == pb[k]);
    ensure!(shared, "encoder parameters differ");

    let bare = TemplateParams {
        connector: false,
        ..TemplateParams::default()
    };
    match build_encoder_decoder_template(&reg, Variant::SeqStyle, &bare) {
        Err(GraphError::Type {
            result: Comparison::DimIncompatible,
            ..
        }) => {}
        other => {
            return Err(format!(
                "without connector: {:?}",
                other.map(|_| "validated")
            ))
        }
    }
    seq.set_base_dir(fixtures_dir());
    let cfg = seq.action.clone().unwrap();
    let losses = Trainer::new(cfg)
        .run(&mut seq)
        .map_err(|e| e.to_string())?
        .losses;
    ensure!(losses.iter().all(|l| l.is_finite()), "non-finite loss");
    ensure!(
        losses.last() < losses.first(),
        "loss did not fall: {losses:?}"
    );
    Ok(format!(
        "shared encoder; DIM_INCOMPATIBLE without connector; trained {} steps",
        losses.len()
    ))
}

fn desk_training() -> Check {
    let mut g = clean_fixture("blobs_mlp.json");
    let losses = Trainer::new(g.action.clone().unwrap())
        .run(&mut g)
        .map_err(|e| e.to_string())?
        .losses;
    let last = *losses.last().unwrap();
    ensure!(
        losses.len() == 500 && last < 0.1,
        "blobs loss {last} after {} steps",
        losses.len()
    );
    let mut g = clean_fixture("linreg.json");
    let lr = Trainer::new(g.action.clone().unwrap())
        .run(&mut g)
        .map_err(|e| e.to_string())?
        .losses;
    ensure!(lr.len() == 50, "{} regression steps", lr.len());
    ensure!(
        lr.windows(2).all(|w| w[1] < w[0]),
        "regression loss not strictly decreasing"
    );
    Ok(format!(
        "blobs loss {last:.4} at step 500; regression {:.4} -> {:.4}",
        lr[0], lr[49]
    ))
}

fn persistence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opt = OptimizerConfig::Adam {
        lr: 0.01,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let g = clean_fixture("blobs_mlp.json");
    let whole = Trainer::new(ActionConfig::train(200, 32, opt))
        .run(&mut g.clone())
        .map_err(|e| e.to_string())?;

    let mut first = g.clone();
    Trainer::new(ActionConfig::train(100, 32, opt))
        .callbacks(vec![Callback::Checkpoint {
            interval: 100,
            path: dir.path().join("ck{step}.bin"),
        }])
        .run(&mut first)
        .map_err(|e| e.to_string())?;
    let path = dir.path().join("ck100.bin");
    let ck = Checkpoint::load(&path).map_err(|e| e.to_string())?;
    let again = dir.path().join("again.bin");
    ck.save(&again).map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&path).unwrap() == std::fs::read(&again).unwrap(),
        "checkpoint not bitwise stable"
    );

    let rest = Trainer::new(ActionConfig::train(200, 32, opt))
        .resume(ck)
        .run(&mut g.clone())
        .map_err(|e| e.to_string())?;
    let gap = whole.losses[100..]
        .iter()
        .zip(&rest.losses)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    ensure!(
        rest.losses.len() == 100 && gap <= 1e-6,
        "resume gap {gap:e}"
    );

    let mut round_tripped = 0;
    for name in GRAPH_FIXTURES {
        let (mut g, findings) = load(name, true).map_err(|e| e.to_string())?;
        if !findings.is_empty() || !g.validate().is_clean() {
            continue;
        }
        let text = g.to_json().map_err(|e| e.to_string())?;
        let mut h =
            Graph::from_json(&text, &std_reg(), false).map_err(|e| format!("{name}: {e}"))?;
        ensure!(h.validate().is_clean(), "{name}: reloaded graph invalid");
        ensure!(
            h.to_document().unwrap() == g.to_document().unwrap(),
            "{name}: documents differ"
        );
        ensure!(
            h.parameters() == g.parameters(),
            "{name}: parameters differ"
        );
        round_tripped += 1;
    }
    Ok(format!(
        "checkpoint bitwise; resume gap {gap:.1e}; {round_tripped} graph files round-trip"
    ))
}

fn axon(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_axon"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn cli_contract() -> Check {
    let dir = fixtures_dir();
    let f = |n: &str| dir.join(n).to_string_lossy().into_owned();
    let golden = [
        (
            "transpose.json",
            "ERROR TRANSPOSE_SAME at time_major.y -> dec.x: [Time, Batch, Channel:6] vs [Batch, Time, Channel:6]\n",
        ),
        (
            "seq_style_no_connector.json",
            "ERROR DIM_INCOMPATIBLE at encoder.encoded -> decoder_b.x: [Batch, Time, Encoded:6] vs [Batch, Time, Channel:5]\n",
        ),
    ];
    for (name, want) in golden {
        let (code, out) = axon(&["check", &f(name)]);
        ensure!(
            code == 1 && out == want,
            "{name}: exit {code}, output {out:?}"
        );
    }
    let matrix = [
        (vec!["check", "ctc_style.json"], 0),
        (vec!["check", "transpose.json", "--auto-cast"], 0),
        (vec!["check", "cycle.json"], 1),
        (vec!["check", "unbound.json"], 1),
        (vec!["check", "empty.json"], 2),
        (vec!["check", "bad_schema.json"], 2),
        (vec!["check", "unknown_class.json"], 2),
        (vec!["check", "ctc_style.json", "--no-such-flag"], 2),
        (vec!["infer", "k4_untrained.json"], 2),
        (vec!["eval", "transpose.json"], 1),
        (vec!["describe", "blobs_mlp.json"], 0),
    ];
    for (args, want) in &matrix {
        let mut args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        args[1] = f(&args[1]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, _) = axon(&refs);
        ensure!(code == *want, "{refs:?}: exit {code}, expected {want}");
    }
    let (code, out) = axon(&["eval", &f("k4_untrained.json")]);
    let v: f64 = out
        .trim()
        .strip_prefix("loss=")
        .and_then(|s| s.parse().ok())
        .ok_or(format!("eval printed {out:?}"))?;
    ensure!(code == 0 && (v - 1.386294).abs() <= 1e-5, "eval loss {v}");
    Ok(format!(
        "2 golden diagnostics, {} exit codes, eval loss={v:.6}",
        matrix.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("comparison table", table_rows),
        ("transpose scenario and implicit cast", transpose_scenario),
        ("type-lattice properties", lattice_properties),
        ("laziness", laziness),
        ("gradient correctness", gradients),
        ("gradient-accumulation equivalence", accumulation),
        ("template re-use", reuse),
        ("desk-scale training", desk_training),
        ("persistence", persistence),
        ("CLI contract", cli_contract),
    ];
    assert!(
        Path::new(&fixtures_dir()).is_dir(),
        "fixtures directory missing"
    );
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
