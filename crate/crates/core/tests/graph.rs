mod common;

use std::path::PathBuf;

use axon_core::backend::kernel_invocations;
use axon_core::graph::{load_graph_file, Graph, GraphDocument, GraphError, LoadOptions};
use axon_core::typesys::{compare_types, render_type_expr, Comparison};
use common::{fixtures_dir, random_graph, random_tensor, related, std_reg};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Graph files in the fixture corpus that load without schema errors.
fn loadable_fixtures() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| {
            let text = std::fs::read_to_string(p).unwrap();
            GraphDocument::from_json(&text).is_ok() && !text.contains("JasperEncoder")
        })
        .collect();
    out.sort();
    out
}

fn lenient(auto_cast: bool) -> LoadOptions {
    LoadOptions {
        auto_cast,
        lenient: true,
    }
}

#[test]
fn building_and_validating_fixtures_runs_no_kernels() {
    let reg = std_reg();
    let before = kernel_invocations();
    let files = loadable_fixtures();
    assert!(files.len() >= 9, "{files:?}");
    for f in &files {
        for auto_cast in [false, true] {
            let (mut g, _) = load_graph_file(f, &reg, lenient(auto_cast)).unwrap();
            g.validate();
            let _ = g.topo_order();
        }
    }
    assert_eq!(kernel_invocations(), before);
}

#[test]
fn clean_fixtures_round_trip_through_the_file_format() {
    let reg = std_reg();
    let mut checked = 0;
    for f in loadable_fixtures() {
        let (mut g, findings) = load_graph_file(&f, &reg, lenient(false)).unwrap();
        if !findings.is_empty() || !g.validate().is_clean() {
            continue;
        }
        let text = g.to_json().unwrap();
        let mut h = Graph::from_json(&text, &reg, false).unwrap();
        assert!(h.validate().is_clean());
        assert_eq!(
            h.to_document().unwrap(),
            g.to_document().unwrap(),
            "{}",
            f.display()
        );
        assert_eq!(h.parameters(), g.parameters());
        for (a, b) in g.instances().zip(h.instances()) {
            assert_eq!(a.id, b.id);
            let types = |i: &axon_core::modulesys::ModuleInstance| {
                i.inputs
                    .iter()
                    .chain(&i.outputs)
                    .map(|p| render_type_expr(&p.ty))
                    .collect::<Vec<_>>()
            };
            assert_eq!(types(a), types(b));
        }
        checked += 1;
    }
    assert!(checked >= 5, "{checked}");
}

#[test]
fn auto_cast_repairs_the_transpose_fixture() {
    let reg = std_reg();
    let path = fixtures_dir().join("transpose.json");
    let (_, findings) = load_graph_file(&path, &reg, lenient(false)).unwrap();
    assert!(matches!(
        findings.as_slice(),
        [GraphError::Type {
            result: Comparison::TransposeSame,
            ..
        }]
    ));

    let (mut g, findings) = load_graph_file(&path, &reg, lenient(true)).unwrap();
    assert!(findings.is_empty());
    assert!(g.validate().is_clean());
    assert_eq!(g.cast_count(), 1);
    let cast = g.instance("dec_x_cast").expect("cast instance");
    assert_eq!(cast.class(), "Transpose");
    let b = g
        .bindings()
        .iter()
        .find(|b| b.to.to_string() == "dec.x")
        .unwrap();
    assert_eq!(b.from.producer.to_string(), "dec_x_cast.y");
    assert_eq!(b.comparison, Comparison::Same);
}

#[test]
fn findings_are_collected_exhaustively() {
    let reg = std_reg();
    let load = |name: &str| {
        let (mut g, f) = load_graph_file(&fixtures_dir().join(name), &reg, lenient(false)).unwrap();
        (g.validate().lines(), f)
    };
    assert_eq!(load("cycle.json").0, ["CYCLE feedback -> mix -> feedback"]);
    assert_eq!(load("unbound.json").0, ["UNBOUND_INPUT loss.labels"]);
    let (lines, findings) = load("seq_style_no_connector.json");
    assert_eq!(findings.len(), 1);
    assert_eq!(
        findings[0].to_string(),
        "DIM_INCOMPATIBLE at encoder.encoded -> decoder_b.x: [Batch, Time, Encoded:6] vs [Batch, Time, Channel:5]"
    );
    assert_eq!(lines, ["UNBOUND_INPUT decoder_b.x"]);
}

#[test]
fn rebinding_an_input_is_rejected() {
    let reg = std_reg();
    let mut g = Graph::new(reg, 0);
    let t = g
        .add("Add", json!({"type": "[Batch, Channel:2]"}), "src")
        .unwrap();
    g.add("Add", json!({"type": "[Batch, Channel:2]"}), "dst")
        .unwrap();
    g.connect(&t[0], "dst", "a", false).unwrap();
    assert!(matches!(
        g.connect(&t[0], "dst", "a", false),
        Err(GraphError::PortAlreadyBound(_))
    ));
    assert!(matches!(
        g.connect(&t[0], "dst", "zz", false),
        Err(GraphError::UnknownPort(_))
    ));
    assert!(matches!(
        g.add("Add", json!({"type": "[Batch]"}), "src"),
        Err(GraphError::DuplicateInstance(_))
    ));
}

fn assert_topological(g: &Graph) {
    let order = g.topo_order().unwrap();
    let mut ids: Vec<&str> = g.instances().map(|i| i.id.as_str()).collect();
    let mut sorted = order.iter().map(String::as_str).collect::<Vec<_>>();
    ids.sort();
    sorted.sort();
    assert_eq!(ids, sorted, "not a permutation");
    let pos = |id: &str| order.iter().position(|o| o == id).unwrap();
    for b in g.bindings() {
        assert!(
            pos(&b.from.producer.instance) < pos(&b.to.instance),
            "{} before {}",
            b.from.producer,
            b.to
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validated_graphs_bind_only_accepted_types(seed in any::<u64>()) {
        let reg = std_reg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, _) = random_graph(&mut rng, &reg);
        prop_assert!(g.is_validated());
        for b in g.bindings() {
            prop_assert!(b.comparison.is_accepted());
        }
        assert_topological(&g);
    }

    /// Any connection attempt either records an accepted binding or fails
    /// with the rejecting comparison; auto-cast output matches its consumer.
    #[test]
    fn connect_is_sound(seed in any::<u64>(), auto_cast in any::<bool>()) {
        let reg = std_reg();
        let h = reg.hierarchy().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, &h, true);
        let b = related(&mut rng, &h, &a, true);
        let mut g = Graph::new(reg.clone(), seed);
        let src = g.add("Add", json!({"type": render_type_expr(&a)}), "src").unwrap();
        g.add("Add", json!({"type": render_type_expr(&b)}), "dst").unwrap();
        let expected = compare_types(&h, &a, &b).unwrap();
        match g.connect(&src[0], "dst", "a", auto_cast) {
            Ok(binding) => {
                if expected == Comparison::TransposeSame {
                    prop_assert!(auto_cast);
                    prop_assert_eq!(g.cast_count(), 1);
                    prop_assert_eq!(binding.comparison, Comparison::Same);
                    let cast_out = &g.instance("dst_a_cast").unwrap().outputs[0].ty;
                    prop_assert_eq!(compare_types(&h, cast_out, &b).unwrap(), Comparison::Same);
                } else {
                    prop_assert!(expected.is_accepted());
                    prop_assert_eq!(binding.comparison, expected);
                }
            }
            Err(GraphError::Type { result, .. }) => {
                prop_assert_eq!(result, expected);
                prop_assert!(!result.is_accepted());
            }
            Err(e) => prop_assert!(false, "unexpected {}", e),
        }
    }
}
