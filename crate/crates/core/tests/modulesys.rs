mod common;

use axon_core::modulesys::{lower_steps, ModuleError, ModuleInstance, Registry, Step};
use axon_core::typesys::render_type_expr;
use common::std_reg;
use proptest::prelude::*;
use serde_json::{json, Map, Value};

/// Parameters for one instance of every standard class.
fn samples(width: usize, depth: usize) -> Vec<(&'static str, Value)> {
    vec![
        (
            "CsvDataLayer",
            json!({"path": "a.csv", "feature_columns": ["x", "y"], "label_column": "l", "num_classes": 2}),
        ),
        (
            "SequenceDataLayer",
            json!({"path": "s.txt", "max_len": 4, "vocab_size": 5}),
        ),
        ("Linear", json!({"in_features": width, "out_features": 3})),
        (
            "Connector",
            json!({"in_features": width, "out_features": 2}),
        ),
        ("Relu", json!({})),
        ("Tanh", json!({"features": width})),
        ("LogSoftmax", json!({"features": width})),
        ("NllLoss", json!({"num_classes": width})),
        ("Accuracy", json!({"num_classes": width})),
        ("MseLoss", json!({"features": width})),
        ("EmbeddingLookup", json!({"vocab_size": 5, "dim": width})),
        (
            "RnnCell",
            json!({"in_features": width, "hidden": 3, "max_len": 4}),
        ),
        (
            "DenseTanh",
            json!({"in_features": width, "out_features": 3}),
        ),
        (
            "LinearEncoder",
            json!({"in_features": width, "hidden": 4, "depth": depth}),
        ),
        (
            "MlpDecoder",
            json!({"in_features": width, "hidden": 4, "num_classes": 3}),
        ),
        (
            "RnnDecoder",
            json!({"in_features": width, "hidden": 4, "num_classes": 3, "max_len": 4}),
        ),
        (
            "SeqEncoder",
            json!({"vocab_size": 5, "embed_dim": width, "hidden": 4, "depth": depth}),
        ),
    ]
}

fn make(reg: &Registry, class: &str, params: &Value, id: &str, seed: u64) -> ModuleInstance {
    let map: Map<String, Value> = params.as_object().cloned().unwrap();
    reg.instantiate(class, &map, id, seed)
        .unwrap_or_else(|e| panic!("{class}: {e}"))
}

fn port_types(i: &ModuleInstance) -> Vec<String> {
    i.inputs
        .iter()
        .chain(&i.outputs)
        .map(|p| format!("{}={}", p.name, render_type_expr(&p.ty)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn instantiation_is_deterministic(width in 1usize..6, depth in 1usize..4, seed in any::<u64>()) {
        let reg = std_reg();
        for (class, params) in samples(width, depth) {
            let a = make(&reg, class, &params, "m", seed);
            let b = make(&reg, class, &params, "m", seed);
            prop_assert_eq!(port_types(&a), port_types(&b));
            prop_assert_eq!(a.state_hash(), b.state_hash());
            prop_assert_eq!(a.parameter_count(), b.parameter_count());
        }
    }

    /// Creating other instances never disturbs an existing one.
    #[test]
    fn instances_do_not_share_state(width in 1usize..6, seed in any::<u64>()) {
        let reg = std_reg();
        let first = make(&reg, "LinearEncoder", &json!({"in_features": width, "hidden": 3, "depth": 2}), "enc", seed);
        let before = first.state_hash();
        for (i, (class, params)) in samples(width, 2).into_iter().enumerate() {
            make(&reg, class, &params, &format!("other{i}"), seed);
        }
        make(&reg, "LinearEncoder", &json!({"in_features": width, "hidden": 3, "depth": 2}), "enc", seed ^ 1);
        prop_assert_eq!(first.state_hash(), before);
    }

    #[test]
    fn lowering_is_idempotent(width in 1usize..6, depth in 1usize..4) {
        let reg = std_reg();
        for (class, params) in samples(width, depth) {
            let inst = make(&reg, class, &params, "m", 3);
            let once = lower_steps(inst.lower().unwrap()).unwrap();
            prop_assert!(once.steps.iter().all(Step::is_lowered), "{}", class);
            let twice = lower_steps(once.steps.clone()).unwrap();
            prop_assert_eq!(&twice.steps, &once.steps);
            prop_assert!(twice.aliases.is_empty());
            prop_assert_eq!(lower_steps(inst.lower().unwrap()).unwrap().steps, once.steps);
        }
    }
}

#[test]
fn repeat_expands_to_depth() {
    let reg = std_reg();
    for depth in 1..=4 {
        let inst = make(
            &reg,
            "LinearEncoder",
            &json!({"in_features": 3, "hidden": 5, "depth": depth}),
            "enc",
            0,
        );
        let kernels = lower_steps(inst.lower().unwrap()).unwrap().steps;
        let linears = kernels.iter().filter(|s| s.name() == "linear").count();
        assert_eq!(linears, depth);
        assert_eq!(
            inst.parameter_count(),
            3 * 5 + 5 + (depth - 1) * (5 * 5 + 5)
        );
    }
}

#[test]
fn parameter_errors_name_the_parameter() {
    let reg = std_reg();
    let inst = |p: Value| reg.instantiate("Linear", p.as_object().unwrap(), "lin", 0);
    assert!(
        matches!(inst(json!({"out_features": 2})), Err(ModuleError::MissingParam(n)) if n == "in_features")
    );
    assert!(matches!(
        inst(json!({"in_features": 2, "out_features": 2, "bias": true})),
        Err(ModuleError::UnknownParam(n)) if n == "bias"
    ));
    assert!(matches!(
        inst(json!({"in_features": "two", "out_features": 2})),
        Err(ModuleError::ParamKind { name, .. }) if name == "in_features"
    ));
    assert!(matches!(
        inst(json!({"in_features": 2, "out_features": 2, "init": "orthogonal"})),
        Err(ModuleError::ConstraintViolation { name, .. }) if name == "init"
    ));
    assert!(matches!(
        reg.instantiate("JasperEncoder", &Map::new(), "x", 0),
        Err(ModuleError::UnknownDescriptor(_))
    ));
    assert!(matches!(
        reg.instantiate("Relu", &Map::new(), "not an id", 0),
        Err(ModuleError::InvalidId(_))
    ));
}

#[test]
fn composite_inner_mismatch_is_reported_at_instantiation() {
    let mut reg =
        axon_core::stdcollection::std_registry(axon_core::stdcollection::shipped_hierarchy())
            .unwrap();
    reg.register_json(
        &json!({
            "name": "Widen",
            "params": [{"name": "n", "kind": "int", "required": true}],
            "inputs": [{"name": "x", "type": "[Batch, Channel:$n]"}],
            "outputs": [{"name": "y", "type": "[Batch, Channel:$n]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "a", "class": "Tanh", "params": {"features": "$n"}},
                    {"id": "b", "class": "Linear", "params": {"in_features": 7, "out_features": "$n"}},
                ],
                "wiring": [
                    {"from": "in.x", "to": "a.x"},
                    {"from": "a.y", "to": "b.x"},
                    {"from": "b.y", "to": "out.y"},
                ],
            }},
        })
        .to_string(),
    )
    .unwrap();
    let ok = reg.instantiate("Widen", json!({"n": 7}).as_object().unwrap(), "w", 0);
    assert!(ok.is_ok());
    let err = reg
        .instantiate("Widen", json!({"n": 3}).as_object().unwrap(), "w", 0)
        .unwrap_err();
    assert!(
        matches!(err.root(), ModuleError::CompositeType(m) if m.from == "a.y" && m.to == "b.x"),
        "{err}"
    );
}
