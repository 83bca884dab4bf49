//! Random hierarchies, types and small trainable graphs shared by the
//! integration and acceptance suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axon_core::backend::{Batch, Tensor};
use axon_core::graph::{Graph, TensorHandle};
use axon_core::modulesys::Registry;
use axon_core::stdcollection::{shipped_hierarchy, std_registry};
use axon_core::typesys::{AxisType, NeuralType, Tag, TagHierarchy};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn std_reg() -> Arc<Registry> {
    Arc::new(std_registry(shipped_hierarchy()).expect("collection registers"))
}

/// Built-ins plus up to eight user tags, each under a random existing tag.
pub fn random_hierarchy(rng: &mut ChaCha8Rng) -> TagHierarchy {
    let mut h = TagHierarchy::new();
    for i in 0..rng.gen_range(0..=8) {
        let names: Vec<String> = h.tags().map(|t| t.name().to_string()).collect();
        let parent = names.choose(rng).expect("built-ins exist").clone();
        h.define_tag(&format!("U{i}"), &parent)
            .expect("fresh name, known parent");
    }
    h.freeze();
    h
}

fn random_tag(rng: &mut ChaCha8Rng, h: &TagHierarchy) -> Tag {
    let tags: Vec<&Tag> = h.tags().collect();
    (*tags.choose(rng).expect("non-empty")).clone()
}

fn random_dim(rng: &mut ChaCha8Rng, allow_dims: bool) -> Option<usize> {
    if allow_dims && rng.gen_bool(0.5) {
        Some(rng.gen_range(1..=3))
    } else {
        None
    }
}

/// A tensor type of rank 1..=4.
pub fn random_tensor(rng: &mut ChaCha8Rng, h: &TagHierarchy, allow_dims: bool) -> NeuralType {
    let rank = rng.gen_range(1..=4);
    let axes = (0..rank)
        .map(|_| AxisType::new(random_tag(rng, h), random_dim(rng, allow_dims)).expect("valid dim"))
        .collect();
    NeuralType::tensor(axes).expect("non-empty")
}

/// A type related to `a`: equal, permuted, retagged along the hierarchy,
/// re-dimensioned, or of a different rank.
pub fn related(
    rng: &mut ChaCha8Rng,
    h: &TagHierarchy,
    a: &NeuralType,
    allow_dims: bool,
) -> NeuralType {
    let mut axes = a.axes().to_vec();
    match rng.gen_range(0..6) {
        0 => {}
        1 => axes.shuffle(rng),
        2 => {
            let i = rng.gen_range(0..axes.len());
            if let Ok(Some(p)) = h.parent(&axes[i].tag) {
                axes[i] = AxisType::new(p.clone(), axes[i].dim).unwrap();
            }
        }
        3 => {
            let i = rng.gen_range(0..axes.len());
            axes[i] = AxisType::new(random_tag(rng, h), axes[i].dim).unwrap();
        }
        4 => {
            let i = rng.gen_range(0..axes.len());
            axes[i] = AxisType::new(axes[i].tag.clone(), random_dim(rng, allow_dims)).unwrap();
        }
        _ => {
            if axes.len() > 1 && rng.gen_bool(0.5) {
                axes.pop();
            } else {
                axes.push(AxisType::new(random_tag(rng, h), random_dim(rng, allow_dims)).unwrap());
            }
        }
    }
    NeuralType::tensor(axes).unwrap()
}

/// Uniform values in [-1, 1).
pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

fn class_labels(rng: &mut ChaCha8Rng, shape: &[usize], k: usize, allow_ignored: bool) -> Tensor {
    let n: usize = shape.iter().product();
    let lo = if allow_ignored { -1 } else { 0 };
    let mut v: Vec<f32> = (0..n).map(|_| rng.gen_range(lo..k as i64) as f32).collect();
    v[0] = rng.gen_range(0..k) as f32;
    Tensor::new(shape.to_vec(), v).unwrap()
}

fn csv_source(g: &mut Graph, f: usize, k: usize) -> Vec<TensorHandle> {
    let cols: Vec<String> = (0..f).map(|i| format!("x{i}")).collect();
    g.add(
        "CsvDataLayer",
        json!({"path": "none.csv", "feature_columns": cols, "label_column": "y", "num_classes": k}),
        "data",
    )
    .unwrap()
}

fn link(
    g: &mut Graph,
    from: &TensorHandle,
    class: &str,
    params: serde_json::Value,
    id: &str,
) -> TensorHandle {
    let out = g.add(class, params, id).unwrap();
    let port = g.instance(id).unwrap().inputs[0].name.clone();
    g.connect(from, id, &port, false).unwrap();
    out[0].clone()
}

/// Random Linear/Relu/Tanh layers over `[Batch, Channel:width]`.
fn dense_stack(
    rng: &mut ChaCha8Rng,
    g: &mut Graph,
    mut cur: TensorHandle,
    mut width: usize,
) -> (TensorHandle, usize) {
    for i in 0..rng.gen_range(0..=3) {
        let id = format!("layer{i}");
        cur = match rng.gen_range(0..3) {
            0 => {
                let w = rng.gen_range(1..=6);
                let h = link(
                    g,
                    &cur,
                    "Linear",
                    json!({"in_features": width, "out_features": w}),
                    &id,
                );
                width = w;
                h
            }
            1 => link(g, &cur, "Relu", json!({}), &id),
            _ => link(g, &cur, "Tanh", json!({"features": width}), &id),
        };
    }
    (cur, width)
}

fn classifier_head(
    g: &mut Graph,
    cur: &TensorHandle,
    width: usize,
    k: usize,
    lead: &[&str],
) -> TensorHandle {
    let logits = link(
        g,
        cur,
        "Linear",
        json!({"in_features": width, "out_features": k, "out_tag": "LogProbs", "lead": lead}),
        "logits",
    );
    let lp = link(
        g,
        &logits,
        "LogSoftmax",
        json!({"features": k, "lead": lead}),
        "norm",
    );
    g.add("NllLoss", json!({"num_classes": k, "lead": lead}), "loss")
        .unwrap();
    g.connect(&lp, "loss", "log_probs", false).unwrap();
    g.handle("loss", "loss").unwrap()
}

/// One of four small graph shapes ending in a scalar loss, with a matching
/// random batch. Covers every kernel.
pub fn random_graph(rng: &mut ChaCha8Rng, reg: &Arc<Registry>) -> (Graph, Batch) {
    let mut g = Graph::new(reg.clone(), rng.gen());
    let mut batch = Batch::new();
    let rows = rng.gen_range(2..=5);
    let kind = rng.gen_range(0..4);
    let loss = if kind == 2 {
        let (t, v) = (rng.gen_range(2..=4), rng.gen_range(2..=5));
        let d = g
            .add(
                "SequenceDataLayer",
                json!({"path": "none.txt", "max_len": t, "vocab_size": v}),
                "data",
            )
            .unwrap();
        let e = rng.gen_range(1..=4);
        let emb = link(
            &mut g,
            &d[0],
            "EmbeddingLookup",
            json!({"vocab_size": v, "dim": e}),
            "embed",
        );
        let (cur, width) = if rng.gen_bool(0.5) {
            let h = rng.gen_range(1..=4);
            let params =
                json!({"in_features": e, "hidden": h, "in_tag": "Embedding", "max_len": t});
            (link(&mut g, &emb, "RnnCell", params, "rnn"), h)
        } else {
            let h = rng.gen_range(1..=4);
            let params = json!({"in_features": e, "out_features": h, "in_tag": "Embedding"});
            let c = link(&mut g, &emb, "Connector", params, "proj");
            (
                link(
                    &mut g,
                    &c,
                    "Tanh",
                    json!({"lead": ["Batch", "Time"]}),
                    "act",
                ),
                h,
            )
        };
        let l = classifier_head(&mut g, &cur, width, v, &["Batch", "Time"]);
        g.connect(&d[2], "loss", "labels", false).unwrap();
        let ids = (0..rows * t).map(|_| rng.gen_range(0..v) as f32).collect();
        batch.insert(
            "data.tokens".into(),
            Tensor::new(vec![rows, t], ids).unwrap(),
        );
        batch.insert(
            "data.mask".into(),
            Tensor::new(vec![rows, t], vec![1.0; rows * t]).unwrap(),
        );
        batch.insert(
            "data.labels".into(),
            class_labels(rng, &[rows, t, 1], v, true),
        );
        l
    } else {
        let (f, k) = (rng.gen_range(1..=4), rng.gen_range(2..=4));
        let d = csv_source(&mut g, f, if kind == 1 { 0 } else { k });
        batch.insert("data.features".into(), uniform(rng, &[rows, f]));
        let (cur, width) = if kind == 3 {
            branches(rng, &mut g, &d[0], f)
        } else {
            dense_stack(rng, &mut g, d[0].clone(), f)
        };
        if kind == 1 {
            let pred = link(
                &mut g,
                &cur,
                "Linear",
                json!({"in_features": width, "out_features": 1}),
                "pred",
            );
            g.add(
                "MseLoss",
                json!({"features": 1, "target_tag": "Label"}),
                "loss",
            )
            .unwrap();
            g.connect(&pred, "loss", "pred", false).unwrap();
            g.connect(&d[1], "loss", "target", false).unwrap();
            batch.insert("data.labels".into(), uniform(rng, &[rows, 1]));
            g.handle("loss", "loss").unwrap()
        } else {
            let l = classifier_head(&mut g, &cur, width, k, &["Batch"]);
            g.connect(&d[1], "loss", "labels", false).unwrap();
            batch.insert(
                "data.labels".into(),
                class_labels(rng, &[rows, 1], k, false),
            );
            l
        }
    };
    g.add_sink(&loss).unwrap();
    assert!(g.validate().is_clean());
    (g, batch)
}

/// Two linear branches joined by Concat or Add, with a transpose round trip.
fn branches(
    rng: &mut ChaCha8Rng,
    g: &mut Graph,
    x: &TensorHandle,
    f: usize,
) -> (TensorHandle, usize) {
    let (wa, wb) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let concat = rng.gen_bool(0.5);
    let wb = if concat { wb } else { wa };
    let a = link(
        g,
        x,
        "Linear",
        json!({"in_features": f, "out_features": wa}),
        "left",
    );
    let a = link(g, &a, "Tanh", json!({}), "left_act");
    let b = link(
        g,
        x,
        "Linear",
        json!({"in_features": f, "out_features": wb}),
        "right",
    );
    let b = link(
        g,
        &b,
        "Transpose",
        json!({"tags": ["Batch", "Channel"], "dims": [0, wb], "perm": [1, 0]}),
        "flip",
    );
    let b = link(
        g,
        &b,
        "Transpose",
        json!({"tags": ["Channel", "Batch"], "dims": [wb, 0], "perm": [1, 0]}),
        "unflip",
    );
    let (out, width) = if concat {
        let p = json!({"tags": ["Batch", "Channel"], "axis": "Channel", "left_dims": [0, wa], "right_dims": [0, wb]});
        let o = g.add("Concat", p, "join").unwrap();
        (o, wa + wb)
    } else {
        let o = g
            .add(
                "Add",
                json!({"type": format!("[Batch, Channel:{wa}]")}),
                "join",
            )
            .unwrap();
        (o, wa)
    };
    g.connect(&a, "join", "a", false).unwrap();
    g.connect(&b, "join", "b", false).unwrap();
    (out[0].clone(), width)
}
