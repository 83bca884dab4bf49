use serde_json::{json, Value};

use crate::modulesys::{ModuleDescriptor, ModuleError, Registry};

/// Names registered by [`register_std_descriptors`], in registration order.
pub const STD_DESCRIPTOR_NAMES: &[&str] = &[
    "CsvDataLayer",
    "SequenceDataLayer",
    "Linear",
    "Connector",
    "Relu",
    "Tanh",
    "LogSoftmax",
    "NllLoss",
    "Accuracy",
    "MseLoss",
    "Concat",
    "Transpose",
    "EmbeddingLookup",
    "Add",
    "RnnCell",
    "DenseTanh",
    "LinearEncoder",
    "MlpDecoder",
    "RnnDecoder",
    "SeqEncoder",
];

fn int(name: &str, min: i64) -> Value {
    json!({"name": name, "kind": "int", "required": true, "constraint": {"at_least": min}})
}

fn int_or(name: &str, min: i64, default: i64) -> Value {
    json!({"name": name, "kind": "int", "default": default, "constraint": {"at_least": min}})
}

fn str_or(name: &str, default: &str) -> Value {
    json!({"name": name, "kind": "string", "default": default})
}

fn tags_or(name: &str, default: &[&str]) -> Value {
    json!({"name": name, "kind": "string-list", "default": default, "constraint": "non_empty"})
}

fn init() -> [Value; 2] {
    [
        json!({"name": "init", "kind": "string", "default": "glorot", "constraint": {"one_of": ["glorot", "zeros"]}}),
        json!({"name": "seed", "kind": "int", "default": 0}),
    ]
}

fn data_layer_common() -> [Value; 3] {
    [
        int_or("batch_size", 0, 0),
        json!({"name": "repeats", "kind": "bool", "default": true}),
        json!({"name": "shuffle", "kind": "bool", "default": true}),
    ]
}

/// `[first..., then...]` as one JSON array.
fn params(first: impl IntoIterator<Item = Value>, then: impl IntoIterator<Item = Value>) -> Value {
    Value::Array(first.into_iter().chain(then).collect())
}

/// Parameters shared by every linear-layer-like descriptor.
fn linear_params(lead: &[&str], out_tag: &str) -> Value {
    params(
        [
            int("in_features", 1),
            int("out_features", 1),
            tags_or("lead", lead),
            str_or("in_tag", "Channel"),
            str_or("out_tag", out_tag),
        ],
        init(),
    )
}

/// Element-wise activation over `[...lead, tag:features]`; 0 features is dynamic.
fn activation(name: &str, kernel: &str) -> Value {
    json!({
        "name": name,
        "params": [tags_or("lead", &["Batch"]), str_or("tag", "Channel"), int_or("features", 0, 0)],
        "inputs": [{"name": "x", "type": "[...$lead, $tag:$features]"}],
        "outputs": [{"name": "y", "type": "[...$lead, $tag:$features]"}],
        "impl": {"primitive": kernel},
    })
}

fn class_head(name: &str, kernel: &str, out: &str, out_tag: &str) -> Value {
    json!({
        "name": name,
        "params": [tags_or("lead", &["Batch"]), int_or("num_classes", 0, 0), json!({"name": "ignore_index", "kind": "int", "default": -1})],
        "inputs": [
            {"name": "log_probs", "type": "[...$lead, LogProbs:$num_classes]"},
            {"name": "labels", "type": "[...$lead, Label:1]"},
        ],
        "outputs": [{"name": out, "type": format!("scalar({out_tag})")}],
        "impl": {"primitive": kernel},
    })
}

/// Every standard descriptor as its JSON definition.
pub fn std_descriptors() -> Vec<Value> {
    let [init, seed] = init();
    vec![
        json!({
            "name": "CsvDataLayer",
            "params": params([
                json!({"name": "path", "kind": "string", "required": true, "constraint": "non_empty"}),
                json!({"name": "feature_columns", "kind": "string-list", "required": true, "constraint": "non_empty"}),
                json!({"name": "label_column", "kind": "string", "required": true, "constraint": "non_empty"}),
                int("num_classes", 0),
                str_or("feature_tag", "Channel"),
            ], data_layer_common()),
            "outputs": [
                {"name": "features", "type": "[Batch, $feature_tag:#feature_columns]"},
                {"name": "labels", "type": "[Batch, Label:1]"},
            ],
            "impl": {"data_layer": "csv"},
        }),
        json!({
            "name": "SequenceDataLayer",
            "params": params([
                json!({"name": "path", "kind": "string", "required": true, "constraint": "non_empty"}),
                int("max_len", 1),
                int("vocab_size", 1),
                int_or("pad_id", 0, 0),
            ], data_layer_common()),
            "outputs": [
                {"name": "tokens", "type": "[Batch, Time:$max_len]"},
                {"name": "mask", "type": "[Batch, Time:$max_len]"},
                {"name": "labels", "type": "[Batch, Time:$max_len, Label:1]"},
            ],
            "impl": {"data_layer": "sequence"},
        }),
        json!({
            "name": "Linear",
            "params": linear_params(&["Batch"], "Channel"),
            "inputs": [{"name": "x", "type": "[...$lead, $in_tag:$in_features]"}],
            "outputs": [{"name": "y", "type": "[...$lead, $out_tag:$out_features]"}],
            "impl": {"primitive": "linear"},
        }),
        json!({
            "name": "Connector",
            "params": linear_params(&["Batch", "Time"], "Channel"),
            "inputs": [{"name": "x", "type": "[...$lead, $in_tag:$in_features]"}],
            "outputs": [{"name": "y", "type": "[...$lead, $out_tag:$out_features]"}],
            "impl": {"primitive": "linear"},
        }),
        activation("Relu", "relu"),
        activation("Tanh", "tanh"),
        json!({
            "name": "LogSoftmax",
            "params": [tags_or("lead", &["Batch"]), str_or("tag", "LogProbs"), int_or("features", 0, 0)],
            "inputs": [{"name": "x", "type": "[...$lead, $tag:$features]"}],
            "outputs": [{"name": "y", "type": "[...$lead, LogProbs:$features]"}],
            "impl": {"primitive": "log_softmax"},
        }),
        class_head("NllLoss", "nll_loss", "loss", "Loss"),
        class_head("Accuracy", "accuracy", "accuracy", "Metric"),
        json!({
            "name": "MseLoss",
            "params": [tags_or("lead", &["Batch"]), int_or("features", 0, 0), str_or("pred_tag", "Channel"), str_or("target_tag", "Channel")],
            "inputs": [
                {"name": "pred", "type": "[...$lead, $pred_tag:$features]"},
                {"name": "target", "type": "[...$lead, $target_tag:$features]"},
            ],
            "outputs": [{"name": "loss", "type": "scalar(Loss)"}],
            "impl": {"primitive": "mse_loss"},
        }),
        json!({
            "name": "Concat",
            "params": [
                json!({"name": "tags", "kind": "string-list", "required": true, "constraint": "non_empty"}),
                json!({"name": "axis", "kind": "string", "required": true}),
                json!({"name": "left_dims", "kind": "int-list", "required": true, "constraint": {"at_least": 0}}),
                json!({"name": "right_dims", "kind": "int-list", "required": true, "constraint": {"at_least": 0}}),
            ],
            "inputs": [
                {"name": "a", "type": {"axes": {"tags": "tags", "dims": "left_dims"}}},
                {"name": "b", "type": {"axes": {"tags": "tags", "dims": "right_dims"}}},
            ],
            "outputs": [{"name": "y", "type": {"concat": {"tags": "tags", "axis": "axis", "left": "left_dims", "right": "right_dims"}}}],
            "impl": {"primitive": "concat"},
        }),
        json!({
            "name": "Transpose",
            "params": [
                json!({"name": "tags", "kind": "string-list", "required": true, "constraint": "non_empty"}),
                json!({"name": "dims", "kind": "int-list", "required": true, "constraint": {"at_least": 0}}),
                json!({"name": "perm", "kind": "int-list", "required": true, "constraint": {"at_least": 0}}),
            ],
            "inputs": [{"name": "x", "type": {"axes": {"tags": "tags", "dims": "dims"}}}],
            "outputs": [{"name": "y", "type": {"permuted": {"tags": "tags", "dims": "dims", "perm": "perm"}}}],
            "impl": {"primitive": "transpose"},
        }),
        json!({
            "name": "EmbeddingLookup",
            "params": [int("vocab_size", 1), int("dim", 1), tags_or("lead", &["Batch", "Time"]), str_or("out_tag", "Embedding"), init.clone(), seed.clone()],
            "inputs": [{"name": "ids", "type": "[...$lead]"}],
            "outputs": [{"name": "y", "type": "[...$lead, $out_tag:$dim]"}],
            "impl": {"primitive": "embedding_lookup"},
        }),
        json!({
            "name": "Add",
            "params": [json!({"name": "type", "kind": "string", "required": true})],
            "inputs": [{"name": "a", "type": {"type_param": "type"}}, {"name": "b", "type": {"type_param": "type"}}],
            "outputs": [{"name": "y", "type": {"type_param": "type"}}],
            "impl": {"primitive": "add"},
        }),
        json!({
            "name": "RnnCell",
            "params": [int("in_features", 1), int("hidden", 1), int_or("max_len", 0, 0), str_or("in_tag", "Channel"), init.clone(), seed.clone()],
            "inputs": [{"name": "x", "type": "[Batch, Time:$max_len, $in_tag:$in_features]"}],
            "outputs": [{"name": "h", "type": "[Batch, Time:$max_len, Channel:$hidden]"}],
            "impl": {"primitive": "rnn_tanh"},
        }),
        json!({
            "name": "DenseTanh",
            "params": linear_params(&["Batch"], "Channel"),
            "inputs": [{"name": "x", "type": "[...$lead, $in_tag:$in_features]"}],
            "outputs": [{"name": "y", "type": "[...$lead, $out_tag:$out_features]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "lin", "class": "Linear", "params": {
                        "in_features": "$in_features", "out_features": "$out_features", "lead": "$lead",
                        "in_tag": "$in_tag", "out_tag": "$out_tag", "init": "$init", "seed": "$seed"}},
                    {"id": "act", "class": "Tanh", "params": {"lead": "$lead", "tag": "$out_tag", "features": "$out_features"}},
                ],
                "wiring": [
                    {"from": "in.x", "to": "lin.x"},
                    {"from": "lin.y", "to": "act.x"},
                    {"from": "act.y", "to": "out.y"},
                ],
            }},
        }),
        json!({
            "name": "LinearEncoder",
            "params": params([
                int("in_features", 1),
                int("hidden", 1),
                int_or("depth", 1, 1),
                tags_or("lead", &["Batch"]),
                str_or("in_tag", "Channel"),
                str_or("out_tag", "Channel"),
            ], [init.clone(), seed.clone()]),
            "inputs": [{"name": "x", "type": "[...$lead, $in_tag:$in_features]"}],
            "outputs": [{"name": "encoded", "type": "[...$lead, $out_tag:$hidden]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "first", "class": "DenseTanh", "params": {
                        "in_features": "$in_features", "out_features": "$hidden", "lead": "$lead",
                        "in_tag": "$in_tag", "out_tag": "$out_tag", "init": "$init", "seed": "$seed"}},
                    {"id": "layer", "class": "DenseTanh", "repeat": "$depth-1", "params": {
                        "in_features": "$hidden", "out_features": "$hidden", "lead": "$lead",
                        "in_tag": "$out_tag", "out_tag": "$out_tag", "init": "$init", "seed": "$seed"}},
                ],
                "wiring": [
                    {"from": "in.x", "to": "first.x"},
                    {"from": "first.y", "to": "layer.x"},
                    {"from": "layer.y", "to": "out.encoded"},
                ],
            }},
        }),
        json!({
            "name": "MlpDecoder",
            "params": params([
                int("in_features", 1),
                int("hidden", 1),
                int("num_classes", 1),
                tags_or("lead", &["Batch"]),
                str_or("in_tag", "Channel"),
            ], [init.clone(), seed.clone()]),
            "inputs": [{"name": "x", "type": "[...$lead, $in_tag:$in_features]"}],
            "outputs": [{"name": "log_probs", "type": "[...$lead, LogProbs:$num_classes]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "hidden", "class": "Linear", "params": {
                        "in_features": "$in_features", "out_features": "$hidden", "lead": "$lead",
                        "in_tag": "$in_tag", "out_tag": "Channel", "init": "$init", "seed": "$seed"}},
                    {"id": "act", "class": "Tanh", "params": {"lead": "$lead", "tag": "Channel", "features": "$hidden"}},
                    {"id": "logits", "class": "Linear", "params": {
                        "in_features": "$hidden", "out_features": "$num_classes", "lead": "$lead",
                        "in_tag": "Channel", "out_tag": "LogProbs", "init": "$init", "seed": "$seed"}},
                    {"id": "norm", "class": "LogSoftmax", "params": {"lead": "$lead", "features": "$num_classes"}},
                ],
                "wiring": [
                    {"from": "in.x", "to": "hidden.x"},
                    {"from": "hidden.y", "to": "act.x"},
                    {"from": "act.y", "to": "logits.x"},
                    {"from": "logits.y", "to": "norm.x"},
                    {"from": "norm.y", "to": "out.log_probs"},
                ],
            }},
        }),
        json!({
            "name": "RnnDecoder",
            "params": params([
                int("in_features", 1),
                int("hidden", 1),
                int("num_classes", 1),
                int_or("max_len", 0, 0),
                str_or("in_tag", "Channel"),
            ], [init.clone(), seed.clone()]),
            "inputs": [{"name": "x", "type": "[Batch, Time:$max_len, $in_tag:$in_features]"}],
            "outputs": [{"name": "log_probs", "type": "[Batch, Time:$max_len, LogProbs:$num_classes]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "rnn", "class": "RnnCell", "params": {
                        "in_features": "$in_features", "hidden": "$hidden", "max_len": "$max_len",
                        "in_tag": "$in_tag", "init": "$init", "seed": "$seed"}},
                    {"id": "logits", "class": "Linear", "params": {
                        "in_features": "$hidden", "out_features": "$num_classes", "lead": ["Batch", "Time"],
                        "in_tag": "Channel", "out_tag": "LogProbs", "init": "$init", "seed": "$seed"}},
                    {"id": "norm", "class": "LogSoftmax", "params": {"lead": ["Batch", "Time"], "features": "$num_classes"}},
                ],
                "wiring": [
                    {"from": "in.x", "to": "rnn.x"},
                    {"from": "rnn.h", "to": "logits.x"},
                    {"from": "logits.y", "to": "norm.x"},
                    {"from": "norm.y", "to": "out.log_probs"},
                ],
            }},
        }),
        json!({
            "name": "SeqEncoder",
            "params": params([
                int("vocab_size", 1),
                int("embed_dim", 1),
                int("hidden", 1),
                int_or("depth", 1, 1),
                str_or("out_tag", "Channel"),
            ], [init, seed]),
            "inputs": [{"name": "tokens", "type": "[Batch, Time]"}],
            "outputs": [{"name": "encoded", "type": "[Batch, Time, $out_tag:$hidden]"}],
            "impl": {"composite": {
                "nodes": [
                    {"id": "embed", "class": "EmbeddingLookup", "params": {
                        "vocab_size": "$vocab_size", "dim": "$embed_dim", "init": "$init", "seed": "$seed"}},
                    {"id": "stack", "class": "LinearEncoder", "params": {
                        "in_features": "$embed_dim", "hidden": "$hidden", "depth": "$depth", "lead": ["Batch", "Time"],
                        "in_tag": "Embedding", "out_tag": "$out_tag", "init": "$init", "seed": "$seed"}},
                ],
                "wiring": [
                    {"from": "in.tokens", "to": "embed.ids"},
                    {"from": "embed.y", "to": "stack.x"},
                    {"from": "stack.encoded", "to": "out.encoded"},
                ],
            }},
        }),
    ]
}

/// Register the whole collection. Fails on the first name already present.
pub fn register_std_descriptors(reg: &mut Registry) -> Result<(), ModuleError> {
    for d in std_descriptors() {
        let d: ModuleDescriptor =
            serde_json::from_value(d).map_err(|e| ModuleError::InvalidDescriptor(e.to_string()))?;
        reg.register(d)?;
    }
    Ok(())
}
