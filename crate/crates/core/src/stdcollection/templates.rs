use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde_json::json;

use crate::graph::{Graph, GraphError};
use crate::modulesys::Registry;
use crate::runtime::{ActionConfig, OptimizerConfig};

/// Which decoder and loss sit behind the shared data layer and encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `data -> encoder -> decoder_a -> loss_a`, a per-step MLP decoder.
    CtcStyle,
    /// `data -> encoder -> connector -> decoder_b -> loss_b`, a recurrent decoder.
    SeqStyle,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::CtcStyle => "ctc_style",
            Variant::SeqStyle => "seq_style",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ctc_style" => Ok(Variant::CtcStyle),
            "seq_style" => Ok(Variant::SeqStyle),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

/// Sizes and data source of an encoder/decoder graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateParams {
    /// Token-sequence file, relative to the graph's base directory.
    pub path: String,
    pub max_len: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Encoder width.
    pub hidden: usize,
    pub depth: usize,
    /// Width the recurrent decoder expects; differs from `hidden` so the
    /// connector has something to repair.
    pub decoder_in: usize,
    pub decoder_hidden: usize,
    /// Include the connector in `seq_style`. Without it the encoder feeds
    /// the recurrent decoder directly.
    pub connector: bool,
    pub seed: u64,
    /// Training action stored with the graph (sgd, lr 0.1).
    pub max_steps: u64,
    pub batch_size: usize,
}

impl Default for TemplateParams {
    fn default() -> Self {
        TemplateParams {
            path: "seq.txt".into(),
            max_len: 8,
            vocab_size: 6,
            embed_dim: 4,
            hidden: 6,
            depth: 2,
            decoder_in: 5,
            decoder_hidden: 7,
            connector: true,
            seed: 0,
            max_steps: 40,
            batch_size: 8,
        }
    }
}

/// Build and validate an encoder/decoder graph. Both variants give the data
/// layer and encoder the same ids and parameters, so under one seed they
/// hold identical encoder weights.
pub fn build_encoder_decoder_template(
    reg: &Arc<Registry>,
    variant: Variant,
    p: &TemplateParams,
) -> Result<Graph, GraphError> {
    let mut g = Graph::new(reg.clone(), p.seed);
    let v = p.vocab_size;
    let data = g.add(
        "SequenceDataLayer",
        json!({"path": p.path, "max_len": p.max_len, "vocab_size": v}),
        "data",
    )?;
    let (tokens, labels) = (&data[0], &data[2]);
    let enc = g.add(
        "SeqEncoder",
        json!({"vocab_size": v, "embed_dim": p.embed_dim, "hidden": p.hidden, "depth": p.depth, "out_tag": "Encoded"}),
        "encoder",
    )?;
    g.connect(tokens, "encoder", "tokens", false)?;

    let (decoder, loss) = match variant {
        Variant::CtcStyle => {
            g.add(
                "MlpDecoder",
                json!({"in_features": p.hidden, "hidden": p.decoder_hidden, "num_classes": v, "lead": ["Batch", "Time"]}),
                "decoder_a",
            )?;
            g.connect(&enc[0], "decoder_a", "x", false)?;
            ("decoder_a", "loss_a")
        }
        Variant::SeqStyle => {
            let feed = if p.connector {
                let conn = g.add(
                    "Connector",
                    json!({"in_features": p.hidden, "out_features": p.decoder_in}),
                    "connector",
                )?;
                g.connect(&enc[0], "connector", "x", false)?;
                conn[0].clone()
            } else {
                enc[0].clone()
            };
            g.add(
                "RnnDecoder",
                json!({"in_features": p.decoder_in, "hidden": p.decoder_hidden, "num_classes": v}),
                "decoder_b",
            )?;
            g.connect(&feed, "decoder_b", "x", false)?;
            ("decoder_b", "loss_b")
        }
    };
    let out = g.handle(decoder, "log_probs")?;
    let l = g.add(
        "NllLoss",
        json!({"lead": ["Batch", "Time"], "num_classes": v}),
        loss,
    )?;
    g.connect(&out, loss, "log_probs", false)?;
    g.connect(labels, loss, "labels", false)?;
    g.add_sink(&l[0])?;
    g.action = Some(ActionConfig::train(
        p.max_steps,
        p.batch_size,
        OptimizerConfig::default(),
    ));
    g.validate();
    Ok(g)
}
