//! Regenerate the generated part of the fixture corpus.
//!
//! Usage: `cargo run -p axon-core --example write_fixtures [DIR]` (default `fixtures`).

use std::path::PathBuf;
use std::sync::Arc;

use axon_core::graph::{BindingDoc, GraphDocument};
use axon_core::stdcollection::{
    build_encoder_decoder_template, shipped_hierarchy, std_registry, synth, TemplateParams,
    Variant, SHIPPED_TAGS,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    let write = |name: &str, text: &str| std::fs::write(dir.join(name), text);

    write("tags.json", SHIPPED_TAGS)?;
    write("blobs.csv", &synth::two_class_blobs())?;
    write("k4.csv", &synth::four_class_blobs())?;
    write("regression.csv", &synth::regression_fixture())?;
    write("seq.txt", &synth::sequence_fixture())?;

    let reg = Arc::new(std_registry(shipped_hierarchy())?);
    let p = TemplateParams::default();
    let ctc = build_encoder_decoder_template(&reg, Variant::CtcStyle, &p)?;
    write("ctc_style.json", &(ctc.to_json()? + "\n"))?;
    let seq = build_encoder_decoder_template(&reg, Variant::SeqStyle, &p)?;
    let doc = seq.to_document()?;
    write("seq_style.json", &(doc.to_json() + "\n"))?;
    write(
        "seq_style_no_connector.json",
        &(without_connector(doc).to_json() + "\n"),
    )?;
    Ok(())
}

/// The seq_style document with the connector removed and the encoder wired
/// straight into the decoder.
fn without_connector(mut doc: GraphDocument) -> GraphDocument {
    doc.modules.retain(|m| m.id != "connector");
    doc.dag.retain(|b| !b.to.starts_with("connector."));
    for b in &mut doc.dag {
        if b.from == "connector.y" {
            *b = BindingDoc {
                from: "encoder.encoded".into(),
                to: b.to.clone(),
            };
        }
    }
    doc
}
