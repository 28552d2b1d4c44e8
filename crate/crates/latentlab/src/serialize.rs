//! Versioned JSON documents for models, worlds, and direction banks.
//!
//! Every document carries a `format_version` so old files fail loudly instead
//! of parsing into something subtly wrong. Floats are written in shortest
//! round-trip form, so save/load reproduces every value bit for bit and
//! re-serializing unchanged data yields identical bytes.

use serde::{Deserialize, Serialize};

use crate::directions::{BankEstimator, DirectionBank, SemanticDirection};
use crate::error::{Error, Result};
use crate::model::DiffModel;
use crate::world::{AttributeAccuracy, AttributeSpec, World, WorldConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Leading fields common to every document, parsed first so a version
/// mismatch is reported as such rather than as a shape error.
#[derive(Deserialize)]
struct Envelope {
    format_version: u32,
}

fn check_version(text: &str, kind: &str) -> Result<()> {
    let envelope: Envelope = serde_json::from_str(text)
        .map_err(|e| Error::Serialization(format!("{kind}: {e}")))?;
    if envelope.format_version != FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "{kind}: unsupported format version {} (this build reads {FORMAT_VERSION})",
            envelope.format_version
        )));
    }
    Ok(())
}

fn to_pretty<T: Serialize>(value: &T, kind: &str) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Serialization(format!("{kind}: {e}")))?;
    text.push('\n');
    Ok(text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    model: DiffModel,
}

pub fn model_to_json(model: &DiffModel) -> Result<String> {
    to_pretty(
        &ModelDoc {
            format_version: FORMAT_VERSION,
            model: model.clone(),
        },
        "model document",
    )
}

pub fn model_from_json(text: &str) -> Result<DiffModel> {
    check_version(text, "model document")?;
    let doc: ModelDoc = serde_json::from_str(text)
        .map_err(|e| Error::Serialization(format!("model document: {e}")))?;
    Ok(doc.model)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    format_version: u32,
    config: WorldConfig,
    attributes: Vec<AttributeSpec>,
    generator: DiffModel,
    edit_classifiers: Vec<DiffModel>,
    eval_classifiers: Vec<DiffModel>,
    accuracies: Vec<AttributeAccuracy>,
}

pub fn world_to_json(world: &World) -> Result<String> {
    to_pretty(
        &WorldDoc {
            format_version: FORMAT_VERSION,
            config: world.config().clone(),
            attributes: world.attributes().to_vec(),
            generator: world.generator().clone(),
            edit_classifiers: (0..world.attributes().len())
                .map(|i| world.edit_classifier(i).clone())
                .collect(),
            eval_classifiers: (0..world.attributes().len())
                .map(|i| world.eval_classifier(i).clone())
                .collect(),
            accuracies: world.accuracies().to_vec(),
        },
        "world document",
    )
}

/// Parse and fully revalidate a world; a hand-edited document that violates
/// any structural invariant is rejected.
pub fn world_from_json(text: &str) -> Result<World> {
    check_version(text, "world document")?;
    let doc: WorldDoc = serde_json::from_str(text)
        .map_err(|e| Error::Serialization(format!("world document: {e}")))?;
    World::from_parts(
        doc.config,
        doc.attributes,
        doc.generator,
        doc.edit_classifiers,
        doc.eval_classifiers,
        doc.accuracies,
    )
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDoc {
    format_version: u32,
    estimator: BankEstimator,
    directions: Vec<SemanticDirection>,
}

pub fn bank_to_json(bank: &DirectionBank) -> Result<String> {
    to_pretty(
        &BankDoc {
            format_version: FORMAT_VERSION,
            estimator: bank.estimator(),
            directions: bank.directions().to_vec(),
        },
        "direction document",
    )
}

/// Parse a direction bank and check it against the world it will edit.
pub fn bank_from_json(text: &str, world: &World) -> Result<DirectionBank> {
    check_version(text, "direction document")?;
    let doc: BankDoc = serde_json::from_str(text)
        .map_err(|e| Error::Serialization(format!("direction document: {e}")))?;
    DirectionBank::from_directions(world, doc.estimator, doc.directions)
}
