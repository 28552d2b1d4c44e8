//! Shared fixtures for unit tests.

use crate::linalg::{Matrix, Vector};
use crate::model::{Activation, DiffModel, Layer};
use crate::world::{
    build_world, AttributeAccuracy, AttributeConfig, AttributeSpec, ClassifierConfig,
    GeneratorKind, World, WorldConfig,
};

/// Small three-attribute world that trains in well under a second.
pub(crate) fn mini_world(generator: GeneratorKind, seed: u64) -> World {
    let hidden = match generator {
        GeneratorKind::Linear => Vec::new(),
        GeneratorKind::Nonlinear => vec![8],
    };
    build_world(&WorldConfig {
        latent_dim: 6,
        obs_dim: 12,
        attributes: vec![
            AttributeConfig::named("a"),
            AttributeConfig::named("b"),
            AttributeConfig::named("c"),
        ],
        entanglement_angles: Vec::new(),
        sampling_bias: Vec::new(),
        generator,
        classifier: ClassifierConfig {
            train_samples: 600,
            eval_train_samples: 600,
            edit_hidden: hidden.clone(),
            eval_hidden: hidden,
            learning_rate: 2.0,
            epochs: 250,
            holdout_fraction: 0.2,
            weight_decay: 1e-3,
            accuracy_floor: 0.9,
        },
        seed,
    })
    .unwrap()
}

/// Hand-assembled world with one attribute and nothing to condition on.
pub(crate) fn single_attribute_world() -> World {
    let config = WorldConfig {
        latent_dim: 2,
        obs_dim: 2,
        attributes: vec![AttributeConfig::named("only")],
        entanglement_angles: Vec::new(),
        sampling_bias: Vec::new(),
        generator: GeneratorKind::Linear,
        classifier: ClassifierConfig::default(),
        seed: 0,
    };
    let attributes = vec![AttributeSpec {
        name: "only".into(),
        oracle_direction: Vector::new(vec![1.0, 0.0]).unwrap(),
        oracle_bias: 0.0,
    }];
    let generator = DiffModel::new(vec![Layer::new(
        Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 }),
        Vector::zeros(2),
        Activation::Identity,
    )
    .unwrap()])
    .unwrap();
    let classifier = DiffModel::new(vec![Layer::new(
        Matrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
        Vector::zeros(1),
        Activation::Sigmoid,
    )
    .unwrap()])
    .unwrap();
    World::from_parts(
        config,
        attributes,
        generator,
        vec![classifier.clone()],
        vec![classifier],
        vec![AttributeAccuracy {
            attribute: "only".into(),
            edit_holdout: 1.0,
            eval_holdout: 1.0,
        }],
    )
    .unwrap()
}

/// Hand-assembled two-attribute world whose edit classifiers are the same
/// model, so conditioning one attribute on the other is always degenerate.
/// Useful for exercising abort paths deterministically.
pub(crate) fn twin_classifier_world() -> World {
    let config = WorldConfig {
        latent_dim: 2,
        obs_dim: 2,
        attributes: vec![AttributeConfig::named("a"), AttributeConfig::named("b")],
        entanglement_angles: Vec::new(),
        sampling_bias: Vec::new(),
        generator: GeneratorKind::Linear,
        classifier: ClassifierConfig::default(),
        seed: 0,
    };
    let attributes = vec![
        AttributeSpec {
            name: "a".into(),
            oracle_direction: Vector::new(vec![1.0, 0.0]).unwrap(),
            oracle_bias: 0.0,
        },
        AttributeSpec {
            name: "b".into(),
            oracle_direction: Vector::new(vec![0.0, 1.0]).unwrap(),
            oracle_bias: 0.0,
        },
    ];
    let generator = DiffModel::new(vec![Layer::new(
        Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 }),
        Vector::zeros(2),
        Activation::Identity,
    )
    .unwrap()])
    .unwrap();
    let shared = DiffModel::new(vec![Layer::new(
        Matrix::new(1, 2, vec![1.0, 1.0]).unwrap(),
        Vector::zeros(1),
        Activation::Sigmoid,
    )
    .unwrap()])
    .unwrap();
    let accuracies = attributes
        .iter()
        .map(|a| AttributeAccuracy {
            attribute: a.name.clone(),
            edit_holdout: 1.0,
            eval_holdout: 1.0,
        })
        .collect();
    World::from_parts(
        config,
        attributes,
        generator,
        vec![shared.clone(), shared.clone()],
        vec![shared.clone(), shared],
        accuracies,
    )
    .unwrap()
}
