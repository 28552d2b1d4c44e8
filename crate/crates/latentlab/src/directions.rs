//! Semantic direction search in latent space.
//!
//! Directions come in two flavors and two compositions. The instance-specific
//! direction at a point is the normalized gradient of the edit classifier
//! composed with the generator, signed toward the requested label. The
//! attribute-level direction summarizes a whole attribute, either by
//! averaging instance-specific directions over the prior or by fitting a
//! linear boundary in latent space and taking its normal. Blending the two
//! gives an instance-aware direction; projecting the blend orthogonal to the
//! condition attributes' own blended directions gives a conditional one.
//!
//! Every public constructor returns a unit vector. Sign convention: moving
//! along a direction increases the classifier score of its attribute when the
//! target label is 1, decreases it when the target is 0, so reversing the
//! target negates the direction exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Vector, NORM_FLOOR};
use crate::seeding::subseed;
use crate::train::{score_to_label, train_classifier, ClassifierArch, TrainConfig};
use crate::world::World;

/// Residual norm below which a condition direction counts as dependent on the
/// ones before it and is dropped from the projection basis.
const DEPENDENT_CONDITION_FLOOR: f64 = 1e-10;

/// Gradient norm below which a point counts as having no usable direction.
/// Deliberately tiny: a well-trained classifier saturates hard, scaling its
/// gradient by h(1-h) down to ~1e-16 of the weight scale, yet the normalized
/// direction is still exact because the scaling is a single scalar. The floor
/// only has to reject true zeros while staying far above the ~1e-150 range
/// where squaring norm components would underflow.
const GRADIENT_FLOOR: f64 = 1e-100;

/// Hyperparameters of the linear boundary fit. Fixed: the fit is an internal
/// estimator, not an experiment knob. The ridge term matters — labels near a
/// clean boundary are separable, and an unpenalized fit would drift toward a
/// max-margin normal set by a handful of edge samples.
const BOUNDARY_FIT_SEED: u64 = 0x1ab0_5eed;
const BOUNDARY_FIT_RATE: f64 = 3.0;
const BOUNDARY_FIT_EPOCHS: usize = 800;
const BOUNDARY_FIT_DECAY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    AttributeLevel,
    InstanceSpecific,
    InstanceAware,
    Conditional,
}

/// A unit direction in latent space tied to one attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirection", into = "RawDirection")]
pub struct SemanticDirection {
    vector: Vector,
    attribute: String,
    kind: DirectionKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirection {
    attribute: String,
    kind: DirectionKind,
    vector: Vector,
}

impl TryFrom<RawDirection> for SemanticDirection {
    type Error = Error;

    fn try_from(raw: RawDirection) -> Result<Self> {
        if (raw.vector.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidConfig(format!(
                "direction for {:?} has norm {}, expected 1",
                raw.attribute,
                raw.vector.norm()
            )));
        }
        Ok(SemanticDirection {
            vector: raw.vector,
            attribute: raw.attribute,
            kind: raw.kind,
        })
    }
}

impl From<SemanticDirection> for RawDirection {
    fn from(d: SemanticDirection) -> RawDirection {
        RawDirection {
            attribute: d.attribute,
            kind: d.kind,
            vector: d.vector,
        }
    }
}

impl SemanticDirection {
    fn from_unit(vector: Vector, attribute: &str, kind: DirectionKind) -> Self {
        debug_assert!((vector.norm() - 1.0).abs() < 1e-6);
        SemanticDirection {
            vector,
            attribute: attribute.to_string(),
            kind,
        }
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    /// Exact entrywise negation; the opposite edit polarity.
    pub fn negated(&self) -> SemanticDirection {
        SemanticDirection {
            vector: self.vector.scaled(-1.0),
            attribute: self.attribute.clone(),
            kind: self.kind,
        }
    }

    /// This direction oriented toward the given target label. Directions are
    /// stored toward label 1.
    pub fn toward(&self, target: bool) -> SemanticDirection {
        if target {
            self.clone()
        } else {
            self.negated()
        }
    }

    pub fn cosine(&self, other: &SemanticDirection) -> f64 {
        self.vector.cosine(&other.vector)
    }
}

/// Blend weights for the attribute-level component of the primal direction
/// (`lambda1`) and of each condition direction (`lambda2`). Weight 1 means
/// purely attribute-level, 0 purely instance-specific.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFactors {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ControlFactors {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for l in [lambda1, lambda2] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidConfig(format!(
                    "blend factor {l} outside [0, 1]"
                )));
            }
        }
        Ok(ControlFactors { lambda1, lambda2 })
    }

    /// Purely attribute-level on both sides.
    pub fn attribute_level() -> Self {
        ControlFactors {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl Default for ControlFactors {
    /// The operating point used throughout: a mostly attribute-level primal
    /// with fully instance-specific conditions.
    fn default() -> Self {
        ControlFactors {
            lambda1: 0.75,
            lambda2: 0.0,
        }
    }
}

/// Gradient of the scalar composite `classifier(generator(z))` with respect
/// to z: differentiate the classifier at the observation, then pull the
/// covector back through the generator.
fn composite_gradient(world: &World, attribute_index: usize, z: &Vector) -> Result<(f64, Vector)> {
    let x = world.observe(z)?;
    let classifier = world.edit_classifier(attribute_index);
    let score = classifier.forward(&x)?[0];
    let outer = classifier.grad_input(&x, 0)?;
    let grad = world.generator().vjp(z, &outer)?;
    Ok((score, grad))
}

/// Direction of steepest score change for one attribute at one point, signed
/// toward `target_label` and normalized.
pub fn instance_specific(
    world: &World,
    attribute: &str,
    z: &Vector,
    target_label: bool,
) -> Result<SemanticDirection> {
    let idx = world.attribute_index(attribute)?;
    let (_, grad) = composite_gradient(world, idx, z)?;
    let norm = grad.norm();
    if norm < GRADIENT_FLOOR {
        return Err(Error::ZeroGradient {
            attribute: attribute.to_string(),
            norm,
        });
    }
    let sign = if target_label { 1.0 } else { -1.0 };
    Ok(SemanticDirection::from_unit(
        grad.scaled(sign / norm),
        attribute,
        DirectionKind::InstanceSpecific,
    ))
}

/// Attribute-level direction by averaging instance-specific directions (all
/// toward label 1) over fresh prior draws. Saturated points contribute no
/// gradient and are skipped; if every sample is skipped the estimate fails.
pub fn attribute_level_avg(
    world: &World,
    attribute: &str,
    sample_count: usize,
    seed: u64,
) -> Result<SemanticDirection> {
    if sample_count == 0 {
        return Err(Error::EmptySampleSet(attribute.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "attribute-level-avg", 0));
    let mut sum = Vector::zeros(world.latent_dim());
    let mut contributors = 0usize;
    for _ in 0..sample_count {
        let z = world.sample_latent(&mut rng);
        match instance_specific(world, attribute, &z, true) {
            Ok(direction) => {
                sum = sum.add_scaled(1.0, direction.vector());
                contributors += 1;
            }
            Err(Error::ZeroGradient { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    if contributors == 0 {
        return Err(Error::EmptySampleSet(attribute.to_string()));
    }
    let mean = sum.scaled(1.0 / contributors as f64);
    let unit = mean
        .normalized()
        .map_err(|_| Error::DegenerateCombination(attribute.to_string()))?;
    Ok(SemanticDirection::from_unit(
        unit,
        attribute,
        DirectionKind::AttributeLevel,
    ))
}

/// Attribute-level direction as the normal of a linear boundary fitted to
/// labeled latent samples, oriented so scores rise along it.
pub fn attribute_level_boundary(
    latent_samples: &[(Vector, bool)],
    attribute: &str,
) -> Result<SemanticDirection> {
    let dim = latent_samples
        .first()
        .map(|(z, _)| z.len())
        .ok_or(Error::DegenerateData)?;
    let trained = train_classifier(
        latent_samples,
        &ClassifierArch::linear(dim),
        &TrainConfig {
            learning_rate: BOUNDARY_FIT_RATE,
            epochs: BOUNDARY_FIT_EPOCHS,
            seed: BOUNDARY_FIT_SEED,
            holdout_fraction: 0.0,
            weight_decay: BOUNDARY_FIT_DECAY,
        },
    )?;
    let weights = trained.model.layers()[0].weights();
    let normal = Vector::new(weights.row(0).to_vec())?;
    let norm = normal.norm();
    if norm < NORM_FLOOR {
        return Err(Error::ZeroGradient {
            attribute: attribute.to_string(),
            norm,
        });
    }
    Ok(SemanticDirection::from_unit(
        normal.scaled(1.0 / norm),
        attribute,
        DirectionKind::AttributeLevel,
    ))
}

/// Blend an attribute-level and an instance-specific direction:
/// `normalize(lambda * attr + (1 - lambda) * inst)`. At the endpoints the
/// respective input comes back exactly.
pub fn combine(
    d_attr: &SemanticDirection,
    d_inst: &SemanticDirection,
    lambda: f64,
) -> Result<SemanticDirection> {
    if d_attr.attribute != d_inst.attribute {
        return Err(Error::AttributeMismatch {
            expected: d_attr.attribute.clone(),
            actual: d_inst.attribute.clone(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!(
            "blend factor {lambda} outside [0, 1]"
        )));
    }
    let attribute = d_attr.attribute.as_str();
    if lambda == 1.0 {
        return Ok(SemanticDirection::from_unit(
            d_attr.vector.clone(),
            attribute,
            DirectionKind::InstanceAware,
        ));
    }
    if lambda == 0.0 {
        return Ok(SemanticDirection::from_unit(
            d_inst.vector.clone(),
            attribute,
            DirectionKind::InstanceAware,
        ));
    }
    let blend = d_attr.vector.scaled(lambda).add_scaled(1.0 - lambda, &d_inst.vector);
    let unit = blend
        .normalized()
        .map_err(|_| Error::DegenerateCombination(attribute.to_string()))?;
    Ok(SemanticDirection::from_unit(
        unit,
        attribute,
        DirectionKind::InstanceAware,
    ))
}

/// Remove every condition component from the primal direction and normalize.
///
/// The conditions are orthonormalized first (modified Gram-Schmidt, two
/// passes); near-dependent ones are dropped with a warning since they add no
/// constraint. The projected primal is cleaned against the basis once more
/// after normalization, so the returned direction is orthogonal to every
/// retained condition far below the documented 1e-10 bound.
pub fn condition_project(
    primal: &SemanticDirection,
    conditions: &[SemanticDirection],
) -> Result<SemanticDirection> {
    if conditions.is_empty() {
        return Ok(primal.clone());
    }
    for c in conditions {
        if c.vector.len() != primal.vector.len() {
            return Err(Error::DimensionMismatch {
                context: "condition direction",
                expected: primal.vector.len(),
                actual: c.vector.len(),
            });
        }
    }
    let mut basis: Vec<Vector> = Vec::with_capacity(conditions.len());
    for c in conditions {
        let mut r = c.vector.clone();
        for _pass in 0..2 {
            for u in &basis {
                r = r.add_scaled(-r.dot(u), u);
            }
        }
        let norm = r.norm();
        if norm < DEPENDENT_CONDITION_FLOOR {
            log::warn!(
                "condition {:?} is dependent on earlier conditions (residual {norm:.3e}); dropped",
                c.attribute
            );
            continue;
        }
        basis.push(r.scaled(1.0 / norm));
    }
    let mut r = primal.vector.clone();
    for _pass in 0..2 {
        for u in &basis {
            r = r.add_scaled(-r.dot(u), u);
        }
    }
    let norm = r.norm();
    if norm < NORM_FLOOR {
        return Err(Error::DegenerateProjection(primal.attribute.clone()));
    }
    let mut unit = r.scaled(1.0 / norm);
    // Normalizing a tiny residual amplifies rounding left by the sweeps, so
    // re-clean at unit scale where the correction is exact to machine terms.
    for _pass in 0..2 {
        for u in &basis {
            unit = unit.add_scaled(-unit.dot(u), u);
        }
        let n = unit.norm();
        if n < NORM_FLOOR {
            return Err(Error::DegenerateProjection(primal.attribute.clone()));
        }
        unit = unit.scaled(1.0 / n);
    }
    Ok(SemanticDirection::from_unit(
        unit,
        primal.attribute.as_str(),
        DirectionKind::Conditional,
    ))
}

/// How a direction bank estimates its attribute-level directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankEstimator {
    /// Average of instance-specific directions over the prior.
    Averaging,
    /// Normal of a linear boundary fitted to classifier-labeled latent draws.
    Boundary,
}

/// Attribute-level directions for every attribute of a world, computed once
/// and shared by all edits against that world.
#[derive(Clone, Debug)]
pub struct DirectionBank {
    estimator: BankEstimator,
    directions: Vec<SemanticDirection>,
}

impl DirectionBank {
    pub fn averaging(world: &World, sample_count: usize, seed: u64) -> Result<Self> {
        let directions = world
            .attributes()
            .iter()
            .enumerate()
            .map(|(i, attr)| {
                attribute_level_avg(
                    world,
                    &attr.name,
                    sample_count,
                    subseed(seed, "bank-averaging", i as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionBank {
            estimator: BankEstimator::Averaging,
            directions,
        })
    }

    /// Boundary-normal estimates from a common pool of latent draws labeled
    /// by the edit classifiers.
    pub fn boundary(world: &World, sample_count: usize, seed: u64) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::DegenerateData);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "bank-boundary", 0));
        let mut pool: Vec<(Vector, Vec<bool>)> = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let z = world.sample_latent(&mut rng);
            let x = world.observe(&z)?;
            let labels = (0..world.attributes().len())
                .map(|i| Ok(score_to_label(world.edit_score(i, &x)?)))
                .collect::<Result<Vec<bool>>>()?;
            pool.push((z, labels));
        }
        let directions = world
            .attributes()
            .iter()
            .enumerate()
            .map(|(i, attr)| {
                let samples: Vec<(Vector, bool)> = pool
                    .iter()
                    .map(|(z, labels)| (z.clone(), labels[i]))
                    .collect();
                attribute_level_boundary(&samples, &attr.name)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionBank {
            estimator: BankEstimator::Boundary,
            directions,
        })
    }

    /// Reassemble a bank from stored directions, checking they line up with
    /// the world's attributes one to one and in order.
    pub fn from_directions(
        world: &World,
        estimator: BankEstimator,
        directions: Vec<SemanticDirection>,
    ) -> Result<Self> {
        if directions.len() != world.attributes().len() {
            return Err(Error::DimensionMismatch {
                context: "direction bank",
                expected: world.attributes().len(),
                actual: directions.len(),
            });
        }
        for (d, attr) in directions.iter().zip(world.attributes()) {
            if d.attribute != attr.name {
                return Err(Error::AttributeMismatch {
                    expected: attr.name.clone(),
                    actual: d.attribute.clone(),
                });
            }
            if d.vector.len() != world.latent_dim() {
                return Err(Error::DimensionMismatch {
                    context: "banked direction",
                    expected: world.latent_dim(),
                    actual: d.vector.len(),
                });
            }
        }
        Ok(DirectionBank {
            estimator,
            directions,
        })
    }

    pub fn estimator(&self) -> BankEstimator {
        self.estimator
    }

    /// Attribute-level direction by world attribute index, toward label 1.
    pub fn direction(&self, index: usize) -> &SemanticDirection {
        &self.directions[index]
    }

    pub fn directions(&self) -> &[SemanticDirection] {
        &self.directions
    }

    pub fn by_name(&self, world: &World, name: &str) -> Result<&SemanticDirection> {
        Ok(self.direction(world.attribute_index(name)?))
    }
}

/// The primal attribute's blended direction at z, projected orthogonal to
/// the blended direction of every condition attribute. Condition targets are
/// passed explicitly; their instance component points toward keeping that
/// label, making preservation directional rather than merely orthogonal.
pub fn conditional_direction(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    condition_targets: &[(String, bool)],
    z: &Vector,
    target_label: bool,
    factors: &ControlFactors,
) -> Result<SemanticDirection> {
    for (name, _) in condition_targets {
        if name == primal {
            return Err(Error::InvalidConfig(format!(
                "{primal:?} cannot condition on itself"
            )));
        }
    }
    let primal_direction = blended(world, bank, primal, z, target_label, factors.lambda1)?;
    if condition_targets.is_empty() {
        return Ok(primal_direction);
    }
    let conditions = condition_targets
        .iter()
        .map(|(name, keep)| blended(world, bank, name, z, *keep, factors.lambda2))
        .collect::<Result<Vec<_>>>()?;
    condition_project(&primal_direction, &conditions)
}

/// `conditional_direction` with each condition targeting its current
/// edit-classifier label at z, the label an edit starting here would try to
/// preserve.
pub fn instance_aware_conditional(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    conditions: &[String],
    z: &Vector,
    target_label: bool,
    factors: &ControlFactors,
) -> Result<SemanticDirection> {
    let x = world.observe(z)?;
    let targets = conditions
        .iter()
        .map(|name| -> Result<(String, bool)> {
            let idx = world.attribute_index(name)?;
            Ok((name.clone(), score_to_label(world.edit_score(idx, &x)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    conditional_direction(world, bank, primal, &targets, z, target_label, factors)
}

/// Blend of the banked attribute-level direction and the local gradient
/// direction, both oriented toward `target`. The endpoint weights skip the
/// component they do not use, so a fully attribute-level blend needs no
/// gradient evaluation at all.
fn blended(
    world: &World,
    bank: &DirectionBank,
    attribute: &str,
    z: &Vector,
    target: bool,
    lambda: f64,
) -> Result<SemanticDirection> {
    if lambda == 1.0 {
        let banked = bank.by_name(world, attribute)?.toward(target);
        return Ok(SemanticDirection::from_unit(
            banked.vector,
            attribute,
            DirectionKind::InstanceAware,
        ));
    }
    let inst = instance_specific(world, attribute, z, target)?;
    if lambda == 0.0 {
        return Ok(SemanticDirection::from_unit(
            inst.vector,
            attribute,
            DirectionKind::InstanceAware,
        ));
    }
    let banked = bank.by_name(world, attribute)?.toward(target);
    combine(&banked, &inst, lambda)
}
