//! Synthetic worlds with exact ground truth.
//!
//! A world fixes a latent prior, per-attribute oracle hyperplanes, a seeded
//! generator from latent to observation space, and two independently trained
//! classifier sets per attribute: the edit set drives direction search, the
//! eval set scores outcomes. Ground truth stays available through the oracle,
//! so estimator error is always measurable.
//!
//! Worlds are constructed, not trained: the generator never sees data, and
//! everything is a pure function of the config. Building the same config twice
//! yields bit-identical worlds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, random_orthogonal, symmetric_eigen, Matrix, Vector};
use crate::model::{Activation, DiffModel, Layer};
use crate::seeding::subseed;
use crate::stats::{bivariate_upper_orthant, normal_cdf};
use crate::train::{score_to_label, train_classifier, ClassifierArch, TrainConfig};

/// Attribute names used by the default worlds.
pub const DEFAULT_ATTRIBUTES: [&str; 4] = ["expression", "age", "gender", "eyeglasses"];

/// Default pairwise angle between oracle directions, degrees.
const DEFAULT_ANGLE_DEGREES: f64 = 90.0;

/// Width of the tanh branch of nonlinear generators, relative to latent_dim.
const BRANCH_WIDTH_FACTOR: usize = 2;

/// Scale of the tanh-branch output weights. Chosen so the branch bends the
/// map noticeably while staying mild enough that a linear read of any single
/// decision boundary is still a good first-order approximation.
const BRANCH_GAIN: f64 = 1.0;

/// Condition number of the linear generator's singular spectrum.
const GENERATOR_CONDITION: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConfig {
    pub name: String,
    #[serde(default)]
    pub oracle_bias: f64,
}

impl AttributeConfig {
    pub fn named(name: &str) -> Self {
        AttributeConfig {
            name: name.to_string(),
            oracle_bias: 0.0,
        }
    }
}

/// Requested angle between two oracle directions, in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairAngle {
    pub a: String,
    pub b: String,
    pub degrees: f64,
}

/// Target conditional probability P(biased = 1 | given = 1) for the sampled
/// training corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasTarget {
    pub given: String,
    pub biased: String,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// `x = M z` with a well-conditioned seeded M.
    Linear,
    /// `x = M z + 0.5 * B tanh(A z)`: the same linear term plus a bounded
    /// smooth branch that bends classifier boundaries in observation space.
    Nonlinear,
}

/// Hyperparameters for the world's classifier sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Corpus size for the edit classifiers.
    #[serde(default = "default_train_samples")]
    pub train_samples: usize,
    /// Corpus size for the eval classifiers. Larger by default: they are the
    /// measurement instrument.
    #[serde(default = "default_eval_train_samples")]
    pub eval_train_samples: usize,
    /// Hidden widths of edit classifiers; empty means logistic regression.
    #[serde(default)]
    pub edit_hidden: Vec<usize>,
    /// Hidden widths of eval classifiers.
    #[serde(default)]
    pub eval_hidden: Vec<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
    /// L2 penalty on classifier weights. Oracle labels are cleanly separable,
    /// so unregularized descent would grow the weights without bound and pile
    /// them onto whatever low-variance directions help the margin; a mild
    /// ridge keeps the fitted boundary representative of the bulk of the data.
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Minimum held-out accuracy every classifier must reach.
    #[serde(default = "default_accuracy_floor")]
    pub accuracy_floor: f64,
}

fn default_train_samples() -> usize {
    2500
}
fn default_eval_train_samples() -> usize {
    4000
}
fn default_learning_rate() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    500
}
fn default_holdout_fraction() -> f64 {
    0.2
}
fn default_weight_decay() -> f64 {
    1e-3
}
fn default_accuracy_floor() -> f64 {
    0.95
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            train_samples: default_train_samples(),
            eval_train_samples: default_eval_train_samples(),
            edit_hidden: vec![16],
            eval_hidden: vec![24],
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            holdout_fraction: default_holdout_fraction(),
            weight_decay: default_weight_decay(),
            accuracy_floor: default_accuracy_floor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_obs_dim")]
    pub obs_dim: usize,
    pub attributes: Vec<AttributeConfig>,
    /// Pairwise angles between oracle directions; unlisted pairs are 90°.
    #[serde(default)]
    pub entanglement_angles: Vec<PairAngle>,
    /// Conditional-probability targets imposed on classifier training corpora
    /// by rejection sampling. The prior itself stays unbiased.
    #[serde(default)]
    pub sampling_bias: Vec<BiasTarget>,
    pub generator: GeneratorKind,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

fn default_latent_dim() -> usize {
    16
}
fn default_obs_dim() -> usize {
    48
}

impl WorldConfig {
    /// The default experiment world: four attributes, age and eyeglasses at
    /// 45° with a strong sampled correlation, nonlinear generator. Edit
    /// classifiers get a hidden layer so their gradients bend with the
    /// observation — the regime where per-instance directions carry
    /// information a fixed attribute direction cannot.
    pub fn biased_nonlinear(seed: u64) -> Self {
        WorldConfig {
            latent_dim: default_latent_dim(),
            obs_dim: default_obs_dim(),
            attributes: DEFAULT_ATTRIBUTES
                .iter()
                .map(|n| AttributeConfig::named(n))
                .collect(),
            entanglement_angles: vec![PairAngle {
                a: "age".into(),
                b: "eyeglasses".into(),
                degrees: 45.0,
            }],
            sampling_bias: vec![BiasTarget {
                given: "age".into(),
                biased: "eyeglasses".into(),
                probability: 0.9,
            }],
            generator: GeneratorKind::Nonlinear,
            classifier: ClassifierConfig {
                train_samples: 3000,
                edit_hidden: vec![10],
                learning_rate: 0.7,
                epochs: 800,
                // Lighter ridge than the estimator worlds: these classifiers
                // are supposed to bend, that is what makes stale directions
                // and attribute-level conditions pay for their rigidity.
                weight_decay: 3e-4,
                ..ClassifierConfig::default()
            },
            seed,
        }
    }

    /// Fully disentangled control world: orthogonal oracles, no sampling
    /// bias, linear generator, logistic classifiers.
    pub fn unbiased_linear(seed: u64) -> Self {
        WorldConfig {
            latent_dim: default_latent_dim(),
            obs_dim: default_obs_dim(),
            attributes: DEFAULT_ATTRIBUTES
                .iter()
                .map(|n| AttributeConfig::named(n))
                .collect(),
            entanglement_angles: Vec::new(),
            sampling_bias: Vec::new(),
            generator: GeneratorKind::Linear,
            classifier: ClassifierConfig {
                train_samples: 4000,
                eval_train_samples: 6000,
                edit_hidden: Vec::new(),
                eval_hidden: Vec::new(),
                learning_rate: 2.0,
                epochs: 600,
                ..ClassifierConfig::default()
            },
            seed,
        }
    }

    /// Nonlinear generator with orthogonal oracles and no sampling bias.
    /// Edit classifiers are plain logistic probes, so every bend an editor
    /// has to cope with comes from the generator alone.
    pub fn unbiased_nonlinear(seed: u64) -> Self {
        WorldConfig {
            entanglement_angles: Vec::new(),
            sampling_bias: Vec::new(),
            classifier: ClassifierConfig {
                edit_hidden: Vec::new(),
                ..ClassifierConfig::default()
            },
            ..WorldConfig::biased_nonlinear(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.obs_dim == 0 {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if self.obs_dim < self.latent_dim {
            return Err(Error::InvalidConfig(format!(
                "obs_dim {} below latent_dim {}",
                self.obs_dim, self.latent_dim
            )));
        }
        if self.attributes.is_empty() {
            return Err(Error::InvalidConfig("at least one attribute required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for attr in &self.attributes {
            if attr.name.is_empty() {
                return Err(Error::InvalidConfig("attribute name is empty".into()));
            }
            if !attr.oracle_bias.is_finite() {
                return Err(Error::InvalidConfig("oracle bias must be finite".into()));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate attribute {:?}",
                    attr.name
                )));
            }
        }
        let index_of = |name: &str| -> Result<usize> {
            self.attributes
                .iter()
                .position(|a| a.name == name)
                .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
        };
        let mut pairs = std::collections::BTreeSet::new();
        for angle in &self.entanglement_angles {
            let i = index_of(&angle.a)?;
            let j = index_of(&angle.b)?;
            if i == j {
                return Err(Error::InvalidConfig(format!(
                    "angle listed for {:?} against itself",
                    angle.a
                )));
            }
            if !(0.0..=180.0).contains(&angle.degrees) {
                return Err(Error::InvalidConfig(format!(
                    "angle {} outside [0, 180]",
                    angle.degrees
                )));
            }
            if !pairs.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidConfig(format!(
                    "angle for pair ({}, {}) listed twice",
                    angle.a, angle.b
                )));
            }
        }
        for bias in &self.sampling_bias {
            let i = index_of(&bias.given)?;
            let j = index_of(&bias.biased)?;
            if i == j {
                return Err(Error::InvalidConfig(format!(
                    "bias pairs {:?} with itself",
                    bias.given
                )));
            }
            if !(bias.probability > 0.0 && bias.probability < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "bias target {} outside (0, 1)",
                    bias.probability
                )));
            }
        }
        if self.classifier.train_samples < 10 || self.classifier.eval_train_samples < 10 {
            return Err(Error::InvalidConfig("corpus sizes must be at least 10".into()));
        }
        if !(self.classifier.accuracy_floor > 0.0 && self.classifier.accuracy_floor <= 1.0) {
            return Err(Error::InvalidConfig("accuracy floor outside (0, 1]".into()));
        }
        Ok(())
    }

    /// Requested cosine between two attribute directions.
    fn requested_cosine(&self, i: usize, j: usize) -> f64 {
        for angle in &self.entanglement_angles {
            let ai = self.attributes.iter().position(|a| a.name == angle.a);
            let aj = self.attributes.iter().position(|a| a.name == angle.b);
            if (ai == Some(i) && aj == Some(j)) || (ai == Some(j) && aj == Some(i)) {
                return angle.degrees.to_radians().cos();
            }
        }
        DEFAULT_ANGLE_DEGREES.to_radians().cos()
    }
}

/// An attribute with its resolved ground-truth hyperplane: label is 1 exactly
/// when `direction . z + bias > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    pub oracle_direction: Vector,
    pub oracle_bias: f64,
}

/// A latent draw with its observation and oracle labels, in attribute order.
#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub z: Vector,
    pub x: Vector,
    pub labels: Vec<bool>,
}

/// Held-out accuracy of both classifiers for one attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeAccuracy {
    pub attribute: String,
    pub edit_holdout: f64,
    pub eval_holdout: f64,
}

#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    attributes: Vec<AttributeSpec>,
    generator: DiffModel,
    edit_classifiers: Vec<DiffModel>,
    eval_classifiers: Vec<DiffModel>,
    accuracies: Vec<AttributeAccuracy>,
}

impl World {
    /// Assemble and validate a world from its parts. `build_world` goes
    /// through here, and so does deserialization.
    pub fn from_parts(
        config: WorldConfig,
        attributes: Vec<AttributeSpec>,
        generator: DiffModel,
        edit_classifiers: Vec<DiffModel>,
        eval_classifiers: Vec<DiffModel>,
        accuracies: Vec<AttributeAccuracy>,
    ) -> Result<World> {
        config.validate()?;
        let n = config.attributes.len();
        if attributes.len() != n
            || edit_classifiers.len() != n
            || eval_classifiers.len() != n
            || accuracies.len() != n
        {
            return Err(Error::InvalidConfig(
                "attribute, classifier, and accuracy lists must align".into(),
            ));
        }
        for (spec, cfg) in attributes.iter().zip(&config.attributes) {
            if spec.name != cfg.name {
                return Err(Error::InvalidConfig(format!(
                    "attribute order mismatch: {:?} vs {:?}",
                    spec.name, cfg.name
                )));
            }
            if spec.oracle_direction.len() != config.latent_dim {
                return Err(Error::DimensionMismatch {
                    context: "oracle direction",
                    expected: config.latent_dim,
                    actual: spec.oracle_direction.len(),
                });
            }
            if (spec.oracle_direction.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidConfig(format!(
                    "oracle direction for {:?} is not unit",
                    spec.name
                )));
            }
        }
        if generator.input_dim() != config.latent_dim || generator.output_dim() != config.obs_dim {
            return Err(Error::InvalidModel("generator dims do not match config".into()));
        }
        for model in edit_classifiers.iter().chain(&eval_classifiers) {
            if model.input_dim() != config.obs_dim || model.output_dim() != 1 {
                return Err(Error::InvalidModel("classifier dims do not match config".into()));
            }
            let last = model.layers().last().expect("nonempty model");
            if last.activation() != Activation::Sigmoid || model.skip().is_some() {
                return Err(Error::InvalidModel(
                    "classifiers must end in a plain sigmoid unit".into(),
                ));
            }
        }
        Ok(World {
            config,
            attributes,
            generator,
            edit_classifiers,
            eval_classifiers,
            accuracies,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.config.obs_dim
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn generator(&self) -> &DiffModel {
        &self.generator
    }

    pub fn edit_classifier(&self, index: usize) -> &DiffModel {
        &self.edit_classifiers[index]
    }

    pub fn eval_classifier(&self, index: usize) -> &DiffModel {
        &self.eval_classifiers[index]
    }

    pub fn accuracies(&self) -> &[AttributeAccuracy] {
        &self.accuracies
    }

    /// Ground-truth label: 1 exactly when `g . z + bias > 0`. A point on the
    /// boundary gets label 0.
    pub fn oracle_label(&self, index: usize, z: &Vector) -> bool {
        let spec = &self.attributes[index];
        spec.oracle_direction.dot(z) + spec.oracle_bias > 0.0
    }

    pub fn oracle_labels(&self, z: &Vector) -> Vec<bool> {
        (0..self.attributes.len())
            .map(|i| self.oracle_label(i, z))
            .collect()
    }

    /// One draw from the (always unbiased) latent prior.
    pub fn sample_latent<R: Rng>(&self, rng: &mut R) -> Vector {
        Vector::standard_normal(self.config.latent_dim, rng)
    }

    pub fn observe(&self, z: &Vector) -> Result<Vector> {
        self.generator.forward(z)
    }

    /// Edit-classifier score of an observation.
    pub fn edit_score(&self, index: usize, x: &Vector) -> Result<f64> {
        Ok(self.edit_classifiers[index].forward(x)?[0])
    }

    /// Eval-classifier score of an observation.
    pub fn eval_score(&self, index: usize, x: &Vector) -> Result<f64> {
        Ok(self.eval_classifiers[index].forward(x)?[0])
    }

    /// Draw labeled samples whose empirical conditionals match the configured
    /// bias targets, by per-cell rejection. With no bias configured every
    /// draw is accepted.
    ///
    /// Rejection factors are exact functions of the oracle geometry, computed
    /// from bivariate normal orthant probabilities. With several interacting
    /// bias pairs the factors compose multiplicatively, which meets each
    /// target exactly only when the pairs do not overlap.
    pub fn sample_biased(&self, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        let factors = self.bias_factors()?;
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "biased-sampling", 0));
        let budget = count.saturating_mul(200).saturating_add(10_000);
        let mut out = Vec::with_capacity(count);
        let mut draws = 0usize;
        while out.len() < count {
            draws += 1;
            if draws > budget {
                return Err(Error::BiasUnreachable(format!(
                    "rejection budget of {budget} draws exhausted after {} acceptances",
                    out.len()
                )));
            }
            let z = self.sample_latent(&mut rng);
            let labels = self.oracle_labels(&z);
            let mut keep_probability = 1.0;
            for f in &factors {
                keep_probability *= f.factor(&labels);
            }
            let keep = keep_probability >= 1.0 || rng.random::<f64>() < keep_probability;
            if keep {
                let x = self.observe(&z)?;
                out.push(LabeledSample { z, x, labels });
            }
        }
        Ok(out)
    }

    /// Resolve every configured bias target into per-cell acceptance factors.
    fn bias_factors(&self) -> Result<Vec<CellFactor>> {
        self.config
            .sampling_bias
            .iter()
            .map(|target| {
                let given = self.attribute_index(&target.given)?;
                let biased = self.attribute_index(&target.biased)?;
                let ga = &self.attributes[given];
                let gb = &self.attributes[biased];
                let rho = ga.oracle_direction.dot(&gb.oracle_direction).clamp(-1.0, 1.0);
                // Labels are threshold events of the standard normal pair
                // (g_a . z, g_b . z): label 1 iff the projection exceeds -bias.
                let p11 = bivariate_upper_orthant(-ga.oracle_bias, -gb.oracle_bias, rho);
                let p1 = 1.0 - normal_cdf(-ga.oracle_bias);
                let p10 = (p1 - p11).max(0.0);
                let t = target.probability;
                const MASS_FLOOR: f64 = 1e-9;
                if p1 < MASS_FLOOR {
                    return Err(Error::BiasUnreachable(format!(
                        "P({}=1) is {p1:.2e}; conditioning on it is meaningless",
                        target.given
                    )));
                }
                let native = p11 / p1;
                let (alpha, beta) = if (t - native).abs() < 1e-12 {
                    (1.0, 1.0)
                } else if t > native {
                    // Raise the conditional by thinning the (1,0) cell.
                    if p11 < MASS_FLOOR {
                        return Err(Error::BiasUnreachable(format!(
                            "P({}=1, {}=1) is {p11:.2e} under the oracle geometry; \
                             cannot raise the conditional to {t}",
                            target.given, target.biased
                        )));
                    }
                    (1.0, (p11 * (1.0 - t)) / (p10 * t))
                } else {
                    // Lower it by thinning the (1,1) cell.
                    if p10 < MASS_FLOOR {
                        return Err(Error::BiasUnreachable(format!(
                            "P({}=1, {}=0) is {p10:.2e} under the oracle geometry; \
                             cannot lower the conditional to {t}",
                            target.given, target.biased
                        )));
                    }
                    ((p10 * t) / (p11 * (1.0 - t)), 1.0)
                };
                Ok(CellFactor {
                    given,
                    biased,
                    alpha,
                    beta,
                })
            })
            .collect()
    }
}

/// Acceptance probabilities for the four label cells of one bias pair.
/// Cells with `given = 0` are always kept.
struct CellFactor {
    given: usize,
    biased: usize,
    alpha: f64,
    beta: f64,
}

impl CellFactor {
    fn factor(&self, labels: &[bool]) -> f64 {
        match (labels[self.given], labels[self.biased]) {
            (true, true) => self.alpha,
            (true, false) => self.beta,
            (false, _) => 1.0,
        }
    }
}

/// Construct a world from its config. Deterministic: the same config gives a
/// bit-identical world.
pub fn build_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let attributes = resolve_oracle_directions(config)?;
    let generator = build_generator(config)?;
    // Classifier corpora need a world to sample from; assemble a provisional
    // one with placeholder classifiers, then train the real ones against it.
    let placeholder = trivial_classifier(config.obs_dim);
    let n = config.attributes.len();
    let shell = World {
        config: config.clone(),
        attributes: attributes.clone(),
        generator: generator.clone(),
        edit_classifiers: vec![placeholder.clone(); n],
        eval_classifiers: vec![placeholder; n],
        accuracies: Vec::new(),
    };
    let edit_corpus = shell.sample_biased(
        config.classifier.train_samples,
        subseed(config.seed, "edit-corpus", 0),
    )?;
    let eval_corpus = shell.sample_biased(
        config.classifier.eval_train_samples,
        subseed(config.seed, "eval-corpus", 0),
    )?;

    let train_set = |corpus: &[LabeledSample], attr: usize| -> Vec<(Vector, bool)> {
        corpus
            .iter()
            .map(|s| (s.x.clone(), s.labels[attr]))
            .collect()
    };
    let classifier_pair = |attr: usize| -> Result<(crate::train::TrainedClassifier, crate::train::TrainedClassifier)> {
        let arch = |hidden: &[usize]| {
            if hidden.is_empty() {
                ClassifierArch::linear(config.obs_dim)
            } else {
                ClassifierArch::tanh(config.obs_dim, hidden.to_vec())
            }
        };
        let base = TrainConfig {
            learning_rate: config.classifier.learning_rate,
            epochs: config.classifier.epochs,
            holdout_fraction: config.classifier.holdout_fraction,
            weight_decay: config.classifier.weight_decay,
            seed: 0,
        };
        let edit = train_classifier(
            &train_set(&edit_corpus, attr),
            &arch(&config.classifier.edit_hidden),
            &TrainConfig {
                seed: subseed(config.seed, "edit-train", attr as u64),
                ..base.clone()
            },
        )?;
        let eval = train_classifier(
            &train_set(&eval_corpus, attr),
            &arch(&config.classifier.eval_hidden),
            &TrainConfig {
                seed: subseed(config.seed, "eval-train", attr as u64),
                ..base
            },
        )?;
        Ok((edit, eval))
    };
    let trained: Vec<_> = (0..n)
        .into_par_iter()
        .map(classifier_pair)
        .collect::<Result<_>>()?;

    let mut edit_classifiers = Vec::with_capacity(n);
    let mut eval_classifiers = Vec::with_capacity(n);
    let mut accuracies = Vec::with_capacity(n);
    for (attr, (edit, eval)) in trained.into_iter().enumerate() {
        let name = &config.attributes[attr].name;
        let floor = config.classifier.accuracy_floor;
        if edit.holdout_accuracy < floor {
            return Err(Error::ClassifierTrainingFailed {
                attribute: name.clone(),
                role: "edit",
                accuracy: edit.holdout_accuracy,
                floor,
            });
        }
        if eval.holdout_accuracy < floor {
            return Err(Error::ClassifierTrainingFailed {
                attribute: name.clone(),
                role: "eval",
                accuracy: eval.holdout_accuracy,
                floor,
            });
        }
        accuracies.push(AttributeAccuracy {
            attribute: name.clone(),
            edit_holdout: edit.holdout_accuracy,
            eval_holdout: eval.holdout_accuracy,
        });
        edit_classifiers.push(edit.model);
        eval_classifiers.push(eval.model);
    }

    World::from_parts(
        config.clone(),
        attributes,
        generator,
        edit_classifiers,
        eval_classifiers,
        accuracies,
    )
}

/// Embed unit directions realizing the requested pairwise angles, then spread
/// them across coordinates with a seeded rotation.
fn resolve_oracle_directions(config: &WorldConfig) -> Result<Vec<AttributeSpec>> {
    let n = config.attributes.len();
    let gram = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            config.requested_cosine(i, j)
        }
    });
    let (values, vectors) = symmetric_eigen(&gram)?;
    // The Gram matrix must be PSD with rank at most latent_dim to embed.
    if let Some(worst) = values.iter().copied().reduce(f64::min) {
        if worst < -1e-9 {
            return Err(Error::InfeasibleAngles(format!(
                "requested angles give a non-positive-semidefinite Gram matrix \
                 (eigenvalue {worst:.3e})"
            )));
        }
    }
    let rank = values.iter().filter(|v| **v > 1e-12).count();
    if rank > config.latent_dim {
        return Err(Error::InfeasibleAngles(format!(
            "angles need {rank} independent dimensions, latent space has {}",
            config.latent_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(config.seed, "oracle-rotation", 0));
    let rotation = random_orthogonal(config.latent_dim, &mut rng)?;
    config
        .attributes
        .iter()
        .enumerate()
        .map(|(i, attr)| {
            // Row i of V sqrt(Lambda), padded to latent_dim and rotated.
            let embedded = Vector::new(
                (0..config.latent_dim)
                    .map(|d| {
                        if d < rank {
                            vectors.get(i, d) * values[d].max(0.0).sqrt()
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )?;
            let rotated = rotation.matvec(&embedded);
            let unit = rotated
                .normalized()
                .map_err(|n| Error::InfeasibleAngles(format!(
                    "direction for {:?} collapsed to norm {n:.3e}",
                    attr.name
                )))?;
            Ok(AttributeSpec {
                name: attr.name.clone(),
                oracle_direction: unit,
                oracle_bias: attr.oracle_bias,
            })
        })
        .collect()
}

/// Seeded, well-conditioned linear map built from orthonormal factors and a
/// fixed singular spectrum.
fn seeded_linear_map(config: &WorldConfig, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let (rows, cols) = (config.obs_dim, config.latent_dim);
    let u = orthonormal_columns(rows, cols, rng)?;
    let v = random_orthogonal(cols, rng)?;
    let spectrum: Vec<f64> = (0..cols)
        .map(|k| {
            if cols == 1 {
                1.0
            } else {
                1.0 + (GENERATOR_CONDITION - 1.0) * k as f64 / (cols - 1) as f64
            }
        })
        .collect();
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        (0..cols)
            .map(|k| u.get(i, k) * spectrum[k] * v.get(j, k))
            .sum()
    }))
}

fn build_generator(config: &WorldConfig) -> Result<DiffModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(config.seed, "generator", 0));
    let m = seeded_linear_map(config, &mut rng)?;
    match config.generator {
        GeneratorKind::Linear => {
            let layer = Layer::new(m, Vector::zeros(config.obs_dim), Activation::Identity)?;
            DiffModel::new(vec![layer])
        }
        GeneratorKind::Nonlinear => {
            let width = BRANCH_WIDTH_FACTOR * config.latent_dim;
            let in_scale = 1.0 / (config.latent_dim as f64).sqrt();
            let a = Matrix::from_fn(width, config.latent_dim, |_, _| {
                let g: f64 = rng.sample(StandardNormal);
                g * in_scale
            });
            // The 0.5 branch weight is folded into the output layer.
            let out_scale = 0.5 * BRANCH_GAIN / (width as f64).sqrt();
            let b = Matrix::from_fn(config.obs_dim, width, |_, _| {
                let g: f64 = rng.sample(StandardNormal);
                g * out_scale
            });
            let hidden = Layer::new(a, Vector::zeros(width), Activation::Tanh)?;
            let output = Layer::new(b, Vector::zeros(config.obs_dim), Activation::Identity)?;
            DiffModel::with_skip(vec![hidden, output], m)
        }
    }
}

/// Constant-0.5 classifier used only while sampling the training corpora.
fn trivial_classifier(obs_dim: usize) -> DiffModel {
    let layer = Layer::new(
        Matrix::zeros(1, obs_dim),
        Vector::zeros(1),
        Activation::Sigmoid,
    )
    .expect("trivial classifier");
    DiffModel::new(vec![layer]).expect("trivial classifier")
}

/// Predicted label of a classifier score.
pub fn label_of_score(score: f64) -> bool {
    score_to_label(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small linear world that trains in well under a second.
    fn mini_linear(seed: u64) -> WorldConfig {
        WorldConfig {
            latent_dim: 6,
            obs_dim: 12,
            attributes: vec![
                AttributeConfig::named("a"),
                AttributeConfig::named("b"),
                AttributeConfig::named("c"),
            ],
            entanglement_angles: Vec::new(),
            sampling_bias: Vec::new(),
            generator: GeneratorKind::Linear,
            classifier: ClassifierConfig {
                train_samples: 500,
                eval_train_samples: 500,
                edit_hidden: Vec::new(),
                eval_hidden: Vec::new(),
                learning_rate: 2.0,
                epochs: 250,
                holdout_fraction: 0.2,
                weight_decay: 1e-3,
                accuracy_floor: 0.9,
            },
            seed,
        }
    }

    #[test]
    fn default_angles_make_orthogonal_oracles() {
        let world = build_world(&mini_linear(1)).unwrap();
        let specs = world.attributes();
        for i in 0..specs.len() {
            for j in (i + 1)..specs.len() {
                let dot = specs[i].oracle_direction.dot(&specs[j].oracle_direction);
                assert!(
                    dot.abs() < 1e-10,
                    "oracles {i} and {j} have dot {dot:e}, expected orthogonal"
                );
            }
        }
    }

    #[test]
    fn requested_angle_is_realized() {
        let mut config = mini_linear(2);
        config.entanglement_angles = vec![PairAngle {
            a: "a".into(),
            b: "b".into(),
            degrees: 45.0,
        }];
        let world = build_world(&config).unwrap();
        let dot = world.attributes()[0]
            .oracle_direction
            .dot(&world.attributes()[1].oracle_direction);
        let want = 45f64.to_radians().cos();
        assert!(
            (dot - want).abs() < 1e-10,
            "dot {dot} should equal cos 45 deg = {want}"
        );
        // The unlisted pairs stay orthogonal.
        let dot_ac = world.attributes()[0]
            .oracle_direction
            .dot(&world.attributes()[2].oracle_direction);
        assert!(dot_ac.abs() < 1e-10, "pair (a, c) drifted to {dot_ac:e}");
    }

    #[test]
    fn three_attributes_at_120_degrees_fit_in_two_dimensions() {
        let mut config = mini_linear(3);
        config.latent_dim = 2;
        config.obs_dim = 4;
        config.entanglement_angles = vec![
            PairAngle { a: "a".into(), b: "b".into(), degrees: 120.0 },
            PairAngle { a: "a".into(), b: "c".into(), degrees: 120.0 },
            PairAngle { a: "b".into(), b: "c".into(), degrees: 120.0 },
        ];
        let world = build_world(&config).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let dot = world.attributes()[i]
                .oracle_direction
                .dot(&world.attributes()[j].oracle_direction);
            assert!(
                (dot + 0.5).abs() < 1e-9,
                "pair ({i}, {j}) has dot {dot}, expected -0.5"
            );
        }
    }

    #[test]
    fn infeasible_angles_are_rejected() {
        let mut config = mini_linear(4);
        config.latent_dim = 2;
        config.obs_dim = 4;
        // Three directions pairwise at 30 degrees need three dimensions.
        config.entanglement_angles = vec![
            PairAngle { a: "a".into(), b: "b".into(), degrees: 30.0 },
            PairAngle { a: "a".into(), b: "c".into(), degrees: 30.0 },
            PairAngle { a: "b".into(), b: "c".into(), degrees: 30.0 },
        ];
        let err = build_world(&config).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAngles(_)), "got {err:?}");
    }

    #[test]
    fn boundary_points_get_label_zero() {
        let world = build_world(&mini_linear(5)).unwrap();
        let origin = Vector::zeros(world.latent_dim());
        // Bias is zero, so the origin lies exactly on every hyperplane.
        assert!(
            world.oracle_labels(&origin).iter().all(|l| !l),
            "ties must resolve to label 0"
        );
    }

    #[test]
    fn sampling_bias_hits_the_requested_conditional() {
        let mut config = mini_linear(6);
        config.entanglement_angles = vec![PairAngle {
            a: "a".into(),
            b: "b".into(),
            degrees: 45.0,
        }];
        config.sampling_bias = vec![BiasTarget {
            given: "a".into(),
            biased: "b".into(),
            probability: 0.9,
        }];
        let world = build_world(&config).unwrap();
        let corpus = world.sample_biased(5000, 77).unwrap();
        let given: Vec<_> = corpus.iter().filter(|s| s.labels[0]).collect();
        let both = given.iter().filter(|s| s.labels[1]).count();
        let conditional = both as f64 / given.len() as f64;
        assert!(
            (conditional - 0.9).abs() < 0.02,
            "empirical P(b=1 | a=1) = {conditional}, target 0.9"
        );
    }

    #[test]
    fn unbiased_sampling_keeps_the_native_conditional() {
        let world = build_world(&mini_linear(7)).unwrap();
        let corpus = world.sample_biased(4000, 8).unwrap();
        let given: Vec<_> = corpus.iter().filter(|s| s.labels[0]).collect();
        let both = given.iter().filter(|s| s.labels[1]).count();
        let conditional = both as f64 / given.len() as f64;
        // Orthogonal oracles with zero bias: P(b=1 | a=1) = P(b=1) = 0.5.
        assert!(
            (conditional - 0.5).abs() < 0.03,
            "unbiased conditional drifted to {conditional}"
        );
    }

    #[test]
    fn unreachable_bias_is_detected_before_sampling() {
        let mut config = mini_linear(9);
        // P(b=1) = Phi(-8) ~ 6e-16: no rejection scheme can raise the
        // conditional to 0.9.
        config.attributes[1].oracle_bias = -8.0;
        config.sampling_bias = vec![BiasTarget {
            given: "a".into(),
            biased: "b".into(),
            probability: 0.9,
        }];
        let err = build_world(&config).unwrap_err();
        assert!(matches!(err, Error::BiasUnreachable(_)), "got {err:?}");
    }

    #[test]
    fn classifiers_clear_the_accuracy_floor() {
        let config = mini_linear(10);
        let world = build_world(&config).unwrap();
        assert_eq!(world.accuracies().len(), 3);
        for acc in world.accuracies() {
            assert!(
                acc.edit_holdout >= config.classifier.accuracy_floor
                    && acc.eval_holdout >= config.classifier.accuracy_floor,
                "{:?} below floor: edit {}, eval {}",
                acc.attribute,
                acc.edit_holdout,
                acc.eval_holdout
            );
        }
    }

    #[test]
    fn nonlinear_world_builds_and_classifies() {
        let mut config = mini_linear(11);
        config.generator = GeneratorKind::Nonlinear;
        config.classifier.edit_hidden = vec![8];
        config.classifier.eval_hidden = vec![8];
        config.classifier.train_samples = 700;
        config.classifier.eval_train_samples = 700;
        config.classifier.epochs = 300;
        let world = build_world(&config).unwrap();
        // The generator must actually bend: x - Mz is the tanh branch, and
        // with a skip matrix present the model output differs from linear.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = world.sample_latent(&mut rng);
        let x = world.observe(&z).unwrap();
        let skip = world.generator().skip().expect("nonlinear generator has a skip");
        let linear_part = skip.matvec(&z);
        let branch = x.sub(&linear_part);
        assert!(
            branch.norm() > 0.05,
            "tanh branch contributes {} in norm; generator is secretly linear",
            branch.norm()
        );
    }

    #[test]
    fn world_build_is_deterministic() {
        let a = build_world(&mini_linear(12)).unwrap();
        let b = build_world(&mini_linear(12)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let z = a.sample_latent(&mut rng);
        let xa = a.observe(&z).unwrap();
        let xb = b.observe(&z).unwrap();
        for (u, v) in xa.iter().zip(xb.iter()) {
            assert_eq!(u.to_bits(), v.to_bits(), "generators differ");
        }
        let sa = a.edit_score(0, &xa).unwrap();
        let sb = b.edit_score(0, &xb).unwrap();
        assert_eq!(sa.to_bits(), sb.to_bits(), "classifiers differ");
    }

    #[test]
    fn validation_rejects_malformed_configs() {
        let mut dup = mini_linear(0);
        dup.attributes.push(AttributeConfig::named("a"));
        assert!(matches!(dup.validate(), Err(Error::InvalidConfig(_))));

        let mut unknown = mini_linear(0);
        unknown.entanglement_angles = vec![PairAngle {
            a: "a".into(),
            b: "ghost".into(),
            degrees: 45.0,
        }];
        assert!(matches!(unknown.validate(), Err(Error::UnknownAttribute(_))));

        let mut self_pair = mini_linear(0);
        self_pair.entanglement_angles = vec![PairAngle {
            a: "a".into(),
            b: "a".into(),
            degrees: 45.0,
        }];
        assert!(matches!(self_pair.validate(), Err(Error::InvalidConfig(_))));

        let mut certain = mini_linear(0);
        certain.sampling_bias = vec![BiasTarget {
            given: "a".into(),
            biased: "b".into(),
            probability: 1.0,
        }];
        assert!(matches!(certain.validate(), Err(Error::InvalidConfig(_))));

        let mut squeezed = mini_linear(0);
        squeezed.obs_dim = 3;
        assert!(matches!(squeezed.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_json_fills_defaults_and_rejects_unknown_keys() {
        let parsed: WorldConfig = serde_json::from_str(
            r#"{"attributes": [{"name": "a"}, {"name": "b"}], "generator": "linear", "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(parsed.latent_dim, 16);
        assert_eq!(parsed.obs_dim, 48);
        assert_eq!(parsed.classifier.train_samples, 2500);
        assert_eq!(parsed.attributes[0].oracle_bias, 0.0);

        let err = serde_json::from_str::<WorldConfig>(
            r#"{"attributes": [{"name": "a"}], "generator": "linear", "seed": 3, "extra": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("extra"), "got {err}");
    }
}
