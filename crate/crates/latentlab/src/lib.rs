//! Instance-aware semantic editing in synthetic latent worlds.
//!
//! This crate builds small, fully specified generator-plus-classifier worlds
//! whose ground truth is known exactly, then studies how to move a latent
//! point so that one attribute flips while the others stay put. The pieces:
//!
//! * [`world`] constructs a world: a latent prior, oracle labeling
//!   hyperplanes with controllable pairwise entanglement and sampling bias,
//!   a deterministic generator, and two independently trained classifier
//!   sets (one the editor consults, one that only judges).
//! * [`directions`] finds semantic directions: instance-specific gradients,
//!   attribute-level summaries, blends of the two, and projections that hold
//!   condition attributes fixed.
//! * [`editor`] walks the latent space along those directions, recomputing
//!   them as it goes or freezing the first.
//! * [`dtmetric`] scores strategies by transformation and disentanglement
//!   accuracy, summarizes curves by normalized area, and searches the blend
//!   factor grid.
//! * [`model`], [`train`], [`gradcheck`], [`linalg`], [`stats`] supply the
//!   numeric substrate: a tiny reverse-mode feed-forward stack with exact
//!   hand-checkable gradients.
//!
//! Everything is deterministic given the seeds in the configs; parallel runs
//! reduce in fixed order, so results are independent of thread count.

pub mod directions;
pub mod dtmetric;
pub mod editor;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod report;
pub mod seeding;
pub mod serialize;
pub mod stats;
#[cfg(test)]
pub(crate) mod testutil;
pub mod train;
pub mod world;

pub use directions::{
    attribute_level_avg, attribute_level_boundary, combine, condition_project,
    conditional_direction, instance_aware_conditional, instance_specific, BankEstimator,
    ControlFactors, DirectionBank, DirectionKind, SemanticDirection,
};
pub use dtmetric::{
    auc, compare_attribute_estimators, evaluate_dt, evaluate_dt_oracle, grid_search, q_at_p,
    DtCurve, DtJudge, DtParams, DtPoint, EstimatorComparison, GridCell, GridReport, PairAuc,
};
pub use editor::{edit, EditConfig, EditTrajectory, TrajectoryPoint};
pub use error::{Error, Result};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use linalg::{Matrix, Vector};
pub use model::{Activation, DiffModel, Layer};
pub use train::{score_to_label, train_classifier, ClassifierArch, TrainConfig, TrainedClassifier};
pub use world::{
    build_world, AttributeConfig, BiasTarget, ClassifierConfig, GeneratorKind, PairAngle, World,
    WorldConfig,
};
