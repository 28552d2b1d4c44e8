//! Latent-space editing by repeated small steps along semantic directions.
//!
//! An edit starts from a latent point, reads the edit classifiers once to fix
//! the target label (the opposite of the starting label unless overridden)
//! and the labels every condition attribute should keep, then walks
//! `max_steps` steps of length `step_size`. In incremental mode the
//! conditional direction is recomputed at every intermediate point, so the
//! search tracks the local geometry; in fixed mode the direction found at the
//! start is reused and step n lands at `z0 + n * k * d`.
//!
//! The returned trajectory records, at every visited point, the scores of all
//! edit and eval classifiers and the oracle labels, which is everything the
//! downstream metrics need. If a direction cannot be computed mid-walk the
//! edit fails with the completed prefix attached.

use serde::Serialize;

use crate::directions::{conditional_direction, ControlFactors, DirectionBank, SemanticDirection};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::train::score_to_label;
use crate::world::World;

/// One edit request: which attribute to flip, which to hold, and how.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EditConfig {
    /// Attribute being edited.
    pub primal: String,
    /// Attributes whose starting labels the edit must preserve.
    pub conditions: Vec<String>,
    /// Blend weights for the primal and condition directions.
    pub factors: ControlFactors,
    /// Step length in latent space.
    pub step_size: f64,
    /// Number of steps to take; the trajectory has one more point.
    pub max_steps: usize,
    /// Recompute the direction at every step instead of reusing the first.
    pub incremental: bool,
    /// Explicit target label for the primal attribute; `None` flips the
    /// label the edit classifier reads at the start.
    pub target_label: Option<bool>,
}

impl EditConfig {
    /// An incremental edit of `primal` with the standard step schedule.
    pub fn new(primal: &str) -> Self {
        EditConfig {
            primal: primal.to_string(),
            conditions: Vec::new(),
            factors: ControlFactors::default(),
            step_size: 0.1,
            max_steps: 20,
            incremental: true,
            target_label: None,
        }
    }

    pub fn with_conditions(mut self, conditions: &[&str]) -> Self {
        self.conditions = conditions.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn with_factors(mut self, factors: ControlFactors) -> Self {
        self.factors = factors;
        self
    }

    pub fn validate(&self, world: &World) -> Result<()> {
        world.attribute_index(&self.primal)?;
        for (i, name) in self.conditions.iter().enumerate() {
            world.attribute_index(name)?;
            if name == &self.primal {
                return Err(Error::InvalidConfig(format!(
                    "{name:?} cannot condition on itself"
                )));
            }
            if self.conditions[..i].contains(name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate condition {name:?}"
                )));
            }
        }
        ControlFactors::new(self.factors.lambda1, self.factors.lambda2)?;
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size {} must be positive and finite",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "an edit needs at least one step".to_string(),
            ));
        }
        Ok(())
    }
}

/// Snapshot of one visited latent point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    /// Steps taken to reach this point; 0 is the start.
    pub step: usize,
    pub z: Vector,
    /// Edit-classifier scores for every world attribute, in attribute order.
    pub edit_scores: Vec<f64>,
    /// Eval-classifier scores for every world attribute, in attribute order.
    pub eval_scores: Vec<f64>,
    /// Ground-truth labels at this point.
    pub oracle_labels: Vec<bool>,
}

/// A completed edit: the request, the resolved targets, and every point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EditTrajectory {
    pub attribute: String,
    /// Label the edit drives the primal attribute toward.
    pub target_label: bool,
    /// Condition attributes with the starting labels they preserve.
    pub condition_targets: Vec<(String, bool)>,
    pub factors: ControlFactors,
    pub step_size: f64,
    pub incremental: bool,
    /// `max_steps + 1` points, from the start to the final state.
    pub points: Vec<TrajectoryPoint>,
}

impl EditTrajectory {
    pub fn start(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn end(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory holds the start point")
    }

    /// Steps actually taken; one less than the number of points.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// The point after `step` steps, reusing the final point when the
    /// trajectory ended earlier (an edit that stopped stays where it was).
    pub fn point_at(&self, step: usize) -> &TrajectoryPoint {
        &self.points[step.min(self.points.len() - 1)]
    }
}

/// Walk the latent space from `z0` per `config`, consulting the bank for
/// attribute-level components. Fails with `EditAborted` carrying the
/// completed prefix when a direction cannot be computed mid-walk.
pub fn edit(
    world: &World,
    bank: &DirectionBank,
    z0: &Vector,
    config: &EditConfig,
) -> Result<EditTrajectory> {
    config.validate(world)?;
    if z0.len() != world.latent_dim() {
        return Err(Error::DimensionMismatch {
            context: "edit start point",
            expected: world.latent_dim(),
            actual: z0.len(),
        });
    }
    let primal_idx = world.attribute_index(&config.primal)?;
    let x0 = world.observe(z0)?;
    let initial = score_to_label(world.edit_score(primal_idx, &x0)?);
    let target = config.target_label.unwrap_or(!initial);
    let condition_targets = config
        .conditions
        .iter()
        .map(|name| -> Result<(String, bool)> {
            let idx = world.attribute_index(name)?;
            Ok((name.clone(), score_to_label(world.edit_score(idx, &x0)?)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trajectory = EditTrajectory {
        attribute: config.primal.clone(),
        target_label: target,
        condition_targets,
        factors: config.factors,
        step_size: config.step_size,
        incremental: config.incremental,
        points: vec![snapshot(world, 0, z0.clone())?],
    };

    let direction_at = |z: &Vector, trajectory: &EditTrajectory, step: usize| {
        conditional_direction(
            world,
            bank,
            &config.primal,
            &trajectory.condition_targets,
            z,
            target,
            &config.factors,
        )
        .map_err(|source| abort(trajectory, step, source))
    };

    if config.incremental {
        let mut z = z0.clone();
        for step in 1..=config.max_steps {
            let direction = direction_at(&z, &trajectory, step)?;
            z = z.add_scaled(config.step_size, direction.vector());
            let point =
                snapshot(world, step, z.clone()).map_err(|e| abort(&trajectory, step, e))?;
            trajectory.points.push(point);
        }
    } else {
        let direction: SemanticDirection = direction_at(z0, &trajectory, 1)?;
        for step in 1..=config.max_steps {
            // Straight from the start, so a prefix of a longer fixed edit is
            // bitwise the shorter fixed edit.
            let z = z0.add_scaled(step as f64 * config.step_size, direction.vector());
            let point = snapshot(world, step, z).map_err(|e| abort(&trajectory, step, e))?;
            trajectory.points.push(point);
        }
    }
    Ok(trajectory)
}

fn abort(trajectory: &EditTrajectory, failed_step: usize, source: Error) -> Error {
    Error::EditAborted {
        failed_step,
        prefix: Box::new(trajectory.clone()),
        source: Box::new(source),
    }
}

fn snapshot(world: &World, step: usize, z: Vector) -> Result<TrajectoryPoint> {
    let x = world.observe(&z)?;
    let count = world.attributes().len();
    let edit_scores = (0..count)
        .map(|i| world.edit_score(i, &x))
        .collect::<Result<Vec<_>>>()?;
    let eval_scores = (0..count)
        .map(|i| world.eval_score(i, &x))
        .collect::<Result<Vec<_>>>()?;
    let oracle_labels = world.oracle_labels(&z);
    Ok(TrajectoryPoint {
        step,
        z,
        edit_scores,
        eval_scores,
        oracle_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::directions::DirectionBank;
    use crate::testutil::{mini_world, twin_classifier_world};
    use crate::world::GeneratorKind;

    #[test]
    fn trajectory_has_the_documented_shape() {
        let world = mini_world(GeneratorKind::Linear, 21);
        let bank = DirectionBank::averaging(&world, 100, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z0 = world.sample_latent(&mut rng);
        let config = EditConfig::new("a").with_conditions(&["b", "c"]);
        let t = edit(&world, &bank, &z0, &config).unwrap();

        assert_eq!(t.points.len(), config.max_steps + 1);
        for (i, point) in t.points.iter().enumerate() {
            assert_eq!(point.step, i);
            assert_eq!(point.edit_scores.len(), 3);
            assert_eq!(point.eval_scores.len(), 3);
            assert_eq!(point.oracle_labels.len(), 3);
        }
        let initial = score_to_label(t.start().edit_scores[0]);
        assert_eq!(t.target_label, !initial, "default target flips the start label");
        assert_eq!(t.condition_targets.len(), 2);
        for (name, keep) in &t.condition_targets {
            let idx = world.attribute_index(name).unwrap();
            assert_eq!(
                *keep,
                score_to_label(t.start().edit_scores[idx]),
                "condition {name} must preserve its starting label"
            );
        }
        assert_eq!(t.steps(), config.max_steps);
        assert_eq!(t.point_at(999).step, config.max_steps, "point_at clamps");
    }

    #[test]
    fn fixed_mode_walks_a_straight_line() {
        let world = mini_world(GeneratorKind::Nonlinear, 22);
        let bank = DirectionBank::averaging(&world, 100, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z0 = world.sample_latent(&mut rng);
        let mut config = EditConfig::new("b");
        config.incremental = false;
        let t = edit(&world, &bank, &z0, &config).unwrap();

        let first = t.points[1].z.sub(&z0);
        for (n, point) in t.points.iter().enumerate().skip(1) {
            let offset = point.z.sub(&z0);
            let expected_len = n as f64 * config.step_size;
            assert!(
                (offset.norm() - expected_len).abs() < 1e-9,
                "step {n}: moved {} instead of {expected_len}",
                offset.norm()
            );
            assert!(
                offset.cosine(&first) > 1.0 - 1e-12,
                "step {n} left the line, cosine {}",
                offset.cosine(&first)
            );
        }
    }

    #[test]
    fn incremental_equals_fixed_when_the_field_is_constant() {
        // Linear generator with logistic classifiers: the conditional
        // direction is the same everywhere, so recomputing it changes nothing.
        let world = mini_world(GeneratorKind::Linear, 23);
        let bank = DirectionBank::averaging(&world, 100, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z0 = world.sample_latent(&mut rng);
        let mut config = EditConfig::new("a").with_conditions(&["b"]);
        config.factors = crate::directions::ControlFactors::new(0.0, 0.0).unwrap();
        let inc = edit(&world, &bank, &z0, &config).unwrap();
        config.incremental = false;
        let fixed = edit(&world, &bank, &z0, &config).unwrap();
        let drift = inc.end().z.sub(&fixed.end().z).norm();
        assert!(drift < 1e-9, "endpoints differ by {drift:e}");
    }

    #[test]
    fn incremental_and_fixed_diverge_on_a_curved_field() {
        let world = mini_world(GeneratorKind::Nonlinear, 24);
        let bank = DirectionBank::averaging(&world, 100, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z0 = world.sample_latent(&mut rng);
        let mut config = EditConfig::new("a");
        config.factors = crate::directions::ControlFactors::new(0.0, 0.0).unwrap();
        let inc = edit(&world, &bank, &z0, &config).unwrap();
        config.incremental = false;
        let fixed = edit(&world, &bank, &z0, &config).unwrap();
        let drift = inc.end().z.sub(&fixed.end().z).norm();
        assert!(
            drift > 1e-6,
            "incremental mode never left the initial direction (drift {drift:e})"
        );
    }

    #[test]
    fn pure_gradient_edit_moves_the_score_monotonically() {
        // On a linear world each step changes the logit by exactly
        // step_size * |grad|, so the score sequence is strictly monotone.
        let world = mini_world(GeneratorKind::Linear, 25);
        let bank = DirectionBank::averaging(&world, 100, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let z0 = world.sample_latent(&mut rng);
            let mut config = EditConfig::new("c");
            config.factors = crate::directions::ControlFactors::new(0.0, 0.0).unwrap();
            let t = edit(&world, &bank, &z0, &config).unwrap();
            let scores: Vec<f64> = t.points.iter().map(|p| p.edit_scores[2]).collect();
            for w in scores.windows(2) {
                if t.target_label {
                    assert!(w[1] > w[0], "score fell while chasing label 1: {w:?}");
                } else {
                    assert!(w[1] < w[0], "score rose while chasing label 0: {w:?}");
                }
            }
        }
    }

    #[test]
    fn explicit_target_overrides_the_flip() {
        let world = mini_world(GeneratorKind::Linear, 26);
        let bank = DirectionBank::averaging(&world, 100, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z0 = world.sample_latent(&mut rng);
        let initial = {
            let x = world.observe(&z0).unwrap();
            score_to_label(world.edit_score(0, &x).unwrap())
        };
        let mut config = EditConfig::new("a");
        config.target_label = Some(initial);
        let t = edit(&world, &bank, &z0, &config).unwrap();
        assert_eq!(t.target_label, initial, "explicit target must stick");
        // Chasing the label it already has only reinforces it.
        assert_eq!(score_to_label(t.end().edit_scores[0]), initial);
    }

    #[test]
    fn degenerate_conditioning_aborts_with_the_prefix() {
        let world = twin_classifier_world();
        let bank = DirectionBank::averaging(&world, 50, 1).unwrap();
        let z0 = Vector::new(vec![0.4, -0.2]).unwrap();
        let mut config = EditConfig::new("a").with_conditions(&["b"]);
        config.factors = crate::directions::ControlFactors::new(0.0, 0.0).unwrap();
        let err = edit(&world, &bank, &z0, &config).unwrap_err();
        match err {
            Error::EditAborted {
                failed_step,
                prefix,
                source,
            } => {
                assert_eq!(failed_step, 1, "the very first step must fail");
                assert_eq!(prefix.points.len(), 1, "prefix holds just the start");
                assert!(
                    matches!(*source, Error::DegenerateProjection(_)),
                    "unexpected source {source:?}"
                );
            }
            other => panic!("expected EditAborted, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_catches_misuse() {
        let world = mini_world(GeneratorKind::Linear, 27);
        let ok = EditConfig::new("a");

        let mut zero_step = ok.clone();
        zero_step.step_size = 0.0;
        assert!(zero_step.validate(&world).is_err());

        let mut no_steps = ok.clone();
        no_steps.max_steps = 0;
        assert!(no_steps.validate(&world).is_err());

        let mut dup = ok.clone();
        dup.conditions = vec!["b".into(), "b".into()];
        assert!(dup.validate(&world).is_err());

        let mut self_cond = ok.clone();
        self_cond.conditions = vec!["a".into()];
        assert!(self_cond.validate(&world).is_err());

        let mut ghost = ok;
        ghost.primal = "ghost".into();
        assert!(matches!(
            ghost.validate(&world),
            Err(Error::UnknownAttribute(_))
        ));

        let bank = DirectionBank::averaging(&world, 50, 2).unwrap();
        let short = Vector::new(vec![0.0; 3]).unwrap();
        assert!(matches!(
            edit(&world, &bank, &short, &EditConfig::new("a")),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
