//! Disentanglement/transformation measurement of editing strategies.
//!
//! For a batch of prior draws, each point is edited toward flipping its
//! primal attribute, and after every step count n two rates are read off:
//!
//! * p(n), transformation accuracy: the fraction of samples whose primal
//!   label matches the flip target after n steps;
//! * q(n), disentanglement accuracy: the fraction of (sample, condition)
//!   pairs whose label still matches its value before the edit.
//!
//! The judge is normally the eval classifiers (trained on a corpus disjoint
//! from the edit classifiers the editor consults); [`evaluate_dt_oracle`]
//! swaps in the ground-truth labeling as a cross-check. The flip target is
//! the judge's own call at the start, so p(0) = 0 and q(0) = 1 exactly.
//! Edits that abort count as failures on both axes from the abort step on,
//! so a strategy cannot improve its score by failing early.
//!
//! Plotting q against p traces a curve from (0, 1) toward larger p; the area
//! under it over the full [0, 1] p-range summarizes the whole trade-off in
//! one number. A grid search over the blend factors then ranks operating
//! points by that area, averaged over every ordered attribute pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::{ControlFactors, DirectionBank};
use crate::editor::{edit, EditConfig, EditTrajectory, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::seeding::subseed;
use crate::train::score_to_label;
use crate::world::World;

/// Batch parameters for one curve evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DtParams {
    /// Number of prior draws to edit.
    pub sample_count: usize,
    pub step_size: f64,
    pub max_steps: usize,
    pub incremental: bool,
    pub factors: ControlFactors,
    /// Master seed; each sample derives its own stream, so results do not
    /// depend on thread count.
    pub seed: u64,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            sample_count: 200,
            step_size: 0.1,
            max_steps: 20,
            incremental: true,
            factors: ControlFactors::default(),
            seed: 0,
        }
    }
}

/// Who labels the samples when measuring p and q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtJudge {
    /// The held-out classifier set; the editor never sees its gradients.
    EvalClassifiers,
    /// The world's exact labeling rule.
    Oracle,
}

/// One step count on the curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DtPoint {
    pub step: usize,
    /// Transformation accuracy after `step` steps.
    pub p: f64,
    /// Disentanglement accuracy after `step` steps.
    pub q: f64,
}

/// A full curve: one point per step count from 0 to `max_steps`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DtCurve {
    pub attribute: String,
    /// Condition attributes; q measures how well exactly these are held.
    pub conditions: Vec<String>,
    pub judge: DtJudge,
    pub factors: ControlFactors,
    pub incremental: bool,
    pub step_size: f64,
    pub sample_count: usize,
    /// Edits that stopped early; they fail both p and q from the step they
    /// stopped at.
    pub aborted: usize,
    pub points: Vec<DtPoint>,
}

impl DtCurve {
    /// Area under q over p on the full [0, 1] range.
    pub fn auc(&self) -> f64 {
        auc(&self.points)
    }
}

/// Edit `sample_count` prior draws and measure the curve with the eval
/// classifiers. Per sample, the edit target is the flip of the judge's
/// initial primal label. Aborted edits score as failures from the abort step
/// onward; any error other than a degenerate abort fails the evaluation.
pub fn evaluate_dt(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    conditions: &[String],
    params: &DtParams,
) -> Result<DtCurve> {
    evaluate_with(world, bank, primal, conditions, params, DtJudge::EvalClassifiers)
}

/// [`evaluate_dt`] with the world's exact labeling rule as the judge, as a
/// cross-check unavailable outside synthetic worlds.
pub fn evaluate_dt_oracle(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    conditions: &[String],
    params: &DtParams,
) -> Result<DtCurve> {
    evaluate_with(world, bank, primal, conditions, params, DtJudge::Oracle)
}

struct SampleTally {
    flipped: Vec<bool>,
    preserved: Vec<usize>,
    aborted: bool,
}

fn evaluate_with(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    conditions: &[String],
    params: &DtParams,
    judge: DtJudge,
) -> Result<DtCurve> {
    if params.sample_count == 0 {
        return Err(Error::InvalidConfig(
            "curve evaluation needs at least one sample".to_string(),
        ));
    }
    let config = EditConfig {
        primal: primal.to_string(),
        conditions: conditions.to_vec(),
        factors: params.factors,
        step_size: params.step_size,
        max_steps: params.max_steps,
        incremental: params.incremental,
        target_label: None,
    };
    config.validate(world)?;
    let primal_idx = world.attribute_index(primal)?;
    let condition_idxs = conditions
        .iter()
        .map(|name| world.attribute_index(name))
        .collect::<Result<Vec<_>>>()?;

    let tallies: Vec<SampleTally> = (0..params.sample_count)
        .into_par_iter()
        .map(|i| -> Result<SampleTally> {
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(params.seed, "dt-start", i as u64));
            let z0 = world.sample_latent(&mut rng);
            // The flip target comes from the judge, not from the edit
            // classifiers the editor would consult on its own.
            let initial = match judge {
                DtJudge::EvalClassifiers => {
                    score_to_label(world.eval_score(primal_idx, &world.observe(&z0)?)?)
                }
                DtJudge::Oracle => world.oracle_label(primal_idx, &z0),
            };
            let config = EditConfig {
                target_label: Some(!initial),
                ..config.clone()
            };
            let trajectory = match edit(world, bank, &z0, &config) {
                Ok(t) => t,
                Err(Error::EditAborted { prefix, .. }) => *prefix,
                Err(other) => return Err(other),
            };
            Ok(tally(&trajectory, primal_idx, &condition_idxs, params, judge, !initial))
        })
        .collect::<Result<Vec<_>>>()?;

    let samples = params.sample_count as f64;
    let pair_count = (params.sample_count * condition_idxs.len()) as f64;
    let points = (0..=params.max_steps)
        .map(|n| {
            let flips = tallies.iter().filter(|t| t.flipped[n]).count();
            let kept: usize = tallies.iter().map(|t| t.preserved[n]).sum();
            DtPoint {
                step: n,
                p: flips as f64 / samples,
                // With nothing to hold, preservation is vacuous.
                q: if condition_idxs.is_empty() {
                    1.0
                } else {
                    kept as f64 / pair_count
                },
            }
        })
        .collect();
    Ok(DtCurve {
        attribute: primal.to_string(),
        conditions: conditions.to_vec(),
        judge,
        factors: params.factors,
        incremental: params.incremental,
        step_size: params.step_size,
        sample_count: params.sample_count,
        aborted: tallies.iter().filter(|t| t.aborted).count(),
        points,
    })
}

fn judge_label(judge: DtJudge, point: &TrajectoryPoint, idx: usize) -> bool {
    match judge {
        DtJudge::EvalClassifiers => score_to_label(point.eval_scores[idx]),
        DtJudge::Oracle => point.oracle_labels[idx],
    }
}

fn tally(
    trajectory: &EditTrajectory,
    primal_idx: usize,
    condition_idxs: &[usize],
    params: &DtParams,
    judge: DtJudge,
    target: bool,
) -> SampleTally {
    let initial: Vec<bool> = condition_idxs
        .iter()
        .map(|&j| judge_label(judge, trajectory.start(), j))
        .collect();
    let reached = trajectory.steps();
    let mut flipped = Vec::with_capacity(params.max_steps + 1);
    let mut preserved = Vec::with_capacity(params.max_steps + 1);
    for n in 0..=params.max_steps {
        if n > reached {
            // The edit never produced this state: failure on both axes.
            flipped.push(false);
            preserved.push(0);
            continue;
        }
        let point = trajectory.point_at(n);
        flipped.push(judge_label(judge, point, primal_idx) == target);
        preserved.push(
            condition_idxs
                .iter()
                .zip(&initial)
                .filter(|(&j, &was)| judge_label(judge, point, j) == was)
                .count(),
        );
    }
    SampleTally {
        flipped,
        preserved,
        aborted: reached < params.max_steps,
    }
}

/// The curve as a step function domain: points sorted by p (ties kept in
/// step order and averaged to one q), then extended as constant steps down
/// to p = 0 and up to p = 1.
fn canonical_curve(points: &[DtPoint]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&DtPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.p.total_cmp(&b.p)
            .then(a.step.cmp(&b.step))
            .then(a.q.total_cmp(&b.q))
    });
    let mut canon: Vec<(f64, f64)> = Vec::with_capacity(sorted.len() + 2);
    let mut run = 0;
    while run < sorted.len() {
        let p = sorted[run].p;
        let mut sum = 0.0;
        let mut ties = 0usize;
        while run < sorted.len() && sorted[run].p.total_cmp(&p).is_eq() {
            sum += sorted[run].q;
            ties += 1;
            run += 1;
        }
        canon.push((p, sum / ties as f64));
    }
    let first = canon[0];
    let last = *canon.last().expect("nonempty by construction");
    if first.0 > 0.0 {
        canon.insert(0, (0.0, first.1));
    }
    if last.0 < 1.0 {
        canon.push((1.0, last.1));
    }
    canon
}

/// Area under q over p across the whole [0, 1] range: trapezoids between
/// consecutive distinct p values of the canonical curve, normalized by the
/// accumulated width so a curve pinned at q = 1 scores exactly 1. NaN for an
/// empty curve.
pub fn auc(points: &[DtPoint]) -> f64 {
    if points.is_empty() {
        return f64::NAN;
    }
    let canon = canonical_curve(points);
    let mut area = 0.0;
    let mut span = 0.0;
    for pair in canon.windows(2) {
        let width = pair[1].0 - pair[0].0;
        area += width * ((pair[0].1 + pair[1].1) / 2.0);
        span += width;
    }
    if span == 0.0 {
        // Every point shares one p and the extension added nothing, which
        // takes a curve already covering [0, 1] at a single p; impossible,
        // but the mean q is the right degenerate answer anyway.
        return canon[0].1;
    }
    area / span
}

/// q read off the canonical curve at transformation accuracy `level`,
/// linearly interpolated. `None` outside [0, 1] or on an empty curve.
pub fn q_at_p(points: &[DtPoint], level: f64) -> Option<f64> {
    if points.is_empty() || !(0.0..=1.0).contains(&level) {
        return None;
    }
    let canon = canonical_curve(points);
    for pair in canon.windows(2) {
        if level >= pair[0].0 && level <= pair[1].0 {
            let width = pair[1].0 - pair[0].0;
            if width == 0.0 {
                return Some(pair[0].1);
            }
            let t = (level - pair[0].0) / width;
            return Some(pair[0].1 + t * (pair[1].1 - pair[0].1));
        }
    }
    // Single point whose p already covers `level` exactly.
    Some(canon[0].1)
}

/// One ordered (primal, condition) attribute pair inside a grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct PairAuc {
    pub primal: String,
    pub condition: String,
    pub auc: f64,
    pub aborted: usize,
}

/// One blend-factor pair with its per-pair results.
#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean AUC over all ordered attribute pairs.
    pub mean_auc: f64,
    pub pairs: Vec<PairAuc>,
}

/// Full factor-grid search result.
#[derive(Clone, Debug, Serialize)]
pub struct GridReport {
    pub lambdas: Vec<f64>,
    /// Ordered attribute pairs behind every cell average.
    pub pair_count: usize,
    /// Row-major over (lambda1, lambda2) in the order of `lambdas`.
    pub cells: Vec<GridCell>,
    pub best_index: usize,
}

impl GridReport {
    pub fn best(&self) -> &GridCell {
        &self.cells[self.best_index]
    }
}

/// Evaluate every (lambda1, lambda2) pair from `lambdas` as the mean curve
/// area over all ordered (primal, condition) attribute pairs, with otherwise
/// identical parameters (`base.factors` is ignored). Every cell edits the
/// same prior draws, so cells differ only in the factors. Ties prefer the
/// larger lambda1, then the smaller lambda2: the more attribute-level primal
/// and the more instance-specific conditions.
pub fn grid_search(
    world: &World,
    bank: &DirectionBank,
    base: &DtParams,
    lambdas: &[f64],
) -> Result<GridReport> {
    let names: Vec<&str> = world.attributes().iter().map(|a| a.name.as_str()).collect();
    if names.len() < 2 {
        return Err(Error::NoAttributePairs);
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty factor grid".to_string()));
    }
    for &l in lambdas {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidConfig(format!(
                "blend factor {l} outside [0, 1]"
            )));
        }
    }
    let pair_count = names.len() * (names.len() - 1);
    let mut cells = Vec::with_capacity(lambdas.len() * lambdas.len());
    for &lambda1 in lambdas {
        for &lambda2 in lambdas {
            let params = DtParams {
                factors: ControlFactors::new(lambda1, lambda2)?,
                ..*base
            };
            let mut pairs = Vec::with_capacity(pair_count);
            for &primal in &names {
                for &condition in &names {
                    if primal == condition {
                        continue;
                    }
                    let curve =
                        evaluate_dt(world, bank, primal, &[condition.to_string()], &params)?;
                    pairs.push(PairAuc {
                        primal: primal.to_string(),
                        condition: condition.to_string(),
                        auc: curve.auc(),
                        aborted: curve.aborted,
                    });
                }
            }
            let mean_auc = pairs.iter().map(|p| p.auc).sum::<f64>() / pair_count as f64;
            cells.push(GridCell {
                lambda1,
                lambda2,
                mean_auc,
                pairs,
            });
        }
    }
    let best_index = cells
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.mean_auc
                .total_cmp(&b.mean_auc)
                .then(a.lambda1.total_cmp(&b.lambda1))
                .then(b.lambda2.total_cmp(&a.lambda2))
        })
        .map(|(i, _)| i)
        .expect("grid has at least one cell");
    Ok(GridReport {
        lambdas: lambdas.to_vec(),
        pair_count,
        cells,
        best_index,
    })
}

/// Agreement between the two attribute-level estimators for one attribute.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorAgreement {
    pub attribute: String,
    /// Cosine between the averaged and boundary-normal directions.
    pub cosine: f64,
    /// Curve area when editing this attribute with the averaging bank.
    pub auc_averaging: f64,
    /// Same measurement with the boundary bank.
    pub auc_boundary: f64,
}

/// Side-by-side comparison of the averaging and boundary banks.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorComparison {
    pub direction_samples: usize,
    pub per_attribute: Vec<EstimatorAgreement>,
}

impl EstimatorComparison {
    pub fn min_cosine(&self) -> f64 {
        self.per_attribute
            .iter()
            .map(|a| a.cosine)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_auc_gap(&self) -> f64 {
        self.per_attribute
            .iter()
            .map(|a| (a.auc_averaging - a.auc_boundary).abs())
            .fold(0.0, f64::max)
    }
}

/// Build both attribute-level banks from `direction_samples` draws each, then
/// measure, for every attribute as the primal conditioned on all others, the
/// curve each bank yields under `params`. Direction agreement is meaningful
/// at any factors; the curves isolate the banks best at fully
/// attribute-level factors.
pub fn compare_attribute_estimators(
    world: &World,
    direction_samples: usize,
    params: &DtParams,
) -> Result<EstimatorComparison> {
    let averaging = DirectionBank::averaging(
        world,
        direction_samples,
        subseed(params.seed, "estimator-averaging", 0),
    )?;
    let boundary = DirectionBank::boundary(
        world,
        direction_samples,
        subseed(params.seed, "estimator-boundary", 0),
    )?;
    let per_attribute = world
        .attributes()
        .iter()
        .enumerate()
        .map(|(i, attr)| -> Result<EstimatorAgreement> {
            let conditions: Vec<String> = world
                .attributes()
                .iter()
                .filter(|other| other.name != attr.name)
                .map(|other| other.name.clone())
                .collect();
            let avg_curve = evaluate_dt(world, &averaging, &attr.name, &conditions, params)?;
            let bnd_curve = evaluate_dt(world, &boundary, &attr.name, &conditions, params)?;
            Ok(EstimatorAgreement {
                attribute: attr.name.clone(),
                cosine: averaging.direction(i).cosine(boundary.direction(i)),
                auc_averaging: avg_curve.auc(),
                auc_boundary: bnd_curve.auc(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorComparison {
        direction_samples,
        per_attribute,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{mini_world, twin_classifier_world};
    use crate::world::GeneratorKind;

    fn pt(step: usize, p: f64, q: f64) -> DtPoint {
        DtPoint { step, p, q }
    }

    fn quick_params(factors: ControlFactors) -> DtParams {
        DtParams {
            sample_count: 40,
            step_size: 0.1,
            max_steps: 10,
            incremental: true,
            factors,
            seed: 7,
        }
    }

    #[test]
    fn flat_perfect_curve_scores_exactly_one() {
        let points = vec![pt(0, 0.0, 1.0), pt(1, 0.3, 1.0), pt(2, 0.8, 1.0), pt(3, 1.0, 1.0)];
        assert_eq!(auc(&points), 1.0, "q pinned at 1 must give area exactly 1");
    }

    #[test]
    fn linear_decline_scores_exactly_one_half() {
        let points = vec![pt(0, 0.0, 1.0), pt(1, 0.5, 0.5), pt(2, 1.0, 0.0)];
        assert_eq!(auc(&points), 0.5);
    }

    #[test]
    fn non_monotone_curve_matches_hand_computation() {
        // Sorted by p: (0,1), (0.3,0.8), (0.4,0.9), (1,0.7). Trapezoids:
        // 0.3*0.9 + 0.1*0.85 + 0.6*0.8 = 0.835 over a span of 1.
        let points = vec![pt(0, 0.0, 1.0), pt(1, 0.4, 0.9), pt(2, 0.3, 0.8), pt(3, 1.0, 0.7)];
        assert!((auc(&points) - 0.835).abs() < 1e-12, "got {}", auc(&points));
    }

    #[test]
    fn partial_curves_extend_as_constant_steps() {
        // Extended: (0,1), (0.2,1), (0.6,0.5), (1,0.5).
        let points = vec![pt(0, 0.2, 1.0), pt(1, 0.6, 0.5)];
        let expected = 0.2 * 1.0 + 0.4 * 0.75 + 0.4 * 0.5;
        assert!(
            (auc(&points) - expected).abs() < 1e-12,
            "got {} want {expected}",
            auc(&points)
        );
    }

    #[test]
    fn tied_p_values_average_their_q() {
        // Ties at p = 0.25 average to q = 0.75, then extend flat to 0 and 1.
        let stuck = vec![pt(0, 0.25, 1.0), pt(1, 0.25, 0.5)];
        assert_eq!(auc(&stuck), 0.75);
        assert!(auc(&[]).is_nan(), "empty curve has no area");
    }

    #[test]
    fn interpolated_q_brackets_and_rejects() {
        let points = vec![pt(0, 0.0, 1.0), pt(1, 0.4, 0.9), pt(2, 1.0, 0.5)];
        let mid = q_at_p(&points, 0.2).unwrap();
        assert!((mid - 0.95).abs() < 1e-12, "got {mid}");
        assert_eq!(q_at_p(&points, 0.4).unwrap(), 0.9);
        assert_eq!(q_at_p(&points, 1.2), None);
        assert_eq!(q_at_p(&points, -0.1), None);
        let partial = vec![pt(0, 0.4, 0.8), pt(1, 0.6, 0.6)];
        assert_eq!(
            q_at_p(&partial, 0.1).unwrap(),
            0.8,
            "below the measured range the curve holds its first q"
        );
        assert_eq!(
            q_at_p(&partial, 0.9).unwrap(),
            0.6,
            "above the measured range the curve holds its last q"
        );
    }

    #[test]
    fn curve_has_full_length_and_pinned_endpoints() {
        let world = mini_world(GeneratorKind::Linear, 31);
        let bank = DirectionBank::averaging(&world, 150, 1).unwrap();
        let params = quick_params(ControlFactors::default());
        let curve = evaluate_dt(
            &world,
            &bank,
            "a",
            &["b".to_string(), "c".to_string()],
            &params,
        )
        .unwrap();
        assert_eq!(curve.points.len(), params.max_steps + 1);
        assert_eq!(curve.judge, DtJudge::EvalClassifiers);
        assert_eq!(curve.points[0].p, 0.0, "the flip target starts unmet by construction");
        assert_eq!(curve.points[0].q, 1.0, "nothing has moved at step 0");
        for point in &curve.points {
            assert!((0.0..=1.0).contains(&point.p) && (0.0..=1.0).contains(&point.q));
        }
        let last = curve.points.last().unwrap();
        assert!(
            last.p > 0.5,
            "editing should transform most samples by step 10, got p = {}",
            last.p
        );
        assert_eq!(curve.aborted, 0);
    }

    #[test]
    fn oracle_judge_roughly_agrees_with_the_classifiers() {
        let world = mini_world(GeneratorKind::Linear, 36);
        let bank = DirectionBank::averaging(&world, 150, 1).unwrap();
        let params = quick_params(ControlFactors::default());
        let conditions = vec!["b".to_string()];
        let judged = evaluate_dt(&world, &bank, "a", &conditions, &params).unwrap();
        let oracle = evaluate_dt_oracle(&world, &bank, "a", &conditions, &params).unwrap();
        assert_eq!(oracle.judge, DtJudge::Oracle);
        assert_eq!(oracle.points[0].p, 0.0);
        assert_eq!(oracle.points[0].q, 1.0);
        assert!(
            (judged.auc() - oracle.auc()).abs() < 0.15,
            "judges disagree wildly: {} vs {}",
            judged.auc(),
            oracle.auc()
        );
    }

    #[test]
    fn results_do_not_depend_on_the_thread_count() {
        let world = mini_world(GeneratorKind::Nonlinear, 32);
        let bank = DirectionBank::averaging(&world, 150, 2).unwrap();
        let params = quick_params(ControlFactors::new(0.5, 0.5).unwrap());
        let conditions = vec!["b".to_string(), "c".to_string()];
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| evaluate_dt(&world, &bank, "a", &conditions, &params).unwrap())
        };
        let serial = run(1);
        let parallel = run(4);
        for (a, b) in serial.points.iter().zip(&parallel.points) {
            assert_eq!(a.p.to_bits(), b.p.to_bits(), "p differs at step {}", a.step);
            assert_eq!(a.q.to_bits(), b.q.to_bits(), "q differs at step {}", a.step);
        }
    }

    #[test]
    fn aborted_edits_fail_both_axes_from_the_abort_step() {
        let world = twin_classifier_world();
        let bank = DirectionBank::averaging(&world, 50, 1).unwrap();
        let params = DtParams {
            sample_count: 10,
            factors: ControlFactors::new(0.0, 0.0).unwrap(),
            ..DtParams::default()
        };
        let curve = evaluate_dt(&world, &bank, "a", &["b".to_string()], &params).unwrap();
        assert_eq!(curve.aborted, 10, "every conditioned edit is degenerate here");
        assert_eq!(curve.points.len(), params.max_steps + 1);
        assert_eq!(curve.points[0].p, 0.0);
        assert_eq!(curve.points[0].q, 1.0);
        for point in &curve.points[1..] {
            assert_eq!(point.p, 0.0, "a failed edit cannot count as transformed");
            assert_eq!(point.q, 0.0, "a failed edit cannot count as preserving");
        }
        assert!(curve.auc() < 0.1, "failing early must tank the area, got {}", curve.auc());
    }

    #[test]
    fn grid_covers_all_cells_and_averages_ordered_pairs() {
        let world = mini_world(GeneratorKind::Linear, 33);
        let bank = DirectionBank::averaging(&world, 150, 3).unwrap();
        let base = DtParams {
            sample_count: 20,
            max_steps: 6,
            ..DtParams::default()
        };
        let lambdas = [0.0, 1.0];
        let report = grid_search(&world, &bank, &base, &lambdas).unwrap();
        assert_eq!(report.pair_count, 6, "3 attributes give 6 ordered pairs");
        assert_eq!(report.cells.len(), 4);
        let seen: Vec<(f64, f64)> = report.cells.iter().map(|c| (c.lambda1, c.lambda2)).collect();
        assert_eq!(seen, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        for cell in &report.cells {
            assert_eq!(cell.pairs.len(), 6);
            let mean = cell.pairs.iter().map(|p| p.auc).sum::<f64>() / 6.0;
            assert!((cell.mean_auc - mean).abs() < 1e-15, "stored mean drifted");
            assert!(
                cell.pairs.iter().all(|p| p.primal != p.condition),
                "self-pairs must not be evaluated"
            );
        }
        let best = report.best();
        assert!(
            report.cells.iter().all(|c| c.mean_auc <= best.mean_auc),
            "best cell is not maximal"
        );
    }

    #[test]
    fn grid_rejects_unusable_requests() {
        let world = mini_world(GeneratorKind::Linear, 34);
        let bank = DirectionBank::averaging(&world, 100, 4).unwrap();
        let base = DtParams::default();
        assert!(matches!(
            grid_search(&world, &bank, &base, &[]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            grid_search(&world, &bank, &base, &[0.5, 1.5]),
            Err(Error::InvalidConfig(_))
        ));
        let lonely = crate::testutil::single_attribute_world();
        let lonely_bank = DirectionBank::averaging(&lonely, 50, 4).unwrap();
        assert!(matches!(
            grid_search(&lonely, &lonely_bank, &base, &[0.0, 1.0]),
            Err(Error::NoAttributePairs)
        ));
    }

    #[test]
    fn estimator_comparison_reports_every_attribute() {
        let world = mini_world(GeneratorKind::Linear, 35);
        let params = DtParams {
            sample_count: 20,
            max_steps: 6,
            factors: ControlFactors::attribute_level(),
            ..DtParams::default()
        };
        let cmp = compare_attribute_estimators(&world, 200, &params).unwrap();
        assert_eq!(cmp.per_attribute.len(), 3);
        assert!(
            cmp.min_cosine() > 0.9,
            "estimators disagree badly on a linear world: {}",
            cmp.min_cosine()
        );
        for row in &cmp.per_attribute {
            assert!(row.auc_averaging.is_finite() && row.auc_boundary.is_finite());
        }
        assert!(cmp.max_auc_gap() < 0.5, "gap {}", cmp.max_auc_gap());
    }
}
