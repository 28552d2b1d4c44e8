//! One runner per subcommand: load the config, run the experiment, write the
//! artifacts, close with a manifest.
//!
//! Every runner derives all randomness from one effective master seed
//! (`--seed` if given, the config's `seed` otherwise), so a written manifest
//! plus its config reproduces the run exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use latentlab::report;
use latentlab::seeding::subseed;
use latentlab::serialize;
use latentlab::{
    compare_attribute_estimators, edit, evaluate_dt, evaluate_dt_oracle, grid_search,
    BankEstimator, ControlFactors, DirectionBank, DtCurve, DtJudge, DtParams, EditConfig, World,
};

use crate::artifacts::ArtifactSet;
use crate::config::{
    self, AblateTask, BankSpec, CompareTask, DtTask, EditTask, GridTask, WorldTask,
};
use crate::error::CliError;
use crate::TaskArgs;

fn build_bank(world: &World, spec: &BankSpec, seed: u64) -> Result<DirectionBank, CliError> {
    let bank_seed = subseed(seed, "bank", 0);
    let bank = match spec.estimator {
        BankEstimator::Averaging => {
            DirectionBank::averaging(world, spec.direction_samples, bank_seed)?
        }
        BankEstimator::Boundary => {
            DirectionBank::boundary(world, spec.direction_samples, bank_seed)?
        }
    };
    Ok(bank)
}

fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report structs serialize") + "\n"
}

/// Build a world, save it, and report its classifier accuracies.
pub fn world(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (WorldTask, _, _) = config::load(&args.config)?;
    let world = task.world.realize(&base, args.seed)?;

    let mut set = ArtifactSet::create(&args.out)?;
    set.write("world.json", &serialize::world_to_json(&world)?)?;
    set.write("accuracy.csv", &report::accuracy_csv(world.accuracies()))?;
    set.finish("world", Some(world.config().seed), &config_sha)
}

/// Walk one edit trajectory and record every visited point.
pub fn edit_one(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (EditTask, _, _) = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(task.seed);
    let world = task.world.realize(&base, None)?;
    let bank = build_bank(&world, &task.bank, seed)?;

    let spec = &task.edit;
    let econfig = EditConfig {
        primal: spec.primal.clone(),
        conditions: spec.conditions.clone(),
        factors: ControlFactors::new(spec.lambda1, spec.lambda2)?,
        step_size: spec.step_size,
        max_steps: spec.max_steps,
        incremental: spec.incremental,
        target_label: spec.target_label,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "edit-start", spec.start_index));
    let z0 = world.sample_latent(&mut rng);
    let trajectory = edit(&world, &bank, &z0, &econfig)?;

    let names: Vec<String> = world.attribute_names().map(String::from).collect();
    let mut set = ArtifactSet::create(&args.out)?;
    set.write("trajectory.csv", &report::trajectory_csv(&names, &trajectory))?;
    set.write("trajectory.json", &pretty_json(&trajectory))?;
    set.write("directions.json", &serialize::bank_to_json(&bank)?)?;
    set.finish("edit", Some(seed), &config_sha)
}

fn run_curve(
    world: &World,
    bank: &DirectionBank,
    primal: &str,
    conditions: &[String],
    params: &DtParams,
    judge: DtJudge,
) -> Result<DtCurve, CliError> {
    let curve = match judge {
        DtJudge::EvalClassifiers => evaluate_dt(world, bank, primal, conditions, params)?,
        DtJudge::Oracle => evaluate_dt_oracle(world, bank, primal, conditions, params)?,
    };
    Ok(curve)
}

/// Trace one transformation/disentanglement curve.
pub fn dt(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (DtTask, _, _) = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(task.seed);
    let world = task.world.realize(&base, None)?;
    let bank = build_bank(&world, &task.bank, seed)?;

    let spec = &task.dt;
    let params = DtParams {
        sample_count: spec.sample_count,
        step_size: spec.step_size,
        max_steps: spec.max_steps,
        incremental: spec.incremental,
        factors: ControlFactors::new(spec.lambda1, spec.lambda2)?,
        seed,
    };
    let curve = run_curve(&world, &bank, &spec.primal, &spec.conditions, &params, spec.judge)?;

    let mut set = ArtifactSet::create(&args.out)?;
    set.write("curve.csv", &report::curve_csv(&curve))?;
    set.write("curve.svg", &report::curve_svg(&[(spec.primal.clone(), &curve)]))?;
    set.write(
        "curve.json",
        &pretty_json(&serde_json::json!({ "auc": curve.auc(), "curve": curve })),
    )?;
    set.finish("dt", Some(seed), &config_sha)
}

/// Sweep both blend factors and score each cell over all ordered pairs.
pub fn grid(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (GridTask, _, _) = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(task.seed);
    let world = task.world.realize(&base, None)?;
    let bank = build_bank(&world, &task.bank, seed)?;

    let spec = &task.grid;
    let params = DtParams {
        sample_count: spec.sample_count,
        step_size: spec.step_size,
        max_steps: spec.max_steps,
        incremental: spec.incremental,
        factors: ControlFactors::default(),
        seed,
    };
    let grid = grid_search(&world, &bank, &params, &spec.lambdas)?;
    let best = grid.best();

    let mut set = ArtifactSet::create(&args.out)?;
    set.write("grid_matrix.csv", &report::grid_matrix_csv(&grid))?;
    set.write("grid_pairs.csv", &report::grid_pairs_csv(&grid))?;
    set.write(
        "best.json",
        &pretty_json(&serde_json::json!({
            "lambda1": best.lambda1,
            "lambda2": best.lambda2,
            "mean_auc": best.mean_auc,
            "pair_count": grid.pair_count,
        })),
    )?;
    set.finish("grid", Some(seed), &config_sha)
}

/// Measure the same curve with and without per-step direction updates.
pub fn ablate_incremental(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (AblateTask, _, _) = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(task.seed);
    let world = task.world.realize(&base, None)?;
    let bank = build_bank(&world, &task.bank, seed)?;

    let spec = &task.ablate;
    let params = DtParams {
        sample_count: spec.sample_count,
        step_size: spec.step_size,
        max_steps: spec.max_steps,
        incremental: true,
        factors: ControlFactors::new(spec.lambda1, spec.lambda2)?,
        seed,
    };
    // Identical seeds on both arms: the comparison is paired by sample.
    let incremental =
        run_curve(&world, &bank, &spec.primal, &spec.conditions, &params, DtJudge::EvalClassifiers)?;
    let fixed_params = DtParams { incremental: false, ..params };
    let fixed = run_curve(
        &world,
        &bank,
        &spec.primal,
        &spec.conditions,
        &fixed_params,
        DtJudge::EvalClassifiers,
    )?;

    let matched: Vec<serde_json::Value> = spec
        .p_levels
        .iter()
        .map(|&level| {
            serde_json::json!({
                "p": level,
                "q_incremental": latentlab::q_at_p(&incremental.points, level),
                "q_fixed": latentlab::q_at_p(&fixed.points, level),
            })
        })
        .collect();

    let mut set = ArtifactSet::create(&args.out)?;
    set.write(
        "paired.csv",
        &report::paired_curve_csv(("incremental", "fixed"), &incremental, &fixed),
    )?;
    set.write(
        "curves.svg",
        &report::curve_svg(&[
            ("incremental".to_string(), &incremental),
            ("fixed".to_string(), &fixed),
        ]),
    )?;
    set.write(
        "summary.json",
        &pretty_json(&serde_json::json!({
            "auc_incremental": incremental.auc(),
            "auc_fixed": fixed.auc(),
            "matched": matched,
        })),
    )?;
    set.finish("ablate-incremental", Some(seed), &config_sha)
}

/// Pit the averaging estimator against the boundary-normal estimator.
pub fn compare_attr_level(args: &TaskArgs) -> Result<(), CliError> {
    let (task, config_sha, base): (CompareTask, _, _) = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(task.seed);
    let world = task.world.realize(&base, None)?;

    let spec = &task.compare;
    let params = DtParams {
        sample_count: spec.sample_count,
        step_size: spec.step_size,
        max_steps: spec.max_steps,
        incremental: spec.incremental,
        factors: ControlFactors::new(spec.lambda1, spec.lambda2)?,
        seed,
    };
    let comparison = compare_attribute_estimators(&world, spec.direction_samples, &params)?;

    let mut set = ArtifactSet::create(&args.out)?;
    set.write("comparison.csv", &report::comparison_csv(&comparison))?;
    set.write(
        "summary.json",
        &pretty_json(&serde_json::json!({
            "min_cosine": comparison.min_cosine(),
            "max_auc_gap": comparison.max_auc_gap(),
            "comparison": comparison,
        })),
    )?;
    set.finish("compare-attr-level", Some(seed), &config_sha)
}
