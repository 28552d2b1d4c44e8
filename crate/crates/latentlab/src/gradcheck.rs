//! Central finite-difference verification of reverse-mode gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::Vector;
use crate::model::DiffModel;

/// Step used for central differences. Small enough that the quadratic error
/// term is negligible, large enough to stay clear of cancellation noise.
pub const FD_STEP: f64 = 1e-5;

/// Floor for the relative-error denominator, so near-zero entry pairs compare
/// on absolute terms instead of exploding.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst relative error across every probe, output, and input entry.
    pub max_relative_error: f64,
    pub probes: usize,
    /// Number of scalar gradient entries compared.
    pub comparisons: usize,
}

/// Compare reverse-mode gradients against central finite differences at
/// standard normal probe points, for every scalar output of the model.
///
/// Each perturbed forward pass yields all outputs at once, so the cost is
/// `2 * probes * input_dim` forwards plus `probes * output_dim` backward
/// sweeps regardless of output width.
pub fn gradient_check(model: &DiffModel, probes: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_dim = model.input_dim();
    let out_dim = model.output_dim();
    let mut max_rel = 0.0f64;
    let mut comparisons = 0usize;
    for _ in 0..probes {
        let x = Vector::standard_normal(in_dim, &mut rng);
        let analytic: Vec<Vector> = (0..out_dim)
            .map(|k| model.grad_input(&x, k))
            .collect::<Result<_>>()?;
        for i in 0..in_dim {
            let mut shifted: Vec<f64> = x.as_slice().to_vec();
            shifted[i] = x[i] + FD_STEP;
            let plus = model.forward(&Vector::new(shifted.clone())?)?;
            shifted[i] = x[i] - FD_STEP;
            let minus = model.forward(&Vector::new(shifted)?)?;
            for k in 0..out_dim {
                let fd = (plus[k] - minus[k]) / (2.0 * FD_STEP);
                max_rel = max_rel.max(relative_error(analytic[k][i], fd));
                comparisons += 1;
            }
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        probes,
        comparisons,
    })
}
