//! Central-difference validation of the hand-written backward pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{loss, loss_and_grads, MicroModelParams, ModelError, MultimodalInput};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    /// Tensor holding the worst coordinate, for diagnostics.
    pub worst_tensor: String,
}

/// Minimum sampled coordinates across the whole parameter set.
const MIN_COORDS: usize = 200;
const COORDS_PER_TENSOR: usize = 8;

fn check_with_scale(
    params: &MicroModelParams,
    input: &MultimodalInput,
    target: &[usize],
    eps: f64,
    seed: u64,
    grad_scale: f64,
) -> Result<GradCheckReport, ModelError> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(ModelError::BadEpsilon(eps));
    }
    let (_, grads) = loss_and_grads(params, input, target)?;
    if !grads.all_finite() {
        return Err(ModelError::NonFinite("analytic gradients".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tensors = params.tensors().len();
    let per_tensor = COORDS_PER_TENSOR.max(MIN_COORDS.div_ceil(n_tensors));

    // (tensor index, flat index) pairs, every tensor represented.
    let mut coords = Vec::new();
    for (ti, (_, m)) in params.tensors().iter().enumerate() {
        let len = m.data.len();
        if len <= per_tensor {
            coords.extend((0..len).map(|fi| (ti, fi)));
        } else {
            for _ in 0..per_tensor {
                coords.push((ti, rng.gen_range(0..len)));
            }
        }
    }

    let grad_tensors = grads.tensors();
    let mut work = params.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst_tensor = String::new();
    for &(ti, fi) in &coords {
        let orig = work.tensors()[ti].1.data[fi];
        work.tensors_mut()[ti].1.data[fi] = orig + eps;
        let lp = loss(&work, input, target)?;
        work.tensors_mut()[ti].1.data[fi] = orig - eps;
        let lm = loss(&work, input, target)?;
        work.tensors_mut()[ti].1.data[fi] = orig;
        let fd = (lp - lm) / (2.0 * eps);
        let g = grad_tensors[ti].1.data[fi] * grad_scale;
        let rel = (g - fd).abs() / (1e-4f64).max(g.abs()).max(fd.abs());
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_tensor = grad_tensors[ti].0.clone();
        }
    }
    Ok(GradCheckReport { max_rel_err, coords_checked: coords.len(), worst_tensor })
}

/// Compares analytic gradients against central differences on a random
/// sample of coordinates that touches every parameter tensor.
pub fn grad_check(
    params: &MicroModelParams,
    input: &MultimodalInput,
    target: &[usize],
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    check_with_scale(params, input, target, eps, seed, 1.0)
}

/// Negative control: the same comparison with analytic gradients scaled by
/// 1.5, which a sound checker must reject loudly.
pub fn grad_check_corrupted(
    params: &MicroModelParams,
    input: &MultimodalInput,
    target: &[usize],
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    check_with_scale(params, input, target, eps, seed, 1.5)
}
