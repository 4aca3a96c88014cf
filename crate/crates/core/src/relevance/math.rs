//! The scalar pieces of the relevance function: forgetting, training (both
//! the recursive step and its closed form), and the selection distribution.

use rand::Rng;

use super::RelevanceError;

fn check_unit(what: &'static str, x: f64) -> Result<(), RelevanceError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(RelevanceError::OutOfRange { what, value: x })
    }
}

fn check_train_basis(b_t: f64) -> Result<(), RelevanceError> {
    if b_t.is_finite() && b_t > 1.0 {
        Ok(())
    } else {
        Err(RelevanceError::InvalidParam(format!("b_t must be finite and > 1, got {b_t}")))
    }
}

/// Relevance after `age` runs without use: `last_use_rel * b_f^-age`.
pub fn forget(last_use_rel: f64, b_f: f64, age: u64) -> f64 {
    if age == 0 || b_f == 1.0 {
        return last_use_rel;
    }
    last_use_rel * b_f.powf(-(age as f64))
}

/// One training step: close the gap to 1 by `reward / b_t`.
pub fn train_step(rel_prev: f64, reward: f64, b_t: f64) -> Result<f64, RelevanceError> {
    check_unit("relevance", rel_prev)?;
    check_unit("reward", reward)?;
    check_train_basis(b_t)?;
    Ok((rel_prev + (1.0 - rel_prev) / b_t * reward).min(1.0))
}

/// `steps` training steps with a constant reward, evaluated directly.
pub fn train_closed_form(rel_0: f64, reward: f64, b_t: f64, steps: u32) -> Result<f64, RelevanceError> {
    check_unit("relevance", rel_0)?;
    check_unit("reward", reward)?;
    check_train_basis(b_t)?;
    if steps == 0 {
        return Ok(rel_0);
    }
    let keep = 1.0 - reward / b_t;
    let factor = match i32::try_from(steps) {
        Ok(n) => keep.powi(n),
        Err(_) => keep.powf(steps as f64),
    };
    Ok((1.0 + (rel_0 - 1.0) * factor).clamp(0.0, 1.0))
}

/// Probability of choosing each candidate: `rel_i^v / sum_j rel_j^v`.
///
/// Weights are computed relative to the largest relevance so tiny values do
/// not underflow to an all-zero vector. If every relevance is exactly zero the
/// result is uniform.
pub fn selection_distribution(relevances: &[f64], v: f64) -> Result<Vec<f64>, RelevanceError> {
    if relevances.is_empty() {
        return Err(RelevanceError::EmptyChoice);
    }
    for &r in relevances {
        check_unit("relevance", r)?;
    }
    if !(v.is_finite() && v >= 1.0) {
        return Err(RelevanceError::InvalidParam(format!("v must be finite and >= 1, got {v}")));
    }
    let mut weights = relative_weights(relevances, v);
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        let n = weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = 1.0 / n);
    } else {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(weights)
}

/// `(rel_i / max)^v`; all zeros when the maximum is zero.
pub(crate) fn relative_weights(relevances: &[f64], v: f64) -> Vec<f64> {
    let max = relevances.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return vec![0.0; relevances.len()];
    }
    relevances.iter().map(|&r| (r / max).powf(v)).collect()
}

/// Picks an index with probability proportional to `weights`, or uniformly if
/// they are all zero. Zero-weight entries are never picked otherwise.
///
/// Panics on an empty slice.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    assert!(!weights.is_empty(), "sample_index on empty weights");
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..weights.len());
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    last_positive
}
