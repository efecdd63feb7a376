//! Percentile bootstrap intervals and one-sided paired bootstrap tests.
//!
//! Resampling draws indices uniformly with replacement from a ChaCha8
//! stream seeded with `seed_from_u64(seed)`, so results are identical
//! across runs and platforms. Percentiles interpolate linearly between
//! order statistics at position `q * (B - 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

fn resampled_means(scores: &[f64], n_resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scores.len();
    (0..n_resamples)
        .map(|_| (0..n).map(|_| scores[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect()
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile interval of the resampled mean at `alpha/2` and
/// `1 - alpha/2`.
pub fn bootstrap_ci(
    scores: &[f64],
    n_resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one score".into(),
        ));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one resample".into(),
        ));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} not in (0, 1)"
        )));
    }
    let mut means = resampled_means(scores, n_resamples, seed);
    means.sort_by(f64::total_cmp);
    Ok((
        percentile(&means, alpha / 2.0),
        percentile(&means, 1.0 - alpha / 2.0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_delta: f64,
    /// Fraction of resamples where mean(a) - mean(b) <= 0.
    pub p_value: f64,
    pub resamples: usize,
}

/// One-sided test of `a > b` by resampling instance indices jointly.
pub fn paired_bootstrap_test(
    a: &[f64],
    b: &[f64],
    n_resamples: usize,
    seed: u64,
) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired scores differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || n_resamples == 0 {
        return Err(Error::InvalidArgument(
            "paired test needs scores and resamples".into(),
        ));
    }
    let deltas: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = deltas.len();
    let mean_delta = deltas.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let not_better = (0..n_resamples)
        .filter(|_| (0..n).map(|_| deltas[rng.random_range(0..n)]).sum::<f64>() <= 0.0)
        .count();
    Ok(PairedTest {
        mean_delta,
        p_value: not_better as f64 / n_resamples as f64,
        resamples: n_resamples,
    })
}
