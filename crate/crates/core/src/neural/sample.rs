use rand::Rng;

use super::NeuralError;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Draws a token id from `distribution` after rescaling its logits by
/// `1 / temperature`. Consumes exactly one uniform draw from `rng`.
pub fn sample_categorical(
    distribution: &[f64],
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<usize, NeuralError> {
    check(distribution, temperature)?;
    let u: f64 = rng.gen();
    Ok(inverse_cdf(distribution, temperature, u))
}

/// Same as [`sample_categorical`] with the uniform draw `u` in `[0, 1)` supplied.
pub fn sample_with_uniform(
    distribution: &[f64],
    temperature: f64,
    u: f64,
) -> Result<usize, NeuralError> {
    check(distribution, temperature)?;
    Ok(inverse_cdf(distribution, temperature, u))
}

fn check(distribution: &[f64], temperature: f64) -> Result<(), NeuralError> {
    if !(temperature > 0.0) {
        return Err(NeuralError::Temperature(temperature));
    }
    let sum: f64 = distribution.iter().sum();
    if distribution.iter().any(|&p| p < 0.0 || !p.is_finite())
        || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE
    {
        return Err(NeuralError::NotNormalized(sum));
    }
    Ok(())
}

/// First index whose cumulative (tempered) mass exceeds `u`.
fn inverse_cdf(distribution: &[f64], temperature: f64, u: f64) -> usize {
    let weights: Vec<f64> = if temperature == 1.0 {
        distribution.to_vec()
    } else {
        // p^(1/T) == exp(log p / T); rescale by the max to stay finite.
        let max = distribution.iter().copied().fold(0.0, f64::max);
        distribution
            .iter()
            .map(|&p| if p > 0.0 { (p / max).powf(1.0 / temperature) } else { 0.0 })
            .collect()
    };
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cumulative += w;
            last_nonzero = i;
            if cumulative > target {
                return i;
            }
        }
    }
    last_nonzero
}
