//! Replication summaries: mean absolute bias, root mean squared error and
//! Monte Carlo standard error.

use crate::error::{Error, Result};
use crate::math;
use crate::stats;

/// Mean of `|b|`.
pub fn mab(biases: &[f64]) -> Result<f64> {
    if biases.is_empty() {
        return Err(Error::Precondition("no biases to summarize".into()));
    }
    Ok(biases.iter().map(|b| math::abs(*b)).sum::<f64>() / biases.len() as f64)
}

/// `sqrt(mean(b²))`.
pub fn rmse(biases: &[f64]) -> Result<f64> {
    if biases.is_empty() {
        return Err(Error::Precondition("no biases to summarize".into()));
    }
    Ok(math::sqrt(biases.iter().map(|b| b * b).sum::<f64>() / biases.len() as f64))
}

/// Sample standard deviation of the biases divided by `sqrt(R)`.
pub fn mcse(biases: &[f64]) -> Result<f64> {
    if biases.len() < 2 {
        return Err(Error::Precondition("MCSE needs at least two replications".into()));
    }
    Ok(stats::sample_sd(biases) / math::sqrt(biases.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let b = [1.0, -1.0];
        assert_eq!(mab(&b).unwrap(), 1.0);
        assert_eq!(rmse(&b).unwrap(), 1.0);
        assert!((mcse(&b).unwrap() - 1.0).abs() < 1e-15);
        let z = [0.0; 3];
        assert_eq!((mab(&z).unwrap(), rmse(&z).unwrap(), mcse(&z).unwrap()), (0.0, 0.0, 0.0));
        assert!(mab(&[]).is_err());
        assert!(mcse(&[1.0]).is_err());
    }
}
