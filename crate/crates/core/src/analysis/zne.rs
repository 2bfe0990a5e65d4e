use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Zero-noise estimate from runs at 1× and 3× noise: o₁ − (o₃ − o₁)/2 = 3·o₁/2 − o₃/2.
pub fn zne_combine(o_1x: f64, o_3x: f64) -> f64 {
    o_1x + 0.5 * (o_1x - o_3x)
}

pub fn zne_combine_estimates(o_1x: Estimate, o_3x: Estimate) -> Estimate {
    Estimate {
        value: zne_combine(o_1x.value, o_3x.value),
        stderr: (2.25 * o_1x.stderr.powi(2) + 0.25 * o_3x.stderr.powi(2)).sqrt(),
    }
}

/// Bootstrap standard error of `statistic` over `resamples` resamplings of `samples`.
pub fn bootstrap_stderr<F>(samples: &[f64], statistic: F, resamples: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() || resamples < 2 {
        return config("bootstrap needs samples and at least two resamples");
    }
    let mut rng = stream_rng(seed, 0);
    let mut buf = vec![0.0; samples.len()];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for x in buf.iter_mut() {
                *x = samples[rng.random_range(0..samples.len())];
            }
            statistic(&buf)
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / resamples as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_values() {
        assert_eq!(zne_combine(0.42, 0.42), 0.42);
        assert!((zne_combine(1.0, 0.7) - 1.15).abs() < 1e-15);
        assert_eq!(zne_combine(0.0, 0.0), 0.0);
    }

    #[test]
    fn stderr_in_quadrature() {
        let e = zne_combine_estimates(
            Estimate { value: 1.0, stderr: 0.2 },
            Estimate { value: 0.7, stderr: 0.4 },
        );
        assert!((e.stderr - (0.09f64 + 0.04).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_of_mean_matches_standard_error() {
        let samples: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let m = mean(&samples);
        let sd = (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 399.0).sqrt();
        let boot = bootstrap_stderr(&samples, mean, 100, 3).unwrap();
        assert!((boot / (sd / 20.0) - 1.0).abs() < 0.3);
    }

    proptest! {
        #[test]
        fn linear_under_shift(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
            let lhs = zne_combine(a + c, b + c);
            let rhs = zne_combine(a, b) + c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
