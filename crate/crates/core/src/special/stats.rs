use serde::{Deserialize, Serialize};

use super::gaussian::normal_cdf;
use crate::error::{Error, Result};

/// Kolmogorov-Smirnov distance of standardized samples from `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Unbiased sample mean and variance.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Kolmogorov-Smirnov test of normality.
///
/// Samples are standardized with their own mean and standard deviation and
/// compared against the standard normal CDF; the p-value uses the asymptotic
/// Kolmogorov distribution with Stephens' small-sample correction.
pub fn ks_normality(samples: &[f64]) -> Result<KsResult> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::invalid(format!("KS test needs at least 8 samples, got {n}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("KS test samples must be finite"));
    }
    let (mean, var) = mean_variance(samples);
    let sd = var.sqrt();
    if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = normal_cdf(v);
            let above = (i + 1) as f64 / nf - cdf;
            let below = cdf - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(lambda),
        n,
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gaussian_q_inv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    #[test]
    fn normal_quantiles_give_small_distance() {
        let n = 100;
        let xs: Vec<f64> = (1..=n)
            .map(|i| -gaussian_q_inv((i as f64 - 0.5) / n as f64).unwrap())
            .collect();
        let r = ks_normality(&xs).unwrap();
        // 1/(2n) for known parameters; self-standardizing shrinks the spread a little
        assert!(r.statistic <= 0.006, "D = {}", r.statistic);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn constant_samples_rejected() {
        assert!(matches!(ks_normality(&[3.0; 20]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(ks_normality(&[1.0, 2.0, 3.0]).is_err());
        assert!(ks_normality(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, f64::NAN]).is_err());
    }

    #[test]
    fn uniform_samples_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| u.sample(&mut rng)).collect();
        let r = ks_normality(&xs).unwrap();
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn kolmogorov_distribution_reference_points() {
        // P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn moments_of_small_set() {
        let (m, v) = mean_variance(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 1.0);
    }
}
