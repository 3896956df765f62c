//! Monte Carlo reductions and the deterministic parallel ensemble driver.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, pairwise_sum_by};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Domain(format!("an estimate needs at least 2 samples, got {n}")));
        }
        let mean = pairwise_sum(samples) / n as f64;
        let ss = pairwise_sum_by(n, &|i| (samples[i] - mean).powi(2));
        let stderr = (ss / (n - 1) as f64 / n as f64).sqrt();
        Ok(Self { mean, stderr, n })
    }

    /// Known value, reported with zero error.
    pub fn exact(value: f64, n: usize) -> Self {
        Self { mean: value, stderr: 0.0, n }
    }

    /// `|mean − reference| ≤ k·stderr + slack`.
    pub fn agrees_with(&self, reference: f64, k: f64, slack: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr + slack
    }

    /// Difference with root-sum-square error, for independent estimates.
    pub fn minus(&self, other: &Self) -> Self {
        Self { mean: self.mean - other.mean, stderr: self.stderr.hypot(other.stderr), n: self.n.min(other.n) }
    }
}

/// Runs `f(i)` for `i in 0..count` and returns the results in index order.
///
/// With `threads = Some(k)` a dedicated pool of `k` workers is used;
/// otherwise the global pool. The output never depends on the choice.
pub fn ensemble<T, F>(count: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let work = || (0..count as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match threads {
        Some(k) if k > 0 => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        _ => work(),
    }
}

/// Delta-method estimate of `mean(a)/mean(b)` from paired samples.
pub fn ratio_estimate(a: &[f64], b: &[f64]) -> Result<McEstimate> {
    let ea = McEstimate::from_samples(a)?;
    let eb = McEstimate::from_samples(b)?;
    if eb.mean == 0.0 {
        return Err(Error::Domain("ratio with zero denominator".into()));
    }
    let r = ea.mean / eb.mean;
    let infl: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - r * y) / eb.mean).collect();
    let e = McEstimate::from_samples(&infl)?;
    Ok(McEstimate { mean: r, stderr: e.stderr, n: ea.n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_known_sample() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(McEstimate::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn ensemble_is_ordered_and_thread_independent() {
        let f = |i: u64| (i as f64).sqrt();
        let a = ensemble(1000, Some(1), f);
        let b = ensemble(1000, Some(3), f);
        assert_eq!(a, b);
        assert_eq!(a[9], 3.0);
    }

    #[test]
    fn ratio_of_proportional_samples_is_exact() {
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let r = ratio_estimate(&a, &b).unwrap();
        assert_eq!(r.mean, 2.0);
        assert!(r.stderr < 1e-15);
    }
}
