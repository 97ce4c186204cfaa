//! Deterministic reductions and small statistical helpers.

use serde::Serialize;

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean and standard error of the mean.
    pub fn of(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Estimate { mean, stderr: f64::INFINITY, n };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Estimate { mean, stderr: (var / n as f64).sqrt(), n }
    }

    /// `|mean - target| ≤ k · stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }
}

/// `|a - b| ≤ k · sqrt(se_a² + se_b²)`.
pub fn agree(a: &Estimate, b: &Estimate, k: f64) -> bool {
    (a.mean - b.mean).abs() <= k * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0,1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn estimate_of_constant() {
        let e = Estimate::of(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert!(e.within(2.0, 3.0));
    }

    #[test]
    fn estimate_known_variance() {
        let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.mean - 2.5).abs() < 1e-15);
        assert!((e.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_of_perfect_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&xs) - 0.005).abs() < 1e-12);
        assert!((ks_uniform(&[0.0; 10]) - 1.0).abs() < 1e-12);
    }
}
