//! Order-fixed reductions and sample estimators.

/// Pairwise (cascade) summation. The split points depend only on the slice
/// length, so the result is reproducible bit for bit.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error of the mean (unbiased variance) with pairwise sums.
pub fn mean_stderr(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanEstimate {
            mean,
            stderr: 0.0,
            count: 1,
        };
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        count: n,
    }
}

/// Sample variance together with a delta-method standard error,
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_stderr(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n < 2 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: n,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let d4: Vec<f64> = d2.iter().map(|d| d * d).collect();
    let var = pairwise_sum(&d2) / (n - 1) as f64;
    let m4 = pairwise_sum(&d4) / n as f64;
    MeanEstimate {
        mean: var,
        stderr: ((m4 - var * var).max(0.0) / n as f64).sqrt(),
        count: n,
    }
}

/// `n (n-1) ... (n-m+1)` as a float; zero when `m > n`.
pub fn falling_factorial(n: u64, m: u64) -> f64 {
    if m > n {
        return 0.0;
    }
    (0..m).fold(1.0, |acc, k| acc * (n - k) as f64)
}

/// Binomial coefficient as a float (exact for the moderate sizes used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `ln(n!)` by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn factorial(n: u64) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn degenerate_sample_has_zero_stderr() {
        let est = mean_stderr(&[2.0; 50]);
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn combinatorics() {
        assert_eq!(falling_factorial(3, 2), 6.0);
        assert_eq!(falling_factorial(2, 3), 0.0);
        assert_eq!(falling_factorial(5, 0), 1.0);
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial(12, 4), 495.0);
        assert_eq!(factorial(5), 120.0);
        assert!((ln_factorial(10) - factorial(10).ln()).abs() < 1e-12);
    }
}
