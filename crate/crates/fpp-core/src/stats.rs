//! Small online-statistics helpers shared by the estimators.

/// Welford accumulator for mean / variance / standard error.
#[derive(Debug, Clone, Default)]
pub struct OnlineStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl OnlineStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stddev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.stddev() / (self.count as f64).sqrt()
        }
    }
}

/// Standard error of a difference (or sum) of two independent estimates.
pub fn pooled_stderr(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Standard error of an empirical proportion `k/n`.
pub fn proportion_stderr(freq: f64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (freq * (1.0 - freq) / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let s = OnlineStats::from_slice(&xs);
        assert!((s.mean() - 5.0).abs() < 1e-12);
        // sample variance of this classic set is 32/7
        assert!((s.variance() - 32.0 / 7.0).abs() < 1e-12);
        assert!((s.stderr() - (32.0f64 / 7.0 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_counts() {
        let mut s = OnlineStats::new();
        assert!(s.stderr().is_nan());
        s.push(3.0);
        assert_eq!(s.variance(), 0.0);
    }
}
