/// Streaming summary of `w_i = exp(s_i)` kept relative to the running
/// maximum exponent, so the mean of the `w_i` can be formed in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeanExp {
    shift: f64,
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl Default for LogMeanExp {
    fn default() -> Self {
        LogMeanExp {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            sum_sq: 0.0,
            count: 0,
        }
    }
}

impl LogMeanExp {
    #[inline]
    pub fn push(&mut self, s: f64) {
        self.count += 1;
        if s == f64::NEG_INFINITY {
            return;
        }
        if s > self.shift {
            let r = (self.shift - s).exp();
            self.sum = self.sum * r + 1.0;
            self.sum_sq = self.sum_sq * r * r + 1.0;
            self.shift = s;
        } else {
            let e = (s - self.shift).exp();
            self.sum += e;
            self.sum_sq += e * e;
        }
    }

    pub fn merge(&mut self, other: &LogMeanExp) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let shift = self.shift.max(other.shift);
        if shift == f64::NEG_INFINITY {
            self.count += other.count;
            return;
        }
        let ra = (self.shift - shift).exp();
        let rb = (other.shift - shift).exp();
        self.sum = self.sum * ra + other.sum * rb;
        self.sum_sq = self.sum_sq * ra * ra + other.sum_sq * rb * rb;
        self.shift = shift;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `ln((1/n) Σ exp(s_i))`.
    pub fn log_mean(&self) -> f64 {
        if self.count == 0 || self.sum == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shift + (self.sum / self.count as f64).ln()
    }

    /// `ln` of the unbiased sample standard deviation of `exp(s_i)`.
    pub fn log_std(&self) -> f64 {
        if self.count < 2 || self.sum == 0.0 {
            return f64::NEG_INFINITY;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
        self.shift + 0.5 * var.ln()
    }
}
