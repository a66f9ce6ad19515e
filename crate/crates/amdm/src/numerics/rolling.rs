use super::NumericsError;

/// Fixed-capacity ring buffer maintaining a running sum and sum of squares,
/// so mean and population standard deviation are O(1) per push.
///
/// The running sums are recomputed from the buffer once per full turnover of
/// the window to keep accumulated floating-point drift below 1e-9 relative.
#[derive(Debug, Clone)]
pub struct RollingWindow {
    buf: Vec<f64>,
    head: usize,
    len: usize,
    sum: f64,
    sum_sq: f64,
    evictions: usize,
}

impl RollingWindow {
    /// `capacity` is the window length w, in steps.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        RollingWindow {
            buf: vec![0.0; capacity],
            head: 0,
            len: 0,
            sum: 0.0,
            sum_sq: 0.0,
            evictions: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.buf.len()
    }

    /// Pushes `x`, evicting the oldest value when at capacity, and returns the
    /// mean and population standard deviation of the buffered values.
    pub fn update(&mut self, x: f64) -> Result<(f64, f64), NumericsError> {
        if !x.is_finite() {
            return Err(NumericsError::NonFinite { value: x });
        }
        let cap = self.buf.len();
        if self.len == cap {
            let old = self.buf[self.head];
            self.sum -= old;
            self.sum_sq -= old * old;
            self.evictions += 1;
        } else {
            self.len += 1;
        }
        self.buf[self.head] = x;
        self.head = (self.head + 1) % cap;
        self.sum += x;
        self.sum_sq += x * x;
        if self.evictions >= cap {
            self.recompute_sums();
            self.evictions = 0;
        }
        Ok((self.mean(), self.std()))
    }

    pub fn mean(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.sum / self.len as f64
        }
    }

    /// Population standard deviation of the buffered values; never negative.
    pub fn std(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        let n = self.len as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        var.sqrt()
    }

    /// Values currently buffered, oldest first.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let cap = self.buf.len();
        let start = (self.head + cap - self.len) % cap;
        (0..self.len).map(move |i| self.buf[(start + i) % cap])
    }

    fn recompute_sums(&mut self) {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for v in self.values() {
            sum += v;
            sum_sq += v * v;
        }
        self.sum = sum;
        self.sum_sq = sum_sq;
    }
}

/// Rolling z-score with a variance floor: `(x - mean) / max(std, floor)`.
///
/// The floor keeps the score finite on zero-variance streams; callers pick a
/// scale-aware floor so constant streams normalize to exactly zero deviation.
pub fn zscore(x: f64, mean: f64, std: f64, floor: f64) -> f64 {
    debug_assert!(floor > 0.0, "zscore floor must be positive");
    (x - mean) / std.max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element() {
        let mut w = RollingWindow::new(3);
        let (mean, std) = w.update(5.0).unwrap();
        assert_eq!(mean, 5.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn eviction_at_capacity() {
        let mut w = RollingWindow::new(3);
        for x in [1.0, 2.0, 3.0] {
            w.update(x).unwrap();
        }
        let (mean, std) = w.update(4.0).unwrap();
        let buffered: Vec<f64> = w.values().collect();
        assert_eq!(buffered, vec![2.0, 3.0, 4.0]);
        assert!((mean - 3.0).abs() < 1e-12);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_stream_has_zero_std() {
        let mut w = RollingWindow::new(8);
        let mut last = (0.0, 0.0);
        for _ in 0..8 {
            last = w.update(2.75).unwrap();
        }
        assert_eq!(last, (2.75, 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        let mut w = RollingWindow::new(4);
        assert!(w.update(f64::NAN).is_err());
        assert!(w.update(f64::INFINITY).is_err());
        assert_eq!(w.len(), 0);
    }

    #[test]
    fn running_sums_match_direct_recomputation() {
        let mut w = RollingWindow::new(80);
        let mut x = 0.37;
        for i in 0..100_000 {
            // Deterministic wandering sequence with varied magnitudes.
            x = 1000.0 * ((i as f64 * 0.73).sin() + 0.001 * i as f64).cos() + x * 0.5;
            w.update(x).unwrap();
        }
        let direct_sum: f64 = w.values().sum();
        let rel = (w.sum - direct_sum).abs() / direct_sum.abs().max(1.0);
        assert!(rel < 1e-9, "sum drift {rel}");
        let direct_mean = direct_sum / w.len() as f64;
        let direct_var = w
            .values()
            .map(|v| (v - direct_mean) * (v - direct_mean))
            .sum::<f64>()
            / w.len() as f64;
        assert!((w.std() - direct_var.sqrt()).abs() / direct_var.sqrt().max(1e-12) < 1e-6);
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore(3.0, 3.0, 1.2, 1e-6), 0.0);
        assert_eq!(zscore(5.0, 3.0, 0.0, 1e-6), 2.0 / 1e-6);
        assert_eq!(zscore(7.0, 3.0, 2.0, 1e-6), 2.0);
    }
}
