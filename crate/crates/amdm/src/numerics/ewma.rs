use super::NumericsError;

/// Exponentially weighted moving average,
/// `value <- lambda * s + (1 - lambda) * value`.
///
/// The first observation initializes the state directly, avoiding the
/// transient a fixed zero start would cause.
#[derive(Debug, Clone)]
pub struct EwmaState {
    lambda: f64,
    value: Option<f64>,
}

impl EwmaState {
    /// `lambda` must lie in (0, 1]; out-of-range values are rejected.
    pub fn new(lambda: f64) -> Result<Self, NumericsError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(NumericsError::InvalidParameter {
                name: "lambda",
                reason: format!("must be in (0, 1], got {lambda}"),
            });
        }
        Ok(EwmaState { lambda, value: None })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_initialized(&self) -> bool {
        self.value.is_some()
    }

    /// Smoothed value; `None` before the first update.
    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn update(&mut self, s: f64) -> f64 {
        let next = match self.value {
            None => s,
            Some(prev) => self.lambda * s + (1.0 - self.lambda) * prev,
        };
        self.value = Some(next);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_one_forgets_history() {
        let mut e = EwmaState::new(1.0).unwrap();
        e.update(123.0);
        assert_eq!(e.update(4.2), 4.2);
    }

    #[test]
    fn blend_matches_hand_arithmetic() {
        let mut e = EwmaState::new(0.25).unwrap();
        e.update(0.0);
        assert!((e.update(1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn initializes_to_first_observation() {
        let mut e = EwmaState::new(0.25).unwrap();
        assert!(e.value().is_none());
        assert_eq!(e.update(9.9), 9.9);
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(EwmaState::new(0.0).is_err());
        assert!(EwmaState::new(1.5).is_err());
        assert!(EwmaState::new(f64::NAN).is_err());
    }

    #[test]
    fn geometric_convergence_to_constant() {
        let lambda = 0.3;
        let c = 7.0;
        let mut e = EwmaState::new(lambda).unwrap();
        let theta0 = e.update(0.0);
        let mut bound = (theta0 - c).abs();
        for _ in 0..60 {
            let v = e.update(c);
            bound *= 1.0 - lambda;
            assert!((v - c).abs() <= bound + 1e-12);
        }
    }
}
