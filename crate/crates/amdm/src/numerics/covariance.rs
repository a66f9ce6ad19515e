//! Online mean/covariance estimation with diagonal shrinkage, a ridge floor,
//! and a maintained inverse.
//!
//! Updates are count-weighted (sample moments) until the count reaches the
//! reciprocal of the exponential weight, then switch to exponentially
//! weighted moments so the estimate tracks drift. Each update decomposes into
//! a scaling plus rank-one terms, so the inverse is maintained with the
//! Sherman-Morrison identity in O(dim^2) per term; a direct Cholesky
//! re-inversion serves both as the fallback when an update denominator
//! degenerates and as a periodic refresh that bounds floating-point drift.

use super::NumericsError;

/// Denominator threshold below which Sherman-Morrison is abandoned for a
/// direct re-inversion.
const SM_DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CovarianceConfig {
    /// Shrinkage intensity gamma in [0, 1]: the update blends the residual
    /// outer product with its own diagonal, `(1-gamma)*d*d' + gamma*diag(d*d')`,
    /// so the steady state equals the diagonally shrunk covariance.
    pub shrinkage: f64,
    /// Ridge added per update (scaled by the update weight); keeps every
    /// eigenvalue of the estimate at or above this value.
    pub epsilon: f64,
    /// Exponential weight used once `count >= 1/weight`; `None` keeps
    /// count-weighted (cumulative) updates forever.
    pub ewma_weight: Option<f64>,
    /// Full re-inversions happen every this many updates.
    pub refresh_interval: usize,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        CovarianceConfig {
            shrinkage: 0.1,
            epsilon: 1e-6,
            ewma_weight: None,
            refresh_interval: 512,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OnlineCovariance {
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
    inv: Vec<f64>,
    cfg: CovarianceConfig,
    // Scratch buffers so updates allocate nothing.
    delta: Vec<f64>,
    inv_v: Vec<f64>,
}

impl OnlineCovariance {
    pub fn new(dim: usize, cfg: CovarianceConfig) -> Result<Self, NumericsError> {
        if dim == 0 {
            return Err(NumericsError::InvalidParameter {
                name: "dim",
                reason: "must be positive".into(),
            });
        }
        if !(cfg.shrinkage >= 0.0 && cfg.shrinkage <= 1.0) {
            return Err(NumericsError::InvalidParameter {
                name: "shrinkage",
                reason: format!("must be in [0, 1], got {}", cfg.shrinkage),
            });
        }
        if !(cfg.epsilon > 0.0) {
            return Err(NumericsError::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive, got {}", cfg.epsilon),
            });
        }
        if let Some(w) = cfg.ewma_weight {
            if !(w > 0.0 && w < 1.0) {
                return Err(NumericsError::InvalidParameter {
                    name: "ewma_weight",
                    reason: format!("must be in (0, 1), got {w}"),
                });
            }
        }
        Ok(OnlineCovariance {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            cov: vec![0.0; dim * dim],
            inv: vec![0.0; dim * dim],
            cfg,
            delta: vec![0.0; dim],
            inv_v: vec![0.0; dim],
        })
    }

    /// Builds an estimator in a fully-warmed state around the given moments.
    /// Used by tests and by detectors that freeze reference statistics.
    pub fn from_parts(
        mean: Vec<f64>,
        covariance: Vec<f64>,
        cfg: CovarianceConfig,
    ) -> Result<Self, NumericsError> {
        let dim = mean.len();
        if covariance.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                actual: covariance.len(),
            });
        }
        let inv = cholesky_inverse(dim, &covariance).ok_or(NumericsError::InvalidParameter {
            name: "covariance",
            reason: "not positive definite".into(),
        })?;
        let mut state = OnlineCovariance::new(dim, cfg)?;
        state.count = dim + 1;
        state.mean = mean;
        state.cov = covariance;
        state.inv = inv;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// True once enough updates have arrived for the Mahalanobis distance to
    /// be well defined (dim + 1 updates).
    pub fn is_ready(&self) -> bool {
        self.count >= self.dim + 1
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim + j]
    }

    pub fn inverse(&self, i: usize, j: usize) -> f64 {
        self.inv[i * self.dim + j]
    }

    /// One observation. The weight is `max(1/count, ewma_weight)`: sample
    /// moments during warm-up, exponentially weighted afterward.
    pub fn update(&mut self, s: &[f64]) -> Result<(), NumericsError> {
        if s.len() != self.dim {
            return Err(NumericsError::DimensionMismatch {
                expected: self.dim,
                actual: s.len(),
            });
        }
        for &v in s {
            if !v.is_finite() {
                return Err(NumericsError::NonFinite { value: v });
            }
        }
        self.count += 1;
        let n = self.count;
        let count_w = 1.0 / n as f64;
        let w = match self.cfg.ewma_weight {
            Some(eta) => count_w.max(eta),
            None => count_w,
        };
        let d = self.dim;
        for i in 0..d {
            self.delta[i] = s[i] - self.mean[i];
            self.mean[i] += w * self.delta[i];
        }
        if n == 1 {
            // First update: the decayed prior vanishes and only the ridge
            // term survives, so the state is exactly epsilon * I.
            let eps = self.cfg.epsilon;
            self.cov.fill(0.0);
            self.inv.fill(0.0);
            for i in 0..d {
                self.cov[i * d + i] = eps;
                self.inv[i * d + i] = 1.0 / eps;
            }
            return Ok(());
        }

        let c = 1.0 - w;
        let gamma = self.cfg.shrinkage;
        let eps = self.cfg.epsilon;
        // Covariance: C <- c*C + w*c*[(1-gamma) d d' + gamma diag(d d')] + w*eps*I
        for i in 0..d {
            let di = self.delta[i];
            for j in i..d {
                let outer = di * self.delta[j];
                let shrunk = if i == j {
                    // Diagonal keeps the full outer product plus the ridge.
                    w * c * outer + w * eps
                } else {
                    w * c * (1.0 - gamma) * outer
                };
                let v = c * self.cov[i * d + j] + shrunk;
                self.cov[i * d + j] = v;
                self.cov[j * d + i] = v;
            }
        }

        // Inverse: undo the scaling, then absorb each rank-one term.
        let mut ok = true;
        let scale = 1.0 / c;
        for v in self.inv.iter_mut() {
            *v *= scale;
        }
        let delta = std::mem::take(&mut self.delta);
        ok &= self.sherman_morrison(w * c * (1.0 - gamma), &delta);
        self.delta = delta;
        if ok {
            for i in 0..d {
                let beta = w * c * gamma * self.delta[i] * self.delta[i] + w * eps;
                if beta != 0.0 && !self.sherman_morrison_basis(beta, i) {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || self.count % self.cfg.refresh_interval == 0 {
            self.reinvert();
        }
        Ok(())
    }

    /// inv <- inv - beta (inv v)(inv v)' / (1 + beta v' inv v).
    /// Returns false when the denominator degenerates.
    fn sherman_morrison(&mut self, beta: f64, v: &[f64]) -> bool {
        if beta == 0.0 {
            return true;
        }
        let d = self.dim;
        let mut quad = 0.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.inv[i * d + j] * v[j];
            }
            self.inv_v[i] = acc;
            quad += acc * v[i];
        }
        let denom = 1.0 + beta * quad;
        if denom.abs() < SM_DENOM_EPS {
            return false;
        }
        let factor = beta / denom;
        for i in 0..d {
            let vi = self.inv_v[i];
            for j in i..d {
                let adj = factor * vi * self.inv_v[j];
                self.inv[i * d + j] -= adj;
                if i != j {
                    self.inv[j * d + i] -= adj;
                }
            }
        }
        true
    }

    /// Sherman-Morrison for a scaled basis vector `beta * e_idx e_idx'`;
    /// the matrix-vector product reduces to reading column `idx`.
    fn sherman_morrison_basis(&mut self, beta: f64, idx: usize) -> bool {
        let d = self.dim;
        for k in 0..d {
            self.inv_v[k] = self.inv[k * d + idx];
        }
        let denom = 1.0 + beta * self.inv[idx * d + idx];
        if denom.abs() < SM_DENOM_EPS {
            return false;
        }
        let factor = beta / denom;
        for i in 0..d {
            let vi = self.inv_v[i];
            for j in i..d {
                let adj = factor * vi * self.inv_v[j];
                self.inv[i * d + j] -= adj;
                if i != j {
                    self.inv[j * d + i] -= adj;
                }
            }
        }
        true
    }

    fn reinvert(&mut self) {
        if let Some(inv) = cholesky_inverse(self.dim, &self.cov) {
            self.inv = inv;
        }
        // A failed Cholesky leaves the maintained inverse in place; the
        // ridge term makes that unreachable for finite inputs.
    }

    /// Squared Mahalanobis distance of `s` from the running mean. Errors with
    /// `NotReady` during warm-up (fewer than dim + 1 updates).
    pub fn mahalanobis_sq(&self, s: &[f64]) -> Result<f64, NumericsError> {
        if !self.is_ready() {
            return Err(NumericsError::NotReady {
                count: self.count,
                required: self.dim + 1,
            });
        }
        if s.len() != self.dim {
            return Err(NumericsError::DimensionMismatch {
                expected: self.dim,
                actual: s.len(),
            });
        }
        let d = self.dim;
        let mut total = 0.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.inv[i * d + j] * (s[j] - self.mean[j]);
            }
            total += (s[i] - self.mean[i]) * acc;
        }
        Ok(total.max(0.0))
    }

    /// Returns `inverse * (s - mean)`, the per-component weights used for
    /// axis attribution.
    pub fn inverse_residual(&self, s: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if !self.is_ready() {
            return Err(NumericsError::NotReady {
                count: self.count,
                required: self.dim + 1,
            });
        }
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.inv[i * d + j] * (s[j] - self.mean[j]);
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Frobenius norm of `cov * inv - I`; the on-demand health check for the
    /// maintained inverse.
    pub fn identity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut prod = 0.0;
                for k in 0..d {
                    prod += self.cov[i * d + k] * self.inv[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (prod - target) * (prod - target);
            }
        }
        acc.sqrt()
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky
/// factorization; `None` when the factorization fails.
fn cholesky_inverse(d: usize, m: &[f64]) -> Option<Vec<f64>> {
    // Factor m = L L'.
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = m[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    // Invert L in place (lower triangular).
    let mut linv = vec![0.0; d * d];
    for i in 0..d {
        linv[i * d + i] = 1.0 / l[i * d + i];
        for j in 0..i {
            let mut sum = 0.0;
            for k in j..i {
                sum -= l[i * d + k] * linv[k * d + j];
            }
            linv[i * d + j] = sum / l[i * d + i];
        }
    }
    // inv = L'^-1 L^-1.
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in i..d {
                sum += linv[k * d + i] * linv[k * d + j];
            }
            inv[i * d + j] = sum;
            inv[j * d + i] = sum;
        }
    }
    Some(inv)
}
