//! Closed-form training-time comparison between shipping data to one site
//! and training where the data lives.
//!
//! With `N = K_n / K_s` (network time per data unit over compute time per
//! data unit), `A` agencies holding equal shares of the data and a model
//! that is `M_r` times the size of the data it was trained on, the
//! centralized-to-federated time ratio is
//!
//! ```text
//! (1 + N) / (1/A + M_r * N)
//! ```
//!
//! Values above 1 mean federated training finishes first.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    k_n: f64,
    k_s: f64,
    agencies: usize,
    model_reduction: f64,
}

impl CostParams {
    pub fn new(k_n: f64, k_s: f64, agencies: usize, model_reduction: f64) -> Result<Self> {
        if !(k_s.is_finite() && k_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "K_s must be positive, got {k_s}"
            )));
        }
        if !(k_n.is_finite() && k_n >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "K_n must be non-negative, got {k_n}"
            )));
        }
        if agencies == 0 {
            return Err(Error::InvalidArgument("need at least one agency".into()));
        }
        if !(model_reduction.is_finite() && model_reduction >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "model reduction ratio must be non-negative, got {model_reduction}"
            )));
        }
        Ok(CostParams {
            k_n,
            k_s,
            agencies,
            model_reduction,
        })
    }

    /// Parameters for a given relative network cost `n`, with `K_s = 1`.
    pub fn from_relative(n: f64, agencies: usize, model_reduction: f64) -> Result<Self> {
        Self::new(n, 1.0, agencies, model_reduction)
    }

    pub fn k_n(&self) -> f64 {
        self.k_n
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }

    pub fn agencies(&self) -> usize {
        self.agencies
    }

    pub fn model_reduction(&self) -> f64 {
        self.model_reduction
    }

    /// Relative network cost `K_n / K_s`.
    pub fn n(&self) -> f64 {
        self.k_n / self.k_s
    }
}

/// Centralized over federated training time.
pub fn time_ratio(cp: &CostParams) -> f64 {
    let n = cp.n();
    (1.0 + n) / (1.0 / cp.agencies as f64 + cp.model_reduction * n)
}

/// The ratio when the model is negligibly small: `A (1 + N)`.
pub fn asymptotic_ratio(cp: &CostParams) -> f64 {
    cp.agencies as f64 * (1.0 + cp.n())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub agencies: usize,
    pub n: f64,
    pub ratio: f64,
}

/// One point per `(A, N)` pair, sorted by `A` then `N`.
pub fn sweep_curve(
    n_grid: &[f64],
    agency_values: &[usize],
    model_reduction: f64,
) -> Result<Vec<CurvePoint>> {
    if n_grid.is_empty() || agency_values.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep grids must be non-empty".into(),
        ));
    }
    let mut ns = n_grid.to_vec();
    ns.sort_by(f64::total_cmp);
    let mut agencies = agency_values.to_vec();
    agencies.sort_unstable();
    let mut rows = Vec::with_capacity(ns.len() * agencies.len());
    for &a in &agencies {
        for &n in &ns {
            let cp = CostParams::from_relative(n, a, model_reduction)?;
            rows.push(CurvePoint {
                agencies: a,
                n,
                ratio: time_ratio(&cp),
            });
        }
    }
    Ok(rows)
}

/// `steps` log-spaced values from `min` to `max` inclusive. A single step
/// yields `[min]`.
pub fn log_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "grid needs at least one step".into(),
        ));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    if !(min > 0.0 && max >= min && max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < min <= max, got [{min}, {max}]"
        )));
    }
    let (lo, hi) = (min.ln(), max.ln());
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| match i {
            0 => min,
            i if i == steps - 1 => max,
            i => (lo + (hi - lo) * i as f64 / last).exp(),
        })
        .collect())
}

/// Default Figure-style sweep: `N` in `[0.1, 100]`, `A` in {2, 5, 10, 20}.
pub const DEFAULT_AGENCIES: [usize; 4] = [2, 5, 10, 20];
pub const DEFAULT_N_RANGE: (f64, f64) = (0.1, 100.0);
pub const DEFAULT_N_STEPS: usize = 100;
pub const DEFAULT_MODEL_REDUCTION: f64 = 0.01;

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(n: f64, a: usize, mr: f64) -> CostParams {
        CostParams::from_relative(n, a, mr).unwrap()
    }

    #[test]
    fn hand_values() {
        assert_eq!(time_ratio(&cp(0.0, 10, 0.3)), 10.0);
        assert!((time_ratio(&cp(10.0, 10, 0.01)) - 55.0).abs() < 1e-12);
        assert!((time_ratio(&cp(10.0, 4, 0.1)) - 8.8).abs() < 1e-12);
        assert_eq!(asymptotic_ratio(&cp(0.0, 10, 0.0)), 10.0);
        assert_eq!(asymptotic_ratio(&cp(99.0, 10, 0.0)), 1000.0);
    }

    #[test]
    fn validation() {
        assert!(CostParams::new(1.0, 0.0, 1, 0.0).is_err());
        assert!(CostParams::new(-1.0, 1.0, 1, 0.0).is_err());
        assert!(CostParams::new(1.0, 1.0, 0, 0.0).is_err());
        assert!(CostParams::new(1.0, 1.0, 1, -0.1).is_err());
    }

    #[test]
    fn large_n_tends_to_inverse_mr() {
        let r = time_ratio(&cp(1e9, 10, 0.05));
        assert!((r - 20.0).abs() / 20.0 < 1e-3);
    }

    #[test]
    fn scale_invariant() {
        let base = CostParams::new(3.0, 2.0, 7, 0.02).unwrap();
        let scaled = CostParams::new(3.0 * 17.5, 2.0 * 17.5, 7, 0.02).unwrap();
        assert_eq!(time_ratio(&base), time_ratio(&scaled));
    }

    #[test]
    fn sweep_shape_and_order() {
        let rows = sweep_curve(&[10.0, 1.0], &[10, 2], 0.01).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].agencies, rows[0].n), (2, 1.0));
        assert_eq!((rows[3].agencies, rows[3].n), (10, 10.0));
        assert!(sweep_curve(&[], &[1], 0.0).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.1, 100.0, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[3], 100.0);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert_eq!(log_grid(0.0, 0.0, 1).unwrap(), vec![0.0]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
