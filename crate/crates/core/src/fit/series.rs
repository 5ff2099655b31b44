use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled curve `(x, y, σ_y)` with units and free-form metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Absent means unit weights.
    pub sigma: Option<Vec<f64>>,
    pub x_unit: String,
    pub y_unit: String,
    pub metadata: BTreeMap<String, String>,
}

impl CurveSeries {
    /// Validates lengths, finiteness, strictly increasing `x` and `σ > 0`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>, x_unit: &str, y_unit: &str) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain(format!("x and y lengths differ ({} vs {})", x.len(), y.len())));
        }
        if let Some(s) = &sigma {
            if s.len() != x.len() {
                return Err(Error::domain("sigma length differs from x"));
            }
            if let Some(bad) = s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::domain(format!("sigma must be positive and finite, got {bad}")));
            }
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("curve contains non-finite values"));
        }
        if let Some(w) = x.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!("x must be strictly increasing ({} then {})", w[0], w[1])));
        }
        Ok(CurveSeries {
            x,
            y,
            sigma,
            x_unit: x_unit.into(),
            y_unit: y_unit.into(),
            metadata: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// σ at point `i`, 1 when absent.
    pub fn weight_sigma(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s[i])
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }
}
