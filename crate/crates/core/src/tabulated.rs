//! Functions tabulated on a strictly increasing set of nodes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Tabulated {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain(format!(
                "node/value length mismatch ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::Domain("empty table".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite table entry".into()));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("table nodes must be strictly increasing".into()));
        }
        Ok(Tabulated { x, y })
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let y = x.iter().map(|&v| f(v)).collect();
        Tabulated::new(x, y)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Value at an exact node, `None` if `x` is not a node.
    pub fn at_node(&self, x: f64) -> Option<f64> {
        self.x
            .binary_search_by(|p| p.total_cmp(&x))
            .ok()
            .map(|i| self.y[i])
    }

    /// Like [`Tabulated::at_node`] but reports a domain error.
    pub fn require(&self, x: f64) -> Result<f64> {
        self.at_node(x)
            .ok_or_else(|| Error::Domain(format!("function not tabulated at {x}")))
    }

    /// Piecewise-linear interpolation inside the node range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] || x.is_nan() {
            return None;
        }
        let k = self.x.partition_point(|&p| p <= x);
        if k == 0 {
            return Some(self.y[0]);
        }
        let i = k - 1;
        if i == n - 1 || self.x[i] == x {
            return Some(self.y[i]);
        }
        let s = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Some(self.y[i] + s * (self.y[i + 1] - self.y[i]))
    }

    /// ∫ from the first node to `x` of the interpolant (exact for piecewise-linear data).
    pub fn integral_to(&self, x: f64) -> Option<f64> {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return None;
        }
        let mut acc = 0.0;
        for i in 0..n - 1 {
            let (a, b) = (self.x[i], self.x[i + 1]);
            if x <= a {
                break;
            }
            let hi = x.min(b);
            let fhi = self.y[i] + (hi - a) / (b - a) * (self.y[i + 1] - self.y[i]);
            acc += 0.5 * (self.y[i] + fhi) * (hi - a);
        }
        Some(acc)
    }
}
