//! Agent utility over wages: u(0) = 0, u' > 0, u'' < 0 on the wage domain.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Hand-rolled utility family for callers that need something beyond
/// square-root or CARA. All closures must agree with each other; construction
/// spot-checks the axioms at sample points.
pub struct CustomUtility {
    pub name: String,
    /// u(w)
    pub value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// u'(w)
    pub marginal: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// u^{-1}(v)
    pub inverse: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// (u')^{-1}(m) for m in (0, u'(0))
    pub inverse_marginal: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// sup_w u(w); `f64::INFINITY` when unbounded
    pub bound: f64,
}

impl fmt::Debug for CustomUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomUtility")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

/// Utility specification used by every wage solver.
#[derive(Debug, Clone)]
pub enum Utility {
    /// u(w) = sqrt(w)
    Sqrt,
    /// u(w) = 1 - exp(-gamma w)
    Cara { gamma: f64 },
    Custom(Arc<CustomUtility>),
}

impl Utility {
    pub fn sqrt() -> Self {
        Utility::Sqrt
    }

    pub fn cara(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidUtility(format!(
                "CARA coefficient must be a positive real, got {gamma}"
            )));
        }
        Ok(Utility::Cara { gamma })
    }

    pub fn custom(spec: CustomUtility) -> Result<Self> {
        let u = Utility::Custom(Arc::new(spec));
        u.validate()?;
        Ok(u)
    }

    /// u(w)
    pub fn value(&self, w: f64) -> f64 {
        match self {
            Utility::Sqrt => w.max(0.0).sqrt(),
            Utility::Cara { gamma } => 1.0 - (-gamma * w).exp(),
            Utility::Custom(c) => (c.value)(w),
        }
    }

    /// u'(w)
    pub fn marginal(&self, w: f64) -> f64 {
        match self {
            Utility::Sqrt => 0.5 / w.max(0.0).sqrt(),
            Utility::Cara { gamma } => gamma * (-gamma * w).exp(),
            Utility::Custom(c) => (c.marginal)(w),
        }
    }

    /// u^{-1}(v); the wage paying utility level v.
    pub fn wage(&self, v: f64) -> f64 {
        match self {
            Utility::Sqrt => v * v,
            Utility::Cara { gamma } => {
                debug_assert!(v < 1.0);
                -(1.0 - v).ln() / gamma
            }
            Utility::Custom(c) => (c.inverse)(v),
        }
    }

    /// sup_w u(w)
    pub fn bound(&self) -> f64 {
        match self {
            Utility::Sqrt => f64::INFINITY,
            Utility::Cara { .. } => 1.0,
            Utility::Custom(c) => c.bound,
        }
    }

    /// u'(0+); finite only when the marginal is bounded at the origin.
    pub fn marginal_at_zero(&self) -> f64 {
        match self {
            Utility::Sqrt => f64::INFINITY,
            Utility::Cara { gamma } => *gamma,
            Utility::Custom(c) => (c.marginal)(0.0),
        }
    }

    /// Solves u'(w) = m over w >= 0; the corner w = 0 when m >= u'(0+).
    pub fn wage_from_marginal(&self, m: f64) -> f64 {
        if !(m > 0.0) {
            return f64::INFINITY;
        }
        if m >= self.marginal_at_zero() {
            return 0.0;
        }
        match self {
            Utility::Sqrt => 0.25 / (m * m),
            Utility::Cara { gamma } => -(m / gamma).ln() / gamma,
            Utility::Custom(c) => (c.inverse_marginal)(m),
        }
    }

    /// Utility level minimizing u^{-1}(v) - v*s over v in [0, bound);
    /// the separable inner step of the dual wage programs.
    pub fn level_for_score(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        let w = self.wage_from_marginal(1.0 / s);
        if w <= 0.0 {
            0.0
        } else {
            self.value(w)
        }
    }

    /// Spot-checks u(0)=0, u'>0, u''<0 and inverse consistency at sample wages.
    pub fn validate(&self) -> Result<()> {
        let u0 = self.value(0.0);
        if u0.abs() > 1e-10 {
            return Err(Error::InvalidUtility(format!("u(0) = {u0}, want 0")));
        }
        let samples = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
        let h = 1e-6;
        let mut prev_marginal = f64::INFINITY;
        for &w in &samples {
            let m = self.marginal(w);
            if !(m > 0.0) {
                return Err(Error::InvalidUtility(format!("u'({w}) = {m}, want > 0")));
            }
            // u'' < 0 <=> u' strictly decreasing across samples
            if m >= prev_marginal {
                return Err(Error::InvalidUtility(format!(
                    "u' not strictly decreasing at w = {w}"
                )));
            }
            prev_marginal = m;
            let fd = (self.value(w + h) - self.value(w - h)) / (2.0 * h);
            if (fd - m).abs() > 1e-3 * (1.0 + m.abs()) {
                return Err(Error::InvalidUtility(format!(
                    "marginal inconsistent with value at w = {w}: u' = {m}, finite diff = {fd}"
                )));
            }
            let v = self.value(w);
            if v < self.bound() {
                let back = self.wage(v);
                if (back - w).abs() > 1e-6 * (1.0 + w) {
                    return Err(Error::InvalidUtility(format!(
                        "inverse inconsistent at w = {w}: u^-1(u(w)) = {back}"
                    )));
                }
            }
        }
        Ok(())
    }
}
