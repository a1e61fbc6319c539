//! Monitoring cost: a permutation-symmetric function of the output signal's
//! probability vector, scaled by the unit price mu.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Signature of a user-supplied information measure on probability vectors.
pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// How the information carried by the output signal is priced.
#[derive(Clone)]
pub enum CostKind {
    /// f(N) for the number of nonempty categories; `table[k]` is f(k+1)
    /// and must be strictly increasing.
    RatingScale { table: Vec<f64> },
    /// Shannon entropy of the signal in bits.
    EntropyBits,
    /// Arbitrary permutation-symmetric function of the probability vector.
    Custom(CostFn),
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::RatingScale { table } => {
                f.debug_struct("RatingScale").field("table", table).finish()
            }
            CostKind::EntropyBits => write!(f, "EntropyBits"),
            CostKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Cost specification: kind, price mu, and the cell budget K.
#[derive(Debug, Clone)]
pub struct MonitoringCostSpec {
    pub kind: CostKind,
    pub mu: f64,
    pub k_max: usize,
}

impl MonitoringCostSpec {
    pub fn new(kind: CostKind, mu: f64, k_max: usize) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be >= 0, got {mu}")));
        }
        if k_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "cell budget K must be at least 2, got {k_max}"
            )));
        }
        if let CostKind::RatingScale { table } = &kind {
            if table.len() < k_max {
                return Err(Error::InvalidArgument(format!(
                    "rating-scale table covers {} scales, K = {k_max}",
                    table.len()
                )));
            }
            if table.windows(2).any(|w| w[0] >= w[1]) || table.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidArgument(
                    "rating-scale table must be nonnegative and strictly increasing".into(),
                ));
            }
        }
        Ok(MonitoringCostSpec { kind, mu, k_max })
    }

    /// f(N) = N, the linear rating-scale table.
    pub fn linear_rating_scale(mu: f64, k_max: usize) -> Result<Self> {
        let table = (1..=k_max).map(|n| n as f64).collect();
        Self::new(CostKind::RatingScale { table }, mu, k_max)
    }

    pub fn entropy_bits(mu: f64, k_max: usize) -> Result<Self> {
        Self::new(CostKind::EntropyBits, mu, k_max)
    }

    /// Unweighted information content H of a signal distribution.
    pub fn evaluate(&self, masses: &[f64]) -> Result<f64> {
        monitoring_cost(self, masses)
    }
}

/// H(masses) for the given cost kind. Rating-scale counts the nonempty
/// categories; entropy is -sum pi log2 pi over the positive entries.
pub fn monitoring_cost(spec: &MonitoringCostSpec, masses: &[f64]) -> Result<f64> {
    if masses.is_empty() || masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::MalformedProbabilities(format!(
            "bad probability vector {masses:?}"
        )));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedProbabilities(format!(
            "probabilities sum to {total}"
        )));
    }
    match &spec.kind {
        CostKind::RatingScale { table } => {
            let n = masses.iter().filter(|m| **m > 0.0).count();
            table
                .get(n.saturating_sub(1))
                .copied()
                .ok_or(Error::CellBudgetExceeded {
                    cells: n,
                    k: table.len(),
                })
        }
        CostKind::EntropyBits => Ok(entropy_bits(masses)),
        CostKind::Custom(h) => Ok(h(masses)),
    }
}

/// -sum pi log2 pi over positive entries.
pub fn entropy_bits(masses: &[f64]) -> f64 {
    -masses
        .iter()
        .filter(|m| **m > 0.0)
        .map(|m| m * m.log2())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_example_split() {
        let spec = MonitoringCostSpec::entropy_bits(1.0, 4).unwrap();
        let h = spec.evaluate(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((h - 0.9182958).abs() < 1e-6, "h = {h}");
        assert_eq!(spec.evaluate(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn rating_scale_counts_cells() {
        let spec = MonitoringCostSpec::linear_rating_scale(1.0, 5).unwrap();
        assert_eq!(spec.evaluate(&[0.5, 0.3, 0.2]).unwrap(), 3.0);
        assert_eq!(spec.evaluate(&[0.5, 0.5, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn rejects_malformed_probabilities() {
        let spec = MonitoringCostSpec::entropy_bits(1.0, 4).unwrap();
        assert!(spec.evaluate(&[0.5, 0.4]).is_err());
        assert!(spec.evaluate(&[0.5, -0.5, 1.0]).is_err());
    }

    #[test]
    fn permutation_symmetry_holds_on_samples() {
        let spec = MonitoringCostSpec::entropy_bits(1.0, 4).unwrap();
        let a = spec.evaluate(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = spec.evaluate(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert!((a - b).abs() < 1e-12);
        let rs = MonitoringCostSpec::linear_rating_scale(1.0, 4).unwrap();
        let a = rs.evaluate(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = rs.evaluate(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merging_a_zero_cell_never_raises_cost() {
        // Assumption 1(b): dropping an empty category weakly lowers H
        let spec = MonitoringCostSpec::entropy_bits(1.0, 4).unwrap();
        let merged = spec.evaluate(&[0.7, 0.3]).unwrap();
        let padded = spec.evaluate(&[0.7, 0.3, 0.0]).unwrap();
        assert!(merged <= padded + 1e-12);
        let rs = MonitoringCostSpec::linear_rating_scale(1.0, 4).unwrap();
        assert!(rs.evaluate(&[0.7, 0.3]).unwrap() <= rs.evaluate(&[0.7, 0.3, 0.0]).unwrap());
    }

    #[test]
    fn table_must_increase() {
        assert!(MonitoringCostSpec::new(
            CostKind::RatingScale {
                table: vec![1.0, 1.0, 2.0]
            },
            1.0,
            3
        )
        .is_err());
    }
}
