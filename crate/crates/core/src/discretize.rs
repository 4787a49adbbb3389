//! Refinement of numerical decompositions into practical ones with entries in
//! `{−1, 0, 1}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::error::{Error, Result};
use crate::layout::{expand, StructuredPoint};
use crate::mmt::{verify_pd, Mmt, Verdict};
use crate::pdfile::PdRecord;
use crate::solver::{al_solve_from, HKind, SolverConfig, Status};

/// `x(x − 1)(x + 1)` element-wise.
pub fn h_discr(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v * (v - 1.0) * (v + 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretizeConfig {
    /// Weight of the cubic constraint.
    pub h_scale: f64,
    /// Largest accepted distance of an entry from its rounded value.
    pub rounding_threshold: f64,
    /// Budgets and tolerances; its `h_kind` is replaced by the cubic.
    pub solver: SolverConfig,
}

impl Default for DiscretizeConfig {
    fn default() -> Self {
        DiscretizeConfig { h_scale: 0.1, rounding_threshold: 0.25, solver: SolverConfig::default() }
    }
}

impl DiscretizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_scale > 0.0) || !self.h_scale.is_finite() {
            return Err(Error::Config(format!("h_scale must be positive, got {}", self.h_scale)));
        }
        if !(self.rounding_threshold > 0.0 && self.rounding_threshold < 0.5) {
            return Err(Error::Config(format!(
                "rounding threshold must lie in (0, 0.5), got {}",
                self.rounding_threshold
            )));
        }
        self.solver_config().validate()
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig { h_kind: HKind::Discr { scale: self.h_scale }, ..self.solver }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The constrained solve ended away from `{−1, 0, 1}` without converging.
    NonConvergent,
    /// Converged, but some entry is farther than the threshold from its target.
    RoundingGap,
    /// Rounded factors do not reproduce the tensor.
    IntegerVerify,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizeFailure {
    pub reason: FailureReason,
    /// Largest distance of an entry from its nearest value in `{−1, 0, 1}`.
    pub max_distance: f64,
    pub status: Status,
    pub cost: f64,
}

impl std::fmt::Display for DiscretizeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} (max rounding distance {:.3e}, solver {:?}, cost {:.3e})",
            self.reason, self.max_distance, self.status, self.cost
        )
    }
}

/// Nearest element of `{−1, 0, 1}`.
pub fn round_ternary(x: f64) -> f64 {
    // Adding zero turns -0 into +0.
    x.round().clamp(-1.0, 1.0) + 0.0
}

/// Re-solves from `start` with the constraint `h_scale · h_discr(x) = 0` and
/// fresh multipliers, rounds, and certifies the result in integer arithmetic.
///
/// Rounding is attempted whenever every entry lies within the threshold, even
/// if the solver did not meet all its tolerances; the integer check decides.
pub fn discretize(start: &StructuredPoint, tensor: &Mmt, config: &DiscretizeConfig) -> Result<PdRecord> {
    config.validate()?;
    let layout = *start.layout();
    let outcome = al_solve_from(start.clone(), tensor, &config.solver_config())?;
    let x = outcome.point.x();
    let rounded: Vec<f64> = x.iter().map(|&v| round_ternary(v)).collect();
    let max_distance = x.iter().zip(&rounded).fold(0.0f64, |a, (v, r)| a.max((v - r).abs()));
    let fail = |reason| {
        Error::Discretize(DiscretizeFailure { reason, max_distance, status: outcome.status, cost: outcome.cost() })
    };
    if !(max_distance <= config.rounding_threshold) {
        return Err(fail(if outcome.status == Status::Exact {
            FailureReason::RoundingGap
        } else {
            FailureReason::NonConvergent
        }));
    }
    let factors = expand(&StructuredPoint::new(layout, rounded)?);
    if verify_pd(&factors, tensor, 0.0)? != Verdict::ExactInteger {
        return Err(fail(if outcome.status == Status::Exact {
            FailureReason::IntegerVerify
        } else {
            FailureReason::NonConvergent
        }));
    }
    let structure = (!layout.is_unstructured()).then(|| (layout.s(), layout.t()));
    let mut provenance = Map::new();
    provenance.insert(
        "discretize".into(),
        json!({
            "h_scale": config.h_scale,
            "rounding_threshold": config.rounding_threshold,
            "max_distance": max_distance,
            "solver_status": outcome.status,
            "iterations": outcome.iterations,
        }),
    );
    PdRecord::new(factors, structure, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_discr_examples() {
        assert_eq!(h_discr(&[-1.0, 0.0, 1.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(h_discr(&[2.0]), vec![6.0]);
        assert_eq!(h_discr(&[0.5]), vec![-0.375]);
    }

    #[test]
    fn ternary_rounding() {
        assert_eq!(round_ternary(0.74), 1.0);
        assert_eq!(round_ternary(-3.2), -1.0);
        assert_eq!(round_ternary(0.2), 0.0);
    }

    #[test]
    fn threshold_must_be_below_half() {
        let bad = DiscretizeConfig { rounding_threshold: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        DiscretizeConfig::default().validate().unwrap();
    }
}
