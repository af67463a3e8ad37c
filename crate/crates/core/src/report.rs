//! Numbers that know where they came from.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Distribution propagation on the finite chain.
    Exact,
    /// Monte Carlo; carries a standard error.
    Mc,
    /// Closed-form evaluation.
    Analytic,
}

/// A reported value. `upper` is set when the value is the lower end of a
/// bracket `[value, upper]`; an infinite `upper` serializes as `null`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Bound>,
}

/// Upper end of a bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Estimate {
    pub fn analytic(value: f64) -> Self {
        Estimate {
            value,
            provenance: Provenance::Analytic,
            se: None,
            upper: None,
        }
    }

    pub fn mc(value: f64, se: f64) -> Self {
        Estimate {
            value,
            provenance: Provenance::Mc,
            se: Some(se),
            upper: None,
        }
    }

    pub fn exact_bracket(lower: f64, upper: Bound) -> Self {
        Estimate {
            value: lower,
            provenance: Provenance::Exact,
            se: None,
            upper: Some(upper),
        }
    }

    /// Largest value consistent with the estimate: the bracket's upper end,
    /// or the value itself.
    pub fn upper_value(&self) -> f64 {
        match self.upper {
            Some(Bound::Finite(u)) => u,
            Some(Bound::Unbounded) => f64::INFINITY,
            None => self.value,
        }
    }
}
