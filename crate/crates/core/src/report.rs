//! Audit reports and the structured evidence attached to failures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::orders::{Order, Outcome};
use crate::preferences::PrefResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "well_formed")]
    WellFormed,
    #[serde(rename = "up")]
    UniformPricing,
    #[serde(rename = "le")]
    LocalEfficiency,
    #[serde(rename = "wle")]
    WeakLocalEfficiency,
    #[serde(rename = "arbitrage")]
    ArbitrageResilience,
    #[serde(rename = "ic")]
    IncentiveCompatibility,
}

impl Property {
    pub fn as_str(&self) -> &'static str {
        match self {
            Property::WellFormed => "well_formed",
            Property::UniformPricing => "up",
            Property::LocalEfficiency => "le",
            Property::WeakLocalEfficiency => "wle",
            Property::ArbitrageResilience => "arbitrage",
            Property::IncentiveCompatibility => "ic",
        }
    }

    /// Whether a passing report is a proof for the audited instance.
    ///
    /// The IC audit searches a finite deviation grid, so a pass only means
    /// no violation was found.
    pub fn pass_is_conclusive(&self) -> bool {
        !matches!(self, Property::IncentiveCompatibility)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Well-formedness clauses an outcome can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    ReasonableFulfillment,
    NoFreeLunch,
    IndividualRationality,
    Conformance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A single order (or, for conformance, the batch as a whole).
    Clause { index: Option<usize>, clause: Clause, detail: String },
    /// Two executed orders trading at different rates.
    RateMismatch { first: usize, second: usize, first_rate: f64, second_rate: f64 },
    /// An order left unfulfilled although the pool's ending rate still suits it.
    Unfulfilled { index: usize, order_rate: String, end_rate: f64 },
    /// A subset of orders jointly gaining in both assets.
    Subset { indices: Vec<usize>, dx: f64, dy: f64 },
    Deviation(Box<DeviationWitness>),
}

/// A strategic play that beat honest reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub orders: Vec<Order>,
    /// Indices (into the other users' orders) that were censored.
    pub censored: Vec<usize>,
    /// Rewritten arrival tags of other users' orders.
    pub aux_rewrites: Vec<(usize, f64)>,
    pub honest_outcome: Outcome,
    pub deviant_outcome: Outcome,
    pub preference: PrefResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: Property,
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl AuditReport {
    pub fn pass(property: Property) -> Self {
        Self { property, passed: true, witness: None }
    }

    pub fn fail(property: Property, witness: Witness) -> Self {
        Self { property, passed: false, witness: Some(witness) }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.passed, self.property.pass_is_conclusive()) {
            (true, true) => write!(f, "{}: pass", self.property),
            (true, false) => write!(f, "{}: no violation found on grid", self.property),
            (false, _) => write!(f, "{}: FAIL", self.property),
        }
    }
}
