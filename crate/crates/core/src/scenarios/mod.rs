//! Constructions that exhibit the three pairwise conflicts between the
//! batch desiderata, each verified numerically on a concrete pool.
//!
//! * [`ic_vs_le`]: a local-efficient uniform-price outcome that leaves an
//!   arbitrage subset, so it cannot be incentive compatible.
//! * [`up_vs_le`]: a buyer/seller pair no uniform-price outcome can serve
//!   without breaking local efficiency or individual rationality.
//! * [`trilemma`]: the utility gap that breaks incentive compatibility for
//!   any mechanism with uniform pricing and weak local efficiency.

mod ic_vs_le;
mod trilemma;
mod up_vs_le;

use thiserror::Error;

use crate::amm::CurveError;
use crate::auditors::AuditError;
use crate::numerics::NumericsError;
use crate::orders::OrderError;

pub use ic_vs_le::{arbitrage_from_full_fill, ArbitrageConstruction, SellPriceSample};
pub use trilemma::{trilemma_certificate, ScenarioEquivalence, TrilemmaCertificate};
pub use up_vs_le::{buyer_seller_conflict, BuyerSellerConflict, PartialFillSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ScenarioError> {
    if ok { Ok(()) } else { Err(ScenarioError::Parameter(msg())) }
}
