//! Deterministic batch mechanisms.
//!
//! Every mechanism is a pure function of `(curve, pool, batch, tol)`; none of
//! them look at an order's `aux` tag.

mod single_side;
mod top_bidder;
mod uniform_clearing;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amm::{Curve, CurveError, PoolState};
use crate::numerics::{NumericsError, Tolerances};
use crate::orders::{BatchResult, Order, OrderType, Outcome};

pub use single_side::single_side_uniform;
pub use top_bidder::top_bidder;
pub use uniform_clearing::{solve_clearing_rate, uniform_clearing, Branch, ClearingSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no clearing rate: {0}")]
    NoSolution(String),
    #[error("{0} orders are not accepted by this mechanism")]
    UnsupportedOrder(OrderType),
}

pub trait Mechanism: Send + Sync {
    fn run(
        &self,
        curve: &Curve,
        pool: &PoolState,
        batch: &[Order],
        tol: &Tolerances,
    ) -> Result<BatchResult, MechanismError>;
}

impl<F> Mechanism for F
where
    F: Fn(&Curve, &PoolState, &[Order], &Tolerances) -> Result<BatchResult, MechanismError>
        + Send
        + Sync,
{
    fn run(
        &self,
        curve: &Curve,
        pool: &PoolState,
        batch: &[Order],
        tol: &Tolerances,
    ) -> Result<BatchResult, MechanismError> {
        self(curve, pool, batch, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismId {
    #[serde(rename = "null")]
    Null,
    /// Single winner paying a second-price volume; incentive compatible
    /// and uniform pricing.
    #[serde(rename = "m1")]
    TopBidder,
    /// Two-sided uniform-price clearing against the pool; uniform pricing
    /// and weak local efficiency.
    #[serde(rename = "m2")]
    UniformClearing,
    /// Buy(X)-only uniform-price clearing.
    #[serde(rename = "ssu")]
    SingleSideUniform,
}

impl MechanismId {
    pub const ALL: [MechanismId; 4] = [
        MechanismId::Null,
        MechanismId::TopBidder,
        MechanismId::UniformClearing,
        MechanismId::SingleSideUniform,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismId::Null => "null",
            MechanismId::TopBidder => "m1",
            MechanismId::UniformClearing => "m2",
            MechanismId::SingleSideUniform => "ssu",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mechanism {s:?} (expected null, m1, m2 or ssu)"))
    }
}

impl Mechanism for MechanismId {
    fn run(
        &self,
        curve: &Curve,
        pool: &PoolState,
        batch: &[Order],
        tol: &Tolerances,
    ) -> Result<BatchResult, MechanismError> {
        match self {
            MechanismId::Null => Ok(null_mechanism(curve, pool, batch)),
            MechanismId::TopBidder => Ok(top_bidder(curve, pool, batch, tol)),
            MechanismId::UniformClearing => uniform_clearing(curve, pool, batch, tol),
            MechanismId::SingleSideUniform => single_side_uniform(curve, pool, batch, tol),
        }
    }
}

/// Leaves every order unexecuted.
pub fn null_mechanism(_curve: &Curve, pool: &PoolState, batch: &[Order]) -> BatchResult {
    BatchResult::unchanged(*pool, batch.len())
}

/// Net gain of an order filled to fraction `f` of its quantity at price `p`.
pub(crate) fn fill_at_price(order: &Order, f: f64, p: f64) -> Outcome {
    let q = f * order.qty;
    match order.otype {
        OrderType::BuyX => Outcome::new(q, -p * q),
        OrderType::SellY => Outcome::new(q / p, -q),
        OrderType::SellX => Outcome::new(-q, p * q),
        OrderType::BuyY => Outcome::new(-q / p, q),
    }
}
