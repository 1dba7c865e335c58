//! Utility rankings over outcomes.
//!
//! Sell types are ranked by a quasilinear utility with a hard budget, which
//! gives a total order. Buy types compare outcomes under both extreme
//! valuations of units beyond the intrinsic demand (full rate, and zero),
//! which only gives a partial order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ExtRate;
use crate::orders::{Order, OrderError, OrderType, Outcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreferenceError {
    #[error("{0} is not a sell type")]
    NotSellType(OrderType),
}

/// A user's true `(type, rate, qty, aux)`.
///
/// Same shape as [`Order`], except that a zero quantity is allowed: it
/// models a user with no intrinsic demand (an arbitrageur).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicType {
    #[serde(rename = "type")]
    pub otype: OrderType,
    pub rate: ExtRate,
    pub qty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<f64>,
}

impl IntrinsicType {
    pub fn new(otype: OrderType, rate: ExtRate, qty: f64) -> Result<Self, OrderError> {
        if !(qty >= 0.0 && qty.is_finite()) {
            return Err(OrderError::Quantity(qty));
        }
        Ok(Self { otype, rate, qty, aux: None })
    }

    pub fn with_aux(mut self, aux: f64) -> Result<Self, OrderError> {
        if !(aux >= 0.0 && aux.is_finite()) {
            return Err(OrderError::Aux(aux));
        }
        self.aux = Some(aux);
        Ok(self)
    }

    /// A zero-demand Buy(X) type at the market rate.
    pub fn arbitrageur(r0: f64) -> Self {
        Self { otype: OrderType::BuyX, rate: ExtRate::Finite(r0), qty: 0.0, aux: None }
    }

    /// The truthful report; nothing for a zero-demand type.
    pub fn honest_order(&self) -> Option<Order> {
        (self.qty > 0.0).then_some(Order {
            otype: self.otype,
            rate: self.rate,
            qty: self.qty,
            aux: self.aux,
        })
    }
}

impl From<Order> for IntrinsicType {
    fn from(o: Order) -> Self {
        Self { otype: o.otype, rate: o.rate, qty: o.qty, aux: o.aux }
    }
}

/// How `o1` ranks against `o0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefResult {
    StrictlyWorse,
    Equivalent,
    StrictlyBetter,
    Incomparable,
}

impl PrefResult {
    /// The same comparison seen from the other side.
    pub fn flip(self) -> Self {
        match self {
            PrefResult::StrictlyWorse => PrefResult::StrictlyBetter,
            PrefResult::StrictlyBetter => PrefResult::StrictlyWorse,
            other => other,
        }
    }
}

/// Quasilinear utility of a sell type, `-inf` once the budget is breached.
pub fn sell_utility(t: &IntrinsicType, o: &Outcome) -> Result<f64, PreferenceError> {
    let spent = match t.otype {
        OrderType::SellX => -o.dx,
        OrderType::SellY => -o.dy,
        other => return Err(PreferenceError::NotSellType(other)),
    };
    if spent > t.qty {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(match t.rate {
        ExtRate::Finite(r) => o.dx * r + o.dy,
        ExtRate::Infinity if o.dx == 0.0 => o.dy,
        ExtRate::Infinity => o.dx.signum() * f64::INFINITY,
    })
}

fn sign(v: f64, slack: f64) -> i8 {
    if v > slack {
        1
    } else if v < -slack {
        -1
    } else {
        0
    }
}

/// Sign of `dx * r + dy`, lexicographic in `(dx, dy)` for an unbounded rate.
fn value_sign(rate: ExtRate, dx: f64, dy: f64, slack: f64) -> i8 {
    match rate {
        ExtRate::Finite(r) => sign(dx * r + dy, slack),
        ExtRate::Infinity => match sign(dx, slack) {
            0 => sign(dy, slack),
            s => s,
        },
    }
}

/// Ranks `o1` against `o0` for a user of type `t`.
pub fn compare(t: &IntrinsicType, o0: &Outcome, o1: &Outcome) -> PrefResult {
    compare_with_slack(t, o0, o1, 0.0)
}

/// [`compare`], treating utility differences within `slack` as ties.
pub fn compare_with_slack(t: &IntrinsicType, o0: &Outcome, o1: &Outcome, slack: f64) -> PrefResult {
    let q = t.qty;
    let dx = o1.dx - o0.dx;
    let dy = o1.dy - o0.dy;
    match t.otype {
        OrderType::SellX | OrderType::SellY => {
            let spent = |o: &Outcome| if t.otype == OrderType::SellX { -o.dx } else { -o.dy };
            let ok0 = spent(o0) <= q + slack;
            let ok1 = spent(o1) <= q + slack;
            match (ok0, ok1) {
                (false, false) => PrefResult::Equivalent,
                (true, false) => PrefResult::StrictlyWorse,
                (false, true) => PrefResult::StrictlyBetter,
                (true, true) => match value_sign(t.rate, dx, dy, slack).cmp(&0) {
                    Ordering::Less => PrefResult::StrictlyWorse,
                    Ordering::Equal => PrefResult::Equivalent,
                    Ordering::Greater => PrefResult::StrictlyBetter,
                },
            }
        }
        OrderType::BuyX | OrderType::BuyY => {
            let full = value_sign(t.rate, dx, dy, slack);
            let capped = if t.otype == OrderType::BuyX {
                value_sign(t.rate, o1.dx.min(q) - o0.dx.min(q), dy, slack)
            } else {
                value_sign(t.rate, dx, o1.dy.min(q) - o0.dy.min(q), slack)
            };
            match (full, capped) {
                (0, 0) => PrefResult::Equivalent,
                (a, b) if a >= 0 && b >= 0 => PrefResult::StrictlyBetter,
                (a, b) if a <= 0 && b <= 0 => PrefResult::StrictlyWorse,
                _ => PrefResult::Incomparable,
            }
        }
    }
}

/// Compares joint outcomes of several orders by summing them first.
pub fn compare_joint(t: &IntrinsicType, honest: &[Outcome], deviant: &[Outcome]) -> PrefResult {
    compare(t, &honest.iter().sum(), &deviant.iter().sum())
}
