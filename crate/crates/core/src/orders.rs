//! Orders, per-order outcomes, batch results and the well-formedness audit.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amm::{Curve, PoolState};
use crate::numerics::{ExtRate, Tolerances};
use crate::report::{AuditReport, Clause, Property, Witness};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("order quantity must be finite and > 0, got {0}")]
    Quantity(f64),
    #[error("aux tag must be finite and >= 0, got {0}")]
    Aux(f64),
    #[error("result has {outcomes} outcomes for a batch of {orders} orders")]
    Alignment { orders: usize, outcomes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderType {
    #[serde(rename = "buy_x")]
    BuyX,
    #[serde(rename = "buy_y")]
    BuyY,
    #[serde(rename = "sell_x")]
    SellX,
    #[serde(rename = "sell_y")]
    SellY,
}

impl OrderType {
    pub const ALL: [OrderType; 4] =
        [OrderType::BuyX, OrderType::BuyY, OrderType::SellX, OrderType::SellY];

    /// Buy(X) and Sell(Y) take X out of the market; their rate caps the
    /// price paid per X. Buy(Y) and Sell(X) supply X; their rate floors it.
    pub fn demands_x(&self) -> bool {
        matches!(self, OrderType::BuyX | OrderType::SellY)
    }

    /// Whether the quantity is denominated in Y.
    pub fn y_denominated(&self) -> bool {
        matches!(self, OrderType::BuyY | OrderType::SellY)
    }

    pub fn is_buy(&self) -> bool {
        matches!(self, OrderType::BuyX | OrderType::BuyY)
    }

    /// Quantity traded in the order's own asset, positive in the order's
    /// direction.
    pub fn filled_qty(&self, o: &Outcome) -> f64 {
        match self {
            OrderType::BuyX => o.dx,
            OrderType::BuyY => o.dy,
            OrderType::SellX => -o.dx,
            OrderType::SellY => -o.dy,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OrderType::BuyX => "buy_x",
            OrderType::BuyY => "buy_y",
            OrderType::SellX => "sell_x",
            OrderType::SellY => "sell_y",
        }
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrderRepr {
    #[serde(rename = "type")]
    otype: OrderType,
    rate: ExtRate,
    qty: f64,
    #[serde(default)]
    aux: Option<f64>,
}

/// A limit order `(type, rate, qty, aux)`.
///
/// `rate` is always quoted in Y per X. `qty` is in the order's own asset:
/// X for Buy(X)/Sell(X), Y for Buy(Y)/Sell(Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrderRepr")]
pub struct Order {
    #[serde(rename = "type")]
    pub otype: OrderType,
    pub rate: ExtRate,
    pub qty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<f64>,
}

impl TryFrom<OrderRepr> for Order {
    type Error = OrderError;

    fn try_from(r: OrderRepr) -> Result<Self, OrderError> {
        let order = Order::new(r.otype, r.rate, r.qty)?;
        match r.aux {
            Some(a) => order.with_aux(a),
            None => Ok(order),
        }
    }
}

impl Order {
    pub fn new(otype: OrderType, rate: ExtRate, qty: f64) -> Result<Self, OrderError> {
        if !(qty > 0.0 && qty.is_finite()) {
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

    /// Shorthand for fixtures; panics on invalid input.
    pub fn buy_x(rate: f64, qty: f64) -> Self {
        Self::new(OrderType::BuyX, ExtRate::finite(rate).unwrap(), qty).unwrap()
    }

    pub fn sell_x(rate: f64, qty: f64) -> Self {
        Self::new(OrderType::SellX, ExtRate::finite(rate).unwrap(), qty).unwrap()
    }

    pub fn buy_y(rate: f64, qty: f64) -> Self {
        Self::new(OrderType::BuyY, ExtRate::finite(rate).unwrap(), qty).unwrap()
    }

    pub fn sell_y(rate: f64, qty: f64) -> Self {
        Self::new(OrderType::SellY, ExtRate::finite(rate).unwrap(), qty).unwrap()
    }

    /// Whether an executed price `p` (Y per X) respects this order's limit.
    pub fn accepts_price(&self, p: f64, slack: f64) -> bool {
        match (self.otype.demands_x(), self.rate) {
            (true, ExtRate::Infinity) => true,
            (true, ExtRate::Finite(r)) => p <= r + slack,
            (false, ExtRate::Infinity) => false,
            (false, ExtRate::Finite(r)) => p >= r - slack,
        }
    }
}

/// Net gain `(dx, dy)` of one order or of a set of orders.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub dx: f64,
    pub dy: f64,
}

impl Outcome {
    pub const ZERO: Outcome = Outcome { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }

    /// Executed exchange rate `-dy/dx`, if any X changed hands.
    pub fn rate(&self) -> Option<f64> {
        (self.dx != 0.0).then(|| -self.dy / self.dx)
    }
}

impl Add for Outcome {
    type Output = Outcome;

    fn add(self, rhs: Outcome) -> Outcome {
        Outcome { dx: self.dx + rhs.dx, dy: self.dy + rhs.dy }
    }
}

impl Sum for Outcome {
    fn sum<I: Iterator<Item = Outcome>>(iter: I) -> Outcome {
        iter.fold(Outcome::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Outcome> for Outcome {
    fn sum<I: Iterator<Item = &'a Outcome>>(iter: I) -> Outcome {
        iter.copied().sum()
    }
}

/// Output of one mechanism run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub outcomes: Vec<Outcome>,
    pub end_pool: PoolState,
    pub uniform_price: Option<f64>,
}

impl BatchResult {
    /// Every order gets nothing and the pool is untouched.
    pub fn unchanged(pool: PoolState, n: usize) -> Self {
        Self { outcomes: vec![Outcome::ZERO; n], end_pool: pool, uniform_price: None }
    }

    pub fn aggregate(&self) -> Outcome {
        self.outcomes.iter().sum()
    }
}

/// Audits reasonable fulfillment, no free lunch, individual rationality and
/// conformance to the curve, in that order, order by order.
///
/// Outcomes with both components within `tol_audit` of zero count as
/// empty: they satisfy no-free-lunch and have no executed rate to check.
pub fn check_well_formed(
    curve: &Curve,
    pool: &PoolState,
    batch: &[Order],
    result: &BatchResult,
    tol: &Tolerances,
) -> Result<AuditReport, OrderError> {
    if batch.len() != result.outcomes.len() {
        return Err(OrderError::Alignment { orders: batch.len(), outcomes: result.outcomes.len() });
    }
    let t = tol.tol_audit;
    let fail = |index: Option<usize>, clause: Clause, detail: String| {
        Ok(AuditReport::fail(Property::WellFormed, Witness::Clause { index, clause, detail }))
    };

    for (i, (order, o)) in batch.iter().zip(&result.outcomes).enumerate() {
        let filled = order.otype.filled_qty(o);
        if filled < -t || filled > order.qty + t {
            return fail(
                Some(i),
                Clause::ReasonableFulfillment,
                format!("filled {filled} outside [0, {}]", order.qty),
            );
        }
        let negligible = o.dx.abs() <= t && o.dy.abs() <= t;
        if negligible {
            continue;
        }
        if !(o.dx * o.dy < 0.0) {
            return fail(Some(i), Clause::NoFreeLunch, format!("outcome ({}, {})", o.dx, o.dy));
        }
        let rate = -o.dy / o.dx;
        if !order.accepts_price(rate, t) {
            return fail(
                Some(i),
                Clause::IndividualRationality,
                format!("executed rate {rate} violates limit {}", order.rate),
            );
        }
    }

    let total = result.aggregate();
    let implied_x = pool.x_reserve - total.dx;
    let implied_y = pool.y_reserve - total.dy;
    let Ok(implied) = PoolState::new(implied_x, implied_y) else {
        return fail(None, Clause::Conformance, format!("pool depleted to ({implied_x}, {implied_y})"));
    };
    let drift = curve.drift(&implied);
    if drift > t {
        return fail(None, Clause::Conformance, format!("potential drift {drift:e}"));
    }
    let end = &result.end_pool;
    if (end.x_reserve - implied.x_reserve).abs() > t * implied.x_reserve.max(1.0)
        || (end.y_reserve - implied.y_reserve).abs() > t * implied.y_reserve.max(1.0)
    {
        return fail(
            None,
            Clause::Conformance,
            format!(
                "reported end pool ({}, {}) differs from flows ({}, {})",
                end.x_reserve, end.y_reserve, implied.x_reserve, implied.y_reserve
            ),
        );
    }
    Ok(AuditReport::pass(Property::WellFormed))
}
