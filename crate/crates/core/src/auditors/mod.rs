//! Checkers for the batch-level desiderata.
//!
//! Each checker returns an [`AuditReport`]; a failing report always carries
//! a witness that pins down the violation.

mod ic;

use thiserror::Error;

use crate::amm::{Curve, PoolState};
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{BatchResult, Order, OrderError, Outcome};
use crate::report::{AuditReport, Property, Witness};

pub use ic::{
    enumerate_deviations, ic_audit, replay_deviation, Deviation, DeviationGrid, GridPreset,
    StrategyModel,
};

/// Largest batch the exhaustive subset search accepts.
pub const MAX_SUBSET_SEARCH: usize = 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("subset search over {0} orders exceeds the cap of {MAX_SUBSET_SEARCH}")]
    TooLarge(usize),
    #[error("invalid deviation grid: {0}")]
    Grid(&'static str),
    #[error(transparent)]
    Mechanism(#[from] crate::mechanisms::MechanismError),
}

fn aligned(batch: &[Order], result: &BatchResult) -> Result<(), OrderError> {
    if batch.len() != result.outcomes.len() {
        return Err(OrderError::Alignment { orders: batch.len(), outcomes: result.outcomes.len() });
    }
    Ok(())
}

/// Passes iff every order that moved X traded at the same rate, up to
/// `tol_audit`.
pub fn check_uniform_pricing(
    batch: &[Order],
    result: &BatchResult,
    tol: &Tolerances,
) -> Result<AuditReport, AuditError> {
    aligned(batch, result)?;
    let mut executed = result.outcomes.iter().enumerate().filter_map(|(i, o)| o.rate().map(|r| (i, r)));
    let Some((first, first_rate)) = executed.next() else {
        return Ok(AuditReport::pass(Property::UniformPricing));
    };
    for (second, second_rate) in executed {
        if (second_rate - first_rate).abs() > tol.tol_audit {
            return Ok(AuditReport::fail(
                Property::UniformPricing,
                Witness::RateMismatch { first, second, first_rate, second_rate },
            ));
        }
    }
    Ok(AuditReport::pass(Property::UniformPricing))
}

/// Whether an order would trade at the initial market rate `r0`: demand for
/// X at or above it, supply at or below it.
pub fn is_eligible(order: &Order, r0: f64) -> bool {
    if order.otype.demands_x() {
        order.rate.cmp_scalar(r0).is_ge()
    } else {
        order.rate.cmp_scalar(r0).is_le()
    }
}

/// Passes iff no order left short of its quantity could still trade
/// profitably with the pool at its ending marginal rate.
///
/// With `weak` set only orders eligible at the starting rate of `pool` are
/// considered. Unfulfilled demand at an unbounded rate always fails.
pub fn check_local_efficiency(
    curve: &Curve,
    pool: &PoolState,
    batch: &[Order],
    result: &BatchResult,
    weak: bool,
    tol: &Tolerances,
) -> Result<AuditReport, AuditError> {
    aligned(batch, result)?;
    let property = if weak { Property::WeakLocalEfficiency } else { Property::LocalEfficiency };
    let t = tol.tol_audit;
    let r0 = curve.marginal_rate(pool);
    let end_rate = curve.marginal_rate(&result.end_pool);
    for (index, (order, o)) in batch.iter().zip(&result.outcomes).enumerate() {
        if order.otype.filled_qty(o) >= order.qty - t {
            continue;
        }
        if weak && !is_eligible(order, r0) {
            continue;
        }
        let wants_more = if order.otype.demands_x() {
            match order.rate {
                ExtRate::Infinity => true,
                ExtRate::Finite(r) => end_rate < r - t,
            }
        } else {
            match order.rate {
                ExtRate::Infinity => false,
                ExtRate::Finite(r) => end_rate > r + t,
            }
        };
        if wants_more {
            return Ok(AuditReport::fail(
                property,
                Witness::Unfulfilled { index, order_rate: order.rate.to_string(), end_rate },
            ));
        }
    }
    Ok(AuditReport::pass(property))
}

/// Searches every non-empty subset of orders, in lexicographic order of
/// their sorted index lists, for one whose joint outcome gains weakly in
/// both assets and strictly in one (all beyond `tol_audit`).
pub fn find_arbitrage_subset(result: &BatchResult, tol: &Tolerances) -> Result<AuditReport, AuditError> {
    let outcomes = &result.outcomes;
    if outcomes.len() > MAX_SUBSET_SEARCH {
        return Err(AuditError::TooLarge(outcomes.len()));
    }
    let t = tol.tol_audit;
    let mut stack = Vec::with_capacity(outcomes.len());
    match search(outcomes, 0, Outcome::ZERO, &mut stack, t) {
        Some(sum) => Ok(AuditReport::fail(
            Property::ArbitrageResilience,
            Witness::Subset { indices: stack, dx: sum.dx, dy: sum.dy },
        )),
        None => Ok(AuditReport::pass(Property::ArbitrageResilience)),
    }
}

fn search(outcomes: &[Outcome], from: usize, sum: Outcome, stack: &mut Vec<usize>, t: f64) -> Option<Outcome> {
    for i in from..outcomes.len() {
        let next = sum + outcomes[i];
        stack.push(i);
        if next.dx >= -t && next.dy >= -t && next.dx.max(next.dy) > t {
            return Some(next);
        }
        if let Some(found) = search(outcomes, i + 1, next, stack, t) {
            return Some(found);
        }
        stack.pop();
    }
    None
}
