use serde::Serialize;

use super::{require, ScenarioError};
use crate::amm::{Curve, PoolState};
use crate::auditors::{check_local_efficiency, check_uniform_pricing};
use crate::numerics::{bisect_monotone, ExtRate, Tolerances};
use crate::orders::{BatchResult, Order, OrderType, Outcome};
use crate::report::AuditReport;

/// Two Buy(X) users with unbounded quantities and rates `r1 > r2`, and the
/// only allocation an incentive compatible mechanism with uniform pricing
/// and weak local efficiency could give them.
///
/// `u1_deviate` is what the first user gets by bidding `(inf, delta_x)`
/// instead. A positive `gap` means the honest report is beaten.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilemmaCertificate {
    pub r1: f64,
    pub r2: f64,
    /// Volume whose average price is `r2`.
    pub delta_x: f64,
    pub delta_y: f64,
    /// Ending rate after buying `delta_x`.
    pub r2_star: f64,
    pub x_tot: f64,
    pub x1: f64,
    pub x2: f64,
    pub u1_truthful: f64,
    pub u1_deviate: f64,
    pub gap: f64,
    /// Each user's marginal payment at `(x1, x2)`.
    pub partials: [f64; 2],
    pub equivalence: ScenarioEquivalence,
    /// Whether every internal consistency check held.
    pub consistent: bool,
}

impl TrilemmaCertificate {
    pub fn deviation_profitable(&self) -> bool {
        self.gap > 0.0
    }
}

/// Re-derives each user's allocation when the other bids its certified
/// quantity at an unbounded rate, and audits the resulting batches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEquivalence {
    /// First user's allocation against `(inf, x2)`.
    pub x1_against_fixed: f64,
    /// Second user's allocation against `(inf, x1)`.
    pub x2_against_fixed: f64,
    pub first_batch: Vec<Order>,
    pub second_batch: Vec<Order>,
    pub audits: Vec<AuditReport>,
    pub matches: bool,
}

/// Builds the certificate for `r2 > r0` and `r1` strictly between `r2` and
/// the ending rate `r2*` of the `r2`-priced volume.
///
/// The total volume solves `r_end(x) + r_avg(x) = r1 + r2`. The first user's
/// share then makes its marginal payment equal `r1`, and the second's
/// equal `r2`.
pub fn trilemma_certificate(
    curve: &Curve,
    pool: &PoolState,
    r2: f64,
    r1: f64,
    tol: &Tolerances,
) -> Result<TrilemmaCertificate, ScenarioError> {
    let r0 = curve.marginal_rate(pool);
    require(r2.is_finite() && r2 > r0, || format!("r2 must exceed the market rate {r0}, got {r2}"))?;
    let delta_x = curve.x_for_avg_rate(pool, r2)?;
    let delta_y = curve.y_of_x(pool.x_reserve - delta_x)? - pool.y_reserve;
    let r2_star = curve.end_rate(pool, delta_x)?;
    require(r1 > r2 && r1 < r2_star, || format!("r1 must lie in ({r2}, {r2_star}), got {r1}"))?;

    let rates = |x: f64| -> (f64, f64) {
        (
            curve.end_rate(pool, x).unwrap_or(f64::INFINITY),
            curve.avg_buy_rate(pool, x).unwrap_or(f64::INFINITY),
        )
    };
    let x_tot = bisect_monotone(
        |x| {
            let (e, a) = rates(x);
            e + a
        },
        0.0,
        delta_x,
        r1 + r2,
        tol,
    )?;
    let (r_end, r_avg) = rates(x_tot);
    let x1 = x_tot * (r1 - r_avg) / (r_end - r_avg);
    let x2 = x_tot - x1;
    let u1_truthful = x1 * (r1 - r_avg);
    let u1_deviate = delta_x * (r1 - r2);
    let partials = [
        curve.uniform_payment_gradient(pool, x1, x2)?,
        curve.uniform_payment_gradient(pool, x2, x1)?,
    ];

    let equivalence = equivalence(curve, pool, r1, r2, x1, x2, tol)?;
    let t = tol.tol_audit;
    let consistent = x1 > 0.0
        && x2 > 0.0
        && x_tot < delta_x
        && r_end > r1
        && (partials[0] - r1).abs() <= t
        && (partials[1] - r2).abs() <= t
        && equivalence.matches;
    Ok(TrilemmaCertificate {
        r1,
        r2,
        delta_x,
        delta_y,
        r2_star,
        x_tot,
        x1,
        x2,
        u1_truthful,
        u1_deviate,
        gap: u1_deviate - u1_truthful,
        partials,
        equivalence,
        consistent,
    })
}

fn equivalence(
    curve: &Curve,
    pool: &PoolState,
    r1: f64,
    r2: f64,
    x1: f64,
    x2: f64,
    tol: &Tolerances,
) -> Result<ScenarioEquivalence, ScenarioError> {
    // An "unbounded" quantity the pool could never fill.
    let proxy = 10.0 * pool.x_reserve;
    let ceiling = pool.x_reserve * (1.0 - 1e-9);

    let share_against = |rate: f64, fixed: f64| {
        bisect_monotone(
            |a| curve.uniform_payment_gradient(pool, a, fixed).unwrap_or(f64::INFINITY),
            0.0,
            ceiling - fixed,
            rate,
            tol,
        )
    };
    let a1 = share_against(r1, x2)?;
    let a2 = share_against(r2, x1)?;

    let first_batch = vec![
        Order::new(OrderType::BuyX, ExtRate::finite(r1)?, proxy)?,
        Order::new(OrderType::BuyX, ExtRate::Infinity, x2)?,
    ];
    let second_batch = vec![
        Order::new(OrderType::BuyX, ExtRate::Infinity, x1)?,
        Order::new(OrderType::BuyX, ExtRate::finite(r2)?, proxy)?,
    ];
    let mut audits = Vec::with_capacity(4);
    for (batch, fills) in [(&first_batch, [a1, x2]), (&second_batch, [x1, a2])] {
        let result = uniform_fill(curve, pool, fills)?;
        audits.push(check_uniform_pricing(batch, &result, tol)?);
        audits.push(check_local_efficiency(curve, pool, batch, &result, true, tol)?);
    }
    let t = tol.tol_audit;
    let matches = (a1 - x1).abs() <= t * x1.max(1.0)
        && (a2 - x2).abs() <= t * x2.max(1.0)
        && audits.iter().all(|r| r.passed);
    Ok(ScenarioEquivalence {
        x1_against_fixed: a1,
        x2_against_fixed: a2,
        first_batch,
        second_batch,
        audits,
        matches,
    })
}

/// Both users buy from the pool at the average price of the joint volume.
fn uniform_fill(curve: &Curve, pool: &PoolState, fills: [f64; 2]) -> Result<BatchResult, ScenarioError> {
    let total = fills[0] + fills[1];
    let price = curve.avg_buy_rate(pool, total)?;
    let x_end = pool.x_reserve - total;
    Ok(BatchResult {
        outcomes: fills.iter().map(|&x| Outcome::new(x, -price * x)).collect(),
        end_pool: PoolState { x_reserve: x_end, y_reserve: curve.y_of_x(x_end)? },
        uniform_price: Some(price),
    })
}
