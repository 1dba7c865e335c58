//! Two-sided uniform-price clearing against the pool.
//!
//! A candidate rate `r` fixes the pool's end state `X*(r)` (the reserve at
//! which the marginal rate is `r`), the pool's X outflow `Δx(r) = X0 - X*`
//! and the uniform price `p̄(r)`, the average rate of moving the pool from
//! `X0` to `X*`. Order sizes are measured in X at that price: Y-quantities
//! are divided by `p̄`. A clearing rate balances users' demand against
//! users' supply plus the pool's outflow, with the orders sitting exactly
//! at `r` acting as the marginal set.

use serde::{Deserialize, Serialize};

use super::{fill_at_price, MechanismError};
use crate::amm::{Curve, PoolState};
use crate::numerics::{bisect_monotone, ExtRate, Tolerances};
use crate::orders::{BatchResult, Order, Outcome};

/// Which balance condition the clearing rate satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `r* >= r0`: supply and demand above `r*` fill fully, the pool sells
    /// X and demand at `r*` is rationed.
    ExcessDemand,
    /// `r* <= r0`: demand and supply below `r*` fill fully, the pool buys
    /// X and supply at `r*` is rationed.
    ExcessSupply,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingSolution {
    pub r_star: f64,
    /// Uniform execution price at `r_star`.
    pub p_bar: f64,
    /// X the pool sells (negative when it buys).
    pub delta_x: f64,
    pub branch: Branch,
}

/// Doublings tried when the only uncleared demand carries an unbounded rate.
const MAX_DOUBLINGS: usize = 1024;

struct Market<'a> {
    curve: &'a Curve,
    pool: &'a PoolState,
    r0: f64,
    demand: &'a [Order],
    supply: &'a [Order],
}

fn size_in_x(order: &Order, p: f64) -> f64 {
    if order.otype.y_denominated() {
        order.qty / p
    } else {
        order.qty
    }
}

fn total<'o>(orders: impl Iterator<Item = &'o Order>, p: f64) -> f64 {
    orders.map(|o| size_in_x(o, p)).sum()
}

impl Market<'_> {
    fn delta_x(&self, r: f64) -> f64 {
        if r == self.r0 {
            return 0.0;
        }
        self.pool.x_reserve - self.curve.reserve_at_rate(r)
    }

    fn p_bar(&self, r: f64) -> f64 {
        if r == self.r0 {
            return self.r0;
        }
        self.curve.secant(self.pool.x_reserve, self.curve.reserve_at_rate(r))
    }

    fn demand_above(&self, r: f64, p: f64) -> f64 {
        total(self.demand.iter().filter(|o| o.rate.cmp_scalar(r).is_gt()), p)
    }

    fn demand_from(&self, r: f64, p: f64) -> f64 {
        total(self.demand.iter().filter(|o| o.rate.cmp_scalar(r).is_ge()), p)
    }

    fn supply_below(&self, r: f64, p: f64) -> f64 {
        total(self.supply.iter().filter(|o| o.rate.cmp_scalar(r).is_lt()), p)
    }

    fn supply_to(&self, r: f64, p: f64) -> f64 {
        total(self.supply.iter().filter(|o| o.rate.cmp_scalar(r).is_le()), p)
    }

    /// Supply plus pool outflow, the X available to demand at `r`.
    fn available(&self, r: f64) -> f64 {
        self.supply_to(r, self.p_bar(r)) + self.delta_x(r)
    }

    /// Demand net of pool inflow, the X that supply must cover at `r`.
    fn required(&self, r: f64) -> f64 {
        self.demand_from(r, self.p_bar(r)) - self.delta_x(r)
    }

    fn clears_demand(&self, r: f64) -> bool {
        let p = self.p_bar(r);
        let avail = self.available(r);
        r >= self.r0 && self.demand_above(r, p) <= avail && avail <= self.demand_from(r, p)
    }

    fn clears_supply(&self, r: f64) -> bool {
        let p = self.p_bar(r);
        let req = self.required(r);
        r <= self.r0 && self.supply_below(r, p) <= req && req <= self.supply_to(r, p)
    }

    fn solution(&self, r: f64, branch: Branch) -> ClearingSolution {
        ClearingSolution { r_star: r, p_bar: self.p_bar(r), delta_x: self.delta_x(r), branch }
    }

    fn distinct_rates(orders: &[Order], keep: impl Fn(f64) -> bool) -> Vec<f64> {
        let mut rates: Vec<f64> =
            orders.iter().filter_map(|o| o.rate.value()).filter(|&r| keep(r)).collect();
        rates.sort_by(f64::total_cmp);
        rates.dedup();
        rates
    }

    /// Raises the rate from `r0` through the declared demand rates.
    fn solve_excess_demand(&self, tol: &Tolerances) -> Result<ClearingSolution, MechanismError> {
        let mut prev = self.r0;
        for r in Self::distinct_rates(self.demand, |r| r > self.r0) {
            let p = self.p_bar(r);
            let avail = self.available(r);
            if self.demand_above(r, p) > avail {
                prev = r;
                continue;
            }
            if avail <= self.demand_from(r, p) {
                return Ok(self.solution(r, Branch::ExcessDemand));
            }
            // Between `prev` and `r` the demand set is exactly the orders
            // at rate >= r.
            let gap = |s: f64| self.available(s) - self.demand_from(r, self.p_bar(s));
            let root = bisect_monotone(gap, prev, r, 0.0, tol)?;
            return Ok(self.solution(root, Branch::ExcessDemand));
        }

        // Only unbounded-rate demand is left above `prev`.
        let gap = |s: f64| self.available(s) - self.demand_above(s, self.p_bar(s));
        let mut hi = prev * 2.0;
        for _ in 0..MAX_DOUBLINGS {
            if !hi.is_finite() {
                break;
            }
            if gap(hi) >= 0.0 {
                let root = bisect_monotone(gap, prev, hi, 0.0, tol)?;
                return Ok(self.solution(root, Branch::ExcessDemand));
            }
            prev = hi;
            hi *= 2.0;
        }
        Err(MechanismError::NoSolution(format!(
            "unbounded-rate demand of {} X exceeds what the pool can sell",
            self.demand_above(prev, self.p_bar(prev))
        )))
    }

    /// Lowers the rate from `r0` through the declared supply rates.
    fn solve_excess_supply(&self, tol: &Tolerances) -> Result<ClearingSolution, MechanismError> {
        let mut prev = self.r0;
        let rates = Self::distinct_rates(self.supply, |r| r < self.r0);
        for &r in rates.iter().rev() {
            let p = self.p_bar(r);
            let req = self.required(r);
            if self.supply_below(r, p) > req {
                prev = r;
                continue;
            }
            if req <= self.supply_to(r, p) {
                return Ok(self.solution(r, Branch::ExcessSupply));
            }
            let gap = |s: f64| self.required(s) - self.supply_to(r, self.p_bar(s));
            let root = bisect_monotone(gap, r, prev, 0.0, tol)?;
            return Ok(self.solution(root, Branch::ExcessSupply));
        }
        Err(MechanismError::NoSolution("supply side never balances".into()))
    }
}

/// Finds a rate at which demand, supply and the pool balance.
///
/// `demand` holds Buy(X)/Sell(Y) orders with rates at or above the market
/// rate, `supply` Buy(Y)/Sell(X) orders at or below it. The market rate is
/// tried first; otherwise the declared rates on the short side are walked
/// away from it until the balance flips, and the crossing is either a
/// declared rate or found by bisection between two neighbouring ones.
pub fn solve_clearing_rate(
    curve: &Curve,
    pool: &PoolState,
    demand: &[Order],
    supply: &[Order],
    tol: &Tolerances,
) -> Result<ClearingSolution, MechanismError> {
    let market = Market { curve, pool, r0: curve.marginal_rate(pool), demand, supply };
    let r0 = market.r0;
    if market.clears_demand(r0) {
        return Ok(market.solution(r0, Branch::ExcessDemand));
    }
    if market.clears_supply(r0) {
        return Ok(market.solution(r0, Branch::ExcessSupply));
    }
    if market.demand_above(r0, r0) > market.available(r0) {
        market.solve_excess_demand(tol)
    } else {
        market.solve_excess_supply(tol)
    }
}

/// Clears the whole batch at one price against the pool.
///
/// Demand below the market rate and supply above it are discarded. At the
/// clearing rate every order strictly inside the spread fills completely
/// and the orders exactly at the rate on the long side share the residual
/// pro rata to their X-denominated size.
pub fn uniform_clearing(
    curve: &Curve,
    pool: &PoolState,
    batch: &[Order],
    tol: &Tolerances,
) -> Result<BatchResult, MechanismError> {
    let r0 = curve.marginal_rate(pool);
    let eligible = |o: &&Order| {
        if o.otype.demands_x() {
            o.rate.cmp_scalar(r0).is_ge()
        } else {
            o.rate.cmp_scalar(r0).is_le()
        }
    };
    let demand: Vec<Order> = batch.iter().filter(eligible).filter(|o| o.otype.demands_x()).copied().collect();
    let supply: Vec<Order> = batch.iter().filter(eligible).filter(|o| !o.otype.demands_x()).copied().collect();

    let sol = solve_clearing_rate(curve, pool, &demand, &supply, tol)?;
    let market = Market { curve, pool, r0, demand: &demand, supply: &supply };
    let (r, p) = (sol.r_star, sol.p_bar);

    let at_rate = |o: &Order| o.rate == ExtRate::Finite(r);
    let marginal_share = match sol.branch {
        Branch::ExcessDemand => {
            let residual = market.supply_to(r, p) + sol.delta_x - market.demand_above(r, p);
            let size = total(demand.iter().filter(|o| at_rate(o)), p);
            if size > 0.0 { (residual / size).clamp(0.0, 1.0) } else { 0.0 }
        }
        Branch::ExcessSupply => {
            let residual = market.demand_from(r, p) - sol.delta_x - market.supply_below(r, p);
            let size = total(supply.iter().filter(|o| at_rate(o)), p);
            if size > 0.0 { (residual / size).clamp(0.0, 1.0) } else { 0.0 }
        }
    };

    let outcomes: Vec<Outcome> = batch
        .iter()
        .map(|o| {
            if !eligible(&o) {
                return Outcome::ZERO;
            }
            let marginal_side = match sol.branch {
                Branch::ExcessDemand => o.otype.demands_x(),
                Branch::ExcessSupply => !o.otype.demands_x(),
            };
            let share = if !marginal_side {
                1.0
            } else if at_rate(o) {
                marginal_share
            } else {
                let inside = if o.otype.demands_x() {
                    o.rate.cmp_scalar(r).is_gt()
                } else {
                    o.rate.cmp_scalar(r).is_lt()
                };
                if inside { 1.0 } else { 0.0 }
            };
            if share > 0.0 { fill_at_price(o, share, p) } else { Outcome::ZERO }
        })
        .collect();

    let flow: Outcome = outcomes.iter().sum();
    let end_pool = if flow.is_zero() {
        *pool
    } else {
        curve.apply_net_flow(pool, flow.dx, flow.dy, tol)?
    };
    Ok(BatchResult { outcomes, end_pool, uniform_price: Some(p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::CurveKind;

    fn setup() -> (Curve, PoolState, Tolerances) {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        (Curve::through(CurveKind::ConstantProduct, &pool), pool, Tolerances::default())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn demand_only_clears_at_declared_rate() {
        let (curve, pool, tol) = setup();
        let demand = [Order::buy_x(2.0, 30.0), Order::buy_x(1.5, 10.0)];
        let sol = solve_clearing_rate(&curve, &pool, &demand, &[], &tol).unwrap();
        assert_eq!(sol.branch, Branch::ExcessDemand);
        assert!(close(sol.r_star, 2.0));
        assert!(close(sol.delta_x, 100.0 - 5000f64.sqrt()));
        assert!(close(sol.p_bar, 2f64.sqrt()));
    }

    #[test]
    fn buy_and_sell_clear_between_rates() {
        let (curve, pool, tol) = setup();
        let sol = solve_clearing_rate(
            &curve,
            &pool,
            &[Order::buy_x(1.2, 10.0)],
            &[Order::sell_x(0.9, 5.0)],
            &tol,
        )
        .unwrap();
        // pool sells 5: X* = 95, r* = C / 95^2, p̄ = C / (100 * 95)
        assert!(close(sol.r_star, 10000.0 / 9025.0));
        assert!(close(sol.delta_x, 5.0));
        assert!(close(sol.p_bar, 100.0 / 95.0));
    }

    #[test]
    fn empty_book_clears_at_market() {
        let (curve, pool, tol) = setup();
        let sol = solve_clearing_rate(&curve, &pool, &[], &[], &tol).unwrap();
        assert_eq!((sol.r_star, sol.delta_x, sol.p_bar), (1.0, 0.0, 1.0));
        let r = uniform_clearing(&curve, &pool, &[], &tol).unwrap();
        assert!(r.outcomes.is_empty());
        assert_eq!(r.end_pool, pool);
    }

    #[test]
    fn rationed_top_order() {
        let (curve, pool, tol) = setup();
        let r = uniform_clearing(&curve, &pool, &[Order::buy_x(2.0, 30.0), Order::buy_x(1.5, 10.0)], &tol)
            .unwrap();
        assert!(close(r.outcomes[0].dx, 29.289321881345));
        assert!(close(r.outcomes[0].dy, -41.421356237310));
        assert_eq!(r.outcomes[1], Outcome::ZERO);
        assert!(close(r.end_pool.x_reserve, 5000f64.sqrt()));
        assert!(close(r.end_pool.y_reserve, 20000f64.sqrt()));
        assert!(close(curve.marginal_rate(&r.end_pool), 2.0));
    }

    #[test]
    fn buyer_and_seller_share_price() {
        let (curve, pool, tol) = setup();
        let r = uniform_clearing(&curve, &pool, &[Order::buy_x(1.2, 10.0), Order::sell_x(0.9, 5.0)], &tol)
            .unwrap();
        let p = 100.0 / 95.0;
        assert!(close(r.outcomes[0].dx, 10.0) && close(r.outcomes[0].dy, -10.0 * p));
        assert!(close(r.outcomes[1].dx, -5.0) && close(r.outcomes[1].dy, 5.0 * p));
        assert!(close(r.end_pool.x_reserve, 95.0));
        assert!(close(r.uniform_price.unwrap(), p));
    }

    #[test]
    fn lone_seller_pushes_rate_down() {
        let (curve, pool, tol) = setup();
        let r = uniform_clearing(&curve, &pool, &[Order::sell_x(0.5, 100.0)], &tol).unwrap();
        // r* = 0.5 at the seller's own rate: X* = sqrt(20000)
        let x_star = 20000f64.sqrt();
        assert!(close(r.outcomes[0].dx, -(x_star - 100.0)));
        assert!(close(r.uniform_price.unwrap(), 10000.0 / (100.0 * x_star)));
        assert!(close(r.end_pool.x_reserve, x_star));
    }

    #[test]
    fn ineligible_orders_untouched() {
        let (curve, pool, tol) = setup();
        let r = uniform_clearing(&curve, &pool, &[Order::buy_x(0.8, 10.0), Order::sell_x(1.5, 10.0)], &tol)
            .unwrap();
        assert!(r.outcomes.iter().all(Outcome::is_zero));
        assert_eq!(r.end_pool, pool);
    }

    #[test]
    fn matched_at_market_rate() {
        let (curve, pool, tol) = setup();
        let r = uniform_clearing(&curve, &pool, &[Order::buy_x(1.0, 4.0), Order::sell_x(1.0, 10.0)], &tol)
            .unwrap();
        assert!(close(r.outcomes[0].dx, 4.0));
        assert!(close(r.outcomes[1].dx, -4.0));
        assert_eq!(r.end_pool, pool);
    }

    #[test]
    fn unbounded_demand_beyond_pool_is_an_error() {
        let (curve, pool, tol) = setup();
        let whale = Order::new(crate::orders::OrderType::BuyX, ExtRate::Infinity, 150.0).unwrap();
        assert!(matches!(
            uniform_clearing(&curve, &pool, &[whale], &tol),
            Err(MechanismError::NoSolution(_))
        ));
        let small = Order::new(crate::orders::OrderType::BuyX, ExtRate::Infinity, 20.0).unwrap();
        let r = uniform_clearing(&curve, &pool, &[small], &tol).unwrap();
        assert!((r.outcomes[0].dx - 20.0).abs() < 1e-9);
    }

    #[test]
    fn y_denominated_orders_convert_at_price() {
        let (curve, pool, tol) = setup();
        let batch = [Order::sell_y(3.0, 20.0), Order::buy_y(0.5, 5.0)];
        let r = uniform_clearing(&curve, &pool, &batch, &tol).unwrap();
        let p = r.uniform_price.unwrap();
        for (o, out) in batch.iter().zip(&r.outcomes) {
            if !out.is_zero() {
                assert!((out.rate().unwrap() - p).abs() < 1e-12);
                assert!(o.otype.filled_qty(out) <= o.qty + 1e-9);
            }
        }
        assert!(curve.drift(&r.end_pool) < 1e-12);
    }
}
