use crate::amm::{Curve, PoolState};
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{BatchResult, Order, OrderType, Outcome};

/// Executes only the highest-rate demand order, at no less than the volume
/// whose average price equals the runner-up rate.
///
/// Supply-side orders and demand orders below the market rate are ignored.
/// The winner buys `max(x, min(x', cap))` units of X, where `x` prices the
/// runner-up's rate on average, `x'` moves the marginal rate up to the
/// winner's own rate and `cap` is the winner's quantity (Buy(X)) or the X
/// its Y budget buys at the initial state (Sell(Y)). If `cap < x` nobody
/// trades. Equal rates rank by input position.
pub fn top_bidder(curve: &Curve, pool: &PoolState, batch: &[Order], tol: &Tolerances) -> BatchResult {
    let mut result = BatchResult::unchanged(*pool, batch.len());
    let r0 = curve.marginal_rate(pool);

    let mut top: Option<usize> = None;
    let mut runner_up: Option<ExtRate> = None;
    for (i, order) in batch.iter().enumerate() {
        if !order.otype.demands_x() || order.rate.cmp_scalar(r0).is_lt() {
            continue;
        }
        match top {
            None => top = Some(i),
            Some(t) if order.rate > batch[t].rate => {
                runner_up = Some(batch[t].rate);
                top = Some(i);
            }
            Some(_) => {
                if runner_up.map_or(true, |r| order.rate > r) {
                    runner_up = Some(order.rate);
                }
            }
        }
    }
    let Some(top) = top else {
        return result;
    };
    let winner = &batch[top];

    let floor = match runner_up {
        None => 0.0,
        Some(ExtRate::Infinity) => return result,
        Some(ExtRate::Finite(r2)) if r2 <= r0 => 0.0,
        Some(ExtRate::Finite(r2)) => match curve.x_for_avg_rate(pool, r2) {
            Ok(x) => x,
            Err(_) => return result,
        },
    };
    let cap = match winner.otype {
        OrderType::BuyX => winner.qty,
        OrderType::SellY => match curve.x_of_y(pool.y_reserve + winner.qty) {
            Ok(x_after) => pool.x_reserve - x_after,
            Err(_) => return result,
        },
        _ => unreachable!("supply orders are skipped above"),
    };
    if cap < floor {
        return result;
    }
    let Ok(reach) = curve.x_for_end_rate(pool, winner.rate, tol) else {
        return result;
    };
    let x_star = floor.max(reach.min(cap));
    if x_star <= 0.0 {
        return result;
    }
    let x_end = pool.x_reserve - x_star;
    let Ok(y_end) = curve.y_of_x(x_end) else {
        return result;
    };
    result.outcomes[top] = Outcome::new(x_star, -(y_end - pool.y_reserve));
    result.end_pool = PoolState { x_reserve: x_end, y_reserve: y_end };
    result
}
