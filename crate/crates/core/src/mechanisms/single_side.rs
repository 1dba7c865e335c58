use super::MechanismError;
use crate::amm::{Curve, PoolState};
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{BatchResult, Order, OrderType, Outcome};

/// Uniform-price clearing for a batch of Buy(X) orders only.
///
/// Finds the purchase volume `x*` at which the demand still willing to buy
/// at the resulting end rate equals `x*` itself. Orders above that rate
/// fill completely, orders exactly at it share the remainder pro rata and
/// everyone pays the average rate of the whole purchase.
pub fn single_side_uniform(
    curve: &Curve,
    pool: &PoolState,
    batch: &[Order],
    tol: &Tolerances,
) -> Result<BatchResult, MechanismError> {
    if let Some(o) = batch.iter().find(|o| o.otype != OrderType::BuyX) {
        return Err(MechanismError::UnsupportedOrder(o.otype));
    }
    let r0 = curve.marginal_rate(pool);
    let mut levels: Vec<ExtRate> =
        batch.iter().map(|o| o.rate).filter(|r| r.cmp_scalar(r0).is_ge()).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    // Walk the demand staircase from the highest rate down. At level j the
    // curve needs `reach` units to bring its end rate up to the level,
    // while `cum` units are demanded at or above it.
    let mut filled_above = 0.0;
    let mut volume = None;
    let mut stop = None;
    let mut marginal = 0.0;
    for &level in &levels {
        let reach = curve.x_for_end_rate(pool, level, tol)?;
        let here: f64 = batch.iter().filter(|o| o.rate == level).map(|o| o.qty).sum();
        let cum = filled_above + here;
        if cum >= reach {
            stop = Some(level);
            if filled_above >= reach {
                volume = Some(filled_above);
            } else {
                volume = Some(reach);
                marginal = (reach - filled_above) / here;
            }
            break;
        }
        filled_above = cum;
    }
    let x_star = volume.unwrap_or(filled_above);
    if x_star <= 0.0 {
        return Ok(BatchResult::unchanged(*pool, batch.len()));
    }

    let price = curve.avg_buy_rate(pool, x_star)?;
    let outcomes = batch
        .iter()
        .map(|o| {
            let share = match stop {
                _ if o.rate.cmp_scalar(r0).is_lt() => 0.0,
                None => 1.0,
                Some(level) if o.rate > level => 1.0,
                Some(level) if o.rate == level => marginal,
                Some(_) => 0.0,
            };
            let x = share * o.qty;
            if x > 0.0 { Outcome::new(x, -price * x) } else { Outcome::ZERO }
        })
        .collect();
    let x_end = pool.x_reserve - x_star;
    let end_pool = PoolState { x_reserve: x_end, y_reserve: curve.y_of_x(x_end)? };
    Ok(BatchResult { outcomes, end_pool, uniform_price: Some(price) })
}
