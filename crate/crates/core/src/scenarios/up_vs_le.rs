use serde::Serialize;

use super::{require, ScenarioError};
use crate::amm::{Curve, PoolState};
use crate::auditors::check_local_efficiency;
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{check_well_formed, BatchResult, Order, OrderType, Outcome};
use crate::report::{AuditReport, Clause, Witness};

/// An unbounded Buy(X) order for `q_b` next to a Sell(X) order for
/// `q_s < q_b` whose rate `r_s` sits between the average and the ending
/// rate of a pool-only fill of the buyer.
///
/// The buyer must fill completely. If the seller gets nothing the pool ends
/// above `r_s` (not locally efficient); if the seller sells `x_s > 0` the
/// uniform price is below `r_s` (not individually rational).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuyerSellerConflict {
    pub q_b: f64,
    pub eps: f64,
    pub q_s: f64,
    pub r_s: f64,
    pub batch: Vec<Order>,
    /// Ending rate when the pool alone serves the buyer.
    pub pool_only_end_rate: f64,
    pub pool_only_le: AuditReport,
    pub pool_only_wle: AuditReport,
    pub partial_fills: Vec<PartialFillSample>,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialFillSample {
    pub x_s: f64,
    pub p_bar: f64,
    pub outcomes: Vec<Outcome>,
    pub well_formed: AuditReport,
}

impl BuyerSellerConflict {
    /// `q_s k / 10` for `k = 1..=10`.
    pub fn default_seller_fills(q_s: f64) -> Vec<f64> {
        (1..=10).map(|k| q_s * k as f64 / 10.0).collect()
    }
}

/// Builds the buyer/seller pair with `r_s = r_end(q_b) - eps` and audits
/// both ways of treating the seller: the pool-only fill against local
/// efficiency, and each seller fill in `seller_fills` (default ten even
/// steps up to `q_s`) against well-formedness.
pub fn buyer_seller_conflict(
    curve: &Curve,
    pool: &PoolState,
    q_b: f64,
    eps: f64,
    q_s: f64,
    seller_fills: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<BuyerSellerConflict, ScenarioError> {
    require(q_b > 0.0 && q_b < pool.x_reserve, || {
        format!("q_b must lie in (0, {}), got {q_b}", pool.x_reserve)
    })?;
    let r_end = curve.end_rate(pool, q_b)?;
    let r_avg = curve.avg_buy_rate(pool, q_b)?;
    let width = r_end - r_avg;
    require(eps > 0.0 && eps < width, || format!("eps must lie in (0, {width}), got {eps}"))?;
    require(q_s > 0.0 && q_s < q_b, || format!("q_s must lie in (0, {q_b}), got {q_s}"))?;
    let r_s = r_end - eps;

    let batch = vec![
        Order::new(OrderType::BuyX, ExtRate::Infinity, q_b)?,
        Order::new(OrderType::SellX, ExtRate::finite(r_s)?, q_s)?,
    ];

    let x_end = pool.x_reserve - q_b;
    let y_end = curve.y_of_x(x_end)?;
    let pool_only = BatchResult {
        outcomes: vec![Outcome::new(q_b, -(y_end - pool.y_reserve)), Outcome::ZERO],
        end_pool: PoolState { x_reserve: x_end, y_reserve: y_end },
        uniform_price: None,
    };
    let pool_only_end_rate = curve.marginal_rate(&pool_only.end_pool);
    let pool_only_le = check_local_efficiency(curve, pool, &batch, &pool_only, false, tol)?;
    let pool_only_wle = check_local_efficiency(curve, pool, &batch, &pool_only, true, tol)?;

    let defaults;
    let fills = match seller_fills {
        Some(f) => f,
        None => {
            defaults = BuyerSellerConflict::default_seller_fills(q_s);
            &defaults
        }
    };
    require(!fills.is_empty(), || "no seller fills to sample".into())?;

    let mut partial_fills = Vec::with_capacity(fills.len());
    for &x_s in fills {
        require(x_s > 0.0 && x_s <= q_s, || format!("seller fill must lie in (0, {q_s}], got {x_s}"))?;
        let net = q_b - x_s;
        let x_end = pool.x_reserve - net;
        let y_end = curve.y_of_x(x_end)?;
        let p_bar = (y_end - pool.y_reserve) / net;
        let outcomes = vec![Outcome::new(q_b, -p_bar * q_b), Outcome::new(-x_s, p_bar * x_s)];
        let result = BatchResult {
            outcomes: outcomes.clone(),
            end_pool: PoolState { x_reserve: x_end, y_reserve: y_end },
            uniform_price: Some(p_bar),
        };
        let well_formed = check_well_formed(curve, pool, &batch, &result, tol)?;
        partial_fills.push(PartialFillSample { x_s, p_bar, outcomes, well_formed });
    }

    let seller_unfulfilled =
        matches!(pool_only_le.witness, Some(Witness::Unfulfilled { index: 1, .. }));
    let seller_irrational = partial_fills.iter().all(|s| {
        s.p_bar < r_s
            && matches!(
                s.well_formed.witness,
                Some(Witness::Clause { index: Some(1), clause: Clause::IndividualRationality, .. })
            )
    });
    Ok(BuyerSellerConflict {
        q_b,
        eps,
        q_s,
        r_s,
        batch,
        pool_only_end_rate,
        verified: pool_only_end_rate > r_s && seller_unfulfilled && seller_irrational,
        pool_only_le,
        pool_only_wle,
        partial_fills,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::CurveKind;

    fn setup() -> (Curve, PoolState, Tolerances) {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        (Curve::through(CurveKind::ConstantProduct, &pool), pool, Tolerances::default())
    }

    #[test]
    fn both_cases_fail() {
        let (curve, pool, tol) = setup();
        let c = buyer_seller_conflict(&curve, &pool, 50.0, 1.0, 10.0, None, &tol).unwrap();
        assert!(c.verified);
        assert_eq!(c.r_s, 3.0);
        assert_eq!(c.pool_only_end_rate, 4.0);
        assert!(!c.pool_only_le.passed);
        // the seller's rate is above r0 = 1, so it is not eligible
        assert!(c.pool_only_wle.passed);
        assert_eq!(c.partial_fills.len(), 10);
        for (k, s) in c.partial_fills.iter().enumerate() {
            let x_s = (k + 1) as f64;
            assert!((s.x_s - x_s).abs() < 1e-12);
            assert!((s.p_bar - 100.0 / (50.0 + x_s)).abs() < 1e-12);
            assert!(!s.well_formed.passed);
        }
    }

    #[test]
    fn eps_outside_interval() {
        let (curve, pool, tol) = setup();
        for eps in [2.5, 5.0, 0.0, -1.0] {
            let err = buyer_seller_conflict(&curve, &pool, 50.0, eps, 10.0, None, &tol).unwrap_err();
            assert!(matches!(err, ScenarioError::Parameter(_)), "eps = {eps}");
        }
    }

    #[test]
    fn seller_quantity_must_be_smaller() {
        let (curve, pool, tol) = setup();
        let err = buyer_seller_conflict(&curve, &pool, 50.0, 1.0, 50.0, None, &tol).unwrap_err();
        assert!(matches!(err, ScenarioError::Parameter(_)));
    }
}
