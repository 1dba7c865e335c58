use serde::Serialize;

use super::{require, ScenarioError};
use crate::amm::{Curve, PoolState};
use crate::auditors::find_arbitrage_subset;
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{check_well_formed, BatchResult, Order, OrderType, Outcome};
use crate::report::{AuditReport, Witness};

/// Two unbounded Buy(X) orders for `q + eps` and `q + 2 eps` facing one
/// Sell(X) order for `q` at the rate `r*` the pool reaches after selling the
/// net excess `q + 3 eps`.
///
/// A locally efficient mechanism must fill all three orders. Whatever
/// uniform price the seller receives, the buyers' common price falls below
/// it, and the seller together with either buyer gains in both assets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageConstruction {
    pub q: f64,
    pub eps: f64,
    pub q_buy: f64,
    pub q_sell: f64,
    pub r_star: f64,
    /// Y the pool receives for the net `q + 3 eps` units of X.
    pub pool_y_inflow: f64,
    pub batch: Vec<Order>,
    pub samples: Vec<SellPriceSample>,
    pub verified: bool,
}

/// The full-fill outcome for one choice of the seller's price.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellPriceSample {
    pub p_sell: f64,
    pub p_buy: f64,
    /// Largest `eps` for which the seller/buyer pair provably gains.
    pub eps_bound: f64,
    pub outcomes: Vec<Outcome>,
    /// Joint outcomes of the seller with the first and the second buyer.
    pub pair_gains: [Outcome; 2],
    pub well_formed: AuditReport,
    pub arbitrage: AuditReport,
}

impl ArbitrageConstruction {
    pub fn default_sell_prices(r_star: f64) -> Vec<f64> {
        vec![r_star, 1.05 * r_star, 1.2 * r_star]
    }
}

/// Builds the construction on `pool` and checks, at each seller price in
/// `sell_prices` (default `r*`, `1.05 r*`, `1.2 r*`), that the outcome is
/// well formed and that the subset search flags a seller/buyer pair with
/// both gains above `tol_audit`.
///
/// Fails with a parameter error unless `eps` is below
/// `(p_sell - p_buy) q / (2 p_buy)` at every sampled price.
pub fn arbitrage_from_full_fill(
    curve: &Curve,
    pool: &PoolState,
    q: f64,
    eps: f64,
    sell_prices: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<ArbitrageConstruction, ScenarioError> {
    require(q > 0.0 && q.is_finite(), || format!("q must be positive, got {q}"))?;
    require(eps > 0.0 && eps.is_finite(), || format!("eps must be positive, got {eps}"))?;
    let net = q + 3.0 * eps;
    require(net < pool.x_reserve, || {
        format!("q + 3 eps = {net} exceeds the pool's X reserve {}", pool.x_reserve)
    })?;

    let q_buy = 2.0 * q + 3.0 * eps;
    let r_star = curve.end_rate(pool, net)?;
    let x_end = pool.x_reserve - net;
    let y_end = curve.y_of_x(x_end)?;
    let pool_y_inflow = y_end - pool.y_reserve;
    let unbounded = |qty| Order::new(OrderType::BuyX, ExtRate::Infinity, qty);
    let batch = vec![
        unbounded(q + eps)?,
        unbounded(q + 2.0 * eps)?,
        Order::new(OrderType::SellX, ExtRate::finite(r_star)?, q)?,
    ];

    let defaults;
    let prices = match sell_prices {
        Some(p) => p,
        None => {
            defaults = ArbitrageConstruction::default_sell_prices(r_star);
            &defaults
        }
    };
    require(!prices.is_empty(), || "no sell prices to sample".into())?;

    let t = tol.tol_audit;
    let mut samples = Vec::with_capacity(prices.len());
    for &p_sell in prices {
        require(p_sell.is_finite() && p_sell >= r_star, || {
            format!("sell price {p_sell} is below the ending rate {r_star}")
        })?;
        let p_buy = (pool_y_inflow + p_sell * q) / q_buy;
        let eps_bound = (p_sell - p_buy) * q / (2.0 * p_buy);
        require(eps < eps_bound, || {
            format!("eps = {eps} is not below the bound {eps_bound} at sell price {p_sell}")
        })?;

        let outcomes = vec![
            Outcome::new(q + eps, -p_buy * (q + eps)),
            Outcome::new(q + 2.0 * eps, -p_buy * (q + 2.0 * eps)),
            Outcome::new(-q, p_sell * q),
        ];
        let pair_gains = [outcomes[0] + outcomes[2], outcomes[1] + outcomes[2]];
        let result = BatchResult {
            outcomes: outcomes.clone(),
            end_pool: PoolState { x_reserve: x_end, y_reserve: y_end },
            uniform_price: None,
        };
        samples.push(SellPriceSample {
            p_sell,
            p_buy,
            eps_bound,
            pair_gains,
            well_formed: check_well_formed(curve, pool, &batch, &result, tol)?,
            arbitrage: find_arbitrage_subset(&result, tol)?,
            outcomes,
        });
    }

    let verified = samples.iter().all(|s| {
        let flagged_pair = matches!(
            &s.arbitrage.witness,
            Some(Witness::Subset { indices, dx, dy })
                if indices.len() == 2 && indices[1] == 2 && *dx > t && *dy > t
        );
        s.well_formed.passed
            && s.p_buy < s.p_sell
            && flagged_pair
            && s.pair_gains.iter().any(|g| g.dx > t && g.dy > t)
    });
    Ok(ArbitrageConstruction { q, eps, q_buy, q_sell: q, r_star, pool_y_inflow, batch, samples, verified })
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
    fn small_eps_yields_arbitrage_at_every_price() {
        let (curve, pool, tol) = setup();
        let c = arbitrage_from_full_fill(&curve, &pool, 10.0, 0.1, None, &tol).unwrap();
        assert!((c.r_star - 1e4 / (89.7 * 89.7)).abs() < 1e-12);
        assert!((c.q_buy - 20.3).abs() < 1e-12);
        assert!(c.verified);
        assert_eq!(c.samples.len(), 3);
        for s in &c.samples {
            // independent recomputation of the buyers' price
            let inflow = 1e4 / 89.7 - 100.0;
            let p_buy = (inflow + 10.0 * s.p_sell) / 20.3;
            assert!((s.p_buy - p_buy).abs() < 1e-12);
            let gain_y = 10.0 * s.p_sell - 10.1 * p_buy;
            match &s.arbitrage.witness {
                Some(Witness::Subset { indices, dx, dy }) => {
                    assert_eq!(indices, &[0, 2]);
                    assert!((dx - 0.1).abs() < 1e-9);
                    assert!((dy - gain_y).abs() < 1e-9);
                }
                other => panic!("expected a subset witness, got {other:?}"),
            }
        }
    }

    #[test]
    fn large_eps_is_rejected() {
        let (curve, pool, tol) = setup();
        let err = arbitrage_from_full_fill(&curve, &pool, 10.0, 1.0, None, &tol).unwrap_err();
        assert!(matches!(err, ScenarioError::Parameter(_)));
    }

    #[test]
    fn pair_gain_tends_to_price_gap() {
        let (curve, pool, tol) = setup();
        let c = arbitrage_from_full_fill(&curve, &pool, 10.0, 1e-6, None, &tol).unwrap();
        for s in &c.samples {
            let limit = (s.p_sell - s.p_buy) * 10.0;
            assert!((s.pair_gains[0].dy - limit).abs() < 1e-4);
        }
    }

    #[test]
    fn sell_price_below_end_rate_is_rejected() {
        let (curve, pool, tol) = setup();
        let err = arbitrage_from_full_fill(&curve, &pool, 10.0, 0.1, Some(&[1.0]), &tol).unwrap_err();
        assert!(matches!(err, ScenarioError::Parameter(_)));
    }
}
