//! Pool state and the rate algebra of the pricing curve.
//!
//! Everything here is phrased through three curve primitives: `Y(X)`, its
//! inverse `X(Y)` and the market rate `-dY/dX`. Mechanisms only use the
//! derived quantities (average and end rates, their inverses), so another
//! concave curve only needs new arms in the primitive `match`es.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ExtRate, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("reserves depleted: ({x}, {y})")]
    Depletion { x: f64, y: f64 },
    #[error("potential drift {drift:e} exceeds tolerance {tol:e}")]
    Conformance { drift: f64, tol: f64 },
}

fn domain(what: &'static str, value: f64) -> CurveError {
    CurveError::Domain { what, value }
}

/// Reserves of assets X and Y held by the pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    #[serde(rename = "x")]
    pub x_reserve: f64,
    #[serde(rename = "y")]
    pub y_reserve: f64,
}

impl PoolState {
    pub fn new(x_reserve: f64, y_reserve: f64) -> Result<Self, CurveError> {
        if !(x_reserve > 0.0 && x_reserve.is_finite() && y_reserve > 0.0 && y_reserve.is_finite()) {
            return Err(CurveError::Depletion { x: x_reserve, y: y_reserve });
        }
        Ok(Self { x_reserve, y_reserve })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `X * Y = C`
    ConstantProduct,
}

/// A level set `Φ(X, Y) = C` of a pricing potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub c: f64,
}

impl Curve {
    pub fn constant_product(c: f64) -> Result<Self, CurveError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain("curve constant", c));
        }
        Ok(Self { kind: CurveKind::ConstantProduct, c })
    }

    /// The level set of `kind` passing through `pool`.
    pub fn through(kind: CurveKind, pool: &PoolState) -> Self {
        let c = match kind {
            CurveKind::ConstantProduct => pool.x_reserve * pool.y_reserve,
        };
        Self { kind, c }
    }

    pub fn potential(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            CurveKind::ConstantProduct => x * y,
        }
    }

    /// Relative distance of `pool` from this level set.
    pub fn drift(&self, pool: &PoolState) -> f64 {
        (self.potential(pool.x_reserve, pool.y_reserve) - self.c).abs() / self.c
    }

    pub fn y_of_x(&self, x: f64) -> Result<f64, CurveError> {
        if !(x > 0.0) {
            return Err(domain("x reserve", x));
        }
        Ok(match self.kind {
            CurveKind::ConstantProduct => self.c / x,
        })
    }

    pub fn x_of_y(&self, y: f64) -> Result<f64, CurveError> {
        if !(y > 0.0) {
            return Err(domain("y reserve", y));
        }
        Ok(match self.kind {
            CurveKind::ConstantProduct => self.c / y,
        })
    }

    /// `-dY/dX` at reserve level `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self.kind {
            CurveKind::ConstantProduct => self.c / (x * x),
        }
    }

    /// The reserve level at which `-dY/dX` equals `rate`.
    pub fn reserve_at_rate(&self, rate: f64) -> f64 {
        match self.kind {
            CurveKind::ConstantProduct => (self.c / rate).sqrt(),
        }
    }

    /// Average rate `(Y(b) - Y(a)) / (a - b)` of moving the pool from
    /// reserve `a` to reserve `b`; the market rate when `a == b`.
    pub fn secant(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            CurveKind::ConstantProduct => self.c / (a * b),
        }
    }

    /// The market rate `r0` of `pool`.
    pub fn marginal_rate(&self, pool: &PoolState) -> f64 {
        self.slope_at(pool.x_reserve)
    }

    fn check_withdrawal(pool: &PoolState, x: f64) -> Result<(), CurveError> {
        if !(x >= 0.0 && x < pool.x_reserve) {
            return Err(domain("withdrawal", x));
        }
        Ok(())
    }

    /// Average price per unit for buying `x` units of X; the market rate
    /// at `x = 0`.
    pub fn avg_buy_rate(&self, pool: &PoolState, x: f64) -> Result<f64, CurveError> {
        Self::check_withdrawal(pool, x)?;
        if x == 0.0 {
            return Ok(self.marginal_rate(pool));
        }
        Ok(self.secant(pool.x_reserve, pool.x_reserve - x))
    }

    /// Market rate after buying `x` units of X.
    pub fn end_rate(&self, pool: &PoolState, x: f64) -> Result<f64, CurveError> {
        Self::check_withdrawal(pool, x)?;
        Ok(self.slope_at(pool.x_reserve - x))
    }

    /// The unique purchase volume whose average rate is `r`.
    pub fn x_for_avg_rate(&self, pool: &PoolState, r: f64) -> Result<f64, CurveError> {
        let r0 = self.marginal_rate(pool);
        if !(r > r0) || !r.is_finite() {
            return Err(domain("average rate", r));
        }
        let x0 = pool.x_reserve;
        Ok(match self.kind {
            CurveKind::ConstantProduct => x0 - self.c / (r * x0),
        })
    }

    /// The purchase volume after which the market rate equals `r`.
    ///
    /// For an unbounded rate this is the largest admissible withdrawal,
    /// `X0 * (1 - tol_root)`.
    pub fn x_for_end_rate(
        &self,
        pool: &PoolState,
        r: ExtRate,
        tol: &Tolerances,
    ) -> Result<f64, CurveError> {
        let x0 = pool.x_reserve;
        match r {
            ExtRate::Infinity => Ok(x0 - tol.tol_root * x0),
            ExtRate::Finite(r) => {
                let r0 = self.marginal_rate(pool);
                if r < r0 {
                    return Err(domain("end rate", r));
                }
                if r == r0 {
                    return Ok(0.0);
                }
                Ok((x0 - self.reserve_at_rate(r)).max(0.0))
            }
        }
    }

    /// Pool state after users take `x_tot` of X and `y_tot` of Y out of it.
    pub fn apply_net_flow(
        &self,
        pool: &PoolState,
        x_tot: f64,
        y_tot: f64,
        tol: &Tolerances,
    ) -> Result<PoolState, CurveError> {
        let next = PoolState::new(pool.x_reserve - x_tot, pool.y_reserve - y_tot)?;
        let drift = self.drift(&next);
        if drift > tol.tol_audit {
            return Err(CurveError::Conformance { drift, tol: tol.tol_audit });
        }
        Ok(next)
    }

    /// Partial derivative in `a1` of the first buyer's payment when two
    /// buyers split a purchase of `a1 + a2` at its average price:
    /// `a1/(a1+a2) * r_end + a2/(a1+a2) * r_avg`.
    ///
    /// The second buyer's partial is this function with arguments swapped.
    pub fn uniform_payment_gradient(
        &self,
        pool: &PoolState,
        a1: f64,
        a2: f64,
    ) -> Result<f64, CurveError> {
        if !(a1 >= 0.0) {
            return Err(domain("a1", a1));
        }
        if !(a2 >= 0.0) {
            return Err(domain("a2", a2));
        }
        let total = a1 + a2;
        if !(total > 0.0) {
            return Err(domain("a1 + a2", total));
        }
        let r_end = self.end_rate(pool, total)?;
        let r_avg = self.avg_buy_rate(pool, total)?;
        Ok((a1 / total) * r_end + (a2 / total) * r_avg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Curve, PoolState) {
        let pool = PoolState::new(100.0, 100.0).unwrap();
        (Curve::through(CurveKind::ConstantProduct, &pool), pool)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn level_set_inverses() {
        let (curve, _) = setup();
        assert_eq!(curve.y_of_x(100.0).unwrap(), 100.0);
        assert_eq!(curve.y_of_x(50.0).unwrap(), 200.0);
        assert!(close(curve.y_of_x(95.0).unwrap(), 10000.0 / 95.0));
        assert_eq!(curve.x_of_y(200.0).unwrap(), 50.0);
        assert_eq!(curve.x_of_y(125.0).unwrap(), 80.0);
        assert!(curve.y_of_x(0.0).is_err());
        assert!(curve.x_of_y(-1.0).is_err());
    }

    #[test]
    fn market_rates() {
        let (curve, pool) = setup();
        assert_eq!(curve.marginal_rate(&pool), 1.0);
        assert_eq!(curve.marginal_rate(&PoolState::new(50.0, 200.0).unwrap()), 4.0);
        assert_eq!(curve.marginal_rate(&PoolState::new(200.0, 50.0).unwrap()), 0.25);
    }

    #[test]
    fn average_and_end_rates() {
        let (curve, pool) = setup();
        assert_eq!(curve.avg_buy_rate(&pool, 0.0).unwrap(), 1.0);
        assert!(close(curve.avg_buy_rate(&pool, 50.0).unwrap(), 2.0));
        assert!(close(curve.avg_buy_rate(&pool, 5.0).unwrap(), 10000.0 / 9500.0));
        assert_eq!(curve.end_rate(&pool, 0.0).unwrap(), 1.0);
        assert!(close(curve.end_rate(&pool, 50.0).unwrap(), 4.0));
        assert!(close(curve.end_rate(&pool, 10.3).unwrap(), 10000.0 / (89.7 * 89.7)));
        assert!(curve.avg_buy_rate(&pool, 100.0).is_err());
        assert!(curve.end_rate(&pool, -1.0).is_err());
    }

    #[test]
    fn inverse_rates() {
        let (curve, pool) = setup();
        let tol = Tolerances::default();
        assert!(close(curve.x_for_avg_rate(&pool, 2.0).unwrap(), 50.0));
        assert!(close(curve.x_for_avg_rate(&pool, 10000.0 / 9500.0).unwrap(), 5.0));
        assert!(curve.x_for_avg_rate(&pool, 1.0 + 1e-12).unwrap() < 1e-8);
        assert!(curve.x_for_avg_rate(&pool, 1.0).is_err());
        let end = |r| curve.x_for_end_rate(&pool, ExtRate::Finite(r), &tol).unwrap();
        assert!(close(end(4.0), 50.0));
        assert_eq!(end(1.0), 0.0);
        assert!(close(end(2.0), 100.0 - 5000f64.sqrt()));
        assert!(curve.x_for_end_rate(&pool, ExtRate::Finite(0.5), &tol).is_err());
        let cap = curve.x_for_end_rate(&pool, ExtRate::Infinity, &tol).unwrap();
        assert!(cap < 100.0 && cap > 99.99);
    }

    #[test]
    fn net_flow() {
        let (curve, pool) = setup();
        let tol = Tolerances::default();
        assert_eq!(curve.apply_net_flow(&pool, 0.0, 0.0, &tol).unwrap(), pool);
        let p = curve.apply_net_flow(&pool, 50.0, -100.0, &tol).unwrap();
        assert_eq!((p.x_reserve, p.y_reserve), (50.0, 200.0));
        assert!(matches!(
            curve.apply_net_flow(&pool, 50.0, -90.0, &tol),
            Err(CurveError::Conformance { .. })
        ));
        assert!(matches!(
            curve.apply_net_flow(&pool, 100.0, -100.0, &tol),
            Err(CurveError::Depletion { .. })
        ));
    }

    #[test]
    fn payment_gradient() {
        let (curve, pool) = setup();
        assert!(close(curve.uniform_payment_gradient(&pool, 50.0, 0.0).unwrap(), 4.0));
        assert!(close(curve.uniform_payment_gradient(&pool, 0.0, 50.0).unwrap(), 2.0));
        assert!(close(curve.uniform_payment_gradient(&pool, 25.0, 25.0).unwrap(), 3.0));
        assert!(curve.uniform_payment_gradient(&pool, 0.0, 0.0).is_err());
        assert!(curve.uniform_payment_gradient(&pool, 60.0, 40.0).is_err());
    }
}
