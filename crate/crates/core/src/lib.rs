//! Batch execution of limit orders against a constant-product AMM, with
//! auditors for the properties a batch mechanism should have and numeric
//! constructions showing which of them conflict.
//!
//! ```
//! use amm_lab::amm::{Curve, CurveKind, PoolState};
//! use amm_lab::auditors::check_uniform_pricing;
//! use amm_lab::mechanisms::uniform_clearing;
//! use amm_lab::numerics::Tolerances;
//! use amm_lab::orders::Order;
//!
//! let pool = PoolState::new(100.0, 100.0).unwrap();
//! let curve = Curve::through(CurveKind::ConstantProduct, &pool);
//! let tol = Tolerances::default();
//! let batch = [Order::buy_x(2.0, 30.0), Order::sell_x(0.5, 5.0)];
//!
//! let result = uniform_clearing(&curve, &pool, &batch, &tol).unwrap();
//! assert!(check_uniform_pricing(&batch, &result, &tol).unwrap().passed);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amm;
pub mod auditors;
pub mod cli;
pub mod json;
pub mod mechanisms;
pub mod numerics;
pub mod orders;
pub mod preferences;
pub mod report;
pub mod scenarios;
