#![allow(dead_code)]

use amm_lab::amm::{Curve, CurveKind, PoolState};
use amm_lab::numerics::{ExtRate, Tolerances};
use amm_lab::orders::{Order, OrderType};
use amm_lab::preferences::IntrinsicType;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn setup() -> (Curve, PoolState, Tolerances) {
    let pool = PoolState::new(100.0, 100.0).unwrap();
    (Curve::through(CurveKind::ConstantProduct, &pool), pool, Tolerances::default())
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

/// Quantity in `(0, hi]`.
pub fn quantity(rng: &mut impl Rng, hi: f64) -> f64 {
    hi - rng.gen_range(0.0..hi)
}

pub fn order_type(rng: &mut impl Rng) -> OrderType {
    OrderType::ALL[rng.gen_range(0..OrderType::ALL.len())]
}

/// Any order type, rate log-uniform in `[0.1, 10]`, quantity in `(0, 40]`.
pub fn random_order(rng: &mut impl Rng) -> Order {
    let rate = ExtRate::finite(log_uniform(rng, 0.1, 10.0)).unwrap();
    Order::new(order_type(rng), rate, quantity(rng, 40.0)).unwrap()
}

/// Between one and `max_len` random orders.
pub fn random_batch(rng: &mut impl Rng, max_len: usize) -> Vec<Order> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| random_order(rng)).collect()
}

/// Buy(X) orders only, rates in `[0.1, 10]`.
pub fn random_buy_batch(rng: &mut impl Rng, max_len: usize) -> Vec<Order> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| Order::buy_x(log_uniform(rng, 0.1, 10.0), quantity(rng, 40.0))).collect()
}

/// A strategic scenario on the (100, 100) pool: up to four other orders
/// and a player, all with rates in `[r0/4, 4 r0]` and integer arrival tags.
pub fn random_strategic(rng: &mut impl Rng) -> (Vec<Order>, IntrinsicType) {
    let n = rng.gen_range(0..=4);
    let others = (0..n)
        .map(|_| {
            let rate = ExtRate::finite(log_uniform(rng, 0.25, 4.0)).unwrap();
            let aux = rng.gen_range(0..=4) as f64;
            Order::new(order_type(rng), rate, quantity(rng, 40.0)).unwrap().with_aux(aux).unwrap()
        })
        .collect();
    let rate = ExtRate::finite(log_uniform(rng, 0.25, 4.0)).unwrap();
    let player = IntrinsicType::new(order_type(rng), rate, quantity(rng, 40.0))
        .unwrap()
        .with_aux(rng.gen_range(0..=4) as f64)
        .unwrap();
    (others, player)
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
}

/// One pinned command line of the `ammlab` binary.
pub struct GoldenCase {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
}

/// Fixture paths are relative to the crate root.
pub const GOLDEN_CASES: &[GoldenCase] = &[
    GoldenCase { name: "run_m1_two_buys", args: &["--json", "run", "fixtures/m1_two_buys.json"], exit: 0 },
    GoldenCase { name: "run_empty", args: &["--json", "run", "fixtures/empty.json"], exit: 0 },
    GoldenCase { name: "run_m2_buy_sell", args: &["--json", "run", "fixtures/m2_buy_sell.json"], exit: 0 },
    GoldenCase { name: "run_m2_sell_only", args: &["--json", "run", "fixtures/m2_sell_only.json"], exit: 0 },
    GoldenCase { name: "run_malformed", args: &["--json", "run", "fixtures/malformed.json"], exit: 2 },
    GoldenCase { name: "audit_m1_two_buys", args: &["--json", "audit", "fixtures/m1_two_buys.json"], exit: 0 },
    GoldenCase { name: "audit_m2_two_buys", args: &["--json", "audit", "fixtures/m2_two_buys.json"], exit: 0 },
    GoldenCase { name: "audit_m2_buy_sell", args: &["--json", "audit", "fixtures/m2_buy_sell.json"], exit: 0 },
    GoldenCase { name: "audit_null_wle", args: &["--json", "audit", "fixtures/null_wle.json"], exit: 4 },
    GoldenCase {
        name: "audit_ssu_marginal_bidder",
        args: &["--json", "audit", "fixtures/ssu_marginal_bidder.json"],
        exit: 4,
    },
    GoldenCase { name: "counterexample_thm31", args: &["counterexample", "thm31"], exit: 0 },
    GoldenCase {
        name: "counterexample_thm32",
        args: &["counterexample", "thm32", "--qb", "50", "--eps", "1", "--qs", "10"],
        exit: 0,
    },
    GoldenCase {
        name: "counterexample_trilemma",
        args: &["counterexample", "trilemma", "--r2", "2", "--r1", "3.9"],
        exit: 0,
    },
    GoldenCase { name: "counterexample_thm32_bad_eps", args: &["counterexample", "thm32", "--eps", "5"], exit: 2 },
];
