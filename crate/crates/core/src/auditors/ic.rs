//! Grid search for profitable strategic play.
//!
//! A finite grid can refute incentive compatibility but never prove it, so
//! a passing report only says that no deviation on the grid helped.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::amm::{Curve, PoolState};
use crate::mechanisms::{Mechanism, MechanismError};
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{Order, OrderType, Outcome};
use crate::preferences::{compare_with_slack, IntrinsicType, PrefResult};
use crate::report::{AuditReport, DeviationWitness, Property, Witness};

/// Largest number of other orders the plain model's censorship search
/// enumerates subsets of.
pub const MAX_CENSORABLE: usize = 6;

/// What a strategic player may do besides choosing its own orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyModel {
    /// The player also orders the batch: it may censor other users' orders
    /// and rewrite their arrival tags, and tags its own orders freely.
    #[serde(rename = "plain")]
    Plain,
    /// Orders are sequenced by arrival; the player may only delay its own
    /// orders (tag at least its true one) and cannot touch anyone else's.
    #[serde(rename = "weak")]
    WeakFairSequencing,
}

impl FromStr for StrategyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(StrategyModel::Plain),
            "weak" => Ok(StrategyModel::WeakFairSequencing),
            other => Err(format!("unknown strategy model {other:?} (expected plain or weak)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Coarse,
    #[default]
    Default,
    Fine,
}

impl GridPreset {
    fn resolution(self) -> (usize, usize) {
        match self {
            GridPreset::Coarse => (9, 10),
            GridPreset::Default => (21, 20),
            GridPreset::Fine => (41, 40),
        }
    }
}

impl fmt::Display for GridPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridPreset::Coarse => "coarse",
            GridPreset::Default => "default",
            GridPreset::Fine => "fine",
        })
    }
}

impl FromStr for GridPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coarse" => Ok(GridPreset::Coarse),
            "default" => Ok(GridPreset::Default),
            "fine" => Ok(GridPreset::Fine),
            other => Err(format!("unknown grid preset {other:?} (expected coarse, default or fine)")),
        }
    }
}

/// The finite strategy space searched by [`ic_audit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGrid {
    pub rate_points: Vec<ExtRate>,
    /// Reported quantities; zero stands for abstaining.
    pub qty_points: Vec<f64>,
    /// Orders per player, 1 or 2.
    pub max_sybil: usize,
    /// Adds the unbounded-rate deviations that break uniform-price
    /// mechanisms: buying exactly the volume another bid prices on
    /// average, and buying a sliver.
    pub include_analytic: bool,
    /// Order types the player may report; empty means its own type only.
    #[serde(default)]
    pub order_types: Vec<OrderType>,
    /// Extra arrival tags beyond those present in the scenario.
    #[serde(default)]
    pub aux_points: Vec<f64>,
}

impl DeviationGrid {
    /// Log-spaced rates over `[r0/4, 4 r0]` plus an unbounded rate, and
    /// linear quantities up to `1.5 * qty_scale`.
    pub fn from_preset(preset: GridPreset, r0: f64, qty_scale: f64) -> Self {
        let (n_rates, n_qty) = preset.resolution();
        let (lo, hi) = ((0.25 * r0).ln(), (4.0 * r0).ln());
        let mut rate_points: Vec<ExtRate> = (0..n_rates)
            .map(|k| ExtRate::Finite((lo + (hi - lo) * k as f64 / (n_rates - 1) as f64).exp()))
            .collect();
        rate_points.push(ExtRate::Infinity);
        let top = 1.5 * qty_scale;
        let qty_points = std::iter::once(0.0)
            .chain((1..=n_qty).map(|k| top * k as f64 / n_qty as f64))
            .collect();
        Self {
            rate_points,
            qty_points,
            max_sybil: 2,
            include_analytic: true,
            order_types: Vec::new(),
            aux_points: Vec::new(),
        }
    }

    /// [`DeviationGrid::from_preset`] scaled to a player and the orders it
    /// plays against. A zero-demand player borrows the largest other
    /// quantity as its scale.
    pub fn for_player(preset: GridPreset, curve: &Curve, pool: &PoolState, t: &IntrinsicType, others: &[Order]) -> Self {
        let scale = if t.qty > 0.0 {
            t.qty
        } else {
            others.iter().map(|o| o.qty).fold(0.0, f64::max)
        };
        Self::from_preset(preset, curve.marginal_rate(pool), if scale > 0.0 { scale } else { 1.0 })
    }

    pub fn validate(&self) -> Result<(), AuditError> {
        if self.rate_points.is_empty() || self.qty_points.is_empty() {
            return Err(AuditError::Grid("rate and quantity lists must be non-empty"));
        }
        if !(1..=2).contains(&self.max_sybil) {
            return Err(AuditError::Grid("max_sybil must be 1 or 2"));
        }
        if self.qty_points.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(AuditError::Grid("quantities must be finite and non-negative"));
        }
        if self.aux_points.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(AuditError::Grid("aux tags must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One strategic play: the player's own orders plus, in the plain model,
/// its interference with everyone else's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub orders: Vec<Order>,
    /// Indices into the other users' orders that are dropped.
    pub censored: Vec<usize>,
    /// Other users' orders whose arrival tag is replaced.
    pub aux_rewrites: Vec<(usize, f64)>,
}

struct Space {
    singles: Vec<Order>,
    /// Singles at the player's true tag, the building blocks of Sybil pairs.
    pair_parts: Vec<Order>,
    analytic: Vec<Order>,
    max_sybil: usize,
    aux_points: Vec<f64>,
}

fn tag(order: &Order) -> f64 {
    order.aux.unwrap_or(0.0)
}

impl Space {
    fn build(
        curve: &Curve,
        pool: &PoolState,
        others: &[Order],
        t: &IntrinsicType,
        model: StrategyModel,
        grid: &DeviationGrid,
    ) -> Self {
        let own_aux = t.aux.unwrap_or(0.0);
        let mut aux_points: Vec<f64> = others.iter().map(tag).chain(grid.aux_points.iter().copied()).collect();
        aux_points.push(own_aux);
        let latest = aux_points.iter().copied().fold(0.0, f64::max);
        aux_points.push(latest + 1.0);
        aux_points.sort_by(f64::total_cmp);
        aux_points.dedup();
        let own_points: Vec<f64> = match model {
            StrategyModel::Plain => aux_points.clone(),
            StrategyModel::WeakFairSequencing => aux_points.iter().copied().filter(|&a| a >= own_aux).collect(),
        };

        let types = if grid.order_types.is_empty() { vec![t.otype] } else { grid.order_types.clone() };
        let mut reports = Vec::new();
        for &otype in &types {
            for &rate in &grid.rate_points {
                for &qty in &grid.qty_points {
                    if let Ok(order) = Order::new(otype, rate, qty) {
                        reports.push(order);
                    }
                }
            }
        }
        let at = |o: &Order, a: f64| Order { aux: Some(a), ..*o };
        let singles = reports.iter().flat_map(|o| own_points.iter().map(move |&a| at(o, a))).collect();
        let pair_parts = reports.iter().map(|o| at(o, own_aux)).collect();

        let mut analytic = Vec::new();
        if grid.include_analytic && t.otype == OrderType::BuyX {
            let r0 = curve.marginal_rate(pool);
            let mut volumes: Vec<f64> = others
                .iter()
                .filter(|o| o.otype.demands_x())
                .filter_map(|o| o.rate.value())
                .filter(|&r| r > r0)
                .filter_map(|r| curve.x_for_avg_rate(pool, r).ok())
                .collect();
            volumes.extend([1e-6 * pool.x_reserve, 1e-3 * pool.x_reserve]);
            for qty in volumes {
                if let Ok(order) = Order::new(OrderType::BuyX, ExtRate::Infinity, qty) {
                    analytic.push(at(&order, own_aux));
                }
            }
        }
        Space { singles, pair_parts, analytic, max_sybil: grid.max_sybil, aux_points }
    }

    /// Visits the player's own plays in a fixed order: abstain, singles,
    /// Sybil pairs, analytic deviations.
    fn plays<B>(&self, visit: &mut impl FnMut(&[Order]) -> ControlFlow<B>) -> ControlFlow<B> {
        visit(&[])?;
        for o in &self.singles {
            visit(std::slice::from_ref(o))?;
        }
        if self.max_sybil >= 2 {
            let mut pair = [self.pair_parts.first().copied().unwrap_or(Order::buy_x(1.0, 1.0)); 2];
            for a in &self.pair_parts {
                pair[0] = *a;
                for b in &self.pair_parts {
                    pair[1] = *b;
                    visit(&pair)?;
                }
            }
        }
        for o in &self.analytic {
            visit(std::slice::from_ref(o))?;
        }
        ControlFlow::Continue(())
    }
}

/// Walks the full deviation set: for the plain model every censorship
/// subset and single-order tag rewrite around the player's plays, for the
/// weak model the plays alone.
fn walk<B>(
    space: &Space,
    others: &[Order],
    model: StrategyModel,
    visit: &mut impl FnMut(&[Order], &[usize], Option<(usize, f64)>) -> ControlFlow<B>,
) -> Result<ControlFlow<B>, AuditError> {
    if model == StrategyModel::WeakFairSequencing {
        return Ok(space.plays(&mut |play| visit(play, &[], None)));
    }
    if others.len() > MAX_CENSORABLE {
        return Err(AuditError::Grid("plain-model search supports at most 6 other orders"));
    }
    let mut censored = Vec::with_capacity(others.len());
    for mask in 0u32..(1 << others.len()) {
        censored.clear();
        censored.extend((0..others.len()).filter(|i| mask & (1 << i) != 0));
        if let ControlFlow::Break(b) = space.plays(&mut |play| visit(play, &censored, None)) {
            return Ok(ControlFlow::Break(b));
        }
        for (j, other) in others.iter().enumerate() {
            if mask & (1 << j) != 0 {
                continue;
            }
            for &a in &space.aux_points {
                if a == tag(other) {
                    continue;
                }
                if let ControlFlow::Break(b) = space.plays(&mut |play| visit(play, &censored, Some((j, a)))) {
                    return Ok(ControlFlow::Break(b));
                }
            }
        }
    }
    Ok(ControlFlow::Continue(()))
}

/// Lists every deviation [`ic_audit`] would try, in its search order.
pub fn enumerate_deviations(
    curve: &Curve,
    pool: &PoolState,
    others: &[Order],
    t: &IntrinsicType,
    model: StrategyModel,
    grid: &DeviationGrid,
) -> Result<Vec<Deviation>, AuditError> {
    grid.validate()?;
    let space = Space::build(curve, pool, others, t, model, grid);
    let mut all = Vec::new();
    let _ = walk::<()>(&space, others, model, &mut |play, censored, rewrite| {
        all.push(Deviation {
            orders: play.to_vec(),
            censored: censored.to_vec(),
            aux_rewrites: rewrite.into_iter().collect(),
        });
        ControlFlow::Continue(())
    })?;
    Ok(all)
}

/// Assembles batches and runs the mechanism, reusing buffers across plays.
struct Runner<'a, M: ?Sized> {
    mechanism: &'a M,
    curve: &'a Curve,
    pool: &'a PoolState,
    tol: &'a Tolerances,
    others: &'a [Order],
    queue: Vec<(f64, bool, Order)>,
    batch: Vec<Order>,
}

impl<M: Mechanism + ?Sized> Runner<'_, M> {
    /// The player's joint outcome. The batch is the other orders followed by
    /// the player's, stably sorted by arrival tag.
    fn joint(
        &mut self,
        play: &[Order],
        censored: &[usize],
        rewrite: Option<(usize, f64)>,
    ) -> Result<Outcome, MechanismError> {
        self.queue.clear();
        for (i, o) in self.others.iter().enumerate() {
            if censored.contains(&i) {
                continue;
            }
            let a = match rewrite {
                Some((j, a)) if j == i => a,
                _ => tag(o),
            };
            self.queue.push((a, false, *o));
        }
        self.queue.extend(play.iter().map(|o| (tag(o), true, *o)));
        self.queue.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.batch.clear();
        self.batch.extend(self.queue.iter().map(|e| e.2));
        let result = self.mechanism.run(self.curve, self.pool, &self.batch, self.tol)?;
        Ok(self.queue.iter().zip(&result.outcomes).filter(|(e, _)| e.1).map(|(_, o)| *o).sum())
    }
}

/// Searches for a play that gives the player a strictly better joint
/// outcome than reporting its true type.
///
/// Plays on which the mechanism itself errors are skipped; an error on the
/// truthful batch is returned. Utility differences within `tol_audit` count
/// as ties.
#[allow(clippy::too_many_arguments)]
pub fn ic_audit<M: Mechanism + ?Sized>(
    mechanism: &M,
    curve: &Curve,
    pool: &PoolState,
    others: &[Order],
    t: &IntrinsicType,
    model: StrategyModel,
    grid: &DeviationGrid,
    tol: &Tolerances,
) -> Result<AuditReport, AuditError> {
    grid.validate()?;
    let space = Space::build(curve, pool, others, t, model, grid);
    let mut runner = Runner {
        mechanism,
        curve,
        pool,
        tol,
        others,
        queue: Vec::with_capacity(others.len() + 2),
        batch: Vec::with_capacity(others.len() + 2),
    };
    let honest_play: Vec<Order> = t.honest_order().into_iter().collect();
    let honest = runner.joint(&honest_play, &[], None)?;

    let flow = walk(&space, others, model, &mut |play, censored, rewrite| {
        let Ok(deviant) = runner.joint(play, censored, rewrite) else {
            return ControlFlow::Continue(());
        };
        if compare_with_slack(t, &honest, &deviant, tol.tol_audit) == PrefResult::StrictlyBetter {
            return ControlFlow::Break(DeviationWitness {
                orders: play.to_vec(),
                censored: censored.to_vec(),
                aux_rewrites: rewrite.into_iter().collect(),
                honest_outcome: honest,
                deviant_outcome: deviant,
                preference: PrefResult::StrictlyBetter,
            });
        }
        ControlFlow::Continue(())
    })?;
    Ok(match flow {
        ControlFlow::Break(w) => {
            AuditReport::fail(Property::IncentiveCompatibility, Witness::Deviation(Box::new(w)))
        }
        ControlFlow::Continue(()) => AuditReport::pass(Property::IncentiveCompatibility),
    })
}

/// Re-runs a deviation and returns the player's joint outcome.
pub fn replay_deviation<M: Mechanism + ?Sized>(
    mechanism: &M,
    curve: &Curve,
    pool: &PoolState,
    others: &[Order],
    deviation: &Deviation,
    tol: &Tolerances,
) -> Result<Outcome, MechanismError> {
    let mut runner = Runner { mechanism, curve, pool, tol, others, queue: Vec::new(), batch: Vec::new() };
    let rewrite = deviation.aux_rewrites.first().copied();
    runner.joint(&deviation.orders, &deviation.censored, rewrite)
}

impl From<&DeviationWitness> for Deviation {
    fn from(w: &DeviationWitness) -> Self {
        Deviation { orders: w.orders.clone(), censored: w.censored.clone(), aux_rewrites: w.aux_rewrites.clone() }
    }
}
