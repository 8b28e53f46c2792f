//! Strategy profiles for the seller, nature and the buyer; Monte Carlo play of
//! a profile; and exact deviation audits for each of the three players.
//!
//! The remaining market is a list of cells `(a, b]` carrying probability
//! mass. A cell is an information set of the buyer: every type in it has seen
//! the same signals. Because sales are the only public event and each cell
//! reacts with a known purchase probability, the market after "no sale"
//! evolves deterministically, so profile values are computed exactly along a
//! single public path.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coase::{GameConfig, Horizon};
use crate::dist::ValueDistribution;
use crate::error::{check_delta, invalid, Error, Result};
use crate::nature::{nature_commitment_profit, truncated_pressed_profit};
use crate::numeric::bisect_predicate;
use crate::robust::RobustEquilibrium;

/// Piecewise-linear function of the public state, constant beyond its ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Curve { x: vec![lo, hi], y: vec![value, value] }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || u <= self.x[0] {
            return self.y[0];
        }
        if u >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|x| *x <= u) - 1;
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        if x1 <= x0 {
            return self.y[k + 1];
        }
        self.y[k] + (self.y[k + 1] - self.y[k]) * (u - x0) / (x1 - x0)
    }

    fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(invalid("price curve needs matching, non-empty x and y"));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(invalid("price curve has non-finite entries"));
        }
        if self.x.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("price curve abscissae must be sorted"));
        }
        Ok(())
    }
}

/// Seller price as a function of the top of the remaining market, one curve
/// per number of remaining periods (`levels[n - 1]`), or a single curve for
/// every period when `stationary`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SellerRule {
    pub levels: Vec<Curve>,
    #[serde(default)]
    pub stationary: bool,
}

/// Nature's signal in one period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NatureStep {
    /// Threshold at the largest `y` below which every buyer weakly prefers
    /// to wait, given the seller's next price at state `y`.
    Indifference,
    /// No signal.
    NoInformation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NatureRule {
    pub levels: Vec<NatureStep>,
    #[serde(default)]
    pub stationary: bool,
}

/// Buyer purchase rule given the posterior mean of the current cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuyerRule {
    /// Buys when buying now beats buying next period at the expected next
    /// price; exact ties buy with probability `tie_prob`.
    Obedient {
        #[serde(default)]
        tie_prob: f64,
    },
    /// Buys whenever the posterior mean covers the price.
    Greedy,
}

/// Strategies of all three players, with an optional profile that takes over
/// after the seller departs from its prescribed price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub name: String,
    pub seller: SellerRule,
    pub nature: NatureRule,
    pub buyer: BuyerRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversion: Option<Box<StrategyProfile>>,
}

/// Periods left: `None` for an infinite horizon.
type Left = Option<usize>;

fn pick<'a, T>(levels: &'a [T], stationary: bool, n: Left, what: &str) -> Result<&'a T> {
    if stationary {
        return levels.last().ok_or_else(|| Error::ProfileIncomplete(format!("{what} rule has no levels")));
    }
    match n {
        Some(n) => levels
            .get(n.wrapping_sub(1))
            .ok_or_else(|| Error::ProfileIncomplete(format!("no {what} rule with {n} periods left"))),
        None => Err(Error::ProfileIncomplete(format!(
            "{what} rule is not stationary but the horizon is infinite"
        ))),
    }
}

/// A block of buyer types `(a, b]` with its remaining probability mass.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    a: f64,
    b: f64,
    w: f64,
}

/// Cell after the period's signal, with its purchase probability.
#[derive(Clone, Copy, Debug)]
struct Part {
    a: f64,
    b: f64,
    mass: f64,
    buy: f64,
}

#[derive(Clone, Debug)]
struct Stage {
    left: Left,
    cells: Vec<Cell>,
    price: f64,
    threshold: f64,
    parts: Vec<Part>,
    discount: f64,
    /// Reached only if some type skipped a purchase it was meant to make.
    off_path: bool,
}

#[derive(Clone, Debug, Default)]
struct Trace {
    stages: Vec<Stage>,
    profit: f64,
    surplus: f64,
}

struct Game<'a> {
    f: &'a ValueDistribution,
    delta: f64,
    lo: f64,
    hi: f64,
}

const PRICE_MATCH: f64 = 1e-12;
const PATH_CAP: usize = 100_000;

fn top(cells: &[Cell]) -> Option<f64> {
    cells.iter().filter(|c| c.w > 0.0).map(|c| c.b).reduce(f64::max)
}

fn next_left(n: Left) -> Left {
    n.map(|n| n - 1)
}

impl StrategyProfile {
    /// Checks that every rule is well formed and covers the horizon.
    pub fn validate(&self, horizon: Horizon) -> Result<()> {
        for c in &self.seller.levels {
            c.validate()?;
        }
        if let BuyerRule::Obedient { tie_prob } = self.buyer {
            if !(0.0..=1.0).contains(&tie_prob) {
                return Err(invalid(format!("tie probability {tie_prob} outside [0,1]")));
            }
        }
        match horizon {
            Horizon::Finite(t) => {
                pick(&self.seller.levels, self.seller.stationary, Some(t), "seller")?;
                pick(&self.nature.levels, self.nature.stationary, Some(t), "nature")?;
            }
            Horizon::Infinite => {
                pick(&self.seller.levels, self.seller.stationary, None, "seller")?;
                pick(&self.nature.levels, self.nature.stationary, None, "nature")?;
            }
        }
        if let Some(r) = &self.reversion {
            r.validate(horizon)?;
        }
        Ok(())
    }

    fn seller_price(&self, k: f64, n: Left) -> Result<f64> {
        Ok(pick(&self.seller.levels, self.seller.stationary, n, "seller")?.eval(k))
    }

    fn buy_prob(&self, m: f64, p: f64, p_next: Option<f64>, delta: f64) -> f64 {
        match self.buyer {
            BuyerRule::Greedy => {
                if m >= p {
                    1.0
                } else {
                    0.0
                }
            }
            BuyerRule::Obedient { tie_prob } => {
                let gain = match p_next {
                    Some(q) => (m - p) - delta * (m - q),
                    None => m - p,
                };
                let tol = 1e-9 * (1.0 + p.abs() + m.abs());
                if gain > tol {
                    1.0
                } else if gain < -tol {
                    0.0
                } else {
                    tie_prob
                }
            }
        }
    }

    /// Largest `y <= k` such that every buyer below `y` weakly prefers
    /// waiting at price `p`, given the seller's next price at state `y`. This
    /// is the public state the buyer rule anticipates after a no-sale period,
    /// whatever signal nature actually sends.
    fn indifference(&self, g: &Game, cells: &[Cell], k: f64, p: f64, n: Left) -> Result<f64> {
        let next = next_left(n);
        let mut failure = None;
        let mut waits = |y: f64| -> bool {
            let mut m = f64::NEG_INFINITY;
            for c in cells.iter().filter(|c| c.w > 0.0 && c.a < y) {
                let b = c.b.min(y);
                if g.f.cdf(b) - g.f.cdf(c.a) > 0.0 {
                    m = m.max(g.f.interval_mean(c.a, b));
                }
            }
            if m == f64::NEG_INFINITY {
                return true;
            }
            let value = if next == Some(0) {
                m
            } else {
                match self.seller_price(y, next) {
                    Ok(q) => (1.0 - g.delta) * m + g.delta * q,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return false;
                    }
                }
            };
            value <= p + 1e-12 * (1.0 + p.abs())
        };
        let y = if waits(k) {
            k
        } else {
            let scan = 64;
            let grid = |i: usize| g.lo + (k - g.lo) * i as f64 / scan as f64;
            match (0..scan).rev().find(|&i| waits(grid(i))) {
                None => g.lo,
                Some(i) => bisect_predicate(&mut waits, grid(i), grid(i + 1), 1e-14 * (1.0 + g.hi.abs())),
            }
        };
        match failure {
            Some(e) => Err(e),
            None => Ok(y),
        }
    }

    fn threshold(&self, g: &Game, n: Left, anticipated: f64) -> Result<f64> {
        Ok(match pick(&self.nature.levels, self.nature.stationary, n, "nature")? {
            NatureStep::NoInformation => g.lo,
            NatureStep::Indifference => anticipated,
        })
    }

    /// Plays from `cells` with `n` periods left. The first period's price and
    /// threshold can be overridden; a price away from the prescribed one hands
    /// play to the reversion profile, if any, from that period's responses on.
    ///
    /// With `record` set the stages are kept; if the whole market buys while
    /// periods remain, recording goes on off path with the types below the
    /// next public state still "in the market", so that a buyer who skipped
    /// the purchase can be audited against the prices they would face.
    fn play(&self, g: &Game, cells: Vec<Cell>, n: Left, price: Option<f64>, threshold: Option<f64>, record: bool) -> Result<Trace> {
        let mut active = self;
        let mut cells = cells;
        let mut n = n;
        let mut disc = 1.0;
        let mut off_path = false;
        let mut out = Trace::default();
        for t in 0.. {
            let mass: f64 = cells.iter().map(|c| c.w).sum();
            if n == Some(0) || mass <= 0.0 || disc * mass < 1e-16 {
                break;
            }
            if t >= PATH_CAP {
                return Err(Error::Nonconvergence { iterations: t, last_change: disc * mass });
            }
            let k = top(&cells).unwrap_or(g.lo);
            let prescribed = active.seller_price(k, n)?;
            let p = if t == 0 { price.unwrap_or(prescribed) } else { prescribed };
            if (p - prescribed).abs() > PRICE_MATCH * (1.0 + p.abs()) {
                if let Some(r) = &active.reversion {
                    active = r;
                }
            }
            let anticipated = active.indifference(g, &cells, k, p, n)?;
            let y = match (t, threshold) {
                (0, Some(y)) => y.clamp(g.lo, k),
                _ => active.threshold(g, n, anticipated)?,
            };
            let (revenue, surplus, parts, mut next) = active.respond(g, &cells, k, n, p, y, anticipated)?;
            if !off_path {
                out.profit += disc * revenue;
                out.surplus += disc * surplus;
            }
            let off_path_next = record && next.is_empty() && next_left(n) != Some(0);
            if off_path_next {
                let k_next = if anticipated > g.lo && anticipated < k { anticipated } else { k };
                next = parts.iter().filter(|q| q.b <= k_next).map(|q| Cell { a: q.a, b: q.b, w: q.mass }).collect();
                if next.is_empty() {
                    next = parts.iter().map(|q| Cell { a: q.a, b: q.b, w: q.mass }).collect();
                }
            }
            if record {
                let stage = Stage { left: n, cells: cells.clone(), price: p, threshold: y, parts, discount: disc, off_path };
                out.stages.push(stage);
            }
            if record && off_path_next {
                off_path = true;
            }
            cells = next;
            n = next_left(n);
            disc *= g.delta;
        }
        Ok(out)
    }

    /// Splits each cell at `y`, applies the buyer rule and returns
    /// `(revenue, surplus, parts, remaining cells)` for the period.
    #[allow(clippy::type_complexity, clippy::too_many_arguments)]
    fn respond(
        &self,
        g: &Game,
        cells: &[Cell],
        k: f64,
        n: Left,
        p: f64,
        y: f64,
        anticipated: f64,
    ) -> Result<(f64, f64, Vec<Part>, Vec<Cell>)> {
        let next = next_left(n);
        let k_next = if anticipated > g.lo && anticipated < k { anticipated } else { k };
        let p_next = if next == Some(0) { None } else { Some(self.seller_price(k_next, next)?) };
        let (mut revenue, mut surplus) = (0.0, 0.0);
        let mut parts = Vec::new();
        let mut remaining = Vec::new();
        for c in cells.iter().filter(|c| c.w > 0.0) {
            let whole = g.f.cdf(c.b) - g.f.cdf(c.a);
            if whole <= 0.0 {
                continue;
            }
            let scale = c.w / whole;
            let pieces = if y > c.a && y < c.b { [(c.a, y), (y, c.b)] } else { [(c.a, c.b), (c.b, c.b)] };
            for (a, b) in pieces {
                let fm = g.f.cdf(b) - g.f.cdf(a);
                if b <= a || fm <= 0.0 {
                    continue;
                }
                let m = g.f.interval_mean(a, b);
                let buy = self.buy_prob(m, p, p_next, g.delta);
                let mass = fm * scale;
                revenue += p * buy * mass;
                surplus += buy * (g.f.partial_expectation(a, b) - p * fm) * scale;
                parts.push(Part { a, b, mass, buy });
                if buy < 1.0 {
                    remaining.push(Cell { a, b, w: mass * (1.0 - buy) });
                }
            }
        }
        Ok((revenue, surplus, parts, remaining))
    }
}

fn game<'a>(cfg: &'a GameConfig) -> Result<Game<'a>> {
    check_delta(cfg.delta)?;
    cfg.tolerances.validate()?;
    if cfg.horizon == Horizon::Finite(0) {
        return Err(invalid("horizon must be at least one period"));
    }
    cfg.dist.require_continuous("simulation")?;
    let (lo, hi) = cfg.dist.support();
    Ok(Game { f: &cfg.dist, delta: cfg.delta, lo, hi })
}

fn start(cfg: &GameConfig) -> (Vec<Cell>, Left) {
    let (lo, hi) = cfg.dist.support();
    let n = match cfg.horizon {
        Horizon::Finite(t) => Some(t),
        Horizon::Infinite => None,
    };
    (vec![Cell { a: lo, b: hi, w: 1.0 }], n)
}

fn on_path<'a>(profile: &StrategyProfile, cfg: &'a GameConfig) -> Result<(Game<'a>, Trace)> {
    let g = game(cfg)?;
    profile.validate(cfg.horizon)?;
    let (cells, n) = start(cfg);
    let trace = profile.play(&g, cells, n, None, None, true)?;
    Ok((g, trace))
}

/// Expected discounted profit and buyer surplus of a profile, computed exactly.
pub fn profile_value(profile: &StrategyProfile, cfg: &GameConfig) -> Result<(f64, f64)> {
    let (_, trace) = on_path(profile, cfg)?;
    Ok((trace.profit, trace.surplus))
}

/// Probability that the good is still unsold after each on-path period.
pub fn survival(profile: &StrategyProfile, cfg: &GameConfig) -> Result<Vec<f64>> {
    let (_, trace) = on_path(profile, cfg)?;
    Ok(trace
        .stages
        .iter()
        .filter(|s| !s.off_path)
        .map(|s| s.parts.iter().map(|q| q.mass * (1.0 - q.buy)).sum())
        .collect())
}

/// Mean, standard deviation and 95% half-width.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub sd: f64,
    pub ci95: f64,
}

impl Estimate {
    fn of(xs: impl Iterator<Item = f64> + Clone, n: usize) -> Self {
        let mean = xs.clone().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let sd = var.sqrt();
        Estimate { mean, sd, ci95: 1.96 * sd / (n as f64).sqrt() }
    }
}

/// Monte Carlo results with the exact values and optional audit suprema.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SimReport {
    pub profile: String,
    pub n_paths: usize,
    pub seed: u64,
    pub profit: Estimate,
    pub surplus: Estimate,
    pub analytic_profit: f64,
    pub analytic_surplus: f64,
    /// Number of sales in period `t + 1`.
    pub sale_time_histogram: Vec<u64>,
    pub unsold: u64,
    pub mean_sale_time: Option<f64>,
    pub max_seller_deviation_gain: Option<f64>,
    pub max_nature_deviation_drop: Option<f64>,
    pub max_buyer_violation: Option<f64>,
    /// Deviations considered for nature in the audits.
    pub nature_deviation_space: String,
}

/// Plays `n_paths` independent episodes. Path `i` draws from its own ChaCha
/// stream `(seed, i)`, so results do not depend on the number of threads.
pub fn simulate(profile: &StrategyProfile, cfg: &GameConfig, n_paths: usize, seed: u64) -> Result<SimReport> {
    if n_paths == 0 {
        return Err(invalid("at least one path is needed"));
    }
    let (g, trace) = on_path(profile, cfg)?;
    let stages: Vec<&Stage> = trace.stages.iter().filter(|s| !s.off_path).collect();
    let outcomes = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let v = g.f.quantile(rng.gen::<f64>());
            for (t, s) in stages.iter().enumerate() {
                let part = s.parts.iter().find(|q| v >= q.a && v <= q.b).ok_or_else(|| {
                    Error::ProfileIncomplete(format!("type {v} is outside the remaining market in period {}", t + 1))
                })?;
                let buys = part.buy >= 1.0 || (part.buy > 0.0 && rng.gen::<f64>() < part.buy);
                if buys {
                    return Ok((s.discount * s.price, s.discount * (v - s.price), Some(t)));
                }
            }
            Ok((0.0, 0.0, None))
        })
        .collect::<Result<Vec<(f64, f64, Option<usize>)>>>()?;
    let mut hist = vec![0u64; stages.len()];
    let mut unsold = 0;
    for (_, _, t) in &outcomes {
        match t {
            Some(t) => hist[*t] += 1,
            None => unsold += 1,
        }
    }
    let sold = n_paths as u64 - unsold;
    let mean_sale_time = (sold > 0)
        .then(|| hist.iter().enumerate().map(|(t, c)| (t + 1) as f64 * *c as f64).sum::<f64>() / sold as f64);
    Ok(SimReport {
        profile: profile.name.clone(),
        n_paths,
        seed,
        profit: Estimate::of(outcomes.iter().map(|o| o.0), n_paths),
        surplus: Estimate::of(outcomes.iter().map(|o| o.1), n_paths),
        analytic_profit: trace.profit,
        analytic_surplus: trace.surplus,
        sale_time_histogram: hist,
        unsold,
        mean_sale_time,
        max_seller_deviation_gain: None,
        max_nature_deviation_drop: None,
        max_buyer_violation: None,
        nature_deviation_space: "partitional thresholds".into(),
    })
}

const MIN_STATE_MASS: f64 = 1e-9;

fn audited(trace: &Trace) -> Vec<&Stage> {
    trace
        .stages
        .iter()
        .filter(|s| !s.off_path && s.cells.iter().map(|c| c.w).sum::<f64>() >= MIN_STATE_MASS)
        .collect()
}

fn sup(values: Vec<Result<f64>>) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for v in values {
        best = best.max(v?);
    }
    Ok(if best == f64::NEG_INFINITY { 0.0 } else { best })
}

/// Largest gain, per unit of remaining mass, from a one-shot price deviation
/// at any on-path state, with play continuing per the profile (including its
/// reversion profile).
pub fn audit_seller(profile: &StrategyProfile, cfg: &GameConfig, price_grid: &[f64]) -> Result<f64> {
    let (g, trace) = on_path(profile, cfg)?;
    let stages = audited(&trace);
    let jobs: Vec<(usize, f64)> =
        (0..stages.len()).flat_map(|i| price_grid.iter().map(move |&p| (i, p)).chain([(i, f64::NAN)])).collect();
    let values: Vec<Result<f64>> = stages
        .par_iter()
        .map(|s| profile.play(&g, s.cells.clone(), s.left, None, None, false).map(|t| t.profit))
        .collect();
    let base = values.into_iter().collect::<Result<Vec<f64>>>()?;
    sup(jobs
        .par_iter()
        .map(|&(i, p)| {
            let s = stages[i];
            let price = if p.is_nan() { s.price } else { p };
            let mass: f64 = s.cells.iter().map(|c| c.w).sum();
            let dev = profile.play(&g, s.cells.clone(), s.left, Some(price), None, false)?;
            Ok((dev.profit - base[i]) / mass)
        })
        .collect())
}

/// Largest profit reduction, per unit of remaining mass, that nature forgoes
/// at an on-path state by not switching that period's threshold to one on
/// the grid. Deviations are partitional thresholds only.
pub fn audit_nature(profile: &StrategyProfile, cfg: &GameConfig, threshold_grid: &[f64]) -> Result<f64> {
    let (g, trace) = on_path(profile, cfg)?;
    let stages = audited(&trace);
    let jobs: Vec<(usize, f64)> = (0..stages.len())
        .flat_map(|i| threshold_grid.iter().map(move |&y| (i, y)).chain([(i, stages[i].threshold)]))
        .collect();
    let values: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(i, y)| {
            let s = stages[i];
            profile.play(&g, s.cells.clone(), s.left, Some(s.price), Some(y), false).map(|t| (i, t.profit))
        })
        .collect();
    let mut lowest = vec![f64::INFINITY; stages.len()];
    for v in values {
        let (i, profit) = v?;
        lowest[i] = lowest[i].min(profit);
    }
    sup(stages
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mass: f64 = s.cells.iter().map(|c| c.w).sum();
            let on = profile.play(&g, s.cells.clone(), s.left, Some(s.price), Some(s.threshold), false)?;
            Ok((on.profit - lowest[i]) / mass)
        })
        .collect())
}

/// Largest violation of the buyer's sequential rationality on path. For each
/// on-path cell, buying now is compared with the best stopping rule along the
/// on-path public sequence of prices and signals; a violation is the amount
/// by which the action the rule takes (with positive probability) is worse.
pub fn audit_buyer(profile: &StrategyProfile, cfg: &GameConfig) -> Result<f64> {
    let (g, trace) = on_path(profile, cfg)?;
    let stages = &trace.stages;
    let mut memo = HashMap::new();
    let mut worst: f64 = 0.0;
    for (t, s) in stages.iter().enumerate() {
        if s.off_path || s.cells.iter().map(|c| c.w).sum::<f64>() < MIN_STATE_MASS {
            continue;
        }
        for part in s.parts.iter().filter(|q| q.mass >= MIN_STATE_MASS) {
            let buy = g.f.interval_mean(part.a, part.b) - s.price;
            let wait = g.delta * wait_value(&g, stages, t + 1, part.a, part.b, &mut memo);
            if part.buy > 0.0 {
                worst = worst.max(wait - buy);
            }
            if part.buy < 1.0 {
                worst = worst.max(buy - wait);
            }
        }
    }
    Ok(worst)
}

/// Value of a buyer with information set `(a, b]` entering period `t` of the
/// public path and stopping optimally; zero once the path ends.
fn wait_value(g: &Game, stages: &[Stage], t: usize, a: f64, b: f64, memo: &mut HashMap<(usize, u64, u64), f64>) -> f64 {
    let Some(s) = stages.get(t) else { return 0.0 };
    let key = (t, a.to_bits(), b.to_bits());
    if let Some(v) = memo.get(&key) {
        return *v;
    }
    let whole = g.f.cdf(b) - g.f.cdf(a);
    let y = s.threshold;
    let pieces: Vec<(f64, f64)> = if y > a && y < b { vec![(a, y), (y, b)] } else { vec![(a, b)] };
    let mut total = 0.0;
    for (lo, hi) in pieces {
        let fm = g.f.cdf(hi) - g.f.cdf(lo);
        if fm <= 0.0 || whole <= 0.0 {
            continue;
        }
        let now = g.f.interval_mean(lo, hi) - s.price;
        let later = g.delta * wait_value(g, stages, t + 1, lo, hi, memo);
        total += fm / whole * now.max(later);
    }
    memo.insert(key, total);
    total
}

/// Suprema of the three audits.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct AuditReport {
    pub seller: f64,
    pub nature: f64,
    pub buyer: f64,
}

/// Runs all three audits with `grid_n + 1` equally spaced prices and
/// thresholds on the support.
pub fn audit_all(profile: &StrategyProfile, cfg: &GameConfig, grid_n: usize) -> Result<AuditReport> {
    let (lo, hi) = cfg.dist.support();
    let grid: Vec<f64> = (0..=grid_n.max(1)).map(|i| lo + (hi - lo) * i as f64 / grid_n.max(1) as f64).collect();
    Ok(AuditReport {
        seller: audit_seller(profile, cfg, &grid)?,
        nature: audit_nature(profile, cfg, &grid)?,
        buyer: audit_buyer(profile, cfg)?,
    })
}

impl SimReport {
    pub fn attach_audits(&mut self, audits: &AuditReport) {
        self.max_seller_deviation_gain = Some(audits.seller);
        self.max_nature_deviation_drop = Some(audits.nature);
        self.max_buyer_violation = Some(audits.buyer);
    }
}

/// Profile of the robust equilibrium: the solved seller policy, indifference
/// thresholds, and a buyer who waits when indifferent.
pub fn equilibrium_profile(eq: &RobustEquilibrium, cfg: &GameConfig) -> Result<StrategyProfile> {
    let policy = &eq.pressed_eq.policy;
    let curve = |n: usize| {
        let (x, y) = policy.price_samples(n, 3);
        Curve { x, y }
    };
    let (levels, stationary) = match cfg.horizon {
        Horizon::Finite(t) => ((1..=t).map(curve).collect(), false),
        Horizon::Infinite => (vec![curve(policy.depth())], true),
    };
    let count = if stationary { 1 } else { levels.len() };
    Ok(StrategyProfile {
        name: "robust-equilibrium".into(),
        seller: SellerRule { levels, stationary },
        nature: NatureRule { levels: vec![NatureStep::Indifference; count], stationary },
        buyer: BuyerRule::Obedient { tie_prob: 0.0 },
        reversion: None,
    })
}

/// Constant price `E[v]` with no information; the buyer, always indifferent,
/// buys with probability `rho`. Any other price hands play to `reversion`.
pub fn constant_price_profile(f: &ValueDistribution, rho: f64, reversion: StrategyProfile) -> StrategyProfile {
    let (lo, hi) = f.support();
    StrategyProfile {
        name: "constant-price".into(),
        seller: SellerRule { levels: vec![Curve::constant(lo, hi, f.mean())], stationary: true },
        nature: NatureRule { levels: vec![NatureStep::NoInformation], stationary: true },
        buyer: BuyerRule::Obedient { tie_prob: rho },
        reversion: Some(Box::new(reversion)),
    }
}

/// Two-period profile where nature commits to no information in period 2:
/// the seller's last price is the static worst-case profit on the remaining
/// types, and the first threshold leaves the no-buy group indifferent.
pub fn commitment_profile(f: &ValueDistribution, delta: f64) -> Result<StrategyProfile> {
    let outcome = nature_commitment_profit(f, delta)?;
    let (lo, hi) = f.support();
    let n = 512;
    let x: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let y = x.par_iter().map(|&k| truncated_pressed_profit(f, k)).collect();
    Ok(StrategyProfile {
        name: "commitment".into(),
        seller: SellerRule { levels: vec![Curve { x, y }, Curve::constant(lo, hi, outcome.p1)], stationary: false },
        nature: NatureRule { levels: vec![NatureStep::NoInformation, NatureStep::Indifference], stationary: false },
        buyer: BuyerRule::Obedient { tie_prob: 0.0 },
        reversion: None,
    })
}

/// A fixed price every period with no information and a buyer who buys
/// whenever that is at least as good as waiting.
pub fn posted_price_profile(f: &ValueDistribution, price: f64) -> StrategyProfile {
    let (lo, hi) = f.support();
    StrategyProfile {
        name: "posted-price".into(),
        seller: SellerRule { levels: vec![Curve::constant(lo, hi, price)], stationary: true },
        nature: NatureRule { levels: vec![NatureStep::NoInformation], stationary: true },
        buyer: BuyerRule::Obedient { tie_prob: 1.0 },
        reversion: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coase::Tolerances;
    use crate::robust::solve_robust;

    fn u02() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 2.0).unwrap()
    }

    fn declining(lo: f64, hi: f64, prices: &[f64], buyer: BuyerRule) -> StrategyProfile {
        StrategyProfile {
            name: "declining".into(),
            seller: SellerRule {
                levels: prices.iter().rev().map(|&p| Curve::constant(lo, hi, p)).collect(),
                stationary: false,
            },
            nature: NatureRule { levels: vec![NatureStep::NoInformation; prices.len()], stationary: false },
            buyer,
            reversion: None,
        }
    }

    #[test]
    fn curve_interpolates_and_clamps() {
        let c = Curve { x: vec![0.0, 1.0, 1.0, 2.0], y: vec![0.0, 1.0, 3.0, 4.0] };
        assert_eq!(c.eval(-1.0), 0.0);
        assert_eq!(c.eval(0.5), 0.5);
        assert_eq!(c.eval(1.5), 3.5);
        assert_eq!(c.eval(9.0), 4.0);
    }

    #[test]
    fn equilibrium_profile_reproduces_the_solution() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(2));
        let eq = solve_robust(&cfg).unwrap();
        let profile = equilibrium_profile(&eq, &cfg).unwrap();
        let (profit, surplus) = profile_value(&profile, &cfg).unwrap();
        assert!((profit - 0.225).abs() < 1e-9, "{profit}");
        assert!((surplus - eq.surplus).abs() < 1e-9);
        let audits = audit_all(&profile, &cfg, 64).unwrap();
        assert!(audits.seller <= 1e-6 && audits.nature <= 1e-6 && audits.buyer <= 1e-8, "{audits:?}");
    }

    #[test]
    fn simulation_is_reproducible_and_consistent() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(2));
        let eq = solve_robust(&cfg).unwrap();
        let profile = equilibrium_profile(&eq, &cfg).unwrap();
        let a = simulate(&profile, &cfg, 20_000, 7).unwrap();
        let b = simulate(&profile, &cfg, 20_000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.profit.mean - 0.225).abs() < 3.0 * a.profit.sd / (20_000f64).sqrt());
        assert_eq!(a.sale_time_histogram.iter().sum::<u64>() + a.unsold, 20_000);
        let c = simulate(&profile, &cfg, 20_000, 8).unwrap();
        assert_ne!(a.profit.mean, c.profit.mean);
    }

    #[test]
    fn posted_low_price_sells_at_once() {
        let f = ValueDistribution::uniform(1.0, 2.0).unwrap();
        let cfg = GameConfig::new(f.clone(), 0.9, Horizon::Finite(3));
        let r = simulate(&posted_price_profile(&f, 1.0), &cfg, 1000, 1).unwrap();
        assert_eq!(r.profit.mean, 1.0);
        assert_eq!(r.profit.sd, 0.0);
        assert_eq!(r.sale_time_histogram[0], 1000);
    }

    #[test]
    fn greedy_buyer_is_flagged() {
        let cfg = GameConfig::new(u02(), 0.9, Horizon::Finite(2));
        let greedy = declining(0.0, 2.0, &[0.9, 0.1], BuyerRule::Greedy);
        // E[v] = 1: buying now gives 0.1, waiting gives 0.9 (1 - 0.1) = 0.81.
        let v = audit_buyer(&greedy, &cfg).unwrap();
        assert!((v - 0.71).abs() < 1e-12, "{v}");
        let patient = declining(0.0, 2.0, &[0.9, 0.1], BuyerRule::Obedient { tie_prob: 0.0 });
        assert!(audit_buyer(&patient, &cfg).unwrap() <= 0.0);
    }

    #[test]
    fn wrong_second_price_is_flagged() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(2));
        let eq = solve_robust(&cfg).unwrap();
        let mut profile = equilibrium_profile(&eq, &cfg).unwrap();
        for y in &mut profile.seller.levels[0].y {
            *y += 0.05;
        }
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 / 32.0).collect();
        assert!(audit_seller(&profile, &cfg, &grid).unwrap() > 1e-4);
    }

    #[test]
    fn commitment_profile_is_not_sequentially_worst_case() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(2));
        let profile = commitment_profile(&u02(), 0.5).unwrap();
        let (profit, _) = profile_value(&profile, &cfg).unwrap();
        assert!((profit - 0.1953125).abs() < 1e-5, "{profit}");
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 / 32.0).collect();
        assert!(audit_nature(&profile, &cfg, &grid).unwrap() > 1e-3);
    }

    #[test]
    fn uninformative_nature_is_flagged() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(2));
        let eq = solve_robust(&cfg).unwrap();
        let mut profile = equilibrium_profile(&eq, &cfg).unwrap();
        profile.nature.levels = vec![NatureStep::NoInformation; 2];
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 / 32.0).collect();
        assert!(audit_nature(&profile, &cfg, &grid).unwrap() > 1e-3);
    }

    #[test]
    fn constant_price_profile_with_reversion() {
        let f = u02();
        let mut cfg = GameConfig::new(f.clone(), 0.5, Horizon::Infinite);
        cfg.tolerances = Tolerances { allow_no_gap: true, ..Tolerances::default() };
        let eq = solve_robust(&cfg).unwrap();
        let punish = equilibrium_profile(&eq, &cfg).unwrap();
        let profile = constant_price_profile(&f, 1.0 / 3.0, punish);
        let (profit, _) = profile_value(&profile, &cfg).unwrap();
        assert!((profit - 0.5).abs() < 1e-12, "{profit}");
        assert!(audit_buyer(&profile, &cfg).unwrap() <= 1e-12);
        let grid: Vec<f64> = (0..=32).map(|i| i as f64 / 16.0).collect();
        assert!(audit_seller(&profile, &cfg, &grid).unwrap() <= 1e-3);
        let r = simulate(&profile, &cfg, 20_000, 3).unwrap();
        let mean = r.mean_sale_time.unwrap();
        assert!((mean - 3.0).abs() < 0.1, "{mean}");
        let alive = survival(&profile, &cfg).unwrap();
        for (k, s) in alive.iter().take(30).enumerate() {
            assert!((s - (2.0f64 / 3.0).powi(k as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn incomplete_profiles_are_rejected() {
        let cfg = GameConfig::new(u02(), 0.5, Horizon::Finite(3));
        let short = declining(0.0, 2.0, &[0.9, 0.1], BuyerRule::Greedy);
        assert!(matches!(simulate(&short, &cfg, 10, 0), Err(Error::ProfileIncomplete(_))));
        let json = serde_json::to_string(&short).unwrap();
        let back: StrategyProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, short);
    }
}
