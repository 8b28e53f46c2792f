//! Nature's optimization problems beyond the sequential worst case: the
//! two-period commitment process, the minimum profit over obedient threshold
//! processes against a fixed declining price path, pressed-ratio
//! monotonicity, and the threshold of the worse-past-information benchmark.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coase::{GameConfig, Horizon, Tolerances};
use crate::dist::{press_threshold, ValueDistribution};
use crate::error::{check_delta, invalid, Error, Result};
use crate::numeric::{bisect_predicate, brent, golden_max, maximize};
use crate::robust::{check_process, profit_unchecked, raw_residual, solve_robust};

/// Which constraint shapes the seller's first-period choice against a
/// committed two-period process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitmentRegime {
    Interior,
    /// Nature's threshold sits at the top of the support: nobody buys in period 1.
    NoFirstPeriodSale,
}

/// Two-period outcome when nature commits to reveal nothing after period 1.
#[derive(Clone, Debug, Serialize)]
pub struct CommitmentOutcome {
    pub p1: f64,
    /// Nature's period-1 threshold `ỹ`.
    pub threshold: f64,
    /// Period-2 price: the static pressed-monopoly profit on `v <= ỹ`.
    pub continuation_price: f64,
    pub profit: f64,
    pub regime: CommitmentRegime,
}

/// Static worst-case monopoly profit per unit mass on the types `v <= y`:
/// `max_z L(z) (F(y) - F(z)) / F(y)`, with the limit `v_lo` at the bottom.
pub fn truncated_pressed_profit(f: &ValueDistribution, y: f64) -> f64 {
    let lo = f.lo();
    let mass = f.cdf(y);
    if y <= lo || mass <= 1e-300 {
        return lo;
    }
    let (_, best) = maximize(|z| f.cond_mean_below_limit(z) * (mass - f.cdf(z)), lo, y, 128, 1e-13 * (1.0 + y.abs()));
    (best / mass).max(lo)
}

/// Solves the two-period game in which nature commits to give no information
/// in period 2, so the seller's period-2 price is `Π̃(ỹ)` and the period-1
/// threshold leaves the no-buy group indifferent:
/// `(1-δ) E[v | v <= ỹ] + δ Π̃(ỹ) = p_1`.
///
/// The seller picks the threshold it induces (any `ỹ` that is the largest
/// solution of the indifference condition at some price), which maximizes
/// `p_1 (1 - F(ỹ)) + δ F(ỹ) Π̃(ỹ)`.
pub fn nature_commitment_profit(f: &ValueDistribution, delta: f64) -> Result<CommitmentOutcome> {
    check_delta(delta)?;
    f.require_continuous("the commitment benchmark")?;
    let (lo, hi) = f.support();
    let eval = |y: f64| {
        let cont = truncated_pressed_profit(f, y);
        let price = (1.0 - delta) * f.cond_mean_below_limit(y) + delta * cont;
        let mass = f.cdf(y);
        (price, cont, price * (1.0 - mass) + delta * mass * cont)
    };

    let n = 512;
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 }).collect();
    let vals: Vec<(f64, f64, f64)> = grid.par_iter().map(|&y| eval(y)).collect();
    // A threshold is reachable when every larger threshold needs a strictly higher price.
    let mut reachable = vec![true; n + 1];
    let mut suffix_min = f64::INFINITY;
    for i in (0..=n).rev() {
        reachable[i] = vals[i].0 < suffix_min;
        suffix_min = suffix_min.min(vals[i].0);
    }
    let mut best = n;
    for i in 0..=n {
        if reachable[i] && vals[i].2 > vals[best].2 {
            best = i;
        }
    }
    let mut y_best = grid[best];
    let mut top = vals[best];
    let a = best.saturating_sub(1);
    let b = (best + 1).min(n);
    let monotone = (a..b).all(|i| reachable[i] && vals[i + 1].0 > vals[i].0);
    if monotone && b > a {
        let (y, v) = golden_max(|y| eval(y).2, grid[a], grid[b], 1e-14 * (1.0 + hi.abs()));
        if v > top.2 {
            y_best = y;
            top = eval(y);
        }
    }
    let regime = if y_best >= hi - 1e-7 * (hi - lo) {
        CommitmentRegime::NoFirstPeriodSale
    } else {
        CommitmentRegime::Interior
    };
    Ok(CommitmentOutcome { p1: top.0, threshold: y_best, continuation_price: top.1, profit: top.2, regime })
}

/// Locates the discount factor in `[a, b]` where the commitment outcome
/// switches from an interior threshold to no first-period sale, when the
/// regimes at the two ends differ.
pub fn commitment_regime_switch(f: &ValueDistribution, a: f64, b: f64, xtol: f64) -> Result<Option<f64>> {
    check_delta(a)?;
    check_delta(b)?;
    let interior = |d: f64| nature_commitment_profit(f, d).map(|o| o.regime == CommitmentRegime::Interior);
    if !interior(a)? || interior(b)? {
        return Ok(None);
    }
    let mut err = None;
    let x = bisect_predicate(
        |d| match interior(d) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        },
        a,
        b,
        xtol,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(Some(x)),
    }
}

/// One row of the baseline versus commitment comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparePoint {
    pub delta: f64,
    pub baseline_profit: f64,
    pub commitment_profit: f64,
}

/// Two-period robust profit and commitment profit on a grid of discount factors.
pub fn compare_series(f: &ValueDistribution, deltas: &[f64], tol: &Tolerances) -> Result<Vec<ComparePoint>> {
    deltas
        .par_iter()
        .map(|&delta| {
            let mut cfg = GameConfig::new(f.clone(), delta, Horizon::Finite(2));
            cfg.tolerances = tol.clone();
            let base = solve_robust(&cfg)?;
            let commit = nature_commitment_profit(f, delta)?;
            Ok(ComparePoint { delta, baseline_profit: base.profit, commitment_profit: commit.profit })
        })
        .collect()
}

/// Grid settings of the worst-case search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Points per threshold coordinate in each grid pass.
    pub grid: usize,
    /// Zoomed grid passes after the coarse one.
    pub refinements: usize,
    /// Final step of the coordinate search, in threshold-share units.
    pub xtol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { grid: 64, refinements: 2, xtol: 1e-9 }
    }
}

/// Minimum profit over obedient threshold processes for a fixed price path.
#[derive(Clone, Debug, Serialize)]
pub struct WorstCase {
    pub thresholds: Vec<f64>,
    pub min_profit: f64,
    /// Normalized obedience residuals of the minimizer.
    pub residuals: Vec<f64>,
    pub feasible: bool,
    /// The process where every no-buy group is exactly indifferent, when it exists.
    pub indifference_thresholds: Option<Vec<f64>>,
    pub indifference_profit: Option<f64>,
    /// The class of information processes searched.
    pub restriction: String,
    pub evaluations: usize,
    pub diagnostics: Vec<String>,
}

struct Search<'a> {
    f: &'a ValueDistribution,
    prices: &'a [f64],
    delta: f64,
    lo: f64,
    hi: f64,
    feas_tol: f64,
    calls: AtomicUsize,
}

#[derive(Clone, Debug)]
struct Point {
    lam: Vec<f64>,
    y: Vec<f64>,
    profit: f64,
}

impl Point {
    fn better_than(&self, other: &Point) -> bool {
        self.profit < other.profit
            || (self.profit == other.profit && self.y.partial_cmp(&other.y) == Some(std::cmp::Ordering::Less))
    }
}

fn pick_best(points: impl IntoIterator<Item = Option<Point>>) -> Option<Point> {
    let mut best: Option<Point> = None;
    for p in points.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| p.better_than(b)) {
            best = Some(p);
        }
    }
    best
}

impl Search<'_> {
    /// Point where the period-`t` residual, as a function of `y_t` alone, is smallest.
    fn residual_valley(&self, t: usize) -> f64 {
        let p = self.prices;
        if t + 1 < p.len() {
            (p[t] - self.delta * p[t + 1]) / (1.0 - self.delta)
        } else {
            p[t]
        }
    }

    /// Sets `y_t` to the largest value in `[y_{t+1}, v_hi]` that keeps period
    /// `t` obedient, given the later thresholds. The residual is quasi-convex
    /// in `y_t`, so the feasible set is an interval.
    fn max_feasible(&self, y: &mut [f64], t: usize) -> bool {
        let lower = if t + 1 < y.len() { y[t + 1] } else { self.lo };
        let mut trial = y.to_vec();
        let mut ok = |x: f64| {
            trial[t] = x;
            raw_residual(self.f, self.prices, &trial, self.delta, t) <= self.feas_tol
        };
        if ok(self.hi) {
            y[t] = self.hi;
            return true;
        }
        let valley = self.residual_valley(t).clamp(lower, self.hi);
        if !ok(valley) {
            return false;
        }
        y[t] = bisect_predicate(ok, valley, self.hi, 1e-15 * (1.0 + self.hi.abs()));
        true
    }

    fn thresholds(&self, lam: &[f64]) -> Vec<f64> {
        let mut y = vec![self.hi; lam.len() + 1];
        for (s, &l) in lam.iter().enumerate() {
            y[s + 1] = self.lo + l * (y[s] - self.lo);
        }
        y
    }

    fn eval(&self, lam: &[f64]) -> Option<Point> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut y = self.thresholds(lam);
        for s in 1..y.len() {
            if raw_residual(self.f, self.prices, &y, self.delta, s) > self.feas_tol {
                return None;
            }
        }
        if !self.max_feasible(&mut y, 0) {
            return None;
        }
        let profit = profit_unchecked(self.f, self.prices, &y, self.delta);
        Some(Point { lam: lam.to_vec(), y, profit })
    }

    fn grid_pass(&self, ranges: &[(f64, f64)], n: usize) -> Option<Point> {
        let d = ranges.len();
        let total = n.pow(d as u32);
        let axis = |r: (f64, f64), i: usize| if n == 1 { r.0 } else { r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64 };
        let points: Vec<Option<Point>> = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut lam = vec![0.0; d];
                for (s, r) in ranges.iter().enumerate() {
                    lam[s] = axis(*r, idx % n);
                    idx /= n;
                }
                self.eval(&lam)
            })
            .collect();
        pick_best(points)
    }

    /// Pattern search, one coordinate at a time, with the feasibility boundary
    /// located by bisection whenever a scan crosses it.
    fn coordinate_descent(&self, mut cur: Point, start: f64, xtol: f64) -> Point {
        let d = cur.lam.len();
        let mut width = vec![start; d];
        for _ in 0..400 {
            if width.iter().all(|w| *w < xtol) {
                break;
            }
            for s in 0..d {
                if width[s] < xtol {
                    continue;
                }
                let a = (cur.lam[s] - width[s]).max(0.0);
                let b = (cur.lam[s] + width[s]).min(1.0);
                let k = 16;
                let xs: Vec<f64> = (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect();
                let at = |x: f64| {
                    let mut lam = cur.lam.clone();
                    lam[s] = x;
                    self.eval(&lam)
                };
                let scan: Vec<Option<Point>> = xs.par_iter().map(|&x| at(x)).collect();
                let mut cands = scan.clone();
                for i in 0..k {
                    let (fa, fb) = (scan[i].is_some(), scan[i + 1].is_some());
                    if fa != fb {
                        let (inside, outside) = if fa { (xs[i], xs[i + 1]) } else { (xs[i + 1], xs[i]) };
                        let edge = boundary(|x| at(x).is_some(), inside, outside, 1e-3 * xtol);
                        cands.push(at(edge));
                    }
                }
                match pick_best(cands) {
                    Some(p) if p.profit < cur.profit - 1e-15 * (1.0 + cur.profit.abs()) => cur = p,
                    _ => width[s] *= 0.25,
                }
            }
        }
        cur
    }
}

/// Bisection between a feasible `inside` and an infeasible `outside` point.
fn boundary<F: FnMut(f64) -> bool>(mut ok: F, inside: f64, outside: f64, xtol: f64) -> f64 {
    let (mut a, mut b) = (inside, outside);
    while (b - a).abs() > xtol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if ok(m) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

fn check_declining(prices: &[f64]) -> Result<()> {
    if prices.is_empty() {
        return Err(invalid("empty price path"));
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(invalid("non-finite price"));
    }
    if let Some(t) = (1..prices.len()).find(|&t| prices[t] > prices[t - 1]) {
        return Err(Error::Precondition(format!("prices must be declining; period {} raises the price", t + 1)));
    }
    Ok(())
}

fn search<'a>(f: &'a ValueDistribution, prices: &'a [f64], delta: f64) -> Result<Search<'a>> {
    check_delta(delta)?;
    f.require_continuous("the worst-case search")?;
    check_declining(prices)?;
    let (lo, hi) = f.support();
    Ok(Search { f, prices, delta, lo, hi, feas_tol: 1e-13 * (1.0 + hi.abs()), calls: AtomicUsize::new(0) })
}

/// Thresholds that leave every no-buy group exactly indifferent (or, where no
/// indifference point exists, at the top of the support), built from the last
/// period backwards. These are the equilibrium thresholds when the prices are
/// the robust equilibrium prices.
pub fn indifference_thresholds(f: &ValueDistribution, prices: &[f64], delta: f64) -> Result<Vec<f64>> {
    let s = search(f, prices, delta)?;
    let mut y = vec![s.lo; prices.len()];
    for t in (0..prices.len()).rev() {
        if !s.max_feasible(&mut y, t) {
            return Err(Error::Precondition(format!("no obedient threshold exists in period {}", t + 1)));
        }
    }
    Ok(y)
}

/// Minimizes the seller's profit over threshold processes `y_1 >= ... >= y_T`
/// that keep every no-buy group obedient at the given declining prices.
///
/// Thresholds after the first are parametrized by shares
/// `y_{s} = v_lo + λ_s (y_{s-1} - v_lo)` and searched on a grid (one coarse
/// pass and zoomed passes), then refined coordinatewise. Given the later
/// thresholds, profit falls as `y_1` rises whenever `p_1 > δ p_2`, so `y_1` is
/// always set to its largest obedient value.
pub fn worst_case_partitional(
    f: &ValueDistribution,
    prices: &[f64],
    delta: f64,
    opts: &SearchOptions,
) -> Result<WorstCase> {
    if opts.grid < 2 || !(opts.xtol > 0.0 && opts.xtol < 0.1) {
        return Err(invalid("search grid needs at least 2 points and a step in (0, 0.1)"));
    }
    let s = search(f, prices, delta)?;
    let d = prices.len() - 1;
    let mut diagnostics = Vec::new();
    let mut n = opts.grid;
    while d > 0 && n > 4 && (n as f64).powi(d as i32) > (1u64 << 18) as f64 {
        n /= 2;
    }
    if n < opts.grid {
        diagnostics.push(format!("grid reduced to {n} points per threshold for {} periods", prices.len()));
    }
    let mut ranges = vec![(0.0, 1.0); d];
    let mut best = s.grid_pass(&ranges, n);
    let mut spacing = 1.0 / (n - 1) as f64;
    for _ in 0..opts.refinements {
        let Some(cur) = best.clone() else { break };
        if d == 0 {
            break;
        }
        for (r, &l) in ranges.iter_mut().zip(&cur.lam) {
            *r = ((l - 2.0 * spacing).max(0.0), (l + 2.0 * spacing).min(1.0));
        }
        spacing = ranges.iter().map(|r| r.1 - r.0).fold(0.0, f64::max) / (n - 1) as f64;
        if let Some(p) = s.grid_pass(&ranges, n) {
            if p.better_than(&cur) {
                best = Some(p);
            }
        }
    }
    let best = best.map(|p| if d > 0 { s.coordinate_descent(p, spacing, opts.xtol) } else { p });
    let indifference = indifference_thresholds(f, prices, delta).ok();
    let indifference_profit = indifference.as_ref().map(|y| profit_unchecked(f, prices, y, delta));
    let (thresholds, min_profit, feasible) = match best {
        Some(p) => (p.y, p.profit, true),
        None => {
            diagnostics.push("no obedient threshold process found; reporting the all-clear process".into());
            let y = vec![s.lo; prices.len()];
            let p = profit_unchecked(f, prices, &y, delta);
            (y, p, false)
        }
    };
    check_process(f, prices, &thresholds, delta)?;
    let residuals = crate::robust::indifference_residuals(f, prices, &thresholds, delta)?;
    Ok(WorstCase {
        thresholds,
        min_profit,
        residuals,
        feasible,
        indifference_thresholds: indifference,
        indifference_profit,
        restriction: "partitional threshold processes".into(),
        evaluations: s.calls.load(Ordering::Relaxed),
        diagnostics,
    })
}

/// Outcome of the pressed-ratio monotonicity test.
#[derive(Clone, Debug, Serialize)]
pub struct PrmReport {
    pub holds: bool,
    /// Grid values of `v` where the ratio rose by more than the slack.
    pub violations: Vec<f64>,
    pub grid_points: usize,
}

/// `v / L⁻¹(v)`, the ratio of a pressed value to its worst-case threshold.
pub fn pressed_ratio(f: &ValueDistribution, v: f64) -> Result<f64> {
    Ok(v / press_threshold(f, v)?)
}

/// Tests whether `v / L⁻¹(v)` is weakly decreasing on 1024 points of `(v_lo, E[v])`.
pub fn check_prm(f: &ValueDistribution) -> Result<PrmReport> {
    f.require_continuous("the pressed-ratio test")?;
    let n = 1024;
    let (lo, mean) = (f.lo(), f.mean());
    let vs: Vec<f64> = (1..=n).map(|i| lo + (mean - lo) * i as f64 / (n + 1) as f64).collect();
    let ratios = vs.par_iter().map(|&v| pressed_ratio(f, v)).collect::<Result<Vec<f64>>>()?;
    let violations: Vec<f64> = (1..n).filter(|&i| ratios[i] > ratios[i - 1] + 1e-9).map(|i| vs[i]).collect();
    Ok(PrmReport { holds: violations.is_empty(), violations, grid_points: n })
}

/// Largest truncation point `y*` (found by bisection) such that the prior
/// restricted to `[v_lo, y*]` passes [`check_prm`]. Returns `v_hi` when the
/// whole prior passes.
pub fn prm_neighborhood(f: &ValueDistribution) -> Result<f64> {
    f.require_continuous("the pressed-ratio neighborhood")?;
    if !f.has_gap() {
        return Err(Error::Precondition("the pressed-ratio neighborhood needs v_lo > 0".into()));
    }
    let (lo, hi) = f.support();
    if check_prm(f)?.holds {
        return Ok(hi);
    }
    let passes = |y: f64| f.truncated(lo, y).and_then(|g| check_prm(&g)).map(|r| r.holds).unwrap_or(false);
    let start = (1..=8)
        .map(|k| lo + (hi - lo) * 10f64.powi(-k))
        .find(|&y| passes(y))
        .ok_or_else(|| Error::Consistency("no truncation just above v_lo passes the pressed-ratio test".into()))?;
    Ok(bisect_predicate(passes, start, hi, 1e-6 * (hi - lo)))
}

/// `v̄_{t+1} y_t - v̄_t y_{t+1}` for 0-based period `t`, where
/// `(1-δ) v̄_s = p_s - δ p_{s+1}` and `v̄ = p` in the last period. A positive
/// value means that lowering `y_{t+1}`, with `y_t` moved to keep period `t`
/// indifferent, raises profit.
pub fn perturbation_sign(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], t: usize, delta: f64) -> Result<f64> {
    check_process(f, prices, thresholds, delta)?;
    if t + 1 >= prices.len() {
        return Err(Error::Precondition(format!("period {} has no successor", t + 1)));
    }
    let vbar = |s: usize| {
        if s + 1 < prices.len() {
            (prices[s] - delta * prices[s + 1]) / (1.0 - delta)
        } else {
            prices[s]
        }
    };
    Ok(vbar(t + 1) * thresholds[t] - vbar(t) * thresholds[t + 1])
}

/// Threshold `y*` with `E[v | v > y*] = (p_1 - δ p̂_2) / (1 - δ)`.
pub fn worse_past_threshold(f: &ValueDistribution, p1: f64, p2_hat: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    f.require_continuous("the worse-past-information threshold")?;
    if !(p1.is_finite() && p2_hat.is_finite()) {
        return Err(invalid("non-finite price"));
    }
    let target = (p1 - delta * p2_hat) / (1.0 - delta);
    let (lo, hi) = f.support();
    let mean = f.mean();
    if target <= mean {
        return Err(Error::Precondition(format!(
            "the implied value {target} does not exceed the prior mean {mean}"
        )));
    }
    if target >= hi {
        return Err(Error::UnreachableCutoff(target));
    }
    brent(|y| f.cond_mean_above(y) - target, lo, hi, 1e-14 * (1.0 + hi.abs()))
}
