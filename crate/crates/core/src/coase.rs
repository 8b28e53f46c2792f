//! Known-values durable-goods monopoly: backward induction on the state
//! "highest remaining type".
//!
//! The solver is written against [`CutoffDemand`], a demand curve indexed by
//! a parameter `u` with buyer cutoff type `c(u)` and mass `m(u)` of types
//! below. A plain prior uses `u = v`; the pressed prior is solved with `u = y`
//! (the partition threshold), so the robust thresholds fall out directly.
//!
//! With `n` periods left and state `k`, the seller picks the next state `u <= k`:
//!
//! ```text
//! Φ_n(k, u) = π_{n-1}(u) (m(k) - m(u)) + δ V_{n-1}(u)
//! π_{n-1}(u) = (1 - δ) c(u) + δ P_{n-1}(u),   P_0 = c,  V_0 = 0
//! ```
//!
//! `P_n` and `V_n` are tabulated on a state grid and interpolated with cubic
//! Hermite splines (`V'_n(k) = P_n(k) m'(k)` by the envelope theorem). The
//! continuation price jumps wherever the number of periods until clearing
//! changes, so each level is split into pieces at those points.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{PressedDistribution, SaleCurve, ValueDistribution};
use crate::error::{check_delta, invalid, Error, Result};
use crate::numeric::{brent, golden_max, integrate, maximize};

/// Demand indexed by a monotone parameter `u`.
pub trait CutoffDemand: Sync {
    /// Range `[u_lo, u_hi]` of the parameter; `m(u_hi) = 1`.
    fn param_range(&self) -> (f64, f64);
    /// Buyer type whose indifference defines the state `u`.
    fn cutoff(&self, u: f64) -> f64;
    fn cutoff_slope(&self, u: f64) -> f64;
    /// Mass of buyers whose state index is below `u`.
    fn mass_below(&self, u: f64) -> f64;
    fn mass_density(&self, u: f64) -> f64;
    /// `∫_a^b c(u) dm(u)`, the total type mass on `(a, b]`.
    fn type_moment(&self, a: f64, b: f64) -> f64 {
        integrate(|u| self.cutoff(u) * self.mass_density(u), a, b, 1e-12)
    }
}

impl CutoffDemand for ValueDistribution {
    fn param_range(&self) -> (f64, f64) {
        self.support()
    }
    fn cutoff(&self, u: f64) -> f64 {
        u
    }
    fn cutoff_slope(&self, _u: f64) -> f64 {
        1.0
    }
    fn mass_below(&self, u: f64) -> f64 {
        self.cdf(u)
    }
    fn mass_density(&self, u: f64) -> f64 {
        self.pdf(u)
    }
    fn type_moment(&self, a: f64, b: f64) -> f64 {
        self.partial_expectation(a, b)
    }
}

/// Pressed prior indexed by the threshold `y`: cutoff `L(y)`, mass `F(y)`.
impl CutoffDemand for PressedDistribution {
    fn param_range(&self) -> (f64, f64) {
        self.base().support()
    }
    fn cutoff(&self, y: f64) -> f64 {
        self.cond_mean(y)
    }
    fn cutoff_slope(&self, y: f64) -> f64 {
        self.cond_mean_slope(y)
    }
    fn mass_below(&self, y: f64) -> f64 {
        self.base().cdf(y)
    }
    fn mass_density(&self, y: f64) -> f64 {
        self.base().pdf(y)
    }
    fn type_moment(&self, a: f64, b: f64) -> f64 {
        let f = self.base();
        integrate(|y| self.cond_mean(y) * f.pdf(y), a, b, 1e-13)
    }
}

/// Pressed prior indexed by its own values `w` (so `c(w) = w`, mass `G(w)`).
///
/// Slower than the threshold parametrization, since every mass evaluation
/// inverts `L`; useful as an independent pipeline.
pub struct PressedValueSpace<'a>(pub &'a PressedDistribution);

impl CutoffDemand for PressedValueSpace<'_> {
    fn param_range(&self) -> (f64, f64) {
        self.0.support()
    }
    fn cutoff(&self, w: f64) -> f64 {
        w
    }
    fn cutoff_slope(&self, _w: f64) -> f64 {
        1.0
    }
    fn mass_below(&self, w: f64) -> f64 {
        self.0.cdf(w)
    }
    fn mass_density(&self, w: f64) -> f64 {
        self.0.pdf(w)
    }
}

/// Number of periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl std::str::FromStr for Horizon {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "∞" => Ok(Horizon::Infinite),
            t => match t.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Horizon::Finite(n)),
                _ => Err(invalid(format!("horizon must be a positive integer or 'inf', got '{s}'"))),
            },
        }
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

/// Numerical settings shared by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Argument tolerance for root finding.
    pub root: f64,
    /// Absolute tolerance for quadrature.
    pub integral: f64,
    /// Number of cells of the state grid.
    pub grid_n: usize,
    /// Maximum number of value-iteration steps for the infinite horizon.
    pub horizon_cap: usize,
    /// Sup-norm tolerance of the stationarity test.
    pub stationarity: f64,
    /// Accept `T = ∞` without a gap (the market then never clears exactly).
    pub allow_no_gap: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root: 1e-10,
            integral: 1e-10,
            grid_n: 512,
            horizon_cap: 10_000,
            stationarity: 1e-9,
            allow_no_gap: false,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("root", self.root), ("integral", self.integral), ("stationarity", self.stationarity)] {
            if !(v.is_finite() && v > 0.0 && v <= 1e-2) {
                return Err(invalid(format!("{name} tolerance must lie in (0, 1e-2], got {v}")));
            }
        }
        if !(16..=1 << 16).contains(&self.grid_n) {
            return Err(invalid(format!("grid size must lie in [16, 65536], got {}", self.grid_n)));
        }
        if self.horizon_cap == 0 {
            return Err(invalid("horizon cap must be positive"));
        }
        Ok(())
    }
}

/// A game instance: prior, discount factor, horizon and numerical settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameConfig {
    pub dist: ValueDistribution,
    pub delta: f64,
    pub horizon: Horizon,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl GameConfig {
    pub fn new(dist: ValueDistribution, delta: f64, horizon: Horizon) -> Self {
        GameConfig { dist, delta, horizon, tolerances: Tolerances::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        self.tolerances.validate()?;
        if let Horizon::Finite(0) = self.horizon {
            return Err(invalid("horizon must be at least one period"));
        }
        if self.horizon == Horizon::Infinite && !self.dist.has_gap() && !self.tolerances.allow_no_gap {
            return Err(Error::Precondition(
                "an infinite horizon needs a gap (v_lo > 0) unless no-gap mode is enabled".into(),
            ));
        }
        Ok(())
    }
}

/// Equilibrium outcome of the known-values game.
#[derive(Clone, Debug, Serialize)]
pub struct KnownValuesEquilibrium {
    /// `p_1, ..., p_t*`.
    pub prices: Vec<f64>,
    /// Indifferent buyer types `w_t`.
    pub cutoffs: Vec<f64>,
    /// State parameters `u_t` reached after each period (equal to `cutoffs` for a plain prior).
    pub states: Vec<f64>,
    pub profit: f64,
    pub surplus: f64,
    /// First period whose cutoff reaches the bottom of the support.
    pub clearing_time: Option<usize>,
    /// Another maximizer with a price more than 1e-6 away was found on path.
    pub multiplicity: bool,
    /// Number of backward-induction levels computed (value-iteration steps for `T = ∞`).
    pub levels: usize,
    /// `|V(top) - profit|`: tabulated value against the profit recomputed along the path.
    pub table_residual: f64,
    #[serde(skip)]
    pub policy: Arc<Policy>,
}

/// Tabulated policy: seller prices and values for every number of remaining periods.
///
/// Each level is a piecewise cubic Hermite table whose pieces are the regimes
/// "market clears in exactly τ more periods" (τ = 0: not within the horizon).
/// Regime boundaries are located by bisection and kept as a pair of knots, one
/// on each side, so jumps in the continuation price are represented exactly.
#[derive(Clone, Debug, Default)]
pub struct Policy {
    levels: Vec<Level>,
    stationary: bool,
}

#[derive(Clone, Debug)]
struct Level {
    knots: Vec<f64>,
    c: Vec<f64>,
    m: Vec<f64>,
    price: Vec<f64>,
    price_slope: Vec<f64>,
    value: Vec<f64>,
    value_slope: Vec<f64>,
    /// `piece_start[k]` is true when knot `k` opens a new regime piece.
    piece_start: Vec<bool>,
    regime: Vec<u32>,
}

impl Level {
    /// Index `k` of the cell `[knots[k], knots[k+1]]` used to evaluate at `u`,
    /// never straddling a regime boundary.
    fn cell(&self, u: f64) -> usize {
        let n = self.knots.len();
        let k = self.knots.partition_point(|x| *x <= u).clamp(1, n - 1) - 1;
        if self.piece_start[k + 1] {
            // Between the two sides of a boundary: use the nearer piece.
            let left_ok = k >= 1 && !self.piece_start[k];
            let right_ok = k + 2 < n && !self.piece_start[k + 2];
            let nearer_left = u - self.knots[k] <= self.knots[k + 1] - u;
            if (nearer_left && left_ok) || !right_ok {
                return if left_ok { k - 1 } else { k };
            }
            return k + 1;
        }
        k
    }

    fn hermite(&self, y: &[f64], s: &[f64], k: usize, u: f64) -> (f64, f64) {
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let h = x1 - x0;
        if h <= 0.0 {
            return (y[k], s[k]);
        }
        let t = (u - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y[k]
            + (t3 - 2.0 * t2 + t) * h * s[k]
            + (-2.0 * t3 + 3.0 * t2) * y[k + 1]
            + (t3 - t2) * h * s[k + 1];
        let d = ((6.0 * t2 - 6.0 * t) * (y[k] - y[k + 1])) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * s[k]
            + (3.0 * t2 - 2.0 * t) * s[k + 1];
        (v, d)
    }

    /// `(P, P', V, V')` at `u`.
    fn eval(&self, u: f64) -> (f64, f64, f64, f64) {
        let k = self.cell(u);
        let (p, dp) = self.hermite(&self.price, &self.price_slope, k, u);
        let (v, dv) = self.hermite(&self.value, &self.value_slope, k, u);
        (p, dp, v, dv)
    }

    fn regime_at(&self, u: f64) -> u32 {
        self.regime[self.cell(u)]
    }
}

impl Policy {
    /// Seller price at state `u` with `n` periods left (the stationary level when infinite).
    pub fn price(&self, n: usize, u: f64) -> f64 {
        self.level(n).eval(u).0
    }

    /// Seller value at state `u` with `n` periods left.
    pub fn value(&self, n: usize, u: f64) -> f64 {
        self.level(n).eval(u).2
    }

    /// Knots and seller prices of the level with `n` periods left.
    pub fn price_table(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let l = self.level(n);
        (l.knots.clone(), l.price.clone())
    }

    /// Prices at the knots of level `n` and at `extra` evenly spaced interior
    /// points of every cell that does not straddle a regime boundary, so a
    /// piecewise-linear reading stays close to the cubic one.
    pub fn price_samples(&self, n: usize, extra: usize) -> (Vec<f64>, Vec<f64>) {
        let l = self.level(n);
        let mut xs = Vec::with_capacity(l.knots.len() * (extra + 1));
        let mut ps = Vec::with_capacity(xs.capacity());
        for k in 0..l.knots.len() {
            xs.push(l.knots[k]);
            ps.push(l.price[k]);
            if k + 1 < l.knots.len() && !l.piece_start[k + 1] {
                let (a, b) = (l.knots[k], l.knots[k + 1]);
                for i in 1..=extra {
                    let u = a + (b - a) * i as f64 / (extra + 1) as f64;
                    xs.push(u);
                    ps.push(l.hermite(&l.price, &l.price_slope, k, u).0);
                }
            }
        }
        (xs, ps)
    }

    /// Interior regime boundaries of the level with `n` periods left.
    pub fn regime_boundaries(&self, n: usize) -> Vec<f64> {
        let l = self.level(n);
        (1..l.knots.len()).filter(|&k| l.piece_start[k]).map(|k| l.knots[k]).collect()
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// Number of levels kept in memory.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn level(&self, n: usize) -> &Level {
        let n = n.clamp(1, self.levels.len());
        &self.levels[n - 1]
    }
}

struct Solver<'a, D: CutoffDemand + ?Sized> {
    d: &'a D,
    delta: f64,
    grid: Vec<f64>,
    h: f64,
    c: Vec<f64>,
    m: Vec<f64>,
    xtol: f64,
    /// Half-width of the least-squares window for price slopes (0: three-point).
    smoothing: usize,
}

#[derive(Clone, Copy)]
struct Choice {
    u: f64,
    value: f64,
    price: f64,
    regime: u32,
    rival: bool,
}

impl<'a, D: CutoffDemand + ?Sized> Solver<'a, D> {
    fn new(d: &'a D, delta: f64, tol: &Tolerances) -> Self {
        let (lo, hi) = d.param_range();
        let n = tol.grid_n;
        let h = (hi - lo) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + h * i as f64 }).collect();
        let c = grid.par_iter().map(|&u| d.cutoff(u)).collect();
        let m = grid.par_iter().map(|&u| d.mass_below(u)).collect();
        let xtol = (tol.root * 1e-4).max(1e-15) * (1.0 + hi.abs());
        Solver { d, delta, grid, h, c, m, xtol, smoothing: 0 }
    }

    /// `(Φ, dΦ/du, π)` at a continuous candidate `u`.
    fn objective(&self, prev: Option<&Level>, mk: f64, u: f64) -> (f64, f64, f64) {
        let d = self.d;
        let (c, cs, m, md) = (d.cutoff(u), d.cutoff_slope(u), d.mass_below(u), d.mass_density(u));
        let (pi, dpi, cont, dcont) = match prev {
            None => (c, cs, 0.0, 0.0),
            Some(l) => {
                let (p, dp, v, dv) = l.eval(u);
                let dl = self.delta;
                ((1.0 - dl) * c + dl * p, (1.0 - dl) * cs + dl * dp, v, dv)
            }
        };
        let phi = pi * (mk - m) + self.delta * cont;
        let dphi = dpi * (mk - m) - pi * md + self.delta * dcont;
        (phi, dphi, pi)
    }

    fn is_bottom(&self, u: f64) -> bool {
        u <= self.grid[0] + 1e-12 * (1.0 + self.grid[0].abs())
    }

    fn regime_of(&self, prev: Option<&Level>, u: f64) -> u32 {
        if self.is_bottom(u) {
            return 1;
        }
        match prev {
            None => 0,
            Some(l) => match l.regime_at(u) {
                0 => 0,
                r => r + 1,
            },
        }
    }

    /// Best next state from state `k` (mass `mk`).
    fn optimize(&self, prev: Option<&Level>, k: f64, mk: f64, track_rivals: bool) -> Choice {
        let (knots, cs, ms): (&[f64], &[f64], &[f64]) = match prev {
            Some(l) => (&l.knots, &l.c, &l.m),
            None => (&self.grid, &self.c, &self.m),
        };
        let dl = self.delta;
        let node = |j: usize| -> (f64, f64) {
            match prev {
                None => (cs[j] * (mk - ms[j]), cs[j]),
                Some(l) => {
                    let pi = (1.0 - dl) * cs[j] + dl * l.price[j];
                    (pi * (mk - ms[j]) + dl * l.value[j], pi)
                }
            }
        };
        let kk = k * (1.0 + 1e-15) + 1e-300;
        let count = knots.partition_point(|x| *x <= kk).max(1);
        let jmax = count - 1;
        let mut vals = Vec::with_capacity(count);
        let (mut bj, mut bv, mut bp) = (0usize, f64::NEG_INFINITY, 0.0);
        for j in 0..count {
            let (v, p) = node(j);
            vals.push((v, p));
            if v > bv {
                bj = j;
                bv = v;
                bp = p;
            }
        }
        let mut best = Choice { u: knots[bj], value: bv, price: bp, regime: 0, rival: false };
        if (knots[jmax] - k).abs() > 1e-14 * (1.0 + k.abs()) && k > knots[jmax] {
            let (v, _, p) = self.objective(prev, mk, k);
            if v > best.value {
                best = Choice { u: k, value: v, price: p, regime: 0, rival: false };
            }
        }
        let is_break = |j: usize| prev.is_some_and(|l| l.piece_start[j]);
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(2);
        if bj >= 1 && !is_break(bj) {
            intervals.push((knots[bj - 1], knots[bj]));
        }
        if bj < jmax && !is_break(bj + 1) {
            intervals.push((knots[bj], knots[bj + 1].min(k)));
        } else if bj == jmax && k > knots[jmax] {
            intervals.push((knots[jmax], k));
        }
        for (a, b) in intervals {
            if b <= a {
                continue;
            }
            let da = self.objective(prev, mk, a).1;
            let db = self.objective(prev, mk, b).1;
            // Without an interior sign change of the derivative the cell's maximum
            // sits at an endpoint, and both endpoints are already candidates.
            let u = if da > 0.0 && db < 0.0 {
                match brent(|u| self.objective(prev, mk, u).1, a, b, self.xtol) {
                    Ok(u) => u,
                    Err(_) => golden_max(|u| self.objective(prev, mk, u).0, a, b, self.xtol).0,
                }
            } else {
                continue;
            };
            let (v, _, p) = self.objective(prev, mk, u);
            // A stationary point next to the best knot is the more accurate argmax
            // even when rounding makes its value tie with the knot's.
            let adjacent = best.u == a || best.u == b;
            if v > best.value || (adjacent && v >= best.value - 8.0 * f64::EPSILON * best.value.abs()) {
                best = Choice { u, value: v, price: p, regime: 0, rival: false };
            }
        }
        best.regime = self.regime_of(prev, best.u);
        if track_rivals {
            let tol = 1e-9 * (1.0 + best.value.abs());
            for j in 0..count {
                let (v, p) = vals[j];
                let left = if j > 0 { vals[j - 1].0 } else { f64::NEG_INFINITY };
                let right = if j < jmax { vals[j + 1].0 } else { f64::NEG_INFINITY };
                let far = (knots[j] - best.u).abs() > 1.5 * self.h;
                if far && v >= left && v >= right && v >= best.value - tol && (p - best.price).abs() > 1e-6 {
                    best.rival = true;
                }
            }
        }
        best
    }

    fn build_level(&self, prev: Option<&Level>) -> Level {
        let n = self.grid.len();
        let mut choices: Vec<Choice> =
            (0..n).into_par_iter().map(|i| self.optimize(prev, self.grid[i], self.m[i], false)).collect();
        choices[0].regime = choices[1].regime;
        // Locate every regime boundary between neighbouring grid nodes.
        let boundaries: Vec<Option<((f64, Choice), (f64, Choice))>> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                if choices[i].regime == choices[i + 1].regime {
                    return None;
                }
                let (mut a, mut b) = (self.grid[i], self.grid[i + 1]);
                let (mut ca, mut cb) = (choices[i], choices[i + 1]);
                let left = ca.regime;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b || b - a <= 1e-14 * (1.0 + b.abs()) {
                        break;
                    }
                    let cm = self.optimize(prev, mid, self.d.mass_below(mid), false);
                    if cm.regime == left {
                        a = mid;
                        ca = cm;
                    } else {
                        b = mid;
                        cb = cm;
                    }
                }
                if i == 0 {
                    ca.regime = cb.regime;
                }
                Some(((a, ca), (b, cb)))
            })
            .collect();
        let mut knots = Vec::with_capacity(n + 8);
        let mut chosen = Vec::with_capacity(n + 8);
        let mut starts = Vec::with_capacity(n + 8);
        let near = 0.05 * self.h;
        for i in 0..n {
            let keep = i == 0
                || i == n - 1
                || !(boundaries[i.saturating_sub(1)].as_ref().is_some_and(|b| self.grid[i] - b.1 .0 < near)
                    || boundaries[i].as_ref().is_some_and(|b| b.0 .0 - self.grid[i] < near));
            if keep {
                knots.push(self.grid[i]);
                chosen.push(choices[i]);
                starts.push(i == 0);
            }
            if i + 1 < n {
                if let Some(((a, ca), (b, cb))) = boundaries[i] {
                    if i == 0 {
                        // The boundary hugs the bottom of the support: fold it into node 0.
                        chosen[0].regime = cb.regime;
                        let _ = (a, ca);
                        knots.push(b);
                        chosen.push(cb);
                        starts.push(false);
                        continue;
                    }
                    knots.push(a);
                    chosen.push(ca);
                    starts.push(false);
                    knots.push(b);
                    chosen.push(cb);
                    starts.push(true);
                }
            }
        }
        // Strictly increasing knots.
        let mut k = 1;
        while k < knots.len() {
            if knots[k] <= knots[k - 1] {
                let drop = if starts[k] { k - 1 } else { k };
                if drop == 0 {
                    break;
                }
                let s = starts[drop];
                knots.remove(drop);
                chosen.remove(drop);
                starts.remove(drop);
                if s && drop < starts.len() {
                    starts[drop] = true;
                }
            } else {
                k += 1;
            }
        }
        let c: Vec<f64> = knots.iter().map(|&u| self.d.cutoff(u)).collect();
        let m: Vec<f64> = knots.iter().map(|&u| self.d.mass_below(u)).collect();
        let price: Vec<f64> = chosen.iter().map(|ch| ch.price).collect();
        let value: Vec<f64> = chosen.iter().map(|ch| ch.value).collect();
        let value_slope: Vec<f64> = price.iter().zip(&knots).map(|(p, &u)| p * self.d.mass_density(u)).collect();
        let price_slope = if self.smoothing > 0 {
            piecewise_lsq(&knots, &price, &starts, self.smoothing)
        } else {
            piecewise_fd(&knots, &price, &starts)
        };
        let regime = chosen.iter().map(|ch| ch.regime).collect();
        Level { knots, c, m, price, price_slope, value, value_slope, piece_start: starts, regime }
    }

    /// On-path play from state `k` with `n` periods left under `policy`.
    fn path(&self, policy: &Policy, k: f64, n: Option<usize>, cap: usize) -> PathOut {
        let mut states = Vec::new();
        let mut opt_prices = Vec::new();
        let mut rival = false;
        let mut state = k;
        let mut left = n;
        let mut cleared = false;
        loop {
            let prev = match left {
                Some(1) => None,
                Some(r) => Some(policy.level(r - 1)),
                None => policy.levels.last(),
            };
            let ch = self.optimize(prev, state, self.d.mass_below(state), true);
            rival |= ch.rival;
            states.push(ch.u);
            opt_prices.push(ch.price);
            state = ch.u;
            if self.is_bottom(state) {
                cleared = true;
                break;
            }
            if let Some(r) = left {
                if r == 1 {
                    break;
                }
                left = Some(r - 1);
            } else if states.len() >= cap
                || self.d.mass_below(state) < 1e-13
                || self.delta.powi(states.len() as i32) < 1e-16
            {
                break;
            }
        }
        // Prices backward from the last period so each cutoff type is exactly indifferent.
        let cutoffs: Vec<f64> = states.iter().map(|&u| self.d.cutoff(u)).collect();
        let t = states.len();
        let mut prices = vec![0.0; t];
        let terminal = cleared || matches!(left, Some(1));
        prices[t - 1] = if terminal { cutoffs[t - 1] } else { opt_prices[t - 1] };
        for s in (0..t - 1).rev() {
            prices[s] = (1.0 - self.delta) * cutoffs[s] + self.delta * prices[s + 1];
        }
        PathOut { states, cutoffs, prices, cleared, rival }
    }

    fn outcome(&self, start: f64, out: &PathOut) -> (f64, f64) {
        let (mut profit, mut surplus, mut disc) = (0.0, 0.0, 1.0);
        let mut upper = start;
        for (s, &u) in out.states.iter().enumerate() {
            let sold = self.d.mass_below(upper) - self.d.mass_below(u);
            profit += disc * out.prices[s] * sold;
            surplus += disc * (self.d.type_moment(u, upper) - out.prices[s] * sold);
            disc *= self.delta;
            upper = u;
        }
        (profit, surplus)
    }
}

/// Slopes from local least-squares quadratics over `2w + 1` knots, within each piece.
///
/// Used for the infinite horizon without a gap: the market never clears, so
/// value iteration runs for many levels, and three-point slopes let rounding
/// noise in the prices grow from level to level.
fn piecewise_lsq(x: &[f64], y: &[f64], starts: &[bool], w: usize) -> Vec<f64> {
    let n = x.len();
    let mut s = piecewise_fd(x, y, starts);
    let mut a = 0;
    while a < n {
        let mut b = a + 1;
        while b < n && !starts[b] {
            b += 1;
        }
        if b - a > 2 * w {
            for j in a..b {
                let lo = j.saturating_sub(w).max(a).min(b - 2 * w - 1);
                let hi = lo + 2 * w + 1;
                // Normal equations for y ≈ c0 + c1 t + c2 t², t = (x - x_j) / scale.
                let scale = x[hi - 1] - x[lo];
                let mut m = [[0.0f64; 3]; 3];
                let mut r = [0.0f64; 3];
                for i in lo..hi {
                    let t = (x[i] - x[j]) / scale;
                    let basis = [1.0, t, t * t];
                    for p in 0..3 {
                        r[p] += basis[p] * y[i];
                        for q in 0..3 {
                            m[p][q] += basis[p] * basis[q];
                        }
                    }
                }
                if let Some(c) = solve3(m, r) {
                    s[j] = c[1] / scale;
                }
            }
        }
        a = b;
    }
    s
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut out = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = r[row];
        for k in row + 1..3 {
            acc -= m[row][k] * out[k];
        }
        out[row] = acc / m[row][row];
    }
    Some(out)
}

/// Three-point slopes on a nonuniform grid, computed within each piece.
fn piecewise_fd(x: &[f64], y: &[f64], starts: &[bool]) -> Vec<f64> {
    let n = x.len();
    let mut s = vec![0.0; n];
    let mut a = 0;
    while a < n {
        let mut b = a + 1;
        while b < n && !starts[b] {
            b += 1;
        }
        // piece is [a, b)
        let len = b - a;
        for j in a..b {
            s[j] = if len == 1 {
                0.0
            } else if len == 2 {
                (y[a + 1] - y[a]) / (x[a + 1] - x[a])
            } else if j == a {
                let (h1, h2) = (x[a + 1] - x[a], x[a + 2] - x[a + 1]);
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[a] + (h1 + h2) / (h1 * h2) * y[a + 1]
                    - h1 / (h2 * (h1 + h2)) * y[a + 2]
            } else if j == b - 1 {
                let (h1, h2) = (x[j - 1] - x[j - 2], x[j] - x[j - 1]);
                h2 / (h1 * (h1 + h2)) * y[j - 2] - (h1 + h2) / (h1 * h2) * y[j - 1]
                    + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[j]
            } else {
                let (h1, h2) = (x[j] - x[j - 1], x[j + 1] - x[j]);
                -h2 / (h1 * (h1 + h2)) * y[j - 1] + (h2 - h1) / (h1 * h2) * y[j] + h1 / (h2 * (h1 + h2)) * y[j + 1]
            };
        }
        a = b;
    }
    s
}

struct PathOut {
    states: Vec<f64>,
    cutoffs: Vec<f64>,
    prices: Vec<f64>,
    cleared: bool,
    rival: bool,
}

const SMOOTHING_HALF_WIDTH: usize = 4;

/// Solves the finite-horizon known-values game for a continuous prior.
pub fn solve_known_values(cfg: &GameConfig) -> Result<KnownValuesEquilibrium> {
    cfg.validate()?;
    cfg.dist.require_continuous("the known-values solver")?;
    let Horizon::Finite(_) = cfg.horizon else {
        return Err(Error::Precondition("use solve_known_values_infinite for T = ∞".into()));
    };
    solve_on(&cfg.dist, cfg.delta, cfg.horizon, &cfg.tolerances)
}

/// Solves the infinite-horizon known-values game by value iteration until the
/// value function is stationary on the state grid.
pub fn solve_known_values_infinite(cfg: &GameConfig) -> Result<KnownValuesEquilibrium> {
    let mut cfg = cfg.clone();
    cfg.horizon = Horizon::Infinite;
    cfg.validate()?;
    cfg.dist.require_continuous("the known-values solver")?;
    if cfg.dist.has_gap() {
        let lip = crate::dist::check_lipschitz(&cfg.dist, f64::INFINITY, false)?;
        if !lip.holds {
            return Err(Error::Precondition(format!(
                "quantile function is not Lipschitz at the lower support point (sup ratio {:.3e})",
                lip.constant
            )));
        }
    }
    solve_on(&cfg.dist, cfg.delta, Horizon::Infinite, &cfg.tolerances)
}

/// Generic entry point: any cutoff demand, either horizon.
pub fn solve_on<D: CutoffDemand + ?Sized>(
    demand: &D,
    delta: f64,
    horizon: Horizon,
    tol: &Tolerances,
) -> Result<KnownValuesEquilibrium> {
    check_delta(delta)?;
    tol.validate()?;
    let mut solver = Solver::new(demand, delta, tol);
    if horizon == Horizon::Infinite && demand.cutoff(demand.param_range().0) <= 0.0 {
        solver.smoothing = SMOOTHING_HALF_WIDTH;
    }
    let mut levels: Vec<Level> = Vec::new();
    let stationary;
    let mut iterations = 0;
    match horizon {
        Horizon::Finite(0) => return Err(invalid("horizon must be at least one period")),
        Horizon::Finite(t) => {
            for _ in 0..t {
                let lvl = solver.build_level(levels.last());
                levels.push(lvl);
            }
            iterations = t;
            stationary = false;
        }
        Horizon::Infinite => {
            let mut last_change = f64::INFINITY;
            let mut done = false;
            for it in 0..tol.horizon_cap {
                let lvl = solver.build_level(levels.last());
                if let Some(prev) = levels.last() {
                    last_change = solver
                        .grid
                        .iter()
                        .map(|&u| (lvl.eval(u).2 - prev.eval(u).2).abs())
                        .fold(0.0, f64::max);
                }
                if levels.len() >= 2 {
                    levels.remove(0);
                }
                levels.push(lvl);
                iterations = it + 1;
                if last_change <= tol.stationarity {
                    log::debug!("value iteration stationary after {iterations} levels");
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::Nonconvergence { iterations: tol.horizon_cap, last_change });
            }
            stationary = true;
        }
    }
    let depth = levels.len();
    let policy = Policy { levels, stationary };
    let (_, hi) = demand.param_range();
    let n = match horizon {
        Horizon::Finite(t) => Some(t),
        Horizon::Infinite => None,
    };
    let out = solver.path(&policy, hi, n, tol.horizon_cap);
    let (profit, surplus) = solver.outcome(hi, &out);
    let table_value = policy.value(n.unwrap_or(depth), hi);
    let table_residual = (table_value - profit).abs();
    // The smoothed slopes of the no-gap mode trade some accuracy for stability.
    let allowed = if solver.smoothing > 0 { 1e-4 } else { 1e-6 };
    if table_residual > allowed * (1.0 + profit.abs()) {
        return Err(Error::Consistency(format!(
            "on-path profit {profit} disagrees with the tabulated value {table_value}"
        )));
    }
    Ok(KnownValuesEquilibrium {
        prices: out.prices,
        cutoffs: out.cutoffs,
        states: out.states,
        profit,
        surplus,
        clearing_time: if out.cleared { Some(0) } else { None },
        multiplicity: out.rival,
        levels: iterations,
        table_residual,
        policy: Arc::new(policy),
    }
    .with_clearing())
}

impl KnownValuesEquilibrium {
    fn with_clearing(mut self) -> Self {
        if self.clearing_time.is_some() {
            self.clearing_time = Some(self.prices.len());
        }
        self
    }
}

/// Replays on-path play from state `k` with `periods_left` periods remaining
/// (ignored for stationary policies), returning `(prices, states)`.
pub fn resolve_from<D: CutoffDemand + ?Sized>(
    demand: &D,
    eq: &KnownValuesEquilibrium,
    delta: f64,
    tol: &Tolerances,
    k: f64,
    periods_left: usize,
) -> (Vec<f64>, Vec<f64>) {
    let solver = Solver::new(demand, delta, tol);
    let n = if eq.policy.stationary { None } else { Some(periods_left) };
    let out = solver.path(&eq.policy, k, n, tol.horizon_cap);
    (out.prices, out.states)
}

/// Static monopoly: the global maximizer of `p (1 - cdf(p))` over the support.
pub fn static_monopoly<S: SaleCurve + ?Sized>(d: &S) -> (f64, f64) {
    let (lo, hi) = d.support();
    maximize(|p| p * (1.0 - d.cdf(p)), lo, hi, 4096, 1e-13 * (1.0 + hi))
}

/// Coefficient `c(δ)` of the infinite-horizon profit `c(δ) ṽ²` for uniform
/// values on `[0, ṽ]`: `(1 - 1/δ + √(1-δ)/δ) / 2`, evaluated in the
/// cancellation-free form `√(1-δ) / (2 (1 + √(1-δ)))`.
pub fn uniform_profit_coefficient(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let s = (1.0 - delta).sqrt();
    Ok(0.5 * s / (1.0 + s))
}
