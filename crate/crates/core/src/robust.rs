//! The robust equilibrium: the known-values solution on the pressed prior,
//! read back as a sequence of worst-case partition thresholds on the original
//! prior, together with the buyer indifference, profit and surplus
//! accounting of a threshold process.

use serde::Serialize;

use crate::coase::{solve_on, GameConfig, Horizon, KnownValuesEquilibrium};
use crate::dist::{check_lipschitz, press, PressedDistribution, ValueDistribution};
use crate::error::{check_delta, invalid, Error, Result};

/// Nature's on-path strategy: in period `t` the buyer learns whether `v > y_t`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PartitionalInfoProcess {
    /// `y_1 >= y_2 >= ...`; a threshold at `v_lo` clears the market.
    pub thresholds: Vec<f64>,
    /// Per-period obedience residuals (see [`indifference_residuals`]).
    pub obedience_residuals: Vec<f64>,
}

/// Robust equilibrium outcome.
#[derive(Clone, Debug, Serialize)]
pub struct RobustEquilibrium {
    /// Known-values equilibrium of the pressed prior, indexed by thresholds.
    pub pressed_eq: KnownValuesEquilibrium,
    pub process: PartitionalInfoProcess,
    pub prices: Vec<f64>,
    /// Binding cutoffs `w_t = E[v | v <= y_t]`.
    pub cutoffs: Vec<f64>,
    pub profit: f64,
    /// Buyer surplus under the threshold process on the original prior.
    pub surplus: f64,
    pub clearing_time: Option<usize>,
    /// Non-fatal diagnostics, such as a failed Lipschitz test for `T = ∞`.
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub pressed: Option<PressedDistribution>,
}

/// Solves the robust game: press the prior, solve the known-values game on
/// the pressed prior and map the cutoffs to thresholds `y_t = L⁻¹(w_t)`.
pub fn solve_robust(cfg: &GameConfig) -> Result<RobustEquilibrium> {
    cfg.validate()?;
    cfg.dist.require_continuous("the robust solver")?;
    let g = press(&cfg.dist)?;
    let mut warnings = Vec::new();
    if cfg.horizon == Horizon::Infinite {
        let lip = check_lipschitz(&cfg.dist, f64::INFINITY, cfg.tolerances.allow_no_gap)?;
        if !lip.holds {
            let msg = format!(
                "quantile is not Lipschitz at the lower support point (sup ratio {:.3e}); \
                 payoff equivalence is unproven for this prior",
                lip.constant
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let eq = solve_on(&g, cfg.delta, cfg.horizon, &cfg.tolerances)?;
    let thresholds = eq.states.clone();
    let f = &cfg.dist;
    let residuals = indifference_residuals(f, &eq.prices, &thresholds, cfg.delta)?;
    let profit = profit_of_thresholds(f, &eq.prices, &thresholds, cfg.delta)?;
    if (profit - eq.profit).abs() > 1e-6 * (1.0 + eq.profit.abs()) {
        return Err(Error::Consistency(format!(
            "threshold-process profit {profit} differs from the pressed known-values profit {}",
            eq.profit
        )));
    }
    let surplus = buyer_surplus_of_thresholds(f, &eq.prices, &thresholds, cfg.delta)?;
    Ok(RobustEquilibrium {
        prices: eq.prices.clone(),
        cutoffs: eq.cutoffs.clone(),
        clearing_time: eq.clearing_time,
        process: PartitionalInfoProcess { thresholds, obedience_residuals: residuals },
        pressed_eq: eq,
        profit,
        surplus,
        warnings,
        pressed: Some(g),
    })
}

pub(crate) fn check_process(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], delta: f64) -> Result<()> {
    check_delta(delta)?;
    f.require_continuous("threshold accounting")?;
    if prices.len() != thresholds.len() {
        return Err(invalid(format!(
            "{} prices but {} thresholds",
            prices.len(),
            thresholds.len()
        )));
    }
    if prices.is_empty() {
        return Err(invalid("empty price path"));
    }
    let (lo, hi) = f.support();
    let slack = 1e-12 * (1.0 + hi.abs());
    for (t, &y) in thresholds.iter().enumerate() {
        if !(y.is_finite() && y >= lo - slack && y <= hi + slack) {
            return Err(invalid(format!("threshold {y} in period {} lies outside the support", t + 1)));
        }
        if t > 0 && y > thresholds[t - 1] + slack {
            return Err(invalid(format!("thresholds increase in period {}", t + 1)));
        }
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(invalid("non-finite price"));
    }
    Ok(())
}

/// `∫_a^b (v - p) dF(v)` over `(a, b]`.
pub(crate) fn net_mass(f: &ValueDistribution, a: f64, b: f64, p: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    f.partial_expectation(a, b) - p * (f.cdf(b) - f.cdf(a))
}

/// Unnormalized residual for period `t` (0-based): surplus of the no-buy
/// group from buying now, minus its value from following the process.
pub(crate) fn raw_residual(f: &ValueDistribution, prices: &[f64], y: &[f64], delta: f64, t: usize) -> f64 {
    let lo = f.lo();
    let now = net_mass(f, lo, y[t], prices[t]);
    let mut later = 0.0;
    let mut disc = 1.0;
    for s in t + 1..prices.len() {
        disc *= delta;
        later += disc * net_mass(f, y[s], y[s - 1], prices[s]);
    }
    now - later
}

/// Buyer indifference residuals of a threshold process.
///
/// Entry `t` is
/// `[∫_{v_lo}^{y_t} (v - p_t) dF - Σ_{s>t} δ^{s-t} ∫_{y_s}^{y_{s-1}} (v - p_s) dF] / F(y_t)`,
/// the gain per unit mass for the buyers told "below `y_t`" of buying now
/// rather than following the process (value units; the limit `v_lo - p_t` is
/// used when `F(y_t) = 0`). Obedience means every entry is `<= 0`; the last
/// entry is the static condition `E[v | v <= y_T] - p_T`.
pub fn indifference_residuals(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], delta: f64) -> Result<Vec<f64>> {
    check_process(f, prices, thresholds, delta)?;
    let lo = f.lo();
    Ok((0..prices.len())
        .map(|t| {
            let mass = f.cdf(thresholds[t]);
            if mass <= 1e-300 {
                lo - prices[t]
            } else {
                raw_residual(f, prices, thresholds, delta, t) / mass
            }
        })
        .collect())
}

/// Discounted revenue `Σ_s δ^{s-1} p_s (F(y_{s-1}) - F(y_s))` with `F(y_0) = 1`,
/// for an obedient buyer.
pub fn profit_of_thresholds(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], delta: f64) -> Result<f64> {
    check_process(f, prices, thresholds, delta)?;
    Ok(profit_unchecked(f, prices, thresholds, delta))
}

pub(crate) fn profit_unchecked(f: &ValueDistribution, prices: &[f64], y: &[f64], delta: f64) -> f64 {
    let mut upper = 1.0;
    let mut disc = 1.0;
    let mut total = 0.0;
    for (p, &yt) in prices.iter().zip(y) {
        let m = f.cdf(yt);
        total += disc * p * (upper - m);
        upper = m;
        disc *= delta;
    }
    total
}

/// Discounted buyer surplus `Σ_s δ^{s-1} ∫_{y_s}^{y_{s-1}} (v - p_s) dF` with `y_0 = v_hi`.
pub fn buyer_surplus_of_thresholds(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], delta: f64) -> Result<f64> {
    check_process(f, prices, thresholds, delta)?;
    Ok(surplus_from(f, prices, thresholds, delta, 0, f.hi()))
}

fn surplus_from(f: &ValueDistribution, prices: &[f64], y: &[f64], delta: f64, start: usize, top: f64) -> f64 {
    let mut upper = top;
    let mut disc = 1.0;
    let mut total = 0.0;
    for s in start..prices.len() {
        total += disc * net_mass(f, y[s], upper, prices[s]);
        upper = y[s];
        disc *= delta;
    }
    total
}

/// For each period `t`, the buyer surplus from `t` on among the types still in
/// the market (`v <= y_{t-1}`), minus what those types would get by buying at
/// `p_t` with no further information. Zero in every period means the process
/// leaves the buyer no option value beyond the uninformed purchase.
pub fn option_value_gaps(f: &ValueDistribution, prices: &[f64], thresholds: &[f64], delta: f64) -> Result<Vec<f64>> {
    check_process(f, prices, thresholds, delta)?;
    let lo = f.lo();
    Ok((0..prices.len())
        .map(|t| {
            let top = if t == 0 { f.hi() } else { thresholds[t - 1] };
            let truncated = surplus_from(f, prices, thresholds, delta, t, top);
            truncated - net_mass(f, lo, top, prices[t])
        })
        .collect())
}
