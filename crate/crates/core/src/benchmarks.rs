//! Alternative benchmarks: a naive maxmin seller on uniform values, a
//! two-period binary example with a sophisticated seller, constant-price
//! equilibria sustained by reversion to the robust equilibrium, and a
//! feasibility certificate for such equilibria without a gap.

use serde::Serialize;

use crate::coase::{static_monopoly, uniform_profit_coefficient, GameConfig, Horizon, Tolerances};
use crate::dist::{check_ad_regularity, mixture_press, press, press_discrete_binary, ValueDistribution};
use crate::error::{check_delta, invalid, Error, Result};
use crate::numeric::maximize;
use crate::robust::solve_robust;

/// Naive maxmin seller facing uniform values on `[0, 2]` over an infinite horizon.
#[derive(Clone, Debug, Serialize)]
pub struct NaiveMaxmin {
    /// Optimal highest remaining type the seller plans for.
    pub v_star: f64,
    pub p1: f64,
    /// Value of the seller's objective at `v_star`.
    pub objective: f64,
    /// Realized profit; zero when the seller never sells.
    pub profit: f64,
    pub sells: bool,
    /// The constraint `v* <= 2` binds.
    pub binding: bool,
}

/// The naive seller's objective
/// `(v/8) (4(1-δ) - v (1-δ-√(1-δ))) (1 - v/2) + δ c(δ) (v/2)²`,
/// where `c(δ) x²` is the robust profit when pressed values are uniform on `[0, x]`.
pub fn naive_objective(delta: f64, v: f64) -> Result<f64> {
    let c = uniform_profit_coefficient(delta)?;
    let s = (1.0 - delta).sqrt();
    Ok(v / 8.0 * (4.0 * (1.0 - delta) - v * (1.0 - delta - s)) * (1.0 - v / 2.0) + delta * c * (v / 2.0).powi(2))
}

/// Maximizes the naive objective over `v* ∈ (0, 2]`. When the maximum sits at
/// `v* = 2` the seller keeps waiting for the full market and never sells, and
/// the realized profit is reported as 0.
pub fn naive_maxmin_uniform(delta: f64) -> Result<NaiveMaxmin> {
    check_delta(delta)?;
    let c = uniform_profit_coefficient(delta)?;
    let (v, objective) = maximize(|v| naive_objective(delta, v).unwrap_or(f64::MIN), 0.0, 2.0, 4096, 1e-14);
    let binding = v >= 2.0 - 1e-6;
    let v_star = if binding { 2.0 } else { v };
    let p1 = (1.0 - delta) * v_star / 2.0 + delta * c * (v_star / 2.0).powi(2);
    Ok(NaiveMaxmin {
        v_star,
        p1,
        objective: if binding { naive_objective(delta, 2.0)? } else { objective },
        profit: if binding { 0.0 } else { objective },
        sells: !binding,
        binding,
    })
}

/// Two-period outcome for binary values `{0, 1}` with `P(v = 1) = q`.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteTwoPeriod {
    pub p1: f64,
    /// Posterior mean of the no-buy group after period 1.
    pub w: f64,
    pub p2: f64,
    pub profit: f64,
    /// The optimum is at an end of `[0, q]`.
    pub corner: bool,
}

/// Static optimal price `1 - √(1-q)` against the worst case for prior `q`.
pub fn binary_static_price(q: f64) -> f64 {
    1.0 - (1.0 - q).sqrt()
}

/// Static worst-case profit `p r(q, p)` at the optimal price.
pub fn binary_static_profit(q: f64) -> f64 {
    let p = binary_static_price(q);
    p * press_discrete_binary(q, p)
}

/// Two-period binary example. In period 2 the seller charges `p_2(w) = 1 - √(1-w)`
/// to the no-buy group, whose posterior mean `w` solves `w - p_1 = δ (w - p_2(w))`.
/// Period 1 sells with probability `r(q, w)`, so the seller maximizes
/// `p_1 r(q, w) + δ (1 - r(q, w)) p_2 r(w, p_2)` over `w`.
pub fn sophisticated_discrete_two_period(q: f64, delta: f64) -> Result<DiscreteTwoPeriod> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("prior probability must lie in (0,1), got {q}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("discount factor must lie in [0,1), got {delta}")));
    }
    let outcome = |w: f64| {
        let p2 = binary_static_price(w);
        let p1 = (1.0 - delta) * w + delta * p2;
        let r1 = press_discrete_binary(q, w);
        let profit = p1 * r1 + delta * (1.0 - r1) * p2 * press_discrete_binary(w, p2);
        (p1, p2, profit)
    };
    let (w, profit) = maximize(|w| outcome(w).2, 0.0, q, 4096, 1e-14);
    let (p1, p2, _) = outcome(w);
    let corner = w <= 1e-9 || w >= q - 1e-9;
    Ok(DiscreteTwoPeriod { p1, w, p2, profit, corner })
}

/// Nature's full-information deviation against a two-period binary path.
#[derive(Clone, Debug, Serialize)]
pub struct FullInformationCheck {
    /// Uninformed buyer's surplus from buying at `p_1`: `q - p_1`.
    pub buy_now: f64,
    /// Discounted surplus from waiting for full revelation: `δ q (1 - p_2)`.
    pub wait_for_revelation: f64,
    /// Waiting is strictly better, so promising full information stops
    /// period-1 sales and lowers profit.
    pub profitable_for_nature: bool,
}

pub fn full_information_deviation(q: f64, delta: f64, p1: f64, p2: f64) -> FullInformationCheck {
    let buy_now = q - p1;
    let wait_for_revelation = delta * q * (1.0 - p2);
    FullInformationCheck { buy_now, wait_for_revelation, profitable_for_nature: buy_now < wait_for_revelation }
}

/// Constant-price equilibrium where the buyer buys at `E[v]` with
/// probability `ρ` each period.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantPrice {
    pub price: f64,
    pub rho: f64,
    pub valid: bool,
    /// The bound that fails when `valid` is false.
    pub violated: Option<String>,
}

/// `ρ = v* (1-δ) / (E[v] - δ v*)`, which solves `v* = ρ E[v] + (1-ρ) δ v*`.
/// Valid when `ρ ∈ (0,1)` and `v*` strictly exceeds the punishment profit.
pub fn constant_price_equilibrium(
    f: &ValueDistribution,
    delta: f64,
    v_star: f64,
    minimax_profit: f64,
) -> Result<ConstantPrice> {
    check_delta(delta)?;
    if !(v_star.is_finite() && minimax_profit.is_finite()) {
        return Err(invalid("non-finite seller value"));
    }
    let mean = f.mean();
    let rho = v_star * (1.0 - delta) / (mean - delta * v_star);
    let violated = if v_star >= mean {
        Some(format!("seller value {v_star} must lie below the prior mean {mean}"))
    } else if v_star <= minimax_profit {
        Some(format!("seller value {v_star} does not exceed the punishment profit {minimax_profit}"))
    } else if !(rho > 0.0 && rho < 1.0) {
        Some(format!("purchase probability {rho} outside (0,1)"))
    } else {
        None
    };
    Ok(ConstantPrice { price: mean, rho, valid: violated.is_none(), violated })
}

/// Constant-price play over a finite horizon with per-horizon punishments.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteConstantPrice {
    pub rho: f64,
    /// On-path seller value with `k + 1` periods left.
    pub values: Vec<f64>,
    /// Robust profit with `k + 1` periods left.
    pub punishments: Vec<f64>,
    pub valid: bool,
    /// First number of remaining periods where the value does not beat the punishment.
    pub first_violation: Option<usize>,
}

/// Finite-horizon variant: with `ρ` taken from the infinite-horizon formula,
/// `V_k = ρ E[v] + (1-ρ) δ V_{k-1}` must beat the `k`-period robust profit for
/// every `k`, since no information is released on path and the remaining
/// market keeps the prior.
pub fn constant_price_finite(
    f: &ValueDistribution,
    delta: f64,
    v_star: f64,
    periods: usize,
    tol: &Tolerances,
) -> Result<FiniteConstantPrice> {
    use rayon::prelude::*;
    check_delta(delta)?;
    if periods == 0 {
        return Err(invalid("horizon must be at least one period"));
    }
    // Per-horizon punishments replace the single bound; profits are nonnegative.
    let base = constant_price_equilibrium(f, delta, v_star, 0.0)?;
    let punishments = (1..=periods)
        .into_par_iter()
        .map(|k| {
            let mut cfg = GameConfig::new(f.clone(), delta, Horizon::Finite(k));
            cfg.tolerances = tol.clone();
            solve_robust(&cfg).map(|e| e.profit)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = f.mean();
    let mut values = Vec::with_capacity(periods);
    let mut prev = 0.0;
    for _ in 0..periods {
        prev = base.rho * mean + (1.0 - base.rho) * delta * prev;
        values.push(prev);
    }
    let first_violation = values.iter().zip(&punishments).position(|(v, p)| v <= p).map(|k| k + 1);
    Ok(FiniteConstantPrice {
        rho: base.rho,
        valid: base.valid && first_violation.is_none(),
        values,
        punishments,
        first_violation,
    })
}

/// Feasibility certificate for constant-price play without a gap.
#[derive(Clone, Debug, Serialize)]
pub struct FolkSupport {
    /// Robust infinite-horizon profit: the punishment after a seller deviation.
    pub pi_low: f64,
    /// Static monopoly profit against the pressed mixture of the partition.
    pub pi_high: f64,
    pub v_star: f64,
    pub feasible: bool,
    pub failure: Option<String>,
}

/// Checks whether a seller value `v*` is supportable: it must lie in
/// `(π_low, E[v])` and below `δ π_high`, the loss nature can impose by
/// switching to the partition's information. Without an explicit `v*` the
/// midpoint of `(π_low, min(E[v], δ π_high))` is used.
///
/// Both the prior and its pressed transform must satisfy the power-envelope
/// regularity at exponent `alpha`.
pub fn no_gap_folk_support(
    f: &ValueDistribution,
    delta: f64,
    partition: &[(f64, f64)],
    v_star: Option<f64>,
    alpha: f64,
    tol: &Tolerances,
) -> Result<FolkSupport> {
    check_delta(delta)?;
    f.require_continuous("the no-gap certificate")?;
    if f.lo() != 0.0 {
        return Err(Error::Precondition(format!("the no-gap certificate needs v_lo = 0, got {}", f.lo())));
    }
    let mut cfg = GameConfig::new(f.clone(), delta, Horizon::Infinite);
    cfg.tolerances = tol.clone();
    cfg.tolerances.allow_no_gap = true;
    let pi_low = solve_robust(&cfg)?.profit;
    let pi_high = static_monopoly(&mixture_press(f, partition)?).1;
    let mean = f.mean();
    let v_star = v_star.unwrap_or(0.5 * (pi_low + mean.min(delta * pi_high)));

    let reg_f = check_ad_regularity(f, alpha)?;
    let reg_g = check_ad_regularity(&press(f)?, alpha)?;
    let failure = if !reg_f.holds {
        Some(format!("prior quantile has no power envelope with exponent {alpha}"))
    } else if !reg_g.holds {
        Some(format!("pressed quantile has no power envelope with exponent {alpha}"))
    } else if !(v_star > pi_low && v_star < mean) {
        Some(format!("seller value {v_star} outside ({pi_low}, {mean})"))
    } else if delta * pi_high <= v_star {
        Some(format!("nature's threat δ·π_high = {} does not exceed {v_star}", delta * pi_high))
    } else {
        None
    };
    Ok(FolkSupport { pi_low, pi_high, v_star, feasible: failure.is_none(), failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_regimes() {
        let half = naive_maxmin_uniform(0.5).unwrap();
        assert!(half.sells && half.v_star < 2.0 && half.profit > 0.0);
        let late = naive_maxmin_uniform(0.95).unwrap();
        assert!(!late.sells && late.binding && late.v_star == 2.0 && late.profit == 0.0);
        // At v* = 2 the objective is δ times the robust profit on the whole market.
        let c = uniform_profit_coefficient(0.95).unwrap();
        assert!((late.objective - 0.95 * c).abs() < 1e-14);
        assert!(naive_maxmin_uniform(8.0 / 9.0 - 1e-3).unwrap().sells);
        assert!(!naive_maxmin_uniform(8.0 / 9.0 + 1e-3).unwrap().sells);
    }

    #[test]
    fn naive_objective_scan_oracle() {
        // Brute-force scan, independent of the golden-section refinement.
        for delta in [0.3, 0.5, 0.8] {
            let best = (1..=200_000)
                .map(|i| naive_objective(delta, 2.0 * i as f64 / 200_000.0).unwrap())
                .fold(f64::MIN, f64::max);
            let r = naive_maxmin_uniform(delta).unwrap();
            assert!((r.objective - best).abs() < 1e-9, "{delta}");
        }
    }

    #[test]
    fn discrete_example_values() {
        let r = sophisticated_discrete_two_period(0.5, 0.75).unwrap();
        assert!((r.p1 - 0.2620).abs() < 1e-3);
        assert!((r.w - 0.3904).abs() < 1e-3);
        assert!((r.p2 - 0.2192).abs() < 1e-3);
        assert!((r.profit - 0.1533).abs() < 1e-3);
        assert!(!r.corner);
        assert!(0.5 - r.p1 < 0.75 * 0.5 * (1.0 - r.p2));
        assert!(full_information_deviation(0.5, 0.75, r.p1, r.p2).profitable_for_nature);
    }

    #[test]
    fn discrete_static_limit() {
        let p = binary_static_price(0.5);
        assert!((p - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-15);
        // p (q - p) / (q (1 - p)) with q = 1/2
        let oracle = p * (0.5 - p) / (0.5 * (1.0 - p));
        assert!((binary_static_profit(0.5) - oracle).abs() < 1e-15);
        assert!((oracle - 0.17157).abs() < 1e-5);
        let r = sophisticated_discrete_two_period(0.5, 0.0).unwrap();
        assert!((r.profit - oracle).abs() < 1e-12);
        for delta in [0.1, 0.4, 0.75, 0.95] {
            assert!(sophisticated_discrete_two_period(0.5, delta).unwrap().profit <= oracle + 1e-12);
        }
    }

    #[test]
    fn constant_price_examples() {
        let f = ValueDistribution::uniform(0.0, 2.0).unwrap();
        let r = constant_price_equilibrium(&f, 0.5, 0.5, 0.2).unwrap();
        assert!((r.rho - 1.0 / 3.0).abs() < 1e-15 && r.valid);
        assert!((0.5 - (r.rho * 1.0 + (1.0 - r.rho) * 0.5 * 0.5)).abs() < 1e-12);
        let near = constant_price_equilibrium(&f, 0.5, 1.0 - 1e-9, 0.2).unwrap();
        assert!((near.rho - 1.0).abs() < 1e-8);
        assert!(!constant_price_equilibrium(&f, 0.5, 0.2, 0.2).unwrap().valid);
        assert!(!constant_price_equilibrium(&f, 0.5, 1.0, 0.2).unwrap().valid);
    }

    #[test]
    fn finite_constant_price_needs_enough_value() {
        let f = ValueDistribution::uniform(0.0, 2.0).unwrap();
        let r = constant_price_finite(&f, 0.5, 0.5, 3, &Tolerances::default()).unwrap();
        // One period left: ρ E[v] = 1/3 against the static robust profit 1/4.
        assert!((r.values[0] - 1.0 / 3.0).abs() < 1e-12 && (r.punishments[0] - 0.25).abs() < 1e-9);
        assert!(r.valid);
        let low = constant_price_finite(&f, 0.5, 0.3, 3, &Tolerances::default()).unwrap();
        assert_eq!(low.first_violation, Some(1));
    }

    #[test]
    fn folk_support_examples() {
        let f = ValueDistribution::uniform(0.0, 2.0).unwrap();
        let tol = Tolerances::default();
        let hi = no_gap_folk_support(&f, 0.95, &[(0.0, 2.0)], None, 1.0, &tol).unwrap();
        assert!(hi.feasible, "{hi:?}");
        assert!((hi.pi_high - 0.25).abs() < 1e-9);
        let c = uniform_profit_coefficient(0.95).unwrap();
        assert!((hi.pi_low - c).abs() < 1e-6);
        let lo = no_gap_folk_support(&f, 0.3, &[(0.0, 2.0)], None, 1.0, &tol).unwrap();
        assert!(!lo.feasible);
        let bad = no_gap_folk_support(&f, 0.95, &[(0.0, 2.0)], None, 2.0, &tol).unwrap();
        assert!(!bad.feasible && bad.failure.unwrap().contains("exponent"));
        let gap = ValueDistribution::uniform(1.0, 2.0).unwrap();
        assert!(no_gap_folk_support(&gap, 0.9, &[(1.0, 2.0)], None, 1.0, &tol).is_err());
    }
}
