//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use robust_coase::benchmarks::{
    binary_static_profit, constant_price_equilibrium, naive_maxmin_uniform, sophisticated_discrete_two_period,
};
use robust_coase::coase::{solve_known_values_infinite, solve_on, PressedValueSpace, uniform_profit_coefficient, GameConfig, Horizon, Tolerances};
use robust_coase::dist::{press, SaleCurve, ValueDistribution};
use robust_coase::nature::{
    check_prm, commitment_regime_switch, compare_series, worst_case_partitional, SearchOptions,
};
use robust_coase::numeric::bisect_predicate;
use robust_coase::robust::{profit_of_thresholds, solve_robust};
use robust_coase::sim::{
    audit_buyer, audit_nature, audit_seller, constant_price_profile, equilibrium_profile, simulate, survival,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what)
    }
}

fn u02() -> ValueDistribution {
    ValueDistribution::uniform(0.0, 2.0).unwrap()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Two-period uniform closed forms.
fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for delta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let t0 = Instant::now();
        let eq = solve_robust(&GameConfig::new(u02(), delta, Horizon::Finite(2))).map_err(err)?;
        slowest = slowest.max(t0.elapsed());
        let p1 = (2.0 - delta).powi(2) / (8.0 - 6.0 * delta);
        let p2 = (2.0 - delta) / (8.0 - 6.0 * delta);
        let profit = (2.0 - delta).powi(2) / (4.0 * (4.0 - 3.0 * delta));
        for (got, want) in [(eq.prices[0], p1), (eq.prices[1], p2), (eq.profit, profit)] {
            worst = worst.max((got - want).abs());
        }
        check(eq.prices.len() == 2, format!("delta {delta}: {} periods of sales", eq.prices.len()))?;
    }
    check(worst <= 1e-8, format!("max error {worst:.3e}"))?;
    check(slowest < Duration::from_secs(1), format!("slowest solve {slowest:?}"))?;
    Ok(format!("max error {worst:.2e}, slowest solve {slowest:.2?}"))
}

/// Commitment profit against the baseline.
fn criterion_2() -> Outcome {
    let f = u02();
    let deltas: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let series = compare_series(&f, &deltas, &Tolerances::default()).map_err(err)?;
    let mut formula_err = 0.0f64;
    for p in &series {
        let d = p.delta;
        let want = if d < 0.8 { (4.0 - 3.0 * d).powi(2) / (64.0 * (1.0 - d)) } else { d / 4.0 };
        formula_err = formula_err.max((p.commitment_profit - want).abs());
        let gap = p.baseline_profit - p.commitment_profit;
        check(gap >= -1e-12, format!("commitment above baseline at delta {d}: gap {gap:e}"))?;
        check(gap >= 1e-6 || d <= 0.02 || d >= 0.98, format!("gap {gap:e} at interior delta {d}"))?;
    }
    check(formula_err <= 1e-8, format!("commitment formula error {formula_err:.3e}"))?;
    let switch = commitment_regime_switch(&f, 0.5, 0.95, 1e-7)
        .map_err(err)?
        .ok_or("no regime switch in [0.5, 0.95]")?;
    check((switch - 0.8).abs() <= 1e-4, format!("regime switch at {switch}"))?;
    let min_gap = series.iter().map(|p| p.baseline_profit - p.commitment_profit).fold(f64::MAX, f64::min);
    Ok(format!("formula error {formula_err:.2e}, switch at {switch:.6}, min gap {min_gap:.2e}"))
}

/// Nature's grid minimization reproduces the equilibrium thresholds, and
/// finds a lower profit when the pressed ratio is not monotone.
fn criterion_3() -> Outcome {
    let opts = SearchOptions::default();
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for periods in [2, 3] {
        for delta in [0.3, 0.5, 0.7] {
            let eq = solve_robust(&GameConfig::new(u02(), delta, Horizon::Finite(periods))).map_err(err)?;
            let t0 = Instant::now();
            let wc = worst_case_partitional(&u02(), &eq.prices, delta, &opts).map_err(err)?;
            slowest = slowest.max(t0.elapsed());
            let diff = (wc.min_profit - eq.profit).abs();
            check(diff <= 2e-4, format!("T={periods} delta={delta}: {} vs {}", wc.min_profit, eq.profit))?;
            worst = worst.max(diff);
        }
    }
    let power = ValueDistribution::power(8).map_err(err)?;
    let t0 = Instant::now();
    let wc = worst_case_partitional(&power, &[0.302, 0.15], 0.5, &opts).map_err(err)?;
    slowest = slowest.max(t0.elapsed());
    let at_indiff = wc.indifference_profit.ok_or("indifference process missing for the power prior")?;
    let margin = at_indiff - wc.min_profit;
    check(margin > 1e-3, format!("power prior margin {margin:e}"))?;
    check(slowest < Duration::from_secs(60), format!("slowest search {slowest:?}"))?;
    Ok(format!("max error {worst:.2e}, power-prior margin {margin:.4}, slowest {slowest:.2?}"))
}

/// Naive maxmin seller: binding region and the profit coefficient.
fn criterion_4() -> Outcome {
    for delta in [0.5, 0.8, 0.88] {
        let n = naive_maxmin_uniform(delta).map_err(err)?;
        check(!n.binding && n.sells, format!("binds at delta {delta}"))?;
    }
    for delta in [0.89, 0.92, 0.97] {
        let n = naive_maxmin_uniform(delta).map_err(err)?;
        check(n.binding && !n.sells, format!("does not bind at delta {delta}"))?;
    }
    let boundary = bisect_predicate(|d| naive_maxmin_uniform(d).map(|n| !n.binding).unwrap_or(false), 0.8, 0.97, 1e-7);
    check((boundary - 8.0 / 9.0).abs() <= 1e-4, format!("boundary at {boundary}"))?;
    let c = uniform_profit_coefficient(0.75).map_err(err)?;
    check((c - 1.0 / 6.0).abs() <= 1e-10, format!("coefficient {c}"))?;
    // Solver oracle: value iteration on U[0, 1] without a gap.
    let mut cfg = GameConfig::new(ValueDistribution::uniform(0.0, 1.0).map_err(err)?, 0.75, Horizon::Infinite);
    cfg.tolerances.allow_no_gap = true;
    let solved = solve_known_values_infinite(&cfg).map_err(err)?.profit;
    check((solved - c).abs() <= 1e-6, format!("solver oracle {solved} vs {c}"))?;
    Ok(format!(
        "boundary {boundary:.6} (8/9 = {:.6}), c(3/4) = {c:.12}, solver oracle {solved:.10}",
        8.0 / 9.0
    ))
}

/// Binary-value example.
fn criterion_5() -> Outcome {
    let (q, delta) = (0.5, 0.75);
    let d = sophisticated_discrete_two_period(q, delta).map_err(err)?;
    let printed = [(d.p1, 0.2620), (d.w, 0.3904), (d.p2, 0.2192), (d.profit, 0.1533)];
    for (got, want) in printed {
        check((got - want).abs() <= 1e-3, format!("{got} vs printed {want}"))?;
    }
    // Formula oracle p (q - p) / (q (1 - p)), maximized by brute force.
    let oracle = (0..=2_000_000)
        .map(|i| q * i as f64 / 2_000_000.0)
        .map(|p| p * (q - p) / (q * (1.0 - p)))
        .fold(f64::MIN, f64::max);
    let stat = binary_static_profit(q);
    check((stat - oracle).abs() <= 1e-6, format!("static profit {stat} vs oracle {oracle}"))?;
    // The printed 0.1718 is a rounding of the same quantity.
    check((stat - 0.17157).abs() <= 1e-5, format!("static profit {stat}"))?;
    let lhs = 0.5 - d.p1;
    let rhs = delta * 0.5 * (1.0 - d.p2);
    check(lhs < rhs, format!("full revelation does not pay: {lhs} >= {rhs}"))?;
    Ok(format!(
        "p1 {:.4}, w {:.4}, p2 {:.4}, profit {:.4}, static {stat:.6}, {lhs:.4} < {rhs:.4}",
        d.p1, d.w, d.p2, d.profit
    ))
}

/// Constant-price construction with reversion to the robust equilibrium.
fn criterion_6() -> Outcome {
    let f = u02();
    let mut cfg = GameConfig::new(f.clone(), 0.5, Horizon::Infinite);
    cfg.tolerances.allow_no_gap = true;
    let punish_eq = solve_robust(&cfg).map_err(err)?;
    let r = constant_price_equilibrium(&f, 0.5, 0.5, punish_eq.profit).map_err(err)?;
    check(r.valid, format!("construction invalid: {:?}", r.violated))?;
    check((r.rho - 1.0 / 3.0).abs() <= 1e-12, format!("rho {}", r.rho))?;
    let profile = constant_price_profile(&f, r.rho, equilibrium_profile(&punish_eq, &cfg).map_err(err)?);
    let grid: Vec<f64> = (0..256).map(|i| 2.0 * i as f64 / 255.0).collect();
    let gain = audit_seller(&profile, &cfg, &grid).map_err(err)?;
    check(gain <= 1e-3, format!("seller deviation gain {gain:e}"))?;
    let alive = survival(&profile, &cfg).map_err(err)?;
    let mut worst = 0.0f64;
    // Play stops once the discounted remaining mass is negligible, after about 34 periods here.
    for (k, s) in alive.iter().take(30).enumerate() {
        worst = worst.max((s - (1.0 - r.rho).powi(k as i32 + 1)).abs());
    }
    check(alive.len() >= 30, format!("only {} periods on path", alive.len()))?;
    check(worst <= 1e-12, format!("survival error {worst:e}"))?;
    Ok(format!("rho {:.15}, seller gain {gain:.2e}, survival error {worst:.2e} over 30 periods", r.rho))
}

fn matrix() -> Vec<(&'static str, ValueDistribution, f64, Horizon)> {
    let u = |a, b| ValueDistribution::uniform(a, b).unwrap();
    let beta = |a, b, lo, hi| ValueDistribution::beta(a, b, lo, hi).unwrap();
    vec![
        ("U[0,2]", u(0.0, 2.0), 0.5, Horizon::Finite(2)),
        ("U[0,2]", u(0.0, 2.0), 0.7, Horizon::Finite(3)),
        ("U[0,2]", u(0.0, 2.0), 0.9, Horizon::Finite(2)),
        ("U[0.3,2]", u(0.3, 2.0), 0.5, Horizon::Infinite),
        ("U[0.1,1.1]", u(0.1, 1.1), 0.9, Horizon::Infinite),
        ("U[0.2,1]", u(0.2, 1.0), 0.8, Horizon::Infinite),
        ("Beta(2,2)[0.5,1.5]", beta(2.0, 2.0, 0.5, 1.5), 0.7, Horizon::Finite(3)),
        ("Beta(2,3)[0.3,1.3]", beta(2.0, 3.0, 0.3, 1.3), 0.6, Horizon::Finite(4)),
        ("power n=2", ValueDistribution::power(2).unwrap(), 0.5, Horizon::Finite(2)),
        ("U[0,1]", u(0.0, 1.0), 0.3, Horizon::Finite(5)),
        ("Beta(2,2)[0.2,1.2]", beta(2.0, 2.0, 0.2, 1.2), 0.6, Horizon::Infinite),
        ("Beta(2,2)[0,1]", beta(2.0, 2.0, 0.0, 1.0), 0.8, Horizon::Finite(3)),
    ]
}

/// Audits and Monte Carlo on a matrix of instances.
fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut worst_audit = 0.0f64;
    let mut worst_z = 0.0f64;
    for (name, f, delta, horizon) in matrix() {
        let cfg = GameConfig::new(f, delta, horizon);
        let eq = solve_robust(&cfg).map_err(err)?;
        let profile = equilibrium_profile(&eq, &cfg).map_err(err)?;
        let (lo, hi) = cfg.dist.support();
        let grid: Vec<f64> = (0..256).map(|i| lo + (hi - lo) * i as f64 / 255.0).collect();
        let s = audit_seller(&profile, &cfg, &grid).map_err(err)?;
        let n = audit_nature(&profile, &cfg, &grid).map_err(err)?;
        let b = audit_buyer(&profile, &cfg).map_err(err)?;
        let audit = s.max(n).max(b);
        check(audit <= 1e-3, format!("{name} delta={delta} T={horizon}: audits {s:e} {n:e} {b:e}"))?;
        let sim = simulate(&profile, &cfg, 200_000, 2024).map_err(err)?;
        check((sim.analytic_profit - eq.profit).abs() <= 1e-6, format!("{name}: played profit differs from solution"))?;
        let se = sim.profit.sd / (sim.n_paths as f64).sqrt();
        let z = (sim.profit.mean - eq.profit).abs() / se.max(1e-300);
        check(z <= 3.0, format!("{name} delta={delta} T={horizon}: Monte Carlo {z:.2} sd away"))?;
        worst_audit = worst_audit.max(audit);
        worst_z = worst_z.max(z);
    }
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    Ok(format!("12 instances, max audit {worst_audit:.2e}, max |z| {worst_z:.2}, {elapsed:.2?}"))
}

/// Structural invariants.
fn criterion_8() -> Outcome {
    let g = press(&u02()).map_err(err)?;
    let unit = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    let sup = (0..=1024)
        .map(|i| i as f64 / 1024.0)
        .map(|w| (g.cdf(w) - unit.cdf(w)).abs())
        .fold(0.0, f64::max);
    check(sup <= 1e-10, format!("pressed uniform sup error {sup:e}"))?;

    let mut resid = 0.0f64;
    let mut equiv = 0.0f64;
    let mut value_space = 0.0f64;
    let mut instances: Vec<_> = matrix().into_iter().map(|(_, f, d, h)| (f, d, h)).collect();
    for delta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        instances.push((u02(), delta, Horizon::Finite(2)));
    }
    for (f, delta, horizon) in instances {
        let eq = solve_robust(&GameConfig::new(f.clone(), delta, horizon)).map_err(err)?;
        resid = eq.process.obedience_residuals.iter().fold(resid, |m, r| m.max(r.abs()));
        let direct = profit_of_thresholds(&f, &eq.prices, &eq.process.thresholds, delta).map_err(err)?;
        equiv = equiv.max((direct - eq.pressed_eq.profit).abs());
        // Independent pipeline: the known-values game on G indexed by its own
        // values. Both solvers tabulate on a 512-cell grid, so they agree to
        // discretization accuracy rather than to rounding.
        let g = press(&f).map_err(err)?;
        let in_w = solve_on(&PressedValueSpace(&g), delta, horizon, &Tolerances::default()).map_err(err)?;
        value_space = value_space.max((in_w.profit - eq.profit).abs());
        check(
            eq.prices.windows(2).all(|p| p[0] > delta * p[1]),
            format!("p_t <= delta p_(t+1) somewhere: {:?}", eq.prices),
        )?;
    }
    check(resid <= 1e-8, format!("indifference residual {resid:e}"))?;
    check(equiv <= 1e-8, format!("payoff equivalence gap {equiv:e}"))?;
    check(value_space <= 1e-6, format!("value-space profit gap {value_space:e}"))?;

    for (lo, hi) in [(0.0, 1.0), (0.0, 2.0), (0.5, 1.0), (1.0, 4.0), (0.2, 0.3)] {
        let f = ValueDistribution::uniform(lo, hi).map_err(err)?;
        check(check_prm(&f).map_err(err)?.holds, format!("PRM fails for U[{lo},{hi}]"))?;
    }
    let power = ValueDistribution::power(8).map_err(err)?;
    check(!check_prm(&power).map_err(err)?.holds, "PRM holds for the n=8 power prior".into())?;
    Ok(format!("press sup {sup:.1e}, residual {resid:.1e}, equivalence {equiv:.1e} (value space {value_space:.1e})"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("two-period uniform closed forms", criterion_1),
        ("nature commitment comparison", criterion_2),
        ("worst-case search oracle", criterion_3),
        ("naive maxmin benchmark", criterion_4),
        ("binary-value example", criterion_5),
        ("constant-price construction", criterion_6),
        ("equilibrium certification matrix", criterion_7),
        ("structural invariants", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail} [{:.2?}]", i + 1, t0.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{:.2?}]", i + 1, t0.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
