//! Constant prices without a price decline, held in place by reverting to the robust equilibrium.
use robust_coase::benchmarks::{constant_price_equilibrium, no_gap_folk_support};
use robust_coase::coase::{GameConfig, Horizon, Tolerances};
use robust_coase::dist::ValueDistribution;
use robust_coase::robust::solve_robust;
use robust_coase::sim::{audit_seller, constant_price_profile, equilibrium_profile, simulate};

fn main() -> robust_coase::Result<()> {
    let f = ValueDistribution::uniform(0.0, 2.0)?;
    let r = constant_price_equilibrium(&f, 0.5, 0.5, 0.2)?;
    println!("price {}, purchase probability {:.12}, valid {}", r.price, r.rho, r.valid);

    // Punishment play: the robust equilibrium of the infinite game.
    let mut cfg = GameConfig::new(f.clone(), 0.5, Horizon::Infinite);
    cfg.tolerances = Tolerances { allow_no_gap: true, ..Tolerances::default() };
    let punish = equilibrium_profile(&solve_robust(&cfg)?, &cfg)?;
    let profile = constant_price_profile(&f, r.rho, punish);
    let grid: Vec<f64> = (0..=256).map(|i| 2.0 * i as f64 / 256.0).collect();
    println!("best seller deviation gain: {:.3e}", audit_seller(&profile, &cfg, &grid)?);
    let sim = simulate(&profile, &cfg, 50_000, 3)?;
    println!("simulated profit {:.4} +- {:.4}, analytic {:.6}", sim.profit.mean, sim.profit.ci95, sim.analytic_profit);

    let cert = no_gap_folk_support(&f, 0.95, &[(0.0, 2.0)], None, 1.0, &Tolerances::default())?;
    println!("no-gap certificate at delta 0.95: feasible {} (v* = {:.6})", cert.feasible, cert.v_star);
    Ok(())
}
