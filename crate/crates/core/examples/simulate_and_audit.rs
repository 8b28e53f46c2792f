//! Monte Carlo play of the robust equilibrium with best-response audits.
use robust_coase::coase::{GameConfig, Horizon};
use robust_coase::dist::ValueDistribution;
use robust_coase::robust::solve_robust;
use robust_coase::sim::{audit_all, commitment_profile, equilibrium_profile, simulate};

fn main() -> robust_coase::Result<()> {
    let cfg = GameConfig::new(ValueDistribution::beta(2.0, 2.0, 0.5, 1.5)?, 0.7, Horizon::Finite(3));
    let profile = equilibrium_profile(&solve_robust(&cfg)?, &cfg)?;
    let mut report = simulate(&profile, &cfg, 200_000, 42)?;
    report.attach_audits(&audit_all(&profile, &cfg, 256)?);
    println!("{}", serde_json::to_string_pretty(&report)?);

    // Nature's committed policy is not a sequential best response.
    let u = GameConfig::new(ValueDistribution::uniform(0.0, 2.0)?, 0.5, Horizon::Finite(2));
    let audits = audit_all(&commitment_profile(&u.dist, u.delta)?, &u, 256)?;
    println!("commitment profile: nature could lower profit by {:.6}", audits.nature);
    Ok(())
}
