//! Monotonicity of the pressed ratio, which makes indifference thresholds the worst case.
use robust_coase::dist::ValueDistribution;
use robust_coase::nature::{check_prm, prm_neighborhood};

fn main() -> robust_coase::Result<()> {
    let priors = [
        ("U[0,2]", ValueDistribution::uniform(0.0, 2.0)?),
        ("Beta(2,2)", ValueDistribution::beta(2.0, 2.0, 0.0, 1.0)?),
        ("power n=8", ValueDistribution::power(8)?),
    ];
    for (name, f) in &priors {
        let r = check_prm(f)?;
        println!("{name:>10}: holds {} ({} violations on {} points)", r.holds, r.violations.len(), r.grid_points);
    }
    let shifted = ValueDistribution::power_on(8, 0.5, 1.5)?;
    println!("power n=8 on [0.5,1.5]: holds near the bottom up to y = {:.6}", prm_neighborhood(&shifted)?);
    Ok(())
}
