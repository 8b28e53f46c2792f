//! Seller profit when nature can commit to its information policy, against the baseline.
use robust_coase::coase::Tolerances;
use robust_coase::dist::ValueDistribution;
use robust_coase::nature::{commitment_regime_switch, compare_series};

fn main() -> robust_coase::Result<()> {
    let f = ValueDistribution::uniform(0.0, 2.0)?;
    let deltas: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    println!("delta,baseline_profit,commitment_profit");
    for p in compare_series(&f, &deltas, &Tolerances::default())? {
        println!("{:.2},{:.8},{:.8}", p.delta, p.baseline_profit, p.commitment_profit);
    }
    if let Some(d) = commitment_regime_switch(&f, 0.05, 0.95, 1e-8)? {
        println!("first-period sales stop at delta = {d:.6}");
    }
    Ok(())
}
