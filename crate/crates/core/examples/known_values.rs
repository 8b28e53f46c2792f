//! Classic durable-goods monopoly with known values: prices fall over time.
use robust_coase::coase::{solve_known_values, solve_known_values_infinite, GameConfig, Horizon};
use robust_coase::dist::ValueDistribution;

fn main() -> robust_coase::Result<()> {
    let f = ValueDistribution::uniform(0.0, 1.0)?;
    for periods in [1, 2, 5] {
        let eq = solve_known_values(&GameConfig::new(f.clone(), 0.8, Horizon::Finite(periods)))?;
        println!("T = {periods}: profit {:.6}, prices {:.4?}", eq.profit, eq.prices);
    }

    // With a gap between zero and the lowest value the market clears in finite time.
    let gap = ValueDistribution::uniform(0.5, 1.0)?;
    let eq = solve_known_values_infinite(&GameConfig::new(gap, 0.9, Horizon::Infinite))?;
    println!("U[0.5,1], T = inf: prices {:.4?}, clears in period {:?}", eq.prices, eq.clearing_time);
    Ok(())
}
