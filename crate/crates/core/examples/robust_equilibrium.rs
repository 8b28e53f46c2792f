//! Robust equilibrium: seller prices and nature's threshold information process.
use robust_coase::coase::{GameConfig, Horizon};
use robust_coase::dist::ValueDistribution;
use robust_coase::robust::solve_robust;

fn main() -> robust_coase::Result<()> {
    let f = ValueDistribution::uniform(0.0, 2.0)?;
    for delta in [0.1, 0.5, 0.9] {
        let eq = solve_robust(&GameConfig::new(f.clone(), delta, Horizon::Finite(2)))?;
        let closed = (2.0 - delta).powi(2) / (4.0 * (4.0 - 3.0 * delta));
        println!(
            "delta {delta}: prices {:.6?} thresholds {:.6?} profit {:.8} (closed form {closed:.8})",
            eq.prices, eq.process.thresholds, eq.profit
        );
    }

    let gap = ValueDistribution::uniform(0.2, 1.0)?;
    let eq = solve_robust(&GameConfig::new(gap, 0.8, Horizon::Infinite))?;
    println!("\nU[0.2,1], delta 0.8, T = inf");
    for (t, (p, y)) in eq.prices.iter().zip(&eq.process.thresholds).enumerate() {
        println!("  period {}: price {p:.6}, nature reveals v > {y:.6}", t + 1);
    }
    println!("  profit {:.6}, buyer surplus {:.6}", eq.profit, eq.surplus);
    Ok(())
}
