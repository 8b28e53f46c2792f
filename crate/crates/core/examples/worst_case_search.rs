//! Nature's minimization against a fixed price path, over threshold processes.
use robust_coase::dist::ValueDistribution;
use robust_coase::nature::{worst_case_partitional, SearchOptions};

fn main() -> robust_coase::Result<()> {
    let opts = SearchOptions::default();

    let f = ValueDistribution::uniform(0.0, 2.0)?;
    let wc = worst_case_partitional(&f, &[0.45, 0.3], 0.5, &opts)?;
    println!("U[0,2], prices (0.45, 0.30): min profit {:.8} at thresholds {:.6?}", wc.min_profit, wc.thresholds);

    // A prior whose mass piles up at the top: slack thresholds beat indifference.
    let power = ValueDistribution::power(8)?;
    let prices = [0.302, 0.15];
    let wc = worst_case_partitional(&power, &prices, 0.5, &opts)?;
    println!(
        "power n=8, prices {prices:?}: min profit {:.6} at {:.6?}, indifference process gives {:?}",
        wc.min_profit, wc.thresholds, wc.indifference_profit
    );
    println!("searched {} ({} evaluations)", wc.restriction, wc.evaluations);
    Ok(())
}
