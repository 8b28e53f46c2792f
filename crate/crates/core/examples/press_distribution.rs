//! Pressing a prior: the worst-case cutoff distribution a seller faces.
use robust_coase::dist::{press, SaleCurve, ValueDistribution};

fn main() -> robust_coase::Result<()> {
    let f = ValueDistribution::uniform(0.0, 2.0)?;
    let g = press(&f)?;
    let (lo, top) = g.support();
    println!("pressed support [{lo}, {top}], mean {:.6}", g.mean());
    println!("{:>6} {:>10} {:>10} {:>10}", "w", "G(w)", "g(w)", "L^-1(w)");
    for i in 0..=10 {
        let w = lo + (top - lo) * i as f64 / 10.0;
        println!("{w:>6.2} {:>10.6} {:>10.6} {:>10.6}", g.cdf(w), g.pdf(w), g.threshold(w)?);
    }

    let beta = ValueDistribution::beta(2.0, 3.0, 0.3, 1.3)?;
    let gb = press(&beta)?;
    println!("\nBeta(2,3) on [0.3, 1.3]: E[v] = {:.6}, pressed median {:.6}", beta.mean(), gb.quantile(0.5));
    Ok(())
}
