//! Benchmarks: a naive maxmin seller and a two-type prior.
use robust_coase::benchmarks::{
    binary_static_profit, full_information_deviation, naive_maxmin_uniform, sophisticated_discrete_two_period,
};

fn main() -> robust_coase::Result<()> {
    println!("naive maxmin seller on U[0,2]");
    for delta in [0.5, 0.75, 0.85, 0.9, 0.95] {
        let n = naive_maxmin_uniform(delta)?;
        println!("  delta {delta}: v* = {:.6}, p1 = {:.6}, profit {:.6}, sells {}", n.v_star, n.p1, n.profit, n.sells);
    }

    let (q, delta) = (0.5, 0.75);
    let d = sophisticated_discrete_two_period(q, delta)?;
    println!("\nvalues {{0, 1}}, q = {q}, delta = {delta}");
    println!("  p1 {:.4}, w {:.4}, p2 {:.4}, profit {:.4}", d.p1, d.w, d.p2, d.profit);
    println!("  static profit {:.5}", binary_static_profit(q));
    let fi = full_information_deviation(q, delta, d.p1, d.p2);
    println!("  nature gains by revealing everything in period 2: {}", fi.profitable_for_nature);
    Ok(())
}
