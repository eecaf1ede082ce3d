//! Agresti-Coull and Wilson intervals for x successes out of n.
//!
//! cargo run --example intervals -- 8 10 0.95

use chart_sentry::stats::{agresti_coull, wilson, z_for_confidence};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let x: u64 = args.first().map_or(Ok(8), |s| s.parse())?;
    let n: u64 = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let level: f64 = args.get(2).map_or(Ok(0.95), |s| s.parse())?;
    let z = z_for_confidence(level)?;
    println!("x = {x}, n = {n}, z = {z:.6}");
    for e in [agresti_coull(x, n, z)?, wilson(x, n, z)?] {
        println!("{:?}: point {:.4}, center {:.4}, [{:.4}, {:.4}]", e.method, e.point, e.center, e.lo, e.hi);
    }
    Ok(())
}
