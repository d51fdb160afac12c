//! Solve CES-Cournot markets with heterogeneous costs.

use concentra::synthcensus::solve_cournot_market;

fn main() -> concentra::Result<()> {
    for eps in [1.5, 4.0, 12.0] {
        let m = solve_cournot_market(&[1.0, 1.0, 1.2, 1.5], eps)?;
        println!("eps {eps}: {} iterations, residual {:.1e}", m.iterations, m.residual);
        for (i, c) in m.costs.iter().enumerate() {
            println!("  cost {c:.2}  share {:.4}  markup {:.4}", m.shares[i], m.markups[i]);
        }
    }
    Ok(())
}
