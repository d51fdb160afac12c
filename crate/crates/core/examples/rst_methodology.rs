//! Cross-section change versus the end-weighted change when a firm moves.

use concentra::concentration::{cross_section_change, market_hhi_changes, methodology_gap, rst_delta};
use concentra::microdata::{CubeEntry, Geography, MarketDefinition, SalesCube};

fn main() -> concentra::Result<()> {
    // B moves from M1 to M2; every firm has the same sales in both years.
    let rows = [("A", "M1", 1), ("B", "M1", 1), ("C", "M2", 1), ("A", "M1", 2), ("B", "M2", 2), ("C", "M2", 2)];
    let cube = SalesCube::from_entries(
        MarketDefinition::Product,
        Geography::CommutingZone,
        rows.iter().map(|&(f, l, y)| CubeEntry::new(f, "Clothing", l, y, 1.0)),
    )?;
    for m in market_hhi_changes(&cube, 1, 2)? {
        println!("{} {}: {:.4} -> {:.4}", m.product, m.location, m.base_hhi, m.target_hhi);
    }
    println!("cross-section change: {:+.4}", cross_section_change(&cube, 1, 2)?);
    println!("end-weighted change:  {:+.4}", rst_delta(&cube, 1, 2)?);
    println!("gap:                  {:+.4}", methodology_gap(&cube, 1, 2)?);
    Ok(())
}
