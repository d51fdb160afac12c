//! Check closed-form metrics against random dollar-pair draws.

use concentra::decomposition::decompose_national;
use concentra::microdata::{CubeEntry, Geography, MarketDefinition, SalesCube};
use concentra::synthcensus::mc_pair_statistics;

fn main() -> concentra::Result<()> {
    let cube = SalesCube::from_entries(
        MarketDefinition::Product,
        Geography::CommutingZone,
        [
            CubeEntry::new("1", "Groceries", "A", 1, 100.0),
            CubeEntry::new("1", "Groceries", "B", 1, 50.0),
            CubeEntry::new("2", "Groceries", "B", 1, 50.0),
        ],
    )?;
    let exact = decompose_national(&cube, None, 1)?;
    let mc = mc_pair_statistics(&cube, None, 1, 1_000_000, 42)?;
    let rows = [
        ("national HHI", exact.national_hhi, Some(mc.same_firm)),
        ("collocation", exact.collocation, Some(mc.same_location)),
        ("local conditional", exact.local_conditional, mc.same_firm_given_same_location),
        ("cross conditional", exact.cross_market_conditional, mc.same_firm_given_cross_location),
    ];
    for (name, value, est) in rows {
        if let Some(e) = est {
            println!("{name:>18}: exact {value:.5}  draws {:.5} ± {:.5}  ok={}", e.estimate, e.std_error, e.within(value, 4.0));
        }
    }
    Ok(())
}
