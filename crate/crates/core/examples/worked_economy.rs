//! Local and national HHI for a two-location, two-firm economy.

use concentra::concentration::{hhi, local_hhi_index, market_shares, national_hhi, MarketKey, WeightScheme};
use concentra::microdata::{CubeEntry, Geography, MarketDefinition, SalesCube};

fn main() -> concentra::Result<()> {
    // Firm 1 is alone in A and splits B with firm 2.
    let cube = SalesCube::from_entries(
        MarketDefinition::Product,
        Geography::CommutingZone,
        [
            CubeEntry::new("1", "Groceries", "A", 2012, 100.0),
            CubeEntry::new("1", "Groceries", "B", 2012, 50.0),
            CubeEntry::new("2", "Groceries", "B", 2012, 50.0),
        ],
    )?;
    for loc in ["A", "B"] {
        let shares = market_shares(&cube, &MarketKey::new("Groceries", loc, 2012))?;
        println!("HHI in {loc}: {}", hhi(&shares));
    }
    println!("local index:  {}", local_hhi_index(&cube, 2012, WeightScheme::Contemporaneous)?);
    println!("national HHI: {}", national_hhi(&cube, 2012)?);
    Ok(())
}
