//! Split national concentration into local and cross-market overlap.

use concentra::decomposition::{decompose_all, reports_to_csv};
use concentra::microdata::{build_cube, impute_missing_product_mix, CubeOptions, Geography, MarketDefinition};
use concentra::synthcensus::{generate_economy, EconomyConfig};

fn main() -> concentra::Result<()> {
    let economy = generate_economy(&EconomyConfig {
        acquisitions_per_year: 3,
        ..EconomyConfig::default()
    })?;
    let (stores, _) = economy.split_channels();
    let imputed = impute_missing_product_mix(stores, &economy.category_map)?;
    let cube = build_cube(
        &imputed,
        &economy.category_map,
        CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone),
    )?
    .cube;
    for &year in cube.years() {
        let (mut reports, all) = decompose_all(&cube, year)?;
        println!("{year}: national {:.4}, local share {:.3}", all.national_hhi, all.local_share());
        reports.push(all);
        print!("{}", reports_to_csv(&reports));
    }
    Ok(())
}
