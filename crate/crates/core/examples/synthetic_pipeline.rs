//! Generate a synthetic economy and run the concentration series end to end.

use concentra::concentration::{local_hhi_index, national_hhi, top_n_index, WeightScheme};
use concentra::microdata::{build_cube, impute_missing_product_mix, CubeOptions, Geography, MarketDefinition};
use concentra::synthcensus::{generate_economy, EconomyConfig};

fn main() -> concentra::Result<()> {
    let cfg = EconomyConfig::default().with_target_rows(100_000);
    let economy = generate_economy(&cfg)?;
    for s in &economy.metadata.summary {
        println!("{}: {} firms, {} establishments, sales {:.3e}", s.year, s.firms, s.establishments, s.sales);
    }
    let imputed = impute_missing_product_mix(economy.records, &economy.category_map)?;
    for geo in [Geography::Zip, Geography::County, Geography::CommutingZone, Geography::Msa] {
        let cube = build_cube(&imputed, &economy.category_map, CubeOptions::new(MarketDefinition::Product, geo))?.cube;
        for &y in cube.years() {
            println!(
                "{geo:>8} {y}: local {:.4}  top-4 {:.4}  national {:.4}",
                local_hhi_index(&cube, y, WeightScheme::Contemporaneous)?,
                top_n_index(&cube, y, 4)?,
                national_hhi(&cube, y)?
            );
        }
    }
    Ok(())
}
