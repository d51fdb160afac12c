//! Bounds on local concentration once online and mail-order sales count.

use concentra::counterfactuals::{mixed_channel_firms, nonstore_bounds, nonstore_bounds_index, nonstore_shares};
use concentra::microdata::{build_cube, impute_missing_product_mix, CubeOptions, Geography, MarketDefinition};
use concentra::synthcensus::{generate_economy, EconomyConfig};

fn main() -> concentra::Result<()> {
    let b = nonstore_bounds(0.3, 0.2)?;
    println!("HHI 0.30 with 20% non-store: [{:.4}, {:.4}]", b.lower, b.upper);

    let economy = generate_economy(&EconomyConfig {
        nonstore_share: 0.15,
        ..EconomyConfig::default()
    })?;
    let (stores, nonstore) = economy.split_channels();
    let map = &economy.category_map;
    let opts = CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone);
    let bm = build_cube(&impute_missing_product_mix(stores, map)?, map, opts)?.cube;
    let ns = build_cube(&impute_missing_product_mix(nonstore, map)?, map, opts)?.cube;
    println!("mixed-channel firms: {}", mixed_channel_firms(&bm, &ns).len());
    for &year in bm.years() {
        let shares = nonstore_shares(&bm, &ns, year)?;
        let b = nonstore_bounds_index(&bm, year, &shares)?;
        println!(
            "{year}: non-store {:.3}, store-only HHI {:.4}, bounds [{:.4}, {:.4}]",
            b.nonstore_share, b.hhi_bm, b.lower, b.upper
        );
    }
    Ok(())
}
