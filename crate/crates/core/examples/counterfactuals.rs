//! Breakup and rank-preserving counterfactuals on a chain-expansion economy.

use concentra::concentration::{local_hhi_index, national_hhi, WeightScheme};
use concentra::counterfactuals::{breakup_single_market, rank_preserving};
use concentra::microdata::{build_cube, impute_missing_product_mix, CubeOptions, Geography, MarketDefinition};
use concentra::synthcensus::{generate_economy, EconomyConfig};

fn main() -> concentra::Result<()> {
    let economy = generate_economy(&EconomyConfig::expansion_scenario(7))?;
    let imputed = impute_missing_product_mix(economy.records, &economy.category_map)?;
    let cube = build_cube(
        &imputed,
        &economy.category_map,
        CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone),
    )?
    .cube;
    let (base, target) = (cube.years()[0], *cube.years().last().unwrap());
    for y in [base, target] {
        println!(
            "{y}: local {:.5}  national {:.5}  breakup {:.5}",
            local_hhi_index(&cube, y, WeightScheme::Contemporaneous)?,
            national_hhi(&cube, y)?,
            breakup_single_market(&cube, y)?
        );
    }
    let r = rank_preserving(&cube, base, target)?;
    println!("actual national change:         {:+.5}", r.actual_target - r.actual_base);
    println!("rank-preserving national change: {:+.5}", r.counterfactual_target - r.actual_base);
    if let Some(s) = r.expansion_share {
        println!("share explained by expansion:   {s:.3}");
    }
    Ok(())
}
