//! Load establishment rows, impute missing product mixes and build cubes.

use std::path::PathBuf;

use concentra::microdata::{
    build_cube, impute_missing_product_mix, load_establishments, CsvSchema, CubeOptions, Geography, MarketDefinition,
    ProductCategoryMap,
};

fn main() -> concentra::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extra_column.csv");
    let loaded = load_establishments(&path, &CsvSchema::default())?;
    println!("{} records, ignored columns {:?}", loaded.records.len(), loaded.ignored_columns);
    for r in &loaded.rejects {
        println!("rejected line {:?}: {}", r.line, r.reason);
    }

    let map = ProductCategoryMap::retail_default();
    let imputed = impute_missing_product_mix(loaded.records, &map)?;
    for geo in [Geography::Zip, Geography::National] {
        let built = build_cube(&imputed, &map, CubeOptions::new(MarketDefinition::Product, geo))?;
        println!("--- {geo}\n{}", built.cube.to_csv_string()?);
    }
    Ok(())
}
