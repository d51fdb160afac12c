//! Microdata pipeline: loading, imputation, cube construction and
//! reaggregation across geographies.

mod common;

use concentra::concentration::{local_hhi_index, national_hhi, WeightScheme};
use concentra::microdata::{
    build_cube, geography_crosswalk, impute_missing_product_mix, load_establishments, CsvSchema, CubeOptions,
    EstablishmentRecord, Geography, ImputedRecord, MarketDefinition, MixSource,
};
use concentra::synthcensus::{generate_economy, EconomyConfig};

fn economy(seed: u64) -> (Vec<EstablishmentRecord>, concentra::microdata::ProductCategoryMap) {
    let mut cfg = EconomyConfig::default();
    cfg.seed = seed;
    cfg.locations = 30;
    cfg.nonreporting_rate = 0.3;
    let e = generate_economy(&cfg).unwrap();
    (e.records, e.category_map)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn sales_are_conserved_for_both_definitions() {
    let (records, map) = economy(3);
    let input: f64 = records.iter().map(|r| r.total_sales).sum();
    let imputed = impute_missing_product_mix(records.clone(), &map).unwrap();

    let product = build_cube(&imputed, &map, CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone)).unwrap();
    assert!(product.rejects.is_empty());
    assert!(rel(product.cube.total_sales() + product.excluded_total, input) < 1e-12);
    assert!(rel(product.input_total, input) < 1e-12);

    let industry = build_cube(
        &ImputedRecord::without_mix(records),
        &map,
        CubeOptions::new(MarketDefinition::Industry, Geography::CommutingZone),
    )
    .unwrap();
    assert!(rel(industry.cube.total_sales(), input) < 1e-12);
    assert_eq!(industry.excluded_total, 0.0);
}

#[test]
fn imputed_mixes_are_fractions() {
    let (records, map) = economy(5);
    let imputed = impute_missing_product_mix(records, &map).unwrap();
    assert!(imputed.iter().any(|r| r.source != MixSource::Reported));
    for r in &imputed {
        let total: f64 = r.mix.values().sum();
        assert!((total - 1.0).abs() < 1e-12, "{} sums to {total}", r.record.estab_id);
        assert!(r.mix.values().all(|v| *v >= 0.0));
    }
}

fn integer_records(seed: u64) -> Vec<EstablishmentRecord> {
    let (records, _) = economy(seed);
    records
        .into_iter()
        .map(|mut r| {
            r.total_sales = r.total_sales.round().max(1.0);
            r
        })
        .collect()
}

#[test]
fn zip_cube_reaggregates_to_coarser_geographies_exactly_on_integer_data() {
    let records = integer_records(11);
    let map = concentra::microdata::ProductCategoryMap::retail_default();
    let wrapped = ImputedRecord::without_mix(records.clone());
    let build = |g| build_cube(&wrapped, &map, CubeOptions::new(MarketDefinition::Industry, g)).unwrap().cube;
    let zip = build(Geography::Zip);
    for target in [Geography::County, Geography::CommutingZone] {
        let direct = build(target);
        let walk = geography_crosswalk(&records, Geography::Zip, target).unwrap();
        let rolled = zip.reaggregate(&walk, target).unwrap();
        assert_eq!(rolled.to_csv_string().unwrap(), direct.to_csv_string().unwrap());
        for &y in direct.years() {
            assert_eq!(
                local_hhi_index(&rolled, y, WeightScheme::Contemporaneous).unwrap(),
                local_hhi_index(&direct, y, WeightScheme::Contemporaneous).unwrap()
            );
            assert_eq!(national_hhi(&rolled, y).unwrap(), national_hhi(&direct, y).unwrap());
        }
    }
}

#[test]
fn reaggregated_product_cube_matches_within_rounding() {
    let (records, map) = economy(13);
    let imputed = impute_missing_product_mix(records.clone(), &map).unwrap();
    let build = |g| build_cube(&imputed, &map, CubeOptions::new(MarketDefinition::Product, g)).unwrap().cube;
    let zip = build(Geography::Zip);
    let direct = build(Geography::CommutingZone);
    let walk = geography_crosswalk(&records, Geography::Zip, Geography::CommutingZone).unwrap();
    let rolled = zip.reaggregate(&walk, Geography::CommutingZone).unwrap();
    assert_eq!(rolled.len(), direct.len());
    for (a, b) in rolled.entries().zip(direct.entries()) {
        assert_eq!((&a.firm_id, &a.market_key, &a.location_id, a.year), (&b.firm_id, &b.market_key, &b.location_id, b.year));
        assert!(rel(a.sales, b.sales) < 1e-9);
    }
    for &y in direct.years() {
        let a = local_hhi_index(&rolled, y, WeightScheme::Contemporaneous).unwrap();
        let b = local_hhi_index(&direct, y, WeightScheme::Contemporaneous).unwrap();
        assert!(rel(a, b) < 1e-9);
    }
}

#[test]
fn cube_bytes_do_not_depend_on_thread_count() {
    let (records, map) = economy(17);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let imputed = impute_missing_product_mix(records.clone(), &map).unwrap();
            build_cube(&imputed, &map, CubeOptions::new(MarketDefinition::Product, Geography::Msa))
                .unwrap()
                .cube
                .to_csv_string()
                .unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn extra_columns_are_ignored_and_bad_rows_rejected() {
    let out = load_establishments(common::fixture("extra_column.csv"), &CsvSchema::default()).unwrap();
    assert_eq!(out.ignored_columns, vec!["surveyor_note".to_string()]);
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.rejects.len(), 1);
    assert_eq!(out.rejects[0].estab_id.as_deref(), Some("e4"));

    let clean = load_establishments(common::fixture("worked_economy.csv"), &CsvSchema::default()).unwrap();
    let map = concentra::microdata::ProductCategoryMap::retail_default();
    let cube = |recs: Vec<EstablishmentRecord>| {
        let imputed = impute_missing_product_mix(recs, &map).unwrap();
        build_cube(&imputed, &map, CubeOptions::new(MarketDefinition::Product, Geography::Zip)).unwrap().cube
    };
    assert_eq!(cube(out.records).to_csv_string().unwrap(), cube(clean.records).to_csv_string().unwrap());
}
