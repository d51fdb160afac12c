//! Fixtures and brute-force reference implementations shared by the
//! integration tests. Nothing here calls the library's metric code.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use concentra::microdata::{CubeEntry, Geography, MarketDefinition, SalesCube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn cube(entries: &[(&str, &str, &str, i32, f64)]) -> SalesCube {
    SalesCube::from_entries(
        MarketDefinition::Product,
        Geography::CommutingZone,
        entries.iter().map(|&(f, m, l, y, s)| CubeEntry::new(f, m, l, y, s)),
    )
    .unwrap()
}

/// One product; firm 1 alone in A with 100, firms 1 and 2 split B 50/50.
pub fn worked_economy() -> SalesCube {
    cube(&[("1", "P", "A", 1, 100.0), ("1", "P", "B", 1, 50.0), ("2", "P", "B", 1, 50.0)])
}

/// Firm B moves from market 1 to market 2 between the two periods.
pub fn relocation_economy() -> SalesCube {
    cube(&[
        ("A", "P", "M1", 1, 1.0),
        ("B", "P", "M1", 1, 1.0),
        ("C", "P", "M2", 1, 1.0),
        ("A", "P", "M1", 2, 1.0),
        ("B", "P", "M2", 2, 1.0),
        ("C", "P", "M2", 2, 1.0),
    ])
}

/// Random cube with `cells` entries over `years`. Small firm indices are
/// drawn more often, so low-numbered firms span many locations.
pub fn random_cube(seed: u64, cells: usize, years: &[i32]) -> SalesCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let products = rng.random_range(1..=4usize);
    let locations = rng.random_range(1..=(cells / 4).clamp(1, 2_000));
    let firms = rng.random_range(1..=(cells / 3).clamp(1, 20_000));
    let firm_ids: Vec<String> = (0..firms).map(|i| format!("f{i}")).collect();
    let loc_ids: Vec<String> = (0..locations).map(|i| format!("l{i}")).collect();
    let prod_ids: Vec<String> = (0..products).map(|i| format!("p{i}")).collect();
    let entries: Vec<CubeEntry> = (0..cells)
        .map(|_| {
            let u: f64 = rng.random();
            let f = ((firms as f64) * u * u * u) as usize;
            CubeEntry::new(
                firm_ids[f.min(firms - 1)].clone(),
                prod_ids[rng.random_range(0..products)].clone(),
                loc_ids[rng.random_range(0..locations)].clone(),
                years[rng.random_range(0..years.len())],
                1.0 + 999.0 * rng.random::<f64>(),
            )
        })
        .collect();
    SalesCube::from_entries(MarketDefinition::Product, Geography::CommutingZone, entries).unwrap()
}

/// product → location → firm → sales for one year.
pub type Nested = BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>;

pub fn nested(cube: &SalesCube, year: i32) -> Nested {
    let mut out = Nested::new();
    for e in cube.entries().filter(|e| e.year == year) {
        *out.entry(e.market_key)
            .or_default()
            .entry(e.location_id)
            .or_default()
            .entry(e.firm_id)
            .or_default() += e.sales;
    }
    out
}

fn sum<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().sum()
}

pub fn brute_market_hhi(firms: &BTreeMap<String, f64>) -> f64 {
    let t = sum(firms.values());
    firms.values().map(|x| (x / t).powi(2)).sum()
}

/// (weight s_j, national HHI, collocation, local conditional, cross conditional).
pub struct BruteProduct {
    pub weight: f64,
    pub national: f64,
    pub collocation: f64,
    pub local: f64,
    pub cross: Option<f64>,
    pub local_index: f64,
}

/// Reference decomposition from nested maps.
pub fn brute_products(cube: &SalesCube, year: i32) -> BTreeMap<String, BruteProduct> {
    let data = nested(cube, year);
    let grand: f64 = data.values().flat_map(|l| l.values()).flat_map(|f| f.values()).sum();
    let mut out = BTreeMap::new();
    for (product, locs) in &data {
        let total: f64 = locs.values().flat_map(|f| f.values()).sum();
        let mut by_firm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for firms in locs.values() {
            for (f, x) in firms {
                by_firm.entry(f).or_default().push(x / total);
            }
        }
        let national = by_firm.values().map(|v| sum(v).powi(2)).sum();
        let w: Vec<f64> = locs.values().map(|f| sum(f.values()) / total).collect();
        let hhis: Vec<f64> = locs.values().map(brute_market_hhi).collect();
        let collocation: f64 = w.iter().map(|x| x * x).sum();
        let same_loc_same_firm: f64 = w.iter().zip(&hhis).map(|(w, h)| w * w * h).sum();
        // Σ over ordered pairs of distinct locations of the same firm.
        let cross_pairs: f64 = by_firm
            .values()
            .map(|v| sum(v).powi(2) - v.iter().map(|x| x * x).sum::<f64>())
            .sum();
        out.insert(
            product.clone(),
            BruteProduct {
                weight: total / grand,
                national,
                collocation,
                local: same_loc_same_firm / collocation,
                cross: (collocation < 1.0).then(|| cross_pairs / (1.0 - collocation)),
                local_index: w.iter().zip(&hhis).map(|(w, h)| w * h).sum(),
            },
        );
    }
    out
}

pub fn brute_national(cube: &SalesCube, year: i32) -> f64 {
    brute_products(cube, year).values().map(|p| p.weight * p.national).sum()
}

pub fn brute_local_index(cube: &SalesCube, year: i32) -> f64 {
    brute_products(cube, year).values().map(|p| p.weight * p.local_index).sum()
}

/// Σ_j s_j Σ_ℓ (w_ℓ² HHI_ℓ): the same-location same-firm mass.
pub fn brute_local_term(cube: &SalesCube, year: i32) -> f64 {
    brute_products(cube, year)
        .values()
        .map(|p| p.weight * p.collocation * p.local)
        .sum()
}
