use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream_rng, EconomyConfig, RNG_ALGORITHM};
use crate::error::Result;
use crate::microdata::{EstablishmentRecord, ProductCategoryMap};
use crate::numeric::pairwise_sum;

pub const GENERATOR_NAME: &str = "concentra-synthcensus";

const PHASE_GEO: u32 = 1;
const PHASE_LOCAL: u32 = 2;
const PHASE_CHAIN: u32 = 3;
const PHASE_NONSTORE: u32 = 4;
const PHASE_EXPAND: u32 = 5;
const PHASE_REPORT: u32 = 6;

const GM_NAICS: &str = "452112";
const NONSTORE_NAICS: &str = "454110";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub firms: usize,
    pub establishments: usize,
    pub sales: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyMetadata {
    pub generator: String,
    pub generator_version: String,
    pub rng: String,
    pub seed: u64,
    pub config: EconomyConfig,
    pub summary: Vec<YearSummary>,
}

#[derive(Debug, Clone)]
pub struct SyntheticEconomy {
    /// Sorted by year, then generation order.
    pub records: Vec<EstablishmentRecord>,
    pub category_map: ProductCategoryMap,
    pub metadata: EconomyMetadata,
}

impl SyntheticEconomy {
    /// Splits records into store and non-store establishments.
    pub fn split_channels(&self) -> (Vec<EstablishmentRecord>, Vec<EstablishmentRecord>) {
        self.records.iter().cloned().partition(|r| !r.is_nonstore())
    }
}

struct Location {
    id: String,
    msa: Option<String>,
}

#[derive(Clone)]
struct Store {
    estab_id: String,
    firm_id: String,
    location: usize,
    county: usize,
    zip: usize,
    naics: String,
    sales: f64,
    lines: Vec<(usize, f64)>,
    local: bool,
}

struct Products {
    codes: Vec<String>,
    naics: Vec<String>,
}

fn pareto(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    (1.0 - u).powf(-1.0 / alpha)
}

fn round_tenth(x: f64) -> f64 {
    ((x * 10.0).round() / 10.0).max(0.1)
}

fn round_cent(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Primary product plus, when there is more than one, a secondary line.
fn specialist_mix(rng: &mut ChaCha8Rng, primary: usize, products: usize) -> Vec<(usize, f64)> {
    if products == 1 {
        return vec![(primary, 1.0)];
    }
    let main = round_cent(0.6 + 0.4 * rng.random::<f64>());
    let mut other = rng.random_range(0..products - 1);
    if other >= primary {
        other += 1;
    }
    let mut lines = vec![(primary, main)];
    if main < 1.0 {
        lines.push((other, round_cent(1.0 - main)));
    }
    lines
}

fn broad_mix(rng: &mut ChaCha8Rng, products: usize) -> Vec<(usize, f64)> {
    let w: Vec<f64> = (0..products).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total = pairwise_sum(&w);
    w.iter().enumerate().map(|(j, x)| (j, round_cent(x / total))).collect()
}

fn place(rng: &mut ChaCha8Rng, cfg: &EconomyConfig) -> (usize, usize) {
    (rng.random_range(0..cfg.counties_per_location), rng.random_range(0..cfg.zips_per_county))
}

fn local_stores(cfg: &EconomyConfig, products: &Products, l: usize) -> Vec<Store> {
    let mut rng = stream_rng(cfg.seed, PHASE_LOCAL, l as u64);
    let n = rng.random_range(cfg.local_firms[0]..=cfg.local_firms[1]);
    (0..n)
        .map(|k| {
            let primary = rng.random_range(0..cfg.products);
            let (county, zip) = place(&mut rng, cfg);
            let sales = round_tenth(100.0 * pareto(&mut rng, cfg.tail_exponent));
            Store {
                estab_id: format!("E{l:05}-{k:03}"),
                firm_id: format!("F{l:05}-{k:03}"),
                location: l,
                county,
                zip,
                naics: products.naics[primary].clone(),
                sales,
                lines: specialist_mix(&mut rng, primary, cfg.products),
                local: true,
            }
        })
        .collect()
}

fn chain_stores(cfg: &EconomyConfig, products: &Products, c: usize) -> Vec<Store> {
    let mut rng = stream_rng(cfg.seed, PHASE_CHAIN, c as u64);
    let span = rng.random_range(cfg.chain_span[0]..=cfg.chain_span[1]);
    let gm = rng.random::<f64>() < cfg.general_merchandiser_share;
    let primary = rng.random_range(0..cfg.products);
    let scale = 100.0 * cfg.chain_size_premium * pareto(&mut rng, cfg.tail_exponent);
    let mut locations = sample(&mut rng, cfg.locations, span).into_vec();
    locations.sort_unstable();
    locations
        .into_iter()
        .map(|l| {
            let (county, zip) = place(&mut rng, cfg);
            let sales = round_tenth(scale * (0.5 + rng.random::<f64>()));
            let (naics, lines) = if gm {
                (GM_NAICS.to_owned(), broad_mix(&mut rng, cfg.products))
            } else {
                (products.naics[primary].clone(), specialist_mix(&mut rng, primary, cfg.products))
            };
            Store {
                estab_id: format!("S{c:04}-{l:05}"),
                firm_id: format!("C{c:04}"),
                location: l,
                county,
                zip,
                naics,
                sales,
                lines,
                local: false,
            }
        })
        .collect()
}

fn nonstore_stores(cfg: &EconomyConfig, store_sales: f64) -> Vec<Store> {
    if cfg.nonstore_share == 0.0 {
        return Vec::new();
    }
    let mut rng = stream_rng(cfg.seed, PHASE_NONSTORE, 0);
    let target = store_sales * cfg.nonstore_share / (1.0 - cfg.nonstore_share);
    let sizes: Vec<f64> = (0..cfg.nonstore_firms).map(|_| pareto(&mut rng, cfg.tail_exponent)).collect();
    let total = pairwise_sum(&sizes);
    sizes
        .iter()
        .enumerate()
        .map(|(k, s)| Store {
            estab_id: format!("N{k:04}"),
            firm_id: format!("N{k:04}"),
            location: 0,
            county: 0,
            zip: 0,
            naics: NONSTORE_NAICS.to_owned(),
            sales: round_tenth(target * s / total),
            lines: broad_mix(&mut rng, cfg.products),
            local: false,
        })
        .collect()
}

/// Applies chain acquisitions for year index `t` to `owners`.
fn expand(cfg: &EconomyConfig, stores: &[Store], owners: &mut [String], presence: &mut [BTreeSet<usize>], t: usize) {
    let mut independent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in stores.iter().enumerate() {
        if s.local && owners[i] == s.firm_id {
            independent.entry(s.location).or_default().push(i);
        }
    }
    for (c, present) in presence.iter_mut().enumerate() {
        let mut rng = stream_rng(cfg.seed, PHASE_EXPAND, (t * cfg.chains + c) as u64);
        let open: Vec<usize> = independent
            .iter()
            .filter(|(l, v)| !v.is_empty() && !present.contains(l))
            .map(|(l, _)| *l)
            .collect();
        let k = cfg.acquisitions_per_year.min(open.len());
        let mut picks: Vec<usize> = sample(&mut rng, open.len(), k).into_iter().map(|i| open[i]).collect();
        picks.sort_unstable();
        for l in picks {
            let cands = independent.get_mut(&l).unwrap();
            let (pos, _) = cands
                .iter()
                .enumerate()
                .max_by(|a, b| stores[*a.1].sales.total_cmp(&stores[*b.1].sales).then(b.1.cmp(a.1)))
                .unwrap();
            let target = cands.remove(pos);
            owners[target] = format!("C{c:04}");
            present.insert(l);
        }
    }
}

/// Generates a seeded synthetic economy in the establishment CSV schema.
///
/// Output is a pure function of the configuration: identical seeds give
/// identical records regardless of thread count.
pub fn generate_economy(cfg: &EconomyConfig) -> Result<SyntheticEconomy> {
    cfg.validate()?;
    let mut map = ProductCategoryMap::retail_default();
    let mains: Vec<(String, String)> = map
        .main_categories()
        .take(cfg.products)
        .map(|c| (c.id.clone(), format!("{}110", c.industry.as_deref().unwrap_or("453"))))
        .collect();
    let mut products = Products {
        codes: Vec::new(),
        naics: Vec::new(),
    };
    for (j, (cat, naics)) in mains.iter().enumerate() {
        let code = format!("L{:02}", j + 1);
        map.add_line(&code, cat)?;
        products.codes.push(code);
        products.naics.push(naics.clone());
    }

    let locations: Vec<Location> = (0..cfg.locations)
        .map(|l| {
            let mut rng = stream_rng(cfg.seed, PHASE_GEO, l as u64);
            let rural = rng.random::<f64>() < cfg.rural_share;
            Location {
                id: format!("CZ{l:05}"),
                msa: (!rural).then(|| format!("M{l:05}")),
            }
        })
        .collect();

    let mut stores: Vec<Store> = (0..cfg.locations)
        .into_par_iter()
        .map(|l| local_stores(cfg, &products, l))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let chains: Vec<Vec<Store>> = (0..cfg.chains).into_par_iter().map(|c| chain_stores(cfg, &products, c)).collect();
    let mut presence: Vec<BTreeSet<usize>> = chains.iter().map(|v| v.iter().map(|s| s.location).collect()).collect();
    stores.extend(chains.into_iter().flatten());
    let store_sales = pairwise_sum(&stores.iter().map(|s| s.sales).collect::<Vec<_>>());
    stores.extend(nonstore_stores(cfg, store_sales));

    let mut owners: Vec<String> = stores.iter().map(|s| s.firm_id.clone()).collect();
    let mut records = Vec::with_capacity(stores.len() * cfg.years.len());
    let mut summary = Vec::new();
    for (t, &year) in cfg.years.iter().enumerate() {
        if t > 0 && cfg.acquisitions_per_year > 0 {
            expand(cfg, &stores, &mut owners, &mut presence, t);
        }
        let factor = cfg.growth.powi(t as i32);
        let mut rng = stream_rng(cfg.seed, PHASE_REPORT, t as u64);
        let start = records.len();
        for (s, owner) in stores.iter().zip(&owners) {
            let loc = &locations[s.location];
            let county = format!("{}-{}", loc.id, s.county);
            let zip = format!("{county}-{}", s.zip);
            let sales = if factor == 1.0 { s.sales } else { round_cent(s.sales * factor) };
            let mut rec = EstablishmentRecord::new(year, &s.estab_id, owner, &s.naics, sales)
                .located(&zip, &county, &loc.id, loc.msa.as_deref())
                .with_employment((sales / 200.0).ceil().max(1.0));
            let reports = cfg.nonreporting_rate == 0.0 || rng.random::<f64>() >= cfg.nonreporting_rate;
            if reports {
                for &(j, share) in &s.lines {
                    rec = rec.with_line(&products.codes[j], share);
                }
            }
            records.push(rec);
        }
        let year_records = &records[start..];
        summary.push(YearSummary {
            year,
            firms: year_records.iter().map(|r| &r.firm_id).collect::<BTreeSet<_>>().len(),
            establishments: year_records.len(),
            sales: pairwise_sum(&year_records.iter().map(|r| r.total_sales).collect::<Vec<_>>()),
        });
    }

    Ok(SyntheticEconomy {
        records,
        category_map: map,
        metadata: EconomyMetadata {
            generator: GENERATOR_NAME.to_owned(),
            generator_version: env!("CARGO_PKG_VERSION").to_owned(),
            rng: RNG_ALGORITHM.to_owned(),
            seed: cfg.seed,
            config: cfg.clone(),
            summary,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::{local_hhi_index, national_hhi, WeightScheme};
    use crate::microdata::{
        build_cube, impute_missing_product_mix, write_establishments, CubeOptions, Geography, MarketDefinition,
    };

    fn bytes(e: &SyntheticEconomy) -> Vec<u8> {
        let mut out = Vec::new();
        write_establishments(&mut out, &e.records).unwrap();
        out
    }

    #[test]
    fn single_firm_economy() {
        let cfg = EconomyConfig {
            locations: 1,
            products: 1,
            local_firms: [1, 1],
            chains: 0,
            years: vec![2000],
            nonreporting_rate: 0.0,
            ..EconomyConfig::default()
        };
        let e = generate_economy(&cfg).unwrap();
        assert_eq!(e.records.len(), 1);
        let recs = impute_missing_product_mix(e.records.clone(), &e.category_map).unwrap();
        let cube = build_cube(&recs, &e.category_map, CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone))
            .unwrap()
            .cube;
        assert_eq!(national_hhi(&cube, 2000).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = EconomyConfig {
            nonstore_share: 0.1,
            acquisitions_per_year: 2,
            ..EconomyConfig::default()
        };
        let a = generate_economy(&cfg).unwrap();
        let b = generate_economy(&cfg).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        let other = generate_economy(&EconomyConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(bytes(&a), bytes(&other));
    }

    #[test]
    fn nonstore_share_is_respected() {
        let cfg = EconomyConfig {
            nonstore_share: 0.25,
            years: vec![2000],
            ..EconomyConfig::default()
        };
        let e = generate_economy(&cfg).unwrap();
        let (bm, ns) = e.split_channels();
        let b: f64 = bm.iter().map(|r| r.total_sales).sum();
        let n: f64 = ns.iter().map(|r| r.total_sales).sum();
        assert!((n / (b + n) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn expansion_raises_national_not_local() {
        let e = generate_economy(&EconomyConfig::expansion_scenario(11)).unwrap();
        let recs = impute_missing_product_mix(e.records.clone(), &e.category_map).unwrap();
        let cube = build_cube(&recs, &e.category_map, CubeOptions::new(MarketDefinition::Product, Geography::CommutingZone))
            .unwrap()
            .cube;
        let (y0, y1) = (2002, 2012);
        assert!(national_hhi(&cube, y1).unwrap() > national_hhi(&cube, y0).unwrap());
        let l0 = local_hhi_index(&cube, y0, WeightScheme::Contemporaneous).unwrap();
        let l1 = local_hhi_index(&cube, y1, WeightScheme::Contemporaneous).unwrap();
        assert!((l1 - l0).abs() < 1e-12);
    }

    #[test]
    fn metadata_summary() {
        let e = generate_economy(&EconomyConfig::default()).unwrap();
        assert_eq!(e.metadata.summary.len(), 2);
        assert_eq!(e.metadata.summary[0].establishments * 2, e.records.len());
        assert!(e.metadata.rng.contains("ChaCha8"));
    }
}
