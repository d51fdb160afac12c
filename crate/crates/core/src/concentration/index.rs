//! Aggregate concentration indices across markets.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::view::{LocalMarket, ProductView, YearView};
use crate::error::{Error, Result};
use crate::microdata::SalesCube;
use crate::numeric::{pairwise_dot, pairwise_sum};

/// How market-level HHIs are weighted into an aggregate index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// s_j^t · s_ℓ^{jt}: each market's share of the year's sales.
    Contemporaneous,
    /// Market weights frozen at a base year.
    BasePeriod(i32),
    /// Market weights taken from the end year (the RST convention).
    EndOfPeriod(i32),
    /// s_j^t · (s_ℓ^{jt})² / Σ_n (s_n^{jt})², the decomposition's weights.
    Decomposition,
}

impl WeightScheme {
    /// Parses a scheme name; `base` and `rst` need the weight year.
    pub fn parse(name: &str, weight_year: Option<i32>) -> Result<Self> {
        let need_year = || {
            weight_year.ok_or_else(|| Error::InvalidArgument(format!("weight scheme '{name}' needs a weight year")))
        };
        match name {
            "contemporaneous" | "sales" => Ok(WeightScheme::Contemporaneous),
            "decomp" | "decomposition" => Ok(WeightScheme::Decomposition),
            "base" => Ok(WeightScheme::BasePeriod(need_year()?)),
            "rst" | "end" => Ok(WeightScheme::EndOfPeriod(need_year()?)),
            other => Err(Error::InvalidArgument(format!("unknown weight scheme '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Contemporaneous => "contemporaneous",
            WeightScheme::BasePeriod(_) => "base",
            WeightScheme::EndOfPeriod(_) => "rst",
            WeightScheme::Decomposition => "decomp",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::BasePeriod(y) | WeightScheme::EndOfPeriod(y) => write!(f, "{}:{y}", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

/// Per-product concentration summary for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductConcentration {
    pub product: String,
    /// s_j: the product's share of the year's sales.
    pub weight: f64,
    /// HHI over location-pooled firm shares.
    pub national_hhi: f64,
    /// Σ_ℓ s_ℓ HHI_ℓ, the sales-weighted mean local HHI (H̄_j).
    pub local_hhi: f64,
}

/// Level and weight of a single local market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketStat {
    /// s_{jℓ}: share of the year's total sales.
    pub weight: f64,
    pub hhi: f64,
}

fn product_local_hhi_of(p: &ProductView<'_>) -> f64 {
    pairwise_dot(&p.location_weights(), &p.local_hhis())
}

/// Per-product weights and indices for `year`, in product-key order.
pub fn product_concentration(cube: &SalesCube, year: i32) -> Result<Vec<ProductConcentration>> {
    let view = YearView::new(cube, year)?;
    let weights = view.product_weights();
    Ok(view
        .products
        .par_iter()
        .zip(weights.par_iter())
        .map(|(p, &w)| ProductConcentration {
            product: cube.market_key(p.market).to_owned(),
            weight: w,
            national_hhi: p.national_hhi(),
            local_hhi: product_local_hhi_of(p),
        })
        .collect())
}

/// Σ_j s_j^t HHI_j^t with HHI_j^t computed from location-pooled firm shares.
pub fn national_hhi(cube: &SalesCube, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    Ok(national_hhi_of(&view))
}

pub(crate) fn national_hhi_of(view: &YearView<'_>) -> f64 {
    let hhis: Vec<f64> = view.products.par_iter().map(ProductView::national_hhi).collect();
    pairwise_dot(&view.product_weights(), &hhis)
}

/// H̄_j for one product: local HHIs weighted by location sales shares.
pub fn product_local_hhi(cube: &SalesCube, product: &str, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    let p = cube
        .market_index(product)
        .and_then(|m| view.product(m))
        .ok_or_else(|| Error::NoMarket(format!("({product}, *, {year})")))?;
    Ok(product_local_hhi_of(p))
}

/// Every local market's weight and HHI in `year`, keyed by (product, location) indices.
pub fn market_stats(cube: &SalesCube, year: i32) -> Result<BTreeMap<(u32, u32), MarketStat>> {
    let view = YearView::new(cube, year)?;
    Ok(market_stats_of(&view))
}

pub(crate) fn market_stats_of(view: &YearView<'_>) -> BTreeMap<(u32, u32), MarketStat> {
    let per_product: Vec<Vec<((u32, u32), MarketStat)>> = view
        .products
        .par_iter()
        .map(|p| {
            p.locations
                .iter()
                .map(|l: &LocalMarket<'_>| {
                    (
                        (p.market, l.location),
                        MarketStat {
                            weight: l.total / view.total,
                            hhi: l.hhi(),
                        },
                    )
                })
                .collect()
        })
        .collect();
    per_product.into_iter().flatten().collect()
}

/// Aggregated local HHI for `year` under `scheme`.
///
/// For frozen-weight schemes, markets absent in `year` are dropped and the
/// remaining weights renormalised.
pub fn local_hhi_index(cube: &SalesCube, year: i32, scheme: WeightScheme) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    match scheme {
        WeightScheme::Contemporaneous => {
            let locals: Vec<f64> = view.products.par_iter().map(product_local_hhi_of).collect();
            Ok(pairwise_dot(&view.product_weights(), &locals))
        }
        WeightScheme::Decomposition => {
            let locals: Vec<f64> = view
                .products
                .par_iter()
                .map(|p| {
                    let w = p.location_weights();
                    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
                    let coll = pairwise_sum(&sq);
                    pairwise_dot(&sq, &p.local_hhis()) / coll
                })
                .collect();
            Ok(pairwise_dot(&view.product_weights(), &locals))
        }
        WeightScheme::BasePeriod(wy) | WeightScheme::EndOfPeriod(wy) => {
            let current = market_stats_of(&view);
            let weights = market_stats(cube, wy)?;
            let mut w = Vec::new();
            let mut h = Vec::new();
            for (k, ws) in &weights {
                if let Some(cur) = current.get(k) {
                    w.push(ws.weight);
                    h.push(cur.hhi);
                }
            }
            let total = pairwise_sum(&w);
            if w.is_empty() || total <= 0.0 {
                return Err(Error::NoMarket(format!("no market of year {wy} is present in {year}")));
            }
            Ok(pairwise_dot(&w, &h) / total)
        }
    }
}

/// Sales-weighted mean of market top-n shares.
pub fn top_n_index(cube: &SalesCube, year: i32, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("top-n requires n >= 1".into()));
    }
    let view = YearView::new(cube, year)?;
    let per_product: Vec<f64> = view
        .products
        .par_iter()
        .map(|p| {
            let tops: Vec<f64> = p
                .locations
                .iter()
                .map(|l| {
                    let top: Vec<f64> = l.ranked().iter().take(n).map(|r| r.1).collect();
                    pairwise_sum(&top).min(1.0)
                })
                .collect();
            pairwise_dot(&p.location_weights(), &tops)
        })
        .collect();
    Ok(pairwise_dot(&view.product_weights(), &per_product))
}

/// Change in one market's HHI between two years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketChange {
    pub product: String,
    pub location: String,
    pub base_hhi: f64,
    pub target_hhi: f64,
    pub base_weight: f64,
    pub target_weight: f64,
}

impl MarketChange {
    pub fn delta(&self) -> f64 {
        self.target_hhi - self.base_hhi
    }
}

/// Markets present in both years with their HHI levels, for distributions
/// of changes.
pub fn market_hhi_changes(cube: &SalesCube, base_year: i32, year: i32) -> Result<Vec<MarketChange>> {
    let base = market_stats(cube, base_year)?;
    let target = market_stats(cube, year)?;
    Ok(base
        .iter()
        .filter_map(|(k, b)| {
            target.get(k).map(|t| MarketChange {
                product: cube.market_key(k.0).to_owned(),
                location: cube.location_id(k.1).to_owned(),
                base_hhi: b.hhi,
                target_hhi: t.hhi,
                base_weight: b.weight,
                target_weight: t.weight,
            })
        })
        .collect())
}

/// Change of the contemporaneous-weight (cross-section) local index.
pub fn cross_section_change(cube: &SalesCube, base_year: i32, year: i32) -> Result<f64> {
    Ok(local_hhi_index(cube, year, WeightScheme::Contemporaneous)?
        - local_hhi_index(cube, base_year, WeightScheme::Contemporaneous)?)
}

/// Market HHI and weight in both periods. Markets missing from the base
/// take their end-period HHI as base level (zero measured change); markets
/// missing from the end period carry zero end weight.
struct PairedMarket {
    base_weight: f64,
    end_weight: f64,
    base_hhi: f64,
    end_hhi: f64,
}

fn paired_markets(cube: &SalesCube, base_year: i32, year: i32) -> Result<Vec<PairedMarket>> {
    let base = market_stats(cube, base_year)?;
    let end = market_stats(cube, year)?;
    if end.is_empty() {
        return Err(Error::NoMarket(format!("no markets in {year}")));
    }
    let mut keys: Vec<&(u32, u32)> = base.keys().chain(end.keys()).collect();
    keys.sort();
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|k| {
            let b = base.get(k);
            let e = end.get(k);
            let end_hhi = e.map_or(0.0, |m| m.hhi);
            PairedMarket {
                base_weight: b.map_or(0.0, |m| m.weight),
                end_weight: e.map_or(0.0, |m| m.weight),
                base_hhi: b.map_or(end_hhi, |m| m.hhi),
                end_hhi,
            }
        })
        .collect())
}

/// Σ_{jℓ} s_{jℓ}^t ΔHHI_{jℓt}: market HHI changes weighted by end-period
/// market shares.
pub fn rst_delta(cube: &SalesCube, base_year: i32, year: i32) -> Result<f64> {
    let m = paired_markets(cube, base_year, year)?;
    let w: Vec<f64> = m.iter().map(|p| p.end_weight).collect();
    let d: Vec<f64> = m.iter().map(|p| p.end_hhi - p.base_hhi).collect();
    Ok(pairwise_dot(&w, &d))
}

/// Σ_{jℓ} (s_{jℓ}^t − s_{jℓ}^0) HHI_{jℓ0}: the amount by which the
/// cross-section change exceeds [`rst_delta`].
pub fn methodology_gap(cube: &SalesCube, base_year: i32, year: i32) -> Result<f64> {
    let m = paired_markets(cube, base_year, year)?;
    let dw: Vec<f64> = m.iter().map(|p| p.end_weight - p.base_weight).collect();
    let h: Vec<f64> = m.iter().map(|p| p.base_hhi).collect();
    Ok(pairwise_dot(&dw, &h))
}
