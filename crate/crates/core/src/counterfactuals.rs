//! Market-structure counterfactuals and non-store bounds.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::view::{hhi_from_share_pairs, LocalMarket, ProductView, YearView, SYNTHETIC_FIRM_BASE};
use crate::concentration::{national_hhi_of, MarketKey};
use crate::error::{Error, Result};
use crate::microdata::SalesCube;
use crate::numeric::{pairwise_dot, pairwise_sum};

/// National HHI if every multi-market firm were split into a separate firm
/// in each location.
pub fn breakup_single_market(cube: &SalesCube, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    let n_firms = cube.firms().len() as u64;
    let hhis: Vec<f64> = view
        .products
        .par_iter()
        .map(|p| {
            let mut pairs = Vec::new();
            for l in &p.locations {
                let w = l.total / p.total;
                for c in l.cells {
                    pairs.push((l.location as u64 * n_firms + c.firm as u64, w * (c.sales / l.total)));
                }
            }
            hhi_from_share_pairs(pairs)
        })
        .collect();
    Ok(pairwise_dot(&view.product_weights(), &hhis))
}

/// Firms of one market ordered by rank (share desc, firm id asc).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStructure {
    pub key: MarketKey,
    pub firms: Vec<String>,
}

impl RankStructure {
    /// 1-based rank of `firm`, if present.
    pub fn rank_of(&self, firm: &str) -> Option<usize> {
        self.firms.iter().position(|f| f == firm).map(|i| i + 1)
    }
}

pub fn rank_structure(cube: &SalesCube, key: &MarketKey) -> Result<RankStructure> {
    let cells = cube.market_cells(&key.market, &key.location, key.year)?;
    if cells.is_empty() {
        return Err(Error::NoMarket(key.to_string()));
    }
    let total = pairwise_sum(&cells.iter().map(|c| c.sales).collect::<Vec<_>>());
    let market = LocalMarket {
        location: cells[0].location,
        cells,
        total,
    };
    Ok(RankStructure {
        key: key.clone(),
        firms: market.ranked().into_iter().map(|(f, _)| cube.firm_id(f).to_owned()).collect(),
    })
}

/// Holder of a counterfactual share.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CounterfactualFirm {
    Incumbent(String),
    /// Synthetic entrant, `ENT:<product>/<location>:<k>`; unique per market.
    Entrant(String),
}

impl CounterfactualFirm {
    pub fn id(&self) -> &str {
        match self {
            CounterfactualFirm::Incumbent(s) | CounterfactualFirm::Entrant(s) => s,
        }
    }
}

fn entrant_id(cube: &SalesCube, market: u32, location: u32, k: usize) -> String {
    format!("ENT:{}/{}:{k}", cube.market_key(market), cube.location_id(location))
}

/// Rank-preserving assignment for one target-year market.
///
/// The k-th ranked base-year firm receives the k-th largest target-year
/// share. Leftover shares go to entrants largest-first; surplus base firms
/// receive nothing.
fn assign(base: Option<&LocalMarket<'_>>, target: &LocalMarket<'_>) -> Vec<(Option<u32>, f64)> {
    let incumbents: Vec<u32> = base.map(|b| b.ranked().into_iter().map(|(f, _)| f).collect()).unwrap_or_default();
    target
        .ranked()
        .into_iter()
        .enumerate()
        .map(|(k, (_, share))| (incumbents.get(k).copied(), share))
        .collect()
}

fn find_location<'v, 'a>(p: &'v ProductView<'a>, location: u32) -> Option<&'v LocalMarket<'a>> {
    p.locations
        .binary_search_by_key(&location, |l| l.location)
        .ok()
        .map(|i| &p.locations[i])
}

/// Counterfactual shares in one (product, location) market at `target_year`.
pub fn counterfactual_market(
    cube: &SalesCube,
    base_year: i32,
    target_year: i32,
    product: &str,
    location: &str,
) -> Result<Vec<(CounterfactualFirm, f64)>> {
    let base = YearView::new(cube, base_year)?;
    let target = YearView::new(cube, target_year)?;
    let missing = || Error::NoMarket(MarketKey::new(product, location, target_year).to_string());
    let m = cube.market_index(product).ok_or_else(missing)?;
    let l = cube.location_index(location).ok_or_else(missing)?;
    let tm = target.product(m).and_then(|p| find_location(p, l)).ok_or_else(missing)?;
    let bm = base.product(m).and_then(|p| find_location(p, l));
    let mut entrants = 0;
    Ok(assign(bm, tm)
        .into_iter()
        .map(|(firm, share)| {
            let holder = match firm {
                Some(f) => CounterfactualFirm::Incumbent(cube.firm_id(f).to_owned()),
                None => {
                    entrants += 1;
                    CounterfactualFirm::Entrant(entrant_id(cube, m, l, entrants))
                }
            };
            (holder, share)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPreservingReport {
    pub base_year: i32,
    pub target_year: i32,
    pub actual_base: f64,
    pub actual_target: f64,
    pub counterfactual_target: f64,
    /// 1 − Δcounterfactual / Δactual; `None` when the actual HHI is unchanged.
    pub expansion_share: Option<f64>,
    /// Target-year markets with no base-year counterpart; all their sales
    /// went to entrants.
    pub entrant_only_markets: Vec<(String, String)>,
}

/// National HHI at `target_year` when each base-year firm keeps its
/// within-market rank but takes the target-year share of that rank.
///
/// Local HHIs at the target year are unchanged by construction; only the
/// identity of who holds each rank, and therefore cross-market overlap,
/// comes from the base year.
pub fn rank_preserving(cube: &SalesCube, base_year: i32, target_year: i32) -> Result<RankPreservingReport> {
    let base = YearView::new(cube, base_year)?;
    let target = YearView::new(cube, target_year)?;

    let per_product: Vec<(f64, Vec<(String, String)>)> = target
        .products
        .par_iter()
        .map(|p| {
            let bp = base.product(p.market);
            let mut pairs = Vec::new();
            let mut fresh = Vec::new();
            let mut entrants = 0u64;
            for l in &p.locations {
                let w = l.total / p.total;
                let bm = bp.and_then(|b| find_location(b, l.location));
                if bm.is_none() {
                    fresh.push((cube.market_key(p.market).to_owned(), cube.location_id(l.location).to_owned()));
                }
                for (firm, share) in assign(bm, l) {
                    let key = match firm {
                        Some(f) => f as u64,
                        None => {
                            entrants += 1;
                            SYNTHETIC_FIRM_BASE + entrants
                        }
                    };
                    pairs.push((key, w * share));
                }
            }
            (hhi_from_share_pairs(pairs), fresh)
        })
        .collect();

    let hhis: Vec<f64> = per_product.iter().map(|p| p.0).collect();
    let counterfactual_target = pairwise_dot(&target.product_weights(), &hhis);
    let entrant_only_markets: Vec<(String, String)> = per_product.into_iter().flat_map(|p| p.1).collect();
    if !entrant_only_markets.is_empty() {
        warn!(
            "{} market(s) in {target_year} have no {base_year} counterpart; their shares go to entrants",
            entrant_only_markets.len()
        );
    }

    let actual_base = national_hhi_of(&base);
    let actual_target = national_hhi_of(&target);
    let d_actual = actual_target - actual_base;
    Ok(RankPreservingReport {
        base_year,
        target_year,
        actual_base,
        actual_target,
        counterfactual_target,
        expansion_share: (d_actual != 0.0).then(|| 1.0 - (counterfactual_target - actual_base) / d_actual),
        entrant_only_markets,
    })
}

/// Bounds on a market HHI once non-store sales are added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonStoreBounds {
    pub nonstore_share: f64,
    pub hhi_bm: f64,
    /// Non-store sellers atomistic: (1 − s_NS)² · HHI_BM.
    pub lower: f64,
    /// One stand-in non-store firm: lower + s_NS².
    pub upper: f64,
}

pub fn nonstore_bounds(hhi_bm: f64, nonstore_share: f64) -> Result<NonStoreBounds> {
    for (name, v) in [("HHI_BM", hhi_bm), ("s_NS", nonstore_share)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let lower = (1.0 - nonstore_share).powi(2) * hhi_bm;
    Ok(NonStoreBounds {
        nonstore_share,
        hhi_bm,
        lower,
        upper: lower + nonstore_share * nonstore_share,
    })
}

/// Bounds on the aggregated local HHI for `year`, holding each product's
/// national non-store share constant across its local markets. Products
/// absent from `nonstore_shares` have no non-store sales.
pub fn nonstore_bounds_index(
    cube: &SalesCube,
    year: i32,
    nonstore_shares: &BTreeMap<String, f64>,
) -> Result<NonStoreBounds> {
    let view = YearView::new(cube, year)?;
    let mut ns = Vec::new();
    let mut bm = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for p in &view.products {
        let s = nonstore_shares.get(cube.market_key(p.market)).copied().unwrap_or(0.0);
        let w = p.location_weights();
        let hhis = p.local_hhis();
        let bounds: Vec<NonStoreBounds> = hhis.iter().map(|&h| nonstore_bounds(h.min(1.0), s)).collect::<Result<_>>()?;
        ns.push(s);
        bm.push(pairwise_dot(&w, &hhis));
        lower.push(pairwise_dot(&w, &bounds.iter().map(|b| b.lower).collect::<Vec<_>>()));
        upper.push(pairwise_dot(&w, &bounds.iter().map(|b| b.upper).collect::<Vec<_>>()));
    }
    let pw = view.product_weights();
    Ok(NonStoreBounds {
        nonstore_share: pairwise_dot(&pw, &ns),
        hhi_bm: pairwise_dot(&pw, &bm),
        lower: pairwise_dot(&pw, &lower),
        upper: pairwise_dot(&pw, &upper),
    })
}

/// Each product's national non-store share: NS / (BM + NS) sales.
pub fn nonstore_shares(brick_and_mortar: &SalesCube, nonstore: &SalesCube, year: i32) -> Result<BTreeMap<String, f64>> {
    let bm = brick_and_mortar.year_cells(year)?;
    let mut totals: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in bm {
        totals.entry(brick_and_mortar.market_key(c.market)).or_default().0.push(c.sales);
    }
    if let Ok(ns) = nonstore.year_cells(year) {
        for c in ns {
            totals.entry(nonstore.market_key(c.market)).or_default().1.push(c.sales);
        }
    }
    Ok(totals
        .into_iter()
        .map(|(k, (b, n))| {
            let (b, n) = (pairwise_sum(&b), pairwise_sum(&n));
            (k.to_owned(), n / (b + n))
        })
        .collect())
}

/// Firms with both store and non-store sales. The upper bound assumes
/// there are none, so any hit is logged.
pub fn mixed_channel_firms(brick_and_mortar: &SalesCube, nonstore: &SalesCube) -> Vec<String> {
    let bm: BTreeSet<&String> = brick_and_mortar.firms().iter().collect();
    let both: Vec<String> = nonstore.firms().iter().filter(|f| bm.contains(f)).cloned().collect();
    if !both.is_empty() {
        warn!(
            "{} firm(s) sell through both store and non-store channels; non-store upper bound may be loose",
            both.len()
        );
    }
    both
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::national_hhi;
    use crate::microdata::{CubeEntry, Geography, MarketDefinition};

    fn cube(entries: &[(&str, &str, i32, f64)]) -> SalesCube {
        SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::CommutingZone,
            entries.iter().map(|&(f, l, y, s)| CubeEntry::new(f, "P", l, y, s)),
        )
        .unwrap()
    }

    #[test]
    fn breakup_of_worked_economy() {
        let c = cube(&[("1", "A", 1, 100.0), ("1", "B", 1, 50.0), ("2", "B", 1, 50.0)]);
        assert!((breakup_single_market(&c, 1).unwrap() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn breakup_is_noop_for_single_market_firms() {
        let c = cube(&[("1", "A", 1, 100.0), ("2", "B", 1, 50.0), ("3", "B", 1, 50.0)]);
        assert_eq!(breakup_single_market(&c, 1).unwrap(), national_hhi(&c, 1).unwrap());
    }

    #[test]
    fn rank_rule_with_entrant() {
        let c = cube(&[
            ("A", "L", 1, 60.0),
            ("B", "L", 1, 40.0),
            ("X", "L", 2, 50.0),
            ("Y", "L", 2, 30.0),
            ("Z", "L", 2, 20.0),
        ]);
        let m = counterfactual_market(&c, 1, 2, "P", "L").unwrap();
        assert_eq!(
            m,
            vec![
                (CounterfactualFirm::Incumbent("A".into()), 0.5),
                (CounterfactualFirm::Incumbent("B".into()), 0.3),
                (CounterfactualFirm::Entrant("ENT:P/L:1".into()), 0.2),
            ]
        );
    }

    #[test]
    fn surplus_incumbents_get_nothing() {
        let c = cube(&[("A", "L", 1, 60.0), ("B", "L", 1, 40.0), ("X", "L", 2, 50.0)]);
        let m = counterfactual_market(&c, 1, 2, "P", "L").unwrap();
        assert_eq!(m, vec![(CounterfactualFirm::Incumbent("A".into()), 1.0)]);
    }

    #[test]
    fn identity_mapping_is_bit_exact() {
        let c = cube(&[
            ("A", "L", 1, 61.0),
            ("B", "L", 1, 39.0),
            ("A", "M", 1, 13.0),
            ("C", "M", 1, 7.0),
        ]);
        let r = rank_preserving(&c, 1, 1).unwrap();
        assert_eq!(r.counterfactual_target.to_bits(), national_hhi(&c, 1).unwrap().to_bits());
        assert_eq!(r.expansion_share, None);
    }

    #[test]
    fn new_market_flagged() {
        let c = cube(&[("A", "L", 1, 1.0), ("A", "L", 2, 1.0), ("B", "M", 2, 1.0)]);
        let r = rank_preserving(&c, 1, 2).unwrap();
        assert_eq!(r.entrant_only_markets, vec![("P".to_string(), "M".to_string())]);
    }

    #[test]
    fn ranks_break_ties_by_id() {
        let c = cube(&[("b", "L", 1, 5.0), ("a", "L", 1, 5.0), ("c", "L", 1, 9.0)]);
        let r = rank_structure(&c, &MarketKey::new("P", "L", 1)).unwrap();
        assert_eq!(r.firms, vec!["c", "a", "b"]);
        assert_eq!(r.rank_of("b"), Some(3));
    }

    #[test]
    fn bounds_examples() {
        let b = nonstore_bounds(0.5, 0.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 0.5));
        let b = nonstore_bounds(0.7, 1.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
        let b = nonstore_bounds(0.5, 0.2).unwrap();
        assert!((b.lower - 0.32).abs() < 1e-12);
        assert!((b.upper - 0.36).abs() < 1e-12);
        assert!(nonstore_bounds(1.2, 0.1).is_err());
        assert!(nonstore_bounds(0.2, -0.1).is_err());
    }

    #[test]
    fn nonstore_shares_and_mixed_channels() {
        let bm = cube(&[("A", "L", 1, 80.0), ("B", "L", 1, 20.0)]);
        let ns = cube(&[("B", "US", 1, 25.0)]);
        let s = nonstore_shares(&bm, &ns, 1).unwrap();
        assert!((s["P"] - 0.2).abs() < 1e-12);
        assert_eq!(mixed_channel_firms(&bm, &ns), vec!["B".to_string()]);
        let idx = nonstore_bounds_index(&bm, 1, &s).unwrap();
        let direct = nonstore_bounds(0.68, 0.2).unwrap();
        assert!((idx.lower - direct.lower).abs() < 1e-12);
        assert!((idx.upper - direct.upper).abs() < 1e-12);
    }
}
