//! Grouped views over one year of a cube, shared by every metric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::microdata::{runs_by, Cell, SalesCube};
use crate::numeric::{pairwise_sum, pairwise_sum_sq};

/// One (product, location, year) market.
#[derive(Debug, Clone)]
pub(crate) struct LocalMarket<'a> {
    pub location: u32,
    pub cells: &'a [Cell],
    pub total: f64,
}

impl<'a> LocalMarket<'a> {
    fn new(cells: &'a [Cell]) -> Self {
        let sales: Vec<f64> = cells.iter().map(|c| c.sales).collect();
        Self {
            location: cells[0].location,
            cells,
            total: pairwise_sum(&sales),
        }
    }

    /// Firm shares in firm order.
    pub fn shares(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.sales / self.total).collect()
    }

    pub fn hhi(&self) -> f64 {
        pairwise_sum_sq(&self.shares())
    }

    /// Shares sorted by (share desc, firm asc), paired with firm index.
    pub fn ranked(&self) -> Vec<(u32, f64)> {
        let mut v: Vec<(u32, f64)> = self.cells.iter().map(|c| (c.firm, c.sales / self.total)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// All local markets of one product in one year, in location order.
#[derive(Debug, Clone)]
pub(crate) struct ProductView<'a> {
    pub market: u32,
    pub locations: Vec<LocalMarket<'a>>,
    pub total: f64,
}

impl<'a> ProductView<'a> {
    fn new(cells: &'a [Cell]) -> Self {
        let locations: Vec<LocalMarket<'a>> = runs_by(cells, |c| c.location)
            .into_iter()
            .map(|r| LocalMarket::new(&cells[r]))
            .collect();
        let totals: Vec<f64> = locations.iter().map(|l| l.total).collect();
        Self {
            market: cells[0].market,
            total: pairwise_sum(&totals),
            locations,
        }
    }

    /// s_ℓ: each location's share of the product's national sales.
    pub fn location_weights(&self) -> Vec<f64> {
        self.locations.iter().map(|l| l.total / self.total).collect()
    }

    pub fn local_hhis(&self) -> Vec<f64> {
        self.locations.iter().map(LocalMarket::hhi).collect()
    }

    /// (firm, s_ℓ · s_iℓ) pairs in location order: every firm's contribution
    /// to its national share of the product.
    pub fn national_share_pairs(&self) -> Vec<(u64, f64)> {
        let mut pairs = Vec::new();
        for l in &self.locations {
            let w = l.total / self.total;
            for c in l.cells {
                pairs.push((c.firm as u64, w * (c.sales / l.total)));
            }
        }
        pairs
    }

    pub fn national_hhi(&self) -> f64 {
        hhi_from_share_pairs(self.national_share_pairs())
    }
}

/// Every product of one year.
#[derive(Debug, Clone)]
pub(crate) struct YearView<'a> {
    pub products: Vec<ProductView<'a>>,
    pub total: f64,
}

impl<'a> YearView<'a> {
    pub fn new(cube: &'a SalesCube, year: i32) -> Result<Self> {
        let cells = cube.year_cells(year)?;
        if cells.is_empty() {
            return Err(Error::YearAbsent(year));
        }
        let runs = runs_by(cells, |c| c.market);
        let products: Vec<ProductView<'a>> = runs
            .into_par_iter()
            .map(|r| ProductView::new(&cells[r]))
            .collect();
        let totals: Vec<f64> = products.iter().map(|p| p.total).collect();
        Ok(Self {
            total: pairwise_sum(&totals),
            products,
        })
    }

    /// s_j: each product's share of the year's total sales.
    pub fn product_weights(&self) -> Vec<f64> {
        self.products.iter().map(|p| p.total / self.total).collect()
    }

    pub fn product(&self, market: u32) -> Option<&ProductView<'a>> {
        self.products
            .binary_search_by_key(&market, |p| p.market)
            .ok()
            .map(|i| &self.products[i])
    }
}

/// Key offset for firms that exist only in counterfactual relabelings.
pub(crate) const SYNTHETIC_FIRM_BASE: u64 = 1 << 32;

/// HHI of national shares given (firm key, partial share) pairs.
///
/// Pairs are stably sorted by key, partial shares summed in their original
/// order, and squares reduced pairwise in key order. Every national HHI in
/// the crate goes through here, so identical inputs reproduce bit-for-bit.
pub(crate) fn hhi_from_share_pairs(mut pairs: Vec<(u64, f64)>) -> f64 {
    pairs.sort_by_key(|p| p.0);
    let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut last: Option<u64> = None;
    for (k, v) in pairs {
        if last == Some(k) {
            *merged.last_mut().expect("non-empty") += v;
        } else {
            merged.push(v);
            last = Some(k);
        }
    }
    pairwise_sum_sq(&merged)
}
