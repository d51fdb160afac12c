//! Law-of-total-probability decomposition of the national HHI.
//!
//! Two dollars drawn at random from a product's national sales land at the
//! same firm with probability
//!
//! ```text
//! national = collocation · local_conditional + (1 − collocation) · cross_market_conditional
//! ```
//!
//! where `collocation` is the probability both dollars are spent in the same
//! location. Each component is computed from its own closed form so the
//! recombination is a genuine check rather than a rearrangement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::view::{hhi_from_share_pairs, ProductView, YearView};
use crate::error::{Error, Result};
use crate::microdata::SalesCube;
use crate::numeric::{pairwise_dot, pairwise_sum};

pub const ALL_PRODUCTS: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Product key, or `"all"` for the sales-weighted aggregate.
    pub product: String,
    pub year: i32,
    /// P(ℓx = ℓy).
    pub collocation: f64,
    /// P(ix = iy | ℓx = ℓy).
    pub local_conditional: f64,
    /// P(ix = iy | ℓx ≠ ℓy); 0 when `degenerate`.
    pub cross_market_conditional: f64,
    pub national_hhi: f64,
    pub local_term: f64,
    pub cross_term: f64,
    /// All sales in a single location, so the cross-market conditional is undefined.
    pub degenerate: bool,
}

impl DecompositionReport {
    /// Share of the national HHI accounted for by the local term.
    pub fn local_share(&self) -> f64 {
        self.local_term / self.national_hhi
    }

    /// `national − (collocation·local + (1 − collocation)·cross)`.
    pub fn identity_residual(&self) -> f64 {
        self.national_hhi
            - (self.collocation * self.local_conditional
                + (1.0 - self.collocation) * self.cross_market_conditional)
    }
}

struct Components {
    collocation: f64,
    local_conditional: f64,
    /// None for single-location products.
    cross_market_conditional: Option<f64>,
    national_hhi: f64,
}

fn components(p: &ProductView<'_>) -> Components {
    let w = p.location_weights();
    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
    let collocation = pairwise_sum(&sq);
    let local_conditional = pairwise_dot(&sq, &p.local_hhis()) / collocation;

    let cross_market_conditional = if p.locations.len() < 2 {
        None
    } else {
        // Σ_i Σ_{ℓ≠n} a_iℓ a_in with a_iℓ = s_ℓ s_iℓ, per firm as (Σa)² − Σa²
        let mut pairs = p.national_share_pairs();
        pairs.sort_by_key(|x| x.0);
        let mut per_firm = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let firm = pairs[i].0;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            while i < pairs.len() && pairs[i].0 == firm {
                sum += pairs[i].1;
                sumsq += pairs[i].1 * pairs[i].1;
                i += 1;
            }
            per_firm.push(sum * sum - sumsq);
        }
        Some((pairwise_sum(&per_firm) / (1.0 - collocation)).clamp(0.0, 1.0))
    };

    Components {
        collocation,
        local_conditional,
        cross_market_conditional,
        national_hhi: hhi_from_share_pairs(p.national_share_pairs()),
    }
}

fn product_view<'v, 'a>(view: &'v YearView<'a>, cube: &SalesCube, product: &str, year: i32) -> Result<&'v ProductView<'a>> {
    cube.market_index(product)
        .and_then(|m| view.product(m))
        .ok_or_else(|| Error::NoMarket(format!("({product}, *, {year})")))
}

/// Σ_ℓ (s_ℓ^{jt})²: the HHI of the product's sales over locations.
pub fn collocation(cube: &SalesCube, product: &str, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    Ok(components(product_view(&view, cube, product, year)?).collocation)
}

/// Local HHIs weighted by (s_ℓ)² / Σ_n (s_n)².
pub fn local_conditional(cube: &SalesCube, product: &str, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    Ok(components(product_view(&view, cube, product, year)?).local_conditional)
}

/// Probability that two dollars spent in different locations go to the
/// same firm. Undefined when the product sells in a single location.
pub fn cross_market_conditional(cube: &SalesCube, product: &str, year: i32) -> Result<f64> {
    let view = YearView::new(cube, year)?;
    components(product_view(&view, cube, product, year)?)
        .cross_market_conditional
        .ok_or_else(|| Error::UndefinedConditional(format!("{product} sells in a single location in {year}")))
}

fn report_of(cube: &SalesCube, p: &ProductView<'_>, year: i32) -> DecompositionReport {
    let c = components(p);
    let cross = c.cross_market_conditional.unwrap_or(0.0);
    DecompositionReport {
        product: cube.market_key(p.market).to_owned(),
        year,
        collocation: c.collocation,
        local_conditional: c.local_conditional,
        cross_market_conditional: cross,
        national_hhi: c.national_hhi,
        local_term: c.collocation * c.local_conditional,
        cross_term: (1.0 - c.collocation) * cross,
        degenerate: c.cross_market_conditional.is_none(),
    }
}

/// Decomposition of one product, or of every product combined when
/// `product` is `None` (or `"all"`).
pub fn decompose_national(cube: &SalesCube, product: Option<&str>, year: i32) -> Result<DecompositionReport> {
    match product {
        Some(p) if p != ALL_PRODUCTS => {
            let view = YearView::new(cube, year)?;
            Ok(report_of(cube, product_view(&view, cube, p, year)?, year))
        }
        _ => {
            let (_, all) = decompose_all(cube, year)?;
            Ok(all)
        }
    }
}

/// Per-product reports plus their sales-weighted aggregate.
pub fn decompose_all(cube: &SalesCube, year: i32) -> Result<(Vec<DecompositionReport>, DecompositionReport)> {
    let view = YearView::new(cube, year)?;
    let reports: Vec<DecompositionReport> = view.products.par_iter().map(|p| report_of(cube, p, year)).collect();
    let weights = view.product_weights();
    let pick = |f: fn(&DecompositionReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };

    let collocation = pairwise_dot(&weights, &pick(|r| r.collocation));
    let local_term = pairwise_dot(&weights, &pick(|r| r.local_term));
    let cross_term = pairwise_dot(&weights, &pick(|r| r.cross_term));
    let national_hhi = pairwise_dot(&weights, &pick(|r| r.national_hhi));
    let degenerate = reports.iter().all(|r| r.degenerate);
    let all = DecompositionReport {
        product: ALL_PRODUCTS.to_owned(),
        year,
        collocation,
        local_conditional: local_term / collocation,
        cross_market_conditional: if degenerate { 0.0 } else { cross_term / (1.0 - collocation) },
        national_hhi,
        local_term,
        cross_term,
        degenerate,
    };
    Ok((reports, all))
}

/// Long-format CSV of decomposition reports.
pub fn reports_to_csv(reports: &[DecompositionReport]) -> String {
    let mut out = String::from(
        "product,year,collocation,local_conditional,cross_market_conditional,national_hhi,local_term,cross_term,degenerate\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.product,
            r.year,
            r.collocation,
            r.local_conditional,
            r.cross_market_conditional,
            r.national_hhi,
            r.local_term,
            r.cross_term,
            r.degenerate
        ));
    }
    out
}
