//! Cournot and CES markup formulas.
//!
//! Margins are gross ratios (revenue over cost of goods sold, so ≥ 1).
//! Percentage points in reports are `(μ − 1) · 100`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concentration::product_concentration;
use crate::error::{Error, Result};
use crate::microdata::SalesCube;
use crate::numeric::{pairwise_dot, pairwise_sum};

/// Elasticities above this are reported capped; the raw value is kept.
pub const ELASTICITY_CAP: f64 = 1e4;

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

fn check_elasticity(eps: f64) -> Result<()> {
    if !(eps > 1.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("elasticity {eps} must exceed 1")));
    }
    Ok(())
}

/// Homogeneous-good Cournot margin `[1 − H/ε]⁻¹`.
pub fn cournot_margin(h: f64, eps: f64) -> Result<f64> {
    check_fraction("HHI", h)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("elasticity {eps} must be positive")));
    }
    let x = h / eps;
    if x >= 1.0 {
        return Err(Error::Singularity(format!("HHI/ε = {x} ≥ 1")));
    }
    Ok(1.0 / (1.0 - x))
}

/// CES product markup `ε/(ε−1) · (1 − H̄)⁻¹`.
pub fn ces_product_markup(hbar: f64, eps: f64) -> Result<f64> {
    check_elasticity(eps)?;
    check_fraction("H̄", hbar)?;
    if hbar >= 1.0 {
        return Err(Error::Singularity("H̄ = 1".into()));
    }
    Ok(eps / (eps - 1.0) / (1.0 - hbar))
}

/// Elasticity implied by a margin and mean local HHI.
pub fn invert_elasticity(mu: f64, hbar: f64) -> Result<f64> {
    check_fraction("H̄", hbar)?;
    let m = mu * (1.0 - hbar);
    if !(m > 1.0) {
        return Err(Error::Infeasible(format!("μ(1 − H̄) = {m} ≤ 1 admits no elasticity above 1")));
    }
    Ok(m / (m - 1.0))
}

/// λ such that `μ_GM = λ Σ ω_j μ_k(j)`.
pub fn gm_scaling(mu_gm: f64, weights: &[f64], margins: &[f64]) -> Result<f64> {
    if weights.len() != margins.len() {
        return Err(Error::InvalidArgument("weights and margins differ in length".into()));
    }
    if (pairwise_sum(weights) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("general-merchandise weights must sum to 1".into()));
    }
    let denom = pairwise_dot(weights, margins);
    if denom == 0.0 {
        return Err(Error::Singularity("weighted industry margin is zero".into()));
    }
    Ok(mu_gm / denom)
}

/// Harmonic blend of an industry margin and a general-merchandiser margin.
pub fn product_margin_blend(omega_gm: f64, mu_k: f64, mu_gm: f64) -> Result<f64> {
    check_fraction("ω_GM", omega_gm)?;
    if !(mu_k > 0.0 && mu_gm > 0.0) {
        return Err(Error::InvalidArgument("margins must be positive".into()));
    }
    Ok(1.0 / ((1.0 - omega_gm) / mu_k + omega_gm / mu_gm))
}

/// Sales-weighted harmonic mean of product margins.
pub fn aggregate_retail_markup(margins: &[f64], weights: &[f64]) -> Result<f64> {
    if margins.len() != weights.len() || margins.is_empty() {
        return Err(Error::InvalidArgument("margins and weights must be non-empty and equal length".into()));
    }
    if (pairwise_sum(weights) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("product weights must sum to 1".into()));
    }
    let inv: Vec<f64> = margins.iter().map(|m| 1.0 / m).collect();
    Ok(1.0 / pairwise_dot(weights, &inv))
}

/// Change in the CES markup from `hbar_t0` to `hbar_t1` at fixed ε.
pub fn implied_markup_change(hbar_t0: f64, hbar_t1: f64, eps: f64) -> Result<f64> {
    Ok(ces_product_markup(hbar_t1, eps)? - ces_product_markup(hbar_t0, eps)?)
}

/// Bertrand markup of a firm with share `s`.
pub fn bertrand_markup(s: f64, eps: f64) -> Result<f64> {
    check_elasticity(eps)?;
    check_fraction("share", s)?;
    if s >= 1.0 {
        return Err(Error::Singularity("share = 1".into()));
    }
    Ok((eps - (eps - 1.0) * s) / ((eps - 1.0) * (1.0 - s)))
}

fn output_weights(shares: &[f64], outputs: &[f64]) -> Result<Vec<f64>> {
    if shares.len() != outputs.len() || shares.is_empty() {
        return Err(Error::InvalidArgument("shares and outputs must be non-empty and equal length".into()));
    }
    if outputs.iter().any(|y| !(*y > 0.0)) {
        return Err(Error::InvalidArgument("outputs must be positive".into()));
    }
    let total = pairwise_sum(outputs);
    Ok(outputs.iter().map(|y| y / total).collect())
}

/// Markup of a firm charging one price across its markets: the Bertrand
/// markup at the output-weighted mean share.
pub fn uniform_price_markup(shares: &[f64], outputs: &[f64], eps: f64) -> Result<f64> {
    let w = output_weights(shares, outputs)?;
    for &s in shares {
        check_fraction("share", s)?;
    }
    bertrand_markup(pairwise_dot(&w, shares).min(1.0), eps)
}

/// Output-weighted mean of the firm's market-by-market Bertrand markups.
pub fn average_firm_markup(shares: &[f64], outputs: &[f64], eps: f64) -> Result<f64> {
    let w = output_weights(shares, outputs)?;
    let m: Vec<f64> = shares.iter().map(|&s| bertrand_markup(s, eps)).collect::<Result<_>>()?;
    Ok(pairwise_dot(&w, &m))
}

/// Cournot-CES markup of a single firm with share `s`.
pub fn firm_markup(s: f64, eps: f64) -> Result<f64> {
    ces_product_markup(s, eps)
}

/// Sales-weighted harmonic mean of firm markups within one market.
pub fn market_average_markup(shares: &[f64], eps: f64) -> Result<f64> {
    let inv: Vec<f64> = shares.iter().map(|&s| firm_markup(s, eps).map(|m| 1.0 / m)).collect::<Result<_>>()?;
    Ok(1.0 / pairwise_dot(shares, &inv))
}

/// One observed margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginObservation {
    pub product: String,
    pub year: i32,
    pub margin: f64,
}

/// Reads `product_or_industry,year,margin_ratio` rows.
pub fn read_margins<R: Read>(reader: R) -> Result<Vec<MarginObservation>> {
    #[derive(Deserialize)]
    struct Row {
        product_or_industry: String,
        year: i32,
        margin_ratio: f64,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(crate::microdata::csv_error)?;
        if !(row.margin_ratio >= 1.0) {
            return Err(Error::Validation(format!(
                "margin {} for {} in {} is below 1",
                row.margin_ratio, row.product_or_industry, row.year
            )));
        }
        out.push(MarginObservation {
            product: row.product_or_industry,
            year: row.year,
            margin: row.margin_ratio,
        });
    }
    Ok(out)
}

pub fn load_margins(path: &Path) -> Result<Vec<MarginObservation>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_margins(f)
}

/// Fitted elasticity for one product and year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityFit {
    pub mu: f64,
    pub hbar: f64,
    /// Capped at [`ELASTICITY_CAP`].
    pub eps: f64,
    pub eps_raw: f64,
    pub near_singular: bool,
    /// Product's share of the year's sales.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMarkups {
    pub by_year: BTreeMap<i32, ElasticityFit>,
    /// CES markup change from the first to the last fitted year at the
    /// first year's elasticity.
    pub implied_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkupModel {
    pub products: BTreeMap<String, ProductMarkups>,
    /// Retail aggregate of the observed margins by year.
    pub retail_markup: BTreeMap<i32, f64>,
    /// Retail aggregate at the last year's H̄ and the first year's ε,
    /// minus the first year's aggregate.
    pub retail_implied_change: Option<f64>,
}

impl MarkupModel {
    /// Inverts each observed margin against the cube's mean local HHI for
    /// the same product and year. Observations for products or years
    /// missing from the cube are an error.
    pub fn fit(cube: &SalesCube, margins: &[MarginObservation]) -> Result<Self> {
        let mut conc: BTreeMap<i32, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
        let mut products: BTreeMap<String, ProductMarkups> = BTreeMap::new();
        for obs in margins {
            if !conc.contains_key(&obs.year) {
                let c = product_concentration(cube, obs.year)?
                    .into_iter()
                    .map(|p| (p.product, (p.weight, p.local_hhi)))
                    .collect();
                conc.insert(obs.year, c);
            }
            let &(weight, hbar) = conc[&obs.year]
                .get(&obs.product)
                .ok_or_else(|| Error::NoMarket(format!("{} in {}", obs.product, obs.year)))?;
            let eps_raw = invert_elasticity(obs.margin, hbar)?;
            let near_singular = eps_raw > ELASTICITY_CAP;
            let fit = ElasticityFit {
                mu: obs.margin,
                hbar,
                eps: eps_raw.min(ELASTICITY_CAP),
                eps_raw,
                near_singular,
                weight,
            };
            let entry = products.entry(obs.product.clone()).or_insert_with(|| ProductMarkups {
                by_year: BTreeMap::new(),
                implied_change: None,
            });
            if entry.by_year.insert(obs.year, fit).is_some() {
                return Err(Error::Validation(format!("duplicate margin for {} in {}", obs.product, obs.year)));
            }
        }
        for p in products.values_mut() {
            let first = p.by_year.values().next().unwrap();
            let last = p.by_year.values().next_back().unwrap();
            if p.by_year.len() > 1 {
                p.implied_change = Some(implied_markup_change(first.hbar, last.hbar, first.eps_raw)?);
            }
        }

        let mut retail_markup = BTreeMap::new();
        let years: Vec<i32> = conc.keys().copied().collect();
        for &y in &years {
            let (m, w): (Vec<f64>, Vec<f64>) = products
                .values()
                .filter_map(|p| p.by_year.get(&y))
                .map(|f| (f.mu, f.weight))
                .unzip();
            retail_markup.insert(y, harmonic_renormalised(&m, &w));
        }
        let retail_implied_change = match (years.first(), years.last()) {
            (Some(&y0), Some(&y1)) if y0 != y1 => {
                let mut m = Vec::new();
                let mut w = Vec::new();
                for p in products.values() {
                    if let (Some(a), Some(b)) = (p.by_year.get(&y0), p.by_year.get(&y1)) {
                        m.push(ces_product_markup(b.hbar, a.eps_raw)?);
                        w.push(b.weight);
                    }
                }
                let mut base_m = Vec::new();
                let mut base_w = Vec::new();
                for p in products.values() {
                    if let (Some(a), Some(_)) = (p.by_year.get(&y0), p.by_year.get(&y1)) {
                        base_m.push(a.mu);
                        base_w.push(a.weight);
                    }
                }
                (!m.is_empty()).then(|| harmonic_renormalised(&m, &w) - harmonic_renormalised(&base_m, &base_w))
            }
            _ => None,
        };
        Ok(MarkupModel {
            products,
            retail_markup,
            retail_implied_change,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn harmonic_renormalised(margins: &[f64], weights: &[f64]) -> f64 {
    let total = pairwise_sum(weights);
    let inv: Vec<f64> = margins.iter().map(|m| 1.0 / m).collect();
    total / pairwise_dot(weights, &inv)
}
