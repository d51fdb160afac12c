use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microdata::SalesCube;
use crate::numeric::{pairwise_sum, pairwise_sum_sq};

/// A (product or industry, location, year) market.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarketKey {
    pub market: String,
    pub location: String,
    pub year: i32,
}

impl MarketKey {
    pub fn new(market: impl Into<String>, location: impl Into<String>, year: i32) -> Self {
        Self {
            market: market.into(),
            location: location.into(),
            year,
        }
    }
}

impl fmt::Display for MarketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.market, self.location, self.year)
    }
}

/// Normalised firm shares of one market, in firm-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShares {
    key: MarketKey,
    shares: Vec<(String, f64)>,
}

impl MarketShares {
    /// Normalises firm sales into shares. Zero-sales firms are dropped.
    pub fn from_sales<I, S>(key: MarketKey, sales: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut rows: Vec<(String, f64)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (firm, s) in sales {
            let firm = firm.into();
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Validation(format!("firm {firm} has invalid sales {s} in {key}")));
            }
            if !seen.insert(firm.clone()) {
                return Err(Error::Validation(format!("duplicate firm {firm} in {key}")));
            }
            if s > 0.0 {
                rows.push((firm, s));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let total = pairwise_sum(&values);
        if rows.is_empty() || total <= 0.0 {
            return Err(Error::NoMarket(key.to_string()));
        }
        for r in &mut rows {
            r.1 /= total;
        }
        Ok(Self { key, shares: rows })
    }

    pub fn key(&self) -> &MarketKey {
        &self.key
    }

    pub fn shares(&self) -> &[(String, f64)] {
        &self.shares
    }

    pub fn share_of(&self, firm: &str) -> f64 {
        self.shares
            .binary_search_by(|(f, _)| f.as_str().cmp(firm))
            .map_or(0.0, |i| self.shares[i].1)
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

/// Firm shares of `key` in `cube`.
pub fn market_shares(cube: &SalesCube, key: &MarketKey) -> Result<MarketShares> {
    let cells = cube.market_cells(&key.market, &key.location, key.year)?;
    if cells.is_empty() {
        return Err(Error::NoMarket(key.to_string()));
    }
    MarketShares::from_sales(key.clone(), cells.iter().map(|c| (cube.firm_id(c.firm), c.sales)))
}

/// Sum of squared shares: the probability that two dollars drawn at random
/// from the market are spent at the same firm.
pub fn hhi(shares: &MarketShares) -> f64 {
    let v: Vec<f64> = shares.shares.iter().map(|s| s.1).collect();
    pairwise_sum_sq(&v)
}

/// Combined share of the `n` largest firms (ties at the cutoff ordered by
/// firm id, which cannot change the sum).
pub fn top_n_share(shares: &MarketShares, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("top-n requires n >= 1".into()));
    }
    let mut ranked: Vec<&(String, f64)> = shares.shares.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top: Vec<f64> = ranked.iter().take(n).map(|s| s.1).collect();
    Ok(pairwise_sum(&top).min(1.0))
}
