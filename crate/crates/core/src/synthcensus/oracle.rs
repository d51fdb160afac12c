use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::concentration::MarketKey;
use crate::error::{Error, Result};
use crate::microdata::{runs_by, Cell, SalesCube};

const PHASE_MC: u32 = 7;
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCondition {
    Any,
    SameLocation,
    CrossLocation,
}

impl PairCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairCondition::Any => "any",
            PairCondition::SameLocation => "same-location",
            PairCondition::CrossLocation => "cross-location",
        }
    }
}

impl FromStr for PairCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(PairCondition::Any),
            "same-location" | "same" => Ok(PairCondition::SameLocation),
            "cross-location" | "cross" => Ok(PairCondition::CrossLocation),
            _ => Err(Error::InvalidArgument(format!("unknown pair condition '{s}'"))),
        }
    }
}

/// Empirical frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Draws in the stratum the frequency is computed over.
    pub n: u64,
}

impl McEstimate {
    fn new(hits: u64, n: u64) -> Option<Self> {
        (n > 0).then(|| {
            let p = hits as f64 / n as f64;
            McEstimate {
                estimate: p,
                std_error: (p * (1.0 - p) / n as f64).sqrt(),
                n,
            }
        })
    }

    /// |estimate − value| ≤ k·σ, with slack for rounding in `value`.
    pub fn within(&self, value: f64, k_sigma: f64) -> bool {
        (self.estimate - value).abs() <= k_sigma * self.std_error + 1e-12
    }
}

/// Frequencies from one set of dollar-pair draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub draws: u64,
    /// Estimates the national HHI.
    pub same_firm: McEstimate,
    /// Estimates collocation.
    pub same_location: McEstimate,
    /// Estimates the local conditional term.
    pub same_firm_given_same_location: Option<McEstimate>,
    /// Estimates the cross-market conditional term.
    pub same_firm_given_cross_location: Option<McEstimate>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    same_firm: u64,
    same_loc: u64,
    same_firm_same_loc: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            same_firm: self.same_firm + o.same_firm,
            same_loc: self.same_loc + o.same_loc,
            same_firm_same_loc: self.same_firm_same_loc + o.same_firm_same_loc,
        }
    }
}

/// Sales-proportional sampler: the first dollar is drawn from all cells,
/// the second from cells of the same product.
struct Sampler<'a> {
    cells: &'a [Cell],
    cum: Vec<f64>,
    product_of: Vec<usize>,
    products: Vec<Range<usize>>,
}

impl<'a> Sampler<'a> {
    fn new(cells: &'a [Cell]) -> Self {
        let mut cum = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for c in cells {
            acc += c.sales;
            cum.push(acc);
        }
        let products = runs_by(cells, |c| c.market);
        let mut product_of = vec![0; cells.len()];
        for (p, r) in products.iter().enumerate() {
            product_of[r.clone()].fill(p);
        }
        Self {
            cells,
            cum,
            product_of,
            products,
        }
    }

    fn pick(&self, range: Range<usize>, u: f64) -> usize {
        let lo = if range.start == 0 { 0.0 } else { self.cum[range.start - 1] };
        let hi = self.cum[range.end - 1];
        let x = lo + u * (hi - lo);
        let i = range.start + self.cum[range.clone()].partition_point(|&c| c <= x);
        i.min(range.end - 1)
    }

    fn chunk(&self, seed: u64, chunk: u64, draws: u64) -> Counts {
        let mut rng = stream_rng(seed, PHASE_MC, chunk);
        let mut k = Counts::default();
        for _ in 0..draws {
            let a = self.pick(0..self.cells.len(), rng.random());
            let b = self.pick(self.products[self.product_of[a]].clone(), rng.random());
            let (a, b) = (&self.cells[a], &self.cells[b]);
            let firm = a.firm == b.firm;
            let loc = a.location == b.location;
            k.same_firm += firm as u64;
            k.same_loc += loc as u64;
            k.same_firm_same_loc += (firm && loc) as u64;
        }
        k
    }

    fn run(&self, samples: u64, seed: u64) -> Counts {
        let chunks = samples.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| self.chunk(seed, c, CHUNK.min(samples - c * CHUNK)))
            .reduce(Counts::default, |a, b| a + b)
    }
}

fn product_cells<'c>(cube: &'c SalesCube, product: Option<&str>, year: i32) -> Result<&'c [Cell]> {
    let cells = cube.year_cells(year)?;
    let cells = match product {
        None => cells,
        Some(p) => {
            let m = cube.market_index(p).ok_or_else(|| Error::NoMarket(format!("{p} in {year}")))?;
            let start = cells.partition_point(|c| c.market < m);
            let end = cells.partition_point(|c| c.market <= m);
            &cells[start..end]
        }
    };
    if cells.is_empty() {
        return Err(Error::NoMarket(format!("{} in {year}", product.unwrap_or("any product"))));
    }
    Ok(cells)
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    Ok(())
}

/// Draws `samples` dollar pairs within one product, or, with no product,
/// within a product chosen by its sales share.
pub fn mc_pair_statistics(cube: &SalesCube, product: Option<&str>, year: i32, samples: u64, seed: u64) -> Result<PairStatistics> {
    check_samples(samples)?;
    let k = Sampler::new(product_cells(cube, product, year)?).run(samples, seed);
    let cross = samples - k.same_loc;
    Ok(PairStatistics {
        draws: samples,
        same_firm: McEstimate::new(k.same_firm, samples).unwrap(),
        same_location: McEstimate::new(k.same_loc, samples).unwrap(),
        same_firm_given_same_location: McEstimate::new(k.same_firm_same_loc, k.same_loc),
        same_firm_given_cross_location: McEstimate::new(k.same_firm - k.same_firm_same_loc, cross),
    })
}

/// Probability that two sales-weighted random dollars go to the same firm.
pub fn mc_same_firm_probability(
    cube: &SalesCube,
    product: Option<&str>,
    year: i32,
    condition: PairCondition,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let s = mc_pair_statistics(cube, product, year, samples, seed)?;
    match condition {
        PairCondition::Any => Some(s.same_firm),
        PairCondition::SameLocation => s.same_firm_given_same_location,
        PairCondition::CrossLocation => s.same_firm_given_cross_location,
    }
    .ok_or_else(|| Error::UndefinedConditional(format!("no {} draws", condition.as_str())))
}

/// Estimates one local market's HHI.
pub fn mc_market_hhi(cube: &SalesCube, key: &MarketKey, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let cells = cube.market_cells(&key.market, &key.location, key.year)?;
    if cells.is_empty() {
        return Err(Error::NoMarket(key.to_string()));
    }
    let k = Sampler::new(cells).run(samples, seed);
    Ok(McEstimate::new(k.same_firm, samples).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microdata::{CubeEntry, Geography, MarketDefinition};

    fn worked() -> SalesCube {
        SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::CommutingZone,
            [
                CubeEntry::new("1", "P", "A", 1, 100.0),
                CubeEntry::new("1", "P", "B", 1, 50.0),
                CubeEntry::new("2", "P", "B", 1, 50.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn monopoly_is_exactly_one() {
        let c = SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::CommutingZone,
            [CubeEntry::new("m", "P", "A", 1, 3.0), CubeEntry::new("m", "P", "B", 1, 7.0)],
        )
        .unwrap();
        let e = mc_same_firm_probability(&c, None, 1, PairCondition::Any, 10_000, 5).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn worked_economy_within_four_sigma() {
        let s = mc_pair_statistics(&worked(), Some("P"), 1, 200_000, 9).unwrap();
        assert!(s.same_firm.within(0.625, 4.0));
        assert!(s.same_location.within(0.5, 4.0));
        assert!(s.same_firm_given_same_location.unwrap().within(0.75, 4.0));
        assert!(s.same_firm_given_cross_location.unwrap().within(0.5, 4.0));
    }

    #[test]
    fn deterministic_across_calls() {
        let a = mc_pair_statistics(&worked(), None, 1, 150_000, 3).unwrap();
        let b = mc_pair_statistics(&worked(), None, 1, 150_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_stratum_is_error() {
        let c = SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::CommutingZone,
            [CubeEntry::new("a", "P", "A", 1, 1.0), CubeEntry::new("b", "P", "A", 1, 1.0)],
        )
        .unwrap();
        assert!(matches!(
            mc_same_firm_probability(&c, None, 1, PairCondition::CrossLocation, 1000, 1),
            Err(Error::UndefinedConditional(_))
        ));
        let e = mc_market_hhi(&c, &MarketKey::new("P", "A", 1), 100_000, 1).unwrap();
        assert!(e.within(0.5, 4.0));
    }
}
