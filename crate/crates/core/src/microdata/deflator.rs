use std::collections::BTreeMap;
use std::io::Read;

use super::categories::csv_error;
use super::cube::SalesCube;
use crate::error::{Error, Result};

/// Price deflators per (market key, year); base year = 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeflatorSeries {
    values: BTreeMap<(String, i32), f64>,
}

impl DeflatorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, market: impl Into<String>, year: i32, deflator: f64) -> Result<()> {
        let market = market.into();
        if !(deflator.is_finite() && deflator > 0.0) {
            return Err(Error::Validation(format!(
                "deflator for ({market}, {year}) must be strictly positive, got {deflator}"
            )));
        }
        self.values.insert((market, year), deflator);
        Ok(())
    }

    pub fn get(&self, market: &str, year: i32) -> Option<f64> {
        self.values.get(&(market.to_owned(), year)).copied()
    }

    /// Reads `market_key,year,deflator` rows (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut out = Self::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in rdr.records() {
            let row = row.map_err(csv_error)?;
            let line = row.position().map_or(0, |p| p.line());
            let parse_err = |what: &str| Error::Parse {
                line,
                message: format!("bad {what}"),
            };
            let market = row.get(0).ok_or_else(|| parse_err("market_key"))?;
            let year = row
                .get(1)
                .and_then(|v| v.parse::<i32>().ok())
                .ok_or_else(|| parse_err("year"))?;
            let d = row
                .get(2)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| parse_err("deflator"))?;
            out.insert(market, year, d)?;
        }
        Ok(out)
    }
}

/// Divides every cell by its (market, year) deflator.
pub fn deflate_sales(cube: &SalesCube, deflators: &DeflatorSeries) -> Result<SalesCube> {
    cube.map_sales(|market, year, sales| {
        let d = deflators.get(market, year).ok_or_else(|| Error::MissingDeflator {
            market: market.to_owned(),
            year,
        })?;
        Ok(sales / d)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microdata::{CubeEntry, Geography, MarketDefinition};

    fn cube() -> SalesCube {
        SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::Zip,
            vec![
                CubeEntry::new("a", "Toys", "z", 1992, 200.0),
                CubeEntry::new("a", "Clothing", "z", 1992, 30.0),
                CubeEntry::new("b", "Toys", "z", 1997, 90.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn unit_deflators_are_identity() {
        let mut d = DeflatorSeries::new();
        for (m, y) in [("Toys", 1992), ("Clothing", 1992), ("Toys", 1997)] {
            d.insert(m, y, 1.0).unwrap();
        }
        assert_eq!(deflate_sales(&cube(), &d).unwrap(), cube());
    }

    #[test]
    fn divides_per_cell() {
        let d = DeflatorSeries::from_csv("market_key,year,deflator\nToys,1992,2\nClothing,1992,1.5\nToys,1997,3\n".as_bytes()).unwrap();
        let out = deflate_sales(&cube(), &d).unwrap();
        // independent per-cell oracle
        for (orig, new) in cube().entries().zip(out.entries()) {
            let expect = orig.sales / d.get(&orig.market_key, orig.year).unwrap();
            assert_eq!(new.sales, expect);
        }
        assert_eq!(out.market_cells("Toys", "z", 1992).unwrap()[0].sales, 100.0);
    }

    #[test]
    fn missing_cell_named() {
        let mut d = DeflatorSeries::new();
        d.insert("Toys", 1992, 1.0).unwrap();
        match deflate_sales(&cube(), &d) {
            Err(Error::MissingDeflator { market, year }) => assert_eq!((market.as_str(), year), ("Clothing", 1992)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_rejected() {
        assert!(DeflatorSeries::new().insert("Toys", 1992, 0.0).is_err());
    }
}
