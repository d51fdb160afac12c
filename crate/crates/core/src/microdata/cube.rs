//! The firm × market × location × year sales aggregate.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use super::categories::csv_error;
use super::record::{Geography, MarketDefinition};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// One non-zero cube cell. Indices point into the cube's sorted dictionaries,
/// so index order equals string order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub year: u32,
    pub market: u32,
    pub location: u32,
    pub firm: u32,
    pub sales: f64,
}

/// A cube cell keyed by strings, used to construct or export cubes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CubeEntry {
    pub firm_id: String,
    pub market_key: String,
    pub location_id: String,
    pub year: i32,
    pub sales: f64,
}

impl CubeEntry {
    pub fn new(
        firm_id: impl Into<String>,
        market_key: impl Into<String>,
        location_id: impl Into<String>,
        year: i32,
        sales: f64,
    ) -> Self {
        Self {
            firm_id: firm_id.into(),
            market_key: market_key.into(),
            location_id: location_id.into(),
            year,
            sales,
        }
    }
}

/// Immutable sparse sales tensor.
///
/// Cells are unique per (year, market, location, firm), strictly positive,
/// and sorted by that key, so every market and every product-year is a
/// contiguous run.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesCube {
    definition: MarketDefinition,
    geography: Geography,
    firms: Vec<String>,
    markets: Vec<String>,
    locations: Vec<String>,
    years: Vec<i32>,
    cells: Vec<Cell>,
    year_offsets: Vec<usize>,
}

struct Interner<'a> {
    index: HashMap<&'a str, u32>,
    names: Vec<&'a str>,
}

impl<'a> Interner<'a> {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            names: Vec::new(),
        }
    }

    fn intern(&mut self, s: &'a str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.index.insert(s, i);
        self.names.push(s);
        i
    }

    /// Sorted dictionary plus old-index → new-index remap.
    fn finish(self) -> (Vec<String>, Vec<u32>) {
        let mut order: Vec<u32> = (0..self.names.len() as u32).collect();
        order.sort_by(|&a, &b| self.names[a as usize].cmp(self.names[b as usize]));
        let mut remap = vec![0u32; self.names.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let dict = order.iter().map(|&i| self.names[i as usize].to_owned()).collect();
        (dict, remap)
    }
}

impl SalesCube {
    /// Builds a cube from string-keyed entries. Duplicate keys are summed in
    /// input order; zero cells are dropped; negative or non-finite sales are
    /// rejected.
    pub fn from_entries<I>(definition: MarketDefinition, geography: Geography, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = CubeEntry>,
    {
        let entries: Vec<CubeEntry> = entries.into_iter().collect();
        let mut builder = CubeBuilder::new();
        for e in &entries {
            builder.push(&e.firm_id, &e.market_key, &e.location_id, e.year, e.sales)?;
        }
        Ok(builder.finish(definition, geography))
    }

    pub fn definition(&self) -> MarketDefinition {
        self.definition
    }

    pub fn geography(&self) -> Geography {
        self.geography
    }

    pub fn firms(&self) -> &[String] {
        &self.firms
    }

    pub fn markets(&self) -> &[String] {
        &self.markets
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn firm_id(&self, idx: u32) -> &str {
        &self.firms[idx as usize]
    }

    pub fn market_key(&self, idx: u32) -> &str {
        &self.markets[idx as usize]
    }

    pub fn location_id(&self, idx: u32) -> &str {
        &self.locations[idx as usize]
    }

    pub fn year_value(&self, idx: u32) -> i32 {
        self.years[idx as usize]
    }

    pub fn year_index(&self, year: i32) -> Result<u32> {
        self.years
            .binary_search(&year)
            .map(|i| i as u32)
            .map_err(|_| Error::YearAbsent(year))
    }

    pub fn market_index(&self, key: &str) -> Option<u32> {
        self.markets.binary_search_by(|m| m.as_str().cmp(key)).ok().map(|i| i as u32)
    }

    pub fn location_index(&self, id: &str) -> Option<u32> {
        self.locations.binary_search_by(|m| m.as_str().cmp(id)).ok().map(|i| i as u32)
    }

    pub fn firm_index(&self, id: &str) -> Option<u32> {
        self.firms.binary_search_by(|m| m.as_str().cmp(id)).ok().map(|i| i as u32)
    }

    pub fn year_cells(&self, year: i32) -> Result<&[Cell]> {
        let y = self.year_index(year)? as usize;
        Ok(&self.cells[self.year_offsets[y]..self.year_offsets[y + 1]])
    }

    /// Cells of a single (market, location, year), in firm order.
    pub fn market_cells(&self, market: &str, location: &str, year: i32) -> Result<&[Cell]> {
        let cells = self.year_cells(year)?;
        let (Some(m), Some(l)) = (self.market_index(market), self.location_index(location)) else {
            return Ok(&[]);
        };
        let lo = cells.partition_point(|c| (c.market, c.location) < (m, l));
        let hi = cells.partition_point(|c| (c.market, c.location) <= (m, l));
        Ok(&cells[lo..hi])
    }

    pub fn total_sales(&self) -> f64 {
        let v: Vec<f64> = self.cells.iter().map(|c| c.sales).collect();
        pairwise_sum(&v)
    }

    pub fn entries(&self) -> impl Iterator<Item = CubeEntry> + '_ {
        self.cells.iter().map(|c| CubeEntry {
            firm_id: self.firm_id(c.firm).to_owned(),
            market_key: self.market_key(c.market).to_owned(),
            location_id: self.location_id(c.location).to_owned(),
            year: self.year_value(c.year),
            sales: c.sales,
        })
    }

    /// Applies `f(market_key, year, sales)` to every cell.
    pub fn map_sales<F>(&self, mut f: F) -> Result<SalesCube>
    where
        F: FnMut(&str, i32, f64) -> Result<f64>,
    {
        let mut out = self.clone();
        for c in &mut out.cells {
            let v = f(&self.markets[c.market as usize], self.years[c.year as usize], c.sales)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("mapped sales {v} is not a non-negative number")));
            }
            c.sales = v;
        }
        out.cells.retain(|c| c.sales > 0.0);
        out.compact();
        Ok(out)
    }

    /// Keeps only the markets for which `keep` returns true.
    pub fn filter_markets<F: Fn(&str) -> bool>(&self, keep: F) -> SalesCube {
        let mut out = self.clone();
        out.cells.retain(|c| keep(&self.markets[c.market as usize]));
        out.compact();
        out
    }

    /// Re-keys locations through `crosswalk` (fine id → coarse id) and sums.
    pub fn reaggregate(&self, crosswalk: &HashMap<String, String>, target: Geography) -> Result<SalesCube> {
        let mut builder = CubeBuilder::new();
        for c in &self.cells {
            let fine = self.location_id(c.location);
            let coarse = crosswalk.get(fine).ok_or_else(|| {
                Error::Validation(format!("location '{fine}' missing from crosswalk"))
            })?;
            builder.push(
                self.firm_id(c.firm),
                self.market_key(c.market),
                coarse,
                self.year_value(c.year),
                c.sales,
            )?;
        }
        Ok(builder.finish(self.definition, target))
    }

    /// Sorted sparse CSV: `firm_id,market_key,location_id,year,sales`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut order: Vec<&Cell> = self.cells.iter().collect();
        order.sort_by_key(|c| (c.firm, c.market, c.location, c.year));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["firm_id", "market_key", "location_id", "year", "sales"])
            .map_err(csv_error)?;
        for c in order {
            w.write_record([
                self.firm_id(c.firm),
                self.market_key(c.market),
                self.location_id(c.location),
                &self.year_value(c.year).to_string(),
                &c.sales.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<cube writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(reader: R, definition: MarketDefinition, geography: Geography) -> Result<SalesCube> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(csv_error)?;
            let line = row.position().map_or(0, |p| p.line());
            let get = |i: usize| {
                row.get(i).ok_or_else(|| Error::Parse {
                    line,
                    message: "expected 5 fields".into(),
                })
            };
            let year = get(3)?.parse::<i32>().map_err(|_| Error::Parse {
                line,
                message: "bad year".into(),
            })?;
            let sales = get(4)?.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: "bad sales".into(),
            })?;
            entries.push(CubeEntry::new(get(0)?, get(1)?, get(2)?, year, sales));
        }
        SalesCube::from_entries(definition, geography, entries)
    }

    /// Drops dictionary entries no longer referenced by any cell.
    fn compact(&mut self) {
        fn shrink(dict: &mut Vec<String>, used: &[bool]) -> Vec<u32> {
            let mut remap = vec![u32::MAX; dict.len()];
            let mut next = 0u32;
            let mut kept = Vec::new();
            for (i, name) in dict.drain(..).enumerate() {
                if used[i] {
                    remap[i] = next;
                    next += 1;
                    kept.push(name);
                }
            }
            *dict = kept;
            remap
        }
        let mut firms = vec![false; self.firms.len()];
        let mut markets = vec![false; self.markets.len()];
        let mut locations = vec![false; self.locations.len()];
        let mut years = vec![false; self.years.len()];
        for c in &self.cells {
            firms[c.firm as usize] = true;
            markets[c.market as usize] = true;
            locations[c.location as usize] = true;
            years[c.year as usize] = true;
        }
        let fr = shrink(&mut self.firms, &firms);
        let mr = shrink(&mut self.markets, &markets);
        let lr = shrink(&mut self.locations, &locations);
        let mut yr = vec![u32::MAX; self.years.len()];
        let mut kept = Vec::new();
        for (i, &y) in self.years.iter().enumerate() {
            if years[i] {
                yr[i] = kept.len() as u32;
                kept.push(y);
            }
        }
        self.years = kept;
        for c in &mut self.cells {
            c.firm = fr[c.firm as usize];
            c.market = mr[c.market as usize];
            c.location = lr[c.location as usize];
            c.year = yr[c.year as usize];
        }
        self.year_offsets = year_offsets(&self.cells, self.years.len());
    }
}

fn year_offsets(cells: &[Cell], years: usize) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(years + 1);
    for y in 0..=years as u32 {
        offsets.push(cells.partition_point(|c| c.year < y));
    }
    offsets
}

/// Accumulates string-keyed sales into a cube. Duplicate keys are summed in
/// push order, which keeps construction deterministic.
pub(crate) struct CubeBuilder<'a> {
    firms: Interner<'a>,
    markets: Interner<'a>,
    locations: Interner<'a>,
    years: BTreeMap<i32, u32>,
    raw: Vec<(u32, u32, u32, i32, f64)>,
}

impl<'a> CubeBuilder<'a> {
    pub(crate) fn new() -> Self {
        Self {
            firms: Interner::new(),
            markets: Interner::new(),
            locations: Interner::new(),
            years: BTreeMap::new(),
            raw: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, firm: &'a str, market: &'a str, location: &'a str, year: i32, sales: f64) -> Result<()> {
        if !sales.is_finite() || sales < 0.0 {
            return Err(Error::Validation(format!(
                "sales {sales} for ({firm}, {market}, {location}, {year}) is not a non-negative number"
            )));
        }
        let f = self.firms.intern(firm);
        let m = self.markets.intern(market);
        let l = self.locations.intern(location);
        self.years.insert(year, 0);
        self.raw.push((f, m, l, year, sales));
        Ok(())
    }

    pub(crate) fn finish(self, definition: MarketDefinition, geography: Geography) -> SalesCube {
        let (firms, fr) = self.firms.finish();
        let (markets, mr) = self.markets.finish();
        let (locations, lr) = self.locations.finish();
        let years: Vec<i32> = self.years.keys().copied().collect();
        let year_idx: HashMap<i32, u32> = years.iter().enumerate().map(|(i, &y)| (y, i as u32)).collect();

        let mut keyed: Vec<Cell> = self
            .raw
            .into_iter()
            .map(|(f, m, l, y, sales)| Cell {
                year: year_idx[&y],
                market: mr[m as usize],
                location: lr[l as usize],
                firm: fr[f as usize],
                sales,
            })
            .collect();
        // stable: equal keys stay in push order
        keyed.sort_by_key(|c| (c.year, c.market, c.location, c.firm));

        let mut cells: Vec<Cell> = Vec::with_capacity(keyed.len());
        for c in keyed {
            match cells.last_mut() {
                Some(last) if (last.year, last.market, last.location, last.firm) == (c.year, c.market, c.location, c.firm) => {
                    last.sales += c.sales;
                }
                _ => cells.push(c),
            }
        }
        cells.retain(|c| c.sales > 0.0);

        let mut cube = SalesCube {
            definition,
            geography,
            firms,
            markets,
            locations,
            years,
            year_offsets: Vec::new(),
            cells,
        };
        cube.compact();
        cube
    }
}

/// Contiguous index ranges of `cells` sharing the key returned by `key`.
pub(crate) fn runs_by<K: PartialEq>(cells: &[Cell], key: impl Fn(&Cell) -> K) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=cells.len() {
        if i == cells.len() || key(&cells[i]) != key(&cells[start]) {
            if start < cells.len() {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(entries: Vec<CubeEntry>) -> SalesCube {
        SalesCube::from_entries(MarketDefinition::Product, Geography::CommutingZone, entries).unwrap()
    }

    #[test]
    fn duplicates_summed_zeros_dropped() {
        let c = cube(vec![
            CubeEntry::new("b", "Toys", "L1", 1992, 10.0),
            CubeEntry::new("a", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("b", "Toys", "L1", 1992, 2.5),
            CubeEntry::new("z", "Toys", "L1", 1992, 0.0),
        ]);
        assert_eq!(c.firms(), &["a".to_string(), "b".to_string()]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.cells()[1].sales, 12.5);
    }

    #[test]
    fn negative_sales_rejected() {
        let err = SalesCube::from_entries(
            MarketDefinition::Product,
            Geography::Zip,
            vec![CubeEntry::new("a", "m", "l", 1, -1.0)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn csv_is_sorted_and_round_trips() {
        let c = cube(vec![
            CubeEntry::new("b", "Toys", "L2", 1997, 1.5),
            CubeEntry::new("a", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("a", "Clothing", "L1", 1997, 0.1),
        ]);
        let text = c.to_csv_string().unwrap();
        assert_eq!(
            text,
            "firm_id,market_key,location_id,year,sales\n\
             a,Clothing,L1,1997,0.1\n\
             a,Toys,L1,1992,5\n\
             b,Toys,L2,1997,1.5\n"
        );
        let back = SalesCube::read_csv(text.as_bytes(), c.definition(), c.geography()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn year_and_market_lookup() {
        let c = cube(vec![
            CubeEntry::new("a", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("b", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("a", "Toys", "L2", 1992, 1.0),
            CubeEntry::new("a", "Toys", "L1", 1997, 1.0),
        ]);
        assert_eq!(c.year_cells(1992).unwrap().len(), 3);
        assert_eq!(c.market_cells("Toys", "L1", 1992).unwrap().len(), 2);
        assert!(c.market_cells("Toys", "L9", 1992).unwrap().is_empty());
        assert!(matches!(c.year_cells(2002), Err(Error::YearAbsent(2002))));
    }

    #[test]
    fn filter_compacts_dictionaries() {
        let c = cube(vec![
            CubeEntry::new("a", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("b", "Fuel", "L2", 1997, 5.0),
        ]);
        let f = c.filter_markets(|m| m != "Fuel");
        assert_eq!(f.markets(), &["Toys".to_string()]);
        assert_eq!(f.years(), &[1992]);
        assert_eq!(f.locations(), &["L1".to_string()]);
    }

    #[test]
    fn runs_group_contiguous_keys() {
        let c = cube(vec![
            CubeEntry::new("a", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("b", "Toys", "L1", 1992, 5.0),
            CubeEntry::new("a", "Toys", "L2", 1992, 1.0),
        ]);
        let runs = runs_by(c.cells(), |c| c.location);
        assert_eq!(runs, vec![0..2, 2..3]);
        assert!(runs_by(&[], |c| c.location).is_empty());
    }
}
