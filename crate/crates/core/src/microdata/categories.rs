use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A product category that store sales are aggregated into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    /// Included in headline concentration calculations.
    pub main: bool,
    /// Three-digit NAICS subsector most closely tied to the category, when any.
    pub industry: Option<String>,
}

/// Retail product categories. The eight main categories carry `main = true`.
const RETAIL_CATEGORIES: &[(&str, bool, Option<&str>)] = &[
    ("Automotive Goods", false, Some("441")),
    ("Clothing", true, Some("448")),
    ("Electronics and Appliances", true, Some("443")),
    ("Furniture", true, Some("442")),
    ("Services", false, None),
    ("Other Retail Goods", false, None),
    ("Groceries", true, Some("445")),
    ("Health Products", true, Some("446")),
    ("Fuel", false, Some("447")),
    ("Sporting Goods", true, Some("451")),
    ("Toys", true, Some("451")),
    ("Home & Garden", true, Some("444")),
    ("Paper Products", false, Some("453210")),
    ("Jewelry", false, Some("423940")),
    ("Luggage", false, Some("448320")),
    ("Optical Goods", false, Some("446130")),
    ("Non-Retail Goods", false, None),
    ("Books", false, Some("451211")),
];

pub const MISC_CATEGORY: &str = "Other Retail Goods";

/// Maps reported product-line codes onto categories.
///
/// Codes not present in the map are routed to the miscellaneous category.
/// Exclusions (fuel, automotive, non-retail lines) are configuration: an
/// excluded category still absorbs its share of a store's sales but is left
/// out of the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCategoryMap {
    categories: Vec<Category>,
    lines: HashMap<String, String>,
    misc: String,
    excluded: BTreeSet<String>,
}

impl ProductCategoryMap {
    /// The 18 retail categories, no line codes registered, nothing excluded.
    pub fn retail_default() -> Self {
        let categories = RETAIL_CATEGORIES
            .iter()
            .map(|&(id, main, industry)| Category {
                id: id.to_owned(),
                main,
                industry: industry.map(str::to_owned),
            })
            .collect();
        Self {
            categories,
            lines: HashMap::new(),
            misc: MISC_CATEGORY.to_owned(),
            excluded: BTreeSet::new(),
        }
    }

    /// Empty map with a custom miscellaneous category.
    pub fn empty(misc: impl Into<String>) -> Self {
        let misc = misc.into();
        Self {
            categories: vec![Category {
                id: misc.clone(),
                main: false,
                industry: None,
            }],
            lines: HashMap::new(),
            misc,
            excluded: BTreeSet::new(),
        }
    }

    /// Registers `code → category`, adding the category (non-main) if unseen.
    /// A code can only map to one category.
    pub fn add_line(&mut self, code: impl Into<String>, category: impl Into<String>) -> Result<()> {
        let code = code.into();
        let category = category.into();
        if let Some(existing) = self.lines.get(&code) {
            if *existing != category {
                return Err(Error::Validation(format!(
                    "line code {code} mapped to both '{existing}' and '{category}'"
                )));
            }
            return Ok(());
        }
        if self.category(&category).is_none() {
            self.categories.push(Category {
                id: category.clone(),
                main: false,
                industry: None,
            });
        }
        self.lines.insert(code, category);
        Ok(())
    }

    pub fn with_line(mut self, code: impl Into<String>, category: impl Into<String>) -> Result<Self> {
        self.add_line(code, category)?;
        Ok(self)
    }

    pub fn exclude(&mut self, category: impl Into<String>) {
        self.excluded.insert(category.into());
    }

    pub fn set_main(&mut self, category: &str, main: bool) {
        if let Some(c) = self.categories.iter_mut().find(|c| c.id == category) {
            c.main = main;
        }
    }

    /// Reads `line_code,category` rows (header required) on top of
    /// [`retail_default`](Self::retail_default).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut map = Self::retail_default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in rdr.records() {
            let row = row.map_err(csv_error)?;
            let line = row.position().map_or(0, |p| p.line());
            let (Some(code), Some(category)) = (row.get(0), row.get(1)) else {
                return Err(Error::Parse {
                    line,
                    message: "expected line_code,category".into(),
                });
            };
            map.add_line(code, category)?;
        }
        Ok(map)
    }

    /// A code that is itself a category id maps to that category.
    pub fn categorize<'a>(&'a self, code: &str) -> &'a str {
        if let Some(c) = self.lines.get(code) {
            return c;
        }
        self.category(code).map_or(self.misc.as_str(), |c| c.id.as_str())
    }

    pub fn is_known_line(&self, code: &str) -> bool {
        self.lines.contains_key(code) || self.category(code).is_some()
    }

    /// Writes registered `line_code,category` pairs, sorted by code.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["line_code", "category"]).map_err(csv_error)?;
        for (code, cat) in self.lines() {
            w.write_record([code, cat]).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn misc_category(&self) -> &str {
        &self.misc
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, id: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn main_categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.iter().filter(|c| c.main)
    }

    pub fn is_excluded(&self, category: &str) -> bool {
        self.excluded.contains(category)
    }

    /// Registered `(code, category)` pairs in code order.
    pub fn lines(&self) -> BTreeMap<&str, &str> {
        self.lines
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }
}

impl Default for ProductCategoryMap {
    fn default() -> Self {
        Self::retail_default()
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
