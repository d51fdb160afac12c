use serde::{Deserialize, Serialize};

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Geographic level at which local markets are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geography {
    Zip,
    County,
    CommutingZone,
    Msa,
    National,
}

/// Location id used for every establishment when the geography is national.
pub const NATIONAL_LOCATION: &str = "US";

impl Geography {
    pub fn as_str(&self) -> &'static str {
        match self {
            Geography::Zip => "zip",
            Geography::County => "county",
            Geography::CommutingZone => "cz",
            Geography::Msa => "msa",
            Geography::National => "national",
        }
    }
}

impl fmt::Display for Geography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Geography {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zip" => Ok(Geography::Zip),
            "county" => Ok(Geography::County),
            "cz" | "commuting_zone" => Ok(Geography::CommutingZone),
            "msa" => Ok(Geography::Msa),
            "national" => Ok(Geography::National),
            other => Err(Error::InvalidArgument(format!("unknown geography '{other}'"))),
        }
    }
}

/// Whether markets are keyed by product category or by the store's NAICS industry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketDefinition {
    Product,
    Industry,
}

impl MarketDefinition {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarketDefinition::Product => "product",
            MarketDefinition::Industry => "industry",
        }
    }
}

impl fmt::Display for MarketDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarketDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "product" => Ok(MarketDefinition::Product),
            "industry" => Ok(MarketDefinition::Industry),
            other => Err(Error::InvalidArgument(format!(
                "unknown market definition '{other}'"
            ))),
        }
    }
}

/// What quantity fills the cube: sales, or employment treated identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    #[default]
    Sales,
    Employment,
}

impl WeightSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightSource::Sales => "sales",
            WeightSource::Employment => "employment",
        }
    }
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sales" => Ok(WeightSource::Sales),
            "employment" => Ok(WeightSource::Employment),
            other => Err(Error::InvalidArgument(format!("unknown weight source '{other}'"))),
        }
    }
}

/// One reported product line: a line code and its fraction of store sales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineShare {
    pub code: String,
    pub share: f64,
}

impl LineShare {
    pub fn new(code: impl Into<String>, share: f64) -> Self {
        Self {
            code: code.into(),
            share,
        }
    }
}

/// One establishment-year row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstablishmentRecord {
    pub year: i32,
    pub estab_id: String,
    pub firm_id: String,
    pub zip: Option<String>,
    pub county: Option<String>,
    pub commuting_zone: Option<String>,
    /// Empty for rural establishments.
    pub msa: Option<String>,
    pub naics6: String,
    pub total_sales: f64,
    pub employment: Option<f64>,
    pub lines: Vec<LineShare>,
}

impl EstablishmentRecord {
    pub fn new(
        year: i32,
        estab_id: impl Into<String>,
        firm_id: impl Into<String>,
        naics6: impl Into<String>,
        total_sales: f64,
    ) -> Self {
        Self {
            year,
            estab_id: estab_id.into(),
            firm_id: firm_id.into(),
            zip: None,
            county: None,
            commuting_zone: None,
            msa: None,
            naics6: naics6.into(),
            total_sales,
            employment: None,
            lines: Vec::new(),
        }
    }

    /// Sets every sub-national geography field at once.
    pub fn located(
        mut self,
        zip: &str,
        county: &str,
        commuting_zone: &str,
        msa: Option<&str>,
    ) -> Self {
        self.zip = Some(zip.to_owned());
        self.county = Some(county.to_owned());
        self.commuting_zone = Some(commuting_zone.to_owned());
        self.msa = msa.map(str::to_owned);
        self
    }

    /// Shorthand for fixtures where one id serves every geography level.
    pub fn in_location(self, location: &str) -> Self {
        self.located(location, location, location, Some(location))
    }

    pub fn with_line(mut self, code: impl Into<String>, share: f64) -> Self {
        self.lines.push(LineShare::new(code, share));
        self
    }

    pub fn with_employment(mut self, employment: f64) -> Self {
        self.employment = Some(employment);
        self
    }

    pub fn location(&self, geography: Geography) -> Option<&str> {
        match geography {
            Geography::Zip => self.zip.as_deref(),
            Geography::County => self.county.as_deref(),
            Geography::CommutingZone => self.commuting_zone.as_deref(),
            Geography::Msa => self.msa.as_deref(),
            Geography::National => Some(NATIONAL_LOCATION),
        }
    }

    pub fn weight(&self, source: WeightSource) -> Option<f64> {
        match source {
            WeightSource::Sales => Some(self.total_sales),
            WeightSource::Employment => self.employment,
        }
    }

    /// Non-store retailers (mail order, online) carry NAICS 454.
    pub fn is_nonstore(&self) -> bool {
        self.naics6.starts_with("454")
    }
}

/// A row routed out of the pipeline, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line in the source file, when the row came from a file.
    pub line: Option<u64>,
    pub estab_id: Option<String>,
    pub year: Option<i32>,
    pub reason: String,
}
