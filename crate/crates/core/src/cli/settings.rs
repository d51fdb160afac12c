use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microdata::{Geography, MarketDefinition, WeightSource};

pub const ENV_PREFIX: &str = "CONCENTRA_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format '{s}'"))),
        }
    }
}

/// Settings shared by every subcommand, each optional at every layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layer {
    pub market_def: Option<String>,
    pub geo: Option<String>,
    pub weights: Option<String>,
    pub scheme: Option<String>,
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub categories: Option<PathBuf>,
}

impl Layer {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Reads `CONCENTRA_MARKET_DEF`, `CONCENTRA_GEO` and so on.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let var = |name: &str| get(&format!("{ENV_PREFIX}{name}"));
        let num = |name: &str| -> Result<Option<u64>> {
            var(name)
                .map(|v| v.parse().map_err(|_| Error::Config(format!("{ENV_PREFIX}{name} = '{v}' is not an integer"))))
                .transpose()
        };
        Ok(Self {
            market_def: var("MARKET_DEF"),
            geo: var("GEO"),
            weights: var("WEIGHTS"),
            scheme: var("SCHEME"),
            format: var("FORMAT"),
            seed: num("SEED")?,
            threads: num("THREADS")?.map(|n| n as usize),
            categories: var("CATEGORIES").map(PathBuf::from),
        })
    }

    /// Fills unset fields from `lower`.
    pub fn over(self, lower: Layer) -> Layer {
        Layer {
            market_def: self.market_def.or(lower.market_def),
            geo: self.geo.or(lower.geo),
            weights: self.weights.or(lower.weights),
            scheme: self.scheme.or(lower.scheme),
            format: self.format.or(lower.format),
            seed: self.seed.or(lower.seed),
            threads: self.threads.or(lower.threads),
            categories: self.categories.or(lower.categories),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub market_def: MarketDefinition,
    pub geo: Geography,
    pub weights: WeightSource,
    pub scheme: String,
    pub format: OutputFormat,
    pub seed: u64,
    pub threads: Option<usize>,
    pub categories: Option<PathBuf>,
}

const SCHEMES: &[&str] = &["contemporaneous", "base", "rst", "decomp"];

impl Settings {
    pub fn resolve(layer: Layer) -> Result<Self> {
        fn parse<T: FromStr>(v: Option<String>, default: T, what: &str) -> Result<T> {
            match v {
                None => Ok(default),
                Some(s) => s.parse().map_err(|_| Error::Config(format!("invalid {what} '{s}'"))),
            }
        }
        let scheme = layer.scheme.unwrap_or_else(|| "contemporaneous".into());
        if !SCHEMES.contains(&scheme.as_str()) {
            return Err(Error::Config(format!("invalid scheme '{scheme}'")));
        }
        if layer.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(Settings {
            market_def: parse(layer.market_def, MarketDefinition::Product, "market definition")?,
            geo: parse(layer.geo, Geography::CommutingZone, "geography")?,
            weights: parse(layer.weights, WeightSource::Sales, "weight source")?,
            scheme,
            format: parse(layer.format, OutputFormat::Csv, "format")?,
            seed: layer.seed.unwrap_or(1),
            threads: layer.threads,
            categories: layer.categories,
        })
    }
}
