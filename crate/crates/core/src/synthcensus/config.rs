use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs for [`generate_economy`](super::generate_economy).
///
/// Ranges are inclusive `[min, max]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomyConfig {
    pub seed: u64,
    /// Commuting zones.
    pub locations: usize,
    pub counties_per_location: usize,
    pub zips_per_county: usize,
    /// Fraction of locations outside any MSA.
    pub rural_share: f64,
    /// Product categories, taken in order from the main retail categories.
    pub products: usize,
    /// Single-establishment firms per location.
    pub local_firms: [usize; 2],
    /// Multi-market firms.
    pub chains: usize,
    /// Locations each chain operates in at the first year.
    pub chain_span: [usize; 2],
    /// Fraction of chains that are general merchandisers selling every product.
    pub general_merchandiser_share: f64,
    /// Pareto tail exponent of firm size.
    pub tail_exponent: f64,
    /// Scale of chain stores relative to local stores.
    pub chain_size_premium: f64,
    /// Non-store share of total sales.
    pub nonstore_share: f64,
    pub nonstore_firms: usize,
    pub years: Vec<i32>,
    /// Sales growth factor between consecutive years, applied uniformly.
    pub growth: f64,
    /// New locations each chain enters per later year by acquiring a local firm.
    pub acquisitions_per_year: usize,
    /// Probability that an establishment-year omits its product lines.
    pub nonreporting_rate: f64,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            locations: 50,
            counties_per_location: 2,
            zips_per_county: 3,
            rural_share: 0.2,
            products: 8,
            local_firms: [5, 30],
            chains: 40,
            chain_span: [2, 20],
            general_merchandiser_share: 0.2,
            tail_exponent: 1.1,
            chain_size_premium: 5.0,
            nonstore_share: 0.0,
            nonstore_firms: 3,
            years: vec![2002, 2012],
            growth: 1.0,
            acquisitions_per_year: 0,
            nonreporting_rate: 0.05,
        }
    }
}

impl EconomyConfig {
    /// Chains grow only by buying local firms; every local market keeps its
    /// size distribution, so local concentration stays flat while national
    /// concentration rises.
    pub fn expansion_scenario(seed: u64) -> Self {
        Self {
            seed,
            locations: 40,
            chains: 10,
            chain_span: [2, 5],
            local_firms: [8, 20],
            acquisitions_per_year: 6,
            nonreporting_rate: 0.0,
            ..Self::default()
        }
    }

    /// Sizes the economy to roughly `rows` establishment-year records.
    pub fn with_target_rows(mut self, rows: usize) -> Self {
        let per_location = (self.local_firms[0] + self.local_firms[1]) / 2 + 1;
        let per_year = rows / self.years.len().max(1);
        self.locations = (per_year / per_location).max(1);
        self.chain_span[1] = self.chain_span[1].min(self.locations);
        self.chain_span[0] = self.chain_span[0].min(self.chain_span[1]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("locations", self.locations),
            ("counties_per_location", self.counties_per_location),
            ("zips_per_county", self.zips_per_county),
            ("products", self.products),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.products > 8 {
            return bad(format!("products = {} exceeds the 8 main categories", self.products));
        }
        for (name, [lo, hi]) in [("local_firms", self.local_firms), ("chain_span", self.chain_span)] {
            if lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        if self.chains > 0 && (self.chain_span[0] == 0 || self.chain_span[1] > self.locations) {
            return bad(format!(
                "chain_span [{}, {}] must lie within 1..={} locations",
                self.chain_span[0], self.chain_span[1], self.locations
            ));
        }
        if self.chains == 0 && self.local_firms[1] == 0 {
            return bad("economy has no firms".into());
        }
        for (name, p) in [
            ("rural_share", self.rural_share),
            ("general_merchandiser_share", self.general_merchandiser_share),
            ("nonreporting_rate", self.nonreporting_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.nonstore_share) {
            return bad(format!("nonstore_share = {} is outside [0, 1)", self.nonstore_share));
        }
        if self.nonstore_share > 0.0 && self.nonstore_firms == 0 {
            return bad("nonstore_share > 0 needs at least one non-store firm".into());
        }
        if !(self.tail_exponent > 0.0) || !(self.chain_size_premium > 0.0) || !(self.growth > 0.0) {
            return bad("tail_exponent, chain_size_premium and growth must be positive".into());
        }
        if self.years.is_empty() || self.years.windows(2).any(|w| w[0] >= w[1]) {
            return bad("years must be non-empty and strictly increasing".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        EconomyConfig::default().validate().unwrap();
        EconomyConfig::expansion_scenario(3).validate().unwrap();
    }

    #[test]
    fn span_beyond_locations_rejected() {
        let cfg = EconomyConfig {
            locations: 3,
            chain_span: [2, 5],
            ..EconomyConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = EconomyConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<EconomyConfig>(&text).unwrap(), cfg);
        assert!(toml::from_str::<EconomyConfig>("bogus = 1").is_err());
    }
}
