//! Market shares, HHIs, top-N shares and their aggregation across markets.
//!
//! Two local weighting conventions are available. Plain sales weights
//! ([`WeightScheme::Contemporaneous`]) are what headline series use; the
//! squared-share weights of the national decomposition
//! ([`WeightScheme::Decomposition`]) give the conditional local term.

mod index;
mod report;
mod shares;
pub(crate) mod view;

pub use index::{
    cross_section_change, local_hhi_index, market_hhi_changes, market_stats, methodology_gap, national_hhi,
    product_concentration, product_local_hhi, rst_delta, top_n_index, MarketChange, MarketStat,
    ProductConcentration, WeightScheme,
};
pub(crate) use index::national_hhi_of;
pub use report::{series_to_csv, series_to_json, ConcentrationSeries};
pub use shares::{hhi, market_shares, top_n_share, MarketKey, MarketShares};
