//! Seeded synthetic retail economies, a CES-Cournot equilibrium solver and
//! a Monte-Carlo "two random dollars" oracle.
//!
//! Randomness comes from ChaCha8 with one stream per (phase, index), so
//! output never depends on thread count or scheduling.

mod config;
mod equilibrium;
mod generator;
mod oracle;

pub use config::EconomyConfig;
pub use equilibrium::{solve_cournot_market, solve_cournot_markets, EquilibriumMarket};
pub use generator::{generate_economy, EconomyMetadata, SyntheticEconomy, YearSummary, GENERATOR_NAME};
pub use oracle::{mc_market_hhi, mc_pair_statistics, mc_same_firm_probability, McEstimate, PairCondition, PairStatistics};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 with one stream per (phase, index)";

pub(crate) fn stream_rng(seed: u64, phase: u32, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((phase as u64) << 48) ^ index);
    rng
}
