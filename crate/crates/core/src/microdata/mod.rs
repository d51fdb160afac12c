//! Establishment microdata: loading, product-line aggregation, imputation,
//! deflation and cube construction.

mod build;
mod categories;
mod cube;
mod deflator;
mod loader;
mod product_mix;
mod record;

pub use build::{build_cube, geography_crosswalk, CubeBuild, CubeOptions};
pub use categories::{Category, ProductCategoryMap, MISC_CATEGORY};
pub use cube::{Cell, CubeEntry, SalesCube};
pub(crate) use categories::csv_error;
pub(crate) use cube::runs_by;
pub use deflator::{deflate_sales, DeflatorSeries};
pub use loader::{load_establishments, read_establishments, write_establishments, CsvSchema, LoadOutcome};
pub use product_mix::{
    aggregate_product_lines, impute_missing_product_mix, CategoryMix, ImputedRecord, MixSource, ProductMix,
    MIN_REPORTED_TOTAL,
};
pub use record::{EstablishmentRecord, Geography, LineShare, MarketDefinition, Reject, WeightSource, NATIONAL_LOCATION};
