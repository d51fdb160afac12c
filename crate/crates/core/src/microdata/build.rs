use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::categories::ProductCategoryMap;
use super::cube::{CubeBuilder, SalesCube};
use super::product_mix::ImputedRecord;
use super::record::{EstablishmentRecord, Geography, MarketDefinition, Reject, WeightSource};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeOptions {
    pub definition: MarketDefinition,
    pub geography: Geography,
    pub weights: WeightSource,
}

impl CubeOptions {
    pub fn new(definition: MarketDefinition, geography: Geography) -> Self {
        Self {
            definition,
            geography,
            weights: WeightSource::Sales,
        }
    }

    pub fn with_weights(mut self, weights: WeightSource) -> Self {
        self.weights = weights;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CubeBuild {
    pub cube: SalesCube,
    pub rejects: Vec<Reject>,
    /// Total weight of the records that entered the cube.
    pub input_total: f64,
    /// Weight assigned to excluded categories and therefore left out.
    pub excluded_total: f64,
}

/// Assigns each establishment's sales to its markets.
///
/// Product-based cubes split sales across categories by the record's mix;
/// industry-based cubes key everything to the record's naics6. Records with
/// no location at the requested geography (or no employment, when weighting
/// by employment) are routed to `rejects`.
pub fn build_cube(records: &[ImputedRecord], map: &ProductCategoryMap, opts: CubeOptions) -> Result<CubeBuild> {
    let mut builder = CubeBuilder::new();
    let mut rejects = Vec::new();
    let mut accepted = Vec::with_capacity(records.len());
    let mut excluded = Vec::new();

    for ir in records {
        let r = &ir.record;
        let reject = |reason: String| Reject {
            line: None,
            estab_id: Some(r.estab_id.clone()),
            year: Some(r.year),
            reason,
        };
        let Some(location) = r.location(opts.geography) else {
            rejects.push(reject(format!("no {} location", opts.geography)));
            continue;
        };
        let Some(weight) = r.weight(opts.weights) else {
            rejects.push(reject(format!("missing {}", opts.weights.as_str())));
            continue;
        };
        if !(weight.is_finite() && weight >= 0.0) {
            rejects.push(reject(format!("invalid {}", opts.weights.as_str())));
            continue;
        }
        match opts.definition {
            MarketDefinition::Industry => {
                builder.push(&r.firm_id, &r.naics6, location, r.year, weight)?;
            }
            MarketDefinition::Product => {
                if ir.mix.is_empty() {
                    return Err(Error::Validation(format!(
                        "establishment {} ({}) has no product mix; impute before building a product cube",
                        r.estab_id, r.year
                    )));
                }
                for (category, frac) in &ir.mix {
                    let amount = weight * frac;
                    if map.is_excluded(category) {
                        excluded.push(amount);
                    } else {
                        builder.push(&r.firm_id, category, location, r.year, amount)?;
                    }
                }
            }
        }
        accepted.push(weight);
    }

    Ok(CubeBuild {
        cube: builder.finish(opts.definition, opts.geography),
        rejects,
        input_total: pairwise_sum(&accepted),
        excluded_total: pairwise_sum(&excluded),
    })
}

/// Maps each `from`-level location to its unique `to`-level location.
pub fn geography_crosswalk(
    records: &[EstablishmentRecord],
    from: Geography,
    to: Geography,
) -> Result<HashMap<String, String>> {
    let mut out: HashMap<String, String> = HashMap::new();
    for r in records {
        let (Some(f), Some(t)) = (r.location(from), r.location(to)) else {
            continue;
        };
        match out.get(f) {
            Some(existing) if existing != t => {
                return Err(Error::Validation(format!(
                    "{from} '{f}' maps to both {to} '{existing}' and '{t}'"
                )));
            }
            Some(_) => {}
            None => {
                out.insert(f.to_owned(), t.to_owned());
            }
        }
    }
    Ok(out)
}
