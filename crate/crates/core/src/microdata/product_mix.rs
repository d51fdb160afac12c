//! Product-line aggregation and imputation of missing product mixes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::categories::ProductCategoryMap;
use super::record::EstablishmentRecord;
use crate::error::{Error, Result};

/// Reported line shares summing below this are treated as non-reports.
pub const MIN_REPORTED_TOTAL: f64 = 1e-6;

/// Fractions of store sales by category; sums to one.
pub type CategoryMix = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum ProductMix {
    Reported(CategoryMix),
    NeedsImputation,
}

/// Where an establishment's category fractions came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixSource {
    Reported,
    /// Same establishment, nearest other census year.
    SameEstab { year: i32 },
    /// Sales-weighted mean over same firm × naics6 reporters in the year.
    SameFirm,
    /// Sales-weighted mean over all naics6 reporters in the year.
    Industry,
    /// Sales-weighted mean over naics6 reporters in every year; used only
    /// when the naics6 has no reporter in the record's year.
    IndustryAllYears,
    /// Industry-based cubes do not consult the mix.
    NotRequired,
}

impl MixSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            MixSource::Reported => "reported",
            MixSource::SameEstab { .. } => "same-estab",
            MixSource::SameFirm => "same-firm",
            MixSource::Industry => "industry",
            MixSource::IndustryAllYears => "industry-all-years",
            MixSource::NotRequired => "not-required",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedRecord {
    pub record: EstablishmentRecord,
    pub mix: CategoryMix,
    pub source: MixSource,
}

impl ImputedRecord {
    /// Wraps records for industry-based cubes, where no mix is needed.
    pub fn without_mix(records: Vec<EstablishmentRecord>) -> Vec<ImputedRecord> {
        records
            .into_iter()
            .map(|record| ImputedRecord {
                record,
                mix: CategoryMix::new(),
                source: MixSource::NotRequired,
            })
            .collect()
    }
}

/// Collapses reported product lines into category fractions, rescaling so
/// they sum to one.
pub fn aggregate_product_lines(rec: &EstablishmentRecord, map: &ProductCategoryMap) -> ProductMix {
    let mut mix = CategoryMix::new();
    for line in &rec.lines {
        if line.share > 0.0 {
            *mix.entry(map.categorize(&line.code).to_owned()).or_insert(0.0) += line.share;
        }
    }
    let total: f64 = mix.values().sum();
    if total < MIN_REPORTED_TOTAL {
        return ProductMix::NeedsImputation;
    }
    for v in mix.values_mut() {
        *v /= total;
    }
    ProductMix::Reported(mix)
}

#[derive(Default)]
struct WeightedMix {
    weight: f64,
    sums: CategoryMix,
}

impl WeightedMix {
    fn add(&mut self, weight: f64, mix: &CategoryMix) {
        self.weight += weight;
        for (k, v) in mix {
            *self.sums.entry(k.clone()).or_insert(0.0) += weight * v;
        }
    }

    fn mean(&self) -> Option<CategoryMix> {
        if self.weight <= 0.0 {
            return None;
        }
        let mut out: CategoryMix = self
            .sums
            .iter()
            .map(|(k, v)| (k.clone(), v / self.weight))
            .collect();
        // renormalise away rounding drift
        let total: f64 = out.values().sum();
        out.values_mut().for_each(|v| *v /= total);
        Some(out)
    }
}

/// Fills category fractions for every record.
///
/// Non-reporters are filled in priority order: the same establishment in
/// the nearest other year (ties go to the earlier year), then the
/// sales-weighted mean of same-firm reporters in the same naics6 and year,
/// then all reporters in the same naics6 and year. A naics6 with reporters
/// only in other years falls back to the all-years industry mean.
pub fn impute_missing_product_mix(
    records: Vec<EstablishmentRecord>,
    map: &ProductCategoryMap,
) -> Result<Vec<ImputedRecord>> {
    let mixes: Vec<ProductMix> = records
        .iter()
        .map(|r| aggregate_product_lines(r, map))
        .collect();

    let mut by_estab: HashMap<&str, Vec<(i32, usize)>> = HashMap::new();
    let mut by_firm: HashMap<(&str, &str, i32), WeightedMix> = HashMap::new();
    let mut by_industry: HashMap<(&str, i32), WeightedMix> = HashMap::new();
    let mut by_industry_all: HashMap<&str, WeightedMix> = HashMap::new();
    for (i, (r, m)) in records.iter().zip(&mixes).enumerate() {
        if let ProductMix::Reported(mix) = m {
            by_estab.entry(&r.estab_id).or_default().push((r.year, i));
            by_firm
                .entry((&r.firm_id, &r.naics6, r.year))
                .or_default()
                .add(r.total_sales, mix);
            by_industry
                .entry((&r.naics6, r.year))
                .or_default()
                .add(r.total_sales, mix);
            by_industry_all
                .entry(&r.naics6)
                .or_default()
                .add(r.total_sales, mix);
        }
    }

    let mut missing: BTreeSet<String> = BTreeSet::new();
    let mut resolved: Vec<Option<(CategoryMix, MixSource)>> = Vec::with_capacity(records.len());
    for (r, m) in records.iter().zip(&mixes) {
        let filled = match m {
            ProductMix::Reported(mix) => Some((mix.clone(), MixSource::Reported)),
            ProductMix::NeedsImputation => {
                let same_estab = by_estab.get(r.estab_id.as_str()).and_then(|donors| {
                    donors
                        .iter()
                        .filter(|(y, _)| *y != r.year)
                        .min_by_key(|(y, _)| ((*y - r.year).abs(), *y))
                        .map(|&(y, i)| match &mixes[i] {
                            ProductMix::Reported(mix) => (mix.clone(), MixSource::SameEstab { year: y }),
                            ProductMix::NeedsImputation => unreachable!(),
                        })
                });
                same_estab
                    .or_else(|| {
                        by_firm
                            .get(&(r.firm_id.as_str(), r.naics6.as_str(), r.year))
                            .and_then(WeightedMix::mean)
                            .map(|m| (m, MixSource::SameFirm))
                    })
                    .or_else(|| {
                        by_industry
                            .get(&(r.naics6.as_str(), r.year))
                            .and_then(WeightedMix::mean)
                            .map(|m| (m, MixSource::Industry))
                    })
                    .or_else(|| {
                        by_industry_all
                            .get(r.naics6.as_str())
                            .and_then(WeightedMix::mean)
                            .map(|m| (m, MixSource::IndustryAllYears))
                    })
            }
        };
        if filled.is_none() {
            missing.insert(r.naics6.clone());
        }
        resolved.push(filled);
    }
    if !missing.is_empty() {
        return Err(Error::Unimputable(missing.into_iter().collect()));
    }

    Ok(records
        .into_iter()
        .zip(resolved)
        .map(|(record, filled)| {
            let (mix, source) = filled.expect("checked above");
            ImputedRecord { record, mix, source }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microdata::categories::MISC_CATEGORY;

    fn map() -> ProductCategoryMap {
        ProductCategoryMap::retail_default()
            .with_line("clothingA", "Clothing")
            .unwrap()
            .with_line("clothingB", "Clothing")
            .unwrap()
            .with_line("toys", "Toys")
            .unwrap()
            .with_line("groc", "Groceries")
            .unwrap()
    }

    fn reported(m: ProductMix) -> CategoryMix {
        match m {
            ProductMix::Reported(m) => m,
            ProductMix::NeedsImputation => panic!("expected reported mix"),
        }
    }

    #[test]
    fn single_category_collapse() {
        let r = EstablishmentRecord::new(1992, "e", "f", "448140", 10.0)
            .with_line("clothingA", 0.6)
            .with_line("clothingB", 0.4);
        let mix = reported(aggregate_product_lines(&r, &map()));
        assert_eq!(mix.len(), 1);
        assert!((mix["Clothing"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_reports_rescaled() {
        let r = EstablishmentRecord::new(1992, "e", "f", "448140", 10.0)
            .with_line("clothingA", 0.5)
            .with_line("toys", 0.3);
        let mix = reported(aggregate_product_lines(&r, &map()));
        assert!((mix["Clothing"] - 0.625).abs() < 1e-12);
        assert!((mix["Toys"] - 0.375).abs() < 1e-12);
        assert!((mix.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_code_goes_to_misc() {
        let r = EstablishmentRecord::new(1992, "e", "f", "448140", 10.0)
            .with_line("clothingA", 0.9)
            .with_line("99999999", 0.1);
        let mix = reported(aggregate_product_lines(&r, &map()));
        assert!((mix[MISC_CATEGORY] - 0.10).abs() < 1e-12);
        assert!((mix["Clothing"] - 0.90).abs() < 1e-12);
    }

    #[test]
    fn zero_shares_need_imputation() {
        let r = EstablishmentRecord::new(1992, "e", "f", "448140", 10.0).with_line("toys", 0.0);
        assert_eq!(aggregate_product_lines(&r, &map()), ProductMix::NeedsImputation);
        let r = EstablishmentRecord::new(1992, "e", "f", "448140", 10.0).with_line("toys", 5e-7);
        assert_eq!(aggregate_product_lines(&r, &map()), ProductMix::NeedsImputation);
    }

    #[test]
    fn same_establishment_other_year() {
        let recs = vec![
            EstablishmentRecord::new(1992, "e1", "f1", "448140", 10.0).with_line("toys", 1.0),
            EstablishmentRecord::new(1997, "e1", "f1", "448140", 12.0),
        ];
        let out = impute_missing_product_mix(recs, &map()).unwrap();
        assert_eq!(out[1].source, MixSource::SameEstab { year: 1992 });
        assert_eq!(out[1].source.as_str(), "same-estab");
        assert_eq!(out[1].mix["Toys"], 1.0);
    }

    #[test]
    fn nearest_year_ties_break_earlier() {
        let recs = vec![
            EstablishmentRecord::new(1992, "e1", "f1", "448140", 10.0).with_line("toys", 1.0),
            EstablishmentRecord::new(1997, "e1", "f1", "448140", 12.0),
            EstablishmentRecord::new(2002, "e1", "f1", "448140", 12.0).with_line("groc", 1.0),
        ];
        let out = impute_missing_product_mix(recs, &map()).unwrap();
        assert_eq!(out[1].source, MixSource::SameEstab { year: 1992 });
    }

    #[test]
    fn unanimous_industry_donors() {
        let recs = vec![
            EstablishmentRecord::new(1992, "a", "f1", "445110", 10.0).with_line("groc", 1.0),
            EstablishmentRecord::new(1992, "b", "f2", "445110", 30.0).with_line("groc", 1.0),
            EstablishmentRecord::new(1992, "c", "f3", "445110", 30.0),
        ];
        let out = impute_missing_product_mix(recs, &map()).unwrap();
        assert_eq!(out[2].source, MixSource::Industry);
        assert_eq!(out[2].mix.len(), 1);
        assert!((out[2].mix["Groceries"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn industry_donors_sales_weighted() {
        let recs = vec![
            EstablishmentRecord::new(1992, "a", "f1", "452990", 100.0).with_line("toys", 1.0),
            EstablishmentRecord::new(1992, "b", "f2", "452990", 300.0).with_line("groc", 1.0),
            EstablishmentRecord::new(1992, "c", "f3", "452990", 50.0),
        ];
        let out = impute_missing_product_mix(recs, &map()).unwrap();
        assert!((out[2].mix["Toys"] - 0.25).abs() < 1e-12);
        assert!((out[2].mix["Groceries"] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn same_firm_preferred_over_industry() {
        let recs = vec![
            EstablishmentRecord::new(1992, "a", "f1", "452990", 100.0).with_line("toys", 1.0),
            EstablishmentRecord::new(1992, "b", "f2", "452990", 300.0).with_line("groc", 1.0),
            EstablishmentRecord::new(1992, "c", "f1", "452990", 50.0),
        ];
        let out = impute_missing_product_mix(recs, &map()).unwrap();
        assert_eq!(out[2].source, MixSource::SameFirm);
        assert_eq!(out[2].mix["Toys"], 1.0);
    }

    #[test]
    fn unimputable_lists_codes() {
        let recs = vec![
            EstablishmentRecord::new(1992, "a", "f1", "452990", 100.0).with_line("toys", 1.0),
            EstablishmentRecord::new(1992, "b", "f2", "453110", 300.0),
        ];
        match impute_missing_product_mix(recs, &map()) {
            Err(Error::Unimputable(codes)) => assert_eq!(codes, vec!["453110".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
