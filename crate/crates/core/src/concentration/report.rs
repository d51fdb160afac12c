use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Per-year values of one index, with the metadata needed to read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSeries {
    pub definition: String,
    pub geography: String,
    pub scheme: String,
    pub values: BTreeMap<i32, f64>,
}

impl ConcentrationSeries {
    pub fn new(definition: impl Into<String>, geography: impl Into<String>, scheme: impl Into<String>) -> Self {
        Self {
            definition: definition.into(),
            geography: geography.into(),
            scheme: scheme.into(),
            values: BTreeMap::new(),
        }
    }

    /// Records a value; concentration indices must lie in [0, 1].
    pub fn push(&mut self, year: i32, value: f64) -> Result<()> {
        if !(0.0..=1.0 + 1e-12).contains(&value) {
            return Err(Error::Validation(format!(
                "concentration value {value} for {year} is outside [0, 1]"
            )));
        }
        self.values.insert(year, value);
        Ok(())
    }

    /// Values in percentage points (fraction × 100).
    pub fn percentage_points(&self) -> BTreeMap<i32, f64> {
        self.values.iter().map(|(&y, &v)| (y, v * 100.0)).collect()
    }
}

/// Long-format CSV: `definition,geography,scheme,year,value`.
pub fn series_to_csv(series: &[ConcentrationSeries]) -> String {
    let mut out = String::from("definition,geography,scheme,year,value\n");
    for s in series {
        for (year, value) in &s.values {
            out.push_str(&format!("{},{},{},{year},{value}\n", s.definition, s.geography, s.scheme));
        }
    }
    out
}

/// JSON nested as definition → geography → scheme → year → value.
pub fn series_to_json(series: &[ConcentrationSeries]) -> Value {
    let mut root = Map::new();
    for s in series {
        let by_geo = root
            .entry(s.definition.clone())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("object");
        let by_scheme = by_geo
            .entry(s.geography.clone())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("object");
        let years: Map<String, Value> = s.values.iter().map(|(y, v)| (y.to_string(), json!(v))).collect();
        by_scheme.insert(s.scheme.clone(), Value::Object(years));
    }
    Value::Object(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_long_format() {
        let mut s = ConcentrationSeries::new("product", "cz", "contemporaneous");
        s.push(1992, 0.064).unwrap();
        s.push(2012, 0.085).unwrap();
        assert_eq!(
            series_to_csv(&[s]),
            "definition,geography,scheme,year,value\nproduct,cz,contemporaneous,1992,0.064\nproduct,cz,contemporaneous,2012,0.085\n"
        );
    }

    #[test]
    fn json_nesting() {
        let mut a = ConcentrationSeries::new("product", "cz", "contemporaneous");
        a.push(1992, 0.5).unwrap();
        let mut b = ConcentrationSeries::new("product", "national", "contemporaneous");
        b.push(1992, 0.25).unwrap();
        let v = series_to_json(&[a, b]);
        assert_eq!(v["product"]["cz"]["contemporaneous"]["1992"], json!(0.5));
        assert_eq!(v["product"]["national"]["contemporaneous"]["1992"], json!(0.25));
    }

    #[test]
    fn out_of_range_rejected() {
        let mut s = ConcentrationSeries::new("product", "cz", "contemporaneous");
        assert!(s.push(1992, 1.5).is_err());
        assert!(s.push(1992, -0.1).is_err());
    }
}
