//! Establishment CSV reading and writing.
//!
//! Canonical columns, in order:
//! `year,estab_id,firm_id,zip,county,commuting_zone,msa,naics6,total_sales`,
//! then optional `line_code_k,line_share_k` pairs. An `employment` column
//! may appear anywhere. `.` marks a missing value.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use super::categories::csv_error;
use super::record::{EstablishmentRecord, LineShare, Reject};
use crate::error::{Error, Result};

pub const MISSING: &str = ".";

/// Header names for each logical field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub year: String,
    pub estab_id: String,
    pub firm_id: String,
    pub zip: String,
    pub county: String,
    pub commuting_zone: String,
    pub msa: String,
    pub naics6: String,
    pub total_sales: String,
    pub employment: String,
    pub line_code_prefix: String,
    pub line_share_prefix: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            year: "year".into(),
            estab_id: "estab_id".into(),
            firm_id: "firm_id".into(),
            zip: "zip".into(),
            county: "county".into(),
            commuting_zone: "commuting_zone".into(),
            msa: "msa".into(),
            naics6: "naics6".into(),
            total_sales: "total_sales".into(),
            employment: "employment".into(),
            line_code_prefix: "line_code_".into(),
            line_share_prefix: "line_share_".into(),
        }
    }
}

/// Records that passed validation plus everything routed aside.
#[derive(Debug, Clone, Default)]
pub struct LoadOutcome {
    pub records: Vec<EstablishmentRecord>,
    pub rejects: Vec<Reject>,
    pub ignored_columns: Vec<String>,
}

struct Columns {
    year: usize,
    estab_id: usize,
    firm_id: usize,
    zip: usize,
    county: usize,
    commuting_zone: usize,
    msa: usize,
    naics6: usize,
    total_sales: usize,
    employment: Option<usize>,
    // (code column, share column) ordered by k
    lines: Vec<(usize, usize)>,
}

impl Columns {
    fn resolve(header: &csv::StringRecord, schema: &CsvSchema) -> Result<(Self, Vec<String>)> {
        let find = |name: &str| -> Result<usize> {
            header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("header is missing required column '{name}'"),
            })
        };
        let mut codes = BTreeMap::new();
        let mut shares = BTreeMap::new();
        let mut ignored = Vec::new();
        let required = [
            &schema.year,
            &schema.estab_id,
            &schema.firm_id,
            &schema.zip,
            &schema.county,
            &schema.commuting_zone,
            &schema.msa,
            &schema.naics6,
            &schema.total_sales,
            &schema.employment,
        ];
        for (i, h) in header.iter().enumerate() {
            if let Some(k) = h.strip_prefix(schema.line_code_prefix.as_str()) {
                if let Ok(k) = k.parse::<u32>() {
                    codes.insert(k, i);
                    continue;
                }
            }
            if let Some(k) = h.strip_prefix(schema.line_share_prefix.as_str()) {
                if let Ok(k) = k.parse::<u32>() {
                    shares.insert(k, i);
                    continue;
                }
            }
            if !required.iter().any(|r| r.as_str() == h) {
                ignored.push(h.to_owned());
            }
        }
        let mut lines = Vec::with_capacity(codes.len());
        for (k, code_col) in &codes {
            let share_col = shares.remove(k).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("column {}{k} has no matching share column", schema.line_code_prefix),
            })?;
            lines.push((*code_col, share_col));
        }
        if let Some((k, _)) = shares.into_iter().next() {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {}{k} has no matching code column", schema.line_share_prefix),
            });
        }
        let cols = Columns {
            year: find(&schema.year)?,
            estab_id: find(&schema.estab_id)?,
            firm_id: find(&schema.firm_id)?,
            zip: find(&schema.zip)?,
            county: find(&schema.county)?,
            commuting_zone: find(&schema.commuting_zone)?,
            msa: find(&schema.msa)?,
            naics6: find(&schema.naics6)?,
            total_sales: find(&schema.total_sales)?,
            employment: header.iter().position(|h| h == schema.employment),
            lines,
        };
        Ok((cols, ignored))
    }
}

pub fn load_establishments(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadOutcome> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_establishments(std::io::BufReader::new(file), schema)
}

pub fn read_establishments<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let (cols, ignored) = Columns::resolve(&header, schema)?;
    for c in &ignored {
        warn!("ignoring unknown column '{c}'");
    }

    let mut out = LoadOutcome {
        ignored_columns: ignored,
        ..Default::default()
    };
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(e)),
        }
        let line = row.position().map_or(0, |p| p.line());
        if row.len() > header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        match parse_row(&row, &cols, line)? {
            Ok(record) => out.records.push(record),
            Err(reject) => out.rejects.push(reject),
        }
    }
    Ok(out)
}

fn field<'r>(row: &'r csv::StringRecord, idx: usize) -> Option<&'r str> {
    match row.get(idx) {
        None | Some("") | Some(MISSING) => None,
        Some(v) => Some(v),
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str, name: &str, line: u64) -> Result<T> {
    raw.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} value '{raw}'"),
    })
}

/// Outer `Err` is a hard parse failure; inner `Err` is a validation reject.
fn parse_row(
    row: &csv::StringRecord,
    cols: &Columns,
    line: u64,
) -> Result<std::result::Result<EstablishmentRecord, Reject>> {
    let need = |idx: usize, name: &str| -> Result<&str> {
        row.get(idx).ok_or_else(|| Error::Parse {
            line,
            message: format!("row is missing column '{name}'"),
        })
    };
    let year: i32 = parse_num(need(cols.year, "year")?, "year", line)?;
    let estab_id = need(cols.estab_id, "estab_id")?.to_owned();
    let reject = |reason: &str| Reject {
        line: Some(line),
        estab_id: Some(estab_id.clone()),
        year: Some(year),
        reason: reason.to_owned(),
    };

    let Some(firm_id) = field(row, cols.firm_id) else {
        return Ok(Err(reject("missing firm_id")));
    };
    let Some(naics6) = field(row, cols.naics6) else {
        return Ok(Err(reject("missing naics6")));
    };
    let Some(sales_raw) = field(row, cols.total_sales) else {
        return Ok(Err(reject("missing total_sales")));
    };
    let total_sales: f64 = parse_num(sales_raw, "total_sales", line)?;
    if !total_sales.is_finite() {
        return Ok(Err(reject("non-finite sales")));
    }
    if total_sales < 0.0 {
        return Ok(Err(reject("negative sales")));
    }
    if total_sales == 0.0 {
        return Ok(Err(reject("zero sales")));
    }
    let employment = match cols.employment.and_then(|i| field(row, i)) {
        Some(raw) => {
            let e: f64 = parse_num(raw, "employment", line)?;
            if !(e >= 0.0 && e.is_finite()) {
                return Ok(Err(reject("invalid employment")));
            }
            Some(e)
        }
        None => None,
    };

    let mut lines = Vec::new();
    for &(code_col, share_col) in &cols.lines {
        match (field(row, code_col), field(row, share_col)) {
            (Some(code), Some(raw)) => {
                let share: f64 = parse_num(raw, "line_share", line)?;
                if !(0.0..=1.0).contains(&share) {
                    return Ok(Err(reject("line share outside [0,1]")));
                }
                lines.push(LineShare::new(code, share));
            }
            (None, None) => {}
            _ => return Ok(Err(reject("line code without share"))),
        }
    }

    Ok(Ok(EstablishmentRecord {
        year,
        estab_id,
        firm_id: firm_id.to_owned(),
        zip: field(row, cols.zip).map(str::to_owned),
        county: field(row, cols.county).map(str::to_owned),
        commuting_zone: field(row, cols.commuting_zone).map(str::to_owned),
        msa: field(row, cols.msa).map(str::to_owned),
        naics6: naics6.to_owned(),
        total_sales,
        employment,
        lines,
    }))
}

/// Writes records in the canonical layout. The `employment` column is
/// appended after the line pairs only when some record carries it.
pub fn write_establishments<W: Write>(writer: W, records: &[EstablishmentRecord]) -> Result<()> {
    let pairs = records.iter().map(|r| r.lines.len()).max().unwrap_or(0);
    let with_employment = records.iter().any(|r| r.employment.is_some());
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<String> = [
        "year",
        "estab_id",
        "firm_id",
        "zip",
        "county",
        "commuting_zone",
        "msa",
        "naics6",
        "total_sales",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 1..=pairs {
        header.push(format!("line_code_{k}"));
        header.push(format!("line_share_{k}"));
    }
    if with_employment {
        header.push("employment".into());
    }
    w.write_record(&header).map_err(csv_error)?;

    let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| MISSING.to_owned());
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for r in records {
        fields.clear();
        fields.push(r.year.to_string());
        fields.push(r.estab_id.clone());
        fields.push(r.firm_id.clone());
        fields.push(opt(&r.zip));
        fields.push(opt(&r.county));
        fields.push(opt(&r.commuting_zone));
        fields.push(opt(&r.msa));
        fields.push(r.naics6.clone());
        fields.push(r.total_sales.to_string());
        for k in 0..pairs {
            match r.lines.get(k) {
                Some(l) => {
                    fields.push(l.code.clone());
                    fields.push(l.share.to_string());
                }
                None => {
                    fields.push(MISSING.into());
                    fields.push(MISSING.into());
                }
            }
        }
        if with_employment {
            fields.push(r.employment.map_or_else(|| MISSING.to_owned(), |e| e.to_string()));
        }
        w.write_record(&fields).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "year,estab_id,firm_id,zip,county,commuting_zone,msa,naics6,total_sales,line_code_1,line_share_1";

    fn load(body: &str) -> Result<LoadOutcome> {
        read_establishments(format!("{HEADER}\n{body}").as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn well_formed_rows_load() {
        let out = load(
            "1992,e1,f1,10001,c1,cz1,m1,448140,100,L1,1\n\
             1992,e2,f1,10002,c1,cz1,.,448140,50,.,.\n\
             1992,e3,f2,10003,c2,cz2,m2,445110,75,L2,0.5\n",
        )
        .unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.rejects.is_empty());
        assert_eq!(out.records[1].msa, None);
        assert!(out.records[1].lines.is_empty());
    }

    #[test]
    fn negative_sales_rejected() {
        let out = load(
            "1992,e1,f1,z,c,cz,m,448140,100,.,.\n\
             1992,e2,f1,z,c,cz,m,448140,-5,.,.\n\
             1992,e3,f1,z,c,cz,m,448140,7,.,.\n",
        )
        .unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].reason, "negative sales");
        assert_eq!(out.rejects[0].line, Some(3));
    }

    #[test]
    fn malformed_number_is_parse_error_with_line() {
        let err = load("1992,e1,f1,z,c,cz,m,448140,100,.,.\n1992,e2,f1,z,c,cz,m,448140,abc,.,.\n")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_required_column_is_error() {
        let err = read_establishments("year,estab_id\n1992,e1\n".as_bytes(), &CsvSchema::default())
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn round_trips_through_writer() {
        let recs = vec![
            EstablishmentRecord::new(1992, "e1", "f1", "448140", 100.5)
                .located("z1", "c1", "cz1", None)
                .with_line("L1", 0.25)
                .with_line("L2", 0.75),
            EstablishmentRecord::new(1997, "e2", "f2", "445110", 3.0)
                .in_location("x")
                .with_employment(4.0),
        ];
        let mut buf = Vec::new();
        write_establishments(&mut buf, &recs).unwrap();
        let out = read_establishments(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(out.records, recs);
    }
}
