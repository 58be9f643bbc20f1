//! Report types and output formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// How a computed value is compared with the expected one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|computed - expected| <= tolerance`
    Equal,
    /// `computed <= expected + tolerance`
    AtMost,
    /// `computed >= expected - tolerance`
    AtLeast,
    /// `computed < expected` strictly
    Below,
}

/// One numeric check inside a verification case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: &str,
        computed: f64,
        relation: Relation,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        let pass = match relation {
            Relation::Equal => (computed - expected).abs() <= tolerance,
            Relation::AtMost => computed <= expected + tolerance,
            Relation::AtLeast => computed >= expected - tolerance,
            Relation::Below => computed < expected,
        };
        Check {
            name: name.to_string(),
            computed,
            expected,
            tolerance,
            relation,
            pass,
        }
    }
}

/// Result of one `verify` case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationCase {
    pub id: String,
    pub description: String,
    /// Headline expected value, in exact form when there is one.
    pub expected: String,
    pub provenance: String,
    /// Headline computed value (the first check).
    pub computed: f64,
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub runtime_seconds: f64,
    pub time_limit_seconds: f64,
    pub pass: bool,
}

/// Render a JSON value as CSV: arrays of objects become tables, objects become
/// `key,value` rows. Nested values are written as JSON text.
pub fn to_csv(value: &Value) -> Result<String, CliError> {
    fn cell(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    match value {
        Value::Array(rows) => {
            let header: Vec<String> = match rows.first() {
                Some(Value::Object(m)) => m.keys().cloned().collect(),
                _ => vec!["value".to_string()],
            };
            w.write_record(&header)?;
            for r in rows {
                let rec: Vec<String> = match r {
                    Value::Object(m) => header
                        .iter()
                        .map(|k| m.get(k).map(cell).unwrap_or_default())
                        .collect(),
                    other => vec![cell(other)],
                };
                w.write_record(&rec)?;
            }
        }
        Value::Object(m) => {
            w.write_record(["key", "value"])?;
            for (k, v) in m {
                w.write_record([k.as_str(), cell(v).as_str()])?;
            }
        }
        other => {
            w.write_record(["value"])?;
            w.write_record([cell(other)])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Serialize a report in the requested format.
pub fn render<T: Serialize>(report: &T, format: Format) -> Result<String, CliError> {
    let value = serde_json::to_value(report)?;
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&value)? + "\n"),
        Format::Csv => to_csv(&value),
    }
}

/// Write to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn check_relations() {
        assert!(Check::new("a", 0.5, Relation::Equal, 0.5, 0.0).pass);
        assert!(!Check::new("a", 0.5 + 1e-9, Relation::Equal, 0.5, 1e-12).pass);
        assert!(Check::new("a", 1.0, Relation::AtMost, 0.5, 0.5).pass);
        assert!(Check::new("a", 0.0, Relation::AtLeast, 0.5, 0.5).pass);
        assert!(!Check::new("a", 0.125, Relation::Below, 0.125, 1.0).pass);
    }

    #[test]
    fn csv_tables_and_pairs() {
        let rows = json!([{"n": 1, "x": 0.5}, {"n": 2, "x": [1, 2]}]);
        assert_eq!(to_csv(&rows).unwrap(), "n,x\n1,0.5\n2,\"[1,2]\"\n");
        let obj = json!({"metric": "tv", "value": 0.25});
        assert_eq!(to_csv(&obj).unwrap(), "key,value\nmetric,tv\nvalue,0.25\n");
    }
}
