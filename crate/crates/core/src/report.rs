//! JSON analyzer reports and a validator for the published report schema.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Schema every emitted report is checked against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const TRUNCATION_CAVEAT: &str =
    "Fock truncation at dimension D; truncation error is not estimated";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub analyzer: String,
    pub observable: Option<String>,
    pub inputs: Value,
    /// The analyzer's main numeric sequence (norms, values per dimension, ...).
    pub sequence: Vec<f64>,
    pub verdict: String,
    /// Whether the invariant-level checks of this analyzer passed.
    pub passed: bool,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub caveats: Vec<String>,
    pub details: Value,
}

impl Report {
    pub fn new(analyzer: impl Into<String>, observable: Option<String>) -> Self {
        Report {
            analyzer: analyzer.into(),
            observable,
            inputs: Value::Object(Default::default()),
            sequence: Vec::new(),
            verdict: String::new(),
            passed: true,
            tolerances: BTreeMap::new(),
            seed: None,
            caveats: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    /// Pretty JSON, validated against [`REPORT_SCHEMA`].
    pub fn to_json(&self) -> Result<String> {
        let v = self.to_value();
        validate_report(&v)?;
        Ok(serde_json::to_string_pretty(&v).expect("reports serialize"))
    }
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "string" => value.is_string(),
        "null" => value.is_null(),
        "object" => value.is_object(),
        "array" => value.is_array(),
        "number" => value.is_number(),
        "integer" => value.is_u64() || value.is_i64(),
        "boolean" => value.is_boolean(),
        _ => false,
    }
}

fn check_type(value: &Value, schema: &Value, path: &str) -> Result<()> {
    let ok = match &schema["type"] {
        Value::String(t) => type_matches(value, t),
        Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(value, t)),
        _ => true,
    };
    if !ok {
        return Err(Error::Io(format!("report field {path} has the wrong type: {value}")));
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            check_type(v, items, &format!("{path}[{i}]"))?;
        }
    }
    if let (Some(extra), Some(obj)) = (schema.get("additionalProperties"), value.as_object()) {
        if extra.is_object() {
            for (k, v) in obj {
                check_type(v, extra, &format!("{path}.{k}"))?;
            }
        }
    }
    Ok(())
}

/// Checks `required`, property types and `additionalProperties: false`,
/// which is the subset of JSON Schema the report schema uses.
pub fn validate_report(value: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("embedded schema parses");
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Io("report is not a JSON object".into()))?;
    for key in schema["required"].as_array().into_iter().flatten().filter_map(Value::as_str) {
        if !obj.contains_key(key) {
            return Err(Error::Io(format!("report is missing field {key}")));
        }
    }
    let props = schema["properties"].as_object().expect("schema lists properties");
    for (k, v) in obj {
        match props.get(k) {
            Some(s) => check_type(v, s, k)?,
            None => return Err(Error::Io(format!("report has unexpected field {k}"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reports_validate_and_round_trip_floats() {
        let mut r = Report::new("norm1", Some("phase-can:dim=8".into())).tolerance("norm1", 1e-6);
        r.sequence = vec![0.1, 1.0 / 3.0, 2.0f64.sqrt()];
        r.verdict = "norm-1".into();
        r.seed = Some(7);
        let text = r.to_json().unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        let seq: Vec<f64> = serde_json::from_value(back["sequence"].clone()).unwrap();
        assert_eq!(seq, r.sequence);
    }

    #[test]
    fn validator_rejects_bad_reports() {
        let good = Report::new("x", None).to_value();
        assert!(validate_report(&good).is_ok());
        let mut missing = good.clone();
        missing.as_object_mut().unwrap().remove("verdict");
        assert!(validate_report(&missing).is_err());
        let mut extra = good.clone();
        extra["timestamp"] = json!(1);
        assert!(validate_report(&extra).is_err());
        let mut wrong = good;
        wrong["tolerances"] = json!({"a": "b"});
        assert!(validate_report(&wrong).is_err());
    }
}
