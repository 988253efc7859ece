//! Report rendering: canonical JSON, flattened CSV and plain text.
//!
//! Canonical JSON sorts object keys, has no insignificant whitespace and
//! prints floats rounded to 12 significant digits, so identical inputs give
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::extrapolation::{ExtrapolationReport, LemmaReport, Regime, TransferConstant};
use crate::falsifier::{GoldenCheck, InstanceReport, SearchResult};
use crate::norm_est::OperatorNormEstimate;
use crate::rdf::RdfResult;
use crate::weights::NormReport;

pub const SIGNIFICANT_DIGITS: usize = 12;
/// Iterates longer than this are left out of RdF reports unless requested.
pub const ITERATE_ELIDE_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Text => "text",
        })
    }
}

/// The resolved invocation, echoed in every report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    /// Subcommand path, e.g. `norm ap`.
    pub command: String,
    /// Every flag after defaults and environment overrides are applied.
    pub args: BTreeMap<String, String>,
    pub seed: u64,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub output_format: OutputFormat,
    pub tolerances: BTreeMap<String, f64>,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] and prints the shortest decimal that
/// parses back to the rounded value.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    let exponent = rounded.abs().log10().floor();
    if (-5.0..15.0).contains(&exponent) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&format_number(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) if n.is_u64() || n.is_i64() => Some(n.to_string()),
        Value::Number(n) => Some(format_number(n.as_f64().unwrap_or(f64::NAN))),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Scalar leaves keyed by dotted path; arrays are left out.
pub fn flatten_scalars(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                for k in keys {
                    let path = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&path, &map[k], out);
                }
            }
            Value::Array(_) => {}
            other => {
                if let Some(s) = scalar_text(other) {
                    out.push((prefix.to_string(), s));
                }
            }
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

/// A header and rows for CSV output.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn single_row(pairs: Vec<(String, String)>) -> Self {
        let (header, row) = pairs.into_iter().unzip();
        Self {
            header,
            rows: vec![row],
        }
    }
}

/// Anything the command line can print.
pub trait Report: Serialize {
    fn to_value(&self) -> Result<Value> {
        serde_json::to_value(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn table(&self) -> Result<Table> {
        Ok(Table::single_row(flatten_scalars(&self.to_value()?)))
    }

    fn text(&self) -> Result<String> {
        Ok(flatten_scalars(&self.to_value()?)
            .into_iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect())
    }
}

/// Renders `record` with the run configuration attached.
pub fn emit_report<R: Report + ?Sized>(record: &R, format: OutputFormat, config: &RunConfig) -> Result<String> {
    let config_value = serde_json::to_value(config).map_err(|e| Error::Parse(e.to_string()))?;
    match format {
        OutputFormat::Json => {
            let mut envelope = Map::new();
            envelope.insert("config".into(), config_value);
            envelope.insert("report".into(), record.to_value()?);
            let mut s = canonical_json(&Value::Object(envelope));
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let table = record.table()?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(&table.header)
                .map_err(|e| Error::Io(e.to_string()))?;
            for row in &table.rows {
                writer.write_record(row).map_err(|e| Error::Io(e.to_string()))?;
            }
            let body = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            let mut s = format!("# config {}\n", canonical_json(&config_value));
            s.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
            Ok(s)
        }
        OutputFormat::Text => {
            let mut s = format!("command: {}\n", config.command);
            for (k, v) in &config.args {
                s.push_str(&format!("  --{k} {v}\n"));
            }
            s.push_str(&record.text()?);
            Ok(s)
        }
    }
}

impl Report for NormReport {}
impl Report for OperatorNormEstimate {}
impl Report for LemmaReport {}
impl Report for InstanceReport {}
impl Report for SearchResult {}
impl Report for Value {}

impl Report for TransferConstant {
    fn text(&self) -> Result<String> {
        let (p0, p, k, apw) = (self.p0, self.p, self.k, self.ap_norm_value);
        let n = format_number;
        let substituted = match self.regime {
            Regime::Down => format!(
                "2^(({p0}-{p})/{p0}) * phi0((2*{k})^({p0}-{p}) * {apw})",
                p0 = n(p0),
                p = n(p),
                k = n(k),
                apw = n(apw)
            ),
            Regime::Up => format!(
                "2^(({p}-{p0})/(({p}-1)*{p0})) * phi0((2*{k})^(({p}-{p0})/({p}-1)) * {apw}^(({p0}-1)/({p}-1)))",
                p0 = n(p0),
                p = n(p),
                k = n(k),
                apw = n(apw)
            ),
            Regime::Same => format!("phi0({})", n(apw)),
        };
        Ok(format!(
            "regime: {}\nformula: {}\nsubstituted: {}\n           = {} * phi0({}) = {}\nphi0: {}\n",
            serde_json::to_value(self.regime)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            self.formula(),
            substituted,
            n(self.prefactor),
            n(self.phi0_argument),
            n(self.value),
            self.phi0,
        ))
    }
}

/// An RdF result with the iterate dropped when long, unless `full`.
#[derive(Debug, Clone, Serialize)]
pub struct RdfReport {
    #[serde(flatten)]
    pub result: RdfResult,
    #[serde(skip)]
    pub full: bool,
}

impl Report for RdfReport {
    fn to_value(&self) -> Result<Value> {
        let mut v = serde_json::to_value(&self.result).map_err(|e| Error::Parse(e.to_string()))?;
        if !self.full && self.result.iterate.len() > ITERATE_ELIDE_LEN {
            if let Value::Object(map) = &mut v {
                map.remove("iterate");
                map.insert("iterate_elided".into(), Value::Bool(true));
            }
        }
        Ok(v)
    }

    fn table(&self) -> Result<Table> {
        Ok(Table {
            header: vec!["s".into(), "term_norm".into()],
            rows: self
                .result
                .term_norms
                .iter()
                .enumerate()
                .map(|(s, t)| vec![s.to_string(), format_number(*t)])
                .collect(),
        })
    }
}

impl Report for ExtrapolationReport {
    fn table(&self) -> Result<Table> {
        Ok(Table {
            header: ["weight", "ap_norm", "K", "measured", "predicted", "violated"]
                .map(String::from)
                .to_vec(),
            rows: self
                .predictions
                .iter()
                .map(|pr| {
                    vec![
                        pr.weight.clone(),
                        format_number(pr.ap_norm),
                        format_number(pr.k),
                        format_number(pr.measured),
                        format_number(pr.predicted),
                        pr.violated.to_string(),
                    ]
                })
                .collect(),
        })
    }

    fn text(&self) -> Result<String> {
        let mut s = format!(
            "family: {} ({} pairs, {} skipped)\np0 = {}, p = {}, regime {:?}\nphi0: {}\n",
            self.family,
            self.pairs,
            self.skipped_pairs.len(),
            format_number(self.p0),
            format_number(self.p),
            self.regime,
            self.phi0
        );
        for pr in &self.predictions {
            s.push_str(&format!(
                "  {}: measured {} <= predicted {}{}\n",
                pr.weight,
                format_number(pr.measured),
                format_number(pr.predicted),
                if pr.violated { "  VIOLATED" } else { "" }
            ));
        }
        Ok(s)
    }
}

/// Several reports of one kind, e.g. the exponent profile.
#[derive(Debug, Clone, Serialize)]
pub struct ReportList<T> {
    pub items: Vec<T>,
}

impl<T: Serialize> Report for ReportList<T> {
    fn table(&self) -> Result<Table> {
        let mut header: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for item in &self.items {
            let v = serde_json::to_value(item).map_err(|e| Error::Parse(e.to_string()))?;
            let flat = flatten_scalars(&v);
            if header.is_empty() {
                header = flat.iter().map(|(k, _)| k.clone()).collect();
            }
            rows.push(flat.into_iter().map(|(_, v)| v).collect());
        }
        Ok(Table { header, rows })
    }

    fn text(&self) -> Result<String> {
        let mut s = String::new();
        for (i, item) in self.items.iter().enumerate() {
            let v = serde_json::to_value(item).map_err(|e| Error::Parse(e.to_string()))?;
            s.push_str(&format!("[{i}]\n"));
            for (k, val) in flatten_scalars(&v) {
                s.push_str(&format!("  {k}: {val}\n"));
            }
        }
        Ok(s)
    }
}

/// The published examples checked against their printed values.
#[derive(Debug, Clone, Serialize)]
pub struct GoldenReport {
    pub cases: Vec<GoldenCheck>,
    pub all_ok: bool,
}

impl Report for GoldenReport {
    fn table(&self) -> Result<Table> {
        Ok(Table {
            header: ["label", "lhs", "printed_lhs", "rhs", "printed_rhs", "violated", "ok"]
                .map(String::from)
                .to_vec(),
            rows: self
                .cases
                .iter()
                .map(|c| {
                    vec![
                        c.label.clone(),
                        format_number(c.instance.lhs),
                        format_number(c.printed_lhs),
                        format_number(c.instance.rhs),
                        format_number(c.printed_rhs),
                        c.instance.violated.to_string(),
                        c.ok.to_string(),
                    ]
                })
                .collect(),
        })
    }

    fn text(&self) -> Result<String> {
        let mut s = String::new();
        for c in &self.cases {
            s.push_str(&format!(
                "{}: lhs {} (printed {}), rhs {} (printed {}), violated {} -> {}\n",
                c.label,
                format_number(c.instance.lhs),
                format_number(c.printed_lhs),
                format_number(c.instance.rhs),
                format_number(c.printed_rhs),
                c.instance.violated,
                if c.ok { "ok" } else { "MISMATCH" }
            ));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{rdf_iterate, RdfConfig};
    use crate::weights::{ap_norm, Exponent, Weight};
    use crate::Sequence;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-1234.5), "-1234.5");
        assert_eq!(format_number(1.5e-9), "1.5e-9");
        assert_eq!(format_number(f64::NAN), "null");
        let x = 359.5872862932154;
        let back: f64 = format_number(x).parse().unwrap();
        assert!((back - x).abs() <= 1e-12 * x);
    }

    #[test]
    fn canonical_sorts_keys() {
        let v: Value = serde_json::from_str(r#"{"b":1,"a":{"d":0.1,"c":[1,2.5]}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"c":[1,2.5],"d":0.1},"b":1}"#);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert!(matches!(
            "xml".parse::<OutputFormat>(),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn json_is_stable() {
        let w = Weight::power(100, 0.5).unwrap();
        let r = ap_norm(&w, Exponent::new(2.0).unwrap()).unwrap().without_profile();
        let cfg = RunConfig {
            command: "norm ap".into(),
            ..Default::default()
        };
        let a = emit_report(&r, OutputFormat::Json, &cfg).unwrap();
        let b = emit_report(&r, OutputFormat::Json, &cfg).unwrap();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["config"]["command"], "norm ap");
        assert_eq!(v["report"]["kind"], "ap");
    }

    #[test]
    fn rdf_csv_has_one_row_per_term() {
        let w = Weight::constant(2, 1.0).unwrap();
        let h = Sequence::new(vec![1.0, 0.0]).unwrap();
        let r = rdf_iterate(
            &h,
            &w,
            Exponent::new(2.0).unwrap(),
            &RdfConfig::new(1.0, 5, 1e-12).unwrap(),
        )
        .unwrap();
        let terms = r.term_norms.len();
        let rep = RdfReport { result: r, full: false };
        let csv = emit_report(&rep, OutputFormat::Csv, &RunConfig::default()).unwrap();
        let lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], "s,term_norm");
        assert_eq!(lines.len(), terms + 1);
    }

    #[test]
    fn long_iterates_are_elided() {
        let w = Weight::constant(100, 1.0).unwrap();
        let h = Sequence::constant(100, 1.0).unwrap();
        let r = rdf_iterate(&h, &w, Exponent::new(2.0).unwrap(), &RdfConfig::with_k(1.0).unwrap()).unwrap();
        let short = RdfReport {
            result: r.clone(),
            full: false,
        }
        .to_value()
        .unwrap();
        assert!(short.get("iterate").is_none());
        let full = RdfReport { result: r, full: true }.to_value().unwrap();
        assert!(full.get("iterate").is_some());
    }

    #[test]
    fn transfer_text_shows_substitution() {
        let p = |x| Exponent::new(x).unwrap();
        let tc =
            crate::extrapolation::transfer_constant(p(3.0), p(2.0), "identity".parse().unwrap(), 2.0, 1.0).unwrap();
        let text = tc.text().unwrap();
        assert!(text.contains("regime: down"));
        assert!(text.contains("formula:"));
        assert!(text.contains("phi0((2*2)^(3-2) * 1)"));
    }
}
