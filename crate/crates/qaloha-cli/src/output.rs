//! Output rendering: CSV and JSON documents with a provenance line, written
//! to `--output` or stdout. Identical inputs always produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Provenance recorded in every output: a hash over the config bytes and the
/// effective command line, plus the seed in force.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub hash: String,
    pub seed: u64,
    /// Extra `key=value` pairs appended to the CSV comment line.
    pub extra: Vec<(String, String)>,
}

impl Provenance {
    /// Hash the raw config bytes together with a canonical rendering of the
    /// subcommand and the flag overrides that affect the output.
    pub fn new(config_bytes: &[u8], effective_args: &str, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(config_bytes);
        h.update([0u8]);
        h.update(effective_args.as_bytes());
        let hash = h
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Provenance {
            hash,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: String) -> Self {
        self.extra.push((key.to_string(), value));
        self
    }

    fn comment(&self) -> String {
        let mut line = format!("# config_hash={} seed={}", self.hash, self.seed);
        for (k, v) in &self.extra {
            line.push_str(&format!(" {k}={v}"));
        }
        line
    }
}

/// Format a float for CSV/JSON-adjacent text output: shortest round-trip
/// decimal, with `inf` as the sentinel for diverging quantities and `nan`
/// for undefined ones.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

/// `1`/`0` flag cell.
pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Render a CSV document: provenance comment, header, then rows.
pub fn render_csv(
    prov: &Provenance,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", prov.comment())?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv rendering failed: {e}")))
}

/// Render a JSON object with `config_hash` and `seed` merged into the top
/// level. Keys are emitted in sorted order, so reruns are byte-identical.
pub fn render_json(prov: &Provenance, payload: Value) -> Result<Vec<u8>, CliError> {
    let mut obj = match payload {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".to_string(), other);
            m
        }
    };
    obj.insert("config_hash".to_string(), Value::String(prov.hash.clone()));
    obj.insert("seed".to_string(), Value::from(prov.seed));
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write the document to `--output` or stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Config {
            path: p.display().to_string(),
            msg: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_render_as_expected() {
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn csv_has_comment_then_header() {
        let prov = Provenance::new(b"{}", "region", 7);
        let bytes = render_csv(&prov, &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        let comment = lines.next().unwrap();
        assert!(comment.starts_with("# config_hash="));
        assert!(comment.contains(" seed=7"));
        assert_eq!(lines.next().unwrap(), "a,b");
        assert_eq!(lines.next().unwrap(), "1,2");
    }

    #[test]
    fn provenance_distinguishes_args_and_config() {
        let a = Provenance::new(b"{}", "region", 0).hash;
        let b = Provenance::new(b"{}", "region3", 0).hash;
        let c = Provenance::new(b"{ }", "region", 0).hash;
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn json_carries_provenance_keys() {
        let prov = Provenance::new(b"", "optimize-alpha", 3);
        let bytes = render_json(&prov, serde_json::json!({"alpha_tilde": 0.5})).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["seed"], 3);
        assert!(v["config_hash"].as_str().unwrap().len() == 64);
        assert_eq!(v["alpha_tilde"], 0.5);
    }
}
