//! Record envelopes and the ndjson / CSV writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One output row; keys keep their insertion order.
pub type Record = Map<String, Value>;

/// Builds a record from `(key, value)` pairs.
#[macro_export]
macro_rules! record {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = $crate::output::Record::new();
        $(m.insert($k.to_string(), serde_json::json!($v));)*
        m
    }};
}

fn envelope(cfg: &RunConfig, body: &Record) -> Record {
    let mut m = Record::new();
    m.insert("version".into(), Value::from(VERSION));
    m.insert("command".into(), Value::from(cfg.command.clone()));
    for (k, v) in body {
        m.insert(k.clone(), v.clone());
    }
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_records(cfg: &RunConfig, records: &[Record]) -> io::Result<()> {
    let sink: Box<dyn Write> = match &cfg.output.path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    let rows: Vec<Record> = records.iter().map(|r| envelope(cfg, r)).collect();
    match cfg.output.format {
        Format::Ndjson => {
            for r in &rows {
                serde_json::to_writer(&mut sink, r)?;
                sink.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            if let Some(first) = rows.first() {
                w.write_record(first.keys())?;
            }
            for r in &rows {
                w.write_record(r.values().map(csv_cell))?;
            }
            w.flush()?;
        }
    }
    sink.flush()
}
