use crate::Format;
use momentgap::Error;
use serde_json::{json, Value};
use std::io::Write;

/// A CSV cell; floats use the shortest representation that parses back to the same bits.
pub enum Cell {
    Int(u128),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => num(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as u128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Text(v.to_string())
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub struct Report {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub result: Value,
    pub table: Table,
}

impl Report {
    fn header(&self) -> Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
        })
    }

    pub fn emit(&self, format: Format, out: &mut impl Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                let doc = json!({ "header": self.header(), "result": self.result });
                serde_json::to_writer_pretty(&mut *out, &doc)?;
                writeln!(out)
            }
            Format::Csv => {
                writeln!(out, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
                writeln!(out, "# command={}", self.command)?;
                if let Some(seed) = self.seed {
                    writeln!(out, "# seed={seed}")?;
                }
                if let Value::Object(map) = &self.params {
                    for (k, v) in map {
                        match v {
                            Value::String(s) => writeln!(out, "# {k}={s}")?,
                            other => writeln!(out, "# {k}={other}")?,
                        }
                    }
                }
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(&self.table.columns)?;
                for row in &self.table.rows {
                    w.write_record(row.iter().map(Cell::render))?;
                }
                w.flush()
            }
        }
    }
}

pub fn error_json(e: &Error) -> String {
    let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
    match e {
        Error::TooLarge { dim, limit } => {
            body["dim"] = json!(dim.to_string());
            body["limit"] = json!(limit.to_string());
        }
        Error::Convergence { iterations, estimate, residual } => {
            body["iterations"] = json!(iterations);
            body["estimate"] = json!(estimate);
            body["residual"] = json!(residual);
        }
        Error::Disconnected { vertex } => body["vertex"] = json!(vertex),
        _ => {}
    }
    json!({ "error": body }).to_string()
}
