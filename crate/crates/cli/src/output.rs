//! JSON envelopes, CSV tables, config merging and exit-code classification.

use crate::args::Format;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or out-of-domain request: exit 2.
    Usage(String),
    /// The computation ran but an evaluation failed: exit 1.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "failure: {m}"),
        }
    }
}

impl From<halfspace::Error> for CliError {
    fn from(e: halfspace::Error) -> Self {
        use halfspace::Error as E;
        match e {
            E::CrossCheck(_) | E::Numerical(_) => CliError::Failure(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Result of one command: a JSON summary, an optional CSV series and a verdict.
pub struct Output {
    pub name: String,
    pub summary: Value,
    pub csv: Option<String>,
    /// Extra CSV files written only to the output directory.
    pub extra_csv: Vec<(String, String)>,
    pub default_format: Format,
    pub passed: bool,
}

impl Output {
    pub fn json(name: &str, summary: Value) -> Self {
        Output { name: name.into(), summary, csv: None, extra_csv: vec![], default_format: Format::Json, passed: true }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn passed(mut self, ok: bool) -> Self {
        self.passed = ok;
        self
    }

    pub fn prefer(mut self, f: Format) -> Self {
        self.default_format = f;
        self
    }

    /// Wraps the summary in the versioned envelope.
    pub fn envelope(&self, config: &Value) -> Value {
        json!({
            "schema": format!("halfspace.{}.v{}", self.name.replace(' ', "."), SCHEMA_VERSION),
            "command": self.name,
            "config": config,
            "passed": self.passed,
            "result": self.summary,
        })
    }

    /// Prints the requested format and writes files into `dir` when given.
    pub fn emit(&self, config: &Value, format: Option<Format>, dir: Option<&Path>) -> CliResult<()> {
        let env = self.envelope(config);
        let text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Failure(e.to_string()))?;
        match format.unwrap_or(self.default_format) {
            Format::Json => println!("{text}"),
            Format::Csv => match &self.csv {
                Some(c) => print!("{c}"),
                None => return Err(CliError::Usage(format!("`{}` has no CSV output", self.name))),
            },
        }
        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?;
            let stem = self.name.replace(' ', "-");
            write_file(&dir.join(format!("{stem}.json")), &(text + "\n"))?;
            if let Some(c) = &self.csv {
                write_file(&dir.join(format!("{stem}.csv")), c)?;
            }
            for (name, c) in &self.extra_csv {
                write_file(&dir.join(name), c)?;
            }
        }
        Ok(())
    }
}

fn write_file(path: &PathBuf, content: &str) -> CliResult<()> {
    fs::write(path, content).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

/// Reads a file, `-` meaning stdin.
pub fn read_input(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn parse_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Recursively overlays `patch` onto `base`; keys absent from `base` are rejected.
fn overlay(base: &mut Map<String, Value>, patch: &Map<String, Value>, path: &str) -> CliResult<()> {
    for (k, v) in patch {
        let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match (base.get_mut(k), v) {
            (None, _) => return Err(CliError::Usage(format!("unknown config key `{here}`"))),
            (Some(Value::Object(b)), Value::Object(p)) => overlay(b, p, &here)?,
            (Some(slot), _) => *slot = v.clone(),
        }
    }
    Ok(())
}

/// Applies config-file keys on top of parsed flags. Returns the merged
/// arguments and their JSON form for the output envelope.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Map<String, Value>>) -> CliResult<(T, Value)> {
    let mut v = serde_json::to_value(&args).map_err(|e| CliError::Failure(e.to_string()))?;
    let Some(cfg) = config else {
        return Ok((args, v));
    };
    match &mut v {
        Value::Object(base) => overlay(base, cfg, "")?,
        _ => return Err(CliError::Failure("arguments are not a JSON object".into())),
    }
    let merged: T = serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok((merged, v))
}

/// CSV text from a header and rows, via the `csv` writer.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Failure(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failure(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failure(e.to_string()))
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}
