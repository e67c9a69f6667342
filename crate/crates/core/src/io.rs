//! Problem files and result documents.
//!
//! A problem file is JSON:
//!
//! ```json
//! {
//!   "board": { "width": 100.0, "height": 80.0 },
//!   "grid_resolution": 64,
//!   "nets": [ { "label": "VDD", "pins": [[10.0, 12.5], [40.0, 12.5]] } ]
//! }
//! ```
//!
//! Coordinates are physical; they are normalized on load and the originals
//! are kept, so writing a loaded problem back reproduces the same numbers.
//! `grid_resolution` may be omitted and defaults to
//! [`DEFAULT_GRID_RESOLUTION`](crate::model::DEFAULT_GRID_RESOLUTION).
//!
//! Every command writes a [`ResultDocument`]: the echoed inputs, the full
//! configuration and seeds, headline metrics, the typed result payload and
//! a separate timing block. Wall-clock values are the only
//! non-reproducible fields; [`mask_timing`] blanks them for comparisons.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{normalize_problem, BoardExtent, Problem, RawNet, DEFAULT_GRID_RESOLUTION};

/// Version of the result-document layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Keys whose values depend on wall-clock time.
pub const TIMING_KEYS: &[&str] = &["timing", "wall_time", "wall_time_gomlp", "wall_time_astar"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetRecord {
    pub label: String,
    pub pins: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub board: BoardExtent,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    pub nets: Vec<NetRecord>,
}

fn default_grid_resolution() -> usize {
    DEFAULT_GRID_RESOLUTION
}

impl ProblemFile {
    pub fn from_problem(problem: &Problem) -> Self {
        Self {
            board: problem.board,
            grid_resolution: problem.grid_resolution,
            nets: problem
                .raw_nets()
                .into_iter()
                .map(|r| NetRecord {
                    label: r.label,
                    pins: r.pins,
                })
                .collect(),
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let raw: Vec<RawNet> = self
            .nets
            .iter()
            .map(|n| RawNet {
                label: n.label.clone(),
                pins: n.pins.clone(),
            })
            .collect();
        normalize_problem(&raw, self.board, self.grid_resolution)
    }
}

/// Deserializes JSON, reporting the failing field path with line and column.
pub fn from_json_str<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            context: if path == "." { what.to_string() } else { format!("{what} field `{path}`") },
            message: inner.to_string(),
        }
    })
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    from_json_str::<ProblemFile>(text, "problem")?.to_problem()
}

pub fn serialize_problem(problem: &Problem) -> String {
    to_pretty_json(&ProblemFile::from_problem(problem))
}

pub fn read_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)?;
    from_json_str::<ProblemFile>(&text, &path.display().to_string())?.to_problem()
}

pub fn write_problem(path: &Path, problem: &Problem) -> Result<()> {
    fs::write(path, serialize_problem(problem))?;
    Ok(())
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data always serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Gomlp,
    Astar,
    Multilayer,
    Problems,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub kind: ResultKind,
    /// The command line, minus the program name.
    pub command: Vec<String>,
    /// Echo of the input problem, when the command had one.
    pub problem: Option<ProblemFile>,
    pub config: Value,
    pub metrics: Value,
    pub result: Value,
    pub timing: BTreeMap<String, f64>,
}

impl ResultDocument {
    pub fn new<C: Serialize, M: Serialize, R: Serialize>(
        kind: ResultKind,
        command: Vec<String>,
        problem: Option<&Problem>,
        config: &C,
        metrics: &M,
        result: &R,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            command,
            problem: problem.map(ProblemFile::from_problem),
            config: to_value(config),
            metrics: to_value(metrics),
            result: to_value(result),
            timing: BTreeMap::new(),
        }
    }

    pub fn with_timing(mut self, key: &str, seconds: f64) -> Self {
        self.timing.insert(key.to_string(), seconds);
        self
    }

    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }

    /// The payload as its typed result.
    pub fn payload<T: DeserializeOwned>(&self) -> Result<T> {
        from_json_str(&self.result.to_string(), "result payload")
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data always serializes")
}

/// Parses a result document and checks it against the current schema,
/// including that the payload has the shape its kind declares.
pub fn validate_document(text: &str) -> Result<ResultDocument> {
    let doc: ResultDocument = from_json_str(text, "result document")?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            context: "result document field `schema_version`".into(),
            message: format!("unsupported version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        });
    }
    match doc.kind {
        ResultKind::Gomlp => doc.payload::<crate::gomlp::GomlpResult>().map(drop)?,
        ResultKind::Astar => doc.payload::<crate::astar::AstarResult>().map(drop)?,
        ResultKind::Multilayer => doc.payload::<crate::multilayer::MultilayerResult>().map(drop)?,
        ResultKind::Problems => doc.payload::<Vec<String>>().map(drop)?,
        ResultKind::Benchmark => doc.payload::<crate::bench::BenchmarkReport>().map(drop)?,
    }
    if let Some(p) = &doc.problem {
        p.to_problem()?;
    }
    Ok(doc)
}

pub fn read_document(path: &Path) -> Result<ResultDocument> {
    validate_document(&fs::read_to_string(path)?)
}

/// Replaces every timing-dependent value with `null`, at any depth.
pub fn mask_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if TIMING_KEYS.contains(&k.as_str()) {
                    *v = Value::Null;
                } else {
                    mask_timing(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(mask_timing),
        _ => {}
    }
}

/// A document's JSON text with timing masked, for byte comparison.
pub fn masked_json(text: &str) -> Result<String> {
    let mut v: Value = from_json_str(text, "result document")?;
    mask_timing(&mut v);
    Ok(to_pretty_json(&v))
}
