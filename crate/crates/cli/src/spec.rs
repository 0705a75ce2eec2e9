//! JSON system specs.
//!
//! ```json
//! {
//!   "n": 3, "d": 1,
//!   "A": [[0.5]], "F": [[1.0]],
//!   "arcs": [{"from": 1, "to": 2, "w": 1.0}, {"from": 1, "to": 3}],
//!   "sim": {"dt": 0.001, "t_end": 5.0, "seed": 42}
//! }
//! ```
//!
//! The graph is given either as `W` (row = receiving agent, so `W[i][j]` is
//! the weight agent `i+1` puts on agent `j+1`) or as an arc list; arc weights
//! default to 1. Unknown keys are rejected.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use swarm_core::graph::GraphError;
use swarm_core::{Arc, WeightedDigraph};
use thiserror::Error;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 5.0;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Dimension { path: String, message: String },
    #[error("exactly one graph form (W or arcs) must be given")]
    GraphForm,
    #[error("{path}: {source}")]
    Graph { path: String, source: GraphError },
    #[error("{path}: {message}")]
    Value { path: String, message: String },
}

impl SpecError {
    /// JSON path of the offending field, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            SpecError::Schema { path, .. }
            | SpecError::Dimension { path, .. }
            | SpecError::Graph { path, .. }
            | SpecError::Value { path, .. } => Some(path),
            SpecError::Io { .. } | SpecError::GraphForm => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    from: usize,
    to: usize,
    #[serde(default = "unit_weight")]
    w: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt: Option<f64>,
    t_end: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: usize,
    d: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    w: Option<Vec<Vec<f64>>>,
    arcs: Option<Vec<RawArc>>,
    x0: Option<Vec<f64>>,
    sim: Option<RawSim>,
    #[allow(dead_code)]
    note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

/// A validated system.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub d: usize,
    pub a: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub graph: WeightedDigraph,
    pub x0: Option<DVector<f64>>,
    pub sim: SimSettings,
}

fn square(rows: &[Vec<f64>], d: usize, name: &str) -> Result<DMatrix<f64>, SpecError> {
    if rows.len() != d {
        return Err(SpecError::Dimension {
            path: name.into(),
            message: format!("expected {d} rows, got {}", rows.len()),
        });
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(SpecError::Dimension {
                path: format!("{name}[{i}]"),
                message: format!("expected {d} entries, got {}", r.len()),
            });
        }
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return Err(SpecError::Value {
                path: format!("{name}[{i}][{j}]"),
                message: "entry must be finite".into(),
            });
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn positive_finite(v: f64, path: &str) -> Result<f64, SpecError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(SpecError::Value {
            path: path.into(),
            message: format!("must be positive and finite, got {v}"),
        })
    }
}

pub fn parse_spec(text: &str) -> Result<SystemSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SpecError::Schema {
            message: format!("{path}: {}", e.inner()),
            path,
        }
    })?;

    if raw.n == 0 {
        return Err(SpecError::Value {
            path: "n".into(),
            message: "need at least one agent".into(),
        });
    }
    if raw.d == 0 {
        return Err(SpecError::Value {
            path: "d".into(),
            message: "state dimension must be positive".into(),
        });
    }
    let a = square(&raw.a, raw.d, "A")?;
    let f = square(&raw.f, raw.d, "F")?;

    let graph = match (&raw.w, &raw.arcs) {
        (Some(w), None) => {
            let m = square(w, raw.n, "W")?;
            WeightedDigraph::from_adjacency(&m).map_err(|source| SpecError::Graph {
                path: "W".into(),
                source,
            })?
        }
        (None, Some(arcs)) => {
            let arcs: Vec<Arc> = arcs.iter().map(|r| Arc::new(r.from, r.to, r.w)).collect();
            WeightedDigraph::new(raw.n, &arcs).map_err(|source| SpecError::Graph {
                path: "arcs".into(),
                source,
            })?
        }
        _ => return Err(SpecError::GraphForm),
    };

    let x0 = match raw.x0 {
        None => None,
        Some(v) => {
            if v.len() != raw.n * raw.d {
                return Err(SpecError::Dimension {
                    path: "x0".into(),
                    message: format!("expected n·d = {} entries, got {}", raw.n * raw.d, v.len()),
                });
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(SpecError::Value {
                    path: format!("x0[{i}]"),
                    message: "entry must be finite".into(),
                });
            }
            Some(DVector::from_vec(v))
        }
    };

    let raw_sim = raw.sim.unwrap_or_default();
    let dt = positive_finite(raw_sim.dt.unwrap_or(DEFAULT_DT), "sim.dt")?;
    let t_end = raw_sim.t_end.unwrap_or(DEFAULT_T_END);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SpecError::Value {
            path: "sim.t_end".into(),
            message: format!("must be nonnegative and finite, got {t_end}"),
        });
    }
    Ok(SystemSpec {
        n: raw.n,
        d: raw.d,
        a,
        f,
        graph,
        x0,
        sim: SimSettings {
            dt,
            t_end,
            seed: raw_sim.seed.unwrap_or(DEFAULT_SEED),
        },
    })
}

pub fn load_spec(path: &Path) -> Result<SystemSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text)
}
