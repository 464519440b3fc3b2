use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::op::OpKind;
use crate::topology::{is_valid_id, NodeId};

/// User name applied when a request omits `user<-...`.
pub const DEFAULT_USER: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Automated,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Scalar,
    Vector,
    Matrix,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Scalar => "scalar",
            DataType::Vector => "vector",
            DataType::Matrix => "matrix",
        }
    }
}

/// A leaf of a request expression, kept symbolic until expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceRef {
    Node(NodeId),
    /// `bs1:bs10`, inclusive on both ends.
    Range { prefix: String, from: u64, to: u64 },
    /// `sw4[engine]`
    EngineOf(NodeId),
    /// `"Seoul"`
    Region(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Op { kind: OpKind, args: Vec<Expr> },
    Source(SourceRef),
}

impl Expr {
    pub fn op_count(&self) -> usize {
        match self {
            Expr::Op { args, .. } => 1 + args.iter().map(Expr::op_count).sum::<usize>(),
            Expr::Source(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Node(NodeId),
    EngineOf(NodeId),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_type: Option<DataType>,
}

impl Requirements {
    pub fn is_empty(&self) -> bool {
        *self == Requirements::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub mode: Mode,
    pub expr: Expr,
    pub destination: Endpoint,
    /// Manual mode only.
    pub switch: Option<NodeId>,
    pub requirements: Requirements,
    pub user: String,
}

fn write_word(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    if is_valid_id(s) {
        f.write_str(s)
    } else {
        write!(f, "\"{s}\"")
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceRef::Node(n) => write!(f, "{n}"),
            SourceRef::Range { prefix, from, to } => write!(f, "{prefix}{from}:{prefix}{to}"),
            SourceRef::EngineOf(sw) => write!(f, "{sw}[engine]"),
            SourceRef::Region(r) => write!(f, "\"{r}\""),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Source(s) => write!(f, "{s}"),
            Expr::Op { kind, args } => {
                write!(f, "{kind}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_char(')')
            }
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Node(n) => write!(f, "{n}"),
            Endpoint::EngineOf(sw) => write!(f, "{sw}[engine]"),
        }
    }
}

impl fmt::Display for Requirements {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if let Some(d) = self.delay_ms {
            parts.push(format!("delay={d}ms"));
        }
        if let Some(r) = self.rate_ms {
            parts.push(format!("rate={r}ms"));
        }
        if let Some(j) = self.jitter_ms {
            parts.push(format!("jitter={j}ms"));
        }
        if let Some(c) = &self.coverage {
            let mut s = String::from("coverage=");
            write_word(&mut s, c)?;
            parts.push(s);
        }
        if let Some(t) = self.data_type {
            parts.push(format!("datatype={}", t.name()));
        }
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Canonical single-line form; parsing it yields an equal request.
impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Automated => write!(f, "datapath_a({}", self.expr)?,
            Mode::Manual => write!(f, "datapath_m({}", self.expr)?,
        }
        if let Some(sw) = &self.switch {
            write!(f, ",switch<-{sw}")?;
        }
        write!(f, ",destination<-{}", self.destination)?;
        if !self.requirements.is_empty() {
            write!(f, ",requirement<-{}", self.requirements)?;
        }
        if self.user != DEFAULT_USER {
            f.write_str(",user<-")?;
            write_word(f, &self.user)?;
        }
        f.write_char(')')
    }
}
