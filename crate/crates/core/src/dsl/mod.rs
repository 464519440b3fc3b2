//! Request language: parsing, source expansion and task graphs.

mod ast;
mod coverage;
mod parser;
mod taskgraph;

use thiserror::Error;

pub use ast::{DataType, Endpoint, Expr, Mode, Request, Requirements, SourceRef, DEFAULT_USER};
pub use coverage::{translate_coverage, CoverageMap};
pub use parser::{parse_request, parse_request_at, MAX_JITTER_MS};
pub use taskgraph::{expand_sources, TaskGraph, TaskKind, TaskNode};

use crate::op::OpKind;
use crate::topology::NodeKind;

fn position(at: &Option<(usize, usize)>) -> String {
    at.map(|(l, c)| format!(" at {l}:{c}")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown operation `{name}` at {line}:{col}")]
    UnknownOperation { name: String, line: usize, col: usize },
    #[error("`{op}` needs at least two operands{}", position(.at))]
    Arity {
        op: OpKind,
        at: Option<(usize, usize)>,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown coverage region {0:?}")]
    UnknownRegion(String),
    #[error("range `{0}` is empty")]
    EmptyRange(String),
    #[error("coverage region {0:?} has no base stations")]
    EmptyRegion(String),
    #[error("source `{0}` appears more than once")]
    DuplicateSource(String),
    #[error("`{node}` is a {kind} and cannot be used as {role}")]
    WrongKind {
        node: String,
        kind: NodeKind,
        role: &'static str,
    },
    #[error("malformed coverage map: {0}")]
    Coverage(String),
}
