//! Northbound control surface: a command vocabulary over one session,
//! a mutex-guarded controller, a line-delimited JSON socket server and a
//! script runner.

mod server;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use server::{request, serve, Server};
pub use session::{run_script, Controller, PlanMode, ScriptLine, Session};

use crate::dataplane::DataplaneError;
use crate::dsl::DslError;
use crate::epb::EpbError;
use crate::planner::PlanError;

macro_rules! verbs {
    ($($v:ident => $s:literal, $mutates:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Verb { $($v),* }

        impl Verb {
            pub const ALL: &'static [Verb] = &[$(Verb::$v),*];

            pub fn name(self) -> &'static str {
                match self { $(Verb::$v => $s),* }
            }

            /// Whether the verb changes session state (and so is logged).
            pub fn mutates(self) -> bool {
                match self { $(Verb::$v => $mutates),* }
            }
        }
    };
}

verbs! {
    GetSwitches => "getswitches", false;
    GetLinks => "getlinks", false;
    GetHosts => "gethosts", false;
    GetSwDesc => "getswdesc", false;
    GetFlows => "getflows", false;
    GetTables => "gettables", false;
    GetPorts => "getports", false;
    AddFlow => "addflow", true;
    ModFlow => "modflow", true;
    DelFlow => "delflow", true;
    DelFlowAll => "delflowall", true;
    GetConfig => "getconfig", false;
    GetConfigUser => "getconfig/user", false;
    SetConfigUser => "setconfig/user", true;
    SetConfigUserModule => "setconfig/user/module", true;
    DatapathA => "datapath_a", true;
    DatapathM => "datapath_m", true;
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verb {
    type Err = ControlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| ControlError::UnknownVerb(s.to_owned()))
    }
}

/// One northbound call. `args` is an object, or a bare string for the
/// datapath verbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub verb: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

impl Command {
    pub fn new(verb: Verb, args: Value) -> Self {
        Command {
            verb: verb.name().to_owned(),
            args,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CommandResult {
    Ok { body: Value },
    Error { code: String, message: String },
}

impl CommandResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, CommandResult::Ok { .. })
    }

    pub fn body(&self) -> Option<&Value> {
        match self {
            CommandResult::Ok { body } => Some(body),
            CommandResult::Error { .. } => None,
        }
    }

    pub fn code(&self) -> Option<&str> {
        match self {
            CommandResult::Ok { .. } => None,
            CommandResult::Error { code, .. } => Some(code),
        }
    }
}

impl From<Result<Value, ControlError>> for CommandResult {
    fn from(r: Result<Value, ControlError>) -> Self {
        match r {
            Ok(body) => CommandResult::Ok { body },
            Err(e) => CommandResult::Error {
                code: e.code().to_owned(),
                message: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error(transparent)]
    Epb(#[from] EpbError),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ControlError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ControlError::UnknownVerb(_) => "unknown_verb",
            ControlError::BadArgs(_) => "bad_args",
            ControlError::Dsl(e) => dsl_code(e),
            ControlError::Plan(e) => match e {
                PlanError::Dsl(e) => dsl_code(e),
                PlanError::Topology(_) => "unknown_node",
                PlanError::Placement(_) => "placement",
                PlanError::Compile(_) => "compile",
                PlanError::RejectedByDelay { .. } => "rejected_by_delay",
                PlanError::Epb(_) => "invalid_config",
            },
            ControlError::Dataplane(DataplaneError::UnknownSwitch(_)) => "unknown_switch",
            ControlError::Dataplane(DataplaneError::UnknownNode(_)) => "unknown_node",
            ControlError::Dataplane(_) => "invalid_rule",
            ControlError::Epb(EpbError::NotFound(_)) => "not_found",
            ControlError::Epb(_) => "invalid_config",
            ControlError::Conflict(_) => "conflict",
            ControlError::NotFound(_) => "not_found",
            ControlError::Io(_) => "io",
        }
    }
}

fn dsl_code(e: &DslError) -> &'static str {
    match e {
        DslError::Syntax { .. } => "syntax",
        DslError::UnknownOperation { .. } => "unknown_operation",
        DslError::Arity { .. } => "arity",
        DslError::UnknownNode(_) => "unknown_node",
        _ => "invalid_request",
    }
}
