use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Command, CommandResult, ControlError, Verb};
use crate::dataplane::{Fabric, FabricState, StatsReport};
use crate::dsl::{self, CoverageMap, DataType, Mode, Request};
use crate::epb::{ConfigStore, EngineConfig, TimeoutPolicy};
use crate::harness::{inject_samples, Workload};
use crate::op::OpKind;
use crate::planner::{self, DatapathPlan, FlowMatch, FlowRule, PlanError, RuleSet};
use crate::topology::{NodeId, NodeKind, Topology};

/// How datapath requests are realized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    /// Place operations on in-network engines.
    #[default]
    Flip,
    /// Route raw readings to the destination along shortest paths.
    Baseline,
}

/// Controller state: topology, installed rules, engine configs and the log
/// of state-changing commands.
pub struct Session {
    topo: Arc<Topology>,
    coverage: CoverageMap,
    fabric: Fabric<f64>,
    store: ConfigStore,
    mode: PlanMode,
    log: Vec<Command>,
    plans: Vec<DatapathPlan>,
}

#[derive(Deserialize)]
struct SetConfigArgs {
    engine: NodeId,
    user: String,
    compute: OpKind,
    source: Vec<NodeId>,
    destination: NodeId,
    #[serde(default)]
    rate: Option<f64>,
    #[serde(default)]
    jitter: Option<f64>,
    #[serde(default)]
    datatype: Option<DataType>,
    #[serde(default)]
    on_timeout: TimeoutPolicy,
}

#[derive(Deserialize)]
struct MatchArgs {
    switch: NodeId,
    #[serde(rename = "match")]
    matches: FlowMatch,
}

impl Session {
    /// Engines start with whatever `store` already holds.
    pub fn new(topo: Arc<Topology>, coverage: CoverageMap, store: ConfigStore) -> Result<Self, ControlError> {
        let mut fabric = Fabric::new(Arc::clone(&topo));
        for cfg in store.all() {
            fabric.configure_engine(cfg.clone())?;
        }
        Ok(Session {
            topo,
            coverage,
            fabric,
            store,
            mode: PlanMode::Flip,
            log: Vec::new(),
            plans: Vec::new(),
        })
    }

    pub fn in_memory(topo: Arc<Topology>, coverage: CoverageMap) -> Self {
        Self::new(topo, coverage, ConfigStore::new()).expect("empty store")
    }

    /// Re-executes a command log on a fresh in-memory session.
    pub fn replay(topo: Arc<Topology>, coverage: CoverageMap, log: &[Command]) -> Result<Self, ControlError> {
        let mut s = Self::in_memory(topo, coverage);
        for cmd in log {
            s.dispatch(cmd)?;
            s.log.push(cmd.clone());
        }
        Ok(s)
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn fabric(&self) -> &Fabric<f64> {
        &self.fabric
    }

    pub fn fabric_mut(&mut self) -> &mut Fabric<f64> {
        &mut self.fabric
    }

    pub fn store(&self) -> &ConfigStore {
        &self.store
    }

    pub fn mode(&self) -> PlanMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: PlanMode) {
        self.mode = mode;
    }

    pub fn log(&self) -> &[Command] {
        &self.log
    }

    pub fn plans(&self) -> &[DatapathPlan] {
        &self.plans
    }

    /// Installed rules, engine configs and the persisted config document.
    pub fn snapshot(&self) -> (FabricState, Value) {
        (self.fabric.state(), self.store.to_document())
    }

    /// Runs one command. Successful state-changing commands are logged.
    pub fn execute(&mut self, cmd: &Command) -> CommandResult {
        let r = self.dispatch(cmd);
        if r.is_ok() && cmd.verb.parse::<Verb>().is_ok_and(Verb::mutates) {
            self.log.push(cmd.clone());
        }
        r.into()
    }

    /// Drives `workload` through every installed plan and returns the
    /// resulting counters.
    pub fn simulate(&mut self, workload: &Workload, seed: u64) -> Result<StatsReport, ControlError> {
        for plan in &self.plans {
            let sources: Vec<NodeId> = plan.ingress.keys().cloned().collect();
            let samples = workload.generate(&sources, seed);
            inject_samples(&mut self.fabric, &plan.ingress, &plan.user, &samples).map_err(|e| ControlError::BadArgs(e.to_string()))?;
        }
        self.fabric.run();
        Ok(self.fabric.stats(None))
    }

    fn dispatch(&mut self, cmd: &Command) -> Result<Value, ControlError> {
        let verb: Verb = cmd.verb.parse()?;
        let a = &cmd.args;
        match verb {
            Verb::GetSwitches => Ok(self.get_switches()),
            Verb::GetLinks => Ok(json!(self.topo.links())),
            Verb::GetHosts => self.get_hosts(),
            Verb::GetSwDesc => {
                let sw = self.switch_arg(a)?;
                Ok(json!({
                    "mfr_desc": "flip-sim",
                    "hw_desc": "simulated switch",
                    "sw_desc": env!("CARGO_PKG_VERSION"),
                    "serial_num": self.fabric.dpid(sw.as_str()).unwrap_or(0).to_string(),
                    "dp_desc": sw,
                }))
            }
            Verb::GetFlows => {
                let only = self.optional_switch(a)?;
                let flows: Vec<Value> = self
                    .fabric
                    .tables()
                    .filter(|t| only.as_ref().is_none_or(|s| *s == t.switch))
                    .flat_map(|t| {
                        let dpid = self.fabric.dpid(t.switch.as_str());
                        t.entries.iter().map(move |e| {
                            json!({
                                "switch": e.rule.switch,
                                "dpid": dpid,
                                "match": e.rule.matches,
                                "action": e.rule.action,
                                "packet_count": e.packets,
                            })
                        })
                    })
                    .collect();
                Ok(json!(flows))
            }
            Verb::GetTables => {
                let sw = self.switch_arg(a)?;
                let t = self.fabric.table(sw.as_str())?;
                Ok(json!([{
                    "table_id": 0,
                    "active_count": t.entries.len(),
                    "lookup_count": t.lookups,
                    "matched_count": t.lookups - t.misses,
                }]))
            }
            Verb::GetPorts => {
                let sw = self.switch_arg(a)?;
                let t = self.fabric.table(sw.as_str())?;
                let ports: Vec<Value> = self
                    .ports(&sw)?
                    .into_iter()
                    .map(|(no, peer, delay)| {
                        json!({
                            "port_no": no,
                            "peer": peer,
                            "delay_ms": delay,
                            "rx_packets": t.rx.get(&peer).copied().unwrap_or(0),
                            "tx_packets": t.tx.get(&peer).copied().unwrap_or(0),
                        })
                    })
                    .collect();
                Ok(json!(ports))
            }
            Verb::AddFlow => {
                let rule: FlowRule = parse_args(a)?;
                self.check_flow_conflict(&rule)?;
                let added = self.fabric.install_rules(std::slice::from_ref(&rule))?;
                Ok(json!({ "added": added }))
            }
            Verb::ModFlow => {
                let rule: FlowRule = parse_args(a)?;
                match self.fabric.modify_rules(rule.switch.as_str(), &rule.matches, &rule.action)? {
                    0 => Err(ControlError::NotFound(format!("flow on {}", rule.switch))),
                    n => Ok(json!({ "modified": n })),
                }
            }
            Verb::DelFlow => {
                let m: MatchArgs = parse_args(a)?;
                match self.fabric.remove_rules(m.switch.as_str(), &m.matches)? {
                    0 => Err(ControlError::NotFound(format!("flow on {}", m.switch))),
                    n => Ok(json!({ "removed": n })),
                }
            }
            Verb::DelFlowAll => {
                let removed = match self.optional_switch(a)? {
                    Some(sw) => self.fabric.clear_rules(sw.as_str())?,
                    None => {
                        let all: Vec<NodeId> = self.fabric.tables().map(|t| t.switch.clone()).collect();
                        let mut n = 0;
                        for sw in all {
                            n += self.fabric.clear_rules(sw.as_str())?;
                        }
                        n
                    }
                };
                Ok(json!({ "removed": removed }))
            }
            Verb::GetConfig => {
                let engine = self.engine_arg(a)?;
                Ok(json!(self.store.get(engine.as_str())))
            }
            Verb::GetConfigUser => {
                let engine = self.engine_arg(a)?;
                let user = str_arg(a, "user")?;
                Ok(json!(self.store.get_user(engine.as_str(), user)))
            }
            Verb::SetConfigUser => {
                let s: SetConfigArgs = parse_args(a)?;
                self.require_kind(&s.engine, NodeKind::Engine)?;
                for n in s.source.iter().chain([&s.destination]) {
                    self.topo.node(n.as_str()).map_err(PlanError::from)?;
                }
                let mut cfg = EngineConfig::new(s.engine, &s.user, s.compute, s.source, s.destination);
                cfg.rate_ms = s.rate;
                cfg.jitter_ms = s.jitter;
                cfg.data_type = s.datatype;
                cfg.on_timeout = s.on_timeout;
                cfg.validate()?;
                self.fabric.configure_engine(cfg.clone())?;
                let old = self.store.set(cfg)?;
                Ok(json!({ "replaced": old.is_some() }))
            }
            Verb::SetConfigUserModule => {
                let engine = self.engine_arg(a)?;
                let user = str_arg(a, "user")?;
                let module = str_arg(a, "module")?;
                let value = a.get("value").cloned().unwrap_or(Value::Null);
                let destination = a.get("destination").and_then(Value::as_str);
                let cfg = self.store.set_module(engine.as_str(), user, destination, module, &value)?;
                self.fabric.configure_engine(cfg.clone())?;
                Ok(json!(cfg))
            }
            Verb::DatapathA | Verb::DatapathM => {
                let req = request_arg(verb, a, 1)?;
                self.install_request(&req)
            }
        }
    }

    fn install_request(&mut self, req: &Request) -> Result<Value, ControlError> {
        let plan = match self.mode {
            PlanMode::Flip => planner::plan(req, &self.topo, &self.coverage)?,
            PlanMode::Baseline => {
                let p = planner::plan_baseline(req, &self.topo, &self.coverage)?;
                if let (false, Some(bound_ms)) = (p.admitted, p.delay_bound_ms) {
                    return Err(PlanError::RejectedByDelay {
                        worst_path_delay_ms: p.worst_path_delay_ms,
                        bound_ms,
                    }
                    .into());
                }
                p
            }
        };
        // Validate everything before touching the fabric.
        let installed: Vec<FlowRule> = self.fabric.tables().flat_map(|t| t.rules().cloned()).collect();
        let mut merged = RuleSet::from_rules(&installed).map_err(|e| ControlError::Conflict(e.to_string()))?;
        merged
            .extend(&plan.rules)
            .map_err(|e| ControlError::Conflict(e.to_string()))?;
        for cfg in &plan.engine_configs {
            let (engine, user, dest) = cfg.key();
            let clash = self
                .store
                .get_user(engine.as_str(), user)
                .iter()
                .any(|c| c.destination == *dest && c != cfg);
            if clash {
                return Err(ControlError::Conflict(format!(
                    "{engine} already computes a different result for {user} toward {dest}"
                )));
            }
        }
        let added = self.fabric.install_rules(&plan.rules)?;
        for cfg in &plan.engine_configs {
            self.fabric.configure_engine(cfg.clone())?;
            self.store.set(cfg.clone())?;
        }
        let mut body = serde_json::to_value(&plan).expect("plans serialize");
        body["installed_rules"] = json!(added);
        self.plans.push(plan);
        Ok(body)
    }

    fn check_flow_conflict(&self, rule: &FlowRule) -> Result<(), ControlError> {
        let t = self.fabric.table(rule.switch.as_str())?;
        let clash = t.rules().find(|r| {
            r.matches.final_destination == rule.matches.final_destination
                && r.action != rule.action
                && !r.matches.sources.is_disjoint(&rule.matches.sources)
        });
        match clash {
            Some(r) => Err(ControlError::Conflict(format!(
                "{} already sends traffic for {} elsewhere ({:?})",
                rule.switch, rule.matches.final_destination, r.action
            ))),
            None => Ok(()),
        }
    }

    fn get_switches(&self) -> Value {
        let switches: Vec<Value> = self
            .topo
            .nodes_of(NodeKind::Switch)
            .map(|sw| {
                let ports: Vec<Value> = self
                    .ports(sw)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(no, peer, delay)| json!({ "port_no": no, "peer": peer, "delay_ms": delay }))
                    .collect();
                json!({
                    "dpid": self.fabric.dpid(sw.as_str()),
                    "name": sw,
                    "engine": self.topo.engine_of(sw.as_str()),
                    "ports": ports,
                })
            })
            .collect();
        json!(switches)
    }

    fn get_hosts(&self) -> Result<Value, ControlError> {
        let mut hosts = Vec::new();
        for (n, kind) in self.topo.nodes() {
            if kind != NodeKind::BaseStation && !kind.is_host() {
                continue;
            }
            let sw = self.topo.connected_switch(n.as_str()).map_err(PlanError::from)?;
            let port = self.ports(sw)?.into_iter().find(|(_, p, _)| p == n).map(|(no, _, _)| no);
            hosts.push(json!({ "id": n, "kind": kind, "switch": sw, "port": port }));
        }
        Ok(json!(hosts))
    }

    /// Ports numbered from 1 in neighbor-id order.
    fn ports(&self, sw: &NodeId) -> Result<Vec<(u32, NodeId, f64)>, ControlError> {
        let mut n = self.topo.neighbors(sw.as_str()).map_err(PlanError::from)?;
        n.sort_by(|a, b| a.0.cmp(b.0));
        Ok(n.into_iter()
            .enumerate()
            .map(|(i, (peer, d))| (i as u32 + 1, peer.clone(), d))
            .collect())
    }

    fn switch_arg(&self, a: &Value) -> Result<NodeId, ControlError> {
        self.optional_switch(a)?
            .ok_or_else(|| ControlError::BadArgs("expected \"switch\" or \"dpid\"".into()))
    }

    fn optional_switch(&self, a: &Value) -> Result<Option<NodeId>, ControlError> {
        if let Some(d) = a.get("dpid").and_then(Value::as_u64) {
            return self
                .fabric
                .switch_by_dpid(d)
                .cloned()
                .map(Some)
                .ok_or_else(|| ControlError::NotFound(format!("dpid {d}")));
        }
        match a.get("switch").and_then(Value::as_str) {
            Some(s) => {
                let sw = self.topo.node(s).map_err(PlanError::from)?.clone();
                self.require_kind(&sw, NodeKind::Switch)?;
                Ok(Some(sw))
            }
            None => Ok(None),
        }
    }

    fn engine_arg(&self, a: &Value) -> Result<NodeId, ControlError> {
        let e = self.topo.node(str_arg(a, "engine")?).map_err(PlanError::from)?.clone();
        self.require_kind(&e, NodeKind::Engine)?;
        Ok(e)
    }

    fn require_kind(&self, n: &NodeId, kind: NodeKind) -> Result<(), ControlError> {
        match self.topo.kind(n.as_str()) {
            Some(k) if k == kind => Ok(()),
            Some(k) => Err(ControlError::BadArgs(format!("{n} is a {k:?}, expected {kind:?}"))),
            None => Err(ControlError::NotFound(n.to_string())),
        }
    }
}

fn parse_args<T: serde::de::DeserializeOwned>(a: &Value) -> Result<T, ControlError> {
    T::deserialize(a).map_err(|e| ControlError::BadArgs(e.to_string()))
}

fn str_arg<'a>(a: &'a Value, key: &str) -> Result<&'a str, ControlError> {
    a.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ControlError::BadArgs(format!("missing string argument {key:?}")))
}

/// The request text of a datapath command: a bare string or `{"request": ..}`,
/// with or without the `datapath_x(...)` wrapper.
fn request_arg(verb: Verb, a: &Value, line: usize) -> Result<Request, ControlError> {
    let text = match a {
        Value::String(s) => s.as_str(),
        _ => str_arg(a, "request")?,
    };
    let text = text.trim();
    let req = if text.starts_with("datapath_") {
        dsl::parse_request_at(text, line)?
    } else {
        dsl::parse_request_at(&format!("{verb}({text})"), line)?
    };
    let expected = match verb {
        Verb::DatapathM => Mode::Manual,
        _ => Mode::Automated,
    };
    if req.mode != expected {
        return Err(ControlError::BadArgs(format!("{verb} given a {:?} request", req.mode)));
    }
    Ok(req)
}

/// Thread-safe handle on a session.
pub struct Controller {
    session: Mutex<Session>,
}

impl Controller {
    pub fn new(session: Session) -> Self {
        Controller {
            session: Mutex::new(session),
        }
    }

    pub fn execute(&self, cmd: &Command) -> CommandResult {
        self.lock().execute(cmd)
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn into_inner(self) -> Session {
        self.session.into_inner().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptLine {
    pub line: usize,
    pub command: Command,
    pub result: CommandResult,
}

/// Runs a script: one command per line, `#` comments. A line is either a
/// DSL request (`datapath_a(...)`, `datapath_m(...)`) or a verb optionally
/// followed by JSON arguments. Stops after the first failure unless
/// `keep_going`.
pub fn run_script(session: &mut Session, path: impl AsRef<Path>, keep_going: bool) -> Result<Vec<ScriptLine>, ControlError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (command, result) = match parse_script_line(l, line) {
            Ok(cmd) => {
                let r = session.execute(&cmd);
                (cmd, r)
            }
            Err((cmd, e)) => (cmd, CommandResult::from(Err(e))),
        };
        let failed = !result.is_ok();
        out.push(ScriptLine { line, command, result });
        if failed && !keep_going {
            break;
        }
    }
    Ok(out)
}

fn parse_script_line(l: &str, line: usize) -> Result<Command, (Command, ControlError)> {
    for verb in [Verb::DatapathA, Verb::DatapathM] {
        if l.starts_with(&format!("{verb}(")) {
            let cmd = Command::new(verb, Value::String(l.to_owned()));
            return match request_arg(verb, &cmd.args, line) {
                Ok(_) => Ok(cmd),
                Err(e) => Err((cmd, e)),
            };
        }
    }
    let (verb, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
    let cmd = Command {
        verb: verb.to_owned(),
        args: Value::Null,
    };
    let args = match rest.trim() {
        "" => Value::Null,
        json => serde_json::from_str(json).map_err(|e| (cmd.clone(), ControlError::BadArgs(format!("line {line}: {e}"))))?,
    };
    Ok(Command { args, ..cmd })
}
