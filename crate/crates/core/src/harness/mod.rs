//! Experiment harness: the 12-switch evaluation topology, the nine
//! comparison requests, a seeded workload, an oracle evaluator that audits
//! every delivered result, and CSV/JSON report export.

mod workload;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::dataplane::{DataplaneError, Delivery, Fabric, PacketCounters, PacketRecord, StatsReport};
use crate::dsl::{self, CoverageMap, Request, TaskGraph};
use crate::epb::Payload;
use crate::op::OpKind;
use crate::planner::{self, DatapathPlan, PlanError};
use crate::scalar::Scalar;
use crate::topology::{NodeId, Topology};

pub use workload::{Sample, ValueModel, Workload};

pub const SMALL_JSON: &str = include_str!("../../data/small.json");
pub const EXPERIMENT_JSON: &str = include_str!("../../data/experiment.json");

/// The comparison requests R1..R9, in order.
pub const R1_R9: [&str; 9] = [
    "datapath_a(max(bs1:bs10),destination<-user)",
    "datapath_a(avg(max(bs1:bs10),max(bs11:bs20)),destination<-user)",
    "datapath_a(avg(min(bs21:bs30),min(bs31:bs40)),destination<-user)",
    "datapath_a(sum(avg(bs21:bs30),avg(bs51:bs60)),destination<-user)",
    "datapath_a(sum(max(bs1:bs10),max(bs11:bs20),max(bs41:bs50)),destination<-user)",
    "datapath_a(sum(max(bs1:bs10),max(bs11:bs20),min(bs21:bs30),min(bs31:bs40)),destination<-user)",
    "datapath_a(max(max(bs1:bs10),min(bs31:bs40),max(bs41:bs50),min(bs56:bs60)),destination<-user)",
    "datapath_a(max(avg(bs56:bs60),avg(bs61:65),max(min(bs66:bs70),min(bs71:bs75)),max(bs76:bs78)),destination<-user)",
    "datapath_a(max(avg(bs1:bs10),avg(bs11:bs20),max(min(bs21:bs30),min(bs31:bs40)),max(bs41:bs50)),destination<-user)",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Dsl(#[from] dsl::DslError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error("audit failed for {request}: {detail}")]
    Audit { request: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five-switch example topology.
pub fn small_topology() -> Topology {
    Topology::from_json(SMALL_JSON).expect("bundled topology is valid")
}

/// The 12-switch evaluation topology.
pub fn build_experiment_topology() -> Topology {
    Topology::from_json(EXPERIMENT_JSON).expect("bundled topology is valid")
}

/// `(label, request)` pairs for R1..R9.
pub fn requests_r1_r9() -> Vec<(String, Request)> {
    R1_R9
        .iter()
        .enumerate()
        .map(|(i, text)| (format!("R{}", i + 1), dsl::parse_request(text).expect("bundled request parses")))
        .collect()
}

/// Evaluates the task graph directly over one epoch's readings.
pub fn evaluate<T: Scalar>(tg: &TaskGraph, values: &BTreeMap<NodeId, T>) -> Option<T> {
    fn go<T: Scalar>(tg: &TaskGraph, i: usize, values: &BTreeMap<NodeId, T>) -> Option<T> {
        let n = tg.node(i);
        match (n.op(), n.source()) {
            (Some(op), _) => {
                let args: Option<Vec<T>> = n.children.iter().map(|&c| go(tg, c, values)).collect();
                op.apply(&args?)
            }
            (None, Some(s)) => values.get(s).cloned(),
            (None, None) => None,
        }
    }
    go(tg, tg.top(), values)
}

/// Deliveries and counters from one simulated run.
#[derive(Debug, Clone)]
pub struct Run<T> {
    pub stats: StatsReport,
    pub deliveries: Vec<Delivery<T>>,
    pub counters: PacketCounters,
}

/// Installs `plan` on a fresh fabric, injects `samples` and runs to
/// quiescence.
pub fn run_plan<T: Scalar>(topo: &Arc<Topology>, plan: &DatapathPlan, samples: &[Sample]) -> Result<Run<T>, HarnessError> {
    let mut fabric = Fabric::<T>::new(Arc::clone(topo));
    fabric.install_rules(&plan.rules)?;
    for cfg in &plan.engine_configs {
        fabric.configure_engine(cfg.clone())?;
    }
    inject_samples(&mut fabric, &plan.ingress, &plan.user, samples)?;
    fabric.run();
    Ok(Run {
        stats: fabric.stats(None),
        counters: fabric.counters(),
        deliveries: fabric.take_deliveries(),
    })
}

/// Injects each sample at its source, addressed per `ingress`. Samples from
/// sources missing in `ingress` are skipped.
pub fn inject_samples<T: Scalar>(
    fabric: &mut Fabric<T>,
    ingress: &BTreeMap<NodeId, NodeId>,
    user: &str,
    samples: &[Sample],
) -> Result<usize, HarnessError> {
    let mut n = 0;
    for s in samples {
        let Some(dest) = ingress.get(&s.source) else { continue };
        let value = T::from_f64(s.value).expect("finite sample");
        let p = PacketRecord::new(s.source.clone(), dest.clone(), user, s.epoch, s.timestamp_ms, Payload::Scalar(value));
        fabric.inject(p, s.source.as_str())?;
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Audit {
    pub epochs_checked: u64,
    pub max_rel_error: f64,
    pub mismatches: Vec<String>,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks that exactly one result per epoch reached the destination and that
/// it equals direct evaluation. Exact equality is required except for
/// requests containing `avg`, which allow a relative error of `1e-9`.
pub fn audit<T: Scalar>(tg: &TaskGraph, samples: &[Sample], deliveries: &[Delivery<T>]) -> Audit {
    let tolerant = tg.ops().any(|i| tg.node(i).op() == Some(OpKind::Avg));
    let mut readings: BTreeMap<u64, BTreeMap<NodeId, T>> = BTreeMap::new();
    for s in samples {
        readings
            .entry(s.epoch)
            .or_default()
            .insert(s.source.clone(), T::from_f64(s.value).expect("finite sample"));
    }
    let mut got: BTreeMap<u64, Vec<&Payload<T>>> = BTreeMap::new();
    for d in deliveries.iter().filter(|d| d.host == tg.destination) {
        got.entry(d.packet.epoch).or_default().push(&d.packet.payload);
    }
    let mut a = Audit::default();
    for (epoch, values) in &readings {
        a.epochs_checked += 1;
        let expected = evaluate(tg, values);
        let results = got.remove(epoch).unwrap_or_default();
        let (Some(expected), [Payload::Scalar(actual)]) = (expected, results.as_slice()) else {
            a.mismatches.push(format!("epoch {epoch}: {} results delivered", results.len()));
            continue;
        };
        if *actual == expected {
            continue;
        }
        let (x, y) = (actual.to_f64().unwrap_or(f64::NAN), expected.to_f64().unwrap_or(f64::NAN));
        let rel = (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
        a.max_rel_error = a.max_rel_error.max(rel);
        if !(tolerant && rel <= 1e-9) {
            a.mismatches.push(format!("epoch {epoch}: got {x}, expected {y}"));
        }
    }
    for (epoch, extra) in got {
        a.mismatches.push(format!("epoch {epoch}: {} unexpected results", extra.len()));
    }
    a
}

/// One request's FLIP-versus-baseline outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub request: String,
    pub expression: String,
    pub flip_total_hops: u64,
    pub baseline_total_hops: u64,
    pub reduction_pct: f64,
    /// `(flip, baseline)` lookups per switch, unfiltered.
    pub per_switch: BTreeMap<NodeId, (u64, u64)>,
    /// Switches directly attached to the request's sources.
    pub edge_switches: BTreeSet<NodeId>,
    pub flip_audit: Audit,
    pub baseline_delivered: u64,
    pub flip_conserved: bool,
    pub baseline_conserved: bool,
}

/// Plans `req` both ways, replays the same workload through each and audits
/// the in-network results.
pub fn run_comparison<T: Scalar>(
    label: &str,
    req: &Request,
    topo: &Arc<Topology>,
    cov: &CoverageMap,
    workload: &Workload,
    seed: u64,
) -> Result<ComparisonRow, HarnessError> {
    let tg = dsl::expand_sources(req, topo, cov)?;
    let flip = planner::plan(req, topo, cov)?;
    let base = planner::plan_baseline(req, topo, cov)?;
    let sources = tg.sources();
    let samples = workload.generate(&sources, seed);
    let f = run_plan::<T>(topo, &flip, &samples)?;
    let b = run_plan::<T>(topo, &base, &samples)?;
    let flip_audit = audit(&tg, &samples, &f.deliveries);
    let per_switch = f
        .stats
        .switches
        .iter()
        .map(|(sw, s)| (sw.clone(), (s.packets, b.stats.switches[sw].packets)))
        .collect();
    let edge_switches = sources
        .iter()
        .map(|s| topo.connected_switch(s.as_str()).cloned())
        .collect::<Result<_, _>>()
        .map_err(PlanError::from)?;
    Ok(ComparisonRow {
        request: label.to_owned(),
        expression: req.to_string(),
        flip_total_hops: f.stats.total_hops,
        baseline_total_hops: b.stats.total_hops,
        reduction_pct: reduction_pct(f.stats.total_hops, b.stats.total_hops),
        per_switch,
        edge_switches,
        flip_audit,
        baseline_delivered: b.deliveries.iter().filter(|d| d.host == tg.destination).count() as u64,
        flip_conserved: f.counters.conserved(),
        baseline_conserved: b.counters.conserved(),
    })
}

pub fn reduction_pct(flip: u64, baseline: u64) -> f64 {
    if baseline == 0 {
        0.0
    } else {
        100.0 * (1.0 - flip as f64 / baseline as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub workload: Workload,
    pub rows: Vec<ComparisonRow>,
}

impl ExperimentReport {
    /// `(flip, baseline)` lookups per switch summed over all requests.
    pub fn per_switch_totals(&self) -> BTreeMap<NodeId, (u64, u64)> {
        let mut out: BTreeMap<NodeId, (u64, u64)> = BTreeMap::new();
        for row in &self.rows {
            for (sw, (f, b)) in &row.per_switch {
                let e = out.entry(sw.clone()).or_default();
                e.0 += f;
                e.1 += b;
            }
        }
        out
    }

    pub fn audits_passed(&self) -> bool {
        self.rows.iter().all(|r| r.flip_audit.passed())
    }
}

/// Runs every request on its own thread. Rows keep the input order.
pub fn run_suite<T: Scalar + Send>(
    topo: &Arc<Topology>,
    cov: &CoverageMap,
    requests: &[(String, Request)],
    workload: &Workload,
    seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    let rows = thread::scope(|s| {
        let handles: Vec<_> = requests
            .iter()
            .map(|(label, req)| s.spawn(move || run_comparison::<T>(label, req, topo, cov, workload, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ExperimentReport {
        seed,
        workload: *workload,
        rows,
    })
}

/// Writes `per_switch.csv`, `totals.csv` and `summary.json` into `dir`.
pub fn export_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut per_switch = String::from("switch,flip_count,baseline_count\n");
    let mut totals: Vec<_> = report.per_switch_totals().into_iter().collect();
    totals.sort_by_key(|(sw, _)| switch_order(sw));
    for (sw, (f, b)) in &totals {
        per_switch.push_str(&format!("{sw},{f},{b}\n"));
    }
    std::fs::write(dir.join("per_switch.csv"), per_switch)?;
    let mut t = String::from("request,flip_total_hops,baseline_total_hops,reduction_pct\n");
    for r in &report.rows {
        t.push_str(&format!(
            "{},{},{},{:.2}\n",
            r.request, r.flip_total_hops, r.baseline_total_hops, r.reduction_pct
        ));
    }
    std::fs::write(dir.join("totals.csv"), t)?;
    let summary = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    Ok(())
}

fn switch_order(sw: &NodeId) -> (u64, NodeId) {
    (sw.numeric_suffix().map_or(u64::MAX, |(_, n)| n), sw.clone())
}
