mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::NESTED;
use flip_core::control::{Command, Session, Verb};
use flip_core::dsl::{expand_sources, parse_request, CoverageMap};
use flip_core::harness::{audit, evaluate, small_topology, run_plan, ValueModel, Workload};
use flip_core::planner::{self, Action};
use flip_core::topology::{id, NodeId, NodeKind, TopologyBuilder};
use flip_core::BigRational;
use num_traits::FromPrimitive;
use serde_json::json;

const MANUAL: [&str; 6] = [
    "datapath_m({bs201:bs300},switch<-sw4,computation<-min,destination<-sw5[engine])",
    "datapath_m({bs101:bs200},switch<-sw3,computation<-min,destination<-sw5[engine])",
    "datapath_m(sw4[engine],sw3[engine],switch<-sw5,computation<-max,destination<-sw3[engine])",
    "datapath_m({bs11:bs100},switch<-sw2,computation<-avg,destination<-sw3[engine])",
    "datapath_m({bs1:bs10},switch<-sw1,computation<-avg,destination<-sw3[engine])",
    "datapath_m(sw1[engine],sw2[engine],sw5[engine],switch<-sw3,computation<-max,destination<-user)",
];

fn integers(epochs: u64) -> Workload {
    Workload {
        epochs,
        values: ValueModel::Integers { lo: -50, hi: 50 },
        ..Workload::default()
    }
}

#[test]
fn nested_engine_configs_chain_like_the_manual_decomposition() {
    let t = small_topology();
    let plan = planner::plan(&parse_request(NESTED).unwrap(), &t, &CoverageMap::new()).unwrap();
    let chain: BTreeMap<(String, String), String> = plan
        .engine_configs
        .iter()
        .map(|c| ((c.engine.to_string(), c.compute.to_string()), c.destination.to_string()))
        .collect();
    let want: BTreeMap<(String, String), String> = [
        ("e-sw4", "min", "e-sw5"),
        ("e-sw3", "min", "e-sw5"),
        ("e-sw5", "max", "e-sw3"),
        ("e-sw1", "avg", "e-sw3"),
        ("e-sw2", "avg", "e-sw3"),
        ("e-sw3", "max", "user"),
    ]
    .into_iter()
    .map(|(e, c, d)| ((e.to_owned(), c.to_owned()), d.to_owned()))
    .collect();
    assert_eq!(chain, want);
    assert_eq!(plan.engine_configs.len(), 6);
}

#[test]
fn nested_is_exact_over_rationals() {
    let t = Arc::new(small_topology());
    let cov = CoverageMap::new();
    let req = parse_request(NESTED).unwrap();
    let tg = expand_sources(&req, &t, &cov).unwrap();
    let plan = planner::plan(&req, &t, &cov).unwrap();
    for w in [integers(5), Workload { epochs: 5, ..Workload::default() }] {
        let samples = w.generate(&tg.sources(), 11);
        let run = run_plan::<BigRational>(&t, &plan, &samples).unwrap();
        let a = audit(&tg, &samples, &run.deliveries);
        assert!(a.passed(), "{:?}", a.mismatches);
        assert_eq!(a.max_rel_error, 0.0);
        assert!(run.counters.conserved());
    }
}

#[test]
fn manual_chain_computes_eq1() {
    let t = Arc::new(small_topology());
    let cov = CoverageMap::new();
    let reqs: Vec<_> = MANUAL.iter().map(|m| parse_request(m).unwrap()).collect();
    let plan = planner::plan_manual_chain(&reqs, &t, &cov).unwrap();
    let tg = expand_sources(&parse_request(NESTED).unwrap(), &t, &cov).unwrap();
    let w = integers(4);
    let samples = w.generate(&tg.sources(), 5);
    let run = run_plan::<f64>(&t, &plan, &samples).unwrap();
    let a = audit(&tg, &samples, &run.deliveries);
    assert!(a.passed(), "{:?}", a.mismatches);
}

#[test]
fn manual_commands_install_one_by_one() {
    let t = Arc::new(small_topology());
    let mut s = Session::in_memory(Arc::clone(&t), CoverageMap::new());
    for m in MANUAL {
        let r = s.execute(&Command::new(Verb::DatapathM, json!(m)));
        assert!(r.is_ok(), "{m}: {r:?}");
    }
    assert_eq!(s.store().len(), 6);
    let w = integers(3);
    s.simulate(&w, 9).unwrap();

    let mut readings: BTreeMap<u64, BTreeMap<NodeId, f64>> = BTreeMap::new();
    for p in s.plans() {
        let sources: Vec<NodeId> = p.ingress.keys().cloned().collect();
        for x in w.generate(&sources, 9) {
            readings.entry(x.epoch).or_default().insert(x.source, x.value);
        }
    }
    let tg = expand_sources(&parse_request(NESTED).unwrap(), &t, &CoverageMap::new()).unwrap();
    let delivered: BTreeMap<u64, f64> = s
        .fabric()
        .deliveries()
        .iter()
        .map(|d| match d.packet.payload {
            flip_core::epb::Payload::Scalar(v) => (d.packet.epoch, v),
            _ => panic!("non-scalar"),
        })
        .collect();
    assert_eq!(delivered.len(), 3);
    for (epoch, values) in readings {
        let want = evaluate(&tg, &values).unwrap();
        assert!((delivered[&epoch] - want).abs() <= 1e-9 * want.abs().max(1.0), "epoch {epoch}");
    }
}

#[test]
fn manual_two_source_example_routes_through_the_engine() {
    let t = TopologyBuilder::new()
        .switch_with_engine("sw")
        .node("bs1", NodeKind::BaseStation)
        .node("bs2", NodeKind::BaseStation)
        .node("dest", NodeKind::Destination)
        .link("bs1", "sw", 1.0)
        .link("bs2", "sw", 1.0)
        .link("dest", "sw", 1.0)
        .build()
        .unwrap();
    let req = parse_request("datapath_m(bs1,bs2,switch<-sw,computation<-sum,destination<-dest)").unwrap();
    let plan = planner::plan(&req, &t, &CoverageMap::new()).unwrap();
    assert_eq!(plan.engine_configs.len(), 1);
    let c = &plan.engine_configs[0];
    assert_eq!((c.engine.as_str(), c.compute.name(), c.destination.as_str()), ("e-sw", "sum", "dest"));
    assert_eq!(c.sources, [id("bs1"), id("bs2")]);
    let redirect = plan
        .rules
        .iter()
        .find(|r| r.matches.sources.contains(&id("bs1")))
        .unwrap();
    assert_eq!(redirect.action, Action::RedirectToEngine(id("e-sw")));
    assert!(plan.rules.iter().any(|r| r.matches.sources.contains(&id("e-sw")) && r.action == Action::Deliver));

    let w = integers(3);
    let samples = w.generate(&[id("bs1"), id("bs2")], 1);
    let run = run_plan::<f64>(&Arc::new(t), &plan, &samples).unwrap();
    assert_eq!(run.deliveries.len(), 3);
    for d in &run.deliveries {
        let want: f64 = samples.iter().filter(|s| s.epoch == d.packet.epoch).map(|s| s.value).sum();
        assert_eq!(d.packet.payload, flip_core::epb::Payload::Scalar(want));
    }
}

#[test]
fn single_source_plan_has_one_redirect() {
    let t = small_topology();
    let plan = planner::plan(&parse_request("datapath_a(max(bs5),destination<-user)").unwrap(), &t, &CoverageMap::new()).unwrap();
    let redirects = plan.rules.iter().filter(|r| matches!(r.action, Action::RedirectToEngine(_))).count();
    assert_eq!(redirects, 1);
}

#[test]
fn baseline_delivers_every_reading() {
    let t = Arc::new(small_topology());
    let req = parse_request(NESTED).unwrap();
    let plan = planner::plan_baseline(&req, &t, &CoverageMap::new()).unwrap();
    assert!(plan.engine_configs.is_empty());
    let sources = expand_sources(&req, &t, &CoverageMap::new()).unwrap().sources();
    let samples = Workload { epochs: 2, ..Workload::default() }.generate(&sources, 0);
    let run = run_plan::<f64>(&t, &plan, &samples).unwrap();
    assert_eq!(run.deliveries.len(), samples.len());
    assert!(run.counters.conserved());
    assert_eq!(run.counters.dropped, 0);
}

#[test]
fn partial_epochs_compute_over_present_sources() {
    let t = Arc::new(small_topology());
    let req = parse_request("datapath_a(sum(bs1:bs3),destination<-user)").unwrap();
    let plan = planner::plan(&req, &t, &CoverageMap::new()).unwrap();
    let samples: Vec<_> = integers(1)
        .generate(&[id("bs1"), id("bs2"), id("bs3")], 2)
        .into_iter()
        .filter(|s| s.source != id("bs2"))
        .collect();
    let run = run_plan::<BigRational>(&t, &plan, &samples).unwrap();
    let want = samples.iter().map(|s| BigRational::from_f64(s.value).unwrap()).sum::<BigRational>();
    assert_eq!(run.deliveries.len(), 1);
    assert_eq!(run.deliveries[0].packet.payload, flip_core::ExactPayload::Scalar(want));
    assert_eq!(run.stats.engines[&id("e-sw1")].timeouts, 1);
}

#[test]
fn sub_rejects_partial_epochs() {
    let t = Arc::new(small_topology());
    let req = parse_request("datapath_a(sub(bs1:bs3),destination<-user)").unwrap();
    let plan = planner::plan(&req, &t, &CoverageMap::new()).unwrap();
    let samples: Vec<_> = integers(1)
        .generate(&[id("bs1"), id("bs2"), id("bs3")], 2)
        .into_iter()
        .filter(|s| s.source != id("bs3"))
        .collect();
    let run = run_plan::<f64>(&t, &plan, &samples).unwrap();
    assert!(run.deliveries.is_empty());
    assert_eq!(run.stats.engines[&id("e-sw1")].rejected_epochs, 1);
}
