use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flip_core::control::{self, Command, Controller, PlanMode, Session};
use flip_core::epb::{ConfigStore, CONFIG_DIR_ENV};
use flip_core::harness::{self, Workload};
use flip_core::{CoverageMap, NodeId, Topology};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "flip", version, about = "Plan and simulate in-network IoT datapaths")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct World {
    /// Topology JSON; defaults to the bundled 12-switch experiment topology.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Region-to-base-station map for `coverage` requirements.
    #[arg(long)]
    coverage: Option<PathBuf>,
}

impl World {
    fn load(&self) -> Result<(Arc<Topology>, CoverageMap)> {
        let topo = match &self.topology {
            Some(p) => Topology::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => harness::build_experiment_topology(),
        };
        let cov = match &self.coverage {
            Some(p) => CoverageMap::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => CoverageMap::new(),
        };
        Ok((Arc::new(topo), cov))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Compute in the network.
    Flip,
    /// Route raw readings to the destination.
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    R1r9,
}

fn default_socket() -> PathBuf {
    std::env::temp_dir().join("flip.sock")
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a topology and print a summary.
    Load {
        /// Topology JSON; defaults to the bundled experiment topology.
        topology: Option<PathBuf>,
        #[arg(long)]
        coverage: Option<PathBuf>,
    },
    /// Execute a command script.
    Run {
        script: PathBuf,
        #[command(flatten)]
        world: World,
        /// Continue after a failing line.
        #[arg(long)]
        keep_going: bool,
        #[arg(long, value_enum, default_value_t = Mode::Flip)]
        mode: Mode,
    },
    /// Execute a script, simulate a workload and print per-switch counts.
    Stats {
        script: PathBuf,
        #[command(flatten)]
        world: World,
        #[arg(long, value_enum, default_value_t = Mode::Flip)]
        mode: Mode,
        #[arg(long, default_value_t = 100)]
        epochs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Count only packets addressed to this node.
        #[arg(long)]
        filter_dest: Option<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Send one command to a running server.
    Cmd {
        verb: String,
        /// JSON arguments, or the request text for datapath verbs.
        args: Vec<String>,
        #[arg(long, default_value_os_t = default_socket())]
        socket: PathBuf,
    },
    /// Serve commands on a Unix socket.
    Serve {
        #[arg(long, default_value_os_t = default_socket())]
        socket: PathBuf,
        #[command(flatten)]
        world: World,
    },
    /// Compare in-network computing against the baseline for R1..R9.
    Bench {
        #[arg(long, value_enum, default_value_t = Suite::R1r9)]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        epochs: u64,
        /// Directory for per_switch.csv, totals.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn session(world: &World, mode: Mode) -> Result<Session> {
    let (topo, cov) = world.load()?;
    let store = match std::env::var_os(CONFIG_DIR_ENV) {
        Some(_) => ConfigStore::from_env()?,
        None => ConfigStore::new(),
    };
    let mut s = Session::new(topo, cov, store)?;
    if mode == Mode::Baseline {
        s.set_mode(PlanMode::Baseline);
    }
    Ok(s)
}

fn run_script(s: &mut Session, script: &PathBuf, keep_going: bool, echo: bool) -> Result<bool> {
    let lines = control::run_script(s, script, keep_going)?;
    let mut ok = true;
    for l in &lines {
        ok &= l.result.is_ok();
        if echo || !l.result.is_ok() {
            println!("{}: {}", l.line, serde_json::to_string(&l.result)?);
        }
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Load { topology, coverage } => {
            let (topo, _) = World { topology, coverage }.load()?;
            println!("{}", serde_json::to_string_pretty(&summary(&topo))?);
        }
        Cmd::Run {
            script,
            world,
            keep_going,
            mode,
        } => {
            let mut s = session(&world, mode)?;
            if !run_script(&mut s, &script, keep_going, true)? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Stats {
            script,
            world,
            mode,
            epochs,
            seed,
            filter_dest,
            csv,
        } => {
            let mut s = session(&world, mode)?;
            if !run_script(&mut s, &script, false, false)? {
                return Ok(ExitCode::FAILURE);
            }
            let workload = Workload {
                epochs,
                ..Workload::default()
            };
            s.simulate(&workload, seed)?;
            let filter = filter_dest.map(NodeId::new).transpose()?;
            let report = s.fabric().stats(filter.as_ref());
            match csv {
                Some(p) => report.write_csv(&p)?,
                None => print!("{}", report.to_csv()),
            }
            eprintln!("total_hops {}", report.total_hops);
        }
        Cmd::Cmd { verb, args, socket } => {
            let args = match args.join(" ") {
                a if a.is_empty() => Value::Null,
                a => serde_json::from_str(&a).unwrap_or(Value::String(a)),
            };
            let r = control::request(&socket, &Command { verb, args })?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if !r.is_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Serve { socket, world } => {
            let c = Arc::new(Controller::new(session(&world, Mode::Flip)?));
            eprintln!("listening on {}", socket.display());
            control::serve(&socket, c)?;
        }
        Cmd::Bench {
            suite: Suite::R1r9,
            seed,
            epochs,
            out,
        } => {
            if epochs == 0 {
                bail!("--epochs must be positive");
            }
            let topo = Arc::new(harness::build_experiment_topology());
            let workload = Workload {
                epochs,
                ..Workload::default()
            };
            let report = harness::run_suite::<f64>(&topo, &CoverageMap::new(), &harness::requests_r1_r9(), &workload, seed)?;
            println!("request  flip  baseline  reduction  audit");
            for r in &report.rows {
                println!(
                    "{:<7} {:>5} {:>9} {:>9.1}%  {}",
                    r.request,
                    r.flip_total_hops,
                    r.baseline_total_hops,
                    r.reduction_pct,
                    if r.flip_audit.passed() { "ok" } else { "FAILED" }
                );
            }
            if let Some(dir) = out {
                harness::export_report(&report, &dir)?;
                println!("wrote {}", dir.display());
            }
            if !report.audits_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn summary(topo: &Topology) -> Value {
    use flip_core::topology::NodeKind::*;
    let counts: serde_json::Map<String, Value> = [Switch, Engine, BaseStation, Destination, Cloud]
        .into_iter()
        .map(|k| (format!("{k:?}").to_lowercase(), topo.count(k).into()))
        .collect();
    serde_json::json!({ "nodes": counts, "links": topo.links().len() })
}
