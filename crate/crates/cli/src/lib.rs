//! `spac` command implementations. Every report is JSON with an embedded
//! [`RunManifest`]; with `--out DIR` artifacts go to files, otherwise the
//! report is printed.

mod manifest;
mod plot;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spac_core::dse::{
    brute_force_enumerate, depth_grid, run_dse, template_space, BruteForce, Constraints, DseError, DseReport,
    Objectives, DEFAULT_SPACE_CAP,
};
use spac_core::perf::{estimate_resources, run_surrogate};
use spac_core::protocol::{builtin_spec, compute_layout, parse_spec, ProtocolError, ProtocolSpec};
use spac_core::sim::{
    back_annotate, build_switch, run_cycle_sim, Annotation, ArchConfig, QueueDepths, SchedulerKind, SimError,
    SimOptions, TableKind, VoqKind,
};
use spac_core::trace::{extract_features, gen_trace, preset, GenParams, Trace, TraceError};
use thiserror::Error;

pub use manifest::RunManifest;
pub use plot::{scatter_csv, scatter_svg, ScatterRow};

use manifest::Envelope;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Spec { path: String, source: ProtocolError },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dse(#[from] DseError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("DSE points outside the oracle front: {0}")]
    NotContained(String),
    #[error("{0} acceptance criteria failed")]
    Validation(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Dse(DseError::NoFeasibleDesign { .. } | DseError::AllPruned { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "spac", version, about = "Protocol-aware switch generation and design-space exploration")]
pub struct Cli {
    /// Directory for all artifacts; reports go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Protocol definitions.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// Traffic traces.
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Switch simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Design-space exploration.
    #[command(subcommand)]
    Dse(DseCmd),
    /// Run the acceptance suite.
    Validate {
        /// Only the fast criteria.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProtocolCmd {
    /// Print the parse plan of a protocol at one bus width.
    Check {
        /// Spec file, or the name of a built-in protocol.
        spec: String,
        #[arg(long, default_value_t = 256)]
        width: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum TraceCmd {
    /// Generate a trace CSV from a preset or a parameter file.
    Gen {
        #[arg(long, conflicts_with = "params")]
        preset: Option<String>,
        /// TOML file of generator parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        load: Option<f64>,
        #[arg(long)]
        slots: Option<u64>,
    },
    /// Print the features of a trace as JSON.
    Analyze {
        #[command(flatten)]
        trace: TraceInput,
        #[arg(long)]
        window_ns: Option<u64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct TraceInput {
    /// Trace CSV.
    pub trace: PathBuf,
    /// Port count, when the file has no `# spac-trace` header.
    #[arg(long)]
    pub ports: Option<usize>,
    /// Link rate in Gbps, when the file has no `# spac-trace` header.
    #[arg(long)]
    pub link_gbps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FidelityArg {
    Cycle,
    Surrogate,
}

#[derive(Debug, Clone, Args)]
pub struct ArchArgs {
    #[arg(long, default_value_t = 256)]
    pub width: u32,
    #[arg(long, default_value = "multibank_hash")]
    pub table: TableKind,
    #[arg(long, default_value = "nxn")]
    pub voq: VoqKind,
    #[arg(long, default_value = "islip")]
    pub scheduler: SchedulerKind,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    /// Clock in MHz; defaults to the resource model's prediction.
    #[arg(long)]
    pub clock_mhz: Option<f64>,
    /// Per-VOQ depth in flits.
    #[arg(long, default_value_t = 512)]
    pub depth: u32,
    /// Shared pool size in flits.
    #[arg(long, default_value_t = 4096)]
    pub pool: u32,
    /// Unbounded buffers with occupancy profiling.
    #[arg(long)]
    pub profile: bool,
    #[arg(long, default_value_t = 1)]
    pub ii: u32,
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    /// Simulate one architecture on one trace.
    Run {
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        trace: TraceInput,
        #[command(flatten)]
        arch: ArchArgs,
        #[arg(long, value_enum, default_value = "cycle")]
        fidelity: FidelityArg,
        /// TOML with `total_ns` or a `[stage_ns]` table, plus optional `ii`.
        #[arg(long)]
        annotate: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        warmup_cycles: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ConstraintArgs {
    #[arg(long, default_value_t = f64::INFINITY)]
    pub sla_ns: f64,
    #[arg(long, default_value_t = 2160)]
    pub bram_budget: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    /// Overrides the trace's link rate in the line-rate check.
    #[arg(long)]
    pub line_rate_gbps: Option<f64>,
    /// Drop templates wider than this many bits.
    #[arg(long)]
    pub max_width: Option<u32>,
}

impl ConstraintArgs {
    fn constraints(&self) -> Constraints {
        Constraints {
            sla_latency_p99_ns: self.sla_ns,
            bram_budget_blocks: self.bram_budget,
            drop_epsilon: self.epsilon,
            delta: self.delta,
            top_k: self.top_k,
            link_rate_gbps: self.line_rate_gbps,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum DseCmd {
    /// Three-stage exploration over the template space.
    Run {
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        trace: TraceInput,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// Also brute-force the depth grid and check the result lies on its front.
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        blocks: Vec<u64>,
    },
    /// Brute-force every template at every depth of the grid.
    Oracle {
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        trace: TraceInput,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// BRAM blocks per queue (or per pool) of the depth grid.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        blocks: Vec<u64>,
    },
}

/// Loads a spec file, or a built-in protocol when no such file exists.
pub fn load_spec(arg: &str) -> Result<(ProtocolSpec, String), CliError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = builtin_spec(arg) {
            return Ok((s, format!("builtin:{arg}")));
        }
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec = parse_spec(&text).map_err(|source| CliError::Spec {
        path: arg.to_string(),
        source,
    })?;
    Ok((spec, arg.to_string()))
}

const TRACE_HEADER: &str = "# spac-trace";

fn trace_header(t: &Trace) -> String {
    format!("{TRACE_HEADER} ports={} link_gbps={}\n", t.port_count, t.link_rate_gbps)
}

/// Reads `ports=` and `link_gbps=` from the first line when it is a
/// `# spac-trace` header.
fn read_trace_header(path: &Path) -> Result<(Option<usize>, Option<f64>), CliError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(io_err(path))?;
    let mut ports = None;
    let mut link = None;
    if let Some(rest) = first.trim().strip_prefix(TRACE_HEADER) {
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("ports", v)) => ports = v.parse().ok(),
                Some(("link_gbps", v)) => link = v.parse().ok(),
                _ => {}
            }
        }
    }
    Ok((ports, link))
}

impl TraceInput {
    pub fn load(&self) -> Result<Trace, CliError> {
        let (ports, link) = read_trace_header(&self.trace)?;
        let ports = self
            .ports
            .or(ports)
            .ok_or_else(|| CliError::Usage("trace has no header; pass --ports".into()))?;
        let link = self
            .link_gbps
            .or(link)
            .ok_or_else(|| CliError::Usage("trace has no header; pass --link-gbps".into()))?;
        Ok(Trace::load_csv(&self.trace, ports, link)?)
    }
}

/// Writes to stdout; a closed pipe (`spac ... | head`) is not an error.
fn emit(bytes: &[u8]) {
    let _ = std::io::stdout().lock().write_all(bytes);
}

struct Output<'a> {
    dir: Option<&'a Path>,
    argv: &'a [String],
}

impl Output<'_> {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.map(|d| d.join(name))
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        if let Some(p) = self.path(name) {
            fs::write(&p, body).map_err(io_err(&p))?;
        }
        Ok(())
    }

    /// Writes `name` under `--out`, or prints it.
    fn report<T: Serialize>(&self, name: &str, manifest: &RunManifest, report: &T) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(&Envelope { manifest, report }).expect("report serializes");
        match self.path(name) {
            Some(_) => self.write(name, &(json + "\n")),
            None => {
                emit(json.as_bytes());
                emit(b"\n");
                Ok(())
            }
        }
    }

    fn manifest(&self, inputs: Vec<String>, seed: Option<u64>, config: &impl Serialize, t: Instant) -> RunManifest {
        let mut m = RunManifest::new(self.argv, inputs, seed, config);
        m.elapsed_ms = t.elapsed().as_secs_f64() * 1e3;
        m
    }
}

/// Runs one parsed command line. `argv` is recorded in manifests.
pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    if let Some(d) = &cli.out {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let out = Output {
        dir: cli.out.as_deref(),
        argv,
    };
    match cli.command {
        Command::Protocol(ProtocolCmd::Check { spec, width }) => protocol_check(&spec, width),
        Command::Trace(cmd) => trace_cmd(cmd, &out),
        Command::Sim(SimCmd::Run {
            spec,
            trace,
            arch,
            fidelity,
            annotate,
            warmup_cycles,
        }) => sim_run(&spec, &trace, &arch, fidelity, annotate.as_deref(), warmup_cycles, &out),
        Command::Dse(cmd) => dse_cmd(cmd, &out),
        Command::Validate { quick } => {
            let outcomes = spac_validate::run_suite(quick, |o| println!("{}", o.line()));
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{}/{} criteria pass", outcomes.len() - failed, outcomes.len());
            if failed > 0 {
                return Err(CliError::Validation(failed));
            }
            Ok(())
        }
    }
}

fn protocol_check(spec_arg: &str, width: u32) -> Result<(), CliError> {
    if width == 0 {
        return Err(CliError::Usage("--width must be positive".into()));
    }
    let (spec, _) = load_spec(spec_arg)?;
    let plan = compute_layout(&spec, width);
    println!("protocol {} at {width}-bit flits", spec.name());
    println!("{:<16} {:>5} {:>7} {:>6}  straddle", "field", "flit", "offset", "width");
    for e in &plan.entries {
        println!(
            "{:<16} {:>5} {:>7} {:>6}  {}",
            e.field,
            e.first_flit,
            e.bit_offset_in_flit,
            e.width_bits,
            if e.straddles_boundary { "yes" } else { "no" }
        );
    }
    for e in plan.entries.iter().filter(|e| e.straddles_boundary) {
        println!("{} straddles a flit boundary", e.field);
    }
    println!(
        "header {} bits ({} padded, {} flits), {} straddles",
        spec.header_bits(),
        spec.padded_header_bits(),
        plan.header_flits(),
        plan.straddle_count()
    );
    Ok(())
}

fn trace_cmd(cmd: TraceCmd, out: &Output) -> Result<(), CliError> {
    let t0 = Instant::now();
    match cmd {
        TraceCmd::Gen {
            preset: name,
            params,
            seed,
            load,
            slots,
        } => {
            let (mut p, input) = match (name, params) {
                (Some(n), None) => (
                    preset(&n).ok_or_else(|| CliError::Usage(format!("unknown preset `{n}`")))?,
                    format!("preset:{n}"),
                ),
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                    let p: GenParams = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    (p, path.display().to_string())
                }
                _ => return Err(CliError::Usage("give --preset or --params".into())),
            };
            if let Some(l) = load {
                p.load = l;
            }
            if let Some(s) = slots {
                p.slots = s;
            }
            let trace = gen_trace(&p, seed)?;
            let mut csv = trace_header(&trace).into_bytes();
            trace.write_csv(&mut csv)?;
            match out.path("trace.csv") {
                Some(path) => {
                    fs::write(&path, &csv).map_err(io_err(&path))?;
                    let m = out.manifest(vec![input], Some(seed), &p, t0);
                    out.report("trace_manifest.json", &m, &p)?;
                    eprintln!("wrote {} packets to {}", trace.len(), path.display());
                }
                None => emit(&csv),
            }
            Ok(())
        }
        TraceCmd::Analyze { trace, window_ns } => {
            let t = trace.load()?;
            let f = extract_features(&t, window_ns)?;
            let m = out.manifest(vec![trace.trace.display().to_string()], None, &window_ns, t0);
            out.report("features.json", &m, &f)
        }
    }
}

fn arch_config(a: &ArchArgs, ports: usize, key_bits: u32) -> ArchConfig {
    let mut c = ArchConfig::new(ports, a.width, a.table, a.voq, a.scheduler).with_islip_iterations(a.iterations);
    c.pipeline_ii = a.ii;
    c = if a.profile {
        c.unbounded()
    } else {
        c.with_buffers(QueueDepths::Uniform(a.depth), Some(a.pool))
    };
    c.clock_mhz = a.clock_mhz.unwrap_or_else(|| estimate_resources(&c, key_bits).freq_mhz);
    c
}

#[derive(Serialize)]
struct SimConfig<'a> {
    spec: &'a ProtocolSpec,
    arch: &'a ArchConfig,
    fidelity: &'static str,
    annotation: Option<&'a Annotation>,
    warmup_cycles: u64,
}

fn sim_run(
    spec_arg: &str,
    trace_in: &TraceInput,
    arch: &ArchArgs,
    fidelity: FidelityArg,
    annotate: Option<&Path>,
    warmup_cycles: u64,
    out: &Output,
) -> Result<(), CliError> {
    let t0 = Instant::now();
    let (spec, spec_src) = load_spec(spec_arg)?;
    let trace = trace_in.load()?;
    let cfg = arch_config(arch, trace.port_count, spec.routing_key_bits());
    let mut model = build_switch(cfg.clone(), spec.clone(), spec.binding())?;
    let mut inputs = vec![spec_src, trace_in.trace.display().to_string()];
    if let Some(path) = annotate {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let a = Annotation::from_toml(&text, &model.config().stages)?;
        model = back_annotate(&model, a)?;
        inputs.push(path.display().to_string());
    }
    let opts = SimOptions {
        warmup_cycles,
        max_cycles: None,
        profiling: arch.profile,
    };
    let result = match fidelity {
        FidelityArg::Cycle => run_cycle_sim(&model, &trace, &opts)?,
        FidelityArg::Surrogate => run_surrogate(&model, &trace, &opts)?.result,
    };
    let c = &result.conservation;
    eprintln!(
        "conservation: injected {} = delivered {} + dropped {} + residual {} ({})",
        c.injected,
        c.delivered,
        c.dropped,
        c.residual,
        if c.balances() { "balanced" } else { "UNBALANCED" }
    );
    let config = SimConfig {
        spec: &spec,
        arch: &cfg,
        fidelity: match fidelity {
            FidelityArg::Cycle => "cycle",
            FidelityArg::Surrogate => "surrogate",
        },
        annotation: model.annotation(),
        warmup_cycles,
    };
    let m = out.manifest(inputs, None, &config, t0);
    out.report("sim_result.json", &m, &result)
}

fn dse_inputs(
    spec_arg: &str,
    trace_in: &TraceInput,
    c: &ConstraintArgs,
) -> Result<(ProtocolSpec, Trace, Vec<ArchConfig>, Vec<String>), CliError> {
    let (spec, spec_src) = load_spec(spec_arg)?;
    let trace = trace_in.load()?;
    let templates: Vec<ArchConfig> = template_space(&spec, trace.port_count)?
        .into_iter()
        .filter(|t| c.max_width.map_or(true, |w| t.data_width_bits <= w))
        .collect();
    if templates.is_empty() {
        return Err(DseError::EmptySpace.into());
    }
    Ok((spec, trace, templates, vec![spec_src, trace_in.trace.display().to_string()]))
}

fn oracle_rows(bf: &BruteForce) -> Vec<ScatterRow> {
    bf.evaluated
        .iter()
        .map(|e| ScatterRow {
            key: e.point.key(),
            source: "oracle".into(),
            bram_blocks: e.point.resources.bram_blocks,
            p99_ns: e.point.p99_ns(),
            accepted: e.accepted,
            on_front: bf.front.contains_key(&e.point.key()),
            optimal: false,
        })
        .collect()
}

fn dse_rows(r: &DseReport) -> Vec<ScatterRow> {
    let front = r.front();
    r.evaluated
        .iter()
        .map(|e| ScatterRow {
            key: e.point.key(),
            source: "dse".into(),
            bram_blocks: e.point.resources.bram_blocks,
            p99_ns: e.point.p99_ns(),
            accepted: e.accepted,
            on_front: front.contains_key(&e.point.key()),
            optimal: e.point.key() == r.optimal.key(),
        })
        .collect()
}

fn write_scatter(out: &Output, rows: &[ScatterRow], title: &str) -> Result<(), CliError> {
    let csv = scatter_csv(rows).map_err(|e| CliError::Usage(e.to_string()))?;
    out.write("pareto.csv", &csv)?;
    out.write("pareto.svg", &scatter_svg(rows, title))
}

/// Every DSE front point must be an accepted, undominated oracle point.
fn containment(report: &DseReport, bf: &BruteForce) -> Vec<String> {
    let accepted: Vec<_> = bf.accepted().collect();
    report
        .front()
        .points
        .iter()
        .filter_map(|p| {
            let key = p.key();
            match bf.evaluated.iter().find(|e| e.point.key() == key) {
                None => Some(format!("{key} not in the oracle grid")),
                Some(e) if !e.accepted => Some(format!("{key} rejected by the oracle")),
                Some(e) => accepted
                    .iter()
                    .find(|q| q.dominates(&e.point))
                    .map(|q| format!("{key} dominated by {}", q.key())),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct DseConfig<'a> {
    spec: &'a ProtocolSpec,
    constraints: &'a Constraints,
    templates: Vec<String>,
    blocks: Option<&'a [u64]>,
}

fn dse_cmd(cmd: DseCmd, out: &Output) -> Result<(), CliError> {
    let t0 = Instant::now();
    match cmd {
        DseCmd::Run {
            spec,
            trace,
            constraints,
            oracle,
            blocks,
        } => {
            let (spec, trace, templates, inputs) = dse_inputs(&spec, &trace, &constraints)?;
            let cons = constraints.constraints();
            let report = match run_dse(&spec, &trace, &templates, &cons) {
                Ok(r) => r,
                Err(e) => {
                    if let Some(ledger) = e.ledger() {
                        for r in ledger {
                            eprintln!("{} [{}] {}", r.config, r.stage, r.reason);
                        }
                    }
                    return Err(e.into());
                }
            };
            let mut rows = dse_rows(&report);
            let mut problems = Vec::new();
            if oracle {
                let bf = brute_force_enumerate(&depth_grid(&templates, &blocks), &spec, &trace, &cons, DEFAULT_SPACE_CAP)?;
                problems = containment(&report, &bf);
                rows.extend(oracle_rows(&bf));
                eprintln!(
                    "oracle: {} points, front {}; dse front {}",
                    bf.evaluated.len(),
                    bf.front.len(),
                    if problems.is_empty() { "contained" } else { "NOT contained" }
                );
            }
            let config = DseConfig {
                spec: &spec,
                constraints: &cons,
                templates: templates.iter().map(|t| t.arch_key()).collect(),
                blocks: oracle.then_some(blocks.as_slice()),
            };
            let m = out.manifest(inputs, None, &config, t0);
            out.report("dse_report.json", &m, &report)?;
            write_scatter(out, &rows, &format!("{}: {}", spec.name(), report.optimal.key()))?;
            eprintln!(
                "optimal {} ({} BRAM, p99 {:.1} ns)",
                report.optimal.key(),
                report.optimal.resources.bram_blocks,
                report.optimal.p99_ns()
            );
            if !problems.is_empty() {
                return Err(CliError::NotContained(problems.join("; ")));
            }
            Ok(())
        }
        DseCmd::Oracle {
            spec,
            trace,
            constraints,
            blocks,
        } => {
            let (spec, trace, templates, inputs) = dse_inputs(&spec, &trace, &constraints)?;
            let cons = constraints.constraints();
            let bf = brute_force_enumerate(&depth_grid(&templates, &blocks), &spec, &trace, &cons, DEFAULT_SPACE_CAP)?;
            let config = DseConfig {
                spec: &spec,
                constraints: &cons,
                templates: templates.iter().map(|t| t.arch_key()).collect(),
                blocks: Some(&blocks),
            };
            let m = out.manifest(inputs, None, &config, t0);
            #[derive(Serialize)]
            struct OracleReport<'a> {
                front: &'a [spac_core::dse::DesignPoint],
                evaluated: &'a [spac_core::dse::Evaluated],
            }
            out.report(
                "oracle_report.json",
                &m,
                &OracleReport {
                    front: &bf.front.points,
                    evaluated: &bf.evaluated,
                },
            )?;
            write_scatter(out, &oracle_rows(&bf), &format!("{}: brute force", spec.name()))?;
            eprintln!("{} points, {} accepted, front {}", bf.evaluated.len(), bf.accepted().count(), bf.front.len());
            Ok(())
        }
    }
}
