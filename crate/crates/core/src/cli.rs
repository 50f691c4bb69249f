//! `hhcn` command-line front end.
//!
//! Every subcommand reads one JSON document (`--input FILE`, `-` for stdin)
//! and writes a report as JSON, plain text or Graphviz DOT. Output depends
//! only on the input bytes and flags.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 computation
//! error (no consensus, infeasible placement, disconnected graph, ...).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::exact::{to_f64, Exact};
use crate::fusion::{
    lipschitz_probe, omega_function, FusionError, FusionFn, FusionProblem, Interval,
    OverlapProfile, ProbeReport,
};
use crate::gossip::{
    assign_levels, assign_sectors, locate, Field, GossipConfig, GossipError, GossipSim, Position,
    SensorNode, SimReport,
};
use crate::multicast::{
    plan_doubly_optimal, verify_plan, DoublyOptimalPlan, Edge, EmbeddedBinaryTree, GraphError,
    Placement, SpanningTree, WeightedGraph,
};
use crate::prefix::{
    assign_paths, entropy_base_d, expected_depth, kraft_holds, kraft_sum, optimal_depths,
    security_check, verify_prefix_free, ImportanceProfile, LeaderId, NodePath, PrefixError,
    PrefixPlan,
};
use crate::tree::{
    simulate_links, DaryTree, LeaderCountProfile, LevelLeaders, LinkModel, Normalization, TreeError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

/// Number of leading trials written by `gossip --trace`.
pub const TRACE_TRIALS: u64 = 100;

#[derive(Debug, Parser)]
#[command(
    name = "hhcn",
    version,
    about = "Secure multicast planning, level-controlled gossip and interval fusion",
    after_help = "Exit codes: 0 success, 1 usage error, 2 invalid input, 3 computation error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON input file; `-` reads standard input.
    #[arg(long, short, global = true, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Output format. `dot` is available for plan-tree and plan-graph.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Seed for every Monte Carlo run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo trials (tree-stats accepts 0 to skip simulation).
    #[arg(long, global = true, default_value_t = 100_000)]
    pub trials: u64,

    /// Denominator used for leader probabilities in tree-stats.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Paper)]
    pub mode: Mode,

    /// Fusion rule evaluated by `fuse`.
    #[arg(long, global = true, value_enum, default_value_t = FunctionArg::All)]
    pub function: FunctionArg,

    /// Write line-oriented traces of the first trials of `gossip` to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Node counts, leader probabilities and link reliability of a D-ary tree.
    TreeStats,
    /// Huffman-optimal prefix-free leader paths in a D-ary tree.
    PlanTree,
    /// MST-based prefix-free leader placement on a weighted graph.
    PlanGraph,
    /// Level-controlled gossip simulation with leveling-sectoring coordinates.
    Gossip,
    /// Fault-tolerant fusion of interval estimates.
    Fuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Paper,
    Exact,
}

impl From<Mode> for Normalization {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => Normalization::Paper,
            Mode::Exact => Normalization::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionArg {
    M,
    Omega,
    N,
    S,
    All,
}

impl FunctionArg {
    fn selected(self) -> Vec<FusionFn> {
        match self {
            FunctionArg::M => vec![FusionFn::M],
            FunctionArg::Omega => vec![FusionFn::Omega],
            FunctionArg::N => vec![FusionFn::N],
            FunctionArg::S => vec![FusionFn::S],
            FunctionArg::All => FusionFn::ALL.to_vec(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        input_err(e)
    }
}

impl From<PrefixError> for CliError {
    fn from(e: PrefixError) -> Self {
        input_err(e)
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Disconnected
            | GraphError::Infeasible { .. }
            | GraphError::TooManyLeaders(_) => CliError::Compute(e.to_string()),
            other => input_err(other),
        }
    }
}

impl From<GossipError> for CliError {
    fn from(e: GossipError) -> Self {
        match e {
            GossipError::Unreachable(_) => CliError::Compute(e.to_string()),
            other => input_err(other),
        }
    }
}

/// Finished command: what to print and how to exit.
struct Outcome {
    body: String,
    code: i32,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome {
            body,
            code: EXIT_OK,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let _ = out.write_all(outcome.body.as_bytes());
            if outcome.code != EXIT_OK {
                let _ = writeln!(err, "error: computation failed; see report");
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let dot_allowed = matches!(cli.command, Command::PlanTree | Command::PlanGraph);
    if cli.format == Format::Dot && !dot_allowed {
        return Err(CliError::Usage(
            "--format dot is only available for plan-tree and plan-graph".into(),
        ));
    }
    let path = cli
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("--input FILE is required".into()))?;
    let text = read_input(path)?;
    match cli.command {
        Command::TreeStats => tree_stats(cli, &text),
        Command::PlanTree => plan_tree(cli, &text),
        Command::PlanGraph => plan_graph(cli, &text),
        Command::Gossip => gossip(cli, &text),
        Command::Fuse => fuse(cli, &text),
    }
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| input_err(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(input_err)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- tree-stats

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeStatsInput {
    #[serde(alias = "D")]
    arity: u32,
    #[serde(alias = "n_max")]
    max_depth: u32,
    #[serde(default)]
    leaders: Vec<LevelInput>,
    #[serde(default)]
    q: Option<Exact>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelInput {
    depth: u32,
    count: u64,
}

#[derive(Debug, Serialize)]
struct TreeStatsReport {
    arity: u32,
    max_depth: u32,
    node_count: u128,
    mode: Normalization,
    denominator: Denominators,
    levels: Vec<LevelRow>,
    p_any_local_leader: Normalized,
    reliability: Option<ReliabilityTable>,
}

#[derive(Debug, Serialize)]
struct Denominators {
    paper: u128,
    exact: u128,
}

#[derive(Debug, Serialize)]
struct Normalized {
    selected: Exact,
    paper: Exact,
    exact: Exact,
}

#[derive(Debug, Serialize)]
struct LevelRow {
    depth: u32,
    nodes: u128,
    leaders: u128,
    local_leader_fraction: Exact,
    p_leader_at_level: Normalized,
}

#[derive(Debug, Serialize)]
struct ReliabilityTable {
    q: Exact,
    trials: u64,
    seed: u64,
    rows: Vec<ReliabilityRow>,
}

#[derive(Debug, Serialize)]
struct ReliabilityRow {
    depth: u32,
    path_reliability: Exact,
    last_link_failure: Exact,
    simulated_path_reliability: Option<f64>,
    simulated_last_link_failure: Option<f64>,
}

fn normalized(
    mode: Normalization,
    f: impl Fn(Normalization) -> Result<crate::Rational, TreeError>,
) -> Result<Normalized, TreeError> {
    Ok(Normalized {
        selected: Exact(f(mode)?),
        paper: Exact(f(Normalization::Paper)?),
        exact: Exact(f(Normalization::Exact)?),
    })
}

fn tree_stats(cli: &Cli, text: &str) -> Result<Outcome, CliError> {
    let input: TreeStatsInput = parse(text)?;
    let tree = DaryTree::new(input.arity, input.max_depth)?;
    let mode: Normalization = cli.mode.into();
    let profile = LeaderCountProfile::new(
        &tree,
        input
            .leaders
            .iter()
            .map(|l| LevelLeaders {
                depth: l.depth,
                count: l.count as u128,
            })
            .collect(),
    )?;
    let counts: BTreeMap<u32, u128> = profile
        .levels()
        .iter()
        .map(|l| (l.depth, l.count))
        .collect();

    let mut levels = Vec::new();
    for depth in 1..=tree.max_depth() {
        let leaders = counts.get(&depth).copied().unwrap_or(0);
        levels.push(LevelRow {
            depth,
            nodes: tree.nodes_at_depth(depth)?,
            leaders,
            local_leader_fraction: Exact(tree.local_leader_fraction(leaders, depth)?),
            p_leader_at_level: normalized(mode, |m| tree.p_leader_at_level(leaders, depth, m))?,
        });
    }
    let p_any = normalized(mode, |m| tree.p_any_local_leader(&profile, m))?;

    let reliability = match input.q {
        None => None,
        Some(q) => {
            let link = LinkModel::new(q.0.clone())?;
            let mut rows = Vec::new();
            for depth in 1..=tree.max_depth() {
                let sim = if cli.trials > 0 {
                    Some(simulate_links(&link, depth, cli.trials, cli.seed)?)
                } else {
                    None
                };
                rows.push(ReliabilityRow {
                    depth,
                    path_reliability: Exact(link.path_reliability(depth)?),
                    last_link_failure: Exact(link.last_link_failure_prob(depth)?),
                    simulated_path_reliability: sim.map(|s| s.path_reliability()),
                    simulated_last_link_failure: sim.map(|s| s.last_link_failure()),
                });
            }
            Some(ReliabilityTable {
                q,
                trials: cli.trials,
                seed: cli.seed,
                rows,
            })
        }
    };

    let report = TreeStatsReport {
        arity: tree.arity(),
        max_depth: tree.max_depth(),
        node_count: tree.node_count(),
        mode,
        denominator: Denominators {
            paper: tree.denominator(Normalization::Paper),
            exact: tree.denominator(Normalization::Exact),
        },
        levels,
        p_any_local_leader: p_any,
        reliability,
    };
    Ok(Outcome::ok(match cli.format {
        Format::Text => tree_stats_text(&report),
        _ => json(&report),
    }))
}

fn tree_stats_text(r: &TreeStatsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "D-ary tree: D = {}, n_max = {}", r.arity, r.max_depth);
    let _ = writeln!(s, "nodes: {}", r.node_count);
    let _ = writeln!(
        s,
        "denominators: paper = {}, exact = {} (selected: {:?})",
        r.denominator.paper, r.denominator.exact, r.mode
    );
    let _ = writeln!(
        s,
        "depth  nodes  leaders  t_j  p_leader(paper)  p_leader(exact)"
    );
    for l in &r.levels {
        let _ = writeln!(
            s,
            "{:>5}  {:>5}  {:>7}  {}  {}  {}",
            l.depth,
            l.nodes,
            l.leaders,
            l.local_leader_fraction,
            l.p_leader_at_level.paper,
            l.p_leader_at_level.exact
        );
    }
    let _ = writeln!(
        s,
        "p(any local leader): paper = {}, exact = {}",
        r.p_any_local_leader.paper, r.p_any_local_leader.exact
    );
    if let Some(rel) = &r.reliability {
        let _ = writeln!(
            s,
            "link failure q = {} (trials = {}, seed = {})",
            rel.q, rel.trials, rel.seed
        );
        let _ = writeln!(
            s,
            "depth  path_up  last_link_down  mc_path_up  mc_last_link_down"
        );
        for row in &rel.rows {
            let mc = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
            let _ = writeln!(
                s,
                "{:>5}  {:.6}  {:.6}  {}  {}",
                row.depth,
                to_f64(&row.path_reliability.0),
                to_f64(&row.last_link_failure.0),
                mc(row.simulated_path_reliability),
                mc(row.simulated_last_link_failure)
            );
        }
    }
    s
}

// ----------------------------------------------------------------- plan-tree

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LeaderInput {
    Full {
        id: Option<u32>,
        #[serde(alias = "importance")]
        p: Exact,
    },
    Bare(Exact),
}

fn importance_profile(leaders: &[LeaderInput]) -> Result<ImportanceProfile, CliError> {
    let entries = leaders.iter().enumerate().map(|(i, l)| match l {
        LeaderInput::Full { id, p } => (LeaderId(id.unwrap_or(i as u32)), p.0.clone()),
        LeaderInput::Bare(p) => (LeaderId(i as u32), p.0.clone()),
    });
    Ok(ImportanceProfile::new(entries)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanTreeInput {
    #[serde(alias = "D", default = "binary")]
    arity: u32,
    leaders: Vec<LeaderInput>,
}

fn binary() -> u32 {
    2
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlannedLeader {
    pub id: LeaderId,
    pub importance: Exact,
    pub depth: u32,
    pub path: NodePath,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanTreeReport {
    pub arity: u32,
    pub leaders: Vec<PlannedLeader>,
    pub kraft_sum: Exact,
    pub kraft_holds: bool,
    pub expected_depth: Exact,
    pub entropy_bound: f64,
    pub prefix_free: bool,
    pub secure: bool,
}

impl PlanTreeReport {
    /// Rebuilds the path plan carried by the report.
    pub fn to_plan(&self) -> PrefixPlan {
        PrefixPlan {
            arity: self.arity,
            paths: self
                .leaders
                .iter()
                .map(|l| (l.id, l.path.clone()))
                .collect(),
        }
    }
}

fn plan_tree(cli: &Cli, text: &str) -> Result<Outcome, CliError> {
    let input: PlanTreeInput = parse(text)?;
    let profile = importance_profile(&input.leaders)?;
    let depths = optimal_depths(&profile, input.arity)?;
    let plan = assign_paths(&depths).map_err(|e| CliError::Compute(e.to_string()))?;
    let report = PlanTreeReport {
        arity: input.arity,
        leaders: profile
            .weights()
            .iter()
            .map(|(id, p)| PlannedLeader {
                id: *id,
                importance: Exact(p.clone()),
                depth: depths.depth_of(*id).unwrap(),
                path: plan.paths[id].clone(),
            })
            .collect(),
        kraft_sum: Exact(kraft_sum(&depths)),
        kraft_holds: kraft_holds(&depths),
        expected_depth: Exact(expected_depth(&depths, &profile)?),
        entropy_bound: entropy_base_d(&profile, input.arity),
        prefix_free: verify_prefix_free(&plan),
        secure: security_check(&plan),
    };
    Ok(Outcome::ok(match cli.format {
        Format::Json => json(&report),
        Format::Text => plan_tree_text(&report),
        Format::Dot => plan_tree_dot(&report),
    }))
}

fn plan_tree_text(r: &PlanTreeReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "arity: {}", r.arity);
    let _ = writeln!(s, "leader  importance  depth  path");
    for l in &r.leaders {
        let _ = writeln!(
            s,
            "{:>6}  {:>10}  {:>5}  {}",
            l.id, l.importance, l.depth, l.path
        );
    }
    let _ = writeln!(s, "kraft sum: {} (holds: {})", r.kraft_sum, r.kraft_holds);
    let _ = writeln!(
        s,
        "expected depth: {} = {:.6}",
        r.expected_depth,
        to_f64(&r.expected_depth.0)
    );
    let _ = writeln!(s, "entropy bound: {:.6}", r.entropy_bound);
    let _ = writeln!(s, "prefix free: {}, secure: {}", r.prefix_free, r.secure);
    s
}

fn plan_tree_dot(r: &PlanTreeReport) -> String {
    let mut nodes: BTreeMap<String, Option<&PlannedLeader>> = BTreeMap::new();
    nodes.insert(String::new(), None);
    for l in &r.leaders {
        for k in 1..l.path.depth() {
            nodes
                .entry(NodePath(l.path.0[..k].to_vec()).to_string())
                .or_insert(None);
        }
        nodes.insert(l.path.to_string(), Some(l));
    }
    let name = |p: &str| format!("\"n{p}\"");
    let mut s = String::from("digraph prefix_plan {\n    node [shape=circle];\n");
    for (path, leader) in &nodes {
        match leader {
            Some(l) => {
                let _ = writeln!(
                    s,
                    "    {} [shape=doublecircle, style=filled, fillcolor=lightblue, label=\"L{}\\n{}\\np={}\"];",
                    name(path),
                    l.id,
                    path,
                    l.importance
                );
            }
            None if path.is_empty() => {
                let _ = writeln!(
                    s,
                    "    {} [shape=box, label=\"global leader\"];",
                    name(path)
                );
            }
            None => {
                let _ = writeln!(s, "    {} [label=\"{}\"];", name(path), path);
            }
        }
    }
    for l in &r.leaders {
        let p = &l.path;
        for k in 1..=p.depth() {
            let parent = NodePath(p.0[..k - 1].to_vec()).to_string();
            let child = NodePath(p.0[..k].to_vec()).to_string();
            let _ = writeln!(
                s,
                "    {} -> {} [label=\"{}\"];",
                name(&parent),
                name(&child),
                p.0[k - 1]
            );
        }
    }
    s.push_str("}\n");
    dedup_lines(s)
}

/// Shared path prefixes emit the same edge once per leader; keep the first.
fn dedup_lines(s: String) -> String {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = String::new();
    for line in s.lines() {
        if !line.contains("->") || seen.insert(line.to_string()) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

// ---------------------------------------------------------------- plan-graph

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanGraphInput {
    vertices: Vec<String>,
    edges: Vec<(String, String, f64)>,
    root: String,
    #[serde(alias = "profile")]
    leaders: Vec<LeaderInput>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphEdgeOut(pub String, pub String, pub f64);

#[derive(Debug, Serialize, Deserialize)]
pub struct MstOut {
    pub edges: Vec<GraphEdgeOut>,
    pub total_weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddedOut {
    pub children: BTreeMap<String, Vec<String>>,
    pub uncovered: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlacementOut {
    pub id: LeaderId,
    pub importance: Exact,
    pub vertex: String,
    pub depth: u32,
    pub path: Vec<String>,
    pub code: NodePath,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanGraphReport {
    pub root: String,
    pub mst: MstOut,
    pub embedded_binary_tree: EmbeddedOut,
    pub placements: Vec<PlacementOut>,
    pub realized_expected_depth: Exact,
    pub ideal_expected_depth: Exact,
    pub verified: bool,
}

impl PlanGraphReport {
    /// Rebuilds a plan over `graph` from the report, or `None` if it names
    /// vertices the graph lacks.
    pub fn to_plan(&self, graph: &WeightedGraph) -> Option<DoublyOptimalPlan> {
        let ix = |name: &str| graph.vertex(name);
        let n = graph.vertex_count();
        let root = ix(&self.root)?;
        let mut edges = Vec::new();
        for GraphEdgeOut(a, b, w) in &self.mst.edges {
            let (a, b) = (ix(a)?, ix(b)?);
            edges.push(Edge {
                u: a.min(b),
                v: a.max(b),
                weight: *w,
            });
        }
        let mut children = vec![Vec::new(); n];
        for (v, kids) in &self.embedded_binary_tree.children {
            children[ix(v)?] = kids.iter().map(|k| ix(k)).collect::<Option<_>>()?;
        }
        let mut depth = vec![None; n];
        depth[root] = Some(0);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                depth[c] = depth[v].map(|d| d + 1);
                stack.push(c);
            }
        }
        let uncovered = (0..n).filter(|&v| depth[v].is_none()).collect();
        let mut placements = BTreeMap::new();
        for p in &self.placements {
            let path: Vec<usize> = p.path.iter().map(|v| ix(v)).collect::<Option<_>>()?;
            placements.insert(
                p.id,
                Placement {
                    vertex: ix(&p.vertex)?,
                    depth: p.depth,
                    path,
                    code: p.code.clone(),
                },
            );
        }
        let profile = ImportanceProfile::new(
            self.placements
                .iter()
                .map(|p| (p.id, p.importance.0.clone())),
        )
        .ok()?;
        Some(DoublyOptimalPlan {
            root,
            mst: SpanningTree {
                edges,
                total_weight: self.mst.total_weight,
            },
            embedded: EmbeddedBinaryTree {
                root,
                children,
                depth,
                uncovered,
            },
            profile,
            placements,
            realized_expected_depth: self.realized_expected_depth.0.clone(),
            ideal_expected_depth: self.ideal_expected_depth.0.clone(),
        })
    }
}

fn plan_graph(cli: &Cli, text: &str) -> Result<Outcome, CliError> {
    let input: PlanGraphInput = parse(text)?;
    let graph = WeightedGraph::new(input.vertices.iter().cloned(), input.edges.iter().cloned())?;
    if graph.vertex(&input.root).is_none() {
        return Err(GraphError::RootNotInGraph(input.root).into());
    }
    let profile = importance_profile(&input.leaders)?;
    let plan = plan_doubly_optimal(&graph, &input.root, &profile)?;
    let name = |v: usize| graph.name(v).to_string();

    let report = PlanGraphReport {
        root: name(plan.root),
        mst: MstOut {
            edges: plan
                .mst
                .edges
                .iter()
                .map(|e| GraphEdgeOut(name(e.u), name(e.v), e.weight))
                .collect(),
            total_weight: plan.mst.total_weight,
        },
        embedded_binary_tree: EmbeddedOut {
            children: plan
                .embedded
                .children
                .iter()
                .enumerate()
                .filter(|(v, kids)| plan.embedded.covers(*v) && !kids.is_empty())
                .map(|(v, kids)| (name(v), kids.iter().map(|&c| name(c)).collect()))
                .collect(),
            uncovered: plan.embedded.uncovered.iter().map(|&v| name(v)).collect(),
        },
        placements: plan
            .placements
            .iter()
            .map(|(id, p)| PlacementOut {
                id: *id,
                importance: Exact(plan.profile.get(*id).unwrap().clone()),
                vertex: name(p.vertex),
                depth: p.depth,
                path: p.path.iter().map(|&v| name(v)).collect(),
                code: p.code.clone(),
            })
            .collect(),
        realized_expected_depth: Exact(plan.realized_expected_depth.clone()),
        ideal_expected_depth: Exact(plan.ideal_expected_depth.clone()),
        verified: verify_plan(&plan, &graph),
    };
    Ok(Outcome::ok(match cli.format {
        Format::Json => json(&report),
        Format::Text => plan_graph_text(&report),
        Format::Dot => plan_graph_dot(&report, &graph),
    }))
}

fn plan_graph_text(r: &PlanGraphReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "root: {}", r.root);
    let _ = writeln!(s, "minimum spanning tree (weight {}):", r.mst.total_weight);
    for e in &r.mst.edges {
        let _ = writeln!(s, "  {} - {} ({})", e.0, e.1, e.2);
    }
    let _ = writeln!(s, "embedded binary tree:");
    for (v, kids) in &r.embedded_binary_tree.children {
        let _ = writeln!(s, "  {} -> {}", v, kids.join(", "));
    }
    if !r.embedded_binary_tree.uncovered.is_empty() {
        let _ = writeln!(
            s,
            "  uncovered: {}",
            r.embedded_binary_tree.uncovered.join(", ")
        );
    }
    let _ = writeln!(s, "leader  importance  vertex  depth  path");
    for p in &r.placements {
        let _ = writeln!(
            s,
            "{:>6}  {:>10}  {:>6}  {:>5}  {}",
            p.id,
            p.importance,
            p.vertex,
            p.depth,
            p.path.join(" > ")
        );
    }
    let _ = writeln!(
        s,
        "expected depth: realized {} vs ideal {}",
        r.realized_expected_depth, r.ideal_expected_depth
    );
    let _ = writeln!(s, "verified: {}", r.verified);
    s
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

fn plan_graph_dot(r: &PlanGraphReport, graph: &WeightedGraph) -> String {
    let leaders: BTreeMap<&str, &PlacementOut> = r
        .placements
        .iter()
        .map(|p| (p.vertex.as_str(), p))
        .collect();
    let embedded: std::collections::BTreeSet<(String, String)> = r
        .embedded_binary_tree
        .children
        .iter()
        .flat_map(|(v, kids)| kids.iter().map(move |c| (v.clone(), c.clone())))
        .collect();
    let mut s = String::from("graph multicast_plan {\n");
    for v in graph.names() {
        let attrs = if v == &r.root {
            "shape=box, style=filled, fillcolor=gold".to_string()
        } else if let Some(p) = leaders.get(v.as_str()) {
            format!(
                "style=filled, fillcolor=lightblue, label=\"{}\\nL{} p={}\"",
                v, p.id, p.importance
            )
        } else if r.embedded_binary_tree.uncovered.contains(v) {
            "style=dashed".to_string()
        } else {
            String::new()
        };
        let _ = writeln!(s, "    {} [{}];", dot_id(v), attrs);
    }
    for e in &r.mst.edges {
        let in_tree = embedded.contains(&(e.0.clone(), e.1.clone()))
            || embedded.contains(&(e.1.clone(), e.0.clone()));
        let style = if in_tree { "bold" } else { "dashed" };
        let _ = writeln!(
            s,
            "    {} -- {} [label=\"{}\", style={}];",
            dot_id(&e.0),
            dot_id(&e.1),
            e.2,
            style
        );
    }
    s.push_str("}\n");
    s
}

// -------------------------------------------------------------------- gossip

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GossipInput {
    nodes: Vec<SensorNode>,
    base_station: Position,
    radius: f64,
    probabilities: Vec<f64>,
    origin: u32,
    #[serde(default = "one_sector")]
    sectors: u32,
}

fn one_sector() -> u32 {
    1
}

#[derive(Debug, Serialize)]
struct LocationRow {
    id: u32,
    level: Option<u32>,
    sector: u32,
}

#[derive(Debug, Serialize)]
struct GossipReport {
    origin: u32,
    origin_level: u32,
    probabilities: Vec<f64>,
    simulation: SimReport,
    sectors: u32,
    localization: Vec<LocationRow>,
    unreachable: Vec<u32>,
}

fn gossip(cli: &Cli, text: &str) -> Result<Outcome, CliError> {
    let input: GossipInput = parse(text)?;
    let field = Field::new(input.nodes, input.base_station, input.radius)?;
    let config = GossipConfig::new(input.probabilities)?;
    let leveling = assign_levels(&field);
    let sectoring = assign_sectors(&field, input.sectors)?;
    let sim = GossipSim::new(&field, &leveling, &config, input.origin)?;
    let simulation = sim.run(cli.trials, cli.seed)?;

    if let Some(path) = &cli.trace {
        let mut trace = String::new();
        for t in 0..cli.trials.min(TRACE_TRIALS) {
            trace.push_str(&sim.run_trial(cli.seed, t, true).to_string());
        }
        std::fs::write(path, trace)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }

    let localization = field
        .nodes()
        .iter()
        .map(|n| LocationRow {
            id: n.id,
            level: locate(n.id, &leveling, &sectoring).ok().map(|l| l.level),
            sector: sectoring.sectors[&n.id],
        })
        .collect();
    let report = GossipReport {
        origin: input.origin,
        origin_level: leveling.level(input.origin).unwrap(),
        probabilities: config.probabilities().to_vec(),
        simulation,
        sectors: input.sectors,
        localization,
        unreachable: leveling.unreachable.clone(),
    };
    Ok(Outcome::ok(match cli.format {
        Format::Text => gossip_text(&report),
        _ => json(&report),
    }))
}

fn gossip_text(r: &GossipReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "origin: {} (level {})", r.origin, r.origin_level);
    let _ = writeln!(s, "level probabilities: {:?}", r.probabilities);
    let sim = &r.simulation;
    let _ = writeln!(
        s,
        "delivery: {:.6} ({} of {} trials, seed {})",
        sim.delivery_probability, sim.delivered, sim.trials, sim.seed
    );
    let _ = writeln!(
        s,
        "mean transmissions per event: {:.6}",
        sim.mean_transmissions
    );
    let _ = writeln!(s, "node  level  sector (K = {})", r.sectors);
    for row in &r.localization {
        let level = row.level.map_or("-".to_string(), |l| l.to_string());
        let _ = writeln!(s, "{:>4}  {:>5}  {:>6}", row.id, level, row.sector);
    }
    s
}

// ---------------------------------------------------------------------- fuse

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuseInput {
    intervals: Vec<Interval>,
    f: usize,
    #[serde(default)]
    probe: Option<ProbeInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeInput {
    epsilon: f64,
    #[serde(default = "default_probes")]
    probes: u64,
}

fn default_probes() -> u64 {
    1000
}

#[derive(Debug, Serialize)]
struct ErrorOut {
    kind: &'static str,
    message: String,
}

#[derive(Debug, Serialize)]
struct FusionResult {
    function: FusionFn,
    rule: String,
    output: Option<Vec<Interval>>,
    error: Option<ErrorOut>,
}

#[derive(Debug, Serialize)]
struct FuseReport {
    n: usize,
    f: usize,
    threshold: usize,
    results: Vec<FusionResult>,
    overlap_profile: OverlapProfile,
    probes: Vec<ProbeOutcome>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ProbeOutcome {
    Done(ProbeReport),
    Failed { function: FusionFn, error: ErrorOut },
}

fn error_out(e: &FusionError) -> ErrorOut {
    let kind = match e {
        FusionError::NoAgreement { .. } => "NoAgreement",
        FusionError::InconsistentInputs { .. } => "InconsistentInputs",
        FusionError::InvalidInterval { .. } => "InvalidInterval",
        FusionError::Empty => "Empty",
        FusionError::FaultBound { .. } => "FaultBound",
        FusionError::InvalidEpsilon => "InvalidEpsilon",
    };
    ErrorOut {
        kind,
        message: e.to_string(),
    }
}

fn rule(function: FusionFn, problem: &FusionProblem, profile: &OverlapProfile) -> String {
    let (n, f, t) = (
        problem.intervals().len(),
        problem.faults(),
        problem.threshold(),
    );
    match function {
        FusionFn::M => format!("M: hull of points covered by at least n - f = {t} intervals"),
        FusionFn::Omega => format!("Omega: regions of peak overlap count {}", profile.peak()),
        FusionFn::N => format!("N: regions with overlap count in [{t}, {n}]"),
        FusionFn::S => {
            let k = ordinal(f + 1);
            format!("S: [{k} largest left endpoint, {k} smallest right endpoint]")
        }
    }
}

fn ordinal(k: usize) -> String {
    let suffix = match (k % 10, k % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{k}{suffix}")
}

fn fuse(cli: &Cli, text: &str) -> Result<Outcome, CliError> {
    let input: FuseInput = parse(text)?;
    let problem = FusionProblem::new(input.intervals, input.f).map_err(input_err)?;
    if let Some(p) = &input.probe {
        if !(p.epsilon.is_finite() && p.epsilon >= 0.0) {
            return Err(input_err(FusionError::InvalidEpsilon));
        }
    }
    let profile = omega_function(&problem);
    let mut failed = false;
    let mut results = Vec::new();
    let mut probes = Vec::new();
    for function in cli.function.selected() {
        let outcome = function.evaluate(&problem);
        failed |= outcome.is_err();
        results.push(FusionResult {
            function,
            rule: rule(function, &problem, &profile),
            error: outcome.as_ref().err().map(error_out),
            output: outcome.ok(),
        });
        if let Some(p) = &input.probe {
            probes.push(
                match lipschitz_probe(function, &problem, p.epsilon, p.probes, cli.seed) {
                    Ok(r) => ProbeOutcome::Done(r),
                    Err(e) => ProbeOutcome::Failed {
                        function,
                        error: error_out(&e),
                    },
                },
            );
        }
    }
    let report = FuseReport {
        n: problem.intervals().len(),
        f: problem.faults(),
        threshold: problem.threshold(),
        results,
        overlap_profile: profile,
        probes,
    };
    let body = match cli.format {
        Format::Text => fuse_text(&report),
        _ => json(&report),
    };
    Ok(Outcome {
        body,
        code: if failed { EXIT_COMPUTE } else { EXIT_OK },
    })
}

fn fuse_text(r: &FuseReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n = {}, f = {}, threshold n - f = {}",
        r.n, r.f, r.threshold
    );
    for res in &r.results {
        match (&res.output, &res.error) {
            (Some(out), _) => {
                let parts: Vec<String> = out.iter().map(Interval::to_string).collect();
                let _ = writeln!(s, "{}: {}", res.function.name(), parts.join(" "));
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "{}: {} ({})", res.function.name(), e.kind, e.message);
            }
            (None, None) => {}
        }
        let _ = writeln!(s, "    {}", res.rule);
    }
    let _ = writeln!(s, "overlap profile:");
    let p = &r.overlap_profile;
    for (i, b) in p.breakpoints.iter().enumerate() {
        let _ = writeln!(s, "    at {b}: {}", p.at_point[i]);
        if let Some(c) = p.between.get(i) {
            let _ = writeln!(s, "    ({b}, {}): {c}", p.breakpoints[i + 1]);
        }
    }
    for probe in &r.probes {
        match probe {
            ProbeOutcome::Done(pr) => {
                let _ = writeln!(
                    s,
                    "probe {}: eps = {}, max displacement = {} over {} probes ({} undefined)",
                    pr.function.name(),
                    pr.epsilon,
                    pr.max_displacement,
                    pr.probes,
                    pr.undefined
                );
            }
            ProbeOutcome::Failed { function, error } => {
                let _ = writeln!(s, "probe {}: {}", function.name(), error.kind);
            }
        }
    }
    s
}
