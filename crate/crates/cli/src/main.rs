//! `qloc`: experiment harness for grid localization.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 when a run exceeds the
//! simulator's qubit budget.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qloc_core::classical::{mcl_localize, query_comparison, MclConfig, QueryComparison};
use qloc_core::errmodel::{estimate, Budget, DevicePresets, ErrorEstimate, Exponent};
use qloc_core::gridmap::{compute_costmap, encode_strings, perceive, Cell, GridMap};
use qloc_core::grover2d::{
    budget, plan, run_localization, GroverError, LocalizationReport, Mode, RunOptions,
    SearchProblem,
};
use qloc_core::statevec::{NoiseModel, SimError, DEFAULT_MAX_QUBITS};
use rayon::prelude::*;
use serde::Serialize;

/// Device used for closed-form estimates when `--noise` is not given.
const DEFAULT_DEVICE: &str = "ibm-kyiv-2024";

const FIG21_MAPS: [(usize, usize, &str); 6] = [
    (1, 2, include_str!("../../../maps/fig21_1x2.txt")),
    (2, 2, include_str!("../../../maps/fig21_2x2.txt")),
    (3, 3, include_str!("../../../maps/fig21_3x3.txt")),
    (4, 4, include_str!("../../../maps/fig21_4x4.txt")),
    (5, 5, include_str!("../../../maps/fig21_5x5.txt")),
    (6, 6, include_str!("../../../maps/fig21_6x6.txt")),
];

#[derive(Parser)]
#[command(
    name = "qloc",
    version,
    about = "Grid robot localization with a 2D Grover search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obstacle-influence costmap as CSV.
    Costmap(Common),
    /// What the robot perceives, as JSON.
    Perceive(Common),
    /// Grover localization report as JSON.
    Grover(GroverArgs),
    /// Monte Carlo Localization summary as JSON.
    Mcl(MclArgs),
    /// Scalability table as CSV.
    Scale(ScaleArgs),
    /// Grover against MCL on the same map, as JSON.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Map file.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    shots: u64,
    #[arg(long, default_value = "folded")]
    mode: Mode,
    /// Device preset name or explicit `p_gate,p_meas`.
    #[arg(long)]
    noise: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_QUBITS)]
    max_qubits: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Search {
    /// Perception search when the map has a robot, obstacle search otherwise.
    Auto,
    /// Match the robot's perceived row and column against the costmap.
    Perception,
    /// Locate the obstacle cell of an occupancy grid.
    Obstacle,
}

#[derive(Args)]
struct GroverArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "auto")]
    search: Search,
    /// Failure-estimate exponent: circuit depth or element count.
    #[arg(long, default_value = "depth")]
    per: Exponent,
    /// Also write the outcome histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct MclArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    particles: usize,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Also write the per-iteration particle trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated `RxC` sizes.
    #[arg(long, default_value = "1x2,2x2,3x3,4x4,5x5,6x6")]
    sizes: String,
    #[arg(long, default_value = "depth")]
    per: Exponent,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    particles: usize,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
}

enum Failure {
    Input(String),
    Resource(String),
}

impl From<GroverError> for Failure {
    fn from(e: GroverError) -> Self {
        match e {
            GroverError::FaithfulTooWide { .. }
            | GroverError::Sim(SimError::WidthTooLarge { .. }) => Failure::Resource(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Costmap(c) => cmd_costmap(&c),
        Command::Perceive(c) => cmd_perceive(&c),
        Command::Grover(a) => cmd_grover(&a),
        Command::Mcl(a) => cmd_mcl(&a),
        Command::Scale(a) => cmd_scale(&a),
        Command::Compare(a) => cmd_compare(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Resource(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_map(common: &Common) -> Result<GridMap, Failure> {
    let path = common
        .map
        .as_ref()
        .ok_or_else(|| Failure::Input("--map is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    GridMap::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_to(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(input),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// `--noise` as a preset name or `p_gate,p_meas`.
fn parse_noise(spec: &str) -> Result<(String, NoiseModel), Failure> {
    if let Some((pg, pm)) = spec.split_once(',') {
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Input(format!("invalid probability `{s}` in --noise")))
        };
        let model = NoiseModel::new(parse(pg)?, parse(pm)?).map_err(input)?;
        return Ok((spec.to_string(), model));
    }
    let model = DevicePresets::builtin().get(spec).map_err(input)?;
    Ok((spec.to_string(), model))
}

fn noise(common: &Common) -> Result<Option<(String, NoiseModel)>, Failure> {
    common.noise.as_deref().map(parse_noise).transpose()
}

/// Device for closed-form estimates: `--noise` when given, else the default preset.
fn estimate_device(common: &Common) -> Result<(String, NoiseModel), Failure> {
    match noise(common)? {
        Some(n) => Ok(n),
        None => parse_noise(DEFAULT_DEVICE),
    }
}

fn cmd_costmap(common: &Common) -> CmdResult {
    let map = load_map(common)?;
    write_to(common.out.as_deref(), &compute_costmap(&map).to_csv())
}

#[derive(Serialize)]
struct PerceiveReport {
    robot: Cell,
    sensor_range: usize,
    row_pattern: Vec<u32>,
    col_pattern: Vec<u32>,
    anchor_offset_row: usize,
    anchor_offset_col: usize,
    /// The robot's full row and column of the stored costmap, one digit per cell.
    global_row: Option<String>,
    global_col: Option<String>,
}

fn cmd_perceive(common: &Common) -> CmdResult {
    let map = load_map(common)?;
    let p = perceive(&map).map_err(input)?;
    let robot = map.robot().expect("perceive succeeded");
    let strings = encode_strings(&compute_costmap(&map), robot.row, robot.col).ok();
    let report = PerceiveReport {
        robot,
        sensor_range: map.sensor_range(),
        row_pattern: p.row_pattern().to_vec(),
        col_pattern: p.col_pattern().to_vec(),
        anchor_offset_row: p.anchor_offset_row(),
        anchor_offset_col: p.anchor_offset_col(),
        global_row: strings.as_ref().map(|s| s.0.clone()),
        global_col: strings.map(|s| s.1),
    };
    write_to(common.out.as_deref(), &to_json(&report))
}

fn search_problem(map: &GridMap, search: Search) -> Result<SearchProblem, Failure> {
    match (search, map.robot()) {
        (Search::Obstacle, _) | (Search::Auto, None) => Ok(SearchProblem::obstacle_search(map)),
        (Search::Perception | Search::Auto, _) => Ok(SearchProblem::from_map(map)?),
    }
}

fn run_options(common: &Common, exponent: Exponent) -> Result<RunOptions, Failure> {
    Ok(RunOptions {
        shots: common.shots,
        noise: noise(common)?.map(|(_, n)| n),
        seed: common.seed,
        max_qubits: common.max_qubits,
        exponent,
    })
}

#[derive(Serialize)]
struct GroverOutput {
    search: &'static str,
    device: String,
    report: LocalizationReport,
    /// Closed-form estimate; uses the default preset when no noise was simulated.
    estimate: ErrorEstimate,
}

fn cmd_grover(args: &GroverArgs) -> CmdResult {
    let common = &args.common;
    let map = load_map(common)?;
    let problem = search_problem(&map, args.search)?;
    let search = match (args.search, map.robot()) {
        (Search::Obstacle, _) | (Search::Auto, None) => "obstacle",
        _ => "perception",
    };
    let report = run_localization(&problem, common.mode, &run_options(common, args.per)?)?;
    let (device, model) = estimate_device(common)?;
    let est = estimate(report.budget, &model, report.plan.search_qubits, args.per);
    if let Some(path) = &args.histogram {
        write_to(Some(path), &report.histogram.to_csv())?;
    }
    let output = GroverOutput {
        search,
        device,
        report,
        estimate: est,
    };
    write_to(common.out.as_deref(), &to_json(&output))
}

#[derive(Serialize)]
struct MclOutput {
    start: Cell,
    estimate: Cell,
    true_cell: Cell,
    correct: bool,
    converged: bool,
    iterations_used: usize,
    particles: usize,
    sense_evaluations: u64,
}

fn mcl_config(particles: usize, max_iters: usize) -> Result<MclConfig, Failure> {
    if particles == 0 {
        return Err(Failure::Input("--particles must be at least 1".into()));
    }
    Ok(MclConfig {
        particle_count: particles,
        max_iters,
        ..MclConfig::default()
    })
}

fn cmd_mcl(args: &MclArgs) -> CmdResult {
    let common = &args.common;
    let map = load_map(common)?;
    let start = map
        .robot()
        .ok_or_else(|| Failure::Input("the map has no robot cell".into()))?;
    let config = mcl_config(args.particles, args.max_iters)?;
    let result = mcl_localize(&map, start, &config, common.seed).map_err(input)?;
    if let Some(path) = &args.trace {
        write_to(Some(path), &result.trace_csv())?;
    }
    let output = MclOutput {
        start,
        estimate: result.estimate,
        true_cell: result.true_cell,
        correct: result.estimate == result.true_cell,
        converged: result.converged,
        iterations_used: result.iterations_used,
        particles: args.particles,
        sense_evaluations: result.sense_evaluations,
    };
    write_to(common.out.as_deref(), &to_json(&output))
}

fn parse_size(token: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Input(format!("malformed size `{token}` (expected RxC)"));
    let (r, c) = token.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let rows: usize = r.parse().map_err(|_| bad())?;
    let cols: usize = c.parse().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok((rows, cols))
}

/// The printed scalability grid for this size, or one centred obstacle.
fn scale_map(rows: usize, cols: usize) -> GridMap {
    FIG21_MAPS
        .iter()
        .find(|(r, c, _)| (*r, *c) == (rows, cols))
        .map(|(_, _, text)| GridMap::parse(text).expect("bundled map parses"))
        .unwrap_or_else(|| {
            GridMap::new(rows, cols, [Cell::new(rows / 2, cols / 2)], None, 1, 1)
                .expect("centre cell is inside the grid")
        })
}

struct ScaleRow {
    size: String,
    qubits: usize,
    repetitions: usize,
    budget: Budget,
    error: f64,
    known: usize,
    /// Raw modal position and the best position passing the match check,
    /// or why the folded run could not be simulated.
    simulated: Result<(Option<usize>, Option<usize>), String>,
}

fn scale_row(
    rows: usize,
    cols: usize,
    seed: u64,
    common: &Common,
    device: &NoiseModel,
    per: Exponent,
) -> Result<ScaleRow, Failure> {
    let map = scale_map(rows, cols);
    let problem = SearchProblem::obstacle_search(&map);
    let faithful = plan(&problem, Mode::Faithful)?;
    let b = budget(&faithful);
    let known = map
        .obstacles()
        .iter()
        .next()
        .map(|c| c.row * cols + c.col)
        .expect("scale maps hold one obstacle");
    let options = RunOptions {
        shots: common.shots,
        noise: noise(common)?.map(|(_, n)| n),
        seed,
        max_qubits: common.max_qubits,
        exponent: per,
    };
    let simulated = match run_localization(&problem, Mode::Folded, &options) {
        Ok(report) => Ok((
            report.decoded.map(|a| a.pose.row * cols + a.pose.col),
            report.position,
        )),
        Err(e) => match Failure::from(e) {
            Failure::Resource(msg) => Err(msg),
            Failure::Input(msg) => return Err(Failure::Input(msg)),
        },
    };
    Ok(ScaleRow {
        size: format!("{rows}x{cols}"),
        qubits: faithful.total_qubits,
        repetitions: faithful.repetitions,
        budget: b,
        error: estimate(b, device, faithful.search_qubits, per).p_gate_failure,
        known,
        simulated,
    })
}

fn cmd_scale(args: &ScaleArgs) -> CmdResult {
    let common = &args.common;
    let sizes = args
        .sizes
        .split(',')
        .map(parse_size)
        .collect::<Result<Vec<_>, _>>()?;
    let (_, device) = estimate_device(common)?;
    let rows: Vec<Result<ScaleRow, Failure>> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &(r, c))| scale_row(r, c, common.seed + i as u64, common, &device, args.per))
        .collect();
    let mut csv = String::from(
        "size,req_qubits,repetitions,elements,depth,error_estimate,known_position,modal_position,confirmed_position,match\n",
    );
    for row in rows {
        let row = row?;
        let show = |p: Option<usize>| p.map_or("none".to_string(), |p| p.to_string());
        let (modal, confirmed, ok) = match row.simulated {
            Ok((modal, confirmed)) => (show(modal), show(confirmed), confirmed == Some(row.known)),
            Err(_) => ("too-wide".into(), "too-wide".into(), false),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{:.4},{},{},{},{}\n",
            row.size,
            row.qubits,
            row.repetitions,
            row.budget.elements,
            row.budget.depth,
            row.error,
            row.known,
            modal,
            confirmed,
            ok
        ));
    }
    write_to(common.out.as_deref(), &csv)
}

#[derive(Serialize)]
struct GroverSide {
    decoded: Option<Cell>,
    confirmed: Option<Cell>,
    oracle_calls: usize,
    search_positions: usize,
    modal_frequency: f64,
}

#[derive(Serialize)]
struct MclSide {
    estimate: Cell,
    true_cell: Cell,
    iterations_used: usize,
    sense_evaluations: u64,
}

#[derive(Serialize)]
struct CompareOutput {
    robot: Cell,
    grover: GroverSide,
    mcl: MclSide,
    /// The map's free cells, then the two illustrative sizes.
    query_comparison: Vec<QueryComparison>,
}

fn cmd_compare(args: &CompareArgs) -> CmdResult {
    let common = &args.common;
    let map = load_map(common)?;
    let robot = map
        .robot()
        .ok_or_else(|| Failure::Input("the map has no robot cell".into()))?;
    let problem = SearchProblem::from_map(&map)?;
    let options = run_options(common, Exponent::Depth)?;
    let report = run_localization(&problem, Mode::Folded, &options)?;
    let mcl = mcl_localize(
        &map,
        robot,
        &mcl_config(args.particles, args.max_iters)?,
        common.seed,
    )
    .map_err(input)?;
    let free = map.free_cells().count() as u64;
    let query = [free, 100, 1_000_000]
        .into_iter()
        .map(query_comparison)
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let output = CompareOutput {
        robot,
        grover: GroverSide {
            decoded: report.decoded.map(|a| a.pose),
            confirmed: report.confirmed.map(|a| a.pose),
            oracle_calls: report.plan.repetitions,
            search_positions: report.plan.n,
            modal_frequency: report.modal_frequency,
        },
        mcl: MclSide {
            estimate: mcl.estimate,
            true_cell: mcl.true_cell,
            iterations_used: mcl.iterations_used,
            sense_evaluations: mcl.sense_evaluations,
        },
        query_comparison: query,
    };
    write_to(common.out.as_deref(), &to_json(&output))
}
