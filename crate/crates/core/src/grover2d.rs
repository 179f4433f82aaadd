//! Two-dimensional Grover localization.
//!
//! The robot's row and column perceptions are slid over the stored costmap.
//! Every placement of the pair (an *anchor*) is one basis state of the search
//! register, and the oracle marks the anchors where both patterns agree with
//! the map cell for cell.
//!
//! Two oracle constructions are provided:
//!
//! * **folded** specializes the oracle to the known map: one phase flip per
//!   classically matching anchor, acting on the search register only;
//! * **faithful** loads the map and both patterns into qubits and compares
//!   them with reversible logic, so its width follows the full register
//!   budget `search + map + patterns + output + ancillas`.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errmodel::{estimate, Budget, ErrorEstimate, Exponent};
use crate::gridmap::{compute_costmap, perceive, Cell, Costmap, GridMap, MapError, Perception};
use crate::statevec::{
    draw_errors, readout_flips, Circuit, Control, GateKind, GateOp, Histogram, NoiseModel, Sampler,
    SimError, StateVector, DEFAULT_MAX_QUBITS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroverError {
    #[error(
        "faithful mode needs {width} qubits but the simulator budget is {max_qubits}; \
         folded mode runs the same search on {search_qubits} qubits"
    )]
    FaithfulTooWide {
        width: usize,
        max_qubits: usize,
        search_qubits: usize,
    },
    #[error("{which} pattern of length {len} does not fit a map side of {side}")]
    PatternTooLong {
        which: &'static str,
        len: usize,
        side: usize,
    },
    #[error("pattern code {code} does not fit in {qubits_per_cell} bits")]
    PatternCode { code: u32, qubits_per_cell: u32 },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Folded,
    Faithful,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "folded" => Ok(Mode::Folded),
            "faithful" => Ok(Mode::Faithful),
            other => Err(format!(
                "unknown mode `{other}` (expected folded or faithful)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Folded => "folded",
            Mode::Faithful => "faithful",
        })
    }
}

/// A stored costmap together with what the robot perceived.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchProblem {
    costmap: Costmap,
    perception: Perception,
}

impl SearchProblem {
    pub fn new(costmap: Costmap, perception: Perception) -> Result<Self, GroverError> {
        let top = (1u32 << costmap.qubits_per_cell()) - 1;
        if let Some(&code) = perception
            .row_pattern()
            .iter()
            .chain(perception.col_pattern())
            .find(|&&c| c > top)
        {
            return Err(GroverError::PatternCode {
                code,
                qubits_per_cell: costmap.qubits_per_cell(),
            });
        }
        Ok(SearchProblem {
            costmap,
            perception,
        })
    }

    /// Costmap of the whole map against the robot's local perception.
    pub fn from_map(map: &GridMap) -> Result<Self, GroverError> {
        let perception = perceive(map)?;
        SearchProblem::new(compute_costmap(map), perception)
    }

    /// Looks for the single obstacle cell of an occupancy grid: every cell is
    /// one search position and the pattern is a lone top code.
    pub fn obstacle_search(map: &GridMap) -> Self {
        let top = map.max_code();
        SearchProblem {
            costmap: Costmap::occupancy(map),
            perception: Perception::new(vec![top], vec![top], 0, 0)
                .expect("single-cell pattern is always consistent"),
        }
    }

    pub fn costmap(&self) -> &Costmap {
        &self.costmap
    }

    pub fn perception(&self) -> &Perception {
        &self.perception
    }
}

/// One placement of the pattern pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Anchor {
    /// Row-major index over valid anchors; the search-register value.
    pub index: usize,
    /// Upper-left corner of the bounding box covered by both patterns.
    pub row: usize,
    pub col: usize,
    /// Robot cell implied by this placement.
    pub pose: Cell,
}

/// Qubit index ranges of the faithful layout. Only `search` is populated in
/// folded mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Registers {
    pub search: Range<usize>,
    pub map: Range<usize>,
    pub row_pattern: Range<usize>,
    pub col_pattern: Range<usize>,
    pub output: Range<usize>,
    pub ancilla: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroverPlan {
    pub mode: Mode,
    pub rows: usize,
    pub cols: usize,
    pub qubits_per_cell: u32,
    pub row_pattern_len: usize,
    pub col_pattern_len: usize,
    pub anchor_offset_row: usize,
    pub anchor_offset_col: usize,
    pub anchor_rows: usize,
    pub anchor_cols: usize,
    /// Number of valid anchors.
    pub n: usize,
    /// Solution count used for the iteration schedule.
    pub m: usize,
    pub search_qubits: usize,
    pub repetitions: usize,
    pub total_qubits: usize,
    pub registers: Registers,
    /// Matching anchor indices baked into a folded oracle; always empty in
    /// faithful mode, whose circuit does not depend on map content.
    pub marked: Vec<usize>,
}

impl GroverPlan {
    pub fn anchor(&self, index: usize) -> Option<Anchor> {
        (index < self.n).then(|| {
            let row = index / self.anchor_cols;
            let col = index % self.anchor_cols;
            Anchor {
                index,
                row,
                col,
                pose: Cell::new(row + self.anchor_offset_col, col + self.anchor_offset_row),
            }
        })
    }

    pub fn anchor_index(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.anchor_rows && col < self.anchor_cols).then(|| row * self.anchor_cols + col)
    }

    pub fn anchors(&self) -> impl Iterator<Item = Anchor> + '_ {
        (0..self.n).filter_map(|i| self.anchor(i))
    }

    /// Qubits sampled at the end of a run.
    pub fn measured(&self) -> Vec<usize> {
        self.registers.search.clone().collect()
    }

    /// Register width of the circuits built for this plan.
    pub fn width(&self) -> usize {
        self.total_qubits
    }

    fn ancillas(&self) -> usize {
        self.registers.ancilla.len()
    }

    fn map_qubit(&self, cell: Cell, bit: u32) -> usize {
        self.registers.map.start
            + (cell.row * self.cols + cell.col) * self.qubits_per_cell as usize
            + bit as usize
    }
}

/// `⌈log₂ n⌉`, at least 1.
pub fn search_qubits(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// `⌈(π/4)·√(n/m)⌉`.
pub fn repetitions(n: usize, m: usize) -> usize {
    (FRAC_PI_4 * (n as f64 / m.max(1) as f64).sqrt()).ceil() as usize
}

/// Probability of measuring one of `m` marked states among `n` after `r`
/// rounds: `sin²((2r+1)·asin(√(m/n)))`.
pub fn ideal_success_probability(n: u64, m: u64, r: u64) -> f64 {
    if m == 0 || n == 0 {
        return 0.0;
    }
    let theta = (m as f64 / n as f64).min(1.0).sqrt().asin();
    ((2 * r + 1) as f64 * theta).sin().powi(2)
}

fn anchor_grid(costmap: &Costmap, perception: &Perception) -> Option<(usize, usize)> {
    let (p_r, p_c) = (
        perception.row_pattern().len(),
        perception.col_pattern().len(),
    );
    (p_r <= costmap.cols() && p_c <= costmap.rows())
        .then(|| (costmap.rows() - p_c + 1, costmap.cols() - p_r + 1))
}

/// Every anchor at which both patterns equal the stored codes exactly.
pub fn classical_matches(costmap: &Costmap, perception: &Perception) -> Vec<Anchor> {
    let Some((anchor_rows, anchor_cols)) = anchor_grid(costmap, perception) else {
        return Vec::new();
    };
    let (off_r, off_c) = (
        perception.anchor_offset_row(),
        perception.anchor_offset_col(),
    );
    let mut found = Vec::new();
    for ar in 0..anchor_rows {
        for ac in 0..anchor_cols {
            let row_ok = perception
                .row_pattern()
                .iter()
                .enumerate()
                .all(|(i, &code)| costmap.code(Cell::new(ar + off_c, ac + i)) == code);
            let col_ok = perception
                .col_pattern()
                .iter()
                .enumerate()
                .all(|(j, &code)| costmap.code(Cell::new(ar + j, ac + off_r)) == code);
            if row_ok && col_ok {
                found.push(Anchor {
                    index: ar * anchor_cols + ac,
                    row: ar,
                    col: ac,
                    pose: Cell::new(ar + off_c, ac + off_r),
                });
            }
        }
    }
    found
}

/// Sizes the search and lays out registers.
pub fn plan(problem: &SearchProblem, mode: Mode) -> Result<GroverPlan, GroverError> {
    let costmap = problem.costmap();
    let perception = problem.perception();
    let (p_r, p_c) = (
        perception.row_pattern().len(),
        perception.col_pattern().len(),
    );
    if p_r > costmap.cols() {
        return Err(GroverError::PatternTooLong {
            which: "row",
            len: p_r,
            side: costmap.cols(),
        });
    }
    if p_c > costmap.rows() {
        return Err(GroverError::PatternTooLong {
            which: "column",
            len: p_c,
            side: costmap.rows(),
        });
    }
    let (anchor_rows, anchor_cols) =
        anchor_grid(costmap, perception).expect("pattern lengths checked above");
    let n = anchor_rows * anchor_cols;
    let sq = search_qubits(n);
    let q = costmap.qubits_per_cell() as usize;

    let (m, marked, registers) = match mode {
        Mode::Folded => {
            let marked: Vec<usize> = classical_matches(costmap, perception)
                .into_iter()
                .map(|a| a.index)
                .collect();
            let empty = sq..sq;
            let registers = Registers {
                search: 0..sq,
                map: empty.clone(),
                row_pattern: empty.clone(),
                col_pattern: empty.clone(),
                output: empty.clone(),
                ancilla: empty,
            };
            (marked.len().max(1), marked, registers)
        }
        Mode::Faithful => {
            let map_end = sq + costmap.rows() * costmap.cols() * q;
            let row_end = map_end + p_r * q;
            let col_end = row_end + p_c * q;
            let out_end = col_end + 1;
            let registers = Registers {
                search: 0..sq,
                map: sq..map_end,
                row_pattern: map_end..row_end,
                col_pattern: row_end..col_end,
                output: col_end..out_end,
                ancilla: out_end..out_end + p_r.max(p_c),
            };
            (1, Vec::new(), registers)
        }
    };

    Ok(GroverPlan {
        mode,
        rows: costmap.rows(),
        cols: costmap.cols(),
        qubits_per_cell: costmap.qubits_per_cell(),
        row_pattern_len: p_r,
        col_pattern_len: p_c,
        anchor_offset_row: perception.anchor_offset_row(),
        anchor_offset_col: perception.anchor_offset_col(),
        anchor_rows,
        anchor_cols,
        n,
        m,
        search_qubits: sq,
        repetitions: repetitions(n, m),
        total_qubits: registers.ancilla.end,
        registers,
        marked,
    })
}

fn push(circuit: &mut Circuit, op: GateOp) {
    circuit
        .push(op)
        .expect("synthesized gates stay inside the planned register");
}

/// Controls selecting search value `x`.
fn value_controls(search: &Range<usize>, x: usize) -> Vec<Control> {
    search
        .clone()
        .enumerate()
        .map(|(bit, q)| {
            if x >> bit & 1 == 1 {
                Control::on(q)
            } else {
                Control::off(q)
            }
        })
        .collect()
}

/// Phase flip on search value `x` alone.
fn phase_flip_value(circuit: &mut Circuit, search: &Range<usize>, x: usize) {
    let mut controls = value_controls(search, x);
    match controls.iter().rposition(|c| c.polarity) {
        Some(pos) => {
            let target = controls.remove(pos).qubit;
            push(circuit, GateOp::mcz(controls, target));
        }
        None => {
            // all-zero value: conjugate the top qubit so it can act as target
            let target = controls
                .pop()
                .expect("search register is never empty")
                .qubit;
            push(circuit, GateOp::x(target));
            push(circuit, GateOp::mcz(controls, target));
            push(circuit, GateOp::x(target));
        }
    }
}

/// One oracle query on the plan's register.
pub fn synth_oracle(plan: &GroverPlan) -> Circuit {
    let mut circuit = Circuit::new(plan.width());
    match plan.mode {
        Mode::Folded => {
            for &x in &plan.marked {
                phase_flip_value(&mut circuit, &plan.registers.search, x);
            }
        }
        Mode::Faithful => faithful_oracle(plan, &mut circuit),
    }
    circuit
}

/// Per anchor: XOR the covered map cells into the pattern registers, AND the
/// zero-difference conditions of each pattern position into an ancilla, flip
/// the output when the search register holds this anchor and every ancilla
/// is set, then undo the ancillas and the XORs.
fn faithful_oracle(plan: &GroverPlan, circuit: &mut Circuit) {
    let q = plan.qubits_per_cell;
    let regs = &plan.registers;
    let output = regs.output.start;
    for anchor in plan.anchors() {
        // (pattern qubit, map qubit) pairs compared at this anchor, grouped
        // by pattern position
        let mut positions: Vec<Vec<(usize, usize)>> = vec![Vec::new(); plan.ancillas()];
        for (i, slot) in positions.iter_mut().enumerate().take(plan.row_pattern_len) {
            let cell = Cell::new(anchor.row + plan.anchor_offset_col, anchor.col + i);
            for b in 0..q {
                slot.push((
                    regs.row_pattern.start + i * q as usize + b as usize,
                    plan.map_qubit(cell, b),
                ));
            }
        }
        for (j, slot) in positions.iter_mut().enumerate().take(plan.col_pattern_len) {
            let cell = Cell::new(anchor.row + j, anchor.col + plan.anchor_offset_row);
            for b in 0..q {
                slot.push((
                    regs.col_pattern.start + j * q as usize + b as usize,
                    plan.map_qubit(cell, b),
                ));
            }
        }

        let xors: Vec<GateOp> = positions
            .iter()
            .flatten()
            .map(|&(pattern, map)| GateOp::mcx(vec![Control::on(map)], pattern))
            .collect();
        let ands: Vec<GateOp> = positions
            .iter()
            .zip(regs.ancilla.clone())
            .map(|(pairs, anc)| {
                GateOp::mcx(pairs.iter().map(|&(p, _)| Control::off(p)).collect(), anc)
            })
            .collect();

        for op in xors.iter().chain(&ands) {
            push(circuit, op.clone());
        }
        let mut controls = value_controls(&regs.search, anchor.index);
        controls.extend(regs.ancilla.clone().map(Control::on));
        push(circuit, GateOp::mcx(controls, output));
        for op in ands.iter().rev().chain(xors.iter().rev()) {
            push(circuit, op.clone());
        }
    }
}

/// Inversion about the mean on the search register, up to a global phase.
pub fn synth_diffusion(plan: &GroverPlan) -> Circuit {
    let mut circuit = Circuit::new(plan.width());
    let search = plan.registers.search.clone();
    for q in search.clone() {
        push(&mut circuit, GateOp::h(q));
    }
    for q in search.clone() {
        push(&mut circuit, GateOp::x(q));
    }
    let target = search.end - 1;
    push(
        &mut circuit,
        GateOp::mcz(
            search
                .clone()
                .take(search.len() - 1)
                .map(Control::on)
                .collect(),
            target,
        ),
    );
    for q in search.clone() {
        push(&mut circuit, GateOp::x(q));
    }
    for q in search {
        push(&mut circuit, GateOp::h(q));
    }
    circuit
}

/// How the faithful data registers are initialized.
enum Loading<'a> {
    /// X exactly where the stored codes have a 1 bit.
    Content(&'a SearchProblem),
    /// X on every data qubit, so the gate count does not depend on content.
    Template,
}

/// Data loading and output preparation (faithful) plus the uniform superposition.
fn preparation(plan: &GroverPlan, loading: Loading<'_>) -> Circuit {
    let mut circuit = Circuit::new(plan.width());
    let regs = &plan.registers;
    if plan.mode == Mode::Faithful {
        let q = plan.qubits_per_cell;
        match loading {
            Loading::Template => {
                for qubit in regs.map.start..regs.col_pattern.end {
                    push(&mut circuit, GateOp::x(qubit));
                }
            }
            Loading::Content(problem) => {
                let costmap = problem.costmap();
                let mut set_bits = |start: usize, codes: &mut dyn Iterator<Item = u32>| {
                    for (k, code) in codes.enumerate() {
                        for b in 0..q {
                            if code >> b & 1 == 1 {
                                push(&mut circuit, GateOp::x(start + k * q as usize + b as usize));
                            }
                        }
                    }
                };
                set_bits(regs.map.start, &mut costmap.codes().iter().copied());
                set_bits(
                    regs.row_pattern.start,
                    &mut problem.perception().row_pattern().iter().copied(),
                );
                set_bits(
                    regs.col_pattern.start,
                    &mut problem.perception().col_pattern().iter().copied(),
                );
            }
        }
        push(&mut circuit, GateOp::x(regs.output.start));
        push(&mut circuit, GateOp::h(regs.output.start));
    }
    for q in regs.search.clone() {
        push(&mut circuit, GateOp::h(q));
    }
    circuit
}

fn assemble(plan: &GroverPlan, loading: Loading<'_>) -> Circuit {
    let mut circuit = preparation(plan, loading);
    let oracle = synth_oracle(plan);
    let diffusion = synth_diffusion(plan);
    for _ in 0..plan.repetitions {
        circuit.append(&oracle).expect("same width");
        circuit.append(&diffusion).expect("same width");
    }
    circuit
}

/// The complete localization circuit for `problem`.
pub fn build_circuit(plan: &GroverPlan, problem: &SearchProblem) -> Circuit {
    assemble(plan, Loading::Content(problem))
}

/// The circuit used for accounting: identical to [`build_circuit`] except
/// that data loading touches every data qubit.
pub fn template_circuit(plan: &GroverPlan) -> Circuit {
    assemble(plan, Loading::Template)
}

/// Qubit pairs (or single qubits) an op is charged for: a gate with `c`
/// controls becomes `2c - 1` two-qubit units, arranged as a balanced
/// reduction tree over the controls, the target step, and the mirrored
/// uncompute.
pub fn decompose_units(op: &GateOp) -> Vec<Vec<usize>> {
    if op.controls.is_empty() {
        return vec![vec![op.target]];
    }
    let mut nodes: Vec<usize> = op.controls.iter().map(|c| c.qubit).collect();
    let mut forward = Vec::new();
    while nodes.len() > 1 {
        let mut next = Vec::with_capacity(nodes.len().div_ceil(2));
        for pair in nodes.chunks(2) {
            if let [a, b] = *pair {
                forward.push(vec![a, b]);
            }
            next.push(pair[0]);
        }
        nodes = next;
    }
    let mut units = forward.clone();
    units.push(vec![nodes[0], op.target]);
    units.extend(forward.into_iter().rev());
    units
}

/// `2c - 1` for a gate with `c >= 1` controls, 1 otherwise.
pub fn decompose_count(op: &GateOp) -> usize {
    (2 * op.controls.len()).saturating_sub(1).max(1)
}

/// Element count and layered depth of a circuit after unit expansion.
pub fn circuit_budget(circuit: &Circuit) -> Budget {
    let units: Vec<Vec<usize>> = circuit.ops().iter().flat_map(decompose_units).collect();
    Budget {
        elements: units.len(),
        depth: crate::statevec::layered_depth(circuit.width(), &units),
    }
}

/// Accounting budget of the plan's full circuit.
pub fn budget(plan: &GroverPlan) -> Budget {
    circuit_budget(&template_circuit(plan))
}

/// Search values whose phase the oracle flips, read off a state vector
/// simulation of preparation followed by one oracle query.
pub fn simulated_marks(
    plan: &GroverPlan,
    problem: &SearchProblem,
    max_qubits: usize,
) -> Result<Vec<usize>, GroverError> {
    let mut state = new_state(plan, max_qubits)?;
    for op in preparation(plan, Loading::Content(problem)).ops() {
        state.apply(op)?;
    }
    let before: Vec<(usize, Complex64)> = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 1e-12)
        .map(|(i, &a)| (i, a))
        .collect();
    for op in synth_oracle(plan).ops() {
        state.apply(op)?;
    }
    let mask = (1usize << plan.search_qubits) - 1;
    let mut marked = BTreeSet::new();
    for (index, a) in before {
        let after = state.amplitude(index);
        let ratio = after / a;
        if (ratio + 1.0).norm() < 1e-9 {
            marked.insert(index & mask);
        } else {
            assert!(
                (ratio - 1.0).norm() < 1e-9,
                "oracle must map each prepared basis state to ±itself"
            );
        }
    }
    Ok(marked.into_iter().collect())
}

fn new_state(plan: &GroverPlan, max_qubits: usize) -> Result<StateVector, GroverError> {
    StateVector::new(plan.width(), max_qubits).map_err(|e| match (plan.mode, e) {
        (Mode::Faithful, SimError::WidthTooLarge { width, max_qubits }) => {
            GroverError::FaithfulTooWide {
                width,
                max_qubits,
                search_qubits: plan.search_qubits,
            }
        }
        (_, e) => GroverError::Sim(e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub shots: u64,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub max_qubits: usize,
    pub exponent: Exponent,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            shots: 4096,
            noise: None,
            seed: 0,
            max_qubits: DEFAULT_MAX_QUBITS,
            exponent: Exponent::Depth,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub plan: GroverPlan,
    pub budget: Budget,
    pub shots: u64,
    pub seed: u64,
    pub histogram: Histogram,
    /// Most frequent outcome, ties to the lowest value.
    pub modal_outcome: u64,
    pub modal_frequency: f64,
    /// Anchor of the modal outcome; `None` when it lies past the last anchor.
    pub decoded: Option<Anchor>,
    /// Most frequent outcome that passes the classical match check.
    pub confirmed: Option<Anchor>,
    pub confirmed_frequency: f64,
    /// Row-major cell index of the confirmed robot cell.
    pub position: Option<usize>,
    /// Anchors matching by exhaustive classical comparison.
    pub classical_matches: Vec<usize>,
    /// Closed-form probability of drawing any matching anchor, against the
    /// full `2^search_qubits` register.
    pub ideal_success_probability: Option<f64>,
    pub error_estimate: Option<ErrorEstimate>,
}

/// Plans, builds and samples the localization circuit.
pub fn run_localization(
    problem: &SearchProblem,
    mode: Mode,
    options: &RunOptions,
) -> Result<LocalizationReport, GroverError> {
    run_plan(plan(problem, mode)?, problem, options)
}

/// Builds and samples the circuit of an existing plan, which may have been
/// adjusted (for instance a different repetition count).
pub fn run_plan(
    plan: GroverPlan,
    problem: &SearchProblem,
    options: &RunOptions,
) -> Result<LocalizationReport, GroverError> {
    if options.shots == 0 {
        return Err(SimError::NoShots.into());
    }
    let initial = new_state(&plan, options.max_qubits)?;
    let circuit = build_circuit(&plan, problem);
    let measured = plan.measured();
    let mut histogram = Histogram::new(&measured)?;

    let mut clean = initial.clone();
    clean.apply_circuit_with_errors(&circuit, &[])?;
    let clean_sampler = Sampler::new(&clean, &measured);
    let p_gate = options.noise.map_or(0.0, |n| n.p_gate());
    let p_meas = options.noise.map_or(0.0, |n| n.p_meas());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.shots {
        let events = if p_gate > 0.0 {
            draw_errors(&circuit, p_gate, &mut rng)
        } else {
            Vec::new()
        };
        let mut outcome = if events.is_empty() {
            clean_sampler.draw(&mut rng)
        } else {
            let mut faulty = initial.clone();
            faulty.apply_circuit_with_errors(&circuit, &events)?;
            Sampler::new(&faulty, &measured).draw(&mut rng)
        };
        if p_meas > 0.0 {
            outcome = readout_flips(outcome, measured.len(), p_meas, &mut rng);
        }
        histogram.record(outcome);
    }

    let matches: Vec<usize> = classical_matches(problem.costmap(), problem.perception())
        .into_iter()
        .map(|a| a.index)
        .collect();
    let (modal_outcome, _) = histogram.modal().expect("at least one shot");
    let confirmed = histogram
        .ranked()
        .into_iter()
        .find(|&(x, _)| matches.binary_search(&(x as usize)).is_ok())
        .and_then(|(x, _)| plan.anchor(x as usize));
    let budget = budget(&plan);
    let actual_m = matches.len() as u64;
    Ok(LocalizationReport {
        budget,
        shots: options.shots,
        seed: options.seed,
        modal_frequency: histogram.frequency(modal_outcome),
        decoded: usize::try_from(modal_outcome)
            .ok()
            .and_then(|x| plan.anchor(x)),
        confirmed_frequency: confirmed.map_or(0.0, |a| histogram.frequency(a.index as u64)),
        position: confirmed.map(|a| a.pose.row * plan.cols + a.pose.col),
        confirmed,
        modal_outcome,
        ideal_success_probability: (actual_m > 0).then(|| {
            ideal_success_probability(1 << plan.search_qubits, actual_m, plan.repetitions as u64)
        }),
        error_estimate: options
            .noise
            .map(|n| estimate(budget, &n, measured.len(), options.exponent)),
        classical_matches: matches,
        histogram,
        plan,
    })
}

/// Gate counts by kind, handy for reports.
pub fn gate_census(circuit: &Circuit) -> [(GateKind, usize); 5] {
    let mut census = [
        (GateKind::H, 0),
        (GateKind::X, 0),
        (GateKind::Z, 0),
        (GateKind::Mcx, 0),
        (GateKind::Mcz, 0),
    ];
    for op in circuit.ops() {
        if let Some(slot) = census.iter_mut().find(|(k, _)| *k == op.kind) {
            slot.1 += 1;
        }
    }
    census
}
