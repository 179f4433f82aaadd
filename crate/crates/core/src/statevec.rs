//! Dense state-vector simulation over the gate set {H, X, Z, MCX, MCZ}.
//!
//! Basis index bit `i` is qubit `i`, so qubit 0 is the least significant bit.
//! Controlled gates only visit the amplitudes whose control bits already
//! match, which keeps wide registers with many controls cheap.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Default register limit: 2^26 amplitudes, about 1 GiB.
pub const DEFAULT_MAX_QUBITS: usize = 26;

/// Below this many amplitude visits a gate runs on the calling thread.
const PARALLEL_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{width} qubits exceed the simulator budget of {max_qubits} qubits")]
    WidthTooLarge { width: usize, max_qubits: usize },
    #[error("register width must be at least 1")]
    EmptyRegister,
    #[error("qubit {qubit} out of range for a {width}-qubit register")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("qubit {0} used more than once by one gate")]
    RepeatedQubit(usize),
    #[error("{0:?} takes no controls")]
    UnexpectedControls(GateKind),
    #[error("circuit width {circuit} does not match state width {state}")]
    WidthMismatch { circuit: usize, state: usize },
    #[error("no qubits selected for measurement")]
    EmptyMeasurement,
    #[error("shots must be at least 1")]
    NoShots,
    #[error("probability {name}={value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("expected {expected} amplitudes, got {found}")]
    AmplitudeCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Z,
    Mcx,
    Mcz,
}

/// A control qubit that fires when the qubit equals `polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub polarity: bool,
}

impl Control {
    pub const fn on(qubit: usize) -> Self {
        Control {
            qubit,
            polarity: true,
        }
    }

    pub const fn off(qubit: usize) -> Self {
        Control {
            qubit,
            polarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<Control>,
}

impl GateOp {
    pub fn h(target: usize) -> Self {
        GateOp {
            kind: GateKind::H,
            target,
            controls: Vec::new(),
        }
    }

    pub fn x(target: usize) -> Self {
        GateOp {
            kind: GateKind::X,
            target,
            controls: Vec::new(),
        }
    }

    pub fn z(target: usize) -> Self {
        GateOp {
            kind: GateKind::Z,
            target,
            controls: Vec::new(),
        }
    }

    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        GateOp {
            kind: GateKind::Mcx,
            target,
            controls,
        }
    }

    pub fn mcz(controls: Vec<Control>, target: usize) -> Self {
        GateOp {
            kind: GateKind::Mcz,
            target,
            controls,
        }
    }

    /// Target first, then controls in the order given.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.target).chain(self.controls.iter().map(|c| c.qubit))
    }

    pub fn validate(&self, width: usize) -> Result<(), SimError> {
        if matches!(self.kind, GateKind::H | GateKind::X | GateKind::Z) && !self.controls.is_empty()
        {
            return Err(SimError::UnexpectedControls(self.kind));
        }
        let mut seen: Vec<usize> = Vec::with_capacity(self.controls.len() + 1);
        for q in self.qubits() {
            if q >= width {
                return Err(SimError::QubitOutOfRange { qubit: q, width });
            }
            if seen.contains(&q) {
                return Err(SimError::RepeatedQubit(q));
            }
            seen.push(q);
        }
        Ok(())
    }
}

/// An ordered gate sequence on a fixed-width register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            ops: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self, SimError> {
        op.validate(self.width)?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self, SimError> {
        if other.width > self.width {
            return Err(SimError::WidthMismatch {
                circuit: other.width,
                state: self.width,
            });
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(self)
    }

    /// Layer count when each op is placed right after the latest earlier op
    /// sharing one of its qubits.
    pub fn depth(&self) -> usize {
        layered_depth(
            self.width,
            self.ops.iter().map(|op| op.qubits().collect::<Vec<_>>()),
        )
    }
}

/// Greedy as-soon-as-possible layering of qubit-support sets.
pub fn layered_depth<I, S>(width: usize, supports: I) -> usize
where
    I: IntoIterator<Item = S>,
    S: AsRef<[usize]>,
{
    let mut frontier = vec![0usize; width];
    let mut depth = 0;
    for support in supports {
        let support = support.as_ref();
        let layer = support.iter().map(|&q| frontier[q]).max().unwrap_or(0) + 1;
        for &q in support {
            frontier[q] = layer;
        }
        depth = depth.max(layer);
    }
    depth
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Per-gate depolarizing probability and per-qubit readout flip probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    p_gate: f64,
    p_meas: f64,
}

impl NoiseModel {
    pub fn new(p_gate: f64, p_meas: f64) -> Result<Self, SimError> {
        for (name, value) in [("p_gate", p_gate), ("p_meas", p_meas)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::InvalidProbability { name, value });
            }
        }
        Ok(NoiseModel { p_gate, p_meas })
    }

    pub fn p_gate(&self) -> f64 {
        self.p_gate
    }

    pub fn p_meas(&self) -> f64 {
        self.p_meas
    }
}

/// One injected Pauli fault, applied right after op `op_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub op_index: usize,
    pub qubit: usize,
    pub pauli: Pauli,
}

/// Draws the fault pattern of one noisy execution.
///
/// Stream order per op: one uniform decision draw, then, only on a fault,
/// a qubit index draw followed by a Pauli draw.
pub fn draw_errors<R: Rng + ?Sized>(
    circuit: &Circuit,
    p_gate: f64,
    rng: &mut R,
) -> Vec<ErrorEvent> {
    let mut events = Vec::new();
    for (op_index, op) in circuit.ops.iter().enumerate() {
        if rng.gen::<f64>() < p_gate {
            let touched: Vec<usize> = op.qubits().collect();
            let qubit = touched[rng.gen_range(0..touched.len())];
            let pauli = match rng.gen_range(0..3u8) {
                0 => Pauli::X,
                1 => Pauli::Y,
                _ => Pauli::Z,
            };
            events.push(ErrorEvent {
                op_index,
                qubit,
                pauli,
            });
        }
    }
    events
}

#[derive(Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amps: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("width", &self.width)
            .field("len", &self.amps.len())
            .finish()
    }
}

impl StateVector {
    /// `|0…0⟩` on `width` qubits, refusing registers wider than `max_qubits`.
    pub fn new(width: usize, max_qubits: usize) -> Result<Self, SimError> {
        check_width(width, max_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << width];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { width, amps })
    }

    pub fn from_amplitudes(width: usize, amps: Vec<Complex64>) -> Result<Self, SimError> {
        check_width(width, usize::BITS as usize - 2)?;
        if amps.len() != 1usize << width {
            return Err(SimError::AmplitudeCount {
                expected: 1usize << width,
                found: amps.len(),
            });
        }
        Ok(StateVector { width, amps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<(), SimError> {
        op.validate(self.width)?;
        let sel = Selector::new(op.target, &op.controls, self.amps.len());
        match op.kind {
            GateKind::H => for_each_pair(&mut self.amps, &sel, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = (x + y) * FRAC_1_SQRT_2;
                *a1 = (x - y) * FRAC_1_SQRT_2;
            }),
            GateKind::X | GateKind::Mcx => for_each_pair(&mut self.amps, &sel, std::mem::swap),
            GateKind::Z | GateKind::Mcz => for_each_pair(&mut self.amps, &sel, |_, a1| *a1 = -*a1),
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, qubit: usize, pauli: Pauli) -> Result<(), SimError> {
        if qubit >= self.width {
            return Err(SimError::QubitOutOfRange {
                qubit,
                width: self.width,
            });
        }
        let sel = Selector::new(qubit, &[], self.amps.len());
        let i = Complex64::new(0.0, 1.0);
        match pauli {
            Pauli::X => for_each_pair(&mut self.amps, &sel, std::mem::swap),
            Pauli::Y => for_each_pair(&mut self.amps, &sel, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = -i * y;
                *a1 = i * x;
            }),
            Pauli::Z => for_each_pair(&mut self.amps, &sel, |_, a1| *a1 = -*a1),
        }
        Ok(())
    }

    /// Applies `circuit`, inserting the given faults after their ops.
    pub fn apply_circuit_with_errors(
        &mut self,
        circuit: &Circuit,
        events: &[ErrorEvent],
    ) -> Result<(), SimError> {
        if circuit.width != self.width {
            return Err(SimError::WidthMismatch {
                circuit: circuit.width,
                state: self.width,
            });
        }
        let mut pending = events.iter().peekable();
        for (index, op) in circuit.ops.iter().enumerate() {
            self.apply(op)?;
            while let Some(event) = pending.next_if(|e| e.op_index == index) {
                self.apply_pauli(event.qubit, event.pauli)?;
            }
        }
        Ok(())
    }

    /// Marginal distribution over `measured` (ascending qubit order; bit `j`
    /// of an outcome is `measured[j]`).
    pub fn marginal(&self, measured: &[usize]) -> Vec<f64> {
        let mut probs = vec![0.0; 1usize << measured.len()];
        let contiguous = measured.iter().enumerate().all(|(j, &q)| j == q);
        let mask = (1usize << measured.len()) - 1;
        for (index, a) in self.amps.iter().enumerate() {
            let outcome = if contiguous {
                index & mask
            } else {
                gather_bits(index, measured)
            };
            probs[outcome] += a.norm_sqr();
        }
        probs
    }
}

fn check_width(width: usize, max_qubits: usize) -> Result<(), SimError> {
    if width == 0 {
        return Err(SimError::EmptyRegister);
    }
    if width > max_qubits || width >= usize::BITS as usize - 1 {
        return Err(SimError::WidthTooLarge { width, max_qubits });
    }
    Ok(())
}

fn gather_bits(index: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((index >> q) & 1) << j))
}

/// Enumerates the basis pairs `(i0, i0 | target)` whose control bits match.
struct Selector {
    fixed: Vec<usize>,
    base: usize,
    target_bit: usize,
    free_count: usize,
}

impl Selector {
    fn new(target: usize, controls: &[Control], len: usize) -> Self {
        let mut fixed: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
        fixed.push(target);
        fixed.sort_unstable();
        let base = controls
            .iter()
            .filter(|c| c.polarity)
            .fold(0, |acc, c| acc | (1usize << c.qubit));
        Selector {
            free_count: len >> fixed.len(),
            fixed,
            base,
            target_bit: 1usize << target,
        }
    }

    /// Spreads the bits of `k` over the non-fixed positions.
    #[inline]
    fn index(&self, k: usize) -> usize {
        let mut i = k;
        for &p in &self.fixed {
            let low = i & ((1usize << p) - 1);
            i = ((i >> p) << (p + 1)) | low;
        }
        i | self.base
    }
}

#[derive(Clone, Copy)]
struct AmpPtr(*mut Complex64);

// SAFETY: every parallel task below dereferences a disjoint pair of indices.
unsafe impl Send for AmpPtr {}
unsafe impl Sync for AmpPtr {}

impl AmpPtr {
    fn get(self) -> *mut Complex64 {
        self.0
    }
}

fn for_each_pair<F>(amps: &mut [Complex64], sel: &Selector, f: F)
where
    F: Fn(&mut Complex64, &mut Complex64) + Sync,
{
    if sel.free_count < PARALLEL_THRESHOLD {
        for k in 0..sel.free_count {
            let i0 = sel.index(k);
            let (lo, hi) = amps.split_at_mut(i0 + sel.target_bit);
            f(&mut lo[i0], &mut hi[0]);
        }
        return;
    }
    let ptr = AmpPtr(amps.as_mut_ptr());
    let target_bit = sel.target_bit;
    (0..sel.free_count)
        .into_par_iter()
        .with_min_len(1 << 12)
        .for_each(|k| {
            let i0 = sel.index(k);
            let base = ptr.get();
            // SAFETY: `Selector::index` is injective and never sets the target
            // bit, so (i0, i0 | target_bit) pairs are disjoint across k and
            // both lie inside `amps`.
            unsafe { f(&mut *base.add(i0), &mut *base.add(i0 | target_bit)) }
        });
}

/// Result of [`run`]: the final state and every injected fault.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: StateVector,
    pub error_events: Vec<ErrorEvent>,
}

/// Applies `circuit` to `state`; with noise, faults are drawn from a
/// ChaCha8 stream seeded by `seed`.
pub fn run(
    mut state: StateVector,
    circuit: &Circuit,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<RunOutcome, SimError> {
    let events = match noise {
        Some(n) if n.p_gate > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            draw_errors(circuit, n.p_gate, &mut rng)
        }
        _ => Vec::new(),
    };
    state.apply_circuit_with_errors(circuit, &events)?;
    Ok(RunOutcome {
        state,
        error_events: events,
    })
}

/// Outcome counts over a set of measured qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    measured: Vec<usize>,
    counts: BTreeMap<u64, u64>,
    shots: u64,
}

impl Histogram {
    pub fn new(measured: &[usize]) -> Result<Self, SimError> {
        if measured.is_empty() {
            return Err(SimError::EmptyMeasurement);
        }
        let mut measured = measured.to_vec();
        measured.sort_unstable();
        if let Some(w) = measured.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::RepeatedQubit(w[0]));
        }
        Ok(Histogram {
            measured,
            counts: BTreeMap::new(),
            shots: 0,
        })
    }

    pub fn record(&mut self, outcome: u64) {
        *self.counts.entry(outcome).or_insert(0) += 1;
        self.shots += 1;
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, outcome: u64) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn frequency(&self, outcome: u64) -> f64 {
        self.count(outcome) as f64 / self.shots.max(1) as f64
    }

    /// Non-zero counts keyed by outcome value.
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    /// Most frequent outcome; the smallest value wins ties.
    pub fn modal(&self) -> Option<(u64, u64)> {
        self.ranked().first().copied()
    }

    /// Outcomes by descending count, then ascending value.
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.counts.iter().map(|(&o, &c)| (o, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Bit string of `outcome`, highest measured qubit first.
    pub fn key(&self, outcome: u64) -> String {
        let k = self.measured.len();
        (0..k)
            .rev()
            .map(|j| if (outcome >> j) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// `outcome,count`, by descending count then ascending bit string.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(String, u64)> = self
            .counts
            .iter()
            .map(|(&o, &c)| (self.key(o), c))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut out = String::from("outcome,count\n");
        for (key, count) in rows {
            out.push_str(&format!("{key},{count}\n"));
        }
        out
    }
}

impl Serialize for Histogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let counts: BTreeMap<String, u64> = self
            .counts
            .iter()
            .map(|(&o, &c)| (self.key(o), c))
            .collect();
        let mut s = serializer.serialize_struct("Histogram", 3)?;
        s.serialize_field("measured", &self.measured)?;
        s.serialize_field("shots", &self.shots)?;
        s.serialize_field("counts", &counts)?;
        s.end()
    }
}

/// Inverse-CDF sampler over a marginal distribution.
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(state: &StateVector, measured: &[usize]) -> Self {
        let probs = state.marginal(measured);
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Sampler { cdf }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let u = rng.gen::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64
    }
}

/// Flips each of the `bits` low bits of `outcome` with probability `p_meas`,
/// one draw per bit from bit 0 upwards.
pub fn readout_flips<R: Rng + ?Sized>(outcome: u64, bits: usize, p_meas: f64, rng: &mut R) -> u64 {
    let mut out = outcome;
    for j in 0..bits {
        if rng.gen::<f64>() < p_meas {
            out ^= 1 << j;
        }
    }
    out
}

/// Draws `shots` measurements of `measured` from `state`.
pub fn sample(
    state: &StateVector,
    measured: &[usize],
    shots: u64,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<Histogram, SimError> {
    let mut hist = Histogram::new(measured)?;
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    for &q in hist.measured() {
        if q >= state.width {
            return Err(SimError::QubitOutOfRange {
                qubit: q,
                width: state.width,
            });
        }
    }
    let sampler = Sampler::new(state, hist.measured());
    let bits = hist.measured().len();
    let p_meas = noise.map_or(0.0, |n| n.p_meas);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..shots {
        let mut outcome = sampler.draw(&mut rng);
        if p_meas > 0.0 {
            outcome = readout_flips(outcome, bits, p_meas, &mut rng);
        }
        hist.record(outcome);
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn basis(width: usize, index: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector::from_amplitudes(width, amps).unwrap()
    }

    #[test]
    fn init_state() {
        let s = StateVector::new(1, DEFAULT_MAX_QUBITS).unwrap();
        assert_eq!(
            s.amplitudes(),
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        );
        let s = StateVector::new(3, DEFAULT_MAX_QUBITS).unwrap();
        assert_eq!(s.amplitude(0), Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn width_guard() {
        assert_eq!(
            StateVector::new(60, DEFAULT_MAX_QUBITS).unwrap_err(),
            SimError::WidthTooLarge {
                width: 60,
                max_qubits: 26
            }
        );
        assert_eq!(
            StateVector::new(0, 26).unwrap_err(),
            SimError::EmptyRegister
        );
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::new(1, 4).unwrap();
        s.apply(&GateOp::h(0)).unwrap();
        for a in s.amplitudes() {
            assert!(close(*a, Complex64::new(FRAC_1_SQRT_2, 0.0), EPS));
        }
    }

    #[test]
    fn hadamard_involution() {
        let amps: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64 + 0.5, -(i as f64) * 0.25))
            .collect();
        let original = StateVector::from_amplitudes(3, amps).unwrap();
        for q in 0..3 {
            let mut s = original.clone();
            s.apply(&GateOp::h(q)).unwrap();
            s.apply(&GateOp::h(q)).unwrap();
            for (a, b) in s.amplitudes().iter().zip(original.amplitudes()) {
                assert!(close(*a, *b, EPS));
            }
        }
    }

    #[test]
    fn toffoli_truth_table() {
        // 8x8 permutation: only 110 <-> 111 swap (qubit 2 is the MSB here).
        let op = GateOp::mcx(vec![Control::on(0), Control::on(1)], 2);
        let mut expected = [0usize, 1, 2, 3, 4, 5, 6, 7];
        expected.swap(3, 7);
        for (input, &out) in expected.iter().enumerate() {
            let mut s = basis(3, input);
            s.apply(&op).unwrap();
            let image: Vec<usize> = (0..8).filter(|&i| s.amplitude(i).norm() > 0.5).collect();
            assert_eq!(image, vec![out], "input {input:03b}");
        }
    }

    #[test]
    fn negative_polarity_controls() {
        let op = GateOp::mcz(vec![Control::off(0), Control::on(2)], 1);
        for input in 0..8 {
            let mut s = basis(3, input);
            s.apply(&op).unwrap();
            let flipped = input & 1 == 0 && input & 2 != 0 && input & 4 != 0;
            let sign = if flipped { -1.0 } else { 1.0 };
            assert!(close(s.amplitude(input), Complex64::new(sign, 0.0), EPS));
        }
    }

    #[test]
    fn op_validation() {
        let mut c = Circuit::new(2);
        assert_eq!(
            c.push(GateOp::h(2)).unwrap_err(),
            SimError::QubitOutOfRange { qubit: 2, width: 2 }
        );
        assert_eq!(
            c.push(GateOp::mcx(vec![Control::on(1)], 1)).unwrap_err(),
            SimError::RepeatedQubit(1)
        );
        let mut bad = GateOp::h(0);
        bad.controls.push(Control::on(1));
        assert_eq!(
            c.push(bad).unwrap_err(),
            SimError::UnexpectedControls(GateKind::H)
        );
    }

    #[test]
    fn depth_layers() {
        let mut c = Circuit::new(3);
        c.push(GateOp::h(0)).unwrap();
        c.push(GateOp::h(1)).unwrap();
        c.push(GateOp::mcx(vec![Control::on(0)], 2)).unwrap();
        c.push(GateOp::x(1)).unwrap();
        assert_eq!(c.depth(), 2);
        assert_eq!(Circuit::new(2).depth(), 0);
    }

    #[test]
    fn empty_circuit_leaves_state() {
        let s = basis(2, 2);
        let out = run(s.clone(), &Circuit::new(2), None, 0).unwrap();
        assert_eq!(out.state, s);
    }

    #[test]
    fn run_rejects_width_mismatch() {
        let s = StateVector::new(2, 4).unwrap();
        assert!(matches!(
            run(s, &Circuit::new(3), None, 0),
            Err(SimError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn zero_noise_matches_noiseless() {
        let mut c = Circuit::new(3);
        for q in 0..3 {
            c.push(GateOp::h(q)).unwrap();
        }
        c.push(GateOp::mcz(vec![Control::on(0), Control::off(1)], 2))
            .unwrap();
        c.push(GateOp::h(1)).unwrap();
        let noise = NoiseModel::new(0.0, 0.0).unwrap();
        let a = run(StateVector::new(3, 8).unwrap(), &c, None, 5).unwrap();
        let b = run(StateVector::new(3, 8).unwrap(), &c, Some(&noise), 5).unwrap();
        assert_eq!(a.state, b.state);
        assert!(b.error_events.is_empty());
    }

    #[test]
    fn pauli_y_action() {
        let mut s = basis(1, 0);
        s.apply_pauli(0, Pauli::Y).unwrap();
        assert!(close(s.amplitude(1), Complex64::new(0.0, 1.0), EPS));
        let mut s = basis(1, 1);
        s.apply_pauli(0, Pauli::Y).unwrap();
        assert!(close(s.amplitude(0), Complex64::new(0.0, -1.0), EPS));
    }

    #[test]
    fn sample_basis_state() {
        let s = basis(2, 1);
        let h = sample(&s, &[0, 1], 100, None, 3).unwrap();
        assert_eq!(h.count(0b01), 100);
        assert_eq!(h.key(0b01), "01");
        assert_eq!(h.to_csv(), "outcome,count\n01,100\n");
    }

    #[test]
    fn sample_errors() {
        let s = basis(2, 1);
        assert_eq!(
            sample(&s, &[], 10, None, 0).unwrap_err(),
            SimError::EmptyMeasurement
        );
        assert_eq!(sample(&s, &[0], 0, None, 0).unwrap_err(), SimError::NoShots);
        assert!(sample(&s, &[4], 1, None, 0).is_err());
    }

    #[test]
    fn uniform_two_qubit_sampling() {
        let mut s = StateVector::new(2, 4).unwrap();
        s.apply(&GateOp::h(0)).unwrap();
        s.apply(&GateOp::h(1)).unwrap();
        let h = sample(&s, &[0, 1], 40_000, None, 11).unwrap();
        // 3 sigma of Binomial(40000, 1/4) is 3 * sqrt(7500) ~ 260; spec allows 300.
        for o in 0..4 {
            let c = h.count(o) as i64;
            assert!((c - 10_000).abs() <= 300, "outcome {o}: {c}");
        }
        assert_eq!(h.shots(), 40_000);
    }

    #[test]
    fn readout_flip_rate() {
        let s = StateVector::new(1, 4).unwrap();
        let noise = NoiseModel::new(0.0, 0.18).unwrap();
        let h = sample(&s, &[0], 10_000, Some(&noise), 99).unwrap();
        let f = h.frequency(1);
        assert!((f - 0.18).abs() <= 0.012, "flip frequency {f}");
    }

    #[test]
    fn measured_bit_order() {
        // qubit 2 set, measure qubits {2, 0}: key prints qubit 2 first.
        let s = basis(3, 0b100);
        let h = sample(&s, &[2, 0], 5, None, 0).unwrap();
        assert_eq!(h.measured(), &[0, 2]);
        assert_eq!(h.count(0b10), 5);
        assert_eq!(h.key(0b10), "10");
    }

    #[test]
    fn histogram_ranking_ties() {
        let mut h = Histogram::new(&[0, 1]).unwrap();
        for o in [3, 1, 3, 1, 2] {
            h.record(o);
        }
        assert_eq!(h.modal(), Some((1, 2)));
        assert_eq!(h.to_csv(), "outcome,count\n01,2\n11,2\n10,1\n");
    }

    #[test]
    fn invalid_noise() {
        assert!(NoiseModel::new(1.5, 0.0).is_err());
        assert!(NoiseModel::new(0.1, -0.1).is_err());
    }

    #[test]
    fn parallel_path_matches_serial() {
        // 16 free qubits exceeds PARALLEL_THRESHOLD; compare against a
        // hand-written loop.
        let width = 17;
        let amps: Vec<Complex64> = (0..1usize << width)
            .map(|i| Complex64::new((i % 97) as f64, (i % 13) as f64))
            .collect();
        let mut s = StateVector::from_amplitudes(width, amps.clone()).unwrap();
        s.apply(&GateOp::h(5)).unwrap();
        for (i, a) in amps.iter().enumerate() {
            let partner = amps[i ^ (1 << 5)];
            let expected = if i & (1 << 5) == 0 {
                (*a + partner) * FRAC_1_SQRT_2
            } else {
                (partner - *a) * FRAC_1_SQRT_2
            };
            assert!(close(s.amplitude(i), expected, 1e-9));
        }
    }
}
