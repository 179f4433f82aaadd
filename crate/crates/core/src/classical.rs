//! Classical baselines: a counting naive substring search and grid Monte
//! Carlo Localization.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{perceive_at, Cell, GridMap, MapError, Perception};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("needle must not be empty")]
    EmptyNeedle,
    #[error("particle count must be at least 1")]
    NoParticles,
    #[error("N must be at least 1")]
    EmptySearchSpace,
    #[error("robot cell {0} is not a free cell of the map")]
    RobotNotFree(Cell),
    #[error("all particle weights are zero")]
    DegenerateWeights,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Work done by a search, both counters only ever grow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounter {
    /// Element-by-element comparisons.
    pub comparisons: u64,
    /// Alignments tested against the full needle.
    pub oracle_calls: u64,
}

/// Left-to-right naive scan returning every match position.
pub fn substring_search<T: PartialEq>(
    haystack: &[T],
    needle: &[T],
) -> Result<(Vec<usize>, QueryCounter), ClassicalError> {
    if needle.is_empty() {
        return Err(ClassicalError::EmptyNeedle);
    }
    let mut counter = QueryCounter::default();
    let mut positions = Vec::new();
    if needle.len() > haystack.len() {
        return Ok((positions, counter));
    }
    for start in 0..=haystack.len() - needle.len() {
        counter.oracle_calls += 1;
        let mut matched = true;
        for (h, n) in haystack[start..].iter().zip(needle) {
            counter.comparisons += 1;
            if h != n {
                matched = false;
                break;
            }
        }
        if matched {
            positions.push(start);
        }
    }
    Ok((positions, counter))
}

/// Expected classical probes against Grover iterations for `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub n: u64,
    pub classical_expected: f64,
    pub grover_calls: u64,
    pub sqrt_n: f64,
}

pub fn query_comparison(n: u64) -> Result<QueryComparison, ClassicalError> {
    if n == 0 {
        return Err(ClassicalError::EmptySearchSpace);
    }
    let sqrt_n = (n as f64).sqrt();
    Ok(QueryComparison {
        n,
        classical_expected: n as f64 / 2.0,
        grover_calls: (FRAC_PI_4 * sqrt_n).ceil() as u64,
        sqrt_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub cell: Cell,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    normalized: bool,
}

impl ParticleSet {
    /// Equal-weight particles on the given cells.
    pub fn uniform(cells: Vec<Cell>) -> Self {
        let w = 1.0 / cells.len().max(1) as f64;
        ParticleSet {
            particles: cells
                .into_iter()
                .map(|cell| Particle { cell, weight: w })
                .collect(),
            normalized: true,
        }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn set_weights(&mut self, weights: impl IntoIterator<Item = f64>) {
        for (p, w) in self.particles.iter_mut().zip(weights) {
            p.weight = w;
        }
        self.normalized = false;
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn normalize(&mut self) -> Result<(), ClassicalError> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return Err(ClassicalError::DegenerateWeights);
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        self.normalized = true;
        Ok(())
    }

    /// Draws a same-size equal-weight set by systematic resampling.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let picks = systematic_resample(&weights, self.particles.len(), rng);
        ParticleSet::uniform(picks.into_iter().map(|i| self.particles[i].cell).collect())
    }

    /// Cell holding the most particles and that share of the population.
    /// Ties go to the smallest cell in row-major order.
    pub fn modal_cell(&self) -> Option<(Cell, f64)> {
        let mut counts: HashMap<Cell, usize> = HashMap::new();
        for p in &self.particles {
            *counts.entry(p.cell).or_default() += 1;
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(cell, n)| (cell, n as f64 / self.particles.len() as f64))
    }
}

/// Indices of `count` draws proportional to `weights` using one uniform offset.
pub fn systematic_resample<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if weights.is_empty() || count == 0 || !(total > 0.0) {
        return Vec::new();
    }
    let step = total / count as f64;
    let start = rng.gen::<f64>() * step;
    let mut picks = Vec::with_capacity(count);
    let mut index = 0;
    let mut cumulative = weights[0];
    for i in 0..count {
        let u = start + i as f64 * step;
        while u >= cumulative && index + 1 < weights.len() {
            index += 1;
            cumulative += weights[index];
        }
        picks.push(index);
    }
    picks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MclConfig {
    pub particle_count: usize,
    pub max_iters: usize,
    /// Weight of a particle whose perception disagrees with the robot's.
    pub mismatch_weight: f64,
    /// Stop once this share of particles sits in one cell.
    pub convergence: f64,
}

impl Default for MclConfig {
    fn default() -> Self {
        MclConfig {
            particle_count: 200,
            max_iters: 50,
            mismatch_weight: 1e-6,
            convergence: 0.9,
        }
    }
}

/// Particle weights after normalization, before resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub iter: usize,
    pub robot: Cell,
    pub particles: ParticleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MclResult {
    pub estimate: Cell,
    /// Where the robot ended up after the last move.
    pub true_cell: Cell,
    pub iterations_used: usize,
    pub converged: bool,
    /// Particle-vs-robot perception comparisons made by the sense steps.
    pub sense_evaluations: u64,
    pub history: Vec<IterationSnapshot>,
}

impl MclResult {
    /// `iter,row,col,weight`, one line per particle per iteration.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,row,col,weight\n");
        for snap in &self.history {
            for p in snap.particles.particles() {
                out.push_str(&format!(
                    "{},{},{},{:.9}\n",
                    snap.iter, p.cell.row, p.cell.col, p.weight
                ));
            }
        }
        out
    }
}

const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

fn step(map: &GridMap, from: Cell, (dr, dc): (isize, isize)) -> Option<Cell> {
    let row = from.row.checked_add_signed(dr)?;
    let col = from.col.checked_add_signed(dc)?;
    let to = Cell::new(row, col);
    map.is_free(to).then_some(to)
}

/// Monte Carlo Localization on the grid.
///
/// Each iteration moves the hidden robot one random free cardinal step and
/// replays that step on every particle (blocked particles stay put), weighs
/// particles by exact perception agreement, normalizes and resamples.
pub fn mcl_localize(
    map: &GridMap,
    true_robot: Cell,
    config: &MclConfig,
    seed: u64,
) -> Result<MclResult, ClassicalError> {
    if config.particle_count == 0 {
        return Err(ClassicalError::NoParticles);
    }
    if !map.is_free(true_robot) {
        return Err(ClassicalError::RobotNotFree(true_robot));
    }
    let free: Vec<Cell> = map.free_cells().collect();
    let signatures: HashMap<Cell, Perception> = free
        .iter()
        .map(|&c| perceive_at(map, c).map(|p| (c, p)))
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = ParticleSet::uniform(
        (0..config.particle_count)
            .map(|_| free[rng.gen_range(0..free.len())])
            .collect(),
    );
    let mut robot = true_robot;
    let mut history = Vec::new();
    let mut sense_evaluations = 0u64;
    let mut converged = false;
    let mut iterations_used = 0;

    for iter in 1..=config.max_iters.max(1) {
        iterations_used = iter;

        let options: Vec<(isize, isize)> = MOVES
            .iter()
            .copied()
            .filter(|&m| step(map, robot, m).is_some())
            .collect();
        if !options.is_empty() {
            let m = options[rng.gen_range(0..options.len())];
            robot = step(map, robot, m).expect("move was filtered as free");
            particles = ParticleSet::uniform(
                particles
                    .particles()
                    .iter()
                    .map(|p| step(map, p.cell, m).unwrap_or(p.cell))
                    .collect(),
            );
        }

        let seen = &signatures[&robot];
        let weights: Vec<f64> = particles
            .particles()
            .iter()
            .map(|p| {
                if &signatures[&p.cell] == seen {
                    1.0
                } else {
                    config.mismatch_weight
                }
            })
            .collect();
        sense_evaluations += weights.len() as u64;
        particles.set_weights(weights);
        particles.normalize()?;
        history.push(IterationSnapshot {
            iter,
            robot,
            particles: particles.clone(),
        });

        particles = particles.resample(&mut rng);
        if let Some((_, share)) = particles.modal_cell() {
            if share >= config.convergence {
                converged = true;
                break;
            }
        }
    }

    let (estimate, _) = particles.modal_cell().expect("particle set is never empty");
    Ok(MclResult {
        estimate,
        true_cell: robot,
        iterations_used,
        converged,
        sense_evaluations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_paper_needles() {
        let (pos, _) = substring_search(b"3333323332232123", b"323").unwrap();
        assert_eq!(pos, vec![4]);
        let (pos, _) = substring_search(b"3332322133223333", b"322").unwrap();
        assert_eq!(pos, vec![4, 9]);
    }

    #[test]
    fn worst_case_counts() {
        let (pos, counter) = substring_search(b"aaaaaaaaab", b"aaaab").unwrap();
        assert_eq!(pos, vec![5]);
        // Every one of the 6 alignments runs the full needle length.
        assert_eq!(counter.oracle_calls, 6);
        assert_eq!(counter.comparisons, 30);
    }

    #[test]
    fn empty_needle_and_short_haystack() {
        assert_eq!(
            substring_search::<u8>(b"abc", b"").unwrap_err(),
            ClassicalError::EmptyNeedle
        );
        let (pos, counter) = substring_search(b"ab", b"abc").unwrap();
        assert!(pos.is_empty());
        assert_eq!(counter, QueryCounter::default());
    }

    #[test]
    fn query_comparison_values() {
        let q = query_comparison(100).unwrap();
        assert_eq!(q.grover_calls, 8);
        assert_eq!(q.classical_expected, 50.0);
        assert_eq!(q.sqrt_n, 10.0);
        let q = query_comparison(1).unwrap();
        assert_eq!((q.classical_expected, q.grover_calls), (0.5, 1));
        assert_eq!(query_comparison(1_000_000).unwrap().sqrt_n, 1000.0);
        assert!(query_comparison(0).is_err());
    }

    #[test]
    fn systematic_resample_proportions() {
        let weights = [0.1, 0.2, 0.3, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let picks = systematic_resample(&weights, 1000, &mut rng);
            assert_eq!(picks.len(), 1000);
            for (i, w) in weights.iter().enumerate() {
                let n = picks.iter().filter(|&&p| p == i).count() as f64;
                // systematic resampling yields floor or ceil of N * w
                assert!((n - 1000.0 * w).abs() <= 1.0, "index {i}: {n}");
            }
        }
    }

    #[test]
    fn resample_chi_square() {
        // Few particles, many repeats: compare pooled counts with expectation.
        let weights = [0.05, 0.15, 0.3, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pooled = [0f64; 4];
        let repeats = 2000;
        let n = 7;
        for _ in 0..repeats {
            for i in systematic_resample(&weights, n, &mut rng) {
                pooled[i] += 1.0;
            }
        }
        let total = (repeats * n) as f64;
        let chi2: f64 = pooled
            .iter()
            .zip(weights)
            .map(|(o, w)| (o - total * w).powi(2) / (total * w))
            .sum();
        // 3 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn normalization_and_degenerate_weights() {
        let mut set = ParticleSet::uniform(vec![Cell::new(0, 0); 4]);
        set.set_weights([1.0, 2.0, 3.0, 4.0]);
        assert!(!set.is_normalized());
        set.normalize().unwrap();
        assert!((set.total_weight() - 1.0).abs() < 1e-12);
        set.set_weights([0.0; 4]);
        assert_eq!(set.normalize(), Err(ClassicalError::DegenerateWeights));
    }

    #[test]
    fn single_cell_map_converges_immediately() {
        let map = GridMap::parse("rows=1 cols=1 q=1 range=1\nR\n").unwrap();
        let r = mcl_localize(&map, Cell::new(0, 0), &MclConfig::default(), 0).unwrap();
        assert_eq!(r.estimate, Cell::new(0, 0));
        assert_eq!(r.iterations_used, 1);
        assert!(r.converged);
    }

    #[test]
    fn mcl_rejects_bad_input() {
        let map = GridMap::parse("rows=1 cols=2 q=1 range=1\n.#\n").unwrap();
        let cfg = MclConfig {
            particle_count: 0,
            ..MclConfig::default()
        };
        assert_eq!(
            mcl_localize(&map, Cell::new(0, 0), &cfg, 0).unwrap_err(),
            ClassicalError::NoParticles
        );
        assert_eq!(
            mcl_localize(&map, Cell::new(0, 1), &MclConfig::default(), 0).unwrap_err(),
            ClassicalError::RobotNotFree(Cell::new(0, 1))
        );
    }

    #[test]
    fn mcl_history_is_normalized() {
        let map = GridMap::parse("rows=3 cols=4 q=2 range=1\n#...\n..#.\n....\n").unwrap();
        let r = mcl_localize(&map, Cell::new(2, 0), &MclConfig::default(), 3).unwrap();
        for snap in &r.history {
            assert!((snap.particles.total_weight() - 1.0).abs() < 1e-9);
        }
        assert_eq!(r.sense_evaluations, 200 * r.iterations_used as u64);
        let csv = r.trace_csv();
        assert!(csv.starts_with("iter,row,col,weight\n1,"));
        assert_eq!(csv.lines().count(), 1 + 200 * r.history.len());
    }
}
