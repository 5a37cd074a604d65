//! Stochastic simulation of mixed sequential measurements.
//!
//! Each trajectory flips a fair coin for the execution order, draws the first
//! outcome by the Born rule, collapses the state, draws the second outcome on
//! the collapsed state, and records the outcome pair in canonical (a, b)
//! order. Trajectories are partitioned into fixed-size batches; batch `k`
//! owns ChaCha stream `k` derived from the master seed, so aggregation is a
//! plain integer sum and the result is identical whether batches run
//! serially or sharded across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{DichotomicObservable, Sign};
use crate::sequential::{
    born_probability, collapse, mixed_joint_distribution, JointDistribution, QuantumState,
};

/// Trajectories per RNG stream. Fixed, so the shard structure and therefore
/// the aggregate counts never depend on the worker count.
const BATCH_SIZE: u64 = 8192;

/// Execution order of the two measurements in one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Ab,
    Ba,
}

/// One simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySample {
    pub order: Order,
    pub outcome_first: Sign,
    pub outcome_second: Sign,
    /// Outcomes relabeled order-independently as (a-outcome, b-outcome).
    pub canonical_pair: (Sign, Sign),
}

/// Draws one trajectory: uniform order, Born-rule first outcome, projective
/// collapse, Born-rule second outcome.
pub fn sample_once(
    rng: &mut impl Rng,
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<TrajectorySample> {
    let order = if rng.random::<f64>() < 0.5 {
        Order::Ab
    } else {
        Order::Ba
    };
    let (first, second) = match order {
        Order::Ab => (a, b),
        Order::Ba => (b, a),
    };

    let p_first_plus = born_probability(psi, first.projector(Sign::Plus))?;
    let outcome_first = if rng.random::<f64>() < p_first_plus {
        Sign::Plus
    } else {
        Sign::Minus
    };
    // Only a sampled branch is collapsed, so its probability is positive by
    // construction; a zero-probability collapse here means broken numerics.
    let collapsed = collapse(psi, first.projector(outcome_first)).map_err(|e| match e {
        Error::ZeroProbabilityCollapse { probability, .. } => Error::Numerical(format!(
            "sampled branch has vanishing probability {probability:.3e}"
        )),
        other => other,
    })?;

    let p_second_plus = born_probability(&collapsed, second.projector(Sign::Plus))?;
    let outcome_second = if rng.random::<f64>() < p_second_plus {
        Sign::Plus
    } else {
        Sign::Minus
    };

    let canonical_pair = match order {
        Order::Ab => (outcome_first, outcome_second),
        Order::Ba => (outcome_second, outcome_first),
    };
    Ok(TrajectorySample {
        order,
        outcome_first,
        outcome_second,
        canonical_pair,
    })
}

/// Aggregated counts and frequencies of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub labels: (String, String),
    pub n: u64,
    /// Counts per canonical cell, ordered (+,+), (+,−), (−,+), (−,−).
    pub counts: [u64; 4],
    pub frequencies: [f64; 4],
    pub order_ab_fraction: f64,
    pub max_abs_error_vs_analytic: f64,
}

impl EmpiricalStats {
    pub fn count(&self, i: Sign, j: Sign) -> u64 {
        self.counts[2 * i.index() + j.index()]
    }

    pub fn frequency(&self, i: Sign, j: Sign) -> f64 {
        self.frequencies[2 * i.index() + j.index()]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchCounts {
    cells: [u64; 4],
    order_ab: u64,
}

impl BatchCounts {
    fn merge(mut self, other: BatchCounts) -> BatchCounts {
        for (c, o) in self.cells.iter_mut().zip(other.cells) {
            *c += o;
        }
        self.order_ab += other.order_ab;
        self
    }
}

fn batch_sizes(n: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut index = 0;
    while start < n {
        let size = BATCH_SIZE.min(n - start);
        out.push((index, size));
        start += size;
        index += 1;
    }
    out
}

fn simulate_batch(
    seed: u64,
    batch_index: u64,
    size: u64,
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<BatchCounts> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(batch_index);
    let mut counts = BatchCounts::default();
    for _ in 0..size {
        let sample = sample_once(&mut rng, psi, a, b)?;
        let (i, j) = sample.canonical_pair;
        counts.cells[2 * i.index() + j.index()] += 1;
        if sample.order == Order::Ab {
            counts.order_ab += 1;
        }
    }
    Ok(counts)
}

fn finalize(
    n: u64,
    counts: BatchCounts,
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<EmpiricalStats> {
    let analytic = mixed_joint_distribution(psi, a, b)?;
    let frequencies = counts.cells.map(|c| c as f64 / n as f64);
    let max_abs_error_vs_analytic = frequencies
        .iter()
        .zip(analytic.probabilities())
        .fold(0.0f64, |acc, (f, p)| acc.max((f - p).abs()));
    Ok(EmpiricalStats {
        labels: analytic.labels.clone(),
        n,
        counts: counts.cells,
        frequencies,
        order_ab_fraction: counts.order_ab as f64 / n as f64,
        max_abs_error_vs_analytic,
    })
}

/// Runs `n` trajectories sharded across the rayon pool. Deterministic for a
/// given `(n, seed, scenario)` and identical to [`run_serial`].
pub fn run(
    n: u64,
    seed: u64,
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<EmpiricalStats> {
    if n == 0 {
        return Err(Error::Parameter {
            got: 0,
            expected: 1,
        });
    }
    let counts = batch_sizes(n)
        .into_par_iter()
        .map(|(index, size)| simulate_batch(seed, index, size, psi, a, b))
        .try_reduce(BatchCounts::default, |x, y| Ok(x.merge(y)))?;
    finalize(n, counts, psi, a, b)
}

/// Same batch structure as [`run`], executed on the calling thread.
pub fn run_serial(
    n: u64,
    seed: u64,
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<EmpiricalStats> {
    if n == 0 {
        return Err(Error::Parameter {
            got: 0,
            expected: 1,
        });
    }
    let mut counts = BatchCounts::default();
    for (index, size) in batch_sizes(n) {
        counts = counts.merge(simulate_batch(seed, index, size, psi, a, b)?);
    }
    finalize(n, counts, psi, a, b)
}

/// Compares empirical frequencies against an analytic distribution.
///
/// Returns the max absolute cell error and the per-cell z-scores
/// z = (f − p)/√(p(1−p)/n), with p clamped away from 0 and 1 by 1/(2n) in
/// the denominator so boundary cells stay finite; an exactly matching cell
/// has z = 0 regardless of p.
pub fn compare(stats: &EmpiricalStats, analytic: &JointDistribution) -> Result<(f64, [f64; 4])> {
    if stats.labels != analytic.labels {
        return Err(Error::Label(
            stats.labels.0.clone(),
            stats.labels.1.clone(),
            analytic.labels.0.clone(),
            analytic.labels.1.clone(),
        ));
    }
    let n = stats.n as f64;
    let mut z_scores = [0.0f64; 4];
    let mut max_abs_error = 0.0f64;
    for (k, (f, p)) in stats
        .frequencies
        .iter()
        .zip(analytic.probabilities())
        .enumerate()
    {
        max_abs_error = max_abs_error.max((f - p).abs());
        let clamped = p.clamp(1.0 / (2.0 * n), 1.0 - 1.0 / (2.0 * n));
        let stderr = (clamped * (1.0 - clamped) / n).sqrt();
        z_scores[k] = (f - p) / stderr;
    }
    Ok((max_abs_error, z_scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrices::{pauli_x, pauli_z};
    use crate::observables::Site;
    use crate::sequential::singlet_state;

    fn obs(m: &crate::linalg::ComplexMatrix) -> DichotomicObservable {
        DichotomicObservable::from_matrix(m).unwrap()
    }

    #[test]
    fn repeated_observable_always_agrees() {
        let z = obs(&pauli_z());
        let psi = QuantumState::seeded_random(2, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..200 {
            let s = sample_once(&mut rng, &psi, &z, &z).unwrap();
            assert_eq!(s.outcome_first, s.outcome_second);
        }
    }

    #[test]
    fn deterministic_state_gives_deterministic_pair() {
        let z = obs(&pauli_z());
        let zero = QuantumState::basis(2, 0);
        let mut rng = ChaCha12Rng::seed_from_u64(18);
        for _ in 0..100 {
            let s = sample_once(&mut rng, &zero, &z, &z).unwrap();
            assert_eq!(s.canonical_pair, (Sign::Plus, Sign::Plus));
        }
    }

    #[test]
    fn order_fraction_near_half() {
        let z = obs(&pauli_z());
        let x = obs(&pauli_x());
        let stats = run_serial(40_000, 5, &QuantumState::basis(2, 0), &z, &x).unwrap();
        assert!((stats.order_ab_fraction - 0.5).abs() < 0.02);
    }

    #[test]
    fn run_is_deterministic_and_matches_serial() {
        let z = obs(&pauli_z());
        let x = obs(&pauli_x());
        let psi = QuantumState::basis(2, 0);
        let a = run(30_000, 42, &psi, &z, &x).unwrap();
        let b = run(30_000, 42, &psi, &z, &x).unwrap();
        let c = run_serial(30_000, 42, &psi, &z, &x).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.counts.iter().sum::<u64>(), 30_000);
    }

    #[test]
    fn qubit_order_effect_frequencies_converge() {
        let z = obs(&pauli_z());
        let x = obs(&pauli_x());
        let stats = run(200_000, 7, &QuantumState::basis(2, 0), &z, &x).unwrap();
        let expected = [0.375, 0.375, 0.125, 0.125];
        for (f, p) in stats.frequencies.iter().zip(expected) {
            assert!((f - p).abs() < 0.01, "{f} vs {p}");
        }
    }

    #[test]
    fn commuting_lifted_pair_matches_tensor_probabilities() {
        let a = obs(&pauli_z()).lift(Site::Left, 2);
        let b = obs(&pauli_x()).lift(Site::Right, 2);
        let psi = singlet_state();
        let stats = run(100_000, 11, &psi, &a, &b).unwrap();
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                let tensor = a.projector(i).matmul(b.projector(j)).unwrap();
                let p = born_probability(&psi, &tensor).unwrap();
                assert!((stats.frequency(i, j) - p).abs() < 0.01);
            }
        }
    }

    #[test]
    fn compare_zero_error_on_injected_exact_frequencies() {
        let z = obs(&pauli_z());
        let x = obs(&pauli_x());
        let psi = QuantumState::basis(2, 0);
        let analytic = mixed_joint_distribution(&psi, &z, &x).unwrap();
        let n = 80_000u64;
        let counts = analytic.probabilities().map(|p| (p * n as f64) as u64);
        let stats = EmpiricalStats {
            labels: analytic.labels.clone(),
            n,
            counts,
            frequencies: analytic.probabilities(),
            order_ab_fraction: 0.5,
            max_abs_error_vs_analytic: 0.0,
        };
        let (max_err, z_scores) = compare(&stats, &analytic).unwrap();
        assert_eq!(max_err, 0.0);
        assert_eq!(z_scores, [0.0; 4]);
    }

    #[test]
    fn compare_zero_probability_cell_with_zero_counts() {
        let z = obs(&pauli_z());
        let psi = QuantumState::basis(2, 0);
        // a = b on |0⟩: only the (+,+) cell is populated.
        let analytic = mixed_joint_distribution(&psi, &z, &z).unwrap();
        let stats = run_serial(10_000, 3, &psi, &z, &z).unwrap();
        let (max_err, z_scores) = compare(&stats, &analytic).unwrap();
        assert_eq!(max_err, 0.0);
        assert_eq!(z_scores, [0.0; 4]);
    }

    #[test]
    fn compare_rejects_label_mismatch() {
        let z = obs(&pauli_z()).labeled("Z");
        let x = obs(&pauli_x()).labeled("X");
        let psi = QuantumState::basis(2, 0);
        let stats = run_serial(1000, 1, &psi, &z, &x).unwrap();
        let other = mixed_joint_distribution(&psi, &x, &z).unwrap();
        assert!(matches!(compare(&stats, &other), Err(Error::Label(..))));
    }

    #[test]
    fn zero_samples_is_an_error() {
        let z = obs(&pauli_z());
        let psi = QuantumState::basis(2, 0);
        assert!(run(0, 1, &psi, &z, &z).is_err());
    }

    #[test]
    fn convergence_rate_scales_as_inverse_sqrt_n() {
        // Quadrupling n should roughly halve the average max cell error.
        let z = obs(&pauli_z());
        let x = obs(&pauli_x());
        let psi = QuantumState::basis(2, 0);
        let mean_err = |n: u64| {
            let mut total = 0.0;
            for seed in 0..8u64 {
                total += run(n, 100 + seed, &psi, &z, &x)
                    .unwrap()
                    .max_abs_error_vs_analytic;
            }
            total / 8.0
        };
        let e1 = mean_err(10_000);
        let e2 = mean_err(40_000);
        let e3 = mean_err(160_000);
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!(r1 > 1.3 && r1 < 3.2, "ratio {r1}");
        assert!(r2 > 1.3 && r2 < 3.2, "ratio {r2}");
    }
}
