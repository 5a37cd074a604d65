//! Sequential measurement engine: Born probabilities, projective collapse,
//! two-step outcome probabilities, uniformly mixed joint distributions, and
//! marginal-law deviations.
//!
//! A joint measurement of two possibly incompatible observables is modeled as
//! two consecutive projective measurements whose execution order is random
//! and uniform. The joint probability of outcome pair (i, j) is the equal
//! mixture of the two orderings,
//!
//! ```text
//! P(i, j) = ½ ⟨ψ| Pᵢ Qⱼ Pᵢ |ψ⟩ + ½ ⟨ψ| Qⱼ Pᵢ Qⱼ |ψ⟩,
//! ```
//!
//! which reduces to the usual coincidence probabilities when the observables
//! commute. When they do not, the marginals of P generally depend on the
//! partner observable; that deviation is what [`marginal_deviation`]
//! quantifies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner_product, vec_norm, Complex64, ComplexMatrix};
use crate::observables::{DichotomicObservable, Sign};

/// Tolerance on ‖ψ‖ − 1 for admitted states.
pub const STATE_NORM_TOL: f64 = 1e-10;
/// Probabilities this far below 0 or above 1 are clamped; beyond it they are
/// treated as evidence of a broken projector upstream.
pub const CLAMP_TOL: f64 = 1e-12;
/// Collapse onto an outcome with probability below this floor is an error.
pub const COLLAPSE_FLOOR: f64 = 1e-14;
/// Tolerance for the projector test in [`born_probability`].
pub const PROJECTOR_TOL: f64 = 1e-10;
/// The two algebraic routes to a marginal deviation must agree this tightly.
const MARGINAL_ROUTE_TOL: f64 = 1e-12;

/// Unit vector in a finite-dimensional complex Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Validates finiteness and unit norm (within [`STATE_NORM_TOL`]).
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension("state must have dimension ≥ 1".into()));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::NonFinite {
                context: "state amplitudes".into(),
            });
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::Numerical(format!(
                "state is not normalized: ‖ψ‖ = {norm:.12} (tol {STATE_NORM_TOL:.1e})"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis vector |k⟩.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![Complex64::ZERO; dim];
        amplitudes[k] = Complex64::ONE;
        Self { amplitudes }
    }

    /// Seeded random unit vector with standard normal components.
    pub fn seeded_random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let raw: Vec<Complex64> = (0..dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        let norm = vec_norm(&raw);
        Self {
            amplitudes: raw.into_iter().map(|a| a / norm).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amplitudes)
    }
}

/// The rotationally invariant singlet state (|+−⟩ − |−+⟩)/√2 on C²⊗C², with
/// |+⟩ the first computational basis vector of each factor.
pub fn singlet_state() -> QuantumState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    QuantumState {
        amplitudes: vec![
            Complex64::ZERO,
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::ZERO,
        ],
    }
}

fn check_projector(p: &ComplexMatrix) -> Result<()> {
    let hermiticity = p.hermiticity_deviation();
    let idempotency = (&p.matmul(p)? - p).frobenius_norm();
    if hermiticity > PROJECTOR_TOL || idempotency > PROJECTOR_TOL {
        return Err(Error::Projector {
            hermiticity,
            idempotency,
        });
    }
    Ok(())
}

fn clamp_probability(raw: f64, context: &str) -> Result<f64> {
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&raw) {
        return Err(Error::Numerical(format!(
            "{context} produced probability {raw} outside [0, 1] beyond clamp tolerance"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Born probability ⟨ψ|P|ψ⟩ of the outcome projected by `p`.
pub fn born_probability(psi: &QuantumState, p: &ComplexMatrix) -> Result<f64> {
    if p.rows() != psi.dim() || p.cols() != psi.dim() {
        return Err(Error::Dimension(format!(
            "projector is {}×{} but state has dimension {}",
            p.rows(),
            p.cols(),
            psi.dim()
        )));
    }
    check_projector(p)?;
    let value = p.expectation(psi.amplitudes())?.re;
    clamp_probability(value, "Born rule")
}

/// Projection-postulate state transition ψ → Pψ / ⟨ψ|P|ψ⟩^½.
///
/// Collapsing onto an outcome whose probability is below [`COLLAPSE_FLOOR`]
/// is reported as [`Error::ZeroProbabilityCollapse`]: the outcome cannot
/// occur and there is no post-measurement state.
pub fn collapse(psi: &QuantumState, p: &ComplexMatrix) -> Result<QuantumState> {
    let probability = born_probability(psi, p)?;
    if probability < COLLAPSE_FLOOR {
        return Err(Error::ZeroProbabilityCollapse {
            probability,
            floor: COLLAPSE_FLOOR,
        });
    }
    let projected = p.mul_vec(psi.amplitudes())?;
    let norm = vec_norm(&projected);
    Ok(QuantumState {
        amplitudes: projected.into_iter().map(|a| a / norm).collect(),
    })
}

/// Probability of obtaining outcome `i` of `first` and then outcome `j` of
/// `second`, measured immediately after: ⟨ψ| Pᵢ Qⱼ Pᵢ |ψ⟩.
pub fn sequential_probability(
    psi: &QuantumState,
    first: &DichotomicObservable,
    i: Sign,
    second: &DichotomicObservable,
    j: Sign,
) -> Result<f64> {
    if first.dim() != psi.dim() || second.dim() != psi.dim() {
        return Err(Error::Dimension(format!(
            "state dim {} vs observables {}, {}",
            psi.dim(),
            first.dim(),
            second.dim()
        )));
    }
    let projected = first.projector(i).mul_vec(psi.amplitudes())?;
    let value = inner_product(&projected, &second.projector(j).mul_vec(&projected)?).re;
    clamp_probability(value, "sequential probability")
}

/// Conditional probability of `second = j` given that `first` already
/// produced `i`. Undefined (None) when the conditioning outcome has
/// probability below [`COLLAPSE_FLOOR`].
pub fn conditional_probability(
    psi: &QuantumState,
    first: &DichotomicObservable,
    i: Sign,
    second: &DichotomicObservable,
    j: Sign,
) -> Result<Option<f64>> {
    let p_first = born_probability(psi, first.projector(i))?;
    if p_first < COLLAPSE_FLOOR {
        return Ok(None);
    }
    let joint = sequential_probability(psi, first, i, second, j)?;
    Ok(Some(joint / p_first))
}

/// Joint outcome distribution of a uniformly mixed sequential measurement.
///
/// Cell order is (+,+), (+,−), (−,+), (−,−), with the first index belonging
/// to the observable named by `labels.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub labels: (String, String),
    probs: [f64; 4],
}

impl JointDistribution {
    pub(crate) fn from_cells(labels: (String, String), probs: [f64; 4]) -> Result<Self> {
        let dist = Self { labels, probs };
        dist.validate()?;
        Ok(dist)
    }

    pub fn prob(&self, i: Sign, j: Sign) -> f64 {
        self.probs[2 * i.index() + j.index()]
    }

    /// Cells in the fixed order (+,+), (+,−), (−,+), (−,−).
    pub fn cells(&self) -> [(Sign, Sign, f64); 4] {
        let mut out = [(Sign::Plus, Sign::Plus, 0.0); 4];
        let mut k = 0;
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                out[k] = (i, j, self.prob(i, j));
                k += 1;
            }
        }
        out
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.probs
    }

    /// Marginal probability of the first observable's outcome `i`.
    pub fn marginal_first(&self, i: Sign) -> f64 {
        self.prob(i, Sign::Plus) + self.prob(i, Sign::Minus)
    }

    /// Marginal probability of the second observable's outcome `j`.
    pub fn marginal_second(&self, j: Sign) -> f64 {
        self.prob(Sign::Plus, j) + self.prob(Sign::Minus, j)
    }

    pub fn validate(&self) -> Result<()> {
        for &p in &self.probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Numerical(format!(
                    "joint probability {p} outside [0, 1]"
                )));
            }
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "joint distribution sums to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Uniform-average joint distribution of the mixed sequential measurement of
/// `a` and `b`:
/// P(i, j) = ½[⟨ψ|P_{aᵢ}P_{bⱼ}P_{aᵢ}|ψ⟩ + ⟨ψ|P_{bⱼ}P_{aᵢ}P_{bⱼ}|ψ⟩].
pub fn mixed_joint_distribution(
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<JointDistribution> {
    let mut probs = [0.0f64; 4];
    for i in Sign::BOTH {
        for j in Sign::BOTH {
            let ab = sequential_probability(psi, a, i, b, j)?;
            let ba = sequential_probability(psi, b, j, a, i)?;
            probs[2 * i.index() + j.index()] = 0.5 * (ab + ba);
        }
    }
    JointDistribution::from_cells((a.label.clone(), b.label.clone()), probs)
}

/// Which party's observable is held fixed in a marginal comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Alice,
    Bob,
}

/// One marginal-law deviation: the change in the probability of `outcome` of
/// the fixed observable when the partner context switches from
/// `context_labels.0` to `context_labels.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDeviation {
    pub side: Side,
    pub fixed_label: String,
    pub outcome: Sign,
    pub context_labels: (String, String),
    pub deviation: f64,
}

/// Collected marginal deviations with their maximum magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDeviationReport {
    entries: Vec<MarginalDeviation>,
    max_abs_deviation: f64,
}

impl MarginalDeviationReport {
    pub fn new(entries: Vec<MarginalDeviation>) -> Self {
        let max_abs_deviation = entries
            .iter()
            .fold(0.0f64, |acc, e| acc.max(e.deviation.abs()));
        Self {
            entries,
            max_abs_deviation,
        }
    }

    pub fn entries(&self) -> &[MarginalDeviation] {
        &self.entries
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.max_abs_deviation
    }
}

/// Deviation of the fixed observable's outcome marginals between two partner
/// contexts:
///
/// ```text
/// dev(i) = Σⱼ P(fixedᵢ, ctx1ⱼ) − Σⱼ P(fixedᵢ, ctx2ⱼ).
/// ```
///
/// The value is computed both from the mixed joint distributions and from the
/// direct projector-sandwich form
/// ½Σⱼ⟨ψ|P_{c1ⱼ}P_{fᵢ}P_{c1ⱼ}|ψ⟩ − ½Σⱼ⟨ψ|P_{c2ⱼ}P_{fᵢ}P_{c2ⱼ}|ψ⟩;
/// the two routes are algebraically identical and must agree to 1e-12.
pub fn marginal_deviation(
    psi: &QuantumState,
    fixed: &DichotomicObservable,
    ctx1: &DichotomicObservable,
    ctx2: &DichotomicObservable,
    side: Side,
) -> Result<Vec<MarginalDeviation>> {
    let joint1 = mixed_joint_distribution(psi, fixed, ctx1)?;
    let joint2 = mixed_joint_distribution(psi, fixed, ctx2)?;
    let mut entries = Vec::with_capacity(2);
    for i in Sign::BOTH {
        let via_joints = joint1.marginal_first(i) - joint2.marginal_first(i);

        let mut sandwich = 0.0;
        for j in Sign::BOTH {
            sandwich += 0.5 * sequential_probability(psi, ctx1, j, fixed, i)?;
            sandwich -= 0.5 * sequential_probability(psi, ctx2, j, fixed, i)?;
        }
        if (via_joints - sandwich).abs() > MARGINAL_ROUTE_TOL {
            return Err(Error::InternalConsistency(format!(
                "marginal deviation routes disagree: {via_joints} vs {sandwich}"
            )));
        }
        entries.push(MarginalDeviation {
            side,
            fixed_label: fixed.label.clone(),
            outcome: i,
            context_labels: (ctx1.label.clone(), ctx2.label.clone()),
            deviation: via_joints,
        });
    }
    Ok(entries)
}
