//! Correlation functions, the symmetrized CHSH operator, the norm
//! decomposition of its square, and bound classification.
//!
//! The load-bearing identity is that the correlation function of a uniformly
//! mixed sequential measurement equals the expectation of the symmetrized
//! product,
//!
//! ```text
//! E(A, B) = Σᵢⱼ i·j·P(i, j) = ⟨ψ| ½(AB + BA) |ψ⟩,
//! ```
//!
//! so the CHSH quantity is the expectation of a single self-adjoint operator
//! Ĉ and can be maximized over states exactly via λ_max(Ĉ). Both routes are
//! always evaluated and cross-checked; a disagreement is a bug, not a
//! warning. Decomposing Ĉ² into two "compatible" blocks (norm ≤ 4 each) and
//! four order-effect blocks (norm ≤ 3/2 each) bounds ‖Ĉ²‖ by 12 and hence
//! |CHSH| by 2√3, which replaces Tsirelson's 2√2 when the two parties'
//! measurements need not commute.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::observables::{DichotomicObservable, Sign};
use crate::sequential::{
    marginal_deviation, mixed_joint_distribution, MarginalDeviationReport, QuantumState, Side,
};

/// Classical (local hidden variable) bound on |CHSH|.
pub const CLASSICAL_BOUND: f64 = 2.0;
/// Tsirelson's bound 2√2, valid when the parties' observables commute.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;
/// Upper limit 2√3 for uniformly mixed incompatible sequential measurements.
pub const MIXED_SEQUENTIAL_BOUND: f64 = 2.0 * SQRT_3;
const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Half-open tolerance at each classification threshold; boundary values
/// classify into the tighter class.
pub const CLASSIFICATION_TOL: f64 = 1e-9;
/// Correlation-route vs operator-route disagreement beyond this is an error.
const ROUTE_TOL: f64 = 1e-8;
/// Tolerance on the exact decomposition residual before it is reported as an
/// internal inconsistency.
const DECOMPOSITION_TOL: f64 = 1e-8;

/// State plus the four observables of a Bell-CHSH experiment on one space.
#[derive(Debug, Clone)]
pub struct BellScenario {
    pub psi: QuantumState,
    pub a: DichotomicObservable,
    pub a_prime: DichotomicObservable,
    pub b: DichotomicObservable,
    pub b_prime: DichotomicObservable,
}

impl BellScenario {
    /// Validates the shared dimension and relabels the observables with their
    /// canonical roles A, A', B, B'.
    pub fn new(
        psi: QuantumState,
        a: DichotomicObservable,
        a_prime: DichotomicObservable,
        b: DichotomicObservable,
        b_prime: DichotomicObservable,
    ) -> Result<Self> {
        let dim = psi.dim();
        for (name, obs) in [("A", &a), ("A'", &a_prime), ("B", &b), ("B'", &b_prime)] {
            if obs.dim() != dim {
                return Err(Error::Dimension(format!(
                    "observable {name} has dimension {}, state has {dim}",
                    obs.dim()
                )));
            }
        }
        Ok(Self {
            psi,
            a: a.labeled("A"),
            a_prime: a_prime.labeled("A'"),
            b: b.labeled("B"),
            b_prime: b_prime.labeled("B'"),
        })
    }

    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    pub fn observables(&self) -> [&DichotomicObservable; 4] {
        [&self.a, &self.a_prime, &self.b, &self.b_prime]
    }
}

/// Where a CHSH value sits relative to the classical, Tsirelson and mixed
/// sequential bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundClass {
    WithinClassical,
    WithinTsirelson,
    WithinSqrt3,
    BeyondSqrt3,
}

impl std::fmt::Display for BoundClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BoundClass::WithinClassical => "within_classical",
            BoundClass::WithinTsirelson => "within_tsirelson",
            BoundClass::WithinSqrt3 => "within_sqrt3",
            BoundClass::BeyondSqrt3 => "beyond_sqrt3",
        };
        write!(f, "{name}")
    }
}

/// Classifies |value| against the three bounds with [`CLASSIFICATION_TOL`].
pub fn classify_bound(value: f64) -> BoundClass {
    classify_bound_with_tol(value, CLASSIFICATION_TOL)
}

/// [`classify_bound`] with an explicit threshold tolerance.
pub fn classify_bound_with_tol(value: f64, tol: f64) -> BoundClass {
    let v = value.abs();
    if v <= CLASSICAL_BOUND + tol {
        BoundClass::WithinClassical
    } else if v <= TSIRELSON_BOUND + tol {
        BoundClass::WithinTsirelson
    } else if v <= MIXED_SEQUENTIAL_BOUND + tol {
        BoundClass::WithinSqrt3
    } else {
        BoundClass::BeyondSqrt3
    }
}

/// Correlation function E(a, b) = Σᵢⱼ i·j·P(aᵢ, bⱼ) over the mixed joint
/// distribution.
pub fn correlation(
    psi: &QuantumState,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<f64> {
    let dist = mixed_joint_distribution(psi, a, b)?;
    let mut e = 0.0;
    for i in Sign::BOTH {
        for j in Sign::BOTH {
            e += i.value() * j.value() * dist.prob(i, j);
        }
    }
    Ok(e)
}

/// Symmetrized product ½(AB + BA), the self-adjoint effective observable of
/// the mixed sequential measurement of `a` and `b`. Its norm is at most 1.
pub fn symmetrized_product(
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<ComplexMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "cannot symmetrize observables of dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let ab = a.operator().matmul(b.operator())?;
    let ba = b.operator().matmul(a.operator())?;
    Ok((&ab + &ba).scale(0.5))
}

/// The CHSH operator Ĉ = ÂB − ÂB' + Â'B' + Â'B built from symmetrized
/// products; equal to ½(C + C†) for C = AB − AB' + A'B' + A'B.
pub fn chsh_operator(
    a: &DichotomicObservable,
    a_prime: &DichotomicObservable,
    b: &DichotomicObservable,
    b_prime: &DichotomicObservable,
) -> Result<ComplexMatrix> {
    let ab = symmetrized_product(a, b)?;
    let ab_prime = symmetrized_product(a, b_prime)?;
    let a_prime_b_prime = symmetrized_product(a_prime, b_prime)?;
    let a_prime_b = symmetrized_product(a_prime, b)?;
    Ok(&(&(&ab - &ab_prime) + &a_prime_b_prime) + &a_prime_b)
}

/// The four correlation functions entering the CHSH quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub ab: f64,
    pub ab_prime: f64,
    pub a_prime_b_prime: f64,
    pub a_prime_b: f64,
}

impl Correlations {
    /// E(A,B) − E(A,B') + E(A',B') + E(A',B).
    pub fn chsh(&self) -> f64 {
        self.ab - self.ab_prime + self.a_prime_b_prime + self.a_prime_b
    }
}

/// Full analytic result for one Bell scenario.
#[derive(Debug, Clone, Serialize)]
pub struct CHSHReport {
    pub correlations: Correlations,
    pub chsh_value: f64,
    pub chsh_via_operator: f64,
    pub marginal_report: MarginalDeviationReport,
    pub classification: BoundClass,
}

/// Evaluates the CHSH quantity for a scenario along both routes
/// (probability sums and ⟨ψ|Ĉ|ψ⟩), cross-checks them, and assembles the
/// marginal-deviation report for all fixed/context combinations.
pub fn chsh_value(scenario: &BellScenario) -> Result<CHSHReport> {
    let BellScenario {
        psi,
        a,
        a_prime,
        b,
        b_prime,
    } = scenario;

    let correlations = Correlations {
        ab: correlation(psi, a, b)?,
        ab_prime: correlation(psi, a, b_prime)?,
        a_prime_b_prime: correlation(psi, a_prime, b_prime)?,
        a_prime_b: correlation(psi, a_prime, b)?,
    };
    let chsh_value = correlations.chsh();

    let operator = chsh_operator(a, a_prime, b, b_prime)?;
    let chsh_via_operator = operator.expectation(psi.amplitudes())?.re;

    if (chsh_value - chsh_via_operator).abs() > ROUTE_TOL {
        return Err(Error::InternalConsistency(format!(
            "CHSH routes disagree: probability route {chsh_value} vs operator route {chsh_via_operator}"
        )));
    }

    let mut entries = Vec::with_capacity(8);
    for fixed in [a, a_prime] {
        entries.extend(marginal_deviation(psi, fixed, b, b_prime, Side::Alice)?);
    }
    for fixed in [b, b_prime] {
        entries.extend(marginal_deviation(psi, fixed, a, a_prime, Side::Bob)?);
    }

    Ok(CHSHReport {
        correlations,
        chsh_value,
        chsh_via_operator,
        marginal_report: MarginalDeviationReport::new(entries),
        classification: classify_bound(chsh_value),
    })
}

/// λ_max(Ĉ) together with a maximizing state. Because Ĉ is self-adjoint,
/// the supremum of ⟨ψ|Ĉ|ψ⟩ over unit ψ is exactly its largest eigenvalue.
pub fn max_chsh_over_states(
    a: &DichotomicObservable,
    a_prime: &DichotomicObservable,
    b: &DichotomicObservable,
    b_prime: &DichotomicObservable,
) -> Result<(f64, QuantumState)> {
    let operator = chsh_operator(a, a_prime, b, b_prime)?;
    let eig = operator.hermitian_eig()?;
    let top = eig.dim() - 1;
    let lambda_max = eig.eigenvalues[top];
    let state = QuantumState::new(eig.eigenvector(top))?;
    Ok((lambda_max, state))
}

/// Operator norms of the six decomposition terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermNorms {
    pub g1: f64,
    pub g2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// The six-term decomposition of Ĉ² (symmetrized) or C² (unsymmetrized).
///
/// For the symmetrized variant the fields hold G₁, G₂, D₁…D₄ with
/// ‖G₁‖, ‖G₂‖ ≤ 4 and ‖Dᵢ‖ ≤ 3/2; for the unsymmetrized variant they hold
/// C₁, C₂, Δ₁…Δ₄. `residual` is the norm of the difference between the
/// squared operator and the sum of the six terms, which is zero up to
/// floating-point noise because the decomposition is an exact regrouping.
#[derive(Debug, Clone)]
pub struct NormDecomposition {
    pub symmetrized: bool,
    pub g1: ComplexMatrix,
    pub g2: ComplexMatrix,
    pub d1: ComplexMatrix,
    pub d2: ComplexMatrix,
    pub d3: ComplexMatrix,
    pub d4: ComplexMatrix,
    pub norms: TermNorms,
    pub residual: f64,
}

impl NormDecomposition {
    pub fn terms(&self) -> [&ComplexMatrix; 6] {
        [&self.g1, &self.g2, &self.d1, &self.d2, &self.d3, &self.d4]
    }

    pub fn sum_of_terms(&self) -> ComplexMatrix {
        let mut sum = self.g1.clone();
        for term in [&self.g2, &self.d1, &self.d2, &self.d3, &self.d4] {
            sum = &sum + term;
        }
        sum
    }
}

/// Decomposes the squared CHSH operator into its six blocks.
///
/// With pair products m₁ = XB, m₂ = XB', m₃ = X'B', m₄ = X'B (symmetrized or
/// plain according to the flag), the square of m₁ − m₂ + m₃ + m₄ regroups
/// exactly into
///
/// ```text
/// G₁ = m₁² + m₂² + m₃² + m₄²
/// G₂ = m₁m₃ − m₂m₄ + m₃m₁ − m₄m₂
/// D₁ = m₁m₄ − m₂m₃      D₂ = m₃m₄ − m₂m₁
/// D₃ = m₄m₁ − m₃m₂      D₄ = m₄m₃ − m₁m₂
/// ```
pub fn norm_decomposition(
    a: &DichotomicObservable,
    a_prime: &DichotomicObservable,
    b: &DichotomicObservable,
    b_prime: &DichotomicObservable,
    symmetrized: bool,
) -> Result<NormDecomposition> {
    let (m1, m2, m3, m4, total) = if symmetrized {
        let m1 = symmetrized_product(a, b)?;
        let m2 = symmetrized_product(a, b_prime)?;
        let m3 = symmetrized_product(a_prime, b_prime)?;
        let m4 = symmetrized_product(a_prime, b)?;
        let total = chsh_operator(a, a_prime, b, b_prime)?;
        (m1, m2, m3, m4, total)
    } else {
        let m1 = a.operator().matmul(b.operator())?;
        let m2 = a.operator().matmul(b_prime.operator())?;
        let m3 = a_prime.operator().matmul(b_prime.operator())?;
        let m4 = a_prime.operator().matmul(b.operator())?;
        let total = &(&(&m1 - &m2) + &m3) + &m4;
        (m1, m2, m3, m4, total)
    };

    let g1 = &(&(&m1.matmul(&m1)? + &m2.matmul(&m2)?) + &m3.matmul(&m3)?) + &m4.matmul(&m4)?;
    let g2 = &(&(&m1.matmul(&m3)? - &m2.matmul(&m4)?) + &m3.matmul(&m1)?) - &m4.matmul(&m2)?;
    let d1 = &m1.matmul(&m4)? - &m2.matmul(&m3)?;
    let d2 = &m3.matmul(&m4)? - &m2.matmul(&m1)?;
    let d3 = &m4.matmul(&m1)? - &m3.matmul(&m2)?;
    let d4 = &m4.matmul(&m3)? - &m1.matmul(&m2)?;

    let squared = total.matmul(&total)?;
    let decomposition = NormDecomposition {
        symmetrized,
        norms: TermNorms {
            g1: g1.operator_norm()?,
            g2: g2.operator_norm()?,
            d1: d1.operator_norm()?,
            d2: d2.operator_norm()?,
            d3: d3.operator_norm()?,
            d4: d4.operator_norm()?,
        },
        residual: 0.0,
        g1,
        g2,
        d1,
        d2,
        d3,
        d4,
    };
    let residual = (&squared - &decomposition.sum_of_terms()).operator_norm()?;
    if residual > DECOMPOSITION_TOL {
        return Err(Error::InternalConsistency(format!(
            "decomposition residual {residual:.3e} exceeds {DECOMPOSITION_TOL:.1e}"
        )));
    }
    Ok(NormDecomposition {
        residual,
        ..decomposition
    })
}
