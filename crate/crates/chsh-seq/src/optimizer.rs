//! Derivative-free search over parametrized observable quadruples that
//! maximizes λ_max(Ĉ).
//!
//! Observables are parametrized through Hermitian generators: dim² real
//! numbers per observable (diagonal entries, then re/im pairs of the upper
//! triangle) map to A = U D U† with U = exp(iH) and D the ±1 signature
//! diagonal. The map is smooth and surjective onto the fixed-signature
//! manifold; its redundancy is harmless for search. The state is never
//! searched: Ĉ is self-adjoint, so the optimum over states is exactly its
//! top eigenvalue.
//!
//! The local refinement is a coordinate pattern search with shrinking step
//! (start 0.5, shrink ×0.5, stop at 1e-6), restarted from seeded random
//! points; restarts are independent and merged by taking the maximum.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{chsh_operator, max_chsh_over_states, BellScenario};
use crate::error::{Error, Result};
use crate::linalg::{Complex64, ComplexMatrix};
use crate::observables::{DichotomicObservable, Signature, Site};

/// Largest admitted search dimension.
pub const MAX_DIM: usize = 8;
/// Default evaluation budget per restart.
pub const DEFAULT_BUDGET: u64 = 20_000;
/// Default number of restarts.
pub const DEFAULT_RESTARTS: u32 = 16;

const INITIAL_STEP: f64 = 0.5;
const STEP_SHRINK: f64 = 0.5;
const STEP_TOL: f64 = 1e-6;

/// Structural constraint applied to the observable quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// All four observables vary freely on the full space.
    Free,
    /// Alice's observables act on the left tensor factor, Bob's on the
    /// right; all cross-party commutators vanish by construction.
    ProductForm,
    /// A' is pinned to A.
    AEqualsAPrime,
    /// A' and B' are pinned to the identity (trivial measurements).
    PrimesIdentity,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::Free => "free",
            Constraint::ProductForm => "product_form",
            Constraint::AEqualsAPrime => "a_equals_a_prime",
            Constraint::PrimesIdentity => "primes_identity",
        }
    }
}

impl std::str::FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Constraint::Free),
            "product_form" => Ok(Constraint::ProductForm),
            "a_equals_a_prime" => Ok(Constraint::AEqualsAPrime),
            "primes_identity" => Ok(Constraint::PrimesIdentity),
            other => Err(Error::Invalid(format!(
                "unknown constraint '{other}' (expected free, product_form, a_equals_a_prime or primes_identity)"
            ))),
        }
    }
}

/// Dimension, signatures and constraint of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dim: usize,
    /// Signatures for (A, A', B, B'). Under `ProductForm` these are the
    /// single-site signatures; entries pinned by the constraint are unused.
    pub signatures: [Signature; 4],
    pub constraint: Constraint,
}

impl SearchSpace {
    /// Balanced-signature space with the default dimension cap. Under
    /// `ProductForm` the dimension must be a perfect square s² (equal site
    /// dimensions, s ≥ 2).
    pub fn new(dim: usize, constraint: Constraint) -> Result<Self> {
        Self::with_dim_cap(dim, constraint, MAX_DIM)
    }

    /// [`new`](Self::new) with an explicit dimension cap.
    pub fn with_dim_cap(dim: usize, constraint: Constraint, cap: usize) -> Result<Self> {
        if !(2..=cap).contains(&dim) {
            return Err(Error::Invalid(format!(
                "search dimension must be in 2..={cap}, got {dim}"
            )));
        }
        let sig_dim = match constraint {
            Constraint::ProductForm => {
                let site = (dim as f64).sqrt().round() as usize;
                if site < 2 || site * site != dim {
                    return Err(Error::Invalid(format!(
                        "product_form requires dim = s² with s ≥ 2, got {dim}"
                    )));
                }
                site
            }
            _ => dim,
        };
        let sig = Signature::balanced(sig_dim)?;
        Ok(Self {
            dim,
            signatures: [sig; 4],
            constraint,
        })
    }

    /// Side length of one tensor factor under `ProductForm`.
    pub fn site_dim(&self) -> usize {
        match self.constraint {
            Constraint::ProductForm => (self.dim as f64).sqrt().round() as usize,
            _ => self.dim,
        }
    }

    /// Number of observables that carry free parameters.
    fn free_observables(&self) -> usize {
        match self.constraint {
            Constraint::Free | Constraint::ProductForm => 4,
            Constraint::AEqualsAPrime => 3,
            Constraint::PrimesIdentity => 2,
        }
    }

    /// Length of the parameter vector: dim² per freely parametrized
    /// observable (site dim² under `ProductForm`).
    pub fn parameter_count(&self) -> usize {
        let d = self.site_dim();
        self.free_observables() * d * d
    }
}

/// Hermitian matrix from d² real parameters: the first d fill the diagonal,
/// the rest are (re, im) pairs for the upper triangle in row-major order.
#[allow(clippy::needless_range_loop)] // writes (i, j) and (j, i) per step
fn hermitian_from_params(params: &[f64], dim: usize) -> ComplexMatrix {
    debug_assert_eq!(params.len(), dim * dim);
    let mut rows = vec![vec![Complex64::ZERO; dim]; dim];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = Complex64::new(params[i], 0.0);
    }
    let mut idx = dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = Complex64::new(params[idx], params[idx + 1]);
            idx += 2;
            rows[i][j] = v;
            rows[j][i] = v.conj();
        }
    }
    ComplexMatrix::from_rows(&rows).expect("finite parameters produce a finite matrix")
}

fn observable_from_params(
    params: &[f64],
    sig: Signature,
    label: &str,
) -> Result<DichotomicObservable> {
    let dim = sig.dim();
    let h = hermitian_from_params(params, dim);
    let u = h.unitary_from_generator()?;
    Ok(DichotomicObservable::from_unitary_columns(
        &u,
        sig,
        label.into(),
    ))
}

/// Builds the (A, A', B, B') quadruple encoded by `params` under the
/// space's constraint.
pub fn build_observables(params: &[f64], space: &SearchSpace) -> Result<[DichotomicObservable; 4]> {
    if params.len() != space.parameter_count() {
        return Err(Error::Parameter {
            got: params.len(),
            expected: space.parameter_count(),
        });
    }
    let d = space.site_dim();
    let block = d * d;
    let chunk = |k: usize| &params[k * block..(k + 1) * block];
    match space.constraint {
        Constraint::Free => Ok([
            observable_from_params(chunk(0), space.signatures[0], "A")?,
            observable_from_params(chunk(1), space.signatures[1], "A'")?,
            observable_from_params(chunk(2), space.signatures[2], "B")?,
            observable_from_params(chunk(3), space.signatures[3], "B'")?,
        ]),
        Constraint::ProductForm => {
            let site = space.site_dim();
            Ok([
                observable_from_params(chunk(0), space.signatures[0], "A")?.lift(Site::Left, site),
                observable_from_params(chunk(1), space.signatures[1], "A'")?.lift(Site::Left, site),
                observable_from_params(chunk(2), space.signatures[2], "B")?.lift(Site::Right, site),
                observable_from_params(chunk(3), space.signatures[3], "B'")?
                    .lift(Site::Right, site),
            ])
        }
        Constraint::AEqualsAPrime => {
            let a = observable_from_params(chunk(0), space.signatures[0], "A")?;
            let a_prime = a.clone().labeled("A'");
            Ok([
                a,
                a_prime,
                observable_from_params(chunk(1), space.signatures[2], "B")?,
                observable_from_params(chunk(2), space.signatures[3], "B'")?,
            ])
        }
        Constraint::PrimesIdentity => Ok([
            observable_from_params(chunk(0), space.signatures[0], "A")?,
            DichotomicObservable::identity(space.dim).labeled("A'"),
            observable_from_params(chunk(1), space.signatures[2], "B")?,
            DichotomicObservable::identity(space.dim).labeled("B'"),
        ]),
    }
}

/// λ_max(Ĉ) for the quadruple encoded by `params`.
pub fn objective(params: &[f64], space: &SearchSpace) -> Result<f64> {
    let [a, a_prime, b, b_prime] = build_observables(params, space)?;
    let operator = chsh_operator(&a, &a_prime, &b, &b_prime)?;
    let eig = operator.hermitian_eig()?;
    Ok(*eig.eigenvalues.last().expect("non-empty spectrum"))
}

/// Outcome of a [`search`].
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_value: f64,
    pub best_parameters: Vec<f64>,
    /// The best quadruple together with the maximizing eigenvector of Ĉ.
    pub best_scenario: BellScenario,
    pub restarts: u32,
    pub evaluations: u64,
    pub converged: bool,
    /// Best-so-far trace of the winning restart: (evaluation index, value)
    /// at the initial point and at every accepted improvement.
    pub improvements: Vec<(u64, f64)>,
}

struct RestartOutcome {
    value: f64,
    parameters: Vec<f64>,
    evaluations: u64,
    converged: bool,
    improvements: Vec<(u64, f64)>,
}

fn refine_from(mut params: Vec<f64>, space: &SearchSpace, budget: u64) -> Result<RestartOutcome> {
    let mut best = objective(&params, space)?;
    let mut evaluations: u64 = 1;
    let mut improvements = vec![(evaluations, best)];
    let mut step = INITIAL_STEP;

    'outer: while step >= STEP_TOL {
        let mut improved = false;
        for coord in 0..params.len() {
            for delta in [step, -step] {
                if evaluations >= budget {
                    break 'outer;
                }
                params[coord] += delta;
                let value = objective(&params, space)?;
                evaluations += 1;
                if value > best {
                    best = value;
                    improved = true;
                    improvements.push((evaluations, value));
                    break;
                }
                params[coord] -= delta;
            }
        }
        if !improved {
            step *= STEP_SHRINK;
        }
    }

    Ok(RestartOutcome {
        value: best,
        parameters: params,
        evaluations,
        converged: step < STEP_TOL,
        improvements,
    })
}

/// Pattern search from `restarts` seeded random starts, each with `budget`
/// objective evaluations. Deterministic for a given seed: restart `r` draws
/// its start from ChaCha stream `r`, restarts run independently (in parallel
/// across the rayon pool) and merge by maximum value with ties broken toward
/// the lower restart index.
pub fn search(space: &SearchSpace, budget: u64, restarts: u32, seed: u64) -> Result<SearchResult> {
    if budget == 0 || restarts == 0 {
        return Err(Error::Invalid(
            "search needs at least one evaluation and one restart".into(),
        ));
    }
    let n = space.parameter_count();
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let start: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            refine_from(start, space, budget)
        })
        .collect::<Result<_>>()?;

    let evaluations: u64 = outcomes.iter().map(|o| o.evaluations).sum();
    let winner = outcomes
        .into_iter()
        .reduce(|best, cand| if cand.value > best.value { cand } else { best })
        .expect("at least one restart");

    let [a, a_prime, b, b_prime] = build_observables(&winner.parameters, space)?;
    let (_, state) = max_chsh_over_states(&a, &a_prime, &b, &b_prime)?;
    let best_scenario = BellScenario::new(state, a, a_prime, b, b_prime)?;

    Ok(SearchResult {
        best_value: winner.value,
        best_parameters: winner.parameters,
        best_scenario,
        restarts,
        evaluations,
        converged: winner.converged,
        improvements: winner.improvements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::{CLASSICAL_BOUND, MIXED_SEQUENTIAL_BOUND, TSIRELSON_BOUND};

    #[test]
    fn parameter_counts_per_constraint() {
        let free = SearchSpace::new(4, Constraint::Free).unwrap();
        assert_eq!(free.parameter_count(), 64);
        let product = SearchSpace::new(4, Constraint::ProductForm).unwrap();
        assert_eq!(product.parameter_count(), 16);
        let pinned = SearchSpace::new(4, Constraint::AEqualsAPrime).unwrap();
        assert_eq!(pinned.parameter_count(), 48);
        let trivial = SearchSpace::new(4, Constraint::PrimesIdentity).unwrap();
        assert_eq!(trivial.parameter_count(), 32);
    }

    #[test]
    fn space_rejects_bad_dimensions() {
        assert!(SearchSpace::new(1, Constraint::Free).is_err());
        assert!(SearchSpace::new(9, Constraint::Free).is_err());
        assert!(SearchSpace::new(6, Constraint::ProductForm).is_err());
        assert!(SearchSpace::new(2, Constraint::ProductForm).is_err());
    }

    #[test]
    fn zero_parameters_give_signature_diagonals() {
        let space = SearchSpace::new(4, Constraint::Free).unwrap();
        let quad = build_observables(&vec![0.0; 64], &space).unwrap();
        let expected = ComplexMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        for obs in &quad {
            assert!((obs.operator() - &expected).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn built_observables_square_to_identity() {
        let space = SearchSpace::new(4, Constraint::Free).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let params: Vec<f64> = (0..space.parameter_count())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        for obs in build_observables(&params, &space).unwrap() {
            obs.validate().unwrap();
        }
    }

    #[test]
    fn product_form_builds_commuting_sites() {
        let space = SearchSpace::new(4, Constraint::ProductForm).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let params: Vec<f64> = (0..space.parameter_count())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let [a, _, b, b_prime] = build_observables(&params, &space).unwrap();
        for bob in [&b, &b_prime] {
            let ab = a.operator().matmul(bob.operator()).unwrap();
            let ba = bob.operator().matmul(a.operator()).unwrap();
            assert!((&ab - &ba).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_parameter_length_is_rejected() {
        let space = SearchSpace::new(2, Constraint::Free).unwrap();
        assert!(matches!(
            build_observables(&[0.0; 3], &space),
            Err(Error::Parameter {
                got: 3,
                expected: 16
            })
        ));
    }

    #[test]
    fn objective_respects_constraint_bounds() {
        for (constraint, bound) in [
            (Constraint::AEqualsAPrime, CLASSICAL_BOUND),
            (Constraint::PrimesIdentity, TSIRELSON_BOUND),
            (Constraint::Free, MIXED_SEQUENTIAL_BOUND),
        ] {
            let space = SearchSpace::new(4, constraint).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(77);
            for _ in 0..25 {
                let params: Vec<f64> = (0..space.parameter_count())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let value = objective(&params, &space).unwrap();
                assert!(
                    value <= bound + 1e-9,
                    "{}: {value} > {bound}",
                    constraint.name()
                );
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        let space = SearchSpace::new(2, Constraint::Free).unwrap();
        let a = search(&space, 300, 2, 123).unwrap();
        let b = search(&space, 300, 2, 123).unwrap();
        assert_eq!(a.best_value, b.best_value);
        assert_eq!(a.best_parameters, b.best_parameters);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn search_re_evaluation_reproduces_best_value() {
        let space = SearchSpace::new(4, Constraint::ProductForm).unwrap();
        let result = search(&space, 500, 2, 7).unwrap();
        let again = objective(&result.best_parameters, &space).unwrap();
        assert!((again - result.best_value).abs() < 1e-9);
        assert!(result.best_value <= MIXED_SEQUENTIAL_BOUND + 1e-9);
    }

    #[test]
    fn improvements_trace_is_strictly_increasing() {
        let space = SearchSpace::new(2, Constraint::Free).unwrap();
        let result = search(&space, 400, 1, 3).unwrap();
        for pair in result.improvements.windows(2) {
            assert!(pair[1].1 > pair[0].1);
            assert!(pair[1].0 > pair[0].0);
        }
    }

    #[test]
    fn pinned_alice_search_stays_classical_and_reaches_two() {
        let space = SearchSpace::new(2, Constraint::AEqualsAPrime).unwrap();
        let result = search(&space, 2000, 4, 11).unwrap();
        assert!(result.best_value <= CLASSICAL_BOUND + 1e-9);
        assert!(result.best_value >= CLASSICAL_BOUND - 1e-4);
    }

    #[test]
    fn search_scenario_matches_value() {
        let space = SearchSpace::new(2, Constraint::Free).unwrap();
        let result = search(&space, 500, 2, 19).unwrap();
        let report = crate::chsh::chsh_value(&result.best_scenario).unwrap();
        assert!((report.chsh_value - result.best_value).abs() < 1e-9);
    }
}
