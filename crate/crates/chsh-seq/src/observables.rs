//! Dichotomic (±1-eigenvalue) observables and their spectral projectors.
//!
//! An observable here is always stored together with its two spectral
//! projectors, A = P₊ − P₋, so downstream measurement code never has to
//! re-diagonalize. Construction validates the spectrum; the projector pair is
//! assembled so the type invariants hold regardless of how close the input
//! was to exactly dichotomic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{projector_from_columns, Complex64, ComplexMatrix};

/// Half-width of the bands around ±1 that an eigenvalue must fall into.
pub const SPECTRUM_TOL: f64 = 1e-8;
/// Tolerance for the structural invariants of a constructed observable.
pub const OBSERVABLE_TOL: f64 = 1e-10;

/// Measurement outcome of a dichotomic observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// The eigenvalue this outcome corresponds to.
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// Which tensor factor an observable is lifted onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Left,
    Right,
}

/// Multiplicities of the +1 and −1 eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub plus_multiplicity: usize,
    pub minus_multiplicity: usize,
}

impl Signature {
    pub fn new(plus_multiplicity: usize, minus_multiplicity: usize) -> Result<Self> {
        if plus_multiplicity == 0 || minus_multiplicity == 0 {
            return Err(Error::Signature(
                "both eigenvalue multiplicities must be at least 1".into(),
            ));
        }
        Ok(Self {
            plus_multiplicity,
            minus_multiplicity,
        })
    }

    /// Balanced signature: (dim/2, dim/2), rounding the +1 multiplicity up
    /// for odd dimensions.
    pub fn balanced(dim: usize) -> Result<Self> {
        Self::new(dim.div_ceil(2), dim / 2)
    }

    pub fn dim(&self) -> usize {
        self.plus_multiplicity + self.minus_multiplicity
    }
}

/// Self-adjoint operator with eigenvalues ±1 and its spectral projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicObservable {
    pub label: String,
    operator: ComplexMatrix,
    proj_plus: ComplexMatrix,
    proj_minus: ComplexMatrix,
}

impl DichotomicObservable {
    /// Builds an observable from a Hermitian matrix whose eigenvalues all lie
    /// within [`SPECTRUM_TOL`] of ±1, requiring at least one eigenvalue of
    /// each sign.
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        Self::from_matrix_with(m, false)
    }

    /// Like [`from_matrix`](Self::from_matrix), but `allow_trivial` admits
    /// observables whose spectrum is a single sign (e.g. the identity).
    pub fn from_matrix_with(m: &ComplexMatrix, allow_trivial: bool) -> Result<Self> {
        let eig = m.hermitian_eig()?;
        let mut plus_cols = Vec::new();
        let mut minus_cols = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if (lambda - 1.0).abs() <= SPECTRUM_TOL {
                plus_cols.push(k);
            } else if (lambda + 1.0).abs() <= SPECTRUM_TOL {
                minus_cols.push(k);
            } else {
                return Err(Error::Spectrum(format!(
                    "eigenvalue {lambda} is not within {SPECTRUM_TOL:.1e} of ±1"
                )));
            }
        }
        if !allow_trivial && (plus_cols.is_empty() || minus_cols.is_empty()) {
            return Err(Error::Spectrum(
                "spectrum has a single sign; pass allow_trivial to accept trivial observables"
                    .into(),
            ));
        }
        let proj_plus = projector_from_columns(&eig.eigenvectors, &plus_cols);
        let proj_minus = projector_from_columns(&eig.eigenvectors, &minus_cols);
        // Store the renormalized operator so A = P₊ − P₋ holds exactly even
        // when the input eigenvalues sat a few e-9 away from ±1.
        let operator = &proj_plus - &proj_minus;
        Ok(Self {
            label: "obs".into(),
            operator,
            proj_plus,
            proj_minus,
        })
    }

    /// Spin observable σ·n for the unit vector
    /// n = (sinθ cosφ, sinθ sinφ, cosθ).
    ///
    /// Convention: θ = 0 gives σz, (θ = π/2, φ = 0) gives σx and
    /// (θ = π/2, φ = π/2) gives σy.
    pub fn from_spin_direction(theta: f64, phi: f64) -> Self {
        let (st, ct) = (theta.sin(), theta.cos());
        let phase = Complex64::new(phi.cos(), phi.sin());
        let operator = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(ct, 0.0),
            (0, 1) => phase.conj() * st,
            (1, 0) => phase * st,
            _ => Complex64::new(-ct, 0.0),
        });
        // For an involution, (I ± A)/2 are exactly the spectral projectors.
        let id = ComplexMatrix::identity(2);
        let proj_plus = (&id + &operator).scale(0.5);
        let proj_minus = (&id - &operator).scale(0.5);
        Self {
            label: format!("spin({theta},{phi})"),
            operator,
            proj_plus,
            proj_minus,
        }
    }

    /// The trivial observable I with P₊ = I and P₋ = 0.
    pub fn identity(dim: usize) -> Self {
        Self {
            label: "I".into(),
            operator: ComplexMatrix::identity(dim),
            proj_plus: ComplexMatrix::identity(dim),
            proj_minus: ComplexMatrix::zeros(dim, dim),
        }
    }

    /// Lifts the observable onto a tensor-product space: `Left` produces
    /// A ⊗ I, `Right` produces I ⊗ A. Projectors are lifted identically.
    pub fn lift(&self, site: Site, other_dim: usize) -> Self {
        let id = ComplexMatrix::identity(other_dim);
        let lift_one = |m: &ComplexMatrix| match site {
            Site::Left => m.tensor_product(&id),
            Site::Right => id.tensor_product(m),
        };
        let label = match site {
            Site::Left => format!("{}⊗I", self.label),
            Site::Right => format!("I⊗{}", self.label),
        };
        Self {
            label,
            operator: lift_one(&self.operator),
            proj_plus: lift_one(&self.proj_plus),
            proj_minus: lift_one(&self.proj_minus),
        }
    }

    /// Seeded random observable A = U D U†, where D carries the signature's
    /// +1/−1 multiplicities and U = exp(iH) for a random Hermitian H with
    /// independent standard normal real and imaginary parts. Deterministic
    /// for identical `(seed, dim, sig)`.
    pub fn random(seed: u64, dim: usize, sig: Signature) -> Result<Self> {
        if sig.dim() != dim {
            return Err(Error::Signature(format!(
                "signature ({}, {}) sums to {}, expected dim {dim}",
                sig.plus_multiplicity,
                sig.minus_multiplicity,
                sig.dim()
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        });
        let h = (&g + &g.adjoint()).scale(0.5);
        let u = h.unitary_from_generator()?;
        Ok(Self::from_unitary_columns(
            &u,
            sig,
            format!("random({seed})"),
        ))
    }

    /// Assembles U D U† from the columns of a unitary: the first
    /// `plus_multiplicity` columns span the +1 eigenspace.
    pub(crate) fn from_unitary_columns(u: &ComplexMatrix, sig: Signature, label: String) -> Self {
        let plus_cols: Vec<usize> = (0..sig.plus_multiplicity).collect();
        let minus_cols: Vec<usize> = (sig.plus_multiplicity..sig.dim()).collect();
        let proj_plus = projector_from_columns(u, &plus_cols);
        let proj_minus = projector_from_columns(u, &minus_cols);
        let operator = &proj_plus - &proj_minus;
        Self {
            label,
            operator,
            proj_plus,
            proj_minus,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.operator.rows()
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    pub fn projector(&self, outcome: Sign) -> &ComplexMatrix {
        match outcome {
            Sign::Plus => &self.proj_plus,
            Sign::Minus => &self.proj_minus,
        }
    }

    pub fn proj_plus(&self) -> &ComplexMatrix {
        &self.proj_plus
    }

    pub fn proj_minus(&self) -> &ComplexMatrix {
        &self.proj_minus
    }

    /// Checks the structural invariants: A = P₊ − P₋, P₊ + P₋ = I, both
    /// projectors Hermitian idempotent, P₊P₋ = 0 and A² = I, all within
    /// [`OBSERVABLE_TOL`] in the Frobenius norm.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let id = ComplexMatrix::identity(dim);
        let checks: [(&str, f64); 6] = [
            (
                "A − (P₊ − P₋)",
                (&self.operator - &(&self.proj_plus - &self.proj_minus)).frobenius_norm(),
            ),
            (
                "P₊ + P₋ − I",
                (&(&self.proj_plus + &self.proj_minus) - &id).frobenius_norm(),
            ),
            (
                "P₊² − P₊",
                (&self.proj_plus.matmul(&self.proj_plus)? - &self.proj_plus).frobenius_norm(),
            ),
            (
                "P₋² − P₋",
                (&self.proj_minus.matmul(&self.proj_minus)? - &self.proj_minus).frobenius_norm(),
            ),
            (
                "P₊P₋",
                self.proj_plus.matmul(&self.proj_minus)?.frobenius_norm(),
            ),
            (
                "A² − I",
                (&self.operator.matmul(&self.operator)? - &id).frobenius_norm(),
            ),
        ];
        for (what, deviation) in checks {
            if deviation > OBSERVABLE_TOL {
                return Err(Error::InternalConsistency(format!(
                    "observable '{}' violates {what}: {deviation:.3e}",
                    self.label
                )));
            }
        }
        if self.proj_plus.hermiticity_deviation() > OBSERVABLE_TOL
            || self.proj_minus.hermiticity_deviation() > OBSERVABLE_TOL
        {
            return Err(Error::InternalConsistency(format!(
                "observable '{}' has a non-Hermitian projector",
                self.label
            )));
        }
        Ok(())
    }
}
