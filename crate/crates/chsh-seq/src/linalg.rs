//! Dense complex matrices, Hermitian eigendecomposition, operator norms,
//! tensor products, and unitaries from Hermitian generators.
//!
//! Everything downstream (observables, measurements, bound analysis) is built
//! on the small value types in this module. Matrices are immutable values;
//! every operation returns a fresh matrix. The Hermitian eigendecomposition is
//! the single numerical kernel: the operator norm and the matrix exponential
//! both reduce to it.
//!
//! Residual checks in this module use the Frobenius norm, which upper-bounds
//! the operator norm, so a Frobenius-norm tolerance is always at least as
//! strict as the same operator-norm tolerance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Complex64 = num_complex::Complex<f64>;

/// Tolerance on ‖M − M†‖ for inputs required to be Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on eigendecomposition residuals and unitarity checks.
pub const EIG_TOL: f64 = 1e-9;

/// Dense complex matrix with row-major semantics and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from nested rows. Fails on ragged input, empty input,
    /// or any non-finite component.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Dimension("matrix must be non-empty".into()));
        }
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged rows in matrix literal".into()));
        }
        let inner = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        let m = Self { inner };
        m.check_finite("matrix literal")?;
        Ok(m)
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            inner: DMatrix::from_fn(rows, cols, f),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), diag.len(), |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    /// Row-major list of entries, used for serialization.
    pub fn entries(&self) -> Vec<Vec<Complex64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    fn check_finite(&self, context: &str) -> Result<()> {
        for v in self.inner.iter() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite {
                    context: context.into(),
                });
            }
        }
        Ok(())
    }

    /// Matrix product. Fails unless `self.cols() == rhs.rows()`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self {
            inner: &self.inner * &rhs.inner,
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    /// Kronecker product, with `self`'s indices outermost: the result acts on
    /// the composite space with `self`'s factor first.
    pub fn tensor_product(&self, rhs: &Self) -> Self {
        Self {
            inner: self.inner.kronecker(&rhs.inner),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            inner: &self.inner * Complex64::new(factor, 0.0),
        }
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖M − M†‖ in the Frobenius norm; zero for exactly Hermitian input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self - &self.adjoint()).frobenius_norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols() != v.len() {
            return Err(Error::Dimension(format!(
                "cannot apply {}×{} matrix to vector of length {}",
                self.rows(),
                self.cols(),
                v.len()
            )));
        }
        Ok((0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    /// ⟨ψ|M|ψ⟩ for a square matrix and a matching vector.
    pub fn expectation(&self, psi: &[Complex64]) -> Result<Complex64> {
        let mv = self.mul_vec(psi)?;
        Ok(inner_product(psi, &mv))
    }

    /// Hermitian eigendecomposition with eigenvalues sorted ascending.
    ///
    /// The input is symmetrized as (M + M†)/2 before solving, so tiny
    /// representable asymmetry cannot leak into the result; input farther than
    /// [`HERMITICITY_TOL`] from Hermitian is rejected. The decomposition is
    /// deterministic for identical input.
    pub fn hermitian_eig(&self) -> Result<HermitianEigensystem> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "eigendecomposition requires a square matrix, got {}×{}",
                self.rows(),
                self.cols()
            )));
        }
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITICITY_TOL {
            return Err(Error::Hermiticity {
                deviation,
                tol: HERMITICITY_TOL,
            });
        }
        let herm = (&self.inner + self.inner.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;

        // Sort ascending; stable so degenerate clusters keep the solver's
        // deterministic internal order.
        let dim = self.rows();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = Self::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);

        let system = HermitianEigensystem {
            eigenvalues,
            eigenvectors,
        };
        let residual = system.reconstruction_residual(&Self { inner: herm });
        if residual > EIG_TOL || system.orthonormality_deviation() > EIG_TOL {
            return Err(Error::Numerical(format!(
                "eigendecomposition residual {residual:.3e} exceeds tolerance {EIG_TOL:.1e}"
            )));
        }
        Ok(system)
    }

    /// Largest singular value. For Hermitian input this is max |λ|, computed
    /// directly from the spectrum; otherwise it is obtained from λ_max(M†M).
    pub fn operator_norm(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "operator norm requires a square matrix, got {}×{}",
                self.rows(),
                self.cols()
            )));
        }
        if self.is_hermitian(HERMITICITY_TOL) {
            let eig = self.hermitian_eig()?;
            Ok(eig
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, &l| acc.max(l.abs())))
        } else {
            let gram = self.adjoint().matmul(self)?;
            let eig = gram.hermitian_eig()?;
            let lam_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
            Ok(lam_max.max(0.0).sqrt())
        }
    }

    /// U = exp(iH) for a Hermitian generator H, via the eigendecomposition
    /// of H. The result is checked unitary to within [`EIG_TOL`].
    pub fn unitary_from_generator(&self) -> Result<Self> {
        let eig = self.hermitian_eig()?;
        let dim = self.rows();
        let phases: Vec<Complex64> = eig
            .eigenvalues
            .iter()
            .map(|&l| Complex64::new(0.0, l).exp())
            .collect();
        let v = &eig.eigenvectors;
        // U = V diag(e^{iλ}) V†
        let u = Self::from_fn(dim, dim, |i, j| {
            (0..dim)
                .map(|k| v.get(i, k) * phases[k] * v.get(j, k).conj())
                .sum()
        });
        let unitarity = (&u.adjoint().matmul(&u)? - &Self::identity(dim)).frobenius_norm();
        if unitarity > EIG_TOL {
            return Err(Error::Numerical(format!(
                "matrix exponential lost unitarity: ‖U†U − I‖ = {unitarity:.3e}"
            )));
        }
        Ok(u)
    }
}

impl std::ops::Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl std::ops::Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl std::ops::Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix {
            inner: -&self.inner,
        }
    }
}

/// ⟨u|v⟩ with the left argument conjugated.
pub fn inner_product(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Σ_k |v_k⟩⟨v_k| over the selected eigenvector columns.
pub fn projector_from_columns(eigenvectors: &ComplexMatrix, columns: &[usize]) -> ComplexMatrix {
    let dim = eigenvectors.rows();
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        columns
            .iter()
            .map(|&k| eigenvectors.get(i, k) * eigenvectors.get(j, k).conj())
            .sum()
    })
}

/// Eigenvalues (ascending) and orthonormal eigenvector columns of a
/// Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigensystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` of the eigenvector matrix as a vector.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.eigenvectors.rows())
            .map(|i| self.eigenvectors.get(i, k))
            .collect()
    }

    /// ‖M − V diag(λ) V†‖ in the Frobenius norm.
    pub fn reconstruction_residual(&self, m: &ComplexMatrix) -> f64 {
        let dim = self.dim();
        let rec = ComplexMatrix::from_fn(dim, dim, |i, j| {
            (0..dim)
                .map(|k| {
                    self.eigenvectors.get(i, k)
                        * self.eigenvectors.get(j, k).conj()
                        * Complex64::new(self.eigenvalues[k], 0.0)
                })
                .sum()
        });
        (m - &rec).frobenius_norm()
    }

    /// ‖V†V − I‖ in the Frobenius norm.
    pub fn orthonormality_deviation(&self) -> f64 {
        let v = &self.eigenvectors;
        let gram = v.adjoint().matmul(v).expect("square by construction");
        (&gram - &ComplexMatrix::identity(self.dim())).frobenius_norm()
    }
}

/// Pauli matrices and friends, used pervasively in tests and scenario files.
pub mod matrices {
    use super::{Complex64, ComplexMatrix};

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn pauli_y() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => Complex64::ZERO,
        })
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
    }
}
