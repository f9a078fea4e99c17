//! Real phase space `Ω = Q × P` and its complex picture `Ω = Q ⊕ iP`.
//!
//! A point is stored as one vector of length `2n` with the `q` block first.
//! Operators are `2n × 2n` matrices read in `n × n` blocks
//!
//! ```text
//! A = | A11  A12 |      A11: Q → Q, A12: P → Q
//!     | A21  A22 |      A21: Q → P, A22: P → P
//! ```
//!
//! Complexification sends `ω = (q, p)` to `z = q + ip`. Under it the
//! symplectic operator `J(q, p) = (p, −q)` acts as multiplication by `−i`,
//! and an operator commuting with `J`, with blocks `[[D, S], [−S, D]]`,
//! becomes the complex matrix `D − iS`.

use nalgebra::{DMatrix, DVector, DVectorView};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, complex_from_parts, default_tol, im_part, re_part};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseVectorRepr", into = "PhaseVectorRepr")]
pub struct PhaseVector {
    data: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct PhaseVectorRepr {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl TryFrom<PhaseVectorRepr> for PhaseVector {
    type Error = Error;

    fn try_from(r: PhaseVectorRepr) -> Result<Self> {
        PhaseVector::new(&r.q, &r.p)
    }
}

impl From<PhaseVector> for PhaseVectorRepr {
    fn from(v: PhaseVector) -> Self {
        PhaseVectorRepr {
            q: v.q().iter().copied().collect(),
            p: v.p().iter().copied().collect(),
        }
    }
}

impl PhaseVector {
    pub fn new(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: p.len(),
            });
        }
        let n = q.len();
        Ok(Self {
            data: DVector::from_fn(2 * n, |i, _| if i < n { q[i] } else { p[i - n] }),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DVector::zeros(2 * n),
        }
    }

    /// Wraps a stacked `(q, p)` vector.
    pub fn from_stacked(data: DVector<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "phase vector needs even length, got {}",
                data.len()
            )));
        }
        Ok(Self { data })
    }

    /// Number of degrees of freedom (half the real dimension).
    pub fn n(&self) -> usize {
        self.data.len() / 2
    }

    pub fn q(&self) -> DVectorView<'_, f64> {
        self.data.rows(0, self.n())
    }

    pub fn p(&self) -> DVectorView<'_, f64> {
        self.data.rows(self.n(), self.n())
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    /// Real scalar product `(ω1, ω2) = (q1, q2) + (p1, p2)`.
    pub fn dot(&self, other: &PhaseVector) -> Result<f64> {
        check_dim(self.n(), other.n())?;
        Ok(self.data.dot(&other.data))
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn scale(&self, c: f64) -> PhaseVector {
        PhaseVector {
            data: &self.data * c,
        }
    }

    /// `z = q + ip`.
    pub fn complexify(&self) -> ComplexVector {
        let n = self.n();
        ComplexVector {
            z: DVector::from_fn(n, |i, _| Complex64::new(self.data[i], self.data[n + i])),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Complex picture of a phase vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub z: DVector<Complex64>,
}

impl ComplexVector {
    pub fn new(z: DVector<Complex64>) -> Self {
        Self { z }
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        check_dim(re.len(), im.len())?;
        Ok(Self {
            z: DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i])),
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn norm(&self) -> f64 {
        self.z.norm()
    }

    /// Inverse of [`PhaseVector::complexify`].
    pub fn realify(&self) -> PhaseVector {
        let n = self.n();
        PhaseVector {
            data: DVector::from_fn(2 * n, |i, _| {
                if i < n {
                    self.z[i].re
                } else {
                    self.z[i - n].im
                }
            }),
        }
    }
}

/// The symplectic operator `J(q, p) = (p, −q)` on a space with `n` degrees
/// of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticOperator {
    n: usize,
}

impl SymplecticOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, omega: &PhaseVector) -> PhaseVector {
        apply_j(omega)
    }

    /// `[[0, I], [−I, 0]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        j_matrix(self.n)
    }
}

pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

pub fn apply_j(omega: &PhaseVector) -> PhaseVector {
    let n = omega.n();
    let d = &omega.data;
    PhaseVector {
        data: DVector::from_fn(2 * n, |i, _| if i < n { d[n + i] } else { -d[i - n] }),
    }
}

/// `w(ω1, ω2) = (ω1, Jω2) = (p2, q1) − (p1, q2)`.
pub fn symplectic_form(w1: &PhaseVector, w2: &PhaseVector) -> Result<f64> {
    check_dim(w1.n(), w2.n())?;
    Ok(w1.q().dot(&w2.p()) - w1.p().dot(&w2.q()))
}

/// `<ω1, ω2> = (ω1, ω2) − i·w(ω1, ω2)`, linear in the first argument.
pub fn complex_scalar_product(w1: &PhaseVector, w2: &PhaseVector) -> Result<Complex64> {
    Ok(Complex64::new(w1.dot(w2)?, -symplectic_form(w1, w2)?))
}

/// Real linear operator on `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockOperatorRepr", into = "BlockOperatorRepr")]
pub struct BlockOperator {
    m: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct BlockOperatorRepr {
    n: usize,
    blocks: BlocksRepr,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct BlocksRepr {
    A11: Vec<Vec<f64>>,
    A12: Vec<Vec<f64>>,
    A21: Vec<Vec<f64>>,
    A22: Vec<Vec<f64>>,
}

impl TryFrom<BlockOperatorRepr> for BlockOperator {
    type Error = Error;

    fn try_from(r: BlockOperatorRepr) -> Result<Self> {
        let parse = |name: &str, rows: &[Vec<f64>]| -> Result<DMatrix<f64>> {
            let m = linalg::from_rows(rows)
                .map_err(|e| Error::InvalidArgument(format!("block {name}: {e}")))?;
            if m.nrows() != r.n || m.ncols() != r.n {
                return Err(Error::InvalidArgument(format!(
                    "block {name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    r.n,
                    r.n
                )));
            }
            Ok(m)
        };
        let b = &r.blocks;
        BlockOperator::from_blocks(
            &parse("A11", &b.A11)?,
            &parse("A12", &b.A12)?,
            &parse("A21", &b.A21)?,
            &parse("A22", &b.A22)?,
        )
    }
}

impl From<BlockOperator> for BlockOperatorRepr {
    fn from(a: BlockOperator) -> Self {
        BlockOperatorRepr {
            n: a.n(),
            blocks: BlocksRepr {
                A11: linalg::to_rows(&a.a11()),
                A12: linalg::to_rows(&a.a12()),
                A21: linalg::to_rows(&a.a21()),
                A22: linalg::to_rows(&a.a22()),
            },
        }
    }
}

impl BlockOperator {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "block operator needs a square matrix of even size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub fn from_blocks(
        a11: &DMatrix<f64>,
        a12: &DMatrix<f64>,
        a21: &DMatrix<f64>,
        a22: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = a11.nrows();
        for b in [a11, a12, a21, a22] {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.nrows().max(b.ncols()),
                });
            }
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(a11);
        m.view_mut((0, n), (n, n)).copy_from(a12);
        m.view_mut((n, 0), (n, n)).copy_from(a21);
        m.view_mut((n, n), (n, n)).copy_from(a22);
        Ok(Self { m })
    }

    /// The s-commuting operator `[[D, S], [−S, D]]`.
    pub fn s_commuting(d: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        Self::from_blocks(d, s, &(-s), d)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(2 * n, 2 * n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(2 * n, 2 * n),
        }
    }

    /// `k·I`, the harmonic oscillator generator `H(q, p) = k/2 (|q|² + |p|²)`.
    pub fn harmonic(n: usize, k: f64) -> Self {
        Self {
            m: DMatrix::identity(2 * n, 2 * n) * k,
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    fn block(&self, r: usize, c: usize) -> DMatrix<f64> {
        let n = self.n();
        self.m.view((r * n, c * n), (n, n)).into_owned()
    }

    pub fn a11(&self) -> DMatrix<f64> {
        self.block(0, 0)
    }

    pub fn a12(&self) -> DMatrix<f64> {
        self.block(0, 1)
    }

    pub fn a21(&self) -> DMatrix<f64> {
        self.block(1, 0)
    }

    pub fn a22(&self) -> DMatrix<f64> {
        self.block(1, 1)
    }

    pub fn default_tol(&self) -> f64 {
        default_tol(&self.m)
    }

    pub fn transpose(&self) -> BlockOperator {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn apply(&self, omega: &PhaseVector) -> Result<PhaseVector> {
        check_dim(self.n(), omega.n())?;
        Ok(PhaseVector {
            data: &self.m * &omega.data,
        })
    }

    pub fn add(&self, other: &BlockOperator) -> Result<BlockOperator> {
        check_dim(self.n(), other.n())?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn mul(&self, other: &BlockOperator) -> Result<BlockOperator> {
        check_dim(self.n(), other.n())?;
        Ok(Self {
            m: &self.m * &other.m,
        })
    }

    pub fn scale(&self, c: f64) -> BlockOperator {
        Self { m: &self.m * c }
    }

    pub fn symmetry_residual(&self) -> f64 {
        linalg::symmetry_residual(&self.m)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_residual() <= tol
    }

    /// `max |AJ − JA|`.
    pub fn commutator_with_j_residual(&self) -> f64 {
        let j = j_matrix(self.n());
        linalg::max_abs(&(&self.m * &j - &j * &self.m))
    }

    /// Block form of the same test: `max(|A11 − A22|, |A12 + A21|)`.
    pub fn s_commuting_block_residual(&self) -> f64 {
        let diag = linalg::max_abs(&(self.a11() - self.a22()));
        let off = linalg::max_abs(&(self.a12() + self.a21()));
        diag.max(off)
    }

    pub fn is_s_commuting(&self, tol: f64) -> bool {
        is_s_commuting(self, tol)
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> BlockOperator {
        Self {
            m: linalg::symmetrize(&self.m),
        }
    }
}

pub fn is_s_commuting(a: &BlockOperator, tol: f64) -> bool {
    a.commutator_with_j_residual() <= tol
}

/// `f_A(ω) = ½ (Aω, ω)`.
pub fn quadratic_form_eval(a: &BlockOperator, omega: &PhaseVector) -> Result<f64> {
    check_dim(a.n(), omega.n())?;
    Ok(0.5 * omega.data.dot(&(&a.m * &omega.data)))
}

/// Complex `n × n` matrix acting on `ℂⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator {
    pub m: DMatrix<Complex64>,
}

impl ComplexOperator {
    pub fn new(m: DMatrix<Complex64>) -> Self {
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn hermitian_residual(&self) -> f64 {
        linalg::hermitian_residual(&self.m)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    pub fn apply(&self, z: &ComplexVector) -> Result<ComplexVector> {
        check_dim(self.n(), z.n())?;
        Ok(ComplexVector { z: &self.m * &z.z })
    }

    /// Real block form `[[D, S], [−S, D]]` with `D = Re M`, `S = −Im M`.
    pub fn to_block(&self) -> BlockOperator {
        from_complex_operator(self)
    }
}

/// `M = D − iS` for an s-commuting `A = [[D, S], [−S, D]]`.
///
/// Rejects operators that fail the commutation test at `A.default_tol()`.
pub fn to_complex_operator(a: &BlockOperator) -> Result<ComplexOperator> {
    to_complex_operator_tol(a, a.default_tol())
}

pub fn to_complex_operator_tol(a: &BlockOperator, tol: f64) -> Result<ComplexOperator> {
    let residual = a.commutator_with_j_residual();
    if residual > tol {
        return Err(Error::NotSCommuting { residual });
    }
    // Average the two copies of each block so round-off asymmetry does not leak.
    let d = (a.a11() + a.a22()) * 0.5;
    let s = (a.a12() - a.a21()) * 0.5;
    Ok(ComplexOperator {
        m: complex_from_parts(&d, &(-s)),
    })
}

pub fn from_complex_operator(m: &ComplexOperator) -> BlockOperator {
    let d = re_part(&m.m);
    let s = -im_part(&m.m);
    BlockOperator::s_commuting(&d, &s).expect("square complex matrix")
}
