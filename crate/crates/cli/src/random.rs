//! Random operators, states and points drawn from seeded streams.

use nalgebra::{DMatrix, DVector};
use pcsft::correspondence::DensityOperator;
use pcsft::{BlockOperator, Complex64, ComplexVector, PhaseVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Symmetric, commuting with `J`: `[[D, S], [−S, D]]`, `D = Dᵀ`, `S = −Sᵀ`.
pub fn s_commuting_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BlockOperator {
    let x = gaussian_matrix(n, n, rng);
    let y = gaussian_matrix(n, n, rng);
    BlockOperator::s_commuting(&((&x + x.transpose()) * 0.5), &((&y - y.transpose()) * 0.5))
        .expect("square blocks")
}

/// Generic symmetric operator; almost surely does not commute with `J`.
pub fn symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BlockOperator {
    let g = gaussian_matrix(2 * n, 2 * n, rng);
    BlockOperator::from_matrix((&g + g.transpose()) * 0.5).expect("even square matrix")
}

/// Generic positive definite operator: bounded flow, broken `J` symmetry.
pub fn positive_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BlockOperator {
    let dim = 2 * n;
    let m = psd(dim, rng) + DMatrix::identity(dim, dim) * 0.5;
    BlockOperator::from_matrix((&m + m.transpose()) * 0.5).expect("even square matrix")
}

/// Positive semidefinite `dim × dim` matrix with unit-order entries.
pub fn psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(dim, dim, rng);
    &g * g.transpose() / dim as f64
}

pub fn hermitian_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = complex_gaussian_matrix(n, n, rng);
    let p = &g * g.adjoint();
    (&p + p.adjoint()).map(|z| z * 0.5)
}

pub fn density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityOperator {
    let p = hermitian_psd(n, rng);
    let tr = p.trace();
    DensityOperator::new(p / tr).expect("normalized Hermitian PSD")
}

pub fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexVector {
    let z = DVector::from_fn(n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = z.norm();
    ComplexVector::new(z / Complex64::new(norm, 0.0))
}

pub fn point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PhaseVector {
    PhaseVector::from_stacked(DVector::from_fn(2 * n, |_, _| rng.sample(StandardNormal)))
        .expect("even length")
}
