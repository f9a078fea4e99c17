//! Small dense helpers shared by the modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Relative scale for structural predicates.
pub const STRUCTURAL_RTOL: f64 = 1e-10;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

/// Default tolerance for structural checks: `1e-10 × max |entry|`.
pub fn default_tol(m: &DMatrix<f64>) -> f64 {
    STRUCTURAL_RTOL * max_abs(m)
}

pub fn default_tol_c(m: &DMatrix<Complex64>) -> f64 {
    STRUCTURAL_RTOL * max_abs_c(m)
}

pub fn symmetry_residual(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn hermitian_residual(m: &DMatrix<Complex64>) -> f64 {
    max_abs_c(&(m - m.adjoint()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn complex_from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

pub fn re_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn im_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.im)
}

/// `tr(A·B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn trace_of_product_c(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Row-major nested vectors, the layout used by every JSON schema here.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
