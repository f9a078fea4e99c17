//! Exact Gaussian moments of products of quadratic forms.
//!
//! For `ω ~ N(0, B)` and symmetric `A_j`, write `Q_j = (A_j ω, ω)`. The joint
//! cumulants are `κ(Q_i) = tr(A_i B)`, `κ(Q_i, Q_j) = 2 tr(A_i B A_j B)` and
//! `κ(Q_1, Q_2, Q_3) = 8 tr(A_1 B A_2 B A_3 B)`; moments follow by summing
//! cumulant products over set partitions (Isserlis).

use nalgebra::DMatrix;

use crate::linalg::trace_of_product;
use crate::{Error, Result};

/// Highest number of quadratic factors with a closed form here.
pub const MAX_FACTORS: usize = 3;

/// `E[Π_j (A_j ω, ω)]` for `ω ~ N(0, B)`, up to three factors.
pub fn quadratic_product_moment(factors: &[&DMatrix<f64>], cov: &DMatrix<f64>) -> Result<f64> {
    match factors {
        [] => Ok(1.0),
        [a] => Ok(trace_of_product(a, cov)),
        [a1, a2] => {
            let ab1 = *a1 * cov;
            let ab2 = *a2 * cov;
            Ok(ab1.trace() * ab2.trace() + 2.0 * trace_of_product(&ab1, &ab2))
        }
        [a1, a2, a3] => {
            let ab1 = *a1 * cov;
            let ab2 = *a2 * cov;
            let ab3 = *a3 * cov;
            let (t1, t2, t3) = (ab1.trace(), ab2.trace(), ab3.trace());
            let c12 = trace_of_product(&ab1, &ab2);
            let c13 = trace_of_product(&ab1, &ab3);
            let c23 = trace_of_product(&ab2, &ab3);
            let c123 = trace_of_product(&(&ab1 * &ab2), &ab3);
            Ok(t1 * t2 * t3 + 2.0 * (t1 * c23 + t2 * c13 + t3 * c12) + 8.0 * c123)
        }
        _ => Err(Error::UnsupportedDegree {
            degree: factors.len(),
        }),
    }
}
