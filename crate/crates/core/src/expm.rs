//! Real matrix exponential by scaling and squaring with diagonal Padé
//! approximants (Higham, "The scaling and squaring method for the matrix
//! exponential revisited", SIAM J. Matrix Anal. Appl. 26, 2005).
//!
//! For each degree `m` the 1-norm threshold `θ_m` is the largest value for
//! which the backward error of the `[m/m]` approximant, in exact arithmetic,
//! stays below the unit roundoff `u = 2⁻⁵³`. The matrix is scaled by `2⁻ˢ`
//! until its norm is below `θ_13`, so the computed `exp(A)` is the exact
//! exponential of `A + ΔA` with `‖ΔA‖₁ ≤ u ‖A‖₁` up to rounding in the
//! evaluation itself.

use nalgebra::DMatrix;

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Backward error bound certified by the degree/scaling selection.
pub const BACKWARD_ERROR_BOUND: f64 = f64::EPSILON / 2.0;

#[derive(Debug, Clone)]
pub struct Expm {
    pub value: DMatrix<f64>,
    /// Degree of the Padé approximant.
    pub degree: usize,
    /// Number of squarings `s`; the approximant was applied to `A / 2ˢ`.
    pub squarings: u32,
}

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm_with_info(a).value
}

pub fn expm_with_info(a: &DMatrix<f64>) -> Expm {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return Expm {
            value: DMatrix::zeros(0, 0),
            degree: 0,
            squarings: 0,
        };
    }
    let nrm = norm1(a);
    let ident = DMatrix::<f64>::identity(n, n);

    for &(m, theta) in &THETA[..4] {
        if nrm <= theta {
            let a2 = a * a;
            let (u, v) = match m {
                3 => low_degree(a, &a2, &ident, &B3),
                5 => low_degree(a, &a2, &ident, &B5),
                7 => low_degree(a, &a2, &ident, &B7),
                _ => low_degree(a, &a2, &ident, &B9),
            };
            return Expm {
                value: solve_pade(&u, &v),
                degree: m,
                squarings: 0,
            };
        }
    }

    let theta13 = THETA[4].1;
    let s = if nrm > theta13 {
        (nrm / theta13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-(s as i32));
    let (u, v) = degree13(&scaled, &ident);
    let mut x = solve_pade(&u, &v);
    for _ in 0..s {
        x = &x * &x;
    }
    Expm {
        value: x,
        degree: 13,
        squarings: s,
    }
}

/// Odd and even parts of the `[m/m]` numerator for `m ≤ 9`.
fn low_degree(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ident: &DMatrix<f64>,
    b: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = b.len() - 1;
    let mut u = ident * b[1];
    let mut v = ident * b[0];
    let mut pow = ident.clone();
    for k in 1..=m / 2 {
        pow = &pow * a2;
        u += &pow * b[2 * k + 1];
        v += &pow * b[2 * k];
    }
    (a * u, v)
}

fn degree13(a: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

/// `(V − U)⁻¹ (V + U)`.
fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for norms below theta_13")
}
