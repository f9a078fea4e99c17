//! The classical → quantum map `T` and the averages it relates.
//!
//! `T(ρ) = B^c / 2h` sends a symplectically invariant Gaussian state of
//! dispersion `2h` to a density operator, and `T(f) = h·f''(0)` sends a
//! variable to a Hermitian observable through `M = D − iS`. For quadratic
//! variables `⟨f⟩_ρ = Tr T(ρ) T(f)` exactly; higher terms contribute
//! `O(h²)` corrections that `T` discards.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::{from_complex_covariance, validate_hermitian_psd, ComplexCovariance, GaussianState};
use crate::linalg::{self, trace_of_product_c};
use crate::phase::to_complex_operator_tol;
use crate::rng::{partition_sizes, SeedStream};
use crate::stats::{least_squares, LineFit, Moments};
use crate::variable::PolynomialVariable;
use crate::wick::{quadratic_product_moment, MAX_FACTORS};
use crate::{Error, Result};

/// Tolerance on `|tr D − 1|` and on `|σ² − 2h| / 2h`.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Errors below this are treated as round-off in slope fits.
pub const ERROR_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    m: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        validate_hermitian_psd(&m)?;
        let trace = m.trace().re;
        if (trace - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::TraceNotOne { trace });
        }
        Ok(Self {
            m: linalg::hermitize(&m),
        })
    }

    /// `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0),
        }
    }

    /// `ψψ†` for a unit vector.
    pub fn pure(psi: &crate::phase::ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(&psi.z * psi.z.adjoint())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumObservable {
    m: DMatrix<Complex64>,
}

impl QuantumObservable {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let residual = linalg::hermitian_residual(&m);
        if residual > linalg::default_tol_c(&m) {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self {
            m: linalg::hermitize(&m),
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }
}

fn check_state_invariant(state: &GaussianState) -> Result<()> {
    let op = state.covariance_operator();
    let residual = op.commutator_with_j_residual();
    if residual > op.default_tol() {
        return Err(Error::NotSCommuting { residual });
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("h must be positive, got {h}")))
    }
}

/// `T(ρ) = B^c / 2h`. The state must be symplectically invariant with
/// dispersion `2h`.
pub fn t_state(state: &GaussianState, h: f64) -> Result<DensityOperator> {
    check_h(h)?;
    check_state_invariant(state)?;
    let sigma2 = state.dispersion();
    if (sigma2 - 2.0 * h).abs() > NORMALIZATION_TOL * 2.0 * h {
        return Err(Error::DispersionMismatch {
            expected: 2.0 * h,
            found: sigma2,
        });
    }
    let bc = state.complex_covariance().bc / Complex64::new(2.0 * h, 0.0);
    DensityOperator::new(bc)
}

/// `T(ρ)` without the dispersion constraint, for states with
/// `σ² = 2h + o(h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearDensity {
    pub operator: DMatrix<Complex64>,
    /// `tr T(ρ) − 1 = σ²/2h − 1`.
    pub trace_defect: f64,
}

pub fn t_state_tolerant(state: &GaussianState, h: f64) -> Result<NearDensity> {
    check_h(h)?;
    check_state_invariant(state)?;
    let operator = state.complex_covariance().bc / Complex64::new(2.0 * h, 0.0);
    let trace_defect = operator.trace().re - 1.0;
    Ok(NearDensity {
        operator,
        trace_defect,
    })
}

/// `T⁻¹(D)`: the invariant state with complex covariance `2h·D`.
pub fn t_state_inverse(density: &DensityOperator, h: f64) -> Result<GaussianState> {
    check_h(h)?;
    from_complex_covariance(&ComplexCovariance {
        bc: density.matrix() * Complex64::new(2.0 * h, 0.0),
    })
}

/// `T(f) = h·f''(0)` in the complex picture.
pub fn t_variable(f: &PolynomialVariable, h: f64) -> Result<QuantumObservable> {
    check_h(h)?;
    let hess = f.second_derivative_at_zero();
    // The Hessian is a sum of validated factors; allow for accumulated round-off.
    let tol = 1e-10 * linalg::max_abs(hess.matrix()).max(f64::MIN_POSITIVE);
    let m = to_complex_operator_tol(&hess, tol)?;
    QuantumObservable::new(m.m * Complex64::new(h, 0.0))
}

/// `Re tr(D·M)`.
pub fn quantum_average(density: &DensityOperator, observable: &QuantumObservable) -> Result<f64> {
    if density.n() != observable.n() {
        return Err(Error::DimensionMismatch {
            expected: density.n(),
            found: observable.n(),
        });
    }
    Ok(trace_of_product_c(density.matrix(), observable.matrix()).re)
}

/// `∫ f dρ` by closed-form Gaussian moments (terms of up to three factors).
pub fn classical_average_exact(f: &PolynomialVariable, state: &GaussianState) -> Result<f64> {
    if f.n() != state.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            found: state.n(),
        });
    }
    let cov = state.covariance();
    let mut total = 0.0;
    for term in f.terms() {
        if term.degree() > MAX_FACTORS {
            return Err(Error::UnsupportedDegree {
                degree: term.degree(),
            });
        }
        let mats: Vec<&DMatrix<f64>> = term.factors.iter().map(|a| a.matrix()).collect();
        let moment = quadratic_product_moment(&mats, cov)?;
        total += term.coeff * moment * 0.5f64.powi(term.degree() as i32);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Sample mean and standard error of `f` over `samples` draws from `state`.
pub fn classical_average_mc(
    f: &PolynomialVariable,
    state: &GaussianState,
    samples: usize,
    seed: u64,
    partitions: usize,
) -> Result<McEstimate> {
    classical_average_mc_mapped(f, state, 1.0, samples, seed, partitions)
}

/// Averages `f(c·ω′)` for `ω′` drawn from `state`. With `state = ρ_B` scaled
/// by `1/2h` and `c = √(2h)` this is the rescaled form of `⟨f⟩_{ρ_B}`.
pub fn classical_average_mc_mapped(
    f: &PolynomialVariable,
    state: &GaussianState,
    c: f64,
    samples: usize,
    seed: u64,
    partitions: usize,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 2 samples, got {samples}"
        )));
    }
    if f.n() != state.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            found: state.n(),
        });
    }
    if f.terms().is_empty() {
        return Ok(McEstimate {
            estimate: 0.0,
            stderr: 0.0,
            samples,
        });
    }
    let stream = SeedStream::new(seed);
    let parts: Vec<Result<Moments>> = partition_sizes(samples, partitions)
        .into_par_iter()
        .enumerate()
        .map(|(k, count)| {
            let mut rng = stream.substream(k as u64);
            let mut m = Moments::default();
            for _ in 0..count {
                let w = state.sample(&mut rng);
                m.push(f.eval(&w.scale(c))?);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(McEstimate {
        estimate: total.mean(),
        stderr: total.stderr(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub h: f64,
    pub classical: f64,
    pub quantum: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Least-squares fit of `log error` against `log h`, when at least three
    /// errors sit above [`ERROR_FLOOR`].
    pub fit: Option<LineFit>,
    /// Every error is at round-off level: the averages agree exactly.
    pub exact: bool,
}

/// Compares `⟨f⟩_{ρ_h}` with `h·tr(D₀ f''(0))` over a grid of `h`, where
/// `ρ_h = T⁻¹(D₀)` at scale `h`.
pub fn h_scaling_study(
    f: &PolynomialVariable,
    d0: &DensityOperator,
    h_values: &[f64],
) -> Result<ScalingStudy> {
    if h_values.is_empty() {
        return Err(Error::InvalidArgument("empty h grid".into()));
    }
    if h_values.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidArgument("h values must be positive".into()));
    }
    if h_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "h values must be strictly descending".into(),
        ));
    }
    let rows = h_values
        .iter()
        .map(|&h| {
            let state = t_state_inverse(d0, h)?;
            let classical = classical_average_exact(f, &state)?;
            let quantum = quantum_average(d0, &t_variable(f, h)?)?;
            Ok(ScalingRow {
                h,
                classical,
                quantum,
                abs_error: (classical - quantum).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let above: Vec<&ScalingRow> = rows.iter().filter(|r| r.abs_error > ERROR_FLOOR).collect();
    let exact = above.is_empty();
    let fit = if above.len() >= 3 {
        let x: Vec<f64> = above.iter().map(|r| r.h.ln()).collect();
        let y: Vec<f64> = above.iter().map(|r| r.abs_error.ln()).collect();
        least_squares(&x, &y)
    } else {
        None
    };
    Ok(ScalingStudy { rows, fit, exact })
}
