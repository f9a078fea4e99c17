//! Linear Hamiltonian flows and their liftings.
//!
//! A symmetric generator `H` defines `ℋ(ω) = (1/2h)(Hω, ω)` and the flow
//! `U_t = exp(JHt/h)`. The flow acts on points (`ω ↦ U_t ω`), on quadratic
//! variables by pullback (`A ↦ U_tᵀ A U_t`) and on Gaussian measures by
//! pushforward (`B ↦ U_t B U_tᵀ`). For generators commuting with `J` the
//! complex pictures of the three are the Schrödinger, Heisenberg and von
//! Neumann evolutions with `M = D − iS`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::expm::expm;
use crate::gaussian::{GaussianState, MatrixEstimate, MatrixMoments};
use crate::linalg::{self, complex_from_parts, re_part, im_part};
use crate::phase::{j_matrix, symplectic_form, BlockOperator, ComplexOperator, PhaseVector};
use crate::rng::{partition_sizes, SeedStream};
use crate::stats::Moments;
use crate::variable::PolynomialVariable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOperator {
    u: DMatrix<f64>,
    t: f64,
    h: f64,
    generator: BlockOperator,
}

fn check_scale(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("h must be positive, got {h}")))
    }
}

fn check_generator(generator: &BlockOperator) -> Result<()> {
    let residual = generator.symmetry_residual();
    if residual > generator.default_tol() {
        return Err(Error::NotSymmetric { residual });
    }
    Ok(())
}

/// `exp(JHt/h)` for symmetric `H`. Pass `h = 1` for the unscaled flow.
pub fn make_flow(generator: &BlockOperator, t: f64, h: f64) -> Result<FlowOperator> {
    check_generator(generator)?;
    check_scale(h)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite, got {t}")));
    }
    let u = expm(&(j_matrix(generator.n()) * generator.matrix() * (t / h)));
    Ok(FlowOperator {
        u,
        t,
        h,
        generator: generator.clone(),
    })
}

impl FlowOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            u: DMatrix::identity(2 * n, 2 * n),
            t: 0.0,
            h: 1.0,
            generator: BlockOperator::zeros(n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn scale(&self) -> f64 {
        self.h
    }

    pub fn generator(&self) -> &BlockOperator {
        &self.generator
    }

    pub fn n(&self) -> usize {
        self.u.nrows() / 2
    }

    /// `U_t⁻¹ = exp(−JHt/h)`, computed as a separate exponential.
    pub fn inverse(&self) -> FlowOperator {
        make_flow(&self.generator, -self.t, self.h).expect("generator already validated")
    }

    /// `max |UᵀU − I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.u.nrows(), self.u.nrows());
        linalg::max_abs(&(self.u.transpose() * &self.u - id))
    }

    pub fn as_block(&self) -> BlockOperator {
        BlockOperator::from_matrix(self.u.clone()).expect("even square matrix")
    }
}

pub fn evolve_point(flow: &FlowOperator, omega: &PhaseVector) -> Result<PhaseVector> {
    if flow.n() != omega.n() {
        return Err(Error::DimensionMismatch {
            expected: flow.n(),
            found: omega.n(),
        });
    }
    PhaseVector::from_stacked(&flow.u * omega.as_vector())
}

/// `exp(−iMt/h)` for Hermitian `M`, through the spectral decomposition.
pub fn complex_flow(m: &ComplexOperator, t: f64, h: f64) -> Result<DMatrix<Complex64>> {
    check_scale(h)?;
    let residual = m.hermitian_residual();
    if residual > linalg::default_tol_c(&m.m) {
        return Err(Error::NotHermitian { residual });
    }
    let eig = SymmetricEigen::new(linalg::hermitize(&m.m));
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t / h)));
    Ok(v * phases * v.adjoint())
}

/// Pullback of `f_A` along the flow: `A_t = Uᵀ A U`.
pub fn heisenberg_lift(a: &BlockOperator, flow: &FlowOperator) -> Result<BlockOperator> {
    if a.n() != flow.n() {
        return Err(Error::DimensionMismatch {
            expected: flow.n(),
            found: a.n(),
        });
    }
    let at = flow.u.transpose() * a.matrix() * &flow.u;
    BlockOperator::from_matrix(linalg::symmetrize(&at))
}

/// Complex Heisenberg picture `e^{itM_H/h} M_A e^{−itM_H/h}`.
pub fn heisenberg_lift_complex(
    observable: &ComplexOperator,
    hamiltonian: &ComplexOperator,
    t: f64,
    h: f64,
) -> Result<ComplexOperator> {
    let u = complex_flow(hamiltonian, t, h)?;
    Ok(ComplexOperator::new(u.adjoint() * &observable.m * u))
}

/// Pushforward of `ρ` along the flow: covariance `U B Uᵀ`.
pub fn vonneumann_lift(state: &GaussianState, flow: &FlowOperator) -> Result<GaussianState> {
    if state.n() != flow.n() {
        return Err(Error::DimensionMismatch {
            expected: flow.n(),
            found: state.n(),
        });
    }
    GaussianState::new(&flow.u * state.covariance() * flow.u.transpose())
}

/// Complex von Neumann picture `e^{−iM_H t/h} B^c e^{iM_H t/h}`.
pub fn vonneumann_lift_complex(
    bc: &DMatrix<Complex64>,
    hamiltonian: &ComplexOperator,
    t: f64,
    h: f64,
) -> Result<DMatrix<Complex64>> {
    let u = complex_flow(hamiltonian, t, h)?;
    Ok(&u * bc * u.adjoint())
}

/// Right-hand side of the pulled-back operator equation,
/// `dA_t/dt = (1/h)(A_t JH − HJ A_t)`, valid for any symmetric `H`.
pub fn heisenberg_rhs(a: &DMatrix<f64>, generator: &BlockOperator, h: f64) -> DMatrix<f64> {
    let j = j_matrix(generator.n());
    let hm = generator.matrix();
    (a * &j * hm - hm * &j * a) / h
}

/// Right-hand side of the covariance equation,
/// `dB_t/dt = (1/h)(JH B_t − B_t HJ)`, valid for any symmetric `H`.
pub fn vonneumann_rhs(b: &DMatrix<f64>, generator: &BlockOperator, h: f64) -> DMatrix<f64> {
    let j = j_matrix(generator.n());
    let hm = generator.matrix();
    (&j * hm * b - b * hm * &j) / h
}

/// `{f, g}(ω) = w(∇f(ω), ∇g(ω))`.
pub fn poisson_bracket(
    f: &PolynomialVariable,
    g: &PolynomialVariable,
    omega: &PhaseVector,
) -> Result<f64> {
    symplectic_form(&f.gradient(omega)?, &g.gradient(omega)?)
}

/// `{f, ℋ}(ω)` for `ℋ(ω) = (1/2h)(Hω, ω)` with any symmetric `H`; the
/// generator of the Liouville evolution `f ↦ f ∘ U_t`.
pub fn bracket_with_hamiltonian(
    f: &PolynomialVariable,
    generator: &BlockOperator,
    h: f64,
    omega: &PhaseVector,
) -> Result<f64> {
    let grad_h = PhaseVector::from_stacked(generator.matrix() * omega.as_vector() / h)?;
    symplectic_form(&f.gradient(omega)?, &grad_h)
}

/// Fundamental matrix of `ω̇ = (JH/h) ω` by classical fourth-order
/// Runge–Kutta. Independent of [`make_flow`]; used to cross-check it.
pub fn rk4_fundamental_matrix(
    generator: &BlockOperator,
    t: f64,
    h: f64,
    steps: usize,
) -> DMatrix<f64> {
    let a = j_matrix(generator.n()) * generator.matrix() / h;
    let dim = a.nrows();
    let dt = t / steps.max(1) as f64;
    let mut y = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..steps.max(1) {
        let k1 = &a * &y;
        let k2 = &a * (&y + &k1 * (dt / 2.0));
        let k3 = &a * (&y + &k2 * (dt / 2.0));
        let k4 = &a * (&y + &k3 * dt);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    y
}

/// Empirical complex covariance of an evolved random field.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub time: f64,
    /// `(1/N) Σ z_t z_t†`.
    pub mean: DMatrix<Complex64>,
    /// Standard errors of the real and imaginary parts, packed as `re + i·im`.
    pub stderr: DMatrix<Complex64>,
    pub dispersion: f64,
    pub dispersion_stderr: f64,
    pub samples: usize,
}

impl EnsembleEstimate {
    /// Largest entrywise `|mean − exact| / stderr` over real and imaginary parts.
    pub fn max_z_score(&self, exact: &DMatrix<Complex64>) -> f64 {
        let re = MatrixEstimate {
            mean: re_part(&self.mean),
            stderr: re_part(&self.stderr),
            samples: self.samples,
        };
        let im = MatrixEstimate {
            mean: im_part(&self.mean),
            stderr: im_part(&self.stderr),
            samples: self.samples,
        };
        let zr = re.z_scores(&re_part(exact)).camax();
        let zi = im.z_scores(&im_part(exact)).camax();
        zr.max(zi)
    }
}

/// Samples fields from `ρ0`, evolves each by `exp(−iMt/h)` at every time in
/// `times` and returns the empirical complex covariance per time. The same
/// initial fields are reused across times.
///
/// Samples are split over `partitions` ChaCha streams of `seed`; partial sums
/// are reduced in partition order, so the result depends only on the seed
/// and the partition count.
pub fn ensemble_evolve_times(
    initial: &GaussianState,
    hamiltonian: &ComplexOperator,
    times: &[f64],
    h: f64,
    samples: usize,
    seed: u64,
    partitions: usize,
) -> Result<Vec<EnsembleEstimate>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "ensemble needs at least 2 samples, got {samples}"
        )));
    }
    if hamiltonian.n() != initial.n() {
        return Err(Error::DimensionMismatch {
            expected: initial.n(),
            found: hamiltonian.n(),
        });
    }
    let flows = times
        .iter()
        .map(|&t| complex_flow(hamiltonian, t, h))
        .collect::<Result<Vec<_>>>()?;
    let n = initial.n();
    let stream = SeedStream::new(seed);

    type Acc = Vec<(MatrixMoments, MatrixMoments, Moments)>;
    let fresh = || -> Acc {
        (0..flows.len())
            .map(|_| (MatrixMoments::zeros(n, n), MatrixMoments::zeros(n, n), Moments::default()))
            .collect()
    };
    let parts: Vec<Acc> = partition_sizes(samples, partitions)
        .into_par_iter()
        .enumerate()
        .map(|(k, count)| {
            let mut rng = stream.substream(k as u64);
            let mut acc = fresh();
            for _ in 0..count {
                let z0 = initial.sample(&mut rng).complexify().z;
                for (u, (re, im, disp)) in flows.iter().zip(acc.iter_mut()) {
                    let z = u * &z0;
                    let outer = &z * z.adjoint();
                    re.push(&re_part(&outer));
                    im.push(&im_part(&outer));
                    disp.push(z.norm_squared());
                }
            }
            acc
        })
        .collect();

    let mut total = fresh();
    for part in &parts {
        for ((re, im, d), (pre, pim, pd)) in total.iter_mut().zip(part) {
            re.merge(pre);
            im.merge(pim);
            d.merge(pd);
        }
    }
    Ok(total
        .into_iter()
        .zip(times)
        .map(|((re, im, d), &t)| {
            let re = re.finish();
            let im = im.finish();
            EnsembleEstimate {
                time: t,
                mean: complex_from_parts(&re.mean, &im.mean),
                stderr: complex_from_parts(&re.stderr, &im.stderr),
                dispersion: d.mean(),
                dispersion_stderr: d.stderr(),
                samples: d.count,
            }
        })
        .collect())
}

/// Single-time form of [`ensemble_evolve_times`].
pub fn ensemble_evolve(
    initial: &GaussianState,
    hamiltonian: &ComplexOperator,
    t: f64,
    h: f64,
    samples: usize,
    seed: u64,
    partitions: usize,
) -> Result<EnsembleEstimate> {
    let mut out =
        ensemble_evolve_times(initial, hamiltonian, &[t], h, samples, seed, partitions)?;
    Ok(out.remove(0))
}
