//! Zero-mean Gaussian measures on phase space.
//!
//! A state is fixed by its real covariance `B = cov ρ`,
//! `(B y1, y2) = ∫ (y1, ω)(y2, ω) dρ(ω)`. The complex covariance
//! `(B^c y1, y2)_ℂ = ∫ <y1, ω><ω, y2> dρ(ω)` equals `E[z z†]` for `z = q + ip`
//! and has blocks `D = B11 + B22`, `S = B12 − B21`, `B^c = D − iS`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, complex_from_parts, im_part, re_part, STRUCTURAL_RTOL};
use crate::phase::{is_s_commuting, j_matrix, BlockOperator, ComplexVector, PhaseVector};
use crate::rng::{partition_sizes, SeedStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cov: DMatrix<f64>,
    /// `L` with `L Lᵀ = B`, from the clamped eigendecomposition.
    factor: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from a real covariance. The matrix must be symmetric
    /// and positive semidefinite up to `1e-10 × max |B_ij|`; eigenvalues in
    /// `[−tol, 0)` are clamped to zero.
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let tol = STRUCTURAL_RTOL * linalg::max_abs(&cov);
        Self::with_tolerance(cov, tol)
    }

    pub fn with_tolerance(cov: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !cov.is_square() || !cov.nrows().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "covariance must be square with even size, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let residual = linalg::symmetry_residual(&cov);
        if residual > tol {
            return Err(Error::NotSymmetric { residual });
        }
        let cov = linalg::symmetrize(&cov);
        let factor = psd_factor(&cov, tol)?;
        Ok(Self { cov, factor })
    }

    /// `h·I` on a space with `n` degrees of freedom.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self> {
        Self::new(DMatrix::identity(2 * n, 2 * n) * variance)
    }

    pub fn n(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn covariance_operator(&self) -> BlockOperator {
        BlockOperator::from_matrix(self.cov.clone()).expect("even square covariance")
    }

    /// `σ²(ρ) = E‖ω‖² = tr B`.
    pub fn dispersion(&self) -> f64 {
        self.cov.trace()
    }

    /// Draws `ω ~ N(0, B)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseVector {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        PhaseVector::from_stacked(&self.factor * z).expect("even dimension")
    }

    /// `B^c = D − iS` with `D = B11 + B22`, `S = B12 − B21`.
    pub fn complex_covariance(&self) -> ComplexCovariance {
        let n = self.n();
        let b = &self.cov;
        let b11 = b.view((0, 0), (n, n));
        let b12 = b.view((0, n), (n, n));
        let b21 = b.view((n, 0), (n, n));
        let b22 = b.view((n, n), (n, n));
        let d = b11 + b22;
        let s = b12 - b21;
        ComplexCovariance {
            bc: complex_from_parts(&d, &(-s)),
        }
    }

    pub fn is_symplectically_invariant(&self, tol: f64) -> bool {
        is_s_commuting(&self.covariance_operator(), tol)
    }

    /// Covariance of the pushforward under `J`: `J B Jᵀ`.
    pub fn pushforward_j(&self) -> DMatrix<f64> {
        let j = j_matrix(self.n());
        &j * &self.cov * j.transpose()
    }

    /// Covariance `c·B`, reusing the factor scaled by `√c` so that samples
    /// drawn with the same stream are the samples of `self` times `√c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be finite and non-negative, got {c}"
            )));
        }
        Ok(Self {
            cov: &self.cov * c,
            factor: &self.factor * c.sqrt(),
        })
    }

    /// Characteristic function `E e^{i(y, ω)} = exp(−½ (By, y))`.
    pub fn characteristic_function(&self, y: &PhaseVector) -> Result<f64> {
        if y.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: y.n(),
            });
        }
        let v = y.as_vector();
        Ok((-0.5 * v.dot(&(&self.cov * v))).exp())
    }
}

fn psd_factor(cov: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::Indefinite {
            min_eigenvalue: min,
        });
    }
    let mut factor = eig.eigenvectors;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(k).scale_mut(s);
    }
    Ok(factor)
}

/// Complex covariance `B^c`, a Hermitian PSD `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCovariance {
    pub bc: DMatrix<Complex64>,
}

impl ComplexCovariance {
    pub fn new(bc: DMatrix<Complex64>) -> Result<Self> {
        validate_hermitian_psd(&bc)?;
        Ok(Self {
            bc: linalg::hermitize(&bc),
        })
    }

    pub fn n(&self) -> usize {
        self.bc.nrows()
    }

    /// Complex trace; real for Hermitian matrices.
    pub fn trace(&self) -> f64 {
        self.bc.trace().re
    }

    /// `<B^c y1, y2> = y2† B^c y1`.
    pub fn form(&self, y1: &ComplexVector, y2: &ComplexVector) -> Complex64 {
        y2.z.dotc(&(&self.bc * &y1.z))
    }
}

pub(crate) fn validate_hermitian_psd(m: &DMatrix<Complex64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let tol = linalg::default_tol_c(m);
    let residual = linalg::hermitian_residual(m);
    if residual > tol {
        return Err(Error::NotHermitian { residual });
    }
    if m.nrows() > 0 {
        let eig = SymmetricEigen::new(linalg::hermitize(m));
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::Indefinite {
                min_eigenvalue: min,
            });
        }
    }
    Ok(())
}

/// The unique symplectically invariant state with complex covariance `B^c`:
/// `B11 = B22 = Re B^c / 2`, `B12 = −B21 = −Im B^c / 2`.
pub fn from_complex_covariance(bc: &ComplexCovariance) -> Result<GaussianState> {
    validate_hermitian_psd(&bc.bc)?;
    let half_re = re_part(&bc.bc) * 0.5;
    let half_im = im_part(&bc.bc) * 0.5;
    let op = BlockOperator::s_commuting(&half_re, &(-half_im))?;
    GaussianState::new(op.into_matrix())
}

/// Pure-state measure: complex covariance `2h·ψψ†`, real covariance with
/// eigenvalues `{h, h, 0, …}` and dispersion `2h`.
pub fn pure_state_covariance(psi: &ComplexVector, h: f64) -> Result<GaussianState> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let outer = &psi.z * psi.z.adjoint() * Complex64::new(2.0 * h, 0.0);
    from_complex_covariance(&ComplexCovariance {
        bc: linalg::hermitize(&outer),
    })
}

/// Entrywise Monte Carlo estimate of a matrix-valued expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub samples: usize,
}

impl MatrixEstimate {
    /// `|mean − exact| / stderr` per entry. Entries with zero standard error
    /// (structurally constant) report `0` when they agree up to round-off
    /// relative to the largest exact entry and `∞` otherwise.
    pub fn z_scores(&self, exact: &DMatrix<f64>) -> DMatrix<f64> {
        let floor = 1e-12 * exact.camax();
        DMatrix::from_fn(self.mean.nrows(), self.mean.ncols(), |i, j| {
            let diff = (self.mean[(i, j)] - exact[(i, j)]).abs();
            let se = self.stderr[(i, j)];
            if se > 0.0 {
                diff / se
            } else if diff <= floor {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Accumulates sums of `x` and `x²` for every entry of a matrix sample.
#[derive(Debug, Clone)]
pub(crate) struct MatrixMoments {
    pub sum: DMatrix<f64>,
    pub sum_sq: DMatrix<f64>,
    pub count: usize,
}

impl MatrixMoments {
    pub fn zeros(r: usize, c: usize) -> Self {
        Self {
            sum: DMatrix::zeros(r, c),
            sum_sq: DMatrix::zeros(r, c),
            count: 0,
        }
    }

    pub fn push(&mut self, x: &DMatrix<f64>) {
        self.sum += x;
        self.sum_sq += x.component_mul(x);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MatrixMoments) {
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        self.count += other.count;
    }

    pub fn finish(&self) -> MatrixEstimate {
        let n = self.count as f64;
        let mean = &self.sum / n.max(1.0);
        let stderr = DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| {
            if self.count < 2 {
                return 0.0;
            }
            let m = mean[(i, j)];
            let var = ((self.sum_sq[(i, j)] - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        });
        MatrixEstimate {
            mean,
            stderr,
            samples: self.count,
        }
    }
}

/// Empirical `E[ω ωᵀ]` (the mean is known to be zero) over `samples` draws.
pub fn empirical_covariance(
    state: &GaussianState,
    samples: usize,
    seed: u64,
    partitions: usize,
) -> MatrixEstimate {
    let dim = 2 * state.n();
    let stream = SeedStream::new(seed);
    let parts: Vec<MatrixMoments> = partition_sizes(samples, partitions)
        .into_par_iter()
        .enumerate()
        .map(|(k, count)| {
            let mut rng = stream.substream(k as u64);
            let mut acc = MatrixMoments::zeros(dim, dim);
            for _ in 0..count {
                let w = state.sample(&mut rng).into_vector();
                acc.push(&(&w * w.transpose()));
            }
            acc
        })
        .collect();
    let mut total = MatrixMoments::zeros(dim, dim);
    for p in &parts {
        total.merge(p);
    }
    total.finish()
}

/// JSON description of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum StateJson {
    Real {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    Complex {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(rename = "Bc")]
        bc: ComplexMatrixJson,
    },
    Pure {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        pure: PureJson,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexMatrixJson {
    pub fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        Self {
            re: linalg::to_rows(&re_part(m)),
            im: linalg::to_rows(&im_part(m)),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        let re = linalg::from_rows(&self.re).map_err(Error::InvalidArgument)?;
        let im = linalg::from_rows(&self.im).map_err(Error::InvalidArgument)?;
        if re.shape() != im.shape() {
            return Err(Error::InvalidArgument(
                "real and imaginary parts differ in shape".into(),
            ));
        }
        Ok(complex_from_parts(&re, &im))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureJson {
    pub psi_re: Vec<f64>,
    pub psi_im: Vec<f64>,
    pub h: f64,
}

impl StateJson {
    pub fn from_state(state: &GaussianState) -> Self {
        StateJson::Real {
            n: Some(state.n()),
            b: linalg::to_rows(state.covariance()),
        }
    }

    pub fn to_state(&self) -> Result<GaussianState> {
        let (n, state) = match self {
            StateJson::Real { n, b } => {
                let m = linalg::from_rows(b).map_err(Error::InvalidArgument)?;
                (*n, GaussianState::new(m)?)
            }
            StateJson::Complex { n, bc } => (
                *n,
                from_complex_covariance(&ComplexCovariance {
                    bc: bc.to_matrix()?,
                })?,
            ),
            StateJson::Pure { n, pure } => {
                let psi = ComplexVector::from_parts(&pure.psi_re, &pure.psi_im)?;
                (*n, pure_state_covariance(&psi, pure.h)?)
            }
        };
        match n {
            Some(n) if n != state.n() => Err(Error::DimensionMismatch {
                expected: n,
                found: state.n(),
            }),
            _ => Ok(state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_psd(dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = SeedStream::new(seed).substream(0);
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        &g * g.transpose() / dim as f64
    }

    fn random_hermitian_psd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = SeedStream::new(seed).substream(1);
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        linalg::hermitize(&(&g * g.adjoint()))
    }

    #[test]
    fn dispersion_of_scalar_covariance() {
        let s = GaussianState::isotropic(3, 0.01).unwrap();
        assert!((s.dispersion() - 0.06).abs() < 1e-15);
    }

    #[test]
    fn zero_covariance_samples_zero() {
        let s = GaussianState::new(DMatrix::zeros(4, 4)).unwrap();
        let mut rng = SeedStream::new(1).substream(0);
        for _ in 0..10 {
            assert_eq!(s.sample(&mut rng), PhaseVector::zeros(2));
        }
    }

    #[test]
    fn degenerate_covariance_samples_on_its_axis() {
        let h = 0.05;
        let mut b = DMatrix::zeros(6, 6);
        b[(0, 0)] = 2.0 * h;
        let s = GaussianState::new(b).unwrap();
        let mut rng = SeedStream::new(3).substream(0);
        for _ in 0..100 {
            let w = s.sample(&mut rng).into_vector();
            assert!(w.rows(1, 5).iter().all(|&x| x == 0.0), "{w}");
            assert!(w[0] != 0.0);
        }
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let s = GaussianState::new(random_psd(4, 9)).unwrap();
        let a = s.sample(&mut SeedStream::new(5).substream(2));
        let b = s.sample(&mut SeedStream::new(5).substream(2));
        assert_eq!(a, b);
    }

    #[test]
    fn indefinite_and_asymmetric_covariances_are_rejected() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(GaussianState::new(b), Err(Error::Indefinite { .. })));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(GaussianState::new(a), Err(Error::NotSymmetric { .. })));
        assert!(GaussianState::new(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn identity_covariance_has_complex_covariance_two() {
        let s = GaussianState::isotropic(3, 1.0).unwrap();
        let bc = s.complex_covariance();
        assert_eq!(bc.bc, DMatrix::identity(3, 3) * Complex64::new(2.0, 0.0));
    }

    #[test]
    fn invariant_blocks_double() {
        let n = 3;
        let bc = random_hermitian_psd(n, 11);
        let s = from_complex_covariance(&ComplexCovariance::new(bc).unwrap()).unwrap();
        let b = s.covariance_operator();
        let c = s.complex_covariance();
        assert_eq!(re_part(&c.bc), b.a11() * 2.0);
        // S = 2·B12 and B^c = D − iS, so Im B^c = −2·B12.
        assert_eq!(im_part(&c.bc), -(b.a12() * 2.0));
    }

    #[test]
    fn symplectic_invariance_examples() {
        assert!(GaussianState::isotropic(2, 0.3).unwrap().is_symplectically_invariant(1e-12));
        let mut d = DVector::from_element(4, 1.0);
        d[2] = 2.0;
        d[3] = 2.0;
        let s = GaussianState::new(DMatrix::from_diagonal(&d)).unwrap();
        assert!(!s.is_symplectically_invariant(1e-10));
        assert_ne!(&s.pushforward_j(), s.covariance());
    }

    #[test]
    fn complex_covariance_round_trip_is_exact() {
        for seed in 0..20 {
            let bc = ComplexCovariance::new(random_hermitian_psd(4, seed)).unwrap();
            let s = from_complex_covariance(&bc).unwrap();
            assert!(s.is_symplectically_invariant(1e-12));
            assert_eq!(s.complex_covariance(), bc);
        }
    }

    #[test]
    fn from_complex_covariance_rejects_bad_input() {
        let mut m = DMatrix::identity(2, 2).map(|x: f64| Complex64::new(x, 0.0));
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            ComplexCovariance::new(m.clone()),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            from_complex_covariance(&ComplexCovariance { bc: m }),
            Err(Error::NotHermitian { .. })
        ));
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        assert!(matches!(
            from_complex_covariance(&ComplexCovariance { bc: neg }),
            Err(Error::Indefinite { .. })
        ));
    }

    #[test]
    fn isotropic_complex_covariance_gives_isotropic_state() {
        let h = 0.25;
        let bc = DMatrix::identity(3, 3) * Complex64::new(2.0 * h, 0.0);
        let s = from_complex_covariance(&ComplexCovariance { bc }).unwrap();
        assert_eq!(s.covariance(), &(DMatrix::identity(6, 6) * h));
    }

    #[test]
    fn one_dimensional_pure_state() {
        let psi = ComplexVector::from_parts(&[1.0], &[0.0]).unwrap();
        let s = pure_state_covariance(&psi, 0.1).unwrap();
        assert_eq!(s.covariance(), &(DMatrix::identity(2, 2) * 0.1));
    }

    #[test]
    fn pure_state_spectrum_and_dispersion() {
        let h = 0.02;
        let mut rng = SeedStream::new(4).substream(0);
        let z = DVector::from_fn(5, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let psi = ComplexVector::new(&z / Complex64::new(z.norm(), 0.0));
        let s = pure_state_covariance(&psi, h).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(s.covariance().clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((ev[0] - h).abs() < 1e-14 && (ev[1] - h).abs() < 1e-14);
        assert!(ev[2..].iter().all(|x| x.abs() < 1e-14));
        assert!((s.dispersion() - 2.0 * h).abs() < 1e-15);
        assert!(s.is_symplectically_invariant(1e-14));
        // B^c = 2h ψψ† block by block.
        let bc = DMatrix::from_fn(5, 5, |i, j| psi.z[i] * psi.z[j].conj() * 2.0 * h);
        let s2 = from_complex_covariance(&ComplexCovariance { bc }).unwrap();
        assert!((s2.covariance() - s.covariance()).camax() < 1e-16);
    }

    #[test]
    fn pure_state_requires_unit_vector() {
        let psi = ComplexVector::from_parts(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(
            pure_state_covariance(&psi, 0.1),
            Err(Error::NotNormalized { .. })
        ));
        let unit = ComplexVector::from_parts(&[1.0], &[0.0]).unwrap();
        assert!(pure_state_covariance(&unit, 0.0).is_err());
    }

    #[test]
    fn scaled_state_reuses_samples() {
        let s = GaussianState::new(random_psd(4, 2)).unwrap();
        let t = s.scaled(0.25).unwrap();
        let a = s.sample(&mut SeedStream::new(1).substream(0));
        let b = t.sample(&mut SeedStream::new(1).substream(0));
        assert!((a.scale(0.5).into_vector() - b.into_vector()).camax() < 1e-15);
    }

    #[test]
    fn state_json_forms() {
        let real: StateJson = serde_json::from_str(r#"{"n":1,"B":[[0.5,0.0],[0.0,0.5]]}"#).unwrap();
        assert_eq!(real.to_state().unwrap().dispersion(), 1.0);
        let cplx: StateJson =
            serde_json::from_str(r#"{"Bc":{"re":[[1.0]],"im":[[0.0]]}}"#).unwrap();
        assert_eq!(cplx.to_state().unwrap().covariance(), &(DMatrix::identity(2, 2) * 0.5));
        let pure: StateJson =
            serde_json::from_str(r#"{"pure":{"psi_re":[0.0,1.0],"psi_im":[0.0,0.0],"h":0.1}}"#)
                .unwrap();
        assert!((pure.to_state().unwrap().dispersion() - 0.2).abs() < 1e-15);
        let wrong_n: StateJson = serde_json::from_str(r#"{"n":2,"B":[[1.0,0.0],[0.0,1.0]]}"#).unwrap();
        assert!(wrong_n.to_state().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn complex_trace_equals_dispersion(seed in 0u64..10_000) {
            let s = GaussianState::new(random_psd(6, seed)).unwrap();
            let bc = s.complex_covariance();
            prop_assert!(bc.bc.trace().im.abs() <= 1e-14);
            prop_assert!((bc.trace() - s.dispersion()).abs() <= 1e-12 * s.dispersion());
            prop_assert!(linalg::hermitian_residual(&bc.bc) == 0.0);
        }

        #[test]
        fn complex_form_is_twice_real_form_for_invariant_states(seed in 0u64..10_000) {
            let bc = ComplexCovariance::new(random_hermitian_psd(3, seed)).unwrap();
            let s = from_complex_covariance(&bc).unwrap();
            let mut rng = SeedStream::new(seed).substream(9);
            let y = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let yw = PhaseVector::from_stacked(y.clone()).unwrap();
            let real = y.dot(&(s.covariance() * &y));
            let cplx = s.complex_covariance().form(&yw.complexify(), &yw.complexify());
            prop_assert!(cplx.im.abs() <= 1e-12 * (1.0 + real.abs()));
            prop_assert!((cplx.re - 2.0 * real).abs() <= 1e-12 * (1.0 + real.abs()));
        }

        #[test]
        fn invariant_states_have_j_invariant_characteristic_function(seed in 0u64..10_000) {
            let bc = ComplexCovariance::new(random_hermitian_psd(3, seed)).unwrap();
            let s = from_complex_covariance(&bc).unwrap();
            let mut rng = SeedStream::new(seed).substream(4);
            let y = PhaseVector::from_stacked(DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap();
            // Jᵀ y = −J y.
            let jt_y = crate::phase::apply_j(&y).scale(-1.0);
            let a = s.characteristic_function(&jt_y).unwrap();
            let b = s.characteristic_function(&y).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((s.pushforward_j() - s.covariance()).camax() <= 1e-12);
        }

        #[test]
        fn pure_state_is_phase_invariant(seed in 0u64..10_000, theta in 0.0..std::f64::consts::TAU) {
            let mut rng = SeedStream::new(seed).substream(0);
            let z = DVector::from_fn(3, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let psi = ComplexVector::new(&z / Complex64::new(z.norm(), 0.0));
            let rotated = ComplexVector::new(&psi.z * Complex64::from_polar(1.0, theta));
            let a = pure_state_covariance(&psi, 0.3).unwrap();
            let b = pure_state_covariance(&rotated, 0.3).unwrap();
            prop_assert!((a.covariance() - b.covariance()).camax() <= 1e-14);
        }
    }
}
