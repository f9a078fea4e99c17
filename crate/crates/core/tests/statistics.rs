//! Sampled estimators against closed-form oracles.

use nalgebra::DMatrix;
use pcsft::correspondence::{
    classical_average_exact, classical_average_mc, classical_average_mc_mapped, t_state_inverse,
    DensityOperator,
};
use pcsft::dynamics::{ensemble_evolve_times, vonneumann_lift_complex};
use pcsft::gaussian::{empirical_covariance, from_complex_covariance};
use pcsft::phase::to_complex_operator;
use pcsft::rng::{SeedStream, DEFAULT_PARTITIONS};
use pcsft::variable::Term;
use pcsft::{BlockOperator, Complex64, ComplexCovariance, GaussianState, PolynomialVariable};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn rng(k: u64) -> ChaCha20Rng {
    SeedStream::new(99).substream(k)
}

fn gauss(r: usize, c: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn form(n: usize, rng: &mut ChaCha20Rng) -> BlockOperator {
    let x = gauss(n, n, rng);
    let y = gauss(n, n, rng);
    BlockOperator::s_commuting(&((&x + x.transpose()) * 0.5), &((&y - y.transpose()) * 0.5))
        .unwrap()
}

fn density(n: usize, rng: &mut ChaCha20Rng) -> DensityOperator {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let p = &g * g.adjoint();
    let p = (&p + p.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = p.trace();
    DensityOperator::new(p / tr).unwrap()
}

#[test]
fn empirical_covariance_within_four_standard_errors() {
    let mut r = rng(1);
    let b = gauss(6, 6, &mut r);
    let state = GaussianState::new(&b * b.transpose() / 6.0).unwrap();
    let est = empirical_covariance(&state, 100_000, 5, DEFAULT_PARTITIONS);
    assert_eq!(est.samples, 100_000);
    let z = est.z_scores(state.covariance()).max();
    assert!(z < 4.5, "max z {z}");
}

#[test]
fn sampled_averages_match_wick_values_up_to_degree_three() {
    let mut r = rng(2);
    let n = 3;
    let h = 0.1;
    let state = t_state_inverse(&density(n, &mut r), h).unwrap();
    for degree in 1..=3 {
        let f = PolynomialVariable::monomial(1.0, (0..degree).map(|_| form(n, &mut r)).collect())
            .unwrap();
        let exact = classical_average_exact(&f, &state).unwrap();
        let mc = classical_average_mc(&f, &state, 100_000, 11 + degree as u64, 8).unwrap();
        let z = (mc.estimate - exact).abs() / mc.stderr;
        assert!(z < 4.0, "degree {degree}: exact {exact}, mc {mc:?}");
    }
}

#[test]
fn rescaled_sampling_reproduces_the_unscaled_average() {
    // Sampling ρ/(2h) and mapping ω′ ↦ √(2h) ω′ is the same estimator, draw
    // for draw, as sampling ρ directly.
    let mut r = rng(3);
    let n = 2;
    let h = 0.01;
    let state = t_state_inverse(&density(n, &mut r), h).unwrap();
    let f = PolynomialVariable::new(
        n,
        vec![
            Term {
                coeff: 1.0,
                factors: vec![form(n, &mut r)],
            },
            Term {
                coeff: 2.0,
                factors: vec![form(n, &mut r), form(n, &mut r)],
            },
        ],
    )
    .unwrap();
    let direct = classical_average_mc(&f, &state, 5_000, 3, 4).unwrap();
    let unit = state.scaled(1.0 / (2.0 * h)).unwrap();
    let mapped = classical_average_mc_mapped(&f, &unit, (2.0 * h).sqrt(), 5_000, 3, 4).unwrap();
    let tol = 1e-10 * direct.estimate.abs().max(direct.stderr);
    assert!((direct.estimate - mapped.estimate).abs() < tol);
    assert!((direct.stderr - mapped.stderr).abs() < tol);
}

#[test]
fn ensemble_covariances_follow_the_exact_evolution() {
    let mut r = rng(4);
    let n = 3;
    let h = 0.5;
    let bc = {
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal))
        });
        &g * g.adjoint()
    };
    let state = from_complex_covariance(&ComplexCovariance {
        bc: (&bc + bc.adjoint()) * Complex64::new(0.5, 0.0),
    })
    .unwrap();
    let mh = to_complex_operator(&form(n, &mut r)).unwrap();
    let times = [0.0, 0.7, 3.0, 9.5];
    let estimates =
        ensemble_evolve_times(&state, &mh, &times, h, 100_000, 21, DEFAULT_PARTITIONS).unwrap();
    for est in &estimates {
        let exact = vonneumann_lift_complex(&state.complex_covariance().bc, &mh, est.time, h).unwrap();
        let z = est.max_z_score(&exact);
        assert!(z < 4.5, "t = {}: max z {z}", est.time);
        let dz = (est.dispersion - exact.trace().re).abs() / est.dispersion_stderr;
        assert!(dz < 4.0, "t = {}: dispersion z {dz}", est.time);
    }
}

#[test]
fn estimates_do_not_depend_on_the_thread_pool() {
    let mut r = rng(5);
    let n = 2;
    let state = t_state_inverse(&density(n, &mut r), 0.2).unwrap();
    let f = PolynomialVariable::monomial(1.0, vec![form(n, &mut r), form(n, &mut r)]).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| classical_average_mc(&f, &state, 20_000, 8, 8).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}
