//! Experiment configuration: a single JSON document, validated into a
//! [`Plan`] before any computation runs.
//!
//! Named shortcuts (`random_scommuting`, `random_symmetric`, a pure state
//! without explicit amplitudes, a missing initial point) expand from the seed
//! through dedicated ChaCha streams, disjoint from the streams used by Monte
//! Carlo estimators.

use std::fmt;

use nalgebra::DMatrix;
use pcsft::correspondence::DensityOperator;
use pcsft::gaussian::{from_complex_covariance, pure_state_covariance};
use pcsft::linalg::{complex_from_parts, from_rows};
use pcsft::rng::{SeedStream, DEFAULT_PARTITIONS};
use pcsft::variable::Term;
use pcsft::{
    BlockOperator, Complex64, ComplexCovariance, ComplexVector, GaussianState, PhaseVector,
    PolynomialVariable,
};
use serde::Deserialize;

use crate::random;

/// First stream index reserved for expanding shortcuts. Estimators use
/// streams `0..partitions`.
const EXPANSION_BASE: u64 = 1 << 32;
const GENERATOR_STREAM: u64 = EXPANSION_BASE;
const STATE_STREAM: u64 = EXPANSION_BASE + 1;
const POINT_STREAM: u64 = EXPANSION_BASE + 2;
const FACTOR_STREAM: u64 = EXPANSION_BASE + 1024;

pub const MAX_N: usize = 64;
const PURE_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// The document is not valid JSON or does not match the schema.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// A field parsed but holds an invalid value.
    Field { field: String, message: String },
    Io(String),
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax {
                line,
                column,
                message,
            } => write!(f, "config error at line {line}, column {column}: {message}"),
            ConfigError::Field { field, message } => {
                write!(f, "config error in field `{field}`: {message}")
            }
            ConfigError::Io(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub variable: VariableSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_partitions")]
    pub partitions: usize,
    /// Random instances per property in `verify`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_h_grid")]
    pub h_grid: Vec<f64>,
    /// Initial phase point for trajectories; drawn from the seed if absent.
    #[serde(default)]
    pub point: Option<PointSpec>,
    /// The configured state is expected to violate symplectic invariance.
    #[serde(default)]
    pub negative_control: bool,
}

fn default_n() -> usize {
    4
}
fn default_h() -> f64 {
    0.01
}
fn default_seed() -> u64 {
    42
}
fn default_samples() -> usize {
    100_000
}
fn default_partitions() -> usize {
    DEFAULT_PARTITIONS
}
fn default_trials() -> usize {
    100
}
fn default_times() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.5).collect()
}
fn default_h_grid() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `B^c = 2h ψψ†`; `ψ` is drawn from the seed when omitted.
    Pure {
        #[serde(default)]
        psi_re: Option<Vec<f64>>,
        #[serde(default)]
        psi_im: Option<Vec<f64>>,
    },
    /// `B^c = 2h I / n`.
    MaximallyMixed,
    ComplexCovariance { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
    RealCovariance {
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Pure {
            psi_re: None,
            psi_im: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `k·I`.
    Harmonic { k: f64 },
    Dense { matrix: Vec<Vec<f64>> },
    #[default]
    RandomScommuting,
    /// Positive definite, so the flow stays bounded; almost surely not
    /// commuting with `J`.
    RandomSymmetric,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub terms: Vec<TermSpec>,
}

impl Default for VariableSpec {
    fn default() -> Self {
        VariableSpec {
            terms: vec![TermSpec {
                coeff: 1.0,
                factors: vec![FactorSpec::RandomScommuting],
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub coeff: f64,
    pub factors: Vec<FactorSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Identity,
    Harmonic { k: f64 },
    /// The configured generator.
    Generator,
    RandomScommuting,
    Dense { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Plan {
    pub n: usize,
    pub h: f64,
    pub seed: u64,
    pub state: GaussianState,
    /// `T(ρ)` when the state is invariant with dispersion `2h`.
    pub density: Option<DensityOperator>,
    pub generator: BlockOperator,
    pub variable: PolynomialVariable,
    pub samples: usize,
    pub partitions: usize,
    pub trials: usize,
    pub times: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub point: PhaseVector,
    pub negative_control: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Plan, ConfigError> {
        let n = self.n;
        if n == 0 || n > MAX_N {
            return Err(ConfigError::field("n", format!("must be in 1..={MAX_N}, got {n}")));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(ConfigError::field("h", format!("must be positive and finite, got {}", self.h)));
        }
        if self.samples < 2 {
            return Err(ConfigError::field("samples", "must be at least 2"));
        }
        if self.partitions == 0 || self.partitions > 4096 {
            return Err(ConfigError::field("partitions", "must be in 1..=4096"));
        }
        if self.trials == 0 {
            return Err(ConfigError::field("trials", "must be at least 1"));
        }
        if self.times.is_empty() {
            return Err(ConfigError::field("times", "must not be empty"));
        }
        if let Some(i) = self.times.iter().position(|t| !t.is_finite()) {
            return Err(ConfigError::field(format!("times[{i}]"), "must be finite"));
        }
        validate_h_grid(&self.h_grid)?;

        let stream = SeedStream::new(self.seed);
        let generator = self.build_generator(&stream)?;
        let (state, density) = self.build_state(&stream)?;
        let variable = self.build_variable(&stream, &generator)?;
        let point = match &self.point {
            Some(p) => {
                if p.q.len() != n || p.p.len() != n {
                    return Err(ConfigError::field(
                        "point",
                        format!("q and p must have length {n}"),
                    ));
                }
                if p.q.iter().chain(&p.p).any(|x| !x.is_finite()) {
                    return Err(ConfigError::field("point", "entries must be finite"));
                }
                PhaseVector::new(&p.q, &p.p).map_err(|e| ConfigError::field("point", e))?
            }
            None => random::point(n, &mut stream.substream(POINT_STREAM)),
        };

        Ok(Plan {
            n,
            h: self.h,
            seed: self.seed,
            state,
            density,
            generator,
            variable,
            samples: self.samples,
            partitions: self.partitions,
            trials: self.trials,
            times: self.times.clone(),
            h_grid: self.h_grid.clone(),
            point,
            negative_control: self.negative_control,
        })
    }

    fn build_generator(&self, stream: &SeedStream) -> Result<BlockOperator, ConfigError> {
        let n = self.n;
        match &self.generator {
            GeneratorSpec::Harmonic { k } => {
                if !k.is_finite() {
                    return Err(ConfigError::field("generator.k", "must be finite"));
                }
                Ok(BlockOperator::harmonic(n, *k))
            }
            GeneratorSpec::Dense { matrix } => {
                let m = square_matrix(matrix, 2 * n, "generator.matrix")?;
                let op = BlockOperator::from_matrix(m)
                    .map_err(|e| ConfigError::field("generator.matrix", e))?;
                if !op.is_symmetric(op.default_tol()) {
                    return Err(ConfigError::field(
                        "generator.matrix",
                        format!("not symmetric (residual {:e})", op.symmetry_residual()),
                    ));
                }
                Ok(op)
            }
            GeneratorSpec::RandomScommuting => Ok(random::s_commuting_symmetric(
                n,
                &mut stream.substream(GENERATOR_STREAM),
            )),
            GeneratorSpec::RandomSymmetric => {
                Ok(random::positive_symmetric(n, &mut stream.substream(GENERATOR_STREAM)))
            }
        }
    }

    fn build_state(
        &self,
        stream: &SeedStream,
    ) -> Result<(GaussianState, Option<DensityOperator>), ConfigError> {
        let n = self.n;
        let h = self.h;
        let state = match &self.state {
            StateSpec::Pure { psi_re, psi_im } => {
                let psi = match (psi_re, psi_im) {
                    (None, None) => random::unit_vector(n, &mut stream.substream(STATE_STREAM)),
                    (Some(re), im) => {
                        let zeros = vec![0.0; re.len()];
                        let im = im.as_ref().unwrap_or(&zeros);
                        if re.len() != n || im.len() != n {
                            return Err(ConfigError::field(
                                "state",
                                format!("psi_re and psi_im must have length {n}"),
                            ));
                        }
                        if re.iter().chain(im).any(|x| !x.is_finite()) {
                            return Err(ConfigError::field("state", "psi entries must be finite"));
                        }
                        ComplexVector::from_parts(re, im)
                            .map_err(|e| ConfigError::field("state", e))?
                    }
                    (None, Some(_)) => {
                        return Err(ConfigError::field("state.psi_re", "missing while psi_im is set"))
                    }
                };
                let norm = psi.norm();
                if (norm - 1.0).abs() > PURE_NORM_TOL {
                    return Err(ConfigError::field(
                        "state",
                        format!("psi must have unit norm, got {norm}"),
                    ));
                }
                pure_state_covariance(&psi, h).map_err(|e| ConfigError::field("state", e))?
            }
            StateSpec::MaximallyMixed => {
                let bc = DMatrix::<Complex64>::identity(n, n) * Complex64::new(2.0 * h / n as f64, 0.0);
                from_complex_covariance(&ComplexCovariance { bc })
                    .map_err(|e| ConfigError::field("state", e))?
            }
            StateSpec::ComplexCovariance { re, im } => {
                let re = square_matrix(re, n, "state.re")?;
                let im = square_matrix(im, n, "state.im")?;
                let cc = ComplexCovariance::new(complex_from_parts(&re, &im))
                    .map_err(|e| ConfigError::field("state", e))?;
                from_complex_covariance(&cc).map_err(|e| ConfigError::field("state", e))?
            }
            StateSpec::RealCovariance { b } => {
                let m = square_matrix(b, 2 * n, "state.B")?;
                GaussianState::new(m).map_err(|e| ConfigError::field("state.B", e))?
            }
        };
        let density = pcsft::correspondence::t_state(&state, h).ok();
        Ok((state, density))
    }

    fn build_variable(
        &self,
        stream: &SeedStream,
        generator: &BlockOperator,
    ) -> Result<PolynomialVariable, ConfigError> {
        let n = self.n;
        let mut terms = Vec::with_capacity(self.variable.terms.len());
        for (i, term) in self.variable.terms.iter().enumerate() {
            let path = format!("variable.terms[{i}]");
            if !term.coeff.is_finite() {
                return Err(ConfigError::field(format!("{path}.coeff"), "must be finite"));
            }
            if term.factors.is_empty() {
                return Err(ConfigError::field(format!("{path}.factors"), "must not be empty"));
            }
            let mut factors = Vec::with_capacity(term.factors.len());
            for (j, spec) in term.factors.iter().enumerate() {
                let fpath = format!("{path}.factors[{j}]");
                let op = match spec {
                    FactorSpec::Identity => BlockOperator::identity(n),
                    FactorSpec::Harmonic { k } => {
                        if !k.is_finite() {
                            return Err(ConfigError::field(format!("{fpath}.k"), "must be finite"));
                        }
                        BlockOperator::harmonic(n, *k)
                    }
                    FactorSpec::Generator => generator.clone(),
                    FactorSpec::RandomScommuting => {
                        let index = FACTOR_STREAM + (i as u64) * 64 + j as u64;
                        random::s_commuting_symmetric(n, &mut stream.substream(index))
                    }
                    FactorSpec::Dense { matrix } => {
                        let m = square_matrix(matrix, 2 * n, &format!("{fpath}.matrix"))?;
                        BlockOperator::from_matrix(m).map_err(|e| ConfigError::field(&fpath, e))?
                    }
                };
                let tol = op.default_tol();
                if !op.is_symmetric(tol) {
                    return Err(ConfigError::field(&fpath, "factor is not symmetric"));
                }
                if !op.is_s_commuting(tol) {
                    return Err(ConfigError::field(
                        &fpath,
                        format!(
                            "factor does not commute with J (residual {:e})",
                            op.commutator_with_j_residual()
                        ),
                    ));
                }
                factors.push(op);
            }
            terms.push(Term {
                coeff: term.coeff,
                factors,
            });
        }
        PolynomialVariable::new(n, terms).map_err(|e| ConfigError::field("variable", e))
    }
}

fn validate_h_grid(grid: &[f64]) -> Result<(), ConfigError> {
    if grid.len() < 3 {
        return Err(ConfigError::field("h_grid", "needs at least 3 points"));
    }
    if let Some(i) = grid.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(ConfigError::field(format!("h_grid[{i}]"), "must be positive and finite"));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] >= w[0]) {
        return Err(ConfigError::field(
            format!("h_grid[{}]", i + 1),
            "grid must be strictly descending",
        ));
    }
    Ok(())
}

fn square_matrix(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<DMatrix<f64>, ConfigError> {
    let m = from_rows(rows).map_err(|e| ConfigError::field(field, e))?;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(ConfigError::field(
            field,
            format!("expected {dim}x{dim}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::field(field, "entries must be finite"));
    }
    Ok(m)
}
