//! Polynomial variables in symplectically invariant quadratic forms,
//! `f(ω) = Σ_k c_k Π_j ½ (A_kj ω, ω)` with every `A_kj` symmetric and
//! commuting with `J`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::phase::{quadratic_form_eval, BlockOperator, PhaseVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<BlockOperator>,
}

impl Term {
    pub fn degree(&self) -> usize {
        self.factors.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VariableRepr", into = "VariableRepr")]
pub struct PolynomialVariable {
    n: usize,
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
struct VariableRepr {
    n: usize,
    terms: Vec<Term>,
}

impl TryFrom<VariableRepr> for PolynomialVariable {
    type Error = Error;

    fn try_from(r: VariableRepr) -> Result<Self> {
        PolynomialVariable::new(r.n, r.terms)
    }
}

impl From<PolynomialVariable> for VariableRepr {
    fn from(v: PolynomialVariable) -> Self {
        VariableRepr {
            n: v.n,
            terms: v.terms,
        }
    }
}

fn check_factor(n: usize, a: &BlockOperator) -> Result<()> {
    if a.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.n(),
        });
    }
    let tol = a.default_tol();
    let residual = a.symmetry_residual();
    if residual > tol {
        return Err(Error::NotSymmetric { residual });
    }
    let residual = a.commutator_with_j_residual();
    if residual > tol {
        return Err(Error::NotSCommuting { residual });
    }
    Ok(())
}

impl PolynomialVariable {
    /// Every term needs at least one factor, so `f(0) = 0`.
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.factors.is_empty() {
                return Err(Error::InvalidArgument(
                    "constant terms are not allowed: every term needs a quadratic factor".into(),
                ));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient {}",
                    t.coeff
                )));
            }
            for a in &t.factors {
                check_factor(n, a)?;
            }
        }
        Ok(Self { n, terms })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: Vec::new(),
        }
    }

    /// `½ (Aω, ω)`.
    pub fn quadratic(a: BlockOperator) -> Result<Self> {
        Self::monomial(1.0, vec![a])
    }

    pub fn monomial(coeff: f64, factors: Vec<BlockOperator>) -> Result<Self> {
        let n = factors.first().map(BlockOperator::n).ok_or_else(|| {
            Error::InvalidArgument("a monomial needs at least one factor".into())
        })?;
        Self::new(n, vec![Term { coeff, factors }])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Largest number of quadratic factors in a term.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &PolynomialVariable) -> Result<PolynomialVariable> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { n: self.n, terms })
    }

    pub fn scale(&self, c: f64) -> PolynomialVariable {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: c * t.coeff,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    /// Distributes the product over terms.
    pub fn mul(&self, other: &PolynomialVariable) -> Result<PolynomialVariable> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    factors,
                });
            }
        }
        Ok(Self { n: self.n, terms })
    }

    pub fn eval(&self, omega: &PhaseVector) -> Result<f64> {
        if omega.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: omega.n(),
            });
        }
        let mut total = 0.0;
        for t in &self.terms {
            let mut prod = t.coeff;
            for a in &t.factors {
                prod *= quadratic_form_eval(a, omega)?;
            }
            total += prod;
        }
        Ok(total)
    }

    /// Analytic gradient: `∇ ½(Aω, ω) = Aω` and the product rule.
    pub fn gradient(&self, omega: &PhaseVector) -> Result<PhaseVector> {
        if omega.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: omega.n(),
            });
        }
        let w = omega.as_vector();
        let mut grad = DVector::zeros(2 * self.n);
        for t in &self.terms {
            let values: Vec<f64> = t
                .factors
                .iter()
                .map(|a| 0.5 * w.dot(&(a.matrix() * w)))
                .collect();
            for (j, a) in t.factors.iter().enumerate() {
                let others: f64 = values
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, v)| v)
                    .product();
                grad += a.matrix() * w * (t.coeff * others);
            }
        }
        PhaseVector::from_stacked(grad)
    }

    /// `f''(0)`: only single-factor terms have a nonzero Hessian at the origin.
    pub fn second_derivative_at_zero(&self) -> BlockOperator {
        let mut m = DMatrix::zeros(2 * self.n, 2 * self.n);
        for t in self.terms.iter().filter(|t| t.degree() == 1) {
            m += t.factors[0].matrix() * t.coeff;
        }
        BlockOperator::from_matrix(linalg::symmetrize(&m)).expect("even square matrix")
    }

    /// Keeps only the terms with exactly `degree` factors.
    pub fn homogeneous_part(&self, degree: usize) -> PolynomialVariable {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|t| t.degree() == degree)
                .cloned()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::apply_j;
    use proptest::prelude::*;

    fn sym_s_commuting(n: usize, entries: &[f64]) -> BlockOperator {
        let x = DMatrix::from_iterator(n, n, entries[..n * n].iter().copied());
        let y = DMatrix::from_iterator(n, n, entries[n * n..2 * n * n].iter().copied());
        BlockOperator::s_commuting(&(&x + x.transpose()), &(&y - y.transpose())).unwrap()
    }

    fn op_strategy(n: usize) -> impl Strategy<Value = BlockOperator> {
        prop::collection::vec(-1.0..1.0f64, 2 * n * n).prop_map(move |v| sym_s_commuting(n, &v))
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = PhaseVector> {
        prop::collection::vec(-2.0..2.0f64, 2 * n)
            .prop_map(|v| PhaseVector::from_stacked(DVector::from_vec(v)).unwrap())
    }

    fn sample_variable(n: usize) -> impl Strategy<Value = PolynomialVariable> {
        (op_strategy(n), op_strategy(n), op_strategy(n), -2.0..2.0f64, -2.0..2.0f64).prop_map(
            |(a, b, c, x, y)| {
                PolynomialVariable::new(
                    a.n(),
                    vec![
                        Term { coeff: x, factors: vec![a.clone()] },
                        Term { coeff: y, factors: vec![b.clone(), c.clone()] },
                        Term { coeff: 0.5, factors: vec![a, b, c] },
                    ],
                )
                .unwrap()
            },
        )
    }

    #[test]
    fn rejects_constant_and_non_invariant_terms() {
        assert!(PolynomialVariable::new(1, vec![Term { coeff: 1.0, factors: vec![] }]).is_err());
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::zeros(1, 1);
        let bad = BlockOperator::from_blocks(&one, &zero, &zero, &(&one * 2.0)).unwrap();
        assert!(matches!(
            PolynomialVariable::quadratic(bad),
            Err(Error::NotSCommuting { .. })
        ));
        let asym = BlockOperator::s_commuting(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), &DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            PolynomialVariable::quadratic(asym),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn zero_variable() {
        let f = PolynomialVariable::zero(3);
        assert_eq!(f.eval(&PhaseVector::zeros(3)).unwrap(), 0.0);
        assert_eq!(f.second_derivative_at_zero(), BlockOperator::zeros(3));
        assert_eq!(f.degree(), 0);
    }

    #[test]
    fn quartic_has_vanishing_hessian() {
        let a = BlockOperator::identity(2);
        let f = PolynomialVariable::quadratic(a.clone()).unwrap();
        let g = f.mul(&f).unwrap();
        assert_eq!(g.degree(), 2);
        assert_eq!(g.second_derivative_at_zero(), BlockOperator::zeros(2));
        assert_eq!(f.second_derivative_at_zero(), a);
    }

    #[test]
    fn json_round_trip() {
        let f = PolynomialVariable::monomial(2.0, vec![BlockOperator::harmonic(1, 3.0)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: PolynomialVariable = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn vanishes_at_origin_and_is_j_invariant(f in sample_variable(3), w in vec_strategy(3)) {
            prop_assert_eq!(f.eval(&PhaseVector::zeros(3)).unwrap(), 0.0);
            let a = f.eval(&w).unwrap();
            let b = f.eval(&apply_j(&w)).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn hessian_at_origin_is_s_commuting(f in sample_variable(3)) {
            let h = f.second_derivative_at_zero();
            prop_assert!(h.is_s_commuting(1e-12 * (1.0 + linalg::max_abs(h.matrix()))));
        }

        #[test]
        fn hessian_matches_finite_differences(f in sample_variable(2)) {
            // Second differences of f at 0 along e_i ± e_j.
            let dim = 4;
            let step = 1e-3;
            let hess = f.second_derivative_at_zero();
            for i in 0..dim {
                for j in 0..dim {
                    let at = |si: f64, sj: f64| {
                        let mut v = DVector::zeros(dim);
                        v[i] += si * step;
                        v[j] += sj * step;
                        f.eval(&PhaseVector::from_stacked(v).unwrap()).unwrap()
                    };
                    let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * step * step);
                    prop_assert!((fd - hess.matrix()[(i, j)]).abs() <= 1e-4, "({i},{j}): {fd} vs {}", hess.matrix()[(i, j)]);
                }
            }
        }

        #[test]
        fn gradient_matches_central_differences(f in sample_variable(2), w in vec_strategy(2)) {
            let g = f.gradient(&w).unwrap();
            let step = 1e-5;
            for k in 0..4 {
                let mut plus = w.as_vector().clone();
                let mut minus = w.as_vector().clone();
                plus[k] += step;
                minus[k] -= step;
                let fd = (f.eval(&PhaseVector::from_stacked(plus).unwrap()).unwrap()
                    - f.eval(&PhaseVector::from_stacked(minus).unwrap()).unwrap()) / (2.0 * step);
                prop_assert!((fd - g.as_vector()[k]).abs() <= 1e-5 * (1.0 + fd.abs()));
            }
        }
    }
}
