//! The twistor operator on covariant jets and the pointwise classification
//! checks built on it.
//!
//! A [`CovariantJet`] holds `ψ`, `∇_{e_i} ψ` (and optionally `∇²_{e_i,e_j} ψ`)
//! in an orthonormal frame. Everything here is frame-local algebra: `dψ`, `δψ`,
//! `d^cψ` and `δ^cψ` are read off the 1-jet, and the defining equations are
//! compared direction by direction. All residuals are relative, scaled by the
//! larger of the competing norms with an absolute floor of [`ABS_FLOOR`].

use thiserror::Error;

use crate::exterior::{sum_forms, AlternatingForm, Covector, FormError};
use crate::kaehler::{KaehlerError, KaehlerFrame};

/// Denominator floor for relative residuals.
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwistorError {
    #[error("jet entries disagree in shape: expected (n={dim}, p={degree}), found (n={got_dim}, p={got_degree})")]
    Shape {
        dim: usize,
        degree: usize,
        got_dim: usize,
        got_degree: usize,
    },
    #[error("gradient has {got} directions, expected {expected}")]
    DirectionCount { expected: usize, got: usize },
    #[error("expected degree {expected}, got {got}")]
    WrongDegree { expected: usize, got: usize },
    #[error("complex dimension {0} is not supported by this check")]
    UnsupportedDimension(usize),
    #[error("jet carries no second derivatives")]
    MissingHessian,
    #[error("form is not primitive (|Λφ| = {0:e})")]
    NotPrimitive(f64),
    #[error("form is not of type (1,1) (|Jφ| = {0:e})")]
    NotInvariant(f64),
    #[error("degree p = {p} must satisfy 2 <= p <= n - 2 = {max}")]
    DegreeOutOfRange { p: usize, max: usize },
    #[error("jet list is empty")]
    Empty,
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Kaehler(#[from] KaehlerError),
}

/// `defect / max(scale, ABS_FLOOR)`.
pub fn relative(defect: f64, scale: f64) -> f64 {
    defect.abs() / scale.max(ABS_FLOOR)
}

/// Root-sum-square norm of a family of forms (a tensor in `T* ⊗ Λ^p`).
pub fn family_norm(forms: &[AlternatingForm]) -> f64 {
    forms.iter().fold(0.0, |acc, f| acc + f.norm_sq()).sqrt()
}

fn family_distance(a: &[AlternatingForm], b: &[AlternatingForm]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.add_scaled(-1.0, y).norm_sq())
        .sum::<f64>()
        .sqrt()
}

/// Value, first and (optionally) second covariant derivatives of a `p`-form
/// at a point, expressed in an orthonormal frame.
#[derive(Debug, Clone)]
pub struct CovariantJet {
    value: AlternatingForm,
    grad: Vec<AlternatingForm>,
    hess: Option<Vec<Vec<AlternatingForm>>>,
}

impl CovariantJet {
    pub fn new(value: AlternatingForm, grad: Vec<AlternatingForm>) -> Result<Self, TwistorError> {
        let (n, p) = (value.dim(), value.degree());
        if grad.len() != n {
            return Err(TwistorError::DirectionCount {
                expected: n,
                got: grad.len(),
            });
        }
        for g in &grad {
            check_shape(n, p, g)?;
        }
        Ok(Self {
            value,
            grad,
            hess: None,
        })
    }

    /// Attaches `hess[i][j] = ∇²_{e_i, e_j} ψ`.
    pub fn with_hess(mut self, hess: Vec<Vec<AlternatingForm>>) -> Result<Self, TwistorError> {
        let (n, p) = (self.dim(), self.degree());
        if hess.len() != n {
            return Err(TwistorError::DirectionCount {
                expected: n,
                got: hess.len(),
            });
        }
        for row in &hess {
            if row.len() != n {
                return Err(TwistorError::DirectionCount {
                    expected: n,
                    got: row.len(),
                });
            }
            for h in row {
                check_shape(n, p, h)?;
            }
        }
        self.hess = Some(hess);
        Ok(self)
    }

    /// Jet with vanishing derivatives.
    pub fn parallel(value: AlternatingForm) -> Self {
        let (n, p) = (value.dim(), value.degree());
        Self {
            value,
            grad: vec![AlternatingForm::zero(n, p); n],
            hess: Some(vec![vec![AlternatingForm::zero(n, p); n]; n]),
        }
    }

    /// The general pointwise twistor jet
    /// `∇_X ψ = 1/(p+1) X ⌟ A - 1/(n-p+1) X ∧ B`, which has `dψ = A`, `δψ = B`.
    pub fn twistor_from_differentials(
        value: AlternatingForm,
        d: &AlternatingForm,
        delta: &AlternatingForm,
    ) -> Result<Self, TwistorError> {
        let (n, p) = (value.dim(), value.degree());
        check_shape(n, p + 1, d)?;
        if p > 0 {
            check_shape(n, p - 1, delta)?;
        }
        let grad = (0..n)
            .map(|i| {
                let x = AlternatingForm::unit(n, i);
                let mut g = d.interior_unit(i).scale(1.0 / (p + 1) as f64);
                if p > 0 {
                    g -= &x.wedge(delta).scale(1.0 / (n - p + 1) as f64);
                }
                g
            })
            .collect();
        Self::new(value, grad)
    }

    pub fn dim(&self) -> usize {
        self.value.dim()
    }

    pub fn degree(&self) -> usize {
        self.value.degree()
    }

    pub fn value(&self) -> &AlternatingForm {
        &self.value
    }

    pub fn grad(&self) -> &[AlternatingForm] {
        &self.grad
    }

    pub fn hess(&self) -> Option<&[Vec<AlternatingForm>]> {
        self.hess.as_deref()
    }

    pub fn grad_norm(&self) -> f64 {
        family_norm(&self.grad)
    }

    /// Applies a linear, degree-changing map to every entry.
    pub fn map(&self, f: impl Fn(&AlternatingForm) -> AlternatingForm) -> Self {
        Self {
            value: f(&self.value),
            grad: self.grad.iter().map(&f).collect(),
            hess: self
                .hess
                .as_ref()
                .map(|h| h.iter().map(|row| row.iter().map(&f).collect()).collect()),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, TwistorError> {
        check_shape(self.dim(), self.degree(), &other.value)?;
        let hess = match (&self.hess, &other.hess) {
            (Some(a), Some(b)) => Some(
                a.iter()
                    .zip(b)
                    .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
                    .collect(),
            ),
            _ => None,
        };
        Ok(Self {
            value: &self.value + &other.value,
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(a, b)| a + b)
                .collect(),
            hess,
        })
    }
}

fn check_shape(dim: usize, degree: usize, f: &AlternatingForm) -> Result<(), TwistorError> {
    if f.dim() != dim || f.degree() != degree {
        return Err(TwistorError::Shape {
            dim,
            degree,
            got_dim: f.dim(),
            got_degree: f.degree(),
        });
    }
    Ok(())
}

/// `dψ = Σ e_i ∧ ∇_{e_i} ψ`.
pub fn d_from_jet(j: &CovariantJet) -> AlternatingForm {
    let n = j.dim();
    let terms: Vec<_> = (0..n)
        .map(|i| AlternatingForm::unit(n, i).wedge(&j.grad[i]))
        .collect();
    sum_forms(n, j.degree() + 1, &terms)
}

/// `δψ = -Σ e_i ⌟ ∇_{e_i} ψ`.
pub fn delta_from_jet(j: &CovariantJet) -> AlternatingForm {
    let n = j.dim();
    let p = j.degree().saturating_sub(1);
    let terms: Vec<_> = (0..n).map(|i| j.grad[i].interior_unit(i)).collect();
    sum_forms(n, p, &terms).scale(-1.0)
}

/// `d^cψ = Σ J e_i ∧ ∇_{e_i} ψ`.
pub fn dc_from_jet(f: &KaehlerFrame, j: &CovariantJet) -> AlternatingForm {
    let n = j.dim();
    let terms: Vec<_> = (0..n).map(|i| f.j_unit(i).wedge(&j.grad[i])).collect();
    sum_forms(n, j.degree() + 1, &terms)
}

/// `δ^cψ = -Σ J e_i ⌟ ∇_{e_i} ψ`.
pub fn deltac_from_jet(f: &KaehlerFrame, j: &CovariantJet) -> AlternatingForm {
    let n = j.dim();
    let p = j.degree().saturating_sub(1);
    let terms: Vec<_> = (0..n).map(|i| j.grad[i].contract(&f.j_unit(i))).collect();
    sum_forms(n, p, &terms).scale(-1.0)
}

/// The three `O(n)`-components of `∇ψ`.
#[derive(Debug, Clone)]
pub struct TwistorSplit {
    pub d_part: AlternatingForm,
    pub delta_part: AlternatingForm,
    /// `(Tψ)(e_i)` for each frame direction
    pub twistor_part: Vec<AlternatingForm>,
}

impl TwistorSplit {
    /// `(Tψ)(e_i) + 1/(p+1) e_i ⌟ dψ - 1/(n-p+1) e_i ∧ δψ`, which is `∇_{e_i}ψ`.
    pub fn reassemble(&self) -> Vec<AlternatingForm> {
        let n = self.d_part.dim();
        let p = self.d_part.degree() - 1;
        self.twistor_part
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut g = t.add_scaled(1.0 / (p + 1) as f64, &self.d_part.interior_unit(i));
                if p > 0 {
                    g -= &AlternatingForm::unit(n, i)
                        .wedge(&self.delta_part)
                        .scale(1.0 / (n - p + 1) as f64);
                }
                g
            })
            .collect()
    }
}

pub fn twistor_split(j: &CovariantJet) -> TwistorSplit {
    let n = j.dim();
    let p = j.degree();
    let d = d_from_jet(j);
    let delta = delta_from_jet(j);
    let twistor_part = (0..n)
        .map(|i| {
            let mut t = j.grad[i].add_scaled(-1.0 / (p + 1) as f64, &d.interior_unit(i));
            if p > 0 {
                t += &AlternatingForm::unit(n, i)
                    .wedge(&delta)
                    .scale(1.0 / (n - p + 1) as f64);
            }
            t
        })
        .collect();
    TwistorSplit {
        d_part: d,
        delta_part: delta,
        twistor_part,
    }
}

/// `|Tψ| / |∇ψ|`, in `[0, 1]`; zero exactly on twistor jets.
pub fn twistor_residual(j: &CovariantJet) -> f64 {
    let split = twistor_split(j);
    relative(family_norm(&split.twistor_part), j.grad_norm())
}

/// Hodge star applied to every entry of the jet.
pub fn hodge_dual_jet(j: &CovariantJet) -> CovariantJet {
    j.map(AlternatingForm::hodge_star)
}

/// `d<ψ, ω> = Σ <∇_{e_i}ψ, ω> e_i` (`ω` is parallel).
pub fn trace_gradient(f: &KaehlerFrame, j: &CovariantJet) -> Covector {
    let c: Vec<f64> = j.grad.iter().map(|g| g.inner(f.omega())).collect();
    AlternatingForm::covector(&c)
}

/// `γ ∧ J e_i - Jγ ∧ e_i - c γ(e_i) ω` for every direction.
pub fn gamma_equation(
    f: &KaehlerFrame,
    gamma: &Covector,
    omega_coeff: f64,
) -> Vec<AlternatingForm> {
    let n = f.n();
    let j_gamma = f.j_covector(gamma);
    let g = gamma.components();
    (0..n)
        .map(|i| {
            let mut rhs = gamma.wedge(&f.j_unit(i));
            rhs -= &j_gamma.wedge(&AlternatingForm::unit(n, i));
            rhs.add_scaled(-omega_coeff * g[i], f.omega())
        })
        .collect()
}

/// `|∇ψ - rhs| / max(|∇ψ|, |rhs|)` over all directions.
pub fn equation_defect(j: &CovariantJet, rhs: &[AlternatingForm]) -> f64 {
    relative(
        family_distance(&j.grad, rhs),
        j.grad_norm().max(family_norm(rhs)),
    )
}

fn require_degree(j: &CovariantJet, p: usize) -> Result<(), TwistorError> {
    if j.degree() != p {
        return Err(TwistorError::WrongDegree {
            expected: p,
            got: j.degree(),
        });
    }
    Ok(())
}

fn require_frame(f: &KaehlerFrame, j: &CovariantJet) -> Result<(), TwistorError> {
    f.check(j.value())?;
    Ok(())
}

/// Penalty `|Λψ| / |ψ|` for non-primitive values.
fn primitivity_penalty(f: &KaehlerFrame, value: &AlternatingForm) -> f64 {
    relative(f.lefschetz_lambda(value).norm(), value.norm())
}

/// Penalty for the part of `ψ` outside the `|p - q| = s` type.
fn type_penalty(f: &KaehlerFrame, value: &AlternatingForm, s: usize) -> f64 {
    relative(value.distance(&f.type_project(value, s)), value.norm())
}

/// Defect of `∇_X φ = γ ∧ JX - Jγ ∧ X - (2/m) γ(X) ω` with
/// `γ = m / (2(m²-1)) δ^cφ`, plus penalties for `Λφ ≠ 0` and for a non-(1,1)
/// value.
pub fn special2_residual(f: &KaehlerFrame, j: &CovariantJet) -> Result<f64, TwistorError> {
    require_frame(f, j)?;
    require_degree(j, 2)?;
    let m = f.m();
    if m < 2 {
        return Err(TwistorError::UnsupportedDimension(m));
    }
    let mf = m as f64;
    let gamma = deltac_from_jet(f, j).scale(mf / (2.0 * (mf * mf - 1.0)));
    let rhs = gamma_equation(f, &gamma, 2.0 / mf);
    Ok(
        equation_defect(j, &rhs)
            + primitivity_penalty(f, j.value())
            + type_penalty(f, j.value(), 0),
    )
}

/// Defect of the middle-degree equation
/// `∇_X ψ = -(m-1) JX ∧ τ - (m-1) (X ⌟ τ) ∧ ω + X ∧ Jτ`, `τ = δ^cψ / (m²-1)`,
/// plus penalties for `Λψ ≠ 0` and for leaving type `(m-1,1)+(1,m-1)`.
/// For `m = 2` this is the special 2-form equation.
pub fn specialm_residual(f: &KaehlerFrame, j: &CovariantJet) -> Result<f64, TwistorError> {
    require_frame(f, j)?;
    let m = f.m();
    require_degree(j, m)?;
    if m < 2 {
        return Err(TwistorError::UnsupportedDimension(m));
    }
    let n = f.n();
    let mf = m as f64;
    let tau = deltac_from_jet(f, j).scale(1.0 / (mf * mf - 1.0));
    let j_tau = f.j_extension(&tau);
    let rhs: Vec<_> = (0..n)
        .map(|i| {
            let x = AlternatingForm::unit(n, i);
            let mut r = f.j_unit(i).wedge(&tau).scale(-(mf - 1.0));
            r -= &tau.interior_unit(i).wedge(f.omega()).scale(mf - 1.0);
            r += &x.wedge(&j_tau);
            r
        })
        .collect();
    Ok(equation_defect(j, &rhs)
        + primitivity_penalty(f, j.value())
        + type_penalty(f, j.value(), m - 2))
}

/// Defect of `∇_X ψ = ½ (dσ ∧ JX - J dσ ∧ X)`.
pub fn hamiltonian_residual(
    f: &KaehlerFrame,
    j: &CovariantJet,
    sigma_grad: &Covector,
) -> Result<f64, TwistorError> {
    require_frame(f, j)?;
    require_degree(j, 2)?;
    let half = sigma_grad.scale(0.5);
    let rhs = gamma_equation(f, &half, 0.0);
    Ok(equation_defect(j, &rhs))
}

/// Defect of `∇_X u = γ ∧ JX - Jγ ∧ X - γ(X) ω` with `γ = J(δu) / (2m-1)`.
pub fn twistor2_characterization_residual(
    f: &KaehlerFrame,
    j: &CovariantJet,
) -> Result<f64, TwistorError> {
    require_frame(f, j)?;
    require_degree(j, 2)?;
    let gamma = f
        .j_covector(&delta_from_jet(j))
        .scale(1.0 / (2 * f.m() - 1) as f64);
    let rhs = gamma_equation(f, &gamma, 1.0);
    Ok(equation_defect(j, &rhs))
}

/// Coefficient `-(m-p) / (p(m²-1))` of `L^k f` in the structure form.
pub fn structure_trace_coefficient(m: usize, p: usize) -> f64 {
    let (mf, pf) = (m as f64, p as f64);
    -(mf - pf) / (pf * (mf * mf - 1.0))
}

/// `L^{k-1}φ - (m-p)/(p(m²-1)) f L^k(1)` with `p = 2k`, for a primitive
/// (1,1)-form `φ` and trace value `f`.
pub fn build_structure_form(
    f: &KaehlerFrame,
    phi: &AlternatingForm,
    fval: f64,
    k: usize,
) -> Result<AlternatingForm, TwistorError> {
    f.check(phi)?;
    if phi.degree() != 2 {
        return Err(TwistorError::WrongDegree {
            expected: 2,
            got: phi.degree(),
        });
    }
    let (m, n) = (f.m(), f.n());
    if m < 2 {
        return Err(TwistorError::UnsupportedDimension(m));
    }
    let p = 2 * k;
    if k == 0 || p > n - 2 {
        return Err(TwistorError::DegreeOutOfRange { p, max: n - 2 });
    }
    let tol = 1e-10 * phi.norm().max(1.0);
    let lambda = f.lefschetz_lambda(phi).norm();
    if lambda > tol {
        return Err(TwistorError::NotPrimitive(lambda));
    }
    let j = f.j_extension(phi).norm();
    if j > tol {
        return Err(TwistorError::NotInvariant(j));
    }
    let trace = f.l_power(&AlternatingForm::scalar(n, fval), k);
    Ok(f.l_power(phi, k - 1)
        .add_scaled(structure_trace_coefficient(m, p), &trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertDirection {
    /// `u = ψ - <ψ, ω>/2 ω`
    ToTwistor,
    /// `ψ = u - <u, ω>/(m-2) ω`, needs `m > 2`
    ToHamiltonian,
}

pub fn hamiltonian_twistor_convert(
    f: &KaehlerFrame,
    a: &AlternatingForm,
    direction: ConvertDirection,
) -> Result<AlternatingForm, TwistorError> {
    f.check(a)?;
    if a.degree() != 2 {
        return Err(TwistorError::WrongDegree {
            expected: 2,
            got: a.degree(),
        });
    }
    let trace = a.inner(f.omega());
    let shift = match direction {
        ConvertDirection::ToTwistor => trace / 2.0,
        ConvertDirection::ToHamiltonian => {
            if f.m() <= 2 {
                return Err(TwistorError::UnsupportedDimension(f.m()));
            }
            trace / (f.m() - 2) as f64
        }
    };
    Ok(a.add_scaled(-shift, f.omega()))
}

/// `|δu₀ + 3 J df| / max(|δu₀|, |df|)` in complex dimension two.
pub fn dim4_hamiltonian_condition(
    f: &KaehlerFrame,
    j: &CovariantJet,
    df: &Covector,
) -> Result<f64, TwistorError> {
    require_frame(f, j)?;
    if f.m() != 2 {
        return Err(TwistorError::UnsupportedDimension(f.m()));
    }
    require_degree(j, 2)?;
    let delta = delta_from_jet(j);
    let defect = delta.add_scaled(3.0, &f.j_covector(df)).norm();
    Ok(relative(defect, delta.norm().max(df.norm())))
}

/// For jets of the summands of a decomposition of a middle-degree form, checks
/// that the sum passes the twistor test exactly when every summand does.
pub fn middim_split_check(
    f: &KaehlerFrame,
    jets: &[CovariantJet],
    tol: f64,
) -> Result<bool, TwistorError> {
    let first = jets.first().ok_or(TwistorError::Empty)?;
    require_frame(f, first)?;
    require_degree(first, f.m())?;
    let mut total = first.clone();
    for j in &jets[1..] {
        total = total.checked_add(j)?;
    }
    let sum_ok = twistor_residual(&total) < tol;
    let all_ok = jets.iter().all(|j| twistor_residual(j) < tol);
    Ok(sum_ok == all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::BasisIndex;

    fn e(n: usize, positions: &[usize]) -> AlternatingForm {
        AlternatingForm::basis(n, BasisIndex::from_positions(positions))
    }

    fn jet_of_gamma(
        f: &KaehlerFrame,
        value: AlternatingForm,
        gamma: &Covector,
        c: f64,
    ) -> CovariantJet {
        CovariantJet::new(value, gamma_equation(f, gamma, c)).unwrap()
    }

    #[test]
    fn parallel_jet_has_no_derivatives() {
        let f = KaehlerFrame::new(2).unwrap();
        let j = CovariantJet::parallel(f.omega().clone());
        assert_eq!(d_from_jet(&j).nnz(), 0);
        assert_eq!(delta_from_jet(&j).nnz(), 0);
        assert_eq!(twistor_residual(&j), 0.0);
        let split = twistor_split(&j);
        assert_eq!(family_norm(&split.twistor_part), 0.0);
        assert_eq!(
            special2_residual(&f, &CovariantJet::parallel(&e(4, &[0, 1]) - &e(4, &[2, 3])))
                .unwrap(),
            0.0
        );
        assert_eq!(twistor2_characterization_residual(&f, &j).unwrap(), 0.0);
    }

    #[test]
    fn jet_of_function_has_gradient_as_differential() {
        let c = [1.0, -2.0, 0.5];
        let grad = c.iter().map(|ci| AlternatingForm::scalar(3, *ci)).collect();
        let j = CovariantJet::new(AlternatingForm::scalar(3, 4.0), grad).unwrap();
        assert_eq!(d_from_jet(&j), AlternatingForm::covector(&c));
        assert_eq!(delta_from_jet(&j).nnz(), 0);
    }

    #[test]
    fn identity_tensor_has_codifferential_minus_n() {
        let n = 5;
        let grad = (0..n).map(|i| AlternatingForm::unit(n, i)).collect();
        let j = CovariantJet::new(AlternatingForm::unit(n, 0), grad).unwrap();
        assert_eq!(delta_from_jet(&j), AlternatingForm::scalar(n, -(n as f64)));
    }

    #[test]
    fn killing_jet_splits_into_d_only() {
        // ∇ψ skew: ∇_{e_i} e^k = A_{ik} with A skew -> Killing 1-form
        let n = 4;
        let a = [
            [0.0, 1.0, -2.0, 0.5],
            [-1.0, 0.0, 0.3, 0.0],
            [2.0, -0.3, 0.0, 1.5],
            [-0.5, 0.0, -1.5, 0.0],
        ];
        let grad = (0..n).map(|i| AlternatingForm::covector(&a[i])).collect();
        let j = CovariantJet::new(AlternatingForm::unit(n, 2), grad).unwrap();
        let split = twistor_split(&j);
        assert!(split.delta_part.norm() < 1e-15);
        assert!(family_norm(&split.twistor_part) < 1e-15);
        assert!(split.d_part.distance(&d_from_jet(&j)) < 1e-15);
    }

    #[test]
    fn pure_cartan_component_has_residual_one() {
        // ∇_{e_1} ψ = e_2, others zero, for the 1-form ψ = e_1: symmetric traceless part
        // mixed with others; build one lying in Λ^{1,1}: A = e1⊗e2 + e2⊗e1
        let n = 3;
        let mut grad = vec![AlternatingForm::zero(n, 1); n];
        grad[0] = AlternatingForm::unit(n, 1);
        grad[1] = AlternatingForm::unit(n, 0);
        let j = CovariantJet::new(AlternatingForm::unit(n, 0), grad).unwrap();
        assert!((twistor_residual(&j) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn special2_rejects_complex_dimension_one() {
        let f = KaehlerFrame::new(1).unwrap();
        let j = CovariantJet::parallel(f.omega().clone());
        assert_eq!(
            special2_residual(&f, &j),
            Err(TwistorError::UnsupportedDimension(1))
        );
    }

    #[test]
    fn omega_is_penalized_as_special_form() {
        for m in 2..=4 {
            let f = KaehlerFrame::new(m).unwrap();
            let j = CovariantJet::parallel(f.omega().clone());
            assert!(special2_residual(&f, &j).unwrap() >= 1.0);
        }
    }

    #[test]
    fn special_equation_jets_pass() {
        let f = KaehlerFrame::new(3).unwrap();
        let value = &e(6, &[0, 1]) - &e(6, &[2, 3]);
        let gamma = AlternatingForm::covector(&[0.3, -1.0, 0.2, 0.7, -0.4, 0.1]);
        let j = jet_of_gamma(&f, value, &gamma, 2.0 / 3.0);
        assert!(special2_residual(&f, &j).unwrap() < 1e-14);
    }

    #[test]
    fn specialm_matches_special2_in_complex_dimension_two() {
        let f = KaehlerFrame::new(2).unwrap();
        let value = &e(4, &[0, 1]).scale(0.3) + &e(4, &[0, 2]);
        let grad = (0..4)
            .map(|i| {
                AlternatingForm::from_dense(
                    4,
                    2,
                    &[0.1 * i as f64, 1.0, -0.5, 0.2, 0.3 - i as f64, 0.7],
                )
            })
            .collect();
        let j = CovariantJet::new(value, grad).unwrap();
        let a = special2_residual(&f, &j).unwrap();
        let b = specialm_residual(&f, &j).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn specialm_penalizes_wrong_type() {
        // (3,0)+(0,3) real part in m = 3
        let f = KaehlerFrame::new(3).unwrap();
        let value =
            &(&e(6, &[0, 2, 4]) - &e(6, &[0, 3, 5])) - &(&e(6, &[1, 2, 5]) + &e(6, &[1, 3, 4]));
        assert!(f.type_project(&value, 3).distance(&value) < 1e-14);
        let grad = (0..6)
            .map(|i| AlternatingForm::unit(6, i).wedge(&e(6, &[(i + 1) % 6, (i + 3) % 6])))
            .collect();
        let j = CovariantJet::new(value, grad).unwrap();
        let r = specialm_residual(&f, &j).unwrap();
        assert!(r >= 1.0, "{r}");
    }

    #[test]
    fn convert_examples() {
        for m in 2..=4 {
            let f = KaehlerFrame::new(m).unwrap();
            let u =
                hamiltonian_twistor_convert(&f, f.omega(), ConvertDirection::ToTwistor).unwrap();
            assert!(u.distance(&f.omega().scale(1.0 - m as f64 / 2.0)) < 1e-14);
        }
        let f = KaehlerFrame::new(3).unwrap();
        let prim = &e(6, &[0, 2]) + &e(6, &[1, 3]);
        for dir in [ConvertDirection::ToTwistor, ConvertDirection::ToHamiltonian] {
            assert_eq!(hamiltonian_twistor_convert(&f, &prim, dir).unwrap(), prim);
        }
        let f2 = KaehlerFrame::new(2).unwrap();
        assert_eq!(
            hamiltonian_twistor_convert(&f2, f2.omega(), ConvertDirection::ToHamiltonian),
            Err(TwistorError::UnsupportedDimension(2))
        );
    }

    #[test]
    fn structure_form_examples() {
        let f = KaehlerFrame::new(3).unwrap();
        let phi = &e(6, &[0, 1]) - &e(6, &[4, 5]);
        let u1 = build_structure_form(&f, &phi, 2.0, 1).unwrap();
        let expected = phi.add_scaled(-(1.0 / 16.0) * 2.0, f.omega());
        assert!(u1.distance(&expected) < 1e-15);
        assert_eq!(structure_trace_coefficient(3, 4), 1.0 / 32.0);
        let u2 = build_structure_form(&f, &phi, 1.0, 2).unwrap();
        let ww = f.lefschetz_l(f.omega());
        let expected = f.lefschetz_l(&phi).add_scaled(1.0 / 32.0, &ww);
        assert!(u2.distance(&expected) < 1e-15);
        assert_eq!(
            build_structure_form(&f, &phi, 0.0, 2).unwrap(),
            f.lefschetz_l(&phi)
        );
        assert!(matches!(
            build_structure_form(&f, &phi, 0.0, 3),
            Err(TwistorError::DegreeOutOfRange { .. })
        ));
        assert!(matches!(
            build_structure_form(&f, f.omega(), 0.0, 1),
            Err(TwistorError::NotPrimitive(_))
        ));
        let not_invariant = &e(6, &[0, 2]) - &e(6, &[1, 3]);
        assert!(matches!(
            build_structure_form(&f, &not_invariant, 0.0, 1),
            Err(TwistorError::NotInvariant(_))
        ));
    }

    #[test]
    fn dim4_condition_examples() {
        let f = KaehlerFrame::new(2).unwrap();
        let value = &e(4, &[0, 1]) - &e(4, &[2, 3]);
        let j = CovariantJet::parallel(value.clone());
        assert_eq!(
            dim4_hamiltonian_condition(&f, &j, &AlternatingForm::zero(4, 1)).unwrap(),
            0.0
        );

        // build δu₀ = -3 J df from a twistor jet with prescribed δ
        let df = AlternatingForm::covector(&[0.4, -0.1, 0.9, 0.3]);
        let delta = f.j_covector(&df).scale(-3.0);
        let j = CovariantJet::twistor_from_differentials(
            value.clone(),
            &AlternatingForm::zero(4, 3),
            &delta,
        )
        .unwrap();
        assert!(dim4_hamiltonian_condition(&f, &j, &df).unwrap() < 1e-15);

        let mut last = 0.0;
        for eps in [1e-3, 1e-2, 1e-1] {
            let bent = delta.add_scaled(eps, &AlternatingForm::unit(4, 0));
            let j = CovariantJet::twistor_from_differentials(
                value.clone(),
                &AlternatingForm::zero(4, 3),
                &bent,
            )
            .unwrap();
            let r = dim4_hamiltonian_condition(&f, &j, &df).unwrap();
            assert!(r > last);
            last = r;
        }
        let f3 = KaehlerFrame::new(3).unwrap();
        let j3 = CovariantJet::parallel(f3.omega().clone());
        assert_eq!(
            dim4_hamiltonian_condition(&f3, &j3, &AlternatingForm::zero(6, 1)),
            Err(TwistorError::UnsupportedDimension(3))
        );
    }

    #[test]
    fn split_check_examples() {
        let f = KaehlerFrame::new(2).unwrap();
        let a = CovariantJet::parallel(&e(4, &[0, 1]) - &e(4, &[2, 3]));
        let b = CovariantJet::parallel(f.omega().clone());
        assert!(middim_split_check(&f, &[a.clone(), b.clone()], 1e-10).unwrap());

        let mut grad = vec![AlternatingForm::zero(4, 2); 4];
        grad[0] = e(4, &[0, 1]);
        grad[1] = e(4, &[2, 3]).scale(-1.0);
        let defect = CovariantJet::new(f.omega().clone(), grad).unwrap();
        assert!(twistor_residual(&defect) > 0.1);
        assert!(middim_split_check(&f, &[a, defect], 1e-10).unwrap());

        assert_eq!(middim_split_check(&f, &[], 1e-10), Err(TwistorError::Empty));
        let wrong = CovariantJet::parallel(AlternatingForm::unit(4, 0));
        assert!(matches!(
            middim_split_check(&f, &[wrong], 1e-10),
            Err(TwistorError::WrongDegree { .. })
        ));
    }

    #[test]
    fn jet_shape_is_validated() {
        let grad = vec![AlternatingForm::zero(4, 1); 3];
        assert!(matches!(
            CovariantJet::new(AlternatingForm::unit(4, 0), grad),
            Err(TwistorError::DirectionCount { .. })
        ));
        let grad = vec![AlternatingForm::zero(4, 2); 4];
        assert!(matches!(
            CovariantJet::new(AlternatingForm::unit(4, 0), grad),
            Err(TwistorError::Shape { .. })
        ));
    }
}
