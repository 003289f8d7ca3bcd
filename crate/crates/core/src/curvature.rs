//! The curvature endomorphism `q(R)` and the second-order identities built on
//! it.
//!
//! Conventions: `R_{X,Y} = [∇_X, ∇_Y] - ∇_{[X,Y]}`, so that the sectional
//! curvature is `<R_{X,Y} Y, X>`. A [`CurvatureOperator`] stores the symmetric
//! matrix `M[(ij),(kl)] = <R_{e_i,e_j} e_k, e_l>` over pairs `i < j`; with
//! this sign `R(e_i ∧ e_j) = Σ_{k<l} M[(ij),(kl)] e_k ∧ e_l` and
//! `q(R) = Σ_{i<j} (e_i ∧ e_j) • R(e_i ∧ e_j) •`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::exterior::{sum_forms, AlternatingForm};
use crate::kaehler::{KaehlerError, KaehlerFrame};
use crate::twistor::{relative, CovariantJet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("matrix is {got}x{got}, expected {expected}x{expected} for dimension {dim}")]
    Size {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("operator is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("first Bianchi identity fails (defect {0:e})")]
    Bianchi(f64),
    #[error("dimension mismatch: operator acts on R^{expected}, got R^{got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expected degree {expected}, got {got}")]
    WrongDegree { expected: usize, got: usize },
    #[error("jet carries no second derivatives")]
    MissingHessian,
    #[error("bivector basis has {got} elements, expected {expected}")]
    BasisSize { expected: usize, got: usize },
    #[error(transparent)]
    Kaehler(#[from] KaehlerError),
}

/// Pairs `(i, j)` with `i < j < n` in lexicographic order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Position of `(i, j)`, `i < j`, in [`pairs`].
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn bivector(n: usize, i: usize, j: usize) -> AlternatingForm {
    AlternatingForm::from_terms(n, 2, [((1u32 << i) | (1u32 << j), 1.0)])
}

/// `(X ∧ Y) • a = X ∧ (Y ⌟ a) - Y ∧ (X ⌟ a)`, extended linearly in the
/// bivector.
pub fn bivector_action(b: &AlternatingForm, a: &AlternatingForm) -> AlternatingForm {
    assert_eq!(b.degree(), 2, "bivector_action: degree");
    let n = a.dim();
    let p = a.degree();
    if p == 0 {
        return AlternatingForm::zero(n, 0);
    }
    let parts: Vec<_> = b
        .terms()
        .flat_map(|(idx, c)| {
            let mut pos = idx.positions();
            let (k, l) = (pos.next().unwrap(), pos.next().unwrap());
            let ek = AlternatingForm::unit(n, k);
            let el = AlternatingForm::unit(n, l);
            [
                ek.wedge(&a.interior_unit(l)).scale(c),
                el.wedge(&a.interior_unit(k)).scale(-c),
            ]
        })
        .collect();
    sum_forms(n, p, &parts)
}

/// Derivation extension `Σ_k (A e_k) ∧ (e_k ⌟ a)` of a vector endomorphism,
/// `A e_k = Σ_l A[(l, k)] e_l`.
pub fn endomorphism_action(a_map: &DMatrix<f64>, a: &AlternatingForm) -> AlternatingForm {
    let n = a.dim();
    assert_eq!(a_map.shape(), (n, n), "endomorphism_action: shape");
    if a.degree() == 0 {
        return AlternatingForm::zero(n, 0);
    }
    let parts: Vec<_> = (0..n)
        .map(|k| AlternatingForm::covector(a_map.column(k).as_slice()).wedge(&a.interior_unit(k)))
        .collect();
    sum_forms(n, a.degree(), &parts)
}

/// A curvature tensor viewed as a symmetric operator on `Λ²`.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    n: usize,
    matrix: DMatrix<f64>,
    /// `R(e_i ∧ e_j)` for every pair
    images: Vec<AlternatingForm>,
}

impl CurvatureOperator {
    /// Validates symmetry and the first Bianchi identity to `1e-10` relative.
    pub fn new(n: usize, matrix: DMatrix<f64>) -> Result<Self, CurvatureError> {
        Self::with_tolerance(n, matrix, 1e-10)
    }

    pub fn with_tolerance(
        n: usize,
        matrix: DMatrix<f64>,
        tol: f64,
    ) -> Result<Self, CurvatureError> {
        let expected = n * n.saturating_sub(1) / 2;
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(CurvatureError::Size {
                dim: n,
                expected,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        let scale = matrix.amax().max(1.0);
        let op = Self::assemble(n, matrix);
        let sym = op.symmetry_defect();
        if sym > tol * scale {
            return Err(CurvatureError::NotSymmetric(sym));
        }
        let bianchi = op.bianchi_defect();
        if bianchi > tol * scale {
            return Err(CurvatureError::Bianchi(bianchi));
        }
        Ok(op)
    }

    fn assemble(n: usize, matrix: DMatrix<f64>) -> Self {
        let ps = pairs(n);
        let images = (0..ps.len())
            .map(|a| {
                AlternatingForm::from_terms(
                    n,
                    2,
                    ps.iter()
                        .enumerate()
                        .map(|(b, (k, l))| ((1u32 << k) | (1u32 << l), matrix[(a, b)])),
                )
            })
            .collect();
        Self { n, matrix, images }
    }

    /// From the tensor `r(i, j, k, l) = <R_{e_i,e_j} e_k, e_l>`.
    pub fn from_tensor(
        n: usize,
        r: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, CurvatureError> {
        let ps = pairs(n);
        let matrix = DMatrix::from_fn(ps.len(), ps.len(), |a, b| {
            let ((i, j), (k, l)) = (ps[a], ps[b]);
            r(i, j, k, l)
        });
        Self::new(n, matrix)
    }

    /// From a vector-valued curvature `(X, Y, Z) ↦ R_{X,Y} Z`.
    pub fn from_vector_curvature(
        n: usize,
        r: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
    ) -> Result<Self, CurvatureError> {
        let unit = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        Self::from_tensor(n, |i, j, k, l| r(&unit(i), &unit(j), &unit(k))[l])
    }

    pub fn flat(n: usize) -> Self {
        let size = n * n.saturating_sub(1) / 2;
        Self::assemble(n, DMatrix::zeros(size, size))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `<R_{e_i,e_j} e_k, e_l>` for arbitrary indices.
    pub fn tensor(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let (a, sa) = match i.cmp(&j) {
            std::cmp::Ordering::Less => (pair_index(self.n, i, j), 1.0),
            std::cmp::Ordering::Greater => (pair_index(self.n, j, i), -1.0),
            std::cmp::Ordering::Equal => return 0.0,
        };
        let (b, sb) = match k.cmp(&l) {
            std::cmp::Ordering::Less => (pair_index(self.n, k, l), 1.0),
            std::cmp::Ordering::Greater => (pair_index(self.n, l, k), -1.0),
            std::cmp::Ordering::Equal => return 0.0,
        };
        sa * sb * self.matrix[(a, b)]
    }

    /// `R_{e_i,e_j}` as a matrix, `A[(l, k)] = <R_{e_i,e_j} e_k, e_l>`.
    pub fn endomorphism(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |l, k| self.tensor(i, j, k, l))
    }

    /// `R_{X,Y} Z`.
    pub fn apply_vectors(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..n {
                    if z[k] == 0.0 {
                        continue;
                    }
                    for (l, o) in out.iter_mut().enumerate() {
                        *o += xy * z[k] * self.tensor(i, j, k, l);
                    }
                }
            }
        }
        out
    }

    /// `<R_{X,Y} Y, X> / (|X|²|Y|² - <X,Y>²)`.
    pub fn sectional_curvature(&self, x: &[f64], y: &[f64]) -> f64 {
        let ryy = self.apply_vectors(x, y, y);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        let area = dot(x, x) * dot(y, y) - dot(x, y).powi(2);
        dot(&ryy, x) / area
    }

    /// `R(b)` for a bivector `b`.
    pub fn apply_bivector(&self, b: &AlternatingForm) -> AlternatingForm {
        let parts: Vec<_> = b
            .terms()
            .map(|(idx, c)| {
                let mut pos = idx.positions();
                let (i, j) = (pos.next().unwrap(), pos.next().unwrap());
                self.images[pair_index(self.n, i, j)].scale(c)
            })
            .collect();
        sum_forms(self.n, 2, &parts)
    }

    /// `Ric(e_j, e_l) = Σ_i <R_{e_i,e_j} e_l, e_i>`.
    pub fn ricci(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |j, l| {
            (0..self.n).map(|i| self.tensor(i, j, l, i)).sum()
        })
    }

    /// `max |M - M^T|`.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `max |R_{ijkl} + R_{jkil} + R_{kijl}|`.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in 0..n {
                        let s = self.tensor(i, j, k, l)
                            + self.tensor(j, k, i, l)
                            + self.tensor(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// The same tensor in the orthonormal frame `f_a = Σ_i o[(i, a)] e_i`.
    pub fn change_frame(&self, o: &DMatrix<f64>) -> Self {
        let n = self.n;
        assert_eq!(o.shape(), (n, n), "change_frame: shape");
        let ps = pairs(n);
        let matrix = DMatrix::from_fn(ps.len(), ps.len(), |a, b| {
            let ((p, q), (r, s)) = (ps[a], ps[b]);
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let w = o[(i, p)] * o[(j, q)];
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        for l in 0..n {
                            acc += w * o[(k, r)] * o[(l, s)] * self.tensor(i, j, k, l);
                        }
                    }
                }
            }
            acc
        });
        Self::assemble(n, matrix)
    }

    /// `q(R) a = Σ_{i<j} (e_i ∧ e_j) • R(e_i ∧ e_j) • a`.
    pub fn q_apply(&self, a: &AlternatingForm) -> AlternatingForm {
        assert_eq!(a.dim(), self.n, "q_apply: dimension");
        let parts: Vec<_> = pairs(self.n)
            .into_iter()
            .zip(&self.images)
            .filter(|(_, img)| img.nnz() > 0)
            .map(|((i, j), img)| bivector_action(&bivector(self.n, i, j), &bivector_action(img, a)))
            .collect();
        sum_forms(self.n, a.degree(), &parts)
    }

    /// `q(R)` through an arbitrary orthonormal basis `{B_α}` of `Λ²`.
    pub fn q_apply_in_basis(
        &self,
        basis: &[AlternatingForm],
        a: &AlternatingForm,
    ) -> Result<AlternatingForm, CurvatureError> {
        let expected = self.images.len();
        if basis.len() != expected {
            return Err(CurvatureError::BasisSize {
                expected,
                got: basis.len(),
            });
        }
        self.check_dim(a.dim())?;
        let parts: Vec<_> = basis
            .iter()
            .map(|b| bivector_action(b, &bivector_action(&self.apply_bivector(b), a)))
            .collect();
        Ok(sum_forms(self.n, a.degree(), &parts))
    }

    /// The raw double sum `Σ_{i,j} e_j ∧ e_i ⌟ R_{e_i,e_j} a`.
    pub fn q_double_sum(&self, a: &AlternatingForm) -> AlternatingForm {
        let n = self.n;
        if a.degree() == 0 {
            return AlternatingForm::zero(n, 0);
        }
        let mut parts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let ra = endomorphism_action(&self.endomorphism(i, j), a);
                parts.push(AlternatingForm::unit(n, j).wedge(&ra.interior_unit(i)));
            }
        }
        sum_forms(n, a.degree(), &parts)
    }

    fn check_dim(&self, n: usize) -> Result<(), CurvatureError> {
        if n != self.n {
            return Err(CurvatureError::DimensionMismatch {
                expected: self.n,
                got: n,
            });
        }
        Ok(())
    }
}

/// `q(R) a`; see [`CurvatureOperator::q_apply`].
pub fn qr_apply(r: &CurvatureOperator, a: &AlternatingForm) -> AlternatingForm {
    r.q_apply(a)
}

/// `R_{X,Y} Z = -(X ∧ Y + JX ∧ JY) Z - 2 ω(X, Y) JZ` with
/// `(X ∧ Y) Z = <X, Z> Y - <Y, Z> X`.
pub fn cpm_vector_curvature(f: &KaehlerFrame, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let (jx, jy, jz) = (f.j_vector(x), f.j_vector(y), f.j_vector(z));
    let w = f.omega_pair(x, y);
    let (xz, yz, jxz, jyz) = (dot(x, z), dot(y, z), dot(&jx, z), dot(&jy, z));
    (0..x.len())
        .map(|i| -(xz * y[i] - yz * x[i]) - (jxz * jy[i] - jyz * jx[i]) - 2.0 * w * jz[i])
        .collect()
}

/// Curvature of the Fubini–Study metric with holomorphic sectional curvature
/// 4, in the adapted frame.
pub fn cpm_curvature(m: usize) -> Result<CurvatureOperator, CurvatureError> {
    let f = KaehlerFrame::new(m)?;
    CurvatureOperator::from_vector_curvature(f.n(), |x, y, z| cpm_vector_curvature(&f, x, y, z))
}

/// `δdψ`, `dδψ` and `∇*∇ψ` from the second covariant derivatives.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub delta_d: AlternatingForm,
    pub d_delta: AlternatingForm,
    pub rough: AlternatingForm,
}

impl SecondOrder {
    /// `Δψ = δdψ + dδψ`.
    pub fn laplacian(&self) -> AlternatingForm {
        &self.delta_d + &self.d_delta
    }
}

pub fn second_order(j: &CovariantJet) -> Result<SecondOrder, CurvatureError> {
    let hess = j.hess().ok_or(CurvatureError::MissingHessian)?;
    let (n, p) = (j.dim(), j.degree());
    let mut dd = Vec::new();
    let mut ddl = Vec::new();
    for (i, row) in hess.iter().enumerate() {
        let ei = AlternatingForm::unit(n, i);
        for (k, h) in row.iter().enumerate() {
            if p < n {
                dd.push(AlternatingForm::unit(n, k).wedge(h).interior_unit(i));
            }
            if p > 0 {
                ddl.push(ei.wedge(&h.interior_unit(k)));
            }
        }
    }
    let diag: Vec<_> = (0..n).map(|i| hess[i][i].clone()).collect();
    Ok(SecondOrder {
        delta_d: sum_forms(n, p, &dd).scale(-1.0),
        d_delta: sum_forms(n, p, &ddl).scale(-1.0),
        rough: sum_forms(n, p, &diag).scale(-1.0),
    })
}

/// `T*Tψ = -Σ_i ∇_{e_i}(Tψ)(e_i)`, from the second derivatives.
pub fn twistor_laplacian(j: &CovariantJet) -> Result<AlternatingForm, CurvatureError> {
    let hess = j.hess().ok_or(CurvatureError::MissingHessian)?;
    let (n, p) = (j.dim(), j.degree());
    let (a, b) = ((1.0 / (p + 1) as f64), (1.0 / (n - p + 1) as f64));
    let parts: Vec<_> = (0..n)
        .map(|i| {
            let ei = AlternatingForm::unit(n, i);
            let nabla_d = sum_forms(
                n,
                p + 1,
                &(0..n)
                    .map(|k| AlternatingForm::unit(n, k).wedge(&hess[i][k]))
                    .collect::<Vec<_>>(),
            );
            let mut t = hess[i][i].add_scaled(-a, &nabla_d.interior_unit(i));
            if p > 0 {
                let nabla_delta = sum_forms(
                    n,
                    p - 1,
                    &(0..n)
                        .map(|k| hess[i][k].interior_unit(k))
                        .collect::<Vec<_>>(),
                )
                .scale(-1.0);
                t += &ei.wedge(&nabla_delta).scale(b);
            }
            t
        })
        .collect();
    Ok(sum_forms(n, p, &parts).scale(-1.0))
}

/// Defect of `∇*∇ = 1/(p+1) δd + 1/(n-p+1) dδ + T*T`.
pub fn rough_laplacian_split_residual(j: &CovariantJet) -> Result<f64, CurvatureError> {
    let s = second_order(j)?;
    let tt = twistor_laplacian(j)?;
    let (n, p) = (j.dim() as f64, j.degree() as f64);
    let rhs = s
        .delta_d
        .scale(1.0 / (p + 1.0))
        .add_scaled(1.0 / (n - p + 1.0), &s.d_delta)
        + tt;
    Ok(relative(
        s.rough.distance(&rhs),
        s.rough.norm().max(rhs.norm()),
    ))
}

fn check_jet(r: &CurvatureOperator, j: &CovariantJet) -> Result<(), CurvatureError> {
    r.check_dim(j.dim())
}

/// Defect of `q(R)ψ = p/(p+1) δdψ + (n-p)/(n-p+1) dδψ`.
pub fn integrability_residual(
    r: &CurvatureOperator,
    j: &CovariantJet,
) -> Result<f64, CurvatureError> {
    check_jet(r, j)?;
    let s = second_order(j)?;
    let (n, p) = (j.dim() as f64, j.degree() as f64);
    let lhs = r.q_apply(j.value());
    let rhs = s
        .delta_d
        .scale(p / (p + 1.0))
        .add_scaled((n - p) / (n - p + 1.0), &s.d_delta);
    Ok(relative(lhs.distance(&rhs), lhs.norm().max(rhs.norm())))
}

/// Defect of `Δψ = ∇*∇ψ + q(R)ψ`.
pub fn weitzenboeck_residual(
    r: &CurvatureOperator,
    j: &CovariantJet,
) -> Result<f64, CurvatureError> {
    check_jet(r, j)?;
    let s = second_order(j)?;
    let lap = s.laplacian();
    let q = r.q_apply(j.value());
    let defect = lap.add_scaled(-1.0, &s.rough).add_scaled(-1.0, &q).norm();
    Ok(relative(
        defect,
        lap.norm().max(s.rough.norm()).max(q.norm()),
    ))
}

/// Defect of `Δψ = (p+1)/p q(R)ψ` plus `|δψ|` relative to the gradient: a
/// Killing form passes, any other jet does not.
pub fn killing_form_residual(
    r: &CurvatureOperator,
    j: &CovariantJet,
) -> Result<f64, CurvatureError> {
    check_jet(r, j)?;
    let p = j.degree();
    if p == 0 {
        return Err(CurvatureError::WrongDegree {
            expected: 1,
            got: 0,
        });
    }
    let s = second_order(j)?;
    let lap = s.laplacian();
    let q = r.q_apply(j.value()).scale((p + 1) as f64 / p as f64);
    let eq = relative(lap.distance(&q), lap.norm().max(q.norm()));
    let coclosed = relative(crate::twistor::delta_from_jet(j).norm(), j.grad_norm());
    Ok(eq + coclosed)
}

/// Defect of `Δu = c q(R) u` for a middle-degree jet.
pub fn middim_residual_with_coefficient(
    r: &CurvatureOperator,
    j: &CovariantJet,
    coefficient: f64,
) -> Result<f64, CurvatureError> {
    check_jet(r, j)?;
    let m = j.dim() / 2;
    if j.dim() % 2 != 0 || j.degree() != m {
        return Err(CurvatureError::WrongDegree {
            expected: m,
            got: j.degree(),
        });
    }
    let lap = second_order(j)?.laplacian();
    let q = r.q_apply(j.value()).scale(coefficient);
    Ok(relative(lap.distance(&q), lap.norm().max(q.norm())))
}

/// Defect of `Δu = (m+1)/m q(R) u`.
pub fn middim_characterization_residual(
    r: &CurvatureOperator,
    j: &CovariantJet,
    m: usize,
) -> Result<f64, CurvatureError> {
    if j.dim() != 2 * m || j.degree() != m {
        return Err(CurvatureError::WrongDegree {
            expected: m,
            got: j.degree(),
        });
    }
    middim_residual_with_coefficient(r, j, (m + 1) as f64 / m as f64)
}
