//! Finite-difference geometry on model Kähler charts.
//!
//! Points are real coordinates `x ∈ R^{2m}` with `z_j = x_{2j} + i x_{2j+1}`,
//! and form fields are evaluated in the coordinate coframe `dx^a`. The complex
//! structure is constant in these coordinates, `J ∂_{2j} = ∂_{2j+1}`. Pointwise
//! checks run in an orthonormal frame adapted to `J`, built at each point by
//! Gram–Schmidt in the metric.

mod checks;
mod field;
mod projective;
mod sample;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::curvature::CurvatureError;
use crate::exterior::AlternatingForm;
use crate::kaehler::KaehlerError;
use crate::twistor::TwistorError;

pub use checks::*;
pub use field::*;
pub use projective::*;
pub use sample::*;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("complex dimension must be at least 1")]
    ZeroDimension,
    #[error("point has {got} coordinates, expected {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("field has shape (n={got_dim}, p={got_degree}), expected (n={dim}, p={degree})")]
    FieldShape {
        dim: usize,
        degree: usize,
        got_dim: usize,
        got_degree: usize,
    },
    #[error("non-finite field value at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("finite-difference step {0:e} outside [1e-4, 1e-1]")]
    StepOutOfRange(f64),
    #[error("finite-difference order {0} not supported (use 2 or 4)")]
    Order(u8),
    #[error("sample point {index} has |x| = {norm} > {radius}")]
    OutsideBall {
        index: usize,
        norm: f64,
        radius: f64,
    },
    #[error("sample plan is empty")]
    EmptyPlan,
    #[error("metric is not positive definite at {0:?}")]
    DegenerateMetric(Vec<f64>),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not traceless (trace {0:e})")]
    NotTraceless(f64),
    #[error("matrix must be {expected}x{expected}, got {rows}x{cols}")]
    MatrixShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("operation needs the {expected} model, got {got}")]
    WrongModel {
        expected: &'static str,
        got: &'static str,
    },
    #[error("d(δ^c φ) is not small enough for line integration (relative curl {0:e})")]
    NotClosed(f64),
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Twistor(#[from] TwistorError),
    #[error(transparent)]
    Kaehler(#[from] KaehlerError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

/// `Γ^k_{ij}` at a point, symmetric in `i, j`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// `½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij})`.
    pub fn from_metric(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = ginv.nrows();
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in i..n {
                let lower: Vec<f64> = (0..n)
                    .map(|l| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                    .collect();
                for k in 0..n {
                    let v: f64 = (0..n).map(|l| ginv[(k, l)] * lower[l]).sum();
                    out.set(k, i, j, v);
                    out.set(k, j, i, v);
                }
            }
        }
        out
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Orthonormal frame `E_α = Σ_a P[(a, α)] ∂_a` with `E_{2i+1} = J E_{2i}`.
#[derive(Debug, Clone)]
pub struct PointFrame {
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    pull: DMatrix<f64>,
    push: DMatrix<f64>,
}

impl PointFrame {
    /// Columns are the frame vectors in coordinates.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.p_inv
    }

    /// Coordinate-coframe form to frame components.
    pub fn to_frame(&self, a: &AlternatingForm) -> AlternatingForm {
        a.transform(&self.pull)
    }

    /// Frame components back to the coordinate coframe.
    pub fn to_coords(&self, a: &AlternatingForm) -> AlternatingForm {
        a.transform(&self.push)
    }

    /// Frame components of a coordinate vector.
    pub fn vector_to_frame(&self, v: &[f64]) -> Vec<f64> {
        (&self.p_inv * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }
}

#[derive(Clone)]
enum Model {
    FubiniStudy,
    FlatTorus,
    Conformal {
        base: Arc<ChartGeometry>,
        lambda: FormField,
    },
}

/// A Riemannian metric with compatible constant complex structure on a
/// coordinate patch of `R^{2m}`.
#[derive(Clone)]
pub struct ChartGeometry {
    m: usize,
    model: Model,
}

impl std::fmt::Debug for ChartGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChartGeometry")
            .field("m", &self.m)
            .field("model", &self.tag())
            .finish()
    }
}

/// Step used to differentiate a conformal factor.
const LAMBDA_STEP: f64 = 1e-3;

impl ChartGeometry {
    /// Affine chart of `CP^m` with `h_{jk} = ((1+|z|²) δ_{jk} - z̄_j z_k) / (1+|z|²)²`.
    pub fn fubini_study(m: usize) -> Result<Self, ChartError> {
        if m == 0 {
            return Err(ChartError::ZeroDimension);
        }
        Ok(Self {
            m,
            model: Model::FubiniStudy,
        })
    }

    /// `R^{2m}` with the Euclidean metric.
    pub fn flat_torus(m: usize) -> Result<Self, ChartError> {
        if m == 0 {
            return Err(ChartError::ZeroDimension);
        }
        Ok(Self {
            m,
            model: Model::FlatTorus,
        })
    }

    /// The metric `e^{2λ} g` with the same `J`.
    pub fn conformal_rescale(&self, lambda: &FormField) -> Result<Self, ChartError> {
        lambda.check_shape(self.n(), 0)?;
        Ok(Self {
            m: self.m,
            model: Model::Conformal {
                base: Arc::new(self.clone()),
                lambda: lambda.clone(),
            },
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        2 * self.m
    }

    pub fn tag(&self) -> &'static str {
        match self.model {
            Model::FubiniStudy => "fubini_study",
            Model::FlatTorus => "flat_torus",
            Model::Conformal { .. } => "conformal_rescale",
        }
    }

    /// Whether `∇J = 0` holds by construction.
    pub fn is_kaehler(&self) -> bool {
        !matches!(self.model, Model::Conformal { .. })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), ChartError> {
        if x.len() != self.n() {
            return Err(ChartError::PointDimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.model {
            Model::FubiniStudy => fs_metric(self.m, x).0,
            Model::FlatTorus => DMatrix::identity(self.n(), self.n()),
            Model::Conformal { base, lambda } => {
                base.metric(x) * (2.0 * lambda.eval(x).scalar_value()).exp()
            }
        }
    }

    /// `∂_a g` for every coordinate `a`.
    pub fn metric_derivative(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.n();
        match &self.model {
            Model::FubiniStudy => fs_metric(self.m, x).1,
            Model::FlatTorus => vec![DMatrix::zeros(n, n); n],
            Model::Conformal { base, lambda } => {
                let e2l = (2.0 * lambda.eval(x).scalar_value()).exp();
                let g = base.metric(x);
                let dl = lambda_gradient(lambda, x);
                base.metric_derivative(x)
                    .into_iter()
                    .zip(dl)
                    .map(|(dg, l)| (dg + &g * (2.0 * l)) * e2l)
                    .collect()
            }
        }
    }

    /// `J` in coordinates: column `a` holds `J ∂_a`.
    pub fn j_field(&self, _x: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut j = DMatrix::zeros(n, n);
        for i in 0..self.m {
            j[(2 * i + 1, 2 * i)] = 1.0;
            j[(2 * i, 2 * i + 1)] = -1.0;
        }
        j
    }

    pub fn christoffel(&self, x: &[f64]) -> Christoffel {
        match &self.model {
            Model::FlatTorus => Christoffel::zero(self.n()),
            Model::FubiniStudy => {
                let (g, dg) = fs_metric(self.m, x);
                let ginv = g
                    .try_inverse()
                    .expect("Fubini–Study metric is positive definite");
                Christoffel::from_metric(&ginv, &dg)
            }
            Model::Conformal { base, lambda } => {
                let n = self.n();
                let mut gamma = base.christoffel(x);
                let g = base.metric(x);
                let ginv = g.clone().try_inverse().expect("base metric invertible");
                let dl = lambda_gradient(lambda, x);
                let grad: Vec<f64> = (0..n)
                    .map(|k| (0..n).map(|l| ginv[(k, l)] * dl[l]).sum())
                    .collect();
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = gamma.get(k, i, j) - g[(i, j)] * grad[k];
                            if k == i {
                                v += dl[j];
                            }
                            if k == j {
                                v += dl[i];
                            }
                            gamma.set(k, i, j, v);
                        }
                    }
                }
                gamma
            }
        }
    }

    /// Adapted orthonormal frame at `x`.
    pub fn frame(&self, x: &[f64]) -> Result<PointFrame, ChartError> {
        self.check_point(x)?;
        let n = self.n();
        let g = self.metric(x);
        let j = self.j_field(x);
        let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
        for k in 0..self.m {
            let mut v = DVector::zeros(n);
            v[2 * k] = 1.0;
            for c in &cols {
                let s = inner(c, &v);
                v -= c * s;
            }
            let len = inner(&v, &v);
            if !(len > 0.0 && len.is_finite()) {
                return Err(ChartError::DegenerateMetric(x.to_vec()));
            }
            v /= len.sqrt();
            let w = &j * &v;
            cols.push(v);
            cols.push(w);
        }
        let p = DMatrix::from_columns(&cols);
        let p_inv = p.transpose() * &g;
        Ok(PointFrame {
            pull: p.transpose(),
            push: p_inv.transpose(),
            p,
            p_inv,
        })
    }

    /// `ω = Σ_{a<b} g(J∂_a, ∂_b) dx^a ∧ dx^b`.
    pub fn kaehler_form(&self, x: &[f64]) -> AlternatingForm {
        let w = self.j_field(x).transpose() * self.metric(x);
        let n = self.n();
        AlternatingForm::from_terms(
            n,
            2,
            (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .map(|(a, b)| ((1u32 << a) | (1u32 << b), w[(a, b)])),
        )
    }
}

fn lambda_gradient(lambda: &FormField, x: &[f64]) -> Vec<f64> {
    let st = Stencil::new(LAMBDA_STEP, FdOrder::Fourth).expect("valid stencil");
    (0..x.len())
        .map(|a| st.partial(|y| lambda.eval(y).scalar_value(), x, a))
        .collect()
}

/// Real metric and its coordinate derivatives for the Fubini–Study chart.
fn fs_metric(m: usize, x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = 2 * m;
    assert_eq!(x.len(), n, "point dimension");
    let z: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(x[2 * j], x[2 * j + 1]))
        .collect();
    let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
    let h = |j: usize, k: usize| {
        let delta = if j == k { s } else { 0.0 };
        (Complex64::new(delta, 0.0) - z[j].conj() * z[k]) / (s * s)
    };
    // derivative of z_k along coordinate a
    let dz = |a: usize, k: usize| {
        if a == 2 * k {
            Complex64::new(1.0, 0.0)
        } else if a == 2 * k + 1 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let realify = |hm: &dyn Fn(usize, usize) -> Complex64| {
        let mut g = DMatrix::zeros(n, n);
        for j in 0..m {
            for k in 0..m {
                let v = hm(j, k);
                g[(2 * j, 2 * k)] = v.re;
                g[(2 * j + 1, 2 * k + 1)] = v.re;
                g[(2 * j, 2 * k + 1)] = v.im;
                g[(2 * j + 1, 2 * k)] = -v.im;
            }
        }
        g
    };
    let g = realify(&h);
    let dg = (0..n)
        .map(|a| {
            let ds = 2.0 * x[a];
            let dh = |j: usize, k: usize| {
                let delta = if j == k { s } else { 0.0 };
                let num = Complex64::new(if j == k { ds } else { 0.0 }, 0.0)
                    - dz(a, j).conj() * z[k]
                    - z[j].conj() * dz(a, k);
                let base = Complex64::new(delta, 0.0) - z[j].conj() * z[k];
                num / (s * s) - base * (2.0 * ds / (s * s * s))
            };
            realify(&dh)
        })
        .collect();
    (g, dg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fs_metric_is_identity_at_origin() {
        let g = ChartGeometry::fubini_study(3).unwrap();
        let x = vec![0.0; 6];
        assert!((g.metric(&x) - DMatrix::identity(6, 6)).amax() < 1e-15);
    }

    #[test]
    fn metric_derivative_matches_finite_differences() {
        let g = ChartGeometry::fubini_study(2).unwrap();
        let x = [0.3, -0.2, 0.5, 0.1];
        let st = Stencil::new(1e-3, FdOrder::Fourth).unwrap();
        let dg = g.metric_derivative(&x);
        for a in 0..4 {
            let fd = st.partial(|y| g.metric(y), &x, a);
            assert!((&fd - &dg[a]).amax() < 1e-10);
        }
    }

    #[test]
    fn metric_is_hermitian_and_frame_orthonormal() {
        let g = ChartGeometry::fubini_study(3).unwrap();
        let x = [0.4, -0.7, 0.2, 0.9, -0.3, 0.1];
        let gm = g.metric(&x);
        let j = g.j_field(&x);
        assert!((j.transpose() * &gm * &j - &gm).amax() < 1e-14);
        let f = g.frame(&x).unwrap();
        let p = f.matrix();
        assert!((p.transpose() * &gm * p - DMatrix::identity(6, 6)).amax() < 1e-13);
        assert!((f.inverse() * p - DMatrix::identity(6, 6)).amax() < 1e-13);
        for k in 0..3 {
            let je = &j * p.column(2 * k);
            assert!((je - p.column(2 * k + 1)).amax() < 1e-14);
        }
    }

    #[test]
    fn kaehler_form_pulls_back_to_the_standard_one() {
        let g = ChartGeometry::fubini_study(2).unwrap();
        let x = [0.3, 0.8, -0.5, 0.2];
        let f = g.frame(&x).unwrap();
        let w = f.to_frame(&g.kaehler_form(&x));
        let std = crate::kaehler::KaehlerFrame::new(2).unwrap();
        assert!(w.distance(std.omega()) < 1e-13);
        assert!(f.to_coords(&w).distance(&g.kaehler_form(&x)) < 1e-13);
    }

    #[test]
    fn zero_conformal_factor_changes_nothing() {
        let base = ChartGeometry::fubini_study(2).unwrap();
        let zero = FormField::scalar(4, |_| 0.0);
        let g = base.conformal_rescale(&zero).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(g.metric(&x), base.metric(&x));
        assert_eq!(
            g.christoffel(&x).max_abs_difference(&base.christoffel(&x)),
            0.0
        );
        assert_eq!(g.tag(), "conformal_rescale");
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert_eq!(
            ChartGeometry::fubini_study(0).unwrap_err(),
            ChartError::ZeroDimension
        );
    }
}
