use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChartError, ChartGeometry, Christoffel, PointFrame};
use crate::exterior::{basis_masks, sum_forms, AlternatingForm};
use crate::kaehler::KaehlerFrame;
use crate::twistor::CovariantJet;

type Evaluator = dyn Fn(&[f64]) -> AlternatingForm + Send + Sync;

/// A smooth `p`-form field on the chart, in the coordinate coframe.
#[derive(Clone)]
pub struct FormField {
    dim: usize,
    degree: usize,
    eval: Arc<Evaluator>,
}

impl std::fmt::Debug for FormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FormField(n={}, p={})", self.dim, self.degree)
    }
}

impl FormField {
    pub fn new(
        dim: usize,
        degree: usize,
        eval: impl Fn(&[f64]) -> AlternatingForm + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            degree,
            eval: Arc::new(eval),
        }
    }

    pub fn scalar(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(dim, 0, move |x| AlternatingForm::scalar(dim, f(x)))
    }

    pub fn constant(value: AlternatingForm) -> Self {
        Self::new(value.dim(), value.degree(), move |_| value.clone())
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        Self::new(dim, degree, move |_| AlternatingForm::zero(dim, degree))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval(&self, x: &[f64]) -> AlternatingForm {
        (self.eval)(x)
    }

    /// Evaluation with shape and finiteness checks.
    pub fn try_eval(&self, x: &[f64]) -> Result<AlternatingForm, ChartError> {
        if x.len() != self.dim {
            return Err(ChartError::PointDimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let v = self.eval(x);
        if v.dim() != self.dim || v.degree() != self.degree {
            return Err(ChartError::FieldShape {
                dim: self.dim,
                degree: self.degree,
                got_dim: v.dim(),
                got_degree: v.degree(),
            });
        }
        if !v.is_finite() {
            return Err(ChartError::NonFinite(x.to_vec()));
        }
        Ok(v)
    }

    pub fn check_shape(&self, dim: usize, degree: usize) -> Result<(), ChartError> {
        if self.dim != dim || self.degree != degree {
            return Err(ChartError::FieldShape {
                dim,
                degree,
                got_dim: self.dim,
                got_degree: self.degree,
            });
        }
        Ok(())
    }

    /// Pointwise map; `degree` is the degree of the image.
    pub fn map(
        &self,
        degree: usize,
        f: impl Fn(&[f64], AlternatingForm) -> AlternatingForm + Send + Sync + 'static,
    ) -> Self {
        let inner = self.clone();
        Self::new(self.dim, degree, move |x| f(x, inner.eval(x)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.dim, self.degree),
            (other.dim, other.degree),
            "FormField::add shape"
        );
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.dim, self.degree, move |x| a.eval(x) + b.eval(x))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(
            (self.dim, self.degree),
            (other.dim, other.degree),
            "FormField::sub shape"
        );
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.dim, self.degree, move |x| a.eval(x) - b.eval(x))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(self.degree, move |_, v| v.scale(c))
    }

    /// `g · self` for a function `g`.
    pub fn times(&self, g: &FormField) -> Self {
        assert_eq!(g.degree, 0, "FormField::times needs a function");
        let g = g.clone();
        self.map(self.degree, move |x, v| v.scale(g.eval(x).scalar_value()))
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.dim, self.degree + other.degree, move |x| {
            a.eval(x).wedge(&b.eval(x))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn from_u8(order: u8) -> Result<Self, ChartError> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            o => Err(ChartError::Order(o)),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }
}

/// Values that central differences can combine.
pub trait FdValue: Sized {
    fn combine(terms: Vec<(f64, Self)>) -> Self;
}

impl FdValue for f64 {
    fn combine(terms: Vec<(f64, Self)>) -> Self {
        terms.into_iter().map(|(w, v)| w * v).sum()
    }
}

impl FdValue for AlternatingForm {
    fn combine(terms: Vec<(f64, Self)>) -> Self {
        let (n, p) = (terms[0].1.dim(), terms[0].1.degree());
        let scaled: Vec<_> = terms.into_iter().map(|(w, v)| v.scale(w)).collect();
        sum_forms(n, p, &scaled)
    }
}

impl FdValue for DMatrix<f64> {
    fn combine(terms: Vec<(f64, Self)>) -> Self {
        let mut it = terms.into_iter();
        let (w, v) = it.next().expect("nonempty stencil");
        it.fold(v * w, |acc, (w, v)| acc + v * w)
    }
}

impl<T: FdValue> FdValue for Vec<T> {
    fn combine(terms: Vec<(f64, Self)>) -> Self {
        let len = terms[0].1.len();
        let mut columns: Vec<Vec<(f64, T)>> =
            (0..len).map(|_| Vec::with_capacity(terms.len())).collect();
        for (w, v) in terms {
            for (col, item) in columns.iter_mut().zip(v) {
                col.push((w, item));
            }
        }
        columns.into_iter().map(T::combine).collect()
    }
}

/// Central-difference step and order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    h: f64,
    order: FdOrder,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            h: Self::DEFAULT_STEP,
            order: FdOrder::Fourth,
        }
    }
}

impl Stencil {
    pub const DEFAULT_STEP: f64 = 5e-3;
    pub const MIN_STEP: f64 = 1e-4;
    pub const MAX_STEP: f64 = 1e-1;

    pub fn new(h: f64, order: FdOrder) -> Result<Self, ChartError> {
        if !(Self::MIN_STEP..=Self::MAX_STEP).contains(&h) {
            return Err(ChartError::StepOutOfRange(h));
        }
        Ok(Self { h, order })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> FdOrder {
        self.order
    }

    pub fn halved(&self) -> Result<Self, ChartError> {
        Self::new(self.h / 2.0, self.order)
    }

    /// `(offset in steps, weight)` pairs for a first derivative.
    fn weights(&self) -> &'static [(f64, f64)] {
        match self.order {
            FdOrder::Second => &[(-1.0, -0.5), (1.0, 0.5)],
            FdOrder::Fourth => &[
                (-2.0, 1.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        }
    }

    /// `∂_a g(x)`.
    pub fn partial<T: FdValue>(&self, g: impl Fn(&[f64]) -> T, x: &[f64], a: usize) -> T {
        let mut y = x.to_vec();
        let terms = self
            .weights()
            .iter()
            .map(|&(k, w)| {
                y[a] = x[a] + k * self.h;
                (w / self.h, g(&y))
            })
            .collect();
        T::combine(terms)
    }
}

/// `Σ_k (Σ_i Γ^k_{ai} dx^i) ∧ (∂_k ⌟ F)`, the connection term of `∇_a F`.
fn connection_term(gamma: &Christoffel, a: usize, f: &AlternatingForm) -> AlternatingForm {
    let n = f.dim();
    if f.degree() == 0 {
        return AlternatingForm::zero(n, 0);
    }
    let parts: Vec<_> = (0..n)
        .filter_map(|k| {
            let row: Vec<f64> = (0..n).map(|i| gamma.get(k, a, i)).collect();
            if row.iter().all(|v| *v == 0.0) {
                return None;
            }
            Some(AlternatingForm::covector(&row).wedge(&f.interior_unit(k)))
        })
        .collect();
    sum_forms(n, f.degree(), &parts)
}

/// `∇_{∂_a} F` at `x` for every coordinate direction, in the coordinate coframe.
pub fn coordinate_gradient(
    geom: &ChartGeometry,
    field: &FormField,
    x: &[f64],
    st: Stencil,
) -> Vec<AlternatingForm> {
    let n = geom.n();
    if field.degree() == 0 {
        return (0..n)
            .map(|a| st.partial(|y| field.eval(y), x, a))
            .collect();
    }
    let value = field.eval(x);
    let gamma = geom.christoffel(x);
    (0..n)
        .map(|a| {
            let partial = st.partial(|y| field.eval(y), x, a);
            partial - connection_term(&gamma, a, &value)
        })
        .collect()
}

/// First-order operators computed from `∇F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOp {
    D,
    Delta,
    Dc,
    Deltac,
}

impl DiffOp {
    pub fn name(self) -> &'static str {
        match self {
            Self::D => "d",
            Self::Delta => "delta",
            Self::Dc => "dc",
            Self::Deltac => "deltac",
        }
    }
}

/// Evaluates `which(F)` at a point.
pub fn apply_operator_at(
    geom: &ChartGeometry,
    field: &FormField,
    x: &[f64],
    st: Stencil,
    which: DiffOp,
) -> AlternatingForm {
    let n = geom.n();
    let p = field.degree();
    match which {
        // torsion-free: the Christoffel terms cancel
        DiffOp::D => {
            let parts: Vec<_> = (0..n)
                .map(|a| AlternatingForm::unit(n, a).wedge(&st.partial(|y| field.eval(y), x, a)))
                .collect();
            sum_forms(n, p + 1, &parts)
        }
        _ => {
            let grad = coordinate_gradient(geom, field, x, st);
            let g = geom.metric(x);
            let ginv = g.clone().try_inverse().expect("metric invertible");
            let j = geom.j_field(x);
            match which {
                DiffOp::Delta => contract_sum(&ginv, &grad).scale(-1.0),
                DiffOp::Deltac => contract_sum(&(&j * &ginv), &grad).scale(-1.0),
                DiffOp::Dc => {
                    let twist = &g * &j * &ginv;
                    let parts: Vec<_> = (0..n)
                        .map(|b| {
                            AlternatingForm::covector(twist.column(b).as_slice()).wedge(&grad[b])
                        })
                        .collect();
                    sum_forms(n, p + 1, &parts)
                }
                DiffOp::D => unreachable!(),
            }
        }
    }
}

/// `Σ_b V_b ⌟ G_b` where `V_b` is column `b` of `vectors`.
fn contract_sum(vectors: &DMatrix<f64>, grad: &[AlternatingForm]) -> AlternatingForm {
    let n = grad[0].dim();
    let p = grad[0].degree().saturating_sub(1);
    let parts: Vec<_> = grad
        .iter()
        .enumerate()
        .map(|(b, g)| g.interior(vectors.column(b).as_slice()))
        .collect();
    sum_forms(n, p, &parts)
}

/// `which(F)` as a lazily evaluated field.
pub fn numeric_operator(
    geom: &ChartGeometry,
    field: &FormField,
    st: Stencil,
    which: DiffOp,
) -> FormField {
    let degree = match which {
        DiffOp::D | DiffOp::Dc => field.degree() + 1,
        DiffOp::Delta | DiffOp::Deltac => field.degree().saturating_sub(1),
    };
    let (g, f) = (geom.clone(), field.clone());
    FormField::new(field.dim(), degree, move |x| {
        apply_operator_at(&g, &f, x, st, which)
    })
}

/// Pointwise Kähler operators, evaluated with the metric at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOp {
    L,
    Lambda,
    J,
    Star,
}

pub fn apply_point_op(
    geom: &ChartGeometry,
    x: &[f64],
    a: &AlternatingForm,
    op: PointOp,
) -> AlternatingForm {
    let n = geom.n();
    match op {
        PointOp::L => geom.kaehler_form(x).wedge(a),
        PointOp::Lambda => {
            if a.degree() < 2 {
                return AlternatingForm::zero(n, a.degree().saturating_sub(2));
            }
            let ginv = geom.metric(x).try_inverse().expect("metric invertible");
            let v = geom.j_field(x) * ginv;
            let parts: Vec<_> = (0..n)
                .map(|b| a.interior_unit(b).interior(v.column(b).as_slice()))
                .collect();
            sum_forms(n, a.degree() - 2, &parts).scale(0.5)
        }
        PointOp::J => {
            if a.degree() == 0 {
                return AlternatingForm::zero(n, 0);
            }
            let g = geom.metric(x);
            let ginv = g.clone().try_inverse().expect("metric invertible");
            let twist = &g * geom.j_field(x) * ginv;
            let parts: Vec<_> = (0..n)
                .map(|b| {
                    AlternatingForm::covector(twist.column(b).as_slice()).wedge(&a.interior_unit(b))
                })
                .collect();
            sum_forms(n, a.degree(), &parts)
        }
        PointOp::Star => {
            let frame = geom.frame(x).expect("frame");
            frame.to_coords(&frame.to_frame(a).hodge_star())
        }
    }
}

pub fn point_operator(geom: &ChartGeometry, field: &FormField, op: PointOp) -> FormField {
    let p = field.degree();
    let degree = match op {
        PointOp::L => p + 2,
        PointOp::Lambda => p.saturating_sub(2),
        PointOp::J => p,
        PointOp::Star => geom.n() - p.min(geom.n()),
    };
    let g = geom.clone();
    field.map(degree, move |x, v| apply_point_op(&g, x, &v, op))
}

/// Applies frame-level algebra pointwise: pull back, apply, push forward.
pub fn in_frame(
    geom: &ChartGeometry,
    field: &FormField,
    degree: usize,
    op: impl Fn(&KaehlerFrame, &AlternatingForm) -> AlternatingForm + Send + Sync + 'static,
) -> FormField {
    let g = geom.clone();
    let kf = KaehlerFrame::new(geom.m()).expect("m >= 1");
    field.map(degree, move |x, v| {
        let frame = g.frame(x).expect("frame");
        frame.to_coords(&op(&kf, &frame.to_frame(&v)))
    })
}

/// Transports coordinate-frame covariant derivatives into the adapted frame.
fn to_frame_family(frame: &PointFrame, coord: &[AlternatingForm]) -> Vec<AlternatingForm> {
    let p = frame.matrix();
    let n = p.nrows();
    let deg = coord[0].degree();
    (0..n)
        .map(|alpha| {
            let parts: Vec<_> = (0..n)
                .filter(|&a| p[(a, alpha)] != 0.0)
                .map(|a| coord[a].scale(p[(a, alpha)]))
                .collect();
            frame.to_frame(&sum_forms(n, deg, &parts))
        })
        .collect()
}

/// The covariant jet of `F` at `x` in the adapted frame.
pub fn covariant_jet(
    geom: &ChartGeometry,
    field: &FormField,
    x: &[f64],
    st: Stencil,
    with_hess: bool,
) -> Result<CovariantJet, ChartError> {
    geom.check_point(x)?;
    field.check_shape(geom.n(), field.degree())?;
    let value = field.try_eval(x)?;
    let frame = geom.frame(x)?;
    let coord = coordinate_gradient(geom, field, x, st);
    if coord.iter().any(|g| !g.is_finite()) {
        return Err(ChartError::NonFinite(x.to_vec()));
    }
    let grad = to_frame_family(&frame, &coord);
    let jet = CovariantJet::new(frame.to_frame(&value), grad)?;
    if !with_hess {
        return Ok(jet);
    }
    let n = geom.n();
    let p = field.degree();
    let gamma = geom.christoffel(x);
    // ∂_a of the covariant gradient, then the two connection corrections
    let coord_hess: Vec<Vec<AlternatingForm>> = (0..n)
        .map(|a| {
            let da = st.partial(|y| coordinate_gradient(geom, field, y, st), x, a);
            da.into_iter()
                .enumerate()
                .map(|(b, h)| {
                    let mut h = h - connection_term(&gamma, a, &coord[b]);
                    for (c, gc) in coord.iter().enumerate() {
                        let w = gamma.get(c, a, b);
                        if w != 0.0 {
                            h = h.add_scaled(-w, gc);
                        }
                    }
                    h
                })
                .collect()
        })
        .collect();
    let pm = frame.matrix();
    let hess = (0..n)
        .map(|alpha| {
            let row: Vec<AlternatingForm> = (0..n)
                .map(|b| {
                    let parts: Vec<_> = (0..n)
                        .filter(|&a| pm[(a, alpha)] != 0.0)
                        .map(|a| coord_hess[a][b].scale(pm[(a, alpha)]))
                        .collect();
                    sum_forms(n, p, &parts)
                })
                .collect();
            to_frame_family(&frame, &row)
        })
        .collect();
    Ok(jet.with_hess(hess)?)
}

/// A smooth trigonometric-rational `p`-form with seeded coefficients.
pub fn trig_field(n: usize, degree: usize, seed: u64) -> FormField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = basis_masks(n, degree).to_vec();
    let coeffs: Vec<(u32, Vec<f64>, f64, f64)> = masks
        .iter()
        .map(|&mask| {
            let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (mask, k, rng.gen_range(0.0..6.3), rng.gen_range(0.5..1.5))
        })
        .collect();
    FormField::new(n, degree, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        AlternatingForm::from_terms(
            n,
            degree,
            coeffs.iter().map(|(mask, k, phase, amp)| {
                let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + phase;
                (*mask, amp * arg.sin() / (1.0 + 0.25 * r2))
            }),
        )
    })
}

/// A `p`-form with seeded cubic polynomial coefficients.
pub fn polynomial_field(n: usize, degree: usize, seed: u64) -> FormField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = basis_masks(n, degree).to_vec();
    // c0 + Σ c_i x_i + Σ c_ij x_i x_j + c_ijk x_i x_j x_k on a random triple
    type Poly = (f64, Vec<f64>, Vec<f64>, [usize; 3], f64);
    let coeffs: Vec<(u32, Poly)> = masks
        .iter()
        .map(|&mask| {
            let lin = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad = (0..n * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let triple = [
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
            ];
            (
                mask,
                (
                    rng.gen_range(-1.0..1.0),
                    lin,
                    quad,
                    triple,
                    rng.gen_range(-0.3..0.3),
                ),
            )
        })
        .collect();
    FormField::new(n, degree, move |x| {
        AlternatingForm::from_terms(
            n,
            degree,
            coeffs.iter().map(|(mask, (c0, lin, quad, t, c3))| {
                let mut v = *c0;
                for i in 0..n {
                    v += lin[i] * x[i];
                    for j in 0..n {
                        v += quad[i * n + j] * x[i] * x[j];
                    }
                }
                v += c3 * x[t[0]] * x[t[1]] * x[t[2]];
                (*mask, v)
            }),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twistor::{d_from_jet, delta_from_jet};

    #[test]
    fn fd_weights_are_exact_on_cubics() {
        let st = Stencil::new(0.1, FdOrder::Fourth).unwrap();
        let d = st.partial(|y: &[f64]| y[0].powi(3) + 2.0 * y[1], &[0.7, 0.0], 0);
        assert!((d - 3.0 * 0.49).abs() < 1e-12);
        let st2 = Stencil::new(0.1, FdOrder::Second).unwrap();
        let d2 = st2.partial(|y: &[f64]| y[0] * y[0], &[0.7], 0);
        assert!((d2 - 1.4).abs() < 1e-12);
    }

    #[test]
    fn step_bounds_are_enforced() {
        assert!(Stencil::new(1e-5, FdOrder::Fourth).is_err());
        assert!(Stencil::new(0.5, FdOrder::Fourth).is_err());
        assert_eq!(FdOrder::from_u8(3), Err(ChartError::Order(3)));
    }

    #[test]
    fn constant_form_on_flat_torus_has_zero_gradient() {
        let g = ChartGeometry::flat_torus(2).unwrap();
        let w = AlternatingForm::from_terms(4, 2, [(0b0101, 1.5), (0b1010, -0.5)]);
        let f = FormField::constant(w);
        let j = covariant_jet(&g, &f, &[0.3, 0.1, -0.2, 0.4], Stencil::default(), true).unwrap();
        assert!(j.grad_norm() < 1e-12, "{}", j.grad_norm());
    }

    #[test]
    fn coordinate_function_has_constant_gradient() {
        let g = ChartGeometry::flat_torus(2).unwrap();
        let f = FormField::scalar(4, |x| x[2]);
        let j = covariant_jet(&g, &f, &[0.3, 0.1, -0.2, 0.4], Stencil::default(), false).unwrap();
        let d = d_from_jet(&j);
        assert!(d.distance(&AlternatingForm::unit(4, 2)) < 1e-10);
    }

    #[test]
    fn kaehler_form_is_parallel_on_cp2() {
        let g = ChartGeometry::fubini_study(2).unwrap();
        let gg = g.clone();
        let w = FormField::new(4, 2, move |x| gg.kaehler_form(x));
        let j = covariant_jet(&g, &w, &[0.4, -0.3, 0.6, 0.2], Stencil::default(), false).unwrap();
        assert!(j.grad_norm() < 1e-8, "{}", j.grad_norm());
        assert!(delta_from_jet(&j).norm() < 1e-8);
    }

    #[test]
    fn point_ops_match_frame_algebra() {
        let g = ChartGeometry::fubini_study(2).unwrap();
        let x = [0.5, -0.2, 0.3, 0.7];
        let frame = g.frame(&x).unwrap();
        let kf = KaehlerFrame::new(2).unwrap();
        let a = trig_field(4, 2, 7).eval(&x);
        let af = frame.to_frame(&a);
        let lam = frame.to_frame(&apply_point_op(&g, &x, &a, PointOp::Lambda));
        assert!(lam.distance(&kf.lefschetz_lambda(&af)) < 1e-12);
        let jj = frame.to_frame(&apply_point_op(&g, &x, &a, PointOp::J));
        assert!(jj.distance(&kf.j_extension(&af)) < 1e-12);
        let l = frame.to_frame(&apply_point_op(&g, &x, &a, PointOp::L));
        assert!(l.distance(&kf.lefschetz_l(&af)) < 1e-12);
    }

    #[test]
    fn field_shape_is_checked() {
        let f = FormField::new(4, 1, |_| AlternatingForm::zero(4, 2));
        assert!(matches!(
            f.try_eval(&[0.0; 4]),
            Err(ChartError::FieldShape { .. })
        ));
        assert!(matches!(
            f.try_eval(&[0.0; 3]),
            Err(ChartError::PointDimension { .. })
        ));
        let nan = FormField::scalar(2, |_| f64::NAN);
        assert!(matches!(
            nan.try_eval(&[0.0; 2]),
            Err(ChartError::NonFinite(_))
        ));
    }
}
