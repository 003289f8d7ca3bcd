use nalgebra::DMatrix;

use super::{
    apply_point_op, build_phi_hat, covariant_jet, default_eigen_matrix, kaehler_form_field,
    laplace_eigenfunction, numeric_operator, omega_power_field, phi_hat_primitive_display,
    point_operator, primitive_part_field, trig_field, ChartError, ChartGeometry, Christoffel,
    DiffOp, FormField, PointFrame, PointOp, SamplePlan, Stencil,
};
use crate::curvature::{
    cpm_curvature, integrability_residual, middim_characterization_residual,
    middim_residual_with_coefficient, second_order, weitzenboeck_residual, CurvatureOperator,
};
use crate::exterior::AlternatingForm;
use crate::kaehler::KaehlerFrame;
use crate::report::{tolerance, Findings};
use crate::twistor::{
    d_from_jet, delta_from_jet, equation_defect, gamma_equation, hamiltonian_residual,
    hodge_dual_jet, middim_split_check, relative, specialm_residual, structure_trace_coefficient,
    trace_gradient, twistor_residual, CovariantJet,
};

/// `max |a - b| / max(|a|, |b|)` accumulated over sample points.
#[derive(Debug, Clone, Copy, Default)]
pub struct SupRelative {
    defect: f64,
    scale: f64,
}

impl SupRelative {
    pub fn add(&mut self, a: &AlternatingForm, b: &AlternatingForm) {
        self.add_raw(a.distance(b), a.norm().max(b.norm()));
    }

    pub fn add_raw(&mut self, defect: f64, scale: f64) {
        self.defect = self.defect.max(defect);
        self.scale = self.scale.max(scale);
    }

    pub fn value(&self) -> f64 {
        relative(self.defect, self.scale)
    }
}

fn kframe(geom: &ChartGeometry) -> KaehlerFrame {
    KaehlerFrame::new(geom.m()).expect("m >= 1")
}

fn jets(
    geom: &ChartGeometry,
    field: &FormField,
    plan: &SamplePlan,
    with_hess: bool,
) -> Result<Vec<CovariantJet>, ChartError> {
    plan.points()
        .iter()
        .map(|x| covariant_jet(geom, field, x, plan.stencil(), with_hess))
        .collect()
}

/// `max |Δf - 4(m+1) f| / max |4(m+1) f|` over the plan.
pub fn laplace_eigen_residual(
    geom: &ChartGeometry,
    f: &FormField,
    plan: &SamplePlan,
) -> Result<f64, ChartError> {
    let lambda = super::first_eigenvalue(geom.m());
    let mut acc = SupRelative::default();
    for j in jets(geom, f, plan, true)? {
        let lap = second_order(&j)?.laplacian();
        acc.add(&lap, &j.value().scale(lambda));
    }
    Ok(acc.value())
}

/// Sampled properties of `φ̂ = dd^c f + 6 f ω`.
#[derive(Debug, Clone, Copy)]
pub struct PhiHatDiagnostics {
    /// `max |Jφ̂| / max |φ̂|`
    pub invariance: f64,
    /// `max` twistor residual of the jets
    pub twistor: f64,
    /// defect of `∇_X φ̂ = -2(df ∧ JX - Jdf ∧ X) + 2 df(X) ω`
    pub gradient_display: f64,
    /// `dd^c f + 6fω` against `(dd^c f)_0 + (2m-4)/m f ω`
    pub displays_agree: f64,
    /// smallest `|∇φ̂|` seen
    pub min_grad: f64,
}

pub fn phi_hat_diagnostics(
    geom: &ChartGeometry,
    f: &FormField,
    plan: &SamplePlan,
) -> Result<PhiHatDiagnostics, ChartError> {
    let st = plan.stencil();
    let phi = build_phi_hat(geom, f, st)?;
    let display = phi_hat_primitive_display(geom, f, st)?;
    let kf = kframe(geom);
    let (mut inv, mut agree, mut grad_display) =
        (SupRelative::default(), SupRelative::default(), 0.0f64);
    let (mut tw, mut min_grad) = (0.0f64, f64::INFINITY);
    for x in plan.points() {
        let frame = geom.frame(x)?;
        let j = covariant_jet(geom, &phi, x, st, false)?;
        let value = j.value();
        let jphi = kf.j_extension(value);
        inv.add_raw(jphi.norm(), value.norm());
        agree.add(value, &frame.to_frame(&display.eval(x)));
        tw = tw.max(twistor_residual(&j));
        min_grad = min_grad.min(j.grad_norm());
        let df = d_from_jet(&covariant_jet(geom, f, x, st, false)?);
        let rhs = gamma_equation(&kf, &df.scale(-2.0), 1.0);
        grad_display = grad_display.max(equation_defect(&j, &rhs));
    }
    Ok(PhiHatDiagnostics {
        invariance: inv.value(),
        twistor: tw,
        gradient_display: grad_display,
        displays_agree: agree.value(),
        min_grad,
    })
}

/// `K = J df` as a 1-form field.
pub fn killing_from_potential(geom: &ChartGeometry, f: &FormField, st: Stencil) -> FormField {
    point_operator(geom, &numeric_operator(geom, f, st, DiffOp::D), PointOp::J)
}

/// Relative size of the symmetric part of `∇K`.
pub fn killing_field_check(
    geom: &ChartGeometry,
    k: &FormField,
    plan: &SamplePlan,
) -> Result<f64, ChartError> {
    k.check_shape(geom.n(), 1)?;
    let n = geom.n();
    let mut acc = SupRelative::default();
    for j in jets(geom, k, plan, false)? {
        let g: Vec<Vec<f64>> = j.grad().iter().map(AlternatingForm::components).collect();
        let mut sym = 0.0;
        for a in 0..n {
            for b in 0..n {
                sym += (0.5 * (g[a][b] + g[b][a])).powi(2);
            }
        }
        acc.add_raw(sym.sqrt(), j.grad_norm());
    }
    Ok(acc.value())
}

/// Operators available in the commutator relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    D,
    Delta,
    Dc,
    Deltac,
    L,
    Lambda,
    J,
    Star,
}

/// Applies `op`, returning `None` when the image is identically zero for
/// degree reasons.
fn apply_field_op(
    geom: &ChartGeometry,
    st: Stencil,
    f: &FormField,
    op: FieldOp,
) -> Option<FormField> {
    let (n, p) = (geom.n(), f.degree());
    let diff = |w| Some(numeric_operator(geom, f, st, w));
    match op {
        FieldOp::D => (p < n).then(|| diff(DiffOp::D)).flatten(),
        FieldOp::Dc => (p < n).then(|| diff(DiffOp::Dc)).flatten(),
        FieldOp::Delta => (p > 0).then(|| diff(DiffOp::Delta)).flatten(),
        FieldOp::Deltac => (p > 0).then(|| diff(DiffOp::Deltac)).flatten(),
        FieldOp::L => (p + 2 <= n).then(|| point_operator(geom, f, PointOp::L)),
        FieldOp::Lambda => (p >= 2).then(|| point_operator(geom, f, PointOp::Lambda)),
        FieldOp::J => (p > 0).then(|| point_operator(geom, f, PointOp::J)),
        FieldOp::Star => Some(point_operator(geom, f, PointOp::Star)),
    }
}

/// `ops` applied left to right.
fn compose(geom: &ChartGeometry, st: Stencil, f: &FormField, ops: &[FieldOp]) -> Option<FormField> {
    ops.iter()
        .try_fold(f.clone(), |acc, op| apply_field_op(geom, st, &acc, *op))
}

/// An identity `Σ lhs = Σ rhs` between composites of field operators.
#[derive(Debug, Clone)]
pub struct OperatorRelation {
    pub name: &'static str,
    pub anchor: &'static str,
    /// number of derivatives in each term
    pub order: u8,
    pub lhs: Vec<(f64, Vec<FieldOp>)>,
    pub rhs: Vec<(f64, Vec<FieldOp>)>,
}

fn rel(
    name: &'static str,
    anchor: &'static str,
    order: u8,
    lhs: Vec<(f64, Vec<FieldOp>)>,
    rhs: Vec<(f64, Vec<FieldOp>)>,
) -> OperatorRelation {
    OperatorRelation {
        name,
        anchor,
        order,
        lhs,
        rhs,
    }
}

/// The Kähler commutator and anticommutator identities. `[A, B]F` is spelled
/// out as `A(B F) - B(A F)`, with operators listed in application order.
pub fn kaehler_relations() -> Vec<OperatorRelation> {
    use FieldOp::*;
    let comm = |a: FieldOp, b: FieldOp, c: f64| vec![(c, vec![b, a]), (-c, vec![a, b])];
    let anti = |a: FieldOp, b: FieldOp| vec![(1.0, vec![b, a]), (1.0, vec![a, b])];
    let id = |a: FieldOp| vec![(1.0, vec![a])];
    vec![
        rel(
            "dc_is_minus_delta_L_commutator",
            "d^c = -[delta, L]",
            1,
            id(Dc),
            comm(Delta, L, -1.0),
        ),
        rel(
            "dc_is_minus_d_J_commutator",
            "d^c = -[d, J]",
            1,
            id(Dc),
            comm(D, J, -1.0),
        ),
        rel(
            "deltac_is_d_Lambda_commutator",
            "delta^c = [d, Lambda]",
            1,
            id(Deltac),
            comm(D, Lambda, 1.0),
        ),
        rel(
            "deltac_is_minus_delta_J_commutator",
            "delta^c = -[delta, J]",
            1,
            id(Deltac),
            comm(Delta, J, -1.0),
        ),
        rel(
            "d_is_deltac_L_commutator",
            "d = [delta^c, L]",
            1,
            id(D),
            comm(Deltac, L, 1.0),
        ),
        rel(
            "d_is_dc_J_commutator",
            "d = [d^c, J]",
            1,
            id(D),
            comm(Dc, J, 1.0),
        ),
        rel(
            "delta_is_minus_dc_Lambda_commutator",
            "delta = -[d^c, Lambda]",
            1,
            id(Delta),
            comm(Dc, Lambda, -1.0),
        ),
        rel(
            "delta_is_deltac_J_commutator",
            "delta = [delta^c, J]",
            1,
            id(Delta),
            comm(Deltac, J, 1.0),
        ),
        rel(
            "d_commutes_with_L",
            "0 = [d, L]",
            1,
            comm(D, L, 1.0),
            vec![],
        ),
        rel(
            "dc_commutes_with_L",
            "0 = [d^c, L]",
            1,
            comm(Dc, L, 1.0),
            vec![],
        ),
        rel(
            "delta_commutes_with_Lambda",
            "0 = [delta, Lambda]",
            1,
            comm(Delta, Lambda, 1.0),
            vec![],
        ),
        rel(
            "deltac_commutes_with_Lambda",
            "0 = [delta^c, Lambda]",
            1,
            comm(Deltac, Lambda, 1.0),
            vec![],
        ),
        rel(
            "Lambda_commutes_with_J",
            "0 = [Lambda, J]",
            0,
            comm(Lambda, J, 1.0),
            vec![],
        ),
        rel(
            "J_commutes_with_star",
            "0 = [J, *]",
            0,
            comm(J, Star, 1.0),
            vec![],
        ),
        rel(
            "delta_dc_anticommute",
            "0 = delta d^c + d^c delta",
            2,
            anti(Delta, Dc),
            vec![],
        ),
        rel(
            "d_dc_anticommute",
            "0 = d d^c + d^c d",
            2,
            anti(D, Dc),
            vec![],
        ),
        rel(
            "delta_deltac_anticommute",
            "0 = delta delta^c + delta^c delta",
            2,
            anti(Delta, Deltac),
            vec![],
        ),
        rel(
            "d_deltac_anticommute",
            "0 = d delta^c + delta^c d",
            2,
            anti(D, Deltac),
            vec![],
        ),
    ]
}

/// Reference fields whose size sets the scale of an order-`order` relation:
/// `F` itself, `dF` and `δF`, or `δdF` and `dδF`.
fn reference_fields(
    geom: &ChartGeometry,
    st: Stencil,
    field: &FormField,
    order: u8,
) -> Vec<FormField> {
    use FieldOp::*;
    let chains: &[&[FieldOp]] = match order {
        0 => &[&[]],
        1 => &[&[D], &[Delta]],
        _ => &[&[D, Delta], &[Delta, D]],
    };
    chains
        .iter()
        .filter_map(|ops| compose(geom, st, field, ops))
        .collect()
}

/// Sup-relative defect of one relation on one field; `None` if every term
/// vanishes identically for degree reasons. The scale is the largest of the
/// term norms and the reference fields of matching order, so that relations
/// whose terms are all small are not judged against round-off.
pub fn relation_defect(
    geom: &ChartGeometry,
    rel: &OperatorRelation,
    field: &FormField,
    plan: &SamplePlan,
) -> Result<Option<f64>, ChartError> {
    let st = plan.stencil();
    let build = |terms: &[(f64, Vec<FieldOp>)]| -> Vec<(f64, FormField)> {
        terms
            .iter()
            .filter_map(|(c, ops)| compose(geom, st, field, ops).map(|f| (*c, f)))
            .collect()
    };
    let lhs = build(&rel.lhs);
    let rhs = build(&rel.rhs);
    let Some(degree) = lhs.iter().chain(&rhs).map(|(_, f)| f.degree()).next() else {
        return Ok(None);
    };
    let references = reference_fields(geom, st, field, rel.order);
    let n = geom.n();
    let mut acc = SupRelative::default();
    for x in plan.points() {
        let frame = geom.frame(x)?;
        let mut diff = AlternatingForm::zero(n, degree);
        let mut scale = 0.0f64;
        for (sign, terms) in [(1.0, &lhs), (-1.0, &rhs)] {
            for (c, f) in terms.iter() {
                let v = frame.to_frame(&f.try_eval(x)?).scale(*c);
                scale = scale.max(v.norm());
                diff = diff.add_scaled(sign, &v);
            }
        }
        for f in &references {
            scale = scale.max(frame.to_frame(&f.try_eval(x)?).norm());
        }
        acc.add_raw(diff.norm(), scale);
    }
    Ok(Some(acc.value()))
}

/// Every relation of [`kaehler_relations`] on trigonometric test fields of
/// degrees `0..=3`.
pub fn commutator_suite(geom: &ChartGeometry, plan: &SamplePlan) -> Result<Findings, ChartError> {
    let n = geom.n();
    let fields: Vec<FormField> = (0..=3.min(n))
        .map(|p| trig_field(n, p, plan.seed() ^ (p as u64 + 11)))
        .collect();
    let mut out = Findings::new();
    for r in kaehler_relations() {
        let mut worst: Option<f64> = None;
        for f in &fields {
            if let Some(v) = relation_defect(geom, &r, f, plan)? {
                worst = Some(worst.map_or(v, |w: f64| w.max(v)));
            }
        }
        let tol = match r.order {
            0 => tolerance::EXACT,
            1 => tolerance::FD_FIRST,
            _ => tolerance::FD_SECOND,
        };
        match worst {
            Some(v) => out.push(r.name, r.anchor, v, tol),
            None => out.skip(r.name, r.anchor, "all terms vanish for the sampled degrees"),
        }
    }
    Ok(out)
}

/// Outcome of the conformal-invariance test.
#[derive(Debug, Clone, Copy)]
pub struct ConformalOutcome {
    /// max twistor residual of `e^{(p+1)λ} ψ` under `e^{2λ} g`
    pub twistor: f64,
    /// smallest and largest `|∇ψ̂|` under the rescaled metric
    pub min_grad: f64,
    pub max_grad: f64,
}

/// Rescales `ψ` to `e^{(p+1)λ}ψ` and samples it under `e^{2λ} g`.
pub fn conformal_twistor_check(
    geom: &ChartGeometry,
    psi: &FormField,
    lambda: &FormField,
    plan: &SamplePlan,
) -> Result<ConformalOutcome, ChartError> {
    let hat = geom.conformal_rescale(lambda)?;
    let p = psi.degree() as f64;
    let lam = lambda.clone();
    let weight = FormField::scalar(geom.n(), move |x| {
        ((p + 1.0) * lam.eval(x).scalar_value()).exp()
    });
    let psi_hat = psi.times(&weight);
    let mut out = ConformalOutcome {
        twistor: 0.0,
        min_grad: f64::INFINITY,
        max_grad: 0.0,
    };
    for j in jets(&hat, &psi_hat, plan, false)? {
        out.twistor = out.twistor.max(twistor_residual(&j));
        out.min_grad = out.min_grad.min(j.grad_norm());
        out.max_grad = out.max_grad.max(j.grad_norm());
    }
    Ok(out)
}

/// `a exp(-|x - c|² / (2 w²))`.
pub fn gaussian_bump(center: Vec<f64>, amplitude: f64, width: f64) -> FormField {
    let n = center.len();
    FormField::scalar(n, move |x| {
        let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
        amplitude * (-r2 / (2.0 * width * width)).exp()
    })
}

/// `Σ c_i x_i`.
pub fn linear_function(coeffs: Vec<f64>) -> FormField {
    let n = coeffs.len();
    FormField::scalar(n, move |x| coeffs.iter().zip(x).map(|(a, b)| a * b).sum())
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, t);
                for l in 2..=k {
                    let lf = l as f64;
                    let p2 = ((2.0 * lf - 1.0) * t * p1 - (lf - 1.0) * p0) / lf;
                    p0 = p1;
                    p1 = p2;
                }
                let pk = if k == 0 { 1.0 } else { p1 };
                let pk1 = if k == 1 { 1.0 } else { p0 };
                dp = k as f64 * (t * pk - pk1) / (t * t - 1.0);
                let dt = pk / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - t * t) * dp * dp);
            (0.5 * (1.0 - t), 0.5 * w)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePath {
    /// `t ↦ t x`
    Radial,
    /// along `x_0`, then `x_1`, …
    AxisByAxis,
}

const TRACE_NODES: usize = 16;

/// `x ↦ ∫ α` from the origin to `x` along the chosen path.
pub fn line_integral(alpha: &FormField, path: TracePath) -> FormField {
    let n = alpha.dim();
    let rule = gauss_legendre(TRACE_NODES);
    let alpha = alpha.clone();
    FormField::scalar(n, move |x| match path {
        TracePath::Radial => rule
            .iter()
            .map(|(t, w)| {
                let y: Vec<f64> = x.iter().map(|v| v * t).collect();
                let a = alpha.eval(&y).components();
                w * a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>()
            })
            .sum(),
        TracePath::AxisByAxis => {
            let mut total = 0.0;
            let mut base = vec![0.0; n];
            for k in 0..n {
                if x[k] != 0.0 {
                    for (t, w) in &rule {
                        let mut y = base.clone();
                        y[k] = t * x[k];
                        total += w * x[k] * alpha.eval(&y).components()[k];
                    }
                }
                base[k] = x[k];
            }
            total
        }
    })
}

/// `max |dα| / max |∇α|` over the plan.
/// `max |dα| / max(|∇α|, floor)` over the plan. The floor keeps a vanishing
/// `α` from being judged against its own round-off.
pub fn closedness_defect(
    geom: &ChartGeometry,
    alpha: &FormField,
    plan: &SamplePlan,
    floor: f64,
) -> Result<f64, ChartError> {
    let mut acc = SupRelative::default();
    for j in jets(geom, alpha, plan, false)? {
        acc.add_raw(d_from_jet(&j).norm(), j.grad_norm().max(floor));
    }
    Ok(acc.value())
}

/// `max |φ|` in the adapted frame over the plan.
pub fn sup_norm(
    geom: &ChartGeometry,
    phi: &FormField,
    plan: &SamplePlan,
) -> Result<f64, ChartError> {
    let mut worst = 0.0f64;
    for x in plan.points() {
        worst = worst.max(geom.frame(x)?.to_frame(&phi.try_eval(x)?).norm());
    }
    Ok(worst)
}

/// Closedness threshold for line integration of `δ^c φ`.
pub const CLOSEDNESS_THRESHOLD: f64 = 1e-4;

/// Potential `f` with `df = δ^c φ`, `f(0) = 0`, by radial line integration.
/// Rejects `φ` whose `δ^c φ` is not closed on the plan.
pub fn generalized_trace(
    geom: &ChartGeometry,
    phi: &FormField,
    plan: &SamplePlan,
) -> Result<FormField, ChartError> {
    phi.check_shape(geom.n(), 2)?;
    let alpha = numeric_operator(geom, phi, plan.stencil(), DiffOp::Deltac);
    let curl = closedness_defect(geom, &alpha, plan, sup_norm(geom, phi, plan)?)?;
    if !(curl <= CLOSEDNESS_THRESHOLD) {
        return Err(ChartError::NotClosed(curl));
    }
    Ok(line_integral(&alpha, TracePath::Radial))
}

/// Least-squares fit `t ≈ c s + c0`; returns `(c, c0, relative residual)`.
pub fn affine_fit(s: &[f64], t: &[f64]) -> (f64, f64, f64) {
    let k = s.len() as f64;
    let (ms, mt) = (s.iter().sum::<f64>() / k, t.iter().sum::<f64>() / k);
    let sxx: f64 = s.iter().map(|v| (v - ms).powi(2)).sum();
    let sxy: f64 = s.iter().zip(t).map(|(a, b)| (a - ms) * (b - mt)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = mt - c * ms;
    let res: f64 = s
        .iter()
        .zip(t)
        .map(|(a, b)| (b - c * a - c0).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = t.iter().map(|v| (v - mt).powi(2)).sum::<f64>().sqrt();
    (c, c0, relative(res, norm))
}

/// Fit of the generalized trace of `(dd^c f)_0` against `f`.
#[derive(Debug, Clone, Copy)]
pub struct TraceFit {
    pub slope: f64,
    pub offset: f64,
    pub residual: f64,
}

/// Integrates `δ^c` of the primitive part of `φ̂` at the plan points and fits
/// it against the eigenfunction.
pub fn fit_generalized_trace(
    geom: &ChartGeometry,
    f: &FormField,
    plan: &SamplePlan,
) -> Result<TraceFit, ChartError> {
    let phi = primitive_part_field(geom, &build_phi_hat(geom, f, plan.stencil())?);
    let tr = generalized_trace(geom, &phi, plan)?;
    let s: Vec<f64> = plan
        .points()
        .iter()
        .map(|x| f.eval(x).scalar_value())
        .collect();
    let t: Vec<f64> = plan
        .points()
        .iter()
        .map(|x| tr.eval(x).scalar_value())
        .collect();
    let (slope, offset, residual) = affine_fit(&s, &t);
    Ok(TraceFit {
        slope,
        offset,
        residual,
    })
}

fn mu_denominators(n: usize, p: usize) -> (f64, f64) {
    let (n, p) = (n as f64, p as f64);
    ((p - 1.0) * (n - p) - 2.0, p * (n - p - 1.0) - 2.0)
}

/// `μ1 = -2(n-p+1)/((p-1)(n-p)-2)`, `None` on a zero denominator.
pub fn mu1(n: usize, p: usize) -> Option<f64> {
    let (d, _) = mu_denominators(n, p);
    (d != 0.0).then(|| -2.0 * (n as f64 - p as f64 + 1.0) / d)
}

/// `μ2 = 2(p+1)/(p(n-p-1)-2)`, `None` on a zero denominator.
pub fn mu2(n: usize, p: usize) -> Option<f64> {
    let (_, d) = mu_denominators(n, p);
    (d != 0.0).then(|| 2.0 * (p as f64 + 1.0) / d)
}

/// Pointwise comparisons collected by the structure-form check.
#[derive(Default)]
struct StructureAccumulators {
    twistor: f64,
    deltac_rel: SupRelative,
    dc_rel: SupRelative,
    delta_rel: SupRelative,
    d_rel: SupRelative,
    eig_du: SupRelative,
    eig_deltau: SupRelative,
    ratio: SupRelative,
    off_level_du: SupRelative,
    off_level_deltau: SupRelative,
    ju: SupRelative,
    grad_ju: SupRelative,
    grad_lambda_ju: SupRelative,
}

/// Builds `u = L^{k-1}φ - (m-p)/(p(m²-1)) L^k f_tr` from the special form
/// `φ = (dd^c f)_0` and its fitted generalized trace, then checks the
/// twistor equation, the four first-order relations with `μ1`, `μ2`, the
/// `ΛL` eigen-equations on `du` and `δu`, the `w / Jv` ratio, the Lefschetz
/// levels of `du` and `δu`, and that `Ju`, `ΛJu` are parallel.
pub fn theorem_main_field_check(
    geom: &ChartGeometry,
    plan: &SamplePlan,
    trace_plan: &SamplePlan,
    ks: &[usize],
) -> Result<Findings, ChartError> {
    let (m, n) = (geom.m(), geom.n());
    let st = plan.stencil();
    let kf = kframe(geom);
    let f = laplace_eigenfunction(geom, &default_eigen_matrix(m))?;
    let phi = primitive_part_field(geom, &build_phi_hat(geom, &f, st)?);
    let fit = fit_generalized_trace(geom, &f, trace_plan)?;
    let mut out = Findings::new();
    out.push(
        "generalized_trace_fit",
        "delta^c phi = d f_tr with f_tr proportional to the eigenfunction",
        fit.residual,
        tolerance::FD_NESTED,
    );
    let expected_slope = -4.0 * ((m * m) as f64 - 1.0) / m as f64;
    out.push(
        "generalized_trace_slope",
        "f_tr = -4(m^2-1)/m f for phi = (dd^c f)_0",
        relative((fit.slope - expected_slope).abs(), expected_slope.abs()),
        tolerance::FD_SECOND,
    );
    let trace_field = f.scale(fit.slope);
    for &k in ks {
        let p = 2 * k;
        if k == 0 || p + 2 > n || m < 2 {
            return Err(ChartError::Unsupported(format!("k = {k} for m = {m}")));
        }
        let tag = |s: &str| format!("{s}_p{p}");
        let lphi = (0..k - 1).fold(phi.clone(), |acc, _| point_operator(geom, &acc, PointOp::L));
        let u = lphi.add(
            &omega_power_field(geom, k)
                .times(&trace_field)
                .scale(structure_trace_coefficient(m, p)),
        );
        let du = numeric_operator(geom, &u, st, DiffOp::D);
        let deltau = numeric_operator(geom, &u, st, DiffOp::Delta);
        let dcu = numeric_operator(geom, &u, st, DiffOp::Dc);
        let deltacu = numeric_operator(geom, &u, st, DiffOp::Deltac);
        let lambda_u = point_operator(geom, &u, PointOp::Lambda);
        let l_u = point_operator(geom, &u, PointOp::L);
        let (m1, m2) = (mu1(n, p), mu2(n, p));
        let d_lambda_u = numeric_operator(geom, &lambda_u, st, DiffOp::D);
        let dc_lambda_u = numeric_operator(geom, &lambda_u, st, DiffOp::Dc);
        let delta_l_u = numeric_operator(geom, &l_u, st, DiffOp::Delta);
        let deltac_l_u = numeric_operator(geom, &l_u, st, DiffOp::Deltac);
        let ju = point_operator(geom, &u, PointOp::J);
        let lambda_ju = point_operator(geom, &ju, PointOp::Lambda);
        let e_du = 0.25 * (n as f64 - p as f64 - 2.0) * (p as f64 + 2.0);
        let e_deltau = 0.25 * (n as f64 - p as f64) * p as f64;
        let ratio = (k * (2 * m - 2 * k + 1)) as f64 / (2 * k + 1) as f64;
        let cv = KaehlerFrame::lambda_l_power_coefficient(m, 1, k, k);
        let cw = KaehlerFrame::lambda_l_power_coefficient(m, 1, k - 1, k - 1);
        let mut acc = StructureAccumulators::default();
        for x in plan.points() {
            let frame = geom.frame(x)?;
            let fr = |field: &FormField| -> Result<AlternatingForm, ChartError> {
                Ok(frame.to_frame(&field.try_eval(x)?))
            };
            let j = covariant_jet(geom, &u, x, st, false)?;
            acc.twistor = acc.twistor.max(twistor_residual(&j));
            let (du_x, deltau_x) = (fr(&du)?, fr(&deltau)?);
            if let Some(m1) = m1 {
                acc.deltac_rel
                    .add(&fr(&deltacu)?, &fr(&d_lambda_u)?.scale(m1));
                acc.delta_rel.add(&deltau_x, &fr(&dc_lambda_u)?.scale(-m1));
            }
            if let Some(m2) = m2 {
                acc.dc_rel.add(&fr(&dcu)?, &fr(&delta_l_u)?.scale(m2));
                acc.d_rel.add(&du_x, &fr(&deltac_l_u)?.scale(-m2));
            }
            acc.eig_du.add(
                &kf.lefschetz_lambda(&kf.lefschetz_l(&du_x)),
                &du_x.scale(e_du),
            );
            acc.eig_deltau.add(
                &kf.lefschetz_lambda(&kf.lefschetz_l(&deltau_x)),
                &deltau_x.scale(e_deltau),
            );
            let v = kf.lambda_power(&du_x, k).scale(1.0 / cv);
            let w = kf.lambda_power(&deltau_x, k - 1).scale(1.0 / cw);
            acc.ratio.add(&w, &kf.j_covector(&v).scale(ratio));
            acc.off_level_du
                .add_raw(du_x.distance(&kf.l_power(&v, k)), du_x.norm());
            acc.off_level_deltau
                .add_raw(deltau_x.distance(&kf.l_power(&w, k - 1)), deltau_x.norm());
            acc.ju.add_raw(fr(&ju)?.norm(), j.value().norm());
            let gju = covariant_jet(geom, &ju, x, st, false)?;
            acc.grad_ju.add_raw(gju.grad_norm(), j.grad_norm());
            if p >= 2 {
                let glju = covariant_jet(geom, &lambda_ju, x, st, false)?;
                acc.grad_lambda_ju.add_raw(glju.grad_norm(), j.grad_norm());
            }
        }
        out.push(
            tag("structure_form_twistor_residual"),
            "u = L^{k-1} phi - (m-p)/(p(m^2-1)) L^k f is twistor",
            acc.twistor,
            tolerance::FD_FIRST,
        );
        let skip_reason =
            |which: &str| format!("{which} denominator vanishes for (n, p) = ({n}, {p})");
        let mut rel_or_skip =
            |name: String, anchor: &str, mu: Option<f64>, r: &SupRelative, which: &str| match mu {
                Some(_) => out.push(name, anchor, r.value(), tolerance::FD_SECOND),
                None => out.skip(name, anchor, skip_reason(which)),
            };
        rel_or_skip(
            tag("deltac_u_mu1_d_lambda_u"),
            "delta^c u = mu1 d Lambda u",
            m1,
            &acc.deltac_rel,
            "mu1",
        );
        rel_or_skip(
            tag("dc_u_mu2_delta_l_u"),
            "d^c u = mu2 delta L u",
            m2,
            &acc.dc_rel,
            "mu2",
        );
        rel_or_skip(
            tag("delta_u_minus_mu1_dc_lambda_u"),
            "delta u = -mu1 d^c Lambda u",
            m1,
            &acc.delta_rel,
            "mu1",
        );
        rel_or_skip(
            tag("d_u_minus_mu2_deltac_l_u"),
            "d u = -mu2 delta^c L u",
            m2,
            &acc.d_rel,
            "mu2",
        );
        out.push(
            tag("lambda_l_du_eigenvalue"),
            "Lambda L du = (n-p-2)(p+2)/4 du",
            acc.eig_du.value(),
            tolerance::FD_SECOND,
        );
        out.push(
            tag("lambda_l_delta_u_eigenvalue"),
            "Lambda L delta u = (n-p)p/4 delta u",
            acc.eig_deltau.value(),
            tolerance::FD_SECOND,
        );
        match m1 {
            Some(_) => out.push(
                tag("w_over_jv_ratio"),
                "w = k(2m-2k+1)/(2k+1) J v",
                acc.ratio.value(),
                tolerance::FD_SECOND,
            ),
            None => out.skip(
                tag("w_over_jv_ratio"),
                "w = k(2m-2k+1)/(2k+1) J v",
                skip_reason("mu1"),
            ),
        }
        out.push(
            tag("du_off_level_mass"),
            "du = L^k v",
            acc.off_level_du.value(),
            tolerance::FD_SECOND,
        );
        out.push(
            tag("delta_u_off_level_mass"),
            "delta u = L^{k-1} w",
            acc.off_level_deltau.value(),
            tolerance::FD_SECOND,
        );
        out.push(
            tag("ju_vanishes"),
            "Ju = 0 for the invariant construction",
            acc.ju.value(),
            tolerance::FD_SECOND,
        );
        out.push(
            tag("ju_parallel"),
            "Ju is parallel",
            acc.grad_ju.value(),
            tolerance::FD_SECOND,
        );
        out.push(
            tag("lambda_ju_parallel"),
            "Lambda J u is parallel",
            acc.grad_lambda_ju.value(),
            tolerance::FD_SECOND,
        );
    }
    Ok(out)
}

/// Twistor → Hamiltonian → twistor on `φ̂`; needs `m > 2`.
#[derive(Debug, Clone, Copy)]
pub struct RoundTrip {
    pub twistor_in: f64,
    pub hamiltonian: f64,
    pub twistor_back: f64,
    pub invariance: f64,
}

pub fn hamiltonian_round_trip(
    geom: &ChartGeometry,
    plan: &SamplePlan,
) -> Result<RoundTrip, ChartError> {
    let m = geom.m();
    if m <= 2 {
        return Err(ChartError::Unsupported(format!(
            "the conversion to Hamiltonian form needs m > 2, got {m}"
        )));
    }
    let st = plan.stencil();
    let kf = kframe(geom);
    let f = laplace_eigenfunction(geom, &default_eigen_matrix(m))?;
    let u = build_phi_hat(geom, &f, st)?;
    let shift = |field: &FormField, c: f64| {
        let g = geom.clone();
        field.map(2, move |x, v| {
            let tr = apply_point_op(&g, x, &v, PointOp::Lambda).scalar_value();
            v.add_scaled(-tr * c, &g.kaehler_form(x))
        })
    };
    let psi = shift(&u, 1.0 / (m as f64 - 2.0));
    let back = shift(&psi, 0.5);
    let mut out = RoundTrip {
        twistor_in: 0.0,
        hamiltonian: 0.0,
        twistor_back: 0.0,
        invariance: 0.0,
    };
    let mut inv = SupRelative::default();
    for x in plan.points() {
        out.twistor_in = out
            .twistor_in
            .max(twistor_residual(&covariant_jet(geom, &u, x, st, false)?));
        let jp = covariant_jet(geom, &psi, x, st, false)?;
        let sigma = trace_gradient(&kf, &jp);
        out.hamiltonian = out.hamiltonian.max(hamiltonian_residual(&kf, &jp, &sigma)?);
        inv.add_raw(kf.j_extension(jp.value()).norm(), jp.value().norm());
        out.twistor_back = out
            .twistor_back
            .max(twistor_residual(&covariant_jet(geom, &back, x, st, false)?));
    }
    out.invariance = inv.value();
    Ok(out)
}

/// Max residual of a second-order curvature identity over chart jets.
pub fn curvature_field_check(
    geom: &ChartGeometry,
    r: &CurvatureOperator,
    field: &FormField,
    plan: &SamplePlan,
    which: CurvatureIdentity,
) -> Result<f64, ChartError> {
    let mut worst = 0.0f64;
    for j in jets(geom, field, plan, true)? {
        let v = match which {
            CurvatureIdentity::Integrability => integrability_residual(r, &j)?,
            CurvatureIdentity::Weitzenboeck => weitzenboeck_residual(r, &j)?,
            CurvatureIdentity::MiddleDimension => {
                middim_characterization_residual(r, &j, geom.m())?
            }
            CurvatureIdentity::RoughSplit => crate::curvature::rough_laplacian_split_residual(&j)?,
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureIdentity {
    /// `q(R)ψ = p/(p+1) δdψ + (n-p)/(n-p+1) dδψ`
    Integrability,
    /// `Δ = ∇*∇ + q(R)`
    Weitzenboeck,
    /// `Δu = (m+1)/m q(R) u`
    MiddleDimension,
    /// `∇*∇ = 1/(p+1) δd + 1/(n-p+1) dδ + T*T`
    RoughSplit,
}

/// Results of the middle-degree checks on `CP²`.
#[derive(Debug, Clone, Copy)]
pub struct MiddleDimension {
    pub specialm: f64,
    pub characterization: f64,
    pub detuned: f64,
    pub hodge_invariance: f64,
    pub split_consistent: bool,
}

pub fn middim_suite(plan: &SamplePlan) -> Result<MiddleDimension, ChartError> {
    let geom = ChartGeometry::fubini_study(2)?;
    let st = plan.stencil();
    let kf = kframe(&geom);
    let r = cpm_curvature(2)?;
    let f = laplace_eigenfunction(&geom, &default_eigen_matrix(2))?;
    let phi = build_phi_hat(&geom, &f, st)?;
    let mut a = DMatrix::from_element(3, 3, num_complex::Complex64::new(0.0, 0.0));
    a[(0, 2)] = num_complex::Complex64::new(0.5, 0.3);
    a[(2, 0)] = a[(0, 2)].conj();
    let other = build_phi_hat(&geom, &laplace_eigenfunction(&geom, &a)?, st)?;
    let bump = FormField::scalar(4, |x| (0.7 * x[0] - 0.4 * x[3]).sin());
    let non_twistor = kaehler_form_field(&geom).times(&bump);
    let mut out = MiddleDimension {
        specialm: 0.0,
        characterization: 0.0,
        detuned: f64::INFINITY,
        hodge_invariance: 0.0,
        split_consistent: true,
    };
    for x in plan.points() {
        let j = covariant_jet(&geom, &phi, x, st, true)?;
        out.specialm = out.specialm.max(specialm_residual(&kf, &j)?);
        out.characterization = out
            .characterization
            .max(middim_characterization_residual(&r, &j, 2)?);
        out.detuned = out
            .detuned
            .min(middim_residual_with_coefficient(&r, &j, 1.5 * 1.1)?);
        let dual = hodge_dual_jet(&j);
        out.hodge_invariance = out
            .hodge_invariance
            .max((twistor_residual(&dual) - twistor_residual(&j)).abs());
        let jw = covariant_jet(&geom, &other, x, st, false)?;
        let jn = covariant_jet(&geom, &non_twistor, x, st, false)?;
        let jp = covariant_jet(&geom, &phi, x, st, false)?;
        let twistor_pair = middim_split_check(&kf, &[jp.clone(), jw], tolerance::FD_SECOND)?;
        let broken_pair = middim_split_check(&kf, &[jp, jn], tolerance::FD_SECOND)?;
        out.split_consistent &= twistor_pair && broken_pair;
    }
    Ok(out)
}

/// `R^l_{ijk}` lowered with the metric, from second differences of `g`.
fn riemann_lowered_fd(geom: &ChartGeometry, x: &[f64], st: Stencil) -> Vec<f64> {
    let n = geom.n();
    let gamma_fd = |y: &[f64]| -> Vec<f64> {
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|a| st.partial(|z| geom.metric(z), y, a))
            .collect();
        let ginv = geom.metric(y).try_inverse().expect("metric invertible");
        let c = Christoffel::from_metric(&ginv, &dg);
        let mut v = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    v.push(c.get(k, i, j));
                }
            }
        }
        v
    };
    let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let g0 = gamma_fd(x);
    let dgamma: Vec<Vec<f64>> = (0..n).map(|a| st.partial(gamma_fd, x, a)).collect();
    let g = geom.metric(x);
    let mut out = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgamma[i][idx(l, j, k)] - dgamma[j][idx(l, i, k)];
                    for s in 0..n {
                        v += g0[idx(l, i, s)] * g0[idx(s, j, k)]
                            - g0[idx(l, j, s)] * g0[idx(s, i, k)];
                    }
                    for mm in 0..n {
                        out[((i * n + j) * n + k) * n + mm] += v * g[(l, mm)];
                    }
                }
            }
        }
    }
    out
}

fn frame_tensor(lowered: &[f64], frame: &PointFrame) -> Vec<f64> {
    let p = frame.matrix();
    let n = p.nrows();
    let mut t = lowered.to_vec();
    // contract one slot at a time
    for slot in 0..4 {
        let mut next = vec![0.0; t.len()];
        let stride = n.pow(3 - slot as u32);
        for (flat, v) in t.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let a = (flat / stride) % n;
            for alpha in 0..n {
                let target = flat - a * stride + alpha * stride;
                next[target] += p[(a, alpha)] * v;
            }
        }
        t = next;
    }
    t
}

/// `max |R_fd - R_model| / max |R_model|` in the adapted frame.
pub fn riemann_fd_check(geom: &ChartGeometry, plan: &SamplePlan) -> Result<f64, ChartError> {
    let n = geom.n();
    let model = cpm_curvature(geom.m())?;
    let mut acc = SupRelative::default();
    for x in plan.points() {
        let frame = geom.frame(x)?;
        let r = frame_tensor(&riemann_lowered_fd(geom, x, plan.stencil()), &frame);
        let (mut defect, mut scale) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let want = model.tensor(i, j, k, l);
                        defect = defect.max((r[((i * n + j) * n + k) * n + l] - want).abs());
                        scale = scale.max(want.abs());
                    }
                }
            }
        }
        acc.add_raw(defect, scale);
    }
    Ok(acc.value())
}

/// `max |∇g|` and `max |∇J|` over the plan, with `∂g` by differencing,
/// relative to the largest coordinate derivative or connection term.
pub fn kaehler_structure_check(
    geom: &ChartGeometry,
    plan: &SamplePlan,
) -> Result<(f64, f64), ChartError> {
    let n = geom.n();
    let (mut ng, mut nj) = (0.0f64, 0.0f64);
    let (mut sg, mut sj) = (0.0f64, 0.0f64);
    for x in plan.points() {
        let st = plan.stencil();
        let g = geom.metric(x);
        let j = geom.j_field(x);
        let gamma = geom.christoffel(x);
        for a in 0..n {
            let dg = st.partial(|y| geom.metric(y), x, a);
            let dj = st.partial(|y| geom.j_field(y), x, a);
            for b in 0..n {
                for c in 0..n {
                    let mut vg = dg[(b, c)];
                    let mut vj = dj[(b, c)];
                    sg = sg.max(vg.abs());
                    sj = sj.max(vj.abs());
                    for d in 0..n {
                        let (g1, g2) = (
                            gamma.get(d, a, b) * g[(d, c)],
                            gamma.get(d, a, c) * g[(b, d)],
                        );
                        let (j1, j2) = (
                            gamma.get(b, a, d) * j[(d, c)],
                            gamma.get(d, a, c) * j[(b, d)],
                        );
                        vg -= g1 + g2;
                        vj += j1 - j2;
                        sj = sj.max(j1.abs()).max(j2.abs());
                    }
                    ng = ng.max(vg.abs());
                    nj = nj.max(vj.abs());
                }
            }
        }
    }
    Ok((relative(ng, sg), relative(nj, sj)))
}

/// Error reduction factor of first derivatives when `h` is halved, on a
/// single-frequency trigonometric form with known derivative.
pub fn fd_convergence_ratio(st: Stencil) -> Result<f64, ChartError> {
    let n = 4;
    let k = [0.9, -0.6, 0.4, 1.1];
    let field = FormField::new(n, 2, move |x| {
        let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + 0.3;
        AlternatingForm::from_terms(n, 2, [(0b0011, arg.sin()), (0b1010, 2.0 * arg.cos())])
    });
    let x = [0.2, -0.1, 0.4, 0.3];
    let arg: f64 = k.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + 0.3;
    let exact: Vec<AlternatingForm> = (0..n)
        .map(|a| {
            AlternatingForm::from_terms(
                n,
                2,
                [
                    (0b0011, k[a] * arg.cos()),
                    (0b1010, -2.0 * k[a] * arg.sin()),
                ],
            )
        })
        .collect();
    let err = |s: Stencil| -> f64 {
        (0..n)
            .map(|a| s.partial(|y| field.eval(y), &x, a).distance(&exact[a]))
            .fold(0.0, f64::max)
    };
    Ok(err(st) / err(st.halved()?))
}

/// `max` over the plan of `|T(*ψ)|/|∇*ψ| - |Tψ|/|∇ψ|` for chart jets.
pub fn hodge_jet_invariance(
    geom: &ChartGeometry,
    field: &FormField,
    plan: &SamplePlan,
) -> Result<f64, ChartError> {
    let mut worst = 0.0f64;
    for j in jets(geom, field, plan, false)? {
        worst = worst.max((twistor_residual(&hodge_dual_jet(&j)) - twistor_residual(&j)).abs());
    }
    Ok(worst)
}

/// `|δψ| / |∇ψ|`, used as a coclosedness gauge.
pub fn coclosed_defect(j: &CovariantJet) -> f64 {
    relative(delta_from_jet(j).norm(), j.grad_norm())
}
