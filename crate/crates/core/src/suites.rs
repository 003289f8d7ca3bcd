//! Batch checks grouped the way the command-line runner exposes them.
//!
//! Every suite returns a [`SuiteReport`]; a check passes when its residual is
//! at most its tolerance. Lower-bound checks (a quantity that must stay away
//! from zero) are recorded as `floor / value` against a tolerance of one.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chart::{
    self, build_phi_hat, closedness_defect, commutator_suite, conformal_twistor_check,
    covariant_jet, curvature_field_check, default_eigen_matrix, fd_convergence_ratio,
    gaussian_bump, hamiltonian_round_trip, kaehler_form_field, kaehler_structure_check,
    killing_field_check, killing_from_potential, laplace_eigen_residual, laplace_eigenfunction,
    line_integral, linear_function, middim_suite, numeric_operator, phi_hat_diagnostics,
    point_operator, polynomial_field, primitive_part_field, riemann_fd_check,
    theorem_main_field_check, trig_field, ChartError, ChartGeometry, Christoffel,
    CurvatureIdentity, DiffOp, FormField, PointOp, SamplePlan, Stencil, TracePath,
};
use crate::curvature::{cpm_curvature, CurvatureError, CurvatureOperator};
use crate::exterior::{binomial, AlternatingForm};
use crate::kaehler::{KaehlerError, KaehlerFrame};
use crate::report::{tolerance, ConfigEcho, Findings, SuiteReport};
use crate::twistor::{
    gamma_equation, hodge_dual_jet, middim_split_check, relative,
    twistor2_characterization_residual, twistor_residual, CovariantJet, TwistorError,
};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Kaehler(#[from] KaehlerError),
    #[error(transparent)]
    Twistor(#[from] TwistorError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

/// Largest complex dimension accepted by the chart suites.
pub const MAX_CHART_M: usize = 4;
/// Largest complex dimension of the exhaustive algebra checks.
pub const MAX_ALGEBRA_M: usize = 5;
/// Floor used by the lower-bound checks.
pub const NONZERO_FLOOR: f64 = 1e-2;
/// Points used for nested-difference curvature and the Riemann tensor.
const HESSIAN_POINTS: usize = 6;
/// Points of the trace-fit plan, sampled in the unit ball.
const TRACE_POINTS: usize = 6;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub m: Option<usize>,
    pub degree: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub stencil: Stencil,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            m: None,
            degree: None,
            samples: SamplePlan::DEFAULT_SAMPLES,
            seed: SamplePlan::DEFAULT_SEED,
            stencil: Stencil::default(),
        }
    }
}

impl SuiteConfig {
    fn echo(&self, m: Option<usize>, p: Option<usize>) -> ConfigEcho {
        ConfigEcho {
            m,
            p,
            h: self.stencil.h(),
            order: self.stencil.order().as_u8(),
            samples: self.samples,
            seed: self.seed,
        }
    }

    fn plan(&self, n: usize) -> Result<SamplePlan, SuiteError> {
        if self.samples == 0 {
            return Err(SuiteError::Usage("--samples must be positive".into()));
        }
        Ok(SamplePlan::halton(n, self.samples, self.seed)?.with_stencil(self.stencil))
    }
}

fn chart_m(m: Option<usize>, default: usize, max: usize) -> Result<usize, SuiteError> {
    let m = m.unwrap_or(default);
    if m == 0 || m > max {
        return Err(SuiteError::Usage(format!("m = {m} is outside 1..={max}")));
    }
    Ok(m)
}

/// `floor / value`, for quantities that must be at least `floor`.
fn lower_bound(value: f64, floor: f64) -> f64 {
    if value > 0.0 {
        floor / value
    } else {
        f64::INFINITY
    }
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

fn finish(suite: &str, config: ConfigEcho, findings: Findings, start: Instant) -> SuiteReport {
    SuiteReport::new(suite, config, findings, start.elapsed().as_secs_f64())
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, p: usize) -> AlternatingForm {
    let coeffs: Vec<f64> = (0..binomial(n, p))
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    AlternatingForm::from_dense(n, p, &coeffs)
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CovariantJet {
    let value = random_form(rng, n, p);
    let grad = (0..n).map(|_| random_form(rng, n, p)).collect();
    CovariantJet::new(value, grad).expect("shapes agree")
}

// ---------------------------------------------------------------- algebra

/// Largest absolute defect of `[Λ, L^s]α = s(m-p-s+1) L^{s-1}α` over basis
/// forms of every degree and `1 <= s <= m + 1`.
pub fn lambda_ls_commutator_defect(f: &KaehlerFrame) -> f64 {
    let (m, n) = (f.m(), f.n());
    let mut worst = 0.0f64;
    for p in 0..=n {
        for alpha in f.basis_forms(p) {
            for s in 1..=m + 1 {
                let lhs = f.commutator_lambda_ls(&alpha, s);
                let c = KaehlerFrame::commutator_coefficient(m, p, s);
                let rhs = f.l_power(&alpha, s - 1);
                let rhs = if lhs.degree() == rhs.degree() {
                    rhs.scale(c)
                } else {
                    AlternatingForm::zero(n, lhs.degree())
                };
                worst = worst.max(lhs.distance(&rhs));
            }
        }
    }
    worst
}

/// `ΛL^s α - L^s Λα` computed by the half-sum `Λ = ½ Σ Je_i ⌟ e_i ⌟`, compared
/// with the library commutator over all basis forms.
pub fn commutator_composition_defect(f: &KaehlerFrame) -> f64 {
    let (m, n) = (f.m(), f.n());
    let lambda = |a: &AlternatingForm| -> AlternatingForm {
        if a.degree() < 2 {
            return AlternatingForm::zero(n, 0);
        }
        let parts: Vec<_> = (0..n)
            .map(|i| a.interior_unit(i).contract(&f.j_unit(i)).scale(0.5))
            .collect();
        crate::exterior::sum_forms(n, a.degree() - 2, &parts)
    };
    let l = |a: &AlternatingForm| f.omega().wedge(a);
    let mut worst = 0.0f64;
    for p in 0..=n {
        for alpha in f.basis_forms(p) {
            for s in 1..=m + 1 {
                if p + 2 * s > n {
                    continue;
                }
                let mut ls = alpha.clone();
                for _ in 0..s {
                    ls = l(&ls);
                }
                let left = lambda(&ls);
                let expected = if p >= 2 {
                    let mut right = lambda(&alpha);
                    for _ in 0..s {
                        right = l(&right);
                    }
                    &left - &right
                } else {
                    left
                };
                worst = worst.max(f.commutator_lambda_ls(&alpha, s).distance(&expected));
            }
        }
    }
    worst
}

/// Primitive parts of the basis forms of degree `p <= m`, dropping zeros.
fn primitive_basis(f: &KaehlerFrame, p: usize) -> Vec<AlternatingForm> {
    f.basis_forms(p)
        .filter_map(|b| f.primitive_part(&b).ok())
        .filter(|u| u.norm() > 1e-9)
        .collect()
}

/// Relative defect of `Λ^r L^s α = c L^{s-r} α` over primitive `α`.
pub fn lambda_r_l_s_defect(f: &KaehlerFrame) -> f64 {
    let m = f.m();
    let mut worst = 0.0f64;
    for p in 0..=m {
        for alpha in primitive_basis(f, p) {
            for s in 0..=(m - p) {
                for r in 0..=s {
                    let lhs = f.lambda_power(&f.l_power(&alpha, s), r);
                    let c = KaehlerFrame::lambda_l_power_coefficient(m, p, r, s);
                    let rhs = f.l_power(&alpha, s - r).scale(c);
                    worst = worst.max(relative(lhs.distance(&rhs), alpha.norm()));
                }
            }
        }
    }
    worst
}

/// Largest residual of `ΛL = (i+1)(m-p+i)` on `L^i` of primitive basis parts.
pub fn lambda_l_spectrum_defect(f: &KaehlerFrame) -> Result<f64, KaehlerError> {
    let m = f.m();
    let mut worst = 0.0f64;
    for p in 0..=m {
        for i in 0..=p / 2 {
            for u in primitive_basis(f, p - 2 * i) {
                let level = f.l_power(&u, i);
                for e in f.lambda_l_eigencheck(&level)? {
                    if e.level != i {
                        return Ok(f64::INFINITY);
                    }
                    worst = worst.max(e.residual);
                }
            }
        }
    }
    Ok(worst)
}

/// Whether `(i+1)(m-p+i)`, `0 <= i <= p/2`, are pairwise distinct for every
/// `p <= m`, checked in integers.
pub fn lambda_l_eigenvalues_distinct(m: usize) -> bool {
    (0..=m).all(|p| {
        let mut values: Vec<usize> = (0..=p / 2).map(|i| (i + 1) * (m - p + i)).collect();
        let len = values.len();
        values.sort_unstable();
        values.dedup();
        values.len() == len
    })
}

/// Worst relative error of decompose-then-reassemble on random forms.
pub fn lefschetz_round_trip(count: usize, seed: u64) -> Result<f64, KaehlerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let m = 1 + i % MAX_ALGEBRA_M;
        let f = KaehlerFrame::new(m)?;
        let p = rng.gen_range(0..=m);
        let a = random_form(&mut rng, f.n(), p);
        let back = f.lefschetz_decompose(&a)?.reassemble(&f);
        worst = worst.max(relative(back.distance(&a), a.norm()));
    }
    Ok(worst)
}

/// Outcome of the degree-two equivalence sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepSummary {
    pub jets: usize,
    pub both_vanish: usize,
    pub neither_vanishes: usize,
    pub mismatches: usize,
    /// largest residual among jets where both residuals vanish
    pub max_vanishing: f64,
    /// smallest residual among jets where neither vanishes
    pub min_nonvanishing: f64,
}

/// Jet families of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFamily {
    /// `∇_X u = γ ∧ JX - Jγ ∧ X - γ(X) ω`
    Gamma,
    /// zero gradient
    Parallel,
    /// independent random entries
    Generic,
    /// gamma jets plus a random perturbation of relative size `1e-6..1e-2`
    Perturbed,
    /// gamma jets with the `ω` coefficient moved away from one
    Detuned,
}

impl SweepFamily {
    pub const ALL: [SweepFamily; 5] = [
        SweepFamily::Gamma,
        SweepFamily::Parallel,
        SweepFamily::Generic,
        SweepFamily::Perturbed,
        SweepFamily::Detuned,
    ];

    pub fn sample(self, f: &KaehlerFrame, rng: &mut ChaCha8Rng) -> CovariantJet {
        let n = f.n();
        let value = random_form(rng, n, 2);
        let gamma_jet = |rng: &mut ChaCha8Rng, c: f64| {
            let gamma = random_form(rng, n, 1);
            CovariantJet::new(value.clone(), gamma_equation(f, &gamma, c)).expect("shapes agree")
        };
        match self {
            SweepFamily::Gamma => gamma_jet(rng, 1.0),
            SweepFamily::Parallel => CovariantJet::parallel(value.clone()),
            SweepFamily::Generic => random_jet(rng, n, 2),
            SweepFamily::Perturbed => {
                let base = gamma_jet(rng, 1.0);
                let noise = random_jet(rng, n, 2);
                let eps = 10f64.powf(rng.gen_range(-6.0..-2.0)) * base.grad_norm()
                    / noise.grad_norm().max(1e-300);
                let grad = base
                    .grad()
                    .iter()
                    .zip(noise.grad())
                    .map(|(a, b)| a.add_scaled(eps, b))
                    .collect();
                CovariantJet::new(value.clone(), grad).expect("shapes agree")
            }
            SweepFamily::Detuned => {
                let shift = rng.gen_range(0.1..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                gamma_jet(rng, 1.0 + shift)
            }
        }
    }
}

/// Compares the degree-two characterization with the twistor residual on
/// `per_family` jets of each family for each `m`.
pub fn equivalence_sweep(
    ms: &[usize],
    per_family: usize,
    seed: u64,
    threshold: f64,
) -> Result<SweepSummary, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SweepSummary {
        min_nonvanishing: f64::INFINITY,
        ..SweepSummary::default()
    };
    for &m in ms {
        if m < 2 {
            return Err(SuiteError::Usage(format!(
                "the sweep needs m >= 2, got {m}"
            )));
        }
        let f = KaehlerFrame::new(m)?;
        for family in SweepFamily::ALL {
            for _ in 0..per_family {
                let j = family.sample(&f, &mut rng);
                let a = twistor2_characterization_residual(&f, &j)?;
                let b = twistor_residual(&j);
                s.jets += 1;
                match (a < threshold, b < threshold) {
                    (true, true) => {
                        s.both_vanish += 1;
                        s.max_vanishing = s.max_vanishing.max(a).max(b);
                    }
                    (false, false) => {
                        s.neither_vanishes += 1;
                        s.min_nonvanishing = s.min_nonvanishing.min(a).min(b);
                    }
                    _ => s.mismatches += 1,
                }
            }
        }
    }
    Ok(s)
}

/// Exhaustive exact algebra, the `ΛL` spectrum and the degree-two sweep.
pub fn algebra(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let mut out = Findings::new();
    for m in 1..=MAX_ALGEBRA_M {
        let f = KaehlerFrame::new(m)?;
        out.push(
            format!("lambda_ls_commutator_m{m}"),
            "[Lambda, L^s] a = s(m-p-s+1) L^{s-1} a on every basis form",
            lambda_ls_commutator_defect(&f),
            tolerance::EXACT,
        );
        out.push(
            format!("lambda_ls_commutator_by_composition_m{m}"),
            "commutator agrees with explicit Lambda and L compositions",
            commutator_composition_defect(&f),
            tolerance::EXACT,
        );
        out.push(
            format!("lambda_r_l_s_primitive_m{m}"),
            "Lambda^r L^s a = s!(m-p-s+r)!/((s-r)!(m-p-s)!) L^{s-r} a for primitive a",
            lambda_r_l_s_defect(&f),
            tolerance::EXACT,
        );
        out.push(
            format!("lambda_l_spectrum_m{m}"),
            "Lambda L = (i+1)(m-p+i) on L^i(primitive)",
            lambda_l_spectrum_defect(&f)?,
            tolerance::SPECTRAL,
        );
        out.push(
            format!("lambda_l_eigenvalues_distinct_m{m}"),
            "(i+1)(m-p+i), 0 <= i <= p/2, pairwise distinct (integer check)",
            flag(lambda_l_eigenvalues_distinct(m)),
            0.0,
        );
        out.push(
            format!("hodge_star_involution_m{m}"),
            "** = (-1)^{p(n-p)} on basis forms",
            hodge_involution_defect(f.n()),
            tolerance::EXACT,
        );
    }
    out.push(
        "lefschetz_round_trip",
        "decompose then reassemble is the identity on 1000 random forms, m <= 5",
        lefschetz_round_trip(1000, cfg.seed)?,
        tolerance::EXACT,
    );
    let sweep = equivalence_sweep(&[2, 3, 4], 70, cfg.seed, 1e-10)?;
    out.push(
        "degree2_characterization_equivalence_mismatches",
        "gamma characterization vanishes iff the twistor residual vanishes (threshold 1e-10, >= 1000 jets)",
        sweep.mismatches as f64,
        0.0,
    );
    out.push(
        "degree2_characterization_sweep_size",
        "at least 1000 jets sampled",
        lower_bound(sweep.jets as f64, 1000.0),
        1.0,
    );
    out.push(
        "degree2_characterization_vanishing_side",
        "largest residual on jets where both vanish",
        sweep.max_vanishing,
        1e-10,
    );
    Ok(finish("algebra", cfg.echo(None, None), out, start))
}

fn hodge_involution_defect(n: usize) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..=n {
        let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
        for mask in crate::exterior::basis_masks(n, p) {
            let a = AlternatingForm::from_terms(n, p, [(*mask, 1.0)]);
            worst = worst.max(a.hodge_star().hodge_star().distance(&a.scale(sign)));
        }
    }
    worst
}

// ----------------------------------------------------------- commutators

/// The Kähler commutator and anticommutator relations on `CP^m`, plus
/// operator sanity checks.
pub fn commutators(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let m = chart_m(cfg.m, 2, MAX_CHART_M)?;
    let geom = ChartGeometry::fubini_study(m)?;
    let n = geom.n();
    let plan = cfg.plan(n)?;
    let st = plan.stencil();
    let mut out = commutator_suite(&geom, &plan)?;
    let f = laplace_eigenfunction(&geom, &default_eigen_matrix(m))?;
    let trig = trig_field(n, 1.min(n), cfg.seed ^ 0x5eed);
    let dd = numeric_operator(
        &geom,
        &numeric_operator(&geom, &trig, st, DiffOp::D),
        st,
        DiffOp::D,
    );
    let d1 = numeric_operator(&geom, &trig, st, DiffOp::D);
    let dc = numeric_operator(&geom, &f, st, DiffOp::Dc);
    let jdf = point_operator(
        &geom,
        &numeric_operator(&geom, &f, st, DiffOp::D),
        PointOp::J,
    );
    let delta_omega = numeric_operator(&geom, &kaehler_form_field(&geom), st, DiffOp::Delta);
    let (mut dd_acc, mut dc_acc, mut dw) = (
        chart::SupRelative::default(),
        chart::SupRelative::default(),
        chart::SupRelative::default(),
    );
    for x in plan.points() {
        let frame = geom.frame(x)?;
        if n >= 3 {
            dd_acc.add_raw(
                frame.to_frame(&dd.try_eval(x)?).norm(),
                frame.to_frame(&d1.try_eval(x)?).norm(),
            );
        }
        dc_acc.add(
            &frame.to_frame(&dc.try_eval(x)?),
            &frame.to_frame(&jdf.try_eval(x)?),
        );
        // scale: coordinate derivatives of ω, which the connection terms cancel
        let partials = (0..n)
            .map(|a| {
                frame
                    .to_frame(&st.partial(|y| geom.kaehler_form(y), x, a))
                    .norm()
            })
            .fold(0.0, f64::max);
        dw.add_raw(frame.to_frame(&delta_omega.try_eval(x)?).norm(), partials);
    }
    if n >= 3 {
        out.push("d_squared_vanishes", "d(dF) = 0", dd_acc.value(), 1e-6);
    } else {
        out.skip(
            "d_squared_vanishes",
            "d(dF) = 0",
            "degree exceeds the dimension",
        );
    }
    out.push(
        "dc_of_function_is_j_df",
        "d^c f = J df",
        dc_acc.value(),
        tolerance::INVARIANT,
    );
    out.push(
        "kaehler_form_coclosed",
        "delta omega = 0, relative to max |d_a omega|",
        dw.value(),
        tolerance::INVARIANT,
    );
    Ok(finish("commutators", cfg.echo(Some(m), None), out, start))
}

// -------------------------------------------------------------- curvature

/// `max |q(R)ξ - 2(m+1)ξ|` over the basis 1-forms.
pub fn qr_one_form_defect(r: &CurvatureOperator, m: usize) -> f64 {
    let n = 2 * m;
    let lambda = 2.0 * (m + 1) as f64;
    (0..n)
        .map(|i| {
            let e = AlternatingForm::unit(n, i);
            r.q_apply(&e).distance(&e.scale(lambda))
        })
        .fold(0.0, f64::max)
}

/// `max |q(R)a - double sum|` over random forms of every degree.
pub fn qr_double_sum_defect(r: &CurvatureOperator, seed: u64) -> f64 {
    let n = r.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in 0..=n {
        let a = random_form(&mut rng, n, p);
        worst = worst.max(r.q_apply(&a).distance(&r.q_double_sum(&a)));
    }
    worst
}

/// Holomorphic and totally real sectional curvatures against 4 and 1.
pub fn sectional_curvature_defect(r: &CurvatureOperator, m: usize) -> f64 {
    let n = 2 * m;
    let f = KaehlerFrame::new(m).expect("m >= 1");
    let mut worst = 0.0f64;
    for i in 0..n {
        let x = AlternatingForm::unit(n, i).components();
        worst = worst.max((r.sectional_curvature(&x, &f.j_vector(&x)) - 4.0).abs());
        for k in 0..m {
            if 2 * k != i - i % 2 {
                let y = AlternatingForm::unit(n, 2 * k).components();
                worst = worst.max((r.sectional_curvature(&x, &y) - 1.0).abs());
            }
        }
    }
    worst
}

fn curvature_ms(cfg: &SuiteConfig) -> Result<Vec<usize>, SuiteError> {
    match cfg.m {
        Some(m) => Ok(vec![chart_m(Some(m), 2, MAX_CHART_M)?]),
        None => Ok(vec![1, 2, 3]),
    }
}

/// `q(R)`, the model curvature of `CP^m` against differenced Christoffels,
/// the Kähler hypothesis, and the integrability and Weitzenböck identities.
pub fn curvature(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let ms = curvature_ms(cfg)?;
    let mut out = Findings::new();
    for &m in &ms {
        let n = 2 * m;
        let r = cpm_curvature(m)?;
        let geom = ChartGeometry::fubini_study(m)?;
        let plan = cfg.plan(n)?;
        let few = plan.truncated(HESSIAN_POINTS);
        out.push(
            format!("qr_on_one_forms_m{m}"),
            "q(R) = Ric = 2(m+1) id on 1-forms",
            qr_one_form_defect(&r, m),
            tolerance::EXACT,
        );
        out.push(
            format!("qr_matches_double_sum_m{m}"),
            "q(R) = sum_{i != j} e_j ^ e_i _| R(e_i, e_j)",
            qr_double_sum_defect(&r, cfg.seed ^ m as u64),
            tolerance::EXACT,
        );
        out.push(
            format!("model_curvature_symmetries_m{m}"),
            "R symmetric on bivectors and satisfies the first Bianchi identity",
            r.symmetry_defect().max(r.bianchi_defect()),
            tolerance::EXACT,
        );
        out.push(
            format!("sectional_curvatures_m{m}"),
            "holomorphic sectional curvature 4, totally real sectional curvature 1",
            sectional_curvature_defect(&r, m),
            tolerance::EXACT,
        );
        out.push(
            format!("model_curvature_matches_chart_m{m}"),
            "closed-form CP^m curvature against differenced Christoffel symbols",
            riemann_fd_check(&geom, &few)?,
            tolerance::FD_SECOND,
        );
        let (ng, nj) = kaehler_structure_check(&geom, &plan)?;
        out.push(
            format!("metric_parallel_m{m}"),
            "nabla g = 0",
            ng,
            tolerance::INVARIANT,
        );
        out.push(
            format!("complex_structure_parallel_m{m}"),
            "nabla J = 0",
            nj,
            tolerance::INVARIANT,
        );

        let f = laplace_eigenfunction(&geom, &default_eigen_matrix(m))?;
        let phi = build_phi_hat(&geom, &f, plan.stencil())?;
        out.push(
            format!("integrability_on_phi_hat_m{m}"),
            "q(R) psi = p/(p+1) delta d psi + (n-p)/(n-p+1) d delta psi for twistor psi",
            curvature_field_check(&geom, &r, &phi, &few, CurvatureIdentity::Integrability)?,
            tolerance::FD_NESTED,
        );
        let flat = ChartGeometry::flat_torus(m)?;
        let mut flat_worst = 0.0f64;
        for p in 0..=n {
            let field = polynomial_field(n, p, cfg.seed ^ (p as u64 + 101));
            flat_worst = flat_worst.max(curvature_field_check(
                &flat,
                &CurvatureOperator::flat(n),
                &field,
                &few,
                CurvatureIdentity::Weitzenboeck,
            )?);
        }
        out.push(
            format!("weitzenboeck_flat_torus_m{m}"),
            "Delta = nabla* nabla on the flat torus",
            flat_worst,
            tolerance::FLAT,
        );
        let mut cp_worst = 0.0f64;
        let mut split_worst = 0.0f64;
        for p in 0..=n.min(3) {
            let field = trig_field(n, p, cfg.seed ^ (p as u64 + 202));
            cp_worst = cp_worst.max(curvature_field_check(
                &geom,
                &r,
                &field,
                &few,
                CurvatureIdentity::Weitzenboeck,
            )?);
            split_worst = split_worst.max(curvature_field_check(
                &geom,
                &r,
                &field,
                &few,
                CurvatureIdentity::RoughSplit,
            )?);
        }
        out.push(
            format!("weitzenboeck_cpm_m{m}"),
            "Delta = nabla* nabla + q(R) on CP^m",
            cp_worst,
            tolerance::FD_NESTED,
        );
        out.push(
            format!("rough_laplacian_split_m{m}"),
            "nabla* nabla = 1/(p+1) delta d + 1/(n-p+1) d delta + T* T",
            split_worst,
            tolerance::EXACT,
        );
    }
    let echo_m = (ms.len() == 1).then(|| ms[0]);
    Ok(finish("curvature", cfg.echo(echo_m, None), out, start))
}

// -------------------------------------------------------------------- cpn

fn cpn_args(cfg: &SuiteConfig) -> Result<(usize, usize), SuiteError> {
    let m = chart_m(cfg.m, 2, MAX_CHART_M)?;
    let p = cfg.degree.unwrap_or(2);
    if p % 2 == 1 {
        return Err(SuiteError::Usage(format!(
            "degree {p} is odd; the structure forms are built in even degree only"
        )));
    }
    if p == 0 || (p > 2 && p + 2 > 2 * m) {
        return Err(SuiteError::Usage(format!(
            "degree {p} is outside 2..={} for m = {m}",
            (2 * m).saturating_sub(2).max(2)
        )));
    }
    Ok((m, p))
}

/// The eigenfunction, `φ̂`, Killing fields, the generalized trace, the
/// structure form in degree `p` and (for `p = 2`, `m > 2`) the Hamiltonian
/// round trip on `CP^m`.
pub fn cpn(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let (m, p) = cpn_args(cfg)?;
    let geom = ChartGeometry::fubini_study(m)?;
    let n = geom.n();
    let plan = cfg.plan(n)?;
    let st = plan.stencil();
    let mut out = Findings::new();
    let f = laplace_eigenfunction(&geom, &default_eigen_matrix(m))?;
    out.push(
        "eigenfunction_laplace_residual",
        "Delta f = 4(m+1) f",
        laplace_eigen_residual(&geom, &f, &plan)?,
        tolerance::FD_SECOND,
    );
    let diag = phi_hat_diagnostics(&geom, &f, &plan)?;
    out.push(
        "phi_hat_invariance",
        "J phi_hat = 0 for phi_hat = dd^c f + 6 f omega",
        diag.invariance,
        tolerance::INVARIANT,
    );
    out.push(
        "phi_hat_twistor_residual",
        "phi_hat = dd^c f + 6 f omega is a twistor form",
        diag.twistor,
        tolerance::FD_FIRST,
    );
    out.push(
        "phi_hat_gradient_display",
        "nabla_X phi_hat = -2(df ^ JX - Jdf ^ X) + 2 df(X) omega",
        diag.gradient_display,
        tolerance::FD_SECOND,
    );
    out.push(
        "phi_hat_displays_agree",
        "dd^c f + 6 f omega = (dd^c f)_0 + (2m-4)/m f omega",
        diag.displays_agree,
        tolerance::FD_SECOND,
    );
    out.push(
        "phi_hat_not_parallel",
        "1e-2 / min |nabla phi_hat| <= 1",
        lower_bound(diag.min_grad, NONZERO_FLOOR),
        1.0,
    );
    let killing = killing_from_potential(&geom, &f, st);
    out.push(
        "killing_field_j_grad_f",
        "K = J grad f is a Killing field",
        killing_field_check(&geom, &killing, &plan)?,
        tolerance::FD_SECOND,
    );
    let gradient = numeric_operator(&geom, &f, st, DiffOp::D);
    out.push(
        "gradient_field_not_killing",
        "1e-2 / Killing defect of grad f <= 1",
        lower_bound(killing_field_check(&geom, &gradient, &plan)?, NONZERO_FLOOR),
        1.0,
    );
    if m >= 2 {
        trace_checks(&geom, &f, cfg, &mut out)?;
        let trace_plan = trace_plan(n, cfg)?;
        let found = theorem_main_field_check(&geom, &plan, &trace_plan, &[p / 2])?;
        out.extend(found);
    } else {
        out.skip("structure_form", "structure forms", "needs m >= 2");
    }
    if p == 2 && m > 2 {
        let rt = hamiltonian_round_trip(&geom, &plan)?;
        out.push(
            "hamiltonian_from_twistor",
            "psi = u - <u, omega>/(m-2) omega satisfies nabla_X psi = 1/2 (d sigma ^ JX - J d sigma ^ X)",
            rt.hamiltonian,
            tolerance::FD_SECOND,
        );
        out.push(
            "hamiltonian_is_invariant",
            "J psi = 0",
            rt.invariance,
            tolerance::INVARIANT,
        );
        out.push(
            "twistor_from_hamiltonian",
            "u = psi - <psi, omega>/2 omega is twistor",
            rt.twistor_back,
            tolerance::FD_FIRST,
        );
    } else if p == 2 {
        out.skip(
            "hamiltonian_round_trip",
            "twistor <-> Hamiltonian",
            "needs m > 2",
        );
    }
    Ok(finish("cpn", cfg.echo(Some(m), Some(p)), out, start))
}

fn trace_plan(n: usize, cfg: &SuiteConfig) -> Result<SamplePlan, SuiteError> {
    Ok(
        SamplePlan::halton_in_ball(n, TRACE_POINTS, cfg.seed ^ 0x7ace, 1.0)?
            .with_stencil(cfg.stencil),
    )
}

/// Closedness, path independence and the parallel case of the line integral.
fn trace_checks(
    geom: &ChartGeometry,
    f: &FormField,
    cfg: &SuiteConfig,
    out: &mut Findings,
) -> Result<(), SuiteError> {
    let st = cfg.stencil;
    let plan = trace_plan(geom.n(), cfg)?;
    let phi = primitive_part_field(geom, &build_phi_hat(geom, f, st)?);
    let alpha = numeric_operator(geom, &phi, st, DiffOp::Deltac);
    out.push(
        "generalized_trace_closedness",
        "d(delta^c phi) = 0 for the special form phi = (dd^c f)_0",
        closedness_defect(geom, &alpha, &plan, chart::sup_norm(geom, &phi, &plan)?)?,
        chart::CLOSEDNESS_THRESHOLD,
    );
    let radial = line_integral(&alpha, TracePath::Radial);
    let axis = line_integral(&alpha, TracePath::AxisByAxis);
    let mut acc = chart::SupRelative::default();
    for x in plan.points() {
        let (a, b) = (radial.eval(x).scalar_value(), axis.eval(x).scalar_value());
        acc.add_raw((a - b).abs(), a.abs().max(b.abs()));
    }
    out.push(
        "generalized_trace_path_independence",
        "radial and axis-by-axis integration of delta^c phi agree",
        acc.value(),
        tolerance::FD_SECOND,
    );
    let parallel = chart::generalized_trace(geom, &kaehler_form_field(geom), &plan)?;
    let worst = plan
        .points()
        .iter()
        .map(|x| parallel.eval(x).scalar_value().abs())
        .fold(0.0, f64::max);
    out.push(
        "generalized_trace_of_parallel_form",
        "parallel phi has constant trace 0",
        worst,
        tolerance::FD_FIRST,
    );
    Ok(())
}

// -------------------------------------------------------------- conformal

/// Twistor forms stay twistor under `ψ ↦ e^{(p+1)λ}ψ`, `g ↦ e^{2λ}g`.
pub fn conformal(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let m = chart_m(cfg.m, 2, 3)?;
    let geom = ChartGeometry::fubini_study(m)?;
    let n = geom.n();
    let plan = cfg.plan(n)?;
    let st = plan.stencil();
    let mut out = Findings::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let bump = gaussian_bump(center, 0.4, 0.8);
    let linear = linear_function(coeffs);

    let same = geom.conformal_rescale(&FormField::zero(n, 0))?;
    let mut diff = 0.0f64;
    for x in plan.points() {
        diff = diff.max((same.metric(x) - geom.metric(x)).abs().max());
        diff = diff.max(same.christoffel(x).max_abs_difference(&geom.christoffel(x)));
    }
    out.push(
        "zero_factor_is_identity",
        "lambda = 0 leaves g and Gamma unchanged",
        diff,
        tolerance::EXACT,
    );

    let hat = geom.conformal_rescale(&bump)?;
    let mut gamma_defect = chart::SupRelative::default();
    for x in plan.truncated(HESSIAN_POINTS).points() {
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|a| st.partial(|y| hat.metric(y), x, a))
            .collect();
        let ginv = hat
            .metric(x)
            .try_inverse()
            .ok_or_else(|| ChartError::DegenerateMetric(x.clone()))?;
        let fd = Christoffel::from_metric(&ginv, &dg);
        let analytic = hat.christoffel(x);
        let scale = analytic.max_abs_difference(&Christoffel::zero(n));
        gamma_defect.add_raw(analytic.max_abs_difference(&fd), scale);
    }
    out.push(
        "conformal_christoffels_match_metric",
        "conformal-change Christoffel formula against differenced e^{2 lambda} g",
        gamma_defect.value(),
        tolerance::FD_FIRST,
    );

    let f = laplace_eigenfunction(&geom, &default_eigen_matrix(m))?;
    let phi = build_phi_hat(&geom, &f, st)?;
    for (tag, lambda) in [("gaussian", &bump), ("linear", &linear)] {
        let r = conformal_twistor_check(&geom, &phi, lambda, &plan)?;
        out.push(
            format!("rescaled_phi_hat_twistor_{tag}"),
            "e^{3 lambda} phi_hat is twistor for e^{2 lambda} g",
            r.twistor,
            tolerance::FD_SECOND,
        );
    }
    let flat = ChartGeometry::flat_torus(m)?;
    let parallel = FormField::constant(flat.kaehler_form(&vec![0.0; n]));
    for (tag, lambda) in [("linear", &linear), ("gaussian", &bump)] {
        let r = conformal_twistor_check(&flat, &parallel, lambda, &plan)?;
        out.push(
            format!("rescaled_parallel_form_twistor_{tag}"),
            "e^{3 lambda} omega_0 is twistor for e^{2 lambda} g_flat",
            r.twistor,
            tolerance::FD_SECOND,
        );
        out.push(
            format!("rescaled_parallel_form_not_parallel_{tag}"),
            "1e-2 / min |nabla (e^{3 lambda} omega_0)| <= 1",
            lower_bound(r.min_grad, NONZERO_FLOOR),
            1.0,
        );
    }
    Ok(finish("conformal", cfg.echo(Some(m), None), out, start))
}

// ----------------------------------------------------------------- middim

/// `max |T(*j)|/|∇*j| - |Tj|/|∇j|` over random jets of every degree, `m <= 3`.
/// Every other jet below top degree is built twistor so both branches of the
/// residual are exercised.
pub fn hodge_invariance_defect(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let n = 2 * (1 + i % 3);
        let p = rng.gen_range(0..=n);
        let j = if i % 2 == 1 && p < n {
            let value = random_form(&mut rng, n, p);
            let d = random_form(&mut rng, n, p + 1);
            let delta = random_form(&mut rng, n, p.saturating_sub(1));
            CovariantJet::twistor_from_differentials(value, &d, &delta).expect("shapes agree")
        } else {
            random_jet(&mut rng, n, p)
        };
        worst = worst.max((twistor_residual(&hodge_dual_jet(&j)) - twistor_residual(&j)).abs());
    }
    worst
}

/// Split check on constructed middle-degree decompositions: two twistor
/// summands, and a twistor plus a non-twistor summand.
pub fn algebraic_split_consistency(seed: u64) -> Result<bool, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    for m in 2..=3 {
        let f = KaehlerFrame::new(m)?;
        let n = f.n();
        for _ in 0..20 {
            let mk_twistor = |rng: &mut ChaCha8Rng| {
                let v = f.type_project(&random_form(rng, n, m), m - 2);
                let d = random_form(rng, n, m + 1);
                let delta = random_form(rng, n, m - 1);
                CovariantJet::twistor_from_differentials(v, &d, &delta).expect("shapes agree")
            };
            let a = mk_twistor(&mut rng);
            let b = mk_twistor(&mut rng);
            let c = random_jet(&mut rng, n, m);
            ok &= middim_split_check(&f, &[a.clone(), b], 1e-10)?;
            ok &= middim_split_check(&f, &[a, c], 1e-10)?;
        }
    }
    Ok(ok)
}

/// Middle-degree checks on `CP²` and the Hodge-duality invariance.
pub fn middim(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    if let Some(m) = cfg.m {
        if m != 2 {
            return Err(SuiteError::Usage(format!(
                "the middle-degree suite runs on CP^2, got m = {m}"
            )));
        }
    }
    let plan = cfg.plan(4)?;
    let mut out = Findings::new();
    let r = middim_suite(&plan.truncated(HESSIAN_POINTS))?;
    out.push(
        "special_middle_form_residual",
        "phi_hat satisfies the special middle-degree equation with tau = delta^c psi/(m^2-1)",
        r.specialm,
        tolerance::FD_SECOND,
    );
    out.push(
        "middle_degree_characterization",
        "Delta u = (m+1)/m q(R) u",
        r.characterization,
        tolerance::FD_NESTED,
    );
    out.push(
        "middle_degree_detuned_control",
        "1e-2 / defect with the coefficient scaled by 1.1 <= 1",
        lower_bound(r.detuned, NONZERO_FLOOR),
        1.0,
    );
    out.push(
        "hodge_dual_invariance_random_jets",
        "|T(*psi)|/|nabla *psi| = |T psi|/|nabla psi|",
        hodge_invariance_defect(400, cfg.seed),
        tolerance::EXACT,
    );
    out.push(
        "hodge_dual_invariance_chart_jets",
        "|T(*phi_hat)|/|nabla *phi_hat| = |T phi_hat|/|nabla phi_hat| on CP^2",
        r.hodge_invariance,
        tolerance::EXACT,
    );
    out.push(
        "split_check_chart",
        "sum twistor iff every summand twistor (phi_hat pairs on CP^2)",
        flag(r.split_consistent),
        0.0,
    );
    out.push(
        "split_check_algebraic",
        "sum twistor iff every summand twistor (constructed middle-degree jets)",
        flag(algebraic_split_consistency(cfg.seed)?),
        0.0,
    );
    let geom = ChartGeometry::fubini_study(2)?;
    let f = laplace_eigenfunction(&geom, &default_eigen_matrix(2))?;
    let phi = build_phi_hat(&geom, &f, plan.stencil())?;
    let mut prim = 0.0f64;
    for x in plan.truncated(HESSIAN_POINTS).points() {
        let j = covariant_jet(&geom, &phi, x, plan.stencil(), false)?;
        let kf = KaehlerFrame::new(2)?;
        prim = prim.max(relative(
            kf.lefschetz_lambda(j.value()).norm(),
            j.value().norm(),
        ));
    }
    out.push(
        "phi_hat_primitive_in_complex_dimension_two",
        "Lambda phi_hat = 0 when m = 2",
        prim,
        tolerance::FD_SECOND,
    );
    Ok(finish("middim", cfg.echo(Some(2), Some(2)), out, start))
}

// -------------------------------------------------------------------- all

/// Convergence order of the difference stencil.
pub fn stencil_order_check(cfg: &SuiteConfig) -> Result<f64, SuiteError> {
    let ratio = fd_convergence_ratio(cfg.stencil)?;
    let order = cfg.stencil.order().as_u8() as f64;
    Ok(lower_bound(ratio, 2f64.powf(order - 0.5)))
}

/// Every suite with its default parameters, prefixed by suite name.
pub fn all(cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let start = Instant::now();
    let base = SuiteConfig {
        m: None,
        degree: None,
        ..cfg.clone()
    };
    let with = |m: usize, p: Option<usize>| SuiteConfig {
        m: Some(m),
        degree: p,
        ..base.clone()
    };
    let reports = vec![
        algebra(&base)?,
        commutators(&with(2, None))?,
        curvature(&base)?,
        cpn(&with(1, Some(2)))?,
        cpn(&with(2, Some(2)))?,
        cpn(&with(3, Some(2)))?,
        cpn(&with(3, Some(4)))?,
        conformal(&with(2, None))?,
        middim(&base)?,
    ];
    let mut out = Findings::new();
    out.push(
        "stencil_convergence_order",
        "halving h divides the error by at least 2^{order - 1/2}",
        stencil_order_check(cfg)?,
        1.0,
    );
    for r in reports {
        let tag = match (r.config.m, r.config.p) {
            (Some(m), Some(p)) if r.suite == "cpn" => format!("{}_m{m}_p{p}", r.suite),
            _ => r.suite.clone(),
        };
        for mut c in r.checks {
            c.name = format!("{tag}/{}", c.name);
            out.checks.push(c);
        }
        for mut s in r.skipped {
            s.name = format!("{tag}/{}", s.name);
            out.skipped.push(s);
        }
    }
    Ok(finish("all", cfg.echo(None, None), out, start))
}

/// Hermitian traceless matrix with seeded entries.
pub fn random_eigen_matrix(m: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_element(m + 1, m + 1, Complex64::new(0.0, 0.0));
    for i in 0..=m {
        a[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..=m {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let shift = a.trace() / (m + 1) as f64;
    for i in 0..=m {
        a[(i, i)] -= shift;
    }
    a
}
