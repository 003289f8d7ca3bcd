//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Each criterion reads the residuals of the matching suite against the
//! target tolerances (not the tolerances stored in the report) and, where
//! possible, recomputes the quantity with an oracle written here from scratch.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistor_core::chart::{default_eigen_matrix, laplace_eigenfunction, mu1, mu2, ChartGeometry};
use twistor_core::curvature::{cpm_curvature, qr_apply};
use twistor_core::exterior::{AlternatingForm, BasisIndex};
use twistor_core::kaehler::KaehlerFrame;
use twistor_core::report::SuiteReport;
use twistor_core::suites::{self, SuiteConfig, SweepFamily};
use twistor_core::twistor::{hodge_dual_jet, twistor2_characterization_residual, CovariantJet};

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    /// Residual `value` must be strictly below `tol`.
    fn below(&mut self, what: impl Into<String>, value: f64, tol: f64) {
        let what = what.into();
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            println!("    {what}: {value:.3e} (< {tol:.0e})");
        }
        if !(value < tol) {
            self.failures
                .push(format!("{what}: {value:.3e} >= {tol:.0e}"));
        }
    }

    fn require(&mut self, what: impl Into<String>, ok: bool) {
        let what = what.into();
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            println!("    {what}: {ok}");
        }
        if !ok {
            self.failures.push(what);
        }
    }

    fn record(&mut self, r: &SuiteReport, name: &str, tol: f64) {
        match r.get(name) {
            Some(c) => self.below(format!("{}/{name}", r.suite), c.max_residual, tol),
            None => self.failures.push(format!("{}/{name}: missing", r.suite)),
        }
    }

    fn records_with_prefix(&mut self, r: &SuiteReport, prefix: &str, tol: f64) -> usize {
        let names: Vec<String> = r
            .checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.name.clone())
            .collect();
        for n in &names {
            self.record(r, n, tol);
        }
        names.len()
    }
}

fn run_criterion(id: usize, title: &str, body: impl FnOnce(&mut Gate)) -> bool {
    let start = Instant::now();
    let mut gate = Gate {
        failures: Vec::new(),
    };
    body(&mut gate);
    let ok = gate.failures.is_empty();
    println!(
        "criterion {id:>2} {}: {title} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    for f in &gate.failures {
        println!("    {f}");
    }
    ok
}

fn cfg(m: Option<usize>, degree: Option<usize>) -> SuiteConfig {
    SuiteConfig {
        m,
        degree,
        ..SuiteConfig::default()
    }
}

// ------------------------------------------------------------- dense oracle

fn masks(n: usize, p: usize) -> Vec<u32> {
    (0u32..1 << n)
        .filter(|b| b.count_ones() as usize == p)
        .collect()
}

/// Sign of `e_a ∧ e_I` relative to the sorted basis element.
fn insert_sign(a: usize, set: u32) -> f64 {
    if (set & ((1u32 << a) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix of `L = Σ e_{2i} ∧ e_{2i+1} ∧` from degree `p` to `p + 2`.
fn dense_l(m: usize, p: usize) -> DMatrix<f64> {
    let n = 2 * m;
    let (src, dst) = (masks(n, p), masks(n, p + 2));
    let mut l = DMatrix::zeros(dst.len(), src.len());
    for (c, &s) in src.iter().enumerate() {
        for i in 0..m {
            let (a, b) = (2 * i, 2 * i + 1);
            if s & (1 << a) != 0 || s & (1 << b) != 0 {
                continue;
            }
            let with_b = s | (1 << b);
            let sign = insert_sign(b, s) * insert_sign(a, with_b);
            let r = dst.iter().position(|&d| d == with_b | (1 << a)).unwrap();
            l[(r, c)] += sign;
        }
    }
    l
}

fn l_power(m: usize, p: usize, s: usize) -> DMatrix<f64> {
    let dim = masks(2 * m, p).len();
    (0..s).fold(DMatrix::identity(dim, dim), |acc, j| {
        dense_l(m, p + 2 * j) * acc
    })
}

/// Adjoint in the orthonormal basis.
fn lambda_power(m: usize, p: usize, r: usize) -> DMatrix<f64> {
    let dim = masks(2 * m, p).len();
    (0..r).fold(DMatrix::identity(dim, dim), |acc, j| {
        dense_l(m, p - 2 * j - 2).transpose() * acc
    })
}

fn to_vec(a: &AlternatingForm) -> DVector<f64> {
    let ms = masks(a.dim(), a.degree());
    DVector::from_iterator(
        ms.len(),
        ms.iter()
            .map(|&b| a.coeff(BasisIndex::new(b, a.dim()).unwrap())),
    )
}

fn from_vec(n: usize, p: usize, v: &DVector<f64>) -> AlternatingForm {
    AlternatingForm::from_terms(n, p, masks(n, p).into_iter().zip(v.iter().copied()))
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn primitive_dim(n: usize, q: usize) -> usize {
    binom(n, q) - if q >= 2 { binom(n, q - 2) } else { 0 }
}

/// `Λ^r L^s α = Π_{j<r} (s-j)(m-p-s+1+j) L^{s-r} α` for primitive `α`.
fn corollary_coefficient(m: usize, p: usize, r: usize, s: usize) -> f64 {
    (0..r)
        .map(|j| ((s - j) as f64) * ((m as f64) - (p as f64) - (s as f64) + 1.0 + j as f64))
        .product()
}

/// Orthonormal basis of primitive `p`-forms: kernel of `Λ`.
fn primitive_basis(m: usize, p: usize) -> Vec<DVector<f64>> {
    let dim = masks(2 * m, p).len();
    if p < 2 {
        return (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
    }
    let lam = lambda_power(m, p, 1);
    let eig = SymmetricEigen::new(lam.transpose() * &lam);
    (0..dim)
        .filter(|&i| eig.eigenvalues[i].abs() < 1e-9)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

fn criterion_1(g: &mut Gate, algebra: &SuiteReport) {
    for m in 1..=5 {
        let n = 2 * m;
        let f = KaehlerFrame::new(m).unwrap();
        let mut oracle_vs_lib = 0.0f64;
        let mut lemma = 0.0f64;
        let mut corollary = 0.0f64;
        for p in 0..=n {
            let basis = masks(n, p);
            // L and Λ of the library against the dense matrices
            let lmat = (p + 2 <= n).then(|| dense_l(m, p));
            let lam = (p >= 2).then(|| lambda_power(m, p, 1));
            for (c, &b) in basis.iter().enumerate() {
                let e = AlternatingForm::basis(n, BasisIndex::new(b, n).unwrap());
                if p + 2 <= n {
                    let want = lmat.as_ref().unwrap().column(c).into_owned();
                    oracle_vs_lib = oracle_vs_lib.max((to_vec(&f.lefschetz_l(&e)) - want).amax());
                }
                if p >= 2 {
                    let want = lam.as_ref().unwrap().column(c).into_owned();
                    oracle_vs_lib =
                        oracle_vs_lib.max((to_vec(&f.lefschetz_lambda(&e)) - want).amax());
                }
            }
            // [Λ, L^s] on every basis p-form
            for s in 1..=m {
                if p + 2 * s > n {
                    break;
                }
                let c = (s as f64) * ((m as f64) - (p as f64) - (s as f64) + 1.0);
                let lsl = lambda_power(m, p + 2 * s, 1) * l_power(m, p, s);
                let lls = if p >= 2 {
                    l_power(m, p - 2, s) * lambda_power(m, p, 1)
                } else {
                    DMatrix::zeros(lsl.nrows(), lsl.ncols())
                };
                let rhs = l_power(m, p, s - 1) * c;
                lemma = lemma.max((lsl - lls - &rhs).amax());
                for (col, &b) in basis.iter().enumerate() {
                    let e = AlternatingForm::basis(n, BasisIndex::new(b, n).unwrap());
                    let lib = to_vec(&f.commutator_lambda_ls(&e, s));
                    oracle_vs_lib = oracle_vs_lib.max((lib - rhs.column(col)).amax());
                }
            }
        }
        // Λ^r L^s on primitive forms
        for p in 0..=m {
            for alpha in primitive_basis(m, p) {
                let a = from_vec(n, p, &alpha);
                for s in 0..=(m - p) {
                    for r in 0..=s {
                        let lhs = lambda_power(m, p + 2 * s, r) * l_power(m, p, s) * &alpha;
                        let rhs = l_power(m, p, s - r) * &alpha * corollary_coefficient(m, p, r, s);
                        corollary = corollary.max((&lhs - &rhs).amax());
                        let lib = f.lambda_power(&f.l_power(&a, s), r);
                        oracle_vs_lib = oracle_vs_lib.max((to_vec(&lib) - &lhs).amax());
                        let c = KaehlerFrame::lambda_l_power_coefficient(m, p, r, s);
                        oracle_vs_lib =
                            oracle_vs_lib.max((c - corollary_coefficient(m, p, r, s)).abs());
                    }
                }
            }
        }
        g.below(format!("m={m} dense [Lambda, L^s] identity"), lemma, 1e-12);
        g.below(
            format!("m={m} dense Lambda^r L^s corollary"),
            corollary,
            1e-12,
        );
        g.below(
            format!("m={m} library vs dense oracle"),
            oracle_vs_lib,
            1e-12,
        );
        g.record(algebra, &format!("lambda_ls_commutator_m{m}"), 1e-12);
        g.record(
            algebra,
            &format!("lambda_ls_commutator_by_composition_m{m}"),
            1e-12,
        );
        g.record(algebra, &format!("lambda_r_l_s_primitive_m{m}"), 1e-12);
    }
}

fn criterion_2(g: &mut Gate, algebra: &SuiteReport) {
    for m in 1..=5 {
        let n = 2 * m;
        for d in 0..=n {
            // expected spectrum of ΛL on degree d: (i+1)(m-q-i) on L^i P^q
            let mut expected = Vec::new();
            let mut levels = Vec::new();
            for i in 0..=d / 2 {
                let q = d - 2 * i;
                if q > m || i > m - q {
                    continue;
                }
                let ev = (i as i64 + 1) * (m as i64 - q as i64 - i as i64);
                levels.push(ev);
                expected.extend(std::iter::repeat(ev as f64).take(primitive_dim(n, q)));
                // the library eigenvalue uses the total degree d
                g.below(
                    format!("m={m} d={d} i={i} closed form"),
                    (KaehlerFrame::lambda_l_eigenvalue(m, d, i) - ev as f64).abs(),
                    1e-10,
                );
            }
            g.require(
                format!("m={m} d={d} level dimensions"),
                expected.len() == binom(n, d),
            );
            let ll = if d + 2 <= n {
                lambda_power(m, d + 2, 1) * dense_l(m, d)
            } else {
                DMatrix::zeros(1, 1)
            };
            if d + 2 <= n {
                let mut got: Vec<f64> = SymmetricEigen::new(ll)
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect();
                got.sort_by(f64::total_cmp);
                expected.sort_by(f64::total_cmp);
                let worst = got
                    .iter()
                    .zip(&expected)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                g.below(format!("m={m} d={d} dense spectrum"), worst, 1e-10);
            }
            if d <= m {
                let mut sorted = levels.clone();
                sorted.sort();
                sorted.dedup();
                g.require(
                    format!("m={m} d={d} eigenvalues pairwise distinct"),
                    sorted.len() == levels.len(),
                );
            }
        }
        g.record(algebra, &format!("lambda_l_spectrum_m{m}"), 1e-10);
        g.record(algebra, &format!("lambda_l_eigenvalues_distinct_m{m}"), 0.5);
        g.require(
            format!("m={m} library distinctness"),
            suites::lambda_l_eigenvalues_distinct(m),
        );
    }
}

fn criterion_3(g: &mut Gate) {
    let r = suites::commutators(&cfg(Some(2), None)).unwrap();
    let second = ["anticommute", "d_squared"];
    let mut count = 0;
    for c in &r.checks {
        let tol = if second.iter().any(|s| c.name.contains(s)) {
            1e-4
        } else {
            1e-5
        };
        g.below(format!("commutators/{}", c.name), c.max_residual, tol);
        count += 1;
    }
    g.require("commutator table has 18 relations", count >= 18);
}

// ---------------------------------------------------------- curvature oracle

/// `R(X,Y)Z` of holomorphic sectional curvature 4 in the adapted frame.
fn cpm_tensor(m: usize, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let n = 2 * m;
    let j = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..m {
            out[2 * i + 1] = v[2 * i];
            out[2 * i] = -v[2 * i + 1];
        }
        out
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let (jx, jy, jz) = (j(x), j(y), j(z));
    (0..n)
        .map(|k| {
            dot(y, z) * x[k] - dot(x, z) * y[k] + dot(&jy, z) * jx[k] - dot(&jx, z) * jy[k]
                + 2.0 * dot(x, &jy) * jz[k]
        })
        .collect()
}

fn criterion_4(g: &mut Gate, curvature: &SuiteReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in 1..=3 {
        let n = 2 * m;
        let r = cpm_curvature(m).unwrap();
        let unit = |i: usize| {
            (0..n)
                .map(|k| if k == i { 1.0 } else { 0.0 })
                .collect::<Vec<f64>>()
        };
        let mut ric = 0.0f64;
        let mut qr = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let v: f64 = (0..n)
                    .map(|i| cpm_tensor(m, &unit(i), &unit(a), &unit(b))[i])
                    .sum();
                let want = if a == b { 2.0 * (m + 1) as f64 } else { 0.0 };
                ric = ric.max((v - want).abs());
            }
            let e = AlternatingForm::unit(n, a);
            qr = qr.max(qr_apply(&r, &e).distance(&e.scale(2.0 * (m + 1) as f64)));
        }
        g.below(format!("m={m} oracle Ricci = 2(m+1)"), ric, 1e-12);
        g.below(format!("m={m} library q(R) on 1-forms"), qr, 1e-12);
        let mut sect = 0.0f64;
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rxyy = cpm_tensor(m, &x, &y, &y);
            let num: f64 = rxyy.iter().zip(&x).map(|(a, b)| a * b).sum();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
            let den = dot(&x, &x) * dot(&y, &y) - dot(&x, &y).powi(2);
            sect = sect.max((r.sectional_curvature(&x, &y) - num / den).abs());
        }
        g.below(
            format!("m={m} sectional curvatures vs closed form"),
            sect,
            1e-10,
        );
        g.record(curvature, &format!("qr_on_one_forms_m{m}"), 1e-12);
        g.record(
            curvature,
            &format!("model_curvature_matches_chart_m{m}"),
            1e-4,
        );
    }
}

// ----------------------------------------------------------- Laplace oracle

/// Real metric of the potential `log(1 + |z|²)`, by differencing the potential.
fn potential_metric(m: usize, x: &[f64]) -> DMatrix<f64> {
    let n = 2 * m;
    let k = |y: &[f64]| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).ln();
    let h = 1e-3;
    let hess = |a: usize, b: usize| {
        let w = [
            (-2.0, -1.0 / 12.0),
            (-1.0, 8.0 / 12.0),
            (1.0, -8.0 / 12.0),
            (2.0, 1.0 / 12.0),
        ];
        let mut s = 0.0;
        for &(sa, wa) in &w {
            for &(sb, wb) in &w {
                let mut y = x.to_vec();
                y[a] += sa * h;
                y[b] += sb * h;
                s += wa * wb * k(&y);
            }
        }
        s / (h * h)
    };
    let kk = DMatrix::from_fn(n, n, |a, b| hess(a, b));
    // g_{j k̄} = ¼ (∂x_j - i∂y_j)(∂x_k + i∂y_k) K; g(u, v) = Re Σ g_{j k̄} u_j conj(v_k)
    let mut g = DMatrix::zeros(n, n);
    for j in 0..m {
        for l in 0..m {
            let re = 0.25 * (kk[(2 * j, 2 * l)] + kk[(2 * j + 1, 2 * l + 1)]);
            let im = 0.25 * (kk[(2 * j, 2 * l + 1)] - kk[(2 * j + 1, 2 * l)]);
            // u_j = u_x + i u_y, v_l likewise
            g[(2 * j, 2 * l)] = re;
            g[(2 * j + 1, 2 * l + 1)] = re;
            g[(2 * j, 2 * l + 1)] = im;
            g[(2 * j + 1, 2 * l)] = -im;
        }
    }
    g
}

fn oracle_eigenfunction(m: usize, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 - r2 / m as f64) / (1.0 + r2)
}

/// `Δf = -(1/√g) ∂_a(√g g^{ab} ∂_b f)` by central differences.
fn oracle_laplacian(m: usize, x: &[f64]) -> f64 {
    let n = 2 * m;
    let h = 2e-3;
    let flux = |y: &[f64], a: usize| {
        let g = potential_metric(m, y);
        let vol = g.determinant().sqrt();
        let inv = g.try_inverse().unwrap();
        let grad: Vec<f64> = (0..n)
            .map(|b| {
                let mut p = y.to_vec();
                let mut q = y.to_vec();
                p[b] += 1e-4;
                q[b] -= 1e-4;
                (oracle_eigenfunction(m, &p) - oracle_eigenfunction(m, &q)) / 2e-4
            })
            .collect();
        vol * (0..n).map(|b| inv[(a, b)] * grad[b]).sum::<f64>()
    };
    let mut div = 0.0;
    for a in 0..n {
        let shifted = |s: f64| {
            let mut y = x.to_vec();
            y[a] += s * h;
            flux(&y, a)
        };
        div += (8.0 * (shifted(1.0) - shifted(-1.0)) - (shifted(2.0) - shifted(-2.0))) / (12.0 * h);
    }
    -div / potential_metric(m, x).determinant().sqrt()
}

fn criterion_5(g: &mut Gate, reports: &[SuiteReport]) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in 1..=3 {
        let n = 2 * m;
        let geom = ChartGeometry::fubini_study(m).unwrap();
        let f = laplace_eigenfunction(&geom, &default_eigen_matrix(m)).unwrap();
        let mut same = 0.0f64;
        let mut lap = 0.0f64;
        let mut scale = 0.0f64;
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let v = oracle_eigenfunction(m, &x);
            same = same.max((f.eval(&x).scalar_value() - v).abs());
            lap = lap.max((oracle_laplacian(m, &x) - 4.0 * (m + 1) as f64 * v).abs());
            scale = scale.max((4.0 * (m + 1) as f64 * v).abs());
        }
        g.below(
            format!("m={m} eigenfunction matches closed form"),
            same,
            1e-12,
        );
        g.below(
            format!("m={m} potential-metric Laplacian oracle"),
            lap / scale,
            1e-4,
        );
        let r = &reports[m - 1];
        g.require(
            format!("m={m} uses 50 chart points"),
            r.config.samples == 50,
        );
        g.record(r, "eigenfunction_laplace_residual", 1e-4);
        g.record(r, "phi_hat_invariance", 1e-8);
        g.record(r, "phi_hat_gradient_display", 1e-4);
        if m >= 2 {
            g.record(r, "phi_hat_twistor_residual", 1e-5);
        }
    }
}

fn criterion_6(g: &mut Gate, r: &SuiteReport) {
    g.below(
        "mu1 at m=3, p=2 is -5",
        (mu1(6, 2).unwrap() + 5.0).abs(),
        1e-12,
    );
    g.below(
        "mu2 at m=3, p=2 is 3/2",
        (mu2(6, 2).unwrap() - 1.5).abs(),
        1e-12,
    );
    g.record(r, "structure_form_twistor_residual_p4", 1e-5);
    for name in [
        "deltac_u_mu1_d_lambda_u_p4",
        "dc_u_mu2_delta_l_u_p4",
        "delta_u_minus_mu1_dc_lambda_u_p4",
        "d_u_minus_mu2_deltac_l_u_p4",
        "lambda_l_du_eigenvalue_p4",
        "lambda_l_delta_u_eigenvalue_p4",
        "w_over_jv_ratio_p4",
    ] {
        g.record(r, name, 1e-4);
    }
}

fn criterion_7(g: &mut Gate, r: &SuiteReport) {
    g.record(r, "hamiltonian_from_twistor", 1e-4);
    g.record(r, "twistor_from_hamiltonian", 1e-5);
}

fn criterion_8(g: &mut Gate, curvature: &SuiteReport) {
    g.record(curvature, "integrability_on_phi_hat_m2", 1e-3);
    g.record(curvature, "weitzenboeck_cpm_m2", 1e-3);
    for m in 1..=3 {
        g.record(curvature, &format!("weitzenboeck_flat_torus_m{m}"), 1e-6);
    }
}

fn criterion_9(g: &mut Gate) {
    let r = suites::conformal(&cfg(Some(2), None)).unwrap();
    let n = g.records_with_prefix(&r, "rescaled_phi_hat_twistor", 1e-4)
        + g.records_with_prefix(&r, "rescaled_parallel_form_twistor", 1e-4);
    g.require("conformal twistor checks present", n >= 4);
    // lower-bound records: floor / |grad| <= 1 means the grad is nonzero
    let k = g.records_with_prefix(&r, "rescaled_parallel_form_not_parallel", 1.0 + 1e-12);
    g.require("non-parallel checks present", k >= 2);
}

// ---------------------------------------------------------------- Hodge oracle

/// `*e_I = sgn(I, I^c) e_{I^c}` in the standard orientation.
fn oracle_star(a: &AlternatingForm) -> AlternatingForm {
    let n = a.dim();
    let full = (1u32 << n) - 1;
    let terms = a.terms().map(|(idx, c)| {
        let b = idx.bits();
        let mut inversions = 0;
        for i in 0..n {
            if b & (1 << i) != 0 {
                inversions += (!b & full & ((1u32 << i) - 1)).count_ones();
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        (full & !b, sign * c)
    });
    AlternatingForm::from_terms(n, n - a.degree(), terms.collect::<Vec<_>>())
}

/// Twistor operator applied directly, relative to `|∇ψ|`.
fn oracle_twistor(j: &CovariantJet) -> f64 {
    let (n, p) = (j.dim(), j.degree());
    let grad = j.grad();
    let mut d = AlternatingForm::zero(n, p + 1);
    let mut delta = AlternatingForm::zero(n, p.saturating_sub(1));
    for k in 0..n {
        d = d.add_scaled(1.0, &AlternatingForm::unit(n, k).wedge(&grad[k]));
        if p > 0 {
            delta = delta.add_scaled(-1.0, &grad[k].interior_unit(k));
        }
    }
    let mut defect = 0.0;
    let mut scale = 0.0;
    for k in 0..n {
        let mut t = grad[k].add_scaled(-1.0 / (p as f64 + 1.0), &d.interior_unit(k));
        if p > 0 {
            t = t.add_scaled(
                1.0 / (n as f64 - p as f64 + 1.0),
                &AlternatingForm::unit(n, k).wedge(&delta),
            );
        }
        defect += t.norm_sq();
        scale += grad[k].norm_sq();
    }
    if scale == 0.0 {
        0.0
    } else {
        (defect / scale).sqrt()
    }
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, p: usize) -> AlternatingForm {
    let ms = masks(n, p);
    AlternatingForm::from_terms(
        n,
        p,
        ms.into_iter()
            .map(|b| (b, rng.gen_range(-1.0..1.0)))
            .collect::<Vec<_>>(),
    )
}

fn criterion_10(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut star = 0.0f64;
    for n in 1..=6 {
        for p in 0..=n {
            for b in masks(n, p) {
                let e = AlternatingForm::basis(n, BasisIndex::new(b, n).unwrap());
                star = star.max(e.hodge_star().distance(&oracle_star(&e)));
            }
        }
    }
    g.below("library Hodge star vs permutation-sign oracle", star, 1e-15);
    let mut inv = 0.0f64;
    for _ in 0..200 {
        let m = rng.gen_range(1..=3);
        let n = 2 * m;
        let p = rng.gen_range(0..n);
        let value = random_form(&mut rng, n, p);
        let grad = (0..n).map(|_| random_form(&mut rng, n, p)).collect();
        let j = CovariantJet::new(value, grad).unwrap();
        inv = inv.max((oracle_twistor(&j) - oracle_twistor(&hodge_dual_jet(&j))).abs());
    }
    g.below(
        "direct twistor residual invariant under the Hodge dual",
        inv,
        1e-12,
    );
    let r = suites::middim(&cfg(None, None)).unwrap();
    g.record(&r, "hodge_dual_invariance_random_jets", 1e-12);
    g.record(&r, "hodge_dual_invariance_chart_jets", 1e-12);
    g.record(&r, "split_check_chart", 0.5);
    g.record(&r, "split_check_algebraic", 0.5);
    g.record(&r, "special_middle_form_residual", 1e-3);
    g.record(&r, "middle_degree_characterization", 1e-3);
}

fn criterion_11(g: &mut Gate, algebra: &SuiteReport) {
    let threshold = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut total, mut mismatches, mut vanishing) = (0usize, 0usize, 0usize);
    for m in 2..=4 {
        let f = KaehlerFrame::new(m).unwrap();
        for family in SweepFamily::ALL {
            for _ in 0..70 {
                let j = family.sample(&f, &mut rng);
                let char_zero = twistor2_characterization_residual(&f, &j).unwrap() < threshold;
                let twistor_zero = oracle_twistor(&j) < threshold;
                total += 1;
                mismatches += usize::from(char_zero != twistor_zero);
                vanishing += usize::from(twistor_zero);
            }
        }
    }
    g.require(format!("sweep size {total} >= 1000"), total >= 1000);
    g.require(
        format!("{mismatches} mismatches against the direct twistor operator"),
        mismatches == 0,
    );
    g.require(
        "both sides of the sweep are populated",
        vanishing > 0 && vanishing < total,
    );
    g.record(
        algebra,
        "degree2_characterization_equivalence_mismatches",
        0.5,
    );
    g.record(algebra, "degree2_characterization_sweep_size", 1.0 + 1e-12);
    g.record(
        algebra,
        "degree2_characterization_vanishing_side",
        1.0 + 1e-12,
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let algebra = suites::algebra(&cfg(None, None)).unwrap();
    let curvature = suites::curvature(&cfg(None, None)).unwrap();
    let cpn_p2: Vec<SuiteReport> = (1..=3)
        .map(|m| suites::cpn(&cfg(Some(m), Some(2))).unwrap())
        .collect();
    let cpn_p4 = suites::cpn(&cfg(Some(3), Some(4))).unwrap();

    let results = [
        run_criterion(1, "exact Lambda/L commutators and corollary, m <= 5", |g| {
            criterion_1(g, &algebra)
        }),
        run_criterion(2, "Lambda L spectrum and distinctness", |g| {
            criterion_2(g, &algebra)
        }),
        run_criterion(3, "Kaehler commutator table on CP^2", criterion_3),
        run_criterion(4, "q(R) on 1-forms and model curvature", |g| {
            criterion_4(g, &curvature)
        }),
        run_criterion(5, "eigenfunction and phi_hat on CP^m", |g| {
            criterion_5(g, &cpn_p2)
        }),
        run_criterion(6, "structure form in degree 4 on CP^3", |g| {
            criterion_6(g, &cpn_p4)
        }),
        run_criterion(7, "twistor / Hamiltonian round trip on CP^3", |g| {
            criterion_7(g, &cpn_p2[2])
        }),
        run_criterion(8, "integrability and Weitzenboeck", |g| {
            criterion_8(g, &curvature)
        }),
        run_criterion(9, "conformal invariance", criterion_9),
        run_criterion(
            10,
            "Hodge duality and middle-degree splitting",
            criterion_10,
        ),
        run_criterion(11, "degree-2 equivalence sweep", |g| {
            criterion_11(g, &algebra)
        }),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!(
        "acceptance: {passed}/{} criteria passed ({:.1}s)",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
