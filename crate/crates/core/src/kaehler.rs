//! Pointwise Kähler operator algebra in the adapted frame
//! `(e_1, e_2 = J e_1, …, e_{2m-1}, e_{2m} = J e_{2m-1})`.
//!
//! `L` is wedging with `ω = Σ e_{2i-1} ∧ e_{2i}`, `Λ` is its adjoint and `J`
//! acts on forms as the derivation `Ju = Σ J e_i ∧ (e_i ⌟ u)`.

use thiserror::Error;

use crate::exterior::{AlternatingForm, Covector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KaehlerError {
    #[error("complex dimension must be at least 1")]
    ZeroDimension,
    #[error("form lives in dimension {got}, frame has real dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "Lefschetz decomposition needs degree <= m = {m}, got {degree}; apply the Hodge star first"
    )]
    DegreeAboveMiddle { degree: usize, m: usize },
}

/// Primitive components `u_0, …, u_l` with `u = Σ L^i u_i`.
#[derive(Debug, Clone)]
pub struct LefschetzDecomposition {
    pub degree: usize,
    pub components: Vec<AlternatingForm>,
}

impl LefschetzDecomposition {
    /// `Σ L^i u_i`.
    pub fn reassemble(&self, frame: &KaehlerFrame) -> AlternatingForm {
        let mut out = AlternatingForm::zero(frame.n(), self.degree);
        for (i, u) in self.components.iter().enumerate() {
            out += &frame.l_power(u, i);
        }
        out
    }

    /// Levels whose component exceeds `tol` in norm.
    pub fn nonzero_levels(&self, tol: f64) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, u)| u.norm() > tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// One entry of [`KaehlerFrame::lambda_l_eigencheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEigenvalue {
    pub level: usize,
    pub eigenvalue: f64,
    /// `|ΛL(L^i u_i) - λ L^i u_i| / |λ L^i u_i|`
    pub residual: f64,
}

/// Complex dimension `m`, complex structure and Kähler form of `R^{2m}`.
#[derive(Debug, Clone)]
pub struct KaehlerFrame {
    m: usize,
    omega: AlternatingForm,
}

impl KaehlerFrame {
    pub fn new(m: usize) -> Result<Self, KaehlerError> {
        if m == 0 {
            return Err(KaehlerError::ZeroDimension);
        }
        let n = 2 * m;
        let omega = AlternatingForm::from_terms(n, 2, (0..m).map(|i| (0b11u32 << (2 * i), 1.0)));
        Ok(Self { m, omega })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        2 * self.m
    }

    pub fn omega(&self) -> &AlternatingForm {
        &self.omega
    }

    pub fn check(&self, a: &AlternatingForm) -> Result<(), KaehlerError> {
        if a.dim() != self.n() {
            return Err(KaehlerError::DimensionMismatch {
                expected: self.n(),
                got: a.dim(),
            });
        }
        Ok(())
    }

    /// `J` on vector components: `J e_{2i-1} = e_{2i}`, `J e_{2i} = -e_{2i-1}`.
    pub fn j_vector(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.m {
            out[2 * i + 1] = v[2 * i];
            out[2 * i] = -v[2 * i + 1];
        }
        out
    }

    /// `J e_k` as a covector.
    pub fn j_unit(&self, k: usize) -> Covector {
        let n = self.n();
        if k % 2 == 0 {
            AlternatingForm::unit(n, k + 1)
        } else {
            -&AlternatingForm::unit(n, k - 1)
        }
    }

    /// `J` on a covector (the degree-one case of [`j_extension`](Self::j_extension)).
    pub fn j_covector(&self, x: &Covector) -> Covector {
        AlternatingForm::covector(&self.j_vector(&x.components()))
    }

    /// `ω(X, Y) = <JX, Y>`.
    pub fn omega_pair(&self, x: &[f64], y: &[f64]) -> f64 {
        self.j_vector(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// `L a = ω ∧ a`.
    pub fn lefschetz_l(&self, a: &AlternatingForm) -> AlternatingForm {
        self.omega.wedge(a)
    }

    pub fn l_power(&self, a: &AlternatingForm, s: usize) -> AlternatingForm {
        (0..s).fold(a.clone(), |acc, _| self.lefschetz_l(&acc))
    }

    /// `Λ a = Σ_i e_{2i} ⌟ e_{2i-1} ⌟ a`, the adjoint of `L`.
    pub fn lefschetz_lambda(&self, a: &AlternatingForm) -> AlternatingForm {
        let n = a.dim();
        if a.degree() < 2 {
            return AlternatingForm::zero(n, a.degree().saturating_sub(2));
        }
        let mut out = AlternatingForm::zero(n, a.degree() - 2);
        for i in 0..self.m {
            out += &a.interior_unit(2 * i).interior_unit(2 * i + 1);
        }
        out
    }

    pub fn lambda_power(&self, a: &AlternatingForm, r: usize) -> AlternatingForm {
        (0..r).fold(a.clone(), |acc, _| self.lefschetz_lambda(&acc))
    }

    /// `J u = Σ J e_i ∧ (e_i ⌟ u)`.
    pub fn j_extension(&self, a: &AlternatingForm) -> AlternatingForm {
        let n = a.dim();
        let mut terms = Vec::new();
        for (index, c) in a.terms() {
            let bits = index.bits();
            for i in 0..self.m {
                let (x, y) = (2 * i, 2 * i + 1);
                let has_x = bits >> x & 1 == 1;
                let has_y = bits >> y & 1 == 1;
                // e_x -> e_y and e_y -> -e_x in the slot; same position in the
                // ordered product since x and y are adjacent.
                if has_x && !has_y {
                    terms.push((bits & !(1 << x) | (1 << y), c));
                } else if has_y && !has_x {
                    terms.push((bits & !(1 << y) | (1 << x), -c));
                }
            }
        }
        AlternatingForm::from_terms(n, a.degree(), terms)
    }

    /// Admissible values of `|p - q|` for a form of degree `degree`.
    pub fn admissible_types(&self, degree: usize) -> Vec<usize> {
        let top = degree.min(self.n().saturating_sub(degree));
        (0..=top).filter(|s| s % 2 == degree % 2).collect()
    }

    /// Component of `a` in the `J²`-eigenspace with eigenvalue `-s²`, i.e. the
    /// `(p,q)+(q,p)` part with `|p - q| = s`. Inadmissible `s` gives zero.
    pub fn type_project(&self, a: &AlternatingForm, s: usize) -> AlternatingForm {
        let spectrum = self.admissible_types(a.degree());
        if !spectrum.contains(&s) {
            return AlternatingForm::zero(a.dim(), a.degree());
        }
        // Lagrange interpolation: P_s = Π_{t ≠ s} (J² + t²) / (t² - s²)
        let mut out = a.clone();
        for &t in spectrum.iter().filter(|t| **t != s) {
            let t2 = (t * t) as f64;
            let j2 = self.j_extension(&self.j_extension(&out));
            out = (&j2 + &out.scale(t2)).scale(1.0 / (t2 - (s * s) as f64));
        }
        out
    }

    /// `Λ^r L^s α = s!(m-p-s+r)! / ((s-r)!(m-p-s)!) L^{s-r} α` for primitive
    /// `α` of degree `p`; zero when `r > s` or `m - p - s < 0`.
    pub fn lambda_l_power_coefficient(m: usize, p: usize, r: usize, s: usize) -> f64 {
        if r > s || p + s > m {
            return 0.0;
        }
        let base = m - p - s;
        // s!/(s-r)! * (base+r)!/base!
        let falling: f64 = ((s - r + 1)..=s).map(|k| k as f64).product();
        let rising: f64 = ((base + 1)..=(base + r)).map(|k| k as f64).product();
        falling * rising
    }

    /// Weyl decomposition of a form of degree `p <= m`, peeled from the top:
    /// `Λ^i` of the remainder isolates `u_i` with the exact coefficient above.
    pub fn lefschetz_decompose(
        &self,
        a: &AlternatingForm,
    ) -> Result<LefschetzDecomposition, KaehlerError> {
        self.check(a)?;
        let p = a.degree();
        if p > self.m {
            return Err(KaehlerError::DegreeAboveMiddle {
                degree: p,
                m: self.m,
            });
        }
        let top = p / 2;
        let mut components = vec![AlternatingForm::zero(self.n(), 0); top + 1];
        let mut rest = a.clone();
        for i in (0..=top).rev() {
            let c = Self::lambda_l_power_coefficient(self.m, p - 2 * i, i, i);
            let ui = self.lambda_power(&rest, i).scale(1.0 / c);
            rest -= &self.l_power(&ui, i);
            components[i] = ui;
        }
        Ok(LefschetzDecomposition {
            degree: p,
            components,
        })
    }

    /// Primitive part `u_0` of a form of degree `<= m`.
    pub fn primitive_part(&self, a: &AlternatingForm) -> Result<AlternatingForm, KaehlerError> {
        Ok(self.lefschetz_decompose(a)?.components.swap_remove(0))
    }

    /// `Λ L^s α - L^s Λ α`.
    pub fn commutator_lambda_ls(&self, alpha: &AlternatingForm, s: usize) -> AlternatingForm {
        let left = self.lefschetz_lambda(&self.l_power(alpha, s));
        let right = self.l_power(&self.lefschetz_lambda(alpha), s);
        if left.degree() != right.degree() {
            // alpha of degree < 2: Λα vanishes
            return left;
        }
        &left - &right
    }

    /// `s (m - p - s + 1)`, the commutator coefficient; may be negative.
    pub fn commutator_coefficient(m: usize, p: usize, s: usize) -> f64 {
        s as f64 * (m as f64 - p as f64 - s as f64 + 1.0)
    }

    /// `(i + 1)(m - p + i)`, the `ΛL` eigenvalue on `L^i(primitive)` in degree `p`.
    pub fn lambda_l_eigenvalue(m: usize, p: usize, i: usize) -> f64 {
        ((i + 1) * (m + i - p)) as f64
    }

    /// Eigenvalue of `ΛL` on each nonzero Lefschetz level of `a`, together with
    /// the residual of the eigen-equation on that level.
    pub fn lambda_l_eigencheck(
        &self,
        a: &AlternatingForm,
    ) -> Result<Vec<LevelEigenvalue>, KaehlerError> {
        let p = a.degree();
        let decomposition = self.lefschetz_decompose(a)?;
        let floor = 1e-12 * a.norm().max(1.0);
        let mut out = Vec::new();
        for (i, ui) in decomposition.components.iter().enumerate() {
            if ui.norm() <= floor {
                continue;
            }
            let level = self.l_power(ui, i);
            let eigenvalue = Self::lambda_l_eigenvalue(self.m, p, i);
            let image = self.lefschetz_lambda(&self.lefschetz_l(&level));
            let expected = level.scale(eigenvalue);
            let scale = expected.norm().max(image.norm()).max(1e-300);
            out.push(LevelEigenvalue {
                level: i,
                eigenvalue,
                residual: image.distance(&expected) / scale,
            });
        }
        Ok(out)
    }

    /// All basis forms of a degree, in mask order.
    pub fn basis_forms(&self, degree: usize) -> impl Iterator<Item = AlternatingForm> + '_ {
        let n = self.n();
        crate::exterior::basis_masks(n, degree)
            .iter()
            .map(move |m| AlternatingForm::from_terms(n, degree, [(*m, 1.0)]))
    }
}
