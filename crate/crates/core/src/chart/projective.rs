use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{numeric_operator, ChartError, ChartGeometry, DiffOp, FormField, PointOp, Stencil};
use crate::exterior::AlternatingForm;

/// Affine chart of `CP^m` with the Fubini–Study metric, `Ric = 2(m+1) g`.
pub fn fubini_study(m: usize) -> Result<ChartGeometry, ChartError> {
    ChartGeometry::fubini_study(m)
}

/// First nonzero eigenvalue `4(m+1)` of the Laplacian on `CP^m`.
pub fn first_eigenvalue(m: usize) -> f64 {
    4.0 * (m + 1) as f64
}

/// `diag(1, -1/m, …, -1/m)`.
pub fn default_eigen_matrix(m: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::from_element(m + 1, m + 1, Complex64::new(0.0, 0.0));
    a[(0, 0)] = Complex64::new(1.0, 0.0);
    for i in 1..=m {
        a[(i, i)] = Complex64::new(-1.0 / m as f64, 0.0);
    }
    a
}

fn require_fs(geom: &ChartGeometry) -> Result<(), ChartError> {
    if geom.tag() != "fubini_study" {
        return Err(ChartError::WrongModel {
            expected: "fubini_study",
            got: geom.tag(),
        });
    }
    Ok(())
}

/// `f([Z]) = Z* A Z / |Z|²` on the chart `Z = (1, z)`, for Hermitian traceless
/// `A`. The zero matrix gives the zero function.
pub fn laplace_eigenfunction(
    geom: &ChartGeometry,
    a: &DMatrix<Complex64>,
) -> Result<FormField, ChartError> {
    require_fs(geom)?;
    let m = geom.m();
    if a.nrows() != m + 1 || a.ncols() != m + 1 {
        return Err(ChartError::MatrixShape {
            expected: m + 1,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let scale = a.iter().fold(0.0f64, |s, c| s.max(c.norm())).max(1.0);
    let herm = (a - a.adjoint())
        .iter()
        .fold(0.0f64, |s, c| s.max(c.norm()));
    if herm > 1e-12 * scale {
        return Err(ChartError::NotHermitian(herm));
    }
    let trace = a.trace().norm();
    if trace > 1e-12 * scale {
        return Err(ChartError::NotTraceless(trace));
    }
    let n = geom.n();
    let a = a.clone();
    Ok(FormField::scalar(n, move |x| {
        let mut z = Vec::with_capacity(m + 1);
        z.push(Complex64::new(1.0, 0.0));
        z.extend((0..m).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])));
        let mut num = Complex64::new(0.0, 0.0);
        for i in 0..=m {
            let row: Complex64 = (0..=m).map(|j| a[(i, j)] * z[j]).sum();
            num += z[i].conj() * row;
        }
        let s: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        num.re / s
    }))
}

/// `ω` as a coordinate field.
pub fn kaehler_form_field(geom: &ChartGeometry) -> FormField {
    let g = geom.clone();
    FormField::new(geom.n(), 2, move |x| g.kaehler_form(x))
}

/// `dd^c f` by nested differencing.
pub fn ddc_field(geom: &ChartGeometry, f: &FormField, st: Stencil) -> FormField {
    let dc = numeric_operator(geom, f, st, DiffOp::Dc);
    numeric_operator(geom, &dc, st, DiffOp::D)
}

/// `φ̂ = dd^c f + 6 f ω`.
pub fn build_phi_hat(
    geom: &ChartGeometry,
    f: &FormField,
    st: Stencil,
) -> Result<FormField, ChartError> {
    require_fs(geom)?;
    f.check_shape(geom.n(), 0)?;
    let ddc = ddc_field(geom, f, st);
    let w = kaehler_form_field(geom).times(f).scale(6.0);
    Ok(ddc.add(&w))
}

/// The second expression `(dd^c f)_0 + (2m-4)/m f ω` for the same form.
pub fn phi_hat_primitive_display(
    geom: &ChartGeometry,
    f: &FormField,
    st: Stencil,
) -> Result<FormField, ChartError> {
    require_fs(geom)?;
    f.check_shape(geom.n(), 0)?;
    let m = geom.m() as f64;
    let primitive = primitive_part_field(geom, &ddc_field(geom, f, st));
    let w = kaehler_form_field(geom).times(f).scale((2.0 * m - 4.0) / m);
    Ok(primitive.add(&w))
}

/// `a - (Λa / m) ω` for a 2-form field.
pub fn primitive_part_field(geom: &ChartGeometry, a: &FormField) -> FormField {
    let g = geom.clone();
    let m = geom.m() as f64;
    a.map(2, move |x, v| {
        let trace = super::apply_point_op(&g, x, &v, PointOp::Lambda).scalar_value();
        v.add_scaled(-trace / m, &g.kaehler_form(x))
    })
}

/// `L^s(1)` as a coordinate field.
pub fn omega_power_field(geom: &ChartGeometry, s: usize) -> FormField {
    let g = geom.clone();
    let n = geom.n();
    FormField::new(n, 2 * s, move |x| {
        let w = g.kaehler_form(x);
        (0..s).fold(AlternatingForm::scalar(n, 1.0), |acc, _| acc.wedge(&w))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_eigenfunction_closed_form() {
        let g = fubini_study(1).unwrap();
        let f = laplace_eigenfunction(&g, &default_eigen_matrix(1)).unwrap();
        let x = [0.6, -0.3];
        let r2 = 0.45;
        assert!((f.eval(&x).scalar_value() - (1.0 - r2) / (1.0 + r2)).abs() < 1e-15);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let g = fubini_study(1).unwrap();
        let mut a = default_eigen_matrix(1);
        a[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            laplace_eigenfunction(&g, &a),
            Err(ChartError::NotHermitian(_))
        ));
        let mut b = default_eigen_matrix(1);
        b[(0, 0)] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            laplace_eigenfunction(&g, &b),
            Err(ChartError::NotTraceless(_))
        ));
        let zero = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        let f = laplace_eigenfunction(&g, &zero).unwrap();
        assert_eq!(f.eval(&[0.2, 0.1]).scalar_value(), 0.0);
        let flat = ChartGeometry::flat_torus(1).unwrap();
        assert!(matches!(
            laplace_eigenfunction(&flat, &default_eigen_matrix(1)),
            Err(ChartError::WrongModel { .. })
        ));
    }

    #[test]
    fn omega_power_matches_repeated_wedge() {
        let g = fubini_study(2).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let w = g.kaehler_form(&x);
        assert!(omega_power_field(&g, 2).eval(&x).distance(&w.wedge(&w)) < 1e-15);
    }
}
