//! Small dense-matrix helpers shared across modules. Everything here acts
//! on d x d or 2d x 2d matrices with d in {2, 3}, so plain `DMatrix` is
//! cheap enough.

use nalgebra::{DMatrix, DVector};

/// Builds a skew-symmetric matrix from its free components.
///
/// * d = 2: one component `w`, giving `[[0, w], [-w, 0]]`.
/// * d = 3: `(w12, w13, w23)` filling the strict upper triangle row-major.
pub fn skew_from_components(d: usize, comps: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    match d {
        2 => {
            assert_eq!(comps.len(), 1);
            a[(0, 1)] = comps[0];
            a[(1, 0)] = -comps[0];
        }
        3 => {
            assert_eq!(comps.len(), 3);
            a[(0, 1)] = comps[0];
            a[(0, 2)] = comps[1];
            a[(1, 2)] = comps[2];
            a[(1, 0)] = -comps[0];
            a[(2, 0)] = -comps[1];
            a[(2, 1)] = -comps[2];
        }
        _ => panic!("dimension {d} not supported"),
    }
    a
}

/// Free components of a skew-symmetric matrix (inverse of
/// [`skew_from_components`]).
pub fn skew_components(a: &DMatrix<f64>) -> Vec<f64> {
    match a.nrows() {
        2 => vec![a[(0, 1)]],
        3 => vec![a[(0, 1)], a[(0, 2)], a[(1, 2)]],
        d => panic!("dimension {d} not supported"),
    }
}

/// Number of free skew components in dimension `d`.
pub fn skew_dof(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Max-norm relative asymmetry `max |A + A^T| / max(1, |A|)`.
pub fn skew_defect(a: &DMatrix<f64>) -> f64 {
    let sym = a + a.transpose();
    let scale = a.amax().max(1.0);
    sym.amax() / scale
}

/// Frobenius-relative symmetry defect of `m`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let asym = m - m.transpose();
    asym.norm() / m.norm().max(1.0)
}

/// Matrix exponential by scaling-and-squaring with a fixed-order Taylor
/// series. Intended for the small generators used by the transport step;
/// accuracy is checked against an RK4 characteristics oracle in tests.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let norm = m.amax() * n as f64;
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = (&term * &scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Solves the small dense system `A x = b` via LU with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_roundtrip() {
        let a = skew_from_components(3, &[0.3, -0.7, 1.1]);
        assert_eq!(skew_components(&a), vec![0.3, -0.7, 1.1]);
        assert!(skew_defect(&a) == 0.0);
    }

    #[test]
    fn exp_of_rotation_generator() {
        // exp of the 2x2 rotation generator is the rotation matrix
        let phi = 0.7;
        let g = skew_from_components(2, &[phi]);
        let r = matrix_exp(&g);
        assert!((r[(0, 0)] - phi.cos()).abs() < 1e-14);
        assert!((r[(0, 1)] - phi.sin()).abs() < 1e-14);
        assert!((r[(1, 0)] + phi.sin()).abs() < 1e-14);
    }

    #[test]
    fn exp_is_orthogonal_for_skew_input() {
        let g = skew_from_components(3, &[0.4, -0.2, 0.9]);
        let r = matrix_exp(&g);
        let err = (&r * r.transpose() - DMatrix::identity(3, 3)).amax();
        assert!(err < 1e-14, "orthogonality defect {err}");
    }
}
