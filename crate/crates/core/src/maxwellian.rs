//! Exact algebra of traveling Maxwellians.
//!
//! A traveling Maxwellian is annihilated by both free transport and the
//! collision operator; after normalizing mass, momentum and center of mass
//! it is the Gaussian
//!
//! ```text
//! M(t,x,v) = sqrt(det Q)/(2 pi)^d * exp{-1/2 [ a|v|^2 + 2b v.(x-tv)
//!                                              + c|x-tv|^2 + 2 v^T A x ]}
//! ```
//!
//! with `a, c, ac - b^2 > 0`, `A` skew-symmetric and
//! `Q = (ac - b^2) I + A^2` positive definite. This module evaluates such
//! Gaussians, maps parameters to the seven conserved moments in closed form
//! and inverts that map by a damped Newton iteration.

use crate::error::{Error, Result};
use crate::grid::DistributionField;
use crate::linalg::{self, skew_from_components};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const TAU: f64 = std::f64::consts::TAU;

/// Parameters `(m, u, y, a, b, c, A)` of a traveling Maxwellian together
/// with the derived matrices `Q = (ac-b^2)I + A^2`, `B = Q^{1/2}` and the
/// 2d x 2d block matrix `P = [[aI, bI+A], [bI-A, cI]]`.
#[derive(Debug, Clone)]
pub struct MaxwellianParams {
    pub d: usize,
    pub m: f64,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_mat: DMatrix<f64>,
    // derived
    pub q_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub b_inv: DMatrix<f64>,
    pub p_mat: DMatrix<f64>,
    pub det_b: f64,
    /// Log of the normalization constant: exp(log_norm) = sqrt(det P)/(2 pi)^d.
    pub log_norm: f64,
}

/// The seven conserved integrals of a distribution:
/// `(m0, u0, y0, a0, b0, c0, A0) = ∫ (1, v, x-tv, |v|^2, v.(x-tv), |x-tv|^2, v ∧ x) F dx dv`.
#[derive(Debug, Clone)]
pub struct ConservedMoments {
    pub d: usize,
    pub m0: f64,
    pub u0: DVector<f64>,
    pub y0: DVector<f64>,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub a0_mat: DMatrix<f64>,
}

/// JSON wire form shared by params and moments (`A` row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianStateJson {
    pub d: usize,
    pub m: f64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub a_mat: Vec<f64>,
}

/// Symmetric positive-definite square root via eigendecomposition.
///
/// Rejects non-symmetric or non-positive-definite input. The result
/// commutes with any matrix commuting with `q` (shared eigenbasis).
pub fn matrix_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.nrows() != q.ncols() {
        return Err(Error::domain("matrix_sqrt: non-square input"));
    }
    if linalg::symmetry_defect(q) > 1e-12 {
        return Err(Error::domain("matrix_sqrt: input not symmetric"));
    }
    let sym = 0.5 * (q + q.transpose());
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| l <= scale * 1e-14) {
        return Err(Error::domain("matrix_sqrt: input not positive definite"));
    }
    let sqrt_vals = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt()));
    let b = &eig.eigenvectors * sqrt_vals * eig.eigenvectors.transpose();
    Ok(0.5 * (&b + b.transpose()))
}

impl MaxwellianParams {
    /// Validates the raw parameters and computes the derived matrices.
    pub fn new(
        d: usize,
        m: f64,
        u: DVector<f64>,
        y: DVector<f64>,
        a: f64,
        b: f64,
        c: f64,
        a_mat: DMatrix<f64>,
    ) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::domain(format!("dimension {d} not supported")));
        }
        if !(m > 0.0) {
            return Err(Error::domain("mass m must be positive"));
        }
        if u.len() != d || y.len() != d || a_mat.nrows() != d || a_mat.ncols() != d {
            return Err(Error::domain("shape mismatch in Maxwellian parameters"));
        }
        if linalg::skew_defect(&a_mat) > 1e-12 {
            return Err(Error::domain("A must be skew-symmetric"));
        }
        if !(a > 0.0 && c > 0.0 && a * c - b * b > 0.0) {
            return Err(Error::domain(format!(
                "invalid quadratic coefficients: need a, c, ac - b^2 > 0, got a={a}, c={c}, ac-b^2={}",
                a * c - b * b
            )));
        }
        let q_mat = DMatrix::identity(d, d) * (a * c - b * b) + &a_mat * &a_mat;
        let b_mat = matrix_sqrt(&q_mat)
            .map_err(|_| Error::domain("Q = (ac-b^2)I + A^2 is not positive definite"))?;
        let b_inv = b_mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::domain("B is singular"))?;

        let mut p_mat = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            p_mat[(i, i)] = a;
            p_mat[(d + i, d + i)] = c;
            for j in 0..d {
                p_mat[(i, d + j)] = if i == j { b } else { 0.0 } + a_mat[(i, j)];
                p_mat[(d + i, j)] = if i == j { b } else { 0.0 } - a_mat[(i, j)];
            }
        }
        let det_q = q_mat.determinant();
        let det_p = p_mat.determinant();
        if (det_p - det_q).abs() > 1e-10 * det_q.abs().max(1e-300) {
            return Err(Error::domain(format!(
                "det P = {det_p} and det Q = {det_q} disagree beyond tolerance"
            )));
        }
        let det_b = b_mat.determinant();
        // log(sqrt(det P)/(2 pi)^d)
        let log_norm = 0.5 * det_p.ln() - d as f64 * TAU.ln();
        Ok(Self {
            d,
            m,
            u,
            y,
            a,
            b,
            c,
            a_mat,
            q_mat,
            b_mat,
            b_inv,
            p_mat,
            det_b,
            log_norm,
        })
    }

    /// The standard normalized Maxwellian `a = c = 1, b = 0, A = 0`.
    pub fn standard(d: usize) -> Self {
        Self::new(
            d,
            1.0,
            DVector::zeros(d),
            DVector::zeros(d),
            1.0,
            0.0,
            1.0,
            DMatrix::zeros(d, d),
        )
        .expect("standard Maxwellian is valid")
    }

    /// True when the parameters are the reduced case `a=c=1, b=0, A=0`
    /// (with arbitrary mass/shifts).
    pub fn is_reduced(&self) -> bool {
        (self.a - 1.0).abs() < 1e-14
            && self.b.abs() < 1e-14
            && (self.c - 1.0).abs() < 1e-14
            && self.a_mat.amax() < 1e-14
    }

    /// Pointwise evaluation of the traveling Maxwellian at `(t, x, v)`.
    ///
    /// The mass/momentum/center shifts are applied first:
    /// `M(t,x,v) = m * M_centered(t, x - y - t u, v - u)`.
    pub fn evaluate(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(v.len(), self.d);
        let mut quad = 0.0;
        // chi = (x - y - t u) - t w is the comoving spatial offset.
        let mut chi = [0.0; 3];
        let mut w = [0.0; 3];
        for i in 0..self.d {
            w[i] = v[i] - self.u[i];
            let xi = x[i] - self.y[i] - t * self.u[i];
            chi[i] = xi - t * w[i];
        }
        let mut w_dot_chi = 0.0;
        let mut w2 = 0.0;
        let mut chi2 = 0.0;
        for i in 0..self.d {
            w2 += w[i] * w[i];
            chi2 += chi[i] * chi[i];
            w_dot_chi += w[i] * chi[i];
        }
        // v^T A x with the shifted variables; x enters in full, not x - tv,
        // but w^T A (xi) = w^T A (chi + t w) = w^T A chi since w^T A w = 0.
        let mut w_a_chi = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                w_a_chi += w[i] * self.a_mat[(i, j)] * chi[j];
            }
        }
        quad += self.a * w2 + 2.0 * self.b * w_dot_chi + self.c * chi2 + 2.0 * w_a_chi;
        self.m * (self.log_norm - 0.5 * quad).exp()
    }

    /// Closed-form conserved moments.
    ///
    /// With `T = trace(Q^{-1})`, the centered unit-mass moments are
    /// `a0 = cT, b0 = -bT, c0 = aT, A0 = -2 A Q^{-1}`; the shifts then add
    /// `|u|^2`, `u.y`, `|y|^2` and `u ∧ y` contributions. Validated against
    /// a tensor-quadrature oracle in the integration tests.
    pub fn moments(&self) -> ConservedMoments {
        let d = self.d;
        let q_inv = self
            .q_mat
            .clone()
            .try_inverse()
            .expect("Q is positive definite by construction");
        let trace_q_inv = q_inv.trace();
        let u = &self.u;
        let y = &self.y;
        let u2 = u.dot(u);
        let y2 = y.dot(y);
        let uy = u.dot(y);
        let wedge = u * y.transpose() - y * u.transpose();
        ConservedMoments {
            d,
            m0: self.m,
            u0: self.m * u,
            y0: self.m * y,
            a0: self.m * (self.c * trace_q_inv + u2),
            b0: self.m * (-self.b * trace_q_inv + uy),
            c0: self.m * (self.a * trace_q_inv + y2),
            a0_mat: self.m * (-2.0 * &self.a_mat * &q_inv + wedge),
        }
    }

    pub fn to_json(&self) -> GaussianStateJson {
        GaussianStateJson {
            d: self.d,
            m: self.m,
            u: self.u.iter().copied().collect(),
            y: self.y.iter().copied().collect(),
            a: self.a,
            b: self.b,
            c: self.c,
            a_mat: self.a_mat.transpose().as_slice().to_vec(),
        }
    }

    pub fn from_json(j: &GaussianStateJson) -> Result<Self> {
        let d = j.d;
        if j.a_mat.len() != d * d {
            return Err(Error::domain("A must have d*d row-major entries"));
        }
        let a_mat = DMatrix::from_row_slice(d, d, &j.a_mat);
        Self::new(
            d,
            j.m,
            DVector::from_vec(j.u.clone()),
            DVector::from_vec(j.y.clone()),
            j.a,
            j.b,
            j.c,
            a_mat,
        )
    }
}

impl ConservedMoments {
    pub fn to_json(&self) -> GaussianStateJson {
        GaussianStateJson {
            d: self.d,
            m: self.m0,
            u: self.u0.iter().copied().collect(),
            y: self.y0.iter().copied().collect(),
            a: self.a0,
            b: self.b0,
            c: self.c0,
            a_mat: self.a0_mat.transpose().as_slice().to_vec(),
        }
    }

    pub fn from_json(j: &GaussianStateJson) -> Result<Self> {
        let d = j.d;
        if j.a_mat.len() != d * d {
            return Err(Error::domain("A0 must have d*d row-major entries"));
        }
        Ok(Self {
            d,
            m0: j.m,
            u0: DVector::from_vec(j.u.clone()),
            y0: DVector::from_vec(j.y.clone()),
            a0: j.a,
            b0: j.b,
            c0: j.c,
            a0_mat: DMatrix::from_row_slice(d, d, &j.a_mat),
        })
    }

    /// Max relative deviation from `other`, over all seven components.
    pub fn rel_distance(&self, other: &ConservedMoments) -> f64 {
        let scale = self
            .a0
            .abs()
            .max(self.c0.abs())
            .max(self.m0.abs())
            .max(1e-30);
        let mut err: f64 = (self.m0 - other.m0).abs() / scale;
        err = err.max((self.a0 - other.a0).abs() / scale);
        err = err.max((self.b0 - other.b0).abs() / scale);
        err = err.max((self.c0 - other.c0).abs() / scale);
        for i in 0..self.d {
            err = err.max((self.u0[i] - other.u0[i]).abs() / scale);
            err = err.max((self.y0[i] - other.y0[i]).abs() / scale);
        }
        err = err.max((&self.a0_mat - &other.a0_mat).amax() / scale);
        err
    }
}

/// Options for the Newton inversion of the moment map.
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 80,
        }
    }
}

/// Recovers the unique parameter set reproducing the given conserved
/// moments, by Newton iteration on `(a, b, c, A)` started from the closed
/// `A = 0` solution. Fails with an infeasibility error when the centered
/// moments violate `a0, c0 > 0, a0 c0 - b0^2 > 0`.
pub fn params_from_moments(
    moments: &ConservedMoments,
    opts: &NewtonOptions,
) -> Result<MaxwellianParams> {
    let d = moments.d;
    if !(moments.m0 > 0.0) {
        return Err(Error::infeasible("mass must be positive"));
    }
    let u = &moments.u0 / moments.m0;
    let y = &moments.y0 / moments.m0;
    // centered, unit-mass second moments
    let a0 = moments.a0 / moments.m0 - u.dot(&u);
    let b0 = moments.b0 / moments.m0 - u.dot(&y);
    let c0 = moments.c0 / moments.m0 - y.dot(&y);
    let wedge = &u * y.transpose() - &y * u.transpose();
    let a0_mat = &moments.a0_mat / moments.m0 - wedge;
    if linalg::skew_defect(&a0_mat) > 1e-10 {
        return Err(Error::infeasible("A0 is not skew-symmetric"));
    }
    if !(a0 > 0.0 && c0 > 0.0 && a0 * c0 - b0 * b0 > 0.0) {
        return Err(Error::infeasible(format!(
            "centered moments violate a0, c0, a0 c0 - b0^2 > 0 (a0={a0}, c0={c0}, a0c0-b0^2={})",
            a0 * c0 - b0 * b0
        )));
    }

    let n_skew = linalg::skew_dof(d);
    let target: Vec<f64> = {
        let mut t = vec![a0, b0, c0];
        t.extend(linalg::skew_components(&a0_mat));
        t
    };
    let scale = a0.abs().max(c0.abs()).max(1.0);

    // residual of the forward map at (a, b, c, skew comps)
    let residual = |theta: &[f64]| -> Option<Vec<f64>> {
        let (a, b, c) = (theta[0], theta[1], theta[2]);
        if !(a > 0.0 && c > 0.0 && a * c - b * b > 0.0) {
            return None;
        }
        let a_mat = skew_from_components(d, &theta[3..3 + n_skew]);
        let q = DMatrix::identity(d, d) * (a * c - b * b) + &a_mat * &a_mat;
        let q_inv = q.try_inverse()?;
        if q_inv.trace() <= 0.0 {
            return None;
        }
        let t = q_inv.trace();
        let pred_a0_mat = -2.0 * &a_mat * &q_inv;
        let mut r = vec![c * t - target[0], -b * t - target[1], a * t - target[2]];
        let comps = linalg::skew_components(&pred_a0_mat);
        for k in 0..n_skew {
            r.push(comps[k] - target[3 + k]);
        }
        Some(r)
    };

    // A = 0 closed-form start: a = kappa c0, c = kappa a0, b = -kappa b0
    // with kappa = d / (a0 c0 - b0^2).
    let kappa = d as f64 / (a0 * c0 - b0 * b0);
    let mut theta = vec![kappa * c0, -kappa * b0, kappa * a0];
    let det0 = theta[0] * theta[2] - theta[1] * theta[1];
    for comp in linalg::skew_components(&a0_mat) {
        theta.push(-0.5 * comp * det0);
    }
    // keep the start inside the validity cone if the A guess overshoots
    {
        let a_mat = skew_from_components(d, &theta[3..3 + n_skew]);
        let q = DMatrix::identity(d, d) * det0 + &a_mat * &a_mat;
        if q.symmetric_eigen().eigenvalues.min() <= 0.0 {
            for t in theta[3..].iter_mut() {
                *t *= 0.1;
            }
        }
    }

    let dim = 3 + n_skew;
    let mut r = residual(&theta).ok_or_else(|| Error::infeasible("infeasible starting point"))?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rnorm = norm(&r);
    for iter in 0..opts.max_iter {
        if rnorm <= opts.tol * scale {
            let (a, b, c) = (theta[0], theta[1], theta[2]);
            let a_mat = skew_from_components(d, &theta[3..3 + n_skew]);
            return MaxwellianParams::new(d, moments.m0, u, y, a, b, c, a_mat);
        }
        // central finite-difference Jacobian; dim <= 6 keeps this cheap
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = 1e-7 * theta[j].abs().max(1e-4);
            let mut tp = theta.clone();
            tp[j] += h;
            let mut tm = theta.clone();
            tm[j] -= h;
            let (rp, rm) = match (residual(&tp), residual(&tm)) {
                (Some(rp), Some(rm)) => (rp, rm),
                _ => {
                    let rp = residual(&tp).unwrap_or_else(|| r.clone());
                    let rm = residual(&tm).unwrap_or_else(|| r.clone());
                    (rp, rm)
                }
            };
            for i in 0..dim {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_vec(r.clone());
        let step = linalg::solve(&jac, &rhs).ok_or(Error::NoConvergence {
            iterations: iter,
            residual: rnorm,
        })?;
        // damped update: halve on rejection or on leaving the valid cone
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta
                .iter()
                .enumerate()
                .map(|(i, t)| t - lambda * step[i])
                .collect();
            if let Some(rt) = residual(&trial) {
                let rt_norm = norm(&rt);
                if rt_norm < rnorm {
                    theta = trial;
                    r = rt;
                    rnorm = rt_norm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: rnorm,
            });
        }
    }
    if rnorm <= opts.tol * scale {
        let (a, b, c) = (theta[0], theta[1], theta[2]);
        let a_mat = skew_from_components(d, &theta[3..3 + n_skew]);
        return MaxwellianParams::new(d, moments.m0, u, y, a, b, c, a_mat);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: rnorm,
    })
}

/// Least-squares residual of fitting `ln(field)` to the span
/// `{1, v, x-tv, |v|^2, v.(x-tv), |x-tv|^2, v ∧ (x-tv)}`.
///
/// The residual is the RMS misfit over grid nodes; it vanishes (to
/// round-off) exactly when the sampled field is a traveling Maxwellian.
pub fn log_span_check(field: &DistributionField, t: f64) -> Result<f64> {
    let d = field.grid.d;
    if field.values.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::domain("log_span_check requires strictly positive samples"));
    }
    let n_basis = 1 + d + d + 3 + linalg::skew_dof(d);
    let n_nodes = field.values.len();
    let mut design = DMatrix::zeros(n_nodes, n_basis);
    let mut rhs = DVector::zeros(n_nodes);
    for (row, (x, v)) in field.grid.iter_nodes().enumerate() {
        let mut col = 0;
        design[(row, col)] = 1.0;
        col += 1;
        let mut chi = [0.0; 3];
        for i in 0..d {
            chi[i] = x[i] - t * v[i];
        }
        for i in 0..d {
            design[(row, col)] = v[i];
            col += 1;
        }
        for i in 0..d {
            design[(row, col)] = chi[i];
            col += 1;
        }
        design[(row, col)] = (0..d).map(|i| v[i] * v[i]).sum::<f64>();
        col += 1;
        design[(row, col)] = (0..d).map(|i| v[i] * chi[i]).sum::<f64>();
        col += 1;
        design[(row, col)] = (0..d).map(|i| chi[i] * chi[i]).sum::<f64>();
        col += 1;
        for i in 0..d {
            for j in (i + 1)..d {
                design[(row, col)] = v[i] * chi[j] - v[j] * chi[i];
                col += 1;
            }
        }
        debug_assert_eq!(col, n_basis);
        rhs[row] = field.values[row].ln();
    }
    let svd = design.clone().svd(true, true);
    let beta = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::domain(format!("least-squares solve failed: {e}")))?;
    let resid = &design * beta - rhs;
    Ok((resid.norm_squared() / n_nodes as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PhaseGrid, VelocityGrid};

    fn sample_params() -> MaxwellianParams {
        MaxwellianParams::new(
            3,
            1.3,
            DVector::from_vec(vec![0.2, -0.1, 0.05]),
            DVector::from_vec(vec![-0.3, 0.2, 0.1]),
            1.2,
            0.3,
            1.1,
            skew_from_components(3, &[0.2, -0.15, 0.1]),
        )
        .unwrap()
    }

    #[test]
    fn standard_peak_value() {
        let p = MaxwellianParams::standard(3);
        let v = p.evaluate(0.0, &[0.0; 3], &[0.0; 3]);
        let expect = TAU.powi(-3); // (2 pi)^-3
        assert!((v - expect).abs() < 1e-18, "{v} vs {expect}");
    }

    #[test]
    fn free_transport_identity() {
        // M(t, x, v) = M(0, x - tv, v)
        let p = sample_params();
        let t = 1.7;
        let x = [0.4, -0.2, 0.9];
        let v = [0.1, 0.3, -0.5];
        let shifted = [x[0] - t * v[0], x[1] - t * v[1], x[2] - t * v[2]];
        let lhs = p.evaluate(t, &x, &v);
        let rhs = p.evaluate(0.0, &shifted, &v);
        assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs());
    }

    #[test]
    fn standard_moments_are_unit_gaussian_moments() {
        let p = MaxwellianParams::standard(3);
        let mom = p.moments();
        assert!((mom.m0 - 1.0).abs() < 1e-14);
        assert!((mom.a0 - 3.0).abs() < 1e-13);
        assert!((mom.c0 - 3.0).abs() < 1e-13);
        assert!(mom.b0.abs() < 1e-14);
        assert!(mom.a0_mat.amax() < 1e-14);
    }

    #[test]
    fn isotropic_scaled_moments() {
        // a = c = 2, b = 0, A = 0: Q = 4I, T = 3/4, a0 = c0 = 3/2
        let p = MaxwellianParams::new(
            3,
            1.0,
            DVector::zeros(3),
            DVector::zeros(3),
            2.0,
            0.0,
            2.0,
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        let mom = p.moments();
        assert!((mom.a0 - 1.5).abs() < 1e-14);
        assert!((mom.c0 - 1.5).abs() < 1e-14);
        assert!(mom.b0.abs() < 1e-14);
    }

    #[test]
    fn matrix_sqrt_diagonal() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 16.0]));
        let b = matrix_sqrt(&q).unwrap();
        for (i, want) in [2.0, 3.0, 4.0].iter().enumerate() {
            assert!((b[(i, i)] - want).abs() < 1e-14);
        }
        assert!(matrix_sqrt(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]))).is_err());
    }

    #[test]
    fn moment_inversion_identity_case() {
        let m = ConservedMoments {
            d: 3,
            m0: 1.0,
            u0: DVector::zeros(3),
            y0: DVector::zeros(3),
            a0: 3.0,
            b0: 0.0,
            c0: 3.0,
            a0_mat: DMatrix::zeros(3, 3),
        };
        let p = params_from_moments(&m, &NewtonOptions::default()).unwrap();
        assert!((p.a - 1.0).abs() < 1e-10);
        assert!((p.c - 1.0).abs() < 1e-10);
        assert!(p.b.abs() < 1e-10);
        assert!(p.a_mat.amax() < 1e-10);
    }

    #[test]
    fn degenerate_moments_rejected() {
        let m = ConservedMoments {
            d: 3,
            m0: 1.0,
            u0: DVector::zeros(3),
            y0: DVector::zeros(3),
            a0: 2.0,
            b0: -2.0,
            c0: 2.0,
            a0_mat: DMatrix::zeros(3, 3),
        };
        assert!(matches!(
            params_from_moments(&m, &NewtonOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn roundtrip_with_rotation_and_shifts() {
        let p = sample_params();
        let mom = p.moments();
        let rec = params_from_moments(&mom, &NewtonOptions::default()).unwrap();
        assert!((rec.a - p.a).abs() < 1e-8 * p.a);
        assert!((rec.b - p.b).abs() < 1e-8);
        assert!((rec.c - p.c).abs() < 1e-8 * p.c);
        assert!((&rec.a_mat - &p.a_mat).amax() < 1e-8);
        assert!((&rec.u - &p.u).amax() < 1e-12);
        assert!((&rec.y - &p.y).amax() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let p = sample_params();
        let j = serde_json::to_string(&p.to_json()).unwrap();
        let back = MaxwellianParams::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        assert!((back.a - p.a).abs() < 1e-15);
        assert!((&back.a_mat - &p.a_mat).amax() < 1e-15);
    }

    #[test]
    fn log_span_accepts_maxwellian_rejects_perturbation() {
        let grid = PhaseGrid::new(3, 4, 3.0, VelocityGrid::new(3, 4, 3.0)).unwrap();
        let p = sample_params();
        let t = 0.4;
        let f = DistributionField::from_fn(&grid, |x, v| p.evaluate(t, x, v));
        let r = log_span_check(&f, t).unwrap();
        assert!(r < 1e-10, "Maxwellian residual {r}");
        let g = DistributionField::from_fn(&grid, |x, v| {
            p.evaluate(t, x, v) * (1.0 + 0.1 * (v[0]).sin())
        });
        let r = log_span_check(&g, t).unwrap();
        assert!(r > 1e-3, "perturbed residual {r}");
        let mut bad = f.clone();
        bad.values[0] = 0.0;
        assert!(log_span_check(&bad, t).is_err());
    }
}
