//! Non-cutoff collision kernel `B(v - v_*, sigma) = |v - v_*|^gamma b(cos theta)`
//! with the concrete angular density `b(cos theta) = K theta^(-1-2s) / sin theta`
//! on `(0, pi/2]`, so `sin theta b(cos theta) = K theta^(-1-2s)` attains the
//! assumed lower bound with equality. The operator is only used through its
//! angular cutoff `sin(theta/2) >= eta`.
//!
//! The sigma quadrature is a graded Gauss-Legendre rule in theta (panels
//! geometrically refined toward the cutoff, where the density concentrates)
//! times a uniform azimuth rule. Azimuth frames are chosen canonically per
//! offset direction so that the node set of the reversed pair `(j, i)` is
//! exactly the negated node set of `(i, j)`; pair-summed quadratures then
//! inherit the exact collision symmetries.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, graded_panels};
use serde::{Deserialize, Serialize};

/// Serializable kernel configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Velocity exponent, `(-3, 0]` (0 only for kernel-level checks).
    pub gamma: f64,
    /// Angular singularity strength, `(0, 1)`.
    pub s: f64,
    /// Lower-bound constant of the angular density, `(0, 1]`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Angular cutoff on `sin(theta/2)`, in `(0, pi/4]`.
    pub eta: f64,
    #[serde(default = "default_theta_panels")]
    pub theta_panels: usize,
    #[serde(default = "default_theta_per_panel")]
    pub theta_per_panel: usize,
    /// Azimuth node count (d = 3); must be even. Ignored at d = 2.
    #[serde(default = "default_n_azimuth")]
    pub n_azimuth: usize,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_theta_panels() -> usize {
    4
}
fn default_theta_per_panel() -> usize {
    4
}
fn default_n_azimuth() -> usize {
    8
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            gamma: -1.0,
            s: 0.25,
            kappa: 1.0,
            eta: 0.05,
            theta_panels: default_theta_panels(),
            theta_per_panel: default_theta_per_panel(),
            n_azimuth: default_n_azimuth(),
        }
    }
}

/// One theta node with its combined weight
/// `w = w_GL * sin^(d-2)(theta) * b(cos theta)`.
#[derive(Debug, Clone, Copy)]
pub struct ThetaNode {
    pub cos: f64,
    pub sin: f64,
    /// `1 - cos(theta) = 2 sin^2(theta/2)`.
    pub one_minus_cos: f64,
    pub weight: f64,
}

/// Discrete collision kernel: parameters plus the sigma quadrature.
#[derive(Debug, Clone)]
pub struct CollisionKernel {
    pub d: usize,
    pub gamma: f64,
    pub s: f64,
    pub kappa: f64,
    pub eta: f64,
    pub theta_nodes: Vec<ThetaNode>,
    /// Azimuth direction table `(cos phi, sin phi)`; two entries `(+1, -1)`
    /// encode the two branches at d = 2.
    pub azimuth: Vec<(f64, f64)>,
    /// Uniform azimuth weight (`2 pi / n` at d = 3, `1` per branch at d = 2).
    pub azimuth_weight: f64,
}

impl KernelConfig {
    pub fn build(&self, d: usize) -> Result<CollisionKernel> {
        if !(d == 2 || d == 3) {
            return Err(Error::config(format!("dimension {d} not supported")));
        }
        if !(self.gamma > -3.0 && self.gamma <= 0.0) {
            return Err(Error::config("gamma must lie in (-3, 0]"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::config("s must lie in (0, 1)"));
        }
        if !(self.kappa >= 0.0 && self.kappa <= 1.0) {
            return Err(Error::config("kappa must lie in (0, 1] (0 allowed for degenerate checks)"));
        }
        if !(self.eta > 0.0 && self.eta <= std::f64::consts::FRAC_PI_4) {
            return Err(Error::config(
                "eta must lie in (0, pi/4]; the non-cutoff operator exists only as the eta -> 0 limit",
            ));
        }
        if d == 3 && (self.n_azimuth < 2 || self.n_azimuth % 2 != 0) {
            return Err(Error::config("n_azimuth must be even and >= 2"));
        }
        let theta_min = 2.0 * self.eta.asin();
        let theta_max = std::f64::consts::FRAC_PI_2;
        let (ths, ws) = graded_panels(
            theta_min,
            theta_max,
            self.theta_panels,
            self.theta_per_panel,
            2.0,
        );
        let b = |theta: f64| self.kappa * theta.powf(-1.0 - 2.0 * self.s) / theta.sin();
        let theta_nodes = ths
            .iter()
            .zip(&ws)
            .map(|(&theta, &w)| {
                let sin_pow = theta.sin().powi(d as i32 - 2);
                ThetaNode {
                    cos: theta.cos(),
                    sin: theta.sin(),
                    one_minus_cos: 2.0 * (0.5 * theta).sin().powi(2),
                    weight: w * sin_pow * b(theta),
                }
            })
            .collect();
        let (azimuth, azimuth_weight) = azimuth_rule(d, self.n_azimuth);
        Ok(CollisionKernel {
            d,
            gamma: self.gamma,
            s: self.s,
            kappa: self.kappa,
            eta: self.eta,
            theta_nodes,
            azimuth,
            azimuth_weight,
        })
    }
}

fn azimuth_rule(d: usize, n: usize) -> (Vec<(f64, f64)>, f64) {
    if d == 2 {
        (vec![(1.0, 0.0), (-1.0, 0.0)], 1.0)
    } else {
        let w = std::f64::consts::TAU / n as f64;
        let dirs = (0..n)
            .map(|l| {
                let phi = std::f64::consts::TAU * l as f64 / n as f64;
                (phi.cos(), phi.sin())
            })
            .collect();
        (dirs, w)
    }
}

/// Post-collision velocities in the sigma representation.
pub fn post_collision(v: &[f64], v_star: &[f64], sigma: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = v.len();
    let mut rel2 = 0.0;
    for i in 0..d {
        let dz = v[i] - v_star[i];
        rel2 += dz * dz;
    }
    let rel = rel2.sqrt();
    let mut vp = vec![0.0; d];
    let mut vps = vec![0.0; d];
    for i in 0..d {
        let center = 0.5 * (v[i] + v_star[i]);
        vp[i] = center + 0.5 * rel * sigma[i];
        vps[i] = center - 0.5 * rel * sigma[i];
    }
    (vp, vps)
}

/// Deterministic orthonormal frame `(u1, u2)` perpendicular to the offset
/// direction `zhat`, with the sign convention that makes the sigma node set
/// of the reversed pair the exact negation of the forward set.
///
/// `zhat` points from `v` to `v_*`; the kernel axis is `khat = -zhat`.
pub fn pair_frame(d: usize, zhat: &[f64]) -> ([f64; 3], [f64; 3]) {
    // canonical representative: flip sign so the first nonzero component > 0
    let mut flip = false;
    for &c in zhat.iter().take(d) {
        if c != 0.0 {
            flip = c < 0.0;
            break;
        }
    }
    let mut chat = [0.0; 3];
    for i in 0..d {
        chat[i] = if flip { -zhat[i] } else { zhat[i] };
    }
    if d == 2 {
        // single perpendicular, shared by both orientations
        let perp = [-chat[1], chat[0], 0.0];
        (perp, [0.0; 3])
    } else {
        // axis least aligned with chat seeds the cross products
        let mut m = 0;
        for i in 1..3 {
            if chat[i].abs() < chat[m].abs() {
                m = i;
            }
        }
        let mut e_m = [0.0; 3];
        e_m[m] = 1.0;
        let mut u1 = [
            chat[1] * e_m[2] - chat[2] * e_m[1],
            chat[2] * e_m[0] - chat[0] * e_m[2],
            chat[0] * e_m[1] - chat[1] * e_m[0],
        ];
        let n = (u1[0] * u1[0] + u1[1] * u1[1] + u1[2] * u1[2]).sqrt();
        for c in &mut u1 {
            *c /= n;
        }
        let u2 = [
            chat[1] * u1[2] - chat[2] * u1[1],
            chat[2] * u1[0] - chat[0] * u1[2],
            chat[0] * u1[1] - chat[1] * u1[0],
        ];
        if flip {
            (u1, [-u2[0], -u2[1], -u2[2]])
        } else {
            (u1, u2)
        }
    }
}

impl CollisionKernel {
    pub fn n_angular(&self) -> usize {
        self.theta_nodes.len() * self.azimuth.len()
    }

    /// Total angular weight `sum w_theta * w_az`; the discrete loss-term
    /// coefficient is `|z|^gamma` times this.
    pub fn angular_total(&self) -> f64 {
        let th: f64 = self.theta_nodes.iter().map(|n| n.weight).sum();
        th * self.azimuth_weight * self.azimuth.len() as f64
    }

    /// Unit-offset displacement table: for each angular node `a`, the vector
    /// `delta_a` with `v' = v + |z| delta_a`, `v'_* = v_* - |z| delta_a`,
    /// plus the angular weight. `zhat` points from `v` to `v_*`.
    ///
    /// `delta = (1/2) [ (1 - cos theta) zhat + sin theta e(phi) ]`, where the
    /// azimuth circle `e(phi)` obeys the pair-reversal convention of
    /// [`pair_frame`].
    pub fn displacement_table(&self, zhat: &[f64], out: &mut Vec<([f64; 3], f64)>) {
        out.clear();
        let d = self.d;
        let (u1, u2) = pair_frame(d, zhat);
        for th in &self.theta_nodes {
            let radial = 0.5 * th.one_minus_cos;
            let tang = 0.5 * th.sin;
            for (ca, sa) in &self.azimuth {
                let mut delta = [0.0; 3];
                for i in 0..d {
                    delta[i] = radial * zhat[i] + tang * (ca * u1[i] + sa * u2[i]);
                }
                out.push((delta, th.weight * self.azimuth_weight));
            }
        }
    }

    /// Builds explicit sigma vectors (unit length) for the offset direction
    /// `zhat`; mainly for oracles and identity checks.
    pub fn sigma_table(&self, zhat: &[f64]) -> Vec<([f64; 3], f64)> {
        let d = self.d;
        let (u1, u2) = pair_frame(d, zhat);
        let mut out = Vec::with_capacity(self.n_angular());
        for th in &self.theta_nodes {
            for (ca, sa) in &self.azimuth {
                let mut sigma = [0.0; 3];
                for i in 0..d {
                    // khat = -zhat
                    sigma[i] = -th.cos * zhat[i] + th.sin * (ca * u1[i] + sa * u2[i]);
                }
                out.push((sigma, th.weight * self.azimuth_weight));
            }
        }
        out
    }

    /// Cancellation-lemma constant: the loss-minus-gain convolution kernel is
    /// `S(z) = C_S |z|^gamma` with
    /// `C_S = |S^(d-2)| Int sin^(d-2)(theta) b(cos theta) [cos^(-d-gamma)(theta/2) - 1] dtheta`
    /// over the retained angles, computed here by adaptive quadrature.
    pub fn cancellation_constant(&self) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        let d = self.d;
        let gamma = self.gamma;
        let s = self.s;
        let kappa = self.kappa;
        let sphere = if d == 3 { std::f64::consts::TAU } else { 2.0 };
        let theta_min = 2.0 * self.eta.asin();
        let f = move |theta: f64| {
            let b = kappa * theta.powf(-1.0 - 2.0 * s) / theta.sin();
            let jac = (0.5 * theta).cos().powf(-(d as f64) - gamma) - 1.0;
            theta.sin().powi(d as i32 - 2) * b * jac
        };
        sphere * adaptive_simpson(&f, theta_min, std::f64::consts::FRAC_PI_2, 1e-13)
    }
}

/// Residuals of the exact change-of-variable and symmetry identities,
/// evaluated by quadrature. Used as property checks on the sigma rules.
pub mod identities {
    use super::*;
    use crate::quadrature::gauss_legendre_on;

    /// Regular change of variables: for fixed `v_*` and smooth compactly
    /// supported `F(v', r, theta)`,
    /// `Int F(v', |v-v_*|, theta) dsigma dv
    ///    = Int cos^(-d)(theta/2) F(v, |v-v_*|/cos(theta/2), theta) dsigma dv`.
    /// Returns `(lhs, rhs)`.
    pub fn regular_change(
        d: usize,
        v_star: &[f64],
        f: &dyn Fn(&[f64], f64, f64) -> f64,
        box_half: f64,
        n_per_axis: usize,
        n_theta: usize,
        n_az: usize,
    ) -> (f64, f64) {
        integrate_change(d, v_star, f, box_half, n_per_axis, n_theta, n_az, false)
    }

    /// Singular change of variables: for fixed `v`,
    /// `Int F(v', |v-v_*|, theta) dsigma dv_*
    ///    = Int sin^(-d)(theta/2) F(v_*, |v-v_*|/sin(theta/2), theta) dsigma dv_*`.
    pub fn singular_change(
        d: usize,
        v_fixed: &[f64],
        f: &dyn Fn(&[f64], f64, f64) -> f64,
        box_half: f64,
        n_per_axis: usize,
        n_theta: usize,
        n_az: usize,
    ) -> (f64, f64) {
        integrate_change(d, v_fixed, f, box_half, n_per_axis, n_theta, n_az, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn integrate_change(
        d: usize,
        fixed: &[f64],
        f: &dyn Fn(&[f64], f64, f64) -> f64,
        box_half: f64,
        n_per_axis: usize,
        n_theta: usize,
        n_az: usize,
        singular: bool,
    ) -> (f64, f64) {
        let (tn, tw) = gauss_legendre_on(n_theta, 1e-3, std::f64::consts::FRAC_PI_2);
        let (az, waz) = super::azimuth_rule(d, n_az);
        let (gn, gw) = gauss_legendre_on(n_per_axis, -box_half, box_half);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        // tensor loop over the moving variable w (= v or v_*)
        let total = gn.len().pow(d as u32);
        for flat in 0..total {
            let mut rest = flat;
            let mut w = [0.0; 3];
            let mut wq = 1.0;
            for k in 0..d {
                let i = rest % gn.len();
                rest /= gn.len();
                w[k] = gn[i];
                wq *= gw[i];
            }
            // relative offset between moving point and the fixed one
            let mut z = [0.0; 3];
            let mut r2 = 0.0;
            for k in 0..d {
                z[k] = if singular { fixed[k] - w[k] } else { w[k] - fixed[k] };
                r2 += z[k] * z[k];
            }
            let r = r2.sqrt();
            if r < 1e-9 {
                continue;
            }
            // in both setups z was oriented so that zhat = (v - v_*)/r = khat
            let mut khat = [0.0; 3];
            for k in 0..d {
                khat[k] = z[k] / r;
            }
            let (u1, u2) = super::pair_frame(d, &[-khat[0], -khat[1], -khat[2]]);
            for (ti, &theta) in tn.iter().enumerate() {
                let sin_pow = theta.sin().powi(d as i32 - 2);
                let half = 0.5 * theta;
                for (ca, sa) in &az {
                    let mut sigma = [0.0; 3];
                    for k in 0..d {
                        sigma[k] = theta.cos() * khat[k] + theta.sin() * (ca * u1[k] + sa * u2[k]);
                    }
                    let wq_full = wq * tw[ti] * sin_pow * waz;
                    // v' from the pair (v, v_*)
                    let (v, v_star) = if singular {
                        (fixed, &w[..d])
                    } else {
                        (&w[..d], fixed)
                    };
                    let mut vp = [0.0; 3];
                    for k in 0..d {
                        vp[k] = 0.5 * (v[k] + v_star[k]) + 0.5 * r * sigma[k];
                    }
                    lhs += wq_full * f(&vp[..d], r, theta);
                    // the substituted side evaluates F at the moving point
                    let scale = if singular { half.sin() } else { half.cos() };
                    rhs += wq_full * scale.powi(-(d as i32)) * f(&w[..d], r / scale, theta);
                }
            }
        }
        (lhs, rhs)
    }

    /// Sigma-rule residual of
    /// `Int (v'-v) f(theta) dsigma = -(v - v_*) Int sin^2(theta/2) f(theta) dsigma`.
    pub fn sigma_symmetry_residual(
        kernel: &CollisionKernel,
        v: &[f64],
        v_star: &[f64],
        f_theta: &dyn Fn(f64) -> f64,
    ) -> f64 {
        let d = kernel.d;
        let mut z = [0.0; 3];
        let mut r2 = 0.0;
        for k in 0..d {
            z[k] = v_star[k] - v[k];
            r2 += z[k] * z[k];
        }
        let r = r2.sqrt();
        let mut zhat = [0.0; 3];
        for k in 0..d {
            zhat[k] = z[k] / r;
        }
        let mut lhs = [0.0; 3];
        let mut rhs_coeff = 0.0;
        let mut table = Vec::new();
        kernel.displacement_table(&zhat, &mut table);
        let naz = kernel.azimuth.len();
        for (a, (delta, w)) in table.iter().enumerate() {
            let theta = &kernel.theta_nodes[a / naz];
            let f = f_theta(theta.cos.acos());
            for k in 0..d {
                lhs[k] += w * f * r * delta[k];
            }
            // sin^2(theta/2) = (1 - cos theta)/2, counted once per azimuth node
            rhs_coeff += w * f * 0.5 * theta.one_minus_cos;
        }
        let mut err: f64 = 0.0;
        for k in 0..d {
            let rhs = -(v[k] - v_star[k]) * rhs_coeff;
            err = err.max((lhs[k] - rhs).abs());
        }
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn post_collision_conserves() {
        let v = [1.0, 0.0, 0.0];
        let vs = [-1.0, 0.0, 0.0];
        let sigma = [0.0, 1.0, 0.0];
        let (vp, vps) = post_collision(&v, &vs, &sigma);
        assert_eq!(vp, vec![0.0, 1.0, 0.0]);
        assert_eq!(vps, vec![0.0, -1.0, 0.0]);
        // zero relative velocity is a fixed point
        let (vp, vps) = post_collision(&v, &v, &sigma);
        assert_eq!(vp, v.to_vec());
        assert_eq!(vps, v.to_vec());
    }

    #[test]
    fn angular_bound_attained() {
        let k = KernelConfig::default().build(3).unwrap();
        // sin(theta) b(cos theta) = kappa theta^(-1-2s) by construction
        for th in [0.2f64, 0.5, 1.0] {
            let b = k.kappa * th.powf(-1.0 - 2.0 * k.s) / th.sin();
            let lower = k.kappa * th.powf(-1.0 - 2.0 * k.s);
            let upper = th.powf(-1.0 - 2.0 * k.s) / k.kappa;
            let val = th.sin() * b;
            assert!(val >= lower * (1.0 - 1e-12) && val <= upper * (1.0 + 1e-12));
        }
    }

    #[test]
    fn eta_zero_rejected() {
        let cfg = KernelConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(cfg.build(3).is_err());
    }

    #[test]
    fn reversed_pair_nodes_are_negated() {
        let k = KernelConfig::default().build(3).unwrap();
        let zhat = {
            let raw = [0.3f64, -0.8, 0.52];
            let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
            [raw[0] / n, raw[1] / n, raw[2] / n]
        };
        let fwd = k.sigma_table(&zhat);
        let rev = k.sigma_table(&[-zhat[0], -zhat[1], -zhat[2]]);
        // every forward node negated must appear in the reversed set with
        // the same weight
        for (sigma, w) in &fwd {
            let neg = [-sigma[0], -sigma[1], -sigma[2]];
            let hit = rev.iter().any(|(s2, w2)| {
                (s2[0] - neg[0]).abs() < 1e-12
                    && (s2[1] - neg[1]).abs() < 1e-12
                    && (s2[2] - neg[2]).abs() < 1e-12
                    && (w2 - w).abs() < 1e-12 * w.abs()
            });
            assert!(hit, "missing negated node for sigma = {sigma:?}");
        }
    }

    #[test]
    fn displacements_match_sigma_table() {
        let k = KernelConfig::default().build(2).unwrap();
        let zhat = [0.6, 0.8, 0.0];
        let v = [0.0, 0.5, 0.0];
        let r = 1.7;
        let v_star = [v[0] + r * zhat[0], v[1] + r * zhat[1], 0.0];
        let mut table = Vec::new();
        k.displacement_table(&zhat, &mut table);
        let sigmas = k.sigma_table(&zhat);
        for ((delta, _), (sigma, _)) in table.iter().zip(&sigmas) {
            let (vp, _) = post_collision(&v[..2], &v_star[..2], &sigma[..2]);
            for i in 0..2 {
                let via_delta = v[i] + r * delta[i];
                assert!((vp[i] - via_delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cancellation_constant_zero_density() {
        let cfg = KernelConfig {
            kappa: 0.0,
            ..Default::default()
        };
        let k = cfg.build(3).unwrap();
        assert_eq!(k.cancellation_constant(), 0.0);
    }

    #[test]
    fn sigma_symmetry_identity() {
        for d in [2usize, 3] {
            let k = KernelConfig::default().build(d).unwrap();
            let v = [0.3, -0.2, 0.1];
            let vs = [-0.5, 0.4, 0.8];
            let err = identities::sigma_symmetry_residual(&k, &v[..d], &vs[..d], &|t| (1.0 + t).recip());
            assert!(err < 1e-10, "d={d} residual {err}");
        }
    }
}
