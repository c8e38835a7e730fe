//! Discrete cutoff collision operator `Q_eta` on a uniform velocity grid.
//!
//! The operator is evaluated in weak (deposit) form: for every ordered node
//! pair `(v_i, v_j)` and angular node, the product flux
//! `C = h^d w_ang |v_i - v_j|^gamma f_i g_j` leaves node `i` and is deposited
//! at the post-collision point `v'` through the transpose of the separable
//! cubic-Lagrange interpolation stencil. Consequences, exact up to round-off
//! for pairs whose stencils stay inside the box:
//!
//! * mass, momentum and energy sums of `Q(f,f)` vanish identically (the
//!   stencil sums to one and reproduces cubics, and the angular rule pairs
//!   `(i,j,sigma)` with `(j,i,-sigma)`);
//! * the grid inner product `<Q(g,h), phi>` equals the symmetrized weak-form
//!   quadrature with interpolated test function, by construction.
//!
//! Work is organized by node-offset groups: for a fixed offset `z`, the
//! deposit stencils are shared by every pair `(i, i+z)`, so the inner loop
//! is a short fused multiply-add kernel. Pairs with negligible product mass
//! are skipped (`pair_cutoff_rel`); this perturbs the result by the cutoff
//! level but never touches the conservation identities, which hold pair by
//! pair. Chunks of offsets are processed independently and merged in fixed
//! order, so results are bit-identical for any worker count.

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;
use crate::kernel::CollisionKernel;
use crate::reduce;

/// Tuning knobs for one operator evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Skip pairs with `|f_i g_j| < (pair_cutoff_rel * scale)^2` where
    /// `scale = sqrt(max|f| max|g|)`. Zero disables skipping (oracle mode).
    pub pair_cutoff_rel: f64,
    /// Number of offset chunks processed independently; fixed so that the
    /// merge order (and hence every bit of the result) is scheduling-free.
    pub n_chunks: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            pair_cutoff_rel: 1e-7,
            n_chunks: 64,
        }
    }
}

impl EvalOptions {
    /// Exact evaluation: no pair skipping, single chunk.
    pub fn exact() -> Self {
        Self {
            pair_cutoff_rel: 0.0,
            n_chunks: 1,
        }
    }

    /// Sequential evaluation for use inside an outer parallel loop.
    pub fn sequential(self) -> Self {
        Self { n_chunks: 1, ..self }
    }
}

/// Gain and loss parts of `Q_eta`; the operator value is `gain - loss`.
#[derive(Debug, Clone)]
pub struct QEval {
    pub gain: Vec<f64>,
    pub loss: Vec<f64>,
}

impl QEval {
    pub fn q(&self) -> Vec<f64> {
        self.gain.iter().zip(&self.loss).map(|(g, l)| g - l).collect()
    }

    pub fn add_q_into(&self, out: &mut [f64], scale: f64) {
        for (o, (g, l)) in out.iter_mut().zip(self.gain.iter().zip(&self.loss)) {
            *o += scale * (g - l);
        }
    }
}

/// Cubic Lagrange weights on stencil nodes `{0,1,2,3}` at local coordinate
/// `tau` (interior interpolation uses `tau` in `[1,2)`).
#[inline]
fn lagrange4(tau: f64) -> [f64; 4] {
    let t1 = tau - 1.0;
    let t2 = tau - 2.0;
    let t3 = tau - 3.0;
    [
        -t1 * t2 * t3 / 6.0,
        tau * t2 * t3 / 2.0,
        -tau * t1 * t3 / 2.0,
        tau * t1 * t2 / 6.0,
    ]
}

/// Stencil for a fractional node index `p` on an axis with `n` nodes:
/// `(base, weights)` с base clamped to the box, or `None` when the point
/// lies outside the box (zero-fill). Clamping shifts the stencil inward and
/// re-evaluates the Lagrange weights, preserving cubic reproduction.
#[inline]
fn axis_stencil(p: f64, n: usize) -> Option<(usize, [f64; 4])> {
    if !(-0.5..=(n as f64 - 0.5)).contains(&p) {
        return None;
    }
    let base = (p.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    Some((base, lagrange4(p - base as f64)))
}

/// Cubic interpolation of grid values at physical point `point`;
/// zero outside the box.
pub fn interp_cubic(vgrid: &VelocityGrid, values: &[f64], point: &[f64]) -> f64 {
    let d = vgrid.d;
    let n = vgrid.n_per_axis;
    let h = vgrid.h();
    let mut bases = [0usize; 3];
    let mut w = [[0.0; 4]; 3];
    for k in 0..d {
        let p = (point[k] + vgrid.l_v) / h - 0.5;
        match axis_stencil(p, n) {
            Some((b, wk)) => {
                bases[k] = b;
                w[k] = wk;
            }
            None => return 0.0,
        }
    }
    let mut acc = 0.0;
    if d == 2 {
        for r1 in 0..4 {
            let row = (bases[0] + r1) * n + bases[1];
            let w1 = w[0][r1];
            for r2 in 0..4 {
                acc += w1 * w[1][r2] * values[row + r2];
            }
        }
    } else {
        for r1 in 0..4 {
            let w1 = w[0][r1];
            for r2 in 0..4 {
                let w12 = w1 * w[1][r2];
                let row = ((bases[0] + r1) * n + bases[1] + r2) * n + bases[2];
                for r3 in 0..4 {
                    acc += w12 * w[2][r3] * values[row + r3];
                }
            }
        }
    }
    acc
}

/// Per-(offset, angle, side) deposit stencil. `rel` is the integer stencil
/// base relative to the carrying node; `frac` the fractional position used
/// to rebuild weights when the precomputed fast path leaves the box.
#[derive(Clone)]
struct Stencil {
    rel: [isize; 3],
    w: [[f64; 4]; 3],
    frac: [f64; 3],
}

impl Stencil {
    /// Builds the interior stencil for a displacement of `s` grid units.
    fn from_grid_units(d: usize, s: &[f64; 3]) -> Self {
        let mut rel = [0isize; 3];
        let mut w = [[0.0; 4]; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let fl = s[k].floor();
            rel[k] = fl as isize - 1;
            w[k] = lagrange4(s[k] - fl + 1.0);
            frac[k] = s[k];
        }
        Self { rel, w, frac }
    }
}

/// Enumerates lexicographically positive offsets (each unordered node pair
/// exactly once).
fn positive_offsets(d: usize, n: usize) -> Vec<[isize; 3]> {
    let r = n as isize;
    let mut out = Vec::new();
    if d == 2 {
        for z1 in 0..r {
            let lo2 = if z1 == 0 { 1 } else { 1 - r };
            for z2 in lo2..r {
                out.push([z1, z2, 0]);
            }
        }
    } else {
        for z1 in 0..r {
            let lo2 = if z1 == 0 { 0 } else { 1 - r };
            for z2 in lo2..r {
                let lo3 = if z1 == 0 && z2 == 0 { 1 } else { 1 - r };
                for z3 in lo3..r {
                    if z1 == 0 && z2 > 0 {
                        // all z3 allowed
                    } else if z1 == 0 && z2 == 0 && z3 <= 0 {
                        continue;
                    }
                    out.push([z1, z2, z3]);
                }
            }
        }
    }
    out
}

struct OffsetGeometry {
    offset: [isize; 3],
    /// kernel factor `|z|^gamma * h^d`
    coeff: f64,
    /// total loss weight `coeff * sum_ang w`
    loss_w: f64,
    /// per angular node: (angular weight, stencil at `v_i + disp`, stencil at `v_j - disp`)
    angles: Vec<(f64, Stencil, Stencil)>,
}

fn offset_geometry(
    kernel: &CollisionKernel,
    vgrid: &VelocityGrid,
    offset: &[isize; 3],
    table: &mut Vec<([f64; 3], f64)>,
) -> OffsetGeometry {
    let d = vgrid.d;
    let h = vgrid.h();
    let mut z = [0.0; 3];
    let mut r2 = 0.0;
    for k in 0..d {
        z[k] = offset[k] as f64 * h;
        r2 += z[k] * z[k];
    }
    let r = r2.sqrt();
    let mut zhat = [0.0; 3];
    for k in 0..d {
        zhat[k] = z[k] / r;
    }
    let coeff = r.powf(kernel.gamma) * vgrid.weight();
    kernel.displacement_table(&zhat, table);
    let mut angles = Vec::with_capacity(table.len());
    let mut wsum = 0.0;
    for (delta, w) in table.iter() {
        // displacement in grid units; v' = v_i + r * delta
        let mut su = [0.0; 3];
        let mut su_neg = [0.0; 3];
        for k in 0..d {
            su[k] = r * delta[k] / h;
            su_neg[k] = -su[k];
        }
        angles.push((
            *w,
            Stencil::from_grid_units(d, &su),
            Stencil::from_grid_units(d, &su_neg),
        ));
        wsum += *w;
    }
    OffsetGeometry {
        offset: *offset,
        coeff,
        loss_w: coeff * wsum,
        angles,
    }
}

/// Deposit `c` at the stencil anchored at multi-index `idx`; fast path when
/// the whole stencil is interior, otherwise rebuilt with clamping (and
/// dropped when the target point is outside the box).
#[inline]
fn deposit(
    d: usize,
    n: usize,
    gain: &mut [f64],
    idx: &[usize; 3],
    st: &Stencil,
    c: f64,
) {
    let nn = n as isize;
    let mut interior = true;
    let mut base = [0isize; 3];
    for k in 0..d {
        base[k] = idx[k] as isize + st.rel[k];
        interior &= base[k] >= 0 && base[k] + 3 < nn;
    }
    if interior {
        if d == 2 {
            let row0 = (base[0] * nn + base[1]) as usize;
            for r1 in 0..4 {
                let c1 = c * st.w[0][r1];
                let row = row0 + r1 * n;
                gain[row] += c1 * st.w[1][0];
                gain[row + 1] += c1 * st.w[1][1];
                gain[row + 2] += c1 * st.w[1][2];
                gain[row + 3] += c1 * st.w[1][3];
            }
        } else {
            for r1 in 0..4 {
                let c1 = c * st.w[0][r1];
                for r2 in 0..4 {
                    let c12 = c1 * st.w[1][r2];
                    let row = (((base[0] + r1 as isize) * nn + base[1] + r2 as isize) * nn
                        + base[2]) as usize;
                    gain[row] += c12 * st.w[2][0];
                    gain[row + 1] += c12 * st.w[2][1];
                    gain[row + 2] += c12 * st.w[2][2];
                    gain[row + 3] += c12 * st.w[2][3];
                }
            }
        }
        return;
    }
    // boundary path: rebuild stencils with clamping
    let mut bases = [0usize; 3];
    let mut w = [[0.0; 4]; 3];
    for k in 0..d {
        let p = idx[k] as f64 + st.frac[k];
        match axis_stencil(p, n) {
            Some((b, wk)) => {
                bases[k] = b;
                w[k] = wk;
            }
            None => return,
        }
    }
    if d == 2 {
        for r1 in 0..4 {
            let c1 = c * w[0][r1];
            let row = (bases[0] + r1) * n + bases[1];
            for r2 in 0..4 {
                gain[row + r2] += c1 * w[1][r2];
            }
        }
    } else {
        for r1 in 0..4 {
            let c1 = c * w[0][r1];
            for r2 in 0..4 {
                let c12 = c1 * w[1][r2];
                let row = ((bases[0] + r1) * n + bases[1] + r2) * n + bases[2];
                for r3 in 0..4 {
                    gain[row + r3] += c12 * w[2][r3];
                }
            }
        }
    }
}

/// Iterates all base nodes `i` for which `i + offset` is in range, calling
/// `body(flat_i, flat_j, idx_i, idx_j)`.
#[inline]
fn for_each_pair(
    d: usize,
    n: usize,
    offset: &[isize; 3],
    mut body: impl FnMut(usize, usize, &[usize; 3], &[usize; 3]),
) {
    let nn = n as isize;
    let lo = |zk: isize| (-zk).max(0);
    let hi = |zk: isize| (nn - zk).min(nn);
    if d == 2 {
        for i1 in lo(offset[0])..hi(offset[0]) {
            for i2 in lo(offset[1])..hi(offset[1]) {
                let idx_i = [i1 as usize, i2 as usize, 0];
                let idx_j = [(i1 + offset[0]) as usize, (i2 + offset[1]) as usize, 0];
                let fi = idx_i[0] * n + idx_i[1];
                let fj = idx_j[0] * n + idx_j[1];
                body(fi, fj, &idx_i, &idx_j);
            }
        }
    } else {
        for i1 in lo(offset[0])..hi(offset[0]) {
            for i2 in lo(offset[1])..hi(offset[1]) {
                for i3 in lo(offset[2])..hi(offset[2]) {
                    let idx_i = [i1 as usize, i2 as usize, i3 as usize];
                    let idx_j = [
                        (i1 + offset[0]) as usize,
                        (i2 + offset[1]) as usize,
                        (i3 + offset[2]) as usize,
                    ];
                    let fi = (idx_i[0] * n + idx_i[1]) * n + idx_i[2];
                    let fj = (idx_j[0] * n + idx_j[1]) * n + idx_j[2];
                    body(fi, fj, &idx_i, &idx_j);
                }
            }
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// `Q_eta(g, h)` in deposit form; `g` enters at the starred (field) argument
/// and `h` at the unstarred one. For `Q(f, f)` pass the same slice twice
/// (the symmetric fast path is used automatically).
pub fn eval_q_eta(
    kernel: &CollisionKernel,
    vgrid: &VelocityGrid,
    g_star: &[f64],
    h_field: &[f64],
    opts: &EvalOptions,
) -> Result<QEval> {
    let d = vgrid.d;
    if d != kernel.d {
        return Err(Error::domain("kernel/grid dimension mismatch"));
    }
    let n = vgrid.n_per_axis;
    let total = vgrid.total();
    if g_star.len() != total || h_field.len() != total {
        return Err(Error::domain("field length does not match grid"));
    }
    if g_star.iter().chain(h_field.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite field values"));
    }
    let cut2 = {
        let scale2 = max_abs(g_star) * max_abs(h_field);
        (opts.pair_cutoff_rel * opts.pair_cutoff_rel) * scale2
    };
    let offsets = positive_offsets(d, n);
    let n_chunks = opts.n_chunks.clamp(1, offsets.len().max(1));
    let chunk_len = offsets.len().div_ceil(n_chunks);

    let mut acc = vec![0.0; 2 * total];
    reduce::accumulate_chunked(2 * total, n_chunks, &mut acc, |c, buf| {
        let (gain, loss) = buf.split_at_mut(total);
        let mut table = Vec::new();
        let lo = (c * chunk_len).min(offsets.len());
        let hi = ((c + 1) * chunk_len).min(offsets.len());
        for offset in &offsets[lo..hi] {
            let geom = offset_geometry(kernel, vgrid, offset, &mut table);
            for_each_pair(d, n, &geom.offset, |fi, fj, idx_i, idx_j| {
                // ordered (i,j): h_i g_j ; ordered (j,i): h_j g_i
                let p_ij = h_field[fi] * g_star[fj];
                let p_ji = h_field[fj] * g_star[fi];
                let live_ij = p_ij.abs() > cut2;
                let live_ji = p_ji.abs() > cut2;
                if !(live_ij || live_ji) {
                    return;
                }
                let c_ij = geom.coeff * p_ij;
                let c_ji = geom.coeff * p_ji;
                if live_ij {
                    loss[fi] += geom.loss_w * p_ij;
                }
                if live_ji {
                    loss[fj] += geom.loss_w * p_ji;
                }
                for (w, st_i, st_j) in &geom.angles {
                    if live_ij {
                        deposit(d, n, gain, idx_i, st_i, c_ij * w);
                    }
                    if live_ji {
                        deposit(d, n, gain, idx_j, st_j, c_ji * w);
                    }
                }
            });
        }
    });
    let loss = acc.split_off(total);
    Ok(QEval { gain: acc, loss })
}

/// Symmetrized weak form `<Q_eta(g, h), phi>` with the test function
/// interpolated at post-collision points. Equals the grid inner product of
/// [`eval_q_eta`] with `phi` by the transpose construction.
pub fn weak_form(
    kernel: &CollisionKernel,
    vgrid: &VelocityGrid,
    g_star: &[f64],
    h_field: &[f64],
    phi: &[f64],
    opts: &EvalOptions,
) -> Result<f64> {
    let d = vgrid.d;
    let n = vgrid.n_per_axis;
    let total = vgrid.total();
    if g_star.len() != total || h_field.len() != total || phi.len() != total {
        return Err(Error::domain("field length does not match grid"));
    }
    let cut2 = {
        let scale2 = max_abs(g_star) * max_abs(h_field);
        (opts.pair_cutoff_rel * opts.pair_cutoff_rel) * scale2
    };
    let offsets = positive_offsets(d, n);
    let n_chunks = opts.n_chunks.clamp(1, offsets.len().max(1));
    let chunk_len = offsets.len().div_ceil(n_chunks);
    let hd = vgrid.weight();

    let partials = reduce::map_chunks(n_chunks, |c| {
        let mut table = Vec::new();
        let mut acc = 0.0;
        let lo = (c * chunk_len).min(offsets.len());
        let hi = ((c + 1) * chunk_len).min(offsets.len());
        for offset in &offsets[lo..hi] {
            let geom = offset_geometry(kernel, vgrid, offset, &mut table);
            for_each_pair(d, n, &geom.offset, |fi, fj, idx_i, idx_j| {
                let p_ij = h_field[fi] * g_star[fj];
                let p_ji = h_field[fj] * g_star[fi];
                let live_ij = p_ij.abs() > cut2;
                let live_ji = p_ji.abs() > cut2;
                if !(live_ij || live_ji) {
                    return;
                }
                for (w, st_i, st_j) in &geom.angles {
                    let cw = geom.coeff * w;
                    if live_ij {
                        let phi_p = interp_at(d, n, phi, idx_i, st_i);
                        acc += cw * p_ij * (phi_p - phi[fi]) * hd;
                    }
                    if live_ji {
                        let phi_p = interp_at(d, n, phi, idx_j, st_j);
                        acc += cw * p_ji * (phi_p - phi[fj]) * hd;
                    }
                }
            });
        }
        acc
    });
    Ok(reduce::pairwise_sum(&partials))
}

/// Interpolates `values` at the stencil anchored at `idx`, with the
/// evaluation point clamped onto the box. Used by the dissipation and
/// entropy functionals, where clamping keeps the partition of unity exact
/// for every retained pair (a constant field then yields exactly zero),
/// while the operator itself zero-fills instead of piling flux onto the
/// boundary.
#[inline]
fn interp_at_clamped(d: usize, n: usize, values: &[f64], idx: &[usize; 3], st: &Stencil) -> f64 {
    let nn = n as isize;
    let mut interior = true;
    let mut base = [0isize; 3];
    for k in 0..d {
        base[k] = idx[k] as isize + st.rel[k];
        interior &= base[k] >= 0 && base[k] + 3 < nn;
    }
    if interior {
        return interp_tensor(
            d,
            n,
            values,
            &[base[0] as usize, base[1] as usize, base[2] as usize],
            &st.w,
        );
    }
    let mut bases = [0usize; 3];
    let mut w = [[0.0; 4]; 3];
    for k in 0..d {
        let p = (idx[k] as f64 + st.frac[k]).clamp(-0.5, n as f64 - 0.5);
        let (b, wk) = axis_stencil(p, n).expect("clamped point is inside the box");
        bases[k] = b;
        w[k] = wk;
    }
    interp_tensor(d, n, values, &bases, &w)
}

#[inline]
fn interp_tensor(d: usize, n: usize, values: &[f64], bases: &[usize; 3], w: &[[f64; 4]; 3]) -> f64 {
    let mut acc = 0.0;
    if d == 2 {
        for r1 in 0..4 {
            let row = (bases[0] + r1) * n + bases[1];
            let w1 = w[0][r1];
            for r2 in 0..4 {
                acc += w1 * w[1][r2] * values[row + r2];
            }
        }
    } else {
        for r1 in 0..4 {
            let w1 = w[0][r1];
            for r2 in 0..4 {
                let w12 = w1 * w[1][r2];
                let row = ((bases[0] + r1) * n + bases[1] + r2) * n + bases[2];
                for r3 in 0..4 {
                    acc += w12 * w[2][r3] * values[row + r3];
                }
            }
        }
    }
    acc
}

/// Interpolates `values` at the stencil anchored at `idx` (the adjoint of
/// [`deposit`]); zero outside the box.
#[inline]
fn interp_at(d: usize, n: usize, values: &[f64], idx: &[usize; 3], st: &Stencil) -> f64 {
    let nn = n as isize;
    let mut interior = true;
    let mut base = [0isize; 3];
    for k in 0..d {
        base[k] = idx[k] as isize + st.rel[k];
        interior &= base[k] >= 0 && base[k] + 3 < nn;
    }
    if interior {
        return interp_tensor(
            d,
            n,
            values,
            &[base[0] as usize, base[1] as usize, base[2] as usize],
            &st.w,
        );
    }
    let mut bases = [0usize; 3];
    let mut w = [[0.0; 4]; 3];
    for k in 0..d {
        let p = idx[k] as f64 + st.frac[k];
        match axis_stencil(p, n) {
            Some((b, wk)) => {
                bases[k] = b;
                w[k] = wk;
            }
            None => return 0.0,
        }
    }
    interp_tensor(d, n, values, &bases, &w)
}

/// Collision dissipation `D_g(f) = 1/2 Int g_* (f' - f)^2 B dsigma dv dv_*`.
///
/// Nonnegative by construction (positive quadrature weights on squares);
/// exactly zero for constant `f` away from the box boundary (partition of
/// unity of the interpolation stencil).
pub fn dissipation_dg(
    kernel: &CollisionKernel,
    vgrid: &VelocityGrid,
    g: &[f64],
    f: &[f64],
    opts: &EvalOptions,
) -> Result<f64> {
    let d = vgrid.d;
    let n = vgrid.n_per_axis;
    let total = vgrid.total();
    if g.len() != total || f.len() != total {
        return Err(Error::domain("field length does not match grid"));
    }
    if g.iter().any(|&x| x < -1e-12) {
        return Err(Error::domain("dissipation requires g >= 0 (beyond -1e-12 floor)"));
    }
    let gmax = max_abs(g);
    let cut = opts.pair_cutoff_rel * opts.pair_cutoff_rel * gmax;
    let offsets = positive_offsets(d, n);
    let n_chunks = opts.n_chunks.clamp(1, offsets.len().max(1));
    let chunk_len = offsets.len().div_ceil(n_chunks);
    let hd = vgrid.weight();

    let partials = reduce::map_chunks(n_chunks, |c| {
        let mut table = Vec::new();
        let mut acc = 0.0;
        let lo = (c * chunk_len).min(offsets.len());
        let hi = ((c + 1) * chunk_len).min(offsets.len());
        for offset in &offsets[lo..hi] {
            let geom = offset_geometry(kernel, vgrid, offset, &mut table);
            for_each_pair(d, n, &geom.offset, |fi, fj, idx_i, idx_j| {
                // (i,j,sigma): g at v_j ; (j,i,-sigma): g at v_i
                let g_j = g[fj].max(0.0);
                let g_i = g[fi].max(0.0);
                if g_j <= cut && g_i <= cut {
                    return;
                }
                for (w, st_i, st_j) in &geom.angles {
                    let cw = 0.5 * geom.coeff * w * hd;
                    if g_j > cut {
                        let fp = interp_at_clamped(d, n, f, idx_i, st_i);
                        let df = fp - f[fi];
                        acc += cw * g_j * df * df;
                    }
                    if g_i > cut {
                        let fp = interp_at_clamped(d, n, f, idx_j, st_j);
                        let df = fp - f[fj];
                        acc += cw * g_i * df * df;
                    }
                }
            });
        }
        acc
    });
    Ok(reduce::pairwise_sum(&partials))
}

/// Entropy floor below which field values are clamped before logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Four-point entropy production
/// `D[G] = 1/4 Int [G'_* G' - G_* G] ln(G'_* G' / (G_* G)) B dsigma dv dv_*`,
/// plus the count of grid nodes that sat below the entropy floor.
///
/// Every quadrature term has the form `(p - q) ln(p/q) >= 0`, so the value
/// is nonnegative up to round-off regardless of resolution. The quarter
/// prefactor makes `dH/dt = -prefactor * D[G]` the semi-discrete relative
/// entropy identity.
pub fn entropy_dissipation(
    kernel: &CollisionKernel,
    vgrid: &VelocityGrid,
    big_g: &[f64],
    opts: &EvalOptions,
) -> Result<(f64, usize)> {
    let d = vgrid.d;
    let n = vgrid.n_per_axis;
    let total = vgrid.total();
    if big_g.len() != total {
        return Err(Error::domain("field length does not match grid"));
    }
    let gmax = max_abs(big_g);
    if gmax == 0.0 {
        return Err(Error::domain("entropy dissipation of an all-zero field"));
    }
    let clamped = big_g.iter().filter(|&&x| x < ENTROPY_FLOOR).count();
    let cut2 = opts.pair_cutoff_rel * opts.pair_cutoff_rel * gmax * gmax;
    let offsets = positive_offsets(d, n);
    let n_chunks = opts.n_chunks.clamp(1, offsets.len().max(1));
    let chunk_len = offsets.len().div_ceil(n_chunks);
    let hd = vgrid.weight();

    let partials = reduce::map_chunks(n_chunks, |c| {
        let mut table = Vec::new();
        let mut acc = 0.0;
        let lo = (c * chunk_len).min(offsets.len());
        let hi = ((c + 1) * chunk_len).min(offsets.len());
        for offset in &offsets[lo..hi] {
            let geom = offset_geometry(kernel, vgrid, offset, &mut table);
            for_each_pair(d, n, &geom.offset, |fi, fj, idx_i, idx_j| {
                let q = (big_g[fi] * big_g[fj]).max(ENTROPY_FLOOR);
                if q <= cut2 {
                    return;
                }
                // the four-point term is invariant under pair reversal, so
                // each unordered pair carries 2 * (1/4) = 1/2 of the weight
                for (w, st_i, st_j) in &geom.angles {
                    let gp = interp_at_clamped(d, n, big_g, idx_i, st_i).max(0.0);
                    let gps = interp_at_clamped(d, n, big_g, idx_j, st_j).max(0.0);
                    let p = (gp * gps).max(ENTROPY_FLOOR);
                    let term = (p - q) * (p / q).ln();
                    acc += 0.5 * geom.coeff * w * hd * term;
                }
            });
        }
        acc
    });
    Ok((reduce::pairwise_sum(&partials), clamped))
}

/// Max over nodes of the discrete loss rate
/// `L_i = sum_j h^d w_tot |v_i - v_j|^gamma |f_j|`; the explicit collision
/// substep is stable for `dt * prefactor * L_max <~ 1`.
pub fn loss_rate_max(kernel: &CollisionKernel, vgrid: &VelocityGrid, f: &[f64]) -> f64 {
    let d = vgrid.d;
    let n = vgrid.n_per_axis;
    let total = vgrid.total();
    let wtot = kernel.angular_total();
    let hd = vgrid.weight();
    let offsets = positive_offsets(d, n);
    let mut rate = vec![0.0; total];
    for offset in &offsets {
        let mut r2 = 0.0;
        let h = vgrid.h();
        for k in 0..d {
            let z = offset[k] as f64 * h;
            r2 += z * z;
        }
        let coeff = r2.sqrt().powf(kernel.gamma) * hd * wtot;
        for_each_pair(d, n, offset, |fi, fj, _, _| {
            rate[fi] += coeff * f[fj].abs();
            rate[fj] += coeff * f[fi].abs();
        });
    }
    max_abs(&rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelConfig;

    fn gaussian_field(vgrid: &VelocityGrid, center: &[f64], width: f64) -> Vec<f64> {
        (0..vgrid.total())
            .map(|fl| {
                let v = vgrid.node(fl);
                let mut q = 0.0;
                for k in 0..vgrid.d {
                    let dvk = v[k] - center[k];
                    q += dvk * dvk;
                }
                (-0.5 * q / (width * width)).exp()
            })
            .collect()
    }

    #[test]
    fn stencil_weights_sum_to_one() {
        for tau in [0.2, 1.0, 1.49, 2.9] {
            let w = lagrange4(tau);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn interp_reproduces_cubics() {
        let g = VelocityGrid::new(2, 12, 3.0);
        let vals: Vec<f64> = (0..g.total())
            .map(|fl| {
                let v = g.node(fl);
                1.0 + v[0] + v[1] * v[1] - 0.3 * v[0] * v[0] * v[0]
            })
            .collect();
        for p in [[0.37, -1.2], [2.2, 2.6], [-2.9, 0.01]] {
            let want = 1.0 + p[0] + p[1] * p[1] - 0.3 * p[0] * p[0] * p[0];
            let got = interp_cubic(&g, &vals, &p);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn conservation_is_exact_for_interior_fields() {
        for d in [2usize, 3] {
            let n = if d == 2 { 14 } else { 10 };
            let g = VelocityGrid::new(d, n, 6.0);
            let kernel = KernelConfig {
                theta_panels: 2,
                theta_per_panel: 2,
                n_azimuth: 4,
                ..Default::default()
            }
            .build(d)
            .unwrap();
            // narrow bump: post-collision points stay inside the box at
            // any product level above round-off
            let center = [0.3, -0.2, 0.1];
            let f = gaussian_field(&g, &center[..d], 0.45);
            let q = eval_q_eta(&kernel, &g, &f, &f, &EvalOptions::exact()).unwrap();
            let qv = q.q();
            let w = g.weight();
            let mass: f64 = qv.iter().sum::<f64>() * w;
            let mut mom = [0.0; 3];
            let mut energy = 0.0;
            for (fl, qk) in qv.iter().enumerate() {
                let v = g.node(fl);
                for k in 0..d {
                    mom[k] += qk * v[k] * w;
                }
                energy += qk * v.iter().map(|a| a * a).sum::<f64>() * w;
            }
            let scale = qv.iter().map(|x| x.abs()).sum::<f64>() * w;
            assert!(mass.abs() < 1e-13 * scale.max(1e-30), "d={d} mass {mass:e}");
            for k in 0..d {
                assert!(mom[k].abs() < 1e-13 * scale.max(1e-30), "d={d} mom {k} {:e}", mom[k]);
            }
            assert!(energy.abs() < 5e-13 * scale.max(1e-30), "d={d} energy {energy:e}");
        }
    }

    #[test]
    fn weak_form_matches_deposit_inner_product() {
        let d = 2;
        let g = VelocityGrid::new(d, 12, 5.0);
        let kernel = KernelConfig::default().build(d).unwrap();
        let f1 = gaussian_field(&g, &[0.5, 0.0], 1.0);
        let f2 = gaussian_field(&g, &[-0.5, 0.3], 1.2);
        let phi: Vec<f64> = (0..g.total())
            .map(|fl| {
                let v = g.node(fl);
                (0.3 * v[0] - 0.1 * v[1]).sin()
            })
            .collect();
        let q = eval_q_eta(&kernel, &g, &f1, &f2, &EvalOptions::exact()).unwrap();
        let qv = q.q();
        let ip: f64 = qv
            .iter()
            .zip(&phi)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * g.weight();
        let wf = weak_form(&kernel, &g, &f1, &f2, &phi, &EvalOptions::exact()).unwrap();
        let scale = qv.iter().map(|x| x.abs()).sum::<f64>() * g.weight();
        assert!(
            (ip - wf).abs() <= 1e-10 * scale.max(1e-30),
            "inner product {ip:e} vs weak form {wf:e}"
        );
    }

    #[test]
    fn dissipation_zero_for_constant_and_quadratic_scaling() {
        let d = 2;
        let g = VelocityGrid::new(d, 12, 6.0);
        let kernel = KernelConfig::default().build(d).unwrap();
        let mu = gaussian_field(&g, &[0.0, 0.0], 1.0);
        let ones = vec![1.0; g.total()];
        let d0 = dissipation_dg(&kernel, &g, &mu, &ones, &EvalOptions::exact()).unwrap();
        assert!(d0.abs() < 1e-12, "constant f gives {d0:e}");
        let f: Vec<f64> = (0..g.total()).map(|fl| g.node(fl)[0]).collect();
        let d1 = dissipation_dg(&kernel, &g, &mu, &f, &EvalOptions::exact()).unwrap();
        assert!(d1 > 0.0);
        let f2: Vec<f64> = f.iter().map(|x| 3.0 * x).collect();
        let d2 = dissipation_dg(&kernel, &g, &mu, &f2, &EvalOptions::exact()).unwrap();
        assert!((d2 - 9.0 * d1).abs() < 1e-12 * d2.abs());
        let neg = vec![-1.0; g.total()];
        assert!(dissipation_dg(&kernel, &g, &neg, &f, &EvalOptions::exact()).is_err());
    }

    #[test]
    fn entropy_dissipation_sign_and_equilibrium() {
        let d = 2;
        let g = VelocityGrid::new(d, 16, 6.0);
        let kernel = KernelConfig::default().build(d).unwrap();
        let mu = gaussian_field(&g, &[0.0, 0.0], 1.0);
        let (de, clamped) = entropy_dissipation(&kernel, &g, &mu, &EvalOptions::exact()).unwrap();
        assert_eq!(clamped, 0);
        assert!(de >= -1e-12);
        // bimodal field produces strictly positive entropy production
        let bi: Vec<f64> = gaussian_field(&g, &[1.5, 0.0], 0.8)
            .iter()
            .zip(gaussian_field(&g, &[-1.5, 0.0], 0.8))
            .map(|(a, b)| a + b)
            .collect();
        let (db, _) = entropy_dissipation(&kernel, &g, &bi, &EvalOptions::exact()).unwrap();
        assert!(db > 10.0 * de.max(0.0), "bimodal {db:e} vs equilibrium {de:e}");
        assert!(entropy_dissipation(&kernel, &g, &vec![0.0; g.total()], &EvalOptions::exact()).is_err());
    }

    #[test]
    fn pair_cutoff_perturbs_mildly_and_deterministically() {
        let d = 2;
        let g = VelocityGrid::new(d, 16, 6.0);
        let kernel = KernelConfig::default().build(d).unwrap();
        let f = gaussian_field(&g, &[0.3, -0.2], 0.55);
        let exact = eval_q_eta(&kernel, &g, &f, &f, &EvalOptions::exact()).unwrap().q();
        let opts = EvalOptions {
            pair_cutoff_rel: 1e-7,
            n_chunks: 64,
        };
        let cut = eval_q_eta(&kernel, &g, &f, &f, &opts).unwrap().q();
        let scale = exact.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        let err = exact
            .iter()
            .zip(&cut)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10 * scale, "cutoff error {err:e} scale {scale:e}");
        // conservation survives the cutoff exactly
        let mass: f64 = cut.iter().sum::<f64>() * g.weight();
        assert!(mass.abs() < 1e-13 * scale);
    }
}
