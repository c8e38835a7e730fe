//! One-dimensional quadrature building blocks: Gauss-Legendre rules,
//! composite geometric panels and an adaptive Simpson integrator.

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are roots of the Legendre polynomial, found by Newton iteration
/// from the Chebyshev initial guess; accurate to machine precision for the
/// orders used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Composite rule on `[a, b]` with `panels` subintervals graded
/// geometrically toward `a` (ratio `ratio > 1`), `per_panel` GL nodes each.
///
/// Suited to integrands concentrating at the left endpoint, like the
/// grazing-collision angular density near its cutoff.
pub fn graded_panels(a: f64, b: f64, panels: usize, per_panel: usize, ratio: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(b > a && panels >= 1 && ratio >= 1.0);
    // Panel widths w, w*r, w*r^2, ... summing to b-a.
    let mut widths = Vec::with_capacity(panels);
    let mut total = 0.0;
    let mut w = 1.0;
    for _ in 0..panels {
        widths.push(w);
        total += w;
        w *= ratio;
    }
    let scale = (b - a) / total;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    let mut left = a;
    for w in widths {
        let right = left + w * scale;
        let (xs, ws) = gauss_legendre_on(per_panel, left, right);
        nodes.extend(xs);
        weights.extend(ws);
        left = right;
    }
    (nodes, weights)
}

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `integral of <t>^(-e) dt` over `[0, upper]`; `upper = inf` allowed when
/// `e > 1`. Computed adaptively (substituting `t = tan(u)` for the tail).
pub fn bracket_power_integral(e: f64, upper: f64) -> f64 {
    assert!(e > 0.0);
    let f = move |t: f64| (1.0 + t * t).powf(-0.5 * e);
    if upper.is_finite() {
        adaptive_simpson(&f, 0.0, upper, 1e-14)
    } else {
        assert!(e > 1.0, "tail integral diverges for e <= 1");
        // t = tan(u): dt = sec^2 u du, <t> = sec u.
        let g = move |u: f64| (u.cos()).powf(e - 2.0);
        adaptive_simpson(&g, 0.0, std::f64::consts::FRAC_PI_2, 1e-14)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (xs, ws) = gauss_legendre(8);
        // degree 15 is exact for n = 8
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(14)).sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = ws.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_panels_cover_interval() {
        let (xs, ws) = graded_panels(0.1, 1.5, 4, 6, 2.0);
        let total: f64 = ws.iter().sum();
        assert!((total - 1.4).abs() < 1e-13);
        assert!(xs.iter().all(|&x| (0.1..=1.5).contains(&x)));
        // singular-ish integrand resolved well
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powf(-1.5)).sum();
        let exact = 2.0 * (0.1f64.powf(-0.5) - 1.5f64.powf(-0.5));
        assert!((val - exact).abs() < 1e-7, "{val} vs {exact}");
    }

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
        // <t>^-2 integrates to atan
        let v = bracket_power_integral(2.0, 3.0);
        assert!((v - 3f64.atan()).abs() < 1e-12);
        let v = bracket_power_integral(2.0, f64::INFINITY);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
