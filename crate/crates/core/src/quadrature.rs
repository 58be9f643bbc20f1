//! Gauss-Legendre rules and integration of absolute values of multilinear functions.

use std::cell::Cell;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Cached order-8 rule mapped to `[0, 1]`.
pub fn gl8_unit() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(8);
        (
            x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            w.iter().map(|t| 0.5 * t).collect(),
        )
    })
}

/// Tensor Gauss-Legendre integral of `f` over the box `[lo, hi]` using the `[0,1]` rule.
pub fn tensor_integrate(
    lo: &[f64],
    hi: &[f64],
    rule: &(Vec<f64>, Vec<f64>),
    f: &mut dyn FnMut(&[f64]) -> f64,
) -> f64 {
    let k = lo.len();
    let n = rule.0.len();
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut p = vec![0.0; k];
    let mut counter = vec![0usize; k];
    let mut acc = 0.0;
    let total = n.pow(k as u32);
    for _ in 0..total {
        let mut w = 1.0;
        for j in 0..k {
            p[j] = lo[j] + rule.0[counter[j]] * (hi[j] - lo[j]);
            w *= rule.1[counter[j]];
        }
        acc += w * f(&p);
        for j in (0..k).rev() {
            counter[j] += 1;
            if counter[j] < n {
                break;
            }
            counter[j] = 0;
        }
    }
    acc * vol
}

/// Multilinear interpolation of corner values at relative position `x` in the unit box.
///
/// Corner `c` has coordinate `j` equal to bit `k-1-j` of `c` (first axis slowest).
pub fn multilinear(corners: &[f64], x: &[f64]) -> f64 {
    let k = x.len();
    let mut acc = 0.0;
    for (c, &v) in corners.iter().enumerate() {
        let mut w = 1.0;
        for j in 0..k {
            let bit = (c >> (k - 1 - j)) & 1;
            w *= if bit == 1 { x[j] } else { 1.0 - x[j] };
        }
        acc += w * v;
    }
    acc
}

/// Integral of `|g|` over a box of volume `vol`, `g` multilinear with the given corner values.
///
/// The last axis is integrated in closed form. In two dimensions the first
/// axis is split where the inner integrand has kinks (roots of the edge
/// values, which are linear) and each piece is integrated by adaptive
/// Gauss-Legendre. Higher dimensions nest adaptive one-dimensional rules.
/// Returns `(value, error estimate)`.
pub fn integrate_abs_multilinear(corners: &[f64], vol: f64, tol: f64) -> (f64, f64) {
    let mut err = 0.0;
    let v = abs_unit(corners, tol.max(1e-300), &mut err);
    (v * vol, err * vol)
}

fn sign_constant(c: &[f64]) -> bool {
    c.iter().all(|&x| x >= 0.0) || c.iter().all(|&x| x <= 0.0)
}

/// `int_0^1 |a + (e - a) x| dx` for edge values `a` and `e`.
fn abs_linear(a: f64, e: f64) -> f64 {
    if (a >= 0.0 && e >= 0.0) || (a <= 0.0 && e <= 0.0) {
        return 0.5 * (a + e).abs();
    }
    0.5 * (a * a + e * e) / (a - e).abs()
}

/// Corners of the slice at relative position `x` of the first axis.
fn slice(corners: &[f64], x: f64) -> Vec<f64> {
    let h = corners.len() / 2;
    (0..h)
        .map(|i| (1.0 - x) * corners[i] + x * corners[h + i])
        .collect()
}

fn abs_unit(corners: &[f64], tol: f64, err: &mut f64) -> f64 {
    if sign_constant(corners) {
        return (corners.iter().sum::<f64>() / corners.len() as f64).abs();
    }
    match corners.len() {
        1 => corners[0].abs(),
        2 => abs_linear(corners[0], corners[1]),
        4 => {
            let (c0, c1, c2, c3) = (corners[0], corners[1], corners[2], corners[3]);
            let f = |x: f64| abs_linear((1.0 - x) * c0 + x * c2, (1.0 - x) * c1 + x * c3);
            let mut cuts = vec![0.0, 1.0];
            for (p, q) in [(c0, c2), (c1, c3)] {
                if p != q {
                    let r = p / (p - q);
                    if r > 0.0 && r < 1.0 {
                        cuts.push(r);
                    }
                }
            }
            cuts.sort_by(|a, b| a.total_cmp(b));
            cuts.windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| adaptive_1d(&f, w[0], w[1], tol, 0, err))
                .sum()
        }
        _ => {
            // Nested integrals of kinked integrands are continuous, so plain
            // adaptive bisection converges quickly.
            let worst_inner = Cell::new(0.0f64);
            let f = |x: f64| {
                let mut e = 0.0;
                let v = abs_unit(&slice(corners, x), tol, &mut e);
                worst_inner.set(worst_inner.get().max(e));
                v
            };
            let v = adaptive_1d(&f, 0.0, 1.0, tol, 0, err);
            *err += worst_inner.get();
            v
        }
    }
}

fn gl8(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gl8_unit();
    let h = b - a;
    x.iter()
        .zip(w)
        .map(|(t, wt)| wt * f(a + h * t))
        .sum::<f64>()
        * h
}

fn adaptive_1d(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let coarse = gl8(f, a, b);
    let fine = gl8(f, a, m) + gl8(f, m, b);
    let diff = (coarse - fine).abs();
    if diff <= tol * (b - a) || depth >= 40 {
        *err += diff;
        return fine;
    }
    adaptive_1d(f, a, m, tol, depth + 1, err) + adaptive_1d(f, m, b, tol, depth + 1, err)
}

/// Integral of `g^2` for multilinear `g` on a box (the 2-point rule is exact).
pub fn integrate_sq_multilinear(corners: &[f64], vol: f64) -> f64 {
    let k = corners.len().trailing_zeros() as usize;
    let (x, w) = gauss_legendre(2);
    let rule = (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect::<Vec<_>>(),
        w.iter().map(|t| 0.5 * t).collect::<Vec<_>>(),
    );
    let lo = vec![0.0; k];
    let hi = vec![1.0; k];
    tensor_integrate(&lo, &hi, &rule, &mut |p| multilinear(corners, p).powi(2)) * vol
}
