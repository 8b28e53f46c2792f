//! One-dimensional numerical kernels: quadrature, bracketed root finding,
//! maximization and cubic Hermite tables on a uniform grid.

use crate::error::{Error, Result};

const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..5 {
        let dx = h * GL_X[i];
        s += GL_W[i] * (f(c - dx) + f(c + dx));
    }
    s * h
}

/// Adaptive Gauss–Legendre quadrature with absolute tolerance `tol`.
///
/// Each interval is compared against the sum over its two halves and split
/// until the two estimates agree.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    let whole = gauss_legendre(&f, a, b);
    adapt(&f, a, b, whole, tol.max(1e-16), 0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    let sum = left + right;
    let floor = 64.0 * f64::EPSILON * sum.abs();
    let diff = (sum - whole).abs();
    if !diff.is_finite() || diff <= tol.max(floor) || depth >= 40 {
        return sum;
    }
    adapt(f, a, m, left, 0.5 * tol, depth + 1) + adapt(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Brent's method for a root of `f` in `[a, b]`, which must bracket a sign change
/// (a zero at either end is accepted). `xtol` is the tolerance on the argument.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}

/// Bisection for the boundary of a monotone predicate: returns the point where
/// `pred` switches from true (at `lo`) to false (at `hi`), to within `xtol`.
pub fn bisect_predicate<F: FnMut(f64) -> bool>(mut pred: F, lo: f64, hi: f64, xtol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while b - a > xtol && iters < 200 {
        iters += 1;
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Global maximization on `[a, b]`: scan `n + 1` equally spaced points, then
/// refine with golden section around the best one. Endpoints and grid values are
/// kept as candidates, and ties go to the smaller argument.
pub fn maximize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize, xtol: f64) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let mut best = (a, f(a));
    let mut best_i = 0;
    for i in 1..=n {
        let x = if i == n { b } else { a + h * i as f64 };
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + h * (best_i - 1) as f64 };
    let hi = if best_i == n { b } else { a + h * (best_i + 1) as f64 };
    let refined = golden_max(&mut f, lo, hi.min(b), xtol);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// `n + 1` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n).map(|i| if i == n { b } else { a + h * i as f64 }).collect()
}
