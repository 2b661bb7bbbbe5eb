//! Reference implementations used as test oracles. Written from the closed
//! forms, without calling into the library's numerics.

#![allow(dead_code)]

/// Penalty value from the defining formula.
pub fn phi(rho: f64, s: f64) -> f64 {
    if rho == 0.0 {
        (1.0 + s).ln()
    } else if rho == 1.0 {
        1.0 - (-s).exp()
    } else {
        let c = 1.0 - rho;
        (1.0 - (1.0 + c * s).powf(-rho / c)) / rho
    }
}

/// First derivative `(1 + (1 - rho) s)^(-1/(1 - rho))`.
pub fn phi_d1(rho: f64, s: f64) -> f64 {
    if rho == 1.0 {
        (-s).exp()
    } else {
        let c = 1.0 - rho;
        (1.0 + c * s).powf(-1.0 / c)
    }
}

pub fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Argmin of `(z - b)^2 / 2 + lambda Phi(alpha |b|)` for a convex objective:
/// 4001-point grid on `[0, |z|]`, then bisection on the derivative sign in
/// the neighbouring grid interval.
pub fn argmin_j1(rho: f64, alpha: f64, eta: f64, z: f64) -> f64 {
    let lambda = eta / phi(rho, alpha);
    let az = z.abs();
    if az == 0.0 {
        return 0.0;
    }
    let j = |b: f64| 0.5 * (az - b) * (az - b) + lambda * phi(rho, alpha * b);
    let dj = |b: f64| b - az + lambda * alpha * phi_d1(rho, alpha * b);
    let n: usize = 4000;
    let mut best: usize = 0;
    let mut best_val = j(0.0);
    for i in 1..=n {
        let v = j(az * i as f64 / n as f64);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut lo = az * best.saturating_sub(1) as f64 / n as f64;
    let mut hi = az * (best + 1).min(n) as f64 / n as f64;
    if dj(lo) >= 0.0 {
        return z.signum() * lo;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if dj(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    z.signum() * 0.5 * (lo + hi)
}

/// Root of `b + lambda alpha Phi'(alpha b) = |z|` on `[lo, |z|]` by plain
/// bisection.
pub fn kappa_bisect(rho: f64, alpha: f64, lambda: f64, az: f64, mut lo: f64) -> f64 {
    let h = |b: f64| b + lambda * alpha * phi_d1(rho, alpha * b) - az;
    let mut hi = az;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimizer on `[lo, hi]`.
pub fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..iters {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Plain lasso coordinate descent on a design with unit-length columns,
/// residual-updating form.
pub fn lasso_cd(x: &[Vec<f64>], y: &[f64], eta: f64) -> Vec<f64> {
    let p = x.len();
    let mut b = vec![0.0; p];
    let mut r = y.to_vec();
    for _ in 0..200_000 {
        let mut delta_max: f64 = 0.0;
        for j in 0..p {
            let zj: f64 = x[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() + b[j];
            let new = soft(zj, eta);
            let d = new - b[j];
            if d != 0.0 {
                for (ri, xi) in r.iter_mut().zip(&x[j]) {
                    *ri -= d * xi;
                }
                b[j] = new;
                delta_max = delta_max.max(d.abs());
            }
        }
        if delta_max < 1e-13 {
            break;
        }
    }
    b
}
