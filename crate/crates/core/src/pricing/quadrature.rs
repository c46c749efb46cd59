//! Gauss–Legendre nodes and weights.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[a, b]`.
///
/// Roots of `P_n` by Newton iteration from the Tricomi initial guesses.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = mid - half * t;
        x[n - 1 - i] = mid + half * t;
        w[i] = half * weight;
        w[n - 1 - i] = half * weight;
    }
    (x, w)
}

// P_n(t) and P_n'(t) by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}
