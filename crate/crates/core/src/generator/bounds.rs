//! Extremes of a rational function over a box: dense tensor grid, then
//! golden-section polishing along each coordinate.

use super::diffusion::StateBox;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Default grid resolution per active coordinate when at most two are active.
pub const DEFAULT_REFINE: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalBounds {
    pub lower: f64,
    pub upper: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    /// Grid points per active coordinate actually used.
    pub grid_per_dim: usize,
}

/// Minimum and maximum of `num / den` over `bx`.
///
/// Only coordinates on which `num` or `den` depend are gridded. Fails if the
/// denominator is non-positive at any grid point.
pub fn rational_bounds(num: &Polynomial, den: &Polynomial, bx: &StateBox, refine: usize) -> Result<RationalBounds> {
    let d = bx.dim();
    for p in [num, den] {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
    }
    let active: Vec<usize> = (0..d)
        .filter(|&v| (num.depends_on(v) || den.depends_on(v)) && bx.width(v) > 0.0)
        .collect();
    let k = active.len();
    let refine = refine.max(2);
    let per_dim = match k {
        0 => 1,
        1 | 2 => refine,
        _ => refine.min((2.0e6f64).powf(1.0 / k as f64) as usize).max(3),
    };
    let mut base: Vec<f64> = bx.lo.clone();
    for v in 0..d {
        if !active.contains(&v) {
            base[v] = 0.5 * (bx.lo[v] + bx.hi[v]);
        }
    }
    let ratio = |z: &[f64]| -> Result<f64> {
        let q = den.value_at(z);
        if !(q > 0.0) {
            return Err(Error::NonPositiveDenominator { value: q, point: z.to_vec() });
        }
        Ok(num.value_at(z) / q)
    };
    if k == 0 {
        let v = ratio(&base)?;
        return Ok(RationalBounds { lower: v, upper: v, argmin: base.clone(), argmax: base, grid_per_dim: 1 });
    }

    let grid = |v: usize, i: usize| bx.lo[v] + bx.width(v) * i as f64 / (per_dim - 1) as f64;
    let last = active[k - 1];
    let outer = &active[..k - 1];
    let mut best_lo = (f64::INFINITY, base.clone());
    let mut best_hi = (f64::NEG_INFINITY, base.clone());
    let mut idx = vec![0usize; outer.len()];
    let mut z = base.clone();
    loop {
        for (j, &v) in outer.iter().enumerate() {
            z[v] = grid(v, idx[j]);
        }
        // reduce to univariate polynomials in the last active coordinate
        let mut n1 = num.clone();
        let mut d1 = den.clone();
        for v in 0..d {
            if v != last {
                n1 = n1.partial_eval(v, z[v]);
                d1 = d1.partial_eval(v, z[v]);
            }
        }
        let nc = n1.univariate_coeffs(last);
        let dc = d1.univariate_coeffs(last);
        for i in 0..per_dim {
            let t = grid(last, i);
            let q = horner(&dc, t);
            if !(q > 0.0) {
                z[last] = t;
                return Err(Error::NonPositiveDenominator { value: q, point: z });
            }
            let r = horner(&nc, t) / q;
            if r < best_lo.0 {
                z[last] = t;
                best_lo = (r, z.clone());
            }
            if r > best_hi.0 {
                z[last] = t;
                best_hi = (r, z.clone());
            }
        }
        let mut j = 0;
        loop {
            if j == outer.len() {
                break;
            }
            idx[j] += 1;
            if idx[j] < per_dim {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == outer.len() {
            break;
        }
    }

    let spacing: Vec<f64> = (0..d).map(|v| bx.width(v) / (per_dim - 1) as f64).collect();
    let (lower, argmin) = polish(&ratio, best_lo, &active, &spacing, bx, -1.0)?;
    let (upper, argmax) = polish(&ratio, best_hi, &active, &spacing, bx, 1.0)?;
    Ok(RationalBounds { lower, upper, argmin, argmax, grid_per_dim: per_dim })
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

// Coordinate-wise golden-section search within one grid cell of the start.
// `dir` = 1 maximizes, -1 minimizes.
fn polish(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    start: (f64, Vec<f64>),
    active: &[usize],
    spacing: &[f64],
    bx: &StateBox,
    dir: f64,
) -> Result<(f64, Vec<f64>)> {
    let (mut best, mut z) = start;
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    for _sweep in 0..3 {
        for &v in active {
            let mut a = (z[v] - spacing[v]).max(bx.lo[v]);
            let mut b = (z[v] + spacing[v]).min(bx.hi[v]);
            let mut w = z.clone();
            let eval = |t: f64, w: &mut Vec<f64>| -> Result<f64> {
                w[v] = t;
                Ok(dir * f(w)?)
            };
            let mut c = b - INV_PHI * (b - a);
            let mut e = a + INV_PHI * (b - a);
            let mut fc = eval(c, &mut w)?;
            let mut fe = eval(e, &mut w)?;
            for _ in 0..60 {
                if fc > fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - INV_PHI * (b - a);
                    fc = eval(c, &mut w)?;
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + INV_PHI * (b - a);
                    fe = eval(e, &mut w)?;
                }
                if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
                    break;
                }
            }
            let (t, ft) = if fc > fe { (c, fc) } else { (e, fe) };
            if ft * dir > best * dir {
                best = ft * dir;
                z[v] = t;
            }
        }
    }
    Ok((best, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(d: usize) -> StateBox {
        StateBox::new(vec![-1.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn identical_num_den() {
        let p = Polynomial::parse("2 + x1 * x2", 2).unwrap();
        let b = rational_bounds(&p, &p, &unit_box(2), 200).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-15 && (b.upper - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_over_interval() {
        let b = rational_bounds(&Polynomial::var(1, 0), &Polynomial::constant(1, 1.0), &unit_box(1), 1000).unwrap();
        assert_eq!((b.lower, b.upper), (-1.0, 1.0));
    }

    #[test]
    fn interior_maximum_is_polished() {
        // 1 - (x - 0.123456789)^2 peaks between grid points
        let num = Polynomial::parse("0.984758573 + 0.246913578 * x1 - x1^2", 1).unwrap();
        let b = rational_bounds(&num, &Polynomial::constant(1, 1.0), &unit_box(1), 50).unwrap();
        let peak = 0.984758573 + 0.123456789f64.powi(2);
        assert!((b.upper - peak).abs() < 1e-12);
        assert!((b.argmax[0] - 0.123456789).abs() < 1e-6);
    }

    #[test]
    fn rejects_vanishing_denominator() {
        let r = rational_bounds(&Polynomial::constant(1, 1.0), &Polynomial::var(1, 0), &unit_box(1), 100);
        assert!(matches!(r, Err(Error::NonPositiveDenominator { .. })));
    }

    #[test]
    fn inactive_coordinates_are_ignored() {
        let num = Polynomial::parse("x2", 3).unwrap();
        let den = Polynomial::parse("2 + x2", 3).unwrap();
        let b = rational_bounds(&num, &den, &unit_box(3), 100).unwrap();
        assert!((b.lower + 1.0).abs() < 1e-15);
        assert!((b.upper - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_active_coordinates() {
        let num = Polynomial::parse("x1 * x2", 2).unwrap();
        let den = Polynomial::parse("3 + x1", 2).unwrap();
        let b = rational_bounds(&num, &den, &unit_box(2), 101).unwrap();
        assert!((b.upper - 0.5).abs() < 1e-12);
        assert!((b.lower + 0.5).abs() < 1e-12);
    }
}
