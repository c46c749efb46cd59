//! Tensor Chebyshev interpolation of continuous payoffs, returned in the
//! monomial basis so that it can be priced with the moment formula.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::generator::StateBox;
use crate::poly::{MultiIndex, Polynomial};

#[derive(Debug, Clone)]
pub struct PayoffApproximation {
    pub poly: Polynomial,
    pub degree: usize,
    /// `max |g − g_m|` over a validation grid ten times finer than the nodes.
    pub sup_error: f64,
}

/// Interpolates `g` on `bx` at the Chebyshev points of every coordinate.
pub fn approximate_payoff(g: &dyn Fn(&[f64]) -> f64, bx: &StateBox, degree: usize) -> Result<PayoffApproximation> {
    let vars: Vec<usize> = (0..bx.dim()).collect();
    approximate_payoff_in(g, bx, &vars, degree)
}

/// As [`approximate_payoff`] but interpolating only in `vars`; the remaining
/// coordinates are held at the box midpoint, so `g` should not depend on them.
pub fn approximate_payoff_in(
    g: &dyn Fn(&[f64]) -> f64,
    bx: &StateBox,
    vars: &[usize],
    degree: usize,
) -> Result<PayoffApproximation> {
    let d = bx.dim();
    if vars.is_empty() || vars.iter().any(|&v| v >= d) {
        return Err(Error::InvalidArgument(format!("interpolation variables {vars:?} for dimension {d}")));
    }
    let k = vars.len();
    let npts = degree + 1;
    let total = npts.checked_pow(k as u32).filter(|&t| t <= 2_000_000).ok_or(Error::BasisOverflow { dim: k, degree })?;
    let nodes: Vec<f64> = (0..npts).map(|i| (PI * (i as f64 + 0.5) / npts as f64).cos()).collect();
    let mid: Vec<f64> = (0..d).map(|v| 0.5 * (bx.lo[v] + bx.hi[v])).collect();
    let half: Vec<f64> = (0..d).map(|v| 0.5 * bx.width(v)).collect();
    let to_box = |v: usize, s: f64| mid[v] + half[v] * s;

    // values on the node tensor, index = Σ i_j npts^j
    let mut values = vec![0.0; total];
    let mut z = mid.clone();
    for (flat, val) in values.iter_mut().enumerate() {
        let mut r = flat;
        for &v in vars {
            z[v] = to_box(v, nodes[r % npts]);
            r /= npts;
        }
        let f = g(&z);
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("payoff value at {z:?}")));
        }
        *val = f;
    }

    // discrete cosine transform along each axis in turn
    let cos_table: Vec<Vec<f64>> =
        (0..npts).map(|j| (0..npts).map(|i| (PI * j as f64 * (i as f64 + 0.5) / npts as f64).cos()).collect()).collect();
    let mut coeffs = values;
    let mut stride = 1;
    for _ in 0..k {
        let mut next = vec![0.0; total];
        for flat in 0..total {
            let pos = (flat / stride) % npts;
            let base = flat - pos * stride;
            let j = pos;
            let scale = if j == 0 { 1.0 } else { 2.0 } / npts as f64;
            let mut s = 0.0;
            for i in 0..npts {
                s += coeffs[base + i * stride] * cos_table[j][i];
            }
            next[flat] = scale * s;
        }
        coeffs = next;
        stride *= npts;
    }

    // Chebyshev polynomials in the box coordinate: T_j((z − mid) / half)
    let cheb: Vec<Vec<Polynomial>> = vars
        .iter()
        .map(|&v| {
            let mut s = Polynomial::constant(d, -mid[v] / half[v]);
            if half[v] > 0.0 {
                s = &s + &Polynomial::monomial(MultiIndex::unit(d, v), 1.0 / half[v]);
            } else {
                s = Polynomial::zero(d);
            }
            let mut t = vec![Polynomial::constant(d, 1.0)];
            if degree >= 1 {
                t.push(s.clone());
            }
            for j in 2..=degree {
                let next = &(&s * &t[j - 1]).scale(2.0) - &t[j - 2];
                t.push(next);
            }
            t
        })
        .collect();

    let mut poly = Polynomial::zero(d);
    for (flat, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut r = flat;
        let mut term = Polynomial::constant(d, c);
        for (a, _) in vars.iter().enumerate() {
            term = &term * &cheb[a][r % npts];
            r /= npts;
        }
        poly = &poly + &term;
    }

    // validation grid, ten times the interpolation resolution per axis
    let nval = (10 * npts).max(11);
    let per_axis = if k == 1 { nval } else { ((2.0e5f64).powf(1.0 / k as f64) as usize).clamp(3, nval) };
    let count = per_axis.pow(k as u32);
    let mut sup_error: f64 = 0.0;
    let mut z = mid.clone();
    for flat in 0..count {
        let mut r = flat;
        for &v in vars {
            let i = r % per_axis;
            r /= per_axis;
            z[v] = bx.lo[v] + bx.width(v) * i as f64 / (per_axis - 1) as f64;
        }
        sup_error = sup_error.max((g(&z) - poly.value_at(&z)).abs());
    }
    Ok(PayoffApproximation { poly, degree, sup_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64) -> StateBox {
        StateBox::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn reproduces_polynomials() {
        let f = Polynomial::parse("0.5 - 2 * x1 + 0.25 * x1^3", 1).unwrap();
        let a = approximate_payoff(&|z| f.value_at(z), &interval(-1.0, 3.0), 4).unwrap();
        assert!(a.sup_error < 1e-12, "{}", a.sup_error);
        for (m, c) in f.terms() {
            assert!((a.poly.coefficient(m) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_bivariate_polynomials() {
        let bx = StateBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let f = Polynomial::parse("1 + x1 * x2^2 - x1^2", 2).unwrap();
        let a = approximate_payoff(&|z| f.value_at(z), &bx, 3).unwrap();
        assert!(a.sup_error < 1e-12);
    }

    #[test]
    fn absolute_value_error_decreases() {
        let errs: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| approximate_payoff(&|z| z[0].abs(), &interval(-1.0, 1.0), n).unwrap().sup_error)
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.05);
    }

    #[test]
    fn restricted_variables() {
        let bx = StateBox::new(vec![-1.0, 0.0], vec![1.0, 10.0]).unwrap();
        let a = approximate_payoff_in(&|z| (z[1] - 4.0).max(0.0), &bx, &[1], 12).unwrap();
        assert!(!a.poly.depends_on(0));
        assert!(a.sup_error > 0.0 && a.sup_error < 0.3, "{}", a.sup_error);
    }

    #[test]
    fn rejects_non_finite_payoff() {
        let r = approximate_payoff(&|_| f64::NAN, &interval(-1.0, 1.0), 3);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
