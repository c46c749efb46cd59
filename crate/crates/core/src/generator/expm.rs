//! Matrix exponential.
//!
//! Delegates to nalgebra's scaling-and-squaring Padé implementation
//! (orders 3 through 13, Al-Mohy & Higham backward-error bounds).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `e^{tG}`.
pub fn expm(g: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !g.is_square() {
        return Err(Error::InvalidArgument(format!("expm of a {}x{} matrix", g.nrows(), g.ncols())));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("expm time must be finite and non-negative, got {t}")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generator matrix entry".into()));
    }
    let n = g.nrows();
    if t == 0.0 || n == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let e = (g * t).exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix exponential at t = {t}")));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_and_zero_matrix_give_identity() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        assert_eq!(expm(&g, 0.0).unwrap(), DMatrix::identity(2, 2));
        let z = DMatrix::zeros(3, 3);
        assert!((expm(&z, 7.0).unwrap() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn diagonal_matches_scalar_exponential() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.5, -20.0]));
        let e = expm(&g, 1.0).unwrap();
        assert!((e[(0, 0)] - 0.36787944117144233).abs() < 1e-14);
        assert!((e[(1, 1)] / 0.5f64.exp() - 1.0).abs() < 1e-13);
        assert!((e[(2, 2)] / (-20.0f64).exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nilpotent_jordan_block() {
        // e^{tN} = I + tN for N² = 0, a non-diagonalizable input
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&g, 3.0).unwrap();
        assert!((e - DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0])).amax() < 1e-13);
    }

    #[test]
    fn rotation_generator() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let t = 2.5f64;
        let e = expm(&g, t).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((e - want).amax() < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let g = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(expm(&g, 1.0), Err(Error::NonFinite(_))));
        let g = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(expm(&g, -1.0).is_err());
    }
}
