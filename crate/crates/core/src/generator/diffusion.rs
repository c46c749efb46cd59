use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::InvalidSpec(format!("box side {i} is [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.contains_with_tol(z, 0.0)
    }

    pub fn contains_with_tol(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim()
            && z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *x >= l - tol && *x <= h + tol)
    }

    pub fn clamp(&self, z: &mut [f64]) -> bool {
        let mut clipped = false;
        for (x, (l, h)) in z.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            if *x < *l {
                *x = *l;
                clipped = true;
            } else if *x > *h {
                *x = *h;
                clipped = true;
            }
        }
        clipped
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }
}

/// Polynomial diffusion `dZ = b(Z)dt + σ(Z)dW` with `Z = (X, Y)`, where only
/// the first `dim_x` coordinates carry noise.
///
/// `b` is affine, `a = σσᵀ` has quadratic entries. The volatility used for
/// hedging is the principal square root of the X block of `a`, which need not
/// be polynomial (the Jacobi factor has `σ(x) = σ√(1−x²)`).
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    dim_x: usize,
    dim_y: usize,
    drift: Vec<Polynomial>,
    diffusion: Vec<Vec<Polynomial>>,
    state_box: StateBox,
    boundary: Vec<Polynomial>,
    z0: Vec<f64>,
}

impl DiffusionSpec {
    pub fn new(
        dim_x: usize,
        dim_y: usize,
        drift: Vec<Polynomial>,
        diffusion: Vec<Vec<Polynomial>>,
        state_box: StateBox,
        boundary: Vec<Polynomial>,
        z0: Vec<f64>,
    ) -> Result<Self> {
        let d = dim_x + dim_y;
        if dim_x == 0 {
            return Err(Error::InvalidSpec("at least one noisy coordinate is required".into()));
        }
        if drift.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: drift.len() });
        }
        if diffusion.len() != d || diffusion.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidSpec(format!("diffusion matrix must be {d}x{d}")));
        }
        if state_box.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: state_box.dim() });
        }
        if z0.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: z0.len() });
        }
        let all = drift.iter().chain(diffusion.iter().flatten()).chain(boundary.iter());
        for p in all {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
            }
            for (_, c) in p.terms() {
                if !c.is_finite() {
                    return Err(Error::NonFinite("coefficient in diffusion specification".into()));
                }
            }
        }
        for (i, b) in drift.iter().enumerate() {
            if b.degree() > 1 {
                return Err(Error::DegreeViolation(format!("drift component {} has degree {}", i + 1, b.degree())));
            }
        }
        for i in 0..d {
            for j in 0..d {
                let a = &diffusion[i][j];
                if a.degree() > 2 {
                    return Err(Error::DegreeViolation(format!(
                        "diffusion entry ({}, {}) has degree {}",
                        i + 1,
                        j + 1,
                        a.degree()
                    )));
                }
                if *a != diffusion[j][i] {
                    return Err(Error::InvalidSpec(format!("diffusion matrix is not symmetric at ({}, {})", i + 1, j + 1)));
                }
                if (i >= dim_x || j >= dim_x) && !a.is_zero() {
                    return Err(Error::InvalidSpec(format!(
                        "diffusion entry ({}, {}) touches a noiseless coordinate",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for i in 0..dim_x {
            let depends_on_y = |p: &Polynomial| (dim_x..d).any(|v| p.depends_on(v));
            if depends_on_y(&drift[i]) || diffusion[i].iter().any(depends_on_y) {
                return Err(Error::InvalidSpec(format!("X coordinate {} must not depend on Y", i + 1)));
            }
        }
        if !state_box.contains(&z0) {
            return Err(Error::OutsideStateSpace { point: z0 });
        }
        for p in &boundary {
            if p.value_at(&z0) > 1e-12 {
                return Err(Error::OutsideStateSpace { point: z0 });
            }
        }
        Ok(Self { dim_x, dim_y, drift, diffusion, state_box, boundary, z0 })
    }

    pub fn dim(&self) -> usize {
        self.dim_x + self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn drift(&self) -> &[Polynomial] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Vec<Polynomial>] {
        &self.diffusion
    }

    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    pub fn boundary(&self) -> &[Polynomial] {
        &self.boundary
    }

    pub fn z0(&self) -> &[f64] {
        &self.z0
    }

    /// Same dynamics on a different box (used once a Y range is derived).
    pub fn with_box(&self, state_box: StateBox) -> Result<Self> {
        Self::new(
            self.dim_x,
            self.dim_y,
            self.drift.clone(),
            self.diffusion.clone(),
            state_box,
            self.boundary.clone(),
            self.z0.clone(),
        )
    }

    /// Whether `z` lies in the box and satisfies every boundary inequality.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.state_box.contains_with_tol(z, tol) && self.boundary.iter().all(|p| p.value_at(z) <= tol)
    }

    /// `a(z)` as a dense matrix.
    pub fn a_at(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.diffusion[i][j].value_at(z))
    }

    /// Principal square root of the X block of `a(z)`, negative eigenvalues clamped.
    pub fn sigma_at(&self, z: &[f64]) -> DMatrix<f64> {
        let m = self.dim_x;
        let ax = DMatrix::from_fn(m, m, |i, j| self.diffusion[i][j].value_at(z));
        if m == 1 {
            return DMatrix::from_element(1, 1, ax[(0, 0)].max(0.0).sqrt());
        }
        let eig = SymmetricEigen::new(ax);
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jacobi(bbar: f64) -> Result<DiffusionSpec> {
        let psi = 2.0;
        let drift = vec![Polynomial::parse(&format!("{} - {} * x1", psi * bbar, psi), 1).unwrap()];
        let a = vec![vec![Polynomial::parse("0.25 - 0.25 * x1^2", 1).unwrap()]];
        DiffusionSpec::new(
            1,
            0,
            drift,
            a,
            StateBox::new(vec![-1.0], vec![1.0])?,
            vec![Polynomial::parse("x1^2 - 1", 1).unwrap()],
            vec![0.0],
        )
    }

    #[test]
    fn accepts_jacobi() {
        let s = jacobi(0.3).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.sigma_at(&[0.0])[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(s.sigma_at(&[1.0])[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_quadratic_drift() {
        let drift = vec![Polynomial::parse("x1^2", 1).unwrap()];
        let a = vec![vec![Polynomial::zero(1)]];
        let r = DiffusionSpec::new(1, 0, drift, a, StateBox::new(vec![0.0], vec![1.0]).unwrap(), vec![], vec![0.0]);
        assert!(matches!(r, Err(Error::DegreeViolation(_))));
    }

    #[test]
    fn rejects_noise_on_y() {
        let drift = vec![Polynomial::zero(2), Polynomial::zero(2)];
        let mut a = vec![vec![Polynomial::zero(2); 2]; 2];
        a[1][1] = Polynomial::constant(2, 1.0);
        let b = StateBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(DiffusionSpec::new(1, 1, drift, a, b, vec![], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn sigma_squares_to_a() {
        let d = 2;
        let drift = vec![Polynomial::zero(d), Polynomial::zero(d)];
        let a11 = Polynomial::parse("1 - x1^2", d).unwrap();
        let a12 = Polynomial::parse("0.3 - 0.3 * x1 * x2", d).unwrap();
        let a22 = Polynomial::parse("1 - x2^2", d).unwrap();
        let a = vec![vec![a11, a12.clone()], vec![a12, a22]];
        let s = DiffusionSpec::new(
            2,
            0,
            drift,
            a,
            StateBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            vec![],
            vec![0.0, 0.0],
        )
        .unwrap();
        let z = [0.2, -0.5];
        let sig = s.sigma_at(&z);
        let diff = &sig * &sig - s.a_at(&z);
        assert!(diff.amax() < 1e-12);
    }
}
