use nalgebra::{DMatrix, DVector};

use super::diffusion::DiffusionSpec;
use super::expm::expm;
use crate::error::{Error, Result};
use crate::poly::{enumerate_basis, MultiIndex, Polynomial};

/// `𝐆f = ½ Tr(a ∇²f) + bᵀ∇f`.
pub fn apply_generator(spec: &DiffusionSpec, f: &Polynomial) -> Polynomial {
    let d = spec.dim();
    let mut out = Polynomial::zero(d);
    let grad = f.gradient();
    for (i, gi) in grad.iter().enumerate() {
        if gi.is_zero() {
            continue;
        }
        out = &out + &(&spec.drift()[i] * gi);
        for j in 0..d {
            let aij = &spec.diffusion()[i][j];
            if aij.is_zero() {
                continue;
            }
            let hij = gi.partial(j);
            if !hij.is_zero() {
                out = &out + &(&aij.scale(0.5) * &hij);
            }
        }
    }
    out
}

/// Matrix of the generator restricted to polynomials of degree `<= n`.
///
/// Column `j` holds the coordinates of `𝐆 basis[j]`, so that
/// `𝐆p(z) = H(z)ᵀ G p⃗`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    dim: usize,
    basis: Vec<MultiIndex>,
    g: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `e^{hG}`.
    pub fn semigroup(&self, h: f64) -> Result<DMatrix<f64>> {
        expm(&self.g, h)
    }

    /// The polynomial `z ↦ E[p(Z_{t+h}) | Z_t = z]`.
    pub fn propagate(&self, p: &Polynomial, h: f64) -> Result<Polynomial> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.dim() });
        }
        if h == 0.0 {
            return Ok(p.clone());
        }
        let coeffs = DVector::from_vec(p.to_dense(&self.basis)?);
        let moved = self.semigroup(h)? * coeffs;
        Ok(Polynomial::from_dense(self.dim, &self.basis, moved.as_slice()))
    }

    /// Propagates with a precomputed semigroup matrix `e^{hG}`.
    pub fn propagate_with(&self, semigroup: &DMatrix<f64>, p: &Polynomial) -> Result<Polynomial> {
        let coeffs = DVector::from_vec(p.to_dense(&self.basis)?);
        let moved = semigroup * coeffs;
        Ok(Polynomial::from_dense(self.dim, &self.basis, moved.as_slice()))
    }
}

pub fn build_generator(spec: &DiffusionSpec, n: usize) -> Result<GeneratorMatrix> {
    let dim = spec.dim();
    let basis = enumerate_basis(dim, n)?;
    let size = basis.len();
    if size > 5_000 {
        return Err(Error::BasisOverflow { dim, degree: n });
    }
    let mut g = DMatrix::zeros(size, size);
    for (j, m) in basis.iter().enumerate() {
        let image = apply_generator(spec, &Polynomial::monomial(m.clone(), 1.0));
        let col = image.to_dense(&basis).map_err(|_| {
            Error::DegreeViolation(format!("generator raises the degree of a monomial of degree {}", m.degree()))
        })?;
        g.set_column(j, &DVector::from_vec(col));
    }
    Ok(GeneratorMatrix { n, dim, basis, g })
}

/// `z ↦ E[p(Z_{t+h}) | Z_t = z]` as a polynomial of the same degree as `p`.
pub fn propagate(spec: &DiffusionSpec, p: &Polynomial, h: f64) -> Result<Polynomial> {
    if h < 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be non-negative, got {h}")));
    }
    if p.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: p.dim() });
    }
    if h == 0.0 || p.is_constant() {
        return Ok(p.clone());
    }
    build_generator(spec, p.degree())?.propagate(p, h)
}

fn warn_outside(spec: &DiffusionSpec, z: &[f64]) {
    if !spec.state_box().contains_with_tol(z, 1e-12) {
        log::warn!("conditional expectation evaluated outside the state box at {z:?}");
    }
}

/// `p̂_{(t,T)}(z) = H(z)ᵀ e^{hG} p⃗` with `h = T − t`.
pub fn conditional_expectation(spec: &DiffusionSpec, p: &Polynomial, z: &[f64], h: f64) -> Result<f64> {
    if z.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: z.len() });
    }
    warn_outside(spec, z);
    if h == 0.0 {
        return p.eval(z);
    }
    propagate(spec, p, h)?.eval(z)
}

/// Value of `p̂` at `z` together with its gradient in the X coordinates.
pub fn conditional_expectation_path(
    spec: &DiffusionSpec,
    p: &Polynomial,
    z: &[f64],
    h: f64,
) -> Result<(f64, Vec<f64>)> {
    if z.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: z.len() });
    }
    warn_outside(spec, z);
    let ph = propagate(spec, p, h)?;
    let grad = (0..spec.dim_x()).map(|i| ph.partial(i).value_at(z)).collect();
    Ok((ph.value_at(z), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::diffusion::StateBox;

    const PSI: f64 = 14.98581;
    const BBAR: f64 = -0.79506;
    const SIG2: f64 = 1.56998;

    fn jacobi() -> DiffusionSpec {
        let drift = vec![Polynomial::from_terms(
            1,
            [(MultiIndex::new(vec![0]), PSI * BBAR), (MultiIndex::new(vec![1]), -PSI)],
        )
        .unwrap()];
        let a = vec![vec![Polynomial::from_terms(
            1,
            [(MultiIndex::new(vec![0]), SIG2), (MultiIndex::new(vec![2]), -SIG2)],
        )
        .unwrap()]];
        DiffusionSpec::new(
            1,
            0,
            drift,
            a,
            StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
            vec![Polynomial::parse("x1^2 - 1", 1).unwrap()],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn degree_zero_matrix_is_zero() {
        let g = build_generator(&jacobi(), 0).unwrap();
        assert_eq!(g.matrix().shape(), (1, 1));
        assert_eq!(g.matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn jacobi_degree_two_columns() {
        let g = build_generator(&jacobi(), 2).unwrap();
        let m = g.matrix();
        let want = [
            [0.0, PSI * BBAR, SIG2],
            [0.0, -PSI, 2.0 * PSI * BBAR],
            [0.0, 0.0, -(SIG2 + 2.0 * PSI)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - want[i][j]).abs() < 1e-12, "({i},{j})");
            }
        }
        assert!((m[(0, 1)] - (-11.9146)).abs() < 1e-4);
    }

    #[test]
    fn first_moment_is_affine_relaxation() {
        let s = jacobi();
        let x = Polynomial::var(1, 0);
        let h = 1.0 / 12.0;
        for z in [-0.9, 0.0, 0.4] {
            let (v, g) = conditional_expectation_path(&s, &x, &[z], h).unwrap();
            let want = BBAR + (-PSI * h).exp() * (z - BBAR);
            assert!((v - want).abs() < 1e-13);
            assert!((g[0] - (-PSI * h).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn horizon_zero_is_identity() {
        let s = jacobi();
        let p = Polynomial::parse("0.3 + x1 - 2 * x1^3", 1).unwrap();
        let (v, g) = conditional_expectation_path(&s, &p, &[0.5], 0.0).unwrap();
        assert_eq!(v, p.eval(&[0.5]).unwrap());
        assert!((g[0] - (1.0 - 6.0 * 0.25)).abs() < 1e-15);
        assert_eq!(conditional_expectation(&s, &Polynomial::constant(1, 1.0), &[0.2], 3.0).unwrap(), 1.0);
    }

    #[test]
    fn second_moment_converges_to_stationary() {
        let s = jacobi();
        let x2 = Polynomial::parse("x1^2", 1).unwrap();
        let v = conditional_expectation(&s, &x2, &[0.0], 5.0).unwrap();
        let stat = (SIG2 + 2.0 * PSI * BBAR * BBAR) / (SIG2 + 2.0 * PSI);
        assert!((v - stat).abs() < 1e-10);
        assert!((stat - 0.65043).abs() < 1e-5);
    }

    #[test]
    fn semigroup_property() {
        let s = jacobi();
        let g = build_generator(&s, 3).unwrap();
        let a = g.semigroup(0.03).unwrap();
        let b = g.semigroup(0.05).unwrap();
        let ab = g.semigroup(0.08).unwrap();
        assert!((&a * &b - &ab).amax() < 1e-10);
    }
}
