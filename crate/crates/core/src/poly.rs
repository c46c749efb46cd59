//! Sparse multivariate polynomials over ℝ^d.
//!
//! Monomials are keyed by [`MultiIndex`] and ordered graded-lexicographically:
//! lower total degree first, then by exponent vector with larger leading
//! exponents first, so `(2, 1)` enumerates as `1, x1, x2`. The same order is
//! used for the dense coordinate vectors handed to the generator matrix.
//!
//! The text form is `coeff * x1^e1 * ... * xd^ed` per term, terms joined by
//! `+`. Variables are 1-based. The parser also accepts `-` between terms and
//! whitespace in place of `*`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, ParsePolynomialError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Exponent vector of the single variable `var`.
    pub fn unit(dim: usize, var: usize) -> Self {
        let mut e = vec![0; dim];
        e[var] = 1;
        Self(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, var: usize) -> u32 {
        self.0[var]
    }

    fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of monomials of total degree `<= degree` in `dim` variables.
pub fn basis_size(dim: usize, degree: usize) -> Result<usize> {
    dim.checked_add(degree)
        .and_then(|n| binomial(n, degree))
        .ok_or(Error::BasisOverflow { dim, degree })
}

/// All multi-indices of total degree `<= n`, in graded-lex order.
pub fn enumerate_basis(dim: usize, n: usize) -> Result<Vec<MultiIndex>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("basis dimension must be positive".into()));
    }
    let size = basis_size(dim, n)?;
    if size > 50_000_000 {
        return Err(Error::BasisOverflow { dim, degree: n });
    }
    let mut out = Vec::with_capacity(size);
    let mut buf = vec![0u32; dim];
    for deg in 0..=n as u32 {
        compositions(deg, 0, &mut buf, &mut out);
    }
    Ok(out)
}

// Exponent vectors of exactly `remaining` total degree, leading exponent descending.
fn compositions(remaining: u32, pos: usize, buf: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if pos == buf.len() - 1 {
        buf[pos] = remaining;
        out.push(MultiIndex(buf.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e;
        compositions(remaining - e, pos + 1, buf, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zero(dim), c)
    }

    /// The coordinate polynomial `z_var` (0-based).
    pub fn var(dim: usize, var: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, var), 1.0)
    }

    pub fn monomial(index: MultiIndex, coeff: f64) -> Self {
        let mut p = Self::zero(index.dim());
        if coeff != 0.0 {
            p.terms.insert(index, coeff);
        }
        p
    }

    /// Collects terms, summing repeated monomials and dropping exact zeros.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Self::zero(dim);
        for (idx, c) in terms {
            if idx.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: idx.dim() });
            }
            p.add_term(idx, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, idx: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(idx);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree over stored terms; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree() as usize).max().unwrap_or(0)
    }

    /// Largest exponent of `var` over all terms.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.get(var)).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    /// Whether any term involves `var`.
    pub fn depends_on(&self, var: usize) -> bool {
        self.terms.keys().any(|m| m.get(var) > 0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        Ok(self.value_at(z))
    }

    /// Evaluation without the dimension check.
    pub(crate) fn value_at(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        self.terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .zip(z)
                    .filter(|(e, _)| **e > 0)
                    .fold(*c, |acc, (e, x)| acc * x.powi(*e as i32))
            })
            .sum()
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        if k == 0.0 {
            return Self::zero(self.dim);
        }
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    fn check_dim(&self, other: &Polynomial) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimensionMismatch { expected: self.dim, got: other.dim })
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = Self::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.plus(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// ∂/∂z_var.
    pub fn partial(&self, var: usize) -> Polynomial {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e > 0 {
                let mut idx = m.clone();
                idx.0[var] -= 1;
                out.add_term(idx, c * e as f64);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.dim).map(|i| self.partial(i)).collect()
    }

    /// Fixes `z_var = value`; the result keeps the ambient dimension.
    pub fn partial_eval(&self, var: usize, value: f64) -> Polynomial {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.0[var];
            let mut idx = m.clone();
            idx.0[var] = 0;
            out.add_term(idx, c * value.powi(e as i32));
        }
        out
    }

    /// Dense coefficients of a polynomial in one variable, lowest power first.
    /// Other variables must be absent.
    pub(crate) fn univariate_coeffs(&self, var: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.degree_in(var) as usize + 1];
        for (m, c) in &self.terms {
            debug_assert!(m.0.iter().enumerate().all(|(i, e)| i == var || *e == 0));
            out[m.0[var] as usize] += c;
        }
        out
    }

    /// Coordinates in `basis`; fails if a term is not a basis element.
    pub fn to_dense(&self, basis: &[MultiIndex]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; basis.len()];
        let mut matched = 0;
        for (i, b) in basis.iter().enumerate() {
            if let Some(c) = self.terms.get(b) {
                out[i] = *c;
                matched += 1;
            }
        }
        if matched != self.terms.len() {
            return Err(Error::DegreeViolation(format!(
                "polynomial of degree {} does not fit a basis of {} monomials",
                self.degree(),
                basis.len()
            )));
        }
        Ok(out)
    }

    pub fn from_dense(dim: usize, basis: &[MultiIndex], coeffs: &[f64]) -> Polynomial {
        let mut out = Self::zero(dim);
        for (b, c) in basis.iter().zip(coeffs) {
            out.add_term(b.clone(), *c);
        }
        out
    }

    /// Parses the text form with a known ambient dimension.
    pub fn parse(text: &str, dim: usize) -> std::result::Result<Polynomial, ParsePolynomialError> {
        Parser { src: text, pos: 0, dim }.polynomial()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}")?;
            for (v, e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, " * x{}", v + 1)?,
                    _ => write!(f, " * x{}^{}", v + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    /// Panics on dimension mismatch; see [`Polynomial::checked_add`].
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomial dimensions differ")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(&rhs.scale(-1.0)).expect("polynomial dimensions differ")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("polynomial dimensions differ")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, start: usize, message: &str) -> ParsePolynomialError {
        let rest = &self.src[start..];
        let token: String = rest
            .chars()
            .take_while(|c| !c.is_whitespace() && *c != '+' && *c != '*')
            .collect();
        let token = if token.is_empty() { rest.chars().take(1).collect() } else { token };
        ParsePolynomialError { token, position: start, message: message.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn polynomial(&mut self) -> std::result::Result<Polynomial, ParsePolynomialError> {
        let mut poly = Polynomial::zero(self.dim);
        self.skip_ws();
        if self.peek().is_none() {
            return Err(self.err(self.pos, "empty polynomial"));
        }
        let mut sign = 1.0;
        if let Some(c @ ('+' | '-')) = self.peek() {
            if c == '-' {
                sign = -1.0;
            }
            self.pos += 1;
        }
        loop {
            let (idx, coeff) = self.term()?;
            poly.add_term(idx, sign * coeff);
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(_) => return Err(self.err(self.pos, "expected `+` or `-` between terms")),
            }
            self.pos += 1;
        }
        Ok(poly)
    }

    fn term(&mut self) -> std::result::Result<(MultiIndex, f64), ParsePolynomialError> {
        let mut coeff = 1.0;
        let mut exps = vec![0u32; self.dim];
        let mut factors = 0;
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.peek() {
                Some('x') | Some('X') => {
                    self.pos += 1;
                    let var = self.integer().ok_or_else(|| self.err(start, "variable needs an index"))?;
                    if var == 0 || var as usize > self.dim {
                        return Err(self.err(start, "variable index out of range"));
                    }
                    self.skip_ws();
                    let mut e = 1;
                    if self.peek() == Some('^') {
                        self.pos += 1;
                        self.skip_ws();
                        e = self.integer().ok_or_else(|| self.err(start, "exponent must be a non-negative integer"))?;
                    }
                    exps[var as usize - 1] += e;
                }
                Some(c) if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                    let v = self.number().ok_or_else(|| self.err(start, "malformed number"))?;
                    coeff *= v;
                }
                _ => return Err(self.err(start, "expected a number or a variable")),
            }
            factors += 1;
            self.skip_ws();
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                }
                Some('x') | Some('X') => {}
                Some(c) if c.is_ascii_digit() || c == '.' => {}
                _ => break,
            }
        }
        debug_assert!(factors > 0);
        Ok((MultiIndex(exps), coeff))
    }

    fn integer(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.src[start..self.pos].parse().ok()
    }

    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let v: f64 = self.src[start..i].parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        self.pos = i;
        Some(v)
    }
}

/// Flat, allocation-free evaluator for hot loops.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    dim: usize,
    coeffs: Vec<f64>,
    // (variable, exponent) factors of each term, delimited by `ends`
    factors: Vec<(usize, i32)>,
    ends: Vec<usize>,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        let mut coeffs = Vec::with_capacity(p.num_terms());
        let mut factors = Vec::new();
        let mut ends = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            coeffs.push(c);
            for (v, e) in m.exponents().iter().enumerate() {
                if *e > 0 {
                    factors.push((v, *e as i32));
                }
            }
            ends.push(factors.len());
        }
        Self { dim: p.dim(), coeffs, factors, ends }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut start = 0;
        let mut sum = 0.0;
        for (c, &end) in self.coeffs.iter().zip(&self.ends) {
            let mut t = *c;
            for &(v, e) in &self.factors[start..end] {
                t *= if e == 1 { z[v] } else { z[v].powi(e) };
            }
            sum += t;
            start = end;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, dim: usize) -> Polynomial {
        Polynomial::parse(text, dim).unwrap()
    }

    #[test]
    fn basis_univariate_degree_two() {
        let b = enumerate_basis(1, 2).unwrap();
        let e: Vec<_> = b.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn basis_bivariate_degree_one_order() {
        let b = enumerate_basis(2, 1).unwrap();
        let e: Vec<_> = b.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn basis_length_matches_binomial() {
        // C(dim + n, n) by Pascal's triangle, independent of the counting code
        let mut pascal = vec![vec![1usize; 1]];
        for r in 1..=12 {
            let mut row = vec![1usize; r + 1];
            for k in 1..r {
                row[k] = pascal[r - 1][k - 1] + pascal[r - 1][k];
            }
            pascal.push(row);
        }
        assert_eq!(enumerate_basis(2, 2).unwrap().len(), 6);
        for dim in 1..=4 {
            for n in 0..=8 {
                assert_eq!(enumerate_basis(dim, n).unwrap().len(), pascal[dim + n][n]);
            }
        }
    }

    #[test]
    fn basis_is_strictly_increasing() {
        let b = enumerate_basis(3, 4).unwrap();
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn absurd_basis_is_rejected() {
        assert!(enumerate_basis(40, 40).is_err());
        assert!(enumerate_basis(0, 2).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Polynomial::constant(3, 1.0).eval(&[0.3, -2.0, 7.0]).unwrap(), 1.0);
        let bench = p("0.01 + 0.006 * x1", 1);
        assert_eq!(bench.eval(&[0.0]).unwrap(), 0.01);
        let q = p("0.998 - 0.00044 * x1", 1);
        assert!((q.eval(&[1.0]).unwrap() - 0.99756).abs() < 1e-15);
        assert!(matches!(bench.eval(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn eval_is_exact_on_integers() {
        let f = p("3 * x1^3 * x2 - 2 * x2^2 + 7", 2);
        assert_eq!(f.eval(&[2.0, -3.0]).unwrap(), 3.0 * 8.0 * -3.0 - 2.0 * 9.0 + 7.0);
    }

    #[test]
    fn multiply_examples() {
        let a = p("1 + x1", 1);
        let b = p("1 - x1", 1);
        assert_eq!(&a * &b, p("1 - x1^2", 1));
        assert!((&a * &Polynomial::zero(1)).is_zero());

        let (rho, c, delta, nu) = (0.01, 0.006, 0.998, -0.00044);
        let pp = p(&format!("{rho} + {c} * x1"), 2);
        let qq = p(&format!("{delta} + {nu} * x2"), 2);
        let pq = &pp * &qq;
        let expected = Polynomial::from_terms(
            2,
            [
                (MultiIndex::new(vec![0, 0]), rho * delta),
                (MultiIndex::new(vec![1, 0]), c * delta),
                (MultiIndex::new(vec![0, 1]), rho * nu),
                (MultiIndex::new(vec![1, 1]), c * nu),
            ],
        )
        .unwrap();
        assert_eq!(pq, expected);
        assert_eq!(pq.degree(), 2);
        assert!(pp.checked_mul(&p("x1", 1)).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(p("x1^2", 1).gradient(), vec![p("2 * x1", 1)]);
        assert_eq!(p("0.998 - 0.00044 * x1", 1).gradient(), vec![Polynomial::constant(1, -0.00044)]);
        assert_eq!(p("x1 * x2", 2).gradient(), vec![p("x2", 2), p("x1", 2)]);
        assert!(Polynomial::constant(2, 5.0).gradient().iter().all(Polynomial::is_zero));
    }

    #[test]
    fn zero_polynomial_has_degree_zero() {
        assert_eq!(Polynomial::zero(2).degree(), 0);
        assert_eq!((&p("x1", 1) - &p("x1", 1)).num_terms(), 0);
    }

    #[test]
    fn text_round_trip() {
        let f = p("0.25 * x1^2 * x2 + -3e-7 * x2 + 1.5", 2);
        let back = Polynomial::parse(&f.to_string(), 2).unwrap();
        assert_eq!(f, back);
        assert_eq!(Polynomial::parse("0", 3).unwrap(), Polynomial::zero(3));
        assert_eq!(p("2 x1 x2^2", 2), p("2 * x1 * x2^2", 2));
    }

    #[test]
    fn parse_errors_name_the_token() {
        let e = Polynomial::parse("1 + 2 * y1", 1).unwrap_err();
        assert_eq!(e.token, "y1");
        let e = Polynomial::parse("1 + x3", 2).unwrap_err();
        assert_eq!(e.token, "x3");
        let e = Polynomial::parse("1 + 2..5 * x1", 1).unwrap_err();
        assert_eq!(e.token, "2..5");
        assert!(Polynomial::parse("", 1).is_err());
        assert!(Polynomial::parse("x1^", 1).is_err());
    }

    #[test]
    fn dense_round_trip_and_overflow() {
        let basis = enumerate_basis(2, 2).unwrap();
        let f = p("1 + 2 * x1 - x1 * x2 + 4 * x2^2", 2);
        let v = f.to_dense(&basis).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 0.0, 0.0, -1.0, 4.0]);
        assert_eq!(Polynomial::from_dense(2, &basis, &v), f);
        assert!(p("x1^3", 2).to_dense(&basis).is_err());
    }

    #[test]
    fn compiled_matches_sparse() {
        let f = p("0.3 - 2 * x1 * x2^3 + x3^2 + 1e-3 * x1^4", 3);
        let c = CompiledPoly::new(&f);
        for z in [[0.1, 0.2, 0.3], [-1.0, 2.0, 0.5], [3.0, -0.7, 1.1]] {
            assert!((c.eval(&z) - f.eval(&z).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_eval_fixes_a_variable() {
        let f = p("1 + x1 * x2 + x2^2", 2);
        let g = f.partial_eval(1, 2.0);
        assert_eq!(g, p("5 + 2 * x1", 2));
    }
}
