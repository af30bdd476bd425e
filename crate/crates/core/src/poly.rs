//! Dense univariate polynomials over any commutative coefficient ring.
//!
//! Coefficients are stored in ascending degree order with trailing zeros
//! trimmed, so the zero polynomial has an empty coefficient vector.

use std::fmt;
use std::ops::{Add, Mul};

use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Zero + Clone> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient of `x^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Multiply by `x`.
    pub fn shift(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(T::zero());
        coeffs.extend(self.coeffs.iter().cloned());
        Self { coeffs }
    }
}

impl<T: Zero + One + Clone> Polynomial<T> {
    pub fn one() -> Self {
        Self::constant(T::one())
    }

    /// `1 + x + ... + x^(k-1)`.
    pub fn geometric(k: usize) -> Self {
        Self::new(vec![T::one(); k])
    }

    /// Adds `x^degree` in place.
    pub fn add_monomial(&mut self, degree: usize) {
        if self.coeffs.len() <= degree {
            self.coeffs.resize(degree + 1, T::zero());
        }
        let c = std::mem::replace(&mut self.coeffs[degree], T::zero());
        self.coeffs[degree] = c + T::one();
    }

    /// Horner evaluation.
    pub fn eval(&self, at: &T) -> T
    where
        T: Mul<Output = T>,
    {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * at.clone() + c.clone())
    }
}

impl<T: Zero + Clone> Add for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn add(self, rhs: Self) -> Polynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|i| match (self.coeffs.get(i), rhs.coeffs.get(i)) {
                (Some(a), Some(b)) => a.clone() + b.clone(),
                (Some(a), None) | (None, Some(a)) => a.clone(),
                (None, None) => unreachable!(),
            })
            .collect();
        Polynomial::new(coeffs)
    }
}

impl<T: Zero + Clone> Add for Polynomial<T> {
    type Output = Polynomial<T>;

    fn add(self, rhs: Self) -> Polynomial<T> {
        &self + &rhs
    }
}

impl<T: Zero + Clone + Mul<Output = T>> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn mul(self, rhs: Self) -> Polynomial<T> {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                let c = std::mem::replace(&mut coeffs[i + j], T::zero());
                coeffs[i + j] = c + a.clone() * b.clone();
            }
        }
        Polynomial::new(coeffs)
    }
}

impl<T: Zero + Clone + Mul<Output = T>> Mul for Polynomial<T> {
    type Output = Polynomial<T>;

    fn mul(self, rhs: Self) -> Polynomial<T> {
        &self * &rhs
    }
}

impl<T: Zero + One + Clone + Mul<Output = T>> std::iter::Product for Polynomial<T> {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::one(), |acc, p| &acc * &p)
    }
}

/// Renders as `1 + 4x + 9x^2`; zero terms are skipped and unit coefficients elided.
impl<T: Zero + One + PartialEq + fmt::Display> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                _ => {
                    if !c.is_one() {
                        write!(f, "{c}")?;
                    }
                    f.write_str("x")?;
                    if i > 1 {
                        write!(f, "^{i}")?;
                    }
                }
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}
