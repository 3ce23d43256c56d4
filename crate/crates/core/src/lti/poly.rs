use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, DMatrix};

use super::balance::balance_in_place;

/// Real polynomial in the Laplace variable, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, trimming exactly-zero highest-order coefficients.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![0.0])
    }

    pub fn one() -> Self {
        Self::new(vec![1.0])
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `a·s + b`
    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(vec![b, a])
    }

    /// The Laplace variable itself.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `gain · Π (s − r)`. Complex roots must come in conjugate pairs; the
    /// imaginary residue of the product is discarded.
    pub fn from_roots(roots: &[Complex<f64>], gain: f64) -> Self {
        let mut acc: Vec<Complex<f64>> = vec![Complex::new(gain, 0.0)];
        for r in roots {
            let mut next = vec![Complex::new(0.0, 0.0); acc.len() + 1];
            for (i, c) in acc.iter().enumerate() {
                next[i + 1] += *c;
                next[i] -= *c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |c_i| |z|^i`, the natural scale for judging `|p(z)|`.
    pub fn abs_scale_at(&self, z: Complex<f64>) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Divides through by the leading coefficient.
    pub fn monic(&self) -> Self {
        let lead = self.leading();
        if lead == 0.0 {
            return self.clone();
        }
        self.scale(1.0 / lead)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    ///
    /// # Panics
    /// Panics if `divisor` is the zero polynomial.
    pub fn div_rem(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        assert!(!divisor.is_zero(), "polynomial division by zero");
        let dd = divisor.degree();
        if self.degree() < dd || self.is_zero() {
            return (Self::zero(), self.clone());
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd.max(1));
        (Self::new(quot), Self::new(rem))
    }

    /// Removes leading zero coefficients of low order: returns `(k, p/s^k)`
    /// where `k` counts exact roots at the origin.
    pub fn strip_origin_roots(&self) -> (usize, Polynomial) {
        if self.is_zero() {
            return (0, self.clone());
        }
        let k = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        (k, Self::new(self.coeffs[k..].to_vec()))
    }

    /// Roots via eigenvalues of the balanced companion matrix.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        if self.is_zero() {
            return Vec::new();
        }
        let (k, reduced) = self.strip_origin_roots();
        let mut roots = vec![Complex::new(0.0, 0.0); k];
        let n = reduced.degree();
        match n {
            0 => {}
            1 => roots.push(Complex::new(-reduced.coeffs[0] / reduced.coeffs[1], 0.0)),
            _ => {
                let lead = reduced.leading();
                let mut companion = DMatrix::<f64>::zeros(n, n);
                for j in 0..n {
                    companion[(0, j)] = -reduced.coeffs[n - 1 - j] / lead;
                }
                for i in 1..n {
                    companion[(i, i - 1)] = 1.0;
                }
                balance_in_place(&mut companion);
                roots.extend(companion.complex_eigenvalues().iter().copied());
            }
        }
        roots
    }
}

impl Default for Polynomial {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<f64> for Polynomial {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (exp, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            terms.push(match exp {
                0 => format!("{c}"),
                1 => format!("{c}s"),
                _ => format!("{c}s^{exp}"),
            });
        }
        write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in rhs.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(out)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                (&self).$m(rhs)
            }
        }
        impl $tr<Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        -&self
    }
}
