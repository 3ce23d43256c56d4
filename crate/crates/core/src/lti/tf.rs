use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Complex;

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Tolerance used by the automatic common-factor cancellation.
pub const CANCEL_TOL: f64 = 1e-8;

/// Ratio of two real polynomials in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

/// Steady-state gain of a transfer function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcGain {
    Finite(f64),
    Infinite,
}

impl DcGain {
    pub fn is_finite(&self) -> bool {
        matches!(self, DcGain::Finite(_))
    }

    /// Finite value, or `f64::INFINITY` for an integrating system.
    pub fn value(&self) -> f64 {
        match *self {
            DcGain::Finite(v) => v,
            DcGain::Infinite => f64::INFINITY,
        }
    }
}

impl RationalTF {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self::gain(0.0)
    }

    pub fn one() -> Self {
        Self::gain(1.0)
    }

    /// `1/s`
    pub fn integrator() -> Self {
        Self {
            num: Polynomial::one(),
            den: Polynomial::s(),
        }
    }

    /// `k / (τ s + 1)`
    pub fn first_order(k: f64, tau: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::linear(tau, 1.0),
        }
    }

    /// `(a s + 1) / (b s + 1)`
    pub fn lead_lag(a: f64, b: f64) -> Self {
        Self {
            num: Polynomial::linear(a, 1.0),
            den: Polynomial::linear(b, 1.0),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Divides numerator and denominator by the leading denominator coefficient.
    pub fn normalized(&self) -> Self {
        let lead = self.den.leading();
        Self {
            num: self.num.scale(1.0 / lead),
            den: self.den.scale(1.0 / lead),
        }
    }

    /// Cancels numerator/denominator root pairs that agree within `tol` and
    /// returns the result with a monic denominator.
    pub fn minreal(&self, tol: f64) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        let mut num = self.num.scale(1.0 / self.num.max_abs());
        let mut den = self.den.scale(1.0 / self.den.max_abs());
        let k = self.num.max_abs() / self.den.max_abs();
        while num.degree() > 0 && den.degree() > 0 {
            let Some(z) = common_root(&num, &den, tol) else {
                break;
            };
            let factor = if z.im.abs() <= tol * z.norm().max(1.0) {
                Polynomial::linear(1.0, -z.re)
            } else {
                Polynomial::new(vec![z.norm_sqr(), -2.0 * z.re, 1.0])
            };
            num = num.div_rem(&factor).0;
            den = den.div_rem(&factor).0;
        }
        Self {
            num: num.scale(k),
            den,
        }
        .normalized()
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        self.minreal(CANCEL_TOL).den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex<f64>> {
        self.minreal(CANCEL_TOL).num.roots()
    }

    pub fn dcgain(&self) -> DcGain {
        if self.num.is_zero() {
            return DcGain::Finite(0.0);
        }
        let (kn, n) = self.num.strip_origin_roots();
        let (kd, d) = self.den.strip_origin_roots();
        if kn > kd {
            DcGain::Finite(0.0)
        } else if kn < kd {
            DcGain::Infinite
        } else {
            DcGain::Finite(n.coeffs()[0] / d.coeffs()[0])
        }
    }

    /// `g / (1 + g h)` without any cancellation.
    pub(crate) fn feedback_raw(g: &Self, h: &Self) -> Result<Self> {
        let num = &g.num * &h.den;
        let open = &g.den * &h.den;
        let loop_ = &g.num * &h.num;
        let den = &open + &loop_;
        let scale = open.max_abs().max(loop_.max_abs());
        if den.is_zero() || den.max_abs() <= 1e-13 * scale {
            return Err(Error::DegenerateLoop);
        }
        Ok(Self { num, den })
    }

    pub(crate) fn mul_raw(a: &Self, b: &Self) -> Self {
        Self {
            num: &a.num * &b.num,
            den: &a.den * &b.den,
        }
    }

    pub(crate) fn add_raw(a: &Self, b: &Self) -> Self {
        if a.den == b.den {
            Self {
                num: &a.num + &b.num,
                den: a.den.clone(),
            }
        } else {
            Self {
                num: &(&a.num * &b.den) + &(&b.num * &a.den),
                den: &a.den * &b.den,
            }
        }
    }
}

/// A numerator root (upper half plane) that is also a denominator root.
fn common_root(num: &Polynomial, den: &Polynomial, tol: f64) -> Option<Complex<f64>> {
    let zr = num.roots();
    let pr = den.roots();
    for z in zr.iter().filter(|z| z.im >= 0.0) {
        let resid = den.eval_complex(*z).norm() / den.abs_scale_at(*z);
        if resid <= tol {
            return Some(*z);
        }
        let scale = z.norm().max(1.0);
        if let Some(p) = pr.iter().find(|p| (*p - z).norm() <= tol * scale) {
            let m = (z + p) * 0.5;
            return Some(Complex::new(m.re, m.im.abs()));
        }
    }
    None
}

pub fn tf_add(a: &RationalTF, b: &RationalTF) -> RationalTF {
    RationalTF::add_raw(a, b).minreal(CANCEL_TOL)
}

pub fn tf_sub(a: &RationalTF, b: &RationalTF) -> RationalTF {
    tf_add(a, &b.scale(-1.0))
}

pub fn tf_mul(a: &RationalTF, b: &RationalTF) -> RationalTF {
    RationalTF::mul_raw(a, b).minreal(CANCEL_TOL)
}

/// Negative-feedback closure `g / (1 + g h)`.
pub fn tf_feedback(g: &RationalTF, h: &RationalTF) -> Result<RationalTF> {
    Ok(RationalTF::feedback_raw(g, h)?.minreal(CANCEL_TOL))
}

pub fn poles(g: &RationalTF) -> Vec<Complex<f64>> {
    g.poles()
}

pub fn dcgain(g: &RationalTF) -> DcGain {
    g.dcgain()
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

impl From<f64> for RationalTF {
    fn from(k: f64) -> Self {
        Self::gain(k)
    }
}

impl Add for &RationalTF {
    type Output = RationalTF;
    fn add(self, rhs: &RationalTF) -> RationalTF {
        tf_add(self, rhs)
    }
}

impl Sub for &RationalTF {
    type Output = RationalTF;
    fn sub(self, rhs: &RationalTF) -> RationalTF {
        tf_sub(self, rhs)
    }
}

impl Mul for &RationalTF {
    type Output = RationalTF;
    fn mul(self, rhs: &RationalTF) -> RationalTF {
        tf_mul(self, rhs)
    }
}

impl Neg for &RationalTF {
    type Output = RationalTF;
    fn neg(self) -> RationalTF {
        self.scale(-1.0)
    }
}

/// Rectangular grid of transfer functions indexed `(output, input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoTF {
    entries: Vec<Vec<RationalTF>>,
    input_names: Vec<String>,
    output_names: Vec<String>,
}

impl MimoTF {
    pub fn new(
        entries: Vec<Vec<RationalTF>>,
        input_names: Vec<String>,
        output_names: Vec<String>,
    ) -> Result<Self> {
        if entries.len() != output_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} output names",
                entries.len(),
                output_names.len()
            )));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != input_names.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries for {} input names",
                    row.len(),
                    input_names.len()
                )));
            }
        }
        Ok(Self {
            entries,
            input_names,
            output_names,
        })
    }

    pub fn entry(&self, output: usize, input: usize) -> &RationalTF {
        &self.entries[output][input]
    }

    pub fn entries(&self) -> &[Vec<RationalTF>] {
        &self.entries
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }

    pub fn by_name(&self, output: &str, input: &str) -> Option<&RationalTF> {
        let o = self.output_names.iter().position(|n| n == output)?;
        let i = self.input_names.iter().position(|n| n == input)?;
        Some(&self.entries[o][i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tf(n: &[f64], d: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(n, d).unwrap()
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(
            RationalTF::from_coeffs(&[1.0], &[0.0]),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn identical_denominators_add_and_cancel() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        let sum = tf_add(&a, &a);
        assert_eq!(sum.num().coeffs(), &[2.0]);
        assert_eq!(sum.den().coeffs(), &[1.0, 1.0]);
    }

    #[test]
    fn additive_identity() {
        let g = tf(&[3.0, 1.0], &[2.0, 3.0, 1.0]);
        assert_eq!(tf_add(&g, &RationalTF::zero()), g);
    }

    #[test]
    fn integrator_plus_lag() {
        let sum = tf_add(&RationalTF::integrator(), &tf(&[1.0], &[2.0, 1.0]));
        assert_eq!(sum.num().coeffs(), &[2.0, 2.0]);
        assert_eq!(sum.den().coeffs(), &[0.0, 2.0, 1.0]);
    }

    #[test]
    fn products() {
        let g = tf(&[3.0, 1.0], &[2.0, 3.0, 1.0]);
        assert_eq!(tf_mul(&g, &RationalTF::one()), g);
        let p = tf_mul(&RationalTF::integrator(), &tf(&[0.0, 1.0], &[1.0, 1.0]));
        assert_eq!(p.num().coeffs(), &[1.0]);
        assert_eq!(p.den().coeffs(), &[1.0, 1.0]);
        let q = tf_mul(&tf(&[2.0], &[1.0, 1.0]), &tf(&[3.0], &[2.0, 1.0]));
        assert_eq!(q.num().coeffs(), &[6.0]);
        assert_eq!(q.den().coeffs(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn feedback_examples() {
        let k = 2.5;
        let fb = tf_feedback(&RationalTF::integrator(), &RationalTF::gain(k)).unwrap();
        assert_eq!(fb.num().coeffs(), &[1.0]);
        assert_eq!(fb.den().coeffs(), &[k, 1.0]);
        let g = tf(&[10.0], &[1.0, 1.0]);
        assert_eq!(tf_feedback(&g, &RationalTF::zero()).unwrap(), g);
        let fb = tf_feedback(&g, &RationalTF::one()).unwrap();
        assert_eq!(fb.num().coeffs(), &[10.0]);
        assert_eq!(fb.den().coeffs(), &[11.0, 1.0]);
    }

    #[test]
    fn degenerate_loop_detected() {
        assert_eq!(
            tf_feedback(&RationalTF::one(), &RationalTF::gain(-1.0)),
            Err(Error::DegenerateLoop)
        );
    }

    #[test]
    fn dcgain_examples() {
        assert_eq!(tf(&[4.0, 2.0], &[2.0, 1.0]).dcgain(), DcGain::Finite(2.0));
        assert_eq!(RationalTF::integrator().dcgain(), DcGain::Infinite);
        assert_eq!(
            tf(&[0.0, 1.0], &[0.0, 1.0, 1.0]).dcgain(),
            DcGain::Finite(1.0)
        );
        assert_eq!(tf(&[0.0, 1.0], &[1.0, 1.0]).dcgain(), DcGain::Finite(0.0));
    }

    #[test]
    fn poles_examples() {
        let mut p = tf(&[1.0], &[2.0, 3.0, 1.0]).poles();
        p.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_relative_eq!(p[0].re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(p[1].re, -1.0, epsilon = 1e-12);
        assert_eq!(
            RationalTF::integrator().poles(),
            vec![Complex::new(0.0, 0.0)]
        );
    }

    #[test]
    fn cancels_repeated_roots() {
        // (s+1)^2 (s+3) / ((s+1)^2 (s+2)(s+4))
        let n = Polynomial::from_roots(
            &[
                Complex::new(-1.0, 0.0),
                Complex::new(-1.0, 0.0),
                Complex::new(-3.0, 0.0),
            ],
            1.0,
        );
        let d = Polynomial::from_roots(
            &[
                Complex::new(-1.0, 0.0),
                Complex::new(-1.0, 0.0),
                Complex::new(-2.0, 0.0),
                Complex::new(-4.0, 0.0),
            ],
            1.0,
        );
        let g = RationalTF::new(n, d).unwrap().minreal(CANCEL_TOL);
        assert_eq!(g.num().degree(), 1);
        assert_eq!(g.den().degree(), 2);
        assert_relative_eq!(g.num().coeffs()[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(g.den().coeffs()[0], 8.0, epsilon = 1e-9);
    }

    #[test]
    fn cancels_complex_pair() {
        let quad = Polynomial::new(vec![5.0, 2.0, 1.0]);
        let g = RationalTF::new(
            &quad * &Polynomial::linear(1.0, 7.0),
            &quad * &Polynomial::new(vec![6.0, 5.0, 1.0]),
        )
        .unwrap()
        .minreal(CANCEL_TOL);
        assert_eq!(g.den().degree(), 2);
        assert_relative_eq!(g.den().coeffs()[1], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn mimo_shape_checked() {
        let e = vec![vec![RationalTF::one(), RationalTF::zero()]];
        assert!(MimoTF::new(e.clone(), vec!["a".into(), "b".into()], vec!["y".into()]).is_ok());
        assert!(MimoTF::new(e, vec!["a".into()], vec!["y".into()]).is_err());
    }
}
