//! Forward-mode automatic differentiation.
//!
//! Every model density in this crate is written once, generic over [`Scalar`],
//! and evaluated either on plain `f64` or on [`Dual`] to obtain the gradient
//! with respect to all unconstrained coordinates in a single pass.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use statrs::function::gamma::{digamma, ln_gamma};

/// Largest parameter dimension a [`Dual`] can carry.
pub const MAX_DUAL_DIM: usize = 8;

/// Numeric type the model code is generic over.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    /// `self^p` for a positive base.
    fn powf(self, p: Self) -> Self;
    fn ln_gamma(self) -> Self;
    fn ln_1p(self) -> Self;

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }

    /// Logistic sigmoid `1/(1+e^{-x})`.
    fn sigmoid(self) -> Self {
        if self.value() >= 0.0 {
            (Self::cst(1.0) + (-self).exp()).recip()
        } else {
            let e = self.exp();
            e / (e + 1.0)
        }
    }

    /// `log(1 + e^x)` without overflow.
    fn softplus(self) -> Self {
        if self.value() > 0.0 {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powf(self, p: Self) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn ln_gamma(self) -> Self {
        ln_gamma(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

/// Value plus gradient with respect to up to [`MAX_DUAL_DIM`] inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; MAX_DUAL_DIM],
}

impl Dual {
    /// Independent variable number `index`.
    pub fn var(v: f64, index: usize) -> Self {
        let mut d = [0.0; MAX_DUAL_DIM];
        d[index] = 1.0;
        Self { v, d }
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[f64]) -> Vec<Dual> {
        assert!(x.len() <= MAX_DUAL_DIM, "dimension {} exceeds dual capacity", x.len());
        x.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect()
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Self { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(mut self, rhs: Dual) -> Dual {
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a += b;
        }
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(mut self, rhs: Dual) -> Dual {
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a -= b;
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        let mut d = [0.0; MAX_DUAL_DIM];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Dual { v: self.v * rhs.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        let mut d = [0.0; MAX_DUAL_DIM];
        for (i, x) in d.iter_mut().enumerate() {
            *x = (self.d[i] - v * rhs.d[i]) * inv;
        }
        Dual { v, d }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        self.chain(-self.v, -1.0)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(mut self, rhs: f64) -> Dual {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(mut self, rhs: f64) -> Dual {
        self.v -= rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: f64) -> Dual {
        self.chain(self.v * rhs, rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: f64) -> Dual {
        self * (1.0 / rhs)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

impl Scalar for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual { v, d: [0.0; MAX_DUAL_DIM] }
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn powf(self, p: Self) -> Self {
        // x^p = exp(p ln x); handled directly so a zero derivative in p stays exact
        let lnx = self.v.ln();
        let v = self.v.powf(p.v);
        let mut d = [0.0; MAX_DUAL_DIM];
        for (i, x) in d.iter_mut().enumerate() {
            *x = v * (p.d[i] * lnx + p.v * self.d[i] / self.v);
        }
        Dual { v, d }
    }
    #[inline]
    fn ln_gamma(self) -> Self {
        self.chain(ln_gamma(self.v), digamma(self.v))
    }
    #[inline]
    fn ln_1p(self) -> Self {
        self.chain(self.v.ln_1p(), 1.0 / (1.0 + self.v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6 * (1.0 + x.abs());
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives_match_finite_differences() {
        let x = 1.7;
        let cases: Vec<(Box<dyn Fn(Dual) -> Dual>, Box<dyn Fn(f64) -> f64>)> = vec![
            (Box::new(|d: Dual| d.exp()), Box::new(|v: f64| v.exp())),
            (Box::new(|d: Dual| d.ln()), Box::new(|v: f64| v.ln())),
            (Box::new(|d: Dual| d.sqrt()), Box::new(|v: f64| v.sqrt())),
            (Box::new(|d: Dual| d.powf(d)), Box::new(|v: f64| v.powf(v))),
            (Box::new(|d: Dual| d.ln_gamma()), Box::new(|v: f64| ln_gamma(v))),
            (Box::new(|d: Dual| d.sigmoid()), Box::new(|v: f64| v.sigmoid())),
            (Box::new(|d: Dual| d.softplus()), Box::new(|v: f64| v.softplus())),
            (Box::new(|d: Dual| d / (d * d + 1.0)), Box::new(|v: f64| v / (v * v + 1.0))),
        ];
        for (df, f) in cases {
            let got = df(Dual::var(x, 0)).d[0];
            let want = fd(&f, x);
            assert!((got - want).abs() < 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn sigmoid_is_stable_in_both_tails() {
        assert_eq!(800.0_f64.sigmoid(), 1.0);
        assert!((-800.0_f64).sigmoid() >= 0.0);
        assert!((800.0_f64.softplus() - 800.0).abs() < 1e-12);
    }
}
