//! Truncated Taylor arithmetic (forward-mode, univariate) up to order 4.
//!
//! A [`Jet`] carries a function value together with its derivatives at one
//! point. Internally the coefficients are stored in scaled Taylor form
//! `c[n] = f^(n)(x) / n!`, which keeps products and compositions as plain
//! Cauchy convolutions; the public accessors return raw derivatives.

use std::ops::{Add, Mul, Neg, Sub};

use super::ExprError;

/// Highest derivative order a jet can carry.
pub const MAX_ORDER: usize = 4;

const FACTORIAL: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Value and derivatives `d[0..=order]` of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; MAX_ORDER + 1],
}

impl Jet {
    fn zero(order: usize) -> Self {
        debug_assert!(order <= MAX_ORDER);
        Jet {
            order,
            c: [0.0; MAX_ORDER + 1],
        }
    }

    /// A constant: all derivatives vanish.
    pub fn constant(value: f64, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.c[0] = value;
        j
    }

    /// The independent variable evaluated at `x`.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut j = Jet::constant(x, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    /// Builds a jet from raw derivatives `d[0], d[1], ...`.
    pub fn from_derivatives(d: &[f64]) -> Result<Self, ExprError> {
        if d.is_empty() || d.len() > MAX_ORDER + 1 {
            return Err(ExprError::OrderTooHigh(d.len().saturating_sub(1)));
        }
        let mut j = Jet::zero(d.len() - 1);
        for (n, v) in d.iter().enumerate() {
            j.c[n] = v / FACTORIAL[n];
        }
        Ok(j)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// The `n`-th derivative. Panics if `n > order`.
    pub fn d(&self, n: usize) -> f64 {
        assert!(
            n <= self.order,
            "derivative {n} exceeds jet order {}",
            self.order
        );
        self.c[n] * FACTORIAL[n]
    }

    /// All raw derivatives `d[0..=order]`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order).map(|n| self.d(n)).collect()
    }

    /// Reinterprets a jet of order `order + n` of `f` as the jet of `f^(n)`.
    pub fn shift(&self, n: usize) -> Result<Self, ExprError> {
        if n > self.order {
            return Err(ExprError::OrderTooHigh(n));
        }
        let mut out = Jet::zero(self.order - n);
        for m in 0..=out.order {
            out.c[m] = self.c[m + n] * FACTORIAL[m + n] / FACTORIAL[m];
        }
        Ok(out)
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let mut out = *self;
        out.order = order.min(self.order);
        for k in out.order + 1..=MAX_ORDER {
            out.c[k] = 0.0;
        }
        out
    }

    fn common_order(&self, other: &Jet) -> usize {
        self.order.min(other.order)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for k in 0..=out.order {
            out.c[k] *= s;
        }
        out
    }

    pub fn recip(&self) -> Result<Self, ExprError> {
        Jet::constant(1.0, self.order).div(self)
    }

    pub fn div(&self, rhs: &Jet) -> Result<Self, ExprError> {
        let b0 = rhs.c[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(ExprError::Domain {
                what: "division by zero",
                at: b0,
            });
        }
        let order = self.common_order(rhs);
        let mut q = Jet::zero(order);
        for k in 0..=order {
            let mut s = self.c[k];
            for j in 0..k {
                s -= q.c[j] * rhs.c[k - j];
            }
            q.c[k] = s / b0;
        }
        Ok(q)
    }

    pub fn exp(&self) -> Self {
        let mut e = Jet::zero(self.order);
        e.c[0] = self.c[0].exp();
        for k in 1..=self.order {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e.c[k - j];
            }
            e.c[k] = s / k as f64;
        }
        e
    }

    pub fn ln(&self) -> Result<Self, ExprError> {
        let a0 = self.c[0];
        if a0 <= 0.0 {
            return Err(ExprError::Domain {
                what: "logarithm of a non-positive value",
                at: a0,
            });
        }
        let mut l = Jet::zero(self.order);
        l.c[0] = a0.ln();
        for k in 1..=self.order {
            let mut s = self.c[k];
            for j in 1..k {
                s -= (j as f64 / k as f64) * l.c[j] * self.c[k - j];
            }
            l.c[k] = s / a0;
        }
        Ok(l)
    }

    /// Simultaneous sine and cosine (hyperbolic when `sign = +1`).
    fn sin_cos_like(&self, s0: f64, c0: f64, sign: f64) -> (Self, Self) {
        let mut s = Jet::zero(self.order);
        let mut c = Jet::zero(self.order);
        s.c[0] = s0;
        c.c[0] = c0;
        for k in 1..=self.order {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let ja = j as f64 * self.c[j];
                ss += ja * c.c[k - j];
                cc += ja * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = sign * cc / k as f64;
        }
        (s, c)
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a0 = self.c[0];
        self.sin_cos_like(a0.sin(), a0.cos(), -1.0)
    }

    pub fn sinh_cosh(&self) -> (Self, Self) {
        let a0 = self.c[0];
        self.sin_cos_like(a0.sinh(), a0.cosh(), 1.0)
    }

    pub fn tan(&self) -> Result<Self, ExprError> {
        let (s, c) = self.sin_cos();
        if c.c[0].abs() < 1e-12 {
            return Err(ExprError::Domain {
                what: "tangent pole",
                at: self.c[0],
            });
        }
        s.div(&c)
    }

    pub fn tanh(&self) -> Self {
        let (s, c) = self.sinh_cosh();
        // cosh never vanishes on the reals
        s.div(&c).expect("cosh is positive")
    }

    pub fn sqrt(&self) -> Result<Self, ExprError> {
        let a0 = self.c[0];
        if a0 < 0.0 || (a0 == 0.0 && self.order > 0) {
            return Err(ExprError::Domain {
                what: "square root of a non-positive value",
                at: a0,
            });
        }
        let mut r = Jet::zero(self.order);
        r.c[0] = a0.sqrt();
        for k in 1..=self.order {
            let mut s = self.c[k];
            for j in 1..k {
                s -= r.c[j] * r.c[k - j];
            }
            r.c[k] = s / (2.0 * r.c[0]);
        }
        Ok(r)
    }

    /// Integer power by repeated squaring; negative exponents go through the
    /// reciprocal.
    pub fn powi(&self, n: i64) -> Result<Self, ExprError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = *self;
        let mut acc = Jet::constant(1.0, self.order);
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        Ok(acc)
    }

    /// `self^exponent`. Integer-valued constant exponents use [`Jet::powi`];
    /// anything else requires a positive base.
    pub fn pow(&self, exponent: &Jet) -> Result<Self, ExprError> {
        let e0 = exponent.c[0];
        let is_const = exponent.c[1..=exponent.order].iter().all(|&v| v == 0.0);
        if is_const && e0.fract() == 0.0 && e0.abs() <= i64::MAX as f64 {
            return self.powi(e0 as i64);
        }
        if self.c[0] <= 0.0 {
            return Err(ExprError::Domain {
                what: "non-integer power of a non-positive base",
                at: self.c[0],
            });
        }
        let order = self.common_order(exponent);
        Ok((self.truncate(order).ln()? * exponent.truncate(order)).exp())
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = Jet::zero(self.common_order(&rhs));
        for k in 0..=out.order {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let mut out = Jet::zero(self.common_order(&rhs));
        for k in 0..=out.order {
            out.c[k] = self.c[k] - rhs.c[k];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::zero(self.common_order(&rhs));
        for k in 0..=out.order {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = s;
        }
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
