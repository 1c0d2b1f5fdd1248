//! Forward-mode dual numbers.
//!
//! `Dual<T>` carries a value and a vector of first-order parts. Nesting
//! `Dual<Dual<f64>>` yields exact second derivatives: the inner tangent holds
//! the gradient, the outer tangent holds gradient components that are
//! themselves differentiated.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by the expression evaluator.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    /// The underlying real value.
    fn real(&self) -> f64;
    fn scale(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;
    /// `self^c` for a constant exponent.
    fn powc(&self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn real(&self) -> f64 {
        *self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powc(&self, c: f64) -> Self {
        if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
            self.powi(c as i32)
        } else {
            self.powf(c)
        }
    }
}

/// Dual number with a multi-component tangent. An empty tangent stands for
/// the zero vector, so constants need no dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Self { re, eps: Vec::new() }
    }

    /// Seed variable `index` of `n`.
    pub fn variable(re: T, index: usize, n: usize) -> Self {
        let mut eps = vec![T::from_f64(0.0); n];
        eps[index] = T::from_f64(1.0);
        Self { re, eps }
    }

    /// Tangent component `i`, zero when absent.
    pub fn tangent(&self, i: usize) -> T {
        self.eps.get(i).cloned().unwrap_or_else(|| T::from_f64(0.0))
    }

    /// Chain rule for a unary function with value `f` and derivative `df`.
    fn chain(&self, f: T, df: T) -> Self {
        Self {
            re: f,
            eps: self.eps.iter().map(|e| df.clone() * e.clone()).collect(),
        }
    }
}

fn zip_with<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    let zero = T::from_f64(0.0);
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(|| zero.clone());
            let y = b.get(i).cloned().unwrap_or_else(|| zero.clone());
            f(x, y)
        })
        .collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            eps: zip_with(&self.eps, &o.eps, |x, y| x + y),
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            re: self.re - o.re,
            eps: zip_with(&self.eps, &o.eps, |x, y| x - y),
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.re.clone(), o.re.clone());
        Self {
            re: self.re * o.re,
            eps: zip_with(&self.eps, &o.eps, |x, y| x * b.clone() + a.clone() * y),
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re.clone() / o.re.clone();
        let b = o.re.clone();
        let eps = zip_with(&self.eps, &o.eps, |x, y| (x - q.clone() * y) / b.clone());
        Self { re: q, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            eps: self.eps.into_iter().map(|e| -e).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(c: f64) -> Self {
        Self::constant(T::from_f64(c))
    }
    fn real(&self) -> f64 {
        self.re.real()
    }
    fn scale(&self, c: f64) -> Self {
        Self {
            re: self.re.scale(c),
            eps: self.eps.iter().map(|e| e.scale(c)).collect(),
        }
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(&self) -> Self {
        let t = self.re.tan();
        let dt = T::from_f64(1.0) + t.clone() * t.clone();
        self.chain(t, dt)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::from_f64(1.0) / self.re.clone())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        let ds = T::from_f64(0.5) / s.clone();
        self.chain(s, ds)
    }
    fn abs(&self) -> Self {
        let sign = if self.re.real() < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.re.abs(), T::from_f64(sign))
    }
    fn powc(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::from_f64(1.0);
        }
        let d = self.re.powc(c - 1.0).scale(c);
        self.chain(self.re.powc(c), d)
    }
}
