//! Forward-mode dual numbers for differentiating local stencils exactly.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub(crate) trait Arith:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(x: f64) -> Self;
    #[allow(dead_code)]
    fn val(self) -> f64;
}

impl Arith for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual<const K: usize> {
    pub v: f64,
    pub d: [f64; K],
}

impl<const K: usize> Dual<K> {
    pub fn var(v: f64, slot: usize) -> Self {
        let mut d = [0.0; K];
        d[slot] = 1.0;
        Dual { v, d }
    }
}

impl<const K: usize> Arith for Dual<K> {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual { v: x, d: [0.0; K] }
    }
    #[inline]
    fn val(self) -> f64 {
        self.v
    }
}

impl<const K: usize> Add for Dual<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for k in 0..K {
            self.d[k] += o.d[k];
        }
        self
    }
}

impl<const K: usize> Sub for Dual<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for k in 0..K {
            self.d[k] -= o.d[k];
        }
        self
    }
}

impl<const K: usize> Mul for Dual<K> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; K];
        for k in 0..K {
            d[k] = self.d[k] * o.v + self.v * o.d[k];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl<const K: usize> Div for Dual<K> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let v = self.v / o.v;
        let mut d = [0.0; K];
        for k in 0..K {
            d[k] = (self.d[k] - v * o.d[k]) / o.v;
        }
        Dual { v, d }
    }
}

impl<const K: usize> Neg for Dual<K> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for k in 0..K {
            self.d[k] = -self.d[k];
        }
        self
    }
}
