//! Double-double arithmetic for evaluating cardinal functions whose expansion
//! coefficients are many orders of magnitude larger than the values they produce.

use std::ops::{Add, Mul, Neg, Sub};

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free product `a * b = p + e`.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    #[cfg(target_feature = "fma")]
    let e = a.mul_add(b, -p);
    // Without hardware FMA `mul_add` is a library call; Dekker's splitting
    // is exact as well and vectorizes.
    #[cfg(not(target_feature = "fma"))]
    let e = {
        let (ah, al) = split(a);
        let (bh, bl) = split(b);
        ((ah * bh - p) + ah * bl + al * bh) + al * bl
    };
    (p, e)
}

#[cfg(not(target_feature = "fma"))]
#[inline]
fn split(a: f64) -> (f64, f64) {
    const FACTOR: f64 = 134_217_729.0; // 2^27 + 1
    let t = FACTOR * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        quick_two_sum(hi, lo)
    }

    /// Exact difference `a - b`.
    pub fn diff(a: f64, b: f64) -> Self {
        let (s, e) = two_sum(a, -b);
        Dd { hi: s, lo: e }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 { -self } else { self }
    }

    pub fn scale(self, s: f64) -> Self {
        let (p, e) = two_prod(self.hi, s);
        quick_two_sum(p, e + self.lo * s)
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        let (p, e) = two_prod(s, s);
        quick_two_sum(s, ((self.hi - p) - e + self.lo) / (2.0 * s))
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Dd::from(1.0);
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        quick_two_sum(s, e + self.lo + o.lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

/// Compensated accumulator: sums as if in twice the working precision.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dot2 {
    sum: f64,
    comp: f64,
}

impl Dot2 {
    #[inline]
    pub fn add(&mut self, a: f64) {
        let (s, q) = two_sum(self.sum, a);
        self.sum = s;
        self.comp += q;
    }

    #[inline]
    pub fn add_prod(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.comp += e;
    }

    #[inline]
    pub fn add_dd_prod(&mut self, a: Dd, b: Dd) {
        let (p, e) = two_prod(a.hi, b.hi);
        self.add(p);
        self.comp += e + (a.hi * b.lo + a.lo * b.hi);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn value_dd(&self) -> Dd {
        quick_two_sum(self.sum, self.comp)
    }
}

/// Row vector accumulator `Σ_k a_k·(hi_k + lo_k)` over matrix rows, stored
/// as separate sum and compensation arrays so the inner loop vectorizes.
#[derive(Clone, Debug)]
pub struct RowAccumulator {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl RowAccumulator {
    pub fn new(len: usize) -> Self {
        Self { sum: vec![0.0; len], comp: vec![0.0; len] }
    }

    #[inline]
    pub fn add_scaled(&mut self, a: Dd, hi: &[f64], lo: &[f64]) {
        for (((s, c), &h), &l) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(hi).zip(lo) {
            let (p, e) = two_prod(a.hi, h);
            let (t, q) = two_sum(*s, p);
            *s = t;
            *c += q + e + (a.hi * l + a.lo * h);
        }
    }

    #[inline]
    pub fn add_at(&mut self, j: usize, v: f64) {
        let (t, q) = two_sum(self.sum[j], v);
        self.sum[j] = t;
        self.comp[j] += q;
    }

    pub fn values_into(&self, out: &mut [f64]) {
        for ((o, s), c) in out.iter_mut().zip(&self.sum).zip(&self.comp) {
            *o = s + c;
        }
    }

    pub fn values_dd(&self) -> Vec<Dd> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| quick_two_sum(*s, *c)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sum.len()];
        self.values_into(&mut out);
        out
    }
}

/// Dot product accurate to about the working precision even under heavy cancellation.
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Dot2::default();
    for (x, y) in a.iter().zip(b) {
        acc.add_prod(*x, *y);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_is_exact() {
        let (s, e) = two_sum(1.0, 1e-20);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-20);
    }

    #[test]
    fn dot2_survives_cancellation() {
        let a = [1e16, 1.0, -1e16];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dot2(&a, &b), 1.0);
        assert_eq!(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>(), 0.0);
    }

    #[test]
    fn sqrt_and_powers() {
        let two = Dd::from(2.0);
        let r = two.sqrt();
        let back = r * r - two;
        assert!(back.to_f64().abs() < 1e-30);
        let x = Dd::diff(0.1, 0.7);
        let p = x.powi(5).to_f64();
        assert!((p - (0.1f64 - 0.7).powi(5)).abs() < 1e-15);
    }
}
