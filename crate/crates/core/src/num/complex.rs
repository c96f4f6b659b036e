//! Complex numbers over `BigFloat`.

use super::bigfloat::BigFloat;
use std::fmt;

#[derive(Clone)]
pub struct Complex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl Complex {
    pub fn new(re: BigFloat, im: BigFloat) -> Self {
        Complex { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Complex { re: BigFloat::zero(prec), im: BigFloat::zero(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Complex { re: BigFloat::from_u64(1, prec), im: BigFloat::zero(prec) }
    }

    pub fn i(prec: u32) -> Self {
        Complex { re: BigFloat::zero(prec), im: BigFloat::from_u64(1, prec) }
    }

    pub fn from_real(re: BigFloat) -> Self {
        let prec = re.prec();
        Complex { re, im: BigFloat::zero(prec) }
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Complex { re: BigFloat::from_i64(v, prec), im: BigFloat::zero(prec) }
    }

    pub fn from_f64s(re: f64, im: f64, prec: u32) -> Self {
        Complex { re: BigFloat::from_f64(re, prec), im: BigFloat::from_f64(im, prec) }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn rounded(&self, prec: u32) -> Self {
        Complex { re: self.re.rounded(prec), im: self.im.rounded(prec) }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Complex { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn neg(&self) -> Self {
        Complex { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn add(&self, o: &Self) -> Self {
        Complex { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Complex { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Complex {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn mul_real(&self, r: &BigFloat) -> Self {
        Complex { re: self.re.mul(r), im: self.im.mul(r) }
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        Complex { re: self.re.mul_i64(k), im: self.im.mul_i64(k) }
    }

    /// Multiply by i.
    pub fn mul_i(&self) -> Self {
        Complex { re: self.im.neg(), im: self.re.clone() }
    }

    pub fn norm_sqr(&self) -> BigFloat {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn abs(&self) -> BigFloat {
        self.norm_sqr().sqrt()
    }

    pub fn div(&self, o: &Self) -> Self {
        let d = o.norm_sqr();
        assert!(!d.is_zero(), "complex division by zero");
        let n = self.mul(&o.conj());
        Complex { re: n.re.div(&d), im: n.im.div(&d) }
    }

    pub fn recip(&self) -> Self {
        Complex::one(self.prec()).div(self)
    }

    pub fn powi(&self, k: i64) -> Self {
        if k == 0 {
            return Complex::one(self.prec());
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut base = self.clone();
        let mut acc: Option<Complex> = None;
        let mut k = k as u64;
        loop {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.mul(&base);
        }
        acc.unwrap()
    }

    /// Principal square root (branch cut on the negative real axis, with
    /// sqrt of a positive real being positive real).
    pub fn sqrt(&self) -> Self {
        let prec = self.prec();
        if self.is_exact_zero() {
            return Complex::zero(prec);
        }
        if self.im.is_zero() {
            if !self.re.is_negative() {
                return Complex { re: self.re.sqrt(), im: BigFloat::zero(prec) };
            }
            return Complex { re: BigFloat::zero(prec), im: self.re.neg().sqrt() };
        }
        let r = self.abs();
        // w = sqrt((r + |re|)/2); then match signs
        let w = r.add(&self.re.abs()).scale2(-1).sqrt();
        if !self.re.is_negative() {
            let im = self.im.scale2(-1).div(&w);
            Complex { re: w, im }
        } else {
            let im_mag = w;
            let re = self.im.abs().scale2(-1).div(&im_mag);
            if self.im.is_negative() {
                Complex { re, im: im_mag.neg() }
            } else {
                Complex { re, im: im_mag }
            }
        }
    }

    /// max(|re|, |im|): cheap magnitude proxy used in tolerance tests.
    pub fn mag_inf(&self) -> BigFloat {
        let a = self.re.abs();
        let b = self.im.abs();
        if a >= b {
            a
        } else {
            b
        }
    }

    /// True when max(|re|, |im|) < tol.
    pub fn below_tol(&self, tol: &BigFloat) -> bool {
        self.mag_inf() < *tol
    }

    pub fn to_f64s(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// JSON-facing pair of decimal strings.
    pub fn to_decimal_pair(&self) -> (String, String) {
        (self.re.to_decimal_string(), self.im.to_decimal_string())
    }
}

impl PartialEq for Complex {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re && self.im == other.im
    }
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} {} {}i)",
            self.re.to_decimal_string_digits(12),
            if self.im.is_negative() { "-" } else { "+" },
            self.im.abs().to_decimal_string_digits(12)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_field_ops() {
        let a = Complex::from_f64s(1.0, 2.0, 128);
        let b = Complex::from_f64s(-0.5, 3.0, 128);
        let p = a.mul(&b);
        assert_eq!(p.to_f64s(), (-6.5, 2.0));
        let q = p.div(&b);
        let d = q.sub(&a);
        assert!(d.mag_inf() < BigFloat::from_pow2(1, -100, 128));
    }

    #[test]
    fn principal_sqrt() {
        let z = Complex::from_f64s(0.0, 2.0, 128);
        let s = z.sqrt(); // 1 + i
        assert!(s.sub(&Complex::from_f64s(1.0, 1.0, 128)).mag_inf()
            < BigFloat::from_pow2(1, -100, 128));
        let w = Complex::from_f64s(-4.0, 0.0, 128).sqrt();
        assert!(w.sub(&Complex::from_f64s(0.0, 2.0, 128)).mag_inf()
            < BigFloat::from_pow2(1, -100, 128));
        // sqrt(z)^2 = z on a generic value
        let g = Complex::from_f64s(-1.25, -0.75, 192);
        let r = g.sqrt().powi(2).sub(&g);
        assert!(r.mag_inf() < BigFloat::from_pow2(1, -150, 192));
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let z = Complex::from_f64s(0.4, 0.9, 128);
        let mut acc = Complex::one(128);
        for _ in 0..7 {
            acc = acc.mul(&z);
        }
        assert!(z.powi(7).sub(&acc).mag_inf() < BigFloat::from_pow2(1, -110, 128));
        let inv = z.powi(-3).mul(&z.powi(3)).sub(&Complex::one(128));
        assert!(inv.mag_inf() < BigFloat::from_pow2(1, -110, 128));
    }
}
