//! Fixed-width 256-bit floating point on stack arrays for the dense series
//! kernels. Mantissas are left-justified (top bit set), arithmetic is
//! faithful (truncating) rather than correctly rounded; relative error per
//! operation is below 2^-255, far inside every tolerance used by the
//! pipelines. No allocation anywhere.

use super::bigfloat::BigFloat;

pub const LIMBS: usize = 4;

/// value = sign * 0.mantissa * 2^exp with mantissa in [2^255, 2^256).
#[derive(Clone, Copy)]
pub struct P256 {
    pub m: [u64; LIMBS],
    pub e: i64,
    pub s: i8,
}

impl P256 {
    pub const ZERO: P256 = P256 { m: [0; LIMBS], e: 0, s: 0 };

    pub fn is_zero(&self) -> bool {
        self.s == 0
    }

    pub fn from_bigfloat(x: &BigFloat) -> Self {
        if x.is_zero() {
            return Self::ZERO;
        }
        let m = x.top_limbs_256();
        P256 { m, e: x.exponent2() + 1, s: x.signum() }
    }

    pub fn to_bigfloat(&self, prec: u32) -> BigFloat {
        if self.s == 0 {
            return BigFloat::zero(prec);
        }
        BigFloat::from_raw_limbs(self.s, self.e - 256, &self.m, prec)
    }

    pub fn neg(&self) -> Self {
        P256 { m: self.m, e: self.e, s: -self.s }
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.s == 0 || o.s == 0 {
            return Self::ZERO;
        }
        // 4x4 multiply keeping the high half; the three lowest partial
        // products only influence the result below the kept window by a
        // couple of ulps, so they are skipped (faithful arithmetic).
        let a = &self.m;
        let b = &o.m;
        let mut p = [0u64; 2 * LIMBS];
        for i in 0..LIMBS {
            let mut carry = 0u128;
            let ai = a[i] as u128;
            let j0 = if i == 0 { 2 } else if i == 1 { 1 } else { 0 };
            for j in j0..LIMBS {
                let cur = p[i + j] as u128 + ai * (b[j] as u128) + carry;
                p[i + j] = cur as u64;
                carry = cur >> 64;
            }
            p[i + LIMBS] = carry as u64;
        }
        let mut e = self.e + o.e;
        let mut m = [p[4], p[5], p[6], p[7]];
        if m[3] >> 63 == 0 {
            // shift left by one, pulling in the top dropped bit
            m[3] = (m[3] << 1) | (m[2] >> 63);
            m[2] = (m[2] << 1) | (m[1] >> 63);
            m[1] = (m[1] << 1) | (m[0] >> 63);
            m[0] = (m[0] << 1) | (p[3] >> 63);
            e -= 1;
        }
        P256 { m, e, s: self.s * o.s }
    }

    #[inline(always)]
    fn shr_into(m: &[u64; LIMBS], k: i64) -> [u64; LIMBS] {
        if k <= 0 {
            return *m;
        }
        if k >= 256 {
            return [0; LIMBS];
        }
        let bits = (k % 64) as u32;
        // branch on whole-limb shift; funnel shifts within each arm
        let f = |hi: u64, lo: u64| -> u64 {
            if bits == 0 {
                lo
            } else {
                (lo >> bits) | (hi << (64 - bits))
            }
        };
        match k / 64 {
            0 => [f(m[1], m[0]), f(m[2], m[1]), f(m[3], m[2]), m[3] >> bits],
            1 => [f(m[2], m[1]), f(m[3], m[2]), m[3] >> bits, 0],
            2 => [f(m[3], m[2]), m[3] >> bits, 0, 0],
            _ => [m[3] >> bits, 0, 0, 0],
        }
    }

    fn mag_add(a: &[u64; LIMBS], b: &[u64; LIMBS]) -> ([u64; LIMBS], bool) {
        let mut out = [0u64; LIMBS];
        let mut carry = 0u64;
        for i in 0..LIMBS {
            let (x, c1) = a[i].overflowing_add(b[i]);
            let (y, c2) = x.overflowing_add(carry);
            out[i] = y;
            carry = (c1 as u64) + (c2 as u64);
        }
        (out, carry != 0)
    }

    fn mag_sub(a: &[u64; LIMBS], b: &[u64; LIMBS]) -> [u64; LIMBS] {
        let mut out = [0u64; LIMBS];
        let mut borrow = 0u64;
        for i in 0..LIMBS {
            let (x, b1) = a[i].overflowing_sub(b[i]);
            let (y, b2) = x.overflowing_sub(borrow);
            out[i] = y;
            borrow = (b1 as u64) + (b2 as u64);
        }
        out
    }

    fn mag_cmp(a: &[u64; LIMBS], b: &[u64; LIMBS]) -> std::cmp::Ordering {
        for i in (0..LIMBS).rev() {
            if a[i] != b[i] {
                return a[i].cmp(&b[i]);
            }
        }
        std::cmp::Ordering::Equal
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.s == 0 {
            return *o;
        }
        if o.s == 0 {
            return *self;
        }
        let (hi, lo) = if self.e >= o.e { (self, o) } else { (o, self) };
        let shift = hi.e - lo.e;
        if shift >= 256 {
            return *hi;
        }
        let lo_m = Self::shr_into(&lo.m, shift);
        if hi.s == lo.s {
            let (mut m, carry) = Self::mag_add(&hi.m, &lo_m);
            let mut e = hi.e;
            if carry {
                m = Self::shr_into(&m, 1);
                m[3] |= 1 << 63;
                e += 1;
            }
            P256 { m, e, s: hi.s }
        } else {
            match Self::mag_cmp(&hi.m, &lo_m) {
                std::cmp::Ordering::Equal => Self::ZERO,
                std::cmp::Ordering::Greater => {
                    Self::normalized(Self::mag_sub(&hi.m, &lo_m), hi.e, hi.s)
                }
                std::cmp::Ordering::Less => {
                    Self::normalized(Self::mag_sub(&lo_m, &hi.m), hi.e, lo.s)
                }
            }
        }
    }

    #[inline(always)]
    fn normalized(mut m: [u64; LIMBS], mut e: i64, s: i8) -> Self {
        let mut top = LIMBS;
        while top > 0 && m[top - 1] == 0 {
            top -= 1;
        }
        if top == 0 {
            return Self::ZERO;
        }
        let lz = m[top - 1].leading_zeros() as i64 + 64 * (LIMBS - top) as i64;
        if lz > 0 {
            let bits = (lz % 64) as u32;
            let g = |hi: u64, lo: u64| -> u64 {
                if bits == 0 {
                    hi
                } else {
                    (hi << bits) | (lo >> (64 - bits))
                }
            };
            m = match lz / 64 {
                0 => [m[0] << bits, g(m[1], m[0]), g(m[2], m[1]), g(m[3], m[2])],
                1 => [0, m[0] << bits, g(m[1], m[0]), g(m[2], m[1])],
                2 => [0, 0, m[0] << bits, g(m[1], m[0])],
                _ => [0, 0, 0, m[0] << bits],
            };
            e -= lz;
        }
        P256 { m, e, s }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
}

/// Complex number over P256.
#[derive(Clone, Copy)]
pub struct PCplx {
    pub re: P256,
    pub im: P256,
}

impl PCplx {
    pub const ZERO: PCplx = PCplx { re: P256::ZERO, im: P256::ZERO };

    pub fn from_complex(c: &crate::num::Complex) -> Self {
        PCplx { re: P256::from_bigfloat(&c.re), im: P256::from_bigfloat(&c.im) }
    }

    pub fn to_complex(&self, prec: u32) -> crate::num::Complex {
        crate::num::Complex::new(self.re.to_bigfloat(prec), self.im.to_bigfloat(prec))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// self += a * b
    #[inline]
    pub fn mac(&mut self, a: &PCplx, b: &PCplx) {
        let rr = a.re.mul(&b.re);
        let ii = a.im.mul(&b.im);
        let ri = a.re.mul(&b.im);
        let ir = a.im.mul(&b.re);
        self.re = self.re.add(&rr).sub(&ii);
        self.im = self.im.add(&ri).add(&ir);
    }

    pub fn add(&self, o: &PCplx) -> PCplx {
        PCplx { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{BigFloat, Complex};

    fn roundtrip(v: f64) -> f64 {
        let b = BigFloat::from_f64(v, 256);
        P256::from_bigfloat(&b).to_bigfloat(256).to_f64()
    }

    #[test]
    fn pack_roundtrip() {
        for v in [1.0, -2.5, 0.001953125, 123456789.75, -1e-30] {
            assert_eq!(roundtrip(v), v);
        }
    }

    #[test]
    fn arithmetic_matches_bigfloat() {
        let prec = 256;
        let cases = [(1.5, -2.25), (3.0e10, 7.0e-11), (-0.123, 0.456), (1.0, 1.0)];
        for (x, y) in cases {
            let a = BigFloat::from_f64(x, prec);
            let b = BigFloat::from_f64(y, prec);
            let pa = P256::from_bigfloat(&a);
            let pb = P256::from_bigfloat(&b);
            let m = pa.mul(&pb).to_bigfloat(prec);
            let s = pa.add(&pb).to_bigfloat(prec);
            let d = pa.sub(&pb).to_bigfloat(prec);
            assert!(m.sub(&a.mul(&b)).abs() < BigFloat::from_pow2(1, -200, prec).mul(&m.abs().add(&BigFloat::from_u64(1, prec))));
            assert!(s.sub(&a.add(&b)).abs() < BigFloat::from_pow2(1, -200, prec));
            assert!(d.sub(&a.sub(&b)).abs() < BigFloat::from_pow2(1, -200, prec));
        }
    }

    #[test]
    fn cancellation_and_zero() {
        let a = P256::from_bigfloat(&BigFloat::from_f64(5.5, 256));
        let z = a.sub(&a);
        assert!(z.is_zero());
        let w = a.add(&P256::ZERO);
        assert_eq!(w.to_bigfloat(256).to_f64(), 5.5);
    }

    #[test]
    fn complex_mac_matches() {
        let prec = 256;
        let a = Complex::from_f64s(1.25, -0.5, prec);
        let b = Complex::from_f64s(0.75, 2.0, prec);
        let mut acc = PCplx::ZERO;
        acc.mac(&PCplx::from_complex(&a), &PCplx::from_complex(&b));
        acc.mac(&PCplx::from_complex(&b), &PCplx::from_complex(&b));
        let want = a.mul(&b).add(&b.mul(&b));
        let got = acc.to_complex(prec);
        assert!(got.sub(&want).mag_inf() < BigFloat::from_pow2(1, -200, prec));
    }
}
