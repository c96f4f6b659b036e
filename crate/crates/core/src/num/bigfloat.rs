//! Arbitrary-precision binary floating point on u64 limbs.
//!
//! A `BigFloat` is `sign * mant * 2^exp` where `mant` is a little-endian
//! limb vector. Addition, subtraction and multiplication are computed
//! exactly and then rounded to the working precision (round to nearest,
//! ties to even); the `_exact` variants skip the final rounding, which is
//! what the small-divisor code relies on to dodge catastrophic
//! cancellation. Precision is a per-value target in bits; binary
//! operations use the max of the two operands.
//!
//! There are no NaNs or infinities. Division and square root of zero
//! panic; callers gate on tolerance tests first.

use num_bigint::BigUint;
use num_integer::Roots;
use smallvec::{smallvec, SmallVec};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use std::sync::OnceLock;

pub type Limbs = SmallVec<[u64; 10]>;

/// Minimum supported working precision in bits.
pub const MIN_PREC: u32 = 64;

fn bitlen(l: &[u64]) -> u64 {
    match l.last() {
        None => 0,
        Some(&top) => 64 * (l.len() as u64 - 1) + (64 - top.leading_zeros() as u64),
    }
}

fn trim_high(l: &mut Limbs) {
    while let Some(&0) = l.last() {
        l.pop();
    }
}

fn cmp_limbs(a: &[u64], b: &[u64]) -> Ordering {
    if a.len() != b.len() {
        return a.len().cmp(&b.len());
    }
    for i in (0..a.len()).rev() {
        if a[i] != b[i] {
            return a[i].cmp(&b[i]);
        }
    }
    Ordering::Equal
}

fn shl_limbs(l: &[u64], k: u64) -> Limbs {
    if l.is_empty() {
        return smallvec![];
    }
    let limb_shift = (k / 64) as usize;
    let bit_shift = (k % 64) as u32;
    let mut out: Limbs = smallvec![0; limb_shift];
    if bit_shift == 0 {
        out.extend_from_slice(l);
    } else {
        let mut carry = 0u64;
        for &w in l {
            out.push((w << bit_shift) | carry);
            carry = w >> (64 - bit_shift);
        }
        if carry != 0 {
            out.push(carry);
        }
    }
    out
}

/// Shift right by `k` bits; second value reports whether any dropped bit was set.
fn shr_limbs_sticky(l: &[u64], k: u64) -> (Limbs, bool) {
    let total = bitlen(l);
    if k >= total {
        return (smallvec![], !l.is_empty() && l.iter().any(|&w| w != 0));
    }
    let limb_shift = (k / 64) as usize;
    let bit_shift = (k % 64) as u32;
    let mut sticky = l[..limb_shift].iter().any(|&w| w != 0);
    let mut out: Limbs = smallvec![];
    if bit_shift == 0 {
        out.extend_from_slice(&l[limb_shift..]);
    } else {
        sticky |= l[limb_shift] & ((1u64 << bit_shift) - 1) != 0;
        let n = l.len();
        for i in limb_shift..n {
            let lo = l[i] >> bit_shift;
            let hi = if i + 1 < n { l[i + 1] << (64 - bit_shift) } else { 0 };
            out.push(lo | hi);
        }
    }
    trim_high(&mut out);
    (out, sticky)
}

fn add_limbs(a: &[u64], b: &[u64]) -> Limbs {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out: Limbs = smallvec![];
    out.reserve(long.len() + 1);
    let mut carry = 0u64;
    for i in 0..long.len() {
        let s = short.get(i).copied().unwrap_or(0);
        let (x, c1) = long[i].overflowing_add(s);
        let (y, c2) = x.overflowing_add(carry);
        out.push(y);
        carry = (c1 as u64) + (c2 as u64);
    }
    if carry != 0 {
        out.push(carry);
    }
    out
}

/// a - b, requires a >= b.
fn sub_limbs(a: &[u64], b: &[u64]) -> Limbs {
    debug_assert!(cmp_limbs(a, b) != Ordering::Less);
    let mut out: Limbs = smallvec![];
    out.reserve(a.len());
    let mut borrow = 0u64;
    for i in 0..a.len() {
        let s = b.get(i).copied().unwrap_or(0);
        let (x, b1) = a[i].overflowing_sub(s);
        let (y, b2) = x.overflowing_sub(borrow);
        out.push(y);
        borrow = (b1 as u64) + (b2 as u64);
    }
    debug_assert_eq!(borrow, 0);
    trim_high(&mut out);
    out
}

fn mul_limbs(a: &[u64], b: &[u64]) -> Limbs {
    if a.is_empty() || b.is_empty() {
        return smallvec![];
    }
    let mut out: Limbs = smallvec![0; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let mut carry = 0u128;
        for (j, &bj) in b.iter().enumerate() {
            let cur = out[i + j] as u128 + (ai as u128) * (bj as u128) + carry;
            out[i + j] = cur as u64;
            carry = cur >> 64;
        }
        let mut k = i + b.len();
        while carry != 0 {
            let cur = out[k] as u128 + carry;
            out[k] = cur as u64;
            carry = cur >> 64;
            k += 1;
        }
    }
    trim_high(&mut out);
    out
}

fn limbs_to_biguint(l: &[u64]) -> BigUint {
    BigUint::from_slice(
        &l.iter()
            .flat_map(|&w| [w as u32, (w >> 32) as u32])
            .collect::<Vec<_>>(),
    )
}

fn biguint_to_limbs(n: &BigUint) -> Limbs {
    let d = n.to_u64_digits();
    let mut out: Limbs = smallvec![];
    out.extend_from_slice(&d);
    out
}

#[derive(Clone)]
pub struct BigFloat {
    sign: i8,
    exp: i64,
    mant: Limbs,
    prec: u32,
}

impl BigFloat {
    pub fn zero(prec: u32) -> Self {
        BigFloat { sign: 0, exp: 0, mant: smallvec![], prec }
    }

    pub fn from_u64(v: u64, prec: u32) -> Self {
        if v == 0 {
            return Self::zero(prec);
        }
        let mut f = BigFloat { sign: 1, exp: 0, mant: smallvec![v], prec };
        f.normalize();
        f
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        let mut f = Self::from_u64(v.unsigned_abs(), prec);
        if v < 0 {
            f.sign = -1;
        }
        f
    }

    pub fn from_biguint(n: &BigUint, prec: u32) -> Self {
        let mant = biguint_to_limbs(n);
        if mant.is_empty() {
            return Self::zero(prec);
        }
        let mut f = BigFloat { sign: 1, exp: 0, mant, prec };
        f.normalize();
        f.round_in_place();
        f
    }

    /// Exact conversion from f64 (finite values only).
    pub fn from_f64(v: f64, prec: u32) -> Self {
        assert!(v.is_finite(), "BigFloat::from_f64 on non-finite value");
        if v == 0.0 {
            return Self::zero(prec);
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let mut f = BigFloat { sign, exp, mant: smallvec![mant], prec };
        f.normalize();
        f
    }

    /// `m * 2^exp` for `m` given as u64.
    pub fn from_pow2(m: u64, exp: i64, prec: u32) -> Self {
        let mut f = Self::from_u64(m, prec);
        if f.sign != 0 {
            f.exp += exp;
        }
        f
    }

    fn normalize(&mut self) {
        trim_high(&mut self.mant);
        if self.mant.is_empty() {
            self.sign = 0;
            self.exp = 0;
            return;
        }
        // Drop low zero limbs to keep huge powers of two compact.
        let mut drop = 0;
        while drop < self.mant.len() && self.mant[drop] == 0 {
            drop += 1;
        }
        if drop > 0 {
            self.mant.drain(..drop);
            self.exp += 64 * drop as i64;
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Current mantissa length in bits (may exceed `prec` after exact ops).
    pub fn mant_bits(&self) -> u64 {
        bitlen(&self.mant)
    }

    /// Top 256 bits of the mantissa, left-justified (leading bit at
    /// position 255). Value must be nonzero.
    pub fn top_limbs_256(&self) -> [u64; 4] {
        debug_assert!(self.sign != 0);
        let l = bitlen(&self.mant);
        let aligned = if l >= 256 {
            shr_limbs_sticky(&self.mant, l - 256).0
        } else {
            shl_limbs(&self.mant, 256 - l)
        };
        let mut out = [0u64; 4];
        for (i, w) in aligned.iter().take(4).enumerate() {
            out[i] = *w;
        }
        out
    }

    /// Build from raw little-endian limbs: value = sign * limbs * 2^exp.
    pub fn from_raw_limbs(sign: i8, exp: i64, limbs: &[u64], prec: u32) -> Self {
        let mut mant: Limbs = smallvec![];
        mant.extend_from_slice(limbs);
        let mut f = BigFloat { sign, exp, mant, prec };
        f.normalize();
        if f.mant.is_empty() {
            f.sign = 0;
        }
        f
    }

    pub fn with_prec(mut self, prec: u32) -> Self {
        self.prec = prec;
        self.round_in_place();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign < 0
    }

    pub fn signum(&self) -> i8 {
        self.sign
    }

    /// Exponent of the leading bit: value in [2^k, 2^{k+1}) has exponent2 k.
    /// Returns i64::MIN for zero.
    pub fn exponent2(&self) -> i64 {
        if self.sign == 0 {
            return i64::MIN;
        }
        self.exp + bitlen(&self.mant) as i64 - 1
    }

    fn round_in_place(&mut self) {
        if self.sign == 0 {
            return;
        }
        let len = bitlen(&self.mant);
        let prec = self.prec as u64;
        if len <= prec {
            return;
        }
        let drop = len - prec;
        let (mut kept, sticky_all) = shr_limbs_sticky(&self.mant, drop);
        // Guard bit = highest dropped bit.
        let (with_guard, _) = shr_limbs_sticky(&self.mant, drop - 1);
        let guard = !with_guard.is_empty() && with_guard[0] & 1 == 1;
        let sticky = sticky_all && {
            // sticky excluding the guard bit: any dropped bit below guard
            let re = shl_limbs(&with_guard, drop - 1);
            cmp_limbs(&re, &self.mant) != Ordering::Equal
        };
        let lsb_odd = !kept.is_empty() && kept[0] & 1 == 1;
        if guard && (sticky || lsb_odd) {
            kept = add_limbs(&kept, &[1]);
        }
        self.mant = kept;
        self.exp += drop as i64;
        self.normalize();
    }

    pub fn rounded(&self, prec: u32) -> Self {
        let mut f = self.clone();
        f.prec = prec;
        f.round_in_place();
        f
    }

    pub fn neg(&self) -> Self {
        let mut f = self.clone();
        f.sign = -f.sign;
        f
    }

    pub fn abs(&self) -> Self {
        let mut f = self.clone();
        if f.sign < 0 {
            f.sign = 1;
        }
        f
    }

    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let ea = self.exponent2();
        let eb = other.exponent2();
        if ea != eb {
            return ea.cmp(&eb);
        }
        // Same leading-bit exponent; align to a common exponent and compare.
        let shift = self.exp - other.exp;
        if shift >= 0 {
            let a = shl_limbs(&self.mant, shift as u64);
            cmp_limbs(&a, &other.mant)
        } else {
            let b = shl_limbs(&other.mant, (-shift) as u64);
            cmp_limbs(&self.mant, &b)
        }
    }

    fn add_signed(&self, other: &Self, subtract: bool, exact: bool) -> Self {
        let prec = self.prec.max(other.prec);
        let bsign = if subtract { -other.sign } else { other.sign };
        if self.sign == 0 {
            let mut r = other.clone();
            r.sign = bsign;
            r.prec = prec;
            if !exact {
                r.round_in_place();
            }
            return r;
        }
        if bsign == 0 {
            let mut r = self.clone();
            r.prec = prec;
            if !exact {
                r.round_in_place();
            }
            return r;
        }
        // Shortcut when magnitudes are wildly different (faithful rounding).
        if !exact {
            let ea = self.exponent2();
            let eb = other.exponent2();
            if ea > eb + prec as i64 + 4 {
                let mut r = self.clone();
                r.prec = prec;
                r.round_in_place();
                return r;
            }
            if eb > ea + prec as i64 + 4 {
                let mut r = other.clone();
                r.sign = bsign;
                r.prec = prec;
                r.round_in_place();
                return r;
            }
        }
        // Align to common exponent min(exp_a, exp_b).
        let e = self.exp.min(other.exp);
        let a = shl_limbs(&self.mant, (self.exp - e) as u64);
        let b = shl_limbs(&other.mant, (other.exp - e) as u64);
        let (sign, mant) = if self.sign == bsign {
            (self.sign, add_limbs(&a, &b))
        } else {
            match cmp_limbs(&a, &b) {
                Ordering::Equal => {
                    return Self::zero(prec);
                }
                Ordering::Greater => (self.sign, sub_limbs(&a, &b)),
                Ordering::Less => (bsign, sub_limbs(&b, &a)),
            }
        };
        let mut r = BigFloat { sign, exp: e, mant, prec };
        r.normalize();
        if !exact {
            r.round_in_place();
        }
        r
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_signed(other, false, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_signed(other, true, false)
    }

    pub fn add_exact(&self, other: &Self) -> Self {
        self.add_signed(other, false, true)
    }

    pub fn sub_exact(&self, other: &Self) -> Self {
        self.add_signed(other, true, true)
    }

    fn mul_impl(&self, other: &Self, exact: bool) -> Self {
        let prec = self.prec.max(other.prec);
        if self.sign == 0 || other.sign == 0 {
            return Self::zero(prec);
        }
        let mut r = BigFloat {
            sign: self.sign * other.sign,
            exp: self.exp + other.exp,
            mant: mul_limbs(&self.mant, &other.mant),
            prec,
        };
        r.normalize();
        if !exact {
            r.round_in_place();
        }
        r
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_impl(other, false)
    }

    pub fn mul_exact(&self, other: &Self) -> Self {
        self.mul_impl(other, true)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self.mul(&Self::from_i64(k, self.prec))
    }

    pub fn div(&self, other: &Self) -> Self {
        let prec = self.prec.max(other.prec);
        assert!(other.sign != 0, "BigFloat division by zero");
        if self.sign == 0 {
            return Self::zero(prec);
        }
        // Quotient to prec + 64 bits, then round with sticky from remainder.
        let la = bitlen(&self.mant) as i64;
        let lb = bitlen(&other.mant) as i64;
        let want = prec as i64 + 64;
        // shift numerator so quotient has ~want+1 bits
        let k = (lb - la + want).max(0) as u64;
        let num = limbs_to_biguint(&shl_limbs(&self.mant, k));
        let den = limbs_to_biguint(&other.mant);
        let q = &num / &den;
        let r = &num - &q * &den;
        let mut mant = biguint_to_limbs(&q);
        let sticky = r != BigUint::default();
        if sticky {
            // Encode sticky by odd-ising the low bit region: append a sticky
            // bit below via one extra shift.
            mant = shl_limbs(&mant, 1);
            mant = add_limbs(&mant, &[1]);
        } else {
            mant = shl_limbs(&mant, 1);
        }
        let mut out = BigFloat {
            sign: self.sign * other.sign,
            exp: self.exp - other.exp - k as i64 - 1,
            mant,
            prec,
        };
        out.normalize();
        out.round_in_place();
        out
    }

    pub fn recip(&self) -> Self {
        Self::from_u64(1, self.prec).div(self)
    }

    /// Integer power with exact arithmetic (no intermediate rounding).
    pub fn powi_exact(&self, k: i64) -> Self {
        if k == 0 {
            return Self::from_u64(1, self.prec);
        }
        if k < 0 {
            return self.powi_exact(-k).recip();
        }
        let mut base = self.clone();
        let mut acc: Option<BigFloat> = None;
        let mut k = k as u64;
        loop {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul_exact(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.mul_exact(&base);
        }
        acc.unwrap()
    }

    /// Integer power with rounding at working precision each step.
    pub fn powi(&self, k: i64) -> Self {
        if k == 0 {
            return Self::from_u64(1, self.prec);
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut base = self.clone();
        let mut acc: Option<BigFloat> = None;
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

    /// Square root (value must be >= 0).
    pub fn sqrt(&self) -> Self {
        assert!(self.sign >= 0, "BigFloat::sqrt of negative value");
        if self.sign == 0 {
            return self.clone();
        }
        let prec = self.prec;
        let want = 2 * (prec as u64 + 64);
        let la = bitlen(&self.mant);
        let mut k = want.saturating_sub(la);
        // Exponent of the shifted value must be even so sqrt is exact on 2^exp.
        if (self.exp - k as i64) % 2 != 0 {
            k += 1;
        }
        let n = limbs_to_biguint(&shl_limbs(&self.mant, k));
        let s = n.sqrt();
        let exact = &s * &s == n;
        let mut mant = biguint_to_limbs(&s);
        mant = shl_limbs(&mant, 1);
        if !exact {
            mant = add_limbs(&mant, &[1]);
        }
        let mut out = BigFloat {
            sign: 1,
            exp: (self.exp - k as i64) / 2 - 1,
            mant,
            prec,
        };
        out.normalize();
        out.round_in_place();
        out
    }

    /// Multiply by 2^k.
    pub fn scale2(&self, k: i64) -> Self {
        let mut f = self.clone();
        if f.sign != 0 {
            f.exp += k;
        }
        f
    }

    /// Truncate toward zero to an integer; also reports whether the value was integral.
    pub fn trunc_biguint(&self) -> (BigUint, bool) {
        if self.sign == 0 {
            return (BigUint::default(), true);
        }
        if self.exp >= 0 {
            return (limbs_to_biguint(&shl_limbs(&self.mant, self.exp as u64)), true);
        }
        let (kept, sticky) = shr_limbs_sticky(&self.mant, (-self.exp) as u64);
        (limbs_to_biguint(&kept), !sticky)
    }

    /// Nearest integer as (sign, BigUint).
    pub fn round_int(&self) -> (i8, BigUint) {
        if self.sign == 0 {
            return (0, BigUint::default());
        }
        let half = BigFloat::from_pow2(1, -1, self.prec);
        let shifted = self.abs().add_exact(&half);
        let (n, _) = shifted.trunc_biguint();
        if n == BigUint::default() {
            (0, n)
        } else {
            (self.sign, n)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let l = bitlen(&self.mant);
        let (top, _) = shr_limbs_sticky(&self.mant, l.saturating_sub(53));
        let m = top.first().copied().unwrap_or(0) as f64;
        let e = self.exp + l.saturating_sub(53) as i64;
        let v = m * 2f64.powi(e.clamp(-2000, 2000) as i32);
        if self.sign < 0 {
            -v
        } else {
            v
        }
    }

    /// log2 of |value| as f64 (diagnostics; exact enough for reports).
    pub fn log2_abs(&self) -> f64 {
        if self.sign == 0 {
            return f64::NEG_INFINITY;
        }
        let l = bitlen(&self.mant);
        let (top, _) = shr_limbs_sticky(&self.mant, l.saturating_sub(53));
        let m = top.first().copied().unwrap_or(1) as f64;
        m.log2() + (self.exp + l.saturating_sub(53) as i64) as f64
    }

    // ------------------------------------------------------------------
    // Decimal conversion
    // ------------------------------------------------------------------

    /// Number of significant decimal digits guaranteeing bit-exact round trip.
    pub fn roundtrip_digits(prec: u32) -> usize {
        (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 3
    }

    /// Scientific-notation decimal string with round-trip digits.
    pub fn to_decimal_string(&self) -> String {
        self.to_decimal_string_digits(Self::roundtrip_digits(self.prec))
    }

    pub fn to_decimal_string_digits(&self, digits: usize) -> String {
        if self.sign == 0 {
            return "0".to_string();
        }
        let digits = digits.max(1);
        // decimal exponent estimate of leading digit
        let log10 = (self.exponent2() as f64) * std::f64::consts::LOG10_2;
        let mut dec_exp = log10.floor() as i64;
        loop {
            // scaled = |self| * 10^(digits-1-dec_exp), want in [10^{digits-1}, 10^digits)
            let shift = digits as i64 - 1 - dec_exp;
            let (int, exact) = self.abs_scale_pow10(shift);
            let lo = BigUint::from(10u32).pow((digits - 1) as u32);
            let hi = &lo * 10u32;
            if int < lo {
                dec_exp -= 1;
                continue;
            }
            if int >= hi {
                dec_exp += 1;
                continue;
            }
            let s = int.to_string();
            let _ = exact;
            let mut out = String::new();
            if self.sign < 0 {
                out.push('-');
            }
            out.push_str(&s[..1]);
            if s.len() > 1 {
                out.push('.');
                out.push_str(&s[1..]);
            }
            out.push('e');
            out.push_str(&dec_exp.to_string());
            return out;
        }
    }

    /// |self| * 10^shift rounded to nearest integer; bool = exact.
    fn abs_scale_pow10(&self, shift: i64) -> (BigUint, bool) {
        // |self| = mant * 2^exp
        let m = limbs_to_biguint(&self.mant);
        let five = BigUint::from(5u32);
        // value * 10^shift = mant * 5^shift * 2^(exp+shift)
        let mut num = m;
        let mut den = BigUint::from(1u32);
        if shift >= 0 {
            num *= five.pow(shift as u32);
        } else {
            den *= five.pow((-shift) as u32);
        }
        let e2 = self.exp + shift;
        if e2 >= 0 {
            num <<= e2 as u64;
        } else {
            den <<= (-e2) as u64;
        }
        // round num/den to nearest (ties away; fine for printing with guard digits)
        let q = &num / &den;
        let r = &num - &q * &den;
        let exact = r == BigUint::default();
        let two_r = &r * 2u32;
        if two_r >= den {
            (q + 1u32, exact)
        } else {
            (q, exact)
        }
    }

    /// Parse a decimal string: `[+-]ddd[.ddd][eE[+-]xx]`, correctly rounded to `prec`.
    pub fn parse_decimal(s: &str, prec: u32) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty numeric string".into());
        }
        let (sign, rest) = match s.as_bytes()[0] {
            b'+' => (1i8, &s[1..]),
            b'-' => (-1i8, &s[1..]),
            _ => (1i8, s),
        };
        let (mant_str, exp_str) = match rest.find(['e', 'E']) {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let mut digits = String::new();
        let mut frac_len = 0i64;
        let mut seen_dot = false;
        for c in mant_str.chars() {
            match c {
                '0'..='9' => {
                    digits.push(c);
                    if seen_dot {
                        frac_len += 1;
                    }
                }
                '.' if !seen_dot => seen_dot = true,
                _ => return Err(format!("invalid numeric string: {s:?}")),
            }
        }
        if digits.is_empty() {
            return Err(format!("invalid numeric string: {s:?}"));
        }
        let e10: i64 = if exp_str.is_empty() {
            0
        } else {
            exp_str.parse().map_err(|_| format!("invalid exponent in {s:?}"))?
        };
        let m: BigUint = digits.parse().map_err(|_| format!("invalid digits in {s:?}"))?;
        if m == BigUint::default() {
            return Ok(Self::zero(prec));
        }
        let shift = e10 - frac_len; // value = m * 10^shift
        let five = BigUint::from(5u32);
        // value = m * 5^shift * 2^shift
        let (num, den) = if shift >= 0 {
            (m * five.pow(shift as u32), BigUint::from(1u32))
        } else {
            (m, five.pow((-shift) as u32))
        };
        // quotient to prec+64 bits with sticky
        let ln = num.bits() as i64;
        let ld = den.bits() as i64;
        let k = (ld - ln + prec as i64 + 64).max(0) as u64;
        let shifted = num << k;
        let q = &shifted / &den;
        let r = &shifted - &q * &den;
        let mut mant = biguint_to_limbs(&q);
        mant = shl_limbs(&mant, 1);
        if r != BigUint::default() {
            mant = add_limbs(&mant, &[1]);
        }
        let mut out = BigFloat {
            sign,
            exp: shift - k as i64 - 1,
            mant,
            prec,
        };
        out.normalize();
        out.round_in_place();
        Ok(out)
    }

    // ------------------------------------------------------------------
    // Transcendentals (real)
    // ------------------------------------------------------------------

    /// Natural log of 2 at the given precision (cached).
    pub fn ln2(prec: u32) -> Self {
        static CACHE: OnceLock<Mutex<HashMap<u32, BigFloat>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(v) = cache.lock().unwrap().get(&prec) {
            return v.clone();
        }
        // ln 2 = 2 atanh(1/3) = 2 sum_{k>=0} 3^{-(2k+1)} / (2k+1)
        let work = prec + 64;
        let one = BigFloat::from_u64(1, work);
        let nine_inv = one.div(&BigFloat::from_u64(9, work));
        let mut pow = one.div(&BigFloat::from_u64(3, work));
        let mut sum = BigFloat::zero(work);
        let mut k = 0u64;
        loop {
            let term = pow.div(&BigFloat::from_u64(2 * k + 1, work));
            if term.is_zero() || term.exponent2() < -(work as i64) {
                break;
            }
            sum = sum.add(&term);
            pow = pow.mul(&nine_inv);
            k += 1;
        }
        let out = sum.scale2(1).rounded(prec);
        cache.lock().unwrap().insert(prec, out.clone());
        out
    }

    /// exp(self), computed with argument reduction and squaring.
    pub fn exp(&self) -> Self {
        let prec = self.prec;
        if self.sign == 0 {
            return Self::from_u64(1, prec);
        }
        let work = prec + 96 + 2 * (64 - (prec as u64).leading_zeros());
        let x = self.rounded(work);
        // x = k ln2 + r, |r| <= ln2/2
        let ln2 = Self::ln2(work);
        let kf = x.div(&ln2);
        let (ks, kn) = kf.round_int();
        let k_big = Self::from_biguint(&kn, work);
        let k_signed = if ks < 0 { k_big.neg() } else { k_big };
        let r = x.sub(&k_signed.mul(&ln2));
        // scale down: r2 = r / 2^m
        let m = ((work as f64).sqrt() as i64).clamp(8, 256);
        let r2 = r.scale2(-m);
        // Taylor of exp(r2)
        let one = Self::from_u64(1, work);
        let mut term = one.clone();
        let mut sum = one.clone();
        let mut n = 1u64;
        loop {
            term = term.mul(&r2).div(&Self::from_u64(n, work));
            if term.is_zero() || term.exponent2() < -(work as i64 + 8) {
                break;
            }
            sum = sum.add(&term);
            n += 1;
        }
        // square m times
        let mut y = sum;
        for _ in 0..m {
            y = y.mul(&y);
        }
        // multiply by 2^k
        let kk: i64 = {
            let (s, n) = (ks, kn);
            let v: i64 = n.try_into().unwrap_or(i64::MAX / 2);
            if s < 0 {
                -v
            } else {
                v
            }
        };
        y.scale2(kk).rounded(prec)
    }

    /// exp(self) - 1, accurate for tiny arguments.
    pub fn expm1(&self) -> Self {
        let prec = self.prec;
        if self.sign == 0 {
            return Self::zero(prec);
        }
        if self.exponent2() > -4 {
            return self.exp().sub(&Self::from_u64(1, prec));
        }
        let work = prec + 64;
        let x = self.rounded(work);
        let mut term = x.clone();
        let mut sum = x.clone();
        let mut n = 2u64;
        loop {
            term = term.mul(&x).div(&Self::from_u64(n, work));
            if term.is_zero() || term.exponent2() < sum.exponent2() - (work as i64 + 8) {
                break;
            }
            sum = sum.add(&term);
            n += 1;
        }
        sum.rounded(prec)
    }

    /// Natural logarithm (value must be > 0).
    pub fn ln(&self) -> Self {
        assert!(self.sign > 0, "BigFloat::ln of non-positive value");
        let prec = self.prec;
        let work = prec + 96;
        // self = m * 2^e with m in [1,2)
        let e = self.exponent2();
        let m = self.rounded(work).scale2(-e);
        // ln m = 2 atanh((m-1)/(m+1)), |t|<=1/3
        let one = Self::from_u64(1, work);
        let t = m.sub(&one).div(&m.add(&one));
        let t2 = t.mul(&t);
        let mut pow = t.clone();
        let mut sum = BigFloat::zero(work);
        let mut k = 0u64;
        loop {
            let term = pow.div(&Self::from_u64(2 * k + 1, work));
            if term.is_zero() || term.exponent2() < -(work as i64 + 8) {
                break;
            }
            sum = sum.add(&term);
            pow = pow.mul(&t2);
            k += 1;
        }
        let ln_m = sum.scale2(1);
        ln_m.add(&Self::ln2(work).mul_i64(e)).rounded(prec)
    }
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.sign != other.sign {
            return Some(self.sign.cmp(&other.sign));
        }
        if self.sign == 0 {
            return Some(Ordering::Equal);
        }
        let mag = self.cmp_abs(other);
        Some(if self.sign > 0 { mag } else { mag.reverse() })
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigFloat({})", self.to_decimal_string_digits(20))
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn bf(v: f64) -> BigFloat {
        BigFloat::from_f64(v, P)
    }

    #[test]
    fn add_sub_mul_small() {
        let a = bf(1.5);
        let b = bf(2.25);
        assert_eq!(a.add(&b).to_f64(), 3.75);
        assert_eq!(a.sub(&b).to_f64(), -0.75);
        assert_eq!(a.mul(&b).to_f64(), 3.375);
        assert_eq!(a.div(&b).to_f64(), 1.5 / 2.25);
    }

    #[test]
    fn exact_cancellation() {
        let a = BigFloat::from_pow2(1, 100, P); // 2^100
        let b = BigFloat::from_pow2(1, -100, P); // 2^-100
        let s = a.add_exact(&b);
        let d = s.sub_exact(&a);
        assert_eq!(d.partial_cmp(&b), Some(Ordering::Equal));
    }

    #[test]
    fn rounding_nearest_even() {
        // 0b1011 rounded to 3 bits = 0b1010 wait: value 11, prec 3 -> keep 101|1 ->
        // guard=1, sticky=0, lsb=1 (odd) -> round up -> 110 -> 12.
        let a = BigFloat::from_u64(11, 3);
        assert_eq!(a.rounded(3).to_f64(), 12.0);
        // value 13 = 110|1: guard=1 sticky=0 lsb=0 -> stays 110 -> 12
        let b = BigFloat::from_u64(13, 3);
        assert_eq!(b.rounded(3).to_f64(), 12.0);
        // value 14 = 111|0 -> exact in 3 bits? 14=1110: 4 bits; drop 1: guard=0 -> 111 -> 14
        let c = BigFloat::from_u64(14, 3);
        assert_eq!(c.rounded(3).to_f64(), 14.0);
    }

    #[test]
    fn sqrt2_matches_reference() {
        let two = BigFloat::from_u64(2, 256);
        let s = two.sqrt();
        // 50 digits of sqrt(2)
        let r = BigFloat::parse_decimal("1.4142135623730950488016887242096980785696718753769", 256)
            .unwrap();
        let err = s.sub(&r).abs();
        assert!(err < BigFloat::from_pow2(1, -160, 256), "err = {err:?}");
        // sqrt of exact square
        let nine = BigFloat::from_u64(9, 256);
        assert_eq!(nine.sqrt().to_f64(), 3.0);
    }

    #[test]
    fn exp_and_ln_reference() {
        let one = BigFloat::from_u64(1, 320);
        let e = one.exp();
        let r = BigFloat::parse_decimal(
            "2.71828182845904523536028747135266249775724709369995957496696762772407663035354759",
            320,
        )
        .unwrap();
        assert!(e.sub(&r).abs() < BigFloat::from_pow2(1, -260, 320));
        let l = e.ln();
        assert!(l.sub(&one).abs() < BigFloat::from_pow2(1, -250, 320));
        let ln2 = BigFloat::ln2(320);
        let r2 = BigFloat::parse_decimal(
            "0.693147180559945309417232121458176568075500134360255254120680009493393621969694716",
            320,
        )
        .unwrap();
        assert!(ln2.sub(&r2).abs() < BigFloat::from_pow2(1, -270, 320));
    }

    #[test]
    fn expm1_tiny() {
        // expm1(2^-200) = 2^-200 + 2^-401 + ...
        let x = BigFloat::from_pow2(1, -200, 256);
        let y = x.expm1();
        let d = y.sub_exact(&x);
        // leading correction term is x^2/2 = 2^-401
        assert!(d.exponent2() <= -400 && d.exponent2() >= -402, "{}", d.exponent2());
    }

    #[test]
    fn decimal_roundtrip() {
        for s in ["1.25", "-3.0e10", "7.3890560989306495e0", "1e-30", "0.0001234"] {
            let a = BigFloat::parse_decimal(s, 192).unwrap();
            let t = a.to_decimal_string();
            let b = BigFloat::parse_decimal(&t, 192).unwrap();
            assert_eq!(a.partial_cmp(&b), Some(Ordering::Equal), "{s} -> {t}");
        }
    }

    #[test]
    fn huge_exponent_arithmetic() {
        // (2^-52000)^2 representable and comparable
        let t = BigFloat::from_pow2(3, -52000, 128);
        let sq = t.mul(&t);
        assert_eq!(sq.exponent2(), -104000 + 3); // 9 * 2^-104000 ~ 2^-103996.83
        assert!(sq < t);
        let sum = t.add(&sq);
        assert_eq!(sum.partial_cmp(&t), Some(Ordering::Equal)); // below ulp
    }

    #[test]
    fn powi_exact_no_cancellation() {
        // mu = 1 + 2^-100 exactly; mu^2 - (1 + 2^-99 + 2^-200) == 0 exactly
        let mu = BigFloat::from_u64(1, 128).add_exact(&BigFloat::from_pow2(1, -100, 128));
        let sq = mu.powi_exact(2);
        let expect = BigFloat::from_u64(1, 128)
            .add_exact(&BigFloat::from_pow2(1, -99, 128))
            .add_exact(&BigFloat::from_pow2(1, -200, 128));
        assert!(sq.sub_exact(&expect).is_zero());
    }

    #[test]
    fn round_int_works() {
        assert_eq!(bf(2.5).round_int().1, BigUint::from(3u32)); // ties away is fine here
        assert_eq!(bf(-2.4).round_int(), (-1, BigUint::from(2u32)));
        assert_eq!(bf(0.2).round_int().1, BigUint::default());
    }
}
