//! Sparse truncated multivariate formal power series.

use super::multiindex::{indices_up_to, monomial_count, MultiIndex};
use crate::num::{BigFloat, Complex, Ctx};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;

/// A formal power series in `n` variables, truncated (inclusively) at total
/// degree `deg`. Only coefficients with magnitude >= the context zero
/// tolerance are stored; indices are iterated in graded-lexicographic order.
#[derive(Clone)]
pub struct FormalSeries {
    pub n: usize,
    pub deg: u32,
    terms: BTreeMap<MultiIndex, Complex>,
    pub ctx: Ctx,
}

impl FormalSeries {
    pub fn zero(ctx: &Ctx, n: usize, deg: u32) -> Self {
        FormalSeries { n, deg, terms: BTreeMap::new(), ctx: ctx.clone() }
    }

    pub fn constant(ctx: &Ctx, n: usize, deg: u32, c: Complex) -> Self {
        let mut s = Self::zero(ctx, n, deg);
        s.set_coef(MultiIndex::zero(n), c);
        s
    }

    pub fn one(ctx: &Ctx, n: usize, deg: u32) -> Self {
        Self::constant(ctx, n, deg, ctx.one())
    }

    pub fn monomial(ctx: &Ctx, n: usize, deg: u32, idx: MultiIndex, c: Complex) -> Self {
        let mut s = Self::zero(ctx, n, deg);
        s.set_coef(idx, c);
        s
    }

    /// Coordinate variable x_j as a series.
    pub fn variable(ctx: &Ctx, n: usize, deg: u32, j: usize) -> Self {
        Self::monomial(ctx, n, deg, MultiIndex::unit(n, j), ctx.one())
    }

    pub fn set_coef(&mut self, idx: MultiIndex, c: Complex) {
        debug_assert_eq!(idx.n(), self.n);
        if idx.degree() > self.deg || c.below_tol(&self.ctx.zero_tol) {
            self.terms.remove(&idx);
        } else {
            self.terms.insert(idx, c);
        }
    }

    pub fn add_to_coef(&mut self, idx: MultiIndex, c: &Complex) {
        let cur = self.coef(&idx);
        self.set_coef(idx, cur.add(c));
    }

    pub fn coef(&self, idx: &MultiIndex) -> Complex {
        self.terms.get(idx).cloned().unwrap_or_else(|| self.ctx.zero())
    }

    pub fn constant_term(&self) -> Complex {
        self.coef(&MultiIndex::zero(self.n))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter_terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex)> {
        self.terms.iter()
    }

    /// Lowest total degree of a stored term (None when zero).
    pub fn min_order(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.degree()).min()
    }

    pub fn max_coef_mag(&self) -> BigFloat {
        let mut m = BigFloat::zero(self.ctx.prec);
        for c in self.terms.values() {
            let a = c.mag_inf();
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Largest coefficient magnitude per total degree (norm profile).
    pub fn norm_profile(&self) -> Vec<BigFloat> {
        let mut out = vec![BigFloat::zero(self.ctx.prec); self.deg as usize + 1];
        for (k, c) in &self.terms {
            let d = k.degree() as usize;
            let a = c.mag_inf();
            if a > out[d] {
                out[d] = a;
            }
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&Complex) -> Complex) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, self.deg);
        for (k, c) in &self.terms {
            out.set_coef(k.clone(), f(c));
        }
        out
    }

    /// Series with conjugated coefficients.
    pub fn conj_coeffs(&self) -> Self {
        self.map_coeffs(|c| c.conj())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| c.neg())
    }

    pub fn scale(&self, a: &Complex) -> Self {
        self.map_coeffs(|c| c.mul(a))
    }

    pub fn truncated(&self, deg: u32) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, deg.min(self.deg));
        for (k, c) in &self.terms {
            if k.degree() <= out.deg {
                out.terms.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// Copy retaining declared truncation degree but dropping terms of
    /// total degree > k (a jet viewed inside the same precision window).
    pub fn jet(&self, k: u32) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, self.deg);
        for (idx, c) in &self.terms {
            if idx.degree() <= k {
                out.terms.insert(idx.clone(), c.clone());
            }
        }
        out
    }

    pub fn homogeneous_part(&self, k: u32) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, self.deg);
        for (idx, c) in &self.terms {
            if idx.degree() == k {
                out.terms.insert(idx.clone(), c.clone());
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        self.add_sub(o, false)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add_sub(o, true)
    }

    fn add_sub(&self, o: &Self, sub: bool) -> Self {
        assert_eq!(self.n, o.n, "variable-count mismatch");
        let deg = self.deg.min(o.deg);
        let mut out = Self::zero(&self.ctx, self.n, deg);
        for (k, c) in &self.terms {
            if k.degree() <= deg {
                out.terms.insert(k.clone(), c.clone());
            }
        }
        for (k, c) in &o.terms {
            if k.degree() > deg {
                continue;
            }
            let cur = out.coef(k);
            let v = if sub { cur.sub(c) } else { cur.add(c) };
            out.set_coef(k.clone(), v);
        }
        out
    }

    /// Multiply by a single monomial (exponent shift).
    pub fn mul_monomial(&self, idx: &MultiIndex, c: &Complex) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, self.deg);
        for (k, v) in &self.terms {
            let nk = k.add(idx);
            if nk.degree() <= self.deg {
                out.set_coef(nk, v.mul(c));
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n, "variable-count mismatch");
        let deg = self.deg.min(o.deg);
        let work = self.terms.len().saturating_mul(o.terms.len());
        if work > 40_000 && self.n <= 8 && deg <= 255 && self.ctx.prec <= 256 {
            self.mul_via_hot(o, deg)
        } else {
            self.mul_sparse(o, deg)
        }
    }

    fn mul_via_hot(&self, o: &Self, deg: u32) -> Self {
        use super::hot::{mul_hot_into, DenseAcc, HotSeries, RankTable};
        let rt = RankTable::new(self.n, deg);
        let mut acc = DenseAcc::new(rt.count);
        let a = HotSeries::from_series(self, &rt);
        let b = HotSeries::from_series(o, &rt);
        let mut out = HotSeries::default();
        mul_hot_into(&a, &b, &rt, &mut acc, &mut out);
        out.to_series(&self.ctx, &rt)
    }

    fn mul_sparse(&self, o: &Self, deg: u32) -> Self {
        let mut acc: BTreeMap<MultiIndex, Complex> = BTreeMap::new();
        for (ka, ca) in &self.terms {
            let da = ka.degree();
            if da > deg {
                continue;
            }
            let budget = deg - da;
            for (kb, cb) in &o.terms {
                if kb.degree() > budget {
                    continue;
                }
                let k = ka.add(kb);
                let p = ca.mul(cb);
                match acc.get_mut(&k) {
                    Some(v) => *v = v.add(&p),
                    None => {
                        acc.insert(k, p);
                    }
                }
            }
        }
        let mut out = Self::zero(&self.ctx, self.n, deg);
        for (k, v) in acc {
            out.set_coef(k, v);
        }
        out
    }

    /// Partial derivative with respect to variable `j`. The result is
    /// trusted one degree lower than the input.
    pub fn derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(&self.ctx, self.n, self.deg.saturating_sub(1));
        for (k, c) in &self.terms {
            if let Some(kd) = k.decremented(j) {
                if kd.degree() <= out.deg {
                    out.set_coef(kd, c.mul_i64(k.get(j) as i64));
                }
            }
        }
        out
    }

    /// Evaluate at a numeric point.
    pub fn eval(&self, x: &[Complex]) -> Complex {
        assert_eq!(x.len(), self.n);
        let mut acc = self.ctx.zero();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for (j, e) in k.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&x[j].powi(e as i64));
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    /// Coefficient-wise maximum distance to another series.
    pub fn distance(&self, o: &Self) -> BigFloat {
        self.sub(o).max_coef_mag()
    }

    pub fn approx_eq(&self, o: &Self, tol: &BigFloat) -> bool {
        self.distance(o) < *tol
    }

    /// Geometric-series inverse 1/self; constant term must be nonzero.
    pub fn invert_unit(&self) -> Self {
        let c0 = self.constant_term();
        assert!(
            !self.ctx.is_zero(&c0),
            "series inversion requires a unit constant term"
        );
        let inv0 = c0.recip();
        // u = 1 - self/c0 has positive valuation; 1/self = (1/c0) sum u^k
        let u = Self::one(&self.ctx, self.n, self.deg).sub(&self.scale(&inv0));
        let mut acc = Self::one(&self.ctx, self.n, self.deg);
        let mut pw = Self::one(&self.ctx, self.n, self.deg);
        for _ in 0..self.deg {
            pw = pw.mul(&u);
            if pw.is_zero() {
                break;
            }
            acc = acc.add(&pw);
        }
        acc.scale(&inv0)
    }

    /// Square root with the principal branch at the (nonzero) constant term.
    pub fn sqrt_unit(&self) -> Self {
        let c0 = self.constant_term();
        assert!(!self.ctx.is_zero(&c0), "series sqrt requires a unit constant term");
        let r0 = c0.sqrt();
        // self = c0 (1 + u), sqrt = r0 * sum binom(1/2,k) u^k
        let u = self.scale(&c0.recip()).sub(&Self::one(&self.ctx, self.n, self.deg));
        let mut acc = Self::one(&self.ctx, self.n, self.deg);
        let mut pw = Self::one(&self.ctx, self.n, self.deg);
        let mut coef = self.ctx.one();
        let two = self.ctx.real(2.0);
        for k in 0..self.deg as i64 {
            // binom(1/2, k+1) = binom(1/2,k) * (1/2 - k)/(k+1)
            let num = self.ctx.one().sub(&two.mul_i64(k));
            coef = coef.mul(&num).div(&two.mul_i64(k + 1));
            pw = pw.mul(&u);
            if pw.is_zero() {
                break;
            }
            acc = acc.add(&pw.scale(&coef));
        }
        acc.scale(&r0)
    }

    /// log(self / c0): logarithm of a unit series normalized by its constant
    /// term, so the result has zero constant term.
    pub fn log_unit_normalized(&self) -> Self {
        let c0 = self.constant_term();
        assert!(!self.ctx.is_zero(&c0), "series log requires a unit constant term");
        let u = self.scale(&c0.recip()).sub(&Self::one(&self.ctx, self.n, self.deg));
        let mut acc = Self::zero(&self.ctx, self.n, self.deg);
        let mut pw = Self::one(&self.ctx, self.n, self.deg);
        for k in 1..=self.deg as i64 {
            pw = pw.mul(&u);
            if pw.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pw.scale(&self.ctx.one().mul_i64(sign).div(&self.ctx.one().mul_i64(k))));
        }
        acc
    }

    /// exp of a series with zero constant term.
    pub fn exp_nilpotent(&self) -> Self {
        assert!(
            self.constant_term().below_tol(&self.ctx.zero_tol),
            "series exp requires zero constant term"
        );
        let mut acc = Self::one(&self.ctx, self.n, self.deg);
        let mut term = Self::one(&self.ctx, self.n, self.deg);
        for k in 1..=self.deg as i64 {
            term = term.mul(self).scale(&self.ctx.one().mul_i64(k).recip());
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
        }
        acc
    }
}

impl fmt::Debug for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormalSeries(n={}, deg={},", self.n, self.deg)?;
        let mut first = true;
        for (k, c) in self.terms.iter().take(12) {
            if !first {
                write!(f, " +")?;
            }
            write!(f, " {:?}*x^{:?}", c, k)?;
            first = false;
        }
        if self.terms.len() > 12 {
            write!(f, " ... ({} terms)", self.terms.len())?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        Ctx::default_ctx()
    }

    #[test]
    fn difference_of_squares() {
        let c = ctx();
        // (1+x)(1-x) at deg 2 = 1 - x^2
        let one = FormalSeries::one(&c, 1, 2);
        let x = FormalSeries::variable(&c, 1, 2, 0);
        let p = one.add(&x).mul(&one.sub(&x));
        let mut expect = FormalSeries::one(&c, 1, 2);
        expect.set_coef(MultiIndex::from_slice(&[2]), c.real(-1.0));
        assert!(p.approx_eq(&expect, &c.zero_tol));
    }

    #[test]
    fn truncation_drops_high_terms() {
        let c = ctx();
        let x = FormalSeries::variable(&c, 1, 1, 0);
        let p = x.mul(&x);
        assert!(p.is_zero());
    }

    #[test]
    fn binomial_expansion_oracle() {
        let c = ctx();
        // (x+y)^2 at deg 2 = x^2 + 2xy + y^2 (hand expansion)
        let x = FormalSeries::variable(&c, 2, 2, 0);
        let y = FormalSeries::variable(&c, 2, 2, 1);
        let s = x.add(&y);
        let p = s.mul(&s);
        let mut expect = FormalSeries::zero(&c, 2, 2);
        expect.set_coef(MultiIndex::from_slice(&[2, 0]), c.real(1.0));
        expect.set_coef(MultiIndex::from_slice(&[1, 1]), c.real(2.0));
        expect.set_coef(MultiIndex::from_slice(&[0, 2]), c.real(1.0));
        assert!(p.approx_eq(&expect, &c.zero_tol));
    }

    #[test]
    fn dense_and_sparse_mul_agree() {
        let c = Ctx::new(128, -100);
        let n = 3;
        let deg = 6;
        let mut a = FormalSeries::zero(&c, n, deg);
        let mut b = FormalSeries::zero(&c, n, deg);
        let mut v = 1i64;
        for (i, idx) in indices_up_to(n, deg).into_iter().enumerate() {
            v = (v * 31 + 17) % 1009;
            a.set_coef(idx.clone(), c.cplx(v as f64 / 7.0, (i % 5) as f64));
            b.set_coef(idx, c.cplx(((v * 3) % 11) as f64, -(v as f64) / 13.0));
        }
        let s = a.mul_sparse(&b, deg);
        let d = a.mul_via_hot(&b, deg);
        let diff = s.sub(&d).max_coef_mag();
        assert!(diff < BigFloat::from_pow2(1, -60, 128), "diff {diff:?}");
    }

    #[test]
    fn unit_inverse_sqrt_log_exp() {
        let c = ctx();
        let x = FormalSeries::variable(&c, 1, 6, 0);
        let u = FormalSeries::one(&c, 1, 6).add(&x); // 1+x
        let inv = u.invert_unit();
        assert!(u.mul(&inv).approx_eq(&FormalSeries::one(&c, 1, 6), &c.guard_band()));
        let sq = u.sqrt_unit();
        assert!(sq.mul(&sq).approx_eq(&u, &c.guard_band()));
        let lg = u.log_unit_normalized();
        assert!(lg.exp_nilpotent().approx_eq(&u, &c.guard_band()));
    }

}
