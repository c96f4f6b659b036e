//! Flat, rank-indexed series representation for the dense composition and
//! multiplication workloads. Exponents are packed into a u64 (8 bits per
//! variable) so monomial products are single integer additions; graded-lex
//! ranks come from hockey-stick binomial sums in O(n). Coefficients ride
//! in the fixed 256-bit stack format end to end; term buffers are pooled
//! and the accumulator is drained by a linear scan of the valuation
//! window, so rank order comes out for free.

use super::multiindex::{indices_up_to, monomial_count, MultiIndex};
use super::series::FormalSeries;
use crate::num::packed::PCplx;
use crate::num::Ctx;
use std::sync::atomic::{AtomicU64, Ordering};

/// Pair counter for kernel diagnostics (enabled by tests/benches only).
pub static PAIR_COUNT: AtomicU64 = AtomicU64::new(0);

/// Rank/pack tables for monomials of n variables, total degree <= deg.
pub struct RankTable {
    pub n: usize,
    pub deg: u32,
    pub count: usize,
    binom: Vec<u64>,
    bstride: usize,
    /// packed exponents per rank
    pub packed: Vec<u64>,
    /// total degree per rank
    pub degree: Vec<u8>,
    /// first rank of each total degree (len deg+2; last = count)
    pub offset: Vec<u32>,
    idx_of_rank: Vec<MultiIndex>,
}

impl RankTable {
    pub fn new(n: usize, deg: u32) -> Self {
        assert!(n <= 8 && deg <= 255, "rank table limited to 8 variables, degree 255");
        let amax = n + deg as usize + 2;
        let bstride = amax + 1;
        let mut binom = vec![0u64; (amax + 1) * bstride];
        for a in 0..=amax {
            binom[a * bstride] = 1;
            for b in 1..=a {
                binom[a * bstride + b] = binom[(a - 1) * bstride + b - 1]
                    + if b <= a - 1 { binom[(a - 1) * bstride + b] } else { 0 };
            }
        }
        let idx_of_rank = indices_up_to(n, deg);
        let packed: Vec<u64> = idx_of_rank.iter().map(|m| Self::pack(m)).collect();
        let degree: Vec<u8> = idx_of_rank.iter().map(|m| m.degree() as u8).collect();
        let mut offset = vec![0u32; deg as usize + 2];
        for d in 1..=deg as usize {
            // count of monomials with degree < d
            let mut c: u128 = 1;
            for i in 1..=n as u128 {
                c = c * (d as u128 - 1 + i) / i;
            }
            offset[d] = c as u32;
        }
        offset[deg as usize + 1] = monomial_count(n, deg) as u32;
        RankTable {
            n,
            deg,
            count: monomial_count(n, deg),
            binom,
            bstride,
            packed,
            degree,
            offset,
            idx_of_rank,
        }
    }

    pub fn pack(m: &MultiIndex) -> u64 {
        let mut v = 0u64;
        for (i, e) in m.iter().enumerate() {
            v |= (e as u64) << (8 * i);
        }
        v
    }

    pub fn unpack_rank(&self, r: u32) -> &MultiIndex {
        &self.idx_of_rank[r as usize]
    }

    #[inline(always)]
    fn c(&self, a: i64, b: i64) -> u64 {
        if b < 0 || a < 0 || b > a {
            0
        } else {
            unsafe { *self.binom.get_unchecked(a as usize * self.bstride + b as usize) }
        }
    }

    /// Graded-lex rank of a packed exponent vector of total degree `d`.
    #[inline]
    pub fn rank_packed(&self, p: u64, d: u32) -> u32 {
        let n = self.n as i64;
        let mut r = self.c(d as i64 - 1 + n, n);
        let mut rem = d as i64;
        for j in 0..self.n - 1 {
            let e = ((p >> (8 * j)) & 0xff) as i64;
            let m = n - j as i64 - 1;
            // sum_{t<e} C(rem-t+m-1, m-1) = C(rem+m, m) - C(rem-e+m, m)
            r += self.c(rem + m, m) - self.c(rem - e + m, m);
            rem -= e;
        }
        r as u32
    }
}

/// A series as parallel rank-sorted arrays (structure of arrays).
#[derive(Clone, Default)]
pub struct HotSeries {
    pub rank: Vec<u32>,
    pub deg: Vec<u8>,
    pub packed: Vec<u64>,
    pub coef: Vec<PCplx>,
}

impl HotSeries {
    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    /// Lowest total degree present (None if empty).
    pub fn valuation(&self) -> Option<u32> {
        self.deg.first().map(|&d| d as u32)
    }

    pub fn clear(&mut self) {
        self.rank.clear();
        self.deg.clear();
        self.packed.clear();
        self.coef.clear();
    }

    fn push(&mut self, rank: u32, deg: u8, packed: u64, coef: PCplx) {
        self.rank.push(rank);
        self.deg.push(deg);
        self.packed.push(packed);
        self.coef.push(coef);
    }

    pub fn from_series(s: &FormalSeries, rt: &RankTable) -> Self {
        let mut items: Vec<(u32, u8, u64, PCplx)> = s
            .iter_terms()
            .filter(|(k, _)| k.degree() <= rt.deg)
            .map(|(k, c)| {
                let p = RankTable::pack(k);
                let d = k.degree();
                (rt.rank_packed(p, d), d as u8, p, PCplx::from_complex(c))
            })
            .collect();
        items.sort_by_key(|t| t.0);
        let mut out = HotSeries::default();
        for (r, d, p, c) in items {
            out.push(r, d, p, c);
        }
        out
    }

    pub fn to_series(&self, ctx: &Ctx, rt: &RankTable) -> FormalSeries {
        let mut s = FormalSeries::zero(ctx, rt.n, rt.deg);
        for (r, c) in self.rank.iter().zip(&self.coef) {
            s.set_coef(rt.unpack_rank(*r).clone(), c.to_complex(ctx.prec).rounded(ctx.prec));
        }
        s
    }

    pub fn one(ctx: &Ctx) -> Self {
        let mut out = HotSeries::default();
        out.push(0, 0, 0, PCplx::from_complex(&ctx.one()));
        out
    }
}

/// Reusable dense accumulator over ranks.
pub struct DenseAcc {
    pub slots: Vec<PCplx>,
    pub live: Vec<bool>,
}

impl DenseAcc {
    pub fn new(count: usize) -> Self {
        DenseAcc { slots: vec![PCplx::ZERO; count], live: vec![false; count] }
    }

    #[inline(always)]
    pub fn mac(&mut self, rank: u32, a: &PCplx, b: &PCplx) {
        let i = rank as usize;
        if !self.live[i] {
            self.live[i] = true;
            self.slots[i] = PCplx::ZERO;
        }
        self.slots[i].mac(a, b);
    }

    #[inline]
    pub fn add(&mut self, rank: u32, c: &PCplx) {
        let i = rank as usize;
        if !self.live[i] {
            self.live[i] = true;
            self.slots[i] = *c;
        } else {
            self.slots[i] = self.slots[i].add(c);
        }
    }

    /// Scan ranks in [from, to) into `out` (rank order is the scan order),
    /// clearing liveness.
    pub fn drain_window(&mut self, from: u32, to: u32, rt: &RankTable, out: &mut HotSeries) {
        out.clear();
        for r in from as usize..to as usize {
            if self.live[r] {
                self.live[r] = false;
                let c = self.slots[r];
                if !c.is_zero() {
                    out.push(r as u32, rt.degree[r], rt.packed[r], c);
                }
            }
        }
    }

    /// Drain everything live (used for final output assembly).
    pub fn drain_all(&mut self, rt: &RankTable, out: &mut HotSeries) {
        self.drain_window(0, self.slots.len() as u32, rt, out);
    }
}

/// Start index of each total-degree slice of a rank-sorted series
/// (length deg+2, last entry = len).
fn deg_starts(s: &HotSeries, deg: u32) -> Vec<usize> {
    let mut starts = vec![s.len(); deg as usize + 2];
    let mut d = 0usize;
    for (i, &sd) in s.deg.iter().enumerate() {
        while d <= sd as usize {
            starts[d] = i;
            d += 1;
        }
    }
    starts[deg as usize + 1] = s.len();
    for j in (0..=deg as usize).rev() {
        if starts[j] > starts[j + 1] {
            starts[j] = starts[j + 1];
        }
    }
    starts
}

/// out = a * b truncated at rt.deg, blocked by output degree so the
/// accumulator window and the b-slice stay cache-resident.
pub fn mul_hot_into(
    a: &HotSeries,
    b: &HotSeries,
    rt: &RankTable,
    acc: &mut DenseAcc,
    out: &mut HotSeries,
) {
    let deg = rt.deg;
    let (va, vb) = match (a.valuation(), b.valuation()) {
        (Some(x), Some(y)) => (x, y),
        _ => {
            out.clear();
            return;
        }
    };
    if va + vb > deg {
        out.clear();
        return;
    }
    let sa = deg_starts(a, deg);
    let sb = deg_starts(b, deg);
    for dout in (va + vb)..=deg {
        for da in va..=(dout - vb) {
            let db = dout - da;
            let (a0, a1) = (sa[da as usize], sa[da as usize + 1]);
            let (b0, b1) = (sb[db as usize], sb[db as usize + 1]);
            if b1 > b0 {
                PAIR_COUNT.fetch_add(((a1 - a0) * (b1 - b0)) as u64, Ordering::Relaxed);
            }
            for ia in a0..a1 {
                let pa = unsafe { *a.packed.get_unchecked(ia) };
                let ca = unsafe { a.coef.get_unchecked(ia) };
                for ib in b0..b1 {
                    let pb = unsafe { *b.packed.get_unchecked(ib) };
                    let rank = rt.rank_packed(pa + pb, dout);
                    acc.mac(rank, ca, unsafe { b.coef.get_unchecked(ib) });
                }
            }
        }
    }
    let from = rt.offset[(va + vb) as usize];
    acc.drain_window(from, rt.count as u32, rt, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Ctx;

    #[test]
    fn rank_packed_matches_enumeration() {
        let rt = RankTable::new(5, 7);
        for (r, idx) in indices_up_to(5, 7).into_iter().enumerate() {
            assert_eq!(rt.rank_packed(RankTable::pack(&idx), idx.degree()), r as u32);
        }
        assert_eq!(rt.offset[0], 0);
        assert_eq!(rt.offset[1], 1);
        assert_eq!(rt.offset[2], 6);
    }

    #[test]
    fn hot_mul_matches_sparse() {
        let ctx = Ctx::new(128, -100);
        let n = 3;
        let deg = 5;
        let mut a = FormalSeries::zero(&ctx, n, deg);
        let mut b = FormalSeries::zero(&ctx, n, deg);
        let mut v = 5i64;
        for idx in indices_up_to(n, deg) {
            v = (v * 37 + 11) % 101;
            a.set_coef(idx.clone(), ctx.cplx(v as f64, (v % 7) as f64));
            b.set_coef(idx, ctx.cplx((v % 13) as f64, -(v % 3) as f64));
        }
        let rt = RankTable::new(n, deg);
        let mut acc = DenseAcc::new(rt.count);
        let ha = HotSeries::from_series(&a, &rt);
        let hb = HotSeries::from_series(&b, &rt);
        let mut hp = HotSeries::default();
        mul_hot_into(&ha, &hb, &rt, &mut acc, &mut hp);
        let hp = hp.to_series(&ctx, &rt);
        let sp = a.mul(&b);
        assert!(hp.sub(&sp).max_coef_mag() < crate::num::BigFloat::from_pow2(1, -90, 128));
    }
}
