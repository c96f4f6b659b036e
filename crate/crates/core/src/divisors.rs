//! Small-divisor values mu^K - mu_j^{+-1} at working precision, computed
//! without cancellation loss: either exactly from binary-float eigenvalues
//! (integer powers and differences of binary floats are exact), or from
//! exponent form mu_j = exp(x_j) with adaptive precision escalation for
//! engineered near-resonances far below the working mantissa.

use crate::error::Error;
use crate::num::{BigFloat, Complex, Ctx};
use std::cell::RefCell;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct DivisorUse {
    pub j: usize,
    pub diff: Vec<i64>,
    pub inverse: bool,
    pub log2_mag: f64,
}

#[derive(Clone)]
pub enum DivisorBase {
    /// Eigenvalues as given binary floats; powers and differences computed
    /// exactly, then rounded once.
    Plain(Vec<Complex>),
    /// mu_j = exp(x_j) for real x at high precision (the engineered
    /// Liouville spectra); values via expm1 at escalating precision.
    ExpForm(Vec<BigFloat>),
}

pub struct DivisorProvider {
    pub ctx: Ctx,
    pub base: DivisorBase,
    cache: RefCell<HashMap<(usize, Vec<i64>, bool), Complex>>,
    pub log: RefCell<Vec<DivisorUse>>,
    /// Near-miss guard: refuse divisions when |divisor| < guard.
    pub guard: BigFloat,
}

impl DivisorProvider {
    pub fn plain(ctx: &Ctx, mu: Vec<Complex>) -> Self {
        DivisorProvider {
            ctx: ctx.clone(),
            base: DivisorBase::Plain(mu),
            cache: RefCell::new(HashMap::new()),
            log: RefCell::new(Vec::new()),
            guard: ctx.guard_band(),
        }
    }

    pub fn exp_form(ctx: &Ctx, x: Vec<BigFloat>) -> Self {
        // guard for engineered spectra: essentially only exact zero refusal
        DivisorProvider {
            ctx: ctx.clone(),
            base: DivisorBase::ExpForm(x),
            cache: RefCell::new(HashMap::new()),
            log: RefCell::new(Vec::new()),
            guard: BigFloat::from_pow2(1, -(1 << 20), ctx.prec),
        }
    }

    pub fn p(&self) -> usize {
        match &self.base {
            DivisorBase::Plain(mu) => mu.len(),
            DivisorBase::ExpForm(x) => x.len(),
        }
    }

    pub fn mu(&self, j: usize) -> Complex {
        match &self.base {
            DivisorBase::Plain(mu) => mu[j].clone(),
            DivisorBase::ExpForm(x) => {
                Complex::from_real(x[j].rounded(self.ctx.prec).exp())
            }
        }
    }

    /// Raw value mu^diff - mu_j^{sign} (sign = -1 when `inverse`), no
    /// guard-band policy applied.
    pub fn value(&self, j: usize, diff: &[i64], inverse: bool) -> Complex {
        let key = (j, diff.to_vec(), inverse);
        if let Some(v) = self.cache.borrow().get(&key) {
            return v.clone();
        }
        let v = match &self.base {
            DivisorBase::Plain(mu) => {
                // exact in binary floats: integer powers, then one rounding
                let mut acc = Complex::one(self.ctx.prec);
                for (k, &e) in diff.iter().enumerate() {
                    if e != 0 {
                        acc = acc.mul(&mu[k].powi(e));
                    }
                }
                let target = if inverse { mu[j].recip() } else { mu[j].clone() };
                acc.sub(&target)
            }
            DivisorBase::ExpForm(x) => {
                // t = diff . x -/+ x_j; escalate precision until t resolves
                let mut prec = self.ctx.prec;
                loop {
                    let mut t = BigFloat::zero(prec);
                    for (k, &e) in diff.iter().enumerate() {
                        if e != 0 {
                            t = t.add(&x[k].rounded(prec).mul_i64(e));
                        }
                    }
                    let xj = x[j].rounded(prec);
                    t = if inverse { t.add(&xj) } else { t.sub(&xj) };
                    // resolved when |t| clearly above the rounding noise
                    let noise = BigFloat::from_pow2(
                        diff.iter().map(|e| e.unsigned_abs()).sum::<u64>().max(1) as u64 * 8,
                        -(prec as i64) + 8,
                        prec,
                    );
                    if t.abs() > noise {
                        // mu^diff - mu_j^{+-} = e^{x_target} (e^t - 1)
                        let xt = if inverse { xj.neg() } else { xj };
                        let scale = xt.rounded(self.ctx.prec + 64).exp();
                        let em1 = t.rounded(self.ctx.prec + 64).expm1();
                        break Complex::from_real(scale.mul(&em1)).rounded(self.ctx.prec);
                    }
                    if t.is_zero() && prec > 1 << 22 {
                        break Complex::zero(self.ctx.prec); // exact resonance
                    }
                    if prec > 1 << 22 {
                        break Complex::zero(self.ctx.prec);
                    }
                    prec = prec.saturating_mul(2).max(prec + 4096);
                }
            }
        };
        self.cache.borrow_mut().insert(key, v.clone());
        v
    }

    /// Divisor with the guard-band refusal policy and usage logging.
    pub fn divisor(&self, j: usize, diff: &[i64], inverse: bool) -> Result<Complex, Error> {
        let v = self.value(j, diff, inverse);
        let mag = v.mag_inf();
        if mag < self.guard {
            return Err(Error::Resonance {
                j,
                multi: diff.to_vec(),
                mag_log2: v.abs().log2_abs(),
            });
        }
        self.log.borrow_mut().push(DivisorUse {
            j,
            diff: diff.to_vec(),
            inverse,
            log2_mag: v.abs().log2_abs(),
        });
        Ok(v)
    }

    /// Non-resonance check mu^Q != 1 for 0 < |Q| <= d (Q over Z^p).
    pub fn check_nonresonant(&self, d: u32) -> Result<(), Error> {
        let p = self.p();
        let mut q = vec![-(d as i64); p];
        loop {
            let total: u64 = q.iter().map(|e| e.unsigned_abs()).sum();
            if total > 0 && total <= d as u64 {
                let v = match &self.base {
                    DivisorBase::Plain(mu) => {
                        let mut acc = Complex::one(self.ctx.prec);
                        for (k, &e) in q.iter().enumerate() {
                            if e != 0 {
                                acc = acc.mul(&mu[k].powi(e));
                            }
                        }
                        acc.sub(&Complex::one(self.ctx.prec))
                    }
                    DivisorBase::ExpForm(x) => {
                        let mut prec = self.ctx.prec;
                        loop {
                            let mut t = BigFloat::zero(prec);
                            for (k, &e) in q.iter().enumerate() {
                                if e != 0 {
                                    t = t.add(&x[k].rounded(prec).mul_i64(e));
                                }
                            }
                            let noise = BigFloat::from_pow2(64, -(prec as i64) + 8, prec);
                            if t.abs() > noise || prec > 1 << 22 {
                                break Complex::from_real(t);
                            }
                            prec = prec.saturating_mul(2);
                        }
                    }
                };
                if v.mag_inf() < self.guard {
                    return Err(Error::Resonance {
                        j: usize::MAX,
                        multi: q.clone(),
                        mag_log2: v.abs().log2_abs(),
                    });
                }
            }
            // advance odometer
            let mut k = 0;
            loop {
                if k == p {
                    return Ok(());
                }
                q[k] += 1;
                if q[k] <= d as i64 {
                    break;
                }
                q[k] = -(d as i64);
                k += 1;
            }
        }
    }

    pub fn take_log(&self) -> Vec<DivisorUse> {
        std::mem::take(&mut self.log.borrow_mut())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_divisors_exact() {
        let ctx = Ctx::default_ctx();
        let dv = DivisorProvider::plain(&ctx, vec![ctx.real(2.0), ctx.real(3.0)]);
        // 2^2 3^{-1} - 2 = 4/3 - 2 = -2/3
        let v = dv.divisor(0, &[2, -1], false).unwrap();
        let expect = ctx.real(4.0).div(&ctx.real(3.0)).sub(&ctx.real(2.0));
        assert!(v.sub(&expect).mag_inf() < ctx.guard_band());
        // resonance: 2^1 - 2 = 0 -> refusal (diff = e_j)
        assert!(dv.divisor(0, &[1, 0], false).is_err());
        dv.check_nonresonant(3).unwrap();
        // resonant pair mu = (4, 2): 4 * 2^{-2} = 1
        let dv2 = DivisorProvider::plain(&ctx, vec![ctx.real(4.0), ctx.real(2.0)]);
        assert!(dv2.check_nonresonant(3).is_err());
    }

    #[test]
    fn exp_form_resolves_tiny() {
        let ctx = Ctx::new(128, -100);
        // x = (1, 1 + 2^-300): mu^(1,-1) - 1 with j-target exp(0)... use
        // value: mu_0^1 mu_1^{-1} - mu_0^0? Construct: divisor j=0 diff=(2,-1):
        // t = 2 x0 - x1 - x0 = x0 - x1 = -2^-300: tiny but resolvable.
        let x0 = BigFloat::from_u64(1, 512);
        let x1 = BigFloat::from_u64(1, 512).add_exact(&BigFloat::from_pow2(1, -300, 512));
        let dv = DivisorProvider::exp_form(&ctx, vec![x0, x1]);
        let v = dv.value(0, &[2, -1], false);
        // e^1 (e^{-2^-300} - 1) ~ -e * 2^-300
        assert!(v.re.is_negative());
        let l2 = v.abs().log2_abs();
        assert!((l2 + 300.0).abs() < 2.0, "log2 = {l2}");
    }
}
