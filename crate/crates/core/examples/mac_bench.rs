use crsing::fps::hot::{mul_hot_into, DenseAcc, HotSeries, RankTable};
use crsing::fps::{multiindex::indices_up_to, FormalSeries};
use crsing::num::Ctx;
use std::time::Instant;

fn main() {
    let ctx = Ctx::default_ctx();
    let n = 6;
    let deg = 10u32;
    let rt = RankTable::new(n, deg);
    // dense degree<=5 series a (valuation 5 shifted) times dense g
    let mut a = FormalSeries::zero(&ctx, n, deg);
    let mut g = FormalSeries::zero(&ctx, n, deg);
    let mut v = 1i64;
    for idx in indices_up_to(n, deg) {
        v = (v * 31 + 7) % 997;
        if idx.degree() >= 5 {
            a.set_coef(idx.clone(), ctx.cplx(v as f64 / 3.0, (v % 5) as f64));
        }
        if idx.degree() >= 1 {
            g.set_coef(idx, ctx.cplx((v % 17) as f64, (v % 9) as f64 / 2.0));
        }
    }
    let ha = HotSeries::from_series(&a, &rt);
    let hg = HotSeries::from_series(&g, &rt);
    let mut acc = DenseAcc::new(rt.count);
    // count pairs
    let mut pairs = 0u64;
    for &da in &ha.deg {
        let budget = (deg - da as u32) as u8;
        for &db in &hg.deg {
            if db > budget { break; }
            pairs += 1;
        }
    }
    let t0 = Instant::now();
    let iters = 5;
    let mut r = HotSeries::default();
    for _ in 0..iters {
        mul_hot_into(&ha, &hg, &rt, &mut acc, &mut r);
        std::hint::black_box(&r);
    }
    let dt = t0.elapsed();
    println!("pairs per mul: {pairs}; {:?} per mul; {:.1} ns/pair",
        dt / iters, dt.as_nanos() as f64 / (iters as f64 * pairs as f64));
}
