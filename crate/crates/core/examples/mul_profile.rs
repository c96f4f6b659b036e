use crsing::fps::hot::{mul_hot_into, DenseAcc, HotSeries, RankTable};
use crsing::fps::{multiindex::indices_up_to, FormalSeries};
use crsing::num::Ctx;
use std::time::Instant;

fn main() {
    let ctx = Ctx::default_ctx();
    let n = 6;
    let deg = 10u32;
    let rt = RankTable::new(n, deg);
    let mut v = 1i64;
    let mut series_of_valuation = |val: u32| {
        let mut s = FormalSeries::zero(&ctx, n, deg);
        for idx in indices_up_to(n, deg) {
            v = (v * 31 + 7) % 997;
            if idx.degree() >= val {
                s.set_coef(idx, ctx.cplx(v as f64 / 3.0, (v % 5) as f64));
            }
        }
        HotSeries::from_series(&s, &rt)
    };
    let g = series_of_valuation(1);
    let mut acc = DenseAcc::new(rt.count);
    let mut out = HotSeries::default();
    for val in [0u32, 1, 2, 3, 5, 7, 9] {
        let a = series_of_valuation(val);
        let mut pairs = 0u64;
        for &da in &a.deg {
            for &db in &g.deg {
                if da as u32 + db as u32 > deg { break; }
                pairs += 1;
            }
        }
        // cold-ish single runs
        let t0 = Instant::now();
        let reps = if val >= 7 { 50 } else if val >= 3 { 5 } else { 1 };
        for _ in 0..reps {
            mul_hot_into(&a, &g, &rt, &mut acc, &mut out);
            std::hint::black_box(&out);
        }
        let dt = t0.elapsed() / reps;
        println!("val {val}: {} a-terms, {pairs} pairs, {dt:?}, {:.1} ns/pair",
            a.len(), dt.as_nanos() as f64 / pairs as f64);
    }
}
