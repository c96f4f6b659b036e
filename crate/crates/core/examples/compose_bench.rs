use crsing::fps::{compose, multiindex::indices_up_to, FormalMap, FormalSeries};
use crsing::num::Ctx;
use std::time::Instant;

fn dense_map(ctx: &Ctx, n: usize, deg: u32, seed: u64) -> FormalMap {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
    };
    let comps = (0..n)
        .map(|_| {
            let mut s = FormalSeries::zero(ctx, n, deg);
            for idx in indices_up_to(n, deg) {
                if idx.degree() == 0 {
                    continue;
                }
                s.set_coef(idx, ctx.cplx(next(), next()));
            }
            s
        })
        .collect();
    FormalMap::new(comps)
}

fn main() {
    let threads: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().unwrap();
    let ctx = Ctx::default_ctx();
    let f = dense_map(&ctx, 6, 10, 42);
    let g = dense_map(&ctx, 6, 10, 97);
    let t0 = Instant::now();
    let h = compose(&f, &g).unwrap();
    let dt = t0.elapsed();
    let pairs = crsing::fps::hot::PAIR_COUNT.load(std::sync::atomic::Ordering::Relaxed);
    println!("threads={threads} compose dense n=6 d=10: {:?} (terms: {}), pairs={} ({:.1} ns/pair)",
        dt, h.components[0].num_terms(), pairs, dt.as_nanos() as f64 / pairs as f64);
}
