fn main() {
    use crsing::num::Ctx;
    use crsing::centralizers::*;
    use crsing::fps::{FormalMap, MultiIndex, compose, invert};
    let c = Ctx::default_ctx();
    let d = 5;
    let fam = SymmetryFamily::DDiagonal { ctx: c.clone(), mu: vec![vec![c.real(4.0), c.real(2.0)]] };
    let mut h0 = FormalMap::identity(&c, 2, d);
    h0.components[0].set_coef(MultiIndex::from_slice(&[3, 0]), c.cplx(0.25, -0.1));
    h0.components[1].set_coef(MultiIndex::from_slice(&[2, 0]), c.cplx(-0.15, 0.05));
    let mut g0 = FormalMap::identity(&c, 2, d);
    g0.components[0].set_coef(MultiIndex::from_slice(&[0, 2]), c.cplx(0.0, 0.3));
    let f = compose(&h0, &invert(&g0).unwrap()).unwrap();
    let (h, g) = decompose(&f, &fam).unwrap();
    println!("h diff: {:?}", h.distance(&h0));
    println!("g diff: {:?}", g.distance(&g0));
    println!("h: {:?}", h.sub(&FormalMap::identity(&c,2,d)));
    println!("recompose diff: {:?}", compose(&h, &invert(&g).unwrap()).unwrap().distance(&f));
}
