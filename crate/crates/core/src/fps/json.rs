//! JSON serialization of series and maps: coefficients travel as decimal
//! strings that round-trip bit-exactly at the declared precision.

use super::multiindex::MultiIndex;
use super::series::FormalSeries;
use super::map::FormalMap;
use crate::error::Error;
use crate::num::{BigFloat, Complex, Ctx};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermJson {
    pub idx: Vec<u16>,
    pub re: String,
    pub im: String,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SeriesJson {
    pub n: usize,
    pub deg: u32,
    pub terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct MapJson {
    pub components: Vec<SeriesJson>,
}

impl SeriesJson {
    pub fn from_series(s: &FormalSeries) -> Self {
        SeriesJson {
            n: s.n,
            deg: s.deg,
            terms: s
                .iter_terms()
                .map(|(k, c)| {
                    let (re, im) = c.to_decimal_pair();
                    TermJson { idx: k.iter().collect(), re, im }
                })
                .collect(),
        }
    }

    pub fn to_series(&self, ctx: &Ctx) -> Result<FormalSeries, Error> {
        let mut s = FormalSeries::zero(ctx, self.n, self.deg);
        for t in &self.terms {
            if t.idx.len() != self.n {
                return Err(Error::Input(format!(
                    "term index length {} does not match n={}",
                    t.idx.len(),
                    self.n
                )));
            }
            let re = BigFloat::parse_decimal(&t.re, ctx.prec).map_err(Error::Input)?;
            let im = BigFloat::parse_decimal(&t.im, ctx.prec).map_err(Error::Input)?;
            s.set_coef(MultiIndex::from_slice(&t.idx), Complex::new(re, im));
        }
        Ok(s)
    }
}

impl MapJson {
    pub fn from_map(m: &FormalMap) -> Self {
        MapJson { components: m.components.iter().map(SeriesJson::from_series).collect() }
    }

    pub fn to_map(&self, ctx: &Ctx) -> Result<FormalMap, Error> {
        let comps = self
            .components
            .iter()
            .map(|c| c.to_series(ctx))
            .collect::<Result<Vec<_>, _>>()?;
        if comps.is_empty() {
            return Err(Error::Input("map with no components".into()));
        }
        Ok(FormalMap::new(comps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_json_roundtrip_bit_exact() {
        let ctx = Ctx::default_ctx();
        let mut s = FormalSeries::zero(&ctx, 2, 4);
        s.set_coef(MultiIndex::from_slice(&[1, 2]), ctx.cplx(1.0 / 3.0, -7.25));
        s.set_coef(
            MultiIndex::from_slice(&[0, 1]),
            Complex::new(
                BigFloat::from_u64(2, ctx.prec).sqrt(),
                BigFloat::from_pow2(3, -200, ctx.prec),
            ),
        );
        let j = SeriesJson::from_series(&s);
        let text = serde_json::to_string(&j).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        let s2 = back.to_series(&ctx).unwrap();
        // bit-exact round trip: difference must be exactly zero
        for (k, c) in s.iter_terms() {
            let d = s2.coef(k).sub(c);
            assert!(d.re.is_zero() && d.im.is_zero(), "coefficient at {k:?} not bit-exact");
        }
    }
}
