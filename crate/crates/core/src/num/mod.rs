//! Numeric substrate: arbitrary-precision binary floats and complex numbers.

pub mod bigfloat;
pub mod packed;
pub mod complex;

pub use bigfloat::BigFloat;
pub use complex::Complex;

/// Working context shared by all series computations: precision in bits,
/// the structural zero tolerance, and the guard band multiplier used when
/// refusing near-resonant divisions.
#[derive(Clone)]
pub struct Ctx {
    pub prec: u32,
    pub zero_tol: BigFloat,
    pub guard_factor: BigFloat,
}

impl Ctx {
    /// Default: 256 bits, zero tolerance 2^-128, guard band 10^3.
    pub fn default_ctx() -> Self {
        Self::new(256, -128)
    }

    /// Precision `prec` bits with zero tolerance 2^`tol_exp`.
    pub fn new(prec: u32, tol_exp: i64) -> Self {
        assert!(prec >= bigfloat::MIN_PREC, "precision must be >= {}", bigfloat::MIN_PREC);
        Ctx {
            prec,
            zero_tol: BigFloat::from_pow2(1, tol_exp, prec),
            guard_factor: BigFloat::from_u64(1000, prec),
        }
    }

    /// Tolerance scaled for accepting residuals in d-degree pipelines.
    pub fn guard_band(&self) -> BigFloat {
        self.zero_tol.mul(&self.guard_factor)
    }

    pub fn zero(&self) -> Complex {
        Complex::zero(self.prec)
    }

    pub fn one(&self) -> Complex {
        Complex::one(self.prec)
    }

    pub fn real(&self, v: f64) -> Complex {
        Complex::from_f64s(v, 0.0, self.prec)
    }

    pub fn cplx(&self, re: f64, im: f64) -> Complex {
        Complex::from_f64s(re, im, self.prec)
    }

    pub fn big(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.prec)
    }

    pub fn is_zero(&self, z: &Complex) -> bool {
        z.below_tol(&self.zero_tol)
    }
}
