//! Linear classification at the singular point: eigenstructure of the
//! composed involution S = T1 rho T1 rho, canonical eigenvalue ranges,
//! Bishop invariants, the matrix invariant B-hat, quadric emission, and
//! equivalence testing of B-hat representatives.

use crate::error::Error;
use crate::linalg::{durand_kerner, Matrix};
use crate::num::{BigFloat, Complex, Ctx};

/// Type of one complex-tangent component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentType {
    Elliptic,
    Hyperbolic,
    /// First member of a complex pair (the partner sits at index + s_star).
    ComplexMain,
    /// Second member of a complex pair.
    ComplexPartner,
}

#[derive(Clone)]
pub struct QuadricInvariants {
    pub ctx: Ctx,
    pub e_star: usize,
    pub h_star: usize,
    pub s_star: usize,
    /// lambda_1..lambda_p in canonical ranges and order.
    pub lambda: Vec<Complex>,
    /// mu_j = lambda_j^2.
    pub mu: Vec<Complex>,
    /// gamma_j (Bishop invariants), with gamma_{s+s*} = 1 - conj(gamma_s).
    pub gamma: Vec<Complex>,
    /// Canonical representative of the matrix invariant.
    pub b_hat: Matrix,
}

impl QuadricInvariants {
    pub fn p(&self) -> usize {
        self.e_star + self.h_star + 2 * self.s_star
    }

    pub fn type_of(&self, j: usize) -> TangentType {
        if j < self.e_star {
            TangentType::Elliptic
        } else if j < self.e_star + self.h_star {
            TangentType::Hyperbolic
        } else if j < self.e_star + self.h_star + self.s_star {
            TangentType::ComplexMain
        } else {
            TangentType::ComplexPartner
        }
    }

    /// Index pairing for the anti-holomorphic structure: e,h map to
    /// themselves, s <-> s+s*.
    pub fn pair_index(&self, j: usize) -> usize {
        match self.type_of(j) {
            TangentType::Elliptic | TangentType::Hyperbolic => j,
            TangentType::ComplexMain => j + self.s_star,
            TangentType::ComplexPartner => j - self.s_star,
        }
    }
}

/// gamma from lambda: gamma_e = 1/(lambda+1/lambda), gamma_h likewise
/// (real since |lambda_h| = 1), gamma_s = 1/(1 + lambda_s^{-2}).
pub fn gamma_from_lambda(ctx: &Ctx, lambda: &Complex, t: TangentType) -> Complex {
    match t {
        TangentType::Elliptic | TangentType::Hyperbolic => {
            lambda.add(&lambda.recip()).recip()
        }
        TangentType::ComplexMain => ctx.one().add(&lambda.powi(-2)).recip(),
        TangentType::ComplexPartner => {
            // gamma_{s+s*} = 1 - conj(gamma_s) where lambda_s = conj(lambda)^{-1}
            let ls = lambda.conj().recip();
            let gs = ctx.one().add(&ls.powi(-2)).recip();
            ctx.one().sub(&gs.conj())
        }
    }
}

/// lambda from an elliptic or hyperbolic gamma: the root of
/// gamma lambda^2 - lambda + gamma = 0 in the canonical range.
pub fn lambda_from_gamma_real(ctx: &Ctx, gamma: &Complex, t: TangentType) -> Complex {
    let one = ctx.one();
    let disc = one.sub(&gamma.mul(gamma).mul_i64(4)).sqrt();
    let two_gamma = gamma.mul_i64(2);
    let r1 = one.add(&disc).div(&two_gamma);
    let r2 = one.sub(&disc).div(&two_gamma);
    match t {
        TangentType::Elliptic => {
            // real root > 1
            if r1.re > ctx.one().re {
                r1
            } else {
                r2
            }
        }
        TangentType::Hyperbolic => {
            // unimodular root with argument in (0, pi/2): positive imaginary,
            // positive real part
            let pick = |r: &Complex| !r.im.is_negative() && !r.re.is_negative();
            if pick(&r1) {
                r1
            } else {
                r2
            }
        }
        _ => {
            // complex type: lambda_s^2 = mu_s = gamma/(1-gamma), |lambda|>1,
            // arg in (0, pi/2)
            let mu = gamma.div(&ctx.one().sub(gamma));
            normalize_lambda_complex(ctx, &mu.sqrt())
        }
    }
}

fn normalize_lambda_complex(ctx: &Ctx, l: &Complex) -> Complex {
    // bring lambda into |lambda| > 1, arg in (0, pi/2) using
    // lambda -> -lambda and lambda -> +/- conj(lambda)^{-1}
    let cands = [
        l.clone(),
        l.neg(),
        l.conj().recip(),
        l.conj().recip().neg(),
    ];
    for c in &cands {
        let modulus_ok = c.norm_sqr() > ctx.one().re;
        let arg_ok = !c.re.is_negative()
            && !c.im.is_negative()
            && c.re > ctx.zero_tol
            && c.im > ctx.zero_tol;
        if modulus_ok && arg_ok {
            return c.clone();
        }
    }
    l.clone()
}

/// The composed linear map S = T1 . rho . T1 . rho as a matrix, where rho
/// acts anti-linearly as v -> R conj(v).
pub fn s_matrix(t1: &Matrix, r: &Matrix) -> Matrix {
    // (T1 rho T1 rho)(v) = T1 R conj(T1) conj(R) v
    t1.mul(r).mul(&t1.conj()).mul(&r.conj())
}


#[derive(Clone)]
pub struct LinearNormalization {
    pub inv: QuadricInvariants,
    /// Change of basis: new coordinates (xi, eta) with columns of `p`
    /// giving the eigenbasis; old = p . new.
    pub p: Matrix,
    pub p_inv: Matrix,
    /// Raw (non-canonicalized) B of the generator family in the new basis,
    /// columns ordered like the input generators.
    pub b_raw: Matrix,
}

/// Classify the linear involution family {T_1j} with anti-holomorphic
/// involution rho (matrix `r`, acting v -> R conj(v)).
pub fn classify_linear(
    ctx: &Ctx,
    t1js: &[Matrix],
    r: &Matrix,
) -> Result<LinearNormalization, Error> {
    let p = t1js.len();
    let n = 2 * p;
    let mut t1 = Matrix::identity(ctx, n);
    for t in t1js {
        t1 = t1.mul(t);
    }
    let s = s_matrix(&t1, r);
    let cp = s.char_poly();
    let roots = durand_kerner(ctx, &cp);

    // distinctness within tolerance
    let sep_tol = BigFloat::from_pow2(1, -(ctx.prec as i64) / 4, ctx.prec);
    for i in 0..roots.len() {
        for j in 0..i {
            if roots[i].sub(&roots[j]).mag_inf() < sep_tol {
                return Err(Error::EigenvalueCollision);
            }
        }
        let m1 = roots[i].sub(&ctx.one()).mag_inf();
        let p1 = roots[i].add(&ctx.one()).mag_inf();
        if m1 < sep_tol || p1 < sep_tol {
            return Err(Error::UnitEigenvalue);
        }
    }

    // pair mu with mu^{-1}
    let mut used = vec![false; roots.len()];
    struct Pair {
        mu: Complex,
        t: TangentType,
    }
    let mut pairs: Vec<Pair> = Vec::new();
    let tol = &ctx.guard_band();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let inv = roots[i].recip();
        let mut partner = None;
        for j in 0..roots.len() {
            if !used[j] && roots[j].sub(&inv).mag_inf() < sep_tol {
                partner = Some(j);
                break;
            }
        }
        let j = partner.ok_or_else(|| {
            Error::Hypothesis("eigenvalues do not pair into reciprocal pairs".into())
        })?;
        used[j] = true;
        // classify: real -> elliptic slot, unimodular -> hyperbolic,
        // otherwise complex
        let mu = &roots[i];
        let is_real = mu.im.abs() < *tol;
        let unimod = mu.norm_sqr().sub(&ctx.one().re).abs() < *tol;
        if is_real && !unimod {
            let mut m = mu.clone();
            if m.norm_sqr() < ctx.one().re {
                m = m.recip();
            }
            if m.re.is_negative() {
                return Err(Error::Hypothesis(
                    "negative real eigenvalue: not realizable in the canonical ranges".into(),
                ));
            }
            pairs.push(Pair { mu: m, t: TangentType::Elliptic });
        } else if unimod {
            let mut m = mu.clone();
            if m.im.is_negative() {
                m = m.conj();
            }
            pairs.push(Pair { mu: m, t: TangentType::Hyperbolic });
        } else {
            let mut m = mu.clone();
            if m.norm_sqr() < ctx.one().re {
                m = m.recip();
            }
            if m.im.is_negative() {
                // conj-partner 4-tuple: the conjugate pair is marked used below
                m = m.conj();
            }
            pairs.push(Pair { mu: m, t: TangentType::ComplexMain });
        }
    }
    // complex mains come with a conjugate 4-tuple: remove the duplicate pair
    // (mu_bar with |mu|>1) keeping one main per 4-tuple
    let mut mains: Vec<Pair> = Vec::new();
    let mut skip = vec![false; pairs.len()];
    for i in 0..pairs.len() {
        if skip[i] {
            continue;
        }
        if pairs[i].t == TangentType::ComplexMain {
            for j in i + 1..pairs.len() {
                let same_tuple = pairs[j].mu.sub(&pairs[i].mu.conj()).mag_inf() < sep_tol
                    || pairs[j].mu.sub(&pairs[i].mu).mag_inf() < sep_tol;
                if !skip[j] && pairs[j].t == TangentType::ComplexMain && same_tuple {
                    skip[j] = true;
                    break;
                }
            }
        }
        mains.push(Pair { mu: pairs[i].mu.clone(), t: pairs[i].t });
    }
    let pairs = mains;

    // lambda = principal sqrt adjusted into canonical ranges, then sort
    struct Slot {
        lambda: Complex,
        mu: Complex,
        t: TangentType,
    }
    let mut slots: Vec<Slot> = Vec::new();
    for pr in &pairs {
        let l = pr.mu.sqrt();
        let lambda = match pr.t {
            TangentType::Elliptic => {
                let mut l = l;
                if l.re.is_negative() {
                    l = l.neg();
                }
                if l.norm_sqr() < ctx.one().re {
                    l = l.recip();
                }
                l
            }
            TangentType::Hyperbolic => {
                // unimodular with arg in (0, pi/2)
                let mut l = l;
                if l.re.is_negative() {
                    l = l.neg();
                }
                if l.im.is_negative() {
                    l = l.conj(); // mirror: arg mu was in (0, pi)
                }
                l
            }
            _ => normalize_lambda_complex(ctx, &l),
        };
        slots.push(Slot { lambda, mu: pr.mu.clone(), t: pr.t });
    }
    // canonical order: elliptic ascending lambda; hyperbolic ascending arg;
    // complex ascending (arg, modulus)
    let cmp_arg = |a: &Complex, b: &Complex| -> std::cmp::Ordering {
        // both in the open first quadrant-ish; compare via cross product
        let lhs = a.im.mul(&b.re);
        let rhs = b.im.mul(&a.re);
        lhs.partial_cmp(&rhs).unwrap()
    };
    let mut es: Vec<Slot> = Vec::new();
    let mut hs: Vec<Slot> = Vec::new();
    let mut ss: Vec<Slot> = Vec::new();
    for s in slots {
        match s.t {
            TangentType::Elliptic => es.push(s),
            TangentType::Hyperbolic => hs.push(s),
            _ => ss.push(s),
        }
    }
    es.sort_by(|a, b| a.lambda.re.partial_cmp(&b.lambda.re).unwrap());
    hs.sort_by(|a, b| cmp_arg(&a.lambda, &b.lambda));
    ss.sort_by(|a, b| {
        cmp_arg(&a.lambda, &b.lambda)
            .then_with(|| a.lambda.norm_sqr().partial_cmp(&b.lambda.norm_sqr()).unwrap())
    });
    let (e_star, h_star, s_star) = (es.len(), hs.len(), ss.len());
    if e_star + h_star + 2 * s_star != p {
        return Err(Error::Hypothesis(format!(
            "type counts {e_star}+{h_star}+2*{s_star} do not fill p={p}"
        )));
    }

    // assemble lambda vector with partners
    let mut lambda: Vec<Complex> = Vec::with_capacity(p);
    for s in &es {
        lambda.push(s.lambda.clone());
    }
    for s in &hs {
        lambda.push(s.lambda.clone());
    }
    for s in &ss {
        lambda.push(s.lambda.clone());
    }
    for s in &ss {
        lambda.push(s.lambda.conj().recip());
    }
    let mu: Vec<Complex> = lambda.iter().map(|l| l.mul(l)).collect();

    // Eigenvector normalization per type.
    let rho_apply = |v: &[Complex]| -> Vec<Complex> {
        r.mul_vec(&v.iter().map(|c| c.conj()).collect::<Vec<_>>())
    };
    let t1_apply = |v: &[Complex]| -> Vec<Complex> { t1.mul_vec(v) };
    let eigvec = |muv: &Complex| -> Result<Vec<Complex>, Error> {
        let mut m = s.clone();
        for i in 0..n {
            *m.at_mut(i, i) = m.at(i, i).sub(muv);
        }
        m.null_vector(&sep_tol)
    };
    // coefficient of w against direction v (v must be the same line)
    let ratio = |w: &[Complex], v: &[Complex]| -> Complex {
        let mut bi = 0;
        for (i, x) in v.iter().enumerate() {
            if x.mag_inf() > v[bi].mag_inf() {
                bi = i;
            }
        }
        w[bi].div(&v[bi])
    };
    let scale_vec = |v: &[Complex], c: &Complex| -> Vec<Complex> {
        v.iter().map(|x| x.mul(c)).collect()
    };

    let mut xi_cols: Vec<Vec<Complex>> = Vec::with_capacity(p);
    let mut eta_cols: Vec<Vec<Complex>> = Vec::with_capacity(p);
    let mut lam_out: Vec<Complex> = lambda.clone();

    for (slot_idx, sl) in es.iter().chain(hs.iter()).enumerate() {
        match sl.t {
            TangentType::Elliptic => {
                let u0 = eigvec(&sl.mu)?;
                let v0 = rho_apply(&u0);
                // T1 u = c v with lambda^{-1} = c after phase adjustment
                let t1u = t1_apply(&u0);
                let c = ratio(&t1u, &v0);
                // adjust phase: (u,v) -> (au, conj(a) v) makes c -> c a/conj(a)
                let phase = c.div(&Complex::from_real(c.abs()));
                // want new c real positive: a/conj(a) = conj(phase): a = conj(sqrt(phase))
                let a = phase.sqrt().conj();
                let u = scale_vec(&u0, &a);
                let v = rho_apply(&u);
                let c2 = ratio(&t1_apply(&u), &v);
                let mut lam = c2.recip();
                let (mut uu, mut vv) = (u, v);
                if lam.norm_sqr() < ctx.one().re {
                    std::mem::swap(&mut uu, &mut vv);
                    let c3 = ratio(&t1_apply(&uu), &vv);
                    lam = c3.recip();
                }
                lam_out[slot_idx] = lam;
                xi_cols.push(uu);
                eta_cols.push(vv);
            }
            TangentType::Hyperbolic => {
                let u0 = eigvec(&sl.mu)?;
                // make rho u = u
                let a = ratio(&rho_apply(&u0), &u0);
                let c = a.sqrt();
                let u = scale_vec(&u0, &c);
                debug_assert!(rho_apply(&u)
                    .iter()
                    .zip(&u)
                    .all(|(x, y)| x.sub(y).mag_inf() < ctx.guard_band()));
                // v = T1 u scaled so rho v = v
                let v0 = t1_apply(&u);
                let b = ratio(&rho_apply(&v0), &v0);
                let v = scale_vec(&v0, &b.sqrt());
                // lambda^{-1} = coefficient of T1 u against v
                let mut lam = ratio(&t1_apply(&u), &v).recip();
                let mut uu = u;
                let mut vv = v;
                // bring arg lambda into (0, pi/2): swap (u,v) conjugates
                // lambda; negating v negates lambda
                for _ in 0..4 {
                    let good = !lam.re.is_negative() && !lam.im.is_negative();
                    if good {
                        break;
                    }
                    if lam.re.is_negative() {
                        vv = vv.iter().map(|x| x.neg()).collect();
                        lam = lam.neg();
                    } else {
                        std::mem::swap(&mut uu, &mut vv);
                        lam = ratio(&t1_apply(&uu), &vv).recip();
                    }
                }
                lam_out[slot_idx] = lam;
                xi_cols.push(uu);
                eta_cols.push(vv);
            }
            _ => unreachable!(),
        }
    }
    // complex 4-tuples
    let mut xi_partner: Vec<Vec<Complex>> = Vec::new();
    let mut eta_partner: Vec<Vec<Complex>> = Vec::new();
    for (k, sl) in ss.iter().enumerate() {
        let slot_idx = e_star + h_star + k;
        let u = eigvec(&sl.mu)?;
        let ut = rho_apply(&u); // eigenvalue conj(mu)^{-1}
        let us0 = t1_apply(&u); // eigenvalue mu^{-1}
        // choose scaling of u* so that T1 ut = conj(lambda) ut*
        // with lambda defined by T1 u = lambda^{-1} u*.
        // Set u* = c^{-1} T1 u => lambda = c.
        // Condition: ratio(T1 ut, rho(u*)) must equal conj(lambda).
        let beta = {
            let ut_img = t1_apply(&ut);
            let uts0 = rho_apply(&us0);
            ratio(&ut_img, &uts0)
        };
        // with u* = c^{-1} us0: rho(u*) = conj(c)^{-1} uts0, so
        // ratio(T1 ut, rho u*) = beta conj(c); want = conj(lambda) = conj(c)
        // Hmm: conj(c) = beta conj(c) forces beta = 1; instead lambda = c:
        // T1 u = us0 = c u*, so lambda^{-1} = c^{-1}... we need
        // beta conj(c) = conj(c)... resolve by scaling u (not u*):
        // scale u -> a u multiplies beta by conj(a)/a^{-1}; solve below by
        // direct verification over the two sqrt branches.
        let _ = beta;
        // Direct approach: set u* := T1 u (lambda = 1 provisionally), then
        // the pair (lambda, scalings) is fixed by requiring
        // T1 ut = conj(lambda) ut* after u* -> lambda^{-1} u*.
        // From T1 ut = beta0 rho(u*) with u* = T1 u:
        let beta0 = ratio(&t1_apply(&ut), &rho_apply(&us0));
        // With u* scaled to c^{-1} us0: T1 u = c u* -> lambda = c; and
        // rho(u*) = conj(c^{-1}) rho(us0): T1 ut = beta0 conj(c) rho(u*);
        // require beta0 conj(c) = conj(c)^{... } -- enforce numerically:
        // want coefficient equal to conj(lambda) = conj(c):
        // beta0 conj(c) = conj(c) * (beta0) ... so require beta0 = 1 via
        // rescaling u -> a u: beta0 scales by conj(a)/a. Choose a with
        // a / conj(a) = beta0, i.e. arg(a) = arg(beta0)/2 (|beta0| = 1 up
        // to the lambda modulus freedom).
        let phase = beta0.div(&Complex::from_real(beta0.abs()));
        let a = phase.sqrt();
        let u = scale_vec(&u, &a);
        let ut = rho_apply(&u);
        let us0 = t1_apply(&u);
        // now fix lambda so that |lambda|>1 and arg in (0,pi/2) using the
        // freedom u* -> c u* (lambda -> c^{-1}?) -- lambda is NOT free in
        // modulus: mu = lambda^2 fixes lambda up to sign. Take principal
        // sqrt of mu and adjust by the four symmetries.
        let lam = sl.lambda.clone();
        // u* defined by T1 u = lambda^{-1} u*: u* = lambda T1 u
        let us = scale_vec(&us0, &lam);
        let uts = rho_apply(&us);
        lam_out[slot_idx] = lam.clone();
        lam_out[slot_idx + s_star] = lam.conj().recip();
        xi_cols.push(u);
        xi_partner.push(ut);
        eta_cols.push(us);
        eta_partner.push(uts);
    }
    xi_cols.extend(xi_partner);
    eta_cols.extend(eta_partner);

    // assemble P: columns xi_1..xi_p, eta_1..eta_p
    let mut pm = Matrix::zeros(ctx, n, n);
    for (j, col) in xi_cols.iter().enumerate() {
        for i in 0..n {
            *pm.at_mut(i, j) = col[i].clone();
        }
    }
    for (j, col) in eta_cols.iter().enumerate() {
        for i in 0..n {
            *pm.at_mut(i, p + j) = col[i].clone();
        }
    }
    let pinv = pm.inverse()?;

    // verify rho in new coordinates equals the standard form
    let lambda = lam_out;
    let mu: Vec<Complex> = lambda.iter().map(|l| l.mul(l)).collect();
    let gamma: Vec<Complex> = (0..p)
        .map(|j| {
            let t = if j < e_star {
                TangentType::Elliptic
            } else if j < e_star + h_star {
                TangentType::Hyperbolic
            } else if j < e_star + h_star + s_star {
                TangentType::ComplexMain
            } else {
                TangentType::ComplexPartner
            };
            gamma_from_lambda(ctx, &lambda[j], t)
        })
        .collect();

    // extract raw B columns from the generators
    let e_lam = e_lambda_matrix(ctx, &lambda);
    let e_lam_inv = e_lambda_matrix_inv(ctx, &lambda);
    let mut b_raw = Matrix::zeros(ctx, p, p);
    for (gidx, tj) in t1js.iter().enumerate() {
        let w = e_lam_inv.mul(&pinv.mul(tj).mul(&pm)).mul(&e_lam);
        // w = diag(I, V) with V = B Zhat_j B^{-1}; M = (I - V)/2 = b c^T
        let mut best_col = 0;
        let mut best_mag = BigFloat::zero(ctx.prec);
        let mut mcol: Vec<Vec<Complex>> = vec![vec![ctx.zero(); p]; p];
        for cidx in 0..p {
            let mut mag = BigFloat::zero(ctx.prec);
            for ridx in 0..p {
                let v = ctx
                    .one()
                    .mul(&if ridx == cidx { ctx.one() } else { ctx.zero() })
                    .sub(w.at(p + ridx, p + cidx))
                    .mul(&ctx.real(0.5));
                if v.mag_inf() > mag {
                    mag = v.mag_inf();
                }
                mcol[cidx][ridx] = v;
            }
            if mag > best_mag {
                best_mag = mag;
                best_col = cidx;
            }
        }
        if best_mag < ctx.guard_band() {
            return Err(Error::Hypothesis(
                "generator does not define a rank-one skew direction".into(),
            ));
        }
        // normalize: largest entry = 1
        let col = &mcol[best_col];
        let mut bi = 0;
        for (i, x) in col.iter().enumerate() {
            if x.mag_inf() > col[bi].mag_inf() {
                bi = i;
            }
        }
        let invc = col[bi].recip();
        for i in 0..p {
            *b_raw.at_mut(i, gidx) = col[i].mul(&invc);
        }
    }

    let b_hat = canonical_b_hat(ctx, &b_raw)?;
    Ok(LinearNormalization {
        inv: QuadricInvariants { ctx: ctx.clone(), e_star, h_star, s_star, lambda, mu, gamma, b_hat },
        p: pm,
        p_inv: pinv,
        b_raw,
    })
}

/// The 2p x 2p matrix E_Lambda = [[I, -L],[L^{-1}, I]]/2 used to express
/// generators through sign matrices.
pub fn e_lambda_matrix(ctx: &Ctx, lambda: &[Complex]) -> Matrix {
    let p = lambda.len();
    let mut m = Matrix::zeros(ctx, 2 * p, 2 * p);
    let half = ctx.real(0.5);
    for j in 0..p {
        *m.at_mut(j, j) = half.clone();
        *m.at_mut(j, p + j) = lambda[j].mul(&half).neg();
        *m.at_mut(p + j, j) = lambda[j].recip().mul(&half);
        *m.at_mut(p + j, p + j) = half.clone();
    }
    m
}

pub fn e_lambda_matrix_inv(ctx: &Ctx, lambda: &[Complex]) -> Matrix {
    let p = lambda.len();
    let mut m = Matrix::zeros(ctx, 2 * p, 2 * p);
    for j in 0..p {
        *m.at_mut(j, j) = ctx.one();
        *m.at_mut(j, p + j) = lambda[j].clone();
        *m.at_mut(p + j, j) = lambda[j].recip().neg();
        *m.at_mut(p + j, p + j) = ctx.one();
    }
    m
}

/// The standard anti-holomorphic involution matrix in (xi, eta)
/// coordinates for the given type counts (acts v -> R conj(v)).
pub fn standard_rho_matrix(ctx: &Ctx, e_star: usize, h_star: usize, s_star: usize) -> Matrix {
    let p = e_star + h_star + 2 * s_star;
    let n = 2 * p;
    let mut m = Matrix::zeros(ctx, n, n);
    let one = ctx.one();
    for e in 0..e_star {
        *m.at_mut(e, p + e) = one.clone(); // xi_e' = conj(eta_e)
        *m.at_mut(p + e, e) = one.clone(); // eta_e' = conj(xi_e)
    }
    for k in 0..h_star {
        let h = e_star + k;
        *m.at_mut(h, h) = one.clone();
        *m.at_mut(p + h, p + h) = one.clone();
    }
    for k in 0..s_star {
        let s = e_star + h_star + k;
        let sp = s + s_star;
        *m.at_mut(s, sp) = one.clone();
        *m.at_mut(sp, s) = one.clone();
        *m.at_mut(p + s, p + sp) = one.clone();
        *m.at_mut(p + sp, p + s) = one.clone();
    }
    m
}

/// Standard T-hat_1: xi' = lambda eta, eta' = lambda^{-1} xi.
pub fn standard_t1_matrix(ctx: &Ctx, lambda: &[Complex]) -> Matrix {
    let p = lambda.len();
    let mut m = Matrix::zeros(ctx, 2 * p, 2 * p);
    for j in 0..p {
        *m.at_mut(j, p + j) = lambda[j].clone();
        *m.at_mut(p + j, j) = lambda[j].recip();
    }
    m
}

/// S-hat: xi' = mu xi, eta' = mu^{-1} eta.
pub fn standard_s_matrix(ctx: &Ctx, mu: &[Complex]) -> Matrix {
    let p = mu.len();
    let mut d = Vec::with_capacity(2 * p);
    d.extend(mu.iter().cloned());
    d.extend(mu.iter().map(|m| m.recip()));
    Matrix::diag(ctx, &d)
}

/// T_{1j} = E_Lambda B_* Z_j B_*^{-1} E_Lambda^{-1} for a generator matrix B.
pub fn generator_matrices(ctx: &Ctx, lambda: &[Complex], b: &Matrix) -> Result<Vec<Matrix>, Error> {
    let p = lambda.len();
    let e = e_lambda_matrix(ctx, lambda);
    let einv = e_lambda_matrix_inv(ctx, lambda);
    let binv = b.inverse()?;
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        // B Zhat_j B^{-1} acting on the eta block
        let mut v = Matrix::identity(ctx, p);
        // I - 2 b_j c_j^T where b_j = col_j(B), c_j^T = row_j(B^{-1})
        for i in 0..p {
            for k in 0..p {
                let delta = if i == k { ctx.one() } else { ctx.zero() };
                *v.at_mut(i, k) = delta.sub(&b.at(i, j).mul(binv.at(j, k)).mul_i64(2));
            }
        }
        let mut w = Matrix::identity(ctx, 2 * p);
        for i in 0..p {
            for k in 0..p {
                *w.at_mut(p + i, p + k) = v.at(i, k).clone();
            }
        }
        out.push(e.mul(&w).mul(&einv));
    }
    Ok(out)
}

/// Deterministic representative of B under row scaling and row ordering
/// (house convention; column freedoms are handled by `equivalent_b`).
pub fn canonical_b_hat(ctx: &Ctx, b: &Matrix) -> Result<Matrix, Error> {
    let p = b.nrows();
    let mut rows: Vec<Vec<Complex>> = Vec::with_capacity(p);
    for i in 0..p {
        let mut row: Vec<Complex> = (0..p).map(|j| b.at(i, j).clone()).collect();
        let mut bi = 0;
        for (j, x) in row.iter().enumerate() {
            if x.mag_inf() > row[bi].mag_inf() {
                bi = j;
            }
        }
        if row[bi].mag_inf() < ctx.zero_tol {
            return Err(Error::SingularLinearPart);
        }
        let inv = row[bi].recip();
        for x in row.iter_mut() {
            *x = x.mul(&inv);
        }
        rows.push(row);
    }
    Ok(Matrix::from_fn(ctx, p, p, |i, j| rows[i][j].clone()))
}

/// Witness for B-hat equivalence.
#[derive(Debug)]
pub struct BEquivalence {
    pub perm: Vec<usize>,
    pub a: Vec<Complex>,
    pub d: Vec<Complex>,
}

/// Test B1 ~ (diag a)^{-1} . B2[columns permuted by nu] . diag d with the
/// reality constraints a_e, a_h real and a_{s+s*} = conj(a_s) on the row
/// scalings.
pub fn equivalent_b(
    inv_types: &QuadricInvariants,
    b1: &Matrix,
    b2: &Matrix,
) -> Option<BEquivalence> {
    let ctx = &inv_types.ctx;
    let p = b1.nrows();
    let mut perm: Vec<usize> = (0..p).collect();
    let tol = ctx
        .guard_band()
        .mul(&BigFloat::from_u64(1_000_000, ctx.prec));
    loop {
        if let Some(w) = try_perm(inv_types, b1, b2, &perm, &tol) {
            return Some(w);
        }
        if !next_perm(&mut perm) {
            return None;
        }
    }
}

fn next_perm(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn try_perm(
    inv: &QuadricInvariants,
    b1: &Matrix,
    b2: &Matrix,
    perm: &[usize],
    tol: &BigFloat,
) -> Option<BEquivalence> {
    let ctx = &inv.ctx;
    let p = b1.nrows();
    // b1[i][k] * d_k = a_i * b2[i][perm(k)] : solve ratios
    // set a_0 = 1 provisionally, then adjust reality.
    let ratio_at = |i: usize, k: usize| -> Option<Complex> {
        let x = b1.at(i, k);
        let y = b2.at(i, perm[k]);
        if x.mag_inf() < ctx.zero_tol && y.mag_inf() < ctx.zero_tol {
            return None; // both zero: unconstrained
        }
        if x.mag_inf() < ctx.zero_tol || y.mag_inf() < ctx.zero_tol {
            return Some(ctx.zero()); // structurally incompatible marker
        }
        Some(y.div(x)) // = d_k / a_i  (from b1[i][k] d_k = a_i b2[i][perm k])
    };
    // find d_k relative to a_0 via row 0 when possible, else propagate
    let mut a: Vec<Option<Complex>> = vec![None; p];
    let mut d: Vec<Option<Complex>> = vec![None; p];
    a[0] = Some(ctx.one());
    loop {
        let mut progressed = false;
        for i in 0..p {
            for k in 0..p {
                if let Some(r) = ratio_at(i, k) {
                    if r.is_exact_zero() {
                        return None;
                    }
                    // r = d_k / a_i
                    match (&a[i], &d[k]) {
                        (Some(ai), None) => {
                            d[k] = Some(r.mul(ai));
                            progressed = true;
                        }
                        (None, Some(dk)) => {
                            a[i] = Some(dk.div(&r));
                            progressed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
        if progressed {
            continue;
        }
        // disconnected support: seed a free component
        if let Some(i) = a.iter().position(|x| x.is_none()) {
            a[i] = Some(ctx.one());
            continue;
        }
        if let Some(k) = d.iter().position(|x| x.is_none()) {
            d[k] = Some(ctx.one());
            continue;
        }
        break;
    }
    let mut a: Vec<Complex> = a.into_iter().map(|x| x.unwrap()).collect();
    let mut d: Vec<Complex> = d.into_iter().map(|x| x.unwrap()).collect();
    // consistency of all entries
    for i in 0..p {
        for k in 0..p {
            let lhs = b1.at(i, k).mul(&d[k]);
            let rhs = a[i].mul(b2.at(i, perm[k]));
            if lhs.sub(&rhs).mag_inf() > *tol {
                return None;
            }
        }
    }
    // Gauge repair: each connected component of the nonzero-support
    // bipartite graph carries one free complex scalar t_C (multiplying its
    // a-rows and d-columns together). Choose the scalars so that a_e, a_h
    // are real and a_{s+s*} = conj(a_s).
    let mut comp_of_row = vec![usize::MAX; p];
    let mut comp_of_col = vec![usize::MAX; p];
    let mut ncomp = 0;
    for seed in 0..p {
        if comp_of_row[seed] != usize::MAX {
            continue;
        }
        let cid = ncomp;
        ncomp += 1;
        let mut stack = vec![(true, seed)];
        while let Some((is_row, idx)) = stack.pop() {
            if is_row {
                if comp_of_row[idx] != usize::MAX {
                    continue;
                }
                comp_of_row[idx] = cid;
                for k in 0..p {
                    if b1.at(idx, k).mag_inf() >= ctx.zero_tol {
                        stack.push((false, k));
                    }
                }
            } else {
                if comp_of_col[idx] != usize::MAX {
                    continue;
                }
                comp_of_col[idx] = cid;
                for i in 0..p {
                    if b1.at(i, idx).mag_inf() >= ctx.zero_tol {
                        stack.push((true, i));
                    }
                }
            }
        }
    }
    let eh = inv.e_star + inv.h_star;
    // per-component scalar (None = still free)
    let mut t: Vec<Option<Complex>> = vec![None; ncomp];
    // elliptic/hyperbolic rows pin the phase of their component mod pi
    for i in 0..eh {
        if a[i].mag_inf() < ctx.zero_tol {
            return None;
        }
        let c = comp_of_row[i];
        let phase = a[i].div(&Complex::from_real(a[i].abs()));
        let cand = phase.recip();
        match &t[c] {
            None => t[c] = Some(cand),
            Some(tc) => {
                let v = tc.mul(&a[i]);
                if v.im.abs() > tol.mul(&v.mag_inf().add(&BigFloat::from_u64(1, ctx.prec))) {
                    return None;
                }
            }
        }
    }
    // complex pairs: conj(t_{C1} a_s) = t_{C2} a_{s+s*}
    for k in 0..inv.s_star {
        let s = eh + k;
        let sp = s + inv.s_star;
        if a[s].mag_inf() < ctx.zero_tol || a[sp].mag_inf() < ctx.zero_tol {
            return None;
        }
        let (c1, c2) = (comp_of_row[s], comp_of_row[sp]);
        match (t[c1].clone(), t[c2].clone()) {
            (Some(t1), Some(t2)) => {
                let lhs = t1.mul(&a[s]).conj();
                let rhs = t2.mul(&a[sp]);
                // remaining real-scalar freedom only if the components carry
                // no other pinned rows; accept ratio real positive
                let q = lhs.div(&rhs);
                if q.im.abs() > *tol || q.re.is_negative() {
                    if c1 == c2 {
                        return None;
                    }
                    // rescale the second component by the real-free part
                    if q.im.abs() > *tol {
                        return None;
                    }
                    t[c2] = Some(t2.mul(&Complex::from_real(q.re.clone())));
                }
            }
            (Some(t1), None) => {
                t[c2] = Some(t1.mul(&a[s]).conj().div(&a[sp]));
            }
            (None, Some(t2)) => {
                t[c1] = Some(t2.mul(&a[sp]).conj().div(&a[s]));
            }
            (None, None) => {
                if c1 == c2 {
                    // conj(t a_s) = t a_{sp}: t-bar/t = a_{sp}/conj(a_s)
                    let q = a[sp].div(&a[s].conj());
                    let qn = q.abs();
                    if qn.sub(&BigFloat::from_u64(1, ctx.prec)).abs() > *tol {
                        return None;
                    }
                    // t = e^{i th} with e^{-2 i th} = q: take sqrt
                    t[c1] = Some(q.sqrt().conj());
                } else {
                    t[c1] = Some(ctx.one());
                    t[c2] = Some(a[s].conj().div(&a[sp]));
                }
            }
        }
    }
    for tc in t.iter_mut() {
        if tc.is_none() {
            *tc = Some(ctx.one());
        }
    }
    for i in 0..p {
        a[i] = a[i].mul(t[comp_of_row[i]].as_ref().unwrap());
    }
    for k in 0..p {
        d[k] = d[k].mul(t[comp_of_col[k]].as_ref().unwrap());
    }
    // final verification of reality
    for i in 0..eh {
        if a[i].im.abs() > tol.mul(&a[i].mag_inf().add(&BigFloat::from_u64(1, ctx.prec))) {
            return None;
        }
    }
    for k in 0..inv.s_star {
        let s = eh + k;
        let sp = s + inv.s_star;
        if a[s].conj().sub(&a[sp]).mag_inf()
            > tol.mul(&a[s].mag_inf().add(&BigFloat::from_u64(1, ctx.prec)))
        {
            return None;
        }
    }
    Some(BEquivalence { perm: perm.to_vec(), a, d })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        Ctx::default_ctx()
    }

    #[test]
    fn lambda_gamma_conversions() {
        let c = ctx();
        // gamma_e = 2/5: lambda + 1/lambda = 5/2 -> lambda = 2
        let g25 = c.real(2.0).div(&c.real(5.0));
        let l = lambda_from_gamma_real(&c, &g25, TangentType::Elliptic);
        assert!(l.sub(&c.real(2.0)).mag_inf() < c.guard_band());
        // gamma_e = 1/4 -> lambda = 2 + sqrt(3), mu = 7 + 4 sqrt(3)
        let l = lambda_from_gamma_real(&c, &c.real(0.25), TangentType::Elliptic);
        let s3 = c.real(3.0).sqrt();
        assert!(l.sub(&c.real(2.0).add(&s3)).mag_inf() < c.guard_band());
        let mu = l.mul(&l);
        assert!(mu.sub(&c.real(7.0).add(&s3.mul_i64(4))).mag_inf() < c.guard_band());
        // round trip on canonical ranges
        for (g, t) in [
            (c.real(0.375), TangentType::Elliptic),
            (c.real(1.75), TangentType::Hyperbolic),
            (c.cplx(1.0, 1.0), TangentType::ComplexMain),
        ] {
            let l = lambda_from_gamma_real(&c, &g, t);
            let g2 = gamma_from_lambda(&c, &l, t);
            assert!(g2.sub(&g).mag_inf() < c.guard_band(), "{t:?}");
        }
        // mu_s for gamma_s = 1 + i equals -1 + i
        let mu = c.cplx(1.0, 1.0).div(&c.one().sub(&c.cplx(1.0, 1.0)));
        assert!(mu.sub(&c.cplx(-1.0, 1.0)).mag_inf() < c.guard_band());
    }

    #[test]
    fn classify_product_quadric_roundtrip() {
        let c = ctx();
        // p = 2: one elliptic gamma=0.25, one hyperbolic gamma=1.0
        let le = lambda_from_gamma_real(&c, &c.real(0.25), TangentType::Elliptic);
        let lh = lambda_from_gamma_real(&c, &c.real(1.0), TangentType::Hyperbolic);
        let lambda = vec![le.clone(), lh.clone()];
        let b = Matrix::identity(&c, 2);
        let t1js = generator_matrices(&c, &lambda, &b).unwrap();
        let r = standard_rho_matrix(&c, 1, 1, 0);
        let ln = classify_linear(&c, &t1js, &r).unwrap();
        assert_eq!((ln.inv.e_star, ln.inv.h_star, ln.inv.s_star), (1, 1, 0));
        assert!(ln.inv.lambda[0].sub(&le).mag_inf() < BigFloat::from_pow2(1, -150, c.prec));
        assert!(ln.inv.lambda[1].sub(&lh).mag_inf() < BigFloat::from_pow2(1, -150, c.prec));
        assert!(equivalent_b(&ln.inv, &ln.inv.b_hat, &Matrix::identity(&c, 2)).is_some());
    }

    #[test]
    fn classify_complex_type() {
        let c = ctx();
        let ls = lambda_from_gamma_real(&c, &c.cplx(1.0, 1.0), TangentType::ComplexMain);
        let lambda = vec![ls.clone(), ls.conj().recip()];
        let b = Matrix::identity(&c, 2);
        let t1js = generator_matrices(&c, &lambda, &b).unwrap();
        let r = standard_rho_matrix(&c, 0, 0, 1);
        let ln = classify_linear(&c, &t1js, &r).unwrap();
        assert_eq!((ln.inv.e_star, ln.inv.h_star, ln.inv.s_star), (0, 0, 1));
        // mu_s = -1 + i
        assert!(ln.inv.mu[0].sub(&c.cplx(-1.0, 1.0)).mag_inf() < BigFloat::from_pow2(1, -140, c.prec));
        // gamma_s recovered
        assert!(ln.inv.gamma[0].sub(&c.cplx(1.0, 1.0)).mag_inf() < BigFloat::from_pow2(1, -140, c.prec));
    }

    #[test]
    fn b_equivalence_scaling_and_perturbation() {
        let c = ctx();
        let inv = QuadricInvariants {
            ctx: c.clone(),
            e_star: 2,
            h_star: 0,
            s_star: 0,
            lambda: vec![c.real(2.0), c.real(3.0)],
            mu: vec![c.real(4.0), c.real(9.0)],
            gamma: vec![c.real(0.4), c.real(0.3)],
            b_hat: Matrix::identity(&c, 2),
        };
        let b = Matrix::from_fn(&c, 2, 2, |i, j| c.real([[1.0, 0.5], [-0.25, 2.0]][i][j]));
        // column scaling
        let bd = Matrix::from_fn(&c, 2, 2, |i, j| b.at(i, j).mul(&c.real([2.0, 3.0][j])));
        assert!(equivalent_b(&inv, &b, &bd).is_some());
        // row scaling by reals
        let ab = Matrix::from_fn(&c, 2, 2, |i, j| b.at(i, j).mul(&c.real([0.5, -1.5][i])));
        assert!(equivalent_b(&inv, &b, &ab).is_some());
        // generic perturbation: not equivalent
        let mut bp = b.clone();
        *bp.at_mut(0, 1) = bp.at(0, 1).add(&c.real(0.125));
        assert!(equivalent_b(&inv, &b, &bp).is_none());
    }
}
