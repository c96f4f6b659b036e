//! Normal forms of the reversible map sigma and of the involution pair:
//! the Poincare-Dulac step (sigma conjugated into the centralizer of its
//! diagonal linear part), the pair step (Lambda_2 = Lambda_1^{-1}), the
//! secondary normal form of log M under hyperplane-preserving changes of
//! the invariants, the resulting unique normal form, and the residual
//! conjugacy invariant of the generator family.

use crate::centralizers::{decompose, e_lambda_nonlinear, SymmetryFamily};
use crate::divisors::{DivisorProvider, DivisorUse};
use crate::error::Error;
use crate::fps::{compose, invert, FormalMap, FormalSeries, MultiIndex};
use crate::linalg::Matrix;
use crate::num::{BigFloat, Complex, Ctx};

/// zeta-degree carried by invariant series when the ambient truncation
/// degree is d: a monomial zeta^A xi_j has (xi,eta)-degree 2|A| + 1.
pub fn zeta_degree(d: u32) -> u32 {
    d.saturating_sub(1) / 2
}

/// Map xi_j' = M_j(xi eta) xi_j, eta_j' = N_j(xi eta) eta_j on 2p vars.
pub fn map_from_invariants(
    ctx: &Ctx,
    m: &[FormalSeries],
    n: &[FormalSeries],
    d: u32,
) -> FormalMap {
    let p = m.len();
    let nv = 2 * p;
    let mut comps = Vec::with_capacity(nv);
    let expand = |series: &FormalSeries, j: usize, eta_side: bool| -> FormalSeries {
        let mut out = FormalSeries::zero(ctx, nv, d);
        for (a, c) in series.iter_terms() {
            let mut idx = vec![0u16; nv];
            for k in 0..p {
                idx[k] += a.get(k);
                idx[p + k] += a.get(k);
            }
            if eta_side {
                idx[p + j] += 1;
            } else {
                idx[j] += 1;
            }
            let mi = MultiIndex::from_slice(&idx);
            if mi.degree() <= d {
                out.set_coef(mi, c.clone());
            }
        }
        out
    };
    for j in 0..p {
        comps.push(expand(&m[j], j, false));
    }
    for j in 0..p {
        comps.push(expand(&n[j], j, true));
    }
    FormalMap::new(comps)
}

/// Map xi_j' = L_j(xi eta) eta_j, eta_j' = L_j^{-1}(xi eta) xi_j.
pub fn involution_from_lambda(ctx: &Ctx, lambda: &[FormalSeries], d: u32) -> FormalMap {
    let p = lambda.len();
    let nv = 2 * p;
    let mut comps = Vec::with_capacity(nv);
    let expand = |series: &FormalSeries, j: usize, eta_side: bool| -> FormalSeries {
        let mut out = FormalSeries::zero(ctx, nv, d);
        for (a, c) in series.iter_terms() {
            let mut idx = vec![0u16; nv];
            for k in 0..p {
                idx[k] += a.get(k);
                idx[p + k] += a.get(k);
            }
            if eta_side {
                idx[p + j] += 1;
            } else {
                idx[j] += 1;
            }
            let mi = MultiIndex::from_slice(&idx);
            if mi.degree() <= d {
                out.set_coef(mi, c.clone());
            }
        }
        out
    };
    for j in 0..p {
        comps.push(expand(&lambda[j], j, true));
    }
    for j in 0..p {
        comps.push(expand(&lambda[j].invert_unit(), j, false));
    }
    FormalMap::new(comps)
}

/// Extract the invariant-series data of a map in the centralizer shape:
/// returns (M, N, off-shape residual magnitude).
pub fn extract_invariants(f: &FormalMap) -> (Vec<FormalSeries>, Vec<FormalSeries>, BigFloat) {
    let ctx = f.ctx().clone();
    let nv = f.n_source();
    let p = nv / 2;
    let d = f.deg();
    let dz = zeta_degree(d);
    let mut m = vec![FormalSeries::zero(&ctx, p, dz); p];
    let mut n = vec![FormalSeries::zero(&ctx, p, dz); p];
    let mut resid = BigFloat::zero(ctx.prec);
    for j in 0..p {
        for (idx, c) in f.components[j].iter_terms() {
            if let Some(a) = diag_exponent(idx, p, j, false) {
                m[j].add_to_coef(a, c);
            } else if c.mag_inf() > resid {
                resid = c.mag_inf();
            }
        }
        for (idx, c) in f.components[p + j].iter_terms() {
            if let Some(a) = diag_exponent(idx, p, j, true) {
                n[j].add_to_coef(a, c);
            } else if c.mag_inf() > resid {
                resid = c.mag_inf();
            }
        }
    }
    (m, n, resid)
}

/// If idx = zeta^A xi_j (eta_side: zeta^A eta_j), return A.
fn diag_exponent(idx: &MultiIndex, p: usize, j: usize, eta_side: bool) -> Option<MultiIndex> {
    let mut a = vec![0u16; p];
    for k in 0..p {
        let (xi_e, eta_e) = (idx.get(k), idx.get(p + k));
        let (xe, ee) = if k == j {
            if eta_side {
                (xi_e, eta_e.checked_sub(1)?)
            } else {
                (xi_e.checked_sub(1)?, eta_e)
            }
        } else {
            (xi_e, eta_e)
        };
        if xe != ee {
            return None;
        }
        a[k] = xe;
    }
    Some(MultiIndex::from_slice(&a))
}

/// Extract Lambda from an involution-shaped map xi_j' = L_j(zeta) eta_j.
pub fn extract_lambda(f: &FormalMap) -> (Vec<FormalSeries>, BigFloat) {
    let ctx = f.ctx().clone();
    let nv = f.n_source();
    let p = nv / 2;
    let dz = zeta_degree(f.deg());
    let mut lam = vec![FormalSeries::zero(&ctx, p, dz); p];
    let mut resid = BigFloat::zero(ctx.prec);
    for j in 0..p {
        for (idx, c) in f.components[j].iter_terms() {
            if let Some(a) = diag_exponent(idx, p, j, true) {
                lam[j].add_to_coef(a, c);
            } else if c.mag_inf() > resid {
                resid = c.mag_inf();
            }
        }
    }
    (lam, resid)
}

pub struct SigmaNormalForm {
    /// Normalized conjugation in the complement of the centralizer.
    pub psi: FormalMap,
    /// Invariant multipliers M_j(zeta) with M_j(0) = mu_j.
    pub m: Vec<FormalSeries>,
    pub n: Vec<FormalSeries>,
    /// Principal square roots of M_j.
    pub lambda1: Vec<FormalSeries>,
    pub divisor_log: Vec<DivisorUse>,
}

impl SigmaNormalForm {
    pub fn sigma_star(&self, ctx: &Ctx, d: u32) -> FormalMap {
        map_from_invariants(ctx, &self.m, &self.n, d)
    }
}

/// Poincare-Dulac normalization of sigma, solved degree by degree from the
/// conjugacy defect; every divided small divisor is logged.
pub fn normalize_sigma(
    sigma: &FormalMap,
    dv: &DivisorProvider,
    d: u32,
) -> Result<SigmaNormalForm, Error> {
    let ctx = sigma.ctx().clone();
    let nv = sigma.n_source();
    let p = nv / 2;
    if dv.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: dv.p() });
    }
    // linear part must be the diagonal S-hat of the provider
    let lin = sigma.linear_matrix();
    for i in 0..nv {
        for k in 0..nv {
            let want = if i != k {
                ctx.zero()
            } else if i < p {
                dv.mu(i)
            } else {
                dv.mu(i - p).recip()
            };
            if lin.at(i, k).sub(&want).mag_inf() > ctx.guard_band() {
                return Err(Error::Hypothesis(
                    "sigma is not tangent to the diagonal reversible linear part; apply the linear normalization first".into(),
                ));
            }
        }
    }
    dv.check_nonresonant(d)?;
    let dz = zeta_degree(d);
    let mut m: Vec<FormalSeries> = (0..p)
        .map(|j| FormalSeries::constant(&ctx, p, dz, dv.mu(j)))
        .collect();
    let mut n: Vec<FormalSeries> = (0..p)
        .map(|j| FormalSeries::constant(&ctx, p, dz, dv.mu(j).recip()))
        .collect();
    let mut psi = FormalMap::identity(&ctx, nv, d);
    for k in 2..=d {
        let sigma_star = map_from_invariants(&ctx, &m, &n, d);
        let defect = compose(sigma, &psi)?
            .sub(&compose(&psi, &sigma_star)?)
            .homogeneous_part(k);
        if defect.max_coef_mag() < ctx.zero_tol {
            continue;
        }
        for j in 0..p {
            for (idx, c) in defect.components[j].iter_terms() {
                let diff: Vec<i64> = (0..p)
                    .map(|t| idx.get(t) as i64 - idx.get(p + t) as i64)
                    .collect();
                let resonant = (0..p).all(|t| diff[t] == i64::from(t == j));
                if resonant {
                    if let Some(a) = diag_exponent(idx, p, j, false) {
                        m[j].add_to_coef(a, c);
                    }
                } else {
                    let div = dv.divisor(j, &diff, false)?;
                    psi.components[j].add_to_coef(idx.clone(), &c.div(&div));
                }
            }
            for (idx, c) in defect.components[p + j].iter_terms() {
                let diff: Vec<i64> = (0..p)
                    .map(|t| idx.get(t) as i64 - idx.get(p + t) as i64)
                    .collect();
                let resonant = (0..p).all(|t| diff[t] == -i64::from(t == j));
                if resonant {
                    if let Some(a) = diag_exponent(idx, p, j, true) {
                        n[j].add_to_coef(a, c);
                    }
                } else {
                    let div = dv.divisor(j, &diff, true)?;
                    psi.components[p + j].add_to_coef(idx.clone(), &c.div(&div));
                }
            }
        }
    }
    // final conjugacy residual (relative to the largest coefficient in play)
    let sigma_star = map_from_invariants(&ctx, &m, &n, d);
    let resid = compose(sigma, &psi)?.sub(&compose(&psi, &sigma_star)?);
    let scale = psi
        .max_coef_mag()
        .mul(&sigma.max_coef_mag())
        .add(&BigFloat::from_u64(1, ctx.prec));
    if resid.max_coef_mag() > crate::manifolds::residual_tol(&ctx, d).mul(&scale) {
        return Err(Error::Hypothesis(format!(
            "conjugacy residual too large: {:.2} (log2)",
            resid.max_coef_mag().log2_abs()
        )));
    }
    let lambda1 = m.iter().map(|s| s.sqrt_unit()).collect();
    Ok(SigmaNormalForm { psi, m, n, lambda1, divisor_log: dv.take_log() })
}

/// The anti-holomorphic action on zeta coordinates: conjugate coefficients
/// and swap the complex pairs s <-> s+s*.
pub fn rho_z_series(s: &FormalSeries, counts: (usize, usize, usize)) -> FormalSeries {
    let (e, h, ss) = counts;
    let p = e + h + 2 * ss;
    assert_eq!(s.n, p);
    let perm: Vec<usize> = (0..p)
        .map(|k| {
            if k < e + h {
                k
            } else if k < e + h + ss {
                k + ss
            } else {
                k - ss
            }
        })
        .collect();
    let mut out = FormalSeries::zero(&s.ctx, p, s.deg);
    for (k, c) in s.conj_coeffs().iter_terms() {
        out.set_coef(k.permuted(&perm), c.clone());
    }
    out
}

pub struct PairNormalForm {
    /// Total conjugation so far (Psi of the sigma step composed with the
    /// pair-normalizing correction).
    pub psi_total: FormalMap,
    pub lambda1: Vec<FormalSeries>,
    pub m: Vec<FormalSeries>,
    pub sigma_nf: SigmaNormalForm,
    /// Residuals of the reality relations (zero when counts are supplied).
    pub reality_residual: BigFloat,
}

/// Normalize the involution pair: after the sigma step, correct inside the
/// centralizer complement of {T-hat_1, T-hat_2} so that
/// Lambda_2 = Lambda_1^{-1}.
pub fn normalize_pair(
    tau1: &FormalMap,
    tau2: &FormalMap,
    rho: &Matrix,
    dv: &DivisorProvider,
    d: u32,
    counts: Option<(usize, usize, usize)>,
) -> Result<PairNormalForm, Error> {
    let ctx = tau1.ctx().clone();
    let nv = tau1.n_source();
    let p = nv / 2;
    // reality of the input pair
    let t2c = tau1.conjugate_by_antilinear(rho);
    if !t2c.approx_eq(&tau2.truncated(d), &crate::manifolds::residual_tol(&ctx, d)) {
        return Err(Error::Hypothesis("tau_2 is not the rho-conjugate of tau_1".into()));
    }
    let sigma = compose(&tau1.truncated(d), &tau2.truncated(d))?;
    let nf = normalize_sigma(&sigma, dv, d)?;
    // Psi commutes with rho
    let psi_r = nf.psi.conjugate_by_antilinear(rho);
    if !psi_r.approx_eq(&nf.psi, &crate::manifolds::residual_tol(&ctx, d)) {
        return Err(Error::Hypothesis(
            "normalizing map fails to commute with the anti-holomorphic involution".into(),
        ));
    }
    let psi_inv = invert(&nf.psi)?;
    let t1s = compose(&psi_inv, &compose(&tau1.truncated(d), &nf.psi)?)?;
    let t2s = compose(&psi_inv, &compose(&tau2.truncated(d), &nf.psi)?)?;
    let (lam1, r1) = extract_lambda(&t1s);
    let (lam2, r2) = extract_lambda(&t2s);
    let shape_tol = crate::manifolds::residual_tol(&ctx, d)
        .mul(&tau1.max_coef_mag().add(&BigFloat::from_u64(1, ctx.prec)));
    if r1 > shape_tol || r2 > shape_tol {
        return Err(Error::Hypothesis(
            "conjugated involutions are not in the invariant-multiplier shape".into(),
        ));
    }
    // solve a_j with (1 - a)/(1 + a) = kappa(s(zeta))^{-1/2}
    let dz = zeta_degree(d);
    let kappa: Vec<FormalSeries> = (0..p).map(|j| lam1[j].mul(&lam2[j])).collect();
    let mut a: Vec<FormalSeries> = (0..p).map(|_| FormalSeries::zero(&ctx, p, dz)).collect();
    for _ in 0..=dz + 1 {
        // s_j(zeta) = (1 - a_j^2) zeta_j
        let s_map = FormalMap::new(
            (0..p)
                .map(|j| {
                    let one = FormalSeries::one(&ctx, p, dz);
                    let fac = one.sub(&a[j].mul(&a[j]));
                    fac.mul(&FormalSeries::variable(&ctx, p, dz, j))
                })
                .collect(),
        );
        let mut a_new = Vec::with_capacity(p);
        for j in 0..p {
            let ks = compose(&FormalMap::new(vec![kappa[j].clone()]), &s_map);
            let ks = match ks {
                Ok(mp) => mp.components[0].clone(),
                Err(_) => kappa[j].clone(),
            };
            let w = ks.sqrt_unit();
            let one = FormalSeries::one(&ctx, p, dz);
            // a = (w - 1)/(w + 1)
            a_new.push(w.sub(&one).mul(&w.add(&one).invert_unit()));
        }
        a = a_new;
    }
    // psi0: xi_j -> (1 + a_j(zeta)) xi_j, eta_j -> (1 - a_j(zeta)) eta_j
    let one_map: Vec<FormalSeries> = (0..p).map(|_| FormalSeries::one(&ctx, p, dz)).collect();
    let alpha: Vec<FormalSeries> = (0..p).map(|j| one_map[j].add(&a[j])).collect();
    let beta: Vec<FormalSeries> = (0..p).map(|j| one_map[j].sub(&a[j])).collect();
    let psi0 = scaling_map(&ctx, &alpha, &beta, d);
    let psi0_inv = invert(&psi0)?;
    let t1t = compose(&psi0_inv, &compose(&t1s, &psi0)?)?;
    let t2t = compose(&psi0_inv, &compose(&t2s, &psi0)?)?;
    let (lam1t, rr1) = extract_lambda(&t1t);
    let (lam2t, rr2) = extract_lambda(&t2t);
    if rr1 > shape_tol || rr2 > shape_tol {
        return Err(Error::Hypothesis("pair correction left the multiplier shape".into()));
    }
    // Lambda_2 = Lambda_1^{-1}?
    let mut worst = BigFloat::zero(ctx.prec);
    for j in 0..p {
        let prod = lam1t[j].mul(&lam2t[j]).sub(&FormalSeries::one(&ctx, p, dz));
        let v = prod.max_coef_mag();
        if v > worst {
            worst = v;
        }
    }
    if worst > shape_tol {
        return Err(Error::Hypothesis(format!(
            "Lambda_1 Lambda_2 - 1 residual too large: {:.2} (log2)",
            worst.log2_abs()
        )));
    }
    let m_tilde: Vec<FormalSeries> = (0..p).map(|j| lam1t[j].mul(&lam1t[j])).collect();
    // reality relations
    let mut reality = BigFloat::zero(ctx.prec);
    if let Some(cts) = counts {
        let (e, h, ss) = cts;
        for j in 0..p {
            let r = if j < e {
                lam1t[j].sub(&rho_z_series(&lam1t[j], cts))
            } else if j < e + h {
                lam1t[j]
                    .invert_unit()
                    .sub(&rho_z_series(&lam1t[j], cts))
            } else if j < e + h + ss {
                lam1t[j + ss].sub(&rho_z_series(&lam1t[j].invert_unit(), cts))
            } else {
                continue;
            };
            let v = r.max_coef_mag();
            if v > reality {
                reality = v;
            }
        }
    }
    let psi_total = compose(&nf.psi, &psi0)?;
    Ok(PairNormalForm {
        psi_total,
        lambda1: lam1t,
        m: m_tilde,
        sigma_nf: nf,
        reality_residual: reality,
    })
}

/// Diagonal scaling map xi_j' = alpha_j(zeta) xi_j, eta_j' = beta_j(zeta) eta_j.
pub fn scaling_map(
    ctx: &Ctx,
    alpha: &[FormalSeries],
    beta: &[FormalSeries],
    d: u32,
) -> FormalMap {
    let p = alpha.len();
    let nv = 2 * p;
    let mut comps = Vec::with_capacity(nv);
    let expand = |series: &FormalSeries, j: usize, eta_side: bool| -> FormalSeries {
        let mut out = FormalSeries::zero(ctx, nv, d);
        for (a, c) in series.iter_terms() {
            let mut idx = vec![0u16; nv];
            for k in 0..p {
                idx[k] += a.get(k);
                idx[p + k] += a.get(k);
            }
            if eta_side {
                idx[p + j] += 1;
            } else {
                idx[j] += 1;
            }
            let mi = MultiIndex::from_slice(&idx);
            if mi.degree() <= d {
                out.set_coef(mi, c.clone());
            }
        }
        out
    };
    for j in 0..p {
        comps.push(expand(&alpha[j], j, false));
    }
    for j in 0..p {
        comps.push(expand(&beta[j], j, true));
    }
    FormalMap::new(comps)
}

/// The log of the multiplier tuple: log(M_j / M_j(0)), with a factor -i
/// for non-elliptic components.
pub fn log_m(ctx: &Ctx, m: &[FormalSeries], e_star: usize) -> Vec<FormalSeries> {
    m.iter()
        .enumerate()
        .map(|(j, s)| {
            let l = s.log_unit_normalized();
            if j < e_star {
                l
            } else {
                l.scale(&Complex::i(ctx.prec).neg())
            }
        })
        .collect()
}

pub struct LogMNormalForm {
    /// Hyperplane-preserving change psi_j(zeta) = zeta_j (1 + g_j(zeta)).
    pub psi: FormalMap,
    /// Normal form F-hat = F o psi with d(F-hat - I)_j / d zeta_j = 0.
    pub f_hat: FormalMap,
}

/// Normal form of a map F of C^p tangent to the identity under
/// hyperplane-preserving right composition: the j-th nonlinear component
/// of the normal form is independent of zeta_j.
pub fn normalize_log_m(f: &FormalMap, d: u32) -> Result<LogMNormalForm, Error> {
    let ctx = f.ctx().clone();
    let p = f.n_source();
    if !f.is_tangent_to_identity(&ctx.guard_band()) {
        let lin = f.linear_matrix();
        return Err(Error::Refusal {
            code: "log-multiplier-not-tangent",
            reason: format!(
                "the log-multiplier map is not tangent to the identity: linear part max deviation 2^{:.1}",
                lin.sub(&Matrix::identity(&ctx, p)).max_mag().log2_abs()
            ),
        });
    }
    let fnl = f.sub(&FormalMap::identity(&ctx, p, d));
    let mut g: Vec<FormalSeries> = (0..p).map(|_| FormalSeries::zero(&ctx, p, d)).collect();
    let mut f_hat: Vec<FormalSeries> = (0..p).map(|_| FormalSeries::zero(&ctx, p, d)).collect();
    for k in 2..=d {
        let psi = FormalMap::new(
            (0..p)
                .map(|j| {
                    FormalSeries::variable(&ctx, p, d, j)
                        .mul(&FormalSeries::one(&ctx, p, d).add(&g[j]))
                })
                .collect(),
        );
        let fp = compose(&fnl, &psi)?;
        for j in 0..p {
            let slice = fp.components[j].homogeneous_part(k);
            for (q, c) in slice.iter_terms() {
                if q.get(j) > 0 {
                    // g_{j, Q - e_j} = -{f_j(psi)}_Q
                    let mut qd = q.clone();
                    qd.0[j] -= 1;
                    g[j].add_to_coef(qd, &c.neg());
                } else {
                    f_hat[j].add_to_coef(q.clone(), c);
                }
            }
        }
    }
    let psi = FormalMap::new(
        (0..p)
            .map(|j| {
                FormalSeries::variable(&ctx, p, d, j)
                    .mul(&FormalSeries::one(&ctx, p, d).add(&g[j]))
            })
            .collect(),
    );
    let f_hat_map = FormalMap::identity(&ctx, p, d).add(&FormalMap::new(f_hat));
    // residual: F o psi = F-hat
    let resid = compose(&f.truncated(d), &psi)?.sub(&f_hat_map);
    let scale = f.max_coef_mag().add(&BigFloat::from_u64(1, ctx.prec));
    if resid.max_coef_mag() > crate::manifolds::residual_tol(&ctx, d).mul(&scale) {
        return Err(Error::Hypothesis("log-multiplier normalization residual too large".into()));
    }
    Ok(LogMNormalForm { psi, f_hat: f_hat_map })
}

pub struct UniqueNormalForm {
    /// Final invariant multipliers M-hat (unique up to the 2^p dilations).
    pub m_hat: Vec<FormalSeries>,
    pub lambda_hat: Vec<FormalSeries>,
    /// Full conjugation from the input pair to the normal form.
    pub psi_total: FormalMap,
    pub pair: PairNormalForm,
    /// The normal form of log M-hat.
    pub log_nf: LogMNormalForm,
}

/// Unique formal normal form of the pair: the sigma/pair steps followed by
/// the log-multiplier normalization, exactly in that order.
pub fn unique_normal_form(
    tau1: &FormalMap,
    tau2: &FormalMap,
    rho: &Matrix,
    dv: &DivisorProvider,
    d: u32,
    counts: (usize, usize, usize),
) -> Result<UniqueNormalForm, Error> {
    let ctx = tau1.ctx().clone();
    let p = tau1.n_source() / 2;
    let (e_star, _, _) = counts;
    let pair = normalize_pair(tau1, tau2, rho, dv, d, Some(counts))?;
    let dz = zeta_degree(d);
    let f = FormalMap::new(log_m(&ctx, &pair.m, e_star));
    // allowed dilation: F'(0) must be diagonal, invertible, with positive
    // entries on elliptic/hyperbolic slots after scaling.
    let a0 = f.linear_matrix();
    for i in 0..p {
        for k in 0..p {
            if i != k && a0.at(i, k).mag_inf() > ctx.guard_band() {
                return Err(Error::Refusal {
                    code: "log-multiplier-linear-part",
                    reason: "Jacobian of log M at 0 is not diagonal; tangency hypothesis fails"
                        .into(),
                });
            }
        }
        if a0.at(i, i).mag_inf() < ctx.guard_band() {
            return Err(Error::Refusal {
                code: "log-multiplier-linear-part",
                reason: format!("diagonal entry {i} of the log-multiplier Jacobian vanishes"),
            });
        }
    }
    // b_j = 1 / A_jj; reality: b_e, b_h > 0 real
    let mut b = Vec::with_capacity(p);
    for i in 0..p {
        let bi = a0.at(i, i).recip();
        if i < counts.0 + counts.1 {
            if bi.im.abs() > ctx.guard_band() || bi.re.is_negative() {
                return Err(Error::Refusal {
                    code: "log-multiplier-dilation",
                    reason: format!(
                        "required dilation on slot {i} is not positive real; tangency cannot be arranged"
                    ),
                });
            }
        }
        b.push(bi);
    }
    // dilated multipliers: M'_j = M_j o (diag b zeta)
    let dil = FormalMap::from_matrix(&ctx, &Matrix::diag(&ctx, &b), dz);
    let m_dil: Vec<FormalSeries> = pair
        .m
        .iter()
        .map(|s| compose(&FormalMap::new(vec![s.clone()]), &dil).map(|mm| mm.components[0].clone()))
        .collect::<Result<_, _>>()?;
    let f_dil = FormalMap::new(log_m(&ctx, &m_dil, e_star));
    let log_nf = normalize_log_m(&f_dil, dz)?;
    // M-hat from F-hat
    let m_hat: Vec<FormalSeries> = (0..p)
        .map(|j| {
            let lg = if j < e_star {
                log_nf.f_hat.components[j].clone()
            } else {
                log_nf.f_hat.components[j].scale(&Complex::i(ctx.prec))
            };
            lg.exp_nilpotent().scale(&dv.mu(j))
        })
        .collect();
    let lambda_hat: Vec<FormalSeries> = m_hat.iter().map(|s| s.sqrt_unit()).collect();
    // lift psi to (xi, eta): zeta_j -> b_j zeta_j (1 + g_j(b zeta)):
    // xi_j' = w_j^{1/2}(xi eta) xi_j with w_j = b_j (1 + g_j o dil)
    let mut alpha = Vec::with_capacity(p);
    for j in 0..p {
        // zeta-change: zeta_j -> b_j psi_j(zeta) = b_j zeta_j (1 + g_j(zeta))
        let gj = div_zeta(&log_nf.psi.components[j], j)?;
        let w = gj.scale(&b[j]);
        alpha.push(w.sqrt_unit());
    }
    let lift = scaling_map(&ctx, &alpha, &alpha, d);
    let psi_total = compose(&pair.psi_total, &lift)?;
    Ok(UniqueNormalForm { m_hat, lambda_hat, psi_total, pair, log_nf })
}

/// Residual conjugacy invariant of the generator family: the unique
/// normalized map conjugating the family to the hatted generators; the
/// singularity is abelian-at-origin exactly when it is the identity.
pub fn psi_invariant(
    tau1_family: &[FormalMap],
    lambda_hat: &[FormalSeries],
    d: u32,
) -> Result<FormalMap, Error> {
    let ctx = tau1_family[0].ctx().clone();
    let p = tau1_family.len();
    let nv = 2 * p;
    let (e, einv) = e_lambda_nonlinear(&ctx, lambda_hat, d)?;
    // kappa_j = E^{-1} tau_{1j} E must have linear part Z_j (B = identity)
    let mut kappas = Vec::with_capacity(p);
    for (j, t) in tau1_family.iter().enumerate() {
        let k = compose(&einv, &compose(&t.truncated(d), &e)?)?;
        let lin = k.linear_matrix();
        let mut zj = Matrix::identity(&ctx, nv);
        *zj.at_mut(p + j, p + j) = ctx.real(-1.0);
        if lin.sub(&zj).max_mag() > crate::manifolds::residual_tol(&ctx, d) {
            return Err(Error::Hypothesis(
                "generator family is not in the identity-matrix-invariant position (B = I required)"
                    .into(),
            ));
        }
        kappas.push(k);
    }
    // simultaneous linearization of the kappa family by averaging
    let mut phi = FormalMap::identity(&ctx, nv, d);
    for (j, _) in kappas.iter().enumerate() {
        let phi_inv = invert(&phi)?;
        let cur = compose(&phi_inv, &compose(&kappas[j], &phi)?)?;
        let mut zj = Matrix::identity(&ctx, nv);
        *zj.at_mut(p + j, p + j) = ctx.real(-1.0);
        let zmap = FormalMap::from_matrix(&ctx, &zj, d);
        let half = ctx.real(0.5);
        let g = FormalMap::identity(&ctx, nv, d)
            .add(&compose(&zmap, &cur)?)
            .apply_matrix_left(&Matrix::diag(&ctx, &vec![half; nv]));
        // g f g^{-1} = Lf, so phi <- phi o g^{-1}
        phi = compose(&phi, &invert(&g)?)?;
    }
    // verify: phi^{-1} kappa_j phi = Z_j
    let phi_inv = invert(&phi)?;
    for (j, k) in kappas.iter().enumerate() {
        let lined = compose(&phi_inv, &compose(k, &phi)?)?;
        let mut zj = Matrix::identity(&ctx, nv);
        *zj.at_mut(p + j, p + j) = ctx.real(-1.0);
        let zmap = FormalMap::from_matrix(&ctx, &zj, d);
        if !lined.approx_eq(&zmap, &crate::manifolds::residual_tol(&ctx, d)) {
            return Err(Error::Hypothesis(
                "generator family could not be simultaneously diagonalized".into(),
            ));
        }
    }
    // decompose phi^{-1}... the conjugator is phi with kappa = phi Z phi^{-1}
    let zfam = SymmetryFamily::ZFamily { ctx: ctx.clone(), p };
    let (psi1, _g) = decompose(&phi, &zfam)?;
    let psi = compose(&e, &compose(&psi1, &einv)?)?;
    Ok(psi)
}

/// Divide by the coordinate variable zeta_j; every stored monomial must
/// contain it (hyperplane preservation).
fn div_zeta(s: &FormalSeries, j: usize) -> Result<FormalSeries, Error> {
    let mut out = FormalSeries::zero(&s.ctx, s.n, s.deg);
    for (idx, c) in s.iter_terms() {
        match idx.decremented(j) {
            Some(d) => out.set_coef(d, c.clone()),
            None => {
                return Err(Error::Hypothesis(
                    "series is not divisible by the coordinate variable".into(),
                ))
            }
        }
    }
    Ok(out)
}
