//! Real-analytic submanifolds z'' = E(z', conj z') at a CR singularity of
//! maximal complex tangent dimension: complexification, deck
//! transformations of the branched projection, extraction of the
//! distinguished involution family, realization of an involution family
//! back into a manifold, and the CR-singular determinant.
//!
//! Variable convention: all series live on 2p variables; slots 0..p are
//! z', slots p..2p are the conjugate slot (written w' on the
//! complexification).

use crate::error::Error;
use crate::fps::{compose, invert, solve_implicit, FormalMap, FormalSeries, MultiIndex};
use crate::linalg::Matrix;
use crate::num::{BigFloat, Complex, Ctx};
use crate::quadrics::{classify_linear, LinearNormalization};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormTag {
    Generic,
    SquareForm,
}

/// z_{p+j} = E_j(z', conj z'), E_j vanishing to second order.
#[derive(Clone)]
pub struct ManifoldSpec {
    pub ctx: Ctx,
    pub p: usize,
    /// E_j as series in 2p variables (z', w'-slot standing for conj z').
    pub e: Vec<FormalSeries>,
    pub form: FormTag,
    /// Square form data: E_j = (A_j)^2 where A is a p-component map with
    /// invertible anti-holomorphic linear part.
    pub square_inner: Option<FormalMap>,
}

impl ManifoldSpec {
    pub fn new_generic(ctx: &Ctx, p: usize, e: Vec<FormalSeries>) -> Result<Self, Error> {
        check_e(ctx, p, &e)?;
        Ok(ManifoldSpec { ctx: ctx.clone(), p, e, form: FormTag::Generic, square_inner: None })
    }

    /// Square form from the inner map A (p components in 2p variables):
    /// E_j = A_j^2.
    pub fn new_square(ctx: &Ctx, p: usize, inner: FormalMap) -> Result<Self, Error> {
        if inner.n_target() != p || inner.n_source() != 2 * p {
            return Err(Error::DimensionMismatch { expected: p, got: inner.n_target() });
        }
        // anti-holomorphic linear block must be invertible
        let lin = inner.linear_matrix();
        let bw = Matrix::from_fn(ctx, p, p, |i, j| lin.at(i, p + j).clone());
        bw.inverse().map_err(|_| {
            Error::Hypothesis("square form: anti-holomorphic linear part is singular".into())
        })?;
        let e = inner.components.iter().map(|a| a.mul(a)).collect();
        Ok(ManifoldSpec {
            ctx: ctx.clone(),
            p,
            e,
            form: FormTag::SquareForm,
            square_inner: Some(inner),
        })
    }

    pub fn deg(&self) -> u32 {
        self.e[0].deg
    }
}

fn check_e(_ctx: &Ctx, p: usize, e: &[FormalSeries]) -> Result<(), Error> {
    if e.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: e.len() });
    }
    for s in e {
        if s.n != 2 * p {
            return Err(Error::DimensionMismatch { expected: 2 * p, got: s.n });
        }
        if let Some(o) = s.min_order() {
            if o < 2 {
                return Err(Error::Hypothesis(
                    "defining functions must vanish to second order".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Complexified system: z_{p+i} = E_i(z', w'), w_{p+i} = conj-E_i(w', z').
#[derive(Clone)]
pub struct Complexification {
    pub p: usize,
    pub z_eq: Vec<FormalSeries>,
    pub w_eq: Vec<FormalSeries>,
}

/// Swap the z- and w-variable blocks of a series on 2p variables.
pub fn swap_blocks(s: &FormalSeries, p: usize) -> FormalSeries {
    let perm: Vec<usize> = (0..2 * p).map(|k| if k < p { p + k } else { k - p }).collect();
    let mut out = FormalSeries::zero(&s.ctx, s.n, s.deg);
    for (k, c) in s.iter_terms() {
        out.set_coef(k.permuted(&perm), c.clone());
    }
    out
}

pub fn complexify(m: &ManifoldSpec) -> Complexification {
    let w_eq = m.e.iter().map(|s| swap_blocks(&s.conj_coeffs(), m.p)).collect();
    Complexification { p: m.p, z_eq: m.e.clone(), w_eq }
}

/// Determinant of the anti-holomorphic Jacobian (d E_j / d w_k), whose
/// zero locus on the manifold is the CR-singular set.
pub fn cr_singular_set(m: &ManifoldSpec, d: u32) -> FormalSeries {
    let p = m.p;
    let ctx = &m.ctx;
    let cols: Vec<Vec<FormalSeries>> = (0..p)
        .map(|j| (0..p).map(|k| m.e[j].derivative(p + k).truncated(d)).collect())
        .collect();
    // Leibniz expansion (p is small)
    let mut perm: Vec<usize> = (0..p).collect();
    let mut acc = FormalSeries::zero(ctx, 2 * p, d);
    loop {
        let mut term = FormalSeries::one(ctx, 2 * p, d);
        for (j, &pj) in perm.iter().enumerate() {
            term = term.mul(&cols[j][pj]);
        }
        if perm_sign(&perm) < 0 {
            term = term.neg();
        }
        acc = acc.add(&term);
        if !next_perm(&mut perm) {
            break;
        }
    }
    acc
}

fn perm_sign(p: &[usize]) -> i32 {
    let mut sign = 1;
    for i in 0..p.len() {
        for j in 0..i {
            if p[j] > p[i] {
                sign = -sign;
            }
        }
    }
    sign
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

/// Homogeneous quadratic part q_j(w') = E_j(0, w').
fn q_part(m: &ManifoldSpec) -> Vec<FormalSeries> {
    let p = m.p;
    m.e.iter()
        .map(|s| {
            let mut out = FormalSeries::zero(&m.ctx, 2 * p, s.deg);
            for (k, c) in s.iter_terms() {
                if k.degree() == 2 && (0..p).all(|j| k.get(j) == 0) {
                    out.set_coef(k.clone(), c.clone());
                }
            }
            out
        })
        .collect()
}

/// Report on the branched-covering hypothesis test.
#[derive(Debug, Clone)]
pub struct ConditionBReport {
    pub holds: bool,
    /// true when established by an exact resultant, false for the
    /// random-probe route (Monte-Carlo, not a certificate).
    pub certified: bool,
}

/// Test that q(w') vanishes only at the origin.
pub fn condition_b(m: &ManifoldSpec) -> ConditionBReport {
    let ctx = &m.ctx;
    let p = m.p;
    let q = q_part(m);
    // collect coefficient matrices Q_j (symmetric) over w-variables
    let qc = |j: usize, a: usize, b: usize| -> Complex {
        let mut idx = vec![0u16; 2 * p];
        idx[p + a] += 1;
        idx[p + b] += 1;
        let c = q[j].coef(&MultiIndex::from_slice(&idx));
        if a == b {
            c
        } else {
            c.mul(&ctx.real(0.5))
        }
    };
    match p {
        1 => {
            let c = qc(0, 0, 0);
            ConditionBReport { holds: !ctx.is_zero(&c), certified: true }
        }
        2 => {
            // resultant of two binary quadratic forms:
            // q_j = a_j x^2 + b_j x y + c_j y^2; Res = det of the 4x4
            // Sylvester matrix of the dehomogenizations.
            let (a1, b1, c1) = (qc(0, 0, 0), qc(0, 0, 1).mul_i64(2), qc(0, 1, 1));
            let (a2, b2, c2) = (qc(1, 0, 0), qc(1, 0, 1).mul_i64(2), qc(1, 1, 1));
            let z = ctx.zero();
            let rows = [
                [a1.clone(), b1.clone(), c1.clone(), z.clone()],
                [z.clone(), a1, b1, c1],
                [a2.clone(), b2.clone(), c2.clone(), z.clone()],
                [z.clone(), a2.clone(), b2.clone(), c2.clone()],
            ];
            let m4 = Matrix::from_fn(ctx, 4, 4, |i, j| rows[i][j].clone());
            let res = m4.det();
            // the resultant certifies no common projective root; also need
            // each q_j nonzero (degenerate all-zero row caught by det = 0
            // only if the other has a root... handle q_j == 0 directly)
            let degenerate = (0..2).any(|j| q[j].is_zero());
            ConditionBReport { holds: !degenerate && !ctx.is_zero(&res), certified: true }
        }
        _ => {
            // random-line probe (documented Monte-Carlo test)
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
            };
            let mut min_mag = BigFloat::from_u64(u64::MAX, ctx.prec);
            for _ in 0..200 {
                let dir: Vec<Complex> = (0..p).map(|_| ctx.cplx(rnd(), rnd())).collect();
                let norm: BigFloat = dir
                    .iter()
                    .fold(BigFloat::zero(ctx.prec), |acc, c| acc.add(&c.norm_sqr()))
                    .sqrt();
                if norm < ctx.zero_tol {
                    continue;
                }
                let pt: Vec<Complex> = {
                    let mut v = vec![ctx.zero(); 2 * p];
                    for (k, c) in dir.iter().enumerate() {
                        v[p + k] = c.mul_real(&norm.recip());
                    }
                    v
                };
                let mag = q
                    .iter()
                    .fold(BigFloat::zero(ctx.prec), |acc, s| {
                        let v = s.eval(&pt).mag_inf();
                        if v > acc {
                            v
                        } else {
                            acc
                        }
                    });
                if mag < min_mag {
                    min_mag = mag;
                }
            }
            ConditionBReport { holds: min_mag > ctx.guard_band(), certified: false }
        }
    }
}

/// All deck transformations of the first projection, through degree d.
/// Returned as maps (z', w') -> (z', f(z', w')) on 2p variables, identity
/// included; the count is a power of two.
pub fn deck_transformations(m: &ManifoldSpec, d: u32) -> Result<Vec<FormalMap>, Error> {
    let rep = condition_b(m);
    if !rep.holds {
        return Err(Error::ConditionB);
    }
    let decks = match m.form {
        FormTag::SquareForm => decks_square(m, d)?,
        FormTag::Generic => decks_generic(m, d)?,
    };
    // count must be a power of two
    if !decks.len().is_power_of_two() {
        return Err(Error::DeckCount { expected: decks.len().next_power_of_two(), got: decks.len() });
    }
    // verify involution + invariance
    let ctx = &m.ctx;
    let tol = residual_tol(ctx, d);
    for t in &decks {
        let tt = compose(t, t)?;
        if !tt.approx_eq(&FormalMap::identity(ctx, 2 * m.p, d), &tol) {
            return Err(Error::Hypothesis("deck candidate is not an involution".into()));
        }
        for ej in &m.e {
            let lhs = compose(
                &FormalMap::new(vec![ej.truncated(d)]),
                t,
            )?;
            if !lhs.components[0].approx_eq(&ej.truncated(d), &tol) {
                return Err(Error::Hypothesis("deck candidate does not preserve E".into()));
            }
        }
    }
    Ok(decks)
}

/// Residual tolerance scaled with degree (accumulated composition noise).
pub fn residual_tol(ctx: &Ctx, d: u32) -> BigFloat {
    ctx.guard_band().mul(&BigFloat::from_u64(1u64 << d.min(40), ctx.prec))
}

fn decks_square(m: &ManifoldSpec, d: u32) -> Result<Vec<FormalMap>, Error> {
    let ctx = &m.ctx;
    let p = m.p;
    let inner = m.square_inner.as_ref().expect("square form");
    let inner = inner.truncated(d);
    let lin = inner.linear_matrix();
    let bw = Matrix::from_fn(ctx, p, p, |i, j| lin.at(i, p + j).clone());
    let bw_inv = bw.inverse()?;
    let mut out = Vec::new();
    for signs in 0..(1usize << p) {
        // solve  A(z', u) = Esign * A(z', w')  for u(z', w'):
        // u = Binv( Esign A(z',w') - (A(z',u) - B u) )
        // Theta in variables (z' (p), w' (p), u (p)), p components.
        let sign_mat = Matrix::from_fn(ctx, p, p, |i, j| {
            if i == j {
                if signs >> i & 1 == 1 {
                    ctx.real(-1.0)
                } else {
                    ctx.one()
                }
            } else {
                ctx.zero()
            }
        });
        // A(z', u) with u in the third block: compose inner with the linear
        // embedding (z,w,u) -> (z,u)
        let mut emb = FormalMap::zero(ctx, 3 * p, 2 * p, d);
        for j in 0..p {
            emb.components[j] =
                FormalSeries::variable(ctx, 3 * p, d, j);
            emb.components[p + j] =
                FormalSeries::variable(ctx, 3 * p, d, 2 * p + j);
        }
        let a_zu = compose(&inner, &emb)?; // p comps in (z,w,u)
        // remainder: A(z,u) - B u
        let mut rem = a_zu.clone();
        for j in 0..p {
            for k in 0..p {
                let cur = rem.components[j].coef(&MultiIndex::unit(3 * p, 2 * p + k));
                rem.components[j]
                    .set_coef(MultiIndex::unit(3 * p, 2 * p + k), cur.sub(bw.at(j, k)));
            }
        }
        // Esign A(z,w) lifted to (z,w,u)
        let mut emb_zw = FormalMap::zero(ctx, 3 * p, 2 * p, d);
        for j in 0..2 * p {
            emb_zw.components[j] = FormalSeries::variable(ctx, 3 * p, d, j);
        }
        let a_zw = compose(&inner, &emb_zw)?.apply_matrix_left(&sign_mat);
        let theta = a_zw.sub(&rem).apply_matrix_left(&bw_inv);
        let u = solve_implicit(&theta, 2 * p, d)?;
        let mut comps = Vec::with_capacity(2 * p);
        for j in 0..p {
            comps.push(FormalSeries::variable(ctx, 2 * p, d, j));
        }
        comps.extend(u.components.into_iter());
        out.push(FormalMap::new(comps));
    }
    Ok(out)
}

/// Generic form: enumerate the linear decks of the quadratic model
/// (supported for p <= 2), then lift each degree by degree, discarding
/// candidates whose correction equation is unsolvable.
fn decks_generic(m: &ManifoldSpec, d: u32) -> Result<Vec<FormalMap>, Error> {
    let ctx = &m.ctx;
    let p = m.p;
    if p > 2 {
        return Err(Error::Hypothesis(
            "generic-form deck enumeration is implemented for p <= 2; use the square form".into(),
        ));
    }
    let linear = linear_decks_quadratic_model(m)?;
    let mut out = Vec::new();
    'cand: for (a, b) in linear {
        match lift_deck(m, &a, &b, d) {
            Ok(t) => out.push(t),
            Err(Error::Hypothesis(_)) => continue 'cand,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Linear maps w -> A w + B z preserving the quadratic model.
fn linear_decks_quadratic_model(m: &ManifoldSpec) -> Result<Vec<(Matrix, Matrix)>, Error> {
    let ctx = &m.ctx;
    let p = m.p;
    // quadratic data: h_j bilinear (z,w) matrix H_j, q_j quadratic in w: Q_j
    let mut hmat: Vec<Matrix> = Vec::with_capacity(p);
    let mut qmat: Vec<Matrix> = Vec::with_capacity(p);
    for j in 0..p {
        let mut hj = Matrix::zeros(ctx, p, p);
        let mut qj = Matrix::zeros(ctx, p, p);
        for (k, c) in m.e[j].iter_terms() {
            if k.degree() != 2 {
                continue;
            }
            let vars: Vec<(usize, u16)> =
                (0..2 * p).filter_map(|v| if k.get(v) > 0 { Some((v, k.get(v))) } else { None }).collect();
            match vars.as_slice() {
                [(v, 2)] => {
                    if *v >= p {
                        *qj.at_mut(v - p, v - p) = c.clone();
                    }
                    // purely holomorphic z^2 terms do not matter for decks
                }
                [(v1, 1), (v2, 1)] => {
                    if *v1 < p && *v2 >= p {
                        *hj.at_mut(*v1, *v2 - p) = c.clone();
                    } else if *v1 >= p && *v2 >= p {
                        let half = c.mul(&ctx.real(0.5));
                        *qj.at_mut(*v1 - p, *v2 - p) = half.clone();
                        *qj.at_mut(*v2 - p, *v1 - p) = half;
                    }
                }
                _ => {}
            }
        }
        hmat.push(hj);
        qmat.push(qj);
    }

    // find all linear branch maps u = A w on the z' = 0 slice by sampling +
    // fitting + Newton refinement on A^T Q_j A = Q_j.
    let amats = branch_linear_parts(ctx, p, &qmat)?;
    let mut out = Vec::new();
    for a in amats {
        // Solve H_j A + 2 B^T Q_j A = H_j for B (linear in B), then check
        // the z-quadratic condition sym(H_j B) + B^T Q_j B = 0.
        // Stack the linear system over entries of B (p^2 unknowns).
        let nn = p * p;
        let mut rows: Vec<Vec<Complex>> = Vec::new();
        let mut rhs: Vec<Complex> = Vec::new();
        for j in 0..p {
            let target = hmat[j].sub(&hmat[j].mul(&a)); // H_j - H_j A = 2 B^T Q_j A
            let qa = qmat[j].mul(&a);
            // (B^T Q_j A)[r][c] = sum_k B[k][r] (Q_j A)[k][c]
            for r in 0..p {
                for c in 0..p {
                    let mut row = vec![ctx.zero(); nn];
                    for k in 0..p {
                        row[k * p + r] = qa.at(k, c).mul_i64(2);
                    }
                    rows.push(row);
                    rhs.push(target.at(r, c).clone());
                }
            }
        }
        match solve_least_squares(ctx, &rows, &rhs) {
            Some(bvec) => {
                let b = Matrix::from_fn(ctx, p, p, |i, j| bvec[i * p + j].clone());
                // verify all equations incl. the z^2 one
                let mut ok = true;
                for j in 0..p {
                    let e1 = hmat[j].mul(&a).add(&b.transpose().mul(&qmat[j]).mul(&a).scale(&ctx.real(2.0))).sub(&hmat[j]);
                    let zz = {
                        let hb = hmat[j].mul(&b);
                        let sym = hb.add(&hb.transpose()).scale(&ctx.real(0.5));
                        sym.add(&b.transpose().mul(&qmat[j]).mul(&b))
                    };
                    if e1.max_mag() > ctx.guard_band() || zz.max_mag() > ctx.guard_band() {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    out.push((a, b));
                }
            }
            None => continue,
        }
    }
    Ok(out)
}

/// Enumerate linear maps A with q(Aw) = q(w) that arise as branch maps of
/// the covering on the z'=0 slice (p <= 2).
fn branch_linear_parts(ctx: &Ctx, p: usize, qmat: &[Matrix]) -> Result<Vec<Matrix>, Error> {
    let qeval = |j: usize, w: &[Complex]| -> Complex {
        let mut acc = ctx.zero();
        for r in 0..p {
            for c in 0..p {
                acc = acc.add(&qmat[j].at(r, c).mul(&w[r]).mul(&w[c]));
            }
        }
        acc
    };
    if p == 1 {
        // q = c w^2: branches u = +-w
        let one = Matrix::identity(ctx, 1);
        let neg = Matrix::from_fn(ctx, 1, 1, |_, _| ctx.real(-1.0));
        return Ok(vec![one, neg]);
    }
    // p == 2: base point w0 generic; fiber of q(u) = q(w0) has 4 points;
    // for each fiber point, fit a linear candidate from perturbed samples
    // and Newton-refine on A^T Q_j A = Q_j; non-linear branches fail the
    // residual test and are dropped.
    let w0 = vec![ctx.cplx(0.3, 0.11), ctx.cplx(-0.17, 0.23)];
    let c0: Vec<Complex> = (0..p).map(|j| qeval(j, &w0)).collect();
    let fiber = fiber_points_p2(ctx, qmat, &c0)?;
    let mut out = Vec::new();
    let h = BigFloat::from_pow2(1, -40, ctx.prec);
    for f0 in fiber {
        // samples: w0 + h e_k -> branch point via Newton seeded at f0
        let mut cols: Vec<Vec<Complex>> = Vec::new();
        let mut ok = true;
        for k in 0..p {
            let mut wp = w0.clone();
            wp[k] = wp[k].add(&Complex::from_real(h.clone()));
            let target: Vec<Complex> = (0..p).map(|j| qeval(j, &wp)).collect();
            match newton_fiber(ctx, qmat, &target, &f0) {
                Some(fk) => {
                    let col: Vec<Complex> = (0..p)
                        .map(|i| fk[i].sub(&f0[i]).mul_real(&h.recip()))
                        .collect();
                    cols.push(col);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        // candidate A: columns from finite differences; refine by Newton on
        // A^T Q_j A = Q_j (treating A entries as unknowns)
        let mut a = Matrix::from_fn(ctx, p, p, |i, j| cols[j][i].clone());
        if !refine_orthogonal(ctx, qmat, &mut a) {
            continue;
        }
        // verify the branch actually is linear: A w0 should equal f0
        let f_lin = a.mul_vec(&w0);
        let dist = f_lin
            .iter()
            .zip(&f0)
            .fold(BigFloat::zero(ctx.prec), |m, (x, y)| {
                let v = x.sub(y).mag_inf();
                if v > m {
                    v
                } else {
                    m
                }
            });
        if dist > BigFloat::from_pow2(1, -30, ctx.prec) {
            continue;
        }
        // dedupe
        if out.iter().all(|b: &Matrix| a.sub(b).max_mag() > ctx.guard_band()) {
            out.push(a);
        }
    }
    Ok(out)
}

/// All solutions of q_1(u) = c_1, q_2(u) = c_2 for two quadratic forms in
/// two variables (generic data).
fn fiber_points_p2(ctx: &Ctx, qmat: &[Matrix], c: &[Complex]) -> Result<Vec<Vec<Complex>>, Error> {
    // Solve q1(u1, u2) = c1 for u2 as roots of a quadratic in u2 for fixed
    // u1... instead: eliminate via resultant on a u1-grid is messy; use the
    // pencil trick: sample u1 from the roots of the degree-4 resultant.
    // Build the resultant numerically: treat r(u1) = Res_{u2}(q1 - c1,
    // q2 - c2): degree 4 polynomial in u1; interpolate from 5 samples.
    let quad_coeffs = |j: usize, u1: &Complex| -> (Complex, Complex, Complex) {
        // q_j(u1, u2) - c_j as a2 u2^2 + a1 u2 + a0
        let a2 = qmat[j].at(1, 1).clone();
        let a1 = qmat[j].at(0, 1).add(qmat[j].at(1, 0)).mul(u1);
        let a0 = qmat[j].at(0, 0).mul(u1).mul(u1).sub(&c[j]);
        (a2, a1, a0)
    };
    let res_at = |u1: &Complex| -> Complex {
        let (a2, a1, a0) = quad_coeffs(0, u1);
        let (b2, b1, b0) = quad_coeffs(1, u1);
        // resultant of two quadratics: (a2 b0 - a0 b2)^2 - (a2 b1 - a1 b2)(a1 b0 - a0 b1)
        let t1 = a2.mul(&b0).sub(&a0.mul(&b2));
        let t2 = a2.mul(&b1).sub(&a1.mul(&b2));
        let t3 = a1.mul(&b0).sub(&a0.mul(&b1));
        t1.mul(&t1).sub(&t2.mul(&t3))
    };
    // interpolate degree-4 polynomial through 5 nodes
    let nodes: Vec<Complex> = (0..5).map(|k| ctx.cplx(0.15 + 0.3 * k as f64, 0.07 * (k as f64 + 1.0))).collect();
    let vals: Vec<Complex> = nodes.iter().map(res_at).collect();
    let coeffs = interpolate_poly(ctx, &nodes, &vals);
    let roots = crate::linalg::durand_kerner(ctx, &coeffs);
    let mut out: Vec<Vec<Complex>> = Vec::new();
    for r in roots {
        // for each u1-root, the u2 candidates from q1 quadratic
        let (a2, a1, a0) = quad_coeffs(0, &r);
        let u2s: Vec<Complex> = if a2.mag_inf() > ctx.zero_tol {
            let disc = a1.mul(&a1).sub(&a2.mul(&a0).mul_i64(4)).sqrt();
            vec![
                a1.neg().add(&disc).div(&a2.mul_i64(2)),
                a1.neg().sub(&disc).div(&a2.mul_i64(2)),
            ]
        } else if a1.mag_inf() > ctx.zero_tol {
            vec![a0.neg().div(&a1)]
        } else {
            vec![]
        };
        for u2 in u2s {
            let u = vec![r.clone(), u2];
            // check both equations
            let ok = (0..2).all(|j| {
                let mut acc = ctx.zero();
                for rr in 0..2 {
                    for cc in 0..2 {
                        acc = acc.add(&qmat[j].at(rr, cc).mul(&u[rr]).mul(&u[cc]));
                    }
                }
                acc.sub(&c[j]).mag_inf() < BigFloat::from_pow2(1, -60, ctx.prec)
            });
            if ok && out.iter().all(|v| {
                v.iter().zip(&u).any(|(x, y)| x.sub(y).mag_inf() > BigFloat::from_pow2(1, -40, ctx.prec))
            }) {
                // refine by Newton to full precision
                if let Some(ref_u) = newton_fiber(ctx, qmat, c, &u) {
                    out.push(ref_u);
                }
            }
        }
    }
    Ok(out)
}

fn interpolate_poly(ctx: &Ctx, nodes: &[Complex], vals: &[Complex]) -> Vec<Complex> {
    // Lagrange interpolation to monomial coefficients
    let n = nodes.len();
    let mut coeffs = vec![ctx.zero(); n];
    for i in 0..n {
        // basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j)
        let mut poly = vec![ctx.one()];
        let mut denom = ctx.one();
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut next = vec![ctx.zero(); poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k] = next[k].sub(&c.mul(&nodes[j]));
                next[k + 1] = next[k + 1].add(c);
            }
            poly = next;
            denom = denom.mul(&nodes[i].sub(&nodes[j]));
        }
        let scale = vals[i].div(&denom);
        for (k, c) in poly.iter().enumerate() {
            coeffs[k] = coeffs[k].add(&c.mul(&scale));
        }
    }
    coeffs
}

/// Newton solve q(u) = c near seed.
fn newton_fiber(
    ctx: &Ctx,
    qmat: &[Matrix],
    c: &[Complex],
    seed: &[Complex],
) -> Option<Vec<Complex>> {
    let p = seed.len();
    let mut u = seed.to_vec();
    for _ in 0..80 {
        let mut f = vec![ctx.zero(); p];
        let mut jac = Matrix::zeros(ctx, p, p);
        for j in 0..p {
            for r in 0..p {
                for cc in 0..p {
                    f[j] = f[j].add(&qmat[j].at(r, cc).mul(&u[r]).mul(&u[cc]));
                }
            }
            f[j] = f[j].sub(&c[j]);
            for k in 0..p {
                let mut dk = ctx.zero();
                for r in 0..p {
                    dk = dk.add(&qmat[j].at(k, r).add(qmat[j].at(r, k)).mul(&u[r]));
                }
                *jac.at_mut(j, k) = dk;
            }
        }
        let res = f.iter().fold(BigFloat::zero(ctx.prec), |m, x| {
            if x.mag_inf() > m {
                x.mag_inf()
            } else {
                m
            }
        });
        if res < BigFloat::from_pow2(1, -(ctx.prec as i64) + 16, ctx.prec) {
            return Some(u);
        }
        let jinv = jac.inverse().ok()?;
        let step = jinv.mul_vec(&f);
        for k in 0..p {
            u[k] = u[k].sub(&step[k]);
        }
    }
    None
}

/// Newton refinement of A on the equations A^T Q_j A = Q_j.
fn refine_orthogonal(ctx: &Ctx, qmat: &[Matrix], a: &mut Matrix) -> bool {
    let p = a.nrows();
    let nn = p * p;
    for _ in 0..60 {
        // residuals and Jacobian rows over unknown entries of A
        let mut rows: Vec<Vec<Complex>> = Vec::new();
        let mut rhs: Vec<Complex> = Vec::new();
        let mut worst = BigFloat::zero(ctx.prec);
        for j in 0..qmat.len() {
            let res = a.transpose().mul(&qmat[j]).mul(a).sub(&qmat[j]);
            for r in 0..p {
                for c in 0..p {
                    let v = res.at(r, c);
                    if v.mag_inf() > worst {
                        worst = v.mag_inf();
                    }
                    // d/dA[k][l] of (A^T Q A)[r][c] =
                    //   delta(l, r) (Q A)[k][c] + delta(l, c) (A^T Q)[r][k]
                    let qa = qmat[j].mul(a);
                    let atq = a.transpose().mul(&qmat[j]);
                    let mut row = vec![ctx.zero(); nn];
                    for k in 0..p {
                        row[k * p + r] = row[k * p + r].add(qa.at(k, c));
                        row[k * p + c] = row[k * p + c].add(atq.at(r, k));
                    }
                    rows.push(row);
                    rhs.push(v.neg());
                }
            }
        }
        if worst < BigFloat::from_pow2(1, -(ctx.prec as i64) + 24, ctx.prec) {
            return true;
        }
        match solve_least_squares(ctx, &rows, &rhs) {
            Some(step) => {
                for k in 0..p {
                    for l in 0..p {
                        let v = a.at(k, l).add(&step[k * p + l]);
                        *a.at_mut(k, l) = v;
                    }
                }
            }
            None => return false,
        }
    }
    false
}

/// Least-squares solve via normal equations (small systems only).
fn solve_least_squares(
    ctx: &Ctx,
    rows: &[Vec<Complex>],
    rhs: &[Complex],
) -> Option<Vec<Complex>> {
    let n = rows.first()?.len();
    let mut ata = Matrix::zeros(ctx, n, n);
    let mut atb = vec![ctx.zero(); n];
    for (row, b) in rows.iter().zip(rhs) {
        for i in 0..n {
            let ci = row[i].conj();
            for j in 0..n {
                let v = ata.at(i, j).add(&ci.mul(&row[j]));
                *ata.at_mut(i, j) = v;
            }
            atb[i] = atb[i].add(&ci.mul(b));
        }
    }
    let inv = ata.inverse().ok()?;
    Some(inv.mul_vec(&atb))
}

/// Lift a linear deck candidate (A, B) of the quadratic model to the full
/// manifold degree by degree; unsolvable corrections reject the candidate.
fn lift_deck(m: &ManifoldSpec, a: &Matrix, b: &Matrix, d: u32) -> Result<FormalMap, Error> {
    let ctx = &m.ctx;
    let p = m.p;
    let n = 2 * p;
    // f: the w-components, f = A w + B z + higher
    let mut f = FormalMap::zero(ctx, n, p, d);
    for j in 0..p {
        for k in 0..p {
            f.components[j].set_coef(MultiIndex::unit(n, k), b.at(j, k).clone());
            f.components[j].set_coef(MultiIndex::unit(n, p + k), a.at(j, k).clone());
        }
    }
    // linearized operator: the degree-(m+1) part of E(z, tau(w)) responds
    // to a degree-m correction delta via  dE/dw(z, Aw+Bz) . delta  at its
    // lowest (linear-in-quadratic) order. Solve degree by degree with a
    // least-squares system per degree and verify consistency.
    let e_map = FormalMap::new(m.e.iter().map(|s| s.truncated(d)).collect());
    for deg_m in 2..=d {
        let tau = assemble_tau(ctx, &f, n, p, d);
        let resid = compose(&e_map, &tau)?.sub(&e_map);
        // defect at degree deg_m + 1
        let defect = resid.homogeneous_part(deg_m + 1);
        if defect.max_coef_mag() < ctx.zero_tol {
            continue;
        }
        // unknown delta_j (degree deg_m homogeneous in 2p vars), equations:
        // sum_k dE_jdw_k(linear part) * delta_k = -defect_j at degree m+1
        let dedw: Vec<Vec<FormalSeries>> = (0..p)
            .map(|j| {
                (0..p)
                    .map(|k| {
                        // dE_j/dw_k composed with (z, Aw+Bz): keep linear part
                        let der = m.e[j].derivative(p + k).truncated(d);
                        let tau_lin = assemble_tau_linear(ctx, a, b, n, d);
                        compose(&FormalMap::new(vec![der]), &tau_lin)
                            .map(|mm| mm.components[0].jet(1))
                            .unwrap_or_else(|_| FormalSeries::zero(ctx, n, d))
                    })
                    .collect()
            })
            .collect();
        let basis = crate::fps::multiindex::indices_of_degree(n, deg_m);
        let nb = basis.len();
        let mut rows: Vec<Vec<Complex>> = Vec::new();
        let mut rhs: Vec<Complex> = Vec::new();
        let target_basis = crate::fps::multiindex::indices_of_degree(n, deg_m + 1);
        for j in 0..p {
            for tb in &target_basis {
                let mut row = vec![ctx.zero(); p * nb];
                for k in 0..p {
                    for (bi, bidx) in basis.iter().enumerate() {
                        // coefficient of tb in dedw[j][k] * x^bidx
                        if let Some(rem) = tb.checked_sub(bidx) {
                            if rem.degree() == 1 {
                                row[k * nb + bi] = dedw[j][k].coef(&rem);
                            }
                        }
                    }
                }
                rows.push(row);
                rhs.push(defect.components[j].coef(tb).neg());
            }
        }
        let sol = solve_least_squares(ctx, &rows, &rhs)
            .ok_or_else(|| Error::Hypothesis("deck lift: singular correction system".into()))?;
        // residual check of the least-squares solution: inconsistent =>
        // candidate is not liftable at this order
        let tol = residual_tol(ctx, d);
        for (row, b0) in rows.iter().zip(&rhs) {
            let mut acc = ctx.zero();
            for (c, x) in row.iter().zip(&sol) {
                acc = acc.add(&c.mul(x));
            }
            if acc.sub(b0).mag_inf() > tol {
                return Err(Error::Hypothesis("deck lift: inconsistent correction".into()));
            }
        }
        for k in 0..p {
            for (bi, bidx) in basis.iter().enumerate() {
                let v = sol[k * nb + bi].clone();
                if !ctx.is_zero(&v) {
                    f.components[k].add_to_coef(bidx.clone(), &v);
                }
            }
        }
    }
    Ok(assemble_tau(ctx, &f, n, p, d))
}

fn assemble_tau(ctx: &Ctx, f: &FormalMap, n: usize, p: usize, d: u32) -> FormalMap {
    let mut comps = Vec::with_capacity(n);
    for j in 0..p {
        comps.push(FormalSeries::variable(ctx, n, d, j));
    }
    comps.extend(f.components.iter().cloned());
    FormalMap::new(comps)
}

fn assemble_tau_linear(ctx: &Ctx, a: &Matrix, b: &Matrix, n: usize, d: u32) -> FormalMap {
    let p = a.nrows();
    let mut comps = Vec::with_capacity(n);
    for j in 0..p {
        comps.push(FormalSeries::variable(ctx, n, d, j));
    }
    for j in 0..p {
        let mut s = FormalSeries::zero(ctx, n, d);
        for k in 0..p {
            s.set_coef(MultiIndex::unit(n, k), b.at(j, k).clone());
            s.set_coef(MultiIndex::unit(n, p + k), a.at(j, k).clone());
        }
        comps.push(s);
    }
    FormalMap::new(comps)
}

/// The distinguished involution family extracted from the deck group.
#[derive(Clone)]
pub struct InvolutionFamily {
    pub ctx: Ctx,
    pub p: usize,
    /// Generators in normalized (xi, eta) coordinates, canonically ordered.
    pub tau1: Vec<FormalMap>,
    /// Anti-holomorphic involution matrix (standard form), v -> R conj(v).
    pub rho: Matrix,
    pub norm: LinearNormalization,
}

impl InvolutionFamily {
    pub fn tau2(&self, j: usize) -> Result<FormalMap, Error> {
        Ok(self.tau1[j].conjugate_by_antilinear(&self.rho))
    }

    pub fn tau1_comp(&self) -> Result<FormalMap, Error> {
        let mut acc = self.tau1[0].clone();
        for t in &self.tau1[1..] {
            acc = compose(&acc, t)?;
        }
        Ok(acc)
    }

    pub fn tau2_comp(&self) -> Result<FormalMap, Error> {
        Ok(self.tau1_comp()?.conjugate_by_antilinear(&self.rho))
    }

    pub fn sigma(&self) -> Result<FormalMap, Error> {
        compose(&self.tau1_comp()?, &self.tau2_comp()?)
    }
}

/// Select the hypersurface-fixing generators among the decks, normalize
/// the linear data, and transport everything to (xi, eta) coordinates.
pub fn moser_webster_data(
    ctx: &Ctx,
    decks: &[FormalMap],
    d: u32,
) -> Result<InvolutionFamily, Error> {
    let n = decks[0].n_source();
    let p = n / 2;
    if decks.len() != 1 << p {
        return Err(Error::DeckCount { expected: 1 << p, got: decks.len() });
    }
    let id = Matrix::identity(ctx, n);
    let mut generators: Vec<&FormalMap> = Vec::new();
    for t in decks {
        let rank = id.sub(&t.linear_matrix()).rank(&ctx.guard_band());
        if rank == 1 {
            generators.push(t);
        }
    }
    if generators.len() != p {
        return Err(Error::Hypothesis(format!(
            "expected {p} hypersurface-fixing generators, found {}",
            generators.len()
        )));
    }
    // rho_0 on the complexification: (z,w) -> (conj w, conj z)
    let mut r0 = Matrix::zeros(ctx, n, n);
    for j in 0..p {
        *r0.at_mut(j, p + j) = ctx.one();
        *r0.at_mut(p + j, j) = ctx.one();
    }
    let t1js: Vec<Matrix> = generators.iter().map(|t| t.linear_matrix()).collect();
    let norm = classify_linear(ctx, &t1js, &r0)?;
    // canonical generator order: dominant eigen-slot of the B column
    let mut order: Vec<usize> = (0..p).collect();
    let dominant: Vec<usize> = (0..p)
        .map(|g| {
            let mut bi = 0;
            for i in 0..p {
                if norm.b_raw.at(i, g).mag_inf() > norm.b_raw.at(bi, g).mag_inf() {
                    bi = i;
                }
            }
            bi
        })
        .collect();
    order.sort_by_key(|&g| dominant[g]);
    // transport to (xi, eta): tau = P^{-1} o tau o P
    let pm_map = FormalMap::from_matrix(ctx, &norm.p, d);
    let pinv_mat = norm.p_inv.clone();
    let mut tau1 = Vec::with_capacity(p);
    for &g in &order {
        let t = generators[g].truncated(d);
        let conj = compose(&t, &pm_map)?.apply_matrix_left(&pinv_mat);
        tau1.push(conj);
    }
    // re-classify with the ordered generators so b_raw columns follow suit
    let t1js_ord: Vec<Matrix> = order.iter().map(|&g| t1js[g].clone()).collect();
    let norm = classify_linear(ctx, &t1js_ord, &r0)?;
    let rho = crate::quadrics::standard_rho_matrix(ctx, norm.inv.e_star, norm.inv.h_star, norm.inv.s_star);
    Ok(InvolutionFamily { ctx: ctx.clone(), p, tau1, rho, norm })
}

/// Realize an involution family as a manifold: constructs invariant
/// series (A, B^2) by simultaneous linearization of the generators and
/// returns z'' = B^2 composed with the inverse of (A, conj A o rho).
pub fn realize(fam: &InvolutionFamily, d: u32) -> Result<ManifoldSpec, Error> {
    let ctx = &fam.ctx;
    let p = fam.p;
    let n = 2 * p;
    // simultaneous linearization of the commuting involutions by averaging
    let mut psi = FormalMap::identity(ctx, n, d);
    for t in &fam.tau1 {
        // current conjugated involution
        let cur = compose(&invert(&psi)?, &compose(t, &psi)?)?;
        let lin = FormalMap::from_matrix(ctx, &cur.linear_matrix(), d);
        // g = (id + Lf^{-1} o f)/2 conjugates f to its linear part
        let half = ctx.real(0.5);
        let lin_inv = invert(&lin)?;
        let g = FormalMap::identity(ctx, n, d)
            .add(&compose(&lin_inv, &cur)?)
            .apply_matrix_left(&Matrix::diag(ctx, &vec![half; n]));
        // g f g^{-1} = Lf, so psi <- psi o g^{-1}
        psi = compose(&psi, &invert(&g)?)?;
    }
    // now psi^{-1} tau_j psi = T_j (linear); move to Z_j coordinates via
    // E_Lambda B_*
    let lambda = &fam.norm.inv.lambda;
    let e_lam = crate::quadrics::e_lambda_matrix(ctx, lambda);
    let mut b_star = Matrix::identity(ctx, n);
    for i in 0..p {
        for j in 0..p {
            *b_star.at_mut(p + i, p + j) = fam.norm.b_raw.at(i, j).clone();
        }
    }
    let cob = e_lam.mul(&b_star);
    let cob_map = FormalMap::from_matrix(ctx, &cob, d);
    let phi = compose(&psi, &cob_map)?; // (xi,eta) <- (x, y) with tau = Z_j
    // verify
    let phi_inv = invert(&phi)?;
    for (j, t) in fam.tau1.iter().enumerate() {
        let zj = compose(&phi_inv, &compose(t, &phi)?)?;
        let mut zmat = Matrix::identity(ctx, n);
        *zmat.at_mut(p + j, p + j) = ctx.real(-1.0);
        let want = FormalMap::from_matrix(ctx, &zmat, d);
        if !zj.approx_eq(&want, &residual_tol(ctx, d)) {
            return Err(Error::Hypothesis(
                "realization: generators failed simultaneous diagonalization".into(),
            ));
        }
    }
    // invariants: x = A(xi,eta) (first p comps of phi_inv), y = B(xi,eta)
    let a_map = FormalMap::new(phi_inv.components[..p].to_vec());
    let b_map = FormalMap::new(phi_inv.components[p..].to_vec());
    // w' = conj(A o rho): rho(v) = R conj(v)
    let rho_lin = FormalMap::from_matrix(ctx, &fam.rho.conj(), d);
    let w_map = compose(&a_map.conj_coeffs(), &rho_lin)?;
    // m: (xi,eta) -> (z', w')
    let m_map = FormalMap::new(
        a_map
            .components
            .iter()
            .chain(w_map.components.iter())
            .cloned()
            .collect(),
    );
    let m_inv = invert(&m_map)?;
    let inner = compose(&b_map, &m_inv)?; // B o psi(z', w')
    ManifoldSpec::new_square(ctx, p, inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrics::{lambda_from_gamma_real, TangentType};

    fn ctx() -> Ctx {
        Ctx::default_ctx()
    }

    /// Bishop quadric E = z w + gamma (z^2 + w^2) as a generic-form spec.
    fn bishop(ctx: &Ctx, gamma: f64, d: u32) -> ManifoldSpec {
        let g = ctx.real(gamma);
        let mut e = FormalSeries::zero(ctx, 2, d);
        e.set_coef(MultiIndex::from_slice(&[1, 1]), ctx.one());
        e.set_coef(MultiIndex::from_slice(&[2, 0]), g.clone());
        e.set_coef(MultiIndex::from_slice(&[0, 2]), g.clone());
        ManifoldSpec::new_generic(ctx, 1, vec![e]).unwrap()
    }

    #[test]
    fn complexify_bishop_swaps() {
        let c = ctx();
        let m = bishop(&c, 0.25, 4);
        let cx = complexify(&m);
        // real coefficients symmetric in (z, w): w-equation equals z-equation
        assert!(cx.w_eq[0].approx_eq(&cx.z_eq[0], &c.zero_tol));
    }

    #[test]
    fn bishop_decks() {
        let c = ctx();
        let m = bishop(&c, 0.25, 6);
        let decks = deck_transformations(&m, 6).unwrap();
        assert_eq!(decks.len(), 2);
        // nontrivial deck: w' = -w - 4 z
        let nt = decks
            .iter()
            .find(|t| {
                !t.approx_eq(&FormalMap::identity(&c, 2, 6), &c.guard_band())
            })
            .unwrap();
        let lw = nt.components[1].coef(&MultiIndex::from_slice(&[0, 1]));
        let lz = nt.components[1].coef(&MultiIndex::from_slice(&[1, 0]));
        assert!(lw.add(&c.one()).mag_inf() < BigFloat::from_pow2(1, -100, c.prec));
        assert!(lz.add(&c.real(4.0)).mag_inf() < BigFloat::from_pow2(1, -100, c.prec));
    }

    #[test]
    fn perturbation_kills_decks() {
        // z_{p+j} = z_j conj z_j + gamma_j conj z_j^2 + eps conj z_{j-1}^2
        let c = ctx();
        let p = 2;
        let mut e1 = FormalSeries::zero(&c, 4, 6);
        e1.set_coef(MultiIndex::from_slice(&[1, 0, 1, 0]), c.one());
        e1.set_coef(MultiIndex::from_slice(&[0, 0, 2, 0]), c.real(0.25));
        e1.set_coef(MultiIndex::from_slice(&[0, 0, 0, 2]), c.real(0.125));
        let mut e2 = FormalSeries::zero(&c, 4, 6);
        e2.set_coef(MultiIndex::from_slice(&[0, 1, 0, 1]), c.one());
        e2.set_coef(MultiIndex::from_slice(&[0, 0, 0, 2]), c.real(0.375));
        e2.set_coef(MultiIndex::from_slice(&[0, 0, 2, 0]), c.real(0.0625));
        let m = ManifoldSpec::new_generic(&c, p, vec![e1, e2]).unwrap();
        let decks = deck_transformations(&m, 4).unwrap();
        assert_eq!(decks.len(), 1, "perturbed manifold admits only the identity");
    }

    #[test]
    fn square_form_p2_sign_decks() {
        let c = ctx();
        let p = 2;
        let d = 6;
        // E_j = (w_j + 2 gamma_j-ish mix)^2: inner A = w + M z with generic M
        let mut inner = FormalMap::zero(&c, 2 * p, p, d);
        for j in 0..p {
            inner.components[j].set_coef(MultiIndex::unit(4, 2 + j), c.one());
            inner.components[j].set_coef(MultiIndex::unit(4, j), c.real(0.5 + j as f64));
            inner.components[j].set_coef(MultiIndex::unit(4, 1 - j), c.real(0.125));
        }
        let m = ManifoldSpec::new_square(&c, p, inner.clone()).unwrap();
        let decks = deck_transformations(&m, d).unwrap();
        assert_eq!(decks.len(), 4);
        // each deck: A o tau = +- A componentwise (sign-matrix formula)
        for t in &decks {
            let at = compose(&inner, t).unwrap();
            for j in 0..p {
                let plus = at.components[j].sub(&inner.components[j]);
                let minus = at.components[j].add(&inner.components[j]);
                assert!(
                    plus.max_coef_mag() < residual_tol(&c, d)
                        || minus.max_coef_mag() < residual_tol(&c, d)
                );
            }
        }
    }

    #[test]
    fn cr_singular_determinant_bishop() {
        let c = ctx();
        let m = bishop(&c, 0.25, 4);
        let det = cr_singular_set(&m, 3);
        // dE/dw = z + 2 gamma w: C = z + 2 gamma w, C(0) = 0
        assert!(c.is_zero(&det.constant_term()));
        assert!(det
            .coef(&MultiIndex::from_slice(&[0, 1]))
            .sub(&c.real(0.5))
            .mag_inf()
            < c.guard_band());
        assert!(det.coef(&MultiIndex::from_slice(&[1, 0])).sub(&c.one()).mag_inf() < c.guard_band());
    }

    #[test]
    fn cr_singular_complex_quadric_factors() {
        let c = ctx();
        // z3 = z2 conj z1 + gs conj z1^2 ; z4 = z1 conj z2 + (1-conj gs) conj z2^2
        let gs = c.cplx(1.0, 1.0);
        let d = 4;
        let mut e1 = FormalSeries::zero(&c, 4, d);
        e1.set_coef(MultiIndex::from_slice(&[0, 1, 1, 0]), c.one());
        e1.set_coef(MultiIndex::from_slice(&[0, 0, 2, 0]), gs.clone());
        let mut e2 = FormalSeries::zero(&c, 4, d);
        e2.set_coef(MultiIndex::from_slice(&[1, 0, 0, 1]), c.one());
        e2.set_coef(MultiIndex::from_slice(&[0, 0, 0, 2]), c.one().sub(&gs.conj()));
        let m = ManifoldSpec::new_generic(&c, 2, vec![e1, e2]).unwrap();
        let det = cr_singular_set(&m, 2);
        // C = -(z2 + 2 gs w1)(z1 + 2(1-conj gs) w2) up to sign
        let mut expect = FormalSeries::zero(&c, 4, 2);
        let f1 = {
            let mut s = FormalSeries::zero(&c, 4, 2);
            s.set_coef(MultiIndex::from_slice(&[0, 1, 0, 0]), c.one());
            s.set_coef(MultiIndex::from_slice(&[0, 0, 1, 0]), gs.mul_i64(2));
            s
        };
        let f2 = {
            let mut s = FormalSeries::zero(&c, 4, 2);
            s.set_coef(MultiIndex::from_slice(&[1, 0, 0, 0]), c.one());
            s.set_coef(MultiIndex::from_slice(&[0, 0, 0, 1]), c.one().sub(&gs.conj()).mul_i64(2));
            s
        };
        expect = expect.add(&f1.mul(&f2)).neg();
        let diff = det.sub(&expect).max_coef_mag();
        let diff2 = det.add(&expect).max_coef_mag();
        assert!(
            diff < c.guard_band() || diff2 < c.guard_band(),
            "determinant does not factor as expected"
        );
    }

    #[test]
    fn mw_data_and_sigma_eigenvalues_bishop() {
        let c = ctx();
        let m = bishop(&c, 0.25, 6);
        let decks = deck_transformations(&m, 6).unwrap();
        let fam = moser_webster_data(&c, &decks, 6).unwrap();
        assert_eq!(fam.p, 1);
        let le = lambda_from_gamma_real(&c, &c.real(0.25), TangentType::Elliptic);
        assert!(fam.norm.inv.lambda[0].sub(&le).mag_inf() < BigFloat::from_pow2(1, -120, c.prec));
        // sigma in (xi,eta) coordinates has diagonal linear part (mu, 1/mu)
        let sig = fam.sigma().unwrap();
        let lm = sig.linear_matrix();
        let mu = le.mul(&le);
        assert!(lm.at(0, 0).sub(&mu).mag_inf() < BigFloat::from_pow2(1, -110, c.prec));
        assert!(lm.at(1, 1).sub(&mu.recip()).mag_inf() < BigFloat::from_pow2(1, -110, c.prec));
        assert!(lm.at(0, 1).mag_inf() < residual_tol(&c, 6));
    }

    #[test]
    fn realize_roundtrip_bishop() {
        let c = ctx();
        let d = 6;
        let m = bishop(&c, 0.25, d);
        let decks = deck_transformations(&m, d).unwrap();
        let fam = moser_webster_data(&c, &decks, d).unwrap();
        let m2 = realize(&fam, d).unwrap();
        // the realized manifold's involution data must match: same lambda
        let decks2 = deck_transformations(&m2, d).unwrap();
        assert_eq!(decks2.len(), 2);
        let fam2 = moser_webster_data(&c, &decks2, d).unwrap();
        assert!(fam2.norm.inv.lambda[0]
            .sub(&fam.norm.inv.lambda[0])
            .mag_inf()
            < BigFloat::from_pow2(1, -100, c.prec));
    }
}
