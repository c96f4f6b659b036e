//! Tuples of formal power series as mappings, with composition,
//! inversion, and a degree-by-degree implicit-equation solver.

use super::hot::{mul_hot_into, DenseAcc, HotSeries, RankTable};
use super::multiindex::{monomial_count, MultiIndex};
use super::series::FormalSeries;
use crate::error::Error;
use crate::linalg::Matrix;
use crate::num::{BigFloat, Complex, Ctx};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// A formal map: `components.len()` series, each in the same source
/// variables and with a common truncation degree.
#[derive(Clone, Debug)]
pub struct FormalMap {
    pub components: Vec<FormalSeries>,
}

impl FormalMap {
    pub fn new(components: Vec<FormalSeries>) -> Self {
        assert!(!components.is_empty());
        let n = components[0].n;
        let deg = components[0].deg;
        assert!(components.iter().all(|c| c.n == n && c.deg == deg));
        FormalMap { components }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.components[0].ctx
    }

    pub fn n_source(&self) -> usize {
        self.components[0].n
    }

    pub fn n_target(&self) -> usize {
        self.components.len()
    }

    pub fn deg(&self) -> u32 {
        self.components[0].deg
    }

    pub fn identity(ctx: &Ctx, n: usize, deg: u32) -> Self {
        FormalMap::new((0..n).map(|j| FormalSeries::variable(ctx, n, deg, j)).collect())
    }

    pub fn zero(ctx: &Ctx, n: usize, m: usize, deg: u32) -> Self {
        FormalMap::new((0..m).map(|_| FormalSeries::zero(ctx, n, deg)).collect())
    }

    /// Linear map z -> M z as a formal map.
    pub fn from_matrix(ctx: &Ctx, m: &Matrix, deg: u32) -> Self {
        let n = m.ncols();
        let comps = (0..m.nrows())
            .map(|i| {
                let mut s = FormalSeries::zero(ctx, n, deg);
                for j in 0..n {
                    s.set_coef(MultiIndex::unit(n, j), m.at(i, j).clone());
                }
                s
            })
            .collect();
        FormalMap::new(comps)
    }

    /// Matrix of the linear part.
    pub fn linear_matrix(&self) -> Matrix {
        let n = self.n_source();
        let ctx = self.ctx();
        let mut m = Matrix::zeros(ctx, self.n_target(), n);
        for (i, comp) in self.components.iter().enumerate() {
            for j in 0..n {
                *m.at_mut(i, j) = comp.coef(&MultiIndex::unit(n, j));
            }
        }
        m
    }

    pub fn constant_part(&self) -> Vec<Complex> {
        self.components.iter().map(|c| c.constant_term()).collect()
    }

    pub fn has_constant_term(&self) -> bool {
        let tol = &self.ctx().zero_tol;
        self.components.iter().any(|c| !c.constant_term().below_tol(tol))
    }

    pub fn is_tangent_to_identity(&self, tol: &BigFloat) -> bool {
        if self.n_source() != self.n_target() {
            return false;
        }
        let lin = self.linear_matrix();
        lin.sub(&Matrix::identity(self.ctx(), self.n_source())).max_mag() < *tol
            && self.constant_part().iter().all(|c| c.below_tol(tol))
    }

    pub fn add(&self, o: &Self) -> Self {
        FormalMap::new(
            self.components.iter().zip(&o.components).map(|(a, b)| a.add(b)).collect(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        FormalMap::new(
            self.components.iter().zip(&o.components).map(|(a, b)| a.sub(b)).collect(),
        )
    }

    pub fn neg(&self) -> Self {
        FormalMap::new(self.components.iter().map(|a| a.neg()).collect())
    }

    pub fn truncated(&self, deg: u32) -> Self {
        FormalMap::new(self.components.iter().map(|c| c.truncated(deg)).collect())
    }

    pub fn jet(&self, k: u32) -> Self {
        FormalMap::new(self.components.iter().map(|c| c.jet(k)).collect())
    }

    pub fn homogeneous_part(&self, k: u32) -> Self {
        FormalMap::new(self.components.iter().map(|c| c.homogeneous_part(k)).collect())
    }

    pub fn conj_coeffs(&self) -> Self {
        FormalMap::new(self.components.iter().map(|c| c.conj_coeffs()).collect())
    }

    pub fn max_coef_mag(&self) -> BigFloat {
        let mut m = BigFloat::zero(self.ctx().prec);
        for c in &self.components {
            let a = c.max_coef_mag();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn distance(&self, o: &Self) -> BigFloat {
        self.sub(o).max_coef_mag()
    }

    pub fn approx_eq(&self, o: &Self, tol: &BigFloat) -> bool {
        self.distance(o) < *tol
    }

    pub fn eval(&self, x: &[Complex]) -> Vec<Complex> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Left action by a matrix: M . F.
    pub fn apply_matrix_left(&self, m: &Matrix) -> Self {
        assert_eq!(m.ncols(), self.n_target());
        let ctx = self.ctx();
        let comps = (0..m.nrows())
            .map(|i| {
                let mut acc = FormalSeries::zero(ctx, self.n_source(), self.deg());
                for j in 0..m.ncols() {
                    let c = m.at(i, j);
                    if !ctx.is_zero(c) {
                        acc = acc.add(&self.components[j].scale(c));
                    }
                }
                acc
            })
            .collect();
        FormalMap::new(comps)
    }

    /// Conjugation by the anti-linear involution v -> R conj(v):
    /// returns (R conj) . F . (R conj) as a holomorphic formal map.
    pub fn conjugate_by_antilinear(&self, r: &Matrix) -> Self {
        let ctx = self.ctx();
        let inner = FormalMap::from_matrix(ctx, &r.conj(), self.deg());
        let mid = compose(&self.conj_coeffs(), &inner).expect("antilinear conjugation");
        mid.apply_matrix_left(r)
    }

    /// F restricted/viewed with source variables renamed by `perm`:
    /// result(x) = F(x . perm) meaning new variable k is old variable perm[k].
    pub fn permute_source(&self, perm: &[usize]) -> Self {
        // inverse substitution: monomial exponents permuted
        let inv = invert_perm(perm);
        FormalMap::new(
            self.components
                .iter()
                .map(|c| {
                    let mut s = FormalSeries::zero(&c.ctx, c.n, c.deg);
                    for (k, v) in c.iter_terms() {
                        s.set_coef(k.permuted(&inv), v.clone());
                    }
                    s
                })
                .collect(),
        )
    }

    pub fn permute_target(&self, perm: &[usize]) -> Self {
        FormalMap::new(perm.iter().map(|&j| self.components[j].clone()).collect())
    }
}

fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

/// Composition F o G, exact through min(deg_F, deg_G). G must have no
/// constant term; the component count of G must match the source
/// dimension of F.
pub fn compose(f: &FormalMap, g: &FormalMap) -> Result<FormalMap, Error> {
    if g.n_target() != f.n_source() {
        return Err(Error::DimensionMismatch {
            expected: f.n_source(),
            got: g.n_target(),
        });
    }
    if g.has_constant_term() {
        return Err(Error::ConstantTerm);
    }
    let ctx = f.ctx();
    let deg = f.deg().min(g.deg());
    let nv = g.n_source();
    let m = f.n_target();
    let g: Vec<FormalSeries> = g.components.iter().map(|c| c.truncated(deg)).collect();

    // Union of monomials over all components of f, sorted lexicographically
    // (prefix-tree order), constants excluded, paired with the coefficient
    // of each component.
    let mut mono: Vec<(MultiIndex, Vec<Complex>)> = {
        let mut set: std::collections::BTreeSet<MultiIndex> = Default::default();
        for c in &f.components {
            for (k, _) in c.iter_terms() {
                if k.degree() >= 1 && k.degree() <= deg {
                    set.insert(k.clone());
                }
            }
        }
        set.into_iter()
            .map(|k| {
                let cs = f.components.iter().map(|c| c.coef(&k)).collect();
                (k, cs)
            })
            .collect()
    };
    mono.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));

    let slots = monomial_count(nv, deg);
    let total_terms_g: usize = g.iter().map(|c| c.num_terms()).sum();
    let big = nv <= 8
        && deg <= 255
        && ctx.prec <= 256
        && mono.len().saturating_mul(total_terms_g) > 4 * slots;
    let mut out = if big {
        compose_hot(&g, &mono, nv, m, deg, ctx)
    } else {
        compose_sparse(&g, &mono, nv, m, deg, ctx)
    };

    // Constant terms of f pass through.
    for (comp, s) in out.iter_mut().enumerate() {
        let c0 = f.components[comp].constant_term();
        if !ctx.is_zero(&c0) {
            s.add_to_coef(MultiIndex::zero(nv), &c0);
        }
    }
    Ok(FormalMap::new(out))
}

type MonoSlice<'a> = &'a [(MultiIndex, Vec<Complex>)];

/// Group a lex-sorted monomial slice by the exponent at position `var`.
fn split_groups(mono: MonoSlice<'_>, var: usize) -> Vec<MonoSlice<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < mono.len() {
        let e = mono[start].0.get(var);
        let mut end = start + 1;
        while end < mono.len() && mono[end].0.get(var) == e {
            end += 1;
        }
        out.push(&mono[start..end]);
        start = end;
    }
    out
}

fn compose_sparse(
    g: &[FormalSeries],
    mono: MonoSlice<'_>,
    nv: usize,
    m: usize,
    deg: u32,
    ctx: &Ctx,
) -> Vec<FormalSeries> {
    let groups = split_groups(mono, 0);
    let results: Vec<Vec<BTreeMap<MultiIndex, Complex>>> = groups
        .par_iter()
        .map(|grp| {
            let mut acc: Vec<BTreeMap<MultiIndex, Complex>> = vec![BTreeMap::new(); m];
            let one = FormalSeries::one(ctx, nv, deg);
            dfs_sparse(g, grp, 0, &one, &mut acc, ctx);
            acc
        })
        .collect();
    let mut out: Vec<FormalSeries> = (0..m).map(|_| FormalSeries::zero(ctx, nv, deg)).collect();
    for maps in results {
        for (comp, map) in maps.into_iter().enumerate() {
            for (k, v) in map {
                out[comp].add_to_coef(k, &v);
            }
        }
    }
    out
}

fn dfs_sparse(
    g: &[FormalSeries],
    mono: MonoSlice<'_>,
    var: usize,
    prod: &FormalSeries,
    acc: &mut [BTreeMap<MultiIndex, Complex>],
    ctx: &Ctx,
) {
    if var == g.len() {
        debug_assert_eq!(mono.len(), 1);
        let coeffs = &mono[0].1;
        for (comp, c) in coeffs.iter().enumerate() {
            if ctx.is_zero(c) {
                continue;
            }
            for (k, v) in prod.iter_terms() {
                let p = v.mul(c);
                match acc[comp].get_mut(k) {
                    Some(cur) => *cur = cur.add(&p),
                    None => {
                        acc[comp].insert(k.clone(), p);
                    }
                }
            }
        }
        return;
    }
    let mut cur = prod.clone();
    let mut cur_e = 0u16;
    for grp in split_groups(mono, var) {
        let e = grp[0].0.get(var);
        while cur_e < e {
            cur = cur.mul(&g[var]);
            cur_e += 1;
            if cur.is_zero() {
                return;
            }
        }
        dfs_sparse(g, grp, var + 1, &cur, acc, ctx);
    }
}

struct HotState {
    scratch: DenseAcc,
    out: Vec<DenseAcc>,
    pool: Vec<HotSeries>,
}

use crate::num::packed::PCplx;


fn compose_hot(
    g: &[FormalSeries],
    mono: MonoSlice<'_>,
    nv: usize,
    m: usize,
    deg: u32,
    ctx: &Ctx,
) -> Vec<FormalSeries> {
    let rt = RankTable::new(nv, deg);
    let g_hot: Vec<HotSeries> = g.iter().map(|c| HotSeries::from_series(c, &rt)).collect();
    let prec = ctx.prec;
    let mono_packed: Vec<(MultiIndex, Vec<PCplx>)> = mono
        .iter()
        .map(|(k, cs)| (k.clone(), cs.iter().map(PCplx::from_complex).collect()))
        .collect();
    let mono: &[(MultiIndex, Vec<PCplx>)] = &mono_packed;

    // Tasks are the two-level prefix groups; their prefix products are
    // precomputed incrementally so no task repeats low-valuation work.
    struct Task<'a> {
        prefix: HotSeries,
        grp: &'a [(MultiIndex, Vec<PCplx>)],
        cost: u64,
    }
    let split2 = nv >= 2;
    let mut tasks: Vec<Task<'_>> = Vec::new();
    {
        let mut scratch = DenseAcc::new(rt.count);
        let mut p0 = HotSeries::one(ctx);
        let mut e0_cur = 0u16;
        for grp in split_groups_p(mono, 0) {
            let e0 = grp[0].0.get(0);
            while e0_cur < e0 && !p0.is_empty() {
                let mut nxt = HotSeries::default();
                mul_hot_into(&p0, &g_hot[0], &rt, &mut scratch, &mut nxt);
                p0 = nxt;
                e0_cur += 1;
            }
            if p0.is_empty() {
                break;
            }
            if split2 {
                let mut p1 = p0.clone();
                let mut e1_cur = 0u16;
                for sub in split_groups_p(grp, 1) {
                    let e1 = sub[0].0.get(1);
                    while e1_cur < e1 && !p1.is_empty() {
                        let mut nxt = HotSeries::default();
                        mul_hot_into(&p1, &g_hot[1], &rt, &mut scratch, &mut nxt);
                        p1 = nxt;
                        e1_cur += 1;
                    }
                    if p1.is_empty() {
                        break;
                    }
                    let cost = est_subtree_cost(&rt, (e0 + e1) as u32, nv - 2, deg);
                    tasks.push(Task { prefix: p1.clone(), grp: sub, cost });
                }
            } else {
                tasks.push(Task {
                    prefix: p0.clone(),
                    grp,
                    cost: est_subtree_cost(&rt, e0 as u32, nv - 1, deg),
                });
            }
        }
    }

    // Longest-processing-time assignment into one bucket per thread.
    let nt = rayon::current_num_threads().max(1);
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(tasks[i].cost));
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nt];
    let mut loads = vec![0u64; nt];
    for i in order {
        let b = (0..nt).min_by_key(|&b| loads[b]).unwrap();
        loads[b] += tasks[i].cost.max(1);
        buckets[b].push(i);
    }

    let start_var = if split2 { 2 } else { 1 };
    let merged: Vec<Vec<DenseAcc>> = buckets
        .par_iter()
        .map(|bucket| {
            let mut st = HotState {
                scratch: DenseAcc::new(rt.count),
                out: (0..m).map(|_| DenseAcc::new(rt.count)).collect(),
                pool: Vec::new(),
            };
            for &ti in bucket {
                let t = &tasks[ti];
                dfs_hot(&g_hot, t.grp, start_var, &t.prefix, &rt, &mut st);
            }
            st.out
        })
        .collect();

    let mut final_acc: Vec<DenseAcc> = (0..m).map(|_| DenseAcc::new(rt.count)).collect();
    for outs in merged {
        for (ai, bi) in final_acc.iter_mut().zip(outs.iter()) {
            for r in 0..rt.count {
                if bi.live[r] {
                    ai.add(r as u32, &bi.slots[r]);
                }
            }
        }
    }
    final_acc
        .into_iter()
        .map(|mut acc| {
            let mut s = FormalSeries::zero(ctx, nv, deg);
            let mut h = HotSeries::default();
            acc.drain_all(&rt, &mut h);
            for (r, c) in h.rank.iter().zip(&h.coef) {
                s.set_coef(rt.unpack_rank(*r).clone(), c.to_complex(prec).rounded(prec));
            }
            s
        })
        .collect()
}

/// Rough pair-count of a subtree rooted at prefix degree k with `rem`
/// remaining variables, used only for load balancing.
fn est_subtree_cost(rt: &RankTable, k: u32, rem: usize, deg: u32) -> u64 {
    let h = |m: u32| -> u64 {
        let mut c: u128 = 1;
        for i in 1..rt.n as u128 {
            c = c * (m as u128 + i) / i;
        }
        c as u64
    };
    let nle = |q: u32| -> u64 {
        let mut c: u128 = 1;
        for i in 1..=rt.n as u128 {
            c = c * (q as u128 + i) / i;
        }
        c as u64
    };
    let cost = |v: u32| -> u64 {
        (v..=deg).map(|m| h(m) * nle(deg - m).saturating_sub(1)).sum()
    };
    let steps = |s: u32, vars: usize| -> u64 {
        let mut c: u128 = 1;
        for i in 1..vars.max(1) as u128 {
            c = c * (s as u128 + i) / i;
        }
        c as u64
    };
    (k..deg)
        .map(|v| steps(v - k, rem) * cost(v))
        .sum::<u64>()
        .max(1)
}

/// Group a lex-sorted packed-monomial slice by the exponent at `var`.
fn split_groups_p<'a>(
    mono: &'a [(MultiIndex, Vec<PCplx>)],
    var: usize,
) -> Vec<&'a [(MultiIndex, Vec<PCplx>)]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < mono.len() {
        let e = mono[start].0.get(var);
        let mut end = start + 1;
        while end < mono.len() && mono[end].0.get(var) == e {
            end += 1;
        }
        out.push(&mono[start..end]);
        start = end;
    }
    out
}

fn dfs_hot(
    g: &[HotSeries],
    mono: &[(MultiIndex, Vec<PCplx>)],
    var: usize,
    prod: &HotSeries,
    rt: &RankTable,
    st: &mut HotState,
) {
    if var == g.len() {
        debug_assert_eq!(mono.len(), 1);
        let coeffs = &mono[0].1;
        for (comp, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (r, v) in prod.rank.iter().zip(&prod.coef) {
                st.out[comp].mac(*r, v, c);
            }
        }
        return;
    }
    let mut cur: Option<HotSeries> = None;
    let mut cur_e = 0u16;
    for grp in split_groups_p(mono, var) {
        let e = grp[0].0.get(var);
        while cur_e < e {
            let mut buf = st.pool.pop().unwrap_or_default();
            {
                let base = cur.as_ref().unwrap_or(prod);
                mul_hot_into(base, &g[var], rt, &mut st.scratch, &mut buf);
            }
            if let Some(old) = cur.replace(buf) {
                st.pool.push(old);
            }
            cur_e += 1;
            if cur.as_ref().unwrap().is_empty() {
                if let Some(old) = cur.take() {
                    st.pool.push(old);
                }
                return;
            }
        }
        let node = cur.as_ref().unwrap_or(prod);
        dfs_hot(g, grp, var + 1, node, rt, st);
    }
    if let Some(old) = cur.take() {
        st.pool.push(old);
    }
}

/// Inverse of a formal map with invertible linear part: F o F^{-1} = id
/// through the truncation degree.
pub fn invert(f: &FormalMap) -> Result<FormalMap, Error> {
    let n = f.n_source();
    if f.n_target() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.n_target() });
    }
    let ctx = f.ctx();
    let deg = f.deg();
    let lin = f.linear_matrix();
    let linv = lin.inverse().map_err(|_| Error::SingularLinearPart)?;
    let linv_map = FormalMap::from_matrix(ctx, &linv, deg);
    let id = FormalMap::identity(ctx, n, deg);
    let nonlin = f.sub(&FormalMap::from_matrix(ctx, &lin, deg));
    if nonlin.max_coef_mag() < ctx.zero_tol {
        return Ok(linv_map);
    }
    // H = Linv (id - nonlin o H), gaining one correct degree per pass.
    let mut h = linv_map.clone();
    for _ in 2..=deg {
        let fh = compose(&nonlin, &h)?;
        h = compose(&linv_map, &id.sub(&fh))?;
    }
    Ok(h)
}

/// Solve u = Theta(z, u) for u(z) through degree `deg`, where Theta is a
/// formal map in the variables (z_1..z_k, u_1..u_m) with m components, no
/// constant term, and a u-linear part vanishing at the origin.
pub fn solve_implicit(theta: &FormalMap, k: usize, deg: u32) -> Result<FormalMap, Error> {
    let total = theta.n_source();
    let m = theta.n_target();
    if total != k + m {
        return Err(Error::DimensionMismatch { expected: k + m, got: total });
    }
    if theta.has_constant_term() {
        return Err(Error::ConstantTerm);
    }
    let ctx = theta.ctx();
    // Contractivity: coefficient of u_j alone (a constant) must vanish.
    for comp in &theta.components {
        for j in 0..m {
            let c = comp.coef(&MultiIndex::unit(total, k + j));
            if !ctx.is_zero(&c) {
                return Err(Error::NonContractive);
            }
        }
    }
    let id_z = FormalMap::identity(ctx, k, deg);
    let mut u = FormalMap::zero(ctx, k, m, deg);
    for _ in 0..=deg {
        let stacked = FormalMap::new(
            id_z.components.iter().chain(u.components.iter()).cloned().collect(),
        );
        let next = compose(theta, &stacked)?;
        if next.distance(&u) < ctx.zero_tol {
            u = next;
            break;
        }
        u = next;
    }
    // Residual check.
    let stacked = FormalMap::new(
        id_z.components.iter().chain(u.components.iter()).cloned().collect(),
    );
    let res = compose(theta, &stacked)?.sub(&u);
    if res.max_coef_mag() >= ctx.guard_band() {
        return Err(Error::NonContractive);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        Ctx::default_ctx()
    }

    #[test]
    fn compose_identity_cases() {
        let c = ctx();
        let mut f = FormalMap::identity(&c, 2, 4);
        f.components[0].set_coef(MultiIndex::from_slice(&[1, 1]), c.real(2.5));
        f.components[1].set_coef(MultiIndex::from_slice(&[0, 3]), c.cplx(0.0, 1.0));
        let id = FormalMap::identity(&c, 2, 4);
        assert!(compose(&f, &id).unwrap().approx_eq(&f, &c.zero_tol));
        assert!(compose(&id, &f).unwrap().approx_eq(&f, &c.zero_tol));
    }

    #[test]
    fn compose_hand_expansion() {
        let c = ctx();
        // F = x + x^2, G = x + x^2 at deg 3: F(G) = x + 2x^2 + 2x^3
        let mut f = FormalMap::identity(&c, 1, 3);
        f.components[0].set_coef(MultiIndex::from_slice(&[2]), c.real(1.0));
        let g = f.clone();
        let h = compose(&f, &g).unwrap();
        let mut expect = FormalMap::identity(&c, 1, 3);
        expect.components[0].set_coef(MultiIndex::from_slice(&[2]), c.real(2.0));
        expect.components[0].set_coef(MultiIndex::from_slice(&[3]), c.real(2.0));
        assert!(h.approx_eq(&expect, &c.zero_tol));
    }

    #[test]
    fn invert_cases() {
        let c = ctx();
        let id = FormalMap::identity(&c, 2, 5);
        assert!(invert(&id).unwrap().approx_eq(&id, &c.zero_tol));
        // diag(2,3)
        let mut m = Matrix::zeros(&c, 2, 2);
        *m.at_mut(0, 0) = c.real(2.0);
        *m.at_mut(1, 1) = c.real(3.0);
        let f = FormalMap::from_matrix(&c, &m, 5);
        let fi = invert(&f).unwrap();
        let mut expect = Matrix::zeros(&c, 2, 2);
        *expect.at_mut(0, 0) = c.real(0.5);
        *expect.at_mut(1, 1) = c.one().div(&c.real(3.0));
        assert!(fi.approx_eq(&FormalMap::from_matrix(&c, &expect, 5), &c.guard_band()));
        // x + x^2 at deg 3 -> x - x^2 + 2x^3 (Lagrange reversion)
        let mut f = FormalMap::identity(&c, 1, 3);
        f.components[0].set_coef(MultiIndex::from_slice(&[2]), c.real(1.0));
        let fi = invert(&f).unwrap();
        let mut expect = FormalMap::identity(&c, 1, 3);
        expect.components[0].set_coef(MultiIndex::from_slice(&[2]), c.real(-1.0));
        expect.components[0].set_coef(MultiIndex::from_slice(&[3]), c.real(2.0));
        assert!(fi.approx_eq(&expect, &c.guard_band()));
        let both = compose(&f, &fi).unwrap();
        assert!(both.approx_eq(&FormalMap::identity(&c, 1, 3), &c.guard_band()));
    }

    #[test]
    fn solve_implicit_catalan() {
        let c = ctx();
        // u = z + u^2 at deg 3 -> u = z + z^2 + 2z^3 (Catalan numbers)
        let mut theta = FormalMap::zero(&c, 2, 1, 3);
        theta.components[0].set_coef(MultiIndex::from_slice(&[1, 0]), c.real(1.0));
        theta.components[0].set_coef(MultiIndex::from_slice(&[0, 2]), c.real(1.0));
        let u = solve_implicit(&theta, 1, 3).unwrap();
        let mut expect = FormalMap::zero(&c, 1, 1, 3);
        expect.components[0].set_coef(MultiIndex::from_slice(&[1]), c.real(1.0));
        expect.components[0].set_coef(MultiIndex::from_slice(&[2]), c.real(1.0));
        expect.components[0].set_coef(MultiIndex::from_slice(&[3]), c.real(2.0));
        assert!(u.approx_eq(&expect, &c.guard_band()));
    }

    #[test]
    fn solve_implicit_geometric() {
        let c = ctx();
        // u = z1 z2 + u z1 at deg 3 -> u = z1 z2 + z1^2 z2
        let mut theta = FormalMap::zero(&c, 3, 1, 3);
        theta.components[0].set_coef(MultiIndex::from_slice(&[1, 1, 0]), c.real(1.0));
        theta.components[0].set_coef(MultiIndex::from_slice(&[1, 0, 1]), c.real(1.0));
        let u = solve_implicit(&theta, 2, 3).unwrap();
        let mut expect = FormalMap::zero(&c, 2, 1, 3);
        expect.components[0].set_coef(MultiIndex::from_slice(&[1, 1]), c.real(1.0));
        expect.components[0].set_coef(MultiIndex::from_slice(&[2, 1]), c.real(1.0));
        assert!(u.approx_eq(&expect, &c.guard_band()));
    }

    #[test]
    fn solve_implicit_trivial_and_errors() {
        let c = ctx();
        // u = z
        let mut theta = FormalMap::zero(&c, 2, 1, 5);
        theta.components[0].set_coef(MultiIndex::from_slice(&[1, 0]), c.real(1.0));
        let u = solve_implicit(&theta, 1, 5).unwrap();
        assert!(u.approx_eq(&FormalMap::identity(&c, 1, 5), &c.zero_tol));
        // non-contractive: u = z + u
        theta.components[0].set_coef(MultiIndex::from_slice(&[0, 1]), c.real(1.0));
        assert!(matches!(solve_implicit(&theta, 1, 5), Err(Error::NonContractive)));
    }
}
