//! Normalization pipeline tests, including the independent brute-force jet
//! oracle for the Poincare-Dulac step: the oracle assembles the linear
//! system of the conjugacy equation degree by degree purely through
//! composition probes, never through divisor formulas.

use crsing::divisors::DivisorProvider;
use crsing::fps::{compose, invert, FormalMap, FormalSeries, MultiIndex};
use crsing::linalg::Matrix;
use crsing::manifolds::{deck_transformations, moser_webster_data, residual_tol, ManifoldSpec};
use crsing::normalform::*;
use crsing::num::{BigFloat, Complex, Ctx};

fn ctx() -> Ctx {
    Ctx::default_ctx()
}

fn bishop_perturbed(ctx: &Ctx, gamma: f64, d: u32) -> ManifoldSpec {
    let g = ctx.real(gamma);
    let mut e = FormalSeries::zero(ctx, 2, d);
    e.set_coef(MultiIndex::from_slice(&[1, 1]), ctx.one());
    e.set_coef(MultiIndex::from_slice(&[2, 0]), g.clone());
    e.set_coef(MultiIndex::from_slice(&[0, 2]), g.clone());
    // fixed generic quartic perturbation
    e.set_coef(MultiIndex::from_slice(&[0, 4]), ctx.cplx(0.125, 0.0625));
    e.set_coef(MultiIndex::from_slice(&[2, 2]), ctx.cplx(-0.03125, 0.25));
    e.set_coef(MultiIndex::from_slice(&[1, 3]), ctx.cplx(0.0625, -0.125));
    ManifoldSpec::new_generic(ctx, 1, vec![e]).unwrap()
}

#[test]
fn normalize_sigma_trivial_and_resonant() {
    let c = ctx();
    let d = 5;
    let mu = vec![c.real(2.0)];
    let dv = DivisorProvider::plain(&c, mu.clone());
    // sigma = S-hat
    let shat = crsing::quadrics::standard_s_matrix(&c, &mu);
    let sigma = FormalMap::from_matrix(&c, &shat, d);
    let nf = normalize_sigma(&sigma, &dv, d).unwrap();
    assert!(nf.psi.approx_eq(&FormalMap::identity(&c, 2, d), &c.guard_band()));
    assert!(nf.m[0]
        .sub(&FormalSeries::constant(&c, 1, zeta_degree(d), c.real(2.0)))
        .max_coef_mag()
        < c.guard_band());
    // sigma = S-hat + resonant cubic xi (xi eta): psi stays identity
    let mut sigma2 = FormalMap::from_matrix(&c, &shat, d);
    sigma2.components[0].set_coef(MultiIndex::from_slice(&[2, 1]), c.real(0.5));
    let dv = DivisorProvider::plain(&c, mu.clone());
    let nf2 = normalize_sigma(&sigma2, &dv, d).unwrap();
    assert!(nf2.psi.jet(3).approx_eq(&FormalMap::identity(&c, 2, d), &c.guard_band()));
    assert!(nf2.m[0]
        .coef(&MultiIndex::from_slice(&[1]))
        .sub(&c.real(0.5))
        .mag_inf()
        < c.guard_band());
}

/// Independent oracle: solve the conjugacy equation degree by degree by
/// probing the affine residual map in the unknown coefficients.
fn oracle_normalize(
    ctx: &Ctx,
    sigma: &FormalMap,
    mu: &[Complex],
    d: u32,
) -> (FormalMap, Vec<FormalSeries>, Vec<FormalSeries>) {
    let p = mu.len();
    let nv = 2 * p;
    let dz = zeta_degree(d);
    let mut psi = FormalMap::identity(ctx, nv, d);
    let mut m: Vec<FormalSeries> = (0..p)
        .map(|j| FormalSeries::constant(ctx, p, dz, mu[j].clone()))
        .collect();
    let mut n: Vec<FormalSeries> = (0..p)
        .map(|j| FormalSeries::constant(ctx, p, dz, mu[j].recip()))
        .collect();
    #[derive(Clone)]
    enum Unknown {
        Psi { comp: usize, idx: MultiIndex },
        M { j: usize, a: MultiIndex },
        N { j: usize, a: MultiIndex },
    }
    for k in 2..=d {
        // unknown slots at degree k
        let mut unknowns: Vec<Unknown> = Vec::new();
        for comp in 0..nv {
            let j = comp % p;
            for idx in crsing::fps::multiindex::indices_of_degree(nv, k) {
                let diff: Vec<i64> = (0..p)
                    .map(|t| idx.get(t) as i64 - idx.get(p + t) as i64)
                    .collect();
                let res_xi = (0..p).all(|t| diff[t] == i64::from(t == j));
                let res_eta = (0..p).all(|t| diff[t] == -i64::from(t == j));
                if comp < p {
                    if res_xi {
                        // handled by the M unknown instead
                    } else {
                        unknowns.push(Unknown::Psi { comp, idx: idx.clone() });
                    }
                } else if res_eta {
                } else {
                    unknowns.push(Unknown::Psi { comp, idx: idx.clone() });
                }
            }
        }
        if k % 2 == 1 {
            let ka = (k - 1) / 2;
            for j in 0..p {
                for a in crsing::fps::multiindex::indices_of_degree(p, ka) {
                    unknowns.push(Unknown::M { j, a: a.clone() });
                    unknowns.push(Unknown::N { j, a });
                }
            }
        }
        let apply = |vals: &[Complex]| -> FormalMap {
            let mut psi2 = psi.clone();
            let mut m2 = m.clone();
            let mut n2 = n.clone();
            for (u, v) in unknowns.iter().zip(vals) {
                match u {
                    Unknown::Psi { comp, idx } => {
                        psi2.components[*comp].add_to_coef(idx.clone(), v)
                    }
                    Unknown::M { j, a } => m2[*j].add_to_coef(a.clone(), v),
                    Unknown::N { j, a } => n2[*j].add_to_coef(a.clone(), v),
                }
            }
            let ss = map_from_invariants(ctx, &m2, &n2, d);
            compose(sigma, &psi2)
                .unwrap()
                .sub(&compose(&psi2, &ss).unwrap())
                .homogeneous_part(k)
        };
        let zero_vals = vec![ctx.zero(); unknowns.len()];
        let r0 = apply(&zero_vals);
        // residual slot list: all degree-k monomials of all components
        let slots: Vec<(usize, MultiIndex)> = (0..nv)
            .flat_map(|compn| {
                crsing::fps::multiindex::indices_of_degree(nv, k)
                    .into_iter()
                    .map(move |idx| (compn, idx))
            })
            .collect();
        let nrow = slots.len();
        let ncol = unknowns.len();
        let mut amat = Matrix::zeros(ctx, nrow, ncol);
        let mut bvec = Vec::with_capacity(nrow);
        for (r, (compn, idx)) in slots.iter().enumerate() {
            bvec.push(r0.components[*compn].coef(idx).neg());
            let _ = r;
        }
        for cidx in 0..ncol {
            let mut vals = vec![ctx.zero(); ncol];
            vals[cidx] = ctx.one();
            let rc = apply(&vals);
            for (r, (compn, idx)) in slots.iter().enumerate() {
                let v = rc.components[*compn].coef(idx).sub(&r0.components[*compn].coef(idx));
                *amat.at_mut(r, cidx) = v;
            }
        }
        // solve least squares (system is square-ish and consistent)
        let mut ata = Matrix::zeros(ctx, ncol, ncol);
        let mut atb = vec![ctx.zero(); ncol];
        for r in 0..nrow {
            for i in 0..ncol {
                let ci = amat.at(r, i).conj();
                if ci.is_exact_zero() {
                    continue;
                }
                for j2 in 0..ncol {
                    let v = ata.at(i, j2).add(&ci.mul(amat.at(r, j2)));
                    *ata.at_mut(i, j2) = v;
                }
                atb[i] = atb[i].add(&ci.mul(&bvec[r]));
            }
        }
        let sol = ata.inverse().unwrap().mul_vec(&atb);
        for (u, v) in unknowns.iter().zip(&sol) {
            match u {
                Unknown::Psi { comp, idx } => psi.components[*comp].add_to_coef(idx.clone(), v),
                Unknown::M { j, a } => m[*j].add_to_coef(a.clone(), v),
                Unknown::N { j, a } => n[*j].add_to_coef(a.clone(), v),
            }
        }
    }
    (psi, m, n)
}

#[test]
fn bishop_sigma_matches_bruteforce_oracle() {
    let c = ctx();
    let d = 6;
    let m = bishop_perturbed(&c, 0.25, d);
    let decks = deck_transformations(&m, d).unwrap();
    let fam = moser_webster_data(&c, &decks, d).unwrap();
    let sigma = fam.sigma().unwrap();
    let mu = fam.norm.inv.mu.clone();
    let dv = DivisorProvider::plain(&c, mu.clone());
    let nf = normalize_sigma(&sigma, &dv, d).unwrap();
    let (psi_o, m_o, _n_o) = oracle_normalize(&c, &sigma, &mu, d);
    let tol = BigFloat::from_pow2(1, -160, c.prec);
    assert!(
        nf.psi.distance(&psi_o) < tol,
        "Psi differs from oracle by 2^{:.1}",
        nf.psi.distance(&psi_o).log2_abs()
    );
    assert!(
        nf.m[0].distance(&m_o[0]) < tol,
        "M differs from oracle by 2^{:.1}",
        nf.m[0].distance(&m_o[0]).log2_abs()
    );
}

#[test]
fn normalize_pair_elliptic_reality() {
    let c = ctx();
    let d = 6;
    let m = bishop_perturbed(&c, 0.25, d);
    let decks = deck_transformations(&m, d).unwrap();
    let fam = moser_webster_data(&c, &decks, d).unwrap();
    let t1 = fam.tau1_comp().unwrap();
    let t2 = fam.tau2_comp().unwrap();
    let dv = DivisorProvider::plain(&c, fam.norm.inv.mu.clone());
    let pnf = normalize_pair(&t1, &t2, &fam.rho, &dv, d, Some((1, 0, 0))).unwrap();
    // Lambda_1 Lambda_2 = 1 is asserted inside; reality residual small
    assert!(
        pnf.reality_residual < residual_tol(&c, d),
        "reality residual 2^{:.1}",
        pnf.reality_residual.log2_abs()
    );
    // tilde tau_1 tilde tau_2 has invariant form with M = Lambda_1^2
    let lam_sq = pnf.lambda1[0].mul(&pnf.lambda1[0]);
    assert!(lam_sq.distance(&pnf.m[0]) < c.guard_band());
}

#[test]
fn log_m_normal_form_examples() {
    let c = ctx();
    // F = (z1 + z1 z2, z2) at degree 2: g_{1,(0,1)} = -1, F-hat = I
    let d = 2;
    let mut f = FormalMap::identity(&c, 2, d);
    f.components[0].set_coef(MultiIndex::from_slice(&[1, 1]), c.one());
    let nf = normalize_log_m(&f, d).unwrap();
    assert!(nf
        .f_hat
        .approx_eq(&FormalMap::identity(&c, 2, d), &c.guard_band()));
    // psi_1 = z1 (1 + g) with g = -z2
    let g10 = nf.psi.components[0].coef(&MultiIndex::from_slice(&[1, 1]));
    assert!(g10.add(&c.one()).mag_inf() < c.guard_band());
    // F = (z1 + z2^2, z2): already normal
    let mut f2 = FormalMap::identity(&c, 2, 3);
    f2.components[0].set_coef(MultiIndex::from_slice(&[0, 2]), c.one());
    let nf2 = normalize_log_m(&f2, 3).unwrap();
    assert!(nf2.psi.approx_eq(&FormalMap::identity(&c, 2, 3), &c.guard_band()));
    assert!(nf2.f_hat.approx_eq(&f2, &c.guard_band()));
    // identity in, identity out
    let id = FormalMap::identity(&c, 2, 4);
    let nf3 = normalize_log_m(&id, 4).unwrap();
    assert!(nf3.psi.approx_eq(&id, &c.guard_band()));
}

#[test]
fn unique_normal_form_bishop() {
    let c = ctx();
    let d = 6;
    let m = bishop_perturbed(&c, 0.25, d);
    let decks = deck_transformations(&m, d).unwrap();
    let fam = moser_webster_data(&c, &decks, d).unwrap();
    let t1 = fam.tau1_comp().unwrap();
    let t2 = fam.tau2_comp().unwrap();
    let dv = DivisorProvider::plain(&c, fam.norm.inv.mu.clone());
    let unf = unique_normal_form(&t1, &t2, &fam.rho, &dv, d, (1, 0, 0)).unwrap();
    // sanity: M-hat(0) = mu and the conjugation transports sigma onto the
    // normal form
    assert!(unf.m_hat[0]
        .constant_term()
        .sub(&fam.norm.inv.mu[0])
        .mag_inf()
        < c.guard_band());
    let sigma = fam.sigma().unwrap();
    let n_hat: Vec<FormalSeries> = unf.m_hat.iter().map(|s| s.invert_unit()).collect();
    let sig_hat = map_from_invariants(&c, &unf.m_hat, &n_hat, d);
    let lhs = compose(&sigma, &unf.psi_total).unwrap();
    let rhs = compose(&unf.psi_total, &sig_hat).unwrap();
    let scale = unf.psi_total.max_coef_mag().add(&BigFloat::from_u64(1, c.prec));
    assert!(
        lhs.distance(&rhs) < residual_tol(&c, d).mul(&scale),
        "normal-form conjugacy residual 2^{:.1}",
        lhs.distance(&rhs).log2_abs()
    );
    // dilation invariance: conjugating the pair by R_eps leaves M-hat fixed
    let mut reps = Matrix::identity(&c, 2);
    *reps.at_mut(0, 0) = c.real(-1.0);
    *reps.at_mut(1, 1) = c.real(-1.0);
    let rmap = FormalMap::from_matrix(&c, &reps, d);
    let t1e = compose(&rmap, &compose(&t1, &rmap).unwrap()).unwrap();
    let t2e = compose(&rmap, &compose(&t2, &rmap).unwrap()).unwrap();
    let dv2 = DivisorProvider::plain(&c, fam.norm.inv.mu.clone());
    let unf2 = unique_normal_form(&t1e, &t2e, &fam.rho, &dv2, d, (1, 0, 0)).unwrap();
    assert!(
        unf2.m_hat[0].distance(&unf.m_hat[0]) < residual_tol(&c, d),
        "M-hat not dilation invariant: 2^{:.1}",
        unf2.m_hat[0].distance(&unf.m_hat[0]).log2_abs()
    );
}

#[test]
fn psi_invariant_identity_and_plant() {
    let c = ctx();
    let d = 5;
    let p = 2;
    // hatted generators from Lambda-hat = constants (product quadric)
    let l1 = crsing::quadrics::lambda_from_gamma_real(
        &c,
        &c.real(0.25),
        crsing::quadrics::TangentType::Elliptic,
    );
    let l2 = crsing::quadrics::lambda_from_gamma_real(
        &c,
        &c.real(0.375),
        crsing::quadrics::TangentType::Elliptic,
    );
    let dz = zeta_degree(d);
    let lamhat = vec![
        FormalSeries::constant(&c, p, dz, l1.clone()),
        FormalSeries::constant(&c, p, dz, l2.clone()),
    ];
    let (e, einv) = crsing::centralizers::e_lambda_nonlinear(&c, &lamhat, d).unwrap();
    let mut tau_hats = Vec::new();
    for j in 0..p {
        let mut zj = Matrix::identity(&c, 2 * p);
        *zj.at_mut(p + j, p + j) = c.real(-1.0);
        let zmap = FormalMap::from_matrix(&c, &zj, d);
        tau_hats.push(compose(&e, &compose(&zmap, &einv).unwrap()).unwrap());
    }
    // already hatted: psi = id
    let psi = psi_invariant(&tau_hats, &lamhat, d).unwrap();
    assert!(psi.approx_eq(&FormalMap::identity(&c, 2 * p, d), &residual_tol(&c, d)));
    // plant: conjugate by psi0 = E psi_z E^{-1} with psi_z normalized in
    // the Z-family complement
    let mut psi_z = FormalMap::identity(&c, 2 * p, d);
    // xi_1-component: odd-eta monomial (normalized side of Z family)
    psi_z.components[0].set_coef(MultiIndex::from_slice(&[0, 1, 1, 0]), c.cplx(0.25, 0.125));
    // eta_2-component: monomial not of the form eta_2 (even): eta_1^2 eta_2^0 -> pick xi_2^2
    psi_z.components[3].set_coef(MultiIndex::from_slice(&[0, 2, 0, 0]), c.cplx(-0.125, 0.0625));
    let psi0 = compose(&e, &compose(&psi_z, &einv).unwrap()).unwrap();
    let psi0_inv = invert(&psi0).unwrap();
    let planted: Vec<FormalMap> = tau_hats
        .iter()
        .map(|t| compose(&psi0, &compose(t, &psi0_inv).unwrap()).unwrap())
        .collect();
    let rec = psi_invariant(&planted, &lamhat, d).unwrap();
    let scale = psi0.max_coef_mag().add(&BigFloat::from_u64(1, c.prec));
    assert!(
        rec.distance(&psi0) < residual_tol(&c, d).mul(&scale),
        "planted psi not recovered: 2^{:.1}",
        rec.distance(&psi0).log2_abs()
    );
}
