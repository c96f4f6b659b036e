//! Dense linear algebra over arbitrary-precision complex scalars: just
//! enough for the small (<= 16x16) eigenstructure workloads here, with
//! tolerance-aware pivoting. Characteristic polynomials go through
//! Faddeev-LeVerrier and roots through Durand-Kerner, keeping everything
//! at working precision.

use crate::error::Error;
use crate::num::{BigFloat, Complex, Ctx};

#[derive(Clone)]
pub struct Matrix {
    ctx: Ctx,
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl Matrix {
    pub fn zeros(ctx: &Ctx, rows: usize, cols: usize) -> Self {
        Matrix { ctx: ctx.clone(), rows, cols, data: vec![ctx.zero(); rows * cols] }
    }

    pub fn identity(ctx: &Ctx, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = ctx.one();
        }
        m
    }

    pub fn from_fn(ctx: &Ctx, rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex) -> Self {
        let mut m = Self::zeros(ctx, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                *m.at_mut(i, j) = f(i, j);
            }
        }
        m
    }

    pub fn diag(ctx: &Ctx, d: &[Complex]) -> Self {
        let mut m = Self::zeros(ctx, d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            *m.at_mut(i, i) = v.clone();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn at(&self, i: usize, j: usize) -> &Complex {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex {
        &mut self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.ctx, self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(&self.ctx, self.rows, self.cols, |i, j| self.at(i, j).conj())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_fn(&self.ctx, self.rows, self.cols, |i, j| self.at(i, j).add(o.at(i, j)))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::from_fn(&self.ctx, self.rows, self.cols, |i, j| self.at(i, j).sub(o.at(i, j)))
    }

    pub fn scale(&self, c: &Complex) -> Self {
        Self::from_fn(&self.ctx, self.rows, self.cols, |i, j| self.at(i, j).mul(c))
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut m = Self::zeros(&self.ctx, self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if self.ctx.is_zero(a) {
                    continue;
                }
                for j in 0..o.cols {
                    let v = m.at(i, j).add(&a.mul(o.at(k, j)));
                    *m.at_mut(i, j) = v;
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[Complex]) -> Vec<Complex> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = self.ctx.zero();
                for j in 0..self.cols {
                    acc = acc.add(&self.at(i, j).mul(&v[j]));
                }
                acc
            })
            .collect()
    }

    pub fn max_mag(&self) -> BigFloat {
        let mut m = BigFloat::zero(self.ctx.prec);
        for c in &self.data {
            let a = c.mag_inf();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn trace(&self) -> Complex {
        let mut t = self.ctx.zero();
        for i in 0..self.rows.min(self.cols) {
            t = t.add(self.at(i, i));
        }
        t
    }

    /// Gauss-Jordan inverse with partial pivoting; fails when a pivot is
    /// below the zero tolerance.
    pub fn inverse(&self) -> Result<Self, Error> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(&self.ctx, n);
        for col in 0..n {
            let mut piv = col;
            let mut best = a.at(col, col).mag_inf();
            for r in col + 1..n {
                let m = a.at(r, col).mag_inf();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best < self.ctx.zero_tol {
                return Err(Error::SingularLinearPart);
            }
            if piv != col {
                for j in 0..n {
                    let t = a.at(piv, j).clone();
                    *a.at_mut(piv, j) = a.at(col, j).clone();
                    *a.at_mut(col, j) = t;
                    let t = inv.at(piv, j).clone();
                    *inv.at_mut(piv, j) = inv.at(col, j).clone();
                    *inv.at_mut(col, j) = t;
                }
            }
            let d = a.at(col, col).clone();
            for j in 0..n {
                *a.at_mut(col, j) = a.at(col, j).div(&d);
                *inv.at_mut(col, j) = inv.at(col, j).div(&d);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col).clone();
                if self.ctx.is_zero(&f) {
                    continue;
                }
                for j in 0..n {
                    let v = a.at(r, j).sub(&f.mul(a.at(col, j)));
                    *a.at_mut(r, j) = v;
                    let v = inv.at(r, j).sub(&f.mul(inv.at(col, j)));
                    *inv.at_mut(r, j) = v;
                }
            }
        }
        Ok(inv)
    }

    pub fn det(&self) -> Complex {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = self.ctx.one();
        for col in 0..n {
            let mut piv = col;
            let mut best = a.at(col, col).mag_inf();
            for r in col + 1..n {
                let m = a.at(r, col).mag_inf();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best.is_zero() {
                return self.ctx.zero();
            }
            if piv != col {
                det = det.neg();
                for j in 0..n {
                    let t = a.at(piv, j).clone();
                    *a.at_mut(piv, j) = a.at(col, j).clone();
                    *a.at_mut(col, j) = t;
                }
            }
            let d = a.at(col, col).clone();
            det = det.mul(&d);
            for r in col + 1..n {
                let f = a.at(r, col).div(&d);
                for j in col..n {
                    let v = a.at(r, j).sub(&f.mul(a.at(col, j)));
                    *a.at_mut(r, j) = v;
                }
            }
        }
        det
    }

    /// Numerical rank with the context tolerance (row echelon with partial
    /// pivoting; adequate for the small structured matrices used here).
    pub fn rank(&self, tol: &BigFloat) -> usize {
        let mut a = self.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        let mut row = 0;
        for col in 0..cols {
            if row >= rows {
                break;
            }
            let mut piv = row;
            let mut best = a.at(row, col).mag_inf();
            for r in row + 1..rows {
                let m = a.at(r, col).mag_inf();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best < *tol {
                continue;
            }
            if piv != row {
                for j in 0..cols {
                    let t = a.at(piv, j).clone();
                    *a.at_mut(piv, j) = a.at(row, j).clone();
                    *a.at_mut(row, j) = t;
                }
            }
            let d = a.at(row, col).clone();
            for r in row + 1..rows {
                let f = a.at(r, col).div(&d);
                for j in 0..cols {
                    let v = a.at(r, j).sub(&f.mul(a.at(row, j)));
                    *a.at_mut(r, j) = v;
                }
            }
            rank += 1;
            row += 1;
        }
        rank
    }

    /// One unit-normalized null vector of a (numerically) rank-deficient
    /// square matrix.
    pub fn null_vector(&self, tol: &BigFloat) -> Result<Vec<Complex>, Error> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut col_of_row: Vec<Option<usize>> = vec![None; n];
        let mut row = 0;
        let mut free_col = None;
        for col in 0..n {
            let mut piv = row;
            let mut best = if row < n { a.at(row, col).mag_inf() } else { BigFloat::zero(self.ctx.prec) };
            for r in row + 1..n {
                let m = a.at(r, col).mag_inf();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if row >= n || best < *tol {
                if free_col.is_none() {
                    free_col = Some(col);
                }
                continue;
            }
            if piv != row {
                for j in 0..n {
                    let t = a.at(piv, j).clone();
                    *a.at_mut(piv, j) = a.at(row, j).clone();
                    *a.at_mut(row, j) = t;
                }
            }
            let d = a.at(row, col).clone();
            for j in 0..n {
                *a.at_mut(row, j) = a.at(row, j).div(&d);
            }
            for r in 0..n {
                if r == row {
                    continue;
                }
                let f = a.at(r, col).clone();
                if self.ctx.is_zero(&f) {
                    continue;
                }
                for j in 0..n {
                    let v = a.at(r, j).sub(&f.mul(a.at(row, j)));
                    *a.at_mut(r, j) = v;
                }
            }
            col_of_row[row] = Some(col);
            row += 1;
        }
        let free = free_col.ok_or(Error::SingularLinearPart)?;
        let mut v = vec![self.ctx.zero(); n];
        v[free] = self.ctx.one();
        for r in 0..row {
            if let Some(c) = col_of_row[r] {
                v[c] = a.at(r, free).neg();
            }
        }
        // normalize by largest entry
        let mut best = self.ctx.zero();
        for x in &v {
            if x.mag_inf() > best.mag_inf() {
                best = x.clone();
            }
        }
        let inv = best.recip();
        Ok(v.iter().map(|x| x.mul(&inv)).collect())
    }

    /// Full null-space basis of a real-entried matrix (imaginary parts of
    /// entries are asserted negligible), via row echelon over the reals.
    pub fn real_null_space(&self, tol: &BigFloat) -> Vec<Vec<BigFloat>> {
        let rows = self.rows;
        let cols = self.cols;
        let prec = self.ctx.prec;
        let mut a: Vec<Vec<BigFloat>> = (0..rows)
            .map(|i| (0..cols).map(|j| self.at(i, j).re.clone()).collect())
            .collect();
        let mut pivot_col_of_row: Vec<usize> = Vec::new();
        let mut is_pivot_col = vec![false; cols];
        let mut r = 0;
        for c in 0..cols {
            if r >= rows {
                break;
            }
            let mut piv = r;
            let mut best = a[r][c].abs();
            for rr in r + 1..rows {
                let m = a[rr][c].abs();
                if m > best {
                    best = m;
                    piv = rr;
                }
            }
            if best < *tol {
                continue;
            }
            a.swap(r, piv);
            let d = a[r][c].clone();
            for x in a[r].iter_mut() {
                *x = x.div(&d);
            }
            for rr in 0..rows {
                if rr == r {
                    continue;
                }
                let f = a[rr][c].clone();
                if f.is_zero() {
                    continue;
                }
                for cc in 0..cols {
                    let v = a[rr][cc].sub(&f.mul(&a[r][cc]));
                    a[rr][cc] = v;
                }
            }
            pivot_col_of_row.push(c);
            is_pivot_col[c] = true;
            r += 1;
        }
        let mut basis = Vec::new();
        for free_c in 0..cols {
            if is_pivot_col[free_c] {
                continue;
            }
            let mut v = vec![BigFloat::zero(prec); cols];
            v[free_c] = BigFloat::from_u64(1, prec);
            for (row_i, &pc) in pivot_col_of_row.iter().enumerate() {
                v[pc] = a[row_i][free_c].neg();
            }
            basis.push(v);
        }
        basis
    }

    /// Coefficients c_0..c_n of the characteristic polynomial
    /// det(tI - A) = t^n + c_{n-1} t^{n-1} + ... + c_0 (Faddeev-LeVerrier).
    pub fn char_poly(&self) -> Vec<Complex> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut coeffs = vec![self.ctx.zero(); n + 1];
        coeffs[n] = self.ctx.one();
        let mut m = Matrix::zeros(&self.ctx, n, n);
        let mut c = self.ctx.one();
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{k-1} I
            let am = self.mul(&m);
            let mut mk = am;
            for i in 0..n {
                let v = mk.at(i, i).add(&c);
                *mk.at_mut(i, i) = v;
            }
            let t = self.mul(&mk).trace();
            c = t.div(&self.ctx.one().mul_i64(k as i64)).neg();
            coeffs[n - k] = c.clone();
            m = mk;
        }
        coeffs
    }
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?} ", self.at(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// All roots of a monic polynomial given by coefficients c_0..c_n
/// (Durand-Kerner at working precision).
pub fn durand_kerner(ctx: &Ctx, coeffs: &[Complex]) -> Vec<Complex> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = coeffs[n].clone();
    let monic: Vec<Complex> = coeffs.iter().map(|c| c.div(&lead)).collect();
    let eval = |z: &Complex| -> Complex {
        let mut acc = ctx.zero();
        for c in monic.iter().rev() {
            acc = acc.mul(z).add(c);
        }
        acc
    };
    // initial guesses on a spiral
    let seed = ctx.cplx(0.4, 0.9);
    let mut roots: Vec<Complex> = (0..n).map(|k| seed.powi(k as i64 + 1)).collect();
    let tol = BigFloat::from_pow2(1, -(ctx.prec as i64) + 24, ctx.prec);
    for _ in 0..2000 {
        let mut delta = BigFloat::zero(ctx.prec);
        for i in 0..n {
            let mut denom = ctx.one();
            for j in 0..n {
                if i != j {
                    denom = denom.mul(&roots[i].sub(&roots[j]));
                }
            }
            let step = eval(&roots[i]).div(&denom);
            let d = step.mag_inf();
            if d > delta {
                delta = d;
            }
            roots[i] = roots[i].sub(&step);
        }
        if delta < tol {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        Ctx::default_ctx()
    }

    #[test]
    fn inverse_and_det() {
        let c = ctx();
        let m = Matrix::from_fn(&c, 2, 2, |i, j| c.real([[2.0, 1.0], [1.0, 3.0]][i][j]));
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        assert!(prod.sub(&Matrix::identity(&c, 2)).max_mag() < c.guard_band());
        let d = m.det();
        assert!(d.sub(&c.real(5.0)).mag_inf() < c.guard_band());
    }

    #[test]
    fn char_poly_and_roots() {
        let c = ctx();
        // companion-ish matrix with eigenvalues 1, 2, 3
        let m = Matrix::from_fn(&c, 3, 3, |i, j| {
            c.real([[1.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 3.0]][i][j])
        });
        let cp = m.char_poly();
        // det(tI-A) = (t-1)(t-2)(t-3) = t^3 - 6t^2 + 11t - 6
        assert!(cp[0].sub(&c.real(-6.0)).mag_inf() < c.guard_band());
        assert!(cp[1].sub(&c.real(11.0)).mag_inf() < c.guard_band());
        assert!(cp[2].sub(&c.real(-6.0)).mag_inf() < c.guard_band());
        let mut roots = durand_kerner(&c, &cp);
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (r, want) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!(r.sub(&c.real(want)).mag_inf() < BigFloat::from_pow2(1, -200, c.prec));
        }
    }

    #[test]
    fn null_vector_of_singular() {
        let c = ctx();
        // rank-1 matrix
        let m = Matrix::from_fn(&c, 2, 2, |i, j| c.real([[1.0, 2.0], [2.0, 4.0]][i][j]));
        assert_eq!(m.rank(&c.zero_tol), 1);
        let v = m.null_vector(&c.zero_tol).unwrap();
        let out = m.mul_vec(&v);
        assert!(out.iter().all(|x| x.mag_inf() < c.guard_band()));
    }
}
