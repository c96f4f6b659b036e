//! Exponent vectors with graded-lexicographic ordering.

use smallvec::SmallVec;
use std::cmp::Ordering;
use std::fmt;

/// Exponent vector over a fixed number of variables. Ordered by total
/// degree first, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub SmallVec<[u16; 8]>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, n))
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut m = Self::zero(n);
        m.0[j] = 1;
        m
    }

    pub fn from_slice(v: &[u16]) -> Self {
        MultiIndex(SmallVec::from_slice(v))
    }

    pub fn from_usizes(v: &[usize]) -> Self {
        MultiIndex(v.iter().map(|&x| x as u16).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn get(&self, j: usize) -> u16 {
        self.0[j]
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.n(), o.n());
        MultiIndex(self.0.iter().zip(o.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Component-wise subtraction; None if any component would go negative.
    pub fn checked_sub(&self, o: &Self) -> Option<Self> {
        let mut out = SmallVec::with_capacity(self.n());
        for (a, b) in self.0.iter().zip(o.0.iter()) {
            if a < b {
                return None;
            }
            out.push(a - b);
        }
        Some(MultiIndex(out))
    }

    pub fn incremented(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.0[j] += 1;
        m
    }

    pub fn decremented(&self, j: usize) -> Option<Self> {
        if self.0[j] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[j] -= 1;
        Some(m)
    }

    /// Index of the last nonzero exponent.
    pub fn last_var(&self) -> Option<usize> {
        (0..self.n()).rev().find(|&j| self.0[j] != 0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        self.0.iter().copied()
    }

    /// Apply a permutation of the variables: out[k] = self[perm[k]].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        MultiIndex(perm.iter().map(|&j| self.0[j]).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
    }
}

/// Enumerate all multi-indices over `n` variables with total degree <= `deg`,
/// in graded-lexicographic order.
pub fn indices_up_to(n: usize, deg: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=deg {
        push_degree(n, d, &mut out);
    }
    out
}

/// Enumerate all multi-indices of total degree exactly `deg` in lex order.
pub fn indices_of_degree(n: usize, deg: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    push_degree(n, deg, &mut out);
    out
}

fn push_degree(n: usize, d: u32, out: &mut Vec<MultiIndex>) {
    fn rec(cur: &mut SmallVec<[u16; 8]>, pos: usize, rem: u32, n: usize, out: &mut Vec<MultiIndex>) {
        if pos == n - 1 {
            cur.push(rem as u16);
            out.push(MultiIndex(cur.clone()));
            cur.pop();
            return;
        }
        for e in 0..=rem {
            cur.push(e as u16);
            rec(cur, pos + 1, rem - e, n, out);
            cur.pop();
        }
    }
    if n == 0 {
        if d == 0 {
            out.push(MultiIndex(SmallVec::new()));
        }
        return;
    }
    let mut cur = SmallVec::new();
    rec(&mut cur, 0, d, n, out);
}

/// Number of monomials in `n` variables of total degree <= `deg`.
pub fn monomial_count(n: usize, deg: u32) -> usize {
    // C(n + deg, n)
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        c = c * (deg as u128 + i) / i;
    }
    c as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grlex_order() {
        let a = MultiIndex::from_slice(&[1, 0]);
        let b = MultiIndex::from_slice(&[0, 2]);
        let c = MultiIndex::from_slice(&[1, 1]);
        assert!(a < b); // degree 1 < 2
        assert!(c > b); // same degree, lex: [1,1] > [0,2]
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(indices_up_to(2, 3).len(), monomial_count(2, 3));
        assert_eq!(indices_up_to(3, 5).len(), monomial_count(3, 5));
        assert_eq!(monomial_count(6, 10), 8008);
        let v = indices_up_to(2, 2);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }
}
