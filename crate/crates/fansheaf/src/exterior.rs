//! Exterior algebras on canonical rational bases and their graded duals.
//!
//! Monomials are sorted index subsets of the canonical basis, stored as bit
//! masks; an element is a finite monomial-to-coefficient map. The dual
//! algebra uses the same monomial indexing with Λ^p(·)* placed in degree −p.

use crate::qlinalg::{Rat, Subspace};
use num::Zero;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtError {
    #[error("subspaces overlap; wedge target is not a direct sum")]
    OverlappingSubspaces,
}

pub type Mask = u32;

/// Sign and mask of the wedge of two disjoint monomials, None if they share
/// a basis vector.
pub fn wedge_masks(a: Mask, b: Mask) -> Option<(i32, Mask)> {
    if a & b != 0 {
        return None;
    }
    // sign = (-1)^{#{(i,j) : i in a, j in b, i > j}}
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        bb &= bb - 1;
        let higher = a >> (j + 1);
        inversions += higher.count_ones();
    }
    Some((if inversions % 2 == 0 { 1 } else { -1 }, a | b))
}

/// Canonical enumeration of the 2^d monomials: by degree, then numerically.
pub fn monomials(d: usize) -> Vec<Mask> {
    let mut all: Vec<Mask> = (0..(1u32 << d)).collect();
    all.sort_by_key(|m| (m.count_ones(), *m));
    all
}

pub fn monomials_of_degree(d: usize, k: usize) -> Vec<Mask> {
    (0..(1u32 << d)).filter(|m| m.count_ones() as usize == k).collect()
}

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Element of Λ(W) for a d-dimensional space W, in the canonical monomial
/// basis. The same representation serves the graded dual Λ(W)* (with the
/// grading negated); pairing is the Kronecker pairing of dual bases.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ExtVec {
    pub coeffs: BTreeMap<Mask, Rat>,
}

impl ExtVec {
    pub fn zero() -> Self {
        ExtVec { coeffs: BTreeMap::new() }
    }

    pub fn scalar(c: Rat) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(0, c);
        }
        ExtVec { coeffs }
    }

    pub fn monomial(m: Mask, c: Rat) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(m, c);
        }
        ExtVec { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, m: Mask, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(m).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&m);
        }
    }

    pub fn add(&self, other: &ExtVec) -> ExtVec {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> ExtVec {
        if c.is_zero() {
            return ExtVec::zero();
        }
        ExtVec {
            coeffs: self.coeffs.iter().map(|(m, x)| (*m, x * c)).collect(),
        }
    }

    pub fn neg(&self) -> ExtVec {
        ExtVec {
            coeffs: self.coeffs.iter().map(|(m, x)| (*m, -x.clone())).collect(),
        }
    }

    /// True when every monomial has the given degree.
    pub fn homogeneous_of(&self, k: usize) -> bool {
        self.coeffs.keys().all(|m| m.count_ones() as usize == k)
    }

    /// Degree when homogeneous and nonzero.
    pub fn degree(&self) -> Option<usize> {
        let mut it = self.coeffs.keys();
        let first = it.next()?.count_ones() as usize;
        it.all(|m| m.count_ones() as usize == first).then_some(first)
    }

    /// Wedge inside one algebra.
    pub fn wedge(&self, other: &ExtVec) -> ExtVec {
        let mut out = ExtVec::zero();
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &other.coeffs {
                if let Some((s, m)) = wedge_masks(*ma, *mb) {
                    let mut c = ca * cb;
                    if s < 0 {
                        c = -c;
                    }
                    out.add_term(m, c);
                }
            }
        }
        out
    }

    /// Kronecker pairing of a dual element (self) against an element.
    pub fn pair(&self, elem: &ExtVec) -> Rat {
        let mut s = Rat::zero();
        for (m, c) in &self.coeffs {
            if let Some(x) = elem.coeffs.get(m) {
                s += c * x;
            }
        }
        s
    }

    /// Coefficient vector over the canonical monomial enumeration of Λ(W),
    /// dim W = d.
    pub fn to_dense(&self, d: usize) -> Vec<Rat> {
        let mons = monomials(d);
        let index: BTreeMap<Mask, usize> = mons.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let mut v = vec![Rat::zero(); mons.len()];
        for (m, c) in &self.coeffs {
            v[index[m]] = c.clone();
        }
        v
    }

    pub fn from_dense(d: usize, v: &[Rat]) -> ExtVec {
        let mons = monomials(d);
        let mut out = ExtVec::zero();
        for (i, m) in mons.iter().enumerate() {
            if !v[i].is_zero() {
                out.add_term(*m, v[i].clone());
            }
        }
        out
    }
}

/// Λ(W)-element obtained by wedging vectors given in W-coordinates,
/// in the order listed.
pub fn wedge_of_vectors(coords: &[Vec<Rat>]) -> ExtVec {
    let mut acc = ExtVec::scalar(Rat::from_integer(1.into()));
    for v in coords {
        let mut lin = ExtVec::zero();
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                lin.add_term(1 << i, c.clone());
            }
        }
        acc = acc.wedge(&lin);
    }
    acc
}

/// An exterior algebra carrying its base space, for the free-standing wedge
/// operation between algebras on different subspaces.
#[derive(Clone, Debug)]
pub struct ExtAlgebra {
    pub space: Subspace,
}

impl ExtAlgebra {
    pub fn new(space: Subspace) -> Self {
        ExtAlgebra { space }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Wedge x ∈ Λ(W1) with y ∈ Λ(W2) into Λ(W) for W the canonical basis of
/// W1 + W2. Errors when W1 ∩ W2 ≠ 0.
pub fn wedge_across(
    a: &ExtAlgebra,
    x: &ExtVec,
    b: &ExtAlgebra,
    y: &ExtVec,
) -> Result<(ExtAlgebra, ExtVec), ExtError> {
    assert_eq!(a.space.ambient, b.space.ambient);
    if !a.space.sums_directly_with(&b.space) {
        return Err(ExtError::OverlappingSubspaces);
    }
    let mut rows = a.space.basis.all_rows();
    rows.extend(b.space.basis.all_rows());
    let target = Subspace::from_vectors(&rows, a.space.ambient);
    let ax: Vec<Vec<Rat>> = (0..a.dim())
        .map(|i| target.coords_of(a.space.basis.row(i)).expect("basis in sum"))
        .collect();
    let bx: Vec<Vec<Rat>> = (0..b.dim())
        .map(|i| target.coords_of(b.space.basis.row(i)).expect("basis in sum"))
        .collect();
    let mut out = ExtVec::zero();
    for (ma, ca) in &x.coeffs {
        let avecs: Vec<Vec<Rat>> = mask_vectors(*ma, &ax);
        for (mb, cb) in &y.coeffs {
            let mut vecs = avecs.clone();
            vecs.extend(mask_vectors(*mb, &bx));
            let w = wedge_of_vectors(&vecs);
            out = out.add(&w.scale(&(ca * cb)));
        }
    }
    Ok((ExtAlgebra::new(target), out))
}

fn mask_vectors(m: Mask, table: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let mut out = Vec::new();
    let mut mm = m;
    while mm != 0 {
        let i = mm.trailing_zeros() as usize;
        mm &= mm - 1;
        out.push(table[i].clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::rat_i;

    #[test]
    fn wedge_mask_signs() {
        assert_eq!(wedge_masks(0b01, 0b10), Some((1, 0b11)));
        assert_eq!(wedge_masks(0b10, 0b01), Some((-1, 0b11)));
        assert_eq!(wedge_masks(0b01, 0b01), None);
        assert_eq!(wedge_masks(0b101, 0b010), Some((-1, 0b111)));
    }

    #[test]
    fn unit_and_anticommutativity() {
        let one = ExtVec::scalar(rat_i(1));
        let x = ExtVec::monomial(0b01, rat_i(3));
        assert_eq!(one.wedge(&x), x);
        let y = ExtVec::monomial(0b10, rat_i(1));
        assert_eq!(x.wedge(&y), y.wedge(&x).neg());
        assert!(x.wedge(&x).is_zero());
    }

    #[test]
    fn wedge_across_disjoint_axes() {
        let a = ExtAlgebra::new(Subspace::from_vectors(&[vec![rat_i(1), rat_i(0)]], 2));
        let b = ExtAlgebra::new(Subspace::from_vectors(&[vec![rat_i(0), rat_i(1)]], 2));
        let x = ExtVec::monomial(0b1, rat_i(1));
        let y = ExtVec::monomial(0b1, rat_i(1));
        let (t, w) = wedge_across(&a, &x, &b, &y).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(w, ExtVec::monomial(0b11, rat_i(1)));
    }

    #[test]
    fn wedge_across_overlap_rejected() {
        let a = ExtAlgebra::new(Subspace::from_vectors(&[vec![rat_i(1), rat_i(0)]], 2));
        assert_eq!(
            wedge_across(&a, &ExtVec::scalar(rat_i(1)), &a, &ExtVec::scalar(rat_i(1))).err(),
            Some(ExtError::OverlappingSubspaces)
        );
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(2), vec![0b00, 0b01, 0b10, 0b11]);
        assert_eq!(binom(3, 1), 3);
        assert_eq!(monomials_of_degree(3, 2).len(), 3);
    }
}
