//! Exact rational linear algebra on small dense matrices.
//!
//! Everything downstream (face lattices, exterior algebras, hom complexes)
//! depends on the canonical bases produced here being reproducible, so all
//! eliminations use a fixed pivot order and all bases are normalized to
//! primitive integer rows.

use num::{BigInt, BigRational, One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Dense matrix over the rationals, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl QMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        QMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat_i(x)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vec(&self, i: usize) -> Vec<Rat> {
        self.row(i).to_vec()
    }

    pub fn all_rows(&self) -> Vec<Vec<Rat>> {
        (0..self.rows).map(|i| self.row_vec(i)).collect()
    }

    pub fn transpose(&self) -> QMatrix {
        let mut t = QMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = QMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if !b.is_zero() {
                        *out.at_mut(i, j) += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Rat::zero();
                for j in 0..self.cols {
                    let a = self.at(i, j);
                    if !a.is_zero() && !v[j].is_zero() {
                        s += a * &v[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Reduced row echelon form together with the pivot column of each
    /// nonzero row. Pivot search order is fixed (first nonzero in column
    /// order), so the output is canonical.
    pub fn rref(&self) -> (QMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let mut pr = None;
            for i in r..m.rows {
                if !m.at(i, c).is_zero() {
                    pr = Some(i);
                    break;
                }
            }
            let Some(pr) = pr else { continue };
            if pr != r {
                for j in 0..m.cols {
                    let a = m.at(pr, j).clone();
                    let b = m.at(r, j).clone();
                    *m.at_mut(pr, j) = b;
                    *m.at_mut(r, j) = a;
                }
            }
            let inv = {
                let p = m.at(r, c).clone();
                Rat::one() / p
            };
            for j in 0..m.cols {
                let v = m.at(r, j).clone() * &inv;
                *m.at_mut(r, j) = v;
            }
            for i in 0..m.rows {
                if i == r || m.at(i, c).is_zero() {
                    continue;
                }
                let f = m.at(i, c).clone();
                for j in 0..m.cols {
                    let v = m.at(i, j).clone() - &f * m.at(r, j);
                    *m.at_mut(i, j) = v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Columns form the canonical (echelon-derived, primitive-integer) basis
    /// of the kernel {x : Ax = 0}.
    pub fn kernel_basis(&self) -> QMatrix {
        let (r, pivots) = self.rref();
        let pivot_of_col: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (row, &c) in pivots.iter().enumerate() {
                v[c] = Some(row);
            }
            v
        };
        let mut vectors: Vec<Vec<Rat>> = Vec::new();
        for free in 0..self.cols {
            if pivot_of_col[free].is_some() {
                continue;
            }
            let mut x = vec![Rat::zero(); self.cols];
            x[free] = Rat::one();
            for (row, &pc) in pivots.iter().enumerate() {
                x[pc] = -r.at(row, free).clone();
            }
            vectors.push(x);
        }
        if vectors.is_empty() {
            return QMatrix::zero(self.cols, 0);
        }
        canonical_subspace_basis(&vectors, self.cols).transpose()
    }

    /// One solution of Ax = b with free variables set to zero, or None when
    /// inconsistent.
    pub fn solve(&self, b: &[Rat]) -> Option<Vec<Rat>> {
        assert_eq!(self.rows, b.len(), "dimension mismatch in solve");
        let mut aug = QMatrix::zero(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *aug.at_mut(i, j) = self.at(i, j).clone();
            }
            *aug.at_mut(i, self.cols) = b[i].clone();
        }
        let (r, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return None;
        }
        let mut x = vec![Rat::zero(); self.cols];
        for (row, &c) in pivots.iter().enumerate() {
            x[c] = r.at(row, self.cols).clone();
        }
        Some(x)
    }

    /// Inverse of a square matrix; None when singular.
    pub fn inverse(&self) -> Option<QMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = QMatrix::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                *aug.at_mut(i, j) = self.at(i, j).clone();
            }
            *aug.at_mut(i, n + i) = Rat::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| c != i) {
            return None;
        }
        let mut inv = QMatrix::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                *inv.at_mut(i, j) = r.at(i, n + j).clone();
            }
        }
        Some(inv)
    }

    pub fn det(&self) -> Rat {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Rat::one();
        for c in 0..n {
            let mut pr = None;
            for i in c..n {
                if !m.at(i, c).is_zero() {
                    pr = Some(i);
                    break;
                }
            }
            let Some(pr) = pr else { return Rat::zero() };
            if pr != c {
                det = -det;
                for j in 0..n {
                    let a = m.at(pr, j).clone();
                    let b = m.at(c, j).clone();
                    *m.at_mut(pr, j) = b;
                    *m.at_mut(c, j) = a;
                }
            }
            let p = m.at(c, c).clone();
            det *= &p;
            let inv = Rat::one() / p;
            for i in c + 1..n {
                if m.at(i, c).is_zero() {
                    continue;
                }
                let f = m.at(i, c).clone() * &inv;
                for j in c..n {
                    let v = m.at(i, j).clone() - &f * m.at(c, j);
                    *m.at_mut(i, j) = v;
                }
            }
        }
        det
    }
}

/// Scale a nonzero rational row to coprime integers with positive leading
/// coefficient.
pub fn primitive_row(row: &[Rat]) -> Vec<Rat> {
    let mut lcm = BigInt::one();
    for x in row {
        if !x.is_zero() {
            lcm = num::integer::lcm(lcm, x.denom().clone());
        }
    }
    let scaled: Vec<BigInt> = row.iter().map(|x| (x * Rat::from_integer(lcm.clone())).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for x in &scaled {
        gcd = num::integer::gcd(gcd, x.clone());
    }
    if gcd.is_zero() {
        return row.to_vec();
    }
    let lead_neg = scaled.iter().find(|x| !x.is_zero()).map(|x| x.is_negative()).unwrap_or(false);
    let div = if lead_neg { -gcd } else { gcd };
    scaled
        .into_iter()
        .map(|x| Rat::from_integer(x / &div))
        .collect()
}

pub fn primitive_int_vec(row: &[Rat]) -> Vec<BigInt> {
    primitive_row(row).into_iter().map(|x| x.to_integer()).collect()
}

/// Scale to coprime integers by a positive factor, keeping the direction.
pub fn primitive_directed(row: &[Rat]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for x in row {
        if !x.is_zero() {
            lcm = num::integer::lcm(lcm, x.denom().clone());
        }
    }
    let scaled: Vec<BigInt> = row
        .iter()
        .map(|x| (x * Rat::from_integer(lcm.clone())).to_integer())
        .collect();
    let mut gcd = BigInt::zero();
    for x in &scaled {
        gcd = num::integer::gcd(gcd, x.clone());
    }
    if gcd.is_zero() {
        return scaled;
    }
    scaled.into_iter().map(|x| x / &gcd).collect()
}

/// The unique reduced-echelon, primitive-integer basis of the span of the
/// given vectors. Idempotent and invariant under permutation of the input.
pub fn canonical_subspace_basis(vectors: &[Vec<Rat>], ambient: usize) -> QMatrix {
    for v in vectors {
        assert_eq!(v.len(), ambient, "ambient dimension mismatch");
    }
    if vectors.is_empty() {
        return QMatrix::zero(0, ambient);
    }
    let (r, pivots) = QMatrix::from_rows(vectors.to_vec()).rref();
    let rows: Vec<Vec<Rat>> = (0..pivots.len()).map(|i| primitive_row(r.row(i))).collect();
    QMatrix::from_rows(rows)
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    assert_eq!(a.len(), b.len());
    let mut s = Rat::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            s += x * y;
        }
    }
    s
}

/// A linear subspace of Q^ambient given by its canonical basis (rows).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Subspace {
    pub ambient: usize,
    pub basis: QMatrix,
}

impl Subspace {
    pub fn from_vectors(vectors: &[Vec<Rat>], ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: canonical_subspace_basis(vectors, ambient),
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: QMatrix::zero(0, ambient),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: QMatrix::identity(ambient),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Coordinates of v in the canonical basis, or None when v is outside.
    pub fn coords_of(&self, v: &[Rat]) -> Option<Vec<Rat>> {
        self.basis.transpose().solve(v)
    }

    pub fn contains(&self, v: &[Rat]) -> bool {
        self.coords_of(v).is_some()
    }

    pub fn vector_from_coords(&self, coords: &[Rat]) -> Vec<Rat> {
        self.basis.transpose().mul_vec(coords)
    }

    /// {x : <b, x> = 0 for all basis rows b}; the kernel of the basis matrix.
    pub fn orthogonal_kernel(&self) -> Subspace {
        let k = self.basis.kernel_basis();
        Subspace {
            ambient: self.ambient,
            basis: canonical_subspace_basis(&k.transpose().all_rows(), self.ambient),
        }
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient, other.ambient);
        // Solve a*basis1 - b*basis2 = 0 over stacked coefficients.
        let d1 = self.dim();
        let d2 = other.dim();
        if d1 == 0 || d2 == 0 {
            return Subspace::zero(self.ambient);
        }
        let mut m = QMatrix::zero(self.ambient, d1 + d2);
        for j in 0..d1 {
            for i in 0..self.ambient {
                *m.at_mut(i, j) = self.basis.at(j, i).clone();
            }
        }
        for j in 0..d2 {
            for i in 0..self.ambient {
                *m.at_mut(i, d1 + j) = -other.basis.at(j, i).clone();
            }
        }
        let k = m.kernel_basis();
        let mut vecs = Vec::new();
        for c in 0..k.cols() {
            let coeffs: Vec<Rat> = (0..d1).map(|j| k.at(j, c).clone()).collect();
            let v = self.basis.transpose().mul_vec(&coeffs);
            vecs.push(v);
        }
        Subspace::from_vectors(&vecs, self.ambient)
    }

    /// Direct-sum check: bases concatenated are independent and span the sum.
    pub fn sums_directly_with(&self, other: &Subspace) -> bool {
        let mut rows = self.basis.all_rows();
        rows.extend(other.basis.all_rows());
        if rows.is_empty() {
            return true;
        }
        QMatrix::from_rows(rows).rank() == self.dim() + other.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kernel_of_one_equation() {
        let a = QMatrix::from_int_rows(&[vec![1, 1]]);
        let k = a.kernel_basis();
        assert_eq!(k.cols(), 1);
        // canonical normalization: primitive integer, leading positive
        assert_eq!(k.at(0, 0), &rat_i(1));
        assert_eq!(k.at(1, 0), &rat_i(-1));
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let a = QMatrix::identity(3);
        assert_eq!(a.kernel_basis().cols(), 0);
    }

    #[test]
    fn kernel_multiplies_back_to_zero() {
        // Oracle for the DERIVED example: random 2x4 integer matrices,
        // A * k = 0 for every kernel column and rank + nullity = cols.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rows: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.gen_range(-4..=4)).collect())
                .collect();
            let a = QMatrix::from_int_rows(&rows);
            let k = a.kernel_basis();
            assert_eq!(a.rank() + k.cols(), a.cols());
            for c in 0..k.cols() {
                let col: Vec<Rat> = (0..k.rows()).map(|i| k.at(i, c).clone()).collect();
                for v in a.mul_vec(&col) {
                    assert!(v.is_zero());
                }
            }
        }
    }

    #[test]
    fn canonical_basis_examples() {
        let b = canonical_subspace_basis(
            &[vec![rat_i(2), rat_i(0)], vec![rat_i(0), rat_i(3)]],
            2,
        );
        assert_eq!(b, QMatrix::from_int_rows(&[vec![1, 0], vec![0, 1]]));

        let b = canonical_subspace_basis(
            &[vec![rat_i(1), rat_i(1)], vec![rat_i(2), rat_i(2)]],
            2,
        );
        assert_eq!(b, QMatrix::from_int_rows(&[vec![1, 1]]));

        let b = canonical_subspace_basis(
            &[
                vec![rat_i(1), rat_i(2), rat_i(3)],
                vec![rat_i(0), rat_i(1), rat_i(1)],
            ],
            3,
        );
        assert_eq!(
            b,
            QMatrix::from_int_rows(&[vec![1, 0, 1], vec![0, 1, 1]])
        );
    }

    #[test]
    fn canonical_basis_idempotent_and_permutation_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let vecs: Vec<Vec<Rat>> = (0..3)
                .map(|_| (0..4).map(|_| rat(rng.gen_range(-5..=5), rng.gen_range(1..=3))).collect())
                .collect();
            let b = canonical_subspace_basis(&vecs, 4);
            let again = canonical_subspace_basis(&b.all_rows(), 4);
            assert_eq!(b, again);
            let mut perm = vecs.clone();
            perm.reverse();
            assert_eq!(b, canonical_subspace_basis(&perm, 4));
        }
    }

    #[test]
    fn solve_examples() {
        let a = QMatrix::identity(3);
        let b = vec![rat_i(1), rat_i(-2), rat(1, 2)];
        assert_eq!(a.solve(&b), Some(b.clone()));

        let a = QMatrix::from_int_rows(&[vec![1, 1]]);
        assert_eq!(a.solve(&[rat_i(1)]), Some(vec![rat_i(1), rat_i(0)]));

        let a = QMatrix::from_int_rows(&[vec![1], vec![1]]);
        assert_eq!(a.solve(&[rat_i(0), rat_i(1)]), None);
    }

    #[test]
    fn rational_roundtrip_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = rat(rng.gen_range(1..=40), rng.gen_range(1..=40));
            assert_eq!(a.clone() * (Rat::one() / a), Rat::one());
        }
    }

    #[test]
    fn inverse_and_det() {
        let m = QMatrix::from_int_rows(&[vec![2, 1], vec![1, 1]]);
        assert_eq!(m.det(), rat_i(1));
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), QMatrix::identity(2));
    }

    #[test]
    fn subspace_intersection() {
        // span{(1,0,0),(0,1,0)} ∩ span{(0,1,0),(0,0,1)} = span{(0,1,0)}
        let a = Subspace::from_vectors(&[vec![rat_i(1), rat_i(0), rat_i(0)], vec![rat_i(0), rat_i(1), rat_i(0)]], 3);
        let b = Subspace::from_vectors(&[vec![rat_i(0), rat_i(1), rat_i(0)], vec![rat_i(0), rat_i(0), rat_i(1)]], 3);
        let c = a.intersect(&b);
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&[rat_i(0), rat_i(1), rat_i(0)]));
    }
}
