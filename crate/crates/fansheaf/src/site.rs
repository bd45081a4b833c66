//! A quasifan with a completion, plus the precomputed wedge data that makes
//! hom composition and stalk maps cheap.
//!
//! hom(J_tau, J_sigma) = Λ(Φ^tau_sigma)* for tau ⪯ sigma, and composition is
//! the inverse transpose of the wedge isomorphism
//! Λ(Φ^mid_hi) ⊗ Λ(Φ^lo_mid) → Λ(Φ^lo_hi). The wedge matrix and its inverse
//! are computed once per chain at construction time; everything downstream
//! is matrix x vector work.

use crate::exterior::{binom, monomials, wedge_of_vectors, ExtVec, Mask};
use crate::fan::{Completion, ConeId, FaceLattice, FanError, QuasiFan};
use crate::qlinalg::{QMatrix, Rat, Subspace};
use num::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Wedge data for one chain lo ⪯ mid ⪯ hi.
#[derive(Clone, Debug)]
pub struct ChainCache {
    pub d_up: usize,
    pub d_low: usize,
    pub d_tot: usize,
    /// Columns indexed by (monomial of up, monomial of low) pairs, rows by
    /// monomials of total; entry = coefficient of the row monomial in the
    /// wedge up ∧ low.
    pub w: QMatrix,
    pub winv: QMatrix,
}

/// Lattice + completion + caches, shared by every complex over any
/// sub-quasifan of the lattice.
#[derive(Debug)]
pub struct FanCore {
    pub lattice: Arc<FaceLattice>,
    pub phi: Completion,
    rel: BTreeMap<(ConeId, ConeId), Subspace>,
    chains: BTreeMap<(ConeId, ConeId, ConeId), ChainCache>,
    mon_index: Vec<BTreeMap<Mask, usize>>,
}

impl FanCore {
    pub fn new(lattice: Arc<FaceLattice>, phi: Completion) -> Result<Arc<Self>, FanError> {
        phi.validate(&lattice)?;
        let n = lattice.len();
        let mut rel = BTreeMap::new();
        for t in 0..n {
            for s in 0..n {
                if lattice.le(t, s) {
                    let sub = phi.rel(&lattice, t, s);
                    let expect = lattice.dim(s) - lattice.dim(t);
                    assert_eq!(sub.dim(), expect, "Phi^tau_sigma has wrong dimension");
                    rel.insert((t, s), sub);
                }
            }
        }
        let max_dim = lattice.cones.iter().map(|c| c.dim).max().unwrap_or(0);
        let mon_index: Vec<BTreeMap<Mask, usize>> = (0..=max_dim)
            .map(|d| monomials(d).into_iter().enumerate().map(|(i, m)| (m, i)).collect())
            .collect();

        let mut chains = BTreeMap::new();
        for lo in 0..n {
            for mid in 0..n {
                if !lattice.le(lo, mid) {
                    continue;
                }
                for hi in 0..n {
                    if !lattice.le(mid, hi) {
                        continue;
                    }
                    let up = &rel[&(mid, hi)];
                    let low = &rel[&(lo, mid)];
                    let tot = &rel[&(lo, hi)];
                    let cache = build_chain(up, low, tot);
                    chains.insert((lo, mid, hi), cache);
                }
            }
        }
        Ok(Arc::new(FanCore {
            lattice,
            phi,
            rel,
            chains,
            mon_index,
        }))
    }

    pub fn ambient_dim(&self) -> usize {
        self.lattice.ambient_dim
    }

    /// Φ^tau_sigma.
    pub fn rel(&self, tau: ConeId, sigma: ConeId) -> &Subspace {
        &self.rel[&(tau, sigma)]
    }

    pub fn rel_dim(&self, tau: ConeId, sigma: ConeId) -> usize {
        self.lattice.dim(sigma) - self.lattice.dim(tau)
    }

    pub fn chain(&self, lo: ConeId, mid: ConeId, hi: ConeId) -> &ChainCache {
        &self.chains[&(lo, mid, hi)]
    }

    pub fn mon_pos(&self, d: usize, m: Mask) -> usize {
        self.mon_index[d][&m]
    }

    /// Graded dims of hom(J_tau, J_sigma): C(D, p) in degree −p.
    pub fn hom_space_dims(&self, tau: ConeId, sigma: ConeId) -> BTreeMap<i64, usize> {
        let mut out = BTreeMap::new();
        if !self.lattice.le(tau, sigma) {
            return out;
        }
        let d = self.rel_dim(tau, sigma);
        for p in 0..=d {
            out.insert(-(p as i64), binom(d, p));
        }
        out
    }

    /// Composition hom(J_mid, J_hi) ⊗ hom(J_lo, J_mid) → hom(J_lo, J_hi):
    /// the inverse transpose of the wedge isomorphism.
    pub fn compose_hom(
        &self,
        lo: ConeId,
        mid: ConeId,
        hi: ConeId,
        f: &ExtVec,
        g: &ExtVec,
    ) -> ExtVec {
        let c = self.chain(lo, mid, hi);
        if f.is_zero() || g.is_zero() {
            return ExtVec::zero();
        }
        let cols = 1usize << (c.d_up + c.d_low);
        let mut t = vec![Rat::zero(); cols];
        for (mu, cu) in &f.coeffs {
            let iu = self.mon_pos(c.d_up, *mu);
            for (ml, cl) in &g.coeffs {
                let il = self.mon_pos(c.d_low, *ml);
                t[iu * (1 << c.d_low) + il] = cu * cl;
            }
        }
        // result_z = sum_c winv[c][z] * t[c]
        let rows = 1usize << c.d_tot;
        let mons_tot = monomials(c.d_tot);
        let mut out = ExtVec::zero();
        for z in 0..rows {
            let mut s = Rat::zero();
            for (ci, tv) in t.iter().enumerate() {
                if !tv.is_zero() {
                    let w = c.winv.at(ci, z);
                    if !w.is_zero() {
                        s += w * tv;
                    }
                }
            }
            if !s.is_zero() {
                out.add_term(mons_tot[z], s);
            }
        }
        out
    }

    /// Action of an entry E ∈ hom(J_lo, J_mid) on stabilized stalks at hi:
    /// the map Λ(Φ^lo_hi) → Λ(Φ^mid_hi), x ↦ Σ ⟨E, low-part⟩ · up-part.
    pub fn stalk_apply(
        &self,
        lo: ConeId,
        mid: ConeId,
        hi: ConeId,
        entry: &ExtVec,
        x_monomial: Mask,
    ) -> ExtVec {
        let c = self.chain(lo, mid, hi);
        let z = self.mon_pos(c.d_tot, x_monomial);
        let mons_up = monomials(c.d_up);
        let mons_low = monomials(c.d_low);
        let mut out = ExtVec::zero();
        for (iu, mu) in mons_up.iter().enumerate() {
            let mut s = Rat::zero();
            for (il, ml) in mons_low.iter().enumerate() {
                if let Some(ec) = entry.coeffs.get(ml) {
                    let y = c.winv.at(iu * (1 << c.d_low) + il, z);
                    if !y.is_zero() {
                        s += y * ec;
                    }
                }
            }
            if !s.is_zero() {
                out.add_term(*mu, s);
            }
        }
        out
    }
}

fn build_chain(up: &Subspace, low: &Subspace, tot: &Subspace) -> ChainCache {
    let d_up = up.dim();
    let d_low = low.dim();
    let d_tot = tot.dim();
    assert_eq!(d_up + d_low, d_tot);
    let up_coords: Vec<Vec<Rat>> = (0..d_up)
        .map(|i| tot.coords_of(up.basis.row(i)).expect("up inside total"))
        .collect();
    let low_coords: Vec<Vec<Rat>> = (0..d_low)
        .map(|i| tot.coords_of(low.basis.row(i)).expect("low inside total"))
        .collect();
    let mons_up = monomials(d_up);
    let mons_low = monomials(d_low);
    let rows = 1usize << d_tot;
    let cols = rows;
    let mut w = QMatrix::zero(rows, cols);
    let mon_pos: BTreeMap<Mask, usize> =
        monomials(d_tot).into_iter().enumerate().map(|(i, m)| (m, i)).collect();
    for (iu, mu) in mons_up.iter().enumerate() {
        let uvecs = mask_vec_list(*mu, &up_coords);
        for (il, ml) in mons_low.iter().enumerate() {
            let mut vecs = uvecs.clone();
            vecs.extend(mask_vec_list(*ml, &low_coords));
            let elt = wedge_of_vectors(&vecs);
            let col = iu * (1 << d_low) + il;
            for (m, c) in &elt.coeffs {
                *w.at_mut(mon_pos[m], col) = c.clone();
            }
        }
    }
    let winv = w.inverse().expect("wedge map is an isomorphism");
    ChainCache {
        d_up,
        d_low,
        d_tot,
        w,
        winv,
    }
}

fn mask_vec_list(m: Mask, table: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let mut out = Vec::new();
    let mut mm = m;
    while mm != 0 {
        let i = mm.trailing_zeros() as usize;
        mm &= mm - 1;
        out.push(table[i].clone());
    }
    out
}

/// A quasifan over a shared core: the base of one triangulated category.
#[derive(Clone, Debug)]
pub struct Site {
    pub core: Arc<FanCore>,
    pub members: Arc<Vec<ConeId>>,
}

impl Site {
    pub fn full(core: Arc<FanCore>) -> Self {
        let members = (0..core.lattice.len()).collect();
        Site {
            core,
            members: Arc::new(members),
        }
    }

    pub fn sub(&self, members: Vec<ConeId>) -> Result<Site, FanError> {
        let q = QuasiFan::new(self.core.lattice.clone(), members)?;
        if !q.members.iter().all(|m| self.contains(*m)) {
            return Err(FanError::NotASubset);
        }
        Ok(Site {
            core: self.core.clone(),
            members: Arc::new(q.members),
        })
    }

    pub fn quasifan(&self) -> QuasiFan {
        QuasiFan {
            lattice: self.core.lattice.clone(),
            members: self.members.as_ref().clone(),
        }
    }

    pub fn contains(&self, c: ConeId) -> bool {
        self.members.binary_search(&c).is_ok()
    }

    pub fn same_as(&self, other: &Site) -> bool {
        Arc::ptr_eq(&self.core, &other.core) && self.members == other.members
    }

    pub fn same_core(&self, other: &Site) -> bool {
        Arc::ptr_eq(&self.core, &other.core)
    }

    pub fn lattice(&self) -> &FaceLattice {
        &self.core.lattice
    }

    /// Doubled codimension (2 * codim) of a cone, the quantity entering all
    /// perversity walls.
    pub fn codim2(&self, c: ConeId) -> i64 {
        2 * (self.core.lattice.ambient_dim as i64 - self.core.lattice.dim(c) as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::monomials_of_degree;
    use crate::fan::Completion;
    use crate::qlinalg::rat_i;
    use rand::{Rng, SeedableRng};

    fn core_of(generators: &[Vec<i64>], n: usize) -> Arc<FanCore> {
        let l = Arc::new(FaceLattice::from_cone(generators, n).unwrap());
        let phi = Completion::orthogonal(&l);
        FanCore::new(l, phi).unwrap()
    }

    #[test]
    fn hom_dims_ray_fan() {
        let core = core_of(&[vec![1]], 1);
        let o = core.lattice.zero_cone();
        let s = core.lattice.top_cones()[0];
        let d = core.hom_space_dims(o, s);
        assert_eq!(d.get(&0), Some(&1));
        assert_eq!(d.get(&-1), Some(&1));
        assert!(core.hom_space_dims(s, o).is_empty());
    }

    #[test]
    fn hom_dims_square_cone_total() {
        let core = core_of(
            &[vec![1, 1, 1], vec![1, -1, 1], vec![-1, 1, 1], vec![-1, -1, 1]],
            3,
        );
        let o = core.lattice.zero_cone();
        let top = core.lattice.top_cones()[0];
        let d = core.hom_space_dims(o, top);
        // dims (1,3,3,1) in degrees (0,-1,-2,-3)
        assert_eq!(d.get(&0), Some(&1));
        assert_eq!(d.get(&-1), Some(&3));
        assert_eq!(d.get(&-2), Some(&3));
        assert_eq!(d.get(&-3), Some(&1));
        let total: usize = d.values().sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn compose_scalars_and_units() {
        let core = core_of(&[vec![1, 0], vec![0, 1]], 2);
        let o = core.lattice.zero_cone();
        let top = core.lattice.top_cones()[0];
        let one = ExtVec::scalar(rat_i(1));
        let two = ExtVec::scalar(rat_i(2));
        let r = core.compose_hom(o, o, top, &two, &one);
        assert_eq!(r, ExtVec::scalar(rat_i(2)));
        // identity on either side of a general element
        let f = ExtVec::monomial(0b1, rat_i(5));
        let viaid = core.compose_hom(o, o, top, &f, &one);
        assert_eq!(viaid, f);
    }

    #[test]
    fn compose_associative_randomized() {
        // chains o ≺ ray ≺ facet ≺ top of the square cone
        let core = core_of(
            &[vec![1, 1, 1], vec![1, -1, 1], vec![-1, 1, 1], vec![-1, -1, 1]],
            3,
        );
        let l = &core.lattice;
        let o = l.zero_cone();
        let top = l.top_cones()[0];
        let ray = (0..l.len()).find(|&i| l.dim(i) == 1).unwrap();
        let facet = (0..l.len()).find(|&i| l.dim(i) == 2 && l.le(ray, i)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let rand_elt = |d: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng| {
                let mut e = ExtVec::zero();
                for m in monomials_of_degree(d, k) {
                    e.add_term(m, rat_i(rng.gen_range(-3..=3)));
                }
                e
            };
            let f = rand_elt(1, rng.gen_range(0..=1), &mut rng); // hom(facet, top)
            let g = rand_elt(1, rng.gen_range(0..=1), &mut rng); // hom(ray, facet)
            let h = rand_elt(1, rng.gen_range(0..=1), &mut rng); // hom(o, ray)
            let fg = core.compose_hom(ray, facet, top, &f, &g);
            let gh = core.compose_hom(o, ray, facet, &g, &h);
            let left = core.compose_hom(o, ray, top, &fg, &h);
            let right = core.compose_hom(o, facet, top, &f, &gh);
            assert_eq!(left, right);
        }
    }

    #[test]
    fn compose_is_dual_to_wedge() {
        // <compose(f,g), wedge(x,y)> = <f,x> <g,y> on homogeneous elements
        let core = core_of(
            &[vec![1, 1, 1], vec![1, -1, 1], vec![-1, 1, 1], vec![-1, -1, 1]],
            3,
        );
        let l = &core.lattice;
        let o = l.zero_cone();
        let top = l.top_cones()[0];
        let ray = (0..l.len()).find(|&i| l.dim(i) == 1).unwrap();
        let cache = core.chain(o, ray, top);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let mut f = ExtVec::zero(); // dual over up (dim 2)
            for m in monomials(cache.d_up) {
                f.add_term(m, rat_i(rng.gen_range(-2..=2)));
            }
            let mut g = ExtVec::zero(); // dual over low (dim 1)
            for m in monomials(cache.d_low) {
                g.add_term(m, rat_i(rng.gen_range(-2..=2)));
            }
            let comp = core.compose_hom(o, ray, top, &f, &g);
            for mu in monomials(cache.d_up) {
                for ml in monomials(cache.d_low) {
                    // wedge(x,y) in total coordinates is the w-column
                    let col = core.mon_pos(cache.d_up, mu) * (1 << cache.d_low)
                        + core.mon_pos(cache.d_low, ml);
                    let mut wxy = ExtVec::zero();
                    for (z, m) in monomials(cache.d_tot).iter().enumerate() {
                        let c = cache.w.at(z, col).clone();
                        if !c.is_zero() {
                            wxy.add_term(*m, c);
                        }
                    }
                    let lhs = comp.pair(&wxy);
                    let rhs = f.pair(&ExtVec::monomial(mu, rat_i(1)))
                        * g.pair(&ExtVec::monomial(ml, rat_i(1)));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
