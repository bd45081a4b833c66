//! The Koszul duality functor between the face lattices of a cone and its
//! dual, and the verification suite for the exchange of simples and
//! injectives, Koszulity of the Ext algebra, and the End/Ext ring identity.
//!
//! The functor acts on the injective-summand presentation directly:
//! (tau,(u,v)) goes to (tau_perp, (−u−n, v−2·dim tau+n)), and an entry in
//! Λ^p(Φ^tau_rho)* is transported through the perfect pairing with
//! (Φ∨)^{rho_perp}_{tau_perp} followed by volume-form duality. Volumes are
//! chosen coherently (Ω_tau ∧ vol = Ω_rho), which together with a
//! (−1)^{p·dim} twist makes the transport strictly anti-multiplicative, so
//! d² = 0 survives transport on the nose.

use crate::dcat::{
    hom_spaces, is_isomorphic, BigradedDims, ChainMap, DcatError, InjComplex, Summand,
};
use crate::exterior::{monomials, monomials_of_degree, wedge_masks, ExtVec, Mask};
use crate::fan::{dual_cone, ConeId, FanError};
use crate::perverse::{costandard, injective_hull, simple, PerverseError, TruncationVariant};
use crate::qlinalg::{dot, QMatrix, Rat};
use crate::site::{FanCore, Site};
use num::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KoszulError {
    #[error("pairing between Phi^tau_rho and its dual partner is degenerate")]
    PairingDegenerate,
    #[error("kappa expects a complex over the full face lattice")]
    NotFullSite,
    #[error(transparent)]
    Fan(#[from] FanError),
    #[error(transparent)]
    Dcat(#[from] DcatError),
    #[error(transparent)]
    Perverse(#[from] PerverseError),
}

/// Transport data for one direction of the duality.
#[derive(Debug)]
struct Transport {
    /// (tau, rho) -> matrix sending the dual monomial basis of
    /// Λ(Φ^tau_rho)* to the dual monomial basis of Λ(W∨)*.
    maps: BTreeMap<(ConeId, ConeId), QMatrix>,
}

/// Both sites of a dual pair of cones, the perp bijection, and the entry
/// transports in both directions.
#[derive(Debug)]
pub struct DualityContext {
    pub primal: Site,
    pub dual: Site,
    pub perp: Vec<ConeId>,
    pub perp_inv: Vec<ConeId>,
    forward: Transport,
    backward: Transport,
    /// Recorded volume units per (tau, rho) pair of the primal side.
    pub volume_units: BTreeMap<(ConeId, ConeId), Rat>,
}

impl DualityContext {
    pub fn new(primal: Site) -> Result<Self, KoszulError> {
        let lat = primal.lattice();
        let (dual_lat, perp) = dual_cone(lat)?;
        let dual_lat = Arc::new(dual_lat);
        let phi_dual = primal.core.phi.dual(lat, &dual_lat, &perp)?;
        let dual_core = FanCore::new(dual_lat.clone(), phi_dual)?;
        let dual = Site::full(dual_core);
        let mut perp_inv = vec![0usize; perp.len()];
        for (t, &p) in perp.iter().enumerate() {
            perp_inv[p] = t;
        }
        let (forward, vols) = build_transport(&primal, &dual, &perp)?;
        let (backward, _) = build_transport(&dual, &primal, &perp_inv)?;
        Ok(DualityContext {
            primal,
            dual,
            perp,
            perp_inv,
            forward,
            backward,
            volume_units: vols,
        })
    }

    /// κ: contravariant, primal to dual.
    pub fn kappa(&self, s: &InjComplex) -> Result<InjComplex, KoszulError> {
        kappa_impl(s, &self.primal, &self.dual, &self.perp, &self.forward)
    }

    /// κ from the dual side back; composed with kappa it is isomorphic to
    /// the identity (the ω normalization is a global unit).
    pub fn kappa_inverse(&self, t: &InjComplex) -> Result<InjComplex, KoszulError> {
        kappa_impl(t, &self.dual, &self.primal, &self.perp_inv, &self.backward)
    }

    /// κ on morphisms: a chain map S → T goes to κ(T) → κ(S).
    pub fn kappa_map(&self, f: &ChainMap) -> Result<ChainMap, KoszulError> {
        let ks = self.kappa(&f.source)?;
        let kt = self.kappa(&f.target)?;
        let src_pos = kappa_positions(&f.source, &self.perp, &ks);
        let tgt_pos = kappa_positions(&f.target, &self.perp, &kt);
        let mut comps: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
        for (&(s, t), e) in &f.comps {
            let tau = f.source.summands[s].cone;
            let rho = f.target.summands[t].cone;
            let te = apply_transport(&self.forward, tau, rho, e, &self.primal);
            if !te.is_zero() {
                comps.insert((tgt_pos[t], src_pos[s]), te);
            }
        }
        let out = ChainMap {
            source: kt,
            target: ks,
            comps,
        };
        out.validate()?;
        Ok(out)
    }
}

fn kappa_summand(s: &Summand, n: i64, d_tau: i64, perp: &[ConeId]) -> Summand {
    Summand {
        u: -s.u - n,
        cone: perp[s.cone],
        v: s.v - 2 * d_tau + n,
    }
}

fn kappa_positions(s: &InjComplex, perp: &[ConeId], out: &InjComplex) -> Vec<usize> {
    let n = s.site.core.ambient_dim() as i64;
    let lat = s.site.lattice();
    let mut used = vec![false; out.summands.len()];
    s.summands
        .iter()
        .map(|sm| {
            let want = kappa_summand(sm, n, lat.dim(sm.cone) as i64, perp);
            let pos = out
                .summands
                .iter()
                .enumerate()
                .position(|(i, t)| !used[i] && *t == want)
                .expect("kappa summand present");
            used[pos] = true;
            pos
        })
        .collect()
}

fn kappa_impl(
    s: &InjComplex,
    from: &Site,
    to: &Site,
    perp: &[ConeId],
    transport: &Transport,
) -> Result<InjComplex, KoszulError> {
    if !s.site.same_as(from) {
        return Err(KoszulError::NotFullSite);
    }
    let n = from.core.ambient_dim() as i64;
    let lat = from.lattice();
    let summands: Vec<Summand> = s
        .summands
        .iter()
        .map(|sm| kappa_summand(sm, n, lat.dim(sm.cone) as i64, perp))
        .collect();
    let mut entries: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
    for (&(f, t), e) in &s.entries {
        let tau = s.summands[f].cone;
        let rho = s.summands[t].cone;
        let te = apply_transport(transport, tau, rho, e, from);
        if !te.is_zero() {
            entries.insert((t, f), te);
        }
    }
    Ok(InjComplex::new(to.clone(), summands, entries)?)
}

fn apply_transport(tr: &Transport, tau: ConeId, rho: ConeId, e: &ExtVec, from: &Site) -> ExtVec {
    let m = &tr.maps[&(tau, rho)];
    let d = from.core.rel_dim(tau, rho);
    let dense = e.to_dense(d);
    let out = m.mul_vec(&dense);
    ExtVec::from_dense(d, &out)
}

/// Pairing, volume and transport matrices for every pair tau ⪯ rho of the
/// `from` side.
fn build_transport(
    from: &Site,
    to: &Site,
    perp: &[ConeId],
) -> Result<(Transport, BTreeMap<(ConeId, ConeId), Rat>), KoszulError> {
    let lat = from.lattice();
    let mut maps = BTreeMap::new();
    let mut vols = BTreeMap::new();
    for tau in 0..lat.len() {
        for rho in 0..lat.len() {
            if !lat.le(tau, rho) {
                continue;
            }
            let w = from.core.rel(tau, rho);
            let wv = to.core.rel(perp[rho], perp[tau]);
            let d = w.dim();
            assert_eq!(wv.dim(), d);
            // pairing matrix P[a][b] = <w_a, u_b>
            let mut p = QMatrix::zero(d, d);
            for a in 0..d {
                for b in 0..d {
                    *p.at_mut(a, b) = dot(w.basis.row(a), wv.basis.row(b));
                }
            }
            if d > 0 && p.inverse().is_none() {
                return Err(KoszulError::PairingDegenerate);
            }
            // volume unit mu: on the `to` side the flag is
            // V_{perp(rho)} ⊕ W∨ = V_{perp(tau)}; mu is its determinant in
            // the canonical bases, and vol = (1/mu)·(u_1 ∧ ... ∧ u_D)
            // satisfies Ω_{perp(rho)} ∧ vol = Ω_{perp(tau)}.
            let to_lat = to.lattice();
            let small = &to_lat.cones[perp[rho]].span;
            let big = &to_lat.cones[perp[tau]].span;
            let dim_small = small.dim();
            let dim_big = big.dim();
            assert_eq!(dim_small + d, dim_big);
            let mut m = QMatrix::zero(dim_big, dim_big);
            for i in 0..dim_small {
                let coords = big.coords_of(small.basis.row(i)).expect("flag");
                for j in 0..dim_big {
                    *m.at_mut(i, j) = coords[j].clone();
                }
            }
            for i in 0..d {
                let coords = big.coords_of(wv.basis.row(i)).expect("flag");
                for j in 0..dim_big {
                    *m.at_mut(dim_small + i, j) = coords[j].clone();
                }
            }
            let mu = m.det();
            assert!(!mu.is_zero(), "volume flag degenerate");
            vols.insert((tau, rho), mu.clone());
            // transport matrix over the canonical monomial enumeration:
            // f = m_S* (degree p) maps to
            //   (−1)^{p·dim(smaller dual cone)} · mu · Σ_T (Gram_p^{-1})_{TS}
            //   · sign(T, full∖T) · m_{full∖T}*
            let size = 1usize << d;
            let mons = monomials(d);
            let pos: BTreeMap<Mask, usize> =
                mons.iter().enumerate().map(|(i, mask)| (*mask, i)).collect();
            let mut t = QMatrix::zero(size, size);
            let full: Mask = if d == 0 { 0 } else { (1u32 << d) - 1 };
            for deg in 0..=d {
                let degs = monomials_of_degree(d, deg);
                let k = degs.len();
                let mut gram = QMatrix::zero(k, k);
                for (si, s_mask) in degs.iter().enumerate() {
                    for (ti, t_mask) in degs.iter().enumerate() {
                        *gram.at_mut(si, ti) = minor_det(&p, *s_mask, *t_mask);
                    }
                }
                let gram_inv = gram.inverse().ok_or(KoszulError::PairingDegenerate)?;
                // strict anti-multiplicativity: twist by the dimension of
                // the smaller cone of the pair, plus the pair constant
                // D(D-1)/2 from the order of the coherent volume telescope
                let exponent = deg * lat.dim(tau) + d * (d.saturating_sub(1)) / 2;
                let sign_tau = if exponent % 2 == 0 {
                    Rat::one()
                } else {
                    -Rat::one()
                };
                for (si, s_mask) in degs.iter().enumerate() {
                    for (ti, t_mask) in degs.iter().enumerate() {
                        let f_t = gram_inv.at(ti, si).clone();
                        if f_t.is_zero() {
                            continue;
                        }
                        let r_mask = full & !t_mask;
                        let (sgn, _) = wedge_masks(*t_mask, r_mask).expect("complement disjoint");
                        let mut val = f_t * &mu * &sign_tau;
                        if sgn < 0 {
                            val = -val;
                        }
                        *t.at_mut(pos[&r_mask], pos[s_mask]) += &val;
                    }
                }
            }
            maps.insert((tau, rho), t);
        }
    }
    Ok((Transport { maps }, vols))
}

/// det of the submatrix of `p` with rows from mask `s`, columns from `t`.
fn minor_det(p: &QMatrix, s: Mask, t: Mask) -> Rat {
    let rows: Vec<usize> = bits(s);
    let cols: Vec<usize> = bits(t);
    let k = rows.len();
    if k == 0 {
        return Rat::one();
    }
    let mut m = QMatrix::zero(k, k);
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            *m.at_mut(i, j) = p.at(r, c).clone();
        }
    }
    m.det()
}

fn bits(m: Mask) -> Vec<usize> {
    let mut out = Vec::new();
    let mut mm = m;
    while mm != 0 {
        out.push(mm.trailing_zeros() as usize);
        mm &= mm - 1;
    }
    out
}

// ---------------------------------------------------------------------------
// verification suite

#[derive(Debug, Clone)]
pub struct FaceDuality {
    pub tau: ConeId,
    pub tau_perp: ConeId,
    pub costandard_swap: bool,
    pub kappa_simple_is_injective: bool,
    pub kappa_injective_is_simple: bool,
    pub roundtrip: bool,
}

impl FaceDuality {
    pub fn pass(&self) -> bool {
        self.costandard_swap
            && self.kappa_simple_is_injective
            && self.kappa_injective_is_simple
            && self.roundtrip
    }
}

#[derive(Debug, Clone)]
pub struct DualityReport {
    pub faces: Vec<FaceDuality>,
    /// Full bigraded hom table of ⊕L against itself (doubled bidegrees).
    pub koszulity_table: BigradedDims,
    pub koszul_off_diagonal_zero: bool,
    /// Diagonal Ext dims vs End-ring graded dims per doubled degree.
    pub end_ring_dims: BTreeMap<i64, (usize, usize)>,
    pub end_ring_match: bool,
    pub all_pass: bool,
}

/// Run the full duality verification for one cone and completion.
pub fn verify_duality(ctx: &DualityContext) -> Result<DualityReport, KoszulError> {
    let primal = &ctx.primal;
    let dual = &ctx.dual;
    let nfaces = primal.lattice().len();
    let mut faces = Vec::new();
    let mut simples = Vec::new();
    let mut dual_injectives = Vec::new();
    for tau in 0..nfaces {
        let tp = ctx.perp[tau];
        let n_tau = costandard(primal, tau, 0);
        let kn = ctx.kappa(&n_tau)?;
        let costandard_swap = is_isomorphic(&kn, &costandard(dual, tp, 0))?.0;

        let (l_tau, _) = simple(primal, tau, TruncationVariant::Tau)?;
        let (i_perp, _) = injective_hull(dual, tp)?;
        let kappa_simple_is_injective = is_isomorphic(&ctx.kappa(&l_tau)?, &i_perp)?.0;

        let (i_tau, _) = injective_hull(primal, tau)?;
        let (l_perp, _) = simple(dual, tp, TruncationVariant::Tau)?;
        let kappa_injective_is_simple = is_isomorphic(&ctx.kappa(&i_tau)?, &l_perp)?.0;

        let roundtrip = is_isomorphic(&ctx.kappa_inverse(&ctx.kappa(&l_tau)?)?, &l_tau)?.0;

        faces.push(FaceDuality {
            tau,
            tau_perp: tp,
            costandard_swap,
            kappa_simple_is_injective,
            kappa_injective_is_simple,
            roundtrip,
        });
        simples.push(l_tau);
        dual_injectives.push(i_perp);
    }
    // Koszulity: Hom^a_b(⊕L, ⊕L) = 0 unless a = b
    let mut l_sum = InjComplex::zero(primal.clone());
    for l in &simples {
        l_sum = l_sum.direct_sum(l)?;
    }
    let koszulity_table = hom_spaces(&l_sum, &l_sum)?;
    let koszul_off_diagonal_zero = koszulity_table
        .iter()
        .all(|(&(k2, j2), &d)| d == 0 || k2 == j2);
    // End/Ext identity: dim Hom^a_a(⊕L,⊕L) = dim Hom^a_{−a}(⊕I∨,⊕I∨)
    let mut i_sum = InjComplex::zero(dual.clone());
    for i in &dual_injectives {
        i_sum = i_sum.direct_sum(i)?;
    }
    let end_table = hom_spaces(&i_sum, &i_sum)?;
    let mut end_ring_dims: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (&(k2, j2), &d) in &koszulity_table {
        if k2 == j2 && d > 0 {
            end_ring_dims.entry(k2).or_insert((0, 0)).0 += d;
        }
    }
    for (&(k2, j2), &d) in &end_table {
        if j2 == -k2 && d > 0 {
            end_ring_dims.entry(k2).or_insert((0, 0)).1 += d;
        }
    }
    let end_off_diag = end_table.iter().all(|(&(k2, j2), &d)| d == 0 || j2 == -k2);
    let end_ring_match = end_off_diag && end_ring_dims.values().all(|&(a, b)| a == b);
    let all_pass = faces.iter().all(FaceDuality::pass) && koszul_off_diagonal_zero && end_ring_match;
    Ok(DualityReport {
        faces,
        koszulity_table,
        koszul_off_diagonal_zero,
        end_ring_dims,
        end_ring_match,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcat::perversity_check;
    use crate::fan::{Completion, FaceLattice};

    fn ctx_of(generators: &[Vec<i64>], n: usize) -> DualityContext {
        let l = Arc::new(FaceLattice::from_cone(generators, n).unwrap());
        let phi = Completion::orthogonal(&l);
        let site = Site::full(FanCore::new(l, phi).unwrap());
        DualityContext::new(site).unwrap()
    }

    #[test]
    fn kappa_costandards_ray() {
        let ctx = ctx_of(&[vec![1]], 1);
        for tau in 0..ctx.primal.lattice().len() {
            let n = costandard(&ctx.primal, tau, 0);
            let kn = ctx.kappa(&n).unwrap();
            let expect = costandard(&ctx.dual, ctx.perp[tau], 0);
            assert_eq!(kn.summands, expect.summands);
        }
    }

    #[test]
    fn kappa_simple_of_top_ray() {
        // κ(L_sigma) is the costandard of the dual zero cone
        let ctx = ctx_of(&[vec![1]], 1);
        let s = ctx.primal.lattice().top_cones()[0];
        let (l, _) = simple(&ctx.primal, s, TruncationVariant::Tau).unwrap();
        let k = ctx.kappa(&l).unwrap();
        let o_dual = ctx.dual.lattice().zero_cone();
        assert_eq!(k.summands, vec![Summand { u: -1, cone: o_dual, v: -1 }]);
    }

    #[test]
    fn kappa_shift_laws_exact() {
        let ctx = ctx_of(&[vec![1, 0], vec![0, 1]], 2);
        let o = ctx.primal.lattice().zero_cone();
        let (l, _) = simple(&ctx.primal, o, TruncationVariant::Tau).unwrap();
        // κ(S[k]) = κ(S)[−k]
        let a = ctx.kappa(&l.shift_complex(2)).unwrap();
        let b = ctx.kappa(&l).unwrap().shift_complex(-2);
        assert_eq!(a.summands, b.summands);
        assert_eq!(a.entries, b.entries);
        // κ(S⟨k⟩) = κ(S)[−k]⟨k⟩
        let a = ctx.kappa(&l.twist(2)).unwrap();
        let b = ctx.kappa(&l).unwrap().shift_complex(-2).twist(2);
        assert_eq!(a.summands, b.summands);
        assert_eq!(a.entries, b.entries);
    }

    fn compose_chain_maps(g: &ChainMap, f: &ChainMap) -> Result<ChainMap, DcatError> {
        // g ∘ f for f: A -> B, g: B -> C
        let mut comps: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
        for (&(a, b), ef) in &f.comps {
            for (&(b2, c), eg) in &g.comps {
                if b2 != b {
                    continue;
                }
                let ta = f.source.summands[a].cone;
                let tb = f.target.summands[b].cone;
                let tc = g.target.summands[c].cone;
                let comp = f.source.site.core.compose_hom(ta, tb, tc, eg, ef);
                if !comp.is_zero() {
                    let slot = comps.entry((a, c)).or_insert_with(ExtVec::zero);
                    *slot = slot.add(&comp);
                }
            }
        }
        let out = ChainMap {
            source: f.source.clone(),
            target: g.target.clone(),
            comps,
        };
        out.validate()?;
        Ok(out)
    }

    #[test]
    fn kappa_functorial_on_costandard_homs() {
        use crate::dcat::HomComplex;
        let ctx = ctx_of(&[vec![1, 0], vec![0, 1]], 2);
        let lat = ctx.primal.lattice();
        let o = lat.zero_cone();
        let ray = (0..lat.len()).find(|&i| lat.dim(i) == 1).unwrap();
        let top = lat.top_cones()[0];
        let n_o = costandard(&ctx.primal, o, 0);
        let n_ray = costandard(&ctx.primal, ray, 0);
        let n_top = costandard(&ctx.primal, top, 0);
        let h1 = HomComplex::build(&n_o, &n_ray, None).unwrap();
        let h2 = HomComplex::build(&n_ray, &n_top, None).unwrap();
        let keys1: Vec<(i64, i64)> = h1.terms.keys().copied().collect();
        let keys2: Vec<(i64, i64)> = h2.terms.keys().copied().collect();
        for &(k1, j1) in &keys1 {
            for rep1 in h1.representatives(k1, j1) {
                let f = h1.rep_chain_map(k1, j1, &rep1);
                for &(k2, j2) in &keys2 {
                    for rep2 in h2.representatives(k2, j2) {
                        let g = h2.rep_chain_map(k2, j2, &rep2);
                        let gs = ChainMap {
                            source: g.source.shift2(-k1, -j1).unwrap(),
                            target: g.target.shift2(-k1, -j1).unwrap(),
                            comps: g.comps.clone(),
                        };
                        let comp = compose_chain_maps(&gs, &f).unwrap();
                        let ka = ctx.kappa_map(&comp).unwrap();
                        let kf = ctx.kappa_map(&f).unwrap();
                        let kg = ctx.kappa_map(&gs).unwrap();
                        let kb = compose_chain_maps(&kf, &kg).unwrap();
                        assert_eq!(ka.comps, kb.comps);
                    }
                }
            }
        }
    }

    #[test]
    fn kappa_preserves_perversity_of_simples() {
        let ctx = ctx_of(&[vec![1, 0], vec![0, 1]], 2);
        for tau in 0..ctx.primal.lattice().len() {
            let (l, _) = simple(&ctx.primal, tau, TruncationVariant::Tau).unwrap();
            let k = ctx.kappa(&l).unwrap();
            assert!(perversity_check(&k).unwrap().perverse());
            let n = costandard(&ctx.primal, tau, 0);
            assert!(perversity_check(&ctx.kappa(&n).unwrap()).unwrap().perverse());
        }
    }

    #[test]
    fn roundtrip_on_costandards() {
        for ctx in [
            ctx_of(&[vec![1]], 1),
            ctx_of(&[vec![1, 0], vec![0, 1]], 2),
            ctx_of(
                &[vec![1, 1, 1], vec![1, -1, 1], vec![-1, 1, 1], vec![-1, -1, 1]],
                3,
            ),
        ] {
            for tau in 0..ctx.primal.lattice().len() {
                let n = costandard(&ctx.primal, tau, 0);
                let back = ctx.kappa_inverse(&ctx.kappa(&n).unwrap()).unwrap();
                assert!(is_isomorphic(&back, &n).unwrap().0);
            }
        }
    }

    #[test]
    fn duality_report_ray() {
        let ctx = ctx_of(&[vec![1]], 1);
        let report = verify_duality(&ctx).unwrap();
        assert!(report.all_pass, "{report:?}");
        // Hom^1_1(L_o, L_o) = 1: the (2,2) class
        let (l_o, _) = simple(
            &ctx.primal,
            ctx.primal.lattice().zero_cone(),
            TruncationVariant::Tau,
        )
        .unwrap();
        let dims = hom_spaces(&l_o, &l_o).unwrap();
        assert_eq!(dims.get(&(2, 2)), Some(&1));
    }

    #[test]
    fn duality_report_quadrant() {
        let ctx = ctx_of(&[vec![1, 0], vec![0, 1]], 2);
        let report = verify_duality(&ctx).unwrap();
        assert!(report.all_pass, "{report:?}");
    }
}
