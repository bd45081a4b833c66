//! Bounded complexes of injective stable sheaves: validation, shifts and
//! twists, mapping cones, pushforward/pullback functors, stalk and costalk
//! functors, hom complexes, minimal models, isomorphism testing, perversity,
//! and point truncation.
//!
//! Bidegrees live in the half-integer lattice Ξ and are stored doubled:
//! a summand (cone, (u, v)) is J_cone in complex degree u/2 with its free
//! generator in grading v/2; u ≡ v (mod 2). An entry from (tau,(u,v)) to
//! (rho,(u+2,v'))) is an element of Λ^{(v'-v)/2}(Φ^tau_rho)*.

use crate::exterior::{monomials, ExtVec, Mask};
use crate::fan::{ConeId, FanError};
use crate::qlinalg::{QMatrix, Rat};
use crate::site::Site;
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DcatError {
    #[error("summand {0} has a bidegree outside the half-integer lattice")]
    ParityViolation(usize),
    #[error("summand {0} uses a cone outside the quasifan")]
    ConeOutsideFan(usize),
    #[error("entry {from}->{to} has the wrong exterior degree")]
    BadEntryDegree { from: usize, to: usize },
    #[error("d^2 != 0 between summands {from} and {to}")]
    DSquaredNonzero { from: usize, to: usize },
    #[error("subset is not open")]
    NotOpen,
    #[error("subset is not closed")]
    NotClosed,
    #[error("faces of the cone are missing from the quasifan")]
    MissingFaces,
    #[error("complexes live over different sites")]
    SiteMismatch,
    #[error("fan error: {0}")]
    Fan(#[from] FanError),
}

/// Bidegree-indexed dimension table (doubled coordinates).
pub type BigradedDims = BTreeMap<(i64, i64), usize>;

pub fn dims_add(dims: &mut BigradedDims, key: (i64, i64), n: usize) {
    if n > 0 {
        *dims.entry(key).or_insert(0) += n;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Summand {
    pub u: i64,
    pub cone: ConeId,
    pub v: i64,
}

impl Summand {
    pub fn in_xi(&self) -> bool {
        (self.u - self.v).rem_euclid(2) == 0
    }
}

/// A bounded complex of injectives over a site.
#[derive(Clone, Debug)]
pub struct InjComplex {
    pub site: Site,
    pub summands: Vec<Summand>,
    pub entries: BTreeMap<(usize, usize), ExtVec>,
}

impl InjComplex {
    pub fn zero(site: Site) -> Self {
        InjComplex {
            site,
            summands: vec![],
            entries: BTreeMap::new(),
        }
    }

    pub fn single(site: Site, cone: ConeId, u: i64, v: i64) -> Self {
        InjComplex {
            site,
            summands: vec![Summand { u, cone, v }],
            entries: BTreeMap::new(),
        }
    }

    pub fn new(
        site: Site,
        summands: Vec<Summand>,
        entries: BTreeMap<(usize, usize), ExtVec>,
    ) -> Result<Self, DcatError> {
        let c = InjComplex {
            site,
            summands,
            entries,
        }
        .canonicalize();
        c.validate()?;
        Ok(c)
    }

    /// Sort summands by (u, cone, v) and remap entries; drop zero entries.
    pub fn canonicalize(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.summands.len()).collect();
        order.sort_by_key(|&i| self.summands[i]);
        let mut newpos = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            newpos[old] = new;
        }
        let summands: Vec<Summand> = order.iter().map(|&i| self.summands[i]).collect();
        let mut entries = BTreeMap::new();
        for ((f, t), e) in std::mem::take(&mut self.entries) {
            if !e.is_zero() {
                entries.insert((newpos[f], newpos[t]), e);
            }
        }
        InjComplex {
            site: self.site,
            summands,
            entries,
        }
    }

    pub fn validate(&self) -> Result<(), DcatError> {
        for (i, s) in self.summands.iter().enumerate() {
            if !s.in_xi() {
                return Err(DcatError::ParityViolation(i));
            }
            if !self.site.contains(s.cone) {
                return Err(DcatError::ConeOutsideFan(i));
            }
        }
        let lat = self.site.lattice();
        for (&(f, t), e) in &self.entries {
            if e.is_zero() {
                continue;
            }
            let sf = &self.summands[f];
            let st = &self.summands[t];
            let ok = st.u == sf.u + 2
                && lat.le(sf.cone, st.cone)
                && (st.v - sf.v) % 2 == 0
                && st.v >= sf.v
                && ((st.v - sf.v) / 2) as usize <= self.site.core.rel_dim(sf.cone, st.cone)
                && e.homogeneous_of(((st.v - sf.v) / 2) as usize);
            if !ok {
                return Err(DcatError::BadEntryDegree { from: f, to: t });
            }
        }
        // d^2 = 0: expand all length-2 compositions
        for (s, ss) in self.summands.iter().enumerate() {
            for (u, su) in self.summands.iter().enumerate() {
                if su.u != ss.u + 4 {
                    continue;
                }
                let mut acc = ExtVec::zero();
                for (t, st) in self.summands.iter().enumerate() {
                    if st.u != ss.u + 2 {
                        continue;
                    }
                    let (Some(e1), Some(e2)) =
                        (self.entries.get(&(s, t)), self.entries.get(&(t, u)))
                    else {
                        continue;
                    };
                    let comp = self
                        .site
                        .core
                        .compose_hom(ss.cone, st.cone, su.cone, e2, e1);
                    acc = acc.add(&comp);
                }
                if !acc.is_zero() {
                    return Err(DcatError::DSquaredNonzero { from: s, to: u });
                }
            }
        }
        Ok(())
    }

    /// Shift by doubled amounts: summand (u,v) moves to (u+du, v+dv).
    /// [1] is du = -2; {1} is dv = -2; entries are unchanged.
    pub fn shift2(&self, du: i64, dv: i64) -> Result<Self, DcatError> {
        if (du - dv).rem_euclid(2) != 0 {
            return Err(DcatError::ParityViolation(0));
        }
        let summands = self
            .summands
            .iter()
            .map(|s| Summand {
                u: s.u + du,
                cone: s.cone,
                v: s.v + dv,
            })
            .collect();
        Ok(InjComplex {
            site: self.site.clone(),
            summands,
            entries: self.entries.clone(),
        }
        .canonicalize())
    }

    /// [k] for integer k.
    pub fn shift_complex(&self, k: i64) -> Self {
        self.shift2(-2 * k, 0).expect("integer shift stays in Xi")
    }

    /// {k} for integer k.
    pub fn shift_grading(&self, k: i64) -> Self {
        self.shift2(0, -2 * k).expect("integer shift stays in Xi")
    }

    /// Twist ⟨k⟩ = [k/2]{−k/2}: (u,v) -> (u−k, v+k).
    pub fn twist(&self, k: i64) -> Self {
        self.shift2(-k, k).expect("twist stays in Xi")
    }

    pub fn direct_sum(&self, other: &InjComplex) -> Result<Self, DcatError> {
        if !self.site.same_as(&other.site) {
            return Err(DcatError::SiteMismatch);
        }
        let off = self.summands.len();
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().copied());
        let mut entries = self.entries.clone();
        for (&(f, t), e) in &other.entries {
            entries.insert((f + off, t + off), e.clone());
        }
        Ok(InjComplex {
            site: self.site.clone(),
            summands,
            entries,
        }
        .canonicalize())
    }

    pub fn summand_multiset(&self) -> BTreeMap<Summand, usize> {
        let mut m = BTreeMap::new();
        for s in &self.summands {
            *m.entry(*s).or_insert(0) += 1;
        }
        m
    }
}

/// A degree-(0,0) chain map between complexes over one site.
#[derive(Clone, Debug)]
pub struct ChainMap {
    pub source: InjComplex,
    pub target: InjComplex,
    pub comps: BTreeMap<(usize, usize), ExtVec>,
}

impl ChainMap {
    pub fn identity(c: &InjComplex) -> Self {
        let comps = (0..c.summands.len())
            .map(|i| ((i, i), ExtVec::scalar(Rat::one())))
            .collect();
        ChainMap {
            source: c.clone(),
            target: c.clone(),
            comps,
        }
    }

    pub fn zero(source: &InjComplex, target: &InjComplex) -> Self {
        ChainMap {
            source: source.clone(),
            target: target.clone(),
            comps: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DcatError> {
        if !self.source.site.same_as(&self.target.site) {
            return Err(DcatError::SiteMismatch);
        }
        let lat = self.source.site.lattice();
        for (&(f, t), e) in &self.comps {
            if e.is_zero() {
                continue;
            }
            let sf = &self.source.summands[f];
            let st = &self.target.summands[t];
            let ok = st.u == sf.u
                && lat.le(sf.cone, st.cone)
                && st.v >= sf.v
                && (st.v - sf.v) % 2 == 0
                && e.homogeneous_of(((st.v - sf.v) / 2) as usize);
            if !ok {
                return Err(DcatError::BadEntryDegree { from: f, to: t });
            }
        }
        // commutes with differentials
        for (s, ss) in self.source.summands.iter().enumerate() {
            for (t2, st2) in self.target.summands.iter().enumerate() {
                if st2.u != ss.u + 2 {
                    continue;
                }
                let mut acc = ExtVec::zero();
                for (t, st) in self.target.summands.iter().enumerate() {
                    if st.u != ss.u {
                        continue;
                    }
                    let (Some(phi), Some(d)) =
                        (self.comps.get(&(s, t)), self.target.entries.get(&(t, t2)))
                    else {
                        continue;
                    };
                    acc = acc.add(&self.source.site.core.compose_hom(
                        ss.cone, st.cone, st2.cone, d, phi,
                    ));
                }
                for (s2, ss2) in self.source.summands.iter().enumerate() {
                    if ss2.u != ss.u + 2 {
                        continue;
                    }
                    let (Some(d), Some(phi)) =
                        (self.source.entries.get(&(s, s2)), self.comps.get(&(s2, t2)))
                    else {
                        continue;
                    };
                    let c = self.source.site.core.compose_hom(
                        ss.cone, ss2.cone, st2.cone, phi, d,
                    );
                    acc = acc.add(&c.neg());
                }
                if !acc.is_zero() {
                    return Err(DcatError::DSquaredNonzero { from: s, to: t2 });
                }
            }
        }
        Ok(())
    }
}

/// Cone of a chain map: target ⊕ source[1] with the map as connecting block
/// and the source differential negated.
pub fn mapping_cone(f: &ChainMap) -> Result<InjComplex, DcatError> {
    f.validate()?;
    let x = &f.source;
    let y = &f.target;
    let off = y.summands.len();
    let mut summands = y.summands.clone();
    summands.extend(x.summands.iter().map(|s| Summand {
        u: s.u - 2,
        cone: s.cone,
        v: s.v,
    }));
    let mut entries = y.entries.clone();
    for (&(a, b), e) in &x.entries {
        entries.insert((off + a, off + b), e.neg());
    }
    for (&(a, t), e) in &f.comps {
        entries.insert((off + a, t), e.clone());
    }
    InjComplex::new(y.site.clone(), summands, entries)
}

// ---------------------------------------------------------------------------
// pushforward / pullback functors

/// j^* for an open subset: keep summands whose cone lies in the subset.
pub fn restrict_open(s: &InjComplex, subset: &[ConeId]) -> Result<InjComplex, DcatError> {
    if !s.site.quasifan().is_open(subset)? {
        return Err(DcatError::NotOpen);
    }
    keep_cones(s, subset, s.site.sub(subset.to_vec())?)
}

/// i^! for a closed subset: sections supported on the subset, which on
/// injectives is again "keep the summands in the subset".
pub fn corestrict_closed(s: &InjComplex, subset: &[ConeId]) -> Result<InjComplex, DcatError> {
    if !s.site.quasifan().is_closed(subset)? {
        return Err(DcatError::NotClosed);
    }
    keep_cones(s, subset, s.site.sub(subset.to_vec())?)
}

fn keep_cones(s: &InjComplex, subset: &[ConeId], site: Site) -> Result<InjComplex, DcatError> {
    let keep: Vec<usize> = (0..s.summands.len())
        .filter(|&i| subset.contains(&s.summands[i].cone))
        .collect();
    let pos: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let summands = keep.iter().map(|&i| s.summands[i]).collect();
    let mut entries = BTreeMap::new();
    for (&(f, t), e) in &s.entries {
        if let (Some(&f2), Some(&t2)) = (pos.get(&f), pos.get(&t)) {
            entries.insert((f2, t2), e.clone());
        }
    }
    InjComplex::new(site, summands, entries)
}

/// i_* from a closed subfan into a larger quasifan over the same core:
/// relabel the complex over the bigger site.
pub fn extend_closed(s: &InjComplex, bigger: &Site) -> Result<InjComplex, DcatError> {
    if !s.site.same_core(bigger) {
        return Err(DcatError::SiteMismatch);
    }
    if !bigger
        .quasifan()
        .is_closed(&s.site.members)
        .unwrap_or(false)
    {
        return Err(DcatError::NotClosed);
    }
    InjComplex::new(bigger.clone(), s.summands.clone(), s.entries.clone())
}

/// j_* from an open subfan into a larger quasifan: on complexes of
/// injectives the pushforward keeps each J_tau (tau stays in the open set),
/// so it is again a relabelling.
pub fn pushforward_open(s: &InjComplex, bigger: &Site) -> Result<InjComplex, DcatError> {
    if !s.site.same_core(bigger) {
        return Err(DcatError::SiteMismatch);
    }
    if !bigger.quasifan().is_open(&s.site.members).unwrap_or(false) {
        return Err(DcatError::NotOpen);
    }
    InjComplex::new(bigger.clone(), s.summands.clone(), s.entries.clone())
}

/// i_sigma^*: the stalk restriction to the one-cone fan {sigma}. Each
/// summand (tau,(u,v)) with tau ⪯ sigma contributes a J_sigma copy for every
/// monomial of Λ(Φ^tau_sigma); entries become the induced scalar maps.
///
/// Returns the restricted complex and, per original summand, the list of
/// (monomial, new summand index) labels, so callers can assemble
/// adjunction-unit maps.
pub fn stalk_restrict(
    s: &InjComplex,
    sigma: ConeId,
) -> Result<(InjComplex, Vec<Vec<(Mask, usize)>>), DcatError> {
    let lat = s.site.lattice();
    if !s.site.contains(sigma) {
        return Err(DcatError::ConeOutsideFan(sigma));
    }
    for c in 0..lat.len() {
        if lat.le(c, sigma) && !s.site.contains(c) {
            return Err(DcatError::MissingFaces);
        }
    }
    let site = s.site.sub(vec![sigma])?;
    let mut summands = Vec::new();
    let mut labels: Vec<Vec<(Mask, usize)>> = vec![vec![]; s.summands.len()];
    for (i, sm) in s.summands.iter().enumerate() {
        if !lat.le(sm.cone, sigma) {
            continue;
        }
        let d = s.site.core.rel_dim(sm.cone, sigma);
        for m in monomials(d) {
            let idx = summands.len();
            summands.push(Summand {
                u: sm.u,
                cone: sigma,
                v: sm.v + 2 * m.count_ones() as i64,
            });
            labels[i].push((m, idx));
        }
    }
    let mut entries: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
    for (&(f, t), e) in &s.entries {
        let cf = s.summands[f].cone;
        let ct = s.summands[t].cone;
        if !lat.le(cf, sigma) || !lat.le(ct, sigma) {
            continue;
        }
        for &(m, fi) in &labels[f] {
            let image = s.site.core.stalk_apply(cf, ct, sigma, e, m);
            for (m2, c) in &image.coeffs {
                let ti = labels[t]
                    .iter()
                    .find(|(mm, _)| mm == m2)
                    .map(|(_, idx)| *idx)
                    .expect("target monomial labelled");
                let slot = entries.entry((fi, ti)).or_insert_with(ExtVec::zero);
                *slot = slot.add(&ExtVec::scalar(c.clone()));
            }
        }
    }
    // do not canonicalize here: labels must stay aligned with indices
    let out = InjComplex {
        site,
        summands,
        entries,
    };
    out.validate()?;
    Ok((out, labels))
}

/// The adjunction unit S -> i_sigma_* i_sigma^* S as a chain map onto the
/// stalk restriction relabelled over the big site.
pub fn unit_to_stalk(s: &InjComplex, sigma: ConeId) -> Result<(InjComplex, ChainMap), DcatError> {
    let (restr, labels) = stalk_restrict(s, sigma)?;
    let pushed = InjComplex {
        site: s.site.clone(),
        summands: restr.summands.clone(),
        entries: restr.entries.clone(),
    };
    pushed.validate()?;
    let mut comps = BTreeMap::new();
    for (i, lab) in labels.iter().enumerate() {
        for &(m, idx) in lab {
            comps.insert((i, idx), ExtVec::monomial(m, Rat::one()));
        }
    }
    let f = ChainMap {
        source: s.clone(),
        target: pushed.clone(),
        comps,
    };
    f.validate()?;
    Ok((pushed, f))
}

// ---------------------------------------------------------------------------
// stalk / costalk functors

/// Γ_sigma of the stalk: bigraded cohomology dims of i_sigma^* S ⊗ R.
pub fn gamma_stalk(s: &InjComplex, sigma: ConeId) -> Result<BigradedDims, DcatError> {
    let (restr, _) = stalk_restrict(s, sigma)?;
    Ok(point_cohomology(&restr))
}

/// Γ_sigma of the costalk: cohomology of the sigma-summand subcomplex.
pub fn gamma_costalk(s: &InjComplex, sigma: ConeId) -> Result<BigradedDims, DcatError> {
    if !s.site.contains(sigma) {
        return Err(DcatError::ConeOutsideFan(sigma));
    }
    let keep: Vec<usize> = (0..s.summands.len())
        .filter(|&i| s.summands[i].cone == sigma)
        .collect();
    let pos: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let summands: Vec<Summand> = keep.iter().map(|&i| s.summands[i]).collect();
    let mut entries = BTreeMap::new();
    for (&(f, t), e) in &s.entries {
        if let (Some(&f2), Some(&t2)) = (pos.get(&f), pos.get(&t)) {
            entries.insert((f2, t2), e.clone());
        }
    }
    let sub = InjComplex {
        site: s.site.clone(),
        summands,
        entries,
    };
    Ok(point_cohomology(&sub))
}

/// Cohomology dims of a complex all of whose entries are scalars between
/// equal-grading summands (a complex over a point, graded by v).
fn point_cohomology(s: &InjComplex) -> BigradedDims {
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, sm) in s.summands.iter().enumerate() {
        classes.entry(sm.v).or_default().push(i);
    }
    let mut dims = BigradedDims::new();
    for (v, idxs) in classes {
        let mut levels: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for &i in &idxs {
            levels.entry(s.summands[i].u).or_default().push(i);
        }
        let keys: Vec<i64> = levels.keys().copied().collect();
        let mut ranks: BTreeMap<i64, usize> = BTreeMap::new();
        for &u in &keys {
            let from = &levels[&u];
            let Some(to) = levels.get(&(u + 2)) else {
                ranks.insert(u, 0);
                continue;
            };
            let mut m = QMatrix::zero(to.len(), from.len());
            for (col, &f) in from.iter().enumerate() {
                for (row, &t) in to.iter().enumerate() {
                    if let Some(e) = s.entries.get(&(f, t)) {
                        if let Some(c) = e.coeffs.get(&0) {
                            *m.at_mut(row, col) = c.clone();
                        }
                    }
                }
            }
            ranks.insert(u, m.rank());
        }
        for &u in &keys {
            let dim_here = levels[&u].len();
            let rank_out = ranks[&u];
            let rank_in = ranks.get(&(u - 2)).copied().unwrap_or(0);
            let h = dim_here - rank_out - rank_in;
            dims_add(&mut dims, (u, v), h);
        }
    }
    dims
}

// ---------------------------------------------------------------------------
// hom complexes

#[derive(Clone, Debug)]
pub struct HomTerm {
    pub s: usize,
    pub t: usize,
    pub m: Mask,
}

/// The bigraded hom complex between two complexes over one site, its
/// cohomology dims, and representative cocycles on demand.
pub struct HomComplex<'a> {
    pub source: &'a InjComplex,
    pub target: &'a InjComplex,
    /// terms grouped by doubled bidegree (k2, j2)
    pub terms: BTreeMap<(i64, i64), Vec<HomTerm>>,
}

/// Sign ε with ε(k2 + 2) = −ε(k2) on doubled complex degrees.
fn hom_sign(k2: i64) -> i64 {
    if k2.div_euclid(2).rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

impl<'a> HomComplex<'a> {
    pub fn build(
        source: &'a InjComplex,
        target: &'a InjComplex,
        basis_seed: Option<u64>,
    ) -> Result<Self, DcatError> {
        if !source.site.same_as(&target.site) {
            return Err(DcatError::SiteMismatch);
        }
        let lat = source.site.lattice();
        let mut terms: BTreeMap<(i64, i64), Vec<HomTerm>> = BTreeMap::new();
        for (si, ss) in source.summands.iter().enumerate() {
            for (ti, st) in target.summands.iter().enumerate() {
                if !lat.le(ss.cone, st.cone) {
                    continue;
                }
                let d = source.site.core.rel_dim(ss.cone, st.cone);
                for m in monomials(d) {
                    let k2 = st.u - ss.u;
                    let j2 = st.v - ss.v - 2 * m.count_ones() as i64;
                    terms
                        .entry((k2, j2))
                        .or_default()
                        .push(HomTerm { s: si, t: ti, m });
                }
            }
        }
        if let Some(seed) = basis_seed {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for v in terms.values_mut() {
                for i in (1..v.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    v.swap(i, j);
                }
            }
        }
        Ok(HomComplex {
            source,
            target,
            terms,
        })
    }

    /// Matrix of the hom differential from bidegree (k2, j2) to (k2+2, j2).
    fn differential(&self, k2: i64, j2: i64) -> QMatrix {
        let empty = vec![];
        let from = self.terms.get(&(k2, j2)).unwrap_or(&empty);
        let to = self.terms.get(&(k2 + 2, j2)).unwrap_or(&empty);
        let core = &self.source.site.core;
        let mut m = QMatrix::zero(to.len(), from.len());
        let eps = hom_sign(k2);
        for (col, term) in from.iter().enumerate() {
            let phi = ExtVec::monomial(term.m, Rat::one());
            let ss = &self.source.summands[term.s];
            let st = &self.target.summands[term.t];
            // d_T ∘ phi
            for (t2, st2) in self.target.summands.iter().enumerate() {
                if st2.u != st.u + 2 {
                    continue;
                }
                if let Some(d) = self.target.entries.get(&(term.t, t2)) {
                    let res = core.compose_hom(ss.cone, st.cone, st2.cone, d, &phi);
                    self.scatter(&mut m, to, term.s, t2, &res, col, 1);
                }
            }
            // − ε · phi ∘ d_S
            for (s0, ss0) in self.source.summands.iter().enumerate() {
                if ss.u != ss0.u + 2 {
                    continue;
                }
                if let Some(d) = self.source.entries.get(&(s0, term.s)) {
                    let res = core.compose_hom(ss0.cone, ss.cone, st.cone, &phi, d);
                    self.scatter(&mut m, to, s0, term.t, &res, col, -eps);
                }
            }
        }
        m
    }

    fn scatter(
        &self,
        m: &mut QMatrix,
        to: &[HomTerm],
        s: usize,
        t: usize,
        val: &ExtVec,
        col: usize,
        sign: i64,
    ) {
        for (mask, c) in &val.coeffs {
            let row = to
                .iter()
                .position(|h| h.s == s && h.t == t && h.m == *mask)
                .expect("hom term present");
            let add = if sign >= 0 { c.clone() } else { -c.clone() };
            *m.at_mut(row, col) += add;
        }
    }

    /// Cohomology dims per doubled bidegree.
    pub fn dims(&self) -> BigradedDims {
        let mut out = BigradedDims::new();
        let keys: Vec<(i64, i64)> = self.terms.keys().copied().collect();
        for &(k2, j2) in &keys {
            let d_out = self.differential(k2, j2);
            let d_in = self.differential(k2 - 2, j2);
            let n = self.terms[&(k2, j2)].len();
            let h = n - d_out.rank() - d_in.rank();
            dims_add(&mut out, (k2, j2), h);
        }
        out
    }

    /// Representative cocycles of the classes at (k2, j2): vectors over the
    /// term basis, reduced against the coboundaries (canonical echelon).
    pub fn representatives(&self, k2: i64, j2: i64) -> Vec<Vec<Rat>> {
        let Some(terms) = self.terms.get(&(k2, j2)) else {
            return vec![];
        };
        let n = terms.len();
        let d_out = self.differential(k2, j2);
        let kernel = d_out.kernel_basis();
        let d_in = self.differential(k2 - 2, j2);
        // image vectors as rows
        let mut reducer: Vec<Vec<Rat>> = Vec::new();
        for c in 0..d_in.cols() {
            let mut col = vec![Rat::zero(); n];
            let mut nonzero = false;
            for r in 0..n {
                let x = d_in.at(r, c).clone();
                nonzero |= !x.is_zero();
                col[r] = x;
            }
            if nonzero {
                reducer.push(col);
            }
        }
        let mut reps = Vec::new();
        for c in 0..kernel.cols() {
            let v: Vec<Rat> = (0..n).map(|r| kernel.at(r, c).clone()).collect();
            let reduced = reduce_against(&v, &reducer);
            if reduced.iter().any(|x| !x.is_zero()) {
                reducer.push(reduced.clone());
                reps.push(reduced);
            }
        }
        reps
    }

    /// A representative as a ChainMap source → target.shift2(−k2, −j2).
    pub fn rep_chain_map(&self, k2: i64, j2: i64, rep: &[Rat]) -> ChainMap {
        let terms = &self.terms[&(k2, j2)];
        let shifted = self.target.shift2(-k2, -j2).expect("parity ok");
        // shift2 canonicalizes: track where each target summand went
        let perm = permutation_after_shift(self.target, -k2, -j2, &shifted);
        let mut comps: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
        for (i, term) in terms.iter().enumerate() {
            if rep[i].is_zero() {
                continue;
            }
            let key = (term.s, perm[term.t]);
            let slot = comps.entry(key).or_insert_with(ExtVec::zero);
            *slot = slot.add(&ExtVec::monomial(term.m, rep[i].clone()));
        }
        ChainMap {
            source: self.source.clone(),
            target: shifted,
            comps,
        }
    }
}

fn reduce_against(v: &[Rat], rows: &[Vec<Rat>]) -> Vec<Rat> {
    let mut out = v.to_vec();
    for row in rows {
        let Some(p) = row.iter().position(|x| !x.is_zero()) else {
            continue;
        };
        if out[p].is_zero() {
            continue;
        }
        let f = out[p].clone() / row[p].clone();
        for (o, r) in out.iter_mut().zip(row) {
            *o -= &f * r;
        }
    }
    out
}

fn permutation_after_shift(
    original: &InjComplex,
    du: i64,
    dv: i64,
    shifted: &InjComplex,
) -> Vec<usize> {
    let mut used = vec![false; shifted.summands.len()];
    original
        .summands
        .iter()
        .map(|s| {
            let want = Summand {
                u: s.u + du,
                cone: s.cone,
                v: s.v + dv,
            };
            let pos = shifted
                .summands
                .iter()
                .enumerate()
                .position(|(i, t)| !used[i] && *t == want)
                .expect("shifted summand present");
            used[pos] = true;
            pos
        })
        .collect()
}

/// All hom dims between two complexes (homotopy classes per bidegree).
pub fn hom_spaces(s: &InjComplex, t: &InjComplex) -> Result<BigradedDims, DcatError> {
    Ok(HomComplex::build(s, t, None)?.dims())
}

// ---------------------------------------------------------------------------
// minimal models

/// Gaussian elimination of invertible scalar entries between summands with
/// equal cone and grading at adjacent complex degrees. Idempotent.
pub fn minimize(s: &InjComplex) -> InjComplex {
    let mut cur = s.clone().canonicalize();
    loop {
        let mut pick = None;
        'outer: for (&(f, t), e) in &cur.entries {
            let sf = &cur.summands[f];
            let st = &cur.summands[t];
            if sf.cone == st.cone && sf.v == st.v {
                if let Some(c) = e.coeffs.get(&0) {
                    if !c.is_zero() {
                        pick = Some((f, t, c.clone()));
                        break 'outer;
                    }
                }
            }
        }
        let Some((f, t, c)) = pick else {
            return cur;
        };
        cur = eliminate_pair(&cur, f, t, &c);
    }
}

fn eliminate_pair(s: &InjComplex, f: usize, t: usize, c: &Rat) -> InjComplex {
    let cinv = Rat::one() / c.clone();
    let keep: Vec<usize> = (0..s.summands.len()).filter(|&i| i != f && i != t).collect();
    let pos: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let summands: Vec<Summand> = keep.iter().map(|&i| s.summands[i]).collect();
    let mut entries: BTreeMap<(usize, usize), ExtVec> = BTreeMap::new();
    for (&(a, b), e) in &s.entries {
        if a == f || a == t || b == f || b == t {
            continue;
        }
        entries.insert((pos[&a], pos[&b]), e.clone());
    }
    // correction: for x -> t and f -> y, subtract (f->y) ∘ c^{-1} (x->t)
    let core = &s.site.core;
    for (&(x, tt), ext) in &s.entries {
        if tt != t || x == f {
            continue;
        }
        for (&(ff, y), efy) in &s.entries {
            if ff != f || y == t {
                continue;
            }
            let sx = &s.summands[x];
            let sf = &s.summands[f];
            let sy = &s.summands[y];
            // (x -> t) has the same hom type as (x -> f) since cone/v of t equal f's target...
            // t and f have equal cone and grading, so ext is also an element of hom(J_x, J_f)-type.
            let corr = core
                .compose_hom(sx.cone, sf.cone, sy.cone, efy, &ext.scale(&cinv))
                .neg();
            if corr.is_zero() {
                continue;
            }
            let key = (pos[&x], pos[&y]);
            let slot = entries.entry(key).or_insert_with(ExtVec::zero);
            *slot = slot.add(&corr);
            if slot.is_zero() {
                entries.remove(&key);
            }
        }
    }
    InjComplex {
        site: s.site.clone(),
        summands,
        entries,
    }
    .canonicalize()
}

// ---------------------------------------------------------------------------
// isomorphism testing

/// Minimize both sides, compare summand multisets, then search the cocycle
/// space of Hom^0_0 for a map whose scalar blocks are invertible. Between
/// minimal complexes such a map is an isomorphism.
pub fn is_isomorphic(a: &InjComplex, b: &InjComplex) -> Result<(bool, Option<ChainMap>), DcatError> {
    if !a.site.same_as(&b.site) {
        return Err(DcatError::SiteMismatch);
    }
    let ma = minimize(a);
    let mb = minimize(b);
    if ma.summand_multiset() != mb.summand_multiset() {
        return Ok((false, None));
    }
    if ma.summands.is_empty() {
        return Ok((true, Some(ChainMap::zero(&ma, &mb))));
    }
    let hom = HomComplex::build(&ma, &mb, None)?;
    let reps = hom.representatives(0, 0);
    if reps.is_empty() {
        return Ok((false, None));
    }
    // types = (u, cone, v) classes; the scalar block of a candidate map per
    // type must be invertible.
    let types: Vec<Summand> = {
        let mut t: Vec<Summand> = ma.summands.clone();
        t.dedup();
        t
    };
    let terms = &hom.terms[&(0, 0)];
    let scalar_terms: Vec<(usize, usize, usize)> = terms
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let ss = &ma.summands[h.s];
            let st = &mb.summands[h.t];
            (h.m == 0 && ss.cone == st.cone && ss.v == st.v && ss.u == st.u).then_some((
                i, h.s, h.t,
            ))
        })
        .collect();
    let try_combo = |coeffs: &[Rat]| -> Option<Vec<Rat>> {
        let n = terms.len();
        let mut v = vec![Rat::zero(); n];
        for (rep, c) in reps.iter().zip(coeffs) {
            if c.is_zero() {
                continue;
            }
            for i in 0..n {
                if !rep[i].is_zero() {
                    v[i] += c * &rep[i];
                }
            }
        }
        for ty in &types {
            let rowsums: Vec<usize> = ma
                .summands
                .iter()
                .enumerate()
                .filter(|(_, s)| *s == ty)
                .map(|(i, _)| i)
                .collect();
            let k = rowsums.len();
            let mut blk = QMatrix::zero(k, k);
            for (r, &si) in rowsums.iter().enumerate() {
                for (cidx, &ti) in rowsums.iter().enumerate() {
                    for &(term_i, ts, tt) in &scalar_terms {
                        if ts == si && mb.summands[tt] == ma.summands[ti] && tt == ti {
                            *blk.at_mut(cidx, r) += &v[term_i];
                        }
                    }
                }
            }
            if blk.rank() != k {
                return None;
            }
        }
        Some(v)
    };
    // deterministic search: all-ones, unit vectors, then seeded combos
    let m = reps.len();
    let mut candidates: Vec<Vec<Rat>> = Vec::new();
    candidates.push(vec![Rat::one(); m]);
    for i in 0..m {
        let mut c = vec![Rat::zero(); m];
        c[i] = Rat::one();
        candidates.push(c);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..400 {
        candidates.push((0..m).map(|_| Rat::from_integer(rng.gen_range(-4i64..=4).into())).collect());
    }
    for c in candidates {
        if let Some(v) = try_combo(&c) {
            let f = hom.rep_chain_map(0, 0, &v);
            return Ok((true, Some(f)));
        }
    }
    Ok((false, None))
}

// ---------------------------------------------------------------------------
// perversity

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Perversity {
    pub le0: bool,
    pub ge0: bool,
}

impl Perversity {
    pub fn perverse(&self) -> bool {
        self.le0 && self.ge0
    }
}

/// Support/cosupport conditions relative to −codim at each cone.
pub fn perversity_check(s: &InjComplex) -> Result<Perversity, DcatError> {
    let mut le0 = true;
    let mut ge0 = true;
    for &sigma in s.site.members.iter() {
        let wall = -s.site.codim2(sigma);
        let stalk = gamma_stalk(s, sigma)?;
        for (&(u, v), &d) in &stalk {
            if d > 0 && u + v > wall {
                le0 = false;
            }
        }
        let costalk = gamma_costalk(s, sigma)?;
        for (&(u, v), &d) in &costalk {
            if d > 0 && u + v < wall {
                ge0 = false;
            }
        }
    }
    Ok(Perversity { le0, ge0 })
}

// ---------------------------------------------------------------------------
// point truncation

/// The truncation triangle S_{≤0} → S → S_{≥1} over a one-cone fan.
///
/// S_{≤0} is generated by the summand generators with u+v ≤ −2·codim plus
/// the images of d one layer up; both pieces are realized as honest free
/// complexes by a constant change of basis of the affected summand classes.
pub fn t_truncate_point(s: &InjComplex) -> Result<(InjComplex, InjComplex), DcatError> {
    if s.site.members.len() != 1 {
        return Err(DcatError::MissingFaces);
    }
    let sigma = s.site.members[0];
    let wall = -s.site.codim2(sigma);
    let mut cur = s.clone().canonicalize();
    let in_a = |sm: &Summand| sm.u + sm.v <= wall;

    // classes of B-summands receiving d-images from the exact layer
    let classes: Vec<(i64, i64)> = {
        let mut set = std::collections::BTreeSet::new();
        for sm in &cur.summands {
            if !in_a(sm) {
                set.insert((sm.u, sm.v));
            }
        }
        set.into_iter().collect()
    };
    // change of basis per class
    let mut sub_idx: Vec<usize> = (0..cur.summands.len()).filter(|&i| in_a(&cur.summands[i])).collect();
    for (u_star, v_star) in classes {
        let class: Vec<usize> = (0..cur.summands.len())
            .filter(|&i| {
                let sm = &cur.summands[i];
                !in_a(sm) && sm.u == u_star && sm.v == v_star
            })
            .collect();
        if class.is_empty() {
            continue;
        }
        let sources: Vec<usize> = (0..cur.summands.len())
            .filter(|&i| {
                let sm = &cur.summands[i];
                sm.u == u_star - 2 && sm.v == v_star && sm.u + sm.v == wall
            })
            .collect();
        let mut uvecs: Vec<Vec<Rat>> = Vec::new();
        for &a in &sources {
            let mut row = vec![Rat::zero(); class.len()];
            let mut nonzero = false;
            for (ci, &b) in class.iter().enumerate() {
                if let Some(e) = cur.entries.get(&(a, b)) {
                    if let Some(c) = e.coeffs.get(&0) {
                        row[ci] = c.clone();
                        nonzero |= !c.is_zero();
                    }
                }
            }
            if nonzero {
                uvecs.push(row);
            }
        }
        if uvecs.is_empty() {
            continue;
        }
        let (rr, pivots) = QMatrix::from_rows(uvecs).rref();
        let r = pivots.len();
        let k = class.len();
        // new basis rows: echelon u-vectors then non-pivot units
        let mut p = QMatrix::zero(k, k);
        for i in 0..r {
            for j in 0..k {
                *p.at_mut(i, j) = rr.at(i, j).clone();
            }
        }
        let mut row = r;
        for j in 0..k {
            if !pivots.contains(&j) {
                *p.at_mut(row, j) = Rat::one();
                row += 1;
            }
        }
        let pinv = p.inverse().expect("basis change invertible");
        // rewrite entries: into class: E_new(x, i) = sum_b E(x, b) Pinv[b][i]
        // out of class: E_new(i, y) = sum_b P[i][b] E(b, y)
        let mut new_entries = cur.entries.clone();
        for (&(x, b), e) in &cur.entries {
            if let Some(bi) = class.iter().position(|&cb| cb == b) {
                if class.contains(&x) {
                    continue; // same class impossible (u differs), defensive
                }
                for i in 0..k {
                    let c = pinv.at(bi, i).clone();
                    if c.is_zero() {
                        continue;
                    }
                    let slot = new_entries.entry((x, class[i])).or_insert_with(ExtVec::zero);
                    *slot = slot.add(&e.scale(&c));
                }
                // remove original contribution
                let slot = new_entries.entry((x, class[bi])).or_insert_with(ExtVec::zero);
                *slot = slot.add(&e.neg());
            }
        }
        let snapshot = new_entries.clone();
        for (&(b, y), e) in &snapshot {
            if let Some(bi) = class.iter().position(|&cb| cb == b) {
                for i in 0..k {
                    let c = p.at(i, bi).clone();
                    if c.is_zero() {
                        continue;
                    }
                    let slot = new_entries.entry((class[i], y)).or_insert_with(ExtVec::zero);
                    *slot = slot.add(&e.scale(&c));
                }
                let slot = new_entries.entry((class[bi], y)).or_insert_with(ExtVec::zero);
                *slot = slot.add(&e.neg());
            }
        }
        new_entries.retain(|_, e| !e.is_zero());
        cur = InjComplex {
            site: cur.site.clone(),
            summands: cur.summands.clone(),
            entries: new_entries,
        };
        // first r members of the class join the subcomplex
        sub_idx.extend(class.iter().take(r).copied());
    }
    sub_idx.sort();
    cur.validate()?;

    // subcomplex on sub_idx, quotient on the rest; entries sub -> quotient must vanish
    let quot_idx: Vec<usize> = (0..cur.summands.len()).filter(|i| !sub_idx.contains(i)).collect();
    for &a in &sub_idx {
        for &b in &quot_idx {
            if let Some(e) = cur.entries.get(&(a, b)) {
                assert!(e.is_zero(), "truncation subcomplex is not closed under d");
            }
        }
    }
    let project = |idx: &[usize]| -> InjComplex {
        let pos: BTreeMap<usize, usize> = idx.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let summands = idx.iter().map(|&i| cur.summands[i]).collect();
        let mut entries = BTreeMap::new();
        for (&(f, t), e) in &cur.entries {
            if let (Some(&f2), Some(&t2)) = (pos.get(&f), pos.get(&t)) {
                entries.insert((f2, t2), e.clone());
            }
        }
        InjComplex {
            site: cur.site.clone(),
            summands,
            entries,
        }
        .canonicalize()
    };
    let low = project(&sub_idx);
    let high = project(&quot_idx);
    low.validate()?;
    high.validate()?;
    Ok((low, high))
}
