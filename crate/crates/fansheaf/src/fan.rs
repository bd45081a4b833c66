//! Cones, face lattices, quasifans and combinatorial completions.
//!
//! Face enumeration works by double description at desk scale: facet normals
//! of a pointed cone are found among the sign-definite kernels of
//! (rank-1)-element ray subsets, and faces are the intersection closure of
//! facet ray sets. Generators are primitive integer vectors in a fixed
//! lexicographic order so every face index is reproducible.

use crate::qlinalg::{dot, primitive_directed, rat_i, QMatrix, Rat, Subspace};
use num::{BigInt, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

pub type ConeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FanError {
    #[error("cone contains a line through the origin")]
    NotPointed,
    #[error("cone is not full-dimensional")]
    NotFullDimensional,
    #[error("the given cones are not a subset of the fan")]
    NotASubset,
    #[error("invalid completion: {0}")]
    InvalidCompletion(String),
    #[error("invalid fan: {0}")]
    InvalidFan(String),
    #[error("set of cones is not interval-closed")]
    NotIntervalClosed,
}

/// One face of a fan: its rays (indices into the global ray table), its
/// span basis and annihilator basis, and a certified supporting functional.
#[derive(Clone, Debug)]
pub struct ConeData {
    pub rays: Vec<usize>,
    pub dim: usize,
    /// Canonical basis of V_sigma (rows, primitive integers).
    pub span: Subspace,
    /// Canonical basis of the annihilator of V_sigma in V*.
    pub annihilator: Subspace,
    /// xi with xi >= 0 on the parent cone and sigma = parent ∩ ker xi.
    /// Zero functional for top cones.
    pub support: Vec<Rat>,
}

/// The full face poset of a fan, with canonical ids.
///
/// Cones are sorted by (dimension, ray index set); the ray table itself is
/// lexicographically sorted primitive integer vectors.
#[derive(Clone, Debug)]
pub struct FaceLattice {
    pub ambient_dim: usize,
    pub rays: Vec<Vec<BigInt>>,
    pub cones: Vec<ConeData>,
    le: Vec<Vec<bool>>,
    /// Facet normals per cone (H-representation within the span).
    pub facet_normals: Vec<Vec<Vec<Rat>>>,
}

fn bigint_rows_to_rat(rows: &[Vec<BigInt>]) -> Vec<Vec<Rat>> {
    rows.iter()
        .map(|r| r.iter().map(|x| Rat::from_integer(x.clone())).collect())
        .collect()
}

/// Extreme rays of {x in span : xi(x) >= 0 for all xi in normals},
/// as primitive integer vectors in lexicographic order.
///
/// Candidates are kernels of rank-(d-1) subsets of the normals restricted to
/// the span; a candidate is kept when it satisfies every inequality (up to
/// global sign) and is not a positive combination artifact (extremity is
/// certified by the d-1 tight independent constraints).
pub fn hcone_rays(normals: &[Vec<Rat>], span: &Subspace) -> Result<Vec<Vec<BigInt>>, FanError> {
    let d = span.dim();
    if d == 0 {
        return Ok(vec![]);
    }
    // Express normals as functionals on span coordinates.
    let funcs: Vec<Vec<Rat>> = normals
        .iter()
        .map(|n| {
            (0..d)
                .map(|j| dot(n, span.basis.row(j)))
                .collect::<Vec<Rat>>()
        })
        .collect();
    let mut found: BTreeSet<Vec<BigInt>> = BTreeSet::new();
    let idx: Vec<usize> = (0..funcs.len()).collect();
    for subset in subsets_of_size(&idx, d.saturating_sub(1)) {
        let rows: Vec<Vec<Rat>> = subset.iter().map(|&i| funcs[i].clone()).collect();
        let m = if rows.is_empty() {
            QMatrix::zero(0, d)
        } else {
            QMatrix::from_rows(rows)
        };
        if m.rank() != d - 1 {
            continue;
        }
        let k = m.kernel_basis();
        if k.cols() != 1 {
            continue;
        }
        let cand: Vec<Rat> = (0..d).map(|i| k.at(i, 0).clone()).collect();
        for dir in [1i64, -1] {
            let v: Vec<Rat> = cand.iter().map(|x| x * rat_i(dir)).collect();
            if funcs.iter().all(|f| dot(f, &v) >= Rat::zero()) {
                let amb = span.vector_from_coords(&v);
                found.insert(primitive_directed(&amb));
            }
        }
    }
    Ok(found.into_iter().collect())
}

fn subsets_of_size(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = items.len();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Facet normals of the pointed cone spanned by `rays` (primitive, within
/// the span, inward-nonnegative). Errors with NotPointed when the
/// sign-definite normals fail to span the dual of the span.
fn facet_normals_of(rays: &[Vec<BigInt>], ambient: usize) -> Result<Vec<Vec<Rat>>, FanError> {
    let rat_rays = bigint_rows_to_rat(rays);
    let span = Subspace::from_vectors(&rat_rays, ambient);
    let d = span.dim();
    if d == 0 {
        return Ok(vec![]);
    }
    let coords: Vec<Vec<Rat>> = rat_rays.iter().map(|r| span.coords_of(r).unwrap()).collect();
    let idx: Vec<usize> = (0..coords.len()).collect();
    let mut normals: BTreeSet<Vec<BigInt>> = BTreeSet::new();
    for subset in subsets_of_size(&idx, d.saturating_sub(1)) {
        let rows: Vec<Vec<Rat>> = subset.iter().map(|&i| coords[i].clone()).collect();
        let m = if rows.is_empty() {
            QMatrix::zero(0, d)
        } else {
            QMatrix::from_rows(rows)
        };
        if m.rank() != d - 1 {
            continue;
        }
        let k = m.kernel_basis();
        if k.cols() != 1 {
            continue;
        }
        let xi: Vec<Rat> = (0..d).map(|i| k.at(i, 0).clone()).collect();
        let vals: Vec<Rat> = coords.iter().map(|c| dot(&xi, c)).collect();
        let dirs: &[i64] = if vals.iter().all(|v| !v.is_negative()) {
            &[1]
        } else if vals.iter().all(|v| !v.is_positive()) {
            &[-1]
        } else {
            &[]
        };
        for &dir in dirs {
            let xi_dir: Vec<Rat> = xi.iter().map(|x| x * rat_i(dir)).collect();
            // lift to an ambient covector eta with eta(b_j) = xi_j
            let amb = span
                .basis
                .solve(&xi_dir)
                .expect("span basis has full row rank");
            normals.insert(primitive_directed(&amb));
        }
    }
    // Pointedness: the facet normals must span span^* (restricted).
    let restr: Vec<Vec<Rat>> = normals
        .iter()
        .map(|n| {
            let nr: Vec<Rat> = n.iter().map(|x| Rat::from_integer(x.clone())).collect();
            (0..d).map(|j| dot(&nr, span.basis.row(j))).collect()
        })
        .collect();
    let rank = if restr.is_empty() { 0 } else { QMatrix::from_rows(restr).rank() };
    if rank != d {
        return Err(FanError::NotPointed);
    }
    Ok(normals
        .into_iter()
        .map(|n| n.into_iter().map(Rat::from_integer).collect())
        .collect())
}

impl FaceLattice {
    /// Face lattice of a single pointed cone given by its generators.
    pub fn from_cone(generators: &[Vec<i64>], ambient_dim: usize) -> Result<Self, FanError> {
        let gens: Vec<Vec<BigInt>> = generators
            .iter()
            .map(|g| g.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::from_top_cones(&[gens], ambient_dim)
    }

    /// Face lattice of a fan given by its top cones' generators.
    pub fn from_top_cones(tops: &[Vec<Vec<BigInt>>], ambient_dim: usize) -> Result<Self, FanError> {
        if ambient_dim == 0 || tops.iter().all(|t| t.is_empty()) {
            // the single zero cone
            let zero = ConeData {
                rays: vec![],
                dim: 0,
                span: Subspace::zero(ambient_dim),
                annihilator: Subspace::full(ambient_dim),
                support: vec![Rat::zero(); ambient_dim],
            };
            return Ok(FaceLattice {
                ambient_dim,
                rays: vec![],
                cones: vec![zero],
                le: vec![vec![true]],
                facet_normals: vec![vec![]],
            });
        }

        // Global primitive ray table.
        let mut rayset: BTreeSet<Vec<BigInt>> = BTreeSet::new();
        let mut top_primitive: Vec<Vec<Vec<BigInt>>> = Vec::new();
        for t in tops {
            let mut prim: Vec<Vec<BigInt>> = Vec::new();
            for g in t {
                if g.iter().all(Zero::is_zero) {
                    return Err(FanError::InvalidFan("zero generator".into()));
                }
                if g.len() != ambient_dim {
                    return Err(FanError::InvalidFan("generator dimension mismatch".into()));
                }
                let r: Vec<Rat> = g.iter().map(|x| Rat::from_integer(x.clone())).collect();
                let p = primitive_directed(&r);
                rayset.insert(p.clone());
                prim.push(p);
            }
            top_primitive.push(prim);
        }
        let rays: Vec<Vec<BigInt>> = rayset.into_iter().collect();
        let ray_index: BTreeMap<&Vec<BigInt>, usize> =
            rays.iter().enumerate().map(|(i, r)| (r, i)).collect();

        // Collect faces of each top cone as ray-index sets.
        let mut face_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut per_top_faces: Vec<BTreeSet<Vec<usize>>> = Vec::new();
        for prim in &top_primitive {
            let normals = facet_normals_of(prim, ambient_dim)?;
            // each generator must be an extreme ray (primitive dedup may merge)
            let top_set: Vec<usize> = {
                let mut s: BTreeSet<usize> = BTreeSet::new();
                for p in prim {
                    s.insert(ray_index[p]);
                }
                s.into_iter().collect()
            };
            let mut faces: BTreeSet<Vec<usize>> = BTreeSet::new();
            faces.insert(top_set.clone());
            // facets as ray subsets
            let mut facet_sets: Vec<Vec<usize>> = Vec::new();
            for n in &normals {
                let fs: Vec<usize> = top_set
                    .iter()
                    .copied()
                    .filter(|&ri| {
                        let r: Vec<Rat> = rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect();
                        dot(n, &r).is_zero()
                    })
                    .collect();
                facet_sets.push(fs);
            }
            // intersection closure
            let mut frontier: Vec<Vec<usize>> = vec![top_set.clone()];
            while let Some(cur) = frontier.pop() {
                for fs in &facet_sets {
                    let inter: Vec<usize> =
                        cur.iter().copied().filter(|x| fs.contains(x)).collect();
                    if !faces.contains(&inter) {
                        faces.insert(inter.clone());
                        frontier.push(inter);
                    }
                }
            }
            faces.insert(vec![]);
            for f in &faces {
                face_sets.insert(f.clone());
            }
            per_top_faces.push(faces);
        }

        // Build cone data sorted by (dim, ray set).
        let mut entries: Vec<(usize, Vec<usize>)> = Vec::new();
        for f in &face_sets {
            let vecs: Vec<Vec<Rat>> = f
                .iter()
                .map(|&ri| rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect())
                .collect();
            let dim = if vecs.is_empty() { 0 } else { QMatrix::from_rows(vecs).rank() };
            entries.push((dim, f.clone()));
        }
        entries.sort();

        // Pairwise-intersection fan condition for multiple tops.
        if tops.len() > 1 {
            for i in 0..top_primitive.len() {
                for j in i + 1..top_primitive.len() {
                    let ti: Vec<usize> = top_primitive[i].iter().map(|p| ray_index[p]).collect();
                    let tj: Vec<usize> = top_primitive[j].iter().map(|p| ray_index[p]).collect();
                    let ni = facet_normals_of(&top_primitive[i], ambient_dim)?;
                    let nj = facet_normals_of(&top_primitive[j], ambient_dim)?;
                    let span_i = Subspace::from_vectors(
                        &bigint_rows_to_rat(&top_primitive[i]),
                        ambient_dim,
                    );
                    let span_j = Subspace::from_vectors(
                        &bigint_rows_to_rat(&top_primitive[j]),
                        ambient_dim,
                    );
                    let common_span = span_i.intersect(&span_j);
                    let mut all_normals = ni.clone();
                    all_normals.extend(nj.clone());
                    let inter_rays = hcone_rays(&all_normals, &common_span)?;
                    let mut inter_set: Vec<usize> = Vec::new();
                    for r in &inter_rays {
                        let idx = ray_index.get(r).ok_or_else(|| {
                            FanError::InvalidFan(
                                "intersection is not a face of both cones".into(),
                            )
                        })?;
                        inter_set.push(*idx);
                    }
                    inter_set.sort();
                    let ok = per_top_faces[i].contains(&inter_set)
                        && per_top_faces[j].contains(&inter_set)
                        && inter_set.iter().all(|r| ti.contains(r) && tj.contains(r));
                    if !ok {
                        return Err(FanError::InvalidFan(
                            "pairwise intersection is not a common face".into(),
                        ));
                    }
                }
            }
        }

        let mut cones: Vec<ConeData> = Vec::new();
        let mut facet_normals_per: Vec<Vec<Vec<Rat>>> = Vec::new();
        for (_, rayset) in &entries {
            let vecs: Vec<Vec<Rat>> = rayset
                .iter()
                .map(|&ri| rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect())
                .collect();
            let span = Subspace::from_vectors(&vecs, ambient_dim);
            let ann = span.orthogonal_kernel();
            let prim: Vec<Vec<BigInt>> = rayset.iter().map(|&ri| rays[ri].clone()).collect();
            let normals = facet_normals_of(&prim, ambient_dim)?;
            cones.push(ConeData {
                rays: rayset.clone(),
                dim: span.dim(),
                span,
                annihilator: ann,
                support: vec![],
            });
            facet_normals_per.push(normals);
        }

        // Face relation: subset of rays AND membership in the computed faces of
        // the larger cone (ray subsets of faces are exactly faces here since
        // cones are listed with their full extreme ray sets).
        let n = cones.len();
        let mut le = vec![vec![false; n]; n];
        let all_face_sets: BTreeSet<Vec<usize>> = entries.iter().map(|(_, f)| f.clone()).collect();
        let _ = &all_face_sets;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    le[a][b] = true;
                    continue;
                }
                if cones[a].dim > cones[b].dim {
                    continue;
                }
                let sub = cones[a].rays.iter().all(|r| cones[b].rays.contains(r));
                if !sub {
                    continue;
                }
                // a's ray set must be cut from b by a supporting functional:
                // sum of b's facet normals vanishing on a.
                let mut xi = vec![Rat::zero(); ambient_dim];
                let mut any = cones[a].rays.len() == cones[b].rays.len();
                for nrm in &facet_normals_per[b] {
                    let vanishes = cones[a].rays.iter().all(|&ri| {
                        let r: Vec<Rat> =
                            rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect();
                        dot(nrm, &r).is_zero()
                    });
                    if vanishes {
                        any = true;
                        for (x, v) in xi.iter_mut().zip(nrm) {
                            *x += v;
                        }
                    }
                }
                if !any {
                    continue;
                }
                // certified: zero exactly on a's rays among b's rays
                let cut: Vec<usize> = cones[b]
                    .rays
                    .iter()
                    .copied()
                    .filter(|&ri| {
                        let r: Vec<Rat> =
                            rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect();
                        dot(&xi, &r).is_zero()
                    })
                    .collect();
                le[a][b] = cut == cones[a].rays;
            }
        }

        // supporting functionals: for each non-maximal face, the sum of facet
        // normals (of some top containing it) vanishing on it.
        for i in 0..n {
            let tops_over: Vec<usize> = (0..n)
                .filter(|&b| le[i][b] && (0..n).all(|c| !le[b][c] || c == b))
                .collect();
            if let Some(&b) = tops_over.first() {
                if b != i {
                    let mut xi = vec![Rat::zero(); ambient_dim];
                    for nrm in &facet_normals_per[b] {
                        let vanishes = cones[i].rays.iter().all(|&ri| {
                            let r: Vec<Rat> =
                                rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect();
                            dot(nrm, &r).is_zero()
                        });
                        if vanishes {
                            for (x, v) in xi.iter_mut().zip(nrm) {
                                *x += v;
                            }
                        }
                    }
                    cones[i].support = xi;
                } else {
                    cones[i].support = vec![Rat::zero(); ambient_dim];
                }
            }
        }

        let lattice = FaceLattice {
            ambient_dim,
            rays,
            cones,
            le,
            facet_normals: facet_normals_per,
        };
        lattice.check_ranked()?;
        Ok(lattice)
    }

    fn check_ranked(&self) -> Result<(), FanError> {
        for (i, c) in self.cones.iter().enumerate() {
            if c.dim >= 1 {
                let has_lower = (0..self.cones.len())
                    .any(|j| self.le(j, i) && self.cones[j].dim + 1 == c.dim);
                if !has_lower {
                    return Err(FanError::InvalidFan("face poset is not ranked".into()));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    /// tau ⪯ sigma in the face order.
    pub fn le(&self, tau: ConeId, sigma: ConeId) -> bool {
        self.le[tau][sigma]
    }

    pub fn dim(&self, c: ConeId) -> usize {
        self.cones[c].dim
    }

    pub fn codim(&self, c: ConeId) -> usize {
        self.ambient_dim - self.cones[c].dim
    }

    pub fn zero_cone(&self) -> ConeId {
        (0..self.len()).find(|&i| self.cones[i].dim == 0).expect("zero cone present")
    }

    pub fn top_cones(&self) -> Vec<ConeId> {
        (0..self.len())
            .filter(|&i| (0..self.len()).all(|j| !self.le(i, j) || j == i))
            .collect()
    }

    pub fn faces_by_dim(&self) -> Vec<usize> {
        let max = self.cones.iter().map(|c| c.dim).max().unwrap_or(0);
        let mut counts = vec![0usize; max + 1];
        for c in &self.cones {
            counts[c.dim] += 1;
        }
        counts
    }

    /// Cones covered by c (faces of one dimension less).
    pub fn covered_by(&self, c: ConeId) -> Vec<ConeId> {
        (0..self.len())
            .filter(|&j| self.le(j, c) && self.cones[j].dim + 1 == self.cones[c].dim)
            .collect()
    }

    /// Id of the cone with the given primitive ray set, if present.
    pub fn cone_by_rays(&self, rayset: &[Vec<BigInt>]) -> Option<ConeId> {
        let mut target: Vec<Vec<BigInt>> = rayset.to_vec();
        target.sort();
        (0..self.len()).find(|&i| {
            let mut mine: Vec<Vec<BigInt>> =
                self.cones[i].rays.iter().map(|&r| self.rays[r].clone()).collect();
            mine.sort();
            mine == target
        })
    }
}

/// Dual cone of the full-dimensional pointed cone whose lattice is given,
/// plus the order-reversing bijection perp: faces -> dual faces.
pub fn dual_cone(lattice: &FaceLattice) -> Result<(FaceLattice, Vec<ConeId>), FanError> {
    let n = lattice.ambient_dim;
    let tops = lattice.top_cones();
    if tops.len() != 1 || lattice.dim(tops[0]) != n {
        return Err(FanError::NotFullDimensional);
    }
    let top = tops[0];
    let ray_vecs: Vec<Vec<Rat>> = lattice.cones[top]
        .rays
        .iter()
        .map(|&ri| lattice.rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect())
        .collect();
    let dual_rays = hcone_rays(&ray_vecs, &Subspace::full(n))?;
    let dual = FaceLattice::from_top_cones(&[dual_rays.clone()], n)?;
    // perp: tau |-> face of dual with rays vanishing on tau
    let mut perp = vec![0usize; lattice.len()];
    for (tid, c) in lattice.cones.iter().enumerate() {
        let raylist: Vec<Vec<BigInt>> = dual_rays
            .iter()
            .filter(|xi| {
                c.rays.iter().all(|&ri| {
                    let r: Vec<Rat> =
                        lattice.rays[ri].iter().map(|x| Rat::from_integer(x.clone())).collect();
                    let x: Vec<Rat> = xi.iter().map(|v| Rat::from_integer(v.clone())).collect();
                    dot(&x, &r).is_zero()
                })
            })
            .cloned()
            .collect();
        perp[tid] = dual
            .cone_by_rays(&raylist)
            .ok_or_else(|| FanError::InvalidFan("perp image is not a dual face".into()))?;
    }
    Ok((dual, perp))
}

/// An interval-closed set of cones of a face lattice.
#[derive(Clone, Debug)]
pub struct QuasiFan {
    pub lattice: Arc<FaceLattice>,
    pub members: Vec<ConeId>,
}

impl QuasiFan {
    pub fn full(lattice: Arc<FaceLattice>) -> Self {
        let members = (0..lattice.len()).collect();
        QuasiFan { lattice, members }
    }

    pub fn new(lattice: Arc<FaceLattice>, mut members: Vec<ConeId>) -> Result<Self, FanError> {
        members.sort();
        members.dedup();
        if members.iter().any(|&m| m >= lattice.len()) {
            return Err(FanError::NotASubset);
        }
        // interval closed: tau ≺ rho ≺ sigma with tau, sigma in members
        for &t in &members {
            for &s in &members {
                if !lattice.le(t, s) {
                    continue;
                }
                for r in 0..lattice.len() {
                    if lattice.le(t, r) && lattice.le(r, s) && !members.contains(&r) {
                        return Err(FanError::NotIntervalClosed);
                    }
                }
            }
        }
        Ok(QuasiFan { lattice, members })
    }

    pub fn contains(&self, c: ConeId) -> bool {
        self.members.binary_search(&c).is_ok()
    }

    /// Open = face-closed inside this quasifan.
    pub fn is_open(&self, subset: &[ConeId]) -> Result<bool, FanError> {
        self.check_subset(subset)?;
        Ok(subset.iter().all(|&s| {
            self.members
                .iter()
                .all(|&t| !self.lattice.le(t, s) || subset.contains(&t))
        }))
    }

    /// Closed = star-closed inside this quasifan.
    pub fn is_closed(&self, subset: &[ConeId]) -> Result<bool, FanError> {
        self.check_subset(subset)?;
        Ok(subset.iter().all(|&s| {
            self.members
                .iter()
                .all(|&t| !self.lattice.le(s, t) || subset.contains(&t))
        }))
    }

    pub fn closure(&self, subset: &[ConeId]) -> Result<Vec<ConeId>, FanError> {
        self.check_subset(subset)?;
        Ok(self
            .members
            .iter()
            .copied()
            .filter(|&r| subset.iter().any(|&s| self.lattice.le(s, r)))
            .collect())
    }

    pub fn star(&self, c: ConeId) -> Vec<ConeId> {
        self.members
            .iter()
            .copied()
            .filter(|&r| self.lattice.le(c, r))
            .collect()
    }

    /// [sigma] ∩ Δ minus sigma itself.
    pub fn boundary(&self, c: ConeId) -> Vec<ConeId> {
        self.members
            .iter()
            .copied()
            .filter(|&r| r != c && self.lattice.le(r, c))
            .collect()
    }

    pub fn faces_in(&self, c: ConeId) -> Vec<ConeId> {
        self.members
            .iter()
            .copied()
            .filter(|&r| self.lattice.le(r, c))
            .collect()
    }

    fn check_subset(&self, subset: &[ConeId]) -> Result<(), FanError> {
        if subset.iter().all(|s| self.contains(*s)) {
            Ok(())
        } else {
            Err(FanError::NotASubset)
        }
    }
}

/// A combinatorial completion: a compatible complement to each annihilator.
#[derive(Clone, Debug)]
pub struct Completion {
    /// Phi_sigma per cone id of the underlying lattice (all cones).
    pub phi: Vec<Subspace>,
}

impl Completion {
    /// Phi_sigma = orthogonal complement of the annihilator under the
    /// standard dot product: the span basis read as covectors.
    pub fn orthogonal(lattice: &FaceLattice) -> Completion {
        let phi = lattice
            .cones
            .iter()
            .map(|c| Subspace {
                ambient: lattice.ambient_dim,
                basis: c.span.basis.clone(),
            })
            .collect();
        Completion { phi }
    }

    pub fn validate(&self, lattice: &FaceLattice) -> Result<(), FanError> {
        if self.phi.len() != lattice.len() {
            return Err(FanError::InvalidCompletion("wrong number of cones".into()));
        }
        for (i, c) in lattice.cones.iter().enumerate() {
            if !self.phi[i].sums_directly_with(&c.annihilator)
                || self.phi[i].dim() + c.annihilator.dim() != lattice.ambient_dim
            {
                return Err(FanError::InvalidCompletion(format!(
                    "Phi of cone {i} is not a complement of the annihilator"
                )));
            }
        }
        for t in 0..lattice.len() {
            for s in 0..lattice.len() {
                if t != s && lattice.le(t, s) {
                    for r in 0..self.phi[t].dim() {
                        if !self.phi[s].contains(self.phi[t].basis.row(r)) {
                            return Err(FanError::InvalidCompletion(format!(
                                "Phi not monotone along {t} ≺ {s}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Phi^tau_sigma = annihilator(tau) ∩ Phi_sigma.
    pub fn rel(&self, lattice: &FaceLattice, tau: ConeId, sigma: ConeId) -> Subspace {
        lattice.cones[tau].annihilator.intersect(&self.phi[sigma])
    }

    /// Dual completion on the dual lattice: Phi_vee at perp(tau) is the
    /// annihilator of Phi_tau in V.
    pub fn dual(
        &self,
        lattice: &FaceLattice,
        dual_lattice: &FaceLattice,
        perp: &[ConeId],
    ) -> Result<Completion, FanError> {
        let mut phi = vec![Subspace::zero(lattice.ambient_dim); dual_lattice.len()];
        for t in 0..lattice.len() {
            phi[perp[t]] = self.phi[t].orthogonal_kernel();
        }
        let c = Completion { phi };
        c.validate(dual_lattice)
            .map_err(|e| FanError::InvalidCompletion(format!("dual completion invalid: {e}")))?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ray_fan() -> FaceLattice {
        FaceLattice::from_cone(&[vec![1]], 1).unwrap()
    }

    fn quadrant() -> FaceLattice {
        FaceLattice::from_cone(&[vec![1, 0], vec![0, 1]], 2).unwrap()
    }

    fn square_cone() -> FaceLattice {
        FaceLattice::from_cone(
            &[vec![1, 1, 1], vec![1, -1, 1], vec![-1, 1, 1], vec![-1, -1, 1]],
            3,
        )
        .unwrap()
    }

    #[test]
    fn ray_fan_faces() {
        let l = ray_fan();
        assert_eq!(l.faces_by_dim(), vec![1, 1]);
        let o = l.zero_cone();
        let s = l.top_cones()[0];
        assert!(l.le(o, s));
        assert!(!l.le(s, o));
    }

    #[test]
    fn quadrant_faces() {
        let l = quadrant();
        assert_eq!(l.faces_by_dim(), vec![1, 2, 1]);
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn square_cone_faces() {
        let l = square_cone();
        assert_eq!(l.faces_by_dim(), vec![1, 4, 4, 1]);
        assert_eq!(l.len(), 10);
        // boundary of the top cone: 9 proper faces
        let q = QuasiFan::full(Arc::new(l));
        let top = q.lattice.top_cones()[0];
        assert_eq!(q.boundary(top).len(), 9);
    }

    #[test]
    fn not_pointed_detected() {
        let err = FaceLattice::from_cone(&[vec![1, 0], vec![-1, 0], vec![0, 1]], 2);
        assert_eq!(err.err(), Some(FanError::NotPointed));
    }

    #[test]
    fn zero_dim_ambient() {
        let l = FaceLattice::from_top_cones(&[], 0).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.dim(0), 0);
    }

    #[test]
    fn dual_of_ray() {
        let l = ray_fan();
        let (d, perp) = dual_cone(&l).unwrap();
        assert_eq!(d.faces_by_dim(), vec![1, 1]);
        let o = l.zero_cone();
        let s = l.top_cones()[0];
        // o-perp is the dual top, sigma-perp the dual zero cone
        assert_eq!(perp[o], d.top_cones()[0]);
        assert_eq!(perp[s], d.zero_cone());
    }

    #[test]
    fn dual_of_quadrant_swaps_rays() {
        let l = quadrant();
        let (d, perp) = dual_cone(&l).unwrap();
        assert_eq!(d.faces_by_dim(), vec![1, 2, 1]);
        for (t, &p) in perp.iter().enumerate() {
            assert_eq!(l.dim(t) + d.dim(p), 2);
        }
    }

    #[test]
    fn dual_of_square_cone() {
        let l = square_cone();
        let (d, perp) = dual_cone(&l).unwrap();
        assert_eq!(d.faces_by_dim(), vec![1, 4, 4, 1]);
        // order reversing involution on dims
        for (t, &p) in perp.iter().enumerate() {
            assert_eq!(l.dim(t) + d.dim(p), 3);
        }
        for a in 0..l.len() {
            for b in 0..l.len() {
                assert_eq!(l.le(a, b), d.le(perp[b], perp[a]));
            }
        }
        // perp ∘ perp = id through the double dual
        let (dd, perp2) = dual_cone(&d).unwrap();
        assert_eq!(dd.faces_by_dim(), l.faces_by_dim());
        for t in 0..l.len() {
            let back = perp2[perp[t]];
            assert_eq!(dd.cones[back].rays.len(), l.cones[t].rays.len());
            assert_eq!(dd.dim(back), l.dim(t));
        }
    }

    #[test]
    fn orthogonal_completion_ray_fan() {
        let l = ray_fan();
        let phi = Completion::orthogonal(&l);
        phi.validate(&l).unwrap();
        assert_eq!(phi.phi[l.zero_cone()].dim(), 0);
        assert_eq!(phi.phi[l.top_cones()[0]].dim(), 1);
    }

    #[test]
    fn orthogonal_completion_quadrant() {
        let l = quadrant();
        let phi = Completion::orthogonal(&l);
        phi.validate(&l).unwrap();
        // Phi of the x-axis ray is span(e1*)
        let ray = (0..l.len())
            .find(|&i| l.dim(i) == 1 && l.cones[i].rays.iter().any(|&r| l.rays[r] == vec![BigInt::from(1), BigInt::from(0)]))
            .unwrap();
        assert!(phi.phi[ray].contains(&[rat_i(1), rat_i(0)]));
        assert_eq!(phi.phi[ray].dim(), 1);
    }

    #[test]
    fn completion_direct_sum_and_chain_rule_square() {
        let l = Arc::new(square_cone());
        let phi = Completion::orthogonal(&l);
        phi.validate(&l).unwrap();
        // Eq. "Phi direct sum" on all chains
        for r in 0..l.len() {
            for t in 0..l.len() {
                for s in 0..l.len() {
                    if l.le(r, t) && l.le(t, s) && r != t && t != s {
                        let rs = phi.rel(&l, r, s);
                        let ts = phi.rel(&l, t, s);
                        let rt = phi.rel(&l, r, t);
                        assert_eq!(rs.dim(), ts.dim() + rt.dim());
                        assert!(ts.sums_directly_with(&rt));
                        for i in 0..ts.dim() {
                            assert!(rs.contains(ts.basis.row(i)));
                        }
                        for i in 0..rt.dim() {
                            assert!(rs.contains(rt.basis.row(i)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dual_completion_involutive() {
        for l in [ray_fan(), quadrant(), square_cone()] {
            let (d, perp) = dual_cone(&l).unwrap();
            let phi = Completion::orthogonal(&l);
            let phiv = phi.dual(&l, &d, &perp).unwrap();
            let (dd, perp2) = dual_cone(&d).unwrap();
            let phivv = phiv.dual(&d, &dd, &perp2).unwrap();
            // Phi∨∨ at the double-dual image of tau equals Phi at tau.
            for t in 0..l.len() {
                let tt = perp2[perp[t]];
                assert_eq!(phivv.phi[tt].dim(), phi.phi[t].dim());
                for i in 0..phi.phi[t].dim() {
                    assert!(phivv.phi[tt].contains(phi.phi[t].basis.row(i)));
                }
            }
        }
    }

    #[test]
    fn subfan_topology_ray_fan() {
        let l = Arc::new(ray_fan());
        let q = QuasiFan::full(l.clone());
        let o = l.zero_cone();
        let s = l.top_cones()[0];
        assert!(q.is_open(&[o]).unwrap());
        assert!(!q.is_closed(&[o]).unwrap());
        assert_eq!(q.closure(&[o]).unwrap(), vec![o, s]);
        assert!(q.is_closed(&[s]).unwrap());
        assert_eq!(q.is_open(&[99]).err(), None.or(Some(FanError::NotASubset)));
    }

    #[test]
    fn quasifan_interval_closed() {
        let l = Arc::new(square_cone());
        let top = l.top_cones()[0];
        let o = l.zero_cone();
        // {o, top} misses the intermediate faces
        assert_eq!(
            QuasiFan::new(l.clone(), vec![o, top]).err(),
            Some(FanError::NotIntervalClosed)
        );
        // a star is interval closed
        let ray = (0..l.len()).find(|&i| l.dim(i) == 1).unwrap();
        let star = QuasiFan::full(l.clone()).star(ray);
        QuasiFan::new(l.clone(), star).unwrap();
    }
}
