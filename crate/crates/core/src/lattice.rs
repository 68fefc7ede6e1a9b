//! Lattice geometry and Hamiltonian term enumeration.
//!
//! Sites are 0-based. In two dimensions axis 0 runs along a row (columns,
//! extent `W`) and axis 1 runs down the grid (rows, extent `H`), so
//! `site(r, c) = r * W + c`. Qubit `n` of a state vector is bit `n` of the
//! basis index.
//!
//! A bond is stored with its *anchor*: the site it starts from when stepping
//! one unit in the positive direction of its axis. The bond sublattice is the
//! parity of the anchor's coordinate along that axis, which reproduces the
//! odd/even split of a chain (1-based odd anchors are 0-based even anchors).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl Boundary {
    pub fn label(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Tfim,
    Tfxy,
}

impl Model {
    /// Interaction types in canonical circuit order.
    pub fn kinds(self) -> &'static [TermKind] {
        match self {
            Model::Tfim => &[TermKind::Zz, TermKind::X],
            Model::Tfxy => &[TermKind::Yy, TermKind::Zz, TermKind::X],
        }
    }

    pub fn two_qubit_kinds(self) -> &'static [TermKind] {
        let k = self.kinds();
        &k[..k.len() - 1]
    }

    /// Number of interaction types `A`.
    pub fn interaction_count(self) -> usize {
        self.kinds().len()
    }

    pub fn kind_index(self, kind: TermKind) -> Option<usize> {
        self.kinds().iter().position(|&k| k == kind)
    }

    /// Per-site parameter slots used by site-resolved tables: one per
    /// (two-qubit kind, axis) followed by the field. Equals `A` in 1D.
    pub fn slot_count(self, dim: usize) -> usize {
        self.two_qubit_kinds().len() * dim + 1
    }

    pub fn label(self) -> &'static str {
        match self {
            Model::Tfim => "tfim",
            Model::Tfxy => "tfxy",
        }
    }
}

/// Pauli structure of a Hamiltonian term; also the gate kind `exp(-iθP)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Yy,
    Zz,
    X,
}

impl TermKind {
    pub fn is_two_qubit(self) -> bool {
        !matches!(self, TermKind::X)
    }

    pub fn arity(self) -> usize {
        if self.is_two_qubit() {
            2
        } else {
            1
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TermKind::Yy => "yy",
            TermKind::Zz => "zz",
            TermKind::X => "x",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    extents: Vec<usize>,
    boundary: Vec<Boundary>,
}

impl LatticeSpec {
    pub fn new(extents: Vec<usize>, boundary: Vec<Boundary>) -> Result<Self> {
        let spec = Self { extents, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![n], vec![boundary])
    }

    /// `width` columns by `height` rows.
    pub fn grid(width: usize, height: usize, boundary: [Boundary; 2]) -> Result<Self> {
        Self::new(vec![width, height], boundary.to_vec())
    }

    /// Periodic along the width, open along the height.
    pub fn half_open(width: usize, height: usize) -> Result<Self> {
        Self::grid(width, height, [Boundary::Periodic, Boundary::Open])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.extents.len();
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidLattice(format!("dimension {d} not in {{1, 2}}")));
        }
        if self.boundary.len() != d {
            return Err(Error::InvalidLattice(format!(
                "{} boundary entries for {d} axes",
                self.boundary.len()
            )));
        }
        for (axis, (&l, &b)) in self.extents.iter().zip(&self.boundary).enumerate() {
            if l < 2 {
                return Err(Error::InvalidLattice(format!("axis {axis} has extent {l} < 2")));
            }
            if b == Boundary::Periodic && l < 3 {
                return Err(Error::PeriodicTooSmall { axis, extent: l });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.boundary.iter().all(|&b| b == Boundary::Periodic)
    }

    /// The `b` of the closed-form gate count: 1 if any axis is open.
    pub fn open_flag(&self) -> usize {
        usize::from(self.boundary.contains(&Boundary::Open))
    }

    fn stride(&self, axis: usize) -> usize {
        self.extents[..axis].iter().product()
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        self.extents
            .iter()
            .map(|&l| {
                let c = rest % l;
                rest /= l;
                c
            })
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords.iter().enumerate().map(|(axis, &c)| c * self.stride(axis)).sum()
    }

    /// Neighbour one step along `axis`, wrapping on periodic axes.
    pub fn neighbor(&self, site: usize, axis: usize) -> Option<usize> {
        let c = self.coords(site)[axis];
        let l = self.extents[axis];
        let stride = self.stride(axis);
        if c + 1 < l {
            Some(site + stride)
        } else if self.boundary[axis] == Boundary::Periodic {
            Some(site - c * stride)
        } else {
            None
        }
    }

    /// Copy with the extent of `axis` replaced.
    pub fn with_extent(&self, axis: usize, extent: usize) -> Result<Self> {
        let mut extents = self.extents.clone();
        extents[axis] = extent;
        Self::new(extents, self.boundary.clone())
    }

    /// `"6"` or `"3x5"`.
    pub fn extents_label(&self) -> String {
        self.extents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("x")
    }

    /// `"periodic"` or `"periodic/open"`.
    pub fn boundary_label(&self) -> String {
        self.boundary.iter().map(|b| b.label()).collect::<Vec<_>>().join("/")
    }
}

impl std::fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.extents_label(), self.boundary_label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub model: Model,
    pub jz: f64,
    pub hx: f64,
    #[serde(default)]
    pub jy: f64,
}

impl CouplingSet {
    pub fn tfim(jz: f64, hx: f64) -> Self {
        Self {
            model: Model::Tfim,
            jz,
            hx,
            jy: 0.0,
        }
    }

    pub fn tfxy(jy: f64, jz: f64, hx: f64) -> Self {
        Self {
            model: Model::Tfxy,
            jz,
            hx,
            jy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.jz, self.hx, self.jy].iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("coupling constant".into()));
        }
        if self.model == Model::Tfim && self.jy != 0.0 {
            return Err(Error::CouplingMismatch(format!("J_y = {} given for the TFIM", self.jy)));
        }
        Ok(())
    }

    pub fn coefficient(&self, kind: TermKind) -> f64 {
        match kind {
            TermKind::Yy => self.jy,
            TermKind::Zz => self.jz,
            TermKind::X => self.hx,
        }
    }

    /// `c_a` in canonical kind order.
    pub fn coefficients(&self) -> Vec<f64> {
        self.model.kinds().iter().map(|&k| self.coefficient(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(rename = "a")]
    pub kind: TermKind,
    pub sites: Vec<usize>,
    #[serde(rename = "c")]
    pub coeff: f64,
    /// Bond axis; `None` for fields.
    #[serde(skip)]
    pub axis: Option<usize>,
}

impl Term {
    /// Anchor site (first entry of `sites`).
    pub fn anchor(&self) -> usize {
        self.sites[0]
    }

    /// Bond sublattice parity along the bond axis; 0 for fields.
    pub fn parity(&self, spec: &LatticeSpec) -> usize {
        match self.axis {
            Some(axis) => spec.coords(self.anchor())[axis] % 2,
            None => 0,
        }
    }

    /// Site-resolved parameter slot, see [`Model::slot_count`].
    pub fn slot(&self, model: Model, dim: usize) -> usize {
        match self.axis {
            Some(axis) => {
                let k = model
                    .two_qubit_kinds()
                    .iter()
                    .position(|&k| k == self.kind)
                    .expect("two-qubit kind belongs to model");
                k * dim + axis
            }
            None => model.two_qubit_kinds().len() * dim,
        }
    }

    fn canonical_key(&self, model: Model, spec: &LatticeSpec) -> (usize, usize, usize, usize) {
        let k = model.kind_index(self.kind).unwrap_or(usize::MAX);
        (k, self.axis.unwrap_or(0), self.parity(spec), self.anchor())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermList {
    pub model: Model,
    pub d: usize,
    pub extents: Vec<usize>,
    pub boundary: Vec<Boundary>,
    pub terms: Vec<Term>,
}

impl TermList {
    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec {
            extents: self.extents.clone(),
            boundary: self.boundary.clone(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn count(&self, kind: TermKind) -> usize {
        self.terms.iter().filter(|t| t.kind == kind).count()
    }

    /// Upper bound on the spectral norm, `Σ |c|`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse and re-derive bond axes from the lattice geometry.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut list: TermList = serde_json::from_str(s)?;
        let spec = list.lattice();
        spec.validate()?;
        if list.d != spec.dim() {
            return Err(Error::InvalidLattice(format!(
                "d = {} but {} extents",
                list.d,
                spec.dim()
            )));
        }
        let n = spec.n_sites();
        for t in &mut list.terms {
            if t.sites.len() != t.kind.arity() {
                return Err(Error::InvalidLattice(format!(
                    "{} term with {} sites",
                    t.kind.label(),
                    t.sites.len()
                )));
            }
            if let Some(&s) = t.sites.iter().find(|&&s| s >= n) {
                return Err(Error::SiteOutOfRange { site: s, n_qubits: n });
            }
            if t.kind.is_two_qubit() {
                let axis = (0..spec.dim())
                    .find(|&ax| spec.neighbor(t.sites[0], ax) == Some(t.sites[1]))
                    .ok_or_else(|| Error::InvalidLattice(format!("{:?} is not a nearest-neighbour bond", t.sites)))?;
                t.axis = Some(axis);
            }
        }
        Ok(list)
    }
}

/// Coefficient-free term layout in canonical order: two-qubit kinds in model
/// order, then by axis, sublattice parity and anchor; fields last by site.
pub fn term_layout(spec: &LatticeSpec, model: Model) -> Vec<Term> {
    let n = spec.n_sites();
    let mut terms = Vec::new();
    for &kind in model.two_qubit_kinds() {
        for axis in 0..spec.dim() {
            for parity in 0..2 {
                for anchor in 0..n {
                    if spec.coords(anchor)[axis] % 2 != parity {
                        continue;
                    }
                    if let Some(nb) = spec.neighbor(anchor, axis) {
                        terms.push(Term {
                            kind,
                            sites: vec![anchor, nb],
                            coeff: 1.0,
                            axis: Some(axis),
                        });
                    }
                }
            }
        }
    }
    terms.extend((0..n).map(|s| Term {
        kind: TermKind::X,
        sites: vec![s],
        coeff: 1.0,
        axis: None,
    }));
    terms
}

pub fn build_terms(spec: &LatticeSpec, couplings: &CouplingSet) -> Result<TermList> {
    spec.validate()?;
    couplings.validate()?;
    let mut terms = term_layout(spec, couplings.model);
    for t in &mut terms {
        t.coeff = couplings.coefficient(t.kind);
    }
    Ok(TermList {
        model: couplings.model,
        d: spec.dim(),
        extents: spec.extents.clone(),
        boundary: spec.boundary.clone(),
        terms,
    })
}

/// Grow a periodic axis by `added` lines of sites, one at a time: the wrap
/// bond that closed the ring is removed and bonds to and from the new line
/// are inserted, together with the new line's own fields and transverse
/// bonds. The result is returned in canonical order.
pub fn extend_hamiltonian(
    spec: &LatticeSpec,
    couplings: &CouplingSet,
    axis: usize,
    added: usize,
) -> Result<(LatticeSpec, TermList)> {
    spec.validate()?;
    couplings.validate()?;
    if axis >= spec.dim() {
        return Err(Error::InvalidLattice(format!("no axis {axis}")));
    }
    if spec.boundary[axis] != Boundary::Periodic {
        return Err(Error::NotPeriodic(axis));
    }
    let model = couplings.model;
    let d = spec.dim();

    // Terms as (kind, coordinate list, axis) while the geometry changes.
    type CoordTerm = (TermKind, Vec<Vec<usize>>, Option<usize>);
    let mut terms: Vec<CoordTerm> = build_terms(spec, couplings)?
        .terms
        .into_iter()
        .map(|t| {
            let coords = t.sites.iter().map(|&s| spec.coords(s)).collect();
            (t.kind, coords, t.axis)
        })
        .collect();

    let mut current = spec.clone();
    for _ in 0..added {
        let old_len = current.extents[axis];
        let next = current.with_extent(axis, old_len + 1)?;
        // Remove the closing bonds (old_len - 1) -> 0 along `axis`.
        terms.retain(|(kind, coords, ax)| {
            !(kind.is_two_qubit() && *ax == Some(axis) && coords[0][axis] == old_len - 1 && coords[1][axis] == 0)
        });
        // Sites of the new line.
        let new_line: Vec<Vec<usize>> = (0..next.n_sites())
            .map(|s| next.coords(s))
            .filter(|c| c[axis] == old_len)
            .collect();
        for c in &new_line {
            for &kind in model.two_qubit_kinds() {
                let mut prev = c.clone();
                prev[axis] = old_len - 1;
                let mut first = c.clone();
                first[axis] = 0;
                terms.push((kind, vec![prev, c.clone()], Some(axis)));
                terms.push((kind, vec![c.clone(), first], Some(axis)));
                for other in (0..d).filter(|&o| o != axis) {
                    if let Some(nb) = next.neighbor(next.site(c), other) {
                        terms.push((kind, vec![c.clone(), next.coords(nb)], Some(other)));
                    }
                }
            }
            terms.push((TermKind::X, vec![c.clone()], None));
        }
        current = next;
    }

    let mut out: Vec<Term> = terms
        .into_iter()
        .map(|(kind, coords, ax)| Term {
            kind,
            sites: coords.iter().map(|c| current.site(c)).collect(),
            coeff: couplings.coefficient(kind),
            axis: ax,
        })
        .collect();
    let key_spec = current.clone();
    out.sort_by_key(|t| t.canonical_key(model, &key_spec));
    Ok((
        current.clone(),
        TermList {
            model,
            d,
            extents: current.extents.clone(),
            boundary: current.boundary.clone(),
            terms: out,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tfim() -> CouplingSet {
        CouplingSet::tfim(1.0, 0.25)
    }

    #[test]
    fn periodic_chain_of_four() {
        let spec = LatticeSpec::chain(4, Boundary::Periodic).unwrap();
        let t = build_terms(&spec, &tfim()).unwrap();
        assert_eq!(t.count(TermKind::Zz), 4);
        assert_eq!(t.count(TermKind::X), 4);
        let bonds: Vec<_> = t
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::Zz)
            .map(|t| t.sites.clone())
            .collect();
        // even anchors first, then odd anchors
        assert_eq!(bonds, vec![vec![0, 1], vec![2, 3], vec![1, 2], vec![3, 0]]);
    }

    #[test]
    fn open_chain_of_four() {
        let spec = LatticeSpec::chain(4, Boundary::Open).unwrap();
        let t = build_terms(&spec, &tfim()).unwrap();
        assert_eq!(t.count(TermKind::Zz), 3);
        assert_eq!(t.count(TermKind::X), 4);
    }

    #[test]
    fn periodic_three_by_three() {
        let spec = LatticeSpec::grid(3, 3, [Boundary::Periodic; 2]).unwrap();
        let t = build_terms(&spec, &tfim()).unwrap();
        // brute force: every site has one right and one down neighbour
        let mut brute = std::collections::BTreeSet::new();
        for r in 0..3 {
            for c in 0..3 {
                let s = r * 3 + c;
                let right = r * 3 + (c + 1) % 3;
                let down = ((r + 1) % 3) * 3 + c;
                brute.insert((s.min(right), s.max(right)));
                brute.insert((s.min(down), s.max(down)));
            }
        }
        assert_eq!(brute.len(), 18);
        assert_eq!(t.count(TermKind::Zz), 18);
        assert_eq!(t.count(TermKind::X), 9);
        let listed: std::collections::BTreeSet<_> = t
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::Zz)
            .map(|t| (t.sites[0].min(t.sites[1]), t.sites[0].max(t.sites[1])))
            .collect();
        assert_eq!(listed, brute);
    }

    #[test]
    fn row_major_indexing() {
        let spec = LatticeSpec::grid(4, 3, [Boundary::Open; 2]).unwrap();
        assert_eq!(spec.site(&[1, 2]), 2 * 4 + 1);
        assert_eq!(spec.coords(9), vec![1, 2]);
        assert_eq!(spec.neighbor(3, 0), None);
        assert_eq!(spec.neighbor(3, 1), Some(7));
    }

    #[test]
    fn rejects_small_periodic_axis() {
        assert!(matches!(
            LatticeSpec::chain(2, Boundary::Periodic),
            Err(Error::PeriodicTooSmall { axis: 0, extent: 2 })
        ));
        assert!(LatticeSpec::chain(2, Boundary::Open).is_ok());
    }

    #[test]
    fn rejects_jy_for_tfim() {
        let spec = LatticeSpec::chain(4, Boundary::Periodic).unwrap();
        let mut c = tfim();
        c.jy = 0.5;
        assert!(matches!(build_terms(&spec, &c), Err(Error::CouplingMismatch(_))));
    }

    #[test]
    fn tfxy_has_three_kinds() {
        let spec = LatticeSpec::chain(5, Boundary::Periodic).unwrap();
        let t = build_terms(&spec, &CouplingSet::tfxy(0.5, 1.0, 0.25)).unwrap();
        assert_eq!(t.count(TermKind::Yy), 5);
        assert_eq!(t.count(TermKind::Zz), 5);
        assert_eq!(t.count(TermKind::X), 5);
        assert_eq!(t.terms[0].kind, TermKind::Yy);
    }

    #[test]
    fn extend_by_one_replaces_closing_bond() {
        let spec = LatticeSpec::chain(6, Boundary::Periodic).unwrap();
        let (big, t) = extend_hamiltonian(&spec, &tfim(), 0, 1).unwrap();
        assert_eq!(big.n_sites(), 7);
        let bonds: Vec<_> = t
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::Zz)
            .map(|t| t.sites.clone())
            .collect();
        // 1-based (6,1) is 0-based [5, 0]
        assert!(!bonds.contains(&vec![5, 0]));
        assert!(bonds.contains(&vec![5, 6]));
        assert!(bonds.contains(&vec![6, 0]));
        assert!(t.terms.iter().any(|t| t.kind == TermKind::X && t.sites == vec![6]));
    }

    #[test]
    fn extend_by_zero_is_identity() {
        let spec = LatticeSpec::chain(6, Boundary::Periodic).unwrap();
        let (same, t) = extend_hamiltonian(&spec, &tfim(), 0, 0).unwrap();
        assert_eq!(same, spec);
        assert_eq!(t, build_terms(&spec, &tfim()).unwrap());
    }

    #[test]
    fn extend_six_to_twenty_four() {
        let spec = LatticeSpec::chain(6, Boundary::Periodic).unwrap();
        let (big, t) = extend_hamiltonian(&spec, &tfim(), 0, 18).unwrap();
        assert_eq!(t, build_terms(&big, &tfim()).unwrap());
        assert_eq!(big.n_sites(), 24);
    }

    #[test]
    fn extend_grid_along_both_axes() {
        let spec = LatticeSpec::half_open(3, 4).unwrap();
        let c = tfim();
        let (w, t) = extend_hamiltonian(&spec, &c, 0, 2).unwrap();
        assert_eq!(t, build_terms(&w, &c).unwrap());
        assert!(extend_hamiltonian(&spec, &c, 1, 1).is_err());
        let spec = LatticeSpec::grid(3, 3, [Boundary::Periodic; 2]).unwrap();
        let (g, t) = extend_hamiltonian(&spec, &c, 1, 3).unwrap();
        assert_eq!(g.extents(), &[3, 6]);
        assert_eq!(t, build_terms(&g, &c).unwrap());
    }

    #[test]
    fn json_shape() {
        let spec = LatticeSpec::chain(6, Boundary::Periodic).unwrap();
        let t = build_terms(&spec, &tfim()).unwrap();
        let s = t.to_json().unwrap();
        assert!(s.starts_with(
            r#"{"model":"tfim","d":1,"extents":[6],"boundary":["periodic"],"terms":[{"a":"zz","sites":[0,1],"c":1.0}"#
        ));
        let back = TermList::from_json(&s).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn chain_term_counts(n in 2usize..=30, periodic in any::<bool>()) {
            let b = if periodic { Boundary::Periodic } else { Boundary::Open };
            prop_assume!(!(periodic && n < 3));
            let spec = LatticeSpec::chain(n, b).unwrap();
            let t = build_terms(&spec, &CouplingSet::tfxy(0.5, 1.0, 0.25)).unwrap();
            let bonds = if periodic { n } else { n - 1 };
            prop_assert_eq!(t.count(TermKind::Zz), bonds);
            prop_assert_eq!(t.count(TermKind::Yy), bonds);
            prop_assert_eq!(t.count(TermKind::X), n);
            // bonds are nearest neighbours and never duplicated
            let mut seen = std::collections::BTreeSet::new();
            for term in t.terms.iter().filter(|t| t.kind == TermKind::Zz) {
                let (a, b) = (term.sites[0], term.sites[1]);
                prop_assert!((a + 1) % n == b);
                prop_assert!(seen.insert((a.min(b), a.max(b))));
            }
        }

        #[test]
        fn grid_term_counts(w in 2usize..6, h in 2usize..6, bw in any::<bool>(), bh in any::<bool>()) {
            prop_assume!(!(bw && w < 3) && !(bh && h < 3));
            let b = |p| if p { Boundary::Periodic } else { Boundary::Open };
            let spec = LatticeSpec::grid(w, h, [b(bw), b(bh)]).unwrap();
            let t = build_terms(&spec, &tfim()).unwrap();
            let horiz = if bw { w } else { w - 1 } * h;
            let vert = if bh { h } else { h - 1 } * w;
            prop_assert_eq!(t.count(TermKind::Zz), horiz + vert);
        }

        #[test]
        fn extension_matches_direct_enumeration(n in 3usize..=12, k in 0usize..=10) {
            let spec = LatticeSpec::chain(n, Boundary::Periodic).unwrap();
            let c = CouplingSet::tfxy(0.3, -0.7, 0.2);
            let (big, t) = extend_hamiltonian(&spec, &c, 0, k).unwrap();
            prop_assert_eq!(big.n_sites(), n + k);
            prop_assert_eq!(t, build_terms(&big, &c).unwrap());
        }

        #[test]
        fn serialization_is_deterministic(n in 3usize..12) {
            let spec = LatticeSpec::chain(n, Boundary::Periodic).unwrap();
            let a = build_terms(&spec, &tfim()).unwrap().to_json().unwrap();
            let b = build_terms(&spec, &tfim()).unwrap().to_json().unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
