//! Reuse of trained angles on larger lattices.
//!
//! Periodic systems reuse shared angles verbatim on every term of the
//! larger lattice. Open systems are cut in half along an open axis and a
//! periodic bulk is inserted between the halves; boundary terms keep the
//! site-resolved angles of the open training system, bulk terms (and the
//! seam bonds touching the bulk) take the shared periodic angles. The
//! result of any gluing is a [`GlueMap`]: one parameter source per term of
//! the target lattice.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_variational, CircuitPlan, Gate, ParamMode, ParamTable, PlanFamily, PlanMeta};
use crate::error::{Error, Result};
use crate::lattice::{term_layout, Boundary, LatticeSpec, Model, Term, TermKind};

/// Shared angles on a larger periodic lattice.
pub fn upscale_periodic(params: &ParamTable, target: &LatticeSpec) -> Result<CircuitPlan> {
    if params.mode() != ParamMode::Shared {
        return Err(Error::ShapeMismatch(
            "periodic upscaling needs shared parameters".into(),
        ));
    }
    target.validate()?;
    if let Some(axis) = target.boundary().iter().position(|&b| b != Boundary::Periodic) {
        return Err(Error::NotPeriodic(axis));
    }
    build_variational(params, target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Open,
    HalfOpen,
    Periodic,
}

impl BlockKind {
    /// Seam bonds go to the endpoint with the higher rank.
    fn rank(self) -> u8 {
        match self {
            BlockKind::Open => 0,
            BlockKind::HalfOpen => 1,
            BlockKind::Periodic => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    LeftBoundary,
    Bulk,
    RightBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParamSource {
    /// Shared angle of interaction type `kind` (index into the model's kinds).
    Shared { block: usize, kind: usize },
    /// Site-resolved angle of a block site and slot.
    Site { block: usize, site: usize, slot: usize },
}

impl ParamSource {
    pub fn block(&self) -> usize {
        match *self {
            ParamSource::Shared { block, .. } | ParamSource::Site { block, .. } => block,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "a")]
    pub kind: TermKind,
    pub sites: Vec<usize>,
    pub region: Region,
    pub source: ParamSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueBlock {
    pub kind: BlockKind,
    pub lattice: LatticeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamTable>,
}

/// Parameter source for every term of a target lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueMap {
    pub target: LatticeSpec,
    pub model: Model,
    pub blocks: Vec<GlueBlock>,
    /// Aligned with the canonical term layout of `target`.
    pub assignments: Vec<Assignment>,
    /// Size of the trained periodic block.
    pub trained_size: usize,
    /// Extent of the open training system along the cut axis.
    pub open_size: usize,
    /// Inserted bulk sites along the cut axis.
    pub added: usize,
}

impl GlueMap {
    pub fn n_sites(&self) -> usize {
        self.target.n_sites()
    }

    /// Terms of the target layout without a source, and terms with more
    /// than one.
    pub fn coverage(&self) -> (usize, usize) {
        let mut counts: HashMap<(TermKind, Vec<usize>), usize> = HashMap::new();
        for a in &self.assignments {
            *counts.entry((a.kind, a.sites.clone())).or_default() += 1;
        }
        let layout = term_layout(&self.target, self.model);
        let missing = layout
            .iter()
            .filter(|t| !counts.contains_key(&(t.kind, t.sites.clone())))
            .count();
        let doubled = counts.values().filter(|&&c| c > 1).count();
        (missing, doubled)
    }

    /// Terms reading site-resolved boundary angles.
    pub fn boundary_terms(&self) -> usize {
        self.assignments
            .iter()
            .filter(|a| matches!(a.source, ParamSource::Site { .. }))
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        let layout = term_layout(&self.target, self.model);
        if layout.len() != self.assignments.len()
            || layout
                .iter()
                .zip(&self.assignments)
                .any(|(t, a)| t.kind != a.kind || t.sites != a.sites)
        {
            let (missing, doubled) = self.coverage();
            return Err(Error::InvalidLattice(format!(
                "assignments do not cover the target layout ({missing} unassigned, {doubled} doubly assigned)"
            )));
        }
        let mut layers = None;
        for (i, b) in self.blocks.iter().enumerate() {
            b.lattice.validate()?;
            if let Some(p) = &b.params {
                if p.model() != self.model {
                    return Err(Error::CouplingMismatch(format!(
                        "block {i} trained for {}",
                        p.model().label()
                    )));
                }
                if *layers.get_or_insert(p.layers()) != p.layers() {
                    return Err(Error::ShapeMismatch("blocks disagree on the layer count".into()));
                }
            }
        }
        for a in &self.assignments {
            let block = self
                .blocks
                .get(a.source.block())
                .ok_or_else(|| Error::InvalidLattice(format!("no block {}", a.source.block())))?;
            match a.source {
                ParamSource::Shared { kind, .. } => {
                    if self.model.kinds().get(kind) != Some(&a.kind) {
                        return Err(Error::ShapeMismatch(format!("{:?} reads kind {kind}", a.sites)));
                    }
                    if let Some(p) = &block.params {
                        if p.mode() != ParamMode::Shared {
                            return Err(Error::ShapeMismatch("bulk block must be shared".into()));
                        }
                    }
                }
                ParamSource::Site { site, slot, .. } => {
                    let d = block.lattice.dim();
                    let two = self.model.two_qubit_kinds().len();
                    if site >= block.lattice.n_sites() || slot >= self.model.slot_count(d) {
                        return Err(Error::SiteOutOfRange {
                            site,
                            n_qubits: block.lattice.n_sites(),
                        });
                    }
                    if slot < two * d && block.lattice.neighbor(site, slot % d).is_none() {
                        return Err(Error::InvalidLattice(format!(
                            "{:?} reads a bond missing from its block",
                            a.sites
                        )));
                    }
                    if let Some(p) = &block.params {
                        if p.mode() != ParamMode::SiteResolved || p.sites() != block.lattice.n_sites() || p.dim() != d {
                            return Err(Error::ShapeMismatch(
                                "boundary block must be site-resolved on its lattice".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Start of each block's angles in [`GlueMap::parameters`].
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = off;
                off += b.params.as_ref().map_or(0, ParamTable::len);
                o
            })
            .collect()
    }

    /// All block angles concatenated in block order.
    pub fn parameters(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let p = b
                .params
                .as_ref()
                .ok_or_else(|| Error::Config(format!("block {i} has no parameters")))?;
            out.extend_from_slice(p.values());
        }
        Ok(out)
    }

    /// Layered circuit on the target with every gate bound to its source.
    pub fn plan(&self) -> Result<CircuitPlan> {
        self.validate()?;
        let values = self.parameters()?;
        let offsets = self.offsets();
        let layers = self.blocks[0].params.as_ref().map_or(0, ParamTable::layers);
        let mut gates = Vec::with_capacity(layers * self.assignments.len());
        for r in 0..layers {
            for a in &self.assignments {
                let block = &self.blocks[a.source.block()];
                let table = block.params.as_ref().expect("checked by parameters()");
                let local = match a.source {
                    ParamSource::Shared { kind, .. } => table.shared_index(r, kind),
                    ParamSource::Site { site, slot, .. } => table.site_index(r, site, slot),
                };
                let p = offsets[a.source.block()] + local;
                gates.push(Gate {
                    kind: a.kind,
                    sites: a.sites.clone(),
                    theta: values[p],
                    param: Some(p),
                });
            }
        }
        Ok(CircuitPlan {
            gates,
            reps: 1,
            lattice: Some(self.target.clone()),
            meta: PlanMeta {
                family: PlanFamily::Glued,
                model: Some(self.model),
                layers,
                order: None,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let map: GlueMap = serde_json::from_str(s)?;
        map.validate()?;
        Ok(map)
    }
}

fn check_tables(model: Model, open: Option<&ParamTable>, bulk: Option<&ParamTable>) -> Result<()> {
    if let Some(b) = bulk {
        if b.mode() != ParamMode::Shared {
            return Err(Error::ShapeMismatch("bulk parameters must be shared".into()));
        }
    }
    if let Some(o) = open {
        if o.mode() != ParamMode::SiteResolved {
            return Err(Error::ShapeMismatch("boundary parameters must be site-resolved".into()));
        }
    }
    for t in open.into_iter().chain(bulk) {
        if t.model() != model {
            return Err(Error::CouplingMismatch(format!(
                "table trained for {}",
                t.model().label()
            )));
        }
    }
    if let (Some(o), Some(b)) = (open, bulk) {
        if o.layers() != b.layers() {
            return Err(Error::ShapeMismatch(format!(
                "boundary has {} layers, bulk {}",
                o.layers(),
                b.layers()
            )));
        }
    }
    Ok(())
}

/// Angles carried by the bonds between a boundary half and the inserted bulk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeamRule {
    /// Shared bulk angle.
    #[default]
    Bulk,
    /// Angle of the bond that joined the two halves in the open source.
    Boundary,
}

/// Cut `source` in half along its open `axis` and insert `added` bulk lines.
///
/// Block 0 is the open training lattice, block 1 the shared bulk. A line at
/// coordinate `y` maps to source line `y` in the first half, `y − added` in
/// the second half and to the bulk otherwise. A bond with a bulk endpoint is
/// bulk; any other term reads the boundary angle of its mapped anchor.
pub fn glue_open_map(
    model: Model,
    source: &LatticeSpec,
    axis: usize,
    added: usize,
    open_params: Option<ParamTable>,
    bulk_params: Option<ParamTable>,
) -> Result<GlueMap> {
    glue_open_map_with(model, source, axis, added, open_params, bulk_params, SeamRule::Bulk)
}

/// [`glue_open_map`] with a choice of seam angles.
pub fn glue_open_map_with(
    model: Model,
    source: &LatticeSpec,
    axis: usize,
    added: usize,
    open_params: Option<ParamTable>,
    bulk_params: Option<ParamTable>,
    seam: SeamRule,
) -> Result<GlueMap> {
    source.validate()?;
    if axis >= source.dim() || source.boundary()[axis] != Boundary::Open {
        return Err(Error::InvalidLattice(format!("axis {axis} of {source} is not open")));
    }
    let n_o = source.extents()[axis];
    if !n_o.is_multiple_of(2) {
        return Err(Error::OddOpenSize(n_o));
    }
    check_tables(model, open_params.as_ref(), bulk_params.as_ref())?;
    if let Some(o) = &open_params {
        if o.sites() != source.n_sites() || o.dim() != source.dim() {
            return Err(Error::ShapeMismatch(format!(
                "boundary table for {} sites, source has {}",
                o.sites(),
                source.n_sites()
            )));
        }
    }
    let half = n_o / 2;
    let target = source.with_extent(axis, n_o + added)?;
    let d = target.dim();
    let line = |site: usize| -> (Region, Vec<usize>) {
        let mut c = target.coords(site);
        let y = c[axis];
        if y < half {
            (Region::LeftBoundary, c)
        } else if y >= half + added {
            c[axis] = y - added;
            (Region::RightBoundary, c)
        } else {
            (Region::Bulk, c)
        }
    };
    let assignments = term_layout(&target, model)
        .into_iter()
        .map(|t| {
            let kind_idx = model.kind_index(t.kind).expect("layout kinds");
            let ends: Vec<(Region, Vec<usize>)> = t.sites.iter().map(|&s| line(s)).collect();
            let edge = ends.iter().find(|(r, _)| *r != Region::Bulk);
            let bulk_end = ends.iter().any(|(r, _)| *r == Region::Bulk);
            let (region, source_param) = if let (true, SeamRule::Boundary, Some((r, c))) = (bulk_end, seam, edge) {
                let mut c = c.clone();
                c[axis] = half - 1;
                (
                    *r,
                    ParamSource::Site {
                        block: 0,
                        site: source.site(&c),
                        slot: t.slot(model, d),
                    },
                )
            } else if bulk_end {
                (
                    Region::Bulk,
                    ParamSource::Shared {
                        block: 1,
                        kind: kind_idx,
                    },
                )
            } else {
                let (region, coords) = &ends[0];
                (
                    *region,
                    ParamSource::Site {
                        block: 0,
                        site: source.site(coords),
                        slot: t.slot(model, d),
                    },
                )
            };
            Assignment {
                kind: t.kind,
                sites: t.sites,
                region,
                source: source_param,
            }
        })
        .collect();
    let bulk_lattice = match bulk_params.as_ref().and_then(|p| p.lattice.clone()) {
        Some(l) => l,
        None => LatticeSpec::new(vec![3; source.dim()], vec![Boundary::Periodic; source.dim()])?,
    };
    let trained_size = bulk_lattice.n_sites();
    let map = GlueMap {
        target,
        model,
        blocks: vec![
            GlueBlock {
                kind: BlockKind::Open,
                lattice: source.clone(),
                params: open_params,
            },
            GlueBlock {
                kind: BlockKind::Periodic,
                lattice: bulk_lattice,
                params: bulk_params,
            },
        ],
        assignments,
        trained_size,
        open_size: n_o,
        added,
    };
    map.validate()?;
    Ok(map)
}

/// Open chain of `n_o + added` sites from an open `n_o`-site boundary table
/// and a shared bulk table.
pub fn glue_open(
    theta_o: &ParamTable,
    theta: &ParamTable,
    n_o: usize,
    added: usize,
    target: &LatticeSpec,
) -> Result<CircuitPlan> {
    if !n_o.is_multiple_of(2) {
        return Err(Error::OddOpenSize(n_o));
    }
    let source = LatticeSpec::chain(n_o, Boundary::Open)?;
    let map = glue_open_map(
        theta_o.model(),
        &source,
        0,
        added,
        Some(theta_o.clone()),
        Some(theta.clone()),
    )?;
    if &map.target != target {
        return Err(Error::ShapeMismatch(format!(
            "gluing produces {}, requested {target}",
            map.target
        )));
    }
    map.plan()
}

/// Trained blocks for the fully open two-dimensional map.
#[derive(Clone, Debug)]
pub struct Blocks2d {
    pub model: Model,
    /// Fully open `W_o × H_o` block, both extents even.
    pub open: LatticeSpec,
    /// Half-open block: periodic extent `P` along axis 0, open extent `W_o`
    /// along axis 1.
    pub half_open: LatticeSpec,
    /// Fully periodic block.
    pub periodic: LatticeSpec,
    pub open_params: Option<ParamTable>,
    pub half_open_params: Option<ParamTable>,
    pub periodic_params: Option<ParamTable>,
}

impl Blocks2d {
    /// The smallest admissible blocks: 4×4 open, 3×4 half-open, 3×3 periodic.
    pub fn minimal(model: Model) -> Result<Self> {
        Ok(Self {
            model,
            open: LatticeSpec::grid(4, 4, [Boundary::Open; 2])?,
            half_open: LatticeSpec::half_open(3, 4)?,
            periodic: LatticeSpec::grid(3, 3, [Boundary::Periodic; 2])?,
            open_params: None,
            half_open_params: None,
            periodic_params: None,
        })
    }
}

/// Parameter map for a fully open grid of `(W_o + 1) × (H_o + P)` sites.
///
/// Rows `< H_o/2` and the last `H_o/2` rows come from the open block; the
/// column after the left half repeats the block's innermost left column.
/// The `P` middle rows come from the half-open block (its periodic axis runs
/// down the grid, its open axis across), except the middle column, which is
/// periodic bulk. A bond between blocks goes to the more periodic one; a
/// vertical bond entering or leaving the half-open rows reads the block's
/// wrap-around bond.
pub fn glue_open_2d_map(blocks: &Blocks2d) -> Result<GlueMap> {
    let model = blocks.model;
    let (open, half, per) = (&blocks.open, &blocks.half_open, &blocks.periodic);
    for spec in [open, half, per] {
        spec.validate()?;
    }
    if open.dim() != 2 || open.boundary() != [Boundary::Open; 2] {
        return Err(Error::BlockTooSmall(format!(
            "open block {open} must be a fully open grid"
        )));
    }
    let (wo, ho) = (open.extents()[0], open.extents()[1]);
    if wo < 4 || ho < 4 {
        return Err(Error::BlockTooSmall(format!("open block {open} is below 4x4")));
    }
    if wo % 2 != 0 {
        return Err(Error::OddOpenSize(wo));
    }
    if ho % 2 != 0 {
        return Err(Error::OddOpenSize(ho));
    }
    if half.dim() != 2 || half.boundary() != [Boundary::Periodic, Boundary::Open] {
        return Err(Error::BlockTooSmall(format!(
            "half-open block {half} must be periodic x open"
        )));
    }
    let p = half.extents()[0];
    if half.extents()[1] != wo {
        return Err(Error::BlockTooSmall(format!(
            "half-open block {half} needs open extent {wo}"
        )));
    }
    if per.dim() != 2 || !per.is_fully_periodic() {
        return Err(Error::BlockTooSmall(format!(
            "periodic block {per} must be fully periodic"
        )));
    }
    check_tables(model, blocks.open_params.as_ref(), blocks.periodic_params.as_ref())?;
    check_tables(model, blocks.half_open_params.as_ref(), blocks.periodic_params.as_ref())?;

    const OPEN: usize = 0;
    const HALF: usize = 1;
    const PER: usize = 2;
    let target = LatticeSpec::grid(wo + 1, ho + p, [Boundary::Open; 2])?;
    let (mid_c, top) = (wo / 2, ho / 2);
    let col_map = |c: usize| {
        if c < mid_c {
            c
        } else if c == mid_c {
            mid_c - 1
        } else {
            c - 1
        }
    };
    // Block kind, region and block-local coordinates of a target site.
    let locate = |site: usize| -> (BlockKind, Region, Vec<usize>) {
        let tc = target.coords(site);
        let (c, r) = (tc[0], tc[1]);
        if r < top || r >= top + p {
            let br = if r < top { r } else { r - p };
            let region = if r < top {
                Region::LeftBoundary
            } else {
                Region::RightBoundary
            };
            (BlockKind::Open, region, vec![col_map(c), br])
        } else if c == mid_c {
            (BlockKind::Periodic, Region::Bulk, vec![])
        } else {
            let region = if c < mid_c {
                Region::LeftBoundary
            } else {
                Region::RightBoundary
            };
            (BlockKind::HalfOpen, region, vec![r - top, col_map(c)])
        }
    };
    let two = model.two_qubit_kinds().len();
    let assign = |t: &Term| -> Assignment {
        let kind_idx = model.kind_index(t.kind).expect("layout kinds");
        let ends: Vec<_> = t.sites.iter().map(|&s| locate(s)).collect();
        let owner = ends.iter().map(|e| e.0).max_by_key(|k| k.rank()).expect("non-empty");
        let (region, source) = match owner {
            BlockKind::Periodic => (
                Region::Bulk,
                ParamSource::Shared {
                    block: PER,
                    kind: kind_idx,
                },
            ),
            BlockKind::Open => {
                let (_, region, coords) = &ends[0];
                (
                    *region,
                    ParamSource::Site {
                        block: OPEN,
                        site: open.site(coords),
                        slot: t.slot(model, 2),
                    },
                )
            }
            BlockKind::HalfOpen => {
                let (kind0, region0, coords0) = &ends[0];
                let (coords, region) = if *kind0 == BlockKind::HalfOpen {
                    (coords0.clone(), *region0)
                } else {
                    // Entering from the open rows above: the wrap bond.
                    let (_, region1, coords1) = &ends[1];
                    (vec![p - 1, coords1[1]], *region1)
                };
                let slot = match t.axis {
                    Some(ax) => {
                        let k = model
                            .two_qubit_kinds()
                            .iter()
                            .position(|&k| k == t.kind)
                            .expect("bond kind");
                        k * 2 + (1 - ax)
                    }
                    None => two * 2,
                };
                (
                    region,
                    ParamSource::Site {
                        block: HALF,
                        site: half.site(&coords),
                        slot,
                    },
                )
            }
        };
        Assignment {
            kind: t.kind,
            sites: t.sites.clone(),
            region,
            source,
        }
    };
    let assignments = term_layout(&target, model).iter().map(assign).collect();
    let map = GlueMap {
        target,
        model,
        blocks: vec![
            GlueBlock {
                kind: BlockKind::Open,
                lattice: open.clone(),
                params: blocks.open_params.clone(),
            },
            GlueBlock {
                kind: BlockKind::HalfOpen,
                lattice: half.clone(),
                params: blocks.half_open_params.clone(),
            },
            GlueBlock {
                kind: BlockKind::Periodic,
                lattice: per.clone(),
                params: blocks.periodic_params.clone(),
            },
        ],
        assignments,
        trained_size: per.n_sites(),
        open_size: ho,
        added: p,
    };
    map.validate()?;
    Ok(map)
}
