//! Circuit plans: the layered variational ansatz, first-order Trotter and
//! recursive Suzuki product formulas, and gate/depth statistics.
//!
//! A layer applies one gate `exp(-iθP)` per Hamiltonian term, in the
//! canonical term order of [`term_layout`]: two-qubit sublayers (YY before
//! ZZ), each split by axis and bond parity, followed by the field sublayer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{term_layout, Boundary, CouplingSet, LatticeSpec, Model, Term, TermKind};
use crate::statekit::StateVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    #[serde(rename = "k")]
    pub kind: TermKind,
    #[serde(rename = "q")]
    pub sites: Vec<usize>,
    #[serde(rename = "th")]
    pub theta: f64,
    /// Flat index of the parameter driving this gate, if any.
    #[serde(skip)]
    pub param: Option<usize>,
}

impl Gate {
    pub fn new(kind: TermKind, sites: Vec<usize>, theta: f64) -> Self {
        Self {
            kind,
            sites,
            theta,
            param: None,
        }
    }

    #[inline]
    pub(crate) fn qubits(&self) -> (usize, usize) {
        (self.sites[0], *self.sites.get(1).unwrap_or(&self.sites[0]))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanFamily {
    #[default]
    Custom,
    Variational,
    Trotter,
    Suzuki,
    Glued,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub family: PlanFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    /// Number of layers `m` (Trotter number).
    #[serde(default)]
    pub layers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitPlan {
    pub gates: Vec<Gate>,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default)]
    pub meta: PlanMeta,
}

impl CircuitPlan {
    pub fn new(gates: Vec<Gate>) -> Self {
        Self {
            gates,
            reps: 1,
            lattice: None,
            meta: PlanMeta::default(),
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    /// Gates counted over all repetitions.
    pub fn gate_count(&self) -> usize {
        self.gates.len() * self.reps
    }

    /// Every support lies within `n` qubits and two-qubit supports are distinct.
    pub fn check_qubits(&self, n: usize) -> Result<()> {
        for g in &self.gates {
            if g.sites.len() != g.kind.arity() {
                return Err(Error::InvalidLattice(format!(
                    "{} gate on {} sites",
                    g.kind.label(),
                    g.sites.len()
                )));
            }
            if let Some(&s) = g.sites.iter().find(|&&s| s >= n) {
                return Err(Error::SiteOutOfRange { site: s, n_qubits: n });
            }
            if g.kind.is_two_qubit() && g.sites[0] == g.sites[1] {
                return Err(Error::DuplicateSites(g.sites[0]));
            }
            if !g.theta.is_finite() {
                return Err(Error::NonFinite(format!("angle on {:?}", g.sites)));
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        self.check_qubits(state.n_qubits())?;
        self.apply_unchecked(state);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&self, state: &mut StateVector) {
        for _ in 0..self.reps {
            self.apply_once(state);
        }
    }

    /// One pass over the gate list, ignoring `reps`.
    pub(crate) fn apply_once(&self, state: &mut StateVector) {
        for g in &self.gates {
            let (a, b) = g.qubits();
            state.apply_raw(g.kind, a, b, g.theta);
        }
    }

    /// Reversed gate order with negated angles.
    pub fn inverse(&self) -> Self {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| Gate {
                theta: -g.theta,
                ..g.clone()
            })
            .collect();
        Self {
            gates,
            reps: self.reps,
            lattice: self.lattice.clone(),
            meta: PlanMeta {
                family: PlanFamily::Custom,
                ..self.meta.clone()
            },
        }
    }

    /// Overwrite every parameter-bound angle from a flat parameter vector.
    pub fn bind(&mut self, values: &[f64]) {
        for g in &mut self.gates {
            if let Some(p) = g.param {
                g.theta = values[p];
            }
        }
    }

    /// Sum of angles per gate support, useful for total-time checks.
    pub fn angle_totals(&self) -> Vec<((TermKind, Vec<usize>), f64)> {
        let mut out: Vec<((TermKind, Vec<usize>), f64)> = Vec::new();
        for g in &self.gates {
            let key = (g.kind, g.sites.clone());
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, t)) => *t += g.theta,
                None => out.push((key, g.theta)),
            }
        }
        for (_, t) in &mut out {
            *t *= self.reps as f64;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    Shared,
    SiteResolved,
}

/// Variational angles. Shared tables hold `θ[r][a]`; site-resolved tables
/// hold `θ[r][n][slot]`, where a slot is one (two-qubit kind, axis) pair or
/// the field (see [`Model::slot_count`]). A bond belongs to its anchor site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamRepr", try_from = "ParamRepr")]
pub struct ParamTable {
    model: Model,
    mode: ParamMode,
    layers: usize,
    sites: usize,
    dim: usize,
    values: Vec<f64>,
    /// Time step the table was trained for.
    pub tau: Option<f64>,
    /// Lattice the table was trained on.
    pub lattice: Option<LatticeSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ThetaRepr {
    Shared(Vec<Vec<f64>>),
    Site(Vec<Vec<Vec<f64>>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParamRepr {
    model: Model,
    mode: ParamMode,
    m: usize,
    #[serde(default = "one")]
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeSpec>,
    theta: ThetaRepr,
}

fn one() -> usize {
    1
}

impl From<ParamTable> for ParamRepr {
    fn from(p: ParamTable) -> Self {
        let theta = match p.mode {
            ParamMode::Shared => ThetaRepr::Shared(p.values.chunks(p.slots().max(1)).map(<[f64]>::to_vec).collect()),
            ParamMode::SiteResolved => ThetaRepr::Site(
                p.values
                    .chunks((p.sites * p.slots()).max(1))
                    .map(|layer| layer.chunks(p.slots()).map(<[f64]>::to_vec).collect())
                    .collect(),
            ),
        };
        ParamRepr {
            model: p.model,
            mode: p.mode,
            m: p.layers,
            d: p.dim,
            tau: p.tau,
            lattice: p.lattice,
            theta,
        }
    }
}

impl TryFrom<ParamRepr> for ParamTable {
    type Error = Error;

    fn try_from(r: ParamRepr) -> Result<Self> {
        let mut table = match (r.mode, r.theta) {
            (ParamMode::Shared, ThetaRepr::Shared(rows)) => {
                let a = r.model.interaction_count();
                if rows.len() != r.m || rows.iter().any(|row| row.len() != a) {
                    return Err(Error::ShapeMismatch(format!("shared table must be {}×{a}", r.m)));
                }
                ParamTable::shared(r.model, r.m, rows.concat())?
            }
            (ParamMode::SiteResolved, ThetaRepr::Site(layers)) => {
                let sites = layers.first().map_or(0, Vec::len);
                let values: Vec<f64> = layers.into_iter().flatten().flatten().collect();
                ParamTable::site_resolved(r.model, r.d, r.m, sites, values)?
            }
            // An empty nested array parses as the shared form.
            (ParamMode::SiteResolved, ThetaRepr::Shared(rows)) if rows.iter().all(Vec::is_empty) => {
                ParamTable::site_resolved(r.model, r.d, r.m, 0, Vec::new())?
            }
            (mode, _) => {
                return Err(Error::ShapeMismatch(format!(
                    "theta nesting does not match mode {mode:?}"
                )));
            }
        };
        table.tau = r.tau;
        table.lattice = r.lattice;
        Ok(table)
    }
}

impl ParamTable {
    pub fn shared(model: Model, layers: usize, values: Vec<f64>) -> Result<Self> {
        let a = model.interaction_count();
        if values.len() != layers * a {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {layers}×{a}",
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            model,
            mode: ParamMode::Shared,
            layers,
            sites: 1,
            dim: 1,
            values,
            tau: None,
            lattice: None,
        })
    }

    pub fn site_resolved(model: Model, dim: usize, layers: usize, sites: usize, values: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::ShapeMismatch(format!("dimension {dim}")));
        }
        let s = model.slot_count(dim);
        if values.len() != layers * sites * s {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {layers}×{sites}×{s}",
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            model,
            mode: ParamMode::SiteResolved,
            layers,
            sites,
            dim,
            values,
            tau: None,
            lattice: None,
        })
    }

    /// Copy shared angles onto every site of `spec`.
    pub fn to_site_resolved(&self, spec: &LatticeSpec) -> Result<Self> {
        if self.mode != ParamMode::Shared {
            return Ok(self.clone());
        }
        let n = spec.n_sites();
        let d = spec.dim();
        let s = self.model.slot_count(d);
        let two = self.model.two_qubit_kinds().len();
        let mut values = Vec::with_capacity(self.layers * n * s);
        for r in 0..self.layers {
            for _ in 0..n {
                for slot in 0..s {
                    let a = if slot < two * d { slot / d } else { two };
                    values.push(self.shared_angle(r, a));
                }
            }
        }
        let mut out = Self::site_resolved(self.model, d, self.layers, n, values)?;
        out.tau = self.tau;
        out.lattice = Some(spec.clone());
        Ok(out)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn mode(&self) -> ParamMode {
        self.mode
    }

    /// `m`.
    pub fn layers(&self) -> usize {
        self.layers
    }

    /// `A`.
    pub fn interaction_count(&self) -> usize {
        self.model.interaction_count()
    }

    /// Angles per layer and site.
    pub fn slots(&self) -> usize {
        match self.mode {
            ParamMode::Shared => self.model.interaction_count(),
            ParamMode::SiteResolved => self.model.slot_count(self.dim),
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a table of {}",
                values.len(),
                self.values.len()
            )));
        }
        check_finite(values)?;
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn shared_index(&self, layer: usize, kind: usize) -> usize {
        layer * self.model.interaction_count() + kind
    }

    pub fn site_index(&self, layer: usize, site: usize, slot: usize) -> usize {
        (layer * self.sites + site) * self.slots() + slot
    }

    pub fn shared_angle(&self, layer: usize, kind: usize) -> f64 {
        self.values[self.shared_index(layer, kind)]
    }

    pub fn site_angle(&self, layer: usize, site: usize, slot: usize) -> f64 {
        self.values[self.site_index(layer, site, slot)]
    }

    /// Flat parameter index for a term in a given layer.
    pub fn index_for(&self, layer: usize, term: &Term) -> usize {
        match self.mode {
            ParamMode::Shared => {
                let a = self.model.kind_index(term.kind).expect("term kind belongs to model");
                self.shared_index(layer, a)
            }
            ParamMode::SiteResolved => self.site_index(layer, term.anchor(), term.slot(self.model, self.dim)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("parameter {i}"))),
        None => Ok(()),
    }
}

/// First-order Trotter angles `θ[r][a] = τ c_a / m`.
pub fn trotter_init(tau: f64, m: usize, couplings: &CouplingSet) -> Result<ParamTable> {
    if m < 1 {
        return Err(Error::InvalidTrotterNumber);
    }
    if !tau.is_finite() {
        return Err(Error::NonFinite("tau".into()));
    }
    couplings.validate()?;
    let c = couplings.coefficients();
    let values = (0..m).flat_map(|_| c.iter().map(|&ca| tau * ca / m as f64)).collect();
    let mut table = ParamTable::shared(couplings.model, m, values)?;
    table.tau = Some(tau);
    Ok(table)
}

/// Layered ansatz on `spec` with gates bound to `params`.
pub fn build_variational(params: &ParamTable, spec: &LatticeSpec) -> Result<CircuitPlan> {
    spec.validate()?;
    if params.mode == ParamMode::SiteResolved && (params.sites != spec.n_sites() || params.dim != spec.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "site-resolved table for {} sites in {}D used on {spec}",
            params.sites, params.dim
        )));
    }
    let layout = term_layout(spec, params.model);
    let mut gates = Vec::with_capacity(layout.len() * params.layers);
    for r in 0..params.layers {
        for t in &layout {
            let p = params.index_for(r, t);
            gates.push(Gate {
                kind: t.kind,
                sites: t.sites.clone(),
                theta: params.values[p],
                param: Some(p),
            });
        }
    }
    Ok(CircuitPlan {
        gates,
        reps: 1,
        lattice: Some(spec.clone()),
        meta: PlanMeta {
            family: PlanFamily::Variational,
            model: Some(params.model),
            layers: params.layers,
            order: None,
        },
    })
}

/// First-order Trotter circuit with `m` steps.
pub fn build_trotter(tau: f64, m: usize, spec: &LatticeSpec, couplings: &CouplingSet) -> Result<CircuitPlan> {
    let mut plan = build_variational(&trotter_init(tau, m, couplings)?, spec)?;
    plan.meta.family = PlanFamily::Trotter;
    for g in &mut plan.gates {
        g.param = None;
    }
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuzukiOrder(u32);

impl SuzukiOrder {
    pub fn new(q: u32) -> Result<Self> {
        match q {
            1 | 2 | 4 | 6 | 8 => Ok(Self(q)),
            _ => Err(Error::UnsupportedOrder(q)),
        }
    }

    pub fn order(self) -> u32 {
        self.0
    }

    /// `ν_q = 1 / (4 − 4^{1/(q−1)})`, defined for `q > 2`.
    pub fn nu(self) -> Option<f64> {
        (self.0 > 2).then(|| 1.0 / (4.0 - 4f64.powf(1.0 / (self.0 as f64 - 1.0))))
    }
}

/// Order-`q` Suzuki formula with time step `τ/m`, repeated `m` times.
pub fn build_suzuki(
    q: SuzukiOrder,
    tau: f64,
    m: usize,
    spec: &LatticeSpec,
    couplings: &CouplingSet,
) -> Result<CircuitPlan> {
    if m < 1 {
        return Err(Error::InvalidTrotterNumber);
    }
    if q.order() == 1 {
        let mut plan = build_trotter(tau, m, spec, couplings)?;
        plan.meta.family = PlanFamily::Suzuki;
        plan.meta.order = Some(1);
        return Ok(plan);
    }
    spec.validate()?;
    couplings.validate()?;
    let mut layout = term_layout(spec, couplings.model);
    for t in &mut layout {
        t.coeff = couplings.coefficient(t.kind);
    }
    let mut step = Vec::new();
    suzuki_sequence(q.order(), tau / m as f64, &layout, &mut step);
    let mut gates = Vec::with_capacity(step.len() * m);
    for _ in 0..m {
        gates.extend(step.iter().cloned());
    }
    Ok(CircuitPlan {
        gates,
        reps: 1,
        lattice: Some(spec.clone()),
        meta: PlanMeta {
            family: PlanFamily::Suzuki,
            model: Some(couplings.model),
            layers: m,
            order: Some(q.order()),
        },
    })
}

fn suzuki_sequence(q: u32, t: f64, layout: &[Term], out: &mut Vec<Gate>) {
    if q == 2 {
        let half = |term: &Term| Gate::new(term.kind, term.sites.clone(), term.coeff * t / 2.0);
        out.extend(layout.iter().map(half));
        out.extend(layout.iter().rev().map(half));
        return;
    }
    let nu = SuzukiOrder(q).nu().expect("order above two");
    for _ in 0..2 {
        suzuki_sequence(q - 2, nu * t, layout, out);
    }
    suzuki_sequence(q - 2, (1.0 - 4.0 * nu) * t, layout, out);
    for _ in 0..2 {
        suzuki_sequence(q - 2, nu * t, layout, out);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateStats {
    /// Gate count over all repetitions.
    pub gates: usize,
    /// Greedy as-soon-as-possible layering depth.
    pub depth_measured: usize,
    /// `(d+1)·m` per repetition, for layered TFIM plans.
    pub depth_formula: Option<usize>,
    /// `(d+1)·m·N − b·d·m` per repetition, for layered TFIM plans.
    pub gates_formula: Option<usize>,
}

pub fn gate_stats(plan: &CircuitPlan) -> GateStats {
    let n = plan
        .gates
        .iter()
        .flat_map(|g| g.sites.iter().copied())
        .max()
        .map_or(0, |s| s + 1);
    let mut front = vec![0usize; n];
    let mut depth = 0;
    for _ in 0..plan.reps {
        for g in &plan.gates {
            let layer = g.sites.iter().map(|&s| front[s]).max().unwrap_or(0) + 1;
            for &s in &g.sites {
                front[s] = layer;
            }
            depth = depth.max(layer);
        }
    }
    let layered = matches!(plan.meta.family, PlanFamily::Variational | PlanFamily::Trotter)
        && plan.meta.model == Some(Model::Tfim);
    let (depth_formula, gates_formula) = match (&plan.lattice, layered) {
        (Some(spec), true) => {
            let d = spec.dim();
            let m = plan.meta.layers;
            let b = usize::from(spec.boundary().contains(&Boundary::Open));
            (
                Some((d + 1) * m * plan.reps),
                Some(((d + 1) * m * spec.n_sites() - b * d * m) * plan.reps),
            )
        }
        _ => (None, None),
    };
    GateStats {
        gates: plan.gate_count(),
        depth_measured: depth,
        depth_formula,
        gates_formula,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_terms;
    use crate::statekit::{circuit_unitary, exact_propagator_dense, DenseOperator};
    use proptest::prelude::*;

    fn chain(n: usize, b: Boundary) -> LatticeSpec {
        LatticeSpec::chain(n, b).unwrap()
    }

    #[test]
    fn trotter_angles() {
        let c = CouplingSet::tfim(1.0, 0.25);
        let t = trotter_init(0.3, 3, &c).unwrap();
        for r in 0..3 {
            assert!((t.shared_angle(r, 0) - 0.1).abs() < 1e-15);
            assert!((t.shared_angle(r, 1) - 0.025).abs() < 1e-15);
        }
        let zero = trotter_init(0.0, 2, &c).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(matches!(trotter_init(0.3, 0, &c), Err(Error::InvalidTrotterNumber)));
    }

    #[test]
    fn zero_layers_is_empty() {
        let p = ParamTable::shared(Model::Tfim, 0, vec![]).unwrap();
        let plan = build_variational(&p, &chain(4, Boundary::Periodic)).unwrap();
        assert!(plan.gates.is_empty());
        let u = circuit_unitary(&plan, 4).unwrap();
        assert!(u.max_abs_diff(&DenseOperator::identity(4)) == 0.0);
    }

    #[test]
    fn single_x_gate_closed_form() {
        let th = 0.37;
        let plan = CircuitPlan::new(vec![Gate::new(TermKind::X, vec![0], th)]);
        let u = circuit_unitary(&plan, 1).unwrap();
        let (s, c) = th.sin_cos();
        assert!((u.get(0, 0).re - c).abs() < 1e-15 && u.get(0, 0).im == 0.0);
        assert!((u.get(1, 0).im + s).abs() < 1e-15);
        assert!((u.get(0, 1).im + s).abs() < 1e-15);
        assert!((u.get(1, 1).re - c).abs() < 1e-15);
    }

    #[test]
    fn plan_then_inverse_is_identity() {
        let spec = LatticeSpec::grid(3, 2, [Boundary::Periodic, Boundary::Open]).unwrap();
        let plan = build_trotter(0.7, 2, &spec, &CouplingSet::tfxy(0.5, 1.0, 0.3)).unwrap();
        let mut both = plan.clone();
        both.gates.extend(plan.inverse().gates);
        let u = circuit_unitary(&both, 6).unwrap();
        assert!(u.max_abs_diff(&DenseOperator::identity(6)) < 1e-12);
    }

    #[test]
    fn gate_order_follows_sublayers() {
        let plan = build_trotter(0.3, 1, &chain(6, Boundary::Periodic), &CouplingSet::tfim(1.0, 0.25)).unwrap();
        let sites: Vec<Vec<usize>> = plan.gates.iter().map(|g| g.sites.clone()).collect();
        assert_eq!(
            &sites[..6],
            &[vec![0, 1], vec![2, 3], vec![4, 5], vec![1, 2], vec![3, 4], vec![5, 0]]
        );
        assert!(plan.gates[6..].iter().all(|g| g.kind == TermKind::X));
    }

    #[test]
    fn trotter_example_angles_and_doubling() {
        let spec = chain(5, Boundary::Open);
        let c = CouplingSet::tfim(1.0, 0.4);
        let p3 = build_trotter(0.3, 3, &spec, &c).unwrap();
        for g in &p3.gates {
            let want = if g.kind == TermKind::Zz { 0.1 } else { 0.4 * 0.1 };
            assert!((g.theta - want).abs() < 1e-15);
        }
        let p6 = build_trotter(0.3, 6, &spec, &c).unwrap();
        assert_eq!(p6.gate_count(), 2 * p3.gate_count());
        for (a, b) in p6.gates.iter().zip(&p3.gates) {
            assert!((2.0 * a.theta - b.theta).abs() < 1e-15);
        }
    }

    #[test]
    fn commuting_hamiltonian_is_exact() {
        let spec = chain(6, Boundary::Periodic);
        let c = CouplingSet::tfim(0.9, 0.0);
        let list = build_terms(&spec, &c).unwrap();
        let ex = exact_propagator_dense(&list, 0.8).unwrap();
        let tr = circuit_unitary(&build_trotter(0.8, 1, &spec, &c).unwrap(), 6).unwrap();
        assert!(tr.max_abs_diff(&ex) < 1e-12);
        let s2 = build_suzuki(SuzukiOrder::new(2).unwrap(), 0.8, 1, &spec, &c).unwrap();
        assert!(circuit_unitary(&s2, 6).unwrap().max_abs_diff(&ex) < 1e-12);
    }

    #[test]
    fn gate_stats_examples() {
        let c = CouplingSet::tfim(1.0, 0.25);
        let s = gate_stats(&build_trotter(0.3, 3, &chain(6, Boundary::Periodic), &c).unwrap());
        assert_eq!((s.gates, s.depth_formula), (36, Some(6)));
        let s = gate_stats(&build_trotter(0.3, 3, &chain(15, Boundary::Periodic), &c).unwrap());
        assert_eq!((s.gates, s.depth_formula, s.gates_formula), (90, Some(6), Some(90)));
        let s = gate_stats(&build_trotter(0.3, 3, &chain(15, Boundary::Open), &c).unwrap());
        assert_eq!((s.gates, s.gates_formula), (87, Some(87)));
        let s = gate_stats(&CircuitPlan::empty());
        assert_eq!((s.gates, s.depth_measured), (0, 0));
        // Two bond sublayers plus the field sublayer.
        let s = gate_stats(&build_trotter(0.3, 1, &chain(6, Boundary::Periodic), &c).unwrap());
        assert_eq!(s.depth_measured, 3);
    }

    #[test]
    fn repetitions_scale_stats() {
        let c = CouplingSet::tfim(1.0, 0.25);
        let plan = build_trotter(0.3, 2, &chain(8, Boundary::Periodic), &c).unwrap();
        let one = gate_stats(&plan);
        let four = gate_stats(&plan.clone().with_reps(4));
        assert_eq!(four.gates, 4 * one.gates);
        assert_eq!(four.depth_measured, 4 * one.depth_measured);
        assert_eq!(four.depth_formula, one.depth_formula.map(|d| 4 * d));
    }

    #[test]
    fn nu_values() {
        let nu4 = SuzukiOrder::new(4).unwrap().nu().unwrap();
        assert!((nu4 - 0.4144907717943757).abs() < 1e-12);
        for q in [4, 6, 8] {
            let nu = SuzukiOrder::new(q).unwrap().nu().unwrap();
            assert!(nu.is_finite() && nu > 0.0);
        }
        assert!(SuzukiOrder::new(2).unwrap().nu().is_none());
        assert!(matches!(SuzukiOrder::new(3), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn suzuki_gate_growth_and_total_time() {
        let spec = chain(5, Boundary::Periodic);
        let c = CouplingSet::tfim(1.0, 0.3);
        let tau = 0.7;
        let mut prev = None;
        for q in [2, 4, 6, 8] {
            let plan = build_suzuki(SuzukiOrder::new(q).unwrap(), tau, 2, &spec, &c).unwrap();
            if let Some(p) = prev {
                assert_eq!(plan.gate_count(), 5 * p);
            }
            prev = Some(plan.gate_count());
            for ((kind, _), total) in plan.angle_totals() {
                assert!((total - tau * c.coefficient(kind)).abs() < 1e-12, "q={q}");
            }
        }
    }

    #[test]
    fn suzuki_second_order_is_palindrome() {
        let spec = chain(4, Boundary::Open);
        let plan = build_suzuki(
            SuzukiOrder::new(2).unwrap(),
            0.2,
            1,
            &spec,
            &CouplingSet::tfim(1.0, 0.5),
        )
        .unwrap();
        let n = plan.gates.len();
        for i in 0..n / 2 {
            assert_eq!(plan.gates[i], plan.gates[n - 1 - i]);
        }
    }

    #[test]
    fn plan_json_shape() {
        let plan = CircuitPlan::new(vec![Gate::new(TermKind::Zz, vec![0, 1], 0.1)]);
        let s = plan.to_json().unwrap();
        assert!(
            s.starts_with(r#"{"gates":[{"k":"zz","q":[0,1],"th":0.1}],"reps":1"#),
            "{s}"
        );
        assert_eq!(CircuitPlan::from_json(&s).unwrap(), plan);
    }

    #[test]
    fn param_json_round_trip() {
        let t = trotter_init(0.3, 2, &CouplingSet::tfim(1.0, 0.25)).unwrap();
        let s = t.to_json().unwrap();
        assert!(s.contains(r#""theta":[[0.15,0.0375],[0.15,0.0375]]"#), "{s}");
        assert_eq!(ParamTable::from_json(&s).unwrap(), t);
        let spec = LatticeSpec::grid(3, 4, [Boundary::Periodic, Boundary::Open]).unwrap();
        let site = t.to_site_resolved(&spec).unwrap();
        assert_eq!(site.len(), 2 * 12 * 3);
        assert_eq!(ParamTable::from_json(&site.to_json().unwrap()).unwrap(), site);
    }

    #[test]
    fn site_resolved_copy_reproduces_shared_plan() {
        let spec = LatticeSpec::grid(3, 4, [Boundary::Periodic, Boundary::Open]).unwrap();
        let t = trotter_init(0.4, 2, &CouplingSet::tfxy(0.5, 1.0, 0.25)).unwrap();
        let a = build_variational(&t, &spec).unwrap();
        let b = build_variational(&t.to_site_resolved(&spec).unwrap(), &spec).unwrap();
        for (x, y) in a.gates.iter().zip(&b.gates) {
            assert_eq!((x.kind, &x.sites, x.theta), (y.kind, &y.sites, y.theta));
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            ParamTable::shared(Model::Tfim, 2, vec![0.0; 3]),
            Err(Error::ShapeMismatch(_))
        ));
        let spec = chain(6, Boundary::Open);
        let t = trotter_init(0.3, 1, &CouplingSet::tfim(1.0, 0.2)).unwrap();
        let site = t.to_site_resolved(&spec).unwrap();
        assert!(matches!(
            build_variational(&site, &chain(8, Boundary::Open)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    /// Literal ordered product of the term exponentials as an oracle.
    fn literal_trotter(spec: &LatticeSpec, c: &CouplingSet, tau: f64, m: usize) -> DenseOperator {
        let list = build_terms(spec, c).unwrap();
        let n = spec.n_sites();
        let cols = (0..1 << n)
            .map(|b| {
                let mut s = StateVector::basis(n, b);
                for _ in 0..m {
                    for t in &list.terms {
                        s.apply_gate(t.kind, &t.sites, tau * t.coeff / m as f64).unwrap();
                    }
                }
                s.into_amplitudes()
            })
            .collect();
        DenseOperator::from_columns(n, cols).unwrap()
    }

    fn spec_strategy() -> impl Strategy<Value = LatticeSpec> {
        let b = prop_oneof![Just(Boundary::Periodic), Just(Boundary::Open)];
        prop_oneof![
            (3usize..=10, b.clone()).prop_map(|(n, b)| LatticeSpec::chain(n, b).unwrap()),
            (2usize..=5, 2usize..=5, b.clone(), b).prop_filter_map("fits", |(w, h, bw, bh)| {
                (w * h <= 10).then(|| LatticeSpec::grid(w, h, [bw, bh]).ok()).flatten()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn trotter_equals_literal_product(
            spec in spec_strategy(),
            m in 1usize..=3,
            tau in 0.0f64..1.5,
            jz in -1.0f64..1.0,
            hx in 0.0f64..1.0,
        ) {
            let c = CouplingSet::tfim(jz, hx);
            let plan = build_trotter(tau, m, &spec, &c).unwrap();
            let u = circuit_unitary(&plan, spec.n_sites()).unwrap();
            prop_assert!(u.max_abs_diff(&literal_trotter(&spec, &c, tau, m)) < 1e-12);
        }

        #[test]
        fn formula_gate_count_matches_in_one_dimension(
            n in 3usize..40,
            m in 1usize..5,
            open in any::<bool>(),
        ) {
            let b = if open { Boundary::Open } else { Boundary::Periodic };
            let plan = build_trotter(0.1, m, &chain(n, b), &CouplingSet::tfim(1.0, 0.5)).unwrap();
            let s = gate_stats(&plan);
            prop_assert_eq!(Some(s.gates), s.gates_formula);
        }
    }
}
