//! Noise model, observable dynamics and the sweep runner.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_suzuki, build_trotter, build_variational, gate_stats, CircuitPlan, ParamTable, SuzukiOrder,
};
use crate::cost::{CostKind, Objective, SampleSet, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::lattice::{build_terms, term_layout, Boundary, CouplingSet, LatticeSpec, Model, TermList};
use crate::optimize::AdamConfig;
use crate::par;
use crate::statekit::{ExactEvolver, StateVector, N_DENSE_CAP};

/// Uniform per-gate fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub pg: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { pg: 0.999 }
    }
}

impl NoiseModel {
    pub fn new(pg: f64) -> Result<Self> {
        if pg > 0.0 && pg <= 1.0 {
            Ok(Self { pg })
        } else {
            Err(Error::Config(format!("gate fidelity {pg} outside (0, 1]")))
        }
    }

    /// Fidelity of `gates` gates in sequence.
    pub fn gate_fidelity(&self, gates: usize) -> f64 {
        self.pg.powf(gates as f64)
    }

    /// Infidelity from gate errors alone.
    pub fn floor(&self, gates: usize) -> f64 {
        1.0 - self.gate_fidelity(gates)
    }
}

/// `1 − F_approx · p_g^G` with `G` over all repetitions of `plan`.
pub fn nisq_infidelity(approx_fidelity: f64, plan: &CircuitPlan, noise: &NoiseModel) -> f64 {
    nisq_from_gates(approx_fidelity, gate_stats(plan).gates, noise)
}

pub fn nisq_from_gates(approx_fidelity: f64, gates: usize, noise: &NoiseModel) -> f64 {
    1.0 - approx_fidelity.clamp(0.0, 1.0) * noise.gate_fidelity(gates)
}

/// Product of Pauli Z on the given sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub sites: Vec<usize>,
}

impl Observable {
    pub fn z(sites: &[usize]) -> Self {
        Self { sites: sites.to_vec() }
    }

    /// Accepts `"Z8Z9"`, `"z8 z9"` or `"8,9"`.
    pub fn parse(s: &str) -> Result<Self> {
        let sites = s
            .split(|c: char| c == 'Z' || c == 'z' || c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad observable '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if sites.is_empty() {
            return Err(Error::Config(format!("empty observable '{s}'")));
        }
        Ok(Self { sites })
    }

    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if let Some(&s) = self.sites.iter().find(|&&s| s >= psi.n_qubits()) {
            return Err(Error::SiteOutOfRange {
                site: s,
                n_qubits: psi.n_qubits(),
            });
        }
        Ok(psi.expectation_z(&self.sites))
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.sites {
            write!(f, "Z{s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub approx: f64,
    pub exact: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Apply `plan` `steps` times, measuring after each application; the exact
/// reference advances by `tau` per step. Entry 0 is the initial state.
pub fn evolve_and_measure(
    plan: &CircuitPlan,
    terms: &TermList,
    psi0: &StateVector,
    steps: usize,
    tau: f64,
    observable: &Observable,
) -> Result<Vec<StepRecord>> {
    let evolver = ExactEvolver::new(terms)?;
    plan.check_qubits(psi0.n_qubits())?;
    let mut approx = psi0.clone();
    let mut exact = psi0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        if step > 0 {
            plan.apply(&mut approx)?;
            exact = evolver.evolve(&exact, tau)?;
        }
        let a = observable.expectation(&approx)?;
        let e = observable.expectation(&exact)?;
        let abs_err = (a - e).abs();
        out.push(StepRecord {
            step,
            time: step as f64 * tau,
            approx: a,
            exact: e,
            abs_err,
            rel_err: if e.abs() > 1e-12 { abs_err / e.abs() } else { abs_err },
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Frobenius,
    Sampled,
    Observable,
    Nisq,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Frobenius => "frobenius",
            Metric::Sampled => "sampled",
            Metric::Observable => "observable",
            Metric::Nisq => "nisq",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frobenius" => Ok(Metric::Frobenius),
            "sampled" => Ok(Metric::Sampled),
            "observable" => Ok(Metric::Observable),
            "nisq" => Ok(Metric::Nisq),
            _ => Err(Error::Config(format!("unknown metric '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Plus,
    Zero,
}

impl InitialState {
    pub fn state(self, n: usize) -> StateVector {
        match self {
            InitialState::Plus => StateVector::plus(n),
            InitialState::Zero => StateVector::zero(n),
        }
    }
}

/// Circuit evaluated at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CircuitSpec {
    Trotter {
        m: usize,
    },
    Suzuki {
        order: u32,
        #[serde(default = "one")]
        m: usize,
    },
    /// Shared angles from a parameter file.
    Variational,
}

impl CircuitSpec {
    pub fn label(&self) -> String {
        match self {
            CircuitSpec::Trotter { m } => format!("trotter_m{m}"),
            CircuitSpec::Suzuki { order, m } => format!("suzuki{order}_m{m}"),
            CircuitSpec::Variational => "variational".into(),
        }
    }

    /// Single-step plan on `spec`.
    pub fn plan(
        &self,
        spec: &LatticeSpec,
        couplings: &CouplingSet,
        tau: f64,
        params: Option<&ParamTable>,
    ) -> Result<CircuitPlan> {
        match self {
            CircuitSpec::Trotter { m } => build_trotter(tau, *m, spec, couplings),
            CircuitSpec::Suzuki { order, m } => build_suzuki(SuzukiOrder::new(*order)?, tau, *m, spec, couplings),
            CircuitSpec::Variational => {
                let p = params.ok_or_else(|| Error::Config("variational circuit needs parameters".into()))?;
                if p.model() != couplings.model {
                    return Err(Error::CouplingMismatch(format!(
                        "parameters for {}, couplings for {}",
                        p.model().label(),
                        couplings.model.label()
                    )));
                }
                build_variational(p, spec)
            }
        }
    }

    fn layers(&self, params: Option<&ParamTable>) -> usize {
        match self {
            CircuitSpec::Trotter { m } | CircuitSpec::Suzuki { m, .. } => *m,
            CircuitSpec::Variational => params.map_or(0, ParamTable::layers),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    Tau,
    Couplings,
    Reps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// Extents (`n`), time steps (`tau`) or repetition counts (`reps`).
    #[serde(default)]
    pub values: Vec<f64>,
    /// Coupling grid (`couplings`): every `jz` with every `hx`.
    #[serde(default)]
    pub jz: Vec<f64>,
    #[serde(default)]
    pub hx: Vec<f64>,
    /// Lattice axis resized by an `n` sweep; the last axis by default.
    #[serde(default)]
    pub lattice_axis: Option<usize>,
}

fn one() -> usize {
    1
}
fn default_m() -> usize {
    3
}
fn default_jz() -> f64 {
    1.0
}
fn default_hx() -> f64 {
    0.25
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_pg() -> f64 {
    0.999
}
fn default_model() -> Model {
    Model::Tfim
}

/// Experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_model")]
    pub model: Model,
    pub extents: Vec<usize>,
    pub boundary: Vec<Boundary>,
    #[serde(default = "default_jz")]
    pub jz: f64,
    #[serde(default = "default_hx")]
    pub hx: f64,
    #[serde(default)]
    pub jy: f64,
    pub tau: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Time steps per evaluation; total time is `reps · tau`.
    #[serde(default = "one")]
    pub reps: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_pg")]
    pub pg: f64,
    #[serde(default)]
    pub observable: Option<Vec<usize>>,
    #[serde(default)]
    pub initial: InitialState,
    /// Defaults to first-order Trotter with `m` layers.
    #[serde(default)]
    pub circuits: Vec<CircuitSpec>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Parameter file for variational circuits.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: Option<AdamConfig>,
}

/// One point of the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub spec: LatticeSpec,
    pub couplings: CouplingSet,
    pub tau: f64,
    pub reps: usize,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.extents.clone(), self.boundary.clone())
    }

    pub fn couplings(&self) -> CouplingSet {
        CouplingSet {
            model: self.model,
            jz: self.jz,
            hx: self.hx,
            jy: self.jy,
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.pg)
    }

    pub fn circuit_list(&self) -> Vec<CircuitSpec> {
        if self.circuits.is_empty() {
            vec![CircuitSpec::Trotter { m: self.m }]
        } else {
            self.circuits.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice()?;
        self.couplings().validate()?;
        self.noise()?;
        if !self.tau.is_finite() {
            return Err(Error::NonFinite("tau".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidTrotterNumber);
        }
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.samples < 1 || self.seeds.is_empty() {
            return Err(Error::Config("need at least one sample and one seed".into()));
        }
        for c in &self.circuits {
            match c {
                CircuitSpec::Trotter { m } | CircuitSpec::Suzuki { m, .. } if *m < 1 => {
                    return Err(Error::InvalidTrotterNumber)
                }
                CircuitSpec::Suzuki { order, .. } => {
                    SuzukiOrder::new(*order)?;
                }
                _ => {}
            }
        }
        if let Some(opt) = &self.optimizer {
            opt.validate()?;
        }
        if let Some(sw) = &self.sweep {
            let empty = match sw.axis {
                SweepAxis::Couplings => sw.jz.is_empty() || sw.hx.is_empty(),
                _ => sw.values.is_empty(),
            };
            if empty {
                return Err(Error::Config(format!("empty {:?} sweep grid", sw.axis)));
            }
        }
        self.grid().map(|_| ())
    }

    /// Grid points in sweep order; the base point without a sweep.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let spec = self.lattice()?;
        let couplings = self.couplings();
        let base = GridPoint {
            spec: spec.clone(),
            couplings,
            tau: self.tau,
            reps: self.reps,
        };
        let Some(sw) = &self.sweep else {
            return Ok(vec![base]);
        };
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{v} is not a positive integer")))
            }
        };
        match sw.axis {
            SweepAxis::N => {
                let axis = sw.lattice_axis.unwrap_or(spec.dim() - 1);
                if axis >= spec.dim() {
                    return Err(Error::Config(format!("lattice axis {axis} out of range")));
                }
                sw.values
                    .iter()
                    .map(|&v| {
                        Ok(GridPoint {
                            spec: spec.with_extent(axis, as_count(v)?)?,
                            ..base.clone()
                        })
                    })
                    .collect()
            }
            SweepAxis::Tau => Ok(sw.values.iter().map(|&tau| GridPoint { tau, ..base.clone() }).collect()),
            SweepAxis::Reps => sw
                .values
                .iter()
                .map(|&v| {
                    Ok(GridPoint {
                        reps: as_count(v)?,
                        ..base.clone()
                    })
                })
                .collect(),
            SweepAxis::Couplings => {
                let mut out = Vec::new();
                for &jz in &sw.jz {
                    for &hx in &sw.hx {
                        let c = CouplingSet { jz, hx, ..couplings };
                        c.validate()?;
                        out.push(GridPoint {
                            couplings: c,
                            ..base.clone()
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Column order of the sweep CSV.
pub const CSV_HEADER: &str = "model,d,extents,boundary,Jz,hx,Jy,tau,m,reps,N,metric,value,G,D,pg,seed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub d: usize,
    pub extents: String,
    pub boundary: String,
    #[serde(rename = "Jz")]
    pub jz: f64,
    pub hx: f64,
    #[serde(rename = "Jy")]
    pub jy: f64,
    pub tau: f64,
    pub m: usize,
    pub reps: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// `<circuit>:<quantity>`, e.g. `trotter_m3:frobenius`.
    pub metric: String,
    pub value: f64,
    #[serde(rename = "G")]
    pub gates: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub pg: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub point: String,
    pub message: String,
}

/// Unweighted least-squares line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual standard deviation.
    pub sigma: f64,
    pub points: usize,
    pub x_max: f64,
}

impl LinearFit {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} x values, {} y values",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len();
        if n < 3 {
            return Err(Error::Config(format!("a fit needs at least 3 points, got {n}")));
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::Config("fit needs at least two distinct x values".into()));
        }
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        Ok(Self {
            slope,
            intercept,
            sigma: (ssr / (n - 2) as f64).sqrt(),
            points: n,
            x_max: xs.iter().copied().fold(f64::MIN, f64::max),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NisqProjection {
    pub n_sites: usize,
    pub approx_cost: f64,
    pub f_approx: f64,
    pub gates: usize,
    pub f_gates: f64,
    pub infidelity: f64,
    pub noise_floor: f64,
    /// Target more than five times the largest fitted size.
    pub beyond_fit_range: bool,
}

/// Project a fitted cost-versus-size line to `target` with `m` layers.
pub fn extrapolate_nisq(
    fit: &LinearFit,
    target: &LatticeSpec,
    model: Model,
    m: usize,
    noise: &NoiseModel,
) -> Result<NisqProjection> {
    target.validate()?;
    let gates = m * term_layout(target, model).len();
    Ok(extrapolate_nisq_gates(fit, target.n_sites(), gates, noise))
}

/// Projection for a circuit of `gates` gates on `n_sites` sites.
pub fn extrapolate_nisq_gates(fit: &LinearFit, n_sites: usize, gates: usize, noise: &NoiseModel) -> NisqProjection {
    let cost = fit.eval(n_sites as f64);
    let f_approx = (1.0 - cost).clamp(0.0, 1.0);
    let beyond = n_sites as f64 > 5.0 * fit.x_max;
    if beyond {
        log::warn!("extrapolating to {n_sites} sites from fits up to {}", fit.x_max);
    }
    NisqProjection {
        n_sites,
        approx_cost: cost,
        f_approx,
        gates,
        f_gates: noise.gate_fidelity(gates),
        infidelity: nisq_from_gates(f_approx, gates, noise),
        noise_floor: noise.floor(gates),
        beyond_fit_range: beyond,
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<SweepFailure>,
    /// Per-metric fits against `N` when the grid has three or more sizes.
    pub fits: BTreeMap<String, LinearFit>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rows whose metric is `metric`.
    pub fn series(&self, metric: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }
}

/// Evaluate every grid point, circuit and (for sampled metrics) seed.
///
/// Points run in parallel; rows come out in grid order, then circuit, then
/// seed. A failing point or circuit is recorded and the sweep continues.
pub fn run_sweep(cfg: &ExperimentConfig, params: Option<&ParamTable>) -> Result<SweepReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let circuits = cfg.circuit_list();
    let seeds: &[u64] = match cfg.metric {
        Metric::Sampled | Metric::Nisq => &cfg.seeds,
        Metric::Frobenius | Metric::Observable => &cfg.seeds[..1],
    };
    let tasks: Vec<(&GridPoint, u64)> = grid.iter().flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let results = par::map_slice(&tasks, |_, &(point, seed)| {
        evaluate_point(cfg, point, &circuits, seed, params)
    });
    let mut report = SweepReport::default();
    let mut index = 0;
    for ((point, _), per_circuit) in tasks.iter().zip(results) {
        for (circuit, res) in circuits.iter().zip(per_circuit) {
            match res {
                Ok(rows) => report.rows.extend(rows),
                Err(e) => {
                    log::warn!("grid point {index} failed: {e}");
                    report.failures.push(SweepFailure {
                        index,
                        point: format!(
                            "{} {} tau={} reps={}",
                            circuit.label(),
                            point.spec,
                            point.tau,
                            point.reps
                        ),
                        message: e.to_string(),
                    });
                }
            }
            index += 1;
        }
    }
    if matches!(cfg.sweep.as_ref().map(|s| s.axis), Some(SweepAxis::N)) {
        let mut series: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &report.rows {
            let e = series.entry(r.metric.clone()).or_default();
            e.0.push(r.n as f64);
            e.1.push(r.value);
        }
        for (metric, (xs, ys)) in series {
            if let Ok(fit) = LinearFit::fit(&xs, &ys) {
                report.fits.insert(metric, fit);
            }
        }
    }
    Ok(report)
}

/// Exact-side data shared by every circuit at one grid point.
struct PointContext {
    terms: TermList,
    sampled: Option<Objective>,
    frobenius: Option<Objective>,
}

impl PointContext {
    fn new(cfg: &ExperimentConfig, point: &GridPoint, seed: u64) -> Result<Self> {
        let terms = build_terms(&point.spec, &point.couplings)?;
        let n = terms.n_sites();
        let total = point.tau * point.reps as f64;
        let frob = || Objective::fixed(CostKind::Frobenius, CircuitPlan::empty(), &terms, total, None);
        let samp = || {
            let samples = SampleSet::haar(n, cfg.samples, seed);
            Objective::fixed(CostKind::Sampled, CircuitPlan::empty(), &terms, total, Some(&samples))
        };
        let (sampled, frobenius) = match cfg.metric {
            Metric::Frobenius => (None, Some(frob()?)),
            Metric::Sampled => (Some(samp()?), None),
            Metric::Nisq => (Some(samp()?), if n <= N_DENSE_CAP { Some(frob()?) } else { None }),
            Metric::Observable => (None, None),
        };
        Ok(Self {
            terms,
            sampled,
            frobenius,
        })
    }
}

/// Rows of one grid point and seed, one entry per circuit.
pub fn evaluate_point(
    cfg: &ExperimentConfig,
    point: &GridPoint,
    circuits: &[CircuitSpec],
    seed: u64,
    params: Option<&ParamTable>,
) -> Vec<Result<Vec<ResultRow>>> {
    match PointContext::new(cfg, point, seed) {
        Ok(ctx) => circuits
            .iter()
            .map(|c| evaluate_circuit(cfg, point, &ctx, c, seed, params))
            .collect(),
        Err(e) => {
            let msg = e.to_string();
            let mut out = vec![Err(e)];
            out.extend((1..circuits.len()).map(|_| Err(Error::Config(msg.clone()))));
            out
        }
    }
}

fn evaluate_circuit(
    cfg: &ExperimentConfig,
    point: &GridPoint,
    ctx: &PointContext,
    circuit: &CircuitSpec,
    seed: u64,
    params: Option<&ParamTable>,
) -> Result<Vec<ResultRow>> {
    let spec = &point.spec;
    let n = spec.n_sites();
    let step = circuit.plan(spec, &point.couplings, point.tau, params)?;
    let plan = step.clone().with_reps(point.reps);
    let stats = gate_stats(&plan);
    let label = circuit.label();
    let row = |metric: &str, value: f64, reps: usize, gates: usize, depth: usize| -> Result<ResultRow> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{label}:{metric}")));
        }
        Ok(ResultRow {
            model: point.couplings.model.label().to_string(),
            d: spec.dim(),
            extents: spec.extents_label(),
            boundary: spec.boundary_label(),
            jz: point.couplings.jz,
            hx: point.couplings.hx,
            jy: point.couplings.jy,
            tau: point.tau,
            m: circuit.layers(params),
            reps,
            n,
            metric: format!("{label}:{metric}"),
            value,
            gates,
            depth,
            pg: cfg.pg,
            seed,
        })
    };
    let full = |metric: &str, value: f64| row(metric, value, point.reps, stats.gates, stats.depth_measured);
    let mut rows = Vec::new();
    match cfg.metric {
        Metric::Frobenius => {
            let obj = ctx.frobenius.as_ref().expect("built for this metric");
            rows.push(full("frobenius", obj.value_of(&plan)?)?);
        }
        Metric::Sampled => {
            let obj = ctx.sampled.as_ref().expect("built for this metric");
            rows.push(full("sampled", obj.value_of(&plan)?)?);
        }
        Metric::Nisq => {
            let noise = cfg.noise()?;
            let f = ctx
                .sampled
                .as_ref()
                .expect("built for this metric")
                .fidelity_of(&plan)?;
            rows.push(full("sampled", 1.0 - f)?);
            rows.push(full("f_approx", f)?);
            rows.push(full("f_gates", noise.gate_fidelity(stats.gates))?);
            rows.push(full("nisq_infidelity", nisq_from_gates(f, stats.gates, &noise))?);
            rows.push(full("noise_floor", noise.floor(stats.gates))?);
            let approx_infidelity = match &ctx.frobenius {
                Some(obj) => {
                    let ff = obj.fidelity_of(&plan)?;
                    rows.push(full("frobenius", obj.value_of(&plan)?)?);
                    rows.push(full("f_approx_frobenius", ff)?);
                    1.0 - ff
                }
                None => 1.0 - f,
            };
            rows.push(full("approx_infidelity", approx_infidelity)?);
        }
        Metric::Observable => {
            let sites = cfg.observable.clone().unwrap_or_else(|| vec![n / 2, (n / 2 + 1) % n]);
            let obs = Observable::z(&sites);
            let psi0 = cfg.initial.state(n);
            let records = evolve_and_measure(&step, &ctx.terms, &psi0, point.reps, point.tau, &obs)?;
            let g1 = gate_stats(&step);
            for r in &records {
                let (g, d) = (g1.gates * r.step, g1.depth_measured * r.step);
                rows.push(row("obs_approx", r.approx, r.step, g, d)?);
                rows.push(row("obs_exact", r.exact, r.step, g, d)?);
                rows.push(row("obs_abs_err", r.abs_err, r.step, g, d)?);
                rows.push(row("obs_rel_err", r.rel_err, r.step, g, d)?);
            }
        }
    }
    Ok(rows)
}
