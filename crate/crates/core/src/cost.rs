//! Cost functions comparing a circuit with the exact propagator, and their
//! gradients.
//!
//! Both costs reduce to overlaps `z_k = ⟨t_k|U_var|s_k⟩` over a set of
//! (input, target) pairs:
//!
//! * Frobenius: inputs are the eigenvectors `v_k` of `H` and targets
//!   `e^{-iλ_k τ} v_k`, so `Σ z_k = Tr(U_ex† U_var)` and
//!   `C = 2 − (2/2^N) Re Σ z_k`.
//! * Sampled: inputs are random states `ψ_k`, targets `U_ex ψ_k`, and
//!   `C = (1/|V|) Σ (1 − |z_k|)`.
//!
//! Gradients use one backward sweep per pair. Per-pair results are reduced
//! in index order, so values do not depend on the number of workers.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::circuit::{build_variational, CircuitPlan, ParamTable};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, TermList};
use crate::par;
use crate::statekit::{kernels, DenseOperator, ExactEvolver, Spectrum, StateVector, N_DENSE_CAP};

pub const DEFAULT_SAMPLES: usize = 20;
pub const FD_STEP: f64 = 1e-6;

/// Haar-random input states, reproducible from `(seed, count, N)`.
#[derive(Clone, Debug)]
pub struct SampleSet {
    seed: u64,
    states: Vec<StateVector>,
}

impl SampleSet {
    pub fn haar(n_qubits: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1usize << n_qubits;
        let states = (0..count)
            .map(|_| {
                let amps = (0..dim)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        C64::new(re, im)
                    })
                    .collect();
                let mut s = StateVector::from_amplitudes(amps).expect("power of two");
                s.normalize();
                s
            })
            .collect();
        Self { seed, states }
    }

    pub fn from_states(states: Vec<StateVector>) -> Self {
        Self { seed: 0, states }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Frobenius,
    Sampled,
}

impl CostKind {
    pub fn label(self) -> &'static str {
        match self {
            CostKind::Frobenius => "frobenius",
            CostKind::Sampled => "sampled",
        }
    }
}

impl std::str::FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(CostKind::Frobenius),
            "sampled" => Ok(CostKind::Sampled),
            _ => Err(Error::Config(format!("unknown cost kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub value: f64,
    pub kind: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
    /// Circuit simulations performed to produce this report.
    pub evaluations: usize,
}

/// `(1/2^N) ‖U_var − U_ex‖_F²` through the trace identity.
pub fn frobenius_cost(u_var: &DenseOperator, u_ex: &DenseOperator) -> Result<CostReport> {
    let tr = u_ex.trace_adjoint_product(u_var)?;
    Ok(CostReport {
        value: 2.0 - 2.0 * tr.re / u_var.dim() as f64,
        kind: CostKind::Frobenius,
        samples: None,
        seed: None,
        gradient: None,
        evaluations: 0,
    })
}

/// Same quantity as [`frobenius_cost`], accumulated from entry differences.
/// The trace form loses everything below ~1e-16; this one does not.
pub fn frobenius_cost_entrywise(u_var: &DenseOperator, u_ex: &DenseOperator) -> Result<CostReport> {
    Ok(CostReport {
        value: u_var.distance_sqr(u_ex)? / u_var.dim() as f64,
        ..frobenius_cost(u_var, u_ex)?
    })
}

/// Sampled overlap cost of an arbitrary plan.
pub fn sampled_cost(plan: &CircuitPlan, terms: &TermList, tau: f64, samples: &SampleSet) -> Result<CostReport> {
    let obj = Objective::sampled(plan.clone(), 0, terms, tau, samples)?;
    obj.report(&[], false)
}

/// `2 κ ‖O‖ ‖U_var − U_ex‖_F`.
pub fn observable_error_bound(frob_distance: f64, op_norm: f64, kappa: f64) -> f64 {
    2.0 * kappa * op_norm * frob_distance
}

/// Frobenius distance `‖U_var − U_ex‖_F = sqrt(2^N C)` from a cost value.
pub fn frobenius_distance(cost: f64, n_qubits: usize) -> f64 {
    ((1u64 << n_qubits) as f64 * cost.max(0.0)).sqrt()
}

enum Pairs {
    Eigen {
        spectrum: Spectrum,
        tau: f64,
    },
    Samples {
        inputs: Vec<StateVector>,
        targets: Vec<StateVector>,
        seed: u64,
    },
}

/// A cost function over the parameters of a plan template.
pub struct Objective {
    kind: CostKind,
    plan: CircuitPlan,
    n_params: usize,
    n_qubits: usize,
    pairs: Pairs,
}

impl Objective {
    pub fn frobenius(plan: CircuitPlan, n_params: usize, terms: &TermList, tau: f64) -> Result<Self> {
        let n = terms.n_sites();
        if n > N_DENSE_CAP {
            return Err(Error::CapExceeded {
                what: "frobenius cost",
                n_qubits: n,
                cap: N_DENSE_CAP,
            });
        }
        plan.check_qubits(n)?;
        Ok(Self {
            kind: CostKind::Frobenius,
            plan,
            n_params,
            n_qubits: n,
            pairs: Pairs::Eigen {
                spectrum: Spectrum::new(terms)?,
                tau,
            },
        })
    }

    pub fn sampled(
        plan: CircuitPlan,
        n_params: usize,
        terms: &TermList,
        tau: f64,
        samples: &SampleSet,
    ) -> Result<Self> {
        let n = terms.n_sites();
        plan.check_qubits(n)?;
        if samples.is_empty() {
            return Err(Error::Config("empty sample set".into()));
        }
        if let Some(s) = samples.states().iter().find(|s| s.n_qubits() != n) {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit sample for {n}-qubit system",
                s.n_qubits()
            )));
        }
        let evolver = ExactEvolver::new(terms)?;
        let targets = par::map_slice(samples.states(), |_, s| evolver.evolve(s, tau))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: CostKind::Sampled,
            plan,
            n_params,
            n_qubits: n,
            pairs: Pairs::Samples {
                inputs: samples.states().to_vec(),
                targets,
                seed: samples.seed(),
            },
        })
    }

    /// Objective over the angles of `table` laid out on `spec`.
    pub fn variational(
        kind: CostKind,
        table: &ParamTable,
        spec: &LatticeSpec,
        terms: &TermList,
        tau: f64,
        samples: Option<&SampleSet>,
    ) -> Result<Self> {
        let plan = build_variational(table, spec)?;
        Self::with_kind(kind, plan, table.len(), terms, tau, samples)
    }

    pub fn with_kind(
        kind: CostKind,
        plan: CircuitPlan,
        n_params: usize,
        terms: &TermList,
        tau: f64,
        samples: Option<&SampleSet>,
    ) -> Result<Self> {
        match kind {
            CostKind::Frobenius => Self::frobenius(plan, n_params, terms, tau),
            CostKind::Sampled => {
                let owned;
                let samples = match samples {
                    Some(s) => s,
                    None => {
                        owned = SampleSet::haar(terms.n_sites(), DEFAULT_SAMPLES, 0);
                        &owned
                    }
                };
                Self::sampled(plan, n_params, terms, tau, samples)
            }
        }
    }

    /// Objective of a plan whose angles stay as they are.
    pub fn fixed(
        kind: CostKind,
        mut plan: CircuitPlan,
        terms: &TermList,
        tau: f64,
        samples: Option<&SampleSet>,
    ) -> Result<Self> {
        for g in &mut plan.gates {
            g.param = None;
        }
        Self::with_kind(kind, plan, 0, terms, tau, samples)
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn plan(&self) -> &CircuitPlan {
        &self.plan
    }

    fn pair_count(&self) -> usize {
        match &self.pairs {
            Pairs::Eigen { spectrum, .. } => spectrum.eigen_count(),
            Pairs::Samples { inputs, .. } => inputs.len(),
        }
    }

    /// Run `f(input, target)` on pair `k`.
    fn with_pair<R>(&self, k: usize, f: impl FnOnce(&StateVector, &StateVector) -> R) -> R {
        match &self.pairs {
            Pairs::Eigen { spectrum, tau } => {
                let (energy, v) = spectrum.eigenpair(k);
                let mut t = v.clone();
                t.scale(C64::from_polar(1.0, -energy * tau));
                f(&v, &t)
            }
            Pairs::Samples { inputs, targets, .. } => f(&inputs[k], &targets[k]),
        }
    }

    fn bound_plan(&self, params: &[f64]) -> Result<CircuitPlan> {
        if params.len() != self.n_params {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for an objective over {}",
                params.len(),
                self.n_params
            )));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        let mut plan = self.plan.clone();
        plan.bind(params);
        Ok(plan)
    }

    fn overlaps(&self, plan: &CircuitPlan) -> Vec<C64> {
        par::map_range(self.pair_count(), |k| {
            self.with_pair(k, |input, target| {
                let mut phi = input.clone();
                plan.apply_unchecked(&mut phi);
                target.inner(&phi)
            })
        })
    }

    fn combine(&self, z: &[C64]) -> f64 {
        match self.kind {
            CostKind::Frobenius => {
                let sum: C64 = z.iter().copied().fold(C64::new(0.0, 0.0), |a, b| a + b);
                2.0 - 2.0 * sum.re / (1u64 << self.n_qubits) as f64
            }
            CostKind::Sampled => z.iter().map(|v| 1.0 - v.norm()).sum::<f64>() / z.len() as f64,
        }
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        let plan = self.bound_plan(params)?;
        self.value_of(&plan)
    }

    /// Cost of an arbitrary plan against the same input and target states.
    pub fn value_of(&self, plan: &CircuitPlan) -> Result<f64> {
        plan.check_qubits(self.n_qubits)?;
        finite(self.combine(&self.overlaps(plan)), "cost")
    }

    /// Phase-insensitive fidelity: `|Tr(U_ex†U_var)|/2^N` (Frobenius) or
    /// the mean sample overlap modulus (sampled).
    pub fn fidelity(&self, params: &[f64]) -> Result<f64> {
        let plan = self.bound_plan(params)?;
        self.fidelity_of(&plan)
    }

    pub fn fidelity_of(&self, plan: &CircuitPlan) -> Result<f64> {
        plan.check_qubits(self.n_qubits)?;
        let z = self.overlaps(plan);
        let f = match self.kind {
            CostKind::Frobenius => {
                let sum: C64 = z.iter().copied().fold(C64::new(0.0, 0.0), |a, b| a + b);
                sum.norm() / (1u64 << self.n_qubits) as f64
            }
            CostKind::Sampled => z.iter().map(|v| v.norm()).sum::<f64>() / z.len() as f64,
        };
        finite(f.min(1.0), "fidelity")
    }

    /// Cost and adjoint-mode gradient.
    pub fn value_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let plan = self.bound_plan(params)?;
        let per_pair = par::map_range(self.pair_count(), |k| {
            self.with_pair(k, |input, target| backward_sweep(&plan, self.n_params, input, target))
        });
        let z: Vec<C64> = per_pair.iter().map(|(z, _)| *z).collect();
        let value = finite(self.combine(&z), "cost")?;
        let mut grad = vec![0.0; self.n_params];
        let pairs = z.len() as f64;
        let norm = (1u64 << self.n_qubits) as f64;
        for (z, dz) in &per_pair {
            match self.kind {
                CostKind::Frobenius => {
                    for (g, d) in grad.iter_mut().zip(dz) {
                        *g -= 2.0 * d.re / norm;
                    }
                }
                CostKind::Sampled => {
                    let mag = z.norm();
                    if mag > 0.0 {
                        for (g, d) in grad.iter_mut().zip(dz) {
                            *g -= (z.conj() * d).re / mag / pairs;
                        }
                    }
                }
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        Ok((value, grad))
    }

    /// Central finite differences with step `h`.
    pub fn gradient_fd(&self, params: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut p = params.to_vec();
        let mut grad = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            p[i] = params[i] + h;
            let up = self.value(&p)?;
            p[i] = params[i] - h;
            let down = self.value(&p)?;
            p[i] = params[i];
            grad.push((up - down) / (2.0 * h));
        }
        Ok(grad)
    }

    pub fn report(&self, params: &[f64], with_gradient: bool) -> Result<CostReport> {
        let (value, gradient) = if with_gradient {
            let (v, g) = self.value_and_gradient(params)?;
            (v, Some(g))
        } else {
            (self.value(params)?, None)
        };
        let (samples, seed) = match &self.pairs {
            Pairs::Eigen { .. } => (None, None),
            Pairs::Samples { inputs, seed, .. } => (Some(inputs.len()), Some(*seed)),
        };
        Ok(CostReport {
            value,
            kind: self.kind,
            samples,
            seed,
            gradient,
            evaluations: self.pair_count(),
        })
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Overlap `z = ⟨target|U|input⟩` and `dz/dθ_p` for every parameter.
fn backward_sweep(plan: &CircuitPlan, n_params: usize, input: &StateVector, target: &StateVector) -> (C64, Vec<C64>) {
    let mut phi = input.clone();
    plan.apply_unchecked(&mut phi);
    let z = target.inner(&phi);
    let mut mu = target.clone();
    let mut dz = vec![C64::new(0.0, 0.0); n_params];
    for _ in 0..plan.reps {
        for g in plan.gates.iter().rev() {
            let (a, b) = g.qubits();
            if let Some(p) = g.param {
                dz[p] += kernels::derivative_overlap(mu.amplitudes(), phi.amplitudes(), g.kind, a, b);
            }
            phi.apply_raw(g.kind, a, b, -g.theta);
            mu.apply_raw(g.kind, a, b, -g.theta);
        }
    }
    (z, dz)
}
