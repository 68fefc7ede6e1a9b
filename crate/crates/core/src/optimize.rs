//! Adam descent over a parameter vector, returning the best iterate seen.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::ParamTable;
use crate::cost::{CostKind, Objective};
use crate::error::{Error, Result};
use crate::lattice::CouplingSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub window: usize,
    pub rel_tol: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            window: 200,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_steps: usize,
    pub early_stop: Option<EarlyStop>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            max_steps: 10_000,
            early_stop: None,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.max_steps >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    EarlyStop,
    NonFinite(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// Cost at every visited iterate, starting with the initial point.
    pub costs: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    /// Adam updates performed.
    pub steps: usize,
    pub wall_time_s: f64,
    pub termination: Termination,
}

impl OptimizationTrace {
    pub fn initial_cost(&self) -> f64 {
        self.costs[0]
    }
}

/// Minimize with Adam. `value_and_grad` returns the cost and its gradient.
///
/// A non-finite cost or gradient after the first evaluation ends the run
/// early; the trace up to that point is returned with
/// [`Termination::NonFinite`].
pub fn optimize<F>(params0: &[f64], mut value_and_grad: F, cfg: &AdamConfig) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let start = Instant::now();
    let mut theta = params0.to_vec();
    let (c0, mut grad) = value_and_grad(&theta)?;
    if !c0.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("initial cost or gradient".into()));
    }
    let n = theta.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut costs = vec![c0];
    let mut best_cost = c0;
    let mut best_params = theta.clone();
    let mut termination = Termination::MaxSteps;
    let mut steps = 0;

    for t in 1..=cfg.max_steps {
        let b1 = 1.0 - cfg.beta1.powi(t as i32);
        let b2 = 1.0 - cfg.beta2.powi(t as i32);
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            theta[i] -= cfg.lr * (m[i] / b1) / ((v[i] / b2).sqrt() + cfg.eps);
        }
        steps = t;
        let (c, g) = match value_and_grad(&theta) {
            Ok(r) => r,
            Err(Error::NonFinite(what)) => {
                termination = Termination::NonFinite(what);
                break;
            }
            Err(e) => return Err(e),
        };
        if !c.is_finite() || g.iter().any(|x| !x.is_finite()) {
            termination = Termination::NonFinite(format!("step {t}"));
            break;
        }
        costs.push(c);
        grad = g;
        if c < best_cost {
            best_cost = c;
            best_params.copy_from_slice(&theta);
        }
        if let Some(es) = &cfg.early_stop {
            if costs.len() > es.window {
                let old = costs[costs.len() - 1 - es.window];
                if (old - c) <= es.rel_tol * old.abs() {
                    termination = Termination::EarlyStop;
                    break;
                }
            }
        }
    }
    Ok(OptimizationTrace {
        costs,
        best_params,
        best_cost,
        steps,
        wall_time_s: start.elapsed().as_secs_f64(),
        termination,
    })
}

/// Optimize the angles of `table` against `objective`.
pub fn train(objective: &Objective, table: &ParamTable, cfg: &AdamConfig) -> Result<(ParamTable, OptimizationTrace)> {
    if objective.n_params() != table.len() {
        return Err(Error::ShapeMismatch(format!(
            "objective over {} parameters, table of {}",
            objective.n_params(),
            table.len()
        )));
    }
    let trace = optimize(table.values(), |p| objective.value_and_gradient(p), cfg)?;
    let mut out = table.clone();
    out.set_values(&trace.best_params)?;
    Ok((out, trace))
}

/// Optimization output consumed by upscaling and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultArtifact {
    #[serde(flatten)]
    pub params: ParamTable,
    pub couplings: CouplingSet,
    pub cost_kind: CostKind,
    pub cost_initial: f64,
    pub cost_trace_final: f64,
    pub steps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl ResultArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::trotter_init;
    use crate::lattice::{build_terms, Boundary, LatticeSpec};
    use proptest::prelude::*;

    #[test]
    fn quadratic_converges() {
        let cfg = AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        };
        let tr = optimize(&[0.0], |p| Ok(((p[0] - 2.0).powi(2), vec![2.0 * (p[0] - 2.0)])), &cfg).unwrap();
        assert!((tr.best_params[0] - 2.0).abs() < 0.05, "{}", tr.best_params[0]);
        assert_eq!(tr.steps, 10_000);
        assert_eq!(tr.termination, Termination::MaxSteps);
    }

    #[test]
    fn quadratic_with_default_rate_moves_toward_minimum() {
        // At lr = 1e-4 Adam moves at most ~1e-4 per step, so 1e4 steps
        // cover about one unit of the distance.
        let tr = optimize(
            &[0.0],
            |p| Ok(((p[0] - 2.0).powi(2), vec![2.0 * (p[0] - 2.0)])),
            &AdamConfig::default(),
        )
        .unwrap();
        assert!(tr.best_params[0] > 0.9 && tr.best_params[0] < 2.0);
    }

    #[test]
    fn non_finite_stops_with_trace() {
        let cfg = AdamConfig {
            lr: 0.1,
            max_steps: 50,
            ..AdamConfig::default()
        };
        let tr = optimize(
            &[1.0],
            |p| {
                if p[0] < 0.5 {
                    Ok((f64::NAN, vec![0.0]))
                } else {
                    Ok((p[0], vec![1.0]))
                }
            },
            &cfg,
        )
        .unwrap();
        assert!(matches!(tr.termination, Termination::NonFinite(_)));
        assert!(tr.costs.iter().all(|c| c.is_finite()));
        assert!(tr.best_cost >= 0.5);
    }

    #[test]
    fn early_stop_on_plateau() {
        let cfg = AdamConfig {
            early_stop: Some(EarlyStop::default()),
            ..AdamConfig::default()
        };
        let tr = optimize(&[0.0, 0.0], |_| Ok((1.0, vec![0.0, 0.0])), &cfg).unwrap();
        assert_eq!(tr.termination, Termination::EarlyStop);
        assert_eq!(tr.steps, 200);
    }

    #[test]
    fn exact_start_stays_put() {
        let spec = LatticeSpec::chain(4, Boundary::Periodic).unwrap();
        let c = CouplingSet::tfim(1.0, 0.0);
        let terms = build_terms(&spec, &c).unwrap();
        let table = trotter_init(0.3, 2, &c).unwrap();
        let obj = Objective::variational(CostKind::Frobenius, &table, &spec, &terms, 0.3, None).unwrap();
        let cfg = AdamConfig {
            max_steps: 200,
            ..AdamConfig::default()
        };
        let (out, tr) = train(&obj, &table, &cfg).unwrap();
        assert!(tr.best_cost < 1e-12);
        for (a, b) in out.values().iter().zip(table.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn artifact_round_trip() {
        let c = CouplingSet::tfim(1.0, 0.25);
        let mut params = trotter_init(0.3, 3, &c).unwrap();
        params.lattice = Some(LatticeSpec::chain(6, Boundary::Periodic).unwrap());
        let art = ResultArtifact {
            params,
            couplings: c,
            cost_kind: CostKind::Frobenius,
            cost_initial: 1e-3,
            cost_trace_final: 1e-6,
            steps: 10,
            seed: 7,
            samples: None,
        };
        let s = art.to_json().unwrap();
        assert!(s.contains("\"theta\"") && s.contains("\"mode\": \"shared\""));
        assert_eq!(ResultArtifact::from_json(&s).unwrap(), art);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn best_never_worse_than_start(x0 in -5.0f64..5.0, lr in 1e-4f64..1.0) {
            let cfg = AdamConfig { lr, max_steps: 100, ..AdamConfig::default() };
            let f = |p: &[f64]| Ok(((p[0] * 3.0).sin() + 0.1 * p[0] * p[0], vec![3.0 * (p[0] * 3.0).cos() + 0.2 * p[0]]));
            let a = optimize(&[x0], f, &cfg).unwrap();
            prop_assert!(a.best_cost <= a.initial_cost());
            let b = optimize(&[x0], f, &cfg).unwrap();
            prop_assert_eq!(a.costs, b.costs);
        }
    }
}
