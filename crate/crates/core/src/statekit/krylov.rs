//! Lanczos approximation of `exp(-iHτ)|ψ⟩` with adaptive sub-stepping.
//!
//! Up to [`STORED_BASIS_MAX_QUBITS`] qubits the Krylov basis is kept and
//! fully reorthogonalized. Above that a two-pass scheme is used: the first
//! pass runs the three-term recurrence to find the tridiagonal matrix and
//! the step's coefficients, the second regenerates the basis vectors on the
//! fly and accumulates the result, so only three state-sized buffers live at
//! any time.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::hamiltonian::SparseHamiltonian;
use super::kernels;
use super::state::StateVector;
use super::N_KRYLOV_CAP;
use crate::error::{Error, Result};
use crate::lattice::TermList;

pub const STORED_BASIS_MAX_QUBITS: usize = 20;

#[derive(Clone, Debug)]
pub struct KrylovConfig {
    pub max_dim: usize,
    /// Sub-steps are sized so that `Σ|c| · |dt|` stays below this.
    pub step_norm: f64,
    /// A-posteriori error target per sub-step.
    pub tol: f64,
    pub max_substeps: usize,
    /// Allowed drift of the output norm.
    pub norm_tol: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_dim: 40,
            step_norm: 10.0,
            tol: 1e-12,
            max_substeps: 10_000,
            norm_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExactEvolver {
    h: SparseHamiltonian,
    cfg: KrylovConfig,
    store_basis: bool,
}

impl ExactEvolver {
    pub fn new(list: &TermList) -> Result<Self> {
        Self::with_config(list, KrylovConfig::default())
    }

    pub fn with_config(list: &TermList, cfg: KrylovConfig) -> Result<Self> {
        let n = list.n_sites();
        if n > N_KRYLOV_CAP {
            return Err(Error::CapExceeded {
                what: "Krylov propagation",
                n_qubits: n,
                cap: N_KRYLOV_CAP,
            });
        }
        Ok(Self {
            h: SparseHamiltonian::new(list)?,
            cfg,
            store_basis: n <= STORED_BASIS_MAX_QUBITS,
        })
    }

    /// Force the two-pass (or stored-basis) variant, mainly for tests.
    pub fn two_pass(mut self, on: bool) -> Self {
        self.store_basis = !on;
        self
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.h
    }

    pub fn n_qubits(&self) -> usize {
        self.h.n_qubits()
    }

    /// `exp(-iHτ)|ψ⟩`.
    pub fn evolve(&self, psi: &StateVector, tau: f64) -> Result<StateVector> {
        if psi.n_qubits() != self.h.n_qubits() {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit state, {}-qubit Hamiltonian",
                psi.n_qubits(),
                self.h.n_qubits()
            )));
        }
        if !tau.is_finite() {
            return Err(Error::NonFinite("evolution time".into()));
        }
        let norm_in = psi.norm();
        let mut cur = psi.amplitudes().to_vec();
        if tau == 0.0 || norm_in == 0.0 {
            return StateVector::from_amplitudes(cur);
        }

        let bound = self.h.norm_bound().max(f64::MIN_POSITIVE);
        let mut dt = tau.abs().min(self.cfg.step_norm / bound);
        let dir = tau.signum();
        let mut done = 0.0;
        let mut substeps = 0;
        let mut scratch = Scratch::new(cur.len());
        while tau.abs() - done > tau.abs() * 1e-14 {
            if substeps >= self.cfg.max_substeps {
                return Err(Error::KrylovNotConverged { substeps });
            }
            substeps += 1;
            let step = dt.min(tau.abs() - done);
            let ok = if self.store_basis {
                self.step_stored(&mut cur, dir * step, &mut scratch)
            } else {
                self.step_two_pass(&mut cur, dir * step, &mut scratch)
            };
            if ok {
                done += step;
            } else {
                dt *= 0.5;
            }
        }
        let out = StateVector::from_amplitudes(cur)?;
        let drift = (out.norm() - norm_in).abs();
        if drift > self.cfg.norm_tol {
            return Err(Error::KrylovNorm(drift));
        }
        Ok(out)
    }

    fn step_stored(&self, cur: &mut [C64], dt: f64, s: &mut Scratch) -> bool {
        let beta0 = kernels::norm_sqr(cur).sqrt();
        let mut basis: Vec<Vec<C64>> = vec![cur.iter().map(|a| a / beta0).collect()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for j in 0..self.cfg.max_dim {
            self.h.apply(&basis[j], &mut s.w);
            let alpha = kernels::inner(&basis[j], &s.w).re;
            alphas.push(alpha);
            axpy(&mut s.w, -alpha, &basis[j]);
            if j > 0 {
                axpy(&mut s.w, -betas[j - 1], &basis[j - 1]);
            }
            for v in &basis {
                let c = kernels::inner(v, &s.w);
                for (w, &x) in s.w.iter_mut().zip(v) {
                    *w -= c * x;
                }
            }
            let beta = kernels::norm_sqr(&s.w).sqrt();
            let y = tridiagonal_exp(&alphas, &betas, dt);
            let err = beta0 * beta * y[j].norm();
            if err < self.cfg.tol || beta < 1e-13 * beta0.max(1.0) {
                cur.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                for (v, &c) in basis.iter().zip(&y) {
                    let c = c * beta0;
                    for (a, &x) in cur.iter_mut().zip(v) {
                        *a += c * x;
                    }
                }
                return true;
            }
            betas.push(beta);
            basis.push(s.w.iter().map(|a| a / beta).collect());
        }
        false
    }

    fn step_two_pass(&self, cur: &mut [C64], dt: f64, s: &mut Scratch) -> bool {
        let beta0 = kernels::norm_sqr(cur).sqrt();
        // First pass: recurrence coefficients only.
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut y = None;
        s.prev.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (v, &a) in s.v.iter_mut().zip(cur.iter()) {
            *v = a / beta0;
        }
        for j in 0..self.cfg.max_dim {
            let beta = self.lanczos_advance(j, &mut alphas, &betas, s);
            let coeffs = tridiagonal_exp(&alphas, &betas, dt);
            let err = beta0 * beta * coeffs[j].norm();
            if err < self.cfg.tol || beta < 1e-13 * beta0.max(1.0) {
                y = Some(coeffs);
                break;
            }
            betas.push(beta);
            s.rotate(beta);
        }
        let Some(y) = y else {
            return false;
        };
        // Second pass: regenerate the same basis and accumulate.
        s.prev.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (v, &a) in s.v.iter_mut().zip(cur.iter()) {
            *v = a / beta0;
        }
        cur.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        let mut replay_alphas = Vec::new();
        for (j, &c) in y.iter().enumerate() {
            let c = c * beta0;
            for (a, &x) in cur.iter_mut().zip(&s.v) {
                *a += c * x;
            }
            if j + 1 == y.len() {
                break;
            }
            self.lanczos_advance(j, &mut replay_alphas, &betas, s);
            s.rotate(betas[j]);
        }
        true
    }

    /// `w = Hv − αv − β_{j−1} prev`; pushes `α` and returns `‖w‖`.
    fn lanczos_advance(&self, j: usize, alphas: &mut Vec<f64>, betas: &[f64], s: &mut Scratch) -> f64 {
        self.h.apply(&s.v, &mut s.w);
        let alpha = kernels::inner(&s.v, &s.w).re;
        alphas.push(alpha);
        axpy(&mut s.w, -alpha, &s.v);
        if j > 0 {
            axpy(&mut s.w, -betas[j - 1], &s.prev);
        }
        kernels::norm_sqr(&s.w).sqrt()
    }
}

struct Scratch {
    prev: Vec<C64>,
    v: Vec<C64>,
    w: Vec<C64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self {
            prev: z.clone(),
            v: z.clone(),
            w: z,
        }
    }

    /// `prev ← v`, `v ← w / β`.
    fn rotate(&mut self, beta: f64) {
        std::mem::swap(&mut self.prev, &mut self.v);
        for (v, &w) in self.v.iter_mut().zip(&self.w) {
            *v = w / beta;
        }
    }
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    for (y, &x) in y.iter_mut().zip(x) {
        *y += x * a;
    }
}

/// `exp(-i T dt) e₁` for the symmetric tridiagonal `T`.
fn tridiagonal_exp(alphas: &[f64], betas: &[f64], dt: f64) -> Vec<C64> {
    let k = alphas.len();
    if k == 1 {
        return vec![C64::from_polar(1.0, -alphas[0] * dt)];
    }
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .expect("small tridiagonal eigenproblem");
    let q = eig.U();
    let lam = eig.S().column_vector();
    let w: Vec<C64> = (0..k).map(|l| C64::from_polar(q[(0, l)], -lam[l] * dt)).collect();
    (0..k).map(|i| (0..k).map(|l| w[l] * q[(i, l)]).sum()).collect()
}

/// `exp(-iHτ)|ψ⟩` via Lanczos.
pub fn exact_evolve_state(list: &TermList, tau: f64, psi: &StateVector) -> Result<StateVector> {
    ExactEvolver::new(list)?.evolve(psi, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_terms, Boundary, CouplingSet, LatticeSpec};
    use crate::statekit::Spectrum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.normalize();
        s
    }

    fn diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn eight_qubits_agree_with_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = LatticeSpec::chain(8, Boundary::Periodic).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfim(1.0, 0.25)).unwrap();
        let psi = random_state(8, &mut rng);
        let exact = Spectrum::new(&list).unwrap().evolve(&psi, 1.7).unwrap();
        let kry = exact_evolve_state(&list, 1.7, &psi).unwrap();
        assert!(diff(&exact, &kry) < 1e-10);
    }

    #[test]
    fn zero_time_unchanged() {
        let spec = LatticeSpec::chain(5, Boundary::Open).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfim(1.0, 0.5)).unwrap();
        let psi = StateVector::plus(5);
        assert_eq!(exact_evolve_state(&list, 0.0, &psi).unwrap(), psi);
    }

    #[test]
    fn eigenstate_picks_up_phase() {
        let spec = LatticeSpec::chain(6, Boundary::Periodic).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfim(0.8, 0.0)).unwrap();
        let psi = StateVector::basis(6, 0b101100);
        let ev = ExactEvolver::new(&list).unwrap();
        let e = ev.hamiltonian().expectation(psi.amplitudes());
        let out = ev.evolve(&psi, 2.2).unwrap();
        let expect = C64::from_polar(1.0, -e * 2.2);
        assert!((out.amplitudes()[0b101100] - expect).norm() < 1e-12);
    }

    #[test]
    fn two_pass_matches_stored_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = LatticeSpec::grid(3, 3, [Boundary::Periodic; 2]).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfxy(0.5, 1.0, 0.25)).unwrap();
        let psi = random_state(9, &mut rng);
        let a = ExactEvolver::new(&list).unwrap().evolve(&psi, 1.1).unwrap();
        let b = ExactEvolver::new(&list)
            .unwrap()
            .two_pass(true)
            .evolve(&psi, 1.1)
            .unwrap();
        assert!(diff(&a, &b) < 1e-10);
    }

    #[test]
    fn negative_time_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = LatticeSpec::chain(7, Boundary::Periodic).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfim(1.0, 0.6)).unwrap();
        let ev = ExactEvolver::new(&list).unwrap();
        let psi = random_state(7, &mut rng);
        let back = ev.evolve(&ev.evolve(&psi, 0.9).unwrap(), -0.9).unwrap();
        assert!(diff(&psi, &back) < 1e-10);
    }

    #[test]
    fn random_instances_match_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..50 {
            let n = rng.random_range(2..=10);
            let tau = rng.random_range(0.0..3.0);
            let spec = LatticeSpec::chain(
                n,
                if n >= 3 && rng.random() {
                    Boundary::Periodic
                } else {
                    Boundary::Open
                },
            )
            .unwrap();
            let c = CouplingSet::tfim(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
            let list = build_terms(&spec, &c).unwrap();
            let psi = random_state(n, &mut rng);
            let a = Spectrum::new(&list).unwrap().evolve(&psi, tau).unwrap();
            let b = exact_evolve_state(&list, tau, &psi).unwrap();
            assert!(diff(&a, &b) <= 1e-9, "n={n} tau={tau}");
        }
    }

    #[test]
    fn cap_enforced() {
        let spec = LatticeSpec::chain(25, Boundary::Periodic).unwrap();
        let list = build_terms(&spec, &CouplingSet::tfim(1.0, 0.1)).unwrap();
        assert!(matches!(
            ExactEvolver::new(&list),
            Err(Error::CapExceeded { cap: 24, .. })
        ));
    }
}
