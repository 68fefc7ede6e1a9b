use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::kernels;
use crate::error::{Error, Result};
use crate::lattice::TermKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// `|+⟩^{⊗N}`.
    pub fn plus(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self {
            n_qubits,
            amps: vec![a; dim],
        }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("{len} amplitudes")));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        kernels::norm_sqr(&self.amps).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        kernels::inner(&self.amps, &other.amps)
    }

    pub fn scale(&mut self, factor: C64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// Multiply by `exp(-iθP)`.
    pub fn apply_gate(&mut self, kind: TermKind, sites: &[usize], theta: f64) -> Result<()> {
        if sites.len() != kind.arity() {
            return Err(Error::InvalidLattice(format!(
                "{} gate on {} sites",
                kind.label(),
                sites.len()
            )));
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= self.n_qubits) {
            return Err(Error::SiteOutOfRange {
                site: s,
                n_qubits: self.n_qubits,
            });
        }
        if kind.is_two_qubit() && sites[0] == sites[1] {
            return Err(Error::DuplicateSites(sites[0]));
        }
        let q1 = sites.get(1).copied().unwrap_or(sites[0]);
        kernels::apply(&mut self.amps, kind, sites[0], q1, theta);
        Ok(())
    }

    /// Unchecked variant for validated plans.
    pub(crate) fn apply_raw(&mut self, kind: TermKind, q0: usize, q1: usize, theta: f64) {
        kernels::apply(&mut self.amps, kind, q0, q1, theta);
    }

    /// `⟨ψ|Z_{s1} Z_{s2} …|ψ⟩` for the given sites.
    pub fn expectation_z(&self, sites: &[usize]) -> f64 {
        let mask = sites.iter().fold(0usize, |m, &s| m ^ (1 << s));
        kernels::blocked_sum(self.amps.len(), |range| {
            let mut acc = 0.0;
            for k in range {
                let p = self.amps[k].norm_sqr();
                if (k & mask).count_ones() % 2 == 0 {
                    acc += p;
                } else {
                    acc -= p;
                }
            }
            C64::new(acc, 0.0)
        })
        .re
    }
}
