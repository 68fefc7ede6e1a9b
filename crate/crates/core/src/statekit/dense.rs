use num_complex::Complex64 as C64;

use super::state::StateVector;
use super::N_DENSE_CAP;
use crate::circuit::CircuitPlan;
use crate::error::{Error, Result};
use crate::par;

/// Dense `2^N × 2^N` complex matrix stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DenseOperator {
    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut op = Self::zeros(n_qubits);
        for k in 0..op.dim() {
            op.set(k, k, C64::new(1.0, 0.0));
        }
        op
    }

    /// Build from columns, each of length `2^N`.
    pub fn from_columns(n_qubits: usize, columns: Vec<Vec<C64>>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if columns.len() != dim || columns.iter().any(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim} columns of length {dim}"
            )));
        }
        Ok(Self {
            n_qubits,
            data: columns.concat(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[col * self.dim() + row]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        let dim = self.dim();
        self.data[col * dim + row] = v;
    }

    pub fn column(&self, col: usize) -> &[C64] {
        let dim = self.dim();
        &self.data[col * dim..(col + 1) * dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.get(k, k)).sum()
    }

    /// `Tr(self† · other)`.
    pub fn trace_adjoint_product(&self, other: &DenseOperator) -> Result<C64> {
        self.check_same(other)?;
        Ok(super::kernels::inner(&self.data, &other.data))
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        let mut out = Self::zeros(self.n_qubits);
        for c in 0..dim {
            for r in 0..dim {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseOperator) -> Result<Self> {
        self.check_same(other)?;
        let dim = self.dim();
        let cols = par::map_range(dim, |c| {
            let mut col = vec![C64::new(0.0, 0.0); dim];
            for (k, &b) in other.column(c).iter().enumerate() {
                if b == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &a) in col.iter_mut().zip(self.column(k)) {
                    *o += a * b;
                }
            }
            col
        });
        Self::from_columns(self.n_qubits, cols)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit state, {}-qubit operator",
                psi.n_qubits(),
                self.n_qubits
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (k, &a) in psi.amplitudes().iter().enumerate() {
            for (o, &u) in out.iter_mut().zip(self.column(k)) {
                *o += u * a;
            }
        }
        StateVector::from_amplitudes(out)
    }

    /// `‖self − other‖_F²`, summed entry by entry.
    pub fn distance_sqr(&self, other: &DenseOperator) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum())
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let dim = self.dim();
        let errs = par::map_range(dim, |c| {
            let mut worst = 0.0f64;
            for r in 0..dim {
                let mut acc = super::kernels::inner(self.column(r), self.column(c));
                if r == c {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
            worst
        });
        errs.into_iter().fold(0.0, f64::max)
    }

    fn check_same(&self, other: &DenseOperator) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }
}

/// Dense unitary of a plan, built column by column from basis states.
pub fn circuit_unitary(plan: &CircuitPlan, n_qubits: usize) -> Result<DenseOperator> {
    if n_qubits > N_DENSE_CAP {
        return Err(Error::CapExceeded {
            what: "dense circuit unitary",
            n_qubits,
            cap: N_DENSE_CAP,
        });
    }
    plan.check_qubits(n_qubits)?;
    let cols = par::map_range(1 << n_qubits, |b| {
        let mut s = StateVector::basis(n_qubits, b);
        plan.apply_unchecked(&mut s);
        s.into_amplitudes()
    });
    DenseOperator::from_columns(n_qubits, cols)
}
