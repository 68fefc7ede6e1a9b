//! Exact propagators from a Hermitian eigendecomposition.
//!
//! Both models commute with the global flip `∏X`, so the Hamiltonian is
//! block diagonal in the parity basis `(|j⟩ ± |j̄⟩)/√2` (`j̄ = j ⊕ 1…1`,
//! `j` ranging over indices with the top bit clear). Each block is real
//! symmetric and half the size, which cuts the eigensolver cost by four.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::dense::DenseOperator;
use super::hamiltonian::SparseHamiltonian;
use super::state::StateVector;
use super::N_DENSE_CAP;
use crate::error::{Error, Result};
use crate::lattice::TermList;
use crate::par;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Sector {
    /// `+1` or `-1`: eigenvalue of `∏X`.
    sign: f64,
    energies: Vec<f64>,
    /// Column-major `half × half` eigenvectors in the reduced basis.
    vectors: Vec<f64>,
}

/// Spectrum of a parity-symmetric Hamiltonian on at most [`N_DENSE_CAP`]
/// qubits.
#[derive(Clone, Debug)]
pub struct Spectrum {
    n_qubits: usize,
    sectors: [Sector; 2],
}

impl Spectrum {
    pub fn new(list: &TermList) -> Result<Self> {
        let n = list.n_sites();
        if n > N_DENSE_CAP {
            return Err(Error::CapExceeded {
                what: "dense spectral propagator",
                n_qubits: n,
                cap: N_DENSE_CAP,
            });
        }
        Self::from_hamiltonian(&SparseHamiltonian::new(list)?)
    }

    pub fn from_hamiltonian(h: &SparseHamiltonian) -> Result<Self> {
        let n = h.n_qubits();
        if n > N_DENSE_CAP {
            return Err(Error::CapExceeded {
                what: "dense spectral propagator",
                n_qubits: n,
                cap: N_DENSE_CAP,
            });
        }
        if n == 0 {
            return Err(Error::DimensionMismatch("zero qubits".into()));
        }
        let plus = sector(h, 1.0)?;
        let minus = sector(h, -1.0)?;
        Ok(Self {
            n_qubits: n,
            sectors: [plus, minus],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn half(&self) -> usize {
        1 << (self.n_qubits - 1)
    }

    fn full_mask(&self) -> usize {
        (1 << self.n_qubits) - 1
    }

    /// All eigenvalues, ascending.
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.sectors.iter().flat_map(|s| s.energies.clone()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn eigen_count(&self) -> usize {
        1 << self.n_qubits
    }

    /// Eigenpair `k` (sector-major order) as a full state vector.
    pub fn eigenpair(&self, k: usize) -> (f64, StateVector) {
        let half = self.half();
        let s = &self.sectors[k / half];
        let col = k % half;
        let full = self.full_mask();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![C64::new(0.0, 0.0); 2 * half];
        for (j, &u) in s.vectors[col * half..(col + 1) * half].iter().enumerate() {
            amps[j] = C64::new(u * r, 0.0);
            amps[j ^ full] = C64::new(s.sign * u * r, 0.0);
        }
        (
            s.energies[col],
            StateVector::from_amplitudes(amps).expect("power of two"),
        )
    }

    /// `exp(-iHτ)|ψ⟩`.
    pub fn evolve(&self, psi: &StateVector, tau: f64) -> Result<StateVector> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit state, {}-qubit spectrum",
                psi.n_qubits(),
                self.n_qubits
            )));
        }
        let half = self.half();
        let full = self.full_mask();
        let a = psi.amplitudes();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = vec![C64::new(0.0, 0.0); 2 * half];
        for s in &self.sectors {
            // Reduced components of ψ in this sector.
            let red: Vec<C64> = (0..half).map(|j| (a[j] + a[j ^ full] * s.sign) * r).collect();
            let coeffs: Vec<C64> = par::map_range(half, |k| {
                let col = &s.vectors[k * half..(k + 1) * half];
                let dot = col
                    .iter()
                    .zip(&red)
                    .fold(C64::new(0.0, 0.0), |acc, (&u, &p)| acc + p * u);
                dot * C64::from_polar(1.0, -s.energies[k] * tau)
            });
            let mut back = vec![C64::new(0.0, 0.0); half];
            for (k, c) in coeffs.iter().enumerate() {
                let col = &s.vectors[k * half..(k + 1) * half];
                for (b, &u) in back.iter_mut().zip(col) {
                    *b += c * u;
                }
            }
            for (j, b) in back.into_iter().enumerate() {
                out[j] += b * r;
                out[j ^ full] += b * (s.sign * r);
            }
        }
        StateVector::from_amplitudes(out)
    }

    /// Dense `exp(-iHτ)`.
    pub fn propagator(&self, tau: f64) -> DenseOperator {
        let half = self.half();
        let full = self.full_mask();
        // W_s = V_s diag(e^{-iλτ}) V_sᵀ, one column at a time.
        let blocks: Vec<Vec<C64>> = self
            .sectors
            .iter()
            .map(|s| {
                let phases: Vec<C64> = s.energies.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
                let cols = par::map_range(half, |b| {
                    let mut col = vec![C64::new(0.0, 0.0); half];
                    for (k, ph) in phases.iter().enumerate() {
                        let v = &s.vectors[k * half..(k + 1) * half];
                        let w = ph * v[b];
                        for (c, &u) in col.iter_mut().zip(v) {
                            *c += w * u;
                        }
                    }
                    col
                });
                cols.concat()
            })
            .collect();
        let dim = 2 * half;
        let mut op = DenseOperator::zeros(self.n_qubits);
        for b in 0..half {
            for a in 0..half {
                let wp = blocks[0][b * half + a];
                let wm = blocks[1][b * half + a];
                let same = (wp + wm) * 0.5;
                let cross = (wp - wm) * 0.5;
                op.set(a, b, same);
                op.set(a ^ full, b ^ full, same);
                op.set(a, b ^ full, cross);
                op.set(a ^ full, b, cross);
            }
        }
        debug_assert_eq!(op.dim(), dim);
        op
    }
}

/// Diagonalize the sector block `M[a,b] = ⟨a|H|b⟩ + s⟨ā|H|b⟩`.
fn sector(h: &SparseHamiltonian, sign: f64) -> Result<Sector> {
    let n = h.n_qubits();
    let half = 1usize << (n - 1);
    let full = (1usize << n) - 1;
    let mut m = Mat::<f64>::zeros(half, half);
    for b in 0..half {
        h.column_entries(b, |row, v| {
            if row & half == 0 {
                m[(row, b)] += v;
            } else {
                m[(row ^ full, b)] += sign * v;
            }
        });
    }
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for b in 0..half {
        for a in 0..b {
            asym = asym.max((m[(a, b)] - m[(b, a)]).abs());
        }
        for a in 0..half {
            scale = scale.max(m[(a, b)].abs());
        }
    }
    if asym > HERMITIAN_TOL * scale.max(1.0) {
        return Err(Error::NonHermitian(asym));
    }
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let u = eig.U();
    let s = eig.S().column_vector();
    let energies = (0..half).map(|k| s[k]).collect();
    let mut vectors = Vec::with_capacity(half * half);
    for k in 0..half {
        vectors.extend((0..half).map(|j| u[(j, k)]));
    }
    Ok(Sector {
        sign,
        energies,
        vectors,
    })
}

/// `exp(-iHτ)` as a dense operator.
pub fn exact_propagator_dense(list: &TermList, tau: f64) -> Result<DenseOperator> {
    Ok(Spectrum::new(list)?.propagator(tau))
}
