//! Matrix-free Hamiltonian action over a term list.
//!
//! Every supported term is either diagonal (`ZZ`) or a signed bit flip
//! (`X`, `YY`), so `H|j⟩ = diag[j]|j⟩ + Σ c σ(j)|j ⊕ mask⟩` with all matrix
//! elements real.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{Term, TermKind, TermList};
use crate::par;

#[derive(Clone, Copy, Debug)]
struct Flip {
    mask: usize,
    coeff: f64,
    /// Bit pair whose agreement flips the sign (`YY` only).
    sign_bits: Option<(usize, usize)>,
}

impl Flip {
    #[inline]
    fn sign(&self, j: usize) -> f64 {
        match self.sign_bits {
            Some((a, b)) if ((j >> a) ^ (j >> b)) & 1 == 0 => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    n_qubits: usize,
    diag: Vec<f64>,
    flips: Vec<Flip>,
    norm_bound: f64,
}

impl SparseHamiltonian {
    pub fn new(list: &TermList) -> Result<Self> {
        Self::from_terms(list.n_sites(), &list.terms)
    }

    pub fn from_terms(n_qubits: usize, terms: &[Term]) -> Result<Self> {
        for t in terms {
            if let Some(&s) = t.sites.iter().find(|&&s| s >= n_qubits) {
                return Err(Error::SiteOutOfRange { site: s, n_qubits });
            }
            if t.kind.is_two_qubit() && t.sites[0] == t.sites[1] {
                return Err(Error::DuplicateSites(t.sites[0]));
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of {:?}", t.sites)));
            }
        }
        let dim = 1usize << n_qubits;
        let zz: Vec<(usize, usize, f64)> = terms
            .iter()
            .filter(|t| t.kind == TermKind::Zz)
            .map(|t| (t.sites[0], t.sites[1], t.coeff))
            .collect();
        let mut diag = vec![0.0; dim];
        par::for_each_indexed_mut(&mut diag, |j, d| {
            *d = zz
                .iter()
                .map(|&(a, b, c)| if ((j >> a) ^ (j >> b)) & 1 == 0 { c } else { -c })
                .sum();
        });
        let flips = terms
            .iter()
            .filter_map(|t| match t.kind {
                TermKind::Zz => None,
                TermKind::X => Some(Flip {
                    mask: 1 << t.sites[0],
                    coeff: t.coeff,
                    sign_bits: None,
                }),
                TermKind::Yy => Some(Flip {
                    mask: (1 << t.sites[0]) | (1 << t.sites[1]),
                    coeff: t.coeff,
                    sign_bits: Some((t.sites[0], t.sites[1])),
                }),
            })
            .collect();
        Ok(Self {
            n_qubits,
            diag,
            flips,
            norm_bound: terms.iter().map(|t| t.coeff.abs()).sum(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `Σ |c|`, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `out = H · input`.
    pub fn apply(&self, input: &[C64], out: &mut [C64]) {
        debug_assert_eq!(input.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        par::for_each_indexed_mut(out, |j, o| {
            let mut acc = input[j] * self.diag[j];
            for f in &self.flips {
                acc += input[j ^ f.mask] * (f.coeff * f.sign(j));
            }
            *o = acc;
        });
    }

    /// Nonzero entries `(row, value)` of column `col`.
    pub(crate) fn column_entries(&self, col: usize, mut f: impl FnMut(usize, f64)) {
        f(col, self.diag[col]);
        for fl in &self.flips {
            f(col ^ fl.mask, fl.coeff * fl.sign(col));
        }
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut h = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut h);
        super::kernels::inner(psi, &h).re
    }

    /// Dense complex matrix, column-major; for oracles on small systems.
    pub fn to_dense(&self) -> Vec<C64> {
        let dim = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for col in 0..dim {
            self.column_entries(col, |row, v| m[col * dim + row] += v);
        }
        m
    }
}
