//! In-place `exp(-iθP)` kernels for `P ∈ {Z⊗Z, Y⊗Y, X}` and the matching
//! generator overlaps `⟨μ|P|φ⟩` used by adjoint differentiation.
//!
//! Qubit `q` is bit `q` of the amplitude index.

use num_complex::Complex64 as C64;

use crate::lattice::TermKind;
use crate::par;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Fixed block size for reductions; partial sums are added in block order
/// so the result does not depend on the execution mode.
const SUM_BLOCK: usize = 1 << 12;

/// Smallest block handed to a worker by the pair kernels.
const PAR_BLOCK: usize = 1 << 12;

pub fn apply(amps: &mut [C64], kind: TermKind, q0: usize, q1: usize, theta: f64) {
    match kind {
        TermKind::Zz => zz(amps, q0, q1, theta),
        TermKind::Yy => yy(amps, q0, q1, theta),
        TermKind::X => x(amps, q0, theta),
    }
}

pub fn zz(amps: &mut [C64], q0: usize, q1: usize, theta: f64) {
    let even = C64::from_polar(1.0, -theta);
    let odd = even.conj();
    par::for_each_indexed_mut(amps, |k, a| {
        if ((k >> q0) ^ (k >> q1)) & 1 == 0 {
            *a *= even;
        } else {
            *a *= odd;
        }
    });
}

pub fn x(amps: &mut [C64], q: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    let mis = C64::new(0.0, -s);
    pair_update(amps, 1 << q, move |a, b| {
        let (u, v) = (*a, *b);
        *a = u * c + v * mis;
        *b = u * mis + v * c;
    });
}

/// `exp(-iθ YY)`: `YY|k⟩ = σ(k)|k ⊕ m⟩` with `σ = -1` when the two bits agree.
pub fn yy(amps: &mut [C64], q0: usize, q1: usize, theta: f64) {
    let (lo, hi) = (q0.min(q1), q0.max(q1));
    let (s, c) = theta.sin_cos();
    quad_update(amps, lo, hi, move |a, b, sigma| {
        let (u, v) = (*a, *b);
        let t = C64::new(0.0, -s * sigma);
        *a = u * c + v * t;
        *b = v * c + u * t;
    });
}

/// `⟨μ|P|φ⟩` for the Pauli generator of a gate.
pub fn generator_overlap(mu: &[C64], phi: &[C64], kind: TermKind, q0: usize, q1: usize) -> C64 {
    match kind {
        TermKind::Zz => blocked_sum(mu.len(), |range| {
            let mut acc = C64::new(0.0, 0.0);
            for k in range {
                let t = mu[k].conj() * phi[k];
                if ((k >> q0) ^ (k >> q1)) & 1 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc
        }),
        TermKind::X => {
            let m = 1usize << q0;
            blocked_sum(mu.len(), |range| {
                let mut acc = C64::new(0.0, 0.0);
                for k in range {
                    acc += mu[k].conj() * phi[k ^ m];
                }
                acc
            })
        }
        TermKind::Yy => {
            let m = (1usize << q0) | (1usize << q1);
            blocked_sum(mu.len(), |range| {
                let mut acc = C64::new(0.0, 0.0);
                for k in range {
                    let t = mu[k].conj() * phi[k ^ m];
                    if ((k >> q0) ^ (k >> q1)) & 1 == 0 {
                        acc -= t;
                    } else {
                        acc += t;
                    }
                }
                acc
            })
        }
    }
}

/// `-i` times [`generator_overlap`]: derivative of `⟨μ|e^{-iθP}|φ'⟩` at the
/// gate output `φ`.
pub fn derivative_overlap(mu: &[C64], phi: &[C64], kind: TermKind, q0: usize, q1: usize) -> C64 {
    -I * generator_overlap(mu, phi, kind, q0, q1)
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    blocked_sum(a.len(), |range| {
        let mut acc = C64::new(0.0, 0.0);
        for k in range {
            acc += a[k].conj() * b[k];
        }
        acc
    })
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    blocked_sum(a.len(), |range| {
        let mut acc = C64::new(0.0, 0.0);
        for k in range {
            acc.re += a[k].norm_sqr();
        }
        acc
    })
    .re
}

/// Sum of `f` over fixed index blocks, added in block order.
pub fn blocked_sum<F>(len: usize, f: F) -> C64
where
    F: Fn(std::ops::Range<usize>) -> C64 + Sync + Send,
{
    let blocks = len.div_ceil(SUM_BLOCK);
    if blocks <= 1 {
        return f(0..len);
    }
    let parts = if len >= par::KERNEL_PAR_MIN_LEN {
        par::map_range(blocks, |b| f(b * SUM_BLOCK..((b + 1) * SUM_BLOCK).min(len)))
    } else {
        (0..blocks)
            .map(|b| f(b * SUM_BLOCK..((b + 1) * SUM_BLOCK).min(len)))
            .collect()
    };
    parts.into_iter().fold(C64::new(0.0, 0.0), |acc, p| acc + p)
}

/// Visit every pair `(k, k + stride)` with bit `log2(stride)` of `k` clear.
fn pair_update<F>(amps: &mut [C64], stride: usize, f: F)
where
    F: Fn(&mut C64, &mut C64) + Sync + Send,
{
    let seq = |block: &mut [C64]| {
        for chunk in block.chunks_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    };
    let block = (2 * stride).max(PAR_BLOCK);
    #[cfg(feature = "parallel")]
    if par::is_parallel() && amps.len() >= par::KERNEL_PAR_MIN_LEN && block >= amps.len() {
        use rayon::prelude::*;
        let (lo, hi) = amps.split_at_mut(stride);
        lo.par_chunks_mut(PAR_BLOCK)
            .zip(hi.par_chunks_mut(PAR_BLOCK))
            .for_each(|(l, h)| {
                for (a, b) in l.iter_mut().zip(h.iter_mut()) {
                    f(a, b);
                }
            });
        return;
    }
    par::for_each_chunk_mut(amps, block, |_, b| seq(b));
}

/// Visit every pair `(k, k ⊕ m)` with `m = 2^lo | 2^hi` and bit `hi` of `k`
/// clear. `f` receives `σ(k)`: -1 when the two bits of `k` agree.
fn quad_update<F>(amps: &mut [C64], lo: usize, hi: usize, f: F)
where
    F: Fn(&mut C64, &mut C64, f64) + Sync + Send,
{
    let (slo, shi) = (1usize << lo, 1usize << hi);
    // In a chunk of 2^(hi+1): first half has bit hi clear. Within those,
    // sub-chunks of 2^(lo+1) split into [bit lo clear | bit lo set]; the
    // partner of the clear part is the set part of the mirrored sub-chunk.
    let inner = move |lo_half: &mut [C64], hi_half: &mut [C64]| {
        for (l, h) in lo_half.chunks_mut(2 * slo).zip(hi_half.chunks_mut(2 * slo)) {
            let (l0, l1) = l.split_at_mut(slo);
            let (h0, h1) = h.split_at_mut(slo);
            for (a, b) in l0.iter_mut().zip(h1.iter_mut()) {
                f(a, b, -1.0);
            }
            for (a, b) in l1.iter_mut().zip(h0.iter_mut()) {
                f(a, b, 1.0);
            }
        }
    };
    let block = (2 * shi).max(PAR_BLOCK);
    #[cfg(feature = "parallel")]
    if par::is_parallel() && amps.len() >= par::KERNEL_PAR_MIN_LEN && block >= amps.len() {
        use rayon::prelude::*;
        let sub = (2 * slo).max(PAR_BLOCK).min(shi);
        let (lo_half, hi_half) = amps.split_at_mut(shi);
        lo_half
            .par_chunks_mut(sub)
            .zip(hi_half.par_chunks_mut(sub))
            .for_each(|(l, h)| inner(l, h));
        return;
    }
    par::for_each_chunk_mut(amps, block, |_, b| {
        for chunk in b.chunks_mut(2 * shi) {
            let (l, h) = chunk.split_at_mut(shi);
            inner(l, h);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_gate(kind: TermKind, n: usize, q0: usize, q1: usize, theta: f64) -> Vec<Vec<C64>> {
        // Brute force: exp(-iθP) = cos θ I - i sin θ P with P built from the
        // single-qubit matrices by explicit tensor products.
        let dim = 1 << n;
        let x = [
            [C64::new(0., 0.), C64::new(1., 0.)],
            [C64::new(1., 0.), C64::new(0., 0.)],
        ];
        let y = [
            [C64::new(0., 0.), C64::new(0., -1.)],
            [C64::new(0., 1.), C64::new(0., 0.)],
        ];
        let z = [
            [C64::new(1., 0.), C64::new(0., 0.)],
            [C64::new(0., 0.), C64::new(-1., 0.)],
        ];
        let id = [
            [C64::new(1., 0.), C64::new(0., 0.)],
            [C64::new(0., 0.), C64::new(1., 0.)],
        ];
        let ops: Vec<[[C64; 2]; 2]> = (0..n)
            .map(|q| match kind {
                TermKind::X if q == q0 => x,
                TermKind::Yy if q == q0 || q == q1 => y,
                TermKind::Zz if q == q0 || q == q1 => z,
                _ => id,
            })
            .collect();
        let mut m = vec![vec![C64::new(0., 0.); dim]; dim];
        let (s, c) = theta.sin_cos();
        for (r, row) in m.iter_mut().enumerate() {
            for (col, e) in row.iter_mut().enumerate() {
                let mut p = C64::new(1.0, 0.0);
                for (q, op) in ops.iter().enumerate() {
                    p *= op[(r >> q) & 1][(col >> q) & 1];
                }
                *e = C64::new(-0.0, -s) * p + if r == col { C64::new(c, 0.0) } else { C64::new(0.0, 0.0) };
            }
        }
        m
    }

    fn random_state(n: usize, seed: u64) -> Vec<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let nrm = norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|a| *a /= nrm);
        v
    }

    #[test]
    fn kernels_match_kron_construction() {
        for n in 1..=6 {
            let mut seed = 0;
            for &kind in &[TermKind::X, TermKind::Zz, TermKind::Yy] {
                for q0 in 0..n {
                    for q1 in 0..n {
                        let skip = if kind.is_two_qubit() { q0 == q1 } else { q1 != 0 };
                        if skip {
                            continue;
                        }
                        seed += 1;
                        let theta = 0.37 * seed as f64;
                        let psi = random_state(n, seed);
                        let m = dense_gate(kind, n, q0, q1, theta);
                        let expect: Vec<C64> = m
                            .iter()
                            .map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum())
                            .collect();
                        let mut got = psi.clone();
                        apply(&mut got, kind, q0, q1, theta);
                        for (a, b) in got.iter().zip(&expect) {
                            assert!((a - b).norm() < 1e-12, "{kind:?} n={n} q=({q0},{q1})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn generator_overlap_matches_finite_rotation() {
        let n = 5;
        let mu = random_state(n, 11);
        let phi = random_state(n, 12);
        for &(kind, q0, q1) in &[(TermKind::X, 3, 0), (TermKind::Zz, 1, 4), (TermKind::Yy, 4, 2)] {
            // d/dθ ⟨μ|e^{-iθP}|φ⟩ at θ=0 equals -i⟨μ|P|φ⟩
            let h = 1e-6;
            let mut p = phi.clone();
            apply(&mut p, kind, q0, q1, h);
            let mut m = phi.clone();
            apply(&mut m, kind, q0, q1, -h);
            let fd = (inner(&mu, &p) - inner(&mu, &m)) / (2.0 * h);
            let ad = derivative_overlap(&mu, &phi, kind, q0, q1);
            assert!((fd - ad).norm() < 1e-8, "{kind:?}");
        }
    }

    #[test]
    fn large_state_paths_agree_with_sequential() {
        let n = 15;
        let psi = random_state(n, 5);
        let mut a = psi.clone();
        let mut b = psi.clone();
        for (i, &(kind, q0, q1)) in [
            (TermKind::X, 14, 0),
            (TermKind::X, 0, 0),
            (TermKind::Yy, 13, 14),
            (TermKind::Yy, 0, 14),
            (TermKind::Zz, 3, 9),
        ]
        .iter()
        .enumerate()
        {
            apply(&mut a, kind, q0, q1, 0.1 + i as f64);
        }
        crate::par::set_sequential(true);
        for (i, &(kind, q0, q1)) in [
            (TermKind::X, 14, 0),
            (TermKind::X, 0, 0),
            (TermKind::Yy, 13, 14),
            (TermKind::Yy, 0, 14),
            (TermKind::Zz, 3, 9),
        ]
        .iter()
        .enumerate()
        {
            apply(&mut b, kind, q0, q1, 0.1 + i as f64);
        }
        crate::par::set_sequential(false);
        assert_eq!(a, b);
    }
}
