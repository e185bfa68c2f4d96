//! Partial trace of a single qubit.
//!
//! For a pure state the reduced density matrix over the remaining qubits is
//! the two-term mixture `Σ_i N_i² |φ^i><φ^i|`, where `|φ^i>` is the
//! normalized part of `|ψ>` with the traced qubit in `|i>`. The Monte Carlo
//! trace keeps one branch, chosen with probability `N_i²`.

use crate::ops::DensityMatrix;
use crate::state::{check_qubit, StateVector};
use crate::{CMatrix, Error, Result, C64};

/// Reduced index `b * 2^(n-k) + a` maps to full index `(2b + i) * 2^(n-k) + a`.
#[inline]
fn full_index(reduced: usize, low_bits: usize, i: usize) -> usize {
    let low = reduced & ((1 << low_bits) - 1);
    let high = reduced >> low_bits;
    (((high << 1) | i) << low_bits) | low
}

/// Copies the unnormalized branch with qubit `k` in state `i` into `out`
/// (length `2^(n-1)`) and returns its squared norm.
#[inline]
pub(crate) fn gather_branch(amps: &[C64], n_qubits: usize, k: usize, i: usize, out: &mut [C64]) -> f64 {
    let low_bits = n_qubits - k;
    let block = 1usize << low_bits;
    let mut norm_sqr = 0.0;
    // b runs over 2^(k-1) blocks, a over 2^(n-k) entries within a block
    for (b, chunk) in out.chunks_exact_mut(block).enumerate() {
        let src = &amps[(2 * b + i) * block..(2 * b + i + 1) * block];
        for (o, &s) in chunk.iter_mut().zip(src) {
            *o = s;
            norm_sqr += s.norm_sqr();
        }
    }
    norm_sqr
}

/// Branch decomposition of a single-qubit partial trace.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchPair {
    weights: [f64; 2],
    branches: [Option<StateVector>; 2],
}

impl BranchPair {
    /// `N_i²`, the probability of finding the traced qubit in `|i>`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    /// Normalized branch `|φ^i>`, or `None` when its weight is zero.
    pub fn branch(&self, i: usize) -> Option<&StateVector> {
        self.branches[i].as_ref()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.branches[i].is_none()
    }

    /// `Σ_i N_i² |φ^i><φ^i|`.
    pub fn reduced_density(&self) -> DensityMatrix {
        let dim = self
            .branches
            .iter()
            .flatten()
            .map(StateVector::dim)
            .next()
            .expect("at least one branch carries weight");
        let mut m = CMatrix::zeros(dim, dim);
        for (w, branch) in self.weights.iter().zip(&self.branches) {
            if let Some(phi) = branch {
                let a = phi.amplitudes();
                for c in 0..dim {
                    let ac = a[c].conj() * *w;
                    for r in 0..dim {
                        m[(r, c)] += a[r] * ac;
                    }
                }
            }
        }
        DensityMatrix::from_matrix_unchecked(m)
    }
}

fn check_traceable(psi: &StateVector, k: usize) -> Result<()> {
    if psi.n_qubits() < 2 {
        return Err(Error::InvalidParameter(
            "tracing out a qubit needs at least two qubits".into(),
        ));
    }
    check_qubit(k, psi.n_qubits())
}

/// Splits `|ψ>` into its two conditional branches on qubit `k`.
pub fn ptrace_branches(psi: &StateVector, k: usize) -> Result<BranchPair> {
    check_traceable(psi, k)?;
    let n = psi.n_qubits();
    let half = psi.dim() / 2;
    let mut weights = [0.0; 2];
    let mut branches = [None, None];
    for i in 0..2 {
        let mut buf = vec![C64::new(0.0, 0.0); half];
        let w = gather_branch(psi.amplitudes(), n, k, i, &mut buf);
        weights[i] = w;
        if w > 0.0 {
            let inv = 1.0 / w.sqrt();
            buf.iter_mut().for_each(|a| *a *= inv);
            branches[i] = Some(StateVector::new(buf)?);
        }
    }
    if branches.iter().all(Option::is_none) {
        return Err(Error::ZeroNorm);
    }
    Ok(BranchPair { weights, branches })
}

/// Branch index selected by a uniform draw: branch 0 iff `x_r < N_0²`,
/// falling back to the other branch if the selected one carries no weight.
#[inline]
pub(crate) fn select_branch(weight0: f64, weight1: f64, x_r: f64) -> usize {
    let pick = if x_r < weight0 { 0 } else { 1 };
    match pick {
        0 if weight0 <= 0.0 => 1,
        1 if weight1 <= 0.0 => 0,
        p => p,
    }
}

/// Monte Carlo partial trace: returns the normalized branch selected by `x_r`
/// together with its index.
pub fn mc_ptrace(psi: &StateVector, k: usize, x_r: f64) -> Result<(StateVector, usize)> {
    if !(0.0..1.0).contains(&x_r) {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo draw {x_r} outside [0, 1)"
        )));
    }
    let pair = ptrace_branches(psi, k)?;
    let chosen = select_branch(pair.weights[0], pair.weights[1], x_r);
    let [b0, b1] = pair.branches;
    let state = if chosen == 0 { b0 } else { b1 };
    Ok((state.expect("selected branch has weight"), chosen))
}

/// Partial trace of qubit `k` from a density matrix over `n` qubits.
pub fn ptrace_matrix(rho: &CMatrix, n_qubits: usize, k: usize) -> Result<CMatrix> {
    let dim = 1usize << n_qubits;
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.nrows(),
        });
    }
    if n_qubits < 2 {
        return Err(Error::InvalidParameter(
            "tracing out a qubit needs at least two qubits".into(),
        ));
    }
    check_qubit(k, n_qubits)?;
    let low_bits = n_qubits - k;
    let half = dim / 2;
    Ok(CMatrix::from_fn(half, half, |r, c| {
        (0..2)
            .map(|i| rho[(full_index(r, low_bits, i), full_index(c, low_bits, i))])
            .sum()
    }))
}

/// Partial trace of qubit `k`.
pub fn ptrace_dm(rho: &DensityMatrix, k: usize) -> Result<DensityMatrix> {
    ptrace_matrix(rho.matrix(), rho.n_qubits(), k).map(DensityMatrix::from_matrix_unchecked)
}
