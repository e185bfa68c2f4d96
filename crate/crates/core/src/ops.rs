//! Operators on qubit registers: the system Hamiltonian, swap and partial
//! swap unitaries, free propagators and density matrices.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::state::{check_qubit, check_qubit_count, qubit_mask, StateVector};
use crate::{CMatrix, Error, Result, C64};

const HERMITIAN_TOL: f64 = 1e-10;
const DENSITY_TOL: f64 = 1e-10;

#[inline]
fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Flip-flop coupling `epsilon * (σ+_{ij} + σ-_{ij})` between qubits `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub epsilon: f64,
}

/// Qubit register description: per-qubit splittings, flip-flop couplings and
/// the qubit that collides with the bath.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n_qubits: usize,
    pub splittings: Vec<f64>,
    pub couplings: Vec<Coupling>,
    pub target_qubit: usize,
}

impl SystemSpec {
    /// Uncoupled register colliding through its last qubit.
    pub fn uncoupled(splittings: Vec<f64>) -> Self {
        let n_qubits = splittings.len();
        SystemSpec {
            n_qubits,
            splittings,
            couplings: Vec::new(),
            target_qubit: n_qubits,
        }
    }

    /// Uniform nearest-neighbour chain colliding through its last qubit.
    pub fn chain(n_qubits: usize, omega: f64, epsilon: f64) -> Self {
        let couplings = (1..n_qubits)
            .map(|i| Coupling { i, j: i + 1, epsilon })
            .collect();
        SystemSpec {
            n_qubits,
            splittings: vec![omega; n_qubits],
            couplings,
            target_qubit: n_qubits,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        check_qubit_count(self.n_qubits)?;
        if self.splittings.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: self.splittings.len(),
            });
        }
        for cp in &self.couplings {
            if cp.i == 0 || cp.i >= cp.j || cp.j > self.n_qubits {
                return Err(Error::InvalidCoupling {
                    i: cp.i,
                    j: cp.j,
                    n_qubits: self.n_qubits,
                });
            }
        }
        check_qubit(self.target_qubit, self.n_qubits)?;
        if self
            .splittings
            .iter()
            .chain(self.couplings.iter().map(|cp| &cp.epsilon))
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter(
                "splittings and couplings must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// `H_S = Σ_k (ω_k/2) Z_k + Σ_(i,j) ε_ij (σ+_ij + σ-_ij)`.
///
/// `σ+_ij` carries `|..1_i..0_j..>` to `|..0_i..1_j..>`; `σ-_ij` is its
/// adjoint.
pub fn build_system_hamiltonian(spec: &SystemSpec) -> Result<CMatrix> {
    spec.validate()?;
    let n = spec.n_qubits;
    let dim = spec.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let diag: f64 = spec
            .splittings
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let z = if x & qubit_mask(k + 1, n) == 0 { 1.0 } else { -1.0 };
                0.5 * w * z
            })
            .sum();
        h[(x, x)] = c(diag);
    }
    for cp in &spec.couplings {
        let (mi, mj) = (qubit_mask(cp.i, n), qubit_mask(cp.j, n));
        for x in 0..dim {
            // bit i set, bit j clear: σ+ maps x to y, σ- maps y back to x
            if x & mi != 0 && x & mj == 0 {
                let y = x ^ mi ^ mj;
                h[(y, x)] += c(cp.epsilon);
                h[(x, y)] += c(cp.epsilon);
            }
        }
    }
    Ok(h)
}

/// Pauli matrix selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Single-qubit Pauli operator embedded on qubit `q` of an `n`-qubit register.
pub fn pauli_on(p: Pauli, q: usize, n_qubits: usize) -> Result<CMatrix> {
    check_qubit_count(n_qubits)?;
    check_qubit(q, n_qubits)?;
    let dim = 1usize << n_qubits;
    let mask = qubit_mask(q, n_qubits);
    let mut m = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let bit = x & mask != 0;
        match p {
            Pauli::Z => m[(x, x)] = c(if bit { -1.0 } else { 1.0 }),
            Pauli::X => m[(x ^ mask, x)] = c(1.0),
            // Y|0> = i|1>, Y|1> = -i|0>
            Pauli::Y => m[(x ^ mask, x)] = C64::new(0.0, if bit { -1.0 } else { 1.0 }),
        }
    }
    Ok(m)
}

/// Index of the basis state obtained by exchanging the bits under `mi` and `mj`.
#[inline]
pub fn swap_bits(x: usize, mi: usize, mj: usize) -> usize {
    if (x & mi == 0) != (x & mj == 0) {
        x ^ mi ^ mj
    } else {
        x
    }
}

/// Dense matrix asserted to be unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Largest element-wise deviation of `U U†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        let prod = &self.0 * self.0.adjoint();
        max_abs_diff(&prod, &CMatrix::identity(d, d))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        psi.apply(&self.0)
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.nrows(),
            });
        }
        Ok(&self.0 * rho * self.0.adjoint())
    }
}

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    check_qubit_count(n)?;
    if i == 0 || i >= j || j > n {
        return Err(Error::InvalidCoupling { i, j, n_qubits: n });
    }
    Ok(())
}

/// Permutation matrix exchanging qubits `i` and `j` (1-based, `i < j`).
pub fn swap_operator(i: usize, j: usize, n: usize) -> Result<UnitaryMatrix> {
    check_pair(i, j, n)?;
    let dim = 1usize << n;
    let (mi, mj) = (qubit_mask(i, n), qubit_mask(j, n));
    let mut s = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        s[(swap_bits(x, mi, mj), x)] = c(1.0);
    }
    Ok(UnitaryMatrix(s))
}

/// `cos(θ) I + i sin(θ) S_ij`.
pub fn partial_swap(theta: f64, i: usize, j: usize, n: usize) -> Result<UnitaryMatrix> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("swap angle {theta}")));
    }
    let s = swap_operator(i, j, n)?.into_matrix();
    let dim = s.nrows();
    let (sin, cos) = theta.sin_cos();
    let m = CMatrix::identity(dim, dim) * c(cos) + s * C64::new(0.0, sin);
    Ok(UnitaryMatrix(m))
}

/// Largest element-wise deviation of `m` from `m†`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a static Hermitian generator, reused for every
/// time step.
#[derive(Clone, Debug)]
pub struct FreePropagator {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl FreePropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let deviation = hermitian_defect(h);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let eig = SymmetricEigen::new(h.clone());
        Ok(FreePropagator {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `e^{-i H t} = V diag(e^{-i λ t}) V†`.
    pub fn at(&self, t: f64) -> UnitaryMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lambda * t);
            for x in scaled.column_mut(k).iter_mut() {
                *x *= phase;
            }
        }
        UnitaryMatrix(scaled * v.adjoint())
    }
}

/// `e^{-i H dt}` for Hermitian `H`.
pub fn free_propagator(h: &CMatrix, dt: f64) -> Result<UnitaryMatrix> {
    Ok(FreePropagator::new(h)?.at(dt))
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to `1e-10`.
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = DensityMatrix(m);
        rho.check(DENSITY_TOL)?;
        Ok(rho)
    }

    /// Wraps a matrix the caller already knows to be a density matrix.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    /// Fails unless the matrix is Hermitian, has unit trace and no eigenvalue
    /// below `-tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let m = &self.0;
        if m.nrows() != m.ncols() || !m.nrows().is_power_of_two() {
            return Err(Error::InvalidDensity(format!(
                "shape {}x{} is not a square power of two",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = hermitian_defect(m);
        if herm > tol {
            return Err(Error::InvalidDensity(format!("Hermitian defect {herm:e}")));
        }
        let tr = m.trace();
        if (tr - c(1.0)).norm() > tol {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -tol {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        // symmetrize so that rounding noise in the upper triangle is not ignored
        let sym = (&self.0 + self.0.adjoint()) * c(0.5);
        SymmetricEigen::new(sym).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `tr(O ρ)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<C64> {
        if op.shape() != self.0.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok((op * &self.0).trace())
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kronecker(&other.0))
    }

    /// Populations on the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }
}

/// `|ψ><ψ|`.
pub fn outer_product(psi: &StateVector) -> DensityMatrix {
    let a = psi.amplitudes();
    let d = a.len();
    DensityMatrix(CMatrix::from_fn(d, d, |r, col| a[r] * a[col].conj()))
}

/// Ground and excited populations `(1, e^{-βω}) / (1 + e^{-βω})` of a thermal
/// qubit with levels `0` and `ω`.
pub fn thermal_populations(beta: f64, omega: f64) -> [f64; 2] {
    let boltzmann = (-beta * omega).exp();
    let p0 = 1.0 / (1.0 + boltzmann);
    // for βω -> -inf the ratio form keeps p1 finite
    let p1 = if boltzmann.is_finite() {
        boltzmann / (1.0 + boltzmann)
    } else {
        1.0
    };
    [p0, p1]
}

/// Gibbs state `e^{-β H_b} / Z` of a qubit with `H_b = diag(0, ω)`.
pub fn thermal_qubit_dm(beta: f64, omega: f64) -> Result<DensityMatrix> {
    if beta.is_nan() || beta < 0.0 || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "thermal qubit needs beta >= 0 and finite omega (beta = {beta}, omega = {omega})"
        )));
    }
    let [p0, p1] = thermal_populations(beta, omega);
    Ok(DensityMatrix(CMatrix::from_diagonal(&DVector::from_vec(
        vec![c(p0), c(p1)],
    ))))
}
