//! Collision dynamics on wavefunctions and on density matrices.
//!
//! One collision appends a thermal ancilla as qubit `N+1`, applies the
//! partial swap between the target qubit and the ancilla, removes the
//! ancilla and evolves freely for `dt`. On a wavefunction the ancilla is a
//! random-phase sample and the removal is a Monte Carlo branch choice, so
//! each trajectory is a single root-to-leaf path of the branching tree. The
//! exact map performs the same three steps on `ρ ⊗ ρ_b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ops::{
    build_system_hamiltonian, partial_swap, swap_bits, thermal_qubit_dm, DensityMatrix,
    FreePropagator, SystemSpec, UnitaryMatrix,
};
use crate::ptrace::{gather_branch, ptrace_matrix, select_branch};
use crate::state::{expectation_slice, matvec_into, qubit_mask, StateVector};
use crate::stochastic::{thermal_ancilla_amplitudes, RngStream, ThermalAncillaSpec};
use crate::{CMatrix, Error, Result, C64};

/// Trajectories per deterministic work unit of an ensemble.
pub const ENSEMBLE_CHUNK: usize = 64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Parameters of a repeated-collision run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionConfig {
    pub system: SystemSpec,
    pub ancilla: ThermalAncillaSpec,
    /// Partial swap angle in radians.
    pub theta_s: f64,
    /// Free evolution time between collisions.
    pub dt: f64,
    pub n_collisions: usize,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.ancilla.validate()?;
        if !self.theta_s.is_finite() {
            return Err(Error::InvalidParameter(format!("theta_s = {}", self.theta_s)));
        }
        if !self.dt.is_finite() || self.dt < 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be >= 0, got {}", self.dt)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidParameter("ensemble size must be >= 1".into()));
        }
        if self.system.n_qubits + 1 > crate::MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(self.system.n_qubits + 1));
        }
        Ok(())
    }
}

/// Named Hermitian operator sampled along a trajectory.
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub operator: CMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableSample {
    /// 1-based collision count after which the sample was taken.
    pub collision: usize,
    /// Index into the observable list passed to the trajectory.
    pub observable: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub final_state: StateVector,
    pub samples: Vec<ObservableSample>,
    /// Monte Carlo branch chosen at each collision.
    pub branches: Vec<u8>,
}

impl TrajectoryRecord {
    /// Samples of one observable in collision order.
    pub fn series(&self, observable: usize) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.observable == observable)
            .map(|s| s.value)
            .collect()
    }
}

/// Reusable buffers for one worker.
#[derive(Clone, Debug)]
pub struct Scratch {
    joint: Vec<C64>,
    branch: Vec<C64>,
}

impl Scratch {
    pub fn new(n_qubits: usize) -> Self {
        Scratch {
            joint: vec![ZERO; 2 << n_qubits],
            branch: vec![ZERO; 1 << n_qubits],
        }
    }
}

/// Collision operator prepared for a fixed configuration: the free propagator
/// is diagonalized once and shared by all trajectories.
#[derive(Clone, Debug)]
pub struct Collider {
    config: CollisionConfig,
    populations: [f64; 2],
    cos: f64,
    sin: f64,
    target_mask: usize,
    propagator: Option<UnitaryMatrix>,
}

impl Collider {
    pub fn new(config: &CollisionConfig) -> Result<Self> {
        config.validate()?;
        let h = build_system_hamiltonian(&config.system)?;
        let propagator = if config.dt == 0.0 {
            None
        } else {
            Some(FreePropagator::new(&h)?.at(config.dt))
        };
        let (sin, cos) = config.theta_s.sin_cos();
        let n = config.system.n_qubits;
        Ok(Collider {
            populations: config.ancilla.populations(),
            cos,
            sin,
            target_mask: qubit_mask(config.system.target_qubit, n + 1),
            propagator,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &CollisionConfig {
        &self.config
    }

    pub fn n_qubits(&self) -> usize {
        self.config.system.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    fn check_state(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(())
    }

    /// Applies the partial swap to `ψ ⊗ β` and writes the result to
    /// `scratch.joint`. The ancilla is the least significant qubit.
    fn interact(&self, psi: &[C64], ancilla: [C64; 2], scratch: &mut Scratch) {
        let joint = &mut scratch.joint;
        for (x, &a) in psi.iter().enumerate() {
            joint[2 * x] = a * ancilla[0];
            joint[2 * x + 1] = a * ancilla[1];
        }
        let (mi, mj) = (self.target_mask, 1usize);
        let isin = C64::new(0.0, self.sin);
        // pairs {y, swap(y)} mix among themselves; fixed points only pick up
        // the phase cos + i sin
        for y in 0..joint.len() {
            let z = swap_bits(y, mi, mj);
            if z == y {
                joint[y] *= C64::new(self.cos, self.sin);
            } else if y < z {
                let (a, b) = (joint[y], joint[z]);
                joint[y] = a * self.cos + isin * b;
                joint[z] = b * self.cos + isin * a;
            }
        }
    }

    /// One collision applied in place to `psi`; returns the branch chosen for
    /// the ancilla. Draws two ancilla phases then one branch sample.
    pub fn step_in_place(&self, psi: &mut [C64], scratch: &mut Scratch, rng: &mut RngStream) -> u8 {
        let n = self.n_qubits();
        let ancilla = thermal_ancilla_amplitudes(&self.populations, rng);
        self.interact(psi, ancilla, scratch);
        let x_r = rng.uniform();

        let (w0, w1) = scratch.joint.chunks_exact(2).fold((0.0, 0.0), |(w0, w1), p| {
            (w0 + p[0].norm_sqr(), w1 + p[1].norm_sqr())
        });
        let chosen = select_branch(w0, w1, x_r);
        let weight = gather_branch(&scratch.joint, n + 1, n + 1, chosen, &mut scratch.branch);
        let inv = 1.0 / weight.sqrt();
        match &self.propagator {
            Some(u) => {
                scratch.branch.iter_mut().for_each(|a| *a *= inv);
                matvec_into(u.matrix(), &scratch.branch, psi);
            }
            None => {
                for (p, &b) in psi.iter_mut().zip(&scratch.branch) {
                    *p = b * inv;
                }
            }
        }
        chosen as u8
    }

    /// One collision on a state vector.
    pub fn collision_step(&self, psi: &StateVector, rng: &mut RngStream) -> Result<StateVector> {
        self.check_state(psi)?;
        let mut out = psi.amplitudes().to_vec();
        let mut scratch = Scratch::new(self.n_qubits());
        self.step_in_place(&mut out, &mut scratch, rng);
        StateVector::new(out)
    }

    /// Exhaustive two-branch expansion of one collision for a fixed ancilla
    /// sample: returns `(N_i², U φ^i)` for each branch with non-zero weight.
    pub fn branch_outcomes(
        &self,
        psi: &StateVector,
        ancilla: &StateVector,
    ) -> Result<Vec<(f64, StateVector)>> {
        self.check_state(psi)?;
        if ancilla.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: ancilla.dim(),
            });
        }
        let n = self.n_qubits();
        let amps = ancilla.amplitudes();
        let mut scratch = Scratch::new(n);
        self.interact(psi.amplitudes(), [amps[0], amps[1]], &mut scratch);
        let mut out = Vec::with_capacity(2);
        for i in 0..2 {
            let w = gather_branch(&scratch.joint, n + 1, n + 1, i, &mut scratch.branch);
            if w <= 0.0 {
                continue;
            }
            let inv = 1.0 / w.sqrt();
            let phi: Vec<C64> = scratch.branch.iter().map(|a| a * inv).collect();
            let phi = StateVector::new(phi)?;
            let evolved = match &self.propagator {
                Some(u) => u.apply(&phi)?,
                None => phi,
            };
            out.push((w, evolved));
        }
        Ok(out)
    }

    /// Final state after `n_collisions` collisions on stream `stream_id`.
    pub fn evolve(&self, psi0: &StateVector, stream_id: u64, scratch: &mut Scratch) -> Result<StateVector> {
        self.check_state(psi0)?;
        let mut rng = RngStream::new(self.config.seed, stream_id);
        let mut psi = psi0.amplitudes().to_vec();
        for _ in 0..self.config.n_collisions {
            self.step_in_place(&mut psi, scratch, &mut rng);
        }
        StateVector::new(psi)
    }

    /// Full trajectory with observable samples after every collision.
    pub fn run_trajectory(
        &self,
        psi0: &StateVector,
        stream_id: u64,
        observables: &[Observable],
    ) -> Result<TrajectoryRecord> {
        self.check_state(psi0)?;
        for obs in observables {
            if obs.operator.nrows() != self.dim() || obs.operator.ncols() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: obs.operator.nrows(),
                });
            }
        }
        let n_coll = self.config.n_collisions;
        let mut rng = RngStream::new(self.config.seed, stream_id);
        let mut scratch = Scratch::new(self.n_qubits());
        let mut psi = psi0.amplitudes().to_vec();
        let mut samples = Vec::with_capacity(n_coll * observables.len());
        let mut branches = Vec::with_capacity(n_coll);
        for collision in 1..=n_coll {
            branches.push(self.step_in_place(&mut psi, &mut scratch, &mut rng));
            for (idx, obs) in observables.iter().enumerate() {
                samples.push(ObservableSample {
                    collision,
                    observable: idx,
                    value: expectation_slice(&psi, &obs.operator)?.re,
                });
            }
        }
        Ok(TrajectoryRecord {
            final_state: StateVector::new(psi)?,
            samples,
            branches,
        })
    }

    /// Accumulates `count` trajectories on streams `stream_base + index`.
    ///
    /// Trajectories are grouped into fixed chunks of [`ENSEMBLE_CHUNK`] that
    /// are summed independently and merged in index order, so the result is
    /// bit-identical for any number of worker threads.
    pub fn ensemble(&self, psi0: &StateVector, count: usize, stream_base: u64) -> Result<EnsembleAccumulator> {
        self.check_state(psi0)?;
        let n_chunks = count.div_ceil(ENSEMBLE_CHUNK);
        let partials: Vec<EnsembleAccumulator> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| -> Result<EnsembleAccumulator> {
                let mut acc = EnsembleAccumulator::new(self.dim());
                let mut scratch = Scratch::new(self.n_qubits());
                let start = chunk * ENSEMBLE_CHUNK;
                let end = (start + ENSEMBLE_CHUNK).min(count);
                for idx in start..end {
                    let psi = self.evolve(psi0, stream_base + idx as u64, &mut scratch)?;
                    acc.add(&psi)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = EnsembleAccumulator::new(self.dim());
        for p in &partials {
            total.merge(p)?;
        }
        Ok(total)
    }
}

/// One collision with a freshly prepared [`Collider`].
pub fn collision_step(psi: &StateVector, config: &CollisionConfig, rng: &mut RngStream) -> Result<StateVector> {
    Collider::new(config)?.collision_step(psi, rng)
}

pub fn run_trajectory(
    psi0: &StateVector,
    config: &CollisionConfig,
    stream_id: u64,
    observables: &[Observable],
) -> Result<TrajectoryRecord> {
    Collider::new(config)?.run_trajectory(psi0, stream_id, observables)
}

/// `Θ_n(K)` for `config.ensemble_size` trajectories on streams `0..K`, run on
/// the current rayon pool.
pub fn simulate_ensemble(psi0: &StateVector, config: &CollisionConfig) -> Result<DensityMatrix> {
    Collider::new(config)?
        .ensemble(psi0, config.ensemble_size, 0)?
        .finalize()
}

/// Exact collision map on density matrices, built from dense operators.
#[derive(Clone, Debug)]
pub struct ExactCollisionMap {
    n_qubits: usize,
    interaction: UnitaryMatrix,
    bath: DensityMatrix,
    propagator: UnitaryMatrix,
}

impl ExactCollisionMap {
    pub fn new(config: &CollisionConfig) -> Result<Self> {
        config.validate()?;
        let n = config.system.n_qubits;
        let interaction = partial_swap(config.theta_s, config.system.target_qubit, n + 1, n + 1)?;
        let bath = thermal_qubit_dm(config.ancilla.beta, config.ancilla.omega)?;
        let h = build_system_hamiltonian(&config.system)?;
        let propagator = FreePropagator::new(&h)?.at(config.dt);
        Ok(ExactCollisionMap {
            n_qubits: n,
            interaction,
            bath,
            propagator,
        })
    }

    /// `U tr_b{S_p (ρ ⊗ ρ_b) S_p†} U†`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let dim = 1usize << self.n_qubits;
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho.dim(),
            });
        }
        let joint = rho.matrix().kronecker(self.bath.matrix());
        let mixed = self.interaction.conjugate(&joint)?;
        let reduced = ptrace_matrix(&mixed, self.n_qubits + 1, self.n_qubits + 1)?;
        let evolved = self.propagator.conjugate(&reduced)?;
        Ok(DensityMatrix::from_matrix_unchecked(evolved))
    }

    /// `M^n ρ`.
    pub fn iterate(&self, rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
        let mut out = rho.clone();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }
}

pub fn exact_collision_map(rho: &DensityMatrix, config: &CollisionConfig) -> Result<DensityMatrix> {
    ExactCollisionMap::new(config)?.apply(rho)
}

/// Running sum of trajectory outer products.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAccumulator {
    sum: CMatrix,
    count: u64,
}

impl EnsembleAccumulator {
    pub fn new(dim: usize) -> Self {
        EnsembleAccumulator {
            sum: CMatrix::zeros(dim, dim),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.nrows()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        let a = psi.amplitudes();
        for (c, col) in self.sum.column_iter_mut().enumerate() {
            let ac = a[c].conj();
            for (s, &ar) in col.into_iter().zip(a) {
                *s += ar * ac;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        self.sum += &other.sum;
        self.count += other.count;
        Ok(())
    }

    /// `(1/K) Σ |ψ_k><ψ_k|`, checked for Hermiticity and unit trace.
    pub fn finalize(&self) -> Result<DensityMatrix> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let m = &self.sum / C64::new(self.count as f64, 0.0);
        let herm = crate::ops::hermitian_defect(&m);
        let tr = m.trace();
        if herm > 1e-10 || (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidDensity(format!(
                "ensemble average has Hermitian defect {herm:e} and trace {tr}"
            )));
        }
        Ok(DensityMatrix::from_matrix_unchecked(m))
    }
}

/// `(1/K) Σ |ψ_k><ψ_k|` over the given states.
pub fn ensemble_average(states: &[StateVector]) -> Result<DensityMatrix> {
    let first = states.first().ok_or(Error::EmptyEnsemble)?;
    let mut acc = EnsembleAccumulator::new(first.dim());
    for s in states {
        acc.add(s)?;
    }
    acc.finalize()
}
