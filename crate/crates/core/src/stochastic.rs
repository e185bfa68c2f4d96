//! Random-phase unraveling of mixed states.
//!
//! A density matrix diagonal in `{|n>}` with weights `p_n` is the ensemble
//! average of `Σ_n sqrt(p_n) e^{iθ_n} |n>` over i.i.d. uniform phases; the
//! cross terms vanish because `E[e^{i(θ_j - θ_k)}] = δ_jk`. The thermal
//! ancilla of a collision is sampled this way from its Gibbs populations.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ops::thermal_populations;
use crate::state::StateVector;
use crate::{Error, Result, C64};

/// Reproducible random stream for one trajectory.
///
/// The generator is ChaCha8 keyed by `seed` with `stream_id` selecting an
/// independent 2^64-block stream, so the samples of a trajectory depend only
/// on `(seed, stream_id)` and never on scheduling.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform sample on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform phase on `[0, 2π)`.
    pub fn phase(&mut self) -> f64 {
        TAU * self.uniform()
    }

    /// Unit-modulus factor `e^{iθ}` with a uniform phase.
    pub fn phase_factor(&mut self) -> C64 {
        C64::from_polar(1.0, self.phase())
    }
}

/// Thermal ancilla qubit with levels `0` and `omega` at inverse temperature
/// `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalAncillaSpec {
    pub beta: f64,
    pub omega: f64,
}

impl ThermalAncillaSpec {
    pub fn new(beta: f64, omega: f64) -> Result<Self> {
        let spec = ThermalAncillaSpec { beta, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta < 0.0 || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ancilla needs beta >= 0 and finite omega (beta = {}, omega = {})",
                self.beta, self.omega
            )));
        }
        Ok(())
    }

    pub fn populations(&self) -> [f64; 2] {
        thermal_populations(self.beta, self.omega)
    }
}

/// Equal-modulus vector `e^{iθ_n} / sqrt(dim)` with i.i.d. uniform phases.
pub fn random_phase_vector(dim: usize, rng: &mut RngStream) -> Vec<C64> {
    assert!(dim >= 1, "random phase vector needs dim >= 1");
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim).map(|_| rng.phase_factor() * scale).collect()
}

/// Random-phase state over `n_qubits` qubits.
pub fn random_phase_state(n_qubits: usize, rng: &mut RngStream) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > crate::MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    StateVector::new(random_phase_vector(1 << n_qubits, rng))
}

/// Writes a thermal ancilla sample `sqrt(p_i) e^{iθ_i}` into `out`, drawing
/// the phase of level 0 first.
#[inline]
pub(crate) fn thermal_ancilla_amplitudes(populations: &[f64; 2], rng: &mut RngStream) -> [C64; 2] {
    let a0 = rng.phase_factor() * populations[0].sqrt();
    let a1 = rng.phase_factor() * populations[1].sqrt();
    [a0, a1]
}

/// One random-phase sample of the thermal ancilla; the ensemble of samples
/// averages to the Gibbs state.
pub fn thermal_ancilla(spec: &ThermalAncillaSpec, rng: &mut RngStream) -> Result<StateVector> {
    spec.validate()?;
    let amps = thermal_ancilla_amplitudes(&spec.populations(), rng);
    StateVector::new(amps.to_vec())
}

const PROBABILITY_TOL: f64 = 1e-12;

/// Samples `Σ_n sqrt(p_n) e^{iθ_n} |n>` for a density matrix given in its
/// eigenbasis.
///
/// `basis` holds the orthonormal eigenvectors matching `probabilities`.
/// Orthonormality is the caller's responsibility.
pub fn unravel_density(
    probabilities: &[f64],
    basis: &[StateVector],
    rng: &mut RngStream,
) -> Result<StateVector> {
    check_probabilities(probabilities)?;
    if basis.len() != probabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: probabilities.len(),
            found: basis.len(),
        });
    }
    let dim = basis.first().map(StateVector::dim).ok_or(Error::EmptyEnsemble)?;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (p, v) in probabilities.iter().zip(basis) {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
        let coeff = rng.phase_factor() * p.sqrt();
        for (a, &b) in amps.iter_mut().zip(v.amplitudes()) {
            *a += coeff * b;
        }
    }
    StateVector::new(amps)
}

/// [`unravel_density`] for a density matrix diagonal in the computational
/// basis.
pub fn unravel_diagonal(probabilities: &[f64], rng: &mut RngStream) -> Result<StateVector> {
    check_probabilities(probabilities)?;
    let amps = probabilities
        .iter()
        .map(|p| rng.phase_factor() * p.sqrt())
        .collect();
    StateVector::new(amps)
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidProbabilities { sum });
    }
    Ok(())
}
