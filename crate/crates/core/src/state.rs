//! Dense state vectors over the big-endian computational basis.
//!
//! The basis of an `n`-qubit register is ordered by the binary value of its
//! label, with qubit 1 as the most significant digit:
//! `|00..0>, |00..1>, ..., |11..1>`.

use rand::Rng;

use crate::{CMatrix, Error, Result, C64, MAX_QUBITS};

/// Bit mask selecting qubit `q` (1-based) inside an `n`-qubit basis index.
#[inline]
pub fn qubit_mask(q: usize, n_qubits: usize) -> usize {
    debug_assert!(q >= 1 && q <= n_qubits);
    1 << (n_qubits - q)
}

pub(crate) fn check_qubit(q: usize, n_qubits: usize) -> Result<()> {
    if q == 0 || q > n_qubits {
        return Err(Error::QubitOutOfRange { index: q, n_qubits });
    }
    Ok(())
}

pub(crate) fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    Ok(())
}

/// Binary label of a basis state, qubit 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    bits: Vec<u8>,
}

impl BasisLabel {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some((position, &digit)) = bits.iter().enumerate().find(|(_, &d)| d > 1) {
            return Err(Error::InvalidLabel { position, digit });
        }
        Ok(BasisLabel { bits })
    }

    /// Inverse of [`BasisLabel::index`].
    pub fn from_index(index: usize, n_qubits: usize) -> Self {
        let bits = (1..=n_qubits)
            .map(|q| u8::from(index & qubit_mask(q, n_qubits) != 0))
            .collect();
        BasisLabel { bits }
    }

    /// Parses a string of `0`/`1` characters such as `"0110"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .bytes()
            .enumerate()
            .map(|(position, c)| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(Error::InvalidLabel {
                    position,
                    digit: other,
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(BasisLabel { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn n_qubits(&self) -> usize {
        self.bits.len()
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Position of a digit string in the ordered basis.
pub fn basis_index(bits: &[u8]) -> Result<usize> {
    Ok(BasisLabel::new(bits.to_vec())?.index())
}

/// Pure state of `n_qubits` qubits as `2^n_qubits` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes. The length must be a power of two; no
    /// normalization is applied.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.max(2).next_power_of_two(),
                found: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    /// Computational basis state with amplitude 1 at `index`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_label(label: &BasisLabel) -> Result<Self> {
        Self::basis(label.n_qubits(), label.index())
    }

    /// Normalized state with independent uniform components in the unit
    /// square, used for randomized tests and examples.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let amps = (0..1usize << n_qubits)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Ok(StateVector { n_qubits, amps }.normalize()?.0)
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

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self ⊗ other`: amplitude at `i * other.dim() + j` is `self[i] * other[j]`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n_qubits = self.n_qubits + other.n_qubits;
        check_qubit_count(n_qubits)?;
        let amps = self
            .amps
            .iter()
            .flat_map(|&a| other.amps.iter().map(move |&b| a * b))
            .collect();
        Ok(StateVector { n_qubits, amps })
    }

    /// Returns the unit vector along `self` together with the original norm.
    pub fn normalize(self) -> Result<(StateVector, f64)> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        let amps = self.amps.into_iter().map(|a| a * inv).collect();
        Ok((
            StateVector {
                n_qubits: self.n_qubits,
                amps,
            },
            norm,
        ))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `<psi|O|psi>`.
    pub fn expectation(&self, op: &CMatrix) -> Result<C64> {
        expectation_slice(&self.amps, op)
    }

    /// Matrix-vector product `op * self`.
    pub fn apply(&self, op: &CMatrix) -> Result<StateVector> {
        let dim = self.dim();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: op.nrows().max(op.ncols()),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        matvec_into(op, &self.amps, &mut out);
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }
}

pub(crate) fn expectation_slice(amps: &[C64], op: &CMatrix) -> Result<C64> {
    let dim = amps.len();
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: op.nrows().max(op.ncols()),
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for (c, &a) in amps.iter().enumerate() {
        let col = op.column(c);
        let mut s = C64::new(0.0, 0.0);
        for (r, &b) in amps.iter().enumerate() {
            s += b.conj() * col[r];
        }
        acc += s * a;
    }
    Ok(acc)
}

/// `out = op * v` for a column-major dense matrix. Dimensions are the
/// caller's responsibility.
pub(crate) fn matvec_into(op: &CMatrix, v: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
    for (c, &x) in v.iter().enumerate() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, &m) in out.iter_mut().zip(op.column(c).iter()) {
            *o += m * x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_index_examples() {
        assert_eq!(basis_index(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(basis_index(&[1, 1]).unwrap(), 3);
        // |00..1> is second in the ordered list, |01..1> sits just below the
        // upper half.
        assert_eq!(basis_index(&[0, 0, 0, 1]).unwrap(), 1);
        assert_eq!(basis_index(&[0, 1, 1, 1]).unwrap(), 7);
        assert_eq!(basis_index(&[0, 1, 0, 1]).unwrap(), 5);
    }

    #[test]
    fn basis_index_rejects_bad_digit() {
        assert!(matches!(
            basis_index(&[0, 2, 1]),
            Err(Error::InvalidLabel {
                position: 1,
                digit: 2
            })
        ));
        assert!(BasisLabel::parse("01x").is_err());
    }

    #[test]
    fn basis_round_trip() {
        for n in 1..=12 {
            for idx in 0..1usize << n {
                let label = BasisLabel::from_index(idx, n);
                assert_eq!(label.index(), idx);
                assert_eq!(BasisLabel::parse(&label.to_string()).unwrap(), label);
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let prod = zero.tensor(&one).unwrap();
        assert_eq!(prod, StateVector::basis(2, 1).unwrap());

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_real(&[h, h]).unwrap();
        let prod = plus.tensor(&zero).unwrap();
        let expected = [h, 0.0, h, 0.0];
        for (a, e) in prod.amplitudes().iter().zip(expected) {
            assert!((a - c(e, 0.0)).norm() < TOL);
        }
        assert!((prod.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn tensor_density_is_kronecker_of_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = StateVector::random(3, &mut rng).unwrap();
        let beta = StateVector::random(1, &mut rng).unwrap();
        let joint = psi.tensor(&beta).unwrap();

        let rho = |v: &StateVector| {
            let d = v.dim();
            CMatrix::from_fn(d, d, |r, c| v.amplitudes()[r] * v.amplitudes()[c].conj())
        };
        let (ra, rb, rj) = (rho(&psi), rho(&beta), rho(&joint));
        // Brute-force Kronecker product.
        for r in 0..16 {
            for c in 0..16 {
                let k = ra[(r / 2, c / 2)] * rb[(r % 2, c % 2)];
                assert!((rj[(r, c)] - k).norm() < TOL);
            }
        }
    }

    #[test]
    fn tensor_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = StateVector::random(2, &mut rng).unwrap();
        let b = StateVector::random(1, &mut rng).unwrap();
        let d = StateVector::random(2, &mut rng).unwrap();
        let left = a.tensor(&b).unwrap().tensor(&d).unwrap();
        let right = a.tensor(&b.tensor(&d).unwrap()).unwrap();
        for (x, y) in left.amplitudes().iter().zip(right.amplitudes()) {
            assert!((x - y).norm() < TOL);
        }
    }

    #[test]
    fn normalize_examples() {
        let (v, n) = StateVector::from_real(&[2.0, 0.0, 0.0, 0.0])
            .unwrap()
            .normalize()
            .unwrap();
        assert_eq!(n, 2.0);
        assert_eq!(v, StateVector::basis(2, 0).unwrap());

        let (v, n) = StateVector::basis(2, 3).unwrap().normalize().unwrap();
        assert_eq!(n, 1.0);
        assert_eq!(v, StateVector::basis(2, 3).unwrap());

        let (v, n) = StateVector::from_real(&[1.0; 4]).unwrap().normalize().unwrap();
        assert_eq!(n, 2.0);
        assert!(v.amplitudes().iter().all(|a| (a - c(0.5, 0.0)).norm() < TOL));
    }

    #[test]
    fn normalize_zero_vector() {
        let zero = StateVector::from_real(&[0.0; 4]).unwrap();
        assert!(matches!(zero.normalize(), Err(Error::ZeroNorm)));
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(StateVector::from_real(&[1.0, 0.0, 0.0]).is_err());
        assert!(StateVector::from_real(&[1.0]).is_err());
    }

    #[test]
    fn expectation_examples() {
        let sz = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let sx = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let zero = StateVector::basis(1, 0).unwrap();
        assert!((zero.expectation(&sz).unwrap() - c(1.0, 0.0)).norm() < TOL);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_real(&[h, h]).unwrap();
        assert!((plus.expectation(&sx).unwrap() - c(1.0, 0.0)).norm() < TOL);
        assert!(matches!(
            plus.expectation(&CMatrix::identity(4, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expectation_matches_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let dim = 1 << n;
            let a = CMatrix::from_fn(dim, dim, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let op = &a + a.adjoint();
            let psi = StateVector::random(n, &mut rng).unwrap();
            let rho = CMatrix::from_fn(dim, dim, |r, c| {
                psi.amplitudes()[r] * psi.amplitudes()[c].conj()
            });
            let trace = (&op * &rho).trace();
            let e = psi.expectation(&op).unwrap();
            assert!((e - trace).norm() < TOL);
            assert!(e.im.abs() < TOL);
            let id = psi.expectation(&CMatrix::identity(dim, dim)).unwrap();
            assert!((id - c(1.0, 0.0)).norm() < TOL);
        }
    }
}
