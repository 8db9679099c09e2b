//! Spin operators for a handful of spins in the product space, and the
//! angular-momentum recoupling machinery needed to analyse them.
//!
//! Conventions: `ħ = 1`, so a spin-1/2 component has eigenvalues `±1/2`.
//! Local basis states are ordered by decreasing `m` (index 0 is `|↑⟩`), and
//! particle 0 is the most significant factor of the Kronecker product.

mod coupled;
mod six_j;

pub use coupled::{block_decompose, block_decompose_in, reassemble, CoupledBasis, CoupledBasisLabel, SpinBlock};
pub use six_j::{basis_overlap, six_j, six_j_half};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, CMatrix, I, ONE, ZERO};

/// Largest supported product-space dimension (twelve spin-1/2 particles).
pub const MAX_DIMENSION: usize = 4096;

/// A non-negative or negative half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInteger(i32);

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger(0);
    pub const HALF: HalfInteger = HalfInteger(1);
    pub const ONE: HalfInteger = HalfInteger(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInteger(twice)
    }

    /// Parses a float that must be an exact multiple of 1/2.
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(Error::Domain(format!("{value} is not a half-integer")));
        }
        Ok(HalfInteger(twice.round() as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// `j(j+1)`.
    pub fn q(self) -> f64 {
        let j = self.value();
        j * (j + 1.0)
    }

    /// Recovers `j` from an eigenvalue `j(j+1)` of a squared spin.
    pub fn from_casimir(lambda: f64) -> Result<Self> {
        let j = ((1.0 + 4.0 * lambda.max(0.0)).sqrt() - 1.0) / 2.0;
        let h = HalfInteger((2.0 * j).round() as i32);
        if (h.q() - lambda).abs() > 1e-6 * (1.0 + lambda.abs()) {
            return Err(Error::Domain(format!("{lambda} is not of the form j(j+1)")));
        }
        Ok(h)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Spin matrices `(J_x, J_y, J_z)` for a single spin `j`, basis ordered by
/// decreasing `m`.
pub fn spin_matrices(j: HalfInteger) -> [CMatrix; 3] {
    let d = (j.twice() + 1) as usize;
    let jv = j.value();
    let m = |a: usize| jv - a as f64;
    let mut raise = CMatrix::zeros(d, d);
    for a in 1..d {
        raise[(a - 1, a)] = ONE * (jv * (jv + 1.0) - m(a) * (m(a) + 1.0)).sqrt();
    }
    let lower = raise.transpose();
    let jx = (&raise + &lower) * Complex64::new(0.5, 0.0);
    let jy = (&raise - &lower) * (-I * 0.5);
    let jz = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |a, _| ONE * m(a)));
    [jx, jy, jz]
}

/// Spin component operators for a set of particles in their product space.
///
/// Full-space matrices are produced on demand from the local spin matrices,
/// so the set itself stays small even at the dimension cap.
#[derive(Clone, Debug)]
pub struct SpinOperatorSet {
    spins: Vec<HalfInteger>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    dimension: usize,
    local: Vec<[CMatrix; 3]>,
}

/// Operator set for `n_qubits` spin-1/2 particles.
pub fn build_spin_operators(n_qubits: usize) -> Result<SpinOperatorSet> {
    if !(1..=12).contains(&n_qubits) {
        return Err(Error::Size(format!("n_qubits = {n_qubits} is outside 1..=12")));
    }
    SpinOperatorSet::with_spins(&vec![HalfInteger::HALF; n_qubits])
}

impl SpinOperatorSet {
    /// Operator set for particles of arbitrary spin (used for effective
    /// static spins larger than 1/2).
    pub fn with_spins(spins: &[HalfInteger]) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::Size("at least one particle is required".into()));
        }
        if let Some(bad) = spins.iter().find(|s| s.twice() < 1) {
            return Err(Error::Domain(format!("spin {bad} must be at least 1/2")));
        }
        let dims: Vec<usize> = spins.iter().map(|s| (s.twice() + 1) as usize).collect();
        let mut dimension = 1usize;
        for &d in &dims {
            dimension = dimension.saturating_mul(d);
            if dimension > MAX_DIMENSION {
                return Err(Error::Size(format!("product dimension exceeds {MAX_DIMENSION}")));
            }
        }
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Self {
            spins: spins.to_vec(),
            local: spins.iter().map(|&s| spin_matrices(s)).collect(),
            dims,
            strides,
            dimension,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.spins.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spins(&self) -> &[HalfInteger] {
        &self.spins
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn local(&self, particle: usize, axis: Axis) -> &CMatrix {
        &self.local[particle][axis.index()]
    }

    /// Local digit of `particle` in the full basis index `idx`.
    pub(crate) fn digit(&self, idx: usize, particle: usize) -> usize {
        (idx / self.strides[particle]) % self.dims[particle]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_particles() {
            return Err(Error::Index(format!(
                "particle {i} out of range for {} particles",
                self.n_particles()
            )));
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::Index(format!("pair indices must differ (got {i}, {i})")));
        }
        Ok(())
    }

    /// Product of local operators on distinct particles, identity elsewhere.
    pub fn embed(&self, factors: &[(usize, &CMatrix)]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dimension, self.dimension);
        let mut current: Vec<(usize, Complex64)> = Vec::new();
        let mut next: Vec<(usize, Complex64)> = Vec::new();
        for col in 0..self.dimension {
            current.clear();
            current.push((col, ONE));
            for &(p, op) in factors {
                let stride = self.strides[p];
                next.clear();
                for &(idx, amp) in &current {
                    let digit = self.digit(idx, p);
                    for r in 0..self.dims[p] {
                        let v = op[(r, digit)];
                        if v != ZERO {
                            next.push((idx - digit * stride + r * stride, amp * v));
                        }
                    }
                }
                std::mem::swap(&mut current, &mut next);
            }
            for &(row, amp) in &current {
                out[(row, col)] += amp;
            }
        }
        out
    }

    /// Full-space spin component of one particle.
    pub fn component(&self, particle: usize, axis: Axis) -> Result<CMatrix> {
        self.check_index(particle)?;
        Ok(self.embed(&[(particle, self.local(particle, axis))]))
    }

    /// Sum of one spin component over a subset of particles.
    pub fn total_component(&self, subset: &[usize], axis: Axis) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.dimension, self.dimension);
        for &p in subset {
            out += self.component(p, axis)?;
        }
        Ok(out)
    }
}

/// `σ_i · σ_j`, the contact Heisenberg coupling between two particles.
pub fn heisenberg_coupling(ops: &SpinOperatorSet, i: usize, j: usize) -> Result<CMatrix> {
    ops.check_pair(i, j)?;
    let mut out = CMatrix::zeros(ops.dimension, ops.dimension);
    for axis in Axis::ALL {
        out += ops.embed(&[(i, ops.local(i, axis)), (j, ops.local(j, axis))]);
    }
    Ok(out)
}

fn require_qubit_pair(ops: &SpinOperatorSet, i: usize, j: usize) -> Result<()> {
    ops.check_pair(i, j)?;
    if ops.dims[i] != 2 || ops.dims[j] != 2 {
        return Err(Error::Domain(format!("particles {i} and {j} must both be spin-1/2")));
    }
    Ok(())
}

/// The SWAP unitary exchanging the states of qubits `i` and `j`.
pub fn swap_operator(ops: &SpinOperatorSet, i: usize, j: usize) -> Result<CMatrix> {
    require_qubit_pair(ops, i, j)?;
    let mut out = CMatrix::zeros(ops.dimension, ops.dimension);
    for col in 0..ops.dimension {
        let (di, dj) = (ops.digit(col, i), ops.digit(col, j));
        let row = col - di * ops.strides[i] - dj * ops.strides[j] + dj * ops.strides[i] + di * ops.strides[j];
        out[(row, col)] = ONE;
    }
    Ok(out)
}

/// Projectors `(Π_s, Π_t)` onto the singlet and triplet subspaces of a pair.
pub fn singlet_triplet_projectors(ops: &SpinOperatorSet, i: usize, j: usize) -> Result<(CMatrix, CMatrix)> {
    require_qubit_pair(ops, i, j)?;
    let id = identity(ops.dimension);
    let singlet = &id * Complex64::new(0.25, 0.0) - heisenberg_coupling(ops, i, j)?;
    let triplet = id - &singlet;
    Ok((singlet, triplet))
}

/// `S²` of the total spin of `subset`.
pub fn total_spin_squared(ops: &SpinOperatorSet, subset: &[usize]) -> Result<CMatrix> {
    if subset.is_empty() {
        return Err(Error::Index("subset must not be empty".into()));
    }
    for (n, &p) in subset.iter().enumerate() {
        ops.check_index(p)?;
        if subset[..n].contains(&p) {
            return Err(Error::Index(format!("particle {p} repeated in subset")));
        }
    }
    let casimir: f64 = subset.iter().map(|&p| ops.spins[p].q()).sum();
    let mut out = identity(ops.dimension) * Complex64::new(casimir, 0.0);
    for (a, &p) in subset.iter().enumerate() {
        for &r in &subset[a + 1..] {
            out += heisenberg_coupling(ops, p, r)? * Complex64::new(2.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, hermitian_eigenvalues, hermiticity_defect, max_abs, max_abs_diff, trace};

    fn close(values: &[f64], expected: &[f64], tol: f64) -> bool {
        values.len() == expected.len() && values.iter().zip(expected).all(|(a, b)| (a - b).abs() < tol)
    }

    #[test]
    fn single_qubit_sigma_z() {
        let ops = build_spin_operators(1).unwrap();
        let sz = ops.component(0, Axis::Z).unwrap();
        assert_eq!(sz[(0, 0)], ONE * 0.5);
        assert_eq!(sz[(1, 1)], ONE * -0.5);
        assert_eq!(sz[(0, 1)], ZERO);
    }

    #[test]
    fn two_qubit_total_sz_spectrum() {
        let ops = build_spin_operators(2).unwrap();
        let sz = ops.total_component(&[0, 1], Axis::Z).unwrap();
        assert!(close(&hermitian_eigenvalues(&sz), &[-1.0, 0.0, 0.0, 1.0], 1e-14));
    }

    #[test]
    fn three_qubit_components_traceless_with_quarter_squares() {
        let ops = build_spin_operators(3).unwrap();
        for p in 0..3 {
            for axis in Axis::ALL {
                let s = ops.component(p, axis).unwrap();
                assert!(trace(&s).norm() < 1e-14);
                let sq = hermitian_eigenvalues(&(&s * &s));
                assert!(sq.iter().all(|v| (v - 0.25).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn operator_set_invariants() {
        let ops = build_spin_operators(4).unwrap();
        let id = identity(ops.dimension());
        for i in 0..4 {
            let mut sq = CMatrix::zeros(16, 16);
            for a in Axis::ALL {
                let si = ops.component(i, a).unwrap();
                assert!(hermiticity_defect(&si) < 1e-12);
                let ev = hermitian_eigenvalues(&si);
                assert!(ev.iter().all(|v| (v.abs() - 0.5).abs() < 1e-12));
                sq += &si * &si;
                for j in (0..4).filter(|&j| j != i) {
                    for b in Axis::ALL {
                        let sj = ops.component(j, b).unwrap();
                        assert!(max_abs(&commutator(&si, &sj)) < 1e-12);
                    }
                }
            }
            assert!(max_abs_diff(&sq, &(&id * Complex64::new(0.75, 0.0))) < 1e-12);
        }
    }

    #[test]
    fn size_limits() {
        assert!(matches!(build_spin_operators(0), Err(Error::Size(_))));
        assert!(matches!(build_spin_operators(13), Err(Error::Size(_))));
        assert!(build_spin_operators(12).is_ok());
    }

    #[test]
    fn heisenberg_spectrum_and_identity() {
        let ops = build_spin_operators(2).unwrap();
        let c = heisenberg_coupling(&ops, 0, 1).unwrap();
        assert!(close(&hermitian_eigenvalues(&c), &[-0.75, 0.25, 0.25, 0.25], 1e-14));
        // σ_i·σ_j = (S_ij² − σ_i² − σ_j²)/2
        let s2 = total_spin_squared(&ops, &[0, 1]).unwrap();
        let rhs = (s2 - identity(4) * Complex64::new(1.5, 0.0)) * Complex64::new(0.5, 0.0);
        assert!(max_abs_diff(&c, &rhs) < 1e-14);
        assert!(matches!(heisenberg_coupling(&ops, 1, 1), Err(Error::Index(_))));
    }

    #[test]
    fn heisenberg_commutes_with_total_spin_of_three() {
        let ops = build_spin_operators(3).unwrap();
        let c = heisenberg_coupling(&ops, 0, 1).unwrap();
        let s2 = total_spin_squared(&ops, &[0, 1, 2]).unwrap();
        assert!(max_abs(&commutator(&c, &s2)) < 1e-13);
    }

    #[test]
    fn swap_maps_up_down_and_squares_to_identity() {
        let ops = build_spin_operators(2).unwrap();
        let w = swap_operator(&ops, 0, 1).unwrap();
        // |↑↓⟩ = index 1, |↓↑⟩ = index 2
        assert_eq!(w[(2, 1)], ONE);
        assert_eq!(w[(1, 1)], ZERO);
        assert!(max_abs_diff(&(&w * &w), &identity(4)) < 1e-15);
        let (ps, pt) = singlet_triplet_projectors(&ops, 0, 1).unwrap();
        assert!(max_abs_diff(&w, &(pt - ps)) < 1e-14);
        assert!(swap_operator(&ops, 0, 0).is_err());
    }

    #[test]
    fn swap_conjugates_spin_components() {
        let ops = build_spin_operators(3).unwrap();
        let w = swap_operator(&ops, 0, 2).unwrap();
        for a in Axis::ALL {
            let s0 = ops.component(0, a).unwrap();
            let s2 = ops.component(2, a).unwrap();
            assert!(max_abs_diff(&(&w * &s0 * &w), &s2) < 1e-14);
        }
    }

    #[test]
    fn projectors() {
        let ops = build_spin_operators(2).unwrap();
        let (ps, pt) = singlet_triplet_projectors(&ops, 0, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi_minus = nalgebra::DVector::from_vec(vec![ZERO, ONE * s, ONE * -s, ZERO]);
        assert!((&ps * &psi_minus - &psi_minus).norm() < 1e-15);
        let up_up = nalgebra::DVector::from_vec(vec![ONE, ZERO, ZERO, ZERO]);
        assert!((&ps * &up_up).norm() < 1e-15);
        assert!(max_abs(&(&ps * &pt)) < 1e-15);
        assert!(max_abs_diff(&(&ps * &ps), &ps) < 1e-15);
        assert!(max_abs_diff(&(&ps + &pt), &identity(4)) < 1e-15);
        assert!((trace(&ps).re - 1.0).abs() < 1e-15);
        assert!((trace(&pt).re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn total_spin_squared_spectra() {
        let ops = build_spin_operators(3).unwrap();
        let pair = total_spin_squared(&ops, &[0, 1]).unwrap();
        let ev: Vec<f64> = hermitian_eigenvalues(&pair);
        // each value twice because of the spectator qubit
        assert!(close(&ev, &[0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0], 1e-13));
        let all = total_spin_squared(&ops, &[0, 1, 2]).unwrap();
        let ev = hermitian_eigenvalues(&all);
        assert!(close(&ev, &[0.75, 0.75, 0.75, 0.75, 3.75, 3.75, 3.75, 3.75], 1e-13));
        assert!(total_spin_squared(&ops, &[]).is_err());
        assert!(total_spin_squared(&ops, &[0, 0]).is_err());
    }

    #[test]
    fn pair_spins_do_not_commute_among_themselves() {
        let ops = build_spin_operators(3).unwrap();
        let s_f1 = total_spin_squared(&ops, &[0, 1]).unwrap();
        let s_f2 = total_spin_squared(&ops, &[0, 2]).unwrap();
        let s = total_spin_squared(&ops, &[0, 1, 2]).unwrap();
        assert!(max_abs(&commutator(&s_f1, &s)) < 1e-13);
        assert!(max_abs(&commutator(&s_f1, &s_f2)) > 0.1);
    }

    #[test]
    fn higher_spin_matrices() {
        for twice in 1..=6 {
            let j = HalfInteger::from_twice(twice);
            let [jx, jy, jz] = spin_matrices(j);
            let j2 = &jx * &jx + &jy * &jy + &jz * &jz;
            let d = (twice + 1) as usize;
            assert!(max_abs_diff(&j2, &(identity(d) * Complex64::new(j.q(), 0.0))) < 1e-12);
            // [Jx, Jy] = i Jz
            assert!(max_abs_diff(&commutator(&jx, &jy), &(&jz * I)) < 1e-12);
        }
    }

    #[test]
    fn half_integer_parsing() {
        assert_eq!(HalfInteger::new(1.5).unwrap().twice(), 3);
        assert!(HalfInteger::new(0.3).is_err());
        assert_eq!(HalfInteger::from_casimir(3.75).unwrap(), HalfInteger::from_twice(3));
        assert!(HalfInteger::from_casimir(1.0).is_err());
        assert_eq!(HalfInteger::from_twice(3).to_string(), "3/2");
        assert_eq!(HalfInteger::from_twice(4).to_string(), "2");
    }
}
