//! Dense complex matrix helpers shared by the scattering and protocol code.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Frobenius norm.
pub fn norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// `max(|U†U − I|, |UU† − I|)` entrywise.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let id = identity(u.nrows());
    max_abs_diff(&(u.adjoint() * u), &id).max(max_abs_diff(&(u * u.adjoint()), &id))
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let eig = a.clone().symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|x, y| x.total_cmp(y));
    values
}

/// Partial trace over all subsystems except `keep`, for a product space with
/// local dimensions `dims` (subsystem 0 most significant).
pub fn reduce_to(rho: &CMatrix, dims: &[usize], keep: usize) -> CMatrix {
    let total: usize = dims.iter().product();
    assert_eq!(rho.nrows(), total);
    let dk = dims[keep];
    let stride: usize = dims[keep + 1..].iter().product();
    let mut out = CMatrix::zeros(dk, dk);
    // Environment indices are all full indices with the kept digit set to zero.
    for env in (0..total).filter(|idx| (idx / stride).is_multiple_of(dk)) {
        for a in 0..dk {
            for b in 0..dk {
                out[(a, b)] += rho[(env + a * stride, env + b * stride)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_trace_of_product_state() {
        let a = CMatrix::from_row_slice(2, 2, &[ONE * 0.7, ZERO, ZERO, ONE * 0.3]);
        let b = CMatrix::from_row_slice(2, 2, &[ONE * 0.5, ONE * 0.5, ONE * 0.5, ONE * 0.5]);
        let c = CMatrix::from_row_slice(2, 2, &[ONE * 0.1, I * 0.2, -I * 0.2, ONE * 0.9]);
        let rho = kron(&kron(&a, &b), &c);
        let dims = [2, 2, 2];
        assert!(max_abs_diff(&reduce_to(&rho, &dims, 0), &a) < 1e-15);
        assert!(max_abs_diff(&reduce_to(&rho, &dims, 1), &b) < 1e-15);
        assert!(max_abs_diff(&reduce_to(&rho, &dims, 2), &c) < 1e-15);
    }

    #[test]
    fn unitarity_defect_detects_scaling() {
        let u = identity(3) * Complex64::from_polar(1.0, 0.4);
        assert!(unitarity_defect(&u) < 1e-15);
        assert!(unitarity_defect(&(u * (ONE * 1.01))) > 1e-3);
    }
}
