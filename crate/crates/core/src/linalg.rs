//! Small dense-matrix helpers over complex Hermitian matrices.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cr, Real, C};

/// Eigen-decomposition of a Hermitian matrix (the strictly lower triangle is
/// read, so slight asymmetry from rounding is harmless).
pub fn hermitian_eigen<T: Real>(m: &DMatrix<C<T>>) -> (DVector<T>, DMatrix<C<T>>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn min_eigenvalue<T: Real>(m: &DMatrix<C<T>>) -> T {
    let (vals, _) = hermitian_eigen(m);
    vals.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
}

/// Square root of a positive semidefinite Hermitian matrix; negative rounding
/// eigenvalues are clamped to zero.
pub fn psd_sqrt<T: Real>(m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (vals, vecs) = hermitian_eigen(m);
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|&v| cr(v.max(T::zero()).sqrt())));
    &vecs * DMatrix::from_diagonal(&roots) * vecs.adjoint()
}

pub fn max_abs<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| a.max(b))
}

/// `max |A - A†|` elementwise.
pub fn hermiticity_defect<T: Real>(m: &DMatrix<C<T>>) -> T {
    max_abs(&(m - m.adjoint()))
}

pub fn trace<T: Real>(m: &DMatrix<C<T>>) -> C<T> {
    m.diagonal().iter().fold(C::new(T::zero(), T::zero()), |a, &b| a + b)
}

/// `(A + A†)/2`.
pub fn hermitize<T: Real>(m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    (m + m.adjoint()) * cr(T::lit(0.5))
}
