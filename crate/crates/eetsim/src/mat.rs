//! Small dense complex-matrix helpers shared across modules.
//!
//! Everything operates on `nalgebra::DMatrix<Complex64>`. Dimensions in
//! this crate are tiny (2..=16), so clarity beats blocking tricks.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// 2x2 identity.
pub(crate) fn pauli_i() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

/// Pauli X.
pub(crate) fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ONE, C64::ZERO])
}

/// Pauli Y.
pub(crate) fn pauli_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::ZERO, -C64::I, C64::I, C64::ZERO],
    )
}

/// Pauli Z.
pub(crate) fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::ONE, C64::ZERO, C64::ZERO, -C64::ONE])
}

/// Kronecker product, `a (x) b`.
pub(crate) fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Largest absolute deviation from Hermiticity, `max_ij |H - H^dag|`.
pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix: `(eigenvalues, eigenvectors)`
/// with `H = V diag(w) V^dag`.
pub(crate) fn eigh(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let se = h.clone().symmetric_eigen();
    (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
}

/// `exp(-i t H)` for Hermitian `H`, via eigendecomposition.
///
/// Exactly unitary up to the orthonormality of the eigensolver output
/// (`~1e-15` per call), which is what keeps long piecewise propagations
/// norm-preserving without any renormalization.
pub(crate) fn expm_mi_t_h(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let (w, v) = eigh(h);
    let dim = h.nrows();
    let mut phased = v.clone();
    for (k, wk) in w.iter().enumerate() {
        let phase = C64::from_polar(1.0, -t * wk);
        for r in 0..dim {
            phased[(r, k)] *= phase;
        }
    }
    phased * v.adjoint()
}
