//! Dense Hermitian eigendecomposition and small matrix utilities.
//!
//! The eigensolver wraps nalgebra's `SymmetricEigen` behind the ndarray
//! types used everywhere else and adds the guarantees the rest of the crate
//! relies on: Hermiticity is checked up front, eigenvalues come back sorted
//! ascending, and eigenvectors are orthonormal columns.

use ndarray::{Array1, Array2};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues sorted ascending
/// and eigenvectors as the corresponding columns. Fails if the input is not
/// Hermitian within `1e-8` relative to its largest element.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let defect = hermiticity_defect(h);
    if defect > 1e-8 * (1.0 + scale) {
        return Err(Error::NonHermitian { defect });
    }

    let m = DMatrix::from_fn(n, n, |i, j| h[(i, j)]);
    let decomp = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .expect("finite eigenvalues")
    });

    let mut evals = Array1::zeros(n);
    let mut evecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        evals[col] = decomp.eigenvalues[k];
        for row in 0..n {
            evecs[(row, col)] = decomp.eigenvectors[(row, k)];
        }
    }
    Ok((evals, evecs))
}

/// Largest deviation |H_ij − conj(H_ji)| over all elements.
pub fn hermiticity_defect(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Largest element magnitude of U†U − I (0 for a perfect unitary).
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let gram = dagger(u).dot(u);
    let n = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// exp(−iHt) for a Hermitian H, computed by eigendecomposition.
///
/// Serves as the static-Hamiltonian oracle the adaptive integrator is
/// validated against, and as the exact idle propagator in tests.
pub fn evolution_from_static(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let (evals, evecs) = eigh(h)?;
    let n = evals.len();
    let mut phases = Array2::zeros((n, n));
    for k in 0..n {
        phases[(k, k)] = C64::from_polar(1.0, -evals[k] * t);
    }
    Ok(evecs.dot(&phases).dot(&dagger(&evecs)))
}

/// Largest element magnitude of A − B.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
