//! Tensor-product Hilbert space bookkeeping for a chain of bosonic modes.
//!
//! A [`ModeLayout`] fixes the number of modes and the per-mode truncation.
//! Basis states are occupation-number labels ordered row-major (the last
//! mode varies fastest), and all operators are dense complex matrices over
//! the full product space. Dimensions stay small (at most 3⁵ = 243 for the
//! five-mode circuit model), so dense storage is deliberate.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{format_label, Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Mode count and per-mode level truncation of a product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    dims: Vec<usize>,
}

impl ModeLayout {
    /// Creates a layout from per-mode dimensions; each mode needs ≥ 2 levels.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Validation("layout needs at least one mode".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::Validation(format!(
                "every mode needs at least 2 levels, got {d}"
            )));
        }
        Ok(Self { dims })
    }

    /// Uniform layout: `n_modes` modes with `levels` levels each.
    pub fn uniform(n_modes: usize, levels: usize) -> Result<Self> {
        Self::new(vec![levels; n_modes])
    }

    /// Per-mode dimensions.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes.
    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    /// Total product-space dimension.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major flat index of an occupation label (last mode fastest).
    pub fn basis_index(&self, label: &[usize]) -> Result<usize> {
        if label.len() != self.dims.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mode occupations", self.dims.len()),
                got: format!("{}", label.len()),
            });
        }
        let mut idx = 0;
        for (n, d) in label.iter().zip(&self.dims) {
            if n >= d {
                return Err(Error::Validation(format!(
                    "occupation {n} exceeds mode truncation {d} in {}",
                    format_label(label)
                )));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Occupation label of a flat index; inverse of [`basis_index`].
    ///
    /// [`basis_index`]: ModeLayout::basis_index
    pub fn label_of(&self, index: usize) -> Vec<usize> {
        let mut rem = index;
        let mut label = vec![0; self.dims.len()];
        for (slot, d) in label.iter_mut().zip(&self.dims).rev() {
            *slot = rem % d;
            rem /= d;
        }
        label
    }

    /// Annihilation operator for one mode, embedded in the full space.
    pub fn lowering(&self, mode: usize) -> Array2<C64> {
        let d = self.dims[mode];
        let mut a = Array2::zeros((d, d));
        for n in 1..d {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        self.embed(&a, mode)
    }

    /// Number operator n̂ for one mode, embedded in the full space.
    pub fn number(&self, mode: usize) -> Array2<C64> {
        let d = self.dims[mode];
        let mut n_op = Array2::zeros((d, d));
        for n in 0..d {
            n_op[(n, n)] = C64::new(n as f64, 0.0);
        }
        self.embed(&n_op, mode)
    }

    /// Identity on the full space.
    pub fn identity(&self) -> Array2<C64> {
        Array2::eye(self.dim())
    }

    /// Embeds a single-mode operator at position `mode` via Kronecker products.
    pub fn embed(&self, op: &Array2<C64>, mode: usize) -> Array2<C64> {
        assert_eq!(op.nrows(), self.dims[mode], "operator does not fit mode");
        let mut full = Array2::eye(1);
        for (k, &d) in self.dims.iter().enumerate() {
            let factor = if k == mode {
                op.clone()
            } else {
                Array2::eye(d)
            };
            full = kron(&full, &factor);
        }
        full
    }

    /// Diagonal of Σ_k f(k, n_k) as a vector over the full space.
    ///
    /// Evaluates `f(mode, occupation)` for every mode of every basis label
    /// and sums; this is how bare transmon energies are assembled without
    /// building matrices.
    pub fn diagonal_sum(&self, f: impl Fn(usize, usize) -> f64) -> Array1<f64> {
        let dim = self.dim();
        let mut diag = Array1::zeros(dim);
        for idx in 0..dim {
            let label = self.label_of(idx);
            diag[idx] = label.iter().enumerate().map(|(k, &n)| f(k, n)).sum();
        }
        diag
    }

    /// The eight computational labels: modes 0–2 in {0,1}, any further modes
    /// pinned to 0, ordered by the binary value b₁b₂b₃ (so |101⟩ is fifth).
    pub fn computational_labels(&self) -> Vec<Vec<usize>> {
        assert!(self.n_modes() >= 3, "computational labels need 3 qubit modes");
        let mut out = Vec::with_capacity(8);
        for b in 0..8usize {
            let mut label = vec![0; self.n_modes()];
            label[0] = (b >> 2) & 1;
            label[1] = (b >> 1) & 1;
            label[2] = b & 1;
            out.push(label);
        }
        out
    }

    /// Flat indices of the eight computational labels.
    pub fn computational_indices(&self) -> Vec<usize> {
        self.computational_labels()
            .iter()
            .map(|l| self.basis_index(l).expect("computational label in range"))
            .collect()
    }
}

/// Kronecker product of two dense complex matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}
