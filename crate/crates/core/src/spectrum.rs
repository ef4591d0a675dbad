//! Exact diagonalization with dressed-state labeling.
//!
//! In the dispersive regime each eigenvector of the coupled Hamiltonian
//! stays close to one bare occupation state, so eigenpairs can be labeled
//! by maximum overlap and the exact dispersive shifts read off as signed
//! combinations of labeled energies. The assignment is greedy over all
//! (label, eigenvector) pairs in descending overlap order; in the regime
//! where the labels mean anything the overlaps are near one and greedy is
//! exact, and when they are not the labeler refuses rather than guessing.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{format_label, Error, Result};
use crate::hilbert::{C64, ModeLayout};
use crate::perturbation::ExactShifts;
use crate::units::ghz_from_angular;

/// Diagonalizes a hermitian operator; eigenvalues ascending, eigenvectors
/// orthonormal in the columns.
pub fn eigensolve(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    crate::linalg::eigh(h)
}

/// Eigenpairs labeled by bare occupation numbers.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    layout: ModeLayout,
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
    assignment: Vec<usize>,
    overlap2: Vec<f64>,
}

impl LabeledSpectrum {
    /// The layout the labels refer to.
    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    fn index_of(&self, label: &[usize]) -> Result<usize> {
        self.layout
            .basis_index(label)
            .map_err(|_| Error::MissingLabel {
                label: format_label(label),
            })
    }

    /// Energy of the eigenstate labeled by the given occupations (angular).
    pub fn energy(&self, label: &[usize]) -> Result<f64> {
        Ok(self.eigenvalues[self.assignment[self.index_of(label)?]])
    }

    /// Squared overlap of the labeled eigenstate with its bare state.
    pub fn overlap2(&self, label: &[usize]) -> Result<f64> {
        Ok(self.overlap2[self.index_of(label)?])
    }

    /// The labeled eigenvector, phase-fixed so its largest component is
    /// real and positive.
    pub fn eigenvector(&self, label: &[usize]) -> Result<ArrayView1<'_, C64>> {
        Ok(self.eigenvectors.column(self.assignment[self.index_of(label)?]))
    }

    /// Smallest squared overlap over the eight computational labels.
    pub fn min_computational_overlap2(&self) -> f64 {
        self.layout
            .computational_labels()
            .iter()
            .map(|l| self.overlap2[self.layout.basis_index(l).unwrap()])
            .fold(f64::MAX, f64::min)
    }

    /// The eight labeled computational eigenvectors as columns, in
    /// b₁b₂b₃ binary order.
    pub fn computational_frame(&self) -> Array2<C64> {
        let labels = self.layout.computational_labels();
        let mut frame = Array2::zeros((self.layout.dim(), labels.len()));
        for (c, label) in labels.iter().enumerate() {
            frame
                .column_mut(c)
                .assign(&self.eigenvectors.column(self.assignment[self.layout.basis_index(label).unwrap()]));
        }
        frame
    }

    /// Energies of the eight computational labels in b₁b₂b₃ order (angular).
    pub fn computational_energies(&self) -> [f64; 8] {
        let labels = self.layout.computational_labels();
        let mut e = [0.0; 8];
        for (c, label) in labels.iter().enumerate() {
            e[c] = self.eigenvalues[self.assignment[self.layout.basis_index(label).unwrap()]];
        }
        e
    }

    /// One row per basis label: (label text, energy in GHz, overlap²),
    /// ordered by basis index.
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        (0..self.layout.dim())
            .map(|b| {
                let label = self.layout.label_of(b);
                (
                    format_label(&label),
                    ghz_from_angular(self.eigenvalues[self.assignment[b]]),
                    self.overlap2[b],
                )
            })
            .collect()
    }
}

/// Computational label for a layout: qubit bits in modes 0..3, every other
/// mode in its ground state.
fn padded_label(layout: &ModeLayout, bits: [usize; 3]) -> Vec<usize> {
    let mut label = vec![0; layout.n_modes()];
    label[..3].copy_from_slice(&bits);
    label
}

/// Greedily labels eigenpairs by descending squared overlap with the bare
/// basis. Every basis label receives exactly one eigenvector. Errors when a
/// computational label ends below overlap² = 0.5, distinguishing the case
/// where its natural eigenvector was claimed by a competing label.
pub fn assign_labels(
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
    layout: &ModeLayout,
) -> Result<LabeledSpectrum> {
    let dim = layout.dim();
    if eigenvectors.nrows() != dim || eigenvectors.ncols() != dim || eigenvalues.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: format!("{dim} eigenpairs of dimension {dim}"),
            got: format!(
                "{} values, {}x{} vectors",
                eigenvalues.len(),
                eigenvectors.nrows(),
                eigenvectors.ncols()
            ),
        });
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        for b in 0..dim {
            candidates.push((eigenvectors[(b, k)].norm_sqr(), b, k));
        }
    }
    candidates.sort_unstable_by(|x, y| {
        y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    });

    let mut assignment = vec![usize::MAX; dim];
    let mut overlap2 = vec![0.0; dim];
    let mut vector_owner = vec![usize::MAX; dim];
    let mut assigned = 0usize;
    for &(ov, b, k) in &candidates {
        if assignment[b] != usize::MAX || vector_owner[k] != usize::MAX {
            continue;
        }
        assignment[b] = k;
        overlap2[b] = ov;
        vector_owner[k] = b;
        assigned += 1;
        if assigned == dim {
            break;
        }
    }

    for bits in [
        [0, 0, 0],
        [0, 0, 1],
        [0, 1, 0],
        [0, 1, 1],
        [1, 0, 0],
        [1, 0, 1],
        [1, 1, 0],
        [1, 1, 1],
    ] {
        let label = padded_label(layout, bits);
        let b = layout.basis_index(&label).expect("computational label fits");
        if overlap2[b] >= 0.5 {
            continue;
        }
        let best_k = (0..dim)
            .max_by(|&p, &q| {
                eigenvectors[(b, p)]
                    .norm_sqr()
                    .total_cmp(&eigenvectors[(b, q)].norm_sqr())
            })
            .unwrap();
        let owner = vector_owner[best_k];
        if owner != b && owner != usize::MAX {
            return Err(Error::AmbiguousLabel {
                label_a: format_label(&label),
                label_b: format_label(&layout.label_of(owner)),
            });
        }
        return Err(Error::NonDispersiveLabel {
            label: format_label(&label),
            overlap2: overlap2[b],
        });
    }

    let mut eigenvectors = eigenvectors;
    for k in 0..dim {
        let col = eigenvectors.column(k);
        let lead = col
            .iter()
            .max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr()))
            .copied()
            .unwrap();
        if lead.norm() > 0.0 {
            let phase = lead.conj() / lead.norm();
            eigenvectors.column_mut(k).mapv_inplace(|z| z * phase);
        }
    }

    Ok(LabeledSpectrum {
        layout: layout.clone(),
        eigenvalues,
        eigenvectors,
        assignment,
        overlap2,
    })
}

/// Diagonalizes and labels in one step.
pub fn labeled_spectrum(h: &Array2<C64>, layout: &ModeLayout) -> Result<LabeledSpectrum> {
    let (vals, vecs) = eigensolve(h)?;
    assign_labels(vals, vecs, layout)
}

/// Exact dispersive shifts from labeled energies: the pair shifts are the
/// four-term combinations E₁₁ − E₁₀ − E₀₁ + E₀₀ over each qubit pair, and
/// χ₁₂₃ is the full shift of |111⟩ relative to additive single-qubit
/// energies, E₁₁₁ − E₁₀₀ − E₀₁₀ − E₀₀₁ + 2E₀₀₀.
pub fn dispersive_shifts_exact(spectrum: &LabeledSpectrum) -> Result<ExactShifts> {
    let e = |bits: [usize; 3]| spectrum.energy(&padded_label(spectrum.layout(), bits));
    let e000 = e([0, 0, 0])?;
    let e001 = e([0, 0, 1])?;
    let e010 = e([0, 1, 0])?;
    let e011 = e([0, 1, 1])?;
    let e100 = e([1, 0, 0])?;
    let e101 = e([1, 0, 1])?;
    let e110 = e([1, 1, 0])?;
    let e111 = e([1, 1, 1])?;
    Ok(ExactShifts {
        chi12: e110 - e100 - e010 + e000,
        chi23: e011 - e010 - e001 + e000,
        chi13: e101 - e100 - e001 + e000,
        chi123: e111 - e100 - e010 - e001 + 2.0 * e000,
    })
}

/// Dressed one-excitation frequencies (E|100⟩ − E|000⟩ and cyclic), angular.
pub fn dressed_qubit_frequencies(spectrum: &LabeledSpectrum) -> Result<[f64; 3]> {
    let e = |bits: [usize; 3]| spectrum.energy(&padded_label(spectrum.layout(), bits));
    let e000 = e([0, 0, 0])?;
    Ok([
        e([1, 0, 0])? - e000,
        e([0, 1, 0])? - e000,
        e([0, 0, 1])? - e000,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        dress_parameters, effective_hamiltonian, full_hamiltonian, BareParams, EffectiveParams,
    };
    use crate::units::mhz_from_angular;

    fn fig3() -> EffectiveParams {
        EffectiveParams::from_frequencies_ghz(
            [4.984, 5.300, 4.820],
            [-0.330, -0.240, -0.330],
            0.0154,
            0.0292,
            0.002,
        )
    }

    fn fig3_spectrum(levels: usize) -> LabeledSpectrum {
        let layout = ModeLayout::uniform(3, levels).unwrap();
        let h = effective_hamiltonian(&fig3(), &layout).unwrap();
        labeled_spectrum(&h, &layout).unwrap()
    }

    #[test]
    fn zero_couplings_label_perfectly() {
        let mut eff = fig3();
        eff.g12 = 0.0;
        eff.g23 = 0.0;
        eff.g13 = 0.0;
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let h = effective_hamiltonian(&eff, &layout).unwrap();
        let spec = labeled_spectrum(&h, &layout).unwrap();
        for (label, _, ov) in spec.rows() {
            assert!((ov - 1.0).abs() < 1e-12, "{label} overlap {ov}");
        }
        let e100 = spec.energy(&[1, 0, 0]).unwrap();
        assert!((e100 - eff.omega[0]).abs() < 1e-12);
        let shifts = dispersive_shifts_exact(&spec).unwrap();
        assert!(mhz_from_angular(shifts.chi123.abs()) < 1e-9);
    }

    #[test]
    fn operating_point_energies_and_overlaps() {
        let spec = fig3_spectrum(3);
        let cases = [
            ([0, 0, 1], 0.99632, 4.818223),
            ([0, 1, 0], 0.99398, 5.302523),
            ([0, 1, 1], 0.96730, 10.115904),
            ([1, 0, 0], 0.99760, 4.983253),
            ([1, 0, 1], 0.99380, 9.801495),
            ([1, 1, 0], 0.93461, 10.280932),
            ([1, 1, 1], 0.91974, 15.094882),
        ];
        for (label, ov, e_ghz) in cases {
            assert!(
                (spec.overlap2(&label).unwrap() - ov).abs() < 1e-4,
                "{label:?} overlap {}",
                spec.overlap2(&label).unwrap()
            );
            assert!(
                (ghz_from_angular(spec.energy(&label).unwrap()) - e_ghz).abs() < 1e-5,
                "{label:?} energy"
            );
        }
        assert!((spec.min_computational_overlap2() - 0.91974).abs() < 1e-4);

        let shifts = dispersive_shifts_exact(&spec).unwrap();
        assert!((mhz_from_angular(shifts.chi12) - (-4.8448)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi23) - (-4.8423)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi13) - 0.0188).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi123) - (-9.1185)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.three_body()) - 0.5498).abs() < 1e-3);
    }

    #[test]
    fn truncation_converges_between_four_and_five_levels() {
        let s4 = dispersive_shifts_exact(&fig3_spectrum(4)).unwrap();
        let s5 = dispersive_shifts_exact(&fig3_spectrum(5)).unwrap();
        // The pair shifts are already converged at three levels; the |111⟩
        // total completes at four, where the three-excitation sector gains
        // its last states, and is then exactly stable.
        assert!((mhz_from_angular(s4.chi123) - (-12.9707)).abs() < 1e-3);
        assert!(mhz_from_angular((s4.chi12 - s5.chi12).abs()) < 1e-6);
        assert!(mhz_from_angular((s4.chi123 - s5.chi123).abs()) < 1e-6);
    }

    #[test]
    fn dressed_reference_chain_shifts() {
        let eff = dress_parameters(&BareParams::reference_operating_point()).unwrap();
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let h = effective_hamiltonian(&eff, &layout).unwrap();
        let spec = labeled_spectrum(&h, &layout).unwrap();
        assert!((spec.min_computational_overlap2() - 0.9571).abs() < 1e-3);
        let shifts = dispersive_shifts_exact(&spec).unwrap();
        assert!((mhz_from_angular(shifts.chi12) - (-2.1687)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi23) - (-0.5650)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi13) - 0.0878).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi123) - (-2.6396)).abs() < 1e-3);
    }

    #[test]
    fn five_mode_reference_shifts() {
        let bare = BareParams::reference_operating_point();
        let layout = ModeLayout::uniform(5, 3).unwrap();
        let h = full_hamiltonian(&bare, &layout).unwrap();
        let spec = labeled_spectrum(&h, &layout).unwrap();
        assert!((spec.min_computational_overlap2() - 0.9053).abs() < 1e-3);
        let shifts = dispersive_shifts_exact(&spec).unwrap();
        assert!((mhz_from_angular(shifts.chi12) - (-4.4612)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi23) - (-2.3880)).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi13) - 0.1084).abs() < 1e-3);
        assert!((mhz_from_angular(shifts.chi123) - (-6.5806)).abs() < 1e-3);
        let dressed = dressed_qubit_frequencies(&spec).unwrap();
        assert!((ghz_from_angular(dressed[0]) - 4.987959).abs() < 1e-5);
        assert!((ghz_from_angular(dressed[1]) - 5.298556).abs() < 1e-5);
        assert!((ghz_from_angular(dressed[2]) - 4.820667).abs() < 1e-5);
    }

    #[test]
    fn decoupled_third_qubit_kills_its_shifts() {
        let mut eff = fig3();
        eff.g23 = 0.0;
        eff.g13 = 0.0;
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let h = effective_hamiltonian(&eff, &layout).unwrap();
        let shifts = dispersive_shifts_exact(&labeled_spectrum(&h, &layout).unwrap()).unwrap();
        assert!(mhz_from_angular(shifts.chi23.abs()) < 1e-9);
        assert!(mhz_from_angular(shifts.chi13.abs()) < 1e-9);
        assert!(mhz_from_angular(shifts.chi12.abs()) > 1.0);
    }

    #[test]
    fn shifts_ignore_global_energy_offset() {
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let mut h = effective_hamiltonian(&fig3(), &layout).unwrap();
        let base = dispersive_shifts_exact(&labeled_spectrum(&h, &layout).unwrap()).unwrap();
        for i in 0..layout.dim() {
            h[(i, i)] += C64::new(7.25, 0.0);
        }
        let shifted = dispersive_shifts_exact(&labeled_spectrum(&h, &layout).unwrap()).unwrap();
        assert!((base.chi12 - shifted.chi12).abs() < 1e-9);
        assert!((base.chi123 - shifted.chi123).abs() < 1e-9);
    }

    #[test]
    fn three_body_remainder_scales_cubically() {
        // Clean cubic scaling needs the three couplings comparable: the
        // leading remainder term carries the product of all three, so with
        // one coupling far below the others (as at the operating point,
        // where g13 is 2 MHz) quartic pair-pair terms dominate instead.
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let remainder = |scale: f64| {
            let mut eff = fig3();
            eff.g12 = crate::units::angular_from_ghz(0.010) * scale;
            eff.g23 = crate::units::angular_from_ghz(0.012) * scale;
            eff.g13 = crate::units::angular_from_ghz(0.008) * scale;
            let h = effective_hamiltonian(&eff, &layout).unwrap();
            let s = dispersive_shifts_exact(&labeled_spectrum(&h, &layout).unwrap()).unwrap();
            s.three_body()
        };
        let exponent = (remainder(1.0) / remainder(0.5)).abs().log2();
        assert!((exponent - 3.0).abs() < 0.15, "exponent {exponent}");
    }

    #[test]
    fn strong_coupling_is_rejected() {
        let mut eff = fig3();
        eff.g12 = crate::units::angular_from_ghz(0.158);
        let layout = ModeLayout::uniform(3, 3).unwrap();
        let h = effective_hamiltonian(&eff, &layout).unwrap();
        match labeled_spectrum(&h, &layout) {
            Err(Error::NonDispersiveLabel { overlap2, .. }) => assert!(overlap2 < 0.5),
            Err(Error::AmbiguousLabel { .. }) => {}
            other => panic!("expected labeling rejection, got {other:?}"),
        }
    }

    #[test]
    fn eigenvectors_are_phase_canonical() {
        let spec = fig3_spectrum(3);
        for label in spec.layout().computational_labels() {
            let v = spec.eigenvector(&label).unwrap();
            let lead = v
                .iter()
                .max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr()))
                .unwrap();
            assert!(lead.im.abs() < 1e-12);
            assert!(lead.re > 0.0);
        }
    }
}
