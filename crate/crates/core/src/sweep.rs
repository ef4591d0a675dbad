//! Parameter sweeps over the effective model and drive.
//!
//! A sweep is a Cartesian grid over scalar fields of the effective
//! parameters and the drive signal. Every grid point is scored
//! independently: exact dispersive shifts from the labeled spectrum, the
//! driven gate, idle-referenced phase correction, and process fidelity.
//! Rows fail individually (a resonant point cannot be labeled, for
//! example) without aborting the rest, and results are keyed by the flat
//! grid index so reruns and partial resumes land on identical rows.
//!
//! Grid values are in the field's storage unit: angular frequency (rad/ns)
//! for the frequency-like fields, nanoseconds for σ and the gate window,
//! radians for φ₀.

use rayon::prelude::*;

use crate::dynamics::{effective_gate, PropagationConfig};
use crate::error::{Error, Result};
use crate::fidelity::{fidelity_report, idle_phase_reference};
use crate::hilbert::ModeLayout;
use crate::model::{effective_hamiltonian, EffectiveParams};
use crate::pulse::DriveSignal;
use crate::spectrum::{dispersive_shifts_exact, labeled_spectrum};

/// Scalar field addressed by a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepField {
    /// Dressed qubit frequency, mode index 0..3.
    Omega(usize),
    /// Anharmonicity, mode index 0..3.
    Alpha(usize),
    G12,
    G23,
    G13,
    OmegaPeak,
    OmegaDrive,
    Sigma,
    Beta,
    Phi0,
    TGate,
}

impl SweepField {
    fn validate(&self) -> Result<()> {
        match self {
            SweepField::Omega(k) | SweepField::Alpha(k) if *k >= 3 => {
                Err(Error::Validation(format!(
                    "qubit index {k} out of range for a three-qubit sweep field"
                )))
            }
            _ => Ok(()),
        }
    }

    fn apply(&self, v: f64, eff: &mut EffectiveParams, drive: &mut DriveSignal) {
        match self {
            SweepField::Omega(k) => eff.omega[*k] = v,
            SweepField::Alpha(k) => eff.alpha[*k] = v,
            SweepField::G12 => eff.g12 = v,
            SweepField::G23 => eff.g23 = v,
            SweepField::G13 => eff.g13 = v,
            SweepField::OmegaPeak => drive.omega_peak = v,
            SweepField::OmegaDrive => drive.omega_drive = v,
            SweepField::Sigma => drive.sigma = v,
            SweepField::Beta => drive.beta = v,
            SweepField::Phi0 => drive.phi0 = v,
            SweepField::TGate => drive.t_gate = v,
        }
    }
}

/// One sweep axis: a field and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub field: SweepField,
    pub values: Vec<f64>,
}

/// Cartesian product of axes; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axes: Vec<SweepAxis>,
}

impl SweepGrid {
    pub fn new(axes: Vec<SweepAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Validation("sweep grid needs at least one axis".into()));
        }
        for axis in &axes {
            axis.field.validate()?;
            if axis.values.is_empty() {
                return Err(Error::Validation(format!(
                    "sweep axis over {:?} has no values",
                    axis.field
                )));
            }
            if let Some(bad) = axis.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "sweep axis over {:?} contains non-finite value {bad}",
                    axis.field
                )));
            }
        }
        Ok(SweepGrid { axes })
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of the flat index, one value per axis.
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut coords = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            coords[k] = axis.values[rem % n];
            rem /= n;
        }
        coords
    }
}

/// One scored grid point. `error` carries the failure text for points that
/// could not be evaluated; their numeric fields are NaN.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Flat grid index, the idempotent row key.
    pub index: usize,
    /// One swept value per axis, in axis order.
    pub values: Vec<f64>,
    /// Exact pair shifts and the total three-qubit shift (angular).
    pub chi12: f64,
    pub chi23: f64,
    pub chi13: f64,
    pub chi123: f64,
    pub f_p: f64,
    pub max_leakage: f64,
    pub error: Option<String>,
}

/// Sweep results ordered by flat index.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub grid: SweepGrid,
    pub rows: Vec<SweepRow>,
}

fn evaluate_point(
    index: usize,
    grid: &SweepGrid,
    eff_base: &EffectiveParams,
    drive_base: &DriveSignal,
    cfg: &PropagationConfig,
) -> SweepRow {
    let values = grid.coordinates(index);
    let mut eff = eff_base.clone();
    let mut drive = drive_base.clone();
    for (axis, &v) in grid.axes.iter().zip(&values) {
        axis.field.apply(v, &mut eff, &mut drive);
    }
    let outcome = (|| -> Result<(f64, f64, [f64; 4])> {
        let layout = ModeLayout::uniform(3, 3)?;
        let h = effective_hamiltonian(&eff, &layout)?;
        let spectrum = labeled_spectrum(&h, &layout)?;
        let shifts = dispersive_shifts_exact(&spectrum)?;
        let corr = idle_phase_reference(&eff, &spectrum, drive.t_gate, cfg)?;
        let gate = effective_gate(&eff, &spectrum, &drive, cfg)?;
        let report = fidelity_report(&gate, &corr)?;
        Ok((
            report.f_p,
            report.max_leakage,
            [shifts.chi12, shifts.chi23, shifts.chi13, shifts.chi123],
        ))
    })();
    match outcome {
        Ok((f_p, max_leakage, [chi12, chi23, chi13, chi123])) => SweepRow {
            index,
            values,
            chi12,
            chi23,
            chi13,
            chi123,
            f_p,
            max_leakage,
            error: None,
        },
        Err(e) => SweepRow {
            index,
            values,
            chi12: f64::NAN,
            chi23: f64::NAN,
            chi13: f64::NAN,
            chi123: f64::NAN,
            f_p: f64::NAN,
            max_leakage: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Evaluates the listed grid indices in parallel, returning rows sorted by
/// index. Out-of-range indices are rejected up front.
pub fn parameter_sweep_rows(
    eff: &EffectiveParams,
    drive: &DriveSignal,
    grid: &SweepGrid,
    cfg: &PropagationConfig,
    indices: &[usize],
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let total = grid.len();
    if let Some(&bad) = indices.iter().find(|&&i| i >= total) {
        return Err(Error::Validation(format!(
            "sweep index {bad} out of range for a {total}-point grid"
        )));
    }
    let mut rows: Vec<SweepRow> = indices
        .par_iter()
        .map(|&i| evaluate_point(i, grid, eff, drive, cfg))
        .collect();
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

/// Scores the whole grid.
pub fn parameter_sweep(
    eff: &EffectiveParams,
    drive: &DriveSignal,
    grid: &SweepGrid,
    cfg: &PropagationConfig,
) -> Result<SweepTable> {
    let indices: Vec<usize> = (0..grid.len()).collect();
    let rows = parameter_sweep_rows(eff, drive, grid, cfg, &indices)?;
    Ok(SweepTable {
        grid: grid.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{angular_from_ghz, TWO_PI};

    fn fig3() -> EffectiveParams {
        EffectiveParams::from_frequencies_ghz(
            [4.984, 5.300, 4.820],
            [-0.330, -0.240, -0.330],
            0.0154,
            0.0292,
            0.002,
        )
    }

    fn calibrated_drive() -> DriveSignal {
        let mut sig =
            DriveSignal::gaussian(TWO_PI * 1.5e-3, 500.0, angular_from_ghz(5.2932654)).unwrap();
        sig.sigma = 355.87;
        sig.beta = 1.5797;
        sig
    }

    #[test]
    fn grid_indexing_is_row_major_with_last_axis_fastest() {
        let grid = SweepGrid::new(vec![
            SweepAxis {
                field: SweepField::Sigma,
                values: vec![100.0, 200.0],
            },
            SweepAxis {
                field: SweepField::Beta,
                values: vec![0.0, 0.5, 1.0],
            },
        ])
        .unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(grid.coordinates(0), vec![100.0, 0.0]);
        assert_eq!(grid.coordinates(1), vec![100.0, 0.5]);
        assert_eq!(grid.coordinates(3), vec![200.0, 0.0]);
        assert_eq!(grid.coordinates(5), vec![200.0, 1.0]);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(SweepGrid::new(vec![]).is_err());
        assert!(SweepGrid::new(vec![SweepAxis {
            field: SweepField::Sigma,
            values: vec![],
        }])
        .is_err());
        assert!(SweepGrid::new(vec![SweepAxis {
            field: SweepField::Sigma,
            values: vec![f64::NAN],
        }])
        .is_err());
        assert!(SweepGrid::new(vec![SweepAxis {
            field: SweepField::Omega(3),
            values: vec![1.0],
        }])
        .is_err());
    }

    #[test]
    fn single_point_matches_direct_evaluation() {
        let eff = fig3();
        let drive = calibrated_drive();
        let cfg = PropagationConfig::default();
        let grid = SweepGrid::new(vec![SweepAxis {
            field: SweepField::Sigma,
            values: vec![drive.sigma],
        }])
        .unwrap();
        let table = parameter_sweep(&eff, &drive, &grid, &cfg).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert!(row.error.is_none());

        let layout = ModeLayout::uniform(3, 3).unwrap();
        let h = effective_hamiltonian(&eff, &layout).unwrap();
        let spectrum = labeled_spectrum(&h, &layout).unwrap();
        let corr = idle_phase_reference(&eff, &spectrum, drive.t_gate, &cfg).unwrap();
        let gate = effective_gate(&eff, &spectrum, &drive, &cfg).unwrap();
        let report = fidelity_report(&gate, &corr).unwrap();
        assert_eq!(row.f_p.to_bits(), report.f_p.to_bits());
        let shifts = dispersive_shifts_exact(&spectrum).unwrap();
        assert_eq!(row.chi12.to_bits(), shifts.chi12.to_bits());
    }

    #[test]
    fn amplitude_sweep_has_monotone_leakage() {
        let eff = fig3();
        let drive = calibrated_drive();
        let cfg = PropagationConfig::default();
        let grid = SweepGrid::new(vec![SweepAxis {
            field: SweepField::OmegaPeak,
            values: [0.5e-3, 1.0e-3, 1.5e-3, 2.5e-3]
                .iter()
                .map(|g| TWO_PI * g)
                .collect(),
        }])
        .unwrap();
        let table = parameter_sweep(&eff, &drive, &grid, &cfg).unwrap();
        assert_eq!(table.rows.len(), 4);
        for w in table.rows.windows(2) {
            assert!(w[0].error.is_none() && w[1].error.is_none());
            assert!(
                w[1].max_leakage >= w[0].max_leakage - 1e-12,
                "leakage not monotone: {} then {}",
                w[0].max_leakage,
                w[1].max_leakage
            );
        }
    }

    #[test]
    fn failed_points_do_not_poison_the_rest() {
        let eff = fig3();
        let drive = calibrated_drive();
        let cfg = PropagationConfig::default();
        // Second point pushes the 1-2 coupling far past the dispersive
        // regime, where computational labels lose meaning.
        let grid = SweepGrid::new(vec![SweepAxis {
            field: SweepField::G12,
            values: vec![angular_from_ghz(0.0154), angular_from_ghz(0.158)],
        }])
        .unwrap();
        let table = parameter_sweep(&eff, &drive, &grid, &cfg).unwrap();
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[1].error.is_some(), "hybridized row should fail");
        assert!(table.rows[1].f_p.is_nan());
        assert!(table.rows[0].f_p > 0.9);
    }

    #[test]
    fn subset_rows_match_full_sweep() {
        let eff = fig3();
        let drive = calibrated_drive();
        let cfg = PropagationConfig::default();
        let grid = SweepGrid::new(vec![SweepAxis {
            field: SweepField::Beta,
            values: vec![0.0, 0.8, 1.5797],
        }])
        .unwrap();
        let full = parameter_sweep(&eff, &drive, &grid, &cfg).unwrap();
        let subset = parameter_sweep_rows(&eff, &drive, &grid, &cfg, &[2, 0]).unwrap();
        assert_eq!(subset.len(), 2);
        assert_eq!(subset[0].index, 0);
        assert_eq!(subset[1].index, 2);
        assert_eq!(subset[0].f_p.to_bits(), full.rows[0].f_p.to_bits());
        assert_eq!(subset[1].f_p.to_bits(), full.rows[2].f_p.to_bits());

        assert!(parameter_sweep_rows(&eff, &drive, &grid, &cfg, &[3]).is_err());
    }
}
