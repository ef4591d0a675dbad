//! Derivative-free pulse calibration.
//!
//! The objective 1 − F_p is a smooth function of a handful of pulse
//! parameters, so a restarted Nelder-Mead simplex is enough: no gradients,
//! a shared evaluation budget across restarts, and deterministic behaviour
//! for a fixed seed. The search runs in coordinates normalised to the
//! parameter bounds; candidate points are clipped into the bounds at
//! evaluation time, which keeps the simplex freely deformable near an edge
//! without ever simulating an out-of-range pulse.
//!
//! Calibration evaluates its objective at a coarser integrator tolerance
//! than the final answer: the optimum moves by far less than the pulse
//! parameter resolution, and the saved factor in steps pays for the whole
//! search. The returned fidelity always comes from a re-run at the strict
//! tolerance.

use std::cell::{Cell, RefCell};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dynamics::{effective_gate, PropagationConfig};
use crate::error::{Error, Result};
use crate::fidelity::{fidelity_report, idle_phase_reference, FidelityReport, PhaseCorrection};
use crate::model::EffectiveParams;
use crate::pulse::DriveSignal;
use crate::spectrum::LabeledSpectrum;

/// Pulse parameter freed for optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParam {
    OmegaPeak,
    OmegaDrive,
    Sigma,
    Beta,
    Phi0,
}

impl FreeParam {
    fn get(&self, d: &DriveSignal) -> f64 {
        match self {
            FreeParam::OmegaPeak => d.omega_peak,
            FreeParam::OmegaDrive => d.omega_drive,
            FreeParam::Sigma => d.sigma,
            FreeParam::Beta => d.beta,
            FreeParam::Phi0 => d.phi0,
        }
    }

    fn set(&self, d: &mut DriveSignal, v: f64) {
        match self {
            FreeParam::OmegaPeak => d.omega_peak = v,
            FreeParam::OmegaDrive => d.omega_drive = v,
            FreeParam::Sigma => d.sigma = v,
            FreeParam::Beta => d.beta = v,
            FreeParam::Phi0 => d.phi0 = v,
        }
    }
}

/// Search controls. The budget counts objective evaluations across all
/// restarts; tolerances are in normalised coordinates and objective units.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub xatol: f64,
    pub fatol: f64,
    /// Early-stop fidelity; reaching it marks the outcome converged.
    pub target_fidelity: Option<f64>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            budget: 300,
            restarts: 2,
            seed: 0,
            xatol: 1e-3,
            fatol: 1e-7,
            target_fidelity: None,
        }
    }
}

/// Result of a calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub drive: DriveSignal,
    /// 1 − objective of the best point (re-verified by the caller when a
    /// coarse objective was used).
    pub fidelity: f64,
    pub objective: f64,
    pub evaluations: usize,
    /// Best objective seen after each evaluation.
    pub trace: Vec<f64>,
    /// Simplex tolerances met or target fidelity reached.
    pub converged: bool,
    /// Search stopped by the evaluation budget instead.
    pub budget_exhausted: bool,
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    fn spread(&self) -> (f64, f64) {
        let f0 = self.values[0];
        let mut df: f64 = 0.0;
        let mut dx: f64 = 0.0;
        for k in 1..self.values.len() {
            df = df.max((self.values[k] - f0).abs());
            for (a, b) in self.points[k].iter().zip(&self.points[0]) {
                dx = dx.max((a - b).abs());
            }
        }
        (dx, df)
    }
}

/// One Nelder-Mead run with the standard reflection/expansion/contraction/
/// shrink moves and the 5% initial-simplex perturbation.
fn nelder_mead<F>(
    f: &mut F,
    x0: &[f64],
    xatol: f64,
    fatol: f64,
    max_evals: usize,
) -> Result<(Vec<f64>, f64, bool, usize)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut call = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };

    let mut sx = Simplex {
        points: Vec::with_capacity(n + 1),
        values: Vec::with_capacity(n + 1),
    };
    sx.points.push(x0.to_vec());
    for k in 0..n {
        let mut y = x0.to_vec();
        if y[k] != 0.0 {
            y[k] *= 1.05;
        } else {
            y[k] = 0.00025;
        }
        sx.points.push(y);
    }
    for p in &sx.points {
        if evals >= max_evals {
            sx.values.push(f64::INFINITY);
            continue;
        }
        let v = call(p, &mut evals)?;
        sx.values.push(v);
    }
    sx.order();

    let mut converged = false;
    while evals < max_evals {
        let (dx, df) = sx.spread();
        if dx <= xatol && df <= fatol {
            converged = true;
            break;
        }
        let worst = n;
        let mut centroid = vec![0.0; n];
        for p in &sx.points[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let dir: Vec<f64> = centroid
            .iter()
            .zip(&sx.points[worst])
            .map(|(c, w)| c - w)
            .collect();
        let at = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&dir).map(|(c, d)| c + t * d).collect()
        };

        let xr = at(1.0);
        let fr = call(&xr, &mut evals)?;
        if fr < sx.values[0] {
            if evals < max_evals {
                let xe = at(2.0);
                let fe = call(&xe, &mut evals)?;
                if fe < fr {
                    sx.points[worst] = xe;
                    sx.values[worst] = fe;
                } else {
                    sx.points[worst] = xr;
                    sx.values[worst] = fr;
                }
            } else {
                sx.points[worst] = xr;
                sx.values[worst] = fr;
            }
        } else if fr < sx.values[n - 1] {
            sx.points[worst] = xr;
            sx.values[worst] = fr;
        } else if evals < max_evals {
            let shrink = if fr < sx.values[worst] {
                let xc = at(0.5);
                let fc = call(&xc, &mut evals)?;
                if fc <= fr {
                    sx.points[worst] = xc;
                    sx.values[worst] = fc;
                    false
                } else {
                    true
                }
            } else {
                let xcc = at(-0.5);
                let fcc = call(&xcc, &mut evals)?;
                if fcc < sx.values[worst] {
                    sx.points[worst] = xcc;
                    sx.values[worst] = fcc;
                    false
                } else {
                    true
                }
            };
            if shrink {
                let x_best = sx.points[0].clone();
                for k in 1..=n {
                    for (xi, xb) in sx.points[k].iter_mut().zip(&x_best) {
                        *xi = xb + 0.5 * (*xi - xb);
                    }
                    if evals >= max_evals {
                        sx.values[k] = f64::INFINITY;
                        continue;
                    }
                    sx.values[k] = call(&sx.points[k], &mut evals)?;
                }
            }
        } else {
            break;
        }
        sx.order();
    }
    sx.order();
    Ok((sx.points[0].clone(), sx.values[0], converged, evals))
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Calibrates the free pulse parameters against a caller-supplied
/// objective (typically 1 − F_p of the corrected gate).
///
/// Restart 1 starts from `base`; later restarts start from seeded random
/// points inside the bounds. The best point across restarts wins; the
/// budget is shared. Deterministic for fixed seed, base, and bounds.
pub fn calibrate_pulse<F>(
    mut objective: F,
    base: &DriveSignal,
    free: &[FreeParam],
    bounds: &[(f64, f64)],
    opts: &CalibrationOptions,
) -> Result<CalibrationOutcome>
where
    F: FnMut(&DriveSignal) -> Result<f64>,
{
    if free.is_empty() {
        return Err(Error::Validation("no free parameters to calibrate".into()));
    }
    if free.len() != bounds.len() {
        return Err(Error::Validation(format!(
            "{} free parameters but {} bounds",
            free.len(),
            bounds.len()
        )));
    }
    for &(lo, hi) in bounds {
        if !(hi > lo) {
            return Err(Error::Validation(format!(
                "empty parameter interval [{lo}, {hi}]"
            )));
        }
    }
    if opts.budget < free.len() + 2 {
        return Err(Error::Validation(format!(
            "budget {} cannot seed a {}-point simplex",
            opts.budget,
            free.len() + 1
        )));
    }

    let n = free.len();
    let realize = |u: &[f64]| -> DriveSignal {
        let mut d = base.clone();
        for ((p, &(lo, hi)), &uk) in free.iter().zip(bounds).zip(u) {
            p.set(&mut d, lo + clip01(uk) * (hi - lo));
        }
        d
    };

    let trace: RefCell<Vec<f64>> = RefCell::new(Vec::new());
    let best_objective = Cell::new(f64::INFINITY);
    let best_u: RefCell<Option<Vec<f64>>> = RefCell::new(None);
    let target_hit = Cell::new(false);
    let target_obj = opts.target_fidelity.map(|f| 1.0 - f);

    let mut eval = |u: &[f64]| -> Result<f64> {
        let v = objective(&realize(u))?;
        if v < best_objective.get() {
            best_objective.set(v);
            *best_u.borrow_mut() = Some(u.to_vec());
            if let Some(t) = target_obj {
                if v <= t {
                    target_hit.set(true);
                }
            }
        }
        trace.borrow_mut().push(best_objective.get());
        Ok(v)
    };

    let mut start = vec![0.0; n];
    for ((p, &(lo, hi)), s) in free.iter().zip(bounds).zip(start.iter_mut()) {
        *s = clip01((p.get(base) - lo) / (hi - lo));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut used = 0usize;
    let mut any_converged = false;
    for restart in 0..opts.restarts.max(1) {
        if used >= opts.budget || target_hit.get() {
            break;
        }
        let x0 = if restart == 0 {
            start.clone()
        } else {
            (0..n).map(|_| rng.gen_range(0.1..0.9)).collect()
        };
        let remaining = opts.budget - used;
        let (_, _, converged, spent) = nelder_mead(&mut eval, &x0, opts.xatol, opts.fatol, remaining)?;
        used += spent;
        any_converged |= converged;
    }

    let best_u = best_u
        .into_inner()
        .ok_or_else(|| Error::Numerical("no successful evaluation".into()))?;
    let drive = realize(&best_u);
    let objective = best_objective.get();
    let hit = any_converged || target_hit.get();
    Ok(CalibrationOutcome {
        drive,
        fidelity: 1.0 - objective,
        objective,
        evaluations: used,
        trace: trace.into_inner(),
        converged: hit,
        budget_exhausted: used >= opts.budget && !hit,
    })
}

/// Coarse integrator settings used inside calibration objectives.
pub fn objective_config(cfg: &PropagationConfig) -> PropagationConfig {
    PropagationConfig {
        rtol: cfg.rtol.max(1e-8),
        atol: cfg.atol.max(1e-10),
        ..cfg.clone()
    }
}

/// Full calibration pipeline on the effective model: fits the idle phase
/// reference once, searches with a coarse-tolerance objective, then
/// re-scores the winning pulse at the strict tolerance.
pub fn calibrate_effective_gate(
    eff: &EffectiveParams,
    spectrum: &LabeledSpectrum,
    base: &DriveSignal,
    free: &[FreeParam],
    bounds: &[(f64, f64)],
    cfg: &PropagationConfig,
    opts: &CalibrationOptions,
) -> Result<(CalibrationOutcome, FidelityReport, PhaseCorrection)> {
    let corr = idle_phase_reference(eff, spectrum, base.t_gate, cfg)?;
    let coarse = objective_config(cfg);
    let mut outcome = calibrate_pulse(
        |d| {
            let gate = effective_gate(eff, spectrum, d, &coarse)?;
            Ok(1.0 - fidelity_report(&gate, &corr)?.f_p)
        },
        base,
        free,
        bounds,
        opts,
    )?;
    let gate = effective_gate(eff, spectrum, &outcome.drive, cfg)?;
    let report = fidelity_report(&gate, &corr)?;
    outcome.fidelity = report.f_p;
    outcome.objective = 1.0 - report.f_p;
    Ok((outcome, report, corr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::two_level_gate;
    use crate::fidelity::PhaseCorrection;
    use crate::units::TWO_PI;

    fn toy_drive() -> DriveSignal {
        DriveSignal::gaussian(TWO_PI * 1.5e-3, 500.0, TWO_PI * 5.29).unwrap()
    }

    #[test]
    fn quadratic_recovery_and_start_at_optimum() {
        let base = toy_drive();
        let target = TWO_PI * 5.2931;
        let opts = CalibrationOptions::default();
        let out = calibrate_pulse(
            |d| Ok((d.omega_drive - target).powi(2)),
            &base,
            &[FreeParam::OmegaDrive],
            &[(TWO_PI * 5.28, TWO_PI * 5.30)],
            &opts,
        )
        .unwrap();
        assert!(out.converged);
        assert!(!out.budget_exhausted);
        let range = TWO_PI * 0.02;
        assert!((out.drive.omega_drive - target).abs() < 2.0 * opts.xatol * range);

        // Starting exactly at the optimum stays there.
        let mut at_opt = base.clone();
        at_opt.omega_drive = target;
        let out2 = calibrate_pulse(
            |d| Ok((d.omega_drive - target).powi(2)),
            &at_opt,
            &[FreeParam::OmegaDrive],
            &[(TWO_PI * 5.28, TWO_PI * 5.30)],
            &CalibrationOptions {
                restarts: 1,
                ..CalibrationOptions::default()
            },
        )
        .unwrap();
        assert!((out2.drive.omega_drive - target).abs() < 2.0 * opts.xatol * range);
    }

    #[test]
    fn trace_is_monotone_and_counts_match() {
        let base = toy_drive();
        let out = calibrate_pulse(
            |d| Ok((d.sigma - 120.0).powi(2) / 1e4),
            &base,
            &[FreeParam::Sigma],
            &[(60.0, 300.0)],
            &CalibrationOptions {
                budget: 40,
                ..CalibrationOptions::default()
            },
        )
        .unwrap();
        assert_eq!(out.trace.len(), out.evaluations);
        assert!(out.evaluations <= 40);
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn tiny_budget_sets_exhausted_flag() {
        let base = toy_drive();
        let out = calibrate_pulse(
            |d| Ok((d.beta - 0.9).powi(2)),
            &base,
            &[FreeParam::Beta],
            &[(0.0, 2.0)],
            &CalibrationOptions {
                budget: 4,
                restarts: 1,
                ..CalibrationOptions::default()
            },
        )
        .unwrap();
        assert!(out.budget_exhausted);
        assert!(!out.converged);
        assert!(out.evaluations <= 4);
    }

    #[test]
    fn bounds_are_respected_at_every_evaluation() {
        let base = toy_drive();
        let lo = 100.0;
        let hi = 140.0;
        calibrate_pulse(
            |d| {
                assert!(d.sigma >= lo - 1e-12 && d.sigma <= hi + 1e-12);
                Ok((d.sigma - 90.0).powi(2))
            },
            &base,
            &[FreeParam::Sigma],
            &[(lo, hi)],
            &CalibrationOptions {
                budget: 60,
                ..CalibrationOptions::default()
            },
        )
        .unwrap();
    }

    #[test]
    fn invalid_setups_are_rejected() {
        let base = toy_drive();
        assert!(calibrate_pulse(|_| Ok(0.0), &base, &[], &[], &CalibrationOptions::default())
            .is_err());
        assert!(calibrate_pulse(
            |_| Ok(0.0),
            &base,
            &[FreeParam::Beta],
            &[(1.0, 1.0)],
            &CalibrationOptions::default()
        )
        .is_err());
        assert!(calibrate_pulse(
            |_| Ok(0.0),
            &base,
            &[FreeParam::Beta, FreeParam::Sigma],
            &[(0.0, 1.0)],
            &CalibrationOptions::default()
        )
        .is_err());
    }

    #[test]
    fn two_level_drive_frequency_recovery() {
        // Free detuning only; the optimum sits on the |101> <-> |111>
        // resonance known exactly by construction. The drive frequency slot
        // carries the detuning for the two-level model.
        let chi12 = TWO_PI * (-5.1e-3);
        let chi23 = TWO_PI * (-4.95e-3);
        let mut base = DriveSignal::gaussian(TWO_PI * 1.5e-3, 500.0, 0.0).unwrap();
        base.sigma = 191.0;
        base.beta = 0.611;
        base.omega_drive = TWO_PI * 3e-4;
        let cfg = PropagationConfig::default();
        let corr = PhaseCorrection::analytic(chi12, chi23, base.t_gate);
        let out = calibrate_pulse(
            |d| {
                let gate = two_level_gate(chi12, chi23, d.omega_drive, d, &cfg)?;
                Ok(1.0 - crate::fidelity::fidelity_report(&gate, &corr)?.f_p)
            },
            &base,
            &[FreeParam::OmegaDrive],
            &[(-TWO_PI * 5e-4, TWO_PI * 5e-4)],
            &CalibrationOptions {
                budget: 120,
                restarts: 1,
                xatol: 5e-4,
                ..CalibrationOptions::default()
            },
        )
        .unwrap();
        assert!(
            out.drive.omega_drive.abs() < TWO_PI * 1e-5,
            "recovered detuning {} rad/ns",
            out.drive.omega_drive
        );
        assert!(out.fidelity > 0.97);
    }

    #[test]
    fn calibration_is_deterministic() {
        let base = toy_drive();
        let run = || {
            calibrate_pulse(
                |d| Ok((d.sigma - 222.0).powi(2) / 1e4 + (d.beta - 0.7).powi(2)),
                &base,
                &[FreeParam::Sigma, FreeParam::Beta],
                &[(60.0, 480.0), (0.0, 2.0)],
                &CalibrationOptions {
                    budget: 150,
                    restarts: 3,
                    seed: 42,
                    ..CalibrationOptions::default()
                },
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.drive.sigma.to_bits(), b.drive.sigma.to_bits());
        assert_eq!(a.drive.beta.to_bits(), b.drive.beta.to_bits());
    }
}
