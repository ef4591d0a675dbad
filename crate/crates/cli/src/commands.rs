//! Subcommand implementations. Each command resolves the config, runs the
//! corresponding core pipeline, writes its result files into the output
//! directory, and echoes a short human summary to stdout. Progress for the
//! long-running commands goes to stderr.

use std::io::Write as _;
use std::path::Path;

use serde_json::json;
use trisim_core::calibration::{calibrate_effective_gate, CalibrationOptions, FreeParam};
use trisim_core::dynamics::{
    effective_gate, full_circuit_gate, population_trace, two_level_gate, GateResult,
};
use trisim_core::fidelity::{
    fidelity_report, idle_phase_reference, phase_correction_from_energies, CorrectionSource,
    FidelityReport, PhaseCorrection,
};
use trisim_core::model::{
    effective_hamiltonian, full_hamiltonian, residual_couplings, EffectiveParams,
};
use trisim_core::perturbation::{shift_report, DispersiveShifts, ExactShifts, ShiftEntry};
use trisim_core::pulse::{drive_frequency, DriveFrequencyMode, DriveSignal};
use trisim_core::spectrum::{dispersive_shifts_exact, labeled_spectrum, LabeledSpectrum};
use trisim_core::sweep::{parameter_sweep_rows, SweepAxis, SweepField, SweepGrid, SweepRow};
use trisim_core::units::{angular_from_ghz, ghz_from_angular, mhz_from_angular};
use trisim_core::ModeLayout;

use crate::config::{BareView, EffectiveView, Mode, ModelName, RunConfig};
use crate::output::{basis_labels, ensure_dir, fmt_f64, write_csv, write_json, write_matrix};
use crate::CliError;

/// Which χ routes the shifts command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Pt2,
    Pt3,
    Exact,
    All,
}

fn write_resolved_config(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write_json(&out.join("resolved_config.json"), cfg)
}

fn effective_spectrum(
    eff: &EffectiveParams,
    levels: usize,
) -> Result<(ModeLayout, LabeledSpectrum), CliError> {
    let layout = ModeLayout::uniform(3, levels)?;
    let h = effective_hamiltonian(eff, &layout)?;
    let spectrum = labeled_spectrum(&h, &layout)?;
    Ok((layout, spectrum))
}

pub fn cmd_derive(cfg: RunConfig) -> Result<(), CliError> {
    if cfg.mode == Mode::Effective {
        return Err(CliError::Config(
            "derive needs a circuit or bare block; effective parameters are already derived"
                .into(),
        ));
    }
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;
    let bare = cfg.bare_params()?.expect("non-effective mode");
    let eff = cfg.effective_params()?;
    let residual = residual_couplings(&bare)?;
    write_resolved_config(&cfg, &out)?;

    let doc = json!({
        "bare": BareView::of(&bare),
        "effective": EffectiveView::of(&eff),
        "residual_qc_mhz": {
            "g1c1": mhz_from_angular(residual.g1c1),
            "g2c1": mhz_from_angular(residual.g2c1),
            "g2c2": mhz_from_angular(residual.g2c2),
            "g3c2": mhz_from_angular(residual.g3c2),
        },
        "warnings": residual.warnings(),
    });
    write_json(&out.join("derived_params.json"), &doc)?;

    let ev = EffectiveView::of(&eff);
    println!("dressed qubit parameters");
    println!("{:<10} {:>12} {:>12}", "qubit", "omega (GHz)", "alpha (MHz)");
    for k in 0..3 {
        println!(
            "{:<10} {:>12.6} {:>12.3}",
            k + 1,
            ev.omega_ghz[k],
            ev.alpha_ghz[k] * 1e3
        );
    }
    println!(
        "g12 = {:.4} MHz, g23 = {:.4} MHz, g13 = {:.4} MHz",
        ev.g12_ghz * 1e3,
        ev.g23_ghz * 1e3,
        ev.g13_ghz * 1e3
    );
    println!(
        "max |g/Delta| = {:.4} ({})",
        ev.max_g_over_delta,
        if ev.dispersive_ok {
            "dispersive"
        } else {
            "outside the dispersive regime"
        }
    );
    for w in residual.warnings() {
        println!("warning: {w}");
    }
    println!("wrote {}", out.join("derived_params.json").display());
    Ok(())
}

struct ShiftRow {
    quantity: &'static str,
    entry: Option<ShiftEntry>,
    three_body_mhz: Option<f64>,
    error: Option<String>,
}

pub fn cmd_shifts(cfg: RunConfig, method: Method) -> Result<(), CliError> {
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;
    let eff = cfg.effective_params()?;

    let want_pert = matches!(method, Method::Pt2 | Method::Pt3 | Method::All);
    let want_exact = matches!(method, Method::Exact | Method::All);

    // The exact route diagonalizes whichever model the config describes:
    // the full five-mode circuit when bare parameters are available, the
    // three-mode effective model otherwise.
    let exact: Option<Result<ExactShifts, trisim_core::Error>> = if want_exact {
        Some(match cfg.bare_params()? {
            Some(bare) => ModeLayout::uniform(5, cfg.levels)
                .and_then(|layout| {
                    full_hamiltonian(&bare, &layout).and_then(|h| labeled_spectrum(&h, &layout))
                })
                .and_then(|s| dispersive_shifts_exact(&s)),
            None => ModeLayout::uniform(3, cfg.levels)
                .and_then(|layout| {
                    effective_hamiltonian(&eff, &layout)
                        .and_then(|h| labeled_spectrum(&h, &layout))
                })
                .and_then(|s| dispersive_shifts_exact(&s)),
        })
    } else {
        None
    };
    let (exact_vals, exact_err) = match &exact {
        Some(Ok(v)) => (Some(v), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };

    let report: Option<Result<DispersiveShifts, trisim_core::Error>> =
        want_pert.then(|| shift_report(&eff, exact_vals));

    let rows: Vec<ShiftRow> = match &report {
        Some(Ok(r)) => vec![
            ("chi12", r.chi12, None),
            ("chi23", r.chi23, None),
            ("chi13", r.chi13, None),
            ("chi123", r.chi123, r.three_body.order3),
        ]
        .into_iter()
        .map(|(q, entry, tb)| ShiftRow {
            quantity: q,
            entry: Some(entry),
            three_body_mhz: tb.map(mhz_from_angular),
            error: exact_err.clone(),
        })
        .collect(),
        Some(Err(e)) => {
            // Perturbative formulas share resonance-guarded denominators;
            // surface the failure per row so the table stays rectangular.
            ["chi12", "chi23", "chi13", "chi123"]
                .into_iter()
                .map(|q| ShiftRow {
                    quantity: q,
                    entry: None,
                    three_body_mhz: None,
                    error: Some(e.to_string()),
                })
                .collect()
        }
        None => {
            let ent = |get: fn(&ExactShifts) -> f64| {
                exact_vals.map(|v| ShiftEntry {
                    order2: f64::NAN,
                    order3: None,
                    exact: Some(get(v)),
                    total: f64::NAN,
                })
            };
            vec![
                ("chi12", ent(|v| v.chi12)),
                ("chi23", ent(|v| v.chi23)),
                ("chi13", ent(|v| v.chi13)),
                ("chi123", ent(|v| v.chi123)),
            ]
            .into_iter()
            .map(|(q, entry)| ShiftRow {
                quantity: q,
                entry,
                three_body_mhz: None,
                error: exact_err.clone(),
            })
            .collect()
        }
    };

    let show_pt3 = matches!(method, Method::Pt3 | Method::All);
    let header = ["quantity", "order2_mhz", "order3_mhz", "total_mhz", "exact_mhz", "three_body_mhz", "error"];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let e = row.entry.as_ref();
            vec![
                row.quantity.to_string(),
                cell(e.and_then(|e| want_pert.then_some(mhz_from_angular(e.order2)))),
                cell(e.and_then(|e| e.order3.filter(|_| show_pt3).map(mhz_from_angular))),
                cell(e.and_then(|e| want_pert.then_some(mhz_from_angular(e.total)))),
                cell(e.and_then(|e| e.exact.map(mhz_from_angular))),
                cell(row.three_body_mhz.filter(|_| show_pt3)),
                row.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&out.join("shifts.csv"), &header, &csv_rows)?;

    let json_rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            json!({
                "quantity": row.quantity,
                "order2_mhz": row.entry.as_ref().map(|e| mhz_from_angular(e.order2)),
                "order3_mhz": row.entry.as_ref().and_then(|e| e.order3.map(mhz_from_angular)),
                "total_mhz": row.entry.as_ref().map(|e| mhz_from_angular(e.total)),
                "exact_mhz": row.entry.as_ref().and_then(|e| e.exact.map(mhz_from_angular)),
                "three_body_mhz": row.three_body_mhz,
                "error": row.error,
            })
        })
        .collect();
    write_json(&out.join("shifts.json"), &json_rows)?;
    write_resolved_config(&cfg, &out)?;

    println!("{:<10} {:>12} {:>12} {:>12}", "quantity", "pt2 (MHz)", "pt2+3 (MHz)", "exact (MHz)");
    for row in &rows {
        let f = |v: Option<f64>| match v {
            Some(x) => format!("{x:12.4}"),
            None => format!("{:>12}", "-"),
        };
        let e = row.entry.as_ref();
        println!(
            "{:<10} {} {} {}",
            row.quantity,
            f(e.map(|e| mhz_from_angular(e.order2)).filter(|v| v.is_finite())),
            f(e.map(|e| mhz_from_angular(e.total)).filter(|v| v.is_finite())),
            f(e.and_then(|e| e.exact.map(mhz_from_angular))),
        );
        if let Some(err) = &row.error {
            println!("  note: {err}");
        }
    }
    println!("wrote {}", out.join("shifts.csv").display());
    Ok(())
}

/// Shared gate pipeline: propagate under the configured model, correct
/// phases, and score against the i-Toffoli target.
fn run_gate(
    cfg: &mut RunConfig,
) -> Result<(GateResult, FidelityReport, PhaseCorrection, EffectiveParams, LabeledSpectrum), CliError>
{
    cfg.require_pulse()?;
    let eff = cfg.effective_params()?;
    let (_, spectrum) = effective_spectrum(&eff, cfg.levels)?;
    let shifts = dispersive_shifts_exact(&spectrum)?;
    let resonance = drive_frequency(
        &shift_report(&eff, Some(&shifts))?,
        &eff,
        DriveFrequencyMode::ExactSpectrum(&spectrum),
    )?;
    let drive = cfg.resolve_drive(eff.alpha[1], resonance)?;
    let prop = cfg.propagation_config();

    let (gate, corr) = match cfg.propagation.model {
        ModelName::Effective => {
            let corr = idle_phase_reference(&eff, &spectrum, drive.t_gate, &prop)?;
            let gate = effective_gate(&eff, &spectrum, &drive, &prop)?;
            (gate, corr)
        }
        ModelName::TwoLevel => {
            let detuning = drive.omega_drive - resonance;
            let gate = two_level_gate(shifts.chi12, shifts.chi23, detuning, &drive, &prop)?;
            let corr = PhaseCorrection::analytic(shifts.chi12, shifts.chi23, drive.t_gate);
            (gate, corr)
        }
        ModelName::Full => {
            let bare = cfg.bare_params()?.ok_or_else(|| {
                CliError::Config(
                    "full-model propagation needs a circuit or bare block".into(),
                )
            })?;
            let layout = ModeLayout::uniform(5, cfg.levels)?;
            let h = full_hamiltonian(&bare, &layout)?;
            let full_spectrum = labeled_spectrum(&h, &layout)?;
            let gate = full_circuit_gate(&bare, &full_spectrum, &drive, &prop)?;
            // The rotating frame of the full model turns at the bare mode
            // frequencies, so idle phases come from the exact energies
            // with that frame removed.
            let energies = full_spectrum.computational_energies();
            let mut rot = [0.0; 8];
            for (b, r) in rot.iter_mut().enumerate() {
                let bits = [(b >> 2) & 1, (b >> 1) & 1, b & 1];
                let frame: f64 = (0..3).map(|k| bits[k] as f64 * bare.omega[k]).sum();
                *r = energies[b] - energies[0] - frame;
            }
            let mut corr = phase_correction_from_energies(&rot, drive.t_gate);
            corr.source = CorrectionSource::IdleReference;
            (gate, corr)
        }
    };
    let report = fidelity_report(&gate, &corr)?;
    Ok((gate, report, corr, eff, spectrum))
}

fn write_gate_outputs(
    out: &Path,
    cfg: &RunConfig,
    gate: &GateResult,
    report: &FidelityReport,
    corr: &PhaseCorrection,
) -> Result<(), CliError> {
    write_matrix(&out.join("unitary_raw.json"), &gate.u_sim)?;
    write_matrix(&out.join("unitary_corrected.json"), &report.corrected)?;

    let labels = basis_labels();
    let mut mag_rows = Vec::with_capacity(8);
    for i in 0..8 {
        let mut row = vec![labels[i].clone()];
        row.extend((0..8).map(|j| fmt_f64(report.corrected[(i, j)].norm())));
        mag_rows.push(row);
    }
    let mut header = vec!["out"];
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    header.extend(label_refs);
    write_csv(&out.join("magnitudes.csv"), &header, &mag_rows)?;

    let doc = json!({
        "f_p": report.f_p,
        "leakage": report.leakage,
        "max_leakage": report.max_leakage,
        "max_deviation": report.max_deviation,
        "gram_defect": gate.gram_defect,
        "t_gate_ns": gate.t_gate,
        "model": cfg.propagation.model,
        "frame": cfg.propagation.frame,
        "correction": {
            "source": match corr.source {
                CorrectionSource::Analytic => "analytic",
                CorrectionSource::IdleReference => "idle_reference",
            },
            "z_rad": corr.z,
            "zz12_rad": corr.zz12,
            "zz23_rad": corr.zz23,
            "residual_rad": corr.residual,
            "zzz_rad": corr.zzz_phase(),
            "zz13_rad": corr.zz13_phase(),
        },
    });
    write_json(&out.join("fidelity.json"), &doc)
}

fn write_population_traces(
    out: &Path,
    eff: &EffectiveParams,
    spectrum: &LabeledSpectrum,
    drive: &DriveSignal,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let prop = cfg.propagation_config();
    let labels = basis_labels();
    for b in 0..8usize {
        let initial = [(b >> 2) & 1, (b >> 1) & 1, b & 1];
        let trace = population_trace(eff, spectrum, drive, initial, &prop)?;
        let mut header = vec!["t_ns".to_string()];
        header.extend(labels.iter().map(|l| format!("p{l}")));
        header.push("norm".into());
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = trace
            .times
            .iter()
            .zip(&trace.populations)
            .zip(&trace.norms)
            .map(|((t, pops), norm)| {
                let mut row = vec![fmt_f64(*t)];
                row.extend(pops.iter().map(|p| fmt_f64(*p)));
                row.push(fmt_f64(*norm));
                row
            })
            .collect();
        write_csv(&out.join(format!("populations_{}.csv", labels[b])), &header_refs, &rows)?;
    }
    Ok(())
}

pub fn cmd_gate(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;
    let (gate, report, corr, eff, spectrum) = run_gate(&mut cfg)?;
    write_gate_outputs(&out, &cfg, &gate, &report, &corr)?;
    if cfg.propagation.model == ModelName::Effective {
        let drive = cfg.resolve_drive(eff.alpha[1], 0.0)?;
        write_population_traces(&out, &eff, &spectrum, &drive, &cfg)?;
    }
    write_resolved_config(&cfg, &out)?;
    println!(
        "F_p = {:.6}, max leakage = {:.3e}, gram defect = {:.3e}",
        report.f_p,
        report.max_leakage,
        gate.gram_defect
    );
    println!(
        "residual three-body phase = {:+.4} rad over {} ns",
        corr.zzz_phase(),
        gate.t_gate
    );
    println!("wrote {}", out.join("fidelity.json").display());
    Ok(())
}

fn sweep_field(name: &str) -> Result<SweepField, CliError> {
    Ok(match name {
        "omega1" => SweepField::Omega(0),
        "omega2" => SweepField::Omega(1),
        "omega3" => SweepField::Omega(2),
        "alpha1" => SweepField::Alpha(0),
        "alpha2" => SweepField::Alpha(1),
        "alpha3" => SweepField::Alpha(2),
        "g12" => SweepField::G12,
        "g23" => SweepField::G23,
        "g13" => SweepField::G13,
        "omega_peak" => SweepField::OmegaPeak,
        "omega_drive" => SweepField::OmegaDrive,
        "sigma" => SweepField::Sigma,
        "beta" => SweepField::Beta,
        "phi0" => SweepField::Phi0,
        "t_gate" => SweepField::TGate,
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep field {other:?}; expected one of omega1..3, alpha1..3, \
                 g12/g23/g13, omega_peak, omega_drive, sigma, beta, phi0, t_gate"
            )))
        }
    })
}

/// GHz-per-value fields get converted; durations, angles, and beta pass
/// through.
fn to_natural(field: SweepField, v: f64) -> f64 {
    match field {
        SweepField::Omega(_)
        | SweepField::Alpha(_)
        | SweepField::G12
        | SweepField::G23
        | SweepField::G13
        | SweepField::OmegaPeak
        | SweepField::OmegaDrive => angular_from_ghz(v),
        SweepField::Sigma | SweepField::Beta | SweepField::Phi0 | SweepField::TGate => v,
    }
}

const SWEEP_CHUNK: usize = 32;

fn sweep_row_record(row: &SweepRow, grid: &SweepGrid, external: &[Vec<f64>]) -> Vec<String> {
    let mut rec = vec![row.index.to_string()];
    for (k, _) in grid.axes.iter().enumerate() {
        let n_after: usize = grid.axes[k + 1..].iter().map(|a| a.values.len()).product();
        let idx = (row.index / n_after) % grid.axes[k].values.len();
        rec.push(fmt_f64(external[k][idx]));
    }
    for v in [row.chi12, row.chi23, row.chi13, row.chi123] {
        rec.push(if v.is_nan() { String::new() } else { fmt_f64(mhz_from_angular(v)) });
    }
    rec.push(if row.f_p.is_nan() { String::new() } else { fmt_f64(row.f_p) });
    rec.push(if row.max_leakage.is_nan() {
        String::new()
    } else {
        fmt_f64(row.max_leakage)
    });
    rec.push(row.error.clone().unwrap_or_default());
    rec
}

pub fn cmd_sweep(mut cfg: RunConfig, jobs: Option<usize>) -> Result<(), CliError> {
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;
    let block = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a sweep block".into()))?;
    let eff = cfg.effective_params()?;
    let (_, spectrum) = effective_spectrum(&eff, cfg.levels)?;
    let shifts = dispersive_shifts_exact(&spectrum)?;
    let resonance = drive_frequency(
        &shift_report(&eff, Some(&shifts))?,
        &eff,
        DriveFrequencyMode::ExactSpectrum(&spectrum),
    )?;
    let drive = cfg.resolve_drive(eff.alpha[1], resonance)?;
    let prop = cfg.propagation_config();

    let mut axes = Vec::with_capacity(block.axes.len());
    let mut external = Vec::with_capacity(block.axes.len());
    for axis in &block.axes {
        let field = sweep_field(&axis.field)?;
        external.push(axis.values.clone());
        axes.push(SweepAxis {
            field,
            values: axis.values.iter().map(|&v| to_natural(field, v)).collect(),
        });
    }
    let grid = SweepGrid::new(axes)?;
    let total = grid.len();

    let mut header: Vec<String> = vec!["index".into()];
    header.extend(block.axes.iter().map(|a| a.field.clone()));
    header.extend(
        ["chi12_mhz", "chi23_mhz", "chi13_mhz", "chi123_mhz", "f_p", "max_leakage", "error"]
            .map(String::from),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    // Completed rows from an interrupted run are reused; their indices are
    // the idempotent keys. The progress file is rewritten in index order,
    // so a resumed run converges on the same bytes as an uninterrupted one.
    let progress_path = out.join("sweep_progress.csv");
    let mut done: std::collections::BTreeMap<usize, SweepRow> = std::collections::BTreeMap::new();
    if progress_path.exists() {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(&progress_path)
            .map_err(|e| CliError::Output(format!("reading {}: {e}", progress_path.display())))?;
        let expected_cols = header.len();
        for record in reader.records().flatten() {
            if record.len() != expected_cols {
                continue;
            }
            let Some(Ok(index)) = record.get(0).map(str::parse::<usize>) else {
                continue;
            };
            if index >= total {
                continue;
            }
            let grab = |k: usize| record.get(k).and_then(|s| s.parse::<f64>().ok());
            let n_axes = block.axes.len();
            let chi = |k: usize| {
                grab(1 + n_axes + k).map_or(f64::NAN, |mhz| angular_from_ghz(mhz * 1e-3))
            };
            let error = record
                .get(expected_cols - 1)
                .filter(|s| !s.is_empty())
                .map(String::from);
            done.insert(
                index,
                SweepRow {
                    index,
                    values: grid.coordinates(index),
                    chi12: chi(0),
                    chi23: chi(1),
                    chi13: chi(2),
                    chi123: chi(3),
                    f_p: grab(1 + n_axes + 4).unwrap_or(f64::NAN),
                    max_leakage: grab(1 + n_axes + 5).unwrap_or(f64::NAN),
                    error,
                },
            );
        }
        if !done.is_empty() {
            eprintln!("[sweep] resuming: {}/{} rows already complete", done.len(), total);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Output(format!("thread pool: {e}")))?;

    let pending: Vec<usize> = (0..total).filter(|i| !done.contains_key(i)).collect();
    for chunk in pending.chunks(SWEEP_CHUNK) {
        let rows = pool.install(|| parameter_sweep_rows(&eff, &drive, &grid, &prop, chunk))?;
        for row in rows {
            done.insert(row.index, row);
        }
        let records: Vec<Vec<String>> = done
            .values()
            .map(|row| sweep_row_record(row, &grid, &external))
            .collect();
        write_csv(&progress_path, &header_refs, &records)?;
        eprintln!("[sweep] {}/{} rows", done.len(), total);
    }

    let records: Vec<Vec<String>> = done
        .values()
        .map(|row| sweep_row_record(row, &grid, &external))
        .collect();
    write_csv(&out.join("sweep.csv"), &header_refs, &records)?;
    write_resolved_config(&cfg, &out)?;
    let failures = done.values().filter(|r| r.error.is_some()).count();
    println!(
        "swept {total} points ({failures} failed); wrote {}",
        out.join("sweep.csv").display()
    );
    Ok(())
}

fn free_param(name: &str) -> Result<FreeParam, CliError> {
    Ok(match name {
        "omega_peak" => FreeParam::OmegaPeak,
        "omega_drive" => FreeParam::OmegaDrive,
        "sigma" => FreeParam::Sigma,
        "beta" => FreeParam::Beta,
        "phi0" => FreeParam::Phi0,
        other => {
            return Err(CliError::Config(format!(
                "unknown calibration parameter {other:?}; expected omega_peak, \
                 omega_drive, sigma, beta, or phi0"
            )))
        }
    })
}

fn free_to_natural(p: FreeParam, v: f64) -> f64 {
    match p {
        FreeParam::OmegaPeak | FreeParam::OmegaDrive => angular_from_ghz(v),
        FreeParam::Sigma | FreeParam::Beta | FreeParam::Phi0 => v,
    }
}

pub fn cmd_calibrate(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;
    let block = cfg
        .calibrate
        .clone()
        .ok_or_else(|| CliError::Config("calibrate needs a calibrate block".into()))?;
    if cfg.propagation.model != ModelName::Effective {
        return Err(CliError::Config(
            "calibrate drives the effective model; set propagation.model to \"effective\""
                .into(),
        ));
    }
    let eff = cfg.effective_params()?;
    let (_, spectrum) = effective_spectrum(&eff, cfg.levels)?;
    let shifts = dispersive_shifts_exact(&spectrum)?;
    let resonance = drive_frequency(
        &shift_report(&eff, Some(&shifts))?,
        &eff,
        DriveFrequencyMode::ExactSpectrum(&spectrum),
    )?;
    let base = cfg.resolve_drive(eff.alpha[1], resonance)?;
    let prop = cfg.propagation_config();

    let free: Vec<FreeParam> = block
        .free
        .iter()
        .map(|n| free_param(n))
        .collect::<Result<_, _>>()?;
    if free.len() != block.bounds.len() {
        return Err(CliError::Config(format!(
            "{} free parameters but {} bounds",
            free.len(),
            block.bounds.len()
        )));
    }
    let bounds: Vec<(f64, f64)> = free
        .iter()
        .zip(&block.bounds)
        .map(|(&p, b)| (free_to_natural(p, b[0]), free_to_natural(p, b[1])))
        .collect();
    let opts = CalibrationOptions {
        budget: block.budget,
        restarts: block.restarts,
        seed: cfg.seed,
        xatol: block.xatol,
        fatol: block.fatol,
        target_fidelity: block.target_fidelity,
    };

    eprintln!(
        "[calibrate] {} free parameters, budget {} evaluations, {} restarts",
        free.len(),
        opts.budget,
        opts.restarts
    );
    std::io::stderr().flush().ok();
    let (outcome, report, corr) =
        calibrate_effective_gate(&eff, &spectrum, &base, &free, &bounds, &prop, &opts)?;

    let drive = &outcome.drive;
    if let Some(pulse) = cfg.pulse.as_mut() {
        for p in &free {
            match p {
                FreeParam::OmegaPeak => {
                    pulse.omega_peak_ghz = ghz_from_angular(drive.omega_peak)
                }
                FreeParam::OmegaDrive => {
                    pulse.omega_drive_ghz = Some(ghz_from_angular(drive.omega_drive))
                }
                FreeParam::Sigma => pulse.sigma_ns = Some(drive.sigma),
                FreeParam::Beta => pulse.beta = Some(drive.beta),
                FreeParam::Phi0 => pulse.phi0_rad = drive.phi0,
            }
        }
    }
    let doc = json!({
        "fidelity": outcome.fidelity,
        "objective": outcome.objective,
        "evaluations": outcome.evaluations,
        "converged": outcome.converged,
        "budget_exhausted": outcome.budget_exhausted,
        "trace": outcome.trace,
        "drive": {
            "omega_peak_ghz": ghz_from_angular(drive.omega_peak),
            "omega_drive_ghz": ghz_from_angular(drive.omega_drive),
            "sigma_ns": drive.sigma,
            "beta": drive.beta,
            "phi0_rad": drive.phi0,
            "t_gate_ns": drive.t_gate,
        },
    });
    write_json(&out.join("calibration.json"), &doc)?;

    let gate = effective_gate(&eff, &spectrum, drive, &prop)?;
    write_gate_outputs(&out, &cfg, &gate, &report, &corr)?;
    write_resolved_config(&cfg, &out)?;
    println!(
        "calibrated F_p = {:.6} after {} evaluations ({})",
        outcome.fidelity,
        outcome.evaluations,
        if outcome.converged {
            "converged"
        } else if outcome.budget_exhausted {
            "budget exhausted"
        } else {
            "stopped"
        }
    );
    println!("wrote {}", out.join("calibration.json").display());
    Ok(())
}
