//! Run configuration: JSON schema, validation, and resolution into core
//! types.
//!
//! External units are the ones device tables use: linear GHz for
//! frequencies and couplings (ν = ω/2π), nanoseconds for durations,
//! radians for phases and fluxes, femtofarads for capacitances. Resolution
//! converts everything to the core's angular units and fills each optional
//! with its concrete default, so the emitted resolved config re-ingests to
//! identical values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trisim_core::circuit::{quantize, reduce_capacitance_network, CircuitSpec, ReductionMethod};
use trisim_core::dynamics::{Frame, ModelKind, PropagationConfig};
use trisim_core::model::{dress_parameters, BareParams, EffectiveParams};
use trisim_core::pulse::{default_drag_coefficient, DriveSignal};
use trisim_core::units::{angular_from_ghz, ghz_from_angular, FEMTOFARAD};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Circuit,
    Bare,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitBlock {
    pub c_q_ff: [f64; 3],
    pub c_c_ff: [f64; 2],
    pub c_12_ff: f64,
    pub c_23_ff: f64,
    pub c_1c1_ff: f64,
    pub c_2c1_ff: f64,
    pub c_2c2_ff: f64,
    pub c_3c2_ff: f64,
    pub ej_q_ghz: [f64; 3],
    pub ej_c_ghz: [f64; 2],
    pub phi_e_rad: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BareBlock {
    pub omega_q_ghz: [f64; 3],
    pub alpha_q_ghz: [f64; 3],
    pub omega_c_ghz: [f64; 2],
    pub alpha_c_ghz: [f64; 2],
    pub g12_ghz: f64,
    pub g23_ghz: f64,
    pub g13_ghz: f64,
    pub g_qc_ghz: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveBlock {
    pub omega_ghz: [f64; 3],
    pub alpha_ghz: [f64; 3],
    pub g12_ghz: f64,
    pub g23_ghz: f64,
    pub g13_ghz: f64,
}

/// Drive description. `omega_drive_ghz` defaults to the exact
/// |101⟩ ↔ |111⟩ transition of the configured model, `sigma_ns` to
/// t_g/6, and `beta` to the −1/α̃₂ DRAG coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    pub omega_peak_ghz: f64,
    pub t_gate_ns: f64,
    #[serde(default)]
    pub omega_drive_ghz: Option<f64>,
    #[serde(default)]
    pub sigma_ns: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub phi0_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Effective,
    Full,
    TwoLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameName {
    Rotating,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationBlock {
    #[serde(default = "default_model")]
    pub model: ModelName,
    #[serde(default = "default_frame")]
    pub frame: FrameName,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub max_step_ns: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for PropagationBlock {
    fn default() -> Self {
        PropagationBlock {
            model: default_model(),
            frame: default_frame(),
            rtol: default_rtol(),
            atol: default_atol(),
            max_step_ns: None,
            max_steps: default_max_steps(),
        }
    }
}

fn default_model() -> ModelName {
    ModelName::Effective
}

fn default_frame() -> FrameName {
    FrameName::Rotating
}

fn default_rtol() -> f64 {
    1e-9
}

fn default_atol() -> f64 {
    1e-11
}

fn default_max_steps() -> usize {
    1_000_000
}

/// One sweep axis: a field name from the sweep vocabulary and its values
/// in external units (GHz for frequency-like fields, ns for durations,
/// radians for `phi0`, plain for `beta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBlock {
    pub field: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axes: Vec<AxisBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    /// Free drive parameters: omega_peak, omega_drive, sigma, beta, phi0.
    pub free: Vec<String>,
    /// One [lo, hi] per free parameter, in the same external units as the
    /// sweep vocabulary.
    pub bounds: Vec<[f64; 2]>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_xatol")]
    pub xatol: f64,
    #[serde(default = "default_fatol")]
    pub fatol: f64,
    #[serde(default)]
    pub target_fidelity: Option<f64>,
}

fn default_budget() -> usize {
    300
}

fn default_restarts() -> usize {
    2
}

fn default_xatol() -> f64 {
    1e-3
}

fn default_fatol() -> f64 {
    1e-7
}

fn default_levels() -> usize {
    3
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare: Option<BareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveBlock>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseBlock>,
    #[serde(default)]
    pub propagation: PropagationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateBlock>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that exactly the parameter block matching `mode` is present.
    pub fn validate(&self) -> Result<(), CliError> {
        let blocks = [
            ("circuit", self.circuit.is_some(), Mode::Circuit),
            ("bare", self.bare.is_some(), Mode::Bare),
            ("effective", self.effective.is_some(), Mode::Effective),
        ];
        for (name, present, mode) in blocks {
            if mode == self.mode && !present {
                return Err(CliError::Config(format!(
                    "mode is {name:?} but the {name} block is missing"
                )));
            }
            if mode != self.mode && present {
                return Err(CliError::Config(format!(
                    "{name} block present but mode is not {name:?}; \
                     exactly one parameter block is allowed"
                )));
            }
        }
        if self.levels < 2 {
            return Err(CliError::Config(format!(
                "levels must be at least 2, got {}",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn require_pulse(&self) -> Result<&PulseBlock, CliError> {
        self.pulse
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a pulse block".into()))
    }

    /// Bare parameters, available in circuit and bare modes.
    pub fn bare_params(&self) -> Result<Option<BareParams>, CliError> {
        match self.mode {
            Mode::Circuit => {
                let c = self.circuit.as_ref().expect("validated");
                let ff = FEMTOFARAD;
                let spec = CircuitSpec {
                    c_q: c.c_q_ff.map(|v| v * ff),
                    c_c: c.c_c_ff.map(|v| v * ff),
                    c_12: c.c_12_ff * ff,
                    c_23: c.c_23_ff * ff,
                    c_1c1: c.c_1c1_ff * ff,
                    c_2c1: c.c_2c1_ff * ff,
                    c_2c2: c.c_2c2_ff * ff,
                    c_3c2: c.c_3c2_ff * ff,
                    ej_q: c.ej_q_ghz,
                    ej_c: c.ej_c_ghz,
                    phi_e: c.phi_e_rad,
                };
                let caps = reduce_capacitance_network(&spec, ReductionMethod::ExactInverse)?;
                Ok(Some(quantize(&caps, &spec)?))
            }
            Mode::Bare => {
                let b = self.bare.as_ref().expect("validated");
                Ok(Some(BareParams::from_frequencies_ghz(
                    b.omega_q_ghz,
                    b.alpha_q_ghz,
                    b.omega_c_ghz,
                    b.alpha_c_ghz,
                    b.g12_ghz,
                    b.g23_ghz,
                    b.g13_ghz,
                    b.g_qc_ghz,
                )?))
            }
            Mode::Effective => Ok(None),
        }
    }

    /// Effective three-mode parameters from whichever block is configured.
    pub fn effective_params(&self) -> Result<EffectiveParams, CliError> {
        if let Some(e) = &self.effective {
            return Ok(EffectiveParams::from_frequencies_ghz(
                e.omega_ghz,
                e.alpha_ghz,
                e.g12_ghz,
                e.g23_ghz,
                e.g13_ghz,
            ));
        }
        let bare = self.bare_params()?.expect("validated non-effective mode");
        Ok(dress_parameters(&bare)?)
    }

    pub fn propagation_config(&self) -> PropagationConfig {
        let p = &self.propagation;
        PropagationConfig {
            model: match p.model {
                ModelName::Effective => ModelKind::Effective3Mode,
                ModelName::Full => ModelKind::Full5Mode,
                ModelName::TwoLevel => ModelKind::TwoLevel,
            },
            frame: match p.frame {
                FrameName::Rotating => Frame::Rotating,
                FrameName::Lab => Frame::Lab,
            },
            rtol: p.rtol,
            atol: p.atol,
            max_step: p.max_step_ns,
            max_steps: p.max_steps,
            sample_times: Vec::new(),
        }
    }

    /// Builds the drive from the pulse block, filling unset options with
    /// their defaults. `omega_drive_fallback` is the angular carrier used
    /// when the block leaves it unset (the exact transition frequency).
    /// The block is updated in place so the resolved config round-trips.
    pub fn resolve_drive(
        &mut self,
        alpha2: f64,
        omega_drive_fallback: f64,
    ) -> Result<DriveSignal, CliError> {
        let pulse = self
            .pulse
            .as_mut()
            .ok_or_else(|| CliError::Config("this command needs a pulse block".into()))?;
        let omega_drive = pulse
            .omega_drive_ghz
            .map_or(omega_drive_fallback, angular_from_ghz);
        let mut sig = DriveSignal::gaussian(
            angular_from_ghz(pulse.omega_peak_ghz),
            pulse.t_gate_ns,
            omega_drive,
        )?;
        if let Some(sigma) = pulse.sigma_ns {
            sig.sigma = sigma;
        }
        sig.beta = pulse.beta.unwrap_or_else(|| default_drag_coefficient(alpha2));
        sig.phi0 = pulse.phi0_rad;
        if pulse.omega_drive_ghz.is_none() {
            pulse.omega_drive_ghz = Some(ghz_from_angular(sig.omega_drive));
        }
        if pulse.sigma_ns.is_none() {
            pulse.sigma_ns = Some(sig.sigma);
        }
        if pulse.beta.is_none() {
            pulse.beta = Some(sig.beta);
        }
        Ok(sig)
    }
}

/// GHz/ns/radian view of effective parameters, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveView {
    pub omega_ghz: [f64; 3],
    pub alpha_ghz: [f64; 3],
    pub g12_ghz: f64,
    pub g23_ghz: f64,
    pub g13_ghz: f64,
    pub max_g_over_delta: f64,
    pub dispersive_ok: bool,
}

impl EffectiveView {
    pub fn of(eff: &EffectiveParams) -> Self {
        EffectiveView {
            omega_ghz: eff.omega.map(ghz_from_angular),
            alpha_ghz: eff.alpha.map(ghz_from_angular),
            g12_ghz: ghz_from_angular(eff.g12),
            g23_ghz: ghz_from_angular(eff.g23),
            g13_ghz: ghz_from_angular(eff.g13),
            max_g_over_delta: eff.max_g_over_delta,
            dispersive_ok: eff.dispersive_ok(),
        }
    }
}

/// GHz view of bare parameters, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct BareView {
    pub omega_ghz: [f64; 5],
    pub alpha_ghz: [f64; 5],
    pub g12_ghz: f64,
    pub g23_ghz: f64,
    pub g13_ghz: f64,
    pub g_qc_ghz: [f64; 4],
}

impl BareView {
    pub fn of(bare: &BareParams) -> Self {
        BareView {
            omega_ghz: bare.omega.map(ghz_from_angular),
            alpha_ghz: bare.alpha.map(ghz_from_angular),
            g12_ghz: ghz_from_angular(bare.g12),
            g23_ghz: ghz_from_angular(bare.g23),
            g13_ghz: ghz_from_angular(bare.g13),
            g_qc_ghz: [bare.g1c1, bare.g2c1, bare.g2c2, bare.g3c2].map(ghz_from_angular),
        }
    }
}
