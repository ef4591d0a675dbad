//! Electrical circuit layer: capacitance-network reduction and transmon
//! quantization.
//!
//! The device is three fixed-frequency transmons in a chain, with a flux-
//! tunable coupler between each neighboring pair. Charge coupling runs
//! through six capacitors (two qubit-qubit, four qubit-coupler); inverting
//! the five-node capacitance matrix loads each mode and generates effective
//! coupling capacitances, which quantization turns into mode frequencies,
//! anharmonicities, and exchange couplings.
//!
//! Two reduction routes exist deliberately: the closed-form expressions keep
//! only the leading hierarchy terms and are cheap enough for sweeps, while
//! the exact route inverts the capacitance matrix numerically and acts as
//! the oracle for them. Their disagreement pattern is itself physics: the
//! coupler-mediated capacitive path C₁c₁·C₂c₁/C̄c₁ is comparable to the
//! direct C₁₂ in realistic layouts, so the qubit-qubit entries of the two
//! routes differ by design, not by bug (see the scoped tests below).

use crate::error::{Error, Result};
use crate::model::BareParams;
use crate::units::{angular_from_ghz, charging_energy_ghz, FEMTOFARAD};

/// Raw electrical description of the five-mode circuit.
///
/// Capacitances in farads, Josephson energies in GHz (E/h), external fluxes
/// in radians. Coupler Josephson energies are the single-junction values of
/// the SQUID; the flux-tuned effective value comes from
/// [`coupler_josephson_energy`].
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    /// Qubit shunt capacitances C_q1..C_q3.
    pub c_q: [f64; 3],
    /// Coupler shunt capacitances C_c1, C_c2.
    pub c_c: [f64; 2],
    /// Direct qubit-qubit coupling capacitances C_12, C_23.
    pub c_12: f64,
    /// See `c_12`.
    pub c_23: f64,
    /// Qubit-coupler coupling capacitances.
    pub c_1c1: f64,
    /// See `c_1c1`.
    pub c_2c1: f64,
    /// See `c_1c1`.
    pub c_2c2: f64,
    /// See `c_1c1`.
    pub c_3c2: f64,
    /// Qubit Josephson energies in GHz.
    pub ej_q: [f64; 3],
    /// Coupler single-junction Josephson energies in GHz.
    pub ej_c: [f64; 2],
    /// External coupler fluxes in radians.
    pub phi_e: [f64; 2],
}

impl CircuitSpec {
    /// Checks positivity of every capacitance and Josephson energy.
    pub fn validate(&self) -> Result<()> {
        let caps = self.all_capacitances();
        if let Some((name, v)) = caps.iter().find(|(_, v)| *v <= 0.0) {
            return Err(Error::Validation(format!(
                "capacitance {name} must be positive, got {v:e} F"
            )));
        }
        for (name, ej) in self
            .ej_q
            .iter()
            .enumerate()
            .map(|(i, e)| (format!("E_J,q{}", i + 1), *e))
            .chain(
                self.ej_c
                    .iter()
                    .enumerate()
                    .map(|(j, e)| (format!("E_J,c{}", j + 1), *e)),
            )
        {
            if ej <= 0.0 {
                return Err(Error::Validation(format!(
                    "Josephson energy {name} must be positive, got {ej} GHz"
                )));
            }
        }
        Ok(())
    }

    /// Warns when the capacitance hierarchy C_qq ≪ C_qc ≪ C_shunt is not
    /// respected by at least the given ratio between tiers (default use: 10).
    pub fn hierarchy_warnings(&self, min_ratio: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        let min_shunt = self.c_q.iter().chain(&self.c_c).cloned().fold(f64::MAX, f64::min);
        let couplers = [self.c_1c1, self.c_2c1, self.c_2c2, self.c_3c2];
        let max_qc = couplers.iter().cloned().fold(0.0, f64::max);
        let min_qc = couplers.iter().cloned().fold(f64::MAX, f64::min);
        let max_qq = self.c_12.max(self.c_23);
        if min_shunt < min_ratio * max_qc {
            warnings.push(format!(
                "shunt capacitances ({:.1} fF min) are not ≥ {min_ratio}x the \
                 qubit-coupler capacitances ({:.1} fF max); closed-form reduction degrades",
                min_shunt / FEMTOFARAD,
                max_qc / FEMTOFARAD
            ));
        }
        if min_qc < min_ratio * max_qq {
            warnings.push(format!(
                "qubit-coupler capacitances ({:.2} fF min) are not ≥ {min_ratio}x the \
                 qubit-qubit capacitances ({:.2} fF max); closed-form reduction degrades",
                min_qc / FEMTOFARAD,
                max_qq / FEMTOFARAD
            ));
        }
        warnings
    }

    fn all_capacitances(&self) -> [(&'static str, f64); 11] {
        [
            ("C_q1", self.c_q[0]),
            ("C_q2", self.c_q[1]),
            ("C_q3", self.c_q[2]),
            ("C_c1", self.c_c[0]),
            ("C_c2", self.c_c[1]),
            ("C_12", self.c_12),
            ("C_23", self.c_23),
            ("C_1c1", self.c_1c1),
            ("C_2c1", self.c_2c1),
            ("C_2c2", self.c_2c2),
            ("C_3c2", self.c_3c2),
        ]
    }

    /// Reference device: capacitances and Josephson energies solved so that
    /// the closed-form reduction and quantization land on the canonical
    /// operating targets (ω_q/2π = 4.99, 5.31, 4.83 GHz; α_q/2π = −300,
    /// −250, −300 MHz; ω_c/2π = 7.0, 6.8 GHz; α_c/2π = −200 MHz; g₁₂ = 12,
    /// g₂₃ = 10.5, g_1c1 = g_2c1 = 55, g_2c2 = g_3c2 = 130 MHz) at external
    /// flux π/2 on both couplers.
    pub fn reference_device() -> Self {
        let ff = FEMTOFARAD;
        CircuitSpec {
            c_q: [
                62.844_950_728_410 * ff,
                71.773_503_137_226 * ff,
                60.858_282_092_588 * ff,
            ],
            c_c: [93.935_622_494_637 * ff, 89.809_869_369_718 * ff],
            c_12: 0.313_004_182_328 * ff,
            c_23: 0.278_116_878_957 * ff,
            c_1c1: 1.409_476_171_459 * ff,
            c_2c1: 1.506_047_957_199 * ff,
            c_2c2: 3.610_245_142_926 * ff,
            c_3c2: 3.431_032_110_652 * ff,
            ej_q: [11.660_041_666_667, 15.456_800_000_000, 10.965_375_000_000],
            ej_c: [22.910_259_710_444, 21.655_145_173_838],
            phi_e: [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
        }
    }
}

/// Loaded mode capacitances and inverse coupling capacitances.
///
/// Inverse entries are in 1/farads and signed as they appear in the reduced
/// Lagrangian; quantization takes their magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCapacitances {
    /// Loaded qubit capacitances C̄_q1..C̄_q3.
    pub cbar_q: [f64; 3],
    /// Loaded coupler capacitances C̄_c1, C̄_c2.
    pub cbar_c: [f64; 2],
    /// 1/C̄_12, the effective inverse qubit-qubit coupling capacitance.
    pub inv_12: f64,
    /// See `inv_12`.
    pub inv_23: f64,
    /// Second-order qubit 1 to qubit 3 entry (no direct capacitor exists).
    pub inv_13: f64,
    /// Qubit-coupler entries 1/C̄_k,cj.
    pub inv_1c1: f64,
    /// See `inv_1c1`.
    pub inv_2c1: f64,
    /// See `inv_1c1`.
    pub inv_2c2: f64,
    /// See `inv_1c1`.
    pub inv_3c2: f64,
}

/// How to reduce the capacitance network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    /// Leading-order closed forms (hierarchy expansion).
    ClosedForm,
    /// Numerical inversion of the full 5×5 capacitance matrix.
    ExactInverse,
}

/// Reduces the capacitance network to loaded and coupling capacitances.
pub fn reduce_capacitance_network(
    spec: &CircuitSpec,
    method: ReductionMethod,
) -> Result<EffectiveCapacitances> {
    spec.validate()?;
    match method {
        ReductionMethod::ClosedForm => Ok(closed_form(spec)),
        ReductionMethod::ExactInverse => exact_inverse(spec),
    }
}

fn closed_form(spec: &CircuitSpec) -> EffectiveCapacitances {
    let cbar_q = [
        spec.c_q[0] + spec.c_12 + spec.c_1c1,
        spec.c_q[1] + spec.c_12 + spec.c_23 + spec.c_2c1 + spec.c_2c2,
        spec.c_q[2] + spec.c_23 + spec.c_3c2,
    ];
    let cbar_c = [
        spec.c_c[0] + spec.c_1c1 + spec.c_2c1,
        spec.c_c[1] + spec.c_2c2 + spec.c_3c2,
    ];
    EffectiveCapacitances {
        cbar_q,
        cbar_c,
        inv_12: -2.0 * spec.c_12 / (cbar_q[0] * cbar_q[1]),
        inv_23: -2.0 * spec.c_23 / (cbar_q[1] * cbar_q[2]),
        inv_13: 4.0 * spec.c_12 * spec.c_23 / (cbar_q[0] * cbar_q[1] * cbar_q[2]),
        inv_1c1: -2.0 * spec.c_1c1 / (cbar_q[0] * cbar_c[0]),
        inv_2c1: -2.0 * spec.c_2c1 / (cbar_q[1] * cbar_c[0]),
        inv_2c2: -2.0 * spec.c_2c2 / (cbar_q[1] * cbar_c[1]),
        inv_3c2: -2.0 * spec.c_3c2 / (cbar_q[2] * cbar_c[1]),
    }
}

fn exact_inverse(spec: &CircuitSpec) -> Result<EffectiveCapacitances> {
    // Maxwell capacitance matrix over nodes (q1, q2, q3, c1, c2).
    let mut m = nalgebra::Matrix5::<f64>::zeros();
    let diag = [
        spec.c_q[0] + spec.c_12 + spec.c_1c1,
        spec.c_q[1] + spec.c_12 + spec.c_23 + spec.c_2c1 + spec.c_2c2,
        spec.c_q[2] + spec.c_23 + spec.c_3c2,
        spec.c_c[0] + spec.c_1c1 + spec.c_2c1,
        spec.c_c[1] + spec.c_2c2 + spec.c_3c2,
    ];
    for (k, d) in diag.into_iter().enumerate() {
        m[(k, k)] = d;
    }
    for (i, j, c) in [
        (0, 1, spec.c_12),
        (1, 2, spec.c_23),
        (0, 3, spec.c_1c1),
        (1, 3, spec.c_2c1),
        (1, 4, spec.c_2c2),
        (2, 4, spec.c_3c2),
    ] {
        m[(i, j)] = -c;
        m[(j, i)] = -c;
    }
    let minv = m
        .try_inverse()
        .ok_or_else(|| Error::Validation("capacitance matrix is singular".into()))?;
    Ok(EffectiveCapacitances {
        cbar_q: [1.0 / minv[(0, 0)], 1.0 / minv[(1, 1)], 1.0 / minv[(2, 2)]],
        cbar_c: [1.0 / minv[(3, 3)], 1.0 / minv[(4, 4)]],
        inv_12: -2.0 * minv[(0, 1)],
        inv_23: -2.0 * minv[(1, 2)],
        inv_13: -2.0 * minv[(0, 2)],
        inv_1c1: -2.0 * minv[(0, 3)],
        inv_2c1: -2.0 * minv[(1, 3)],
        inv_2c2: -2.0 * minv[(1, 4)],
        inv_3c2: -2.0 * minv[(2, 4)],
    })
}

/// Flux-tuned effective Josephson energy of a symmetric SQUID coupler.
///
/// Ẽ_J = 2·E_J·cos(φ_e/2); negative values are a legal return (the caller
/// decides whether the operating point is physical).
pub fn coupler_josephson_energy(ej_ghz: f64, phi_e: f64) -> f64 {
    2.0 * ej_ghz * (phi_e / 2.0).cos()
}

/// Quantizes the reduced circuit into bare mode parameters.
///
/// Per mode: E_C = e²/2C̄ (as a frequency), ω = √(8·E_C·E_J) − E_C,
/// α = −E_C, zero-point phase φ̃ = (2E_C/E_J)^{1/4}. Exchange couplings come
/// from the effective coupling capacitances: g_nm = E_C(C̄_nm)/(φ̃_n·φ̃_m)
/// with E_C(C̄_nm) the charging energy of the inverse entry's magnitude.
/// Coupling signs are dropped here; the Hamiltonian builders own the sign
/// structure.
pub fn quantize(caps: &EffectiveCapacitances, spec: &CircuitSpec) -> Result<BareParams> {
    let ej = [
        spec.ej_q[0],
        spec.ej_q[1],
        spec.ej_q[2],
        coupler_josephson_energy(spec.ej_c[0], spec.phi_e[0]),
        coupler_josephson_energy(spec.ej_c[1], spec.phi_e[1]),
    ];
    let cbar = [
        caps.cbar_q[0],
        caps.cbar_q[1],
        caps.cbar_q[2],
        caps.cbar_c[0],
        caps.cbar_c[1],
    ];

    let mut omega = [0.0; 5];
    let mut alpha = [0.0; 5];
    let mut phase = [0.0; 5];
    let mut ec = [0.0; 5];
    for k in 0..5 {
        if ej[k] <= 0.0 {
            return Err(Error::Validation(format!(
                "effective Josephson energy of mode {k} is {:.3} GHz (must be > 0)",
                ej[k]
            )));
        }
        ec[k] = charging_energy_ghz(cbar[k]);
        omega[k] = angular_from_ghz((8.0 * ec[k] * ej[k]).sqrt() - ec[k]);
        alpha[k] = angular_from_ghz(-ec[k]);
        phase[k] = (2.0 * ec[k] / ej[k]).powf(0.25);
    }

    let coupling = |inv: f64, a: usize, b: usize| -> f64 {
        if inv == 0.0 {
            return 0.0;
        }
        angular_from_ghz(charging_energy_ghz(1.0 / inv.abs()) / (phase[a] * phase[b]))
    };

    Ok(BareParams {
        omega,
        alpha,
        g12: coupling(caps.inv_12, 0, 1),
        g23: coupling(caps.inv_23, 1, 2),
        g13: coupling(caps.inv_13, 0, 2),
        g1c1: coupling(caps.inv_1c1, 0, 3),
        g2c1: coupling(caps.inv_2c1, 1, 3),
        g2c2: coupling(caps.inv_2c2, 1, 4),
        g3c2: coupling(caps.inv_3c2, 2, 4),
        zero_point_phase: phase,
        charging_energy_ghz: ec,
    })
}

/// Warns when any mode leaves the transmon regime (E_J/E_C < 20).
pub fn transmon_regime_warnings(caps: &EffectiveCapacitances, spec: &CircuitSpec) -> Vec<String> {
    let ej = [
        spec.ej_q[0],
        spec.ej_q[1],
        spec.ej_q[2],
        coupler_josephson_energy(spec.ej_c[0], spec.phi_e[0]),
        coupler_josephson_energy(spec.ej_c[1], spec.phi_e[1]),
    ];
    let cbar = [
        caps.cbar_q[0],
        caps.cbar_q[1],
        caps.cbar_q[2],
        caps.cbar_c[0],
        caps.cbar_c[1],
    ];
    let names = ["q1", "q2", "q3", "c1", "c2"];
    let mut warnings = Vec::new();
    for k in 0..5 {
        let ratio = ej[k] / charging_energy_ghz(cbar[k]);
        if ratio < 20.0 {
            warnings.push(format!(
                "mode {} has E_J/E_C = {ratio:.1} < 20; transmon expansion degrades",
                names[k]
            ));
        }
    }
    warnings
}
