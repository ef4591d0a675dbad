//! Mode parameters and Hamiltonian builders.
//!
//! Three model tiers of the same device:
//!
//! * the full five-mode circuit Hamiltonian (three qubits, two couplers)
//!   with rotating-wave exchange terms carrying the minus sign the circuit
//!   derivation produces;
//! * the coupler-eliminated three-mode effective model, built from dressed
//!   frequencies and net couplings with plus-sign exchange terms;
//! * an eight-dimensional two-level reference model that keeps only the
//!   conditional-shift diagonal, used for validation.
//!
//! The overall exchange sign is a basis convention (it flips under q → −q on
//! one mode) and cancels in every |g|²-order observable; the two tiers keep
//! the sign their respective derivations print, and the dual-route shift
//! tests pin the physics regardless.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::{C64, ModeLayout};
use crate::linalg::dagger;
use crate::units::{angular_from_ghz, mhz_from_angular};

/// Default resonance guard for small denominators: 1 MHz, angular.
pub const RESONANCE_GUARD: f64 = crate::units::TWO_PI * 1e-3;

/// Bare (undressed) parameters of the five circuit modes.
///
/// Mode order: q1, q2, q3, c1, c2. Frequencies and couplings are angular
/// (rad/ns); couplings are magnitudes, the builders own the signs.
#[derive(Debug, Clone, PartialEq)]
pub struct BareParams {
    /// Mode frequencies ω.
    pub omega: [f64; 5],
    /// Anharmonicities α (negative for transmons).
    pub alpha: [f64; 5],
    /// Direct qubit-qubit couplings.
    pub g12: f64,
    /// See `g12`.
    pub g23: f64,
    /// See `g12`; zero unless the capacitance network generates it.
    pub g13: f64,
    /// Qubit-coupler couplings.
    pub g1c1: f64,
    /// See `g1c1`.
    pub g2c1: f64,
    /// See `g1c1`.
    pub g2c2: f64,
    /// See `g1c1`.
    pub g3c2: f64,
    /// Zero-point phase fluctuations φ̃ = (2E_C/E_J)^{1/4} per mode.
    pub zero_point_phase: [f64; 5],
    /// Charging energies E_C per mode, linear GHz.
    pub charging_energy_ghz: [f64; 5],
}

impl BareParams {
    /// Builds bare parameters from stated linear frequencies (GHz), the form
    /// device tables use. Zero-point phases and charging energies are filled
    /// from the transmon relations E_C = −α and φ̃² = 4E_C/(ω + E_C).
    #[allow(clippy::too_many_arguments)]
    pub fn from_frequencies_ghz(
        omega_q: [f64; 3],
        alpha_q: [f64; 3],
        omega_c: [f64; 2],
        alpha_c: [f64; 2],
        g12: f64,
        g23: f64,
        g13: f64,
        g_qc: [f64; 4],
    ) -> Result<Self> {
        let omega_ghz = [omega_q[0], omega_q[1], omega_q[2], omega_c[0], omega_c[1]];
        let alpha_ghz = [alpha_q[0], alpha_q[1], alpha_q[2], alpha_c[0], alpha_c[1]];
        let mut omega = [0.0; 5];
        let mut alpha = [0.0; 5];
        let mut phase = [0.0; 5];
        let mut ec = [0.0; 5];
        for k in 0..5 {
            if alpha_ghz[k] >= 0.0 {
                return Err(Error::Validation(format!(
                    "anharmonicity of mode {k} must be negative, got {} GHz",
                    alpha_ghz[k]
                )));
            }
            omega[k] = angular_from_ghz(omega_ghz[k]);
            alpha[k] = angular_from_ghz(alpha_ghz[k]);
            ec[k] = -alpha_ghz[k];
            phase[k] = (4.0 * ec[k] / (omega_ghz[k] + ec[k])).sqrt().sqrt();
        }
        Ok(BareParams {
            omega,
            alpha,
            g12: angular_from_ghz(g12),
            g23: angular_from_ghz(g23),
            g13: angular_from_ghz(g13),
            g1c1: angular_from_ghz(g_qc[0]),
            g2c1: angular_from_ghz(g_qc[1]),
            g2c2: angular_from_ghz(g_qc[2]),
            g3c2: angular_from_ghz(g_qc[3]),
            zero_point_phase: phase,
            charging_energy_ghz: ec,
        })
    }

    /// The canonical operating point stated for the reference device.
    pub fn reference_operating_point() -> Self {
        Self::from_frequencies_ghz(
            [4.99, 5.31, 4.83],
            [-0.300, -0.250, -0.300],
            [7.0, 6.8],
            [-0.200, -0.200],
            0.012,
            0.0105,
            0.002,
            [0.055, 0.055, 0.130, 0.130],
        )
        .expect("reference point is valid")
    }

    /// Qubit-coupler detunings Δ_k,cj = ω_k − ω_cj for the four couplings.
    pub fn qubit_coupler_detunings(&self) -> [f64; 4] {
        [
            self.omega[0] - self.omega[3],
            self.omega[1] - self.omega[3],
            self.omega[1] - self.omega[4],
            self.omega[2] - self.omega[4],
        ]
    }
}

/// Dressed three-mode parameters after coupler elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveParams {
    /// Dressed qubit frequencies ω̃ (angular).
    pub omega: [f64; 3],
    /// Dressed anharmonicities α̃ (angular); pass-through by default,
    /// assignable when an independently measured value should be used.
    pub alpha: [f64; 3],
    /// Net nearest-neighbor coupling g̃₁₂ (angular, signed).
    pub g12: f64,
    /// Net nearest-neighbor coupling g̃₂₃ (angular, signed).
    pub g23: f64,
    /// Direct next-nearest coupling g̃₁₃ = g₁₃ (angular, signed).
    pub g13: f64,
    /// Largest |g/Δ| over the four eliminated qubit-coupler pairs; zero when
    /// constructed directly from stated dressed values.
    pub max_g_over_delta: f64,
}

impl EffectiveParams {
    /// Builds effective parameters from stated linear frequencies in GHz.
    pub fn from_frequencies_ghz(
        omega: [f64; 3],
        alpha: [f64; 3],
        g12: f64,
        g23: f64,
        g13: f64,
    ) -> Self {
        EffectiveParams {
            omega: omega.map(angular_from_ghz),
            alpha: alpha.map(angular_from_ghz),
            g12: angular_from_ghz(g12),
            g23: angular_from_ghz(g23),
            g13: angular_from_ghz(g13),
            max_g_over_delta: 0.0,
        }
    }

    /// True when every eliminated pair satisfied |g/Δ| < 0.1.
    pub fn dispersive_ok(&self) -> bool {
        self.max_g_over_delta < 0.1
    }

    /// Qubit-qubit detunings (Δ̃₁₂, Δ̃₂₃, Δ̃₁₃).
    pub fn detunings(&self) -> [f64; 3] {
        [
            self.omega[0] - self.omega[1],
            self.omega[1] - self.omega[2],
            self.omega[0] - self.omega[2],
        ]
    }
}

/// Couplings to the eliminated couplers that survive the dressing
/// transformation at first order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCouplings {
    /// Residual g̃_1,c1 (angular).
    pub g1c1: f64,
    /// Residual g̃_2,c1 (angular).
    pub g2c1: f64,
    /// Residual g̃_2,c2 (angular).
    pub g2c2: f64,
    /// Residual g̃_3,c2 (angular).
    pub g3c2: f64,
}

impl ResidualCouplings {
    /// Largest residual magnitude in MHz.
    pub fn max_abs_mhz(&self) -> f64 {
        [self.g1c1, self.g2c1, self.g2c2, self.g3c2]
            .iter()
            .map(|g| mhz_from_angular(g.abs()))
            .fold(0.0, f64::max)
    }

    /// Warning strings for residuals above 1 MHz, where the coupler-
    /// eliminated model starts to mispredict idle phases.
    pub fn warnings(&self) -> Vec<String> {
        let named = [
            ("g~_1,c1", self.g1c1),
            ("g~_2,c1", self.g2c1),
            ("g~_2,c2", self.g2c2),
            ("g~_3,c2", self.g3c2),
        ];
        named
            .iter()
            .filter(|(_, g)| mhz_from_angular(g.abs()) > 1.0)
            .map(|(name, g)| {
                format!(
                    "residual coupler coupling {name} = {:+.3} MHz exceeds 1 MHz",
                    mhz_from_angular(*g)
                )
            })
            .collect()
    }
}

fn guard(value: f64, term: String, context: &'static str) -> Result<f64> {
    if value.abs() < RESONANCE_GUARD {
        return Err(Error::ResonantDenominator {
            term,
            value_ghz: crate::units::ghz_from_angular(value),
            guard_ghz: crate::units::ghz_from_angular(RESONANCE_GUARD),
            context,
        });
    }
    Ok(value)
}

/// Dresses the bare parameters by second-order coupler elimination.
///
/// ω̃_i = ω_i + Σ_j g²_{i,cj}/Δ_{i,cj} over the couplers each qubit touches,
/// g̃₁₂ = g₁₂ + g_1c1·g_2c1·(1/Δ_1c1 + 1/Δ_2c1) and likewise for g̃₂₃;
/// g̃₁₃ = g₁₃ and α̃ = α pass through unchanged.
pub fn dress_parameters(bare: &BareParams) -> Result<EffectiveParams> {
    let [d1c1, d2c1, d2c2, d3c2] = bare.qubit_coupler_detunings();
    let d1c1 = guard(d1c1, "Delta_1,c1".into(), "parameter dressing")?;
    let d2c1 = guard(d2c1, "Delta_2,c1".into(), "parameter dressing")?;
    let d2c2 = guard(d2c2, "Delta_2,c2".into(), "parameter dressing")?;
    let d3c2 = guard(d3c2, "Delta_3,c2".into(), "parameter dressing")?;

    let omega = [
        bare.omega[0] + bare.g1c1 * bare.g1c1 / d1c1,
        bare.omega[1] + bare.g2c1 * bare.g2c1 / d2c1 + bare.g2c2 * bare.g2c2 / d2c2,
        bare.omega[2] + bare.g3c2 * bare.g3c2 / d3c2,
    ];
    let ratios = [
        bare.g1c1 / d1c1,
        bare.g2c1 / d2c1,
        bare.g2c2 / d2c2,
        bare.g3c2 / d3c2,
    ];
    Ok(EffectiveParams {
        omega,
        alpha: [bare.alpha[0], bare.alpha[1], bare.alpha[2]],
        g12: bare.g12 + bare.g1c1 * bare.g2c1 * (1.0 / d1c1 + 1.0 / d2c1),
        g23: bare.g23 + bare.g2c2 * bare.g3c2 * (1.0 / d2c2 + 1.0 / d3c2),
        g13: bare.g13,
        max_g_over_delta: ratios.iter().map(|r| r.abs()).fold(0.0, f64::max),
    })
}

/// First-order residual couplings to the eliminated couplers.
///
/// Each qubit keeps a coupling g_pair·g_{i,cj}/Δ_{i,cj} to the coupler that
/// bridges it to its neighbor, where g_pair is the direct coupling of the
/// bridged qubit pair.
pub fn residual_couplings(bare: &BareParams) -> Result<ResidualCouplings> {
    let [d1c1, d2c1, d2c2, d3c2] = bare.qubit_coupler_detunings();
    let d1c1 = guard(d1c1, "Delta_1,c1".into(), "residual couplings")?;
    let d2c1 = guard(d2c1, "Delta_2,c1".into(), "residual couplings")?;
    let d2c2 = guard(d2c2, "Delta_2,c2".into(), "residual couplings")?;
    let d3c2 = guard(d3c2, "Delta_3,c2".into(), "residual couplings")?;
    Ok(ResidualCouplings {
        g1c1: bare.g12 * bare.g1c1 / d1c1,
        g2c1: bare.g12 * bare.g2c1 / d2c1,
        g2c2: bare.g23 * bare.g2c2 / d2c2,
        g3c2: bare.g23 * bare.g3c2 / d3c2,
    })
}

/// Diagonal transmon part Σ ω·n̂ + (α/2)·n̂(n̂−1) over a layout.
fn transmon_diagonal(layout: &ModeLayout, omega: &[f64], alpha: &[f64]) -> Array2<C64> {
    let diag = layout.diagonal_sum(|k, n| {
        let n = n as f64;
        omega[k] * n + 0.5 * alpha[k] * n * (n - 1.0)
    });
    let mut h = Array2::zeros((layout.dim(), layout.dim()));
    for (i, &e) in diag.iter().enumerate() {
        h[(i, i)] = C64::new(e, 0.0);
    }
    h
}

fn add_exchange(h: &mut Array2<C64>, layout: &ModeLayout, i: usize, j: usize, g: f64) {
    if g == 0.0 {
        return;
    }
    let ai = layout.lowering(i);
    let aj = layout.lowering(j);
    let term = dagger(&ai).dot(&aj) + dagger(&aj).dot(&ai);
    h.zip_mut_with(&term, |hij, t| *hij += C64::new(g, 0.0) * t);
}

/// Full five-mode Hamiltonian with rotating-wave exchange terms.
///
/// All seven exchange couplings enter with a minus sign, the structure the
/// circuit derivation fixes: ⟨100;00|H|000;10⟩ = −g_1,c1.
pub fn full_hamiltonian(bare: &BareParams, layout: &ModeLayout) -> Result<Array2<C64>> {
    if layout.n_modes() != 5 {
        return Err(Error::ShapeMismatch {
            expected: "5-mode layout".into(),
            got: format!("{} modes", layout.n_modes()),
        });
    }
    let mut h = transmon_diagonal(layout, &bare.omega, &bare.alpha);
    for (i, j, g) in [
        (0, 1, bare.g12),
        (1, 2, bare.g23),
        (0, 2, bare.g13),
        (0, 3, bare.g1c1),
        (1, 3, bare.g2c1),
        (1, 4, bare.g2c2),
        (2, 4, bare.g3c2),
    ] {
        add_exchange(&mut h, layout, i, j, -g);
    }
    Ok(h)
}

/// Effective three-mode Hamiltonian: dressed transmons with plus-sign
/// exchange terms g̃·(q_i q_j† + q_i† q_j).
pub fn effective_hamiltonian(eff: &EffectiveParams, layout: &ModeLayout) -> Result<Array2<C64>> {
    if layout.n_modes() != 3 {
        return Err(Error::ShapeMismatch {
            expected: "3-mode layout".into(),
            got: format!("{} modes", layout.n_modes()),
        });
    }
    let mut h = transmon_diagonal(layout, &eff.omega, &eff.alpha);
    for (i, j, g) in [(0, 1, eff.g12), (1, 2, eff.g23), (0, 2, eff.g13)] {
        add_exchange(&mut h, layout, i, j, g);
    }
    Ok(h)
}

/// Two-level reference Hamiltonian: the conditional-shift diagonal
/// χ₁₂·n̂₁n̂₂ + χ₂₃·n̂₂n̂₃ on three two-level systems, in the frame where all
/// single-qubit rotations vanish. χ values are angular.
pub fn two_level_hamiltonian(chi12: f64, chi23: f64) -> Array2<C64> {
    let mut h = Array2::zeros((8, 8));
    for b in 0..8usize {
        let (b1, b2, b3) = ((b >> 2) & 1, (b >> 1) & 1, b & 1);
        let e = chi12 * (b1 * b2) as f64 + chi23 * (b2 * b3) as f64;
        h[(b, b)] = C64::new(e, 0.0);
    }
    h
}

/// Lowering operator of the driven qubit (mode 2 of 3) on a layout.
pub fn drive_operator(layout: &ModeLayout) -> Array2<C64> {
    layout.lowering(1)
}

/// Total excitation number operator over a layout.
pub fn total_number(layout: &ModeLayout) -> Array2<C64> {
    let mut n = Array2::zeros((layout.dim(), layout.dim()));
    for k in 0..layout.n_modes() {
        n += &layout.number(k);
    }
    n
}
