//! Closed-form dispersive shifts of the effective three-mode model.
//!
//! Second-order pair shifts, the third-order three-body shift, and the
//! third-order corrections to the seven lowest computational energies, all
//! as explicit rational expressions in the dressed parameters. First-order
//! terms vanish identically for exchange coupling, so no order-1 entry
//! exists anywhere in the API.
//!
//! Every denominator is screened against a resonance guard before use and
//! reported by name when it straddles a resonance; the expressions diverge
//! there and a silent blowup would poison parameter sweeps.

use crate::error::{Error, Result};
use crate::model::EffectiveParams;
use crate::units::TWO_PI;

/// Default resonance guard: 1 MHz, angular.
pub const DEFAULT_GUARD: f64 = TWO_PI * 1e-3;

fn checked(value: f64, term: &str, guard: f64, context: &'static str) -> Result<f64> {
    if value.abs() < guard {
        return Err(Error::ResonantDenominator {
            term: term.to_string(),
            value_ghz: value / TWO_PI,
            guard_ghz: guard / TWO_PI,
            context,
        });
    }
    Ok(value)
}

/// Second-order cross-Kerr shift of qubit pair (i, j), five terms.
///
/// Symmetric under i ↔ j; proportional to g̃²; vanishes as 1/α̃ in the
/// two-level limit because every term carries an anharmonicity.
pub fn chi2_pair(eff: &EffectiveParams, i: usize, j: usize) -> Result<f64> {
    chi2_pair_with_guard(eff, i, j, DEFAULT_GUARD)
}

/// `chi2_pair` with an explicit resonance guard (angular).
pub fn chi2_pair_with_guard(
    eff: &EffectiveParams,
    i: usize,
    j: usize,
    guard: f64,
) -> Result<f64> {
    if i > 2 || j > 2 || i == j {
        return Err(Error::Validation(format!(
            "chi2_pair needs two distinct qubit indices in 0..3, got ({i}, {j})"
        )));
    }
    let g = match (i.min(j), i.max(j)) {
        (0, 1) => eff.g12,
        (1, 2) => eff.g23,
        _ => eff.g13,
    };
    let (ai, aj) = (eff.alpha[i], eff.alpha[j]);
    let d_ij = eff.omega[i] - eff.omega[j];
    let d_ji = -d_ij;
    let s = eff.omega[i] + eff.omega[j];
    let ctx = "second-order pair shift";
    let den1 = checked(ai + d_ij, "alpha_i + Delta_ij", guard, ctx)?;
    let den2 = checked(aj + d_ji, "alpha_j + Delta_ji", guard, ctx)?;
    let den3 = checked(ai + s, "alpha_i + Sigma_ij", guard, ctx)?;
    let den4 = checked(aj + s, "alpha_j + Sigma_ij", guard, ctx)?;
    let den5 = checked(ai + aj + s, "alpha_i + alpha_j + Sigma_ij", guard, ctx)?;
    let g2 = g * g;
    Ok(-2.0 * g2 / den1 - 2.0 * g2 / den2 + 2.0 * g2 / den3 + 2.0 * g2 / den4
        - 4.0 * g2 / den5)
}

/// Second-order shift of |111⟩: the sum of the three pair shifts. No
/// genuine three-body term exists at this order.
pub fn chi2_total(eff: &EffectiveParams) -> Result<f64> {
    Ok(chi2_pair(eff, 0, 1)? + chi2_pair(eff, 1, 2)? + chi2_pair(eff, 0, 2)?)
}

/// The distinct denominators of the third-order expressions, screened once.
struct Denominators {
    d12: f64,
    d13: f64,
    d23: f64,
    s12: f64,
    s13: f64,
    s23: f64,
    a1_d12: f64,
    a1_d13: f64,
    a2_d23: f64,
    a2_m_s12: f64,
    a3_m_s13: f64,
    a3_m_s23: f64,
    a1_s12: f64,
    a1_s13: f64,
    a2_s12: f64,
    a2_s23: f64,
    a3_s13: f64,
    a3_s23: f64,
    a12_s12: f64,
    a13_s13: f64,
    a23_s23: f64,
}

impl Denominators {
    fn new(eff: &EffectiveParams, guard: f64, ctx: &'static str) -> Result<Self> {
        let [a1, a2, a3] = eff.alpha;
        let d12 = eff.omega[0] - eff.omega[1];
        let d13 = eff.omega[0] - eff.omega[2];
        let d23 = eff.omega[1] - eff.omega[2];
        let s12 = eff.omega[0] + eff.omega[1];
        let s13 = eff.omega[0] + eff.omega[2];
        let s23 = eff.omega[1] + eff.omega[2];
        Ok(Denominators {
            d12: checked(d12, "Delta_12", guard, ctx)?,
            d13: checked(d13, "Delta_13", guard, ctx)?,
            d23: checked(d23, "Delta_23", guard, ctx)?,
            s12: checked(s12, "Sigma_12", guard, ctx)?,
            s13: checked(s13, "Sigma_13", guard, ctx)?,
            s23: checked(s23, "Sigma_23", guard, ctx)?,
            a1_d12: checked(a1 + d12, "alpha_1 + Delta_12", guard, ctx)?,
            a1_d13: checked(a1 + d13, "alpha_1 + Delta_13", guard, ctx)?,
            a2_d23: checked(a2 + d23, "alpha_2 + Delta_23", guard, ctx)?,
            a2_m_s12: checked(a2 - s12, "alpha_2 - Sigma_12", guard, ctx)?,
            a3_m_s13: checked(a3 - s13, "alpha_3 - Sigma_13", guard, ctx)?,
            a3_m_s23: checked(a3 - s23, "alpha_3 - Sigma_23", guard, ctx)?,
            a1_s12: checked(a1 + s12, "alpha_1 + Sigma_12", guard, ctx)?,
            a1_s13: checked(a1 + s13, "alpha_1 + Sigma_13", guard, ctx)?,
            a2_s12: checked(a2 + s12, "alpha_2 + Sigma_12", guard, ctx)?,
            a2_s23: checked(a2 + s23, "alpha_2 + Sigma_23", guard, ctx)?,
            a3_s13: checked(a3 + s13, "alpha_3 + Sigma_13", guard, ctx)?,
            a3_s23: checked(a3 + s23, "alpha_3 + Sigma_23", guard, ctx)?,
            a12_s12: checked(a1 + a2 + s12, "alpha_1 + alpha_2 + Sigma_12", guard, ctx)?,
            a13_s13: checked(a1 + a3 + s13, "alpha_1 + alpha_3 + Sigma_13", guard, ctx)?,
            a23_s23: checked(a2 + a3 + s23, "alpha_2 + alpha_3 + Sigma_23", guard, ctx)?,
        })
    }
}

/// Genuine third-order three-body shift 2·g̃₁₂g̃₂₃g̃₁₃·(…): the part of the
/// |111⟩ shift that is not a sum of pair shifts. Cubic in the couplings and
/// zero whenever any of the three vanishes.
pub fn chi3_123(eff: &EffectiveParams) -> Result<f64> {
    chi3_123_with_guard(eff, DEFAULT_GUARD)
}

/// `chi3_123` with an explicit resonance guard (angular).
pub fn chi3_123_with_guard(eff: &EffectiveParams, guard: f64) -> Result<f64> {
    let dn = Denominators::new(eff, guard, "third-order three-body shift")?;
    let bracket = 1.0 / (dn.d12 * dn.d13)
        + 1.0 / (dn.s12 * dn.d13)
        - 2.0 / (dn.a1_d12 * dn.a1_d13)
        - 4.0 / (dn.a12_s12 * dn.a1_d13)
        - 1.0 / (dn.d12 * dn.d23)
        + 1.0 / (dn.s12 * dn.d23)
        + 1.0 / (dn.d13 * dn.d23)
        - 2.0 / (dn.a2_m_s12 * dn.a2_d23)
        - 4.0 / (dn.a12_s12 * dn.a2_d23)
        - 4.0 / (dn.a1_d13 * dn.a2_d23)
        - 4.0 / (dn.a2_m_s12 * dn.a3_m_s13)
        + 2.0 / (dn.s12 * dn.a3_m_s13)
        + 1.0 / (dn.d12 * dn.s13)
        + 2.0 / (dn.a2_m_s12 * dn.s13)
        - 3.0 / (dn.s12 * dn.s13)
        + 2.0 / (dn.a2_s12 * dn.s13)
        - 1.0 / (dn.d23 * dn.s13)
        + 2.0 / (dn.a2_d23 * dn.s13)
        + 2.0 / (dn.a1_s12 * dn.a1_s13)
        + 2.0 / (dn.s12 * dn.a3_s13)
        - 4.0 / (dn.a1_d12 * dn.a13_s13)
        - 8.0 / (dn.a12_s12 * dn.a13_s13)
        - 4.0 / (dn.a1_d12 * dn.a3_m_s23)
        + 2.0 / (dn.s12 * dn.a3_m_s23)
        - 2.0 / (dn.a3_m_s13 * dn.a3_m_s23)
        - 4.0 / (dn.a13_s13 * dn.a3_m_s23)
        - 1.0 / (dn.d12 * dn.s23)
        + 2.0 / (dn.a1_d12 * dn.s23)
        - 3.0 / (dn.s12 * dn.s23)
        + 2.0 / (dn.a1_s12 * dn.s23)
        - 1.0 / (dn.d13 * dn.s23)
        + 2.0 / (dn.a1_d13 * dn.s23)
        - 3.0 / (dn.s13 * dn.s23)
        + 2.0 / (dn.a1_s13 * dn.s23)
        + 2.0 / (dn.a2_s12 * dn.a2_s23)
        + 2.0 / (dn.s13 * dn.a2_s23)
        + 2.0 / (dn.s12 * dn.a3_s23)
        + 2.0 / (dn.a3_s13 * dn.a3_s23)
        - 4.0 / (dn.a2_m_s12 * dn.a23_s23)
        - 8.0 / (dn.a12_s12 * dn.a23_s23)
        - 4.0 / (dn.a3_m_s13 * dn.a23_s23)
        - 8.0 / (dn.a13_s13 * dn.a23_s23);
    Ok(2.0 * eff.g12 * eff.g23 * eff.g13 * bracket)
}

/// Third-order corrections to the seven lowest computational energies,
/// all proportional to the product g̃₁₂g̃₂₃g̃₁₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirdOrderCorrections {
    pub e110: f64,
    pub e101: f64,
    pub e011: f64,
    pub e100: f64,
    pub e010: f64,
    pub e001: f64,
    pub e000: f64,
}

impl ThirdOrderCorrections {
    /// Pair-shift correction χ₁₂⁽³⁾ assembled from the energy corrections.
    pub fn chi3_12(&self) -> f64 {
        self.e110 - self.e100 - self.e010 + self.e000
    }

    /// Pair-shift correction χ₂₃⁽³⁾.
    pub fn chi3_23(&self) -> f64 {
        self.e011 - self.e010 - self.e001 + self.e000
    }

    /// Pair-shift correction χ₁₃⁽³⁾.
    pub fn chi3_13(&self) -> f64 {
        self.e101 - self.e100 - self.e001 + self.e000
    }

    /// Sum of the three assembled pair corrections.
    pub fn chi3_pair_sum(&self) -> f64 {
        self.chi3_12() + self.chi3_23() + self.chi3_13()
    }
}

/// Evaluates the seven third-order energy corrections.
pub fn energy_corrections_third(eff: &EffectiveParams) -> Result<ThirdOrderCorrections> {
    energy_corrections_third_with_guard(eff, DEFAULT_GUARD)
}

/// `energy_corrections_third` with an explicit resonance guard (angular).
pub fn energy_corrections_third_with_guard(
    eff: &EffectiveParams,
    guard: f64,
) -> Result<ThirdOrderCorrections> {
    let dn = Denominators::new(eff, guard, "third-order energy corrections")?;
    let g = eff.g12 * eff.g23 * eff.g13;
    let e110 = g
        * (4.0 / (dn.d13 * dn.a2_m_s12) + 4.0 / (dn.d23 * dn.a1_d12)
            - 2.0 / (dn.s12 * dn.d13)
            - 2.0 / (dn.s12 * dn.d23)
            - 8.0 / (dn.a1_s13 * dn.a2_s23)
            + 4.0 / (dn.d23 * dn.a1_s13)
            + 4.0 / (dn.d13 * dn.a2_s23)
            - 2.0 / (dn.d13 * dn.d23)
            - 8.0 / (dn.a1_s13 * dn.a12_s12)
            - 8.0 / (dn.a2_s23 * dn.a12_s12)
            - 4.0 / (dn.a1_d12 * dn.a1_s13)
            - 4.0 / (dn.a2_m_s12 * dn.a2_s23));
    let e101 = g
        * (4.0 / (dn.d12 * dn.a3_m_s13) - 4.0 / (dn.d23 * dn.a1_d13)
            - 2.0 / (dn.s13 * dn.d12)
            + 2.0 / (dn.s13 * dn.d23)
            - 8.0 / (dn.a1_s12 * dn.a3_s23)
            - 4.0 / (dn.d23 * dn.a1_s12)
            + 4.0 / (dn.d12 * dn.a3_s23)
            + 2.0 / (dn.d12 * dn.d23)
            - 8.0 / (dn.a1_s12 * dn.a13_s13)
            - 8.0 / (dn.a3_s23 * dn.a13_s13)
            - 4.0 / (dn.a1_d13 * dn.a1_s12)
            - 4.0 / (dn.a3_m_s13 * dn.a3_s23));
    let e011 = g
        * (2.0 / (dn.s23 * dn.d12) - 4.0 / (dn.d13 * dn.a2_d23) - 4.0 / (dn.d12 * dn.a3_m_s23)
            + 2.0 / (dn.s23 * dn.d13)
            - 8.0 / (dn.a2_s12 * dn.a3_s13)
            - 4.0 / (dn.d13 * dn.a2_s12)
            - 4.0 / (dn.d12 * dn.a3_s13)
            - 2.0 / (dn.d12 * dn.d13)
            - 8.0 / (dn.a2_s12 * dn.a23_s23)
            - 8.0 / (dn.a3_s13 * dn.a23_s23)
            - 4.0 / (dn.a2_d23 * dn.a2_s12)
            - 4.0 / (dn.a3_m_s23 * dn.a3_s13));
    let e100 = g
        * (2.0 / (dn.s23 * dn.d12) - 4.0 / (dn.s23 * dn.a1_s13) - 4.0 / (dn.s23 * dn.a1_s12)
            + 2.0 / (dn.s23 * dn.d13)
            - 4.0 / (dn.a1_s12 * dn.a1_s13)
            - 2.0 / (dn.d12 * dn.d13));
    let e010 = g
        * (2.0 / (dn.s13 * dn.d23) - 4.0 / (dn.s13 * dn.a2_s23) - 2.0 / (dn.s13 * dn.d12)
            - 4.0 / (dn.s13 * dn.a2_s12)
            - 4.0 / (dn.a2_s12 * dn.a2_s23)
            + 2.0 / (dn.d12 * dn.d23));
    let e001 = g
        * (-4.0 / (dn.s12 * dn.a3_s13) - 4.0 / (dn.s12 * dn.a3_s23) - 2.0 / (dn.s12 * dn.d13)
            - 2.0 / (dn.s12 * dn.d23)
            - 4.0 / (dn.a3_s13 * dn.a3_s23)
            - 2.0 / (dn.d13 * dn.d23));
    let e000 =
        g * (-2.0 / (dn.s12 * dn.s13) - 2.0 / (dn.s12 * dn.s23) - 2.0 / (dn.s13 * dn.s23));
    Ok(ThirdOrderCorrections {
        e110,
        e101,
        e011,
        e100,
        e010,
        e001,
        e000,
    })
}

/// Exact-diagonalization shift values that a report can carry alongside the
/// perturbative orders. χ₁₂₃ is the full |111⟩ combination, so its genuine
/// three-body part is χ₁₂₃ − χ₁₂ − χ₂₃ − χ₁₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactShifts {
    pub chi12: f64,
    pub chi23: f64,
    pub chi13: f64,
    pub chi123: f64,
}

impl ExactShifts {
    /// Genuine three-body part of the exact |111⟩ shift.
    pub fn three_body(&self) -> f64 {
        self.chi123 - self.chi12 - self.chi23 - self.chi13
    }
}

/// One shift with its available evaluation routes. Angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftEntry {
    pub order2: f64,
    pub order3: Option<f64>,
    pub exact: Option<f64>,
    /// Best perturbative value: order2 plus order3 where available.
    pub total: f64,
}

impl ShiftEntry {
    fn new(order2: f64, order3: Option<f64>, exact: Option<f64>) -> Self {
        ShiftEntry {
            order2,
            order3,
            exact,
            total: order2 + order3.unwrap_or(0.0),
        }
    }

    /// Evaluation methods present in this entry.
    pub fn methods(&self) -> Vec<&'static str> {
        let mut m = vec!["perturbative_2"];
        if self.order3.is_some() {
            m.push("perturbative_3");
        }
        if self.exact.is_some() {
            m.push("exact");
        }
        m
    }
}

/// All dispersive shifts of the device by evaluation route.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveShifts {
    pub chi12: ShiftEntry,
    pub chi23: ShiftEntry,
    pub chi13: ShiftEntry,
    /// Full shift of |111⟩: pair sum at second order, pair corrections plus
    /// the genuine three-body bracket at third.
    pub chi123: ShiftEntry,
    /// Genuine three-body part alone; zero at second order by construction.
    pub three_body: ShiftEntry,
}

/// Assembles the perturbative orders and optional exact values into one
/// report. Totals are order2 + order3.
pub fn shift_report(
    eff: &EffectiveParams,
    exact: Option<&ExactShifts>,
) -> Result<DispersiveShifts> {
    let c2_12 = chi2_pair(eff, 0, 1)?;
    let c2_23 = chi2_pair(eff, 1, 2)?;
    let c2_13 = chi2_pair(eff, 0, 2)?;
    let e3 = energy_corrections_third(eff)?;
    let bracket = chi3_123(eff)?;
    let ex = |f: fn(&ExactShifts) -> f64| exact.map(f);
    Ok(DispersiveShifts {
        chi12: ShiftEntry::new(c2_12, Some(e3.chi3_12()), ex(|e| e.chi12)),
        chi23: ShiftEntry::new(c2_23, Some(e3.chi3_23()), ex(|e| e.chi23)),
        chi13: ShiftEntry::new(c2_13, Some(e3.chi3_13()), ex(|e| e.chi13)),
        chi123: ShiftEntry::new(
            c2_12 + c2_23 + c2_13,
            Some(e3.chi3_pair_sum() + bracket),
            ex(|e| e.chi123),
        ),
        three_body: ShiftEntry::new(0.0, Some(bracket), ex(ExactShifts::three_body)),
    })
}
