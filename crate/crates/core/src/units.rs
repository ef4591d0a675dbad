//! Unit conventions and physical constants.
//!
//! Every frequency-like quantity held by the parameter structs is an angular
//! frequency in rad/ns; anything crossing the serialization boundary (config
//! files, reports, tables) is linear and in GHz unless a field name says
//! otherwise. Times are in ns, capacitances in farads, Josephson and charging
//! energies in GHz (E/h).

/// 2π, the conversion factor between linear and angular frequency.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Planck constant in joule-seconds.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// One femtofarad in farads.
pub const FEMTOFARAD: f64 = 1e-15;

/// Converts a linear frequency in GHz to an angular frequency in rad/ns.
pub fn angular_from_ghz(nu: f64) -> f64 {
    TWO_PI * nu
}

/// Converts an angular frequency in rad/ns to a linear frequency in GHz.
pub fn ghz_from_angular(omega: f64) -> f64 {
    omega / TWO_PI
}

/// Converts an angular frequency in rad/ns to a linear frequency in MHz.
pub fn mhz_from_angular(omega: f64) -> f64 {
    1e3 * omega / TWO_PI
}

/// Single-electron charging energy E_C/h in GHz for a capacitance in farads.
///
/// E_C = e²/2C, stated as a frequency. One femtofarad corresponds to about
/// 19.37 GHz, which sets the scale for the ~60–95 fF shunt capacitances of
/// the modeled device.
pub fn charging_energy_ghz(capacitance: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * capacitance * PLANCK) * 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charging_energy_of_one_femtofarad() {
        let ec = charging_energy_ghz(FEMTOFARAD);
        assert!((ec - 19.370_229_324_659).abs() < 1e-9, "ec = {ec}");
    }

    #[test]
    fn round_trip_ghz_angular() {
        let nu = 4.984;
        assert!((ghz_from_angular(angular_from_ghz(nu)) - nu).abs() < 1e-15);
        assert!((mhz_from_angular(angular_from_ghz(0.0154)) - 15.4).abs() < 1e-12);
    }
}
