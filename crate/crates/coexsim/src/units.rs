//! Decibel / linear power conversions used throughout the simulator.

/// dB ratio to linear ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio to dB.
#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Power in dBm to watts.
#[inline]
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Power in watts to dBm.
#[inline]
pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// Thermal noise power in watts for the given spectral density (dBm/Hz),
/// bandwidth (Hz) and receiver noise figure (dB).
pub fn thermal_noise_watt(density_dbm_hz: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watt(density_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_conversions() {
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
        assert!((watt_to_dbm(1.0) - 30.0).abs() < 1e-12);
        assert!((db_to_linear(3.0103) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn ue_noise_floor_matches_hand_arithmetic() {
        // -174 dBm/Hz + 10*log10(20 MHz) + 9 dB = -91.9897 dBm
        let w = thermal_noise_watt(-174.0, 20e6, 9.0);
        assert!((watt_to_dbm(w) - (-91.9897)).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn db_roundtrip(db in -200.0f64..200.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn dbm_roundtrip(dbm in -200.0f64..100.0) {
            let back = watt_to_dbm(dbm_to_watt(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }
    }
}
