//! Power unit conversions.

/// `log2(e)`, the factor converting nats to bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Converts a power level in dBm to watts: `P_W = 10^((dBm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts watts to dBm. Zero watts maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Converts a power ratio in dB to a linear factor.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
