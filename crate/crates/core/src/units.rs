//! Canonical units and conversions.
//!
//! All energy values are carried internally in joules. Watt-hours and
//! kilowatt-hours appear only at configuration load and report rendering,
//! using the single conversion constant 1 kWh = 3,600,000 J.

/// Joules per kilowatt-hour. The only energy conversion constant in the crate.
pub const JOULES_PER_KWH: f64 = 3_600_000.0;

/// Joules per watt-hour.
pub const JOULES_PER_WH: f64 = 3_600.0;

/// Bytes per (decimal) gigabyte, the unit energy intensities are quoted in.
pub const BYTES_PER_GB: f64 = 1e9;

/// Milliseconds in 30 days, the default analytical projection period.
pub const THIRTY_DAYS_MS: u64 = 30 * 24 * 3600 * 1000;

pub fn joules_to_wh(joules: f64) -> f64 {
    joules / JOULES_PER_WH
}

pub fn wh_to_joules(wh: f64) -> f64 {
    wh * JOULES_PER_WH
}

pub fn joules_to_kwh(joules: f64) -> f64 {
    joules / JOULES_PER_KWH
}

pub fn kwh_to_joules(kwh: f64) -> f64 {
    kwh * JOULES_PER_KWH
}

/// Energy intensity in canonical joules per byte.
///
/// Configured values arrive in kWh/GB and are converted once on load.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct JoulesPerByte(pub f64);

impl JoulesPerByte {
    pub fn from_kwh_per_gb(kwh_per_gb: f64) -> Self {
        JoulesPerByte(kwh_per_gb * JOULES_PER_KWH / BYTES_PER_GB)
    }

    pub fn kwh_per_gb(self) -> f64 {
        self.0 * BYTES_PER_GB / JOULES_PER_KWH
    }

    pub fn is_valid(self) -> bool {
        self.0.is_finite() && self.0 >= 0.0
    }
}

/// Round to one decimal place with ties going to the even neighbour,
/// matching the granularity used for rendered watt-hour tables.
pub fn round_half_even_1dp(value: f64) -> f64 {
    (value * 10.0).round_ties_even() / 10.0
}
