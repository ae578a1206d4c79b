//! Synthetic PM2.5/PM10 sensor-network simulator and calibration evaluation.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`scene`] places pollution sources, static sensors and mobile-sensor paths.
//! 2. [`phenomenon`] samples spiky emission walks per source and a global weather series.
//! 3. [`dispersion`] turns emissions into drift-free sensor readings using distance,
//!    propagation lag and wind alignment.
//! 4. [`drift`] injects weather-coupled, time-growing drift into those readings.
//! 5. [`context`] aggregates neighbouring sensors into 16 spatial areas.
//! 6. [`dataset`] orchestrates the above, writes CSV tables and a JSON manifest,
//!    and materializes normalized train/validation/test splits.
//! 7. [`evaluation`] scores prediction files and provides a least-squares
//!    reference calibrator.
//!
//! All randomness is drawn from named sub-streams of a single master seed
//! (see [`rng::Streams`]), so identical configurations give byte-identical output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod context;
pub mod dataset;
pub mod dispersion;
pub mod drift;
pub mod error;
pub mod evaluation;
pub mod phenomenon;
pub mod plot;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Timesteps per simulated day (hourly resolution).
pub const DAY: usize = 24;
/// Timesteps per week.
pub const WEEK: usize = 7 * DAY;
/// Timesteps per month. Months are always 30 days.
pub const MONTH: usize = 30 * DAY;
/// Timesteps per year (12 months of 30 days).
pub const YEAR: usize = 12 * MONTH;

/// The two particulate-matter channels carried by every sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pollutant {
    #[serde(rename = "pm25")]
    Pm25,
    #[serde(rename = "pm10")]
    Pm10,
}

impl Pollutant {
    pub const ALL: [Pollutant; 2] = [Pollutant::Pm25, Pollutant::Pm10];

    pub fn index(self) -> usize {
        match self {
            Pollutant::Pm25 => 0,
            Pollutant::Pm10 => 1,
        }
    }

    /// Column prefix used in every exported table.
    pub fn label(self) -> &'static str {
        match self {
            Pollutant::Pm25 => "pm25",
            Pollutant::Pm10 => "pm10",
        }
    }
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
