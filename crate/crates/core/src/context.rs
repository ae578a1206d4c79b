//! Neighbourhood context: 8 angular sectors × 2 rings around each sensor.
//!
//! Sectors are 45° wide with sector 0 centred on the +x axis and numbered
//! counter-clockwise. The inner ring holds neighbours closer than half the
//! neighbourhood radius, the outer ring the rest up to the radius. Area index
//! is `sector + 8·ring`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phenomenon::WeatherSample;
use crate::scene::Point;
use crate::Pollutant;

pub const SECTORS: usize = 8;
pub const RINGS: usize = 2;
pub const AREAS: usize = SECTORS * RINGS;
/// 16 area means per pollutant, three weather values and the wind one-hot.
pub const CONTEXT_WIDTH: usize = 2 * AREAS + 3 + SECTORS;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub neighborhood_radius: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            neighborhood_radius: 40.0,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_radius > 0.0 && self.neighborhood_radius.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "context.neighborhood_radius must be positive".into(),
            ))
        }
    }
}

/// Sector of a direction in radians.
pub fn sector_of(angle: f64) -> usize {
    let a = angle.rem_euclid(TAU);
    (((a + FRAC_PI_8) / FRAC_PI_4).floor() as usize) % SECTORS
}

pub fn wind_sector(direction_degrees: f64) -> usize {
    sector_of(direction_degrees.to_radians())
}

/// Area of `other` in the neighbourhood of `center`, or `None` when it lies
/// at or beyond `radius`.
pub fn area_of(center: &Point, other: &Point, radius: f64) -> Option<usize> {
    let d = center.distance(other);
    if d >= radius {
        return None;
    }
    let ring = usize::from(d >= radius / 2.0);
    // atan2(0, 0) = 0 puts co-located neighbours in sector 0
    Some(sector_of(center.bearing_to(other)) + SECTORS * ring)
}

pub fn partition_neighborhood(center: &Point, others: &[Point], radius: f64) -> Vec<Option<usize>> {
    others.iter().map(|p| area_of(center, p, radius)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    /// Mean drifted reading per area, per pollutant; 0 for empty areas.
    pub area_means: [[f64; AREAS]; 2],
    pub area_counts: [usize; AREAS],
    pub temperature: f64,
    pub humidity: f64,
    pub wind_speed: f64,
    pub wind_onehot: [f64; SECTORS],
}

impl ContextVector {
    /// Flat layout used in exported tables.
    pub fn to_columns(&self) -> [f64; CONTEXT_WIDTH] {
        let mut out = [0.0; CONTEXT_WIDTH];
        out[..AREAS].copy_from_slice(&self.area_means[0]);
        out[AREAS..2 * AREAS].copy_from_slice(&self.area_means[1]);
        out[2 * AREAS] = self.temperature;
        out[2 * AREAS + 1] = self.humidity;
        out[2 * AREAS + 2] = self.wind_speed;
        out[2 * AREAS + 3..].copy_from_slice(&self.wind_onehot);
        out
    }

    pub fn column_names() -> Vec<String> {
        let mut names = Vec::with_capacity(CONTEXT_WIDTH);
        for p in Pollutant::ALL {
            names.extend((0..AREAS).map(|a| format!("{}_area{a:02}", p.label())));
        }
        names.extend(["temperature", "humidity", "wind_speed"].map(String::from));
        names.extend((0..SECTORS).map(|s| format!("wind_dir_{s}")));
        names
    }
}

/// Index of the first weather column inside [`ContextVector::to_columns`].
pub const WEATHER_COLUMN: usize = 2 * AREAS;

/// Context for sensor `center`. `positions` and `readings` hold every sensor
/// at the same timestep; the centre sensor itself is excluded.
pub fn context_vector(
    center: usize,
    positions: &[Point],
    readings: &[[f64; 2]],
    weather: WeatherSample,
    radius: f64,
) -> ContextVector {
    assert_eq!(positions.len(), readings.len(), "positions and readings must align");
    let here = positions[center];
    let mut members: Vec<(usize, [f64; 2])> = positions
        .iter()
        .zip(readings)
        .enumerate()
        .filter(|(j, _)| *j != center)
        .filter_map(|(_, (p, r))| area_of(&here, p, radius).map(|a| (a, *r)))
        .collect();
    let mut area_counts = [0usize; AREAS];
    for (a, _) in &members {
        area_counts[*a] += 1;
    }
    let mut area_means = [[0.0; AREAS]; 2];
    for (ch, means) in area_means.iter_mut().enumerate() {
        // summing in sorted order makes the result independent of sensor order
        members.sort_by(|x, y| x.0.cmp(&y.0).then(x.1[ch].total_cmp(&y.1[ch])));
        for (a, r) in &members {
            means[*a] += r[ch];
        }
        for (m, &n) in means.iter_mut().zip(&area_counts) {
            if n > 0 {
                *m /= n as f64;
            }
        }
    }
    let mut wind_onehot = [0.0; SECTORS];
    wind_onehot[wind_sector(weather.wind_direction)] = 1.0;
    ContextVector {
        area_means,
        area_counts,
        temperature: weather.temperature,
        humidity: weather.humidity,
        wind_speed: weather.wind_speed,
        wind_onehot,
    }
}
