//! Drift-free sensor readings from source emissions, distance and wind.
//!
//! A sensor at distance `d` from a source sees that source's emission from
//! `o = ⌊d / (0.4·R)⌋` steps ago, attenuated by a coefficient that falls off
//! with distance and widens when the wind blows from the source towards the
//! sensor. A sensor's reading is the sum over all sources.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::phenomenon::WeatherSeries;
use crate::scene::{Point, Scene, SensorRef};

/// Warmup length with the default geometry: the largest possible lag.
pub const DEFAULT_WARMUP: usize = 5;
/// Attenuation exponent.
pub const FALLOFF: f64 = -1.5;
/// The inner denominator is floored at this fraction of the system radius.
pub const DENOMINATOR_FLOOR_FRACTION: f64 = 1e-6;

/// One emission series per pollutant channel for a single source.
pub type EmissionSet = [Vec<f64>; 2];

/// Propagation lag in timesteps: `⌊d / (2R/5)⌋`.
pub fn offset(distance: f64, radius: f64) -> usize {
    // 5d / 2R rather than d / (0.4R): 0.4 is inexact in binary and would
    // push exact multiples such as d = 40, R = 100 below the boundary.
    (5.0 * distance / (2.0 * radius)).floor() as usize
}

/// Largest lag any pair of points at most `max_distance` apart can produce.
pub fn max_offset(max_distance: f64, radius: f64) -> usize {
    offset(max_distance, radius)
}

/// Alignment term for one lag: +1 when the wind blows along the
/// source→sensor bearing, 0 when orthogonal. The difference is folded with a
/// nonnegative modulo π, so a direct headwind also scores +1.
pub fn angle_term(source_angle: f64, wind_angle: f64) -> f64 {
    let folded = (source_angle - wind_angle).rem_euclid(PI);
    2.0 * (1.0 - folded / PI) - 1.0
}

/// Wind coefficient averaged over the `o + 1` lagged steps.
/// `angles(lag)` returns (source→sensor bearing, wind bearing) at `t - lag`.
pub fn wind_coefficient_with(speed: f64, o: usize, mut angles: impl FnMut(usize) -> (f64, f64)) -> f64 {
    if speed == 0.0 {
        return 0.0;
    }
    let sum: f64 = (0..=o)
        .map(|lag| {
            let (source, wind) = angles(lag);
            angle_term(source, wind)
        })
        .sum();
    speed / (o as f64 + 1.0) * sum
}

/// Slice form of [`wind_coefficient_with`]; all series are indexed by timestep
/// and angles are in radians.
pub fn wind_coefficient(speed: &[f64], source_angle: &[f64], wind_angle: &[f64], t: usize, o: usize) -> Result<f64> {
    if o > t {
        return Err(Error::Warmup { t, warmup: o });
    }
    if t >= speed.len() || t >= source_angle.len() || t >= wind_angle.len() {
        return Err(Error::InvalidArgument(format!("timestep {t} beyond series end")));
    }
    Ok(wind_coefficient_with(speed[t], o, |lag| {
        (source_angle[t - lag], wind_angle[t - lag])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attenuation {
    pub value: f64,
    /// The inner denominator was at or below the floor and got clamped.
    pub clamped: bool,
}

/// Inner denominator of the attenuation: `R/2 + R/2·(w + 1 + 2w²)` for a
/// tailwind, `R/2 + R/2·(w + 1)` otherwise.
pub fn attenuation_denominator(wind: f64, radius: f64) -> f64 {
    let half = radius / 2.0;
    if wind > 0.0 {
        half + half * (wind + 1.0 + 2.0 * wind * wind)
    } else {
        half + half * (wind + 1.0)
    }
}

pub fn measurement_coefficient(distance: f64, wind: f64, radius: f64) -> Attenuation {
    let floor = DENOMINATOR_FLOOR_FRACTION * radius;
    let raw = attenuation_denominator(wind, radius);
    let (denominator, clamped) = if raw <= floor { (floor, true) } else { (raw, false) };
    Attenuation {
        value: (10.0 * distance / denominator + 1.0).powf(FALLOFF),
        clamped,
    }
}

/// Wind speed and direction in the form the dispersion step consumes.
#[derive(Debug, Clone)]
pub struct WindField {
    pub speed: Vec<f64>,
    /// Direction the wind blows towards, radians.
    pub angle: Vec<f64>,
}

impl WindField {
    pub fn from_weather(weather: &WeatherSeries) -> Self {
        Self {
            speed: weather.wind_speed.clone(),
            angle: weather.wind_direction.iter().map(|d| d.to_radians()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub values: [f64; 2],
    /// Sources whose attenuation hit the denominator floor.
    pub clamped: usize,
}

/// Reading at step `t` for a sensor whose position over time is `position`.
pub fn reading_at(
    position: impl Fn(usize) -> Point,
    sources: &[Point],
    emissions: &[EmissionSet],
    wind: &WindField,
    radius: f64,
    t: usize,
    warmup: usize,
) -> Result<Reading> {
    if t < warmup {
        return Err(Error::Warmup { t, warmup });
    }
    if sources.len() != emissions.len() {
        return Err(Error::LengthMismatch {
            left: sources.len(),
            right: emissions.len(),
        });
    }
    let here = position(t);
    let mut values = [0.0; 2];
    let mut clamped = 0;
    for (source, series) in sources.iter().zip(emissions) {
        let d = here.distance(source);
        let o = offset(d, radius);
        if o > t {
            return Err(Error::Warmup { t, warmup: o });
        }
        let w = wind_coefficient_with(wind.speed[t], o, |lag| {
            (source.bearing_to(&position(t - lag)), wind.angle[t - lag])
        });
        let a = measurement_coefficient(d, w, radius);
        clamped += usize::from(a.clamped);
        for (v, e) in values.iter_mut().zip(series) {
            *v += a.value * e[t - o];
        }
    }
    Ok(Reading { values, clamped })
}

pub fn true_reading(
    scene: &Scene,
    emissions: &[EmissionSet],
    wind: &WindField,
    sensor: SensorRef,
    t: usize,
    warmup: usize,
) -> Result<Reading> {
    // validates the sensor index once; position_at cannot fail afterwards
    scene.position_at(sensor, 0)?;
    reading_at(
        |s| scene.position_at(sensor, s).expect("validated sensor"),
        &scene.sources,
        emissions,
        wind,
        scene.system_radius,
        t,
        warmup,
    )
}

/// Readings for steps `warmup..wind.len()` of one sensor (global id), plus the
/// number of floored attenuation denominators.
pub fn true_series(
    scene: &Scene,
    emissions: &[EmissionSet],
    wind: &WindField,
    sensor_id: usize,
    warmup: usize,
) -> Result<(Vec<[f64; 2]>, usize)> {
    scene.sensor_ref(sensor_id)?;
    let mut out = Vec::with_capacity(wind.len().saturating_sub(warmup));
    let mut clamped = 0;
    for t in warmup..wind.len() {
        let r = reading_at(
            |s| scene.sensor_position(sensor_id, s),
            &scene.sources,
            emissions,
            wind,
            scene.system_radius,
            t,
            warmup,
        )?;
        clamped += r.clamped;
        out.push(r.values);
    }
    Ok((out, clamped))
}
