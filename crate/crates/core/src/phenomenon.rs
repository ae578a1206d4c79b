//! Source emission walks and the global weather series.
//!
//! Emissions follow a reflected random walk with weak mean reversion. Each
//! 30-day window of the walk is raised to a power (producing pollution spikes)
//! and rescaled so its maximum equals a freshly drawn target; weekly, monthly
//! and yearly sine waves are added on top and the result is clamped at zero.
//! Wind speed reuses the same walk with a milder exponent.

use std::f64::consts::TAU;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::{MONTH, WEEK, YEAR};

pub const EMISSION_EXPONENT: f64 = 7.0;
pub const WIND_EXPONENT: f64 = 2.0;
/// Length of one rescaling window.
pub const SCALING_WINDOW: usize = MONTH;
/// Starting value of every walk.
pub const INITIAL_WALK: f64 = 1.0;
/// Walk increments are clipped to this interval.
pub const DELTA_BOUNDS: (f64, f64) = (-1.0, 10.0);
/// Pull towards the centre applied to every walk step.
pub const REVERSION: f64 = 0.01;
/// Periods of the additive sine waves: weekly, monthly, yearly.
pub const SEASONAL_PERIODS: [usize; 3] = [WEEK, MONTH, YEAR];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

impl NormalSpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.sd * z
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.mean.is_finite() && self.sd.is_finite() && self.sd >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "{name}: need finite mean and sd >= 0, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhenomenonConfig {
    /// Per-window maximum of the exploded emission walk.
    pub emission_scale: NormalSpec,
    /// Amplitudes of the weekly, monthly and yearly sine components.
    pub seasonal_amplitudes: [f64; 3],
    /// Per-window maximum of the wind-speed walk.
    pub wind_scale: NormalSpec,
    pub wind_scale_floor: f64,
    pub temperature_center: f64,
    pub humidity_center: f64,
    /// Wind direction moves by U[-step, step] degrees per timestep.
    pub direction_step: f64,
}

impl Default for PhenomenonConfig {
    fn default() -> Self {
        Self {
            emission_scale: NormalSpec { mean: 50.0, sd: 9.0 },
            seasonal_amplitudes: [2.5; 3],
            wind_scale: NormalSpec { mean: 8.0, sd: 2.0 },
            wind_scale_floor: 0.5,
            temperature_center: 10.0,
            humidity_center: 80.0,
            direction_step: 60.0,
        }
    }
}

impl PhenomenonConfig {
    pub fn validate(&self) -> Result<()> {
        self.emission_scale.validate("phenomenon.emission_scale")?;
        self.wind_scale.validate("phenomenon.wind_scale")?;
        if !(self.wind_scale_floor >= 0.0) {
            return Err(Error::InvalidConfig("phenomenon.wind_scale_floor must be >= 0".into()));
        }
        if self.seasonal_amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidConfig(
                "phenomenon.seasonal_amplitudes must be finite and >= 0".into(),
            ));
        }
        if !(self.direction_step >= 0.0 && self.direction_step <= 180.0) {
            return Err(Error::InvalidConfig(
                "phenomenon.direction_step must lie in [0, 180]".into(),
            ));
        }
        Ok(())
    }
}

pub fn walk_step(x: f64, delta: f64) -> f64 {
    (x + delta).abs()
}

/// Draws a walk increment: Normal(-0.01·x, 1), clipped to [-1, 10].
pub fn draw_delta<R: Rng + ?Sized>(x: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (-REVERSION * x + z).clamp(DELTA_BOUNDS.0, DELTA_BOUNDS.1)
}

/// Splits `0..len` into rescaling windows. The first window absorbs the
/// `lead` warmup steps, so window boundaries line up with the exported
/// timeline; a trailing partial window is kept.
pub fn scaling_windows(len: usize, window: usize, lead: usize) -> Vec<Range<usize>> {
    assert!(window > 0);
    let mut out = Vec::new();
    let mut start = 0;
    let mut end = (lead + window).min(len);
    while start < len {
        out.push(start..end);
        start = end;
        end = (end + window).min(len);
    }
    out
}

/// Raises a window to `exponent` and rescales it so its maximum is `target`.
/// An all-zero window stays zero.
pub fn explode_and_scale(values: &[f64], exponent: f64, target: f64) -> Vec<f64> {
    let exploded: Vec<f64> = values.iter().map(|v| v.powf(exponent)).collect();
    let max = exploded.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        let factor = target / max;
        exploded.into_iter().map(|v| factor * v).collect()
    } else {
        exploded
    }
}

/// Every intermediate of one exploded walk, kept for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikyWalk {
    /// Realized (clipped) increments; `deltas[t]` moves `walk[t]` to `walk[t+1]`.
    pub deltas: Vec<f64>,
    pub walk: Vec<f64>,
    pub windows: Vec<Range<usize>>,
    /// Drawn maximum for each window.
    pub window_targets: Vec<f64>,
    /// Walk after the power and the per-window rescaling.
    pub scaled: Vec<f64>,
}

pub fn sample_spiky_walk<R: Rng + ?Sized>(
    len: usize,
    lead: usize,
    exponent: f64,
    target: NormalSpec,
    target_floor: Option<f64>,
    rng: &mut R,
) -> SpikyWalk {
    assert!(len >= 1, "walk length must be >= 1");
    let mut walk = Vec::with_capacity(len);
    let mut deltas = Vec::with_capacity(len.saturating_sub(1));
    let mut x = INITIAL_WALK;
    walk.push(x);
    for _ in 1..len {
        let d = draw_delta(x, rng);
        x = walk_step(x, d);
        deltas.push(d);
        walk.push(x);
    }
    let windows = scaling_windows(len, SCALING_WINDOW, lead);
    let mut window_targets = Vec::with_capacity(windows.len());
    let mut scaled = Vec::with_capacity(len);
    for w in &windows {
        let mut m = target.sample(rng);
        if let Some(floor) = target_floor {
            m = m.max(floor);
        }
        window_targets.push(m);
        scaled.extend(explode_and_scale(&walk[w.clone()], exponent, m));
    }
    SpikyWalk {
        deltas,
        walk,
        windows,
        window_targets,
        scaled,
    }
}

/// Sum of the weekly, monthly and yearly sine components at step `t`.
pub fn seasonal(t: usize, amplitudes: &[f64; 3], phases: &[f64; 3]) -> f64 {
    SEASONAL_PERIODS
        .iter()
        .zip(amplitudes)
        .zip(phases)
        .map(|((&period, &amp), &phase)| amp * (TAU * t as f64 / period as f64 + phase).sin())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTrace {
    pub walk: SpikyWalk,
    pub phases: [f64; 3],
    /// Final nonnegative emission values.
    pub values: Vec<f64>,
    /// Number of steps where the sine waves pushed the value below zero.
    pub clamped: usize,
}

pub fn sample_emission_series<R: Rng + ?Sized>(
    len: usize,
    lead: usize,
    config: &PhenomenonConfig,
    rng: &mut R,
) -> EmissionTrace {
    let phases = [
        TAU * rng.random::<f64>(),
        TAU * rng.random::<f64>(),
        TAU * rng.random::<f64>(),
    ];
    let walk = sample_spiky_walk(len, lead, EMISSION_EXPONENT, config.emission_scale, None, rng);
    let mut clamped = 0;
    let values = walk
        .scaled
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            let e = v + seasonal(t, &config.seasonal_amplitudes, &phases);
            if e < 0.0 {
                clamped += 1;
                0.0
            } else {
                e
            }
        })
        .collect();
    EmissionTrace {
        walk,
        phases,
        values,
        clamped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub temperature: Vec<f64>,
    pub humidity: Vec<f64>,
    pub wind_speed: Vec<f64>,
    /// Direction the wind blows towards, degrees in [0, 360).
    pub wind_direction: Vec<f64>,
}

/// Weather at a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherSample {
    pub temperature: f64,
    pub humidity: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
}

impl WeatherSeries {
    pub fn len(&self) -> usize {
        self.temperature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperature.is_empty()
    }

    pub fn at(&self, t: usize) -> WeatherSample {
        WeatherSample {
            temperature: self.temperature[t],
            humidity: self.humidity[t],
            wind_speed: self.wind_speed[t],
            wind_direction: self.wind_direction[t],
        }
    }

    /// Copy of the steps in `range`.
    pub fn slice(&self, range: Range<usize>) -> WeatherSeries {
        WeatherSeries {
            temperature: self.temperature[range.clone()].to_vec(),
            humidity: self.humidity[range.clone()].to_vec(),
            wind_speed: self.wind_speed[range.clone()].to_vec(),
            wind_direction: self.wind_direction[range].to_vec(),
        }
    }
}

pub fn mean_reverting_step(value: f64, center: f64, noise: f64) -> f64 {
    value - REVERSION * (value - center) + noise
}

pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

fn mean_reverting_walk<R: Rng + ?Sized>(len: usize, center: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut v = center;
    out.push(v);
    for _ in 1..len {
        let z: f64 = rng.sample(StandardNormal);
        v = mean_reverting_step(v, center, z);
        out.push(v);
    }
    out
}

pub fn sample_wind_speed<R: Rng + ?Sized>(
    len: usize,
    lead: usize,
    config: &PhenomenonConfig,
    rng: &mut R,
) -> SpikyWalk {
    sample_spiky_walk(
        len,
        lead,
        WIND_EXPONENT,
        config.wind_scale,
        Some(config.wind_scale_floor),
        rng,
    )
}

pub fn sample_wind_direction<R: Rng + ?Sized>(len: usize, step: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut d = wrap_degrees(360.0 * rng.random::<f64>());
    out.push(d);
    for _ in 1..len {
        let s = if step > 0.0 {
            rng.random_range(-step..=step)
        } else {
            0.0
        };
        d = wrap_degrees(d + s);
        out.push(d);
    }
    out
}

/// Samples the global weather series; each variable draws from its own stream.
pub fn sample_weather(len: usize, lead: usize, config: &PhenomenonConfig, streams: &Streams) -> WeatherSeries {
    WeatherSeries {
        temperature: mean_reverting_walk(
            len,
            config.temperature_center,
            &mut streams.stream("phenomenon/weather/temperature"),
        ),
        humidity: mean_reverting_walk(
            len,
            config.humidity_center,
            &mut streams.stream("phenomenon/weather/humidity"),
        ),
        wind_speed: sample_wind_speed(len, lead, config, &mut streams.stream("phenomenon/weather/wind-speed")).scaled,
        wind_direction: sample_wind_direction(
            len,
            config.direction_step,
            &mut streams.stream("phenomenon/weather/wind-direction"),
        ),
    }
}
