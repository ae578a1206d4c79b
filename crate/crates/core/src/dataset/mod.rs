//! End-to-end generation, file export and experiment splits.
//!
//! [`generate`] runs scene → emissions/weather → dispersion → drift for each
//! realization and returns an in-memory [`Dataset`]. [`Dataset::write`] lays
//! out the output directory:
//!
//! ```text
//! manifest.json          config, seeds, scene, drift parameters, statistics
//! weather.csv            timestamp,temperature,humidity,wind_speed,wind_direction
//! readings_r{k}.csv      per (timestamp, sensor): position, true, drifted, drift target
//! context_r{k}.csv       per (timestamp, sensor): 43 context columns
//! ```
//!
//! Timestamps in every table count from the first usable step; the warmup
//! prefix (during which lagged emissions would index before the series start)
//! is simulated but never exported.

mod io;
mod manifest;
mod normalize;
mod split;

pub use io::{
    context_file, fmt_f64, read_weather, readings_file, ReadingRow, ReadingsReader, CONTEXT_HEADER_PREFIX,
    READINGS_HEADER, WEATHER_FILE,
};
pub(crate) use io::{create, push_row, write_text, Table};
pub use manifest::{Manifest, RealizationEntry, SensorEntry, MANIFEST_FILE};
pub(crate) use normalize::TEST_TRUTH_HEADER;
pub use normalize::{
    fit_scaler, identity_mse, materialize_split, scan_readings, split_dir, split_for, IdentityMse, PartitionRows,
    Scaler, ScalerBuilder, SplitSummary, SCALER_FILE, SPLIT_FILE, TEST_INPUTS_FILE, TEST_TRUTH_FILE, TRAIN_FILE,
    VALIDATION_FILE, WEATHER_FEATURES,
};
pub use split::{make_split, Experiment, ExperimentSplit, Partition, Segment};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{context_vector, ContextConfig, ContextVector};
use crate::dispersion::{self, EmissionSet, WindField, DEFAULT_WARMUP};
use crate::drift::{self, DriftConfig, DriftSettings, SensorDrift};
use crate::error::{Error, Result};
use crate::phenomenon::{self, EmissionTrace, PhenomenonConfig, WeatherSeries};
use crate::rng::Streams;
use crate::scene::{Scene, SceneConfig};
use crate::{Pollutant, MONTH, YEAR};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub master_seed: u64,
    /// Exported timesteps (hourly). Warmup steps come on top.
    pub timesteps: usize,
    /// Independent drift draws over the same true series.
    pub n_drift_realizations: usize,
    pub scene: SceneConfig,
    pub phenomenon: PhenomenonConfig,
    pub drift: DriftConfig,
    pub context: ContextConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            master_seed: 2021,
            timesteps: YEAR,
            n_drift_realizations: 1,
            scene: SceneConfig::default(),
            phenomenon: PhenomenonConfig::default(),
            drift: DriftConfig::default(),
            context: ContextConfig::default(),
        }
    }
}

impl GenerationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Toml(inner) => Error::format(path, inner.to_string()),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps < MONTH {
            return Err(Error::InvalidConfig(format!(
                "timesteps must cover at least one {MONTH}-step scaling window, got {}",
                self.timesteps
            )));
        }
        if self.n_drift_realizations == 0 {
            return Err(Error::InvalidConfig("n_drift_realizations must be >= 1".into()));
        }
        self.scene.validate()?;
        self.phenomenon.validate()?;
        self.drift.validate()?;
        self.context.validate()
    }

    /// Steps simulated before the first exported one: the largest lag the
    /// configured geometry can produce, and never less than the default.
    pub fn warmup(&self) -> usize {
        let max_distance = self.scene.source_radius + self.scene.max_sensor_extent();
        DEFAULT_WARMUP.max(dispersion::max_offset(max_distance, self.scene.source_radius))
    }

    pub fn n_sensors(&self) -> usize {
        self.scene.n_static + self.scene.n_mobile
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    fn of<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Self { min, max }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Source/sensor/step triples whose attenuation denominator was floored.
    pub attenuation_floor_hits: usize,
    /// Emission steps pushed below zero by the sine waves and clamped.
    pub emission_zero_clamps: usize,
    /// Per pollutant, over exported steps.
    pub true_range: [ValueRange; 2],
    pub drifted_range: [ValueRange; 2],
    pub wind_speed_range: ValueRange,
    /// Share of samples with |drifted - true| < 0.5 · (sensor's max true reading).
    pub drift_within_half_share: f64,
    /// Mean squared raw drift target per pollutant, over all realizations.
    pub raw_drift_mse: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Realization {
    /// 1-based.
    pub index: usize,
    pub params: Vec<SensorDrift>,
    /// `[sensor][timestamp]`, exported steps only.
    pub drifted: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: GenerationConfig,
    pub warmup: usize,
    pub scene: Scene,
    /// Full simulated weather, warmup included.
    pub weather: WeatherSeries,
    /// `[source][pollutant]`, warmup included.
    pub emissions: Vec<[EmissionTrace; 2]>,
    /// Drift-free readings, `[sensor][timestamp]`, exported steps only.
    pub truth: Vec<Vec<[f64; 2]>>,
    pub realizations: Vec<Realization>,
    pub stats: GenerationStats,
}

pub fn emission_stream(source: usize, pollutant: Pollutant) -> String {
    format!("phenomenon/emission/source-{source}/{}", pollutant.label())
}

pub fn drift_params_stream(realization: usize, sensor: usize) -> String {
    format!("drift/realization-{realization}/sensor-{sensor}/params")
}

pub fn drift_noise_stream(realization: usize, sensor: usize, pollutant: Pollutant) -> String {
    format!(
        "drift/realization-{realization}/sensor-{sensor}/noise/{}",
        pollutant.label()
    )
}

/// Runs the whole generator in memory.
pub fn generate(config: &GenerationConfig) -> Result<Dataset> {
    config.validate()?;
    let streams = Streams::new(config.master_seed);
    let warmup = config.warmup();
    let len = config.timesteps + warmup;

    let scene = Scene::generate(&config.scene, &streams)?;

    let emissions: Vec<[EmissionTrace; 2]> = (0..scene.sources.len())
        .into_par_iter()
        .map(|c| {
            Pollutant::ALL.map(|p| {
                phenomenon::sample_emission_series(
                    len,
                    warmup,
                    &config.phenomenon,
                    &mut streams.stream(&emission_stream(c, p)),
                )
            })
        })
        .collect();
    let emission_sets: Vec<EmissionSet> = emissions
        .iter()
        .map(|[a, b]| [a.values.clone(), b.values.clone()])
        .collect();

    let weather = phenomenon::sample_weather(len, warmup, &config.phenomenon, &streams);
    let wind = WindField::from_weather(&weather);

    let dispersed: Vec<(Vec<[f64; 2]>, usize)> = (0..scene.n_sensors())
        .into_par_iter()
        .map(|id| dispersion::true_series(&scene, &emission_sets, &wind, id, warmup))
        .collect::<Result<_>>()?;
    let attenuation_floor_hits = dispersed.iter().map(|(_, c)| c).sum();
    let truth: Vec<Vec<[f64; 2]>> = dispersed.into_iter().map(|(s, _)| s).collect();

    let exported = weather.slice(warmup..len);
    let settings = DriftSettings::from(&config.drift);
    let realizations = (1..=config.n_drift_realizations)
        .map(|r| drift_realization(r, &truth, &exported, config, settings, &streams))
        .collect::<Result<Vec<_>>>()?;

    let stats = statistics(&emissions, &truth, &realizations, &exported, attenuation_floor_hits);
    Ok(Dataset {
        config: config.clone(),
        warmup,
        scene,
        weather,
        emissions,
        truth,
        realizations,
        stats,
    })
}

fn drift_realization(
    index: usize,
    truth: &[Vec<[f64; 2]>],
    weather: &WeatherSeries,
    config: &GenerationConfig,
    settings: DriftSettings,
    streams: &Streams,
) -> Result<Realization> {
    let per_sensor: Vec<(SensorDrift, Vec<[f64; 2]>)> = truth
        .par_iter()
        .enumerate()
        .map(|(i, series)| {
            let params = drift::sample_drift_params(
                &config.drift,
                config.timesteps,
                &mut streams.stream(&drift_params_stream(index, i)),
            );
            let mut drifted = vec![[0.0; 2]; series.len()];
            for p in Pollutant::ALL {
                let y: Vec<f64> = series.iter().map(|v| v[p.index()]).collect();
                let history = drift::history_series(&y);
                let out = drift::apply_drift(
                    &y,
                    &params.channels[p.index()],
                    params.ramp_rate,
                    &weather.temperature,
                    &weather.humidity,
                    &history,
                    settings,
                    &mut streams.stream(&drift_noise_stream(index, i, p)),
                )?;
                for (slot, r) in drifted.iter_mut().zip(out) {
                    slot[p.index()] = r.drifted;
                }
            }
            Ok((params, drifted))
        })
        .collect::<Result<_>>()?;
    let (params, drifted) = per_sensor.into_iter().unzip();
    Ok(Realization { index, params, drifted })
}

fn statistics(
    emissions: &[[EmissionTrace; 2]],
    truth: &[Vec<[f64; 2]>],
    realizations: &[Realization],
    weather: &WeatherSeries,
    attenuation_floor_hits: usize,
) -> GenerationStats {
    let channel_range = |series: &[Vec<[f64; 2]>], ch: usize| {
        series
            .iter()
            .map(|s| ValueRange::of(s.iter().map(|v| &v[ch])))
            .fold(ValueRange::of([]), ValueRange::merge)
    };
    let true_range = [channel_range(truth, 0), channel_range(truth, 1)];
    let drifted_range = [0, 1].map(|ch| {
        realizations
            .iter()
            .map(|r| channel_range(&r.drifted, ch))
            .fold(ValueRange::of([]), ValueRange::merge)
    });

    let mut within = 0usize;
    let mut samples = 0usize;
    let mut sq = [0.0; 2];
    for r in realizations {
        for (y, x) in truth.iter().zip(&r.drifted) {
            for ch in 0..2 {
                let peak = y.iter().map(|v| v[ch]).fold(0.0, f64::max);
                for (yt, xt) in y.iter().zip(x) {
                    let gap = xt[ch] - yt[ch];
                    sq[ch] += gap * gap;
                    samples += 1;
                    within += usize::from(gap.abs() < 0.5 * peak);
                }
            }
        }
    }
    let per_channel = (samples / 2).max(1) as f64;
    GenerationStats {
        attenuation_floor_hits,
        emission_zero_clamps: emissions.iter().flatten().map(|e| e.clamped).sum(),
        true_range,
        drifted_range,
        wind_speed_range: ValueRange::of(&weather.wind_speed),
        drift_within_half_share: within as f64 / samples.max(1) as f64,
        raw_drift_mse: sq.map(|s| s / per_channel),
    }
}

impl Dataset {
    pub fn timesteps(&self) -> usize {
        self.config.timesteps
    }

    /// Weather over exported steps only.
    pub fn exported_weather(&self) -> WeatherSeries {
        self.weather.slice(self.warmup..self.warmup + self.timesteps())
    }

    pub fn realization(&self, index: usize) -> Option<&Realization> {
        self.realizations.iter().find(|r| r.index == index)
    }

    /// Context vectors of every sensor at exported step `t` of a realization.
    pub fn contexts_at(&self, realization: &Realization, t: usize) -> Vec<ContextVector> {
        let internal = self.warmup + t;
        let positions = self.scene.positions_at(internal);
        let readings: Vec<[f64; 2]> = realization.drifted.iter().map(|s| s[t]).collect();
        let weather = self.weather.at(internal);
        (0..positions.len())
            .map(|i| {
                context_vector(
                    i,
                    &positions,
                    &readings,
                    weather,
                    self.config.context.neighborhood_radius,
                )
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_dataset(self, dir)
    }
}
