use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, GenerationConfig, GenerationStats};
use crate::drift::SensorDrift;
use crate::error::{Error, Result};
use crate::scene::{Scene, SensorKind};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT: &str = "wsn-calib-dataset/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub id: usize,
    pub kind: SensorKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationEntry {
    pub index: usize,
    pub readings_file: String,
    pub context_file: String,
    /// Ground truth: one entry per sensor, never exported to model inputs.
    pub drift: Vec<SensorDrift>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: GenerationConfig,
    pub warmup: usize,
    pub timesteps: usize,
    pub sensors: Vec<SensorEntry>,
    pub scene: Scene,
    pub realizations: Vec<RealizationEntry>,
    pub statistics: GenerationStats,
    /// Modelling conventions a consumer of the files needs to know about.
    pub conventions: BTreeMap<String, String>,
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("timestamps", "exported timestamp 0 is simulated step `warmup`; one step is one hour, a month is 720 steps"),
        ("sensor_ids", "static sensors first, then mobile sensors; mobile sensors hop one waypoint per step, cyclically"),
        ("wind_coefficient", "speed / (offset + 1) times the sum of the offset + 1 lagged alignment terms"),
        ("wind_direction", "degrees in [0, 360), direction the wind blows towards"),
        ("attenuation_floor", "inner attenuation denominator floored at 1e-6 * system radius; hits counted in statistics"),
        ("drift_target", "drifted - true, per pollutant"),
        ("history", "drift-free reading at the previous step, min-max scaled over the full run"),
        ("context", "16 areas = 8 sectors of 45 degrees (sector 0 centred on +x, counter-clockwise) x 2 rings; area = sector + 8 * ring; the centre sensor is excluded; empty areas are 0"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl Manifest {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Manifest {
            format: FORMAT.into(),
            config: ds.config.clone(),
            warmup: ds.warmup,
            timesteps: ds.timesteps(),
            sensors: (0..ds.scene.n_sensors())
                .map(|id| SensorEntry {
                    id,
                    kind: ds.scene.sensor_kind(id),
                })
                .collect(),
            scene: ds.scene.clone(),
            realizations: ds
                .realizations
                .iter()
                .map(|r| RealizationEntry {
                    index: r.index,
                    readings_file: super::readings_file(r.index),
                    context_file: super::context_file(r.index),
                    drift: r.params.clone(),
                })
                .collect(),
            statistics: ds.stats.clone(),
            conventions: conventions(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format != FORMAT {
            return Err(Error::format(
                &path,
                format!("unsupported format {:?}, expected {FORMAT:?}", manifest.format),
            ));
        }
        Ok(manifest)
    }

    pub fn n_realizations(&self) -> usize {
        self.realizations.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }
}
