//! Split materialization with training-only normalization.
//!
//! `<data>/splits/<experiment>/` holds:
//!
//! ```text
//! train.csv, validation.csv   model inputs plus normalized true readings and drift targets
//! test_inputs.csv             model inputs only
//! test_truth.csv              evaluation-only truth for the test partition
//! scaler.json                 training statistics and their hash
//! split.json                  segment layout and row counts
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::{self, ContextReader, ReadingRow, ReadingsReader};
use super::{make_split, Experiment, ExperimentSplit, Manifest, Partition, Segment};
use crate::context::{CONTEXT_WIDTH, WEATHER_COLUMN};
use crate::error::{Error, Result};
use crate::evaluation::SquaredErrors;
use crate::phenomenon::WeatherSample;
use crate::Pollutant;

pub const TRAIN_FILE: &str = "train.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const TEST_INPUTS_FILE: &str = "test_inputs.csv";
pub const TEST_TRUTH_FILE: &str = "test_truth.csv";
pub const SCALER_FILE: &str = "scaler.json";
pub const SPLIT_FILE: &str = "split.json";

pub const WEATHER_FEATURES: [&str; 3] = ["temperature", "humidity", "wind_speed"];
pub(crate) const TEST_TRUTH_HEADER: [&str; 9] = [
    "realization",
    "timestamp",
    "sensor_id",
    "pm25_drifted",
    "pm10_drifted",
    "pm25_true",
    "pm10_true",
    "pm25_drift_target",
    "pm10_drift_target",
];

pub fn split_dir(data_dir: &Path, experiment: Experiment) -> PathBuf {
    data_dir.join("splits").join(experiment.name())
}

/// Training statistics applied to every partition of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub experiment: Experiment,
    /// Maximum drifted training reading per pollutant.
    pub pm_max: [f64; 2],
    /// Order of [`WEATHER_FEATURES`].
    pub weather_min: [f64; 3],
    pub weather_max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct ScalerFile {
    #[serde(flatten)]
    scaler: Scaler,
    hash: String,
}

impl Scaler {
    pub fn pm(&self, pollutant: Pollutant, value: f64) -> f64 {
        value / self.pm_max[pollutant.index()]
    }

    pub fn pm_pair(&self, values: [f64; 2]) -> [f64; 2] {
        [values[0] / self.pm_max[0], values[1] / self.pm_max[1]]
    }

    /// Min-max scaling; a constant training channel maps to 0.5.
    pub fn weather(&self, feature: usize, value: f64) -> f64 {
        let (lo, hi) = (self.weather_min[feature], self.weather_max[feature]);
        if hi > lo {
            (value - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    /// Normalizes a row laid out like [`crate::context::ContextVector::to_columns`].
    pub fn context(&self, cols: &mut [f64; CONTEXT_WIDTH]) {
        let areas = WEATHER_COLUMN / 2;
        for (k, v) in cols[..WEATHER_COLUMN].iter_mut().enumerate() {
            *v /= self.pm_max[k / areas];
        }
        for k in 0..WEATHER_FEATURES.len() {
            let v = &mut cols[WEATHER_COLUMN + k];
            *v = self.weather(k, *v);
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scaler is always serializable");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ScalerFile {
            scaler: self.clone(),
            hash: self.hash(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        io::write_text(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScalerFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let expected = file.scaler.hash();
        if file.hash != expected {
            return Err(Error::ScalerMismatch {
                expected,
                found: file.hash,
            });
        }
        Ok(file.scaler)
    }
}

#[derive(Debug, Clone)]
pub struct ScalerBuilder {
    pm_max: [f64; 2],
    weather_min: [f64; 3],
    weather_max: [f64; 3],
    pm_seen: usize,
    weather_seen: usize,
}

impl Default for ScalerBuilder {
    fn default() -> Self {
        Self {
            pm_max: [f64::NEG_INFINITY; 2],
            weather_min: [f64::INFINITY; 3],
            weather_max: [f64::NEG_INFINITY; 3],
            pm_seen: 0,
            weather_seen: 0,
        }
    }
}

impl ScalerBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_pm(&mut self, drifted: [f64; 2]) {
        for (m, v) in self.pm_max.iter_mut().zip(drifted) {
            *m = m.max(v);
        }
        self.pm_seen += 1;
    }

    pub fn push_weather(&mut self, w: &WeatherSample) {
        for (k, v) in [w.temperature, w.humidity, w.wind_speed].into_iter().enumerate() {
            self.weather_min[k] = self.weather_min[k].min(v);
            self.weather_max[k] = self.weather_max[k].max(v);
        }
        self.weather_seen += 1;
    }

    pub fn finish(self, experiment: Experiment) -> Result<Scaler> {
        if self.pm_seen == 0 {
            return Err(Error::Empty("training readings"));
        }
        if self.weather_seen == 0 {
            return Err(Error::Empty("training weather"));
        }
        for p in Pollutant::ALL {
            let value = self.pm_max[p.index()];
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ZeroTrainingMax {
                    pollutant: p.label().into(),
                    value,
                });
            }
        }
        Ok(Scaler {
            experiment,
            pm_max: self.pm_max,
            weather_min: self.weather_min,
            weather_max: self.weather_max,
        })
    }
}

/// Calls `f` for every readings row of `data_dir` that falls inside one of
/// `segments`, realization by realization in ascending order.
pub fn scan_readings(data_dir: &Path, segments: &[Segment], mut f: impl FnMut(usize, &ReadingRow)) -> Result<()> {
    let mut realizations: Vec<usize> = segments.iter().map(|s| s.realization).collect();
    realizations.sort_unstable();
    realizations.dedup();
    for r in realizations {
        let mine: Vec<&Segment> = segments.iter().filter(|s| s.realization == r).collect();
        let end = mine.iter().map(|s| s.end).max().unwrap_or(0);
        let mut reader = ReadingsReader::open(&data_dir.join(io::readings_file(r)))?;
        while let Some(row) = reader.next_row()? {
            if row.timestamp >= end {
                break;
            }
            if mine.iter().any(|s| s.contains(r, row.timestamp)) {
                f(r, &row);
            }
        }
    }
    Ok(())
}

/// Fits the scaler on the training partition of `split`.
pub fn fit_scaler(data_dir: &Path, split: &ExperimentSplit) -> Result<Scaler> {
    let mut builder = ScalerBuilder::new();
    scan_readings(data_dir, &split.train, |_, row| builder.push_pm(row.drifted))?;
    let weather = io::read_weather(data_dir)?;
    for (t, w) in weather.iter().enumerate() {
        if split.train.iter().any(|s| (s.start..s.end).contains(&t)) {
            builder.push_weather(w);
        }
    }
    builder.finish(split.experiment)
}

/// Split layout for a written dataset.
pub fn split_for(manifest: &Manifest, experiment: Experiment) -> Result<ExperimentSplit> {
    make_split(manifest.timesteps, manifest.n_realizations(), experiment)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRows {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: ExperimentSplit,
    pub scaler_hash: String,
    pub rows: PartitionRows,
}

impl SplitSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SPLIT_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

fn input_header() -> String {
    let mut h = String::from("realization,timestamp,sensor_id,kind,x,y,pm25_drifted,pm10_drifted");
    for name in crate::context::ContextVector::column_names() {
        h.push(',');
        h.push_str(&name);
    }
    h
}

/// Writes the normalized partitions of `experiment` under [`split_dir`].
pub fn materialize_split(data_dir: &Path, experiment: Experiment) -> Result<SplitSummary> {
    let manifest = Manifest::load(data_dir)?;
    let split = split_for(&manifest, experiment)?;
    let scaler = fit_scaler(data_dir, &split)?;
    let out = split_dir(data_dir, experiment);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let paths = [TRAIN_FILE, VALIDATION_FILE, TEST_INPUTS_FILE, TEST_TRUTH_FILE].map(|f| out.join(f));
    let mut writers = Vec::with_capacity(4);
    for p in &paths {
        writers.push(io::create(p)?);
    }
    let supervised = format!(
        "{},pm25_true,pm10_true,pm25_drift_target,pm10_drift_target\n",
        input_header()
    );
    io::write_all(&mut writers[0], &paths[0], &supervised)?;
    io::write_all(&mut writers[1], &paths[1], &supervised)?;
    io::write_all(&mut writers[2], &paths[2], &format!("{}\n", input_header()))?;
    io::write_all(
        &mut writers[3],
        &paths[3],
        &format!("{}\n", TEST_TRUTH_HEADER.join(",")),
    )?;

    let mut rows = PartitionRows::default();
    for r in split.realizations() {
        let end = [Partition::Train, Partition::Validation, Partition::Test]
            .iter()
            .flat_map(|&p| split.segments(p))
            .filter(|s| s.realization == r)
            .map(|s| s.end)
            .max()
            .unwrap_or(0);
        let readings_path = data_dir.join(io::readings_file(r));
        let context_path = data_dir.join(io::context_file(r));
        let mut readings = ReadingsReader::open(&readings_path)?;
        let mut contexts = ContextReader::open(&context_path)?;
        let mut line = String::with_capacity(1024);
        while let Some(row) = readings.next_row()? {
            let Some((ct, cid, mut cols)) = contexts.next_row()? else {
                return Err(Error::format(&context_path, "fewer rows than the readings file"));
            };
            if (ct, cid) != (row.timestamp, row.sensor_id) {
                return Err(Error::format(
                    &context_path,
                    format!(
                        "row ({ct}, {cid}) does not line up with readings row ({}, {})",
                        row.timestamp, row.sensor_id
                    ),
                ));
            }
            if row.timestamp >= end {
                break;
            }
            let Some(partition) = split.partition_of(r, row.timestamp) else {
                continue;
            };
            let drifted = scaler.pm_pair(row.drifted);
            let truth = scaler.pm_pair(row.truth);
            let target = [drifted[0] - truth[0], drifted[1] - truth[1]];
            scaler.context(&mut cols);

            line.clear();
            write!(line, "{r},{},{},{}", row.timestamp, row.sensor_id, row.kind.label()).unwrap();
            io::push_row(&mut line, &[row.position.x, row.position.y, drifted[0], drifted[1]]);
            io::push_row(&mut line, &cols);
            let slot = match partition {
                Partition::Train => {
                    rows.train += 1;
                    0
                }
                Partition::Validation => {
                    rows.validation += 1;
                    1
                }
                Partition::Test => {
                    rows.test += 1;
                    2
                }
            };
            if slot < 2 {
                io::push_row(&mut line, &[truth[0], truth[1], target[0], target[1]]);
            }
            line.push('\n');
            io::write_all(&mut writers[slot], &paths[slot], &line)?;

            if slot == 2 {
                line.clear();
                write!(line, "{r},{},{}", row.timestamp, row.sensor_id).unwrap();
                io::push_row(
                    &mut line,
                    &[drifted[0], drifted[1], truth[0], truth[1], target[0], target[1]],
                );
                line.push('\n');
                io::write_all(&mut writers[3], &paths[3], &line)?;
            }
        }
    }
    for (w, p) in writers.into_iter().zip(&paths) {
        io::finish(w, p)?;
    }

    scaler.save(&out.join(SCALER_FILE))?;
    let summary = SplitSummary {
        split,
        scaler_hash: scaler.hash(),
        rows,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    io::write_text(&out.join(SPLIT_FILE), &text)?;
    Ok(summary)
}

/// Test-set MSE of the do-nothing calibrator, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityMse {
    pub experiment: Experiment,
    pub mse: [f64; 2],
    pub combined: f64,
    pub n: usize,
}

/// Computes [`IdentityMse`] straight from the readings files, without
/// materializing the split.
pub fn identity_mse(data_dir: &Path, experiment: Experiment) -> Result<IdentityMse> {
    let manifest = Manifest::load(data_dir)?;
    let split = split_for(&manifest, experiment)?;
    let scaler = fit_scaler(data_dir, &split)?;
    let mut acc = SquaredErrors::default();
    scan_readings(data_dir, &split.test, |_, row| {
        acc.push(scaler.pm_pair(row.drifted), scaler.pm_pair(row.truth))
    })?;
    if acc.n == 0 {
        return Err(Error::Empty("test partition"));
    }
    Ok(IdentityMse {
        experiment,
        mse: acc.mse(),
        combined: acc.combined(),
        n: acc.n,
    })
}
