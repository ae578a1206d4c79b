use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not place {requested} points (placed {placed}) within radius {radius} at separation {min_separation}: {rejections} consecutive rejections")]
    Capacity {
        requested: usize,
        placed: usize,
        radius: f64,
        min_separation: f64,
        rejections: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{kind} sensor index {index} out of range ({count} sensors)")]
    SensorIndex {
        kind: &'static str,
        index: usize,
        count: usize,
    },

    #[error("timestep {t} lies inside the warmup region (first usable step is {warmup})")]
    Warmup { t: usize, warmup: usize },

    #[error("negative true reading {value} at step {t}; drift needs a nonnegative base")]
    NegativeReading { t: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dataset covers {available} timesteps but the {experiment} experiment needs {required}")]
    DatasetTooShort {
        experiment: String,
        available: usize,
        required: usize,
    },

    #[error("experiment {experiment} needs {required} drift realizations, dataset has {available}")]
    NotEnoughRealizations {
        experiment: String,
        available: usize,
        required: usize,
    },

    #[error("training maximum of {pollutant} drifted readings is {value}; cannot normalize")]
    ZeroTrainingMax { pollutant: String, value: f64 },

    #[error("sensor {sensor} has {points} training points, need at least 2")]
    TooFewPoints { sensor: usize, points: usize },

    #[error("no calibration model for sensor {0}")]
    UnknownSensor(usize),

    #[error("predictions are missing {missing} test rows (first: timestamp {timestamp}, sensor {sensor})")]
    MissingRows {
        missing: usize,
        timestamp: usize,
        sensor: usize,
    },

    #[error("duplicate prediction row for timestamp {timestamp}, sensor {sensor}")]
    DuplicateRow { timestamp: usize, sensor: usize },

    #[error("scaler hash mismatch: predictions carry {found}, split uses {expected}")]
    ScalerMismatch { expected: String, found: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
