//! Scoring of calibration predictions and a least-squares reference calibrator.
//!
//! A prediction file is a CSV table `timestamp,sensor_id,pm25,pm10` of
//! calibrated readings in normalized units, one row per test (timestamp,
//! sensor). It may start with a `# scaler_hash=<hex>` line; when present the
//! hash must match the split's `scaler.json`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::seq::index;
use serde::Serialize;

use crate::dataset::{
    self, materialize_split, scan_readings, split_dir, split_for, Experiment, Manifest, Scaler, SCALER_FILE,
    SPLIT_FILE, TEST_TRUTH_FILE,
};
use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::Pollutant;

pub const PREDICTIONS_HEADER: [&str; 4] = ["timestamp", "sensor_id", "pm25", "pm10"];
pub const HASH_PREFIX: &str = "# scaler_hash=";
pub const SCATTER_LIMIT: usize = 20_000;

pub fn scatter_file(pollutant: Pollutant) -> String {
    format!("scatter_{}.csv", pollutant.label())
}

/// Mean of squared differences.
pub fn mse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predicted.len() as f64)
}

/// Running squared-error sums for both pollutants over the same rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SquaredErrors {
    pub sum: [f64; 2],
    pub n: usize,
}

impl SquaredErrors {
    pub fn push(&mut self, predicted: [f64; 2], truth: [f64; 2]) {
        for ch in 0..2 {
            let d = predicted[ch] - truth[ch];
            self.sum[ch] += d * d;
        }
        self.n += 1;
    }

    pub fn mse(&self) -> [f64; 2] {
        let n = self.n.max(1) as f64;
        self.sum.map(|s| s / n)
    }

    /// Mean over every pollutant-row squared error.
    pub fn combined(&self) -> f64 {
        (self.sum[0] + self.sum[1]) / (2 * self.n.max(1)) as f64
    }
}

/// `drifted ≈ slope · truth + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Mean training truth; the prediction when the fit is degenerate.
    pub truth_mean: f64,
    pub degenerate: bool,
}

impl LinearFit {
    /// Inverts the fit: the true reading implied by a drifted one.
    pub fn calibrate(&self, drifted: f64) -> f64 {
        if self.degenerate {
            self.truth_mean
        } else {
            (drifted - self.intercept) / self.slope
        }
    }
}

/// Ordinary least squares of `drifted` on `truth`. A constant truth series
/// gives slope 0 and the mean drifted value as intercept.
pub fn fit_linear(truth: &[f64], drifted: &[f64]) -> Result<LinearFit> {
    if truth.len() != drifted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: drifted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("fit input"));
    }
    let n = truth.len() as f64;
    let mx = truth.iter().sum::<f64>() / n;
    let my = drifted.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in truth.iter().zip(drifted) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let scale = truth.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    // rounding noise of a constant series, not real spread
    if sxx <= n * (64.0 * f64::EPSILON * scale).powi(2) {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: my,
            truth_mean: mx,
            degenerate: true,
        });
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        truth_mean: mx,
        degenerate: slope == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub sensor_id: usize,
    pub truth: [f64; 2],
    pub drifted: [f64; 2],
}

/// Per-sensor, per-pollutant linear models fitted with access to truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCalibrator {
    pub models: BTreeMap<usize, [LinearFit; 2]>,
}

pub fn fit_oracle(samples: impl IntoIterator<Item = TrainingSample>) -> Result<OracleCalibrator> {
    type Columns = (Vec<f64>, Vec<f64>);
    let mut grouped: BTreeMap<usize, [Columns; 2]> = BTreeMap::new();
    for s in samples {
        let entry = grouped.entry(s.sensor_id).or_default();
        for (ch, (truth, drifted)) in entry.iter_mut().enumerate() {
            truth.push(s.truth[ch]);
            drifted.push(s.drifted[ch]);
        }
    }
    if grouped.is_empty() {
        return Err(Error::Empty("oracle training set"));
    }
    let mut models = BTreeMap::new();
    for (sensor, [a, b]) in grouped {
        if a.0.len() < 2 {
            return Err(Error::TooFewPoints {
                sensor,
                points: a.0.len(),
            });
        }
        models.insert(sensor, [fit_linear(&a.0, &a.1)?, fit_linear(&b.0, &b.1)?]);
    }
    Ok(OracleCalibrator { models })
}

impl OracleCalibrator {
    pub fn calibrate(&self, sensor_id: usize, drifted: [f64; 2]) -> Result<[f64; 2]> {
        let [a, b] = self.models.get(&sensor_id).ok_or(Error::UnknownSensor(sensor_id))?;
        Ok([a.calibrate(drifted[0]), b.calibrate(drifted[1])])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub timestamp: usize,
    pub sensor_id: usize,
    pub values: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub scaler_hash: Option<String>,
    pub rows: Vec<Prediction>,
}

pub fn write_predictions(path: &Path, scaler_hash: Option<&str>, rows: &[Prediction]) -> Result<()> {
    let mut text = String::with_capacity(48 * (rows.len() + 2));
    if let Some(h) = scaler_hash {
        writeln!(text, "{HASH_PREFIX}{h}").unwrap();
    }
    writeln!(text, "{}", PREDICTIONS_HEADER.join(",")).unwrap();
    for r in rows {
        write!(text, "{},{}", r.timestamp, r.sensor_id).unwrap();
        dataset::push_row(&mut text, &r.values);
        text.push('\n');
    }
    let mut w = dataset::create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<PredictionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (scaler_hash, body) = match text.strip_prefix(HASH_PREFIX) {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            (Some(line.trim().to_string()), body)
        }
        None => (None, text.as_str()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(PREDICTIONS_HEADER) {
        return Err(Error::format(
            path,
            format!(
                "unexpected header {:?}, expected {:?}",
                header.iter().collect::<Vec<_>>(),
                PREDICTIONS_HEADER
            ),
        ));
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| Error::format(path, format!("row {}: cannot parse column {col}", k + 1));
        let int = |col: usize| {
            rec.get(col)
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(col))
        };
        let float = |col: usize| {
            rec.get(col)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(col))
        };
        rows.push(Prediction {
            timestamp: int(0)?,
            sensor_id: int(1)?,
            values: [float(2)?, float(3)?],
        });
    }
    Ok(PredictionFile { scaler_hash, rows })
}

/// One test row with everything needed for scoring, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub realization: usize,
    pub timestamp: usize,
    pub sensor_id: usize,
    pub drifted: [f64; 2],
    pub truth: [f64; 2],
}

pub fn read_test_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let mut table = dataset::Table::open(path, &dataset::TEST_TRUTH_HEADER)?;
    let mut rows = Vec::new();
    while table.advance()? {
        rows.push(TruthRow {
            realization: table.field(0)?,
            timestamp: table.field(1)?,
            sensor_id: table.field(2)?,
            drifted: [table.field(3)?, table.field(4)?],
            truth: [table.field(5)?, table.field(6)?],
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub timestamp: usize,
    pub sensor_id: usize,
    pub true_drift: f64,
    pub predicted_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorMse {
    pub sensor_id: usize,
    pub mse: [f64; 2],
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    /// Calibrated readings against truth, per pollutant.
    pub mse: [f64; 2],
    pub combined: f64,
    /// Predicted drift (`drifted - predicted`) against true drift.
    pub drift_mse: [f64; 2],
    pub per_sensor: Vec<SensorMse>,
    pub n: usize,
    /// Prediction rows with no matching test row; ignored.
    pub extra_rows: usize,
    #[serde(skip)]
    pub scatter: [Vec<ScatterPoint>; 2],
}

/// Scores `predictions` against `truth`. Rows are matched on
/// (timestamp, sensor_id); the order of `predictions` does not matter.
pub fn evaluate_rows(predictions: &[Prediction], truth: &[TruthRow], scatter_seed: u64) -> Result<CalibrationResult> {
    if truth.is_empty() {
        return Err(Error::Empty("test partition"));
    }
    let mut lookup: HashMap<(usize, usize), [f64; 2]> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if lookup.insert((p.timestamp, p.sensor_id), p.values).is_some() {
            return Err(Error::DuplicateRow {
                timestamp: p.timestamp,
                sensor: p.sensor_id,
            });
        }
    }

    let mut missing = Vec::new();
    let mut acc = SquaredErrors::default();
    let mut drift_acc = SquaredErrors::default();
    let mut per_sensor: BTreeMap<usize, SquaredErrors> = BTreeMap::new();
    let mut scatter: [Vec<ScatterPoint>; 2] = [Vec::with_capacity(truth.len()), Vec::with_capacity(truth.len())];
    let mut matched = 0usize;
    for row in truth {
        let Some(&pred) = lookup.get(&(row.timestamp, row.sensor_id)) else {
            missing.push(row);
            continue;
        };
        matched += 1;
        acc.push(pred, row.truth);
        per_sensor.entry(row.sensor_id).or_default().push(pred, row.truth);
        let true_drift = [row.drifted[0] - row.truth[0], row.drifted[1] - row.truth[1]];
        let predicted_drift = [row.drifted[0] - pred[0], row.drifted[1] - pred[1]];
        drift_acc.push(predicted_drift, true_drift);
        for ch in 0..2 {
            scatter[ch].push(ScatterPoint {
                timestamp: row.timestamp,
                sensor_id: row.sensor_id,
                true_drift: true_drift[ch],
                predicted_drift: predicted_drift[ch],
            });
        }
    }
    if let Some(first) = missing.first() {
        return Err(Error::MissingRows {
            missing: missing.len(),
            timestamp: first.timestamp,
            sensor: first.sensor_id,
        });
    }

    let streams = Streams::new(scatter_seed);
    for p in Pollutant::ALL {
        let points = &mut scatter[p.index()];
        if points.len() > SCATTER_LIMIT {
            let mut rng = streams.stream(&format!("evaluation/scatter/{}", p.label()));
            let mut keep = index::sample(&mut rng, points.len(), SCATTER_LIMIT).into_vec();
            keep.sort_unstable();
            *points = keep.into_iter().map(|k| points[k]).collect();
        }
    }

    Ok(CalibrationResult {
        mse: acc.mse(),
        combined: acc.combined(),
        drift_mse: drift_acc.mse(),
        per_sensor: per_sensor
            .into_iter()
            .map(|(sensor_id, e)| SensorMse {
                sensor_id,
                mse: e.mse(),
                n: e.n,
            })
            .collect(),
        n: acc.n,
        extra_rows: predictions.len() - matched,
        scatter,
    })
}

/// Materializes the split under `data_dir` unless it already exists.
pub fn ensure_split(data_dir: &Path, experiment: Experiment) -> Result<()> {
    let dir = split_dir(data_dir, experiment);
    if !dir.join(SPLIT_FILE).exists() {
        materialize_split(data_dir, experiment)?;
    }
    Ok(())
}

/// Scores a prediction file against the test partition of `experiment`.
pub fn evaluate(predictions: &Path, data_dir: &Path, experiment: Experiment) -> Result<CalibrationResult> {
    ensure_split(data_dir, experiment)?;
    let dir = split_dir(data_dir, experiment);
    let scaler = Scaler::load(&dir.join(SCALER_FILE))?;
    let file = read_predictions(predictions)?;
    if let Some(found) = file.scaler_hash {
        let expected = scaler.hash();
        if found != expected {
            return Err(Error::ScalerMismatch { expected, found });
        }
    }
    let truth = read_test_truth(&dir.join(TEST_TRUTH_FILE))?;
    let seed = Manifest::load(data_dir)?.config.master_seed;
    evaluate_rows(&file.rows, &truth, seed)
}

pub fn write_scatter(result: &CalibrationResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for p in Pollutant::ALL {
        let path = out_dir.join(scatter_file(p));
        let mut text = String::from("timestamp,sensor_id,true_drift,predicted_drift\n");
        for s in &result.scatter[p.index()] {
            write!(text, "{},{}", s.timestamp, s.sensor_id).unwrap();
            dataset::push_row(&mut text, &[s.true_drift, s.predicted_drift]);
            text.push('\n');
        }
        dataset::write_text(&path, &text)?;
    }
    Ok(())
}

/// Oracle fitted on the raw training partition and its test predictions in
/// normalized units.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub calibrator: OracleCalibrator,
    pub predictions: Vec<Prediction>,
    pub scaler_hash: String,
}

pub fn run_oracle(data_dir: &Path, experiment: Experiment) -> Result<OracleRun> {
    let manifest = Manifest::load(data_dir)?;
    let split = split_for(&manifest, experiment)?;
    let scaler = dataset::fit_scaler(data_dir, &split)?;

    let mut samples = Vec::new();
    scan_readings(data_dir, &split.train, |_, row| {
        samples.push(TrainingSample {
            sensor_id: row.sensor_id,
            truth: row.truth,
            drifted: row.drifted,
        })
    })?;
    let calibrator = fit_oracle(samples)?;

    let mut test = Vec::new();
    scan_readings(data_dir, &split.test, |_, row| {
        test.push((row.timestamp, row.sensor_id, row.drifted))
    })?;
    let predictions = test
        .into_iter()
        .map(|(timestamp, sensor_id, drifted)| {
            Ok(Prediction {
                timestamp,
                sensor_id,
                values: scaler.pm_pair(calibrator.calibrate(sensor_id, drifted)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleRun {
        calibrator,
        predictions,
        scaler_hash: scaler.hash(),
    })
}
