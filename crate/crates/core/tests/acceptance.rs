//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Runs on the full-size default network (T = 8640, 20 sources, 40 sensors)
//! wherever a criterion names it.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use wsn_calib::context::{context_vector, AREAS};
use wsn_calib::dataset::{
    generate, make_split, materialize_split, split_dir, Dataset, Experiment, GenerationConfig, Partition, Segment,
    TEST_INPUTS_FILE, TRAIN_FILE, VALIDATION_FILE,
};
use wsn_calib::dispersion::measurement_coefficient;
use wsn_calib::drift::{self, DriftConfig, DriftSettings, RampMode};
use wsn_calib::evaluation::{self, fit_oracle, Prediction, TrainingSample, TruthRow};
use wsn_calib::phenomenon::DELTA_BOUNDS;
use wsn_calib::rng::Streams;
use wsn_calib::scene::SceneConfig;
use wsn_calib::{MONTH, WEEK, YEAR};

const RUNTIME_LIMIT: Duration = Duration::from_secs(120);
const ATTENUATION_TOL: f64 = 1e-9;
const WINDOW_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-12;
const RECOVERY_TOL: f64 = 1e-6;
const NOISELESS_MSE: f64 = 1e-12;
const NOISE_SD: f64 = 0.05;
const NOISE_MSE_FACTOR: f64 = 1.1;
const IDENTITY_FACTOR: f64 = 5.0;
const CONTEXT_TOL: f64 = 1e-9;

#[derive(Default)]
struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn record(&mut self, name: &str, outcome: Result<String, String>) {
        self.total += 1;
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn default_config() -> GenerationConfig {
    let cfg = GenerationConfig::default();
    assert_eq!(cfg.timesteps, YEAR);
    assert_eq!(cfg.scene.n_sources, 20);
    assert_eq!(cfg.n_sensors(), 40);
    cfg
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

fn determinism(root: &Path) -> Result<String, String> {
    let cfg = default_config();
    let mut elapsed = Vec::new();
    for name in ["a", "b"] {
        let start = Instant::now();
        let ds = generate(&cfg).map_err(|e| e.to_string())?;
        ds.write(&root.join(name)).map_err(|e| e.to_string())?;
        elapsed.push(start.elapsed());
    }
    let a = dir_bytes(&root.join("a"));
    let b = dir_bytes(&root.join("b"));
    let bytes: usize = a.values().map(Vec::len).sum();
    let slowest = elapsed.iter().max().unwrap();
    ensure(
        a == b && !a.is_empty() && *slowest < RUNTIME_LIMIT,
        format!(
            "{} files, {bytes} bytes, identical = {}; slowest run {:.1}s (limit {}s)",
            a.len(),
            a == b,
            slowest.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    )
}

fn attenuation() -> Result<String, String> {
    let r = 100.0;
    let mut worst: f64 = 0.0;
    for w in [-0.9, 0.0, 0.5, 1.0, 7.0] {
        worst = worst.max((measurement_coefficient(0.0, w, r).value - 1.0).abs());
    }
    let cases = [(10.0, 0.0, 2f64.powf(-1.5)), (10.0, 1.0, 1.4f64.powf(-1.5))];
    for (d, w, expected) in cases {
        worst = worst.max((measurement_coefficient(d, w, r).value - expected).abs());
    }
    ensure(
        worst <= ATTENUATION_TOL,
        format!("max deviation {worst:e} (tol {ATTENUATION_TOL:e})"),
    )
}

fn emission_windows(ds: &Dataset) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut deltas = 0usize;
    let mut delta_violations = 0usize;
    let mut negative = 0usize;
    let mut windows = 0usize;
    for trace in ds.emissions.iter().flatten() {
        let walk = &trace.walk;
        for (w, &target) in walk.windows.iter().zip(&walk.window_targets) {
            let max = walk.scaled[w.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((max - target).abs());
            windows += 1;
        }
        deltas += walk.deltas.len();
        delta_violations += walk
            .deltas
            .iter()
            .filter(|d| !(DELTA_BOUNDS.0..=DELTA_BOUNDS.1).contains(*d))
            .count();
        negative += trace.values.iter().filter(|v| !(**v >= 0.0)).count();
    }
    ensure(
        worst <= WINDOW_TOL && delta_violations == 0 && negative == 0 && windows > 0,
        format!(
            "{windows} windows, max |max - m| {worst:e}; {delta_violations}/{deltas} deltas outside [-1, 10]; {negative} negative emissions"
        ),
    )
}

fn drift_collapse(ds: &Dataset) -> Result<String, String> {
    let weather = ds.exported_weather();
    let params = &ds.realizations[0].params;
    let mut rng = Streams::new(7).stream("acceptance/drift");
    let mut zero_mismatch = 0usize;
    let mut worst: f64 = 0.0;
    let mut samples = 0usize;
    for (id, series) in ds.truth.iter().enumerate() {
        for ch in 0..2 {
            let y: Vec<f64> = series.iter().map(|v| v[ch]).collect();
            let history = drift::history_series(&y);
            let channel = &params[id].channels[ch];
            let frozen = DriftSettings {
                ramp: RampMode::Linear,
                weather_coupling: true,
                noise_sd: 0.0,
            };
            let out = drift::apply_drift(
                &y,
                channel,
                0.0,
                &weather.temperature,
                &weather.humidity,
                &history,
                frozen,
                &mut rng,
            )
            .map_err(|e| e.to_string())?;
            zero_mismatch += out.iter().zip(&y).filter(|(x, y)| x.drifted != **y).count();

            let full = DriftSettings {
                ramp: RampMode::Saturated,
                ..frozen
            };
            let out = drift::apply_drift(
                &y,
                channel,
                0.0,
                &weather.temperature,
                &weather.humidity,
                &history,
                full,
                &mut rng,
            )
            .map_err(|e| e.to_string())?;
            let f = drift::drift_factors(channel, &weather.temperature, &weather.humidity, &history, true);
            for t in 0..y.len() {
                let closed = f.alpha[t] * y[t].powf(f.beta[t]) + f.offset[t];
                worst = worst.max((out[t].drifted - closed).abs());
            }
            samples += y.len();
        }
    }
    ensure(
        zero_mismatch == 0 && worst <= CLOSED_FORM_TOL,
        format!(
            "{samples} samples; tau=0: {zero_mismatch} inexact; tau=1: max |x - (a*y^b + c)| {worst:e} (tol {CLOSED_FORM_TOL:e})"
        ),
    )
}

fn linear_config(noise_sd: f64) -> GenerationConfig {
    GenerationConfig {
        drift: DriftConfig::linear(noise_sd),
        ..default_config()
    }
}

fn standard_rows(ds: &Dataset, partition: Partition) -> Vec<(usize, usize)> {
    let split = make_split(ds.timesteps(), ds.realizations.len(), Experiment::Standard).unwrap();
    let mut rows = Vec::new();
    for seg in split.segments(partition) {
        for t in seg.start..seg.end {
            for id in 0..ds.truth.len() {
                rows.push((t, id));
            }
        }
    }
    rows
}

fn raw_oracle(ds: &Dataset) -> Result<(evaluation::OracleCalibrator, Vec<Prediction>, Vec<TruthRow>), String> {
    let r = &ds.realizations[0];
    let train = standard_rows(ds, Partition::Train)
        .into_iter()
        .map(|(t, id)| TrainingSample {
            sensor_id: id,
            truth: ds.truth[id][t],
            drifted: r.drifted[id][t],
        });
    let oracle = fit_oracle(train).map_err(|e| e.to_string())?;
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (t, id) in standard_rows(ds, Partition::Test) {
        let x = r.drifted[id][t];
        preds.push(Prediction {
            timestamp: t,
            sensor_id: id,
            values: oracle.calibrate(id, x).map_err(|e| e.to_string())?,
        });
        truth.push(TruthRow {
            realization: 1,
            timestamp: t,
            sensor_id: id,
            drifted: x,
            truth: ds.truth[id][t],
        });
    }
    Ok((oracle, preds, truth))
}

fn oracle_recovery(root: &Path) -> Result<String, String> {
    let err = |e: wsn_calib::Error| e.to_string();

    let exact = generate(&linear_config(0.0)).map_err(err)?;
    let (oracle, _, _) = raw_oracle(&exact)?;
    let mut worst: f64 = 0.0;
    for (id, p) in exact.realizations[0].params.iter().enumerate() {
        let fits = &oracle.models[&id];
        for ch in 0..2 {
            worst = worst.max((fits[ch].slope - p.channels[ch].f_alpha).abs());
            worst = worst.max((fits[ch].intercept - p.channels[ch].f_c).abs());
        }
    }
    let data = root.join("linear");
    exact.write(&data).map_err(err)?;
    let run = evaluation::run_oracle(&data, Experiment::Standard).map_err(err)?;
    let pred_path = root.join("oracle.csv");
    evaluation::write_predictions(&pred_path, Some(&run.scaler_hash), &run.predictions).map_err(err)?;
    let end_to_end = evaluation::evaluate(&pred_path, &data, Experiment::Standard).map_err(err)?;

    let noisy = generate(&linear_config(NOISE_SD)).map_err(err)?;
    let (_, preds, truth) = raw_oracle(&noisy)?;
    let oracle_mse = evaluation::evaluate_rows(&preds, &truth, 1).map_err(err)?.combined;
    let identity: Vec<Prediction> = truth
        .iter()
        .map(|r| Prediction {
            timestamp: r.timestamp,
            sensor_id: r.sensor_id,
            values: r.drifted,
        })
        .collect();
    let identity_mse = evaluation::evaluate_rows(&identity, &truth, 1).map_err(err)?.combined;
    let sigma2 = NOISE_SD * NOISE_SD;

    ensure(
        worst <= RECOVERY_TOL
            && end_to_end.combined < NOISELESS_MSE
            && oracle_mse <= NOISE_MSE_FACTOR * sigma2
            && identity_mse >= IDENTITY_FACTOR * oracle_mse,
        format!(
            "eps=0: max coefficient error {worst:e}, end-to-end MSE {:e}; eps={NOISE_SD}: oracle MSE {oracle_mse:.4e} = {:.3} sigma^2, identity MSE {identity_mse:.4e} = {:.1}x oracle",
            end_to_end.combined,
            oracle_mse / sigma2,
            identity_mse / oracle_mse
        ),
    )
}

fn context_properties(ds: &Dataset) -> Result<String, String> {
    let r = &ds.realizations[0];
    let radius = ds.config.context.neighborhood_radius;
    let mut rng = Streams::new(11).stream("acceptance/context");
    let mut worst: f64 = 0.0;
    let mut bad_onehot = 0usize;
    let mut not_invariant = 0usize;
    let mut vectors = 0usize;
    for t in (0..ds.timesteps()).step_by(97) {
        let internal = ds.warmup + t;
        let positions = ds.scene.positions_at(internal);
        let readings: Vec<[f64; 2]> = r.drifted.iter().map(|s| s[t]).collect();
        let weather = ds.weather.at(internal);
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.shuffle(&mut rng);
        let p2: Vec<_> = order.iter().map(|&i| positions[i]).collect();
        let r2: Vec<_> = order.iter().map(|&i| readings[i]).collect();
        for (new_idx, &i) in order.iter().enumerate() {
            let ctx = context_vector(i, &positions, &readings, weather, radius);
            vectors += 1;
            if ctx.wind_onehot.iter().sum::<f64>() != 1.0 {
                bad_onehot += 1;
            }
            for ch in 0..2 {
                let weighted: f64 = (0..AREAS)
                    .map(|a| ctx.area_counts[a] as f64 * ctx.area_means[ch][a])
                    .sum();
                let direct: f64 = (0..positions.len())
                    .filter(|&j| j != i && positions[i].distance(&positions[j]) < radius)
                    .map(|j| readings[j][ch])
                    .sum();
                worst = worst.max((weighted - direct).abs());
            }
            if context_vector(new_idx, &p2, &r2, weather, radius) != ctx {
                not_invariant += 1;
            }
        }
    }
    ensure(
        worst <= CONTEXT_TOL && bad_onehot == 0 && not_invariant == 0,
        format!(
            "{vectors} vectors; max |sum - count*mean| {worst:e} (tol {CONTEXT_TOL:e}); {bad_onehot} bad one-hots; {not_invariant} permutation mismatches"
        ),
    )
}

fn read_keys(path: &Path) -> Vec<(usize, usize)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap())
        })
        .collect()
}

fn split_correctness(root: &Path) -> Result<String, String> {
    let seg = |r, s, e| Segment {
        realization: r,
        start: s,
        end: e,
    };
    let standard = make_split(YEAR, 1, Experiment::Standard).map_err(|e| e.to_string())?;
    let limited = make_split(YEAR, 1, Experiment::Limited).map_err(|e| e.to_string())?;
    let drift_gen = make_split(YEAR, 6, Experiment::DriftGen).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    if standard.train != vec![seg(1, 0, 7 * MONTH)]
        || standard.validation != vec![seg(1, 7 * MONTH, 8 * MONTH)]
        || standard.test != vec![seg(1, 8 * MONTH, 12 * MONTH)]
    {
        problems.push("standard ranges".to_string());
    }
    if limited.train != vec![seg(1, 0, 3 * MONTH - 3 * WEEK)]
        || limited.validation != vec![seg(1, 3 * MONTH - 3 * WEEK, 3 * MONTH)]
        || limited.test != vec![seg(1, 3 * MONTH, 12 * MONTH)]
        || limited.timesteps(Partition::Validation) != 504
    {
        problems.push("limited ranges".to_string());
    }
    let expected_train: Vec<Segment> = (1..=5).map(|r| seg(r, 0, 8 * MONTH)).collect();
    let expected_val: Vec<Segment> = (1..=5).map(|r| seg(r, 8 * MONTH, 12 * MONTH)).collect();
    if drift_gen.train != expected_train
        || drift_gen.validation != expected_val
        || drift_gen.test != vec![seg(6, 0, 12 * MONTH)]
    {
        problems.push("drift-gen ranges".to_string());
    }

    // materialized files on a small six-realization network
    let cfg = GenerationConfig {
        n_drift_realizations: 6,
        scene: SceneConfig {
            n_sources: 5,
            n_static: 4,
            n_mobile: 2,
            ..SceneConfig::default()
        },
        ..GenerationConfig::default()
    };
    let data = root.join("six");
    generate(&cfg)
        .and_then(|ds| ds.write(&data))
        .map_err(|e| e.to_string())?;
    let n_sensors = cfg.n_sensors();
    let mut leaked = 0usize;
    for e in Experiment::ALL {
        let summary = materialize_split(&data, e).map_err(|e| e.to_string())?;
        let split = make_split(YEAR, 6, e).unwrap();
        let dir = split_dir(&data, e);
        for (file, partition) in [
            (TRAIN_FILE, Partition::Train),
            (VALIDATION_FILE, Partition::Validation),
            (TEST_INPUTS_FILE, Partition::Test),
        ] {
            let keys = read_keys(&dir.join(file));
            if keys.len() != split.timesteps(partition) * n_sensors {
                problems.push(format!("{e} {file}: {} rows", keys.len()));
            }
            if keys.iter().any(|&(r, t)| split.partition_of(r, t) != Some(partition)) {
                problems.push(format!("{e} {file}: row outside its partition"));
            }
            if e == Experiment::DriftGen && partition != Partition::Test {
                leaked += keys.iter().filter(|k| k.0 == 6).count();
            }
        }
        if summary.rows.test != split.timesteps(Partition::Test) * n_sensors {
            problems.push(format!("{e}: summary test rows"));
        }
    }
    if leaked > 0 {
        problems.push(format!("{leaked} realization-6 rows in drift-gen training data"));
    }
    let header = std::fs::read_to_string(split_dir(&data, Experiment::Standard).join(TEST_INPUTS_FILE))
        .map_err(|e| e.to_string())?;
    let header = header.lines().next().unwrap_or("");
    if header.contains("_true") || header.contains("drift_target") {
        problems.push("test inputs expose truth".into());
    }
    ensure(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "standard/limited/drift-gen ranges exact, limited validation = {} steps, realization 6 absent from drift-gen training files",
                limited.timesteps(Partition::Validation)
            )
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temporary directory");
    let mut report = Report::default();

    report.record("determinism and runtime", determinism(root.path()));
    report.record("attenuation unit checks", attenuation());

    let ds = generate(&default_config()).expect("default generation");
    report.record("emission window property", emission_windows(&ds));
    report.record("drift collapse", drift_collapse(&ds));
    report.record("oracle recovery", oracle_recovery(root.path()));
    report.record("context properties", context_properties(&ds));
    report.record("split correctness", split_correctness(root.path()));

    println!("{}/{} criteria passed", report.total - report.failed, report.total);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
