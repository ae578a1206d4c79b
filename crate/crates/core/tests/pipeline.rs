use std::path::Path;

use wsn_calib::dataset::{
    fit_scaler, generate, identity_mse, make_split, materialize_split, read_weather, readings_file, split_dir, Dataset,
    Experiment, GenerationConfig, Manifest, ReadingsReader, Scaler, SCALER_FILE, TEST_INPUTS_FILE, TEST_TRUTH_FILE,
    TRAIN_FILE,
};
use wsn_calib::evaluation::{self, read_predictions, write_predictions, Prediction};
use wsn_calib::scene::SceneConfig;
use wsn_calib::{Error, YEAR};

fn small(timesteps: usize) -> GenerationConfig {
    GenerationConfig {
        timesteps,
        scene: SceneConfig {
            n_sources: 6,
            n_static: 5,
            n_mobile: 3,
            ..SceneConfig::default()
        },
        ..GenerationConfig::default()
    }
}

fn written(cfg: &GenerationConfig, dir: &Path) -> Dataset {
    let ds = generate(cfg).unwrap();
    ds.write(dir).unwrap();
    ds
}

fn identity_predictions(data: &Path, experiment: Experiment) -> Vec<Prediction> {
    evaluation::ensure_split(data, experiment).unwrap();
    evaluation::read_test_truth(&split_dir(data, experiment).join(TEST_TRUTH_FILE))
        .unwrap()
        .into_iter()
        .map(|r| Prediction {
            timestamp: r.timestamp,
            sensor_id: r.sensor_id,
            values: r.drifted,
        })
        .collect()
}

#[test]
fn readings_file_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = written(&small(wsn_calib::MONTH), tmp.path());
    let mut reader = ReadingsReader::open(&tmp.path().join(readings_file(1))).unwrap();
    let mut count = 0;
    while let Some(row) = reader.next_row().unwrap() {
        let (t, id) = (row.timestamp, row.sensor_id);
        assert_eq!(t, count / ds.truth.len());
        assert_eq!(row.truth, ds.truth[id][t]);
        assert_eq!(row.drifted, ds.realizations[0].drifted[id][t]);
        assert_eq!(row.position, ds.scene.sensor_position(id, ds.warmup + t));
        assert_eq!(row.kind, ds.scene.sensor_kind(id));
        for ch in 0..2 {
            assert_eq!(row.drift_target[ch], row.drifted[ch] - row.truth[ch]);
        }
        count += 1;
    }
    assert_eq!(count, ds.timesteps() * ds.truth.len());

    let weather = read_weather(tmp.path()).unwrap();
    assert_eq!(weather.len(), ds.timesteps());
    assert_eq!(weather[0], ds.weather.at(ds.warmup));

    let manifest = Manifest::load(tmp.path()).unwrap();
    assert_eq!(manifest.warmup, ds.warmup);
    assert_eq!(manifest.realizations[0].drift, ds.realizations[0].params);
    assert_eq!(manifest.n_sensors(), 8);
}

#[test]
fn short_dataset_cannot_be_split() {
    let tmp = tempfile::tempdir().unwrap();
    written(&small(wsn_calib::MONTH), tmp.path());
    assert!(matches!(
        materialize_split(tmp.path(), Experiment::Standard),
        Err(Error::DatasetTooShort { .. })
    ));
    assert!(matches!(
        identity_mse(tmp.path(), Experiment::Limited),
        Err(Error::DatasetTooShort { .. })
    ));
}

#[test]
fn split_files_and_scoring() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path();
    let ds = written(&small(YEAR), data);

    // scaler uses training statistics only
    let split = make_split(YEAR, 1, Experiment::Standard).unwrap();
    let scaler = fit_scaler(data, &split).unwrap();
    let train_max = |ch: usize| {
        ds.realizations[0]
            .drifted
            .iter()
            .flat_map(|s| s[..7 * wsn_calib::MONTH].iter().map(move |v| v[ch]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    assert_eq!(scaler.pm_max, [train_max(0), train_max(1)]);

    let summary = materialize_split(data, Experiment::Standard).unwrap();
    let dir = split_dir(data, Experiment::Standard);
    assert_eq!(Scaler::load(&dir.join(SCALER_FILE)).unwrap(), scaler);
    assert_eq!(summary.scaler_hash, scaler.hash());
    assert_eq!(summary.rows.train, 7 * wsn_calib::MONTH * 8);

    let header = |f: &str| {
        std::fs::read_to_string(dir.join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert!(!header(TEST_INPUTS_FILE).contains("_true"));
    assert!(header(TRAIN_FILE).ends_with("pm25_true,pm10_true,pm25_drift_target,pm10_drift_target"));
    assert_eq!(header(TEST_INPUTS_FILE).split(',').count(), 8 + 43);

    // identity predictions reproduce the baseline reported by `stats`
    let identity = identity_predictions(data, Experiment::Standard);
    let pred_path = data.join("identity.csv");
    write_predictions(&pred_path, Some(&scaler.hash()), &identity).unwrap();
    let scored = evaluation::evaluate(&pred_path, data, Experiment::Standard).unwrap();
    let baseline = identity_mse(data, Experiment::Standard).unwrap();
    assert_eq!(scored.mse, baseline.mse);
    assert_eq!(scored.combined, baseline.combined);
    assert_eq!(scored.n, baseline.n);
    assert!(baseline.combined > 0.0);

    // order of prediction rows is irrelevant
    let mut reversed = identity.clone();
    reversed.reverse();
    let rev_path = data.join("reversed.csv");
    write_predictions(&rev_path, None, &reversed).unwrap();
    assert_eq!(
        evaluation::evaluate(&rev_path, data, Experiment::Standard).unwrap(),
        scored
    );

    // the oracle beats doing nothing on the default drift model
    let run = evaluation::run_oracle(data, Experiment::Standard).unwrap();
    let oracle_path = data.join("oracle.csv");
    write_predictions(&oracle_path, Some(&run.scaler_hash), &run.predictions).unwrap();
    let oracle = evaluation::evaluate(&oracle_path, data, Experiment::Standard).unwrap();
    assert!(
        oracle.combined < baseline.combined,
        "{} vs {}",
        oracle.combined,
        baseline.combined
    );
    let combined_from_parts = (oracle.mse[0] + oracle.mse[1]) / 2.0;
    assert!((oracle.combined - combined_from_parts).abs() <= 1e-15 * combined_from_parts.max(1.0));

    // scatter files
    let out = data.join("eval");
    evaluation::write_scatter(&oracle, &out).unwrap();
    for p in wsn_calib::Pollutant::ALL {
        let text = std::fs::read_to_string(out.join(evaluation::scatter_file(p))).unwrap();
        assert_eq!(text.lines().count(), 1 + oracle.scatter[p.index()].len());
    }
}

#[test]
fn bad_predictions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path();
    written(&small(YEAR), data);
    let rows = identity_predictions(data, Experiment::Limited);
    let path = data.join("p.csv");

    write_predictions(&path, Some("deadbeef"), &rows).unwrap();
    assert!(matches!(
        evaluation::evaluate(&path, data, Experiment::Limited),
        Err(Error::ScalerMismatch { .. })
    ));

    write_predictions(&path, None, &rows[1..]).unwrap();
    assert!(matches!(
        evaluation::evaluate(&path, data, Experiment::Limited),
        Err(Error::MissingRows { missing: 1, .. })
    ));

    let mut extra = rows.clone();
    extra.push(Prediction {
        timestamp: 0,
        sensor_id: 0,
        values: [0.0, 0.0],
    });
    write_predictions(&path, None, &extra).unwrap();
    assert_eq!(
        evaluation::evaluate(&path, data, Experiment::Limited)
            .unwrap()
            .extra_rows,
        1
    );

    std::fs::write(&path, "timestamp,sensor_id,pm25\n0,0,1.0\n").unwrap();
    assert!(matches!(read_predictions(&path), Err(Error::Format { .. })));
    std::fs::write(&path, "timestamp,sensor_id,pm25,pm10\n0,0,NaN,1.0\n").unwrap();
    assert!(matches!(read_predictions(&path), Err(Error::Format { .. })));
}

#[test]
fn sample_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = GenerationConfig::load(&path).unwrap();
    assert_eq!(cfg.to_toml_string(), GenerationConfig::default().to_toml_string());
}
