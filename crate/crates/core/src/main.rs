use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wsn_calib::dataset::{
    self, fmt_f64, identity_mse, materialize_split, readings_file, split_for, Experiment, GenerationConfig, Manifest,
    ReadingsReader,
};
use wsn_calib::evaluation::{self, scatter_file, CalibrationResult};
use wsn_calib::{plot, Pollutant};

#[derive(Parser)]
#[command(
    name = "wsn-calib",
    version,
    about = "Synthetic PM sensor-network datasets and calibration scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a network and write the dataset directory.
    Generate {
        /// TOML configuration; defaults apply to every missing key.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
    /// Materialize the normalized train/validation/test files of an experiment.
    Split {
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print generation statistics and identity-calibration MSE.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a prediction file against the test partition.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        experiment: Experiment,
        /// Where to write scatter_*.csv and result.json (default: next to --pred).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the least-squares oracle on training truth and write test predictions.
    Oracle {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG charts.
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Predicted vs true drift from the scatter files written by `evaluate`.
    Scatter {
        /// Directory holding scatter_pm25.csv and scatter_pm10.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// True and drifted readings of one sensor.
    Series {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sensor: usize,
        #[arg(long, default_value_t = 1)]
        realization: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = wsn_calib::MONTH)]
        len: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => generate(config.as_deref(), &out),
        Command::DefaultConfig => {
            print!("{}", GenerationConfig::default().to_toml_string());
            Ok(())
        }
        Command::Split { experiment, data } => {
            let summary = materialize_split(&data, experiment)?;
            println!(
                "{experiment}: train {} rows, validation {} rows, test {} rows -> {}",
                summary.rows.train,
                summary.rows.validation,
                summary.rows.test,
                dataset::split_dir(&data, experiment).display()
            );
            println!("scaler_hash {}", summary.scaler_hash);
            Ok(())
        }
        Command::Stats { data } => stats(&data),
        Command::Evaluate {
            pred,
            data,
            experiment,
            out,
        } => {
            let result = evaluation::evaluate(&pred, &data, experiment)?;
            let out = out.unwrap_or_else(|| pred.parent().map(Path::to_path_buf).unwrap_or_default());
            evaluation::write_scatter(&result, &out)?;
            let json = serde_json::to_string_pretty(&result)?;
            std::fs::write(out.join("result.json"), json + "\n")
                .with_context(|| format!("writing {}", out.join("result.json").display()))?;
            print_result(experiment, &result);
            Ok(())
        }
        Command::Oracle { data, experiment, out } => {
            let run = evaluation::run_oracle(&data, experiment)?;
            evaluation::write_predictions(&out, Some(&run.scaler_hash), &run.predictions)?;
            println!(
                "oracle for {experiment}: {} sensors, {} predictions -> {}",
                run.calibrator.models.len(),
                run.predictions.len(),
                out.display()
            );
            Ok(())
        }
        Command::Plot(cmd) => plot_command(cmd),
    }
}

fn generate(config: Option<&Path>, out: &Path) -> Result<()> {
    let config = match config {
        Some(path) => GenerationConfig::load(path)?,
        None => GenerationConfig::default(),
    };
    let started = Instant::now();
    let ds = dataset::generate(&config)?;
    ds.write(out)?;
    println!(
        "generated {} sensors x {} timesteps x {} realizations in {:.1}s -> {}",
        ds.scene.n_sensors(),
        ds.timesteps(),
        ds.realizations.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn stats(data: &Path) -> Result<()> {
    let manifest = Manifest::load(data)?;
    let s = &manifest.statistics;
    println!("seed                      {}", manifest.config.master_seed);
    println!(
        "timesteps                 {} (+{} warmup)",
        manifest.timesteps, manifest.warmup
    );
    println!("sensors                   {}", manifest.n_sensors());
    println!("realizations              {}", manifest.n_realizations());
    println!("attenuation floor hits    {}", s.attenuation_floor_hits);
    println!("emission zero clamps      {}", s.emission_zero_clamps);
    for p in Pollutant::ALL {
        let (t, d) = (s.true_range[p.index()], s.drifted_range[p.index()]);
        println!(
            "{:<25} true [{}, {}]  drifted [{}, {}]",
            p.label(),
            fmt_f64(t.min),
            fmt_f64(t.max),
            fmt_f64(d.min),
            fmt_f64(d.max)
        );
        println!(
            "{:<25} {}",
            format!("{} raw drift mse", p.label()),
            fmt_f64(s.raw_drift_mse[p.index()])
        );
    }
    println!(
        "wind speed                [{}, {}]",
        fmt_f64(s.wind_speed_range.min),
        fmt_f64(s.wind_speed_range.max)
    );
    println!("|drift| < half max share  {}", fmt_f64(s.drift_within_half_share));
    println!();
    println!("identity-calibration MSE (normalized units, test partition)");
    println!("{:<12}{:>14}{:>14}{:>14}", "experiment", "All", "PM2.5", "PM10");
    for e in Experiment::ALL {
        if split_for(&manifest, e).is_err() {
            println!("{:<12}{:>14}", e.name(), "n/a");
            continue;
        }
        let id = identity_mse(data, e)?;
        println!(
            "{:<12}{:>14.6e}{:>14.6e}{:>14.6e}",
            e.name(),
            id.combined,
            id.mse[0],
            id.mse[1]
        );
    }
    Ok(())
}

fn print_result(experiment: Experiment, r: &CalibrationResult) {
    println!("{:<12}{:>14}{:>14}{:>14}", "experiment", "All", "PM2.5", "PM10");
    println!(
        "{:<12}{:>14.6e}{:>14.6e}{:>14.6e}",
        experiment.name(),
        r.combined,
        r.mse[0],
        r.mse[1]
    );
    println!(
        "{:<12}{:>14}{:>14.6e}{:>14.6e}",
        "drift mse", "", r.drift_mse[0], r.drift_mse[1]
    );
    println!("{} test rows scored, {} extra rows ignored", r.n, r.extra_rows);
}

fn plot_command(cmd: PlotCommand) -> Result<()> {
    match cmd {
        PlotCommand::Scatter { input, out } => {
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for p in Pollutant::ALL {
                let path = input.join(scatter_file(p));
                let mut reader =
                    csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
                let mut points = Vec::new();
                for rec in reader.records() {
                    let rec = rec?;
                    let x: f64 = rec.get(2).unwrap_or("").parse().context("bad true_drift")?;
                    let y: f64 = rec.get(3).unwrap_or("").parse().context("bad predicted_drift")?;
                    points.push((x, y));
                }
                let svg = plot::scatter_svg(
                    &points,
                    &format!("{} drift: predicted vs true", p.label()),
                    "true drift",
                    "predicted drift",
                );
                let target = out.join(format!("scatter_{}.svg", p.label()));
                std::fs::write(&target, svg).with_context(|| format!("writing {}", target.display()))?;
            }
            Ok(())
        }
        PlotCommand::Series {
            data,
            sensor,
            realization,
            start,
            len,
            out,
        } => {
            let path = data.join(readings_file(realization));
            let mut reader = ReadingsReader::open(&path)?;
            let mut cols: [Vec<f64>; 4] = Default::default();
            while let Some(row) = reader.next_row()? {
                if row.timestamp >= start + len {
                    break;
                }
                if row.sensor_id == sensor && row.timestamp >= start {
                    for p in 0..2 {
                        cols[2 * p].push(row.truth[p]);
                        cols[2 * p + 1].push(row.drifted[p]);
                    }
                }
            }
            if cols[0].is_empty() {
                bail!("no rows for sensor {sensor} in [{start}, {})", start + len);
            }
            let svg = plot::series_svg(
                &[
                    ("pm25 true", &cols[0]),
                    ("pm25 drifted", &cols[1]),
                    ("pm10 true", &cols[2]),
                    ("pm10 drifted", &cols[3]),
                ],
                start,
                &format!("sensor {sensor}, realization {realization}"),
                "timestamp",
                "reading",
            );
            std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}
