use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::{Dataset, Manifest, MANIFEST_FILE};
use crate::context::{ContextVector, CONTEXT_WIDTH};
use crate::error::{Error, Result};
use crate::phenomenon::WeatherSample;
use crate::scene::{Point, SensorKind};
use crate::MONTH;

pub const WEATHER_FILE: &str = "weather.csv";
pub const WEATHER_HEADER: [&str; 5] = ["timestamp", "temperature", "humidity", "wind_speed", "wind_direction"];
pub const READINGS_HEADER: [&str; 11] = [
    "timestamp",
    "sensor_id",
    "kind",
    "x",
    "y",
    "pm25_true",
    "pm10_true",
    "pm25_drifted",
    "pm10_drifted",
    "pm25_drift_target",
    "pm10_drift_target",
];
pub const CONTEXT_HEADER_PREFIX: [&str; 2] = ["timestamp", "sensor_id"];

pub fn readings_file(realization: usize) -> String {
    format!("readings_r{realization}.csv")
}

pub fn context_file(realization: usize) -> String {
    format!("context_r{realization}.csv")
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn push_f64(out: &mut String, v: f64) {
    write!(out, "{v:?}").expect("writing to a String cannot fail");
}

pub(crate) fn push_row(out: &mut String, fields: &[f64]) {
    for v in fields {
        out.push(',');
        push_f64(out, *v);
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_all(w: &mut impl Write, path: &Path, text: &str) -> Result<()> {
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub(crate) fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(super) fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest::from_dataset(ds);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_text(&dir.join(MANIFEST_FILE), &json)?;
    write_weather(ds, &dir.join(WEATHER_FILE))?;
    for r in &ds.realizations {
        write_realization(ds, r, dir)?;
    }
    Ok(())
}

fn write_weather(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut text = WEATHER_HEADER.join(",");
    text.push('\n');
    for t in 0..ds.timesteps() {
        let s = ds.weather.at(ds.warmup + t);
        write!(text, "{t}").unwrap();
        push_row(&mut text, &[s.temperature, s.humidity, s.wind_speed, s.wind_direction]);
        text.push('\n');
    }
    write_all(&mut w, path, &text)?;
    finish(w, path)
}

fn write_realization(ds: &Dataset, r: &super::Realization, dir: &Path) -> Result<()> {
    let readings_path = dir.join(readings_file(r.index));
    let context_path = dir.join(context_file(r.index));
    let mut readings = create(&readings_path)?;
    let mut context = create(&context_path)?;

    let mut header = READINGS_HEADER.join(",");
    header.push('\n');
    write_all(&mut readings, &readings_path, &header)?;
    let mut header = CONTEXT_HEADER_PREFIX.join(",");
    for name in ContextVector::column_names() {
        header.push(',');
        header.push_str(&name);
    }
    header.push('\n');
    write_all(&mut context, &context_path, &header)?;

    let total = ds.timesteps();
    for block in (0..total).step_by(MONTH) {
        let chunks: Vec<(String, String)> = (block..(block + MONTH).min(total))
            .into_par_iter()
            .map(|t| format_step(ds, r, t))
            .collect();
        for (a, b) in chunks {
            write_all(&mut readings, &readings_path, &a)?;
            write_all(&mut context, &context_path, &b)?;
        }
    }
    finish(readings, &readings_path)?;
    finish(context, &context_path)
}

fn format_step(ds: &Dataset, r: &super::Realization, t: usize) -> (String, String) {
    let internal = ds.warmup + t;
    let contexts = ds.contexts_at(r, t);
    let mut readings = String::with_capacity(160 * contexts.len());
    let mut context = String::with_capacity(400 * contexts.len());
    for (id, ctx) in contexts.iter().enumerate() {
        let p = ds.scene.sensor_position(id, internal);
        let y = ds.truth[id][t];
        let x = r.drifted[id][t];
        write!(readings, "{t},{id},{}", ds.scene.sensor_kind(id).label()).unwrap();
        push_row(
            &mut readings,
            &[p.x, p.y, y[0], y[1], x[0], x[1], x[0] - y[0], x[1] - y[1]],
        );
        readings.push('\n');

        write!(context, "{t},{id}").unwrap();
        push_row(&mut context, &ctx.to_columns());
        context.push('\n');
    }
    (readings, context)
}

/// A csv reader whose header has been checked against `expected`.
pub(crate) struct Table {
    reader: csv::Reader<File>,
    path: PathBuf,
    record: csv::StringRecord,
}

impl Table {
    pub(crate) fn open(path: &Path, expected: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let header = reader.headers()?.clone();
        if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != *b) {
            return Err(Error::format(
                path,
                format!(
                    "unexpected header {:?}, expected {:?}",
                    header.iter().collect::<Vec<_>>(),
                    expected
                ),
            ));
        }
        Ok(Self {
            reader,
            path: path.to_path_buf(),
            record: csv::StringRecord::new(),
        })
    }

    /// Advances to the next record; `false` at end of file.
    pub(crate) fn advance(&mut self) -> Result<bool> {
        Ok(self.reader.read_record(&mut self.record)?)
    }

    pub(crate) fn field<T: FromStr>(&self, idx: usize) -> Result<T> {
        let raw = self.record.get(idx).unwrap_or("");
        raw.parse().map_err(|_| {
            let line = self.record.position().map_or(0, |p| p.line());
            Error::format(
                &self.path,
                format!("line {line}: cannot parse column {idx} value {raw:?}"),
            )
        })
    }

    pub(crate) fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_weather(dir: &Path) -> Result<Vec<WeatherSample>> {
    let path = dir.join(WEATHER_FILE);
    let mut table = Table::open(&path, &WEATHER_HEADER)?;
    let mut out = Vec::new();
    while table.advance()? {
        let t: usize = table.field(0)?;
        if t != out.len() {
            return Err(Error::format(&path, format!("timestamps out of order at {t}")));
        }
        out.push(WeatherSample {
            temperature: table.field(1)?,
            humidity: table.field(2)?,
            wind_speed: table.field(3)?,
            wind_direction: table.field(4)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingRow {
    pub timestamp: usize,
    pub sensor_id: usize,
    pub kind: SensorKind,
    pub position: Point,
    pub truth: [f64; 2],
    pub drifted: [f64; 2],
    pub drift_target: [f64; 2],
}

/// Streams rows of a `readings_r{k}.csv` file.
pub struct ReadingsReader {
    table: Table,
}

impl ReadingsReader {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            table: Table::open(path, &READINGS_HEADER)?,
        })
    }

    pub fn next_row(&mut self) -> Result<Option<ReadingRow>> {
        if !self.table.advance()? {
            return Ok(None);
        }
        let t = &self.table;
        let kind: String = t.field(2)?;
        Ok(Some(ReadingRow {
            timestamp: t.field(0)?,
            sensor_id: t.field(1)?,
            kind: kind
                .parse()
                .map_err(|e: Error| Error::format(t.path(), e.to_string()))?,
            position: Point::new(t.field(3)?, t.field(4)?),
            truth: [t.field(5)?, t.field(6)?],
            drifted: [t.field(7)?, t.field(8)?],
            drift_target: [t.field(9)?, t.field(10)?],
        }))
    }
}

impl Iterator for ReadingsReader {
    type Item = Result<ReadingRow>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_row().transpose()
    }
}

pub(crate) fn context_header() -> Vec<String> {
    CONTEXT_HEADER_PREFIX
        .iter()
        .map(|s| s.to_string())
        .chain(ContextVector::column_names())
        .collect()
}

/// Streams `(timestamp, sensor_id, columns)` from a `context_r{k}.csv` file.
pub(crate) struct ContextReader {
    table: Table,
}

impl ContextReader {
    pub(crate) fn open(path: &Path) -> Result<Self> {
        let header = context_header();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        Ok(Self {
            table: Table::open(path, &refs)?,
        })
    }

    pub(crate) fn next_row(&mut self) -> Result<Option<(usize, usize, [f64; CONTEXT_WIDTH])>> {
        if !self.table.advance()? {
            return Ok(None);
        }
        let mut cols = [0.0; CONTEXT_WIDTH];
        for (k, c) in cols.iter_mut().enumerate() {
            *c = self.table.field(2 + k)?;
        }
        Ok(Some((self.table.field(0)?, self.table.field(1)?, cols)))
    }
}
