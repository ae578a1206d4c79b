//! Spatial layout: pollution sources, static sensors and mobile-sensor paths.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Streams;

/// Rejection sampling gives up after this many consecutive misses.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Direction from `self` towards `other`, in radians in `(-π, π]`.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Static,
    Mobile,
}

impl SensorKind {
    pub fn label(self) -> &'static str {
        match self {
            SensorKind::Static => "static",
            SensorKind::Mobile => "mobile",
        }
    }
}

impl std::str::FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(SensorKind::Static),
            "mobile" => Ok(SensorKind::Mobile),
            other => Err(Error::InvalidArgument(format!("unknown sensor kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_sources: usize,
    pub n_static: usize,
    pub n_mobile: usize,
    /// Sources are placed inside this radius; it doubles as the system radius.
    pub source_radius: f64,
    /// Static sensors and mobile-path centres are placed inside this radius.
    pub sensor_radius: f64,
    pub min_separation: f64,
    /// Inclusive bounds on the number of waypoints per mobile path.
    pub waypoint_count: [usize; 2],
    /// Distance of each waypoint from its path centre, drawn uniformly.
    pub waypoint_radius_range: [f64; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_sources: 20,
            n_static: 30,
            n_mobile: 10,
            source_radius: 100.0,
            sensor_radius: 80.0,
            min_separation: 12.0,
            waypoint_count: [5, 15],
            waypoint_radius_range: [5.0, 20.0],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_sources == 0 {
            return bad("scene.n_sources must be at least 1".into());
        }
        if self.n_static + self.n_mobile == 0 {
            return bad("scene needs at least one sensor".into());
        }
        if !(self.source_radius > 0.0) || !(self.sensor_radius > 0.0) {
            return bad("scene radii must be positive".into());
        }
        if !(self.min_separation >= 0.0) {
            return bad("scene.min_separation must be nonnegative".into());
        }
        let [kmin, kmax] = self.waypoint_count;
        if kmin == 0 || kmin > kmax {
            return bad(format!("scene.waypoint_count {kmin}..={kmax} is empty or zero"));
        }
        let [rmin, rmax] = self.waypoint_radius_range;
        if !(rmin >= 0.0 && rmin <= rmax && rmax.is_finite()) {
            return bad(format!("scene.waypoint_radius_range [{rmin}, {rmax}] is invalid"));
        }
        Ok(())
    }

    /// Farthest any sensor can be from the origin.
    pub fn max_sensor_extent(&self) -> f64 {
        let mobile = if self.n_mobile > 0 {
            self.sensor_radius + self.waypoint_radius_range[1]
        } else {
            0.0
        };
        self.sensor_radius.max(mobile)
    }

    fn path_shape(&self) -> PathShape {
        PathShape {
            waypoint_count: self.waypoint_count,
            radius_range: self.waypoint_radius_range,
        }
    }
}

/// How waypoints are scattered around a mobile-path centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathShape {
    pub waypoint_count: [usize; 2],
    pub radius_range: [f64; 2],
}

impl Default for PathShape {
    fn default() -> Self {
        SceneConfig::default().path_shape()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilePath {
    pub center: Point,
    pub waypoints: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub system_radius: f64,
    pub sources: Vec<Point>,
    pub static_sensors: Vec<Point>,
    pub mobile_paths: Vec<MobilePath>,
}

/// Uniform point in the disk of the given radius centred on the origin.
pub fn sample_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = TAU * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Rejection-samples `count` points uniformly in a disk with pairwise
/// distance at least `min_separation`.
pub fn place_points<R: Rng + ?Sized>(
    count: usize,
    radius: f64,
    min_separation: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if count == 0 {
        return Err(Error::InvalidArgument("place_points needs count >= 1".into()));
    }
    if !(radius > 0.0) || !(min_separation >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "place_points needs radius > 0 and min_separation >= 0 (got {radius}, {min_separation})"
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut rejections = 0;
    while points.len() < count {
        let candidate = sample_in_disk(radius, rng);
        if points.iter().all(|p: &Point| p.distance(&candidate) >= min_separation) {
            points.push(candidate);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::Capacity {
                    requested: count,
                    placed: points.len(),
                    radius,
                    min_separation,
                    rejections,
                });
            }
        }
    }
    Ok(points)
}

/// Scatters `k ~ U{kmin..=kmax}` waypoints around `center`, each on a circle
/// whose radius is drawn independently per waypoint.
pub fn sample_path_around<R: Rng + ?Sized>(center: Point, shape: &PathShape, rng: &mut R) -> MobilePath {
    let [kmin, kmax] = shape.waypoint_count;
    let [rmin, rmax] = shape.radius_range;
    let k = rng.random_range(kmin..=kmax);
    let waypoints = (0..k)
        .map(|_| {
            let r = rmin + (rmax - rmin) * rng.random::<f64>();
            let theta = TAU * rng.random::<f64>();
            Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
        })
        .collect();
    MobilePath { center, waypoints }
}

/// Draws a single standalone path: centre uniform in the disk of
/// `center_radius`, waypoints per [`sample_path_around`].
pub fn sample_mobile_path<R: Rng + ?Sized>(center_radius: f64, shape: &PathShape, rng: &mut R) -> Result<MobilePath> {
    let center = place_points(1, center_radius, 0.0, rng)?[0];
    Ok(sample_path_around(center, shape, rng))
}

/// A sensor addressed by kind and index within that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorRef {
    pub kind: SensorKind,
    pub index: usize,
}

impl Scene {
    pub fn generate(config: &SceneConfig, streams: &Streams) -> Result<Scene> {
        config.validate()?;
        let sources = place_points(
            config.n_sources,
            config.source_radius,
            config.min_separation,
            &mut streams.stream("scene/sources"),
        )?;
        let static_sensors = if config.n_static > 0 {
            place_points(
                config.n_static,
                config.sensor_radius,
                config.min_separation,
                &mut streams.stream("scene/static-sensors"),
            )?
        } else {
            Vec::new()
        };
        let mobile_paths = if config.n_mobile > 0 {
            let centers = place_points(
                config.n_mobile,
                config.sensor_radius,
                config.min_separation,
                &mut streams.stream("scene/mobile-centers"),
            )?;
            let shape = config.path_shape();
            centers
                .into_iter()
                .enumerate()
                .map(|(k, c)| sample_path_around(c, &shape, &mut streams.stream(&format!("scene/mobile-path-{k}"))))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Scene {
            system_radius: config.source_radius,
            sources,
            static_sensors,
            mobile_paths,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.static_sensors.len() + self.mobile_paths.len()
    }

    /// Maps a global sensor id (statics first, then mobiles) to kind and local index.
    pub fn sensor_ref(&self, id: usize) -> Result<SensorRef> {
        let n_static = self.static_sensors.len();
        if id < n_static {
            Ok(SensorRef {
                kind: SensorKind::Static,
                index: id,
            })
        } else if id < self.n_sensors() {
            Ok(SensorRef {
                kind: SensorKind::Mobile,
                index: id - n_static,
            })
        } else {
            Err(Error::SensorIndex {
                kind: "global",
                index: id,
                count: self.n_sensors(),
            })
        }
    }

    pub fn position_at(&self, sensor: SensorRef, t: usize) -> Result<Point> {
        match sensor.kind {
            SensorKind::Static => self
                .static_sensors
                .get(sensor.index)
                .copied()
                .ok_or(Error::SensorIndex {
                    kind: "static",
                    index: sensor.index,
                    count: self.static_sensors.len(),
                }),
            SensorKind::Mobile => {
                let path = self.mobile_paths.get(sensor.index).ok_or(Error::SensorIndex {
                    kind: "mobile",
                    index: sensor.index,
                    count: self.mobile_paths.len(),
                })?;
                Ok(path.waypoints[t % path.waypoints.len()])
            }
        }
    }

    /// Position of a sensor by global id. Panics on an invalid id.
    pub fn sensor_position(&self, id: usize, t: usize) -> Point {
        let n_static = self.static_sensors.len();
        if id < n_static {
            self.static_sensors[id]
        } else {
            let wp = &self.mobile_paths[id - n_static].waypoints;
            wp[t % wp.len()]
        }
    }

    pub fn sensor_kind(&self, id: usize) -> SensorKind {
        if id < self.static_sensors.len() {
            SensorKind::Static
        } else {
            SensorKind::Mobile
        }
    }

    /// Positions of every sensor at step `t`, indexed by global id.
    pub fn positions_at(&self, t: usize) -> Vec<Point> {
        (0..self.n_sensors()).map(|id| self.sensor_position(id, t)).collect()
    }
}
