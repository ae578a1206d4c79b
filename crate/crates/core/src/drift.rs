//! Weather-coupled, time-growing sensor drift.
//!
//! The drifted output of a sensor with drift-free reading `y` at step `t` is
//!
//! ```text
//! x = ((1-τ) + τ·α)·y^((1-τ) + τ·β) + τ·c + ε
//! α = f_α·T̃_α·H̃_α·D̃_α     β = f_β·T̃_β·H̃_β·D̃_β     c = f_c + T̃_c + H̃_c + D̃_c
//! ```
//!
//! where `T̃`, `H̃` and `D̃` are temperature, humidity and reading history
//! min-max scaled into per-sensor random sub-ranges, and `τ = min(1, r·t)`
//! ramps each sensor from undrifted to fully drifted.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phenomenon::NormalSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScaleRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_within(&self, parent: &ScaleRange) -> bool {
        parent.lo <= self.lo && self.lo <= self.hi && self.hi <= parent.hi
    }

    /// Random sub-interval of `parent`: two uniform draws, ordered.
    pub fn sample_within<R: Rng + ?Sized>(parent: &ScaleRange, rng: &mut R) -> ScaleRange {
        let width = parent.hi - parent.lo;
        let a = parent.lo + width * rng.random::<f64>();
        let b = parent.lo + width * rng.random::<f64>();
        ScaleRange::new(a.min(b), a.max(b))
    }
}

/// Target sub-ranges for the three coupled inputs of one error source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRanges {
    pub temperature: ScaleRange,
    pub humidity: ScaleRange,
    pub history: ScaleRange,
}

impl CouplingRanges {
    fn sample<R: Rng + ?Sized>(parent: &ScaleRange, rng: &mut R) -> Self {
        Self {
            temperature: ScaleRange::sample_within(parent, rng),
            humidity: ScaleRange::sample_within(parent, rng),
            history: ScaleRange::sample_within(parent, rng),
        }
    }

    pub fn all(&self) -> [ScaleRange; 3] {
        [self.temperature, self.humidity, self.history]
    }
}

/// Drift parameters of one pollutant channel of one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDrift {
    pub f_alpha: f64,
    pub f_beta: f64,
    pub f_c: f64,
    pub alpha: CouplingRanges,
    pub beta: CouplingRanges,
    pub offset: CouplingRanges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorDrift {
    /// Per-step increase of the ramp τ.
    pub ramp_rate: f64,
    /// Indexed by [`crate::Pollutant::index`].
    pub channels: [ChannelDrift; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampMode {
    /// τ = min(1, r·t).
    Linear,
    /// τ = 1 from the first step.
    Saturated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub f_alpha: NormalSpec,
    pub f_beta: NormalSpec,
    pub f_c: NormalSpec,
    /// The ramp rate is drawn from U[lo/T, hi/T].
    pub ramp_rate_factors: [f64; 2],
    pub ramp: RampMode,
    /// When false, temperature, humidity and history leave α, β and c untouched.
    pub weather_coupling: bool,
    pub noise_sd: f64,
    pub alpha_interval: ScaleRange,
    pub beta_interval: ScaleRange,
    pub offset_interval: ScaleRange,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            f_alpha: NormalSpec { mean: 1.0, sd: 0.1 },
            f_beta: NormalSpec { mean: 1.0, sd: 0.02 },
            f_c: NormalSpec { mean: 0.0, sd: 2.0 },
            ramp_rate_factors: [0.5, 2.0],
            ramp: RampMode::Linear,
            weather_coupling: true,
            noise_sd: 0.05,
            alpha_interval: ScaleRange::new(0.95, 1.05),
            beta_interval: ScaleRange::new(0.99, 1.01),
            offset_interval: ScaleRange::new(-0.2, 0.2),
        }
    }
}

impl DriftConfig {
    /// Linear drift: β ≡ 1, τ ≡ 1, no weather coupling. The drifted reading is
    /// exactly `f_α·y + f_c + ε`.
    pub fn linear(noise_sd: f64) -> Self {
        Self {
            f_beta: NormalSpec { mean: 1.0, sd: 0.0 },
            ramp: RampMode::Saturated,
            weather_coupling: false,
            noise_sd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        for (name, spec) in [("f_alpha", self.f_alpha), ("f_beta", self.f_beta), ("f_c", self.f_c)] {
            if !spec.mean.is_finite() || !(spec.sd >= 0.0) || !spec.sd.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "drift.{name} needs finite mean and sd >= 0"
                )));
            }
        }
        let [lo, hi] = self.ramp_rate_factors;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("drift.ramp_rate_factors must satisfy 0 < lo <= hi");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("drift.noise_sd must be finite and >= 0");
        }
        for r in [self.alpha_interval, self.beta_interval, self.offset_interval] {
            if !(r.lo <= r.hi && r.lo.is_finite() && r.hi.is_finite()) {
                return bad("drift intervals must be finite with lo <= hi");
            }
        }
        if self.beta_interval.lo <= 0.0 {
            return bad("drift.beta_interval must stay positive");
        }
        Ok(())
    }
}

pub fn sample_channel<R: Rng + ?Sized>(config: &DriftConfig, rng: &mut R) -> ChannelDrift {
    ChannelDrift {
        f_alpha: config.f_alpha.sample(rng),
        f_beta: config.f_beta.sample(rng),
        f_c: config.f_c.sample(rng),
        alpha: CouplingRanges::sample(&config.alpha_interval, rng),
        beta: CouplingRanges::sample(&config.beta_interval, rng),
        offset: CouplingRanges::sample(&config.offset_interval, rng),
    }
}

/// Draws one sensor's drift parameters for a run of `timesteps` steps.
pub fn sample_drift_params<R: Rng + ?Sized>(config: &DriftConfig, timesteps: usize, rng: &mut R) -> SensorDrift {
    let [lo, hi] = config.ramp_rate_factors;
    let n = timesteps.max(1) as f64;
    let ramp_rate = lo / n + (hi - lo) / n * rng.random::<f64>();
    SensorDrift {
        ramp_rate,
        channels: [sample_channel(config, rng), sample_channel(config, rng)],
    }
}

/// Min-max maps `values` onto `range`; a constant input maps to the midpoint.
pub fn scale_series(values: &[f64], range: ScaleRange) -> Vec<f64> {
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = max - min;
    if !(span > 0.0) {
        return vec![range.midpoint(); values.len()];
    }
    let width = range.hi - range.lo;
    values.iter().map(|&v| range.lo + width * (v - min) / span).collect()
}

pub fn ramp(rate: f64, t: usize, mode: RampMode) -> f64 {
    match mode {
        RampMode::Linear => (rate * t as f64).min(1.0),
        RampMode::Saturated => 1.0,
    }
}

/// Previous drift-free reading at each step; the first step repeats itself.
pub fn history_series(y: &[f64]) -> Vec<f64> {
    match y.first() {
        None => Vec::new(),
        Some(&first) => std::iter::once(first).chain(y[..y.len() - 1].iter().copied()).collect(),
    }
}

/// Scalar drift equation.
pub fn drifted_value(y: f64, tau: f64, alpha: f64, beta: f64, c: f64, noise: f64) -> f64 {
    let keep = 1.0 - tau;
    (keep + tau * alpha) * y.powf(keep + tau * beta) + tau * c + noise
}

/// Time-varying α, β and c for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFactors {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub offset: Vec<f64>,
}

pub fn drift_factors(
    channel: &ChannelDrift,
    temperature: &[f64],
    humidity: &[f64],
    history: &[f64],
    coupling: bool,
) -> DriftFactors {
    let n = temperature.len();
    if !coupling {
        return DriftFactors {
            alpha: vec![channel.f_alpha; n],
            beta: vec![channel.f_beta; n],
            offset: vec![channel.f_c; n],
        };
    }
    let product = |f: f64, r: &CouplingRanges| -> Vec<f64> {
        let t = scale_series(temperature, r.temperature);
        let h = scale_series(humidity, r.humidity);
        let d = scale_series(history, r.history);
        (0..n).map(|i| f * t[i] * h[i] * d[i]).collect()
    };
    let t = scale_series(temperature, channel.offset.temperature);
    let h = scale_series(humidity, channel.offset.humidity);
    let d = scale_series(history, channel.offset.history);
    DriftFactors {
        alpha: product(channel.f_alpha, &channel.alpha),
        beta: product(channel.f_beta, &channel.beta),
        offset: (0..n).map(|i| channel.f_c + t[i] + h[i] + d[i]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftedReading {
    pub drifted: f64,
    /// `drifted - true`.
    pub drift_target: f64,
}

/// Settings shared by every channel of a drift pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSettings {
    pub ramp: RampMode,
    pub weather_coupling: bool,
    pub noise_sd: f64,
}

impl From<&DriftConfig> for DriftSettings {
    fn from(c: &DriftConfig) -> Self {
        Self {
            ramp: c.ramp,
            weather_coupling: c.weather_coupling,
            noise_sd: c.noise_sd,
        }
    }
}

/// Drifts one channel of one sensor. `temperature`, `humidity` and `history`
/// must be aligned with `y`; step 0 of `y` is ramp step 0.
#[allow(clippy::too_many_arguments)]
pub fn apply_drift<R: Rng + ?Sized>(
    y: &[f64],
    channel: &ChannelDrift,
    ramp_rate: f64,
    temperature: &[f64],
    humidity: &[f64],
    history: &[f64],
    settings: DriftSettings,
    rng: &mut R,
) -> Result<Vec<DriftedReading>> {
    for other in [temperature.len(), humidity.len(), history.len()] {
        if other != y.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: other,
            });
        }
    }
    if let Some((t, &value)) = y.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeReading { t, value });
    }
    let factors = drift_factors(channel, temperature, humidity, history, settings.weather_coupling);
    Ok(y.iter()
        .enumerate()
        .map(|(t, &yt)| {
            let z: f64 = rng.sample(StandardNormal);
            let tau = ramp(ramp_rate, t, settings.ramp);
            let x = drifted_value(
                yt,
                tau,
                factors.alpha[t],
                factors.beta[t],
                factors.offset[t],
                settings.noise_sd * z,
            );
            DriftedReading {
                drifted: x,
                drift_target: x - yt,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use proptest::prelude::*;

    fn rng(name: &str) -> crate::rng::SimRng {
        Streams::new(5).stream(name)
    }

    #[test]
    fn sampled_subranges_inside_parents() {
        let cfg = DriftConfig::default();
        let mut r = rng("params");
        for _ in 0..500 {
            let p = sample_drift_params(&cfg, 8640, &mut r);
            assert!(p.ramp_rate >= 0.5 / 8640.0 && p.ramp_rate <= 2.0 / 8640.0);
            for ch in &p.channels {
                for s in ch.alpha.all() {
                    assert!(s.is_within(&cfg.alpha_interval));
                }
                for s in ch.beta.all() {
                    assert!(s.is_within(&cfg.beta_interval));
                }
                for s in ch.offset.all() {
                    assert!(s.is_within(&cfg.offset_interval));
                }
            }
        }
    }

    #[test]
    fn ramp_saturates_at_one() {
        let t_total = 8640;
        let rate = 2.0 / t_total as f64;
        assert_eq!(ramp(rate, 0, RampMode::Linear), 0.0);
        assert!((ramp(rate, t_total / 2, RampMode::Linear) - 1.0).abs() < 1e-12);
        assert_eq!(ramp(rate, t_total / 2 + 1, RampMode::Linear), 1.0);
        assert_eq!(ramp(rate, t_total - 1, RampMode::Linear), 1.0);
        let mut prev = 0.0;
        for t in 0..t_total {
            let tau = ramp(rate, t, RampMode::Linear);
            assert!(tau >= prev && tau <= 1.0);
            prev = tau;
        }
        assert_eq!(ramp(rate, 0, RampMode::Saturated), 1.0);
    }

    #[test]
    fn f_beta_gaussian_tail() {
        // P(|Z| > 5) ≈ 5.7e-7, so 200k draws should almost never leave 1 ± 0.1.
        let cfg = DriftConfig::default();
        let mut r = rng("tail");
        let n = 200_000;
        let outside = (0..n)
            .filter(|_| (cfg.f_beta.sample(&mut r) - 1.0).abs() > 5.0 * 0.02)
            .count();
        assert!(outside <= 2, "{outside} of {n} draws outside 5 sd");
    }

    #[test]
    fn scale_series_examples() {
        let a = scale_series(&[0.0, 1.0], ScaleRange::new(0.95, 1.05));
        assert_eq!(a, vec![0.95, 1.05]);
        let b = scale_series(&[5.0, 5.0, 5.0], ScaleRange::new(0.99, 1.01));
        assert_eq!(b, vec![1.0, 1.0, 1.0]);
        let c = scale_series(&[0.0, 5.0, 10.0], ScaleRange::new(-0.2, 0.2));
        assert!((c[0] + 0.2).abs() < 1e-15 && c[1].abs() < 1e-15 && (c[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn drift_equation_cases() {
        assert_eq!(drifted_value(7.3, 0.0, 1.3, 1.1, 4.0, 0.0), 7.3);
        let (a, b, c, y) = (1.07, 1.02, -1.5, 12.0);
        assert!((drifted_value(y, 1.0, a, b, c, 0.0) - (a * y.powf(b) + c)).abs() < 1e-12);
        let x = drifted_value(10.0, 0.5, 1.04, 1.0, 2.0, 0.0);
        assert!((x - 11.2).abs() < 1e-12, "{x}");
    }

    #[test]
    fn history_shifts_by_one() {
        assert_eq!(history_series(&[3.0, 4.0, 5.0]), vec![3.0, 3.0, 4.0]);
        assert!(history_series(&[]).is_empty());
    }

    fn fixed_channel() -> ChannelDrift {
        let r = |lo, hi| ScaleRange::new(lo, hi);
        ChannelDrift {
            f_alpha: 1.08,
            f_beta: 1.01,
            f_c: -0.7,
            alpha: CouplingRanges {
                temperature: r(0.96, 1.0),
                humidity: r(0.97, 1.04),
                history: r(1.0, 1.02),
            },
            beta: CouplingRanges {
                temperature: r(0.995, 1.0),
                humidity: r(0.991, 1.003),
                history: r(1.0, 1.01),
            },
            offset: CouplingRanges {
                temperature: r(-0.1, 0.0),
                humidity: r(0.05, 0.15),
                history: r(-0.2, 0.2),
            },
        }
    }

    #[test]
    fn constant_weather_reduces_to_midpoints() {
        let ch = fixed_channel();
        let n = 50;
        let f = drift_factors(&ch, &vec![10.0; n], &vec![80.0; n], &vec![3.0; n], true);
        let mid = |c: &CouplingRanges| (c.temperature.midpoint(), c.humidity.midpoint(), c.history.midpoint());
        let (ta, ha, da) = mid(&ch.alpha);
        let (tb, hb, db) = mid(&ch.beta);
        let (tc, hc, dc) = mid(&ch.offset);
        for i in 0..n {
            assert!((f.alpha[i] - ch.f_alpha * ta * ha * da).abs() < 1e-15);
            assert!((f.beta[i] - ch.f_beta * tb * hb * db).abs() < 1e-15);
            assert!((f.offset[i] - (ch.f_c + tc + hc + dc)).abs() < 1e-15);
        }
    }

    #[test]
    fn undrifted_start_and_noiseless_identity() {
        let ch = fixed_channel();
        let y: Vec<f64> = (0..100).map(|t| 1.0 + (t % 13) as f64).collect();
        let temp: Vec<f64> = (0..100).map(|t| 10.0 + (t as f64 * 0.3).sin()).collect();
        let hum: Vec<f64> = (0..100).map(|t| 80.0 + (t as f64 * 0.2).cos()).collect();
        let hist = history_series(&y);
        let settings = DriftSettings {
            ramp: RampMode::Linear,
            weather_coupling: true,
            noise_sd: 0.0,
        };
        let out = apply_drift(&y, &ch, 0.0, &temp, &hum, &hist, settings, &mut rng("a")).unwrap();
        assert!(out
            .iter()
            .zip(&y)
            .all(|(r, &yt)| r.drifted == yt && r.drift_target == 0.0));

        let out = apply_drift(&y, &ch, 0.01, &temp, &hum, &hist, settings, &mut rng("a")).unwrap();
        assert_eq!(out[0].drift_target, 0.0);
        assert!(out[99].drift_target != 0.0);
    }

    #[test]
    fn saturated_matches_closed_form() {
        let ch = fixed_channel();
        let y: Vec<f64> = (0..60).map(|t| 2.0 + (t % 7) as f64 * 3.0).collect();
        let temp: Vec<f64> = (0..60).map(|t| (t as f64).sqrt()).collect();
        let hum: Vec<f64> = (0..60).map(|t| 70.0 + (t % 5) as f64).collect();
        let hist = history_series(&y);
        let settings = DriftSettings {
            ramp: RampMode::Saturated,
            weather_coupling: true,
            noise_sd: 0.0,
        };
        let out = apply_drift(&y, &ch, 0.0, &temp, &hum, &hist, settings, &mut rng("b")).unwrap();
        let f = drift_factors(&ch, &temp, &hum, &hist, true);
        for t in 0..60 {
            let closed = f.alpha[t] * y[t].powf(f.beta[t]) + f.offset[t];
            assert!((out[t].drifted - closed).abs() <= 1e-12 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_negative_and_misaligned() {
        let ch = fixed_channel();
        let settings = DriftSettings::from(&DriftConfig::default());
        let err = apply_drift(
            &[1.0, -0.5],
            &ch,
            0.1,
            &[0.0; 2],
            &[0.0; 2],
            &[0.0; 2],
            settings,
            &mut rng("c"),
        );
        assert!(matches!(err, Err(Error::NegativeReading { t: 1, .. })));
        let err = apply_drift(
            &[1.0, 0.5],
            &ch,
            0.1,
            &[0.0; 3],
            &[0.0; 2],
            &[0.0; 2],
            settings,
            &mut rng("c"),
        );
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn zero_reading_with_beta_not_one() {
        assert_eq!(drifted_value(0.0, 1.0, 1.1, 1.02, 0.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn scale_series_lands_in_range(values in prop::collection::vec(-1e6f64..1e6, 1..50), a in -2.0f64..2.0, w in 0.0f64..1.0) {
            let range = ScaleRange::new(a, a + w);
            for v in scale_series(&values, range) {
                prop_assert!(v >= range.lo - 1e-12 && v <= range.hi + 1e-12);
            }
        }
    }
}
