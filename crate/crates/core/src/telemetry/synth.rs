//! Seeded drive-cycle generator standing in for real fleet telemetry.
//!
//! A Markov chain over four regimes (idle, accelerate, cruise, brake)
//! drives vehicle speed and pedal position. The remaining channels follow
//! from those through loosely physical couplings:
//!
//! - engine load tracks the pedal (and speed while cruising) through a fast lag,
//! - torque, boost, fuel rate and injector pressure are affine in load,
//! - coolant, transmission oil and intake manifold temperatures are slow
//!   first-order lags toward load-dependent setpoints,
//! - gear, converter lockup and output shaft speed are functions of speed,
//! - the brake switch is on exactly during the brake regime.
//!
//! Gaussian measurement noise is added per channel, then anomalies are
//! injected and their rows labelled. Injection magnitudes are in units of
//! the channel's standard deviation over the whole generated series before
//! injection (or 1 for a constant channel).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ChannelSchema, TelemetryError, TelemetryFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Idle,
    Accelerate,
    Cruise,
    Brake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    /// Constant offset over the interval.
    Spike,
    /// Offset ramping linearly from zero to the magnitude.
    Drift,
    /// Reading frozen at its value when the fault starts.
    Stuck,
    /// Offset rising toward the magnitude like a thermal runaway.
    Overheat,
}

impl std::str::FromStr for AnomalyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "spike" => Ok(Self::Spike),
            "drift" => Ok(Self::Drift),
            "stuck" => Ok(Self::Stuck),
            "overheat" => Ok(Self::Overheat),
            other => Err(format!("unknown anomaly kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub channel: String,
    pub kind: AnomalyKind,
    /// First affected row (seconds from the start).
    pub start: usize,
    pub length: usize,
    pub magnitude: f64,
}

impl std::str::FromStr for Injection {
    type Err = String;
    /// Parses `channel:kind:start:length:magnitude`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 5 {
            return Err(format!("expected channel:kind:start:length:magnitude, got {s:?}"));
        }
        let num = |i: usize| parts[i].parse::<usize>().map_err(|e| format!("{}: {e}", parts[i]));
        Ok(Self {
            channel: parts[0].to_string(),
            kind: parts[1].parse()?,
            start: num(2)?,
            length: num(3)?,
            magnitude: parts[4].parse().map_err(|e| format!("{}: {e}", parts[4]))?,
        })
    }
}

/// Inclusive dwell range in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dwell {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSchedule {
    pub idle: Dwell,
    pub accelerate: Dwell,
    pub cruise: Dwell,
    pub brake: Dwell,
}

impl Default for RegimeSchedule {
    fn default() -> Self {
        Self {
            idle: Dwell { min: 10, max: 40 },
            accelerate: Dwell { min: 8, max: 25 },
            cruise: Dwell { min: 30, max: 180 },
            brake: Dwell { min: 5, max: 20 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_s: usize,
    pub seed: u64,
    /// Timestamp of the first row, seconds since epoch.
    pub start_time: i64,
    pub schedule: RegimeSchedule,
    /// Measurement noise standard deviation per default-schema channel, in
    /// schema order.
    pub noise: Vec<f64>,
    pub injections: Vec<Injection>,
}

/// Noise standard deviations for the default fifteen channels.
pub const DEFAULT_NOISE: [f64; 15] =
    [0.3, 1.0, 1.0, 0.2, 0.5, 0.5, 0.2, 0.3, 0.0, 0.0, 5.0, 0.1, 0.3, 15.0, 0.0];

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration_s: 3600,
            seed: 0,
            start_time: 1_600_000_000,
            schedule: RegimeSchedule::default(),
            noise: DEFAULT_NOISE.to_vec(),
            injections: Vec::new(),
        }
    }
}

const N_CHANNELS: usize = 15;
const COOLANT: usize = 0;
const LOAD: usize = 1;
const TORQUE: usize = 2;
const BOOST: usize = 3;
const PEDAL: usize = 4;
const MANIFOLD_TEMP: usize = 5;
const SPEED: usize = 6;
const OIL_TEMP: usize = 7;
const GEAR: usize = 8;
const LOCKUP: usize = 9;
const SHAFT: usize = 10;
const FUEL_RATE: usize = 11;
const FUEL_ECO: usize = 12;
const INJ_PRES: usize = 13;
const BRAKE: usize = 14;

impl SynthConfig {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        let bad = |m: String| Err(TelemetryError::InvalidConfig(m));
        if self.duration_s == 0 {
            return bad("duration must be positive".into());
        }
        if self.noise.len() != N_CHANNELS || self.noise.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return bad(format!("need {N_CHANNELS} finite non-negative noise levels"));
        }
        for (name, d) in [
            ("idle", self.schedule.idle),
            ("accelerate", self.schedule.accelerate),
            ("cruise", self.schedule.cruise),
            ("brake", self.schedule.brake),
        ] {
            if d.min == 0 || d.max < d.min {
                return bad(format!("{name} dwell range {}..={} is empty", d.min, d.max));
            }
        }
        let schema = ChannelSchema::default();
        for inj in &self.injections {
            if schema.index_of(&inj.channel).is_none() {
                return bad(format!("unknown channel {:?}", inj.channel));
            }
            if inj.length == 0 || inj.start >= self.duration_s || inj.start + inj.length > self.duration_s {
                return bad(format!(
                    "injection {}..{} outside [0, {})",
                    inj.start,
                    inj.start + inj.length,
                    self.duration_s
                ));
            }
            if !inj.magnitude.is_finite() {
                return bad("injection magnitude must be finite".into());
            }
        }
        Ok(())
    }

}

/// Population standard deviation of one column of a row-major table,
/// 1 when the column is constant. Injection magnitudes are multiples of it.
pub fn injection_unit(values: &[f64], channels: usize, c: usize) -> f64 {
    let n = values.len() / channels;
    let col = || values.iter().skip(c).step_by(channels);
    let mean = col().sum::<f64>() / n as f64;
    let var = col().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var > 0.0 {
        var.sqrt()
    } else {
        1.0
    }
}

/// Generates a labelled frame on the default schema.
pub fn synth_generate(config: &SynthConfig) -> Result<TelemetryFrame, TelemetryError> {
    synth_generate_with_regimes(config).map(|(f, _)| f)
}

/// Like [`synth_generate`], also returning the regime of every row.
pub fn synth_generate_with_regimes(config: &SynthConfig) -> Result<(TelemetryFrame, Vec<Regime>), TelemetryError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.duration_s;
    let mut truth = vec![0.0; n * N_CHANNELS];
    let mut regimes = Vec::with_capacity(n);

    let mut regime = Regime::Idle;
    let mut remaining = dwell(&mut rng, config.schedule.idle);
    let mut speed = 0.0f64;
    let mut accel_rate = 0.0f64;
    let mut cruise_target = 0.0f64;
    let mut brake_rate = 0.0f64;
    let mut pedal_level = 0.0f64;
    let mut load = 15.0f64;
    let mut coolant = 180.0f64;
    let mut oil = 150.0f64;
    let mut manifold = 85.0f64;
    let speed_jitter = Normal::new(0.0, 0.15).expect("valid normal");

    for t in 0..n {
        if remaining == 0 {
            regime = next_regime(&mut rng, regime, speed);
            remaining = dwell(
                &mut rng,
                match regime {
                    Regime::Idle => config.schedule.idle,
                    Regime::Accelerate => config.schedule.accelerate,
                    Regime::Cruise => config.schedule.cruise,
                    Regime::Brake => config.schedule.brake,
                },
            );
            match regime {
                Regime::Accelerate => {
                    accel_rate = rng.random_range(1.0..2.5);
                    pedal_level = 35.0 + 15.0 * accel_rate;
                }
                Regime::Cruise => cruise_target = speed,
                Regime::Brake => brake_rate = rng.random_range(2.0..4.0),
                Regime::Idle => {}
            }
        }
        remaining -= 1;

        let pedal;
        match regime {
            Regime::Idle => {
                speed = 0.0;
                pedal = 0.0;
            }
            Regime::Accelerate => {
                speed = (speed + accel_rate).min(75.0);
                pedal = pedal_level;
            }
            Regime::Cruise => {
                speed = (speed + 0.1 * (cruise_target - speed) + speed_jitter.sample(&mut rng)).max(0.0);
                pedal = if speed > 0.5 { 10.0 + 0.3 * speed } else { 0.0 };
            }
            Regime::Brake => {
                speed = (speed - brake_rate).max(0.0);
                pedal = 0.0;
                if speed == 0.0 {
                    remaining = remaining.min(2);
                }
            }
        }

        let load_target = match regime {
            Regime::Idle => 15.0,
            Regime::Accelerate => 20.0 + 0.9 * pedal,
            Regime::Cruise => 15.0 + 0.6 * pedal + 0.1 * speed,
            Regime::Brake => 8.0,
        };
        load += 0.5 * (load_target - load);
        let boost = 0.25 * (load - 20.0).max(0.0);
        coolant += 0.01 * (185.0 + 0.15 * load - coolant);
        oil += 0.005 * (160.0 + 0.2 * load + 0.1 * speed - oil);
        manifold += 0.05 * (80.0 + 1.5 * boost - manifold);
        let gear = gear_for(speed);
        let fuel_rate = 0.4 + 0.08 * load;

        let row = &mut truth[t * N_CHANNELS..(t + 1) * N_CHANNELS];
        row[COOLANT] = coolant;
        row[LOAD] = load;
        row[TORQUE] = 0.95 * load + 2.0;
        row[BOOST] = boost;
        row[PEDAL] = pedal;
        row[MANIFOLD_TEMP] = manifold;
        row[SPEED] = speed;
        row[OIL_TEMP] = oil;
        row[GEAR] = gear as f64;
        row[LOCKUP] = if speed > 30.0 { 1.0 } else { 0.0 };
        row[SHAFT] = 25.0 * speed;
        row[FUEL_RATE] = fuel_rate;
        row[FUEL_ECO] = speed / fuel_rate;
        row[INJ_PRES] = 500.0 + 25.0 * load;
        row[BRAKE] = if regime == Regime::Brake { 1.0 } else { 0.0 };
        regimes.push(regime);
    }

    let mut observed = truth;
    for (c, &sigma) in config.noise.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        let noise = Normal::new(0.0, sigma).expect("validated noise");
        for t in 0..n {
            let v = &mut observed[t * N_CHANNELS + c];
            if c == PEDAL && *v == 0.0 {
                continue;
            }
            *v += noise.sample(&mut rng);
            if c == PEDAL {
                *v = v.clamp(0.0, 100.0);
            }
        }
    }

    let schema = ChannelSchema::default();
    let mut labels = vec![false; n];
    let units: Vec<f64> = (0..N_CHANNELS).map(|c| injection_unit(&observed, N_CHANNELS, c)).collect();
    for inj in &config.injections {
        let c = schema.index_of(&inj.channel).expect("validated channel");
        let amp = inj.magnitude * units[c];
        let frozen = observed[inj.start * N_CHANNELS + c];
        for k in 0..inj.length {
            let t = inj.start + k;
            let v = &mut observed[t * N_CHANNELS + c];
            let progress = (k + 1) as f64 / inj.length as f64;
            match inj.kind {
                AnomalyKind::Spike => *v += amp,
                AnomalyKind::Drift => *v += amp * progress,
                AnomalyKind::Stuck => *v = frozen,
                AnomalyKind::Overheat => *v += amp * (1.0 - (-4.0 * progress).exp()),
            }
            labels[t] = true;
        }
    }

    for v in observed.iter_mut() {
        *v = (*v * 1e4).round() / 1e4;
    }
    let timestamps = (0..n).map(|t| (config.start_time + t as i64) as f64).collect();
    let frame = TelemetryFrame::new(schema, timestamps, observed, Some(labels))?;
    Ok((frame, regimes))
}

fn dwell(rng: &mut ChaCha8Rng, d: Dwell) -> usize {
    rng.random_range(d.min..=d.max)
}

fn next_regime(rng: &mut ChaCha8Rng, current: Regime, speed: f64) -> Regime {
    match current {
        Regime::Idle => Regime::Accelerate,
        Regime::Accelerate => Regime::Cruise,
        Regime::Cruise => {
            if speed < 60.0 && rng.random_bool(0.4) {
                Regime::Accelerate
            } else {
                Regime::Brake
            }
        }
        Regime::Brake => {
            if speed > 5.0 && rng.random_bool(0.5) {
                Regime::Cruise
            } else if speed > 0.0 {
                Regime::Brake
            } else {
                Regime::Idle
            }
        }
    }
}

fn gear_for(speed: f64) -> u32 {
    if speed < 0.5 {
        return 0;
    }
    [10.0, 18.0, 28.0, 38.0, 50.0].iter().filter(|&&s| speed >= s).count() as u32 + 1
}
