//! Scenario parameters, their flat `key = value` text form, and unit helpers.
//!
//! Fields are stored in the units of the configuration keys (dB, dBm, km/h,
//! GHz, ms); the accessor methods return linear SI quantities.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest admissible CSI error variance. Values at or above it carry no
/// usable channel information.
pub const TAU_SQ_CEILING: f64 = 1.0 - 1e-9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// SINR that an AWGN-style link needs for `rate` bit/s/Hz.
pub fn sinr_for_rate(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

/// Bounded distance-dependent pathloss `l(x) = 2L / (1 + (|x|/x̄)^β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossModel {
    pub exponent: f64,
    pub cutoff_m: f64,
    /// Linear attenuation at the cutoff distance.
    pub ref_gain: f64,
}

impl PathlossModel {
    pub fn new(exponent: f64, cutoff_m: f64, ref_gain: f64) -> Result<Self> {
        if !(exponent > 2.0) || !exponent.is_finite() {
            return Err(invalid("pathloss_exp", "must be a finite number above 2"));
        }
        if !(cutoff_m > 0.0) || !cutoff_m.is_finite() {
            return Err(invalid("cutoff_m", "must be positive"));
        }
        if !(ref_gain > 0.0) || !ref_gain.is_finite() {
            return Err(invalid("ref_atten_db", "must give a positive finite gain"));
        }
        Ok(Self {
            exponent,
            cutoff_m,
            ref_gain,
        })
    }

    /// Gain at distance `d` meters.
    pub fn gain(&self, d: f64) -> f64 {
        2.0 * self.ref_gain / (1.0 + (d.abs() / self.cutoff_m).powf(self.exponent))
    }

    /// Gain at the 2-D offset `(dx, dy)`.
    pub fn gain_at(&self, dx: f64, dy: f64) -> f64 {
        self.gain(dx.hypot(dy))
    }

    /// Far-field form `2L (x̄/d)^β`.
    pub fn far_field(&self, d: f64) -> f64 {
        2.0 * self.ref_gain * (self.cutoff_m / d).powf(self.exponent)
    }
}

/// CSI error variance from terminal speed through the Jakes temporal correlation:
/// `τ² = τ̲² + 1 − J₀²(2π v ζ / λ)`.
pub fn tau_from_speed(speed_mps: f64, wavelength_m: f64, slot_s: f64, floor_sq: f64) -> Result<f64> {
    for (name, v) in [
        ("speed", speed_mps),
        ("wavelength", wavelength_m),
        ("slot", slot_s),
        ("tau_floor_sq", floor_sq),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tau_from_speed",
                reason: format!("{name} = {v} must be finite and nonnegative"),
            });
        }
    }
    if wavelength_m == 0.0 {
        return Err(invalid("carrier_ghz", "wavelength must be positive"));
    }
    let j0 = libm::j0(2.0 * std::f64::consts::PI * speed_mps * slot_s / wavelength_m);
    let tau_sq = (floor_sq + (1.0 - j0 * j0)).clamp(0.0, 1.0);
    if tau_sq >= TAU_SQ_CEILING {
        return Err(Error::TauOutOfRange { tau_sq });
    }
    Ok(tau_sq)
}

/// Every physical and protocol parameter of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_antennas: usize,
    pub cell_side_m: f64,
    pub n_sca: usize,
    pub sca_pitch_m: f64,
    pub small_cell_radius_m: f64,
    pub n_mue: usize,
    pub mue_rate_bps_hz: f64,
    pub sca_backhaul_rate_bps_hz: f64,
    pub sue_rate_bps_hz: f64,
    /// Thermal noise over the whole band.
    pub noise_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub pathloss_exp: f64,
    pub cutoff_m: f64,
    pub ref_atten_db: f64,
    pub tau_floor_sq: f64,
    pub speed_kmh: f64,
    pub carrier_ghz: f64,
    pub slot_ms: f64,
    pub correlated: bool,
    pub angular_spread_rad: f64,
    /// Share of the downlink slot given to space-time coded users, `T_STC / T_LP`.
    pub stc_time_ratio: f64,
    /// Monte-Carlo trials that share one user drop.
    pub geometry_redraw_every: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_antennas: 128,
            cell_side_m: 500.0,
            n_sca: 16,
            sca_pitch_m: 125.0,
            small_cell_radius_m: 35.0,
            n_mue: 128,
            mue_rate_bps_hz: 1.5,
            sca_backhaul_rate_bps_hz: 3.0,
            sue_rate_bps_hz: 3.0,
            noise_power_dbm: -104.0,
            bandwidth_hz: 10e6,
            pathloss_exp: 3.5,
            cutoff_m: 25.0,
            ref_atten_db: -86.5,
            tau_floor_sq: 0.08,
            speed_kmh: 15.0,
            carrier_ghz: 2.4,
            slot_ms: 1.0,
            correlated: false,
            angular_spread_rad: std::f64::consts::PI / 12.0,
            stc_time_ratio: 1.0,
            geometry_redraw_every: 10,
        }
    }
}

const KEYS: [&str; 22] = [
    "n_antennas",
    "cell_side_m",
    "n_sca",
    "sca_pitch_m",
    "small_cell_radius_m",
    "n_mue",
    "mue_rate_bps_hz",
    "sca_backhaul_rate_bps_hz",
    "sue_rate_bps_hz",
    "noise_power_dbm",
    "bandwidth_hz",
    "pathloss_exp",
    "cutoff_m",
    "ref_atten_db",
    "tau_floor_sq",
    "speed_kmh",
    "carrier_ghz",
    "slot_ms",
    "correlated",
    "angular_spread_rad",
    "stc_time_ratio",
    "geometry_redraw_every",
];

impl ScenarioConfig {
    /// Noise power σ² over the band, in Watt.
    pub fn noise_w(&self) -> f64 {
        dbm_to_watt(self.noise_power_dbm)
    }

    pub fn pathloss(&self) -> Result<PathlossModel> {
        PathlossModel::new(self.pathloss_exp, self.cutoff_m, db_to_linear(self.ref_atten_db))
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / (self.carrier_ghz * 1e9)
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    /// MUE CSI error variance implied by speed, carrier and slot length.
    pub fn tau_sq(&self) -> Result<f64> {
        tau_from_speed(
            self.speed_mps(),
            self.wavelength_m(),
            self.slot_ms * 1e-3,
            self.tau_floor_sq,
        )
    }

    pub fn mue_sinr(&self) -> f64 {
        sinr_for_rate(self.mue_rate_bps_hz)
    }

    pub fn sca_sinr(&self) -> f64 {
        sinr_for_rate(self.sca_backhaul_rate_bps_hz)
    }

    pub fn mues_per_sca(&self) -> usize {
        self.n_mue.checked_div(self.n_sca).unwrap_or(0)
    }

    /// Area of the square macro cell in km².
    pub fn cell_area_km2(&self) -> f64 {
        self.cell_side_m * self.cell_side_m * 1e-6
    }

    /// Checks every invariant; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_side_m", self.cell_side_m),
            ("sca_pitch_m", self.sca_pitch_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cutoff_m", self.cutoff_m),
            ("carrier_ghz", self.carrier_ghz),
            ("slot_ms", self.slot_ms),
            ("angular_spread_rad", self.angular_spread_rad),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(key, format!("{v} must be positive and finite")));
            }
        }
        let nonneg = [
            ("small_cell_radius_m", self.small_cell_radius_m),
            ("mue_rate_bps_hz", self.mue_rate_bps_hz),
            ("sca_backhaul_rate_bps_hz", self.sca_backhaul_rate_bps_hz),
            ("sue_rate_bps_hz", self.sue_rate_bps_hz),
            ("speed_kmh", self.speed_kmh),
            ("stc_time_ratio", self.stc_time_ratio),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(key, format!("{v} must be nonnegative and finite")));
            }
        }
        if !self.noise_power_dbm.is_finite() || !self.ref_atten_db.is_finite() {
            return Err(invalid("noise_power_dbm", "dB quantities must be finite"));
        }
        if self.n_antennas == 0 {
            return Err(invalid("n_antennas", "need at least one antenna"));
        }
        if self.geometry_redraw_every == 0 {
            return Err(invalid("geometry_redraw_every", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.tau_floor_sq) {
            return Err(invalid("tau_floor_sq", "must lie in [0, 1)"));
        }
        if self.n_sca > 0 && !self.n_mue.is_multiple_of(self.n_sca) {
            return Err(invalid(
                "n_mue",
                format!(
                    "balanced placement needs n_mue ({}) divisible by n_sca ({})",
                    self.n_mue, self.n_sca
                ),
            ));
        }
        self.pathloss()?;
        self.tau_sq()?;
        Ok(())
    }

    /// Flat text form accepted by [`parse_config`].
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("every listed key is readable");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    fn get(&self, key: &str) -> Option<String> {
        // `{:?}` on f64 prints the shortest string that round-trips
        Some(match key {
            "n_antennas" => self.n_antennas.to_string(),
            "cell_side_m" => format!("{:?}", self.cell_side_m),
            "n_sca" => self.n_sca.to_string(),
            "sca_pitch_m" => format!("{:?}", self.sca_pitch_m),
            "small_cell_radius_m" => format!("{:?}", self.small_cell_radius_m),
            "n_mue" => self.n_mue.to_string(),
            "mue_rate_bps_hz" => format!("{:?}", self.mue_rate_bps_hz),
            "sca_backhaul_rate_bps_hz" => format!("{:?}", self.sca_backhaul_rate_bps_hz),
            "sue_rate_bps_hz" => format!("{:?}", self.sue_rate_bps_hz),
            "noise_power_dbm" => format!("{:?}", self.noise_power_dbm),
            "bandwidth_hz" => format!("{:?}", self.bandwidth_hz),
            "pathloss_exp" => format!("{:?}", self.pathloss_exp),
            "cutoff_m" => format!("{:?}", self.cutoff_m),
            "ref_atten_db" => format!("{:?}", self.ref_atten_db),
            "tau_floor_sq" => format!("{:?}", self.tau_floor_sq),
            "speed_kmh" => format!("{:?}", self.speed_kmh),
            "carrier_ghz" => format!("{:?}", self.carrier_ghz),
            "slot_ms" => format!("{:?}", self.slot_ms),
            "correlated" => self.correlated.to_string(),
            "angular_spread_rad" => format!("{:?}", self.angular_spread_rad),
            "stc_time_ratio" => format!("{:?}", self.stc_time_ratio),
            "geometry_redraw_every" => self.geometry_redraw_every.to_string(),
            _ => return None,
        })
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        match key {
            "n_antennas" => self.n_antennas = num(value)?,
            "cell_side_m" => self.cell_side_m = num(value)?,
            "n_sca" => self.n_sca = num(value)?,
            "sca_pitch_m" => self.sca_pitch_m = num(value)?,
            "small_cell_radius_m" => self.small_cell_radius_m = num(value)?,
            "n_mue" => self.n_mue = num(value)?,
            "mue_rate_bps_hz" => self.mue_rate_bps_hz = num(value)?,
            "sca_backhaul_rate_bps_hz" => self.sca_backhaul_rate_bps_hz = num(value)?,
            "sue_rate_bps_hz" => self.sue_rate_bps_hz = num(value)?,
            "noise_power_dbm" => self.noise_power_dbm = num(value)?,
            "bandwidth_hz" => self.bandwidth_hz = num(value)?,
            "pathloss_exp" => self.pathloss_exp = num(value)?,
            "cutoff_m" => self.cutoff_m = num(value)?,
            "ref_atten_db" => self.ref_atten_db = num(value)?,
            "tau_floor_sq" => self.tau_floor_sq = num(value)?,
            "speed_kmh" => self.speed_kmh = num(value)?,
            "carrier_ghz" => self.carrier_ghz = num(value)?,
            "slot_ms" => self.slot_ms = num(value)?,
            "correlated" => {
                self.correlated = match value.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(format!("cannot parse `{value}` as a boolean")),
                }
            }
            "angular_spread_rad" => self.angular_spread_rad = num(value)?,
            "stc_time_ratio" => self.stc_time_ratio = num(value)?,
            "geometry_redraw_every" => self.geometry_redraw_every = num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }
}

/// Parses flat `key = value` text. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut line_of = std::collections::HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                key: line.to_string(),
                reason: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if line_of.insert(key.to_string(), line_no).is_some() {
            return Err(Error::Config {
                line: line_no,
                key: key.into(),
                reason: "duplicate key".into(),
            });
        }
        cfg.set(key, value).map_err(|reason| Error::Config {
            line: line_no,
            key: key.into(),
            reason,
        })?;
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            line: line_of.get(name).copied().unwrap_or(0),
            key: name.into(),
            reason,
        },
        other => other,
    })?;
    Ok(cfg)
}
