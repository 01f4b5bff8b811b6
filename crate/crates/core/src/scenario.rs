//! Physical configuration and its `key = value` file format.
//!
//! ```text
//! # comment
//! alice_pos = 100, 100, 1
//! frequency_hz = 28e9
//! ```
//!
//! Every key of [`ScenarioParams`] is required except `sigma_g2`
//! (default 1) and `channel_seed` (default 1).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Plain-data form of a [`Scenario`]. Validation happens in [`Scenario::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub alice_pos: Vec3,
    pub eve_pos: Vec3,
    pub bob_pos: Vec3,
    pub ris_pos: Vec3,
    pub ris_normal: Vec3,
    /// Element length, m.
    pub element_a: f64,
    /// Element width, m.
    pub element_b: f64,
    pub n_elements: usize,
    pub frequency_hz: f64,
    /// Linear transmit antenna gain.
    pub tx_gain: f64,
    /// Linear receive antenna gain.
    pub rx_gain: f64,
    pub tx_power_w: f64,
    pub refractive_index: f64,
    /// Link quality: transmit power over noise power, dB.
    pub lq_db: f64,
    /// Variance of the RIS→receiver gains `g_n`.
    pub sigma_g2: f64,
    /// Seed of the enrolled (frozen) channel realizations.
    pub channel_seed: u64,
}

impl ScenarioParams {
    /// Simulation parameters of the reference deployment, with the receiver
    /// placed at `[90, 80, 1]` behind the surface and the surface facing `+y`.
    pub fn table1() -> Self {
        Self {
            alice_pos: [100.0, 100.0, 1.0],
            eve_pos: [90.0, 100.0, 1.0],
            bob_pos: [90.0, 80.0, 1.0],
            ris_pos: [90.0, 90.0, 1.0],
            ris_normal: [0.0, 1.0, 0.0],
            element_a: 0.5,
            element_b: 0.5,
            n_elements: 256,
            frequency_hz: 28e9,
            tx_gain: 1000.0,
            rx_gain: 1000.0,
            tx_power_w: 1.0,
            refractive_index: 1.0,
            lq_db: 100.0,
            sigma_g2: 1.0,
            channel_seed: 1,
        }
    }
}

/// Validated, immutable physical configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    params: ScenarioParams,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        let p = &params;
        for (name, v) in [
            ("alice_pos", p.alice_pos),
            ("eve_pos", p.eve_pos),
            ("bob_pos", p.bob_pos),
            ("ris_pos", p.ris_pos),
            ("ris_normal", p.ris_normal),
        ] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(domain(format!("{name} has a non-finite component")));
            }
        }
        for (name, v) in [
            ("alice_pos", p.alice_pos),
            ("eve_pos", p.eve_pos),
            ("bob_pos", p.bob_pos),
        ] {
            if v == p.ris_pos {
                return Err(Error::DegenerateGeometry(format!("{name} coincides with ris_pos")));
            }
        }
        if (norm(p.ris_normal) - 1.0).abs() > 1e-9 {
            return Err(domain(format!(
                "ris_normal must have unit norm, got {}",
                norm(p.ris_normal)
            )));
        }
        for (name, v) in [
            ("element_a", p.element_a),
            ("element_b", p.element_b),
            ("frequency_hz", p.frequency_hz),
            ("tx_gain", p.tx_gain),
            ("rx_gain", p.rx_gain),
            ("tx_power_w", p.tx_power_w),
            ("refractive_index", p.refractive_index),
            ("sigma_g2", p.sigma_g2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if p.n_elements == 0 {
            return Err(domain("n_elements must be at least 1"));
        }
        if !p.lq_db.is_finite() {
            return Err(domain("lq_db must be finite"));
        }
        Ok(Self { params })
    }

    pub fn table1() -> Self {
        Self::new(ScenarioParams::table1()).expect("reference scenario is valid")
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn alice_pos(&self) -> Vec3 {
        self.params.alice_pos
    }

    pub fn eve_pos(&self) -> Vec3 {
        self.params.eve_pos
    }

    pub fn bob_pos(&self) -> Vec3 {
        self.params.bob_pos
    }

    pub fn ris_pos(&self) -> Vec3 {
        self.params.ris_pos
    }

    pub fn ris_normal(&self) -> Vec3 {
        self.params.ris_normal
    }

    pub fn n_elements(&self) -> usize {
        self.params.n_elements
    }

    pub fn lq_db(&self) -> f64 {
        self.params.lq_db
    }

    pub fn sigma_g2(&self) -> f64 {
        self.params.sigma_g2
    }

    pub fn channel_seed(&self) -> u64 {
        self.params.channel_seed
    }

    /// Wavelength `c / f`, m.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.params.frequency_hz
    }

    /// Noise variance `P_t · 10^(−LQ/10)`.
    pub fn noise_variance(&self) -> f64 {
        self.params.tx_power_w * 10f64.powf(-self.params.lq_db / 10.0)
    }

    /// Noise standard deviation.
    pub fn noise_sigma(&self) -> f64 {
        self.noise_variance().sqrt()
    }

    pub fn with_lq_db(&self, lq_db: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.lq_db = lq_db;
        Self::new(params)
    }

    pub fn with_n_elements(&self, n_elements: usize) -> Result<Self> {
        let mut params = self.params.clone();
        params.n_elements = n_elements;
        Self::new(params)
    }

    pub fn with_channel_seed(&self, channel_seed: u64) -> Result<Self> {
        let mut params = self.params.clone();
        params.channel_seed = channel_seed;
        Self::new(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Parses the `key = value` format. `origin` only labels error messages.
    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };

        let mut seen: HashMap<&str, (usize, &str)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(line_no, format!("unknown key `{key}`")));
            }
            if let Some((first, _)) = seen.insert(key, (line_no, value.trim())) {
                return Err(err(line_no, format!("duplicate key `{key}` (first on line {first})")));
            }
        }

        let last_line = text.lines().count().max(1);
        let get = |key: &str| -> Result<(usize, &str)> {
            seen.get(key)
                .copied()
                .ok_or_else(|| err(last_line, format!("missing required key `{key}`")))
        };
        let real = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse::<f64>()
                .map_err(|_| err(line, format!("`{key}`: `{v}` is not a number")))
        };
        let triple = |key: &str| -> Result<Vec3> {
            let (line, v) = get(key)?;
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(err(line, format!("`{key}`: expected three comma-separated values")));
            }
            let mut out = [0.0; 3];
            for (slot, part) in out.iter_mut().zip(&parts) {
                *slot = part
                    .parse()
                    .map_err(|_| err(line, format!("`{key}`: `{part}` is not a number")))?;
            }
            Ok(out)
        };

        let integer = |key: &str| -> Result<u64> {
            let (line, v) = get(key)?;
            v.parse::<u64>()
                .map_err(|_| err(line, format!("`{key}`: `{v}` is not an unsigned integer")))
        };

        // Malformed values are reported in file order, before missing keys.
        let mut present: Vec<(&str, usize)> = seen.iter().map(|(k, &(line, _))| (*k, line)).collect();
        present.sort_by_key(|&(_, line)| line);
        for (key, _) in present {
            match key {
                k if k.ends_with("_pos") || k == "ris_normal" => triple(k).map(drop)?,
                "n_elements" | "channel_seed" => integer(key).map(drop)?,
                k => real(k).map(drop)?,
            }
        }

        let n_elements = integer("n_elements")? as usize;
        let sigma_g2 = if seen.contains_key("sigma_g2") {
            real("sigma_g2")?
        } else {
            1.0
        };
        let channel_seed = if seen.contains_key("channel_seed") {
            integer("channel_seed")?
        } else {
            1
        };

        let params = ScenarioParams {
            alice_pos: triple("alice_pos")?,
            eve_pos: triple("eve_pos")?,
            bob_pos: triple("bob_pos")?,
            ris_pos: triple("ris_pos")?,
            ris_normal: triple("ris_normal")?,
            element_a: real("element_a")?,
            element_b: real("element_b")?,
            n_elements,
            frequency_hz: real("frequency_hz")?,
            tx_gain: real("tx_gain")?,
            rx_gain: real("rx_gain")?,
            tx_power_w: real("tx_power_w")?,
            refractive_index: real("refractive_index")?,
            lq_db: real("lq_db")?,
            sigma_g2,
            channel_seed,
        };
        Scenario::new(params).map_err(|e| err(last_line, e.to_string()))
    }

    /// Serializes back to the file format; `parse(to_config_string())`
    /// reproduces the scenario.
    pub fn to_config_string(&self) -> String {
        let p = &self.params;
        let triple = |v: Vec3| format!("{:?}, {:?}, {:?}", v[0], v[1], v[2]);
        let mut out = String::new();
        let _ = writeln!(out, "alice_pos = {}", triple(p.alice_pos));
        let _ = writeln!(out, "eve_pos = {}", triple(p.eve_pos));
        let _ = writeln!(out, "bob_pos = {}", triple(p.bob_pos));
        let _ = writeln!(out, "ris_pos = {}", triple(p.ris_pos));
        let _ = writeln!(out, "ris_normal = {}", triple(p.ris_normal));
        let _ = writeln!(out, "element_a = {:?}", p.element_a);
        let _ = writeln!(out, "element_b = {:?}", p.element_b);
        let _ = writeln!(out, "n_elements = {}", p.n_elements);
        let _ = writeln!(out, "frequency_hz = {:?}", p.frequency_hz);
        let _ = writeln!(out, "tx_gain = {:?}", p.tx_gain);
        let _ = writeln!(out, "rx_gain = {:?}", p.rx_gain);
        let _ = writeln!(out, "tx_power_w = {:?}", p.tx_power_w);
        let _ = writeln!(out, "refractive_index = {:?}", p.refractive_index);
        let _ = writeln!(out, "lq_db = {:?}", p.lq_db);
        let _ = writeln!(out, "sigma_g2 = {:?}", p.sigma_g2);
        let _ = writeln!(out, "channel_seed = {}", p.channel_seed);
        out
    }
}

const KEYS: &[&str] = &[
    "alice_pos",
    "eve_pos",
    "bob_pos",
    "ris_pos",
    "ris_normal",
    "element_a",
    "element_b",
    "n_elements",
    "frequency_hz",
    "tx_gain",
    "rx_gain",
    "tx_power_w",
    "refractive_index",
    "lq_db",
    "sigma_g2",
    "channel_seed",
];
