use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::ArenaKind;

/// Everything needed to reproduce an experiment, serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arena: ArenaKind,
    pub cells_per_meter: usize,
    pub swarm_size: usize,
    /// Fraction of the swarm in sub-group 0 (green).
    pub ratio: f64,
    /// Robots pick their reservoir through a regulatory policy.
    pub adaptive: bool,
    /// Training spawn distance from the arena center, m.
    pub spawn_radius: f64,
    /// Spawn distance as a fraction of `spawn_radius`.
    pub r_dist: f64,
    pub eval_minutes: f64,
    pub controller_hz: f64,
    pub dt: f64,
    /// Independent evolution runs.
    pub runs: usize,
    pub master_seed: u64,
    pub reservoir_seeds: [u64; 2],
    pub lambda: usize,
    pub generations: usize,
    pub sigma0: f64,
    /// Trials per individual; the median is its fitness.
    pub repeats: usize,
    pub sweep_ratios: Vec<f64>,
    pub sweep_distances: Vec<f64>,
    pub sweep_trials: usize,
    pub validation_sizes: Vec<usize>,
    pub validation_arenas: Vec<ArenaKind>,
    pub validation_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    /// Full-scale settings: 20 robots, 10-minute trials, 30 x 100 CMA-ES.
    pub fn paper() -> Self {
        Self {
            arena: ArenaKind::Center,
            cells_per_meter: 10,
            swarm_size: 20,
            ratio: 0.5,
            adaptive: false,
            spawn_radius: 12.0,
            r_dist: 1.0,
            eval_minutes: 10.0,
            controller_hz: 10.0,
            dt: 0.05,
            runs: 10,
            master_seed: 0,
            reservoir_seeds: [1, 2],
            lambda: 30,
            generations: 100,
            sigma0: 1.0,
            repeats: 3,
            sweep_ratios: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            sweep_distances: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25],
            sweep_trials: 60,
            validation_sizes: vec![10, 20, 50],
            validation_arenas: vec![ArenaKind::BiModal, ArenaKind::Linear, ArenaKind::Banana],
            validation_trials: 60,
        }
    }

    /// Laptop-sized run: 10 robots, 2-minute trials, 15 x 20 CMA-ES.
    pub fn desk() -> Self {
        Self {
            swarm_size: 10,
            eval_minutes: 2.0,
            runs: 1,
            lambda: 15,
            generations: 20,
            sweep_trials: 20,
            validation_trials: 20,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.swarm_size == 0 {
            return bad("swarm_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return bad("ratio must lie in [0, 1]");
        }
        if self.cells_per_meter == 0 {
            return bad("cells_per_meter must be positive");
        }
        for (name, v) in [
            ("eval_minutes", self.eval_minutes),
            ("controller_hz", self.controller_hz),
            ("dt", self.dt),
            ("sigma0", self.sigma0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.spawn_radius >= 0.0 && self.r_dist >= 0.0) {
            return bad("spawn distances must be non-negative");
        }
        if self.lambda < 4 || self.repeats == 0 || self.runs == 0 {
            return bad("lambda must be at least 4; repeats and runs positive");
        }
        if self.controller_hz * self.dt > 1.0 {
            return bad("controller rate exceeds physics rate");
        }
        if self.sweep_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("sweep ratios must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn physics_steps(&self) -> u64 {
        (self.eval_minutes * 60.0 / self.dt).round() as u64
    }

    /// Physics steps per controller tick (2 at 10 Hz and dt = 0.05).
    pub fn steps_per_tick(&self) -> u64 {
        ((1.0 / (self.controller_hz * self.dt)).round() as u64).max(1)
    }

    pub fn controller_ticks(&self) -> u64 {
        self.physics_steps().div_ceil(self.steps_per_tick())
    }

    pub fn spawn_distance(&self) -> f64 {
        self.r_dist * self.spawn_radius
    }

    /// Trials one evolution run schedules: lambda x generations x repeats.
    pub fn evolution_trials(&self) -> usize {
        self.lambda * self.generations * self.repeats
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, each value written as a TOML literal
    /// (`swarm_size=50`, `arena="linear"`; bare words are taken as strings).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        Self::from_toml(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
