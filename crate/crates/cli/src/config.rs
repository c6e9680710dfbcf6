//! Flat `key = value` configuration files.
//!
//! One pair per line, `#` starts a comment, units are part of the key. A file
//! holds either a physical block or a dimensionless block, never both, plus
//! optional simulation keys.

use std::collections::BTreeMap;
use std::path::Path;

use optoepr_core::model::{DimensionlessParams, PhysicalParams};
use optoepr_core::sde_oracle::SimConfig;

use crate::error::{CliError, CliResult};

const PHYSICAL_KEYS: [&str; 10] = [
    "mass_kg",
    "cavity_length_m",
    "omega_m_rad_s",
    "gamma_m_hz",
    "omega_c_rad_s",
    "omega_0_rad_s",
    "detuning0",
    "gamma_c_hz",
    "temperature_k",
    "input_power_w",
];
const DIMENSIONLESS_KEYS: [&str; 3] = ["p_cal", "t_cal", "delta"];
const SIM_KEYS: [&str; 7] = [
    "dt_s",
    "duration_s",
    "tau_s",
    "segments",
    "trajectories",
    "seed",
    "burn_in_s",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ParamBlock {
    Physical(PhysicalParams),
    /// Any subset of the three keys; missing ones may come from flags.
    Dimensionless {
        p_cal: Option<f64>,
        t_cal: Option<f64>,
        delta: Option<f64>,
    },
}

/// Optional overrides of the model-scaled simulation defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimOverrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub tau: Option<f64>,
    pub segments: Option<usize>,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub burn_in: Option<f64>,
}

impl SimOverrides {
    /// Applies the overrides to `base`. Without an explicit duration, the
    /// run is sized to fit burn-in plus all windows.
    pub fn apply(&self, base: SimConfig) -> SimConfig {
        let mut cfg = base;
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.segments {
            cfg.n_segments = v;
        }
        if let Some(v) = self.trajectories {
            cfg.n_trajectories = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        cfg.duration = self
            .duration
            .unwrap_or(cfg.burn_in + cfg.n_segments as f64 * cfg.tau);
        cfg
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub params: Option<ParamBlock>,
    pub sim: SimOverrides,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Config> {
        let mut pairs = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if !(PHYSICAL_KEYS.contains(&key)
                || DIMENSIONLESS_KEYS.contains(&key)
                || SIM_KEYS.contains(&key))
            {
                return Err(CliError::Config(format!(
                    "line {}: unknown key '{key}'",
                    n + 1
                )));
            }
            if pairs.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
        }

        let has = |keys: &[&str]| keys.iter().any(|k| pairs.contains_key(*k));
        let params = match (has(&PHYSICAL_KEYS), has(&DIMENSIONLESS_KEYS)) {
            (true, true) => {
                return Err(CliError::Config(
                    "physical and dimensionless keys cannot be mixed".into(),
                ))
            }
            (true, false) => Some(ParamBlock::Physical(physical_block(&pairs)?)),
            (false, true) => Some(ParamBlock::Dimensionless {
                p_cal: optional(&pairs, "p_cal")?,
                t_cal: optional(&pairs, "t_cal")?,
                delta: optional(&pairs, "delta")?,
            }),
            (false, false) => None,
        };
        let sim = SimOverrides {
            dt: optional(&pairs, "dt_s")?,
            duration: optional(&pairs, "duration_s")?,
            tau: optional(&pairs, "tau_s")?,
            segments: optional(&pairs, "segments")?,
            trajectories: optional(&pairs, "trajectories")?,
            seed: optional(&pairs, "seed")?,
            burn_in: optional(&pairs, "burn_in_s")?,
        };
        Ok(Config { params, sim })
    }
}

fn optional<T: std::str::FromStr>(
    pairs: &BTreeMap<String, String>,
    key: &str,
) -> CliResult<Option<T>> {
    pairs
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::Config(format!("cannot parse {key} = '{v}'")))
        })
        .transpose()
}

fn required(pairs: &BTreeMap<String, String>, key: &str) -> CliResult<f64> {
    optional(pairs, key)?.ok_or_else(|| CliError::Config(format!("missing key '{key}'")))
}

fn physical_block(pairs: &BTreeMap<String, String>) -> CliResult<PhysicalParams> {
    let omega_c = required(pairs, "omega_c_rad_s")?;
    let gamma_c = required(pairs, "gamma_c_hz")?;
    let omega_0 = match (
        optional::<f64>(pairs, "omega_0_rad_s")?,
        optional::<f64>(pairs, "detuning0")?,
    ) {
        (Some(w), None) => w,
        (None, Some(d0)) => omega_c + d0 * gamma_c,
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either omega_0_rad_s or detuning0, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "missing key 'omega_0_rad_s' (or 'detuning0')".into(),
            ))
        }
    };
    let p = PhysicalParams {
        mass: required(pairs, "mass_kg")?,
        cavity_length: required(pairs, "cavity_length_m")?,
        omega_m: required(pairs, "omega_m_rad_s")?,
        gamma_m: required(pairs, "gamma_m_hz")?,
        omega_c,
        omega_0,
        gamma_c,
        temperature: required(pairs, "temperature_k")?,
        input_power: required(pairs, "input_power_w")?,
    };
    p.validate()?;
    Ok(p)
}

/// Fully specified reduced parameters from a config block and flag overrides.
pub fn dimensionless_from(
    block: Option<&ParamBlock>,
    p: Option<f64>,
    t: Option<f64>,
    delta: Option<f64>,
) -> CliResult<DimensionlessParams> {
    let (cp, ct, cd) = match block {
        Some(ParamBlock::Dimensionless {
            p_cal,
            t_cal,
            delta,
        }) => (*p_cal, *t_cal, *delta),
        Some(ParamBlock::Physical(_)) => unreachable!("physical configs are handled separately"),
        None => (None, None, None),
    };
    let get = |flag: Option<f64>, cfg: Option<f64>, name: &str| {
        flag.or(cfg)
            .ok_or_else(|| CliError::Config(format!("{name} not given (config key or flag)")))
    };
    Ok(DimensionlessParams::new(
        get(p, cp, "p_cal")?,
        get(t, ct, "t_cal")?,
        get(delta, cd, "delta")?,
    )?)
}
