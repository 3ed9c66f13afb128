//! Experiment configuration: flat `key = value` files, one experiment each.
//!
//! ```text
//! # channel
//! p1 = 0.22
//! p2 = 0.04
//! lambda0 = 20
//! schemes = BCSK, QCSK, BMOSK, QMOSK, BMOCSK, QMOCSK
//! power_min = 1
//! power_max = 1000
//! power_points_per_decade = 20
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`ExperimentConfig::default`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use ini::Ini;
use molcom_core::{ChannelParams, Family, MuUnits};

use crate::error::{Error, Result};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "MOLCOM_OUTPUT_DIR";

pub const MIN_MC_SYMBOLS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    /// Transmitter-receiver distance in micrometres. Documentation only.
    pub distance_um: Option<f64>,
    /// Slot duration in seconds. Documentation only.
    pub slot_s: Option<f64>,
    pub schemes: Vec<(Family, usize)>,
    /// Average diffusion rate per bit for the error sweep.
    pub power_grid: Vec<f64>,
    /// Extra next-slot hitting probability at which CSK schemes are re-run.
    pub csk_p2_variant: Option<f64>,
    pub mc_symbols: u64,
    pub seed: u64,
    pub bound_alphabets: Vec<u32>,
    pub bound_ratio: f64,
    pub bound_types: u32,
    /// Peak diffusion rates for the bound sweep.
    pub r_max_grid: Vec<f64>,
    pub mu_units: MuUnits,
    pub output_dir: PathBuf,
    pub error_csv: PathBuf,
    pub bound_csv: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        use Family::*;
        Self {
            channel: ChannelParams::new(0.22, 0.04, 20.0).expect("default channel"),
            distance_um: None,
            slot_s: None,
            schemes: vec![(Csk, 2), (Csk, 4), (Mosk, 2), (Mosk, 4), (Mocsk, 2), (Mocsk, 4)],
            power_grid: log_grid(1.0, 1000.0, 20),
            csk_p2_variant: None,
            mc_symbols: 100_000,
            seed: 1,
            bound_alphabets: vec![2, 4, 8, 16],
            bound_ratio: 0.5,
            bound_types: 2,
            r_max_grid: log_grid(1.0, 1000.0, 20),
            mu_units: MuUnits::AsPrinted,
            output_dir: PathBuf::from("."),
            error_csv: PathBuf::from("error_sweep.csv"),
            bound_csv: PathBuf::from("bound_sweep.csv"),
        }
    }
}

/// `ppd` log-spaced points per decade from `min` to `max`, both included.
pub fn log_grid(min: f64, max: f64, ppd: u32) -> Vec<f64> {
    let decades = (max / min).log10();
    let n = (decades * ppd as f64).round() as i32;
    (0..=n).map(|i| min * 10f64.powf(i as f64 / ppd as f64)).collect()
}

const KEYS: &[&str] = &[
    "p1",
    "p2",
    "lambda0",
    "distance_um",
    "slot_s",
    "schemes",
    "power_grid",
    "power_min",
    "power_max",
    "power_points_per_decade",
    "csk_p2_variant",
    "mc_symbols",
    "seed",
    "bound_alphabets",
    "bound_ratio",
    "bound_types",
    "r_max_grid",
    "r_max_min",
    "r_max_max",
    "r_max_points_per_decade",
    "mu_units",
    "output_dir",
    "error_csv",
    "bound_csv",
];

impl ExperimentConfig {
    /// Read and validate a config file. Returns the config and any warnings.
    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<(Self, Vec<String>)> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut cfg = Self::default();
        let mut warnings = Vec::new();

        let mut props = Vec::new();
        for (section, p) in ini.iter() {
            if let Some(name) = section {
                return Err(Error::config(format!("sections are not supported (found [{name}])")));
            }
            for (k, v) in p.iter() {
                if !KEYS.contains(&k) {
                    return Err(Error::config(format!("unknown key `{k}`")));
                }
                props.push((k.to_owned(), v.trim().to_owned()));
            }
        }
        let get = |key: &str| props.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

        let p1 = opt_f64(get("p1"), "p1")?;
        let p2 = opt_f64(get("p2"), "p2")?;
        let lambda0 = opt_f64(get("lambda0"), "lambda0")?.unwrap_or(cfg.channel.lambda0());
        cfg.distance_um = opt_f64(get("distance_um"), "distance_um")?;
        cfg.slot_s = opt_f64(get("slot_s"), "slot_s")?;
        if cfg.distance_um.is_some() && cfg.slot_s.is_some() && p1.is_none() && p2.is_none() {
            warnings.push(
                "distance_um and slot_s are recorded but not used; hitting probabilities come from p1/p2 (defaults in effect)"
                    .to_owned(),
            );
        }
        cfg.channel = ChannelParams::new(p1.unwrap_or(cfg.channel.p1()), p2.unwrap_or(cfg.channel.p2()), lambda0)
            .map_err(|e| Error::config(e.to_string()))?;

        if let Some(v) = get("schemes") {
            cfg.schemes = split(v).map(parse_scheme).collect::<Result<_>>()?;
        }
        cfg.power_grid = grid(&get, "power", cfg.power_grid)?;
        cfg.r_max_grid = grid(&get, "r_max", cfg.r_max_grid)?;
        cfg.csk_p2_variant = opt_f64(get("csk_p2_variant"), "csk_p2_variant")?;
        if let Some(v) = get("mc_symbols") {
            cfg.mc_symbols = parse_num(v, "mc_symbols")?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = parse_num(v, "seed")?;
        }
        if let Some(v) = get("bound_alphabets") {
            cfg.bound_alphabets = split(v).map(|s| parse_num(s, "bound_alphabets")).collect::<Result<_>>()?;
        }
        if let Some(r) = opt_f64(get("bound_ratio"), "bound_ratio")? {
            cfg.bound_ratio = r;
        }
        if let Some(v) = get("bound_types") {
            cfg.bound_types = parse_num(v, "bound_types")?;
        }
        if let Some(v) = get("mu_units") {
            cfg.mu_units = match v {
                "printed" => MuUnits::AsPrinted,
                "nats" => MuUnits::Nats,
                other => return Err(Error::config(format!("mu_units must be `printed` or `nats`, got `{other}`"))),
            };
        }
        if let Some(v) = get("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = get("error_csv") {
            cfg.error_csv = PathBuf::from(v);
        }
        if let Some(v) = get("bound_csv") {
            cfg.bound_csv = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(&self.power_grid, "power grid")?;
        check_grid(&self.r_max_grid, "r_max grid")?;
        if self.schemes.is_empty() {
            return Err(Error::config("no schemes selected"));
        }
        if self.mc_symbols < MIN_MC_SYMBOLS {
            return Err(Error::config(format!("mc_symbols must be >= {MIN_MC_SYMBOLS}")));
        }
        if self.bound_alphabets.is_empty() || self.bound_alphabets.iter().any(|&b| b < 2) {
            return Err(Error::config("bound_alphabets must be nonempty with every entry >= 2"));
        }
        if !(self.bound_ratio > 0.0 && self.bound_ratio <= 1.0) {
            return Err(Error::config("bound_ratio must be in (0, 1]"));
        }
        if self.bound_types == 0 {
            return Err(Error::config("bound_types must be >= 1"));
        }
        if let Some(p2) = self.csk_p2_variant {
            self.channel.with_p2(p2).map_err(|e| Error::config(format!("csk_p2_variant: {e}")))?;
        }
        Ok(())
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| self.output_dir.clone())
    }

    pub fn error_csv_path(&self) -> PathBuf {
        self.resolved_output_dir().join(&self.error_csv)
    }

    pub fn bound_csv_path(&self) -> PathBuf {
        self.resolved_output_dir().join(&self.bound_csv)
    }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("{key}: cannot parse `{v}`")))
}

fn opt_f64(v: Option<&str>, key: &str) -> Result<Option<f64>> {
    v.map(|s| parse_num::<f64>(s, key)).transpose()
}

/// `BCSK`, `QMOSK` or `<L>-<FAMILY>` such as `8-MOCSK`.
pub fn parse_scheme(label: &str) -> Result<(Family, usize)> {
    let upper = label.to_ascii_uppercase();
    let (levels, fam) = if let Some((n, f)) = upper.split_once('-') {
        (parse_num::<usize>(n, "schemes")?, f.to_owned())
    } else if let Some(f) = upper.strip_prefix('B') {
        (2, f.to_owned())
    } else if let Some(f) = upper.strip_prefix('Q') {
        (4, f.to_owned())
    } else {
        return Err(Error::config(format!("unknown scheme `{label}`")));
    };
    let family = match fam.as_str() {
        "CSK" => Family::Csk,
        "MOSK" => Family::Mosk,
        "MOCSK" => Family::Mocsk,
        _ => return Err(Error::config(format!("unknown scheme `{label}`"))),
    };
    if levels < 2 || !levels.is_power_of_two() {
        return Err(Error::config(format!("scheme `{label}`: alphabet size must be a power of two")));
    }
    Ok((family, levels))
}

fn grid<'a>(get: &impl Fn(&str) -> Option<&'a str>, prefix: &str, default: Vec<f64>) -> Result<Vec<f64>> {
    let key = |suffix: &str| format!("{prefix}_{suffix}");
    if let Some(v) = get(&key("grid")) {
        return split(v).map(|s| parse_num(s, &key("grid"))).collect();
    }
    let min = opt_f64(get(&key("min")), &key("min"))?;
    let max = opt_f64(get(&key("max")), &key("max"))?;
    let ppd = get(&key("points_per_decade")).map(|v| parse_num::<u32>(v, &key("points_per_decade"))).transpose()?;
    if min.is_none() && max.is_none() && ppd.is_none() {
        return Ok(default);
    }
    let min = min.unwrap_or(default[0]);
    let max = max.unwrap_or(*default.last().unwrap_or(&min));
    let ppd = ppd.unwrap_or(20);
    if !(min > 0.0 && max >= min && ppd > 0) {
        return Err(Error::config(format!("{prefix} grid needs 0 < min <= max and points_per_decade > 0")));
    }
    Ok(log_grid(min, max, ppd))
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(format!("{what} is empty")));
    }
    if grid.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::config(format!("{what} must be positive and finite")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(format!("{what} must be strictly increasing")));
    }
    Ok(())
}
