//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use demandwave::contract::parse_timestamp;
use demandwave::GridSpec;

use crate::failure::Failure;

/// `(key, default, description)`
type KeySpec = (&'static str, &'static str, &'static str);

const GRID_KEYS: &[KeySpec] = &[
    ("lon_min", "116", "western edge in degrees"),
    ("lon_max", "116.8", "eastern edge in degrees"),
    ("lat_min", "39.8", "southern edge in degrees"),
    ("lat_max", "40", "northern edge in degrees"),
    ("t_min", "2017-07-15T00:00:00Z", "first instant of the time axis"),
    ("t_max", "2017-08-13T00:00:00Z", "last instant of the time axis"),
    ("n", "64", "cells per axis (power of two)"),
];

const SHRINK_KEYS: &[KeySpec] = &[
    ("bank", "sym8", "filter bank: haar, db4 or sym8"),
    ("depth", "auto", "decomposition levels, auto = log2(n) - 2"),
    ("rule", "soft", "hard or soft thresholding"),
];

pub const SIMULATE_KEYS: &[KeySpec] = &[
    ("n_habitual", "300", "habitual riders"),
    ("n_casual", "2000", "casual riders"),
    ("periods", "10,18,36,247", "planted cycle lengths in time cells"),
    ("ou_sigma", "0.01", "home-range standard deviation in degrees"),
    ("ou_tau", "21600", "home-range reversion time in seconds"),
    ("casual_rate", "1.5", "mean contracts per casual rider"),
    ("jitter", "1", "start-time jitter as a fraction of half a cell"),
    ("phase_spread", "1", "share of each cycle that phases are drawn from"),
];

pub const BIN_KEYS: &[KeySpec] = &[
    ("input", "contracts.csv", "contract CSV"),
    ("strict", "false", "fail on the first malformed row"),
];

pub const DENOISE_KEYS: &[KeySpec] = &[
    ("input", "tensor.wdt", "tensor binary"),
    ("threshold", "budget:3", "manual:<lambda>, universal, sure or budget:<L>"),
    ("sigma", "estimate", "noise scale or estimate"),
    ("level_range", "all", "levels to threshold: all or <lo>-<hi>, 1 = finest"),
    ("records", "auto", "record count for the compression ratio, auto = tensor total"),
];

pub const EVALUATE_KEYS: &[KeySpec] = &[
    ("input", "tensor.wdt", "tensor binary"),
    ("levels", "3,4,5,6,7,8", "budget levels"),
    ("periods", "10,18,36,247", "forecast leads in time cells"),
    ("records", "auto", "record count for the compression column, auto = tensor total"),
    ("clamp", "false", "score negative forecasts as zero"),
    ("holdout", "false", "score only targets in the last quarter of the time axis"),
];

pub const SURFACE_KEYS: &[KeySpec] = &[
    ("input", "tensor.wdt", "truth tensor binary"),
    ("denoised", "none", "forecast tensor binary, none = use the input"),
    ("starts", "auto", "start periods <a>-<b>, auto = first half of the axis"),
    ("leads", "auto", "leads <a>-<b>, auto = 1 to min(500, n/2)"),
];

pub const EXPLORE_KEYS: &[KeySpec] = &[
    ("input", "contracts.csv", "contract CSV"),
    ("tensor", "none", "tensor binary for the spectra, none = bin the input"),
    ("rider", "auto", "rider for the variogram, auto = most contracts"),
    ("lags", "40", "variogram lags in median gaps"),
    ("pareto_scale", "auto", "Pareto scale, auto = smallest count"),
    ("peaks", "8", "periodogram peaks listed"),
];

pub const GLOBAL_KEYS: &[KeySpec] = &[
    ("seed", "0", "random seed"),
    ("threads", "0", "worker threads, 0 = all cores"),
    ("out", ".", "output directory"),
];

fn command_keys(command: &str) -> Vec<KeySpec> {
    let mut keys: Vec<KeySpec> = GLOBAL_KEYS.to_vec();
    let specific: &[&[KeySpec]] = match command {
        "simulate" => &[GRID_KEYS, SIMULATE_KEYS],
        "bin" => &[GRID_KEYS, BIN_KEYS],
        "denoise" => &[SHRINK_KEYS, DENOISE_KEYS],
        "evaluate" => &[SHRINK_KEYS, EVALUATE_KEYS],
        "surface" => &[SURFACE_KEYS],
        "explore" => &[GRID_KEYS, EXPLORE_KEYS],
        _ => &[],
    };
    for group in specific {
        for k in *group {
            if !keys.iter().any(|e| e.0 == k.0) {
                keys.push(*k);
            }
        }
    }
    keys
}

fn known_anywhere(key: &str) -> bool {
    ["simulate", "bin", "denoise", "evaluate", "surface", "explore"]
        .iter()
        .any(|c| command_keys(c).iter().any(|k| k.0 == key))
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::config(format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Failure::config(format!("{origin}:{}: empty key", i + 1)));
        }
        if !known_anywhere(k) {
            return Err(Failure::config(format!("{origin}:{}: unknown key `{k}`", i + 1)));
        }
        if out.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(Failure::config(format!("{origin}:{}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

/// Fully resolved settings of one subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults, then the config file, then command-line pairs, then flags.
    pub fn resolve(
        command: &str,
        file: Option<&Path>,
        pairs: &[String],
        flags: &[(&str, Option<String>)],
    ) -> Result<Self, Failure> {
        let keys = command_keys(command);
        let mut values: BTreeMap<String, String> = keys.iter().map(|k| (k.0.to_owned(), k.1.to_owned())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::missing(format!("config file {}: {e}", path.display())))?;
            for (k, v) in parse_pairs(&text, &path.display().to_string())? {
                if values.contains_key(&k) {
                    values.insert(k, v);
                }
            }
        }
        let joined = pairs.join("\n");
        for (k, v) in parse_pairs(&joined, "command line")? {
            if !values.contains_key(&k) {
                return Err(Failure::config(format!("key `{k}` does not apply to `{command}`")));
            }
            values.insert(k, v);
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert((*k).to_owned(), v.clone());
            }
        }
        Ok(Self { command: command.to_owned(), values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key `{key}` not registered for {}", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| Failure::config(format!("key `{key}`: cannot parse `{raw}`: {e}")))
    }

    /// `None` for `auto`/`none`.
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            "auto" | "none" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Failure::config(format!("key `{key}`: cannot parse `{s}`: {e}"))))
            .collect()
    }

    /// Inclusive `<a>-<b>` range, `None` for `auto`/`all`.
    pub fn span(&self, key: &str) -> Result<Option<(usize, usize)>, Failure> {
        let raw = self.raw(key);
        if matches!(raw, "auto" | "all") {
            return Ok(None);
        }
        let bad = || Failure::config(format!("key `{key}`: expected `<a>-<b>`, got `{raw}`"));
        let (a, b) = raw.split_once('-').ok_or_else(bad)?;
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        Ok(Some((a, b)))
    }

    pub fn grid(&self) -> Result<GridSpec, Failure> {
        let time = |key: &str| {
            let raw = self.raw(key);
            parse_timestamp(raw)
                .ok_or_else(|| Failure::config(format!("key `{key}`: expected YYYY-MM-DDTHH:MM:SSZ, got `{raw}`")))
        };
        let g = GridSpec {
            lon_min: self.get("lon_min")?,
            lon_max: self.get("lon_max")?,
            lat_min: self.get("lat_min")?,
            lat_max: self.get("lat_max")?,
            t_min: time("t_min")?,
            t_max: time("t_max")?,
            n: self.get("n")?,
        };
        g.validate().map_err(|e| Failure::config(e.to_string()))?;
        Ok(g)
    }

    /// Grid bounds of the defaults with the side taken from a tensor file.
    pub fn default_grid(n: usize) -> GridSpec {
        GridSpec::beijing().with_n(n)
    }

    /// Sorted `key = value` lines, loadable again with `--config`.
    pub fn render(&self, extra: &[(&str, String)]) -> String {
        let mut s = format!("# resolved configuration for `{}`\n", self.command);
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (k, v) in extra {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }
}

/// Help text listing every key of a subcommand.
pub fn describe(command: &str) -> String {
    let mut s = String::new();
    for (k, d, help) in command_keys(command) {
        let _ = writeln!(s, "  {k:<13} {help} [default: {d}]");
    }
    s
}
