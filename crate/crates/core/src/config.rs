//! Line-oriented scenario files.
//!
//! One `key = value` per line; `#` starts a comment. Indices in keys and
//! user sets are one-based. Complex vectors are bracketed, comma-separated
//! `re+imj` values:
//!
//! ```text
//! n_tx = 4
//! n_users = 3
//! n_channels = 1
//! theta1 = pi/9
//! noise_power = 1
//! total_power = 10
//! user_set.1 = [1, 2, 3]
//! h.1.1 = [1+0j, 1+0j, 1+0j, 1+0j]
//! ga.population_size = 100
//! ```
//!
//! When no `h.<k>.<g>` keys are present the channels come from the
//! three-user generator. If any are present, every scheduled pair must be.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{generate_three_user_channels, parse_angle, ChannelSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::linalg::{CVector, Complex};
use crate::precoding::CommonPrecoderStrategy;

/// Everything a scenario file configures.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub channels: ChannelSet,
    /// Channels were listed in the file rather than generated.
    pub explicit_channels: bool,
    pub common_precoder_strategy: CommonPrecoderStrategy,
    pub precoder_seed: u64,
    pub ga: GaConfig,
}

impl Scenario {
    /// The generated three-user scenario with default settings.
    pub fn three_user(theta1: f64) -> Result<Self> {
        let params = ScenarioParams::three_user(theta1);
        let channels = generate_three_user_channels(&params)?;
        Ok(Scenario {
            params,
            channels,
            explicit_channels: false,
            common_precoder_strategy: CommonPrecoderStrategy::default(),
            precoder_seed: 0,
            ga: GaConfig::default(),
        })
    }

    /// Same scenario with a different phase; generated channels are rebuilt,
    /// explicit ones are kept.
    pub fn with_theta1(&self, theta1: f64, theta2: Option<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.params.theta1 = theta1;
        out.params.theta2 = theta2.unwrap_or(2.0 * theta1);
        if !out.explicit_channels {
            out.channels = generate_three_user_channels(&out.params)?;
        }
        Ok(out)
    }
}

/// Reads the scenario parameters and channels of a file.
pub fn load_channels(path: impl AsRef<Path>) -> Result<(ScenarioParams, ChannelSet)> {
    let s = load_scenario(path)?;
    Ok((s.params, s.channels))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config_global(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<()> {
    std::fs::write(path, write_scenario(scenario))?;
    Ok(())
}

const REQUIRED: [&str; 4] = ["n_tx", "n_users", "noise_power", "total_power"];

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line_no, format!("expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(line_no, "empty key"));
        }
        if entries
            .insert(key.clone(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::config(line_no, format!("duplicate key `{key}`")));
        }
    }
    if entries.is_empty() {
        return Err(Error::config_global("scenario file is empty"));
    }
    for key in REQUIRED {
        if !entries.contains_key(key) {
            return Err(Error::config_global(format!(
                "missing required key `{key}`"
            )));
        }
    }

    let mut reader = Reader { entries };
    let n_tx: usize = reader.take("n_tx")?.expect("required");
    let n_users: usize = reader.take("n_users")?.expect("required");
    let n_channels: usize = reader.take("n_channels")?.unwrap_or(1);
    let theta1 = reader
        .take_angle("theta1")?
        .unwrap_or(std::f64::consts::PI / 9.0);
    let theta2 = reader.take_angle("theta2")?.unwrap_or(2.0 * theta1);
    let mut params = ScenarioParams {
        n_tx,
        n_users,
        n_channels,
        user_sets: Vec::with_capacity(n_channels),
        gamma1: reader.take("gamma1")?.unwrap_or(1.0),
        gamma2: reader.take("gamma2")?.unwrap_or(1.0),
        theta1,
        theta2,
        noise_power: reader.take("noise_power")?.expect("required"),
        total_power: reader.take("total_power")?.expect("required"),
        h3_literal: reader.take("h3_literal")?.unwrap_or(false),
    };
    for g in 0..n_channels {
        let set = match reader.remove(&format!("user_set.{}", g + 1)) {
            Some((line, v)) => parse_index_list(&v, n_users).map_err(|m| Error::config(line, m))?,
            None => (0..n_users).collect(),
        };
        params.user_sets.push(set);
    }
    params.validate()?;

    let common_precoder_strategy = match reader.remove("common_precoder_strategy") {
        Some((line, v)) => v
            .parse()
            .map_err(|_| Error::config(line, format!("unknown strategy `{v}`")))?,
        None => CommonPrecoderStrategy::default(),
    };
    let precoder_seed = reader.take("precoder_seed")?.unwrap_or(0);

    let defaults = GaConfig::default();
    let ga = GaConfig {
        population_size: reader
            .take("ga.population_size")?
            .unwrap_or(defaults.population_size),
        mutation_rate: reader
            .take("ga.mutation_rate")?
            .unwrap_or(defaults.mutation_rate),
        mutation_scale: reader
            .take("ga.mutation_scale")?
            .unwrap_or(defaults.mutation_scale),
        elite_rate: reader.take("ga.elite_rate")?.unwrap_or(defaults.elite_rate),
        crossover_rate: reader
            .take("ga.crossover_rate")?
            .unwrap_or(defaults.crossover_rate),
        max_generations: reader
            .take("ga.max_generations")?
            .unwrap_or(defaults.max_generations),
        stall_generations: reader
            .take("ga.stall_generations")?
            .unwrap_or(defaults.stall_generations),
        seed: reader.take("ga.seed")?.unwrap_or(defaults.seed),
    };
    ga.validate()?;

    let mut explicit = ChannelSet::new(n_tx);
    let channel_keys: Vec<String> = reader
        .entries
        .keys()
        .filter(|k| k.starts_with("h."))
        .cloned()
        .collect();
    for key in &channel_keys {
        let (line, value) = reader.remove(key).expect("listed key");
        let (k, g) =
            parse_channel_key(key, n_users, n_channels).map_err(|m| Error::config(line, m))?;
        let v = parse_cvector(&value).map_err(|m| Error::config(line, m))?;
        explicit.insert(k, g, v)?;
    }

    if let Some((key, (line, _))) = reader.entries.iter().next() {
        return Err(Error::config(*line, format!("unknown key `{key}`")));
    }

    let explicit_channels = !channel_keys.is_empty();
    let channels = if explicit_channels {
        explicit.validate(&params)?;
        explicit
    } else {
        generate_three_user_channels(&params)?
    };
    Ok(Scenario {
        params,
        channels,
        explicit_channels,
        common_precoder_strategy,
        precoder_seed,
        ga,
    })
}

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn remove(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(line, format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn take_angle(&mut self, key: &str) -> Result<Option<f64>> {
        match self.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse_angle(&v)
                .map(Some)
                .ok_or_else(|| Error::config(line, format!("invalid angle `{v}` for `{key}`"))),
        }
    }
}

fn strip_brackets(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .unwrap_or(s)
}

fn parse_index_list(s: &str, n_users: usize) -> std::result::Result<Vec<usize>, String> {
    strip_brackets(s)
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(k) if (1..=n_users).contains(&k) => Ok(k - 1),
            _ => Err(format!(
                "invalid user index `{t}` (users are 1..={n_users})"
            )),
        })
        .collect()
}

fn parse_channel_key(
    key: &str,
    n_users: usize,
    n_channels: usize,
) -> std::result::Result<(usize, usize), String> {
    let mut parts = key.split('.');
    let (Some("h"), Some(k), Some(g), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!(
            "malformed channel key `{key}`, expected h.<user>.<channel>"
        ));
    };
    let k: usize = k
        .parse()
        .map_err(|_| format!("bad user index in `{key}`"))?;
    let g: usize = g
        .parse()
        .map_err(|_| format!("bad channel index in `{key}`"))?;
    if !(1..=n_users).contains(&k) || !(1..=n_channels).contains(&g) {
        return Err(format!(
            "`{key}` is outside {n_users} users x {n_channels} channels"
        ));
    }
    Ok((k - 1, g - 1))
}

/// Parses `re+imj`, `re-imj`, `imj`, or a plain real.
pub fn parse_complex(text: &str) -> std::result::Result<Complex, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("invalid complex number `{text}`");
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s
            .parse::<f64>()
            .map(|re| Complex::new(re, 0.0))
            .map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        t => t.parse::<f64>().map_err(|_| err()),
    };
    match split {
        Some(i) => Ok(Complex::new(
            body[..i].parse().map_err(|_| err())?,
            imag(&body[i..])?,
        )),
        None => Ok(Complex::new(0.0, imag(body)?)),
    }
}

pub fn parse_cvector(text: &str) -> std::result::Result<CVector, String> {
    let t = text.trim();
    if !(t.starts_with('[') && t.ends_with(']')) {
        return Err(format!("complex vector must be bracketed, got `{t}`"));
    }
    let inner = &t[1..t.len() - 1];
    if inner.trim().is_empty() {
        return Ok(CVector::new(Vec::new()));
    }
    inner
        .split(',')
        .map(parse_complex)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(CVector::new)
}

/// Shortest representation that parses back to the same bits.
pub fn format_complex(z: Complex) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

pub fn format_cvector(v: &CVector) -> String {
    let parts: Vec<String> = v.iter().map(|&z| format_complex(z)).collect();
    format!("[{}]", parts.join(", "))
}

/// Serializes a scenario; [`parse_scenario`] reproduces it exactly.
pub fn write_scenario(s: &Scenario) -> String {
    let p = &s.params;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("n_tx", p.n_tx.to_string());
    kv("n_users", p.n_users.to_string());
    kv("n_channels", p.n_channels.to_string());
    kv("gamma1", p.gamma1.to_string());
    kv("gamma2", p.gamma2.to_string());
    kv("theta1", p.theta1.to_string());
    kv("theta2", p.theta2.to_string());
    kv("h3_literal", p.h3_literal.to_string());
    kv("noise_power", p.noise_power.to_string());
    kv("total_power", p.total_power.to_string());
    for (g, set) in p.user_sets.iter().enumerate() {
        let list: Vec<String> = set.iter().map(|k| (k + 1).to_string()).collect();
        kv(
            &format!("user_set.{}", g + 1),
            format!("[{}]", list.join(", ")),
        );
    }
    kv(
        "common_precoder_strategy",
        s.common_precoder_strategy.to_string(),
    );
    kv("precoder_seed", s.precoder_seed.to_string());
    let ga = &s.ga;
    kv("ga.population_size", ga.population_size.to_string());
    kv("ga.mutation_rate", ga.mutation_rate.to_string());
    kv("ga.mutation_scale", ga.mutation_scale.to_string());
    kv("ga.elite_rate", ga.elite_rate.to_string());
    kv("ga.crossover_rate", ga.crossover_rate.to_string());
    kv("ga.max_generations", ga.max_generations.to_string());
    kv("ga.stall_generations", ga.stall_generations.to_string());
    kv("ga.seed", ga.seed.to_string());
    if s.explicit_channels {
        for ((k, g), h) in s.channels.iter() {
            kv(&format!("h.{}.{}", k + 1, g + 1), format_cvector(h));
        }
    }
    out
}
