//! Scenario parameters and per-user, per-channel channel vectors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CVector, Complex};

/// Static description of a downlink scenario.
///
/// User and channel indices are zero-based in memory; the scenario file uses
/// one-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Number of BS transmit antennas.
    pub n_tx: usize,
    pub n_users: usize,
    /// Number of orthogonal subcarriers.
    pub n_channels: usize,
    /// Users scheduled on each channel.
    pub user_sets: Vec<Vec<usize>>,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Phase step of user 2's array response (radians).
    pub theta1: f64,
    /// Phase step of user 3's array response (radians).
    pub theta2: f64,
    pub noise_power: f64,
    pub total_power: f64,
    /// Use `theta1` for the second entry of user 3's channel, as literally
    /// printed in the original scenario description.
    pub h3_literal: bool,
}

impl ScenarioParams {
    /// The four-antenna, three-user, single-channel scenario with unit gains,
    /// `theta2 = 2 * theta1`, `N0 = 1` and `P_T = 1`.
    pub fn three_user(theta1: f64) -> Self {
        ScenarioParams {
            n_tx: 4,
            n_users: 3,
            n_channels: 1,
            user_sets: vec![vec![0, 1, 2]],
            gamma1: 1.0,
            gamma2: 1.0,
            theta1,
            theta2: 2.0 * theta1,
            noise_power: 1.0,
            total_power: 1.0,
            h3_literal: false,
        }
    }

    /// Sets `N0 = 1` and `P_T = 10^(snr_db / 10)`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_power = 1.0;
        self.total_power = 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_users == 0 || self.n_channels == 0 {
            return Err(Error::Scenario(
                "n_tx, n_users and n_channels must be positive".into(),
            ));
        }
        if self.user_sets.len() != self.n_channels {
            return Err(Error::Scenario(format!(
                "expected {} user sets, found {}",
                self.n_channels,
                self.user_sets.len()
            )));
        }
        for (g, set) in self.user_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Scenario(format!("channel {} has no users", g + 1)));
            }
            if let Some(&k) = set.iter().find(|&&k| k >= self.n_users) {
                return Err(Error::Scenario(format!(
                    "user {} on channel {} exceeds n_users = {}",
                    k + 1,
                    g + 1,
                    self.n_users
                )));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::Scenario(format!(
                    "channel {} lists a user twice",
                    g + 1
                )));
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.noise_power) {
            return Err(Error::Scenario("noise_power must be positive".into()));
        }
        if !positive(self.total_power) {
            return Err(Error::Scenario("total_power must be positive".into()));
        }
        if ![self.gamma1, self.gamma2, self.theta1, self.theta2]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::Scenario("gamma/theta must be finite".into()));
        }
        Ok(())
    }

    /// Genome length: one common plus one private coefficient per scheduled
    /// user, per channel.
    pub fn allocation_len(&self) -> usize {
        self.user_sets.iter().map(|s| s.len() + 1).sum()
    }
}

/// Channel vectors `h_{k,g}` keyed by `(user, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    n_tx: usize,
    h: BTreeMap<(usize, usize), CVector>,
}

impl ChannelSet {
    pub fn new(n_tx: usize) -> Self {
        ChannelSet {
            n_tx,
            h: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, user: usize, channel: usize, h: CVector) -> Result<()> {
        if h.dim() != self.n_tx {
            return Err(Error::Scenario(format!(
                "channel of user {} on channel {} has length {}, expected n_tx = {}",
                user + 1,
                channel + 1,
                h.dim(),
                self.n_tx
            )));
        }
        if !h.is_finite() {
            return Err(Error::Scenario(format!(
                "channel of user {} on channel {} has non-finite entries",
                user + 1,
                channel + 1
            )));
        }
        self.h.insert((user, channel), h);
        Ok(())
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn get(&self, user: usize, channel: usize) -> Option<&CVector> {
        self.h.get(&(user, channel))
    }

    /// Like [`ChannelSet::get`] but reports a missing entry as an error.
    pub fn require(&self, user: usize, channel: usize) -> Result<&CVector> {
        self.get(user, channel).ok_or_else(|| {
            Error::Scenario(format!(
                "missing channel for user {} on channel {}",
                user + 1,
                channel + 1
            ))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &CVector)> {
        self.h.iter()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Checks that every scheduled `(k, g)` has a vector of length `n_tx`.
    pub fn validate(&self, params: &ScenarioParams) -> Result<()> {
        if self.n_tx != params.n_tx {
            return Err(Error::Scenario(format!(
                "channel set built for n_tx = {}, scenario has {}",
                self.n_tx, params.n_tx
            )));
        }
        for (g, set) in params.user_sets.iter().enumerate() {
            for &k in set {
                let h = self.require(k, g)?;
                if h.dim() != params.n_tx {
                    return Err(Error::Scenario(format!(
                        "channel of user {} on channel {} has length {}",
                        k + 1,
                        g + 1,
                        h.dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `gamma * [1, e^{j theta}, e^{j 2 theta}, ...]` of length `n`.
fn array_response(n: usize, gamma: f64, theta: f64) -> CVector {
    CVector::new(
        (0..n)
            .map(|i| Complex::from_polar(gamma, i as f64 * theta))
            .collect(),
    )
}

/// Channels of the parametric three-user scenario:
///
/// * `h1 = [1, 1, 1, 1]`
/// * `h2 = gamma1 [1, e^{j theta1}, e^{j 2 theta1}, e^{j 3 theta1}]`
/// * `h3 = gamma2 [1, e^{j theta2}, e^{j 2 theta2}, e^{j 3 theta2}]`
///
/// With `h3_literal` the second entry of `h3` uses `theta1` instead. The same
/// vectors are placed on every channel the user is scheduled on.
pub fn generate_three_user_channels(params: &ScenarioParams) -> Result<ChannelSet> {
    if params.n_tx != 4 || params.n_users != 3 {
        return Err(Error::Scenario(format!(
            "three-user generator needs n_tx = 4 and n_users = 3, got n_tx = {}, n_users = {}",
            params.n_tx, params.n_users
        )));
    }
    params.validate()?;
    let h1 = CVector::from_real(&[1.0; 4]);
    let h2 = array_response(4, params.gamma1, params.theta1);
    let mut h3 = array_response(4, params.gamma2, params.theta2);
    if params.h3_literal {
        let mut entries = h3.entries().to_vec();
        entries[1] = Complex::from_polar(params.gamma2, params.theta1);
        h3 = CVector::new(entries);
    }
    let per_user = [h1, h2, h3];
    let mut set = ChannelSet::new(4);
    for (g, users) in params.user_sets.iter().enumerate() {
        for &k in users {
            set.insert(k, g, per_user[k].clone())?;
        }
    }
    Ok(set)
}

/// Parses an angle such as `pi/9`, `8pi/9`, `2*pi/9`, `-pi`, or `0.349`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let Some(idx) = s.find("pi") else {
        return s.parse().ok();
    };
    let coef = s[..idx].trim_end_matches('*');
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    let rest = &s[idx + 2..];
    let denom = if rest.is_empty() {
        1.0
    } else {
        rest.strip_prefix('/')?.parse::<f64>().ok()?
    };
    Some(coef * PI / denom)
}
