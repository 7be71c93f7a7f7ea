//! SINR and Shannon-rate evaluation for one-layer rate splitting.
//!
//! Powers are power coefficients: a stream with coefficient `P` and unit-norm
//! precoder `w` contributes `P |h^H w|^2` at a receiver with channel `h`.
//! Bandwidth is normalized to one, so rates are in bits/s/Hz.
//!
//! Users on a channel are addressed by their *slot*, the position inside that
//! channel's user set. Slot order is also the gene order of [`Problem`].

use std::fmt;

use crate::channel::{ChannelSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::linalg::hermitian_inner;
use crate::precoding::PrecoderSet;

/// Slack allowed on the total-power constraint.
pub const BUDGET_TOL: f64 = 1e-9;

/// Power coefficients `P_g^C` and `P_{k,g}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// One entry per channel.
    pub p_common: Vec<f64>,
    /// `p_private[g][slot]`.
    pub p_private: Vec<Vec<f64>>,
}

impl PowerAllocation {
    pub fn zeros(user_sets: &[Vec<usize>]) -> Self {
        PowerAllocation {
            p_common: vec![0.0; user_sets.len()],
            p_private: user_sets.iter().map(|s| vec![0.0; s.len()]).collect(),
        }
    }

    /// `P_g = P_g^C + Σ_k P_{k,g}`.
    pub fn channel_total(&self, g: usize) -> f64 {
        self.p_common[g] + self.p_private[g].iter().sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        (0..self.p_common.len())
            .map(|g| self.channel_total(g))
            .sum()
    }

    /// Flattened as `[P_1^C, P_{1,1}, .., P_{K_1,1}, P_2^C, ..]`.
    pub fn to_genes(&self) -> Vec<f64> {
        let mut genes = Vec::with_capacity(self.p_private.iter().map(|p| p.len() + 1).sum());
        for (c, private) in self.p_common.iter().zip(&self.p_private) {
            genes.push(*c);
            genes.extend_from_slice(private);
        }
        genes
    }

    /// Inverse of [`PowerAllocation::to_genes`] for the given channel sizes.
    pub fn from_genes(
        genes: &[f64],
        users_per_channel: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut p_common = Vec::new();
        let mut p_private = Vec::new();
        let mut at = 0;
        for n in users_per_channel {
            let chunk = genes.get(at..at + n + 1).ok_or(Error::Dimension {
                expected: at + n + 1,
                found: genes.len(),
            })?;
            p_common.push(chunk[0]);
            p_private.push(chunk[1..].to_vec());
            at += n + 1;
        }
        if at != genes.len() {
            return Err(Error::Dimension {
                expected: at,
                found: genes.len(),
            });
        }
        Ok(PowerAllocation {
            p_common,
            p_private,
        })
    }
}

/// Effective gains of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    /// Global user index of each slot.
    pub users: Vec<usize>,
    /// `|h_k^H w^C|^2` per receiving slot.
    pub common: Vec<f64>,
    /// `private[k][m] = |h_k^H w_m|^2`, receiver slot `k`, stream slot `m`.
    pub private: Vec<Vec<f64>>,
}

/// Precomputed `|h^H w|^2` for every receiver/stream pair.
///
/// Immutable after construction and `Sync`, so one table can back many
/// concurrent fitness evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub channels: Vec<ChannelGains>,
}

impl EffectiveGains {
    pub fn users_per_channel(&self) -> impl Iterator<Item = usize> + '_ {
        self.channels.iter().map(|c| c.users.len())
    }

    pub fn allocation_len(&self) -> usize {
        self.users_per_channel().map(|n| n + 1).sum()
    }

    /// True when every gain is zero, so no allocation yields a positive rate.
    pub fn is_all_zero(&self) -> bool {
        self.channels.iter().all(|c| {
            c.common.iter().all(|&x| x == 0.0) && c.private.iter().flatten().all(|&x| x == 0.0)
        })
    }
}

pub fn effective_gains(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    params: &ScenarioParams,
) -> Result<EffectiveGains> {
    let gain = |a, b| hermitian_inner(a, b).map(|z| z.norm_sqr());
    let per_channel = params
        .user_sets
        .iter()
        .enumerate()
        .map(|(g, users)| {
            let w_common = precoders.w_common.get(g).ok_or_else(|| {
                Error::Scenario(format!("missing common precoder for channel {}", g + 1))
            })?;
            let mut common = Vec::with_capacity(users.len());
            let mut private = Vec::with_capacity(users.len());
            for &k in users {
                let h = channels.require(k, g)?;
                common.push(gain(h, w_common)?);
                let row = users
                    .iter()
                    .map(|&m| {
                        let w = precoders.private(m, g).ok_or_else(|| {
                            Error::Scenario(format!(
                                "missing private precoder for user {} on channel {}",
                                m + 1,
                                g + 1
                            ))
                        })?;
                        gain(h, w)
                    })
                    .collect::<Result<Vec<_>>>()?;
                private.push(row);
            }
            Ok(ChannelGains {
                users: users.clone(),
                common,
                private,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectiveGains {
        channels: per_channel,
    })
}

/// Common-stream SINR at receiver `slot` of channel `g`: every private
/// stream on the channel, the receiver's own included, is interference.
pub fn sinr_common(
    slot: usize,
    g: usize,
    alloc: &PowerAllocation,
    gains: &EffectiveGains,
    n0: f64,
) -> f64 {
    let ch = &gains.channels[g];
    let interference: f64 = alloc.p_private[g]
        .iter()
        .zip(&ch.private[slot])
        .map(|(p, x)| p * x)
        .sum();
    alloc.p_common[g] * ch.common[slot] / (interference + n0)
}

/// Private-stream SINR after the common stream has been cancelled.
pub fn sinr_private(
    slot: usize,
    g: usize,
    alloc: &PowerAllocation,
    gains: &EffectiveGains,
    n0: f64,
) -> f64 {
    let ch = &gains.channels[g];
    let row = &ch.private[slot];
    let powers = &alloc.p_private[g];
    let interference: f64 = powers
        .iter()
        .zip(row)
        .enumerate()
        .filter(|&(m, _)| m != slot)
        .map(|(_, (p, x))| p * x)
        .sum();
    powers[slot] * row[slot] / (interference + n0)
}

/// `log2(1 + min_k SINR^C_k)` over the users of channel `g`.
pub fn common_rate(
    g: usize,
    alloc: &PowerAllocation,
    gains: &EffectiveGains,
    n0: f64,
) -> Result<f64> {
    let n = gains.channels[g].users.len();
    if n == 0 {
        return Err(Error::Scenario(format!("channel {} has no users", g + 1)));
    }
    let min = (0..n)
        .map(|k| sinr_common(k, g, alloc, gains, n0))
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 + min).log2())
}

pub fn private_rate(
    slot: usize,
    g: usize,
    alloc: &PowerAllocation,
    gains: &EffectiveGains,
    n0: f64,
) -> f64 {
    (1.0 + sinr_private(slot, g, alloc, gains, n0)).log2()
}

/// Per-stream rates and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `R_g^C` per channel.
    pub r_common: Vec<f64>,
    /// `R_{k,g}` as `r_private[g][slot]`.
    pub r_private: Vec<Vec<f64>>,
    pub sum_rate: f64,
}

impl RateReport {
    /// Builds a report whose `sum_rate` is accumulated channel by channel.
    pub fn from_parts(r_common: Vec<f64>, r_private: Vec<Vec<f64>>) -> Self {
        let sum_rate = r_common
            .iter()
            .zip(&r_private)
            .map(|(c, p)| c + p.iter().sum::<f64>())
            .sum();
        RateReport {
            r_common,
            r_private,
            sum_rate,
        }
    }

    pub fn total_common(&self) -> f64 {
        self.r_common.iter().sum()
    }

    /// Private rate of each global user summed over its channels.
    pub fn private_per_user(&self, gains: &EffectiveGains, n_users: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_users];
        for (ch, rates) in gains.channels.iter().zip(&self.r_private) {
            for (&k, r) in ch.users.iter().zip(rates) {
                out[k] += r;
            }
        }
        out
    }
}

/// Evaluates the sum-rate objective. A channel without users contributes
/// nothing.
pub fn sum_rate(alloc: &PowerAllocation, gains: &EffectiveGains, n0: f64) -> RateReport {
    let mut r_common = Vec::with_capacity(gains.channels.len());
    let mut r_private = Vec::with_capacity(gains.channels.len());
    for (g, ch) in gains.channels.iter().enumerate() {
        r_common.push(common_rate(g, alloc, gains, n0).unwrap_or(0.0));
        r_private.push(
            (0..ch.users.len())
                .map(|k| private_rate(k, g, alloc, gains, n0))
                .collect(),
        );
    }
    RateReport::from_parts(r_common, r_private)
}

/// A single broken constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeCommon {
        channel: usize,
        value: f64,
    },
    NegativePrivate {
        user: usize,
        channel: usize,
        value: f64,
    },
    NonFinite {
        gene: usize,
    },
    BudgetExceeded {
        total: f64,
        budget: f64,
    },
    Shape(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeCommon { channel, value } => {
                write!(
                    f,
                    "common power on channel {} is negative ({value})",
                    channel + 1
                )
            }
            Violation::NegativePrivate {
                user,
                channel,
                value,
            } => {
                write!(
                    f,
                    "private power of user {} on channel {} is negative ({value})",
                    user + 1,
                    channel + 1
                )
            }
            Violation::NonFinite { gene } => write!(f, "power coefficient #{gene} is not finite"),
            Violation::BudgetExceeded { total, budget } => {
                write!(f, "total power {total} exceeds budget {budget}")
            }
            Violation::Shape(msg) => f.write_str(msg),
        }
    }
}

/// Every constraint the allocation breaks: nonnegativity of each
/// coefficient and `Σ_g P_g <= P_T` (with [`BUDGET_TOL`] slack).
pub fn check_feasible(alloc: &PowerAllocation, params: &ScenarioParams) -> Vec<Violation> {
    let mut out = Vec::new();
    if alloc.p_common.len() != params.user_sets.len()
        || alloc.p_private.len() != params.user_sets.len()
    {
        out.push(Violation::Shape(format!(
            "allocation covers {} channels, scenario has {}",
            alloc.p_common.len(),
            params.user_sets.len()
        )));
        return out;
    }
    for (g, (users, private)) in params.user_sets.iter().zip(&alloc.p_private).enumerate() {
        if users.len() != private.len() {
            out.push(Violation::Shape(format!(
                "channel {} has {} private powers for {} users",
                g + 1,
                private.len(),
                users.len()
            )));
            return out;
        }
    }
    for (i, x) in alloc.to_genes().iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { gene: i });
        }
    }
    for (g, &c) in alloc.p_common.iter().enumerate() {
        if c < 0.0 {
            out.push(Violation::NegativeCommon {
                channel: g,
                value: c,
            });
        }
        for (&k, &p) in params.user_sets[g].iter().zip(&alloc.p_private[g]) {
            if p < 0.0 {
                out.push(Violation::NegativePrivate {
                    user: k,
                    channel: g,
                    value: p,
                });
            }
        }
    }
    let total = alloc.total();
    if total > params.total_power + BUDGET_TOL {
        out.push(Violation::BudgetExceeded {
            total,
            budget: params.total_power,
        });
    }
    out
}

/// Everything an optimizer needs to score a flat power vector.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gains: EffectiveGains,
    pub noise_power: f64,
    pub total_power: f64,
}

impl Problem {
    pub fn new(gains: EffectiveGains, noise_power: f64, total_power: f64) -> Self {
        Problem {
            gains,
            noise_power,
            total_power,
        }
    }

    /// Precodes the scenario and tabulates its gains.
    pub fn from_scenario(
        channels: &ChannelSet,
        precoders: &PrecoderSet,
        params: &ScenarioParams,
    ) -> Result<Self> {
        Ok(Problem::new(
            effective_gains(channels, precoders, params)?,
            params.noise_power,
            params.total_power,
        ))
    }

    pub fn gene_count(&self) -> usize {
        self.gains.allocation_len()
    }

    pub fn decode(&self, genes: &[f64]) -> Result<PowerAllocation> {
        PowerAllocation::from_genes(genes, self.gains.users_per_channel())
    }

    pub fn evaluate(&self, alloc: &PowerAllocation) -> RateReport {
        sum_rate(alloc, &self.gains, self.noise_power)
    }

    /// Sum rate of a flat gene vector; panics on a length mismatch.
    pub fn sum_rate_of(&self, genes: &[f64]) -> f64 {
        let alloc = self
            .decode(genes)
            .expect("gene vector length matches the problem");
        self.evaluate(&alloc).sum_rate
    }
}
