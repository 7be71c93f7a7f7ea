//! Reference schemes: SDMA, single-cluster NOMA and fixed-split RSMA.

use std::fmt;

use crate::channel::{ChannelSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::linalg::hermitian_inner;
use crate::precoding::PrecoderSet;
use crate::rates::{effective_gains, sum_rate, PowerAllocation, RateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Sdma,
    Noma,
    FpRsma,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Sdma => "sdma",
            Baseline::Noma => "noma",
            Baseline::FpRsma => "fp_rsma",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: Baseline,
    pub report: RateReport,
    /// RSMA coefficients for SDMA and FP-RSMA. For NOMA the private entries
    /// hold the superposition powers and the report comes from the SIC
    /// chain, not from the RSMA rate formulas.
    pub alloc: PowerAllocation,
}

/// Uniform private powers `P_T / (G K_g)` and no common stream.
pub fn sdma_alloc(params: &ScenarioParams) -> PowerAllocation {
    let g_count = params.user_sets.len() as f64;
    PowerAllocation {
        p_common: vec![0.0; params.user_sets.len()],
        p_private: params
            .user_sets
            .iter()
            .map(|s| vec![params.total_power / (g_count * s.len() as f64); s.len()])
            .collect(),
    }
}

/// SDMA is RSMA with the common stream switched off, evaluated through the
/// same rate code.
pub fn sdma_rates(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    params: &ScenarioParams,
) -> Result<BaselineResult> {
    let gains = effective_gains(channels, precoders, params)?;
    let alloc = sdma_alloc(params);
    let report = sum_rate(&alloc, &gains, params.noise_power);
    Ok(BaselineResult {
        method: Baseline::Sdma,
        report,
        alloc,
    })
}

/// Half of the budget to the common streams, the other half split evenly
/// over the private streams; both halves spread evenly across channels.
pub fn fixed_rsma_alloc(params: &ScenarioParams) -> PowerAllocation {
    let g_count = params.user_sets.len() as f64;
    let half = 0.5 * params.total_power / g_count;
    PowerAllocation {
        p_common: vec![half; params.user_sets.len()],
        p_private: params
            .user_sets
            .iter()
            .map(|s| vec![half / s.len() as f64; s.len()])
            .collect(),
    }
}

pub fn fp_rsma_rates(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    params: &ScenarioParams,
) -> Result<BaselineResult> {
    let gains = effective_gains(channels, precoders, params)?;
    let alloc = fixed_rsma_alloc(params);
    let report = sum_rate(&alloc, &gains, params.noise_power);
    Ok(BaselineResult {
        method: Baseline::FpRsma,
        report,
        alloc,
    })
}

/// Rank-proportional NOMA power split of a budget over `n` users ordered
/// strongest first: user `i` (1-based) gets `budget * i / (n(n+1)/2)`.
pub fn noma_power_weights(n: usize, budget: f64) -> Vec<f64> {
    let denom = (n * (n + 1) / 2) as f64;
    (1..=n).map(|i| budget * i as f64 / denom).collect()
}

/// Single-cluster MISO-NOMA per channel.
///
/// One beam, matched to the strongest user's channel, carries all users.
/// Users are sorted by effective gain (ties keep slot order), receive
/// rank-proportional power with the weakest getting the most, and decode by
/// SIC: user `i` cancels every weaker user's message and treats the
/// stronger users' messages as noise. The budget is split evenly across
/// channels.
pub fn noma_rates(channels: &ChannelSet, params: &ScenarioParams) -> Result<BaselineResult> {
    channels.validate(params)?;
    let budget = params.total_power / params.user_sets.len() as f64;
    let n0 = params.noise_power;
    let mut alloc = PowerAllocation::zeros(&params.user_sets);
    let mut r_private = Vec::with_capacity(params.user_sets.len());
    for (g, users) in params.user_sets.iter().enumerate() {
        let hs: Vec<_> = users
            .iter()
            .map(|&k| channels.require(k, g))
            .collect::<Result<_>>()?;
        if let Some(pos) = hs.iter().position(|h| h.norm() == 0.0) {
            return Err(Error::DegenerateChannel(format!(
                "user {} on channel {} has an all-zero channel",
                users[pos] + 1,
                g + 1
            )));
        }
        let head = hs.iter().enumerate().fold(
            0,
            |best, (i, h)| if h.norm() > hs[best].norm() { i } else { best },
        );
        let beam = hs[head].normalized().expect("nonzero channel");
        let gains: Vec<f64> = hs
            .iter()
            .map(|h| hermitian_inner(h, &beam).map(|z| z.norm_sqr()))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..users.len()).collect();
        order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
        let powers = noma_power_weights(users.len(), budget);

        let mut rates = vec![0.0; users.len()];
        let mut stronger_power = 0.0;
        for (rank, &slot) in order.iter().enumerate() {
            let p = powers[rank];
            let gain = gains[slot];
            let sinr = p * gain / (stronger_power * gain + n0);
            rates[slot] = (1.0 + sinr).log2();
            alloc.p_private[g][slot] = p;
            stronger_power += p;
        }
        r_private.push(rates);
    }
    let report = RateReport::from_parts(vec![0.0; params.user_sets.len()], r_private);
    Ok(BaselineResult {
        method: Baseline::Noma,
        report,
        alloc,
    })
}
