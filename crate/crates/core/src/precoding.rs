//! Common and zero-forcing private precoders.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{ChannelSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::linalg::{null_space_basis, project_onto_subspace, CVector, Complex, RANK_TOL};

/// How the common-stream precoder `w_g^C` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommonPrecoderStrategy {
    /// i.i.d. circularly-symmetric complex Gaussian entries, normalized.
    #[default]
    SeededRandom,
    /// Matched filter toward the weakest user of the channel.
    MatchedMinUser,
}

impl FromStr for CommonPrecoderStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "seeded_random" => Ok(Self::SeededRandom),
            "matched_min_user" => Ok(Self::MatchedMinUser),
            other => Err(Error::config_global(format!(
                "unknown common precoder strategy `{other}`"
            ))),
        }
    }
}

impl fmt::Display for CommonPrecoderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SeededRandom => "seeded_random",
            Self::MatchedMinUser => "matched_min_user",
        })
    }
}

/// Unit-norm precoders for every channel and scheduled user.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// `w_g^C`, one per channel.
    pub w_common: Vec<CVector>,
    /// `w_{k,g}` keyed by `(user, channel)`.
    pub w_private: BTreeMap<(usize, usize), CVector>,
}

impl PrecoderSet {
    pub fn private(&self, user: usize, channel: usize) -> Option<&CVector> {
        self.w_private.get(&(user, channel))
    }
}

/// Builds both precoder families for a scenario.
pub fn build_precoders(
    channels: &ChannelSet,
    params: &ScenarioParams,
    strategy: CommonPrecoderStrategy,
    seed: u64,
) -> Result<PrecoderSet> {
    let w_private = zf_private_precoders(channels, params)?;
    let w_common = common_precoder(channels, params, strategy, seed)?;
    Ok(PrecoderSet {
        w_common,
        w_private,
    })
}

/// Zero-forcing precoder of each scheduled user: its own channel projected
/// onto the null space of the other users' channels on the same subcarrier,
/// then normalized. This is the ZF direction with the largest own gain.
///
/// Every degenerate user is collected before failing so the error lists all
/// of them.
pub fn zf_private_precoders(
    channels: &ChannelSet,
    params: &ScenarioParams,
) -> Result<BTreeMap<(usize, usize), CVector>> {
    channels.validate(params)?;
    let mut out = BTreeMap::new();
    let mut degenerate = Vec::new();
    for (g, users) in params.user_sets.iter().enumerate() {
        if users.len() > params.n_tx {
            return Err(Error::Precoding(format!(
                "channel {} schedules {} users on {} antennas",
                g + 1,
                users.len(),
                params.n_tx
            )));
        }
        for &k in users {
            let interferers: Vec<CVector> = users
                .iter()
                .filter(|&&m| m != k)
                .map(|&m| channels.require(m, g).cloned())
                .collect::<Result<_>>()?;
            let basis = null_space_basis(params.n_tx, &interferers, RANK_TOL)?;
            if basis.is_empty() {
                return Err(Error::Precoding(format!(
                    "interferers of user {} on channel {} span the whole antenna space",
                    k + 1,
                    g + 1
                )));
            }
            let h = channels.require(k, g)?;
            let projected = project_onto_subspace(h, &basis)?;
            let own = h.norm();
            let residual = projected.norm();
            if own == 0.0 || residual < RANK_TOL * own {
                degenerate.push((k, g));
                continue;
            }
            out.insert((k, g), projected.scale_real(1.0 / residual));
        }
    }
    if degenerate.is_empty() {
        Ok(out)
    } else {
        let list: Vec<String> = degenerate
            .iter()
            .map(|(k, g)| format!("user {} on channel {}", k + 1, g + 1))
            .collect();
        Err(Error::DegenerateChannel(format!(
            "{} lies in the span of the other users' channels (or is zero)",
            list.join(", ")
        )))
    }
}

/// Unit-norm common precoder for each channel.
///
/// `SeededRandom` draws from a ChaCha8 stream seeded with `seed`, channel by
/// channel, so the result depends only on `seed` and the antenna count.
pub fn common_precoder(
    channels: &ChannelSet,
    params: &ScenarioParams,
    strategy: CommonPrecoderStrategy,
    seed: u64,
) -> Result<Vec<CVector>> {
    channels.validate(params)?;
    match strategy {
        CommonPrecoderStrategy::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            (0..params.n_channels)
                .map(|_| {
                    let v = CVector::new(
                        (0..params.n_tx)
                            .map(|_| {
                                let re: f64 = StandardNormal.sample(&mut rng);
                                let im: f64 = StandardNormal.sample(&mut rng);
                                Complex::new(re * scale, im * scale)
                            })
                            .collect(),
                    );
                    v.normalized()
                        .ok_or_else(|| Error::Internal("random precoder drew zero vector".into()))
                })
                .collect()
        }
        CommonPrecoderStrategy::MatchedMinUser => params
            .user_sets
            .iter()
            .enumerate()
            .map(|(g, users)| {
                let mut weakest: Option<(usize, &CVector)> = None;
                for &k in users {
                    let h = channels.require(k, g)?;
                    if weakest.is_none_or(|(_, w)| h.norm() < w.norm()) {
                        weakest = Some((k, h));
                    }
                }
                let (k, h) = weakest
                    .ok_or_else(|| Error::Scenario(format!("channel {} has no users", g + 1)))?;
                h.normalized().ok_or_else(|| {
                    Error::DegenerateChannel(format!(
                        "weakest user {} on channel {} has an all-zero channel",
                        k + 1,
                        g + 1
                    ))
                })
            })
            .collect(),
    }
}
