//! Parameter allocation policies: the four comparison baselines and the
//! selector for bandit-driven (D-LoRa) nodes.
//!
//! ADR and RS-LoRa assume the node's distance to the gateway is known and
//! plan on the mean path loss, without shadowing.

#[cfg(feature = "serde")]
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::bandit::Variant;
use crate::error::{Error, Result};
use crate::params::{LoRaParams, ParamDomains};
use crate::phy::{self, ChannelModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Random,
    RoundRobin,
    Adr,
    RsLora,
    /// Bandit agents with a metric-factor preset, or the configured
    /// factors when `None`.
    DLora(Option<Variant>),
}

impl PolicyKind {
    pub const BASELINES: [PolicyKind; 4] = [
        PolicyKind::Random,
        PolicyKind::RoundRobin,
        PolicyKind::Adr,
        PolicyKind::RsLora,
    ];

    pub fn is_learning(&self) -> bool {
        matches!(self, PolicyKind::DLora(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::Adr => "adr",
            PolicyKind::RsLora => "rs-lora",
            PolicyKind::DLora(None) => "d-lora",
            PolicyKind::DLora(Some(Variant::Pdr)) => "d-lora-pdr",
            PolicyKind::DLora(Some(Variant::Ee)) => "d-lora-ee",
            PolicyKind::DLora(Some(Variant::Th)) => "d-lora-th",
            PolicyKind::DLora(Some(Variant::Balance)) => "d-lora-balance",
        }
    }

    /// Every accepted policy name.
    pub fn names() -> [&'static str; 9] {
        [
            "random",
            "round-robin",
            "adr",
            "rs-lora",
            "d-lora",
            "d-lora-pdr",
            "d-lora-ee",
            "d-lora-th",
            "d-lora-balance",
        ]
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "random" => PolicyKind::Random,
            "round-robin" | "roundrobin" => PolicyKind::RoundRobin,
            "adr" => PolicyKind::Adr,
            "rs-lora" | "rslora" => PolicyKind::RsLora,
            "d-lora" | "dlora" => PolicyKind::DLora(None),
            "d-lora-pdr" => PolicyKind::DLora(Some(Variant::Pdr)),
            "d-lora-ee" => PolicyKind::DLora(Some(Variant::Ee)),
            "d-lora-th" => PolicyKind::DLora(Some(Variant::Th)),
            "d-lora-balance" => PolicyKind::DLora(Some(Variant::Balance)),
            other => {
                return Err(Error::InvalidParameter(alloc::format!(
                    "unknown policy `{other}`; expected one of {}",
                    PolicyKind::names().join(", ")
                )))
            }
        })
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for PolicyKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for PolicyKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Settings shared by the link-budget baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BaselineConfig {
    /// Margin above receiver sensitivity required by ADR and RS-LoRa, dB.
    pub link_margin_db: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { link_margin_db: 10.0 }
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(values: &[T], rng: &mut R) -> T {
    values[rng.random_range(0..values.len())]
}

/// Every parameter drawn independently and uniformly.
pub fn random_policy<R: Rng + ?Sized>(domains: &ParamDomains, rng: &mut R) -> LoRaParams {
    LoRaParams::new(
        pick(&domains.sf, rng),
        pick(&domains.bw_hz, rng),
        pick(&domains.cf_hz, rng),
        pick(&domains.tp_dbm, rng),
    )
}

/// SF and CF fixed by node id; BW and TP uniform per packet.
pub fn round_robin_policy<R: Rng + ?Sized>(node_id: u32, domains: &ParamDomains, rng: &mut R) -> LoRaParams {
    let id = node_id as usize;
    let sf = domains.sf[id % domains.sf.len()];
    let cf = domains.cf_hz[id % domains.cf_hz.len()];
    LoRaParams::new(sf, pick(&domains.bw_hz, rng), cf, pick(&domains.tp_dbm, rng))
}

/// Inputs the link-budget baselines plan with.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget<'a> {
    pub distance_m: f64,
    pub payload_bytes: u32,
    pub domains: &'a ParamDomains,
    pub channel: &'a ChannelModelConfig,
    pub cfg: &'a BaselineConfig,
}

impl LinkBudget<'_> {
    fn path_loss(&self) -> f64 {
        phy::mean_path_loss(self.distance_m, self.channel)
    }

    fn clears(&self, sf: u8, bw_hz: u32, tp_dbm: i8) -> bool {
        match phy::receiver_sensitivity(sf, bw_hz) {
            Ok(rs) => f64::from(tp_dbm) - self.path_loss() >= rs + self.cfg.link_margin_db,
            Err(_) => false,
        }
    }

    /// Lowest TP in the domain clearing sensitivity plus margin.
    pub fn min_tp(&self, sf: u8, bw_hz: u32) -> Option<i8> {
        self.domains
            .tp_dbm
            .iter()
            .copied()
            .filter(|&tp| self.clears(sf, bw_hz, tp))
            .min()
    }

    fn toa(&self, sf: u8, bw_hz: u32) -> f64 {
        let p = LoRaParams::new(sf, bw_hz, 0, 0);
        phy::time_on_air(self.payload_bytes, &p, self.channel).unwrap_or(f64::INFINITY)
    }
}

/// The deterministic part of ADR: (SF, BW, TP), or `None` when nothing is
/// feasible at maximum power.
pub fn adr_plan(budget: &LinkBudget<'_>) -> Option<(u8, u32, i8)> {
    let max_tp = budget.domains.max_tp();
    let mut pairs: Vec<(f64, u8, u32)> = budget
        .domains
        .sf
        .iter()
        .flat_map(|&sf| budget.domains.bw_hz.iter().map(move |&bw| (sf, bw)))
        .map(|(sf, bw)| (budget.toa(sf, bw), sf, bw))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pairs
        .into_iter()
        .find(|&(_, sf, bw)| budget.clears(sf, bw, max_tp))
        .and_then(|(_, sf, bw)| budget.min_tp(sf, bw).map(|tp| (sf, bw, tp)))
}

/// Fastest (SF, BW) that clears sensitivity plus margin at maximum power,
/// then the lowest TP that still clears it. CF is uniform.
pub fn adr_policy<R: Rng + ?Sized>(budget: &LinkBudget<'_>, rng: &mut R) -> LoRaParams {
    let d = budget.domains;
    let (sf, bw, tp) = adr_plan(budget).unwrap_or_else(|| {
        let sf = d.sf.iter().copied().max().unwrap_or(12);
        let bw = d.bw_hz.iter().copied().min().unwrap_or(125_000);
        (sf, bw, d.max_tp())
    });
    LoRaParams::new(sf, bw, pick(&d.cf_hz, rng), tp)
}

fn rs_lora_bw(domains: &ParamDomains) -> u32 {
    if domains.bw_hz.contains(&125_000) {
        125_000
    } else {
        domains.bw_hz.iter().copied().min().unwrap_or(125_000)
    }
}

/// SF selection probabilities: feasible SFs weighted by inverse airtime.
/// Empty when no SF is feasible.
pub fn rs_lora_sf_distribution(budget: &LinkBudget<'_>) -> Vec<(u8, f64)> {
    let bw = rs_lora_bw(budget.domains);
    let max_tp = budget.domains.max_tp();
    let weights: Vec<(u8, f64)> = budget
        .domains
        .sf
        .iter()
        .copied()
        .filter(|&sf| budget.clears(sf, bw, max_tp))
        .map(|sf| (sf, 1.0 / budget.toa(sf, bw)))
        .collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    weights.into_iter().map(|(sf, w)| (sf, w / total)).collect()
}

/// Local SF lottery over feasible SFs with probability ∝ 1/ToA, 125 kHz,
/// uniform CF and the lowest TP clearing the margin.
pub fn rs_lora_policy<R: Rng + ?Sized>(budget: &LinkBudget<'_>, rng: &mut R) -> LoRaParams {
    let d = budget.domains;
    let bw = rs_lora_bw(d);
    let dist = rs_lora_sf_distribution(budget);
    let cf = pick(&d.cf_hz, rng);
    if dist.is_empty() {
        let sf = d.sf.iter().copied().max().unwrap_or(12);
        return LoRaParams::new(sf, bw, cf, d.max_tp());
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut sf = dist[dist.len() - 1].0;
    for &(s, p) in &dist {
        acc += p;
        if u < acc {
            sf = s;
            break;
        }
    }
    let tp = budget.min_tp(sf, bw).unwrap_or_else(|| d.max_tp());
    LoRaParams::new(sf, bw, cf, tp)
}
