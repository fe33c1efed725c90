//! Star topology, per-node and gateway packet ledgers, and the episode
//! metrics PDR, EE and TH with their weighted utility.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::LoRaParams;
use crate::phy::PacketFate;

/// One sent packet and what happened to it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PacketRecord {
    pub packet_id: u64,
    pub node_id: u32,
    pub payload_bytes: u32,
    pub params: LoRaParams,
    /// Transmit energy, mJ.
    pub energy_mj: f64,
    /// Airtime, s.
    pub toa_s: f64,
    pub start_s: f64,
    /// Simulation time at which the fate was decided, s.
    pub resolved_s: f64,
    pub rssi_dbm: f64,
    pub sinr_db: f64,
    /// Collision flag (C = 1).
    pub collided: bool,
    /// Propagation loss flag (S = 1).
    pub signal_lost: bool,
    pub fate: PacketFate,
}

impl PacketRecord {
    pub fn payload_bits(&self) -> f64 {
        f64::from(self.payload_bytes) * 8.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gateway {
    pub x: f64,
    pub y: f64,
    pub received: Vec<PacketRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub sent: Vec<PacketRecord>,
    /// Packet ids of `sent` that reached the gateway.
    pub received_ok: Vec<u64>,
    /// Packet ids of `sent` that were lost.
    pub lost: Vec<u64>,
}

impl Node {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Self {
            id,
            x,
            y,
            sent: Vec::new(),
            received_ok: Vec::new(),
            lost: Vec::new(),
        }
    }

    pub fn distance_to(&self, gw: &Gateway) -> f64 {
        libm::hypot(self.x - gw.x, self.y - gw.y)
    }

    pub fn clear_ledgers(&mut self) {
        self.sent.clear();
        self.received_ok.clear();
        self.lost.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeMetrics {
    pub pdr: f64,
    /// Energy efficiency, bits/mJ.
    pub ee: f64,
    /// Throughput, bits/s of airtime.
    pub th: f64,
    pub utility: f64,
}

/// Packet delivery rate: gateway receptions over packets sent.
pub fn compute_pdr(nodes: &[Node], gateway: &Gateway) -> Result<f64> {
    let sent: usize = nodes.iter().map(|n| n.sent.len()).sum();
    if sent == 0 {
        return Err(Error::UndefinedMetric("PDR with zero packets sent"));
    }
    Ok(gateway.received.len() as f64 / sent as f64)
}

fn received_bits(gateway: &Gateway) -> f64 {
    gateway.received.iter().map(PacketRecord::payload_bits).sum()
}

/// Received payload bits per mJ spent on all sent packets.
pub fn compute_ee(nodes: &[Node], gateway: &Gateway) -> Result<f64> {
    let energy: f64 = nodes.iter().flat_map(|n| &n.sent).map(|p| p.energy_mj).sum();
    if energy <= 0.0 {
        return Err(Error::UndefinedMetric("EE with zero energy spent"));
    }
    Ok(received_bits(gateway) / energy)
}

/// Received payload bits per second of total airtime of all sent packets.
pub fn compute_th(nodes: &[Node], gateway: &Gateway) -> Result<f64> {
    let airtime: f64 = nodes.iter().flat_map(|n| &n.sent).map(|p| p.toa_s).sum();
    if airtime <= 0.0 {
        return Err(Error::UndefinedMetric("TH with zero airtime"));
    }
    Ok(received_bits(gateway) / airtime)
}

/// Running sums kept while an episode is simulated, so metrics are
/// available without a ledger pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    pub sent: u64,
    pub received: u64,
    pub received_bits: f64,
    pub energy_mj: f64,
    pub airtime_s: f64,
}

impl MetricAccumulator {
    pub fn record(&mut self, rec: &PacketRecord) {
        self.sent += 1;
        self.energy_mj += rec.energy_mj;
        self.airtime_s += rec.toa_s;
        if rec.fate == PacketFate::Received {
            self.received += 1;
            self.received_bits += rec.payload_bits();
        }
    }

    /// Metrics with `utility` left at zero.
    pub fn metrics(&self) -> Result<EpisodeMetrics> {
        if self.sent == 0 {
            return Err(Error::UndefinedMetric("PDR with zero packets sent"));
        }
        if self.energy_mj <= 0.0 {
            return Err(Error::UndefinedMetric("EE with zero energy spent"));
        }
        if self.airtime_s <= 0.0 {
            return Err(Error::UndefinedMetric("TH with zero airtime"));
        }
        Ok(EpisodeMetrics {
            pdr: self.received as f64 / self.sent as f64,
            ee: self.received_bits / self.energy_mj,
            th: self.received_bits / self.airtime_s,
            utility: 0.0,
        })
    }
}

/// Weights θ (PDR), φ (EE) and ψ (TH) of the utility.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct UtilityWeights {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            theta: 1.0 / 3.0,
            phi: 1.0 / 3.0,
            psi: 1.0 / 3.0,
        }
    }
}

impl UtilityWeights {
    pub fn new(theta: f64, phi: f64, psi: f64) -> Result<Self> {
        let w = Self { theta, phi, psi };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.theta, self.phi, self.psi];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "utility weights must be finite and >= 0".into(),
            ));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("utility weights must sum to 1".into()));
        }
        Ok(())
    }
}

/// Min-max ranges of EE and TH over the set of episodes being compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub ee: (f64, f64),
    pub th: (f64, f64),
}

impl Normalization {
    pub fn over<'a>(metrics: impl IntoIterator<Item = &'a EpisodeMetrics>) -> Self {
        let mut ee = (f64::INFINITY, f64::NEG_INFINITY);
        let mut th = ee;
        for m in metrics {
            ee = (ee.0.min(m.ee), ee.1.max(m.ee));
            th = (th.0.min(m.th), th.1.max(m.th));
        }
        Self { ee, th }
    }

    /// Maps into [0, 1]; a degenerate range maps every value to 0.
    fn scale(range: (f64, f64), v: f64) -> f64 {
        let span = range.1 - range.0;
        if span > 0.0 {
            ((v - range.0) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// θ·PDR + φ·EE' + ψ·TH' with EE and TH min-max scaled by `norm`.
pub fn utility(m: &EpisodeMetrics, w: &UtilityWeights, norm: &Normalization) -> Result<f64> {
    w.validate()?;
    Ok(w.theta * m.pdr
        + w.phi * Normalization::scale(norm.ee, m.ee)
        + w.psi * Normalization::scale(norm.th, m.th))
}

/// Fills `utility` for every episode, normalising over the whole slice.
pub fn assign_utilities(metrics: &mut [EpisodeMetrics], w: &UtilityWeights) -> Result<()> {
    let norm = Normalization::over(metrics.iter());
    for m in metrics.iter_mut() {
        m.utility = utility(m, w, &norm)?;
    }
    Ok(())
}

/// Node positions uniform over a disk centred on the gateway at the origin.
pub fn generate_topology<R: Rng + ?Sized>(n_nodes: usize, radius_m: f64, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n_nodes)
        .map(|_| {
            let u: f64 = rng.random();
            let angle: f64 = rng.random::<f64>() * 2.0 * PI;
            let r = radius_m * libm::sqrt(u);
            (r * libm::cos(angle), r * libm::sin(angle))
        })
        .collect()
}
