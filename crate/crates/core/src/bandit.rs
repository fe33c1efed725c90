//! Per-node learning agent: four independent UCB1 bandits (one each for
//! SF, BW, CF and TP), the outcome reward table, and the metric shaping
//! terms that bias an agent toward energy efficiency or throughput.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{Dimension, LoRaParams, ParamDomains};
use crate::phy::PacketFate;

/// Exploration weight used unless configured otherwise.
pub const DEFAULT_EXPLORATION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    /// UCB selection and value updates.
    Training,
    /// Greedy selection on frozen estimates.
    Test,
}

/// A single UCB1 bandit over an ordered list of arms.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bandit {
    /// Parameter value of each arm (SF, Hz or dBm).
    pub arms: Vec<i64>,
    /// Action-value estimate per arm.
    pub q: Vec<f64>,
    /// Pull count per arm.
    pub n: Vec<u64>,
    /// Total pulls.
    pub t: u64,
}

impl Bandit {
    pub fn new(arms: Vec<i64>) -> Self {
        let k = arms.len();
        Self {
            arms,
            q: alloc::vec![0.0; k],
            n: alloc::vec![0; k],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Picks an arm. In training, unpulled arms go first in index order,
    /// then the arm maximising q + c·sqrt(ln t / 2n). In test, the arm with
    /// the largest q. Ties resolve to the lowest index.
    pub fn select(&self, c: f64, mode: Mode) -> usize {
        debug_assert!(!self.is_empty());
        match mode {
            Mode::Test => argmax(self.q.iter().copied()),
            Mode::Training => {
                if let Some(i) = self.n.iter().position(|&n| n == 0) {
                    return i;
                }
                let ln_t = libm::log(self.t as f64);
                argmax(
                    self.q
                        .iter()
                        .zip(&self.n)
                        .map(|(&q, &n)| q + c * libm::sqrt(ln_t / (2.0 * n as f64))),
                )
            }
        }
    }

    /// Incremental sample-mean update of the pulled arm.
    pub fn update(&mut self, arm: usize, reward: f64) {
        self.n[arm] += 1;
        let k = self.n[arm] as f64;
        self.q[arm] += (reward - self.q[arm]) / k;
        self.t += 1;
    }

    fn check(&self) -> bool {
        self.q.len() == self.arms.len()
            && self.n.len() == self.arms.len()
            && self.n.iter().sum::<u64>() == self.t
            && self.q.iter().all(|q| q.is_finite())
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Arm indices chosen for one packet, in SF, BW, CF, TP order.
pub type ArmChoice = [usize; 4];

/// The four bandits of one node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentState {
    pub sf: Bandit,
    pub bw: Bandit,
    pub cf: Bandit,
    pub tp: Bandit,
    /// Exploration weight c.
    pub c: f64,
    pub mode: Mode,
}

impl AgentState {
    pub fn new(domains: &ParamDomains, c: f64) -> Self {
        let to_arms = |v: &mut dyn Iterator<Item = i64>| v.collect::<Vec<_>>();
        Self {
            sf: Bandit::new(to_arms(&mut domains.sf.iter().map(|&x| i64::from(x)))),
            bw: Bandit::new(to_arms(&mut domains.bw_hz.iter().map(|&x| i64::from(x)))),
            cf: Bandit::new(to_arms(&mut domains.cf_hz.iter().map(|&x| i64::from(x)))),
            tp: Bandit::new(to_arms(&mut domains.tp_dbm.iter().map(|&x| i64::from(x)))),
            c,
            mode: Mode::Training,
        }
    }

    pub fn bandit(&self, dim: Dimension) -> &Bandit {
        match dim {
            Dimension::Sf => &self.sf,
            Dimension::Bw => &self.bw,
            Dimension::Cf => &self.cf,
            Dimension::Tp => &self.tp,
        }
    }

    fn bandit_mut(&mut self, dim: Dimension) -> &mut Bandit {
        match dim {
            Dimension::Sf => &mut self.sf,
            Dimension::Bw => &mut self.bw,
            Dimension::Cf => &mut self.cf,
            Dimension::Tp => &mut self.tp,
        }
    }

    pub fn select(&self, domains: &ParamDomains) -> (ArmChoice, LoRaParams) {
        let arms = Dimension::ALL.map(|d| self.bandit(d).select(self.c, self.mode));
        (arms, domains.params_at(arms[0], arms[1], arms[2], arms[3]))
    }

    /// Applies one reward per dimension. Ignored in test mode.
    pub fn update(&mut self, arms: ArmChoice, rewards: [f64; 4]) {
        if self.mode == Mode::Test {
            return;
        }
        for (i, d) in Dimension::ALL.into_iter().enumerate() {
            self.bandit_mut(d).update(arms[i], rewards[i]);
        }
    }

    /// Checks that the arm lists match `domains` and that counts add up.
    pub fn validate(&self, domains: &ParamDomains) -> Result<()> {
        let fresh = AgentState::new(domains, self.c);
        for d in Dimension::ALL {
            if self.bandit(d).arms != fresh.bandit(d).arms {
                return Err(Error::InvalidParameter(alloc::format!(
                    "agent {d:?} arms do not match the parameter domains"
                )));
            }
            if !self.bandit(d).check() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "agent {d:?} bandit has inconsistent counts or estimates"
                )));
            }
        }
        Ok(())
    }
}

/// Base rewards per outcome, in SF, BW, CF, TP order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardTable {
    pub collision_loss: [f64; 4],
    pub signal_loss: [f64; 4],
    pub received: [f64; 4],
}

impl Default for RewardTable {
    fn default() -> Self {
        Self {
            collision_loss: [-1.0, -0.5, -0.5, 0.0],
            signal_loss: [-0.5, -0.5, 0.0, -1.0],
            received: [1.0, 1.0, 1.0, 1.0],
        }
    }
}

/// Weights ξ (SF), ζ (BW) and η (TP) of the metric shaping terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MetricFactors {
    pub xi: f64,
    pub zeta: f64,
    pub eta: f64,
}

/// Named metric-factor presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    Pdr,
    Ee,
    Th,
    Balance,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Pdr, Variant::Ee, Variant::Th, Variant::Balance];

    pub fn factors(self) -> MetricFactors {
        let (xi, zeta, eta) = match self {
            Variant::Pdr => (0.0, 0.0, 0.0),
            Variant::Ee => (0.0, 0.0, 3.5),
            Variant::Th => (10.0, 10.0, 0.0),
            Variant::Balance => (0.0, 0.0, 1.8),
        };
        MetricFactors { xi, zeta, eta }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pdr => "pdr",
            Variant::Ee => "ee",
            Variant::Th => "th",
            Variant::Balance => "balance",
        }
    }
}

/// Which TP values the η term favours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TpShaping {
    /// η·TP'/ΣTP where TP' is the value at the mirrored rank of TP, so the
    /// lowest power receives the largest increment.
    #[default]
    FavorLow,
    /// η·TP/ΣTP as written, which favours the highest power.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardConfig {
    pub table: RewardTable,
    pub factors: MetricFactors,
    pub tp_shaping: TpShaping,
}

impl RewardConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            factors: variant.factors(),
            ..Default::default()
        }
    }
}

/// Base rewards (SF, BW, CF, TP) for a packet outcome.
pub fn assign_rewards(fate: PacketFate, cfg: &RewardConfig) -> [f64; 4] {
    match fate {
        PacketFate::CollisionLoss => cfg.table.collision_loss,
        PacketFate::SignalLoss => cfg.table.signal_loss,
        PacketFate::Received => cfg.table.received,
    }
}

fn sf_weight(sf: u8) -> f64 {
    f64::from(sf) / f64::from(1u32 << sf)
}

/// Adds the SF, BW and TP metric terms; the CF reward is left unchanged.
pub fn apply_metric_terms(
    rewards: [f64; 4],
    params: &LoRaParams,
    domains: &ParamDomains,
    cfg: &RewardConfig,
) -> [f64; 4] {
    let MetricFactors { xi, zeta, eta } = cfg.factors;
    let [mut r_sf, mut r_bw, r_cf, mut r_tp] = rewards;
    if xi != 0.0 {
        let total: f64 = domains.sf.iter().map(|&s| sf_weight(s)).sum();
        r_sf += xi * sf_weight(params.sf) / total;
    }
    if zeta != 0.0 {
        let total: f64 = domains.bw_hz.iter().map(|&b| f64::from(b)).sum();
        r_bw += zeta * f64::from(params.bw_hz) / total;
    }
    if eta != 0.0 {
        let total: f64 = domains.tp_dbm.iter().map(|&t| f64::from(t)).sum();
        if total != 0.0 {
            let value = match cfg.tp_shaping {
                TpShaping::Literal => params.tp_dbm,
                TpShaping::FavorLow => mirrored_tp(params.tp_dbm, &domains.tp_dbm),
            };
            r_tp += eta * f64::from(value) / total;
        }
    }
    [r_sf, r_bw, r_cf, r_tp]
}

/// The TP value whose rank in the sorted domain mirrors that of `tp`.
fn mirrored_tp(tp: i8, domain: &[i8]) -> i8 {
    let mut sorted: Vec<i8> = domain.to_vec();
    sorted.sort_unstable();
    match sorted.iter().position(|&v| v == tp) {
        Some(rank) => sorted[sorted.len() - 1 - rank],
        None => tp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fresh_bandit_starts_at_arm_zero() {
        let b = Bandit::new(vec![7, 8, 9]);
        assert_eq!(b.select(2.0, Mode::Training), 0);
        assert_eq!(b.select(2.0, Mode::Test), 0);
    }

    #[test]
    fn forced_initialisation_round() {
        let mut b = Bandit::new(vec![1, 2, 3, 4, 5]);
        for _ in 0..5 {
            let a = b.select(2.0, Mode::Training);
            b.update(a, 0.0);
        }
        assert!(b.n.iter().all(|&n| n == 1));
        assert_eq!(b.t, 5);
    }

    #[test]
    fn equal_ucb_ties_to_lowest_index() {
        let b = Bandit {
            arms: vec![0, 1, 2, 3],
            q: vec![0.0; 4],
            n: vec![1; 4],
            t: 4,
        };
        let bonus = 2.0 * libm::sqrt(libm::log(4.0) / 2.0);
        assert!((bonus - 1.6651092223153954).abs() < 1e-12);
        assert_eq!(b.select(2.0, Mode::Training), 0);
    }

    #[test]
    fn q_dominates_with_equal_counts() {
        let b = Bandit {
            arms: vec![0, 1],
            q: vec![0.9, 0.1],
            n: vec![50, 50],
            t: 100,
        };
        assert_eq!(b.select(2.0, Mode::Training), 0);
    }

    #[test]
    fn q_update_is_incremental_mean() {
        let mut b = Bandit::new(vec![0]);
        b.update(0, 1.0);
        assert_eq!(b.q[0], 1.0);
        b.update(0, 0.0);
        assert_eq!(b.q[0], 0.5);
        assert_eq!(b.t, 2);
    }

    #[test]
    fn reward_table_rows() {
        let cfg = RewardConfig::default();
        assert_eq!(
            assign_rewards(PacketFate::CollisionLoss, &cfg),
            [-1.0, -0.5, -0.5, 0.0]
        );
        assert_eq!(
            assign_rewards(PacketFate::SignalLoss, &cfg),
            [-0.5, -0.5, 0.0, -1.0]
        );
        assert_eq!(assign_rewards(PacketFate::Received, &cfg), [1.0; 4]);
    }

    #[test]
    fn metric_term_examples() {
        let d = ParamDomains::default();
        let p = LoRaParams::new(7, 125_000, 470_100_000, 14);
        let cfg = RewardConfig {
            factors: MetricFactors {
                xi: 1.0,
                zeta: 1.0,
                eta: 0.0,
            },
            ..Default::default()
        };
        let r = apply_metric_terms([0.0; 4], &p, &d, &cfg);
        assert!((r[0] - 0.4497991967871486).abs() < 1e-12, "{}", r[0]);
        assert!((r[1] - 125.0 / 875.0).abs() < 1e-12);
        assert_eq!(r[2], 0.0);
        assert_eq!(r[3], 0.0);

        let pdr = RewardConfig::for_variant(Variant::Pdr);
        assert_eq!(
            apply_metric_terms([1.0, -0.5, 0.25, -1.0], &p, &d, &pdr),
            [1.0, -0.5, 0.25, -1.0]
        );
    }

    #[test]
    fn tp_term_directions() {
        let d = ParamDomains::default();
        let low = LoRaParams::new(7, 125_000, 470_100_000, 2);
        let high = LoRaParams::new(7, 125_000, 470_100_000, 14);
        let literal = RewardConfig {
            factors: MetricFactors {
                xi: 0.0,
                zeta: 0.0,
                eta: 1.0,
            },
            tp_shaping: TpShaping::Literal,
            ..Default::default()
        };
        assert!((apply_metric_terms([0.0; 4], &high, &d, &literal)[3] - 14.0 / 56.0).abs() < 1e-15);
        assert!((apply_metric_terms([0.0; 4], &low, &d, &literal)[3] - 2.0 / 56.0).abs() < 1e-15);

        let favor_low = RewardConfig {
            tp_shaping: TpShaping::FavorLow,
            ..literal
        };
        assert!((apply_metric_terms([0.0; 4], &low, &d, &favor_low)[3] - 14.0 / 56.0).abs() < 1e-15);
        assert!((apply_metric_terms([0.0; 4], &high, &d, &favor_low)[3] - 2.0 / 56.0).abs() < 1e-15);
    }

    #[test]
    fn sf_term_prefers_small_sf() {
        let d = ParamDomains::default();
        let cfg = RewardConfig {
            factors: MetricFactors {
                xi: 0.5,
                zeta: 0.0,
                eta: 0.0,
            },
            ..Default::default()
        };
        let r7 = apply_metric_terms([0.0; 4], &LoRaParams::new(7, 125_000, 470_100_000, 2), &d, &cfg);
        let r12 = apply_metric_terms([0.0; 4], &LoRaParams::new(12, 125_000, 470_100_000, 2), &d, &cfg);
        assert!(r7[0] > r12[0]);
    }

    #[test]
    fn presets() {
        assert_eq!(
            Variant::Pdr.factors(),
            MetricFactors {
                xi: 0.0,
                zeta: 0.0,
                eta: 0.0
            }
        );
        assert_eq!(
            Variant::Ee.factors(),
            MetricFactors {
                xi: 0.0,
                zeta: 0.0,
                eta: 3.5
            }
        );
        assert_eq!(
            Variant::Th.factors(),
            MetricFactors {
                xi: 10.0,
                zeta: 10.0,
                eta: 0.0
            }
        );
        assert_eq!(
            Variant::Balance.factors(),
            MetricFactors {
                xi: 0.0,
                zeta: 0.0,
                eta: 1.8
            }
        );
    }

    #[test]
    fn agent_test_mode_is_greedy_and_frozen() {
        let d = ParamDomains::default();
        let mut agent = AgentState::new(&d, 2.0);
        agent.sf.update(3, 1.0);
        agent.mode = Mode::Test;
        let (arms, p) = agent.select(&d);
        assert_eq!(arms, [3, 0, 0, 0]);
        assert_eq!(p.sf, 10);
        let before = agent.clone();
        agent.update(arms, [1.0; 4]);
        assert_eq!(agent, before);
        agent.validate(&d).unwrap();
    }

    #[test]
    fn agent_validate_rejects_mismatched_arms() {
        let d = ParamDomains::default();
        let agent = AgentState::new(&d, 2.0);
        let mut other = d.clone();
        other.sf.pop();
        assert!(agent.validate(&other).is_err());
    }
}
