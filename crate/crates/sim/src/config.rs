//! TOML configuration: one file with a `[sweep]` section plus sections that
//! mirror [`SimConfig`]. Every key is optional.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use dlora_core::bandit::{RewardConfig, Variant, DEFAULT_EXPLORATION};
use dlora_core::engine::SimConfig;
use dlora_core::network::UtilityWeights;
use dlora_core::phy::ChannelModelConfig;
use dlora_core::policy::{BaselineConfig, PolicyKind};
use dlora_core::ParamDomains;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(#[from] dlora_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub radii_m: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// 0 means one worker per available core.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut policies = PolicyKind::BASELINES.to_vec();
        policies.extend(Variant::ALL.iter().map(|&v| PolicyKind::DLora(Some(v))));
        Self {
            radii_m: vec![1000.0, 1500.0, 2000.0, 2500.0],
            policies,
            seeds: (1..=5).collect(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_nodes: usize,
    pub radius_m: f64,
    pub payload_bytes: u32,
    pub lambda_per_s: f64,
    pub packets_per_node: u32,
    pub train_episodes: u32,
    pub test_episodes: u32,
    pub seed: u64,
    pub policy: PolicyKind,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_nodes: d.n_nodes,
            radius_m: d.radius_m,
            payload_bytes: d.payload_bytes,
            lambda_per_s: d.lambda_per_s,
            packets_per_node: d.packets_per_node,
            train_episodes: d.train_episodes,
            test_episodes: d.test_episodes,
            seed: d.seed,
            policy: d.policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    pub c: f64,
}

impl Default for BanditSection {
    fn default() -> Self {
        Self {
            c: DEFAULT_EXPLORATION,
        }
    }
}

/// The file as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub sweep: SweepSection,
    pub sim: SimSection,
    pub channel: ChannelModelConfig,
    pub domains: ParamDomains,
    pub bandit: BanditSection,
    pub reward: RewardConfig,
    pub baselines: BaselineConfig,
    pub utility: UtilityWeights,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// The single-run configuration described by `[sim]` and the shared
    /// sections.
    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            n_nodes: s.n_nodes,
            radius_m: s.radius_m,
            payload_bytes: s.payload_bytes,
            lambda_per_s: s.lambda_per_s,
            packets_per_node: s.packets_per_node,
            train_episodes: s.train_episodes,
            test_episodes: s.test_episodes,
            seed: s.seed,
            channel: self.channel.clone(),
            domains: self.domains.clone(),
            policy: s.policy,
            reward: self.reward,
            baseline: self.baselines,
            exploration: self.bandit.c,
            utility: self.utility,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// A validated sweep: the cartesian product radius × policy × seed over a
/// base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub radii_m: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub base: SimConfig,
}

/// One run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub policy: PolicyKind,
    pub radius_m: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_file(file: &ConfigFile) -> Result<Self, ConfigError> {
        let spec = Self {
            radii_m: file.sweep.radii_m.clone(),
            policies: file.sweep.policies.clone(),
            seeds: file.sweep.seeds.clone(),
            workers: file.sweep.workers,
            base: file.sim_config(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A one-cell sweep running exactly `[sim]`.
    pub fn single(file: &ConfigFile) -> Result<Self, ConfigError> {
        let base = file.sim_config();
        let spec = Self {
            radii_m: vec![base.radius_m],
            policies: vec![base.policy],
            seeds: vec![base.seed],
            workers: 1,
            base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: String, reason: &str| {
            ConfigError::Invalid(dlora_core::Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.radii_m.is_empty() {
            return Err(invalid("sweep.radii_m".into(), "must not be empty"));
        }
        for (i, r) in self.radii_m.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0) {
                return Err(invalid(format!("sweep.radii_m[{i}]"), "must be > 0"));
            }
        }
        if self.policies.is_empty() {
            return Err(invalid("sweep.policies".into(), "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("sweep.seeds".into(), "must not be empty"));
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            if !seen.insert(p.name()) {
                return Err(invalid(format!("sweep.policies[{i}]"), "duplicate policy"));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.seeds.iter().enumerate() {
            if !seen.insert(s) {
                return Err(invalid(format!("sweep.seeds[{i}]"), "duplicate seed"));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, r) in self.radii_m.iter().enumerate() {
            if !seen.insert(r.to_bits()) {
                return Err(invalid(format!("sweep.radii_m[{i}]"), "duplicate radius"));
            }
        }
        self.base.validate()?;
        Ok(())
    }

    /// Radius outermost, then policy, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.radii_m.len() * self.policies.len() * self.seeds.len());
        for &radius_m in &self.radii_m {
            for &policy in &self.policies {
                for &seed in &self.seeds {
                    out.push(Cell {
                        policy,
                        radius_m,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn cell_config(&self, cell: &Cell) -> SimConfig {
        SimConfig {
            policy: cell.policy,
            radius_m: cell.radius_m,
            seed: cell.seed,
            ..self.base.clone()
        }
    }

    pub fn episodes_per_run(&self) -> u32 {
        self.base.train_episodes + self.base.test_episodes
    }
}

/// Reads and parses a config file. Validation is left to [`SweepSpec`].
pub fn read_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ConfigFile::parse(&text, &path.display().to_string())
}

/// Loads a config file into a validated sweep.
pub fn load_config(path: &Path) -> Result<SweepSpec, ConfigError> {
    SweepSpec::from_file(&read_config(path)?)
}

/// Every accepted key with its unit and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("sweep.radii_m", "m", "deployment radii swept"),
    ("sweep.policies", "-", "policies swept"),
    ("sweep.seeds", "-", "seeds swept"),
    ("sweep.workers", "threads", "parallel runs, 0 = all cores"),
    ("sim.n_nodes", "count", "end devices"),
    ("sim.radius_m", "m", "deployment radius for `run`"),
    ("sim.payload_bytes", "B", "payload size"),
    ("sim.lambda_per_s", "1/s", "packet generation rate per node"),
    ("sim.packets_per_node", "count", "packets per node per episode"),
    ("sim.train_episodes", "count", "learning episodes"),
    ("sim.test_episodes", "count", "frozen evaluation episodes"),
    ("sim.seed", "-", "seed for `run`"),
    ("sim.policy", "-", "policy for `run`"),
    ("channel.mean_path_loss_d0_db", "dB", "mean path loss at d0"),
    ("channel.d0_m", "m", "reference distance"),
    ("channel.gamma", "-", "path-loss exponent"),
    ("channel.shadowing_sigma_db", "dB", "shadowing std dev"),
    ("channel.noise_sigma_db", "dB", "noise floor jitter std dev"),
    ("channel.noise_figure_db", "dB", "receiver noise figure"),
    ("channel.preamble_symbols", "symbols", "preamble length"),
    ("channel.crc", "bool", "payload CRC present"),
    ("channel.implicit_header", "bool", "implicit header mode"),
    ("channel.low_data_rate_opt", "bool", "low data rate optimisation"),
    ("channel.coding_rate", "1..=4", "coding rate 4/(4+n)"),
    ("channel.min_distance_m", "m", "distance clamp for path loss"),
    ("channel.capture_threshold_db", "dB", "capture margin"),
    ("domains.sf", "-", "spreading factors"),
    ("domains.bw_hz", "Hz", "bandwidths"),
    ("domains.cf_hz", "Hz", "carrier frequencies"),
    ("domains.tp_dbm", "dBm", "transmit powers"),
    ("bandit.c", "-", "UCB exploration weight"),
    ("reward.tp_shaping", "-", "favor-low or literal"),
    (
        "reward.table.collision_loss",
        "-",
        "SF, BW, CF, TP rewards on collision",
    ),
    (
        "reward.table.signal_loss",
        "-",
        "SF, BW, CF, TP rewards on signal loss",
    ),
    ("reward.table.received", "-", "SF, BW, CF, TP rewards on delivery"),
    ("reward.factors.xi", "-", "SF term weight (plain d-lora only)"),
    ("reward.factors.zeta", "-", "BW term weight (plain d-lora only)"),
    ("reward.factors.eta", "-", "TP term weight (plain d-lora only)"),
    (
        "baselines.link_margin_db",
        "dB",
        "ADR / RS-LoRa margin over sensitivity",
    ),
    ("utility.theta", "-", "PDR weight"),
    ("utility.phi", "-", "EE weight"),
    ("utility.psi", "-", "TH weight"),
];

fn lookup<'a>(root: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut cur = root.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Key reference for `--help`, defaults taken from [`ConfigFile::default`].
pub fn key_reference() -> String {
    let defaults: toml::Table = toml::from_str(&ConfigFile::default().to_toml()).expect("defaults parse");
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (TOML, all optional):\n");
    for (key, unit, doc) in KEYS {
        let default = lookup(&defaults, key).map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "  {key:width$}  [{unit}] {doc}; default {default}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaves(prefix: &str, t: &toml::Table, out: &mut BTreeSet<String>) {
        for (k, v) in t {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                toml::Value::Table(inner) => leaves(&key, inner, out),
                _ => {
                    out.insert(key);
                }
            }
        }
    }

    #[test]
    fn key_table_covers_every_field() {
        let t: toml::Table = toml::from_str(&ConfigFile::default().to_toml()).unwrap();
        let mut found = BTreeSet::new();
        leaves("", &t, &mut found);
        let listed: BTreeSet<String> = KEYS.iter().map(|k| k.0.to_string()).collect();
        assert_eq!(found, listed);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = ConfigFile::parse("", "<empty>").unwrap();
        assert_eq!(f, ConfigFile::default());
        let c = f.sim_config();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.n_nodes, 50);
        assert_eq!(c.payload_bytes, 20);
        assert_eq!(c.lambda_per_s, 0.25);
        assert_eq!(c.exploration, 2.0);
        assert_eq!(c.channel.mean_path_loss_d0_db, 128.95);
        assert_eq!(c.channel.d0_m, 1000.0);
        assert_eq!(c.channel.gamma, 2.32);
        assert_eq!(c.channel.shadowing_sigma_db, 7.8);
        let spec = SweepSpec::from_file(&f).unwrap();
        assert_eq!(spec.radii_m, vec![1000.0, 1500.0, 2000.0, 2500.0]);
        assert_eq!(spec.cells().len(), 4 * 8 * 5);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let f = ConfigFile::default();
        assert_eq!(ConfigFile::parse(&f.to_toml(), "x").unwrap(), f);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ConfigFile::parse("[channel]\ngama = 2.0\n", "cfg.toml").unwrap_err();
        assert!(e.to_string().contains("gama"), "{e}");
        let e = ConfigFile::parse("[simulation]\n", "cfg.toml").unwrap_err();
        assert!(e.to_string().contains("simulation"), "{e}");
    }

    #[test]
    fn out_of_domain_values_name_the_field() {
        let f = ConfigFile::parse("[domains]\nsf = [7, 13]\n", "x").unwrap();
        let e = SweepSpec::from_file(&f).unwrap_err().to_string();
        assert!(e.contains("domains.sf[1]"), "{e}");

        let f = ConfigFile::parse("[sweep]\nradii_m = [1000, -5]\n", "x").unwrap();
        let e = SweepSpec::from_file(&f).unwrap_err().to_string();
        assert!(e.contains("sweep.radii_m[1]"), "{e}");

        let f = ConfigFile::parse("[sim]\nn_nodes = 0\n", "x").unwrap();
        assert!(SweepSpec::from_file(&f)
            .unwrap_err()
            .to_string()
            .contains("sim.n_nodes"));

        let e = ConfigFile::parse("[sim]\npolicy = \"greedy\"\n", "x")
            .unwrap_err()
            .to_string();
        assert!(e.contains("greedy"), "{e}");
    }

    #[test]
    fn cells_are_radius_then_policy_then_seed() {
        let f = ConfigFile::parse(
            "[sweep]\nradii_m = [1000, 2000]\npolicies = [\"adr\", \"random\"]\nseeds = [3, 4]\n",
            "x",
        )
        .unwrap();
        let cells = SweepSpec::from_file(&f).unwrap().cells();
        let key: Vec<(f64, &str, u64)> = cells
            .iter()
            .map(|c| (c.radius_m, c.policy.name(), c.seed))
            .collect();
        assert_eq!(
            key,
            vec![
                (1000.0, "adr", 3),
                (1000.0, "adr", 4),
                (1000.0, "random", 3),
                (1000.0, "random", 4),
                (2000.0, "adr", 3),
                (2000.0, "adr", 4),
                (2000.0, "random", 3),
                (2000.0, "random", 4),
            ]
        );
    }

    #[test]
    fn key_reference_shows_defaults() {
        let r = key_reference();
        assert!(r.contains("channel.gamma"));
        assert!(r.contains("2.32"));
        assert!(r.contains("[dBm]"));
    }
}
