//! Discrete-event simulation of one network: Poisson packet generation,
//! transmission lifecycle, fate resolution at each packet's end time,
//! reward feedback to the bandit agents, and train/test orchestration.
//!
//! A packet's fate is decided when its `End` event fires. By then every
//! transmission that could overlap it has started, and RSSI is fixed per
//! transmission, so the online decision equals the batch one.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::bandit::{self, AgentState, ArmChoice, Mode, RewardConfig, DEFAULT_EXPLORATION};
use crate::collision::{self, Transmission};
use crate::error::{Error, Result};
use crate::network::{self, EpisodeMetrics, Gateway, MetricAccumulator, Node, PacketRecord, UtilityWeights};
use crate::params::ParamDomains;
use crate::phy::{self, ChannelModelConfig, PacketFate};
use crate::policy::{self, BaselineConfig, LinkBudget, PolicyKind};
use crate::rng::RngStreams;

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_nodes: usize,
    /// Radius of the deployment disk, m.
    pub radius_m: f64,
    pub payload_bytes: u32,
    /// Packet generation rate per node, packets/s.
    pub lambda_per_s: f64,
    /// Packets each node sends per episode.
    pub packets_per_node: u32,
    pub train_episodes: u32,
    pub test_episodes: u32,
    pub seed: u64,
    pub channel: ChannelModelConfig,
    pub domains: ParamDomains,
    pub policy: PolicyKind,
    /// Reward table and metric factors; the factors are replaced by the
    /// preset when `policy` names a D-LoRa variant.
    pub reward: RewardConfig,
    pub baseline: BaselineConfig,
    /// UCB exploration weight c.
    pub exploration: f64,
    pub utility: UtilityWeights,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 50,
            radius_m: 1000.0,
            payload_bytes: 20,
            lambda_per_s: 0.25,
            packets_per_node: 100,
            train_episodes: 50,
            test_episodes: 10,
            seed: 1,
            channel: ChannelModelConfig::default(),
            domains: ParamDomains::default(),
            policy: PolicyKind::DLora(Some(bandit::Variant::Pdr)),
            reward: RewardConfig::default(),
            baseline: BaselineConfig::default(),
            exploration: DEFAULT_EXPLORATION,
            utility: UtilityWeights::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 1 {
            return Err(Error::config("sim.n_nodes", "must be >= 1"));
        }
        if u32::try_from(self.n_nodes).is_err() {
            return Err(Error::config("sim.n_nodes", "too large"));
        }
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return Err(Error::config("sim.radius_m", "must be > 0"));
        }
        if self.payload_bytes < 1 || self.payload_bytes > 255 {
            return Err(Error::config("sim.payload_bytes", "must be in 1..=255"));
        }
        if !(self.lambda_per_s > 0.0 && self.lambda_per_s.is_finite()) {
            return Err(Error::config("sim.lambda_per_s", "must be > 0"));
        }
        if self.packets_per_node < 1 {
            return Err(Error::config("sim.packets_per_node", "must be >= 1"));
        }
        if self.train_episodes + self.test_episodes < 1 {
            return Err(Error::config(
                "sim.test_episodes",
                "at least one episode must run",
            ));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(Error::config("bandit.c", "must be >= 0"));
        }
        if !(self.baseline.link_margin_db.is_finite()) {
            return Err(Error::config("baselines.link_margin_db", "must be finite"));
        }
        let finite = |v: &[f64; 4]| v.iter().all(|x| x.is_finite());
        let t = &self.reward.table;
        if !(finite(&t.collision_loss) && finite(&t.signal_loss) && finite(&t.received)) {
            return Err(Error::config("reward", "table entries must be finite"));
        }
        let f = &self.reward.factors;
        if ![f.xi, f.zeta, f.eta].iter().all(|x| x.is_finite()) {
            return Err(Error::config("reward", "metric factors must be finite"));
        }
        self.channel.validate("channel")?;
        self.domains.validate("domains")?;
        self.utility
            .validate()
            .map_err(|e| Error::config("utility", alloc::format!("{e}")))?;
        Ok(())
    }

    /// The reward configuration actually used by agents.
    pub fn effective_reward(&self) -> RewardConfig {
        match self.policy {
            PolicyKind::DLora(Some(v)) => RewardConfig {
                factors: v.factors(),
                ..self.reward
            },
            _ => self.reward,
        }
    }
}

// ---------------------------------------------------------------------------
// Event queue

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Ends sort before starts at equal timestamps.
    PacketEnd = 0,
    PacketStart = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub node: u32,
    /// Index into the episode's transmission list for `PacketEnd`.
    pub tx: usize,
    seq: u64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.node.cmp(&self.node))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered event queue. Equal times pop ends first, then by node id,
/// then in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind, node: u32, tx: usize) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            kind,
            node,
            tx,
            seq: self.seq,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Engine

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

struct InFlight {
    tx: Transmission,
    toa: f64,
    arms: Option<ArmChoice>,
}

/// One network instance. Topology and agents persist across episodes;
/// ledgers are reset at the start of each episode.
pub struct Engine {
    cfg: SimConfig,
    reward: RewardConfig,
    gateway: Gateway,
    nodes: Vec<Node>,
    distances: Vec<f64>,
    agents: Vec<AgentState>,
    rng: RngStreams,
    shadowing: Normal<f64>,
    noise: Normal<f64>,
    arrivals: Exp<f64>,
    max_toa: f64,
    next_packet_id: u64,
    window: Vec<Transmission>,
}

impl Engine {
    /// Builds an engine with nodes placed uniformly over the disk.
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngStreams::new(cfg.seed);
        let positions = network::generate_topology(cfg.n_nodes, cfg.radius_m, &mut rng.topology);
        Self::build(cfg, positions, rng)
    }

    /// Builds an engine with explicit node positions (m, gateway at origin).
    pub fn with_positions(mut cfg: SimConfig, positions: Vec<(f64, f64)>) -> Result<Self> {
        cfg.n_nodes = positions.len();
        cfg.validate()?;
        let rng = RngStreams::new(cfg.seed);
        Self::build(cfg, positions, rng)
    }

    fn build(cfg: SimConfig, positions: Vec<(f64, f64)>, rng: RngStreams) -> Result<Self> {
        let gateway = Gateway::default();
        let nodes: Vec<Node> = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Node::new(i as u32, x, y))
            .collect();
        let distances = nodes.iter().map(|n| n.distance_to(&gateway)).collect();
        let agents = if cfg.policy.is_learning() {
            (0..nodes.len())
                .map(|_| AgentState::new(&cfg.domains, cfg.exploration))
                .collect()
        } else {
            Vec::new()
        };
        let shadowing = Normal::new(0.0, cfg.channel.shadowing_sigma_db)
            .map_err(|_| Error::config("channel.shadowing_sigma_db", "invalid"))?;
        let noise = Normal::new(0.0, cfg.channel.noise_sigma_db)
            .map_err(|_| Error::config("channel.noise_sigma_db", "invalid"))?;
        let arrivals =
            Exp::new(cfg.lambda_per_s).map_err(|_| Error::config("sim.lambda_per_s", "invalid"))?;
        let mut max_toa: f64 = 0.0;
        for &sf in &cfg.domains.sf {
            for &bw in &cfg.domains.bw_hz {
                let p = crate::LoRaParams::new(sf, bw, 0, 0);
                max_toa = max_toa.max(phy::time_on_air(cfg.payload_bytes, &p, &cfg.channel)?);
            }
        }
        Ok(Self {
            reward: cfg.effective_reward(),
            cfg,
            gateway,
            nodes,
            distances,
            agents,
            rng,
            shadowing,
            noise,
            arrivals,
            max_toa,
            next_packet_id: 0,
            window: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Bandit agents, one per node; empty for baseline policies.
    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Replaces the agents, e.g. with a loaded snapshot.
    pub fn set_agents(&mut self, agents: Vec<AgentState>) -> Result<()> {
        if !self.cfg.policy.is_learning() {
            return Err(Error::InvalidParameter("policy does not use agents".into()));
        }
        if agents.len() != self.nodes.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} agents for {} nodes",
                agents.len(),
                self.nodes.len()
            )));
        }
        for a in &agents {
            a.validate(&self.cfg.domains)?;
        }
        self.agents = agents;
        Ok(())
    }

    fn select_params(&mut self, node: usize) -> (crate::LoRaParams, Option<ArmChoice>) {
        let cfg = &self.cfg;
        let rng: &mut ChaCha8Rng = &mut self.rng.policy;
        let budget = LinkBudget {
            distance_m: self.distances[node],
            payload_bytes: cfg.payload_bytes,
            domains: &cfg.domains,
            channel: &cfg.channel,
            cfg: &cfg.baseline,
        };
        match cfg.policy {
            PolicyKind::Random => (policy::random_policy(&cfg.domains, rng), None),
            PolicyKind::RoundRobin => (policy::round_robin_policy(node as u32, &cfg.domains, rng), None),
            PolicyKind::Adr => (policy::adr_policy(&budget, rng), None),
            PolicyKind::RsLora => (policy::rs_lora_policy(&budget, rng), None),
            PolicyKind::DLora(_) => {
                let (arms, p) = self.agents[node].select(&cfg.domains);
                (p, Some(arms))
            }
        }
    }

    /// Runs one episode. In `Mode::Training` agents learn from every packet;
    /// in `Mode::Test` they act greedily and are left untouched.
    pub fn run_episode(&mut self, mode: Mode) -> Result<EpisodeMetrics> {
        for agent in &mut self.agents {
            agent.mode = mode;
        }
        for node in &mut self.nodes {
            node.clear_ledgers();
        }
        self.gateway.received.clear();

        let n = self.nodes.len();
        let mut remaining = alloc::vec![self.cfg.packets_per_node; n];
        let mut flights: Vec<InFlight> = Vec::with_capacity(n * self.cfg.packets_per_node as usize);
        let mut acc = MetricAccumulator::default();
        let mut queue = EventQueue::new();

        for node in 0..n {
            let t = self.arrivals.sample(&mut self.rng.traffic);
            queue.push(t, EventKind::PacketStart, node as u32, 0);
        }

        while let Some(ev) = queue.pop() {
            let node = ev.node as usize;
            match ev.kind {
                EventKind::PacketStart => {
                    let (params, arms) = self.select_params(node);
                    let toa = phy::time_on_air(self.cfg.payload_bytes, &params, &self.cfg.channel)?;
                    let shadow = self.shadowing.sample(&mut self.rng.shadowing);
                    let rssi = phy::rssi_at_gateway(&params, self.distances[node], shadow, &self.cfg.channel);
                    let tx = Transmission {
                        packet_id: self.next_packet_id,
                        node_id: ev.node,
                        params,
                        start: ev.time,
                        end: ev.time + toa,
                        rssi_dbm: rssi,
                    };
                    self.next_packet_id += 1;
                    flights.push(InFlight { tx, toa, arms });
                    queue.push(tx.end, EventKind::PacketEnd, ev.node, flights.len() - 1);

                    remaining[node] -= 1;
                    if remaining[node] > 0 {
                        // a node's radio is busy until its packet ends
                        let gap = self.arrivals.sample(&mut self.rng.traffic);
                        queue.push((ev.time + gap).max(tx.end), EventKind::PacketStart, ev.node, 0);
                    }
                }
                EventKind::PacketEnd => {
                    let rec = self.resolve(&flights, ev.tx, ev.time)?;
                    acc.record(&rec);
                    if let (Some(arms), Some(agent)) = (flights[ev.tx].arms, self.agents.get_mut(node)) {
                        let base = bandit::assign_rewards(rec.fate, &self.reward);
                        let shaped =
                            bandit::apply_metric_terms(base, &rec.params, &self.cfg.domains, &self.reward);
                        agent.update(arms, shaped);
                    }
                    let ledger = &mut self.nodes[node];
                    if rec.fate == PacketFate::Received {
                        ledger.received_ok.push(rec.packet_id);
                        self.gateway.received.push(rec.clone());
                    } else {
                        ledger.lost.push(rec.packet_id);
                    }
                    ledger.sent.push(rec);
                }
            }
        }

        let mut metrics = acc.metrics()?;
        let norm = network::Normalization::over([&metrics]);
        metrics.utility = network::utility(&metrics, &self.cfg.utility, &norm)?;
        Ok(metrics)
    }

    fn resolve(&mut self, flights: &[InFlight], idx: usize, now: f64) -> Result<PacketRecord> {
        let target = flights[idx].tx;
        self.window.clear();
        // flights are in start order; anything starting before
        // target.start - max_toa has already ended
        for f in flights.iter().rev() {
            if f.tx.start + self.max_toa <= target.start {
                break;
            }
            if f.tx.packet_id != target.packet_id && collision::timing_overlap(&target, &f.tx) {
                self.window.push(f.tx);
            }
        }

        let collided = collision::is_collided(&target, &self.window, self.cfg.channel.capture_threshold_db);
        let interferers: Vec<f64> = self
            .window
            .iter()
            .filter(|k| collision::interferes(&target, k))
            .map(|k| k.rssi_dbm)
            .collect();
        let jitter = self.noise.sample(&mut self.rng.noise);
        let noise = phy::thermal_noise_dbm(target.params.bw_hz, self.cfg.channel.noise_figure_db) + jitter;
        let sinr = phy::compute_sinr(target.rssi_dbm, &interferers, noise);
        let signal_lost = !phy::decode_check(target.rssi_dbm, sinr, &target.params)?;
        let toa = flights[idx].toa;

        Ok(PacketRecord {
            packet_id: target.packet_id,
            node_id: target.node_id,
            payload_bytes: self.cfg.payload_bytes,
            params: target.params,
            energy_mj: phy::packet_energy(&target.params, toa),
            toa_s: toa,
            start_s: target.start,
            resolved_s: now,
            rssi_dbm: target.rssi_dbm,
            sinr_db: sinr,
            collided,
            signal_lost,
            fate: PacketFate::from_flags(collided, signal_lost),
        })
    }
}

/// Metrics of one episode within an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub phase: Phase,
    /// Index within its phase, from 0.
    pub index: u32,
    pub metrics: EpisodeMetrics,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            libm::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64)
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestSummary {
    pub pdr: MeanStd,
    pub ee: MeanStd,
    pub th: MeanStd,
}

impl TestSummary {
    pub fn of(metrics: &[EpisodeMetrics]) -> Self {
        Self {
            pdr: MeanStd::of(metrics.iter().map(|m| m.pdr)),
            ee: MeanStd::of(metrics.iter().map(|m| m.ee)),
            th: MeanStd::of(metrics.iter().map(|m| m.th)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub episodes: Vec<EpisodeResult>,
    pub test: TestSummary,
    pub agents: Vec<AgentState>,
}

impl ExperimentResult {
    pub fn train(&self) -> impl Iterator<Item = &EpisodeResult> {
        self.episodes.iter().filter(|e| e.phase == Phase::Train)
    }

    pub fn test_episodes(&self) -> impl Iterator<Item = &EpisodeResult> {
        self.episodes.iter().filter(|e| e.phase == Phase::Test)
    }
}

/// Runs `train_episodes` learning episodes and then `test_episodes` with
/// frozen greedy agents. Utilities are normalised over the run's episodes.
pub fn run_experiment(cfg: SimConfig) -> Result<ExperimentResult> {
    let mut engine = Engine::new(cfg)?;
    run_experiment_on(&mut engine, |_, _, _| {})
}

/// Like [`run_experiment`] on a prepared engine, calling `observe` after
/// each episode with the engine's ledgers still populated.
pub fn run_experiment_on(
    engine: &mut Engine,
    mut observe: impl FnMut(Phase, u32, &Engine),
) -> Result<ExperimentResult> {
    let (train, test) = (engine.cfg.train_episodes, engine.cfg.test_episodes);
    let mut episodes = Vec::with_capacity((train + test) as usize);
    for (phase, count, mode) in [
        (Phase::Train, train, Mode::Training),
        (Phase::Test, test, Mode::Test),
    ] {
        for index in 0..count {
            let metrics = engine.run_episode(mode)?;
            observe(phase, index, engine);
            episodes.push(EpisodeResult {
                phase,
                index,
                metrics,
            });
        }
    }
    let mut all: Vec<EpisodeMetrics> = episodes.iter().map(|e| e.metrics).collect();
    network::assign_utilities(&mut all, &engine.cfg.utility)?;
    for (e, m) in episodes.iter_mut().zip(all) {
        e.metrics = m;
    }
    let test_metrics: Vec<EpisodeMetrics> = episodes
        .iter()
        .filter(|e| e.phase == Phase::Test)
        .map(|e| e.metrics)
        .collect();
    Ok(ExperimentResult {
        test: TestSummary::of(&test_metrics),
        agents: engine.agents.clone(),
        episodes,
    })
}
