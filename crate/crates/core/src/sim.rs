//! Block-by-block simulation of the controlled uplink and its metrics.
//!
//! Each block: draw gains, run flow control at every node, schedule one
//! transmission, advance that node's HARQ packet with the true gains, apply
//! the queue recursions with the realized rates, and record metrics.
//!
//! Two service measurements are kept side by side: the fluid drain of the
//! data queues by the per-block rate, and the discrete packet-decode events
//! of the HARQ layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{expected_cross_rate, rate, sample_block, ChannelParams};
use crate::control::{flow_control, Admission, ControlParams, Scheduler, Transmission};
use crate::error::{Error, Result};
use crate::harq::{effective_rate_from_leakage, CompletedPacket, HarqConfig, NodeHarq, PacketEvent, TrafficKind};
use crate::queues::{BlockService, NodeQueues};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsGranularity {
    #[default]
    Summary,
    PerBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub harq: HarqConfig,
    pub control: ControlParams,
    pub n_blocks: u64,
    /// Leading blocks excluded from the averages.
    pub warmup_blocks: u64,
    pub metrics_granularity: MetricsGranularity,
}

impl SimConfig {
    pub fn seed(&self) -> u64 {
        self.channel.rng_seed
    }

    pub fn n_nodes(&self) -> usize {
        self.channel.n_nodes
    }

    /// Every violated invariant, including code-rate pairs for which no
    /// positive grid power keeps the expected eavesdropper accumulation
    /// below `R̂ − R̂^p`.
    pub fn violations(&self) -> Vec<String> {
        let n = self.channel.n_nodes;
        let mut errs = self.channel.violations();
        errs.extend(self.harq.violations());
        errs.extend(self.control.violations(n));
        if self.harq.rates.len() != n {
            errs.push(format!("{} code rates for {n} nodes", self.harq.rates.len()));
        }
        if !(self.n_blocks > self.warmup_blocks || (self.n_blocks == 0 && self.warmup_blocks == 0)) {
            errs.push(format!(
                "n_blocks = {} must exceed warmup_blocks = {}",
                self.n_blocks, self.warmup_blocks
            ));
        }
        if errs.is_empty() {
            if let Some(&p_min) = self.control.power_grid.iter().find(|&&p| p > 0.0) {
                for (j, i, leak, budget) in self.premise_violations(p_min) {
                    errs.push(format!(
                        "node {j}: expected accumulation at node {i} is {leak:.3} >= R_hat - R_hat_p = {budget:.3} even at the lowest power {p_min}"
                    ));
                }
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Pairs `(j, i)` whose expected eavesdropper accumulation over a
    /// packet's expected lifetime at the maximum grid power reaches the
    /// equivocation budget. Such pairs rely on the controller lowering
    /// power for private traffic.
    pub fn premise_warnings(&self) -> Vec<String> {
        let p_max = self.control.p_max();
        self.premise_violations(p_max)
            .into_iter()
            .map(|(j, i, leak, budget)| {
                format!("node {j}: expected accumulation at node {i} is {leak:.3} >= {budget:.3} at power {p_max}")
            })
            .collect()
    }

    // Expected lifetime R̂ / E[R_j] blocks times E[R_ji] per block.
    fn premise_violations(&self, power: f64) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for j in 0..self.channel.n_nodes {
            let rates = &self.harq.rates[j];
            let main = expected_cross_rate(power, self.channel.main_gain_means[j]);
            let lifetime = rates.r_hat / main;
            for (i, &m) in self.channel.cross_gain_means.row(j) {
                let leak = lifetime * expected_cross_rate(power, m);
                if leak >= rates.leakage_budget() {
                    out.push((j, i, leak, rates.leakage_budget()));
                }
            }
        }
        out
    }
}

/// Time averages for one node (or the per-node mean for the aggregate),
/// over the blocks after warmup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    /// Admitted private bits per block.
    pub x_p: f64,
    pub x_o: f64,
    /// Admitted effective-private bits per block.
    pub x_pe: f64,
    /// Private bits drained from the data queue per block.
    pub mu_p: f64,
    pub mu_o: f64,
    /// Bits drained from the effective-private virtual queue per block.
    pub mu_pe_fluid: f64,
    /// Payload bits of private packets decoded without outage, per block.
    pub mu_pe_empirical: f64,
    /// Payload bits of decoded private packets, per block.
    pub mu_p_empirical: f64,
    /// Payload bits of decoded open packets, per block.
    pub mu_o_empirical: f64,
    /// Outaged fraction of decoded private packets.
    pub empirical_outage_fraction: f64,
    /// Mean Markov bound over decoded private packets.
    pub markov_bound_avg: f64,
    pub avg_power: f64,
    pub avg_q_p: f64,
    pub avg_q_o: f64,
    pub avg_q_pe: f64,
    pub avg_z: f64,
    pub avg_y: f64,
    pub utility_avg: f64,
    pub decoded_private: u64,
    pub outaged_private: u64,
    pub decoded_open: u64,
    pub decode_failures: u64,
    /// Dummy share of the payload of packets decoded in the window.
    pub dummy_fraction: f64,
    /// Queues at the first averaged block.
    pub window_start: NodeQueues,
    /// Queues after the last block.
    pub final_queues: NodeQueues,
    /// Whole-horizon admitted and drained totals of the data queues.
    pub admitted_p_total: f64,
    pub served_p_total: f64,
    pub admitted_o_total: f64,
    pub served_o_total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_blocks: u64,
    pub averaged_blocks: u64,
    pub nodes: Vec<NodeSummary>,
    /// Per-node means of the rates, queues and power; sums of utility and
    /// packet counts; pooled outage statistics.
    pub aggregate: NodeSummary,
}

/// What happened in one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub block_index: u64,
    pub admissions: Vec<Admission>,
    pub transmission: Option<Transmission>,
    pub service: Vec<BlockService>,
    /// Queues after this block's updates.
    pub queues: Vec<NodeQueues>,
    pub completed: Vec<PacketEvent>,
}

#[derive(Debug, Clone, Default)]
struct NodeAccumulator {
    a_p: f64,
    a_o: f64,
    a_pe: f64,
    served_p: f64,
    served_o: f64,
    served_pe: f64,
    power: f64,
    q_p: f64,
    q_o: f64,
    q_pe: f64,
    z: f64,
    y: f64,
    utility: f64,
    decoded_private: u64,
    outaged_private: u64,
    markov_bound_sum: f64,
    private_payload: f64,
    private_clean_payload: f64,
    private_dummy: f64,
    decoded_open: u64,
    open_payload: f64,
    open_dummy: f64,
    failures: u64,
    admitted_p_total: f64,
    served_p_total: f64,
    admitted_o_total: f64,
    served_o_total: f64,
}

/// A single deterministic run.
pub struct Simulation {
    config: SimConfig,
    scheduler: Scheduler,
    rng: ChaCha8Rng,
    queues: Vec<NodeQueues>,
    harq: Vec<NodeHarq>,
    // real bits admitted but not yet placed in a packet: [private, open]
    unpacketized: Vec<[f64; 2]>,
    block: u64,
    acc: Vec<NodeAccumulator>,
    window_start: Vec<NodeQueues>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let scheduler = Scheduler::new(&config.control, &config.channel, &config.harq.rates)?;
        let n = config.n_nodes();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed()),
            scheduler,
            queues: vec![NodeQueues::default(); n],
            harq: vec![NodeHarq::default(); n],
            unpacketized: vec![[0.0; 2]; n],
            block: 0,
            acc: vec![NodeAccumulator::default(); n],
            window_start: vec![NodeQueues::default(); n],
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn queues(&self) -> &[NodeQueues] {
        &self.queues
    }

    pub fn block_index(&self) -> u64 {
        self.block
    }

    pub fn is_finished(&self) -> bool {
        self.block >= self.config.n_blocks
    }

    /// Advances one block. Panics if the horizon is already reached.
    pub fn step_block(&mut self) -> BlockRecord {
        assert!(!self.is_finished(), "simulation horizon reached");
        let k = self.block;
        let n = self.config.n_nodes();
        let in_window = k >= self.config.warmup_blocks;
        if k == self.config.warmup_blocks {
            self.window_start = self.queues.clone();
        }

        let block = sample_block(&self.config.channel, k, &mut self.rng);
        let admissions: Vec<Admission> = self
            .queues
            .iter()
            .enumerate()
            .map(|(j, q)| flow_control(q, &self.config.control, j))
            .collect();
        let transmission = self.scheduler.schedule(&self.queues, &block);

        let mut service = vec![BlockService::default(); n];
        let mut completed = Vec::new();
        if let Some(tx) = transmission {
            let j = tx.node;
            let rates = self.config.harq.rates[j];
            let leakage = self.scheduler.expected_leakage(j, tx.power_index);
            let node = &mut self.harq[j];
            if !node.in_flight(tx.mode) {
                let (slot, size) = match tx.mode {
                    TrafficKind::Private => (0, rates.r_hat_p),
                    TrafficKind::Open => (1, rates.r_hat_o),
                };
                let payload = self.unpacketized[j][slot].min(size);
                self.unpacketized[j][slot] -= payload;
                node.start(j, tx.mode, n, k, payload);
            }
            let event = node.transmit(tx.mode, tx.power, leakage, &block, &self.config.harq);
            if !matches!(event, PacketEvent::InFlight) {
                if in_window {
                    record_packet(&mut self.acc[j], &event, &rates);
                }
                completed.push(event);
            }

            let r = rate(tx.power, block.h_main[j]);
            service[j] = match tx.mode {
                TrafficKind::Private => BlockService {
                    r_p: rates.private_fraction() * r,
                    r_o: 0.0,
                    r_pe: effective_rate_from_leakage(r, leakage, &rates).max(0.0),
                    power_used: tx.power,
                },
                TrafficKind::Open => BlockService {
                    r_p: 0.0,
                    r_o: r,
                    r_pe: 0.0,
                    power_used: tx.power,
                },
            };
        }

        let kappa = self.config.control.kappa;
        for j in 0..n {
            let q = self.queues[j];
            let adm = admissions[j];
            let s = service[j];
            let (d_p, d_o, d_pe) = q.drained(&s);
            let acc = &mut self.acc[j];
            acc.admitted_p_total += adm.a_p;
            acc.admitted_o_total += adm.a_o;
            acc.served_p_total += d_p;
            acc.served_o_total += d_o;
            if in_window {
                acc.a_p += adm.a_p;
                acc.a_o += adm.a_o;
                acc.a_pe += adm.a_pe;
                acc.served_p += d_p;
                acc.served_o += d_o;
                acc.served_pe += d_pe;
                acc.power += s.power_used;
                acc.q_p += q.q_p;
                acc.q_o += q.q_o;
                acc.q_pe += q.q_pe;
                acc.z += q.z;
                acc.y += q.y;
                acc.utility += adm.utility(kappa);
            }
            self.unpacketized[j][0] += adm.a_p;
            self.unpacketized[j][1] += adm.a_o;
            self.queues[j] = q.update_data_queues(&s, adm.a_p, adm.a_o).update_virtual_queues(
                &s,
                adm.a_p,
                adm.a_pe,
                self.config.control.gamma[j],
                self.config.control.alpha[j],
            );
        }

        self.block += 1;
        BlockRecord {
            block_index: k,
            admissions,
            transmission,
            service,
            queues: self.queues.clone(),
            completed,
        }
    }

    /// Time averages so far. Averages are over the blocks after warmup.
    pub fn summary(&self) -> RunSummary {
        let averaged = self.block.saturating_sub(self.config.warmup_blocks);
        let per = if averaged > 0 { 1.0 / averaged as f64 } else { 0.0 };
        let nodes: Vec<NodeSummary> = self
            .acc
            .iter()
            .enumerate()
            .map(|(j, a)| NodeSummary {
                x_p: a.a_p * per,
                x_o: a.a_o * per,
                x_pe: a.a_pe * per,
                mu_p: a.served_p * per,
                mu_o: a.served_o * per,
                mu_pe_fluid: a.served_pe * per,
                mu_pe_empirical: a.private_clean_payload * per,
                mu_p_empirical: a.private_payload * per,
                mu_o_empirical: a.open_payload * per,
                empirical_outage_fraction: ratio(a.outaged_private as f64, a.decoded_private as f64),
                markov_bound_avg: ratio(a.markov_bound_sum, a.decoded_private as f64),
                avg_power: a.power * per,
                avg_q_p: a.q_p * per,
                avg_q_o: a.q_o * per,
                avg_q_pe: a.q_pe * per,
                avg_z: a.z * per,
                avg_y: a.y * per,
                utility_avg: a.utility * per,
                decoded_private: a.decoded_private,
                outaged_private: a.outaged_private,
                decoded_open: a.decoded_open,
                decode_failures: a.failures,
                dummy_fraction: ratio(
                    a.private_dummy + a.open_dummy,
                    a.private_dummy + a.open_dummy + a.private_payload + a.open_payload,
                ),
                window_start: if self.block > self.config.warmup_blocks {
                    self.window_start[j]
                } else {
                    self.queues[j]
                },
                final_queues: self.queues[j],
                admitted_p_total: a.admitted_p_total,
                served_p_total: a.served_p_total,
                admitted_o_total: a.admitted_o_total,
                served_o_total: a.served_o_total,
            })
            .collect();
        let aggregate = aggregate(&nodes, &self.acc);
        RunSummary {
            n_blocks: self.block,
            averaged_blocks: averaged,
            nodes,
            aggregate,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn record_packet(acc: &mut NodeAccumulator, event: &PacketEvent, rates: &crate::harq::CodeRates) {
    match event {
        PacketEvent::InFlight => {}
        PacketEvent::Failed(_) => acc.failures += 1,
        PacketEvent::Decoded(CompletedPacket {
            kind: TrafficKind::Private,
            payload_bits,
            outage,
            markov_bound,
            ..
        }) => {
            acc.decoded_private += 1;
            acc.markov_bound_sum += markov_bound;
            acc.private_payload += payload_bits;
            acc.private_dummy += rates.r_hat_p - payload_bits;
            if *outage {
                acc.outaged_private += 1;
            } else {
                acc.private_clean_payload += payload_bits;
            }
        }
        PacketEvent::Decoded(CompletedPacket {
            kind: TrafficKind::Open,
            payload_bits,
            ..
        }) => {
            acc.decoded_open += 1;
            acc.open_payload += payload_bits;
            acc.open_dummy += rates.r_hat_o - payload_bits;
        }
    }
}

fn aggregate(nodes: &[NodeSummary], acc: &[NodeAccumulator]) -> NodeSummary {
    if nodes.is_empty() {
        return NodeSummary::default();
    }
    let n = nodes.len() as f64;
    let mean = |f: fn(&NodeSummary) -> f64| nodes.iter().map(f).sum::<f64>() / n;
    let mean_q = |f: fn(&NodeSummary) -> NodeQueues| {
        let mut q = NodeQueues::default();
        for s in nodes {
            let v = f(s);
            q.q_p += v.q_p / n;
            q.q_o += v.q_o / n;
            q.q_pe += v.q_pe / n;
            q.z += v.z / n;
            q.y += v.y / n;
        }
        q
    };
    let decoded: u64 = acc.iter().map(|a| a.decoded_private).sum();
    let outaged: u64 = acc.iter().map(|a| a.outaged_private).sum();
    let bound_sum: f64 = acc.iter().map(|a| a.markov_bound_sum).sum();
    let dummy: f64 = acc.iter().map(|a| a.private_dummy + a.open_dummy).sum();
    let payload: f64 = acc.iter().map(|a| a.private_payload + a.open_payload).sum();
    NodeSummary {
        x_p: mean(|s| s.x_p),
        x_o: mean(|s| s.x_o),
        x_pe: mean(|s| s.x_pe),
        mu_p: mean(|s| s.mu_p),
        mu_o: mean(|s| s.mu_o),
        mu_pe_fluid: mean(|s| s.mu_pe_fluid),
        mu_pe_empirical: mean(|s| s.mu_pe_empirical),
        mu_p_empirical: mean(|s| s.mu_p_empirical),
        mu_o_empirical: mean(|s| s.mu_o_empirical),
        empirical_outage_fraction: ratio(outaged as f64, decoded as f64),
        markov_bound_avg: ratio(bound_sum, decoded as f64),
        avg_power: mean(|s| s.avg_power),
        avg_q_p: mean(|s| s.avg_q_p),
        avg_q_o: mean(|s| s.avg_q_o),
        avg_q_pe: mean(|s| s.avg_q_pe),
        avg_z: mean(|s| s.avg_z),
        avg_y: mean(|s| s.avg_y),
        utility_avg: nodes.iter().map(|s| s.utility_avg).sum(),
        decoded_private: decoded,
        outaged_private: outaged,
        decoded_open: nodes.iter().map(|s| s.decoded_open).sum(),
        decode_failures: nodes.iter().map(|s| s.decode_failures).sum(),
        dummy_fraction: ratio(dummy, dummy + payload),
        window_start: mean_q(|s| s.window_start),
        final_queues: mean_q(|s| s.final_queues),
        admitted_p_total: nodes.iter().map(|s| s.admitted_p_total).sum(),
        served_p_total: nodes.iter().map(|s| s.served_p_total).sum(),
        admitted_o_total: nodes.iter().map(|s| s.admitted_o_total).sum(),
        served_o_total: nodes.iter().map(|s| s.served_o_total).sum(),
    }
}

/// Runs `config` to its horizon.
pub fn run(config: &SimConfig) -> Result<RunSummary> {
    run_traced(config, |_| {})
}

/// Runs `config`, handing every block's record to `trace`.
pub fn run_traced<F: FnMut(&BlockRecord)>(config: &SimConfig, mut trace: F) -> Result<RunSummary> {
    let mut sim = Simulation::new(config.clone())?;
    while !sim.is_finished() {
        let record = sim.step_block();
        trace(&record);
    }
    Ok(sim.summary())
}
