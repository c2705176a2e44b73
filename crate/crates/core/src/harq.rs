//! Incremental-redundancy HARQ bookkeeping at the mutual-information level.
//!
//! A packet accumulates `log2(1 + P·h)` per transmitted block at the base
//! station and, for private packets, `log2(1 + P·h_ji)` at every other node.
//! Decoding succeeds once the base-station total strictly exceeds the
//! codeword rate; a private packet suffers a privacy outage once any
//! eavesdropper total strictly exceeds `R̂ − R̂^p`.

use serde::{Deserialize, Serialize};

use crate::channel::{expected_cross_rate, rate, ChannelBlockState};
use crate::error::{Error, Result};

/// Per-node code parameters, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeRates {
    /// Total Wyner codeword rate `R̂`.
    pub r_hat: f64,
    /// Private payload rate `R̂^p` embedded in each codeword.
    pub r_hat_p: f64,
    /// Open packet size `R̂^o`.
    pub r_hat_o: f64,
}

impl CodeRates {
    pub fn new(r_hat: f64, r_hat_p: f64, r_hat_o: f64) -> Result<Self> {
        let rates = Self {
            r_hat,
            r_hat_p,
            r_hat_o,
        };
        let errs = rates.violations();
        if errs.is_empty() {
            Ok(rates)
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.r_hat_p > 0.0 && self.r_hat_p < self.r_hat && self.r_hat.is_finite()) {
            errs.push(format!(
                "code rates need 0 < R_hat_p < R_hat, got R_hat_p = {}, R_hat = {}",
                self.r_hat_p, self.r_hat
            ));
        }
        if !(self.r_hat_o > 0.0 && self.r_hat_o.is_finite()) {
            errs.push(format!("R_hat_o = {} must be > 0", self.r_hat_o));
        }
        errs
    }

    /// Fraction `R̂^p/R̂` of each transmitted bit that is private payload.
    pub fn private_fraction(&self) -> f64 {
        self.r_hat_p / self.r_hat
    }

    /// Equivocation budget `R̂ − R̂^p` an eavesdropper must not exceed.
    pub fn leakage_budget(&self) -> f64 {
        self.r_hat - self.r_hat_p
    }

    /// Multiplier `R̂^p/(R̂ − R̂^p)` applied to the expected eavesdropper
    /// rate in the effective private rate.
    pub fn leakage_weight(&self) -> f64 {
        self.r_hat_p / self.leakage_budget()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Private,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqConfig {
    /// Maximum number of transmissions of one packet.
    pub max_retransmissions: u32,
    /// Code parameters per node.
    pub rates: Vec<CodeRates>,
}

impl HarqConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.max_retransmissions < 1 {
            errs.push("max_retransmissions must be >= 1".to_string());
        }
        for (j, r) in self.rates.iter().enumerate() {
            errs.extend(r.violations().into_iter().map(|e| format!("node {j}: {e}")));
        }
        errs
    }
}

/// One packet in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqPacket {
    pub owner: usize,
    pub kind: TrafficKind,
    pub packet_id: u64,
    /// Information accumulated at the base station.
    pub acc_main: f64,
    /// Information accumulated at each node; the owner's entry stays 0.
    pub acc_eaves: Vec<f64>,
    /// First block in which the packet may be transmitted.
    pub start_block: u64,
    pub retransmission_count: u32,
    /// Real (non-dummy) payload bits carried.
    pub payload_bits: f64,
    /// Σ over transmitted blocks of Σᵢ E[R_ji], the numerator of the
    /// Markov bound on this packet's outage probability.
    pub expected_leakage: f64,
    /// Block in which the outage event first occurred.
    pub outage_block: Option<u64>,
}

impl HarqPacket {
    pub fn new(
        owner: usize,
        kind: TrafficKind,
        packet_id: u64,
        n_nodes: usize,
        start_block: u64,
        payload_bits: f64,
    ) -> Self {
        Self {
            owner,
            kind,
            packet_id,
            acc_main: 0.0,
            acc_eaves: vec![0.0; n_nodes],
            start_block,
            retransmission_count: 0,
            payload_bits,
            expected_leakage: 0.0,
            outage_block: None,
        }
    }

    /// Adds one block's worth of mutual information at `power` using the
    /// true gains of `block`. Open packets ignore eavesdroppers.
    pub fn accumulate(&mut self, power: f64, block: &ChannelBlockState) {
        self.acc_main += rate(power, block.h_main[self.owner]);
        if self.kind == TrafficKind::Private {
            for (i, &h) in block.h_cross.row(self.owner) {
                self.acc_eaves[i] += rate(power, h);
            }
        }
        self.retransmission_count += 1;
    }

    /// Largest accumulation over all eavesdroppers.
    pub fn max_eavesdropper(&self) -> f64 {
        self.acc_eaves
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.owner)
            .map(|(_, &v)| v)
            .fold(0.0, f64::max)
    }

    /// Markov bound `Σ E[D_ji] / (R̂ − R̂^p)` on this packet's outage probability.
    pub fn markov_bound(&self, rates: &CodeRates) -> f64 {
        self.expected_leakage / rates.leakage_budget()
    }
}

/// Strict-threshold decode test against `R̂` (private) or `R̂^o` (open).
pub fn check_decode(packet: &HarqPacket, rates: &CodeRates) -> bool {
    match packet.kind {
        TrafficKind::Private => packet.acc_main > rates.r_hat,
        TrafficKind::Open => packet.acc_main > rates.r_hat_o,
    }
}

/// True iff some eavesdropper has accumulated strictly more than `R̂ − R̂^p`.
/// Always false for open packets.
pub fn check_privacy_outage(packet: &HarqPacket, rates: &CodeRates) -> bool {
    packet.kind == TrafficKind::Private && packet.max_eavesdropper() > rates.leakage_budget()
}

/// Private rate delivered without privacy outage, corrected by the Markov
/// bound: `(R̂^p/R̂)·r_main − (R̂^p/(R̂−R̂^p))·Σᵢ E[log2(1 + P·h_ji)]`.
///
/// `cross_means` are the mean gains of the transmitter's cross channels.
/// The result may be negative.
pub fn effective_rate_markov<I>(r_main: f64, power: f64, cross_means: I, rates: &CodeRates) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let leakage: f64 = cross_means
        .into_iter()
        .map(|m| expected_cross_rate(power, m))
        .sum();
    effective_rate_from_leakage(r_main, leakage, rates)
}

/// [`effective_rate_markov`] with the expected eavesdropper rate sum given.
#[inline]
pub fn effective_rate_from_leakage(r_main: f64, expected_leakage: f64, rates: &CodeRates) -> f64 {
    rates.private_fraction() * r_main - rates.leakage_weight() * expected_leakage
}

/// Outcome of transmitting a packet for one block.
#[derive(Debug, Clone, PartialEq)]
pub enum PacketEvent {
    InFlight,
    Decoded(CompletedPacket),
    /// Hit the transmission limit without decoding.
    Failed(CompletedPacket),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletedPacket {
    pub owner: usize,
    pub kind: TrafficKind,
    pub packet_id: u64,
    pub start_block: u64,
    pub end_block: u64,
    pub transmissions: u32,
    pub payload_bits: f64,
    pub outage: bool,
    pub markov_bound: f64,
}

/// The at-most-one in-flight private and open packet of a single node.
#[derive(Debug, Clone, Default)]
pub struct NodeHarq {
    pub private: Option<HarqPacket>,
    pub open: Option<HarqPacket>,
    next_packet_id: u64,
}

impl NodeHarq {
    pub fn slot(&mut self, kind: TrafficKind) -> &mut Option<HarqPacket> {
        match kind {
            TrafficKind::Private => &mut self.private,
            TrafficKind::Open => &mut self.open,
        }
    }

    pub fn in_flight(&self, kind: TrafficKind) -> bool {
        match kind {
            TrafficKind::Private => self.private.is_some(),
            TrafficKind::Open => self.open.is_some(),
        }
    }

    /// Starts a new packet of `kind`; the caller debits `payload_bits`.
    pub fn start(
        &mut self,
        owner: usize,
        kind: TrafficKind,
        n_nodes: usize,
        block: u64,
        payload_bits: f64,
    ) -> &mut HarqPacket {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        self.slot(kind)
            .insert(HarqPacket::new(owner, kind, id, n_nodes, block, payload_bits))
    }

    /// Transmits the in-flight packet of `kind` for one block.
    ///
    /// `expected_leakage` is Σᵢ E[R_ji] at `power`, added to the packet's
    /// Markov-bound numerator for private packets.
    pub fn transmit(
        &mut self,
        kind: TrafficKind,
        power: f64,
        expected_leakage: f64,
        block: &ChannelBlockState,
        config: &HarqConfig,
    ) -> PacketEvent {
        let slot = self.slot(kind);
        let Some(packet) = slot.as_mut() else {
            return PacketEvent::InFlight;
        };
        let rates = &config.rates[packet.owner];
        packet.accumulate(power, block);
        if kind == TrafficKind::Private {
            packet.expected_leakage += expected_leakage;
            if packet.outage_block.is_none() && check_privacy_outage(packet, rates) {
                packet.outage_block = Some(block.block_index);
            }
        }
        let decoded = check_decode(packet, rates);
        let exhausted = packet.retransmission_count >= config.max_retransmissions;
        if !decoded && !exhausted {
            return PacketEvent::InFlight;
        }
        let packet = slot.take().expect("checked above");
        let done = CompletedPacket {
            owner: packet.owner,
            kind,
            packet_id: packet.packet_id,
            start_block: packet.start_block,
            end_block: block.block_index,
            transmissions: packet.retransmission_count,
            payload_bits: packet.payload_bits,
            outage: packet.outage_block.is_some(),
            markov_bound: packet.markov_bound(rates),
        };
        if decoded {
            PacketEvent::Decoded(done)
        } else {
            PacketEvent::Failed(done)
        }
    }
}
