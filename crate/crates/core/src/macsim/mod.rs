//! Packet-level discrete-event MAC simulation.
//!
//! Three protocols share one medium engine: a duty-cycled S-MAC-style TDMA
//! ([`run_smac`]), a DS-CDMA MAC with EH/DATA/ACK ([`run_cdma_mac`]) and
//! static FDMA ([`run_fdma`]). Time is kept in integer nanoseconds so that
//! event ordering and the energy time partition are exact.
//!
//! Receptions are modelled per packet: a reception succeeds when the
//! receiver is awake and not transmitting for its whole duration, no other
//! reception on the same logical channel overlaps it at that receiver, and
//! a Bernoulli loss draw for the packet kind passes.

mod cdma;
mod engine;
mod fdma;
mod smac;

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cdma::{run_cdma_mac, CdmaConfig};
pub use fdma::{run_fdma, BandPlan, FdmaConfig};
pub use smac::{run_smac, ClashPolicy, SmacConfig};

/// Independent seeds for traffic generation and protocol randomness, so
/// every protocol sees the same arrivals under one seed.
pub(crate) fn seed_streams(seed: u64) -> (u64, u64) {
    (crate::seed::child(seed, 0), crate::seed::child(seed, 1))
}

/// Simulation time in nanoseconds.
pub type Time = u64;

pub const NS_PER_S: f64 = 1e9;

pub fn secs_to_ns(s: f64) -> Time {
    (s * NS_PER_S).round().max(0.0) as Time
}

pub fn ns_to_secs(t: Time) -> f64 {
    t as f64 / NS_PER_S
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("no traffic to simulate")]
    NoTraffic,
    #[error("nodes {0} and {1} share a spreading code")]
    DuplicateSpreadingCode(usize, usize),
    #[error("band plan has no bands")]
    EmptyBandPlan,
    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),
    #[error("invalid MAC configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Position,
    /// Battery capacity. Depletion is reported by the energy ledger, not
    /// enforced during the run.
    pub energy_budget_j: f64,
}

/// Node placement plus the acoustic range that defines who hears whom.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    range_m: f64,
    sound_speed: f64,
}

impl Topology {
    /// Builds a topology and checks that the range graph is connected.
    pub fn new(positions: Vec<Position>, range_m: f64) -> Result<Self, MacError> {
        if positions.len() < 2 {
            return Err(MacError::InvalidTopology(format!(
                "{} nodes; need at least 2",
                positions.len()
            )));
        }
        if !(range_m > 0.0) {
            return Err(MacError::InvalidTopology(format!("range {range_m} m")));
        }
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| Node {
                id,
                position,
                energy_budget_j: f64::INFINITY,
            })
            .collect();
        let topo = Topology {
            nodes,
            range_m,
            sound_speed: 1500.0,
        };
        if !topo.is_connected() {
            return Err(MacError::InvalidTopology(
                "range graph is not connected".into(),
            ));
        }
        Ok(topo)
    }

    /// `n` nodes on a straight line.
    pub fn line(n: usize, spacing_m: f64, range_m: f64) -> Result<Self, MacError> {
        Self::new(
            (0..n)
                .map(|i| Position::new(i as f64 * spacing_m, 0.0, 0.0))
                .collect(),
            range_m,
        )
    }

    /// Uniform placement in a square, redrawn until connected.
    pub fn random(n: usize, side_m: f64, range_m: f64, seed: u64) -> Result<Self, MacError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let pos = (0..n)
                .map(|_| {
                    Position::new(
                        rng.random::<f64>() * side_m,
                        rng.random::<f64>() * side_m,
                        0.0,
                    )
                })
                .collect();
            match Self::new(pos, range_m) {
                Err(MacError::InvalidTopology(m)) if m.contains("connected") => continue,
                other => return other,
            }
        }
        Err(MacError::InvalidTopology(format!(
            "no connected placement of {n} nodes in {side_m} m"
        )))
    }

    pub fn with_sound_speed(mut self, c: f64) -> Self {
        self.sound_speed = c;
        self
    }

    pub fn with_energy_budget(mut self, joules: f64) -> Self {
        self.nodes
            .iter_mut()
            .for_each(|n| n.energy_budget_j = joules);
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.nodes[a].position.distance(&self.nodes[b].position)
    }

    pub fn in_range(&self, a: usize, b: usize) -> bool {
        a != b && self.distance(a, b) <= self.range_m
    }

    pub fn prop_delay(&self, a: usize, b: usize) -> Time {
        secs_to_ns(self.distance(a, b) / self.sound_speed)
    }

    /// Propagation delay at the edge of the range.
    pub fn max_prop_delay(&self) -> Time {
        secs_to_ns(self.range_m / self.sound_speed)
    }

    pub fn neighbours(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&b| self.in_range(a, b))
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut todo = VecDeque::from([0]);
        seen[0] = true;
        while let Some(a) = todo.pop_front() {
            for b in self.neighbours(a) {
                if !seen[b] {
                    seen[b] = true;
                    todo.push_back(b);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time_s: f64,
    pub src: usize,
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub src: usize,
    pub dst: usize,
}

/// Offered traffic: single-hop flows, no routing.
#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    /// Each flow draws `packets_per_flow` arrivals with exponential gaps.
    Poisson {
        flows: Vec<Flow>,
        packets_per_flow: usize,
        mean_interarrival_s: f64,
        start_s: f64,
    },
    Scheduled(Vec<Arrival>),
}

impl Traffic {
    /// Arrivals sorted by time, ties kept in flow order.
    pub fn arrivals(&self, topo: &Topology, seed: u64) -> Result<Vec<Arrival>, MacError> {
        let mut out = match self {
            Traffic::Poisson {
                flows,
                packets_per_flow,
                mean_interarrival_s,
                start_s,
            } => {
                if flows.is_empty() || *packets_per_flow == 0 {
                    return Err(MacError::NoTraffic);
                }
                let exp = Exp::new(1.0 / mean_interarrival_s).map_err(|_| {
                    MacError::InvalidConfig(format!("mean interarrival {mean_interarrival_s}"))
                })?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(flows.len() * packets_per_flow);
                for f in flows {
                    let mut t = *start_s;
                    for _ in 0..*packets_per_flow {
                        t += exp.sample(&mut rng);
                        out.push(Arrival {
                            time_s: t,
                            src: f.src,
                            dst: f.dst,
                        });
                    }
                }
                out
            }
            Traffic::Scheduled(list) => {
                if list.is_empty() {
                    return Err(MacError::NoTraffic);
                }
                list.clone()
            }
        };
        for a in &out {
            if a.src >= topo.len() || a.dst >= topo.len() {
                return Err(MacError::InvalidTopology(format!(
                    "flow {}->{} names a missing node",
                    a.src, a.dst
                )));
            }
            if !topo.in_range(a.src, a.dst) {
                return Err(MacError::InvalidTopology(format!(
                    "flow {}->{} endpoints out of range",
                    a.src, a.dst
                )));
            }
            if !(a.time_s >= 0.0) {
                return Err(MacError::InvalidConfig(format!(
                    "arrival time {}",
                    a.time_s
                )));
            }
        }
        out.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        Ok(out)
    }
}

/// Per-bit and per-second energy costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCosts {
    pub tx_j_per_bit: f64,
    pub rx_j_per_bit: f64,
    pub idle_w: f64,
    pub sleep_w: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        EnergyCosts {
            tx_j_per_bit: 0.01,
            rx_j_per_bit: 0.0005,
            idle_w: 0.3,
            sleep_w: 0.001,
        }
    }
}

impl EnergyCosts {
    pub fn zero() -> Self {
        EnergyCosts {
            tx_j_per_bit: 0.0,
            rx_j_per_bit: 0.0,
            idle_w: 0.0,
            sleep_w: 0.0,
        }
    }
}

/// Link-level parameters shared by every protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumConfig {
    pub bitrate_bps: f64,
    pub data_bits: u32,
    pub control_bits: u32,
    /// Independent loss probability of a collision-free DATA reception.
    pub data_loss: f64,
    pub ack_loss: f64,
    /// Applies to SYNC, RTS, CTS and EH.
    pub control_loss: f64,
    /// New activity stops here; transmissions already on the air finish.
    pub horizon_s: f64,
    pub energy: EnergyCosts,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            bitrate_bps: 1000.0,
            data_bits: 256,
            control_bits: 32,
            data_loss: 0.0,
            ack_loss: 0.0,
            control_loss: 0.0,
            horizon_s: 3600.0,
            energy: EnergyCosts::default(),
        }
    }
}

impl MediumConfig {
    pub fn validate(&self) -> Result<(), MacError> {
        let bad = |m: String| Err(MacError::InvalidConfig(m));
        if !(self.bitrate_bps > 0.0) {
            return bad(format!("bitrate {}", self.bitrate_bps));
        }
        if self.data_bits == 0 || self.control_bits == 0 {
            return bad("packet sizes must be positive".into());
        }
        for (name, p) in [
            ("data_loss", self.data_loss),
            ("ack_loss", self.ack_loss),
            ("control_loss", self.control_loss),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.horizon_s > 0.0) {
            return bad(format!("horizon {}", self.horizon_s));
        }
        let e = &self.energy;
        if [e.tx_j_per_bit, e.rx_j_per_bit, e.idle_w, e.sleep_w]
            .iter()
            .any(|&v| !(v >= 0.0))
        {
            return bad("energy costs must be non-negative".into());
        }
        Ok(())
    }

    pub fn airtime(&self, bits: u32) -> Time {
        ((bits as f64 * NS_PER_S) / self.bitrate_bps).ceil() as Time
    }

    pub(crate) fn loss_for(&self, kind: PacketKind) -> f64 {
        match kind {
            PacketKind::Data => self.data_loss,
            PacketKind::Ack => self.ack_loss,
            _ => self.control_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Sync,
    Rts,
    Cts,
    Eh,
    Data,
    Ack,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Sync => "SYNC",
            PacketKind::Rts => "RTS",
            PacketKind::Cts => "CTS",
            PacketKind::Eh => "EH",
            PacketKind::Data => "DATA",
            PacketKind::Ack => "ACK",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TxStart,
    TxEnd,
    RxStart,
    RxEnd,
    WakeUp,
    Sleep,
    TimerExpiry,
    SimEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::TxStart => "TxStart",
            EventKind::TxEnd => "TxEnd",
            EventKind::RxStart => "RxStart",
            EventKind::RxEnd => "RxEnd",
            EventKind::WakeUp => "WakeUp",
            EventKind::Sleep => "Sleep",
            EventKind::TimerExpiry => "TimerExpiry",
            EventKind::SimEnd => "SimEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the event trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Time,
    pub node: usize,
    pub event: EventKind,
    pub packet: Option<PacketKind>,
    pub src: Option<usize>,
    /// `None` for broadcasts.
    pub dst: Option<usize>,
    pub bits: u32,
    /// Reservation carried by RTS/CTS, or the mute length on a mute Sleep.
    pub duration: Option<Time>,
}

fn fmt_ns(t: Time) -> String {
    format!("{}.{:09}", t / 1_000_000_000, t % 1_000_000_000)
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(w, "time_s,node,event,packet_kind,src,dst")?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_ns(r.time),
            r.node,
            r.event,
            r.packet.map(PacketKind::as_str).unwrap_or(""),
            opt(r.src),
            opt(r.dst)
        )?;
    }
    Ok(())
}

/// SHA-256 over the full trace, including the fields not exported to CSV.
pub fn trace_digest(trace: &[TraceRecord]) -> [u8; 32] {
    let mut h = Sha256::new();
    for r in trace {
        h.update(format!("{r:?}\n").as_bytes());
    }
    h.finalize().into()
}

/// Checks the overhearing rule on a trace: every mute (a `Sleep` tagged
/// RTS or CTS) must follow the reception of that packet with the same
/// reservation, and the node must neither wake, transmit nor receive
/// before the reservation ends. Returns the number of mutes checked.
pub fn check_mute_rule(trace: &[TraceRecord]) -> Result<usize, String> {
    let n = trace.iter().map(|r| r.node + 1).max().unwrap_or(0);
    let mut per_node: Vec<Vec<&TraceRecord>> = vec![Vec::new(); n];
    for r in trace {
        per_node[r.node].push(r);
    }
    let mut mutes = 0;
    for recs in &per_node {
        for (i, r) in recs.iter().enumerate() {
            let is_mute = r.event == EventKind::Sleep
                && matches!(r.packet, Some(PacketKind::Rts | PacketKind::Cts));
            if !is_mute {
                continue;
            }
            mutes += 1;
            let d = r
                .duration
                .ok_or_else(|| format!("mute at {} has no duration", fmt_ns(r.time)))?;
            let heard = recs[..i]
                .iter()
                .rev()
                .take_while(|p| p.time == r.time)
                .any(|p| {
                    p.event == EventKind::RxEnd && p.packet == r.packet && p.duration == Some(d)
                });
            if !heard {
                return Err(format!(
                    "node {} muted at {} without hearing the reservation",
                    r.node,
                    fmt_ns(r.time)
                ));
            }
            let end = r.time + d;
            for q in recs[i + 1..].iter().take_while(|q| q.time < end) {
                if matches!(
                    q.event,
                    EventKind::WakeUp | EventKind::RxStart | EventKind::TxStart
                ) {
                    return Err(format!(
                        "node {} {} {} at {} while muted until {}",
                        q.node,
                        q.event,
                        q.packet.map(PacketKind::as_str).unwrap_or("-"),
                        fmt_ns(q.time),
                        fmt_ns(end)
                    ));
                }
            }
        }
    }
    Ok(mutes)
}

/// Per-node energy ledger entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEnergy {
    pub node: usize,
    pub tx_ns: Time,
    pub rx_ns: Time,
    pub idle_ns: Time,
    pub sleep_ns: Time,
    pub tx_bits: u64,
    pub rx_bits: u64,
    pub energy_j: f64,
}

impl NodeEnergy {
    pub fn total_ns(&self) -> Time {
        self.tx_ns + self.rx_ns + self.idle_ns + self.sleep_ns
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RadioUse {
    Tx,
    Sleep,
    Rx,
    Idle,
}

/// Integrates a trace into per-node energy. Each instant is charged to one
/// state with precedence transmit, sleep, receive, idle, so the four
/// durations add up to the node's `SimEnd` time exactly.
pub fn energy_account(
    trace: &[TraceRecord],
    costs: &EnergyCosts,
) -> Result<Vec<NodeEnergy>, MacError> {
    let n = trace.iter().map(|r| r.node + 1).max().unwrap_or(0);
    if n == 0 {
        return Err(MacError::IncompleteTrace("empty trace".into()));
    }
    struct Acc {
        last: Time,
        tx: u32,
        rx: u32,
        asleep: bool,
        ended: bool,
        e: NodeEnergy,
    }
    let mut acc: Vec<Acc> = (0..n)
        .map(|node| Acc {
            last: 0,
            tx: 0,
            rx: 0,
            asleep: false,
            ended: false,
            e: NodeEnergy {
                node,
                tx_ns: 0,
                rx_ns: 0,
                idle_ns: 0,
                sleep_ns: 0,
                tx_bits: 0,
                rx_bits: 0,
                energy_j: 0.0,
            },
        })
        .collect();
    let incomplete = |m: String| Err(MacError::IncompleteTrace(m));
    for r in trace {
        let a = &mut acc[r.node];
        if a.ended {
            return incomplete(format!("node {} has events after SimEnd", r.node));
        }
        if r.time < a.last {
            return incomplete(format!(
                "node {} time goes backwards at {}",
                r.node,
                fmt_ns(r.time)
            ));
        }
        let state = if a.tx > 0 {
            RadioUse::Tx
        } else if a.asleep {
            RadioUse::Sleep
        } else if a.rx > 0 {
            RadioUse::Rx
        } else {
            RadioUse::Idle
        };
        let dt = r.time - a.last;
        match state {
            RadioUse::Tx => a.e.tx_ns += dt,
            RadioUse::Sleep => a.e.sleep_ns += dt,
            RadioUse::Rx => a.e.rx_ns += dt,
            RadioUse::Idle => a.e.idle_ns += dt,
        }
        a.last = r.time;
        match r.event {
            EventKind::TxStart => {
                a.tx += 1;
                a.e.tx_bits += r.bits as u64;
            }
            EventKind::TxEnd => {
                if a.tx == 0 {
                    return incomplete(format!("node {} TxEnd without TxStart", r.node));
                }
                a.tx -= 1;
            }
            EventKind::RxStart => {
                a.rx += 1;
                a.e.rx_bits += r.bits as u64;
            }
            EventKind::RxEnd => {
                if a.rx == 0 {
                    return incomplete(format!("node {} RxEnd without RxStart", r.node));
                }
                a.rx -= 1;
            }
            EventKind::Sleep => a.asleep = true,
            EventKind::WakeUp => a.asleep = false,
            EventKind::TimerExpiry => {}
            EventKind::SimEnd => {
                if a.tx != 0 || a.rx != 0 {
                    return incomplete(format!("node {} still on the air at SimEnd", r.node));
                }
                a.ended = true;
            }
        }
    }
    acc.into_iter()
        .map(|a| {
            if !a.ended {
                return Err(MacError::IncompleteTrace(format!(
                    "node {} has no SimEnd",
                    a.e.node
                )));
            }
            let mut e = a.e;
            e.energy_j = e.tx_bits as f64 * costs.tx_j_per_bit
                + e.rx_bits as f64 * costs.rx_j_per_bit
                + ns_to_secs(e.idle_ns) * costs.idle_w
                + ns_to_secs(e.sleep_ns) * costs.sleep_w;
            Ok(e)
        })
        .collect()
}

/// Summary statistics of one run. Normalised quantities divide by the
/// offered load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimMetrics {
    pub offered_packets: usize,
    pub delivered_packets: usize,
    pub lost_packets: usize,
    pub in_flight_packets: usize,
    /// Arrival at the sender to first successful reception; 0 when nothing
    /// was delivered.
    pub avg_end_to_end_delay_s: f64,
    pub total_energy_j: f64,
    pub energy_per_delivered_bit: f64,
    /// Energy over the cost of sending and receiving every offered bit once.
    pub normalized_energy: f64,
    /// Delivered over offered.
    pub normalized_delivered: f64,
    pub collisions: usize,
    pub retransmissions: usize,
    /// DATA transmissions including retransmissions.
    pub data_transmissions: usize,
    pub sim_time_s: f64,
}

impl SimMetrics {
    pub const CSV_HEADER: &'static str = "offered,delivered,lost,in_flight,avg_delay_s,energy_j,energy_per_bit,normalized_energy,normalized_delivered,collisions,retransmissions,sim_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.9},{:.9},{:.9e},{:.9},{:.9},{},{},{:.9}",
            self.offered_packets,
            self.delivered_packets,
            self.lost_packets,
            self.in_flight_packets,
            self.avg_end_to_end_delay_s,
            self.total_energy_j,
            self.energy_per_delivered_bit,
            self.normalized_energy,
            self.normalized_delivered,
            self.collisions,
            self.retransmissions,
            self.sim_time_s
        )
    }
}

/// Metrics, full event trace and per-node energy of one run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub metrics: SimMetrics,
    pub trace: Vec<TraceRecord>,
    pub energy: Vec<NodeEnergy>,
}
