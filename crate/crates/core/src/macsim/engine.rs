use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    energy_account, ns_to_secs, secs_to_ns, Arrival, EventKind, MediumConfig, PacketKind,
    SimMetrics, SimResult, Time, Topology, TraceRecord,
};

pub(crate) type TxId = usize;

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub kind: PacketKind,
    pub src: usize,
    pub dst: Option<usize>,
    pub bits: u32,
    pub airtime: Time,
    /// Reservation length on RTS/CTS.
    pub duration: Option<Time>,
    /// Logical channel: spreading code or band. Only equal channels collide.
    pub channel: u32,
    /// Index of the offered packet this frame carries or refers to.
    pub packet: Option<usize>,
    /// Protocol fields: schedule on SYNC, code index on EH.
    pub payload: [u64; 3],
}

enum Ev<T> {
    Arrival(usize),
    RxBegin(TxId),
    RxFinish(TxId),
    TxFinish(TxId),
    Timer(T),
}

struct Queued<T> {
    time: Time,
    node: usize,
    seq: u64,
    ev: Ev<T>,
}

impl<T> Queued<T> {
    fn key(&self) -> (Time, usize, u64) {
        (self.time, self.node, self.seq)
    }
}

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<T> Eq for Queued<T> {}

impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Queued<T> {
    // Reversed so the max-heap pops the earliest (time, node, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct RxSlot {
    tx: TxId,
    channel: u32,
    end: Time,
    collided: bool,
}

struct Radio {
    awake: bool,
    tx: Option<TxId>,
    rx: Vec<RxSlot>,
}

#[derive(Debug, Clone)]
pub(crate) struct PacketState {
    pub dst: usize,
    pub arrival: Time,
    pub delivered_at: Option<Time>,
    /// The sender has finished with this packet.
    pub done: bool,
}

pub(crate) trait Protocol<T> {
    fn start(&mut self, _eng: &mut Engine<'_, T>) {}
    fn arrival(&mut self, eng: &mut Engine<'_, T>, node: usize, packet: usize);
    fn received(&mut self, eng: &mut Engine<'_, T>, node: usize, frame: &Frame);
    fn tx_done(&mut self, eng: &mut Engine<'_, T>, node: usize, frame: &Frame);
    fn timer(&mut self, eng: &mut Engine<'_, T>, node: usize, timer: T);
    /// Energy detected at `node`; used for carrier sensing.
    fn carrier(&mut self, _eng: &mut Engine<'_, T>, _node: usize) {}
}

pub(crate) struct Engine<'a, T> {
    pub topo: &'a Topology,
    pub medium: MediumConfig,
    pub rng: ChaCha8Rng,
    pub packets: Vec<PacketState>,
    pub collisions: usize,
    pub retransmissions: usize,
    /// Extra DATA loss per channel (narrowband outage).
    pub channel_loss: Vec<f64>,
    now: Time,
    horizon: Time,
    seq: u64,
    queue: BinaryHeap<Queued<T>>,
    trace: Vec<TraceRecord>,
    radios: Vec<Radio>,
    txs: Vec<Frame>,
}

impl<'a, T> Engine<'a, T> {
    pub fn new(topo: &'a Topology, medium: MediumConfig, arrivals: &[Arrival], seed: u64) -> Self {
        let horizon = secs_to_ns(medium.horizon_s);
        let mut eng = Engine {
            topo,
            medium,
            rng: ChaCha8Rng::seed_from_u64(seed),
            packets: Vec::new(),
            collisions: 0,
            retransmissions: 0,
            channel_loss: Vec::new(),
            now: 0,
            horizon,
            seq: 0,
            queue: BinaryHeap::new(),
            trace: Vec::new(),
            radios: (0..topo.len())
                .map(|_| Radio {
                    awake: true,
                    tx: None,
                    rx: Vec::new(),
                })
                .collect(),
            txs: Vec::new(),
        };
        for a in arrivals {
            let t = secs_to_ns(a.time_s);
            if t > horizon {
                continue;
            }
            let id = eng.packets.len();
            eng.packets.push(PacketState {
                dst: a.dst,
                arrival: t,
                delivered_at: None,
                done: false,
            });
            eng.push(t, a.src, Ev::Arrival(id));
        }
        eng
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn is_awake(&self, node: usize) -> bool {
        self.radios[node].awake
    }

    pub fn is_transmitting(&self, node: usize) -> bool {
        self.radios[node].tx.is_some()
    }

    pub fn is_receiving(&self, node: usize) -> bool {
        self.radios[node].rx.iter().any(|s| s.end > self.now)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        p > 0.0 && (p >= 1.0 || self.rng.random::<f64>() < p)
    }

    fn push(&mut self, time: Time, node: usize, ev: Ev<T>) {
        self.seq += 1;
        self.queue.push(Queued {
            time,
            node,
            seq: self.seq,
            ev,
        });
    }

    /// Protocol timer; dropped if it falls past the horizon.
    pub fn schedule(&mut self, node: usize, at: Time, timer: T) {
        debug_assert!(at >= self.now, "timer scheduled in the past");
        if at <= self.horizon {
            self.push(at.max(self.now), node, Ev::Timer(timer));
        }
    }

    pub fn note(
        &mut self,
        node: usize,
        event: EventKind,
        frame: Option<&Frame>,
        duration: Option<Time>,
    ) {
        self.trace.push(TraceRecord {
            time: self.now,
            node,
            event,
            packet: frame.map(|f| f.kind),
            src: frame.map(|f| f.src),
            dst: frame.and_then(|f| f.dst),
            bits: frame.map_or(0, |f| f.bits),
            duration: duration.or(frame.and_then(|f| f.duration)),
        });
    }

    pub fn note_kind(
        &mut self,
        node: usize,
        event: EventKind,
        kind: Option<PacketKind>,
        duration: Option<Time>,
    ) {
        self.trace.push(TraceRecord {
            time: self.now,
            node,
            event,
            packet: kind,
            src: None,
            dst: None,
            bits: 0,
            duration,
        });
    }

    /// Cuts off receptions still in progress. Intervals are half-open, so a
    /// reception ending right now is left to finish normally.
    fn abort_receptions(&mut self, node: usize) {
        let now = self.now;
        let (done, cut): (Vec<RxSlot>, Vec<RxSlot>) = std::mem::take(&mut self.radios[node].rx)
            .into_iter()
            .partition(|s| s.end <= now);
        self.radios[node].rx = done;
        for s in cut {
            let mut frame = self.txs[s.tx].clone();
            frame.bits = 0;
            self.note(node, EventKind::RxEnd, Some(&frame), None);
        }
    }

    /// Puts the radio to sleep or wakes it. `cause` marks a mute triggered
    /// by an overheard reservation. Returns false if the radio is busy
    /// transmitting and cannot sleep.
    pub fn set_awake(
        &mut self,
        node: usize,
        awake: bool,
        cause: Option<(PacketKind, Time)>,
    ) -> bool {
        if self.radios[node].awake == awake {
            return true;
        }
        if awake {
            self.radios[node].awake = true;
            self.note_kind(node, EventKind::WakeUp, None, None);
        } else {
            if self.radios[node].tx.is_some() {
                return false;
            }
            self.abort_receptions(node);
            self.radios[node].awake = false;
            self.note_kind(
                node,
                EventKind::Sleep,
                cause.map(|c| c.0),
                cause.map(|c| c.1),
            );
        }
        true
    }

    /// Starts a transmission now. Returns `None` past the horizon or when the
    /// radio is asleep or already transmitting.
    pub fn transmit(&mut self, node: usize, frame: Frame) -> Option<TxId> {
        if self.now > self.horizon || !self.radios[node].awake || self.radios[node].tx.is_some() {
            return None;
        }
        self.abort_receptions(node);
        let id = self.txs.len();
        self.note(node, EventKind::TxStart, Some(&frame), None);
        let end = self.now + frame.airtime;
        self.txs.push(frame);
        self.radios[node].tx = Some(id);
        self.push(end, node, Ev::TxFinish(id));
        for m in 0..self.topo.len() {
            if self.topo.in_range(node, m) {
                let at = self.now + self.topo.prop_delay(node, m);
                self.push(at, m, Ev::RxBegin(id));
            }
        }
        Some(id)
    }

    pub fn airtime(&self, bits: u32) -> Time {
        self.medium.airtime(bits)
    }

    /// Marks first delivery; later copies are duplicates.
    pub fn deliver(&mut self, packet: usize) -> bool {
        let p = &mut self.packets[packet];
        if p.delivered_at.is_some() {
            return false;
        }
        p.delivered_at = Some(self.now);
        true
    }

    pub fn finish(&mut self, packet: usize) {
        self.packets[packet].done = true;
    }

    fn rx_begin<P: Protocol<T>>(&mut self, proto: &mut P, node: usize, tx: TxId) {
        let radio = &mut self.radios[node];
        if !radio.awake || radio.tx.is_some() {
            return;
        }
        let channel = self.txs[tx].channel;
        let end = self.now + self.txs[tx].airtime;
        let now = self.now;
        let mut collided = false;
        for s in radio
            .rx
            .iter_mut()
            .filter(|s| s.channel == channel && s.end > now)
        {
            s.collided = true;
            collided = true;
        }
        radio.rx.push(RxSlot {
            tx,
            channel,
            end,
            collided,
        });
        let frame = self.txs[tx].clone();
        self.note(node, EventKind::RxStart, Some(&frame), None);
        self.push(end, node, Ev::RxFinish(tx));
        proto.carrier(self, node);
    }

    fn rx_finish<P: Protocol<T>>(&mut self, proto: &mut P, node: usize, tx: TxId) {
        let Some(idx) = self.radios[node].rx.iter().position(|s| s.tx == tx) else {
            return;
        };
        let slot = self.radios[node].rx.remove(idx);
        let frame = self.txs[tx].clone();
        let mut end = frame.clone();
        end.bits = 0;
        self.note(node, EventKind::RxEnd, Some(&end), None);
        if slot.collided {
            if frame.dst == Some(node) {
                self.collisions += 1;
            }
            return;
        }
        let mut lost = self.bernoulli(self.medium.loss_for(frame.kind));
        if frame.kind == PacketKind::Data {
            let outage = self
                .channel_loss
                .get(frame.channel as usize)
                .copied()
                .unwrap_or(0.0);
            lost |= self.bernoulli(outage);
        }
        if !lost {
            proto.received(self, node, &frame);
        }
    }

    pub fn run<P: Protocol<T>>(mut self, proto: &mut P) -> SimResult {
        proto.start(&mut self);
        while let Some(q) = self.queue.pop() {
            self.now = q.time;
            match q.ev {
                Ev::Arrival(p) => proto.arrival(&mut self, q.node, p),
                Ev::RxBegin(tx) => self.rx_begin(proto, q.node, tx),
                Ev::RxFinish(tx) => self.rx_finish(proto, q.node, tx),
                Ev::TxFinish(tx) => {
                    self.radios[q.node].tx = None;
                    let frame = self.txs[tx].clone();
                    let mut end = frame.clone();
                    end.bits = 0;
                    self.note(q.node, EventKind::TxEnd, Some(&end), None);
                    proto.tx_done(&mut self, q.node, &frame);
                }
                Ev::Timer(t) => {
                    if q.time <= self.horizon {
                        proto.timer(&mut self, q.node, t);
                    }
                }
            }
        }
        self.finish_run()
    }

    fn finish_run(mut self) -> SimResult {
        self.now = self.now.max(self.horizon);
        for n in 0..self.topo.len() {
            self.note_kind(n, EventKind::SimEnd, None, None);
        }
        let costs = self.medium.energy;
        let energy = energy_account(&self.trace, &costs).expect("engine emits complete traces");
        let total_energy: f64 = energy.iter().map(|e| e.energy_j).sum();
        let offered = self.packets.len();
        let delays: Vec<Time> = self
            .packets
            .iter()
            .filter_map(|p| p.delivered_at.map(|d| d - p.arrival))
            .collect();
        let delivered = delays.len();
        let lost = self
            .packets
            .iter()
            .filter(|p| p.done && p.delivered_at.is_none())
            .count();
        let data_bits = self.medium.data_bits as f64;
        let per_bit_cost = costs.tx_j_per_bit + costs.rx_j_per_bit;
        let offered_cost = offered as f64 * data_bits * per_bit_cost;
        let data_transmissions = self
            .trace
            .iter()
            .filter(|r| r.event == EventKind::TxStart && r.packet == Some(PacketKind::Data))
            .count();
        let metrics = SimMetrics {
            offered_packets: offered,
            delivered_packets: delivered,
            lost_packets: lost,
            in_flight_packets: offered - delivered - lost,
            avg_end_to_end_delay_s: if delivered == 0 {
                0.0
            } else {
                delays.iter().map(|&d| ns_to_secs(d)).sum::<f64>() / delivered as f64
            },
            total_energy_j: total_energy,
            energy_per_delivered_bit: if delivered == 0 {
                f64::INFINITY
            } else {
                total_energy / (delivered as f64 * data_bits)
            },
            normalized_energy: if offered_cost > 0.0 {
                total_energy / offered_cost
            } else {
                0.0
            },
            normalized_delivered: if offered == 0 {
                0.0
            } else {
                delivered as f64 / offered as f64
            },
            collisions: self.collisions,
            retransmissions: self.retransmissions,
            data_transmissions,
            sim_time_s: ns_to_secs(self.now),
        };
        SimResult {
            metrics,
            trace: self.trace,
            energy,
        }
    }
}
