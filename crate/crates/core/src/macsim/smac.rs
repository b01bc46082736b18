//! Duty-cycled S-MAC-style TDMA.
//!
//! Every node starts awake and arms a random timeout. The first node whose
//! timeout fires becomes a synchronizer: it picks its listen schedule and
//! broadcasts it in a SYNC packet. Nodes that hear a SYNC first become
//! followers, adopt the schedule and rebroadcast it. The SYNC carries the
//! absolute schedule phase, i.e. receivers are assumed to compensate the
//! propagation delay.
//!
//! Each cycle opens with a listen window made of a SYNC slot and a data
//! slot, followed by sleep. To send, a node wakes for the receiver's data
//! slot, picks a random tiny slot, senses the carrier until then and, if
//! nothing was heard, sends an RTS timed to land inside the receiver's data
//! slot. RTS and CTS carry the remaining reservation; any other node that
//! hears either sleeps for that long. There is no ACK: the exchange ends
//! with DATA. A missing CTS costs one retry and the sender tries again in a
//! later cycle.

use std::collections::VecDeque;

use rand::Rng;

use super::engine::{Engine, Frame, Protocol};
use super::{
    secs_to_ns, seed_streams, EventKind, MacError, MediumConfig, PacketKind, SimResult, Time,
    Topology, Traffic,
};

/// What a node does on hearing a SYNC for a schedule other than its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClashPolicy {
    /// Switch to whichever schedule was created first.
    #[default]
    AdoptEarliest,
    /// Keep the own schedule and also listen in the other one.
    FollowBoth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmacConfig {
    pub medium: MediumConfig,
    pub cycle_s: f64,
    pub sync_slot_s: f64,
    pub data_slot_s: f64,
    pub tiny_slot_s: f64,
    pub tiny_slots: u32,
    /// Synchronizer timeouts are drawn from `[0, discovery_window_s)`.
    pub discovery_window_s: f64,
    /// Followers rebroadcast an adopted schedule after a delay drawn from
    /// `[0, rebroadcast_jitter_s)`.
    pub rebroadcast_jitter_s: f64,
    /// Cycles between periodic SYNC broadcasts of each node.
    pub sync_every: u32,
    /// Further RTS attempts after a missing CTS before the packet is dropped.
    pub retry_limit: u32,
    pub clash_policy: ClashPolicy,
    /// Never sleep; the protocol is otherwise unchanged.
    pub always_on: bool,
    /// Nodes whose radio is asleep for the whole run.
    pub never_listen: Vec<usize>,
    pub guard_s: f64,
}

impl Default for SmacConfig {
    fn default() -> Self {
        SmacConfig {
            medium: MediumConfig::default(),
            cycle_s: 20.0,
            sync_slot_s: 1.5,
            data_slot_s: 1.0,
            tiny_slot_s: 0.05,
            tiny_slots: 8,
            discovery_window_s: 20.0,
            rebroadcast_jitter_s: 0.5,
            sync_every: 5,
            retry_limit: 3,
            clash_policy: ClashPolicy::AdoptEarliest,
            always_on: false,
            never_listen: Vec::new(),
            guard_s: 0.01,
        }
    }
}

impl SmacConfig {
    pub fn validate(&self, topo: &Topology) -> Result<(), MacError> {
        self.medium.validate()?;
        let bad = |m: String| Err(MacError::InvalidConfig(m));
        let positive = [
            ("cycle_s", self.cycle_s),
            ("sync_slot_s", self.sync_slot_s),
            ("data_slot_s", self.data_slot_s),
            ("tiny_slot_s", self.tiny_slot_s),
            ("discovery_window_s", self.discovery_window_s),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return bad(format!("{name} = {v} must be positive"));
        }
        if !(self.rebroadcast_jitter_s >= 0.0) || !(self.guard_s >= 0.0) {
            return bad("negative jitter or guard".into());
        }
        if self.tiny_slots == 0 || self.sync_every == 0 {
            return bad("tiny_slots and sync_every must be positive".into());
        }
        if self.sync_slot_s + self.data_slot_s > self.cycle_s {
            return bad("listen window longer than the cycle".into());
        }
        let ctrl = self.medium.airtime(self.medium.control_bits);
        if secs_to_ns(self.tiny_slot_s) * self.tiny_slots as u64 + ctrl
            > secs_to_ns(self.data_slot_s)
        {
            return bad("contention slots and RTS do not fit the data slot".into());
        }
        if ctrl + topo.max_prop_delay() >= secs_to_ns(self.sync_slot_s) {
            return bad("SYNC slot shorter than a SYNC plus the maximum propagation delay".into());
        }
        if let Some(n) = self.never_listen.iter().find(|&&n| n >= topo.len()) {
            return bad(format!("never_listen names missing node {n}"));
        }
        Ok(())
    }
}

/// A listen schedule: windows start at `phase + j * cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Schedule {
    phase: Time,
    created: Time,
    origin: usize,
}

impl Schedule {
    fn older_than(&self, other: &Schedule) -> bool {
        (self.created, self.origin) < (other.created, other.origin)
    }

    fn payload(&self) -> [u64; 3] {
        [self.phase, self.created, self.origin as u64]
    }

    fn from_payload(p: [u64; 3]) -> Self {
        Schedule {
            phase: p[0],
            created: p[1],
            origin: p[2] as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Waiting for the contention window to open.
    Waiting,
    Sensing,
    AwaitCts,
    SendingData,
}

struct Attempt {
    packet: usize,
    dst: usize,
    stage: Stage,
    heard: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum SmacTimer {
    SyncTimeout,
    Rebroadcast,
    PeriodicSync { send: bool },
    Boundary(u64),
    Contend(u64),
    SendRts(u64),
    CtsTimeout(u64),
    MuteEnd,
    PeerEnd(u64),
}

struct SNode {
    primary: Option<Schedule>,
    extra: Vec<Schedule>,
    /// Primary schedule phase each neighbour last advertised.
    neighbour_phase: Vec<Option<Time>>,
    queue: VecDeque<usize>,
    attempt: Option<Attempt>,
    attempt_token: u64,
    retries: u32,
    /// Stay awake until this time for an exchange in progress.
    engaged_until: Time,
    muted_until: Time,
    mute_kind: Option<PacketKind>,
    /// Sender whose DATA this node has reserved the channel for.
    peer: Option<usize>,
    peer_token: u64,
    boundary_token: u64,
    never_listen: bool,
}

struct Smac<'c> {
    cfg: &'c SmacConfig,
    nodes: Vec<SNode>,
    cycle: Time,
    listen: Time,
    sync_slot: Time,
    tiny: Time,
    guard: Time,
    discovery_end: Time,
    max_prop: Time,
}

type Eng<'e> = Engine<'e, SmacTimer>;

impl Smac<'_> {
    fn offset(&self, s: &Schedule, t: Time) -> Time {
        ((t as i128 - s.phase as i128).rem_euclid(self.cycle as i128)) as Time
    }

    fn in_window(&self, s: &Schedule, t: Time) -> bool {
        self.offset(s, t) < self.listen
    }

    fn next_edge(&self, s: &Schedule, t: Time) -> Time {
        let off = self.offset(s, t);
        if off < self.listen {
            t + (self.listen - off)
        } else {
            t + (self.cycle - off)
        }
    }

    fn schedules(&self, node: usize) -> impl Iterator<Item = &Schedule> {
        self.nodes[node]
            .primary
            .iter()
            .chain(self.nodes[node].extra.iter())
    }

    fn want_awake(&self, node: usize, now: Time) -> bool {
        let n = &self.nodes[node];
        if n.never_listen {
            return false;
        }
        if now < self.discovery_end {
            return true;
        }
        if n.muted_until > now {
            return false;
        }
        if n.engaged_until > now || self.cfg.always_on {
            return true;
        }
        self.schedules(node).any(|s| self.in_window(s, now))
    }

    /// Brings the radio in line with the schedule and arms the next check.
    fn refresh(&mut self, eng: &mut Eng<'_>, node: usize) {
        let now = eng.now();
        let want = self.want_awake(node, now);
        eng.set_awake(node, want, None);
        let n = &self.nodes[node];
        if n.never_listen {
            return;
        }
        let mut next = Time::MAX;
        if now < self.discovery_end {
            next = self.discovery_end;
        } else {
            for t in [n.muted_until, n.engaged_until] {
                if t > now {
                    next = next.min(t);
                }
            }
            if !self.cfg.always_on {
                for s in self.schedules(node) {
                    next = next.min(self.next_edge(s, now));
                }
            }
        }
        if next != Time::MAX {
            let n = &mut self.nodes[node];
            n.boundary_token += 1;
            eng.schedule(node, next, SmacTimer::Boundary(n.boundary_token));
        }
    }

    fn control_frame(
        &self,
        eng: &Eng<'_>,
        kind: PacketKind,
        src: usize,
        dst: Option<usize>,
    ) -> Frame {
        let bits = self.cfg.medium.control_bits;
        Frame {
            kind,
            src,
            dst,
            bits,
            airtime: eng.airtime(bits),
            duration: None,
            channel: 0,
            packet: None,
            payload: [0; 3],
        }
    }

    fn send_sync(&mut self, eng: &mut Eng<'_>, node: usize) -> bool {
        let Some(s) = self.nodes[node].primary else {
            return false;
        };
        let mut f = self.control_frame(eng, PacketKind::Sync, node, None);
        f.payload = s.payload();
        eng.transmit(node, f).is_some()
    }

    fn busy(&self, node: usize) -> bool {
        let n = &self.nodes[node];
        n.peer.is_some()
            || n.attempt
                .as_ref()
                .is_some_and(|a| matches!(a.stage, Stage::AwaitCts | Stage::SendingData))
    }

    fn cancel_pending_attempt(&mut self, node: usize) {
        let n = &mut self.nodes[node];
        if n.attempt
            .as_ref()
            .is_some_and(|a| matches!(a.stage, Stage::Waiting | Stage::Sensing))
        {
            n.attempt = None;
            n.attempt_token += 1;
            n.engaged_until = 0;
        }
    }

    /// Plans the next RTS for the head-of-line packet, if possible.
    fn try_schedule(&mut self, eng: &mut Eng<'_>, node: usize) {
        let now = eng.now();
        let n = &self.nodes[node];
        if n.attempt.is_some() || n.peer.is_some() || n.muted_until > now || n.never_listen {
            return;
        }
        let Some(&packet) = n.queue.front() else {
            return;
        };
        let dst = eng.packets[packet].dst;
        let Some(phase) = n.neighbour_phase[dst] else {
            return;
        };
        let prop = eng.topo.prop_delay(node, dst);
        // Earliest receiver data slot whose contention window opens strictly
        // after now and after discovery.
        let target = (now + 1).max(self.discovery_end) + prop;
        let first_slot = phase as i128 + self.sync_slot as i128;
        let mut j = ((target as i128 - first_slot) as f64 / self.cycle as f64)
            .ceil()
            .max(0.0) as i128;
        // Binary exponential backoff in whole cycles after missed CTSs:
        // tiny slots are far shorter than acoustic propagation, so they
        // cannot separate two contenders on their own.
        if n.retries > 0 {
            j += eng.rng.random_range(0..1i128 << n.retries.min(8));
        }
        let data_start = (first_slot + j * self.cycle as i128) as Time;
        let window_open = data_start - prop;
        let k = eng.rng.random_range(0..self.cfg.tiny_slots) as Time;
        let tx_at = window_open + k * self.tiny;
        let n = &mut self.nodes[node];
        n.attempt_token += 1;
        n.attempt = Some(Attempt {
            packet,
            dst,
            stage: Stage::Waiting,
            heard: false,
        });
        eng.schedule(node, window_open, SmacTimer::Contend(n.attempt_token));
        eng.schedule(node, tx_at, SmacTimer::SendRts(n.attempt_token));
    }

    fn end_attempt(&mut self, eng: &mut Eng<'_>, node: usize, packet_done: bool) {
        let n = &mut self.nodes[node];
        if let Some(a) = n.attempt.take() {
            if packet_done {
                eng.finish(a.packet);
                n.queue.pop_front();
                n.retries = 0;
            }
        }
        n.attempt_token += 1;
        n.engaged_until = eng.now();
        self.refresh(eng, node);
        self.try_schedule(eng, node);
    }

    fn on_sync(&mut self, eng: &mut Eng<'_>, node: usize, frame: &Frame) {
        let incoming = Schedule::from_payload(frame.payload);
        let now = eng.now();
        let in_discovery = now < self.discovery_end;
        let n = &mut self.nodes[node];
        let moved = n.neighbour_phase[frame.src].is_some_and(|p| p != incoming.phase);
        n.neighbour_phase[frame.src] = Some(incoming.phase);
        if moved && n.attempt.as_ref().is_some_and(|a| a.dst == frame.src) {
            // Replan against the receiver's new schedule.
            self.cancel_pending_attempt(node);
        }
        let n = &mut self.nodes[node];
        let mut rebroadcast = false;
        match n.primary {
            None => {
                n.primary = Some(incoming);
                rebroadcast = true;
            }
            Some(own) if own.origin == incoming.origin && own.created == incoming.created => {}
            Some(own) => match self.cfg.clash_policy {
                ClashPolicy::AdoptEarliest => {
                    if incoming.older_than(&own) {
                        n.primary = Some(incoming);
                        n.extra.clear();
                        rebroadcast = true;
                    }
                }
                ClashPolicy::FollowBoth => {
                    if !n
                        .extra
                        .iter()
                        .any(|s| s.origin == incoming.origin && s.created == incoming.created)
                    {
                        n.extra.push(incoming);
                    }
                }
            },
        }
        if rebroadcast && in_discovery {
            let jitter = secs_to_ns(self.cfg.rebroadcast_jitter_s);
            let wait = if jitter == 0 {
                0
            } else {
                eng.rng.random_range(0..jitter)
            };
            eng.schedule(node, now + wait, SmacTimer::Rebroadcast);
        }
        self.refresh(eng, node);
        self.try_schedule(eng, node);
    }

    fn mute(&mut self, eng: &mut Eng<'_>, node: usize, frame: &Frame) {
        if self.busy(node) {
            return;
        }
        let Some(d) = frame.duration else {
            return;
        };
        self.cancel_pending_attempt(node);
        let until = eng.now() + d;
        let n = &mut self.nodes[node];
        n.muted_until = n.muted_until.max(until);
        n.mute_kind = Some(frame.kind);
        eng.set_awake(node, false, Some((frame.kind, d)));
        eng.schedule(node, until, SmacTimer::MuteEnd);
        self.refresh(eng, node);
    }
}

impl Protocol<SmacTimer> for Smac<'_> {
    fn start(&mut self, eng: &mut Eng<'_>) {
        let window = secs_to_ns(self.cfg.discovery_window_s);
        for node in 0..self.nodes.len() {
            if self.nodes[node].never_listen {
                eng.set_awake(node, false, None);
                continue;
            }
            let t = eng.rng.random_range(0..window);
            eng.schedule(node, t, SmacTimer::SyncTimeout);
            eng.schedule(
                node,
                self.discovery_end,
                SmacTimer::PeriodicSync { send: false },
            );
            self.refresh(eng, node);
        }
    }

    fn arrival(&mut self, eng: &mut Eng<'_>, node: usize, packet: usize) {
        self.nodes[node].queue.push_back(packet);
        self.try_schedule(eng, node);
    }

    fn received(&mut self, eng: &mut Eng<'_>, node: usize, frame: &Frame) {
        match frame.kind {
            PacketKind::Sync => self.on_sync(eng, node, frame),
            PacketKind::Rts if frame.dst == Some(node) => {
                if self.busy(node) {
                    return;
                }
                self.cancel_pending_attempt(node);
                let m = &self.cfg.medium;
                let data_air = eng.airtime(m.data_bits);
                let mut cts = self.control_frame(eng, PacketKind::Cts, node, Some(frame.src));
                cts.duration = Some(2 * self.max_prop + data_air);
                let cts_air = cts.airtime;
                if eng.transmit(node, cts).is_none() {
                    return;
                }
                let prop = eng.topo.prop_delay(node, frame.src);
                let n = &mut self.nodes[node];
                n.peer = Some(frame.src);
                n.peer_token += 1;
                n.engaged_until = eng.now() + cts_air + 2 * prop + data_air + self.guard;
                eng.schedule(node, n.engaged_until, SmacTimer::PeerEnd(n.peer_token));
                self.refresh(eng, node);
            }
            PacketKind::Cts if frame.dst == Some(node) => {
                let Some(a) = self.nodes[node].attempt.as_ref() else {
                    return;
                };
                if a.stage != Stage::AwaitCts || a.dst != frame.src {
                    return;
                }
                let bits = self.cfg.medium.data_bits;
                let data = Frame {
                    kind: PacketKind::Data,
                    src: node,
                    dst: Some(a.dst),
                    bits,
                    airtime: eng.airtime(bits),
                    duration: None,
                    channel: 0,
                    packet: Some(a.packet),
                    payload: [0; 3],
                };
                let air = data.airtime;
                if eng.transmit(node, data).is_some() {
                    let n = &mut self.nodes[node];
                    n.attempt.as_mut().unwrap().stage = Stage::SendingData;
                    n.engaged_until = n.engaged_until.max(eng.now() + air);
                }
            }
            PacketKind::Rts | PacketKind::Cts => self.mute(eng, node, frame),
            PacketKind::Data if frame.dst == Some(node) => {
                if let Some(p) = frame.packet {
                    eng.deliver(p);
                }
                if self.nodes[node].peer == Some(frame.src) {
                    let n = &mut self.nodes[node];
                    n.peer = None;
                    n.peer_token += 1;
                    n.engaged_until = eng.now();
                    self.refresh(eng, node);
                    self.try_schedule(eng, node);
                }
            }
            _ => {}
        }
    }

    fn tx_done(&mut self, eng: &mut Eng<'_>, node: usize, frame: &Frame) {
        if frame.kind == PacketKind::Data {
            self.end_attempt(eng, node, true);
        } else {
            self.refresh(eng, node);
        }
    }

    fn carrier(&mut self, _eng: &mut Eng<'_>, node: usize) {
        if let Some(a) = self.nodes[node].attempt.as_mut() {
            if a.stage == Stage::Sensing {
                a.heard = true;
            }
        }
    }

    fn timer(&mut self, eng: &mut Eng<'_>, node: usize, timer: SmacTimer) {
        let now = eng.now();
        match timer {
            SmacTimer::SyncTimeout => {
                if self.nodes[node].primary.is_none() {
                    let phase = now % self.cycle;
                    self.nodes[node].primary = Some(Schedule {
                        phase,
                        created: now,
                        origin: node,
                    });
                    if !self.send_sync(eng, node) {
                        eng.schedule(node, now + self.guard.max(1), SmacTimer::Rebroadcast);
                    }
                    self.refresh(eng, node);
                    self.try_schedule(eng, node);
                }
            }
            SmacTimer::Rebroadcast => {
                if !self.send_sync(eng, node) && now < self.discovery_end {
                    eng.schedule(node, now + self.guard.max(1), SmacTimer::Rebroadcast);
                }
            }
            SmacTimer::PeriodicSync { send } => {
                let sensing = self.nodes[node]
                    .attempt
                    .as_ref()
                    .is_some_and(|a| a.stage == Stage::Sensing);
                if send && eng.is_awake(node) && !self.busy(node) && !sensing {
                    self.send_sync(eng, node);
                }
                let Some(s) = self.nodes[node].primary else {
                    return;
                };
                let off = self.offset(&s, now);
                let this_start = now - off;
                let skip = if send {
                    self.cfg.sync_every as u64
                } else {
                    1 + (node as u64 % self.cfg.sync_every as u64)
                };
                let start = this_start + skip * self.cycle;
                let room =
                    self.sync_slot - self.max_prop - eng.airtime(self.cfg.medium.control_bits);
                let at = start + eng.rng.random_range(0..room);
                eng.schedule(node, at, SmacTimer::PeriodicSync { send: true });
            }
            SmacTimer::Boundary(t) => {
                if t == self.nodes[node].boundary_token {
                    self.refresh(eng, node);
                }
            }
            SmacTimer::Contend(t) => {
                if t != self.nodes[node].attempt_token {
                    return;
                }
                let tx_at_guard = self.tiny * self.cfg.tiny_slots as u64 + 1;
                let n = &mut self.nodes[node];
                let a = n.attempt.as_mut().unwrap();
                a.stage = Stage::Sensing;
                a.heard = eng.is_receiving(node);
                n.engaged_until = n.engaged_until.max(now + tx_at_guard);
                self.refresh(eng, node);
            }
            SmacTimer::SendRts(t) => {
                if t != self.nodes[node].attempt_token {
                    return;
                }
                let a = self.nodes[node].attempt.as_ref().unwrap();
                let (dst, packet) = (a.dst, a.packet);
                if a.stage != Stage::Sensing
                    || a.heard
                    || eng.is_receiving(node)
                    || eng.is_transmitting(node)
                {
                    // Channel taken: defer to a later cycle without spending a retry.
                    self.end_attempt(eng, node, false);
                    return;
                }
                let m = &self.cfg.medium;
                let cts_air = eng.airtime(m.control_bits);
                let data_air = eng.airtime(m.data_bits);
                let mut rts = self.control_frame(eng, PacketKind::Rts, node, Some(dst));
                rts.packet = Some(packet);
                rts.duration = Some(3 * self.max_prop + cts_air + data_air);
                let rts_air = rts.airtime;
                if eng.transmit(node, rts).is_none() {
                    self.end_attempt(eng, node, false);
                    return;
                }
                let deadline =
                    now + rts_air + 2 * eng.topo.prop_delay(node, dst) + cts_air + self.guard;
                let n = &mut self.nodes[node];
                n.attempt.as_mut().unwrap().stage = Stage::AwaitCts;
                n.engaged_until = deadline;
                eng.schedule(node, deadline, SmacTimer::CtsTimeout(t));
            }
            SmacTimer::CtsTimeout(t) => {
                let n = &mut self.nodes[node];
                if t != n.attempt_token
                    || n.attempt.as_ref().map(|a| a.stage) != Some(Stage::AwaitCts)
                {
                    return;
                }
                n.retries += 1;
                eng.retransmissions += 1;
                let give_up = n.retries > self.cfg.retry_limit;
                self.end_attempt(eng, node, give_up);
            }
            SmacTimer::MuteEnd => {
                if now >= self.nodes[node].muted_until {
                    let kind = self.nodes[node].mute_kind.take();
                    eng.note_kind(node, EventKind::TimerExpiry, kind, None);
                    self.refresh(eng, node);
                    self.try_schedule(eng, node);
                }
            }
            SmacTimer::PeerEnd(t) => {
                let n = &mut self.nodes[node];
                if t == n.peer_token && n.peer.is_some() {
                    n.peer = None;
                    self.refresh(eng, node);
                    self.try_schedule(eng, node);
                }
            }
        }
    }
}

/// Runs the duty-cycled TDMA MAC over `topo`.
pub fn run_smac(
    topo: &Topology,
    traffic: &Traffic,
    cfg: &SmacConfig,
    seed: u64,
) -> Result<SimResult, MacError> {
    cfg.validate(topo)?;
    let (traffic_seed, sim_seed) = seed_streams(seed);
    let arrivals = traffic.arrivals(topo, traffic_seed)?;
    let eng = Engine::new(topo, cfg.medium, &arrivals, sim_seed);
    let mut proto = Smac::new(cfg, topo);
    Ok(eng.run(&mut proto))
}

impl<'c> Smac<'c> {
    fn new(cfg: &'c SmacConfig, topo: &Topology) -> Self {
        let max_prop = topo.max_prop_delay();
        let sync_air = cfg.medium.airtime(cfg.medium.control_bits);
        let jitter = secs_to_ns(cfg.rebroadcast_jitter_s);
        let discovery_end = secs_to_ns(cfg.discovery_window_s)
            + topo.len() as Time * (max_prop + jitter + sync_air);
        Smac {
            cfg,
            nodes: (0..topo.len())
                .map(|i| SNode {
                    primary: None,
                    extra: Vec::new(),
                    neighbour_phase: vec![None; topo.len()],
                    queue: VecDeque::new(),
                    attempt: None,
                    attempt_token: 0,
                    retries: 0,
                    engaged_until: 0,
                    muted_until: 0,
                    mute_kind: None,
                    peer: None,
                    peer_token: 0,
                    boundary_token: 0,
                    never_listen: cfg.never_listen.contains(&i),
                })
                .collect(),
            cycle: secs_to_ns(cfg.cycle_s),
            listen: secs_to_ns(cfg.sync_slot_s + cfg.data_slot_s),
            sync_slot: secs_to_ns(cfg.sync_slot_s),
            tiny: secs_to_ns(cfg.tiny_slot_s),
            guard: secs_to_ns(cfg.guard_s),
            discovery_end,
            max_prop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::{check_mute_rule, ns_to_secs, trace_digest, Arrival, Flow, TraceRecord};

    const S: Time = 1_000_000_000;

    fn one_packet(at: f64, src: usize, dst: usize) -> Traffic {
        Traffic::Scheduled(vec![Arrival {
            time_s: at,
            src,
            dst,
        }])
    }

    fn short(horizon_s: f64) -> SmacConfig {
        SmacConfig {
            medium: MediumConfig {
                horizon_s,
                ..MediumConfig::default()
            },
            ..SmacConfig::default()
        }
    }

    fn first(
        trace: &[TraceRecord],
        node: usize,
        event: EventKind,
        kind: PacketKind,
    ) -> Option<&TraceRecord> {
        trace
            .iter()
            .find(|r| r.node == node && r.event == event && r.packet == Some(kind))
    }

    #[test]
    fn minimal_exchange_timeline() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let cfg = short(200.0);
        let r = run_smac(&topo, &one_packet(1.0, 0, 1), &cfg, 11).unwrap();
        assert_eq!(r.metrics.delivered_packets, 1);
        let rts = first(&r.trace, 0, EventKind::TxStart, PacketKind::Rts)
            .unwrap()
            .time;
        let prop = S / 2;
        let (ctrl, data) = (32 * S / 1000, 256 * S / 1000);
        let arrival_at_dst = rts + ctrl + prop + ctrl + prop + data + prop;
        assert_eq!(
            secs_to_ns(r.metrics.avg_end_to_end_delay_s),
            arrival_at_dst - S
        );

        // The RTS lands on a tiny-slot boundary of the receiver's data slot.
        let sync = r
            .trace
            .iter()
            .find(|r| r.event == EventKind::TxStart)
            .unwrap()
            .time;
        let off = (rts + prop - sync - 3 * S / 2) % (20 * S);
        assert_eq!(off % (S / 20), 0);
        assert!(off / (S / 20) < 8);
    }

    #[test]
    fn ledger_matches_hand_sum() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let cfg = short(120.0);
        let r = run_smac(&topo, &one_packet(1.0, 0, 1), &cfg, 5).unwrap();
        let c = cfg.medium.energy;
        for node in 0..2 {
            let recs: Vec<&TraceRecord> = r.trace.iter().filter(|t| t.node == node).collect();
            let span = |start: EventKind, end: EventKind| -> (Time, u64) {
                let (mut total, mut bits, mut open) = (0, 0, None);
                for t in &recs {
                    if t.event == start {
                        assert!(open.is_none(), "overlap in minimal exchange");
                        open = Some(t.time);
                        bits += t.bits as u64;
                    } else if t.event == end {
                        total += t.time - open.take().unwrap();
                    }
                }
                (total, bits)
            };
            let (tx, tx_bits) = span(EventKind::TxStart, EventKind::TxEnd);
            let (rx, rx_bits) = span(EventKind::RxStart, EventKind::RxEnd);
            let (sleep, _) = span(EventKind::Sleep, EventKind::WakeUp);
            let end = recs.last().unwrap().time;
            // A trailing Sleep has no WakeUp before SimEnd.
            let trailing = recs
                .iter()
                .rev()
                .find(|t| matches!(t.event, EventKind::Sleep | EventKind::WakeUp));
            let sleep = sleep
                + trailing
                    .filter(|t| t.event == EventKind::Sleep)
                    .map_or(0, |t| end - t.time);
            let idle = end - tx - rx - sleep;
            let hand = tx_bits as f64 * c.tx_j_per_bit
                + rx_bits as f64 * c.rx_j_per_bit
                + ns_to_secs(idle) * c.idle_w
                + ns_to_secs(sleep) * c.sleep_w;
            let e = r.energy[node];
            assert_eq!(
                (e.tx_ns, e.rx_ns, e.sleep_ns, e.idle_ns),
                (tx, rx, sleep, idle)
            );
            assert!((e.energy_j - hand).abs() < 1e-9);
        }
    }

    #[test]
    fn sleeping_receiver_gets_nothing() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let cfg = SmacConfig {
            never_listen: vec![1],
            ..short(300.0)
        };
        let r = run_smac(&topo, &one_packet(1.0, 0, 1), &cfg, 3).unwrap();
        assert_eq!(r.metrics.delivered_packets, 0);
        assert_eq!(r.energy[1].sleep_ns, r.energy[1].total_ns());
    }

    #[test]
    fn third_party_mutes_for_reservation() {
        // node 2 hears the CTS but not the RTS
        let topo = Topology::line(3, 750.0, 1000.0).unwrap();
        let r = run_smac(&topo, &one_packet(1.0, 0, 1), &short(200.0), 17).unwrap();
        assert_eq!(r.metrics.delivered_packets, 1);
        let mute = r
            .trace
            .iter()
            .find(|t| t.node == 2 && t.event == EventKind::Sleep && t.packet.is_some())
            .expect("node 2 mutes");
        let d = mute.duration.unwrap();
        let heard = r
            .trace
            .iter()
            .find(|t| t.node == 2 && t.event == EventKind::RxEnd && t.packet == mute.packet);
        assert_eq!(heard.unwrap().duration, Some(d));
        let expiry = r
            .trace
            .iter()
            .find(|t| t.node == 2 && t.event == EventKind::TimerExpiry)
            .unwrap();
        assert_eq!(expiry.time, mute.time + d);
        assert_eq!(expiry.packet, mute.packet);
        assert!(check_mute_rule(&r.trace).unwrap() >= 1);
        assert!(first(&r.trace, 2, EventKind::RxStart, PacketKind::Data).is_none());
    }

    #[test]
    fn deterministic_traces() {
        let topo = Topology::random(5, 1200.0, 1500.0, 9).unwrap();
        let flows = (0..5)
            .map(|i| Flow {
                src: i,
                dst: (i + 1) % 5,
            })
            .filter(|f| topo.in_range(f.src, f.dst))
            .collect();
        let traffic = Traffic::Poisson {
            flows,
            packets_per_flow: 4,
            mean_interarrival_s: 30.0,
            start_s: 0.0,
        };
        let cfg = short(400.0);
        let a = run_smac(&topo, &traffic, &cfg, 1).unwrap();
        let b = run_smac(&topo, &traffic, &cfg, 1).unwrap();
        let c = run_smac(&topo, &traffic, &cfg, 2).unwrap();
        assert_eq!(trace_digest(&a.trace), trace_digest(&b.trace));
        assert_eq!(a.metrics, b.metrics);
        assert_ne!(trace_digest(&a.trace), trace_digest(&c.trace));
        let m = a.metrics;
        assert_eq!(
            m.delivered_packets + m.lost_packets + m.in_flight_packets,
            m.offered_packets
        );
        check_mute_rule(&a.trace).unwrap();
    }

    #[test]
    fn longer_sleep_saves_energy() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let traffic = one_packet(1.0, 0, 1);
        let mut last = f64::INFINITY;
        for cycle in [10.0, 20.0, 40.0] {
            let cfg = SmacConfig {
                cycle_s: cycle,
                ..short(600.0)
            };
            let r = run_smac(&topo, &traffic, &cfg, 4).unwrap();
            assert_eq!(r.metrics.delivered_packets, 1);
            assert!(r.metrics.total_energy_j <= last);
            last = r.metrics.total_energy_j;
        }
        let on = SmacConfig {
            always_on: true,
            ..short(600.0)
        };
        let r = run_smac(&topo, &traffic, &on, 4).unwrap();
        assert_eq!(r.metrics.delivered_packets, 1);
        assert!(r.metrics.total_energy_j > last);
    }

    #[test]
    fn clash_policies() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let own = Schedule {
            phase: 3 * S,
            created: 50 * S,
            origin: 0,
        };
        let older = Schedule {
            phase: 7 * S,
            created: 40 * S,
            origin: 1,
        };
        let sync = Frame {
            kind: PacketKind::Sync,
            src: 1,
            dst: None,
            bits: 32,
            airtime: 32 * S / 1000,
            duration: None,
            channel: 0,
            packet: None,
            payload: older.payload(),
        };
        for (policy, primary, extra) in [
            (ClashPolicy::AdoptEarliest, older, 0),
            (ClashPolicy::FollowBoth, own, 1),
        ] {
            let cfg = SmacConfig {
                clash_policy: policy,
                ..SmacConfig::default()
            };
            let mut proto = Smac::new(&cfg, &topo);
            let mut eng: Engine<'_, SmacTimer> = Engine::new(&topo, cfg.medium, &[], 0);
            proto.nodes[0].primary = Some(own);
            proto.on_sync(&mut eng, 0, &sync);
            assert_eq!(proto.nodes[0].primary, Some(primary));
            assert_eq!(proto.nodes[0].extra.len(), extra);
            assert_eq!(proto.nodes[0].neighbour_phase[1], Some(older.phase));
        }
        // A newer schedule never displaces an older one.
        let cfg = SmacConfig::default();
        let mut proto = Smac::new(&cfg, &topo);
        let mut eng: Engine<'_, SmacTimer> = Engine::new(&topo, cfg.medium, &[], 0);
        proto.nodes[0].primary = Some(older);
        let newer = Frame {
            payload: own.payload(),
            ..sync
        };
        proto.on_sync(&mut eng, 0, &newer);
        assert_eq!(proto.nodes[0].primary, Some(older));
    }

    #[test]
    fn config_errors() {
        let topo = Topology::line(2, 750.0, 1500.0).unwrap();
        let traffic = one_packet(1.0, 0, 1);
        let bad = SmacConfig {
            data_slot_s: 0.2,
            ..SmacConfig::default()
        };
        assert!(matches!(
            run_smac(&topo, &traffic, &bad, 0),
            Err(MacError::InvalidConfig(_))
        ));
        let bad = SmacConfig {
            sync_slot_s: 0.5,
            ..SmacConfig::default()
        };
        assert!(run_smac(&topo, &traffic, &bad, 0).is_err());
        let none = Traffic::Scheduled(vec![]);
        assert_eq!(
            run_smac(&topo, &none, &SmacConfig::default(), 0).unwrap_err(),
            MacError::NoTraffic
        );
    }
}
