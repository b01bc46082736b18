//! DS-CDMA MAC. A sender backs off for a random time, announces itself
//! with an Extended Header on the common access code, then immediately
//! sends DATA spread with its own code. The receiver only despreads DATA
//! whose EH it caught, and acknowledges on the sender's code. Missing ACKs
//! trigger a fresh EH/DATA attempt after another backoff.

use std::collections::VecDeque;

use rand::Rng;

use super::engine::{Engine, Frame, Protocol};
use super::{
    secs_to_ns, seed_streams, MacError, MediumConfig, PacketKind, SimResult, Time, Topology,
    Traffic,
};
use crate::phy::{preferred_pair, PnOrigin};

const COMMON_CHANNEL: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct CdmaConfig {
    pub medium: MediumConfig,
    /// Spreading parameters per node; `None` hands out Gold codes of degree 7.
    pub codes: Option<Vec<PnOrigin>>,
    /// Shared code for EH packets.
    pub common_code: PnOrigin,
    /// EH start is drawn uniformly from `[0, backoff_max_s)` after a packet
    /// becomes ready.
    pub backoff_max_s: f64,
    /// Retransmissions allowed per packet; `None` retries forever.
    pub retry_limit: Option<u32>,
    /// Slack added to the round trip when waiting for an ACK.
    pub ack_guard_s: f64,
}

fn gold7(shift: usize) -> PnOrigin {
    PnOrigin::Gold {
        register_len: 7,
        pair: preferred_pair(7).expect("degree 7 pair"),
        shift,
    }
}

impl Default for CdmaConfig {
    fn default() -> Self {
        CdmaConfig {
            medium: MediumConfig::default(),
            codes: None,
            common_code: gold7(0),
            backoff_max_s: 2.0,
            retry_limit: Some(5),
            ack_guard_s: 0.05,
        }
    }
}

impl CdmaConfig {
    /// Resolved per-node codes, checked for uniqueness.
    pub fn assign_codes(&self, nodes: usize) -> Result<Vec<PnOrigin>, MacError> {
        let codes = match &self.codes {
            Some(c) if c.len() == nodes => c.clone(),
            Some(c) => {
                return Err(MacError::InvalidConfig(format!(
                    "{} spreading codes for {nodes} nodes",
                    c.len()
                )));
            }
            None if nodes < 129 => (1..=nodes).map(gold7).collect(),
            None => {
                return Err(MacError::InvalidConfig(format!(
                    "{nodes} nodes exceed the default code family"
                )))
            }
        };
        for (i, a) in codes.iter().enumerate() {
            if *a == self.common_code {
                return Err(MacError::InvalidConfig(format!(
                    "node {i} uses the common EH code"
                )));
            }
            if let Some(j) = codes[i + 1..].iter().position(|b| b == a) {
                return Err(MacError::DuplicateSpreadingCode(i, i + 1 + j));
            }
        }
        Ok(codes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Backoff,
    WaitRadio,
    SendingEh,
    SendingData,
    AwaitAck,
}

struct Attempt {
    packet: usize,
    dst: usize,
    retries: u32,
    stage: Stage,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum CdmaTimer {
    Backoff(u64),
    AckTimeout(u64),
}

struct CdmaNode {
    queue: VecDeque<usize>,
    attempt: Option<Attempt>,
    token: u64,
    /// Packet announced by each sender's latest EH.
    expecting: Vec<Option<usize>>,
    pending_acks: VecDeque<(usize, usize)>,
}

struct Cdma<'c> {
    cfg: &'c CdmaConfig,
    nodes: Vec<CdmaNode>,
}

impl Cdma<'_> {
    fn channel(node: usize) -> u32 {
        node as u32 + 1
    }

    fn frame(
        &self,
        eng: &Engine<'_, CdmaTimer>,
        kind: PacketKind,
        src: usize,
        dst: usize,
        packet: usize,
    ) -> Frame {
        let m = &self.cfg.medium;
        let (bits, channel) = match kind {
            PacketKind::Eh => (m.control_bits, COMMON_CHANNEL),
            PacketKind::Data => (m.data_bits, Self::channel(src)),
            // ACK travels on the code of the DATA sender it answers.
            _ => (m.control_bits, Self::channel(dst)),
        };
        Frame {
            kind,
            src,
            dst: Some(dst),
            bits,
            airtime: eng.airtime(bits),
            duration: None,
            channel,
            packet: Some(packet),
            payload: [Self::channel(src) as u64, 0, 0],
        }
    }

    fn start_next(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize) {
        let n = &mut self.nodes[node];
        if n.attempt.is_some() {
            return;
        }
        let Some(&packet) = n.queue.front() else {
            return;
        };
        n.attempt = Some(Attempt {
            packet,
            dst: eng.packets[packet].dst,
            retries: 0,
            stage: Stage::Backoff,
        });
        self.backoff(eng, node);
    }

    fn backoff(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize) {
        let n = &mut self.nodes[node];
        n.token += 1;
        if let Some(a) = n.attempt.as_mut() {
            a.stage = Stage::Backoff;
        }
        let max = secs_to_ns(self.cfg.backoff_max_s);
        let wait: Time = if max == 0 {
            0
        } else {
            eng.rng.random_range(0..max)
        };
        eng.schedule(node, eng.now() + wait, CdmaTimer::Backoff(n.token));
    }

    fn send_eh(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize) {
        let Some(a) = self.nodes[node].attempt.as_ref() else {
            return;
        };
        if eng.is_transmitting(node) {
            self.nodes[node].attempt.as_mut().unwrap().stage = Stage::WaitRadio;
            return;
        }
        let frame = self.frame(eng, PacketKind::Eh, node, a.dst, a.packet);
        if eng.transmit(node, frame).is_some() {
            self.nodes[node].attempt.as_mut().unwrap().stage = Stage::SendingEh;
        }
    }

    fn finish_attempt(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize) {
        let n = &mut self.nodes[node];
        if let Some(a) = n.attempt.take() {
            eng.finish(a.packet);
            n.queue.pop_front();
        }
        n.token += 1;
        self.start_next(eng, node);
    }

    fn flush_acks(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize) {
        if eng.is_transmitting(node) {
            return;
        }
        if let Some((dst, packet)) = self.nodes[node].pending_acks.pop_front() {
            let frame = self.frame(eng, PacketKind::Ack, node, dst, packet);
            eng.transmit(node, frame);
        }
    }
}

impl Protocol<CdmaTimer> for Cdma<'_> {
    fn arrival(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize, packet: usize) {
        self.nodes[node].queue.push_back(packet);
        self.start_next(eng, node);
    }

    fn received(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize, frame: &Frame) {
        if frame.dst != Some(node) {
            return;
        }
        let packet = frame.packet.expect("CDMA frames carry a packet");
        match frame.kind {
            PacketKind::Eh => self.nodes[node].expecting[frame.src] = Some(packet),
            PacketKind::Data => {
                if self.nodes[node].expecting[frame.src] != Some(packet) {
                    return;
                }
                self.nodes[node].expecting[frame.src] = None;
                eng.deliver(packet);
                self.nodes[node].pending_acks.push_back((frame.src, packet));
                self.flush_acks(eng, node);
            }
            PacketKind::Ack => {
                let matches = self.nodes[node]
                    .attempt
                    .as_ref()
                    .is_some_and(|a| a.packet == packet && a.stage == Stage::AwaitAck);
                if matches {
                    self.finish_attempt(eng, node);
                }
            }
            _ => {}
        }
    }

    fn tx_done(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize, frame: &Frame) {
        let stage = self.nodes[node].attempt.as_ref().map(|a| a.stage);
        match (frame.kind, stage) {
            (PacketKind::Eh, Some(Stage::SendingEh)) => {
                let a = self.nodes[node].attempt.as_ref().unwrap();
                let data = self.frame(eng, PacketKind::Data, node, a.dst, a.packet);
                if eng.transmit(node, data).is_some() {
                    self.nodes[node].attempt.as_mut().unwrap().stage = Stage::SendingData;
                }
            }
            (PacketKind::Data, Some(Stage::SendingData)) => {
                let a = self.nodes[node].attempt.as_mut().unwrap();
                a.stage = Stage::AwaitAck;
                let rtt = 2 * eng.topo.prop_delay(node, a.dst);
                let wait = rtt
                    + eng.airtime(self.cfg.medium.control_bits)
                    + secs_to_ns(self.cfg.ack_guard_s);
                let token = self.nodes[node].token;
                eng.schedule(node, eng.now() + wait, CdmaTimer::AckTimeout(token));
            }
            _ => {}
        }
        self.flush_acks(eng, node);
        if stage == Some(Stage::WaitRadio) {
            self.send_eh(eng, node);
        }
    }

    fn timer(&mut self, eng: &mut Engine<'_, CdmaTimer>, node: usize, timer: CdmaTimer) {
        match timer {
            CdmaTimer::Backoff(t) if t == self.nodes[node].token => self.send_eh(eng, node),
            CdmaTimer::AckTimeout(t) if t == self.nodes[node].token => {
                let limit = self.cfg.retry_limit;
                let a = self.nodes[node]
                    .attempt
                    .as_mut()
                    .expect("timer token implies an attempt");
                if a.stage != Stage::AwaitAck {
                    return;
                }
                if limit.is_some_and(|l| a.retries >= l) {
                    self.finish_attempt(eng, node);
                } else {
                    a.retries += 1;
                    eng.retransmissions += 1;
                    self.backoff(eng, node);
                }
            }
            _ => {}
        }
    }
}

/// Runs the DS-CDMA MAC over `topo`.
pub fn run_cdma_mac(
    topo: &Topology,
    traffic: &Traffic,
    cfg: &CdmaConfig,
    seed: u64,
) -> Result<SimResult, MacError> {
    cfg.medium.validate()?;
    if !(cfg.backoff_max_s >= 0.0) || !(cfg.ack_guard_s >= 0.0) {
        return Err(MacError::InvalidConfig("negative CDMA timer".into()));
    }
    cfg.assign_codes(topo.len())?;
    let (traffic_seed, sim_seed) = seed_streams(seed);
    let arrivals = traffic.arrivals(topo, traffic_seed)?;
    let eng = Engine::new(topo, cfg.medium, &arrivals, sim_seed);
    let mut proto = Cdma {
        cfg,
        nodes: (0..topo.len())
            .map(|_| CdmaNode {
                queue: VecDeque::new(),
                attempt: None,
                token: 0,
                expecting: vec![None; topo.len()],
                pending_acks: VecDeque::new(),
            })
            .collect(),
    };
    Ok(eng.run(&mut proto))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::{Arrival, Flow, Position};

    fn pair() -> Topology {
        Topology::line(2, 750.0, 1500.0).unwrap()
    }

    fn stream(n: usize, gap: f64) -> Traffic {
        Traffic::Poisson {
            flows: vec![Flow { src: 0, dst: 1 }],
            packets_per_flow: n,
            mean_interarrival_s: gap,
            start_s: 0.0,
        }
    }

    #[test]
    fn single_packet_timeline() {
        let cfg = CdmaConfig {
            backoff_max_s: 0.0,
            ..CdmaConfig::default()
        };
        let traffic = Traffic::Scheduled(vec![Arrival {
            time_s: 1.0,
            src: 0,
            dst: 1,
        }]);
        let r = run_cdma_mac(&pair(), &traffic, &cfg, 3).unwrap();
        assert_eq!(r.metrics.delivered_packets, 1);
        // EH then DATA back to back, one propagation leg.
        let expected = 0.032 + 0.256 + 0.5;
        assert!((r.metrics.avg_end_to_end_delay_s - expected).abs() < 1e-9);
        assert_eq!(r.metrics.retransmissions, 0);
    }

    #[test]
    fn disjoint_pairs_share_time_with_distinct_codes() {
        // EHs reach node 1 0.3 s apart; the two DATA packets overlap there.
        let pos = vec![
            Position::new(0.0, 0.0, 0.0),
            Position::new(300.0, 0.0, 0.0),
            Position::new(750.0, 0.0, 0.0),
            Position::new(900.0, 0.0, 0.0),
        ];
        let topo = Topology::new(pos, 1500.0).unwrap();
        let cfg = CdmaConfig {
            backoff_max_s: 0.0,
            ..CdmaConfig::default()
        };
        let traffic = Traffic::Scheduled(vec![
            Arrival {
                time_s: 0.0,
                src: 0,
                dst: 1,
            },
            Arrival {
                time_s: 0.0,
                src: 2,
                dst: 3,
            },
        ]);
        let r = run_cdma_mac(&topo, &traffic, &cfg, 1).unwrap();
        assert_eq!(r.metrics.delivered_packets, 2);
        assert_eq!(r.metrics.collisions, 0);
        assert_eq!(r.metrics.retransmissions, 0);
    }

    #[test]
    fn simultaneous_eh_collide_at_shared_receiver() {
        let topo = Topology::line(3, 600.0, 1500.0).unwrap();
        let cfg = CdmaConfig {
            backoff_max_s: 0.0,
            retry_limit: Some(0),
            ..CdmaConfig::default()
        };
        let traffic = Traffic::Scheduled(vec![
            Arrival {
                time_s: 0.0,
                src: 0,
                dst: 1,
            },
            Arrival {
                time_s: 0.0,
                src: 2,
                dst: 1,
            },
        ]);
        let r = run_cdma_mac(&topo, &traffic, &cfg, 1).unwrap();
        assert_eq!(r.metrics.delivered_packets, 0);
        assert_eq!(r.metrics.collisions, 2);
        assert_eq!(r.metrics.lost_packets, 2);
    }

    #[test]
    fn lost_acks_exhaust_retries() {
        let medium = MediumConfig {
            ack_loss: 1.0,
            ..MediumConfig::default()
        };
        let cfg = CdmaConfig {
            medium,
            retry_limit: Some(4),
            ..CdmaConfig::default()
        };
        let traffic = Traffic::Scheduled(vec![Arrival {
            time_s: 0.0,
            src: 0,
            dst: 1,
        }]);
        let r = run_cdma_mac(&pair(), &traffic, &cfg, 8).unwrap();
        assert_eq!(r.metrics.delivered_packets, 1);
        assert_eq!(r.metrics.retransmissions, 4);
        assert_eq!(r.metrics.data_transmissions, 5);
        assert_eq!(r.metrics.lost_packets, 0);
    }

    #[test]
    fn geometric_retransmissions() {
        let medium = MediumConfig {
            data_loss: 0.5,
            horizon_s: 1e7,
            ..MediumConfig::default()
        };
        let cfg = CdmaConfig {
            medium,
            retry_limit: None,
            backoff_max_s: 0.5,
            ..CdmaConfig::default()
        };
        let n = 2000;
        let r = run_cdma_mac(&pair(), &stream(n, 5.0), &cfg, 21).unwrap();
        assert_eq!(r.metrics.delivered_packets, n);
        let mean = r.metrics.data_transmissions as f64 / n as f64;
        // Geometric with p = 1/2: variance (1-p)/p^2 = 2.
        let sigma = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn code_assignment() {
        let cfg = CdmaConfig {
            codes: Some(vec![gold7(1), gold7(2), gold7(1)]),
            ..CdmaConfig::default()
        };
        assert_eq!(
            cfg.assign_codes(3),
            Err(MacError::DuplicateSpreadingCode(0, 2))
        );
        let topo = Topology::line(3, 500.0, 1500.0).unwrap();
        let err = run_cdma_mac(&topo, &stream(1, 1.0), &cfg, 0).unwrap_err();
        assert_eq!(err, MacError::DuplicateSpreadingCode(0, 2));
        let common = CdmaConfig {
            codes: Some(vec![gold7(0), gold7(2)]),
            ..CdmaConfig::default()
        };
        assert!(common.assign_codes(2).is_err());
        assert_eq!(CdmaConfig::default().assign_codes(4).unwrap().len(), 4);
    }

    #[test]
    fn conservation_under_load() {
        let topo = Topology::random(6, 1000.0, 1500.0, 4).unwrap();
        let flows = (0..6)
            .map(|i| Flow {
                src: i,
                dst: (i + 1) % 6,
            })
            .collect();
        let traffic = Traffic::Poisson {
            flows,
            packets_per_flow: 30,
            mean_interarrival_s: 3.0,
            start_s: 0.0,
        };
        let medium = MediumConfig {
            horizon_s: 80.0,
            ..MediumConfig::default()
        };
        let r = run_cdma_mac(
            &topo,
            &traffic,
            &CdmaConfig {
                medium,
                ..CdmaConfig::default()
            },
            2,
        )
        .unwrap();
        let m = r.metrics;
        assert_eq!(
            m.delivered_packets + m.lost_packets + m.in_flight_packets,
            m.offered_packets
        );
        assert!(m.in_flight_packets > 0);
        for e in &r.energy {
            assert_eq!(e.total_ns(), secs_to_ns(m.sim_time_s));
        }
    }
}
