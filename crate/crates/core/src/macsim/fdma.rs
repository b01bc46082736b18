//! Static FDMA: node `i` owns band `i mod bands` for the whole run and
//! sends queued packets back to back at the band's share of the bitrate.
//! There is no acknowledgement. Nodes sharing a band contend ALOHA-style;
//! each band may suffer narrowband outage that drops a DATA reception.

use std::collections::VecDeque;

use super::engine::{Engine, Frame, Protocol};
use super::{seed_streams, MacError, MediumConfig, PacketKind, SimResult, Topology, Traffic};

#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    bands: usize,
    outage: Vec<f64>,
}

impl BandPlan {
    /// `outage[b]` is the probability that a DATA packet on band `b` fades out.
    pub fn new(outage: Vec<f64>) -> Result<Self, MacError> {
        if outage.is_empty() {
            return Err(MacError::EmptyBandPlan);
        }
        if let Some(p) = outage.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MacError::InvalidConfig(format!("outage probability {p}")));
        }
        Ok(BandPlan {
            bands: outage.len(),
            outage,
        })
    }

    pub fn uniform(bands: usize, outage: f64) -> Result<Self, MacError> {
        Self::new(vec![outage; bands])
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn outage(&self) -> &[f64] {
        &self.outage
    }

    pub fn band_of(&self, node: usize) -> usize {
        node % self.bands
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdmaConfig {
    pub medium: MediumConfig,
    pub band_plan: BandPlan,
}

impl FdmaConfig {
    pub fn new(medium: MediumConfig, bands: usize) -> Result<Self, MacError> {
        Ok(FdmaConfig {
            medium,
            band_plan: BandPlan::uniform(bands, 0.0)?,
        })
    }
}

struct Fdma<'c> {
    cfg: &'c FdmaConfig,
    queues: Vec<VecDeque<usize>>,
}

impl Fdma<'_> {
    fn send_next(&mut self, eng: &mut Engine<'_, ()>, node: usize) {
        if eng.is_transmitting(node) {
            return;
        }
        let Some(&pkt) = self.queues[node].front() else {
            return;
        };
        let bits = self.cfg.medium.data_bits;
        let frame = Frame {
            kind: PacketKind::Data,
            src: node,
            dst: Some(eng.packets[pkt].dst),
            bits,
            airtime: eng.airtime(bits) * self.cfg.band_plan.bands as u64,
            duration: None,
            channel: self.cfg.band_plan.band_of(node) as u32,
            packet: Some(pkt),
            payload: [0; 3],
        };
        if eng.transmit(node, frame).is_some() {
            self.queues[node].pop_front();
        }
    }
}

impl Protocol<()> for Fdma<'_> {
    fn arrival(&mut self, eng: &mut Engine<'_, ()>, node: usize, packet: usize) {
        self.queues[node].push_back(packet);
        self.send_next(eng, node);
    }

    fn received(&mut self, eng: &mut Engine<'_, ()>, node: usize, frame: &Frame) {
        if frame.dst == Some(node) {
            if let Some(p) = frame.packet {
                eng.deliver(p);
            }
        }
    }

    fn tx_done(&mut self, eng: &mut Engine<'_, ()>, node: usize, frame: &Frame) {
        if let Some(p) = frame.packet {
            eng.finish(p);
        }
        self.send_next(eng, node);
    }

    fn timer(&mut self, _eng: &mut Engine<'_, ()>, _node: usize, _timer: ()) {}
}

/// Runs static FDMA over `topo`.
pub fn run_fdma(
    topo: &Topology,
    traffic: &Traffic,
    cfg: &FdmaConfig,
    seed: u64,
) -> Result<SimResult, MacError> {
    cfg.medium.validate()?;
    let (traffic_seed, sim_seed) = seed_streams(seed);
    let arrivals = traffic.arrivals(topo, traffic_seed)?;
    let mut eng = Engine::new(topo, cfg.medium, &arrivals, sim_seed);
    eng.channel_loss = cfg.band_plan.outage.clone();
    let mut proto = Fdma {
        cfg,
        queues: vec![VecDeque::new(); topo.len()],
    };
    Ok(eng.run(&mut proto))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::{Arrival, Flow};

    fn sink3() -> Topology {
        Topology::line(3, 600.0, 1500.0).unwrap()
    }

    fn two_streams(n: usize) -> Traffic {
        Traffic::Poisson {
            flows: vec![Flow { src: 0, dst: 2 }, Flow { src: 1, dst: 2 }],
            packets_per_flow: n,
            mean_interarrival_s: 2.0,
            start_s: 0.0,
        }
    }

    #[test]
    fn two_bands_no_collisions() {
        let cfg = FdmaConfig::new(MediumConfig::default(), 2).unwrap();
        let r = run_fdma(&sink3(), &two_streams(40), &cfg, 5).unwrap();
        assert_eq!(r.metrics.offered_packets, 80);
        assert_eq!(r.metrics.delivered_packets, 80);
        assert_eq!(r.metrics.collisions, 0);
    }

    #[test]
    fn shared_band_collides() {
        let cfg = FdmaConfig::new(MediumConfig::default(), 1).unwrap();
        let r = run_fdma(&sink3(), &two_streams(200), &cfg, 5).unwrap();
        assert!(r.metrics.collisions > 0);
        assert!(r.metrics.delivered_packets < 400);
        let m = r.metrics;
        assert_eq!(
            m.delivered_packets + m.lost_packets + m.in_flight_packets,
            m.offered_packets
        );
    }

    #[test]
    fn dead_band_delivers_nothing() {
        let cfg = FdmaConfig {
            medium: MediumConfig::default(),
            band_plan: BandPlan::new(vec![1.0, 0.0]).unwrap(),
        };
        let topo = Topology::line(4, 500.0, 1500.0).unwrap();
        let traffic = Traffic::Scheduled(
            (0..10)
                .flat_map(|i| {
                    let t = i as f64 * 3.0;
                    [
                        Arrival {
                            time_s: t,
                            src: 0,
                            dst: 2,
                        },
                        Arrival {
                            time_s: t,
                            src: 1,
                            dst: 3,
                        },
                    ]
                })
                .collect(),
        );
        let r = run_fdma(&topo, &traffic, &cfg, 1).unwrap();
        assert_eq!(r.metrics.delivered_packets, 10);
        assert_eq!(r.metrics.lost_packets, 10);
    }

    #[test]
    fn band_split_slows_airtime() {
        let topo = Topology::line(2, 100.0, 1500.0).unwrap();
        let traffic = Traffic::Scheduled(vec![Arrival {
            time_s: 0.0,
            src: 0,
            dst: 1,
        }]);
        for bands in [1usize, 4] {
            let cfg = FdmaConfig::new(MediumConfig::default(), bands).unwrap();
            let r = run_fdma(&topo, &traffic, &cfg, 0).unwrap();
            let expected = 0.256 * bands as f64 + 100.0 / 1500.0;
            assert!((r.metrics.avg_end_to_end_delay_s - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_plan() {
        assert_eq!(BandPlan::new(vec![]), Err(MacError::EmptyBandPlan));
        assert!(BandPlan::new(vec![1.5]).is_err());
    }
}
