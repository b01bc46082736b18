//! MAC protocol comparison over random fully connected topologies.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::{fmt_f, HarnessError, Table};
use crate::macsim::{
    run_cdma_mac, run_fdma, run_smac, CdmaConfig, FdmaConfig, Flow, MediumConfig, SimMetrics,
    SmacConfig, Topology, Traffic,
};
use crate::seed::{child, trial_seed};

pub const PROTOCOLS: [&str; 4] = ["fdma", "tdma", "tdma-always-on", "cdma"];

#[derive(Debug, Clone, PartialEq)]
pub struct MacRow {
    pub protocol: String,
    pub n_nodes: usize,
    pub offered_load: f64,
    pub delivered_norm: f64,
    /// Mean over runs that delivered anything; NaN if none did.
    pub delay_avg: f64,
    pub energy_norm: f64,
}

impl MacRow {
    pub const HEADER: [&'static str; 6] = [
        "protocol",
        "n_nodes",
        "offered_load",
        "delivered_norm",
        "delay_avg",
        "energy_norm",
    ];
}

pub fn mac_table(rows: &[MacRow]) -> Table {
    Table::new(
        &MacRow::HEADER,
        rows.iter()
            .map(|r| {
                vec![
                    r.protocol.clone(),
                    r.n_nodes.to_string(),
                    fmt_f(r.offered_load),
                    format!("{:.6}", r.delivered_norm),
                    format!("{:.6}", r.delay_avg),
                    format!("{:.6e}", r.energy_norm),
                ]
            })
            .collect(),
    )
}

/// Flows `i -> i+1 mod n`; two nodes form the single flow `0 -> 1`.
pub fn ring_flows(n: usize) -> Vec<Flow> {
    let count = if n == 2 { 1 } else { n };
    (0..count)
        .map(|i| Flow {
            src: i,
            dst: (i + 1) % n,
        })
        .collect()
}

/// Per-flow mean interarrival giving aggregate `load` (offered DATA bits
/// per second over the bitrate).
fn interarrival_s(cfg: &ExperimentConfig, flows: usize, load: f64) -> f64 {
    flows as f64 * f64::from(cfg.mac.data_bits) / (load * cfg.mac.bitrate_bps)
}

pub fn ring_traffic(cfg: &ExperimentConfig, n: usize, load: f64) -> Traffic {
    let flows = ring_flows(n);
    Traffic::Poisson {
        mean_interarrival_s: interarrival_s(cfg, flows.len(), load),
        flows,
        packets_per_flow: cfg.mac.packets_per_flow,
        start_s: cfg.mac.traffic_start_s,
    }
}

fn medium(cfg: &ExperimentConfig, n: usize, load: f64) -> MediumConfig {
    let m = &cfg.mac;
    let gap = interarrival_s(cfg, ring_flows(n).len(), load);
    MediumConfig {
        bitrate_bps: m.bitrate_bps,
        data_bits: m.data_bits,
        control_bits: m.control_bits,
        data_loss: m.data_loss,
        horizon_s: m.traffic_start_s + 2.0 * m.packets_per_flow as f64 * gap + m.drain_s,
        ..MediumConfig::default()
    }
}

/// One protocol run on the topology and traffic of `seed`.
pub fn run_protocol(
    cfg: &ExperimentConfig,
    protocol: &str,
    n: usize,
    load: f64,
    seed: u64,
) -> Result<SimMetrics, HarnessError> {
    let m = &cfg.mac;
    let topo = Topology::random(n, m.side_m, m.range_m, child(seed, 7))?;
    let traffic = ring_traffic(cfg, n, load);
    let medium = medium(cfg, n, load);
    let smac = |always_on| SmacConfig {
        medium,
        cycle_s: m.tdma_cycle_s,
        always_on,
        ..SmacConfig::default()
    };
    let result = match protocol {
        "fdma" => run_fdma(&topo, &traffic, &FdmaConfig::new(medium, n)?, seed)?,
        "tdma" => run_smac(&topo, &traffic, &smac(false), seed)?,
        "tdma-always-on" => run_smac(&topo, &traffic, &smac(true), seed)?,
        "cdma" => run_cdma_mac(
            &topo,
            &traffic,
            &CdmaConfig {
                medium,
                ..CdmaConfig::default()
            },
            seed,
        )?,
        other => return Err(HarnessError::Invalid(format!("unknown protocol {other:?}"))),
    };
    Ok(result.metrics)
}

/// One row per (protocol, node count, load), averaged over `trials` runs.
/// Every protocol sees the same topologies and arrivals for a given
/// (node count, load, trial).
pub fn run_mac_compare(cfg: &ExperimentConfig) -> Result<Vec<MacRow>, HarnessError> {
    let m = &cfg.mac;
    let mut jobs = Vec::new();
    for protocol in &m.protocols {
        let mut point = 0u64;
        for &n in &m.node_counts {
            for &load in &m.offered_loads {
                jobs.push((protocol.clone(), n, load, point));
                point += 1;
            }
        }
    }
    jobs.into_par_iter()
        .map(|(protocol, n, load, point)| {
            let runs = (0..cfg.trials)
                .map(|t| {
                    run_protocol(
                        cfg,
                        &protocol,
                        n,
                        load,
                        trial_seed(cfg.seed, point, u64::from(t)),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let k = runs.len() as f64;
            let delays: Vec<f64> = runs
                .iter()
                .filter(|r| r.delivered_packets > 0)
                .map(|r| r.avg_end_to_end_delay_s)
                .collect();
            Ok(MacRow {
                protocol,
                n_nodes: n,
                offered_load: load,
                delivered_norm: runs.iter().map(|r| r.normalized_delivered).sum::<f64>() / k,
                delay_avg: if delays.is_empty() {
                    f64::NAN
                } else {
                    delays.iter().sum::<f64>() / delays.len() as f64
                },
                energy_norm: runs.iter().map(|r| r.normalized_energy).sum::<f64>() / k,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentKind;

    fn cfg(
        protocols: &[&str],
        nodes: Vec<usize>,
        loads: Vec<f64>,
        trials: u32,
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ExperimentKind::MacCompare);
        c.mac.protocols = protocols.iter().map(|s| s.to_string()).collect();
        c.mac.node_counts = nodes;
        c.mac.offered_loads = loads;
        c.trials = trials;
        c.resolve().unwrap()
    }

    #[test]
    fn single_pair_light_load_delivers_all() {
        let c = cfg(&PROTOCOLS, vec![2], vec![0.01], 2);
        let rows = run_mac_compare(&c).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.delivered_norm, 1.0, "{r:?}");
            assert!(r.delay_avg > 0.0);
        }
    }

    #[test]
    fn cdma_outdelivers_tdma_under_load() {
        let c = cfg(&["tdma", "cdma"], vec![8], vec![0.3], 3);
        let rows = run_mac_compare(&c).unwrap();
        assert!(rows[1].delivered_norm >= rows[0].delivered_norm, "{rows:?}");
    }

    #[test]
    fn sleeping_saves_energy() {
        let c = cfg(&["tdma", "tdma-always-on"], vec![4], vec![0.02], 2);
        let rows = run_mac_compare(&c).unwrap();
        assert!(rows[0].energy_norm < rows[1].energy_norm, "{rows:?}");
    }

    #[test]
    fn row_order_follows_config() {
        let c = cfg(&["cdma", "fdma"], vec![3, 2], vec![0.05, 0.01], 1);
        let rows = run_mac_compare(&c).unwrap();
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.protocol.as_str(), r.n_nodes, r.offered_load))
            .collect();
        assert_eq!(
            keys,
            [
                ("cdma", 3, 0.05),
                ("cdma", 3, 0.01),
                ("cdma", 2, 0.05),
                ("cdma", 2, 0.01),
                ("fdma", 3, 0.05),
                ("fdma", 3, 0.01),
                ("fdma", 2, 0.05),
                ("fdma", 2, 0.01)
            ]
        );
    }
}
