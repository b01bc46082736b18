//! Monte-Carlo link sweeps, the SNR map and the code table.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::link::{Codec, FrameStats, Link};
use super::{fmt_f, HarnessError, Table};
use crate::channel::snr_map;
use crate::fec::{bch_generator, Code};
use crate::interleave::InterleaverSpec;
use crate::phy::Modulation;
use crate::seed::trial_seed;

/// Wilson score interval at 95 % for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if k as f64 == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub snr_db: f64,
    pub modulation: Modulation,
    pub code: String,
    pub interleaver: String,
    pub ber: f64,
    pub bits_simulated: u64,
    pub bit_errors: u64,
    pub trials: u32,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerRow {
    pub const HEADER: [&'static str; 8] = [
        "snr_db",
        "modulation",
        "code",
        "interleaver",
        "ber",
        "bits_simulated",
        "ci_low",
        "ci_high",
    ];
}

pub fn ber_table(rows: &[BerRow]) -> Table {
    Table::new(
        &BerRow::HEADER,
        rows.iter()
            .map(|r| {
                vec![
                    fmt_f(r.snr_db),
                    r.modulation.to_string(),
                    r.code.clone(),
                    r.interleaver.clone(),
                    format!("{:.6e}", r.ber),
                    r.bits_simulated.to_string(),
                    format!("{:.6e}", r.ci_low),
                    format!("{:.6e}", r.ci_high),
                ]
            })
            .collect(),
    )
}

fn link_for(
    cfg: &ExperimentConfig,
    code: &str,
    interleaver: InterleaverSpec,
    modulation: Modulation,
    burst_rate_hz: Option<f64>,
) -> Result<Link, HarnessError> {
    let phy = cfg.phy.phy_config(modulation, 1);
    let mut channel = cfg.channel.channel_config(phy.sample_rate());
    channel.noise.burst = burst_rate_hz.and_then(|r| cfg.interleaver_compare.burst(r));
    Link::new(
        Codec::from_name(code)?,
        interleaver,
        modulation,
        cfg.pn(),
        phy,
        channel,
    )
}

/// Full-pipeline BER per (SNR, modulation, code, interleaver).
///
/// Points run in parallel; within a point, trials run in order until
/// `min_errors` bit errors (after at least `min_trials` trials) or the
/// trial cap. Trial `t` of point `p` always uses `trial_seed(seed, p, t)`,
/// and the point index ignores the SNR so every code and interleaver sees
/// the same noise seeds at a given SNR.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRow>, HarnessError> {
    let sweep = &cfg.ber_sweep;
    let mut jobs = Vec::new();
    for (si, &snr) in sweep.snr_db.iter().enumerate() {
        for m in cfg.modulations()? {
            for code in cfg.code_names() {
                for (iname, ispec) in cfg.interleavers()? {
                    jobs.push((si as u64, snr, m, code.clone(), iname, ispec));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(si, snr, m, code, iname, ispec)| {
            let link = link_for(cfg, &code, ispec, m, None)?;
            let cw = link.frame_codewords(sweep.info_bits_per_trial);
            let mut total = FrameStats::default();
            let mut trials = 0;
            while trials < cfg.trials
                && (trials < sweep.min_trials || total.bit_errors < sweep.min_errors)
            {
                total += link.run_frame(cw, snr, trial_seed(cfg.seed, si, u64::from(trials)))?;
                trials += 1;
            }
            let (ci_low, ci_high) = wilson_interval(total.bit_errors, total.info_bits);
            Ok(BerRow {
                snr_db: snr,
                modulation: m,
                code: link.codec.name(),
                interleaver: iname,
                ber: total.bit_errors as f64 / total.info_bits as f64,
                bits_simulated: total.info_bits,
                bit_errors: total.bit_errors,
                trials,
                ci_low,
                ci_high,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterleaverRow {
    pub interleaver: String,
    pub burst_rate: f64,
    pub ber: f64,
    pub codeword_failure_rate: f64,
    pub bits_simulated: u64,
    pub codewords: u64,
}

impl InterleaverRow {
    pub const HEADER: [&'static str; 4] =
        ["interleaver", "burst_rate", "ber", "codeword_failure_rate"];
}

pub fn interleaver_table(rows: &[InterleaverRow]) -> Table {
    Table::new(
        &InterleaverRow::HEADER,
        rows.iter()
            .map(|r| {
                vec![
                    r.interleaver.clone(),
                    fmt_f(r.burst_rate),
                    format!("{:.6e}", r.ber),
                    format!("{:.6e}", r.codeword_failure_rate),
                ]
            })
            .collect(),
    )
}

/// Coded BER and codeword failure rate per (burst rate, interleaver) under
/// burst noise. All variants at one burst rate share trial seeds, so they
/// see the same data and the same burst arrivals. Rows are grouped by burst
/// rate in config order.
pub fn run_interleaver_compare(
    cfg: &ExperimentConfig,
) -> Result<Vec<InterleaverRow>, HarnessError> {
    let ic = &cfg.interleaver_compare;
    let code = cfg
        .code_names()
        .first()
        .cloned()
        .ok_or_else(|| HarnessError::Invalid("no code configured".into()))?;
    let modulation = cfg.modulations()?[0];
    let mut jobs = Vec::new();
    for (ri, &rate) in ic.burst_rates_hz.iter().enumerate() {
        for (name, spec) in cfg.interleavers()? {
            jobs.push((ri as u64, rate, name, spec));
        }
    }
    jobs.into_par_iter()
        .map(|(ri, rate, name, spec)| {
            let link = link_for(cfg, &code, spec, modulation, Some(rate))?;
            let per_cw = link.codec.k() * link.codec.bits_per_symbol() as usize;
            let cw = link.frame_codewords(ic.codewords_per_frame * per_cw);
            let mut total = FrameStats::default();
            for t in 0..cfg.trials {
                total += link.run_frame(cw, ic.ebn0_db, trial_seed(cfg.seed, ri, u64::from(t)))?;
            }
            Ok(InterleaverRow {
                interleaver: name,
                burst_rate: rate,
                ber: total.bit_errors as f64 / total.info_bits as f64,
                codeword_failure_rate: total.failed_codewords as f64 / total.codewords as f64,
                bits_simulated: total.info_bits,
                codewords: total.codewords,
            })
        })
        .collect()
}

/// Narrowband SNR over the configured distance x frequency grid.
pub fn run_snr_map(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let s = &cfg.snr_map;
    let channel = cfg
        .channel
        .channel_config(cfg.phy.chip_rate * cfg.phy.samples_per_chip as f64);
    let distances: Vec<f64> = s.distances_km.iter().map(|d| d * 1000.0).collect();
    let points = snr_map(
        &s.frequencies_khz,
        &distances,
        s.source_level_db,
        &channel,
        &cfg.channel.spectrum(),
    )?;
    Ok(Table::new(
        &["distance_m", "frequency_khz", "snr_db"],
        points
            .iter()
            .map(|p| {
                vec![
                    fmt_f(p.distance_m),
                    fmt_f(p.frequency_khz),
                    format!("{:.6}", p.snr_db),
                ]
            })
            .collect(),
    ))
}

/// `(k, t, generator in octal)` for the BCH(15, k) family.
pub fn codec_table() -> Result<Table, HarnessError> {
    let rows = [1, 2, 3, 7]
        .iter()
        .map(|&t| {
            let g = bch_generator(t)?;
            let k = Code::bch15(t)?.k();
            Ok(vec![k.to_string(), t.to_string(), format!("{g:o}")])
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Table::new(&["k", "t", "g_octal"], rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentKind;
    use crate::phy::bpsk_awgn_ber;

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(10, 1000);
        assert!(lo < 0.01 && 0.01 < hi);
        assert!(lo > 0.004 && hi < 0.02);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.005);
        assert_eq!(wilson_interval(5, 5).1, 1.0);
    }

    #[test]
    fn wilson_bounds_solve_score_equation() {
        // Each bound b satisfies (p - b)^2 = z^2 b (1 - b) / n.
        let z2 = 1.959_963_984_540_054f64.powi(2);
        for (k, n) in [(50u64, 200u64), (3, 1000), (999, 1000), (1, 7)] {
            let p = k as f64 / n as f64;
            let (lo, hi) = wilson_interval(k, n);
            for b in [lo, hi] {
                let lhs = (p - b).powi(2);
                let rhs = z2 * b * (1.0 - b) / n as f64;
                assert!((lhs - rhs).abs() < 1e-12, "k={k} n={n} b={b}");
            }
            assert!(lo < p && p < hi);
        }
    }

    #[test]
    fn codec_rows() {
        let t = codec_table().unwrap();
        let rows: Vec<String> = t.rows.iter().map(|r| r.join(",")).collect();
        assert_eq!(rows, ["11,1,23", "7,2,721", "5,3,2467", "1,7,77777"]);
    }

    fn small_sweep(snr: Vec<f64>, codes: &[&str]) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BerSweep);
        cfg.ber_sweep.snr_db = snr;
        cfg.ber_sweep.info_bits_per_trial = 2000;
        cfg.phy.modulations = Some(vec!["bpsk".into()]);
        cfg.code.names = Some(codes.iter().map(|s| s.to_string()).collect());
        cfg.trials = 10;
        cfg.resolve().unwrap()
    }

    #[test]
    fn noiseless_sweep_has_zero_ber() {
        let rows = run_ber_sweep(&small_sweep(vec![f64::INFINITY], &["none", "rs-15-11"])).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.ber, 0.0);
            assert_eq!(r.trials, 10);
            assert_eq!(r.ci_low, 0.0);
        }
    }

    #[test]
    fn uncoded_sweep_tracks_q_function() {
        let rows = run_ber_sweep(&small_sweep(vec![0.0, 3.0, 6.0], &["none"])).unwrap();
        for r in rows {
            let p = bpsk_awgn_ber(r.snr_db);
            let n = r.bits_simulated as f64;
            assert!(
                (r.ber - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt(),
                "{r:?}"
            );
            assert!(r.ci_low <= p && p <= r.ci_high || (r.ber - p).abs() < 3.0 * (p / n).sqrt());
        }
    }

    #[test]
    fn stops_at_error_target() {
        let rows = run_ber_sweep(&small_sweep(vec![0.0], &["none"])).unwrap();
        // 2000 bits at BER 0.079 gives well over 100 errors in one trial.
        assert_eq!(rows[0].trials, 1);
        assert!(rows[0].bit_errors >= 100);
    }

    #[test]
    fn coded_beats_uncoded_above_crossover() {
        let rows = run_ber_sweep(&small_sweep(vec![6.0, 7.0, 8.0], &["none", "bch-15-7"])).unwrap();
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].code, "none");
            assert!(pair[1].ber <= pair[0].ber, "{pair:?}");
        }
    }

    #[test]
    fn adding_trials_keeps_earlier_trials() {
        let mut cfg = small_sweep(vec![2.0], &["none"]);
        cfg.ber_sweep.min_errors = u64::MAX;
        cfg.trials = 2;
        let a = run_ber_sweep(&cfg).unwrap();
        cfg.trials = 3;
        let b = run_ber_sweep(&cfg).unwrap();
        cfg.trials = 1;
        let one = run_ber_sweep(&cfg).unwrap();
        assert!(b[0].bit_errors >= a[0].bit_errors);
        assert!(a[0].bit_errors >= one[0].bit_errors);
        assert_eq!(b[0].bits_simulated, 3 * one[0].bits_simulated);
    }

    #[test]
    fn zero_burst_rate_ties() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::InterleaverCompare);
        cfg.interleaver_compare.burst_rates_hz = vec![0.0];
        cfg.trials = 2;
        let rows = run_interleaver_compare(&cfg).unwrap();
        assert_eq!(rows.len(), 5);
        let base = &rows[0];
        assert_eq!(base.interleaver, "none");
        for r in &rows {
            let (lo, hi) = wilson_interval(
                (base.ber * base.bits_simulated as f64).round() as u64,
                base.bits_simulated,
            );
            assert!(r.ber >= lo && r.ber <= hi, "{r:?}");
        }
    }

    #[test]
    fn snr_map_grid_shape() {
        let cfg = ExperimentConfig::new(ExperimentKind::SnrMap);
        let t = run_snr_map(&cfg).unwrap();
        assert_eq!(
            t.rows.len(),
            cfg.snr_map.frequencies_khz.len() * cfg.snr_map.distances_km.len()
        );
    }
}
