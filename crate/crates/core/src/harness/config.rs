//! TOML experiment configuration.
//!
//! Every section is optional. Lists left out of the file are filled with
//! per-experiment defaults by [`ExperimentConfig::resolve`]; the resolved
//! config is what gets hashed into the CSV header.
//!
//! ```toml
//! experiment = "ber_sweep"
//! seed = 7
//! trials = 20
//!
//! [phy]
//! modulations = ["bpsk", "qpsk"]
//! pn = "mseq:4"
//!
//! [code]
//! names = ["none", "bch-15-7"]
//!
//! [ber_sweep]
//! snr_db = [0.0, 2.0, 4.0, 6.0]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::channel::{BurstNoise, ChannelConfig, GainDrift, NoiseConfig, NoiseSpectrum, PathSpec};
use crate::interleave::InterleaverSpec;
use crate::phy::{
    default_msequence, gold_code, preferred_pair, walsh, Modulation, PhyConfig, PnSequence,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BerSweep,
    InterleaverCompare,
    MacCompare,
    SnrMap,
    CodecTable,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::InterleaverCompare => "interleaver_compare",
            ExperimentKind::MacCompare => "mac_compare",
            ExperimentKind::SnrMap => "snr_map",
            ExperimentKind::CodecTable => "codec_table",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub length_m: f64,
    pub reflection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub depth: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub reference_distance_m: f64,
    pub spreading_exponent: f64,
    pub sound_speed: f64,
    pub paths: Vec<PathSection>,
    pub doppler_factor: f64,
    pub drift: Option<DriftSection>,
    pub shipping: f64,
    pub wind_mps: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let base = ChannelConfig::default();
        ChannelSection {
            reference_distance_m: base.reference_distance_m,
            spreading_exponent: base.spreading_exponent,
            sound_speed: base.sound_speed,
            paths: base
                .paths
                .iter()
                .map(|p| PathSection {
                    length_m: p.length_m,
                    reflection: p.reflection,
                })
                .collect(),
            doppler_factor: 0.0,
            drift: None,
            shipping: 0.5,
            wind_mps: 0.0,
        }
    }
}

impl ChannelSection {
    /// Noise-free channel at `sample_rate`; the link sets the noise.
    pub fn channel_config(&self, sample_rate: f64) -> ChannelConfig {
        ChannelConfig {
            reference_distance_m: self.reference_distance_m,
            spreading_exponent: self.spreading_exponent,
            sound_speed: self.sound_speed,
            paths: self
                .paths
                .iter()
                .map(|p| PathSpec {
                    length_m: p.length_m,
                    reflection: p.reflection,
                })
                .collect(),
            noise: NoiseConfig::silent(),
            doppler_factor: self.doppler_factor,
            sample_rate,
            drift: self.drift.as_ref().map(|d| GainDrift {
                depth: d.depth,
                period_s: d.period_s,
            }),
        }
    }

    pub fn spectrum(&self) -> NoiseSpectrum {
        NoiseSpectrum::Empirical {
            shipping: self.shipping,
            wind_mps: self.wind_mps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhySection {
    pub modulations: Option<Vec<String>>,
    /// `mseq:<m>`, `gold:<m>:<shift>` or `walsh:<order>:<row>`.
    pub pn: String,
    pub chip_rate: f64,
    pub samples_per_chip: usize,
    pub carrier_khz: f64,
}

impl Default for PhySection {
    fn default() -> Self {
        let base = PhyConfig::default();
        PhySection {
            modulations: None,
            pn: "mseq:4".into(),
            chip_rate: base.chip_rate,
            samples_per_chip: base.samples_per_chip,
            carrier_khz: base.carrier_khz,
        }
    }
}

impl PhySection {
    pub fn phy_config(&self, modulation: Modulation, spreading_factor: usize) -> PhyConfig {
        PhyConfig {
            chip_rate: self.chip_rate,
            samples_per_chip: self.samples_per_chip,
            carrier_khz: self.carrier_khz,
            modulation,
            spreading_factor,
        }
    }
}

/// Parses a PN code name such as `mseq:5`, `gold:7:3` or `walsh:16:2`.
pub fn parse_pn(name: &str) -> Option<PnSequence> {
    let parts: Vec<&str> = name.trim().split(':').collect();
    let num = |i: usize| parts.get(i).and_then(|s| s.parse::<usize>().ok());
    match (parts.first().copied(), parts.len()) {
        (Some("mseq"), 2) => default_msequence(num(1)? as u32, 1).ok(),
        (Some("gold"), 3) => {
            let m = num(1)? as u32;
            gold_code(m, preferred_pair(m)?, num(2)?).ok()
        }
        (Some("walsh"), 3) => walsh(num(1)?, num(2)?).ok(),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSection {
    /// `none`, `rs-<n>-<k>` or `bch-15-<k>`.
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterleaverSection {
    /// `none`, `block:RxC`, `matrix:RxC` or `conv:B,M`.
    pub variants: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerSweepSection {
    /// Eb/N0 per information bit; `inf` disables noise.
    pub snr_db: Vec<f64>,
    pub info_bits_per_trial: usize,
    pub min_errors: u64,
    pub min_trials: u32,
}

impl Default for BerSweepSection {
    fn default() -> Self {
        BerSweepSection {
            snr_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            info_bits_per_trial: 4000,
            min_errors: 100,
            min_trials: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterleaverCompareSection {
    /// Ambient Eb/N0 per information bit.
    pub ebn0_db: f64,
    pub codewords_per_frame: usize,
    pub burst_rates_hz: Vec<f64>,
    pub burst_duration_s: f64,
    pub burst_boost_db: f64,
}

impl Default for InterleaverCompareSection {
    fn default() -> Self {
        // 0.24 s is 16 RS(15,11) symbols at the default chip rate.
        InterleaverCompareSection {
            ebn0_db: 10.0,
            codewords_per_frame: 48,
            burst_rates_hz: vec![0.0, 0.02, 0.05, 0.1],
            burst_duration_s: 0.24,
            burst_boost_db: 25.0,
        }
    }
}

impl InterleaverCompareSection {
    pub fn burst(&self, rate_hz: f64) -> Option<BurstNoise> {
        (rate_hz > 0.0).then_some(BurstNoise {
            rate_hz,
            duration_s: self.burst_duration_s,
            power_boost_db: self.burst_boost_db,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacSection {
    /// `fdma`, `tdma`, `tdma-always-on` or `cdma`.
    pub protocols: Vec<String>,
    pub node_counts: Vec<usize>,
    /// Aggregate offered DATA bits per second over the link bitrate.
    pub offered_loads: Vec<f64>,
    pub packets_per_flow: usize,
    pub side_m: f64,
    pub range_m: f64,
    pub bitrate_bps: f64,
    pub data_bits: u32,
    pub control_bits: u32,
    pub data_loss: f64,
    pub traffic_start_s: f64,
    /// Simulated time after the expected last arrival.
    pub drain_s: f64,
    pub tdma_cycle_s: f64,
}

impl Default for MacSection {
    fn default() -> Self {
        MacSection {
            protocols: vec![
                "fdma".into(),
                "tdma".into(),
                "tdma-always-on".into(),
                "cdma".into(),
            ],
            node_counts: vec![4, 8],
            offered_loads: vec![0.02, 0.1, 0.3],
            packets_per_flow: 10,
            side_m: 1000.0,
            range_m: 1500.0,
            bitrate_bps: 1000.0,
            data_bits: 256,
            control_bits: 32,
            data_loss: 0.0,
            traffic_start_s: 60.0,
            drain_s: 600.0,
            tdma_cycle_s: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrMapSection {
    pub frequencies_khz: Vec<f64>,
    pub distances_km: Vec<f64>,
    pub source_level_db: f64,
}

impl Default for SnrMapSection {
    fn default() -> Self {
        SnrMapSection {
            frequencies_khz: (1..=20).map(|i| f64::from(i) * 2.0).collect(),
            distances_km: (1..=20).map(|i| f64::from(i) * 5.0).collect(),
            source_level_db: 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Trial cap per sweep point.
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub phy: PhySection,
    #[serde(default)]
    pub code: CodeSection,
    #[serde(default)]
    pub interleaver: InterleaverSection,
    #[serde(default)]
    pub mac: MacSection,
    #[serde(default)]
    pub ber_sweep: BerSweepSection,
    #[serde(default)]
    pub interleaver_compare: InterleaverCompareSection,
    #[serde(default)]
    pub snr_map: SnrMapSection,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> u32 {
    20
}

fn config_err(location: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        location: location.into(),
        message: message.into(),
    }
}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ExperimentConfig {
    /// Default configuration for `kind`, already resolved.
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            seed: default_seed(),
            trials: default_trials(),
            channel: ChannelSection::default(),
            phy: PhySection::default(),
            code: CodeSection::default(),
            interleaver: InterleaverSection::default(),
            mac: MacSection::default(),
            ber_sweep: BerSweepSection::default(),
            interleaver_compare: InterleaverCompareSection::default(),
            snr_map: SnrMapSection::default(),
        }
        .resolve()
        .expect("default config is valid")
    }

    /// Parses TOML text; `origin` names the source in error locations.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let raw: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let loc = match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    format!("{origin}:{line}:{col}")
                }
                None => origin.to_string(),
            };
            config_err(loc, e.message().trim())
        })?;
        raw.resolve().map_err(|e| match e {
            HarnessError::Config { location, message } => {
                config_err(format!("{origin}: {location}"), message)
            }
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Fills omitted lists and checks every field.
    pub fn resolve(mut self) -> Result<Self, HarnessError> {
        use ExperimentKind::*;
        let kind = self.experiment;
        if self.phy.modulations.is_none() {
            self.phy.modulations = Some(match kind {
                BerSweep => vec!["bpsk".into(), "qpsk".into()],
                _ => vec!["bpsk".into()],
            });
        }
        if self.code.names.is_none() {
            self.code.names = Some(match kind {
                InterleaverCompare => vec!["rs-15-11".into()],
                _ => vec!["none".into(), "bch-15-7".into(), "rs-15-11".into()],
            });
        }
        if self.interleaver.variants.is_none() {
            self.interleaver.variants = Some(match kind {
                InterleaverCompare => [
                    "none",
                    "block:8x15",
                    "matrix:8x15",
                    "conv:16,1",
                    "matrix:24x15",
                ]
                .iter()
                .map(|s| s.to_string())
                .collect(),
                _ => vec!["none".into()],
            });
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials < 1 {
            return Err(config_err("trials", "must be at least 1"));
        }
        let phy = &self.phy;
        let pn = parse_pn(&phy.pn)
            .ok_or_else(|| config_err("phy.pn", format!("unknown PN code {:?}", phy.pn)))?;
        for (i, m) in self.modulations()?.into_iter().enumerate() {
            phy.phy_config(m, pn.len())
                .validate()
                .map_err(|e| config_err(format!("phy.modulations[{i}]"), e.to_string()))?;
        }
        for (i, name) in self.code_names().iter().enumerate() {
            super::link::Codec::from_name(name)
                .map_err(|e| config_err(format!("code.names[{i}]"), e.to_string()))?;
        }
        self.interleavers()?;
        let channel = self
            .channel
            .channel_config(phy.chip_rate * phy.samples_per_chip as f64);
        if channel.paths.is_empty() {
            return Err(config_err("channel.paths", "no propagation paths"));
        }
        channel
            .validate()
            .map_err(|e| config_err("channel", e.to_string()))?;

        let b = &self.ber_sweep;
        if b.snr_db.is_empty() {
            return Err(config_err("ber_sweep.snr_db", "no SNR points"));
        }
        if let Some(i) = b
            .snr_db
            .iter()
            .position(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return Err(config_err(
                format!("ber_sweep.snr_db[{i}]"),
                "SNR must be a number or inf",
            ));
        }
        if b.info_bits_per_trial == 0 {
            return Err(config_err(
                "ber_sweep.info_bits_per_trial",
                "must be positive",
            ));
        }
        if b.min_trials > self.trials {
            return Err(config_err("ber_sweep.min_trials", "exceeds trials"));
        }

        let ic = &self.interleaver_compare;
        if !ic.ebn0_db.is_finite() {
            return Err(config_err("interleaver_compare.ebn0_db", "must be finite"));
        }
        if ic.codewords_per_frame == 0 {
            return Err(config_err(
                "interleaver_compare.codewords_per_frame",
                "must be positive",
            ));
        }
        if ic.burst_rates_hz.is_empty() {
            return Err(config_err(
                "interleaver_compare.burst_rates_hz",
                "no burst rates",
            ));
        }
        if let Some(i) = ic
            .burst_rates_hz
            .iter()
            .position(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(config_err(
                format!("interleaver_compare.burst_rates_hz[{i}]"),
                "must be finite and non-negative",
            ));
        }
        if !(ic.burst_duration_s > 0.0) || !ic.burst_boost_db.is_finite() {
            return Err(config_err(
                "interleaver_compare",
                "burst duration must be positive and boost finite",
            ));
        }

        let m = &self.mac;
        if m.protocols.is_empty() {
            return Err(config_err("mac.protocols", "no protocols"));
        }
        for (i, p) in m.protocols.iter().enumerate() {
            if !super::mac::PROTOCOLS.contains(&p.as_str()) {
                return Err(config_err(
                    format!("mac.protocols[{i}]"),
                    format!("unknown protocol {p:?}"),
                ));
            }
        }
        if m.node_counts.is_empty() {
            return Err(config_err("mac.node_counts", "no node counts"));
        }
        if let Some(i) = m.node_counts.iter().position(|&n| n < 2) {
            return Err(config_err(
                format!("mac.node_counts[{i}]"),
                "need at least 2 nodes",
            ));
        }
        if m.offered_loads.is_empty() {
            return Err(config_err("mac.offered_loads", "no loads"));
        }
        if let Some(i) = m
            .offered_loads
            .iter()
            .position(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(config_err(
                format!("mac.offered_loads[{i}]"),
                "must be positive",
            ));
        }
        if m.packets_per_flow == 0 {
            return Err(config_err("mac.packets_per_flow", "must be positive"));
        }
        if !(m.side_m > 0.0) || !(m.range_m >= m.side_m * std::f64::consts::SQRT_2) {
            return Err(config_err(
                "mac",
                "range_m must cover the whole square (side_m * sqrt 2)",
            ));
        }
        if !(m.traffic_start_s >= 0.0) || !(m.drain_s >= 0.0) || !(m.tdma_cycle_s > 0.0) {
            return Err(config_err("mac", "times must be non-negative"));
        }

        let s = &self.snr_map;
        if s.frequencies_khz.is_empty() || s.distances_km.is_empty() {
            return Err(config_err("snr_map", "empty grid"));
        }
        if s.frequencies_khz
            .iter()
            .chain(&s.distances_km)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(config_err("snr_map", "grid values must be positive"));
        }
        if !s.source_level_db.is_finite() {
            return Err(config_err("snr_map.source_level_db", "must be finite"));
        }
        Ok(())
    }

    pub fn pn(&self) -> PnSequence {
        parse_pn(&self.phy.pn).expect("validated PN code")
    }

    pub fn modulations(&self) -> Result<Vec<Modulation>, HarnessError> {
        self.phy
            .modulations
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, m)| {
                m.parse().map_err(|_| {
                    config_err(
                        format!("phy.modulations[{i}]"),
                        format!("unknown modulation {m:?}"),
                    )
                })
            })
            .collect()
    }

    pub fn code_names(&self) -> &[String] {
        self.code.names.as_deref().unwrap_or_default()
    }

    pub fn interleavers(&self) -> Result<Vec<(String, InterleaverSpec)>, HarnessError> {
        self.interleaver
            .variants
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, v)| {
                let spec = v
                    .parse::<InterleaverSpec>()
                    .map_err(|e| config_err(format!("interleaver.variants[{i}]"), e.to_string()))?;
                Ok((v.clone(), spec))
            })
            .collect()
    }

    /// Canonical TOML of the resolved config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Lowercase hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_kind() {
        for kind in [
            ExperimentKind::BerSweep,
            ExperimentKind::InterleaverCompare,
            ExperimentKind::MacCompare,
            ExperimentKind::SnrMap,
            ExperimentKind::CodecTable,
        ] {
            let cfg = ExperimentConfig::new(kind);
            assert!(cfg.code.names.is_some());
            let back = ExperimentConfig::from_toml(&cfg.canonical(), "echo").unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn parse_error_has_location() {
        let err =
            ExperimentConfig::from_toml("experiment = \"ber_sweep\"\ntrials = \"x\"\n", "a.toml")
                .unwrap_err();
        match err {
            HarnessError::Config { location, .. } => {
                assert!(location.starts_with("a.toml:2:"), "{location}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_names_rejected() {
        let bad = [
            ("[code]\nnames = [\"rs-15-12x\"]", "code.names[0]"),
            (
                "[interleaver]\nvariants = [\"none\", \"spiral\"]",
                "interleaver.variants[1]",
            ),
            ("[phy]\npn = \"kasami:4\"", "phy.pn"),
            ("[phy]\nmodulations = [\"fsk\"]", "phy.modulations[0]"),
            ("[mac]\nprotocols = [\"aloha\"]", "mac.protocols[0]"),
            ("trials = 0", "trials"),
            ("[ber_sweep]\nsnr_db = [1.0, nan]", "ber_sweep.snr_db[1]"),
        ];
        for (body, key) in bad {
            let text = format!("experiment = \"ber_sweep\"\n{body}\n");
            match ExperimentConfig::from_toml(&text, "c.toml").unwrap_err() {
                HarnessError::Config { location, .. } => {
                    assert_eq!(location, format!("c.toml: {key}"), "{body}")
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(
            ExperimentConfig::from_toml("experiment = \"snr_map\"\ntrails = 3\n", "x").is_err()
        );
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(ExperimentKind::BerSweep);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn pn_names() {
        assert_eq!(parse_pn("mseq:5").unwrap().len(), 31);
        assert_eq!(parse_pn("gold:7:3").unwrap().len(), 127);
        assert_eq!(parse_pn("walsh:16:2").unwrap().len(), 16);
        assert!(parse_pn("gold:4:0").is_none());
        assert!(parse_pn("mseq").is_none());
    }
}
