//! End-to-end link: bits, FEC, interleaving, spreading, carrier, channel and
//! the matching receive chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::channel::{apply_channel, impulse_response, ChannelConfig, ImpulseResponse};
use crate::fec::{bits_to_symbols, symbols_to_bits, Code, FecError};
use crate::gf::Element;
use crate::interleave::{deinterleave, interleave, InterleaverSpec};
use crate::phy::{demodulate, despread, modulate, spread, Modulation, PhyConfig, PnSequence};
use crate::seed::child;

/// Channel code, or none.
#[derive(Debug, Clone)]
pub enum Codec {
    Uncoded,
    Block(Code),
}

impl Codec {
    pub fn from_name(name: &str) -> Result<Self, FecError> {
        match name.trim() {
            "none" => Ok(Codec::Uncoded),
            other => Code::from_name(other).map(Codec::Block),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Codec::Uncoded => "none".into(),
            Codec::Block(c) => c.name(),
        }
    }

    /// Symbols per codeword; an uncoded "codeword" is one bit.
    pub fn n(&self) -> usize {
        match self {
            Codec::Uncoded => 1,
            Codec::Block(c) => c.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Codec::Uncoded => 1,
            Codec::Block(c) => c.k(),
        }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            Codec::Uncoded => 1,
            Codec::Block(c) => c.bits_per_symbol(),
        }
    }
}

/// Per-frame outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameStats {
    pub info_bits: u64,
    pub bit_errors: u64,
    pub codewords: u64,
    /// Codewords the decoder rejected or decoded to the wrong data.
    pub failed_codewords: u64,
}

impl std::ops::AddAssign for FrameStats {
    fn add_assign(&mut self, o: FrameStats) {
        self.info_bits += o.info_bits;
        self.bit_errors += o.bit_errors;
        self.codewords += o.codewords;
        self.failed_codewords += o.failed_codewords;
    }
}

/// One configured transmitter/receiver pair.
///
/// Eb/N0 is measured per information bit against the energy of the first
/// arrival, so coding, interleaver padding and spreading all count as
/// overhead. Later paths act as interference.
#[derive(Debug, Clone)]
pub struct Link {
    pub codec: Codec,
    pub interleaver: InterleaverSpec,
    pub phy: PhyConfig,
    pub pn: PnSequence,
    /// Noise is set per frame from Eb/N0; only the burst settings are kept.
    pub channel: ChannelConfig,
    ir: ImpulseResponse,
}

impl Link {
    pub fn new(
        codec: Codec,
        interleaver: InterleaverSpec,
        modulation: Modulation,
        pn: PnSequence,
        phy: PhyConfig,
        channel: ChannelConfig,
    ) -> Result<Self, HarnessError> {
        let phy = PhyConfig {
            modulation,
            spreading_factor: pn.len(),
            ..phy
        };
        phy.validate()?;
        interleaver.validate()?;
        let ir = impulse_response(&channel, phy.carrier_khz)?
            .aligned()
            .normalized();
        Ok(Link {
            codec,
            interleaver,
            phy,
            pn,
            channel,
            ir,
        })
    }

    /// Smallest codeword count holding `info_bits` that fills whole
    /// interleaver blocks.
    pub fn frame_codewords(&self, info_bits: usize) -> usize {
        let per_cw = self.codec.k() * self.codec.bits_per_symbol() as usize;
        let mut cw = info_bits.div_ceil(per_cw).max(1);
        if let Some(block) = self.interleaver.block_len() {
            let n = self.codec.n();
            let step = block / gcd(block, n);
            cw = cw.div_ceil(step) * step;
        }
        cw
    }

    /// Sends `codewords` random codewords at `ebn0_db` (`inf` for no
    /// noise). Data and noise are drawn from streams of `seed`.
    pub fn run_frame(
        &self,
        codewords: usize,
        ebn0_db: f64,
        seed: u64,
    ) -> Result<FrameStats, HarnessError> {
        let bps = self.codec.bits_per_symbol();
        let (n, k) = (self.codec.n(), self.codec.k());
        let mut rng = ChaCha8Rng::seed_from_u64(child(seed, 0));
        let limit: Element = 1 << bps;
        let data: Vec<Element> = (0..codewords * k)
            .map(|_| rng.random_range(0..limit))
            .collect();

        let coded: Vec<Element> = match &self.codec {
            Codec::Uncoded => data.clone(),
            Codec::Block(code) => {
                let mut out = Vec::with_capacity(codewords * n);
                for d in data.chunks(k) {
                    out.extend(code.encode(d)?);
                }
                out
            }
        };
        let tx_symbols = interleave(&self.interleaver, &coded)?;
        let tx_bits = symbols_to_bits(&tx_symbols, bps);
        let mut chips = spread(&tx_bits, &self.pn)?;
        if self.phy.modulation == Modulation::Qpsk && chips.len() % 2 == 1 {
            chips.push(0.0);
        }
        let wave = modulate(&chips, &self.phy)?;
        let info_bits = (codewords * k) as u64 * u64::from(bps);

        let mut channel = self.channel.clone();
        channel.noise.ambient_psd_db = if ebn0_db.is_finite() {
            let g0 = self.ir.taps()[0].gain;
            let eb = wave.energy() * g0 * g0 / info_bits as f64;
            Some(10.0 * (eb / 10f64.powf(ebn0_db / 10.0)).log10())
        } else {
            None
        };
        let rx = apply_channel(&wave, &self.ir, &channel, child(seed, 1))?;
        let mut soft = demodulate(&rx, &self.phy, 0)?;
        soft.resize(chips.len(), 0.0);
        soft.truncate(tx_bits.len() * self.pn.len());
        let (rx_bits, _) = despread(&soft, &self.pn)?;
        let rx_symbols = deinterleave(&self.interleaver, &bits_to_symbols(&rx_bits, bps))?;

        let mut stats = FrameStats {
            info_bits,
            codewords: codewords as u64,
            ..FrameStats::default()
        };
        for (word, sent) in rx_symbols.chunks(n).zip(data.chunks(k)) {
            let decoded = match &self.codec {
                Codec::Uncoded => word.to_vec(),
                // A rejected word falls back to its systematic part.
                Codec::Block(code) => code
                    .decode(word, &[])
                    .map_or_else(|_| word[..k].to_vec(), |(d, _)| d),
            };
            if decoded != sent {
                stats.failed_codewords += 1;
                stats.bit_errors += decoded
                    .iter()
                    .zip(sent)
                    .map(|(a, b)| u64::from((a ^ b).count_ones()))
                    .sum::<u64>();
            }
        }
        Ok(stats)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Synchronous multi-user DS-CDMA over a single-path channel.
///
/// User `u` sends `bits` random bits from stream `16 + u` of `seed` with
/// amplitude `amplitudes[u]`; noise is drawn from stream 1 and scaled so a
/// unit-amplitude user sees `ebn0_db`. Returns bit errors per user.
pub fn multiuser_errors(
    phy: &PhyConfig,
    users: &[PnSequence],
    amplitudes: &[f64],
    bits: usize,
    ebn0_db: f64,
    seed: u64,
) -> Result<Vec<u64>, HarnessError> {
    if users.is_empty() || users.len() != amplitudes.len() || bits == 0 {
        return Err(HarnessError::Invalid(
            "need one amplitude per user and at least one bit".into(),
        ));
    }
    let sf = users[0].len();
    if users.iter().any(|u| u.len() != sf) {
        return Err(HarnessError::Invalid(
            "users must share one code length".into(),
        ));
    }
    let phy = PhyConfig {
        modulation: Modulation::Bpsk,
        spreading_factor: sf,
        ..*phy
    };
    let data: Vec<Vec<u8>> = (0..users.len())
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(child(seed, 16 + u as u64));
            (0..bits).map(|_| rng.random_range(0..=1u8)).collect()
        })
        .collect();
    let mut chips = vec![0.0; bits * sf];
    for ((pn, a), d) in users.iter().zip(amplitudes).zip(&data) {
        for (c, s) in chips.iter_mut().zip(spread(d, pn)?) {
            *c += a * s;
        }
    }
    let wave = modulate(&chips, &phy)?;
    let mut channel = ChannelConfig {
        sample_rate: phy.sample_rate(),
        ..ChannelConfig::default()
    };
    if ebn0_db.is_finite() {
        // Unit-amplitude BPSK chip energy is Tc / 2.
        let eb = sf as f64 / (2.0 * phy.chip_rate);
        channel.noise.ambient_psd_db = Some(10.0 * (eb / 10f64.powf(ebn0_db / 10.0)).log10());
    }
    let rx = apply_channel(
        &wave,
        &ImpulseResponse::identity(),
        &channel,
        child(seed, 1),
    )?;
    let mut soft = demodulate(&rx, &phy, 0)?;
    soft.truncate(chips.len());
    users
        .iter()
        .zip(&data)
        .map(|(pn, d)| {
            let (rx_bits, _) = despread(&soft, pn)?;
            Ok(crate::phy::bit_errors(d, &rx_bits) as u64)
        })
        .collect()
}
