//! DS-CDMA physical layer.
//!
//! Bits are mapped to +/-1 (bit 1 -> +1), multiplied by one full period of
//! the user's PN sequence, and the resulting chips ride a carrier as BPSK
//! or QPSK (chip pairs on I and Q, which is Gray mapping). The receiver is
//! a coherent correlator with genie carrier phase; chip timing can be
//! offset to model synchronisation error.

use std::f64::consts::PI;

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::channel::Waveform;
use crate::gf::default_primitive_poly;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("register length {0} outside 2..=16")]
    InvalidRegisterLength(u32),
    #[error("feedback taps {taps:#o} do not give a maximal-length sequence of degree {m}")]
    NonPrimitiveTaps { m: u32, taps: u32 },
    #[error("LFSR seed must be nonzero")]
    ZeroSeed,
    #[error("index {index} out of range for a family of {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length {len} is not a multiple of {period}")]
    LengthNotMultiple { len: usize, period: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
    #[error("timing offset {offset} beyond waveform of {len} samples")]
    TimingOutOfRange { offset: usize, len: usize },
    #[error("QPSK needs an even number of chips, got {0}")]
    OddChipCount(usize),
    #[error("invalid PHY configuration: {0}")]
    InvalidConfig(String),
}

/// How a PN sequence was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnOrigin {
    MSequence {
        register_len: u32,
        taps: u32,
        seed: u32,
    },
    Gold {
        register_len: u32,
        pair: (u32, u32),
        shift: usize,
    },
    Walsh {
        order: usize,
        row: usize,
    },
}

/// A +/-1 spreading sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnSequence {
    chips: Vec<i8>,
    origin: PnOrigin,
}

impl PnSequence {
    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn origin(&self) -> PnOrigin {
        self.origin
    }
}

/// Unnormalised periodic cross-correlation at `lag`:
/// `sum_i a_i b_{(i + lag) mod N}`.
pub fn periodic_correlation(a: &[i8], b: &[i8], lag: usize) -> i64 {
    let n = a.len();
    (0..n).map(|i| a[i] as i64 * b[(i + lag) % n] as i64).sum()
}

/// Raw LFSR output bits, or `None` if the period is not `2^m - 1`.
fn lfsr_bits(m: u32, taps: u32, seed: u32) -> Option<Vec<u8>> {
    let mask = (1u32 << m) - 1;
    let feedback = taps & mask;
    let period = mask as usize;
    let mut state = seed;
    let mut out = Vec::with_capacity(period);
    for step in 0..period {
        if step > 0 && state == seed {
            return None;
        }
        out.push((state & 1) as u8);
        let next = (state & feedback).count_ones() & 1;
        state = (state >> 1) | (next << (m - 1));
    }
    (state == seed).then_some(out)
}

/// Maximal-length sequence from the feedback polynomial `taps`
/// (bitmask of `x^m + ... + 1`) and a nonzero `m`-bit initial state.
pub fn msequence(m: u32, taps: u32, seed: u32) -> Result<PnSequence, PhyError> {
    if !(2..=16).contains(&m) {
        return Err(PhyError::InvalidRegisterLength(m));
    }
    let seed = seed & ((1 << m) - 1);
    if seed == 0 {
        return Err(PhyError::ZeroSeed);
    }
    if taps >> m != 1 {
        return Err(PhyError::NonPrimitiveTaps { m, taps });
    }
    let bits = lfsr_bits(m, taps, seed).ok_or(PhyError::NonPrimitiveTaps { m, taps })?;
    Ok(PnSequence {
        chips: bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect(),
        origin: PnOrigin::MSequence {
            register_len: m,
            taps,
            seed,
        },
    })
}

/// m-sequence with the default primitive polynomial of degree `m`.
pub fn default_msequence(m: u32, seed: u32) -> Result<PnSequence, PhyError> {
    let taps = default_primitive_poly(m).ok_or(PhyError::InvalidRegisterLength(m))?;
    msequence(m, taps, seed)
}

/// A preferred pair of feedback polynomials whose m-sequences have
/// three-valued cross-correlation.
pub fn preferred_pair(m: u32) -> Option<(u32, u32)> {
    match m {
        5 => Some((0o45, 0o75)),
        6 => Some((0o103, 0o147)),
        7 => Some((0o211, 0o217)),
        _ => None,
    }
}

/// Member `shift` of the Gold family of a preferred pair: `u * T^shift v`
/// for `shift < N`, then `u` and `v` themselves for `shift = N, N + 1`.
pub fn gold_code(m: u32, pair: (u32, u32), shift: usize) -> Result<PnSequence, PhyError> {
    let u = msequence(m, pair.0, 1)?;
    let v = msequence(m, pair.1, 1)?;
    let n = u.len();
    let chips = match shift {
        // Chip of the XOR bit under the same bit-1 -> +1 mapping.
        s if s < n => (0..n).map(|i| -u.chips[i] * v.chips[(i + s) % n]).collect(),
        s if s == n => u.chips,
        s if s == n + 1 => v.chips,
        s => {
            return Err(PhyError::IndexOutOfRange {
                index: s,
                size: n + 2,
            })
        }
    };
    Ok(PnSequence {
        chips,
        origin: PnOrigin::Gold {
            register_len: m,
            pair,
            shift,
        },
    })
}

/// Row `row` of the Sylvester-Hadamard matrix of size `order`.
pub fn walsh(order: usize, row: usize) -> Result<PnSequence, PhyError> {
    if order == 0 || !order.is_power_of_two() {
        return Err(PhyError::InvalidConfig(format!(
            "Walsh order {order} is not a power of two"
        )));
    }
    if row >= order {
        return Err(PhyError::IndexOutOfRange {
            index: row,
            size: order,
        });
    }
    let chips = (0..order)
        .map(|c| {
            if (row & c).count_ones().is_multiple_of(2) {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(PnSequence {
        chips,
        origin: PnOrigin::Walsh { order, row },
    })
}

fn bit_sign(b: u8) -> Result<f64, PhyError> {
    match b {
        0 => Ok(-1.0),
        1 => Ok(1.0),
        other => Err(PhyError::InvalidBit(other)),
    }
}

/// Spreads each bit over one full PN period.
pub fn spread(bits: &[u8], pn: &PnSequence) -> Result<Vec<f64>, PhyError> {
    if bits.is_empty() || pn.is_empty() {
        return Err(PhyError::EmptyInput);
    }
    let mut out = Vec::with_capacity(bits.len() * pn.len());
    for &b in bits {
        let s = bit_sign(b)?;
        out.extend(pn.chips.iter().map(|&c| s * c as f64));
    }
    Ok(out)
}

/// Correlates each PN-length block with the local code. Returns hard bits
/// and the correlation scores.
pub fn despread(soft_chips: &[f64], pn: &PnSequence) -> Result<(Vec<u8>, Vec<f64>), PhyError> {
    if pn.is_empty() {
        return Err(PhyError::EmptyInput);
    }
    if !soft_chips.len().is_multiple_of(pn.len()) {
        return Err(PhyError::LengthNotMultiple {
            len: soft_chips.len(),
            period: pn.len(),
        });
    }
    let scores: Vec<f64> = soft_chips
        .chunks(pn.len())
        .map(|block| {
            block
                .iter()
                .zip(&pn.chips)
                .map(|(x, &c)| x * c as f64)
                .sum()
        })
        .collect();
    let bits = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
    Ok((bits, scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Bpsk,
    Qpsk,
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        })
    }
}

impl std::str::FromStr for Modulation {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            other => Err(PhyError::InvalidConfig(format!(
                "unknown modulation {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub chip_rate: f64,
    pub samples_per_chip: usize,
    pub carrier_khz: f64,
    pub modulation: Modulation,
    /// Chips per data bit; equals the PN period.
    pub spreading_factor: usize,
}

impl Default for PhyConfig {
    fn default() -> Self {
        // 12 kHz carrier, 3 cycles per chip, 32 kHz sampling.
        PhyConfig {
            chip_rate: 4000.0,
            samples_per_chip: 8,
            carrier_khz: 12.0,
            modulation: Modulation::Bpsk,
            spreading_factor: 15,
        }
    }
}

impl PhyConfig {
    pub fn sample_rate(&self) -> f64 {
        self.chip_rate * self.samples_per_chip as f64
    }

    /// Duration of one chip period on the air. For QPSK this carries two chips.
    pub fn symbol_samples(&self) -> usize {
        self.samples_per_chip
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |m: String| Err(PhyError::InvalidConfig(m));
        if !(self.chip_rate > 0.0) {
            return bad(format!("chip rate {}", self.chip_rate));
        }
        if self.samples_per_chip < 4 {
            return bad(format!(
                "{} samples per chip; need at least 4",
                self.samples_per_chip
            ));
        }
        if !(self.carrier_khz > 0.0) || self.carrier_khz * 1000.0 >= self.sample_rate() / 2.0 {
            return bad(format!(
                "carrier {} kHz not representable at {} Hz",
                self.carrier_khz,
                self.sample_rate()
            ));
        }
        if self.spreading_factor == 0 {
            return bad("zero spreading factor".into());
        }
        Ok(())
    }

    fn carrier_phase(&self, n: usize) -> f64 {
        2.0 * PI * self.carrier_khz * 1000.0 * n as f64 / self.sample_rate()
    }
}

/// Chips onto the carrier. BPSK: `c cos(wt)`. QPSK: consecutive chip pairs
/// `(I, Q)` as `I cos(wt) - Q sin(wt)`.
pub fn modulate(chips: &[f64], cfg: &PhyConfig) -> Result<Waveform, PhyError> {
    cfg.validate()?;
    let spc = cfg.samples_per_chip;
    let mut samples = Vec::new();
    match cfg.modulation {
        Modulation::Bpsk => {
            samples.reserve(chips.len() * spc);
            for (i, &c) in chips.iter().enumerate() {
                for k in 0..spc {
                    samples.push(c * cfg.carrier_phase(i * spc + k).cos());
                }
            }
        }
        Modulation::Qpsk => {
            if !chips.len().is_multiple_of(2) {
                return Err(PhyError::OddChipCount(chips.len()));
            }
            samples.reserve(chips.len() / 2 * spc);
            for (i, pair) in chips.chunks_exact(2).enumerate() {
                for k in 0..spc {
                    let ph = cfg.carrier_phase(i * spc + k);
                    samples.push(pair[0] * ph.cos() - pair[1] * ph.sin());
                }
            }
        }
    }
    Ok(Waveform::new(samples, cfg.sample_rate()))
}

/// Coherent demodulation with integrate-and-dump over each chip period,
/// starting `timing_offset` samples into the waveform. Soft values have
/// unit amplitude for a noiseless, perfectly timed signal.
pub fn demodulate(
    wave: &Waveform,
    cfg: &PhyConfig,
    timing_offset: usize,
) -> Result<Vec<f64>, PhyError> {
    cfg.validate()?;
    let len = wave.samples.len();
    if timing_offset > len {
        return Err(PhyError::TimingOutOfRange {
            offset: timing_offset,
            len,
        });
    }
    let spc = cfg.samples_per_chip;
    let periods = (len - timing_offset) / spc;
    let scale = 2.0 / spc as f64;
    let mut out = Vec::with_capacity(periods * 2);
    for p in 0..periods {
        let start = timing_offset + p * spc;
        let (mut i_acc, mut q_acc) = (0.0, 0.0);
        for n in start..start + spc {
            let ph = cfg.carrier_phase(n);
            i_acc += wave.samples[n] * ph.cos();
            q_acc -= wave.samples[n] * ph.sin();
        }
        out.push(i_acc * scale);
        if cfg.modulation == Modulation::Qpsk {
            out.push(q_acc * scale);
        }
    }
    Ok(out)
}

/// Fraction of differing bits.
pub fn ber(tx: &[u8], rx: &[u8]) -> Result<f64, PhyError> {
    if tx.len() != rx.len() {
        return Err(PhyError::LengthMismatch(tx.len(), rx.len()));
    }
    if tx.is_empty() {
        return Err(PhyError::EmptyInput);
    }
    Ok(bit_errors(tx, rx) as f64 / tx.len() as f64)
}

pub fn bit_errors(tx: &[u8], rx: &[u8]) -> usize {
    tx.iter().zip(rx).filter(|(a, b)| a != b).count()
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Coherent BPSK/QPSK bit error probability in AWGN.
pub fn bpsk_awgn_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Probability that a packet of `bits` independent bits has any error.
pub fn packet_error_rate(ber: f64, bits: usize) -> f64 {
    1.0 - (1.0 - ber).powi(bits as i32)
}
