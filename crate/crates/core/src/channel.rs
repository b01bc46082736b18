//! Underwater acoustic channel: absorption, path loss, ambient noise,
//! multipath taps and the received-signal model.
//!
//! Path loss combines geometric spreading with Thorp absorption, in dB:
//!
//! ```text
//! 10 log10 A(l, f) = 10 k log10(l / l_r) + a(f) (l - l_r) / 1000
//! a(f) = 0.11 f^2/(1 + f^2) + 44 f^2/(4100 + f^2) + 2.75e-4 f^2 + 0.003   [dB/km, f in kHz]
//! ```
//!
//! Each propagation path becomes one tap with delay `l_p / c` and gain
//! `Gamma_p / sqrt(A(l_p, f_c))` evaluated at the carrier `f_c`. The
//! received signal is `r(t) = sum_k a_k s(t - tau_k) + n(t)`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("frequency must be positive, got {0} kHz")]
    NonPositiveFrequency(f64),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("empty {0} range")]
    EmptyRange(&'static str),
    #[error("channel has no propagation paths")]
    NoPaths,
    #[error("signal sampled at {signal} Hz but channel expects {channel} Hz")]
    SampleRateMismatch { signal: f64, channel: f64 },
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid impulse response: {0}")]
    InvalidImpulseResponse(String),
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    /// Path length `l_p` in metres.
    pub length_m: f64,
    /// Cumulative reflection coefficient `Gamma_p` in [-1, 1].
    pub reflection: f64,
}

/// Site-specific impulsive noise: Poisson-arriving segments of elevated
/// Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstNoise {
    pub rate_hz: f64,
    pub duration_s: f64,
    /// Burst power relative to the ambient level.
    pub power_boost_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// One-sided ambient noise PSD `N0` in dB re 1 unit^2/Hz. `None`
    /// disables all noise.
    pub ambient_psd_db: Option<f64>,
    pub burst: Option<BurstNoise>,
}

impl NoiseConfig {
    pub fn silent() -> Self {
        NoiseConfig::default()
    }

    /// Per-sample variance of white noise with one-sided PSD `N0` at
    /// `sample_rate`: `N0 * fs / 2`.
    pub fn ambient_variance(&self, sample_rate: f64) -> f64 {
        self.ambient_psd_db
            .map_or(0.0, |db| 10f64.powf(db / 10.0) * sample_rate / 2.0)
    }
}

/// Slow sinusoidal gain fluctuation, e.g. from surface waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDrift {
    /// Relative amplitude of the fluctuation, in [0, 1).
    pub depth: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Reference distance `l_r` in metres.
    pub reference_distance_m: f64,
    /// Spreading exponent `k`, usually 1 (cylindrical) to 2 (spherical).
    pub spreading_exponent: f64,
    pub sound_speed: f64,
    pub paths: Vec<PathSpec>,
    pub noise: NoiseConfig,
    /// Relative velocity `v / c`; positive means closing.
    pub doppler_factor: f64,
    pub sample_rate: f64,
    pub drift: Option<GainDrift>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            reference_distance_m: 1.0,
            spreading_exponent: 1.5,
            sound_speed: DEFAULT_SOUND_SPEED,
            paths: vec![PathSpec {
                length_m: 1000.0,
                reflection: 1.0,
            }],
            noise: NoiseConfig::silent(),
            doppler_factor: 0.0,
            sample_rate: 32_000.0,
            drift: None,
        }
    }
}

impl ChannelConfig {
    /// Checks hard constraints and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidConfig(m));
        if !(self.reference_distance_m > 0.0) {
            return bad(format!(
                "reference distance {} m",
                self.reference_distance_m
            ));
        }
        if !(self.sound_speed > 0.0) {
            return bad(format!("sound speed {} m/s", self.sound_speed));
        }
        if !(self.sample_rate > 0.0) {
            return bad(format!("sample rate {} Hz", self.sample_rate));
        }
        if !(self.doppler_factor.abs() < 0.01) {
            return bad(format!(
                "|doppler factor| {} must be below 0.01",
                self.doppler_factor
            ));
        }
        for p in &self.paths {
            if !(p.length_m > 0.0) || !(p.reflection.abs() <= 1.0) {
                return bad(format!("path {p:?}"));
            }
        }
        if let Some(b) = self.noise.burst {
            if !(b.duration_s > 0.0) || !(b.rate_hz >= 0.0) {
                return bad(format!("burst {b:?}"));
            }
        }
        if let Some(d) = self.drift {
            if !(0.0..1.0).contains(&d.depth) || !(d.period_s > 0.0) {
                return bad(format!("gain drift {d:?}"));
            }
        }
        let mut warnings = Vec::new();
        if !(1.0..=2.0).contains(&self.spreading_exponent) {
            warnings.push(format!(
                "spreading exponent {} outside the usual 1..2 range",
                self.spreading_exponent
            ));
        }
        if let Some(direct) = self.paths.iter().map(|p| p.length_m).reduce(f64::min) {
            if direct < self.reference_distance_m {
                warnings.push(format!(
                    "shortest path {direct} m is inside the reference distance"
                ));
            }
        }
        Ok(warnings)
    }
}

/// Thorp absorption in dB/km for `f_khz` in kHz.
pub fn absorption_db_per_km(f_khz: f64) -> Result<f64, ChannelError> {
    if !(f_khz > 0.0) {
        return Err(ChannelError::NonPositiveFrequency(f_khz));
    }
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// `10 log10 A(l, f)`.
pub fn path_loss_db(distance_m: f64, f_khz: f64, cfg: &ChannelConfig) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let absorption = absorption_db_per_km(f_khz)?;
    if distance_m == cfg.reference_distance_m {
        return Ok(0.0);
    }
    let spreading = 10.0 * cfg.spreading_exponent * (distance_m / cfg.reference_distance_m).log10();
    Ok(spreading + absorption * (distance_m - cfg.reference_distance_m) / 1000.0)
}

/// Linear power attenuation `A(l, f)`; exactly 1 at the reference distance.
pub fn path_loss(distance_m: f64, f_khz: f64, cfg: &ChannelConfig) -> Result<f64, ChannelError> {
    path_loss_db(distance_m, f_khz, cfg).map(|db| 10f64.powf(db / 10.0))
}

/// Ambient noise spectrum used for link-budget maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpectrum {
    /// Frequency-independent level in dB re 1 uPa^2/Hz.
    Flat { level_db: f64 },
    /// Turbulence, shipping, wind and thermal components.
    /// `shipping` in [0, 1]; `wind_mps` in m/s.
    Empirical { shipping: f64, wind_mps: f64 },
}

impl Default for NoiseSpectrum {
    fn default() -> Self {
        NoiseSpectrum::Empirical {
            shipping: 0.5,
            wind_mps: 0.0,
        }
    }
}

/// Noise PSD level in dB re 1 uPa^2/Hz at `f_khz`.
pub fn noise_level_db(f_khz: f64, spectrum: &NoiseSpectrum) -> Result<f64, ChannelError> {
    if !(f_khz > 0.0) {
        return Err(ChannelError::NonPositiveFrequency(f_khz));
    }
    Ok(match *spectrum {
        NoiseSpectrum::Flat { level_db } => level_db,
        NoiseSpectrum::Empirical { shipping, wind_mps } => {
            let lf = f_khz.log10();
            let turbulence = 17.0 - 30.0 * lf;
            let ships = 40.0 + 20.0 * (shipping - 0.5) + 26.0 * lf - 60.0 * (f_khz + 0.03).log10();
            let wind = 50.0 + 7.5 * wind_mps.sqrt() + 20.0 * lf - 40.0 * (f_khz + 0.4).log10();
            let thermal = -15.0 + 20.0 * lf;
            let total: f64 = [turbulence, ships, wind, thermal]
                .iter()
                .map(|db| 10f64.powf(db / 10.0))
                .sum();
            10.0 * total.log10()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub distance_m: f64,
    pub frequency_khz: f64,
    pub snr_db: f64,
}

/// Narrowband SNR `SL - 10 log10 A(l, f) - N(f)` over a distance x
/// frequency grid, distance-major.
pub fn snr_map(
    frequencies_khz: &[f64],
    distances_m: &[f64],
    source_level_db: f64,
    cfg: &ChannelConfig,
    spectrum: &NoiseSpectrum,
) -> Result<Vec<SnrPoint>, ChannelError> {
    if frequencies_khz.is_empty() {
        return Err(ChannelError::EmptyRange("frequency"));
    }
    if distances_m.is_empty() {
        return Err(ChannelError::EmptyRange("distance"));
    }
    let mut out = Vec::with_capacity(frequencies_khz.len() * distances_m.len());
    for &l in distances_m {
        for &f in frequencies_khz {
            let snr_db = source_level_db - path_loss_db(l, f, cfg)? - noise_level_db(f, spectrum)?;
            out.push(SnrPoint {
                distance_m: l,
                frequency_khz: f,
                snr_db,
            });
        }
    }
    Ok(out)
}

pub fn write_snr_csv<W: Write>(mut w: W, points: &[SnrPoint]) -> std::io::Result<()> {
    writeln!(w, "distance_m,frequency_khz,snr_db")?;
    for p in points {
        writeln!(w, "{},{},{:.6}", p.distance_m, p.frequency_khz, p.snr_db)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub gain: f64,
    pub delay_s: f64,
}

/// Tapped-delay-line channel: taps sorted by non-negative delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<Tap>,
}

impl ImpulseResponse {
    pub fn new(mut taps: Vec<Tap>) -> Result<Self, ChannelError> {
        if taps.is_empty() {
            return Err(ChannelError::InvalidImpulseResponse("no taps".into()));
        }
        if let Some(t) = taps
            .iter()
            .find(|t| !(t.delay_s >= 0.0) || !t.gain.is_finite())
        {
            return Err(ChannelError::InvalidImpulseResponse(format!(
                "bad tap {t:?}"
            )));
        }
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        Ok(ImpulseResponse { taps })
    }

    /// Single unit tap with zero delay.
    pub fn identity() -> Self {
        ImpulseResponse {
            taps: vec![Tap {
                gain: 1.0,
                delay_s: 0.0,
            }],
        }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay_s)
    }

    /// Delays measured from the first arrival.
    pub fn aligned(&self) -> Self {
        let first = self.taps[0].delay_s;
        let taps = self
            .taps
            .iter()
            .map(|t| Tap {
                gain: t.gain,
                delay_s: t.delay_s - first,
            })
            .collect();
        ImpulseResponse { taps }
    }

    /// Gains scaled so the strongest tap has unit magnitude.
    pub fn normalized(&self) -> Self {
        let peak = self.taps.iter().map(|t| t.gain.abs()).fold(0.0, f64::max);
        if peak == 0.0 {
            return self.clone();
        }
        let taps = self
            .taps
            .iter()
            .map(|t| Tap {
                gain: t.gain / peak,
                delay_s: t.delay_s,
            })
            .collect();
        ImpulseResponse { taps }
    }

    pub fn sum_abs_gain(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.abs()).sum()
    }
}

/// One tap per path with delay `l_p / c` and gain `Gamma_p / sqrt(A(l_p, f))`.
pub fn impulse_response(
    cfg: &ChannelConfig,
    f_design_khz: f64,
) -> Result<ImpulseResponse, ChannelError> {
    if cfg.paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let taps = cfg
        .paths
        .iter()
        .map(|p| {
            let a = path_loss(p.length_m, f_design_khz, cfg)?;
            Ok(Tap {
                gain: p.reflection / a.sqrt(),
                delay_s: p.length_m / cfg.sound_speed,
            })
        })
        .collect::<Result<Vec<_>, ChannelError>>()?;
    ImpulseResponse::new(taps)
}

/// Real sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    /// `sum x^2 / fs`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.sample_rate
    }
}

/// Linear interpolation of `x` at fractional index `u`, zero outside.
fn sample_at(x: &[f64], u: f64) -> f64 {
    if u < -1.0 || u >= x.len() as f64 {
        return 0.0;
    }
    let i = u.floor();
    let frac = u - i;
    let i = i as isize;
    let get = |j: isize| {
        if j >= 0 && (j as usize) < x.len() {
            x[j as usize]
        } else {
            0.0
        }
    };
    if frac == 0.0 {
        return get(i);
    }
    get(i) * (1.0 - frac) + get(i + 1) * frac
}

/// Passes `signal` through the multipath taps, then Doppler resampling,
/// gain drift and additive noise. Deterministic in `seed`.
///
/// Ambient and burst noise draw from separate ChaCha streams so the
/// ambient realization does not depend on the burst settings.
pub fn apply_channel(
    signal: &Waveform,
    ir: &ImpulseResponse,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<Waveform, ChannelError> {
    if signal.sample_rate != cfg.sample_rate {
        return Err(ChannelError::SampleRateMismatch {
            signal: signal.sample_rate,
            channel: cfg.sample_rate,
        });
    }
    if !(cfg.doppler_factor.abs() < 0.01) {
        return Err(ChannelError::InvalidConfig(format!(
            "|doppler factor| {} must be below 0.01",
            cfg.doppler_factor
        )));
    }
    let fs = cfg.sample_rate;
    let x = &signal.samples;
    if x.is_empty() {
        return Ok(Waveform::new(Vec::new(), fs));
    }

    let tail = (ir.max_delay() * fs).ceil() as usize;
    let mut y = vec![0.0; x.len() + tail];
    for tap in ir.taps() {
        let shift = tap.delay_s * fs;
        let whole = shift.floor() as usize;
        let frac = shift - shift.floor();
        for (i, &xi) in x.iter().enumerate() {
            y[i + whole] += tap.gain * (1.0 - frac) * xi;
            if frac > 0.0 && i + whole + 1 < y.len() {
                y[i + whole + 1] += tap.gain * frac * xi;
            }
        }
    }

    // Relative motion compresses (or dilates) the time axis.
    let ratio = 1.0 + cfg.doppler_factor;
    let mut r = if cfg.doppler_factor == 0.0 {
        y
    } else {
        let len = ((y.len() - 1) as f64 / ratio).floor() as usize + 1;
        (0..len).map(|n| sample_at(&y, n as f64 * ratio)).collect()
    };

    if let Some(d) = cfg.drift {
        for (n, v) in r.iter_mut().enumerate() {
            *v *= 1.0 + d.depth * (2.0 * PI * n as f64 / (fs * d.period_s)).sin();
        }
    }

    let variance = cfg.noise.ambient_variance(fs);
    if variance > 0.0 {
        let sigma = variance.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in r.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
        if let Some(burst) = cfg.noise.burst {
            let mut brng = ChaCha8Rng::seed_from_u64(seed);
            brng.set_stream(1);
            let burst_sigma = sigma * 10f64.powf(burst.power_boost_db / 20.0);
            for (start, end) in burst_segments(&burst, r.len(), fs, &mut brng) {
                for v in &mut r[start..end] {
                    let z: f64 = brng.sample(StandardNormal);
                    *v += burst_sigma * z;
                }
            }
        }
    }
    Ok(Waveform::new(r, fs))
}

/// Sample ranges covered by Poisson bursts over `len` samples.
fn burst_segments(
    burst: &BurstNoise,
    len: usize,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if burst.rate_hz <= 0.0 {
        return out;
    }
    let gap = Exp::new(burst.rate_hz).expect("positive burst rate");
    let duration = len as f64 / fs;
    let width = (burst.duration_s * fs).round().max(1.0) as usize;
    let mut t = gap.sample(rng);
    while t < duration {
        let start = (t * fs) as usize;
        out.push((start, (start + width).min(len)));
        t += gap.sample(rng);
    }
    out
}
