//! Experiment runner: config in, CSV (and optionally SVG) out.
//!
//! Seeds: trial `t` of sweep point `p` uses
//! [`trial_seed(seed, p, t)`](crate::seed::trial_seed), so adding trials
//! never changes the ones already run. Points run in parallel and are
//! merged in config order. Every CSV starts with
//! `# config-hash: sha256:<hex>` over the resolved config.

pub mod config;
pub mod link;
pub mod mac;
pub mod plot;
pub mod sweeps;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind};
pub use link::{multiuser_errors, Codec, FrameStats, Link};
pub use mac::{run_mac_compare, MacRow};
pub use plot::{emit_plot, render_svg, PlotSpec};
pub use sweeps::{
    codec_table, run_ber_sweep, run_interleaver_compare, run_snr_map, wilson_interval, BerRow,
    InterleaverRow,
};

use crate::channel::ChannelError;
use crate::fec::FecError;
use crate::interleave::InterleaveError;
use crate::macsim::MacError;
use crate::phy::PhyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{location}: {message}")]
    Config { location: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Fec(#[from] FecError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Interleave(#[from] InterleaveError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn code(&self) -> &'static str {
        match self {
            HarnessError::Config { .. } => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::SchemaMismatch(_) => "schema",
            HarnessError::Invalid(_) => "invalid",
            HarnessError::Fec(_) => "fec",
            HarnessError::Phy(_) => "phy",
            HarnessError::Channel(_) => "channel",
            HarnessError::Interleave(_) => "interleave",
            HarnessError::Mac(_) => "mac",
        }
    }
}

/// Shortest round-trip rendering, `inf` for infinity.
pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// Rendered CSV rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    /// Header and rows without the hash comment.
    pub fn body(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for record in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(record).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("fields are UTF-8")
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        format!("# config-hash: sha256:{config_hash}\n{}", self.body())
    }
}

/// Runs the experiment named in `cfg` and returns its table.
pub fn run_table(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    Ok(match cfg.experiment {
        ExperimentKind::BerSweep => sweeps::ber_table(&run_ber_sweep(cfg)?),
        ExperimentKind::InterleaverCompare => {
            sweeps::interleaver_table(&run_interleaver_compare(cfg)?)
        }
        ExperimentKind::MacCompare => mac::mac_table(&run_mac_compare(cfg)?),
        ExperimentKind::SnrMap => run_snr_map(cfg)?,
        ExperimentKind::CodecTable => codec_table()?,
    })
}

/// Plot drawn for each experiment with `--plots`.
pub fn default_plot(kind: ExperimentKind) -> Option<PlotSpec> {
    let lines = |title: &str, x: &str, y: &str, series: &[&str], log_y| PlotSpec::Lines {
        title: title.into(),
        x: x.into(),
        y: y.into(),
        series: series.iter().map(|s| s.to_string()).collect(),
        log_y,
    };
    match kind {
        ExperimentKind::BerSweep => Some(lines(
            "BER vs Eb/N0",
            "snr_db",
            "ber",
            &["modulation", "code", "interleaver"],
            true,
        )),
        ExperimentKind::InterleaverCompare => Some(lines(
            "BER under burst noise",
            "burst_rate",
            "ber",
            &["interleaver"],
            true,
        )),
        ExperimentKind::MacCompare => Some(lines(
            "Delivered packets vs offered load",
            "offered_load",
            "delivered_norm",
            &["protocol", "n_nodes"],
            false,
        )),
        ExperimentKind::SnrMap => Some(PlotSpec::Heatmap {
            title: "Narrowband SNR".into(),
            x: "frequency_khz".into(),
            y: "distance_m".into(),
            value: "snr_db".into(),
        }),
        ExperimentKind::CodecTable => None,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
}

/// Runs `cfg` and writes `<out>/<experiment>.csv`, plus the SVG when
/// `plots` is set.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    plots: bool,
) -> Result<RunOutput, HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let table = run_table(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let csv_path = out.join(format!("{}.csv", cfg.experiment));
    std::fs::write(&csv_path, table.to_csv(&cfg.hash())).map_err(|e| io(&csv_path, e))?;
    let svg_path = match default_plot(cfg.experiment).filter(|_| plots) {
        Some(spec) => {
            let p = out.join(format!("{}.svg", cfg.experiment));
            emit_plot(&csv_path, &spec, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok(RunOutput {
        table,
        csv_path,
        svg_path,
    })
}
