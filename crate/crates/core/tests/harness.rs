use uwacomm::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.trials = 1;
    cfg.ber_sweep.info_bits_per_trial = 500;
    cfg.ber_sweep.snr_db = vec![0.0, 6.0];
    cfg.interleaver_compare.codewords_per_frame = 24;
    cfg.interleaver_compare.burst_rates_hz = vec![0.0, 0.1];
    cfg.mac.node_counts = vec![3];
    cfg.mac.offered_loads = vec![0.05];
    cfg.resolve().unwrap()
}

#[test]
fn csv_schemas_and_row_counts() {
    let cases = [
        (
            ExperimentKind::BerSweep,
            "snr_db,modulation,code,interleaver,ber,bits_simulated,ci_low,ci_high",
            2 * 2 * 3,
        ),
        (
            ExperimentKind::InterleaverCompare,
            "interleaver,burst_rate,ber,codeword_failure_rate",
            5 * 2,
        ),
        (
            ExperimentKind::MacCompare,
            "protocol,n_nodes,offered_load,delivered_norm,delay_avg,energy_norm",
            4,
        ),
        (
            ExperimentKind::SnrMap,
            "distance_m,frequency_khz,snr_db",
            400,
        ),
        (ExperimentKind::CodecTable, "k,t,g_octal", 4),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (kind, header, rows) in cases {
        let cfg = small(kind);
        let out = run_experiment(&cfg, dir.path(), true).unwrap();
        let text = std::fs::read_to_string(&out.csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# config-hash: sha256:{}", cfg.hash())
        );
        assert_eq!(lines.next().unwrap(), header, "{kind}");
        assert_eq!(lines.count(), rows, "{kind}");
        assert_eq!(out.svg_path.is_some(), kind != ExperimentKind::CodecTable);
    }
}

#[test]
fn conv_names_are_quoted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(
        &small(ExperimentKind::InterleaverCompare),
        dir.path(),
        false,
    )
    .unwrap();
    let text = std::fs::read_to_string(out.csv_path).unwrap();
    assert!(text.contains("\"conv:16,1\",0,"), "{text}");
}

#[test]
fn config_changes_change_hash() {
    let a = small(ExperimentKind::SnrMap);
    let mut b = a.clone();
    b.snr_map.source_level_db += 1.0;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash(), small(ExperimentKind::SnrMap).hash());
}
