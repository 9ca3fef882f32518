use phasemax_core::harness::{
    records_to_csv, run_sweep, run_trial, verify_lemmas, AnchorSpec, LemmaId, LemmaParams,
    LemmaReport, SweepConfig, TrialConfig, CSV_HEADER,
};

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let cut = line.rfind(',').unwrap();
            &line[..cut]
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn trivial_one_dimensional_trial() {
    let cfg = TrialConfig::new(1, 4, AnchorSpec::Synthetic { beta: 0.0 }, 0);
    let record = run_trial(&cfg);
    assert!(record.success, "status {}", record.status);
    assert!(record.rel_error_mod_sign <= 1e-8);
    assert_eq!(record.anchor_rel_error, 0.0);
}

#[test]
fn desk_scale_recovery_trial() {
    let cfg = TrialConfig::new(20, 200, AnchorSpec::Synthetic { beta: 0.0 }, 1);
    let record = run_trial(&cfg);
    assert!(record.success, "status {} rel_error {}", record.status, record.rel_error_mod_sign);
}

#[test]
fn trials_are_deterministic_except_wall_time() {
    let cfg = TrialConfig::new(10, 60, AnchorSpec::TruncatedSpectral, 9);
    let a = run_trial(&cfg);
    let b = run_trial(&cfg);
    assert_eq!(a.rel_error_mod_sign.to_bits(), b.rel_error_mod_sign.to_bits());
    assert_eq!(a.anchor_rel_error.to_bits(), b.anchor_rel_error.to_bits());
    assert_eq!(a.duality_gap.to_bits(), b.duality_gap.to_bits());
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.status, b.status);
    assert_eq!(a.success, b.success);
}

#[test]
fn single_cell_sweep_summary_matches_record() {
    let sw = SweepConfig::new(vec![5], vec![4.0], AnchorSpec::Synthetic { beta: 0.0 }, 1, 3);
    let result = run_sweep(&sw).unwrap();
    assert_eq!(result.records.len(), 1);
    let cell = &result.summary.cells[0];
    assert_eq!(cell.trials, 1);
    let expected = if result.records[0].success { 1.0 } else { 0.0 };
    assert_eq!(cell.rate, expected);
}

#[test]
fn sweep_csv_is_reproducible() {
    let sw = SweepConfig::new(
        vec![6, 8],
        vec![3.0, 5.0],
        AnchorSpec::Synthetic { beta: 0.3 },
        3,
        17,
    );
    let a = records_to_csv(&run_sweep(&sw).unwrap().records);
    let b = records_to_csv(&run_sweep(&sw).unwrap().records);
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
    assert!(a.starts_with(CSV_HEADER));
}

#[test]
fn parallel_equals_serial() {
    let mut sw = SweepConfig::new(
        vec![8],
        vec![4.0, 6.0],
        AnchorSpec::TruncatedSpectral,
        4,
        23,
    );
    sw.threads = 1;
    let serial = run_sweep(&sw).unwrap();
    sw.threads = 4;
    let parallel = run_sweep(&sw).unwrap();
    assert_eq!(
        strip_wall_time(&records_to_csv(&serial.records)),
        strip_wall_time(&records_to_csv(&parallel.records))
    );
}

#[test]
fn summary_rates_recomputable_from_records() {
    let sw = SweepConfig::new(
        vec![6],
        vec![2.0, 5.0],
        AnchorSpec::Synthetic { beta: 0.2 },
        5,
        29,
    );
    let result = run_sweep(&sw).unwrap();
    for (idx, cell) in result.summary.cells.iter().enumerate() {
        let chunk = &result.records[idx * sw.trials..(idx + 1) * sw.trials];
        let successes = chunk.iter().filter(|r| r.success).count();
        assert_eq!(cell.successes, successes);
        assert_eq!(cell.rate, successes as f64 / sw.trials as f64);
    }
}

#[test]
fn anchor_failure_is_a_record_not_a_crash() {
    // beta outside [0, 2) fails anchor construction inside the pipeline
    let cfg = TrialConfig::new(4, 16, AnchorSpec::Synthetic { beta: 2.5 }, 0);
    let record = run_trial(&cfg);
    assert!(!record.success);
    assert!(record.status.starts_with("error:"), "status {}", record.status);
}

#[test]
fn lemma_dispatch_smoke() {
    let params = LemmaParams {
        n: 10,
        m: 400,
        seeds: 3,
        trials: 10_000,
        thetas: vec![0.0, 1.0],
        probes: 5,
        minimizer_steps: 5,
        ..LemmaParams::default()
    };

    match verify_lemmas(LemmaId::Isometry, &params, 1).unwrap() {
        LemmaReport::Isometry(r) => {
            assert_eq!(r.deviations.len(), 3);
            assert!(r.max_deviation < 1.0);
        }
        _ => panic!("wrong report"),
    }
    match verify_lemmas(LemmaId::L1LowerBound, &params, 2).unwrap() {
        LemmaReport::L1LowerBound(r) => assert_eq!(r.trials, 5),
        _ => panic!("wrong report"),
    }
    match verify_lemmas(LemmaId::Expectation, &params, 3).unwrap() {
        LemmaReport::Expectation(r) => {
            assert_eq!(r.points.len(), 2);
            assert!(r.all_pass);
        }
        _ => panic!("wrong report"),
    }
}

#[test]
fn unwritable_output_fails_before_compute() {
    let path = std::path::Path::new("/nonexistent-dir/out.csv");
    assert!(phasemax_core::harness::ensure_writable(path).is_err());
}
