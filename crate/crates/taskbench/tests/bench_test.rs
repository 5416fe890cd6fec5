use taskbench::{from_csv, generate_synthetic, metric_fm, to_csv, BenchConfig};

#[test]
fn generator_is_deterministic_per_seed() {
    let a = generate_synthetic(42, 20, 12).unwrap();
    let b = generate_synthetic(42, 20, 12).unwrap();
    assert_eq!(to_csv(&a), to_csv(&b));
    let c = generate_synthetic(43, 20, 12).unwrap();
    assert_ne!(to_csv(&a), to_csv(&c));
}

#[test]
fn pv_is_zero_at_night() {
    let ds = generate_synthetic(7, 60, 40).unwrap();
    for h in 0..ds.n_hours() {
        let hour = h % 24;
        if !(6..18).contains(&hour) {
            assert_eq!(ds.pv[h], 0.0, "hour {hour}");
            assert_eq!(ds.irradiance[h], 0.0, "hour {hour}");
        }
    }
}

#[test]
fn price_distribution_has_heavy_tails() {
    // Excess kurtosis of the hourly price over 400 usable days.
    let ds = generate_synthetic(7, 400, 200).unwrap();
    let xs = &ds.price;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let kurtosis = m4 / (m2 * m2);
    assert!(kurtosis > 3.0, "kurtosis {kurtosis}");
    assert!(xs.iter().all(|p| *p > 0.0));
}

#[test]
fn csv_round_trips() {
    let ds = generate_synthetic(11, 20, 12).unwrap();
    let text = to_csv(&ds);
    let back = from_csv(&text, ds.train_days, ds.test_days).unwrap();
    assert_eq!(ds.price, back.price);
    assert_eq!(ds.load, back.load);
    assert_eq!(ds.pv, back.pv);
    assert_eq!(ds.irradiance, back.irradiance);
}

#[test]
fn csv_gap_is_reported_with_its_timestamp() {
    let ds = generate_synthetic(11, 20, 12).unwrap();
    let text = to_csv(&ds);
    let mut lines: Vec<&str> = text.lines().collect();
    let removed = lines.remove(30); // drop one hour
    let _ = removed;
    let gapped = lines.join("\n");
    let err = from_csv(&gapped, ds.train_days, ds.test_days).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("gap before"), "{msg}");
    assert!(msg.contains("T"), "message should name the timestamp: {msg}");
}

#[test]
fn csv_split_supports_benchmark_protocol() {
    // 402 training plus 400 test days parse into the configured split.
    let ds = generate_synthetic(3, 802, 402).unwrap();
    let text = to_csv(&ds);
    let back = from_csv(&text, 402, 400).unwrap();
    assert_eq!(back.train_days, 402);
    assert_eq!(back.test_days, 400);
    back.validate(32).unwrap();
}

#[test]
fn single_task_sbl_stream_shape() {
    let mut cfg = BenchConfig::default();
    cfg.tasks = vec![1];
    cfg.modes = vec![dfcl::TrainMode::Sbl];
    cfg.seeds = vec![5];
    cfg.train_days = 16;
    cfg.test_days = 4;
    cfg.hyper.pretrain_epochs = 3;
    cfg.hyper.epochs = 3;
    cfg.memory_truth = 4;
    cfg.memory_noisy = 2;
    cfg.transfer_eval = false;
    let report = taskbench::run_stream(cfg, None).unwrap();
    assert_eq!(report.summaries.len(), 1);
    let s = &report.summaries[0];
    assert_eq!(s.checkpoint, 0);
    assert_eq!(s.fm, 0.0);
    assert_eq!(report.records.len(), 1);
    assert!(report.records[0].mean_cost > 0.0);
    assert!(report.aborted_modes.is_empty());
}

#[test]
fn fm_history_wiring_matches_hand_arithmetic() {
    let hist = vec![vec![100.0], vec![105.0, 60.0], vec![112.0, 58.0, 30.0]];
    // Task 0: best of {100, 105} = 100, now 112 -> 12.
    // Task 1: best of {60} = 60, now 58 -> -2. FM = 5.
    assert!((metric_fm(&hist).unwrap() - 5.0).abs() < 1e-12);
}
