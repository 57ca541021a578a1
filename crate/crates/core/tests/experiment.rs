mod common;

use sdmm::codec::SchemeTag;
use sdmm::experiment::{
    emit_csv, emit_json, emit_trials_csv, mean_error_vs_delta, read_csv, run_sweep, CellSelector, ExperimentConfig,
    SchemeEntry, SweepTable, CSV_HEADER,
};
use sdmm::linalg::EvaluationPoints;
use sdmm::security::{calibrate_sigma2, Dims};
use sdmm::Error;

fn config(trials: usize, deltas: Vec<f64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        vec![
            SchemeEntry::MatDot { p: 2, x: 2, n_servers: None },
            SchemeEntry::Gasp { m: 2, n: 1, x: 1, n_servers: None },
        ],
        deltas,
    );
    c.dims = Dims::square(6);
    c.trials = trials;
    c.seed = 1234;
    c
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(3, vec![1e-2]);
    c.schemes.truncate(1);
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_sweep(&c).unwrap(), &p1).unwrap();
    emit_csv(&run_sweep(&c).unwrap(), &p2).unwrap();
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(b1, b2);
    assert_eq!(String::from_utf8(b1).unwrap().lines().count(), 2);
}

#[test]
fn thread_count_does_not_change_the_table() {
    let c = config(8, vec![1e-3, 1e-1]);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let serial = pool(1).install(|| run_sweep(&c).unwrap());
    let parallel = pool(4).install(|| run_sweep(&c).unwrap());
    let strip = |t: &SweepTable| {
        t.trials
            .iter()
            .map(|x| (x.cell, x.trial, x.record.seed, x.record.abs_error, x.record.decoding_set.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&serial), strip(&parallel));
    assert_eq!(serial.cells, parallel.cells);
}

#[test]
fn empty_table_is_header_only_and_parse_back_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(4, vec![1e-3, 3e-2]);
    let empty = SweepTable::empty(&c);
    let path = dir.path().join("empty.csv");
    emit_csv(&empty, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().trim_end(), CSV_HEADER.join(","));
    assert!(read_csv(&path).unwrap().is_empty());

    let table = run_sweep(&c).unwrap();
    emit_csv(&table, &path).unwrap();
    let rows = read_csv(&path).unwrap();
    assert_eq!(rows.len(), table.cells.len());
    for (row, cell) in rows.iter().zip(&table.cells) {
        assert_eq!(row.scheme, cell.cell.params.tag().name());
        assert_eq!(row.n, cell.cell.params.n_servers());
        assert_eq!(row.delta_bits.to_bits(), cell.cell.delta_bits.to_bits());
        assert_eq!(row.sigma2.to_bits(), cell.sigma2.to_bits());
        assert_eq!(row.mean_err.to_bits(), cell.mean_err.to_bits());
        assert_eq!(row.median_err.to_bits(), cell.median_err.to_bits());
        assert_eq!(row.std_err.to_bits(), cell.std_err.to_bits());
        assert_eq!(row.mean_cond.to_bits(), cell.mean_cond.to_bits());
    }
}

#[test]
fn sigma2_is_the_calibrated_value() {
    let mut c = config(2, vec![1e-3, 1e-2]);
    c.stragglers = vec![0, 1];
    let table = run_sweep(&c).unwrap();
    for s in &table.cells {
        let noise = calibrate_sigma2(
            s.cell.delta_bits,
            c.dims,
            &s.cell.params,
            &EvaluationPoints::canonical(s.cell.params.n_servers()),
            1.0,
            1.0,
            c.strategy,
        )
        .unwrap();
        assert_eq!(noise.sigma2.to_bits(), s.sigma2.to_bits());
        assert!(s.mean_err >= 0.0 && s.mean_cond >= 1.0 - 1e-12);
    }
}

#[test]
fn error_shrinks_as_the_budget_grows() {
    let table = run_sweep(&config(30, vec![1e-4, 1e-3, 1e-2, 1e-1])).unwrap();
    for scheme in [SchemeTag::MatDot, SchemeTag::Gasp] {
        let sel = CellSelector {
            scheme: Some(scheme),
            ..Default::default()
        };
        let series = mean_error_vs_delta(&table, &sel).unwrap();
        assert_eq!(series.len(), 4);
        for w in series.windows(2) {
            assert!(w[0].delta_bits < w[1].delta_bits);
            assert!(w[1].mean_err <= w[0].mean_err + 2.0 * (w[0].sem.powi(2) + w[1].sem.powi(2)).sqrt());
        }
    }
    let missing = CellSelector {
        x: Some(7),
        ..Default::default()
    };
    assert!(matches!(mean_error_vs_delta(&table, &missing), Err(Error::UnknownCell(_))));
}

#[test]
fn json_and_trial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(2, vec![1e-2]);
    c.output.json_trials = true;
    let table = run_sweep(&c).unwrap();
    let json_path = dir.path().join("t.json");
    emit_json(&table, &json_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(v["normalization"]["input"], "real_gaussian");
    assert_eq!(v["normalization"]["input_entries"], 72);
    assert_eq!(v["cells"][0]["trial_records"].as_array().unwrap().len(), 2);

    let trials_path = dir.path().join("trials.csv");
    emit_trials_csv(&table, &trials_path).unwrap();
    assert_eq!(std::fs::read_to_string(&trials_path).unwrap().lines().count(), 1 + 2 * 2);

    let bad = dir.path().join("missing").join("x.csv");
    match emit_csv(&table, &bad) {
        Err(Error::File { path, .. }) => assert_eq!(path, bad),
        other => panic!("expected a file error, got {other:?}"),
    }
}
