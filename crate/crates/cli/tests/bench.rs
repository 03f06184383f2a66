use edl_cli::bench::{
    bench_ops, bench_sizes, default_registry, BenchOptions, RemoteCell, RemoteTarget, OPERATIONS,
};
use edl_cli::ClientError;
use edl_core::ckks::HeParams;
use edl_core::nn::ComputeGraph;

fn quick(ops: &[&str]) -> BenchOptions {
    BenchOptions {
        operations: ops.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
}

#[test]
fn registry_holds_every_operation() {
    let r = default_registry();
    let mut names: Vec<&str> = r.names();
    names.sort();
    let mut expected = OPERATIONS.to_vec();
    expected.sort();
    assert_eq!(names, expected);
    let err = bench_ops(
        &HeParams::insecure_test(5).unwrap(),
        ComputeGraph::reference(5, 1).unwrap(),
        None,
        &r,
        &quick(&["ct/ct"]),
    )
    .unwrap_err();
    assert!(err.to_string().contains("unknown bench operation `ct/ct`"));
}

#[test]
fn fewer_than_thirty_trials_rejected() {
    let options = BenchOptions {
        trials: 29,
        ..Default::default()
    };
    let err = bench_ops(
        &HeParams::insecure_test(5).unwrap(),
        ComputeGraph::reference(5, 1).unwrap(),
        None,
        &default_registry(),
        &options,
    )
    .unwrap_err();
    assert!(matches!(err, ClientError::Usage(_)));
}

#[test]
fn unreachable_server_gives_local_only_report() {
    let target = RemoteTarget {
        url: "http://127.0.0.1:9".into(),
        token: "t".into(),
        model_id: "m".into(),
    };
    let report = bench_ops(
        &HeParams::insecure_test(5).unwrap(),
        ComputeGraph::reference(5, 1).unwrap(),
        Some(&target),
        &default_registry(),
        &quick(&["encrypt", "ct+ct"]),
    )
    .unwrap();
    assert!(report.remote_error.is_some());
    assert_eq!(report.row("encrypt").unwrap().remote, RemoteCell::Absent);
    assert_eq!(report.row("ct+ct").unwrap().remote, RemoteCell::NotApplicable);
    assert!(report.rows.iter().all(|r| r.local.trials == 30 && r.local.mean_s > 0.0));
    assert!(report.to_table().contains("absent"));
}

/// Every number in the text table appears, identically formatted, in the
/// JSON form.
#[test]
fn text_and_json_agree() {
    let mut report = bench_ops(
        &HeParams::insecure_test(5).unwrap(),
        ComputeGraph::reference(5, 1).unwrap(),
        None,
        &default_registry(),
        &BenchOptions::default(),
    )
    .unwrap();
    report.sizes = bench_sizes(&[HeParams::insecure_test(2).unwrap()], 1).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let table = report.to_table();
    for row in json["rows"].as_array().unwrap() {
        let op = row["operation"].as_str().unwrap();
        let line = table.lines().find(|l| l.split_whitespace().next() == Some(op)).unwrap();
        let cells: Vec<&str> = line.split_whitespace().collect();
        let mean = row["local"]["mean_s"].as_f64().unwrap();
        let std = row["local"]["std_s"].as_f64().unwrap();
        assert_eq!(cells[1].parse::<f64>().unwrap(), mean, "{line}");
        assert_eq!(cells[2].parse::<f64>().unwrap(), std, "{line}");
        assert_eq!(cells[3], row["local"]["trials"].to_string());
    }
    let s = &report.sizes[0];
    let line = table.lines().rev().find(|l| l.trim_start().starts_with("1024")).unwrap();
    let cells: Vec<usize> = line.split_whitespace().map(|c| c.parse().unwrap()).collect();
    assert_eq!(
        cells,
        [
            s.poly_modulus_degree,
            s.vector_length,
            s.plaintext_bytes,
            s.ciphertext_bytes,
            s.level0_ciphertext_bytes,
            s.record_bytes
        ]
    );
    assert!(s.level0_ciphertext_bytes < s.ciphertext_bytes);
    assert!(s.ciphertext_bytes < s.record_bytes);
}
