use std::time::Duration;

use edl_cli::bench::loopback;
use edl_cli::client::{ApiClient, ClientOptions};
use edl_cli::pipeline::{decrypt_slots, encrypt_with};
use edl_cli::synth::{synth_csv, synthetic_spec};
use edl_cli::{decrypt_result, decrypt_result_with, encrypt_dataset, wrangle, ClientError, KeyStore};
use edl_core::ckks::HeParams;
use edl_core::nn::{ComputeGraph, SENTINEL};
use edl_core::wire::{serialize_record, Frame, Mode, Tag};
use edl_server::JobStatus;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn params() -> HeParams {
    HeParams::insecure_test(5).unwrap()
}

#[test]
fn own_record_decrypts_to_wrangled_values() {
    let dir = tempfile::tempdir().unwrap();
    let store = KeyStore::new(dir.path());
    let w = wrangle(&synth_csv(3, 12), &synthetic_spec()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let record = encrypt_dataset(&w, "herd", "farm-1", &params(), &store, &mut rng).unwrap();
    assert_eq!(record.ciphertexts.len(), w.windows.len() * 3);
    assert!(record.ciphertexts.iter().all(|c| c.level() == params().max_level()));
    assert!(record.secret_key.is_none());

    let (_, keys) = store.load("herd").unwrap();
    let slots = decrypt_slots(&record, &keys).unwrap();
    let expected = w.windows.iter().flat_map(|win| win.rows.iter());
    for (got, want) in slots.iter().zip(expected) {
        for (g, x) in got.iter().zip(want) {
            assert!((g - x).abs() < 1e-3);
        }
        assert!(got[want.len()..got.len() - 1].iter().all(|v| v.abs() < 1e-3));
        assert!((got[got.len() - 1] - SENTINEL).abs() < 1e-3);
    }

    let frame = Frame::decode(&serialize_record(&record, Mode::Transmission).unwrap()).unwrap();
    assert!(!frame.has(Tag::SecretKey));
}

#[test]
fn submission_timestamps_increase() {
    let dir = tempfile::tempdir().unwrap();
    let store = KeyStore::new(dir.path());
    let w = wrangle(&synth_csv(3, 3), &synthetic_spec()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let stamps: Vec<_> = (0..5)
        .map(|_| encrypt_dataset(&w, "herd", "o", &params(), &store, &mut rng).unwrap().submitted_at)
        .collect();
    assert!(stamps.windows(2).all(|p| p[0] < p[1]));
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let options = ClientOptions {
        timeout: Duration::from_secs(2),
        retries: 1,
        retry_delay: Duration::from_millis(10),
    };
    let client = ApiClient::new("http://127.0.0.1:9", "t", options).unwrap();
    assert!(matches!(client.health(), Err(ClientError::Transport(_))));
}

/// Loopback service, many windows so that the job is observable mid-run.
#[test]
fn service_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let keystore = KeyStore::new(dir.path().join("keys"));
    let spec = synthetic_spec();
    let graph = ComputeGraph::reference(spec.feature_names().len(), 11).unwrap();
    let (_server, target) = loopback(&dir.path().join("srv"), &graph, "ref", "tok").unwrap();
    let client = ApiClient::new(&target.url, "tok", ClientOptions::default()).unwrap();

    let w = wrangle(&synth_csv(8, 62), &spec).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let record = encrypt_dataset(&w, "herd", "farm-1", &params(), &keystore, &mut rng).unwrap();
    let dataset_id = client.submit(&serialize_record(&record, Mode::Transmission).unwrap()).unwrap();

    let listed = client.list(Some("farm-1")).unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].ciphertext_count, record.ciphertexts.len());
    assert_eq!(client.models().unwrap()[0].depth, 5);

    let job = client.infer(&dataset_id, "ref").unwrap();
    let mut seen_running = false;
    loop {
        let view = client.fetch(&job).unwrap();
        match view.job.status {
            JobStatus::Queued => {}
            JobStatus::Running => {
                seen_running = true;
                assert!(view.result.is_none());
            }
            JobStatus::Done => break,
            JobStatus::Failed => panic!("{:?}", view.job.error),
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    assert!(seen_running, "job finished before it could be observed running");
    let view = client.wait(&job, Duration::from_millis(10), Duration::from_secs(60)).unwrap();
    let result = view.result.unwrap();

    let report = decrypt_result(&result, &keystore).unwrap();
    assert_eq!(report.job_id.as_deref(), Some(job.as_str()));
    assert_eq!(report.source_dataset_id.as_deref(), Some(dataset_id.as_str()));
    assert_eq!(report.result_level, 0);
    assert_eq!(report.predictions.len(), w.windows.len());
    for (p, win) in report.predictions.iter().zip(&w.windows) {
        let clear = graph.predict(&win.rows).unwrap();
        assert!((p.value - clear).abs() < 1e-2, "window {}: {} vs {clear}", p.window, p.value);
    }

    // a different dataset's key under the same parameters
    let wrong = keystore.generate("other", &params(), &mut rng).unwrap();
    assert!(matches!(
        decrypt_result_with(&result, &wrong),
        Err(ClientError::SentinelMismatch { window: 0, .. })
    ));
    let empty = KeyStore::new(dir.path().join("none"));
    assert!(matches!(decrypt_result(&result, &empty), Err(ClientError::NoKeys(d)) if d == "herd"));

    match client.infer(&dataset_id, "missing") {
        Err(ClientError::Http { status: 404, body }) => assert!(body.contains("unknown model `missing`")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn shallow_chain_is_refused_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let graph = ComputeGraph::reference(5, 11).unwrap();
    let (_server, target) = loopback(dir.path(), &graph, "ref", "tok").unwrap();
    let client = ApiClient::new(&target.url, "tok", ClientOptions::default()).unwrap();
    let shallow = HeParams::insecure_test(4).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let keys = edl_core::ckks::keygen(&shallow, &mut rng).unwrap();
    let w = wrangle(&synth_csv(1, 4), &synthetic_spec()).unwrap();
    let record = encrypt_with(&w, "h", "o", &shallow, &keys, &mut rng).unwrap();
    let id = client.submit(&serialize_record(&record, Mode::Transmission).unwrap()).unwrap();
    match client.infer(&id, "ref") {
        Err(ClientError::Http { status: 409, body }) => assert!(body.contains("dense"), "{body}"),
        other => panic!("{other:?}"),
    }
}
