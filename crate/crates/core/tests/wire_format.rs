use chrono::{TimeZone, Utc};
use edl_core::ckks::{keygen, Ciphertext, CkksContext, HeParams, RnsPoly};
use edl_core::wire::{
    deserialize_ciphertext, deserialize_key_bundle, deserialize_public_key, deserialize_record, deserialize_relin_key,
    deserialize_values, read_params, serialize_ciphertext, serialize_key_bundle, serialize_public_key,
    serialize_record, serialize_relin_key, serialize_values, EncryptedRecord, Frame, Mode, Tag, WireError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn params() -> HeParams {
    HeParams::insecure_test(2).unwrap()
}

fn random_ct(seed: u64, level: usize, parts: usize, scale: f64) -> Ciphertext {
    let p = params();
    let ctx = CkksContext::new(&p).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let polys = (0..parts).map(|_| RnsPoly::uniform(&ctx, level, &mut rng)).collect();
    Ciphertext::from_parts(polys, scale, p.param_id()).unwrap()
}

fn record(with_secret: bool, cts: usize) -> EncryptedRecord {
    let p = params();
    let keys = keygen(&p, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
    let mut annotations = serde_json::Map::new();
    annotations.insert("note".into(), serde_json::json!("herd 4"));
    EncryptedRecord {
        dataset_name: "milk".into(),
        owner: "farm-a".into(),
        submitted_at: Utc.with_ymd_and_hms(2024, 5, 1, 12, 30, 0).unwrap(),
        window_length: 1,
        feature_count: 4,
        annotations,
        params: p.clone(),
        public_key: Some(keys.public_key.clone()),
        relin_key: Some(keys.relin_key.clone()),
        ciphertexts: (0..cts).map(|i| random_ct(i as u64, 2, 2, p.scale())).collect(),
        secret_key: with_secret.then_some(keys.secret_key),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ciphertexts_round_trip_bit_exact(seed in any::<u64>(), level in 0usize..=2, parts in 2usize..=3, log_scale in 1.0f64..50.0) {
        let ct = random_ct(seed, level, parts, log_scale.exp2());
        let bytes = serialize_ciphertext(&ct, &params()).unwrap();
        prop_assert_eq!(deserialize_ciphertext(&bytes, &params()).unwrap(), ct);
    }

    #[test]
    fn corrupted_ciphertext_frames_are_rejected(at in any::<prop::sample::Index>(), bit in 0u8..8) {
        let bytes = serialize_ciphertext(&random_ct(1, 0, 2, 2f64.powi(20)), &params()).unwrap();
        let mut bad = bytes.clone();
        let i = at.index(bad.len());
        bad[i] ^= 1 << bit;
        prop_assert!(deserialize_ciphertext(&bad, &params()).is_err());
        prop_assert!(deserialize_ciphertext(&bytes[..i], &params()).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let mut framed = b"EDLS".to_vec();
        framed.extend(&bytes);
        for input in [&bytes, &framed] {
            let _ = Frame::decode(input);
            let _ = deserialize_record(input, Mode::Transmission);
            let _ = deserialize_ciphertext(input, &params());
        }
    }
}

#[test]
fn records_round_trip_in_local_mode() {
    for i in 0..100u64 {
        let mut r = record(i % 2 == 0, 1 + (i as usize % 3));
        r.submitted_at += chrono::Duration::milliseconds(i as i64 * 1234);
        let bytes = serialize_record(&r, Mode::Local).unwrap();
        assert_eq!(deserialize_record(&bytes, Mode::Local).unwrap(), r);
    }
}

#[test]
fn transmission_strips_and_rejects_secret_keys() {
    let r = record(true, 2);
    let sent = serialize_record(&r, Mode::Transmission).unwrap();
    assert!(!Frame::decode(&sent).unwrap().has(Tag::SecretKey));
    let got = deserialize_record(&sent, Mode::Transmission).unwrap();
    assert_eq!(got.secret_key, None);
    assert_eq!(got.ciphertexts, r.ciphertexts);

    // A client that forgets to strip: append the secret-key section by hand.
    let local = Frame::decode(&serialize_record(&r, Mode::Local).unwrap()).unwrap();
    let mut adversarial = Frame::decode(&sent).unwrap();
    for s in local.sections().iter().filter(|s| s.tag == Tag::SecretKey.code()) {
        adversarial.push_raw(s.tag, s.body.clone());
    }
    let bytes = adversarial.encode();
    assert!(matches!(deserialize_record(&bytes, Mode::Transmission), Err(WireError::SecretKeyPresent)));
    assert!(deserialize_record(&bytes, Mode::Local).unwrap().secret_key.is_some());
}

#[test]
fn truncated_records_are_rejected() {
    let bytes = serialize_record(&record(false, 1), Mode::Transmission).unwrap();
    for cut in (0..bytes.len()).step_by(997).chain([bytes.len() - 1]) {
        assert!(deserialize_record(&bytes[..cut], Mode::Transmission).is_err(), "cut {cut}");
    }
}

#[test]
fn invalid_records_are_refused() {
    let mut r = record(false, 1);
    r.dataset_name.clear();
    assert!(serialize_record(&r, Mode::Local).is_err());
    let mut r = record(false, 1);
    r.ciphertexts.clear();
    assert!(serialize_record(&r, Mode::Local).is_err());
    let mut r = record(false, 3);
    r.window_length = 2;
    assert!(serialize_record(&r, Mode::Local).is_err());
}

#[test]
fn unknown_sections_are_skipped() {
    let bytes = serialize_ciphertext(&random_ct(9, 1, 2, 1e6), &params()).unwrap();
    let mut f = Frame::decode(&bytes).unwrap();
    f.push_raw(0x7777, b"future".to_vec());
    assert_eq!(deserialize_ciphertext(&f.encode(), &params()).unwrap(), random_ct(9, 1, 2, 1e6));
}

#[test]
fn lower_levels_serialize_smaller() {
    let p = params();
    let sizes: Vec<usize> = (0..=2)
        .map(|l| serialize_ciphertext(&random_ct(1, l, 2, 1e6), &p).unwrap().len())
        .collect();
    assert!(sizes[0] < sizes[1] && sizes[1] < sizes[2], "{sizes:?}");
}

#[test]
fn keys_round_trip() {
    let p = params();
    let keys = keygen(&p, &mut ChaCha20Rng::seed_from_u64(8)).unwrap();
    let (p2, back) = deserialize_key_bundle(&serialize_key_bundle(&keys, &p).unwrap()).unwrap();
    assert_eq!((p2, back), (p.clone(), keys.clone()));
    let (_, pk) = deserialize_public_key(&serialize_public_key(&keys.public_key, &p).unwrap()).unwrap();
    assert_eq!(pk, keys.public_key);
    let (_, rk) = deserialize_relin_key(&serialize_relin_key(&keys.relin_key, &p).unwrap()).unwrap();
    assert_eq!(rk, keys.relin_key);
    assert_eq!(read_params(&serialize_public_key(&pk, &p).unwrap()).unwrap(), p);
}

#[test]
fn parameter_mismatch_is_reported() {
    let other = HeParams::insecure_test(3).unwrap();
    let bytes = serialize_ciphertext(&random_ct(1, 0, 2, 1e6), &params()).unwrap();
    assert!(matches!(deserialize_ciphertext(&bytes, &other), Err(WireError::ParamMismatch { .. })));
    assert!(serialize_ciphertext(&random_ct(1, 0, 2, 1e6), &other).is_err());
}

#[test]
fn values_round_trip() {
    let v = vec![0.25, -1.5, f64::MIN_POSITIVE, 1e300];
    assert_eq!(deserialize_values(&serialize_values(&v)).unwrap(), v);
}
