use edl_cli::{ClientError, KeyStore};
use edl_core::ckks::HeParams;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[test]
fn generate_load_and_refuse_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let store = KeyStore::new(dir.path());
    let params = HeParams::insecure_test(2).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    assert!(!store.contains("herd-a"));
    let keys = store.generate("herd-a", &params, &mut rng).unwrap();
    assert!(dir.path().join("herd-a").join("keys.edls").is_file());
    let (loaded_params, loaded) = store.load("herd-a").unwrap();
    assert_eq!(loaded_params, params);
    assert_eq!(loaded, keys);
    assert!(matches!(
        store.generate("herd-a", &params, &mut rng),
        Err(ClientError::KeysExist(_))
    ));
    assert_eq!(store.load_or_generate("herd-a", &params, &mut rng).unwrap(), keys);
    let other = HeParams::insecure_test(3).unwrap();
    assert!(matches!(
        store.load_or_generate("herd-a", &other, &mut rng),
        Err(ClientError::Usage(_))
    ));
}

#[test]
fn missing_keys_name_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let err = KeyStore::new(dir.path()).load("herd-b").unwrap_err();
    assert!(matches!(&err, ClientError::NoKeys(d) if d == "herd-b"));
    assert_eq!(err.to_string(), "cannot decrypt: no keys for dataset `herd-b` in the keystore");
}

#[test]
fn dataset_names_cannot_escape_the_root() {
    let store = KeyStore::new("/nonexistent");
    for bad in ["", "..", "a/b", "../x", "a b"] {
        assert!(matches!(store.path_for(bad), Err(ClientError::Usage(_))), "{bad:?}");
    }
}
