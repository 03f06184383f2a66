use edl_core::backend::{Backend, BackendRegistry, CkksBackend, ReferenceBackend, Tensor};
use edl_core::ckks::{decode, encode, keygen, CkksContext, Decryptor, Encryptor, HeError, HeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Pair {
    params: HeParams,
    ckks: CkksBackend,
    reference: ReferenceBackend,
    enc: Encryptor,
    dec: Decryptor,
    rng: ChaCha20Rng,
}

impl Pair {
    fn new(levels: usize) -> Self {
        let params = HeParams::insecure_test(levels).unwrap();
        let ctx = CkksContext::new(&params).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let keys = keygen(&params, &mut rng).unwrap();
        Self {
            ckks: CkksBackend::new(&params, Some(&keys.relin_key)).unwrap(),
            reference: ReferenceBackend::new(&params).unwrap(),
            enc: Encryptor::new(ctx.clone(), &keys.public_key).unwrap(),
            dec: Decryptor::new(ctx, &keys.secret_key).unwrap(),
            params,
            rng,
        }
    }

    fn inputs(&mut self, values: &[f64]) -> (Tensor, Tensor) {
        let ctx = CkksContext::new(&self.params).unwrap();
        let pt = encode(&ctx, values, self.params.scale(), self.params.max_level()).unwrap();
        let ct = self.enc.encrypt(&pt, &mut self.rng).unwrap();
        (Tensor::Encrypted(ct), self.reference.fresh(values).unwrap())
    }

    fn decrypt(&self, t: &Tensor) -> Vec<f64> {
        let ctx = CkksContext::new(&self.params).unwrap();
        let ct = t.clone().into_ciphertext().unwrap();
        decode(&ctx, &self.dec.decrypt(&ct).unwrap()).unwrap()
    }

    fn random(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }
}

fn assert_paired(p: &Pair, enc: &Tensor, clear: &Tensor, tol: f64) {
    assert_eq!(enc.level(), clear.level());
    assert!((enc.scale() - clear.scale()).abs() <= 1e-12 * clear.scale());
    let got = p.decrypt(enc);
    let want = clear.as_clear().unwrap().values();
    let err = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < tol, "max error {err}");
}

#[test]
fn reference_multiplies_exactly() {
    let r = ReferenceBackend::new(&HeParams::insecure_test(2).unwrap()).unwrap();
    let prod = r.mul(&r.fresh(&[2.0]).unwrap(), &r.fresh(&[3.0]).unwrap()).unwrap();
    assert_eq!(prod.as_clear().unwrap().values()[0], 6.0);
    assert_eq!(prod.level(), 1);
}

#[test]
fn every_operation_agrees_with_reference() {
    let mut p = Pair::new(3);
    let (va, vb, vc) = (p.random(512), p.random(512), p.random(512));
    let (ea, ra) = p.inputs(&va);
    let (eb, rb) = p.inputs(&vb);
    let run = |b: &dyn Backend, x: &Tensor, y: &Tensor| -> Vec<Tensor> {
        let sum = b.add(x, y).unwrap();
        let shifted = b.add_plain(&sum, &vc).unwrap();
        let prod = b.mul(&shifted, y).ok();
        let prod = prod.unwrap_or_else(|| b.mul(&shifted, &b.mod_switch_to(y, shifted.level()).unwrap()).unwrap());
        let half = b.mul_plain(&prod, &[0.5; 512], None).unwrap();
        let aimed = b.mul_plain(&b.mod_switch_to(x, prod.level()).unwrap(), &[2.0; 512], Some(half.scale())).unwrap();
        let joined = b.add(&half, &aimed).unwrap();
        let low = b.mod_switch_to(&joined, 0).unwrap();
        vec![sum, shifted, prod, half, aimed, joined, low]
    };
    let enc = run(&p.ckks, &ea, &eb);
    let clear = run(&p.reference, &ra, &rb);
    for (e, c) in enc.iter().zip(&clear) {
        assert_paired(&p, e, c, 1e-3);
    }
    assert_eq!(clear.last().unwrap().level(), 0);
}

#[test]
fn reference_raises_the_same_errors() {
    let mut p = Pair::new(2);
    let v = p.random(8);
    let (e, r) = p.inputs(&v);
    let cases: Vec<(&str, Box<dyn Fn(&dyn Backend, &Tensor) -> Result<Tensor, HeError>>)> = vec![
        ("level mismatch", Box::new(|b, x| b.add(x, &b.mod_switch_to(x, 1)?))),
        ("scale mismatch", Box::new(|b, x| {
            let y = b.mul_plain(x, &[1.0], Some(x.scale() * 3.0))?;
            b.add(&b.mod_switch_to(x, y.level())?, &y)
        })),
        ("out of levels", Box::new(|b, x| {
            let y = b.mod_switch_to(x, 0)?;
            b.mul(&y, &y)
        })),
        ("plain out of levels", Box::new(|b, x| b.mul_plain(&b.mod_switch_to(x, 0)?, &[1.0], None))),
        ("rescale at bottom", Box::new(|b, x| b.rescale(&b.mod_switch_to(x, 0)?))),
        ("switch up", Box::new(|b, x| b.mod_switch_to(&b.mod_switch_to(x, 0)?, 1))),
        ("encoding overflow", Box::new(|b, x| b.add_plain(x, &[1e12]))),
        ("too many slots", Box::new(|b, x| b.add_plain(x, &vec![0.0; 513]))),
    ];
    for (label, case) in cases {
        let got = case(&p.ckks, &e).expect_err(label);
        let want = case(&p.reference, &r).expect_err(label);
        assert_eq!(
            std::mem::discriminant(&got),
            std::mem::discriminant(&want),
            "{label}: {got} vs {want}"
        );
        assert_eq!(got.to_string(), want.to_string(), "{label}");
    }
}

#[test]
fn backends_reject_foreign_tensors() {
    let mut p = Pair::new(2);
    let (e, r) = p.inputs(&[1.0]);
    assert!(matches!(p.ckks.add(&r, &r), Err(HeError::BackendMismatch { .. })));
    assert!(matches!(p.reference.add(&e, &e), Err(HeError::BackendMismatch { .. })));
}

#[test]
fn registry_builds_backends_by_name() {
    let params = HeParams::insecure_test(2).unwrap();
    let keys = keygen(&params, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let mut registry = BackendRegistry::default();
    assert_eq!(registry.names(), vec!["ckks", "reference"]);
    for name in ["ckks", "reference"] {
        let b = registry.create(name, &params, Some(&keys.relin_key)).unwrap();
        assert_eq!(b.name(), name);
    }
    assert!(registry.create("gpu", &params, None).is_err());
    assert!(registry.register("reference", |p, _| Ok(Box::new(ReferenceBackend::new(p)?))).is_err());
    registry
        .register("plain", |p, _| Ok(Box::new(ReferenceBackend::new(p)?)))
        .unwrap();
    assert_eq!(registry.create("plain", &params, None).unwrap().name(), "reference");
}
