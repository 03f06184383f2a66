use std::sync::Arc;

use edl_core::ckks::{
    decode, encode, keygen, CkksContext, Ciphertext, Decryptor, Encryptor, Evaluator, HeError,
    HeParams, KeyBundle, RnsPoly,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Fixture {
    ctx: Arc<CkksContext>,
    keys: KeyBundle,
    enc: Encryptor,
    dec: Decryptor,
    eval: Evaluator,
    rng: ChaCha20Rng,
}

impl Fixture {
    fn new(levels: usize) -> Self {
        let params = HeParams::insecure_test(levels).unwrap();
        let ctx = CkksContext::new(&params).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let keys = keygen(&params, &mut rng).unwrap();
        let enc = Encryptor::new(ctx.clone(), &keys.public_key).unwrap();
        let dec = Decryptor::new(ctx.clone(), &keys.secret_key).unwrap();
        let eval = Evaluator::new(ctx.clone(), Some(&keys.relin_key)).unwrap();
        Self { ctx, keys, enc, dec, eval, rng }
    }

    fn encrypt(&mut self, v: &[f64]) -> Ciphertext {
        let p = self.ctx.params();
        let pt = encode(&self.ctx, v, p.scale(), p.max_level()).unwrap();
        self.enc.encrypt(&pt, &mut self.rng).unwrap()
    }

    fn decrypt(&self, ct: &Ciphertext) -> Vec<f64> {
        decode(&self.ctx, &self.dec.decrypt(ct).unwrap()).unwrap()
    }

    fn random(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn keygen_is_deterministic() {
    let params = HeParams::insecure_test(2).unwrap();
    let a = keygen(&params, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
    let b = keygen(&params, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
    let c = keygen(&params, &mut ChaCha20Rng::seed_from_u64(6)).unwrap();
    assert_ne!(a.public_key, c.public_key);
}

#[test]
fn public_key_relation_is_small() {
    let f = Fixture::new(2);
    let ctx = &f.ctx;
    let top = ctx.max_level();
    let s = RnsPoly::from_signed(ctx, f.keys.secret_key.coeffs(), top);
    let mut e = f.keys.public_key.a().mul(&s, ctx);
    e.add_assign(f.keys.public_key.b(), ctx);
    let bound = 6.0 * ctx.params().error_sigma();
    for j in 0..=top {
        let m = ctx.modulus(j);
        assert!(e.residue(j).iter().all(|&c| (m.center(c) as f64).abs() <= bound));
    }
}

#[test]
fn roundtrip_and_randomized_encryption() {
    let mut f = Fixture::new(2);
    let v = f.random(512);
    let c1 = f.encrypt(&v);
    let c2 = f.encrypt(&v);
    assert_ne!(c1, c2);
    assert_eq!(c1.level(), 2);
    assert_eq!(c1.scale(), f.ctx.params().scale());
    assert!(max_err(&f.decrypt(&c1), &v) < 1e-6);
    let z = f.encrypt(&[]);
    assert!(f.decrypt(&z).iter().all(|x| x.abs() < 1e-6));
}

#[test]
fn addition_matches_slotwise_sum() {
    let mut f = Fixture::new(2);
    for _ in 0..10 {
        let (a, b) = (f.random(512), f.random(512));
        let (ca, cb) = (f.encrypt(&a), f.encrypt(&b));
        let sum = f.eval.add(&ca, &cb).unwrap();
        assert_eq!(sum, f.eval.add(&cb, &ca).unwrap());
        let want: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert!(max_err(&f.decrypt(&sum), &want) < 1e-3);
        let pt = encode(&f.ctx, &b, ca.scale(), ca.level()).unwrap();
        assert!(max_err(&f.decrypt(&f.eval.add_plain(&ca, &pt).unwrap()), &want) < 1e-3);
        let diff = f.eval.sub(&ca, &ca).unwrap();
        assert!(f.decrypt(&diff).iter().all(|x| x.abs() < 1e-6));
    }
}

#[test]
fn multiplication_consumes_one_level() {
    let mut f = Fixture::new(2);
    let c2 = f.encrypt(&[2.0]);
    let c3 = f.encrypt(&[3.0]);
    let prod = f.eval.mul(&c2, &c3).unwrap();
    assert_eq!(prod.level(), 1);
    assert_eq!(prod.parts().len(), 2);
    assert!((f.decrypt(&prod)[0] - 6.0).abs() < 1e-2);
    assert!((prod.scale() / f.ctx.params().scale() - 1.0).abs() < 0.01);

    let v = f.random(512);
    let ct = f.encrypt(&v);
    let ones = f.encrypt(&vec![1.0; 512]);
    assert!(max_err(&f.decrypt(&f.eval.mul(&ct, &ones).unwrap()), &v) < 1e-3);
    let half = encode(&f.ctx, &[0.5; 512], f.ctx.params().scale(), ct.level()).unwrap();
    let halved: Vec<f64> = v.iter().map(|x| x * 0.5).collect();
    assert!(max_err(&f.decrypt(&f.eval.mul_plain(&ct, &half).unwrap()), &halved) < 1e-3);
}

#[test]
fn depth_is_bounded_by_the_chain() {
    let mut f = Fixture::new(2);
    let mut ct = f.encrypt(&[1.1]);
    for _ in 0..2 {
        let fresh = f.encrypt(&[1.0]);
        let other = f.eval.mod_switch_to(&fresh, ct.level()).unwrap();
        ct = f.eval.mul(&ct, &other).unwrap();
    }
    assert_eq!(ct.level(), 0);
    assert!((f.decrypt(&ct)[0] - 1.1).abs() < 1e-3);
    let err = f.eval.mul(&ct, &ct).unwrap_err();
    assert!(matches!(err, HeError::OutOfLevels { .. }));
    assert!(matches!(f.eval.rescale(&ct), Err(HeError::OutOfLevels { .. })));
}

#[test]
fn operand_errors() {
    let mut f = Fixture::new(2);
    let a = f.encrypt(&[1.0]);
    let low = f.eval.mod_switch_to(&a, 1).unwrap();
    assert!(matches!(f.eval.add(&a, &low), Err(HeError::LevelMismatch { left: 2, right: 1 })));
    assert!(matches!(f.eval.mod_switch_to(&low, 2), Err(HeError::InvalidSwitch { from: 1, to: 2 })));
    assert_eq!(f.eval.mod_switch_to(&a, 2).unwrap(), a);
    let sq = f.eval.mul(&a, &a).unwrap();
    let fresh = f.encrypt(&[1.0]);
    let b = f.eval.mod_switch_to(&fresh, 1).unwrap();
    assert!(matches!(f.eval.add(&sq, &b), Err(HeError::ScaleMismatch { .. })));
    let three = f.eval.multiply_no_relin(&a, &a).unwrap();
    assert_eq!(three.parts().len(), 3);
    assert!(matches!(f.dec.decrypt(&three), Err(HeError::NeedsRelinearization(3))));
    let relin = f.eval.relinearize(&three).unwrap();
    assert!((f.decrypt(&f.eval.rescale(&relin).unwrap())[0] - 1.0).abs() < 1e-3);
    let no_keys = Evaluator::new(f.ctx.clone(), None).unwrap();
    assert!(matches!(no_keys.mul(&a, &a), Err(HeError::MissingRelinKey)));

    let other = HeParams::insecure_test(3).unwrap();
    let other_ctx = CkksContext::new(&other).unwrap();
    let other_eval = Evaluator::new(other_ctx, None).unwrap();
    assert!(matches!(other_eval.add(&a, &a), Err(HeError::ParamMismatch)));
}

#[test]
fn modulus_switching_preserves_value_and_shrinks() {
    let mut f = Fixture::new(3);
    let v = f.random(512);
    let ct = f.encrypt(&v);
    let low = f.eval.mod_switch_to(&ct, 0).unwrap();
    assert_eq!(low.scale(), ct.scale());
    assert!(max_err(&f.decrypt(&low), &v) < 1e-3);
    assert!(low.parts()[0].residues().len() < ct.parts()[0].residues().len());
}
