use edl_core::ring::{ntt_forward, ntt_inverse, ntt_primes_below, NttTable, RingPoly};
use proptest::prelude::*;

/// Convolve, then fold with X^N = -1.
fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let q128 = q as u128;
    let mut acc = vec![0u128; n];
    let mut neg = vec![0u128; n];
    for i in 0..n {
        for j in 0..n {
            let p = a[i] as u128 * b[j] as u128 % q128;
            if i + j < n {
                acc[i + j] = (acc[i + j] + p) % q128;
            } else {
                neg[i + j - n] = (neg[i + j - n] + p) % q128;
            }
        }
    }
    acc.iter().zip(&neg).map(|(&x, &y)| ((x + q128 - y) % q128) as u64).collect()
}

const SMALL_Q: u64 = 7681;

fn big_q() -> u64 {
    ntt_primes_below(60, 16, 1)[0]
}

fn poly_strategy(n: usize, q: u64) -> impl Strategy<Value = RingPoly> {
    prop::collection::vec(0..q, n).prop_map(move |c| RingPoly::new(c, q).unwrap())
}

fn triple(q: u64) -> impl Strategy<Value = (RingPoly, RingPoly, RingPoly)> {
    prop::sample::select(vec![2usize, 4, 8, 16]).prop_flat_map(move |n| {
        (poly_strategy(n, q), poly_strategy(n, q), poly_strategy(n, q))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn addition_laws((a, b, c) in triple(SMALL_Q)) {
        let zero = RingPoly::zero(a.degree(), SMALL_Q).unwrap();
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&zero).unwrap(), a.clone());
        prop_assert!(a.add(&a.negate()).unwrap().is_zero());
    }

    #[test]
    fn multiplication_laws((a, b, c) in triple(SMALL_Q)) {
        let one = RingPoly::one(a.degree(), SMALL_Q).unwrap();
        let ab = a.mul(&b).unwrap();
        prop_assert_eq!(&ab, &b.mul(&a).unwrap());
        prop_assert_eq!(ab.mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&one).unwrap(), a.clone());
        prop_assert_eq!(
            a.add(&b).unwrap().mul(&c).unwrap(),
            a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap()
        );
    }

    #[test]
    fn product_matches_schoolbook((a, b, _) in triple(SMALL_Q)) {
        let expected = schoolbook(a.coeffs(), b.coeffs(), SMALL_Q);
        prop_assert_eq!(a.mul(&b).unwrap().into_coeffs(), expected);
    }

    #[test]
    fn product_matches_schoolbook_near_62_bits((a, b, c) in triple(big_q())) {
        let q = big_q();
        prop_assert_eq!(a.mul(&b).unwrap().into_coeffs(), schoolbook(a.coeffs(), b.coeffs(), q));
        prop_assert_eq!(
            a.add(&b).unwrap().mul(&c).unwrap(),
            a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap()
        );
    }

    #[test]
    fn ntt_round_trip(a in prop::sample::select(vec![2usize, 8, 64, 256]).prop_flat_map(|n| poly_strategy(n, SMALL_Q))) {
        let table = NttTable::new(a.degree(), SMALL_Q).unwrap();
        let evals = ntt_forward(&a, &table).unwrap();
        prop_assert_eq!(ntt_inverse(&evals, &table).unwrap(), a);
    }
}

#[test]
fn pointwise_path_equals_schoolbook_q97() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(97);
    for n in [4usize, 8] {
        let table = NttTable::new(n, 97).unwrap();
        let m = table.modulus();
        for _ in 0..200 {
            let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..97)).collect();
            let b: Vec<u64> = (0..n).map(|_| rng.random_range(0..97)).collect();
            let ea = ntt_forward(&RingPoly::new(a.clone(), 97).unwrap(), &table).unwrap();
            let eb = ntt_forward(&RingPoly::new(b.clone(), 97).unwrap(), &table).unwrap();
            let prod: Vec<u64> = ea.iter().zip(&eb).map(|(&x, &y)| m.mul(x, y)).collect();
            let c = ntt_inverse(&prod, &table).unwrap();
            assert_eq!(c.coeffs(), &schoolbook(&a, &b, 97)[..]);
        }
    }
}

#[test]
fn schoolbook_oracle_itself() {
    // (1 + 2X)(3 + 4X) = 3 + 10X + 8X^2 = -5 + 10X over X^2 + 1
    assert_eq!(schoolbook(&[1, 2], &[3, 4], 17), vec![12, 10]);
    // X * X^3 = X^4 = -1 over X^4 + 1
    assert_eq!(schoolbook(&[0, 1, 0, 0], &[0, 0, 0, 1], 97), vec![96, 0, 0, 0]);
}
