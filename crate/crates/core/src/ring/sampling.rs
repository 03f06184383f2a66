use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Modulus, RingError, RingPoly};

/// Error samples farther than this many standard deviations are redrawn.
pub const ERROR_TAIL_CUT: f64 = 6.0;

pub fn uniform_coeffs<R: Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Vec<u64> {
    (0..n).map(|_| rng.random_range(0..q)).collect()
}

/// Coefficients uniform in `{-1, 0, 1}`.
pub fn ternary_coeffs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

/// Rounded Gaussian with standard deviation `sigma`, tail-cut at
/// [`ERROR_TAIL_CUT`] sigma.
pub fn error_coeffs<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    if sigma <= 0.0 {
        return vec![0; n];
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let bound = ERROR_TAIL_CUT * sigma;
    (0..n)
        .map(|_| loop {
            let x = normal.sample(rng).round();
            if x.abs() <= bound {
                break x as i64;
            }
        })
        .collect()
}

pub fn sample_uniform<R: Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Result<RingPoly, RingError> {
    Modulus::new(q)?;
    RingPoly::new(uniform_coeffs(n, q, rng), q)
}

pub fn sample_ternary<R: Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Result<RingPoly, RingError> {
    RingPoly::from_signed(&ternary_coeffs(n, rng), q)
}

pub fn sample_error<R: Rng + ?Sized>(
    n: usize,
    q: u64,
    sigma: f64,
    rng: &mut R,
) -> Result<RingPoly, RingError> {
    RingPoly::from_signed(&error_coeffs(n, sigma, rng), q)
}
