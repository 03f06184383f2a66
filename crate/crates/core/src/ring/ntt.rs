use super::{check_degree, is_prime, Modulus, RingError, RingPoly};

/// Precomputed twiddles for the negacyclic NTT of length `N` modulo an
/// NTT-friendly prime (`q = 1 mod 2N`).
///
/// Roots are stored in bit-reversed order so the forward transform is an
/// in-place Cooley-Tukey pass with the `psi` twist merged in, and the inverse a
/// Gentleman-Sande pass. Evaluations come out in bit-reversed order, which is
/// irrelevant for pointwise products.
#[derive(Clone, Debug)]
pub struct NttTable {
    degree_n: usize,
    modulus: Modulus,
    psi: u64,
    forward_roots: Vec<u64>,
    forward_shoup: Vec<u64>,
    inverse_roots: Vec<u64>,
    inverse_shoup: Vec<u64>,
    n_inverse: u64,
    n_inverse_shoup: u64,
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    pub fn new(degree_n: usize, q: u64) -> Result<Self, RingError> {
        check_degree(degree_n)?;
        let modulus = Modulus::new(q)?;
        let two_n = 2 * degree_n as u64;
        if q % two_n != 1 {
            return Err(RingError::UnsupportedModulus {
                modulus: q,
                reason: format!("not congruent to 1 mod {two_n}"),
            });
        }
        if !is_prime(q) {
            return Err(RingError::UnsupportedModulus {
                modulus: q,
                reason: "not prime".into(),
            });
        }
        let psi = (2..q)
            .map(|x| modulus.pow(x, (q - 1) / two_n))
            .find(|&g| modulus.pow(g, degree_n as u64) == q - 1)
            .ok_or_else(|| RingError::UnsupportedModulus {
                modulus: q,
                reason: "no primitive 2N-th root of unity".into(),
            })?;
        let psi_inv = modulus.inv(psi).expect("root of unity is a unit");
        let bits = degree_n.trailing_zeros();
        let mut forward_roots = vec![0; degree_n];
        let mut inverse_roots = vec![0; degree_n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..degree_n {
            let j = bit_reverse(i, bits);
            forward_roots[j] = p;
            inverse_roots[j] = pi;
            p = modulus.mul(p, psi);
            pi = modulus.mul(pi, psi_inv);
        }
        let forward_shoup = forward_roots.iter().map(|&w| modulus.shoup(w)).collect();
        let inverse_shoup = inverse_roots.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inverse = modulus.inv(degree_n as u64 % q).expect("N is a unit");
        Ok(Self {
            degree_n,
            modulus,
            psi,
            forward_roots,
            forward_shoup,
            inverse_roots,
            inverse_shoup,
            n_inverse,
            n_inverse_shoup: modulus.shoup(n_inverse),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree_n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// The primitive 2N-th root of unity the tables are built from.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn forward_in_place(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree_n);
        let m_ = &self.modulus;
        let n = self.degree_n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let (w, ws) = (self.forward_roots[m + i], self.forward_shoup[m + i]);
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = m_.mul_shoup(*y, w, ws);
                    *x = m_.add(u, v);
                    *y = m_.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse_in_place(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree_n);
        let m_ = &self.modulus;
        let n = self.degree_n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let j1 = 2 * i * t;
                let (w, ws) = (self.inverse_roots[h + i], self.inverse_shoup[h + i]);
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = m_.add(u, v);
                    *y = m_.mul_shoup(m_.sub(u, v), w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = m_.mul_shoup(*x, self.n_inverse, self.n_inverse_shoup);
        }
    }

    fn check_poly(&self, degree: usize, modulus: u64) -> Result<(), RingError> {
        if degree != self.degree_n || modulus != self.modulus.value() {
            return Err(RingError::ParameterMismatch(format!(
                "table is (N={}, q={}), operand is (N={degree}, q={modulus})",
                self.degree_n,
                self.modulus.value()
            )));
        }
        Ok(())
    }
}

/// Forward negacyclic transform of `a`.
pub fn ntt_forward(a: &RingPoly, table: &NttTable) -> Result<Vec<u64>, RingError> {
    table.check_poly(a.degree(), a.modulus())?;
    let mut evals = a.coeffs().to_vec();
    table.forward_in_place(&mut evals);
    Ok(evals)
}

/// Inverse of [`ntt_forward`].
pub fn ntt_inverse(evals: &[u64], table: &NttTable) -> Result<RingPoly, RingError> {
    table.check_poly(evals.len(), table.modulus.value())?;
    if let Some((index, &value)) = evals
        .iter()
        .enumerate()
        .find(|(_, &v)| v >= table.modulus.value())
    {
        return Err(RingError::UnreducedCoefficient {
            index,
            value,
            modulus: table.modulus.value(),
        });
    }
    let mut coeffs = evals.to_vec();
    table.inverse_in_place(&mut coeffs);
    RingPoly::new(coeffs, table.modulus.value())
}
