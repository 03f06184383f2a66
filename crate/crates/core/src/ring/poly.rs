use super::{check_degree, Modulus, NttTable, RingError};

/// An element of `Z_q[X]/(X^N + 1)` with coefficients reduced into `[0, q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingPoly {
    coeffs: Vec<u64>,
    modulus: u64,
}

impl RingPoly {
    /// Wraps already-reduced coefficients.
    pub fn new(coeffs: Vec<u64>, modulus: u64) -> Result<Self, RingError> {
        check_degree(coeffs.len())?;
        Modulus::new(modulus)?;
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, &c)| c >= modulus) {
            return Err(RingError::UnreducedCoefficient {
                index,
                value,
                modulus,
            });
        }
        Ok(Self { coeffs, modulus })
    }

    /// Reduces arbitrary signed coefficients modulo `q`.
    pub fn from_signed(coeffs: &[i64], modulus: u64) -> Result<Self, RingError> {
        let m = Modulus::new(modulus)?;
        Self::new(coeffs.iter().map(|&c| m.reduce_i64(c)).collect(), modulus)
    }

    pub fn zero(degree_n: usize, modulus: u64) -> Result<Self, RingError> {
        Self::new(vec![0; degree_n], modulus)
    }

    pub fn one(degree_n: usize, modulus: u64) -> Result<Self, RingError> {
        let mut coeffs = vec![0; degree_n];
        coeffs[0] = 1;
        Self::new(coeffs, modulus)
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Coefficients as centered representatives in `(-q/2, q/2]`.
    pub fn centered(&self) -> Vec<i64> {
        let m = self.ring_modulus();
        self.coeffs.iter().map(|&c| m.center(c)).collect()
    }

    fn ring_modulus(&self) -> Modulus {
        Modulus::new(self.modulus).expect("validated at construction")
    }

    fn check_compatible(&self, other: &Self) -> Result<Modulus, RingError> {
        if self.modulus != other.modulus || self.degree() != other.degree() {
            return Err(RingError::ParameterMismatch(format!(
                "(N={}, q={}) vs (N={}, q={})",
                self.degree(),
                self.modulus,
                other.degree(),
                other.modulus
            )));
        }
        Ok(self.ring_modulus())
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        let m = self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(Self {
            coeffs,
            modulus: self.modulus,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Self {
        let m = self.ring_modulus();
        Self {
            coeffs: self.coeffs.iter().map(|&a| m.neg(a)).collect(),
            modulus: self.modulus,
        }
    }

    /// Negacyclic product through the NTT. Builds a fresh table; use
    /// [`RingPoly::mul_with`] in hot loops.
    pub fn mul(&self, other: &Self) -> Result<Self, RingError> {
        self.check_compatible(other)?;
        let table = NttTable::new(self.degree(), self.modulus)?;
        self.mul_with(other, &table)
    }

    pub fn mul_with(&self, other: &Self, table: &NttTable) -> Result<Self, RingError> {
        let m = self.check_compatible(other)?;
        if table.degree() != self.degree() || table.modulus().value() != self.modulus {
            return Err(RingError::ParameterMismatch(
                "NTT table does not match operands".into(),
            ));
        }
        let mut a = self.coeffs.clone();
        let mut b = other.coeffs.clone();
        table.forward_in_place(&mut a);
        table.forward_in_place(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x = m.mul(*x, *y);
        }
        table.inverse_in_place(&mut a);
        Ok(Self {
            coeffs: a,
            modulus: self.modulus,
        })
    }
}
