use rand::Rng;

use super::CkksContext;
use crate::ring::uniform_coeffs;

/// A ring element in RNS form: one residue vector per chain prime
/// `q_0..q_level`. Whether it holds coefficients or NTT evaluations is up to
/// the caller; everything public in this crate keeps coefficient form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnsPoly {
    residues: Vec<Vec<u64>>,
}

impl RnsPoly {
    pub fn zero(ctx: &CkksContext, level: usize) -> Self {
        Self {
            residues: vec![vec![0; ctx.degree()]; level + 1],
        }
    }

    pub fn from_residues(residues: Vec<Vec<u64>>) -> Self {
        Self { residues }
    }

    pub fn from_signed(ctx: &CkksContext, coeffs: &[i64], level: usize) -> Self {
        let residues = (0..=level)
            .map(|j| {
                let m = ctx.modulus(j);
                coeffs.iter().map(|&c| m.reduce_i64(c)).collect()
            })
            .collect();
        Self { residues }
    }

    pub fn uniform<R: Rng + ?Sized>(ctx: &CkksContext, level: usize, rng: &mut R) -> Self {
        let residues = (0..=level)
            .map(|j| uniform_coeffs(ctx.degree(), ctx.modulus(j).value(), rng))
            .collect();
        Self { residues }
    }

    pub fn level(&self) -> usize {
        self.residues.len() - 1
    }

    pub fn residues(&self) -> &[Vec<u64>] {
        &self.residues
    }

    pub fn residue(&self, j: usize) -> &[u64] {
        &self.residues[j]
    }

    /// Restriction to the first `level + 1` primes.
    pub fn truncated(&self, level: usize) -> Self {
        Self {
            residues: self.residues[..=level].to_vec(),
        }
    }

    pub fn truncate(&mut self, level: usize) {
        self.residues.truncate(level + 1);
    }

    pub fn add(&self, other: &Self, ctx: &CkksContext) -> Self {
        debug_assert_eq!(self.level(), other.level());
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .enumerate()
            .map(|(j, (a, b))| {
                let m = ctx.modulus(j);
                a.iter().zip(b).map(|(&x, &y)| m.add(x, y)).collect()
            })
            .collect();
        Self { residues }
    }

    pub fn add_assign(&mut self, other: &Self, ctx: &CkksContext) {
        debug_assert_eq!(self.level(), other.level());
        for (j, (a, b)) in self.residues.iter_mut().zip(&other.residues).enumerate() {
            let m = ctx.modulus(j);
            for (x, &y) in a.iter_mut().zip(b) {
                *x = m.add(*x, y);
            }
        }
    }

    pub fn sub_assign(&mut self, other: &Self, ctx: &CkksContext) {
        debug_assert_eq!(self.level(), other.level());
        for (j, (a, b)) in self.residues.iter_mut().zip(&other.residues).enumerate() {
            let m = ctx.modulus(j);
            for (x, &y) in a.iter_mut().zip(b) {
                *x = m.sub(*x, y);
            }
        }
    }

    pub fn negate(&self, ctx: &CkksContext) -> Self {
        let residues = self
            .residues
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let m = ctx.modulus(j);
                r.iter().map(|&x| m.neg(x)).collect()
            })
            .collect();
        Self { residues }
    }

    pub(crate) fn forward_ntt(&mut self, ctx: &CkksContext) {
        for (j, r) in self.residues.iter_mut().enumerate() {
            ctx.table(j).forward_in_place(r);
        }
    }

    pub(crate) fn inverse_ntt(&mut self, ctx: &CkksContext) {
        for (j, r) in self.residues.iter_mut().enumerate() {
            ctx.table(j).inverse_in_place(r);
        }
    }

    /// Pointwise product of two NTT-form operands.
    pub(crate) fn pointwise(&self, other: &Self, ctx: &CkksContext) -> Self {
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .enumerate()
            .map(|(j, (a, b))| {
                let m = ctx.modulus(j);
                a.iter().zip(b).map(|(&x, &y)| m.mul(x, y)).collect()
            })
            .collect();
        Self { residues }
    }

    /// `self += a * b` pointwise, all three in NTT form.
    pub(crate) fn pointwise_accumulate(&mut self, a: &Self, b: &Self, ctx: &CkksContext) {
        for (j, acc) in self.residues.iter_mut().enumerate() {
            let m = ctx.modulus(j);
            for ((z, &x), &y) in acc.iter_mut().zip(&a.residues[j]).zip(&b.residues[j]) {
                *z = m.add(*z, m.mul(x, y));
            }
        }
    }

    /// Negacyclic product of two coefficient-form operands.
    pub fn mul(&self, other: &Self, ctx: &CkksContext) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        a.forward_ntt(ctx);
        b.forward_ntt(ctx);
        let mut c = a.pointwise(&b, ctx);
        c.inverse_ntt(ctx);
        c
    }

    /// Divides by the top prime with rounding and drops it:
    /// `round(x / q_level)` modulo `q_0..q_{level-1}`.
    pub(crate) fn rescale(&mut self, ctx: &CkksContext) {
        let level = self.level();
        assert!(level >= 1, "rescale needs a prime to drop");
        let last = self.residues.pop().expect("level >= 1");
        let last_mod = ctx.modulus(level);
        let centered: Vec<i64> = last.iter().map(|&c| last_mod.center(c)).collect();
        for (j, r) in self.residues.iter_mut().enumerate() {
            let m = ctx.modulus(j);
            let inv = ctx.inv_last(level)[j];
            let inv_shoup = m.shoup(inv);
            for (x, &c) in r.iter_mut().zip(&centered) {
                *x = m.mul_shoup(m.sub(*x, m.reduce_i64(c)), inv, inv_shoup);
            }
        }
    }

    /// Exact centered integer coefficients using only the `q_0` residue.
    /// Valid while every coefficient has magnitude below `q_0 / 2`.
    pub fn centered_base(&self, ctx: &CkksContext) -> Vec<i64> {
        let m = ctx.modulus(0);
        self.residues[0].iter().map(|&c| m.center(c)).collect()
    }
}
