use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HeError;
use crate::ring::{is_prime, ntt_primes_above, ntt_primes_below};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecurityProfile {
    /// Small ring degree for fast tests. Not secure.
    InsecureTest,
    DeskSecure,
}

impl SecurityProfile {
    pub fn code(self) -> u8 {
        match self {
            SecurityProfile::InsecureTest => 0,
            SecurityProfile::DeskSecure => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SecurityProfile::InsecureTest),
            1 => Some(SecurityProfile::DeskSecure),
            _ => None,
        }
    }
}

/// Ring degree, modulus chain `q_0..q_L` (level `L` on top), default scale
/// and error width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeParams {
    poly_modulus_degree: usize,
    modulus_chain: Vec<u64>,
    scale: f64,
    error_sigma: f64,
    security_profile: SecurityProfile,
}

pub const DEFAULT_ERROR_SIGMA: f64 = 3.2;
pub const DEFAULT_SCALE_BITS: u32 = 40;
const BASE_PRIME_BITS: u32 = 60;
const DESK_LEVELS: usize = 5;
const TEST_DEGREE: usize = 1024;

impl HeParams {
    pub fn new(
        poly_modulus_degree: usize,
        modulus_chain: Vec<u64>,
        scale: f64,
        error_sigma: f64,
        security_profile: SecurityProfile,
    ) -> Result<Self, HeError> {
        let n = poly_modulus_degree;
        if n < 4 || !n.is_power_of_two() {
            return Err(HeError::InvalidParams(format!(
                "ring degree {n} must be a power of two >= 4"
            )));
        }
        if modulus_chain.len() < 2 {
            return Err(HeError::InvalidParams(format!(
                "modulus chain needs at least 2 primes, got {}",
                modulus_chain.len()
            )));
        }
        for (i, &q) in modulus_chain.iter().enumerate() {
            if q % (2 * n as u64) != 1 || !is_prime(q) || q >= 1 << 62 {
                return Err(HeError::InvalidParams(format!(
                    "chain prime q_{i} = {q} is not an NTT-friendly prime below 2^62"
                )));
            }
            if modulus_chain[..i].contains(&q) {
                return Err(HeError::InvalidParams(format!("chain prime {q} repeated")));
            }
            if !(scale < q as f64) {
                return Err(HeError::InvalidParams(format!(
                    "scale {scale} must be below every chain prime (q_{i} = {q})"
                )));
            }
        }
        if !(scale > 1.0 && scale.is_finite()) {
            return Err(HeError::InvalidParams(format!("scale {scale} must be > 1")));
        }
        if !(error_sigma >= 0.0 && error_sigma.is_finite()) {
            return Err(HeError::InvalidParams(format!(
                "error sigma {error_sigma} must be finite and non-negative"
            )));
        }
        Ok(Self {
            poly_modulus_degree: n,
            modulus_chain,
            scale,
            error_sigma,
            security_profile,
        })
    }

    /// A 60-bit base prime followed by `levels` primes just above
    /// `2^scale_bits`, with scale `2^scale_bits`.
    pub fn with_levels(
        poly_modulus_degree: usize,
        levels: usize,
        scale_bits: u32,
        security_profile: SecurityProfile,
    ) -> Result<Self, HeError> {
        if !poly_modulus_degree.is_power_of_two() || poly_modulus_degree < 4 {
            return Err(HeError::InvalidParams(format!(
                "ring degree {poly_modulus_degree} must be a power of two >= 4"
            )));
        }
        let mut chain = ntt_primes_below(BASE_PRIME_BITS, poly_modulus_degree, 1);
        chain.extend(ntt_primes_above(scale_bits, poly_modulus_degree, levels));
        Self::new(
            poly_modulus_degree,
            chain,
            2f64.powi(scale_bits as i32),
            DEFAULT_ERROR_SIGMA,
            security_profile,
        )
    }

    /// Desk defaults: six primes (60-bit base plus five ~40-bit), scale 2^40.
    pub fn desk(poly_modulus_degree: usize) -> Result<Self, HeError> {
        Self::with_levels(
            poly_modulus_degree,
            DESK_LEVELS,
            DEFAULT_SCALE_BITS,
            SecurityProfile::DeskSecure,
        )
    }

    /// `N = 1024` with `levels` multiplicative levels. Insecure; tests only.
    pub fn insecure_test(levels: usize) -> Result<Self, HeError> {
        Self::with_levels(
            TEST_DEGREE,
            levels,
            DEFAULT_SCALE_BITS,
            SecurityProfile::InsecureTest,
        )
    }

    pub fn poly_modulus_degree(&self) -> usize {
        self.poly_modulus_degree
    }

    pub fn modulus_chain(&self) -> &[u64] {
        &self.modulus_chain
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn error_sigma(&self) -> f64 {
        self.error_sigma
    }

    pub fn security_profile(&self) -> SecurityProfile {
        self.security_profile
    }

    pub fn slot_count(&self) -> usize {
        self.poly_modulus_degree / 2
    }

    pub fn max_level(&self) -> usize {
        self.modulus_chain.len() - 1
    }

    /// `log2(q_0 * ... * q_level)`.
    pub fn log2_modulus(&self, level: usize) -> f64 {
        self.modulus_chain[..=level]
            .iter()
            .map(|&q| (q as f64).log2())
            .sum()
    }

    /// Canonical byte descriptor; also the input of [`HeParams::param_id`].
    pub fn descriptor_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.modulus_chain.len());
        out.extend_from_slice(&(self.poly_modulus_degree as u64).to_le_bytes());
        out.extend_from_slice(&(self.modulus_chain.len() as u32).to_le_bytes());
        for q in &self.modulus_chain {
            out.extend_from_slice(&q.to_le_bytes());
        }
        out.extend_from_slice(&self.scale.to_bits().to_le_bytes());
        out.extend_from_slice(&self.error_sigma.to_bits().to_le_bytes());
        out.push(self.security_profile.code());
        out
    }

    pub fn from_descriptor_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        let bad = || HeError::InvalidParams("truncated parameter descriptor".into());
        let take8 = |at: usize| -> Result<[u8; 8], HeError> {
            bytes
                .get(at..at + 8)
                .and_then(|b| b.try_into().ok())
                .ok_or_else(bad)
        };
        let n = u64::from_le_bytes(take8(0)?) as usize;
        let len = u32::from_le_bytes(bytes.get(8..12).ok_or_else(bad)?.try_into().unwrap()) as usize;
        if len > 64 {
            return Err(HeError::InvalidParams(format!("chain length {len} too large")));
        }
        let mut at = 12;
        let mut chain = Vec::with_capacity(len);
        for _ in 0..len {
            chain.push(u64::from_le_bytes(take8(at)?));
            at += 8;
        }
        let scale = f64::from_bits(u64::from_le_bytes(take8(at)?));
        let sigma = f64::from_bits(u64::from_le_bytes(take8(at + 8)?));
        let profile = *bytes.get(at + 16).ok_or_else(bad)?;
        if bytes.len() != at + 17 {
            return Err(HeError::InvalidParams("trailing bytes in parameter descriptor".into()));
        }
        let profile = SecurityProfile::from_code(profile)
            .ok_or_else(|| HeError::InvalidParams(format!("unknown security profile {profile}")))?;
        if n > 1 << 17 {
            return Err(HeError::InvalidParams(format!("ring degree {n} too large")));
        }
        Self::new(n, chain, scale, sigma, profile)
    }

    /// First 8 bytes (little-endian) of SHA-256 over the descriptor.
    pub fn param_id(&self) -> u64 {
        let digest = Sha256::digest(self.descriptor_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }
}
