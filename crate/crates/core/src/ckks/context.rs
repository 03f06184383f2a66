use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::{HeError, HeParams};
use crate::ring::{Modulus, NttTable};

/// Precomputation shared by every object created under one [`HeParams`]:
/// NTT tables per chain prime, rescaling inverses and the encoder's
/// rotation group and roots of unity.
#[derive(Debug)]
pub struct CkksContext {
    params: HeParams,
    param_id: u64,
    tables: Vec<NttTable>,
    // inv_last[l][j] = q_l^{-1} mod q_j for j < l
    inv_last: Vec<Vec<u64>>,
    pub(crate) rot_group: Vec<usize>,
    pub(crate) ksi_pows: Vec<Complex64>,
}

fn cache() -> &'static Mutex<HashMap<u64, Arc<CkksContext>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<CkksContext>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl CkksContext {
    pub fn new(params: &HeParams) -> Result<Arc<Self>, HeError> {
        let id = params.param_id();
        if let Some(ctx) = cache().lock().expect("context cache poisoned").get(&id) {
            return Ok(ctx.clone());
        }
        let ctx = Arc::new(Self::build(params)?);
        cache()
            .lock()
            .expect("context cache poisoned")
            .insert(id, ctx.clone());
        Ok(ctx)
    }

    fn build(params: &HeParams) -> Result<Self, HeError> {
        let n = params.poly_modulus_degree();
        let tables = params
            .modulus_chain()
            .iter()
            .map(|&q| NttTable::new(n, q))
            .collect::<Result<Vec<_>, _>>()?;
        let inv_last = (0..tables.len())
            .map(|l| {
                let ql = tables[l].modulus().value();
                tables[..l]
                    .iter()
                    .map(|t| {
                        let m = t.modulus();
                        m.inv(m.reduce(ql)).expect("distinct primes are coprime")
                    })
                    .collect()
            })
            .collect();
        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|j| {
                let angle = 2.0 * PI * j as f64 / m as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            param_id: params.param_id(),
            tables,
            inv_last,
            rot_group,
            ksi_pows,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }

    pub fn degree(&self) -> usize {
        self.params.poly_modulus_degree()
    }

    pub fn max_level(&self) -> usize {
        self.params.max_level()
    }

    pub fn table(&self, index: usize) -> &NttTable {
        &self.tables[index]
    }

    pub fn modulus(&self, index: usize) -> &Modulus {
        self.tables[index].modulus()
    }

    pub(crate) fn inv_last(&self, level: usize) -> &[u64] {
        &self.inv_last[level]
    }

    pub fn check_level(&self, level: usize) -> Result<(), HeError> {
        if level > self.max_level() {
            return Err(HeError::InvalidParams(format!(
                "level {level} above top level {}",
                self.max_level()
            )));
        }
        Ok(())
    }
}
