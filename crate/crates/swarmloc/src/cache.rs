//! Process-wide cache of error-conversion moments.
//!
//! Values depend only on the quantised key (each key has its own derivation
//! seed), so concurrent fills from any number of threads and in any order give
//! identical results.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use swarmloc_core::channel::RangingChannel;
use swarmloc_core::localize::{
    combine, zeta_moments, ConversionKey, ConvertedError, ErrorConverter, CONVERSION_SAMPLES,
};
use swarmloc_core::Result;

#[derive(Debug, Default)]
pub struct SharedConversionCache {
    moments: RwLock<HashMap<ConversionKey, (f64, f64)>>,
}

impl SharedConversionCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cache shared by every simulation in this process.
    pub fn global() -> &'static SharedConversionCache {
        static CACHE: OnceLock<SharedConversionCache> = OnceLock::new();
        CACHE.get_or_init(SharedConversionCache::new)
    }

    pub fn len(&self) -> usize {
        self.moments.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn moments(&self, key: ConversionKey) -> (f64, f64) {
        if let Some(m) = self.moments.read().expect("cache lock").get(&key) {
            return *m;
        }
        let m = zeta_moments(key, CONVERSION_SAMPLES);
        *self.moments.write().expect("cache lock").entry(key).or_insert(m)
    }
}

impl ErrorConverter for SharedConversionCache {
    fn convert(&self, d_meas: f64, sigma_p: f64, channel: &RangingChannel) -> Result<ConvertedError> {
        swarmloc_core::localize::check_conversion_input(d_meas, sigma_p)?;
        let key = ConversionKey::quantize(d_meas, sigma_p);
        Ok(combine(self.moments(key), d_meas, channel))
    }
}
