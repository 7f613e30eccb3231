//! OFDM numerology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier count, guard interval and roll-off of a windowed OFDM system.
///
/// Sample 0 of every symbol is the first guard sample. A symbol occupies
/// `symbol_len() = N + N_GI` samples of the stream and its pulse spans
/// `pulse_len() = N_s + β` samples, so consecutive pulses overlap by `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_carriers: usize,
    pub guard_len: usize,
    pub rolloff_len: usize,
    pub sample_rate_hz: f64,
}

impl OfdmConfig {
    pub fn new(n_carriers: usize, guard_len: usize, rolloff_len: usize, sample_rate_hz: f64) -> Result<Self> {
        let config = Self {
            n_carriers,
            guard_len,
            rolloff_len,
            sample_rate_hz,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_carriers == 0 {
            return Err(Error::Config("carrier count must be positive".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.rolloff_len >= self.guard_len {
            return Err(Error::Config(format!(
                "roll-off ({}) must be shorter than the guard interval ({})",
                self.rolloff_len, self.guard_len
            )));
        }
        if self.guard_len > self.n_carriers {
            return Err(Error::Config(format!(
                "guard interval ({}) longer than the symbol core ({})",
                self.guard_len, self.n_carriers
            )));
        }
        Ok(())
    }

    /// `N_s = N + N_GI`.
    pub fn symbol_len(&self) -> usize {
        self.n_carriers + self.guard_len
    }

    /// `L = N_s + β`.
    pub fn pulse_len(&self) -> usize {
        self.symbol_len() + self.rolloff_len
    }

    pub fn carrier_spacing_hz(&self) -> f64 {
        self.sample_rate_hz / self.n_carriers as f64
    }

    /// Normalized frequency of carrier `k`, wrapped into (-1/2, 1/2].
    pub fn carrier_frequency(&self, k: usize) -> f64 {
        wrap_frequency(k as f64 / self.n_carriers as f64)
    }

    pub(crate) fn check_carrier(&self, k: usize) -> Result<()> {
        if k >= self.n_carriers {
            Err(Error::CarrierOutOfRange {
                index: k,
                n_carriers: self.n_carriers,
            })
        } else {
            Ok(())
        }
    }
}

/// Wraps a normalized frequency into (-1/2, 1/2].
pub fn wrap_frequency(f: f64) -> f64 {
    let mut w = f - f.floor();
    if w > 0.5 {
        w -= 1.0;
    }
    w
}

/// A channel whose impulse response spans `channel_len` samples is absorbed
/// by the effective cyclic prefix only if `channel_len < N_GI - β`.
pub fn validate_guard(config: &OfdmConfig, channel_len: usize) -> bool {
    config.guard_len > config.rolloff_len && channel_len < config.guard_len - config.rolloff_len
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_scale_config(rolloff: usize) -> OfdmConfig {
        OfdmConfig::new(4096, 1024, rolloff, 100e6).unwrap()
    }

    #[test]
    fn derived_lengths() {
        let c = full_scale_config(512);
        assert_eq!(c.symbol_len(), 5120);
        assert_eq!(c.pulse_len(), 5632);
        let r = OfdmConfig::new(16, 4, 0, 1.0).unwrap();
        assert_eq!(r.pulse_len(), r.symbol_len());
    }

    #[test]
    fn rejects_rolloff_not_below_guard() {
        assert!(OfdmConfig::new(16, 4, 4, 1.0).is_err());
        assert!(OfdmConfig::new(0, 4, 0, 1.0).is_err());
        assert!(OfdmConfig::new(16, 4, 0, 0.0).is_err());
    }

    #[test]
    fn guard_condition() {
        assert!(validate_guard(&full_scale_config(512), 511));
        assert!(!validate_guard(&full_scale_config(512), 512));
        assert!(validate_guard(&full_scale_config(0), 1000));
    }

    #[test]
    fn carrier_frequency_wraps() {
        let c = full_scale_config(512);
        assert_eq!(c.carrier_frequency(0), 0.0);
        assert_eq!(c.carrier_frequency(2048), 0.5);
        assert!((c.carrier_frequency(3072) + 0.25).abs() < 1e-15);
    }
}
