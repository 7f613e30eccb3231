//! Symbol shaping windows `g(n)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::OfdmConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    RaisedCosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingWindow {
    pub kind: WindowKind,
    pub samples: Vec<f64>,
}

impl ShapingWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Raised-cosine ramp of `len` samples; no sample is exactly 0 or 1.
pub fn rc_ramp(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (PI * (n + 1) as f64 / (len + 1) as f64).cos()))
        .collect()
}

pub fn build_shaping_window(config: &OfdmConfig, kind: WindowKind) -> Result<ShapingWindow> {
    config.validate()?;
    let beta = config.rolloff_len;
    let len = config.pulse_len();
    let samples = match kind {
        WindowKind::Rectangular => {
            if beta > 0 {
                return Err(Error::Config("rectangular window requires zero roll-off".into()));
            }
            vec![1.0; len]
        }
        WindowKind::RaisedCosine => {
            let mut g = vec![1.0; len];
            for (n, v) in rc_ramp(beta).into_iter().enumerate() {
                g[n] = v;
                g[len - 1 - n] = v;
            }
            g
        }
    };
    Ok(ShapingWindow { kind, samples })
}

/// Symmetric Hamming pulse of `len` samples.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_is_all_ones() {
        let c = OfdmConfig::new(16, 4, 0, 1.0).unwrap();
        let w = build_shaping_window(&c, WindowKind::Rectangular).unwrap();
        assert_eq!(w.samples, vec![1.0; 20]);
    }

    #[test]
    fn rectangular_with_rolloff_is_rejected() {
        let c = OfdmConfig::new(16, 4, 2, 1.0).unwrap();
        assert!(build_shaping_window(&c, WindowKind::Rectangular).is_err());
    }

    #[test]
    fn full_scale_flat_region() {
        let c = OfdmConfig::new(4096, 1024, 512, 100e6).unwrap();
        let w = build_shaping_window(&c, WindowKind::RaisedCosine).unwrap();
        assert_eq!(w.len(), 5632);
        assert!(w.samples[512..5120].iter().all(|&v| v == 1.0));
        assert!(w.samples[..512].iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(w.samples[..512].windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn overlap_add_is_unity() {
        for beta in [1usize, 3, 8, 64] {
            let c = OfdmConfig::new(128, 96, beta, 1.0).unwrap();
            let w = build_shaping_window(&c, WindowKind::RaisedCosine).unwrap();
            let ns = c.symbol_len();
            for n in 0..beta {
                assert!((w.samples[n] + w.samples[n + ns] - 1.0).abs() < 1e-15);
            }
            // three concatenated periods
            let mut acc = vec![0.0; 3 * ns + beta];
            for i in 0..3 {
                for (n, v) in w.samples.iter().enumerate() {
                    acc[i * ns + n] += v;
                }
            }
            for v in &acc[beta..2 * ns + beta] {
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }
}
